//! Synchronous federated rounds: selection, local training, aggregation.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::cost::{round_overheads, CostConstants, Overheads};
use crate::error::{Error, Result};
use crate::model::{evaluate, local_train, LocalTrainConfig, LocalTrainReport, ModelParams};
use crate::population::ClientPopulation;
use crate::rng::{stream_rng, Stream};

/// The tunable pair: participants per round (`M`) and training passes (`E`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParams {
    #[serde(rename = "m")]
    pub participants: usize,
    #[serde(rename = "e")]
    pub passes: f64,
}

impl HyperParams {
    pub fn new(participants: usize, passes: f64) -> Self {
        HyperParams { participants, passes }
    }

    pub fn validate(&self, num_clients: usize) -> Result<()> {
        if self.participants == 0 || self.participants > num_clients {
            return Err(Error::config(
                "hyper.m",
                format!("{} participants with {num_clients} clients", self.participants),
            ));
        }
        if !(self.passes.is_finite() && self.passes > 0.0) {
            return Err(Error::config("hyper.e", "training passes must be > 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum AggregatorConfig {
    FedAvg,
    FedNova,
    FedAdagrad {
        #[serde(default = "default_server_lr")]
        server_lr: f64,
        #[serde(default)]
        beta1: f64,
        #[serde(default = "default_tau")]
        tau: f64,
    },
}

fn default_server_lr() -> f64 {
    0.1
}

fn default_tau() -> f64 {
    1e-3
}

impl AggregatorConfig {
    pub fn fedadagrad() -> Self {
        AggregatorConfig::FedAdagrad {
            server_lr: default_server_lr(),
            beta1: 0.0,
            tau: default_tau(),
        }
    }

    pub fn init(&self, num_params: usize) -> Result<AggregatorState> {
        Ok(match *self {
            AggregatorConfig::FedAvg => AggregatorState::FedAvg,
            AggregatorConfig::FedNova => AggregatorState::FedNova,
            AggregatorConfig::FedAdagrad { server_lr, beta1, tau } => {
                if !(tau.is_finite() && tau > 0.0) {
                    return Err(Error::config("aggregator.tau", "must be > 0"));
                }
                if !(0.0..1.0).contains(&beta1) {
                    return Err(Error::config("aggregator.beta1", "must lie in [0, 1)"));
                }
                if !(server_lr.is_finite() && server_lr > 0.0) {
                    return Err(Error::config("aggregator.server_lr", "must be > 0"));
                }
                AggregatorState::FedAdagrad(AdagradState {
                    server_lr,
                    beta1,
                    tau,
                    momentum: vec![0.0; num_params],
                    accumulator: vec![0.0; num_params],
                })
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdagradState {
    pub server_lr: f64,
    pub beta1: f64,
    pub tau: f64,
    pub momentum: Vec<f64>,
    /// Sum of squared pseudo-gradients, elementwise, never negative.
    pub accumulator: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum AggregatorState {
    FedAvg,
    FedNova,
    FedAdagrad(AdagradState),
}

impl AggregatorState {
    pub fn aggregate(&mut self, global: &ModelParams, reports: &[(LocalTrainReport, usize)]) -> Result<ModelParams> {
        match self {
            AggregatorState::FedAvg => aggregate_fedavg(global, reports),
            AggregatorState::FedNova => aggregate_fednova(global, reports),
            AggregatorState::FedAdagrad(state) => aggregate_fedadagrad(state, global, reports),
        }
    }
}

/// Data-size weights `n_k / Σ n_j`, after checking the reports line up with
/// the global model.
fn weights(global: &ModelParams, reports: &[(LocalTrainReport, usize)]) -> Result<Vec<f64>> {
    let fault = |reason: String| Error::Aggregation { round: 0, reason };
    if reports.is_empty() {
        return Err(fault("no reports to aggregate".into()));
    }
    for (r, _) in reports {
        if r.params.len() != global.len() {
            return Err(fault(format!(
                "client {} sent {} parameters, expected {}",
                r.client_id,
                r.params.len(),
                global.len()
            )));
        }
    }
    let total: usize = reports.iter().map(|(_, n)| n).sum();
    if total == 0 {
        return Err(fault("participants hold no data".into()));
    }
    Ok(reports.iter().map(|(_, n)| *n as f64 / total as f64).collect())
}

/// `Σ p_k w_k` with `p_k = n_k / Σ n_j`.
pub fn aggregate_fedavg(global: &ModelParams, reports: &[(LocalTrainReport, usize)]) -> Result<ModelParams> {
    let p = weights(global, reports)?;
    let mut out = vec![0.0; global.len()];
    for ((r, _), pk) in reports.iter().zip(&p) {
        for (o, w) in out.iter_mut().zip(&r.params.weights) {
            *o += pk * w;
        }
    }
    Ok(global.with_weights(out))
}

/// Normalized averaging: each client delta is divided by its local step count
/// `u_k`, the normalized deltas are data-weighted, and the result is rescaled
/// by the data-weighted mean step count `Σ p_k u_k`.
pub fn aggregate_fednova(global: &ModelParams, reports: &[(LocalTrainReport, usize)]) -> Result<ModelParams> {
    let p = weights(global, reports)?;
    if let Some((r, _)) = reports.iter().find(|(r, _)| r.num_local_updates == 0) {
        return Err(Error::Aggregation {
            round: 0,
            reason: format!("client {} reported zero local updates", r.client_id),
        });
    }
    let tau_eff: f64 = reports
        .iter()
        .zip(&p)
        .map(|((r, _), pk)| pk * r.num_local_updates as f64)
        .sum();
    let mut direction = vec![0.0; global.len()];
    for ((r, _), pk) in reports.iter().zip(&p) {
        let scale = pk / r.num_local_updates as f64;
        for ((d, w), g) in direction.iter_mut().zip(&r.params.weights).zip(&global.weights) {
            *d += scale * (w - g);
        }
    }
    let out = global
        .weights
        .iter()
        .zip(&direction)
        .map(|(g, d)| g + tau_eff * d)
        .collect();
    Ok(global.with_weights(out))
}

/// Server-side Adagrad on the data-weighted mean client delta.
pub fn aggregate_fedadagrad(
    state: &mut AdagradState,
    global: &ModelParams,
    reports: &[(LocalTrainReport, usize)],
) -> Result<ModelParams> {
    let p = weights(global, reports)?;
    if state.momentum.len() != global.len() || state.accumulator.len() != global.len() {
        return Err(Error::Aggregation {
            round: 0,
            reason: "optimizer state does not match model size".into(),
        });
    }
    let mut pseudo = vec![0.0; global.len()];
    for ((r, _), pk) in reports.iter().zip(&p) {
        for ((g, w), gw) in pseudo.iter_mut().zip(&r.params.weights).zip(&global.weights) {
            *g += pk * (w - gw);
        }
    }
    let mut out = global.weights.clone();
    for i in 0..out.len() {
        let g = pseudo[i];
        state.momentum[i] = state.beta1 * state.momentum[i] + (1.0 - state.beta1) * g;
        state.accumulator[i] += g * g;
        out[i] += state.server_lr * state.momentum[i] / (state.accumulator[i].sqrt() + state.tau);
    }
    Ok(global.with_weights(out))
}

/// Uniform `M`-subset of client indices for round `round`, ascending.
pub fn select_participants(round: usize, participants: usize, num_clients: usize, seed: u64) -> Result<Vec<usize>> {
    if participants == 0 || participants > num_clients {
        return Err(Error::config(
            "hyper.m",
            format!("cannot select {participants} of {num_clients} clients"),
        ));
    }
    let mut rng = stream_rng(seed, Stream::Selection, &[round as u64]);
    let mut ids = index::sample(&mut rng, num_clients, participants).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub hyper: HyperParams,
    /// Indices into the training population, ascending.
    pub participant_ids: Vec<usize>,
    pub max_nk: usize,
    pub sum_nk: usize,
    pub accuracy: f64,
    pub overheads: Overheads,
}

/// Everything a round needs that stays fixed across rounds.
pub struct RoundContext<'a> {
    pub train: &'a ClientPopulation,
    pub test: &'a ClientPopulation,
    pub training: &'a LocalTrainConfig,
    pub costs: &'a CostConstants,
    pub seed: u64,
}

/// One synchronous round. Every participant starts from `global`; reports
/// are aggregated in ascending client order.
pub fn run_round(
    round: usize,
    global: &ModelParams,
    hyper: HyperParams,
    aggregator: &mut AggregatorState,
    ctx: &RoundContext<'_>,
) -> Result<(ModelParams, RoundRecord)> {
    hyper.validate(ctx.train.num_clients())?;
    let ids = select_participants(round, hyper.participants, ctx.train.num_clients(), ctx.seed)?;
    let mut reports = Vec::with_capacity(ids.len());
    for &i in &ids {
        let client = &ctx.train.clients[i];
        let report =
            local_train(global, client, hyper.passes, ctx.training, ctx.seed, round).map_err(|e| e.in_round(round))?;
        reports.push((report, client.len()));
    }
    let next = aggregator.aggregate(global, &reports).map_err(|e| e.in_round(round))?;
    let nks: Vec<usize> = reports.iter().map(|(_, n)| *n).collect();
    let overheads = round_overheads(ctx.costs, hyper.passes, &nks)?;
    let accuracy = evaluate(&next, ctx.test);
    let record = RoundRecord {
        round,
        hyper,
        max_nk: nks.iter().copied().max().unwrap_or(0),
        sum_nk: nks.iter().sum(),
        participant_ids: ids,
        accuracy,
        overheads,
    };
    Ok((next, record))
}
