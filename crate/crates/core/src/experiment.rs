//! Running experiments to a target accuracy, and everything built on runs:
//! trace export, baseline-vs-tuned comparison, sweeps and trend checks.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Mode};
use crate::cost::{CostConstants, OverheadLedger, Overheads};
use crate::engine::{run_round, HyperParams, RoundContext, RoundRecord};
use crate::error::{Error, Result};
use crate::model::{evaluate, init_model};
use crate::population::{generate_population, split_train_test, ClientPopulation};
use crate::tuner::{overall_improvement, Decision, Preference, TunerState};

pub const TRACE_FORMAT_VERSION: u32 = 1;

pub const CSV_HEADER: &str =
    "round,M,E,accuracy,ct,tt,cl,tl,cum_t,cum_q,cum_z,cum_v,decision_flag,dM_sign,dE_sign,I_value";

/// Train/test populations and cost constants for one config. Building this
/// once and reusing it across seeds skips regenerating the data.
pub struct Task {
    pub train: ClientPopulation,
    pub test: ClientPopulation,
    pub costs: CostConstants,
}

impl Task {
    pub fn prepare(cfg: &ExperimentConfig) -> Result<Task> {
        cfg.validate()?;
        let population = generate_population(&cfg.population)?;
        let split_seed = cfg.split.seed.unwrap_or(cfg.population.seed);
        let (train, test) = split_train_test(&population, cfg.split.test_fraction, split_seed)?;
        Ok(Task {
            train,
            test,
            costs: cfg.cost_constants()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionEvent {
    /// Round after which the decision was taken; it applies from the next round.
    pub round: usize,
    #[serde(flatten)]
    pub decision: Decision,
}

/// Everything about a run except the per-round records. This is what the
/// JSON sidecar holds, and all a comparison needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub version: u32,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub initial_accuracy: f64,
    pub final_accuracy: f64,
    pub final_hyper: HyperParams,
    pub reached_target: bool,
    pub rounds_used: usize,
    pub ledger: OverheadLedger,
    pub decisions: Vec<DecisionEvent>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub summary: TraceSummary,
    pub records: Vec<RoundRecord>,
}

pub fn run_experiment(cfg: &ExperimentConfig, seed: u64) -> Result<Trace> {
    let task = Task::prepare(cfg)?;
    run_task(&task, cfg, seed)
}

/// Run rounds until test accuracy reaches the target or the round cap is hit.
/// In fedtune mode the tuner sees every round that did not reach the target.
pub fn run_task(task: &Task, cfg: &ExperimentConfig, seed: u64) -> Result<Trace> {
    cfg.validate()?;
    let num_clients = task.train.num_clients();
    cfg.initial.validate(num_clients)?;
    let mut global = init_model(seed, cfg.model, task.train.feature_dim(), task.train.num_classes)?;
    let mut aggregator = cfg.aggregator.init(global.len())?;
    let initial_accuracy = evaluate(&global, &task.test);
    let mut tuner = match cfg.run.mode {
        Mode::Fixed => None,
        Mode::FedTune => Some(TunerState::new(
            cfg.tuner_config()?,
            cfg.initial,
            num_clients,
            initial_accuracy,
        )?),
    };
    let ctx = RoundContext {
        train: &task.train,
        test: &task.test,
        training: &cfg.training,
        costs: &task.costs,
        seed,
    };

    let mut hyper = cfg.initial;
    let mut ledger = OverheadLedger::new();
    let mut records = Vec::new();
    let mut decisions = Vec::new();
    let mut reached = false;
    let mut accuracy = initial_accuracy;
    for round in 1..=cfg.run.round_cap {
        let (next, record) = run_round(round, &global, hyper, &mut aggregator, &ctx)?;
        global = next;
        ledger.accrue(&record.overheads)?;
        accuracy = record.accuracy;
        let overheads = record.overheads;
        records.push(record);
        if accuracy >= cfg.run.target_accuracy {
            reached = true;
            break;
        }
        if let Some(tuner) = tuner.as_mut() {
            if let Some(decision) = tuner.step(accuracy, &overheads)? {
                hyper = decision.to;
                decisions.push(DecisionEvent { round, decision });
            }
        }
    }
    if !reached {
        warn!(
            "seed {seed}: target {} not reached within {} rounds (last accuracy {accuracy:.4})",
            cfg.run.target_accuracy, cfg.run.round_cap
        );
    }
    Ok(Trace {
        summary: TraceSummary {
            version: TRACE_FORMAT_VERSION,
            seed,
            config: cfg.clone(),
            initial_accuracy,
            final_accuracy: accuracy,
            final_hyper: hyper,
            reached_target: reached,
            rounds_used: records.len(),
            ledger,
            decisions,
        },
        records,
    })
}

/// Re-sum the per-round overheads of `records` in order.
pub fn resum(records: &[RoundRecord]) -> Overheads {
    records.iter().fold(Overheads::default(), |acc, r| acc + r.overheads)
}

fn sign_field(v: f64) -> &'static str {
    if v > 0.0 {
        "1"
    } else {
        "-1"
    }
}

/// The per-round CSV body, header included.
pub fn trace_csv(trace: &Trace) -> String {
    let by_round: BTreeMap<usize, &Decision> = trace.summary.decisions.iter().map(|d| (d.round, &d.decision)).collect();
    let mut out = String::with_capacity(128 * (trace.records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    let mut cum = Overheads::default();
    for r in &trace.records {
        cum += r.overheads;
        let o = r.overheads;
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},",
            r.round,
            r.hyper.participants,
            r.hyper.passes,
            r.accuracy,
            o.comp_time,
            o.trans_time,
            o.comp_load,
            o.trans_load,
            cum.comp_time,
            cum.trans_time,
            cum.comp_load,
            cum.trans_load
        );
        match by_round.get(&r.round) {
            Some(d) => {
                let i = d.comparison.map(|v| v.to_string()).unwrap_or_default();
                let _ = writeln!(out, "1,{},{},{}", sign_field(d.delta_m), sign_field(d.delta_e), i);
            }
            None => out.push_str("0,0,0,\n"),
        }
    }
    out
}

pub fn trace_json(trace: &Trace) -> String {
    let mut s = serde_json::to_string_pretty(&trace.summary).expect("summary is always serializable");
    s.push('\n');
    s
}

fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Write the per-round CSV to `csv_path` and the JSON summary next to it
/// (same stem, `.json`). Returns the sidecar path.
pub fn export_trace(trace: &Trace, csv_path: &Path) -> Result<PathBuf> {
    write_file(csv_path, &trace_csv(trace))?;
    let json = sidecar_path(csv_path);
    write_file(&json, &trace_json(trace))?;
    Ok(json)
}

pub fn load_summary(json_path: &Path) -> Result<TraceSummary> {
    let text = std::fs::read_to_string(json_path).map_err(|e| Error::io(json_path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: json_path.into(),
        reason: e.to_string(),
    })
}

/// One parsed row of an exported trace CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub round: usize,
    pub participants: usize,
    pub passes: f64,
    pub accuracy: f64,
    pub overheads: Overheads,
    pub cumulative: Overheads,
    pub decision: bool,
    pub dm_sign: i8,
    pub de_sign: i8,
    pub comparison: Option<f64>,
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.into(),
        reason: format!("line {line}: {reason}"),
    };
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(parse_err(1, "unexpected header".into()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 16 {
            return Err(parse_err(i + 2, format!("expected 16 fields, found {}", f.len())));
        }
        let num = |j: usize| {
            f[j].parse::<f64>()
                .map_err(|e| parse_err(i + 2, format!("field {j}: {e}")))
        };
        let int = |j: usize| {
            f[j].parse::<i64>()
                .map_err(|e| parse_err(i + 2, format!("field {j}: {e}")))
        };
        rows.push(CsvRow {
            round: int(0)? as usize,
            participants: int(1)? as usize,
            passes: num(2)?,
            accuracy: num(3)?,
            overheads: Overheads::new(num(4)?, num(5)?, num(6)?, num(7)?),
            cumulative: Overheads::new(num(8)?, num(9)?, num(10)?, num(11)?),
            decision: int(12)? == 1,
            dm_sign: int(13)? as i8,
            de_sign: int(14)? as i8,
            comparison: if f[15].is_empty() { None } else { Some(num(15)?) },
        });
    }
    Ok(rows)
}

/// Improvement of a tuned run over a baseline run in percent. Refused unless
/// both runs reached their target.
pub fn improvement(baseline: &TraceSummary, tuned: &TraceSummary, pref: &Preference) -> Result<f64> {
    if !baseline.reached_target || !tuned.reached_target {
        return Err(Error::Comparison(format!(
            "seed {}: target not reached (baseline {}, tuned {})",
            tuned.seed, baseline.reached_target, tuned.reached_target
        )));
    }
    overall_improvement(&baseline.ledger.totals, &tuned.ledger.totals, pref)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub per_seed: Vec<(u64, f64)>,
    pub mean: f64,
    /// Population standard deviation across seeds.
    pub std: f64,
    /// Tuned runs without a comparable baseline (missing seed or an unreached target).
    pub excluded: usize,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Pair tuned and baseline runs by seed and summarize the per-seed improvement.
pub fn compare_runs(baseline: &[TraceSummary], tuned: &[TraceSummary], pref: &Preference) -> Result<ComparisonReport> {
    let by_seed: BTreeMap<u64, &TraceSummary> = baseline.iter().map(|b| (b.seed, b)).collect();
    let mut per_seed = Vec::new();
    let mut excluded = 0;
    for t in tuned {
        let Some(b) = by_seed.get(&t.seed) else {
            warn!("seed {}: no baseline run", t.seed);
            excluded += 1;
            continue;
        };
        match improvement(b, t, pref) {
            Ok(v) => per_seed.push((t.seed, v)),
            Err(e) => {
                warn!("{e}");
                excluded += 1;
            }
        }
    }
    if per_seed.is_empty() {
        return Err(Error::Comparison("no comparable baseline/tuned pairs".into()));
    }
    let values: Vec<f64> = per_seed.iter().map(|(_, v)| *v).collect();
    let (mean, std) = mean_std(&values);
    Ok(ComparisonReport {
        per_seed,
        mean,
        std,
        excluded,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum SweepGrid {
    /// Fixed-mode runs over `M` at the config's initial `E`.
    Participants(Vec<usize>),
    /// Fixed-mode runs over `E` at the config's initial `M`.
    Passes(Vec<f64>),
    /// A fixed baseline plus one fedtune run per preference.
    Preferences(Vec<Preference>),
}

impl SweepGrid {
    fn is_empty(&self) -> bool {
        match self {
            SweepGrid::Participants(v) => v.is_empty(),
            SweepGrid::Passes(v) => v.is_empty(),
            SweepGrid::Preferences(v) => v.is_empty(),
        }
    }

    /// `(label, config)` per grid point.
    pub fn points(&self, base: &ExperimentConfig) -> Vec<(String, ExperimentConfig)> {
        match self {
            SweepGrid::Participants(ms) => ms
                .iter()
                .map(|&m| {
                    let h = HyperParams::new(m, base.initial.passes);
                    (format!("m{m}"), base.with_mode(Mode::Fixed).with_initial(h))
                })
                .collect(),
            SweepGrid::Passes(es) => es
                .iter()
                .map(|&e| {
                    let h = HyperParams::new(base.initial.participants, e);
                    (format!("e{e}"), base.with_mode(Mode::Fixed).with_initial(h))
                })
                .collect(),
            SweepGrid::Preferences(prefs) => std::iter::once(("baseline".to_string(), base.with_mode(Mode::Fixed)))
                .chain(prefs.iter().map(|p| {
                    (
                        format!("pref-{}", p.label()),
                        base.with_preference(*p).with_mode(Mode::FedTune),
                    )
                }))
                .collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepRun {
    pub label: String,
    pub seed: u64,
    pub outcome: std::result::Result<Trace, String>,
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub grid: SweepGrid,
    pub runs: Vec<SweepRun>,
}

/// One run per grid point per seed. A failing run is recorded and the sweep
/// moves on. With `out_dir`, traces go to `<out_dir>/<label>/seed-<s>.csv`.
pub fn sweep(base: &ExperimentConfig, grid: &SweepGrid, out_dir: Option<&Path>) -> Result<SweepOutcome> {
    if grid.is_empty() {
        return Err(Error::config("sweep.grid", "grid is empty"));
    }
    let task = Task::prepare(base)?;
    let mut runs = Vec::new();
    for (label, cfg) in grid.points(base) {
        for &seed in &base.run.seeds {
            info!("sweep point {label}, seed {seed}");
            let outcome = run_task(&task, &cfg, seed).map_err(|e| e.to_string());
            if let (Some(dir), Ok(trace)) = (out_dir, &outcome) {
                export_trace(trace, &dir.join(&label).join(format!("seed-{seed}.csv")))?;
            }
            if let Err(e) = &outcome {
                warn!("sweep point {label}, seed {seed} failed: {e}");
            }
            runs.push(SweepRun {
                label: label.clone(),
                seed,
                outcome,
            });
        }
    }
    let outcome = SweepOutcome {
        grid: grid.clone(),
        runs,
    };
    if let Some(dir) = out_dir {
        write_file(&dir.join("summary.csv"), &outcome.summary_csv())?;
        if let SweepGrid::Preferences(_) = grid {
            write_file(&dir.join("table.csv"), &outcome.preference_table()?.to_csv())?;
        }
    }
    Ok(outcome)
}

impl SweepOutcome {
    /// Successful runs of one grid point.
    pub fn summaries(&self, label: &str) -> Vec<&TraceSummary> {
        self.runs
            .iter()
            .filter(|r| r.label == label)
            .filter_map(|r| r.outcome.as_ref().ok().map(|t| &t.summary))
            .collect()
    }

    /// One row per run with the final ledger.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "label,seed,status,reached,rounds,comp_time,trans_time,comp_load,trans_load,final_m,final_e\n",
        );
        for r in &self.runs {
            match &r.outcome {
                Ok(t) => {
                    let s = &t.summary;
                    let o = s.ledger.totals;
                    let _ = writeln!(
                        out,
                        "{},{},ok,{},{},{},{},{},{},{},{}",
                        r.label,
                        r.seed,
                        s.reached_target,
                        s.rounds_used,
                        o.comp_time,
                        o.trans_time,
                        o.comp_load,
                        o.trans_load,
                        s.final_hyper.participants,
                        s.final_hyper.passes
                    );
                }
                Err(_) => {
                    let _ = writeln!(out, "{},{},failed,false,0,,,,,,", r.label, r.seed);
                }
            }
        }
        out
    }

    /// Baseline row plus one row per preference, with means over seeds and
    /// the improvement over the baseline.
    pub fn preference_table(&self) -> Result<PreferenceTable> {
        let SweepGrid::Preferences(prefs) = &self.grid else {
            return Err(Error::config("sweep.grid", "preference table needs a preference sweep"));
        };
        let baseline: Vec<TraceSummary> = self.summaries("baseline").into_iter().cloned().collect();
        let mut rows = vec![PreferenceRow::from_runs(None, &baseline, None)];
        for p in prefs {
            let tuned: Vec<TraceSummary> = self
                .summaries(&format!("pref-{}", p.label()))
                .into_iter()
                .cloned()
                .collect();
            let cmp = compare_runs(&baseline, &tuned, p).ok();
            rows.push(PreferenceRow::from_runs(Some(*p), &tuned, cmp));
        }
        Ok(PreferenceTable { rows })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PreferenceRow {
    /// `None` for the fixed baseline.
    pub preference: Option<Preference>,
    pub runs: usize,
    pub mean_totals: Overheads,
    pub mean_final_m: f64,
    pub mean_final_e: f64,
    pub comparison: Option<ComparisonReport>,
}

impl PreferenceRow {
    fn from_runs(preference: Option<Preference>, runs: &[TraceSummary], comparison: Option<ComparisonReport>) -> Self {
        let n = runs.len().max(1) as f64;
        let totals = runs.iter().fold(Overheads::default(), |a, s| a + s.ledger.totals);
        PreferenceRow {
            preference,
            runs: runs.len(),
            mean_totals: totals.map(|v| v / n),
            mean_final_m: runs.iter().map(|s| s.final_hyper.participants as f64).sum::<f64>() / n,
            mean_final_e: runs.iter().map(|s| s.final_hyper.passes).sum::<f64>() / n,
            comparison,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PreferenceTable {
    pub rows: Vec<PreferenceRow>,
}

impl PreferenceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "alpha,beta,gamma,delta,runs,comp_time,trans_time,comp_load,trans_load,final_m,final_e,improvement_pct,std_pct,excluded\n",
        );
        for r in &self.rows {
            let w = match r.preference {
                Some(p) => p.weights().map(|v| format!("{v:.2}")).join(","),
                None => "-,-,-,-".into(),
            };
            let o = r.mean_totals;
            let (imp, std, excl) = match &r.comparison {
                Some(c) => (c.mean.to_string(), c.std.to_string(), c.excluded.to_string()),
                None => (String::new(), String::new(), String::new()),
            };
            let _ = writeln!(
                out,
                "{w},{},{},{},{},{},{},{},{imp},{std},{excl}",
                r.runs, o.comp_time, o.trans_time, o.comp_load, o.trans_load, r.mean_final_m, r.mean_final_e
            );
        }
        out
    }

    /// Mean of the per-preference mean improvements (rows with a comparison).
    pub fn overall_mean(&self) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter_map(|r| r.comparison.as_ref().map(|c| c.mean))
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Expectation {
    NonIncreasing,
    NonDecreasing,
}

/// Outcome of a monotonicity check on a sequence of medians.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Monotonicity {
    /// `(pair index, relative magnitude)` of each adjacent pair moving the wrong way.
    pub violations: Vec<(usize, f64)>,
    pub pass: bool,
}

/// Monotone up to `max_violations` adjacent pairs, each smaller than
/// `tolerance` relative to the earlier value.
pub fn check_monotone(values: &[f64], expect: Expectation, max_violations: usize, tolerance: f64) -> Monotonicity {
    let violations: Vec<(usize, f64)> = values
        .windows(2)
        .enumerate()
        .filter_map(|(i, w)| {
            let wrong = match expect {
                Expectation::NonIncreasing => w[1] > w[0],
                Expectation::NonDecreasing => w[1] < w[0],
            };
            wrong.then(|| (i, (w[1] - w[0]).abs() / w[0].abs()))
        })
        .collect();
    let pass = violations.len() <= max_violations && violations.iter().all(|&(_, m)| m < tolerance);
    Monotonicity { violations, pass }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub const ASPECT_NAMES: [&str; 4] = ["CompT", "TransT", "CompL", "TransL"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrendCheck {
    pub axis: &'static str,
    pub aspect: &'static str,
    pub expectation: Expectation,
    pub grid: Vec<f64>,
    pub medians: Vec<f64>,
    pub unreached: usize,
    pub result: Monotonicity,
}

impl TrendCheck {
    pub fn pass(&self) -> bool {
        self.unreached == 0 && self.result.pass
    }
}

/// Grid for the trend study.
#[derive(Clone, Debug, PartialEq)]
pub struct TrendGrid {
    pub participants: Vec<usize>,
    pub passes_for_m: f64,
    pub passes: Vec<f64>,
    pub participants_for_e: usize,
}

impl Default for TrendGrid {
    fn default() -> Self {
        TrendGrid {
            participants: vec![1, 5, 10, 20],
            passes_for_m: 8.0,
            passes: vec![1.0, 2.0, 4.0, 8.0],
            participants_for_e: 10,
        }
    }
}

/// Expected direction of each overhead along `M` and `E`, restricted to the
/// relations the trend study asserts.
pub const M_TRENDS: [(usize, Expectation); 3] = [
    (1, Expectation::NonIncreasing),
    (3, Expectation::NonDecreasing),
    (2, Expectation::NonDecreasing),
];
pub const E_TRENDS: [(usize, Expectation); 3] = [
    (1, Expectation::NonIncreasing),
    (0, Expectation::NonDecreasing),
    (2, Expectation::NonDecreasing),
];

/// Median totals per grid point (over seeds) and the number of runs that
/// failed or missed the target.
fn medians_over(outcome: &SweepOutcome, labels: &[String]) -> (Vec<[f64; 4]>, usize) {
    let mut unreached = 0;
    let mut out = Vec::new();
    for label in labels {
        let runs: Vec<&SweepRun> = outcome.runs.iter().filter(|r| &r.label == label).collect();
        let ok: Vec<[f64; 4]> = runs
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok())
            .filter(|t| t.summary.reached_target)
            .map(|t| t.summary.ledger.totals.as_array())
            .collect();
        unreached += runs.len() - ok.len();
        out.push(std::array::from_fn(|i| {
            median(&ok.iter().map(|a| a[i]).collect::<Vec<_>>())
        }));
    }
    (out, unreached)
}

/// Run the `M` and `E` sweeps and check the overhead trends on medians, with
/// one permitted adjacent violation below 5%.
pub fn trend_report(base: &ExperimentConfig, grid: &TrendGrid, out_dir: Option<&Path>) -> Result<Vec<TrendCheck>> {
    let m_base = base.with_initial(HyperParams::new(base.initial.participants, grid.passes_for_m));
    let m_sweep = sweep(
        &m_base,
        &SweepGrid::Participants(grid.participants.clone()),
        out_dir.map(|d| d.join("m-sweep")).as_deref(),
    )?;
    let e_base = base.with_initial(HyperParams::new(grid.participants_for_e, base.initial.passes));
    let e_sweep = sweep(
        &e_base,
        &SweepGrid::Passes(grid.passes.clone()),
        out_dir.map(|d| d.join("e-sweep")).as_deref(),
    )?;
    let mut checks = Vec::new();
    let mut add = |axis: &'static str, outcome: &SweepOutcome, xs: Vec<f64>, trends: &[(usize, Expectation)]| {
        let labels: Vec<String> = outcome.grid.points(base).into_iter().map(|(l, _)| l).collect();
        let (medians, unreached) = medians_over(outcome, &labels);
        for &(aspect, expectation) in trends {
            let series: Vec<f64> = medians.iter().map(|m| m[aspect]).collect();
            checks.push(TrendCheck {
                axis,
                aspect: ASPECT_NAMES[aspect],
                expectation,
                grid: xs.clone(),
                result: check_monotone(&series, expectation, 1, 0.05),
                medians: series,
                unreached,
            });
        }
    };
    add(
        "M",
        &m_sweep,
        grid.participants.iter().map(|&m| m as f64).collect(),
        &M_TRENDS,
    );
    add("E", &e_sweep, grid.passes.clone(), &E_TRENDS);
    Ok(checks)
}
