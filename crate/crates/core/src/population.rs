//! Synthetic federated client populations.
//!
//! A population is a set of clients, each holding a small labelled dataset.
//! Three knobs shape it:
//!
//! * per-client point counts follow a discrete power law truncated to
//!   `[min_points, max_points]`, so most clients hold a handful of points and
//!   a few hold hundreds;
//! * each client's label mixture is drawn from a symmetric Dirichlet with the
//!   given concentration (small values give strongly skewed clients, very
//!   large values approach the global uniform mixture);
//! * features are drawn from one isotropic Gaussian per class, with class
//!   means spread `class_separation` away from the origin.
//!
//! Everything is a pure function of the [`PopulationSpec`].

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Format version written into population dumps.
pub const POPULATION_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub seed: u64,
    pub num_clients: usize,
    pub min_points: usize,
    pub max_points: usize,
    /// Exponent of the count law, `P(n) ∝ n^-shape`.
    pub shape: f64,
    /// Dirichlet concentration of the per-client label mixture.
    pub concentration: f64,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub class_separation: f64,
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_clients == 0 {
            return Err(Error::config("population.num_clients", "must be at least 1"));
        }
        if self.min_points == 0 {
            return Err(Error::config("population.min_points", "must be at least 1"));
        }
        if self.max_points < self.min_points {
            return Err(Error::config(
                "population.max_points",
                format!("{} is below min_points {}", self.max_points, self.min_points),
            ));
        }
        if !(self.shape.is_finite() && self.shape >= 0.0) {
            return Err(Error::config("population.shape", "must be finite and >= 0"));
        }
        if !(self.concentration.is_finite() && self.concentration > 0.0) {
            return Err(Error::config("population.concentration", "must be finite and > 0"));
        }
        if self.feature_dim == 0 {
            return Err(Error::config("population.feature_dim", "must be at least 1"));
        }
        if self.num_classes == 0 {
            return Err(Error::config("population.num_classes", "must be at least 1"));
        }
        if !(self.class_separation.is_finite() && self.class_separation > 0.0) {
            return Err(Error::config("population.class_separation", "must be finite and > 0"));
        }
        Ok(())
    }
}

/// One client's local data. Features are stored row-major, `dim` values per point.
#[derive(Clone, Debug, PartialEq)]
pub struct ClientDataset {
    pub client_id: usize,
    pub dim: usize,
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
}

impl ClientDataset {
    pub fn new(client_id: usize, dim: usize, features: Vec<f64>, labels: Vec<usize>) -> Self {
        assert_eq!(
            features.len(),
            dim * labels.len(),
            "feature buffer does not match labels"
        );
        ClientDataset {
            client_id,
            dim,
            features,
            labels,
        }
    }

    /// `n_k`, the number of local points.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn point(&self, i: usize) -> (&[f64], usize) {
        (&self.features[i * self.dim..(i + 1) * self.dim], self.labels[i])
    }

    pub fn label_histogram(&self, num_classes: usize) -> Vec<usize> {
        let mut h = vec![0; num_classes];
        for &y in &self.labels {
            h[y] += 1;
        }
        h
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClientPopulation {
    pub clients: Vec<ClientDataset>,
    pub num_classes: usize,
}

impl ClientPopulation {
    pub fn new(clients: Vec<ClientDataset>, num_classes: usize) -> Self {
        ClientPopulation { clients, num_classes }
    }

    /// `K`.
    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    /// `n = Σ n_k`.
    pub fn total_points(&self) -> usize {
        self.clients.iter().map(ClientDataset::len).sum()
    }

    pub fn feature_dim(&self) -> usize {
        self.clients.first().map_or(0, |c| c.dim)
    }

    pub fn counts(&self) -> Vec<usize> {
        self.clients.iter().map(ClientDataset::len).collect()
    }

    pub fn label_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.num_classes];
        for c in &self.clients {
            for &y in &c.labels {
                h[y] += 1;
            }
        }
        h
    }
}

/// Inverse-CDF sampler for the truncated discrete power law.
struct CountLaw {
    min: usize,
    cdf: Vec<f64>,
}

impl CountLaw {
    fn new(min: usize, max: usize, shape: f64) -> Self {
        let mut cdf = Vec::with_capacity(max - min + 1);
        let mut acc = 0.0;
        for n in min..=max {
            acc += (n as f64).powf(-shape);
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        CountLaw { min, cdf }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        self.min + idx
    }
}

fn dirichlet(rng: &mut ChaCha8Rng, concentration: f64, k: usize) -> Vec<f64> {
    let gamma = Gamma::new(concentration, 1.0).expect("validated concentration");
    let mut p: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = p.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        p.iter_mut().for_each(|x| *x /= sum);
    } else {
        // every gamma draw underflowed; collapse onto one random class
        let hot = rng.random_range(0..k);
        p.iter_mut()
            .enumerate()
            .for_each(|(i, x)| *x = if i == hot { 1.0 } else { 0.0 });
    }
    p
}

/// Systematic sampling of `n` labels from `mix`: unbiased, and each class count
/// lands within one of `n * mix[c]`.
fn systematic_labels(rng: &mut ChaCha8Rng, mix: &[f64], n: usize) -> Vec<usize> {
    let offset: f64 = rng.random();
    let mut labels = Vec::with_capacity(n);
    let mut class = 0;
    let mut upper = mix[0];
    for i in 0..n {
        let u = (offset + i as f64) / n as f64;
        while u >= upper && class + 1 < mix.len() {
            class += 1;
            upper += mix[class];
        }
        labels.push(class);
    }
    labels
}

pub fn generate_population(spec: &PopulationSpec) -> Result<ClientPopulation> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, Stream::Population, &[]);
    let d = spec.feature_dim;
    let c = spec.num_classes;

    let means: Vec<Vec<f64>> = (0..c)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            v.into_iter().map(|x| spec.class_separation * x / norm).collect()
        })
        .collect();

    let law = CountLaw::new(spec.min_points, spec.max_points, spec.shape);
    let mut clients = Vec::with_capacity(spec.num_clients);
    for id in 0..spec.num_clients {
        let n = law.sample(&mut rng);
        let mix = dirichlet(&mut rng, spec.concentration, c);
        let mut labels = systematic_labels(&mut rng, &mix, n);
        labels.shuffle(&mut rng);
        let mut features = Vec::with_capacity(n * d);
        for &y in &labels {
            for mu in &means[y] {
                let z: f64 = rng.sample(StandardNormal);
                features.push(mu + z);
            }
        }
        clients.push(ClientDataset::new(id, d, features, labels));
    }
    Ok(ClientPopulation::new(clients, c))
}

/// Client-level train/test split. Returns `(train, test)`; the test side gets
/// `round(K * test_fraction)` clients. Both halves keep ascending client ids.
pub fn split_train_test(
    population: &ClientPopulation,
    test_fraction: f64,
    seed: u64,
) -> Result<(ClientPopulation, ClientPopulation)> {
    let k = population.num_clients();
    if k < 2 {
        return Err(Error::config(
            "population.num_clients",
            "a split needs at least 2 clients",
        ));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::config("test_fraction", "must lie strictly between 0 and 1"));
    }
    let n_test = (k as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test == k {
        return Err(Error::config(
            "test_fraction",
            format!("{test_fraction} leaves one side of a {k}-client split empty"),
        ));
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(&mut stream_rng(seed, Stream::Split, &[]));
    let mut is_test = vec![false; k];
    for &i in &order[..n_test] {
        is_test[i] = true;
    }
    let (test, train): (Vec<_>, Vec<_>) = population
        .clients
        .iter()
        .cloned()
        .enumerate()
        .partition(|(i, _)| is_test[*i]);
    let strip = |v: Vec<(usize, ClientDataset)>| v.into_iter().map(|(_, c)| c).collect();
    Ok((
        ClientPopulation::new(strip(train), population.num_classes),
        ClientPopulation::new(strip(test), population.num_classes),
    ))
}

#[derive(Serialize, Deserialize)]
struct PopulationDump {
    version: u32,
    spec: PopulationSpec,
    num_classes: usize,
    clients: Vec<ClientDump>,
}

#[derive(Serialize, Deserialize)]
struct ClientDump {
    client_id: usize,
    points: Vec<(Vec<f64>, usize)>,
}

/// Write a population as self-describing JSON (version, spec echo, points).
pub fn dump_population(population: &ClientPopulation, spec: &PopulationSpec, path: &Path) -> Result<()> {
    let dump = PopulationDump {
        version: POPULATION_FORMAT_VERSION,
        spec: spec.clone(),
        num_classes: population.num_classes,
        clients: population
            .clients
            .iter()
            .map(|c| ClientDump {
                client_id: c.client_id,
                points: (0..c.len())
                    .map(|i| {
                        let (x, y) = c.point(i);
                        (x.to_vec(), y)
                    })
                    .collect(),
            })
            .collect(),
    };
    let text = serde_json::to_string(&dump).expect("population dump is always serializable");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_population(path: &Path) -> Result<(ClientPopulation, PopulationSpec)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dump: PopulationDump = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.into(),
        reason: e.to_string(),
    })?;
    if dump.version != POPULATION_FORMAT_VERSION {
        return Err(Error::Parse {
            path: path.into(),
            reason: format!("unsupported population format version {}", dump.version),
        });
    }
    let clients = dump
        .clients
        .into_iter()
        .map(|c| {
            let dim = c.points.first().map_or(dump.spec.feature_dim, |p| p.0.len());
            let mut features = Vec::new();
            let mut labels = Vec::new();
            for (x, y) in c.points {
                features.extend(x);
                labels.push(y);
            }
            ClientDataset::new(c.client_id, dim, features, labels)
        })
        .collect();
    Ok((ClientPopulation::new(clients, dump.num_classes), dump.spec))
}
