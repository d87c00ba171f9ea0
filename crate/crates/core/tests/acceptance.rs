//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Every run below is exported under a scratch directory. The determinism
//! criterion executes the suite a second time into a fresh directory and
//! compares the two artifact trees byte for byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flsim::config::{ExperimentConfig, Mode};
use flsim::cost::{round_comp_load, round_comp_time, round_overheads, round_trans_load, round_trans_time};
use flsim::cost::{CostConstants, OverheadLedger, Overheads};
use flsim::engine::HyperParams;
use flsim::experiment::{
    compare_runs, export_trace, load_summary, read_trace_csv, run_task, sweep, trend_report, SweepGrid, SweepOutcome,
    Task, TrendGrid,
};
use flsim::model::{init_model, loss, loss_and_grad, preset_descriptor, Architecture};
use flsim::population::ClientDataset;
use flsim::tuner::{
    compare, directional_estimate, overall_improvement, Direction, Preference, TunerConfig, TunerState, E_SIGNS,
    M_SIGNS,
};

type Outcome = std::result::Result<String, String>;

/// Predicate on a run's final `(M, E)`.
type Terminal = fn(usize, f64) -> bool;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    outcome: Outcome,
    elapsed: Duration,
}

fn ensure(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn pref(w: [f64; 4]) -> Preference {
    Preference::try_from(w).expect("valid preference")
}

fn err(e: flsim::Error) -> String {
    e.to_string()
}

// Criterion 1: formula examples of the cost model and the tuner.

fn formula_suite() -> Outcome {
    let mut checked = 0;
    let mut check = |cond: bool, what: &str| -> std::result::Result<(), String> {
        checked += 1;
        ensure(cond, format!("formula example failed: {what}"))
    };
    check(
        round_comp_time(10.0, 2.0, &[3, 7]).map_err(err)? == 140.0,
        "CompT C1=10 E=2 n={3,7}",
    )?;
    check(
        round_comp_time(1.0, 1.0, &[5]).map_err(err)? == 5.0,
        "CompT single participant",
    )?;
    check(
        round_comp_time(4.0, 0.5, &[8]).map_err(err)? == 16.0,
        "CompT fractional E",
    )?;
    check(round_trans_time(7.0) == 7.0, "TransT constant")?;
    let mut ledger = OverheadLedger::new();
    for _ in 0..13 {
        ledger
            .accrue(&Overheads::new(0.0, round_trans_time(7.0), 0.0, 0.0))
            .map_err(err)?;
    }
    check(ledger.totals.trans_time == 7.0 * 13.0, "TransT cumulative C2*R")?;
    let c2 = preset_descriptor("resnet10").map_err(err)?.num_params;
    let mut ledger = OverheadLedger::new();
    for _ in 0..100 {
        ledger
            .accrue(&Overheads::new(0.0, round_trans_time(c2), 0.0, 0.0))
            .map_err(err)?;
    }
    check(
        close(ledger.totals.trans_time, 7.97e6, 1e-12),
        "TransT resnet10 over 100 rounds",
    )?;
    check(
        round_comp_load(10.0, 2.0, &[3, 7]).map_err(err)? == 200.0,
        "CompL C3=10 E=2 n={3,7}",
    )?;
    check(
        round_comp_load(3.0, 1.5, &[9]).map_err(err)? == round_comp_time(3.0, 1.5, &[9]).map_err(err)?,
        "CompL equals CompT for one participant",
    )?;
    check(
        round_comp_load(3.0, 4.0, &[2, 5]).map_err(err)? == 2.0 * round_comp_load(3.0, 2.0, &[2, 5]).map_err(err)?,
        "CompL linear in E",
    )?;
    check(round_trans_load(5.0, 4) == 20.0, "TransL C4=5 M=4")?;
    let (c4, m, r) = (3.0, 8usize, 10usize);
    let mut fixed = OverheadLedger::new();
    let mut halved = OverheadLedger::new();
    for i in 0..r {
        fixed
            .accrue(&Overheads::new(0.0, 0.0, 0.0, round_trans_load(c4, m)))
            .map_err(err)?;
        let mr = if i < r / 2 { m } else { m / 2 };
        halved
            .accrue(&Overheads::new(0.0, 0.0, 0.0, round_trans_load(c4, mr)))
            .map_err(err)?;
    }
    check(fixed.totals.trans_load == c4 * (r * m) as f64, "TransL fixed M")?;
    check(
        halved.totals.trans_load == c4 * (r / 2) as f64 * (m + m / 2) as f64,
        "TransL piecewise",
    )?;
    let costs = CostConstants {
        c1: 2.0,
        c2: 3.0,
        c3: 5.0,
        c4: 7.0,
    };
    let one = round_overheads(&costs, 2.0, &[4, 6]).map_err(err)?;
    let mut fresh = OverheadLedger::new();
    fresh.accrue(&one).map_err(err)?;
    check(fresh.totals == one, "fresh ledger plus one round")?;
    let rounds = [
        one,
        Overheads::new(1.0, 2.0, 3.0, 4.0),
        Overheads::new(0.5, 0.25, 8.0, 16.0),
    ];
    let mut fwd = OverheadLedger::new();
    let mut rev = OverheadLedger::new();
    rounds.iter().for_each(|o| fwd.accrue(o).unwrap());
    rounds.iter().rev().for_each(|o| rev.accrue(o).unwrap());
    check(fwd.totals == rev.totals, "accrual order")?;

    let quarter = pref([0.25; 4]);
    let x = Overheads::new(3.0, 4.0, 5.0, 6.0);
    check(compare(&x, &x, &quarter).map_err(err)? == 0.0, "compare identity")?;
    let a1 = pref([1.0, 0.0, 0.0, 0.0]);
    let c = compare(
        &Overheads::new(100.0, 1.0, 1.0, 1.0),
        &Overheads::new(80.0, 1.0, 1.0, 1.0),
        &a1,
    )
    .map_err(err)?;
    check(close(c, -0.2, 1e-12), "compare single term")?;
    let tq = pref([0.5, 0.5, 0.0, 0.0]);
    let c = compare(
        &Overheads::new(100.0, 100.0, 1.0, 1.0),
        &Overheads::new(110.0, 80.0, 1.0, 1.0),
        &tq,
    )
    .map_err(err)?;
    check(close(c, -0.05, 1e-12), "compare two terms")?;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let cur = Overheads::from_array(std::array::from_fn(|_| rng.random_range(0.1..10.0)));
        let prv = Overheads::from_array(std::array::from_fn(|_| rng.random_range(0.1..10.0)));
        let slopes: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.01..5.0));
        let dm = |w| directional_estimate(&pref(w), &slopes, &M_SIGNS, &cur, &prv).unwrap();
        let de = |w| directional_estimate(&pref(w), &slopes, &E_SIGNS, &cur, &prv).unwrap();
        check(dm([1.0, 0.0, 0.0, 0.0]) >= 0.0, "alpha=1 gives dM >= 0")?;
        check(dm([0.0, 0.0, 1.0, 0.0]) <= 0.0, "gamma=1 gives dM <= 0")?;
        check(de([0.0, 0.0, 0.0, 1.0]) >= 0.0, "delta=1 gives dE >= 0")?;
        check(de([1.0, 0.0, 0.0, 0.0]) <= 0.0, "alpha=1 gives dE <= 0")?;
    }
    let prv = Overheads::new(10.0, 10.0, 10.0, 10.0);
    let cur = prv.map(|v| v / 0.9);
    let dm = directional_estimate(&quarter, &[1.0; 4], &M_SIGNS, &cur, &prv).map_err(err)?;
    check(dm.abs() <= 1e-12, "symmetric cancellation of dM")?;
    let de = directional_estimate(&pref([0.0, 0.5, 0.5, 0.0]), &[1.0; 4], &E_SIGNS, &cur, &prv).map_err(err)?;
    check(de.abs() <= 1e-12, "beta=gamma cancellation of dE")?;

    let tuner_cfg = |p| TunerConfig::new(p);
    let mut gate = TunerState::new(tuner_cfg(quarter), HyperParams::new(20, 20.0), 100, 0.5).map_err(err)?;
    check(gate.step(0.505, &x).map_err(err)?.is_none(), "gain 0.005 emits nothing")?;
    let gamma = pref([0.0, 0.0, 1.0, 0.0]);
    for (m, e) in [(20, 20.0), (7, 3.0), (1, 1.0)] {
        let mut t = TunerState::new(tuner_cfg(gamma), HyperParams::new(m, e), 100, 0.1).map_err(err)?;
        let d = t.step(0.2, &x).map_err(err)?.ok_or("gamma=1 emitted no decision")?;
        check(
            d.to == HyperParams::new((m - 1).max(1), (e - 1.0).max(1.0)),
            "gamma=1 decreases M and E by one",
        )?;
    }
    let mut first = TunerState::new(
        tuner_cfg(pref([0.4, 0.1, 0.3, 0.2])),
        HyperParams::new(20, 20.0),
        100,
        0.3,
    )
    .map_err(err)?;
    let d = first
        .step(0.35, &Overheads::new(2.0, 4.0, 6.0, 8.0))
        .map_err(err)?
        .ok_or("no first decision")?;
    check(
        d.comparison.is_none() && d.eta == [1.0; 4] && d.zeta == [1.0; 4],
        "first activation keeps slopes",
    )?;
    check(
        close(d.delta_m, 0.0, 1e-12) && close(d.delta_e, -0.4, 1e-12),
        "first activation estimates",
    )?;
    check(d.to == HyperParams::new(19, 19.0), "first activation move")?;

    check(
        overall_improvement(&x, &x, &a1).map_err(err)? == 0.0,
        "improvement identity",
    )?;
    let gain = overall_improvement(
        &Overheads::new(0.94e12, 1.0, 1.0, 1.0),
        &Overheads::new(0.42e12, 1.0, 1.0, 1.0),
        &a1,
    )
    .map_err(err)?;
    check((gain - 55.3).abs() < 0.05, "improvement alpha=1 0.94e12 to 0.42e12")?;
    let worse = overall_improvement(
        &Overheads::new(1.0, 1.0, 1.0, 1.0),
        &Overheads::new(2.0, 0.1, 0.1, 0.1),
        &a1,
    )
    .map_err(err)?;
    check(worse < 0.0, "improvement sign on degradation")?;
    Ok(format!("{checked} checks"))
}

// Criterion 3: analytic gradients against central differences.

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for case in 0..100u64 {
        let dim = rng.random_range(1..6);
        let classes = rng.random_range(2..5);
        let arch = if case % 2 == 0 {
            Architecture::Linear
        } else {
            Architecture::Mlp {
                hidden: rng.random_range(1..6),
            }
        };
        let n = rng.random_range(1..8);
        let features: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let data = ClientDataset::new(0, dim, features, labels);
        let params = init_model(case, arch, dim, classes).map_err(err)?;
        let idx: Vec<usize> = (0..n).collect();
        let (_, grad) = loss_and_grad(&params, &data, &idx);
        let h = 1e-6;
        let numeric: Vec<f64> = (0..params.len())
            .map(|i| {
                let mut w = params.weights.clone();
                w[i] += h;
                let up = loss(&params.with_weights(w.clone()), &data, &idx);
                w[i] -= 2.0 * h;
                let down = loss(&params.with_weights(w), &data, &idx);
                (up - down) / (2.0 * h)
            })
            .collect();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = grad.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let scale = norm(&grad).max(norm(&numeric));
        let rel = if scale < 1e-12 {
            norm(&diff)
        } else {
            norm(&diff) / scale
        };
        worst = worst.max(rel);
        ensure(rel <= 1e-4, format!("case {case}: relative error {rel:.3e}"))?;
    }
    Ok(format!("100 instances, worst relative error {worst:.2e}"))
}

// Criterion 8, unit half: exact D-fold multiplication in all four branches.

fn penalty_branches() -> std::result::Result<(), String> {
    let d = 10.0;
    for last_m in [Direction::Up, Direction::Down] {
        for last_e in [Direction::Up, Direction::Down] {
            let mut cfg = TunerConfig::new(pref([0.25; 4]));
            cfg.penalty = d;
            let mut t = TunerState::new(cfg, HyperParams::new(10, 10.0), 100, 0.5).map_err(err)?;
            t.prv = Some(Overheads::new(1.0, 1.0, 1.0, 1.0));
            t.eta = [1.0, 2.0, 3.0, 4.0];
            t.zeta = [5.0, 6.0, 7.0, 8.0];
            t.last_m = Some(last_m);
            t.last_e = Some(last_e);
            let dec = t
                .step(0.6, &Overheads::new(2.0, 2.0, 2.0, 2.0))
                .map_err(err)?
                .ok_or("no decision")?;
            ensure(dec.penalized, "worse interval was not penalized")?;
            let mut eta = [1.0, 2.0, 3.0, 4.0];
            let mut zeta = [5.0, 6.0, 7.0, 8.0];
            let against_m = if last_m == Direction::Up { [2, 3] } else { [0, 1] };
            let against_e = if last_e == Direction::Up { [0, 2] } else { [1, 3] };
            against_m.iter().for_each(|&i| eta[i] *= d);
            against_e.iter().for_each(|&i| zeta[i] *= d);
            ensure(
                dec.eta == eta && dec.zeta == zeta,
                format!("branch ({last_m:?}, {last_e:?}): eta {:?} zeta {:?}", dec.eta, dec.zeta),
            )?;
        }
    }
    Ok(())
}

struct Suite {
    dir: PathBuf,
    cfg: ExperimentConfig,
    task: Task,
}

impl Suite {
    fn new(dir: PathBuf) -> Self {
        let cfg = ExperimentConfig::reference();
        let task = Task::prepare(&cfg).expect("reference task");
        Suite { dir, cfg, task }
    }

    // Criterion 2.
    fn ledger_oracle(&self) -> Outcome {
        let grid = Preference::evaluation_grid();
        for seed in 1..=20u64 {
            let cfg = if seed % 4 == 0 {
                self.cfg.with_mode(Mode::Fixed)
            } else {
                self.cfg
                    .with_preference(grid[seed as usize % grid.len()])
                    .with_mode(Mode::FedTune)
            };
            let trace = run_task(&self.task, &cfg, seed).map_err(err)?;
            let csv = self.dir.join("ledger").join(format!("seed-{seed}.csv"));
            let json = export_trace(&trace, &csv).map_err(err)?;
            let rows = read_trace_csv(&csv).map_err(err)?;
            let summary = load_summary(&json).map_err(err)?;
            let mut sum = [0.0f64; 4];
            for row in &rows {
                let o = row.overheads.as_array();
                for i in 0..4 {
                    sum[i] += o[i];
                }
            }
            ensure(rows.len() == summary.ledger.rounds, format!("seed {seed}: row count"))?;
            ensure(
                sum == summary.ledger.totals.as_array(),
                format!("seed {seed}: re-summed {sum:?} vs ledger {:?}", summary.ledger.totals),
            )?;
            let last = rows.last().ok_or("empty trace")?;
            ensure(
                last.cumulative == summary.ledger.totals,
                format!("seed {seed}: cumulative columns"),
            )?;
        }
        Ok("20 runs, exact".into())
    }

    // Criterion 4.
    fn trends(&self) -> Outcome {
        let checks = trend_report(&self.cfg, &TrendGrid::default(), Some(&self.dir.join("trends"))).map_err(err)?;
        let failed: Vec<String> = checks
            .iter()
            .filter(|c| !c.pass())
            .map(|c| format!("{} vs {} {:?} medians {:?}", c.aspect, c.axis, c.expectation, c.medians))
            .collect();
        ensure(failed.is_empty(), failed.join("; "))?;
        let tolerated: usize = checks.iter().map(|c| c.result.violations.len()).sum();
        Ok(format!(
            "{} trends hold ({tolerated} tolerated small violations)",
            checks.len()
        ))
    }

    // Criterion 5.
    fn convergence(&self) -> Outcome {
        let mut worst = 0;
        for m in [1, 5, 10] {
            for e in [1.0, 2.0, 4.0] {
                let cfg = self.cfg.with_mode(Mode::Fixed).with_initial(HyperParams::new(m, e));
                for &seed in &self.cfg.run.seeds {
                    let trace = run_task(&self.task, &cfg, seed).map_err(err)?;
                    export_trace(
                        &trace,
                        &self.dir.join("convergence").join(format!("m{m}-e{e}-seed-{seed}.csv")),
                    )
                    .map_err(err)?;
                    ensure(
                        trace.summary.reached_target,
                        format!("(M,E)=({m},{e}) seed {seed} missed the target"),
                    )?;
                    worst = worst.max(trace.summary.rounds_used);
                }
            }
        }
        Ok(format!(
            "9 combos x 3 seeds, slowest {worst} rounds of {}",
            self.cfg.run.round_cap
        ))
    }

    fn preference_sweep(
        &self,
        cfg: &ExperimentConfig,
        prefs: Vec<Preference>,
        sub: &str,
    ) -> std::result::Result<SweepOutcome, String> {
        let out = sweep(cfg, &SweepGrid::Preferences(prefs), Some(&self.dir.join(sub))).map_err(err)?;
        let failed: Vec<&str> = out
            .runs
            .iter()
            .filter(|r| r.outcome.is_err())
            .map(|r| r.label.as_str())
            .collect();
        ensure(failed.is_empty(), format!("runs failed: {failed:?}"))?;
        Ok(out)
    }

    // Criterion 6.
    fn terminal_states(&self, out: &SweepOutcome) -> Outcome {
        let cases: [(_, Terminal, &str); 4] = [
            ([0.0, 0.0, 1.0, 0.0], |m, e| m == 1 && e == 1.0, "(1,1)"),
            ([1.0, 0.0, 0.0, 0.0], |m, e| e == 1.0 && m >= 20, "E=1, M>=20"),
            ([0.0, 0.0, 0.0, 1.0], |m, e| m == 1 && e >= 20.0, "M=1, E>=20"),
            ([0.0, 1.0, 0.0, 0.0], |m, e| m >= 20 && e >= 20.0, "M>=20, E>=20"),
        ];
        let mut finals = Vec::new();
        for (w, ok, want) in cases {
            let p = pref(w);
            let runs = out.summaries(&format!("pref-{}", p.label()));
            ensure(
                runs.len() == self.cfg.run.seeds.len(),
                format!("{}: missing runs", p.label()),
            )?;
            for s in runs {
                let h = s.final_hyper;
                ensure(
                    s.reached_target && ok(h.participants, h.passes),
                    format!(
                        "{} seed {}: final ({}, {}), want {want}",
                        p.label(),
                        s.seed,
                        h.participants,
                        h.passes
                    ),
                )?;
                finals.push(format!("({},{})", h.participants, h.passes));
            }
        }
        Ok(format!("final states {}", finals.join(" ")))
    }

    // Criterion 7.
    fn beats_baseline(&self, out: &SweepOutcome) -> Outcome {
        let table = out.preference_table().map_err(err)?;
        ensure(table.rows.len() == 16, format!("{} table rows", table.rows.len()))?;
        let mut all = Vec::new();
        for row in &table.rows[1..] {
            let c = row.comparison.as_ref().ok_or("preference row without a comparison")?;
            ensure(c.excluded == 0, format!("{} excluded runs", c.excluded))?;
            all.extend(c.per_seed.iter().map(|(_, v)| *v));
        }
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        ensure(mean > 0.0, format!("mean improvement {mean:.2}%"))?;
        let single = |w| {
            let label = pref(w);
            table.rows[1..]
                .iter()
                .find(|r| r.preference == Some(label))
                .and_then(|r| r.comparison.as_ref())
                .map(|c| c.mean)
                .unwrap_or(f64::NAN)
        };
        let gamma = single([0.0, 0.0, 1.0, 0.0]);
        let delta = single([0.0, 0.0, 0.0, 1.0]);
        ensure(
            gamma >= 20.0 && delta >= 20.0,
            format!("gamma {gamma:.2}%, delta {delta:.2}%"),
        )?;
        Ok(format!(
            "mean {mean:+.2}% over {} runs; CompL-only {gamma:+.2}%, TransL-only {delta:+.2}%",
            all.len()
        ))
    }

    // Criterion 8.
    fn penalty(&self, out: &SweepOutcome) -> Outcome {
        penalty_branches()?;
        let degraded = pref([0.5, 0.5, 0.0, 0.0]);
        let baseline: Vec<_> = out.summaries("baseline").into_iter().cloned().collect();
        let with_d: Vec<_> = out
            .summaries(&format!("pref-{}", degraded.label()))
            .into_iter()
            .cloned()
            .collect();
        let mut no_penalty_cfg = self.cfg.with_preference(degraded);
        if let Some(t) = no_penalty_cfg.tuner.as_mut() {
            t.penalty = 1.0;
        }
        let without = self.preference_sweep(&no_penalty_cfg, vec![degraded], "penalty-d1")?;
        let without_d: Vec<_> = without
            .summaries(&format!("pref-{}", degraded.label()))
            .into_iter()
            .cloned()
            .collect();
        let d10 = compare_runs(&baseline, &with_d, &degraded).map_err(err)?;
        let d1 = compare_runs(&baseline, &without_d, &degraded).map_err(err)?;
        ensure(d10.mean < 0.0 || d1.mean < 0.0, "case is not degraded")?;
        ensure(
            d10.mean >= d1.mean,
            format!("D=10 {:.2}% < D=1 {:.2}%", d10.mean, d1.mean),
        )?;
        Ok(format!(
            "4 branches exact; {} D=10 {:+.2}% vs D=1 {:+.2}%",
            degraded.label(),
            d10.mean,
            d1.mean
        ))
    }
}

fn timed(id: u32, name: &'static str, budget_s: u64, f: impl FnOnce() -> Outcome) -> Criterion {
    let start = Instant::now();
    let outcome = f();
    Criterion {
        id,
        name,
        budget: Duration::from_secs(budget_s),
        outcome,
        elapsed: start.elapsed(),
    }
}

/// Criteria 2 and 4 to 8, exporting every run under `dir`.
fn run_suite(dir: &Path) -> Vec<Criterion> {
    let suite = Suite::new(dir.to_path_buf());
    let mut out = Vec::new();
    out.push(timed(2, "ledger oracle", 120, || suite.ledger_oracle()));
    out.push(timed(4, "overhead trends in M and E", 900, || suite.trends()));
    out.push(timed(5, "convergence invariance", 900, || suite.convergence()));
    let start = Instant::now();
    let sweep = suite.preference_sweep(&suite.cfg, Preference::evaluation_grid(), "preferences");
    let sweep_time = start.elapsed();
    let with_sweep = |id, name, budget, f: &dyn Fn(&SweepOutcome) -> Outcome| {
        let mut c = timed(id, name, budget, || sweep.as_ref().map_err(|e| e.clone()).and_then(f));
        c.elapsed += sweep_time;
        c
    };
    out.push(with_sweep(6, "single-aspect terminal states", 1200, &|s| {
        suite.terminal_states(s)
    }));
    out.push(with_sweep(7, "tuner beats baseline", 3600, &|s| {
        suite.beats_baseline(s)
    }));
    out.push(with_sweep(8, "penalty mechanism", 900, &|s| suite.penalty(s)));
    out
}

fn collect_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).expect("readable artifact dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).expect("under root").to_path_buf();
                files.insert(rel, std::fs::read(&path).expect("readable artifact"));
            }
        }
    }
    files
}

fn determinism(first: &Path, second: &Path) -> Outcome {
    let again = run_suite(second);
    ensure(
        again.iter().all(|c| c.outcome.is_ok()),
        "second execution failed a criterion",
    )?;
    let a = collect_files(first);
    let b = collect_files(second);
    ensure(!a.is_empty(), "no artifacts")?;
    ensure(
        a.keys().eq(b.keys()),
        format!("artifact sets differ: {} vs {} files", a.len(), b.len()),
    )?;
    let differing: Vec<_> = a
        .iter()
        .filter(|(k, v)| b.get(*k) != Some(v))
        .map(|(k, _)| k.display().to_string())
        .collect();
    if let Some(example) = differing.first() {
        return Err(format!("{} files differ, e.g. {example}", differing.len()));
    }
    let bytes: usize = a.values().map(Vec::len).sum();
    Ok(format!(
        "{} files, {bytes} bytes identical across two executions",
        a.len()
    ))
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("scratch dir");
    let first = scratch.path().join("first");
    let second = scratch.path().join("second");

    let mut results = vec![
        timed(1, "formula unit suite", 1, formula_suite),
        timed(3, "gradient check", 10, gradient_check),
    ];
    results.extend(run_suite(&first));
    results.push(timed(9, "determinism", 7200, || determinism(&first, &second)));
    results.sort_by_key(|c| c.id);

    let mut failures = 0;
    for c in &results {
        let over = c.elapsed > c.budget;
        let (status, detail) = match (&c.outcome, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the {}s budget", c.budget.as_secs())),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failures += 1;
        }
        println!(
            "{status} criterion {} ({}) [{:.1}s]: {detail}",
            c.id,
            c.name,
            c.elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failures} failed", results.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
