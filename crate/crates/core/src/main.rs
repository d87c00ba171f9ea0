use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use flsim::config::{ExperimentConfig, Mode};
use flsim::experiment::{
    compare_runs, export_trace, load_summary, run_task, sweep, trend_report, SweepGrid, Task, TraceSummary, TrendGrid,
};
use flsim::tuner::Preference;
use flsim::Result;

#[derive(Parser)]
#[command(
    name = "flsim",
    version,
    about = "Federated-learning simulator with an overhead-aware M/E tuner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). The built-in reference task when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Run seed; repeat to run several. Replaces the config's seed list.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    #[arg(long)]
    target: Option<f64>,
    /// Preference weights for CompT,TransT,CompL,TransL, e.g. 0,0,1,0.
    #[arg(long, allow_hyphen_values = true)]
    pref: Option<Preference>,
    /// Output directory.
    #[arg(long, env = "FLSIM_OUTPUT_DIR")]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::reference(),
        };
        if let Some(mode) = self.mode {
            cfg.run.mode = mode;
        }
        if !self.seeds.is_empty() {
            cfg.run.seeds = self.seeds.clone();
        }
        if let Some(target) = self.target {
            cfg.run.target_accuracy = target;
        }
        if let Some(pref) = self.pref {
            cfg = cfg.with_preference(pref);
        }
        if let Some(out) = &self.out {
            cfg.run.output_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GridKind {
    /// Participants per round.
    M,
    /// Local passes.
    E,
    /// The 15 evaluation preferences plus a fixed baseline.
    Pref,
}

#[derive(Subcommand)]
enum Command {
    /// Run one config for each seed and export the traces.
    Run(Common),
    /// Run a grid of configs and write a summary table.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        grid: GridKind,
        /// Comma-separated grid values; defaults to 1,10,20,50 for M and 0.5,1,2,4,8 for E.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Compare tuned traces to baseline traces by seed.
    Compare {
        /// Baseline JSON sidecars, or directories holding them.
        #[arg(long, required = true, num_args = 1..)]
        baseline: Vec<PathBuf>,
        #[arg(long, required = true, num_args = 1..)]
        tuned: Vec<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        pref: Preference,
    },
    /// Sweep M and E in fixed mode and check the overhead trends.
    Trends(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Run(common) => run(&common.load()?),
        Command::Sweep { common, grid, values } => run_sweep(&common.load()?, grid, &values),
        Command::Compare { baseline, tuned, pref } => compare(&baseline, &tuned, &pref),
        Command::Trends(common) => trends(&common.load()?),
    }
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Fixed => "fixed",
        Mode::FedTune => "fedtune",
    }
}

fn run(cfg: &ExperimentConfig) -> Result<bool> {
    let task = Task::prepare(cfg)?;
    println!("seed\treached\trounds\tfinal_acc\tM\tE\tCompT\tTransT\tCompL\tTransL");
    for &seed in &cfg.run.seeds {
        let trace = run_task(&task, cfg, seed)?;
        let path = cfg
            .run
            .output_dir
            .join(format!("{}-seed-{seed}.csv", mode_name(cfg.run.mode)));
        export_trace(&trace, &path)?;
        let s = &trace.summary;
        let o = s.ledger.totals;
        println!(
            "{seed}\t{}\t{}\t{:.4}\t{}\t{}\t{:.4e}\t{:.4e}\t{:.4e}\t{:.4e}",
            s.reached_target,
            s.rounds_used,
            s.final_accuracy,
            s.final_hyper.participants,
            s.final_hyper.passes,
            o.comp_time,
            o.trans_time,
            o.comp_load,
            o.trans_load
        );
    }
    Ok(true)
}

fn run_sweep(cfg: &ExperimentConfig, kind: GridKind, values: &[f64]) -> Result<bool> {
    let grid = match kind {
        GridKind::M => {
            let v = if values.is_empty() {
                &[1.0, 10.0, 20.0, 50.0][..]
            } else {
                values
            };
            SweepGrid::Participants(v.iter().map(|&m| m as usize).collect())
        }
        GridKind::E => {
            let v = if values.is_empty() {
                &[0.5, 1.0, 2.0, 4.0, 8.0][..]
            } else {
                values
            };
            SweepGrid::Passes(v.to_vec())
        }
        GridKind::Pref => SweepGrid::Preferences(Preference::evaluation_grid()),
    };
    let outcome = sweep(cfg, &grid, Some(&cfg.run.output_dir))?;
    match kind {
        GridKind::Pref => print!("{}", outcome.preference_table()?.to_csv()),
        _ => print!("{}", outcome.summary_csv()),
    }
    Ok(outcome.runs.iter().all(|r| r.outcome.is_ok()))
}

fn collect_summaries(paths: &[PathBuf]) -> Result<Vec<TraceSummary>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let entries = std::fs::read_dir(p).map_err(|e| flsim::Error::io(p, e))?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    files.iter().map(|f| load_summary(Path::new(f))).collect()
}

fn compare(baseline: &[PathBuf], tuned: &[PathBuf], pref: &Preference) -> Result<bool> {
    let report = compare_runs(&collect_summaries(baseline)?, &collect_summaries(tuned)?, pref)?;
    for (seed, v) in &report.per_seed {
        println!("seed {seed}: {v:+.2}%");
    }
    println!(
        "mean {:+.2}% (std {:.2}%), excluded {}",
        report.mean, report.std, report.excluded
    );
    Ok(true)
}

fn trends(cfg: &ExperimentConfig) -> Result<bool> {
    let checks = trend_report(cfg, &TrendGrid::default(), Some(&cfg.run.output_dir))?;
    let mut ok = true;
    for c in &checks {
        ok &= c.pass();
        let medians: Vec<String> = c.medians.iter().map(|v| format!("{v:.4e}")).collect();
        println!(
            "{} {:<6} {:?} on {:?}: [{}] {}",
            c.axis,
            c.aspect,
            c.expectation,
            c.grid,
            medians.join(", "),
            if c.pass() { "ok" } else { "VIOLATED" }
        );
    }
    Ok(ok)
}
