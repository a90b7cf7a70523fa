//! Command-line front end: scenario sweeps and a built-in self-check.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use cbfsim::engine::{RngFactory, SimTime};
use cbfsim::metrics::MetricsCollector;
use cbfsim::mobility::Release;
use cbfsim::sim::{line_probe, run_experiment, Simulation};
use cbfsim::trace::{TraceKind, VecSink};
use cbfsim::Scenario;

#[derive(Parser)]
#[command(
    name = "cbfsim",
    version,
    about = "Multi-hop geo-broadcast dissemination simulator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario (optionally sweeping penetrations and seeds) and write
    /// CSV reports.
    Run {
        /// Scenario file; an empty file runs the built-in defaults.
        scenario: PathBuf,
        /// Newer-release penetration(s), comma-separated; overrides the file.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        penetration: Vec<f64>,
        /// Seed(s), comma-separated; overrides the file.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        seed: Vec<u64>,
        /// Scales vehicles per lane; overrides the file.
        #[arg(long)]
        density_scale: Option<f64>,
        /// Directory for the CSV reports.
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Replay the five-station line check and compare against its frozen
    /// schedule; exits nonzero on any mismatch.
    Smoke,
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Run {
            scenario,
            penetration,
            seed,
            density_scale,
            out,
        } => match run(scenario, penetration, seed, density_scale, out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
        Cmd::Smoke => smoke(),
    }
}

fn run(
    scenario_path: PathBuf,
    penetration: Vec<f64>,
    seed: Vec<u64>,
    density_scale: Option<f64>,
    out: PathBuf,
) -> Result<()> {
    let mut sc = Scenario::from_file(&scenario_path)
        .with_context(|| format!("loading {}", scenario_path.display()))?;
    if let Some(ds) = density_scale {
        sc.highway.density_scale = ds;
    }
    let penetrations = if penetration.is_empty() {
        vec![sc.penetration_r2]
    } else {
        penetration
    };
    if let Some(p) = penetrations.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        bail!("--penetration {p} outside [0, 1]");
    }
    let seeds = if seed.is_empty() { vec![sc.seed] } else { seed };

    let results = run_experiment(&sc, &penetrations, &seeds)?;
    results.write_csvs(&out)?;

    println!("{:>12} {:>10} {:>8} {:>12}", "penetration", "mean_tx", "mean_pdr", "tx_ratio");
    let baseline = penetrations
        .iter()
        .find(|&&p| p == 0.0)
        .map(|&p| results.mean_tx(p));
    for &p in &results.penetrations() {
        let mtx = results.mean_tx(p);
        let ratio = match baseline {
            Some(b) if mtx > 0.0 => format!("{:.2}", b / mtx),
            _ => "-".to_string(),
        };
        println!("{:>12} {:>10.2} {:>8.4} {:>12}", p, mtx, results.mean_pdr(p), ratio);
    }
    for r in &results.runs {
        if r.gap_violations > 0 || r.rearm_violations > 0 {
            eprintln!(
                "warning: penetration {} seed {}: {} pacing violations, {} re-arm violations",
                r.penetration, r.seed, r.gap_violations, r.rearm_violations
            );
        }
        if r.dpl_eviction_rearms > 0 {
            eprintln!(
                "note: penetration {} seed {}: {} re-contention(s) after duplicate-list aging",
                r.penetration, r.seed, r.dpl_eviction_rearms
            );
        }
    }
    println!("reports written to {}", out.display());
    Ok(())
}

/// The frozen line-check schedule: source transmits at 26us, the farthest
/// station relays at 1562us, everyone else is suppressed. Holds for both
/// protocol generations.
const EXPECTED_SCHEDULE: [(u32, u64); 2] = [(0, 26), (4, 1_562)];

fn smoke() -> ExitCode {
    let mut failed = false;
    let mut check = |name: &str, ok: bool, detail: String| {
        if ok {
            println!("ok   - {name}");
        } else {
            println!("FAIL - {name}: {detail}");
            failed = true;
        }
    };

    for release in [Release::R1, Release::R2] {
        let tag = match release {
            Release::R1 => "r1",
            Release::R2 => "r2",
        };
        let (sc, fleet) = line_probe(release);
        let rngs = RngFactory::new(sc.seed);
        let collector = MetricsCollector::new(
            &fleet,
            0.0,
            sc.seed,
            SimTime::ZERO,
            SimTime::ZERO + sc.measure,
            sc.access.gate_min,
            sc.cbf.dpl_cap,
        );
        let sim = Simulation::new(&sc, fleet, (VecSink::default(), collector), &rngs);
        let ((sink, collector), until) = sim.run();
        let run = collector.finish(until);

        let schedule: Vec<(u32, u64)> = sink
            .records
            .iter()
            .filter(|r| matches!(r.kind, TraceKind::TxStart { .. }))
            .map(|r| (r.node, r.t.as_micros()))
            .collect();
        check(
            &format!("{tag} transmission schedule"),
            schedule == EXPECTED_SCHEDULE,
            format!("expected {EXPECTED_SCHEDULE:?}, got {schedule:?}"),
        );
        let (msgs, tx, pdr) = (
            run.messages.len(),
            run.messages.first().map_or(0, |m| m.tx_count),
            run.messages.first().map_or(0.0, |m| m.pdr),
        );
        check(
            &format!("{tag} one message, two transmissions"),
            msgs == 1 && tx == 2,
            format!("got {msgs} messages, {tx} transmissions"),
        );
        check(
            &format!("{tag} full delivery"),
            pdr == 1.0,
            format!("got delivery ratio {pdr}"),
        );
        check(
            &format!("{tag} clean audit"),
            run.gap_violations == 0 && run.rearm_violations == 0,
            format!(
                "{} pacing violations, {} re-arm violations",
                run.gap_violations, run.rearm_violations
            ),
        );
    }

    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
