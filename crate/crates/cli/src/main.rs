use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sbsim::live::{self, LiveOptions};
use sbsim::service;
use sbsim_core::downlink::DEFAULT_LINK_PORT;
use sbsim_core::ground::GroundDatabase;
use sbsim_core::scenario::{
    compare_runs, finish_report, resolve_mask, run_scenario, simulate, Comparison, RunArtifacts, RunReport, Scenario,
    Verdict,
};

#[derive(Parser)]
#[command(
    name = "sbsim",
    version,
    about = "Deterministic small-satellite flight-software simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run(RunArgs),
    /// Compare two runs (artifact directories or scenario files).
    Compare(CompareArgs),
    /// Pretty-print the report in a run directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file, or a directory of scenarios with --matrix.
    scenario: PathBuf,
    /// Exit non-zero if any expectation in the scenario fails.
    #[arg(long)]
    assert: bool,
    /// Run live on the wall clock and serve the ground-station API.
    #[arg(long, conflicts_with = "headless")]
    serve: bool,
    /// Run on logical time with no service (the default).
    #[arg(long)]
    headless: bool,
    /// Run every scenario in the directory.
    #[arg(long, conflicts_with = "serve")]
    matrix: bool,
    /// Artifact directory. Defaults to <output root>/<scenario name>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output root for runs without --out.
    #[arg(long, env = "SBSIM_OUT", default_value = "runs")]
    out_root: PathBuf,
    /// Ground-station API address (--serve).
    #[arg(long, default_value = "127.0.0.1:8080")]
    http: SocketAddr,
    /// Space/ground link address (--serve).
    #[arg(long, default_value_t = SocketAddr::from(([127, 0, 0, 1], DEFAULT_LINK_PORT)))]
    link: SocketAddr,
    /// Wall-clock milliseconds per tick (--serve).
    #[arg(long, default_value_t = 100)]
    tick_ms: u64,
    /// Stop serving once the run completes instead of waiting for Ctrl-C (--serve).
    #[arg(long)]
    exit_when_done: bool,
}

#[derive(Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    /// Field names or schema tags to mask, e.g. `quaternion`.
    #[arg(long)]
    mask: Vec<String>,
    /// Print the comparison as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReportArgs {
    dir: PathBuf,
    /// Print the stored report as JSON.
    #[arg(long)]
    json: bool,
    /// Recompute the report from the artifacts and check it matches the stored one.
    #[arg(long)]
    verify: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Compare(a) => compare(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(args: RunArgs) -> Result<bool> {
    if args.matrix {
        return matrix(&args);
    }
    let scenario = Scenario::load(&args.scenario).with_context(|| format!("{}", args.scenario.display()))?;
    let dir = args.out.clone().unwrap_or_else(|| args.out_root.join(&scenario.name));
    let (artifacts, report) = if args.serve {
        serve(&scenario, &args)?
    } else {
        let out = run_scenario(&scenario)?;
        (out.artifacts, out.report)
    };
    artifacts.write(&report, &dir)?;
    print_summary(&report);
    println!("artifacts: {}", dir.display());
    Ok(!args.assert || report.assertions_passed())
}

fn matrix(args: &RunArgs) -> Result<bool> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&args.scenario)
        .with_context(|| format!("{}", args.scenario.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    if paths.is_empty() {
        bail!("no scenarios in {}", args.scenario.display());
    }
    let root = args.out.clone().unwrap_or_else(|| args.out_root.clone());
    let mut all_ok = true;
    println!(
        "{:<28} {:>6} {:>8} {:>10}  assertions",
        "scenario", "alerts", "rows", "ttd"
    );
    for p in &paths {
        let scenario = Scenario::load(p).with_context(|| format!("{}", p.display()))?;
        let out = run_scenario(&scenario)?;
        out.artifacts.write(&out.report, &root.join(&scenario.name))?;
        let r = &out.report;
        let ttd = r
            .time_to_detection
            .values()
            .min()
            .map_or("-".to_string(), |t| t.to_string());
        let failed = r.assertions.iter().filter(|a| !a.passed).count();
        all_ok &= failed == 0;
        println!(
            "{:<28} {:>6} {:>8} {:>10}  {}",
            scenario.name,
            r.alerts.len(),
            out.artifacts.index.len(),
            ttd,
            if failed == 0 {
                format!("ok ({})", r.assertions.len())
            } else {
                format!("{failed} FAILED")
            }
        );
    }
    Ok(!args.assert || all_ok)
}

fn serve(scenario: &Scenario, args: &RunArgs) -> Result<(RunArtifacts, RunReport)> {
    let runtime = tokio::runtime::Runtime::new()?;
    let opts = LiveOptions {
        tick_period: Duration::from_millis(args.tick_ms),
        link_addr: args.link,
    };
    let live = live::start(scenario, &opts)?;
    let app = service::router(live.service.clone());
    let listener = runtime.block_on(tokio::net::TcpListener::bind(args.http))?;
    eprintln!(
        "ground station on http://{} (link {})",
        listener.local_addr()?,
        live.link_addr
    );
    let server = runtime.spawn(async move { axum::serve(listener, app).await });

    while !live.is_finished() {
        std::thread::sleep(Duration::from_millis(50));
    }
    let (artifacts, counters) = live.wait()?;
    let report = finish_report(&artifacts, counters)?;
    if !args.exit_when_done {
        eprintln!("run complete; serving until Ctrl-C");
        runtime.block_on(tokio::signal::ctrl_c())?;
    }
    server.abort();
    Ok((artifacts, report))
}

fn load_run(path: &Path) -> Result<RunArtifacts> {
    if path.is_dir() {
        Ok(RunArtifacts::load(path)?.0)
    } else {
        let scenario = Scenario::load(path).with_context(|| format!("{}", path.display()))?;
        Ok(simulate(&scenario)?.0)
    }
}

fn compare(args: CompareArgs) -> Result<bool> {
    let a = load_run(&args.a)?;
    let b = load_run(&args.b)?;
    let mask = resolve_mask(&GroundDatabase::builtin(), &args.mask);
    let c: Comparison = compare_runs(&a, &b, &mask)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&c)?);
    } else {
        println!(
            "{}: {:?}",
            if c.verdict == Verdict::Indistinguishable {
                "INDISTINGUISHABLE"
            } else {
                "DISTINGUISHABLE"
            },
            c.masked_fields
        );
        println!("{} differences", c.difference_count);
        for d in &c.differences {
            println!("  {d}");
        }
    }
    Ok(c.verdict == Verdict::Indistinguishable)
}

fn report(args: ReportArgs) -> Result<bool> {
    let (artifacts, stored) = RunArtifacts::load(&args.dir)?;
    let Some(stored) = stored else {
        bail!("{} has no report.json", args.dir.display());
    };
    if args.verify {
        let again = finish_report(&artifacts, stored.counters)?;
        if again != stored {
            println!("recomputed report DIFFERS from the stored one");
            return Ok(false);
        }
        println!("recomputed report matches");
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&stored)?);
    } else {
        print_summary(&stored);
    }
    Ok(true)
}

fn print_summary(r: &RunReport) {
    println!(
        "scenario   {} (seed {}, {} ticks)",
        r.scenario, r.seed, r.duration_ticks
    );
    let packets: Vec<String> = r.ground_packets.iter().map(|(n, c)| format!("{n}={c}")).collect();
    println!("ground     {}", packets.join(" "));
    println!(
        "anomalies  {} format violations, {} unmapped, {} uplink rejects, {} downlink drops",
        r.format_violations, r.counters.unmapped, r.counters.uplink_rejects, r.counters.downlink_dropped
    );
    if let Some(t) = r.activation_tick {
        println!("implant    active from tick {t}");
    }
    if let (Some(mean), Some(max)) = (r.deception.mean_error, r.deception.max_error) {
        println!(
            "error      mean {mean:.6} rad, max {max:.6} rad over {} cycles",
            r.deception.cycles
        );
    }
    println!("alerts     {}", r.alerts.len());
    for (rule, n) in &r.alert_counts {
        println!("  {rule:?}: {n}");
    }
    for (d, t) in &r.time_to_detection {
        println!("  time to detection ({d:?}): {t} ticks");
    }
    if let Some(c) = &r.indistinguishability {
        println!(
            "forensics  {:?} vs. no-implant run ({} differences)",
            c.verdict, c.difference_count
        );
    }
    for a in &r.assertions {
        println!(
            "  [{}] {}: {}",
            if a.passed { "pass" } else { "FAIL" },
            a.name,
            a.detail
        );
    }
}
