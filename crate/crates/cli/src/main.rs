use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use flowlab::engine::{simulate, total_flow_time, Trace};
use flowlab::experiment::{run_lowerbound, LbFamily};
use flowlab::generators::{self, GeneratorSpec};
use flowlab::invariants::check_trace;
use flowlab::metrics::{
    approx_decimal, competitive_ratio, far_behind_histogram, joint_event_times, local_ratio_report, max_pending_at_least,
    write_ratio_csv, CompetitiveRatio, RatioSummary,
};
use flowlab::model::distortion_of;
use flowlab::schedulers::{scheduler_by_key, Srpt, ALL_KEYS};
use flowlab::{Error, Instance, Rational};

#[derive(Parser)]
#[command(name = "flowlab", version, about = "Preemptive single-machine flow-time scheduling laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated instance as JSON.
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
        /// Output file; the instance goes to stdout when omitted.
        #[arg(long, global = true)]
        out: Option<PathBuf>,
        #[arg(long, global = true, default_value_t = 0)]
        seed: u64,
    },
    /// Run one scheduler and write its trace as JSON Lines.
    Simulate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        scheduler: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run several schedulers against SRPT and tabulate them.
    Compare {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, alias = "scheduler", value_delimiter = ',', default_values_t = ALL_KEYS.map(String::from))]
        schedulers: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV output; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write per-scheduler local-ratio CSVs and JSON summaries here.
        #[arg(long)]
        ratio_dir: Option<PathBuf>,
    },
    /// Monte Carlo means of the randomized lower-bound distributions.
    Lowerbound {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, alias = "scheduler", value_delimiter = ',', default_values_t = ["sept".to_string()])]
        schedulers: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check every invariant of a trace at every event time.
    Check {
        #[arg(long)]
        instance: PathBuf,
        /// Simulate this scheduler and check the result.
        #[arg(long, conflicts_with = "trace", required_unless_present = "trace")]
        scheduler: Option<String>,
        /// Check an existing trace; `--instance` must then be its realized instance.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GenerateKind {
    BadcaseSept {
        #[arg(long)]
        i: u32,
    },
    BadcaseSr {
        #[arg(long)]
        i: u32,
    },
    Bombard {
        #[arg(long)]
        base: PathBuf,
        /// Bombardment start; defaults to the base instance's snapshot time.
        #[arg(long)]
        t: Option<Rational>,
        #[arg(long)]
        m: u64,
    },
    LbPrime {
        #[arg(long)]
        k: u64,
    },
    LbCapped {
        #[arg(long)]
        mu: Rational,
        #[arg(long)]
        k: Option<u64>,
    },
    DetLb {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        mu: Rational,
    },
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        mu1: Rational,
        #[arg(long)]
        mu2: Rational,
        #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
        class_lo: i32,
        #[arg(long, default_value_t = 6, allow_negative_numbers = true)]
        class_hi: i32,
    },
}

#[derive(Args)]
#[group(required = true, multiple = true)]
struct FamilyArgs {
    /// Number of jobs; alone it selects the uncapped family.
    #[arg(long)]
    k: Option<u64>,
    /// Size cap; selects the capped family.
    #[arg(long)]
    mu: Option<Rational>,
}

enum Failure {
    /// Bad input or I/O; exit code 2.
    Usage(String),
    /// A run finished but something it promises does not hold; exit code 1.
    Violation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ContractViolation { .. } => Failure::Violation(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { kind, out, seed } => cmd_generate(kind, out, seed),
        Command::Simulate { instance, scheduler, seed, out } => cmd_simulate(&instance, &scheduler, seed, &out),
        Command::Compare { instance, schedulers, seed, out, ratio_dir } => {
            cmd_compare(&instance, &schedulers, seed, out.as_deref(), ratio_dir.as_deref())
        }
        Command::Lowerbound { family, trials, seed, schedulers, out } => {
            cmd_lowerbound(family, trials, seed, &schedulers, out.as_deref())
        }
        Command::Check { instance, scheduler, trace, seed, out } => {
            cmd_check(&instance, scheduler.as_deref(), trace.as_deref(), seed, out.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Violation(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn write_manifest(out: &Path, command: &str, config: Value, instance_hash: Option<String>, outputs: &[&Path]) -> CliResult {
    let manifest = json!({
        "command": command,
        "config": config,
        "instance_hash": instance_hash,
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "versions": {
            "flowlab": env!("CARGO_PKG_VERSION"),
            "format": 1,
        },
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    fs::write(sibling(out, ".manifest.json"), text)?;
    Ok(())
}

fn load_instance(path: &Path) -> CliResult<Instance> {
    Instance::load(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn run(instance: &Instance, key: &str, seed: u64) -> CliResult<Trace> {
    let mut scheduler = scheduler_by_key(key)?;
    Ok(simulate(instance, scheduler.as_mut(), seed)?)
}

fn srpt_on(instance: &Instance, seed: u64) -> CliResult<Trace> {
    Ok(simulate(instance, &mut Srpt::new(), seed)?)
}

fn cmd_generate(kind: GenerateKind, out: Option<PathBuf>, seed: u64) -> CliResult {
    let (instance, config) = match kind {
        GenerateKind::BadcaseSept { i } => (generators::sept_bad_case(i)?, json!({"kind": "badcase-sept", "i": i})),
        GenerateKind::BadcaseSr { i } => (generators::sr_bad_case(i)?, json!({"kind": "badcase-sr", "i": i})),
        GenerateKind::Bombard { base, t, m } => {
            let base_inst = load_instance(&base)?;
            let t = match t.or_else(|| base_inst.snapshot_time()) {
                Some(t) => t,
                None => return Err(Failure::Usage("base instance has no snapshot time; pass --t".into())),
            };
            let config = json!({"kind": "bombard", "base": base.display().to_string(), "base_hash": base_inst.content_hash(), "t": t, "m": m});
            (generators::bombard(&base_inst, &t, m)?, config)
        }
        GenerateKind::LbPrime { k } => (generators::lb_prime(k, seed)?.0, json!({"kind": "lb-prime", "k": k, "seed": seed})),
        GenerateKind::LbCapped { mu, k } => {
            let config = json!({"kind": "lb-capped", "mu": mu, "k": k, "seed": seed});
            (generators::lb_capped(&mu, seed, k)?.0, config)
        }
        GenerateKind::DetLb { n, mu } => (generators::adaptive_det_lb(n, &mu)?, json!({"kind": "det-lb", "n": n, "mu": mu})),
        GenerateKind::Random { n, mu1, mu2, class_lo, class_hi } => {
            let spec = GeneratorSpec::Random { n, mu1: mu1.clone(), mu2: mu2.clone(), class_lo, class_hi, seed };
            let config = serde_json::to_value(&spec).expect("spec serializes");
            (generators::random_distorted(n, &mu1, &mu2, (class_lo, class_hi), seed)?, config)
        }
    };
    let summary = generate_summary(&instance);
    match &out {
        Some(path) => {
            instance.save(path)?;
            write_manifest(path, "generate", config, Some(instance.content_hash()), &[path])?;
            println!("{summary}");
        }
        None => {
            println!("{}", instance.to_json());
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn generate_summary(instance: &Instance) -> String {
    let d = distortion_of(instance);
    let classes = match instance.class_range() {
        Some((lo, hi)) => format!("{lo}..={hi}"),
        None => "none".into(),
    };
    let mut s = format!("n={} mu1={} mu2={} mu={} classes={classes}", instance.len(), d.mu1, d.mu2, d.mu);
    if let Some(t) = instance.snapshot_time() {
        s.push_str(&format!(" t={t}"));
    }
    if instance.adaptive.is_some() {
        s.push_str(" adaptive=yes");
    }
    s
}

fn cmd_simulate(path: &Path, key: &str, seed: u64, out: &Path) -> CliResult {
    let instance = load_instance(path)?;
    let trace = run(&instance, key, seed)?;
    let mut file = std::io::BufWriter::new(fs::File::create(out)?);
    trace.write_jsonl(&mut file)?;
    file.flush()?;
    let realized = sibling(out, ".instance.json");
    trace.instance.save(&realized)?;
    let config = json!({"instance": path.display().to_string(), "scheduler": key, "seed": seed});
    write_manifest(out, "simulate", config, Some(instance.content_hash()), &[out, &realized])?;
    let flow = total_flow_time(&trace)?;
    println!("scheduler={key} n={} end={} total_flow={flow}", instance.len(), trace.end_time());
    Ok(())
}

fn ratio_cells(r: &CompetitiveRatio) -> (String, String) {
    (r.to_string(), approx_decimal(r.to_f64()))
}

fn cmd_compare(path: &Path, keys: &[String], seed: u64, out: Option<&Path>, ratio_dir: Option<&Path>) -> CliResult {
    let instance = load_instance(path)?;
    for key in keys {
        scheduler_by_key(key)?;
    }
    // Adaptive instances are realized per scheduler, so SRPT runs on each.
    let shared_opt = if instance.adaptive.is_none() { Some(srpt_on(&instance, seed)?) } else { None };
    let one = Rational::one();
    let mut csv = String::from(
        "scheduler,total_flow,total_flow_approx,flow_ratio,flow_ratio_approx,max_local_ratio,max_local_ratio_approx,max_local_witness_t,max_delta_t1,max_delta_t1_at\n",
    );
    if let Some(dir) = ratio_dir {
        fs::create_dir_all(dir)?;
    }
    let mut written: Vec<PathBuf> = Vec::new();
    for key in keys {
        let trace = run(&instance, key, seed)?;
        let own_opt;
        let opt = match &shared_opt {
            Some(o) => o,
            None => {
                own_opt = srpt_on(&trace.instance, seed)?;
                &own_opt
            }
        };
        let flow = total_flow_time(&trace)?;
        let ratio = competitive_ratio(&flow, &total_flow_time(opt)?);
        let local = local_ratio_report(&trace, opt, None)?;
        let times = joint_event_times(&trace, opt);
        let (max_d, max_d_at) = max_pending_at_least(&trace, &times, &one)?;
        let (ratio_s, ratio_a) = ratio_cells(&ratio);
        let (local_s, local_a) = ratio_cells(&local.max_ratio);
        let show = |t: &Option<Rational>| t.as_ref().map(|t| t.to_string()).unwrap_or_default();
        csv.push_str(&format!(
            "{key},{flow},{},{ratio_s},{ratio_a},{local_s},{local_a},{},{max_d},{}\n",
            approx_decimal(flow.to_f64()),
            show(&local.witness_t),
            show(&max_d_at)
        ));
        if let Some(dir) = ratio_dir {
            let csv_path = dir.join(format!("{key}.ratio.csv"));
            write_ratio_csv(&local, std::io::BufWriter::new(fs::File::create(&csv_path)?))?;
            let mu2 = distortion_of(&trace.instance).mu2;
            let hist = far_behind_histogram(&trace, opt, &times, &mu2)?;
            let json_path = dir.join(format!("{key}.summary.json"));
            fs::write(&json_path, RatioSummary::new(&local, Some(hist)).to_json())?;
            written.extend([csv_path, json_path]);
        }
    }
    let config = json!({"instance": path.display().to_string(), "schedulers": keys, "seed": seed,
        "ratio_dir": ratio_dir.map(|d| d.display().to_string())});
    match out {
        Some(p) => {
            fs::write(p, &csv)?;
            let mut outputs: Vec<&Path> = vec![p];
            outputs.extend(written.iter().map(PathBuf::as_path));
            write_manifest(p, "compare", config, Some(instance.content_hash()), &outputs)?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_lowerbound(family: FamilyArgs, trials: u64, seed: u64, keys: &[String], out: Option<&Path>) -> CliResult {
    let family = match family {
        FamilyArgs { mu: Some(mu), k } => LbFamily::Capped { mu, k },
        FamilyArgs { mu: None, k: Some(k) } => LbFamily::Prime { k },
        FamilyArgs { mu: None, k: None } => unreachable!("clap requires --k or --mu"),
    };
    let refs: Vec<&str> = keys.iter().map(String::as_str).collect();
    let results = run_lowerbound(&refs, &family, trials, seed)?;
    for r in &results {
        let se = |x: Option<f64>| x.map_or("undefined".to_string(), |v| format!("{v:.4}"));
        println!(
            "scheduler={} k={} t={} trials={} mean_delta_t1={:.4} (se {}) mean_srpt_delta={:.4} (se {}) ratio={:.4}",
            r.scheduler,
            r.jobs,
            r.snapshot,
            r.trials,
            r.mean_alg,
            se(r.stderr_alg),
            r.mean_opt,
            se(r.stderr_opt),
            r.ratio
        );
    }
    if let Some(p) = out {
        let text = serde_json::to_string_pretty(&results).expect("results serialize") + "\n";
        fs::write(p, text)?;
        let config = json!({"family": family, "trials": trials, "seed": seed, "schedulers": keys});
        write_manifest(p, "lowerbound", config, None, &[p])?;
    }
    Ok(())
}

fn cmd_check(path: &Path, key: Option<&str>, trace_path: Option<&Path>, seed: u64, out: Option<&Path>) -> CliResult {
    let instance = load_instance(path)?;
    let trace = match (key, trace_path) {
        (Some(key), _) => run(&instance, key, seed)?,
        (None, Some(tp)) => {
            let file = fs::File::open(tp).map_err(|e| Failure::Usage(format!("{}: {e}", tp.display())))?;
            Trace::read_jsonl(BufReader::new(file), instance.clone())?
        }
        (None, None) => unreachable!("clap requires --scheduler or --trace"),
    };
    let opt = srpt_on(&trace.instance, seed)?;
    let report = check_trace(&trace, Some(&opt))?;
    print!("{report}");
    if let Some(p) = out {
        fs::write(p, serde_json::to_string_pretty(&report).expect("report serializes") + "\n")?;
        let config = json!({"instance": path.display().to_string(), "scheduler": key, "seed": seed,
            "trace": trace_path.map(|t| t.display().to_string())});
        write_manifest(p, "check", config, Some(instance.content_hash()), &[p])?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Violation(format!("{} invariant violations in the {} trace", report.violations(), report.scheduler)))
    }
}
