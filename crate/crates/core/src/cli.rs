//! Command-line front end. JSON goes to stdout unless `--csv` or
//! `--plot-data` asks for CSV. Exit codes: 0 success or feasible,
//! 1 infeasible or FAIL, 2 usage, I/O or inconclusive analysis.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::feasibility::{default_horizon_cap, demand_checkpoints, edf_feasible, rho_ratio, FeasibilityStatus};
use crate::generator::{gen, GeneratorConfig};
use crate::io::{read_taskset, TaskSetFile};
use crate::model::TaskSet;
use crate::partition::{
    dm_partition, min_speed_success, speedup_bound, speedup_experiment, PartitionOutcome, SpeedupConfig, SpeedupRow,
};
use crate::rational::Rational;
use crate::rho::{cauchy_min, fourteen_ninths, mp4_brute_force, probe_rho_lower, ProbeConfig, SearchReport};
use crate::simulator::{simulate_edf, EventKind};
use crate::transform::{
    align_step, f_jump_points, full_pipeline, normalize_chen_step, rationalize_step, split_equal_execution_step,
    tighten_deadlines_step, TransformTrace,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "demandkit", version, about = "Exact demand-bound analysis for sporadic task sets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Default, Args)]
pub struct Format {
    /// Emit a CSV table instead of JSON.
    #[arg(long, global = true)]
    pub csv: bool,
    /// Emit long-format `series,x,y` CSV for plotting.
    #[arg(long, global = true, conflicts_with = "csv")]
    pub plot_data: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// EDF feasibility verdict and the dbf*(d_max)/d_max ratio.
    Analyze {
        file: PathBuf,
        #[command(flatten)]
        format: Format,
    },
    /// Run the transform pipeline, or one step of it.
    Transform {
        file: PathBuf,
        /// Run normalize, tighten, split and align in sequence.
        #[arg(long, conflicts_with = "step")]
        pipeline: bool,
        /// Run a single step.
        #[arg(long, value_parser = ["normalize", "rationalize", "tighten", "split", "align"])]
        step: Option<String>,
        /// Perturbation bound for `--step rationalize`.
        #[arg(long, default_value = "1/100")]
        eps: Rational,
        /// Write every intermediate task set to this directory.
        #[arg(long)]
        dump_dir: Option<PathBuf>,
        #[command(flatten)]
        format: Format,
    },
    /// Simulate preemptive EDF under synchronous periodic release.
    Simulate {
        file: PathBuf,
        /// Defaults to the hyperperiod plus the largest deadline.
        #[arg(long)]
        horizon: Option<Rational>,
        #[arg(long, default_value = "1")]
        speed: Rational,
        #[command(flatten)]
        format: Format,
    },
    /// Aligned-instance search, ratio probing and the Cauchy minimum.
    Rho(RhoArgs),
    /// Deadline-monotonic first-fit partitioning at a given speed.
    Partition {
        file: PathBuf,
        #[arg(short, long)]
        m: usize,
        #[arg(long, default_value = "1")]
        speed: Rational,
        #[command(flatten)]
        format: Format,
    },
    /// Smallest speed at which partitioning onto m processors succeeds.
    Minspeed {
        file: PathBuf,
        #[arg(short, long)]
        m: usize,
        #[arg(long, default_value = "1/1000000")]
        tol: Rational,
        #[command(flatten)]
        format: Format,
    },
    /// Minimum speeds over feasible-by-construction sets.
    Speedup {
        /// Processor counts, comma separated.
        #[arg(long = "m", value_delimiter = ',', required = true)]
        m: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "1/1000000")]
        tol: Rational,
        #[command(flatten)]
        format: Format,
    },
    /// Generate a random task set file.
    Gen {
        #[arg(short, long)]
        n: usize,
        #[arg(short, long, default_value = "1/2")]
        utilization: Rational,
        #[arg(long, default_value_t = 1)]
        period_min: i128,
        #[arg(long, default_value_t = 100)]
        period_max: i128,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Allow deadlines up to twice the period.
        #[arg(long)]
        unconstrained: bool,
        /// Output file; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "mode")]
pub struct RhoArgs {
    /// Exhaustive search over permutations of 1..=N (N ≤ 10).
    #[arg(long, value_name = "N", group = "mode")]
    pub brute: Option<usize>,
    /// With --brute, search every size 1..=N.
    #[arg(long, requires = "brute")]
    pub upto: bool,
    /// Random feasible sets and their pipeline stages.
    #[arg(long, group = "mode")]
    pub probe: bool,
    /// Closed-form and numeric Cauchy minimum for sizes 1..=N.
    #[arg(long, value_name = "N", group = "mode")]
    pub cauchy: Option<usize>,
    #[arg(long, default_value_t = 6)]
    pub n_max: usize,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 12)]
    pub max_param: i128,
    #[command(flatten)]
    pub format: Format,
}

/// Result of one command: text for stdout and an exit code.
struct Output {
    text: String,
    code: i32,
}

impl Output {
    fn json(value: &impl Serialize, code: i32) -> Self {
        Output { text: serde_json::to_string_pretty(value).expect("serializable") + "\n", code }
    }

    fn text(text: String, code: i32) -> Self {
        Output { text, code }
    }
}

type CmdResult = Result<Output, String>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ =
                if e.use_stderr() { err.write_all(rendered.as_bytes()) } else { out.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command) {
        Ok(o) => {
            let _ = out.write_all(o.text.as_bytes());
            o.code
        }
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_ERROR
        }
    }
}

fn execute(command: Command) -> CmdResult {
    match command {
        Command::Analyze { file, format } => analyze(&load(&file)?, format),
        Command::Transform { file, pipeline, step, eps, dump_dir, format } => {
            let ts = load(&file)?;
            if !pipeline && step.is_none() {
                return Err("transform needs --pipeline or --step".into());
            }
            transform(&ts, step.as_deref(), eps, dump_dir.as_deref(), format)
        }
        Command::Simulate { file, horizon, speed, format } => simulate(&load(&file)?, horizon, speed, format),
        Command::Rho(args) => rho(&args),
        Command::Partition { file, m, speed, format } => partition(&load(&file)?, m, speed, format),
        Command::Minspeed { file, m, tol, format } => minspeed(&load(&file)?, m, tol, format),
        Command::Speedup { m, count, seed, tol, format } => speedup(&m, count, seed, tol, format),
        Command::Gen { n, utilization, period_min, period_max, seed, unconstrained, output } => {
            let config = GeneratorConfig {
                n,
                target_utilization: utilization,
                period_range: (period_min, period_max),
                seed,
                constrained: !unconstrained,
            };
            let ts = gen(&config).map_err(|e| e.to_string())?;
            let file = TaskSetFile::from_taskset(&ts)
                .with_metadata("generator", serde_json::to_value(&config).expect("serializable"));
            match output {
                Some(path) => {
                    file.write(&path).map_err(|e| e.to_string())?;
                    Ok(Output::text(String::new(), EXIT_OK))
                }
                None => Ok(Output::text(file.to_json(), EXIT_OK)),
            }
        }
    }
}

fn load(path: &Path) -> Result<TaskSet, String> {
    read_taskset(path).map_err(|e| e.to_string())
}

/// Accumulates `series,x,y` rows.
struct PlotData(String);

impl PlotData {
    fn new() -> Self {
        PlotData(String::from("series,x,y\n"))
    }

    fn row(&mut self, series: &str, x: impl std::fmt::Display, y: impl std::fmt::Display) {
        let _ = writeln!(self.0, "{series},{x},{y}");
    }
}

fn analyze(ts: &TaskSet, format: Format) -> CmdResult {
    let verdict = edf_feasible(ts, default_horizon_cap());
    let ratio = rho_ratio(ts);
    let code = match verdict.status {
        FeasibilityStatus::Feasible => EXIT_OK,
        FeasibilityStatus::Infeasible => EXIT_NEGATIVE,
        FeasibilityStatus::HorizonOverflow => EXIT_ERROR,
    };
    if format.plot_data {
        let mut points = demand_checkpoints(ts, ts.d_max() + ts.d_max());
        points.extend(f_jump_points(ts));
        points.push(Rational::ZERO);
        points.sort();
        points.dedup();
        let mut plot = PlotData::new();
        for &t in &points {
            plot.row("dbf", t, ts.dbf(t));
            plot.row("dbf_star", t, ts.dbf_star(t));
            plot.row("f", t, ts.f(t));
            plot.row("t", t, t);
        }
        return Ok(Output::text(plot.0, code));
    }
    if format.csv {
        let witness = verdict.witness_t.map(|t| t.to_string()).unwrap_or_default();
        let status = serde_json::to_value(verdict.status).expect("serializable");
        let text = format!(
            "status,witness_t,horizon,rho_ratio,utilization\n{},{},{},{},{}\n",
            status.as_str().unwrap_or_default(),
            witness,
            verdict.horizon_used,
            ratio,
            ts.utilization()
        );
        return Ok(Output::text(text, code));
    }
    let body = json!({
        "n": ts.len(),
        "constrained": ts.is_constrained(),
        "utilization": ts.utilization(),
        "d_max": ts.d_max(),
        "feasibility": verdict,
        "rho_ratio": ratio,
        "rho_ratio_float": ratio.to_f64(),
    });
    Ok(Output::json(&body, code))
}

fn transform(ts: &TaskSet, step: Option<&str>, eps: Rational, dump_dir: Option<&Path>, format: Format) -> CmdResult {
    let result = match step {
        None => full_pipeline(ts).map(|(_, trace)| trace),
        Some(name) => {
            let step = match name {
                "normalize" => normalize_chen_step(ts),
                "rationalize" => rationalize_step(ts, eps),
                "tighten" => tighten_deadlines_step(ts),
                "split" => split_equal_execution_step(ts),
                "align" => align_step(ts),
                other => return Err(format!("unknown step {other}")),
            };
            step.map(|s| TransformTrace { steps: vec![s] })
        }
    };
    let trace = match result {
        Ok(trace) => trace,
        Err(e) => return Ok(Output::json(&json!({ "error": e.to_string() }), EXIT_NEGATIVE)),
    };
    if let Some(dir) = dump_dir {
        dump_stages(ts, &trace, dir)?;
    }
    if format.csv || format.plot_data {
        let mut text = if format.csv {
            String::from("index,step,ratio_before,ratio_after,checks,all_passed\n")
        } else {
            PlotData::new().0
        };
        for (i, s) in trace.steps.iter().enumerate() {
            if format.csv {
                let all = s.checks_passed.iter().all(|c| c.passed);
                let _ = writeln!(
                    text,
                    "{},{},{},{},{},{}",
                    i + 1,
                    s.name,
                    s.ratio_before,
                    s.ratio_after,
                    s.checks_passed.len(),
                    all
                );
            } else {
                let _ = writeln!(text, "ratio,{},{}", i, s.ratio_before.to_f64());
                if i + 1 == trace.steps.len() {
                    let _ = writeln!(text, "ratio,{},{}", i + 1, s.ratio_after.to_f64());
                }
            }
        }
        return Ok(Output::text(text, EXIT_OK));
    }
    Ok(Output::json(&trace, EXIT_OK))
}

fn dump_stages(input: &TaskSet, trace: &TransformTrace, dir: &Path) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let write = |name: String, ts: &TaskSet, step: &str| {
        TaskSetFile::from_taskset(ts).with_metadata("stage", step).write(&dir.join(name)).map_err(|e| e.to_string())
    };
    write("00_input.json".into(), input, "input")?;
    for (i, s) in trace.steps.iter().enumerate() {
        write(format!("{:02}_{}.json", i + 1, s.name), &s.output, s.name)?;
    }
    Ok(())
}

fn simulate(ts: &TaskSet, horizon: Option<Rational>, speed: Rational, format: Format) -> CmdResult {
    let horizon = match horizon {
        Some(h) => h,
        None => ts
            .checked_hyperperiod()
            .and_then(|h| h.checked_add(&ts.d_max()))
            .ok_or("hyperperiod overflows; pass --horizon")?,
    };
    let trace = simulate_edf(ts, horizon, speed).map_err(|e| e.to_string())?;
    let code = if trace.all_met() { EXIT_OK } else { EXIT_NEGATIVE };
    if format.csv {
        return Ok(Output::text(trace.to_csv(), code));
    }
    if format.plot_data {
        let mut plot = PlotData::new();
        for ev in trace.events.iter().filter(|e| e.kind != EventKind::Idle) {
            let series = serde_json::to_value(ev.kind).expect("serializable");
            plot.row(series.as_str().unwrap_or_default(), ev.time, ev.task.map(|t| t + 1).unwrap_or(0));
        }
        return Ok(Output::text(plot.0, code));
    }
    Ok(Output::json(&json!({ "horizon": horizon, "speed": speed, "trace": trace }), code))
}

fn rho(args: &RhoArgs) -> CmdResult {
    let format = args.format;
    if let Some(n) = args.brute {
        let sizes: Vec<usize> = if args.upto { (1..=n).collect() } else { vec![n] };
        let reports =
            sizes.into_iter().map(mp4_brute_force).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
        let code = if reports.iter().all(|r| r.bound_14_9_ok) { EXIT_OK } else { EXIT_NEGATIVE };
        if format.csv {
            let mut text = format!("{}\n", SearchReport::CSV_HEADER);
            for r in &reports {
                let _ = writeln!(text, "{}", r.csv_row());
            }
            return Ok(Output::text(text, code));
        }
        if format.plot_data {
            let mut plot = PlotData::new();
            for r in &reports {
                plot.row("best_value", r.n, r.best_value.to_f64());
                plot.row("bound_14_9", r.n, fourteen_ninths().to_f64());
            }
            return Ok(Output::text(plot.0, code));
        }
        return match reports.as_slice() {
            [single] => Ok(Output::json(single, code)),
            many => Ok(Output::json(&many, code)),
        };
    }
    if let Some(n_max) = args.cauchy {
        let reports = (1..=n_max).map(cauchy_min).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
        let code = if reports.iter().all(|r| r.bound_ok && (r.closed_form - r.numeric).abs() <= 1e-9) {
            EXIT_OK
        } else {
            EXIT_NEGATIVE
        };
        if format.csv || format.plot_data {
            let mut text = if format.csv { String::from("n,closed_form,numeric,bound\n") } else { PlotData::new().0 };
            for r in &reports {
                if format.csv {
                    let _ = writeln!(text, "{},{:.15},{:.15},{:.15}", r.n, r.closed_form, r.numeric, r.bound);
                } else {
                    let _ = writeln!(text, "closed_form,{},{}", r.n, r.closed_form);
                    let _ = writeln!(text, "bound,{},{}", r.n, r.bound);
                }
            }
            return Ok(Output::text(text, code));
        }
        return Ok(Output::json(&reports, code));
    }
    let config = ProbeConfig { n_max: args.n_max, samples: args.samples, seed: args.seed, max_param: args.max_param };
    let result = probe_rho_lower(&config).map_err(|e| e.to_string())?;
    let code = if result.above_14_9 == 0 { EXIT_OK } else { EXIT_NEGATIVE };
    if format.csv || format.plot_data {
        let text = format!(
            "samples,evaluated,best_ratio,best_ratio_float,above_14_9\n{},{},{},{},{}\n",
            config.samples,
            result.evaluated,
            result.best_ratio,
            result.best_ratio.to_f64(),
            result.above_14_9
        );
        return Ok(Output::text(text, code));
    }
    Ok(Output::json(&json!({ "config": config, "result": result }), code))
}

fn partition(ts: &TaskSet, m: usize, speed: Rational, format: Format) -> CmdResult {
    let outcome = dm_partition(ts, m, speed).map_err(|e| e.to_string())?;
    let code = if outcome.is_success() { EXIT_OK } else { EXIT_NEGATIVE };
    if format.csv || format.plot_data {
        let text = match &outcome {
            PartitionOutcome::Assigned(p) => {
                let mut text = String::from("task,processor,value,deadline\n");
                for a in &p.admission_log {
                    let _ = writeln!(text, "{},{},{},{}", a.task + 1, a.processor + 1, a.value, a.deadline);
                }
                text
            }
            PartitionOutcome::Fail(i) => format!("task,processor,value,deadline\n{},FAIL,,\n", i + 1),
        };
        return Ok(Output::text(text, code));
    }
    Ok(Output::json(&outcome, code))
}

fn minspeed(ts: &TaskSet, m: usize, tol: Rational, format: Format) -> CmdResult {
    let speed = min_speed_success(ts, m, tol).map_err(|e| e.to_string())?;
    let bound = speedup_bound(m.max(1));
    if format.csv || format.plot_data {
        let text = format!(
            "m,min_speed,bound,margin\n{},{:.9},{:.9},{:.9}\n",
            m,
            speed.to_f64(),
            bound.to_f64(),
            (bound - speed).to_f64()
        );
        return Ok(Output::text(text, EXIT_OK));
    }
    let body = json!({ "m": m, "min_speed": speed, "min_speed_float": speed.to_f64(), "tol": tol, "bound": bound });
    Ok(Output::json(&body, EXIT_OK))
}

fn speedup(ms: &[usize], count: usize, seed: u64, tol: Rational, format: Format) -> CmdResult {
    let mut all: Vec<SpeedupRow> = Vec::new();
    let mut summary = Vec::new();
    for &m in ms {
        if m == 0 {
            return Err("processor counts must be positive".into());
        }
        let config = SpeedupConfig { tol, ..SpeedupConfig::new(m, count, seed) };
        let rows = speedup_experiment(&config).map_err(|e| e.to_string())?;
        let max = rows.iter().map(|r| r.min_speed).max();
        let within = rows.iter().all(|r| r.min_speed <= r.bound + tol);
        summary.push(json!({
            "m": m,
            "count": rows.len(),
            "bound": speedup_bound(m),
            "max_min_speed": max,
            "max_min_speed_float": max.map(|s| s.to_f64()),
            "within_bound": within,
        }));
        all.extend(rows);
    }
    let code = if all.iter().all(|r| r.min_speed <= r.bound + tol) { EXIT_OK } else { EXIT_NEGATIVE };
    if format.csv {
        let mut text = format!("{}\n", SpeedupRow::CSV_HEADER);
        for r in &all {
            let _ = writeln!(text, "{}", r.csv_row());
        }
        return Ok(Output::text(text, code));
    }
    if format.plot_data {
        let mut plot = PlotData::new();
        for r in &all {
            plot.row(&format!("min_speed_m{}", r.m), r.taskset_id, r.min_speed.to_f64());
        }
        return Ok(Output::text(plot.0, code));
    }
    Ok(Output::json(&json!({ "summary": summary, "rows": all }), code))
}
