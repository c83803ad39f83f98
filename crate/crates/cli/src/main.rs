//! `smpc` command-line front end.
//!
//! Exit codes: 0 ok, 1 configuration or I/O error, 2 safety step infeasible,
//! 3 runtime violation (infeasible MPC step or golden mismatch).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use smpc::case_study::{reproduce_case_study, CaseStudyOptions};
use smpc::config::RunConfig;
use smpc::error::StageContext;
use smpc::export::{write_file, write_report, write_schedule, write_trajectory, write_vertices};
use smpc::par::Execution;
use smpc::safety::solve_safety;
use smpc::simulator::{derive_seed, monte_carlo, run_closed_loop, Disturbance};
use smpc::solver::{DenseSimplex, DualActiveSet};
use smpc::synthesis::build_context;
use smpc::tube_mpc::MpcProblem;
use smpc::Error;

const CASE_STUDY_CONFIG: &str = include_str!("../../../configs/case_study.toml");
const GOLDEN_SUPPORT: &str = include_str!("../golden/case_study_support.txt");

#[derive(Parser)]
#[command(
    name = "smpc",
    version,
    about = "Stochastic MPC with optimized constraint relaxation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Offline synthesis and safety LP; writes the relaxation schedule.
    Synthesize(Common),
    /// Monte Carlo closed-loop simulation.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Built-in case study end to end.
    CaseStudy {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        generators: Option<usize>,
        /// Compare the relaxation support with the stored golden value.
        #[arg(long)]
        check: bool,
    },
    /// Dumps the state set tightened for relaxation `alpha`.
    Tighten {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: f64,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; the built-in case study when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    generators: Option<usize>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Infeasible(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Infeasible(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e.root() {
            Error::SafetyInfeasible | Error::TerminalSetEmpty => Failure::Infeasible(msg),
            Error::RecursiveFeasibilityViolated(_) => Failure::Runtime(msg),
            _ => Failure::Config(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

struct Loaded {
    text: String,
    config: RunConfig,
}

impl Common {
    fn load(&self) -> Result<Loaded, Failure> {
        let text = match &self.config {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
            None => CASE_STUDY_CONFIG.to_string(),
        };
        let mut config = RunConfig::from_toml(&text).map_err(|e| {
            let origin = self.config.as_deref().unwrap_or(Path::new("<built-in>"));
            Failure::Config(format!("{}: {e}", origin.display()))
        })?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(g) = self.generators {
            config.tightening.generators = g;
        }
        Ok(Loaded { text, config })
    }
}

fn manifest(
    out: &Path,
    command: &str,
    loaded: &Loaded,
    extra: serde_json::Value,
    files: &[PathBuf],
) -> Outcome {
    let lp = DenseSimplex::default();
    let qp = DualActiveSet::default();
    let value = json!({
        "command": command,
        "version": concat!(env!("CARGO_PKG_VERSION"), "+", env!("SMPC_GIT_DESCRIBE")),
        "config_sha256": Sha256::digest(loaded.text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>(),
        "seed": loaded.config.seed,
        "generators": loaded.config.tightening.generators,
        "solver": {
            "lp_pivot_tol": lp.pivot_tol,
            "lp_feas_tol": lp.feas_tol,
            "qp_feas_tol": qp.feas_tol,
        },
        "run": extra,
        "files": files.iter().map(|f| f.file_name().unwrap().to_string_lossy().into_owned()).collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&value).expect("manifest serializes");
    std::fs::write(out.join("manifest.json"), text + "\n")?;
    Ok(())
}

fn synthesize(common: &Common) -> Outcome {
    let loaded = common.load()?;
    let inst = loaded.config.instance()?;
    let lp = DenseSimplex::default();
    let ctx = build_context(&inst, &loaded.config.tightening_options(), &lp).stage("synthesis")?;
    let safety = solve_safety(&ctx, &inst, &lp).stage("safety")?;
    std::fs::create_dir_all(&common.out)?;
    let path = common.out.join("schedule.csv");
    write_file(&path, |w| write_schedule(w, &safety))?;
    let support = safety.schedule.support(smpc::case_study::SUPPORT_TOL);
    println!("relaxation support: {support:?}");
    println!("objective: {:.6}", safety.objective);
    manifest(
        &common.out,
        "synthesize",
        &loaded,
        json!({ "support": support, "objective": safety.objective }),
        &[path],
    )
}

fn simulate(common: &Common, trials: Option<usize>, steps: Option<usize>) -> Outcome {
    let loaded = common.load()?;
    let cfg = &loaded.config;
    let trials = trials.unwrap_or(cfg.simulation.trials);
    let steps = steps.unwrap_or(cfg.simulation.steps);
    if trials == 0 {
        return Err(Failure::Config("--trials must be at least 1".into()));
    }
    let inst = cfg.instance()?;
    if inst.noise.family != smpc::NoiseFamily::Gaussian {
        return Err(Error::NoSamplingDistribution.into());
    }
    let lp = DenseSimplex::default();
    let ctx = build_context(&inst, &cfg.tightening_options(), &lp).stage("synthesis")?;
    let safety = solve_safety(&ctx, &inst, &lp).stage("safety")?;
    let problem = MpcProblem::new(
        &inst.system,
        &ctx,
        &safety.schedule,
        inst.horizon,
        cfg.solver.xi_penalty,
    );
    let report = monte_carlo(
        &problem,
        &inst.x0,
        &inst.noise,
        &inst.constraints.state_set,
        &ctx.prs.state_prs,
        (&inst.q, &inst.r),
        steps,
        trials,
        cfg.seed,
        Execution::Parallel,
    )
    .stage("simulation")?;

    std::fs::create_dir_all(&common.out)?;
    let mut files = Vec::new();
    let path = common.out.join("schedule.csv");
    write_file(&path, |w| write_schedule(w, &safety))?;
    files.push(path);
    let path = common.out.join("report.csv");
    write_file(&path, |w| write_report(w, &report))?;
    files.push(path);
    let dist = Disturbance::from_noise(&inst.noise)?;
    if let Ok(t) = run_closed_loop(
        &problem,
        &inst.x0,
        &dist,
        steps,
        derive_seed(cfg.seed, 0),
        false,
    ) {
        let path = common.out.join("trajectory.csv");
        write_file(&path, |w| write_trajectory(w, &t))?;
        files.push(path);
    }

    let min_rate = report.rates.iter().cloned().fold(1.0, f64::min);
    println!("trials: {trials}, steps: {steps}");
    println!("minimum satisfaction rate: {min_rate:.4}");
    println!("steps below bound − 3σ: {:?}", report.flagged);
    println!("infeasible trials: {}", report.infeasible_trials);
    manifest(
        &common.out,
        "simulate",
        &loaded,
        json!({
            "trials": trials,
            "steps": steps,
            "flagged": report.flagged,
            "infeasible_trials": report.infeasible_trials,
            "mean_stage_cost": report.mean_stage_cost,
        }),
        &files,
    )?;
    if report.infeasible_trials > 0 {
        return Err(Failure::Runtime(format!(
            "{} trials hit an infeasible MPC step",
            report.infeasible_trials
        )));
    }
    Ok(())
}

fn case_study(
    out: &Path,
    seed: Option<u64>,
    steps: Option<usize>,
    generators: Option<usize>,
    check: bool,
) -> Outcome {
    let common = Common {
        config: None,
        out: out.to_path_buf(),
        seed,
        generators,
    };
    let loaded = common.load()?;
    let mut options = CaseStudyOptions {
        tightening: loaded.config.tightening_options(),
        seed: loaded.config.seed,
        ..CaseStudyOptions::default()
    };
    if let Some(s) = steps {
        options.steps = s;
    }
    let report = reproduce_case_study(&options, Some(out))?;
    let support = report
        .support
        .iter()
        .map(|k| k.to_string())
        .collect::<Vec<_>>()
        .join(",");
    println!("relaxation support: {{{support}}}");
    println!("static bound: {:.4}", report.static_bound.probability);
    println!(
        "nominal x1: max at k={}, turning points {:?}",
        report.shape.argmax, report.shape.turning_points
    );
    manifest(
        out,
        "case-study",
        &loaded,
        json!({
            "support": report.support,
            "static_bound": report.static_bound.probability,
            "steps": options.steps,
        }),
        &report.files,
    )?;
    if check && support != GOLDEN_SUPPORT.trim() {
        return Err(Failure::Runtime(format!(
            "support {{{support}}} differs from golden {{{}}}",
            GOLDEN_SUPPORT.trim()
        )));
    }
    Ok(())
}

fn tighten_cmd(common: &Common, alpha: f64) -> Outcome {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Failure::Config("--alpha must lie in [0, 1]".into()));
    }
    let loaded = common.load()?;
    let inst = loaded.config.instance()?;
    let lp = DenseSimplex::default();
    let ctx = build_context(&inst, &loaded.config.tightening_options(), &lp).stage("synthesis")?;
    let set = ctx.state_rows(alpha);
    std::fs::create_dir_all(&common.out)?;
    let mut files = Vec::new();
    let path = common.out.join("tightened_halfspaces.csv");
    write_file(&path, |w| {
        let mut w = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=set.dim()).map(|i| format!("a{i}")).collect();
        header.push("b".into());
        w.write_record(&header)?;
        for i in 0..set.num_rows() {
            let mut row: Vec<String> = set.a.row(i).iter().map(|v| v.to_string()).collect();
            row.push(set.b[i].to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    })?;
    files.push(path);
    if set.dim() == 2 {
        let verts = set.vertices_2d()?;
        let path = common.out.join("tightened_vertices.csv");
        write_file(&path, |w| write_vertices(w, &[(0, verts)]))?;
        files.push(path);
    }
    manifest(
        &common.out,
        "tighten",
        &loaded,
        json!({ "alpha": alpha }),
        &files,
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synthesize(c) => synthesize(c),
        Command::Simulate {
            common,
            trials,
            steps,
        } => simulate(common, *trials, *steps),
        Command::CaseStudy {
            out,
            seed,
            steps,
            generators,
            check,
        } => case_study(out, *seed, *steps, *generators, *check),
        Command::Tighten { common, alpha } => tighten_cmd(common, *alpha),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Config(m) | Failure::Infeasible(m) | Failure::Runtime(m) => m,
            };
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
