use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rkhs_motion::bench::{self, report, Suite, SuiteDetails};
use rkhs_motion::config::{self, PlanConfig};
use rkhs_motion::io::{read_to_string, write_atomic, write_files_atomic};
use rkhs_motion::kernels::FamilyKind;
use rkhs_motion::objective::{self, legendre_rule, ReduceOp};
use rkhs_motion::optimizer;
use rkhs_motion::svg::scene_svg;
use rkhs_motion::world::{generate_scene, Scene, SceneTemplate};
use rkhs_motion::{Error, Result};

/// Functional-gradient trajectory optimization with kernel trajectories.
#[derive(Parser)]
#[command(name = "rkhs-motion", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a trajectory for one scene file.
    Plan {
        #[arg(long)]
        scene: PathBuf,
        /// Kernel family: gaussian, laplacian, bspline or waypoint.
        #[arg(long)]
        kernel: Option<String>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        /// Sections of the max reduce.
        #[arg(long)]
        nx: Option<usize>,
        /// Iteration cap.
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// TOML file with plan settings; flags take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generate a random scene for the bundled 3-link arm.
    SceneGen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 12)]
        obstacles: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a benchmark suite and write its report.
    Bench {
        /// kernel-comparison, cost-formulation or large-step.
        #[arg(long)]
        suite: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// TOML file with experiment settings; flags take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Worker threads (overrides the environment).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print Gauss-Legendre nodes and weights on [0, 1].
    QuadTable {
        #[arg(long)]
        n: usize,
    },
    /// Run the built-in invariant checks.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

const EXIT_COLLISION: u8 = 2;
const CLEARANCE_SAMPLES: usize = 2000;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Plan {
            scene,
            kernel,
            sigma,
            lambda,
            beta,
            nx,
            iters,
            out,
            config,
        } => {
            let flags = PlanFlags {
                kernel,
                sigma,
                lambda,
                beta,
                nx,
                iters,
            };
            plan(&scene, flags, config.as_deref(), &out)
        }
        Command::SceneGen { seed, obstacles, out } => scene_gen(seed, obstacles, &out).map(|_| 0),
        Command::Bench {
            suite,
            trials,
            seed,
            out,
            config,
            threads,
        } => run_bench(&suite, trials, seed, threads, config.as_deref(), &out).map(|_| 0),
        Command::QuadTable { n } => quad_table(n).map(|_| 0),
        Command::Check { seed } => check(seed),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

struct PlanFlags {
    kernel: Option<String>,
    sigma: Option<f64>,
    lambda: Option<f64>,
    beta: Option<f64>,
    nx: Option<usize>,
    iters: Option<usize>,
}

fn plan_config(flags: PlanFlags, file: Option<&Path>) -> Result<PlanConfig> {
    let mut cfg = config::load_plan(file)?;
    if let Some(k) = flags.kernel {
        cfg.kernel.family = k.parse::<FamilyKind>()?.name().to_string();
    }
    if let Some(s) = flags.sigma {
        cfg.kernel.sigma = s;
    }
    if let Some(l) = flags.lambda {
        cfg.lambda = l;
    }
    if let Some(b) = flags.beta {
        cfg.beta = b;
    }
    if let Some(nx) = flags.nx {
        cfg.reduce.nx = nx;
    }
    if let Some(n) = flags.iters {
        cfg.n_max = n;
    }
    Ok(cfg)
}

fn plan(scene_path: &Path, flags: PlanFlags, file: Option<&Path>, out: &Path) -> Result<u8> {
    let cfg = plan_config(flags, file)?;
    let scene = Scene::from_toml(&read_to_string(scene_path)?)?;
    let (opt, spec) = cfg.validate(scene.arm().dof())?;

    let (xi, trace) = optimizer::optimize(&scene, &opt, &spec)?;
    let clearance = objective::min_clearance(&xi, &scene, CLEARANCE_SAMPLES)?;
    let dense = objective::u_obs(&xi, &scene, ReduceOp::dense_reference())?;

    write_files_atomic(&[
        (out.join("trajectory.csv"), xi.trajectory_csv(cfg.trajectory_samples)?.into_bytes()),
        (out.join("support.csv"), xi.support_csv().into_bytes()),
        (out.join("trace.csv"), trace.to_csv().into_bytes()),
        (out.join("plan.svg"), scene_svg(&scene, &xi, 9)?.into_bytes()),
        (out.join("effective_config.toml"), cfg.to_toml()?.into_bytes()),
    ])?;

    println!(
        "iterations {} ({:?}), support {}, dense cost {:.6}, clearance {:.6}",
        trace.iterations(),
        trace.termination,
        xi.support_len(),
        dense,
        clearance
    );
    if clearance > 0.0 {
        Ok(0)
    } else {
        eprintln!("trajectory still collides (clearance {clearance:.6})");
        Ok(EXIT_COLLISION)
    }
}

fn scene_gen(seed: u64, obstacles: usize, out: &Path) -> Result<()> {
    let scene = generate_scene(seed, obstacles, &SceneTemplate::planar_3dof())?;
    write_atomic(out, scene.to_toml()?.as_bytes())?;
    println!("wrote {} ({} obstacles, seed {seed})", out.display(), scene.obstacles().len());
    Ok(())
}

fn run_bench(
    suite: &str,
    trials: Option<usize>,
    seed: Option<u64>,
    threads: Option<usize>,
    file: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let suite: Suite = suite.parse()?;
    let mut cfg = config::load_experiment(file)?;
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if threads.is_some() {
        cfg.threads = threads;
    }
    cfg.validate()?;

    let report = bench::run_suite(suite, &cfg)?;
    let files = report::emit_report(&report, out)?;

    let rows = report.rows();
    for s in report::summarize(&rows).iter().filter(|s| s.iter == rows_last_iter(&rows, &s.method)) {
        println!(
            "{:<24} iter {:>3}  cost {:.4} ± {:.4}  smoothness {:.4} ± {:.4}  success {:.2}",
            s.method, s.iter, s.u_obs_dense_mean, s.u_obs_dense_se, s.smoothness_mean, s.smoothness_se, s.success_rate
        );
    }
    match &report.details {
        SuiteDetails::CostFormulation(g) => println!(
            "quadrature vs max {:+.2}% [{:+.2}%, {:+.2}%], max vs quadrature {:+.2}%",
            100.0 * g.quadrature_vs_max,
            100.0 * g.quadrature_vs_max_ci.0,
            100.0 * g.quadrature_vs_max_ci.1,
            100.0 * g.max_vs_quadrature
        ),
        SuiteDetails::LargeStep(outcomes) => {
            for o in outcomes {
                let clear = o.iterations_to_clear.map_or_else(|| "never".into(), |n| n.to_string());
                println!("{:<24} lambda {:>5}  clear after {clear}  velocity tv {:.3}", o.method, o.lambda, o.velocity_tv);
            }
        }
        SuiteDetails::KernelComparison => {}
    }
    if !report.failures.is_empty() {
        eprintln!("{} of {} trials failed", report.failures.len(), cfg.trials);
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn rows_last_iter(rows: &[report::ResultRow], method: &str) -> usize {
    rows.iter().filter(|r| r.method == method).map(|r| r.iter).max().unwrap_or(0)
}

/// `v` with 15 significant digits, trailing zeros removed.
fn sig15(v: f64) -> String {
    if v == 0.0 {
        return "0.0".into();
    }
    let decimals = (14 - v.abs().log10().floor() as i32).clamp(1, 40) as usize;
    let s = format!("{v:.decimals$}");
    let s = s.trim_end_matches('0');
    if s.ends_with('.') {
        format!("{s}0")
    } else {
        s.to_string()
    }
}

fn quad_table(n: usize) -> Result<()> {
    let rule = legendre_rule(n)?;
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        println!("{} {}", sig15(*x), sig15(*w));
    }
    println!("sum {}", sig15(rule.weights.iter().sum()));
    Ok(())
}

fn check(seed: u64) -> Result<u8> {
    let results = rkhs_motion::diagnostics::run_all(seed)?;
    let mut failed = 0;
    for r in &results {
        let verdict = if r.passed() { "PASS" } else { "FAIL" };
        println!(
            "{verdict} {:<26} n={:<5} max error {:.3e} (tolerance {:.0e})",
            r.name, r.instances, r.max_error, r.tolerance
        );
        failed += usize::from(!r.passed());
    }
    if failed > 0 {
        return Err(Error::Config(format!("{failed} check(s) failed")));
    }
    Ok(0)
}
