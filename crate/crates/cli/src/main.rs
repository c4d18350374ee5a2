use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde_json::json;
use twodelay::{
    n_omega_sweep_with_workers, run_counterexample_on, self_convergence, CounterexampleSpec, Grid,
    HistorySegment, Model, SweepConfig, D0_TOLERANCE,
};

mod config;
mod table;

use config::{
    AgeSource, BuildConfig, ConvergenceConfig, InitialSource, InputError, ModelConfig, Scheme,
    SimulateConfig,
};
use table::{num, Table};

const EXIT_INPUT: u8 = 1;
const EXIT_NOT_IN_D: u8 = 2;
const EXIT_CONSTRUCTION: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "twodelay",
    version,
    about = "Two-delay population model: simulation, D0 construction and omega-limit sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate from an initial segment and write the trajectory as `t,u,H,F`.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the seed of a random initial segment.
        #[arg(long)]
        seed: Option<u64>,
        /// Halve the configured step.
        #[arg(long)]
        fine: bool,
    },
    /// Print H0 of a segment CSV; exit 2 when the segment is not in D.
    CheckH0 {
        segment: PathBuf,
        /// JSON with `params` and `nonlinearity`.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = D0_TOLERANCE)]
        tol: f64,
    },
    /// Build a D0 segment from an age profile and write it as a segment CSV.
    BuildInit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Certification tolerance on |H0| / (1 + ||u||).
        #[arg(long, default_value_t = D0_TOLERANCE)]
        tol: f64,
        #[arg(long)]
        fine: bool,
    },
    /// Run the bump nonlinearity from a constant history up to t = tau.
    Counterexample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        fine: bool,
    },
    /// Tail norms of T^n over an alpha grid and random D0 seeds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Norms CSV `alpha,seed,iter_index,l1_norm`.
        #[arg(long)]
        out: PathBuf,
        /// Summary CSV `alpha,label,n_clusters`; defaults to `<out>_summary.csv`.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        workers: Option<usize>,
        /// Override `seed0`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        fine: bool,
    },
    /// Observed order of both integrators under step halving.
    ConvergenceStudy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        fine: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Warn)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    use twodelay::Error as E;
    if e.downcast_ref::<InputError>().is_some() {
        return EXIT_INPUT;
    }
    match e.downcast_ref::<E>() {
        Some(E::NotAdmissible { .. }) => EXIT_NOT_IN_D,
        Some(E::ConstructionFailed { .. }) => EXIT_CONSTRUCTION,
        Some(
            E::InvalidParameters(_)
            | E::InvalidNonlinearity(_)
            | E::Incommensurate(_)
            | E::MalformedSegment(_),
        ) => EXIT_INPUT,
        Some(_) => EXIT_NUMERICAL,
        None => EXIT_INPUT,
    }
}

fn run(cmd: Command) -> anyhow::Result<u8> {
    match cmd {
        Command::Simulate {
            config,
            out,
            seed,
            fine,
        } => simulate(&config, &out, seed, fine),
        Command::CheckH0 {
            segment,
            config,
            tol,
        } => check_h0(&segment, &config, tol),
        Command::BuildInit {
            config,
            out,
            seed,
            tol,
            fine,
        } => build_init(&config, &out, seed, tol, fine),
        Command::Counterexample { config, out, fine } => counterexample(&config, &out, fine),
        Command::Sweep {
            config,
            out,
            summary,
            workers,
            seed,
            fine,
        } => sweep(&config, &out, summary, workers, seed, fine),
        Command::ConvergenceStudy { config, seed, fine } => convergence(&config, seed, fine),
    }
}

fn grid_json(g: &Grid) -> serde_json::Value {
    json!({ "h": g.h, "lag0": g.lag0, "lag": g.lag })
}

fn step(params: &twodelay::Parameters, h: f64, fine: bool) -> anyhow::Result<Grid> {
    let grid = Grid::new(params, h)?;
    Ok(if fine { grid.refined() } else { grid })
}

fn simulate(path: &Path, out: &Path, seed: Option<u64>, fine: bool) -> anyhow::Result<u8> {
    let mut cfg: SimulateConfig = config::load(path)?;
    if let (Some(s), InitialSource::RandomD0 { seed, .. } | InitialSource::Lifted { seed, .. }) =
        (seed, &mut cfg.initial)
    {
        *seed = s;
    }
    let grid = step(&cfg.params, cfg.h, fine)?;
    let model = Model::on_grid(cfg.params, cfg.nonlinearity.clone(), grid)?;
    let phi = initial_segment(&model, &cfg.initial, path)?;
    let tr = match cfg.scheme {
        Scheme::Steps => model.integrate_steps(&phi, cfg.t_end)?,
        Scheme::Renewal => model.integrate_renewal(&phi, cfg.t_end)?,
    };
    let resolved = json!({ "config": cfg, "grid": grid_json(&grid) });
    table::trajectory_table("simulate", &resolved, &tr)?.save(out)?;
    let last = tr.final_sample();
    println!("t = {}  u = {}", num(last.t), num(last.u));
    Ok(0)
}

fn initial_segment(
    model: &Model,
    src: &InitialSource,
    cfg: &Path,
) -> anyhow::Result<HistorySegment> {
    let seg = match src {
        InitialSource::Constant { value } => HistorySegment::constant(&model.grid, *value),
        InitialSource::Csv { path } => {
            let path = config::relative_to(cfg, path);
            let seg = table::read_segment(&path)?;
            seg.check_grid(&model.grid).with_context(|| {
                format!("{} does not match the configured grid", path.display())
            })?;
            seg
        }
        InitialSource::RandomD0 { seed, shape } => {
            model.build_d0_segment(&model.random_g(*seed, shape)?)?
        }
        InitialSource::Lifted { seed, h0, shape } => {
            let base = model.build_d0_segment(&model.random_g(*seed, shape)?)?;
            model.lift_h0(&base, *h0)?
        }
    };
    Ok(seg)
}

fn check_h0(segment: &Path, path: &Path, tol: f64) -> anyhow::Result<u8> {
    let cfg: ModelConfig = config::load(path)?;
    let seg = table::read_segment(segment)?;
    let grid = Grid::new(&cfg.params, seg.h)?;
    let model = Model::on_grid(cfg.params, cfg.nonlinearity, grid)?;
    seg.check_grid(&grid)?;
    let m = model.membership(&seg, tol)?;
    let verdict = if m.in_d0 {
        "in D0"
    } else if m.in_d {
        "in D"
    } else {
        "not in D"
    };
    print!(
        "{}",
        table::aligned(&[
            ("H0", m.h0.to_string()),
            ("tolerance", (tol * (1.0 + seg.sup_norm())).to_string()),
            ("nonnegative", m.nonnegative.to_string()),
            ("verdict", verdict.to_string()),
        ])
    );
    Ok(if m.in_d { 0 } else { EXIT_NOT_IN_D })
}

fn build_init(
    path: &Path,
    out: &Path,
    seed: Option<u64>,
    tol: f64,
    fine: bool,
) -> anyhow::Result<u8> {
    let mut cfg: BuildConfig = config::load(path)?;
    if let (Some(s), AgeSource::Random { seed, .. }) = (seed, &mut cfg.g) {
        *seed = s;
    }
    let grid = step(&cfg.params, cfg.h, fine)?;
    let model = Model::on_grid(cfg.params, cfg.nonlinearity.clone(), grid)?;
    let g = match &cfg.g {
        AgeSource::Random { seed, shape } => model.random_g(*seed, shape)?,
        AgeSource::Csv { path: g_path } => {
            let g_path = config::relative_to(path, g_path);
            let g = table::read_age(&g_path)?;
            model.enforce_g0(&g)?
        }
    };
    let seg = model.build_d0_segment(&g)?;
    let h0 = model.h0(&seg)?;
    let slack = tol * (1.0 + seg.sup_norm());
    if h0.abs() > slack {
        eprintln!(
            "error: construction not certified: |H0| = {:e} exceeds {slack:e}",
            h0.abs()
        );
        return Ok(EXIT_CONSTRUCTION);
    }
    let resolved = json!({ "config": cfg, "grid": grid_json(&grid), "tol": tol });
    table::segment_table("build-init", &resolved, &seg)?.save(out)?;
    println!("H0 = {h0}");
    Ok(0)
}

fn counterexample(path: &Path, out: &Path, fine: bool) -> anyhow::Result<u8> {
    let spec: CounterexampleSpec = config::load(path)?;
    spec.validate()?;
    let grid = spec.grid()?;
    let grid = if fine { grid.refined() } else { grid };
    let run = run_counterexample_on(&spec, grid)?;
    let resolved = json!({ "config": spec, "grid": grid_json(&grid) });
    table::trajectory_table("counterexample", &resolved, &run.trajectory)?.save(out)?;
    let first = run
        .first_negative_time
        .map_or_else(|| "none".to_string(), |t| t.to_string());
    print!(
        "{}",
        table::aligned(&[
            ("first_negative_time", first),
            ("u_delta(tau)", run.u_tau.to_string()),
            ("u0(tau)", run.limit_u_tau.to_string()),
            (
                "difference",
                (run.u_tau - run.limit_u_tau).abs().to_string()
            ),
        ])
    );
    Ok(0)
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or_else(Default::default, |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}_summary.csv"))
}

fn sweep(
    path: &Path,
    out: &Path,
    summary: Option<PathBuf>,
    workers: Option<usize>,
    seed: Option<u64>,
    fine: bool,
) -> anyhow::Result<u8> {
    let mut cfg: SweepConfig = config::load(path)?;
    if let Some(s) = seed {
        cfg.seed0 = s;
    }
    if fine {
        cfg.h = Some(cfg.grid()?.refined().h);
    }
    cfg.validate()?;
    let workers = workers
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1)
        .max(1);
    let res = n_omega_sweep_with_workers(&cfg, workers)?;
    let grid = cfg.grid()?;
    let resolved = json!({ "config": cfg, "grid": grid_json(&grid) });
    let first_iter = cfg.n_iter - cfg.n_keep + 1;
    let mut norms = Table::new(
        "sweep",
        &resolved,
        &["alpha", "seed", "iter_index", "l1_norm"],
    )?;
    for run in &res.runs {
        for (i, &v) in run.norms.iter().enumerate() {
            norms.row(&[
                num(run.alpha),
                run.seed.to_string(),
                (first_iter + i).to_string(),
                num(v),
            ])?;
        }
    }
    let mut table = Table::new("sweep", &resolved, &["alpha", "label", "n_clusters"])?;
    for a in &res.per_alpha {
        table.row(&[num(a.alpha), a.label.to_string(), a.n_clusters.to_string()])?;
    }
    let summary = summary.unwrap_or_else(|| summary_path(out));
    norms.save(out)?;
    table.save(&summary)?;
    for a in &res.per_alpha {
        let skipped = if a.skipped.is_empty() {
            String::new()
        } else {
            format!("  (skipped seeds {:?})", a.skipped)
        };
        println!(
            "alpha {}  {}  {} clusters{skipped}",
            a.alpha, a.label, a.n_clusters
        );
    }
    Ok(0)
}

fn convergence(path: &Path, seed: Option<u64>, fine: bool) -> anyhow::Result<u8> {
    let mut cfg: ConvergenceConfig = config::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let grid = step(&cfg.params, cfg.h, fine)?;
    let model = Model::on_grid(cfg.params, cfg.nonlinearity.clone(), grid)?;
    let phi = model.build_d0_segment(&model.random_g(cfg.seed, &cfg.shape)?)?;
    let r = self_convergence(&model, &phi, cfg.t_end)?;
    println!("steps h = {}, {}, {}", r.steps[0], r.steps[1], r.steps[2]);
    for (name, o) in [
        ("method of steps", r.method_of_steps),
        ("renewal", r.renewal),
    ] {
        println!(
            "{name:<16} diffs {:.3e} {:.3e}  observed order {:.3}",
            o.coarse_diff, o.fine_diff, o.order
        );
    }
    Ok(0)
}
