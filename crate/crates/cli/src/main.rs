use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use nafd_isac::config::RunConfig;
use nafd_isac::dqn::{train_dqn, DqnReport};
use nafd_isac::experiments::{
    compare_schemes, contour_allocation, run_contour, run_pareto, run_power_sweeps, ContourCell,
    ParetoReport, PerformancePoint, Scenario, SchemeRow, SweepPoint,
};
use nafd_isac::output::{write_csv, Manifest};

/// Cell-free network-assisted full-duplex ISAC simulator.
#[derive(Debug, Parser)]
#[command(name = "nafd-isac", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration value, e.g. `--set scenario.n_antennas=8`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, default_value = "out", global = true)]
    out: PathBuf,

    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score one allocation (equal power allocation by default).
    Evaluate {
        /// Comma-separated power shares, `M_dl·(K_dl+1)` values.
        #[arg(long, value_delimiter = ',')]
        genes: Option<Vec<f64>>,
    },
    /// SPEB/SOEB maps with the target swept over a grid.
    Contour,
    /// Pilot or data power sweeps for several antenna counts.
    Sweep,
    /// NSGA-II front with the EPA (and optionally DQN) reference points.
    Pareto,
    /// Train the Q-learning allocator.
    Dqn,
    /// Proposed scheme against the time-division baselines.
    CompareSchemes,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Evaluate { .. } => "evaluate",
            Command::Contour => "contour",
            Command::Sweep => "sweep",
            Command::Pareto => "pareto",
            Command::Dqn => "dqn",
            Command::CompareSchemes => "compare-schemes",
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    let g = cli.global;
    let mut overrides = g.overrides.clone();
    if let Some(seed) = g.seed {
        overrides.push(format!("seed={seed}"));
    }
    let cfg = RunConfig::load(g.config.as_deref(), &overrides)?;
    if let Some(n) = g.threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    std::fs::create_dir_all(&g.out)
        .with_context(|| format!("creating output directory {}", g.out.display()))?;

    let name = cli.command.name();
    let mut manifest = Manifest::new(name, cfg.seed, cfg.to_toml_string());
    let artifacts = match cli.command {
        Command::Evaluate { genes } => evaluate(&cfg, &g.out, genes)?,
        Command::Contour => contour(&cfg, &g.out)?,
        Command::Sweep => sweep(&cfg, &g.out)?,
        Command::Pareto => pareto(&cfg, &g.out)?,
        Command::Dqn => dqn(&cfg, &g.out)?,
        Command::CompareSchemes => schemes(&cfg, &g.out)?,
    };
    for a in &artifacts {
        manifest.record(&g.out, a)?;
    }
    let manifest_path = g.out.join(format!("{name}-manifest.json"));
    manifest.write(&manifest_path)?;
    let mut all = artifacts;
    all.push(manifest_path);
    Ok(all)
}

fn scenario(cfg: &RunConfig) -> Result<Scenario> {
    Ok(Scenario::new(cfg.layout()?, cfg.scenario_params())?)
}

fn layout_file(cfg: &RunConfig, out: &Path) -> Result<PathBuf> {
    let path = out.join("layout.json");
    cfg.layout()?.save(&path)?;
    Ok(path)
}

fn point_csv(path: PathBuf, sc: &Scenario, points: &[PerformancePoint]) -> Result<PathBuf> {
    let header =
        PerformancePoint::csv_header(sc.k_dl(), sc.layout.k_ul(), sc.m_dl() * (sc.k_dl() + 1));
    Ok(write_csv(
        path,
        &header,
        points.iter().map(PerformancePoint::csv_row),
    )?)
}

fn evaluate(cfg: &RunConfig, out: &Path, genes: Option<Vec<f64>>) -> Result<Vec<PathBuf>> {
    let sc = scenario(cfg)?;
    let point = match genes {
        Some(g) => {
            let expected = sc.m_dl() * (sc.k_dl() + 1);
            if g.len() != expected {
                bail!("--genes needs {expected} values, got {}", g.len());
            }
            sc.evaluate_genes(&g)?
        }
        None => sc.evaluate(&sc.epa_allocation())?,
    };
    log::info!(
        "f1 = {:.4} bit/s/Hz, SPEB = {}, SOEB = {}",
        point.f1,
        point.speb,
        point.soeb
    );
    Ok(vec![
        point_csv(out.join("evaluate.csv"), &sc, &[point])?,
        layout_file(cfg, out)?,
    ])
}

fn contour(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let layout = cfg.layout()?;
    let alloc = contour_allocation(
        layout.m_dl(),
        layout.k_dl(),
        cfg.contour.beta,
        cfg.physics.p_max,
    );
    let params = cfg.scenario_params();
    let cells = run_contour(
        &layout,
        &cfg.contour.grid,
        &alloc,
        &params.radar,
        params.policy.prior_offset,
    )?;
    let masked = cells.iter().filter(|c| c.masked).count();
    log::info!("{} grid cells, {masked} masked", cells.len());
    Ok(vec![
        write_csv(
            out.join("contour.csv"),
            &ContourCell::csv_header(),
            cells.iter().map(ContourCell::csv_row),
        )?,
        layout_file(cfg, out)?,
    ])
}

fn sweep(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let points = run_power_sweeps(
        &cfg.layout()?,
        &cfg.scenario_params(),
        cfg.sweep.variable,
        &cfg.sweep.values,
        &cfg.sweep.antennas,
    )?;
    Ok(vec![write_csv(
        out.join("sweep.csv"),
        &SweepPoint::csv_header(),
        points.iter().map(SweepPoint::csv_row),
    )?])
}

fn pareto(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let base = cfg.layout()?;
    let nsga = cfg.nsga_config();
    let dqn_cfg = cfg.dqn_config();
    let mut paths = Vec::new();
    for &n in &cfg.pareto.antennas {
        let sc = Scenario::new(base.with_antennas(n)?, cfg.scenario_params())?;
        let report = run_pareto(&sc, &nsga, cfg.pareto.with_dqn.then_some(&dqn_cfg))?;
        log::info!(
            "N = {n}: {} front members, hypervolume {:.4e}",
            report.front.members.len(),
            report.front.hypervolume()
        );
        paths.push(write_csv(
            out.join(format!("pareto_n{n}.csv")),
            &ParetoReport::csv_header(sc.m_dl() * (sc.k_dl() + 1)),
            report.csv_rows(),
        )?);
        let hv_header = ["generation", "hypervolume", "best_f1", "best_f2"].map(String::from);
        paths.push(write_csv(
            out.join(format!("pareto_n{n}_generations.csv")),
            &hv_header,
            report
                .front
                .hypervolume_trace
                .iter()
                .zip(&report.front.best_trace)
                .enumerate()
                .map(|(g, (hv, b))| {
                    [
                        g.to_string(),
                        hv.to_string(),
                        b.f1.to_string(),
                        b.f2.to_string(),
                    ]
                }),
        )?);
    }
    Ok(paths)
}

fn dqn(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let sc = scenario(cfg)?;
    let report = train_dqn(&sc, &cfg.dqn_config())?;
    log::info!(
        "best reward {:.4} (start {:.4}, greedy {:.4}), b = {:.4e}",
        report.best_reward,
        report.reset_reward,
        report.greedy_reward,
        report.scale
    );
    let best = sc.evaluate(&sc.decode(&report.best_genes))?;
    let checkpoint = out.join("dqn_qnet.txt");
    report.network.save(&checkpoint)?;
    Ok(vec![
        write_csv(
            out.join("dqn_trace.csv"),
            &DqnReport::trace_csv_header(),
            report.trace_csv_rows(),
        )?,
        point_csv(out.join("dqn_best.csv"), &sc, &[best])?,
        checkpoint,
    ])
}

fn schemes(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let sc = scenario(cfg)?;
    let rows = compare_schemes(&sc, &cfg.schemes.durations, cfg.schemes.block_symbols)?;
    Ok(vec![write_csv(
        out.join("schemes.csv"),
        &SchemeRow::csv_header(),
        rows.iter().map(SchemeRow::csv_row),
    )?])
}
