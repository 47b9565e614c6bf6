use std::fs::{self, File};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use mg_lcb::experiment::{
    fit_loglog_slope, run_sweep, write_sweep_csv, write_timing_csv, Aggregate, PenaltyParams,
    SweepConfig, SweepRecord,
};
use mg_lcb::game_model::{concentrability, duality_gap_parts, solve_nash_exact};
use mg_lcb::hard_instances::{build_hard_instance, default_theta, HardInstanceSpec, Level};
use mg_lcb::io::{self as mio, EmpiricalModelJson, SolveResultJson};
use mg_lcb::matrix_nash::{matrix_nash, PayoffMatrix, DEFAULT_TOL};
use mg_lcb::offline_data::{build_empirical_model, sample_dataset, sidecar_path, Dataset};
use mg_lcb::vi_lcb::{vi_lcb_game, PenaltyConfig, DEFAULT_NASH_TOL};
use mg_lcb::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "mg-lcb",
    version,
    about = "Pessimistic offline learning for zero-sum Markov games"
)]
struct Cli {
    /// Seed for sampling (overrides `master_seed` for sweeps)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON configuration file (sweep config, or penalty constants for solve)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path; a directory for gen-hard, a file otherwise (stdout when omitted)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a hard instance and write game.json, rho.json and d_b.json
    GenHard {
        #[arg(long = "S")]
        s: usize,
        #[arg(long = "A")]
        a: usize,
        #[arg(long = "B")]
        b: usize,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        c_clipped: f64,
        /// Comma-separated p/q levels, one per max-player action
        #[arg(long)]
        theta: Option<String>,
    },
    /// Draw an offline dataset from a game and behavior distribution
    Sample {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        d_b: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Run VI-LCB-Game on a dataset (with its game) or on an empirical model file
    Solve {
        #[arg(long)]
        game: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, conflicts_with_all = ["game", "dataset"])]
        model: Option<PathBuf>,
        #[arg(long)]
        c_b: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_NASH_TOL)]
        nash_tol: f64,
        /// Include both Q tensors in the output
        #[arg(long)]
        include_q: bool,
    },
    /// Duality gap of a policy pair on the true game, plus concentrability when d_b is given
    Eval {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        rho: PathBuf,
        #[arg(long)]
        mu: Option<PathBuf>,
        #[arg(long)]
        nu: Option<PathBuf>,
        /// Read both policies from a solve output
        #[arg(long, conflicts_with_all = ["mu", "nu"])]
        solution: Option<PathBuf>,
        #[arg(long)]
        d_b: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Sample-complexity sweep driven by --config
    Sweep,
    /// Solve a matrix game read as a JSON array of rows on stdin
    MatrixNash {
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Fit log(gap) against log(N) from a sweep CSV
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        median: bool,
    },
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(path) => mio::write_json(path, value),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            serde_json::to_writer_pretty(&mut lock, value)?;
            lock.write_all(b"\n")?;
            Ok(())
        }
    }
}

fn parse_theta(text: &str) -> Result<Vec<Level>> {
    text.split(',').map(str::parse).collect()
}

fn gen_hard(
    out_dir: &Path,
    dims: (usize, usize, usize),
    gamma: f64,
    eps: f64,
    c_clipped: f64,
    theta: Option<&str>,
) -> Result<()> {
    let theta = match theta {
        Some(t) => parse_theta(t)?,
        None => default_theta(dims.1),
    };
    let spec = HardInstanceSpec {
        num_states: dims.0,
        num_max_actions: dims.1,
        num_min_actions: dims.2,
        gamma,
        epsilon: eps,
        c_clipped,
        theta,
    };
    let inst = build_hard_instance(&spec)?;
    fs::create_dir_all(out_dir)?;
    mio::save_game(&out_dir.join("game.json"), &inst.game)?;
    mio::write_json(&out_dir.join("rho.json"), &inst.rho.probs())?;
    mio::write_json(&out_dir.join("d_b.json"), &inst.d_b.probs())?;
    mio::write_json(&out_dir.join("instance.json"), &spec)?;
    emit(
        None,
        &json!({ "p": spec.p(), "q": spec.q(), "dir": out_dir }),
    )
}

fn solve(
    cli: &Cli,
    game: Option<&Path>,
    dataset: Option<&Path>,
    model: Option<&Path>,
    overrides: (Option<f64>, Option<f64>),
    nash_tol: f64,
    include_q: bool,
) -> Result<()> {
    let model = match (model, game, dataset) {
        (Some(m), _, _) => mio::read_json::<EmpiricalModelJson>(m)?.into_model()?,
        (None, Some(g), Some(d)) => build_empirical_model(&Dataset::load(d)?, &mio::load_game(g)?)?,
        _ => {
            return Err(Error::InvalidConfig(
                "solve needs either --model or both --game and --dataset".into(),
            ))
        }
    };
    let mut params = match &cli.config {
        Some(path) => mio::read_json::<PenaltyParams>(path)?,
        None => PenaltyParams::default(),
    };
    if let Some(c) = overrides.0 {
        params.c_b = c;
    }
    if let Some(d) = overrides.1 {
        params.delta = d;
    }
    let cfg = PenaltyConfig::new(params.c_b, params.delta, model.total())?;
    let result = vi_lcb_game(&model, &cfg, nash_tol)?;
    emit(
        cli.out.as_deref(),
        &SolveResultJson::new(&result, include_q),
    )
}

#[allow(clippy::too_many_arguments)]
fn eval(
    out: Option<&Path>,
    game: &Path,
    rho: &Path,
    mu: Option<&Path>,
    nu: Option<&Path>,
    solution: Option<&Path>,
    d_b: Option<&Path>,
    tol: f64,
) -> Result<()> {
    let game = mio::load_game(game)?;
    let rho = mio::load_state_distribution(rho)?;
    let (mu, nu) = match (solution, mu, nu) {
        (Some(path), _, _) => {
            let sol: SolveResultJson = mio::read_json(path)?;
            (sol.mu_hat.into_policy()?, sol.nu_hat.into_policy()?)
        }
        (None, Some(m), Some(n)) => (mio::load_policy(m)?, mio::load_policy(n)?),
        _ => {
            return Err(Error::InvalidConfig(
                "eval needs either --solution or both --mu and --nu".into(),
            ))
        }
    };
    let parts = duality_gap_parts(&game, &mu, &nu, &rho, tol)?;
    let mut report = json!({
        "gap": parts.gap(),
        "v_mu_star": parts.v_mu_star,
        "v_star_nu": parts.v_star_nu,
    });
    if let Some(path) = d_b {
        let d_b = mio::load_behavior(path, game.dims())?;
        let nash = solve_nash_exact(&game, tol)?;
        let c = concentrability(&game, &rho, &d_b, &nash.mu, &nash.nu, false, tol)?;
        let c_clipped = concentrability(&game, &rho, &d_b, &nash.mu, &nash.nu, true, tol)?;
        report["v_star"] = json!(rho.expect(&nash.v_star));
        report["concentrability"] = inf_or_number(c);
        report["concentrability_clipped"] = inf_or_number(c_clipped);
        report["nash_source"] = json!("solve_nash_exact");
    }
    emit(out, &report)
}

fn inf_or_number(x: f64) -> serde_json::Value {
    if x.is_infinite() {
        json!("inf")
    } else {
        json!(x)
    }
}

fn sweep(cli: &Cli) -> Result<()> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("sweep needs --config".into()))?;
    let mut cfg: SweepConfig = mio::read_json(path)?;
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_path = out.clone();
    }
    let records = run_sweep(&cfg)?;
    write_sweep_csv(&records, File::create(&cfg.output_path)?)?;
    mio::write_json(&sidecar_path(&cfg.output_path), &cfg)?;
    let mut timing = cfg.output_path.as_os_str().to_owned();
    timing.push(".timing.csv");
    write_timing_csv(&records, File::create(PathBuf::from(timing))?)?;

    let mut summary = json!({ "records": records.len(), "output": cfg.output_path });
    if let Ok(fit) = fit_loglog_slope(&records, Aggregate::Mean) {
        summary["fit"] = json!(fit);
    }
    emit(None, &summary)
}

fn matrix_nash_cmd(out: Option<&Path>, tol: f64) -> Result<()> {
    let mut text = String::new();
    io::stdin().read_to_string(&mut text)?;
    let rows: Vec<Vec<f64>> = serde_json::from_str(&text)?;
    let m = PayoffMatrix::from_rows(&rows)?;
    emit(out, &matrix_nash(&m, tol)?)
}

fn fit(out: Option<&Path>, input: &Path, median: bool) -> Result<()> {
    let mut reader = csv::Reader::from_path(input)?;
    let records = reader
        .deserialize()
        .collect::<std::result::Result<Vec<SweepRecord>, _>>()?;
    let how = if median {
        Aggregate::Median
    } else {
        Aggregate::Mean
    };
    emit(out, &fit_loglog_slope(&records, how)?)
}

fn run(cli: &Cli) -> Result<()> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::GenHard {
            s,
            a,
            b,
            gamma,
            eps,
            c_clipped,
            theta,
        } => gen_hard(
            out.unwrap_or(Path::new(".")),
            (*s, *a, *b),
            *gamma,
            *eps,
            *c_clipped,
            theta.as_deref(),
        ),
        Command::Sample { game, d_b, n } => {
            let game = mio::load_game(game)?;
            let d_b = mio::load_behavior(d_b, game.dims())?;
            let data = sample_dataset(&game, &d_b, *n, cli.seed.unwrap_or(0))?;
            match out {
                Some(path) => data.save(path),
                None => data.write_csv(io::stdout().lock()),
            }
        }
        Command::Solve {
            game,
            dataset,
            model,
            c_b,
            delta,
            nash_tol,
            include_q,
        } => solve(
            cli,
            game.as_deref(),
            dataset.as_deref(),
            model.as_deref(),
            (*c_b, *delta),
            *nash_tol,
            *include_q,
        ),
        Command::Eval {
            game,
            rho,
            mu,
            nu,
            solution,
            d_b,
            tol,
        } => eval(
            out,
            game,
            rho,
            mu.as_deref(),
            nu.as_deref(),
            solution.as_deref(),
            d_b.as_deref(),
            *tol,
        ),
        Command::Sweep => sweep(cli),
        Command::MatrixNash { tol } => matrix_nash_cmd(out, *tol),
        Command::Fit { input, median } => fit(out, input, *median),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        process::exit(e.exit_code());
    }
}
