use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qkd_bias::config::{DistanceGrid, RunConfig, PRESETS};
use qkd_bias::io::{csv_fields, parse_constraints, parse_keymap, CSV_HEADER};
use qkd_bias::modes::{b_coeff, mode_matrix, mpub_bias_angle, ModeFamily, ModeIndex};
use qkd_bias::optimizer::minimize;
use qkd_bias::scan::scan_distance;
use qkd_bias::{Error, Method, OptimizerOptions, SolveStatus};

/// Asymptotic key rates for QKD with imperfect encodings.
#[derive(Parser)]
#[command(name = "qkd-bias", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Key rate versus distance, written as CSV.
    Scan(ScanArgs),
    /// Certified lower bound on H(Z_A|E) for a constraint file and key map.
    Optimize(OptimizeArgs),
    /// Mode-conversion matrices, b(n,m,k) table and MPUB bias angle.
    Modes {
        #[arg(long, default_value_t = 3)]
        order: u32,
    },
    /// List presets, or print one as a config file.
    Presets {
        #[arg(long, value_name = "NAME")]
        show: Option<String>,
    },
}

#[derive(Args)]
struct ScanArgs {
    /// Preset name; see `presets`.
    #[arg(long, conflicts_with = "config")]
    protocol: Option<String>,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Phase-modulation flaw in radians (bb84-flaw).
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Bias angle θ_b in radians, overriding the derived value.
    #[arg(long, allow_hyphen_values = true)]
    theta_b: Option<f64>,
    /// Mode order N (rfi-mpub).
    #[arg(long)]
    order: Option<u32>,
    /// Per-party dimension (bb84-ideal, bb84-misaligned).
    #[arg(long)]
    dim: Option<usize>,
    /// our-method, gllp or both.
    #[arg(long)]
    method: Option<Method>,
    /// Distance grid in km as start:stop:step.
    #[arg(long)]
    distances: Option<String>,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the optimizer's random restarts.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Constraint file (TOML).
    constraints: PathBuf,
    /// Key-map file (TOML).
    keymap: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible { .. } => 3,
            Error::Validation(_)
            | Error::InvalidParameter(_)
            | Error::Parse { .. }
            | Error::DimensionMismatch { .. }
            | Error::Io(_) => 2,
            Error::NoYield { .. } => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))
}

fn io_failure(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 1,
        message: e.to_string(),
    }
}

fn build_config(args: &ScanArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match (&args.config, &args.protocol) {
        (Some(path), _) => RunConfig::from_toml(&read(path)?)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => return Err(config_error("either --protocol or --config is required")),
    };
    let p = cfg.protocol.clone();
    let only = |flag: &str, allowed: &[&str]| {
        if allowed.contains(&p.as_str()) {
            Ok(())
        } else {
            Err(config_error(format!("--{flag} does not apply to {p}")))
        }
    };
    if let Some(d) = args.delta {
        only("delta", &["bb84-flaw"])?;
        cfg.bias.delta = Some(d);
    }
    if let Some(t) = args.theta_b {
        only("theta-b", &["bb84-flaw", "rfi-mpub"])?;
        cfg.bias.theta_b = Some(t);
    }
    if let Some(n) = args.order {
        only("order", &["rfi-mpub"])?;
        cfg.bias.order = Some(n);
    }
    if let Some(d) = args.dim {
        only("dim", &["bb84-ideal", "bb84-misaligned"])?;
        cfg = cfg.with_dim(d);
    }
    if let Some(m) = args.method {
        cfg.method = m;
    }
    if let Some(g) = &args.distances {
        cfg.grid = DistanceGrid::parse(g)?;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(out) = &args.out {
        cfg.output.path = Some(out.display().to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn scan(args: &ScanArgs) -> Result<(), Failure> {
    let cfg = build_config(args)?;
    if let Some(j) = args.jobs {
        if j == 0 {
            return Err(config_error("--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(io_failure)?;
    }
    let spec = cfg.protocol_spec()?;
    let channel = cfg.channel_model()?;
    let curve = scan_distance(
        &spec,
        channel.as_ref(),
        &cfg.grid.points(),
        cfg.method,
        &cfg.optimizer_options(),
    )?;

    let sink: Box<dyn Write> = match &cfg.output.path {
        Some(path) => Box::new(fs::File::create(path).map_err(|e| io_failure(format!("{path}: {e}")))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(CSV_HEADER).map_err(io_failure)?;
    for p in &curve.points {
        w.write_record(csv_fields(p)).map_err(io_failure)?;
    }
    w.flush().map_err(io_failure)?;
    Ok(())
}

fn optimize(args: &OptimizeArgs) -> Result<(), Failure> {
    let set = parse_constraints(&read(&args.constraints)?)?;
    let keymap = parse_keymap(&read(&args.keymap)?)?;
    let options = OptimizerOptions {
        seed: args.seed,
        ..Default::default()
    };
    let r = minimize(&set.constraints, &keymap, set.dim, &options)?;
    let status = match r.status {
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIter => "max_iter",
    };
    println!("h_lower     {:.6}", r.h_lower);
    println!("primal      {:.6}", r.primal_value);
    println!("gap         {:.3e}", r.gap);
    println!("iterations  {}", r.iterations);
    println!("status      {status}");
    if r.status == SolveStatus::MaxIter {
        return Err(Failure {
            code: 1,
            message: "optimizer did not converge".into(),
        });
    }
    Ok(())
}

fn fmt_complex(re: f64, im: f64) -> String {
    let clean = |x: f64| if x.abs() < 5e-16 { 0.0 } else { x };
    format!("{:+.6}{:+.6}i", clean(re), clean(im))
}

fn modes(order: u32) -> Result<(), Failure> {
    if order > 12 {
        return Err(config_error(format!("order {order} is too large to print (max 12)")));
    }
    let rows: Vec<ModeIndex> = ModeIndex::enumerate(order).collect();
    for family in [ModeFamily::RotatedHermiteGauss, ModeFamily::LaguerreGauss] {
        let u = mode_matrix(family, order);
        println!("U_{} ({}), rows (n,m):", u.q(), family.label());
        for (r, idx) in rows.iter().enumerate() {
            let entries: Vec<String> = (0..u.dim())
                .map(|c| fmt_complex(u.matrix()[(r, c)].re, u.matrix()[(r, c)].im))
                .collect();
            println!("  ({},{})  {}", idx.n, idx.m, entries.join("  "));
        }
        println!();
    }
    println!("b(n,m,k), columns k = 0..{order}:");
    for idx in &rows {
        let bs = (0..=order)
            .map(|k| b_coeff(idx.n, idx.m, k).map(|b| format!("{b:+.6}")))
            .collect::<Result<Vec<_>, _>>()?;
        println!("  ({},{})  {}", idx.n, idx.m, bs.join("  "));
    }
    println!();
    println!("mpub bias angle: {:.4} deg", mpub_bias_angle(order)?.to_degrees());
    Ok(())
}

fn presets(show: Option<&str>) -> Result<(), Failure> {
    match show {
        Some(name) => print!("{}", RunConfig::preset(name)?.to_toml()?),
        None => {
            for name in PRESETS {
                let cfg = RunConfig::preset(name)?;
                println!(
                    "{name:<16} d={}  method {}  distances {}:{}:{} km",
                    cfg.protocol_spec()?.dim,
                    cfg.method,
                    cfg.grid.start,
                    cfg.grid.stop,
                    cfg.grid.step
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Scan(a) => scan(a),
        Command::Optimize(a) => optimize(a),
        Command::Modes { order } => modes(*order),
        Command::Presets { show } => presets(show.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
