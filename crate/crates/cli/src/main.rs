use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use hybrid_teleport::protocols::{classical_limit, classical_limit_bruteforce};
use hybrid_teleport_cli::emit::{emit, emit_to_path, format_sig, SIG_DIGITS};
use hybrid_teleport_cli::presets::{preset, run_preset};
use hybrid_teleport_cli::{
    grid_points, run_point, run_sweep, DistillArg, Format, Grid, NormArg, ProtocolArg, ResultRecord,
    SweepConfig,
};

/// Teleportation of single-photon qubits over lossy TMSV channels.
#[derive(Parser)]
#[command(name = "hbsm-sim", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a grid sweep from a TOML config and/or flags.
    Sweep {
        /// TOML document with SweepConfig keys; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        over: Overrides,
    },
    /// Evaluate a single configuration.
    Point {
        #[command(flatten)]
        over: Overrides,
    },
    /// Tabulate the measure-and-prepare limit (3+η)/6 and its quadrature check.
    ClassicalLimit {
        #[arg(long, default_value = "0:1:0.1")]
        eta: Grid,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Regenerate the data behind one figure (fig2, fig2a, fig2b, fig4, fig5, fig6).
    Preset {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long, value_enum)]
        norm_convention: Option<NormArg>,
    },
}

#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long, value_enum)]
    protocol: Option<ProtocolArg>,
    #[arg(long, value_enum)]
    distill: Option<DistillArg>,
    /// Squeezing grid in dB: `1,2,5` or `start:stop:step`.
    #[arg(long = "r-db")]
    r_db: Option<Grid>,
    /// Channel loss grid in dB (both arms, or arm 1 with --loss2-db).
    #[arg(long = "loss-db")]
    loss_db: Option<Grid>,
    #[arg(long = "loss2-db")]
    loss2_db: Option<Grid>,
    /// Detector efficiency grid.
    #[arg(long)]
    eta: Option<Grid>,
    /// Optimize gain / T_s / T_c (`--optimize false` to use fixed values).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    optimize: Option<bool>,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long)]
    ts: Option<f64>,
    #[arg(long)]
    tc: Option<f64>,
    #[arg(long, value_enum)]
    norm_convention: Option<NormArg>,
    #[arg(long)]
    truncation_mass: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Overrides {
    fn apply(self, base: Option<SweepConfig>) -> anyhow::Result<SweepConfig> {
        let mut cfg = match base {
            Some(c) => c,
            None => {
                let (Some(p), Some(r), Some(l)) = (self.protocol, self.r_db.clone(), self.loss_db.clone())
                else {
                    bail!("--protocol, --r-db and --loss-db are required without --config");
                };
                SweepConfig::new(p, DistillArg::None, r.0, l.0)
            }
        };
        if let Some(v) = self.protocol {
            cfg.protocol = v;
        }
        if let Some(v) = self.distill {
            cfg.distill = v;
        }
        if let Some(v) = self.r_db {
            cfg.r_db = v;
        }
        if let Some(v) = self.loss_db {
            cfg.loss_db = v;
        }
        if let Some(v) = self.loss2_db {
            cfg.loss2_db = Some(v);
        }
        if let Some(v) = self.eta {
            cfg.eta = v;
        }
        if let Some(v) = self.optimize {
            cfg.optimize = v;
        }
        if let Some(v) = self.g {
            cfg.g = v;
        }
        if let Some(v) = self.ts {
            cfg.ts = v;
        }
        if let Some(v) = self.tc {
            cfg.tc = v;
        }
        if let Some(v) = self.norm_convention {
            cfg.norm_convention = v;
        }
        if let Some(v) = self.truncation_mass {
            cfg.truncation_mass = v;
        }
        if let Some(v) = self.out {
            cfg.out = Some(v);
        }
        if let Some(v) = self.format {
            cfg.format = v;
        }
        Ok(cfg)
    }
}

fn write_table(rows: &[ResultRecord], format: Format, out: Option<&PathBuf>) -> anyhow::Result<()> {
    match out {
        Some(p) => emit_to_path(rows, format, p),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            emit(rows, format, &mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

/// Reports failed rows on stderr; returns whether every row succeeded.
fn report(rows: &[ResultRecord]) -> bool {
    let failed: Vec<&ResultRecord> = rows.iter().filter(|r| r.error.is_some()).collect();
    for r in &failed {
        eprintln!(
            "error: {} {} r_db={} loss_db={} eta={}: {}",
            r.protocol,
            r.distill,
            r.r_db,
            r.loss_db,
            r.eta,
            r.error.as_deref().unwrap_or_default()
        );
    }
    if !failed.is_empty() {
        eprintln!("{} of {} points failed", failed.len(), rows.len());
    }
    failed.is_empty()
}

fn classical_table(eta: &Grid, format: Format, out: Option<&PathBuf>) -> anyhow::Result<()> {
    let mut rows = Vec::with_capacity(eta.0.len());
    for &e in &eta.0 {
        let brute = classical_limit_bruteforce(e).with_context(|| format!("eta = {e}"))?;
        rows.push((e, classical_limit(e), brute));
    }
    let mut sink: Box<dyn Write> = match out {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    };
    let f = |x: f64| format_sig(x, SIG_DIGITS);
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut sink);
            w.write_record(["eta", "classical_limit", "classical_limit_bruteforce"])?;
            for (e, c, b) in &rows {
                w.write_record([f(*e), f(*c), f(*b)])?;
            }
            w.flush()?;
        }
        Format::Json => {
            let v: Vec<serde_json::Value> = rows
                .iter()
                .map(|(e, c, b)| {
                    serde_json::json!({
                        "eta": f(*e).parse::<f64>().unwrap(),
                        "classical_limit": f(*c).parse::<f64>().unwrap(),
                        "classical_limit_bruteforce": f(*b).parse::<f64>().unwrap(),
                    })
                })
                .collect();
            serde_json::to_writer_pretty(&mut sink, &v)?;
            sink.write_all(b"\n")?;
        }
    }
    sink.flush()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.cmd {
        Cmd::Sweep { config, over } => {
            let base = config.as_deref().map(SweepConfig::from_file).transpose()?;
            let cfg = over.apply(base)?;
            let rows = run_sweep(&cfg)?;
            write_table(&rows, cfg.format, cfg.out.as_ref())?;
            Ok(report(&rows))
        }
        Cmd::Point { over } => {
            let cfg = over.apply(None)?;
            cfg.validate()?;
            if cfg.num_points() != 1 {
                bail!(
                    "point takes a single value per grid flag, got {} points",
                    cfg.num_points()
                );
            }
            let rows = vec![run_point(&cfg, &grid_points(&cfg)[0])];
            write_table(&rows, cfg.format, cfg.out.as_ref())?;
            Ok(report(&rows))
        }
        Cmd::ClassicalLimit { eta, out, format } => {
            classical_table(&eta, format, out.as_ref())?;
            Ok(true)
        }
        Cmd::Preset {
            name,
            out,
            format,
            norm_convention,
        } => {
            let mut sweeps = preset(&name)?;
            if let Some(n) = norm_convention {
                for s in &mut sweeps {
                    s.norm_convention = n;
                }
            }
            let rows = run_preset(&sweeps)?;
            write_table(&rows, format.unwrap_or_default(), out.as_ref())?;
            Ok(report(&rows))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
