use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use shearflow::analysis::{
    diffusivity_table, fit_exponent, load_field, report, run_experiment, simulate_to_dir, write_csv_rows,
    ExperimentConfig, FitWindow,
};
use shearflow::profiles::validate_hypotheses;
use shearflow::simulator::with_threads;
use shearflow::spectral::{mc_mixing_estimate, mixing_functional, MixingProblem};
use shearflow::trig::TrigPoly;

/// Tracer transport in multiscale shear flows.
#[derive(Parser)]
#[command(name = "shearflow", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Field spec or experiment config (TOML or JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (or file for single-table commands).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the simulation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a field against the growth hypotheses.
    Validate,
    /// Exact variance, d22 and brackets per truncation level.
    Diffusivity,
    /// Monte Carlo MSD; writes msd.csv and manifest.json.
    Simulate,
    /// Exact mixing functional and its bound.
    Mixing(MixingArgs),
    /// Exponent estimates from an msd.csv table.
    Exponent(ExponentArgs),
    /// Summary of a finished run directory.
    Report {
        /// Run directory (defaults to --out).
        run_dir: Option<PathBuf>,
    },
    /// Full experiment into a timestamped directory under --out.
    Run,
}

#[derive(Args)]
struct MixingArgs {
    /// File with `cos`/`sin` coefficient lists for the fast function.
    #[arg(long)]
    f: PathBuf,
    /// File with `cos`/`sin` coefficient lists for the test function.
    #[arg(long)]
    g: PathBuf,
    #[arg(long)]
    r: f64,
    #[arg(long)]
    t: f64,
    /// Period of both functions.
    #[arg(long = "period", default_value_t = 1.0)]
    period: f64,
    /// Also estimate by Monte Carlo with this many paths.
    #[arg(long)]
    mc: Option<usize>,
    /// Time steps per Monte Carlo path.
    #[arg(long, default_value_t = 4096)]
    mc_steps: usize,
}

#[derive(Args)]
struct ExponentArgs {
    /// msd.csv to fit (defaults to <out>/msd.csv).
    input: Option<PathBuf>,
    /// Fit window as a time factor.
    #[arg(long, conflicts_with = "window_count")]
    window_factor: Option<f64>,
    /// Fit window as a number of checkpoints.
    #[arg(long, default_value_t = 4)]
    window_count: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolySpec {
    #[serde(default)]
    constant: f64,
    #[serde(default)]
    cos: Vec<f64>,
    #[serde(default)]
    sin: Vec<f64>,
}

fn load_poly(path: &Path) -> Result<TrigPoly> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec: PolySpec = if text.trim_start().starts_with('{') {
        serde_json::from_str(&text)?
    } else {
        toml::from_str(&text)?
    };
    Ok(TrigPoly::new(spec.constant, &spec.cos, &spec.sin))
}

fn need_config(g: &Global) -> Result<&Path> {
    match &g.config {
        Some(p) => Ok(p),
        None => bail!("--config is required"),
    }
}

fn load_experiment(g: &Global) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::load(need_config(g)?)?;
    if let Some(s) = g.seed {
        c.simulation.seed = s;
    }
    Ok(c)
}

/// Writes to `out` when given, else stdout.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn table_target(out: Option<&Path>, name: &str) -> Result<Option<PathBuf>> {
    Ok(match out {
        Some(p) if p.is_dir() || p.extension().is_none() => {
            std::fs::create_dir_all(p)?;
            Some(p.join(name))
        }
        Some(p) => Some(p.to_path_buf()),
        None => None,
    })
}

fn run(cli: Cli) -> Result<u8> {
    let g = &cli.global;
    match cli.command {
        Command::Validate => {
            let field = load_field(need_config(g)?)?;
            let rep = validate_hypotheses(&field);
            println!("{}", serde_json::to_string_pretty(&rep)?);
        }
        Command::Diffusivity => {
            let field = load_field(need_config(g)?)?;
            let mut buf = Vec::new();
            write_csv_rows(&diffusivity_table(&field)?, &mut buf)?;
            let target = table_target(g.out.as_deref(), "diffusivity.csv")?;
            emit(target.as_deref(), std::str::from_utf8(&buf)?)?;
        }
        Command::Simulate => {
            let c = load_experiment(g)?;
            let Some(out) = &g.out else { bail!("--out is required") };
            let stats = simulate_to_dir(&c, out, g.threads)?;
            eprintln!("wrote {} checkpoints to {}", stats.rows.len(), out.join("msd.csv").display());
        }
        Command::Mixing(a) => {
            let problem = MixingProblem::new(load_poly(&a.f)?, load_poly(&a.g)?, a.r, a.t, a.period)?;
            let res = mixing_functional(&problem);
            let (mc, se) = match a.mc {
                Some(n) => {
                    let seed = g.seed.unwrap_or(0);
                    let e = with_threads(g.threads, || mc_mixing_estimate(&problem, n, a.mc_steps, seed))??;
                    (e.estimate.to_string(), e.stderr.to_string())
                }
                None => (String::new(), String::new()),
            };
            let ratio = if res.bound > 0.0 { res.value.abs() / res.bound } else { 0.0 };
            let text = format!(
                "value,bound,ratio,mc_estimate,mc_stderr\n{},{},{},{},{}\n",
                res.value, res.bound, ratio, mc, se
            );
            let target = table_target(g.out.as_deref(), "mixing.csv")?;
            emit(target.as_deref(), &text)?;
        }
        Command::Exponent(a) => {
            let input = match (&a.input, &g.out) {
                (Some(p), _) => p.clone(),
                (None, Some(o)) => o.join("msd.csv"),
                (None, None) => bail!("give an msd.csv path"),
            };
            let mut rd = csv::Reader::from_path(&input).with_context(|| format!("reading {}", input.display()))?;
            let mut t = Vec::new();
            let mut m = Vec::new();
            let mut s = Vec::new();
            for rec in rd.deserialize::<MsdRecord>() {
                let r = rec?;
                t.push(r.t);
                m.push(r.msd);
                s.push(r.stderr);
            }
            let w = a.window_factor.map_or(FitWindow::Count(a.window_count), FitWindow::TimeFactor);
            let rows = fit_exponent(&t, &m, &s, w)?;
            let mut buf = Vec::new();
            write_csv_rows(&rows, &mut buf)?;
            std::io::stdout().write_all(&buf)?;
        }
        Command::Report { run_dir } => {
            let dir = match (run_dir, &g.out) {
                (Some(d), _) => d,
                (None, Some(o)) => o.clone(),
                (None, None) => bail!("give a run directory"),
            };
            print!("{}", report(&dir)?);
        }
        Command::Run => {
            let c = load_experiment(g)?;
            let out = g.out.clone().unwrap_or_else(|| PathBuf::from("runs"));
            let rec = run_experiment(&c, &out, g.threads)?;
            print!("{}", std::fs::read_to_string(rec.run_dir.join("report.txt"))?);
            println!("run directory: {}", rec.run_dir.display());
            return Ok(rec.exit_code() as u8);
        }
    }
    Ok(0)
}

#[derive(Deserialize)]
struct MsdRecord {
    t: f64,
    msd: f64,
    stderr: f64,
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which is reserved for FAIL verdicts
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
