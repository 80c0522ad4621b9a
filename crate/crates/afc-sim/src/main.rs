//! Command-line front end: bind scenario configs to burns, echo runs,
//! sweeps, the propagation oracle and quick SVG plots.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use clap::{Parser, Subcommand};

use afc_sim::analysis::{
    echo_through, run_burn, run_scenario, run_sweep_detailed, rows_to_csv, rows_to_json,
    SweepOutputs, SweepSpec, SweepVariable,
};
use afc_sim::config::{ScenarioConfig, CONFIG_KEY_DOCS, PRESETS};
use afc_sim::echo::{
    propagate_spectrum, pulse_spectrum, sample_atoms_from_profile, sum_over_atoms_oracle,
    transfer_from_od, EchoTrace, TransferFunction,
};
use afc_sim::error::{Error, Result};
use afc_sim::io;
use afc_sim::plot::{line_plot_svg, Series};
use afc_sim::spectral::OpticalDepthProfile;

const ORACLE_MIN_CORRELATION: f64 = 0.99;

fn key_help() -> &'static str {
    static HELP: OnceLock<String> = OnceLock::new();
    HELP.get_or_init(|| {
        let mut s = String::from("Config keys (TOML, one [section] per dotted prefix):\n");
        for (key, doc) in CONFIG_KEY_DOCS {
            s.push_str(&format!("  {key:32} {doc}\n"));
        }
        s.push_str("\nShipped presets (use as --config): ");
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        s.push_str(&names.join(", "));
        s
    })
}

#[derive(Parser)]
#[command(
    name = "afc-sim",
    version,
    about = "Atomic-frequency-comb optical memory simulator: hole burning, echo propagation, sweeps",
    after_help = key_help()
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Scenario (or sweep) TOML path, or a shipped preset name
    #[arg(long, global = true)]
    config: Option<String>,

    /// Override the jitter base seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output prefix (burn/echo/oracle) or directory (sweep, plot)
    #[arg(long, global = true, default_value = "out")]
    out: String,

    /// Sweep worker count (capped by the AFC_SIM_THREADS env var)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Suppress progress and summary output
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Burn the comb; write <out>_comb.csv (OD) and <out>_pops.csv (populations)
    #[command(after_help = key_help())]
    Burn,
    /// Run the echo sequence; write <out>_trace.csv and <out>_metrics.json
    #[command(after_help = key_help())]
    Echo {
        /// Propagate through a stored OD profile CSV instead of burning
        #[arg(long)]
        comb: Option<PathBuf>,
    },
    /// Run a parameter sweep from a sweep TOML; write <out>/sweep.csv and sweep.json
    #[command(after_help = key_help())]
    Sweep,
    /// Cross-check FFT propagation against the sum-over-atoms model on the burned comb
    #[command(after_help = key_help())]
    Oracle {
        /// Number of atoms in the brute-force sum (>= 2)
        #[arg(long, default_value_t = 2000)]
        atoms: usize,
    },
    /// Render columns of a CSV artifact as an SVG line plot
    #[command(after_help = key_help())]
    Plot {
        /// CSV file to plot
        #[arg(long)]
        input: PathBuf,
        /// x column name (default: first column)
        #[arg(long)]
        x: Option<String>,
        /// Comma-separated y column names (default: every other numeric column)
        #[arg(long)]
        y: Option<String>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Cmd::Burn => cmd_burn(cli),
        Cmd::Echo { comb } => cmd_echo(cli, comb.as_deref()),
        Cmd::Sweep => cmd_sweep(cli),
        Cmd::Oracle { atoms } => cmd_oracle(cli, *atoms),
        Cmd::Plot { input, x, y } => cmd_plot(cli, input, x.as_deref(), y.as_deref()),
    }
}

fn load_scenario(cli: &Cli) -> Result<ScenarioConfig> {
    let name = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config <path or preset> is required".into()))?;
    let mut cfg = if PRESETS.iter().any(|(n, _)| *n == name) {
        ScenarioConfig::preset(name)?
    } else {
        ScenarioConfig::from_path(Path::new(name))?
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    let v = cfg.validate()?;
    if v.scheme_row_deviation > 0.05 && !cli.quiet {
        eprintln!(
            "warning: strength matrix rows deviate from 1 by up to {:.1}%; renormalized",
            v.scheme_row_deviation * 100.0
        );
    }
    Ok(cfg)
}

fn cmd_burn(cli: &Cli) -> Result<()> {
    let cfg = load_scenario(cli)?;
    let out = run_burn(&cfg)?;
    let comb_path = PathBuf::from(format!("{}_comb.csv", cli.out));
    let pops_path = PathBuf::from(format!("{}_pops.csv", cli.out));
    io::write_od_csv(&comb_path, &out.profile)?;
    io::write_populations_csv(&pops_path, &out.field)?;
    if !cli.quiet {
        println!(
            "wrote {} ({} points, max OD {:.3}) and {} ({} classes)",
            comb_path.display(),
            out.profile.od.len(),
            out.profile.max_od(),
            pops_path.display(),
            out.field.pops.len(),
        );
    }
    Ok(())
}

fn cmd_echo(cli: &Cli, comb: Option<&Path>) -> Result<()> {
    let cfg = load_scenario(cli)?;
    let (trace, metrics) = match comb {
        Some(path) => {
            let profile = io::read_od_csv(path)?;
            echo_through(&cfg, &profile)?
        }
        None => {
            let out = run_scenario(&cfg)?;
            (out.trace, out.metrics)
        }
    };
    let trace_path = PathBuf::from(format!("{}_trace.csv", cli.out));
    let metrics_path = PathBuf::from(format!("{}_metrics.json", cli.out));
    io::write_trace_csv(&trace_path, &trace)?;
    io::write_metrics_json(&metrics_path, &metrics)?;
    if !cli.quiet {
        println!(
            "wrote {} and {} (eta1 {:.4}, eta_total {:.4}, {} visible echoes)",
            trace_path.display(),
            metrics_path.display(),
            metrics.eta_per_echo.first().copied().unwrap_or(0.0),
            metrics.eta_total,
            metrics.n_visible,
        );
    }
    Ok(())
}

/// Sweep description file: a `[sweep]` header plus either an inline
/// `[scenario.*]` config or a `base_preset` name.
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    sweep: SweepHeader,
    scenario: Option<ScenarioConfig>,
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepHeader {
    variable: SweepVariable,
    values: Vec<f64>,
    base_preset: Option<String>,
    #[serde(default)]
    outputs: SweepOutputs,
}

fn load_sweep(cli: &Cli) -> Result<SweepSpec> {
    let name = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config <sweep.toml> is required".into()))?;
    let text = std::fs::read_to_string(name)
        .map_err(|source| Error::Io { path: name.into(), source })?;
    let file: SweepFile =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{name}: {e}")))?;
    let mut base = match (file.scenario, &file.sweep.base_preset) {
        (Some(cfg), None) => cfg,
        (None, Some(preset)) => ScenarioConfig::preset(preset)?,
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "sweep: give either [scenario] or base_preset, not both".into(),
            ))
        }
        (None, None) => {
            return Err(Error::Config("sweep: need a [scenario] section or base_preset".into()))
        }
    };
    if let Some(seed) = cli.seed {
        base = base.with_seed(seed);
    }
    Ok(SweepSpec {
        variable: file.sweep.variable,
        values: file.sweep.values,
        base,
        outputs: file.sweep.outputs,
    })
}

fn resolve_jobs(cli: &Cli) -> usize {
    let requested = cli.jobs.unwrap_or(1).max(1);
    match std::env::var("AFC_SIM_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        Some(cap) if cap >= 1 => requested.min(cap),
        _ => requested,
    }
}

fn cmd_sweep(cli: &Cli) -> Result<()> {
    let spec = load_sweep(cli)?;
    let jobs = resolve_jobs(cli);
    let (rows, outcomes) = run_sweep_detailed(&spec, jobs)?;

    let dir = PathBuf::from(&cli.out);
    io::write_text(&dir.join("sweep.csv"), &rows_to_csv(&rows))?;
    io::write_text(&dir.join("sweep.json"), &rows_to_json(&rows))?;
    for (i, outcome) in outcomes.iter().enumerate() {
        let Some(out) = outcome else { continue };
        if spec.outputs.spectra {
            io::write_od_csv(&dir.join(format!("row_{i:03}_comb.csv")), &out.profile)?;
        }
        if spec.outputs.traces {
            io::write_trace_csv(&dir.join(format!("row_{i:03}_trace.csv")), &out.trace)?;
        }
        if spec.outputs.metrics {
            io::write_metrics_json(&dir.join(format!("row_{i:03}_metrics.json")), &out.metrics)?;
        }
    }

    let n_ok = rows.iter().filter(|r| r.is_ok()).count();
    if !cli.quiet {
        for r in &rows {
            match (r.contrast, r.eta_total) {
                (Some(c), Some(e)) => {
                    println!("value {:>12.6e}  contrast {c:.4}  eta_total {e:.4}", r.value)
                }
                _ => println!("value {:>12.6e}  FAILED: {}", r.value, r.status),
            }
        }
        println!("wrote {} ({n_ok}/{} rows ok)", dir.join("sweep.csv").display(), rows.len());
    }
    if n_ok == 0 {
        return Err(Error::SweepAllFailed {
            n: rows.len(),
            first: rows.first().map(|r| r.status.clone()).unwrap_or_default(),
        });
    }
    Ok(())
}

fn cmd_oracle(cli: &Cli, n_atoms: usize) -> Result<()> {
    if n_atoms < 2 {
        return Err(Error::Config(format!(
            "--atoms {n_atoms} is below the minimum of 2 for a meaningful comparison"
        )));
    }
    let cfg = load_scenario(cli)?;
    let v = cfg.validate()?;
    let burned = run_burn(&cfg)?;

    if burned.profile.max_od() <= 0.0 {
        if !cli.quiet {
            println!("oracle: optical depth is zero everywhere; both paths carry no echoes");
        }
        return Ok(());
    }

    // Born regime: rescale the profile so single-scattering dominates and
    // the two paths describe the same physics.
    let scale = 0.1 / burned.profile.max_od();
    let born = OpticalDepthProfile::new(
        burned.profile.grid.clone(),
        burned.profile.od.iter().map(|d| d * scale).collect(),
    )?;

    let tf = transfer_from_od(&born)?;
    let spec = pulse_spectrum(&v.pulse, &tf.grid)?;
    let scattered = TransferFunction {
        grid: tf.grid.clone(),
        values: tf.values.iter().map(|h| h - 1.0).collect(),
    };
    let trace = propagate_spectrum(&spec, &scattered)?;

    let tau = 1.0 / v.comb.rep_rate_hz();
    let (times, fft_env) = envelope_window(&trace, 0.0, 8.0 * tau);
    let atoms = sample_atoms_from_profile(&born, n_atoms)?;
    let atom_env = sum_over_atoms_oracle(&atoms, &v.pulse, &times)?;

    let fft_norm = normalize_peak(&fft_env);
    let correlation = pearson(&fft_norm, &atom_env);

    let first_echo = |env: &[f64]| -> f64 {
        let mut best = (0usize, 0.0f64);
        for (i, &t) in times.iter().enumerate() {
            if t >= 0.5 * tau && t <= 1.5 * tau && env[i] > best.1 {
                best = (i, env[i]);
            }
        }
        times[best.0]
    };
    let t_fft = first_echo(&fft_norm);
    let t_atoms = first_echo(&atom_env);
    let peak_dev_steps = (t_fft - t_atoms).abs() / trace.dt_s;

    if !cli.quiet {
        println!(
            "oracle: atoms={n_atoms} correlation={correlation:.6} \
             fft_first_echo_s={t_fft:.6e} atoms_first_echo_s={t_atoms:.6e} \
             peak_deviation_steps={peak_dev_steps:.2}"
        );
    }
    if correlation < ORACLE_MIN_CORRELATION {
        return Err(Error::OracleFailed {
            correlation,
            required: ORACLE_MIN_CORRELATION,
            peak_dev_steps,
        });
    }
    Ok(())
}

fn envelope_window(trace: &EchoTrace, t0: f64, t1: f64) -> (Vec<f64>, Vec<f64>) {
    let mut times = Vec::new();
    let mut env = Vec::new();
    for (i, &v) in trace.intensity.iter().enumerate() {
        let t = trace.time(i);
        if t >= t0 && t <= t1 {
            times.push(t);
            env.push(v);
        }
    }
    (times, env)
}

fn normalize_peak(v: &[f64]) -> Vec<f64> {
    let peak = v.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        v.iter().map(|x| x / peak).collect()
    } else {
        v.to_vec()
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

fn cmd_plot(cli: &Cli, input: &Path, x_col: Option<&str>, y_cols: Option<&str>) -> Result<()> {
    let text = std::fs::read_to_string(input)
        .map_err(|source| Error::Io { path: input.display().to_string(), source })?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::CsvParse {
            path: input.display().to_string(),
            line: 1,
            reason: "empty file".into(),
        })?
        .split(',')
        .map(str::trim)
        .collect();

    let col_index = |name: &str| -> Result<usize> {
        header.iter().position(|h| *h == name).ok_or_else(|| {
            Error::Config(format!("column {name:?} not in header {header:?}"))
        })
    };
    let xi = match x_col {
        Some(name) => col_index(name)?,
        None => 0,
    };
    let yis: Vec<usize> = match y_cols {
        Some(list) => list.split(',').map(|c| col_index(c.trim())).collect::<Result<_>>()?,
        None => (0..header.len()).filter(|&i| i != xi).collect(),
    };
    if yis.is_empty() {
        return Err(Error::Config("no y columns to plot".into()));
    }

    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::new(); header.len()];
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        for (i, field) in line.split(',').enumerate() {
            if i < columns.len() {
                columns[i].push(field.trim().parse::<f64>().ok());
            }
        }
    }

    let mut series_data: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for &yi in &yis {
        let pts: Vec<(f64, f64)> = columns[xi]
            .iter()
            .zip(columns[yi].iter())
            .filter_map(|(x, y)| match (x, y) {
                (Some(x), Some(y)) => Some((*x, *y)),
                _ => None,
            })
            .collect();
        if !pts.is_empty() {
            series_data.push((header[yi].to_string(), pts));
        }
    }
    let series: Vec<Series<'_>> = series_data
        .iter()
        .map(|(label, points)| Series { label, points })
        .collect();
    let svg = line_plot_svg(
        &input.file_name().map(|s| s.to_string_lossy().to_string()).unwrap_or_default(),
        header[xi],
        "value",
        &series,
    )?;

    let out = if cli.out.ends_with(".svg") {
        PathBuf::from(&cli.out)
    } else {
        PathBuf::from(format!("{}.svg", cli.out))
    };
    io::write_text(&out, &svg)?;
    if !cli.quiet {
        println!("wrote {}", out.display());
    }
    Ok(())
}
