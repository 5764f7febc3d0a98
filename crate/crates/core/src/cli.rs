//! Command-line driver.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid input (scenario or map file),
//! 3 computation or output failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::coverage::{compute_map, PathLossMap, RisMode};
use crate::metrics::{self, MetricsError};
use crate::raster::{self, ColorScale};
use crate::scenario::{load_scenario, Scenario, ScenarioError};

#[derive(Debug, Parser)]
#[command(
    name = "ris-coverage",
    version,
    about = "Urban 5G path-loss maps with and without RIS panels"
)]
pub struct Cli {
    /// Worker threads for map computation (default: all cores).
    #[arg(long, global = true, env = "RIS_COVERAGE_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    WithRis,
    WithoutRis,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute one path-loss map (values CSV + winner CSV + manifest).
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Panel height offset in meters (with-ris only).
        #[arg(long, allow_negative_numbers = true)]
        offset: Option<f64>,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean path-loss gain between a baseline and a with-RIS map.
    Metrics {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        with_ris: PathBuf,
        /// Full-precision JSON result.
        #[arg(long)]
        out: PathBuf,
    },
    /// Height sweep: report JSON plus a text table.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated offsets in meters, strictly increasing.
        #[arg(long, allow_hyphen_values = true)]
        offsets: String,
        #[arg(long)]
        report: PathBuf,
    },
    /// Render a map CSV to a binary PPM image.
    Render {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = raster::DEFAULT_MIN_DB, allow_negative_numbers = true)]
        min: f64,
        #[arg(long, default_value_t = raster::DEFAULT_MAX_DB, allow_negative_numbers = true)]
        max: f64,
    },
    /// Load and validate a scenario file.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Compute(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Compute(m) => m,
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn compute_err(e: impl std::fmt::Display) -> CliError {
    CliError::Compute(e.to_string())
}

/// Provenance record written next to every artifact.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub scenario_fingerprint: String,
    pub tool_version: String,
    pub timestamp: String,
    pub outputs: Vec<String>,
}

/// `dir/name.ext` → `dir/name.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Compute(format!("cannot write {}: {e}", path.display())))
}

fn write_manifest(anchor: &Path, argv: &[String], fingerprint: &str, outputs: &[&Path]) -> Result<(), CliError> {
    let manifest = RunManifest {
        command_line: argv.to_vec(),
        scenario_fingerprint: fingerprint.to_owned(),
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        timestamp: chrono::Utc::now().to_rfc3339(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_file(&sibling(anchor, "manifest.json"), text)
}

fn load(path: &Path) -> Result<Scenario, CliError> {
    load_scenario(path).map_err(|e| match e {
        ScenarioError::Io { .. } | ScenarioError::Parse { .. } | ScenarioError::Validation { .. } => {
            CliError::Input(format!("{}: {e}", path.display()))
        }
        ScenarioError::Domain { .. } => CliError::Compute(e.to_string()),
    })
}

/// Parses `"0,5,10"`; offsets must be strictly increasing.
pub fn parse_offsets(text: &str) -> Result<Vec<f64>, CliError> {
    let offsets = text
        .split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Usage(format!("bad offset {t:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if offsets.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CliError::Usage("offsets must be strictly increasing".into()));
    }
    Ok(offsets)
}

fn cmd_run(argv: &[String], scenario: &Path, offset: Option<f64>, mode: ModeArg, out: &Path) -> Result<(), CliError> {
    let s = load(scenario)?;
    let (s, mode) = match mode {
        ModeArg::WithRis => {
            let s = s.apply_ris_offset(offset.unwrap_or(0.0)).map_err(compute_err)?;
            (s, RisMode::WithRis)
        }
        ModeArg::WithoutRis => {
            if offset.is_some() {
                eprintln!("warning: --offset has no effect with --mode without-ris");
            }
            (s, RisMode::WithoutRis)
        }
    };
    let map = compute_map(&s, mode);
    let wpath = map.write_csv(out).map_err(compute_err)?;
    write_manifest(out, argv, &s.fingerprint(), &[out, &wpath])
}

#[derive(Debug, Serialize)]
struct MetricsOutput<'a> {
    baseline: String,
    with_ris: String,
    scenario_fingerprint: &'a str,
    mean_pl_gain_pct: f64,
}

fn read_map(path: &Path) -> Result<PathLossMap, CliError> {
    PathLossMap::read_csv(path).map_err(input_err)
}

fn cmd_metrics(argv: &[String], baseline: &Path, with_ris: &Path, out: &Path) -> Result<(), CliError> {
    let b = read_map(baseline)?;
    let r = read_map(with_ris)?;
    let gain = metrics::mean_pl_gain(&b, &r).map_err(|e| match e {
        MetricsError::Map(_) | MetricsError::NoFinitePoints => input_err(e),
        other => compute_err(other),
    })?;
    println!("{gain:.2} %");
    let result = MetricsOutput {
        baseline: baseline.display().to_string(),
        with_ris: with_ris.display().to_string(),
        scenario_fingerprint: b.scenario_fingerprint(),
        mean_pl_gain_pct: gain,
    };
    let mut text = serde_json::to_string_pretty(&result).expect("metrics serialize");
    text.push('\n');
    write_file(out, text)?;
    write_manifest(out, argv, b.scenario_fingerprint(), &[out])
}

fn cmd_sweep(argv: &[String], scenario: &Path, offsets: &str, report: &Path) -> Result<(), CliError> {
    let offsets = parse_offsets(offsets)?;
    let s = load(scenario)?;
    let r = metrics::run_sweep(&s, &offsets).map_err(compute_err)?;
    let table = r.to_table();
    print!("{table}");
    write_file(report, r.to_json())?;
    let tpath = sibling(report, "txt");
    write_file(&tpath, &table)?;
    write_manifest(report, argv, &r.scenario_fingerprint, &[report, &tpath])
}

fn cmd_render(argv: &[String], map: &Path, out: &Path, min: f64, max: f64) -> Result<(), CliError> {
    let scale = ColorScale::with_range(min, max).map_err(|e| CliError::Usage(e.to_string()))?;
    let m = read_map(map)?;
    write_file(out, raster::render_map(&m, &scale))?;
    write_manifest(out, argv, m.scenario_fingerprint(), &[out])
}

fn cmd_validate(scenario: &Path) -> Result<(), CliError> {
    let s = load(scenario)?;
    let g = s.grid();
    println!(
        "ok: {} cells, {} RIS panels, {} buildings, {}x{} grid at {} m, fingerprint {}",
        s.cells().len(),
        s.ris_panels().len(),
        s.buildings().len(),
        g.nx(),
        g.ny(),
        g.resolution,
        s.fingerprint()
    );
    Ok(())
}

fn dispatch(cli: Cli, argv: &[String]) -> Result<(), CliError> {
    let pool = match cli.threads {
        Some(0) => return Err(CliError::Usage("--threads must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(compute_err)?;

    pool.install(|| match &cli.command {
        Command::Run {
            scenario,
            offset,
            mode,
            out,
        } => cmd_run(argv, scenario, *offset, *mode, out),
        Command::Metrics {
            baseline,
            with_ris,
            out,
        } => cmd_metrics(argv, baseline, with_ris, out),
        Command::Sweep {
            scenario,
            offsets,
            report,
        } => cmd_sweep(argv, scenario, offsets, report),
        Command::Render { map, out, min, max } => cmd_render(argv, map, out, *min, *max),
        Command::Validate { scenario } => cmd_validate(scenario),
    })
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_parse() {
        assert_eq!(parse_offsets("0,5,10").unwrap(), vec![0.0, 5.0, 10.0]);
        assert_eq!(parse_offsets(" -2.5 , 0").unwrap(), vec![-2.5, 0.0]);
        assert!(matches!(parse_offsets("0,x"), Err(CliError::Usage(_))));
        assert!(matches!(parse_offsets("5,0"), Err(CliError::Usage(_))));
        assert!(matches!(parse_offsets("5,5"), Err(CliError::Usage(_))));
        assert!(matches!(parse_offsets(""), Err(CliError::Usage(_))));
    }

    #[test]
    fn sibling_names() {
        assert_eq!(
            sibling(Path::new("out/m5.csv"), "manifest.json"),
            Path::new("out/m5.manifest.json")
        );
        assert_eq!(sibling(Path::new("r.json"), "txt"), Path::new("r.txt"));
    }

    #[test]
    fn usage_errors_exit_1() {
        assert_eq!(run(["ris-coverage"]), 1);
        assert_eq!(run(["ris-coverage", "run", "--scenario", "x.json"]), 1);
        assert_eq!(run(["ris-coverage", "--help"]), 0);
    }
}
