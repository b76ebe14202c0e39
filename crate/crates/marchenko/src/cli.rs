//! Command-line front end: forward phase-shift computation, inversion of
//! scattering data, kernel-coefficient recovery, and a closed roundtrip that
//! compares the reconstructed potential against the input.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::forward::{self, Potential};
use crate::recovery::{self, KernelCoefficients};
use crate::scattering::{self, ScatteringData};
use crate::solver::{self, PotentialGrid, SolutionMatrix};

/// Pivot ratio below which a row solve is reported as ill conditioned.
const PIVOT_WARN: f64 = 1e-10;

/// Resolved run parameters shared by all subcommands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Radial grid step.
    pub h: f64,
    /// Radial range; an integer multiple of `h`.
    pub r_range: f64,
    /// Edge of the measured momentum range.
    pub q_edge: f64,
    /// Number of momentum samples on `(0, q_edge]`.
    pub q_points: usize,
    /// Upper bound on the radial integrator step.
    pub integrator_step: f64,
    /// Radial window for roundtrip error metrics.
    pub window: (f64, f64),
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            h: 0.04,
            r_range: 4.0,
            q_edge: 8.0,
            q_points: 40,
            integrator_step: 1e-3,
            window: (0.2, 3.0),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Number of radial steps, `r_range / h`.
    pub fn n(&self) -> usize {
        (self.r_range / self.h).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidInput(format!(
                "grid step must be positive, got h = {}",
                self.h
            )));
        }
        if !(self.r_range > 0.0) || !self.r_range.is_finite() {
            return Err(Error::InvalidInput(format!(
                "radial range must be positive, got R = {}",
                self.r_range
            )));
        }
        let ratio = self.r_range / self.h;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "radial range {} is not an integer multiple of the step {}",
                self.r_range, self.h
            )));
        }
        if self.n() < 2 {
            return Err(Error::InvalidInput(format!(
                "radial range must span at least two steps, got R/h = {}",
                self.n()
            )));
        }
        if !(self.q_edge > 0.0) || !self.q_edge.is_finite() {
            return Err(Error::InvalidInput(format!(
                "momentum edge must be positive, got {}",
                self.q_edge
            )));
        }
        if self.q_points < 1 {
            return Err(Error::InvalidInput(
                "need at least one momentum sample".into(),
            ));
        }
        let (lo, hi) = self.window;
        if !lo.is_finite() || !hi.is_finite() || lo < 0.0 || lo >= hi {
            return Err(Error::InvalidInput(format!(
                "window must satisfy 0 <= lo < hi, got {lo}:{hi}"
            )));
        }
        if !(self.integrator_step > 0.0) || self.q_edge * self.integrator_step >= 0.5 {
            return Err(Error::InvalidInput(format!(
                "integrator step {} too large for momentum edge {}",
                self.integrator_step, self.q_edge
            )));
        }
        Ok(())
    }

    fn apply(&mut self, over: &ConfigOverrides) {
        if let Some(v) = over.h {
            self.h = v;
        }
        if let Some(v) = over.r_range {
            self.r_range = v;
        }
        if let Some(v) = over.q_edge {
            self.q_edge = v;
        }
        if let Some(v) = over.q_points {
            self.q_points = v;
        }
        if let Some(v) = over.step {
            self.integrator_step = v;
        }
        if let Some(v) = over.window {
            self.window = v;
        }
        if let Some(v) = &over.out {
            self.out_dir = v.clone();
        }
    }
}

/// Partial settings from a config file or command-line flags.
#[derive(Debug, Clone, Default)]
pub struct ConfigOverrides {
    pub h: Option<f64>,
    pub r_range: Option<f64>,
    pub q_edge: Option<f64>,
    pub q_points: Option<usize>,
    pub step: Option<f64>,
    pub window: Option<(f64, f64)>,
    pub out: Option<PathBuf>,
}

fn malformed(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_window(s: &str) -> Result<(f64, f64)> {
    let invalid = || Error::InvalidInput(format!("window must be lo:hi, got {s:?}"));
    let (lo, hi) = s.split_once(':').ok_or_else(invalid)?;
    let lo: f64 = lo.trim().parse().map_err(|_| invalid())?;
    let hi: f64 = hi.trim().parse().map_err(|_| invalid())?;
    Ok((lo, hi))
}

/// Reads `key=value` lines; `#` starts a comment line.  Known keys: h, R,
/// q_edge, q_points, step, window (as lo:hi), out.
pub fn load_config_file(path: &Path) -> Result<ConfigOverrides> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut over = ConfigOverrides::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| malformed(path, line_no, "expected key=value"))?;
        let key = key.trim();
        let value = value.trim();
        let bad_value =
            || malformed(path, line_no, format!("cannot parse value {value:?} for {key}"));
        match key {
            "h" => over.h = Some(value.parse().map_err(|_| bad_value())?),
            "R" => over.r_range = Some(value.parse().map_err(|_| bad_value())?),
            "q_edge" => over.q_edge = Some(value.parse().map_err(|_| bad_value())?),
            "q_points" => over.q_points = Some(value.parse().map_err(|_| bad_value())?),
            "step" => over.step = Some(value.parse().map_err(|_| bad_value())?),
            "window" => over.window = Some(parse_window(value).map_err(|_| bad_value())?),
            "out" => over.out = Some(PathBuf::from(value)),
            _ => return Err(malformed(path, line_no, format!("unknown key {key:?}"))),
        }
    }
    Ok(over)
}

/// Potential selector: `exp:<depth>:<rate>`, `well:<depth>:<radius>`, or
/// `table:<path>` pointing at an `r,V` CSV.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Exponential { depth: f64, rate: f64 },
    Well { depth: f64, radius: f64 },
    Table { path: PathBuf },
}

impl FromStr for PotentialSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let invalid = || {
            Error::InvalidInput(format!(
                "potential must be exp:<depth>:<rate>, well:<depth>:<radius>, or table:<path>, got {s:?}"
            ))
        };
        let (tag, rest) = s.split_once(':').ok_or_else(invalid)?;
        match tag {
            "exp" | "well" => {
                let (a, b) = rest.split_once(':').ok_or_else(invalid)?;
                let a: f64 = a.parse().map_err(|_| invalid())?;
                let b: f64 = b.parse().map_err(|_| invalid())?;
                if tag == "exp" {
                    Ok(Self::Exponential { depth: a, rate: b })
                } else {
                    Ok(Self::Well {
                        depth: a,
                        radius: b,
                    })
                }
            }
            "table" if !rest.is_empty() => Ok(Self::Table {
                path: PathBuf::from(rest),
            }),
            _ => Err(invalid()),
        }
    }
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exponential { depth, rate } => write!(f, "exp:{depth}:{rate}"),
            Self::Well { depth, radius } => write!(f, "well:{depth}:{radius}"),
            Self::Table { path } => write!(f, "table:{}", path.display()),
        }
    }
}

impl PotentialSpec {
    pub fn build(&self) -> Result<Potential> {
        match self {
            Self::Exponential { depth, rate } => Potential::exponential(*depth, *rate),
            Self::Well { depth, radius } => Potential::square_well(*depth, *radius),
            Self::Table { path } => load_potential_table(path),
        }
    }
}

fn load_potential_table(path: &Path) -> Result<Potential> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut samples = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != "r,V" {
                return Err(malformed(path, line_no, "expected header r,V"));
            }
            saw_header = true;
            continue;
        }
        let (r, v) = line
            .split_once(',')
            .ok_or_else(|| malformed(path, line_no, "data rows have 2 fields: r,V"))?;
        let r: f64 = r
            .trim()
            .parse()
            .map_err(|_| malformed(path, line_no, format!("cannot parse number from {r:?}")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| malformed(path, line_no, format!("cannot parse number from {v:?}")))?;
        samples.push((r, v));
    }
    Potential::tabulated(samples)
}

fn write_file(path: &Path, content: String) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_config_echo(config: &RunConfig, command: &str, source: &str) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "command={command}").unwrap();
    writeln!(out, "source={source}").unwrap();
    writeln!(out, "h={}", config.h).unwrap();
    writeln!(out, "R={}", config.r_range).unwrap();
    writeln!(out, "q_edge={}", config.q_edge).unwrap();
    writeln!(out, "q_points={}", config.q_points).unwrap();
    writeln!(out, "step={}", config.integrator_step).unwrap();
    writeln!(out, "window={}:{}", config.window.0, config.window.1).unwrap();
    writeln!(out, "out={}", config.out_dir.display()).unwrap();
    write_file(&config.out_dir.join("config.txt"), out)
}

fn forward_table(config: &RunConfig, potential: &Potential) -> Result<forward::PhaseShiftTable> {
    let grid: Vec<f64> = (1..=config.q_points)
        .map(|i| config.q_edge * i as f64 / config.q_points as f64)
        .collect();
    forward::s_matrix_table_with_step(potential, &grid, Some(config.integrator_step))
}

fn assemble_data(
    config: &RunConfig,
    potential: &Potential,
    table: &forward::PhaseShiftTable,
) -> Result<ScatteringData> {
    let bound_states = forward::find_bound_states(potential)?;
    let a_const = forward::asymptotic_constant(table, config.q_edge)?;
    let samples = table.entries.iter().map(|e| (e.q, e.s)).collect();
    ScatteringData::new(samples, bound_states, a_const)
}

/// Runs the forward problem on the configured momentum grid.
pub fn compute_forward_data(config: &RunConfig, potential: &Potential) -> Result<ScatteringData> {
    let table = forward_table(config, potential)?;
    assemble_data(config, potential, &table)
}

fn cmd_forward(config: &RunConfig, spec: &PotentialSpec) -> Result<()> {
    let potential = spec.build()?;
    let table = forward_table(config, &potential)?;
    let data = assemble_data(config, &potential, &table)?;
    ensure_dir(&config.out_dir)?;
    scattering::save_scattering_csv(&data, &config.out_dir.join("scattering.csv"))?;

    let mut phases = String::from("q,delta\n");
    for e in &table.entries {
        writeln!(phases, "{:.16e},{:.16e}", e.q, e.delta).unwrap();
    }
    write_file(&config.out_dir.join("phase_shifts.csv"), phases)?;
    write_config_echo(config, "forward", &spec.to_string())?;

    println!(
        "forward: {} samples up to q = {}, {} bound state(s), A = {:.6e}",
        data.samples().len(),
        data.q_edge(),
        data.bound_states().len(),
        data.a_const()
    );
    println!("wrote {}", config.out_dir.join("scattering.csv").display());
    Ok(())
}

/// Everything the inversion produces, kept together for diagnostics.
#[derive(Debug)]
pub struct InversionReport {
    pub coefficients: KernelCoefficients,
    pub solution: SolutionMatrix,
    pub potential: PotentialGrid,
    pub consistency_residual: f64,
    pub marchenko_residual: f64,
    pub min_pivot_ratios: Vec<f64>,
}

/// Full inversion: kernel coefficients from Y, row systems, potential from
/// the solution diagonal.
pub fn run_inversion(data: &ScatteringData, h: f64, n: usize) -> Result<InversionReport> {
    let evaluator = scattering::build_y_evaluator(data)?;
    let coefficients = recovery::recover_coefficients(&evaluator, h, n)?;
    let consistency = recovery::consistency_residual(&evaluator, &coefficients)?;
    let kernel = solver::build_kernel_matrix(&coefficients);
    let report = solver::solve_all_detailed(&kernel)?;
    let potential = solver::extract_potential(&report.solution)?;
    let residual = solver::marchenko_residual(&report.solution, &kernel)?;
    Ok(InversionReport {
        coefficients,
        solution: report.solution,
        potential,
        consistency_residual: consistency,
        marchenko_residual: residual,
        min_pivot_ratios: report.min_pivot_ratios,
    })
}

fn write_inversion_outputs(
    config: &RunConfig,
    data: &ScatteringData,
    dump_solution: bool,
    source: &str,
) -> Result<InversionReport> {
    let report = run_inversion(data, config.h, config.n())?;
    ensure_dir(&config.out_dir)?;
    solver::save_potential_csv(&report.potential, &config.out_dir.join("potential.csv"))?;

    let kernel = solver::build_kernel_matrix(&report.coefficients);
    let min_ratio = report
        .min_pivot_ratios
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    let mut diag = String::new();
    writeln!(diag, "consistency_residual={:.16e}", report.consistency_residual).unwrap();
    writeln!(diag, "marchenko_residual={:.16e}", report.marchenko_residual).unwrap();
    writeln!(diag, "max_abs_kernel={:.16e}", kernel.max_abs()).unwrap();
    writeln!(diag, "min_pivot_ratio={:.16e}", min_ratio).unwrap();
    for (p, &ratio) in report.min_pivot_ratios.iter().enumerate() {
        if ratio < PIVOT_WARN {
            writeln!(diag, "warning=row {p} pivot ratio {ratio:.3e}").unwrap();
        }
    }
    write_file(&config.out_dir.join("diagnostics.txt"), diag)?;

    if dump_solution {
        solver::save_solution_csv(&report.solution, &config.out_dir.join("solution.csv"))?;
    }
    write_config_echo(config, "invert", source)?;
    Ok(report)
}

fn cmd_invert(config: &RunConfig, data_path: &Path, dump_solution: bool) -> Result<()> {
    let data = scattering::load_scattering_csv(data_path)?;
    let report = write_inversion_outputs(
        config,
        &data,
        dump_solution,
        &data_path.display().to_string(),
    )?;
    println!(
        "invert: consistency residual {:.3e}, equation residual {:.3e}",
        report.consistency_residual, report.marchenko_residual
    );
    println!("wrote {}", config.out_dir.join("potential.csv").display());
    Ok(())
}

fn cmd_kernel(config: &RunConfig, data_path: &Path) -> Result<()> {
    let data = scattering::load_scattering_csv(data_path)?;
    let evaluator = scattering::build_y_evaluator(&data)?;
    let coefficients = recovery::recover_coefficients(&evaluator, config.h, config.n())?;
    let consistency = recovery::consistency_residual(&evaluator, &coefficients)?;
    ensure_dir(&config.out_dir)?;
    recovery::save_coefficients_csv(&coefficients, &config.out_dir.join("kernel.csv"))?;

    let mut diag = String::new();
    writeln!(diag, "consistency_residual={consistency:.16e}").unwrap();
    writeln!(diag, "max_abs_kernel={:.16e}", coefficients.max_abs()).unwrap();
    write_file(&config.out_dir.join("diagnostics.txt"), diag)?;
    write_config_echo(config, "kernel", &data_path.display().to_string())?;

    println!(
        "kernel: {} coefficients, consistency residual {:.3e}",
        coefficients.values().len(),
        consistency
    );
    Ok(())
}

/// Error metrics of a reconstruction against the input potential, restricted
/// to a radial window.
#[derive(Debug, Clone, Copy)]
pub struct RoundtripMetrics {
    pub max_abs: f64,
    /// L2 error normalized by the input's L2 norm over the window; falls back
    /// to the absolute L2 error when the input vanishes there.
    pub rel_l2: f64,
}

pub fn roundtrip_metrics(
    radii: &[f64],
    input: &[f64],
    reconstructed: &[f64],
    window: (f64, f64),
) -> RoundtripMetrics {
    let mut max_abs = 0.0f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&r, &vi), &vr) in radii.iter().zip(input).zip(reconstructed) {
        if r < window.0 || r > window.1 {
            continue;
        }
        let d = vr - vi;
        max_abs = max_abs.max(d.abs());
        num += d * d;
        den += vi * vi;
    }
    let rel_l2 = if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    };
    RoundtripMetrics { max_abs, rel_l2 }
}

fn cmd_roundtrip(config: &RunConfig, spec: &PotentialSpec) -> Result<()> {
    let mut forward_config = config.clone();
    forward_config.out_dir = config.out_dir.join("forward");
    cmd_forward(&forward_config, spec)?;

    let data = scattering::load_scattering_csv(&forward_config.out_dir.join("scattering.csv"))?;
    let mut invert_config = config.clone();
    invert_config.out_dir = config.out_dir.join("invert");
    let report = write_inversion_outputs(&invert_config, &data, false, &spec.to_string())?;

    let potential = spec.build()?;
    let n = config.n();
    let radii: Vec<f64> = (0..=n).map(|p| p as f64 * config.h).collect();
    let input: Vec<f64> = radii.iter().map(|&r| potential.value(r)).collect();
    let mut comparison = String::from("r,V_input,V_reconstructed\n");
    for p in 0..=n {
        writeln!(
            comparison,
            "{:.16e},{:.16e},{:.16e}",
            radii[p], input[p], report.potential.values[p]
        )
        .unwrap();
    }
    write_file(&config.out_dir.join("comparison.csv"), comparison)?;

    let metrics = roundtrip_metrics(&radii, &input, &report.potential.values, config.window);
    let mut summary = String::new();
    writeln!(summary, "max_abs_error={:.16e}", metrics.max_abs).unwrap();
    writeln!(summary, "rel_l2_error={:.16e}", metrics.rel_l2).unwrap();
    writeln!(summary, "window={}:{}", config.window.0, config.window.1).unwrap();
    write_file(&config.out_dir.join("metrics.txt"), summary)?;

    println!("max_abs_error = {:.6e}", metrics.max_abs);
    println!("rel_l2_error = {:.6e}", metrics.rel_l2);
    Ok(())
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Configuration file with key=value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Radial grid step.
    #[arg(long)]
    h: Option<f64>,
    /// Radial range; must be an integer multiple of the step.
    #[arg(long = "R")]
    r_range: Option<f64>,
    /// Edge of the measured momentum range.
    #[arg(long)]
    q_edge: Option<f64>,
    /// Number of momentum samples on (0, q_edge].
    #[arg(long)]
    q_points: Option<usize>,
    /// Upper bound on the radial integrator step.
    #[arg(long)]
    step: Option<f64>,
    /// Radial window lo:hi for roundtrip error metrics.
    #[arg(long)]
    window: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn resolve_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    if let Some(path) = &common.config {
        config.apply(&load_config_file(path)?);
    }
    let cli_over = ConfigOverrides {
        h: common.h,
        r_range: common.r_range,
        q_edge: common.q_edge,
        q_points: common.q_points,
        step: common.step,
        window: common
            .window
            .as_deref()
            .map(parse_window)
            .transpose()?,
        out: common.out.clone(),
    };
    config.apply(&cli_over);
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Parser)]
#[command(
    name = "marchenko",
    version,
    about = "Zero angular momentum scattering: phase shifts from a potential, and the potential back from scattering data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute phase shifts, S-matrix samples, and bound states of a potential.
    Forward {
        #[command(flatten)]
        common: CommonArgs,
        /// exp:<depth>:<rate>, well:<depth>:<radius>, or table:<path>.
        potential: String,
    },
    /// Reconstruct the potential from a scattering data CSV.
    Invert {
        #[command(flatten)]
        common: CommonArgs,
        /// Scattering data file written by `forward`.
        data: PathBuf,
        /// Also write the full solution matrix as solution.csv.
        #[arg(long)]
        dump_solution: bool,
    },
    /// Forward then invert the same potential and report error metrics.
    Roundtrip {
        #[command(flatten)]
        common: CommonArgs,
        /// exp:<depth>:<rate>, well:<depth>:<radius>, or table:<path>.
        potential: String,
    },
    /// Recover kernel coefficients from scattering data without solving.
    Kernel {
        #[command(flatten)]
        common: CommonArgs,
        /// Scattering data file written by `forward`.
        data: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Forward { common, potential } => {
            let config = resolve_config(&common)?;
            cmd_forward(&config, &potential.parse()?)
        }
        Command::Invert {
            common,
            data,
            dump_solution,
        } => {
            let config = resolve_config(&common)?;
            cmd_invert(&config, &data, dump_solution)
        }
        Command::Roundtrip { common, potential } => {
            let config = resolve_config(&common)?;
            cmd_roundtrip(&config, &potential.parse()?)
        }
        Command::Kernel { common, data } => {
            let config = resolve_config(&common)?;
            cmd_kernel(&config, &data)
        }
    }
}

/// Entry point returning the process exit code: 0 on success, 1 for bad
/// input, 2 for numerical failures.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
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
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
