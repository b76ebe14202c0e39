//! Input data of the inverse problem: S-matrix samples on a momentum grid
//! plus bound states, the Y(q) evaluator combining spline interpolation with
//! the high-momentum tail, and the CSV data format.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forward::BoundState;
use crate::numerics::{fit_quadratic_spline, QuadraticSpline};
use crate::recovery::YSource;

/// Largest tolerated deviation of |S| from 1 in input data.
pub const UNITARITY_TOL: f64 = 1e-6;

/// Scattering input: unit-modulus S-matrix samples on a strictly increasing
/// momentum grid, bound states, and the tail constant fitted at the last
/// sample.
#[derive(Debug, Clone)]
pub struct ScatteringData {
    samples: Vec<(f64, Complex64)>,
    bound_states: Vec<BoundState>,
    q_edge: f64,
    a_const: f64,
}

impl ScatteringData {
    pub fn new(
        samples: Vec<(f64, Complex64)>,
        bound_states: Vec<BoundState>,
        a_const: f64,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if !a_const.is_finite() {
            return Err(Error::InvalidInput(format!(
                "tail constant must be finite, got {a_const}"
            )));
        }
        for (i, &(q, s)) in samples.iter().enumerate() {
            if !(q > 0.0) || !q.is_finite() || !s.re.is_finite() || !s.im.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "sample {i} is invalid: q = {q}, S = {s}"
                )));
            }
            if i > 0 && q <= samples[i - 1].0 {
                return Err(Error::NonMonotoneAbscissae { index: i });
            }
            if (s.norm() - 1.0).abs() > UNITARITY_TOL {
                return Err(Error::InvalidInput(format!(
                    "sample {i} violates unitarity: |S({q})| = {}",
                    s.norm()
                )));
            }
        }
        for (i, b) in bound_states.iter().enumerate() {
            if !(b.kappa > 0.0) || !b.kappa.is_finite() || !(b.m > 0.0) || !b.m.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "bound state {i} is invalid: kappa = {}, m = {}",
                    b.kappa, b.m
                )));
            }
            for other in &bound_states[..i] {
                if (other.kappa - b.kappa).abs() <= 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "bound states share the decay constant {}",
                        b.kappa
                    )));
                }
            }
        }
        let q_edge = samples.last().unwrap().0;
        Ok(Self {
            samples,
            bound_states,
            q_edge,
            a_const,
        })
    }

    pub fn samples(&self) -> &[(f64, Complex64)] {
        &self.samples
    }

    pub fn bound_states(&self) -> &[BoundState] {
        &self.bound_states
    }

    /// Momentum where measured data end and the asymptotic tail takes over.
    pub fn q_edge(&self) -> f64 {
        self.q_edge
    }

    /// Tail constant: `S(q) = exp(-2iA/q)` beyond the edge.
    pub fn a_const(&self) -> f64 {
        self.a_const
    }
}

/// Callable form of Y(q) = 1 - S(q) - i sum_j M_j^2 / (q - i kappa_j).
///
/// Inside the measured range S comes from separate quadratic splines of its
/// real and imaginary parts; beyond the edge from the tail `exp(-2iA/q)`;
/// below the first sample from the first spline segment extended downward.
#[derive(Debug, Clone)]
pub struct YEvaluator {
    re_s: QuadraticSpline,
    im_s: QuadraticSpline,
    q_edge: f64,
    a_const: f64,
    bound_states: Vec<BoundState>,
    // spline knots above the first one, plus the edge: the abscissae where
    // the interpolant's smoothness degrades
    breakpoints: Vec<f64>,
}

/// Builds the [`YEvaluator`] for the given data; needs at least 3 samples.
pub fn build_y_evaluator(data: &ScatteringData) -> Result<YEvaluator> {
    if data.samples().len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: data.samples().len(),
        });
    }
    let re: Vec<(f64, f64)> = data.samples().iter().map(|&(q, s)| (q, s.re)).collect();
    let im: Vec<(f64, f64)> = data.samples().iter().map(|&(q, s)| (q, s.im)).collect();
    let re_s = fit_quadratic_spline(&re)?;
    let im_s = fit_quadratic_spline(&im)?;
    let breakpoints = re_s.knots()[1..].to_vec();
    Ok(YEvaluator {
        re_s,
        im_s,
        q_edge: data.q_edge(),
        a_const: data.a_const(),
        bound_states: data.bound_states().to_vec(),
        breakpoints,
    })
}

impl YEvaluator {
    fn s_value(&self, q: f64) -> Complex64 {
        if q > self.q_edge {
            Complex64::from_polar(1.0, -2.0 * self.a_const / q)
        } else {
            Complex64::new(
                self.re_s.eval_extrapolated(q),
                self.im_s.eval_extrapolated(q),
            )
        }
    }

    fn y_value(&self, q: f64) -> Complex64 {
        let mut y = Complex64::new(1.0, 0.0) - self.s_value(q);
        for b in &self.bound_states {
            y -= Complex64::i() * (b.m * b.m) / Complex64::new(q, -b.kappa);
        }
        y
    }

    /// S-matrix value for q > 0.
    pub fn s_at(&self, q: f64) -> Result<Complex64> {
        self.check_momentum(q)?;
        Ok(self.s_value(q))
    }

    /// Y value for q > 0; the reflection `Y(-q) = conj(Y(q))` is for callers
    /// to apply analytically.
    pub fn y_at(&self, q: f64) -> Result<Complex64> {
        self.check_momentum(q)?;
        Ok(self.y_value(q))
    }

    fn check_momentum(&self, q: f64) -> Result<()> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::InvalidInput(format!(
                "momentum must be positive, got {q}"
            )));
        }
        Ok(())
    }

    pub fn q_edge(&self) -> f64 {
        self.q_edge
    }

    pub fn a_const(&self) -> f64 {
        self.a_const
    }
}

impl YSource for YEvaluator {
    fn y(&self, q: f64) -> Complex64 {
        self.y_value(q)
    }

    fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }
}

/// Writes scattering data as CSV: `q,re_s,im_s` rows, an optional
/// `# bound_states` section of `kappa,M` rows, and the trailing
/// `# q_edge=<v> A=<v>` metadata line.
pub fn save_scattering_csv(data: &ScatteringData, path: &Path) -> Result<()> {
    let mut out = String::from("q,re_s,im_s\n");
    for &(q, s) in data.samples() {
        writeln!(out, "{q:.16e},{:.16e},{:.16e}", s.re, s.im).unwrap();
    }
    if !data.bound_states().is_empty() {
        out.push_str("# bound_states\n");
        for b in data.bound_states() {
            writeln!(out, "{:.16e},{:.16e}", b.kappa, b.m).unwrap();
        }
    }
    writeln!(out, "# q_edge={:.16e} A={:.16e}", data.q_edge(), data.a_const()).unwrap();
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn malformed(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_float(path: &Path, line: usize, field: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| malformed(path, line, format!("cannot parse number from {field:?}")))
}

/// Reads scattering data written by [`save_scattering_csv`], validating
/// unitarity, grid monotonicity, and the metadata line.
pub fn load_scattering_csv(path: &Path) -> Result<ScatteringData> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;

    let mut samples: Vec<(f64, Complex64)> = Vec::new();
    let mut bound_states: Vec<BoundState> = Vec::new();
    let mut meta: Option<(f64, f64)> = None;
    let mut in_bound_section = false;
    let mut saw_header = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if !saw_header {
            if line != "q,re_s,im_s" {
                return Err(malformed(path, line_no, "expected header q,re_s,im_s"));
            }
            saw_header = true;
            continue;
        }
        if meta.is_some() {
            return Err(malformed(path, line_no, "data after the metadata line"));
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if rest == "bound_states" {
                if in_bound_section {
                    return Err(malformed(path, line_no, "duplicate bound_states section"));
                }
                in_bound_section = true;
                continue;
            }
            let mut q_edge = None;
            let mut a = None;
            for token in rest.split_whitespace() {
                match token.split_once('=') {
                    Some(("q_edge", v)) => q_edge = Some(parse_float(path, line_no, v)?),
                    Some(("A", v)) => a = Some(parse_float(path, line_no, v)?),
                    _ => return Err(malformed(path, line_no, format!("unrecognized token {token:?}"))),
                }
            }
            match (q_edge, a) {
                (Some(qe), Some(av)) => meta = Some((qe, av)),
                _ => return Err(malformed(path, line_no, "metadata line needs q_edge= and A=")),
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if in_bound_section {
            if fields.len() != 2 {
                return Err(malformed(path, line_no, "bound state rows have 2 fields: kappa,M"));
            }
            let kappa = parse_float(path, line_no, fields[0])?;
            let m = parse_float(path, line_no, fields[1])?;
            if !(kappa > 0.0) || !(m > 0.0) {
                return Err(malformed(path, line_no, "bound state needs kappa > 0 and M > 0"));
            }
            bound_states.push(BoundState { kappa, m });
        } else {
            if fields.len() != 3 {
                return Err(malformed(path, line_no, "data rows have 3 fields: q,re_s,im_s"));
            }
            let q = parse_float(path, line_no, fields[0])?;
            let s = Complex64::new(
                parse_float(path, line_no, fields[1])?,
                parse_float(path, line_no, fields[2])?,
            );
            if let Some(&(prev, _)) = samples.last() {
                if q <= prev {
                    return Err(malformed(path, line_no, format!("momentum {q} does not increase over {prev}")));
                }
            }
            if (s.norm() - 1.0).abs() > UNITARITY_TOL {
                return Err(malformed(path, line_no, format!("|S| = {} violates unitarity", s.norm())));
            }
            samples.push((q, s));
        }
    }

    let trailing = text.lines().count() + 1;
    let (q_edge, a_const) =
        meta.ok_or_else(|| malformed(path, trailing, "missing trailing # q_edge=... A=... line"))?;
    let last = samples
        .last()
        .ok_or_else(|| malformed(path, trailing, "no data rows"))?
        .0;
    if (q_edge - last).abs() > 1e-9 {
        return Err(malformed(
            path,
            trailing,
            format!("q_edge = {q_edge} does not match the last sample momentum {last}"),
        ));
    }
    ScatteringData::new(samples, bound_states, a_const)
}
