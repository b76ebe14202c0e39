//! Shared numerical primitives: oscillation-aware adaptive quadrature,
//! C1 quadratic spline interpolation, dense Gaussian elimination, and
//! second-order finite differences.

use crate::error::{Error, Result};

/// Default absolute tolerance for one quadrature call.
pub const TOL_QUAD: f64 = 1e-9;

/// Phase advance of the oscillatory factor allowed across one panel of the
/// initial grid.
pub const MAX_PHASE_PER_PANEL: f64 = std::f64::consts::PI / 8.0;

/// Width allowed for one panel of the initial grid, so slowly oscillating
/// integrands still start out well sampled.
pub const MAX_PANEL_WIDTH: f64 = 0.05;

const MAX_DOUBLINGS: usize = 14;

/// Composite Simpson rule with `panels` panels (two subintervals each).
fn simpson<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64, panels: usize) -> Result<f64> {
    let n = 2 * panels;
    let w = (b - a) / n as f64;
    let mut acc = 0.0;
    for j in 0..=n {
        let q = if j == n { b } else { a + j as f64 * w };
        let v = f(q);
        if !v.is_finite() {
            return Err(Error::NonFiniteIntegrand { q });
        }
        let weight = if j == 0 || j == n {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += weight * v;
    }
    Ok(acc * w / 3.0)
}

fn initial_panels(len: f64, omega: f64) -> usize {
    let by_width = len / MAX_PANEL_WIDTH;
    let by_phase = len * omega.abs() / MAX_PHASE_PER_PANEL;
    by_width.max(by_phase).max(8.0).ceil() as usize
}

fn check_bounds(a: f64, b: f64) -> Result<()> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidInput(format!(
            "integration bounds must be finite, got [{a}, {b}]"
        )));
    }
    if b < a {
        return Err(Error::InvalidInput(format!(
            "integration bounds must satisfy a <= b, got [{a}, {b}]"
        )));
    }
    Ok(())
}

/// Integrates `f` over `[a, b]` to absolute accuracy [`TOL_QUAD`].
///
/// `omega` is the phase rate of the oscillatory factor inside `f` (radians
/// per unit of `q`); the initial grid keeps the phase advance per panel
/// below [`MAX_PHASE_PER_PANEL`]. The grid is then doubled, with Richardson
/// extrapolation across levels, until two successive extrapolated values
/// agree within the tolerance.
pub fn integrate_oscillatory<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    omega: f64,
) -> Result<f64> {
    integrate_oscillatory_tol(f, a, b, omega, TOL_QUAD)
}

/// [`integrate_oscillatory`] with an explicit tolerance.
pub fn integrate_oscillatory_tol<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    omega: f64,
    tol: f64,
) -> Result<f64> {
    check_bounds(a, b)?;
    if a == b {
        return Ok(0.0);
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "quadrature tolerance must be positive, got {tol}"
        )));
    }
    let mut panels = initial_panels(b - a, omega);
    // Richardson tableau over panel doublings, seeded by the Simpson column;
    // prev_row[j] has error order O(w^(2j+4)).
    let mut prev_row = vec![simpson(f, a, b, panels)?];
    for level in 1..=MAX_DOUBLINGS {
        panels *= 2;
        let mut row = Vec::with_capacity(level + 1);
        row.push(simpson(f, a, b, panels)?);
        for j in 1..=level {
            let denom = 4f64.powi(j as i32 + 1) - 1.0;
            let extrapolated = row[j - 1] + (row[j - 1] - prev_row[j - 1]) / denom;
            row.push(extrapolated);
        }
        // compare the best entries of two successive levels
        if level >= 2 && (row[level] - prev_row[level - 1]).abs() <= 0.5 * tol {
            return Ok(row[level]);
        }
        prev_row = row;
    }
    Err(Error::QuadratureNoConvergence { a, b, tol })
}

/// Integrates over `[a, b]` split at the interior abscissae `cuts`, where the
/// integrand may lose smoothness. Each smooth piece receives an equal share
/// of the tolerance, so the extrapolation never has to work across a kink.
pub fn integrate_piecewise<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    omega: f64,
    cuts: &[f64],
    tol: f64,
) -> Result<f64> {
    check_bounds(a, b)?;
    if a == b {
        return Ok(0.0);
    }
    let margin = 1e-12 * (b - a);
    let mut inner: Vec<f64> = cuts
        .iter()
        .copied()
        .filter(|&c| c > a + margin && c < b - margin)
        .collect();
    inner.sort_by(|x, y| x.total_cmp(y));
    inner.dedup_by(|x, y| (*x - *y).abs() <= margin);

    let mut points = Vec::with_capacity(inner.len() + 2);
    points.push(a);
    points.extend_from_slice(&inner);
    points.push(b);

    let piece_tol = tol / (points.len() - 1) as f64;
    let mut total = 0.0;
    for pair in points.windows(2) {
        total += integrate_oscillatory_tol(f, pair[0], pair[1], omega, piece_tol)?;
    }
    Ok(total)
}

/// Composite Simpson over uniformly spaced samples; the sample count must be
/// odd and at least 3.
pub(crate) fn simpson_from_samples(values: &[f64], step: f64) -> f64 {
    debug_assert!(values.len() >= 3 && values.len() % 2 == 1);
    let last = values.len() - 1;
    let mut acc = values[0] + values[last];
    for (i, &v) in values.iter().enumerate().take(last).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * step / 3.0
}

/// Piecewise quadratic interpolant with a continuous first derivative.
///
/// Each segment stores its polynomial in powers of the offset from the left
/// knot.  Continuity of value and slope fixes every segment once the slope at
/// the first knot is chosen; that one free slope is set by least squares to
/// minimize the curvature jumps across interior knots, which suppresses the
/// alternating mode a marched construction would otherwise carry over the
/// whole range.
#[derive(Debug, Clone)]
pub struct QuadraticSpline {
    knots: Vec<f64>,
    // (value, slope, curvature) at the left knot of each segment
    coeffs: Vec<(f64, f64, f64)>,
}

// value/slope continuity marched left to right from the given first slope
fn march_segments(samples: &[(f64, f64)], first_slope: f64) -> Vec<(f64, f64, f64)> {
    let mut slope = first_slope;
    let mut coeffs = Vec::with_capacity(samples.len() - 1);
    for pair in samples.windows(2) {
        let (qa, ya) = pair[0];
        let (qb, yb) = pair[1];
        let d = qb - qa;
        let curvature = (yb - ya - slope * d) / (d * d);
        coeffs.push((ya, slope, curvature));
        slope += 2.0 * curvature * d;
    }
    coeffs
}

/// Fits a [`QuadraticSpline`] through the given samples.
pub fn fit_quadratic_spline(samples: &[(f64, f64)]) -> Result<QuadraticSpline> {
    if samples.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: samples.len(),
        });
    }
    for (i, &(q, y)) in samples.iter().enumerate() {
        if !q.is_finite() || !y.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sample {i} is not finite: ({q}, {y})"
            )));
        }
        if i > 0 && q <= samples[i - 1].0 {
            return Err(Error::NonMonotoneAbscissae { index: i });
        }
    }

    // every curvature is affine in the first slope, so probing 0 and 1 gives
    // the exact dependence; minimize the squared curvature jumps over it
    let base = march_segments(samples, 0.0);
    let probe = march_segments(samples, 1.0);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 1..base.len() {
        let da = base[i].2 - base[i - 1].2;
        let db = (probe[i].2 - probe[i - 1].2) - da;
        num += da * db;
        den += db * db;
    }
    let first_slope = if den > 0.0 { -num / den } else { 0.0 };

    Ok(QuadraticSpline {
        knots: samples.iter().map(|&(q, _)| q).collect(),
        coeffs: march_segments(samples, first_slope),
    })
}

impl QuadraticSpline {
    pub fn range(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    fn segment(&self, q: f64) -> usize {
        let idx = self.knots.partition_point(|&k| k <= q);
        idx.saturating_sub(1).min(self.coeffs.len() - 1)
    }

    /// Value at `q`; errors outside the knot range.
    pub fn eval(&self, q: f64) -> Result<f64> {
        let (min, max) = self.range();
        if q < min || q > max {
            return Err(Error::SplineOutOfRange { q, min, max });
        }
        Ok(self.eval_extrapolated(q))
    }

    /// Value at `q`, extending the nearest end segment's polynomial outside
    /// the knot range.
    pub fn eval_extrapolated(&self, q: f64) -> f64 {
        let seg = self.segment(q);
        let (value, slope, curvature) = self.coeffs[seg];
        let t = q - self.knots[seg];
        value + t * (slope + t * curvature)
    }
}

/// Square linear system with a dense coefficient matrix in row-major order.
#[derive(Debug, Clone)]
pub struct DenseSystem {
    n: usize,
    matrix: Vec<f64>,
    rhs: Vec<f64>,
}

impl DenseSystem {
    pub fn new(matrix: Vec<f64>, rhs: Vec<f64>) -> Result<Self> {
        let n = rhs.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty linear system".into()));
        }
        if matrix.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "matrix has {} entries, expected {} for order {n}",
                matrix.len(),
                n * n
            )));
        }
        if matrix.iter().chain(rhs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "linear system contains non-finite entries".into(),
            ));
        }
        Ok(Self { n, matrix, rhs })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }
}

/// Solution together with the smallest pivot magnitude met during
/// elimination, relative to the matrix scale; small ratios flag
/// near-singular systems.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    pub x: Vec<f64>,
    pub min_pivot_ratio: f64,
}

/// Gaussian elimination with partial pivoting.
pub fn solve_dense(system: DenseSystem) -> Result<Vec<f64>> {
    Ok(solve_dense_detailed(system)?.x)
}

/// [`solve_dense`] reporting the pivot-ratio diagnostic as well.
pub fn solve_dense_detailed(system: DenseSystem) -> Result<DenseSolution> {
    let DenseSystem {
        n,
        mut matrix,
        mut rhs,
    } = system;
    let scale = matrix.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::SingularSystem {
            pivot_index: 0,
            pivot: 0.0,
        });
    }
    let mut min_pivot_ratio = f64::INFINITY;
    for col in 0..n {
        let mut best = col;
        let mut best_abs = matrix[col * n + col].abs();
        for row in col + 1..n {
            let v = matrix[row * n + col].abs();
            if v > best_abs {
                best = row;
                best_abs = v;
            }
        }
        if best_abs < 1e-14 * scale {
            return Err(Error::SingularSystem {
                pivot_index: col,
                pivot: matrix[best * n + col],
            });
        }
        if best != col {
            for c in col..n {
                matrix.swap(best * n + c, col * n + c);
            }
            rhs.swap(best, col);
        }
        min_pivot_ratio = min_pivot_ratio.min(best_abs / scale);
        let pivot = matrix[col * n + col];
        for row in col + 1..n {
            let factor = matrix[row * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            matrix[row * n + col] = 0.0;
            for c in col + 1..n {
                matrix[row * n + c] -= factor * matrix[col * n + c];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = rhs[row];
        for c in row + 1..n {
            s -= matrix[row * n + c] * x[c];
        }
        x[row] = s / matrix[row * n + row];
    }
    Ok(DenseSolution { x, min_pivot_ratio })
}

/// Second-order derivative estimate on a uniform grid: central differences
/// inside, one-sided three-point formulas at the ends. Exact for quadratics.
pub fn central_difference(values: &[f64], h: f64) -> Result<Vec<f64>> {
    if values.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: values.len(),
        });
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidInput(format!(
            "grid step must be positive and finite, got {h}"
        )));
    }
    let n = values.len();
    let mut out = vec![0.0; n];
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    for i in 1..n - 1 {
        out[i] = (values[i + 1] - values[i - 1]) / (2.0 * h);
    }
    out[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
    Ok(out)
}
