//! Recovery of the Marchenko kernel samples from the scattering combination
//! Y(q).
//!
//! On a radial grid of step h the kernel is expanded over unit-step
//! indicator functions, which turns q*Y(q) into a finite Fourier series on
//! the band [-pi/h, pi/h] whose coefficients are successive differences of
//! the kernel samples. Each difference is one oscillatory integral, and a
//! single descending pass over the band accumulates the samples themselves.

use std::f64::consts::PI;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics;

/// Source of Y(q) values for q > 0.
pub trait YSource {
    fn y(&self, q: f64) -> Complex64;

    /// Interior abscissae where Y loses smoothness; moment quadrature splits
    /// its integration range there.
    fn breakpoints(&self) -> &[f64] {
        &[]
    }

    /// Phase rate of oscillations carried by Y itself, on top of the
    /// explicit oscillatory factor of the moment integrals.
    fn phase_rate(&self) -> f64 {
        0.0
    }
}

/// Plain closure adapter for [`YSource`].
pub struct YFn<F: Fn(f64) -> Complex64>(pub F);

impl<F: Fn(f64) -> Complex64> YSource for YFn<F> {
    fn y(&self, q: f64) -> Complex64 {
        (self.0)(q)
    }
}

/// Kernel samples F(kh) for k = -2N..2N on a grid of step h covering the
/// range R = Nh.
#[derive(Debug, Clone)]
pub struct KernelCoefficients {
    h: f64,
    n: usize,
    values: Vec<f64>,
}

impl KernelCoefficients {
    pub fn new(h: f64, n: usize, values: Vec<f64>) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidInput(format!(
                "grid step must be positive and finite, got {h}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidInput("grid size must be at least 1".into()));
        }
        if values.len() != 4 * n + 1 {
            return Err(Error::InvalidInput(format!(
                "expected {} kernel samples for N = {n}, got {}",
                4 * n + 1,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "kernel samples contain non-finite values".into(),
            ));
        }
        Ok(Self { h, n, values })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Sample at index `k`, valid for -2N <= k <= 2N.
    pub fn get(&self, k: i64) -> f64 {
        self.values[(k + 2 * self.n as i64) as usize]
    }

    /// All samples, index k = -2N at position 0.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// The k-th Fourier moment of the data:
/// `(h/pi) * integral of Im(q Y(q) e^{iqhk}) dq over [0, pi/h]`.
pub fn fourier_moment<S: YSource + ?Sized>(source: &S, h: f64, k: i64) -> Result<f64> {
    fourier_moment_tol(source, h, k, numerics::TOL_QUAD)
}

fn fourier_moment_tol<S: YSource + ?Sized>(source: &S, h: f64, k: i64, tol: f64) -> Result<f64> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidInput(format!(
            "grid step must be positive and finite, got {h}"
        )));
    }
    let hk = h * k as f64;
    let integrand = |q: f64| {
        // the q factor extends the integrand continuously to the origin
        if q <= 0.0 {
            return 0.0;
        }
        let y = source.y(q);
        let (sin, cos) = (q * hk).sin_cos();
        q * (y.re * sin + y.im * cos)
    };
    let omega = hk.abs() + source.phase_rate();
    let value = numerics::integrate_piecewise(
        &integrand,
        0.0,
        PI / h,
        omega,
        source.breakpoints(),
        tol,
    )?;
    Ok(value * h / PI)
}

/// Recovers all kernel samples on the step-h grid with range R = Nh.
///
/// The top sample comes from the highest moment; every further sample
/// follows by adding one moment to its predecessor, walking the index down
/// across the whole band. The lowest-index relation is left out and serves
/// as the consistency check.
pub fn recover_coefficients<S: YSource + ?Sized>(
    source: &S,
    h: f64,
    n: usize,
) -> Result<KernelCoefficients> {
    if n == 0 {
        return Err(Error::InvalidInput("grid size must be at least 1".into()));
    }
    let two_n = 2 * n as i64;
    let mut values = vec![0.0; 4 * n + 1];
    let idx = |k: i64| (k + two_n) as usize;

    let mut current = fourier_moment(source, h, two_n + 1)?;
    values[idx(two_n)] = current;

    // compensated running sum: thousands of small moments accumulate into
    // the low-index samples
    let mut compensation = 0.0;
    let mut k = two_n;
    while k > -two_n {
        let moment = fourier_moment(source, h, k)?;
        let add = moment - compensation;
        let next = current + add;
        compensation = (next - current) - add;
        current = next;
        values[idx(k - 1)] = current;
        k -= 1;
    }
    KernelCoefficients::new(h, n, values)
}

/// Discrepancy of the one redundant recovery relation: how far the lowest
/// sample is from the moment that would have produced it directly. Small
/// values certify that Y is well represented on the step-h band.
pub fn consistency_residual<S: YSource + ?Sized>(
    source: &S,
    coeffs: &KernelCoefficients,
) -> Result<f64> {
    let two_n = 2 * coeffs.n() as i64;
    let moment = fourier_moment(source, coeffs.h(), -two_n)?;
    Ok((coeffs.get(-two_n) + moment).abs())
}

/// Y built from a given sample sequence by the same band-limited expansion
/// the recovery inverts; feeding it back through [`recover_coefficients`]
/// reproduces the sequence.
#[derive(Debug, Clone)]
pub struct BandLimitedY {
    h: f64,
    n: usize,
    values: Vec<f64>,
}

pub fn band_limited_y(coeffs: &KernelCoefficients) -> BandLimitedY {
    BandLimitedY {
        h: coeffs.h(),
        n: coeffs.n(),
        values: coeffs.values().to_vec(),
    }
}

impl YSource for BandLimitedY {
    fn y(&self, q: f64) -> Complex64 {
        let h = self.h;
        let z = Complex64::from_polar(1.0, -q * h);
        let prefactor = if q.abs() < 1e-12 {
            Complex64::new(h, 0.0)
        } else {
            Complex64::i() * (z - 1.0) / q
        };
        // Horner sum of c_k z^k over k = -2N..2N, shifted back by z^(-2N)
        let mut acc = Complex64::new(*self.values.last().unwrap(), 0.0);
        for &c in self.values.iter().rev().skip(1) {
            acc = acc * z + c;
        }
        let shift = Complex64::from_polar(1.0, q * h * (2 * self.n) as f64);
        prefactor * acc * shift
    }

    fn phase_rate(&self) -> f64 {
        self.h * (2 * self.n + 1) as f64
    }
}

/// Writes the samples as CSV with header `k,F0k`.
pub fn save_coefficients_csv(coeffs: &KernelCoefficients, path: &Path) -> Result<()> {
    let mut out = String::from("k,F0k\n");
    let two_n = 2 * coeffs.n() as i64;
    for k in -two_n..=two_n {
        out.push_str(&format!("{k},{:.16e}\n", coeffs.get(k)));
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    struct ZeroY;
    impl YSource for ZeroY {
        fn y(&self, _q: f64) -> Complex64 {
            Complex64::new(0.0, 0.0)
        }
    }

    #[test]
    fn zero_data_recovers_zero_samples() {
        let coeffs = recover_coefficients(&ZeroY, 0.1, 4).unwrap();
        assert_eq!(coeffs.values().len(), 17);
        assert!(coeffs.values().iter().all(|&v| v == 0.0));
        assert_eq!(consistency_residual(&ZeroY, &coeffs).unwrap(), 0.0);
    }

    #[test]
    fn moments_of_zero_data_vanish() {
        for k in [-3i64, 0, 5] {
            assert_eq!(fourier_moment(&ZeroY, 0.25, k).unwrap(), 0.0);
        }
    }

    // single unit sample at k = 0: moments isolate the two nonzero
    // differences of the sample sequence
    #[test]
    fn single_term_moments_follow_orthogonality() {
        let h = 0.5;
        let coeffs = KernelCoefficients::new(h, 1, vec![0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let y = band_limited_y(&coeffs);
        assert_abs_diff_eq!(fourier_moment(&y, h, 1).unwrap(), 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(fourier_moment(&y, h, 0).unwrap(), -1.0, epsilon = 1e-8);
        for k in [-2i64, -1, 2, 3] {
            assert_abs_diff_eq!(fourier_moment(&y, h, k).unwrap(), 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn synthesis_then_recovery_is_identity() {
        let h = 0.3;
        let n = 3;
        let values = vec![
            0.05, -0.2, 0.4, 0.1, -0.3, 0.7, -0.15, 0.25, 0.6, -0.45, 0.3, 0.2, -0.1,
        ];
        let coeffs = KernelCoefficients::new(h, n, values.clone()).unwrap();
        let y = band_limited_y(&coeffs);
        let recovered = recover_coefficients(&y, h, n).unwrap();
        for (a, b) in recovered.values().iter().zip(&values) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-7);
        }
        assert!(consistency_residual(&y, &recovered).unwrap() <= 1e-7);
    }

    #[test]
    fn telescoping_matches_independent_moment() {
        let h = 0.3;
        let coeffs =
            KernelCoefficients::new(h, 2, vec![0.1, -0.4, 0.3, 0.8, -0.2, 0.5, 0.05, -0.3, 0.6])
                .unwrap();
        let y = band_limited_y(&coeffs);
        let recovered = recover_coefficients(&y, h, 2).unwrap();
        for k in [-3i64, -1, 0, 2, 4] {
            let stored = recovered.get(k - 1) - recovered.get(k);
            let direct = fourier_moment(&y, h, k).unwrap();
            assert_abs_diff_eq!(stored, direct, epsilon = 2e-8);
        }
    }

    #[test]
    fn sample_indexing_spans_the_band() {
        let values: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let coeffs = KernelCoefficients::new(1.0, 2, values).unwrap();
        assert_eq!(coeffs.get(-4), 0.0);
        assert_eq!(coeffs.get(0), 4.0);
        assert_eq!(coeffs.get(4), 8.0);
        assert_eq!(coeffs.max_abs(), 8.0);
    }

    #[test]
    fn constructor_validates_shape() {
        assert!(KernelCoefficients::new(0.1, 2, vec![0.0; 8]).is_err());
        assert!(KernelCoefficients::new(-0.1, 2, vec![0.0; 9]).is_err());
        assert!(KernelCoefficients::new(0.1, 0, vec![0.0; 1]).is_err());
        assert!(KernelCoefficients::new(0.1, 2, vec![f64::INFINITY; 9]).is_err());
    }
}
