//! Reduction of the inverse-problem integral equation to linear systems over
//! hat-function overlap weights, solution of those systems, and extraction of
//! the potential from the solution diagonal.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{central_difference, solve_dense_detailed, DenseSystem};
use crate::recovery::KernelCoefficients;

/// Kernel matrix in displacement form: entry (k, j) depends only on k + j,
/// so a single line of 2N + 1 values determines the whole (N+1)^2 matrix.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    h: f64,
    n: usize,
    line: Vec<f64>,
}

/// Collects the k >= 0 coefficients into the displacement line.
pub fn build_kernel_matrix(coeffs: &KernelCoefficients) -> KernelMatrix {
    let n = coeffs.n();
    let line = (0..=2 * n as i64).map(|k| coeffs.get(k)).collect();
    KernelMatrix {
        h: coeffs.h(),
        n,
        line,
    }
}

impl KernelMatrix {
    /// Builds directly from a displacement line of length 2n + 1.
    pub fn from_line(h: f64, n: usize, line: Vec<f64>) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidInput(format!("step must be positive, got {h}")));
        }
        if n < 1 || line.len() != 2 * n + 1 {
            return Err(Error::InvalidInput(format!(
                "displacement line for n = {n} needs {} values, got {}",
                2 * n + 1,
                line.len()
            )));
        }
        if let Some(bad) = line.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "displacement line contains a non-finite value {bad}"
            )));
        }
        Ok(Self { h, n, line })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Matrix entry (k, j) for k, j in 0..=n.
    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.line[k + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.line.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Overlap weight of hat functions n and m integrated from node p outward.
///
/// Nonzero only for |n - m| <= 1; symmetric in (n, m).
pub fn zeta(n: usize, m: usize, p: usize, h: f64) -> f64 {
    let step = |cond: bool| if cond { 1.0 } else { 0.0 };
    let mut v = 0.0;
    if n == m {
        v += 2.0 * (step(n == p) + 2.0 * step(n >= p + 1));
    }
    if n + 1 == m {
        v += step(n >= p);
    }
    if m + 1 == n {
        v += step(m >= p);
    }
    v * h / 6.0
}

/// Assembles the order-(n+1) system for row p: unknowns are the solution
/// values P(p, m), right-hand side j runs over the same node range.
pub fn assemble_row_system(kernel: &KernelMatrix, p: usize) -> Result<DenseSystem> {
    let size = kernel.n() + 1;
    if p >= size {
        return Err(Error::InvalidInput(format!(
            "row index {p} outside 0..={}",
            size - 1
        )));
    }
    let h = kernel.h();
    let mut matrix = vec![0.0; size * size];
    let mut rhs = vec![0.0; size];
    for j in 0..size {
        for m in 0..size {
            let mut a = if j == m { 1.0 } else { 0.0 };
            if m >= 1 {
                a += zeta(m - 1, m, p, h) * kernel.get(m - 1, j);
            }
            a += zeta(m, m, p, h) * kernel.get(m, j);
            if m + 1 < size {
                a += zeta(m + 1, m, p, h) * kernel.get(m + 1, j);
            }
            matrix[j * size + m] = a;
        }
        rhs[j] = -kernel.get(p, j);
    }
    DenseSystem::new(matrix, rhs)
}

/// Solution values on the node grid: row p holds P(p, k) for k in 0..=n.
#[derive(Debug, Clone)]
pub struct SolutionMatrix {
    h: f64,
    n: usize,
    entries: Vec<f64>,
}

impl SolutionMatrix {
    pub fn from_entries(h: f64, n: usize, entries: Vec<f64>) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() || n < 1 {
            return Err(Error::InvalidInput(format!(
                "invalid solution grid: h = {h}, n = {n}"
            )));
        }
        let size = n + 1;
        if entries.len() != size * size {
            return Err(Error::InvalidInput(format!(
                "solution for n = {n} needs {} entries, got {}",
                size * size,
                entries.len()
            )));
        }
        Ok(Self { h, n, entries })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, p: usize, k: usize) -> f64 {
        self.entries[p * (self.n + 1) + k]
    }

    /// Values P(p, p) along the diagonal, index p = 0..=n.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..=self.n).map(|p| self.get(p, p)).collect()
    }
}

/// Per-row conditioning diagnostics from the solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: SolutionMatrix,
    /// Smallest pivot ratio of each row system, index p.
    pub min_pivot_ratios: Vec<f64>,
}

fn solve_p_system(kernel: &KernelMatrix, p: usize) -> Result<(Vec<f64>, f64)> {
    let system = assemble_row_system(kernel, p)?;
    match solve_dense_detailed(system) {
        Ok(sol) => Ok((sol.x, sol.min_pivot_ratio)),
        Err(Error::SingularSystem { pivot_index, .. }) => {
            Err(Error::SingularMarchenkoRow { p, pivot_index })
        }
        Err(e) => Err(e),
    }
}

/// Solves all n + 1 row systems.
pub fn solve_all(kernel: &KernelMatrix) -> Result<SolutionMatrix> {
    Ok(solve_all_detailed(kernel)?.solution)
}

/// Solves all row systems and keeps per-row pivot diagnostics.
///
/// Each row's solve returns P(p, .) indexed by the right-hand-side node j;
/// the unknown vector of system p is exactly row p of the solution matrix.
pub fn solve_all_detailed(kernel: &KernelMatrix) -> Result<SolveReport> {
    let size = kernel.n() + 1;
    let mut entries = vec![0.0; size * size];
    let mut ratios = Vec::with_capacity(size);
    for p in 0..size {
        let (x, ratio) = solve_p_system(kernel, p)?;
        entries[p * size..(p + 1) * size].copy_from_slice(&x);
        ratios.push(ratio);
    }
    Ok(SolveReport {
        solution: SolutionMatrix::from_entries(kernel.h(), kernel.n(), entries)?,
        min_pivot_ratios: ratios,
    })
}

/// Potential sampled on the radial grid r = p h.
#[derive(Debug, Clone)]
pub struct PotentialGrid {
    pub h: f64,
    pub values: Vec<f64>,
}

impl PotentialGrid {
    pub fn r(&self, p: usize) -> f64 {
        p as f64 * self.h
    }
}

/// Potential from the solution diagonal: V = -2 d/dr of P(r, r).
pub fn extract_potential(solution: &SolutionMatrix) -> Result<PotentialGrid> {
    if solution.n() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 diagonal values to differentiate, got {}",
            solution.n() + 1
        )));
    }
    let diag = solution.diagonal();
    let deriv = central_difference(&diag, solution.h())?;
    Ok(PotentialGrid {
        h: solution.h(),
        values: deriv.iter().map(|d| -2.0 * d).collect(),
    })
}

/// Largest violation of the discretized integral equation over rows j >= p,
/// evaluated by substituting the solution back into each row system.
pub fn marchenko_residual(solution: &SolutionMatrix, kernel: &KernelMatrix) -> Result<f64> {
    if solution.n() != kernel.n() || (solution.h() - kernel.h()).abs() > 1e-15 {
        return Err(Error::InvalidInput(
            "solution and kernel grids do not match".into(),
        ));
    }
    let size = kernel.n() + 1;
    let mut worst = 0.0f64;
    for p in 0..size {
        let system = assemble_row_system(kernel, p)?;
        let a = system.matrix();
        let b = system.rhs();
        for j in p..size {
            let mut lhs = 0.0;
            for m in 0..size {
                lhs += a[j * size + m] * solution.get(p, m);
            }
            worst = worst.max((lhs - b[j]).abs());
        }
    }
    Ok(worst)
}

/// Writes the potential grid as CSV with header `r,V`.
pub fn save_potential_csv(grid: &PotentialGrid, path: &Path) -> Result<()> {
    let mut out = String::from("r,V\n");
    for (p, v) in grid.values.iter().enumerate() {
        writeln!(out, "{:.16e},{v:.16e}", grid.r(p)).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes the full solution matrix as CSV with header `p,k,P`.
pub fn save_solution_csv(solution: &SolutionMatrix, path: &Path) -> Result<()> {
    let mut out = String::from("p,k,P\n");
    for p in 0..=solution.n() {
        for k in 0..=solution.n() {
            writeln!(out, "{p},{k},{:.16e}", solution.get(p, k)).unwrap();
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
