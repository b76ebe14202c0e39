//! Direct scattering problem at zero angular momentum: integrate the radial
//! wave equation u'' = (V(r) - q^2) u outward from the origin, extract phase
//! shifts and the S-matrix, locate bound states, and fit the high-momentum
//! tail constant. Units follow the convention where energy equals momentum
//! squared.

use crate::error::{Error, Result};
use crate::numerics;
use num_complex::Complex64;

/// Threshold beyond which the outward solution is rescaled to avoid overflow.
const RESCALE_LIMIT: f64 = 1e100;
const RESCALE_FACTOR: f64 = 1e-100;

/// Smallest decay constant probed when counting bound states.
const KAPPA_FLOOR: f64 = 1e-8;

/// Real potential of finite range: evaluates to 0 beyond the cutoff radius.
pub struct Potential {
    f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    cutoff: f64,
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Potential")
            .field("cutoff", &self.cutoff)
            .finish_non_exhaustive()
    }
}

impl Potential {
    pub fn from_fn(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        cutoff: f64,
    ) -> Result<Self> {
        if !(cutoff > 0.0) || !cutoff.is_finite() {
            return Err(Error::InvalidInput(format!(
                "potential cutoff must be positive and finite, got {cutoff}"
            )));
        }
        Ok(Self {
            f: Box::new(f),
            cutoff,
        })
    }

    /// `V(r) = -depth * exp(-rate * r)`, truncated after six decay lengths
    /// where the remaining magnitude is below 0.25% of the depth.
    pub fn exponential(depth: f64, rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() || !depth.is_finite() {
            return Err(Error::InvalidInput(format!(
                "exponential potential needs finite depth and positive rate, got depth={depth} rate={rate}"
            )));
        }
        Self::from_fn(move |r| -depth * (-rate * r).exp(), 6.0 / rate)
    }

    /// `V(r) = -depth` inside `radius`, zero outside.
    pub fn square_well(depth: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() || !depth.is_finite() {
            return Err(Error::InvalidInput(format!(
                "square well needs finite depth and positive radius, got depth={depth} radius={radius}"
            )));
        }
        Self::from_fn(move |r| if r <= radius { -depth } else { 0.0 }, radius)
    }

    /// Piecewise-linear interpolation of tabulated `(r, V)` samples; constant
    /// below the first radius, zero beyond the last.
    pub fn tabulated(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: samples.len(),
            });
        }
        for (i, &(r, v)) in samples.iter().enumerate() {
            if !r.is_finite() || !v.is_finite() || r < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "tabulated sample {i} is invalid: ({r}, {v})"
                )));
            }
            if i > 0 && r <= samples[i - 1].0 {
                return Err(Error::NonMonotoneAbscissae { index: i });
            }
        }
        let cutoff = samples.last().unwrap().0;
        if !(cutoff > 0.0) {
            return Err(Error::InvalidInput(
                "tabulated potential must extend beyond r = 0".into(),
            ));
        }
        Self::from_fn(
            move |r| {
                if r <= samples[0].0 {
                    return samples[0].1;
                }
                let idx = samples.partition_point(|&(rr, _)| rr <= r);
                let (ra, va) = samples[idx - 1];
                let (rb, vb) = samples[idx.min(samples.len() - 1)];
                if idx == samples.len() {
                    return va;
                }
                va + (vb - va) * (r - ra) / (rb - ra)
            },
            cutoff,
        )
    }

    pub fn value(&self, r: f64) -> f64 {
        if r > self.cutoff {
            0.0
        } else {
            (self.f)(r)
        }
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }
}

/// One momentum point of the S-matrix table.
#[derive(Debug, Clone, Copy)]
pub struct PhaseShiftEntry {
    pub q: f64,
    pub delta: f64,
    pub s: Complex64,
}

/// Phase shifts and S-matrix values on a strictly increasing momentum grid.
#[derive(Debug, Clone)]
pub struct PhaseShiftTable {
    pub entries: Vec<PhaseShiftEntry>,
}

/// Bound state at energy `-kappa^2` with asymptotic normalization constant
/// `m`: the unit-norm radial solution behaves as `m * exp(-kappa r)` at
/// large distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundState {
    pub kappa: f64,
    pub m: f64,
}

// One fourth-order step of the coupled (u, u') system. The potential is
// sampled just inside both step ends, so a jump sitting exactly on a grid
// point contributes its one-sided limits.
fn rk4_step(potential: &Potential, energy: f64, r: f64, w: f64, u: f64, v: f64) -> (f64, f64) {
    let g_start = potential.value(r + 1e-9 * w) - energy;
    let g_mid = potential.value(r + 0.5 * w) - energy;
    let g_end = potential.value(r + w - 1e-9 * w) - energy;

    let k1u = v;
    let k1v = g_start * u;
    let k2u = v + 0.5 * w * k1v;
    let k2v = g_mid * (u + 0.5 * w * k1u);
    let k3u = v + 0.5 * w * k2v;
    let k3v = g_mid * (u + 0.5 * w * k2u);
    let k4u = v + w * k3v;
    let k4v = g_end * (u + w * k3u);

    (
        u + w / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
        v + w / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    )
}

struct Propagation {
    u: f64,
    du: f64,
    nodes: usize,
}

// Regular solution from u(0) = 0, u'(0) = 1 out to r_end. When a trace is
// requested it receives u at every grid point (r_end/steps spacing, steps
// even), rescaled consistently with the returned values.
fn propagate(
    potential: &Potential,
    energy: f64,
    r_end: f64,
    step_hint: f64,
    mut trace: Option<&mut Vec<f64>>,
) -> Propagation {
    let mut steps = ((r_end / step_hint).ceil() as usize).max(4);
    if steps % 2 == 1 {
        steps += 1;
    }
    let w = r_end / steps as f64;

    let mut u = 0.0;
    let mut v = 1.0;
    let mut nodes = 0;
    let mut prev_u = 0.0;
    if let Some(t) = trace.as_deref_mut() {
        t.clear();
        t.reserve(steps + 1);
        t.push(0.0);
    }
    for i in 0..steps {
        let r = i as f64 * w;
        let (nu, nv) = rk4_step(potential, energy, r, w, u, v);
        u = nu;
        v = nv;
        if u.abs() > RESCALE_LIMIT {
            u *= RESCALE_FACTOR;
            v *= RESCALE_FACTOR;
            prev_u *= RESCALE_FACTOR;
            if let Some(t) = trace.as_deref_mut() {
                for tv in t.iter_mut() {
                    *tv *= RESCALE_FACTOR;
                }
            }
        }
        if prev_u * u < 0.0 {
            nodes += 1;
        }
        prev_u = u;
        if let Some(t) = trace.as_deref_mut() {
            t.push(u);
        }
    }
    Propagation { u, du: v, nodes }
}

/// Regular solution `(u, u')` at `r_match` for energy `q^2`, by fixed-step
/// fourth-order integration from the origin.
pub fn integrate_radial(
    potential: &Potential,
    q: f64,
    r_match: f64,
    step: f64,
) -> Result<(f64, f64)> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::InvalidInput(format!(
            "momentum must be positive, got {q}"
        )));
    }
    if r_match < potential.cutoff() {
        return Err(Error::InvalidInput(format!(
            "matching radius {r_match} lies inside the potential cutoff {}",
            potential.cutoff()
        )));
    }
    if !(step > 0.0) || q * step >= 0.5 {
        return Err(Error::InvalidInput(format!(
            "integration step {step} too large for momentum {q}"
        )));
    }
    let p = propagate(potential, q * q, r_match, step, None);
    Ok((p.u, p.du))
}

fn default_step(q: f64) -> f64 {
    (0.1 / q).min(1e-3)
}

fn matching_radius(potential: &Potential) -> f64 {
    potential.cutoff() + 2.0
}

/// Scattering phase shift at momentum `q`, in `(-pi, pi]`.
pub fn phase_shift(potential: &Potential, q: f64) -> Result<f64> {
    phase_shift_with_step(potential, q, default_step(q))
}

/// [`phase_shift`] with an explicit integrator step, for convergence checks.
pub fn phase_shift_with_step(potential: &Potential, q: f64, step: f64) -> Result<f64> {
    let r_match = matching_radius(potential);
    let (u, du) = integrate_radial(potential, q, r_match, step)?;
    let (s, c) = (q * r_match).sin_cos();
    Ok(f64::atan2(q * u * c - du * s, du * c + q * u * s))
}

/// Phase shifts and S-matrix values on the given momentum grid.
pub fn s_matrix_table(potential: &Potential, q_grid: &[f64]) -> Result<PhaseShiftTable> {
    s_matrix_table_with_step(potential, q_grid, None)
}

/// [`s_matrix_table`] with an explicit integrator step bound.
pub fn s_matrix_table_with_step(
    potential: &Potential,
    q_grid: &[f64],
    step: Option<f64>,
) -> Result<PhaseShiftTable> {
    for (i, &q) in q_grid.iter().enumerate() {
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::InvalidInput(format!(
                "momentum grid entry {i} must be positive, got {q}"
            )));
        }
        if i > 0 && q <= q_grid[i - 1] {
            return Err(Error::NonMonotoneAbscissae { index: i });
        }
    }
    let mut entries = Vec::with_capacity(q_grid.len());
    for &q in q_grid {
        let effective = match step {
            Some(s) => s.min(default_step(q)),
            None => default_step(q),
        };
        let delta = phase_shift_with_step(potential, q, effective)?;
        entries.push(PhaseShiftEntry {
            q,
            delta,
            s: Complex64::from_polar(1.0, 2.0 * delta),
        });
    }
    Ok(PhaseShiftTable { entries })
}

fn node_count(potential: &Potential, kappa: f64, r_match: f64) -> usize {
    propagate(potential, -kappa * kappa, r_match, 1e-3, None).nodes
}

// amplitude of the growing exponential in the exterior solution, up to a
// positive factor: vanishes exactly at the decay constants once r_match is
// past the cutoff
fn tail_mismatch(potential: &Potential, kappa: f64, r_match: f64) -> f64 {
    let p = propagate(potential, -kappa * kappa, r_match, 1e-3, None);
    p.du + kappa * p.u
}

/// All bound states of the potential, deepest first.
///
/// Decay constants are bracketed by node counts of the regular solution,
/// then refined by bisecting the growing-tail amplitude at the matching
/// radius; each normalization constant comes from the unit-norm solution's
/// tail amplitude.
pub fn find_bound_states(potential: &Potential) -> Result<Vec<BoundState>> {
    let r_match = matching_radius(potential);

    // variational bound on the ground state: E >= min V
    let mut v_min = 0.0f64;
    let scan = 2048;
    for i in 0..=scan {
        let r = potential.cutoff() * i as f64 / scan as f64;
        v_min = v_min.min(potential.value(r));
    }
    if v_min >= 0.0 {
        return Ok(Vec::new());
    }
    let kappa_max = (-v_min).sqrt() + 1.0;

    let total = node_count(potential, KAPPA_FLOOR, r_match);

    // stage 1: the transition of the counted nodes brackets each decay
    // constant from below (the outermost node crosses r_match a little
    // before kappa reaches it)
    let mut lower = Vec::with_capacity(total);
    for j in 0..total {
        let mut lo = KAPPA_FLOOR;
        let mut hi = kappa_max;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if node_count(potential, mid, r_match) >= j + 1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lower.push(lo);
    }

    let mut states = Vec::with_capacity(total);
    for j in 0..total {
        // stage 2: exactly one decay constant lies between consecutive node
        // transitions, so the tail amplitude changes sign across it
        let mut lo = lower[j];
        let mut hi = if j == 0 { kappa_max } else { lower[j - 1] };
        let f_lo = tail_mismatch(potential, lo, r_match);
        if f_lo * tail_mismatch(potential, hi, r_match) > 0.0 {
            return Err(Error::InvalidInput(format!(
                "bound state refinement lost its bracket near kappa = {lo}"
            )));
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if f_lo * tail_mismatch(potential, mid, r_match) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let kappa = 0.5 * (lo + hi);

        let mut trace = Vec::new();
        let p = propagate(potential, -kappa * kappa, r_match, 1e-3, Some(&mut trace));
        let step = r_match / (trace.len() - 1) as f64;
        let interior: f64 = {
            let squared: Vec<f64> = trace.iter().map(|u| u * u).collect();
            numerics::simpson_from_samples(&squared, step)
        };
        // tail of the squared solution continued as exp(-2 kappa r)
        let norm = (interior + p.u * p.u / (2.0 * kappa)).sqrt();
        let m = (p.u.abs() / norm) * (kappa * r_match).exp();
        if !m.is_finite() || !(kappa > 0.0) {
            return Err(Error::InvalidInput(format!(
                "bound state search produced invalid state kappa={kappa} m={m}"
            )));
        }
        states.push(BoundState { kappa, m });
    }
    Ok(states)
}

/// Tail constant from the phase shift at the edge of the measured range:
/// `A = -q_edge * delta(q_edge)`, making `exp(-2iA/q)` match the S-matrix
/// exactly at the edge.
pub fn asymptotic_constant(table: &PhaseShiftTable, q_edge: f64) -> Result<f64> {
    table
        .entries
        .iter()
        .find(|e| (e.q - q_edge).abs() <= 1e-9)
        .map(|e| -q_edge * e.delta)
        .ok_or(Error::MissingEdgeEntry { q_edge })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn free() -> Potential {
        Potential::from_fn(|_| 0.0, 1.0).unwrap()
    }

    fn model() -> Potential {
        Potential::exponential(3.0, 1.5).unwrap()
    }

    #[test]
    fn free_solution_matches_sine() {
        let (u, du) = integrate_radial(&free(), 1.0, 3.0, 1e-3).unwrap();
        assert_abs_diff_eq!(du / u, 1.0 / 3.0f64.tan(), epsilon = 1e-8);
    }

    #[test]
    fn free_phase_shift_vanishes() {
        for q in [0.3, 1.0, 4.0] {
            assert!(phase_shift(&free(), q).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn square_well_log_derivative_matches_interior_solution() {
        let (depth, radius, q) = (2.0, 1.0, 1.3);
        let pot = Potential::square_well(depth, radius).unwrap();
        let (u, du) = integrate_radial(&pot, q, radius, 1e-3).unwrap();
        let kp = (q * q + depth).sqrt();
        assert_abs_diff_eq!(du / u, kp / (kp * radius).tan(), epsilon = 1e-8);
    }

    #[test]
    fn log_derivative_converges_under_step_halving() {
        let pot = model();
        let r = pot.cutoff() + 2.0;
        let (u1, du1) = integrate_radial(&pot, 1.0, r, 1e-3).unwrap();
        let (u2, du2) = integrate_radial(&pot, 1.0, r, 5e-4).unwrap();
        assert_abs_diff_eq!(du1 / u1, du2 / u2, epsilon = 1e-8);
    }

    fn analytic_well_phase(depth: f64, radius: f64, q: f64) -> f64 {
        let kp = (q * q + depth).sqrt();
        -q * radius + ((q / kp) * (kp * radius).tan()).atan()
    }

    // compares phases modulo pi through the S-matrix
    fn phase_distance(a: f64, b: f64) -> f64 {
        let sa = Complex64::from_polar(1.0, 2.0 * a);
        let sb = Complex64::from_polar(1.0, 2.0 * b);
        (sa - sb).norm() / 2.0
    }

    #[test]
    fn square_well_phase_matches_analytic_formula() {
        let pot = Potential::square_well(2.0, 1.0).unwrap();
        for q in [0.1, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let num = phase_shift(&pot, q).unwrap();
            let exact = analytic_well_phase(2.0, 1.0, q);
            assert!(
                phase_distance(num, exact) < 1e-6,
                "q={q}: {num} vs {exact}"
            );
        }
    }

    #[test]
    fn model_phase_is_small_positive_at_high_momentum() {
        let pot = model();
        let d8 = phase_shift(&pot, 8.0).unwrap();
        let d1 = phase_shift(&pot, 1.0).unwrap();
        // attractive potential: positive phase shift, shrinking with q
        assert!(d8 > 0.0 && d8 < 0.2, "delta(8) = {d8}");
        assert!(d8.abs() < d1.abs());
        let refined = phase_shift_with_step(&pot, 8.0, 5e-4).unwrap();
        assert_abs_diff_eq!(d8, refined, epsilon = 1e-7);
    }

    #[test]
    fn table_is_unit_modulus_and_ordered() {
        let pot = model();
        let grid: Vec<f64> = (1..=10).map(|i| 0.8 * i as f64).collect();
        let table = s_matrix_table(&pot, &grid).unwrap();
        assert_eq!(table.entries.len(), 10);
        for e in &table.entries {
            assert!((e.s.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn table_rejects_bad_grids() {
        let pot = free();
        assert!(s_matrix_table(&pot, &[1.0, 1.0]).is_err());
        assert!(s_matrix_table(&pot, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn single_point_grid_gives_single_entry() {
        let table = s_matrix_table(&free(), &[2.0]).unwrap();
        assert_eq!(table.entries.len(), 1);
        assert!(table.entries[0].delta.abs() < 1e-10);
    }

    #[test]
    fn free_potential_has_no_bound_states() {
        assert!(find_bound_states(&free()).unwrap().is_empty());
    }

    #[test]
    fn model_potential_has_no_bound_states() {
        assert!(find_bound_states(&model()).unwrap().is_empty());
    }

    // root of kp*cos(kp a) + kappa*sin(kp a) with kp = sqrt(depth - kappa^2),
    // pole-free form of the square-well eigenvalue condition
    fn well_eigen_kappa(depth: f64, radius: f64) -> f64 {
        let f = |kappa: f64| {
            let kp = (depth - kappa * kappa).sqrt();
            kp * (kp * radius).cos() + kappa * (kp * radius).sin()
        };
        let (mut lo, mut hi) = (1e-6, depth.sqrt() - 1e-6);
        assert!(f(lo) * f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn square_well_bound_state_matches_analytic_values() {
        let (depth, radius) = (4.0, 2.0);
        let pot = Potential::square_well(depth, radius).unwrap();
        let states = find_bound_states(&pot).unwrap();
        assert_eq!(states.len(), 1);
        let kappa = well_eigen_kappa(depth, radius);
        assert_abs_diff_eq!(states[0].kappa, kappa, epsilon = 1e-6);

        // analytic normalization: u = sin(kp r) inside, matched tail outside
        let kp = (depth - kappa * kappa).sqrt();
        let interior = radius / 2.0 - (2.0 * kp * radius).sin() / (4.0 * kp);
        let tail = (kp * radius).sin().powi(2) / (2.0 * kappa);
        let m = (kp * radius).sin().abs() / (interior + tail).sqrt() * (kappa * radius).exp();
        assert!(
            (states[0].m - m).abs() / m < 1e-5,
            "m = {} vs analytic {m}",
            states[0].m
        );
    }

    #[test]
    fn deeper_well_orders_states_deepest_first() {
        let pot = Potential::square_well(12.0, 2.0).unwrap();
        let states = find_bound_states(&pot).unwrap();
        assert_eq!(states.len(), 2);
        assert!(states[0].kappa > states[1].kappa);
        for s in &states {
            assert!(s.m > 0.0 && s.m.is_finite());
        }
    }

    #[test]
    fn asymptotic_constant_follows_edge_phase() {
        let table = PhaseShiftTable {
            entries: vec![PhaseShiftEntry {
                q: 8.0,
                delta: -0.05,
                s: Complex64::from_polar(1.0, -0.1),
            }],
        };
        assert_abs_diff_eq!(asymptotic_constant(&table, 8.0).unwrap(), 0.4);
        assert!(matches!(
            asymptotic_constant(&table, 4.0).unwrap_err(),
            Error::MissingEdgeEntry { .. }
        ));
    }

    #[test]
    fn zero_phase_gives_zero_tail_constant() {
        let table = s_matrix_table(&free(), &[1.0, 2.0]).unwrap();
        assert!(asymptotic_constant(&table, 2.0).unwrap().abs() < 1e-10);
    }

    #[test]
    fn model_tail_constant_is_near_born_value() {
        // first-order estimate: half the integral of V over all radii = -1
        let pot = model();
        let table = s_matrix_table(&pot, &[8.0]).unwrap();
        let a = asymptotic_constant(&table, 8.0).unwrap();
        assert!((a + 1.0).abs() <= 0.15, "A = {a}");
    }

    #[test]
    fn tabulated_potential_interpolates_linearly() {
        let pot = Potential::tabulated(vec![(0.0, -2.0), (1.0, -1.0), (2.0, 0.0)]).unwrap();
        assert_abs_diff_eq!(pot.value(0.5), -1.5);
        assert_abs_diff_eq!(pot.value(1.5), -0.5);
        assert_eq!(pot.value(3.0), 0.0);
        assert_eq!(pot.cutoff(), 2.0);
    }

    #[test]
    fn tabulated_zeros_scatter_trivially() {
        let pot = Potential::tabulated(vec![(0.0, 0.0), (1.0, 0.0)]).unwrap();
        assert!(phase_shift(&pot, 2.0).unwrap().abs() < 1e-10);
        assert!(find_bound_states(&pot).unwrap().is_empty());
    }
}
