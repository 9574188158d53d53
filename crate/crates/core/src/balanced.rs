//! Dynamics on the space of diagonal metrics: the Donaldson fixed-point
//! iteration towards anti-canonically balanced metrics, Bergman geodesic
//! rays `H_t = e^{-tA} H`, and slope measurements along them.


use serde::{Deserialize, Serialize};

use crate::analysis::density::lq_norm_b;
use crate::analysis::potential::ToricPotential;
use crate::analysis::quadrature::QuadratureSpec;
use crate::error::{Error, Result};
use crate::functionals::{ding_derivative, softmax_moments, DiagonalHermitian, FunctionalContext};
use crate::invariants::{chow_weight, donaldson_futaki, p_norm, quantized_futaki};
use crate::rational::{format_rational, to_f64};
use crate::testconfig::ToricTestConfig;

/// Damping factor of the fallback iteration.
pub const DAMPING: f64 = 0.5;

/// Record of a fixed-point run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub polytope: String,
    pub k: u32,
    pub iterations: usize,
    /// `||M_bar(H_j)||_inf` per iterate.
    pub residuals: Vec<f64>,
    /// `max_b |h_{j+1}/h_j - 1|` per step.
    pub changes: Vec<f64>,
    /// `D^(k)(H_j)` per iterate.
    pub ding: Vec<f64>,
    /// Steps at which `D^(k)` increased by more than `1e-10`.
    pub ding_increases: Vec<usize>,
    /// Iteration index at which the damped update took over, if it did.
    pub damped_from: Option<usize>,
    pub converged: bool,
    /// Determinant-one entries of the last iterate whose residual was measured.
    pub final_h: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_seconds: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BalanceResult {
    pub h: DiagonalHermitian,
    pub trace: IterationTrace,
}

/// Wall clock, absent on `wasm32-unknown-unknown` where `Instant` panics.
struct Stopwatch(#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Self(
            #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
            std::time::Instant::now(),
        )
    }

    fn seconds(&self) -> Option<f64> {
        #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
        return Some(self.0.elapsed().as_secs_f64());
        #[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
        None
    }
}

/// Iterates `H -> normalize(hilb(fs(H)))` until the relative change drops
/// below `tol` and `||M_bar||_inf < 10 tol k^n / N`.
///
/// Switches permanently to the damped update
/// `H^{1-theta} (hilb fs H)^theta` once the residual stops decreasing.
pub fn donaldson_iterate(
    ctx: &FunctionalContext,
    h_init: &DiagonalHermitian,
    tol: f64,
    max_iter: usize,
    spec: &QuadratureSpec,
) -> Result<BalanceResult> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Mismatch(format!("tolerance must be positive, got {tol}")));
    }
    let start = Stopwatch::start();
    let n = h_init.len() as f64;
    let kn = (ctx.k() as f64).powi(ctx.polytope().dim() as i32);
    let residual_tol = 10.0 * tol * kn / n;
    let mut h = h_init.det_normalized();
    let mut trace = IterationTrace {
        polytope: ctx.polytope().name().to_string(),
        k: ctx.k(),
        iterations: 0,
        residuals: vec![],
        changes: vec![],
        ding: vec![],
        ding_increases: vec![],
        damped_from: None,
        converged: false,
        final_h: h.entries().to_vec(),
        wall_seconds: None,
    };
    for j in 0..max_iter {
        let moments = softmax_moments(&h, spec)?;
        let residual = moments.m_matrix(&h).residual();
        let ding = -ctx.quantized_energy(&h)? + moments.ding_l();
        if let Some(prev) = trace.ding.last() {
            if ding > prev + 1e-10 {
                trace.ding_increases.push(j);
            }
        }
        if trace.damped_from.is_none() && j >= 2 && residual >= trace.residuals[j - 1] {
            trace.damped_from = Some(j);
        }
        trace.residuals.push(residual);
        trace.ding.push(ding);
        trace.final_h = h.entries().to_vec();
        trace.iterations = j + 1;

        let target = moments.hilb_entries(&h);
        let next_entries: Vec<f64> = if trace.damped_from.is_some() {
            h.entries().iter().zip(&target).map(|(a, b)| a.powf(1.0 - DAMPING) * b.powf(DAMPING)).collect()
        } else {
            target
        };
        let next = h.with_entries(next_entries)?.det_normalized();
        let change = next
            .entries()
            .iter()
            .zip(h.entries())
            .map(|(a, b)| (a / b - 1.0).abs())
            .fold(0.0, f64::max);
        trace.changes.push(change);
        if change < tol && residual < residual_tol {
            trace.converged = true;
            trace.wall_seconds = start.seconds();
            return Ok(BalanceResult { h, trace });
        }
        h = next;
    }
    trace.wall_seconds = start.seconds();
    let residual = trace.residuals.last().copied().unwrap_or(f64::NAN);
    Err(Error::NonConvergence { iterations: max_iter, residual, trace: Box::new(trace) })
}

/// `H_t = e^{-tA} H` for the diagonal generator with the given weights.
pub fn bergman_ray(h: &DiagonalHermitian, weights: &[f64], t: f64) -> Result<DiagonalHermitian> {
    if weights.len() != h.len() {
        return Err(Error::Mismatch(format!("{} weights for {} basis elements", weights.len(), h.len())));
    }
    h.with_entries(h.entries().iter().zip(weights).map(|(hb, w)| hb * (-t * w).exp()).collect())
}

fn check_config(h: &DiagonalHermitian, tc: &ToricTestConfig) -> Result<Vec<f64>> {
    if tc.k() != h.k() || tc.polytope().lattice_points(1) != h.polytope().lattice_points(1) {
        return Err(Error::Mismatch("test configuration and metric live on different section spaces".into()));
    }
    Ok(tc.generator().weights_f64())
}

/// A uniform grid `0, step, ..., t_max`.
pub fn time_grid(t_max: f64, step: f64) -> Vec<f64> {
    let n = (t_max / step).round() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// Ding slope along the Bergman ray of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub config: String,
    pub t: Vec<f64>,
    /// `(d/dt) D^(k)(H_t)`.
    pub d: Vec<f64>,
    /// `d(t_max)`, a lower bound for the limit by convexity.
    pub s_inf: f64,
    /// `d(t_max) - d(t_max - step)`.
    pub bracket: f64,
    /// `Fut_k / (k N_k)`, exact and as a float.
    pub invariant_side: String,
    pub invariant_side_f64: f64,
    /// `Fut_k/(k N_k) - s_inf`.
    pub q_est: f64,
}

pub fn slope_at_infinity(h: &DiagonalHermitian, tc: &ToricTestConfig, t_grid: &[f64]) -> Result<SlopeReport> {
    let weights = check_config(h, tc)?;
    if t_grid.len() < 2 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Mismatch("time grid must be increasing with at least two points".into()));
    }
    let dim = h.polytope().dim();
    let mut d = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let ht = bergman_ray(h, &weights, t)?;
        let dt = ding_derivative(&ht, &weights, &QuadratureSpec::for_time(dim, t))?;
        if let Some(&prev) = d.last() {
            let drop: f64 = prev - dt;
            if drop > 1e-8 {
                return Err(Error::NonMonotone { t, drop });
            }
        }
        d.push(dt);
    }
    let fut = quantized_futaki(tc)?;
    let n_k = tc.polytope().ehrhart_count(tc.k() as u64) as i64;
    let side = fut / crate::rational::rat(tc.k() as i64 * n_k);
    let side_f = to_f64(&side);
    let s_inf = *d.last().expect("nonempty");
    Ok(SlopeReport {
        config: describe(tc),
        t: t_grid.to_vec(),
        bracket: s_inf - d[d.len() - 2],
        s_inf,
        invariant_side: format_rational(&side),
        invariant_side_f64: side_f,
        q_est: side_f - s_inf,
        d,
    })
}

pub(crate) fn describe(tc: &ToricTestConfig) -> String {
    format!("{} k={} g={}", tc.polytope().name(), tc.k(), tc.g())
}

/// Balancing energy along the Bergman ray of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZLimitReport {
    pub config: String,
    pub t: Vec<f64>,
    pub z: Vec<f64>,
    /// `dZ_k/dt` from the exact first variation.
    pub dz: Vec<f64>,
    /// `Z_k(H_{t_max})` with its Cauchy bracket.
    pub limit_estimate: f64,
    pub bracket: f64,
    /// `dZ_k/dt` at `t_max`.
    pub slope_estimate: f64,
    /// `((-K)^n / n!) k^{n+1} Chow_k`.
    pub target: String,
    pub target_f64: f64,
}

pub fn z_limit(ctx: &FunctionalContext, h: &DiagonalHermitian, tc: &ToricTestConfig, t_grid: &[f64]) -> Result<ZLimitReport> {
    let weights = check_config(h, tc)?;
    if t_grid.len() < 2 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Mismatch("time grid must be increasing with at least two points".into()));
    }
    let dim = h.polytope().dim();
    let (mut z, mut dz) = (vec![], vec![]);
    for &t in t_grid {
        let ht = bergman_ray(h, &weights, t)?;
        let spec = QuadratureSpec::for_time(dim, t);
        z.push(ctx.suite(&ht, &spec)?.zk);
        dz.push(ctx.balancing_derivative(&ht, &weights, &spec)?);
    }
    let n = dim as u32;
    let fact: i64 = (1..=n as i64).product();
    let target = tc.polytope().anticanonical_degree() / crate::rational::rat(fact)
        * crate::rational::rat((tc.k() as i64).pow(n + 1))
        * chow_weight(tc)?;
    let last = z.len() - 1;
    Ok(ZLimitReport {
        config: describe(tc),
        t: t_grid.to_vec(),
        limit_estimate: z[last],
        bracket: z[last] - z[last - 1],
        slope_estimate: dz[last],
        target_f64: to_f64(&target),
        target: format_rational(&target),
        z,
        dz,
    })
}

/// `||B(u)||_{L^q} >= -DF / ||tc||_p` with `q = p/(p-1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub config: String,
    pub p: u32,
    pub q: f64,
    pub df: String,
    pub p_norm: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
}

pub fn lower_bound_check(u: &ToricPotential, tc: &ToricTestConfig, p: u32, spec: &QuadratureSpec) -> Result<LowerBound> {
    let norm = p_norm(tc, p)?;
    let df = donaldson_futaki(tc)?;
    let q = p as f64 / (p as f64 - 1.0);
    let lhs = lq_norm_b(u, tc.polytope(), q, spec)?.value;
    let rhs = -to_f64(&df) / norm.value;
    let margin = lhs - rhs;
    Ok(LowerBound {
        config: describe(tc),
        p,
        q,
        df: format_rational(&df),
        p_norm: norm.value,
        lhs,
        rhs,
        margin,
        holds: margin >= -1e-6,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticePolytope;
    use crate::testconfig::PLConvexFunction;

    #[test]
    fn ray_semigroup() {
        let h = DiagonalHermitian::identity(LatticePolytope::p1(), 1);
        let w = [0.0, 0.0, -1.0];
        let one = bergman_ray(&h, &w, 1.0).unwrap();
        assert_eq!(one.entries()[0], 1.0);
        assert!((one.entries()[2] - std::f64::consts::E).abs() < 1e-15);
        let two = bergman_ray(&bergman_ray(&h, &w, 2.0).unwrap(), &w, 2.0).unwrap();
        let four = bergman_ray(&h, &w, 4.0).unwrap();
        assert!((two.entries()[2] / four.entries()[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn iteration_finds_p1_balanced_metric() {
        let p1 = LatticePolytope::p1();
        let ctx = FunctionalContext::new(p1.clone(), 1).unwrap();
        let spec = QuadratureSpec::new(1);
        let r = donaldson_iterate(&ctx, &DiagonalHermitian::identity(p1.clone(), 1), 1e-10, 200, &spec).unwrap();
        let want = DiagonalHermitian::new(p1, 1, vec![2.0, 1.0, 2.0]).unwrap();
        assert!(r.h.distance_up_to_scale(&want) < 1e-8);
        assert!(r.trace.ding_increases.is_empty());
        let again = donaldson_iterate(&ctx, &r.h, 1e-10, 200, &spec).unwrap();
        assert!(again.trace.iterations <= 2);
    }

    #[test]
    fn trivial_configuration_has_flat_slope() {
        let p1 = LatticePolytope::p1();
        let tc = ToricTestConfig::new(p1.clone(), 1, PLConvexFunction::zero(1)).unwrap();
        let r = slope_at_infinity(&DiagonalHermitian::identity(p1, 1), &tc, &time_grid(20.0, 10.0)).unwrap();
        assert!(r.d.iter().all(|d| d.abs() < 1e-14));
    }

    #[test]
    fn mismatched_level_is_rejected() {
        let p1 = LatticePolytope::p1();
        let tc = ToricTestConfig::new(p1.clone(), 2, PLConvexFunction::kink(&[1])).unwrap();
        assert!(slope_at_infinity(&DiagonalHermitian::identity(p1, 1), &tc, &[0.0, 1.0]).is_err());
    }
}
