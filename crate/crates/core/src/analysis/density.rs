//! Measures attached to a potential: the normalized Ding measure
//! `mu_u = e^{-u} dx / Z`, the real Monge–Ampère measure and the
//! Kähler–Einstein defect `B`.
//!
//! Volume forms follow the toric dictionary `omega^n = n! det(D^2 u) dx`, so
//! the Monge–Ampère mass of any potential in the class is `n! vol(P)`, the
//! anticanonical degree. With that normalization
//! `B = e^{-u} / (Z det D^2 u) - 1/vol(P)`, which vanishes exactly for
//! Kähler–Einstein potentials and integrates to zero against `det D^2 u dx`.

use crate::error::{Error, Result};
use crate::lattice::LatticePolytope;
use crate::rational::to_f64;

use super::potential::ToricPotential;
use super::quadrature::{integrate, integrate_many, QuadratureSpec};

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `Z = int e^{-u} dx`.
pub fn partition_function(pot: &ToricPotential, polytope: &LatticePolytope, spec: &QuadratureSpec) -> Result<f64> {
    let r = integrate(spec, pot.decay_rate(polytope), |x| (-pot.value(x)).exp())?;
    if r.value().is_nan() || r.value() <= 0.0 {
        return Err(Error::NumericalUnderflow { x: vec![0.0; pot.dim()] });
    }
    Ok(r.value())
}

/// `L(u) = -log int e^{-u} dx`.
pub fn ding_l(pot: &ToricPotential, polytope: &LatticePolytope, spec: &QuadratureSpec) -> Result<f64> {
    Ok(-partition_function(pot, polytope, spec)?.ln())
}

/// Monge–Ampère density `n! det D^2 u`.
pub fn density_ma(pot: &ToricPotential, x: &[f64; 2]) -> f64 {
    factorial(pot.dim()) * pot.jet(x).det
}

/// Total Monge–Ampère mass `int n! det D^2 u dx`; equals `(-K)^n`.
pub fn ma_mass(pot: &ToricPotential, polytope: &LatticePolytope, spec: &QuadratureSpec) -> Result<f64> {
    let n = pot.len();
    let nf = factorial(pot.dim());
    let r = integrate(spec, pot.decay_rate(polytope), |x| {
        let mut p = vec![0.0; n];
        nf * pot.jet_with(x, &mut p).det
    })?;
    Ok(r.value())
}

/// Pointwise Kähler–Einstein defect, given `Z` and `vol(P)`.
pub fn b_value(pot: &ToricPotential, z: f64, volume: f64, x: &[f64; 2]) -> f64 {
    let j = pot.jet(x);
    b_from_jet(j.value, j.det, z, volume)
}

fn b_from_jet(u: f64, det: f64, z: f64, volume: f64) -> f64 {
    if det <= 0.0 {
        return f64::NAN;
    }
    (-u - z.ln() - det.ln()).exp() - 1.0 / volume
}

/// `||B||_{L^q} = (int |B|^q det D^2 u dx)^{1/q}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BNorm {
    pub q: f64,
    pub value: f64,
    pub z: f64,
    /// Largest `|B|` over the quadrature nodes.
    pub sup: f64,
}

pub fn lq_norm_b(pot: &ToricPotential, polytope: &LatticePolytope, q: f64, spec: &QuadratureSpec) -> Result<BNorm> {
    if q.is_nan() || q < 1.0 {
        return Err(Error::Mismatch(format!("L^q norm needs q >= 1, got {q}")));
    }
    let z = partition_function(pot, polytope, spec)?;
    let volume = to_f64(&polytope.volume());
    let n = pot.len();
    let r = integrate(spec, pot.decay_rate(polytope), |x| {
        let mut p = vec![0.0; n];
        let j = pot.jet_with(x, &mut p);
        let b = b_from_jet(j.value, j.det, z, volume);
        if b.is_finite() {
            b.abs().powf(q) * j.det
        } else {
            0.0
        }
    })?;
    let sup = super::quadrature::grid_points(&r.spec)
        .iter()
        .map(|x| b_value(pot, z, volume, x).abs())
        .filter(|b| b.is_finite())
        .fold(0.0, f64::max);
    Ok(BNorm { q, value: r.value().powf(1.0 / q), z, sup })
}

/// `E_mu[f]` for several integrands at once, with `mu = e^{-u} dx / Z`.
pub fn mu_expectations<F>(
    pot: &ToricPotential,
    polytope: &LatticePolytope,
    spec: &QuadratureSpec,
    width: usize,
    f: F,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64; 2], &[f64], &mut [f64]) + Sync + Send,
{
    let n = pot.len();
    let r = integrate_many(spec, width + 1, pot.decay_rate(polytope), |x, out| {
        let mut p = vec![0.0; n];
        let lse = pot.softmax_into(x, &mut p);
        let w = (-(lse / pot.k() as f64 + pot.shift())).exp();
        out[0] = w;
        f(x, &p, &mut out[1..]);
        out[1..].iter_mut().for_each(|v| *v *= w);
    })?;
    let z = r.values[0];
    Ok(r.values[1..].iter().map(|v| v / z).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round() -> ToricPotential {
        ToricPotential::new(&LatticePolytope::p1(), 1, &[1.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0], 0.0).unwrap()
    }

    #[test]
    fn round_metric_is_kahler_einstein() {
        let p1 = LatticePolytope::p1();
        let spec = QuadratureSpec::new(1);
        let u = round();
        assert!((partition_function(&u, &p1, &spec).unwrap() - 1.0).abs() < 1e-12);
        assert!((ma_mass(&u, &p1, &spec).unwrap() - 2.0).abs() < 1e-12);
        let b = lq_norm_b(&u, &p1, 2.0, &spec).unwrap();
        assert!(b.value < 1e-10 && b.sup < 1e-10, "{b:?}");
    }

    #[test]
    fn non_einstein_metric_has_defect() {
        let p1 = LatticePolytope::p1();
        let u = ToricPotential::new(&p1, 1, &[1.0, 1.0, 1.0], 0.0).unwrap();
        let b = lq_norm_b(&u, &p1, 2.0, &QuadratureSpec::new(1)).unwrap();
        assert!(b.value > 1e-3);
    }

    #[test]
    fn masses_in_two_dimensions() {
        for poly in [LatticePolytope::p2(), LatticePolytope::p1xp1(), LatticePolytope::f1()] {
            let n = poly.ehrhart_count(1) as usize;
            let u = ToricPotential::new(&poly, 1, &vec![1.0; n], 0.0).unwrap();
            let mass = ma_mass(&u, &poly, &QuadratureSpec::new(2)).unwrap();
            let want = to_f64(&poly.anticanonical_degree());
            assert!((mass - want).abs() < 1e-6 * want, "{}: {mass} vs {want}", poly.name());
        }
    }

    #[test]
    fn expectations_are_probabilities() {
        let p2 = LatticePolytope::p2();
        let u = ToricPotential::new(&p2, 1, &[1.0; 10], 0.0).unwrap();
        let e = mu_expectations(&u, &p2, &QuadratureSpec::new(2), 10, |_, p, out| out.copy_from_slice(p)).unwrap();
        assert!((e.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
