//! Quantization maps and the energy functionals of the quantized Ding
//! picture, restricted to torus-invariant (diagonal) Hermitian metrics.
//!
//! Conventions: `fs(H) = (1/k) log((1/N) sum_b e^{<b,x>}/h_b)`,
//! `hilb(u)_b = int e^{<b,x> - k u} dmu_u` with `mu_u = e^{-u} dx / Z`,
//! `L(u) = -log Z`, and `E` is the Monge–Ampère energy normalized so that
//! `E(u_0 + c) = c (-K)^n`. The reference pair is `u_0 = fs(Id)` and
//! `H_0 = hilb(u_0)`.

use serde::{Deserialize, Serialize};

use crate::analysis::density::{ding_l, mu_expectations};
use crate::analysis::potential::ToricPotential;
use crate::analysis::quadrature::{integrate, integrate_many, QuadratureSpec};
use crate::error::{Error, Result};
use crate::lattice::{LatticePoint, LatticePolytope};
use crate::rational::to_f64;

/// A positive diagonal metric on the monomial basis of `kP`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalHermitian {
    polytope: LatticePolytope,
    k: u32,
    basis: Vec<LatticePoint>,
    entries: Vec<f64>,
}

impl DiagonalHermitian {
    pub fn new(polytope: LatticePolytope, k: u32, entries: Vec<f64>) -> Result<Self> {
        let basis = polytope.lattice_points(k as u64);
        if basis.len() != entries.len() {
            return Err(Error::Mismatch(format!(
                "{} lattice points in {}P but {} metric entries",
                basis.len(),
                k,
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
            return Err(Error::Mismatch(format!("metric entries must be positive and finite, got {bad}")));
        }
        Ok(Self { polytope, k, basis, entries })
    }

    pub fn identity(polytope: LatticePolytope, k: u32) -> Self {
        let n = polytope.ehrhart_count(k as u64) as usize;
        Self::new(polytope, k, vec![1.0; n]).expect("identity is positive")
    }

    pub fn polytope(&self) -> &LatticePolytope {
        &self.polytope
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn basis(&self) -> &[LatticePoint] {
        &self.basis
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { entries: self.entries.iter().map(|h| h * c).collect(), ..self.clone() }
    }

    pub fn with_entries(&self, entries: Vec<f64>) -> Result<Self> {
        Self::new(self.polytope.clone(), self.k, entries)
    }

    pub fn log_det(&self) -> f64 {
        self.entries.iter().map(|h| h.ln()).sum()
    }

    /// Rescaled to determinant one.
    pub fn det_normalized(&self) -> Self {
        let c = (-self.log_det() / self.len() as f64).exp();
        self.scaled(c)
    }

    /// `max_b |h_b / h'_b - 1|` after determinant-one normalization of both.
    pub fn distance_up_to_scale(&self, other: &Self) -> f64 {
        let a = self.det_normalized();
        let b = other.det_normalized();
        a.entries.iter().zip(&b.entries).map(|(x, y)| (x / y - 1.0).abs()).fold(0.0, f64::max)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.k != other.k || self.basis != other.basis {
            return Err(Error::Mismatch("metrics live on different section spaces".into()));
        }
        Ok(())
    }
}

/// Dequantization `fs(H)`.
pub fn fs(h: &DiagonalHermitian) -> ToricPotential {
    ToricPotential::from_basis(h.polytope.dim(), h.k, &h.basis, &h.entries, 0.0).expect("H is positive")
}

/// Quantization `hilb_k(u)` onto the sections of `kP`.
pub fn hilb(u: &ToricPotential, polytope: &LatticePolytope, k: u32, spec: &QuadratureSpec) -> Result<DiagonalHermitian> {
    let basis = polytope.lattice_points(k as u64);
    let entries = if k == u.k() && u.len() == basis.len() {
        // Same level: h_b = N h_b(u) e^{-k c} E_mu[p_b] with the softmax
        // weights p_b, which is stable far out in the tails.
        let ep = mu_expectations(u, polytope, spec, u.len(), |_, p, out| out.copy_from_slice(p))?;
        let kc = k as f64 * u.shift();
        u.log_coeffs().iter().zip(ep).map(|(lc, e)| (-lc - kc).exp() * e).collect()
    } else {
        let pts: Vec<[f64; 2]> =
            basis.iter().map(|b| [b[0] as f64, b.get(1).copied().unwrap_or(0) as f64]).collect();
        let kf = k as f64;
        mu_expectations(u, polytope, spec, basis.len(), |x, _, out| {
            let ku = kf * u.value(x);
            for (o, b) in out.iter_mut().zip(&pts) {
                *o = (b[0] * x[0] + b[1] * x[1] - ku).exp();
            }
        })?
    };
    DiagonalHermitian::new(polytope.clone(), k, entries)
}

fn mixed_discriminant(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    0.5 * (a[0] * b[2] + a[2] * b[0] - 2.0 * a[1] * b[1])
}

/// Monge–Ampère energy `E(u)` relative to `u0`:
/// `(1/(n+1)) sum_i int (u - u0) omega_u^{n-i} ^ omega_0^i`.
pub fn energy_e(u: &ToricPotential, u0: &ToricPotential, polytope: &LatticePolytope, spec: &QuadratureSpec) -> Result<f64> {
    let (n1, n0) = (u.len(), u0.len());
    let dim = polytope.dim();
    let r = integrate(spec, polytope.inradius(), |x| {
        let (mut p, mut q) = (vec![0.0; n1], vec![0.0; n0]);
        let j = u.jet_with(x, &mut p);
        let j0 = u0.jet_with(x, &mut q);
        let diff = j.value - j0.value;
        if dim == 1 {
            0.5 * diff * (j.hess[0] + j0.hess[0])
        } else {
            (2.0 / 3.0) * diff * (j.det + mixed_discriminant(&j.hess, &j0.hess) + j0.det)
        }
    })?;
    Ok(r.value())
}

/// `dE/dt` along `H_t = e^{-tA} H` at `t = 0`: `int udot n! det D^2 u dx` with
/// `udot = (1/k) sum_b w_b p_b`.
pub fn energy_derivative(h: &DiagonalHermitian, weights: &[f64], spec: &QuadratureSpec) -> Result<f64> {
    let u = fs(h);
    let n = u.len();
    let kf = h.k as f64;
    let fact: f64 = (1..=h.polytope.dim()).map(|i| i as f64).product();
    let r = integrate(spec, h.polytope.inradius(), |x| {
        let mut p = vec![0.0; n];
        let j = u.jet_with(x, &mut p);
        let udot: f64 = p.iter().zip(weights).map(|(pi, w)| pi * w).sum::<f64>() / kf;
        fact * udot * j.det
    })?;
    Ok(r.value())
}

/// The diagonal matrix `M(H)` and its trace-free part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MMatrix {
    pub m: Vec<f64>,
    pub m_bar: Vec<f64>,
}

impl MMatrix {
    pub fn residual(&self) -> f64 {
        self.m_bar.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// `M_bb = k^n E_mu[p_b]` for `mu = mu_{fs(H)}`; equivalently
/// `(k^n/N) hilb(fs H)_b / h_b`.
pub fn m_matrix(h: &DiagonalHermitian, spec: &QuadratureSpec) -> Result<MMatrix> {
    Ok(softmax_moments(h, spec)?.m_matrix(h))
}

/// `Z = int e^{-fs(H)} dx` and the softmax expectations `E_mu[p_b]`, the
/// raw material of `hilb(fs H)`, `M(H)` and `L(fs H)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxMoments {
    pub z: f64,
    pub expectations: Vec<f64>,
}

impl SoftmaxMoments {
    pub fn m_matrix(&self, h: &DiagonalHermitian) -> MMatrix {
        let kn = (h.k as f64).powi(h.polytope.dim() as i32);
        let m: Vec<f64> = self.expectations.iter().map(|e| kn * e).collect();
        let mean = kn / m.len() as f64;
        let m_bar = m.iter().map(|v| v - mean).collect();
        MMatrix { m, m_bar }
    }

    /// `hilb(fs H)_b = N h_b E_mu[p_b]`.
    pub fn hilb_entries(&self, h: &DiagonalHermitian) -> Vec<f64> {
        let n = h.len() as f64;
        h.entries.iter().zip(&self.expectations).map(|(hb, e)| n * hb * e).collect()
    }

    pub fn ding_l(&self) -> f64 {
        -self.z.ln()
    }
}

pub fn softmax_moments(h: &DiagonalHermitian, spec: &QuadratureSpec) -> Result<SoftmaxMoments> {
    let u = fs(h);
    let n = u.len();
    let r = integrate_many(spec, n + 1, h.polytope.inradius(), |x, out| {
        let lse = u.softmax_into(x, &mut out[1..]);
        let w = (-lse / u.k() as f64).exp();
        out[0] = w;
        out[1..].iter_mut().for_each(|v| *v *= w);
    })?;
    let z = r.values[0];
    if z.is_nan() || z <= 0.0 {
        return Err(Error::NumericalUnderflow { x: vec![0.0; h.polytope.dim()] });
    }
    Ok(SoftmaxMoments { z, expectations: r.values[1..].iter().map(|v| v / z).collect() })
}

/// `(d/dt) D^(k)(e^{-tA} H)` at `t = 0`, equal to `tr(A M_bar(H)) / k^{n+1}`.
pub fn ding_derivative(h: &DiagonalHermitian, weights: &[f64], spec: &QuadratureSpec) -> Result<f64> {
    if weights.len() != h.len() {
        return Err(Error::Mismatch(format!("{} weights for {} basis elements", weights.len(), h.len())));
    }
    let mm = m_matrix(h, spec)?;
    Ok(derivative_from_m(h, &mm, weights))
}

pub(crate) fn derivative_from_m(h: &DiagonalHermitian, mm: &MMatrix, weights: &[f64]) -> f64 {
    let kn1 = (h.k as f64).powi(h.polytope.dim() as i32 + 1);
    mm.m_bar.iter().zip(weights).map(|(m, w)| m * w).sum::<f64>() / kn1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValues {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "Ek")]
    pub ek: f64,
    #[serde(rename = "Zk")]
    pub zk: f64,
    #[serde(rename = "Dk")]
    pub dk: f64,
    pub reference_potential: String,
    pub reference_metric: String,
    pub quadrature: QuadratureSpec,
}

impl FunctionalValues {
    /// `D^(k) - D(fs H) - n!/(k^{n+1} (-K)^n) Z_k`, zero by construction.
    pub fn decomposition_defect(&self, n: usize, k: u32, degree: f64) -> f64 {
        let fact: f64 = (1..=n).map(|i| i as f64).product();
        self.dk - self.d - fact / ((k as f64).powi(n as i32 + 1) * degree) * self.zk
    }
}

/// Reference data for one `(P, k)`: `u_0 = fs(Id)` and `H_0 = hilb(u_0)`.
#[derive(Debug, Clone)]
pub struct FunctionalContext {
    polytope: LatticePolytope,
    k: u32,
    u0: ToricPotential,
    h0: DiagonalHermitian,
    degree: f64,
}

impl FunctionalContext {
    pub fn new(polytope: LatticePolytope, k: u32) -> Result<Self> {
        let id = DiagonalHermitian::identity(polytope.clone(), k);
        let u0 = fs(&id);
        let h0 = hilb(&u0, &polytope, k, &QuadratureSpec::new(polytope.dim()))?;
        let degree = to_f64(&polytope.anticanonical_degree());
        Ok(Self { polytope, k, u0, h0, degree })
    }

    pub fn polytope(&self) -> &LatticePolytope {
        &self.polytope
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn u0(&self) -> &ToricPotential {
        &self.u0
    }

    pub fn h0(&self) -> &DiagonalHermitian {
        &self.h0
    }

    /// `(-K)^n = n! vol(P)`.
    pub fn degree(&self) -> f64 {
        self.degree
    }

    fn check(&self, h: &DiagonalHermitian) -> Result<()> {
        self.h0.check_compatible(h)
    }

    /// `E^(k)(H) = -(1/(kN)) log det(H H_0^{-1})`.
    pub fn quantized_energy(&self, h: &DiagonalHermitian) -> Result<f64> {
        self.check(h)?;
        let n = h.len() as f64;
        let s: f64 = h.entries.iter().zip(&self.h0.entries).map(|(a, b)| (a / b).ln()).sum();
        Ok(-s / (self.k as f64 * n))
    }

    pub fn energy(&self, u: &ToricPotential, spec: &QuadratureSpec) -> Result<f64> {
        energy_e(u, &self.u0, &self.polytope, spec)
    }

    /// `-E^(k)(H) + L(fs H)`; cheaper than the full suite.
    pub fn quantized_ding(&self, h: &DiagonalHermitian, spec: &QuadratureSpec) -> Result<f64> {
        Ok(-self.quantized_energy(h)? + ding_l(&fs(h), &self.polytope, spec)?)
    }

    fn balancing_scale(&self) -> f64 {
        let n = self.polytope.dim();
        let fact: f64 = (1..=n).map(|i| i as f64).product();
        self.degree / fact * (self.k as f64).powi(n as i32 + 1)
    }

    pub fn suite(&self, h: &DiagonalHermitian, spec: &QuadratureSpec) -> Result<FunctionalValues> {
        let u = fs(h);
        let ek = self.quantized_energy(h)?;
        let e = self.energy(&u, spec)?;
        let l = ding_l(&u, &self.polytope, spec)?;
        let d = -e / self.degree + l;
        let zk = self.balancing_scale() * (e / self.degree - ek);
        Ok(FunctionalValues {
            e,
            l,
            d,
            ek,
            zk,
            dk: -ek + l,
            reference_potential: "fs(Id)".into(),
            reference_metric: "hilb(fs(Id))".into(),
            quadrature: spec.clone(),
        })
    }

    /// `dZ_k/dt` along `e^{-tA} H` at `t = 0`.
    pub fn balancing_derivative(&self, h: &DiagonalHermitian, weights: &[f64], spec: &QuadratureSpec) -> Result<f64> {
        self.check(h)?;
        let de = energy_derivative(h, weights, spec)?;
        let dek = weights.iter().sum::<f64>() / (self.k as f64 * h.len() as f64);
        Ok(self.balancing_scale() * (de / self.degree - dek))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced_p1(k: u32) -> Vec<f64> {
        let f = |n: i64| (1..=n).map(|i| i as f64).product::<f64>();
        let k = k as i64;
        (-k..=k).map(|b| f(k + b) * f(k - b) / f(2 * k + 1)).collect()
    }

    fn round() -> ToricPotential {
        fs(&DiagonalHermitian::new(LatticePolytope::p1(), 1, balanced_p1(1)).unwrap())
    }

    #[test]
    fn hilb_of_round_metric() {
        let p1 = LatticePolytope::p1();
        let spec = QuadratureSpec::new(1);
        for k in 1..=3 {
            let h = hilb(&round(), &p1, k, &spec).unwrap();
            for (a, b) in h.entries().iter().zip(balanced_p1(k)) {
                assert!((a / b - 1.0).abs() < 1e-10, "k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn fs_of_balanced_is_round() {
        for k in 1..=3 {
            let u = fs(&DiagonalHermitian::new(LatticePolytope::p1(), k, balanced_p1(k)).unwrap());
            for x in [-20.0, -1.0, 0.0, 3.5] {
                let want = 2.0 * (2.0 * (x / 2.0f64).cosh()).ln();
                assert!((u.value(&[x, 0.0]) - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn fs_scaling_law() {
        let h = DiagonalHermitian::new(LatticePolytope::p1(), 2, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let (u, v) = (fs(&h), fs(&h.scaled(7.0)));
        let x = [0.3, 0.0];
        assert!((v.value(&x) - (u.value(&x) - 7f64.ln() / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn energy_normalization() {
        let p1 = LatticePolytope::p1();
        let ctx = FunctionalContext::new(p1.clone(), 1).unwrap();
        let spec = QuadratureSpec::new(1);
        assert!(ctx.energy(ctx.u0(), &spec).unwrap().abs() < 1e-14);
        let e = ctx.energy(&ctx.u0().shifted(1.0), &spec).unwrap();
        assert!((e - 2.0).abs() < 1e-10, "{e}");
        let p2 = LatticePolytope::p2();
        let ctx2 = FunctionalContext::new(p2, 1).unwrap();
        let e2 = ctx2.energy(&ctx2.u0().shifted(0.5), &QuadratureSpec::new(2)).unwrap();
        assert!((e2 - 4.5).abs() < 1e-6, "{e2}");
    }

    #[test]
    fn m_matrix_properties() {
        let p1 = LatticePolytope::p1();
        let spec = QuadratureSpec::new(1);
        let bal = DiagonalHermitian::new(p1.clone(), 1, balanced_p1(1)).unwrap();
        let mm = m_matrix(&bal, &spec).unwrap();
        assert!(mm.residual() < 1e-10);
        let h = DiagonalHermitian::new(p1, 1, vec![1.0, 10.0, 1.0]).unwrap();
        let mm = m_matrix(&h, &spec).unwrap();
        assert!(mm.residual() > 1e-3);
        assert!((mm.m_bar[0] - mm.m_bar[2]).abs() < 1e-12);
        assert!(mm.m_bar.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let p1 = LatticePolytope::p1();
        let ctx = FunctionalContext::new(p1.clone(), 1).unwrap();
        let spec = QuadratureSpec::new(1);
        let h = DiagonalHermitian::identity(p1, 1);
        let w = [0.0, 0.0, -1.0];
        let ray = |t: f64| h.with_entries(h.entries().iter().zip(&w).map(|(a, wi)| a * (-t * wi).exp()).collect()).unwrap();
        let e = 1e-4;
        let fd = (ctx.quantized_ding(&ray(e), &spec).unwrap() - ctx.quantized_ding(&ray(-e), &spec).unwrap()) / (2.0 * e);
        let d = ding_derivative(&h, &w, &spec).unwrap();
        assert!((fd - d).abs() < 1e-8, "{fd} vs {d}");
        let fz = (ctx.suite(&ray(e), &spec).unwrap().zk - ctx.suite(&ray(-e), &spec).unwrap().zk) / (2.0 * e);
        let dz = ctx.balancing_derivative(&h, &w, &spec).unwrap();
        assert!((fz - dz).abs() < 1e-7, "{fz} vs {dz}");
    }

    #[test]
    fn suite_identities() {
        let p2 = LatticePolytope::p2();
        let ctx = FunctionalContext::new(p2.clone(), 1).unwrap();
        let spec = QuadratureSpec::new(2);
        let h = DiagonalHermitian::new(p2, 1, (1..=10).map(|i| 0.5 + 0.1 * i as f64).collect()).unwrap();
        let v = ctx.suite(&h, &spec).unwrap();
        assert!(v.decomposition_defect(2, 1, ctx.degree()).abs() < 1e-10);
        let w = ctx.suite(&h.scaled(1e3), &spec).unwrap();
        assert!((v.dk - w.dk).abs() < 1e-10);
        assert!(ctx.quantized_energy(ctx.h0()).unwrap().abs() < 1e-15);
    }
}
