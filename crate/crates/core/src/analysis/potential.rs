//! Log-sum-exp potentials `u(x) = (1/k) log((1/N) sum_b e^{<b,x>} / h_b) + c`
//! on `R^n`, together with numerically stable derivatives.

use crate::error::{Error, Result};
use crate::lattice::{LatticePoint, LatticePolytope};

/// A Fubini–Study potential of a diagonal Hermitian metric.
#[derive(Debug, Clone, PartialEq)]
pub struct ToricPotential {
    k: u32,
    dim: usize,
    points: Vec<[f64; 2]>,
    /// `-log h_b - log N`.
    log_coeffs: Vec<f64>,
    shift: f64,
}

/// Value and derivatives of a potential at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: [f64; 2],
    /// Hessian as `[u_xx, u_xy, u_yy]`; only `u_xx` is used in dimension one.
    pub hess: [f64; 3],
    /// `det D^2 u`.
    pub det: f64,
}

impl ToricPotential {
    /// Potential of the metric `h` (indexed like `polytope.lattice_points(k)`)
    /// plus a constant `shift`.
    pub fn new(polytope: &LatticePolytope, k: u32, h: &[f64], shift: f64) -> Result<Self> {
        let basis = polytope.lattice_points(k as u64);
        Self::from_basis(polytope.dim(), k, &basis, h, shift)
    }

    pub fn from_basis(dim: usize, k: u32, basis: &[LatticePoint], h: &[f64], shift: f64) -> Result<Self> {
        if basis.len() != h.len() {
            return Err(Error::Mismatch(format!("{} basis elements but {} metric entries", basis.len(), h.len())));
        }
        if let Some(bad) = h.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Mismatch(format!("metric entries must be positive and finite, got {bad}")));
        }
        let ln_n = (h.len() as f64).ln();
        let points = basis
            .iter()
            .map(|b| [b[0] as f64, if dim > 1 { b[1] as f64 } else { 0.0 }])
            .collect();
        let log_coeffs = h.iter().map(|v| -v.ln() - ln_n).collect();
        Ok(Self { k, dim, points, log_coeffs, shift })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    /// `-log h_b - log N`, the additive constants of the exponents.
    pub fn log_coeffs(&self) -> &[f64] {
        &self.log_coeffs
    }

    /// The same potential plus a constant.
    pub fn shifted(&self, c: f64) -> Self {
        Self { shift: self.shift + c, ..self.clone() }
    }

    fn exponent(&self, i: usize, x: &[f64; 2]) -> f64 {
        let b = &self.points[i];
        b[0] * x[0] + b[1] * x[1] + self.log_coeffs[i]
    }

    /// Writes the softmax weights `p_b(x)` into `p` and returns the
    /// log-sum-exp `sum` so that `u = sum / k + shift`.
    pub fn softmax_into(&self, x: &[f64; 2], p: &mut [f64]) -> f64 {
        let mut max = f64::NEG_INFINITY;
        for (i, pi) in p.iter_mut().enumerate() {
            *pi = self.exponent(i, x);
            max = max.max(*pi);
        }
        let mut total = 0.0;
        for pi in p.iter_mut() {
            *pi = (*pi - max).exp();
            total += *pi;
        }
        p.iter_mut().for_each(|pi| *pi /= total);
        max + total.ln()
    }

    pub fn value(&self, x: &[f64; 2]) -> f64 {
        let mut p = vec![0.0; self.len()];
        self.softmax_into(x, &mut p) / self.k as f64 + self.shift
    }

    /// Full jet at `x`; `p` is scratch space of length `len()`.
    pub fn jet_with(&self, x: &[f64; 2], p: &mut [f64]) -> Jet {
        let lse = self.softmax_into(x, p);
        let k = self.k as f64;
        // Center at the dominant exponent so the covariance is a sum of
        // small positive terms minus a second-order correction.
        let top = p
            .iter()
            .enumerate()
            .fold(0, |best, (i, &v)| if v > p[best] { i } else { best });
        let c = self.points[top];
        let (mut m0, mut m1) = (0.0, 0.0);
        let (mut s00, mut s01, mut s11) = (0.0, 0.0, 0.0);
        for (b, &pi) in self.points.iter().zip(p.iter()) {
            let d0 = b[0] - c[0];
            let d1 = b[1] - c[1];
            m0 += pi * d0;
            m1 += pi * d1;
            s00 += pi * d0 * d0;
            s01 += pi * d0 * d1;
            s11 += pi * d1 * d1;
        }
        let c00 = (s00 - m0 * m0).max(0.0);
        let c01 = s01 - m0 * m1;
        let c11 = (s11 - m1 * m1).max(0.0);
        let grad = [(c[0] + m0) / k, (c[1] + m1) / k];
        let det_cov = if self.dim == 1 {
            c00
        } else {
            let direct = c00 * c11 - c01 * c01;
            if direct > 1e-6 * (c00 + c11).powi(2) {
                direct
            } else {
                self.det_cov_pairwise(p)
            }
        };
        Jet {
            value: lse / k + self.shift,
            grad,
            hess: [c00 / k, c01 / k, c11 / k],
            det: det_cov / k.powi(self.dim as i32),
        }
    }

    pub fn jet(&self, x: &[f64; 2]) -> Jet {
        let mut p = vec![0.0; self.len()];
        self.jet_with(x, &mut p)
    }

    /// `det Cov_p` as the cancellation-free sum over triangles
    /// `sum_{i<j<l} p_i p_j p_l A_ijl^2` (2D only).
    fn det_cov_pairwise(&self, p: &[f64]) -> f64 {
        let pmax = p.iter().cloned().fold(0.0, f64::max);
        let live: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 1e-30 * pmax).collect();
        let mut det = 0.0;
        for (a, &i) in live.iter().enumerate() {
            for (b, &j) in live.iter().enumerate().skip(a + 1) {
                let pij = p[i] * p[j];
                let (ex, ey) = (self.points[j][0] - self.points[i][0], self.points[j][1] - self.points[i][1]);
                for &l in &live[b + 1..] {
                    let fx = self.points[l][0] - self.points[i][0];
                    let fy = self.points[l][1] - self.points[i][1];
                    let cross = ex * fy - ey * fx;
                    det += pij * p[l] * cross * cross;
                }
            }
        }
        det
    }

    /// Slacks `<grad u, nu> + c` of the gradient against each facet, computed
    /// as averages of the nonnegative lattice slacks so that they never
    /// round to negative values.
    pub fn facet_slacks(&self, polytope: &LatticePolytope, x: &[f64; 2]) -> Vec<f64> {
        let mut p = vec![0.0; self.len()];
        self.softmax_into(x, &mut p);
        let k = self.k as f64;
        polytope
            .facets()
            .iter()
            .map(|f| {
                let nu = [f.normal[0] as f64, f.normal.get(1).copied().unwrap_or(0) as f64];
                let off = f.offset as f64;
                self.points
                    .iter()
                    .zip(&p)
                    .map(|(b, pi)| pi * (b[0] * nu[0] + b[1] * nu[1] + k * off) / k)
                    .sum()
            })
            .collect()
    }

    /// Lower bound on the exponential decay rate of `e^{-u}`.
    pub fn decay_rate(&self, polytope: &LatticePolytope) -> f64 {
        polytope.inradius()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round() -> ToricPotential {
        ToricPotential::new(&LatticePolytope::p1(), 1, &[1.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0], 0.0).unwrap()
    }

    #[test]
    fn round_metric_closed_form() {
        let u = round();
        for x in [-30.0, -2.0, 0.0, 0.7, 15.0] {
            let j = u.jet(&[x, 0.0]);
            let c = (x / 2.0f64).cosh();
            assert!((j.value - 2.0 * (2.0 * c).ln()).abs() < 1e-12);
            assert!((j.grad[0] - (x / 2.0f64).tanh()).abs() < 1e-12);
            let want = 0.5 / (c * c);
            assert!((j.det - want).abs() <= 1e-12 * want, "x={x}");
        }
    }

    #[test]
    fn gradient_matches_differences() {
        let h: Vec<f64> = (0..10).map(|i| 1.0 + 0.1 * i as f64).collect();
        let u = ToricPotential::new(&LatticePolytope::p2(), 1, &h, 0.3).unwrap();
        let x = [0.4, -0.8];
        let j = u.jet(&x);
        let e = 1e-5;
        for axis in 0..2 {
            let mut a = x;
            let mut b = x;
            a[axis] += e;
            b[axis] -= e;
            let fd = (u.value(&a) - u.value(&b)) / (2.0 * e);
            assert!((fd - j.grad[axis]).abs() < 1e-8);
        }
        let mut a = x;
        let mut b = x;
        a[0] += e;
        b[0] -= e;
        let fd = (u.jet(&a).grad[1] - u.jet(&b).grad[1]) / (2.0 * e);
        assert!((fd - j.hess[1]).abs() < 1e-7);
    }

    #[test]
    fn pairwise_determinant_agrees() {
        let h = vec![1.0; 10];
        let u = ToricPotential::new(&LatticePolytope::p2(), 1, &h, 0.0).unwrap();
        let mut p = vec![0.0; 10];
        let x = [0.3, 0.2];
        let j = u.jet_with(&x, &mut p);
        let direct = j.hess[0] * j.hess[2] - j.hess[1] * j.hess[1];
        assert!((u.det_cov_pairwise(&p) - direct).abs() < 1e-12);
        // Far along an edge the determinant stays positive.
        let far = u.jet(&[60.0, 25.0]);
        assert!(far.det > 0.0);
    }

    #[test]
    fn slacks_are_nonnegative() {
        let u = ToricPotential::new(&LatticePolytope::f1(), 2, &[1.0; 25], 0.0).unwrap();
        for x in [[0.0, 0.0], [80.0, -3.0], [-100.0, -100.0]] {
            assert!(u.facet_slacks(&LatticePolytope::f1(), &x).iter().all(|s| *s >= 0.0));
        }
    }

    #[test]
    fn rejects_bad_metrics() {
        let p1 = LatticePolytope::p1();
        assert!(ToricPotential::new(&p1, 1, &[1.0, 1.0], 0.0).is_err());
        assert!(ToricPotential::new(&p1, 1, &[1.0, 0.0, 1.0], 0.0).is_err());
    }
}
