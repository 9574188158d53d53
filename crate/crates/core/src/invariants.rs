//! Exact invariants of toric test configurations: the dimension and weight
//! expansions, the Donaldson–Futaki invariant, Chow weights, quantized Futaki
//! invariants, `p`-norms and the higher Futaki coefficients of product
//! configurations.
//!
//! Everything is computed in exact rational arithmetic from lattice-point
//! sums. Polynomial fits are always over-determined by one sample so that a
//! non-polynomial input (a kink that does not cut `kmP` along lattice
//! hyperplanes) is reported as [`Error::InconsistentSamples`] instead of
//! silently producing a wrong answer.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{fit_polynomial, pow, RationalPolynomial};
use crate::rational::{format_rational, rat, to_f64, Rational};
use crate::testconfig::ToricTestConfig;

/// `N_km = sum a_i (km)^{n-i}` and `w_km = sum b_i (km)^{n+1-i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub a: Vec<Rational>,
    pub b: Vec<Rational>,
    pub dimension_poly: RationalPolynomial,
    pub weight_poly: RationalPolynomial,
}

impl Expansion {
    pub fn donaldson_futaki(&self) -> Rational {
        let (a0, a1) = (&self.a[0], &self.a[1]);
        let (b0, b1) = (&self.b[0], &self.b[1]);
        rat(2) * (a1 * b0 - a0 * b1) / (a0 * a0)
    }
}

fn samples<F>(m_start: u64, count: usize, f: F) -> Vec<(i64, Rational)>
where
    F: Fn(u64) -> Rational,
{
    (m_start..m_start + count as u64).map(|m| (m as i64, f(m))).collect()
}

/// Fits the dimension and weight polynomials from levels `m_start, m_start+1, ...`.
pub fn expansion_from(tc: &ToricTestConfig, m_start: u64) -> Result<Expansion> {
    let n = tc.polytope().dim();
    let k = rat(tc.k() as i64);
    let dims = samples(m_start, n + 2, |m| rat(tc.polytope().ehrhart_count(m * tc.k() as u64) as i64));
    let dimension_poly = fit_polynomial(&dims, n)?;
    let weights = samples(m_start, n + 3, |m| tc.total_weight(m));
    let weight_poly = fit_polynomial(&weights, n + 1)?;
    let a = (0..=n).map(|i| dimension_poly.coeff(n - i) / pow(&k, n - i)).collect();
    let b = (0..=n + 1).map(|i| weight_poly.coeff(n + 1 - i) / pow(&k, n + 1 - i)).collect();
    Ok(Expansion { a, b, dimension_poly, weight_poly })
}

pub fn expansion(tc: &ToricTestConfig) -> Result<Expansion> {
    expansion_from(tc, 1)
}

pub fn donaldson_futaki(tc: &ToricTestConfig) -> Result<Rational> {
    Ok(expansion(tc)?.donaldson_futaki())
}

/// `(DF, Chow_k)` from a single expansion.
pub fn df_and_chow(tc: &ToricTestConfig) -> Result<(Rational, Rational)> {
    let e = expansion(tc)?;
    Ok((e.donaldson_futaki(), chow_at_level(tc, &e, 1)))
}

/// `Chow_k = b_0/a_0 - w_k/(k N_k)` at the configuration's own exponent.
pub fn chow_weight(tc: &ToricTestConfig) -> Result<Rational> {
    let e = expansion(tc)?;
    Ok(chow_at_level(tc, &e, 1))
}

fn chow_at_level(tc: &ToricTestConfig, e: &Expansion, m: u64) -> Rational {
    let km = m * tc.k() as u64;
    let n_km = rat(tc.polytope().ehrhart_count(km) as i64);
    &e.b[0] / &e.a[0] - tc.total_weight(m) / (rat(km as i64) * n_km)
}

/// `Fut_k = k N_k (DF + Chow_k)`.
pub fn quantized_futaki(tc: &ToricTestConfig) -> Result<Rational> {
    let e = expansion(tc)?;
    let n_k = rat(tc.polytope().ehrhart_count(tc.k() as u64) as i64);
    Ok(rat(tc.k() as i64) * n_k * (e.donaldson_futaki() + chow_at_level(tc, &e, 1)))
}

/// `km * Chow_km`, which tends to `DF/2` as `m` grows.
pub fn chow_df_limit(tc: &ToricTestConfig, m: u64) -> Result<Rational> {
    let e = expansion(tc)?;
    Ok(rat((m * tc.k() as u64) as i64) * chow_at_level(tc, &e, m))
}

/// Leading asymptotics of `tr(A_km - (w_km/N_km) Id)^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PNorm {
    pub p: u32,
    /// Coefficient of `(km)^{n+p}`.
    pub leading: Rational,
    /// `leading^{1/p}`.
    pub value: f64,
}

/// The `p`-norm of a configuration for even `p`.
///
/// The trace itself is not polynomial in `m` (the mean `w_km/N_km` is a
/// ratio), so each power sum `S_j = sum_b w_b^j` is fitted separately and the
/// leading coefficient is assembled binomially with the mean replaced by its
/// limit `(b_0/a_0) km`.
pub fn p_norm(tc: &ToricTestConfig, p: u32) -> Result<PNorm> {
    if p == 0 || p % 2 == 1 {
        return Err(Error::OddExponent(p));
    }
    let n = tc.polytope().dim();
    let e = expansion(tc)?;
    let k = rat(tc.k() as i64);
    let minus_mean = -(&e.b[0] / &e.a[0]);
    let mut leading = Rational::zero();
    let mut binom = Rational::one();
    for j in 0..=p {
        let deg = n + j as usize;
        let sums = samples(1, deg + 2, |m| {
            tc.weights_at_level(m).weights.iter().map(|w| pow(w, j as usize)).sum()
        });
        let fit = fit_polynomial(&sums, deg)?;
        let lead = fit.coeff(deg) / pow(&k, deg);
        leading += &binom * pow(&minus_mean, (p - j) as usize) * lead;
        binom = binom * rat((p - j) as i64) / rat(j as i64 + 1);
    }
    if leading.is_zero() {
        return Err(Error::DegenerateNorm { p });
    }
    let value = to_f64(&leading).powf(1.0 / p as f64);
    Ok(PNorm { p, leading, value })
}

/// Higher Futaki coefficient `F_p = (n+1-p)! (a_0 b_p - a_p b_0) / a_0` of a
/// product configuration, `1 <= p <= n`.
pub fn higher_futaki(tc: &ToricTestConfig, p: usize) -> Result<Rational> {
    if !tc.is_product() {
        return Err(Error::NotProduct);
    }
    let n = tc.polytope().dim();
    if p == 0 || p > n {
        return Err(Error::Mismatch(format!("higher Futaki index {p} outside 1..={n}")));
    }
    let e = expansion(tc)?;
    let fact: i64 = (1..=(n + 1 - p) as i64).product();
    Ok(rat(fact) * (&e.a[0] * &e.b[p] - &e.a[p] * &e.b[0]) / &e.a[0])
}

/// Serializable summary of the exact invariants of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub polytope: String,
    pub k: u32,
    pub g: String,
    pub product: bool,
    pub n_k: u64,
    pub w_k: String,
    pub a: Vec<String>,
    pub b: Vec<String>,
    pub df: String,
    pub chow_k: String,
    pub fut_k: String,
    pub df_f64: f64,
    pub chow_k_f64: f64,
    pub fut_k_f64: f64,
    /// Sign of `Fut_k`: semistable at level `k` along this configuration iff `>= 0`.
    pub fut_k_nonnegative: bool,
}

impl InvariantReport {
    pub fn compute(tc: &ToricTestConfig) -> Result<Self> {
        let e = expansion(tc)?;
        let df = e.donaldson_futaki();
        let chow = chow_at_level(tc, &e, 1);
        let n_k = tc.polytope().ehrhart_count(tc.k() as u64);
        let fut = rat(tc.k() as i64) * rat(n_k as i64) * (&df + &chow);
        Ok(Self {
            polytope: tc.polytope().name().to_string(),
            k: tc.k(),
            g: tc.g().to_string(),
            product: tc.is_product(),
            n_k,
            w_k: format_rational(&tc.total_weight(1)),
            a: e.a.iter().map(format_rational).collect(),
            b: e.b.iter().map(format_rational).collect(),
            df: format_rational(&df),
            chow_k: format_rational(&chow),
            fut_k: format_rational(&fut),
            df_f64: to_f64(&df),
            chow_k_f64: to_f64(&chow),
            fut_k_f64: to_f64(&fut),
            fut_k_nonnegative: !fut.is_negative(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticePolytope;
    use crate::rational::ratio;
    use crate::testconfig::PLConvexFunction;

    fn kink(k: u32) -> ToricTestConfig {
        ToricTestConfig::new(LatticePolytope::p1(), k, PLConvexFunction::kink(&[1])).unwrap()
    }

    #[test]
    fn p1_kink_expansion() {
        let e = expansion(&kink(1)).unwrap();
        assert_eq!(e.a, vec![rat(2), rat(1)]);
        assert_eq!(e.b, vec![ratio(-1, 2), ratio(-1, 2), rat(0)]);
        assert_eq!(e.donaldson_futaki(), ratio(1, 4));
    }

    #[test]
    fn p1_kink_invariants() {
        assert_eq!(chow_weight(&kink(1)).unwrap(), ratio(1, 12));
        assert_eq!(quantized_futaki(&kink(1)).unwrap(), rat(1));
        assert_eq!(chow_weight(&kink(2)).unwrap(), ratio(1, 20));
        assert_eq!(quantized_futaki(&kink(3)).unwrap(), rat(6));
        assert_eq!(donaldson_futaki(&kink(3)).unwrap(), ratio(1, 4));
    }

    #[test]
    fn chow_sequence() {
        assert_eq!(chow_df_limit(&kink(1), 10).unwrap(), ratio(5, 42));
    }

    #[test]
    fn expansion_window_is_irrelevant_for_lattice_kinks() {
        let tc = kink(2);
        assert_eq!(expansion_from(&tc, 1).unwrap(), expansion_from(&tc, 4).unwrap());
    }

    #[test]
    fn p_norms() {
        let n = p_norm(&kink(1), 2).unwrap();
        assert_eq!(n.leading, ratio(5, 24));
        let lin = ToricTestConfig::new(LatticePolytope::p1(), 1, PLConvexFunction::linear(&[1])).unwrap();
        assert_eq!(p_norm(&lin, 2).unwrap().leading, ratio(2, 3));
        assert!(matches!(p_norm(&lin, 3), Err(Error::OddExponent(3))));
        let triv = ToricTestConfig::new(LatticePolytope::p1(), 1, PLConvexFunction::zero(1)).unwrap();
        assert!(matches!(p_norm(&triv, 2), Err(Error::DegenerateNorm { p: 2 })));
    }

    #[test]
    fn p_norm_is_scale_covariant() {
        let tc = kink(1);
        let big = tc.scaled(&rat(3)).unwrap();
        let (a, b) = (p_norm(&tc, 4).unwrap(), p_norm(&big, 4).unwrap());
        assert_eq!(b.leading, a.leading * rat(81));
    }

    #[test]
    fn higher_futaki_on_f1() {
        let tc = ToricTestConfig::new(LatticePolytope::f1(), 1, PLConvexFunction::linear(&[-1, -1])).unwrap();
        let df = donaldson_futaki(&tc).unwrap();
        assert_eq!(df, ratio(-1, 6));
        let e = expansion(&tc).unwrap();
        // F_1 = -(n!/2) a_0 DF for product configurations.
        assert_eq!(higher_futaki(&tc, 1).unwrap(), -(rat(2) / rat(2)) * &e.a[0] * df);
        assert!(matches!(higher_futaki(&kink(1), 1), Err(Error::NotProduct)));
    }

    #[test]
    fn report_round_trip() {
        let r = InvariantReport::compute(&kink(1)).unwrap();
        assert_eq!(r.df, "1/4");
        assert_eq!(r.fut_k, "1");
        assert!(r.fut_k_nonnegative);
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<InvariantReport>(&json).unwrap(), r);
    }
}
