//! Toric test configurations encoded by piecewise-linear convex functions.
//!
//! A configuration of exponent `k` is the pair `(k, g)` with
//! `g(y) = max_i (<l_i, y> + c_i)` on the polytope. Its level-`m` weight
//! system assigns to every lattice point `b` of `kmP` the weight
//! `-km * g(b / km)`; at level one these are the eigenvalues of the diagonal
//! generator `A` of the associated one-parameter subgroup.

use std::fmt;

use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::lattice::{LatticePoint, LatticePolytope};
use crate::rational::{format_rational, rat, to_f64, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffinePiece {
    pub linear: Vec<Rational>,
    pub constant: Rational,
}

impl AffinePiece {
    pub fn new(linear: Vec<Rational>, constant: Rational) -> Self {
        Self { linear, constant }
    }

    pub fn linear_int(linear: &[i64], constant: i64) -> Self {
        Self { linear: linear.iter().map(|&c| rat(c)).collect(), constant: rat(constant) }
    }

    /// `<l, b> + c * scale`, i.e. `scale * piece(b / scale)`.
    fn eval_homogeneous(&self, point: &[i64], scale: &Rational) -> Rational {
        let lin: Rational = self.linear.iter().zip(point).map(|(l, &b)| l * rat(b)).sum();
        lin + &self.constant * scale
    }

    fn eval_rational(&self, y: &[Rational]) -> Rational {
        self.linear.iter().zip(y).map(|(l, v)| l * v).sum::<Rational>() + &self.constant
    }
}

/// `g(y) = max` over the pieces; convex by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PLConvexFunction {
    pieces: Vec<AffinePiece>,
}

impl PLConvexFunction {
    pub fn new(pieces: Vec<AffinePiece>) -> Result<Self> {
        let Some(first) = pieces.first() else {
            return Err(Error::InvalidTestConfig("g needs at least one affine piece".into()));
        };
        let n = first.linear.len();
        if pieces.iter().any(|p| p.linear.len() != n) {
            return Err(Error::InvalidTestConfig("affine pieces have different dimensions".into()));
        }
        Ok(Self { pieces })
    }

    pub fn zero(dim: usize) -> Self {
        Self { pieces: vec![AffinePiece::new(vec![Rational::zero(); dim], Rational::zero())] }
    }

    pub fn linear(l: &[i64]) -> Self {
        Self { pieces: vec![AffinePiece::linear_int(l, 0)] }
    }

    /// `max(0, <l, y>)`.
    pub fn kink(l: &[i64]) -> Self {
        Self { pieces: vec![AffinePiece::linear_int(&vec![0; l.len()], 0), AffinePiece::linear_int(l, 0)] }
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].linear.len()
    }

    pub fn eval(&self, y: &[Rational]) -> Rational {
        self.pieces.iter().map(|p| p.eval_rational(y)).max().expect("nonempty")
    }

    /// `scale * g(point / scale)` evaluated without leaving the integers for
    /// the lattice argument.
    pub fn eval_homogeneous(&self, point: &[i64], scale: &Rational) -> Rational {
        self.pieces.iter().map(|p| p.eval_homogeneous(point, scale)).max().expect("nonempty")
    }

    pub fn scaled(&self, d: &Rational) -> Self {
        let pieces = self
            .pieces
            .iter()
            .map(|p| AffinePiece::new(p.linear.iter().map(|l| l * d).collect(), &p.constant * d))
            .collect();
        Self { pieces }
    }

    pub fn plus_affine(&self, affine: &AffinePiece) -> Self {
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                AffinePiece::new(
                    p.linear.iter().zip(&affine.linear).map(|(a, b)| a + b).collect(),
                    &p.constant + &affine.constant,
                )
            })
            .collect();
        Self { pieces }
    }
}

impl fmt::Display for AffinePiece {
    /// Formats as e.g. `y1 - 2 y2 + 1/3`, with variables `y` (1D) or `y1, y2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = if self.linear.len() == 1 {
            vec!["y".into()]
        } else {
            (1..=self.linear.len()).map(|i| format!("y{i}")).collect()
        };
        let mut out = String::new();
        for (l, name) in self.linear.iter().zip(&names) {
            if l.is_zero() {
                continue;
            }
            let sign = if l.is_negative() { "-" } else { "+" };
            let mag = l.abs();
            let coeff = if mag.is_one() { String::new() } else { format!("{} ", format_rational(&mag)) };
            if out.is_empty() {
                out = format!("{}{coeff}{name}", if l.is_negative() { "-" } else { "" });
            } else {
                out.push_str(&format!(" {sign} {coeff}{name}"));
            }
        }
        if !self.constant.is_zero() || out.is_empty() {
            let c = &self.constant;
            if out.is_empty() {
                out = format_rational(c);
            } else {
                let sign = if c.is_negative() { "-" } else { "+" };
                out.push_str(&format!(" {sign} {}", format_rational(&c.abs())));
            }
        }
        f.write_str(&out)
    }
}

impl fmt::Display for PLConvexFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pieces.len() == 1 {
            return write!(f, "{}", self.pieces[0]);
        }
        let parts: Vec<String> = self.pieces.iter().map(ToString::to_string).collect();
        write!(f, "max({})", parts.join(", "))
    }
}

// Rational polygon clipping, used to decide whether a piece of g is the
// maximum on a full-dimensional part of the polytope.

type RPoint = [Rational; 2];

fn clip(poly: &[RPoint], a: &[Rational], b: &Rational) -> Vec<RPoint> {
    let value = |p: &RPoint| &a[0] * &p[0] + &a[1] * &p[1] + b;
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let cur = &poly[i];
        let next = &poly[(i + 1) % poly.len()];
        let (vc, vn) = (value(cur), value(next));
        if !vc.is_negative() {
            out.push(cur.clone());
        }
        if (vc.is_negative() && vn.is_positive()) || (vc.is_positive() && vn.is_negative()) {
            let s = &vc / (&vc - &vn);
            out.push([&cur[0] + &s * (&next[0] - &cur[0]), &cur[1] + &s * (&next[1] - &cur[1])]);
        }
    }
    out
}

fn polygon_twice_area(poly: &[RPoint]) -> Rational {
    (0..poly.len())
        .map(|i| {
            let (p, q) = (&poly[i], &poly[(i + 1) % poly.len()]);
            &p[0] * &q[1] - &p[1] * &q[0]
        })
        .sum()
}

/// Whether `{y in P : piece_i(y) >= piece_j(y) for all j}` has positive volume.
fn piece_is_effective(polytope: &LatticePolytope, pieces: &[AffinePiece], i: usize) -> bool {
    let constraints: Vec<(Vec<Rational>, Rational)> = pieces
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, pj)| {
            let pi = &pieces[i];
            (pi.linear.iter().zip(&pj.linear).map(|(a, b)| a - b).collect(), &pi.constant - &pj.constant)
        })
        .collect();
    if polytope.dim() == 1 {
        let mut lo = rat(polytope.vertices()[0][0]);
        let mut hi = rat(polytope.vertices()[1][0]);
        for (a, b) in &constraints {
            let a = &a[0];
            if a.is_zero() {
                if b.is_negative() {
                    return false;
                }
            } else if a.is_positive() {
                lo = lo.max(-b / a);
            } else {
                hi = hi.min(-b / a);
            }
        }
        return hi > lo;
    }
    let mut poly: Vec<RPoint> = polytope.vertices().iter().map(|v| [rat(v[0]), rat(v[1])]).collect();
    for (a, b) in &constraints {
        poly = clip(&poly, a, b);
        if poly.len() < 3 {
            return false;
        }
    }
    polygon_twice_area(&poly).is_positive()
}

fn lcm_of_denominators<'a>(values: impl IntoIterator<Item = &'a Rational>) -> num_bigint::BigInt {
    values.into_iter().fold(num_bigint::BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

/// Level-`m` weights over the lattice points of `kmP` (basis order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightSystem {
    pub level: u64,
    pub points: Vec<LatticePoint>,
    pub weights: Vec<Rational>,
}

impl WeightSystem {
    pub fn total(&self) -> Rational {
        self.weights.iter().sum()
    }
}

/// Diagonal infinitesimal generator at level one.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub basis: Vec<LatticePoint>,
    pub weights: Vec<Rational>,
    pub trace: Rational,
    pub trace_free: Vec<Rational>,
}

impl Generator {
    pub fn from_weights(basis: Vec<LatticePoint>, weights: Vec<Rational>) -> Self {
        let trace: Rational = weights.iter().sum();
        let mean = &trace / rat(weights.len() as i64);
        let trace_free = weights.iter().map(|w| w - &mean).collect();
        Self { basis, weights, trace, trace_free }
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        self.weights.iter().map(to_f64).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(Zero::is_zero)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToricTestConfig {
    polytope: LatticePolytope,
    k: u32,
    g: PLConvexFunction,
    /// Linearization shift: `c * m` is added to every level-`m` weight.
    shift: Rational,
    reversed: bool,
}

impl ToricTestConfig {
    pub fn new(polytope: LatticePolytope, k: u32, g: PLConvexFunction) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidTestConfig("exponent k must be positive".into()));
        }
        if g.dim() != polytope.dim() {
            return Err(Error::InvalidTestConfig(format!(
                "g is defined on R^{} but the polytope has dimension {}",
                g.dim(),
                polytope.dim()
            )));
        }
        for (i, p) in g.pieces().iter().enumerate() {
            if g.pieces()[..i].contains(p) {
                return Err(Error::InvalidTestConfig(format!("piece {i} repeats an earlier piece")));
            }
        }
        if g.pieces().len() > 1 {
            for i in 0..g.pieces().len() {
                if !piece_is_effective(&polytope, g.pieces(), i) {
                    return Err(Error::InvalidTestConfig(format!(
                        "piece {i} of g is nowhere the maximum on a full-dimensional part of {}",
                        polytope.name()
                    )));
                }
            }
        }
        Ok(Self { polytope, k, g, shift: Rational::zero(), reversed: false })
    }

    pub fn polytope(&self) -> &LatticePolytope {
        &self.polytope
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn g(&self) -> &PLConvexFunction {
        &self.g
    }

    pub fn shift(&self) -> &Rational {
        &self.shift
    }

    pub fn is_product(&self) -> bool {
        self.g.pieces().len() == 1
    }

    pub fn is_trivial(&self) -> bool {
        self.is_product() && self.g.pieces()[0].linear.iter().all(Zero::is_zero)
    }

    /// Level-`m` weights `-km g(b / km) + shift * m` on `kmP`.
    pub fn weights_at_level(&self, m: u64) -> WeightSystem {
        let km = m * self.k as u64;
        let scale = rat(km as i64);
        let level_shift = &self.shift * rat(m as i64);
        let points = self.polytope.lattice_points(km);
        let weights = points
            .iter()
            .map(|b| {
                let gv = self.g.eval_homogeneous(b, &scale);
                let w = if self.reversed { gv } else { -gv };
                w + &level_shift
            })
            .collect();
        WeightSystem { level: m, points, weights }
    }

    /// Total weight `w_km` at level `m`.
    ///
    /// Summed in scaled `i128` arithmetic (all pieces multiplied by their
    /// common denominator); falls back to exact big rationals on overflow.
    pub fn total_weight(&self, m: u64) -> Rational {
        self.total_weight_scaled(m).unwrap_or_else(|| self.weights_at_level(m).total())
    }

    fn total_weight_scaled(&self, m: u64) -> Option<Rational> {
        let mut values: Vec<&Rational> = vec![&self.shift];
        for p in self.g.pieces() {
            values.extend(p.linear.iter());
            values.push(&p.constant);
        }
        let d = lcm_of_denominators(values).to_i128()?;
        let scale = |r: &Rational| (r * Rational::from_integer(d.into())).to_integer().to_i128();
        let pieces = self
            .g
            .pieces()
            .iter()
            .map(|p| Some((p.linear.iter().map(scale).collect::<Option<Vec<_>>>()?, scale(&p.constant)?)))
            .collect::<Option<Vec<_>>>()?;
        let km = (m * self.k as u64) as i128;
        let shift = scale(&self.shift)?.checked_mul(m as i128)?;
        let mut sum: i128 = 0;
        for b in self.polytope.lattice_points(km as u64) {
            let mut best = i128::MIN;
            for (l, c) in &pieces {
                let mut v = c.checked_mul(km)?;
                for (li, &bi) in l.iter().zip(&b) {
                    v = v.checked_add(li.checked_mul(bi as i128)?)?;
                }
                best = best.max(v);
            }
            let w = if self.reversed { best } else { -best };
            sum = sum.checked_add(w.checked_add(shift)?)?;
        }
        Some(Rational::new(sum.into(), d.into()))
    }

    pub fn generator(&self) -> Generator {
        let ws = self.weights_at_level(1);
        Generator::from_weights(ws.points, ws.weights)
    }

    /// Adds `c * m` to every level-`m` weight (change of linearization).
    pub fn shift_linearization(&self, c: &Rational) -> Self {
        Self { shift: &self.shift + c, ..self.clone() }
    }

    /// `g -> d g` for a positive rational `d`.
    pub fn scaled(&self, d: &Rational) -> Result<Self> {
        if !d.is_positive() {
            return Err(Error::InvalidTestConfig("scale factor must be positive".into()));
        }
        Self::new(self.polytope.clone(), self.k, self.g.scaled(d)).map(|tc| Self {
            shift: &self.shift * d,
            reversed: self.reversed,
            ..tc
        })
    }

    /// `g -> g + affine`.
    pub fn plus_affine(&self, affine: &AffinePiece) -> Result<Self> {
        Self::new(self.polytope.clone(), self.k, self.g.plus_affine(affine))
            .map(|tc| Self { shift: self.shift.clone(), reversed: self.reversed, ..tc })
    }

    /// Negative control: flips the sign convention of the weights.
    pub fn with_reversed_orientation(&self) -> Self {
        Self { reversed: !self.reversed, ..self.clone() }
    }

    /// Least common denominator of the level-one weights.
    pub fn weight_denominator(&self) -> num_bigint::BigInt {
        lcm_of_denominators(self.weights_at_level(1).weights.iter())
    }

    /// Rescales `g` by the least integer making every weight at every level
    /// integral, as a genuine C*-action requires. Returns the configuration
    /// and the factor; DF, Chow and Fut scale linearly in it.
    pub fn clear_denominators(&self) -> Result<(Self, Rational)> {
        let k = rat(self.k as i64);
        let mut values: Vec<Rational> = Vec::new();
        for p in self.g.pieces() {
            values.extend(p.linear.iter().cloned());
            values.push(&p.constant * &k);
        }
        values.push(self.shift.clone());
        let d = Rational::from_integer(lcm_of_denominators(values.iter()));
        Ok((self.scaled(&d)?, d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn p1_tc(k: u32, g: PLConvexFunction) -> ToricTestConfig {
        ToricTestConfig::new(LatticePolytope::p1(), k, g).unwrap()
    }

    #[test]
    fn kink_weights() {
        let tc = p1_tc(1, PLConvexFunction::kink(&[1]));
        assert_eq!(tc.weights_at_level(1).weights, vec![rat(0), rat(0), rat(-1)]);
        assert_eq!(tc.weights_at_level(2).weights, vec![rat(0), rat(0), rat(0), rat(-1), rat(-2)]);
        let lin = p1_tc(1, PLConvexFunction::linear(&[1]));
        assert_eq!(lin.weights_at_level(1).weights, vec![rat(1), rat(0), rat(-1)]);
    }

    #[test]
    fn total_weights() {
        let tc = p1_tc(1, PLConvexFunction::kink(&[1]));
        assert_eq!(tc.total_weight(3), rat(-6));
        for m in 1..6 {
            assert_eq!(tc.total_weight(m), rat(-((m * (m + 1) / 2) as i64)));
        }
        let lin = p1_tc(1, PLConvexFunction::linear(&[1]));
        assert!((1..5).all(|m| lin.total_weight(m).is_zero()));
        assert_eq!(p1_tc(2, PLConvexFunction::kink(&[1])).total_weight(1), rat(-3));
        let g = PLConvexFunction::new(vec![
            AffinePiece::new(vec![ratio(1, 3), ratio(-2, 5)], ratio(1, 7)),
            AffinePiece::new(vec![ratio(-1, 2), rat(1)], rat(0)),
        ])
        .unwrap();
        let tc = ToricTestConfig::new(LatticePolytope::f1(), 2, g).unwrap().shift_linearization(&ratio(3, 11));
        for m in 1..4 {
            assert_eq!(tc.total_weight(m), tc.weights_at_level(m).total());
            let r = tc.with_reversed_orientation();
            assert_eq!(r.total_weight(m), r.weights_at_level(m).total());
        }
    }

    #[test]
    fn generators() {
        let a = p1_tc(1, PLConvexFunction::kink(&[1])).generator();
        assert_eq!(a.weights, vec![rat(0), rat(0), rat(-1)]);
        assert_eq!(a.trace_free, vec![ratio(1, 3), ratio(1, 3), ratio(-2, 3)]);
        assert!(a.trace_free.iter().sum::<Rational>().is_zero());
        assert!(p1_tc(1, PLConvexFunction::zero(1)).generator().is_zero());

        let f1 = ToricTestConfig::new(LatticePolytope::f1(), 1, PLConvexFunction::linear(&[1, 1])).unwrap();
        let gen = f1.generator();
        assert_eq!(gen.weights.len(), 9);
        assert_eq!(gen.trace, rat(-2));
        for (b, w) in gen.basis.iter().zip(&gen.weights) {
            assert_eq!(*w, rat(-(b[0] + b[1])));
        }
    }

    #[test]
    fn shift_adds_level_multiple() {
        let tc = p1_tc(1, PLConvexFunction::zero(1)).shift_linearization(&rat(1));
        assert!(tc.weights_at_level(2).weights.iter().all(|w| *w == rat(2)));
    }

    #[test]
    fn product_and_trivial_flags() {
        assert!(p1_tc(1, PLConvexFunction::linear(&[1])).is_product());
        assert!(!p1_tc(1, PLConvexFunction::linear(&[1])).is_trivial());
        assert!(p1_tc(1, PLConvexFunction::zero(1)).is_trivial());
        assert!(!p1_tc(1, PLConvexFunction::kink(&[1])).is_product());
    }

    #[test]
    fn redundant_pieces_rejected() {
        // y - 1 <= 0 everywhere on [-1, 1], so it never wins.
        let g = PLConvexFunction::new(vec![AffinePiece::linear_int(&[0], 0), AffinePiece::linear_int(&[1], -1)]).unwrap();
        assert!(ToricTestConfig::new(LatticePolytope::p1(), 1, g).is_err());
        // Touching at a single vertex is not enough either.
        let g2 = PLConvexFunction::new(vec![
            AffinePiece::linear_int(&[0, 0], 0),
            AffinePiece::linear_int(&[1, 1], -2),
        ])
        .unwrap();
        assert!(ToricTestConfig::new(LatticePolytope::p1xp1(), 1, g2).is_err());
        let dup = PLConvexFunction::new(vec![AffinePiece::linear_int(&[1], 0), AffinePiece::linear_int(&[1], 0)]).unwrap();
        assert!(ToricTestConfig::new(LatticePolytope::p1(), 1, dup).is_err());
        assert!(ToricTestConfig::new(LatticePolytope::p2(), 1, PLConvexFunction::kink(&[1, 1])).is_ok());
        assert!(ToricTestConfig::new(LatticePolytope::p2(), 1, PLConvexFunction::kink(&[1])).is_err());
        assert!(PLConvexFunction::new(vec![]).is_err());
    }

    #[test]
    fn homogeneity_of_sampling() {
        // Level-m weights at m * b equal m times the level-one weight at b.
        for p in LatticePolytope::builtins() {
            let l: Vec<i64> = (0..p.dim() as i64).map(|i| 1 - 2 * i).collect();
            let tc = ToricTestConfig::new(p, 2, PLConvexFunction::kink(&l)).unwrap();
            let one = tc.weights_at_level(1);
            let three = tc.weights_at_level(3);
            for (b, w) in one.points.iter().zip(&one.weights) {
                let scaled: Vec<i64> = b.iter().map(|c| 3 * c).collect();
                let idx = three.points.iter().position(|q| *q == scaled).unwrap();
                assert_eq!(three.weights[idx], w * rat(3));
            }
        }
    }

    #[test]
    fn denominators() {
        let g = PLConvexFunction::new(vec![
            AffinePiece::linear_int(&[0], 0),
            AffinePiece::new(vec![ratio(1, 2)], ratio(-1, 6)),
        ])
        .unwrap();
        let tc = p1_tc(1, g);
        assert_eq!(tc.weight_denominator(), 3.into());
        let (cleared, d) = tc.clear_denominators().unwrap();
        assert_eq!(d, rat(6));
        for m in 1..4 {
            assert!(cleared.weights_at_level(m).weights.iter().all(|w| w.is_integer()));
        }
    }
}
