//! Exact univariate polynomials over the rationals and interpolation of
//! Ehrhart-type data.

use std::fmt;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::rational::{format_rational, rat, Rational};

/// Coefficients are stored lowest degree first, with no trailing zeros.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RationalPolynomial {
    coeffs: Vec<Rational>,
}

impl RationalPolynomial {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Coefficient of `m^i` (zero beyond the degree).
    pub fn coeff(&self, i: usize) -> Rational {
        self.coeffs.get(i).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn eval(&self, m: &Rational) -> Rational {
        self.coeffs
            .iter()
            .rev()
            .fold(Rational::zero(), |acc, c| acc * m + c)
    }
}

impl fmt::Display for RationalPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| match i {
                0 => format_rational(c),
                1 => format!("({}) m", format_rational(c)),
                _ => format!("({}) m^{i}", format_rational(c)),
            })
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}

/// Interpolates `samples` by a polynomial of the given degree.
///
/// The first `degree + 1` samples determine the polynomial (Newton divided
/// differences); every remaining sample must then be reproduced exactly.
pub fn fit_polynomial(samples: &[(i64, Rational)], degree: usize) -> Result<RationalPolynomial> {
    if samples.len() < degree + 2 {
        return Err(Error::InconsistentSamples {
            degree,
            detail: format!("need at least {} samples, got {}", degree + 2, samples.len()),
        });
    }
    let mut xs: Vec<i64> = samples.iter().map(|s| s.0).collect();
    xs.sort_unstable();
    if xs.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InconsistentSamples { degree, detail: "sample abscissae repeat".into() });
    }

    let (fit, check) = samples.split_at(degree + 1);
    let nodes: Vec<Rational> = fit.iter().map(|s| rat(s.0)).collect();
    let mut table: Vec<Rational> = fit.iter().map(|s| s.1.clone()).collect();
    for level in 1..=degree {
        for i in (level..=degree).rev() {
            table[i] = (&table[i] - &table[i - 1]) / (&nodes[i] - &nodes[i - level]);
        }
    }
    // Expand the Newton form into monomial coefficients (Horner on polynomials).
    let mut coeffs = vec![Rational::zero(); degree + 1];
    for i in (0..=degree).rev() {
        // coeffs <- coeffs * (m - nodes[i]) + table[i]
        let mut next = vec![Rational::zero(); degree + 1];
        for (j, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if j < degree {
                next[j + 1] += c;
            }
            next[j] -= c * &nodes[i];
        }
        next[0] += &table[i];
        coeffs = next;
    }
    let poly = RationalPolynomial::new(coeffs);

    for (m, value) in check {
        let predicted = poly.eval(&rat(*m));
        if &predicted != value {
            return Err(Error::InconsistentSamples {
                degree,
                detail: format!(
                    "at m = {m} the fit predicts {} but the sample is {}",
                    format_rational(&predicted),
                    format_rational(value)
                ),
            });
        }
    }
    Ok(poly)
}

pub(crate) fn pow(base: &Rational, exp: usize) -> Rational {
    (0..exp).fold(Rational::one(), |acc, _| acc * base)
}
