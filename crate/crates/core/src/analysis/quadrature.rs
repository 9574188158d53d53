//! Composite Gauss–Legendre tensor grids on boxes in `R^n`, `n <= 2`.
//!
//! The integrands met here are analytic with exponential tails, so the box is
//! split into panels of at most [`QuadratureSpec::panel_nodes`] nodes each and
//! the tail beyond the box is estimated from the boundary values divided by a
//! decay rate. Reductions run in a fixed order, so results are bit-stable for
//! a given spec regardless of thread count.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_HALF_WIDTH: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Half-width of the integration box, per axis.
    pub half_width: Vec<f64>,
    /// Node count per axis over the default box; node density is kept when
    /// the box grows.
    pub nodes: usize,
    /// Gauss–Legendre order of each panel.
    pub panel_nodes: usize,
    /// Relative tolerance on the tail estimate.
    pub tail_tol: f64,
    /// Box expansions (factor 1.5) allowed before giving up.
    pub max_expansions: u32,
}

impl QuadratureSpec {
    pub fn new(dim: usize) -> Self {
        let nodes = if dim == 1 { 1600 } else { 400 };
        Self {
            half_width: vec![DEFAULT_HALF_WIDTH; dim],
            nodes,
            panel_nodes: 16,
            tail_tol: 1e-10,
            max_expansions: 4,
        }
    }

    /// Spec for objects at geodesic time `t`: half-width `max(40, 2t + 50)`.
    pub fn for_time(dim: usize, t: f64) -> Self {
        Self::new(dim).with_half_width(DEFAULT_HALF_WIDTH.max(2.0 * t.abs() + 50.0))
    }

    pub fn with_half_width(mut self, w: f64) -> Self {
        self.half_width.iter_mut().for_each(|h| *h = w);
        self
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn with_tail_tol(mut self, tol: f64) -> Self {
        self.tail_tol = tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.half_width.len()
    }

    /// Doubles the node density.
    pub fn refined(&self) -> Self {
        Self { nodes: self.nodes * 2, ..self.clone() }
    }

    fn axis_rule(&self, w: f64) -> AxisRule {
        let density = self.nodes as f64 / (2.0 * DEFAULT_HALF_WIDTH);
        let total = (density * 2.0 * w).ceil().max(self.panel_nodes as f64) as usize;
        let panels = total.div_ceil(self.panel_nodes);
        AxisRule::composite(-w, w, panels, self.panel_nodes)
    }
}

/// Nodes and weights of a composite rule on one axis.
#[derive(Debug, Clone)]
pub struct AxisRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl AxisRule {
    pub fn composite(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let rule = GaussLegendre::new(NonZeroUsize::new(order).expect("order > 0"));
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + p as f64 * h;
            for &(x, wt) in rule.as_node_weight_pairs() {
                nodes.push(lo + 0.5 * h * (x + 1.0));
                weights.push(0.5 * h * wt);
            }
        }
        Self { nodes, weights }
    }
}

/// Result of a (possibly vector-valued) integral.
#[derive(Debug, Clone, PartialEq)]
pub struct Integral {
    pub values: Vec<f64>,
    /// Per-component tail estimate beyond the box.
    pub tails: Vec<f64>,
    /// The spec actually used (after any box expansion).
    pub spec: QuadratureSpec,
    pub node_count: usize,
}

impl Integral {
    pub fn value(&self) -> f64 {
        self.values[0]
    }

    pub fn tail(&self) -> f64 {
        self.tails.iter().cloned().fold(0.0, f64::max)
    }
}

fn sum_rows(rows: Vec<Vec<f64>>, width: usize) -> Vec<f64> {
    rows.into_iter().fold(vec![0.0; width], |mut acc, row| {
        acc.iter_mut().zip(row).for_each(|(a, r)| *a += r);
        acc
    })
}

fn map_rows<F>(n: usize, f: F) -> Vec<Vec<f64>>
where
    F: Fn(usize) -> Vec<f64> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Integrates a vector-valued integrand with `width` components over the box
/// of `spec`, expanding the box while the tail estimate is too large.
///
/// `decay_rate` is a lower bound on the exponential decay of every component
/// outside the box. `f(x, out)` must overwrite all of `out`.
pub fn integrate_many<F>(spec: &QuadratureSpec, width: usize, decay_rate: f64, f: F) -> Result<Integral>
where
    F: Fn(&[f64; 2], &mut [f64]) + Sync + Send,
{
    let mut spec = spec.clone();
    let mut attempt = 0;
    loop {
        let result = integrate_once(&spec, width, decay_rate, &f);
        let scale = result.values.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let worst = result.tails.iter().cloned().fold(0.0, f64::max);
        if worst <= spec.tail_tol * scale || worst == 0.0 {
            return Ok(result);
        }
        if attempt >= spec.max_expansions {
            return Err(Error::TailTolerance { tail: worst / scale, tol: spec.tail_tol, half_width: spec.half_width[0] });
        }
        attempt += 1;
        spec.half_width.iter_mut().for_each(|w| *w *= 1.5);
    }
}

pub fn integrate<F>(spec: &QuadratureSpec, decay_rate: f64, f: F) -> Result<Integral>
where
    F: Fn(&[f64; 2]) -> f64 + Sync + Send,
{
    integrate_many(spec, 1, decay_rate, |x, out| out[0] = f(x))
}

fn integrate_once<F>(spec: &QuadratureSpec, width: usize, decay_rate: f64, f: &F) -> Integral
where
    F: Fn(&[f64; 2], &mut [f64]) + Sync + Send,
{
    let rules: Vec<AxisRule> = spec.half_width.iter().map(|&w| spec.axis_rule(w)).collect();
    let mut tails = vec![0.0; width];
    let (values, node_count) = match rules.len() {
        1 => {
            let r = &rules[0];
            let rows = map_rows(r.nodes.len(), |i| {
                let mut out = vec![0.0; width];
                f(&[r.nodes[i], 0.0], &mut out);
                out.iter_mut().for_each(|v| *v *= r.weights[i]);
                out
            });
            let mut buf = vec![0.0; width];
            let w = spec.half_width[0];
            for x in [-w, w] {
                f(&[x, 0.0], &mut buf);
                tails.iter_mut().zip(&buf).for_each(|(t, v)| *t += v.abs() / decay_rate);
            }
            (sum_rows(rows, width), r.nodes.len())
        }
        _ => {
            let (rx, ry) = (&rules[0], &rules[1]);
            let rows = map_rows(rx.nodes.len(), |i| {
                let mut acc = vec![0.0; width];
                let mut out = vec![0.0; width];
                for j in 0..ry.nodes.len() {
                    f(&[rx.nodes[i], ry.nodes[j]], &mut out);
                    let wt = rx.weights[i] * ry.weights[j];
                    acc.iter_mut().zip(&out).for_each(|(a, v)| *a += wt * v);
                }
                acc
            });
            // Line integrals of |f| along the four edges.
            let (wx, wy) = (spec.half_width[0], spec.half_width[1]);
            let mut buf = vec![0.0; width];
            for (i, &x) in rx.nodes.iter().enumerate() {
                for y in [-wy, wy] {
                    f(&[x, y], &mut buf);
                    tails.iter_mut().zip(&buf).for_each(|(t, v)| *t += rx.weights[i] * v.abs() / decay_rate);
                }
            }
            for (j, &y) in ry.nodes.iter().enumerate() {
                for x in [-wx, wx] {
                    f(&[x, y], &mut buf);
                    tails.iter_mut().zip(&buf).for_each(|(t, v)| *t += ry.weights[j] * v.abs() / decay_rate);
                }
            }
            (sum_rows(rows, width), rx.nodes.len() * ry.nodes.len())
        }
    };
    Integral { values, tails, spec: spec.clone(), node_count }
}

/// Evaluates `f` at every node of the spec's grid (used for pointwise checks).
pub fn grid_points(spec: &QuadratureSpec) -> Vec<[f64; 2]> {
    let rules: Vec<AxisRule> = spec.half_width.iter().map(|&w| spec.axis_rule(w)).collect();
    match rules.len() {
        1 => rules[0].nodes.iter().map(|&x| [x, 0.0]).collect(),
        _ => rules[0]
            .nodes
            .iter()
            .flat_map(|&x| rules[1].nodes.iter().map(move |&y| [x, y]))
            .collect(),
    }
}
