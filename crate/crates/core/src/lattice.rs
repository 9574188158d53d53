//! Reflexive lattice polytopes of dimension one and two.
//!
//! A polytope is stored both as its vertex list and as the facet system
//! `P = { x : <x, nu> >= -c }` with primitive inward normals `nu`. The two
//! descriptions are cross-validated on construction. The lattice points of a
//! dilation `mP`, in lexicographic order, index the monomial section basis of
//! `H^0(X, -mK_X)`.

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{rat, Rational};

pub type LatticePoint = Vec<i64>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Facet {
    pub normal: Vec<i64>,
    pub offset: i64,
}

impl Facet {
    /// `<x, nu> + m c`, nonnegative exactly on `mP`.
    pub fn slack(&self, x: &[i64], m: i64) -> i64 {
        dot(&self.normal, x) + m * self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticePolytope {
    name: String,
    dim: usize,
    vertices: Vec<LatticePoint>,
    facets: Vec<Facet>,
}

pub const BUILTIN_NAMES: [&str; 4] = ["P1", "P2", "P1xP1", "F1"];

fn dot(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cross(o: &[i64], a: &[i64], b: &[i64]) -> i64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Strictly convex hull in counter-clockwise order (collinear points dropped).
fn convex_hull(points: &[LatticePoint]) -> Vec<LatticePoint> {
    let mut pts = points.to_vec();
    pts.sort();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<LatticePoint> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<LatticePoint> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

impl LatticePolytope {
    /// Builds a lattice polytope from its vertices, deriving and validating
    /// the facet description. Every listed point must be a genuine vertex.
    pub fn from_vertices(name: impl Into<String>, dim: usize, vertices: Vec<LatticePoint>) -> Result<Self> {
        let name = name.into();
        let invalid = |msg: String| Error::InvalidPolytope(format!("{name}: {msg}"));
        if !(1..=2).contains(&dim) {
            return Err(invalid(format!("dimension {dim} not supported (only 1 and 2)")));
        }
        if let Some(v) = vertices.iter().find(|v| v.len() != dim) {
            return Err(invalid(format!("vertex {v:?} does not have {dim} coordinates")));
        }
        let (vertices, facets) = match dim {
            1 => {
                if vertices.len() != 2 || vertices[0] == vertices[1] {
                    return Err(invalid("a segment needs exactly two distinct endpoints".into()));
                }
                let lo = vertices[0][0].min(vertices[1][0]);
                let hi = vertices[0][0].max(vertices[1][0]);
                let facets = vec![
                    Facet { normal: vec![1], offset: -lo },
                    Facet { normal: vec![-1], offset: hi },
                ];
                (vec![vec![lo], vec![hi]], facets)
            }
            _ => {
                let hull = convex_hull(&vertices);
                let mut distinct = vertices.clone();
                distinct.sort();
                distinct.dedup();
                if hull.len() < 3 {
                    return Err(invalid("vertices are collinear".into()));
                }
                if hull.len() != distinct.len() || distinct.len() != vertices.len() {
                    return Err(invalid("some listed points are not vertices of their convex hull".into()));
                }
                let facets = (0..hull.len())
                    .map(|i| {
                        let a = &hull[i];
                        let b = &hull[(i + 1) % hull.len()];
                        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
                        let g = ex.gcd(&ey);
                        let normal = vec![-ey / g, ex / g];
                        let offset = -dot(&normal, a);
                        Facet { normal, offset }
                    })
                    .collect();
                (hull, facets)
            }
        };
        let polytope = Self { name, dim, vertices, facets };
        polytope.cross_validate()?;
        Ok(polytope)
    }

    /// Like [`from_vertices`](Self::from_vertices) but additionally requires
    /// the polytope to be reflexive, as every anticanonical polytope is.
    pub fn reflexive(name: impl Into<String>, dim: usize, vertices: Vec<LatticePoint>) -> Result<Self> {
        let p = Self::from_vertices(name, dim, vertices)?;
        if !p.is_reflexive() {
            return Err(Error::InvalidPolytope(format!(
                "{}: not reflexive (facet offsets {:?})",
                p.name,
                p.facets.iter().map(|f| f.offset).collect::<Vec<_>>()
            )));
        }
        Ok(p)
    }

    fn cross_validate(&self) -> Result<()> {
        for f in &self.facets {
            let tight = self.vertices.iter().filter(|v| f.slack(v, 1) == 0).count();
            if self.vertices.iter().any(|v| f.slack(v, 1) < 0) || tight != self.dim {
                return Err(Error::InvalidPolytope(format!(
                    "{}: facet {:?} is inconsistent with the vertex list",
                    self.name, f
                )));
            }
        }
        if self.volume() <= rat(0) {
            return Err(Error::InvalidPolytope(format!("{}: zero volume", self.name)));
        }
        Ok(())
    }

    /// Looks up a builtin by name, ignoring ASCII case.
    pub fn builtin(name: &str) -> Result<Self> {
        match name.to_ascii_uppercase().as_str() {
            "P1" => Ok(Self::p1()),
            "P2" => Ok(Self::p2()),
            "P1XP1" => Ok(Self::p1xp1()),
            "F1" => Ok(Self::f1()),
            _ => Err(Error::UnknownBuiltin(name.to_string())),
        }
    }

    pub fn builtins() -> Vec<Self> {
        BUILTIN_NAMES.iter().map(|n| Self::builtin(n).expect("builtin")).collect()
    }

    pub fn p1() -> Self {
        Self::reflexive("P1", 1, vec![vec![-1], vec![1]]).expect("P1 is reflexive")
    }

    pub fn p2() -> Self {
        Self::reflexive("P2", 2, vec![vec![-1, -1], vec![2, -1], vec![-1, 2]]).expect("P2 is reflexive")
    }

    pub fn p1xp1() -> Self {
        Self::reflexive("P1xP1", 2, vec![vec![-1, -1], vec![1, -1], vec![1, 1], vec![-1, 1]])
            .expect("P1xP1 is reflexive")
    }

    /// The blow-up of the plane at one point.
    pub fn f1() -> Self {
        Self::reflexive("F1", 2, vec![vec![-1, 0], vec![0, -1], vec![2, -1], vec![-1, 2]])
            .expect("F1 is reflexive")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[LatticePoint] {
        &self.vertices
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    /// All offsets equal one and the origin is the only interior lattice point.
    pub fn is_reflexive(&self) -> bool {
        if self.facets.iter().any(|f| f.offset != 1) {
            return false;
        }
        let interior: Vec<_> = self
            .lattice_points(1)
            .into_iter()
            .filter(|p| self.facets.iter().all(|f| f.slack(p, 1) > 0))
            .collect();
        interior.len() == 1 && interior[0].iter().all(|&c| c == 0)
    }

    pub fn contains(&self, point: &[i64], m: i64) -> bool {
        self.facets.iter().all(|f| f.slack(point, m) >= 0)
    }

    /// Lattice points of `mP` in lexicographic order.
    pub fn lattice_points(&self, m: u64) -> Vec<LatticePoint> {
        let m = m as i64;
        let lo0 = self.vertices.iter().map(|v| v[0]).min().unwrap() * m;
        let hi0 = self.vertices.iter().map(|v| v[0]).max().unwrap() * m;
        if self.dim == 1 {
            return (lo0..=hi0).map(|x| vec![x]).collect();
        }
        let mut out = Vec::new();
        for x in lo0..=hi0 {
            let mut lo = i64::MIN;
            let mut hi = i64::MAX;
            let mut feasible = true;
            for f in &self.facets {
                // a x + b y >= -m c
                let (a, b) = (f.normal[0], f.normal[1]);
                let rhs = -m * f.offset - a * x;
                match b.signum() {
                    1 => lo = lo.max(Integer::div_ceil(&rhs, &b)),
                    -1 => hi = hi.min(Integer::div_floor(&rhs, &b)),
                    _ => feasible &= rhs <= 0,
                }
            }
            if feasible {
                out.extend((lo..=hi).map(|y| vec![x, y]));
            }
        }
        out
    }

    /// Number of lattice points of `mP`, i.e. `dim H^0(X, -mK_X)`.
    pub fn ehrhart_count(&self, m: u64) -> u64 {
        self.lattice_points(m).len() as u64
    }

    /// Euclidean volume, exactly.
    pub fn volume(&self) -> Rational {
        match self.dim {
            1 => rat(self.vertices[1][0] - self.vertices[0][0]),
            _ => {
                let n = self.vertices.len();
                let twice: i64 = (0..n)
                    .map(|i| {
                        let (a, b) = (&self.vertices[i], &self.vertices[(i + 1) % n]);
                        a[0] * b[1] - a[1] * b[0]
                    })
                    .sum();
                Rational::new(twice.into(), 2.into())
            }
        }
    }

    /// `(-K_X)^n = n! vol(P)`.
    pub fn anticanonical_degree(&self) -> Rational {
        let fact: i64 = (1..=self.dim as i64).product();
        self.volume() * rat(fact)
    }

    /// Radius of the largest origin-centred ball inside `P`; a lower bound on
    /// the exponential decay rate of `e^{-u}` for potentials with the
    /// polytope's growth.
    pub fn inradius(&self) -> f64 {
        self.facets
            .iter()
            .map(|f| {
                let norm = f.normal.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
                f.offset as f64 / norm
            })
            .fold(f64::INFINITY, f64::min)
    }
}
