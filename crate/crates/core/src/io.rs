//! JSON file formats for polytopes, test configurations and metrics.
//!
//! Exact rationals travel as `"p/q"` strings; floats use serde_json's
//! shortest round-trip rendering.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::DiagonalHermitian;
use crate::lattice::{LatticePoint, LatticePolytope, BUILTIN_NAMES};
use crate::rational::{format_rational, parse_rational, rat};
use crate::testconfig::{AffinePiece, PLConvexFunction, ToricTestConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolytopeFile {
    pub name: String,
    pub dim: usize,
    pub vertices: Vec<LatticePoint>,
}

impl PolytopeFile {
    pub fn from_polytope(p: &LatticePolytope) -> Self {
        Self { name: p.name().to_string(), dim: p.dim(), vertices: p.vertices().to_vec() }
    }

    pub fn into_polytope(self) -> Result<LatticePolytope> {
        LatticePolytope::reflexive(self.name, self.dim, self.vertices)
    }
}

/// Resolves a builtin name, or reads a polytope JSON file relative to `base`.
pub fn resolve_polytope(name_or_path: &str, base: Option<&Path>) -> Result<LatticePolytope> {
    if BUILTIN_NAMES.iter().any(|n| n.eq_ignore_ascii_case(name_or_path)) {
        return LatticePolytope::builtin(name_or_path);
    }
    let path = match base {
        Some(dir) if Path::new(name_or_path).is_relative() => dir.join(name_or_path),
        _ => Path::new(name_or_path).to_path_buf(),
    };
    if !path.exists() {
        return Err(Error::UnknownBuiltin(name_or_path.to_string()));
    }
    let file: PolytopeFile = read_json(&path)?;
    file.into_polytope()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceFile {
    pub linear: Vec<String>,
    #[serde(rename = "const")]
    pub constant: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestConfigFile {
    pub polytope: String,
    pub k: u32,
    pub pieces: Vec<PieceFile>,
    /// Linearization shift added to every level-`m` weight as `shift * m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<String>,
}

impl TestConfigFile {
    pub fn from_config(tc: &ToricTestConfig) -> Self {
        let pieces = tc
            .g()
            .pieces()
            .iter()
            .map(|p| PieceFile {
                linear: p.linear.iter().map(format_rational).collect(),
                constant: format_rational(&p.constant),
            })
            .collect();
        let shift = (tc.shift() != &rat(0)).then(|| format_rational(tc.shift()));
        Self { polytope: tc.polytope().name().to_string(), k: tc.k(), pieces, shift }
    }

    pub fn into_config(self, base: Option<&Path>) -> Result<ToricTestConfig> {
        let polytope = resolve_polytope(&self.polytope, base)?;
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let linear = p.linear.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>>>()?;
                Ok(AffinePiece::new(linear, parse_rational(&p.constant)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let tc = ToricTestConfig::new(polytope, self.k, PLConvexFunction::new(pieces)?)?;
        match self.shift {
            Some(s) => Ok(tc.shift_linearization(&parse_rational(&s)?)),
            None => Ok(tc),
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::File { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn read_test_config(path: &Path) -> Result<ToricTestConfig> {
    let file: TestConfigFile = read_json(path)?;
    file.into_config(path.parent())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::File { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub beta: LatticePoint,
    pub h: f64,
}

/// A diagonal metric, optionally with the constant of a shifted potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermitianFile {
    pub polytope: String,
    pub k: u32,
    pub entries: Vec<MetricEntry>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub shift: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl HermitianFile {
    pub fn from_metric(h: &DiagonalHermitian) -> Self {
        let entries = h.basis().iter().zip(h.entries()).map(|(b, &v)| MetricEntry { beta: b.clone(), h: v }).collect();
        Self { polytope: h.polytope().name().to_string(), k: h.k(), entries, shift: 0.0 }
    }

    /// Entries may come in any order; they are matched to the basis by exponent.
    pub fn into_metric(self, base: Option<&Path>) -> Result<DiagonalHermitian> {
        let polytope = resolve_polytope(&self.polytope, base)?;
        let basis = polytope.lattice_points(self.k as u64);
        if basis.len() != self.entries.len() {
            return Err(Error::Mismatch(format!(
                "{} entries for {} lattice points of {}P",
                self.entries.len(),
                basis.len(),
                self.k
            )));
        }
        let values = basis
            .iter()
            .map(|b| {
                self.entries
                    .iter()
                    .find(|e| &e.beta == b)
                    .map(|e| e.h)
                    .ok_or_else(|| Error::Mismatch(format!("no metric entry for exponent {b:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        DiagonalHermitian::new(polytope, self.k, values)
    }
}

pub fn read_metric(path: &Path) -> Result<DiagonalHermitian> {
    let file: HermitianFile = read_json(path)?;
    file.into_metric(path.parent())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn config_round_trip() {
        let g = PLConvexFunction::new(vec![
            AffinePiece::linear_int(&[0, 0], 0),
            AffinePiece::new(vec![ratio(1, 2), rat(-1)], ratio(-1, 3)),
        ])
        .unwrap();
        let tc = ToricTestConfig::new(LatticePolytope::f1(), 2, g).unwrap().shift_linearization(&ratio(5, 7));
        let file = TestConfigFile::from_config(&tc);
        let json = serde_json::to_string(&file).unwrap();
        assert!(json.contains("\"1/2\"") && json.contains("\"const\""));
        let back: TestConfigFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_config(None).unwrap(), tc);
    }

    #[test]
    fn metric_round_trip_in_any_order() {
        let h = DiagonalHermitian::new(LatticePolytope::p1(), 1, vec![0.1, 0.25, 3.0]).unwrap();
        let mut file = HermitianFile::from_metric(&h);
        file.entries.reverse();
        let json = serde_json::to_string(&file).unwrap();
        let back: HermitianFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_metric(None).unwrap(), h);
    }

    #[test]
    fn unknown_polytope() {
        assert!(matches!(resolve_polytope("P7", None), Err(Error::UnknownBuiltin(_))));
    }

    #[test]
    fn bad_rational_is_a_parse_error() {
        let file = TestConfigFile {
            polytope: "P1".into(),
            k: 1,
            pieces: vec![PieceFile { linear: vec!["x".into()], constant: "0".into() }],
            shift: None,
        };
        assert!(matches!(file.into_config(None), Err(Error::Parse(_))));
    }
}
