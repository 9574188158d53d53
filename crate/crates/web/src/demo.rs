//! JSON-in, JSON-out versions of the demo operations.

use serde_json::json;

use fano_balance::analysis::{b_value, partition_function, QuadratureSpec, ToricPotential};
use fano_balance::balanced::{donaldson_iterate, slope_at_infinity, time_grid, z_limit};
use fano_balance::error::{Error, Result};
use fano_balance::functionals::{fs, DiagonalHermitian, FunctionalContext};
use fano_balance::invariants::{chow_df_limit, InvariantReport};
use fano_balance::io::TestConfigFile;
use fano_balance::lattice::LatticePolytope;
use fano_balance::rational::to_f64;
use fano_balance::testconfig::ToricTestConfig;

/// Upper end of the Chow sequence shown next to `DF/2`.
const CHOW_TERMS: u64 = 12;
/// Sample points of the potential and defect curves on `[-X_MAX, X_MAX]`.
const CURVE_SAMPLES: usize = 161;
const X_MAX: f64 = 8.0;
const MAX_LEVEL: u32 = 8;
const TOL: f64 = 1e-10;

fn parse_config(config_json: &str) -> Result<ToricTestConfig> {
    let file: TestConfigFile = serde_json::from_str(config_json).map_err(|e| Error::Parse(e.to_string()))?;
    file.into_config(None)
}

pub fn invariants(config_json: &str) -> Result<String> {
    let tc = parse_config(config_json)?;
    let report = InvariantReport::compute(&tc)?;
    let chow: Vec<f64> = (1..=CHOW_TERMS).map(|m| chow_df_limit(&tc, m).map(|v| to_f64(&v))).collect::<Result<_>>()?;
    Ok(json!({ "report": report, "rescaled_chow": chow }).to_string())
}

fn curves(pot: &ToricPotential, polytope: &LatticePolytope, spec: &QuadratureSpec) -> Result<serde_json::Value> {
    let z = partition_function(pot, polytope, spec)?;
    let volume = to_f64(&polytope.volume());
    let xs: Vec<f64> = (0..CURVE_SAMPLES).map(|i| -X_MAX + 2.0 * X_MAX * i as f64 / (CURVE_SAMPLES - 1) as f64).collect();
    let u: Vec<f64> = xs.iter().map(|&x| pot.value(&[x, 0.0])).collect();
    let b: Vec<f64> = xs.iter().map(|&x| b_value(pot, z, volume, &[x, 0.0])).collect();
    Ok(json!({ "x": xs, "u": u, "b": b }))
}

pub fn balance_p1(k: u32, max_iter: usize) -> Result<String> {
    if !(1..=MAX_LEVEL).contains(&k) {
        return Err(Error::Mismatch(format!("level must be in 1..={MAX_LEVEL}, got {k}")));
    }
    let p1 = LatticePolytope::p1();
    let ctx = FunctionalContext::new(p1.clone(), k)?;
    let spec = QuadratureSpec::new(1);
    let start = DiagonalHermitian::identity(p1.clone(), k);
    let (h, trace) = match donaldson_iterate(&ctx, &start, TOL, max_iter, &spec) {
        Ok(r) => (r.h, r.trace),
        Err(Error::NonConvergence { trace, .. }) => (DiagonalHermitian::new(p1.clone(), k, trace.final_h.clone())?, *trace),
        Err(e) => return Err(e),
    };
    let before = curves(&fs(&start), &p1, &spec)?;
    let after = curves(&fs(&h), &p1, &spec)?;
    Ok(json!({
        "k": k,
        "converged": trace.converged,
        "iterations": trace.iterations,
        "residuals": trace.residuals,
        "entries": h.entries(),
        "before": before,
        "after": after,
    })
    .to_string())
}

pub fn slope_curve(config_json: &str, t_max: f64) -> Result<String> {
    let tc = parse_config(config_json)?;
    if !(4.0..=80.0).contains(&t_max) {
        return Err(Error::Mismatch(format!("t_max must be in [4, 80], got {t_max}")));
    }
    let grid = time_grid(t_max, 2.0);
    let h = DiagonalHermitian::identity(tc.polytope().clone(), tc.k());
    let slope = slope_at_infinity(&h, &tc, &grid)?;
    let ctx = FunctionalContext::new(tc.polytope().clone(), tc.k())?;
    let energy = z_limit(&ctx, &h, &tc, &grid)?;
    Ok(json!({ "product": tc.is_product(), "slope": slope, "balancing_energy": energy }).to_string())
}
