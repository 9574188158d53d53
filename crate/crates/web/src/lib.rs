//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes and returns JSON strings so the page needs no glue
//! beyond what `wasm-bindgen` generates. The work is done by the functions
//! in [`demo`], which are plain Rust and testable off the browser.

use wasm_bindgen::prelude::*;

pub mod demo;

fn js_err(e: fano_balance::error::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Exact invariants of a test configuration given as JSON.
#[wasm_bindgen]
pub fn invariants(config_json: &str) -> Result<String, JsError> {
    demo::invariants(config_json).map_err(js_err)
}

/// Donaldson iteration on `P^1` at level `k` with sampled potential and
/// Kähler-Einstein defect curves before and after.
#[wasm_bindgen]
pub fn balance_p1(k: u32, max_iter: u32) -> Result<String, JsError> {
    demo::balance_p1(k, max_iter as usize).map_err(js_err)
}

/// Ding slope and balancing energy along the Bergman ray of a configuration.
#[wasm_bindgen]
pub fn slope_curve(config_json: &str, t_max: f64) -> Result<String, JsError> {
    demo::slope_curve(config_json, t_max).map_err(js_err)
}
