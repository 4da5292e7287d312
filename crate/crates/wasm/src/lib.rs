//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export takes plain numbers and strings and returns a JSON document;
//! the computations live in [`demo`] so they can be tested natively.

use wasm_bindgen::prelude::*;

pub mod demo;

fn to_js<T: serde::Serialize>(value: Result<T, String>) -> Result<String, JsValue> {
    value
        .and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

/// Simulate a dataset and fit it; see [`demo::fit`].
#[wasm_bindgen(js_name = fitDemo)]
#[allow(clippy::too_many_arguments)]
pub fn fit_demo(
    truth: &str,
    space: &str,
    shrinkage: &str,
    n: usize,
    sigma2: f64,
    draws: usize,
    seed: u32,
) -> Result<String, JsValue> {
    to_js(demo::fit(truth, space, shrinkage, n, sigma2, draws, u64::from(seed)))
}

/// Cubic B-spline basis functions on an even grid; see [`demo::basis`].
#[wasm_bindgen(js_name = basisFunctions)]
pub fn basis_functions(knots: usize, points: usize) -> Result<String, JsValue> {
    to_js(demo::basis(knots, points))
}

/// Projection of a truth curve onto a linearized space; see [`demo::tangent`].
#[wasm_bindgen(js_name = tangentProjection)]
pub fn tangent_projection(target: &str, space: &str, theta_nl: Vec<f64>, points: usize) -> Result<String, JsValue> {
    to_js(demo::tangent(target, space, &theta_nl, points))
}
