//! Browser bindings for the public-goods dynamics.
//!
//! Every export takes the game variant by name (`"CDN"`, `"CDNPA"`, `"CDNP"`,
//! `"CDNP_HOMO"`) and the homophily degree, and returns a flat `Float64Array` in
//! plot coordinates: the ternary plane for three strategies, the tetrahedron for
//! four. The wrapped functions return `Result<_, String>` so they can be tested
//! off the browser.

use dilemma_core::dynamics::{cooperative_volume, field_raster, integrate_flow};
use dilemma_core::geometry::plot_coordinates;
use dilemma_core::{FlowParams, GameSpec, PolicyProfile, Variant};
use wasm_bindgen::prelude::*;

/// Default game of `variant` with homophily degree `lambda`.
fn spec(variant: &str, lambda: f64) -> Result<GameSpec, String> {
    let variant: Variant = variant.parse().map_err(|e| format!("{e}"))?;
    let spec = GameSpec::defaults(variant).with_lambda(lambda);
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

fn plot(point: &[f64]) -> Vec<f64> {
    plot_coordinates(point).unwrap_or_else(|_| vec![f64::NAN; point.len() - 1])
}

/// Number of plot coordinates per point: 2 for three strategies, 3 for four.
pub fn plot_dimension_of(variant: &str) -> Result<usize, String> {
    Ok(spec(variant, 0.0)?.arity() - 1)
}

/// Grid points of the simplex with the flow direction at each, as
/// `[p.., d..]` per point where `p` is the plot position and `d` the direction
/// mapped into plot space.
pub fn field_raster_points(variant: &str, lambda: f64, resolution: usize) -> Result<Vec<f64>, String> {
    let spec = spec(variant, lambda)?;
    let beta = FlowParams::default().beta;
    let raster = field_raster(&spec, resolution, beta).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(raster.len() * 2 * (spec.arity() - 1));
    for p in &raster {
        let here = plot(&p.point);
        // Plot coordinates are affine in the weights, so the image of the direction
        // is the difference of two mapped points.
        let ahead: Vec<f64> = p.point.iter().zip(&p.direction).map(|(x, d)| x + beta * d).collect();
        let there = plot_affine(&ahead);
        out.extend(&here);
        out.extend(here.iter().zip(&there).map(|(a, b)| (b - a) / beta));
    }
    Ok(out)
}

/// Plot position of a weight vector that may sit slightly off the simplex.
fn plot_affine(weights: &[f64]) -> Vec<f64> {
    let arity = weights.len();
    let mut acc = vec![0.0; arity - 1];
    for (slot, w) in weights.iter().enumerate() {
        let mut vertex = vec![0.0; arity];
        vertex[slot] = 1.0;
        for (a, v) in acc.iter_mut().zip(plot(&vertex)) {
            *a += w * v;
        }
    }
    acc
}

/// Snapshots of the symmetric flow from `start`, flattened plot positions.
pub fn flow_trajectory_points(variant: &str, lambda: f64, start: &[f64], steps: usize, thin: usize) -> Result<Vec<f64>, String> {
    let spec = spec(variant, lambda)?;
    let profile = PolicyProfile::symmetric(spec.n, start).map_err(|e| e.to_string())?;
    let traj = integrate_flow(&spec, &profile, &FlowParams::default(), steps, thin.max(1)).map_err(|e| e.to_string())?;
    Ok(traj.points.iter().flat_map(|p| plot(p)).collect())
}

/// `[value, stderr, hits]` of the cooperative volume estimate.
pub fn volume_estimate(variant: &str, lambda: f64, samples: usize, seed: u64) -> Result<Vec<f64>, String> {
    let spec = spec(variant, lambda)?;
    let r = cooperative_volume(&spec, samples, seed, &FlowParams::default()).map_err(|e| e.to_string())?;
    Ok(vec![r.value, r.stderr, r.hits as f64])
}

#[wasm_bindgen]
pub fn plot_dimension(variant: &str) -> Result<usize, JsError> {
    plot_dimension_of(variant).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn field(variant: &str, lambda: f64, resolution: usize) -> Result<Vec<f64>, JsError> {
    field_raster_points(variant, lambda, resolution).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn trajectory(variant: &str, lambda: f64, start: &[f64], steps: usize, thin: usize) -> Result<Vec<f64>, JsError> {
    flow_trajectory_points(variant, lambda, start, steps, thin).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn volume(variant: &str, lambda: f64, samples: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    volume_estimate(variant, lambda, samples, seed).map_err(|e| JsError::new(&e))
}
