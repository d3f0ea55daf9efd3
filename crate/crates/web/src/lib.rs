//! Browser bindings: key-rate curves, coefficient bounds and single-point
//! evaluations for the static demo page in `www/`.

use wasm_bindgen::prelude::*;

use qkd_fluct::channel::{FluctuationSpec, MeanIntensities, SystemParams};
use qkd_fluct::keyrate::{
    coefficients_for, decoy_pipeline, optimize_intensities, single_photon_pipeline,
    OptimizerConfig,
};
use qkd_fluct::source::{Bit, Setting};
use qkd_fluct::virtual_bounds::CLOSED_FORM_LIMIT;

const MU_D2: f64 = 2e-4;

fn lengths(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, String> {
    if !(step > 0.0 && start >= 0.0 && stop >= start) {
        return Err(format!("bad fiber range {start}:{stop}:{step}"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    if n > 5000 {
        return Err("too many fiber lengths".into());
    }
    Ok((0..=n).map(|i| start + step * i as f64).collect())
}

fn spec(theta_deg: f64, x_pct: f64) -> Result<FluctuationSpec, String> {
    let limit = CLOSED_FORM_LIMIT.to_degrees();
    if !(0.0..limit).contains(&theta_deg) {
        return Err(format!("theta must lie in [0, {limit})"));
    }
    let s = FluctuationSpec::from_degrees(theta_deg, x_pct);
    s.validate().map_err(|e| e.to_string())?;
    Ok(s)
}

/// Rates along the fiber; `coherent` selects the decoy source with optimized
/// intensities, otherwise the single-photon source (and `x_pct` is ignored).
pub fn curve(
    coherent: bool,
    theta_deg: f64,
    x_pct: f64,
    start: f64,
    stop: f64,
    step: f64,
    grid: usize,
) -> Result<Vec<f64>, String> {
    let ls = lengths(start, stop, step)?;
    if coherent {
        let fluct = spec(theta_deg, x_pct)?;
        let cfg = OptimizerConfig {
            grid: grid.max(2),
            ..Default::default()
        };
        ls.iter()
            .map(|&l| {
                optimize_intensities(&SystemParams::default().at_length(l), &fluct, MU_D2, &cfg)
                    .map(|o| o.result.rate)
                    .map_err(|e| e.to_string())
            })
            .collect()
    } else {
        let fluct = spec(theta_deg, 0.0)?;
        let g = coefficients_for(&fluct).map_err(|e| e.to_string())?;
        Ok(ls
            .iter()
            .map(|&l| single_photon_pipeline(&SystemParams::default().at_length(l), &fluct, &g).rate)
            .collect())
    }
}

/// `[p_vir(0), p_vir(1), g(0, 0_Z), g(0, 1_Z), g(0, 0_X), g(1, 0_Z), g(1, 1_Z), g(1, 0_X)]`
pub fn coefficients(theta_deg: f64) -> Result<Vec<f64>, String> {
    let g = coefficients_for(&spec(theta_deg, 0.0)?).map_err(|e| e.to_string())?;
    let mut out = vec![g.p_vir(Bit::Zero), g.p_vir(Bit::One)];
    for a in Bit::ALL {
        out.extend(Setting::ALL.map(|c| g.g(a, c)));
    }
    Ok(out)
}

/// `[rate, e_x_upper, e_z, q1_lo]` for fixed decoy intensities.
pub fn point(
    theta_deg: f64,
    x_pct: f64,
    length_km: f64,
    mu_s: f64,
    mu_d1: f64,
    mu_d2: f64,
) -> Result<Vec<f64>, String> {
    let fluct = spec(theta_deg, x_pct)?;
    let g = coefficients_for(&fluct).map_err(|e| e.to_string())?;
    let mus = MeanIntensities::new(mu_s, mu_d1, mu_d2).map_err(|e| e.to_string())?;
    let r = decoy_pipeline(&SystemParams::default().at_length(length_km), &fluct, &mus, &g)
        .map_err(|e| e.to_string())?;
    Ok(vec![r.rate, r.e_x_upper, r.e_z, r.q1_lo])
}

#[wasm_bindgen]
pub fn key_rate_curve(
    coherent: bool,
    theta_deg: f64,
    x_pct: f64,
    start: f64,
    stop: f64,
    step: f64,
    grid: usize,
) -> Result<Vec<f64>, JsError> {
    curve(coherent, theta_deg, x_pct, start, stop, step, grid).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn coefficient_table(theta_deg: f64) -> Result<Vec<f64>, JsError> {
    coefficients(theta_deg).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn evaluate_point(
    theta_deg: f64,
    x_pct: f64,
    length_km: f64,
    mu_s: f64,
    mu_d1: f64,
    mu_d2: f64,
) -> Result<Vec<f64>, JsError> {
    point(theta_deg, x_pct, length_km, mu_s, mu_d1, mu_d2).map_err(|e| JsError::new(&e))
}
