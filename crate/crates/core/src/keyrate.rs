//! Phase-error bound, key-rate formula and intensity optimization.

use std::collections::BTreeMap;

use crate::channel::{
    coherent_rates, single_photon_rates, FluctuationSpec, MeanIntensities, SystemParams,
};
use crate::decoy::{self, tagged_sandwich, YieldInterval};
use crate::error::{Error, Result};
use crate::source::{tagging_probability, Basis, Bit, Intensity, PerSetting, SourceCharacterization};
use crate::virtual_bounds::{g_coefficients, y_vir_upper, GCoefficients, NumericalBoundConfig};

/// Binary entropy in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfUnitInterval { name: "binary entropy argument", value: x });
    }
    Ok(entropy(x))
}

fn entropy(x: f64) -> f64 {
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    term(x) + term(1.0 - x)
}

/// Bit and phase error rates entering the rate formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRates {
    pub e_z: f64,
    pub e_x_upper: f64,
}

impl ErrorRates {
    /// Clamps both rates into `[0, 1/2]`.
    pub fn new(e_z: f64, e_x_upper: f64) -> Self {
        ErrorRates {
            e_z: e_z.clamp(0.0, 0.5),
            e_x_upper: e_x_upper.clamp(0.0, 0.5),
        }
    }
}

/// Upper bound on the phase error rate from single-photon yield bounds.
///
/// Fails with [`Error::VacuousBound`] when the Z-basis single-photon yield is
/// not certified positive or the ratio exceeds 1/2.
pub fn phase_error_from_yields(
    y1_det_zz_lo: f64,
    y1_bcx: &PerSetting<[YieldInterval; 2]>,
    g: &GCoefficients,
) -> Result<f64> {
    let numerator =
        y_vir_upper(g, Bit::Zero, Bit::One, y1_bcx) + y_vir_upper(g, Bit::One, Bit::Zero, y1_bcx);
    if !(y1_det_zz_lo > 0.0) {
        return Err(Error::VacuousBound {
            ratio: f64::INFINITY,
            denominator: y1_det_zz_lo,
        });
    }
    let ratio = numerator / y1_det_zz_lo;
    if ratio > 0.5 {
        return Err(Error::VacuousBound {
            ratio,
            denominator: y1_det_zz_lo,
        });
    }
    Ok(ratio)
}

pub fn phase_error_upper(db: &decoy::DecoyBounds, g: &GCoefficients) -> Result<f64> {
    phase_error_from_yields(db.y1_det_zz_lo, &db.y1_bcx, g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateStatus {
    Ok,
    ZeroRate,
    Infeasible,
}

impl RateStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RateStatus::Ok => "ok",
            RateStatus::ZeroRate => "zero-rate",
            RateStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateResult {
    /// Secret bits per pulse, never negative.
    pub rate: f64,
    pub e_x_upper: f64,
    pub e_z: f64,
    pub q_det_zzs: f64,
    pub q1_lo: f64,
    /// `None` for the single-photon source.
    pub intensities: Option<MeanIntensities>,
    pub status: RateStatus,
    pub diagnostics: BTreeMap<&'static str, f64>,
}

impl KeyRateResult {
    fn infeasible(intensities: Option<MeanIntensities>) -> Self {
        KeyRateResult {
            rate: 0.0,
            e_x_upper: 0.5,
            e_z: 0.5,
            q_det_zzs: 0.0,
            q1_lo: 0.0,
            intensities,
            status: RateStatus::Infeasible,
            diagnostics: BTreeMap::new(),
        }
    }
}

/// `p_Z^2 p_s {Q_1 (1 - h(e_X)) - Q f_EC h(e_Z)}` before clamping.
pub fn raw_key_rate(params: &SystemParams, q_det_zzs: f64, q1_lo: f64, errors: ErrorRates) -> f64 {
    params.p_z
        * params.p_z
        * params.p_s
        * (q1_lo * (1.0 - entropy(errors.e_x_upper))
            - q_det_zzs * params.f_ec * entropy(errors.e_z))
}

/// Key rate of the decoy-state protocol.
pub fn key_rate(
    params: &SystemParams,
    q_det_zzs: f64,
    q1_lo: f64,
    e_x_up: f64,
    e_z: f64,
) -> KeyRateResult {
    let errors = ErrorRates::new(e_z, e_x_up);
    finish(
        raw_key_rate(params, q_det_zzs, q1_lo, errors),
        errors,
        q_det_zzs,
        q1_lo,
        None,
    )
}

/// Key rate of the single-photon source: no intensity sifting factor `p_s`.
pub fn single_photon_key_rate(
    params: &SystemParams,
    q_det_zz: f64,
    q_u_lo: f64,
    e_x_up: f64,
    e_z: f64,
) -> KeyRateResult {
    let errors = ErrorRates::new(e_z, e_x_up);
    let raw = params.p_z
        * params.p_z
        * (q_u_lo * (1.0 - entropy(errors.e_x_upper))
            - q_det_zz * params.f_ec * entropy(errors.e_z));
    finish(raw, errors, q_det_zz, q_u_lo, None)
}

fn finish(
    raw: f64,
    errors: ErrorRates,
    q_det: f64,
    q1_lo: f64,
    intensities: Option<MeanIntensities>,
) -> KeyRateResult {
    let rate = raw.max(0.0);
    KeyRateResult {
        rate,
        e_x_upper: errors.e_x_upper,
        e_z: errors.e_z,
        q_det_zzs: q_det,
        q1_lo,
        intensities,
        status: if rate > 0.0 { RateStatus::Ok } else { RateStatus::ZeroRate },
        diagnostics: BTreeMap::new(),
    }
}

/// First campaign: a single-photon source with phase fluctuations only.
pub fn single_photon_pipeline(
    params: &SystemParams,
    fluct: &FluctuationSpec,
    g: &GCoefficients,
) -> KeyRateResult {
    let p_t = fluct.delta_theta;
    let rates = single_photon_rates(params, fluct);
    let q_u_lo = rates.q_det_zz - p_t;
    let y_det_lo = q_u_lo / (1.0 - p_t);
    let y1_bcx = PerSetting::from_fn(|c| {
        Bit::ALL.map(|b| {
            let (lo, hi) = tagged_sandwich(rates.q(b, c, Basis::X), p_t);
            YieldInterval::new(lo, hi).expect("sandwich endpoints lie in [0, 1]")
        })
    });
    let phase = phase_error_from_yields(y_det_lo, &y1_bcx, g);
    let e_x = *phase.as_ref().unwrap_or(&0.5);
    let mut result = single_photon_key_rate(params, rates.q_det_zz, q_u_lo.max(0.0), e_x, rates.e_z);
    result.diagnostics.insert("y_det_zz_u_lo", y_det_lo);
    result.diagnostics.insert("vacuous_phase_bound", phase.is_err() as u8 as f64);
    result
}

/// Second campaign: a coherent source with fixed mean intensities.
pub fn decoy_pipeline(
    params: &SystemParams,
    fluct: &FluctuationSpec,
    mus: &MeanIntensities,
    g: &GCoefficients,
) -> Result<KeyRateResult> {
    let rates = coherent_rates(params, fluct, mus)?;
    let src = SourceCharacterization::symmetric_phase(
        fluct.theta_halfwidth,
        mus.ranges(fluct.intensity_pct)?,
        fluct.delta_theta,
        fluct.delta_mu,
    )?;
    let db = decoy::estimate(&rates.observed, &src)?;
    let q_det_s = rates.observed.q_det_zz[Intensity::Signal];
    let phase = phase_error_upper(&db, g);
    let e_x = *phase.as_ref().unwrap_or(&0.5);
    let errors = ErrorRates::new(rates.e_z, e_x);
    let mut result = finish(
        raw_key_rate(params, q_det_s, db.q1_det_zzs_lo, errors),
        errors,
        q_det_s,
        db.q1_det_zzs_lo,
        Some(*mus),
    );
    result.diagnostics.insert("y1_det_zz_lo", db.y1_det_zz_lo);
    result.diagnostics.insert("y0_det_zz_lo", db.y0_det_zz_lo);
    result.diagnostics.insert("vacuous_phase_bound", phase.is_err() as u8 as f64);
    result.diagnostics.insert("tagging_probability", src.tagging_probability());
    Ok(result)
}

/// Coefficient bounds for the phase half-width of `fluct`.
pub fn coefficients_for(fluct: &FluctuationSpec) -> Result<GCoefficients> {
    g_coefficients(fluct.theta_halfwidth, &NumericalBoundConfig::default())
}

/// Tagging probability implied by the fluctuation spec for a coherent source.
pub fn coherent_tagging_probability(fluct: &FluctuationSpec) -> f64 {
    tagging_probability(fluct.delta_theta, fluct.delta_mu)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// Points per axis of the coarse grid.
    pub grid: usize,
    /// Refinement stops once both step sizes fall below this.
    pub resolution: f64,
    pub mu_s_min: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            grid: 40,
            resolution: 1e-4,
            mu_s_min: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimized {
    pub intensities: MeanIntensities,
    pub result: KeyRateResult,
    /// `false` when no point of the search box gives a positive rate.
    pub positive: bool,
}

/// Feasible interval of `mu_d1` for a given `mu_s`, open at both ends.
fn decoy1_interval(mu_s: f64, mu_d2: f64, w: f64) -> (f64, f64) {
    let lo = mu_d2 * (1.0 + w) / (1.0 - w);
    let hi = (mu_s * (1.0 - w) - mu_d2 * (1.0 - w)) / (1.0 + w);
    (lo, hi)
}

/// Maximizes the decoy pipeline rate over `(mu_s, mu_d1)` with `mu_d2` fixed.
///
/// A coarse grid locates the best cell and a compass search refines it.
/// Infeasible points count as rate zero.
pub fn optimize_intensities(
    params: &SystemParams,
    fluct: &FluctuationSpec,
    mu_d2: f64,
    cfg: &OptimizerConfig,
) -> Result<Optimized> {
    params.validate()?;
    fluct.validate()?;
    let g = coefficients_for(fluct)?;
    let w = 0.01 * fluct.intensity_pct;
    let s_lo = cfg.mu_s_min;
    let s_hi = 1.0 / (1.0 + w);
    if !(s_hi > s_lo) {
        return Err(Error::InvalidParameter {
            name: "intensity_pct",
            reason: "signal search interval is empty".into(),
        });
    }

    let eval = |mu_s: f64, mu_d1: f64| -> Option<KeyRateResult> {
        let (lo, hi) = decoy1_interval(mu_s, mu_d2, w);
        if !(mu_s >= s_lo && mu_s <= s_hi && mu_d1 > lo && mu_d1 < hi) {
            return None;
        }
        let mus = MeanIntensities::new(mu_s, mu_d1, mu_d2).ok()?;
        decoy_pipeline(params, fluct, &mus, &g).ok()
    };

    let n = cfg.grid.max(2);
    let s_step = (s_hi - s_lo) / (n - 1) as f64;
    let mut best: Option<(f64, f64, KeyRateResult)> = None;
    for i in 0..n {
        let mu_s = if i + 1 == n { s_hi } else { s_lo + s_step * i as f64 };
        let (lo, hi) = decoy1_interval(mu_s, mu_d2, w);
        if hi <= lo {
            continue;
        }
        let d_step = (hi - lo) / (n + 1) as f64;
        for j in 0..n {
            let mu_d1 = lo + d_step * (j + 1) as f64;
            if let Some(r) = eval(mu_s, mu_d1) {
                if best.as_ref().is_none_or(|(_, _, b)| r.rate > b.rate) {
                    best = Some((mu_s, mu_d1, r));
                }
            }
        }
    }

    let Some((mut mu_s, mut mu_d1, mut current)) = best else {
        let mus = MeanIntensities::new(s_hi, (s_hi + mu_d2) / 2.0, mu_d2)?;
        return Ok(Optimized {
            intensities: mus,
            result: KeyRateResult::infeasible(Some(mus)),
            positive: false,
        });
    };

    if current.rate > 0.0 {
        let (lo, hi) = decoy1_interval(mu_s, mu_d2, w);
        let mut steps = [s_step, (hi - lo) / (n + 1) as f64];
        while steps[0] >= cfg.resolution || steps[1] >= cfg.resolution {
            let mut moved = false;
            for axis in 0..2 {
                for dir in [1.0, -1.0] {
                    let (ns, nd) = if axis == 0 {
                        (mu_s + dir * steps[0], mu_d1)
                    } else {
                        (mu_s, mu_d1 + dir * steps[1])
                    };
                    if let Some(r) = eval(ns, nd) {
                        if r.rate > current.rate {
                            (mu_s, mu_d1, current) = (ns, nd, r);
                            moved = true;
                            break;
                        }
                    }
                }
            }
            if !moved {
                steps[0] /= 2.0;
                steps[1] /= 2.0;
            }
        }
    }

    let intensities = MeanIntensities::new(mu_s, mu_d1, mu_d2)?;
    Ok(Optimized {
        intensities,
        positive: current.rate > 0.0,
        result: current,
    })
}
