//! Simulated observables for a lossy fiber link with two threshold detectors.
//!
//! Phases are drawn from a Gaussian of standard deviation
//! `theta / sigma_divisor` around their nominal values, which shrinks each
//! single-photon Bloch vector by `r = exp(-(theta/divisor)^2 / 2)`. For the
//! coherent source the intensity is also Gaussian, and every integral over
//! it reduces to the Gaussian moment-generating function because the click
//! model is a sum of exponentials linear in the intensity.

use crate::decoy::ObservedRates;
use crate::error::{Error, Result};
use crate::source::{
    check_intensity_ordering, Basis, Bit, BlochVector, Intensity, IntensityRange, PerIntensity,
    PerSetting, Setting,
};

pub const DEFAULT_SIGMA_DIVISOR: f64 = 5.33;

/// Link and detector parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub fiber_length_km: f64,
    pub attenuation_db_per_km: f64,
    pub eta_b: f64,
    pub p_d: f64,
    pub f_ec: f64,
    pub p_z: f64,
    pub p_s: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            fiber_length_km: 0.0,
            attenuation_db_per_km: 0.2,
            eta_b: 0.15,
            p_d: 5e-7,
            f_ec: 1.22,
            p_z: 2.0 / 3.0,
            p_s: 1.0 / 3.0,
        }
    }
}

impl SystemParams {
    pub fn at_length(mut self, km: f64) -> Self {
        self.fiber_length_km = km;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.fiber_length_km >= 0.0 && self.fiber_length_km.is_finite()) {
            return bad("fiber_length_km", "must be finite and non-negative");
        }
        if !(self.attenuation_db_per_km >= 0.0 && self.attenuation_db_per_km.is_finite()) {
            return bad("attenuation_db_per_km", "must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.eta_b) {
            return bad("eta_b", "must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.p_d) {
            return bad("p_d", "must lie in [0, 1)");
        }
        if !(self.f_ec >= 1.0) {
            return bad("f_ec", "must be at least 1");
        }
        if !(self.p_z > 0.0 && self.p_z < 1.0) {
            return bad("p_z", "must lie in (0, 1)");
        }
        if !(self.p_s > 0.0 && self.p_s < 1.0) {
            return bad("p_s", "must lie in (0, 1)");
        }
        Ok(())
    }

    /// `eta_ch = 10^(-alpha l / 10)`
    pub fn channel_transmittance(&self) -> f64 {
        10f64.powf(-self.attenuation_db_per_km * self.fiber_length_km / 10.0)
    }

    /// Overall single-photon transmittance, including the interferometer's factor 1/2.
    pub fn eta(&self) -> f64 {
        self.channel_transmittance() * self.eta_b / 2.0
    }
}

/// How far phases and intensities may wander, and with what confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctuationSpec {
    /// Phases stay within `nominal +- theta_halfwidth` (radians).
    pub theta_halfwidth: f64,
    /// Intensities stay within `(1 +- x/100) mean`.
    pub intensity_pct: f64,
    /// Range half-width over Gaussian standard deviation.
    pub sigma_divisor: f64,
    pub delta_theta: f64,
    pub delta_mu: f64,
}

impl Default for FluctuationSpec {
    fn default() -> Self {
        FluctuationSpec {
            theta_halfwidth: 0.0,
            intensity_pct: 0.0,
            sigma_divisor: DEFAULT_SIGMA_DIVISOR,
            delta_theta: 1e-7,
            delta_mu: 1e-7,
        }
    }
}

impl FluctuationSpec {
    pub fn from_degrees(theta_deg: f64, intensity_pct: f64) -> Self {
        FluctuationSpec {
            theta_halfwidth: theta_deg.to_radians(),
            intensity_pct,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_halfwidth >= 0.0 && self.theta_halfwidth.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "theta_halfwidth",
                reason: format!("{} must be finite and non-negative", self.theta_halfwidth),
            });
        }
        if !(self.intensity_pct >= 0.0 && self.intensity_pct < 100.0) {
            return Err(Error::InvalidParameter {
                name: "intensity_pct",
                reason: format!("{} must lie in [0, 100)", self.intensity_pct),
            });
        }
        if !(self.sigma_divisor > 0.0 && self.sigma_divisor.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sigma_divisor",
                reason: format!("{} must be positive", self.sigma_divisor),
            });
        }
        for (name, v) in [("delta_theta", self.delta_theta), ("delta_mu", self.delta_mu)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidProbability { name, value: v });
            }
        }
        Ok(())
    }

    /// Bloch-vector shrink factor of the phase-averaged states.
    pub fn shrink_factor(&self) -> f64 {
        let s = self.theta_halfwidth / self.sigma_divisor;
        (-s * s / 2.0).exp()
    }

    /// Standard deviation of the intensity around `mean`.
    pub fn intensity_sigma(&self, mean: f64) -> f64 {
        0.01 * self.intensity_pct * mean / self.sigma_divisor
    }
}

/// Mean photon numbers of the three intensity settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanIntensities {
    pub mu_s: f64,
    pub mu_d1: f64,
    pub mu_d2: f64,
}

impl MeanIntensities {
    pub fn new(mu_s: f64, mu_d1: f64, mu_d2: f64) -> Result<Self> {
        if !(mu_s > mu_d1 && mu_d1 > mu_d2 && mu_d2 >= 0.0) {
            return Err(Error::IntensityOrdering("mu_s > mu_d1 > mu_d2 >= 0"));
        }
        Ok(MeanIntensities { mu_s, mu_d1, mu_d2 })
    }

    pub fn mean(&self, k: Intensity) -> f64 {
        match k {
            Intensity::Signal => self.mu_s,
            Intensity::Decoy1 => self.mu_d1,
            Intensity::Decoy2 => self.mu_d2,
        }
    }

    /// `(1 +- x/100) mean` for each setting, checked against the decoy orderings.
    pub fn ranges(&self, intensity_pct: f64) -> Result<PerIntensity<IntensityRange>> {
        let r = PerIntensity([
            IntensityRange::relative(self.mu_s, intensity_pct)?,
            IntensityRange::relative(self.mu_d1, intensity_pct)?,
            IntensityRange::relative(self.mu_d2, intensity_pct)?,
        ]);
        check_intensity_ordering(&r)?;
        Ok(r)
    }
}

/// Phase-averaged single-photon state of setting `c`.
pub fn effective_bloch(c: Setting, fluct: &FluctuationSpec) -> BlochVector {
    let r = fluct.shrink_factor();
    match c {
        Setting::Z0 => BlochVector::new(0.0, 0.0, r),
        Setting::Z1 => BlochVector::new(0.0, 0.0, -r),
        Setting::X0 => BlochVector::new(r, 0.0, 0.0),
    }
}

/// `Pr[b | rho_c, W'] = Tr[P(|b_W'>) rho_c]`.
pub fn detection_prob(b: Bit, c: Setting, basis: Basis, fluct: &FluctuationSpec) -> f64 {
    let v = effective_bloch(c, fluct);
    let component = match basis {
        Basis::Z => v.z,
        Basis::X => v.x,
    };
    0.5 * (1.0 + b.sign() * component)
}

fn basis_index(w: Basis) -> usize {
    match w {
        Basis::Z => 0,
        Basis::X => 1,
    }
}

/// Observables of the single-photon source simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SinglePhotonRates {
    /// `q[c][basis][b]`
    q: PerSetting<[[f64; 2]; 2]>,
    pub q_det_zz: f64,
    pub e_z: f64,
}

impl SinglePhotonRates {
    /// `Q_{b|c,W'}`
    pub fn q(&self, b: Bit, c: Setting, basis: Basis) -> f64 {
        self.q[c][basis_index(basis)][b.index()]
    }
}

/// Click statistics for a single-photon source.
pub fn single_photon_rates(params: &SystemParams, fluct: &FluctuationSpec) -> SinglePhotonRates {
    let eta = params.eta();
    let p_d = params.p_d;
    let dark_single = (1.0 - eta) * p_d * (1.0 - p_d);
    let double = 0.5 * (eta * p_d + (1.0 - eta) * p_d * p_d);
    let q = PerSetting::from_fn(|c| {
        [Basis::Z, Basis::X].map(|w| {
            Bit::ALL.map(|b| {
                eta * detection_prob(b, c, w, fluct) * (1.0 - p_d) + dark_single + double
            })
        })
    });
    let q_det_zz = -f64::exp_m1(2.0 * f64::ln_1p(-p_d) + f64::ln_1p(-eta));
    let errors = 0.5 * q[Setting::Z0][0][1] + 0.5 * q[Setting::Z1][0][0];
    SinglePhotonRates {
        q,
        q_det_zz,
        e_z: errors / q_det_zz,
    }
}

/// `E[exp(coef * mu)]` for `mu ~ N(mean, sigma^2)`.
pub fn gaussian_expectation(mean: f64, sigma: f64, coef: f64) -> f64 {
    ln_gaussian_expectation(mean, sigma, coef).exp()
}

pub fn ln_gaussian_expectation(mean: f64, sigma: f64, coef: f64) -> f64 {
    coef * mean + 0.5 * coef * coef * sigma * sigma
}

/// Observables of the coherent-source simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentRates {
    pub observed: ObservedRates,
    /// `Q_{b|c,Z,k}` indexed `[c][b][k]`
    pub q_bcz: PerSetting<[PerIntensity<f64>; 2]>,
    pub e_z: f64,
}

/// Gain of outcome `b` for a Gaussian-distributed coherent intensity.
///
/// With `A = 1 - p_d` and `E_p = E[exp(-p mu eta)]`,
/// `Q_b = (1 - A E_{P_b})/2 + A E_{P_b'} (1 - A E_1 / E_{P_b'})/2`, which keeps
/// every term non-negative.
fn coherent_outcome_gain(pr_b: f64, eta: f64, ln_a: f64, mean: f64, sigma: f64) -> f64 {
    let l = |p: f64| ln_gaussian_expectation(mean, sigma, -p * eta);
    let ln_b = ln_a + l(pr_b);
    let ln_other = ln_a + l(1.0 - pr_b);
    let ln_both = 2.0 * ln_a + l(1.0);
    -0.5 * ln_b.exp_m1() - 0.5 * ln_other.exp() * (ln_both - ln_other).exp_m1()
}

/// `Q_{det|Z,Z,k} = 1 - (1 - p_d)^2 E[exp(-mu eta)]`.
fn coherent_gain(eta: f64, ln_a: f64, mean: f64, sigma: f64) -> f64 {
    -(2.0 * ln_a + ln_gaussian_expectation(mean, sigma, -eta)).exp_m1()
}

/// Observed rates for a phase-randomized coherent source with fluctuating phase and intensity.
pub fn coherent_rates(
    params: &SystemParams,
    fluct: &FluctuationSpec,
    mus: &MeanIntensities,
) -> Result<CoherentRates> {
    mus.ranges(fluct.intensity_pct)?;
    let eta = params.eta();
    let ln_a = (-params.p_d).ln_1p();
    let stats = |k: Intensity| (mus.mean(k), fluct.intensity_sigma(mus.mean(k)));

    let q_det_zz = PerIntensity::from_fn(|k| {
        let (m, s) = stats(k);
        coherent_gain(eta, ln_a, m, s)
    });
    let table = |basis: Basis| {
        PerSetting::from_fn(|c| {
            Bit::ALL.map(|b| {
                let pr = detection_prob(b, c, basis, fluct);
                PerIntensity::from_fn(|k| {
                    let (m, s) = stats(k);
                    coherent_outcome_gain(pr, eta, ln_a, m, s)
                })
            })
        })
    };
    let q_bcx = table(Basis::X);
    let q_bcz = table(Basis::Z);

    let sig = Intensity::Signal;
    let errors = 0.5 * q_bcz[Setting::Z0][1][sig] + 0.5 * q_bcz[Setting::Z1][0][sig];
    let e_z = errors / q_det_zz[sig];
    Ok(CoherentRates {
        observed: ObservedRates::new(q_det_zz, q_bcx)?,
        q_bcz,
        e_z,
    })
}
