//! One-signal, two-decoy estimation under intensity fluctuations and tagging.
//!
//! Each intensity setting is only known to lie in `[mu_k^-, mu_k^+]`, and a
//! fraction `p_t` of pulses is tagged (outside its ranges) and may be
//! detected or blocked at Eve's will. Every bound below is evaluated with the
//! range endpoint and tagging correction that makes it worst-case.

use crate::error::{Error, Result};
use crate::source::{
    Bit, Intensity, IntensityRange, PerIntensity, PerSetting, Setting, SourceCharacterization,
};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct YieldInterval {
    lo: f64,
    hi: f64,
}

impl YieldInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lo) {
            return Err(Error::OutOfUnitInterval { name: "yield lower bound", value: lo });
        }
        if !(0.0..=1.0).contains(&hi) {
            return Err(Error::OutOfUnitInterval { name: "yield upper bound", value: hi });
        }
        if lo > hi {
            return Err(Error::InvalidParameter {
                name: "yield interval",
                reason: format!("lower bound {lo} exceeds upper bound {hi}"),
            });
        }
        Ok(YieldInterval { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lo <= y && y <= self.hi
    }
}

/// Observed gains: `Q_{det|Z,Z,k}` and `Q_{b|c,X,k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedRates {
    pub q_det_zz: PerIntensity<f64>,
    /// `q_bcx[c][b][k]`
    pub q_bcx: PerSetting<[PerIntensity<f64>; 2]>,
}

impl ObservedRates {
    pub fn new(
        q_det_zz: PerIntensity<f64>,
        q_bcx: PerSetting<[PerIntensity<f64>; 2]>,
    ) -> Result<Self> {
        let unit = |name, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::OutOfUnitInterval { name, value: v })
            }
        };
        for v in q_det_zz.0 {
            unit("Q_det|Z,Z,k", v)?;
        }
        for c in Setting::ALL {
            for k in Intensity::ALL {
                let q0 = q_bcx[c][0][k];
                let q1 = q_bcx[c][1][k];
                unit("Q_b|c,X,k", q0)?;
                unit("Q_b|c,X,k", q1)?;
                // allow for rounding in simulated rates
                if q0 + q1 > 1.0 + 1e-12 {
                    return Err(Error::OutOfUnitInterval { name: "Q_0|c,X,k + Q_1|c,X,k", value: q0 + q1 });
                }
            }
        }
        Ok(ObservedRates { q_det_zz, q_bcx })
    }

    pub fn q_bcx(&self, c: Setting, b: Bit, k: Intensity) -> f64 {
        self.q_bcx[c][b.index()][k]
    }
}

/// Certified yields of untagged states.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoyBounds {
    /// `Y^-_{det|Z,Z,u,1}`
    pub y1_det_zz_lo: f64,
    /// `Y^-_{det|Z,Z,u,0}`
    pub y0_det_zz_lo: f64,
    /// `Q^-_{u,1,det|Z,Z,s}`
    pub q1_det_zzs_lo: f64,
    /// `[Y^-, Y^+]_{b|c,X,u,1}` indexed `[c][b]`
    pub y1_bcx: PerSetting<[YieldInterval; 2]>,
    /// `Y^-_{b|c,X,u,0}` indexed `[c][b]`
    pub y0_bcx_lo: PerSetting<[f64; 2]>,
    /// Settings whose raw lower bound exceeded the upper bound and was lowered to it.
    pub reordered: Vec<(Setting, Bit)>,
}

fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Bounds on the untagged part of an observed fraction:
/// `(q - p_t)/(1 - p_t) <= q_u <= q/(1 - p_t)`, clamped to `[0, 1]`.
pub fn tagged_sandwich(q: f64, p_t: f64) -> (f64, f64) {
    let keep = 1.0 - p_t;
    (((q - p_t) / keep).max(0.0), (q / keep).min(1.0))
}

fn d1_above_d2(mu: &PerIntensity<IntensityRange>) -> Result<(f64, f64, f64, f64)> {
    let d1 = mu[Intensity::Decoy1];
    let d2 = mu[Intensity::Decoy2];
    if d1.lo() <= d2.hi() {
        return Err(Error::IntensityOrdering("mu_d1^- > mu_d2^+"));
    }
    Ok((d1.lo(), d1.hi(), d2.lo(), d2.hi()))
}

/// Lower bound on the untagged vacuum yield from the two decoys.
pub fn y0_lower(
    q_d1: f64,
    q_d2: f64,
    mu: &PerIntensity<IntensityRange>,
    p_t: f64,
) -> Result<f64> {
    let (d1_lo, d1_hi, d2_lo, d2_hi) = d1_above_d2(mu)?;
    let num = d1_lo * (q_d2 - p_t) * d2_lo.exp() - d2_hi * q_d1 * d1_hi.exp();
    let den = (1.0 - p_t) * (d1_lo - d2_hi);
    Ok(clamp_unit(num / den))
}

/// Lower bound on the untagged single-photon yield.
pub fn y1_lower(
    q_s: f64,
    q_d1: f64,
    q_d2: f64,
    mu: &PerIntensity<IntensityRange>,
    p_t: f64,
    y0_lo: f64,
) -> Result<f64> {
    let s = mu[Intensity::Signal];
    let d1 = mu[Intensity::Decoy1];
    let d2 = mu[Intensity::Decoy2];
    let gap_s = s.lo() - d1.hi() - d2.lo();
    let gap_d = d1.hi() - d2.lo();
    if gap_s <= 0.0 {
        return Err(Error::IntensityOrdering("mu_s^- > mu_d1^+ + mu_d2^-"));
    }
    if gap_d <= 0.0 {
        return Err(Error::IntensityOrdering("mu_d1^+ > mu_d2^-"));
    }
    let keep = 1.0 - p_t;
    let prefactor = s.lo() / (gap_s * gap_d);
    let decoys = ((q_d1 - p_t) * d1.lo().exp() - q_d2 * d2.hi().exp()) / keep;
    let multi = (d1.hi() * d1.hi() - d2.lo() * d2.lo()) / (s.lo() * s.lo());
    let signal = q_s * s.hi().exp() / keep - y0_lo;
    Ok(clamp_unit(prefactor * (decoys - multi * signal)))
}

/// Upper bound on the untagged single-photon yield from the two decoys.
pub fn y1_upper(
    q_d1: f64,
    q_d2: f64,
    mu: &PerIntensity<IntensityRange>,
    p_t: f64,
) -> Result<f64> {
    let (d1_lo, d1_hi, d2_lo, d2_hi) = d1_above_d2(mu)?;
    let num = q_d1 * d1_hi.exp() - (q_d2 - p_t) * d2_lo.exp();
    let den = (1.0 - p_t) * (d1_lo - d2_hi);
    Ok(clamp_unit(num / den))
}

/// Lower bound on the untagged single-photon part of the signal gain.
pub fn q1_signal_lower(y1_lo: f64, mu_s: &IntensityRange, p_t: f64) -> f64 {
    (1.0 - p_t) * mu_s.lo() * (-mu_s.lo()).exp() * y1_lo
}

/// Single-photon and vacuum bounds for one set of three per-intensity rates.
fn rate_bounds(
    q: &PerIntensity<f64>,
    mu: &PerIntensity<IntensityRange>,
    p_t: f64,
) -> Result<(f64, f64, f64)> {
    let (qs, q1, q2) = (q[Intensity::Signal], q[Intensity::Decoy1], q[Intensity::Decoy2]);
    let y0 = y0_lower(q1, q2, mu, p_t)?;
    let y1_lo = y1_lower(qs, q1, q2, mu, p_t, y0)?;
    let y1_hi = y1_upper(q1, q2, mu, p_t)?;
    Ok((y0, y1_lo, y1_hi))
}

/// Runs the estimator for the Z-basis gain and every X-basis rate.
pub fn estimate(obs: &ObservedRates, src: &SourceCharacterization) -> Result<DecoyBounds> {
    let mu = src.intensity();
    let p_t = src.tagging_probability();

    let (y0_zz, y1_zz, _) = rate_bounds(&obs.q_det_zz, mu, p_t)?;
    let q1 = q1_signal_lower(y1_zz, &mu[Intensity::Signal], p_t);

    let mut y1_bcx = PerSetting([[YieldInterval::default(); 2]; 3]);
    let mut y0_bcx_lo = PerSetting([[0.0; 2]; 3]);
    let mut reordered = Vec::new();
    for c in Setting::ALL {
        for b in Bit::ALL {
            let (y0, lo, hi) = rate_bounds(&obs.q_bcx[c][b.index()], mu, p_t)?;
            let lo = if lo > hi {
                reordered.push((c, b));
                hi
            } else {
                lo
            };
            y1_bcx[c][b.index()] = YieldInterval { lo, hi };
            y0_bcx_lo[c][b.index()] = y0;
        }
    }

    Ok(DecoyBounds {
        y1_det_zz_lo: y1_zz,
        y0_det_zz_lo: y0_zz,
        q1_det_zzs_lo: q1,
        y1_bcx,
        y0_bcx_lo,
        reordered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Gain of a photon-number channel for a Poisson source of mean `mu`.
    fn poisson_gain(mu: f64, yields: &[f64]) -> f64 {
        let mut p = (-mu).exp();
        let mut q = 0.0;
        for (n, y) in yields.iter().enumerate() {
            if n > 0 {
                p *= mu / n as f64;
            }
            q += p * y;
        }
        q
    }

    fn threshold_yields(eta: f64, p_d: f64) -> Vec<f64> {
        (0..40)
            .map(|n| 1.0 - (1.0 - p_d).powi(2) * (1.0 - eta).powi(n))
            .collect()
    }

    fn exact_mu(s: f64, d1: f64, d2: f64) -> PerIntensity<IntensityRange> {
        PerIntensity([
            IntensityRange::exact(s).unwrap(),
            IntensityRange::exact(d1).unwrap(),
            IntensityRange::exact(d2).unwrap(),
        ])
    }

    #[test]
    fn sandwich_examples() {
        assert_eq!(tagged_sandwich(0.3, 0.0), (0.3, 0.3));
        let (lo, hi) = tagged_sandwich(0.3, 0.1);
        assert_abs_diff_eq!(lo, 0.2 / 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 0.3 / 0.9, epsilon = 1e-15);
        let (lo, hi) = tagged_sandwich(1e-8, 1e-7);
        assert_eq!(lo, 0.0);
        assert_abs_diff_eq!(hi, 1e-8 / (1.0 - 1e-7), epsilon = 1e-22);
    }

    #[test]
    fn y0_lower_clamps_when_numerator_nonpositive() {
        let mu = exact_mu(0.5, 0.1, 2e-4);
        assert_eq!(y0_lower(0.3, 1e-7, &mu, 1e-7).unwrap(), 0.0);
        assert_eq!(y0_lower(0.0, 1e-7, &mu, 1e-7).unwrap(), 0.0);
    }

    #[test]
    fn y0_lower_below_true_vacuum_yield() {
        // low transmittance keeps the multi-photon correction below y0
        let y = threshold_yields(1e-3, 5e-7);
        let mu = exact_mu(0.5, 0.1, 2e-4);
        let q = |m| poisson_gain(m, &y);
        let lo = y0_lower(q(0.1), q(2e-4), &mu, 0.0).unwrap();
        assert!(lo <= y[0]);
        assert!(lo > 0.0);

        // true intensities offset inside +-10% ranges
        let ranges = PerIntensity([
            IntensityRange::new(0.45, 0.55).unwrap(),
            IntensityRange::new(0.09, 0.11).unwrap(),
            IntensityRange::new(0.00018, 0.00022).unwrap(),
        ]);
        for (t1, t2) in [(0.09, 0.00022), (0.11, 0.00018), (0.095, 0.00021), (0.105, 0.00019)] {
            let p_t = 2e-7;
            // tagged pulses always detected: the observed gain is as large as possible
            let qd1 = (1.0 - p_t) * q(t1) + p_t;
            let qd2 = (1.0 - p_t) * q(t2) + p_t;
            assert!(y0_lower(qd1, qd2, &ranges, p_t).unwrap() <= y[0]);
        }
    }

    #[test]
    fn y1_lower_dark_channel_and_sandwich() {
        let mu = exact_mu(0.5, 0.1, 2e-4);
        assert_eq!(y1_lower(0.0, 0.0, 0.0, &mu, 0.0, 0.0).unwrap(), 0.0);

        let y = threshold_yields(0.1, 5e-7);
        let q = |m| poisson_gain(m, &y);
        let y0 = y0_lower(q(0.1), q(2e-4), &mu, 0.0).unwrap();
        let lo = y1_lower(q(0.5), q(0.1), q(2e-4), &mu, 0.0, y0).unwrap();
        let hi = y1_upper(q(0.1), q(2e-4), &mu, 0.0).unwrap();
        assert!(lo <= y[1] && y[1] <= hi, "{lo} <= {} <= {hi}", y[1]);
        // tight for a no-fluctuation source
        assert!(lo > 0.95 * y[1]);
    }

    #[test]
    fn y1_bounds_hold_at_range_corners() {
        let y = threshold_yields(0.1, 5e-7);
        let q = |m| poisson_gain(m, &y);
        let ranges = PerIntensity([
            IntensityRange::relative(0.5, 5.0).unwrap(),
            IntensityRange::relative(0.1, 5.0).unwrap(),
            IntensityRange::relative(2e-4, 5.0).unwrap(),
        ]);
        let corners = |r: IntensityRange| [r.lo(), r.hi()];
        for ts in corners(ranges[Intensity::Signal]) {
            for t1 in corners(ranges[Intensity::Decoy1]) {
                for t2 in corners(ranges[Intensity::Decoy2]) {
                    let y0 = y0_lower(q(t1), q(t2), &ranges, 0.0).unwrap();
                    let lo = y1_lower(q(ts), q(t1), q(t2), &ranges, 0.0, y0).unwrap();
                    let hi = y1_upper(q(t1), q(t2), &ranges, 0.0).unwrap();
                    assert!(lo <= y[1] && y[1] <= hi);
                }
            }
        }
    }

    #[test]
    fn y1_upper_examples() {
        let mu = exact_mu(0.5, 0.1, 2e-4);
        assert_eq!(y1_upper(0.0, 0.0, &mu, 0.0).unwrap(), 0.0);
        // raw value e^0.1/0.0998 exceeds one
        assert!(0.1f64.exp() / 0.0998 > 1.0);
        assert_eq!(y1_upper(1.0, 0.0, &mu, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn ordering_violations_are_errors() {
        let bad = exact_mu(0.5, 1e-4, 2e-4);
        assert!(y0_lower(0.1, 0.1, &bad, 0.0).is_err());
        assert!(y1_upper(0.1, 0.1, &bad, 0.0).is_err());
        let bad = exact_mu(0.3, 0.3, 2e-4);
        assert!(y1_lower(0.1, 0.1, 0.1, &bad, 0.0, 0.0).is_err());
    }

    #[test]
    fn q1_signal_examples() {
        let mu = IntensityRange::exact(1.0).unwrap();
        assert_eq!(q1_signal_lower(0.0, &mu, 0.0), 0.0);
        assert_abs_diff_eq!(q1_signal_lower(1.0, &mu, 0.0), 0.367879441171442, epsilon = 1e-15);
        let mu = IntensityRange::exact(0.475).unwrap();
        assert_abs_diff_eq!(
            q1_signal_lower(0.1, &mu, 2e-7),
            0.475 * (-0.475f64).exp() * 0.1 * (1.0 - 2e-7),
            epsilon = 1e-17
        );
    }

    #[test]
    fn zero_fluctuation_matches_textbook_formulas() {
        let (s, d1, d2) = (0.5, 0.1, 2e-4);
        let mu = exact_mu(s, d1, d2);
        let (qs, q1, q2) = (3.1e-2, 6.4e-3, 1.4e-5);
        let y0 = ((d1 * q2 * d2.exp() - d2 * q1 * d1.exp()) / (d1 - d2)).max(0.0);
        let y1 = s / (s * d1 - s * d2 - d1 * d1 + d2 * d2)
            * (q1 * d1.exp() - q2 * d2.exp() - (d1 * d1 - d2 * d2) / (s * s) * (qs * s.exp() - y0));
        let yup = (q1 * d1.exp() - q2 * d2.exp()) / (d1 - d2);
        assert_abs_diff_eq!(y0_lower(q1, q2, &mu, 0.0).unwrap(), y0, epsilon = 1e-15);
        assert_abs_diff_eq!(y1_lower(qs, q1, q2, &mu, 0.0, y0).unwrap(), y1, epsilon = 1e-14);
        assert_abs_diff_eq!(y1_upper(q1, q2, &mu, 0.0).unwrap(), yup, epsilon = 1e-14);
    }

    fn uniform_obs(q: f64) -> ObservedRates {
        let per = PerIntensity([q; 3]);
        ObservedRates::new(per, PerSetting([[per, per]; 3])).unwrap()
    }

    #[test]
    fn estimate_dark_channel_gives_no_single_photon_credit() {
        let p_d: f64 = 5e-7;
        let q = 2.0 * p_d * (1.0 - p_d) + p_d * p_d;
        let obs = ObservedRates::new(
            PerIntensity([q; 3]),
            PerSetting([[PerIntensity([q / 2.0; 3]); 2]; 3]),
        )
        .unwrap();
        let src = SourceCharacterization::symmetric_phase(0.0, exact_mu(0.5, 0.1, 2e-4), 1e-7, 0.0)
            .unwrap();
        let db = estimate(&obs, &src).unwrap();
        assert!(db.y1_det_zz_lo < 1e-9);
        for c in Setting::ALL {
            for b in Bit::ALL {
                assert!(db.y1_bcx[c][b.index()].lo() < 1e-9);
            }
        }
    }

    #[test]
    fn estimate_extreme_tagging_collapses() {
        let src = SourceCharacterization::symmetric_phase(
            0.0,
            exact_mu(0.5, 0.1, 2e-4),
            1.0 - 1e-12,
            0.0,
        )
        .unwrap();
        let db = estimate(&uniform_obs(0.01), &src).unwrap();
        assert_eq!(db.y1_det_zz_lo, 0.0);
        assert_eq!(db.y0_det_zz_lo, 0.0);
        for c in Setting::ALL {
            for b in Bit::ALL {
                assert_eq!(db.y1_bcx[c][b.index()].lo(), 0.0);
                assert_eq!(db.y1_bcx[c][b.index()].hi(), 1.0);
            }
        }
    }

    #[test]
    fn estimate_sandwiches_oracle_yields() {
        let eta = 0.05;
        let p_d = 5e-7;
        let (s, d1, d2) = (0.5, 0.1, 2e-4);
        let src =
            SourceCharacterization::symmetric_phase(0.0, exact_mu(s, d1, d2), 0.0, 0.0).unwrap();
        // X-basis outcome b for setting c clicks on a photon with probability pr
        let pr = |c: Setting, b: Bit| match (c, b) {
            (Setting::X0, Bit::Zero) => 1.0,
            (Setting::X0, Bit::One) => 0.0,
            _ => 0.5,
        };
        let det: Vec<f64> = threshold_yields(eta, p_d);
        let bit_yields = |p: f64| -> Vec<f64> {
            // single-click yield of detector b for n photons, double clicks split evenly
            (0..40)
                .map(|n| {
                    let miss_b = (1.0 - p_d) * (1.0 - eta * p).powi(n);
                    let miss_other = (1.0 - p_d) * (1.0 - eta * (1.0 - p)).powi(n);
                    (1.0 - miss_b) * miss_other + 0.5 * (1.0 - miss_b) * (1.0 - miss_other)
                })
                .collect()
        };
        let q_det = PerIntensity([s, d1, d2].map(|m| poisson_gain(m, &det)));
        let q_bcx = PerSetting::from_fn(|c| {
            Bit::ALL.map(|b| {
                let y = bit_yields(pr(c, b));
                PerIntensity([s, d1, d2].map(|m| poisson_gain(m, &y)))
            })
        });
        let obs = ObservedRates::new(q_det, q_bcx).unwrap();
        let db = estimate(&obs, &src).unwrap();
        assert!(db.y1_det_zz_lo <= det[1] && db.y1_det_zz_lo > 0.9 * det[1]);
        assert!(db.y0_det_zz_lo <= det[0]);
        for c in Setting::ALL {
            for b in Bit::ALL {
                let y = bit_yields(pr(c, b));
                let iv = db.y1_bcx[c][b.index()];
                assert!(iv.contains(y[1]), "{c} {b:?}: {iv:?} vs {}", y[1]);
                assert!(db.y0_bcx_lo[c][b.index()] <= y[0]);
            }
        }
        assert!(db.reordered.is_empty());
    }

    #[test]
    fn observed_rates_validation() {
        let per = PerIntensity([0.6; 3]);
        assert!(ObservedRates::new(PerIntensity([0.1; 3]), PerSetting([[per, per]; 3])).is_err());
        assert!(ObservedRates::new(PerIntensity([1.1; 3]), PerSetting([[per, per]; 3])).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tagging_weakens_bounds(
                qs in 1e-4f64..0.2, q1 in 1e-5f64..0.05, q2 in 1e-7f64..1e-3,
                pt in 0.0f64..1e-3, dpt in 0.0f64..1e-3,
            ) {
                let mu = PerIntensity([
                    IntensityRange::relative(0.5, 3.0).unwrap(),
                    IntensityRange::relative(0.1, 3.0).unwrap(),
                    IntensityRange::relative(2e-4, 3.0).unwrap(),
                ]);
                let lo = |p| {
                    let y0 = y0_lower(q1, q2, &mu, p).unwrap();
                    y1_lower(qs, q1, q2, &mu, p, y0).unwrap()
                };
                prop_assert!(lo(pt + dpt) <= lo(pt) + 1e-15);
                prop_assert!(y1_upper(q1, q2, &mu, pt + dpt).unwrap() >= y1_upper(q1, q2, &mu, pt).unwrap() - 1e-15);
                prop_assert!((0.0..=1.0).contains(&lo(pt)));
            }

            #[test]
            fn sandwich_is_ordered(q in 0.0f64..1.0, pt in 0.0f64..0.99) {
                let (lo, hi) = tagged_sandwich(q, pt);
                prop_assert!(0.0 <= lo && lo <= hi && hi <= 1.0);
                prop_assert!(lo <= q + 1e-15);
            }
        }
    }
}
