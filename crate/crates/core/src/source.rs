//! Characterization of a fluctuating phase-encoding source.
//!
//! Alice's source is described only through ranges: each phase setting lies
//! in a known interval and each intensity setting lies in a known interval,
//! except with small probabilities `delta_theta` and `delta_mu`. Pulses
//! outside their ranges are treated as tagged. Nothing here assumes the
//! per-pulse values are independent or identically distributed.
//!
//! The single-photon subspace is handled through Bloch vectors in the frame
//! where `|theta>` has Bloch vector `(sin theta, 0, cos theta)`.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Default absolute tolerance for floating-point invariant checks.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// Bit/basis setting `c` chosen by Alice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Setting {
    Z0,
    Z1,
    X0,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::Z0, Setting::Z1, Setting::X0];

    pub fn index(self) -> usize {
        match self {
            Setting::Z0 => 0,
            Setting::Z1 => 1,
            Setting::X0 => 2,
        }
    }

    /// Nominal encoding phase: 0, pi and pi/2.
    pub fn nominal_phase(self) -> f64 {
        match self {
            Setting::Z0 => 0.0,
            Setting::Z1 => std::f64::consts::PI,
            Setting::X0 => std::f64::consts::FRAC_PI_2,
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::Z0 => "0_Z",
            Setting::Z1 => "1_Z",
            Setting::X0 => "0_X",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bit {
    Zero,
    One,
}

impl Bit {
    pub const ALL: [Bit; 2] = [Bit::Zero, Bit::One];

    pub fn index(self) -> usize {
        match self {
            Bit::Zero => 0,
            Bit::One => 1,
        }
    }

    pub fn flip(self) -> Bit {
        match self {
            Bit::Zero => Bit::One,
            Bit::One => Bit::Zero,
        }
    }

    /// `(-1)^b`
    pub fn sign(self) -> f64 {
        match self {
            Bit::Zero => 1.0,
            Bit::One => -1.0,
        }
    }
}

/// Bob's measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Z,
    X,
}

/// Intensity setting `k`: signal and two decoys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Intensity {
    Signal,
    Decoy1,
    Decoy2,
}

impl Intensity {
    pub const ALL: [Intensity; 3] = [Intensity::Signal, Intensity::Decoy1, Intensity::Decoy2];

    pub fn index(self) -> usize {
        match self {
            Intensity::Signal => 0,
            Intensity::Decoy1 => 1,
            Intensity::Decoy2 => 2,
        }
    }
}

impl fmt::Display for Intensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Intensity::Signal => "s",
            Intensity::Decoy1 => "d1",
            Intensity::Decoy2 => "d2",
        })
    }
}

/// A value for each of the three bit/basis settings.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerSetting<T>(pub [T; 3]);

impl<T> PerSetting<T> {
    pub fn from_fn(mut f: impl FnMut(Setting) -> T) -> Self {
        PerSetting([f(Setting::Z0), f(Setting::Z1), f(Setting::X0)])
    }
}

impl<T> Index<Setting> for PerSetting<T> {
    type Output = T;
    fn index(&self, c: Setting) -> &T {
        &self.0[c.index()]
    }
}

impl<T> IndexMut<Setting> for PerSetting<T> {
    fn index_mut(&mut self, c: Setting) -> &mut T {
        &mut self.0[c.index()]
    }
}

/// A value for each of the three intensity settings.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerIntensity<T>(pub [T; 3]);

impl<T> PerIntensity<T> {
    pub fn from_fn(mut f: impl FnMut(Intensity) -> T) -> Self {
        PerIntensity([
            f(Intensity::Signal),
            f(Intensity::Decoy1),
            f(Intensity::Decoy2),
        ])
    }
}

impl<T> Index<Intensity> for PerIntensity<T> {
    type Output = T;
    fn index(&self, k: Intensity) -> &T {
        &self.0[k.index()]
    }
}

impl<T> IndexMut<Intensity> for PerIntensity<T> {
    fn index_mut(&mut self, k: Intensity) -> &mut T {
        &mut self.0[k.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseRange {
    lo: f64,
    hi: f64,
}

impl PhaseRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi || hi - lo >= std::f64::consts::PI {
            return Err(Error::InvalidPhaseRange { lo, hi });
        }
        Ok(PhaseRange { lo, hi })
    }

    /// `[center - halfwidth, center + halfwidth]`
    pub fn symmetric(center: f64, halfwidth: f64) -> Result<Self> {
        Self::new(center - halfwidth, center + halfwidth)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.lo <= theta && theta <= self.hi
    }

    /// Exact interval intersection test, no tolerance.
    pub fn overlaps(&self, other: &PhaseRange) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityRange {
    lo: f64,
    hi: f64,
}

impl IntensityRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo > hi {
            return Err(Error::InvalidIntensityRange { lo, hi });
        }
        Ok(IntensityRange { lo, hi })
    }

    /// A point intensity with no fluctuation.
    pub fn exact(mu: f64) -> Result<Self> {
        Self::new(mu, mu)
    }

    /// `[(1 - x/100) mean, (1 + x/100) mean]`
    pub fn relative(mean: f64, pct: f64) -> Result<Self> {
        let w = 0.01 * pct;
        Self::new((1.0 - w) * mean, (1.0 + w) * mean)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, mu: f64) -> bool {
        self.lo <= mu && mu <= self.hi
    }
}

/// Checks the decoy orderings `mu_s^+ <= 1`, `mu_d1^- > mu_d2^+ >= 0`
/// and `mu_s^- > mu_d1^+ + mu_d2^-`.
pub fn check_intensity_ordering(mu: &PerIntensity<IntensityRange>) -> Result<()> {
    let s = mu[Intensity::Signal];
    let d1 = mu[Intensity::Decoy1];
    let d2 = mu[Intensity::Decoy2];
    if s.hi > 1.0 {
        return Err(Error::IntensityOrdering("mu_s^+ <= 1"));
    }
    if d1.lo <= d2.hi {
        return Err(Error::IntensityOrdering("mu_d1^- > mu_d2^+"));
    }
    if s.lo <= d1.hi + d2.lo {
        return Err(Error::IntensityOrdering("mu_s^- > mu_d1^+ + mu_d2^-"));
    }
    Ok(())
}

fn check_probability(name: &'static str, value: f64, lo: f64, hi_exclusive: f64) -> Result<f64> {
    if value.is_finite() && value >= lo && value < hi_exclusive {
        Ok(value)
    } else {
        Err(Error::InvalidProbability { name, value })
    }
}

/// Everything Alice announces about her source before post-processing.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceCharacterization {
    phase: PerSetting<PhaseRange>,
    intensity: PerIntensity<IntensityRange>,
    delta_theta: f64,
    delta_mu: f64,
}

impl SourceCharacterization {
    pub fn new(
        phase: PerSetting<PhaseRange>,
        intensity: PerIntensity<IntensityRange>,
        delta_theta: f64,
        delta_mu: f64,
    ) -> Result<Self> {
        for (i, a) in Setting::ALL.iter().enumerate() {
            for b in &Setting::ALL[i + 1..] {
                if phase[*a].overlaps(&phase[*b]) {
                    return Err(Error::OverlappingPhaseRanges(*a, *b));
                }
            }
        }
        check_intensity_ordering(&intensity)?;
        check_probability("delta_theta", delta_theta, 0.0, 1.0)?;
        check_probability("delta_mu", delta_mu, 0.0, 1.0)?;
        Ok(SourceCharacterization {
            phase,
            intensity,
            delta_theta,
            delta_mu,
        })
    }

    /// Phase ranges `[nominal - halfwidth, nominal + halfwidth]` around 0, pi and pi/2.
    pub fn symmetric_phase(
        halfwidth: f64,
        intensity: PerIntensity<IntensityRange>,
        delta_theta: f64,
        delta_mu: f64,
    ) -> Result<Self> {
        let phase = symmetric_phase_ranges(halfwidth)?;
        Self::new(phase, intensity, delta_theta, delta_mu)
    }

    pub fn phase(&self) -> &PerSetting<PhaseRange> {
        &self.phase
    }

    pub fn intensity(&self) -> &PerIntensity<IntensityRange> {
        &self.intensity
    }

    pub fn delta_theta(&self) -> f64 {
        self.delta_theta
    }

    pub fn delta_mu(&self) -> f64 {
        self.delta_mu
    }

    pub fn tagging_probability(&self) -> f64 {
        tagging_probability(self.delta_theta, self.delta_mu)
    }
}

pub fn symmetric_phase_ranges(halfwidth: f64) -> Result<PerSetting<PhaseRange>> {
    if !(halfwidth >= 0.0) {
        return Err(Error::InvalidPhaseRange {
            lo: -halfwidth,
            hi: halfwidth,
        });
    }
    Ok(PerSetting([
        PhaseRange::symmetric(Setting::Z0.nominal_phase(), halfwidth)?,
        PhaseRange::symmetric(Setting::Z1.nominal_phase(), halfwidth)?,
        PhaseRange::symmetric(Setting::X0.nominal_phase(), halfwidth)?,
    ]))
}

/// Probability that a pulse is tagged: `1 - (1 - delta_theta)(1 - delta_mu)`.
pub fn tagging_probability(delta_theta: f64, delta_mu: f64) -> f64 {
    // delta_theta + delta_mu - delta_theta * delta_mu, without the cancellation
    delta_theta + delta_mu * (1.0 - delta_theta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolProbabilities {
    p_z: f64,
    p_s: f64,
    p_d1: f64,
}

impl ProtocolProbabilities {
    pub fn new(p_z: f64, p_s: f64, p_d1: f64) -> Result<Self> {
        for (name, v) in [("p_Z", p_z), ("p_s", p_s), ("p_d1", p_d1)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidProbability { name, value: v });
            }
        }
        if p_s + p_d1 >= 1.0 {
            return Err(Error::InvalidProbability {
                name: "p_s + p_d1",
                value: p_s + p_d1,
            });
        }
        Ok(ProtocolProbabilities { p_z, p_s, p_d1 })
    }

    pub fn p_z(&self) -> f64 {
        self.p_z
    }

    pub fn p_x(&self) -> f64 {
        1.0 - self.p_z
    }

    pub fn p_s(&self) -> f64 {
        self.p_s
    }

    pub fn p_d1(&self) -> f64 {
        self.p_d1
    }

    pub fn p_d2(&self) -> f64 {
        1.0 - self.p_s - self.p_d1
    }

    pub fn setting(&self, c: Setting) -> f64 {
        match c {
            Setting::Z0 | Setting::Z1 => self.p_z / 2.0,
            Setting::X0 => self.p_x(),
        }
    }

    pub fn intensity(&self, k: Intensity) -> f64 {
        match k {
            Intensity::Signal => self.p_s,
            Intensity::Decoy1 => self.p_d1,
            Intensity::Decoy2 => self.p_d2(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        BlochVector { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn scaled(&self, r: f64) -> Self {
        BlochVector::new(r * self.x, r * self.y, r * self.z)
    }

    /// Whether this is a physical qubit state up to `tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        self.x * self.x + self.y * self.y + self.z * self.z <= 1.0 + tol
    }
}

/// Bloch vector of `|theta>`: `(sin theta, 0, cos theta)`.
pub fn bloch_of_theta(theta: f64) -> BlochVector {
    let (s, c) = theta.sin_cos();
    BlochVector::new(s, 0.0, c)
}

/// Result of applying the local filter `F = q P(|0_Y>) + (1 - q) P(|1_Y>)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Filtered {
    pub state: BlochVector,
    pub success_probability: f64,
}

/// Applies the filter to a state on the X-Z plane and renormalizes.
///
/// The success probability `q^2 - q + 1/2` does not depend on the input, so
/// every X-Z plane state is lifted towards the Y axis by the same amount.
pub fn filter_transform(v: BlochVector, q: f64) -> Result<Filtered> {
    filter_transform_with_tolerance(v, q, DEFAULT_TOLERANCE)
}

pub fn filter_transform_with_tolerance(v: BlochVector, q: f64, tol: f64) -> Result<Filtered> {
    if !(0.0..=1.0).contains(&q) || q == 0.5 {
        return Err(Error::InvalidFilter(q));
    }
    if v.y.abs() > tol {
        return Err(Error::NotOnXzPlane(v.y));
    }
    let norm = 1.0 - 2.0 * q + 2.0 * q * q;
    let f = 2.0 * (1.0 - q) * q / norm;
    Ok(Filtered {
        state: BlochVector::new(f * v.x, (2.0 * q - 1.0) / norm, f * v.z),
        success_probability: q * q - q + 0.5,
    })
}

/// Filter parameter `q` that maps `|theta, pi/2>` onto `|theta, phi>` with
/// `phi = 2 atan(sqrt(gamma))`, where `gamma` is the signal/reference intensity ratio.
///
/// `gamma = 1` needs no filter and is rejected.
pub fn filter_parameter_for_ratio(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) || gamma == 1.0 {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("{gamma} must be positive, finite and different from 1"),
        });
    }
    // The filtered y component (2q - 1)/(1 - 2q + 2q^2) must equal cos(phi).
    // With c = cos(phi): 2c q^2 - 2(c + 1) q + (c + 1) = 0, whose root in
    // [0, 1] is (1 + c)/(1 + c + sin(phi)).
    let phi = 2.0 * gamma.sqrt().atan();
    let (s, c) = phi.sin_cos();
    Ok((1.0 + c) / (1.0 + c + s))
}
