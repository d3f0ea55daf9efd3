//! Upper bounds on the virtual-protocol yields.
//!
//! In the virtual protocol Alice measures her half of the Z-basis
//! entangled state in the X basis, so Bob receives `|theta_vir>` with
//! `theta_vir = (theta_0Z + theta_1Z)/2 (+ pi for a = 1)`. Because the
//! three actual Bloch directions span the X-Z plane, the detection rate of
//! `|theta_vir>` is a linear combination of the rates of the actual states
//! with coefficients `g_{a,c}`. Bounding each coefficient over the phase
//! ranges gives an upper bound on the virtual yields that holds for any
//! per-pulse phase distribution.

use std::f64::consts::PI;

use crate::decoy::YieldInterval;
use crate::error::{Error, Result};
use crate::source::{Bit, PerSetting, PhaseRange, Setting, DEFAULT_TOLERANCE};

/// Half-widths at or above this use the numerical fallback.
pub const CLOSED_FORM_LIMIT: f64 = 10.0 * PI / 180.0;

/// Upper bounds `g+_{a,c}` and `p+_{a,vir}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GCoefficients {
    /// `g[a][c]`
    pub g: [[f64; 3]; 2],
    pub p_vir: [f64; 2],
}

impl GCoefficients {
    pub fn g(&self, a: Bit, c: Setting) -> f64 {
        self.g[a.index()][c.index()]
    }

    pub fn p_vir(&self, a: Bit) -> f64 {
        self.p_vir[a.index()]
    }
}

fn check_regime(theta: f64) -> Result<()> {
    if (0.0..CLOSED_FORM_LIMIT).contains(&theta) {
        Ok(())
    } else {
        Err(Error::HalfwidthOutOfRegime(theta))
    }
}

/// Emission probability of the virtual state `a` for a given phase pair.
pub fn virtual_probability(a: Bit, theta_0z: f64, theta_1z: f64) -> f64 {
    0.5 * (1.0 + a.sign() * ((theta_0z - theta_1z) / 2.0).cos())
}

/// Phase of the virtual state sent when Alice's X measurement yields `a`.
pub fn virtual_phase(a: Bit, theta_0z: f64, theta_1z: f64) -> f64 {
    let mid = (theta_0z + theta_1z) / 2.0;
    match a {
        Bit::Zero => mid,
        Bit::One => mid + PI,
    }
}

/// Maximum virtual emission probability over symmetric phase boxes of half-width `theta`.
pub fn p_vir_plus(theta: f64, _a: Bit) -> Result<f64> {
    check_regime(theta)?;
    Ok(0.5 * (1.0 + theta.sin()))
}

/// Closed-form coefficient bounds for symmetric phase boxes of half-width `theta`.
///
/// Each bound treats the two trigonometric quantities entering `g_{a,c}` as
/// independent, so it dominates but need not equal the true maximum.
pub fn g_plus(theta: f64) -> Result<GCoefficients> {
    check_regime(theta)?;
    let (s, c) = theta.sin_cos();
    let s32 = (1.5 * theta).sin();
    let c32 = (1.5 * theta).cos();
    let c2 = (2.0 * theta).cos();

    let denominators = [
        ("g+_{0,Z}", s + c32),
        ("g+_{0,0X}", c2 - s),
        ("g+_{1,Z}", c - s32),
        ("g+_{1,0X}", 1.0 + s),
    ];
    for (what, value) in denominators {
        if !(value > 0.0) {
            return Err(Error::NonPositiveDenominator { what, value });
        }
    }

    // at theta = 0 the first ratio is 0/1
    let g0z = s / (s + c32);
    let g0x = (1.0 - s) / (c2 - s);
    let g1z = c / (c - s32);
    let g1x = -(1.0 - s) / (1.0 + s);
    let p = 0.5 * (1.0 + s);
    Ok(GCoefficients {
        g: [[g0z, g0z, g0x], [g1z, g1z, g1x]],
        p_vir: [p, p],
    })
}

/// Determinant of `M` with rows `(1, sin theta_c, cos theta_c)`.
pub fn state_matrix_determinant(thetas: &PerSetting<f64>) -> f64 {
    let row = |c: Setting| {
        let (s, co) = thetas[c].sin_cos();
        [1.0, s, co]
    };
    let [a, b, c] = [row(Setting::Z0), row(Setting::Z1), row(Setting::X0)];
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// Exact coefficient `g_{a,c}` for a concrete phase triple.
///
/// For every operator `D`, `Tr[D P(theta_vir)] = sum_c g_{a,c} Tr[D P(theta_c)]`.
pub fn g_exact(a: Bit, c: Setting, thetas: &PerSetting<f64>) -> Result<f64> {
    let det = state_matrix_determinant(thetas);
    if det.abs() < DEFAULT_TOLERANCE {
        return Err(Error::DegenerateGeometry(det.abs()));
    }
    Ok(g_exact_unchecked(a, c, thetas))
}

fn g_exact_unchecked(a: Bit, c: Setting, thetas: &PerSetting<f64>) -> f64 {
    let t0 = thetas[Setting::Z0];
    let t1 = thetas[Setting::Z1];
    let tx = thetas[Setting::X0];
    let quarter = (t0 + t1 - 2.0 * tx) / 4.0;
    match (a, c) {
        (Bit::Zero, Setting::Z0) => {
            let u = quarter.sin();
            let v = ((-3.0 * t0 + t1 + 2.0 * tx) / 4.0).sin();
            u / (u - v)
        }
        (Bit::Zero, Setting::Z1) => {
            let u = quarter.sin();
            let v = ((-t0 + 3.0 * t1 - 2.0 * tx) / 4.0).sin();
            u / (u + v)
        }
        (Bit::One, Setting::Z0) => {
            let u = quarter.cos();
            let v = ((-3.0 * t0 + t1 + 2.0 * tx) / 4.0).cos();
            u / (u - v)
        }
        (Bit::One, Setting::Z1) => {
            let u = quarter.cos();
            let v = ((-t0 + 3.0 * t1 - 2.0 * tx) / 4.0).cos();
            u / (u - v)
        }
        (a, Setting::X0) => {
            let u = ((t0 - t1) / 2.0).cos();
            let v = ((t0 + t1 - 2.0 * tx) / 2.0).cos();
            (a.sign() - u) / (v - u)
        }
    }
}

/// Grid settings for bounding `g` over arbitrary phase ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericalBoundConfig {
    pub points_per_axis: usize,
    pub margin: f64,
}

impl Default for NumericalBoundConfig {
    fn default() -> Self {
        NumericalBoundConfig {
            points_per_axis: 101,
            margin: 1e-6,
        }
    }
}

fn grid(range: &PhaseRange, n: usize) -> impl Iterator<Item = f64> + Clone + '_ {
    let step = if n > 1 {
        (range.hi() - range.lo()) / (n - 1) as f64
    } else {
        0.0
    };
    (0..n).map(move |i| {
        if i + 1 == n {
            range.hi()
        } else {
            range.lo() + step * i as f64
        }
    })
}

/// Grid maximum of every `g_{a,c}` and `p_{a,vir}` over general ranges, plus `cfg.margin`.
pub fn g_plus_numerical(
    ranges: &PerSetting<PhaseRange>,
    cfg: &NumericalBoundConfig,
) -> Result<GCoefficients> {
    let n = cfg.points_per_axis.max(2);
    let mut g = [[f64::NEG_INFINITY; 3]; 2];
    let mut p_vir = [f64::NEG_INFINITY; 2];
    for t0 in grid(&ranges[Setting::Z0], n) {
        for t1 in grid(&ranges[Setting::Z1], n) {
            for a in Bit::ALL {
                let p = virtual_probability(a, t0, t1);
                p_vir[a.index()] = p_vir[a.index()].max(p);
            }
            for tx in grid(&ranges[Setting::X0], n) {
                let thetas = PerSetting([t0, t1, tx]);
                let det = state_matrix_determinant(&thetas);
                if det.abs() < DEFAULT_TOLERANCE {
                    return Err(Error::DegenerateGeometry(det.abs()));
                }
                for a in Bit::ALL {
                    for c in Setting::ALL {
                        let v = g_exact_unchecked(a, c, &thetas);
                        let slot = &mut g[a.index()][c.index()];
                        *slot = slot.max(v);
                    }
                }
            }
        }
    }
    for row in &mut g {
        for v in row.iter_mut() {
            *v += cfg.margin;
        }
    }
    for p in &mut p_vir {
        *p = (*p + cfg.margin).min(1.0);
    }
    Ok(GCoefficients { g, p_vir })
}

/// Coefficients for symmetric boxes of half-width `theta`: closed form below
/// 10 degrees, the numerical grid bound above.
pub fn g_coefficients(theta: f64, cfg: &NumericalBoundConfig) -> Result<GCoefficients> {
    if (0.0..CLOSED_FORM_LIMIT).contains(&theta) {
        g_plus(theta)
    } else {
        let ranges = crate::source::symmetric_phase_ranges(theta)?;
        g_plus_numerical(&ranges, cfg)
    }
}

/// Upper bound on `Y_{a,b|vir,u}`.
///
/// Positive coefficients take the upper end of the single-photon yield
/// interval, negative ones the lower end.
pub fn y_vir_upper(
    g: &GCoefficients,
    a: Bit,
    b: Bit,
    y1: &PerSetting<[YieldInterval; 2]>,
) -> f64 {
    let sum: f64 = Setting::ALL
        .iter()
        .map(|&c| {
            let coef = g.g(a, c);
            let y = y1[c][b.index()];
            if coef > 0.0 {
                coef * y.hi()
            } else {
                coef * y.lo()
            }
        })
        .sum();
    (g.p_vir(a) * sum).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    fn flat(lo: f64, hi: f64) -> PerSetting<[YieldInterval; 2]> {
        let y = YieldInterval::new(lo, hi).unwrap();
        PerSetting([[y, y], [y, y], [y, y]])
    }

    #[test]
    fn p_vir_examples() {
        assert_eq!(p_vir_plus(0.0, Bit::Zero).unwrap(), 0.5);
        assert_abs_diff_eq!(p_vir_plus(deg(5.0), Bit::One).unwrap(), 0.543577871373829, epsilon = 1e-12);
        assert_abs_diff_eq!(
            p_vir_plus(deg(9.0), Bit::Zero).unwrap(),
            (1.0 + deg(9.0).sin()) / 2.0,
            epsilon = 1e-15
        );
        assert!(p_vir_plus(deg(10.0), Bit::Zero).is_err());
        assert!(p_vir_plus(-0.01, Bit::Zero).is_err());
    }

    #[test]
    fn g_plus_at_zero() {
        let g = g_plus(0.0).unwrap();
        assert_eq!(g.g, [[0.0, 0.0, 1.0], [1.0, 1.0, -1.0]]);
        assert_eq!(g.p_vir, [0.5, 0.5]);
    }

    #[test]
    fn g_plus_at_five_and_nine_degrees() {
        let g = g_plus(deg(5.0)).unwrap();
        let expected = deg(5.0).sin() / (deg(5.0).sin() + deg(7.5).cos());
        assert_abs_diff_eq!(g.g(Bit::Zero, Setting::Z0), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(g.g(Bit::Zero, Setting::Z0), 0.0808, epsilon = 5e-5);

        let g = g_plus(deg(9.0)).unwrap();
        assert!(g.g.iter().flatten().all(|v| v.is_finite()));
        let g10 = g.g(Bit::One, Setting::Z0);
        assert_abs_diff_eq!(g10, deg(9.0).cos() / (deg(9.0).cos() - deg(13.5).sin()), epsilon = 1e-15);
        assert!(g10 > 1.0);
    }

    #[test]
    fn g_exact_ideal_states() {
        let t = PerSetting([0.0, PI, PI / 2.0]);
        assert_abs_diff_eq!(g_exact(Bit::Zero, Setting::Z0, &t).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g_exact(Bit::Zero, Setting::Z1, &t).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g_exact(Bit::Zero, Setting::X0, &t).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g_exact(Bit::One, Setting::Z0, &t).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g_exact(Bit::One, Setting::Z1, &t).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g_exact(Bit::One, Setting::X0, &t).unwrap(), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn g_exact_rejects_degenerate_triples() {
        let t = PerSetting([0.3, 0.3, 1.0]);
        assert!(matches!(
            g_exact(Bit::Zero, Setting::Z0, &t),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn y_vir_upper_examples() {
        let g = g_plus(0.0).unwrap();
        assert_abs_diff_eq!(y_vir_upper(&g, Bit::Zero, Bit::One, &flat(0.3, 0.3)), 0.15, epsilon = 1e-15);

        let z = YieldInterval::new(0.3, 0.5).unwrap();
        let x = YieldInterval::new(0.2, 0.4).unwrap();
        let y1 = PerSetting([[z, z], [z, z], [x, x]]);
        assert_abs_diff_eq!(y_vir_upper(&g, Bit::One, Bit::Zero, &y1), 0.4, epsilon = 1e-15);

        let g9 = g_plus(deg(9.0)).unwrap();
        for a in Bit::ALL {
            for b in Bit::ALL {
                assert_eq!(y_vir_upper(&g9, a, b, &flat(0.0, 0.0)), 0.0);
            }
        }
    }

    #[test]
    fn fallback_beyond_regime() {
        let cfg = NumericalBoundConfig {
            points_per_axis: 21,
            margin: 1e-6,
        };
        let g = g_coefficients(deg(12.0), &cfg).unwrap();
        let below = g_plus(deg(9.9)).unwrap();
        // wider boxes never shrink the bounds
        assert!(g.g(Bit::One, Setting::Z0) > below.g(Bit::One, Setting::Z0) - 1e-3);
        assert!(g.p_vir(Bit::Zero) >= 0.5 * (1.0 + deg(12.0).sin()) - 1e-9);
        // inside the regime the dispatcher is the closed form
        assert_eq!(g_coefficients(deg(3.0), &cfg).unwrap(), g_plus(deg(3.0)).unwrap());
    }

    #[test]
    fn numerical_bound_close_to_closed_form() {
        let theta = deg(5.0);
        let ranges = crate::source::symmetric_phase_ranges(theta).unwrap();
        let cfg = NumericalBoundConfig {
            points_per_axis: 41,
            margin: 0.0,
        };
        let num = g_plus_numerical(&ranges, &cfg).unwrap();
        let closed = g_plus(theta).unwrap();
        for a in Bit::ALL {
            for c in Setting::ALL {
                assert!(closed.g(a, c) >= num.g(a, c) - 1e-12);
                assert!(closed.g(a, c) - num.g(a, c) < 2e-3);
            }
            assert_abs_diff_eq!(num.p_vir(a), closed.p_vir(a), epsilon = 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn p_vir_symmetric(theta in 0.0f64..CLOSED_FORM_LIMIT) {
                prop_assert_eq!(p_vir_plus(theta, Bit::Zero).unwrap(), p_vir_plus(theta, Bit::One).unwrap());
            }

            #[test]
            fn y_vir_upper_monotone(
                lo in proptest::array::uniform6(0.0f64..0.5),
                width in proptest::array::uniform6(0.0f64..0.5),
                bump in 0.0f64..0.1,
                which in 0usize..6,
                theta in 0.0f64..CLOSED_FORM_LIMIT,
            ) {
                let g = g_plus(theta).unwrap();
                let build = |extra: usize, d: f64| {
                    let mut iv = [[YieldInterval::default(); 2]; 3];
                    for i in 0..6 {
                        let (mut l, mut h) = (lo[i], lo[i] + width[i]);
                        if i == extra {
                            // raise both endpoints together
                            l += d;
                            h += d;
                        }
                        iv[i / 2][i % 2] = YieldInterval::new(l.min(1.0), h.min(1.0)).unwrap();
                    }
                    PerSetting(iv)
                };
                let base = build(which, 0.0);
                let (c, b) = (Setting::ALL[which / 2], Bit::ALL[which % 2]);
                for a in Bit::ALL {
                    let before = y_vir_upper(&g, a, b, &base);
                    // raise only the endpoint the bound selects
                    let mut raised = base;
                    let y = base[c][b.index()];
                    raised[c][b.index()] = if g.g(a, c) > 0.0 {
                        YieldInterval::new(y.lo(), (y.hi() + bump).min(1.0)).unwrap()
                    } else {
                        YieldInterval::new((y.lo() - bump).max(0.0), y.hi()).unwrap()
                    };
                    prop_assert!(y_vir_upper(&g, a, b, &raised) >= before - 1e-15);
                }
            }
        }
    }
}
