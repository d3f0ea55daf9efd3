//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls into the library; each helper recomputes its quantity
//! from first principles.

#![allow(dead_code)]

use nalgebra::{Complex, Matrix2, Matrix3, Vector3};
use std::f64::consts::PI;

pub type C64 = Complex<f64>;

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn pauli() -> [Matrix2<C64>; 3] {
    let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
    [
        Matrix2::new(z, o, o, z),
        Matrix2::new(z, -i, i, z),
        Matrix2::new(o, z, z, -o),
    ]
}

/// `(I + r.sigma) / 2` in the standard Pauli frame.
pub fn density(r: [f64; 3]) -> Matrix2<C64> {
    let s = pauli();
    let mut m = Matrix2::identity();
    for k in 0..3 {
        m += s[k] * c(r[k], 0.0);
    }
    m * c(0.5, 0.0)
}

/// Projector onto `cos(t/2)|0> + sin(t/2)|1>`.
pub fn phase_projector(t: f64) -> Matrix2<C64> {
    density([t.sin(), 0.0, t.cos()])
}

pub fn trace_product(a: &Matrix2<C64>, b: &Matrix2<C64>) -> f64 {
    (a * b).trace().re
}

/// Phase of the virtual state for virtual bit `a` from the two Z phases.
pub fn virtual_phase(a: usize, t0z: f64, t1z: f64) -> f64 {
    (t0z + t1z) / 2.0 + if a == 1 { PI } else { 0.0 }
}

/// Probability that the virtual measurement yields `a`.
pub fn virtual_probability(a: usize, t0z: f64, t1z: f64) -> f64 {
    let sign = if a == 0 { 1.0 } else { -1.0 };
    0.5 * (1.0 + sign * ((t0z - t1z) / 2.0).cos())
}

/// Coefficients expressing the virtual state as a combination of the three
/// sent states, by a 3x3 linear solve. Phases ordered `0_Z, 1_Z, 0_X`.
pub fn g_oracle(a: usize, t: [f64; 3]) -> Option<[f64; 3]> {
    let m = Matrix3::new(
        1.0, 1.0, 1.0,
        t[0].sin(), t[1].sin(), t[2].sin(),
        t[0].cos(), t[1].cos(), t[2].cos(),
    );
    let v = virtual_phase(a, t[0], t[1]);
    let rhs = Vector3::new(1.0, v.sin(), v.cos());
    let sol = m.lu().solve(&rhs)?;
    Some([sol[0], sol[1], sol[2]])
}

pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
    }
}

pub fn poisson(n: usize, mu: f64) -> f64 {
    let mut p = (-mu).exp();
    for k in 1..=n {
        p *= mu / k as f64;
    }
    p
}

/// `E[f(mu)]` for `mu ~ N(mean, sigma^2)` by double-exponential quadrature
/// over +-12 standard deviations, to roughly `rel` relative accuracy.
pub fn gaussian_average<F: Fn(f64) -> f64>(f: F, mean: f64, sigma: f64, rel: f64) -> f64 {
    if sigma == 0.0 {
        return f(mean);
    }
    let norm = 1.0 / (2.0 * PI).sqrt();
    let g = |z: f64| norm * (-0.5 * z * z).exp() * f(mean + sigma * z);
    let scale = f(mean).abs().max(1e-300);
    quadrature::double_exponential::integrate(g, -12.0, 12.0, rel * scale).integral
}

/// Channel transmittance including detector efficiency and the 1/2 split.
pub fn eta(length_km: f64, alpha_db: f64, eta_b: f64) -> f64 {
    10f64.powf(-alpha_db * length_km / 10.0) * eta_b / 2.0
}
