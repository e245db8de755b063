//! Real spherical harmonics in the orthonormal convention, no Condon–Shortley phase.
//!
//! `Y_lm` for m > 0 is √2·P̄_lm(cos θ)·cos(mφ); for m < 0 it is √2·P̄_l|m|·sin(|m|φ).

use std::f64::consts::PI;

/// Returns (P̄_lm(x), P̄_{l-1,m}(x)) with `s = sin θ = sqrt(1 - x²)`.
fn normalized_legendre(l: u32, m: u32, x: f64, s: f64) -> (f64, f64) {
    debug_assert!(m <= l);
    let mut pmm = 1.0 / (4.0 * PI);
    for k in 1..=m {
        let k = k as f64;
        pmm *= (2.0 * k - 1.0) / (2.0 * k);
    }
    pmm *= 2.0 * m as f64 + 1.0;
    let mut pmm = pmm.sqrt() * s.powi(m as i32);
    if l == m {
        return (pmm, 0.0);
    }
    let mf = m as f64;
    let mut p1 = x * (2.0 * mf + 3.0).sqrt() * pmm;
    for ll in (m + 2)..=l {
        let lf = ll as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let lm1 = lf - 1.0;
        let b = ((lm1 * lm1 - mf * mf) / (4.0 * lm1 * lm1 - 1.0)).sqrt();
        let p2 = a * (x * p1 - b * pmm);
        pmm = p1;
        p1 = p2;
    }
    (p1, pmm)
}

/// Value of Y_lm at polar angle θ and azimuth φ.
pub fn real_sph_harm(l: u32, m: i32, theta: f64, phi: f64) -> f64 {
    let am = m.unsigned_abs();
    let (x, s) = (theta.cos(), theta.sin().abs());
    let (p, _) = normalized_legendre(l, am, x, s);
    azimuthal(m, phi, p).0
}

/// (Y, ∂Y/∂θ, ∂Y/∂φ). Requires sin θ ≠ 0.
pub fn real_sph_harm_with_gradient(l: u32, m: i32, theta: f64, phi: f64) -> (f64, f64, f64) {
    let am = m.unsigned_abs();
    let (x, s) = (theta.cos(), theta.sin());
    let (p, pm1) = normalized_legendre(l, am, x, s);
    let lf = l as f64;
    let mf = am as f64;
    let dp = if l == 0 {
        0.0
    } else {
        let c = ((2.0 * lf + 1.0) / (2.0 * lf - 1.0) * (lf * lf - mf * mf)).sqrt();
        (lf * x * p - c * pm1) / s
    };
    let (y, dy_dphi) = azimuthal(m, phi, p);
    let (dy_dtheta, _) = azimuthal(m, phi, dp);
    (y, dy_dtheta, dy_dphi)
}

fn azimuthal(m: i32, phi: f64, p: f64) -> (f64, f64) {
    let am = m.unsigned_abs() as f64;
    if m == 0 {
        (p, 0.0)
    } else if m > 0 {
        let (s, c) = (am * phi).sin_cos();
        (std::f64::consts::SQRT_2 * p * c, -std::f64::consts::SQRT_2 * p * am * s)
    } else {
        let (s, c) = (am * phi).sin_cos();
        (std::f64::consts::SQRT_2 * p * s, std::f64::consts::SQRT_2 * p * am * c)
    }
}

/// Maximum of |Y_l0|, attained at the poles.
pub fn zonal_peak(l: u32) -> f64 {
    ((2.0 * l as f64 + 1.0) / (4.0 * PI)).sqrt()
}
