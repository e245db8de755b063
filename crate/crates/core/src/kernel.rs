//! Pointwise Neumann–Poincaré kernels.
//!
//! K*(x, y) = (1/ω)·(x−y)·ν_x / |x−y|^{d+1} and K(x, y) = K*(y, x),
//! with ω = 2π for curves and 4π for surfaces.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{BoundaryGeometry, Param};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    NpStar,
    Np,
    Composed(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelIdentity {
    pub which: KernelKind,
    pub d: u32,
}

impl KernelIdentity {
    pub fn np_star(d: u32) -> Self {
        KernelIdentity { which: KernelKind::NpStar, d }
    }

    pub fn np(d: u32) -> Self {
        KernelIdentity { which: KernelKind::Np, d }
    }

    /// L_n; `composed(1, d)` is K*.
    pub fn composed(n: u32, d: u32) -> Result<Self> {
        match n {
            0 => Err(invalid("composed operator order must be >= 1")),
            1 => Ok(Self::np_star(d)),
            _ => Ok(KernelIdentity { which: KernelKind::Composed(n), d }),
        }
    }

    /// Composition order n (1 for K and K*).
    pub fn order(&self) -> u32 {
        match self.which {
            KernelKind::Composed(n) => n,
            _ => 1,
        }
    }
}

/// Surface area of the unit sphere in R^{d+1}.
pub fn omega(d: u32) -> f64 {
    if d == 1 {
        2.0 * PI
    } else {
        4.0 * PI
    }
}

#[inline(always)]
pub(crate) fn kstar_raw(x: &[f64; 3], nx: &[f64; 3], y: &[f64; 3], d: u32) -> f64 {
    let r = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
    let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
    let num = r[0] * nx[0] + r[1] * nx[1] + r[2] * nx[2];
    if d == 1 {
        num / (2.0 * PI * r2)
    } else {
        num / (4.0 * PI * r2 * r2.sqrt())
    }
}

fn lift(v: &[f64], d: u32, name: &str) -> Result<[f64; 3]> {
    let n = d as usize + 1;
    if !(d == 1 || d == 2) {
        return Err(invalid(format!("d must be 1 or 2, got {d}")));
    }
    if v.len() != n {
        return Err(invalid(format!("{name} has {} components, expected {n}", v.len())));
    }
    let mut out = [0.0; 3];
    out[..n].copy_from_slice(v);
    Ok(out)
}

pub fn np_kernel_star(x: &[f64], nx: &[f64], y: &[f64], d: u32) -> Result<f64> {
    let (x, nx, y) = (lift(x, d, "x")?, lift(nx, d, "nx")?, lift(y, d, "y")?);
    if x == y {
        return Err(Error::SingularPoint);
    }
    Ok(kstar_raw(&x, &nx, &y, d))
}

pub fn np_kernel(x: &[f64], y: &[f64], ny: &[f64], d: u32) -> Result<f64> {
    let (x, y, ny) = (lift(x, d, "x")?, lift(y, d, "y")?, lift(ny, d, "ny")?);
    if x == y {
        return Err(Error::SingularPoint);
    }
    let r = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
    let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
    let num = -(r[0] * ny[0] + r[1] * ny[1] + r[2] * ny[2]);
    Ok(if d == 1 { num / (2.0 * PI * r2) } else { num / (4.0 * PI * r2 * r2.sqrt()) })
}

/// Continuous extension of K*(γ(t), γ(s)) to s = t on a C² curve: −(γ''·ν)/(4π|γ'|²).
pub fn diagonal_limit(geom: &BoundaryGeometry, t: f64) -> Result<f64> {
    if !geom.is_curve() {
        return Err(invalid("diagonal limit is only available for curves"));
    }
    let e = geom.evaluate(Param::Curve(t), 2)?;
    let g2 = e.derivatives[1];
    let dot = g2[0] * e.normal[0] + g2[1] * e.normal[1];
    Ok(-dot / (4.0 * PI * e.jacobian * e.jacobian))
}

/// ∂^l/∂s^l of K*(γ(t), γ(s)), by exact differentiation of the quotient.
pub fn tangential_derivative_l1(geom: &BoundaryGeometry, t: f64, s: f64, l: usize) -> Result<f64> {
    if !geom.is_curve() {
        return Err(invalid("tangential derivatives are only available for curves"));
    }
    let available = geom.derivative_order.saturating_sub(2);
    if l > available {
        return Err(Error::UnsupportedOrder { requested: l, available });
    }
    let sep = (t - s) - (t - s).round();
    if sep == 0.0 {
        return Err(Error::SingularPoint);
    }
    let et = geom.evaluate(Param::Curve(t), 1)?;
    let h = -sep;
    if l > 0 && TAU * geom.finest_oscillation() * h.abs() <= SERIES_RADIUS {
        return Ok(derivative_by_series(geom, t, &et.normal, h, l));
    }
    let gs = geom.curve_derivatives(s, l);
    if l == 0 {
        return Ok(kstar_raw(&et.point, &et.normal, &gs[0], 1));
    }
    let nu = et.normal;
    let delta: Vec<[f64; 2]> = (0..=l)
        .map(|j| {
            if j == 0 {
                [et.point[0] - gs[0][0], et.point[1] - gs[0][1]]
            } else {
                [-gs[j][0], -gs[j][1]]
            }
        })
        .collect();
    let binom = binomial_table(l);
    let num: Vec<f64> = delta.iter().map(|dj| dj[0] * nu[0] + dj[1] * nu[1]).collect();
    let den: Vec<f64> = (0..=l)
        .map(|j| (0..=j).map(|i| binom[j][i] * (delta[i][0] * delta[j - i][0] + delta[i][1] * delta[j - i][1])).sum())
        .collect();
    let mut q = vec![0.0; l + 1];
    for j in 0..=l {
        let mut acc = num[j];
        for i in 0..j {
            acc -= binom[j][i] * q[i] * den[j - i];
        }
        q[j] = acc / den[0];
    }
    Ok(q[l] / (2.0 * PI))
}

/// Below this value of 2π·(finest frequency)·|s − t| the derivative is taken
/// from Taylor series about t, where the quotient recursion loses accuracy.
const SERIES_RADIUS: f64 = 0.25;
const SERIES_TERMS: usize = 32;

/// Expands (γ(t) − γ(t+h))·ν and |γ(t) − γ(t+h)|² in powers of h, divides
/// out h², and differentiates the quotient series term by term.
fn derivative_by_series(geom: &BoundaryGeometry, t: f64, nu: &[f64; 3], h: f64, l: usize) -> f64 {
    let m_max = SERIES_TERMS + 2;
    let raw = geom.curve_derivatives(t, m_max);
    let mut fact = 1.0;
    let g: Vec<[f64; 2]> = raw
        .iter()
        .enumerate()
        .map(|(m, d)| {
            if m > 0 {
                fact *= m as f64;
            }
            [d[0] / fact, d[1] / fact]
        })
        .collect();
    // numerator and denominator coefficients of h^{m+2}
    let num: Vec<f64> = (0..=SERIES_TERMS).map(|m| -(g[m + 2][0] * nu[0] + g[m + 2][1] * nu[1])).collect();
    let den: Vec<f64> = (0..=SERIES_TERMS)
        .map(|m| (1..=m + 1).map(|i| g[i][0] * g[m + 2 - i][0] + g[i][1] * g[m + 2 - i][1]).sum())
        .collect();
    let mut q = vec![0.0; SERIES_TERMS + 1];
    for m in 0..=SERIES_TERMS {
        let mut acc = num[m];
        for i in 1..=m {
            acc -= den[i] * q[m - i];
        }
        q[m] = acc / den[0];
    }
    let value: f64 = (l..=SERIES_TERMS)
        .map(|m| {
            let falling: f64 = ((m - l + 1)..=m).map(|x| x as f64).product();
            q[m] * falling * h.powi((m - l) as i32)
        })
        .sum();
    value / (2.0 * PI)
}

fn binomial_table(n: usize) -> Vec<Vec<f64>> {
    let mut t = vec![vec![0.0; n + 1]; n + 1];
    for j in 0..=n {
        t[j][0] = 1.0;
        for i in 1..=j {
            t[j][i] = t[j - 1][i - 1] + if i < j { t[j - 1][i] } else { 0.0 };
        }
    }
    t
}
