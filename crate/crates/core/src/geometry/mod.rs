//! Closed boundary parameterizations: curves (d = 1) and star-shaped surfaces (d = 2).

pub mod harmonics;
mod spec;

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use spec::{GeometryKind, GeometryParameters, GeometrySpec};

/// Largest oscillation frequency a dense grid (N ≤ 4096) can resolve at 8 nodes per period.
pub const SAMPLE_DENSITY_ADVISORY: f64 = 512.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityClass {
    pub k: u32,
    pub alpha: f64,
}

impl RegularityClass {
    /// C^∞, stored with `k = u32::MAX`.
    pub const SMOOTH: RegularityClass = RegularityClass { k: u32::MAX, alpha: 1.0 };

    pub fn new(k: u32, alpha: f64) -> Result<Self> {
        if k < 1 {
            return Err(invalid(format!("regularity k must be >= 1, got {k}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid(format!("Hölder exponent must lie in (0, 1], got {alpha}")));
        }
        Ok(RegularityClass { k, alpha })
    }

    pub fn is_smooth(&self) -> bool {
        self.k == u32::MAX
    }
}

/// One term c·cos(2π f t + φ) of a radial perturbation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialTerm {
    pub coeff: f64,
    pub freq: f64,
    pub phase: f64,
}

/// One term c·Y_lm of a radial surface perturbation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HarmonicTerm {
    pub l: u32,
    pub m: i32,
    pub coeff: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Ellipse { a: f64, b: f64 },
    /// (1 + Σ terms)·(cos 2πt, sin 2πt)
    RadialCurve { terms: Vec<RadialTerm> },
    /// (1 + Σ terms)·ω(θ, φ)
    StarSurface { terms: Vec<HarmonicTerm> },
}

/// Parameter point: t ∈ [0, 1) for curves, (u, v) ∈ [0, 1) × [0, 1] for surfaces
/// with azimuth φ = 2πu and polar angle θ = πv (north pole at v = 0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Param {
    Curve(f64),
    Surface { u: f64, v: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub point: [f64; 3],
    pub normal: [f64; 3],
    /// |γ'(t)| for curves, |X_u × X_v| for surfaces.
    pub jacobian: f64,
    /// Curves: γ', γ'', … up to the requested order. Surfaces: [X_u, X_v].
    pub derivatives: Vec<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryGeometry {
    pub dim_d: u32,
    pub shape: Shape,
    pub derivative_order: usize,
    pub regularity: RegularityClass,
    pub description: String,
    pub warnings: Vec<String>,
}

/// (cos 2πx, sin 2πx), exact at multiples of a quarter turn.
pub(crate) fn cos_sin_turns(x: f64) -> (f64, f64) {
    let y = 4.0 * (x - x.floor());
    let q = y.round();
    let (s, c) = ((y - q) * (0.5 * PI)).sin_cos();
    rotate_quarter(c, s, q as i64)
}

/// Rotates (c, s) by `q` quarter turns.
#[inline]
fn rotate_quarter(c: f64, s: f64, q: i64) -> (f64, f64) {
    match q.rem_euclid(4) {
        0 => (c, s),
        1 => (-s, c),
        2 => (-c, -s),
        _ => (s, -c),
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut b = 1.0;
    for i in 0..k {
        b = b * (n - i) as f64 / (i + 1) as f64;
    }
    b
}

pub fn make_circle(radius: f64) -> Result<BoundaryGeometry> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid(format!("circle radius must be positive, got {radius}")));
    }
    Ok(BoundaryGeometry {
        dim_d: 1,
        shape: Shape::Ellipse { a: radius, b: radius },
        derivative_order: 16,
        regularity: RegularityClass::SMOOTH,
        description: format!("circle radius={radius}"),
        warnings: Vec::new(),
    })
}

pub fn make_ellipse(a: f64, b: f64) -> Result<BoundaryGeometry> {
    if !(b > 0.0 && a.is_finite()) || a < b {
        return Err(invalid(format!("ellipse needs a >= b > 0, got a={a}, b={b}")));
    }
    Ok(BoundaryGeometry {
        dim_d: 1,
        shape: Shape::Ellipse { a, b },
        derivative_order: 16,
        regularity: RegularityClass::SMOOTH,
        description: format!("ellipse a={a} b={b}"),
        warnings: Vec::new(),
    })
}

/// Uniform phases in [0, 2π) from a seeded ChaCha stream.
pub fn seeded_phases(levels: u32, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..levels).map(|_| rng.random_range(0.0..TAU)).collect()
}

fn lacunary_frequency(base: u32, levels: u32) -> Result<f64> {
    if base < 2 {
        return Err(invalid(format!("lacunarity base must be >= 2, got {base}")));
    }
    let top = (base as f64).powi(levels as i32);
    if !(top <= 2f64.powi(52)) {
        return Err(invalid(format!("base^levels = {base}^{levels} is not representable")));
    }
    Ok(top)
}

/// Circle with the radial perturbation
/// ρ(t) = amplitude · Σ_{n=1..levels} b^{-n(k+α)} cos(2π bⁿ t + φ_n).
pub fn make_weierstrass_curve(
    reg: RegularityClass,
    levels: u32,
    amplitude: f64,
    base: u32,
    phases: &[f64],
) -> Result<BoundaryGeometry> {
    let reg = RegularityClass::new(reg.k, reg.alpha)?;
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(invalid(format!("amplitude must be non-negative, got {amplitude}")));
    }
    if phases.len() < levels as usize {
        return Err(invalid(format!("{} phases given for {levels} levels", phases.len())));
    }
    let top = lacunary_frequency(base, levels)?;
    let b = base as f64;
    let exponent = reg.k as f64 + reg.alpha;
    let terms: Vec<RadialTerm> = (1..=levels)
        .map(|n| RadialTerm {
            coeff: amplitude * b.powf(-(n as f64) * exponent),
            freq: b.powi(n as i32),
            phase: phases[n as usize - 1],
        })
        .collect();

    let bound: f64 = terms.iter().map(|t| t.coeff.abs()).sum();
    if bound > 0.5 {
        let samples = (64.0 * top).clamp(4096.0, (1u32 << 22) as f64) as usize;
        let min_r = (0..samples)
            .map(|i| 1.0 + radial_value(&terms, i as f64 / samples as f64, 0))
            .fold(f64::INFINITY, f64::min);
        if min_r < 0.5 {
            return Err(invalid(format!(
                "radius drops to {min_r:.4} < 1/2; reduce the amplitude"
            )));
        }
    }

    let mut warnings = Vec::new();
    if top > SAMPLE_DENSITY_ADVISORY {
        warnings.push(format!(
            "finest oscillation {base}^{levels} = {top} exceeds the sample density advisory {SAMPLE_DENSITY_ADVISORY}"
        ));
    }
    Ok(BoundaryGeometry {
        dim_d: 1,
        shape: Shape::RadialCurve { terms },
        derivative_order: reg.k as usize + 2,
        regularity: reg,
        description: format!(
            "weierstrass curve k={} alpha={} levels={levels} amplitude={amplitude} base={base}",
            reg.k, reg.alpha
        ),
        warnings,
    })
}

/// Star-shaped surface r(θ, φ)·ω with r = 1 + Σ c_lm Y_lm.
pub fn make_perturbed_sphere(coeffs: &[(u32, i32, f64)]) -> Result<BoundaryGeometry> {
    let mut terms = Vec::with_capacity(coeffs.len());
    for &(l, m, c) in coeffs {
        if m.unsigned_abs() > l {
            return Err(invalid(format!("harmonic order |m| = {} exceeds degree {l}", m.abs())));
        }
        if !c.is_finite() {
            return Err(invalid("non-finite harmonic coefficient"));
        }
        terms.push(HarmonicTerm { l, m, coeff: c });
    }
    check_surface_radius(&terms)?;
    let description = if terms.is_empty() {
        "unit sphere".to_string()
    } else {
        let list: Vec<String> = terms.iter().map(|t| format!("({},{},{})", t.l, t.m, t.coeff)).collect();
        format!("perturbed sphere {}", list.join(" "))
    };
    Ok(BoundaryGeometry {
        dim_d: 2,
        shape: Shape::StarSurface { terms },
        derivative_order: 1,
        regularity: RegularityClass::SMOOTH,
        description,
        warnings: Vec::new(),
    })
}

/// Surface analogue of the Weierstrass curve: zonal harmonics of degree bⁿ with
/// peak amplitude amplitude·b^{-n(k+α)}.
pub fn make_weierstrass_sphere(
    reg: RegularityClass,
    levels: u32,
    amplitude: f64,
    base: u32,
) -> Result<BoundaryGeometry> {
    let reg = RegularityClass::new(reg.k, reg.alpha)?;
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(invalid(format!("amplitude must be non-negative, got {amplitude}")));
    }
    let top = lacunary_frequency(base, levels)?;
    if top > 4096.0 {
        return Err(invalid(format!("harmonic degree {top} too large")));
    }
    let b = base as f64;
    let exponent = reg.k as f64 + reg.alpha;
    let terms: Vec<HarmonicTerm> = (1..=levels)
        .map(|n| {
            let l = b.powi(n as i32) as u32;
            HarmonicTerm { l, m: 0, coeff: amplitude * b.powf(-(n as f64) * exponent) / harmonics::zonal_peak(l) }
        })
        .collect();
    check_surface_radius(&terms)?;
    let mut warnings = Vec::new();
    if top > SAMPLE_DENSITY_ADVISORY {
        warnings.push(format!("finest degree {top} exceeds the sample density advisory"));
    }
    Ok(BoundaryGeometry {
        dim_d: 2,
        shape: Shape::StarSurface { terms },
        derivative_order: 1,
        regularity: reg,
        description: format!(
            "weierstrass sphere k={} alpha={} levels={levels} amplitude={amplitude} base={base}",
            reg.k, reg.alpha
        ),
        warnings,
    })
}

fn check_surface_radius(terms: &[HarmonicTerm]) -> Result<()> {
    let bound: f64 = terms.iter().map(|t| t.coeff.abs() * harmonics::zonal_peak(t.l) * std::f64::consts::SQRT_2).sum();
    if bound <= 0.5 {
        return Ok(());
    }
    let lmax = terms.iter().map(|t| t.l).max().unwrap_or(0) as usize;
    let nt = (8 * lmax).max(128);
    let np = 2 * nt;
    let mut min_r = f64::INFINITY;
    for i in 0..=nt {
        let theta = PI * i as f64 / nt as f64;
        for j in 0..np {
            let phi = TAU * j as f64 / np as f64;
            min_r = min_r.min(surface_radius(terms, theta, phi));
        }
    }
    if min_r < 0.5 {
        return Err(invalid(format!("surface radius drops to {min_r:.4} < 1/2")));
    }
    Ok(())
}

fn surface_radius(terms: &[HarmonicTerm], theta: f64, phi: f64) -> f64 {
    1.0 + terms.iter().map(|t| t.coeff * harmonics::real_sph_harm(t.l, t.m, theta, phi)).sum::<f64>()
}

/// m-th derivative of the radial perturbation Σ c cos(2π f t + φ).
fn radial_value(terms: &[RadialTerm], t: f64, m: usize) -> f64 {
    let mut acc = 0.0;
    for term in terms {
        let x = term.freq * t;
        let (mut c, mut s) = cos_sin_turns(x - x.floor());
        if term.phase != 0.0 {
            let (ps, pc) = term.phase.sin_cos();
            (c, s) = (c * pc - s * ps, s * pc + c * ps);
        }
        let (cm, _) = rotate_quarter(c, s, m as i64);
        acc += term.coeff * (TAU * term.freq).powi(m as i32) * cm;
    }
    acc
}

impl BoundaryGeometry {
    pub fn is_curve(&self) -> bool {
        self.dim_d == 1
    }

    /// Largest frequency (curves) or harmonic degree (surfaces) in the shape.
    pub fn finest_oscillation(&self) -> f64 {
        match &self.shape {
            Shape::Ellipse { .. } => 1.0,
            Shape::RadialCurve { terms } => terms.iter().map(|t| t.freq).fold(1.0, f64::max),
            Shape::StarSurface { terms } => terms.iter().map(|t| t.l as f64).fold(1.0, f64::max),
        }
    }

    /// Position only; valid everywhere including the chart poles.
    pub fn point(&self, p: Param) -> Result<[f64; 3]> {
        match (&self.shape, p) {
            (Shape::StarSurface { terms }, Param::Surface { u, v }) => {
                let (theta, phi) = (PI * v, TAU * u);
                let r = surface_radius(terms, theta, phi);
                let (st, ct) = theta.sin_cos();
                let (sp, cp) = phi.sin_cos();
                Ok([r * st * cp, r * st * sp, r * ct])
            }
            (_, Param::Curve(t)) if self.is_curve() => Ok(self.curve_derivatives(t, 0)[0]),
            _ => Err(invalid("parameter kind does not match the geometry dimension")),
        }
    }

    /// Point, outward unit normal, speed/Jacobian and derivatives up to `order`.
    pub fn evaluate(&self, p: Param, order: usize) -> Result<Evaluation> {
        if order > self.derivative_order {
            return Err(Error::UnsupportedOrder { requested: order, available: self.derivative_order });
        }
        match (&self.shape, p) {
            (Shape::StarSurface { terms }, Param::Surface { u, v }) => surface_evaluate(terms, u, v, order),
            (_, Param::Curve(t)) if self.is_curve() => {
                let d = self.curve_derivatives(t, order.max(1));
                let g1 = d[1];
                let speed = g1[0].hypot(g1[1]);
                if !(speed > 0.0) {
                    return Err(Error::NumericFailure {
                        message: "zero speed".into(),
                        context: format!("{} at t={t}", self.description),
                    });
                }
                let normal = [g1[1] / speed, -g1[0] / speed, 0.0];
                Ok(Evaluation { point: d[0], normal, jacobian: speed, derivatives: d[1..=order].to_vec() })
            }
            _ => Err(invalid("parameter kind does not match the geometry dimension")),
        }
    }

    /// [γ, γ', …, γ^{(order)}] for curves.
    pub(crate) fn curve_derivatives(&self, t: f64, order: usize) -> Vec<[f64; 3]> {
        let (c, s) = cos_sin_turns(t);
        let mut out = Vec::with_capacity(order + 1);
        match &self.shape {
            Shape::Ellipse { a, b } => {
                for m in 0..=order {
                    let (cm, sm) = rotate_quarter(c, s, m as i64);
                    let f = TAU.powi(m as i32);
                    out.push([f * a * cm, f * b * sm, 0.0]);
                }
            }
            Shape::RadialCurve { terms } => {
                let r: Vec<f64> = (0..=order)
                    .map(|m| if m == 0 { 1.0 + radial_value(terms, t, 0) } else { radial_value(terms, t, m) })
                    .collect();
                for m in 0..=order {
                    let mut g = [0.0; 3];
                    for j in 0..=m {
                        let (cj, sj) = rotate_quarter(c, s, j as i64);
                        let f = binomial(m, j) * r[m - j] * TAU.powi(j as i32);
                        g[0] += f * cj;
                        g[1] += f * sj;
                    }
                    out.push(g);
                }
            }
            Shape::StarSurface { .. } => unreachable!("surface has no curve derivatives"),
        }
        out
    }

    /// k-th derivative of the radial perturbation ρ of a radial curve.
    pub fn radial_perturbation(&self, t: f64, order: usize) -> Option<f64> {
        match &self.shape {
            Shape::RadialCurve { terms } => Some(radial_value(terms, t, order)),
            Shape::Ellipse { a, b } if a == b => Some(0.0),
            _ => None,
        }
    }

    /// sup |ρ^{(k)}(t + 2^{-m}) − ρ^{(k)}(t)| / 2^{-mα} over m = 1..log2_samples and all
    /// t on a 2^{log2_samples} grid, using the declared (k, α).
    pub fn dyadic_holder_quotient(&self, log2_samples: u32) -> Result<f64> {
        if self.regularity.is_smooth() {
            return Err(invalid("Hölder quotient needs a finite regularity class"));
        }
        let k = self.regularity.k as usize;
        let alpha = self.regularity.alpha;
        let n = 1usize << log2_samples;
        let vals: Vec<f64> = (0..n)
            .map(|i| self.radial_perturbation(i as f64 / n as f64, k).ok_or_else(|| invalid("not a radial curve")))
            .collect::<Result<_>>()?;
        let mut q: f64 = 0.0;
        for m in 1..=log2_samples {
            let shift = n >> m;
            let h = 2f64.powi(-(m as i32));
            let d = (0..n).map(|i| (vals[(i + shift) % n] - vals[i]).abs()).fold(0.0, f64::max);
            q = q.max(d / h.powf(alpha));
        }
        Ok(q)
    }

    /// Signed area ½∮(x dy − y dx) by the periodic trapezoid rule.
    pub fn signed_area(&self, samples: usize) -> Result<f64> {
        if !self.is_curve() {
            return Err(invalid("signed area is defined for curves"));
        }
        let mut a = 0.0;
        for i in 0..samples {
            let d = self.curve_derivatives(i as f64 / samples as f64, 1);
            a += d[0][0] * d[1][1] - d[0][1] * d[1][0];
        }
        Ok(0.5 * a / samples as f64)
    }
}

fn surface_evaluate(terms: &[HarmonicTerm], u: f64, v: f64, order: usize) -> Result<Evaluation> {
    if v <= 0.0 || v >= 1.0 {
        return Err(Error::DegenerateChart { u, v });
    }
    let (theta, phi) = (PI * v, TAU * u);
    let (mut r, mut rt, mut rp) = (1.0, 0.0, 0.0);
    for t in terms {
        let (y, yt, yp) = harmonics::real_sph_harm_with_gradient(t.l, t.m, theta, phi);
        r += t.coeff * y;
        rt += t.coeff * yt;
        rp += t.coeff * yp;
    }
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let om = [st * cp, st * sp, ct];
    let om_t = [ct * cp, ct * sp, -st];
    let om_p = [-st * sp, st * cp, 0.0];
    let x_t: [f64; 3] = std::array::from_fn(|i| rt * om[i] + r * om_t[i]);
    let x_p: [f64; 3] = std::array::from_fn(|i| rp * om[i] + r * om_p[i]);
    let n = cross(&x_t, &x_p);
    let nn = norm3(&n);
    if !(nn > 0.0) {
        return Err(Error::DegenerateChart { u, v });
    }
    let point = [r * om[0], r * om[1], r * om[2]];
    let normal = [n[0] / nn, n[1] / nn, n[2] / nn];
    let mut derivatives = Vec::new();
    if order >= 1 {
        derivatives.push(x_p.map(|c| TAU * c));
        derivatives.push(x_t.map(|c| PI * c));
    }
    Ok(Evaluation { point, normal, jacobian: 2.0 * PI * PI * nn, derivatives })
}

pub(crate) fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn norm3(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    fn corpus() -> Vec<BoundaryGeometry> {
        vec![
            make_circle(1.0).unwrap(),
            make_circle(2.5).unwrap(),
            make_ellipse(2.0, 1.0).unwrap(),
            make_weierstrass_curve(RegularityClass::new(1, 0.5).unwrap(), 8, 0.3, 2, &[0.0; 8]).unwrap(),
            make_weierstrass_curve(RegularityClass::new(2, 0.3).unwrap(), 6, 0.3, 3, &seeded_phases(6, 7)).unwrap(),
        ]
    }

    #[test]
    fn circle_basics() {
        let c = make_circle(1.0).unwrap();
        let e = c.evaluate(Param::Curve(0.0), 1).unwrap();
        assert_eq!(e.point, [1.0, 0.0, 0.0]);
        assert_eq!(e.normal, [1.0, 0.0, 0.0]);
        let e = c.evaluate(Param::Curve(0.5), 0).unwrap();
        assert_eq!(e.point, [-1.0, 0.0, 0.0]);
        assert_eq!(e.normal, [-1.0, 0.0, 0.0]);
        let c2 = make_circle(2.0).unwrap();
        for i in 0..50 {
            let e = c2.evaluate(Param::Curve(i as f64 / 50.0), 1).unwrap();
            assert!((e.jacobian - 4.0 * PI).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(make_circle(0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_circle(-1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_ellipse(1.0, 2.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_ellipse(1.0, 0.0), Err(Error::InvalidArgument(_))));
        let reg = RegularityClass::new(1, 0.5).unwrap();
        assert!(make_weierstrass_curve(reg, 3, 0.1, 2, &[0.0; 2]).is_err());
        assert!(make_weierstrass_curve(reg, 3, 0.1, 1, &[0.0; 3]).is_err());
        // radius crosses 1/2
        assert!(make_weierstrass_curve(reg, 2, 3.0, 2, &[0.0; 2]).is_err());
        assert!(RegularityClass::new(0, 0.5).is_err());
        assert!(RegularityClass::new(1, 0.0).is_err());
        assert!(RegularityClass::new(1, 1.5).is_err());
        assert!(make_perturbed_sphere(&[(2, 3, 0.1)]).is_err());
        assert!(make_perturbed_sphere(&[(2, 0, 3.0)]).is_err());
    }

    #[test]
    fn ellipse_examples() {
        let e = make_ellipse(2.0, 1.0).unwrap();
        assert_eq!(e.point(Param::Curve(0.25)).unwrap(), [0.0, 1.0, 0.0]);
        assert_eq!(e.evaluate(Param::Curve(0.0), 0).unwrap().normal, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn ellipse_curvature_by_normal_differences() {
        // κ = |dν/ds|; at t=0 the closed form is a/b² = 2.
        let e = make_ellipse(2.0, 1.0).unwrap();
        let h = 1e-6;
        let np = e.evaluate(Param::Curve(h), 1).unwrap();
        let nm = e.evaluate(Param::Curve(-h), 1).unwrap();
        let speed = e.evaluate(Param::Curve(0.0), 1).unwrap().jacobian;
        let dn = [(np.normal[0] - nm.normal[0]) / (2.0 * h), (np.normal[1] - nm.normal[1]) / (2.0 * h)];
        let kappa = dn[0].hypot(dn[1]) / speed;
        assert!((kappa - 2.0).abs() < 1e-7, "{kappa}");
    }

    #[test]
    fn equal_axes_match_circle() {
        for a in [0.5, 1.0, 3.0] {
            let c = make_circle(a).unwrap();
            let e = make_ellipse(a, a).unwrap();
            for i in 0..97 {
                let t = i as f64 / 97.0;
                let pc = c.evaluate(Param::Curve(t), 3).unwrap();
                let pe = e.evaluate(Param::Curve(t), 3).unwrap();
                for k in 0..3 {
                    assert!((pc.point[k] - pe.point[k]).abs() <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn zero_levels_is_the_unit_circle() {
        let w = make_weierstrass_curve(RegularityClass::new(1, 0.5).unwrap(), 0, 0.3, 2, &[]).unwrap();
        let c = make_circle(1.0).unwrap();
        for i in 0..64 {
            let t = i as f64 / 64.0;
            let a = w.evaluate(Param::Curve(t), 2).unwrap();
            let b = c.evaluate(Param::Curve(t), 2).unwrap();
            assert_eq!(a.point, b.point);
            assert_eq!(a.normal, b.normal);
        }
    }

    #[test]
    fn normals_are_unit_and_orthogonal() {
        for g in corpus() {
            for i in 0..500 {
                let t = (i as f64 + 0.37) / 500.0;
                let e = g.evaluate(Param::Curve(t), 1).unwrap();
                assert!((norm3(&e.normal) - 1.0).abs() < 1e-12);
                let tan = e.derivatives[0];
                assert!(dot(&tan, &e.normal).abs() / e.jacobian < 1e-10, "{}", g.description);
            }
        }
    }

    #[test]
    fn periodic_seam() {
        let t1 = 1.0 - f64::EPSILON / 2.0;
        for g in corpus() {
            let a = g.evaluate(Param::Curve(0.0), 2).unwrap();
            let b = g.evaluate(Param::Curve(t1), 2).unwrap();
            let scale = 1.0 + norm3(&a.point);
            for k in 0..2 {
                assert!((a.point[k] - b.point[k]).abs() < 1e-12 * scale, "{}", g.description);
                for (da, db) in a.derivatives.iter().zip(&b.derivatives) {
                    assert!((da[k] - db[k]).abs() < 1e-12 * (1.0 + norm3(da)), "{}", g.description);
                }
            }
        }
    }

    #[test]
    fn positive_orientation() {
        for g in corpus() {
            assert!(g.signed_area(2048).unwrap() > 0.0);
            for i in 0..200 {
                let e = g.evaluate(Param::Curve(i as f64 / 200.0), 1).unwrap();
                assert!(dot(&e.point, &e.normal) > 0.0, "{}", g.description);
            }
        }
    }

    #[test]
    fn unsupported_order() {
        let w = make_weierstrass_curve(RegularityClass::new(1, 0.5).unwrap(), 4, 0.1, 2, &[0.0; 4]).unwrap();
        assert_eq!(w.derivative_order, 3);
        assert!(matches!(
            w.evaluate(Param::Curve(0.1), 4),
            Err(Error::UnsupportedOrder { requested: 4, available: 3 })
        ));
    }

    #[test]
    fn weierstrass_amplitude_bound() {
        // amplitude·Σ 2^{-1.5n} with amplitude 0.1 is about 0.0547
        let levels = 12;
        let w = make_weierstrass_curve(RegularityClass::new(1, 0.5).unwrap(), levels, 0.1, 2, &[0.0; 12]).unwrap();
        let series = 0.1 * (1..200).map(|n| 2f64.powf(-1.5 * n as f64)).sum::<f64>();
        assert!((series - 0.0547).abs() < 1e-4);
        let m = 1 << 16;
        let sup = (0..m).map(|i| w.radial_perturbation(i as f64 / m as f64, 0).unwrap().abs()).fold(0.0, f64::max);
        assert!(sup <= series + 1e-15);
    }

    #[test]
    fn weierstrass_derivatives_match_finite_differences() {
        let w = make_weierstrass_curve(RegularityClass::new(1, 0.5).unwrap(), 6, 0.3, 2, &seeded_phases(6, 3)).unwrap();
        let h = 1e-6;
        for i in 0..40 {
            let t = (i as f64 + 0.13) / 40.0;
            let e = w.evaluate(Param::Curve(t), 1).unwrap();
            let p = w.point(Param::Curve(t + h)).unwrap();
            let m = w.point(Param::Curve(t - h)).unwrap();
            for k in 0..2 {
                let fd = (p[k] - m[k]) / (2.0 * h);
                assert!((fd - e.derivatives[0][k]).abs() < 1e-8 * e.jacobian, "t={t} fd={fd} an={} J={}", e.derivatives[0][k], e.jacobian);
            }
        }
    }

    #[test]
    fn higher_derivatives_match_finite_differences() {
        let w = make_weierstrass_curve(RegularityClass::new(2, 0.5).unwrap(), 4, 0.3, 2, &[0.2, 0.0, 1.0, 0.0]).unwrap();
        let h = 1e-6;
        for i in 0..20 {
            let t = i as f64 / 20.0 + 0.01;
            let d = w.curve_derivatives(t, 4);
            let dp = w.curve_derivatives(t + h, 4);
            let dm = w.curve_derivatives(t - h, 4);
            for m in 1..=4 {
                for k in 0..2 {
                    let fd = (dp[m - 1][k] - dm[m - 1][k]) / (2.0 * h);
                    assert!((fd - d[m][k]).abs() < 1e-6 * (1.0 + d[m][k].abs()), "m={m}");
                }
            }
        }
    }

    #[test]
    fn seeded_phases_are_reproducible() {
        assert_eq!(seeded_phases(10, 42), seeded_phases(10, 42));
        assert_ne!(seeded_phases(10, 42), seeded_phases(10, 43));
        assert!(seeded_phases(100, 1).iter().all(|p| (0.0..TAU).contains(p)));
    }

    #[test]
    fn density_warning() {
        let reg = RegularityClass::new(1, 0.5).unwrap();
        assert!(make_weierstrass_curve(reg, 9, 0.3, 2, &[0.0; 9]).unwrap().warnings.is_empty());
        assert_eq!(make_weierstrass_curve(reg, 10, 0.3, 2, &[0.0; 10]).unwrap().warnings.len(), 1);
    }

    #[test]
    fn sphere_chart() {
        let s = make_perturbed_sphere(&[]).unwrap();
        let np = s.point(Param::Surface { u: 0.3, v: 0.0 }).unwrap();
        assert_eq!(np, [0.0, 0.0, 1.0]);
        assert!(matches!(s.evaluate(Param::Surface { u: 0.3, v: 0.0 }, 0), Err(Error::DegenerateChart { .. })));
        let e = s.evaluate(Param::Surface { u: 0.1, v: 0.4 }, 1).unwrap();
        for k in 0..3 {
            assert!((e.normal[k] - e.point[k]).abs() < 1e-14);
        }
        // |X_u × X_v| = 2π² sin θ on the unit sphere
        assert!((e.jacobian - 2.0 * PI * PI * (0.4 * PI).sin()).abs() < 1e-12);
        let xu_x_xv = cross(&e.derivatives[1], &e.derivatives[0]);
        assert!((norm3(&xu_x_xv) - e.jacobian).abs() < 1e-12);
        assert!(dot(&xu_x_xv, &e.normal) > 0.0);
    }

    #[test]
    fn perturbed_sphere_normals_and_seam() {
        let s = make_perturbed_sphere(&[(2, 0, -0.3), (3, 2, 0.05), (4, -1, 0.04)]).unwrap();
        for i in 1..30 {
            let v = i as f64 / 30.0;
            let a = s.evaluate(Param::Surface { u: 0.0, v }, 1).unwrap();
            let b = s.evaluate(Param::Surface { u: 1.0 - f64::EPSILON / 2.0, v }, 1).unwrap();
            for k in 0..3 {
                assert!((a.point[k] - b.point[k]).abs() < 1e-12);
                assert!((a.normal[k] - b.normal[k]).abs() < 1e-12);
            }
            for j in 0..17 {
                let e = s.evaluate(Param::Surface { u: j as f64 / 17.0, v }, 1).unwrap();
                assert!((norm3(&e.normal) - 1.0).abs() < 1e-12);
                assert!(dot(&e.normal, &e.derivatives[0]).abs() < 1e-10 * norm3(&e.derivatives[0]));
                assert!(dot(&e.normal, &e.derivatives[1]).abs() < 1e-10 * norm3(&e.derivatives[1]));
                assert!(dot(&e.normal, &e.point) > 0.0);
            }
        }
    }

    #[test]
    fn oblate_radius_is_monotone_in_latitude() {
        let s = make_perturbed_sphere(&[(2, 0, -0.3)]).unwrap();
        let r: Vec<f64> = (0..=50).map(|i| norm3(&s.point(Param::Surface { u: 0.2, v: 0.01 * i as f64 }).unwrap())).collect();
        assert!(r.windows(2).all(|w| w[1] >= w[0]), "radius should grow from pole to equator");
    }

    #[test]
    fn sphere_tangents_match_finite_differences() {
        let s = make_perturbed_sphere(&[(2, 0, -0.3), (3, 1, 0.05)]).unwrap();
        let h = 1e-6;
        let (u, v) = (0.37, 0.61);
        let e = s.evaluate(Param::Surface { u, v }, 1).unwrap();
        let fu = |du: f64, dv: f64| s.point(Param::Surface { u: u + du, v: v + dv }).unwrap();
        for k in 0..3 {
            let xu = (fu(h, 0.0)[k] - fu(-h, 0.0)[k]) / (2.0 * h);
            let xv = (fu(0.0, h)[k] - fu(0.0, -h)[k]) / (2.0 * h);
            assert!((xu - e.derivatives[0][k]).abs() < 1e-7);
            assert!((xv - e.derivatives[1][k]).abs() < 1e-7);
        }
    }

    #[test]
    fn weierstrass_sphere_builds() {
        let g = make_weierstrass_sphere(RegularityClass::new(1, 0.5).unwrap(), 3, 0.3, 2).unwrap();
        match &g.shape {
            Shape::StarSurface { terms } => {
                assert_eq!(terms.iter().map(|t| t.l).collect::<Vec<_>>(), vec![2, 4, 8]);
            }
            _ => panic!(),
        }
    }
}
