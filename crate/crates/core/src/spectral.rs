//! Eigenvalues, singular values, Schatten sums and the Weyl inequality.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::discretize::{DiagonalRule, OperatorMatrix};
use crate::error::{invalid, Result};
use crate::geometry::RegularityClass;
use crate::kernel::KernelIdentity;
use crate::linalg;

/// Relative change in |λ_j| under refinement below which λ_j counts as resolved.
pub const RESOLVED_TOLERANCE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSource {
    pub geometry: String,
    pub n: usize,
    pub grid: String,
    pub identity: KernelIdentity,
    pub rule: DiagonalRule,
    pub regularity: RegularityClass,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Sorted by descending modulus, then descending real part, then ascending imaginary part.
    pub eigenvalues: Vec<Complex64>,
    /// Singular values of D^{1/2}·A·D^{-1/2}, descending.
    pub singular_values: Vec<f64>,
    /// max |Im λ| / (|λ| + floor) over the resolved eigenvalues.
    pub realness_defect: f64,
    pub j_resolved: usize,
    pub source: SpectrumSource,
}

pub fn eigen_order(a: &Complex64, b: &Complex64) -> Ordering {
    b.norm()
        .total_cmp(&a.norm())
        .then_with(|| b.re.total_cmp(&a.re))
        .then_with(|| a.im.total_cmp(&b.im))
}

fn source_of(a: &OperatorMatrix) -> SpectrumSource {
    SpectrumSource {
        geometry: a.description.clone(),
        n: a.n(),
        grid: a.grid.size_label(),
        identity: a.identity,
        rule: a.diagonal_rule,
        regularity: a.grid.regularity,
        warnings: a.grid.warnings.clone(),
    }
}

/// Eigenvalues of A; every eigenvalue counts as resolved until
/// [`Spectrum::resolve_against`] is given a coarser spectrum.
pub fn eigen_spectrum(a: &OperatorMatrix) -> Result<Spectrum> {
    let mut ev = linalg::eigenvalues(&a.entries, &a.label())?;
    ev.sort_by(eigen_order);
    let mut s = Spectrum {
        j_resolved: ev.len(),
        eigenvalues: ev,
        singular_values: Vec::new(),
        realness_defect: 0.0,
        source: source_of(a),
    };
    s.update_realness();
    Ok(s)
}

/// Weighted singular values; composed operators carried in double-double use
/// the double-double SVD.
pub fn singular_spectrum(a: &OperatorMatrix) -> Result<Spectrum> {
    let sv = weighted_singular_values(a)?;
    Ok(Spectrum {
        eigenvalues: Vec::new(),
        singular_values: sv,
        realness_defect: 0.0,
        j_resolved: 0,
        source: source_of(a),
    })
}

pub fn full_spectrum(a: &OperatorMatrix) -> Result<Spectrum> {
    let mut s = eigen_spectrum(a)?;
    s.singular_values = weighted_singular_values(a)?;
    Ok(s)
}

fn weighted_singular_values(a: &OperatorMatrix) -> Result<Vec<f64>> {
    let w = a.measures();
    if w.iter().any(|m| !(*m > 0.0)) {
        return Err(invalid("singular values need positive measures"));
    }
    match &a.entries_lo {
        None => linalg::singular_values(&a.weighted(), &a.label()),
        Some(lo) => {
            let n = a.n();
            let sq: Vec<Dd> = w.iter().map(|m| Dd::from_f64(*m).sqrt()).collect();
            let mut hi_w = Mat::<f64>::zeros(n, n);
            let mut lo_w = Mat::<f64>::zeros(n, n);
            for j in 0..n {
                for i in 0..n {
                    let v = (Dd::new(a.entries[(i, j)], 0.0) + Dd::from_f64(lo[(i, j)])) * sq[i] / sq[j];
                    hi_w[(i, j)] = v.hi;
                    lo_w[(i, j)] = v.lo;
                }
            }
            linalg::singular_values_dd(&hi_w, &lo_w, &a.label())
        }
    }
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len().max(self.singular_values.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|z| z.norm()).collect()
    }

    /// Sets `j_resolved` to the length of the leading run of eigenvalues whose
    /// modulus changed by less than 1% relative to `coarse`.
    pub fn resolve_against(&mut self, coarse: &Spectrum) {
        let m = self.eigenvalues.len().min(coarse.eigenvalues.len());
        let mut j = 0;
        while j < m {
            let f = self.eigenvalues[j].norm();
            let c = coarse.eigenvalues[j].norm();
            if !(f > 0.0) || (f - c).abs() >= RESOLVED_TOLERANCE * f {
                break;
            }
            j += 1;
        }
        self.j_resolved = j;
        self.update_realness();
    }

    fn update_realness(&mut self) {
        let top = self.eigenvalues.first().map(|z| z.norm()).unwrap_or(0.0);
        let floor = self.eigenvalues.len() as f64 * f64::EPSILON * top;
        self.realness_defect = self.eigenvalues[..self.j_resolved.min(self.eigenvalues.len())]
            .iter()
            .map(|z| z.im.abs() / (z.norm() + floor))
            .fold(0.0, f64::max);
    }

    /// Values at or below N·ε·max(|λ_1|, s_1); the CSV prints them as 0.
    pub fn roundoff_floor(&self) -> f64 {
        let top = self.eigenvalues.first().map(|z| z.norm()).unwrap_or(0.0);
        let top = top.max(self.singular_values.first().copied().unwrap_or(0.0));
        self.len() as f64 * f64::EPSILON * top
    }

    /// CSV rows `j,re_lambda,im_lambda,abs_lambda,s_j` (1-based j).
    pub fn to_csv(&self) -> String {
        let floor = self.roundoff_floor();
        let snap = |x: f64| fmt(if x.abs() <= floor { 0.0 } else { x });
        let mut out = String::from("j,re_lambda,im_lambda,abs_lambda,s_j\n");
        for j in 0..self.len() {
            let (re, im, ab) = match self.eigenvalues.get(j) {
                Some(z) => (snap(z.re), snap(z.im), snap(z.norm())),
                None => (String::new(), String::new(), String::new()),
            };
            let s = self.singular_values.get(j).map(|v| snap(*v)).unwrap_or_default();
            let _ = writeln!(out, "{},{re},{im},{ab},{s}", j + 1);
        }
        out
    }

    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "geometry": self.source.geometry,
            "n": self.source.n,
            "grid": self.source.grid,
            "operator": self.source.identity,
            "rule": self.source.rule,
            "j_resolved": self.j_resolved,
            "realness_defect": self.realness_defect,
            "warnings": self.source.warnings,
        })
    }

    /// Writes `<stem>.csv` and `<stem>.json`; returns both paths.
    pub fn export(&self, dir: &Path, stem: &str) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&csv, self.to_csv())?;
        std::fs::write(&json, serde_json::to_string_pretty(&self.sidecar())? + "\n")?;
        Ok((csv, json))
    }
}

/// Value rounded to 15 significant digits, printed in its shortest form;
/// negative zero prints as 0.
pub fn fmt(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{x:.14e}").parse().unwrap_or(x);
    if (1e-5..1e16).contains(&rounded.abs()) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

/// Σ_{j≤J} s_j^p.
pub fn schatten_partial_sum(spec: &Spectrum, p: f64, j: usize) -> Result<f64> {
    if !(p > 0.0) {
        return Err(invalid(format!("Schatten exponent must be positive, got {p}")));
    }
    if j > spec.singular_values.len() {
        return Err(invalid(format!("J = {j} exceeds {} singular values", spec.singular_values.len())));
    }
    Ok(spec.singular_values[..j].iter().map(|s| s.powf(p)).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Σ_{j≤J} |λ_j|^p against Σ_{j≤J} s_j^p. Values at or below the
/// spectrum's round-off floor count as exact zeros on both sides.
pub fn weyl_check(spec: &Spectrum, p: f64, j: usize) -> Result<WeylCheck> {
    if j == 0 || j > spec.eigenvalues.len().min(spec.singular_values.len()) {
        return Err(invalid(format!(
            "J = {j} outside 1..={}",
            spec.eigenvalues.len().min(spec.singular_values.len())
        )));
    }
    if !(p > 0.0) {
        return Err(invalid(format!("Schatten exponent must be positive, got {p}")));
    }
    Ok(weyl_prefixes(spec, p)[j - 1])
}

/// Weyl sums for every J = 1..N.
pub fn weyl_prefixes(spec: &Spectrum, p: f64) -> Vec<WeylCheck> {
    let floor = spec.roundoff_floor();
    let snap = |x: f64| if x <= floor { 0.0 } else { x.powf(p) };
    let (mut lhs, mut rhs) = (0.0, 0.0);
    spec.eigenvalues
        .iter()
        .zip(&spec.singular_values)
        .map(|(z, s)| {
            lhs += snap(z.norm());
            rhs += snap(*s);
            WeylCheck { lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-12) }
        })
        .collect()
}

/// First J at which the Weyl inequality fails, if any.
pub fn weyl_all_prefixes(spec: &Spectrum, p: f64) -> Option<(usize, WeylCheck)> {
    weyl_prefixes(spec, p).into_iter().enumerate().find(|(_, w)| !w.holds).map(|(j, w)| (j + 1, w))
}
