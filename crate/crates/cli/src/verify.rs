//! `np-spectra verify`: the built-in oracle suite.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use np_spectra_core::analysis::FitSource;
use np_spectra_core::spectral::{fmt, weyl_prefixes};
use np_spectra_core::{
    assemble, assemble_composed, eigen_spectrum, fit_decay, full_spectrum, make_circle, make_ellipse, make_grid,
    make_perturbed_sphere, make_weierstrass_curve, seeded_phases, singular_spectrum, BoundaryGeometry, DiagonalRule,
    KernelIdentity, OperatorMatrix, RegularityClass, Spectrum,
};
use serde::Serialize;

use crate::error::{Result, EXIT_CRITERION_FAILED};
use crate::manifest::Emitter;
use crate::runner::WEYL_EXPONENTS;

/// Deliberate corruption used to check that the suite can fail.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Fault {
    #[default]
    None,
    /// Negates every off-diagonal entry after assembly.
    FlipKernelSign,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Group {
    Circle,
    Ellipse,
    Sphere,
    Weyl,
    PowerIdentity,
}

impl Group {
    pub const ALL: [Group; 5] = [Group::Circle, Group::Ellipse, Group::Sphere, Group::Weyl, Group::PowerIdentity];

    pub fn name(self) -> &'static str {
        match self {
            Group::Circle => "circle",
            Group::Ellipse => "ellipse",
            Group::Sphere => "sphere",
            Group::Weyl => "weyl",
            Group::PowerIdentity => "power identity",
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Circle oracles only; ignored when `groups` is set.
    pub quick: bool,
    pub groups: Option<Vec<Group>>,
    pub fault: Fault,
    pub output_dir: PathBuf,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { quick: false, groups: None, fault: Fault::None, output_dir: PathBuf::from("verify-output") }
    }
}

impl VerifyOptions {
    pub fn selected(&self) -> Vec<Group> {
        match &self.groups {
            Some(g) => g.clone(),
            None if self.quick => vec![Group::Circle],
            None => Group::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = "<")]
    Below,
    #[serde(rename = "==")]
    Equal,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::Below => "<",
            Relation::Equal => "==",
        }
    }

    fn holds(self, value: f64, tolerance: f64) -> bool {
        match self {
            Relation::AtMost => value <= tolerance,
            Relation::Below => value < tolerance,
            Relation::Equal => value == tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleRow {
    pub name: String,
    pub metric: String,
    pub value: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub rows: Vec<OracleRow>,
    /// Wall time per oracle group; printed, never written to disk.
    pub timings: Vec<(String, Duration)>,
    pub output_dir: PathBuf,
    pub files: Vec<String>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_pass() {
            0
        } else {
            EXIT_CRITERION_FAILED
        }
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:<34} {:<32} {:>24} {:>4} {:<10} {}\n", "oracle", "metric", "value", "", "tolerance", "result");
        for r in &self.rows {
            out.push_str(&format!(
                "{:<34} {:<32} {:>24} {:>4} {:<10} {}\n",
                r.name,
                r.metric,
                fmt(r.value),
                r.relation.symbol(),
                fmt(r.tolerance),
                if r.pass { "PASS" } else { "FAIL" }
            ));
        }
        for (group, t) in &self.timings {
            out.push_str(&format!("{group}: {:.2} s\n", t.as_secs_f64()));
        }
        out
    }
}

#[derive(Serialize)]
struct VerifyJson<'a> {
    groups: Vec<&'static str>,
    all_pass: bool,
    rows: &'a [OracleRow],
}

struct Suite {
    fault: Fault,
    rows: Vec<OracleRow>,
    ellipse: Option<Spectrum>,
}

impl Suite {
    fn row(&mut self, name: &str, metric: &str, value: f64, relation: Relation, tolerance: f64) {
        let pass = value.is_finite() && relation.holds(value, tolerance);
        self.rows.push(OracleRow {
            name: name.into(),
            metric: metric.into(),
            value,
            tolerance,
            relation,
            pass,
        });
    }

    fn matrix(&self, geom: &BoundaryGeometry, nt: usize, np: Option<usize>, id: KernelIdentity) -> Result<OperatorMatrix> {
        let grid = make_grid(geom, nt, np)?;
        let mut m = assemble(geom, &grid, id, DiagonalRule::RowSum)?;
        if self.fault == Fault::FlipKernelSign {
            let n = m.n();
            for j in 0..n {
                for i in 0..n {
                    if i != j {
                        m.entries[(i, j)] = -m.entries[(i, j)];
                    }
                }
            }
        }
        Ok(m)
    }
}

fn circle(s: &mut Suite) -> Result<()> {
    let c = make_circle(1.0)?;
    let k = s.matrix(&c, 16, None, KernelIdentity::np(1))?;
    let spec = eigen_spectrum(&k)?;
    let dev = spec
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(j, z)| if j == 0 { (z - 0.5).norm() } else { z.norm() })
        .fold(0.0, f64::max);
    s.row("circle_n16_eigenvalues", "max |lambda - exact|", dev, Relation::AtMost, 1e-12);
    let rows = k.row_sums().iter().map(|r| (r - 0.5).abs()).fold(0.0, f64::max);
    s.row("circle_n16_row_sums", "max |row sum - 1/2|", rows, Relation::AtMost, 2.0 * f64::EPSILON);
    Ok(())
}

/// Largest relative error of the ±(1/2)·3^{-n} pairs, n = 1..pairs, and of the eigenvalue 1/2.
fn ellipse_pair_error(spec: &Spectrum, pairs: usize) -> f64 {
    let ev = &spec.eigenvalues;
    let mut worst = ev.first().map_or(f64::INFINITY, |z| (z - 0.5).norm() / 0.5);
    for n in 1..=pairs {
        let expected = 0.5 * 3f64.powi(-(n as i32));
        let (Some(a), Some(b)) = (ev.get(2 * n - 1), ev.get(2 * n)) else {
            return f64::INFINITY;
        };
        let (lo, hi) = if a.re <= b.re { (a, b) } else { (b, a) };
        let err = (lo + expected).norm().max((hi - expected).norm()) / expected;
        worst = worst.max(err);
    }
    worst
}

fn ellipse_spectrum(s: &Suite) -> Result<Spectrum> {
    let e = make_ellipse(2.0, 1.0)?;
    Ok(full_spectrum(&s.matrix(&e, 512, None, KernelIdentity::np_star(1))?)?)
}

fn ellipse(s: &mut Suite) -> Result<()> {
    let spec = ellipse_spectrum(s)?;
    s.row("ellipse_n512_pairs", "max rel err, 8 pairs", ellipse_pair_error(&spec, 8), Relation::AtMost, 1e-5);
    let r2 = fit_decay(&spec, Some((4, 30)), FitSource::Eigen).map_or(f64::NAN, |f| f.r_squared);
    s.row("ellipse_n512_not_power_law", "log-log r^2, j in 4..30", r2, Relation::Below, 0.98);
    s.ellipse = Some(spec);
    Ok(())
}

/// Groups descending values: a new group starts when a value falls more than
/// `rel` below the first value of the current group.
pub fn bucket(values: &[f64], rel: f64) -> Vec<Vec<f64>> {
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for &v in values {
        match groups.last_mut() {
            Some(g) if (g[0] - v).abs() <= rel * g[0].abs() => g.push(v),
            _ => groups.push(vec![v]),
        }
    }
    groups
}

fn sphere(s: &mut Suite) -> Result<()> {
    let sph = make_perturbed_sphere(&[])?;
    let a = s.matrix(&sph, 48, Some(96), KernelIdentity::np_star(2))?;
    let spec = eigen_spectrum(&a)?;
    let re: Vec<f64> = spec.eigenvalues.iter().skip(1).map(|z| z.re).collect();
    let groups = bucket(&re, 0.01);
    for l in 1..=3usize {
        let expected = 0.5 / (2 * l + 1) as f64;
        let group = groups.get(l - 1).cloned().unwrap_or_default();
        let err = group.iter().map(|v| (v - expected).abs() / expected).fold(if group.is_empty() { f64::INFINITY } else { 0.0 }, f64::max);
        s.row(&format!("sphere_48x96_l{l}_cluster"), "max rel err in cluster", err, Relation::AtMost, 0.02);
        s.row(&format!("sphere_48x96_l{l}_multiplicity"), "cluster size", group.len() as f64, Relation::Equal, (2 * l + 1) as f64);
    }
    Ok(())
}

fn weyl(s: &mut Suite) -> Result<()> {
    let ellipse_spec = match s.ellipse.take() {
        Some(e) => e,
        None => ellipse_spectrum(s)?,
    };
    let mut corpus: Vec<(&str, Spectrum)> = vec![("ellipse_n512", ellipse_spec)];
    let c = make_circle(1.0)?;
    corpus.push(("circle_n16", full_spectrum(&s.matrix(&c, 16, None, KernelIdentity::np(1))?)?));
    let w = make_weierstrass_curve(RegularityClass::new(1, 0.5)?, 5, 0.3, 2, &seeded_phases(5, 7))?;
    corpus.push(("weierstrass_n256", full_spectrum(&s.matrix(&w, 256, None, KernelIdentity::np_star(1))?)?));
    let oblate = make_perturbed_sphere(&[(2, 0, -0.3)])?;
    corpus.push(("oblate_sphere_12x24", full_spectrum(&s.matrix(&oblate, 12, Some(24), KernelIdentity::np_star(2))?)?));
    for (name, spec) in &corpus {
        let mut worst: f64 = 0.0;
        for p in WEYL_EXPONENTS {
            for w in weyl_prefixes(spec, p) {
                if w.lhs > 0.0 || w.rhs > 0.0 {
                    worst = worst.max(w.lhs / w.rhs);
                }
            }
        }
        s.row(&format!("weyl_{name}"), "max lhs/rhs, all p and J", worst, Relation::AtMost, 1.0 + 1e-12);
    }
    Ok(())
}

/// max_j |s_j(L_n) − s_j(K*)^n| / s_j(K*)^n for j ≤ jmax, where values below
/// s_1^n·1e-8 count as zero and must stay below that floor.
pub fn power_identity_error(a: &OperatorMatrix, n: u32, jmax: usize) -> Result<f64> {
    let base = singular_spectrum(a)?.singular_values;
    let composed = singular_spectrum(&assemble_composed(a, n)?)?.singular_values;
    let floor = base[0].powi(n as i32) * 1e-8;
    Ok((0..jmax.min(base.len()))
        .map(|j| {
            let e = base[j].powi(n as i32);
            let diff = (composed[j] - e).abs();
            if e <= floor {
                if diff <= floor { 0.0 } else { f64::INFINITY }
            } else {
                diff / e
            }
        })
        .fold(0.0, f64::max))
}

fn power_identity(s: &mut Suite) -> Result<()> {
    let cases = [("circle_n32", make_circle(1.0)?, 32), ("ellipse_n128", make_ellipse(2.0, 1.0)?, 128)];
    for (name, geom, n) in cases {
        let a = s.matrix(&geom, n, None, KernelIdentity::np_star(1))?;
        for order in [2, 3] {
            let err = power_identity_error(&a, order, 20)?;
            s.row(&format!("power_identity_{name}_l{order}"), "max rel err, j <= 20", err, Relation::AtMost, 1e-8);
        }
    }
    Ok(())
}

pub fn verify(opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut s = Suite { fault: opts.fault, rows: Vec::new(), ellipse: None };
    let mut timings = Vec::new();
    let groups = opts.selected();
    for g in Group::ALL.into_iter().filter(|g| groups.contains(g)) {
        let run: fn(&mut Suite) -> Result<()> = match g {
            Group::Circle => circle,
            Group::Ellipse => ellipse,
            Group::Sphere => sphere,
            Group::Weyl => weyl,
            Group::PowerIdentity => power_identity,
        };
        let t = Instant::now();
        run(&mut s)?;
        timings.push((g.name().to_string(), t.elapsed()));
    }

    let mut em = Emitter::new(&opts.output_dir)?;
    let mut csv = String::from("name,metric,value,tolerance,relation,pass\n");
    for r in &s.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.name,
            r.metric,
            fmt(r.value),
            fmt(r.tolerance),
            r.relation.symbol(),
            r.pass
        ));
    }
    em.write("verify.csv", csv)?;
    let all_pass = s.rows.iter().all(|r| r.pass);
    em.write_json("verify.json", &VerifyJson { groups: groups.iter().map(|g| g.name()).collect(), all_pass, rows: &s.rows })?;
    let files = em.finish()?;
    Ok(VerifyReport { rows: s.rows, timings, output_dir: opts.output_dir.clone(), files })
}
