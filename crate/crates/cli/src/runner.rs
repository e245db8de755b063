//! `np-spectra run`: geometry, assembly, spectra, fits and probes from one config.

use std::path::PathBuf;

use np_spectra_core::analysis::{
    lemma_hypothesis, probe_convolution_bound, probe_holder_difference, probe_kernel_singularity, probe_smoothing,
    probe_sobolev_seminorm, probe_tangential_derivatives, sobolev_threshold, FitSource, SmoothingReport,
};
use np_spectra_core::spectral::{fmt, weyl_all_prefixes, WeylCheck};
use np_spectra_core::{
    assemble, fit_decay, full_spectrum, make_grid, BoundaryGeometry, DecayFit, KernelIdentity, OperatorMatrix,
    ProbeReport, Spectrum,
};
use serde::Serialize;

use crate::config::{Format, LoadedConfig, Operation, OperatorChoice};
use crate::error::{Result, EXIT_CRITERION_FAILED};
use crate::manifest::Emitter;
use crate::svg;

pub const WEYL_EXPONENTS: [f64; 4] = [0.25, 0.5, 1.0, 2.0];

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub strict: bool,
    /// Replaces the config's `output_dir`; used as given, not relative to the config.
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    /// Emitted files relative to `output_dir`, sorted; `manifest.json` not included.
    pub files: Vec<String>,
    /// One line per failed pass criterion.
    pub failures: Vec<String>,
}

impl RunOutcome {
    pub fn exit_code(&self, strict: bool) -> i32 {
        if strict && !self.failures.is_empty() {
            EXIT_CRITERION_FAILED
        } else {
            0
        }
    }
}

#[derive(Serialize)]
struct WeylRow {
    p: f64,
    holds: bool,
    /// First J at which the inequality fails, with its sums.
    first_failure: Option<(usize, WeylCheck)>,
}

#[derive(Serialize)]
struct WeylGrid {
    grid: String,
    checks: Vec<WeylRow>,
}

#[derive(Serialize)]
struct DecayOut {
    grid: String,
    j_resolved: usize,
    fit: Option<DecayFit>,
    meets_lower_bound: Option<bool>,
    error: Option<String>,
    weyl: Vec<WeylGrid>,
}

#[derive(Serialize)]
struct ProbeOut<'a> {
    grid: String,
    #[serde(flatten)]
    report: &'a ProbeReport,
}

#[derive(Serialize)]
struct SmoothingOut {
    grid: String,
    #[serde(flatten)]
    report: SmoothingReport,
    threshold: f64,
    pass: bool,
}

#[derive(Serialize)]
struct SobolevValue {
    grid: String,
    value: f64,
}

#[derive(Serialize)]
struct SobolevRow {
    nu: f64,
    values: Vec<SobolevValue>,
    /// value(grid i+1) / value(grid i).
    ratios: Vec<f64>,
}

#[derive(Serialize)]
struct SobolevOut {
    n: u32,
    threshold: f64,
    hypothesis_holds: bool,
    rows: Vec<SobolevRow>,
}

fn identity_for(choice: OperatorChoice, d: u32) -> KernelIdentity {
    match choice {
        OperatorChoice::NpStar => KernelIdentity::np_star(d),
        OperatorChoice::Np => KernelIdentity::np(d),
    }
}

/// The configured operator's matrix, or a fresh assembly of `want` on the same grid.
fn matrix_as(geom: &BoundaryGeometry, m: &OperatorMatrix, want: KernelIdentity) -> Result<OperatorMatrix> {
    if m.identity == want {
        Ok(m.clone())
    } else {
        Ok(assemble(geom, &m.grid, want, m.diagonal_rule)?)
    }
}

pub fn run(loaded: &LoadedConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let cfg = &loaded.config;
    let geom = loaded.build_geometry()?;
    let d = geom.dim_d;
    let dir = opts.output_dir.clone().unwrap_or_else(|| loaded.base_dir().join(&cfg.output_dir));
    let mut em = Emitter::new(&dir)?;
    let csv = cfg.formats.contains(&Format::Csv);
    let json = cfg.formats.contains(&Format::Json);
    let identity = identity_for(cfg.operator, d);
    let mut failures = Vec::new();

    let mut resolved = cfg.clone();
    resolved.geometry = Some(loaded.geometry_spec()?);
    resolved.geometry_file = None;
    em.write_json("config.json", &resolved)?;

    let need_spectra = loaded.wants(Operation::Spectrum) || loaded.wants(Operation::Decay);
    let mut spectra: Vec<Spectrum> = Vec::new();
    let mut finest: Option<OperatorMatrix> = None;
    for size in &cfg.grid_sizes {
        let (nt, np) = size.parts();
        let grid = make_grid(&geom, nt, np)?;
        let m = assemble(&geom, &grid, identity, cfg.diagonal_rule)?;
        if need_spectra {
            let mut s = full_spectrum(&m)?;
            if let Some(prev) = spectra.last() {
                s.resolve_against(prev);
            }
            if loaded.wants(Operation::Spectrum) {
                let stem = format!("spectrum_{}", grid.size_label());
                if csv {
                    em.write(&format!("{stem}.csv"), s.to_csv())?;
                }
                if json {
                    em.write_json(&format!("{stem}.json"), &s.sidecar())?;
                }
            }
            spectra.push(s);
        }
        finest = Some(m);
    }
    let finest = finest.expect("validated non-empty grid_sizes");
    let label = finest.grid.size_label();

    if cfg.formats.contains(&Format::Svg) && !spectra.is_empty() {
        let series: Vec<(String, &Spectrum)> = spectra.iter().map(|s| (s.source.grid.clone(), s)).collect();
        em.write("spectrum.svg", svg::decay_plot(&series))?;
    }

    if loaded.wants(Operation::Decay) {
        let top = spectra.last().expect("spectra computed for decay");
        let (fit, error) = match fit_decay(top, None, FitSource::Eigen) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let meets = fit.as_ref().map(DecayFit::meets_lower_bound);
        match (&meets, &error) {
            (Some(false), _) => failures.push(format!(
                "decay: q_hat {} below the predicted lower bound",
                fmt(fit.as_ref().map_or(f64::NAN, |f| f.q_hat))
            )),
            (_, Some(e)) => failures.push(format!("decay: {e}")),
            _ => {}
        }
        let mut weyl = Vec::new();
        for s in &spectra {
            let checks: Vec<WeylRow> = WEYL_EXPONENTS
                .iter()
                .map(|&p| {
                    let first_failure = weyl_all_prefixes(s, p);
                    WeylRow { p, holds: first_failure.is_none(), first_failure }
                })
                .collect();
            for c in checks.iter().filter(|c| !c.holds) {
                failures.push(format!("weyl: p = {} fails on grid {}", c.p, s.source.grid));
            }
            weyl.push(WeylGrid { grid: s.source.grid.clone(), checks });
        }
        let out = DecayOut { grid: label.clone(), j_resolved: top.j_resolved, fit, meets_lower_bound: meets, error, weyl };
        em.write_json("decay.json", &out)?;
    }

    if loaded.wants(Operation::Probes) {
        let p = &cfg.probes;
        let emit = |em: &mut Emitter, name: &str, report: &ProbeReport, failures: &mut Vec<String>| -> Result<()> {
            if !report.pass {
                failures.push(format!("probe {name}: fitted exponent {} vs predicted {}", fmt(report.fitted_exponent), fmt(report.predicted_exponent)));
            }
            em.write_json(&format!("probe_{name}.json"), &ProbeOut { grid: label.clone(), report })?;
            if csv && !report.scatter.is_empty() {
                em.write(&format!("probe_{name}_scatter.csv"), report.scatter_csv())?;
            }
            Ok(())
        };
        if let Some(k) = &p.kernel_singularity {
            let r = probe_kernel_singularity(&geom, k.pair_sample)?;
            emit(&mut em, "kernel_singularity", &r, &mut failures)?;
        }
        if let Some(c) = &p.convolution_bound {
            let r = probe_convolution_bound(&geom, &finest.grid, c.alpha, c.beta, c.pair_sample)?;
            emit(&mut em, "convolution_bound", &r, &mut failures)?;
        }
        if let Some(t) = &p.tangential_derivatives {
            for &l in &t.l {
                let r = probe_tangential_derivatives(&geom, l, t.pair_sample, None)?;
                emit(&mut em, &format!("tangential_derivatives_l{l}"), &r, &mut failures)?;
            }
        }
        if let Some(h) = &p.holder_difference {
            let a_star = matrix_as(&geom, &finest, KernelIdentity::np_star(d))?;
            for &n in &h.n {
                let seed = h.seed.expect("validated seed");
                let r = probe_holder_difference(&geom, &a_star, n, h.triple_sample, seed)?;
                emit(&mut em, &format!("holder_difference_n{n}"), &r, &mut failures)?;
            }
        }
        if let Some(s) = &p.smoothing {
            let k = matrix_as(&geom, &finest, KernelIdentity::np(d))?;
            let report = probe_smoothing(&geom, &k, s.s, s.source_decay, s.seed.expect("validated seed"))?;
            let alpha = if geom.regularity.is_smooth() { 1.0 } else { geom.regularity.alpha.min(1.0) };
            let threshold = alpha - 0.2;
            let pass = report.unbounded || report.gain >= threshold;
            if !pass {
                failures.push(format!("probe smoothing: gain {} below {}", fmt(report.gain), fmt(threshold)));
            }
            em.write_json("probe_smoothing.json", &SmoothingOut { grid: label.clone(), report, threshold, pass })?;
        }
        if let Some(s) = &p.sobolev_seminorm {
            let mut per_grid = Vec::new();
            for size in &cfg.grid_sizes {
                let (nt, np) = size.parts();
                let grid = make_grid(&geom, nt, np)?;
                let a_star = assemble(&geom, &grid, KernelIdentity::np_star(d), cfg.diagonal_rule)?;
                let values = s.nu.iter().map(|&nu| probe_sobolev_seminorm(&geom, &a_star, s.n, nu)).collect::<std::result::Result<Vec<_>, _>>()?;
                per_grid.push((grid.size_label(), values));
            }
            let rows = s
                .nu
                .iter()
                .enumerate()
                .map(|(k, &nu)| {
                    let values: Vec<SobolevValue> =
                        per_grid.iter().map(|(g, v)| SobolevValue { grid: g.clone(), value: v[k] }).collect();
                    let ratios = values.windows(2).map(|w| w[1].value / w[0].value).collect();
                    SobolevRow { nu, values, ratios }
                })
                .collect();
            let alpha = geom.regularity.alpha;
            let out = SobolevOut {
                n: s.n,
                threshold: sobolev_threshold(s.n, d, alpha),
                hypothesis_holds: lemma_hypothesis(s.n, d, alpha),
                rows,
            };
            em.write_json("probe_sobolev_seminorm.json", &out)?;
        }
    }

    let files = em.finish()?;
    Ok(RunOutcome { output_dir: dir, files, failures })
}

/// Sampled points and normals: `t,x,y,nx,ny` on N uniform parameters for curves,
/// `u,v,x,y,z,nx,ny,nz` on the N×2N quadrature grid for surfaces.
pub fn sample_geometry(geom: &BoundaryGeometry, n: usize) -> Result<String> {
    use np_spectra_core::Param;
    let mut out = String::new();
    if geom.is_curve() {
        if n == 0 {
            return Err(crate::error::CliError::Usage("--sample must be positive".into()));
        }
        out.push_str("t,x,y,nx,ny\n");
        for i in 0..n {
            let t = i as f64 / n as f64;
            let e = geom.evaluate(Param::Curve(t), 1)?;
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt(t),
                fmt(e.point[0]),
                fmt(e.point[1]),
                fmt(e.normal[0]),
                fmt(e.normal[1])
            ));
        }
    } else {
        let grid = make_grid(geom, n, Some(2 * n))?;
        out.push_str("u,v,x,y,z,nx,ny,nz\n");
        for ((node, x), nu) in grid.nodes.iter().zip(&grid.points).zip(&grid.normals) {
            let (u, v) = match node {
                Param::Surface { u, v } => (*u, *v),
                Param::Curve(t) => (*t, 0.0),
            };
            let cols = [u, v, x[0], x[1], x[2], nu[0], nu[1], nu[2]];
            out.push_str(&cols.iter().map(|c| fmt(*c)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
    }
    Ok(out)
}
