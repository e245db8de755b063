//! Quadrature grids and dense Nyström matrices.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::error::{invalid, Error, Result};
use crate::geometry::{BoundaryGeometry, Param, RegularityClass};
use crate::kernel::{diagonal_limit, kstar_raw, KernelIdentity, KernelKind};
use crate::quadrature::gauss_legendre;

#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    pub d: u32,
    pub n_theta: usize,
    pub n_phi: Option<usize>,
    pub nodes: Vec<Param>,
    /// Parameter-domain weights.
    pub weights: Vec<f64>,
    /// Surface measure dσ at each node.
    pub measures: Vec<f64>,
    pub points: Vec<[f64; 3]>,
    pub normals: Vec<[f64; 3]>,
    pub warnings: Vec<String>,
    pub description: String,
    /// Declared regularity of the source geometry.
    pub regularity: RegularityClass,
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_measure(&self) -> f64 {
        self.measures.iter().sum()
    }

    /// Curve parameter of node `i` (0 for surfaces).
    pub fn t(&self, i: usize) -> f64 {
        match self.nodes[i] {
            Param::Curve(t) => t,
            Param::Surface { .. } => 0.0,
        }
    }

    /// "N" for curves, "n_theta x n_phi" for surfaces.
    pub fn size_label(&self) -> String {
        match self.n_phi {
            Some(p) => format!("{}x{}", self.n_theta, p),
            None => self.n_theta.to_string(),
        }
    }
}

pub fn make_grid(geom: &BoundaryGeometry, n_theta: usize, n_phi: Option<usize>) -> Result<QuadratureGrid> {
    let mut warnings = geom.warnings.clone();
    let (nodes, weights): (Vec<Param>, Vec<f64>) = match (geom.dim_d, n_phi) {
        (1, None) => {
            if n_theta < 8 {
                return Err(invalid(format!("curve grids need at least 8 nodes, got {n_theta}")));
            }
            if geom.finest_oscillation() > n_theta as f64 / 8.0 {
                warnings.push(format!(
                    "finest oscillation {} exceeds N/8 = {}",
                    geom.finest_oscillation(),
                    n_theta / 8
                ));
            }
            let h = 1.0 / n_theta as f64;
            ((0..n_theta).map(|i| Param::Curve(i as f64 * h)).collect(), vec![h; n_theta])
        }
        (2, Some(np)) => {
            if n_theta < 4 || np < 8 {
                return Err(invalid(format!("surface grids need n_theta >= 4 and n_phi >= 8, got {n_theta}x{np}")));
            }
            if geom.finest_oscillation() > n_theta as f64 / 4.0 {
                warnings.push(format!(
                    "finest harmonic degree {} exceeds n_theta/4 = {}",
                    geom.finest_oscillation(),
                    n_theta / 4
                ));
            }
            let (x, w) = gauss_legendre(n_theta);
            let mut nodes = Vec::with_capacity(n_theta * np);
            let mut weights = Vec::with_capacity(n_theta * np);
            // x descending = θ ascending, north pole first
            for i in (0..n_theta).rev() {
                let theta = x[i].acos();
                let sin = (1.0 - x[i] * x[i]).sqrt();
                let wv = w[i] / (PI * sin);
                for j in 0..np {
                    nodes.push(Param::Surface { u: j as f64 / np as f64, v: theta / PI });
                    weights.push(wv / np as f64);
                }
            }
            (nodes, weights)
        }
        (1, Some(_)) => return Err(invalid("curve grids take no azimuthal size")),
        (_, None) => return Err(invalid("surface grids need an azimuthal size n_phi")),
        _ => return Err(invalid(format!("unsupported dimension {}", geom.dim_d))),
    };
    let evals: Vec<_> = nodes.par_iter().map(|&p| geom.evaluate(p, 0)).collect::<Result<Vec<_>>>()?;
    let measures: Vec<f64> = evals.iter().zip(&weights).map(|(e, w)| e.jacobian * w).collect();
    if measures.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::NumericFailure { message: "non-positive surface measure".into(), context: geom.description.clone() });
    }
    Ok(QuadratureGrid {
        d: geom.dim_d,
        n_theta,
        n_phi,
        nodes,
        weights,
        measures,
        points: evals.iter().map(|e| e.point).collect(),
        normals: evals.iter().map(|e| e.normal).collect(),
        warnings,
        description: geom.description.clone(),
        regularity: geom.regularity,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalRule {
    RowSum,
    DiagonalLimit,
}

#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub entries: Mat<f64>,
    /// Low-order parts when the entries were accumulated in double-double.
    pub entries_lo: Option<Mat<f64>>,
    pub grid: Arc<QuadratureGrid>,
    pub identity: KernelIdentity,
    pub diagonal_rule: DiagonalRule,
    pub description: String,
}

impl OperatorMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn measures(&self) -> &[f64] {
        &self.grid.measures
    }

    /// D^{1/2}·A·D^{-1/2}, the matrix of the operator in the discrete L² geometry.
    pub fn weighted(&self) -> Mat<f64> {
        let s: Vec<f64> = self.grid.measures.iter().map(|m| m.sqrt()).collect();
        Mat::from_fn(self.n(), self.n(), |i, j| s[i] * self.entries[(i, j)] / s[j])
    }

    /// D^{-1}·Aᵀ·D: K from K* and vice versa.
    pub fn discrete_adjoint(&self) -> OperatorMatrix {
        let w = &self.grid.measures;
        let entries = Mat::from_fn(self.n(), self.n(), |i, j| self.entries[(j, i)] * w[j] / w[i]);
        let which = match self.identity.which {
            KernelKind::NpStar => KernelKind::Np,
            KernelKind::Np => KernelKind::NpStar,
            k => k,
        };
        OperatorMatrix {
            entries,
            entries_lo: None,
            grid: self.grid.clone(),
            identity: KernelIdentity { which, d: self.identity.d },
            diagonal_rule: self.diagonal_rule,
            description: format!("adjoint of {}", self.description),
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n()).map(|i| (0..self.n()).map(|j| self.entries[(i, j)]).sum()).collect()
    }

    pub fn label(&self) -> String {
        let op = match self.identity.which {
            KernelKind::NpStar => "K*".to_string(),
            KernelKind::Np => "K".to_string(),
            KernelKind::Composed(n) => format!("L_{n}"),
        };
        let rule = match self.diagonal_rule {
            DiagonalRule::RowSum => "row_sum",
            DiagonalRule::DiagonalLimit => "diagonal_limit",
        };
        format!("{op} N={} rule={rule} on {}", self.n(), self.description)
    }
}

/// Dense Nyström matrix of K* or K.
///
/// Off the diagonal, entry (i, j) is kernel(x_i, x_j)·dσ_j. Under `RowSum` the
/// shared diagonal makes every row of the K matrix sum to 1/2, so the K* matrix
/// is D⁻¹·Kᵀ·D.
pub fn assemble(
    geom: &BoundaryGeometry,
    grid: &QuadratureGrid,
    identity: KernelIdentity,
    rule: DiagonalRule,
) -> Result<OperatorMatrix> {
    if identity.d != grid.d || grid.d != geom.dim_d {
        return Err(invalid("kernel, grid and geometry dimensions disagree"));
    }
    if matches!(identity.which, KernelKind::Composed(_)) {
        return Err(invalid("use assemble_composed for L_n"));
    }
    if rule == DiagonalRule::DiagonalLimit && (grid.d != 1 || geom.derivative_order < 2) {
        return Err(invalid("the diagonal-limit rule needs a curve with two derivatives"));
    }
    let n = grid.len();
    let d = grid.d;
    let (x, nu, w) = (&grid.points, &grid.normals, &grid.measures);

    // raw[i*n + j] = K*(x_i, x_j)
    let mut raw = vec![0.0f64; n * n];
    raw.par_chunks_mut(n).enumerate().try_for_each(|(i, row)| {
        for j in 0..n {
            if i == j {
                continue;
            }
            if x[i] == x[j] {
                return Err(invalid(format!("grid nodes {i} and {j} coincide")));
            }
            row[j] = kstar_raw(&x[i], &nu[i], &x[j], d);
        }
        Ok(())
    })?;

    let diag: Vec<f64> = match rule {
        DiagonalRule::RowSum => (0..n)
            .into_par_iter()
            .map(|i| {
                let mut s = 0.0;
                for j in 0..n {
                    if j != i {
                        s += raw[j * n + i] * w[j];
                    }
                }
                0.5 - s
            })
            .collect(),
        DiagonalRule::DiagonalLimit => (0..n)
            .into_par_iter()
            .map(|i| diagonal_limit(geom, grid.t(i)).map(|v| v * w[i]))
            .collect::<Result<_>>()?,
    };

    let entries = match identity.which {
        KernelKind::NpStar => Mat::from_fn(n, n, |i, j| if i == j { diag[i] } else { raw[i * n + j] * w[j] }),
        _ => Mat::from_fn(n, n, |i, j| if i == j { diag[i] } else { raw[j * n + i] * w[j] }),
    };
    Ok(OperatorMatrix {
        entries,
        entries_lo: None,
        grid: Arc::new(grid.clone()),
        identity,
        diagonal_rule: rule,
        description: geom.description.clone(),
    })
}

/// Row-major double-double matrix.
#[derive(Clone)]
struct DdMat {
    n: usize,
    data: Vec<Dd>,
}

impl DdMat {
    fn matmul(&self, other: &DdMat) -> DdMat {
        let n = self.n;
        let mut data = vec![Dd::ZERO; n * n];
        data.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
            for j in 0..n {
                let a = self.data[i * n + j];
                if a.hi == 0.0 {
                    continue;
                }
                let brow = &other.data[j * n..(j + 1) * n];
                for (o, b) in out.iter_mut().zip(brow) {
                    *o += a * *b;
                }
            }
        });
        DdMat { n, data }
    }
}

/// Discrete L_n: K*(K K*)^{(n−1)/2} for odd n, (K K*)^{n/2} for even n,
/// with K = D⁻¹·K*ᵀ·D. Products are accumulated in double-double; the
/// rounded result is in `entries` and the residual in `entries_lo`.
pub fn assemble_composed(a_star: &OperatorMatrix, n: u32) -> Result<OperatorMatrix> {
    if a_star.identity.which != KernelKind::NpStar {
        return Err(invalid("assemble_composed needs a K* matrix"));
    }
    let identity = KernelIdentity::composed(n, a_star.identity.d)?;
    if n == 1 {
        return Ok(a_star.clone());
    }
    let size = a_star.n();
    let w = &a_star.grid.measures;
    let a = DdMat {
        n: size,
        data: (0..size * size).map(|k| Dd::from_f64(a_star.entries[(k / size, k % size)])).collect(),
    };
    let k = DdMat {
        n: size,
        data: (0..size * size)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / size, idx % size);
                Dd::prod(a_star.entries[(j, i)], w[j]) / Dd::from_f64(w[i])
            })
            .collect(),
    };
    let pair = k.matmul(&a);
    let mut result = if n % 2 == 0 { pair.clone() } else { a };
    let reps = if n % 2 == 0 { n / 2 - 1 } else { (n - 1) / 2 };
    for _ in 0..reps {
        result = result.matmul(&pair);
    }
    let entries = Mat::from_fn(size, size, |i, j| result.data[i * size + j].hi);
    let lo = Mat::from_fn(size, size, |i, j| result.data[i * size + j].lo);
    Ok(OperatorMatrix {
        entries,
        entries_lo: Some(lo),
        grid: a_star.grid.clone(),
        identity,
        diagonal_rule: a_star.diagonal_rule,
        description: a_star.description.clone(),
    })
}

const DUMP_MAGIC: &[u8; 4] = b"NPMX";

/// Flag bits of the dump header.
pub fn dump_flags(m: &OperatorMatrix) -> u32 {
    let kind = match m.identity.which {
        KernelKind::NpStar => 0,
        KernelKind::Np => 1,
        KernelKind::Composed(_) => 2,
    };
    let rule = match m.diagonal_rule {
        DiagonalRule::RowSum => 0,
        DiagonalRule::DiagonalLimit => 1,
    };
    kind | (rule << 2) | ((m.identity.d & 0x3) << 4) | ((m.identity.order() & 0xff) << 8)
}

/// Writes "NPMX", N, flags and a reserved word (16 bytes), then the entries
/// as little-endian f64 in row-major order.
pub fn write_dump(m: &OperatorMatrix, path: &Path) -> Result<()> {
    let n = m.n();
    let mut buf = Vec::with_capacity(16 + 8 * n * n);
    buf.extend_from_slice(DUMP_MAGIC);
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&dump_flags(m).to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    for i in 0..n {
        for j in 0..n {
            buf.extend_from_slice(&m.entries[(i, j)].to_le_bytes());
        }
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

/// Reads a dump back as (flags, matrix).
pub fn read_dump(path: &Path) -> Result<(u32, Mat<f64>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..4] != DUMP_MAGIC {
        return Err(Error::Format("missing NPMX header".into()));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().unwrap());
    let n = word(4) as usize;
    let flags = word(8);
    if bytes.len() != 16 + 8 * n * n {
        return Err(Error::Format(format!("expected {} bytes for N={n}, found {}", 16 + 8 * n * n, bytes.len())));
    }
    let at = |i: usize, j: usize| {
        let k = 16 + 8 * (i * n + j);
        f64::from_le_bytes(bytes[k..k + 8].try_into().unwrap())
    };
    Ok((flags, Mat::from_fn(n, n, at)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_circle, make_ellipse, make_perturbed_sphere};

    #[test]
    fn circle_grid_measures() {
        let g = make_circle(1.0).unwrap();
        let grid = make_grid(&g, 16, None).unwrap();
        for m in &grid.measures {
            assert!((m - 2.0 * PI / 16.0).abs() < 1e-15);
        }
        assert!((grid.total_measure() - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn grid_arguments() {
        let g = make_circle(1.0).unwrap();
        assert!(make_grid(&g, 7, None).is_err());
        assert!(make_grid(&g, 16, Some(8)).is_err());
        let s = make_perturbed_sphere(&[]).unwrap();
        assert!(make_grid(&s, 16, None).is_err());
        assert!(make_grid(&s, 2, Some(8)).is_err());
    }

    #[test]
    fn sphere_area() {
        let s = make_perturbed_sphere(&[]).unwrap();
        let grid = make_grid(&s, 32, Some(64)).unwrap();
        assert!((grid.total_measure() - 4.0 * PI).abs() < 1e-8);
        assert!(grid.weights.iter().all(|w| *w > 0.0));
        assert!(grid.nodes.iter().all(|p| matches!(p, Param::Surface { v, .. } if *v > 0.0 && *v < 1.0)));
    }

    #[test]
    fn circle_matrix_is_constant() {
        let g = make_circle(1.0).unwrap();
        let grid = make_grid(&g, 8, None).unwrap();
        for rule in [DiagonalRule::RowSum, DiagonalRule::DiagonalLimit] {
            for id in [KernelIdentity::np_star(1), KernelIdentity::np(1)] {
                let a = assemble(&g, &grid, id, rule).unwrap();
                for i in 0..8 {
                    for j in 0..8 {
                        assert!((a.entries[(i, j)] - 1.0 / 16.0).abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn off_diagonal_entries_follow_the_kernel() {
        let g = make_ellipse(2.0, 1.0).unwrap();
        let grid = make_grid(&g, 32, None).unwrap();
        let a = assemble(&g, &grid, KernelIdentity::np_star(1), DiagonalRule::RowSum).unwrap();
        let k = assemble(&g, &grid, KernelIdentity::np(1), DiagonalRule::RowSum).unwrap();
        for i in 0..32 {
            for j in 0..32 {
                if i == j {
                    assert_eq!(a.entries[(i, i)], k.entries[(i, i)]);
                    continue;
                }
                let (x, y) = (&grid.points[i], &grid.points[j]);
                let ks = crate::kernel::np_kernel_star(&x[..2], &grid.normals[i][..2], &y[..2], 1).unwrap();
                let kk = crate::kernel::np_kernel(&x[..2], &y[..2], &grid.normals[j][..2], 1).unwrap();
                assert!((a.entries[(i, j)] - ks * grid.measures[j]).abs() < 1e-16);
                assert!((k.entries[(i, j)] - kk * grid.measures[j]).abs() < 1e-16);
            }
        }
        let sums = k.row_sums();
        assert!(sums.iter().all(|s| (s - 0.5).abs() <= 2.0 * f64::EPSILON));
    }

    #[test]
    fn composed_even_is_the_product() {
        let g = make_ellipse(2.0, 1.0).unwrap();
        let grid = make_grid(&g, 64, None).unwrap();
        let a = assemble(&g, &grid, KernelIdentity::np_star(1), DiagonalRule::RowSum).unwrap();
        let k = a.discrete_adjoint();
        let prod = &k.entries * &a.entries;
        let l2 = assemble_composed(&a, 2).unwrap();
        assert_eq!(l2.identity.which, KernelKind::Composed(2));
        for i in 0..64 {
            for j in 0..64 {
                assert!((l2.entries[(i, j)] - prod[(i, j)]).abs() < 1e-15);
            }
        }
        let l3 = assemble_composed(&a, 3).unwrap();
        let prod3 = &a.entries * &prod;
        for i in 0..64 {
            for j in 0..64 {
                assert!((l3.entries[(i, j)] - prod3[(i, j)]).abs() < 1e-15);
            }
        }
        let l1 = assemble_composed(&a, 1).unwrap();
        assert_eq!(l1.entries, a.entries);
        assert!(assemble_composed(&a, 0).is_err());
        assert!(assemble_composed(&k, 2).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let g = make_ellipse(2.0, 1.0).unwrap();
        let grid = make_grid(&g, 16, None).unwrap();
        let a = assemble(&g, &grid, KernelIdentity::np(1), DiagonalRule::DiagonalLimit).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.npmx");
        write_dump(&a, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"NPMX");
        assert_eq!(bytes.len(), 16 + 8 * 256);
        assert_eq!(f64::from_le_bytes(bytes[16..24].try_into().unwrap()), a.entries[(0, 0)]);
        assert_eq!(f64::from_le_bytes(bytes[24..32].try_into().unwrap()), a.entries[(0, 1)]);
        let (flags, m) = read_dump(&p).unwrap();
        assert_eq!(flags, dump_flags(&a));
        assert_eq!(m, a.entries);
        std::fs::write(&p, b"NPMXjunk").unwrap();
        assert!(matches!(read_dump(&p), Err(Error::Format(_))));
    }
}
