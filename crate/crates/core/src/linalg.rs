//! Dense eigenvalues and singular values.
//!
//! Plain matrices go through faer. Matrices carried in double-double (the
//! composed operators) get a one-sided Jacobi SVD in double-double, seeded with
//! the right singular vectors of the leading part so that it converges in a
//! few sweeps. That keeps singular values far below ε·‖A‖ accurate.

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::dd::Dd;
use crate::error::{Error, Result};

pub fn eigenvalues(m: &Mat<f64>, context: &str) -> Result<Vec<Complex64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    check_finite(m, context)?;
    m.eigenvalues().map_err(|e| Error::NumericFailure { message: format!("eigensolver: {e:?}"), context: context.to_string() })
}

pub fn singular_values(m: &Mat<f64>, context: &str) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    check_finite(m, context)?;
    let mut s = m
        .singular_values()
        .map_err(|e| Error::NumericFailure { message: format!("svd: {e:?}"), context: context.to_string() })?;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

fn check_finite(m: &Mat<f64>, context: &str) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NumericFailure {
                    message: format!("non-finite entry at ({i}, {j})"),
                    context: context.to_string(),
                });
            }
        }
    }
    Ok(())
}

/// Singular values of the double-double matrix `hi + lo`, descending.
pub fn singular_values_dd(hi: &Mat<f64>, lo: &Mat<f64>, context: &str) -> Result<Vec<f64>> {
    let n = hi.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    check_finite(hi, context)?;
    let svd = hi
        .svd()
        .map_err(|e| Error::NumericFailure { message: format!("svd: {e:?}"), context: context.to_string() })?;
    let v = svd.V();
    let ncols = hi.ncols();
    // columns of (hi + lo)·V, each stored contiguously
    let mut cols: Vec<Vec<Dd>> = (0..ncols)
        .into_par_iter()
        .map(|k| {
            (0..n)
                .map(|i| {
                    let mut acc = Dd::ZERO;
                    for j in 0..ncols {
                        let vjk = v[(j, k)];
                        acc += Dd::prod(hi[(i, j)], vjk);
                        acc += Dd::prod(lo[(i, j)], vjk);
                    }
                    acc
                })
                .collect()
        })
        .collect();
    one_sided_jacobi(&mut cols, context)?;
    let mut s: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt().to_f64()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

fn dot(a: &[Dd], b: &[Dd]) -> Dd {
    let mut acc = Dd::ZERO;
    for (x, y) in a.iter().zip(b) {
        acc += *x * *y;
    }
    acc
}

fn one_sided_jacobi(cols: &mut [Vec<Dd>], context: &str) -> Result<()> {
    let n = cols.len();
    let tol = 1e-30;
    // couplings this far below the largest column cannot move any singular
    // value that double-double resolves
    let largest = cols.iter().map(|c| dot(c, c).hi).fold(0.0, f64::max);
    let negligible = 1e-32 * largest;
    for _sweep in 0..30 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (left, right) = cols.split_at_mut(q);
                let (cp, cq) = (&mut left[p], &mut right[0]);
                let alpha = dot(cp, cp);
                let beta = dot(cq, cq);
                let gamma = dot(cp, cq);
                if gamma.hi == 0.0 {
                    continue;
                }
                let scale = (alpha * beta).sqrt();
                if gamma.abs().hi <= tol * scale.hi || gamma.abs().hi <= negligible {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma.mul_f64(2.0));
                let root = (Dd::ONE + zeta * zeta).sqrt();
                let t = if zeta.hi >= 0.0 { Dd::ONE / (zeta + root) } else { -(Dd::ONE / (root - zeta)) };
                let c = Dd::ONE / (Dd::ONE + t * t).sqrt();
                let s = c * t;
                for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
                    let (a, b) = (*x, *y);
                    *x = c * a - s * b;
                    *y = s * a + c * b;
                }
            }
        }
        if !rotated {
            return Ok(());
        }
    }
    Err(Error::NumericFailure { message: "double-double Jacobi SVD did not converge".into(), context: context.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn dd_path_matches_faer_on_random_matrices() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let a = Mat::from_fn(30, 30, |_, _| rng.random::<f64>() - 0.5);
        let zero = Mat::<f64>::zeros(30, 30);
        let s1 = singular_values(&a, "t").unwrap();
        let s2 = singular_values_dd(&a, &zero, "t").unwrap();
        for (x, y) in s1.iter().zip(&s2) {
            assert!((x - y).abs() < 1e-13 * s1[0]);
        }
    }

    #[test]
    fn graded_diagonal_is_exact() {
        let n = 12;
        // permuted diagonal with singular values 10^{-2k}
        let mut hi = Mat::<f64>::zeros(n, n);
        for k in 0..n {
            hi[((k * 5) % n, (k * 7) % n)] = 10f64.powi(-2 * k as i32);
        }
        let s = singular_values_dd(&hi, &Mat::zeros(n, n), "t").unwrap();
        for (k, v) in s.iter().enumerate() {
            let e = 10f64.powi(-2 * k as i32);
            assert!((v - e).abs() <= 1e-14 * e, "{k}: {v}");
        }
    }

    #[test]
    fn squared_product_keeps_small_singular_values() {
        // BᵀB formed in double-double has singular values s(B)² even far below ε·‖B‖².
        let n = 24;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let grade: Vec<f64> = (0..n).map(|k| 0.6f64.powi(k as i32)).collect();
        let b = Mat::from_fn(n, n, |i, j| (rng.random::<f64>() - 0.5) * grade[j] * grade[i].sqrt());
        let sb = singular_values(&b, "t").unwrap();
        let mut hi = Mat::<f64>::zeros(n, n);
        let mut lo = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = Dd::ZERO;
                for k in 0..n {
                    acc += Dd::prod(b[(k, i)], b[(k, j)]);
                }
                hi[(i, j)] = acc.hi;
                lo[(i, j)] = acc.lo;
            }
        }
        let s2 = singular_values_dd(&hi, &lo, "t").unwrap();
        for k in 0..n {
            let e = sb[k] * sb[k];
            assert!((s2[k] - e).abs() <= 1e-9 * e, "{k}: {} vs {e}", s2[k]);
        }
    }
}
