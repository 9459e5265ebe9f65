#![allow(dead_code)]

use proptest::prelude::*;
use qpiston_core::dynamics::hermitian_expm;
use qpiston_core::{c64, DensityOperator, HermitianOperator, UnitaryOperator};

use faer::Mat;

pub fn hermitian_from(n: usize, re: &[f64], im: &[f64]) -> HermitianOperator {
    let m = Mat::from_fn(n, n, |i, j| {
        let (a, b) = (i.min(j), i.max(j));
        let k = a * n + b;
        if i == j {
            c64::new(re[k], 0.0)
        } else if i < j {
            c64::new(re[k], im[k])
        } else {
            c64::new(re[k], -im[k])
        }
    });
    HermitianOperator::try_new(m).unwrap()
}

/// A·A†/tr(A·A†), a full-rank density operator for generic A.
pub fn density_from(n: usize, re: &[f64], im: &[f64]) -> DensityOperator {
    let a = Mat::from_fn(n, n, |i, j| c64::new(re[i * n + j], im[i * n + j]));
    let mut m = &a * a.adjoint();
    let tr: f64 = (0..n).map(|i| m[(i, i)].re).sum();
    for j in 0..n {
        for i in 0..n {
            m[(i, j)] /= tr;
        }
    }
    let m = Mat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    DensityOperator::try_new(m).unwrap()
}

pub fn unitary_from(n: usize, re: &[f64], im: &[f64]) -> UnitaryOperator {
    hermitian_expm(&hermitian_from(n, re, im), 0.37).unwrap()
}

pub fn entries(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(-1.0f64..1.0, n * n),
        prop::collection::vec(-1.0f64..1.0, n * n),
    )
}

pub fn max_diff(a: faer::MatRef<'_, c64>, b: faer::MatRef<'_, c64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}

/// Eigenvalues of a Hermitian matrix by Jacobi rotations on its real
/// 2n×2n embedding; each eigenvalue appears twice and is returned once.
pub fn jacobi_eigenvalues(m: faer::MatRef<'_, c64>) -> Vec<f64> {
    let n = m.nrows();
    let d = 2 * n;
    let mut a = vec![vec![0.0f64; d]; d];
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            a[i][j] = z.re;
            a[i + n][j + n] = z.re;
            a[i][j + n] = -z.im;
            a[i + n][j] = z.im;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..d).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev.into_iter().step_by(2).collect()
}
