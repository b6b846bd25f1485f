#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use vcnis::Dataset;

/// Pure-noise or linearly varying design with `W ~ U(0,1)`, `X ~ N(0,1)`.
pub fn random_dataset(n: usize, p: usize, signal: &[(usize, f64)], seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let cols: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let y = (0..n)
        .map(|i| {
            let s: f64 = signal.iter().map(|&(j, c)| c * (1.0 + w[i]) * cols[j][i]).sum();
            s + rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    Dataset::new(y, w, cols).unwrap()
}

/// Recursive Cox-de Boor evaluation of the `k`-th basis function of degree
/// `d` on `knots`, right-continuous except at the right end.
pub fn cox_de_boor(knots: &[f64], k: usize, d: usize, x: f64) -> f64 {
    let hi = *knots.last().unwrap();
    if d == 0 {
        let (a, b) = (knots[k], knots[k + 1]);
        if x >= a && x < b {
            return 1.0;
        }
        // close the last nonempty span on the right
        if x == hi && b == hi && a < b {
            return 1.0;
        }
        return 0.0;
    }
    let mut v = 0.0;
    let den1 = knots[k + d] - knots[k];
    if den1 > 0.0 {
        v += (x - knots[k]) / den1 * cox_de_boor(knots, k, d - 1, x);
    }
    let den2 = knots[k + d + 1] - knots[k + 1];
    if den2 > 0.0 {
        v += (knots[k + d + 1] - x) / den2 * cox_de_boor(knots, k + 1, d - 1, x);
    }
    v
}

/// Dense row-major matrix helpers used by the normal-equation oracle.
pub type Mat = Vec<Vec<f64>>;

pub fn gram(a: &Mat) -> Mat {
    let k = a[0].len();
    let mut g = vec![vec![0.0; k]; k];
    for row in a {
        for r in 0..k {
            for c in 0..k {
                g[r][c] += row[r] * row[c];
            }
        }
    }
    g
}

pub fn at_y(a: &Mat, y: &[f64]) -> Vec<f64> {
    let k = a[0].len();
    let mut v = vec![0.0; k];
    for (row, yi) in a.iter().zip(y) {
        for c in 0..k {
            v[c] += row[c] * yi;
        }
    }
    v
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
pub fn invert(m: &Mat) -> Mat {
    let k = m.len();
    let mut a: Mat = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..k).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        let d = a[col][col];
        assert!(d.abs() > 1e-300, "singular matrix");
        for v in a[col].iter_mut() {
            *v /= d;
        }
        for r in 0..k {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    let pivot_row = a[col].clone();
                    for (v, pv) in a[r].iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
    }
    a.into_iter().map(|r| r[k..].to_vec()).collect()
}

pub fn mat_vec(m: &Mat, v: &[f64]) -> Vec<f64> {
    m.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Least-squares coefficients `(A^T A)^{-1} A^T y`.
pub fn normal_equations(a: &Mat, y: &[f64]) -> Vec<f64> {
    mat_vec(&invert(&gram(a)), &at_y(a, y))
}

pub fn ms(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64
}

/// Spline design rows `B(w_i)` from the oracle recursion.
pub fn oracle_basis_rows(knots: &[f64], degree: usize, w: &[f64]) -> Mat {
    let l = knots.len() - degree - 1;
    w.iter()
        .map(|&x| (0..l).map(|k| cox_de_boor(knots, k, degree, x)).collect())
        .collect()
}

/// Two-sided one-sample Kolmogorov-Smirnov p-value against U(0,1)
/// (asymptotic Kolmogorov distribution with the Stephens correction).
pub fn ks_uniform_p_value(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((x - lo).abs()).max((hi - x).abs());
    }
    let t = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        p += 2.0 * (-1f64).powf(j - 1.0) * (-2.0 * j * j * t * t).exp();
    }
    p.clamp(0.0, 1.0)
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}
