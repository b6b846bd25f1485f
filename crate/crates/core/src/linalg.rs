//! Small dense least-squares helpers on top of nalgebra.

use nalgebra::DMatrix;

/// Designs whose estimated condition number exceeds this are solved with a
/// ridge-stabilized normal-equation system instead of plain QR.
pub const CONDITION_CAP: f64 = 1e10;

/// Ridge jitter as a fraction of the mean diagonal of the Gram matrix.
pub const RIDGE_SCALE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct LsFit {
    /// k × m coefficients, one column per response.
    pub coef: DMatrix<f64>,
    /// n × m fitted values.
    pub fitted: DMatrix<f64>,
    /// True when the ridge fallback was used.
    pub ridged: bool,
}

/// Least squares of each column of `rhs` on `design`.
///
/// Uses Householder QR when the design has full column rank (condition number
/// estimated from the diagonal of R). Otherwise, if `allow_ridge`, solves
/// `(X'X + delta I) b = X'y` with `delta = 1e-8 * trace(X'X) / k`; returns
/// `None` when the design is rank-deficient and the fallback is disabled.
pub fn least_squares(design: &DMatrix<f64>, rhs: &DMatrix<f64>, allow_ridge: bool) -> Option<LsFit> {
    let (n, k) = design.shape();
    debug_assert_eq!(rhs.nrows(), n);
    if n >= k && k > 0 {
        let qr = design.clone().qr();
        let r = qr.r();
        let (mut dmax, mut dmin) = (0.0f64, f64::INFINITY);
        for i in 0..k {
            let d = r[(i, i)].abs();
            dmax = dmax.max(d);
            dmin = dmin.min(d);
        }
        if dmin > 0.0 && dmax / dmin <= CONDITION_CAP {
            let mut qtb = rhs.clone();
            qr.q_tr_mul(&mut qtb);
            let top = qtb.rows(0, k).into_owned();
            if let Some(coef) = r.solve_upper_triangular(&top) {
                let fitted = design * &coef;
                return Some(LsFit {
                    coef,
                    fitted,
                    ridged: false,
                });
            }
        }
    }
    if !allow_ridge {
        return None;
    }
    let coef = ridge_solve(design, rhs)?;
    let fitted = design * &coef;
    Some(LsFit {
        coef,
        fitted,
        ridged: true,
    })
}

fn ridge_solve(design: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let k = design.ncols();
    let mut gram = design.tr_mul(design);
    let trace = gram.trace();
    let delta = if trace > 0.0 {
        RIDGE_SCALE * trace / k as f64
    } else {
        1.0
    };
    for i in 0..k {
        gram[(i, i)] += delta;
    }
    let xty = design.tr_mul(rhs);
    solve_spd(gram, &xty)
}

/// Solves `a x = b` for symmetric positive (semi)definite `a` by Cholesky,
/// retrying with growing diagonal jitter if the factorization fails.
pub fn solve_spd(a: DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(b));
    }
    let k = a.nrows();
    let scale = (a.trace() / k.max(1) as f64).abs().max(f64::MIN_POSITIVE);
    let mut jitter = RIDGE_SCALE * scale;
    for _ in 0..8 {
        let mut aj = a.clone();
        for i in 0..k {
            aj[(i, i)] += jitter;
        }
        if let Some(ch) = aj.cholesky() {
            return Some(ch.solve(b));
        }
        jitter *= 100.0;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_on_full_rank_design() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DMatrix::from_column_slice(4, 1, &[1.0, 3.0, 5.0, 7.0]);
        let fit = least_squares(&x, &y, false).unwrap();
        assert!(!fit.ridged);
        assert!((fit.coef[0] - 1.0).abs() < 1e-12);
        assert!((fit.coef[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_uses_ridge_or_refuses() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0]);
        let y = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        assert!(least_squares(&x, &y, false).is_none());
        let fit = least_squares(&x, &y, true).unwrap();
        assert!(fit.ridged);
        assert!(fit.coef[1].abs() < 1e-12);
        assert!((fit.fitted[2] - 3.0).abs() < 1e-6);
    }
}
