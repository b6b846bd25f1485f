//! Normalized B-spline basis on a compact exposure support.
//!
//! Knots are clamped: both boundary knots are repeated `degree + 1` times and
//! the interior knots sit at equally spaced empirical quantiles of the exposure
//! sample. The resulting functions are nonnegative, bounded by one, sum to one
//! everywhere on the support, and at most `degree + 1` of them are nonzero at
//! any point.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_NUM_BASIS: usize = 7;
pub const DEFAULT_DEGREE: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBasis {
    degree: usize,
    num_basis: usize,
    knots: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl SplineBasis {
    /// Builds a basis of `num_basis` functions whose support is the range of
    /// `w`, placing interior knots at empirical quantiles of `w`.
    pub fn build(w: &[f64], num_basis: usize, degree: usize) -> Result<Self> {
        if degree < 1 || num_basis < degree + 1 {
            return Err(Error::InvalidBasisSize { num_basis, degree });
        }
        if w.len() < num_basis + 2 {
            return Err(Error::TooFewObservations {
                n: w.len(),
                num_basis,
                needed: num_basis + 2,
            });
        }
        if let Some(row) = w.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "exposure".into(),
                row,
            });
        }
        let mut sorted = w.to_vec();
        sorted.sort_by(f64::total_cmp);
        let lo = sorted[0];
        let hi = sorted[sorted.len() - 1];
        if hi <= lo {
            return Err(Error::DegenerateExposure(lo));
        }

        let num_interior = num_basis - degree - 1;
        let mut interior: Vec<f64> = (1..=num_interior)
            .map(|k| quantile_sorted(&sorted, k as f64 / (num_interior + 1) as f64))
            .collect();
        if !strictly_inside(&interior, lo, hi) {
            // heavy ties in w; quantiles collapse onto each other or a boundary
            interior = (1..=num_interior)
                .map(|k| lo + (hi - lo) * k as f64 / (num_interior + 1) as f64)
                .collect();
        }
        Self::with_interior_knots(&interior, lo, hi, degree)
    }

    /// Builds a clamped basis from explicit interior knots on `[lo, hi]`.
    pub fn with_interior_knots(interior: &[f64], lo: f64, hi: f64, degree: usize) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidBasisSize {
                num_basis: interior.len() + degree + 1,
                degree,
            });
        }
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::DegenerateExposure(lo));
        }
        if !strictly_inside(interior, lo, hi) {
            return Err(Error::InvalidConfig(
                "interior knots must be strictly increasing and inside the support".into(),
            ));
        }
        let num_basis = interior.len() + degree + 1;
        let mut knots = Vec::with_capacity(num_basis + degree + 1);
        knots.extend(std::iter::repeat_n(lo, degree + 1));
        knots.extend_from_slice(interior);
        knots.extend(std::iter::repeat_n(hi, degree + 1));
        Ok(Self {
            degree,
            num_basis,
            knots,
            lo,
            hi,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_basis(&self) -> usize {
        self.num_basis
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn interior_knots(&self) -> &[f64] {
        &self.knots[self.degree + 1..self.num_basis]
    }

    /// Evaluates all basis functions at `w`, clamping `w` into the support.
    pub fn eval(&self, w: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.num_basis];
        self.eval_into(w, &mut out);
        out
    }

    /// Like [`eval`](Self::eval) but rejects points outside the support.
    pub fn eval_strict(&self, w: f64) -> Result<Vec<f64>> {
        if !(w >= self.lo && w <= self.hi) {
            return Err(Error::OutOfSupport {
                value: w,
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(self.eval(w))
    }

    /// Writes the basis values at `w` into `out` (length `num_basis`).
    pub fn eval_into(&self, w: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.num_basis);
        out.iter_mut().for_each(|v| *v = 0.0);
        let x = w.clamp(self.lo, self.hi);
        let span = self.find_span(x);
        let vals = self.nonzero_at(span, x);
        let first = span - self.degree;
        out[first..=span].copy_from_slice(&vals);
    }

    /// The n × num_basis matrix with rows B(w_i).
    pub fn design_matrix(&self, w: &[f64]) -> DMatrix<f64> {
        let n = w.len();
        let mut m = DMatrix::zeros(n, self.num_basis);
        let mut row = vec![0.0; self.num_basis];
        for (i, &wi) in w.iter().enumerate() {
            self.eval_into(wi, &mut row);
            for (k, v) in row.iter().enumerate() {
                m[(i, k)] = *v;
            }
        }
        m
    }

    // Index s with knots[s] <= x < knots[s+1], restricted to [degree, num_basis-1].
    fn find_span(&self, x: f64) -> usize {
        let last = self.num_basis - 1;
        if x >= self.knots[last + 1] {
            return last;
        }
        let (mut low, mut high) = (self.degree, last + 1);
        while high - low > 1 {
            let mid = (low + high) / 2;
            if x < self.knots[mid] {
                high = mid;
            } else {
                low = mid;
            }
        }
        low
    }

    // de Boor's triangular scheme for the degree+1 nonzero functions on a span.
    fn nonzero_at(&self, span: usize, x: f64) -> Vec<f64> {
        let p = self.degree;
        let t = &self.knots;
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        n
    }
}

/// Row blocks `[B(w_i), x_i B(w_i)]` of a single marginal regression.
#[derive(Debug, Clone)]
pub struct MarginalDesign {
    /// n × L intercept design.
    pub intercept: DMatrix<f64>,
    /// n × 2L marginal design; the first L columns equal `intercept`.
    pub q: DMatrix<f64>,
}

pub fn marginal_design(basis: &SplineBasis, w: &[f64], x_j: &[f64]) -> Result<MarginalDesign> {
    if w.len() != x_j.len() {
        return Err(Error::LengthMismatch {
            what: "covariate",
            got: x_j.len(),
            expected: w.len(),
        });
    }
    let intercept = basis.design_matrix(w);
    let q = varying_design(&intercept, x_j);
    Ok(MarginalDesign { intercept, q })
}

/// Concatenates `bmat` with its rows scaled by `x`.
pub(crate) fn varying_design(bmat: &DMatrix<f64>, x: &[f64]) -> DMatrix<f64> {
    let (n, l) = bmat.shape();
    DMatrix::from_fn(n, 2 * l, |i, k| {
        if k < l {
            bmat[(i, k)]
        } else {
            x[i] * bmat[(i, k - l)]
        }
    })
}

/// `[B, x_{j1} B, ..., x_{jk} B]` for the covariates in `set`.
pub(crate) fn joint_design(bmat: &DMatrix<f64>, columns: &[&[f64]]) -> DMatrix<f64> {
    let (n, l) = bmat.shape();
    let mut z = DMatrix::zeros(n, l * (columns.len() + 1));
    z.columns_mut(0, l).copy_from(bmat);
    for (g, x) in columns.iter().enumerate() {
        let off = l * (g + 1);
        for k in 0..l {
            for i in 0..n {
                z[(i, off + k)] = x[i] * bmat[(i, k)];
            }
        }
    }
    z
}

fn strictly_inside(interior: &[f64], lo: f64, hi: f64) -> bool {
    let mut prev = lo;
    for &k in interior {
        if !(k > prev) {
            return false;
        }
        prev = k;
    }
    prev < hi
}

/// Linear-interpolation quantile (R type 7) of an ascending slice.
pub(crate) fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
