//! Marginal varying-coefficient regressions and utility-based screening.
//!
//! For each covariate `X_j` the response is regressed on `[B(W), X_j B(W)]`
//! and the marginal utility is the gain in mean squared fitted value over the
//! intercept-only fit on `B(W)`:
//!
//! ```text
//! u_j = ||a_j(W) + b_j(W) X_j||_n^2 - ||a_0(W)||_n^2
//! v_j = ||Y - a_j(W) - b_j(W) X_j||_n^2
//! ```
//!
//! with `||v||_n^2 = (1/n) sum v_i^2`. Since `v_j = ||Y||_n^2 - ||a_0||_n^2 - u_j`,
//! ranking by decreasing `u_j` and by increasing `v_j` agree.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{mean_square, Dataset};
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::spline_basis::{varying_design, SplineBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenOptions {
    /// Ridge-stabilize rank-deficient designs instead of failing them.
    pub ridge_fallback: bool,
}

impl Default for ScreenOptions {
    fn default() -> Self {
        Self {
            ridge_fallback: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterceptFit {
    pub eta0: Vec<f64>,
    pub fitted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalFit {
    pub j: usize,
    pub eta_hat: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub u_hat: f64,
    pub v_hat: f64,
    /// The design needed the ridge fallback.
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScreenMethod {
    Scores,
    FixedThreshold,
    TopK,
    Permutation,
    ConditionalPermutation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreenReport {
    /// `u_j` for every covariate; `-inf` for covariates whose fit failed.
    pub scores: Vec<f64>,
    /// `v_j` for every covariate; `+inf` for covariates whose fit failed.
    pub rss: Vec<f64>,
    /// Covariate indices by decreasing score, ties by ascending index.
    pub ranking: Vec<usize>,
    pub threshold: Option<f64>,
    pub selected: Vec<usize>,
    pub method: ScreenMethod,
    pub seed: Option<u64>,
    /// Covariates whose design was rank-deficient.
    pub flagged: Vec<usize>,
}

impl ScreenReport {
    /// A report over precomputed scores, ranked but with nothing selected.
    pub fn from_scores(scores: Vec<f64>, rss: Vec<f64>, flagged: Vec<usize>) -> Self {
        let ranking = rank_descending(&scores);
        Self {
            scores,
            rss,
            ranking,
            threshold: None,
            selected: Vec::new(),
            method: ScreenMethod::Scores,
            seed: None,
            flagged,
        }
    }

    pub fn p(&self) -> usize {
        self.scores.len()
    }

    /// Records a threshold-based selection on the report.
    pub fn apply_threshold(&mut self, tau: f64, method: ScreenMethod, seed: Option<u64>) {
        self.selected = select_by_threshold(self, tau);
        self.threshold = Some(tau);
        self.method = method;
        self.seed = seed;
    }

    /// Records a top-`k` selection on the report.
    pub fn apply_top_k(&mut self, k: usize) {
        let mut sel = self.ranking[..k.min(self.p())].to_vec();
        sel.sort_unstable();
        self.selected = sel;
        self.threshold = None;
        self.method = ScreenMethod::TopK;
    }
}

/// Indices sorted by decreasing value, ties broken by ascending index.
pub fn rank_descending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| match values[b].total_cmp(&values[a]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    idx
}

/// Indices sorted by increasing value, ties broken by ascending index.
pub fn rank_ascending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| match values[a].total_cmp(&values[b]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    idx
}

/// Marginal fits of arbitrary responses against the covariates of one dataset.
///
/// Holds the intercept design `B_n` so it is evaluated once per dataset.
#[derive(Debug, Clone)]
pub struct Screener<'a> {
    dataset: &'a Dataset,
    basis: &'a SplineBasis,
    bmat: DMatrix<f64>,
    options: ScreenOptions,
}

/// Scores of several responses on a common candidate list.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    /// `u[r][c]`: utility of candidate `c` for response `r`.
    pub u: Vec<Vec<f64>>,
    /// `v[r][c]`: residual mean square of candidate `c` for response `r`.
    pub v: Vec<Vec<f64>>,
    /// Candidates (by covariate index) that needed ridge or failed.
    pub flagged: Vec<usize>,
}

impl<'a> Screener<'a> {
    pub fn new(dataset: &'a Dataset, basis: &'a SplineBasis, options: ScreenOptions) -> Self {
        let bmat = basis.design_matrix(dataset.w());
        Self {
            dataset,
            basis,
            bmat,
            options,
        }
    }

    pub fn dataset(&self) -> &Dataset {
        self.dataset
    }

    pub fn basis(&self) -> &SplineBasis {
        self.basis
    }

    pub fn intercept_design(&self) -> &DMatrix<f64> {
        &self.bmat
    }

    pub fn intercept(&self, response: &[f64]) -> Result<InterceptFit> {
        let n = self.dataset.n();
        if response.len() != n {
            return Err(Error::LengthMismatch {
                what: "response",
                got: response.len(),
                expected: n,
            });
        }
        let rhs = DMatrix::from_column_slice(n, 1, response);
        let fit = least_squares(&self.bmat, &rhs, self.options.ridge_fallback)
            .ok_or(Error::SingularDesign(usize::MAX))?;
        Ok(InterceptFit {
            eta0: fit.coef.column(0).iter().copied().collect(),
            fitted: fit.fitted.column(0).iter().copied().collect(),
        })
    }

    pub fn fit(&self, j: usize, response: &[f64]) -> Result<MarginalFit> {
        if j >= self.dataset.p() {
            return Err(Error::UnknownIndex(j));
        }
        let a0 = self.intercept(response)?;
        let l = self.basis.num_basis();
        let n = self.dataset.n();
        let q = varying_design(&self.bmat, self.dataset.column(j));
        let rhs = DMatrix::from_column_slice(n, 1, response);
        let fit = least_squares(&q, &rhs, self.options.ridge_fallback).ok_or(Error::SingularDesign(j))?;
        let fitted: Vec<f64> = fit.fitted.column(0).iter().copied().collect();
        let resid: Vec<f64> = response.iter().zip(&fitted).map(|(y, f)| y - f).collect();
        Ok(MarginalFit {
            j,
            eta_hat: fit.coef.rows(0, l).iter().copied().collect(),
            theta_hat: fit.coef.rows(l, l).iter().copied().collect(),
            u_hat: mean_square(&fitted) - mean_square(&a0.fitted),
            v_hat: mean_square(&resid),
            flagged: fit.ridged,
        })
    }

    /// Marginal utilities of every candidate for every response. Each
    /// candidate is factored once and solved against all responses.
    pub fn scores(&self, candidates: &[usize], responses: &[&[f64]]) -> Result<ScoreTable> {
        let n = self.dataset.n();
        if let Some(&j) = candidates.iter().find(|&&j| j >= self.dataset.p()) {
            return Err(Error::UnknownIndex(j));
        }
        let m = responses.len();
        let mut rhs = DMatrix::zeros(n, m);
        let mut base = Vec::with_capacity(m);
        for (r, resp) in responses.iter().enumerate() {
            let a0 = self.intercept(resp)?;
            base.push(mean_square(&a0.fitted));
            rhs.set_column(r, &nalgebra::DVector::from_column_slice(resp));
        }

        let per: Vec<(Vec<f64>, Vec<f64>, bool)> = candidates
            .par_iter()
            .map(|&j| {
                let q = varying_design(&self.bmat, self.dataset.column(j));
                match least_squares(&q, &rhs, self.options.ridge_fallback) {
                    Some(fit) => {
                        let mut u = Vec::with_capacity(m);
                        let mut v = Vec::with_capacity(m);
                        for r in 0..m {
                            let f = fit.fitted.column(r);
                            let fm = f.iter().map(|x| x * x).sum::<f64>() / n as f64;
                            let rm = responses[r]
                                .iter()
                                .zip(f.iter())
                                .map(|(y, fi)| (y - fi).powi(2))
                                .sum::<f64>()
                                / n as f64;
                            u.push(fm - base[r]);
                            v.push(rm);
                        }
                        (u, v, fit.ridged)
                    }
                    None => (vec![f64::NEG_INFINITY; m], vec![f64::INFINITY; m], true),
                }
            })
            .collect();

        let mut table = ScoreTable {
            u: vec![Vec::with_capacity(candidates.len()); m],
            v: vec![Vec::with_capacity(candidates.len()); m],
            flagged: Vec::new(),
        };
        for (&j, (u, v, flag)) in candidates.iter().zip(per) {
            for r in 0..m {
                table.u[r].push(u[r]);
                table.v[r].push(v[r]);
            }
            if flag {
                table.flagged.push(j);
            }
        }
        Ok(table)
    }
}

pub fn fit_intercept_only(dataset: &Dataset, basis: &SplineBasis) -> Result<InterceptFit> {
    Screener::new(dataset, basis, ScreenOptions::default()).intercept(dataset.y())
}

pub fn fit_marginal(dataset: &Dataset, basis: &SplineBasis, j: usize) -> Result<MarginalFit> {
    Screener::new(dataset, basis, ScreenOptions::default()).fit(j, dataset.y())
}

pub fn screen_all(dataset: &Dataset, basis: &SplineBasis) -> Result<ScreenReport> {
    screen_all_with(dataset, basis, ScreenOptions::default())
}

pub fn screen_all_with(dataset: &Dataset, basis: &SplineBasis, options: ScreenOptions) -> Result<ScreenReport> {
    let screener = Screener::new(dataset, basis, options);
    screen_response(&screener, dataset.y())
}

/// Screens all covariates against an arbitrary response.
pub fn screen_response(screener: &Screener<'_>, response: &[f64]) -> Result<ScreenReport> {
    let all: Vec<usize> = (0..screener.dataset().p()).collect();
    let mut t = screener.scores(&all, &[response])?;
    Ok(ScreenReport::from_scores(
        t.u.swap_remove(0),
        t.v.swap_remove(0),
        t.flagged,
    ))
}

/// `{ j : u_j >= tau }` in ascending index order.
pub fn select_by_threshold(report: &ScreenReport, tau: f64) -> Vec<usize> {
    report
        .scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= tau)
        .map(|(j, _)| j)
        .collect()
}

/// Smallest `r` such that the top-`r` ranked covariates contain `true_set`.
pub fn minimum_model_size(ranking: &[usize], true_set: &[usize]) -> Result<usize> {
    if true_set.is_empty() {
        return Err(Error::InvalidConfig("true set must be nonempty".into()));
    }
    let p = ranking.len();
    let mut position = vec![usize::MAX; p];
    for (r, &j) in ranking.iter().enumerate() {
        position[j] = r;
    }
    let mut worst = 0;
    for &j in true_set {
        if j >= p {
            return Err(Error::UnknownIndex(j));
        }
        worst = worst.max(position[j] + 1);
    }
    Ok(worst)
}

/// Absolute Pearson correlation of each covariate with the response, the
/// utility used by linear sure independence screening.
pub fn correlation_scores(dataset: &Dataset) -> Vec<f64> {
    let n = dataset.n() as f64;
    let y = dataset.y();
    let ym = y.iter().sum::<f64>() / n;
    let syy: f64 = y.iter().map(|v| (v - ym).powi(2)).sum();
    dataset
        .columns()
        .par_iter()
        .map(|x| {
            let xm = x.iter().sum::<f64>() / n;
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for (xi, yi) in x.iter().zip(y) {
                sxy += (xi - xm) * (yi - ym);
                sxx += (xi - xm).powi(2);
            }
            if sxx > 0.0 && syy > 0.0 {
                (sxy / (sxx * syy).sqrt()).abs()
            } else {
                0.0
            }
        })
        .collect()
}

/// Set helper used by the iterative drivers.
pub(crate) fn complement(p: usize, set: &BTreeSet<usize>) -> Vec<usize> {
    (0..p).filter(|j| !set.contains(j)).collect()
}
