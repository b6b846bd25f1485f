//! Permutation-calibrated screening thresholds.
//!
//! Permuting the response (or a partial residual) while leaving `(W, X)` in
//! place decouples the two and yields null marginal utilities. The threshold
//! is the `q`-th largest null utility, pooled over all permutation rounds.
//! The conditional variant first regresses out a small conditioning set and
//! permutes the resulting partial residual instead of the raw response.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inis::fit_joint_unpenalized;
use crate::marginal_screen::{complement, screen_response, ScreenOptions, Screener};
use crate::rng::seeded;
use crate::spline_basis::SplineBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationConfig {
    pub q: usize,
    pub num_permutations: usize,
    pub seed: u64,
    /// Size of the conditioning set for the conditional variant.
    pub k: usize,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        Self {
            q: 1,
            num_permutations: 1,
            seed: 0,
            k: 5,
        }
    }
}

impl PermutationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::InvalidConfig("q must be at least 1".into()));
        }
        if self.num_permutations == 0 {
            return Err(Error::InvalidConfig(
                "num_permutations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermutationThreshold {
    pub tau: f64,
    /// Null utilities, round by round, in candidate order.
    pub null_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalThreshold {
    pub tau: f64,
    pub partial_residuals: Vec<f64>,
    /// Covariates outside the conditioning set, ascending.
    pub candidates: Vec<usize>,
    /// Utilities of `candidates` on the partial residual.
    pub scores: Vec<f64>,
    pub null_scores: Vec<f64>,
}

/// `num_permutations` uniform permutations of `0..n` from one seeded stream.
pub fn draw_permutations(n: usize, rounds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = seeded(seed);
    (0..rounds)
        .map(|_| {
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect()
}

/// The `q`-th largest entry (1-based) of `values`.
pub fn qth_largest(values: &[f64], q: usize) -> Result<f64> {
    if q == 0 || q > values.len() {
        return Err(Error::InsufficientCandidates {
            needed: q.max(1),
            got: values.len(),
        });
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(v[q - 1])
}

pub fn permutation_threshold(
    dataset: &Dataset,
    basis: &SplineBasis,
    candidates: &[usize],
    config: &PermutationConfig,
) -> Result<PermutationThreshold> {
    config.validate()?;
    let screener = Screener::new(dataset, basis, ScreenOptions::default());
    let perms = draw_permutations(dataset.n(), config.num_permutations, config.seed);
    permutation_threshold_with(&screener, dataset.y(), candidates, config.q, &perms)
}

/// Threshold from explicit permutations of `response`.
pub fn permutation_threshold_with(
    screener: &Screener<'_>,
    response: &[f64],
    candidates: &[usize],
    q: usize,
    permutations: &[Vec<usize>],
) -> Result<PermutationThreshold> {
    if candidates.len() < q {
        return Err(Error::InsufficientCandidates {
            needed: q,
            got: candidates.len(),
        });
    }
    let permuted: Vec<Vec<f64>> = permutations
        .iter()
        .map(|p| p.iter().map(|&i| response[i]).collect())
        .collect();
    let refs: Vec<&[f64]> = permuted.iter().map(Vec::as_slice).collect();
    let table = screener.scores(candidates, &refs)?;
    let null_scores: Vec<f64> = table.u.into_iter().flatten().collect();
    let tau = qth_largest(&null_scores, q)?;
    Ok(PermutationThreshold { tau, null_scores })
}

pub fn conditional_permutation_threshold(
    dataset: &Dataset,
    basis: &SplineBasis,
    conditioning: &BTreeSet<usize>,
    config: &PermutationConfig,
) -> Result<ConditionalThreshold> {
    config.validate()?;
    let screener = Screener::new(dataset, basis, ScreenOptions::default());
    conditional_threshold_with(&screener, conditioning, config.q, config.num_permutations, config.seed)
}

pub(crate) fn conditional_threshold_with(
    screener: &Screener<'_>,
    conditioning: &BTreeSet<usize>,
    q: usize,
    rounds: usize,
    seed: u64,
) -> Result<ConditionalThreshold> {
    let dataset = screener.dataset();
    let set: Vec<usize> = conditioning.iter().copied().collect();
    let joint = fit_joint_unpenalized(dataset, screener.basis(), &set)
        .map_err(|e| Error::ConditioningFitFailed(e.to_string()))?;
    let candidates = complement(dataset.p(), conditioning);
    if candidates.len() < q {
        return Err(Error::InsufficientCandidates {
            needed: q,
            got: candidates.len(),
        });
    }
    // With nothing to condition on, permute the response itself; its
    // observed utilities coincide with those of Y - a0(W).
    let permuted_source: &[f64] = if set.is_empty() {
        dataset.y()
    } else {
        &joint.residuals
    };
    let perms = draw_permutations(dataset.n(), rounds, seed);
    let mut responses: Vec<Vec<f64>> = vec![joint.residuals.clone()];
    responses.extend(
        perms
            .iter()
            .map(|p| p.iter().map(|&i| permuted_source[i]).collect::<Vec<_>>()),
    );
    let refs: Vec<&[f64]> = responses.iter().map(Vec::as_slice).collect();
    let mut table = screener.scores(&candidates, &refs)?;
    let scores = std::mem::take(&mut table.u[0]);
    let null_scores: Vec<f64> = table.u.into_iter().skip(1).flatten().collect();
    let tau = qth_largest(&null_scores, q)?;
    Ok(ConditionalThreshold {
        tau,
        partial_residuals: joint.residuals,
        candidates,
        scores,
        null_scores,
    })
}

/// Top-`k` conditioning set plus conditionally thresholded screening.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalScreen {
    pub conditioning: Vec<usize>,
    pub threshold: ConditionalThreshold,
    /// `{ j outside the conditioning set : u*_j >= tau* }` together with the
    /// conditioning set, ascending.
    pub selected: Vec<usize>,
}

pub fn conditional_screen(
    dataset: &Dataset,
    basis: &SplineBasis,
    config: &PermutationConfig,
) -> Result<ConditionalScreen> {
    config.validate()?;
    let screener = Screener::new(dataset, basis, ScreenOptions::default());
    let initial = screen_response(&screener, dataset.y())?;
    let k = config.k.min(dataset.p());
    let conditioning: BTreeSet<usize> = initial.ranking[..k].iter().copied().collect();
    let threshold =
        conditional_threshold_with(&screener, &conditioning, config.q, config.num_permutations, config.seed)?;
    let mut selected = conditioning.clone();
    selected.extend(
        threshold
            .candidates
            .iter()
            .zip(&threshold.scores)
            .filter(|(_, &s)| s >= threshold.tau)
            .map(|(&j, _)| j),
    );
    Ok(ConditionalScreen {
        conditioning: conditioning.into_iter().collect(),
        threshold,
        selected: selected.into_iter().collect(),
    })
}
