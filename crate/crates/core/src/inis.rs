//! Iterative screening drivers.
//!
//! Both variants alternate a large-scale screening step on partial residuals
//! with a group-SCAD selection step on the surviving candidates:
//!
//! * **Conditional**: the conditioning set starts as the top-`K` marginal
//!   scorers. Each iteration regresses `Y` on the current set, screens the
//!   remaining covariates on the partial residual, and keeps those whose
//!   utility beats the `q`-th largest utility of a permuted partial residual.
//! * **Greedy**: starts from the empty set and admits the top-`p0` scorers on
//!   the partial residual at every iteration.
//!
//! Iteration stops when a selected set repeats any earlier one, when the
//! selected set reaches `zeta_n` covariates, or after `max_iter` rounds.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::group_scad::{fit_group_scad, ScadConfig, ScadModel};
use crate::linalg::least_squares;
use crate::marginal_screen::{complement, rank_descending, screen_response, ScreenOptions, Screener};
use crate::permutation::conditional_threshold_with;
use crate::rng::substream;
use crate::spline_basis::{joint_design, SplineBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Conditional,
    Greedy,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conditional" => Ok(Variant::Conditional),
            "greedy" => Ok(Variant::Greedy),
            other => Err(Error::InvalidConfig(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InisConfig {
    pub variant: Variant,
    /// Conditioning set size for the conditional variant.
    pub k: usize,
    /// Covariates admitted per iteration by the greedy variant.
    pub p0: usize,
    pub q: usize,
    pub num_permutations: usize,
    /// Cap on the selected set size; `None` means `floor(n / (L log n))`.
    pub zeta: Option<usize>,
    pub max_iter: usize,
    pub seed: u64,
    pub scad: ScadConfig,
}

impl Default for InisConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Conditional,
            k: 5,
            p0: 1,
            q: 1,
            num_permutations: 1,
            zeta: None,
            max_iter: 20,
            seed: 0,
            scad: ScadConfig::default(),
        }
    }
}

impl InisConfig {
    pub fn zeta_n(&self, n: usize, num_basis: usize) -> usize {
        self.zeta.unwrap_or_else(|| {
            let v = n as f64 / (num_basis as f64 * (n as f64).ln());
            (v.floor() as usize).max(1)
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.p0 == 0 {
            return Err(Error::InvalidConfig("p0 must be at least 1".into()));
        }
        if self.q == 0 || self.num_permutations == 0 {
            return Err(Error::InvalidConfig("q and num_permutations must be at least 1".into()));
        }
        if self.zeta == Some(0) {
            return Err(Error::InvalidConfig("zeta must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        self.scad.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `M_l`, the set conditioned on.
    pub conditioning: Vec<usize>,
    /// Number of covariates passing the screening rule before truncation.
    pub screened: usize,
    /// `A_{l+1}`.
    pub candidates: Vec<usize>,
    pub tau: Option<f64>,
    /// `M_{l+1}`.
    pub selected: Vec<usize>,
    pub bic: f64,
    pub lambda_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    FixedPoint,
    SizeCap,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InisTrace {
    pub initial: Vec<usize>,
    pub zeta: usize,
    pub iterations: Vec<IterationRecord>,
    pub termination: Option<Termination>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InisResult {
    pub selected: Vec<usize>,
    pub model: ScadModel,
    pub trace: InisTrace,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointFit {
    pub beta0: Vec<f64>,
    pub coefs: BTreeMap<usize, Vec<f64>>,
    pub fitted: Vec<f64>,
    /// `Y - beta_0(W) - sum_j X_j beta_j(W)`.
    pub residuals: Vec<f64>,
    pub ridged: bool,
}

/// Unpenalized joint spline fit of `Y` on the covariates in `set`.
pub fn fit_joint_unpenalized(dataset: &Dataset, basis: &SplineBasis, set: &[usize]) -> Result<JointFit> {
    if let Some(&j) = set.iter().find(|&&j| j >= dataset.p()) {
        return Err(Error::UnknownIndex(j));
    }
    let n = dataset.n();
    let l = basis.num_basis();
    let bmat = basis.design_matrix(dataset.w());
    let cols: Vec<&[f64]> = set.iter().map(|&j| dataset.column(j)).collect();
    let z = joint_design(&bmat, &cols);
    let rhs = DMatrix::from_column_slice(n, 1, dataset.y());
    let fit = least_squares(&z, &rhs, true).ok_or(Error::SingularJointDesign(set.len()))?;
    let coef = fit.coef.column(0);
    if coef.iter().any(|c| !c.is_finite()) {
        return Err(Error::SingularJointDesign(set.len()));
    }
    let fitted: Vec<f64> = fit.fitted.column(0).iter().copied().collect();
    let residuals = dataset.y().iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let coefs = set
        .iter()
        .enumerate()
        .map(|(g, &j)| (j, coef.rows(l * (g + 1), l).iter().copied().collect()))
        .collect();
    Ok(JointFit {
        beta0: coef.rows(0, l).iter().copied().collect(),
        coefs,
        fitted,
        residuals,
        ridged: fit.ridged,
    })
}

pub fn run_inis(dataset: &Dataset, basis: &SplineBasis, config: &InisConfig) -> Result<InisResult> {
    match config.variant {
        Variant::Conditional => run_conditional_inis(dataset, basis, config),
        Variant::Greedy => run_greedy_inis(dataset, basis, config),
    }
}

pub fn run_conditional_inis(dataset: &Dataset, basis: &SplineBasis, config: &InisConfig) -> Result<InisResult> {
    config.validate()?;
    let screener = Screener::new(dataset, basis, ScreenOptions::default());
    let initial = screen_response(&screener, dataset.y())?;
    let k = config.k.min(dataset.p());
    let m0: BTreeSet<usize> = initial.ranking[..k].iter().copied().collect();
    let seed = config.seed;
    drive(dataset, basis, config, m0, |current, l| {
        if current.len() + config.q > dataset.p() {
            // too few covariates left outside the conditioning set to calibrate
            return Ok((Vec::new(), None));
        }
        let ct = conditional_threshold_with(
            &screener,
            current,
            config.q,
            config.num_permutations,
            substream(seed, l as u64),
        )?;
        let passing: Vec<(usize, f64)> = ct
            .candidates
            .iter()
            .zip(&ct.scores)
            .filter(|(_, &s)| s >= ct.tau)
            .map(|(&j, &s)| (j, s))
            .collect();
        Ok((passing, Some(ct.tau)))
    })
}

pub fn run_greedy_inis(dataset: &Dataset, basis: &SplineBasis, config: &InisConfig) -> Result<InisResult> {
    config.validate()?;
    let screener = Screener::new(dataset, basis, ScreenOptions::default());
    drive(dataset, basis, config, BTreeSet::new(), |current, _| {
        let set: Vec<usize> = current.iter().copied().collect();
        let joint = fit_joint_unpenalized(dataset, basis, &set)?;
        let cands = complement(dataset.p(), current);
        let table = screener.scores(&cands, &[&joint.residuals])?;
        let order = rank_descending(&table.u[0]);
        let top = order
            .into_iter()
            .take(config.p0)
            .map(|c| (cands[c], table.u[0][c]))
            .collect();
        Ok((top, None))
    })
}

/// Shared loop: `screen(M_l, l)` returns the covariates outside `M_l` that pass
/// the screening rule (with their scores) and the threshold used.
fn drive<F>(
    dataset: &Dataset,
    basis: &SplineBasis,
    config: &InisConfig,
    m0: BTreeSet<usize>,
    mut screen: F,
) -> Result<InisResult>
where
    F: FnMut(&BTreeSet<usize>, usize) -> Result<(Vec<(usize, f64)>, Option<f64>)>,
{
    let zeta = config.zeta_n(dataset.n(), basis.num_basis());
    let mut trace = InisTrace {
        initial: m0.iter().copied().collect(),
        zeta,
        iterations: Vec::new(),
        termination: None,
    };
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    seen.insert(trace.initial.clone());
    let mut models: Vec<ScadModel> = Vec::new();
    let mut current = m0;
    let mut final_set: Vec<usize> = Vec::new();

    for l in 0..config.max_iter {
        let fail = |e: Error, trace: &InisTrace| Error::IterationFailed {
            iteration: l,
            source: Box::new(e),
            trace: Box::new(trace.clone()),
        };
        let (mut passing, tau) = match screen(&current, l) {
            Ok(v) => v,
            Err(e) => return Err(fail(e, &trace)),
        };
        let screened = passing.len();
        passing.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let room = zeta.saturating_sub(current.len());
        let mut candidates = current.clone();
        candidates.extend(passing.iter().take(room).map(|&(j, _)| j));
        let candidates: Vec<usize> = candidates.into_iter().collect();

        let model = match fit_group_scad(dataset, basis, &candidates, &config.scad) {
            Ok(m) => m,
            Err(e) => return Err(fail(e, &trace)),
        };
        let selected = model.active_set.clone();
        trace.iterations.push(IterationRecord {
            iteration: l,
            conditioning: current.iter().copied().collect(),
            screened,
            candidates,
            tau,
            selected: selected.clone(),
            bic: model.bic,
            lambda_star: model.lambda_star,
        });

        if selected.is_empty() && l >= 1 {
            trace.termination = Some(Termination::FixedPoint);
            final_set = models
                .iter()
                .filter(|m| !m.active_set.is_empty())
                .min_by(|a, b| a.bic.total_cmp(&b.bic))
                .map(|m| m.active_set.clone())
                .unwrap_or_default();
            break;
        }
        models.push(model);
        final_set = selected.clone();
        if seen.contains(&selected) {
            trace.termination = Some(Termination::FixedPoint);
            break;
        }
        if selected.len() >= zeta {
            trace.termination = Some(Termination::SizeCap);
            break;
        }
        seen.insert(selected.clone());
        current = selected.into_iter().collect();
    }
    if trace.termination.is_none() {
        trace.termination = Some(Termination::MaxIter);
    }

    let model = fit_group_scad(dataset, basis, &final_set, &config.scad).map_err(|e| Error::IterationFailed {
        iteration: trace.iterations.len(),
        source: Box::new(e),
        trace: Box::new(trace.clone()),
    })?;
    Ok(InisResult {
        selected: model.active_set.clone(),
        model,
        trace,
        seed: config.seed,
    })
}
