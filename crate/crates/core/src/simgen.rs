//! Simulation designs, the housing augmentation protocol, and evaluation metrics.
//!
//! All designs draw `(W, X, Y)` row by row from one ChaCha stream seeded by
//! the spec, so a spec always reproduces the same bits. The test sample is a
//! fresh draw from the same model that continues the training stream.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{mean_square, Dataset};
use crate::error::{Error, Result};
use crate::group_scad::ScadModel;
use crate::rng::{seeded, substream};
use crate::spline_basis::{quantile_sorted, SplineBasis};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "example", rename_all = "kebab-case")]
pub enum Example {
    /// Linear model with `s` alternating unit coefficients; the last 50
    /// covariates load on the first `s`.
    Ex1 { s: usize },
    /// Uniform covariates; three varying coefficients.
    Ex2 { t1: f64, t2: f64 },
    /// Gaussian covariates with a shared uniform factor; four true covariates.
    Ex3 { t1: f64, t2: f64 },
    /// As `Ex3` with eight true covariates.
    Ex4 { t1: f64, t2: f64 },
}

impl Example {
    pub fn support_size(&self) -> usize {
        match self {
            Example::Ex1 { s } => *s,
            Example::Ex2 { .. } => 3,
            Example::Ex3 { .. } => 4,
            Example::Ex4 { .. } => 8,
        }
    }

    pub fn noise_sd(&self) -> f64 {
        match self {
            Example::Ex1 { .. } => 3f64.sqrt(),
            _ => 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Example::Ex1 { .. } => "ex1",
            Example::Ex2 { .. } => "ex2",
            Example::Ex3 { .. } => "ex3",
            Example::Ex4 { .. } => "ex4",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub example: Example,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    /// Size of the independent test draw; `None` means `n / 2`.
    pub test_size: Option<usize>,
}

impl SimSpec {
    pub fn new(example: Example, n: usize, p: usize, seed: u64) -> Self {
        Self {
            example,
            n,
            p,
            seed,
            test_size: None,
        }
    }

    pub fn test_size(&self) -> usize {
        self.test_size.unwrap_or(self.n / 2)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.example.support_size();
        if self.n < 2 {
            return Err(Error::InvalidSpec("n must be at least 2".into()));
        }
        if self.p < s.max(1) {
            return Err(Error::InvalidSpec(format!(
                "{} needs p >= {}, got {}",
                self.example.name(),
                s.max(1),
                self.p
            )));
        }
        match self.example {
            Example::Ex1 { s } if s > 25 => {
                Err(Error::InvalidSpec("ex1 needs s <= 25".into()))
            }
            Example::Ex2 { t1, t2 } | Example::Ex3 { t1, t2 } | Example::Ex4 { t1, t2 }
                if !(t1 >= 0.0 && t2 >= 0.0 && t1.is_finite() && t2.is_finite()) =>
            {
                Err(Error::InvalidSpec("t1 and t2 must be finite and nonnegative".into()))
            }
            _ => Ok(()),
        }
    }

    /// Replicate `rep` of this spec with a derived seed.
    pub fn replicate(&self, rep: u64) -> Self {
        Self {
            seed: substream(self.seed, rep),
            ..*self
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimData {
    pub train: Dataset,
    pub test: Dataset,
    pub true_support: Vec<usize>,
    pub snr: f64,
}

/// Draws the training and test samples of a design, plus its SNR
/// `var(beta(W)^T X) / var(eps)` estimated from 10^5 auxiliary draws.
pub fn generate(spec: &SimSpec) -> Result<SimData> {
    spec.validate()?;
    let mut rng = seeded(spec.seed);
    let (train, _) = draw(&spec.example, spec.n, spec.p, &mut rng);
    let (test, _) = draw(&spec.example, spec.test_size().max(1), spec.p, &mut rng);
    let snr = snr(&spec.example, 100_000, substream(spec.seed, u64::MAX));
    Ok(SimData {
        train,
        test,
        true_support: (0..spec.example.support_size()).collect(),
        snr,
    })
}

/// Monte Carlo `var(beta(W)^T X) / var(eps)`.
pub fn snr(example: &Example, draws: usize, seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let p = example.support_size().max(1);
    let (_, signal) = draw(example, draws, p, &mut rng);
    let n = signal.len() as f64;
    let mean = signal.iter().sum::<f64>() / n;
    let var = signal.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    var / example.noise_sd().powi(2)
}

// Returns the dataset and the noiseless signal beta(W)^T X.
fn draw(example: &Example, n: usize, p: usize, rng: &mut ChaCha8Rng) -> (Dataset, Vec<f64>) {
    let mut cols = vec![Vec::with_capacity(n); p];
    let mut w = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut signal = Vec::with_capacity(n);
    let mut x = vec![0.0; p];
    for _ in 0..n {
        let (wi, si) = draw_row(example, &mut x, rng);
        let yi = si + example.noise_sd() * rng.sample::<f64, _>(StandardNormal);
        for (c, v) in cols.iter_mut().zip(&x) {
            c.push(*v);
        }
        w.push(wi);
        y.push(yi);
        signal.push(si);
    }
    let data = Dataset::new(y, w, cols).expect("generated data is consistent and finite");
    (data, signal)
}

fn draw_row(example: &Example, x: &mut [f64], rng: &mut ChaCha8Rng) -> (f64, f64) {
    let p = x.len();
    match *example {
        Example::Ex1 { s } => {
            let tail_start = p.saturating_sub(50).max(s);
            for v in x[..tail_start].iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let shared: f64 = (0..s).map(|j| alt_sign(j) * x[j] / 5.0).sum();
            let scale = (1.0 - s as f64 / 25.0).sqrt();
            for v in x[tail_start..].iter_mut() {
                *v = shared + scale * rng.sample::<f64, _>(StandardNormal);
            }
            let w: f64 = rng.random();
            let sig = (0..s).map(|j| alt_sign(j) * x[j]).sum();
            (w, sig)
        }
        Example::Ex2 { t1, t2 } => {
            for v in x.iter_mut() {
                *v = rng.random();
            }
            let common: f64 = rng.random();
            let own: f64 = rng.random();
            for v in x.iter_mut() {
                *v = (*v + t1 * common) / (1.0 + t1);
            }
            let w = (own + t2 * common) / (1.0 + t2);
            let sig = 5.0 * w * x[0]
                + 3.0 * (2.0 * w - 1.0).powi(2) * x[1]
                + 4.0 * (2.0 * PI * w).sin() * x[2];
            (w, sig)
        }
        Example::Ex3 { t1, t2 } | Example::Ex4 { t1, t2 } => {
            for v in x.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            for v in x.iter_mut() {
                *v = (*v + t1 * u1) / (1.0 + t1);
            }
            let w = (u2 + t2 * u1) / (1.0 + t2);
            let s2 = (2.0 * PI * w).sin();
            let sig = if matches!(example, Example::Ex3 { .. }) {
                2.0 * x[0] + 3.0 * w * x[1] + (w + 1.0).powi(2) * x[2] + 4.0 * s2 / (2.0 - s2) * x[3]
            } else {
                3.0 * w * x[0]
                    + (w + 1.0).powi(2) * x[1]
                    + (w - 2.0).powi(3) * x[2]
                    + 3.0 * s2 * x[3]
                    + w.exp() * x[4]
                    + 2.0 * x[5]
                    + 2.0 * x[6]
                    + 3.0 * w.sqrt() * x[7]
            };
            (w, sig)
        }
    }
}

fn alt_sign(j: usize) -> f64 {
    if j.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub pe: f64,
}

/// True/false positives of `selected` and the test mean squared prediction
/// error of `model`.
pub fn metrics(
    selected: &[usize],
    true_support: &[usize],
    model: &ScadModel,
    basis: &SplineBasis,
    test: &Dataset,
) -> Metrics {
    let tp = selected.iter().filter(|j| true_support.contains(j)).count();
    let pred = model.predict(basis, test);
    let resid: Vec<f64> = test.y().iter().zip(&pred).map(|(y, f)| y - f).collect();
    Metrics {
        tp,
        fp: selected.len() - tp,
        pe: mean_square(&resid),
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Normal-consistent robust standard deviation `IQR / 1.349`, with quartiles
/// by linear interpolation between order statistics (R's default type 7).
pub fn robust_sd(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            got: values.len(),
        });
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok((quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25)) / 1.349)
}

/// Raw housing columns expected in the input CSV.
pub const HOUSING_COLUMNS: [&str; 14] = [
    "MV", "RM", "AGE", "DIS", "RAD", "TAX", "PTRATIO", "B", "LSTAT", "CRIM", "ZN", "INDUS", "CHAS", "NOX",
];

/// Covariates of the housing model after transformation; `log(DIS)` is the exposure.
pub const HOUSING_COVARIATES: [&str; 12] = [
    "RM^2", "AGE", "log(RAD)", "TAX", "PTRATIO", "(B-0.63)^2", "log(LSTAT)", "CRIM", "ZN", "INDUS", "CHAS", "NOX^2",
];

/// Loads the housing CSV (header required, names case-insensitive, `MEDV`
/// accepted for `MV`) and applies the standard transforms: response
/// `log(MV)`, exposure `log(DIS)`, covariates [`HOUSING_COVARIATES`].
pub fn load_housing_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.to_ascii_uppercase()).collect();
    let find = |name: &str| {
        headers.iter().position(|h| h == name || (name == "MV" && h == "MEDV"))
    };
    let mut idx = Vec::with_capacity(HOUSING_COLUMNS.len());
    let mut missing = Vec::new();
    for name in HOUSING_COLUMNS {
        match find(name) {
            Some(i) => idx.push(i),
            None => missing.push(name.to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingColumns(missing));
    }
    let mut raw: Vec<Vec<f64>> = vec![Vec::new(); HOUSING_COLUMNS.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (c, &i) in idx.iter().enumerate() {
            let field = rec.get(i).unwrap_or("");
            let v: f64 = field.parse().map_err(|_| {
                Error::Schema(format!(
                    "row {}: column {}: cannot parse '{field}' as a number",
                    row + 2,
                    HOUSING_COLUMNS[c]
                ))
            })?;
            raw[c].push(v);
        }
    }
    let col = |name: &str| &raw[HOUSING_COLUMNS.iter().position(|&c| c == name).unwrap()];
    let map = |name: &str, f: fn(f64) -> f64| col(name).iter().map(|&v| f(v)).collect::<Vec<f64>>();
    let y = map("MV", f64::ln);
    let w = map("DIS", f64::ln);
    let columns = vec![
        map("RM", |v| v * v),
        col("AGE").clone(),
        map("RAD", f64::ln),
        col("TAX").clone(),
        col("PTRATIO").clone(),
        map("B", |v| (v - 0.63).powi(2)),
        map("LSTAT", f64::ln),
        col("CRIM").clone(),
        col("ZN").clone(),
        col("INDUS").clone(),
        col("CHAS").clone(),
        map("NOX", |v| v * v),
    ];
    Dataset::new(y, w, columns)?.with_names(HOUSING_COVARIATES.iter().map(|s| s.to_string()).collect())
}

/// Appends `p - s` artificial covariates `(Z_j + t U) / (1 + t)`, with `Z_j`
/// iid standard normal per row and one shared `U ~ U(0, 1)` per row.
pub fn augment_housing(raw: &Dataset, p: usize, t: f64, seed: u64) -> Result<Dataset> {
    let names = raw.names().unwrap_or(&[]);
    let missing: Vec<String> = HOUSING_COVARIATES
        .iter()
        .filter(|c| !names.iter().any(|n| n == *c))
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingColumns(missing));
    }
    augment(raw, p, t, seed)
}

/// Appends artificial covariates to any dataset up to `p` columns.
pub fn augment(raw: &Dataset, p: usize, t: f64, seed: u64) -> Result<Dataset> {
    let s = raw.p();
    if p < s {
        return Err(Error::InvalidSpec(format!("p = {p} is below the {s} original covariates")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidSpec("t must be finite and nonnegative".into()));
    }
    let extra = p - s;
    let n = raw.n();
    let mut rng = seeded(seed);
    let mut cols = vec![Vec::with_capacity(n); extra];
    for _ in 0..n {
        let z: Vec<f64> = (0..extra).map(|_| rng.sample(StandardNormal)).collect();
        let u: f64 = rng.random();
        for (c, zj) in cols.iter_mut().zip(z) {
            c.push((zj + t * u) / (1.0 + t));
        }
    }
    let mut out = raw.clone();
    out.append_columns(cols)?;
    Ok(out)
}

/// Random split of `0..n` into `n_train` training rows and the rest.
pub fn split_rows(n: usize, n_train: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_train > n {
        return Err(Error::InvalidSpec(format!("cannot take {n_train} training rows from {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded(seed));
    let test = idx.split_off(n_train);
    Ok((idx, test))
}
