//! Monte Carlo size and power studies.
//!
//! Data follow y_t = β₀ + x_tᵀβ* + ε_t with AR(p) errors
//! ε_t = φ₀ + Σ φ_j ε_{t−j} + u_t, u_t i.i.d. from the chosen innovation law,
//! and β* = n^{-1/2}β_x (β_x = 0 is the null hypothesis).

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{ks_distance_chi2, noncentrality, predicted_power, InnovationDistribution};
use crate::data::Dataset;
use crate::engine::run_test_full;
use crate::error::{Error, Result};
use crate::rng::{replicate_rng, StreamRole};
use crate::scores::ScoreKind;

/// Largest admissible modulus of a companion-matrix eigenvalue.
const STATIONARITY_MARGIN: f64 = 1.0 - 1e-10;
/// A study aborts when more than this fraction of replicates fail.
const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignGenerator {
    /// Independent N(0, 1) entries, columns standardized per replicate.
    #[default]
    IidNormal,
    /// Independent U(0, 1) entries, columns standardized per replicate.
    IidUniform,
    /// A fixed n×s matrix given row by row, used as is.
    FixedMatrix { rows: Vec<Vec<f64>> },
}

fn default_level() -> f64 {
    0.05
}

fn default_burn_in() -> usize {
    200
}

fn default_score() -> ScoreKind {
    ScoreKind::Wilcoxon
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub n: usize,
    pub s: usize,
    pub p: usize,
    pub phi: Vec<f64>,
    #[serde(default)]
    pub phi0: f64,
    #[serde(default)]
    pub beta0: f64,
    pub beta_x: Vec<f64>,
    pub innovation: InnovationDistribution,
    #[serde(default)]
    pub design: DesignGenerator,
    #[serde(default = "default_score")]
    pub score: ScoreKind,
    #[serde(default = "default_level")]
    pub level: f64,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

impl SimulationConfig {
    /// AR(1) errors with φ = 0.5, standard normal innovations, Wilcoxon
    /// scores, i.i.d. normal regressors and no regression signal.
    pub fn null_default(n: usize, s: usize, replications: usize, seed: u64) -> Self {
        Self {
            n,
            s,
            p: 1,
            phi: vec![0.5],
            phi0: 0.0,
            beta0: 0.0,
            beta_x: vec![0.0; s],
            innovation: InnovationDistribution::standard_normal(),
            design: DesignGenerator::IidNormal,
            score: ScoreKind::Wilcoxon,
            level: 0.05,
            replications,
            seed,
            burn_in: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.phi.len() != self.p {
            return Err(Error::Config(format!("phi has {} entries but p = {}", self.phi.len(), self.p)));
        }
        if self.beta_x.len() != self.s {
            return Err(Error::Config(format!(
                "beta_x has {} entries but s = {}",
                self.beta_x.len(),
                self.s
            )));
        }
        if self.s == 0 {
            return Err(Error::Config("s must be at least 1".into()));
        }
        if self.n < self.p + self.s + 2 {
            return Err(Error::Config(format!("n = {} is too small for p = {}, s = {}", self.n, self.p, self.s)));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.burn_in < 50 || self.burn_in < self.p {
            return Err(Error::Config(format!("burn_in must be at least 50, got {}", self.burn_in)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must lie in (0, 1), got {}", self.level)));
        }
        let finite = self.phi.iter().chain(&self.beta_x).chain([&self.phi0, &self.beta0]).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("non-finite model parameter".into()));
        }
        self.innovation.validate()?;
        check_stationary(&self.phi)?;
        if let DesignGenerator::FixedMatrix { rows } = &self.design {
            if rows.len() != self.n || rows.iter().any(|r| r.len() != self.s) {
                return Err(Error::Config(format!("fixed_matrix must be {} x {}", self.n, self.s)));
            }
        }
        Ok(())
    }

    pub fn is_null(&self) -> bool {
        self.beta_x.iter().all(|b| *b == 0.0)
    }
}

/// Checks that every root of 1 − φ₁z − … − φ_p z^p lies outside the unit
/// circle, via the eigenvalues of the companion matrix.
pub fn check_stationary(phi: &[f64]) -> Result<()> {
    let p = phi.len();
    if p == 0 {
        return Ok(());
    }
    let companion = DMatrix::from_fn(p, p, |i, j| {
        if i == 0 {
            phi[j]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let radius = companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if radius >= STATIONARITY_MARGIN {
        return Err(Error::Config(format!(
            "autoregression {phi:?} is not stationary (companion spectral radius {radius:.6})"
        )));
    }
    Ok(())
}

/// Simulates n values of the AR(p) error process after a burn-in from zero
/// starting values, together with the p values that precede them.
pub fn gen_ar_errors<R: Rng + ?Sized>(
    phi0: f64,
    phi: &[f64],
    dist: &InnovationDistribution,
    n: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_stationary(phi)?;
    dist.validate()?;
    let p = phi.len();
    if burn_in < p {
        return Err(Error::Config(format!("burn_in {burn_in} shorter than AR order {p}")));
    }
    let total = burn_in + n;
    let mut eps = vec![0.0; p + total];
    for t in p..p + total {
        let mut v = phi0 + dist.sample(rng);
        for (j, f) in phi.iter().enumerate() {
            v += f * eps[t - 1 - j];
        }
        eps[t] = v;
    }
    let start = p + burn_in;
    Ok((eps[start - p..start].to_vec(), eps[start..].to_vec()))
}

fn standardize(x: &mut DMatrix<f64>) -> Result<()> {
    let n = x.nrows() as f64;
    for mut col in x.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / n).sqrt();
        if sd == 0.0 {
            return Err(Error::Numerical("generated regressor column is constant".into()));
        }
        col /= sd;
    }
    Ok(())
}

fn gen_regressors<R: Rng + ?Sized>(cfg: &SimulationConfig, rng: &mut R) -> Result<DMatrix<f64>> {
    let (n, s) = (cfg.n, cfg.s);
    match &cfg.design {
        DesignGenerator::IidNormal => {
            let mut x = DMatrix::from_fn(n, s, |_, _| StandardNormal.sample(rng));
            standardize(&mut x)?;
            Ok(x)
        }
        DesignGenerator::IidUniform => {
            let mut x = DMatrix::from_fn(n, s, |_, _| rng.random::<f64>());
            standardize(&mut x)?;
            Ok(x)
        }
        DesignGenerator::FixedMatrix { rows } => Ok(DMatrix::from_fn(n, s, |i, j| rows[i][j])),
    }
}

/// One simulated dataset. The presample responses are β₀ + ε for the p
/// error values preceding the sample window.
pub fn gen_dataset(cfg: &SimulationConfig, replicate: u64) -> Result<Dataset> {
    cfg.validate()?;
    let mut innov_rng = replicate_rng(cfg.seed, replicate, StreamRole::Innovations);
    let mut reg_rng = replicate_rng(cfg.seed, replicate, StreamRole::Regressors);
    let (pre_eps, eps) = gen_ar_errors(cfg.phi0, &cfg.phi, &cfg.innovation, cfg.n, cfg.burn_in, &mut innov_rng)?;
    let x = gen_regressors(cfg, &mut reg_rng)?;
    let shrink = 1.0 / (cfg.n as f64).sqrt();
    let response = (0..cfg.n)
        .map(|t| {
            let signal: f64 = (0..cfg.s).map(|j| x[(t, j)] * cfg.beta_x[j] * shrink).sum();
            cfg.beta0 + signal + eps[t]
        })
        .collect();
    let presample = pre_eps.iter().map(|e| cfg.beta0 + e).collect();
    let names = (1..=cfg.s).map(|j| format!("x{j}")).collect();
    Dataset::new(presample, response, x, names, cfg.p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: SimulationConfig,
    /// Replicates that produced a test result.
    pub completed: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
    pub rejection_rate: f64,
    /// τ under the null, the limiting power under the alternative.
    pub predicted: f64,
    pub mc_stderr: f64,
    /// η² evaluated at the average Q_n (0 under the null).
    pub eta2: f64,
    /// Average of Q_n over completed replicates.
    pub mean_qn: Vec<Vec<f64>>,
    pub statistics: Vec<f64>,
    pub p_values: Vec<f64>,
    pub ks_distance_to_chi2: f64,
    /// KS distance of the p-values to U(0, 1).
    pub ks_p_uniform: f64,
}

struct ReplicateResult {
    statistic: f64,
    p_value: f64,
    reject: bool,
    qn: DMatrix<f64>,
}

fn run_replicate(cfg: &SimulationConfig, replicate: u64) -> Result<ReplicateResult> {
    let d = gen_dataset(cfg, replicate)?;
    let run = run_test_full(&d, cfg.score, cfg.level)?;
    Ok(ReplicateResult {
        statistic: run.report.statistic,
        p_value: run.report.p_value,
        reject: run.report.reject,
        qn: run.projected.qn,
    })
}

fn ks_uniform(sample: &[f64]) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d: f64, (i, &u)| {
        d.max((i as f64 + 1.0) / m - u).max(u - i as f64 / m)
    })
}

/// Runs the study on the global rayon pool.
pub fn run_study(cfg: &SimulationConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let results: Vec<_> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| run_replicate(cfg, r))
        .collect();
    aggregate(cfg, results)
}

/// Runs the study on a dedicated pool of `threads` workers. The report does
/// not depend on the thread count.
pub fn run_study_with_threads(cfg: &SimulationConfig, threads: usize) -> Result<StudyReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| run_study(cfg))
}

fn aggregate(cfg: &SimulationConfig, results: Vec<Result<ReplicateResult>>) -> Result<StudyReport> {
    let total = results.len();
    let mut statistics = Vec::with_capacity(total);
    let mut p_values = Vec::with_capacity(total);
    let mut rejections = 0usize;
    let mut qn_sum = DMatrix::zeros(cfg.s, cfg.s);
    let mut failures = 0;
    let mut first_failure = None;
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(rep) => {
                statistics.push(rep.statistic);
                p_values.push(rep.p_value);
                rejections += rep.reject as usize;
                qn_sum += rep.qn;
            }
            Err(e) => {
                failures += 1;
                if first_failure.is_none() {
                    first_failure = Some(format!("replicate {r}: {e}"));
                }
            }
        }
    }
    if failures as f64 > MAX_FAILURE_RATE * total as f64 {
        return Err(Error::StudyAborted {
            failed: failures,
            total,
            first: first_failure.unwrap_or_default(),
        });
    }
    let completed = statistics.len();
    let rate = rejections as f64 / completed as f64;
    let mean_qn = qn_sum / completed as f64;
    let (predicted, eta2) = if cfg.is_null() {
        (cfg.level, 0.0)
    } else {
        let eta2 = noncentrality(&cfg.beta_x, &mean_qn, cfg.score, &cfg.innovation)?;
        (predicted_power(eta2, cfg.s, cfg.level)?.power, eta2)
    };
    Ok(StudyReport {
        config: cfg.clone(),
        completed,
        failures,
        first_failure,
        rejection_rate: rate,
        predicted,
        mc_stderr: (rate * (1.0 - rate) / completed as f64).sqrt(),
        eta2,
        mean_qn: mean_qn.row_iter().map(|r| r.iter().copied().collect()).collect(),
        ks_distance_to_chi2: ks_distance_chi2(&statistics, cfg.s)?,
        ks_p_uniform: ks_uniform(&p_values),
        statistics,
        p_values,
    })
}
