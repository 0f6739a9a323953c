//! Chi-square tail probabilities and quantiles, the innovation families used
//! by the simulator, the score functional γ(J, F), the noncentrality η² and
//! the limiting power of the rank test under Pitman alternatives.
//!
//! Admissibility of the innovation families: all four have finite variance,
//! finite Fisher information and exponentially decaying (normal, logistic,
//! contaminated normal) or polynomially decaying (Student t) tails. The tail
//! and information conditions of the limit theory are not checked at runtime.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_lower, integrate_upper};
use crate::scores::{score_variance, ScoreKind};
use crate::special::{gamma_p, gamma_q, ln_gamma, normal_cdf, normal_pdf, normal_quantile, normal_sf};

const QUAD_TOL: f64 = 1e-10;
const POISSON_TAIL: f64 = 1e-10;
const MAX_POISSON_TERMS: usize = 200_000;

fn check_dof(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Domain("chi-square degrees of freedom must be positive".into()));
    }
    Ok(())
}

/// Upper tail P(χ²_k > x).
pub fn chi2_sf(x: f64, k: usize) -> Result<f64> {
    check_dof(k)?;
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("chi-square argument must be >= 0, got {x}")));
    }
    Ok(gamma_q(0.5 * k as f64, 0.5 * x))
}

/// Lower tail P(χ²_k ≤ x).
pub fn chi2_cdf(x: f64, k: usize) -> Result<f64> {
    check_dof(k)?;
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("chi-square argument must be >= 0, got {x}")));
    }
    Ok(gamma_p(0.5 * k as f64, 0.5 * x))
}

fn chi2_pdf(x: f64, k: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let a = 0.5 * k as f64;
    ((a - 1.0) * x.ln() - 0.5 * x - a * 2f64.ln() - ln_gamma(a)).exp()
}

/// x with P(χ²_k ≤ x) = prob.
pub fn chi2_quantile(prob: f64, k: usize) -> Result<f64> {
    check_dof(k)?;
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::Domain(format!("probability must lie in (0, 1), got {prob}")));
    }
    // work on whichever tail is smaller so the residual keeps its digits
    let upper = prob > 0.5;
    let target = if upper { 1.0 - prob } else { prob };
    let resid = |x: f64| {
        if upper {
            target - gamma_q(0.5 * k as f64, 0.5 * x)
        } else {
            gamma_p(0.5 * k as f64, 0.5 * x) - target
        }
    };
    let (mut lo, mut hi) = (0.0, k as f64 + 1.0);
    while resid(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let r = resid(x);
        if r == 0.0 {
            return Ok(x);
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = chi2_pdf(x, k);
        let newton = if d > 0.0 { x - r / d } else { f64::NAN };
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 1e-14 * x.max(1e-300) || hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Mean-zero innovation law for the autoregressive errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnovationDistribution {
    Normal { sigma: f64 },
    Logistic { scale: f64 },
    StudentT { nu: f64, scale: f64 },
    /// (1 − ε)·N(0, σ₁²) + ε·N(0, σ₂²).
    ContaminatedNormal { eps: f64, sigma1: f64, sigma2: f64 },
}

impl InnovationDistribution {
    pub fn standard_normal() -> Self {
        InnovationDistribution::Normal { sigma: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            InnovationDistribution::Normal { sigma } => sigma > 0.0 && sigma.is_finite(),
            InnovationDistribution::Logistic { scale } => scale > 0.0 && scale.is_finite(),
            InnovationDistribution::StudentT { nu, scale } => {
                if !(nu > 2.0) {
                    return Err(Error::Config(format!(
                        "student_t needs nu > 2 for finite variance, got {nu}"
                    )));
                }
                nu.is_finite() && scale > 0.0 && scale.is_finite()
            }
            InnovationDistribution::ContaminatedNormal { eps, sigma1, sigma2 } => {
                (0.0..=1.0).contains(&eps)
                    && sigma1 > 0.0
                    && sigma2 > 0.0
                    && sigma1.is_finite()
                    && sigma2.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid innovation parameters: {self:?}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InnovationDistribution::Normal { .. } => "normal",
            InnovationDistribution::Logistic { .. } => "logistic",
            InnovationDistribution::StudentT { .. } => "student_t",
            InnovationDistribution::ContaminatedNormal { .. } => "contaminated_normal",
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            InnovationDistribution::Normal { sigma } => sigma * sigma,
            InnovationDistribution::Logistic { scale } => PI * PI * scale * scale / 3.0,
            InnovationDistribution::StudentT { nu, scale } => scale * scale * nu / (nu - 2.0),
            InnovationDistribution::ContaminatedNormal { eps, sigma1, sigma2 } => {
                (1.0 - eps) * sigma1 * sigma1 + eps * sigma2 * sigma2
            }
        }
    }

    fn student(nu: f64, scale: f64) -> StudentsT {
        StudentsT::new(0.0, scale, nu).expect("validated student_t parameters")
    }

    fn t_log_norm(nu: f64, scale: f64) -> f64 {
        ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln() - scale.ln()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            InnovationDistribution::Normal { sigma } => normal_pdf(x / sigma) / sigma,
            InnovationDistribution::Logistic { scale } => {
                let e = (-(x / scale).abs()).exp();
                e / (scale * (1.0 + e) * (1.0 + e))
            }
            InnovationDistribution::StudentT { nu, scale } => {
                let z = x / scale;
                (Self::t_log_norm(nu, scale) - 0.5 * (nu + 1.0) * (z * z / nu).ln_1p()).exp()
            }
            InnovationDistribution::ContaminatedNormal { eps, sigma1, sigma2 } => {
                (1.0 - eps) * normal_pdf(x / sigma1) / sigma1 + eps * normal_pdf(x / sigma2) / sigma2
            }
        }
    }

    /// f′(x).
    pub fn pdf_derivative(&self, x: f64) -> f64 {
        match *self {
            InnovationDistribution::Normal { sigma } => -x / (sigma * sigma) * self.pdf(x),
            InnovationDistribution::Logistic { scale } => -(0.5 * x / scale).tanh() / scale * self.pdf(x),
            InnovationDistribution::StudentT { nu, scale } => {
                -(nu + 1.0) * x / (nu * scale * scale + x * x) * self.pdf(x)
            }
            InnovationDistribution::ContaminatedNormal { eps, sigma1, sigma2 } => {
                let part = |s: f64| -x / (s * s) * normal_pdf(x / s) / s;
                (1.0 - eps) * part(sigma1) + eps * part(sigma2)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            InnovationDistribution::Normal { sigma } => normal_cdf(x / sigma),
            InnovationDistribution::Logistic { scale } => 1.0 / (1.0 + (-x / scale).exp()),
            InnovationDistribution::StudentT { nu, scale } => Self::student(nu, scale).cdf(x),
            InnovationDistribution::ContaminatedNormal { eps, sigma1, sigma2 } => {
                (1.0 - eps) * normal_cdf(x / sigma1) + eps * normal_cdf(x / sigma2)
            }
        }
    }

    /// 1 − F(x), accurate in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        match *self {
            InnovationDistribution::Normal { sigma } => normal_sf(x / sigma),
            InnovationDistribution::Logistic { scale } => 1.0 / (1.0 + (x / scale).exp()),
            InnovationDistribution::StudentT { nu, scale } => Self::student(nu, scale).sf(x),
            InnovationDistribution::ContaminatedNormal { eps, sigma1, sigma2 } => {
                (1.0 - eps) * normal_sf(x / sigma1) + eps * normal_sf(x / sigma2)
            }
        }
    }

    /// F⁻¹(u) for u in (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if u >= 1.0 {
            return f64::INFINITY;
        }
        match *self {
            InnovationDistribution::Normal { sigma } => sigma * normal_quantile(u),
            InnovationDistribution::Logistic { scale } => scale * (u / (1.0 - u)).ln(),
            InnovationDistribution::StudentT { nu, scale } => Self::student(nu, scale).inverse_cdf(u),
            InnovationDistribution::ContaminatedNormal { sigma1, sigma2, .. } => {
                // the mixture quantile lies between the component quantiles
                let z = normal_quantile(u);
                let (mut lo, mut hi) = (z * sigma1, z * sigma2);
                if lo > hi {
                    std::mem::swap(&mut lo, &mut hi);
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-15 * (1.0 + mid.abs()) {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            InnovationDistribution::Normal { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            InnovationDistribution::Logistic { scale } => {
                let u: f64 = Open01.sample(rng);
                scale * (u / (1.0 - u)).ln()
            }
            InnovationDistribution::StudentT { nu, scale } => {
                let t = StudentT::new(nu).expect("validated student_t parameters");
                scale * t.sample(rng)
            }
            InnovationDistribution::ContaminatedNormal { eps, sigma1, sigma2 } => {
                let contaminated = rng.random::<f64>() < eps;
                let z: f64 = StandardNormal.sample(rng);
                z * if contaminated { sigma2 } else { sigma1 }
            }
        }
    }
}

/// γ(J, F) = ∫ J(F(x)) (−f′(x)) dx, the same as ∫₀¹ J(v) (−f′/f)(F⁻¹(v)) dv.
///
/// Every supported F is symmetric about 0, so the real line is split at the
/// median; on the right half J(F(x)) is evaluated as −J(1 − F(x)).
pub fn gamma_jf(kind: ScoreKind, dist: &InnovationDistribution) -> Result<f64> {
    dist.validate()?;
    let j = |u: f64| {
        if u <= 0.0 || u >= 1.0 {
            0.0
        } else {
            kind.eval_unchecked(u)
        }
    };
    let left = integrate_lower(|x| j(dist.cdf(x)) * -dist.pdf_derivative(x), 0.0, QUAD_TOL)?;
    let right = integrate_upper(|x| -j(dist.sf(x)) * -dist.pdf_derivative(x), 0.0, QUAD_TOL)?;
    Ok(left + right)
}

/// η² = β_xᵀ Q β_x · γ²(J, F) / A²(J).
pub fn noncentrality(
    beta_x: &[f64],
    q: &DMatrix<f64>,
    kind: ScoreKind,
    dist: &InnovationDistribution,
) -> Result<f64> {
    let s = beta_x.len();
    if q.nrows() != s || q.ncols() != s {
        return Err(Error::Domain(format!(
            "Q is {}x{} but beta_x has length {s}",
            q.nrows(),
            q.ncols()
        )));
    }
    if beta_x.iter().all(|b| *b == 0.0) {
        return Ok(0.0);
    }
    let b = nalgebra::DVector::from_column_slice(beta_x);
    let quad = b.dot(&(q * &b));
    let scale = q.abs().max().max(f64::MIN_POSITIVE) * b.norm_squared();
    if quad < -1e-12 * scale {
        return Err(Error::Domain(format!("Q is not positive semidefinite (beta_x' Q beta_x = {quad})")));
    }
    let g = gamma_jf(kind, dist)?;
    Ok(quad.max(0.0) * g * g / score_variance(kind))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPrediction {
    pub eta2: f64,
    pub dof: usize,
    pub level: f64,
    pub power: f64,
    /// Set when the Poisson series was cut off and the power reported as 1.
    pub saturated: bool,
}

/// P(χ²_s(η²) > χ²_s(1 − τ)) from the Poisson mixture of central chi-squares.
pub fn predicted_power(eta2: f64, s: usize, tau: f64) -> Result<PowerPrediction> {
    check_dof(s)?;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Domain(format!("level must lie in (0, 1), got {tau}")));
    }
    if !(eta2 >= 0.0) || !eta2.is_finite() {
        return Err(Error::Domain(format!("noncentrality must be finite and >= 0, got {eta2}")));
    }
    let mut out = PowerPrediction {
        eta2,
        dof: s,
        level: tau,
        power: tau,
        saturated: false,
    };
    if eta2 == 0.0 {
        return Ok(out);
    }
    let crit = chi2_quantile(1.0 - tau, s)?;
    let mu = 0.5 * eta2;
    let half_s = 0.5 * s as f64;
    let weight = |j: usize| (-mu + j as f64 * mu.ln() - ln_gamma(j as f64 + 1.0)).exp();
    let term = |j: usize| gamma_q(half_s + j as f64, 0.5 * crit);

    // sum outward from the Poisson mode so large η² does not underflow
    let mode = mu.floor() as usize;
    let mut mass = 0.0;
    let mut power = 0.0;
    let (mut up, mut down) = (mode, mode as isize - 1);
    let mut steps = 0;
    while mass < 1.0 - POISSON_TAIL {
        if steps >= MAX_POISSON_TERMS {
            out.power = 1.0;
            out.saturated = true;
            return Ok(out);
        }
        let wu = weight(up);
        mass += wu;
        power += wu * term(up);
        up += 1;
        if down >= 0 {
            let wd = weight(down as usize);
            mass += wd;
            power += wd * term(down as usize);
            down -= 1;
        }
        steps += 1;
        if wu == 0.0 && down < 0 {
            break;
        }
    }
    out.power = power.clamp(tau, 1.0);
    Ok(out)
}

/// Kolmogorov–Smirnov distance between a sample and the χ²_k law.
pub fn ks_distance_chi2(sample: &[f64], k: usize) -> Result<f64> {
    check_dof(k)?;
    if sample.is_empty() {
        return Ok(0.0);
    }
    let mut xs: Vec<f64> = sample.to_vec();
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("sample contains NaN".into()));
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let f = chi2_cdf(x.max(0.0), k)?;
        d = d.max((i as f64 + 1.0) / m - f).max(f - i as f64 / m);
    }
    Ok(d)
}
