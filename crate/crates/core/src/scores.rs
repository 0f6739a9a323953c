//! Score-generating functions and the scores b̂_t = −∫₀¹ J(u) dâ_t(u).
//!
//! The three supported J are nondecreasing, antisymmetric about 1/2 and
//! satisfy the Chernoff–Savage growth bound |J'(u)| ≤ c(u(1−u))^{−1−δ} near
//! the endpoints. Since â_t is piecewise linear in α, the integral is exact:
//! on each segment it is the slope times ∫J over the segment, and every J
//! here has a closed-form antiderivative.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::RankScorePath;
use crate::special::{normal_pdf, normal_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// J(u) = u − 1/2.
    Wilcoxon,
    /// J(u) = Φ⁻¹(u).
    VanDerWaerden,
    /// J(u) = sign(u − 1/2)/2.
    Sign,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 3] = [ScoreKind::Wilcoxon, ScoreKind::VanDerWaerden, ScoreKind::Sign];

    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::Wilcoxon => "wilcoxon",
            ScoreKind::VanDerWaerden => "van_der_waerden",
            ScoreKind::Sign => "sign",
        }
    }

    /// J(u) for u in (0, 1), without domain checks.
    pub fn eval_unchecked(self, u: f64) -> f64 {
        match self {
            ScoreKind::Wilcoxon => u - 0.5,
            ScoreKind::VanDerWaerden => normal_quantile(u),
            ScoreKind::Sign => {
                if u > 0.5 {
                    0.5
                } else if u < 0.5 {
                    -0.5
                } else {
                    0.0
                }
            }
        }
    }

    /// ∫₀ᵘ J(v) dv; vanishes at both endpoints.
    pub fn antiderivative(self, u: f64) -> f64 {
        match self {
            ScoreKind::Wilcoxon => 0.5 * u * (u - 1.0),
            ScoreKind::VanDerWaerden => {
                if u <= 0.0 || u >= 1.0 {
                    0.0
                } else {
                    -normal_pdf(normal_quantile(u))
                }
            }
            ScoreKind::Sign => -0.5 * u.min(1.0 - u),
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "wilcoxon" => Ok(ScoreKind::Wilcoxon),
            "van_der_waerden" | "vdw" | "normal" => Ok(ScoreKind::VanDerWaerden),
            "sign" | "median" => Ok(ScoreKind::Sign),
            other => Err(Error::Domain(format!("unknown score function {other:?}"))),
        }
    }
}

/// J(u) for u in (0, 1).
pub fn eval_score(kind: ScoreKind, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("score argument must lie in (0, 1), got {u}")));
    }
    Ok(kind.eval_unchecked(u))
}

/// ∫ₐᵇ J(u) du in closed form, 0 ≤ a ≤ b ≤ 1.
pub fn integrate_score(kind: ScoreKind, a: f64, b: f64) -> Result<f64> {
    if !(0.0 <= a && a <= b && b <= 1.0) {
        return Err(Error::Domain(format!("need 0 <= a <= b <= 1, got a={a}, b={b}")));
    }
    Ok(kind.antiderivative(b) - kind.antiderivative(a))
}

/// A²(J) = ∫₀¹ (J − J̄)², with J̄ = 0 for antisymmetric J.
pub fn score_variance(kind: ScoreKind) -> f64 {
    match kind {
        ScoreKind::Wilcoxon => 1.0 / 12.0,
        ScoreKind::VanDerWaerden => 1.0,
        ScoreKind::Sign => 0.25,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub values: Vec<f64>,
    pub kind: ScoreKind,
    pub a2: f64,
}

/// b̂_t = −Σ_k slope_{t,k} · ∫_{α_k}^{α_{k+1}} J.
pub fn generate_scores(path: &RankScorePath, kind: ScoreKind) -> ScoreVector {
    let bp = path.breakpoints();
    let nodes = path.node_values();
    let segment_integrals: Vec<f64> = bp
        .windows(2)
        .map(|w| kind.antiderivative(w[1]) - kind.antiderivative(w[0]))
        .collect();
    let values = (0..path.n())
        .map(|t| {
            let mut acc = 0.0;
            for (k, integral) in segment_integrals.iter().enumerate() {
                let delta = nodes[(t, k + 1)] - nodes[(t, k)];
                if delta != 0.0 {
                    acc -= delta / (bp[k + 1] - bp[k]) * integral;
                }
            }
            acc
        })
        .collect();
    ScoreVector {
        values,
        kind,
        a2: score_variance(kind),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::AutoregressionDesign;
    use crate::lp::solve_rank_score_path;
    use nalgebra::{DMatrix, DVector};

    fn intercept_path(y: &[f64]) -> RankScorePath {
        let d = AutoregressionDesign::from_parts(
            DMatrix::from_element(y.len(), 1, 1.0),
            DVector::from_column_slice(y),
        )
        .unwrap();
        solve_rank_score_path(&d).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(eval_score(ScoreKind::Wilcoxon, 0.5).unwrap(), 0.0);
        assert!((eval_score(ScoreKind::VanDerWaerden, 0.975).unwrap() - 1.959_964).abs() < 1e-6);
        assert_eq!(eval_score(ScoreKind::Sign, 0.2).unwrap(), -0.5);
        assert!(eval_score(ScoreKind::Sign, 0.0).is_err());
        assert!(eval_score(ScoreKind::Wilcoxon, 1.0).is_err());
    }

    #[test]
    fn antisymmetric_and_monotone() {
        for kind in ScoreKind::ALL {
            let mut prev = f64::NEG_INFINITY;
            for i in 1..1000 {
                let u = i as f64 / 1000.0;
                let j = kind.eval_unchecked(u);
                assert!((kind.eval_unchecked(1.0 - u) + j).abs() < 1e-12, "{kind} at {u}");
                assert!(j >= prev);
                prev = j;
            }
        }
    }

    #[test]
    fn integral_examples() {
        for kind in ScoreKind::ALL {
            assert!(integrate_score(kind, 0.0, 1.0).unwrap().abs() < 1e-15);
        }
        assert!((integrate_score(ScoreKind::Wilcoxon, 0.0, 0.5).unwrap() + 0.125).abs() < 1e-15);
        assert!((integrate_score(ScoreKind::VanDerWaerden, 0.0, 0.5).unwrap() + 0.398_942_3).abs() < 1e-7);
        assert!((integrate_score(ScoreKind::Sign, 0.25, 0.75).unwrap()).abs() < 1e-15);
        assert!((integrate_score(ScoreKind::Sign, 0.6, 0.8).unwrap() - 0.1).abs() < 1e-15);
        assert!(integrate_score(ScoreKind::Sign, 0.8, 0.6).is_err());
    }

    #[test]
    fn variances() {
        assert_eq!(score_variance(ScoreKind::Wilcoxon), 1.0 / 12.0);
        assert_eq!(score_variance(ScoreKind::VanDerWaerden), 1.0);
        assert_eq!(score_variance(ScoreKind::Sign), 0.25);
    }

    #[test]
    fn wilcoxon_one_sample() {
        let y = [0.3, -1.2, 2.5, 0.9, 1.7];
        let sv = generate_scores(&intercept_path(&y), ScoreKind::Wilcoxon);
        let n = y.len() as f64;
        for (t, v) in y.iter().enumerate() {
            let r = 1 + y.iter().filter(|w| *w < v).count();
            let want = (2.0 * r as f64 - 1.0) / (2.0 * n) - 0.5;
            assert!((sv.values[t] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn sign_one_sample() {
        // n = 5: the median observation straddles α = 1/2
        let y = [0.3, -1.2, 2.5, 0.9, 1.7];
        let sv = generate_scores(&intercept_path(&y), ScoreKind::Sign);
        let want = [-0.5, -0.5, 0.5, 0.0, 0.5];
        for (got, w) in sv.values.iter().zip(want) {
            assert!((got - w).abs() < 1e-12);
        }
    }

    #[test]
    fn scores_sum_to_zero() {
        let y: Vec<f64> = (0..17).map(|i| ((i * 29) % 17) as f64 * 0.37 - 2.0).collect();
        let path = intercept_path(&y);
        for kind in ScoreKind::ALL {
            let s: f64 = generate_scores(&path, kind).values.iter().sum();
            assert!(s.abs() < 1e-8 * y.len() as f64);
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("vdw".parse::<ScoreKind>().unwrap(), ScoreKind::VanDerWaerden);
        assert_eq!("van-der-waerden".parse::<ScoreKind>().unwrap(), ScoreKind::VanDerWaerden);
        assert!("ranks".parse::<ScoreKind>().is_err());
    }
}
