//! The rank test of H₀: β* = 0.
//!
//! Pipeline: lagged design Y_n → rank-score path → scores b̂ → projection of
//! X* off span(Y_n) → S_n = n^{-1/2}(X* − X̂*)ᵀb̂ → T_n = S_nᵀQ_n⁻¹S_n / A²(J)
//! → χ²_s tail probability. Nothing in it estimates β₀, φ or F.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::asymptotics::{chi2_quantile, chi2_sf};
use crate::data::{build_ar_design, design_diagnostics, AutoregressionDesign, Dataset, RegressionDesign};
use crate::error::{Error, Result};
use crate::lp::{solve_rank_score_path, RankScorePath};
use crate::scores::{generate_scores, ScoreKind, ScoreVector};

/// Q_n is refused when its smallest eigenvalue falls below this fraction of
/// its trace, or its condition number exceeds the reciprocal.
const COLLINEAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedDesign {
    /// X̂*, the projection of X* onto span(Y_n).
    pub xhat: DMatrix<f64>,
    /// X* − X̂*.
    pub residual_design: DMatrix<f64>,
    /// Q_n = n⁻¹(X* − X̂*)ᵀ(X* − X̂*).
    pub qn: DMatrix<f64>,
    /// Condition number of Q_n.
    pub q_condition: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub reject: bool,
    pub level: f64,
    pub score: ScoreKind,
    pub n_effective: usize,
    pub warnings: Vec<String>,
    pub s_n: Vec<f64>,
    pub q_condition: f64,
}

/// Everything computed along the way, for callers that need more than the
/// report (the simulator averages Q_n, the CLI can dump the path).
#[derive(Debug, Clone)]
pub struct TestRun {
    pub report: TestReport,
    pub path: RankScorePath,
    pub scores: ScoreVector,
    pub projected: ProjectedDesign,
}

fn describe_combination(v: &DVector<f64>, names: &[String]) -> String {
    let scale = v.amax();
    let mut terms = Vec::new();
    for (i, c) in v.iter().enumerate() {
        let c = c / scale;
        if c.abs() < 1e-3 {
            continue;
        }
        let name = names.get(i).cloned().unwrap_or_else(|| format!("column {}", i + 1));
        terms.push(format!("{c:+.3}*{name}"));
    }
    terms.join(" ")
}

/// Projects X* onto span(Y_n) through a thin QR of Y_n.
pub fn project_design(ar: &AutoregressionDesign, reg: &RegressionDesign) -> Result<ProjectedDesign> {
    let y = ar.design();
    let x = reg.xstar();
    let n = y.nrows();
    if x.nrows() != n {
        return Err(Error::InvalidDataset(format!(
            "regressors have {} rows, lagged design has {n}",
            x.nrows()
        )));
    }
    if n <= ar.p() + 1 {
        return Err(Error::TooFewRows {
            needed: ar.p() + 2,
            have: n,
        });
    }
    let qr = y.clone().qr();
    let r = qr.r();
    let rmax = r.diagonal().amax();
    if r.diagonal().iter().any(|d| d.abs() <= 1e-12 * rmax) {
        return Err(Error::SingularDesign("lagged design Y_n is rank deficient".into()));
    }
    let q = qr.q();
    // two passes of Gram-Schmidt against Q keep the residual orthogonal
    let mut resid = x - &q * (q.transpose() * x);
    resid -= &q * (q.transpose() * &resid);
    let xhat = x - &resid;
    let mut qn = resid.transpose() * &resid / n as f64;
    qn = (&qn + qn.transpose()) * 0.5;

    let eig = SymmetricEigen::new(qn.clone());
    let trace = qn.trace();
    let (imin, min_eig) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let max_eig = eig.eigenvalues.max();
    let scale = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if trace <= COLLINEAR_TOL * scale || min_eig < COLLINEAR_TOL * trace || max_eig > min_eig / COLLINEAR_TOL {
        let combo = describe_combination(&eig.eigenvectors.column(imin).into_owned(), reg.names());
        return Err(Error::Collinear(format!(
            "{combo} is (nearly) in the span of the intercept and lagged responses \
             (smallest eigenvalue of Q_n {min_eig:.3e}, trace {trace:.3e})"
        )));
    }
    Ok(ProjectedDesign {
        xhat,
        residual_design: resid,
        qn,
        q_condition: max_eig / min_eig,
    })
}

/// S_n and T_n from a projected design and a score vector.
pub fn compute_statistic(pd: &ProjectedDesign, sv: &ScoreVector) -> Result<(DVector<f64>, f64)> {
    let r = &pd.residual_design;
    let n = r.nrows();
    if sv.values.len() != n {
        return Err(Error::InvalidDataset(format!(
            "{} scores for {n} observations",
            sv.values.len()
        )));
    }
    let b = DVector::from_column_slice(&sv.values);
    let s_n = r.transpose() * b / (n as f64).sqrt();
    let chol = pd
        .qn
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Collinear("Q_n is not positive definite".into()))?;
    let t = s_n.dot(&chol.solve(&s_n)) / sv.a2;
    Ok((s_n, t.max(0.0)))
}

/// Strict decision rule: reject iff p < τ (equivalently T_n > χ²_s(1 − τ)).
pub fn decide(statistic: f64, dof: usize, level: f64) -> Result<(f64, bool)> {
    let p = chi2_sf(statistic, dof)?;
    let crit = chi2_quantile(1.0 - level, dof)?;
    Ok((p, p < level && statistic > crit))
}

pub fn run_test(d: &Dataset, kind: ScoreKind, level: f64) -> Result<TestReport> {
    run_test_full(d, kind, level).map(|r| r.report)
}

pub fn run_test_full(d: &Dataset, kind: ScoreKind, level: f64) -> Result<TestRun> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must lie in (0, 1), got {level}")));
    }
    let ar = build_ar_design(d).map_err(|e| e.at_stage("lagged design"))?;
    let path = solve_rank_score_path(&ar).map_err(|e| e.at_stage("rank score path"))?;
    let scores = generate_scores(&path, kind);
    let reg = RegressionDesign::from_dataset(d);
    let projected = project_design(&ar, &reg).map_err(|e| e.at_stage("projection"))?;
    let (s_n, statistic) = compute_statistic(&projected, &scores).map_err(|e| e.at_stage("statistic"))?;
    let (p_value, reject) = decide(statistic, d.s(), level)?;

    let mut warnings = design_diagnostics(&reg).warnings();
    if d.has_tied_responses() {
        warnings.push("tied response values; ties are broken by observation order".into());
    }
    let report = TestReport {
        statistic,
        dof: d.s(),
        p_value,
        reject,
        level,
        score: kind,
        n_effective: d.n(),
        warnings,
        s_n: s_n.iter().copied().collect(),
        q_condition: projected.q_condition,
    };
    Ok(TestRun {
        report,
        path,
        scores,
        projected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ar_design_from_series;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_series(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        let mut v = vec![0.0];
        for _ in 1..len {
            let prev = *v.last().unwrap();
            v.push(0.5 * prev + rng.random_range(-1.0..1.0));
        }
        v
    }

    fn random_dataset(seed: u64, n: usize, p: usize, s: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let series = random_series(&mut rng, n + p);
        let x = DMatrix::from_fn(n, s, |_, _| rng.random_range(-1.0..1.0));
        let names = (1..=s).map(|j| format!("x{j}")).collect();
        Dataset::new(series[..p].to_vec(), series[p..].to_vec(), x, names, p).unwrap()
    }

    #[test]
    fn projection_is_orthogonal() {
        for seed in 0..20 {
            let d = random_dataset(seed, 40, (seed % 4) as usize, 3);
            let ar = build_ar_design(&d).unwrap();
            let pd = project_design(&ar, &RegressionDesign::from_dataset(&d)).unwrap();
            let scale = d.regressors().amax() * ar.design().amax() * 40.0;
            let ortho = ar.design().transpose() * &pd.residual_design;
            assert!(ortho.amax() <= 1e-8 * scale);
            let want = pd.residual_design.transpose() * &pd.residual_design / 40.0;
            assert!((&pd.qn - want).amax() < 1e-10);
            assert!((&pd.xhat + &pd.residual_design - d.regressors()).amax() < 1e-12);
        }
    }

    #[test]
    fn zero_order_projection_is_centering() {
        let d = random_dataset(5, 25, 0, 2);
        let ar = build_ar_design(&d).unwrap();
        let pd = project_design(&ar, &RegressionDesign::from_dataset(&d)).unwrap();
        let x = d.regressors();
        for j in 0..2 {
            let mean = x.column(j).mean();
            for t in 0..25 {
                assert!((pd.xhat[(t, j)] - mean).abs() < 1e-12);
            }
        }
        // Q_n is the covariance with divisor n
        let mut cov = DMatrix::zeros(2, 2);
        for a in 0..2 {
            for b in 0..2 {
                let ma = x.column(a).mean();
                let mb = x.column(b).mean();
                cov[(a, b)] = (0..25).map(|t| (x[(t, a)] - ma) * (x[(t, b)] - mb)).sum::<f64>() / 25.0;
            }
        }
        assert!((&pd.qn - cov).amax() < 1e-12);
    }

    #[test]
    fn lagged_response_regressor_is_collinear() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let series = random_series(&mut rng, 31);
        let ar = ar_design_from_series(&series[..1], &series[1..]).unwrap();
        let lag = DMatrix::from_column_slice(30, 1, &series[..30]);
        let other = DMatrix::from_fn(30, 1, |_, _| rng.random_range(-1.0..1.0));
        let x = DMatrix::from_fn(30, 2, |t, j| if j == 0 { other[(t, 0)] } else { lag[(t, 0)] });
        let reg = RegressionDesign::new(x, vec!["noise".into(), "ylag".into()]);
        match project_design(&ar, &reg) {
            Err(Error::Collinear(msg)) => {
                assert!(msg.contains("ylag"), "{msg}");
                assert!(!msg.contains("noise"), "{msg}");
            }
            other => panic!("expected collinearity error, got {other:?}"),
        }
    }

    fn scores_of(values: Vec<f64>, kind: ScoreKind) -> ScoreVector {
        ScoreVector {
            values,
            kind,
            a2: crate::scores::score_variance(kind),
        }
    }

    #[test]
    fn zero_scores_give_zero_statistic() {
        let d = random_dataset(3, 30, 1, 2);
        let ar = build_ar_design(&d).unwrap();
        let pd = project_design(&ar, &RegressionDesign::from_dataset(&d)).unwrap();
        let (s, t) = compute_statistic(&pd, &scores_of(vec![0.0; 30], ScoreKind::Wilcoxon)).unwrap();
        assert_eq!(s.amax(), 0.0);
        assert_eq!(t, 0.0);
    }

    #[test]
    fn scalar_statistic_identity() {
        let d = random_dataset(4, 30, 2, 1);
        let ar = build_ar_design(&d).unwrap();
        let pd = project_design(&ar, &RegressionDesign::from_dataset(&d)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b: Vec<f64> = (0..30).map(|_| rng.random_range(-0.5..0.5)).collect();
        let (_, t) = compute_statistic(&pd, &scores_of(b.clone(), ScoreKind::Wilcoxon)).unwrap();
        let r = pd.residual_design.column(0);
        let rb: f64 = r.iter().zip(&b).map(|(x, y)| x * y).sum();
        let q = r.norm_squared() / 30.0;
        let want = rb * rb / (30.0 * q / 12.0);
        assert!((t - want).abs() < 1e-10 * want.max(1.0));
    }

    #[test]
    fn statistic_matches_dense_inverse() {
        // T = n⁻¹ bᵀR (RᵀR/n)⁻¹ Rᵀb / A², with R built from an explicit hat matrix
        let d = random_dataset(8, 30, 2, 3);
        let ar = build_ar_design(&d).unwrap();
        let pd = project_design(&ar, &RegressionDesign::from_dataset(&d)).unwrap();
        let y = ar.design();
        let hat = y * (y.transpose() * y).try_inverse().unwrap() * y.transpose();
        let r = d.regressors() - &hat * d.regressors();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b: Vec<f64> = (0..30).map(|_| rng.random_range(-1.5..1.5)).collect();
        let bv = DVector::from_column_slice(&b);
        let q_inv = (r.transpose() * &r / 30.0).try_inverse().unwrap();
        let rb = r.transpose() * &bv;
        let want = rb.dot(&(q_inv * &rb)) / 30.0;
        let (_, t) = compute_statistic(&pd, &scores_of(b, ScoreKind::VanDerWaerden)).unwrap();
        assert!((t - want).abs() < 1e-8 * want.max(1.0), "{t} vs {want}");
    }

    #[test]
    fn boundary_statistic_is_not_rejected() {
        let crit = chi2_quantile(0.95, 2).unwrap();
        let (p, reject) = decide(crit, 2, 0.05).unwrap();
        assert!((p - 0.05).abs() < 1e-12);
        assert!(!reject);
        assert!(decide(crit * 1.001, 2, 0.05).unwrap().1);
    }

    #[test]
    fn null_run_is_well_formed() {
        let d = random_dataset(21, 200, 1, 2);
        let report = run_test(&d, ScoreKind::Wilcoxon, 0.05).unwrap();
        assert!(report.statistic.is_finite() && report.statistic >= 0.0);
        assert!((0.0..=1.0).contains(&report.p_value));
        assert_eq!(report.dof, 2);
        assert_eq!(report.n_effective, 200);
        assert_eq!(report.s_n.len(), 2);
        assert!(run_test(&d, ScoreKind::Wilcoxon, 1.5).is_err());
    }

    #[test]
    fn strong_signal_is_detected() {
        let base = random_dataset(22, 200, 1, 2);
        let x = base.regressors();
        let y: Vec<f64> = base
            .response()
            .iter()
            .enumerate()
            .map(|(t, v)| v + x[(t, 0)] + x[(t, 1)])
            .collect();
        let d = Dataset::new(base.presample().to_vec(), y, x.clone(), base.regressor_names().to_vec(), 1).unwrap();
        let report = run_test(&d, ScoreKind::Wilcoxon, 0.05).unwrap();
        assert!(report.reject, "{report:?}");
    }

    #[test]
    fn stage_is_labelled() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = 30;
        let series = random_series(&mut rng, n + 1);
        let x = DMatrix::from_column_slice(n, 1, &series[..n]);
        let d = Dataset::new(series[..1].to_vec(), series[1..].to_vec(), x, vec!["lag".into()], 1).unwrap();
        let err = run_test(&d, ScoreKind::Sign, 0.05).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "projection", .. }));
        assert!(matches!(err.root(), Error::Collinear(_)));
    }
}
