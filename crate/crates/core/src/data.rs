//! Observed data, the lagged autoregression design and the regression design.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative eigenvalue threshold for rank checks on Gram matrices.
pub const RANK_TOL: f64 = 1e-10;

/// A labeled table of raw cells, as read from a delimited file.
///
/// Cells are kept as text so that columns not used by an analysis may hold
/// anything; numeric parsing happens per column on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    names: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(names: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self> {
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::InvalidDataset(format!("duplicate column name {name:?}")));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != names.len() {
                return Err(Error::InvalidDataset(format!(
                    "row {} has {} cells, header has {}",
                    i + 1,
                    row.len(),
                    names.len()
                )));
            }
        }
        Ok(Self { names, rows })
    }

    /// Builds a table from numeric columns.
    pub fn from_columns(columns: &[(&str, &[f64])]) -> Result<Self> {
        let names = columns.iter().map(|(n, _)| n.to_string()).collect();
        let len = columns.first().map_or(0, |(_, c)| c.len());
        if columns.iter().any(|(_, c)| c.len() != len) {
            return Err(Error::InvalidDataset("columns differ in length".into()));
        }
        let rows = (0..len)
            .map(|i| columns.iter().map(|(_, c)| format!("{:?}", c[i])).collect())
            .collect();
        Self::new(names, rows)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> &str {
        &self.rows[row][col]
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Parses a column as numbers. Rows in errors are 1-based data rows.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let col = self.column_index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let raw = row[col].trim();
                let v: f64 = raw.parse().map_err(|_| Error::NonNumeric {
                    row: i + 1,
                    column: name.to_string(),
                    value: raw.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        row: i + 1,
                        column: name.to_string(),
                    });
                }
                Ok(v)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PresamplePolicy {
    /// The starting values y_{-p+1}, …, y_0, oldest first.
    Explicit(Vec<f64>),
    /// Use the first p rows of the table as the presample.
    ConsumeHead,
}

/// Response series with its presample and the exogenous regressors.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    presample: Vec<f64>,
    response: Vec<f64>,
    regressors: DMatrix<f64>,
    regressor_names: Vec<String>,
    ar_order: usize,
}

impl Dataset {
    pub fn new(
        presample: Vec<f64>,
        response: Vec<f64>,
        regressors: DMatrix<f64>,
        regressor_names: Vec<String>,
        ar_order: usize,
    ) -> Result<Self> {
        let n = response.len();
        let s = regressors.ncols();
        if presample.len() != ar_order {
            return Err(Error::InvalidDataset(format!(
                "presample has {} values, AR order is {ar_order}",
                presample.len()
            )));
        }
        if regressors.nrows() != n {
            return Err(Error::InvalidDataset(format!(
                "regressor matrix has {} rows, response has {n}",
                regressors.nrows()
            )));
        }
        if regressor_names.len() != s {
            return Err(Error::InvalidDataset(format!(
                "{} regressor names for {s} columns",
                regressor_names.len()
            )));
        }
        if s == 0 {
            return Err(Error::InvalidDataset("at least one regressor is required".into()));
        }
        let needed = ar_order + s + 2;
        if n < needed {
            return Err(Error::TooFewRows { needed, have: n });
        }
        if presample.iter().chain(&response).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite response value".into()));
        }
        if regressors.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite regressor value".into()));
        }
        Ok(Self {
            presample,
            response,
            regressors,
            regressor_names,
            ar_order,
        })
    }

    pub fn presample(&self) -> &[f64] {
        &self.presample
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn regressors(&self) -> &DMatrix<f64> {
        &self.regressors
    }

    pub fn regressor_names(&self) -> &[String] {
        &self.regressor_names
    }

    pub fn ar_order(&self) -> usize {
        self.ar_order
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn s(&self) -> usize {
        self.regressors.ncols()
    }

    /// Presample followed by the response: y_{-p+1}, …, y_n.
    pub fn full_series(&self) -> Vec<f64> {
        self.presample.iter().chain(&self.response).copied().collect()
    }

    /// Whether any two values of the full series coincide exactly.
    pub fn has_tied_responses(&self) -> bool {
        let mut v = self.full_series();
        v.sort_by(f64::total_cmp);
        v.windows(2).any(|w| w[0] == w[1])
    }

    /// Applies y ↦ c·y + m to presample and response alike.
    pub fn with_affine_response(&self, scale: f64, shift: f64) -> Result<Self> {
        let map = |v: &Vec<f64>| v.iter().map(|y| scale * y + shift).collect::<Vec<_>>();
        Self::new(
            map(&self.presample),
            map(&self.response),
            self.regressors.clone(),
            self.regressor_names.clone(),
            self.ar_order,
        )
    }

    /// Replaces the regressor matrix, keeping the response.
    pub fn with_regressors(&self, regressors: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        Self::new(
            self.presample.clone(),
            self.response.clone(),
            regressors,
            names,
            self.ar_order,
        )
    }
}

/// Pulls a [`Dataset`] out of a labeled table.
pub fn load_dataset(
    table: &Table,
    response_name: &str,
    regressor_names: &[String],
    ar_order: usize,
    presample_policy: &PresamplePolicy,
) -> Result<Dataset> {
    let y = table.numeric_column(response_name)?;
    let xs = regressor_names
        .iter()
        .map(|name| table.numeric_column(name))
        .collect::<Result<Vec<_>>>()?;
    let s = regressor_names.len();

    let (presample, skip) = match presample_policy {
        PresamplePolicy::Explicit(values) => {
            if values.len() != ar_order {
                return Err(Error::InvalidDataset(format!(
                    "explicit presample has {} values, AR order is {ar_order}",
                    values.len()
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset("non-finite presample value".into()));
            }
            (values.clone(), 0)
        }
        PresamplePolicy::ConsumeHead => {
            let needed = 2 * ar_order + s + 2;
            if y.len() < needed {
                return Err(Error::TooFewRows {
                    needed,
                    have: y.len(),
                });
            }
            (y[..ar_order].to_vec(), ar_order)
        }
    };

    let n = y.len() - skip;
    let regressors = DMatrix::from_fn(n, s, |i, j| xs[j][i + skip]);
    Dataset::new(
        presample,
        y[skip..].to_vec(),
        regressors,
        regressor_names.to_vec(),
        ar_order,
    )
}

/// The lagged design Y_n: row t is (1, y_{t-1}, …, y_{t-p}).
#[derive(Debug, Clone, PartialEq)]
pub struct AutoregressionDesign {
    design: DMatrix<f64>,
    response: DVector<f64>,
    p: usize,
}

impl AutoregressionDesign {
    /// Builds a design from an explicit matrix and response. The first
    /// column must be the intercept; no lag structure is required.
    pub fn from_parts(design: DMatrix<f64>, response: DVector<f64>) -> Result<Self> {
        if design.nrows() != response.len() {
            return Err(Error::InvalidDataset("design and response differ in length".into()));
        }
        if design.ncols() == 0 || design.column(0).iter().any(|&v| v != 1.0) {
            return Err(Error::InvalidDataset("first design column must be all ones".into()));
        }
        if design.iter().chain(response.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite design entry".into()));
        }
        check_full_rank(&design, "autoregression design")?;
        let p = design.ncols() - 1;
        Ok(Self {
            design,
            response,
            p,
        })
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    /// Y_n*: the lag columns only (n × p).
    pub fn lagged(&self) -> DMatrix<f64> {
        self.design.columns(1, self.p).into_owned()
    }

    /// Same design with a different response vector.
    pub fn with_response(&self, response: DVector<f64>) -> Result<Self> {
        if response.len() != self.n() {
            return Err(Error::InvalidDataset("response length mismatch".into()));
        }
        Ok(Self {
            design: self.design.clone(),
            response,
            p: self.p,
        })
    }
}

/// Builds Y_n from the dataset, using presample values for lags reaching
/// before the first observation.
pub fn build_ar_design(d: &Dataset) -> Result<AutoregressionDesign> {
    ar_design_from_series(d.presample(), d.response())
}

/// Builds Y_n from a presample (length p, oldest first) and a response.
pub fn ar_design_from_series(presample: &[f64], response: &[f64]) -> Result<AutoregressionDesign> {
    let p = presample.len();
    let n = response.len();
    let series: Vec<f64> = presample.iter().chain(response).copied().collect();
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidDataset("non-finite response value".into()));
    }
    // series[p + t] holds y_{t+1} for t = 0..n, so lag j of row t is series[p + t - j]
    let design = DMatrix::from_fn(n, p + 1, |t, j| if j == 0 { 1.0 } else { series[p + t - j] });
    check_full_rank(&design, "autoregression design")?;
    Ok(AutoregressionDesign {
        design,
        response: DVector::from_column_slice(response),
        p,
    })
}

fn check_full_rank(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() < m.ncols() {
        return Err(Error::SingularDesign(format!(
            "{what} has {} rows for {} columns",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut scaled = m.clone();
    for mut col in scaled.column_iter_mut() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(Error::SingularDesign(format!("{what} has a zero column")));
        }
        col /= norm;
    }
    let gram = scaled.transpose() * &scaled;
    let eig = SymmetricEigen::new(gram.clone());
    let min = eig.eigenvalues.min();
    if min < RANK_TOL * gram.trace() {
        return Err(Error::SingularDesign(format!(
            "{what} is rank-deficient (smallest scaled eigenvalue {min:.3e})"
        )));
    }
    Ok(())
}

/// X_n* and X_n = [1 | X_n*].
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDesign {
    xstar: DMatrix<f64>,
    with_intercept: DMatrix<f64>,
    names: Vec<String>,
}

impl RegressionDesign {
    pub fn new(xstar: DMatrix<f64>, names: Vec<String>) -> Self {
        let n = xstar.nrows();
        let s = xstar.ncols();
        let with_intercept =
            DMatrix::from_fn(n, s + 1, |i, j| if j == 0 { 1.0 } else { xstar[(i, j - 1)] });
        Self {
            xstar,
            with_intercept,
            names,
        }
    }

    pub fn from_dataset(d: &Dataset) -> Self {
        Self::new(d.regressors().clone(), d.regressor_names().to_vec())
    }

    pub fn xstar(&self) -> &DMatrix<f64> {
        &self.xstar
    }

    pub fn with_intercept(&self) -> &DMatrix<f64> {
        &self.with_intercept
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Advisory checks of the regressor conditions: definiteness of A_n,
/// bounded fourth moments and vanishing leverage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignDiagnostics {
    pub min_eigen_an: f64,
    pub trace_an: f64,
    pub fourth_moment_avg: f64,
    pub max_leverage: f64,
}

impl DesignDiagnostics {
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.min_eigen_an < RANK_TOL * self.trace_an {
            out.push(format!(
                "regressor Gram matrix A_n is (nearly) singular: smallest eigenvalue {:.3e}",
                self.min_eigen_an
            ));
        }
        if self.max_leverage > 0.5 {
            out.push(format!(
                "high-leverage observation: max leverage {:.3}",
                self.max_leverage
            ));
        }
        out
    }
}

pub fn design_diagnostics(r: &RegressionDesign) -> DesignDiagnostics {
    let x = r.xstar();
    let n = x.nrows() as f64;
    let an = x.transpose() * x / n;
    let eig = SymmetricEigen::new(an.clone());
    let trace_an = an.trace();
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let mut min_eigen = eig.eigenvalues.min().max(0.0);
    if min_eigen < 1e-14 * scale {
        min_eigen = 0.0;
    }

    // pseudo-inverse of A_n through its eigen-decomposition
    let mut inv_diag = eig.eigenvalues.clone();
    for v in inv_diag.iter_mut() {
        *v = if *v > 1e-12 * scale { 1.0 / *v } else { 0.0 };
    }
    let an_pinv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_diag) * eig.eigenvectors.transpose();

    let mut fourth = 0.0;
    let mut max_leverage: f64 = 0.0;
    for row in x.row_iter() {
        let sq = row.norm_squared();
        fourth += sq * sq;
        let lev = (&row * &an_pinv * row.transpose())[(0, 0)] / n;
        max_leverage = max_leverage.max(lev);
    }
    DesignDiagnostics {
        min_eigen_an: min_eigen,
        trace_an,
        fourth_moment_avg: fourth / n,
        max_leverage: max_leverage.max(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_y_x(n: usize) -> Table {
        let y: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64 + 0.1 * i as f64).collect();
        let x: Vec<f64> = (0..n).map(|i| ((i * 13) % 7) as f64).collect();
        Table::from_columns(&[("y", &y), ("x1", &x)]).unwrap()
    }

    #[test]
    fn consume_head_shrinks_rows() {
        let t = table_y_x(103);
        let d = load_dataset(&t, "y", &["x1".into()], 3, &PresamplePolicy::ConsumeHead).unwrap();
        assert_eq!(d.n(), 100);
        let y = t.numeric_column("y").unwrap();
        assert_eq!(d.presample(), &y[..3]);
        assert_eq!(d.response()[0], y[3]);
        assert_eq!(d.regressors()[(0, 0)], t.numeric_column("x1").unwrap()[3]);
    }

    #[test]
    fn zero_order_keeps_all_rows() {
        let t = table_y_x(20);
        let d = load_dataset(&t, "y", &["x1".into()], 0, &PresamplePolicy::ConsumeHead).unwrap();
        assert!(d.presample().is_empty());
        assert_eq!(d.n(), 20);
    }

    #[test]
    fn nan_cell_is_located() {
        let mut x: Vec<f64> = (0..12).map(|i| i as f64).collect();
        x[6] = f64::NAN;
        let y: Vec<f64> = (0..12).map(|i| (i * i) as f64).collect();
        let t = Table::from_columns(&[("y", &y), ("x1", &x)]).unwrap();
        let err = load_dataset(&t, "y", &["x1".into()], 1, &PresamplePolicy::ConsumeHead).unwrap_err();
        assert_eq!(
            err,
            Error::NonFinite {
                row: 7,
                column: "x1".into()
            }
        );
    }

    #[test]
    fn non_numeric_and_missing_columns() {
        let t = Table::new(
            vec!["y".into(), "x".into()],
            vec![vec!["1".into(), "a".into()], vec!["2".into(), "3".into()]],
        )
        .unwrap();
        assert!(matches!(t.numeric_column("x"), Err(Error::NonNumeric { row: 1, .. })));
        assert_eq!(t.numeric_column("z"), Err(Error::MissingColumn("z".into())));
    }

    #[test]
    fn too_few_rows() {
        let t = table_y_x(5);
        let err = load_dataset(&t, "y", &["x1".into()], 2, &PresamplePolicy::ConsumeHead).unwrap_err();
        assert!(matches!(err, Error::TooFewRows { .. }));
    }

    #[test]
    fn ar_design_shifts_series() {
        let ar = ar_design_from_series(&[5.0], &[1.0, 2.0, 3.0]).unwrap();
        let want = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 1.0, 1.0, 1.0, 2.0]);
        assert_eq!(ar.design(), &want);
        assert_eq!(ar.response().as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn zero_order_design_is_ones() {
        let d = Dataset::new(
            vec![],
            vec![1.0, 4.0, 2.0],
            DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 5.0]),
            vec!["x".into()],
            0,
        )
        .unwrap();
        let ar = build_ar_design(&d).unwrap();
        assert_eq!(ar.design(), &DMatrix::from_element(3, 1, 1.0));
    }

    #[test]
    fn constant_response_is_singular() {
        let d = Dataset::new(
            vec![2.0],
            vec![2.0; 6],
            DMatrix::from_column_slice(6, 1, &[0.0, 1.0, 5.0, 2.0, 3.0, 1.0]),
            vec!["x".into()],
            1,
        )
        .unwrap();
        assert!(matches!(build_ar_design(&d), Err(Error::SingularDesign(_))));
    }

    #[test]
    fn lag_columns_are_shifted_copies() {
        let y: Vec<f64> = (0..30).map(|i| ((i * 7919) % 101) as f64).collect();
        let x: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let t = Table::from_columns(&[("y", &y), ("x", &x)]).unwrap();
        let d = load_dataset(&t, "y", &["x".into()], 3, &PresamplePolicy::ConsumeHead).unwrap();
        let ar = build_ar_design(&d).unwrap();
        let m = ar.design();
        assert_eq!(ar.lagged().shape(), (d.n(), 3));
        for t in 1..d.n() {
            for j in 1..3 {
                assert_eq!(m[(t, j + 1)], m[(t - 1, j)]);
            }
            assert_eq!(m[(t, 1)], d.response()[t - 1]);
        }
    }

    #[test]
    fn diagnostics_identity_rows() {
        let r = RegressionDesign::new(DMatrix::identity(2, 2), vec!["a".into(), "b".into()]);
        let dg = design_diagnostics(&r);
        assert!((dg.min_eigen_an - 0.5).abs() < 1e-15);
        assert!(dg.warnings().iter().any(|w| w.contains("leverage")));
    }

    #[test]
    fn diagnostics_duplicated_column() {
        let c = [1.0, 2.0, 3.0, 4.0];
        let x = DMatrix::from_fn(4, 2, |i, _| c[i]);
        let dg = design_diagnostics(&RegressionDesign::new(x, vec!["a".into(), "b".into()]));
        assert_eq!(dg.min_eigen_an, 0.0);
        assert!(!dg.warnings().is_empty());
    }

    #[test]
    fn diagnostics_constant_column_leverage() {
        let n = 8;
        let dg = design_diagnostics(&RegressionDesign::new(
            DMatrix::from_element(n, 1, 1.0),
            vec!["c".into()],
        ));
        assert!((dg.max_leverage - 1.0 / n as f64).abs() < 1e-15);
        assert!((dg.fourth_moment_avg - 1.0).abs() < 1e-15);
    }
}
