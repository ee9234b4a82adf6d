//! Weighted logistic regression fitted by damped Newton steps (IRLS), with a
//! feature encoder and a rank-based AUC.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{AuditDataset, Feature, FeatureColumn};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnDescriptor {
    Numeric { feature: String, mean: f64, sd: f64 },
    Indicator { feature: String, level: String },
    Intercept,
}

/// Encoding learned on training rows: standardization for numeric features
/// (sample sd) and drop-first one-hot blocks for categorical ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub columns: Vec<ColumnDescriptor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    /// Row-major, `n_rows * n_cols`.
    pub data: Vec<f64>,
    pub n_rows: usize,
    pub n_cols: usize,
    pub columns: Vec<ColumnDescriptor>,
}

impl DesignMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    /// Intercept-only matrix with `n` rows.
    pub fn intercept_only(n: usize) -> Self {
        Self {
            data: vec![1.0; n],
            n_rows: n,
            n_cols: 1,
            columns: vec![ColumnDescriptor::Intercept],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::InvalidParameter("ragged design rows".into()));
        }
        Ok(Self {
            data: rows.concat(),
            n_rows: rows.len(),
            n_cols,
            columns: (0..n_cols)
                .map(|j| ColumnDescriptor::Numeric {
                    feature: format!("x{j}"),
                    mean: 0.0,
                    sd: 1.0,
                })
                .collect(),
        })
    }

    fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_rows, self.n_cols, &self.data)
    }
}

impl Encoder {
    pub fn fit(features: &[&Feature], fit_rows: &[usize]) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidParameter("encoder needs at least one feature".into()));
        }
        let mut columns = Vec::new();
        for f in features {
            match &f.column {
                FeatureColumn::Numeric(v) => {
                    let n = fit_rows.len() as f64;
                    let mean = fit_rows.iter().map(|&i| v[i]).sum::<f64>() / n;
                    let var = if fit_rows.len() > 1 {
                        fit_rows.iter().map(|&i| (v[i] - mean).powi(2)).sum::<f64>() / (n - 1.0)
                    } else {
                        0.0
                    };
                    let sd = var.sqrt();
                    let sd = if sd > 0.0 && sd.is_finite() { sd } else { 1.0 };
                    columns.push(ColumnDescriptor::Numeric {
                        feature: f.name.clone(),
                        mean,
                        sd,
                    });
                }
                FeatureColumn::Categorical(v) => {
                    let levels: BTreeSet<&String> = fit_rows.iter().map(|&i| &v[i]).collect();
                    columns.extend(levels.into_iter().skip(1).map(|l| ColumnDescriptor::Indicator {
                        feature: f.name.clone(),
                        level: l.clone(),
                    }));
                }
            }
        }
        columns.push(ColumnDescriptor::Intercept);
        Ok(Self { columns })
    }

    /// Applies the encoding to every row. Categories unseen at fit time
    /// encode as an all-zero block.
    pub fn transform(&self, features: &[&Feature]) -> Result<DesignMatrix> {
        let n_rows = features.first().map_or(0, |f| f.column.len());
        let find = |name: &str| -> Result<&Feature> {
            features
                .iter()
                .copied()
                .find(|f| f.name == name)
                .ok_or_else(|| Error::InvalidParameter(format!("feature `{name}` missing at scoring time")))
        };
        let n_cols = self.columns.len();
        let mut data = vec![0.0; n_rows * n_cols];
        for (j, col) in self.columns.iter().enumerate() {
            match col {
                ColumnDescriptor::Numeric { feature, mean, sd } => {
                    let values = find(feature)?.column.as_numeric().ok_or_else(|| {
                        Error::InvalidParameter(format!("feature `{feature}` is no longer numeric"))
                    })?;
                    for (i, x) in values.iter().enumerate() {
                        data[i * n_cols + j] = (x - mean) / sd;
                    }
                }
                ColumnDescriptor::Indicator { feature, level } => match &find(feature)?.column {
                    FeatureColumn::Categorical(values) => {
                        for (i, v) in values.iter().enumerate() {
                            data[i * n_cols + j] = f64::from(u8::from(v == level));
                        }
                    }
                    FeatureColumn::Numeric(_) => {
                        return Err(Error::InvalidParameter(format!(
                            "feature `{feature}` is numeric at scoring time"
                        )))
                    }
                },
                ColumnDescriptor::Intercept => {
                    for i in 0..n_rows {
                        data[i * n_cols + j] = 1.0;
                    }
                }
            }
        }
        Ok(DesignMatrix {
            data,
            n_rows,
            n_cols,
            columns: self.columns.clone(),
        })
    }
}

/// Learns the encoding on `fit_rows` and applies it to every row.
pub fn encode(features: &[&Feature], fit_rows: &[usize]) -> Result<(Encoder, DesignMatrix)> {
    let encoder = Encoder::fit(features, fit_rows)?;
    let x = encoder.transform(features)?;
    Ok((encoder, x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            l2: 1e-6,
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    /// Objective value after each accepted iteration, starting at zero
    /// coefficients. Non-increasing up to rounding noise.
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub coefficients: Vec<f64>,
    pub columns: Vec<ColumnDescriptor>,
    pub convergence: Convergence,
}

/// Weighted negative log-likelihood plus `(l2/2)·‖β‖²` over the
/// non-intercept coefficients.
pub struct LogisticObjective<'a> {
    x: DMatrix<f64>,
    y: &'a [u8],
    weights: Vec<f64>,
    l2: f64,
    penalized: Vec<bool>,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl<'a> LogisticObjective<'a> {
    pub fn new(x: &DesignMatrix, y: &'a [u8], weights: Option<&[f64]>, l2: f64) -> Result<Self> {
        if y.len() != x.n_rows {
            return Err(Error::InvalidParameter(format!(
                "{} labels for {} design rows",
                y.len(),
                x.n_rows
            )));
        }
        if x.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("design matrix has non-finite entries".into()));
        }
        if y.iter().any(|&v| v > 1) {
            return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
        }
        if !(l2 >= 0.0 && l2.is_finite()) {
            return Err(Error::InvalidParameter(format!("l2 {l2} must be non-negative")));
        }
        let weights = match weights {
            Some(w) => {
                if w.len() != x.n_rows {
                    return Err(Error::InvalidParameter("weight length mismatch".into()));
                }
                if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::InvalidParameter("weights must be finite and non-negative".into()));
                }
                w.to_vec()
            }
            None => vec![1.0; x.n_rows],
        };
        let penalized = x
            .columns
            .iter()
            .map(|c| !matches!(c, ColumnDescriptor::Intercept))
            .collect();
        Ok(Self {
            x: x.to_matrix(),
            y,
            weights,
            l2,
            penalized,
        })
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn loss(&self, beta: &[f64]) -> f64 {
        let z = &self.x * DVector::from_column_slice(beta);
        let mut total = 0.0;
        for i in 0..z.len() {
            total += self.weights[i] * (softplus(z[i]) - f64::from(self.y[i]) * z[i]);
        }
        total + self.penalty(beta)
    }

    fn penalty(&self, beta: &[f64]) -> f64 {
        0.5 * self.l2
            * beta
                .iter()
                .zip(&self.penalized)
                .filter(|(_, p)| **p)
                .map(|(b, _)| b * b)
                .sum::<f64>()
    }

    pub fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        let z = &self.x * DVector::from_column_slice(beta);
        let resid = DVector::from_iterator(
            z.len(),
            (0..z.len()).map(|i| self.weights[i] * (logistic(z[i]) - f64::from(self.y[i]))),
        );
        let mut g = self.x.tr_mul(&resid);
        for (j, p) in self.penalized.iter().enumerate() {
            if *p {
                g[j] += self.l2 * beta[j];
            }
        }
        g.iter().copied().collect()
    }

    fn hessian(&self, beta: &[f64]) -> DMatrix<f64> {
        let z = &self.x * DVector::from_column_slice(beta);
        let mut xw = self.x.clone();
        for i in 0..z.len() {
            let p = logistic(z[i]);
            let w = (self.weights[i] * p * (1.0 - p)).sqrt();
            xw.row_mut(i).scale_mut(w);
        }
        let mut h = xw.tr_mul(&xw);
        for (j, p) in self.penalized.iter().enumerate() {
            if *p {
                h[(j, j)] += self.l2;
            }
        }
        h
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Damped Newton iterations from zero coefficients. Non-convergence is
/// reported in the result, not as an error.
pub fn fit_logistic(x: &DesignMatrix, y: &[u8], weights: Option<&[f64]>, opts: &FitOptions) -> Result<LogisticModel> {
    let objective = LogisticObjective::new(x, y, weights, opts.l2)?;
    let dim = objective.dim();
    let mut beta = vec![0.0; dim];
    let mut loss = objective.loss(&beta);
    let mut grad = objective.gradient(&beta);
    let mut trace = vec![loss];
    let mut iterations = 0;
    let mut converged = inf_norm(&grad) < opts.tol;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut h = objective.hessian(&beta);
        let g = DVector::from_column_slice(&grad);
        let step = loop {
            if let Some(chol) = h.clone().cholesky() {
                break chol.solve(&g);
            }
            // Singular curvature (e.g. an all-zero column): add a ridge.
            let jitter = 1e-8 * (1.0 + h.diagonal().amax());
            for j in 0..dim {
                h[(j, j)] += jitter;
            }
        };

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let candidate: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b - t * s).collect();
            let cand_loss = objective.loss(&candidate);
            // Near the optimum the loss change drops below its rounding
            // noise; a step is still taken if it shrinks the gradient.
            let within_noise = cand_loss <= loss + 1e-12 * (1.0 + loss.abs())
                && inf_norm(&objective.gradient(&candidate)) < inf_norm(&grad);
            if cand_loss.is_finite() && (cand_loss <= loss || within_noise) {
                beta = candidate;
                loss = cand_loss;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        grad = objective.gradient(&beta);
        trace.push(loss);
        converged = inf_norm(&grad) < opts.tol;
        if !accepted {
            break;
        }
    }

    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Numerical("logistic fit produced non-finite coefficients".into()));
    }
    Ok(LogisticModel {
        coefficients: beta,
        columns: x.columns.clone(),
        convergence: Convergence {
            iterations,
            gradient_norm: inf_norm(&grad),
            converged,
            loss_trace: trace,
        },
    })
}

pub fn predict_proba(model: &LogisticModel, x: &DesignMatrix) -> Result<Vec<f64>> {
    if x.n_cols != model.coefficients.len() {
        return Err(Error::InvalidParameter(format!(
            "design has {} columns, model expects {}",
            x.n_cols,
            model.coefficients.len()
        )));
    }
    Ok((0..x.n_rows)
        .map(|i| {
            let z: f64 = x.row(i).iter().zip(&model.coefficients).map(|(a, b)| a * b).sum();
            logistic(z)
        })
        .collect())
}

/// Probability that a random positive outranks a random negative, ties
/// counting one half. Computed from mid-ranks.
pub fn auc(scores: &[f64], y_true: &[u8]) -> Result<f64> {
    if scores.len() != y_true.len() {
        return Err(Error::InvalidParameter("scores and labels differ in length".into()));
    }
    let n_pos = y_true.iter().filter(|&&y| y == 1).count();
    let n_neg = y_true.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidParameter("AUC needs both classes present".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Twice the rank sum of positives keeps every term an integer.
    let mut twice_rank_sum: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end+1, mid-rank doubled
        let twice_mid = (start + 1 + end + 1) as u64;
        let positives = order[start..=end].iter().filter(|&&i| y_true[i] == 1).count() as u64;
        twice_rank_sum += twice_mid * positives;
        start = end + 1;
    }
    let n_pos = n_pos as u64;
    let twice_u = twice_rank_sum - n_pos * (n_pos + 1);
    Ok(twice_u as f64 / 2.0 / (n_pos as f64 * n_neg as f64))
}

/// Which dataset columns become predictors in [`fit_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSelection {
    /// Every feature column except `exclude`, plus the protected attribute
    /// when `include_protected`.
    All {
        include_protected: bool,
        exclude: Vec<String>,
    },
    /// These columns, in order. The protected column may be named.
    Named(Vec<String>),
    InterceptOnly,
}

impl Default for FeatureSelection {
    fn default() -> Self {
        FeatureSelection::All {
            include_protected: true,
            exclude: Vec::new(),
        }
    }
}

impl FeatureSelection {
    fn resolve(&self, dataset: &AuditDataset) -> Result<Vec<Feature>> {
        let protected = || Feature {
            name: dataset.protected_column().to_string(),
            column: FeatureColumn::Categorical(dataset.protected().to_vec()),
        };
        match self {
            FeatureSelection::All {
                include_protected,
                exclude,
            } => {
                let mut out: Vec<Feature> = dataset
                    .features()
                    .iter()
                    .filter(|f| !exclude.contains(&f.name))
                    .cloned()
                    .collect();
                if *include_protected {
                    out.push(protected());
                }
                Ok(out)
            }
            FeatureSelection::Named(names) => names
                .iter()
                .map(|name| {
                    if name == dataset.protected_column() {
                        Ok(protected())
                    } else {
                        dataset
                            .feature(name)
                            .cloned()
                            .ok_or_else(|| Error::InvalidParameter(format!("unknown feature `{name}`")))
                    }
                })
                .collect(),
            FeatureSelection::InterceptOnly => Ok(Vec::new()),
        }
    }
}

/// A logistic model together with the encoding learned from its training
/// data, able to score any dataset carrying the same feature columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub selection: FeatureSelection,
    /// `None` for an intercept-only model.
    pub encoder: Option<Encoder>,
    pub model: LogisticModel,
}

impl FittedModel {
    pub fn design(&self, dataset: &AuditDataset) -> Result<DesignMatrix> {
        match &self.encoder {
            None => Ok(DesignMatrix::intercept_only(dataset.row_count())),
            Some(encoder) => {
                let features = self.selection.resolve(dataset)?;
                encoder.transform(&features.iter().collect::<Vec<_>>())
            }
        }
    }

    pub fn score(&self, dataset: &AuditDataset) -> Result<Vec<f64>> {
        predict_proba(&self.model, &self.design(dataset)?)
    }
}

/// Fits a logistic model of the dataset's labels on the selected columns.
pub fn fit_dataset(
    dataset: &AuditDataset,
    selection: &FeatureSelection,
    weights: Option<&[f64]>,
    opts: &FitOptions,
) -> Result<FittedModel> {
    let features = selection.resolve(dataset)?;
    let (encoder, x) = match selection {
        FeatureSelection::InterceptOnly => (None, DesignMatrix::intercept_only(dataset.row_count())),
        _ => {
            if features.is_empty() {
                return Err(Error::InvalidParameter("no features selected".into()));
            }
            let rows: Vec<usize> = (0..dataset.row_count()).collect();
            let (encoder, x) = encode(&features.iter().collect::<Vec<_>>(), &rows)?;
            (Some(encoder), x)
        }
    };
    let model = fit_logistic(&x, dataset.y_true(), weights, opts)?;
    Ok(FittedModel {
        selection: selection.clone(),
        encoder,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feature(name: &str, column: FeatureColumn) -> Feature {
        Feature {
            name: name.into(),
            column,
        }
    }

    #[test]
    fn categorical_drops_first_level() {
        let f = feature("g", FeatureColumn::Categorical(vec!["b".into(), "a".into(), "b".into()]));
        let (_, x) = encode(&[&f], &[0, 1, 2]).unwrap();
        assert_eq!(x.n_cols, 2);
        assert_eq!(
            x.columns[0],
            ColumnDescriptor::Indicator {
                feature: "g".into(),
                level: "b".into()
            }
        );
        assert_eq!(x.data, vec![1.0, 1.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn numeric_uses_sample_sd() {
        let f = feature("v", FeatureColumn::Numeric(vec![1.0, 3.0]));
        let (_, x) = encode(&[&f], &[0, 1]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((x.row(0)[0] + h).abs() < 1e-15);
        assert!((x.row(1)[0] - h).abs() < 1e-15);
    }

    #[test]
    fn constant_column_centers_to_zero() {
        let f = feature("v", FeatureColumn::Numeric(vec![4.0; 3]));
        let (_, x) = encode(&[&f], &[0, 1, 2]).unwrap();
        assert!((0..3).all(|i| x.row(i)[0] == 0.0));
    }

    #[test]
    fn unseen_category_is_zero_block() {
        let train = feature("g", FeatureColumn::Categorical(vec!["a".into(), "b".into()]));
        let enc = Encoder::fit(&[&train], &[0, 1]).unwrap();
        let apply = feature("g", FeatureColumn::Categorical(vec!["c".into()]));
        let x = enc.transform(&[&apply]).unwrap();
        assert_eq!(x.row(0), &[0.0, 1.0]);
    }

    #[test]
    fn empty_feature_set_errors() {
        assert!(encode(&[], &[0]).is_err());
    }

    #[test]
    fn intercept_only_closed_form() {
        let y = [1, 1, 1, 0, 1, 1, 1, 0];
        let x = DesignMatrix::intercept_only(y.len());
        let m = fit_logistic(&x, &y, None, &FitOptions::default()).unwrap();
        assert!(m.convergence.converged);
        assert!((m.coefficients[0] - 3f64.ln()).abs() < 1e-8);
        let p = predict_proba(&m, &x).unwrap();
        assert!(p.iter().all(|v| (v - 0.75).abs() < 1e-8));
    }

    #[test]
    fn separable_set_classified() {
        let x = DesignMatrix::from_rows(&[
            vec![-2.0, 1.0],
            vec![-1.0, 1.0],
            vec![1.0, 1.0],
            vec![2.0, 1.0],
        ])
        .unwrap();
        let y = [0, 0, 1, 1];
        let m = fit_logistic(&x, &y, None, &FitOptions::default()).unwrap();
        let p = predict_proba(&m, &x).unwrap();
        let acc = p.iter().zip(&y).filter(|(p, y)| u8::from(**p >= 0.5) == **y).count();
        assert_eq!(acc, 4);
        assert!(m.coefficients.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn loss_trace_non_increasing() {
        let x = DesignMatrix::from_rows(&[
            vec![0.3, 1.0],
            vec![-1.2, 1.0],
            vec![0.8, 1.0],
            vec![1.5, 1.0],
            vec![-0.4, 1.0],
        ])
        .unwrap();
        let y = [1, 0, 0, 1, 1];
        let m = fit_logistic(&x, &y, None, &FitOptions::default()).unwrap();
        assert!(m
            .convergence
            .loss_trace
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs())));
    }

    #[test]
    fn doubling_weights_barely_moves_coefficients() {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![(i as f64 - 5.5) / 3.0, 1.0]).collect();
        let x = DesignMatrix::from_rows(&rows).unwrap();
        let y = [0, 0, 1, 0, 0, 1, 0, 1, 1, 0, 1, 1];
        let w1 = vec![1.0; 12];
        let w2 = vec![2.0; 12];
        let a = fit_logistic(&x, &y, Some(&w1), &FitOptions::default()).unwrap();
        let b = fit_logistic(&x, &y, Some(&w2), &FitOptions::default()).unwrap();
        for (p, q) in a.coefficients.iter().zip(&b.coefficients) {
            assert!((p - q).abs() <= 1e-4);
        }
    }

    #[test]
    fn predict_examples() {
        let x = DesignMatrix::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5]]).unwrap();
        let zero = LogisticModel {
            coefficients: vec![0.0, 0.0],
            columns: x.columns.clone(),
            convergence: Convergence {
                iterations: 0,
                gradient_norm: 0.0,
                converged: true,
                loss_trace: vec![],
            },
        };
        assert_eq!(predict_proba(&zero, &x).unwrap(), vec![0.5, 0.5]);
        let bad = DesignMatrix::intercept_only(2);
        assert!(predict_proba(&zero, &bad).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.1, 0.9], &[0, 1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.4, 0.4, 0.4], &[0, 1, 1]).unwrap(), 0.5);
        // pairs: (0.8>0.3) (0.8>0.5) (0.5>0.3) (0.5=0.5 tie) -> 3.5/4
        assert_eq!(auc(&[0.8, 0.3, 0.5, 0.5], &[1, 0, 1, 0]).unwrap(), 0.875);
        assert!(auc(&[0.1, 0.2], &[1, 1]).is_err());
    }
}
