//! Multiclass linear discriminant analysis used to fuse many raw features
//! into one confidence value per target.
//!
//! The projection solves `S_B v = λ S_W v` and keeps the top `n_classes - 1`
//! directions, scaled so the pooled within-class covariance becomes the
//! identity in the projected space. A sample's confidence for class `k` is
//! its discriminant margin `d_k - max_{j≠k} d_j` with
//! `d_k = -½‖z - m_k‖² + ln π_k`: positive for exactly the class LDA would
//! predict, negative for the rest.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::dataio::FeatureMatrix;
use crate::error::{Error, Result};

/// Relative ridge on the pooled within-class covariance.
const RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    /// `n_features × n_components`; projected vector is `projectionᵀ x`.
    pub projection: DMatrix<f64>,
    pub class_means: Vec<DVector<f64>>,
    pub priors: Vec<f64>,
}

pub fn fit_lda(train: &FeatureMatrix) -> Result<LdaModel> {
    let n_classes = train.n_classes;
    let dim = train.n_features();
    if n_classes < 2 {
        return Err(Error::Data("LDA needs at least two classes".into()));
    }
    if dim == 0 {
        return Err(Error::Data("LDA needs at least one feature".into()));
    }
    let counts = train.class_counts();
    if let Some(k) = counts.iter().position(|&c| c < 2) {
        return Err(Error::Data(format!(
            "class {} has {} training rows, LDA needs at least 2",
            k + 1,
            counts[k]
        )));
    }
    let total = train.rows.len() as f64;

    let mut means = vec![DVector::<f64>::zeros(dim); n_classes];
    for row in &train.rows {
        means[row.class] += DVector::from_column_slice(&row.values);
    }
    for (m, &c) in means.iter_mut().zip(&counts) {
        *m /= c as f64;
    }
    let grand = means
        .iter()
        .zip(&counts)
        .fold(DVector::zeros(dim), |acc, (m, &c)| acc + m * (c as f64 / total));

    let mut within = DMatrix::<f64>::zeros(dim, dim);
    for row in &train.rows {
        let d = DVector::from_column_slice(&row.values) - &means[row.class];
        within.ger(1.0, &d, &d, 1.0);
    }
    within /= total - n_classes as f64;
    let mut between = DMatrix::<f64>::zeros(dim, dim);
    for (m, &c) in means.iter().zip(&counts) {
        let d = m - &grand;
        between.ger(c as f64 / total, &d, &d, 1.0);
    }

    let scale = within.trace() / dim as f64;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Numeric(
            "within-class scatter is zero; features do not vary inside any class".into(),
        ));
    }
    let ridge = RIDGE * scale;
    warn_if_singular(&within, ridge);
    for i in 0..dim {
        within[(i, i)] += ridge;
    }

    let chol = within
        .cholesky()
        .ok_or_else(|| Error::Numeric("regularised within-class scatter is not positive definite".into()))?;
    let l = chol.l();
    let l_inv_b = l
        .solve_lower_triangular(&between)
        .ok_or_else(|| Error::Numeric("triangular solve failed in LDA".into()))?;
    let mut m = l
        .solve_lower_triangular(&l_inv_b.transpose())
        .ok_or_else(|| Error::Numeric("triangular solve failed in LDA".into()))?;
    m = (&m + m.transpose()) * 0.5;

    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let n_components = (n_classes - 1).min(dim);

    let lt = l.transpose();
    let mut projection = DMatrix::<f64>::zeros(dim, n_components);
    for (c, &idx) in order.iter().take(n_components).enumerate() {
        let u = eig.eigenvectors.column(idx).clone_owned();
        let mut v = lt
            .solve_upper_triangular(&u)
            .ok_or_else(|| Error::Numeric("triangular solve failed in LDA".into()))?;
        // fix the sign so that the largest-magnitude loading is positive
        let lead = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if lead < 0.0 {
            v.neg_mut();
        }
        projection.set_column(c, &v);
    }
    if projection.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("LDA projection is not finite".into()));
    }

    let class_means = means.iter().map(|m| projection.tr_mul(m)).collect();
    let priors = counts.iter().map(|&c| c as f64 / total).collect();
    Ok(LdaModel {
        projection,
        class_means,
        priors,
    })
}

fn warn_if_singular(within: &DMatrix<f64>, ridge: f64) {
    let eig = within.clone().symmetric_eigenvalues();
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min < ridge {
        log::warn!(
            "within-class scatter is (nearly) singular (smallest eigenvalue {min:e}); ridge {ridge:e} applied"
        );
    }
}

impl LdaModel {
    pub fn n_features(&self) -> usize {
        self.projection.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.class_means.len()
    }

    pub fn project(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.n_features() {
            return Err(Error::Data(format!(
                "feature vector has {} values, LDA was fit on {}",
                x.len(),
                self.n_features()
            )));
        }
        Ok(self.projection.tr_mul(&DVector::from_column_slice(x)))
    }

    /// `-½‖z - m_k‖² + ln π_k` for every class.
    pub fn discriminants(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.project(x)?;
        Ok(self
            .class_means
            .iter()
            .zip(&self.priors)
            .map(|(m, p)| -0.5 * (&z - m).norm_squared() + p.ln())
            .collect())
    }

    /// Index of the class with the largest discriminant.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let d = self.discriminants(x)?;
        Ok(argmax(&d))
    }

    /// Transforms a whole matrix into one confidence column per class.
    pub fn transform(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        let names = (1..=self.n_classes()).map(|k| format!("conf_{k}")).collect();
        let mut out = FeatureMatrix::new(names, matrix.n_classes);
        for row in &matrix.rows {
            out.push(confidence_features(self, &row.values)?, row.class, row.trial_id)?;
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let join = |v: &mut dyn Iterator<Item = f64>| {
            v.map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        };
        let mut out = String::from("lda\n");
        out.push_str(&format!(
            "dims,{},{},{}\nprojection\n",
            self.n_features(),
            self.projection.ncols(),
            self.n_classes()
        ));
        for r in 0..self.projection.nrows() {
            out.push_str(&join(&mut self.projection.row(r).iter().copied()));
            out.push('\n');
        }
        out.push_str("means\n");
        for m in &self.class_means {
            out.push_str(&join(&mut m.iter().copied()));
            out.push('\n');
        }
        out.push_str("priors\n");
        out.push_str(&join(&mut self.priors.iter().copied()));
        out.push('\n');
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut expect = |tag: &str| -> Result<(usize, &str)> {
            match lines.next() {
                Some((n, l)) if tag.is_empty() || l == tag => Ok((n, l)),
                Some((n, l)) => Err(Error::parse(path, n, 1, format!("expected \"{tag}\", found \"{l}\""))),
                None => Err(Error::parse(path, 0, 0, format!("unexpected end of file, expected \"{tag}\""))),
            }
        };
        let numbers = |line: usize, s: &str, want: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = s
                .split(',')
                .enumerate()
                .map(|(c, x)| {
                    x.trim().parse().map_err(|_| {
                        Error::parse(path, line, c + 1, format!("non-numeric value \"{x}\""))
                    })
                })
                .collect::<Result<_>>()?;
            if v.len() != want {
                return Err(Error::parse(path, line, 1, format!("expected {want} values, found {}", v.len())));
            }
            Ok(v)
        };

        expect("lda")?;
        let (n, dims) = expect("")?;
        let dims: Vec<&str> = dims.split(',').collect();
        if dims.len() != 4 || dims[0] != "dims" {
            return Err(Error::parse(path, n, 1, "expected \"dims,<features>,<components>,<classes>\""));
        }
        let parse_usize = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::parse(path, n, 1, format!("bad dimension \"{s}\"")))
        };
        let (d, r, k) = (parse_usize(dims[1])?, parse_usize(dims[2])?, parse_usize(dims[3])?);

        expect("projection")?;
        let mut projection = DMatrix::zeros(d, r);
        for i in 0..d {
            let (n, l) = expect("")?;
            for (j, v) in numbers(n, l, r)?.into_iter().enumerate() {
                projection[(i, j)] = v;
            }
        }
        expect("means")?;
        let mut class_means = Vec::with_capacity(k);
        for _ in 0..k {
            let (n, l) = expect("")?;
            class_means.push(DVector::from_vec(numbers(n, l, r)?));
        }
        expect("priors")?;
        let (n, l) = expect("")?;
        let priors = numbers(n, l, k)?;
        Ok(Self {
            projection,
            class_means,
            priors,
        })
    }
}

/// Discriminant margins `d_k - max_{j≠k} d_j`. Exactly the predicted class
/// has a non-negative entry (two zeros on a decision border).
pub fn confidence_features(model: &LdaModel, x: &[f64]) -> Result<Vec<f64>> {
    let d = model.discriminants(x)?;
    Ok((0..d.len())
        .map(|k| {
            let rival = d
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, v)| *v)
                .fold(f64::NEG_INFINITY, f64::max);
            d[k] - rival
        })
        .collect())
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
