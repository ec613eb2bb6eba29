//! Datasets: LIBSVM text I/O, the synthetic diagonal least-squares generator, Lipschitz
//! estimation and high-accuracy reference solutions.

use std::fmt::Write as _;
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{largest_eigenvalue_ata, CsrMatrix};
use crate::mapping::gradient_map;
use crate::problem::CompositeProblem;
use crate::prox::{soft_threshold, Penalty};
use crate::solvers::{comet_solve, fista_solve, Method, SolverConfig, Termination};

/// Sparse design matrix with one target (or label) per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    matrix: CsrMatrix,
    targets: Vec<f64>,
}

impl Dataset {
    /// Validates and builds a dataset from 0-based sparse rows.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>, targets: Vec<f64>) -> Result<Self> {
        if rows.len() != targets.len() {
            return Err(Error::InvalidInput(format!(
                "{} rows but {} targets",
                rows.len(),
                targets.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            let mut prev = None;
            for &(j, v) in row {
                if j >= cols {
                    return Err(Error::InvalidInput(format!(
                        "row {i}: column {j} out of range for {cols} columns"
                    )));
                }
                if prev.is_some_and(|p| p >= j) {
                    return Err(Error::InvalidInput(format!(
                        "row {i}: column indices must be strictly increasing"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "row {i}: non-finite value {v}"
                    )));
                }
                prev = Some(j);
            }
        }
        if let Some(t) = targets.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite target {t}")));
        }
        Ok(Self {
            matrix: CsrMatrix::from_rows(cols, &rows),
            targets,
        })
    }

    /// Square diagonal design.
    pub fn from_diagonal(diag: &[f64], targets: &[f64]) -> Self {
        assert_eq!(diag.len(), targets.len());
        Self {
            matrix: CsrMatrix::from_diagonal(diag),
            targets: targets.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Widens the feature space to `cols` columns.
    pub fn with_cols(&self, cols: usize) -> Result<Self> {
        if cols < self.cols() {
            return Err(Error::InvalidInput(format!(
                "cannot shrink {} columns to {cols}",
                self.cols()
            )));
        }
        Ok(Self {
            matrix: self.matrix.with_cols(cols),
            targets: self.targets.clone(),
        })
    }

    /// First `rows` rows and first `cols` feature columns.
    pub fn subset(&self, rows: usize, cols: usize) -> Self {
        let rows = rows.min(self.rows());
        Self {
            matrix: self.matrix.truncate(rows, cols),
            targets: self.targets[..rows].to_vec(),
        }
    }

    /// LIBSVM text, one line per row, 1-based indices.
    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.targets.iter().enumerate() {
            write!(out, "{t}").unwrap();
            for (j, v) in self.matrix.row(i) {
                write!(out, " {}:{v}", j + 1).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Parses LIBSVM text: `<label> <idx>:<val> ...` with strictly increasing 1-based indices.
///
/// Blank lines are skipped and `#` starts a comment. The feature count is the largest index
/// seen unless `n_features` asks for more.
pub fn parse_libsvm<R: BufRead>(reader: R, n_features: Option<usize>) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: lineno, msg };
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| err(format!("malformed label {label_tok:?}")))?;
        if !label.is_finite() {
            return Err(err(format!("non-finite label {label_tok:?}")));
        }
        let mut row = Vec::new();
        let mut prev = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("malformed feature {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| err(format!("malformed index in {tok:?}")))?;
            if idx == 0 {
                return Err(err(format!("indices are 1-based, got 0 in {tok:?}")));
            }
            if idx <= prev {
                return Err(err(format!(
                    "indices must be strictly increasing, {idx} follows {prev}"
                )));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| err(format!("malformed value in {tok:?}")))?;
            if !val.is_finite() {
                return Err(err(format!("non-finite value in {tok:?}")));
            }
            prev = idx;
            row.push((idx - 1, val));
        }
        max_index = max_index.max(prev);
        rows.push(row);
        targets.push(label);
    }
    let cols = match n_features {
        Some(n) if n < max_index => {
            return Err(Error::InvalidInput(format!(
                "feature count {n} is smaller than the largest index {max_index}"
            )))
        }
        Some(n) => n,
        None => max_index,
    };
    Dataset::from_rows(cols, rows, targets)
}

/// Convenience wrapper over [`parse_libsvm`] for in-memory text.
pub fn parse_libsvm_str(text: &str, n_features: Option<usize>) -> Result<Dataset> {
    parse_libsvm(text.as_bytes(), n_features)
}

/// What the generator drew, plus both readings of the conditioning it produces.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMetadata {
    pub m: usize,
    pub xi: u32,
    pub seed: u64,
    /// `max a_ii / min a_ii` over the drawn diagonal.
    pub diag_ratio: f64,
    /// Condition number as stated for the generator, `10^xi`.
    pub kappa_stated: f64,
    /// `10^-xi`, the strong convexity stated alongside `kappa_stated`.
    pub mu_stated: f64,
    /// Largest Hessian eigenvalue of the data term, `max a_ii^2`.
    pub hessian_max: f64,
    /// Smallest Hessian eigenvalue of the data term, `min a_ii^2` (down to `10^-2xi`).
    pub hessian_min: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticQuadratic {
    pub data: Dataset,
    pub diag: Vec<f64>,
    pub meta: GeneratorMetadata,
}

/// Diagonal `A` with entries drawn uniformly from `{10^0, ..., 10^-xi}` and targets uniform on
/// `[0, 1]`, using ChaCha8 seeded from `seed`.
pub fn gen_diagonal_quadratic(m: usize, xi: u32, seed: u64) -> Result<SyntheticQuadratic> {
    if m == 0 || xi == 0 {
        return Err(Error::InvalidInput(format!(
            "need m >= 1 and xi >= 1, got m = {m}, xi = {xi}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diag: Vec<f64> = (0..m)
        .map(|_| 10f64.powi(-(rng.random_range(0..=xi) as i32)))
        .collect();
    let targets: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let meta = GeneratorMetadata {
        m,
        xi,
        seed,
        diag_ratio: max / min,
        kappa_stated: 10f64.powi(xi as i32),
        mu_stated: 10f64.powi(-(xi as i32)),
        hessian_max: max * max,
        hessian_min: min * min,
    };
    Ok(SyntheticQuadratic {
        data: Dataset::from_diagonal(&diag, &targets),
        diag,
        meta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Quadratic,
    Logistic,
}

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 500;
const LIPSCHITZ_INFLATION: f64 = 1.01;
const LIPSCHITZ_FLOOR: f64 = 1e-12;

/// Smoothness constant of the regularized loss from power iteration on `A^T A`, inflated by 1%.
pub fn estimate_lipschitz(data: &Dataset, loss: Loss, lambda: f64) -> Result<f64> {
    if data.rows() == 0 {
        return Err(Error::InvalidInput("dataset has no rows".into()));
    }
    let top = largest_eigenvalue_ata(data.matrix(), POWER_TOL, POWER_MAX_ITERS).eigenvalue;
    if top == 0.0 {
        return Ok(lambda.max(LIPSCHITZ_FLOOR));
    }
    let base = match loss {
        Loss::Quadratic => top,
        Loss::Logistic => top / (4.0 * data.rows() as f64),
    };
    Ok((base + lambda) * LIPSCHITZ_INFLATION)
}

const REFERENCE_MAX_ITERS: usize = 2_000_000;

/// High-accuracy minimizer of `p`.
///
/// Diagonal least squares with an l1 (or no) penalty is solved coordinate-wise in closed form.
/// Anything else is solved by COMET with exact constants and confirmed by an independent FISTA
/// run whose objective must agree within `10 * tol`.
pub fn reference_solution(p: &CompositeProblem, tol: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if let Some(x) = closed_form(p) {
        return Ok(x);
    }
    let n = p.dim();
    let l = p.lipschitz();
    let mu = p.strong_convexity();
    let base = SolverConfig {
        method: Method::Comet,
        x0: vec![0.0; n],
        l0: l,
        gamma0: if mu > 0.0 { mu } else { l },
        mu,
        tol,
        max_iters: REFERENCE_MAX_ITERS,
        ..SolverConfig::default()
    };
    let comet = comet_solve(p, &base)?;
    if comet.termination != Termination::ToleranceMet {
        return Err(Error::ReferenceUnreliable(format!(
            "COMET stopped with {:?}",
            comet.termination
        )));
    }
    let fista = fista_solve(
        p,
        &SolverConfig {
            method: Method::Fista,
            ..base
        },
    )?;
    let fc = p.objective(&comet.x_final);
    let ff = p.objective(&fista.x_final);
    if (fc - ff).abs() > 10.0 * tol * fc.abs().max(1.0) {
        return Err(Error::ReferenceUnreliable(format!(
            "COMET objective {fc:e} and FISTA objective {ff:e} disagree"
        )));
    }
    let x = comet.x_final;
    let m = gradient_map(p, &x, l)?;
    if m.step_norm() > 10.0 * tol * (1.0 + crate::linalg::norm(&x)) {
        return Err(Error::ReferenceUnreliable(format!(
            "reduced gradient at the reference is {:e}",
            m.step_norm() * l
        )));
    }
    Ok(x)
}

fn closed_form(p: &CompositeProblem) -> Option<Vec<f64>> {
    let ls = p.smooth().diagonal_least_squares()?;
    let reg = p.regularizer();
    if reg.shift().is_some() {
        return None;
    }
    let thresh = match reg.penalty() {
        Penalty::Zero => 0.0,
        Penalty::L1 => reg.tau(),
        _ => return None,
    };
    Some(
        ls.diag
            .iter()
            .zip(ls.targets)
            .map(|(&a, &y)| {
                let denom = a * a + ls.lambda;
                if denom == 0.0 {
                    0.0
                } else {
                    soft_threshold(a * y, thresh) / denom
                }
            })
            .collect(),
    )
}
