//! Latent-class factor model for the causes, fit by EM.
//!
//! The working model is `P(z) * prod_k theta_k(a_k | z)` with an optional
//! covariate column treated as one more conditionally independent
//! measurement of the class. The fitted class posterior provides the
//! substitute-confounder reconstruction: `zhat` is the MAP class of a row,
//! and the soft posterior stays available for sensitivity use.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{draw_categorical, stream_rng};
use crate::table::{check_distribution, VarSpec};
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentClassModel {
    n_classes: usize,
    /// Class weights.
    pi: Vec<f64>,
    /// Per-cause conditionals `theta[k][class][level]`.
    theta: Vec<Vec<Vec<f64>>>,
    /// Optional covariate conditional `theta_x[class][level]`.
    theta_x: Option<Vec<Vec<f64>>>,
}

impl LatentClassModel {
    pub fn new(
        pi: Vec<f64>,
        theta: Vec<Vec<Vec<f64>>>,
        theta_x: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let n_classes = pi.len();
        if n_classes == 0 {
            return Err(Error::Shape("at least one class required".into()));
        }
        check_distribution(&pi, "pi")?;
        for (k, tbl) in theta.iter().enumerate() {
            if tbl.len() != n_classes {
                return Err(Error::Shape(format!("theta[{k}] needs one row per class")));
            }
            for (z, row) in tbl.iter().enumerate() {
                check_distribution(row, &format!("theta[{k}][{z}]"))?;
            }
        }
        if let Some(tx) = &theta_x {
            if tx.len() != n_classes {
                return Err(Error::Shape("theta_x needs one row per class".into()));
            }
            for (z, row) in tx.iter().enumerate() {
                check_distribution(row, &format!("theta_x[{z}]"))?;
            }
        }
        Ok(LatentClassModel {
            n_classes,
            pi,
            theta,
            theta_x,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn theta(&self) -> &[Vec<Vec<f64>>] {
        &self.theta
    }

    pub fn theta_x(&self) -> Option<&Vec<Vec<f64>>> {
        self.theta_x.as_ref()
    }

    pub fn n_causes(&self) -> usize {
        self.theta.len()
    }

    pub fn has_covariate(&self) -> bool {
        self.theta_x.is_some()
    }

    pub fn cause_cards(&self) -> Vec<usize> {
        self.theta.iter().map(|t| t[0].len()).collect()
    }

    fn check_row(&self, causes: &[usize], x: Option<usize>) -> Result<()> {
        if causes.len() != self.theta.len() {
            return Err(Error::Shape(format!(
                "row has {} causes, model has {}",
                causes.len(),
                self.theta.len()
            )));
        }
        match (&self.theta_x, x) {
            (Some(_), Some(_)) | (None, None) => Ok(()),
            (Some(_), None) => Err(Error::Shape("model has a covariate, row does not".into())),
            (None, Some(_)) => Err(Error::Shape("row has a covariate, model does not".into())),
        }
    }

    /// Unnormalized class weights `pi_z * prod_k theta_k(a_k | z)`.
    fn class_weights(&self, causes: &[usize], x: Option<usize>) -> Vec<f64> {
        (0..self.n_classes)
            .map(|z| {
                let mut w = self.pi[z];
                for (k, &level) in causes.iter().enumerate() {
                    w *= self.theta[k][z][level];
                }
                if let (Some(tx), Some(xl)) = (&self.theta_x, x) {
                    w *= tx[z][xl];
                }
                w
            })
            .collect()
    }

    /// Bayes posterior over classes for one row.
    pub fn posterior_z(&self, causes: &[usize], x: Option<usize>) -> Result<Vec<f64>> {
        self.check_row(causes, x)?;
        let mut w = self.class_weights(causes, x);
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroLikelihoodRow);
        }
        w.iter_mut().for_each(|v| *v /= total);
        Ok(w)
    }

    /// MAP class; ties break to the lowest class index.
    pub fn zhat(&self, causes: &[usize], x: Option<usize>) -> Result<usize> {
        let post = self.posterior_z(causes, x)?;
        let mut best = 0;
        for (z, &p) in post.iter().enumerate() {
            if p > post[best] {
                best = z;
            }
        }
        Ok(best)
    }

    /// Log-likelihood of integer-coded rows (causes first, covariate last
    /// when the model has one).
    pub fn log_likelihood(&self, rows: &[Vec<usize>]) -> Result<f64> {
        let mut ll = 0.0;
        for row in rows {
            let (causes, x) = self.split_row(row)?;
            let total: f64 = self.class_weights(causes, x).iter().sum();
            if total <= 0.0 {
                return Err(Error::ZeroLikelihoodRow);
            }
            ll += total.ln();
        }
        Ok(ll)
    }

    fn split_row<'a>(&self, row: &'a [usize]) -> Result<(&'a [usize], Option<usize>)> {
        let m = self.theta.len();
        let want = m + self.theta_x.is_some() as usize;
        if row.len() != want {
            return Err(Error::Shape(format!(
                "row has {} cells, model wants {want}",
                row.len()
            )));
        }
        let x = self.theta_x.as_ref().map(|_| row[m]);
        Ok((&row[..m], x))
    }

    /// Number of free parameters (for BIC).
    pub fn n_params(&self) -> usize {
        let mut p = self.n_classes - 1;
        for t in &self.theta {
            p += self.n_classes * (t[0].len() - 1);
        }
        if let Some(tx) = &self.theta_x {
            p += self.n_classes * (tx[0].len() - 1);
        }
        p
    }

    pub fn bic(&self, rows: &[Vec<usize>]) -> Result<f64> {
        let ll = self.log_likelihood(rows)?;
        Ok(-2.0 * ll + self.n_params() as f64 * (rows.len() as f64).ln())
    }

    /// Sample a synthetic dataset from the fitted model with the given
    /// column specs (causes first, covariate last when present).
    pub fn sample_dataset(&self, vars: Vec<VarSpec>, n: usize, seed: u64) -> Result<Dataset> {
        let want = self.theta.len() + self.theta_x.is_some() as usize;
        if vars.len() != want {
            return Err(Error::Shape(format!(
                "expected {want} column specs, got {}",
                vars.len()
            )));
        }
        let mut rows = Vec::with_capacity(n);
        for unit in 0..n {
            let mut rng = stream_rng(seed, unit as u64);
            let z = draw_categorical(&mut rng, &self.pi);
            let mut row = Vec::with_capacity(want);
            for t in &self.theta {
                row.push(draw_categorical(&mut rng, &t[z]));
            }
            if let Some(tx) = &self.theta_x {
                row.push(draw_categorical(&mut rng, &tx[z]));
            }
            rows.push(row);
        }
        Dataset::new(vars, rows)
    }

    /// Relabel classes by `perm` (new class i = old class perm[i]).
    pub fn permute_classes(&self, perm: &[usize]) -> Result<LatentClassModel> {
        if perm.len() != self.n_classes {
            return Err(Error::Shape("permutation arity mismatch".into()));
        }
        let pi = perm.iter().map(|&p| self.pi[p]).collect();
        let theta = self
            .theta
            .iter()
            .map(|t| perm.iter().map(|&p| t[p].clone()).collect())
            .collect();
        let theta_x = self
            .theta_x
            .as_ref()
            .map(|tx| perm.iter().map(|&p| tx[p].clone()).collect());
        LatentClassModel::new(pi, theta, theta_x)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// EM settings. Defaults: tol 1e-8 on absolute log-likelihood improvement,
/// 2000 iterations, theta rows floored at 1e-12 and renormalized each
/// M-step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmConfig {
    pub n_classes: usize,
    pub restarts: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub theta_floor: f64,
    pub seed: u64,
}

impl EmConfig {
    pub fn new(n_classes: usize, seed: u64) -> Self {
        EmConfig {
            n_classes,
            restarts: 8,
            tol: 1e-8,
            max_iter: 2000,
            theta_floor: 1e-12,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    /// Per-iteration log-likelihood of the winning restart; non-decreasing
    /// up to float noise (monotone EM).
    pub loglik_trace: Vec<f64>,
    pub n_restarts: usize,
    pub best_restart_index: usize,
    pub converged: bool,
    pub final_loglik: f64,
    pub theta_floor: f64,
}

/// Fit by EM with random-responsibility initialization, best of
/// `cfg.restarts` runs (ties to the lowest restart index). Restarts run in
/// parallel; the outcome is deterministic in `cfg.seed`.
pub fn em_fit(
    data: &Dataset,
    causes: &[&str],
    covariate: Option<&str>,
    cfg: &EmConfig,
) -> Result<(LatentClassModel, FitReport)> {
    if data.n_rows() == 0 {
        return Err(Error::Shape("cannot fit an empty dataset".into()));
    }
    if cfg.n_classes == 0 {
        return Err(Error::Shape("n_classes must be at least 1".into()));
    }
    if cfg.restarts == 0 {
        return Err(Error::Shape("at least one restart required".into()));
    }
    let mut names: Vec<&str> = causes.to_vec();
    if let Some(cv) = covariate {
        names.push(cv);
    }
    let sub = data.select(&names)?;
    let cards: Vec<usize> = sub.vars().iter().map(|v| v.card).collect();
    let rows = sub.rows();

    let runs: Vec<(LatentClassModel, FitReport)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|restart| run_restart(rows, &cards, causes.len(), cfg, restart))
        .collect();

    let mut best = 0;
    for i in 1..runs.len() {
        if runs[i].1.final_loglik > runs[best].1.final_loglik {
            best = i;
        }
    }
    let (model, mut report) = runs.into_iter().nth(best).expect("restarts nonempty");
    report.best_restart_index = best;
    report.n_restarts = cfg.restarts;
    Ok((model, report))
}

fn run_restart(
    rows: &[Vec<usize>],
    cards: &[usize],
    n_causes: usize,
    cfg: &EmConfig,
    restart: usize,
) -> (LatentClassModel, FitReport) {
    let n = rows.len();
    let l = cfg.n_classes;
    let mut rng = stream_rng(cfg.seed, restart as u64);

    // Dirichlet(1) responsibilities per row.
    let mut resp = vec![vec![0.0f64; l]; n];
    for r in resp.iter_mut() {
        if l == 1 {
            r[0] = 1.0;
        } else {
            let draw = rand_distr::multi::Dirichlet::new(&vec![1.0; l])
                .expect("valid Dirichlet")
                .sample(&mut rng);
            r.copy_from_slice(&draw);
        }
    }

    let mut params = m_step(rows, cards, n_causes, &resp, l, cfg.theta_floor);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut prev_ll = f64::NEG_INFINITY;
    for iter in 0..cfg.max_iter {
        let ll = e_step(rows, &params, &mut resp);
        trace.push(ll);
        if iter > 0 && ll - prev_ll < cfg.tol {
            converged = true;
            break;
        }
        prev_ll = ll;
        params = m_step(rows, cards, n_causes, &resp, l, cfg.theta_floor);
    }
    let final_loglik = *trace.last().expect("at least one iteration");
    let report = FitReport {
        loglik_trace: trace,
        n_restarts: 0,
        best_restart_index: 0,
        converged,
        final_loglik,
        theta_floor: cfg.theta_floor,
    };
    (params, report)
}

/// Log-space E-step; returns the data log-likelihood and fills `resp`.
fn e_step(rows: &[Vec<usize>], model: &LatentClassModel, resp: &mut [Vec<f64>]) -> f64 {
    let l = model.n_classes;
    let ln_pi: Vec<f64> = model.pi.iter().map(|&p| p.ln()).collect();
    let ln_theta: Vec<Vec<Vec<f64>>> = model
        .theta
        .iter()
        .map(|t| t.iter().map(|row| row.iter().map(|&p| p.ln()).collect()).collect())
        .collect();
    let ln_theta_x: Option<Vec<Vec<f64>>> = model
        .theta_x
        .as_ref()
        .map(|tx| tx.iter().map(|row| row.iter().map(|&p| p.ln()).collect()).collect());
    let m = model.theta.len();

    let mut ll = 0.0;
    for (row, r) in rows.iter().zip(resp.iter_mut()) {
        let mut mx = f64::NEG_INFINITY;
        for z in 0..l {
            let mut s = ln_pi[z];
            for k in 0..m {
                s += ln_theta[k][z][row[k]];
            }
            if let Some(ltx) = &ln_theta_x {
                s += ltx[z][row[m]];
            }
            r[z] = s;
            mx = mx.max(s);
        }
        let mut denom = 0.0;
        for v in r.iter_mut() {
            *v = (*v - mx).exp();
            denom += *v;
        }
        for v in r.iter_mut() {
            *v /= denom;
        }
        ll += mx + denom.ln();
    }
    ll
}

fn m_step(
    rows: &[Vec<usize>],
    cards: &[usize],
    n_causes: usize,
    resp: &[Vec<f64>],
    l: usize,
    floor: f64,
) -> LatentClassModel {
    let n = rows.len() as f64;
    let d = cards.len();
    let mut pi = vec![0.0f64; l];
    let mut counts: Vec<Vec<Vec<f64>>> = cards
        .iter()
        .map(|&c| vec![vec![0.0f64; c]; l])
        .collect();
    for (row, r) in rows.iter().zip(resp) {
        for z in 0..l {
            pi[z] += r[z];
            for (j, &level) in row.iter().enumerate() {
                counts[j][z][level] += r[z];
            }
        }
    }
    pi.iter_mut().for_each(|v| *v /= n);
    floor_and_renormalize(&mut pi, floor);
    let mut tables: Vec<Vec<Vec<f64>>> = Vec::with_capacity(d);
    for cj in counts.iter_mut() {
        for zrow in cj.iter_mut() {
            let total: f64 = zrow.iter().sum();
            if total > 0.0 {
                zrow.iter_mut().for_each(|v| *v /= total);
            } else {
                let u = 1.0 / zrow.len() as f64;
                zrow.iter_mut().for_each(|v| *v = u);
            }
            floor_and_renormalize(zrow, floor);
        }
        tables.push(cj.clone());
    }
    let theta_x = if d > n_causes {
        Some(tables.pop().expect("covariate table"))
    } else {
        None
    };
    LatentClassModel::new(pi, tables, theta_x).expect("M-step output is a valid model")
}

fn floor_and_renormalize(row: &mut [f64], floor: f64) {
    for v in row.iter_mut() {
        if *v < floor {
            *v = floor;
        }
    }
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= s);
}

/// Mean absolute pairwise Pearson correlation of the integer-coded columns;
/// the default residual-dependence statistic for predictive checks.
pub fn mean_abs_pairwise_correlation(data: &Dataset, cols: &[&str]) -> f64 {
    let columns: Vec<Vec<usize>> = cols
        .iter()
        .map(|c| data.column(c).expect("named column exists"))
        .collect();
    let n = data.n_rows() as f64;
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..columns.len() {
        for j in i + 1..columns.len() {
            let (xi, xj) = (&columns[i], &columns[j]);
            let mi = xi.iter().sum::<usize>() as f64 / n;
            let mj = xj.iter().sum::<usize>() as f64 / n;
            let mut cov = 0.0;
            let mut vi = 0.0;
            let mut vj = 0.0;
            for (&a, &b) in xi.iter().zip(xj) {
                let da = a as f64 - mi;
                let db = b as f64 - mj;
                cov += da * db;
                vi += da * da;
                vj += db * db;
            }
            if vi > 0.0 && vj > 0.0 {
                total += (cov / (vi * vj).sqrt()).abs();
            }
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}

/// Posterior-predictive-style p-value: the fraction of `n_rep` synthetic
/// datasets (drawn from the fitted model at the same size) whose statistic
/// is at least the observed one.
pub fn predictive_check(
    model: &LatentClassModel,
    data: &Dataset,
    causes: &[&str],
    covariate: Option<&str>,
    statistic: &(dyn Fn(&Dataset) -> f64 + Sync),
    n_rep: usize,
    seed: u64,
) -> Result<f64> {
    let mut names: Vec<&str> = causes.to_vec();
    if let Some(cv) = covariate {
        names.push(cv);
    }
    let sub = data.select(&names)?;
    let observed = statistic(&sub);
    let vars = sub.vars().to_vec();
    let n = sub.n_rows();
    let hits: usize = (0..n_rep)
        .into_par_iter()
        .map(|rep| {
            let synth = model
                .sample_dataset(vars.clone(), n, seed.wrapping_add(1).wrapping_mul(0x9E37_79B9).wrapping_add(rep as u64))
                .expect("model schema matches specs");
            usize::from(statistic(&synth) >= observed)
        })
        .sum();
    Ok(hits as f64 / n_rep as f64)
}
