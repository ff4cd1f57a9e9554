//! Sharp partial-identification bounds over the unconstrained outcome
//! copula.
//!
//! Fixing `A = a`, the data pin down the margins `P(Y | A=a)` and (through
//! the factor model) `P(Z | A=a)`, but not the joint of outcome and
//! confounder. Every joint `q(y, z)` in the Fréchet class of those margins
//! induces a candidate potential-outcome value
//! `sum_z P(z) * q(y, z) / P(z | A=a)`; minimizing and maximizing a linear
//! functional of it over the class is a linear program over a
//! transportation polytope. Strata with `P(z | A=a) = 0` leave the
//! conditional outcome entirely unconstrained and contribute a worst-case
//! interval instead (the Manski split) — the copula is undefined there and
//! no epsilon-smoothing is applied.
//!
//! Budgets bound the L1 distance between `q` and the independence product,
//! which keeps the feasible set a polytope: budget 0 collapses to the naive
//! value, budget 2 or more frees the copula entirely.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::latent::LatentClassModel;
use crate::scm::ScmSpec;
use crate::simplex::{solve, Constraint, ConstraintOp, Lp, LpSolution};
use crate::table::{assignments, strides, EPS_NORM};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A linear functional `sum_y g(y) P(Y(a) = y)` of the potential outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimand {
    pub description: String,
    pub weights: Vec<f64>,
}

impl Estimand {
    /// The cell probability `P(Y(a) = y)`.
    pub fn prob_of(y: usize, y_card: usize) -> Self {
        let mut weights = vec![0.0; y_card];
        weights[y] = 1.0;
        Estimand {
            description: format!("P(Y(a) = {y})"),
            weights,
        }
    }

    /// The mean of the integer-coded outcome.
    pub fn mean(y_card: usize) -> Self {
        Estimand {
            description: "E[Y(a)]".into(),
            weights: (0..y_card).map(|y| y as f64).collect(),
        }
    }
}

/// Margins and conditioning context of the Fréchet class for one `A = a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrechetPolytope {
    pub a: Vec<usize>,
    /// `P(Y | A = a)`.
    pub margin_y: Vec<f64>,
    /// `P(Z | A = a)`.
    pub margin_z: Vec<f64>,
}

impl FrechetPolytope {
    /// The independence product, always a member of the class.
    pub fn independence_point(&self) -> Vec<f64> {
        let nz = self.margin_z.len();
        let mut q = vec![0.0; self.margin_y.len() * nz];
        for (y, &my) in self.margin_y.iter().enumerate() {
            for (z, &mz) in self.margin_z.iter().enumerate() {
                q[y * nz + z] = my * mz;
            }
        }
        q
    }

    /// Margin feasibility of a candidate joint, within `tol` per margin cell.
    pub fn contains(&self, q: &[f64], tol: f64) -> bool {
        let ny = self.margin_y.len();
        let nz = self.margin_z.len();
        if q.len() != ny * nz || q.iter().any(|&v| v < -tol) {
            return false;
        }
        for (y, &my) in self.margin_y.iter().enumerate() {
            let s: f64 = (0..nz).map(|z| q[y * nz + z]).sum();
            if (s - my).abs() > tol {
                return false;
            }
        }
        for (z, &mz) in self.margin_z.iter().enumerate() {
            let s: f64 = (0..ny).map(|y| q[y * nz + z]).sum();
            if (s - mz).abs() > tol {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Solver {
    #[serde(rename = "simplex")]
    Simplex,
    #[serde(rename = "vertex-enum")]
    VertexEnum,
}

/// Sharp lower/upper bounds on the estimand with the joints attaining them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IgnoranceRegion {
    pub estimand: String,
    pub lower: f64,
    pub upper: f64,
    /// Optimizing joints, row-major over (y, z) with zeros on unsupported
    /// z strata.
    pub attained_q_lower: Vec<f64>,
    pub attained_q_upper: Vec<f64>,
    pub solver: Solver,
    /// Dependence budget; `None` for the unconstrained (full) region.
    pub budget: Option<f64>,
    /// Short content hash of the attained joints, for report rows.
    pub digest: String,
}

impl IgnoranceRegion {
    fn new(
        estimand: &Estimand,
        lower: f64,
        upper: f64,
        attained_q_lower: Vec<f64>,
        attained_q_upper: Vec<f64>,
        solver: Solver,
        budget: Option<f64>,
    ) -> Self {
        let mut h = Sha256::new();
        for v in attained_q_lower.iter().chain(&attained_q_upper) {
            h.update(v.to_le_bytes());
        }
        let digest = hex_prefix(&h.finalize(), 16);
        IgnoranceRegion {
            estimand: estimand.description.clone(),
            lower,
            upper,
            attained_q_lower,
            attained_q_upper,
            solver,
            budget,
            digest,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains_value(&self, v: f64, tol: f64) -> bool {
        v >= self.lower - tol && v <= self.upper + tol
    }
}

fn hex_prefix(bytes: &[u8], n: usize) -> String {
    bytes
        .iter()
        .take(n / 2)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn validate_margin(p: &[f64], what: &str) -> Result<Vec<f64>> {
    if p.is_empty() {
        return Err(Error::InfeasibleMargins(format!("{what} is empty")));
    }
    if p.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InfeasibleMargins(format!(
            "{what} has negative or non-finite entries"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > EPS_NORM {
        return Err(Error::InfeasibleMargins(format!("{what} sums to {sum}")));
    }
    // Exact renormalization keeps the LP right-hand sides consistent to
    // machine precision.
    Ok(p.iter().map(|&v| v / sum).collect())
}

/// On-support part of the estimand for a candidate joint `q` (row-major
/// over (y, z)): `sum_{y, z in supp} g(y) prior_z(z) q(y, z) / margin_z(z)`.
pub fn q_estimand_value(q: &[f64], weights: &[f64], prior_z: &[f64], margin_z: &[f64]) -> f64 {
    let nz = margin_z.len();
    let mut v = 0.0;
    for (y, &w) in weights.iter().enumerate() {
        for z in 0..nz {
            if margin_z[z] > 0.0 {
                v += w * prior_z[z] * q[y * nz + z] / margin_z[z];
            }
        }
    }
    v
}

/// Worst-case contribution of strata outside the margin support: their
/// conditional outcome is unconstrained, so they add
/// `prior(z) * [min g, max g]`.
fn manski_terms(weights: &[f64], prior_z: &[f64], margin_z: &[f64]) -> (f64, f64) {
    let gmin = weights.iter().cloned().fold(f64::INFINITY, f64::min);
    let gmax = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let off: f64 = prior_z
        .iter()
        .zip(margin_z)
        .filter(|(_, &mz)| mz == 0.0)
        .map(|(&pz, _)| pz)
        .sum();
    (off * gmin, off * gmax)
}

struct LpShape {
    ny: usize,
    nz: usize,
    support: Vec<usize>,
    /// Objective coefficient per (y, support-column) variable.
    coeffs: Vec<f64>,
}

fn lp_shape(weights: &[f64], prior_z: &[f64], margin_z: &[f64]) -> LpShape {
    let ny = weights.len();
    let nz = margin_z.len();
    let support: Vec<usize> = (0..nz).filter(|&z| margin_z[z] > 0.0).collect();
    let ns = support.len();
    let mut coeffs = vec![0.0; ny * ns];
    for y in 0..ny {
        for (j, &z) in support.iter().enumerate() {
            coeffs[y * ns + j] = weights[y] * prior_z[z] / margin_z[z];
        }
    }
    LpShape {
        ny,
        nz,
        support,
        coeffs,
    }
}

fn margin_constraints(shape: &LpShape, margin_y: &[f64], margin_z: &[f64], n_vars: usize) -> Vec<Constraint> {
    let ns = shape.support.len();
    let mut cons = Vec::with_capacity(shape.ny + ns);
    for (y, &my) in margin_y.iter().enumerate() {
        let mut c = vec![0.0; n_vars];
        for j in 0..ns {
            c[y * ns + j] = 1.0;
        }
        cons.push(Constraint {
            coeffs: c,
            op: ConstraintOp::Eq,
            rhs: my,
        });
    }
    for (j, &z) in shape.support.iter().enumerate() {
        let mut c = vec![0.0; n_vars];
        for y in 0..shape.ny {
            c[y * ns + j] = 1.0;
        }
        cons.push(Constraint {
            coeffs: c,
            op: ConstraintOp::Eq,
            rhs: margin_z[z],
        });
    }
    cons
}

fn embed_q(shape: &LpShape, x: &[f64]) -> Vec<f64> {
    let ns = shape.support.len();
    let mut q = vec![0.0; shape.ny * shape.nz];
    for y in 0..shape.ny {
        for (j, &z) in shape.support.iter().enumerate() {
            q[y * shape.nz + z] = x[y * ns + j].max(0.0);
        }
    }
    q
}

fn solve_pair(lp_min: &Lp) -> Result<(f64, Vec<f64>, f64, Vec<f64>)> {
    let lo = match solve(lp_min)? {
        LpSolution::Optimal { x, value } => (value, x),
        other => {
            return Err(Error::InfeasibleMargins(format!(
                "bound LP unexpectedly {other:?}"
            )))
        }
    };
    let mut lp_max = lp_min.clone();
    lp_max.objective.iter_mut().for_each(|c| *c = -*c);
    let hi = match solve(&lp_max)? {
        LpSolution::Optimal { x, value } => (-value, x),
        other => {
            return Err(Error::InfeasibleMargins(format!(
                "bound LP unexpectedly {other:?}"
            )))
        }
    };
    Ok((lo.0, lo.1, hi.0, hi.1))
}

/// Sharp bounds on the estimand over the full Fréchet class (no dependence
/// restriction). `margin_y = P(Y | A=a)`, `margin_z = P(Z | A=a)`,
/// `prior_z = P(Z)`; the support mask is read off `margin_z` directly.
pub fn copula_bounds(
    margin_y: &[f64],
    margin_z: &[f64],
    prior_z: &[f64],
    estimand: &Estimand,
    solver: Solver,
) -> Result<IgnoranceRegion> {
    let margin_y = validate_margin(margin_y, "margin_y")?;
    let margin_z = validate_margin(margin_z, "margin_z")?;
    let prior_z = validate_margin(prior_z, "prior_z")?;
    if estimand.weights.len() != margin_y.len() {
        return Err(Error::InfeasibleMargins(
            "estimand weights length != outcome cardinality".into(),
        ));
    }
    if prior_z.len() != margin_z.len() {
        return Err(Error::InfeasibleMargins("prior_z length != margin_z".into()));
    }
    let shape = lp_shape(&estimand.weights, &prior_z, &margin_z);
    let ns = shape.support.len();
    let n_vars = shape.ny * ns;
    let (mlo, mhi) = manski_terms(&estimand.weights, &prior_z, &margin_z);

    match solver {
        Solver::Simplex => {
            let lp = Lp {
                n_vars,
                objective: shape.coeffs.clone(),
                constraints: margin_constraints(&shape, &margin_y, &margin_z, n_vars),
            };
            let (lo, xlo, hi, xhi) = solve_pair(&lp)?;
            Ok(IgnoranceRegion::new(
                estimand,
                lo + mlo,
                hi + mhi,
                embed_q(&shape, &xlo),
                embed_q(&shape, &xhi),
                Solver::Simplex,
                None,
            ))
        }
        Solver::VertexEnum => {
            let sup_margin: Vec<f64> = shape.support.iter().map(|&z| margin_z[z]).collect();
            let vertices = crate::simplex::transportation_vertices(&margin_y, &sup_margin)?;
            let mut best_lo = (f64::INFINITY, 0usize);
            let mut best_hi = (f64::NEG_INFINITY, 0usize);
            for (i, v) in vertices.iter().enumerate() {
                let val: f64 = v.iter().zip(&shape.coeffs).map(|(a, b)| a * b).sum();
                if val < best_lo.0 {
                    best_lo = (val, i);
                }
                if val > best_hi.0 {
                    best_hi = (val, i);
                }
            }
            if vertices.is_empty() {
                return Err(Error::InfeasibleMargins("no vertices found".into()));
            }
            Ok(IgnoranceRegion::new(
                estimand,
                best_lo.0 + mlo,
                best_hi.0 + mhi,
                embed_q(&shape, &vertices[best_lo.1]),
                embed_q(&shape, &vertices[best_hi.1]),
                Solver::VertexEnum,
                None,
            ))
        }
    }
}

/// Bounds under a dependence budget: the L1 distance between the joint and
/// the independence product of the margins is at most `budget`
/// (`|q - m_y x m_z| <= aux` cellwise, `sum aux <= budget`). Budget 0 pins
/// the independence copula; budgets of 2 or more impose nothing.
pub fn calibrated_bounds(
    margin_y: &[f64],
    margin_z: &[f64],
    prior_z: &[f64],
    estimand: &Estimand,
    budget: f64,
) -> Result<IgnoranceRegion> {
    if budget < 0.0 || budget.is_nan() {
        return Err(Error::InfeasibleMargins(format!("negative budget {budget}")));
    }
    if budget.is_infinite() {
        let mut region = copula_bounds(margin_y, margin_z, prior_z, estimand, Solver::Simplex)?;
        region.budget = Some(budget);
        return Ok(region);
    }
    let margin_y = validate_margin(margin_y, "margin_y")?;
    let margin_z = validate_margin(margin_z, "margin_z")?;
    let prior_z = validate_margin(prior_z, "prior_z")?;
    if estimand.weights.len() != margin_y.len() {
        return Err(Error::InfeasibleMargins(
            "estimand weights length != outcome cardinality".into(),
        ));
    }
    if prior_z.len() != margin_z.len() {
        return Err(Error::InfeasibleMargins("prior_z length != margin_z".into()));
    }
    let shape = lp_shape(&estimand.weights, &prior_z, &margin_z);
    let ns = shape.support.len();
    let n_q = shape.ny * ns;
    // Variables: q cells then aux cells.
    let n_vars = 2 * n_q;
    let mut objective = vec![0.0; n_vars];
    objective[..n_q].copy_from_slice(&shape.coeffs);

    let mut constraints = margin_constraints(&shape, &margin_y, &margin_z, n_vars);
    for (y, &my) in margin_y.iter().enumerate() {
        for (j, &z) in shape.support.iter().enumerate() {
            let i = y * ns + j;
            let p = my * margin_z[z];
            let mut up = vec![0.0; n_vars];
            up[i] = 1.0;
            up[n_q + i] = -1.0;
            constraints.push(Constraint {
                coeffs: up,
                op: ConstraintOp::Le,
                rhs: p,
            });
            let mut dn = vec![0.0; n_vars];
            dn[i] = -1.0;
            dn[n_q + i] = -1.0;
            constraints.push(Constraint {
                coeffs: dn,
                op: ConstraintOp::Le,
                rhs: -p,
            });
        }
    }
    let mut total_aux = vec![0.0; n_vars];
    for v in total_aux.iter_mut().skip(n_q) {
        *v = 1.0;
    }
    constraints.push(Constraint {
        coeffs: total_aux,
        op: ConstraintOp::Le,
        rhs: budget,
    });

    let lp = Lp {
        n_vars,
        objective,
        constraints,
    };
    let (lo, xlo, hi, xhi) = solve_pair(&lp)?;
    let (mlo, mhi) = manski_terms(&estimand.weights, &prior_z, &margin_z);
    Ok(IgnoranceRegion::new(
        estimand,
        lo + mlo,
        hi + mhi,
        embed_q(&shape, &xlo[..n_q]),
        embed_q(&shape, &xhi[..n_q]),
        Solver::Simplex,
        Some(budget),
    ))
}

/// Per-stratum L1 deviation of the cause joint from its per-cause product,
/// weighted by stratum mass and maximized over the held-out cause: the
/// calibration anchor "the outcome is no more tied to the confounder than
/// any cause is to the rest, given zhat".
pub fn benchmark_budget_data(data: &Dataset, causes: &[&str], zhat: &[usize]) -> Result<f64> {
    if causes.len() < 2 {
        return Err(Error::Shape("benchmark needs at least two causes".into()));
    }
    if zhat.len() != data.n_rows() {
        return Err(Error::Shape("zhat column length must match the data".into()));
    }
    let cols: Vec<Vec<usize>> = causes
        .iter()
        .map(|c| data.column(c))
        .collect::<Result<_>>()?;
    let cards: Vec<usize> = causes
        .iter()
        .map(|c| Ok(data.vars()[data.var_index(c)?].card))
        .collect::<Result<_>>()?;
    let n = data.n_rows() as f64;

    let mut strata: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, &s) in zhat.iter().enumerate() {
        strata.entry(s).or_default().push(i);
    }

    let mut rho_star: f64 = 0.0;
    for k in 0..causes.len() {
        let rest: Vec<usize> = (0..causes.len()).filter(|&j| j != k).collect();
        let rest_cards: Vec<usize> = rest.iter().map(|&j| cards[j]).collect();
        let rest_strides = strides(&rest_cards);
        let rest_card: usize = rest_cards.iter().product::<usize>().max(1);
        let mut rho_k = 0.0;
        for rows in strata.values() {
            let w = rows.len() as f64 / n;
            let mut joint = vec![0.0f64; cards[k] * rest_card];
            let mut mk = vec![0.0f64; cards[k]];
            let mut mr = vec![0.0f64; rest_card];
            let ns = rows.len() as f64;
            for &i in rows {
                let a = cols[k][i];
                let r: usize = rest
                    .iter()
                    .zip(&rest_strides)
                    .map(|(&j, s)| cols[j][i] * s)
                    .sum();
                joint[a * rest_card + r] += 1.0 / ns;
                mk[a] += 1.0 / ns;
                mr[r] += 1.0 / ns;
            }
            let mut tv = 0.0;
            for a in 0..cards[k] {
                for r in 0..rest_card {
                    tv += (joint[a * rest_card + r] - mk[a] * mr[r]).abs();
                }
            }
            rho_k += w * tv;
        }
        rho_star = rho_star.max(rho_k);
    }
    Ok(rho_star)
}

/// Population version over the true confounder strata. The DAG makes the
/// causes exactly independent given Z, so this is zero up to float noise;
/// it is the degenerate reference point of the calibration scale.
pub fn benchmark_budget_true_z(scm: &ScmSpec) -> f64 {
    let cause_cards = scm.cause_cards();
    let mut rho_star: f64 = 0.0;
    for k in 0..scm.m() {
        let mut rho_k = 0.0;
        for (z, &pz) in scm.p_z().iter().enumerate() {
            if pz == 0.0 {
                continue;
            }
            let mut tv = 0.0;
            for a in assignments(&cause_cards) {
                let joint = scm.p_causes_given_z(&a, z);
                let held_out = scm.p_a_row(k, z)[a[k]];
                let rest: f64 = a
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != k)
                    .map(|(j, &l)| scm.p_a_row(j, z)[l])
                    .product();
                tv += (joint - held_out * rest).abs();
            }
            rho_k += pz * tv;
        }
        rho_star = rho_star.max(rho_k);
    }
    rho_star
}

/// Population benchmark over the strata of a deterministic reconstruction
/// `zhat(a, x)` (x ignored when the model has no covariate).
pub fn benchmark_budget_zhat(
    scm: &ScmSpec,
    zhat_fn: &dyn Fn(&[usize], Option<usize>) -> usize,
) -> f64 {
    let cause_cards = scm.cause_cards();
    let x_card = scm.x_spec().map_or(1, |x| x.card);
    // Joint weights P(a, x) and stratum labels.
    let mut cells: Vec<(Vec<usize>, usize, f64)> = Vec::new();
    for a in assignments(&cause_cards) {
        for x in 0..x_card {
            let mut w = 0.0;
            for (z, &pz) in scm.p_z().iter().enumerate() {
                let px = scm.p_x_row(z).map_or(1.0, |row| row[x]);
                w += pz * scm.p_causes_given_z(&a, z) * px;
            }
            let s = zhat_fn(&a, scm.x_spec().map(|_| x));
            cells.push((a.clone(), s, w));
        }
    }
    let labels: std::collections::BTreeSet<usize> = cells.iter().map(|c| c.1).collect();

    let mut rho_star: f64 = 0.0;
    for k in 0..scm.m() {
        let rest: Vec<usize> = (0..scm.m()).filter(|&j| j != k).collect();
        let rest_cards: Vec<usize> = rest.iter().map(|&j| cause_cards[j]).collect();
        let rest_strides = strides(&rest_cards);
        let rest_card: usize = rest_cards.iter().product::<usize>().max(1);
        let mut rho_k = 0.0;
        for &s in &labels {
            let mass: f64 = cells.iter().filter(|c| c.1 == s).map(|c| c.2).sum();
            if mass <= 0.0 {
                continue;
            }
            let mut joint = vec![0.0f64; cause_cards[k] * rest_card];
            let mut mk = vec![0.0f64; cause_cards[k]];
            let mut mr = vec![0.0f64; rest_card];
            for (a, label, w) in &cells {
                if *label != s {
                    continue;
                }
                let p = w / mass;
                let r: usize = rest
                    .iter()
                    .zip(&rest_strides)
                    .map(|(&j, st)| a[j] * st)
                    .sum();
                joint[a[k] * rest_card + r] += p;
                mk[a[k]] += p;
                mr[r] += p;
            }
            let mut tv = 0.0;
            for ak in 0..cause_cards[k] {
                for r in 0..rest_card {
                    tv += (joint[ak * rest_card + r] - mk[ak] * mr[r]).abs();
                }
            }
            rho_k += mass * tv;
        }
        rho_star = rho_star.max(rho_k);
    }
    rho_star
}

/// Ignorance regions per budget plus the calibration anchor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub estimand: String,
    pub a: Vec<usize>,
    pub margin_y: Vec<f64>,
    pub margin_z: Vec<f64>,
    pub prior_z: Vec<f64>,
    /// The independence-copula value `sum_y g(y) P(Y=y | A=a)`.
    pub naive_value: f64,
    /// Ground truth when the source is a known structural model.
    pub true_value: Option<f64>,
    /// Calibration anchor rho*: leave-one-out cause dependence given zhat.
    pub benchmark_rho: f64,
    /// One region per requested budget, ascending.
    pub rows: Vec<IgnoranceRegion>,
    /// The unconstrained region.
    pub full: IgnoranceRegion,
}

impl SensitivityReport {
    /// CSV rows: budget, lower, upper, solver, attained digest.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("budget,lower,upper,solver,attained_q_digest\n");
        for r in self.rows.iter() {
            let solver = match r.solver {
                Solver::Simplex => "simplex",
                Solver::VertexEnum => "vertex-enum",
            };
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{},{}\n",
                r.budget.map_or("inf".to_string(), |b| format!("{b}")),
                r.lower,
                r.upper,
                solver,
                r.digest
            ));
        }
        let solver = match self.full.solver {
            Solver::Simplex => "simplex",
            Solver::VertexEnum => "vertex-enum",
        };
        out.push_str(&format!(
            "inf,{:.12e},{:.12e},{},{}\n",
            self.full.lower, self.full.upper, solver, self.full.digest
        ));
        out
    }
}

fn naive_value(estimand: &Estimand, margin_y: &[f64]) -> f64 {
    estimand
        .weights
        .iter()
        .zip(margin_y)
        .map(|(w, m)| w * m)
        .sum()
}

/// Margins of the Fréchet class implied by a structural model at `A = a`.
pub fn scm_margins(scm: &ScmSpec, a: &[usize]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let cause_names = scm.cause_names();
    let y_name = scm.y_spec().name.clone();
    let z_name = scm.z_spec().name.clone();
    let full = scm.full_joint();
    let evidence: Vec<(&str, usize)> = cause_names
        .iter()
        .cloned()
        .zip(a.iter().cloned())
        .collect();
    let mut keep_ay: Vec<&str> = cause_names.clone();
    keep_ay.push(&y_name);
    let margin_y = full
        .marginalize(&keep_ay)?
        .condition(&evidence)?
        .marginalize(&[&y_name])?
        .probs()
        .to_vec();
    let mut keep_az: Vec<&str> = cause_names.clone();
    keep_az.push(&z_name);
    let margin_z = full
        .marginalize(&keep_az)?
        .condition(&evidence)?
        .marginalize(&[&z_name])?
        .probs()
        .to_vec();
    Ok((margin_y, margin_z, scm.p_z().to_vec()))
}

/// Report from a known structural model, using the true confounder as the
/// zhat source.
pub fn sensitivity_report_scm(
    scm: &ScmSpec,
    a: &[usize],
    estimand: &Estimand,
    budgets: &[f64],
) -> Result<SensitivityReport> {
    let (margin_y, margin_z, prior_z) = scm_margins(scm, a)?;
    let gt = scm.ground_truth_po(a)?;
    let true_value = Some(naive_value(estimand, &gt.dist));
    let benchmark_rho = benchmark_budget_true_z(scm);
    build_report(
        estimand, a, margin_y, margin_z, prior_z, true_value, benchmark_rho, budgets,
    )
}

/// Report from data and a fitted latent-class model: the outcome margin is
/// empirical among rows with `A = a`, the confounder margin and prior come
/// from the fitted posterior, and the benchmark uses MAP strata.
pub fn sensitivity_report_fitted(
    data: &Dataset,
    causes: &[&str],
    outcome: &str,
    model: &LatentClassModel,
    a: &[usize],
    estimand: &Estimand,
    budgets: &[f64],
) -> Result<SensitivityReport> {
    if model.has_covariate() {
        return Err(Error::Shape(
            "fitted sensitivity expects a cause-only model".into(),
        ));
    }
    let mut names: Vec<&str> = causes.to_vec();
    names.push(outcome);
    let sub = data.select(&names)?;
    let joint = sub.empirical_joint()?;
    let evidence: Vec<(&str, usize)> = causes.iter().cloned().zip(a.iter().cloned()).collect();
    let margin_y = joint
        .condition(&evidence)?
        .marginalize(&[outcome])?
        .probs()
        .to_vec();
    let margin_z = model.posterior_z(a, None)?;
    let prior_z = model.pi().to_vec();

    let cause_data = data.select(causes)?;
    let mut zhat = Vec::with_capacity(cause_data.n_rows());
    for row in cause_data.rows() {
        zhat.push(model.zhat(row, None)?);
    }
    let benchmark_rho = benchmark_budget_data(data, causes, &zhat)?;
    build_report(
        estimand, a, margin_y, margin_z, prior_z, None, benchmark_rho, budgets,
    )
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    estimand: &Estimand,
    a: &[usize],
    margin_y: Vec<f64>,
    margin_z: Vec<f64>,
    prior_z: Vec<f64>,
    true_value: Option<f64>,
    benchmark_rho: f64,
    budgets: &[f64],
) -> Result<SensitivityReport> {
    let mut sorted = budgets.to_vec();
    sorted.sort_by(|x, y| x.partial_cmp(y).expect("budgets must not be NaN"));
    let mut rows = Vec::with_capacity(sorted.len());
    for &b in &sorted {
        rows.push(calibrated_bounds(
            &margin_y, &margin_z, &prior_z, estimand, b,
        )?);
    }
    let full = copula_bounds(&margin_y, &margin_z, &prior_z, estimand, Solver::Simplex)?;
    Ok(SensitivityReport {
        estimand: estimand.description.clone(),
        a: a.to_vec(),
        naive_value: naive_value(estimand, &margin_y),
        true_value,
        benchmark_rho,
        margin_y,
        margin_z,
        prior_z,
        rows,
        full,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::scm::{make_confounded_pair, random_scm, ScmDims};
    use crate::table::VarSpec;
    use rand::RngExt;

    fn rand_margin(card: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
        let mut p: Vec<f64> = (0..card).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        p
    }

    #[test]
    fn degenerate_margin_z_collapses_to_naive() {
        let margin_y = vec![0.3, 0.7];
        let margin_z = vec![1.0, 0.0];
        let prior_z = vec![1.0, 0.0];
        let est = Estimand::prob_of(1, 2);
        let r = copula_bounds(&margin_y, &margin_z, &prior_z, &est, Solver::Simplex).unwrap();
        assert!((r.lower - 0.7).abs() < 1e-9);
        assert!((r.upper - 0.7).abs() < 1e-9);
    }

    #[test]
    fn uniform_2x2_with_matching_prior_is_a_point() {
        // prior equals the conditional margin, so the estimand is constant
        // over the whole polytope.
        let est = Estimand::prob_of(1, 2);
        let r = copula_bounds(
            &[0.5, 0.5],
            &[0.5, 0.5],
            &[0.5, 0.5],
            &est,
            Solver::Simplex,
        )
        .unwrap();
        assert!((r.lower - 0.5).abs() < 1e-9);
        assert!((r.upper - 0.5).abs() < 1e-9);
        let v = copula_bounds(
            &[0.5, 0.5],
            &[0.5, 0.5],
            &[0.5, 0.5],
            &est,
            Solver::VertexEnum,
        )
        .unwrap();
        assert!((v.lower - r.lower).abs() < 1e-9);
        assert!((v.upper - r.upper).abs() < 1e-9);
    }

    #[test]
    fn simplex_equals_vertex_enumeration_on_random_margins() {
        let mut rng = stream_rng(17, 0);
        for trial in 0..60 {
            let ny = 2 + trial % 2;
            let nz = 2 + (trial / 2) % 3;
            let margin_y = rand_margin(ny, &mut rng);
            let margin_z = rand_margin(nz, &mut rng);
            let prior_z = rand_margin(nz, &mut rng);
            let est = Estimand::prob_of(1, ny);
            let s = copula_bounds(&margin_y, &margin_z, &prior_z, &est, Solver::Simplex).unwrap();
            let v =
                copula_bounds(&margin_y, &margin_z, &prior_z, &est, Solver::VertexEnum).unwrap();
            assert!(
                (s.lower - v.lower).abs() < 1e-6 && (s.upper - v.upper).abs() < 1e-6,
                "simplex [{}, {}] vs vertices [{}, {}]",
                s.lower,
                s.upper,
                v.lower,
                v.upper
            );
        }
    }

    #[test]
    fn attained_joints_reproduce_their_bounds_and_are_vertices() {
        let mut rng = stream_rng(19, 0);
        for _ in 0..30 {
            let ny = 3;
            let nz = 3;
            let margin_y = rand_margin(ny, &mut rng);
            let margin_z = rand_margin(nz, &mut rng);
            let prior_z = rand_margin(nz, &mut rng);
            let est = Estimand::mean(ny);
            let r = copula_bounds(&margin_y, &margin_z, &prior_z, &est, Solver::Simplex).unwrap();
            let poly = FrechetPolytope {
                a: vec![],
                margin_y: margin_y.clone(),
                margin_z: margin_z.clone(),
            };
            assert!(poly.contains(&r.attained_q_lower, 1e-9));
            assert!(poly.contains(&r.attained_q_upper, 1e-9));
            let vlo = q_estimand_value(&r.attained_q_lower, &est.weights, &prior_z, &margin_z);
            let vhi = q_estimand_value(&r.attained_q_upper, &est.weights, &prior_z, &margin_z);
            assert!((vlo - r.lower).abs() < 1e-9);
            assert!((vhi - r.upper).abs() < 1e-9);
            // Transportation-vertex sparsity: at most ny + nz - 1 nonzeros.
            for q in [&r.attained_q_lower, &r.attained_q_upper] {
                let nnz = q.iter().filter(|&&v| v > 1e-9).count();
                assert!(nnz < ny + nz, "nnz = {nnz}");
            }
        }
    }

    #[test]
    fn manski_split_covers_unsupported_strata() {
        // z = 2 is impossible given A = a but carries prior mass 0.3: the
        // bounds widen by 0.3 * [0, 1] for a cell-probability estimand.
        let margin_y = vec![0.4, 0.6];
        let margin_z = vec![0.5, 0.5, 0.0];
        let prior_z = vec![0.35, 0.35, 0.3];
        let est = Estimand::prob_of(1, 2);
        let r = copula_bounds(&margin_y, &margin_z, &prior_z, &est, Solver::Simplex).unwrap();
        // On-support part ranges over [0.7 * something]; the Manski part
        // adds exactly [0, 0.3].
        let tight = copula_bounds(
            &margin_y,
            &[0.5, 0.5],
            &[0.5, 0.5],
            &est,
            Solver::Simplex,
        )
        .unwrap();
        assert!((r.upper - r.lower) > (tight.upper - tight.lower));
        assert!(r.upper <= 1.0 + 1e-9);
        assert!(r.lower >= -1e-9);
    }

    #[test]
    fn budget_zero_is_the_naive_point() {
        let mut rng = stream_rng(23, 0);
        for _ in 0..20 {
            let margin_y = rand_margin(3, &mut rng);
            let margin_z = rand_margin(2, &mut rng);
            let prior_z = rand_margin(2, &mut rng);
            let est = Estimand::prob_of(2, 3);
            let r = calibrated_bounds(&margin_y, &margin_z, &prior_z, &est, 0.0).unwrap();
            let naive: f64 = est
                .weights
                .iter()
                .zip(&margin_y)
                .map(|(w, m)| w * m)
                .sum();
            assert!((r.lower - naive).abs() < 1e-8, "{} vs {naive}", r.lower);
            assert!((r.upper - naive).abs() < 1e-8);
        }
    }

    #[test]
    fn huge_budget_matches_unconstrained_bounds() {
        let mut rng = stream_rng(29, 0);
        for _ in 0..20 {
            let margin_y = rand_margin(2, &mut rng);
            let margin_z = rand_margin(3, &mut rng);
            let prior_z = rand_margin(3, &mut rng);
            let est = Estimand::prob_of(1, 2);
            let full =
                copula_bounds(&margin_y, &margin_z, &prior_z, &est, Solver::Simplex).unwrap();
            let capped = calibrated_bounds(&margin_y, &margin_z, &prior_z, &est, 2.0).unwrap();
            assert!((full.lower - capped.lower).abs() < 1e-8);
            assert!((full.upper - capped.upper).abs() < 1e-8);
            let inf = calibrated_bounds(&margin_y, &margin_z, &prior_z, &est, f64::INFINITY)
                .unwrap();
            assert!((full.lower - inf.lower).abs() < 1e-12);
        }
    }

    #[test]
    fn width_is_monotone_in_budget() {
        let mut rng = stream_rng(37, 0);
        for _ in 0..10 {
            let margin_y = rand_margin(2, &mut rng);
            let margin_z = rand_margin(3, &mut rng);
            let prior_z = rand_margin(3, &mut rng);
            let est = Estimand::prob_of(1, 2);
            let mut prev = -1.0;
            for i in 0..=10 {
                let b = 0.2 * i as f64;
                let r = calibrated_bounds(&margin_y, &margin_z, &prior_z, &est, b).unwrap();
                assert!(
                    r.width() >= prev - 1e-9,
                    "width shrank: {} -> {} at budget {b}",
                    prev,
                    r.width()
                );
                prev = r.width();
            }
        }
    }

    #[test]
    fn lp_bounds_are_sharp_against_grid_search() {
        // Vertices + IPF-projected Dirichlet draws never escape the region,
        // and the extremes are attained at vertices.
        let mut rng = stream_rng(41, 0);
        let margin_y = rand_margin(3, &mut rng);
        let margin_z = rand_margin(3, &mut rng);
        let prior_z = rand_margin(3, &mut rng);
        let est = Estimand::mean(3);
        let r = copula_bounds(&margin_y, &margin_z, &prior_z, &est, Solver::Simplex).unwrap();

        let mut grid_lo = f64::INFINITY;
        let mut grid_hi = f64::NEG_INFINITY;
        for v in crate::simplex::transportation_vertices(&margin_y, &margin_z).unwrap() {
            let val = q_estimand_value(&v, &est.weights, &prior_z, &margin_z);
            grid_lo = grid_lo.min(val);
            grid_hi = grid_hi.max(val);
        }
        for _ in 0..10_000 {
            // Positive start, then iterative proportional fitting onto the
            // margins.
            let mut q: Vec<f64> = (0..9).map(|_| rng.random_range(0.01..1.0)).collect();
            for _ in 0..60 {
                for y in 0..3 {
                    let s: f64 = (0..3).map(|z| q[y * 3 + z]).sum();
                    for z in 0..3 {
                        q[y * 3 + z] *= margin_y[y] / s;
                    }
                }
                for z in 0..3 {
                    let s: f64 = (0..3).map(|y| q[y * 3 + z]).sum();
                    for y in 0..3 {
                        q[y * 3 + z] *= margin_z[z] / s;
                    }
                }
            }
            let val = q_estimand_value(&q, &est.weights, &prior_z, &margin_z);
            grid_lo = grid_lo.min(val);
            grid_hi = grid_hi.max(val);
        }
        assert!((grid_lo - r.lower).abs() < 1e-6, "{grid_lo} vs {}", r.lower);
        assert!((grid_hi - r.upper).abs() < 1e-6, "{grid_hi} vs {}", r.upper);
    }

    #[test]
    fn region_contains_truth_and_naive_for_random_scms() {
        for seed in 0..40 {
            let dims = ScmDims {
                z_card: 3,
                x_card: None,
                cause_cards: vec![2, 2],
                y_card: 2,
            };
            let mut rng = stream_rng(6000 + seed, 0);
            let scm = random_scm(&dims, 1.0, &mut rng);
            let a = [1, 0];
            let est = Estimand::prob_of(1, 2);
            let (my, mz, pz) = scm_margins(&scm, &a).unwrap();
            let r = copula_bounds(&my, &mz, &pz, &est, Solver::Simplex).unwrap();
            let gt = scm.ground_truth_po(&a).unwrap();
            assert!(
                r.contains_value(gt.dist[1], 1e-9),
                "truth {} outside [{}, {}] (seed {seed})",
                gt.dist[1],
                r.lower,
                r.upper
            );
            let naive: f64 = est.weights.iter().zip(&my).map(|(w, m)| w * m).sum();
            assert!(r.contains_value(naive, 1e-9));
        }
    }

    #[test]
    fn benchmark_zero_when_causes_independent_given_strata() {
        let dims = ScmDims {
            z_card: 2,
            x_card: None,
            cause_cards: vec![2, 2, 2],
            y_card: 2,
        };
        let mut rng = stream_rng(47, 0);
        let scm = random_scm(&dims, 1.0, &mut rng);
        let rho = benchmark_budget_true_z(&scm);
        assert!(rho < 1e-12, "rho = {rho}");
    }

    #[test]
    fn benchmark_of_copied_causes_matches_direct_tv() {
        // Single stratum, a1 == a2 uniform binary, a3 independent fair coin.
        let mut rows = Vec::new();
        for i in 0..400usize {
            let v = (i / 2) % 2;
            rows.push(vec![v, v, i % 2]);
        }
        let data = Dataset::new(
            vec![
                VarSpec::new("a1", 2),
                VarSpec::new("a2", 2),
                VarSpec::new("a3", 2),
            ],
            rows,
        )
        .unwrap();
        let zhat = vec![0usize; 400];
        let rho = benchmark_budget_data(&data, &["a1", "a2", "a3"], &zhat).unwrap();
        // Oracle: comonotone uniform binary pair against its independence
        // product. Joint puts 1/2 on each diagonal cell of the (a1, rest)
        // table; the product puts 1/4 everywhere on the matching slice.
        // With rest = (a2, a3) uniform over 4 levels the direct sum is 1.0.
        let mut joint = [0.0f64; 8];
        let mut m1 = [0.0f64; 2];
        let mut mr = [0.0f64; 4];
        for row in data.rows() {
            let r = row[1] * 2 + row[2];
            joint[row[0] * 4 + r] += 1.0 / 400.0;
            m1[row[0]] += 1.0 / 400.0;
            mr[r] += 1.0 / 400.0;
        }
        let mut tv = 0.0;
        for a in 0..2 {
            for r in 0..4 {
                tv += (joint[a * 4 + r] - m1[a] * mr[r]).abs();
            }
        }
        assert!((rho - tv).abs() < 1e-12);
        assert!((rho - 1.0).abs() < 1e-9, "rho = {rho}");
    }

    #[test]
    fn population_zhat_benchmark_tracks_stratum_quality() {
        // Exact confounder recovery through the covariate: zero residual
        // dependence. A constant zhat on the same model leaves all of it.
        let dims = ScmDims {
            z_card: 2,
            x_card: Some(2),
            cause_cards: vec![2, 2],
            y_card: 2,
        };
        let mut rng = stream_rng(59, 0);
        let base = random_scm(&dims, 0.7, &mut rng);
        let ident = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let scm = crate::scm::ScmSpec::new(
            base.z_spec().clone(),
            base.x_spec().cloned(),
            base.cause_specs().to_vec(),
            base.y_spec().clone(),
            base.p_z().to_vec(),
            Some(ident),
            (0..2).map(|k| (0..2).map(|z| base.p_a_row(k, z).to_vec()).collect()).collect(),
            (0..4).map(|ai| (0..2).map(|z| base.p_y_row(ai, z).to_vec()).collect()).collect(),
        )
        .unwrap();
        let exact = benchmark_budget_zhat(&scm, &|_a, x| x.unwrap());
        assert!(exact < 1e-12, "exact recovery rho = {exact}");
        let trivial = benchmark_budget_zhat(&scm, &|_a, _x| 0);
        assert!(trivial > 1e-3, "constant zhat rho = {trivial}");
    }

    #[test]
    fn benchmark_invariant_to_level_relabeling() {
        let dims = ScmDims {
            z_card: 2,
            x_card: None,
            cause_cards: vec![2, 2],
            y_card: 2,
        };
        let mut rng = stream_rng(53, 0);
        let scm = random_scm(&dims, 1.0, &mut rng);
        let s = scm.sample(600, 55);
        let data = s.data;
        let zhat = vec![0usize; 600];
        let rho = benchmark_budget_data(&data, &["a1", "a2"], &zhat).unwrap();
        // Relabel a1's levels.
        let flipped_rows: Vec<Vec<usize>> = data
            .rows()
            .iter()
            .map(|r| vec![1 - r[0], r[1], r[2]])
            .collect();
        let flipped = Dataset::new(data.vars().to_vec(), flipped_rows).unwrap();
        let rho2 = benchmark_budget_data(&flipped, &["a1", "a2"], &zhat).unwrap();
        assert!((rho - rho2).abs() < 1e-12);
    }

    #[test]
    fn scm_report_contains_truth_and_serializes() {
        let scm = ScmSpec::demo_confounded_template();
        let est = Estimand::prob_of(1, 2);
        let report =
            sensitivity_report_scm(&scm, &[1, 1], &est, &[0.0, 0.1, 0.5, 1.0]).unwrap();
        let truth = report.true_value.unwrap();
        assert!(report.full.contains_value(truth, 1e-9));
        assert!(report.full.contains_value(report.naive_value, 1e-9));
        // Budget-0 row collapses to the naive value.
        assert!((report.rows[0].lower - report.naive_value).abs() < 1e-8);
        assert!((report.rows[0].upper - report.naive_value).abs() < 1e-8);
        // True-Z benchmark is the degenerate reference.
        assert!(report.benchmark_rho < 1e-12);
        let json = serde_json::to_string(&report).unwrap();
        let back: SensitivityReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.naive_value, report.naive_value);
        assert_eq!(back.rows.len(), report.rows.len());
        let csv = report.to_csv_string();
        assert!(csv.lines().count() == report.rows.len() + 2);
    }

    #[test]
    fn witness_pair_truths_lie_in_the_shared_region() {
        let template = ScmSpec::demo_confounded_template();
        let pair = make_confounded_pair(&template, &[1, 1]).unwrap();
        let est = Estimand::prob_of(1, 2);
        // Identical observables: margins from either model agree.
        let (my1, mz1, pz1) = scm_margins(&pair.original, &[1, 1]).unwrap();
        let r = copula_bounds(&my1, &mz1, &pz1, &est, Solver::Simplex).unwrap();
        let t1 = pair.original.ground_truth_po(&[1, 1]).unwrap().dist[1];
        let t2 = pair.alternative.ground_truth_po(&[1, 1]).unwrap().dist[1];
        assert!(r.contains_value(t1, 1e-9), "t1 {t1} in [{}, {}]", r.lower, r.upper);
        assert!(r.contains_value(t2, 1e-9));
        assert!((t1 - t2).abs() > 0.02);
    }

    #[test]
    fn unconfounded_scm_report_truth_is_naive() {
        // Outcome rows free of z: the naive value is the truth and stays
        // inside every region.
        let row = vec![vec![0.35, 0.65], vec![0.35, 0.65]];
        let scm = ScmSpec::new(
            VarSpec::new("z", 2),
            None,
            vec![VarSpec::new("a1", 2), VarSpec::new("a2", 2)],
            VarSpec::new("y", 2),
            vec![0.5, 0.5],
            None,
            vec![
                vec![vec![0.7, 0.3], vec![0.3, 0.7]],
                vec![vec![0.6, 0.4], vec![0.4, 0.6]],
            ],
            vec![row.clone(), row.clone(), row.clone(), row],
        )
        .unwrap();
        let est = Estimand::prob_of(1, 2);
        let report = sensitivity_report_scm(&scm, &[0, 1], &est, &[0.0]).unwrap();
        let truth = report.true_value.unwrap();
        assert!((truth - report.naive_value).abs() < 1e-12);
        assert!(report.full.contains_value(truth, 1e-9));
    }

    #[test]
    fn invalid_margins_are_rejected() {
        let est = Estimand::prob_of(0, 2);
        assert!(matches!(
            copula_bounds(&[0.5, 0.6], &[0.5, 0.5], &[0.5, 0.5], &est, Solver::Simplex),
            Err(Error::InfeasibleMargins(_))
        ));
        assert!(matches!(
            calibrated_bounds(&[0.5, 0.5], &[0.5, 0.5], &[0.5, 0.5], &est, -0.1),
            Err(Error::InfeasibleMargins(_))
        ));
    }
}
