//! Structural causal models with a single latent confounder.
//!
//! The DAG is fixed: a latent class `Z` feeds every cause `A^(k)`, the
//! optional covariate `X`, and the outcome `Y`; the causes feed `Y`; there
//! are no cause-to-cause or cause-to-covariate edges. Causes are therefore
//! mutually independent given `Z`, and `X` is independent of the causes
//! given `Z`, by construction.
//!
//! Ground-truth potential outcomes are computed from the structural tables
//! directly, never through observed conditionals, so they remain correct
//! even where the observed data could not identify them. The module also
//! builds the constructive non-identification witness: a pair of models
//! with identical observables and different causal truths, obtained by
//! swapping the outcome copula for the independence copula.

use crate::copula::{compose_joint, decompose_joint, CopulaGrid};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{draw_categorical, stream_rng};
use crate::table::{assignments, check_distribution, strides, total_variation, JointTable, VarSpec};
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

/// Distribution of a potential outcome `Y(a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialOutcomeDist {
    /// The intervened cause assignment (full or focal, per context).
    pub a: Vec<usize>,
    /// Distribution over outcome levels.
    pub dist: Vec<f64>,
}

#[derive(Deserialize)]
struct RawScm {
    z: VarSpec,
    #[serde(default)]
    x: Option<VarSpec>,
    causes: Vec<VarSpec>,
    y: VarSpec,
    p_z: Vec<f64>,
    #[serde(default)]
    p_x_given_z: Option<Vec<Vec<f64>>>,
    p_a_given_z: Vec<Vec<Vec<f64>>>,
    p_y_given_az: Vec<Vec<Vec<f64>>>,
}

/// A fully specified structural model on the fixed DAG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScm")]
pub struct ScmSpec {
    z: VarSpec,
    x: Option<VarSpec>,
    causes: Vec<VarSpec>,
    y: VarSpec,
    /// P(Z = z).
    p_z: Vec<f64>,
    /// P(X = x | Z = z), indexed `[z][x]`.
    p_x_given_z: Option<Vec<Vec<f64>>>,
    /// P(A^(k) = a | Z = z), indexed `[k][z][a]`.
    p_a_given_z: Vec<Vec<Vec<f64>>>,
    /// P(Y = y | A = a, Z = z), indexed `[cause joint index][z][y]`.
    p_y_given_az: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<RawScm> for ScmSpec {
    type Error = Error;
    fn try_from(r: RawScm) -> Result<Self> {
        ScmSpec::new(
            r.z,
            r.x,
            r.causes,
            r.y,
            r.p_z,
            r.p_x_given_z,
            r.p_a_given_z,
            r.p_y_given_az,
        )
    }
}

impl ScmSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        z: VarSpec,
        x: Option<VarSpec>,
        causes: Vec<VarSpec>,
        y: VarSpec,
        p_z: Vec<f64>,
        p_x_given_z: Option<Vec<Vec<f64>>>,
        p_a_given_z: Vec<Vec<Vec<f64>>>,
        p_y_given_az: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if causes.len() < 2 {
            return Err(Error::Shape("at least two causes are required".into()));
        }
        let mut names: Vec<&str> = vec![z.name.as_str(), y.name.as_str()];
        if let Some(xs) = &x {
            names.push(xs.name.as_str());
        }
        names.extend(causes.iter().map(|c| c.name.as_str()));
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::Shape(format!("duplicate variable name `{n}`")));
            }
        }
        if p_z.len() != z.card {
            return Err(Error::Shape("p_z length does not match z cardinality".into()));
        }
        check_distribution(&p_z, "p_z")?;
        match (&x, &p_x_given_z) {
            (Some(xs), Some(tbl)) => {
                if tbl.len() != z.card {
                    return Err(Error::Shape("p_x_given_z needs one row per z level".into()));
                }
                for (zi, row) in tbl.iter().enumerate() {
                    if row.len() != xs.card {
                        return Err(Error::Shape(format!("p_x_given_z row {zi} has wrong length")));
                    }
                    check_distribution(row, &format!("p_x_given_z[{zi}]"))?;
                }
            }
            (None, None) => {}
            _ => {
                return Err(Error::Shape(
                    "x spec and p_x_given_z must be provided together".into(),
                ))
            }
        }
        if p_a_given_z.len() != causes.len() {
            return Err(Error::Shape("p_a_given_z needs one table per cause".into()));
        }
        for (k, tbl) in p_a_given_z.iter().enumerate() {
            if tbl.len() != z.card {
                return Err(Error::Shape(format!("p_a_given_z[{k}] needs one row per z level")));
            }
            for (zi, row) in tbl.iter().enumerate() {
                if row.len() != causes[k].card {
                    return Err(Error::Shape(format!("p_a_given_z[{k}][{zi}] has wrong length")));
                }
                check_distribution(row, &format!("p_a_given_z[{k}][{zi}]"))?;
            }
        }
        let n_assignments: usize = causes.iter().map(|c| c.card).product();
        if p_y_given_az.len() != n_assignments {
            return Err(Error::Shape(format!(
                "p_y_given_az needs {n_assignments} cause-assignment blocks"
            )));
        }
        for (ai, blk) in p_y_given_az.iter().enumerate() {
            if blk.len() != z.card {
                return Err(Error::Shape(format!("p_y_given_az[{ai}] needs one row per z level")));
            }
            for (zi, row) in blk.iter().enumerate() {
                if row.len() != y.card {
                    return Err(Error::Shape(format!("p_y_given_az[{ai}][{zi}] has wrong length")));
                }
                check_distribution(row, &format!("p_y_given_az[{ai}][{zi}]"))?;
            }
        }
        Ok(ScmSpec {
            z,
            x,
            causes,
            y,
            p_z,
            p_x_given_z,
            p_a_given_z,
            p_y_given_az,
        })
    }

    pub fn z_spec(&self) -> &VarSpec {
        &self.z
    }

    pub fn x_spec(&self) -> Option<&VarSpec> {
        self.x.as_ref()
    }

    pub fn cause_specs(&self) -> &[VarSpec] {
        &self.causes
    }

    pub fn y_spec(&self) -> &VarSpec {
        &self.y
    }

    pub fn p_z(&self) -> &[f64] {
        &self.p_z
    }

    pub fn p_a_row(&self, k: usize, z: usize) -> &[f64] {
        &self.p_a_given_z[k][z]
    }

    pub fn p_x_row(&self, z: usize) -> Option<&[f64]> {
        self.p_x_given_z.as_ref().map(|t| t[z].as_slice())
    }

    pub fn p_y_row(&self, a_index: usize, z: usize) -> &[f64] {
        &self.p_y_given_az[a_index][z]
    }

    pub fn m(&self) -> usize {
        self.causes.len()
    }

    pub fn cause_cards(&self) -> Vec<usize> {
        self.causes.iter().map(|c| c.card).collect()
    }

    pub fn cause_names(&self) -> Vec<&str> {
        self.causes.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn n_cause_assignments(&self) -> usize {
        self.causes.iter().map(|c| c.card).product()
    }

    /// Row-major joint index of a full cause assignment.
    pub fn cause_index(&self, a: &[usize]) -> Result<usize> {
        if a.len() != self.causes.len() {
            return Err(Error::Shape(format!(
                "cause assignment has {} entries, expected {}",
                a.len(),
                self.causes.len()
            )));
        }
        for (k, (&l, spec)) in a.iter().zip(&self.causes).enumerate() {
            if l >= spec.card {
                return Err(Error::Shape(format!(
                    "cause {k} level {l} out of range (card {})",
                    spec.card
                )));
            }
        }
        let st = strides(&self.cause_cards());
        Ok(a.iter().zip(&st).map(|(l, s)| l * s).sum())
    }

    /// `P(A = a | Z = z)` from the structural tables.
    pub fn p_causes_given_z(&self, a: &[usize], z: usize) -> f64 {
        a.iter()
            .enumerate()
            .map(|(k, &l)| self.p_a_given_z[k][z][l])
            .product()
    }

    /// Ground-truth potential outcome distribution
    /// `P(Y(a)) = sum_z P(z) P(Y | A=a, Z=z)`, straight off the structural
    /// tables.
    pub fn ground_truth_po(&self, a: &[usize]) -> Result<PotentialOutcomeDist> {
        let ai = self.cause_index(a)?;
        let mut dist = vec![0.0; self.y.card];
        for (z, &pz) in self.p_z.iter().enumerate() {
            for (y, &p) in self.p_y_given_az[ai][z].iter().enumerate() {
                dist[y] += pz * p;
            }
        }
        Ok(PotentialOutcomeDist { a: a.to_vec(), dist })
    }

    /// Ground truth for an intervention on a subset of causes: the focal
    /// causes are pinned, the remaining causes and `Z` follow their natural
    /// structural law, and the outcome row is evaluated at the merged
    /// assignment.
    pub fn ground_truth_po_focal(
        &self,
        focal_idx: &[usize],
        a_focal: &[usize],
    ) -> Result<PotentialOutcomeDist> {
        if focal_idx.len() != a_focal.len() {
            return Err(Error::Shape("focal indices and levels differ in length".into()));
        }
        let aux_idx: Vec<usize> = (0..self.m()).filter(|i| !focal_idx.contains(i)).collect();
        let aux_cards: Vec<usize> = aux_idx.iter().map(|&i| self.causes[i].card).collect();
        let mut dist = vec![0.0; self.y.card];
        let mut merged = vec![0usize; self.m()];
        for (z, &pz) in self.p_z.iter().enumerate() {
            if pz == 0.0 {
                continue;
            }
            for u in assignments(&aux_cards) {
                for (fi, &ci) in focal_idx.iter().enumerate() {
                    merged[ci] = a_focal[fi];
                }
                let mut w = pz;
                for (ui, &ci) in aux_idx.iter().enumerate() {
                    merged[ci] = u[ui];
                    w *= self.p_a_given_z[ci][z][u[ui]];
                }
                let ai = self.cause_index(&merged)?;
                for (y, &p) in self.p_y_given_az[ai][z].iter().enumerate() {
                    dist[y] += w * p;
                }
            }
        }
        Ok(PotentialOutcomeDist {
            a: a_focal.to_vec(),
            dist,
        })
    }

    /// Structural counterfactual `P(Y(a') | A = a) =
    /// sum_z P(z | A=a) P(Y | A=a', Z=z)`.
    pub fn counterfactual_po(&self, a_prime: &[usize], given_a: &[usize]) -> Result<Vec<f64>> {
        let ai_prime = self.cause_index(a_prime)?;
        self.cause_index(given_a)?;
        let weights: Vec<f64> = self
            .p_z
            .iter()
            .enumerate()
            .map(|(z, &pz)| pz * self.p_causes_given_z(given_a, z))
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroProbabilityEvidence(format!("A = {given_a:?}")));
        }
        let mut dist = vec![0.0; self.y.card];
        for (z, &w) in weights.iter().enumerate() {
            for (y, &p) in self.p_y_given_az[ai_prime][z].iter().enumerate() {
                dist[y] += w / total * p;
            }
        }
        Ok(dist)
    }

    fn joint_vars(&self, with_z: bool) -> Vec<VarSpec> {
        let mut vars: Vec<VarSpec> = self.causes.clone();
        if let Some(xs) = &self.x {
            vars.push(xs.clone());
        }
        vars.push(self.y.clone());
        if with_z {
            vars.push(self.z.clone());
        }
        vars
    }

    /// Exact joint over (causes, X if present, Y, Z).
    pub fn full_joint(&self) -> JointTable {
        let vars = self.joint_vars(true);
        let m = self.m();
        let has_x = self.x.is_some();
        JointTable::from_fn(vars, |a| {
            let cause_levels = &a[..m];
            let x_level = if has_x { Some(a[m]) } else { None };
            let y_level = a[m + has_x as usize];
            let z = a[m + has_x as usize + 1];
            let mut p = self.p_z[z] * self.p_causes_given_z(cause_levels, z);
            if let Some(x) = x_level {
                p *= self.p_x_given_z.as_ref().unwrap()[z][x];
            }
            let ai = self.cause_index(cause_levels).unwrap();
            p * self.p_y_given_az[ai][z][y_level]
        })
        .expect("structural tables always compose to a valid joint")
    }

    /// Exact observed joint over (causes, X if present, Y): the latent
    /// variable summed out.
    pub fn observed_joint(&self) -> JointTable {
        let full = self.full_joint();
        let keep_specs = self.joint_vars(false);
        let keep: Vec<&str> = keep_specs.iter().map(|v| v.name.as_str()).collect();
        full.marginalize(&keep).expect("observed marginal")
    }

    /// i.i.d. ancestral samples. The hidden confounder column is returned
    /// separately so estimators cannot consume it by accident while
    /// diagnostics still can. Row `i` depends on `(seed, i)` only, so
    /// sampling is order-independent and prefix-stable.
    pub fn sample(&self, n: usize, seed: u64) -> SampleSet {
        let mut rows = Vec::with_capacity(n);
        let mut hidden_z = Vec::with_capacity(n);
        for unit in 0..n {
            let mut rng = stream_rng(seed, unit as u64);
            let z = draw_categorical(&mut rng, &self.p_z);
            let mut row = Vec::with_capacity(self.m() + 2);
            for k in 0..self.m() {
                row.push(draw_categorical(&mut rng, &self.p_a_given_z[k][z]));
            }
            if let Some(tbl) = &self.p_x_given_z {
                row.push(draw_categorical(&mut rng, &tbl[z]));
            }
            let ai = self.cause_index(&row[..self.m()]).unwrap();
            row.push(draw_categorical(&mut rng, &self.p_y_given_az[ai][z]));
            rows.push(row);
            hidden_z.push(z);
        }
        let data = Dataset::new(self.joint_vars(false), rows).expect("sampled levels in range");
        SampleSet { data, hidden_z }
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// The shipped witness template: binary causes strongly tied to a binary
    /// confounder that also drives the outcome. Strictly positive tables,
    /// genuine confounding at every assignment.
    pub fn demo_confounded_template() -> ScmSpec {
        let tie = vec![vec![0.8, 0.2], vec![0.2, 0.8]];
        let mut p_y = Vec::new();
        for a1 in 0..2usize {
            for a2 in 0..2usize {
                let mut blk = Vec::new();
                for z in 0..2usize {
                    let p1 = 0.1 + 0.08 * (a1 + a2) as f64 + 0.6 * z as f64;
                    blk.push(vec![1.0 - p1, p1]);
                }
                p_y.push(blk);
            }
        }
        ScmSpec::new(
            VarSpec::new("z", 2),
            None,
            vec![VarSpec::new("a1", 2), VarSpec::new("a2", 2)],
            VarSpec::new("y", 2),
            vec![0.5, 0.5],
            None,
            vec![tie.clone(), tie],
            p_y,
        )
        .expect("demo template is valid")
    }
}

/// Sampled dataset plus the withheld confounder column.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub data: Dataset,
    pub hidden_z: Vec<usize>,
}

/// Outcome rows `(cause assignment, z)` flagged as unidentified.
pub type UnidentifiedRows = Vec<(Vec<usize>, usize)>;

/// Result of the non-identification witness construction.
#[derive(Debug, Clone)]
pub struct ConfoundedPair {
    /// The template, untouched.
    pub original: ScmSpec,
    /// Same observed (A, Y) joint and same factor model, independence
    /// outcome copula: its ground truth equals the naive conditional.
    pub alternative: ScmSpec,
    /// Total variation (L1) between the two ground-truth `P(Y(a*))`.
    pub gap: f64,
    /// Outcome rows that had zero probability in the recomposed joint; set
    /// to uniform, unidentified, irrelevant to the observables.
    pub unidentified_rows: UnidentifiedRows,
}

/// Build two structural models that agree on every observable cell of the
/// (A, Y) joint and on the factor model P(A, Z), yet disagree on the
/// ground-truth potential outcome at `a_star`.
///
/// The alternative keeps the observed and factor-model terms of the
/// decomposition and swaps the outcome copula for the independence copula,
/// so its ground truth coincides with the naive conditional exactly. Errors
/// with [`Error::NoConfounding`] when the template has no confounding at
/// `a_star` (the pair would be one model twice).
pub fn make_confounded_pair(template: &ScmSpec, a_star: &[usize]) -> Result<ConfoundedPair> {
    let gt = template.ground_truth_po(a_star)?;
    let cause_names = template.cause_names();
    let y_name = template.y_spec().name.clone();
    let z_name = template.z_spec().name.clone();

    let full = template.full_joint();
    let mut ayz_keep: Vec<&str> = cause_names.clone();
    ayz_keep.push(&y_name);
    ayz_keep.push(&z_name);
    let full_ayz = full.marginalize(&ayz_keep)?.reorder(&ayz_keep)?;

    let mut ay_keep: Vec<&str> = cause_names.clone();
    ay_keep.push(&y_name);
    let observed = full_ayz.marginalize(&ay_keep)?;
    let evidence: Vec<(&str, usize)> = cause_names
        .iter()
        .cloned()
        .zip(a_star.iter().cloned())
        .collect();
    let naive = observed.condition(&evidence)?;
    let gap0 = total_variation(&gt.dist, naive.probs());
    if gap0 <= 1e-9 {
        return Err(Error::NoConfounding(format!(
            "P(Y({a_star:?})) equals P(Y | A = {a_star:?})"
        )));
    }

    let d = decompose_joint(&full_ayz, &cause_names, &y_name, &z_name)?;
    let indep = CopulaGrid::independence(
        d.outcome_copula.vars_v().to_vec(),
        d.outcome_copula.vars_w().to_vec(),
        d.outcome_copula.cond_vars().to_vec(),
    );
    let full_alt = compose_joint(&d.observed, &y_name, &d.prior_z, &d.cause_copula, &indep)?;
    let (alternative, unidentified_rows) = read_back_scm(&full_alt, template)?;

    let gt_alt = alternative.ground_truth_po(a_star)?;
    let gap = total_variation(&gt.dist, &gt_alt.dist);
    Ok(ConfoundedPair {
        original: template.clone(),
        alternative,
        gap,
        unidentified_rows,
    })
}

/// Recover structural tables from a joint over (causes, Y, Z) by
/// conditioning. Zero-probability (a, z) outcome rows are unidentified:
/// they are set to uniform and reported. The covariate structure is copied
/// from the template (the construction never touches X).
fn read_back_scm(
    full: &JointTable,
    template: &ScmSpec,
) -> Result<(ScmSpec, UnidentifiedRows)> {
    let cause_names = template.cause_names();
    let y_name = template.y_spec().name.as_str();
    let z_name = template.z_spec().name.as_str();
    let z_card = template.z_spec().card;
    let y_card = template.y_spec().card;

    let gap = full.conditional_independence_gap(&cause_names, &[z_name])?;
    if gap > 1e-9 {
        return Err(Error::InconsistentFactors(format!(
            "recomposed joint has causes dependent given the latent (gap {gap})"
        )));
    }

    let p_z = full.marginalize(&[z_name])?.probs().to_vec();

    let mut p_a_given_z = Vec::with_capacity(cause_names.len());
    for (k, name) in cause_names.iter().enumerate() {
        let card = template.cause_specs()[k].card;
        let pair = full.marginalize(&[name, z_name])?.reorder(&[name, z_name])?;
        let mut rows = Vec::with_capacity(z_card);
        for z in 0..z_card {
            match pair.condition(&[(z_name, z)]) {
                Ok(c) => rows.push(c.probs().to_vec()),
                Err(Error::ZeroProbabilityEvidence(_)) => {
                    rows.push(vec![1.0 / card as f64; card]);
                }
                Err(e) => return Err(e),
            }
        }
        p_a_given_z.push(rows);
    }

    let mut p_y_given_az = Vec::with_capacity(template.n_cause_assignments());
    let mut unidentified = Vec::new();
    for a in assignments(&template.cause_cards()) {
        let mut blk = Vec::with_capacity(z_card);
        for z in 0..z_card {
            let mut evidence: Vec<(&str, usize)> = cause_names
                .iter()
                .cloned()
                .zip(a.iter().cloned())
                .collect();
            evidence.push((z_name, z));
            match full.condition(&evidence) {
                Ok(c) => blk.push(c.marginalize(&[y_name])?.probs().to_vec()),
                Err(Error::ZeroProbabilityEvidence(_)) => {
                    blk.push(vec![1.0 / y_card as f64; y_card]);
                    unidentified.push((a.clone(), z));
                }
                Err(e) => return Err(e),
            }
        }
        p_y_given_az.push(blk);
    }

    let scm = ScmSpec::new(
        template.z_spec().clone(),
        template.x_spec().cloned(),
        template.cause_specs().to_vec(),
        template.y_spec().clone(),
        p_z,
        template.p_x_given_z.clone(),
        p_a_given_z,
        p_y_given_az,
    )?;
    Ok((scm, unidentified))
}

/// Shape of a randomly generated model.
#[derive(Debug, Clone)]
pub struct ScmDims {
    pub z_card: usize,
    pub x_card: Option<usize>,
    pub cause_cards: Vec<usize>,
    pub y_card: usize,
}

/// Draw every conditional row from a symmetric Dirichlet. Concentration 1
/// is uniform over the simplex; small concentrations create near-degenerate
/// rows that exercise overlap failure.
pub fn random_scm<R: Rng>(dims: &ScmDims, concentration: f64, rng: &mut R) -> ScmSpec {
    let dir = |card: usize, rng: &mut R| -> Vec<f64> {
        if card == 1 {
            return vec![1.0];
        }
        let alpha = vec![concentration; card];
        rand_distr::multi::Dirichlet::new(&alpha)
            .expect("valid Dirichlet parameters")
            .sample(rng)
    };
    let p_z = dir(dims.z_card, rng);
    let p_x_given_z = dims
        .x_card
        .map(|xc| (0..dims.z_card).map(|_| dir(xc, rng)).collect::<Vec<_>>());
    let p_a_given_z: Vec<Vec<Vec<f64>>> = dims
        .cause_cards
        .iter()
        .map(|&ac| (0..dims.z_card).map(|_| dir(ac, rng)).collect())
        .collect();
    let n_assignments: usize = dims.cause_cards.iter().product();
    let p_y_given_az: Vec<Vec<Vec<f64>>> = (0..n_assignments)
        .map(|_| (0..dims.z_card).map(|_| dir(dims.y_card, rng)).collect())
        .collect();
    ScmSpec::new(
        VarSpec::new("z", dims.z_card),
        dims.x_card.map(|c| VarSpec::new("x", c)),
        dims.cause_cards
            .iter()
            .enumerate()
            .map(|(k, &c)| VarSpec::new(format!("a{}", k + 1), c))
            .collect(),
        VarSpec::new("y", dims.y_card),
        p_z,
        p_x_given_z,
        p_a_given_z,
        p_y_given_az,
    )
    .expect("random tables are valid by construction")
}
