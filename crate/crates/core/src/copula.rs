//! Discrete copula densities and the observed/factor/outcome factorization.
//!
//! For variable groups V and W, the copula density is
//! `c(v, w | s) = P(v, w | s) / (P(v | s) * P(w | s))`, i.e. dependence with
//! the marginals divided out; `c == 1` everywhere is independence. A cell is
//! explicitly UNDEFINED when either marginal is zero — that case carries
//! meaning (identification failure) and must never collapse to 0 or NaN.
//!
//! [`compose_joint`] and [`decompose_joint`] convert between a full joint
//! over (causes, outcome, latent) and its three factors: the observed joint
//! over (causes, outcome), the factor model `P(Z) * c(Z, A)`, and the
//! outcome copula `c(Y, Z | A)`.

use crate::error::{Error, Result};
use crate::table::{assignments, strides, JointTable, VarSpec, EPS_NORM};
use serde::{Deserialize, Serialize};

/// Dense grid of copula density values `c(v, w | cond)`.
///
/// Cells are `None` exactly where the density is undefined. Storage is
/// cond-major, then v, then w, each group row-major over its own variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaGrid {
    vars_v: Vec<VarSpec>,
    vars_w: Vec<VarSpec>,
    cond_vars: Vec<VarSpec>,
    values: Vec<Option<f64>>,
}

impl CopulaGrid {
    /// The independence copula on the given shape: every cell defined and 1.
    pub fn independence(
        vars_v: Vec<VarSpec>,
        vars_w: Vec<VarSpec>,
        cond_vars: Vec<VarSpec>,
    ) -> Self {
        let cells = Self::cell_count(&vars_v, &vars_w, &cond_vars);
        CopulaGrid {
            vars_v,
            vars_w,
            cond_vars,
            values: vec![Some(1.0); cells],
        }
    }

    fn cell_count(v: &[VarSpec], w: &[VarSpec], c: &[VarSpec]) -> usize {
        let nv: usize = v.iter().map(|s| s.card).product();
        let nw: usize = w.iter().map(|s| s.card).product();
        let nc: usize = c.iter().map(|s| s.card).product();
        nv * nw * nc
    }

    pub fn vars_v(&self) -> &[VarSpec] {
        &self.vars_v
    }

    pub fn vars_w(&self) -> &[VarSpec] {
        &self.vars_w
    }

    pub fn cond_vars(&self) -> &[VarSpec] {
        &self.cond_vars
    }

    fn group_index(specs: &[VarSpec], levels: &[usize]) -> usize {
        let cards: Vec<usize> = specs.iter().map(|s| s.card).collect();
        levels
            .iter()
            .zip(strides(&cards))
            .map(|(l, s)| l * s)
            .sum()
    }

    fn flat_index(&self, v: &[usize], w: &[usize], cond: &[usize]) -> usize {
        debug_assert_eq!(v.len(), self.vars_v.len());
        debug_assert_eq!(w.len(), self.vars_w.len());
        debug_assert_eq!(cond.len(), self.cond_vars.len());
        let nv: usize = self.vars_v.iter().map(|s| s.card).product();
        let nw: usize = self.vars_w.iter().map(|s| s.card).product();
        let ci = Self::group_index(&self.cond_vars, cond);
        let vi = Self::group_index(&self.vars_v, v);
        let wi = Self::group_index(&self.vars_w, w);
        (ci * nv + vi) * nw + wi
    }

    /// Density value, or `None` where undefined.
    pub fn value(&self, v: &[usize], w: &[usize], cond: &[usize]) -> Option<f64> {
        self.values[self.flat_index(v, w, cond)]
    }

    pub fn is_defined(&self, v: &[usize], w: &[usize], cond: &[usize]) -> bool {
        self.value(v, w, cond).is_some()
    }

    pub fn n_undefined(&self) -> usize {
        self.values.iter().filter(|c| c.is_none()).count()
    }
}

/// Copula density grid of `group_v` against `group_w` given `cond_vars`,
/// computed from an exact joint table.
pub fn copula_density(
    table: &JointTable,
    group_v: &[&str],
    group_w: &[&str],
    cond_vars: &[&str],
) -> Result<CopulaGrid> {
    for (i, name) in group_v.iter().chain(group_w).chain(cond_vars).enumerate() {
        let all: Vec<&&str> = group_v.iter().chain(group_w).chain(cond_vars).collect();
        if all[..i].iter().any(|other| **other == *name) {
            return Err(Error::Shape(format!("variable `{name}` appears in two groups")));
        }
        table.var_index(name)?;
    }
    let spec_of = |name: &&str| -> VarSpec {
        let i = table.var_index(name).unwrap();
        table.vars()[i].clone()
    };
    let vars_v: Vec<VarSpec> = group_v.iter().map(spec_of).collect();
    let vars_w: Vec<VarSpec> = group_w.iter().map(spec_of).collect();
    let cvars: Vec<VarSpec> = cond_vars.iter().map(spec_of).collect();

    let mut keep: Vec<&str> = group_v.to_vec();
    keep.extend_from_slice(group_w);
    keep.extend_from_slice(cond_vars);
    // Axes in (v, w, cond) order so downstream indexing is positional.
    let sub = table.marginalize(&keep)?.reorder(&keep)?;

    let cond_cards: Vec<usize> = cvars.iter().map(|s| s.card).collect();
    let v_cards: Vec<usize> = vars_v.iter().map(|s| s.card).collect();
    let w_cards: Vec<usize> = vars_w.iter().map(|s| s.card).collect();

    let mut values = Vec::with_capacity(CopulaGrid::cell_count(&vars_v, &vars_w, &cvars));
    for cond in assignments(&cond_cards) {
        let evidence: Vec<(&str, usize)> =
            cond_vars.iter().cloned().zip(cond.iter().cloned()).collect();
        let cond_table = match sub.condition(&evidence) {
            Ok(t) => Some(t),
            Err(Error::ZeroProbabilityEvidence(_)) => None,
            Err(e) => return Err(e),
        };
        let (marg_v, marg_w) = match &cond_table {
            Some(t) => (
                Some(t.marginalize(group_v)?),
                Some(t.marginalize(group_w)?),
            ),
            None => (None, None),
        };
        for v in assignments(&v_cards) {
            for w in assignments(&w_cards) {
                let cell = match (&cond_table, &marg_v, &marg_w) {
                    (Some(t), Some(mv), Some(mw)) => {
                        let pv = mv.prob(&v);
                        let pw = mw.prob(&w);
                        if pv > 0.0 && pw > 0.0 {
                            let mut full = v.clone();
                            full.extend_from_slice(&w);
                            Some(t.prob(&full) / (pv * pw))
                        } else {
                            None
                        }
                    }
                    _ => None,
                };
                values.push(cell);
            }
        }
    }
    Ok(CopulaGrid {
        vars_v,
        vars_w,
        cond_vars: cvars,
        values,
    })
}

/// The three factors of a full joint over (causes, outcome, latent).
#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Joint over (causes, outcome) — everything a dataset can pin down.
    pub observed: JointTable,
    /// Marginal of the latent variable.
    pub prior_z: JointTable,
    /// `c(Z, A)`: with `prior_z`, the factor-model term.
    pub cause_copula: CopulaGrid,
    /// `c(Y, Z | A)`: the residual outcome-confounder dependence, the factor
    /// no observed data can constrain.
    pub outcome_copula: CopulaGrid,
}

/// Split a full joint into observed, factor-model and outcome-copula terms.
pub fn decompose_joint(
    full: &JointTable,
    causes: &[&str],
    outcome: &str,
    latent: &str,
) -> Result<Decomposition> {
    let mut observed_keep: Vec<&str> = causes.to_vec();
    observed_keep.push(outcome);
    let observed = full.marginalize(&observed_keep)?.reorder(&observed_keep)?;
    let prior_z = full.marginalize(&[latent])?;
    let mut az_keep: Vec<&str> = causes.to_vec();
    az_keep.push(latent);
    let az = full.marginalize(&az_keep)?;
    let cause_copula = copula_density(&az, &[latent], causes, &[])?;
    let outcome_copula = copula_density(full, &[outcome], &[latent], causes)?;
    Ok(Decomposition {
        observed,
        prior_z,
        cause_copula,
        outcome_copula,
    })
}

/// Multiply the three factors back into a full joint over
/// `(observed vars..., latent)`.
///
/// The product is validated cellwise: marginalizing the latent out must
/// reproduce `observed`, and the implied (causes, latent) marginal must
/// match the factor model. A violation means the supplied outcome copula
/// breaks reweighted-sum consistency and is reported as
/// [`Error::InconsistentFactors`].
pub fn compose_joint(
    observed: &JointTable,
    outcome: &str,
    prior_z: &JointTable,
    cause_copula: &CopulaGrid,
    outcome_copula: &CopulaGrid,
) -> Result<JointTable> {
    if prior_z.vars().len() != 1 {
        return Err(Error::Shape("prior_z must be a single-variable table".into()));
    }
    let z_spec = prior_z.vars()[0].clone();
    let y_idx = observed.var_index(outcome)?;
    let cause_specs: Vec<VarSpec> = observed
        .vars()
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != y_idx)
        .map(|(_, v)| v.clone())
        .collect();

    if cause_copula.vars_v() != std::slice::from_ref(&z_spec)
        || cause_copula.vars_w() != cause_specs.as_slice()
        || !cause_copula.cond_vars().is_empty()
    {
        return Err(Error::Shape("cause copula shape does not match observed/prior".into()));
    }
    let y_spec = observed.vars()[y_idx].clone();
    if outcome_copula.vars_v() != std::slice::from_ref(&y_spec)
        || outcome_copula.vars_w() != std::slice::from_ref(&z_spec)
        || outcome_copula.cond_vars() != cause_specs.as_slice()
    {
        return Err(Error::Shape("outcome copula shape does not match observed/prior".into()));
    }

    let mut out_vars: Vec<VarSpec> = observed.vars().to_vec();
    out_vars.push(z_spec.clone());
    let out_cards: Vec<usize> = out_vars.iter().map(|v| v.card).collect();
    let mut probs = vec![0.0; out_cards.iter().product()];
    let out_strides = strides(&out_cards);

    let n_obs_vars = observed.vars().len();
    for (oi, obs_a) in observed.assignments().enumerate() {
        let p_obs = observed.probs()[oi];
        let a_levels: Vec<usize> = obs_a
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != y_idx)
            .map(|(_, &l)| l)
            .collect();
        let y_level = obs_a[y_idx];
        for z in 0..z_spec.card {
            let p_z = prior_z.probs()[z];
            let base = p_obs * p_z;
            let flat: usize = obs_a
                .iter()
                .zip(&out_strides[..n_obs_vars])
                .map(|(l, s)| l * s)
                .sum::<usize>()
                + z * out_strides[n_obs_vars];
            if base == 0.0 {
                continue;
            }
            let c_za = cause_copula
                .value(&[z], &a_levels, &[])
                .ok_or_else(|| Error::InconsistentFactors(
                    format!("cause copula undefined at z={z}, a={a_levels:?} where mass is positive"),
                ))?;
            if c_za == 0.0 {
                continue;
            }
            let c_yz = outcome_copula
                .value(&[y_level], &[z], &a_levels)
                .ok_or_else(|| Error::InconsistentFactors(
                    format!("outcome copula undefined at y={y_level}, z={z}, a={a_levels:?} where mass is positive"),
                ))?;
            probs[flat] = base * c_za * c_yz;
        }
    }

    // Cellwise consistency: the latent marginal must give back `observed`,
    // and summing the outcome out must give back the factor model P(A, Z).
    let z_stride = out_strides[n_obs_vars];
    for (oi, obs_a) in observed.assignments().enumerate() {
        let flat_base: usize = obs_a
            .iter()
            .zip(&out_strides[..n_obs_vars])
            .map(|(l, s)| l * s)
            .sum();
        let total: f64 = (0..z_spec.card).map(|z| probs[flat_base + z * z_stride]).sum();
        if (total - observed.probs()[oi]).abs() > EPS_NORM {
            return Err(Error::InconsistentFactors(format!(
                "marginalizing the latent gives {total} at {obs_a:?}, observed says {}",
                observed.probs()[oi]
            )));
        }
    }
    let cause_cards: Vec<usize> = cause_specs.iter().map(|v| v.card).collect();
    for a_levels in assignments(&cause_cards) {
        for z in 0..z_spec.card {
            let p_z = prior_z.probs()[z];
            let c_za = cause_copula.value(&[z], &a_levels, &[]);
            let mut expect = 0.0;
            if p_z > 0.0 {
                if let Some(c) = c_za {
                    // P(a) from the observed table
                    let mut p_a = 0.0;
                    let mut composed = 0.0;
                    for y in 0..y_spec.card {
                        let mut full = Vec::with_capacity(n_obs_vars + 1);
                        let mut ai = 0;
                        for i in 0..n_obs_vars {
                            if i == y_idx {
                                full.push(y);
                            } else {
                                full.push(a_levels[ai]);
                                ai += 1;
                            }
                        }
                        p_a += observed.prob(&full);
                        full.push(z);
                        let flat: usize =
                            full.iter().zip(&out_strides).map(|(l, s)| l * s).sum();
                        composed += probs[flat];
                    }
                    expect = p_a * p_z * c;
                    if (composed - expect).abs() > EPS_NORM {
                        return Err(Error::InconsistentFactors(format!(
                            "factor-model marginal not recovered at a={a_levels:?}, z={z}: {composed} vs {expect}"
                        )));
                    }
                }
            }
            let _ = expect;
        }
    }

    JointTable::new(out_vars, probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::RngExt;

    fn random_positive_joint(cards: &[usize], names: &[&str], seed: u64) -> JointTable {
        let mut rng = stream_rng(seed, 0);
        let vars: Vec<VarSpec> = names
            .iter()
            .zip(cards)
            .map(|(n, &c)| VarSpec::new(*n, c))
            .collect();
        let cells: usize = cards.iter().product();
        let mut probs: Vec<f64> = (0..cells).map(|_| rng.random_range(0.05..1.0)).collect();
        let sum: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= sum);
        JointTable::new(vars, probs).unwrap()
    }

    #[test]
    fn independent_groups_have_unit_copula() {
        let pu = [0.3, 0.7];
        let pv = [0.25, 0.5, 0.25];
        let t = JointTable::from_fn(
            vec![VarSpec::new("u", 2), VarSpec::new("v", 3)],
            |a| pu[a[0]] * pv[a[1]],
        )
        .unwrap();
        let c = copula_density(&t, &["u"], &["v"], &[]).unwrap();
        for u in 0..2 {
            for v in 0..3 {
                let val = c.value(&[u], &[v], &[]).unwrap();
                assert!((val - 1.0).abs() < 1e-12, "c({u},{v}) = {val}");
            }
        }
    }

    #[test]
    fn comonotone_binary_copula_is_two_on_diagonal() {
        // u == v, both uniform binary: c = P(u,v)/(P(u)P(v)) = 0.5/0.25 on
        // the diagonal, 0 off it.
        let t = JointTable::new(
            vec![VarSpec::new("u", 2), VarSpec::new("v", 2)],
            vec![0.5, 0.0, 0.0, 0.5],
        )
        .unwrap();
        let c = copula_density(&t, &["u"], &["v"], &[]).unwrap();
        assert!((c.value(&[0], &[0], &[]).unwrap() - 2.0).abs() < 1e-12);
        assert!((c.value(&[1], &[1], &[]).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(c.value(&[0], &[1], &[]).unwrap(), 0.0);
        assert_eq!(c.value(&[1], &[0], &[]).unwrap(), 0.0);
    }

    #[test]
    fn copula_times_marginals_recovers_joint() {
        let t = random_positive_joint(&[2, 3], &["u", "v"], 5);
        let c = copula_density(&t, &["u"], &["v"], &[]).unwrap();
        let mu = t.marginalize(&["u"]).unwrap();
        let mv = t.marginalize(&["v"]).unwrap();
        for u in 0..2 {
            for v in 0..3 {
                let back = c.value(&[u], &[v], &[]).unwrap() * mu.prob(&[u]) * mv.prob(&[v]);
                assert!((back - t.prob(&[u, v])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_marginal_cells_are_undefined() {
        let t = JointTable::new(
            vec![VarSpec::new("u", 2), VarSpec::new("v", 2)],
            vec![0.6, 0.4, 0.0, 0.0], // u = 1 never happens
        )
        .unwrap();
        let c = copula_density(&t, &["u"], &["v"], &[]).unwrap();
        assert!(!c.is_defined(&[1], &[0], &[]));
        assert!(!c.is_defined(&[1], &[1], &[]));
        assert!(c.is_defined(&[0], &[0], &[]));
        assert_eq!(c.n_undefined(), 2);
    }

    #[test]
    fn reweighted_sum_consistency_of_derived_copulas() {
        // sum_v P(v|cond) c(v, w|cond) = 1 for every w with positive mass.
        let t = random_positive_joint(&[2, 3, 2], &["y", "z", "a1"], 11);
        let c = copula_density(&t, &["y"], &["z"], &["a1"]).unwrap();
        for a in 0..2 {
            let cond = t.condition(&[("a1", a)]).unwrap();
            let my = cond.marginalize(&["y"]).unwrap();
            let mz = cond.marginalize(&["z"]).unwrap();
            for z in 0..3 {
                if mz.prob(&[z]) == 0.0 {
                    continue;
                }
                let s: f64 = (0..2)
                    .map(|y| my.prob(&[y]) * c.value(&[y], &[z], &[a]).unwrap())
                    .sum();
                assert!((s - 1.0).abs() < 1e-10, "sum = {s}");
            }
        }
    }

    #[test]
    fn unit_outcome_copula_makes_outcome_independent_of_latent() {
        let full = random_positive_joint(&[2, 2, 2, 3], &["a1", "a2", "y", "z"], 23);
        let d = decompose_joint(&full, &["a1", "a2"], "y", "z").unwrap();
        let indep = CopulaGrid::independence(
            d.outcome_copula.vars_v().to_vec(),
            d.outcome_copula.vars_w().to_vec(),
            d.outcome_copula.cond_vars().to_vec(),
        );
        let recomposed =
            compose_joint(&d.observed, "y", &d.prior_z, &d.cause_copula, &indep).unwrap();
        let gap = recomposed
            .conditional_independence_gap(&["y", "z"], &["a1", "a2"])
            .unwrap();
        assert!(gap < 1e-12, "gap = {gap}");
    }

    #[test]
    fn compose_decompose_roundtrip_on_random_positive_tables() {
        for seed in 0..30 {
            let full = random_positive_joint(&[2, 3, 2, 3], &["a1", "a2", "y", "z"], 100 + seed);
            let d = decompose_joint(&full, &["a1", "a2"], "y", "z").unwrap();
            let back = compose_joint(
                &d.observed,
                "y",
                &d.prior_z,
                &d.cause_copula,
                &d.outcome_copula,
            )
            .unwrap();
            assert_eq!(back.vars(), full.vars());
            for (a, b) in back.probs().iter().zip(full.probs()) {
                assert!((a - b).abs() <= 1e-10, "cell gap {}", (a - b).abs());
            }
        }
    }

    #[test]
    fn full_independence_product_composes_cellwise() {
        let pa = [0.4, 0.6];
        let py = [0.3, 0.7];
        let pz = [0.2, 0.5, 0.3];
        let observed = JointTable::from_fn(
            vec![VarSpec::new("a1", 2), VarSpec::new("y", 2)],
            |v| pa[v[0]] * py[v[1]],
        )
        .unwrap();
        let prior = JointTable::new(vec![VarSpec::new("z", 3)], pz.to_vec()).unwrap();
        let cz_a = CopulaGrid::independence(
            vec![VarSpec::new("z", 3)],
            vec![VarSpec::new("a1", 2)],
            vec![],
        );
        let out_cop = CopulaGrid::independence(
            vec![VarSpec::new("y", 2)],
            vec![VarSpec::new("z", 3)],
            vec![VarSpec::new("a1", 2)],
        );
        let full = compose_joint(&observed, "y", &prior, &cz_a, &out_cop).unwrap();
        for lv in assignments(&[2, 2, 3]) {
            let expect = pa[lv[0]] * py[lv[1]] * pz[lv[2]];
            assert!((full.prob(&lv) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn inconsistent_outcome_copula_is_rejected() {
        let full = random_positive_joint(&[2, 2, 2], &["a1", "y", "z"], 77);
        let d = decompose_joint(&full, &["a1"], "y", "z").unwrap();
        // A constant non-unit copula violates reweighted-sum consistency.
        let mut bad = CopulaGrid::independence(
            d.outcome_copula.vars_v().to_vec(),
            d.outcome_copula.vars_w().to_vec(),
            d.outcome_copula.cond_vars().to_vec(),
        );
        for cell in bad.values.iter_mut() {
            *cell = Some(1.3);
        }
        let err = compose_joint(&d.observed, "y", &d.prior_z, &d.cause_copula, &bad);
        assert!(matches!(err, Err(Error::InconsistentFactors(_))));
    }
}
