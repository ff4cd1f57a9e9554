//! Exact finite discrete joint probability tables.
//!
//! A [`JointTable`] is a dense probability table over named discrete
//! variables, stored row-major in the declared variable order (last variable
//! fastest). Everything in this crate is finite-discrete, so marginals,
//! conditionals and causal functionals are computed by exact enumeration
//! rather than estimation.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Absolute tolerance for normalization checks.
pub const EPS_NORM: f64 = 1e-9;

/// Cell-count cap for dense tables (desk scale).
pub const MAX_TABLE_CELLS: usize = 10_000_000;

/// A named discrete variable with levels `0..card`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarSpec {
    pub name: String,
    pub card: usize,
}

impl VarSpec {
    pub fn new(name: impl Into<String>, card: usize) -> Self {
        VarSpec {
            name: name.into(),
            card,
        }
    }
}

/// Row-major strides for a list of cardinalities.
pub(crate) fn strides(cards: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; cards.len()];
    for i in (0..cards.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * cards[i + 1];
    }
    s
}

/// Iterator over all level assignments of the given cardinalities, in
/// row-major order. Empty `cards` yields exactly one empty assignment.
pub fn assignments(cards: &[usize]) -> Assignments {
    Assignments {
        cards: cards.to_vec(),
        next: Some(vec![0; cards.len()]),
    }
}

pub struct Assignments {
    cards: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl Iterator for Assignments {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.next.take()?;
        if self.cards.contains(&0) {
            return None;
        }
        let mut succ = cur.clone();
        let mut advanced = false;
        for i in (0..self.cards.len()).rev() {
            if succ[i] + 1 < self.cards[i] {
                succ[i] += 1;
                advanced = true;
                break;
            }
            succ[i] = 0;
        }
        if advanced {
            self.next = Some(succ);
        }
        Some(cur)
    }
}

/// Total variation between two vectors in L1 convention: `sum |p - q|`.
///
/// The maximum over probability vectors is 2; the dependence-budget
/// arithmetic in [`crate::sensitivity`] relies on this convention.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "total_variation length mismatch");
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

/// Validate a probability vector: nonnegative, sums to 1 within `EPS_NORM`.
pub fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Shape(format!("{what}: empty distribution")));
    }
    if p.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::Shape(format!(
            "{what}: entries must be finite and nonnegative"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > EPS_NORM {
        return Err(Error::Shape(format!("{what}: sums to {sum}, expected 1")));
    }
    Ok(())
}

#[derive(Deserialize)]
struct RawJointTable {
    vars: Vec<VarSpec>,
    probs: Vec<f64>,
}

/// Exact joint distribution over named discrete variables.
///
/// Invariants: entries nonnegative, total mass 1 within [`EPS_NORM`],
/// variable names unique, every cardinality at least 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawJointTable")]
pub struct JointTable {
    vars: Vec<VarSpec>,
    probs: Vec<f64>,
}

impl TryFrom<RawJointTable> for JointTable {
    type Error = Error;
    fn try_from(raw: RawJointTable) -> Result<Self> {
        JointTable::new(raw.vars, raw.probs)
    }
}

impl JointTable {
    pub fn new(vars: Vec<VarSpec>, probs: Vec<f64>) -> Result<Self> {
        let mut cells: usize = 1;
        for v in &vars {
            if v.card == 0 {
                return Err(Error::Shape(format!("variable `{}` has cardinality 0", v.name)));
            }
            cells = cells
                .checked_mul(v.card)
                .filter(|&c| c <= MAX_TABLE_CELLS)
                .ok_or(Error::TableTooLarge {
                    cells: usize::MAX,
                    max: MAX_TABLE_CELLS,
                })?;
        }
        for (i, a) in vars.iter().enumerate() {
            if vars[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::Shape(format!("duplicate variable name `{}`", a.name)));
            }
        }
        if probs.len() != cells {
            return Err(Error::Shape(format!(
                "expected {cells} probabilities, got {}",
                probs.len()
            )));
        }
        if probs.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::Shape(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > EPS_NORM {
            return Err(Error::Shape(format!("probabilities sum to {sum}, expected 1")));
        }
        Ok(JointTable { vars, probs })
    }

    /// Build a table by evaluating `f` on every assignment, then validating.
    pub fn from_fn(vars: Vec<VarSpec>, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let cards: Vec<usize> = vars.iter().map(|v| v.card).collect();
        let probs: Vec<f64> = assignments(&cards).map(|a| f(&a)).collect();
        JointTable::new(vars, probs)
    }

    pub fn uniform(vars: Vec<VarSpec>) -> Result<Self> {
        let cells: usize = vars.iter().map(|v| v.card).product();
        let p = 1.0 / cells as f64;
        JointTable::new(vars, vec![p; cells])
    }

    pub fn vars(&self) -> &[VarSpec] {
        &self.vars
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn cards(&self) -> Vec<usize> {
        self.vars.iter().map(|v| v.card).collect()
    }

    pub fn n_cells(&self) -> usize {
        self.probs.len()
    }

    pub fn var_index(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Flat row-major index of a full assignment.
    pub fn cell_index(&self, levels: &[usize]) -> usize {
        debug_assert_eq!(levels.len(), self.vars.len());
        let st = strides(&self.cards());
        levels.iter().zip(&st).map(|(l, s)| l * s).sum()
    }

    pub fn prob(&self, levels: &[usize]) -> f64 {
        self.probs[self.cell_index(levels)]
    }

    /// All assignments of this table's variables, row-major.
    pub fn assignments(&self) -> Assignments {
        assignments(&self.cards())
    }

    /// Total mass of a partial assignment.
    pub fn partial_mass(&self, evidence: &[(&str, usize)]) -> Result<f64> {
        let pinned = self.pin_evidence(evidence)?;
        let mut mass = 0.0;
        for (idx, a) in self.assignments().enumerate() {
            if pinned.iter().all(|&(vi, lv)| a[vi] == lv) {
                mass += self.probs[idx];
            }
        }
        Ok(mass)
    }

    fn pin_evidence(&self, evidence: &[(&str, usize)]) -> Result<Vec<(usize, usize)>> {
        let mut pinned = Vec::with_capacity(evidence.len());
        for &(name, level) in evidence {
            let vi = self.var_index(name)?;
            if level >= self.vars[vi].card {
                return Err(Error::Shape(format!(
                    "level {level} out of range for `{name}` (card {})",
                    self.vars[vi].card
                )));
            }
            if pinned.iter().any(|&(seen, _)| seen == vi) {
                return Err(Error::Shape(format!("duplicate evidence for `{name}`")));
            }
            pinned.push((vi, level));
        }
        Ok(pinned)
    }

    /// Sum out every variable not in `keep`; the kept variables stay in this
    /// table's declared order. Normalization is preserved exactly (within
    /// float summation error).
    pub fn marginalize(&self, keep: &[&str]) -> Result<JointTable> {
        let mut keep_idx = Vec::with_capacity(keep.len());
        for name in keep {
            keep_idx.push(self.var_index(name)?);
        }
        let kept: Vec<usize> = (0..self.vars.len())
            .filter(|i| keep_idx.contains(i))
            .collect();
        let out_vars: Vec<VarSpec> = kept.iter().map(|&i| self.vars[i].clone()).collect();
        let out_cards: Vec<usize> = out_vars.iter().map(|v| v.card).collect();
        let out_strides = strides(&out_cards);
        let mut out = vec![0.0; out_cards.iter().product::<usize>().max(1)];
        for (idx, a) in self.assignments().enumerate() {
            let oi: usize = kept
                .iter()
                .zip(&out_strides)
                .map(|(&vi, s)| a[vi] * s)
                .sum();
            out[oi] += self.probs[idx];
        }
        JointTable::new(out_vars, out)
    }

    /// Normalized conditional table over the remaining variables given the
    /// evidence. Errors with [`Error::ZeroProbabilityEvidence`] when the
    /// evidence has zero mass; the degenerate case is meaningful and must
    /// not be papered over.
    pub fn condition(&self, evidence: &[(&str, usize)]) -> Result<JointTable> {
        let pinned = self.pin_evidence(evidence)?;
        let rest: Vec<usize> = (0..self.vars.len())
            .filter(|i| !pinned.iter().any(|&(vi, _)| vi == *i))
            .collect();
        let out_vars: Vec<VarSpec> = rest.iter().map(|&i| self.vars[i].clone()).collect();
        let out_cards: Vec<usize> = out_vars.iter().map(|v| v.card).collect();
        let out_strides = strides(&out_cards);
        let mut out = vec![0.0; out_cards.iter().product::<usize>().max(1)];
        let mut mass = 0.0;
        for (idx, a) in self.assignments().enumerate() {
            if pinned.iter().all(|&(vi, lv)| a[vi] == lv) {
                let oi: usize = rest
                    .iter()
                    .zip(&out_strides)
                    .map(|(&vi, s)| a[vi] * s)
                    .sum();
                out[oi] += self.probs[idx];
                mass += self.probs[idx];
            }
        }
        if mass <= 0.0 {
            let desc: Vec<String> = evidence
                .iter()
                .map(|(n, l)| format!("{n}={l}"))
                .collect();
            return Err(Error::ZeroProbabilityEvidence(desc.join(", ")));
        }
        for v in &mut out {
            *v /= mass;
        }
        JointTable::new(out_vars, out)
    }

    /// Permute the variable axes into the requested order.
    pub fn reorder(&self, order: &[&str]) -> Result<JointTable> {
        if order.len() != self.vars.len() {
            return Err(Error::Shape(format!(
                "reorder wants {} variables, table has {}",
                order.len(),
                self.vars.len()
            )));
        }
        let perm: Vec<usize> = order
            .iter()
            .map(|n| self.var_index(n))
            .collect::<Result<_>>()?;
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if seen[p] {
                return Err(Error::Shape("duplicate variable in reorder".into()));
            }
            seen[p] = true;
        }
        let out_vars: Vec<VarSpec> = perm.iter().map(|&i| self.vars[i].clone()).collect();
        let out_cards: Vec<usize> = out_vars.iter().map(|v| v.card).collect();
        let mut probs = vec![0.0; self.probs.len()];
        let mut scratch = vec![0usize; perm.len()];
        for (oi, a) in assignments(&out_cards).enumerate() {
            for (k, &src) in perm.iter().enumerate() {
                scratch[src] = a[k];
            }
            probs[oi] = self.prob(&scratch);
        }
        JointTable::new(out_vars, probs)
    }

    /// Largest deviation from mutual independence of `group` within the
    /// strata of `given`: `max |P(group | s) - prod_k P(group_k | s)|` over
    /// strata `s` with positive mass. Zero (up to float error) iff the group
    /// is mutually independent given the conditioning variables.
    pub fn conditional_independence_gap(&self, group: &[&str], given: &[&str]) -> Result<f64> {
        let mut names: Vec<&str> = group.to_vec();
        names.extend_from_slice(given);
        let sub = self.marginalize(&names)?;
        let given_cards: Vec<usize> = given
            .iter()
            .map(|n| sub.vars[sub.var_index(n).unwrap()].card)
            .collect();
        let mut gap: f64 = 0.0;
        for s in assignments(&given_cards) {
            let evidence: Vec<(&str, usize)> = given.iter().cloned().zip(s.iter().cloned()).collect();
            let cond = match sub.condition(&evidence) {
                Ok(t) => t,
                Err(Error::ZeroProbabilityEvidence(_)) => continue,
                Err(e) => return Err(e),
            };
            let singles: Vec<JointTable> = group
                .iter()
                .map(|n| cond.marginalize(&[n]))
                .collect::<Result<_>>()?;
            for (idx, a) in cond.assignments().enumerate() {
                let mut prod = 1.0;
                for (gi, single) in singles.iter().enumerate() {
                    let vi = cond.var_index(group[gi]).unwrap();
                    prod *= single.probs()[a[vi]];
                }
                gap = gap.max((cond.probs[idx] - prod).abs());
            }
        }
        Ok(gap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::RngExt;

    pub(crate) fn random_table(vars: Vec<VarSpec>, seed: u64) -> JointTable {
        let mut rng = stream_rng(seed, 0);
        let cells: usize = vars.iter().map(|v| v.card).product();
        let mut probs: Vec<f64> = (0..cells).map(|_| rng.random_range(0.01..1.0)).collect();
        let sum: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= sum);
        JointTable::new(vars, probs).unwrap()
    }

    #[test]
    fn marginalize_identity_when_keeping_all() {
        let t = random_table(vec![VarSpec::new("u", 2), VarSpec::new("v", 3)], 1);
        let m = t.marginalize(&["u", "v"]).unwrap();
        assert_eq!(m, t);
    }

    #[test]
    fn marginalize_uniform_pair() {
        let t = JointTable::uniform(vec![VarSpec::new("u", 2), VarSpec::new("v", 2)]).unwrap();
        let m = t.marginalize(&["v"]).unwrap();
        assert_eq!(m.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn marginalize_matches_double_loop_summation() {
        // Independent oracle: explicit nested-loop sum over dropped vars.
        let vars = vec![VarSpec::new("u", 2), VarSpec::new("v", 3), VarSpec::new("w", 2)];
        let t = random_table(vars, 42);
        let m = t.marginalize(&["u", "w"]).unwrap();
        for u in 0..2 {
            for w in 0..2 {
                let mut expect = 0.0;
                for v in 0..3 {
                    expect += t.prob(&[u, v, w]);
                }
                assert!((m.prob(&[u, w]) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn marginalize_unknown_variable_errors() {
        let t = JointTable::uniform(vec![VarSpec::new("u", 2)]).unwrap();
        assert!(matches!(
            t.marginalize(&["nope"]),
            Err(Error::UnknownVariable(_))
        ));
    }

    #[test]
    fn condition_on_certain_evidence_is_marginal() {
        // v = 0 with probability 1.
        let t = JointTable::new(
            vec![VarSpec::new("u", 2), VarSpec::new("v", 2)],
            vec![0.3, 0.0, 0.7, 0.0],
        )
        .unwrap();
        let c = t.condition(&[("v", 0)]).unwrap();
        let m = t.marginalize(&["u"]).unwrap();
        assert_eq!(c, m);
    }

    #[test]
    fn condition_independent_pair_leaves_marginal() {
        let pu = [0.2, 0.8];
        let pv = [0.6, 0.4];
        let t = JointTable::from_fn(
            vec![VarSpec::new("u", 2), VarSpec::new("v", 2)],
            |a| pu[a[0]] * pv[a[1]],
        )
        .unwrap();
        for v in 0..2 {
            let c = t.condition(&[("v", v)]).unwrap();
            for (u, &p) in pu.iter().enumerate() {
                assert!((c.prob(&[u]) - p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn condition_then_remultiply_recovers_slice() {
        let vars = vec![VarSpec::new("u", 3), VarSpec::new("v", 2), VarSpec::new("w", 2)];
        let t = random_table(vars, 7);
        let mass = t.partial_mass(&[("v", 1)]).unwrap();
        let c = t.condition(&[("v", 1)]).unwrap();
        for u in 0..3 {
            for w in 0..2 {
                let back = c.prob(&[u, w]) * mass;
                assert!((back - t.prob(&[u, 1, w])).abs() < EPS_NORM);
            }
        }
    }

    #[test]
    fn condition_zero_probability_evidence_errors() {
        let t = JointTable::new(
            vec![VarSpec::new("u", 2), VarSpec::new("v", 2)],
            vec![0.5, 0.0, 0.5, 0.0],
        )
        .unwrap();
        assert!(matches!(
            t.condition(&[("v", 1)]),
            Err(Error::ZeroProbabilityEvidence(_))
        ));
    }

    #[test]
    fn oversized_table_is_rejected() {
        let vars = vec![
            VarSpec::new("u", 4000),
            VarSpec::new("v", 4000),
        ];
        assert!(matches!(
            JointTable::from_fn(vars, |_| 0.0),
            Err(Error::TableTooLarge { .. })
        ));
    }

    #[test]
    fn json_schema_roundtrip() {
        let t = random_table(vec![VarSpec::new("a1", 2), VarSpec::new("y", 3)], 9);
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("\"vars\""));
        assert!(s.contains("\"card\":2"));
        assert!(s.contains("\"probs\""));
        let back: JointTable = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn json_rejects_unnormalized() {
        let s = r#"{"vars":[{"name":"u","card":2}],"probs":[0.5,0.6]}"#;
        assert!(serde_json::from_str::<JointTable>(s).is_err());
    }

    #[test]
    fn empty_assignment_iterator_yields_one_empty() {
        let all: Vec<Vec<usize>> = assignments(&[]).collect();
        assert_eq!(all, vec![Vec::<usize>::new()]);
    }

    #[test]
    fn independence_gap_detects_dependence() {
        // u == v deterministically given the single stratum.
        let t = JointTable::new(
            vec![VarSpec::new("u", 2), VarSpec::new("v", 2), VarSpec::new("s", 1)],
            vec![0.5, 0.0, 0.0, 0.5],
        )
        .unwrap();
        let gap = t.conditional_independence_gap(&["u", "v"], &["s"]).unwrap();
        assert!(gap > 0.2);
    }

    fn small_table_strategy() -> impl Strategy<Value = JointTable> {
        (2usize..4, 2usize..4, 1usize..3)
            .prop_flat_map(|(cu, cv, cw)| {
                let cells = cu * cv * cw;
                (
                    Just((cu, cv, cw)),
                    proptest::collection::vec(0.01f64..1.0, cells),
                )
            })
            .prop_map(|((cu, cv, cw), mut probs)| {
                let sum: f64 = probs.iter().sum();
                probs.iter_mut().for_each(|p| *p /= sum);
                JointTable::new(
                    vec![
                        VarSpec::new("u", cu),
                        VarSpec::new("v", cv),
                        VarSpec::new("w", cw),
                    ],
                    probs,
                )
                .unwrap()
            })
    }

    proptest! {
        #[test]
        fn marginals_stay_normalized(t in small_table_strategy()) {
            let m = t.marginalize(&["u"]).unwrap();
            let sum: f64 = m.probs().iter().sum();
            prop_assert!((sum - 1.0).abs() <= EPS_NORM);
        }

        #[test]
        fn marginalization_commutes(t in small_table_strategy()) {
            let one_shot = t.marginalize(&["w"]).unwrap();
            let stepwise = t.marginalize(&["v", "w"]).unwrap().marginalize(&["w"]).unwrap();
            for (a, b) in one_shot.probs().iter().zip(stepwise.probs()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn conditionals_stay_normalized(t in small_table_strategy()) {
            for v in 0..t.vars()[1].card {
                let c = t.condition(&[("v", v)]).unwrap();
                let sum: f64 = c.probs().iter().sum();
                prop_assert!((sum - 1.0).abs() <= EPS_NORM);
            }
        }
    }
}
