//! Identification formulas and their overlap diagnostics.
//!
//! `adjust` evaluates the confounder-adjustment functional when the latent
//! variable is available in the joint. The observable-only estimands treat
//! a subset of causes as measurements of the confounder: `thm7_estimand`
//! averages the focal conditional over the auxiliary-cause marginal, and
//! `thm8_estimand` imputes a counterfactual inside a stratum where the
//! reconstructed confounder is constant. Non-identified queries are
//! refused with typed errors — bounds for them live in
//! [`crate::sensitivity`], never here.

use crate::error::{Error, Result};
use crate::scm::PotentialOutcomeDist;
use crate::table::{assignments, JointTable};
use serde::{Deserialize, Serialize};

/// Split of the causes into focal (effects under study) and auxiliary
/// (confounder measurements) indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocalPartition {
    focal: Vec<usize>,
    auxiliary: Vec<usize>,
}

impl FocalPartition {
    /// Focal indices must be nonempty, unique and in range; the auxiliary
    /// set is the complement (possibly empty).
    pub fn new(focal: Vec<usize>, n_causes: usize) -> Result<Self> {
        if focal.is_empty() {
            return Err(Error::Shape("focal cause set must be nonempty".into()));
        }
        for (i, &f) in focal.iter().enumerate() {
            if f >= n_causes {
                return Err(Error::Shape(format!("focal index {f} out of range")));
            }
            if focal[..i].contains(&f) {
                return Err(Error::Shape(format!("duplicate focal index {f}")));
            }
        }
        let auxiliary = (0..n_causes).filter(|i| !focal.contains(i)).collect();
        Ok(FocalPartition {
            focal,
            auxiliary,
        })
    }

    pub fn focal(&self) -> &[usize] {
        &self.focal
    }

    pub fn auxiliary(&self) -> &[usize] {
        &self.auxiliary
    }
}

/// Per-stratum overlap record: focal values with zero conditional
/// probability in that stratum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StratumOverlap {
    pub stratum: Vec<usize>,
    pub missing: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlapReport {
    pub strata: Vec<StratumOverlap>,
    pub satisfied: bool,
}

/// The adjustment functional `sum_z P(z) P(Y | A = a, Z = z)` on a joint
/// that includes the confounder. Requires overlap: every positive-mass `z`
/// stratum must give the assignment positive probability.
pub fn adjust(
    full: &JointTable,
    causes: &[&str],
    outcome: &str,
    latent: &str,
    a: &[usize],
) -> Result<PotentialOutcomeDist> {
    if a.len() != causes.len() {
        return Err(Error::Shape("assignment arity != cause count".into()));
    }
    let p_z = full.marginalize(&[latent])?;
    let z_card = p_z.vars()[0].card;
    let y_card = full.vars()[full.var_index(outcome)?].card;

    let mut offending = Vec::new();
    for z in 0..z_card {
        if p_z.probs()[z] == 0.0 {
            continue;
        }
        let mut evidence: Vec<(&str, usize)> =
            causes.iter().cloned().zip(a.iter().cloned()).collect();
        evidence.push((latent, z));
        if full.partial_mass(&evidence)? == 0.0 {
            offending.push(vec![z]);
        }
    }
    if !offending.is_empty() {
        return Err(Error::OverlapViolation {
            context: format!("P(A = {a:?}, Z = z) = 0 on positive-mass z strata"),
            offending,
        });
    }

    let mut dist = vec![0.0; y_card];
    for z in 0..z_card {
        let pz = p_z.probs()[z];
        if pz == 0.0 {
            continue;
        }
        let mut evidence: Vec<(&str, usize)> =
            causes.iter().cloned().zip(a.iter().cloned()).collect();
        evidence.push((latent, z));
        let cond = full.condition(&evidence)?.marginalize(&[outcome])?;
        for (y, &p) in cond.probs().iter().enumerate() {
            dist[y] += pz * p;
        }
    }
    Ok(PotentialOutcomeDist { a: a.to_vec(), dist })
}

/// Observable-only estimand for a focal intervention:
/// `sum_u P(A_aux = u) P(Y | A_focal = a_focal, A_aux = u)`.
///
/// Valid as `P(Y(a_focal))` when the confounder is a function of the
/// auxiliary causes; the overlap precondition requires every positive-mass
/// auxiliary stratum to support the focal assignment.
pub fn thm7_estimand(
    observed: &JointTable,
    causes: &[&str],
    outcome: &str,
    partition: &FocalPartition,
    a_focal: &[usize],
) -> Result<PotentialOutcomeDist> {
    if a_focal.len() != partition.focal().len() {
        return Err(Error::Shape("focal assignment arity mismatch".into()));
    }
    let y_card = observed.vars()[observed.var_index(outcome)?].card;
    let aux_names: Vec<&str> = partition.auxiliary().iter().map(|&i| causes[i]).collect();
    let focal_names: Vec<&str> = partition.focal().iter().map(|&i| causes[i]).collect();

    // Empty auxiliary set: no adjustment, plain conditional.
    if aux_names.is_empty() {
        let evidence: Vec<(&str, usize)> = focal_names
            .iter()
            .cloned()
            .zip(a_focal.iter().cloned())
            .collect();
        let cond = observed.condition(&evidence)?.marginalize(&[outcome])?;
        return Ok(PotentialOutcomeDist {
            a: a_focal.to_vec(),
            dist: cond.probs().to_vec(),
        });
    }

    let p_aux = observed.marginalize(&aux_names)?.reorder(&aux_names)?;
    let aux_cards: Vec<usize> = p_aux.vars().iter().map(|v| v.card).collect();

    let mut offending = Vec::new();
    for (ui, u) in assignments(&aux_cards).enumerate() {
        if p_aux.probs()[ui] == 0.0 {
            continue;
        }
        let mut evidence: Vec<(&str, usize)> = focal_names
            .iter()
            .cloned()
            .zip(a_focal.iter().cloned())
            .collect();
        evidence.extend(aux_names.iter().cloned().zip(u.iter().cloned()));
        if observed.partial_mass(&evidence)? == 0.0 {
            offending.push(u);
        }
    }
    if !offending.is_empty() {
        return Err(Error::OverlapViolation {
            context: format!(
                "P(A_focal = {a_focal:?}, A_aux = u) = 0 on positive-mass auxiliary strata"
            ),
            offending,
        });
    }

    let mut dist = vec![0.0; y_card];
    for (ui, u) in assignments(&aux_cards).enumerate() {
        let pu = p_aux.probs()[ui];
        if pu == 0.0 {
            continue;
        }
        let mut evidence: Vec<(&str, usize)> = focal_names
            .iter()
            .cloned()
            .zip(a_focal.iter().cloned())
            .collect();
        evidence.extend(aux_names.iter().cloned().zip(u.iter().cloned()));
        let cond = observed.condition(&evidence)?.marginalize(&[outcome])?;
        for (y, &p) in cond.probs().iter().enumerate() {
            dist[y] += pu * p;
        }
    }
    Ok(PotentialOutcomeDist {
        a: a_focal.to_vec(),
        dist,
    })
}

/// Counterfactual imputation inside a constant-`zhat` stratum:
/// `P(Y(a') | A = a) = P(Y | A = a')` whenever `zhat(a) = zhat(a')`.
/// Refuses with [`Error::ZhatMismatch`] otherwise — the estimand is not
/// identified and no approximation is offered.
pub fn thm8_estimand(
    observed: &JointTable,
    causes: &[&str],
    outcome: &str,
    a: &[usize],
    a_prime: &[usize],
    zhat_fn: &dyn Fn(&[usize]) -> usize,
) -> Result<Vec<f64>> {
    if a.len() != causes.len() || a_prime.len() != causes.len() {
        return Err(Error::Shape("assignment arity != cause count".into()));
    }
    let za = zhat_fn(a);
    let za_prime = zhat_fn(a_prime);
    if za != za_prime {
        return Err(Error::ZhatMismatch {
            za,
            za_prime,
        });
    }
    let evidence: Vec<(&str, usize)> = causes
        .iter()
        .cloned()
        .zip(a_prime.iter().cloned())
        .collect();
    let cond = observed.condition(&evidence)?.marginalize(&[outcome])?;
    Ok(cond.probs().to_vec())
}

/// Enumerate auxiliary strata and the focal values each one is missing.
/// Diagnostic only; never errors on overlap failure.
pub fn overlap_check(
    observed: &JointTable,
    causes: &[&str],
    partition: &FocalPartition,
) -> Result<OverlapReport> {
    let aux_names: Vec<&str> = partition.auxiliary().iter().map(|&i| causes[i]).collect();
    let focal_names: Vec<&str> = partition.focal().iter().map(|&i| causes[i]).collect();
    let focal_cards: Vec<usize> = focal_names
        .iter()
        .map(|n| Ok(observed.vars()[observed.var_index(n)?].card))
        .collect::<Result<_>>()?;

    let strata_assignments: Vec<Vec<usize>> = if aux_names.is_empty() {
        vec![vec![]]
    } else {
        let p_aux = observed.marginalize(&aux_names)?.reorder(&aux_names)?;
        let aux_cards: Vec<usize> = p_aux.vars().iter().map(|v| v.card).collect();
        assignments(&aux_cards)
            .enumerate()
            .filter(|(ui, _)| p_aux.probs()[*ui] > 0.0)
            .map(|(_, u)| u)
            .collect()
    };

    let mut strata = Vec::new();
    let mut satisfied = true;
    for u in strata_assignments {
        let mut missing = Vec::new();
        for v in assignments(&focal_cards) {
            let mut evidence: Vec<(&str, usize)> = focal_names
                .iter()
                .cloned()
                .zip(v.iter().cloned())
                .collect();
            evidence.extend(aux_names.iter().cloned().zip(u.iter().cloned()));
            if observed.partial_mass(&evidence)? == 0.0 {
                missing.push(v);
            }
        }
        if !missing.is_empty() {
            satisfied = false;
        }
        strata.push(StratumOverlap {
            stratum: u,
            missing,
        });
    }
    Ok(OverlapReport { strata, satisfied })
}

/// Overlap diagnostic for confounder adjustment: for every positive-mass
/// `z` stratum, which full cause assignments have zero probability.
pub fn overlap_check_adjustment(
    full: &JointTable,
    causes: &[&str],
    latent: &str,
) -> Result<OverlapReport> {
    let p_z = full.marginalize(&[latent])?;
    let cause_cards: Vec<usize> = causes
        .iter()
        .map(|n| Ok(full.vars()[full.var_index(n)?].card))
        .collect::<Result<_>>()?;
    let mut strata = Vec::new();
    let mut satisfied = true;
    for z in 0..p_z.vars()[0].card {
        if p_z.probs()[z] == 0.0 {
            continue;
        }
        let mut missing = Vec::new();
        for a in assignments(&cause_cards) {
            let mut evidence: Vec<(&str, usize)> =
                causes.iter().cloned().zip(a.iter().cloned()).collect();
            evidence.push((latent, z));
            if full.partial_mass(&evidence)? == 0.0 {
                missing.push(a);
            }
        }
        if !missing.is_empty() {
            satisfied = false;
        }
        strata.push(StratumOverlap {
            stratum: vec![z],
            missing,
        });
    }
    Ok(OverlapReport { strata, satisfied })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::scm::{random_scm, ScmDims, ScmSpec};
    use crate::table::{total_variation, VarSpec};

    fn random_scm_seeded(dims: &ScmDims, seed: u64) -> ScmSpec {
        let mut rng = stream_rng(seed, 0);
        random_scm(dims, 1.0, &mut rng)
    }

    fn ayz(scm: &ScmSpec) -> JointTable {
        let mut keep: Vec<&str> = scm.cause_names();
        let y = scm.y_spec().name.clone();
        let z = scm.z_spec().name.clone();
        keep.push(&y);
        keep.push(&z);
        scm.full_joint().marginalize(&keep).unwrap()
    }

    #[test]
    fn adjust_with_trivial_latent_is_the_conditional() {
        let dims = ScmDims {
            z_card: 1,
            x_card: None,
            cause_cards: vec![2, 2],
            y_card: 3,
        };
        let scm = random_scm_seeded(&dims, 2);
        let full = ayz(&scm);
        let po = adjust(&full, &["a1", "a2"], "y", "z", &[1, 0]).unwrap();
        let naive = full
            .condition(&[("a1", 1), ("a2", 0)])
            .unwrap()
            .marginalize(&["y"])
            .unwrap();
        assert!(total_variation(&po.dist, naive.probs()) < 1e-12);
    }

    #[test]
    fn adjust_matches_ground_truth_on_scm_joints() {
        for seed in 0..25 {
            let dims = ScmDims {
                z_card: 3,
                x_card: None,
                cause_cards: vec![2, 2],
                y_card: 2,
            };
            let scm = random_scm_seeded(&dims, 900 + seed);
            let full = ayz(&scm);
            for a in assignments(&[2, 2]) {
                let po = adjust(&full, &["a1", "a2"], "y", "z", &a).unwrap();
                let gt = scm.ground_truth_po(&a).unwrap();
                assert!(
                    total_variation(&po.dist, &gt.dist) < 1e-10,
                    "seed {seed}, a {a:?}"
                );
            }
        }
    }

    #[test]
    fn adjust_reports_offending_strata() {
        // z = 1 has mass but never coexists with (a1, a2) = (0, 0).
        let probs = vec![
            // a1, a2, y, z (row-major, cards 2,2,2,2)
            0.10, 0.00, 0.05, 0.00, // a=(0,0): z=1 cells zero
            0.05, 0.05, 0.05, 0.05, // a=(0,1)
            0.05, 0.05, 0.05, 0.05, // a=(1,0)
            0.125, 0.10, 0.10, 0.125, // a=(1,1)
        ];
        let full = JointTable::new(
            vec![
                VarSpec::new("a1", 2),
                VarSpec::new("a2", 2),
                VarSpec::new("y", 2),
                VarSpec::new("z", 2),
            ],
            probs,
        )
        .unwrap();
        match adjust(&full, &["a1", "a2"], "y", "z", &[0, 0]) {
            Err(Error::OverlapViolation { offending, .. }) => {
                assert_eq!(offending, vec![vec![1]]);
            }
            other => panic!("expected overlap violation, got {other:?}"),
        }
    }

    #[test]
    fn thm7_with_empty_auxiliary_is_plain_conditional() {
        let dims = ScmDims {
            z_card: 2,
            x_card: None,
            cause_cards: vec![2, 2],
            y_card: 2,
        };
        let scm = random_scm_seeded(&dims, 31);
        let obs = scm.observed_joint();
        let part = FocalPartition::new(vec![0, 1], 2).unwrap();
        let est = thm7_estimand(&obs, &["a1", "a2"], "y", &part, &[1, 1]).unwrap();
        let naive = obs
            .condition(&[("a1", 1), ("a2", 1)])
            .unwrap()
            .marginalize(&["y"])
            .unwrap();
        assert!(total_variation(&est.dist, naive.probs()) < 1e-12);
    }

    /// Template family where the confounder is readable off one auxiliary
    /// cause through a permutation.
    fn scm_with_aux_determined_z(seed: u64, perm: &[usize]) -> ScmSpec {
        let z_card = perm.len();
        let dims = ScmDims {
            z_card,
            x_card: None,
            cause_cards: vec![2, z_card, 2],
            y_card: 2,
        };
        let base = random_scm_seeded(&dims, seed);
        // Cause a2 = perm(z) deterministically.
        let det: Vec<Vec<f64>> = (0..z_card)
            .map(|z| {
                (0..z_card)
                    .map(|a| if a == perm[z] { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        ScmSpec::new(
            base.z_spec().clone(),
            None,
            base.cause_specs().to_vec(),
            base.y_spec().clone(),
            base.p_z().to_vec(),
            None,
            vec![
                (0..z_card).map(|z| base.p_a_row(0, z).to_vec()).collect(),
                det,
                (0..z_card).map(|z| base.p_a_row(2, z).to_vec()).collect(),
            ],
            (0..base.n_cause_assignments())
                .map(|ai| (0..z_card).map(|z| base.p_y_row(ai, z).to_vec()).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn thm7_recovers_structural_truth_when_z_is_aux_function() {
        for (seed, perm) in [(71u64, vec![0usize, 1]), (72, vec![1, 0]), (73, vec![2, 0, 1])] {
            let scm = scm_with_aux_determined_z(seed, &perm);
            let obs = scm.observed_joint();
            let part = FocalPartition::new(vec![0, 2], 3).unwrap();
            for af in assignments(&[2, 2]) {
                let est = thm7_estimand(&obs, &["a1", "a2", "a3"], "y", &part, &af).unwrap();
                let truth = scm.ground_truth_po_focal(&[0, 2], &af).unwrap();
                assert!(
                    total_variation(&est.dist, &truth.dist) < 1e-10,
                    "seed {seed} af {af:?}"
                );
            }
        }
    }

    #[test]
    fn thm7_gap_when_z_is_not_an_aux_function() {
        // Noisy measurement: a generic model violates the functional
        // assumption and the estimand misses the structural truth.
        let mut worst: f64 = 0.0;
        for seed in 0..10 {
            let dims = ScmDims {
                z_card: 2,
                x_card: None,
                cause_cards: vec![2, 2],
                y_card: 2,
            };
            let scm = random_scm_seeded(&dims, 120 + seed);
            let obs = scm.observed_joint();
            let part = FocalPartition::new(vec![0], 2).unwrap();
            let est = thm7_estimand(&obs, &["a1", "a2"], "y", &part, &[1]).unwrap();
            let truth = scm.ground_truth_po_focal(&[0], &[1]).unwrap();
            worst = worst.max(total_variation(&est.dist, &truth.dist));
        }
        assert!(worst > 1e-3, "max gap {worst}");
    }

    #[test]
    fn thm7_invariant_to_auxiliary_relabeling() {
        let scm = scm_with_aux_determined_z(99, &[1, 0]);
        let obs = scm.observed_joint();
        let part = FocalPartition::new(vec![0, 2], 3).unwrap();
        let est = thm7_estimand(&obs, &["a1", "a2", "a3"], "y", &part, &[1, 0]).unwrap();

        // Relabel the auxiliary cause's levels in the observed table.
        let relabeled = JointTable::from_fn(obs.vars().to_vec(), |lv| {
            let mut src = lv.to_vec();
            src[1] = 1 - src[1];
            obs.prob(&src)
        })
        .unwrap();
        let est2 = thm7_estimand(&relabeled, &["a1", "a2", "a3"], "y", &part, &[1, 0]).unwrap();
        assert!(total_variation(&est.dist, &est2.dist) < 1e-12);
    }

    #[test]
    fn thm8_consistency_and_counterfactual_recovery() {
        let perm = [1usize, 0];
        let scm = {
            // Z determined by cause a1 via perm: reuse the aux-determined
            // construction with the deterministic cause first.
            let z_card = 2;
            let dims = ScmDims {
                z_card,
                x_card: None,
                cause_cards: vec![z_card, 2, 2],
                y_card: 2,
            };
            let base = random_scm_seeded(&dims, 200);
            let det: Vec<Vec<f64>> = (0..z_card)
                .map(|z| {
                    (0..z_card)
                        .map(|a| if a == perm[z] { 1.0 } else { 0.0 })
                        .collect()
                })
                .collect();
            ScmSpec::new(
                base.z_spec().clone(),
                None,
                base.cause_specs().to_vec(),
                base.y_spec().clone(),
                base.p_z().to_vec(),
                None,
                vec![
                    det,
                    (0..z_card).map(|z| base.p_a_row(1, z).to_vec()).collect(),
                    (0..z_card).map(|z| base.p_a_row(2, z).to_vec()).collect(),
                ],
                (0..base.n_cause_assignments())
                    .map(|ai| (0..z_card).map(|z| base.p_y_row(ai, z).to_vec()).collect())
                    .collect(),
            )
            .unwrap()
        };
        let obs = scm.observed_joint();
        let causes = ["a1", "a2", "a3"];
        let zhat = |a: &[usize]| perm.iter().position(|&p| p == a[0]).unwrap();

        // Consistency: a = a'.
        let a = [1, 0, 1];
        let est = thm8_estimand(&obs, &causes, "y", &a, &a, &zhat).unwrap();
        let direct = obs
            .condition(&[("a1", 1), ("a2", 0), ("a3", 1)])
            .unwrap()
            .marginalize(&["y"])
            .unwrap();
        assert!(total_variation(&est, direct.probs()) < 1e-12);

        // Same zhat level, different assignment: matches the structural
        // counterfactual oracle.
        let a_obs = [1, 0, 1];
        let a_prime = [1, 1, 0];
        assert_eq!(zhat(&a_obs), zhat(&a_prime));
        let est = thm8_estimand(&obs, &causes, "y", &a_obs, &a_prime, &zhat).unwrap();
        let oracle = scm.counterfactual_po(&a_prime, &a_obs).unwrap();
        assert!(
            total_variation(&est, &oracle) < 1e-10,
            "est {est:?} oracle {oracle:?}"
        );

        // Different zhat levels: refused.
        let a_far = [0, 1, 0];
        assert!(matches!(
            thm8_estimand(&obs, &causes, "y", &a_obs, &a_far, &zhat),
            Err(Error::ZhatMismatch { .. })
        ));
    }

    #[test]
    fn thm7_refuses_on_missing_focal_support() {
        // a1 copies a2: within each auxiliary stratum the opposite focal
        // value never occurs.
        let copied = JointTable::new(
            vec![
                VarSpec::new("a1", 2),
                VarSpec::new("a2", 2),
                VarSpec::new("y", 2),
            ],
            vec![0.2, 0.3, 0.0, 0.0, 0.0, 0.0, 0.2, 0.3],
        )
        .unwrap();
        let part = FocalPartition::new(vec![0], 2).unwrap();
        match thm7_estimand(&copied, &["a1", "a2"], "y", &part, &[1]) {
            Err(Error::OverlapViolation { offending, .. }) => {
                assert_eq!(offending, vec![vec![0]]);
            }
            other => panic!("expected overlap violation, got {other:?}"),
        }
    }

    #[test]
    fn thm8_zero_probability_target_is_an_error() {
        let obs = JointTable::new(
            vec![
                VarSpec::new("a1", 2),
                VarSpec::new("a2", 2),
                VarSpec::new("y", 2),
            ],
            vec![0.25, 0.25, 0.25, 0.25, 0.0, 0.0, 0.0, 0.0],
        )
        .unwrap();
        let err = thm8_estimand(&obs, &["a1", "a2"], "y", &[0, 0], &[1, 1], &|_| 0);
        assert!(matches!(err, Err(Error::ZeroProbabilityEvidence(_))));
    }

    #[test]
    fn overlap_reports() {
        // Strictly positive joint: satisfied.
        let dims = ScmDims {
            z_card: 2,
            x_card: None,
            cause_cards: vec![2, 2],
            y_card: 2,
        };
        let scm = random_scm_seeded(&dims, 61);
        let obs = scm.observed_joint();
        let part = FocalPartition::new(vec![0], 2).unwrap();
        let rep = overlap_check(&obs, &["a1", "a2"], &part).unwrap();
        assert!(rep.satisfied);

        // Copied causes: every auxiliary stratum misses one focal value.
        let copied = JointTable::new(
            vec![
                VarSpec::new("a1", 2),
                VarSpec::new("a2", 2),
                VarSpec::new("y", 2),
            ],
            vec![0.2, 0.3, 0.0, 0.0, 0.0, 0.0, 0.2, 0.3],
        )
        .unwrap();
        let rep = overlap_check(&copied, &["a1", "a2"], &part).unwrap();
        assert!(!rep.satisfied);
        for s in &rep.strata {
            assert_eq!(s.missing.len(), 1);
            // The missing focal value is the one differing from the stratum.
            assert_eq!(s.missing[0][0], 1 - s.stratum[0]);
        }
    }

    #[test]
    fn overlap_single_missing_cell_is_listed_exactly() {
        let full = JointTable::new(
            vec![
                VarSpec::new("a1", 2),
                VarSpec::new("a2", 2),
                VarSpec::new("y", 1),
            ],
            vec![0.4, 0.3, 0.0, 0.3],
        )
        .unwrap();
        let part = FocalPartition::new(vec![0], 2).unwrap();
        let rep = overlap_check(&full, &["a1", "a2"], &part).unwrap();
        assert!(!rep.satisfied);
        let bad: Vec<&StratumOverlap> =
            rep.strata.iter().filter(|s| !s.missing.is_empty()).collect();
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].stratum, vec![0]);
        assert_eq!(bad[0].missing, vec![vec![1]]);
    }

    #[test]
    fn adjustment_overlap_check_flags_z_strata() {
        let dims = ScmDims {
            z_card: 3,
            x_card: None,
            cause_cards: vec![2, 2],
            y_card: 2,
        };
        let scm = random_scm_seeded(&dims, 62);
        let full = ayz(&scm);
        let rep = overlap_check_adjustment(&full, &["a1", "a2"], "z").unwrap();
        assert!(rep.satisfied);
        assert_eq!(rep.strata.len(), 3);
    }
}
