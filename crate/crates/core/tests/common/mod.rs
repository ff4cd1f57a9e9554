//! Shared model families for the integration and acceptance suites.
#![allow(dead_code)] // each test target uses a different subset

use multicause_core::rng::stream_rng;
use multicause_core::scm::{random_scm, ScmDims, ScmSpec};
use multicause_core::VarSpec;
use rand::seq::SliceRandom;
use rand::{Rng, RngExt};

pub fn seeded_random_scm(dims: &ScmDims, seed: u64) -> ScmSpec {
    let mut rng = stream_rng(seed, 0);
    random_scm(dims, 1.0, &mut rng)
}

/// Identity-like deterministic table mapping z to level `perm[z]`.
pub fn deterministic_rows(perm: &[usize], card: usize) -> Vec<Vec<f64>> {
    perm.iter()
        .map(|&target| (0..card).map(|l| if l == target { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn random_permutation(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Model whose covariate X pins the confounder down exactly: X = perm(Z),
/// so `zhat(a, x) = perm^{-1}(x)` recovers Z. Everything else is Dirichlet.
pub fn scm_with_identifying_covariate(z_card: usize, m: usize, y_card: usize, seed: u64) -> (ScmSpec, Vec<usize>) {
    let mut rng = stream_rng(seed, 1);
    let dims = ScmDims {
        z_card,
        x_card: Some(z_card),
        cause_cards: vec![2; m],
        y_card,
    };
    let base = random_scm(&dims, 1.0, &mut rng);
    let perm = random_permutation(z_card, &mut rng);
    let scm = ScmSpec::new(
        base.z_spec().clone(),
        base.x_spec().cloned(),
        base.cause_specs().to_vec(),
        base.y_spec().clone(),
        base.p_z().to_vec(),
        Some(deterministic_rows(&perm, z_card)),
        (0..m)
            .map(|k| (0..z_card).map(|z| base.p_a_row(k, z).to_vec()).collect())
            .collect(),
        (0..base.n_cause_assignments())
            .map(|ai| (0..z_card).map(|z| base.p_y_row(ai, z).to_vec()).collect())
            .collect(),
    )
    .unwrap();
    (scm, perm)
}

/// Model where one cause is a deterministic relabeling of the confounder:
/// `A^(det_idx) = perm(Z)`, making Z a function of that cause. Remaining
/// tables are strictly positive Dirichlet draws.
pub fn scm_with_deterministic_cause(
    z_card: usize,
    m: usize,
    det_idx: usize,
    y_card: usize,
    seed: u64,
) -> (ScmSpec, Vec<usize>) {
    let mut rng = stream_rng(seed, 2);
    let mut cause_cards = vec![2usize; m];
    cause_cards[det_idx] = z_card;
    let dims = ScmDims {
        z_card,
        x_card: None,
        cause_cards,
        y_card,
    };
    let base = random_scm(&dims, 1.0, &mut rng);
    let perm = random_permutation(z_card, &mut rng);
    let p_a: Vec<Vec<Vec<f64>>> = (0..m)
        .map(|k| {
            if k == det_idx {
                deterministic_rows(&perm, z_card)
            } else {
                (0..z_card).map(|z| base.p_a_row(k, z).to_vec()).collect()
            }
        })
        .collect();
    let scm = ScmSpec::new(
        base.z_spec().clone(),
        None,
        base.cause_specs().to_vec(),
        base.y_spec().clone(),
        base.p_z().to_vec(),
        None,
        p_a,
        (0..base.n_cause_assignments())
            .map(|ai| (0..z_card).map(|z| base.p_y_row(ai, z).to_vec()).collect())
            .collect(),
    )
    .unwrap();
    (scm, perm)
}

/// Strictly positive random joint over (a1..am, y, z).
pub fn random_positive_ayz(m: usize, y_card: usize, z_card: usize, seed: u64) -> multicause_core::JointTable {
    let mut rng = stream_rng(seed, 3);
    let mut vars: Vec<VarSpec> = (0..m).map(|k| VarSpec::new(format!("a{}", k + 1), 2)).collect();
    vars.push(VarSpec::new("y", y_card));
    vars.push(VarSpec::new("z", z_card));
    let cells: usize = vars.iter().map(|v| v.card).product();
    let mut probs: Vec<f64> = (0..cells).map(|_| rng.random_range(0.02..1.0)).collect();
    let sum: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= sum);
    multicause_core::JointTable::new(vars, probs).unwrap()
}

pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0usize; perm.len()];
    for (z, &t) in perm.iter().enumerate() {
        inv[t] = z;
    }
    inv
}
