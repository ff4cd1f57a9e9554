//! The selective-workflow gate: test whether the causes look mutually
//! independent given the reconstructed confounder, and only then allow the
//! observable-only estimands.
//!
//! The per-cause statistic is the within-stratum G-statistic of `A^(k)`
//! against the joint level of the remaining causes, summed over strata of
//! `zhat`. Calibration is by permutation (shuffling `A^(k)` within each
//! stratum) rather than asymptotics, since strata can be small. A PASS is
//! only as good as the test's power, so every report carries a
//! simulation-estimated minimum detectable dependence.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::scm::ScmSpec;
use crate::table::{assignments, strides};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Strata below this row count are excluded from the statistic and reported.
pub const MIN_STRATUM_ROWS: usize = 5;

/// Joint-level collapsing of the complementary causes is exact up to this
/// many causes; beyond it the statistic falls back to a pairwise sum.
pub const MAX_EXACT_CAUSES: usize = 6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExcludedStratum {
    pub stratum: usize,
    pub n_rows: usize,
}

/// One per-cause conditional-independence test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CiTestResult {
    pub cause_index: usize,
    pub p_value: f64,
    pub statistic: f64,
    pub n_permutations: usize,
    /// Strata with fewer than [`MIN_STRATUM_ROWS`] rows (warning, not error).
    pub excluded_strata: Vec<ExcludedStratum>,
    /// True when the statistic summed pairwise G terms instead of collapsing
    /// the complementary causes to their joint level.
    pub pairwise_approximation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateOutcome {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

/// Simulation-estimated power annotation. `min_detectable_strength` is the
/// weakest injected coupling fraction rejected in at least `target_power`
/// of trials, `None` when nothing on the grid was reliably detected.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerNote {
    pub min_detectable_strength: Option<f64>,
    pub target_power: f64,
    pub trials_per_strength: usize,
    pub strength_grid: Vec<f64>,
    pub description: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateReport {
    pub per_cause_pvalues: Vec<f64>,
    pub alpha: f64,
    pub bonferroni: bool,
    pub decision: GateOutcome,
    pub n_permutations: usize,
    pub power_note: PowerNote,
    pub excluded_strata: Vec<ExcludedStratum>,
    pub pairwise_approximation: bool,
}

impl GateReport {
    pub fn passed(&self) -> bool {
        self.decision == GateOutcome::Pass
    }
}

/// Group row indices by stratum label.
fn strata_of(zhat: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut m: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &s) in zhat.iter().enumerate() {
        m.entry(s).or_default().push(i);
    }
    m
}

/// G-statistic of two integer-coded vectors restricted to `rows`.
fn g_statistic(a: &[usize], b: &[usize], rows: &[usize], card_a: usize, card_b: usize) -> f64 {
    let mut table = vec![0.0f64; card_a * card_b];
    let mut row_tot = vec![0.0f64; card_a];
    let mut col_tot = vec![0.0f64; card_b];
    for &i in rows {
        table[a[i] * card_b + b[i]] += 1.0;
        row_tot[a[i]] += 1.0;
        col_tot[b[i]] += 1.0;
    }
    let n = rows.len() as f64;
    let mut g = 0.0;
    for u in 0..card_a {
        for v in 0..card_b {
            let o = table[u * card_b + v];
            if o > 0.0 {
                let e = row_tot[u] * col_tot[v] / n;
                g += 2.0 * o * (o / e).ln();
            }
        }
    }
    g
}

struct StatContext {
    /// Column of the tested cause.
    target: Vec<usize>,
    target_card: usize,
    /// Complementary causes, either collapsed to one joint column or kept
    /// separate for the pairwise fallback.
    others: Vec<(Vec<usize>, usize)>,
    pairwise: bool,
    included: Vec<Vec<usize>>,
    excluded: Vec<ExcludedStratum>,
}

fn build_context(
    data: &Dataset,
    causes: &[&str],
    zhat: &[usize],
    k: usize,
) -> Result<StatContext> {
    if k >= causes.len() {
        return Err(Error::Shape(format!("cause index {k} out of range")));
    }
    if zhat.len() != data.n_rows() {
        return Err(Error::Shape("zhat column length must match the data".into()));
    }
    let target = data.column(causes[k])?;
    let target_card = data.vars()[data.var_index(causes[k])?].card;

    let rest: Vec<&str> = causes
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, n)| *n)
        .collect();
    let pairwise = causes.len() > MAX_EXACT_CAUSES;
    let mut others = Vec::new();
    if pairwise {
        for name in &rest {
            let col = data.column(name)?;
            let card = data.vars()[data.var_index(name)?].card;
            others.push((col, card));
        }
    } else {
        let cards: Vec<usize> = rest
            .iter()
            .map(|n| Ok(data.vars()[data.var_index(n)?].card))
            .collect::<Result<_>>()?;
        let st = strides(&cards);
        let cols: Vec<Vec<usize>> = rest
            .iter()
            .map(|n| data.column(n))
            .collect::<Result<_>>()?;
        let joint_card: usize = cards.iter().product::<usize>().max(1);
        let mut joint = vec![0usize; data.n_rows()];
        for (i, j) in joint.iter_mut().enumerate() {
            *j = cols.iter().zip(&st).map(|(c, s)| c[i] * s).sum();
        }
        others.push((joint, joint_card));
    }

    let mut included = Vec::new();
    let mut excluded = Vec::new();
    for (s, rows) in strata_of(zhat) {
        if rows.len() < MIN_STRATUM_ROWS {
            excluded.push(ExcludedStratum {
                stratum: s,
                n_rows: rows.len(),
            });
        } else {
            included.push(rows);
        }
    }
    Ok(StatContext {
        target,
        target_card,
        others,
        pairwise,
        included,
        excluded,
    })
}

fn context_statistic(ctx: &StatContext, target: &[usize]) -> f64 {
    let mut g = 0.0;
    for rows in &ctx.included {
        for (other, card) in &ctx.others {
            g += g_statistic(target, other, rows, ctx.target_card, *card);
        }
    }
    g
}

/// Permutation p-value for `A^(k)` independent of the remaining causes
/// within the strata of `zhat`. Permutations shuffle the tested cause within
/// each stratum; `p = (1 + #{perm >= obs}) / (1 + n_permutations)`.
pub fn mutual_ci_test(
    data: &Dataset,
    causes: &[&str],
    zhat: &[usize],
    k: usize,
    n_permutations: usize,
    seed: u64,
) -> Result<CiTestResult> {
    if n_permutations < 99 {
        return Err(Error::Shape("at least 99 permutations required".into()));
    }
    let ctx = build_context(data, causes, zhat, k)?;
    let observed = context_statistic(&ctx, &ctx.target);

    let exceed: usize = (0..n_permutations)
        .into_par_iter()
        .map(|perm| {
            let mut rng = stream_rng(seed, perm as u64);
            let mut shuffled = ctx.target.clone();
            for rows in &ctx.included {
                let mut vals: Vec<usize> = rows.iter().map(|&i| shuffled[i]).collect();
                vals.shuffle(&mut rng);
                for (&i, &v) in rows.iter().zip(&vals) {
                    shuffled[i] = v;
                }
            }
            usize::from(context_statistic(&ctx, &shuffled) >= observed)
        })
        .sum();

    Ok(CiTestResult {
        cause_index: k,
        p_value: (1.0 + exceed as f64) / (1.0 + n_permutations as f64),
        statistic: observed,
        n_permutations,
        excluded_strata: ctx.excluded,
        pairwise_approximation: ctx.pairwise,
    })
}

/// Gate configuration. No multiplicity correction by default: any single
/// rejection already forces FAIL, which is the conservative direction for
/// the green light. A Bonferroni switch is provided.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateConfig {
    pub alpha: f64,
    pub bonferroni: bool,
    pub n_permutations: usize,
    pub power_trials: usize,
    pub power_target: f64,
    pub power_permutations: usize,
    pub power_grid: Vec<f64>,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            alpha: 0.05,
            bonferroni: false,
            n_permutations: 499,
            power_trials: 20,
            power_target: 0.8,
            power_permutations: 99,
            power_grid: (1..=40).map(|i| i as f64 * 0.025).collect(),
        }
    }
}

/// PASS/FAIL decision over completed per-cause tests, with a mandatory
/// power annotation estimated on the same data.
pub fn gate_decision(
    results: &[CiTestResult],
    cfg: &GateConfig,
    data: &Dataset,
    causes: &[&str],
    zhat: &[usize],
    seed: u64,
) -> Result<GateReport> {
    if results.len() != causes.len() {
        return Err(Error::Shape("one completed test per cause is required".into()));
    }
    let threshold = if cfg.bonferroni {
        cfg.alpha / causes.len() as f64
    } else {
        cfg.alpha
    };
    let pvalues: Vec<f64> = results.iter().map(|r| r.p_value).collect();
    let decision = if pvalues.iter().all(|&p| p > threshold) {
        GateOutcome::Pass
    } else {
        GateOutcome::Fail
    };
    let power_note = estimate_power(data, causes, zhat, cfg, seed)?;
    let mut excluded = Vec::new();
    for r in results {
        for e in &r.excluded_strata {
            if !excluded
                .iter()
                .any(|x: &ExcludedStratum| x.stratum == e.stratum)
            {
                excluded.push(e.clone());
            }
        }
    }
    Ok(GateReport {
        per_cause_pvalues: pvalues,
        alpha: cfg.alpha,
        bonferroni: cfg.bonferroni,
        decision,
        n_permutations: cfg.n_permutations,
        power_note,
        excluded_strata: excluded,
        pairwise_approximation: results.iter().any(|r| r.pairwise_approximation),
    })
}

/// Estimate the weakest detectable within-stratum dependence at this sample
/// size: couple cause 0 to cause 1 in a random fraction `s` of rows of a
/// null (within-stratum permuted) copy, and find the smallest `s` on the
/// grid that is rejected in at least `power_target` of trials.
pub fn estimate_power(
    data: &Dataset,
    causes: &[&str],
    zhat: &[usize],
    cfg: &GateConfig,
    seed: u64,
) -> Result<PowerNote> {
    if causes.len() < 2 {
        return Err(Error::Shape("power estimation needs at least two causes".into()));
    }
    let threshold = if cfg.bonferroni {
        cfg.alpha / causes.len() as f64
    } else {
        cfg.alpha
    };
    let col0 = data.column(causes[0])?;
    let card0 = data.vars()[data.var_index(causes[0])?].card;
    let col1 = data.column(causes[1])?;
    let strata = strata_of(zhat);
    let description = format!(
        "weakest coupling fraction between {} and {} rejected in >= {:.0}% of {} trials at alpha {}",
        causes[0],
        causes[1],
        cfg.power_target * 100.0,
        cfg.power_trials,
        threshold
    );

    let mut min_detectable = None;
    'grid: for (si, &strength) in cfg.power_grid.iter().enumerate() {
        let rejections: usize = (0..cfg.power_trials)
            .into_par_iter()
            .map(|trial| {
                let stream = (si * cfg.power_trials + trial) as u64;
                let mut rng = stream_rng(seed ^ 0xA5A5_5A5A, stream);
                // Null copy: within-stratum shuffle of cause 0 kills any
                // real dependence, then coupling is injected.
                let mut injected = col0.clone();
                for rows in strata.values() {
                    let mut vals: Vec<usize> = rows.iter().map(|&i| injected[i]).collect();
                    vals.shuffle(&mut rng);
                    for (&i, &v) in rows.iter().zip(&vals) {
                        injected[i] = v;
                    }
                }
                use rand::RngExt;
                for (i, v) in injected.iter_mut().enumerate() {
                    if rng.random_range(0.0..1.0) < strength {
                        *v = col1[i] % card0;
                    }
                }
                let mut patched_rows: Vec<Vec<usize>> = data.rows().to_vec();
                let c0 = data.var_index(causes[0]).expect("checked above");
                for (row, &v) in patched_rows.iter_mut().zip(&injected) {
                    row[c0] = v;
                }
                let patched = Dataset::new(data.vars().to_vec(), patched_rows)
                    .expect("levels unchanged in range");
                let res = mutual_ci_test(
                    &patched,
                    causes,
                    zhat,
                    0,
                    cfg.power_permutations,
                    seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15),
                )
                .expect("test on patched data");
                usize::from(res.p_value <= threshold)
            })
            .sum();
        if rejections as f64 >= cfg.power_target * cfg.power_trials as f64 {
            min_detectable = Some(strength);
            break 'grid;
        }
    }
    Ok(PowerNote {
        min_detectable_strength: min_detectable,
        target_power: cfg.power_target,
        trials_per_strength: cfg.power_trials,
        strength_grid: cfg.power_grid.clone(),
        description,
    })
}

/// Population-level check of the testable-implication proposition on one
/// model instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prop1Report {
    /// `max |P(A | zhat) - prod_k P(A^(k) | zhat)|` over strata and cells.
    pub cause_gap: f64,
    /// `max |P(Y(a) | A, zhat) - P(Y(a) | zhat)|` over interventions,
    /// strata, observed assignments and outcome levels.
    pub po_gap: f64,
    /// The implication `cause_gap ~ 0  =>  po_gap ~ 0` on this instance.
    pub holds: bool,
}

/// Tolerance at which a population gap counts as zero.
pub const PROP1_TOL: f64 = 1e-9;

/// Exact enumeration of the claim: if the causes are mutually independent
/// given `zhat(A, X)`, the potential outcomes are too. Potential outcomes
/// are evaluated from the structural tables (given the DAG, `Y(a)` depends
/// on `Z` alone). The proposition is treated as falsifiable
/// and verified, not assumed.
pub fn prop1_verify_population(
    scm: &ScmSpec,
    zhat_fn: &dyn Fn(&[usize], usize) -> usize,
) -> Result<Prop1Report> {
    let x_spec = scm
        .x_spec()
        .ok_or_else(|| Error::DagViolation("proposition check needs a covariate X".into()))?;
    let x_card = x_spec.card;
    let z_card = scm.z_spec().card;
    let y_card = scm.y_spec().card;
    let cause_cards = scm.cause_cards();
    let n_assign = scm.n_cause_assignments();

    // X must be independent of the causes given Z. The fixed DAG guarantees
    // it; verify numerically anyway so a future extension cannot silently
    // break the premise.
    {
        let full = scm.full_joint();
        let mut group: Vec<&str> = scm.cause_names();
        group.push(&x_spec.name);
        let gap = full.conditional_independence_gap(&group, &[scm.z_spec().name.as_str()])?;
        if gap > 1e-9 {
            return Err(Error::DagViolation(format!(
                "X is not independent of the causes given Z (gap {gap})"
            )));
        }
    }

    // Joint weights P(a, x, z) and stratum labels over (a, x).
    let mut labels = vec![0usize; n_assign * x_card];
    let mut max_label = 0usize;
    for (ai, a) in assignments(&cause_cards).enumerate() {
        for x in 0..x_card {
            let s = zhat_fn(&a, x);
            labels[ai * x_card + x] = s;
            max_label = max_label.max(s);
        }
    }
    let n_strata = max_label + 1;

    let mut w_axz = vec![0.0f64; n_assign * x_card * z_card];
    for (ai, a) in assignments(&cause_cards).enumerate() {
        for x in 0..x_card {
            for z in 0..z_card {
                let px = scm.p_x_row(z).expect("x present")[x];
                w_axz[(ai * x_card + x) * z_card + z] =
                    scm.p_z()[z] * scm.p_causes_given_z(&a, z) * px;
            }
        }
    }

    // Stratum masses and P(a | s).
    let mut stratum_mass = vec![0.0f64; n_strata];
    let mut p_a_s = vec![0.0f64; n_strata * n_assign];
    for ai in 0..n_assign {
        for x in 0..x_card {
            let s = labels[ai * x_card + x];
            let w: f64 = (0..z_card).map(|z| w_axz[(ai * x_card + x) * z_card + z]).sum();
            stratum_mass[s] += w;
            p_a_s[s * n_assign + ai] += w;
        }
    }

    let mut cause_gap: f64 = 0.0;
    for s in 0..n_strata {
        if stratum_mass[s] <= 0.0 {
            continue;
        }
        // Per-cause marginals within the stratum.
        let mut marg: Vec<Vec<f64>> = cause_cards.iter().map(|&c| vec![0.0; c]).collect();
        for (ai, a) in assignments(&cause_cards).enumerate() {
            let p = p_a_s[s * n_assign + ai] / stratum_mass[s];
            for (k, &lv) in a.iter().enumerate() {
                marg[k][lv] += p;
            }
        }
        for (ai, a) in assignments(&cause_cards).enumerate() {
            let p = p_a_s[s * n_assign + ai] / stratum_mass[s];
            let prod: f64 = a.iter().enumerate().map(|(k, &lv)| marg[k][lv]).product();
            cause_gap = cause_gap.max((p - prod).abs());
        }
    }

    // Potential outcomes: Y(a*) depends on Z only, so
    // P(Y(a*) = y | A = a, zhat = s) mixes the outcome rows with the
    // conditional z-weights of the (a, s) cell.
    let mut po_gap: f64 = 0.0;
    for a_star in assignments(&cause_cards) {
        let ai_star = scm.cause_index(&a_star)?;
        // P(Y(a*) | s).
        for s in 0..n_strata {
            if stratum_mass[s] <= 0.0 {
                continue;
            }
            let mut dist_s = vec![0.0f64; y_card];
            for ai in 0..n_assign {
                for x in 0..x_card {
                    if labels[ai * x_card + x] != s {
                        continue;
                    }
                    for z in 0..z_card {
                        let w = w_axz[(ai * x_card + x) * z_card + z];
                        for (d, &p) in dist_s.iter_mut().zip(scm.p_y_row(ai_star, z)) {
                            *d += w * p;
                        }
                    }
                }
            }
            dist_s.iter_mut().for_each(|v| *v /= stratum_mass[s]);

            for (ai, _a) in assignments(&cause_cards).enumerate() {
                let cell_mass = p_a_s[s * n_assign + ai];
                if cell_mass <= 0.0 {
                    continue;
                }
                let mut dist_as = vec![0.0f64; y_card];
                for x in 0..x_card {
                    if labels[ai * x_card + x] != s {
                        continue;
                    }
                    for z in 0..z_card {
                        let w = w_axz[(ai * x_card + x) * z_card + z];
                        for (d, &p) in dist_as.iter_mut().zip(scm.p_y_row(ai_star, z)) {
                            *d += w * p;
                        }
                    }
                }
                dist_as.iter_mut().for_each(|v| *v /= cell_mass);
                for y in 0..y_card {
                    po_gap = po_gap.max((dist_as[y] - dist_s[y]).abs());
                }
            }
        }
    }

    Ok(Prop1Report {
        cause_gap,
        po_gap,
        holds: cause_gap > PROP1_TOL || po_gap <= PROP1_TOL,
    })
}
