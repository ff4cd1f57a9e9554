//! Subcommand implementations. Every run writes a `run_config.json` with
//! the fully resolved parameters and seed, and all numeric JSON output is
//! serialized at fixed precision so reruns are byte-identical.

use crate::output::{
    fill, load_config, parse_f64_list, parse_usize_list, write_atomic, write_json,
};
use crate::{
    DemoArgs, FitArgs, GateArgs, IdentifyArgs, SensitivityArgs, SimulateArgs,
};
use multicause_core::dataset::Dataset;
use multicause_core::gate::{gate_decision, mutual_ci_test, GateConfig};
use multicause_core::identify::{
    adjust, overlap_check, overlap_check_adjustment, thm7_estimand, thm8_estimand, FocalPartition,
};
use multicause_core::latent::{em_fit, EmConfig, LatentClassModel};
use multicause_core::rng::stream_rng;
use multicause_core::scm::{make_confounded_pair, random_scm, ScmDims, ScmSpec};
use multicause_core::sensitivity::{
    sensitivity_report_fitted, sensitivity_report_scm, Estimand,
};
use multicause_core::table::total_variation;
use multicause_core::{Error, Result};
use serde_json::json;
use std::path::{Path, PathBuf};

fn out_dir(path: &Option<String>) -> Result<PathBuf> {
    let p = path
        .as_ref()
        .ok_or_else(|| Error::Shape("--out-dir is required".into()))?;
    std::fs::create_dir_all(p)?;
    Ok(PathBuf::from(p))
}

fn load_dataset(path: &str) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    Dataset::read_csv(file, None)
}

fn load_scm(path: &str) -> Result<ScmSpec> {
    ScmSpec::from_json_str(&std::fs::read_to_string(path)?)
}

fn load_model(path: &str) -> Result<LatentClassModel> {
    LatentClassModel::from_json_str(&std::fs::read_to_string(path)?)
}

/// Default cause columns: names starting with `a`, in data order.
fn default_causes(data: &Dataset) -> Vec<String> {
    data.vars()
        .iter()
        .filter(|v| v.name.starts_with('a'))
        .map(|v| v.name.clone())
        .collect()
}

fn resolve_causes(data: &Dataset, flag: &Option<String>) -> Result<Vec<String>> {
    let names: Vec<String> = match flag {
        Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
        None => default_causes(data),
    };
    if names.len() < 2 {
        return Err(Error::Shape(
            "need at least two cause columns (name them with --causes)".into(),
        ));
    }
    for n in &names {
        data.var_index(n)?;
    }
    Ok(names)
}

fn write_run_config(dir: &Path, command: &str, seed: u64, resolved: serde_json::Value) -> Result<()> {
    write_json(
        &dir.join("run_config.json"),
        &json!({ "command": command, "seed": seed, "config": resolved }),
    )
}

pub fn cmd_simulate(mut args: SimulateArgs) -> Result<i32> {
    let cfg = load_config(args.config.as_deref())?;
    fill(&mut args.out_dir, &cfg, "out-dir")?;
    fill(&mut args.scm, &cfg, "scm")?;
    fill(&mut args.z_card, &cfg, "z-card")?;
    fill(&mut args.x_card, &cfg, "x-card")?;
    fill(&mut args.y_card, &cfg, "y-card")?;
    fill(&mut args.cause_cards, &cfg, "cause-cards")?;
    fill(&mut args.concentration, &cfg, "concentration")?;
    fill(&mut args.n, &cfg, "n")?;
    fill(&mut args.seed, &cfg, "seed")?;
    if args.a.is_empty() {
        if let Some(list) = cfg.get("a") {
            args.a = serde_json::from_value(list.clone())
                .map_err(|e| Error::Shape(format!("config key `a`: {e}")))?;
        }
    }

    let dir = out_dir(&args.out_dir)?;
    let seed = args.seed.unwrap_or(0);
    let n = args.n.unwrap_or(1000);
    let concentration = args.concentration.unwrap_or(1.0);

    let scm = match &args.scm {
        Some(path) => load_scm(path)?,
        None => {
            let dims = ScmDims {
                z_card: args.z_card.unwrap_or(2),
                x_card: args.x_card.filter(|&c| c > 0),
                cause_cards: match &args.cause_cards {
                    Some(s) => parse_usize_list(s)?,
                    None => vec![2, 2],
                },
                y_card: args.y_card.unwrap_or(2),
            };
            // Generation stream is far away from the per-unit sample streams.
            let mut rng = stream_rng(seed ^ 0x5EED_CAFE, u64::MAX);
            random_scm(&dims, concentration, &mut rng)
        }
    };

    let sample = scm.sample(n, seed);
    let observed = scm.observed_joint();

    let a_list: Vec<Vec<usize>> = if args.a.is_empty() {
        if scm.n_cause_assignments() <= 64 {
            multicause_core::table::assignments(&scm.cause_cards()).collect()
        } else {
            vec![]
        }
    } else {
        args.a
            .iter()
            .map(|s| parse_usize_list(s))
            .collect::<Result<_>>()?
    };
    let ground_truth: Vec<_> = a_list
        .iter()
        .map(|a| scm.ground_truth_po(a))
        .collect::<Result<_>>()?;

    write_json(&dir.join("scm.json"), &scm)?;
    let mut data_csv = Vec::new();
    sample.data.write_csv(&mut data_csv)?;
    write_atomic(&dir.join("data.csv"), &data_csv)?;
    let mut z_csv = String::from("z\n");
    for z in &sample.hidden_z {
        z_csv.push_str(&format!("{z}\n"));
    }
    write_atomic(&dir.join("hidden_z.csv"), z_csv.as_bytes())?;
    write_json(&dir.join("observed_joint.json"), &observed)?;
    write_json(&dir.join("ground_truth.json"), &ground_truth)?;
    write_run_config(
        &dir,
        "simulate",
        seed,
        json!({
            "scm": args.scm,
            "n": n,
            "concentration": concentration,
            "a": a_list,
        }),
    )?;
    println!("simulate: wrote {} rows to {}", n, dir.display());
    Ok(0)
}

pub fn cmd_fit(mut args: FitArgs) -> Result<i32> {
    let cfg = load_config(args.config.as_deref())?;
    fill(&mut args.out_dir, &cfg, "out-dir")?;
    fill(&mut args.data, &cfg, "data")?;
    fill(&mut args.causes, &cfg, "causes")?;
    fill(&mut args.covariate, &cfg, "covariate")?;
    fill(&mut args.classes, &cfg, "classes")?;
    fill(&mut args.classes_range, &cfg, "classes-range")?;
    fill(&mut args.restarts, &cfg, "restarts")?;
    fill(&mut args.tol, &cfg, "tol")?;
    fill(&mut args.max_iter, &cfg, "max-iter")?;
    fill(&mut args.seed, &cfg, "seed")?;

    let dir = out_dir(&args.out_dir)?;
    let data_path = args
        .data
        .as_ref()
        .ok_or_else(|| Error::Shape("--data is required".into()))?;
    let data = load_dataset(data_path)?;
    let cause_names = resolve_causes(&data, &args.causes)?;
    let causes: Vec<&str> = cause_names.iter().map(|s| s.as_str()).collect();
    let covariate = args.covariate.as_deref();
    let seed = args.seed.unwrap_or(0);
    let classes = args.classes.unwrap_or(2);

    let mut em = EmConfig::new(classes, seed);
    if let Some(r) = args.restarts {
        em.restarts = r;
    }
    if let Some(t) = args.tol {
        em.tol = t;
    }
    if let Some(m) = args.max_iter {
        em.max_iter = m;
    }

    let (model, report) = em_fit(&data, &causes, covariate, &em)?;
    write_json(&dir.join("model.json"), &model)?;
    write_json(&dir.join("fit_report.json"), &report)?;

    if let Some(range) = &args.classes_range {
        let (lo, hi) = parse_range(range)?;
        let mut names: Vec<&str> = causes.clone();
        if let Some(cv) = covariate {
            names.push(cv);
        }
        let rows = data.select(&names)?.rows().to_vec();
        let mut table = Vec::new();
        for l in lo..=hi {
            let mut em_l = em.clone();
            em_l.n_classes = l;
            let (m_l, r_l) = em_fit(&data, &causes, covariate, &em_l)?;
            table.push(json!({
                "classes": l,
                "loglik": r_l.final_loglik,
                "converged": r_l.converged,
                "n_params": m_l.n_params(),
                "bic": m_l.bic(&rows)?,
            }));
        }
        write_json(&dir.join("bic_table.json"), &table)?;
    }

    write_run_config(
        &dir,
        "fit",
        seed,
        json!({
            "data": data_path,
            "causes": cause_names,
            "covariate": covariate,
            "classes": classes,
            "classes-range": args.classes_range,
            "restarts": em.restarts,
            "tol": em.tol,
            "max-iter": em.max_iter,
            "theta-floor": em.theta_floor,
        }),
    )?;
    println!(
        "fit: {} classes, loglik {:.6}, converged {}",
        classes, report.final_loglik, report.converged
    );
    Ok(0)
}

fn parse_range(s: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = s.split("..").collect();
    if parts.len() != 2 {
        return Err(Error::Shape(format!("bad range `{s}`, want lo..hi")));
    }
    let lo = parts[0]
        .trim()
        .parse()
        .map_err(|_| Error::Shape(format!("bad range `{s}`")))?;
    let hi = parts[1]
        .trim()
        .parse()
        .map_err(|_| Error::Shape(format!("bad range `{s}`")))?;
    if lo == 0 || hi < lo {
        return Err(Error::Shape(format!("bad range `{s}`")));
    }
    Ok((lo, hi))
}

pub fn cmd_gate(mut args: GateArgs) -> Result<i32> {
    let cfg = load_config(args.config.as_deref())?;
    fill(&mut args.out_dir, &cfg, "out-dir")?;
    fill(&mut args.data, &cfg, "data")?;
    fill(&mut args.causes, &cfg, "causes")?;
    fill(&mut args.model, &cfg, "model")?;
    fill(&mut args.zhat, &cfg, "zhat")?;
    fill(&mut args.alpha, &cfg, "alpha")?;
    fill(&mut args.permutations, &cfg, "permutations")?;
    fill(&mut args.power_trials, &cfg, "power-trials")?;
    fill(&mut args.seed, &cfg, "seed")?;
    if !args.bonferroni {
        if let Some(b) = cfg.get("bonferroni").and_then(|v| v.as_bool()) {
            args.bonferroni = b;
        }
    }

    let dir = out_dir(&args.out_dir)?;
    let data_path = args
        .data
        .as_ref()
        .ok_or_else(|| Error::Shape("--data is required".into()))?;
    let data = load_dataset(data_path)?;
    let cause_names = resolve_causes(&data, &args.causes)?;
    let causes: Vec<&str> = cause_names.iter().map(|s| s.as_str()).collect();
    let seed = args.seed.unwrap_or(0);

    let zhat: Vec<usize> = match (&args.model, &args.zhat) {
        (Some(model_path), None) => {
            let model = load_model(model_path)?;
            if model.has_covariate() {
                return Err(Error::Shape(
                    "gate expects a cause-only model for zhat".into(),
                ));
            }
            let cause_data = data.select(&causes)?;
            cause_data
                .rows()
                .iter()
                .map(|r| model.zhat(r, None))
                .collect::<Result<_>>()?
        }
        (None, Some(zhat_path)) => {
            let col = load_dataset(zhat_path)?;
            let name = col.vars()[0].name.clone();
            col.column(&name)?
        }
        _ => {
            return Err(Error::Shape(
                "provide exactly one of --model or --zhat".into(),
            ))
        }
    };
    if zhat.len() != data.n_rows() {
        return Err(Error::Shape("zhat column length must match the data".into()));
    }

    let mut gate_cfg = GateConfig {
        alpha: args.alpha.unwrap_or(0.05),
        bonferroni: args.bonferroni,
        n_permutations: args.permutations.unwrap_or(499),
        ..GateConfig::default()
    };
    if let Some(t) = args.power_trials {
        gate_cfg.power_trials = t;
    }

    let results: Vec<_> = (0..causes.len())
        .map(|k| {
            mutual_ci_test(
                &data,
                &causes,
                &zhat,
                k,
                gate_cfg.n_permutations,
                seed.wrapping_add(k as u64),
            )
        })
        .collect::<Result<_>>()?;
    let report = gate_decision(&results, &gate_cfg, &data, &causes, &zhat, seed ^ 0x9A7E)?;

    write_json(&dir.join("gate_report.json"), &report)?;
    write_run_config(
        &dir,
        "gate",
        seed,
        json!({
            "data": data_path,
            "causes": cause_names,
            "model": args.model,
            "zhat": args.zhat,
            "alpha": gate_cfg.alpha,
            "bonferroni": gate_cfg.bonferroni,
            "permutations": gate_cfg.n_permutations,
            "power-trials": gate_cfg.power_trials,
        }),
    )?;
    let pass = report.passed();
    println!(
        "gate: {} (p-values {:?})",
        if pass { "PASS" } else { "FAIL" },
        report.per_cause_pvalues
    );
    Ok(if pass { 0 } else { 2 })
}

pub fn cmd_identify(mut args: IdentifyArgs) -> Result<i32> {
    let cfg = load_config(args.config.as_deref())?;
    fill(&mut args.out_dir, &cfg, "out-dir")?;
    fill(&mut args.estimand, &cfg, "estimand")?;
    fill(&mut args.data, &cfg, "data")?;
    fill(&mut args.joint, &cfg, "joint")?;
    fill(&mut args.causes, &cfg, "causes")?;
    fill(&mut args.outcome, &cfg, "outcome")?;
    fill(&mut args.latent, &cfg, "latent")?;
    fill(&mut args.focal, &cfg, "focal")?;
    fill(&mut args.a_focal, &cfg, "a-focal")?;
    fill(&mut args.a, &cfg, "a")?;
    fill(&mut args.a_prime, &cfg, "a-prime")?;
    fill(&mut args.model, &cfg, "model")?;

    let dir = out_dir(&args.out_dir)?;
    let outcome = args.outcome.clone().unwrap_or_else(|| "y".into());
    let estimand = args
        .estimand
        .clone()
        .ok_or_else(|| Error::Shape("--estimand {adjust|thm7|thm8} is required".into()))?;

    // Observed (or full) joint: explicit table, or the empirical joint of a
    // dataset (no smoothing; zero cells surface as overlap failures).
    let joint: multicause_core::JointTable = match (&args.joint, &args.data) {
        (Some(path), None) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        (None, Some(path)) => load_dataset(path)?.empirical_joint()?,
        _ => {
            return Err(Error::Shape(
                "provide exactly one of --joint or --data".into(),
            ))
        }
    };
    let cause_names: Vec<String> = match &args.causes {
        Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
        None => joint
            .vars()
            .iter()
            .filter(|v| v.name.starts_with('a'))
            .map(|v| v.name.clone())
            .collect(),
    };
    let causes: Vec<&str> = cause_names.iter().map(|s| s.as_str()).collect();
    if causes.is_empty() {
        return Err(Error::Shape("no cause columns found".into()));
    }

    let (distribution, overlap) = match estimand.as_str() {
        "adjust" => {
            let latent = args.latent.clone().unwrap_or_else(|| "z".into());
            let a = parse_usize_list(
                args.a
                    .as_deref()
                    .ok_or_else(|| Error::Shape("--a is required for adjust".into()))?,
            )?;
            let overlap = overlap_check_adjustment(&joint, &causes, &latent)?;
            let po = adjust(&joint, &causes, &outcome, &latent, &a)?;
            (po.dist, Some(serde_json::to_value(&overlap)?))
        }
        "thm7" => {
            let focal = parse_usize_list(
                args.focal
                    .as_deref()
                    .ok_or_else(|| Error::Shape("--focal is required for thm7".into()))?,
            )?;
            let a_focal = parse_usize_list(
                args.a_focal
                    .as_deref()
                    .ok_or_else(|| Error::Shape("--a-focal is required for thm7".into()))?,
            )?;
            let partition = FocalPartition::new(focal, causes.len())?;
            let overlap = overlap_check(&joint, &causes, &partition)?;
            let po = thm7_estimand(&joint, &causes, &outcome, &partition, &a_focal)?;
            (po.dist, Some(serde_json::to_value(&overlap)?))
        }
        "thm8" => {
            let a = parse_usize_list(
                args.a
                    .as_deref()
                    .ok_or_else(|| Error::Shape("--a is required for thm8".into()))?,
            )?;
            let a_prime = parse_usize_list(
                args.a_prime
                    .as_deref()
                    .ok_or_else(|| Error::Shape("--a-prime is required for thm8".into()))?,
            )?;
            let model_path = args
                .model
                .as_ref()
                .ok_or_else(|| Error::Shape("--model is required for thm8 (zhat source)".into()))?;
            let model = load_model(model_path)?;
            if model.has_covariate() {
                return Err(Error::Shape("thm8 zhat uses a cause-only model".into()));
            }
            let zhat_fn = |row: &[usize]| model.zhat(row, None).expect("valid row");
            let dist = thm8_estimand(&joint, &causes, &outcome, &a, &a_prime, &zhat_fn)?;
            (dist, None)
        }
        other => {
            return Err(Error::Shape(format!(
                "unknown estimand `{other}` (want adjust, thm7 or thm8)"
            )))
        }
    };

    let inputs = json!({
        "joint": args.joint,
        "data": args.data,
        "causes": cause_names,
        "outcome": outcome,
        "latent": args.latent,
        "focal": args.focal,
        "a_focal": args.a_focal,
        "a": args.a,
        "a_prime": args.a_prime,
        "model": args.model,
    });
    write_json(
        &dir.join("estimand.json"),
        &json!({
            "estimand": estimand,
            "inputs": inputs,
            "distribution": distribution,
            "overlap_report": overlap,
        }),
    )?;
    write_run_config(&dir, "identify", 0, inputs)?;
    println!("identify: {estimand} written to {}", dir.display());
    Ok(0)
}

pub fn cmd_sensitivity(mut args: SensitivityArgs) -> Result<i32> {
    let cfg = load_config(args.config.as_deref())?;
    fill(&mut args.out_dir, &cfg, "out-dir")?;
    fill(&mut args.scm, &cfg, "scm")?;
    fill(&mut args.data, &cfg, "data")?;
    fill(&mut args.model, &cfg, "model")?;
    fill(&mut args.causes, &cfg, "causes")?;
    fill(&mut args.outcome, &cfg, "outcome")?;
    fill(&mut args.a, &cfg, "a")?;
    fill(&mut args.budgets, &cfg, "budgets")?;
    fill(&mut args.estimand, &cfg, "estimand")?;
    fill(&mut args.format, &cfg, "format")?;
    let format = args.format.as_deref().unwrap_or("both");
    if !matches!(format, "json" | "csv" | "both") {
        return Err(Error::Shape(format!(
            "unknown format `{format}` (want json, csv or both)"
        )));
    }

    let dir = out_dir(&args.out_dir)?;
    let a = parse_usize_list(
        args.a
            .as_deref()
            .ok_or_else(|| Error::Shape("--a is required".into()))?,
    )?;
    let budgets = match &args.budgets {
        Some(s) => parse_f64_list(s)?,
        None => vec![0.0, 0.1, 0.25, 0.5, 1.0, 2.0],
    };

    let report = match (&args.scm, &args.data, &args.model) {
        (Some(scm_path), None, None) => {
            let scm = load_scm(scm_path)?;
            let estimand = parse_estimand(&args.estimand, scm.y_spec().card)?;
            sensitivity_report_scm(&scm, &a, &estimand, &budgets)?
        }
        (None, Some(data_path), Some(model_path)) => {
            let data = load_dataset(data_path)?;
            let model = load_model(model_path)?;
            let cause_names = resolve_causes(&data, &args.causes)?;
            let causes: Vec<&str> = cause_names.iter().map(|s| s.as_str()).collect();
            let outcome = args.outcome.clone().unwrap_or_else(|| "y".into());
            let y_card = data.vars()[data.var_index(&outcome)?].card;
            let estimand = parse_estimand(&args.estimand, y_card)?;
            sensitivity_report_fitted(&data, &causes, &outcome, &model, &a, &estimand, &budgets)?
        }
        _ => {
            return Err(Error::Shape(
                "provide --scm, or --data together with --model".into(),
            ))
        }
    };

    // Nested budgets must give nested regions; a violation here is an
    // internal solver fault, not a data property.
    let mut prev = -1.0;
    for r in &report.rows {
        if r.width() < prev - 1e-9 {
            return Err(Error::Shape(format!(
                "internal: region width shrank at budget {:?}",
                r.budget
            )));
        }
        prev = r.width();
    }

    if format != "csv" {
        write_json(&dir.join("sensitivity_report.json"), &report)?;
    }
    if format != "json" {
        write_atomic(
            &dir.join("sensitivity_report.csv"),
            report.to_csv_string().as_bytes(),
        )?;
    }
    write_run_config(
        &dir,
        "sensitivity",
        0,
        json!({
            "scm": args.scm,
            "data": args.data,
            "model": args.model,
            "a": a,
            "budgets": budgets,
            "estimand": report.estimand,
            "format": format,
        }),
    )?;
    println!(
        "sensitivity: naive {:.6}, full region [{:.6}, {:.6}], rho* {:.6}",
        report.naive_value, report.full.lower, report.full.upper, report.benchmark_rho
    );
    Ok(0)
}

fn parse_estimand(flag: &Option<String>, y_card: usize) -> Result<Estimand> {
    match flag.as_deref() {
        None => Ok(Estimand::prob_of(1.min(y_card - 1), y_card)),
        Some("mean") => Ok(Estimand::mean(y_card)),
        Some(s) if s.starts_with("p:") => {
            let level: usize = s[2..]
                .parse()
                .map_err(|_| Error::Shape(format!("bad estimand `{s}`")))?;
            if level >= y_card {
                return Err(Error::Shape(format!(
                    "estimand level {level} out of range (outcome card {y_card})"
                )));
            }
            Ok(Estimand::prob_of(level, y_card))
        }
        Some(other) => Err(Error::Shape(format!(
            "unknown estimand `{other}` (want `mean` or `p:<level>`)"
        ))),
    }
}

pub fn cmd_demo_nonid(mut args: DemoArgs) -> Result<i32> {
    let cfg = load_config(args.config.as_deref())?;
    fill(&mut args.out_dir, &cfg, "out-dir")?;
    fill(&mut args.scm, &cfg, "scm")?;
    fill(&mut args.a_star, &cfg, "a-star")?;

    let dir = out_dir(&args.out_dir)?;
    let default_template = args.scm.is_none();
    let template = match &args.scm {
        Some(path) => load_scm(path)?,
        None => ScmSpec::demo_confounded_template(),
    };
    let a_star = match &args.a_star {
        Some(s) => parse_usize_list(s)?,
        None => vec![1; template.m()],
    };

    let pair = make_confounded_pair(&template, &a_star)?;
    let obs1 = pair.original.observed_joint();
    let obs2 = pair.alternative.observed_joint();
    let mut max_cell_diff: f64 = 0.0;
    for (p, q) in obs1.probs().iter().zip(obs2.probs()) {
        max_cell_diff = max_cell_diff.max((p - q).abs());
    }
    let cause_names = template.cause_names();
    let evidence: Vec<(&str, usize)> = cause_names
        .iter()
        .cloned()
        .zip(a_star.iter().cloned())
        .collect();
    let mut keep: Vec<&str> = cause_names.clone();
    let y_name = template.y_spec().name.clone();
    keep.push(&y_name);
    let naive = obs1
        .marginalize(&keep)?
        .condition(&evidence)?
        .marginalize(&[&y_name])?
        .probs()
        .to_vec();
    let truth_original = pair.original.ground_truth_po(&a_star)?.dist;
    let truth_alternative = pair.alternative.ground_truth_po(&a_star)?.dist;
    let footnote_dev = total_variation(&truth_alternative, &naive);

    if max_cell_diff > 1e-10 {
        return Err(Error::InconsistentFactors(format!(
            "witness pair observables differ by {max_cell_diff}"
        )));
    }
    if default_template && pair.gap < 0.05 {
        return Err(Error::Shape(format!(
            "default witness gap {} below 0.05",
            pair.gap
        )));
    }

    write_json(&dir.join("scm_original.json"), &pair.original)?;
    write_json(&dir.join("scm_alternative.json"), &pair.alternative)?;
    write_json(
        &dir.join("comparison.json"),
        &json!({
            "a_star": a_star,
            "max_observable_cell_diff": max_cell_diff,
            "ground_truth_tv_gap": pair.gap,
            "naive_conditional": naive,
            "truth_original": truth_original,
            "truth_alternative": truth_alternative,
            "independence_member_deviation_from_naive": footnote_dev,
            "unidentified_rows": pair.unidentified_rows,
        }),
    )?;
    write_run_config(
        &dir,
        "demo-nonid",
        0,
        json!({ "scm": args.scm, "a-star": a_star }),
    )?;
    println!(
        "demo-nonid: identical observables (max diff {:.2e}), ground-truth TV gap {:.4}",
        max_cell_diff, pair.gap
    );
    Ok(0)
}
