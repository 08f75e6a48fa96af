//! The four experiment runners. Each resolves its inputs from the config,
//! drives the core library, and writes a CSV table plus a JSON run record.
//! Output files are a pure function of (config, library version); wall time
//! goes to stderr only.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use iclab_core::{
    best_response_meta, brute_force_ic, conditioned_binomial, direct_sum_check, grid_round_family,
    hard_distribution, hard_distribution_mirrored, leftmost_learner, make_thresholds, product,
    realizable_grid_net, rightmost_learner, run_suite, solve_game, threshold_lower_bound,
    uniform_consistent_learner, Error, FiniteDistribution, GameResult, HypothesisClass,
    LabeledDistribution, LabeledExample, LearnerChannel, LinkKind, MetaDistribution, Result,
    SUITE_NAMES, VERSION,
};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{read_json, ExperimentConfig};

/// Bundled oracle store; `--oracle <path>` substitutes an external one.
const BUNDLED_ORACLE: &str = include_str!("../data/oracle.json");

pub struct Outcome {
    pub converged: bool,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.command {
        "thresholds-lb" => run_thresholds(cfg),
        "ic-solve" => run_ic_solve(cfg),
        "direct-sum" => run_direct_sum(cfg),
        "invariants" => run_invariants(cfg),
        other => Err(Error::Contract(format!("unknown command `{other}`"))),
    }
}

fn run_thresholds(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut points = cfg
        .n
        .par_iter()
        .map(|&n| {
            let class = make_thresholds(n)?;
            let support = full_support(&class);
            let learner = build_learner(cfg, &class, cfg.m, &support)?;
            Ok((n, threshold_lower_bound(&learner)?))
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by_key(|(n, _)| *n);

    let rows: Vec<String> = points
        .iter()
        .map(|(n, b)| format!("{n},{},{},{}", b.mi, b.conditional_mi, b.event_probability))
        .collect();
    write_csv(cfg, "n,mi,conditional_mi,event_probability", &rows)?;

    let results: Vec<Value> = points
        .iter()
        .map(|(n, b)| {
            json!({
                "n": n,
                "mi": b.mi,
                "conditional_mi": b.conditional_mi,
                "event_probability": b.event_probability,
                "good_row_size": b.good_row.len(),
                "certificate": b.certificate.to_json(),
            })
        })
        .collect();
    write_record(cfg, json!(results), &[])?;

    for (n, b) in &points {
        println!(
            "n={n}: mi={} conditional_mi={} pr_event={}",
            b.mi, b.conditional_mi, b.event_probability
        );
    }
    announce(cfg);
    Ok(Outcome { converged: true })
}

fn run_ic_solve(cfg: &ExperimentConfig) -> Result<Outcome> {
    let n = cfg.n[0];
    let class = make_thresholds(n)?;
    let support = full_support(&class);
    let mu = FiniteDistribution::point_mass(cfg.m);
    let (pool, default_pool) = match &cfg.pool {
        Some(path) => (load_pool(path, &class)?, false),
        None => (realizable_grid_net(&class, &support, cfg.grid)?, true),
    };
    let result = solve_game(&class, &support, &mu, &pool, cfg.tol, cfg.iters)?;

    // The committed oracle only keys the canonical game: full support and
    // the grid net at the same resolution as the brute-force channel space.
    let oracle = if default_pool {
        oracle_block(cfg, n, &class, &support, &mu, &pool, &result)?
    } else {
        Value::Null
    };

    let oracle_cell = oracle
        .get("value")
        .and_then(Value::as_f64)
        .map(|v| v.to_string())
        .unwrap_or_default();
    let row = format!(
        "{n},{},{},{},{},{},{},{},{},{oracle_cell}",
        cfg.m,
        cfg.grid,
        pool.len(),
        result.lower,
        result.upper,
        result.gap,
        result.iterations,
        result.converged
    );
    write_csv(
        cfg,
        "n,m,grid,pool_size,lower,upper,gap,iterations,converged,oracle",
        &[row],
    )?;

    let results = json!([{
        "n": n,
        "m": cfg.m,
        "pool_size": pool.len(),
        "lower": result.lower,
        "upper": result.upper,
        "gap": result.gap,
        "iterations": result.iterations,
        "converged": result.converged,
    }]);
    write_record(cfg, results, &[("game", result.to_json()), ("oracle", oracle)])?;

    println!(
        "value in [{}, {}], gap {} after {} iterations (converged: {})",
        result.lower, result.upper, result.gap, result.iterations, result.converged
    );
    announce(cfg);
    Ok(Outcome { converged: result.converged })
}

/// Looks the canonical game up in the oracle store, optionally pinning it
/// first, and reports how the solver interval relates to the exact grid
/// value: the certified lower end must not exceed it, and the worst pool
/// payoff of the solver's channel rounded onto the grid must dominate it.
fn oracle_block(
    cfg: &ExperimentConfig,
    n: u32,
    class: &HypothesisClass,
    support: &[LabeledExample],
    mu: &FiniteDistribution<usize>,
    pool: &[LabeledDistribution],
    result: &GameResult,
) -> Result<Value> {
    let key = format!("thresholds:n={n};m={};grid={}", cfg.m, cfg.grid);
    let mut store = load_oracle_store(cfg)?;
    let mut value = store.get(&key).and_then(Value::as_f64);
    if value.is_none() && cfg.pin_oracle {
        let path = cfg.oracle.as_ref().ok_or_else(|| {
            Error::Contract("pinning an oracle value needs --oracle <path> to write to".to_string())
        })?;
        let v = brute_force_ic(class, cfg.m, support, cfg.grid)?;
        store.insert(key.clone(), json!(v));
        write_text(path, &format!("{}\n", serde_json::to_string_pretty(&store).expect("json")))?;
        value = Some(v);
    }
    let Some(v) = value else {
        return Ok(Value::Null);
    };
    let rounded = grid_round_family(&result.channel, cfg.grid)?;
    let (_, rounded_worst) = best_response_meta(&rounded, pool, mu)?;
    Ok(json!({
        "key": key,
        "value": v,
        "rounded_worst": rounded_worst,
        "quantization_penalty": rounded_worst - result.upper,
        "lower_within": result.lower <= v + 1e-9,
        "value_within": v <= rounded_worst + 1e-9,
    }))
}

fn run_direct_sum(cfg: &ExperimentConfig) -> Result<Outcome> {
    let budget = cfg.m;
    let d = cfg.factors.len();
    let classes: Vec<HypothesisClass> = cfg
        .factors
        .iter()
        .map(|&n| make_thresholds(n))
        .collect::<Result<_>>()?;
    let window = conditioned_binomial(d, budget)?;
    let mu = window.distribution().clone();

    let mut games = cfg
        .factors
        .par_iter()
        .enumerate()
        .map(|(i, &n)| {
            let pool = hard_pool(n, budget)?;
            let support = pool_support(&pool);
            let game = solve_game(&classes[i], &support, &mu, &pool, cfg.tol, cfg.iters)?;
            Ok((i, pool, game))
        })
        .collect::<Result<Vec<_>>>()?;
    games.sort_by_key(|(i, _, _)| *i);

    let metas: Vec<MetaDistribution> = games.iter().map(|(_, _, g)| g.meta.clone()).collect();
    // Payoffs are nonnegative, so zero is always a sound factor value; it
    // covers early stops whose certified lower end is still negative.
    let values: Vec<f64> = games.iter().map(|(_, _, g)| g.lower.max(0.0)).collect();

    let prod = product(&classes)?;
    let mut induced: BTreeSet<LabeledExample> = BTreeSet::new();
    for (i, pool, _) in &games {
        let offset = prod.blocks()[*i].offset;
        for p in pool {
            for (pt, _) in p.distribution().iter() {
                induced.insert(LabeledExample::new(pt.x + offset, pt.y)?);
            }
        }
    }
    let induced: Vec<LabeledExample> = induced.into_iter().collect();
    let channel = build_learner(cfg, &prod, d * budget, &induced)?;

    let check = match direct_sum_check(&channel, &classes, &metas, budget, &values) {
        Ok(check) => check,
        Err(e) => {
            // Dump the counterexample before reporting the failure.
            write_record(cfg, json!([]), &[("error", json!(e.to_string()))])?;
            return Err(e);
        }
    };

    let total: f64 = values.iter().sum();
    let headline = check.alpha * total;
    let rows: Vec<String> = games
        .iter()
        .map(|(i, _, g)| {
            format!(
                "{i},{},{},{},{},{},{},{},{headline}",
                cfg.factors[*i],
                values[*i],
                g.gap,
                g.converged,
                check.alpha,
                check.window_probability,
                check.expected_cost
            )
        })
        .collect();
    write_csv(
        cfg,
        "factor,n,lower,gap,converged,alpha,window_probability,expected_cost,headline_bound",
        &rows,
    )?;

    let links: Vec<Value> = check
        .certificate
        .links()
        .iter()
        .map(|l| {
            json!({
                "name": l.name,
                "kind": match l.kind { LinkKind::Equality => "equality", LinkKind::LowerBound => "lower-bound" },
                "lhs": l.lhs,
                "rhs": l.rhs,
                "tol": l.tol,
                "slack": l.slack(),
                "ok": l.holds(),
            })
        })
        .collect();
    let results: Vec<Value> = games
        .iter()
        .map(|(i, pool, g)| {
            json!({
                "factor": i,
                "n": cfg.factors[*i],
                "pool_size": pool.len(),
                "lower": values[*i],
                "gap": g.gap,
                "iterations": g.iterations,
                "converged": g.converged,
            })
        })
        .collect();
    write_record(
        cfg,
        json!(results),
        &[("check", check.to_json()), ("links", json!(links)), ("headline_bound", json!(headline))],
    )?;

    println!(
        "expected cost {} >= {} = alpha {} x sum of factor values {} ({} links pass)",
        check.expected_cost,
        headline,
        check.alpha,
        total,
        links.len()
    );
    announce(cfg);
    Ok(Outcome { converged: games.iter().all(|(_, _, g)| g.converged) })
}

fn run_invariants(cfg: &ExperimentConfig) -> Result<Outcome> {
    let names: Vec<&str> = if cfg.suites == ["all"] {
        SUITE_NAMES.to_vec()
    } else {
        cfg.suites.iter().map(String::as_str).collect()
    };
    let mut reports = names
        .iter()
        .map(|&name| run_suite(name, cfg.trials, cfg.seed()))
        .collect::<Result<Vec<_>>>()?;
    reports.sort_by(|a, b| a.name.cmp(&b.name));

    let rows: Vec<String> = reports
        .iter()
        .map(|r| format!("{},{},{},{},{}", r.name, r.trials, r.checks, r.worst_slack, r.worst_check))
        .collect();
    write_csv(cfg, "suite,trials,checks,worst_slack,worst_check", &rows)?;

    let worst = reports
        .iter()
        .min_by(|a, b| a.worst_slack.total_cmp(&b.worst_slack))
        .expect("at least one suite");
    let results: Vec<Value> = reports.iter().map(|r| r.to_json()).collect();
    write_record(
        cfg,
        json!(results),
        &[("worst_slack", json!(worst.worst_slack)), ("worst_suite", json!(worst.name))],
    )?;

    for r in &reports {
        println!(
            "suite {}: {} trials, {} checks, worst slack {} at {}",
            r.name, r.trials, r.checks, r.worst_slack, r.worst_check
        );
    }
    announce(cfg);
    Ok(Outcome { converged: true })
}

/// Every labeled point over the class domain; unrealizable combinations are
/// filtered out downstream by the realizable-sample enumeration.
fn full_support(class: &HypothesisClass) -> Vec<LabeledExample> {
    class
        .domain()
        .iter()
        .flat_map(|&x| {
            [LabeledExample::new(x, 0).expect("valid"), LabeledExample::new(x, 1).expect("valid")]
        })
        .collect()
}

fn build_learner(
    cfg: &ExperimentConfig,
    class: &HypothesisClass,
    m: usize,
    support: &[LabeledExample],
) -> Result<LearnerChannel> {
    match cfg.learner.as_str() {
        "leftmost" => leftmost_learner(class, m, support),
        "rightmost" => rightmost_learner(class, m, support),
        "uniform-consistent" => uniform_consistent_learner(class, m, support),
        path => {
            let channel = LearnerChannel::from_json(class, &read_json(Path::new(path))?)?;
            if channel.m() != m {
                return Err(Error::Contract(format!(
                    "learner file has sample size {}, the run needs {m}",
                    channel.m()
                )));
            }
            if !channel.is_consistent()? {
                return Err(Error::Contract(
                    "learner file is not consistent; only consistent proper learners are admissible"
                        .to_string(),
                ));
            }
            Ok(channel)
        }
    }
}

/// The canonical adversarial pool for a threshold class: a hard distribution
/// for every fixed index in both orientations, each with the largest varying
/// set that keeps the atom within the desk-scale support cap of the
/// product-class certificate (three labeled points per atom).
fn hard_pool(n: u32, t: usize) -> Result<Vec<LabeledDistribution>> {
    let width = 1u32 << n;
    let mut pool = Vec::new();
    for r in 1..width {
        // Support is (1,0), (r,0) when r > 1, and the varying points.
        let room = if r == 1 { 2 } else { 1 };
        let varying: Vec<u32> = (r + 1..=width).take(room).collect();
        pool.push(hard_distribution(r, &varying, t)?.distribution().clone());
    }
    for r in 3..=width {
        pool.push(hard_distribution_mirrored(r, &[r - 1], t)?.distribution().clone());
    }
    Ok(pool)
}

fn pool_support(pool: &[LabeledDistribution]) -> Vec<LabeledExample> {
    let mut out: BTreeSet<LabeledExample> = BTreeSet::new();
    for p in pool {
        for (pt, _) in p.distribution().iter() {
            out.insert(*pt);
        }
    }
    out.into_iter().collect()
}

fn load_pool(path: &Path, class: &HypothesisClass) -> Result<Vec<LabeledDistribution>> {
    let v = read_json(path)?;
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Parse(format!("{}: pool must be a JSON array", path.display())))?;
    if arr.is_empty() {
        return Err(Error::Contract("the pool must be nonempty".to_string()));
    }
    let pool: Vec<LabeledDistribution> =
        arr.iter().map(LabeledDistribution::from_json).collect::<Result<_>>()?;
    for (i, p) in pool.iter().enumerate() {
        if !class.is_realizable(p)? {
            return Err(Error::Contract(format!(
                "pool entry {i} is not realizable for the class"
            )));
        }
    }
    Ok(pool)
}

fn load_oracle_store(cfg: &ExperimentConfig) -> Result<Map<String, Value>> {
    let v = match &cfg.oracle {
        Some(path) if path.exists() => read_json(path)?,
        Some(_) => json!({}),
        None => serde_json::from_str(BUNDLED_ORACLE)
            .map_err(|e| Error::Parse(format!("bundled oracle store: {e}")))?,
    };
    v.as_object()
        .cloned()
        .ok_or_else(|| Error::Parse("oracle store must be a JSON object".to_string()))
}

fn write_csv(cfg: &ExperimentConfig, header: &str, rows: &[String]) -> Result<()> {
    let mut text = String::with_capacity(64 * (rows.len() + 1));
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    write_text(&cfg.out.with_extension("csv"), &text)
}

/// Run record: resolved config, library version, per-point results, and any
/// command-specific sections. Keys are sorted, so bytes are reproducible.
fn write_record(cfg: &ExperimentConfig, results: Value, extras: &[(&str, Value)]) -> Result<()> {
    let mut map = Map::new();
    map.insert("command".to_string(), json!(cfg.command));
    map.insert("version".to_string(), json!(VERSION));
    map.insert("config".to_string(), cfg.to_json());
    map.insert("results".to_string(), results);
    for (key, value) in extras {
        map.insert(key.to_string(), value.clone());
    }
    let text = format!("{}\n", serde_json::to_string_pretty(&Value::Object(map)).expect("json"));
    write_text(&cfg.out.with_extension("json"), &text)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| Error::Contract(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::Contract(format!("cannot write {}: {e}", path.display())))
}

fn announce(cfg: &ExperimentConfig) {
    println!(
        "wrote {} and {}",
        cfg.out.with_extension("csv").display(),
        cfg.out.with_extension("json").display()
    );
}
