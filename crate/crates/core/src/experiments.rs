//! Replicated simulation of `M_n^(k)` and `N_n(x)` with regime-aware
//! normalization, goodness-of-fit summaries and on-disk results.
//!
//! Replication `r` draws everything from `RngStreamPlan::replication(r)`, and
//! all reductions run in replication order, so a result depends only on the
//! plan and never on the thread pool.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    classify_regime, compute_constants_with, estimate_pickands, known_pickands, normalizers, PickandsMethod, Regime,
    RegimeTag,
};
use crate::error::{Error, Result};
use crate::iid_weibull::compare_moments;
use crate::limit_laws::{CountLaw, LimitLaw};
use crate::model::ModelSpec;
use crate::process::GridSpec;
use crate::rng::RngStreamPlan;
use crate::stats::{count_histogram, ks_statistic, mean_and_se, total_variation};
use crate::suprema::{truncation_horizon, SupremaSampler, DEFAULT_G_MULT, DEFAULT_N_POINTS};

pub const SCHEMA_VERSION: &str = "1";

pub const RESULT_FILE: &str = "result.json";
pub const STATS_FILE: &str = "normalized_stats.csv";
pub const COUNTS_FILE: &str = "exceed_counts.csv";
/// Wall-clock data lives apart from the results so that reruns are byte-identical.
pub const TIMING_FILE: &str = "timing.json";

/// Counts at or above this are pooled in the exceedance TV distance.
pub const DEFAULT_K_MAX: u64 = 6;

/// Monte Carlo budget for Pickands constants missing from both the model and the table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PickandsBudget {
    pub horizon: f64,
    pub n_points: usize,
    pub reps: usize,
}

impl Default for PickandsBudget {
    fn default() -> Self {
        Self { horizon: 32.0, n_points: 1 << 13, reps: 20_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPolicy {
    #[serde(default = "default_n_points")]
    pub n_points: usize,
    #[serde(default = "default_g_mult")]
    pub g_mult: f64,
}

fn default_n_points() -> usize {
    DEFAULT_N_POINTS
}

fn default_g_mult() -> f64 {
    DEFAULT_G_MULT
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self { n_points: DEFAULT_N_POINTS, g_mult: DEFAULT_G_MULT }
    }
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub model: ModelSpec,
    pub n: u64,
    #[serde(default = "one")]
    pub k: usize,
    pub reps: usize,
    #[serde(default)]
    pub grid: GridPolicy,
    /// Level offsets `x` of the exceedance counts.
    #[serde(default)]
    pub levels: Vec<f64>,
    /// Absolute-moment orders.
    #[serde(default)]
    pub lambdas: Vec<f64>,
    pub seed: u64,
    /// Keep every `Q_i` in memory (never persisted).
    #[serde(default)]
    pub retain_q: bool,
    #[serde(default)]
    pub pickands_budget: PickandsBudget,
    #[serde(skip)]
    pub output_path: Option<PathBuf>,
}

impl ExperimentPlan {
    /// Plan with defaults: `k = 1`, default grid, no levels or moments.
    pub fn new(model: ModelSpec, n: u64, reps: usize, seed: u64) -> Self {
        Self {
            model,
            n,
            k: 1,
            reps,
            grid: GridPolicy::default(),
            levels: Vec::new(),
            lambdas: Vec::new(),
            seed,
            retain_q: false,
            pickands_budget: PickandsBudget::default(),
            output_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.k == 0 {
            return Err(Error::domain("plan.k", "must be >= 1"));
        }
        if self.n < 2 * self.k as u64 || self.n < 3 {
            return Err(Error::domain(
                "plan.n",
                format!("must satisfy n >= max(2k, 3), got n = {} with k = {}", self.n, self.k),
            ));
        }
        if self.reps < 100 {
            return Err(Error::domain("plan.reps", format!("must be >= 100, got {}", self.reps)));
        }
        if self.grid.n_points < 2 {
            return Err(Error::domain("plan.grid.n_points", format!("must be >= 2, got {}", self.grid.n_points)));
        }
        if !(self.grid.g_mult > 0.0 && self.grid.g_mult.is_finite()) {
            return Err(Error::domain("plan.grid.g_mult", format!("must be positive, got {}", self.grid.g_mult)));
        }
        if let Some(x) = self.levels.iter().find(|x| !x.is_finite()) {
            return Err(Error::domain("plan.levels", format!("must be finite, got {x}")));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::domain("plan.lambdas", format!("must be positive, got {l}")));
        }
        let m_n = self.model.drifts.minimal_count(self.n);
        if m_n < 3 || m_n < self.k as u64 {
            return Err(Error::domain(
                "model.drifts.p",
                format!("m_n = {m_n} is too small (need m_n >= max(k, 3))"),
            ));
        }
        let b = &self.pickands_budget;
        if !(b.horizon > 0.0 && b.horizon.is_finite()) || b.n_points < 2 || b.reps < 100 {
            return Err(Error::domain("plan.pickands_budget", "needs horizon > 0, n_points >= 2, reps >= 100"));
        }
        Ok(())
    }
}

/// Where the Pickands constant came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PickandsSource {
    Model,
    Table,
    Estimated,
}

/// Normalizers and grid actually used by a run, indexed by `m_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizersUsed {
    pub n: u64,
    pub m_n: u64,
    pub b_n: f64,
    pub a_n: f64,
    pub e_n: f64,
    /// `e_n` in the Normal regime, `a_n` otherwise.
    pub scale: f64,
    pub horizon: f64,
    pub n_points: usize,
    pub pickands: f64,
    pub pickands_source: PickandsSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderMoment {
    pub order: usize,
    pub lambda: f64,
    pub empirical: f64,
    pub limit: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub plan: ExperimentPlan,
    pub regime: Regime,
    pub normalizers: NormalizersUsed,
    /// `u_n(x) = b + scale·x` for each plan level.
    pub thresholds: Vec<f64>,
    /// `reps × k`: `(M^(j) − b) / scale`.
    pub normalized_stats: Vec<Vec<f64>>,
    /// `reps × |levels|`.
    pub exceed_counts: Vec<Vec<u64>>,
    /// KS distance of order `j` at index `j − 1`.
    pub ks: Vec<f64>,
    /// TV distance of `N_n(x)` to its count law per level; empty in the Normal regime.
    pub tv_exceedance: Vec<f64>,
    pub moments: Vec<OrderMoment>,
    pub runtime_seconds: f64,
    pub truncated: bool,
    /// Raw `Q_i` per replication when the plan retains them.
    pub q_values: Option<Vec<Vec<f64>>>,
}

impl ExperimentResult {
    pub fn completed_reps(&self) -> usize {
        self.normalized_stats.len()
    }

    /// Normalized `M^(order)` across replications.
    pub fn order_column(&self, order: usize) -> Vec<f64> {
        self.normalized_stats.iter().map(|row| row[order - 1]).collect()
    }

    pub fn counts_column(&self, level: usize) -> Vec<u64> {
        self.exceed_counts.iter().map(|row| row[level]).collect()
    }
}

/// Limit law of the normalized `M^(order)` in a regime.
pub fn limit_law_for(regime: &Regime, order: usize) -> LimitLaw {
    let k = order as u32;
    match regime.tag {
        RegimeTag::NormalLimit => LimitLaw::Normal,
        RegimeTag::ErlangLogLimit => LimitLaw::ErlangLog { k },
        RegimeTag::MixtureLimit => LimitLaw::Mixture { k, coeff: regime.mixture_coeff.unwrap_or(0.0) },
    }
}

/// Count law of `N_n(x)`; `None` in the Normal regime, where no Poisson limit exists.
pub fn count_law_for(regime: &Regime, x: f64) -> Option<CountLaw> {
    match regime.tag {
        RegimeTag::NormalLimit => None,
        RegimeTag::ErlangLogLimit => Some(CountLaw::Poisson { x }),
        RegimeTag::MixtureLimit => Some(CountLaw::MixedPoisson { x, coeff: regime.mixture_coeff.unwrap_or(0.0) }),
    }
}

/// Pickands constant for the model: supplied, tabulated, or estimated with
/// a seed derived from `seed`.
pub fn resolve_pickands(model: &ModelSpec, seed: u64, budget: &PickandsBudget) -> Result<(f64, PickandsSource)> {
    if let Some(h) = model.pickands {
        return Ok((h, PickandsSource::Model));
    }
    let alpha = model.alpha();
    if let Some(h) = known_pickands(alpha) {
        return Ok((h, PickandsSource::Table));
    }
    let derived = seed ^ 0x5049_434b_414e_4453;
    let est = estimate_pickands(
        alpha,
        budget.horizon,
        budget.n_points,
        budget.reps,
        derived,
        PickandsMethod::SupOverIntegral,
    )?;
    Ok((est.estimate, PickandsSource::Estimated))
}

pub fn run_scenario(plan: &ExperimentPlan) -> Result<ExperimentResult> {
    run_scenario_with(plan, &AtomicBool::new(false))
}

/// Runs the plan; once `cancel` is raised, replications not yet started are
/// skipped and the result keeps the leading completed ones with `truncated` set.
pub fn run_scenario_with(plan: &ExperimentPlan, cancel: &AtomicBool) -> Result<ExperimentResult> {
    let start = Instant::now();
    plan.validate()?;
    let model = plan.model;
    let regime = classify_regime(&model);
    let (pickands, pickands_source) = resolve_pickands(&model, plan.seed, &plan.pickands_budget)?;
    let consts = compute_constants_with(&model, pickands)?;
    let m_n = model.drifts.minimal_count(plan.n);
    let seq = normalizers(m_n, &consts, &model)?;
    let scale = if regime.tag == RegimeTag::NormalLimit { seq.e_n } else { seq.a_n };
    let horizon = truncation_horizon(&model, seq.b_n, plan.grid.g_mult)?;
    let grid = GridSpec::new(plan.grid.n_points, horizon)?;
    let sampler = SupremaSampler::new(model, grid)?;
    let thresholds: Vec<f64> = plan.levels.iter().map(|x| seq.b_n + scale * x).collect();
    let streams = RngStreamPlan::new(plan.seed);

    let batches = (0..plan.reps as u64)
        .into_par_iter()
        .map(|r| {
            if cancel.load(Ordering::Relaxed) {
                return Ok(None);
            }
            sampler
                .batch(plan.n, plan.k, &thresholds, plan.retain_q, &streams.replication(r))
                .map(Some)
        })
        .collect::<Result<Vec<_>>>()?;
    let completed: Vec<_> = batches.into_iter().map_while(|b| b).collect();
    let truncated = completed.len() < plan.reps;

    let normalized_stats: Vec<Vec<f64>> = completed
        .iter()
        .map(|b| b.kth_stats.iter().map(|m| (m - seq.b_n) / scale).collect())
        .collect();
    let exceed_counts: Vec<Vec<u64>> = completed.iter().map(|b| b.exceed_counts.clone()).collect();
    let q_values = plan
        .retain_q
        .then(|| completed.into_iter().map(|b| b.q_values.unwrap_or_default()).collect());

    let normalizers_used = NormalizersUsed {
        n: plan.n,
        m_n,
        b_n: seq.b_n,
        a_n: seq.a_n,
        e_n: seq.e_n,
        scale,
        horizon,
        n_points: plan.grid.n_points,
        pickands,
        pickands_source,
    };
    let mut result = ExperimentResult {
        plan: plan.clone(),
        regime,
        normalizers: normalizers_used,
        thresholds,
        normalized_stats,
        exceed_counts,
        ks: Vec::new(),
        tv_exceedance: Vec::new(),
        moments: Vec::new(),
        runtime_seconds: 0.0,
        truncated,
        q_values,
    };
    if result.completed_reps() > 0 {
        summarize(&mut result)?;
    }
    result.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(result)
}

fn summarize(result: &mut ExperimentResult) -> Result<()> {
    let regime = result.regime;
    let k = result.plan.k;
    let mut ks = Vec::with_capacity(k);
    let mut moments = Vec::new();
    for order in 1..=k {
        let column = result.order_column(order);
        let law = limit_law_for(&regime, order);
        ks.push(ks_statistic(&column, |x| law.cdf(x))?);
        for m in compare_moments(&column, &law, &result.plan.lambdas)? {
            moments.push(OrderMoment {
                order,
                lambda: m.lambda,
                empirical: m.empirical,
                limit: m.limit,
                std_err: m.std_err,
            });
        }
    }
    let mut tv = Vec::new();
    if regime.tag != RegimeTag::NormalLimit {
        for (i, &x) in result.plan.levels.iter().enumerate() {
            let law = count_law_for(&regime, x).expect("count law outside the Normal regime");
            tv.push(exceedance_tv(&result.counts_column(i), &law, DEFAULT_K_MAX)?);
        }
    }
    result.ks = ks;
    result.moments = moments;
    result.tv_exceedance = tv;
    Ok(())
}

/// TV distance between the empirical law of counts pooled at `k_max` and
/// `{P(N = l)}_{l < k_max} ∪ {P(N ≥ k_max)}`.
pub fn exceedance_tv(counts: &[u64], law: &CountLaw, k_max: u64) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::domain("exceed_counts", "no counts recorded"));
    }
    if k_max == 0 {
        return Err(Error::domain("k_max", "must be >= 1"));
    }
    let empirical = count_histogram(counts, k_max);
    let mut model: Vec<f64> = (0..k_max).map(|l| law.pmf(l)).collect();
    model.push((1.0 - law.count_cdf(k_max)).max(0.0));
    Ok(total_variation(&empirical, &model))
}

/// [`exceedance_tv`] for level index `level` of a result.
pub fn exceedance_test(result: &ExperimentResult, level: usize, law: &CountLaw, k_max: u64) -> Result<f64> {
    if level >= result.plan.levels.len() {
        return Err(Error::domain("level", format!("index {level} out of range")));
    }
    exceedance_tv(&result.counts_column(level), law, k_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentGapRow {
    pub n: u64,
    pub empirical: f64,
    pub limit: f64,
    pub std_err: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub lambda: f64,
    pub order: usize,
    pub rows: Vec<MomentGapRow>,
    /// Gaps shrink along increasing `n` (informational).
    pub monotone: bool,
}

/// `|E|Z_n|^λ − E|L|^λ|` for samples of the normalized statistic at increasing `n`.
pub fn moment_gaps(samples: &[(u64, Vec<f64>)], law: &LimitLaw, lambda: f64, order: usize) -> Result<MomentReport> {
    if samples.len() < 2 {
        return Err(Error::domain("results", "need at least two sample sizes"));
    }
    if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::domain("results", "sample sizes must increase"));
    }
    let limit = law.abs_moment(lambda)?.value;
    let rows: Vec<MomentGapRow> = samples
        .iter()
        .map(|(n, xs)| {
            let powers: Vec<f64> = xs.iter().map(|z| z.abs().powf(lambda)).collect();
            let (empirical, std_err) = mean_and_se(&powers);
            MomentGapRow { n: *n, empirical, limit, std_err, gap: (empirical - limit).abs() }
        })
        .collect();
    let monotone = rows.windows(2).all(|w| w[1].gap <= w[0].gap);
    Ok(MomentReport { lambda, order, rows, monotone })
}

/// Moment gaps of order `order` across results for one model at increasing `n`.
pub fn moment_convergence_report(results: &[ExperimentResult], lambda: f64, order: usize) -> Result<MomentReport> {
    let first = results.first().ok_or_else(|| Error::domain("results", "empty"))?;
    if results.iter().any(|r| r.plan.model != first.plan.model) {
        return Err(Error::domain("results", "results come from different models"));
    }
    if order == 0 || results.iter().any(|r| order > r.plan.k) {
        return Err(Error::domain("order", format!("order {order} not recorded in every result")));
    }
    let samples: Vec<(u64, Vec<f64>)> = results.iter().map(|r| (r.plan.n, r.order_column(order))).collect();
    moment_gaps(&samples, &limit_law_for(&first.regime, order), lambda, order)
}

#[derive(Debug, Serialize, Deserialize)]
struct ResultFile {
    schema_version: String,
    plan: ExperimentPlan,
    regime: RegimeTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mixture_coeff: Option<f64>,
    normalizers: NormalizersUsed,
    thresholds: Vec<f64>,
    completed_reps: usize,
    truncated: bool,
    ks: BTreeMap<String, f64>,
    tv_exceedance: BTreeMap<String, f64>,
    moments: Vec<OrderMoment>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TimingFile {
    runtime_seconds: f64,
}

fn level_key(x: f64) -> String {
    format!("{x}")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format { path: path.to_path_buf(), reason: format!("{other:?}") },
    }
}

/// Writes `result.json`, the two CSV matrices and `timing.json` into the
/// existing directory `dir`.
pub fn persist(result: &ExperimentResult, dir: &Path) -> Result<()> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
        ));
    }
    let file = ResultFile {
        schema_version: SCHEMA_VERSION.to_string(),
        plan: result.plan.clone(),
        regime: result.regime.tag,
        mixture_coeff: result.regime.mixture_coeff,
        normalizers: result.normalizers,
        thresholds: result.thresholds.clone(),
        completed_reps: result.completed_reps(),
        truncated: result.truncated,
        ks: result.ks.iter().enumerate().map(|(j, v)| ((j + 1).to_string(), *v)).collect(),
        tv_exceedance: result
            .plan
            .levels
            .iter()
            .zip(&result.tv_exceedance)
            .map(|(x, v)| (level_key(*x), *v))
            .collect(),
        moments: result.moments.clone(),
    };
    write_json(&dir.join(RESULT_FILE), &file)?;

    let path = dir.join(STATS_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
    w.write_record(["replication", "order", "value"]).map_err(|e| csv_error(&path, e))?;
    for (r, row) in result.normalized_stats.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            w.write_record([r.to_string(), (j + 1).to_string(), v.to_string()])
                .map_err(|e| csv_error(&path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(COUNTS_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
    w.write_record(["replication", "level", "count"]).map_err(|e| csv_error(&path, e))?;
    for (r, row) in result.exceed_counts.iter().enumerate() {
        for (x, c) in result.plan.levels.iter().zip(row) {
            w.write_record([r.to_string(), level_key(*x), c.to_string()])
                .map_err(|e| csv_error(&path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    write_json(&dir.join(TIMING_FILE), &TimingFile { runtime_seconds: result.runtime_seconds })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Format { path: path.to_path_buf(), reason: e.to_string() })
}

fn read_triples(path: &Path, header: [&str; 3]) -> Result<Vec<(usize, String, String)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let got = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if got.iter().ne(header) {
        return Err(Error::Format { path: path.to_path_buf(), reason: format!("unexpected header {got:?}") });
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let bad = || Error::Format { path: path.to_path_buf(), reason: format!("malformed row {rec:?}") };
            let rep = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            Ok((rep, rec.get(1).ok_or_else(bad)?.to_string(), rec.get(2).ok_or_else(bad)?.to_string()))
        })
        .collect()
}

/// Reads a directory written by [`persist`].
pub fn load(dir: &Path) -> Result<ExperimentResult> {
    let result_path = dir.join(RESULT_FILE);
    let file: ResultFile = read_json(&result_path)?;
    let format_err = |reason: String| Error::Format { path: result_path.clone(), reason };
    if file.schema_version != SCHEMA_VERSION {
        return Err(format_err(format!("unsupported schema_version {}", file.schema_version)));
    }
    let plan = file.plan;
    let (reps, k, levels) = (file.completed_reps, plan.k, plan.levels.len());

    let path = dir.join(STATS_FILE);
    let mut stats = vec![vec![f64::NAN; k]; reps];
    let rows = read_triples(&path, ["replication", "order", "value"])?;
    if rows.len() != reps * k {
        return Err(Error::Format { path: path.clone(), reason: format!("expected {} rows", reps * k) });
    }
    for (r, order, value) in rows {
        let bad = || Error::Format { path: path.clone(), reason: format!("bad entry {r},{order},{value}") };
        let j: usize = order.parse().map_err(|_| bad())?;
        let v: f64 = value.parse().map_err(|_| bad())?;
        *stats.get_mut(r).and_then(|row| row.get_mut(j.wrapping_sub(1))).ok_or_else(bad)? = v;
    }

    let path = dir.join(COUNTS_FILE);
    let rows = read_triples(&path, ["replication", "level", "count"])?;
    if rows.len() != reps * levels {
        return Err(Error::Format { path: path.clone(), reason: format!("expected {} rows", reps * levels) });
    }
    let mut counts = vec![vec![0u64; levels]; reps];
    for (idx, (r, level, count)) in rows.into_iter().enumerate() {
        let i = idx % levels.max(1);
        let bad = || Error::Format { path: path.clone(), reason: format!("bad entry {r},{level},{count}") };
        if r != idx / levels.max(1) || level != level_key(plan.levels[i]) {
            return Err(bad());
        }
        counts[r][i] = count.parse().map_err(|_| bad())?;
    }

    let ks = (1..=k)
        .map(|j| file.ks.get(&j.to_string()).copied().ok_or_else(|| format_err(format!("missing ks for order {j}"))))
        .collect::<Result<Vec<f64>>>()?;
    let tv_exceedance = if file.tv_exceedance.is_empty() {
        Vec::new()
    } else {
        plan.levels
            .iter()
            .map(|x| {
                file.tv_exceedance
                    .get(&level_key(*x))
                    .copied()
                    .ok_or_else(|| format_err(format!("missing tv for level {x}")))
            })
            .collect::<Result<Vec<f64>>>()?
    };
    let timing_path = dir.join(TIMING_FILE);
    let runtime_seconds = if timing_path.exists() {
        read_json::<TimingFile>(&timing_path)?.runtime_seconds
    } else {
        0.0
    };
    Ok(ExperimentResult {
        plan,
        regime: Regime { tag: file.regime, mixture_coeff: file.mixture_coeff },
        normalizers: file.normalizers,
        thresholds: file.thresholds,
        normalized_stats: stats,
        exceed_counts: counts,
        ks,
        tv_exceedance,
        moments: file.moments,
        runtime_seconds,
        truncated: file.truncated,
        q_values: None,
    })
}
