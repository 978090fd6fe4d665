//! Monte Carlo engine: replication loop, scenario control, and result
//! emitters.
//!
//! Each replication draws disjoint recipient/donor samples from the
//! surrogate population, masks the specific variables to create the
//! missing-by-design pattern, fuses with every configured method, and
//! records the correlation estimates for the tracked pairs. Randomness
//! is replication- and method-scoped: replication r's streams depend
//! only on (master seed, r, method), so results are independent of
//! execution order and of which other methods are configured.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    split_population, stack, Column, DataTable, FusionSchema, ScaleLevel, StackedFrame,
    VariableRole,
};
use crate::error::{Error, Result};
use crate::evaluation::{cia_corr, pearson_corr, summarize, EstimateSummary};
use crate::matchers::{gower_match, impute, pmm_match, rhd_match, MatchMethod, PmmConfig, RhdConfig};
use crate::recode;
use crate::synth::SynthSpec;

/// A correlation to track: `a` is observed on the recipient block (a Y
/// variable or a metric common variable), `z` is a fused target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackedPair {
    pub a: String,
    pub z: String,
}

impl TrackedPair {
    pub fn label(&self) -> String {
        format!("{}~{}", self.a, self.z)
    }
}

/// Monte Carlo configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McConfig {
    pub k: usize,
    pub n_rec: usize,
    pub n_don: usize,
    pub methods: Vec<MatchMethod>,
    pub master_seed: u64,
    /// Donor-specific variables to fuse.
    pub targets: Vec<String>,
    pub pairs: Vec<TrackedPair>,
    #[serde(default)]
    pub rhd: RhdConfig,
    #[serde(default)]
    pub pmm: PmmConfig,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("mc: k must be >= 1".into()));
        }
        if self.n_rec < 10 || self.n_don < 10 {
            return Err(Error::Config("mc: n_rec and n_don must be >= 10".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("mc: at least one method required".into()));
        }
        if self.targets.is_empty() || self.pairs.is_empty() {
            return Err(Error::Config("mc: targets and pairs must be nonempty".into()));
        }
        self.rhd.validate()?;
        self.pmm.validate()?;
        Ok(())
    }
}

/// A scenario file: schema, Monte Carlo settings, and either a synth
/// spec or a path to a population CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub schema: FusionSchema,
    pub mc: McConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<String>,
}

impl Scenario {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let s: Scenario =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{path:?}: {e}")))?;
        s.schema.validate()?;
        s.mc.validate()?;
        if s.synth.is_none() && s.population.is_none() {
            return Err(Error::Config(
                "scenario needs either a synth spec or a population path".into(),
            ));
        }
        Ok(s)
    }
}

/// Aggregated Monte Carlo result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McResult {
    pub scenario: String,
    pub k: usize,
    pub n_rec: usize,
    pub n_don: usize,
    pub pairs: Vec<TrackedPair>,
    /// Population correlation per pair.
    pub true_values: Vec<f64>,
    /// Conditional-independence benchmark per pair (Y-Z pairs only).
    pub cia_values: Vec<Option<f64>>,
    /// Per method: estimates[replication][pair]. Failed replications
    /// are omitted.
    pub estimates: BTreeMap<String, Vec<Vec<f64>>>,
    /// Per method, per pair label.
    pub summaries: BTreeMap<String, BTreeMap<String, EstimateSummary>>,
    pub failed_replications: usize,
}

impl McResult {
    pub fn summary(&self, method: MatchMethod, pair_label: &str) -> Option<&EstimateSummary> {
        self.summaries.get(&method.to_string())?.get(pair_label)
    }
}

const STREAM_SPLIT: u64 = 0x5350_4c49;
const STREAM_RHD: u64 = 0x0052_4844;
const STREAM_PMM: u64 = 0x0050_4d4d;
const STREAM_GOWER: u64 = 0x474f_5745;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic per-(replication, purpose) stream.
pub fn stream_rng(master_seed: u64, replication: u64, purpose: u64) -> ChaCha12Rng {
    let mut s = splitmix64(master_seed);
    s = splitmix64(s ^ replication.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    s = splitmix64(s ^ purpose);
    ChaCha12Rng::seed_from_u64(s)
}

fn method_stream(method: MatchMethod) -> u64 {
    match method {
        MatchMethod::Rhd => STREAM_RHD,
        MatchMethod::Pmm => STREAM_PMM,
        MatchMethod::Gower => STREAM_GOWER,
    }
}

/// Replace metric common variables with their categorised versions
/// (levels from the recode rule), binning over the pooled stacked rows.
pub fn categorise_common(frame: &StackedFrame, schema: &FusionSchema) -> Result<(StackedFrame, FusionSchema)> {
    let mut table = frame.table.clone();
    let mut out_schema = schema.clone();
    for v in &schema.variables {
        if v.role != VariableRole::Common || !v.scale.is_metric() {
            continue;
        }
        let rule = v.recode.as_ref().ok_or_else(|| {
            Error::Match(format!(
                "metric common variable '{}' has no recode rule; declare one (e.g. quantile_bin) to categorise it",
                v.name
            ))
        })?;
        // Categorisation must be deterministic here; generation-type
        // rules belong to population preparation, not matching.
        if matches!(rule, recode::RecodeRule::RandomCategory { .. }) {
            return Err(Error::Match(format!(
                "variable '{}': random_category cannot categorise a metric variable",
                v.name
            )));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let codes = recode::apply_rule(&table, &v.name, rule, &mut rng)?;
        table.set_column(&v.name, Column::Categorical(codes))?;
        let levels = rule
            .output_levels()
            .ok_or_else(|| Error::Match(format!("variable '{}': rule has no level set", v.name)))?;
        let spec = out_schema
            .variables
            .iter_mut()
            .find(|s| s.name == v.name)
            .unwrap();
        spec.scale = ScaleLevel::Categorical { levels };
    }
    Ok((
        StackedFrame {
            table,
            n_recipient: frame.n_recipient,
            n_donor: frame.n_donor,
        },
        out_schema,
    ))
}

/// Fuse a stacked frame with one method and return the imputed
/// recipient table.
pub fn fuse_frame(
    frame: &StackedFrame,
    schema: &FusionSchema,
    method: MatchMethod,
    targets: &[&str],
    rhd: &RhdConfig,
    pmm: &PmmConfig,
    rng: &mut ChaCha12Rng,
) -> Result<(DataTable, Vec<crate::matchers::MatchAssignment>)> {
    match method {
        MatchMethod::Rhd => {
            let (cat_frame, cat_schema) = categorise_common(frame, schema)?;
            // RHD is a per-target procedure: selection, strata, and
            // assignment are refit for each fused variable.
            let mut out = frame.table.select_rows(&frame.recipient_rows());
            let mut assignments = Vec::new();
            for &t in targets {
                let assignment = rhd_match(&cat_frame, &cat_schema, t, rhd, rng)?;
                let imputed = impute(frame, &assignment, &[t])?;
                out.set_column(t, imputed.column(t)?.clone())?;
                assignments.push(assignment);
            }
            Ok((out, assignments))
        }
        MatchMethod::Pmm => {
            let assignment = pmm_match(frame, schema, targets, pmm, rng)?;
            let out = impute(frame, &assignment, targets)?;
            Ok((out, vec![assignment]))
        }
        MatchMethod::Gower => {
            let common = schema.common_names();
            let assignment = gower_match(frame, schema, &common, rng)?;
            let out = impute(frame, &assignment, targets)?;
            Ok((out, vec![assignment]))
        }
    }
}

/// One replication: sample, mask, fuse with each configured method,
/// estimate the tracked correlations. Deterministic given
/// (master seed, replication index).
pub fn run_replication(
    pop: &DataTable,
    schema: &FusionSchema,
    config: &McConfig,
    replication: u64,
) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut split_rng = stream_rng(config.master_seed, replication, STREAM_SPLIT);
    let (recipient, donor) =
        split_population(pop, schema, config.n_rec, config.n_don, &mut split_rng)?;
    let frame = stack(&recipient, &donor, schema)?;
    let targets: Vec<&str> = config.targets.iter().map(|t| t.as_str()).collect();

    let mut out = BTreeMap::new();
    for &method in &config.methods {
        let mut rng = stream_rng(config.master_seed, replication, method_stream(method));
        let (fused, _) = fuse_frame(
            &frame,
            schema,
            method,
            &targets,
            &config.rhd,
            &config.pmm,
            &mut rng,
        )?;
        let rows: Vec<usize> = (0..fused.n_rows()).collect();
        let mut estimates = Vec::with_capacity(config.pairs.len());
        for pair in &config.pairs {
            let a = fused.metric_dense(&pair.a, &rows)?;
            let z = fused.metric_dense(&pair.z, &rows)?;
            estimates.push(pearson_corr(&a, &z)?);
        }
        out.insert(method.to_string(), estimates);
    }
    Ok(out)
}

/// Full Monte Carlo run. Replications execute in parallel; more than 5%
/// failures aborts with a diagnostic.
pub fn run_mc(pop: &DataTable, schema: &FusionSchema, config: &McConfig, name: &str) -> Result<McResult> {
    config.validate()?;
    let rows: Vec<usize> = (0..pop.n_rows()).collect();
    let common = schema.common_names();

    let mut true_values = Vec::with_capacity(config.pairs.len());
    let mut cia_values = Vec::with_capacity(config.pairs.len());
    for pair in &config.pairs {
        let a = pop.metric_dense(&pair.a, &rows)?;
        let z = pop.metric_dense(&pair.z, &rows)?;
        true_values.push(pearson_corr(&a, &z)?);
        let is_yz = schema.require(&pair.a)?.role == VariableRole::SpecificRecipient;
        cia_values.push(if is_yz {
            Some(cia_corr(pop, &pair.a, &pair.z, &common, schema)?)
        } else {
            None
        });
    }

    let outcomes: Vec<Result<BTreeMap<String, Vec<f64>>>> = (0..config.k as u64)
        .into_par_iter()
        .map(|rep| run_replication(pop, schema, config, rep))
        .collect();

    let mut estimates: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    let mut failed = 0usize;
    let mut first_error: Option<String> = None;
    for outcome in outcomes {
        match outcome {
            Ok(per_method) => {
                for (method, ests) in per_method {
                    estimates.entry(method).or_default().push(ests);
                }
            }
            Err(e) => {
                failed += 1;
                first_error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    if failed as f64 > 0.05 * config.k as f64 {
        return Err(Error::Simulation(format!(
            "{failed}/{} replications failed (first error: {})",
            config.k,
            first_error.unwrap_or_default()
        )));
    }

    let mut summaries = BTreeMap::new();
    for (method, reps) in &estimates {
        let mut per_pair = BTreeMap::new();
        for (pi, pair) in config.pairs.iter().enumerate() {
            let series: Vec<f64> = reps.iter().map(|r| r[pi]).collect();
            per_pair.insert(pair.label(), summarize(&series, true_values[pi])?);
        }
        summaries.insert(method.clone(), per_pair);
    }

    Ok(McResult {
        scenario: name.to_string(),
        k: config.k,
        n_rec: config.n_rec,
        n_don: config.n_don,
        pairs: config.pairs.clone(),
        true_values,
        cia_values,
        estimates,
        summaries,
        failed_replications: failed,
    })
}

/// Long-format estimates CSV: scenario, method, pair, replication,
/// estimate.
pub fn write_long_csv(result: &McResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scenario", "method", "pair", "replication", "estimate"])?;
    for (method, reps) in &result.estimates {
        for (rep, ests) in reps.iter().enumerate() {
            for (pi, pair) in result.pairs.iter().enumerate() {
                w.write_record([
                    result.scenario.as_str(),
                    method.as_str(),
                    pair.label().as_str(),
                    &rep.to_string(),
                    &format!("{}", ests[pi]),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Boxplot-ready quantile CSV: one row per (method, pair) with the
/// five-number summary plus true and benchmark values.
pub fn write_quantile_csv(result: &McResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "scenario", "method", "pair", "min", "q25", "median", "q75", "max", "true", "cia",
    ])?;
    for (method, per_pair) in &result.summaries {
        for (pi, pair) in result.pairs.iter().enumerate() {
            let s = &per_pair[&pair.label()];
            w.write_record([
                result.scenario.as_str(),
                method.as_str(),
                pair.label().as_str(),
                &format!("{}", s.min),
                &format!("{}", s.q25),
                &format!("{}", s.median),
                &format!("{}", s.q75),
                &format!("{}", s.max),
                &format!("{}", result.true_values[pi]),
                &result.cia_values[pi].map_or(String::new(), |v| format!("{v}")),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// JSON summary keyed by (method, pair).
pub fn write_summary_json(result: &McResult, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(result)
        .map_err(|e| Error::Simulation(format!("serialize summary: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
