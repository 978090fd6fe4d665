//! Batch entry points behind the `fusekit` binary: validate, fuse,
//! synth, simulate, report.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::data::{load_table, stack, FusionSchema};
use crate::error::{Error, Result};
use crate::matchers::{FallbackKind, MatchAssignment, MatchMethod, PmmConfig, RhdConfig};
use crate::simulation::{
    fuse_frame, run_mc, write_long_csv, write_quantile_csv, write_summary_json,
    McResult, Scenario,
};
use crate::synth::{synth_population, SynthSpec};

/// Optional matcher tuning file for `fuse`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FuseConfig {
    #[serde(default)]
    pub rhd: RhdConfig,
    #[serde(default)]
    pub pmm: PmmConfig,
}

/// Resolve the seed: use the flag when present, otherwise pick one at
/// random and print it so the run can be reproduced.
pub fn resolve_seed(seed: Option<u64>) -> u64 {
    match seed {
        Some(s) => s,
        None => {
            let s: u64 = rand::rng().random();
            println!("seed: {s}");
            s
        }
    }
}

/// Validate a data file against a schema.
pub fn run_validate(schema_path: &Path, data_path: &Path) -> Result<()> {
    let schema = FusionSchema::from_json_file(schema_path)?;
    let table = load_table(data_path, &schema)?;
    table.validate_against(&schema)?;
    println!(
        "ok: {} rows, {} columns validate against {}",
        table.n_rows(),
        table.n_cols(),
        schema_path.display()
    );
    Ok(())
}

fn write_audit(
    assignments: &[MatchAssignment],
    frame_row_ids: &[u64],
    targets: &[&str],
    path: &Path,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "target",
        "recipient_id",
        "donor_id",
        "method",
        "stratum",
        "distance",
        "fallback",
    ])?;
    for (ai, assignment) in assignments.iter().enumerate() {
        // RHD produces one assignment per target; PMM/Gower one for all.
        let target_label = if assignments.len() == targets.len() {
            targets[ai].to_string()
        } else {
            targets.join("+")
        };
        for p in &assignment.pairs {
            w.write_record([
                target_label.as_str(),
                &frame_row_ids[p.recipient].to_string(),
                &frame_row_ids[p.donor].to_string(),
                &assignment.method.to_string(),
                p.stratum.as_deref().unwrap_or(""),
                &p.distance.map_or(String::new(), |d| format!("{d}")),
                match p.fallback {
                    FallbackKind::None => "none",
                    FallbackKind::SecondRound => "second_round",
                    FallbackKind::Emergency => "emergency",
                },
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Fuse a recipient and donor file; write the imputed recipient CSV and
/// an assignment audit CSV next to it.
#[allow(clippy::too_many_arguments)]
pub fn run_fuse(
    recipient_path: &Path,
    donor_path: &Path,
    schema_path: &Path,
    method: MatchMethod,
    config_path: Option<&Path>,
    seed: Option<u64>,
    out_path: &Path,
) -> Result<()> {
    let schema = FusionSchema::from_json_file(schema_path)?;
    let config: FuseConfig = match config_path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{p:?}: {e}")))?
        }
        None => FuseConfig::default(),
    };
    let seed = resolve_seed(seed);

    let recipient = load_table(recipient_path, &schema)?;
    let donor = load_table(donor_path, &schema)?;
    let frame = stack(&recipient, &donor, &schema)?;
    let targets_owned = schema
        .donor_specific_names()
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>();
    let targets: Vec<&str> = targets_owned.iter().map(|s| s.as_str()).collect();

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let (fused, assignments) = fuse_frame(
        &frame,
        &schema,
        method,
        &targets,
        &config.rhd,
        &config.pmm,
        &mut rng,
    )?;
    fused.write_csv(out_path, &schema.missing_token)?;

    let audit_path = out_path.with_extension("assignment.csv");
    write_audit(&assignments, frame.table.row_ids(), &targets, &audit_path)?;

    let total_pairs: usize = assignments.iter().map(|a| a.pairs.len()).sum();
    let fallbacks: usize = assignments.iter().map(|a| a.fallback_count()).sum();
    for a in &assignments {
        for note in &a.notes {
            eprintln!("note: {note}");
        }
    }
    println!(
        "fused {} recipients with {} ({} targets); fallback rate {:.1}%",
        frame.n_recipient,
        method,
        targets.len(),
        100.0 * fallbacks as f64 / total_pairs.max(1) as f64
    );
    println!("wrote {} and {}", out_path.display(), audit_path.display());
    Ok(())
}

/// Generate a synthetic population CSV from a spec file.
pub fn run_synth(spec_path: &Path, out_path: &Path, seed: Option<u64>) -> Result<()> {
    let text = std::fs::read_to_string(spec_path)?;
    let mut spec: SynthSpec =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{spec_path:?}: {e}")))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let (table, report) = synth_population(&spec, &mut rng)?;
    table.write_csv(out_path, "")?;
    if report.repaired {
        eprintln!("note: latent matrix repaired by eigenvalue clipping");
    }
    println!("wrote {} ({} rows)", out_path.display(), table.n_rows());
    for (a, b, r) in &report.achieved_correlations {
        println!("achieved corr({a},{b}) = {r:.4}");
    }
    Ok(())
}

/// Console table mirroring the bias/MSE layout of the result summaries.
pub fn print_result_table(result: &McResult) {
    println!(
        "scenario {} (k={}, n_rec={}, n_don={}, failed={})",
        result.scenario, result.k, result.n_rec, result.n_don, result.failed_replications
    );
    let labels: Vec<String> = result.pairs.iter().map(|p| p.label()).collect();
    print!("{:<18}", "pair");
    for l in &labels {
        print!("{l:>14}");
    }
    println!();
    print!("{:<18}", "true");
    for v in &result.true_values {
        print!("{v:>14.4}");
    }
    println!();
    print!("{:<18}", "cia");
    for v in &result.cia_values {
        match v {
            Some(v) => print!("{v:>14.4}"),
            None => print!("{:>14}", "-"),
        }
    }
    println!();
    for (method, per_pair) in &result.summaries {
        for (stat, pick) in [
            ("bias", 0usize),
            ("mse", 1usize),
        ] {
            print!("{:<18}", format!("{method} {stat}"));
            for l in &labels {
                let s = &per_pair[l];
                let v = if pick == 0 { s.bias } else { s.mse };
                print!("{v:>14.4}");
            }
            println!();
        }
    }
}

/// Run a scenario end-to-end and write estimates, summary, and
/// boxplot-quantile files into `out_dir`.
pub fn run_simulate(
    scenario_path: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    threads: Option<usize>,
) -> Result<()> {
    let mut scenario = Scenario::from_json_file(scenario_path)?;
    if let Some(s) = seed {
        scenario.mc.master_seed = s;
        if let Some(synth) = scenario.synth.as_mut() {
            synth.seed = s;
        }
    }
    std::fs::create_dir_all(out_dir)?;

    let pop = match (&scenario.synth, &scenario.population) {
        (Some(spec), _) => {
            let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
            synth_population(spec, &mut rng)?.0
        }
        (None, Some(path)) => {
            let base = scenario_path.parent().unwrap_or(Path::new("."));
            load_table(&base.join(path), &scenario.schema)?
        }
        (None, None) => unreachable!("validated at load"),
    };

    let run = || run_mc(&pop, &scenario.schema, &scenario.mc, &scenario.name);
    let result = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Simulation(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }?;

    write_long_csv(&result, &out_dir.join("estimates.csv"))?;
    write_summary_json(&result, &out_dir.join("summary.json"))?;
    write_quantile_csv(&result, &out_dir.join("quantiles.csv"))?;
    print_result_table(&result);
    println!("wrote estimates.csv, summary.json, quantiles.csv in {}", out_dir.display());
    Ok(())
}

/// Re-emit the console table and boxplot quantiles from a stored
/// summary.
pub fn run_report(summary_path: &Path, out_dir: Option<&Path>) -> Result<()> {
    let text = std::fs::read_to_string(summary_path)?;
    let result: McResult =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{summary_path:?}: {e}")))?;
    print_result_table(&result);
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        write_quantile_csv(&result, &dir.join("quantiles.csv"))?;
        println!("wrote quantiles.csv in {}", dir.display());
    }
    Ok(())
}

/// Print a machine-readable error report on stderr.
pub fn emit_error_report(err: &Error) {
    let report = serde_json::json!({
        "error": match err.exit_code() { 2 => "validation", _ => "runtime" },
        "message": err.to_string(),
    });
    eprintln!("{report}");
}
