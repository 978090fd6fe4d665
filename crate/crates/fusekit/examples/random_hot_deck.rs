//! Random hot deck matching within selected strata, with donor-pressure
//! control and fallback reporting.

use fusekit::data::{stack, Column, DataTable, FusionSchema, ScaleLevel, VariableRole, VariableSpec};
use fusekit::matchers::{impute, rhd_match, FallbackKind, RhdConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn cat(codes: &[u32]) -> Column {
    Column::Categorical(codes.iter().map(|&c| Some(c)).collect())
}

fn metric(vals: &[f64]) -> Column {
    Column::Metric(vals.iter().map(|&v| Some(v)).collect())
}

fn main() -> fusekit::error::Result<()> {
    let schema = FusionSchema::new(vec![
        VariableSpec {
            name: "sex".into(),
            role: VariableRole::Common,
            scale: ScaleLevel::Categorical { levels: vec![1, 2] },
            recode: None,
        },
        VariableSpec {
            name: "age_class".into(),
            role: VariableRole::Common,
            scale: ScaleLevel::Categorical { levels: vec![1, 2, 3] },
            recode: None,
        },
        VariableSpec {
            name: "savings".into(),
            role: VariableRole::SpecificDonor,
            scale: ScaleLevel::Metric,
            recode: None,
        },
    ])?;

    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let n_rec = 200;
    let n_don = 180;
    let draw = |rng: &mut ChaCha12Rng, n: usize| -> (Vec<u32>, Vec<u32>) {
        (
            (0..n).map(|_| rng.random_range(1..=2)).collect(),
            (0..n).map(|_| rng.random_range(1..=3)).collect(),
        )
    };
    let (r_sex, r_age) = draw(&mut rng, n_rec);
    let (d_sex, d_age) = draw(&mut rng, n_don);
    // Savings depend on the stratum, so stratum fidelity matters.
    let d_sav: Vec<f64> = (0..n_don)
        .map(|i| 1000.0 * d_age[i] as f64 + 500.0 * d_sex[i] as f64 + 100.0 * rng.random::<f64>())
        .collect();

    let recipient = DataTable::new(
        vec!["sex".into(), "age_class".into()],
        vec![cat(&r_sex), cat(&r_age)],
    )?;
    let donor = DataTable::new(
        vec!["sex".into(), "age_class".into(), "savings".into()],
        vec![cat(&d_sex), cat(&d_age), metric(&d_sav)],
    )?;
    let frame = stack(&recipient, &donor, &schema)?;

    let assignment = rhd_match(&frame, &schema, "savings", &RhdConfig::default(), &mut rng)?;
    println!("stratum variables selected: {:?}", assignment.selected);
    for note in &assignment.notes {
        println!("note: {note}");
    }
    let second = assignment
        .pairs
        .iter()
        .filter(|p| p.fallback == FallbackKind::SecondRound)
        .count();
    let emergency = assignment
        .pairs
        .iter()
        .filter(|p| p.fallback == FallbackKind::Emergency)
        .count();
    println!(
        "{} recipients matched; {} via the relaxed second round, {} via emergency fallback",
        assignment.pairs.len(),
        second,
        emergency
    );

    let imputed = impute(&frame, &assignment, &["savings"])?;
    let rows: Vec<usize> = (0..n_rec).collect();
    let sav = imputed.metric_dense("savings", &rows)?;
    let mean = sav.iter().sum::<f64>() / n_rec as f64;
    let donor_mean = d_sav.iter().sum::<f64>() / n_don as f64;
    println!("imputed savings mean {mean:.0} vs donor mean {donor_mean:.0}");
    Ok(())
}
