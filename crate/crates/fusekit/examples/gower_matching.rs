//! Nearest-neighbour matching with the Gower distance over mixed-scale
//! common variables.

use fusekit::data::{stack, Column, DataTable, FusionSchema, ScaleLevel, VariableRole, VariableSpec};
use fusekit::matchers::gower_match;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn main() -> fusekit::error::Result<()> {
    let schema = FusionSchema::new(vec![
        VariableSpec {
            name: "region".into(),
            role: VariableRole::Common,
            scale: ScaleLevel::Categorical { levels: vec![1, 2, 3] },
            recode: None,
        },
        VariableSpec {
            name: "age".into(),
            role: VariableRole::Common,
            scale: ScaleLevel::Metric,
            recode: None,
        },
        VariableSpec {
            name: "rent".into(),
            role: VariableRole::SpecificDonor,
            scale: ScaleLevel::Metric,
            recode: None,
        },
    ])?;

    let mut rng = ChaCha12Rng::seed_from_u64(21);
    let n_rec = 8;
    let n_don = 25;
    let r_region: Vec<Option<u32>> = (0..n_rec).map(|_| Some(rng.random_range(1..=3))).collect();
    let r_age: Vec<Option<f64>> = (0..n_rec).map(|_| Some(rng.random_range(18.0..80.0))).collect();
    let d_region: Vec<Option<u32>> = (0..n_don).map(|_| Some(rng.random_range(1..=3))).collect();
    let d_age: Vec<Option<f64>> = (0..n_don).map(|_| Some(rng.random_range(18.0..80.0))).collect();
    let d_rent: Vec<Option<f64>> = d_age
        .iter()
        .map(|a| Some(1200.0 - 8.0 * a.unwrap() + rng.random_range(0.0..150.0)))
        .collect();

    let recipient = DataTable::new(
        vec!["region".into(), "age".into()],
        vec![Column::Categorical(r_region), Column::Metric(r_age)],
    )?;
    let donor = DataTable::new(
        vec!["region".into(), "age".into(), "rent".into()],
        vec![
            Column::Categorical(d_region),
            Column::Metric(d_age),
            Column::Metric(d_rent),
        ],
    )?;
    let frame = stack(&recipient, &donor, &schema)?;

    let assignment = gower_match(&frame, &schema, &["region", "age"], &mut rng)?;
    println!("recipient -> donor (gower distance):");
    for (i, p) in assignment.pairs.iter().enumerate() {
        println!(
            "  {:>2} -> {:>2}  ({:.3})",
            i,
            p.donor - n_rec,
            p.distance.unwrap()
        );
    }
    for note in &assignment.notes {
        println!("note: {note}");
    }
    Ok(())
}
