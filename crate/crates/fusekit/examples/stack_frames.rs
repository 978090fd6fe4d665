//! Stack a recipient and a donor survey into one frame with the
//! missing-by-design pattern, then project the blocks back out.

use fusekit::data::{stack, Column, DataTable, FusionSchema, ScaleLevel, VariableRole, VariableSpec};

fn metric(vals: &[f64]) -> Column {
    Column::Metric(vals.iter().map(|&v| Some(v)).collect())
}

fn cat(codes: &[u32]) -> Column {
    Column::Categorical(codes.iter().map(|&c| Some(c)).collect())
}

fn main() -> fusekit::error::Result<()> {
    let schema = FusionSchema::new(vec![
        VariableSpec {
            name: "age_class".into(),
            role: VariableRole::Common,
            scale: ScaleLevel::Categorical { levels: vec![1, 2, 3] },
            recode: None,
        },
        VariableSpec {
            name: "income".into(),
            role: VariableRole::SpecificRecipient,
            scale: ScaleLevel::Metric,
            recode: None,
        },
        VariableSpec {
            name: "expenditure".into(),
            role: VariableRole::SpecificDonor,
            scale: ScaleLevel::Metric,
            recode: None,
        },
    ])?;

    // The recipient survey observes income, the donor survey
    // expenditure; age_class is common to both.
    let recipient = DataTable::new(
        vec!["age_class".into(), "income".into()],
        vec![cat(&[1, 2, 3]), metric(&[28_000.0, 41_000.0, 35_500.0])],
    )?;
    let donor = DataTable::new(
        vec!["age_class".into(), "expenditure".into()],
        vec![cat(&[2, 1]), metric(&[19_500.0, 14_200.0])],
    )?;

    let frame = stack(&recipient, &donor, &schema)?;
    frame.check_pattern(&schema)?;
    println!(
        "stacked frame: {} rows ({} recipients + {} donors)",
        frame.table.n_rows(),
        frame.n_recipient,
        frame.n_donor
    );
    for name in frame.table.names() {
        let col = frame.table.column(name)?;
        let missing = (0..col.len()).filter(|&r| col.is_missing(r)).count();
        println!("  {name}: {missing} missing cells by design");
    }

    let rec_block = frame.recipient_block(&schema);
    let don_block = frame.donor_block(&schema);
    println!(
        "projected blocks: recipient {}x{}, donor {}x{}",
        rec_block.n_rows(),
        rec_block.n_cols(),
        don_block.n_rows(),
        don_block.n_cols()
    );
    Ok(())
}
