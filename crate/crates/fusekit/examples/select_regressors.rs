//! Backward regressor selection with BIC: recover the active subset
//! from a noisy linear response.

use fusekit::data::{Column, DataTable, FusionSchema, ScaleLevel, VariableRole, VariableSpec};
use fusekit::regression::{backward_select, dummy_expand, ols_fit, Criterion};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> fusekit::error::Result<()> {
    let mut rng = ChaCha12Rng::seed_from_u64(8);
    let n = 120;
    let names = ["x1", "x2", "x3", "x4"];
    let cols: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    // Only x1 and x3 drive the response.
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let e: f64 = StandardNormal.sample(&mut rng);
            2.0 * cols[0][i] - 1.5 * cols[2][i] + 0.5 * e
        })
        .collect();

    let mut variables: Vec<VariableSpec> = names
        .iter()
        .map(|&name| VariableSpec {
            name: name.into(),
            role: VariableRole::Common,
            scale: ScaleLevel::Metric,
            recode: None,
        })
        .collect();
    variables.push(VariableSpec {
        name: "y".into(),
        role: VariableRole::SpecificDonor,
        scale: ScaleLevel::Metric,
        recode: None,
    });
    let schema = FusionSchema::new(variables)?;

    let mut table_names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    table_names.push("y".into());
    let mut columns: Vec<Column> = cols
        .iter()
        .map(|c| Column::Metric(c.iter().map(|&v| Some(v)).collect()))
        .collect();
    columns.push(Column::Metric(y.iter().map(|&v| Some(v)).collect()));
    let table = DataTable::new(table_names, columns)?;

    let rows: Vec<usize> = (0..n).collect();
    let selected = backward_select(&table, &rows, "y", &names, &schema, Criterion::Bic)?;
    println!("selected regressors: {selected:?}");

    let sel_refs: Vec<&str> = selected.iter().map(|s| s.as_str()).collect();
    let design = dummy_expand(&table, &rows, &sel_refs, &schema)?;
    let responses = DMatrix::from_vec(n, 1, y);
    let fit = ols_fit(&design, &responses)?;
    println!("design: n = {}, q = {} (intercept included)", design.n(), design.q());
    for (label, coef) in design.column_owner.iter().zip(fit.coefficients.iter()) {
        println!("  {label:<10} {coef:>8.3}");
    }
    let rss: f64 = fit.residuals.iter().map(|r| r * r).sum();
    println!("residual sum of squares: {rss:.2}");
    Ok(())
}
