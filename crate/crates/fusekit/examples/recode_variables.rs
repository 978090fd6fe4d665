//! Harmonise variables with the recoding rules: quantile binning for
//! metric variables and code-group mapping for categorical ones.

use fusekit::recode::{activity_status_rule, map_groups, quantile_bin, RecodeRule};

fn main() -> fusekit::error::Result<()> {
    // Quantile binning keeps tied values together in one class.
    let income = [12_400.0, 51_000.0, 33_000.0, 12_400.0, 78_000.0, 24_000.0];
    let bins = quantile_bin(&income, 3)?;
    println!("income terciles:");
    for (v, b) in income.iter().zip(&bins) {
        println!("  {v:>9.0} -> class {b}");
    }

    // Activity status: collapse a detailed classification into broad
    // groups, sending unknown codes to the NA category.
    let rule = activity_status_rule();
    if let RecodeRule::MapGroups { map, na_level, default_level } = &rule {
        let detailed: Vec<Option<u32>> = vec![Some(1), Some(4), Some(5), Some(7), Some(11), None];
        let broad = map_groups(&detailed, map, *na_level, *default_level)?;
        println!("activity status:");
        for (d, b) in detailed.iter().zip(&broad) {
            println!("  {:>4} -> {}", d.map_or("NA".into(), |v| v.to_string()), b.unwrap());
        }
        let mut levels = rule.output_levels().unwrap();
        levels.sort_unstable();
        println!("  output levels: {levels:?}");
    }
    Ok(())
}
