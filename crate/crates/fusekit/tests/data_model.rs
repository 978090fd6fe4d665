mod common;

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use common::*;
use fusekit::data::{load_table, split_population, stack, Column, DataTable, VariableRole};

fn write_temp(content: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(content.as_bytes()).unwrap();
    f
}

#[test]
fn load_three_row_csv() {
    let schema = xyz_schema();
    let f = write_temp("X1,X2,Y1\n1,10.5,0.2\n2,11.0,0.3\n3,12.5,0.4\n");
    let table = load_table(f.path(), &schema).unwrap();
    assert_eq!(table.n_rows(), 3);
    assert_eq!(table.n_cols(), 3);
    assert_eq!(table.metric("X2").unwrap()[1], Some(11.0));
}

#[test]
fn load_rejects_undeclared_category_code() {
    let schema = xyz_schema();
    let f = write_temp("X1,X2,Y1\n7,10.5,0.2\n");
    let err = load_table(f.path(), &schema).unwrap_err();
    assert!(err.to_string().contains("outside declared levels"), "{err}");
}

#[test]
fn load_missing_token_becomes_missing_marker() {
    let schema = xyz_schema(); // missing token: empty field
    let f = write_temp("X1,X2,Y1\n1,10.5,\n2,11.0,0.3\n");
    let table = load_table(f.path(), &schema).unwrap();
    assert_eq!(table.metric("Y1").unwrap()[0], None);
    assert_eq!(table.metric("Y1").unwrap()[1], Some(0.3));
}

#[test]
fn load_rejects_missing_common_column() {
    let schema = xyz_schema();
    let f = write_temp("X1,Y1\n1,0.2\n");
    assert!(load_table(f.path(), &schema).is_err());
}

#[test]
fn load_rejects_unparseable_metric() {
    let schema = xyz_schema();
    let f = write_temp("X1,X2,Y1\n1,abc,0.2\n");
    let err = load_table(f.path(), &schema).unwrap_err();
    assert!(err.to_string().contains("cannot parse"), "{err}");
}

fn split_tables(n: usize, seed: u64) -> (DataTable, DataTable) {
    let schema = xyz_schema();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let pop = xyz_population(n.max(1000), &mut rng);
    split_population(&pop, &schema, n / 2, n / 2, &mut rng).unwrap()
}

#[test]
fn stack_400_400_masks_z_on_recipients() {
    let (recipient, donor) = split_tables(800, 1);
    let schema = xyz_schema();
    let frame = stack(&recipient, &donor, &schema).unwrap();
    assert_eq!(frame.table.n_rows(), 800);
    assert_eq!(frame.n_recipient, 400);
    let z = frame.table.metric("Z1").unwrap();
    assert!(z[..400].iter().all(|c| c.is_none()));
    assert!(z[400..].iter().all(|c| c.is_some()));
    let y = frame.table.metric("Y1").unwrap();
    assert!(y[..400].iter().all(|c| c.is_some()));
    assert!(y[400..].iter().all(|c| c.is_none()));
    frame.check_pattern(&schema).unwrap();
}

#[test]
fn stack_excess_donor_frame_has_4000_rows() {
    let schema = xyz_schema();
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    let pop = xyz_population(5000, &mut rng);
    let (recipient, donor) = split_population(&pop, &schema, 400, 3600, &mut rng).unwrap();
    let frame = stack(&recipient, &donor, &schema).unwrap();
    assert_eq!(frame.table.n_rows(), 4000);
    assert_eq!(frame.n_donor, 3600);
}

#[test]
fn stack_rejects_empty_donor() {
    let (recipient, donor) = split_tables(100, 3);
    let schema = xyz_schema();
    let empty = donor.select_rows(&[]);
    assert!(stack(&recipient, &empty, &schema).is_err());
}

#[test]
fn stack_then_project_identity() {
    let (recipient, donor) = split_tables(200, 4);
    let schema = xyz_schema();
    let frame = stack(&recipient, &donor, &schema).unwrap();
    let rec_back = frame.recipient_block(&schema);
    let don_back = frame.donor_block(&schema);
    for name in recipient.names() {
        assert_eq!(rec_back.column(name).unwrap(), recipient.column(name).unwrap());
    }
    for name in donor.names() {
        assert_eq!(don_back.column(name).unwrap(), donor.column(name).unwrap());
    }
    assert_eq!(rec_back.row_ids(), recipient.row_ids());
}

#[test]
fn split_population_large_disjoint() {
    let schema = xyz_schema();
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let pop = xyz_population(23_418, &mut rng);
    let (recipient, donor) = split_population(&pop, &schema, 400, 400, &mut rng).unwrap();
    assert_eq!(recipient.n_rows(), 400);
    assert_eq!(donor.n_rows(), 400);
    let rec_ids: std::collections::HashSet<u64> = recipient.row_ids().iter().copied().collect();
    assert!(donor.row_ids().iter().all(|id| !rec_ids.contains(id)));
    // The recipient copy drops Z, the donor copy drops Y.
    assert!(!recipient.has_column("Z1"));
    assert!(!donor.has_column("Y1"));
}

#[test]
fn split_population_seeded_determinism() {
    let schema = xyz_schema();
    let mut rng = ChaCha12Rng::seed_from_u64(6);
    let pop = xyz_population(1000, &mut rng);
    let a = split_population(&pop, &schema, 5, 5, &mut ChaCha12Rng::seed_from_u64(42)).unwrap();
    let b = split_population(&pop, &schema, 5, 5, &mut ChaCha12Rng::seed_from_u64(42)).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
}

#[test]
fn split_population_overdraw_errors() {
    let schema = xyz_schema();
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let pop = xyz_population(1000, &mut rng);
    let small = pop.select_rows(&(0..10).collect::<Vec<_>>());
    assert!(split_population(&small, &schema, 8, 8, &mut rng).is_err());
}

#[test]
fn stack_rejects_observed_specific_in_wrong_block() {
    let schema = xyz_schema();
    let mut rng = ChaCha12Rng::seed_from_u64(8);
    let pop = xyz_population(100, &mut rng);
    // A "recipient" that still carries observed Z values.
    let recipient = pop.select_rows(&(0..50).collect::<Vec<_>>());
    let donor = pop
        .select_rows(&(50..100).collect::<Vec<_>>())
        .drop_columns(&["Y1"]);
    let err = stack(&recipient, &donor, &schema).unwrap_err();
    assert!(err.to_string().contains("donor-specific"), "{err}");
}

#[test]
fn schema_validation_rejects_degenerate_declarations() {
    use fusekit::data::FusionSchema;
    // No donor-specific variable.
    assert!(FusionSchema::new(vec![
        cat_var("X1", VariableRole::Common, &[1, 2]),
        metric_var("Y1", VariableRole::SpecificRecipient),
    ])
    .is_err());
    // Duplicate names.
    assert!(FusionSchema::new(vec![
        cat_var("X1", VariableRole::Common, &[1, 2]),
        metric_var("X1", VariableRole::SpecificDonor),
    ])
    .is_err());
    // Single-level categorical.
    assert!(FusionSchema::new(vec![
        cat_var("X1", VariableRole::Common, &[1]),
        metric_var("Z1", VariableRole::SpecificDonor),
    ])
    .is_err());
}

#[test]
fn table_rejects_ragged_columns() {
    assert!(DataTable::new(
        vec!["a".into(), "b".into()],
        vec![metric(&[1.0, 2.0]), metric(&[1.0])],
    )
    .is_err());
}

#[test]
fn written_csv_round_trips() {
    let schema = xyz_schema();
    let mut rng = ChaCha12Rng::seed_from_u64(9);
    let pop = xyz_population(50, &mut rng);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pop.csv");
    pop.write_csv(&path, "").unwrap();
    let back = load_table(&path, &schema).unwrap();
    assert_eq!(back.n_rows(), 50);
    match (pop.column("X1").unwrap(), back.column("X1").unwrap()) {
        (Column::Categorical(a), Column::Categorical(b)) => assert_eq!(a, b),
        _ => panic!("scale changed in round trip"),
    }
}
