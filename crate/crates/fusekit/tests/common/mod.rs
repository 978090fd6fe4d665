#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use fusekit::data::{
    stack, Column, DataTable, FusionSchema, ScaleLevel, StackedFrame, VariableRole, VariableSpec,
};
use fusekit::recode::RecodeRule;
use fusekit::regression::{backward_select, dummy_expand, ols_fit, Criterion};

pub fn metric(vals: &[f64]) -> Column {
    Column::Metric(vals.iter().map(|&v| Some(v)).collect())
}

pub fn cat(codes: &[u32]) -> Column {
    Column::Categorical(codes.iter().map(|&c| Some(c)).collect())
}

pub fn var(name: &str, role: VariableRole, scale: ScaleLevel) -> VariableSpec {
    VariableSpec {
        name: name.into(),
        role,
        scale,
        recode: None,
    }
}

pub fn metric_var(name: &str, role: VariableRole) -> VariableSpec {
    var(name, role, ScaleLevel::Metric)
}

pub fn cat_var(name: &str, role: VariableRole, levels: &[u32]) -> VariableSpec {
    var(
        name,
        role,
        ScaleLevel::Categorical {
            levels: levels.to_vec(),
        },
    )
}

/// Small fusion setting: one categorical and one metric common variable,
/// one recipient-specific and one donor-specific metric variable. The
/// metric common variable carries a quantile rule so RHD can categorise
/// it.
pub fn xyz_schema() -> FusionSchema {
    let mut x2 = metric_var("X2", VariableRole::Common);
    x2.recode = Some(RecodeRule::QuantileBin { k: 4 });
    FusionSchema::new(vec![
        cat_var("X1", VariableRole::Common, &[1, 2, 3]),
        x2,
        metric_var("Y1", VariableRole::SpecificRecipient),
        metric_var("Z1", VariableRole::SpecificDonor),
    ])
    .unwrap()
}

/// Population matching [`xyz_schema`]: a shared latent factor drives
/// every variable, so all pairwise correlations are material.
pub fn xyz_population(n: usize, rng: &mut ChaCha12Rng) -> DataTable {
    let mut x1 = Vec::with_capacity(n);
    let mut x2 = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    let mut z1 = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = StandardNormal.sample(rng);
        let e1: f64 = StandardNormal.sample(rng);
        let e2: f64 = StandardNormal.sample(rng);
        x1.push(if u < -0.4 {
            1
        } else if u < 0.4 {
            2
        } else {
            3
        });
        x2.push(50.0 + 10.0 * u + 3.0 * rng.random::<f64>());
        y1.push(2.0 * u + 0.8 * e1);
        z1.push(1.5 * u + 0.8 * e2);
    }
    DataTable::new(
        vec!["X1".into(), "X2".into(), "Y1".into(), "Z1".into()],
        vec![cat(&x1), metric(&x2), metric(&y1), metric(&z1)],
    )
    .unwrap()
}

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

/// Metric-commons schema for PMM instances.
pub fn pmm_schema() -> FusionSchema {
    FusionSchema::new(vec![
        metric_var("A", VariableRole::Common),
        metric_var("B", VariableRole::Common),
        metric_var("Z1", VariableRole::SpecificDonor),
        metric_var("Z2", VariableRole::SpecificDonor),
    ])
    .unwrap()
}

/// Random stacked instance for [`pmm_schema`]: both targets are linear
/// in the commons plus noise, so predictive means are continuous and
/// argmin donors are almost surely unique.
pub fn pmm_frame(n_rec: usize, n_don: usize, seed: u64) -> (StackedFrame, FusionSchema) {
    let schema = pmm_schema();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha12Rng, n: usize| -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    };
    let (ra, rb) = (draw(&mut rng, n_rec), draw(&mut rng, n_rec));
    let (da, db) = (draw(&mut rng, n_don), draw(&mut rng, n_don));
    let dz1: Vec<f64> = (0..n_don)
        .map(|i| 2.0 * da[i] - db[i] + 0.5 * draw(&mut rng, 1)[0])
        .collect();
    let dz2: Vec<f64> = (0..n_don)
        .map(|i| da[i] + 3.0 * db[i] + 0.5 * draw(&mut rng, 1)[0])
        .collect();
    let recipient = DataTable::new(
        vec!["A".into(), "B".into()],
        vec![metric(&ra), metric(&rb)],
    )
    .unwrap();
    let donor = DataTable::new(
        vec!["A".into(), "B".into(), "Z1".into(), "Z2".into()],
        vec![metric(&da), metric(&db), metric(&dz1), metric(&dz2)],
    )
    .unwrap();
    (stack(&recipient, &donor, &schema).unwrap(), schema)
}

/// Brute-force PMM oracle: documented recipe built from the library's
/// regression primitives, then an exhaustive distance-matrix scan.
/// Panics on an exact tie so callers know to pick a different seed;
/// the tie-free path needs no generator emulation.
pub fn pmm_oracle(frame: &StackedFrame, schema: &FusionSchema, targets: &[&str]) -> Vec<usize> {
    let common = schema.common_names();
    let don_rows = frame.donor_rows();
    let rec_rows = frame.recipient_rows();
    let mut union: Vec<String> = Vec::new();
    for &t in targets {
        for v in backward_select(&frame.table, &don_rows, t, &common, schema, Criterion::Bic).unwrap()
        {
            if !union.contains(&v) {
                union.push(v);
            }
        }
    }
    let selected: Vec<&str> = common
        .iter()
        .filter(|c| union.iter().any(|u| u == *c))
        .copied()
        .collect();
    let design_don = dummy_expand(&frame.table, &don_rows, &selected, schema).unwrap();
    let mut responses = DMatrix::zeros(don_rows.len(), targets.len());
    for (j, &t) in targets.iter().enumerate() {
        responses.set_column(
            j,
            &DVector::from_vec(frame.table.metric_dense(t, &don_rows).unwrap()),
        );
    }
    let fit = ols_fit(&design_don, &responses).unwrap();
    // All commons must be metric here, so a fresh expansion over the
    // recipient rows has the same column layout as the donor design.
    assert!(
        selected.iter().all(|v| schema.require(v).unwrap().scale.is_metric()),
        "pmm_oracle requires metric commons"
    );
    let design_rec = dummy_expand(&frame.table, &rec_rows, &selected, schema).unwrap();
    let z_rec = &design_rec.matrix * &fit.coefficients;
    let z_don = &fit.fitted;
    let s_inv = fit.residual_cov.clone().cholesky().unwrap().inverse();
    let mut picks = Vec::with_capacity(rec_rows.len());
    for i in 0..rec_rows.len() {
        let mut best = f64::INFINITY;
        let mut best_j = 0usize;
        let mut runner_up = f64::INFINITY;
        for j in 0..don_rows.len() {
            let d = z_rec.row(i) - z_don.row(j);
            let dist = (&d * &s_inv * d.transpose())[(0, 0)].max(0.0);
            if dist < best {
                runner_up = best;
                best = dist;
                best_j = j;
            } else if dist < runner_up {
                runner_up = dist;
            }
        }
        assert!(runner_up > best + 1e-12, "oracle tie; pick a different seed");
        picks.push(don_rows[best_j]);
    }
    picks
}

/// Brute-force Gower oracle. Recomputes every distance with the same
/// arithmetic order as the matcher (so ties agree bitwise) and emulates
/// the single tie-break draw per recipient on `rng`.
pub fn gower_oracle<R: Rng>(
    frame: &StackedFrame,
    schema: &FusionSchema,
    variables: &[&str],
    rng: &mut R,
) -> Vec<usize> {
    let rec_rows = frame.recipient_rows();
    let don_rows = frame.donor_rows();
    enum Prep {
        Metric { rec: Vec<f64>, don: Vec<f64>, range: f64 },
        Cat { rec: Vec<u32>, don: Vec<u32> },
    }
    let mut prepared = Vec::with_capacity(variables.len());
    for &v in variables {
        match schema.require(v).unwrap().scale {
            ScaleLevel::Metric => {
                let rec = frame.table.metric_dense(v, &rec_rows).unwrap();
                let don = frame.table.metric_dense(v, &don_rows).unwrap();
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for &x in rec.iter().chain(don.iter()) {
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
                prepared.push(Prep::Metric { rec, don, range: hi - lo });
            }
            ScaleLevel::Categorical { .. } => prepared.push(Prep::Cat {
                rec: frame.table.categorical_dense(v, &rec_rows).unwrap(),
                don: frame.table.categorical_dense(v, &don_rows).unwrap(),
            }),
        }
    }
    let p = prepared.len() as f64;
    let mut picks = Vec::with_capacity(rec_rows.len());
    for i in 0..rec_rows.len() {
        let mut best = f64::INFINITY;
        let mut dists = Vec::with_capacity(don_rows.len());
        for j in 0..don_rows.len() {
            let mut total = 0.0;
            for prep in &prepared {
                total += match prep {
                    Prep::Metric { rec, don, range } => {
                        if *range > 0.0 {
                            (rec[i] - don[j]).abs() / range
                        } else {
                            0.0
                        }
                    }
                    Prep::Cat { rec, don } => {
                        if rec[i] == don[j] {
                            0.0
                        } else {
                            1.0
                        }
                    }
                };
            }
            let dist = total / p;
            dists.push(dist);
            if dist < best {
                best = dist;
            }
        }
        let ties: Vec<usize> = (0..don_rows.len()).filter(|&j| dists[j] <= best).collect();
        picks.push(don_rows[ties[rng.random_range(0..ties.len())]]);
    }
    picks
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
