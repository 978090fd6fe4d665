//! Small Monte Carlo comparison of the three matching methods on a
//! synthetic population, printed as a bias/MSE table.

use fusekit::cli::print_result_table;
use fusekit::data::{Column, DataTable, FusionSchema, ScaleLevel, VariableRole, VariableSpec};
use fusekit::matchers::{MatchMethod, PmmConfig, RhdConfig};
use fusekit::recode::RecodeRule;
use fusekit::simulation::{run_mc, McConfig, TrackedPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

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
            recode: Some(RecodeRule::QuantileBin { k: 4 }),
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

    // Population of 5000 with a shared latent factor.
    let mut rng = ChaCha12Rng::seed_from_u64(99);
    let n = 5000;
    let mut region = Vec::new();
    let mut age = Vec::new();
    let mut income = Vec::new();
    let mut exp = Vec::new();
    for _ in 0..n {
        let u: f64 = StandardNormal.sample(&mut rng);
        let e1: f64 = StandardNormal.sample(&mut rng);
        let e2: f64 = StandardNormal.sample(&mut rng);
        region.push(Some(rng.random_range(1..=3u32)));
        age.push(Some(45.0 + 10.0 * u + 5.0 * e1));
        income.push(Some(30_000.0 + 8_000.0 * u + 3_000.0 * e1));
        exp.push(Some(20_000.0 + 5_000.0 * u + 2_000.0 * e2));
    }
    let pop = DataTable::new(
        vec!["region".into(), "age".into(), "income".into(), "expenditure".into()],
        vec![
            Column::Categorical(region),
            Column::Metric(age),
            Column::Metric(income),
            Column::Metric(exp),
        ],
    )?;

    let config = McConfig {
        k: 50,
        n_rec: 200,
        n_don: 200,
        methods: vec![MatchMethod::Rhd, MatchMethod::Pmm, MatchMethod::Gower],
        master_seed: 20_260_823,
        targets: vec!["expenditure".into()],
        pairs: vec![TrackedPair {
            a: "income".into(),
            z: "expenditure".into(),
        }],
        rhd: RhdConfig::default(),
        pmm: PmmConfig::default(),
    };
    let result = run_mc(&pop, &schema, &config, "example")?;
    print_result_table(&result);
    Ok(())
}
