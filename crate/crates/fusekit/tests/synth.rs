mod common;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use fusekit::evaluation::pearson_corr;
use fusekit::synth::{
    normal_cdf, synth_population, LatentCorrelation, Margin, SynthSpec, SynthVariable,
};

fn normal(name: &str) -> SynthVariable {
    SynthVariable {
        name: name.into(),
        margin: Margin::Normal { mean: 0.0, sd: 1.0 },
    }
}

fn pair_spec(rho: f64, n: usize) -> SynthSpec {
    SynthSpec {
        n,
        seed: 0,
        correlation: LatentCorrelation::Matrix(vec![vec![1.0, rho], vec![rho, 1.0]]),
        variables: vec![normal("a"), normal("b")],
    }
}

fn dense(table: &fusekit::data::DataTable, name: &str) -> Vec<f64> {
    table
        .metric(name)
        .unwrap()
        .iter()
        .map(|c| c.unwrap())
        .collect()
}

#[test]
fn calibration_target_hit_at_scale() {
    let spec = pair_spec(0.8665, 100_000);
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let (table, report) = synth_population(&spec, &mut rng).unwrap();
    let r = pearson_corr(&dense(&table, "a"), &dense(&table, "b")).unwrap();
    assert!((r - 0.8665).abs() < 0.01, "achieved {r}");
    assert!(!report.repaired);
    assert_eq!(report.achieved_correlations.len(), 1);
}

#[test]
fn identity_matrix_gives_independence() {
    let spec = SynthSpec {
        n: 100_000,
        seed: 0,
        correlation: LatentCorrelation::Matrix(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]),
        variables: vec![normal("a"), normal("b"), normal("c")],
    };
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    let (_, report) = synth_population(&spec, &mut rng).unwrap();
    for (a, b, r) in &report.achieved_correlations {
        assert!(r.abs() < 0.02, "corr({a},{b}) = {r}");
    }
}

#[test]
fn categorical_threshold_shares_match_normal_cdf() {
    let thresholds = vec![-0.365, 0.714];
    let spec = SynthSpec {
        n: 100_000,
        seed: 0,
        correlation: LatentCorrelation::Matrix(vec![vec![1.0]]),
        variables: vec![SynthVariable {
            name: "d".into(),
            margin: Margin::Categorical {
                thresholds: thresholds.clone(),
            },
        }],
    };
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let (table, _) = synth_population(&spec, &mut rng).unwrap();
    let codes = table.categorical("d").unwrap();
    let n = codes.len() as f64;
    let share = |code: u32| codes.iter().filter(|c| **c == Some(code)).count() as f64 / n;
    // Oracle shares from the normal CDF (roughly the 35.8/41.8/22.4
    // density split).
    let expected = [
        normal_cdf(thresholds[0]),
        normal_cdf(thresholds[1]) - normal_cdf(thresholds[0]),
        1.0 - normal_cdf(thresholds[1]),
    ];
    for (code, e) in (1..=3u32).zip(expected) {
        assert!(
            (share(code) - e).abs() < 0.01,
            "code {code}: share {} vs {e}",
            share(code)
        );
    }
}

#[test]
fn copula_preserves_correlation_sign() {
    for rho in [-0.6, 0.6] {
        let mut spec = pair_spec(rho, 20_000);
        spec.variables[1].margin = Margin::Lognormal { mu: 0.0, sigma: 1.0 };
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let (_, report) = synth_population(&spec, &mut rng).unwrap();
        let r = report.achieved_correlations[0].2;
        assert_eq!(r.signum(), rho.signum());
    }
}

#[test]
fn matrix_validation_errors() {
    // Not symmetric.
    let mut spec = pair_spec(0.5, 10);
    spec.correlation = LatentCorrelation::Matrix(vec![vec![1.0, 0.5], vec![0.2, 1.0]]);
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    assert!(synth_population(&spec, &mut rng).is_err());
    // Diagonal not one.
    spec.correlation = LatentCorrelation::Matrix(vec![vec![2.0, 0.5], vec![0.5, 1.0]]);
    assert!(synth_population(&spec, &mut rng).is_err());
    // Far from positive semi-definite.
    let spec = SynthSpec {
        n: 10,
        seed: 0,
        correlation: LatentCorrelation::Matrix(vec![
            vec![1.0, 0.9, 0.9],
            vec![0.9, 1.0, -0.9],
            vec![0.9, -0.9, 1.0],
        ]),
        variables: vec![normal("a"), normal("b"), normal("c")],
    };
    let err = synth_population(&spec, &mut rng).unwrap_err();
    assert!(err.to_string().contains("positive semi-definite"), "{err}");
}

#[test]
fn near_psd_matrix_is_repaired() {
    // The boundary for two variables each correlated 0.6 with the first
    // is corr(b,c) = 2*0.36 - 1 = -0.28; nudging just past it leaves a
    // tiny negative eigenvalue that must be clipped, not rejected.
    let spec = SynthSpec {
        n: 1000,
        seed: 0,
        correlation: LatentCorrelation::Matrix(vec![
            vec![1.0, 0.6, 0.6],
            vec![0.6, 1.0, -0.280_000_1],
            vec![0.6, -0.280_000_1, 1.0],
        ]),
        variables: vec![normal("a"), normal("b"), normal("c")],
    };
    let mut rng = ChaCha12Rng::seed_from_u64(6);
    let (_, report) = synth_population(&spec, &mut rng).unwrap();
    assert!(report.repaired);
}

fn anchored_spec() -> SynthSpec {
    let mut loadings = BTreeMap::new();
    loadings.insert("v".to_string(), [0.5, 0.4]);
    SynthSpec {
        n: 100,
        seed: 0,
        correlation: LatentCorrelation::Anchored {
            anchors: ["z1".into(), "z2".into()],
            anchor_correlation: 0.8,
            loadings,
        },
        variables: vec![normal("v"), normal("z1"), normal("z2")],
    }
}

#[test]
fn anchored_matrix_reproduces_declared_correlations() {
    let spec = anchored_spec();
    let m = spec.latent_matrix().unwrap();
    // Variable order: v, z1, z2.
    assert!((m[(1, 2)] - 0.8).abs() < 1e-12);
    assert!((m[(0, 1)] - 0.5).abs() < 1e-12);
    assert!((m[(0, 2)] - 0.4).abs() < 1e-12);
    assert!((m[(0, 0)] - 1.0).abs() < 1e-12);
    // And it is a valid correlation matrix.
    let eig = m.symmetric_eigen();
    assert!(eig.eigenvalues.iter().all(|&l| l > 0.0));
}

#[test]
fn infeasible_anchored_loadings_error() {
    let mut spec = anchored_spec();
    if let LatentCorrelation::Anchored { loadings, .. } = &mut spec.correlation {
        loadings.insert("v".to_string(), [0.99, -0.99]);
    }
    let err = spec.latent_matrix().unwrap_err();
    assert!(err.to_string().contains("infeasible"), "{err}");
}

#[test]
fn anchored_missing_loading_errors() {
    let mut spec = anchored_spec();
    if let LatentCorrelation::Anchored { loadings, .. } = &mut spec.correlation {
        loadings.clear();
    }
    assert!(spec.latent_matrix().is_err());
}

#[test]
fn generation_is_seed_deterministic() {
    let spec = pair_spec(0.3, 500);
    let (t1, _) = synth_population(&spec, &mut ChaCha12Rng::seed_from_u64(7)).unwrap();
    let (t2, _) = synth_population(&spec, &mut ChaCha12Rng::seed_from_u64(7)).unwrap();
    assert_eq!(t1, t2);
}

#[test]
fn spec_validation_rejects_bad_margins() {
    let mut spec = pair_spec(0.3, 10);
    spec.variables[0].margin = Margin::Normal { mean: 0.0, sd: 0.0 };
    assert!(spec.validate().is_err());
    spec.variables[0].margin = Margin::Lognormal { mu: 0.0, sigma: -1.0 };
    assert!(spec.validate().is_err());
    spec.variables[0].margin = Margin::Categorical { thresholds: vec![] };
    assert!(spec.validate().is_err());
    spec.variables[0].margin = Margin::Categorical {
        thresholds: vec![1.0, 1.0],
    };
    assert!(spec.validate().is_err());
}

#[test]
fn normal_cdf_reference_values() {
    assert!((normal_cdf(0.0) - 0.5).abs() < 1e-7);
    assert!((normal_cdf(1.959_964) - 0.975).abs() < 1e-6);
    assert!((normal_cdf(-1.281_552) - 0.10).abs() < 1e-6);
}
