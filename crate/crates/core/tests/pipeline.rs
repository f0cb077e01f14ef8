use std::sync::Arc;

use tailgrid::expmeasure::{dc_distance, nu_hat, reference_complete_dependence, PointMeasure, TestSet, TestSetKind};
use tailgrid::harness::{read_replicates, summarize_rows};
use tailgrid::io::{read_paths, write_paths};
use tailgrid::margins::{estimate_margins, moment_estimators, top_order_statistics};
use tailgrid::standardize::{scaled_atoms, xi_true_all};
use tailgrid::{derive_seed, run_experiment, ExperimentConfig, GammaCurve, Grid, ModelSpec};

fn moment_gamma_oracle(sample: &[f64], k: usize) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let base = s[k].ln();
    let (m1, m2) = s[..k].iter().fold((0.0, 0.0), |(m1, m2), x| {
        let l = x.ln() - base;
        (m1 + l / k as f64, m2 + l * l / k as f64)
    });
    m1 + 1.0 - 0.5 / (1.0 - m1 * m1 / m2)
}

#[test]
fn csv_roundtrip_then_margins_matches_direct_moment_formula() {
    let model = ModelSpec::ParetoPower {
        gamma: "sine:0.6,0.2,1".parse().unwrap(),
    };
    let grid = Arc::new(Grid::uniform(6).unwrap());
    let paths = model.simulate(grid.clone(), 800, 17).unwrap();
    let mut buf = Vec::new();
    write_paths(&mut buf, &paths).unwrap();
    let back = read_paths(buf.as_slice()).unwrap();
    let k = 40;
    let curves = estimate_margins(&back, k).unwrap();
    for (j, triple) in curves.triples.iter().enumerate() {
        let column: Vec<f64> = back.iter().map(|p| p.values()[j]).collect();
        let oracle = moment_gamma_oracle(&column, k);
        assert!(
            (triple.gamma_hat - oracle).abs() < 1e-12,
            "node {j}: {} vs {oracle}",
            triple.gamma_hat
        );
        let direct = moment_estimators(&top_order_statistics(&column, k).unwrap()).unwrap();
        assert_eq!(direct, *triple);
    }
    // the interpolated curve passes through the node estimates
    for (j, &t) in grid.points().iter().enumerate() {
        assert_eq!(curves.at(t).gamma_hat, curves.triples[j].gamma_hat);
    }
}

#[test]
fn true_standardization_under_complete_dependence_counts_driver_exceedances() {
    let model = ModelSpec::CompleteDependence {
        gamma: GammaCurve::Power {
            base: 0.3,
            amplitude: 0.4,
            exponent: 1.0,
        },
    };
    let grid = Arc::new(Grid::uniform(5).unwrap());
    let sim = model.simulator(grid.clone()).unwrap();
    let (n, k) = (3000, 60);
    let draws = sim.draws(n, |i| derive_seed(23, 0, 0, i as u64));
    let paths: Vec<_> = draws.iter().map(|d| d.path.clone()).collect();
    let measure = PointMeasure::empirical(scaled_atoms(xi_true_all(&model, &paths).unwrap(), n, k), k).unwrap();
    for level in [0.5, 1.0, 2.0, 4.0] {
        let set = TestSet::new(TestSetKind::MinExceedance, vec![0.0, 0.3, 1.0], level).unwrap();
        // xi = 1 / (1 - exp(-1/Z0)) at every location
        let oracle = draws
            .iter()
            .filter(|d| (k as f64 / n as f64) / -(-1.0 / d.driver).exp_m1() > level * (1.0 + 1e-9))
            .count() as f64
            / k as f64;
        let got = nu_hat(&measure, &set);
        assert!(
            (got - oracle).abs() <= 1.0 / k as f64 + 1e-12,
            "level {level}: {got} vs {oracle}"
        );
    }
    let reference = reference_complete_dependence(1.0, 256).unwrap();
    let d = dc_distance(&measure, &reference.measure, 1.0);
    assert!(d > 0.0 && d < 0.5, "d_c = {d}");
}

#[test]
fn experiment_rows_reproduce_the_aggregate() {
    let cfg = ExperimentConfig::from_json(
        r#"{
            "model": {"model": "exp-gaussian",
                      "gamma": {"kind": "constant", "value": 0.4},
                      "covariance": {"family": "exponential", "variance": 0.25, "length": 0.2}},
            "n_schedule": [400, 1600],
            "k_rule": {"rule": "power", "theta": 0.5},
            "grid_rule": {"rule": "uniform", "intervals": 5},
            "replicates": 6,
            "master_seed": 99,
            "targets": {"quantile": {"np_over_k": 0.5}}
        }"#,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let result = run_experiment(&cfg).unwrap();
    result.write(dir.path()).unwrap();
    let rows = read_replicates(std::fs::File::open(dir.path().join("replicates.csv")).unwrap()).unwrap();
    assert_eq!(rows, result.rows);
    let recomputed = summarize_rows(&rows);
    for level in &result.aggregate.levels {
        assert_eq!(level.replicates_ok, 6);
        assert_eq!(&recomputed[&level.n], &level.statistics);
        assert!(level.statistics.contains_key("gamma_sup"));
        assert!(level.statistics.contains_key("quantile_interp_sup"));
    }
}
