mod common;

use common::*;
use enns_core::dnp::DnpConfig;
use enns_core::estimate::{
    bagged_member_seed, fit_l1, fit_stagewise, predict_bagged_dropout, soft_threshold, BaggedDropoutSpec,
    SparsityMode, SparsitySpec,
};
use enns_core::nn::{self, Activation, NetworkArchitecture, NetworkParameters, TrainOptions};
use enns_core::{Dataset, Task};
use ndarray::Array2;
use proptest::prelude::*;

proptest! {
    #[test]
    fn soft_threshold_shrinks_toward_zero(v in prop::collection::vec(-100.0f64..100.0, 1..40), c in 0.0f64..50.0) {
        let out = soft_threshold(&v, c).unwrap();
        for (&x, &y) in v.iter().zip(&out) {
            prop_assert!(y.abs() <= x.abs());
            prop_assert!(y == 0.0 || y.signum() == x.signum());
            if x.abs() > c {
                prop_assert_eq!(y, x - c * x.signum());
            } else {
                prop_assert_eq!(y, 0.0);
            }
        }
        prop_assert_eq!(soft_threshold(&v, 0.0).unwrap(), v.clone());
        let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(soft_threshold(&v, max).unwrap().iter().all(|&y| y == 0.0));
    }
}

#[test]
fn soft_threshold_hand_case() {
    assert_eq!(soft_threshold(&[3.0, -1.0, 0.5], 1.0).unwrap(), vec![2.0, 0.0, 0.0]);
    assert!(soft_threshold(&[1.0], -0.1).is_err());
}

fn toy(n: usize, seed_value: u64) -> Dataset {
    uniform_dataset(n, 3, seed_value, |x, rng| 2.0 * x[0] - x[1] * x[2] + 0.1 * gaussian(rng))
}

fn zero_fraction(w: &Array2<f64>) -> f64 {
    w.iter().filter(|&&v| v == 0.0).count() as f64 / w.len() as f64
}

#[test]
fn percentile_mode_reaches_requested_sparsity() {
    let data = toy(80, 1);
    let arch = NetworkArchitecture::new(3, vec![12, 6], Activation::Relu, Task::Regression).unwrap();
    for pct in [50.0, 90.0] {
        for epochs in [0, 1, 40] {
            let spec = SparsitySpec::uniform(SparsityMode::Percentile, pct, &arch);
            let opts = TrainOptions {
                max_epochs: epochs,
                rng_seed: 3,
                ..TrainOptions::default()
            };
            let params = fit_l1(&data, &arch, &spec, &opts).unwrap();
            for w in &params.weights {
                assert!(zero_fraction(w) >= pct / 100.0, "{pct} {epochs}: {}", zero_fraction(w));
            }
        }
    }
}

#[test]
fn zero_sparsity_reproduces_plain_training() {
    let data = toy(50, 2);
    let arch = NetworkArchitecture::new(3, vec![8, 4], Activation::Sigmoid, Task::Regression).unwrap();
    let opts = TrainOptions {
        max_epochs: 30,
        batch_size: 16,
        rng_seed: 11,
        ..TrainOptions::default()
    };
    for mode in [SparsityMode::Percentile, SparsityMode::ExplicitLambda] {
        let spec = SparsitySpec::uniform(mode, 0.0, &arch);
        assert_eq!(fit_l1(&data, &arch, &spec, &opts).unwrap(), nn::fit(&arch, &data, &opts).unwrap());
    }
}

#[test]
fn explicit_lambda_zeroes_small_weights() {
    let data = toy(60, 3);
    let arch = NetworkArchitecture::new(3, vec![10], Activation::Relu, Task::Regression).unwrap();
    let opts = TrainOptions {
        max_epochs: 50,
        rng_seed: 1,
        ..TrainOptions::default()
    };
    let dense = fit_l1(&data, &arch, &SparsitySpec::uniform(SparsityMode::ExplicitLambda, 0.0, &arch), &opts).unwrap();
    let sparse = fit_l1(&data, &arch, &SparsitySpec::uniform(SparsityMode::ExplicitLambda, 2.0, &arch), &opts).unwrap();
    let zeros = |p: &NetworkParameters| p.weights.iter().map(|w| w.iter().filter(|&&v| v == 0.0).count()).sum::<usize>();
    assert!(zeros(&sparse) > zeros(&dense));
}

fn trained(task: Task) -> (NetworkArchitecture, NetworkParameters, Dataset) {
    let (arch, _, data) = random_instance(30, 3, vec![8, 5], Activation::Relu, task, 4);
    let opts = TrainOptions {
        max_epochs: 20,
        rng_seed: 2,
        ..TrainOptions::default()
    };
    let params = nn::fit(&arch, &data, &opts).unwrap();
    (arch, params, data)
}

#[test]
fn bagged_prediction_is_the_member_average() {
    let (arch, params, data) = trained(Task::Regression);
    let spec = BaggedDropoutSpec {
        num_repeats: 7,
        drop_rate: 0.3,
        threshold: 0.5,
    };
    let bag = predict_bagged_dropout(&params, &arch, data.x(), &spec, 99).unwrap();
    let members: Vec<_> = (0..7)
        .map(|k| {
            let pruned = nn::dropout_mask(&params, 0.3, bagged_member_seed(99, k)).unwrap();
            nn::predict(&pruned, &arch, data.x()).unwrap()
        })
        .collect();
    for i in 0..data.n() {
        let mean = members.iter().map(|m| m[i]).sum::<f64>() / 7.0;
        assert!((bag.mean[i] - mean).abs() <= 1e-12);
    }
    assert!(bag.labels.is_none());
    assert_eq!(bag, predict_bagged_dropout(&params, &arch, data.x(), &spec, 99).unwrap());
}

#[test]
fn bagged_degenerate_cases() {
    let (arch, params, data) = trained(Task::Regression);
    let tiny = BaggedDropoutSpec {
        num_repeats: 1,
        drop_rate: 1e-300,
        threshold: 0.5,
    };
    let bag = predict_bagged_dropout(&params, &arch, data.x(), &tiny, 1).unwrap();
    assert_eq!(bag.mean, nn::predict(&params, &arch, data.x()).unwrap());

    let mut constant = NetworkParameters::zeros(&arch);
    constant.output_intercept = 2.75;
    for k in [1, 5, 32] {
        let spec = BaggedDropoutSpec {
            num_repeats: k,
            drop_rate: 0.6,
            threshold: 0.5,
        };
        let bag = predict_bagged_dropout(&constant, &arch, data.x(), &spec, 3).unwrap();
        assert!(bag.mean.iter().all(|&v| v == 2.75));
    }
}

#[test]
fn classification_labels_flip_at_the_threshold() {
    let (arch, params, data) = trained(Task::Classification);
    let spec = BaggedDropoutSpec {
        num_repeats: 9,
        drop_rate: 0.2,
        threshold: 0.5,
    };
    let base = predict_bagged_dropout(&params, &arch, data.x(), &spec, 5).unwrap();
    for &pc in base.mean.iter() {
        let at = BaggedDropoutSpec { threshold: pc, ..spec.clone() };
        let labels = predict_bagged_dropout(&params, &arch, data.x(), &at, 5).unwrap().labels.unwrap();
        for (l, p) in labels.iter().zip(base.mean.iter()) {
            assert_eq!(*l == 1, *p > pc);
        }
    }
}

#[test]
fn stagewise_fit_admits_every_column() {
    let data = toy(60, 6);
    let arch = NetworkArchitecture::new(3, vec![8], Activation::Relu, Task::Regression).unwrap();
    let params = fit_stagewise(&data, &arch, &DnpConfig::default()).unwrap();
    for j in 0..3 {
        assert!(params.weights[0].row(j).iter().any(|&v| v != 0.0));
    }
}

#[test]
fn stagewise_single_column_fits_like_plain_training() {
    let arch = NetworkArchitecture::new(1, vec![8], Activation::Relu, Task::Regression).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for s in 0..20 {
        let data = uniform_dataset(80, 1, s, |x, rng| 3.0 * x[0] + 0.1 * gaussian(rng));
        let mut cfg = DnpConfig::default();
        cfg.train_opts.rng_seed = s;
        let stagewise = fit_stagewise(&data, &arch, &cfg).unwrap();
        let (standardized, scale) = data.standardize_response();
        let mut plain = nn::fit(&arch, &standardized, &cfg.train_opts).unwrap();
        plain.fold_response_scale(&scale);
        a.push(nn::empirical_loss(&stagewise, &arch, &data).unwrap());
        b.push(nn::empirical_loss(&plain, &arch, &data).unwrap());
    }
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (ma, mb) = (a[10], b[10]);
    assert!(ma < 2.0 * mb && mb < 2.0 * ma, "medians {ma} {mb}");
}

#[test]
fn dominant_column_is_admitted_first() {
    let hits = (0..100)
        .filter(|&s| {
            let data = uniform_dataset(100, 2, 300 + s, |x, rng| 0.3 * x[0] + 4.0 * x[1] + 0.2 * gaussian(rng));
            let arch = NetworkArchitecture::new(2, vec![8], Activation::Relu, Task::Regression).unwrap();
            let mut sel = enns_core::dnp::StagewiseSelector::new(&data, &arch, DnpConfig::default(), s).unwrap();
            sel.step().unwrap() == 1
        })
        .count();
    assert!(hits >= 95, "{hits}");
}
