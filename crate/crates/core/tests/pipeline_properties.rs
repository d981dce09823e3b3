use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rydberg_reservoir::model::ModelParams;
use rydberg_reservoir::pipeline::{
    build_dataset, fit_readout, multiplex_downsample, predict_from_trace, savitzky_golay, DatasetLayout, FilterSpec,
    PipelineSettings, ReadoutModel, WindowedDataset,
};

fn train_mse(model: &ReadoutModel, ds: &WindowedDataset) -> f64 {
    ds.windows()
        .zip(&ds.targets)
        .map(|(w, y)| {
            let r = model.predict(w) - y;
            r * r
        })
        .sum::<f64>()
        / ds.len() as f64
}

fn random_dataset(rng: &mut ChaCha8Rng, rows: usize, m: usize) -> WindowedDataset {
    let windows: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let targets = windows
        .iter()
        .map(|w| w.iter().enumerate().map(|(j, x)| (j as f64 - 2.0) * x).sum::<f64>() + rng.random_range(-0.3..0.3))
        .collect();
    WindowedDataset::from_windows(&windows, targets, 1).unwrap()
}

#[test]
fn readout_is_a_minimum_of_train_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for lambda in [0.0, 0.5] {
        let ds = random_dataset(&mut rng, 60, 8);
        let fit = fit_readout(&ds, lambda).unwrap();
        let objective = |model: &ReadoutModel| {
            train_mse(model, &ds) * ds.len() as f64 + lambda * model.weights.iter().map(|w| w * w).sum::<f64>()
        };
        let best = objective(&fit.model);
        for _ in 0..50 {
            let mut dir: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            dir.iter_mut().for_each(|v| *v *= 1e-4 / norm);
            let mut moved = fit.model.clone();
            for (w, d) in moved.weights.iter_mut().zip(&dir) {
                *w += d;
            }
            moved.bias += dir[8];
            assert!(objective(&moved) >= best, "perturbation lowered the objective");
        }
    }
}

#[test]
fn targets_are_index_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let input: Vec<f64> = (0..400).map(|_| rng.random()).collect();
    for spp in [1usize, 20] {
        let trace: Vec<f64> = (0..400 * spp).map(|_| rng.random()).collect();
        let layout = DatasetLayout {
            m: 12,
            stride: 20,
            samples_per_symbol: spp,
        };
        let subs = multiplex_downsample(&trace, 20).unwrap();
        for (idx, sub) in subs.iter().enumerate() {
            let i = idx + 1;
            let ds = build_dataset(sub, &input, &layout, i).unwrap();
            for (j, &k) in ds.ks.iter().enumerate() {
                let t = ((i - 1) + 20 * (k + 12)) / spp;
                assert_eq!(ds.targets[j].to_bits(), input[t].to_bits());
                let expected: Vec<f64> = (0..12).map(|c| trace[(i - 1) + 20 * (k + c)]).collect();
                assert_eq!(ds.window(j), &expected[..]);
            }
        }
    }
}

#[test]
fn end_to_end_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let input: Vec<f64> = (0..300).map(|_| rng.random()).collect();
    let trace: Vec<f64> = (0..300 * 20)
        .map(|j| 0.05 + 0.01 * input[j / 20] + 1e-3 * rng.random::<f64>())
        .collect();
    let settings = PipelineSettings {
        layout: DatasetLayout {
            m: 30,
            stride: 20,
            samples_per_symbol: 20,
        },
        ..PipelineSettings::default()
    };
    let a = predict_from_trace(&trace, &input, &settings, ModelParams::default()).unwrap();
    let b = predict_from_trace(&trace, &input, &settings, ModelParams::default()).unwrap();
    assert_eq!(a.per_series_mse.len(), 20);
    let bits = |r: &[f64]| r.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.per_series_mse), bits(&b.per_series_mse));
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filter_reproduces_low_order_polynomials(
        coeffs in prop::collection::vec(-2.0..2.0f64, 4),
        window in 4usize..16,
        len in 20usize..80,
    ) {
        let spec = FilterSpec::new(window, 3).unwrap();
        let x: Vec<f64> = (0..len)
            .map(|j| {
                let t = j as f64 / len as f64;
                coeffs[0] + coeffs[1] * t + coeffs[2] * t * t + coeffs[3] * t * t * t
            })
            .collect();
        let y = savitzky_golay(&x, &spec).unwrap();
        for (a, b) in x.iter().zip(&y) {
            prop_assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn split_is_chronological(rows in 4usize..200, frac in 0.1..0.9f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(rows as u64);
        let ds = random_dataset(&mut rng, rows, 3);
        let n_train = (rows as f64 * frac + 1e-9).floor() as usize;
        match ds.split(frac) {
            Ok((train, test)) => {
                prop_assert_eq!(train.len(), n_train);
                prop_assert_eq!(train.len() + test.len(), rows);
                prop_assert_eq!(&train.targets[..], &ds.targets[..n_train]);
                prop_assert_eq!(&test.targets[..], &ds.targets[n_train..]);
            }
            Err(_) => prop_assert!(n_train == 0 || n_train == rows),
        }
    }
}
