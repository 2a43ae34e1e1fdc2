//! Inverted dropout keeps the expected activation equal to the eval pass.
//!
//! With positive inputs, weights and biases every ReLU stays in its linear
//! region, so the logit is multilinear in independent masks of mean one and
//! its train-mode expectation equals the eval-mode logit.

use peerfed_core::{forward, Layer, Matrix, Mode, ParamSet, RngStream};

fn positive_network(dims: &[usize]) -> ParamSet {
    let mut rng = RngStream::new(77, 0);
    ParamSet::new(
        dims.windows(2)
            .map(|w| Layer {
                weights: Matrix::from_vec(w[1], w[0], (0..w[0] * w[1]).map(|_| rng.uniform(0.0, 0.15)).collect())
                    .unwrap(),
                bias: (0..w[1]).map(|_| rng.uniform(0.0, 0.05)).collect(),
            })
            .collect(),
    )
    .unwrap()
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[test]
fn train_mode_mean_matches_eval() {
    let params = positive_network(&[3, 8, 8, 8, 8, 1]);
    let x = Matrix::from_vec(1, 3, vec![0.5, 1.0, 0.25]).unwrap();
    let mut rng = RngStream::new(1, 1);
    let eval = logit(forward(&params, &x, Mode::Eval, &mut rng).unwrap()[0]);

    let draws = 40_000;
    let samples: Vec<f64> = (0..draws)
        .map(|_| logit(forward(&params, &x, Mode::Train { dropout_rate: 0.2 }, &mut rng).unwrap()[0]))
        .collect();
    let mean = samples.iter().sum::<f64>() / draws as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    let se = (var / draws as f64).sqrt();
    assert!(var > 0.0);
    assert!((mean - eval).abs() < 5.0 * se, "mean {mean} eval {eval} se {se}");
}

#[test]
fn dropped_share_matches_rate() {
    // A single hidden path: the output is zero exactly when that unit drops.
    let params = ParamSet::new(
        (0..5)
            .map(|_| Layer {
                weights: Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
                bias: vec![0.0],
            })
            .collect(),
    )
    .unwrap();
    let x = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
    let mut rng = RngStream::new(3, 3);
    let draws = 20_000;
    let mut survived = 0;
    for _ in 0..draws {
        let p = forward(&params, &x, Mode::Train { dropout_rate: 0.3 }, &mut rng).unwrap()[0];
        if p > 0.5 {
            survived += 1;
            // Four kept units each scale by 1/0.7.
            let expected = 1.0 / (1.0 + (-(1.0f64 / 0.7).powi(4)).exp());
            assert!((p - expected).abs() < 1e-12);
        }
    }
    // All four hidden units must survive.
    let rate = survived as f64 / draws as f64;
    let expected = 0.7f64.powi(4);
    let se = (expected * (1.0 - expected) / draws as f64).sqrt();
    assert!((rate - expected).abs() < 5.0 * se, "{rate} vs {expected}");
}
