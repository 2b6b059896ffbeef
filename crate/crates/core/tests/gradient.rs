use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ruda::encoder::Encoder;
use ruda::env::SensoryData;

/// Every parameter of a small autoencoder against central differences.
#[test]
fn full_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let enc = Encoder::new(2, 5, 6, 3, &mut rng);
    let batch: Vec<Vec<f64>> = (0..4).map(|_| (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let refs: Vec<&[f64]> = batch.iter().map(|v| v.as_slice()).collect();
    let (loss, grads) = enc.loss_and_gradient(&refs);
    assert_eq!(loss.to_bits(), enc.loss(&refs).to_bits());

    let h = 1e-6;
    for (l, grad) in grads.iter().enumerate() {
        let n_w = grad.weights.len();
        for idx in 0..n_w + grad.bias.len() {
            let at = |delta: f64| {
                let mut e = enc.clone();
                let layer = &mut e.layers_mut()[l];
                if idx < n_w {
                    layer.weights[idx] += delta;
                } else {
                    layer.bias[idx - n_w] += delta;
                }
                e.loss(&refs)
            };
            let numeric = (at(h) - at(-h)) / (2.0 * h);
            let analytic = if idx < n_w { grad.weights[idx] } else { grad.bias[idx - n_w] };
            assert!(
                (numeric - analytic).abs() <= 1e-7 + 1e-5 * analytic.abs(),
                "layer {l} param {idx}: analytic {analytic} numeric {numeric}"
            );
        }
    }
}

/// Training lowers the reconstruction loss of structured data.
#[test]
fn training_reduces_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let data: Vec<SensoryData> = (0..40)
        .map(|i| {
            let a = i as f64 / 40.0;
            let values = (0..12).map(|t| (a * 3.0 + t as f64 * 0.3).sin()).collect();
            SensoryData::new(2, 6, values).unwrap()
        })
        .collect();
    let refs: Vec<&SensoryData> = data.iter().collect();
    let mut enc = Encoder::new(2, 6, 16, 2, &mut rng);
    let params = ruda::encoder::TrainParams { epochs: 200, batch_size: 8, learning_rate: 1e-2 };
    let report = enc.train(&refs, params, &mut rng).unwrap();
    assert!(!report.aborted);
    let first = report.epoch_losses[0];
    let last = *report.epoch_losses.last().unwrap();
    assert!(last < 0.2 * first, "loss {first} -> {last}");
}
