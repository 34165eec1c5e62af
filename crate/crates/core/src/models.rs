//! Assembly and training of the two estimator variants.
//!
//! Variant A predicts the next sample of a stationary trace from a sliding
//! window of 10 and trains for 200 epochs; variant B predicts the next
//! location's value from the previous 2 location means and trains for 300
//! epochs. Both share the 2x10-neuron hidden stack with Leaky ReLU and a
//! single linear output.
//!
//! Training is online and strictly sequential: one optimizer step per pair,
//! pairs visited in temporal order, never shuffled. Identical configuration
//! and data reproduce identical weights and losses bit for bit.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{make_windows, temporal_split, temporal_split_at, RssiTrace, SplitDataset};
use crate::error::{Error, Result};
use crate::eval::Metrics;
use crate::linalg::Vector;
use crate::nn::{mse_loss, Activation, LayerSpec, Network};
use crate::optim::{nadam_step, NadamHyper, NadamState};

/// Estimator variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Sliding-window next-sample estimator: window 10, 200 epochs.
    A,
    /// Next-location estimator: window 2, 300 epochs.
    B,
}

impl Variant {
    pub fn default_window(self) -> usize {
        match self {
            Variant::A => 10,
            Variant::B => 2,
        }
    }

    pub fn default_epochs(self) -> usize {
        match self {
            Variant::A => 200,
            Variant::B => 300,
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::A => write!(f, "a"),
            Variant::B => write!(f, "b"),
        }
    }
}

/// Full training configuration. `window` and `epochs` are locked to the
/// variant defaults unless `allow_override` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub window: usize,
    /// Neurons per hidden layer (two hidden layers).
    pub hidden: usize,
    pub epochs: usize,
    pub hyper: NadamHyper,
    pub seed: u64,
    pub normalize: bool,
    /// Escape hatch: permit window/epochs values that differ from the
    /// variant defaults.
    #[serde(default)]
    pub allow_override: bool,
}

impl ModelConfig {
    /// Canonical defaults for a variant: z-score normalization on, default
    /// optimizer hyperparameters, 10 neurons per hidden layer.
    pub fn for_variant(variant: Variant, seed: u64) -> Self {
        Self {
            variant,
            window: variant.default_window(),
            hidden: 10,
            epochs: variant.default_epochs(),
            hyper: NadamHyper::default(),
            seed,
            normalize: true,
            allow_override: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if self.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        if self.hidden == 0 {
            return Err(Error::Config("hidden width must be at least 1".into()));
        }
        if !self.allow_override {
            if self.window != self.variant.default_window() {
                return Err(Error::Config(format!(
                    "variant {} fixes the window at {}; pass the override flag to use {}",
                    self.variant,
                    self.variant.default_window(),
                    self.window
                )));
            }
            if self.epochs != self.variant.default_epochs() {
                return Err(Error::Config(format!(
                    "variant {} fixes the epoch count at {}; pass the override flag to use {}",
                    self.variant,
                    self.variant.default_epochs(),
                    self.epochs
                )));
            }
        }
        Ok(())
    }

    /// Layer stack: window -> hidden -> hidden -> 1, Leaky ReLU on the hidden
    /// layers and a linear output.
    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        vec![
            LayerSpec::new(self.window, self.hidden, Activation::LeakyRelu),
            LayerSpec::new(self.hidden, self.hidden, Activation::LeakyRelu),
            LayerSpec::new(self.hidden, 1, Activation::Identity),
        ]
    }
}

/// Per-epoch training record. Losses are reported in dBm^2 (de-normalized
/// when a normalizer is active).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epoch_train_mse: Vec<f64>,
    pub train_seconds: f64,
    pub final_test_mse: Option<f64>,
    pub final_test_rmse: Option<f64>,
}

/// Builds the seeded initial network for a configuration.
pub fn build_model(cfg: &ModelConfig) -> Result<Network> {
    cfg.validate()?;
    Network::init_weights(&cfg.layer_specs(), cfg.seed)
}

/// Trains a network on the split's training pairs.
///
/// Per epoch every pair is visited in temporal order; each pair runs
/// forward, MSE loss, backward, and one optimizer step. Exactly
/// `cfg.epochs` epochs run. When the split carries a normalizer, the
/// network sees z-scored values and the recorded losses are scaled back to
/// dBm^2.
pub fn train(cfg: &ModelConfig, split: &SplitDataset) -> Result<(Network, TrainingHistory)> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    if split.train.window() != cfg.window {
        return Err(Error::Data(format!(
            "dataset windows are {} wide but the configuration expects {}",
            split.train.window(),
            cfg.window
        )));
    }
    if cfg.normalize != split.normalizer.is_some() {
        return Err(Error::Config(if cfg.normalize {
            "normalization is enabled but the dataset carries no fitted normalizer".into()
        } else {
            "normalization is disabled but the dataset carries a fitted normalizer".to_string()
        }));
    }

    let mut net = build_model(cfg)?;
    let mut state = NadamState::for_network(&net);
    // Squared errors on the z-scored scale map back to dBm^2 via std^2.
    let denorm_sq = split.normalizer.map(|n| n.std * n.std).unwrap_or(1.0);

    let start = Instant::now();
    let mut epoch_train_mse = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut sq_sum = 0.0;
        for (pair_idx, pair) in split.train.pairs().iter().enumerate() {
            let (input, target) = match &split.normalizer {
                Some(norm) => (norm.apply_vector(&pair.input), norm.apply(pair.target)),
                None => (pair.input.clone(), pair.target),
            };
            let (output, trace) = net.forward(&input)?;
            let (loss, loss_grad) = mse_loss(&output, &Vector::new(vec![target]))?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "training diverged: loss is not finite at epoch {epoch}, pair {pair_idx}"
                )));
            }
            let grads = net.backward(&trace, &loss_grad)?;
            nadam_step(&mut net, &grads, &mut state, &cfg.hyper)?;
            sq_sum += loss;
        }
        epoch_train_mse.push(sq_sum / split.train.len() as f64 * denorm_sq);
    }
    let train_seconds = start.elapsed().as_secs_f64();

    let (final_test_mse, final_test_rmse) = if split.test.is_empty() {
        (None, None)
    } else {
        let metrics = evaluate(&net, split)?;
        (Some(metrics.mse), Some(metrics.rmse))
    };

    Ok((
        net,
        TrainingHistory {
            epoch_train_mse,
            train_seconds,
            final_test_mse,
            final_test_rmse,
        },
    ))
}

/// Predicts every test pair and reports MSE/RMSE in original dBm units,
/// de-normalizing predictions when the split carries a normalizer.
pub fn evaluate(net: &Network, split: &SplitDataset) -> Result<Metrics> {
    if split.test.is_empty() {
        return Err(Error::Data("evaluation set is empty".into()));
    }
    if net.input_dim() != split.test.window() {
        return Err(Error::Shape(format!(
            "network expects {} inputs but dataset windows are {} wide",
            net.input_dim(),
            split.test.window()
        )));
    }

    let start = Instant::now();
    let mut sq_sum = 0.0;
    for pair in split.test.pairs() {
        let input = match &split.normalizer {
            Some(norm) => norm.apply_vector(&pair.input),
            None => pair.input.clone(),
        };
        let (output, _) = net.forward(&input)?;
        let pred = match &split.normalizer {
            Some(norm) => norm.invert(output[0]),
            None => output[0],
        };
        let d = pred - pair.target;
        sq_sum += d * d;
    }
    let test_seconds = start.elapsed().as_secs_f64();
    let mse = sq_sum / split.test.len() as f64;
    Ok(Metrics {
        mse,
        rmse: mse.sqrt(),
        n_pairs: split.test.len(),
        train_seconds: 0.0,
        test_seconds,
    })
}

/// Windows a stationary trace and splits it temporally, optionally fitting a
/// normalizer on the training partition.
pub fn stationary_split(
    trace: &RssiTrace,
    window: usize,
    train_fraction: f64,
    normalize: bool,
) -> Result<SplitDataset> {
    let ds = make_windows(trace, window)?;
    let split = temporal_split(&ds, train_fraction)?;
    if normalize {
        split.with_normalizer()
    } else {
        Ok(split)
    }
}

/// Splits a per-location trace for the next-location estimator: with `n`
/// locations and window 2 there are `n - 2` pairs; the last pair (targeting
/// the final location) is held out, the two before it test, and the rest
/// train.
pub fn sweep_split(trace: &RssiTrace, normalize: bool) -> Result<SplitDataset> {
    let ds = make_windows(trace, 2)?;
    if ds.len() < 4 {
        return Err(Error::Data(format!(
            "a location sweep needs at least 6 locations, got {}",
            trace.len()
        )));
    }
    let n_train = ds.len() - 3;
    let split = temporal_split_at(&ds, n_train, Some(2))?;
    if normalize {
        split.with_normalizer()
    } else {
        Ok(split)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{RssiTrace, TraceMeta};
    use crate::linalg::Matrix;

    fn trace(samples: &[f64]) -> RssiTrace {
        RssiTrace::new(samples.to_vec(), TraceMeta::default()).unwrap()
    }

    #[test]
    fn build_model_parameter_counts() {
        let a = build_model(&ModelConfig::for_variant(Variant::A, 1)).unwrap();
        assert_eq!(a.param_count(), 231);
        assert_eq!(a.input_dim(), 10);

        let b = build_model(&ModelConfig::for_variant(Variant::B, 1)).unwrap();
        assert_eq!(b.param_count(), 151);
        assert_eq!(b.input_dim(), 2);
    }

    #[test]
    fn build_model_is_deterministic_per_config() {
        let cfg = ModelConfig::for_variant(Variant::A, 99);
        assert_eq!(build_model(&cfg).unwrap(), build_model(&cfg).unwrap());
    }

    #[test]
    fn config_locks_window_and_epochs_without_override() {
        let mut cfg = ModelConfig::for_variant(Variant::A, 0);
        cfg.window = 5;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));

        cfg.allow_override = true;
        assert!(cfg.validate().is_ok());

        let mut cfg = ModelConfig::for_variant(Variant::B, 0);
        cfg.epochs = 10;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn constant_series_trains_to_negligible_error() {
        let series = vec![-50.0; 60];
        for variant in [Variant::A, Variant::B] {
            let cfg = ModelConfig::for_variant(variant, 3);
            let split = stationary_split(&trace(&series), cfg.window, 1.0, true).unwrap();
            let (_, history) = train(&cfg, &split).unwrap();
            let final_mse = *history.epoch_train_mse.last().unwrap();
            assert!(
                final_mse <= 1e-3,
                "variant {variant} final train MSE {final_mse}"
            );
            assert_eq!(history.epoch_train_mse.len(), cfg.epochs);
        }
    }

    #[test]
    fn zero_epochs_returns_the_initialized_network() {
        let mut cfg = ModelConfig::for_variant(Variant::A, 17);
        cfg.epochs = 0;
        cfg.allow_override = true;
        let series: Vec<f64> = (0..40).map(|i| -55.0 + (i as f64 * 0.2).sin()).collect();
        let split = stationary_split(&trace(&series), cfg.window, 1.0, true).unwrap();
        let (net, history) = train(&cfg, &split).unwrap();
        assert_eq!(net, build_model(&cfg).unwrap());
        assert!(history.epoch_train_mse.is_empty());
    }

    #[test]
    fn training_reduces_loss_on_a_correlated_trace() {
        let params = crate::chansim::ChannelParams::los(11);
        let rssi = crate::chansim::simulate_stationary_trace(&params, 3.0, 800).unwrap();
        let mut cfg = ModelConfig::for_variant(Variant::A, 5);
        cfg.epochs = 20;
        cfg.allow_override = true;
        let split = stationary_split(&rssi, cfg.window, 0.8, true).unwrap();
        let (_, history) = train(&cfg, &split).unwrap();
        let first = history.epoch_train_mse[0];
        let last = *history.epoch_train_mse.last().unwrap();
        assert!(last < first, "no progress: first {first}, last {last}");
        assert!(history.final_test_mse.is_some());
    }

    #[test]
    fn training_is_bitwise_reproducible() {
        let params = crate::chansim::ChannelParams::los(2);
        let rssi = crate::chansim::simulate_stationary_trace(&params, 3.0, 300).unwrap();
        let mut cfg = ModelConfig::for_variant(Variant::A, 7);
        cfg.epochs = 5;
        cfg.allow_override = true;
        let split = stationary_split(&rssi, cfg.window, 0.8, true).unwrap();

        let (net_a, hist_a) = train(&cfg, &split).unwrap();
        let (net_b, hist_b) = train(&cfg, &split).unwrap();
        assert_eq!(net_a, net_b);
        assert_eq!(hist_a.epoch_train_mse, hist_b.epoch_train_mse);
        assert_eq!(hist_a.final_test_mse, hist_b.final_test_mse);
    }

    #[test]
    fn train_rejects_an_empty_training_partition() {
        let ds = make_windows(&trace(&[-50.0; 20]), 10).unwrap();
        let split = SplitDataset {
            train: make_windows(&trace(&[-50.0; 5]), 10).unwrap(),
            test: ds,
            normalizer: None,
        };
        let mut cfg = ModelConfig::for_variant(Variant::A, 1);
        cfg.normalize = false;
        assert!(matches!(train(&cfg, &split), Err(Error::Data(_))));
    }

    #[test]
    fn train_reports_divergence_with_epoch_and_pair() {
        // Overflowing inputs push the forward pass to infinity; the loss is
        // no longer finite and training must stop with a located error.
        let huge = f64::MAX / 2.0;
        let ds = make_windows(&trace(&[huge; 16]), 10).unwrap();
        let split = SplitDataset {
            train: ds.clone(),
            test: ds,
            normalizer: None,
        };
        let mut cfg = ModelConfig::for_variant(Variant::A, 1);
        cfg.normalize = false;
        let err = train(&cfg, &split).unwrap_err();
        match err {
            Error::Numeric(msg) => {
                assert!(msg.contains("epoch 0"), "{msg}");
                assert!(msg.contains("pair"), "{msg}");
            }
            other => panic!("expected a numeric error, got {other}"),
        }
    }

    #[test]
    fn train_rejects_window_mismatch_and_missing_normalizer() {
        let series: Vec<f64> = (0..50).map(|i| -50.0 - (i % 5) as f64).collect();
        let cfg = ModelConfig::for_variant(Variant::A, 1);

        let wrong_window = stationary_split(&trace(&series), 5, 0.8, true).unwrap();
        assert!(matches!(train(&cfg, &wrong_window), Err(Error::Data(_))));

        let unnormalized = stationary_split(&trace(&series), 10, 0.8, false).unwrap();
        assert!(matches!(train(&cfg, &unnormalized), Err(Error::Config(_))));
    }

    #[test]
    fn evaluate_constant_predictor_matches_hand_expansion() {
        // A 1-input network that always outputs 1, targets {0, 2}: MSE 1, RMSE 1.
        let net = Network::from_layers(vec![crate::nn::Layer {
            spec: LayerSpec::new(1, 1, Activation::Identity),
            weights: Matrix::from_rows(1, 1, vec![0.0]).unwrap(),
            bias: Vector::from_slice(&[1.0]),
        }])
        .unwrap();
        let ds = make_windows(&trace(&[5.0, 0.0, 2.0]), 1).unwrap();
        let split = temporal_split_at(&ds, 2, None).unwrap();
        // rebuild with both pairs as test
        let split = SplitDataset {
            train: split.train.clone(),
            test: make_windows(&trace(&[5.0, 0.0, 2.0]), 1).unwrap(),
            normalizer: None,
        };
        let metrics = evaluate(&net, &split).unwrap();
        assert_eq!(metrics.mse, 1.0);
        assert_eq!(metrics.rmse, 1.0);
        assert_eq!(metrics.n_pairs, 2);
    }

    #[test]
    fn evaluate_perfect_predictor_scores_zero() {
        // Constant series + normalization: z-scored inputs and targets are all
        // zero, and a freshly initialized network (zero biases) emits zero.
        let cfg = ModelConfig::for_variant(Variant::A, 23);
        let split = stationary_split(&trace(&[-61.5; 40]), cfg.window, 0.5, true).unwrap();
        let net = build_model(&cfg).unwrap();
        let metrics = evaluate(&net, &split).unwrap();
        assert_eq!(metrics.mse, 0.0);
        assert_eq!(metrics.rmse, 0.0);
    }

    #[test]
    fn evaluate_rejects_empty_test_and_wrong_width() {
        let cfg = ModelConfig::for_variant(Variant::A, 1);
        let net = build_model(&cfg).unwrap();

        let all_train = stationary_split(&trace(&[-50.0; 30]), 10, 1.0, false).unwrap();
        assert!(matches!(evaluate(&net, &all_train), Err(Error::Data(_))));

        let narrow = stationary_split(&trace(&[-50.0; 30]), 4, 0.8, false).unwrap();
        assert!(matches!(evaluate(&net, &narrow), Err(Error::Shape(_))));
    }

    #[test]
    fn sweep_split_holds_out_the_final_location() {
        // 11 location means -> 9 pairs -> 6 train / 2 test / 1 held out.
        let means: Vec<f64> = (0..11).map(|i| -60.0 - i as f64).collect();
        let split = sweep_split(&trace(&means), false).unwrap();
        assert_eq!(split.train.len(), 6);
        assert_eq!(split.test.len(), 2);
        // test pairs target the 9th and 10th locations
        assert_eq!(split.test.pairs()[0].target, means[8]);
        assert_eq!(split.test.pairs()[1].target, means[9]);
    }
}
