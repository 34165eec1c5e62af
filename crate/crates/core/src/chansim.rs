//! Synthetic indoor RSSI generator.
//!
//! Mean levels follow a log-distance path-loss curve; temporal fluctuation is
//! a first-order autoregressive Gaussian process in the dB domain, which is
//! the smallest model that yields correlated traces a sliding-window
//! estimator can actually exploit. Obstructed (NLoS) settings are expressed
//! purely as a higher path-loss exponent and a larger shadowing deviation.
//!
//! Everything is a pure function of `(params, spec)`: the same seed always
//! reproduces the same trace bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Condition, Location, LocationSet, RssiTrace, Scenario, TraceMeta};
use crate::error::{Error, Result};

/// Channel and noise parameters for the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Transmit power in dBm.
    pub tx_power_dbm: f64,
    /// Path loss at the reference distance, in dB.
    pub pl0_dbm: f64,
    /// Reference distance in metres.
    pub d0_m: f64,
    /// Path-loss exponent.
    pub exponent: f64,
    /// Shadowing standard deviation in dB.
    pub shadow_sigma_db: f64,
    /// Temporal correlation of the shadowing process, in [0, 1).
    pub shadow_rho: f64,
    /// RNG seed; identical seeds reproduce identical traces.
    pub seed: u64,
    /// Propagation condition this parameter set models (provenance tag).
    pub condition: Condition,
}

impl ChannelParams {
    /// Line-of-sight preset: free-space-like exponent, light shadowing.
    pub fn los(seed: u64) -> Self {
        Self {
            tx_power_dbm: -20.0,
            pl0_dbm: 40.0,
            d0_m: 1.0,
            exponent: 2.0,
            shadow_sigma_db: 0.3,
            shadow_rho: 0.95,
            seed,
            condition: Condition::Los,
        }
    }

    /// Obstructed preset: steeper decay, heavier shadowing.
    pub fn nlos(seed: u64) -> Self {
        Self {
            exponent: 3.0,
            shadow_sigma_db: 0.7,
            condition: Condition::Nlos,
            ..Self::los(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d0_m.is_nan() || self.d0_m <= 0.0 {
            return Err(Error::Config(format!(
                "reference distance must be positive, got {}",
                self.d0_m
            )));
        }
        if self.exponent.is_nan() || self.exponent <= 0.0 {
            return Err(Error::Config(format!(
                "path-loss exponent must be positive, got {}",
                self.exponent
            )));
        }
        if self.shadow_sigma_db.is_nan() || self.shadow_sigma_db < 0.0 {
            return Err(Error::Config(format!(
                "shadowing deviation must be non-negative, got {}",
                self.shadow_sigma_db
            )));
        }
        if !(0.0..1.0).contains(&self.shadow_rho) {
            return Err(Error::Config(format!(
                "shadowing correlation must lie in [0, 1), got {}",
                self.shadow_rho
            )));
        }
        Ok(())
    }

    /// Mean RSSI at `distance_m`:
    /// `tx_power - (pl0 + 10 * exponent * log10(d / d0))`.
    pub fn mean_rssi_dbm(&self, distance_m: f64) -> f64 {
        self.tx_power_dbm - (self.pl0_dbm + 10.0 * self.exponent * (distance_m / self.d0_m).log10())
    }
}

/// Geometry of a multi-location sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Per-location transmitter-receiver distances in metres.
    pub distances_m: Vec<f64>,
    /// Raw samples captured at each location.
    pub samples_per_location: usize,
}

impl Default for SweepSpec {
    /// 11 locations from 1.0 m to 3.5 m, 250 samples each.
    fn default() -> Self {
        Self {
            distances_m: (0..11).map(|i| 1.0 + 0.25 * i as f64).collect(),
            samples_per_location: 250,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.distances_m.is_empty() {
            return Err(Error::Config("sweep needs at least one location".into()));
        }
        if let Some(d) = self.distances_m.iter().find(|d| d.is_nan() || **d <= 0.0) {
            return Err(Error::Config(format!(
                "sweep distances must be positive, got {d}"
            )));
        }
        if self.samples_per_location == 0 {
            return Err(Error::Config(
                "sweep needs at least one sample per location".into(),
            ));
        }
        Ok(())
    }
}

/// AR(1) shadowing sequence: `s[0] = sigma * xi`, then
/// `s[t] = rho * s[t-1] + sqrt(1 - rho^2) * sigma * xi`, which keeps the
/// marginal variance at `sigma^2` from the first sample on.
fn shadowing_sequence(rng: &mut ChaCha8Rng, n: usize, sigma: f64, rho: f64) -> Vec<f64> {
    let innovation_scale = (1.0 - rho * rho).sqrt() * sigma;
    let mut out = Vec::with_capacity(n);
    let mut prev = 0.0;
    for t in 0..n {
        let xi: f64 = rng.sample(StandardNormal);
        let s = if t == 0 {
            sigma * xi
        } else {
            rho * prev + innovation_scale * xi
        };
        out.push(s);
        prev = s;
    }
    out
}

/// Generates a fixed-geometry trace of `n_samples` values at `distance_m`.
pub fn simulate_stationary_trace(
    params: &ChannelParams,
    distance_m: f64,
    n_samples: usize,
) -> Result<RssiTrace> {
    params.validate()?;
    if distance_m.is_nan() || distance_m <= 0.0 {
        return Err(Error::Config(format!(
            "distance must be positive, got {distance_m}"
        )));
    }
    if n_samples == 0 {
        return Err(Error::Config("trace needs at least one sample".into()));
    }
    let mu = params.mean_rssi_dbm(distance_m);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let samples = shadowing_sequence(
        &mut rng,
        n_samples,
        params.shadow_sigma_db,
        params.shadow_rho,
    )
    .into_iter()
    .map(|s| mu + s)
    .collect();
    RssiTrace::new(
        samples,
        TraceMeta::new(
            Scenario::Stationary,
            params.condition,
            format!("chansim stationary d={distance_m}m seed={}", params.seed),
        ),
    )
}

/// Generates one capture per sweep location: an independent stationary trace
/// at that location's distance plus a per-location shadowing offset drawn
/// once with deviation `shadow_sigma_db`.
pub fn simulate_location_sweep(params: &ChannelParams, spec: &SweepSpec) -> Result<LocationSet> {
    params.validate()?;
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut locations = Vec::with_capacity(spec.distances_m.len());
    for (idx, &distance) in spec.distances_m.iter().enumerate() {
        let mu = params.mean_rssi_dbm(distance);
        let offset_draw: f64 = rng.sample(StandardNormal);
        let offset = params.shadow_sigma_db * offset_draw;
        let samples = shadowing_sequence(
            &mut rng,
            spec.samples_per_location,
            params.shadow_sigma_db,
            params.shadow_rho,
        )
        .into_iter()
        .map(|s| mu + offset + s)
        .collect();
        locations.push(Location {
            label: format!("L{}", idx + 1),
            samples,
        });
    }
    LocationSet::new(locations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DEFAULT_RSSI_COLUMN;
    use crate::data::{load_csv_locations, load_csv_trace, write_csv_locations, write_csv_trace};

    fn sample_variance(values: &[f64]) -> f64 {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
    }

    #[test]
    fn noiseless_trace_sits_exactly_at_the_mean_level() {
        let mut params = ChannelParams::los(7);
        params.shadow_sigma_db = 0.0;
        let trace = simulate_stationary_trace(&params, 3.0, 100).unwrap();
        let mu = params.mean_rssi_dbm(3.0);
        assert!(trace.samples().iter().all(|&s| s == mu));
    }

    #[test]
    fn reference_distance_identity() {
        let params = ChannelParams::los(1);
        assert_eq!(
            params.mean_rssi_dbm(params.d0_m),
            params.tx_power_dbm - params.pl0_dbm
        );
    }

    #[test]
    fn uncorrelated_noise_variance_matches_sigma_squared() {
        let mut params = ChannelParams::los(99);
        params.shadow_rho = 0.0;
        let trace = simulate_stationary_trace(&params, 3.0, 10_000).unwrap();
        let var = sample_variance(trace.samples());
        let sigma2 = params.shadow_sigma_db * params.shadow_sigma_db;
        assert!(
            (var - sigma2).abs() <= 0.1 * sigma2,
            "variance {var} vs sigma^2 {sigma2}"
        );
    }

    #[test]
    fn ar1_long_run_variance_approaches_sigma_squared() {
        let params = ChannelParams::los(4242);
        let trace = simulate_stationary_trace(&params, 3.0, 50_000).unwrap();
        let var = sample_variance(trace.samples());
        let sigma2 = params.shadow_sigma_db * params.shadow_sigma_db;
        assert!(
            (var - sigma2).abs() <= 0.1 * sigma2,
            "variance {var} vs sigma^2 {sigma2}"
        );
    }

    #[test]
    fn identical_params_reproduce_identical_outputs() {
        let params = ChannelParams::nlos(123);
        let a = simulate_stationary_trace(&params, 3.0, 500).unwrap();
        let b = simulate_stationary_trace(&params, 3.0, 500).unwrap();
        assert_eq!(a.samples(), b.samples());

        let spec = SweepSpec::default();
        let sa = simulate_location_sweep(&params, &spec).unwrap();
        let sb = simulate_location_sweep(&params, &spec).unwrap();
        assert_eq!(sa, sb);
    }

    #[test]
    fn mean_rssi_strictly_decreases_with_distance() {
        let mut params = ChannelParams::los(0);
        params.shadow_sigma_db = 0.0;
        let mut previous = f64::INFINITY;
        for d in [1.0, 1.5, 2.0, 3.0, 5.0, 10.0] {
            let mu = params.mean_rssi_dbm(d);
            assert!(mu < previous, "mean at {d}m should drop below {previous}");
            previous = mu;
        }
    }

    #[test]
    fn noiseless_single_location_sweep_repeats_the_mean() {
        let mut params = ChannelParams::los(5);
        params.shadow_sigma_db = 0.0;
        let spec = SweepSpec {
            distances_m: vec![2.0],
            samples_per_location: 250,
        };
        let set = simulate_location_sweep(&params, &spec).unwrap();
        assert_eq!(set.len(), 1);
        let mu = params.mean_rssi_dbm(2.0);
        assert_eq!(set.locations()[0].samples.len(), 250);
        assert!(set.locations()[0].samples.iter().all(|&s| s == mu));
    }

    #[test]
    fn default_sweep_has_eleven_locations_of_250_samples() {
        let params = ChannelParams::los(8);
        let set = simulate_location_sweep(&params, &SweepSpec::default()).unwrap();
        assert_eq!(set.len(), 11);
        assert!(set.locations().iter().all(|l| l.samples.len() == 250));
        assert_eq!(set.locations()[0].label, "L1");
        assert_eq!(set.locations()[10].label, "L11");
    }

    #[test]
    fn noiseless_sweep_means_follow_the_path_loss_curve() {
        let mut params = ChannelParams::los(3);
        params.shadow_sigma_db = 0.0;
        let spec = SweepSpec::default();
        let set = simulate_location_sweep(&params, &spec).unwrap();
        for (location, &d) in set.locations().iter().zip(&spec.distances_m) {
            let mu = params.mean_rssi_dbm(d);
            assert!(location.samples.iter().all(|&s| s == mu));
        }
    }

    #[test]
    fn rejects_non_positive_distance() {
        let params = ChannelParams::los(0);
        assert!(simulate_stationary_trace(&params, 0.0, 10).is_err());
        assert!(simulate_stationary_trace(&params, -1.0, 10).is_err());
    }

    #[test]
    fn csv_round_trip_through_the_data_module() {
        let dir = tempfile::tempdir().unwrap();
        let params = ChannelParams::los(77);

        let trace = simulate_stationary_trace(&params, 3.0, 200).unwrap();
        let trace_path = dir.path().join("trace.csv");
        write_csv_trace(&trace_path, &trace).unwrap();
        let loaded =
            load_csv_trace(&trace_path, DEFAULT_RSSI_COLUMN, TraceMeta::default()).unwrap();
        assert_eq!(loaded.samples(), trace.samples());

        let sweep = simulate_location_sweep(&params, &SweepSpec::default()).unwrap();
        let sweep_path = dir.path().join("sweep.csv");
        write_csv_locations(&sweep_path, &sweep).unwrap();
        let loaded = load_csv_locations(&sweep_path, DEFAULT_RSSI_COLUMN).unwrap();
        assert_eq!(loaded, sweep);
    }
}
