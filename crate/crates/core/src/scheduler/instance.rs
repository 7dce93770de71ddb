//! Self-contained scheduling instances, as read by the oracle front-end and
//! golden tests.
//!
//! ```json
//! {
//!   "devices": [{"id": 0, "gain_sq": 1e-7, "power_W": 2.0, "cpu_hz": 2e9,
//!                "cycles_per_bit": 20.0, "dataset_size": 500, "index": 0.4}],
//!   "params": {"bandwidth_hz": 1e6, "noise_psd": 1e-13, "model_size_bits": 1e5},
//!   "config": {"lambda_E": 0.25, "lambda_T": 0.25, "lambda_I": 0.5, "rho": 0.5, "N": 1}
//! }
//! ```

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Candidate, SchedulerConfig};
use crate::diversity::{diversity_index, DeviceMetrics, MetricWeights};
use crate::error::{Error, Result};
use crate::radio::{channel_gain, sample_rayleigh_power, training_time, DeviceRadioState, DeviceRanges, RadioParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDevice {
    pub id: usize,
    pub gain_sq: f64,
    #[serde(rename = "power_W")]
    pub power_w: f64,
    pub cpu_hz: f64,
    pub cycles_per_bit: f64,
    pub dataset_size: usize,
    pub index: f64,
}

fn default_epochs() -> usize {
    1
}

fn default_bits_per_sample() -> f64 {
    6272.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceParams {
    pub bandwidth_hz: f64,
    pub noise_psd: f64,
    pub model_size_bits: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_bits_per_sample")]
    pub bits_per_sample: f64,
}

fn default_tolerance() -> f64 {
    1e-6
}

fn default_gap_threshold() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    #[serde(rename = "lambda_E")]
    pub lambda_e: f64,
    #[serde(rename = "lambda_T")]
    pub lambda_t: f64,
    #[serde(rename = "lambda_I")]
    pub lambda_i: f64,
    pub rho: f64,
    #[serde(rename = "N")]
    pub min_devices: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_devices: Option<usize>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Largest accepted relative gap between DAS and the oracle.
    #[serde(default = "default_gap_threshold")]
    pub gap_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub devices: Vec<InstanceDevice>,
    pub params: InstanceParams,
    pub config: InstanceConfig,
}

impl Instance {
    pub fn from_json(text: &str) -> Result<Self> {
        let instance: Self = serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("instance: {e}")))?;
        instance.radio_params().validate()?;
        instance.scheduler_config().validate()?;
        Ok(instance)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn radio_params(&self) -> RadioParams {
        RadioParams {
            bandwidth_hz: self.params.bandwidth_hz,
            noise_psd: self.params.noise_psd,
            model_size_bits: self.params.model_size_bits,
            ..RadioParams::default()
        }
    }

    pub fn scheduler_config(&self) -> SchedulerConfig {
        SchedulerConfig {
            lambda_e: self.config.lambda_e,
            lambda_t: self.config.lambda_t,
            lambda_i: self.config.lambda_i,
            rho: self.config.rho,
            min_devices: self.config.min_devices,
            max_devices: self.config.max_devices,
            tolerance: self.config.tolerance,
        }
    }

    pub fn candidates(&self) -> Vec<Candidate> {
        self.devices
            .iter()
            .map(|d| {
                let state = DeviceRadioState {
                    position: (0.0, 0.0),
                    distance: 1.0,
                    channel_gain_sq: d.gain_sq,
                    transmit_power: d.power_w,
                    cpu_hz: d.cpu_hz,
                    cycles_per_bit: d.cycles_per_bit,
                    bits_per_sample: self.params.bits_per_sample,
                };
                Candidate {
                    id: d.id,
                    state,
                    train_time: training_time(self.params.epochs, d.dataset_size, &state),
                    index: d.index,
                }
            })
            .collect()
    }

    /// A random instance drawn from the default cell: uniform placement in a
    /// 500 m square, Rayleigh fading, device capabilities from the default
    /// ranges and diversity indices from random shard-like datasets.
    pub fn random(num_devices: usize, min_devices: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let radio = RadioParams::default();
        let half = radio.cell_side / 2.0;
        let mut metrics = Vec::with_capacity(num_devices);
        let mut raw = Vec::with_capacity(num_devices);
        for _ in 0..num_devices {
            let distance = loop {
                let x: f64 = rng.random_range(-half..half);
                let y: f64 = rng.random_range(-half..half);
                let d = x.hypot(y);
                if d >= 1.0 {
                    break d;
                }
            };
            let fading = sample_rayleigh_power(&mut rng);
            let gain_sq = channel_gain(distance, radio.pathloss_exponent, fading).expect("positive distance");
            let (power_w, cpu_hz, cycles_per_bit) = DeviceRanges::default().sample(&mut rng);
            let shards: usize = rng.random_range(1..=30);
            let dataset_size = shards * 45;
            let diversity = if shards == 1 { 0.0 } else { rng.random_range(0.0..0.9) };
            let age = rng.random_range(0..10u64);
            metrics.push(DeviceMetrics { dataset_diversity: diversity, dataset_size, age });
            raw.push((gain_sq, power_w, cpu_hz, cycles_per_bit, dataset_size));
        }
        let reports = diversity_index(&metrics, &MetricWeights::default()).expect("valid metrics");
        let devices = raw
            .into_iter()
            .zip(reports)
            .enumerate()
            .map(|(id, ((gain_sq, power_w, cpu_hz, cycles_per_bit, dataset_size), report))| InstanceDevice {
                id,
                gain_sq,
                power_w,
                cpu_hz,
                cycles_per_bit,
                dataset_size,
                index: report.index,
            })
            .collect();
        let config = SchedulerConfig { min_devices, ..SchedulerConfig::default() };
        Instance {
            devices,
            params: InstanceParams {
                bandwidth_hz: radio.bandwidth_hz,
                noise_psd: radio.noise_psd,
                model_size_bits: radio.model_size_bits,
                epochs: default_epochs(),
                bits_per_sample: default_bits_per_sample(),
            },
            config: InstanceConfig {
                lambda_e: config.lambda_e,
                lambda_t: config.lambda_t,
                lambda_i: config.lambda_i,
                rho: config.rho,
                min_devices,
                max_devices: None,
                tolerance: config.tolerance,
                gap_threshold: default_gap_threshold(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_is_exact() {
        let instance = Instance::random(6, 2, 11);
        let back = Instance::from_json(&instance.to_json()).unwrap();
        assert_eq!(back, instance);
    }

    #[test]
    fn uses_documented_key_names() {
        let json = Instance::random(1, 1, 0).to_json();
        for key in ["gain_sq", "power_W", "cpu_hz", "cycles_per_bit", "dataset_size", "lambda_E", "lambda_T", "lambda_I", "\"N\""] {
            assert!(json.contains(key), "missing {key}");
        }
    }

    #[test]
    fn rejects_unknown_fields_and_bad_config() {
        let mut instance = Instance::random(2, 1, 0);
        instance.config.rho = 2.0;
        assert!(Instance::from_json(&instance.to_json()).is_err());
        assert!(Instance::from_json(r#"{"devices": [], "params": {}, "config": {}}"#).is_err());
    }
}
