//! Uplink transmission model: OFDMA rate, training/upload latency and upload
//! energy.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cell-wide radio parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioParams {
    /// Total OFDMA bandwidth `B` in Hz.
    pub bandwidth_hz: f64,
    /// Noise power spectral density `N0` in W/Hz.
    pub noise_psd: f64,
    pub pathloss_exponent: f64,
    /// Side of the square cell in meters.
    pub cell_side: f64,
    /// Size `s` of one model update in bits.
    pub model_size_bits: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            bandwidth_hz: 1e6,
            noise_psd: 1e-13,
            pathloss_exponent: 3.0,
            cell_side: 500.0,
            model_size_bits: 1e5,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_psd", self.noise_psd),
            ("cell_side", self.cell_side),
            ("model_size_bits", self.model_size_bits),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("radio.{name} must be positive, got {v}")));
            }
        }
        if !(self.pathloss_exponent >= 2.0) {
            return Err(Error::InvalidInput(format!(
                "radio.pathloss_exponent must be >= 2, got {}",
                self.pathloss_exponent
            )));
        }
        Ok(())
    }
}

/// Ranges the per-device transmit power, CPU frequency and cycles per bit
/// are drawn from, uniformly and once per experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceRanges {
    pub power_w: [f64; 2],
    pub cpu_hz: [f64; 2],
    pub cycles_per_bit: [f64; 2],
    /// Bits per training sample `beta`.
    pub bits_per_sample: f64,
}

impl Default for DeviceRanges {
    fn default() -> Self {
        Self { power_w: [1.0, 5.0], cpu_hz: [1e9, 3e9], cycles_per_bit: [10.0, 30.0], bits_per_sample: 6272.0 }
    }
}

impl DeviceRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [("power_w", self.power_w), ("cpu_hz", self.cpu_hz), ("cycles_per_bit", self.cycles_per_bit)] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::InvalidInput(format!("devices.{name} must be a positive [low, high] range, got [{lo}, {hi}]")));
            }
        }
        if !(self.bits_per_sample > 0.0 && self.bits_per_sample.is_finite()) {
            return Err(Error::InvalidInput(format!("devices.bits_per_sample must be positive, got {}", self.bits_per_sample)));
        }
        Ok(())
    }

    /// Draws (power, cpu, cycles) for one device.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64, f64) {
        let power = rng.random_range(self.power_w[0]..=self.power_w[1]);
        let cpu = rng.random_range(self.cpu_hz[0]..=self.cpu_hz[1]);
        let cycles = rng.random_range(self.cycles_per_bit[0]..=self.cycles_per_bit[1]);
        (power, cpu, cycles)
    }
}

/// Per-device radio and compute state for one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceRadioState {
    pub position: (f64, f64),
    pub distance: f64,
    /// `|g_k|^2`, pathloss times small-scale fading power.
    pub channel_gain_sq: f64,
    pub transmit_power: f64,
    pub cpu_hz: f64,
    pub cycles_per_bit: f64,
    pub bits_per_sample: f64,
}

impl DeviceRadioState {
    /// `g P / (B N0)`: the SNR the device would see on the whole band.
    pub fn full_band_snr(&self, params: &RadioParams) -> f64 {
        self.channel_gain_sq * self.transmit_power / (params.bandwidth_hz * params.noise_psd)
    }

    pub fn can_transmit(&self) -> bool {
        self.channel_gain_sq > 0.0 && self.transmit_power > 0.0
    }
}

/// `d^-alpha * |h|^2`.
pub fn channel_gain(distance: f64, pathloss_exponent: f64, fading_power: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::InvalidInput(format!("distance must be positive, got {distance}")));
    }
    if !(fading_power >= 0.0) {
        return Err(Error::InvalidInput(format!("fading power must be non-negative, got {fading_power}")));
    }
    Ok(distance.powf(-pathloss_exponent) * fading_power)
}

/// Unit-mean exponential draw: the power `|h|^2` of a Rayleigh-faded channel.
pub fn sample_rayleigh_power<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Exp1)
}

/// Achievable uplink rate in bits/s on a fraction `alpha` of the band.
pub fn achievable_rate(alpha: f64, params: &RadioParams, state: &DeviceRadioState) -> f64 {
    rate_from_snr(alpha, params.bandwidth_hz, state.full_band_snr(params))
}

/// `alpha B log2(1 + snr / alpha)`; zero at `alpha = 0`.
pub(crate) fn rate_from_snr(alpha: f64, bandwidth_hz: f64, snr: f64) -> f64 {
    if alpha <= 0.0 || snr <= 0.0 {
        return 0.0;
    }
    alpha * bandwidth_hz * (snr / alpha).ln_1p() / std::f64::consts::LN_2
}

/// Derivative of the rate with respect to `alpha`.
pub(crate) fn rate_slope_from_snr(alpha: f64, bandwidth_hz: f64, snr: f64) -> f64 {
    if snr <= 0.0 {
        return 0.0;
    }
    if alpha <= 0.0 {
        return f64::INFINITY;
    }
    let x = snr / alpha;
    bandwidth_hz * (x.ln_1p() - x / (1.0 + x)) / std::f64::consts::LN_2
}

/// Local computation time `E |D| beta C / f`.
pub fn training_time(epochs: usize, dataset_size: usize, state: &DeviceRadioState) -> f64 {
    epochs as f64 * dataset_size as f64 * state.bits_per_sample * state.cycles_per_bit / state.cpu_hz
}

/// `s / r`; infinite when the rate is zero.
pub fn upload_time(model_size_bits: f64, rate: f64) -> Result<f64> {
    if !(model_size_bits > 0.0) {
        return Err(Error::InvalidInput(format!("model size must be positive, got {model_size_bits}")));
    }
    if rate < 0.0 || rate.is_nan() {
        return Err(Error::InvalidInput(format!("rate must be non-negative, got {rate}")));
    }
    if rate == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(model_size_bits / rate)
}

/// `P t_up`.
pub fn upload_energy(transmit_power: f64, upload_time: f64) -> f64 {
    if upload_time == 0.0 {
        return 0.0;
    }
    transmit_power * upload_time
}

/// Synchronous round duration: the slowest selected device.
pub fn round_duration(completion_times: &[f64], selected: &[bool]) -> Result<f64> {
    if completion_times.len() != selected.len() {
        return Err(Error::InvalidInput("completion times and selection differ in length".into()));
    }
    completion_times
        .iter()
        .zip(selected)
        .filter(|(_, &x)| x)
        .map(|(t, _)| *t)
        .reduce(f64::max)
        .ok_or_else(|| Error::InvalidInput("round duration of an empty selection".into()))
}
