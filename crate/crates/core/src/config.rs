//! Flat TOML run configuration.
//!
//! Every key is optional and falls back to the defaults below; unknown keys
//! are rejected.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `sample_rate` | 16000 | rate all audio is resampled to |
//! | `stft_n_fft` | 512 | FFT size for STFT and MFCC |
//! | `frame_ms` / `hop_ms` | 25 / 10 | STFT window and hop |
//! | `window` | `"hann"` | `hann`, `hamming` or `rect` |
//! | `n_mels` / `n_ceps` / `lifter` / `delta_window` | 26 / 13 / 0 / 2 | MFCC |
//! | `f0_floor` / `f0_ceil` / `f0_hop` / `voicing_threshold` | 75 / 500 / 0.005 / 0.3 | F0 search |
//! | `envelope_n_fft` | 1024 | spectral envelope FFT size |
//! | `ap_n_fft` / `ap_n_bands` | 1024 / 5 | band aperiodicity |
//! | `jitter_variant` / `shimmer_variant` | `"local"` | `local`/`rap`, `local`/`apq3` |
//! | `pse_detrend` / `pse_hist_bins` | false / 50 | entropy options |
//! | `hidden1` / `hidden2` / `activation` | 32 / 32 / `"relu"` | MLP shape |
//! | `learning_rate` / `epochs` / `batch_size` / `l2` / `seed` | 0.05 / 200 / 16 / 0 / 0 | training |
//! | `cost_config` | none | path to a t-DCF cost model file |

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio::WindowKind;
use crate::classifier::{Activation, TrainConfig};
use crate::entropy::PseConfig;
use crate::error::{Error, Result};
use crate::f0::F0Config;
use crate::perturbation::{JitterVariant, PerturbationConfig, ShimmerVariant};
use crate::spectral::{AperiodicityConfig, EnvelopeConfig, MfccConfig, StftConfig};

/// Environment variable naming a config file when none is given explicitly.
pub const CONFIG_ENV: &str = "SPOOFSENSE_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sample_rate: u32,
    pub stft_n_fft: usize,
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub window: WindowKind,
    pub n_mels: usize,
    pub n_ceps: usize,
    pub lifter: f64,
    pub delta_window: usize,
    pub f0_floor: f64,
    pub f0_ceil: f64,
    pub f0_hop: f64,
    pub voicing_threshold: f64,
    pub envelope_n_fft: usize,
    pub ap_n_fft: usize,
    pub ap_n_bands: usize,
    pub jitter_variant: JitterVariant,
    pub shimmer_variant: ShimmerVariant,
    pub pse_detrend: bool,
    pub pse_hist_bins: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub activation: Activation,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub seed: u64,
    pub cost_config: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let stft = StftConfig::default();
        let mfcc = MfccConfig::default();
        let f0 = F0Config::default();
        let train = TrainConfig::default();
        Self {
            sample_rate: crate::audio::CANONICAL_RATE,
            stft_n_fft: stft.n_fft,
            frame_ms: stft.win_ms,
            hop_ms: stft.hop_ms,
            window: stft.window,
            n_mels: mfcc.n_mels,
            n_ceps: mfcc.n_ceps,
            lifter: mfcc.lifter,
            delta_window: mfcc.delta_window,
            f0_floor: f0.floor,
            f0_ceil: f0.ceil,
            f0_hop: f0.hop,
            voicing_threshold: f0.voicing_threshold,
            envelope_n_fft: EnvelopeConfig::default().n_fft,
            ap_n_fft: AperiodicityConfig::default().n_fft,
            ap_n_bands: AperiodicityConfig::default().n_bands,
            jitter_variant: JitterVariant::Local,
            shimmer_variant: ShimmerVariant::Local,
            pse_detrend: false,
            pse_hist_bins: 50,
            hidden1: 32,
            hidden2: 32,
            activation: Activation::Relu,
            learning_rate: train.learning_rate,
            epochs: train.epochs,
            batch_size: train.batch_size,
            l2: train.l2,
            seed: train.seed,
            cost_config: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Relative `cost_config` paths are resolved against the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let (Some(cost), Some(dir)) = (&cfg.cost_config, path.parent()) {
            if cost.is_relative() {
                cfg.cost_config = Some(dir.join(cost));
            }
        }
        Ok(cfg)
    }

    /// Explicit path, else the file named by `SPOOFSENSE_CONFIG`, else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(PathBuf::from(p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::InvalidConfig("sample_rate must be positive".into()));
        }
        let stft = self.stft();
        let win = stft.win_samples(self.sample_rate);
        if stft.n_fft < 2 || win == 0 || win > stft.n_fft || stft.hop_samples(self.sample_rate) == 0
        {
            return Err(Error::InvalidConfig(format!(
                "frame of {win} samples must fit in stft_n_fft = {} with a positive hop",
                stft.n_fft
            )));
        }
        if self.n_ceps != 13 {
            return Err(Error::InvalidConfig(
                "n_ceps must be 13 (MFCC features are 39-dimensional)".into(),
            ));
        }
        if self.n_mels < self.n_ceps {
            return Err(Error::InvalidConfig(
                "n_mels must be at least n_ceps".into(),
            ));
        }
        if self.lifter < 0.0 {
            return Err(Error::InvalidConfig("lifter must be nonnegative".into()));
        }
        self.f0().validate()?;
        if self.envelope_n_fft < 4 || self.ap_n_fft < 4 || self.ap_n_bands == 0 {
            return Err(Error::InvalidConfig(
                "envelope/aperiodicity FFT sizes must be >= 4 and ap_n_bands >= 1".into(),
            ));
        }
        if self.hidden1 == 0 || self.hidden2 == 0 {
            return Err(Error::InvalidConfig(
                "hidden layer sizes must be positive".into(),
            ));
        }
        self.train().validate()
    }

    pub fn stft(&self) -> StftConfig {
        StftConfig {
            n_fft: self.stft_n_fft,
            win_ms: self.frame_ms,
            hop_ms: self.hop_ms,
            window: self.window,
        }
    }

    pub fn mfcc(&self) -> MfccConfig {
        MfccConfig {
            stft: self.stft(),
            n_mels: self.n_mels,
            n_ceps: self.n_ceps,
            f_min: 0.0,
            f_max: None,
            lifter: self.lifter,
            delta_window: self.delta_window,
        }
    }

    pub fn f0(&self) -> F0Config {
        F0Config {
            floor: self.f0_floor,
            ceil: self.f0_ceil,
            hop: self.f0_hop,
            voicing_threshold: self.voicing_threshold,
        }
    }

    pub fn envelope(&self) -> EnvelopeConfig {
        EnvelopeConfig {
            n_fft: self.envelope_n_fft,
            ..EnvelopeConfig::default()
        }
    }

    pub fn aperiodicity(&self) -> AperiodicityConfig {
        AperiodicityConfig {
            n_fft: self.ap_n_fft,
            n_bands: self.ap_n_bands,
        }
    }

    pub fn perturbation(&self) -> PerturbationConfig {
        PerturbationConfig {
            f0: self.f0(),
            jitter: self.jitter_variant,
            shimmer: self.shimmer_variant,
        }
    }

    pub fn pse(&self) -> PseConfig {
        PseConfig {
            f0: self.f0(),
            detrend: self.pse_detrend,
            hist_bins: self.pse_hist_bins,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            l2: self.l2,
            seed: self.seed,
        }
    }
}
