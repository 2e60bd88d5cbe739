use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::DEFAULT_NMI_BINS;
use crate::f0::{FuserKind, FuserParams};
use crate::features::{F0SearchRange, FeatureConfig};
use crate::ground_truth::GroundTruthParams;
use crate::voicing::{VoicingKind, VoicingParams};

/// Every tunable of the toolkit. Missing JSON fields take their defaults;
/// unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub features: FeatureConfig,
    pub voicing_kind: VoicingKind,
    pub voicing: VoicingParams,
    pub fuser_kind: FuserKind,
    pub fuser: FuserParams,
    pub ground_truth: GroundTruthParams,
    pub nmi_bins: usize,
    /// Cap every speaker's training frames at the smallest speaker's count.
    pub balance_speakers: bool,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            voicing_kind: VoicingKind::Mlp,
            voicing: VoicingParams::default(),
            fuser_kind: FuserKind::Median,
            fuser: FuserParams::default(),
            ground_truth: GroundTruthParams::default(),
            nmi_bins: DEFAULT_NMI_BINS,
            balance_speakers: true,
            seed: 0,
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn range(&self) -> F0SearchRange {
        self.features.range
    }

    /// Replaces the F0 search range, keeping whichever bound is `None`.
    pub fn with_range(mut self, f0_min: Option<f64>, f0_max: Option<f64>) -> Result<Self> {
        let r = self.features.range;
        self.features.range =
            F0SearchRange::new(f0_min.unwrap_or(r.f0_min), f0_max.unwrap_or(r.f0_max))?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.features.range;
        F0SearchRange::new(r.f0_min, r.f0_max)?;
        if self.features.n_harmonics == 0 {
            return Err(Error::InvalidConfig("n_harmonics must be positive".into()));
        }
        if let Some(n) = self.features.harmonic_fft_size {
            if !n.is_power_of_two() {
                return Err(Error::InvalidConfig(format!(
                    "harmonic_fft_size {n} is not a power of two"
                )));
            }
        }
        self.voicing.validate()?;
        self.fuser.validate()?;
        self.ground_truth.validate()?;
        if self.nmi_bins < 2 {
            return Err(Error::InvalidConfig(format!(
                "nmi_bins must be at least 2, got {}",
                self.nmi_bins
            )));
        }
        Ok(())
    }
}
