//! Flat TOML run configuration. Keys mirror the fields of `MtrboConfig`,
//! `ExploitParams` and `InnerOptimizer`; unset keys keep their current values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::acquisition::AcquisitionKind;
use crate::optimizer::MtrboConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub budget: Option<usize>,
    pub n0: Option<usize>,
    pub acquisition: Option<AcquisitionKind>,
    pub beta: Option<f64>,
    pub seed: Option<u64>,
    pub length_scale: Option<f64>,
    pub gamma_inc: Option<f64>,
    pub gamma_dec: Option<f64>,
    pub eta_inc: Option<f64>,
    pub delta: Option<f64>,
    pub subiters: Option<usize>,
    pub r0: Option<f64>,
    pub starts: Option<usize>,
    pub max_steps: Option<usize>,
    pub max_halvings: Option<usize>,
    pub fd_step: Option<f64>,
    pub trials: Option<usize>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Overwrites the fields of `cfg` that this file sets.
    pub fn apply(&self, cfg: &mut MtrboConfig) {
        macro_rules! set {
            ($($src:ident => $($dst:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$src { cfg.$($dst).+ = v; })*
            };
        }
        set!(
            budget => budget,
            n0 => n0,
            acquisition => acquisition,
            beta => beta,
            seed => seed,
            gamma_inc => exploit.gamma_inc,
            gamma_dec => exploit.gamma_dec,
            eta_inc => exploit.eta_inc,
            delta => exploit.delta,
            subiters => exploit.subiters,
            r0 => exploit.r0,
            starts => inner.starts,
            max_steps => inner.max_steps,
            max_halvings => inner.max_halvings,
            fd_step => inner.fd_step,
        );
        if self.length_scale.is_some() {
            cfg.length_scale = self.length_scale;
        }
    }
}
