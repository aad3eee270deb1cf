//! Run configuration and named presets.
//!
//! A configuration file is TOML with one table per concern:
//!
//! ```toml
//! protocol = "bb84-flaw"
//! method = "both"
//! seed = 7
//!
//! [channel]
//! y0 = 1.7e-6
//! alpha_db_per_km = 0.21
//! e_d = 0.033
//! eta_det = 0.045
//! f_ec = 1.22
//!
//! [intensities]
//! mu = 0.48
//! nu = 0.13
//!
//! [bias]
//! delta = 0.127
//!
//! [grid]
//! start = 0.0
//! stop = 150.0
//! step = 5.0
//! ```
//!
//! The `bias`, `optimizer` and `output` tables and the `method` and `seed`
//! keys are optional.

use serde::{Deserialize, Serialize};

use crate::decoy::{ChannelModel, ChannelParams, DecoyIntensities, FiberDecoy, TwinField};
use crate::error::{Error, Result};
use crate::optimizer::OptimizerOptions;
use crate::protocols::{misaligned_error, ProtocolSpec, TF_PHASE_SLICES};
use crate::scan::Method;

pub const PRESETS: [&str; 5] = ["bb84-flaw", "tf-star", "rfi-mpub", "bb84-ideal", "bb84-misaligned"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intensities {
    /// Signal intensity (per arm for twin-field).
    pub mu: f64,
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default)]
    pub omega: f64,
    #[serde(default)]
    pub phase_slices: Option<u32>,
}

/// Source-flaw inputs. Which fields apply depends on the protocol.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasInputs {
    /// Phase-modulation error `δ` (bb84-flaw).
    pub delta: Option<f64>,
    /// Explicit basis bias angle in radians, overriding the derived one.
    pub theta_b: Option<f64>,
    /// Fidelity of the basis-averaged source states, overriding the modelled one.
    pub fidelity: Option<f64>,
    /// Mode order `N` (rfi-mpub).
    pub order: Option<u32>,
    /// Per-party dimension (bb84-ideal, bb84-misaligned).
    pub dim: Option<usize>,
    /// Frame rotation in degrees (bb84-misaligned).
    pub misalignment_deg: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl DistanceGrid {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        let g = Self { start, stop, step };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start >= 0.0 && self.stop >= self.start && self.step > 0.0 && self.stop.is_finite()) {
            return Err(Error::Validation(format!(
                "distance grid {}:{}:{} must satisfy 0 <= start <= stop and step > 0",
                self.start, self.stop, self.step
            )));
        }
        Ok(())
    }

    /// `start, start+step, …` up to and including `stop` (within rounding).
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }

    /// Parses `start:stop:step`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let err = |m: String| Error::Parse {
            what: "distances".into(),
            message: m,
        };
        if parts.len() != 3 {
            return Err(err(format!("expected start:stop:step, got `{s}`")));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|e| err(format!("`{p}`: {e}"))))
            .collect::<Result<_>>()?;
        Self::new(nums[0], nums[1], nums[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub max_iter: usize,
    pub tol: f64,
    pub gap_tol: f64,
    pub floor: f64,
    pub restarts: usize,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let o = OptimizerOptions::default();
        Self {
            max_iter: o.max_iter,
            tol: o.tol,
            gap_tol: o.gap_tol,
            floor: o.floor,
            restarts: o.restarts,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<String>,
}

fn default_seed() -> u64 {
    7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub protocol: String,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub channel: ChannelParams,
    pub intensities: Intensities,
    #[serde(default)]
    pub bias: BiasInputs,
    pub grid: DistanceGrid,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Fiber link of the flawed-source study.
pub fn fiber_flaw_defaults() -> (ChannelParams, Intensities) {
    (
        ChannelParams {
            y0: 1.7e-6,
            alpha_db_per_km: 0.21,
            e_d: 0.033,
            eta_det: 0.045,
            f_ec: 1.22,
        },
        Intensities {
            mu: 0.48,
            nu: Some(0.13),
            omega: 0.0,
            phase_slices: None,
        },
    )
}

/// Free-space-like link of the spatial-mode study.
pub fn fiber_mode_defaults() -> (ChannelParams, Intensities) {
    (
        ChannelParams {
            y0: 3e-6,
            alpha_db_per_km: 0.6,
            e_d: 0.015,
            eta_det: 0.5,
            f_ec: 1.22,
        },
        Intensities {
            mu: 0.3,
            nu: Some(0.05),
            omega: 0.0,
            phase_slices: None,
        },
    )
}

/// Twin-field link; `y0` is the per-detector dark count probability.
pub fn twin_field_defaults() -> (ChannelParams, Intensities) {
    (
        ChannelParams {
            y0: 1e-11,
            alpha_db_per_km: 0.2,
            e_d: 0.0,
            eta_det: 0.8,
            f_ec: 1.1,
        },
        Intensities {
            mu: 0.0012,
            nu: None,
            omega: 0.0,
            phase_slices: Some(TF_PHASE_SLICES),
        },
    )
}

impl RunConfig {
    /// Published parameter set for a named preset. `dim` selects the bb84-ideal /
    /// bb84-misaligned parameter set: the flawed-source link for qubits, the spatial-mode link otherwise.
    pub fn preset(name: &str) -> Result<Self> {
        let (channel, intensities, bias, grid, method) = match name {
            "bb84-flaw" => {
                let (c, i) = fiber_flaw_defaults();
                let b = BiasInputs {
                    delta: Some(0.127),
                    ..Default::default()
                };
                (c, i, b, DistanceGrid::new(0.0, 150.0, 5.0)?, Method::Both)
            }
            "tf-star" => {
                let (c, i) = twin_field_defaults();
                (
                    c,
                    i,
                    BiasInputs::default(),
                    DistanceGrid::new(0.0, 500.0, 25.0)?,
                    Method::Both,
                )
            }
            "rfi-mpub" => {
                let (c, i) = fiber_mode_defaults();
                let b = BiasInputs {
                    order: Some(3),
                    ..Default::default()
                };
                (c, i, b, DistanceGrid::new(0.0, 80.0, 5.0)?, Method::OurMethod)
            }
            "bb84-ideal" => {
                let (c, i) = fiber_flaw_defaults();
                let b = BiasInputs {
                    dim: Some(2),
                    ..Default::default()
                };
                (c, i, b, DistanceGrid::new(0.0, 150.0, 5.0)?, Method::OurMethod)
            }
            "bb84-misaligned" => {
                let (c, i) = fiber_mode_defaults();
                let b = BiasInputs {
                    dim: Some(4),
                    misalignment_deg: Some(45.0),
                    ..Default::default()
                };
                (c, i, b, DistanceGrid::new(0.0, 80.0, 5.0)?, Method::OurMethod)
            }
            other => {
                return Err(Error::Validation(format!(
                    "unknown protocol `{other}` (available: {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(Self {
            protocol: name.to_string(),
            method,
            seed: default_seed(),
            channel,
            intensities,
            bias,
            grid,
            optimizer: OptimizerSection::default(),
            output: OutputSection::default(),
        })
    }

    /// Switches bb84-ideal / bb84-misaligned to dimension `dim`, including the
    /// matching parameter set.
    pub fn with_dim(mut self, dim: usize) -> Self {
        let (c, i) = if dim == 2 {
            fiber_flaw_defaults()
        } else {
            fiber_mode_defaults()
        };
        self.channel = c;
        self.intensities = i;
        self.bias.dim = Some(dim);
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            what: "config".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse {
            what: "config".into(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.grid.validate()?;
        let spec = self.protocol_spec()?;
        self.channel_model()?;
        if self.method != Method::OurMethod && !spec.supports_gllp() {
            return Err(Error::Validation(format!(
                "method `{}` is not available for {}",
                self.method, self.protocol
            )));
        }
        if self.optimizer.max_iter == 0 || !(self.optimizer.tol > 0.0) || !(self.optimizer.floor > 0.0) {
            return Err(Error::Validation("optimizer settings must be positive".into()));
        }
        Ok(())
    }

    pub fn protocol_spec(&self) -> Result<ProtocolSpec> {
        let b = &self.bias;
        match self.protocol.as_str() {
            "bb84-flaw" => {
                let delta = b.delta.unwrap_or(0.0);
                let mut spec = ProtocolSpec::bb84_flaw(delta)?;
                if let Some(tb) = b.theta_b {
                    spec.entropy = crate::protocols::EntropyModel::FlawedQubit { theta_b: tb };
                }
                if let Some(f) = b.fidelity {
                    if !(0.0..=1.0).contains(&f) {
                        return Err(Error::Validation(format!("fidelity {f} outside [0, 1]")));
                    }
                    spec.gllp = crate::protocols::GllpModel::LossEnhanced {
                        delta: crate::decoy::imbalance_from_fidelity(f),
                    };
                }
                Ok(spec)
            }
            "tf-star" => Ok(ProtocolSpec::tf_star()),
            "rfi-mpub" => {
                let mut spec = ProtocolSpec::rfi_mpub(b.order.unwrap_or(3))?;
                if let (Some(tb), crate::protocols::EntropyModel::Mpub { theta_b, .. }) = (b.theta_b, &mut spec.entropy)
                {
                    *theta_b = tb;
                }
                Ok(spec)
            }
            "bb84-ideal" => ProtocolSpec::bb84_ideal(b.dim.unwrap_or(2)),
            "bb84-misaligned" => ProtocolSpec::bb84_misaligned(b.dim.unwrap_or(4)),
            other => Err(Error::Validation(format!(
                "unknown protocol `{other}` (available: {})",
                PRESETS.join(", ")
            ))),
        }
    }

    pub fn channel_model(&self) -> Result<Box<dyn ChannelModel>> {
        let spec_kind = self.protocol_spec()?.channel_kind;
        let i = self.intensities;
        let mut channel = self.channel;
        if self.protocol == "bb84-misaligned" {
            let beta = self.bias.misalignment_deg.unwrap_or(45.0).to_radians();
            channel.e_d = misaligned_error(channel.e_d, beta);
        }
        match spec_kind {
            crate::protocols::ChannelKind::FiberDecoy => {
                let nu =
                    i.nu.ok_or_else(|| Error::Validation("intensities.nu is required".into()))?;
                let intensities = DecoyIntensities {
                    mu: i.mu,
                    nu,
                    omega: i.omega,
                };
                intensities.validate()?;
                Ok(Box::new(FiberDecoy { channel, intensities }))
            }
            crate::protocols::ChannelKind::TwinField => {
                if !(i.mu > 0.0) {
                    return Err(Error::Validation(format!("intensity {} must be positive", i.mu)));
                }
                let slices = i.phase_slices.unwrap_or(TF_PHASE_SLICES);
                if slices < 2 {
                    return Err(Error::Validation("phase_slices must be >= 2".into()));
                }
                Ok(Box::new(TwinField {
                    channel,
                    mu: i.mu,
                    phase_slices: slices,
                }))
            }
        }
    }

    pub fn optimizer_options(&self) -> OptimizerOptions {
        let o = &self.optimizer;
        OptimizerOptions {
            max_iter: o.max_iter,
            tol: o.tol,
            gap_tol: o.gap_tol,
            floor: o.floor,
            restarts: o.restarts,
            seed: self.seed,
        }
    }
}
