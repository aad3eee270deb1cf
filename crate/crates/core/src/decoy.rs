//! Channel models, vacuum+weak decoy bounds and the GLLP quantum-coin phase error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{fidelity, DensityMatrix};

/// Error rate assigned to background clicks.
pub const BACKGROUND_ERROR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Background (dark) count probability per pulse.
    pub y0: f64,
    /// Fiber attenuation in dB/km.
    pub alpha_db_per_km: f64,
    /// Intrinsic detector / optical error probability.
    pub e_d: f64,
    /// Detection efficiency on Bob's side.
    pub eta_det: f64,
    /// Error-correction inefficiency `f ≥ 1`.
    pub f_ec: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name}={v} is not a probability")))
            }
        };
        prob("y0", self.y0)?;
        prob("e_d", self.e_d)?;
        prob("eta_det", self.eta_det)?;
        if !(self.alpha_db_per_km > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "attenuation {} dB/km must be positive",
                self.alpha_db_per_km
            )));
        }
        if !(self.f_ec >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "error-correction inefficiency {} must be >= 1",
                self.f_ec
            )));
        }
        Ok(())
    }

    /// Overall transmittance `η_det·10^{−αL/10}`.
    pub fn transmittance(&self, distance_km: f64) -> f64 {
        self.eta_det * 10f64.powf(-self.alpha_db_per_km * distance_km / 10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyIntensities {
    pub mu: f64,
    pub nu: f64,
    #[serde(default)]
    pub omega: f64,
}

impl DecoyIntensities {
    pub fn new(mu: f64, nu: f64) -> Result<Self> {
        let s = Self { mu, nu, omega: 0.0 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega != 0.0 {
            return Err(Error::InvalidParameter(
                "vacuum+weak decoy bounds need a vacuum decoy (omega = 0)".into(),
            ));
        }
        if !(self.mu > self.nu && self.nu > self.omega) {
            return Err(Error::InvalidParameter(format!(
                "intensities must satisfy mu > nu > omega >= 0 (got {}, {}, {})",
                self.mu, self.nu, self.omega
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainQber {
    pub gain: f64,
    pub qber: f64,
}

/// Gain and QBER of a phase-randomized weak coherent source of the given intensity.
pub fn simulate_gain_qber(ch: &ChannelParams, intensity: f64, distance_km: f64) -> Result<GainQber> {
    if !(distance_km >= 0.0) {
        return Err(Error::InvalidParameter(format!("distance {distance_km} km")));
    }
    let eta = ch.transmittance(distance_km);
    let signal = -(-eta * intensity).exp_m1();
    let gain = ch.y0 + signal;
    if gain <= 0.0 {
        return Ok(GainQber { gain: 0.0, qber: 0.5 });
    }
    let errors = BACKGROUND_ERROR * ch.y0 + ch.e_d * signal;
    Ok(GainQber {
        gain,
        qber: errors / gain,
    })
}

/// Decoy-state estimates at one channel setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyEstimates {
    pub q_mu: f64,
    pub e_mu: f64,
    /// Weak-decoy statistics, absent for infinite-decoy models.
    pub decoy: Option<GainQber>,
    pub y1_lower: f64,
    pub e1_upper: f64,
    pub q1: f64,
    /// False when `Q_ν e^ν ≥ Q_μ e^μ`, which no Poissonian source produces.
    pub gains_consistent: bool,
}

/// Vacuum+weak decoy lower bound on `Y₁` and upper bound on `e₁`.
///
/// Returns [`Error::NoYield`] when the yield bound is not positive.
pub fn vacuum_weak_bounds(signal: GainQber, decoy: GainQber, y0: f64, mu: f64, nu: f64) -> Result<DecoyEstimates> {
    if !(nu < mu && nu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < nu < mu (got nu={nu}, mu={mu})"
        )));
    }
    let qmu_e = signal.gain * mu.exp();
    let qnu_e = decoy.gain * nu.exp();
    let y1 = mu / (mu * nu - nu * nu) * (qnu_e - qmu_e * nu * nu / (mu * mu) - (mu * mu - nu * nu) / (mu * mu) * y0);
    if !(y1 > 0.0) {
        return Err(Error::NoYield { y1_lower: y1 });
    }
    let y1 = y1.min(1.0);
    let e1 = ((decoy.qber * qnu_e - BACKGROUND_ERROR * y0) / (y1 * nu)).clamp(0.0, 0.5);
    Ok(DecoyEstimates {
        q_mu: signal.gain,
        e_mu: signal.qber,
        decoy: Some(decoy),
        y1_lower: y1,
        e1_upper: e1,
        q1: y1 * mu * (-mu).exp(),
        gains_consistent: qnu_e < qmu_e,
    })
}

/// Exact single-photon yield and error of the fiber model, for checking the bounds.
pub fn true_single_photon(ch: &ChannelParams, distance_km: f64) -> (f64, f64) {
    let eta = ch.transmittance(distance_km);
    let y1 = eta + ch.y0 - eta * ch.y0;
    let e1 = (BACKGROUND_ERROR * ch.y0 + ch.e_d * eta) / y1;
    (y1, e1)
}

/// Quantum-coin imbalance `Δ = (1 − F(ρ_z, ρ_x))/2`.
pub fn fidelity_imbalance(rho_z: &DensityMatrix, rho_x: &DensityMatrix) -> Result<f64> {
    Ok(imbalance_from_fidelity(fidelity(rho_z, rho_x)?))
}

pub fn imbalance_from_fidelity(f: f64) -> f64 {
    (0.5 * (1.0 - f)).clamp(0.0, 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GllpBound {
    pub delta_prime: f64,
    pub e_phase: f64,
    /// `e₁ + 4Δ′ + 4√(Δ′e₁)`.
    pub e_phase_relaxed: f64,
}

/// Phase-error bound with the loss-enhanced coin `Δ′ = min(Δ/Y₁ᴸ, ½)`.
pub fn gllp_phase_error(e1_upper: f64, delta_fid: f64, y1_lower: f64) -> Result<GllpBound> {
    if !(y1_lower > 0.0) {
        return Err(Error::NoYield { y1_lower });
    }
    Ok(gllp_with_coin(e1_upper, delta_fid / y1_lower))
}

/// Phase-error bound for a given coin imbalance `Δ′` (clamped to `[0, ½]`).
pub fn gllp_with_coin(e1_upper: f64, delta_prime: f64) -> GllpBound {
    let d = delta_prime.clamp(0.0, 0.5);
    let e = e1_upper.clamp(0.0, 0.5);
    let e_phase =
        e + 4.0 * d * (1.0 - d) * (1.0 - 2.0 * e) + 4.0 * (1.0 - 2.0 * d) * (d * (1.0 - d) * e * (1.0 - e)).sqrt();
    let relaxed = e + 4.0 * d + 4.0 * (d * e).sqrt();
    GllpBound {
        delta_prime: d,
        e_phase: e_phase.min(0.5),
        e_phase_relaxed: relaxed.min(0.5),
    }
}

/// Intrinsic error from discretizing the reference phase into `slices` bins:
/// the average of `sin²(φ/2)` over a bin of width `2π/M`.
pub fn phase_slice_error(slices: u32) -> f64 {
    let m = slices as f64;
    0.5 * (1.0 - m / std::f64::consts::PI * (std::f64::consts::PI / m).sin())
}

fn combine_flips(a: f64, b: f64) -> f64 {
    a + b - 2.0 * a * b
}

/// Twin-field gain and QBER for symmetric arms of length `L/2` each.
///
/// `ch.y0` is read as the per-detector dark count probability.
pub fn tf_gain_qber(ch: &ChannelParams, mu_a: f64, mu_b: f64, distance_km: f64, phase_slices: u32) -> Result<GainQber> {
    if (mu_a - mu_b).abs() > 1e-15 {
        return Err(Error::InvalidParameter(
            "twin-field model assumes equal intensities on both arms".into(),
        ));
    }
    if phase_slices < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 phase slices, got {phase_slices}"
        )));
    }
    if !(distance_km >= 0.0) {
        return Err(Error::InvalidParameter(format!("distance {distance_km} km")));
    }
    let eta_arm = ch.transmittance(distance_km / 2.0);
    let mu_tot = (mu_a + mu_b) * eta_arm;
    let p_d = ch.y0;
    let no_signal = (-mu_tot).exp();
    let gain = 1.0 - (1.0 - 2.0 * p_d) * no_signal;
    if gain <= 0.0 {
        return Ok(GainQber { gain: 0.0, qber: 0.5 });
    }
    let signal = -(-mu_tot).exp_m1();
    let dark = gain - signal;
    let e_opt = combine_flips(phase_slice_error(phase_slices), ch.e_d);
    let qber = ((e_opt * signal + BACKGROUND_ERROR * dark) / gain).clamp(0.0, 0.5);
    Ok(GainQber { gain, qber })
}

/// Infinite-decoy single-photon yield and error of the twin-field model.
pub fn tf_single_photon(ch: &ChannelParams, distance_km: f64, phase_slices: u32) -> (f64, f64) {
    let eta_arm = ch.transmittance(distance_km / 2.0);
    let p_d = ch.y0;
    let y1 = 1.0 - (1.0 - eta_arm) * (1.0 - 2.0 * p_d);
    let dark = y1 - eta_arm;
    let e_opt = combine_flips(phase_slice_error(phase_slices), ch.e_d);
    let e1 = ((e_opt * eta_arm + BACKGROUND_ERROR * dark) / y1).clamp(0.0, 0.5);
    (y1, e1)
}

/// Source of decoy estimates as a function of distance.
pub trait ChannelModel: Send + Sync {
    fn params(&self) -> &ChannelParams;

    /// Signal gain and QBER.
    fn signal(&self, distance_km: f64) -> Result<GainQber>;

    fn estimate(&self, distance_km: f64) -> Result<DecoyEstimates>;
}

/// Fiber link with weak coherent pulses and vacuum+weak decoys.
#[derive(Debug, Clone, Copy)]
pub struct FiberDecoy {
    pub channel: ChannelParams,
    pub intensities: DecoyIntensities,
}

impl ChannelModel for FiberDecoy {
    fn params(&self) -> &ChannelParams {
        &self.channel
    }

    fn signal(&self, distance_km: f64) -> Result<GainQber> {
        simulate_gain_qber(&self.channel, self.intensities.mu, distance_km)
    }

    fn estimate(&self, distance_km: f64) -> Result<DecoyEstimates> {
        let i = self.intensities;
        let signal = simulate_gain_qber(&self.channel, i.mu, distance_km)?;
        let decoy = simulate_gain_qber(&self.channel, i.nu, distance_km)?;
        vacuum_weak_bounds(signal, decoy, self.channel.y0, i.mu, i.nu)
    }
}

/// Twin-field link with single-photon statistics from an infinite decoy set.
#[derive(Debug, Clone, Copy)]
pub struct TwinField {
    pub channel: ChannelParams,
    /// Intensity per arm.
    pub mu: f64,
    pub phase_slices: u32,
}

impl ChannelModel for TwinField {
    fn params(&self) -> &ChannelParams {
        &self.channel
    }

    fn signal(&self, distance_km: f64) -> Result<GainQber> {
        tf_gain_qber(&self.channel, self.mu, self.mu, distance_km, self.phase_slices)
    }

    fn estimate(&self, distance_km: f64) -> Result<DecoyEstimates> {
        let s = tf_gain_qber(&self.channel, self.mu, self.mu, distance_km, self.phase_slices)?;
        let (y1, e1) = tf_single_photon(&self.channel, distance_km, self.phase_slices);
        if !(y1 > 0.0) {
            return Err(Error::NoYield { y1_lower: y1 });
        }
        let total = 2.0 * self.mu;
        Ok(DecoyEstimates {
            q_mu: s.gain,
            e_mu: s.qber,
            decoy: None,
            y1_lower: y1,
            e1_upper: e1,
            q1: y1 * total * (-total).exp(),
            gains_consistent: true,
        })
    }
}
