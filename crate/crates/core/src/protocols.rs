//! Constraint sets, key maps and key-rate formulas for the worked protocols.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::bias::{m_factor, modify_error};
use crate::decoy::{gllp_phase_error, gllp_with_coin, DecoyEstimates};
use crate::error::{Error, Result};
use crate::linalg::{c64, entropy_h_d, h2, pauli, CVector, DensityMatrix, HermitianOperator, KeyMap};
use crate::modes::{error_operator, lg_key_map, mpub_bias_angle, CorrelationConvention};
use crate::optimizer::{minimize, Constraint, OptimizerOptions, SolveStatus};

/// Sifting factor of an efficient (biased-basis) BB84 implementation.
pub const Q_EFFICIENT: f64 = 1.0;
/// Sifting factor of twin-field QKD.
pub const Q_TWIN_FIELD: f64 = 0.5;
/// Number of reference-phase slices in the twin-field model.
pub const TF_PHASE_SLICES: u32 = 16;
/// Tolerance on `P ≤ 2` before the RFI statistic is flagged.
pub const P_STATISTIC_TOL: f64 = 1e-9;

fn check_error_rate(e: f64) -> Result<()> {
    if (0.0..=0.5).contains(&e) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("error rate {e} outside [0, 1/2]")))
    }
}

/// `(I − σ ⊗ σ)/2`.
fn qubit_error_operator(sigma: &HermitianOperator) -> HermitianOperator {
    HermitianOperator::identity(4).sub(&sigma.kron(sigma)).scaled(0.5)
}

/// `cos θ_b σ_X + sin θ_b σ_Z`.
pub fn rotated_pauli(theta_b: f64) -> HermitianOperator {
    pauli::x().scaled(theta_b.cos()).add(&pauli::z().scaled(theta_b.sin()))
}

/// Key map `{|0⟩⟨0| ⊗ I, |1⟩⟨1| ⊗ I}`.
pub fn bb84_key_map() -> KeyMap {
    KeyMap::computational(2).extend_to_first_of(2)
}

/// Normalization plus `⟨E_Z⟩ = ⟨E_W⟩ = (1 − M(1 − 2e₁))/2` on two qubits,
/// with `W` the X basis tilted by `θ_b` towards Z.
pub fn bb84_flaw_constraints(theta_b: f64, e1_upper: f64) -> Result<Vec<Constraint>> {
    check_error_rate(e1_upper)?;
    if !theta_b.is_finite() {
        return Err(Error::InvalidParameter(format!("bias angle {theta_b}")));
    }
    let value = modify_error(e1_upper, theta_b);
    Ok(vec![
        Constraint::normalization(4),
        Constraint::new(qubit_error_operator(&pauli::z()), value)?,
        Constraint::new(qubit_error_operator(&rotated_pauli(theta_b)), value)?,
    ])
}

/// Twin-field constraints: the flawed-BB84 set at `θ_b = π/4`.
pub fn tf_constraints(e1_upper: f64) -> Result<Vec<Constraint>> {
    bb84_flaw_constraints(FRAC_PI_4, e1_upper)
}

/// Normalization, `⟨E_key⟩ = e₁` and `⟨E_est⟩ = (1 − M(1 − 2e₁))/2` with
/// `E_key = E_1` (LG) and `E_est = (E_0 + E_2)/2`.
pub fn rfi_mpub_constraints(order: u32, e1_upper: f64) -> Result<Vec<Constraint>> {
    rfi_mpub_constraints_with(
        order,
        e1_upper,
        mpub_bias_angle(order)?,
        CorrelationConvention::default(),
    )
}

pub fn rfi_mpub_constraints_with(
    order: u32,
    e1_upper: f64,
    theta_b: f64,
    convention: CorrelationConvention,
) -> Result<Vec<Constraint>> {
    check_error_rate(e1_upper)?;
    if order == 0 {
        return Err(Error::InvalidParameter("RFI-MPUB needs mode order N >= 1".into()));
    }
    let e: Vec<HermitianOperator> = (0..3)
        .map(|q| error_operator(q, order, convention))
        .collect::<Result<_>>()?;
    let est = e[0].add(&e[2]).scaled(0.5);
    let d = (order as usize + 1).pow(2);
    Ok(vec![
        Constraint::normalization(d),
        Constraint::new(e[1].clone(), e1_upper)?,
        Constraint::new(est, modify_error(e1_upper, theta_b))?,
    ])
}

/// `R = q(−f Q_μ h_d(E_μ) + Q₁ h_zE)`, clamped at zero.
pub fn key_rate(q: f64, f_ec: f64, q_mu: f64, e_mu: f64, q1: f64, h_ze: f64, d: usize) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter(format!("sifting factor {q} outside (0, 1]")));
    }
    if d < 2 {
        return Err(Error::InvalidParameter(format!("dimension {d} < 2")));
    }
    let r = q * (-f_ec * q_mu * entropy_h_d(e_mu, d) + q1 * h_ze);
    Ok(if r.is_finite() { r.max(0.0) } else { 0.0 })
}

/// GLLP key entropy `log₂d − h_d(e_phase)`.
pub fn gllp_entropy(e_phase: f64, d: usize) -> f64 {
    (d as f64).log2() - entropy_h_d(e_phase, d)
}

/// Error rates `e_ij` between Alice's basis `i` and Bob's basis `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMatrix {
    entries: Vec<Vec<f64>>,
}

impl ErrorMatrix {
    /// Entries must lie in `[0, 1]`: frame rotations push cross-basis rates above ½.
    pub fn new(entries: Vec<Vec<f64>>) -> Result<Self> {
        let n = entries.len();
        if n == 0 || entries.iter().any(|r| r.len() != n) {
            return Err(Error::Validation("error matrix must be square and nonempty".into()));
        }
        if entries.iter().flatten().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::Validation("error rates must lie in [0, 1]".into()));
        }
        Ok(Self { entries })
    }

    /// Noiseless qubit RFI statistics for the X/Y bases with Bob's frame rotated by `β`.
    pub fn noiseless_rfi(beta: f64) -> Self {
        let (s, c) = beta.sin_cos();
        Self {
            entries: vec![
                vec![(1.0 - c) / 2.0, (1.0 + s) / 2.0],
                vec![(1.0 - s) / 2.0, (1.0 - c) / 2.0],
            ],
        }
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PStatistic {
    pub value: f64,
    /// Set when `P > 2`, which no physical statistics produce.
    pub flagged: bool,
}

/// `P = Σ_ij (1 − 2e_ij)²`.
pub fn rfi_p_statistic(errs: &ErrorMatrix) -> PStatistic {
    let value: f64 = errs.entries.iter().flatten().map(|e| (1.0 - 2.0 * e).powi(2)).sum();
    PStatistic {
        value,
        flagged: value > 2.0 + P_STATISTIC_TOL,
    }
}

/// Eve's information in qubit RFI QKD from `C² = P` and the key-basis error `e_ZZ`.
///
/// Statistics outside the physical region are clamped onto it.
pub fn rfi_qubit_eve_information(p: f64, e_zz: f64) -> Result<f64> {
    check_error_rate(e_zz)?;
    if !(0.0..=2.0 + P_STATISTIC_TOL).contains(&p) {
        return Err(Error::InvalidParameter(format!("P = {p} outside [0, 2]")));
    }
    let c = p.min(2.0).sqrt();
    let a = 1.0 - e_zz;
    let u = (c / 2f64.sqrt() / a).min(1.0);
    let v = if e_zz > 0.0 {
        ((p / 2.0 - a * a * u * u).max(0.0).sqrt() / e_zz).min(1.0)
    } else {
        0.0
    };
    Ok(a * h2((1.0 + u) / 2.0) + e_zz * h2((1.0 + v) / 2.0))
}

/// Effective detector error after a frame rotation `β` between the parties.
pub fn misaligned_error(e_d: f64, beta: f64) -> f64 {
    let r = (1.0 - beta.cos()) / 2.0;
    e_d + r - 2.0 * e_d * r
}

fn phase_state(phi: f64) -> CVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_vec(vec![c64(s, 0.0), c64(s * phi.cos(), s * phi.sin())])
}

/// Basis-averaged source states of a phase encoder whose modulation
/// overshoots by a fraction `δ/π` of each nominal phase.
pub fn phase_flaw_states(delta: f64) -> Result<(DensityMatrix, DensityMatrix)> {
    if !(0.0..PI).contains(&delta) {
        return Err(Error::InvalidParameter(format!("phase error {delta} outside [0, π)")));
    }
    let scale = 1.0 + delta / PI;
    let avg = |a: f64, b: f64| -> Result<DensityMatrix> {
        let ra = DensityMatrix::pure(&phase_state(a * scale))?;
        let rb = DensityMatrix::pure(&phase_state(b * scale))?;
        DensityMatrix::mixture(&[(0.5, &ra), (0.5, &rb)])
    };
    Ok((avg(0.0, PI)?, avg(PI / 2.0, 3.0 * PI / 2.0)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    FiberDecoy,
    TwinField,
}

/// How `H(Z_A|E)` is obtained from the single-photon error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntropyModel {
    /// Optimizer on the two-qubit flawed-BB84 constraints.
    FlawedQubit { theta_b: f64 },
    /// Optimizer on the `(N+1)²`-dimensional RFI-MPUB constraints.
    Mpub {
        order: u32,
        theta_b: f64,
        convention: CorrelationConvention,
    },
    /// `log₂d − h_d(e₁)`.
    Analytic,
}

/// Quantum-coin model for the GLLP comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GllpModel {
    /// `Δ′ = Δ/Y₁ᴸ`.
    LossEnhanced {
        delta: f64,
    },
    /// `Δ′` independent of the channel.
    Fixed {
        delta_prime: f64,
    },
    Unavailable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEstimate {
    pub h: f64,
    pub status: Option<SolveStatus>,
}

/// Immutable description of one protocol variant.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSpec {
    pub name: String,
    /// Per-party dimension `d`.
    pub dim: usize,
    pub q_factor: f64,
    pub channel_kind: ChannelKind,
    pub entropy: EntropyModel,
    pub gllp: GllpModel,
}

impl ProtocolSpec {
    /// Flawed BB84 with phase-modulation error `δ`: `θ_b = 2δ`, coin imbalance
    /// from the fidelity of the basis-averaged source states.
    pub fn bb84_flaw(delta: f64) -> Result<Self> {
        let (rz, rx) = phase_flaw_states(delta)?;
        let delta_fid = crate::decoy::fidelity_imbalance(&rz, &rx)?;
        Ok(Self::bb84_flaw_with(2.0 * delta, delta_fid))
    }

    pub fn bb84_flaw_with(theta_b: f64, delta_fid: f64) -> Self {
        Self {
            name: "bb84-flaw".into(),
            dim: 2,
            q_factor: Q_EFFICIENT,
            channel_kind: ChannelKind::FiberDecoy,
            entropy: EntropyModel::FlawedQubit { theta_b },
            gllp: GllpModel::LossEnhanced { delta: delta_fid },
        }
    }

    pub fn tf_star() -> Self {
        Self {
            name: "tf-star".into(),
            dim: 2,
            q_factor: Q_TWIN_FIELD,
            channel_kind: ChannelKind::TwinField,
            entropy: EntropyModel::FlawedQubit { theta_b: FRAC_PI_4 },
            gllp: GllpModel::Fixed { delta_prime: FRAC_PI_4 },
        }
    }

    pub fn rfi_mpub(order: u32) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidParameter("RFI-MPUB needs mode order N >= 1".into()));
        }
        Ok(Self {
            name: "rfi-mpub".into(),
            dim: order as usize + 1,
            q_factor: Q_EFFICIENT,
            channel_kind: ChannelKind::FiberDecoy,
            entropy: EntropyModel::Mpub {
                order,
                theta_b: mpub_bias_angle(order)?,
                convention: CorrelationConvention::default(),
            },
            gllp: GllpModel::Unavailable,
        })
    }

    /// Ideal BB84 with two mutually unbiased bases in dimension `d`.
    pub fn bb84_ideal(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter(format!("dimension {dim} < 2")));
        }
        Ok(Self {
            name: "bb84-ideal".into(),
            dim,
            q_factor: Q_EFFICIENT,
            channel_kind: ChannelKind::FiberDecoy,
            entropy: EntropyModel::Analytic,
            gllp: GllpModel::LossEnhanced { delta: 0.0 },
        })
    }

    /// BB84 whose reference frames are rotated; the rotation enters through
    /// the channel's detector error, see [`misaligned_error`].
    pub fn bb84_misaligned(dim: usize) -> Result<Self> {
        let mut s = Self::bb84_ideal(dim)?;
        s.name = "bb84-misaligned".into();
        s.gllp = GllpModel::Unavailable;
        Ok(s)
    }

    pub fn supports_gllp(&self) -> bool {
        self.gllp != GllpModel::Unavailable
    }

    /// Constraint set, key map and joint dimension for the optimizer, or
    /// `None` for analytic entropy models.
    pub fn optimization_problem(&self, e1_upper: f64) -> Result<Option<(Vec<Constraint>, KeyMap, usize)>> {
        match self.entropy {
            EntropyModel::FlawedQubit { theta_b } => {
                Ok(Some((bb84_flaw_constraints(theta_b, e1_upper)?, bb84_key_map(), 4)))
            }
            EntropyModel::Mpub {
                order,
                theta_b,
                convention,
            } => {
                let d = (order as usize + 1).pow(2);
                Ok(Some((
                    rfi_mpub_constraints_with(order, e1_upper, theta_b, convention)?,
                    lg_key_map(order)?,
                    d,
                )))
            }
            EntropyModel::Analytic => Ok(None),
        }
    }

    /// Lower bound on `H(Z_A|E)` for single photons with error at most `e₁`.
    pub fn key_entropy(&self, e1_upper: f64, options: &OptimizerOptions) -> Result<EntropyEstimate> {
        check_error_rate(e1_upper)?;
        match self.optimization_problem(e1_upper)? {
            Some((cons, km, d)) => {
                let r = minimize(&cons, &km, d, options)?;
                Ok(EntropyEstimate {
                    h: r.h_lower.max(0.0),
                    status: Some(r.status),
                })
            }
            None => Ok(EntropyEstimate {
                h: gllp_entropy(e1_upper, self.dim),
                status: None,
            }),
        }
    }

    /// `log₂d − h_d(e_phase)` with the GLLP phase-error bound.
    pub fn gllp_key_entropy(&self, est: &DecoyEstimates) -> Result<f64> {
        let bound = match self.gllp {
            GllpModel::LossEnhanced { delta } => gllp_phase_error(est.e1_upper, delta, est.y1_lower)?,
            GllpModel::Fixed { delta_prime } => gllp_with_coin(est.e1_upper, delta_prime),
            GllpModel::Unavailable => {
                return Err(Error::Validation(format!(
                    "GLLP analysis is not available for {}",
                    self.name
                )))
            }
        };
        Ok(gllp_entropy(bound.e_phase, self.dim))
    }

    /// Multiplicative correction applied to measured error rates.
    pub fn m_factor(&self) -> f64 {
        match self.entropy {
            EntropyModel::FlawedQubit { theta_b } | EntropyModel::Mpub { theta_b, .. } => m_factor(theta_b),
            EntropyModel::Analytic => 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoy::fidelity_imbalance;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bb84_flaw_constraint_examples() {
        let c = bb84_flaw_constraints(0.0, 0.0).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c[1].value, 0.0);
        assert_eq!(c[2].value, 0.0);
        let x = qubit_error_operator(&pauli::x());
        assert!((c[2].observable.matrix() - x.matrix()).norm() < 1e-15);

        let tb = 2.0 * 0.127;
        let c = bb84_flaw_constraints(tb, 0.02).unwrap();
        let m = 1.0 / (1.0 + tb.sin().powi(2)).sqrt();
        assert_abs_diff_eq!(c[1].value, (1.0 - m * 0.96) / 2.0, epsilon = 1e-15);

        let c = bb84_flaw_constraints(std::f64::consts::FRAC_PI_2, 0.1).unwrap();
        assert!((c[1].observable.matrix() - c[2].observable.matrix()).norm() < 1e-15);
        assert!(bb84_flaw_constraints(0.0, 0.6).is_err());
    }

    #[test]
    fn tf_constraint_examples() {
        let c = tf_constraints(0.0).unwrap();
        assert_abs_diff_eq!(c[1].value, (1.0 - 1.0 / 1.5f64.sqrt()) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c[1].value, 0.0918, epsilon = 1e-4);
        assert_abs_diff_eq!(tf_constraints(0.5).unwrap()[2].value, 0.5, epsilon = 1e-15);
        assert!(tf_constraints(0.01).unwrap()[0]
            .observable
            .as_scalar_multiple_of_identity(0.0)
            .is_some());
    }

    #[test]
    fn rfi_constraint_examples() {
        let c = rfi_mpub_constraints(3, 0.0).unwrap();
        assert_eq!(c[0].dim(), 16);
        assert_eq!(c[1].value, 0.0);
        assert_abs_diff_eq!(c[2].value, 0.0149, epsilon = 1e-4);
        let c = rfi_mpub_constraints(3, 0.5).unwrap();
        assert_abs_diff_eq!(c[1].value, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c[2].value, 0.5, epsilon = 1e-15);
        assert_eq!(rfi_mpub_constraints(1, 0.1).unwrap()[0].dim(), 4);
        assert!(rfi_mpub_constraints(0, 0.1).is_err());
    }

    #[test]
    fn key_rate_examples() {
        assert_abs_diff_eq!(
            key_rate(1.0, 1.2, 0.1, 0.0, 0.05, 1.0, 2).unwrap(),
            0.05,
            epsilon = 1e-15
        );
        assert_eq!(key_rate(1.0, 1.2, 0.1, 0.05, 0.05, 0.0, 2).unwrap(), 0.0);
        assert!(key_rate(0.0, 1.2, 0.1, 0.05, 0.05, 1.0, 2).is_err());
        assert_abs_diff_eq!(gllp_entropy(0.11, 2), 1.0 - h2(0.11), epsilon = 1e-15);
    }

    #[test]
    fn p_statistic_examples() {
        let half = ErrorMatrix::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(rfi_p_statistic(&half).value, 0.0);
        for k in 0..=6 {
            let beta = (15.0 * k as f64).to_radians();
            let p = rfi_p_statistic(&ErrorMatrix::noiseless_rfi(beta));
            assert_abs_diff_eq!(p.value, 2.0, epsilon = 1e-12);
            assert!(!p.flagged);
        }
        let bad = ErrorMatrix::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(rfi_p_statistic(&bad).flagged);
        assert!(ErrorMatrix::new(vec![vec![0.0, 1.5], vec![0.0, 0.0]]).is_err());
        assert!(ErrorMatrix::new(vec![vec![0.0], vec![0.0]]).is_err());
    }

    #[test]
    fn qubit_rfi_information() {
        assert_abs_diff_eq!(rfi_qubit_eve_information(2.0, 0.0).unwrap(), 0.0, epsilon = 1e-12);
        // depolarized statistics reduce to the BB84 value h(e)
        for e in [0.01f64, 0.05, 0.1] {
            let p = 2.0 * (1.0 - 2.0 * e).powi(2);
            let ie = rfi_qubit_eve_information(p, e).unwrap();
            let a = 1.0 - e;
            let u = (1.0 - 2.0 * e) / a;
            assert_abs_diff_eq!(ie, a * h2((1.0 + u) / 2.0) + e, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(rfi_qubit_eve_information(0.0, 0.5).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn misalignment_error() {
        assert_eq!(misaligned_error(0.015, 0.0), 0.015);
        assert_abs_diff_eq!(
            misaligned_error(0.0, FRAC_PI_4),
            (1.0 - FRAC_PI_4.cos()) / 2.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(misaligned_error(0.5, 1.0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn phase_flaw_source() {
        let (rz, rx) = phase_flaw_states(0.0).unwrap();
        assert_abs_diff_eq!(fidelity_imbalance(&rz, &rx).unwrap(), 0.0, epsilon = 1e-12);
        let (rz, rx) = phase_flaw_states(0.127).unwrap();
        let d = fidelity_imbalance(&rz, &rx).unwrap();
        assert!(d > 5e-4 && d < 2e-3, "{d}");
        assert!(phase_flaw_states(-0.1).is_err());
    }

    #[test]
    fn presets() {
        let s = ProtocolSpec::bb84_flaw(0.127).unwrap();
        assert_eq!(s.entropy, EntropyModel::FlawedQubit { theta_b: 0.254 });
        assert!(ProtocolSpec::rfi_mpub(3).unwrap().dim == 4 && !ProtocolSpec::rfi_mpub(3).unwrap().supports_gllp());
        assert_eq!(ProtocolSpec::tf_star().q_factor, 0.5);
        let ideal = ProtocolSpec::bb84_ideal(4).unwrap();
        let h = ideal.key_entropy(0.0, &OptimizerOptions::default()).unwrap();
        assert_eq!(h.h, 2.0);
        assert!(h.status.is_none());
    }

    #[test]
    fn zero_bias_flawed_entropy_matches_binary_entropy() {
        let s = ProtocolSpec::bb84_flaw(0.0).unwrap();
        let h = s.key_entropy(0.03, &OptimizerOptions::default()).unwrap();
        assert_abs_diff_eq!(h.h, 1.0 - h2(0.03), epsilon = 1e-5);
    }
}
