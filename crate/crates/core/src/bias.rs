//! Bias angles between encoding bases and the error-rate correction they induce.
//!
//! A pair of bases that is not mutually unbiased leaks more information into
//! phase-error estimation than the measured error rates alone suggest. The bias
//! angle `θ` quantifies the worst overlap imbalance, `θ_b = 2θ` is the basis
//! bias angle, and `M = 1/√(1 + sin²θ_b)` rescales the visibility `1 − 2e`.

use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, STATE_TOL};

#[derive(Debug, Clone)]
pub enum BasisStates {
    /// Normalized single-photon state vectors.
    SinglePhoton(Vec<CVector>),
    /// Coherent-state amplitudes `α`, one per state.
    Coherent(Vec<Complex64>),
}

#[derive(Debug, Clone)]
pub struct EncodingBasis {
    label: String,
    states: BasisStates,
}

impl EncodingBasis {
    pub fn single_photon(label: impl Into<String>, states: Vec<CVector>) -> Result<Self> {
        let label = label.into();
        if let Some(first) = states.first() {
            let d = first.len();
            for (i, s) in states.iter().enumerate() {
                if s.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: s.len(),
                    });
                }
                let n = s.norm();
                if (n - 1.0).abs() > STATE_TOL {
                    return Err(Error::Validation(format!("state {i} of basis {label} has norm {n}")));
                }
            }
        }
        Ok(Self {
            label,
            states: BasisStates::SinglePhoton(states),
        })
    }

    /// Each row of `rows` is one basis state.
    pub fn from_rows(label: impl Into<String>, rows: &CMatrix) -> Result<Self> {
        let states = (0..rows.nrows()).map(|r| rows.row(r).transpose()).collect();
        Self::single_photon(label, states)
    }

    pub fn coherent(label: impl Into<String>, amplitudes: Vec<Complex64>) -> Self {
        Self {
            label: label.into(),
            states: BasisStates::Coherent(amplitudes),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn states(&self) -> &BasisStates {
        &self.states
    }

    pub fn len(&self) -> usize {
        match &self.states {
            BasisStates::SinglePhoton(v) => v.len(),
            BasisStates::Coherent(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Largest `|w(m,n) − w(m,p)|` over rows `m` and distinct columns `n ≠ p`.
fn max_row_spread(weights: &[Vec<f64>]) -> f64 {
    let mut best = 0.0_f64;
    for row in weights {
        if row.len() < 2 {
            continue;
        }
        let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        best = best.max(hi - lo);
    }
    best
}

fn transpose(w: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let cols = w.first().map_or(0, Vec::len);
    (0..cols).map(|j| w.iter().map(|r| r[j]).collect()).collect()
}

/// Spread in both directions: rows index basis `k`, then basis `l`.
fn symmetric_spread(weights: &[Vec<f64>]) -> f64 {
    max_row_spread(weights).max(max_row_spread(&transpose(weights)))
}

/// Bias angle `θ ∈ [0, π/4]` between two single-photon bases.
///
/// `θ = ½ arcsin(max |⟨φᵐ_k|φⁿ_l⟩|² − |⟨φᵐ_k|φᵖ_l⟩|²)` with the maximum taken
/// over both orderings of the pair, so the angle is symmetric in its arguments.
pub fn bias_angle_single_photon(basis_k: &EncodingBasis, basis_l: &EncodingBasis) -> Result<f64> {
    let (BasisStates::SinglePhoton(ks), BasisStates::SinglePhoton(ls)) = (&basis_k.states, &basis_l.states) else {
        return Err(Error::InvalidParameter(
            "single-photon bias angle needs state-vector bases".into(),
        ));
    };
    if let (Some(a), Some(b)) = (ks.first(), ls.first()) {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                found: b.len(),
            });
        }
    }
    for s in ks.iter().chain(ls) {
        if (s.norm() - 1.0).abs() > STATE_TOL {
            return Err(Error::Validation("unnormalized basis state".into()));
        }
    }
    let weights: Vec<Vec<f64>> = ks
        .iter()
        .map(|k| ls.iter().map(|l| k.dotc(l).norm_sqr()).collect())
        .collect();
    let spread = symmetric_spread(&weights).clamp(0.0, 1.0);
    Ok(0.5 * spread.asin())
}

/// `⟨α|β⟩ = exp(−(|α|² + |β|² − 2α*β)/2)`.
pub fn coherent_overlap(alpha: Complex64, beta: Complex64) -> Complex64 {
    let expo = -(alpha.norm_sqr() + beta.norm_sqr() - 2.0 * alpha.conj() * beta) * 0.5;
    expo.exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentBias {
    pub theta: f64,
    /// Set when an overlap vanished or the raw angle exceeded π/4.
    pub saturated: bool,
}

/// Bias angle between two coherent-state bases:
/// `θ = ½ max ||ln⟨φᵐ_k|φⁿ_l⟩| − |ln⟨φᵐ_k|φᵖ_l⟩||`, using the modulus of the
/// principal-branch logarithm. Clamped to `π/4`.
pub fn bias_angle_coherent(basis_k: &EncodingBasis, basis_l: &EncodingBasis) -> Result<CoherentBias> {
    let (BasisStates::Coherent(ks), BasisStates::Coherent(ls)) = (&basis_k.states, &basis_l.states) else {
        return Err(Error::InvalidParameter(
            "coherent bias angle needs amplitude bases".into(),
        ));
    };
    let mut saturated = false;
    let weights: Vec<Vec<f64>> = ks
        .iter()
        .map(|&a| {
            ls.iter()
                .map(|&b| {
                    let z = coherent_overlap(a, b);
                    if z.norm() == 0.0 {
                        saturated = true;
                        f64::INFINITY
                    } else {
                        z.ln().norm()
                    }
                })
                .collect()
        })
        .collect();
    if saturated {
        return Ok(CoherentBias {
            theta: FRAC_PI_4,
            saturated,
        });
    }
    let theta = 0.5 * symmetric_spread(&weights);
    if theta > FRAC_PI_4 {
        return Ok(CoherentBias {
            theta: FRAC_PI_4,
            saturated: true,
        });
    }
    Ok(CoherentBias { theta, saturated })
}

/// `M = 1/√(1 + sin²θ_b)`.
pub fn m_factor(theta_b: f64) -> f64 {
    1.0 / (1.0 + theta_b.sin().powi(2)).sqrt()
}

/// Modified error rate `(1 − M(1 − 2e_exp))/2`.
pub fn modify_error(e_exp: f64, theta_b: f64) -> f64 {
    let e = e_exp.clamp(0.0, 0.5);
    0.5 * (1.0 - m_factor(theta_b) * (1.0 - 2.0 * e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasModel {
    pub theta: f64,
    pub theta_b: f64,
    pub m_factor: f64,
}

impl BiasModel {
    pub fn from_theta(theta: f64) -> Result<Self> {
        if !(0.0..=FRAC_PI_4 + 1e-15).contains(&theta) {
            return Err(Error::InvalidParameter(format!("bias angle {theta} outside [0, π/4]")));
        }
        Ok(Self {
            theta,
            theta_b: 2.0 * theta,
            m_factor: m_factor(2.0 * theta),
        })
    }

    pub fn from_theta_b(theta_b: f64) -> Result<Self> {
        Self::from_theta(theta_b / 2.0)
    }

    pub fn ideal() -> Self {
        Self {
            theta: 0.0,
            theta_b: 0.0,
            m_factor: 1.0,
        }
    }

    pub fn modify(&self, e_exp: f64) -> f64 {
        modify_error(e_exp, self.theta_b)
    }
}

/// Measured error rate from an ideal QBER and an event-probability factor.
///
/// `n_ij` is not pinned down beyond "related to the probability of an event";
/// it is taken as a caller-supplied factor defaulting to 1, which makes
/// `e_exp` equal the ideal QBER.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStats {
    pub q_ideal: f64,
    pub n_ij: f64,
    pub e_exp: f64,
}

impl ChannelStats {
    pub fn new(q_ideal: f64, n_ij: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&q_ideal) {
            return Err(Error::InvalidParameter(format!(
                "ideal QBER {q_ideal} outside [0, 1/2]"
            )));
        }
        Ok(Self {
            q_ideal,
            n_ij,
            e_exp: 0.5 * (1.0 - n_ij * (1.0 - 2.0 * q_ideal)),
        })
    }

    pub fn from_qber(q_ideal: f64) -> Result<Self> {
        Self::new(q_ideal, 1.0)
    }

    pub fn modified(&self, bias: &BiasModel) -> f64 {
        bias.modify(self.e_exp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_8, PI};

    fn qubit_basis(label: &str, bloch_angle: f64) -> EncodingBasis {
        // states at Bloch polar angles a and a + π in the X–Z plane
        let st = |a: f64| CVector::from_vec(vec![c64((a / 2.0).cos(), 0.0), c64((a / 2.0).sin(), 0.0)]);
        EncodingBasis::single_photon(label, vec![st(bloch_angle), st(bloch_angle + PI)]).unwrap()
    }

    #[test]
    fn mub_pair_has_zero_bias() {
        let z = qubit_basis("Z", 0.0);
        let x = qubit_basis("X", FRAC_PI_2);
        assert_abs_diff_eq!(bias_angle_single_photon(&z, &x).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rotated_basis_gives_pi_over_eight() {
        // Hilbert-space rotation π/8 from X is a Bloch rotation of π/4:
        // overlaps (1 ± cos π/4)/2 differ by cos π/4.
        let z = qubit_basis("Z", 0.0);
        let w = qubit_basis("W", FRAC_PI_2 - 2.0 * FRAC_PI_8);
        let theta = bias_angle_single_photon(&z, &w).unwrap();
        assert_abs_diff_eq!(theta, 0.5 * (FRAC_PI_4.cos()).asin(), epsilon = 1e-12);
        assert_abs_diff_eq!(theta, FRAC_PI_8, epsilon = 1e-12);
    }

    #[test]
    fn identical_bases_saturate() {
        let z = qubit_basis("Z", 0.0);
        assert_abs_diff_eq!(bias_angle_single_photon(&z, &z).unwrap(), FRAC_PI_4, epsilon = 1e-12);
    }

    #[test]
    fn single_photon_errors() {
        let z = qubit_basis("Z", 0.0);
        let three = EncodingBasis::single_photon(
            "T",
            vec![CVector::from_vec(vec![c64(1., 0.), c64(0., 0.), c64(0., 0.)])],
        )
        .unwrap();
        assert!(matches!(
            bias_angle_single_photon(&z, &three),
            Err(Error::DimensionMismatch { .. })
        ));
        let unnorm = EncodingBasis::single_photon("U", vec![CVector::from_vec(vec![c64(1., 0.), c64(1., 0.)])]);
        assert!(unnorm.is_err());
        let coh = EncodingBasis::coherent("C", vec![c64(0.1, 0.0)]);
        assert!(bias_angle_single_photon(&z, &coh).is_err());
    }

    #[test]
    fn coherent_examples() {
        let single = EncodingBasis::coherent("A", vec![c64(0.3, 0.0)]);
        let b = bias_angle_coherent(&single, &single).unwrap();
        assert_eq!(b.theta, 0.0);
        assert!(!b.saturated);

        let mu: f64 = 0.0012;
        let s = mu.sqrt();
        let k = EncodingBasis::coherent("K", vec![c64(s, 0.0), c64(-s, 0.0)]);
        let l = EncodingBasis::coherent("L", vec![c64(0.0, s), c64(0.0, -s)]);
        // ln⟨α|β⟩ = −μ ± iμ for every cross pair, so every modulus equals √2·μ
        let z = coherent_overlap(c64(s, 0.0), c64(0.0, s));
        assert_abs_diff_eq!(z.ln().norm(), 2f64.sqrt() * mu, epsilon = 1e-15);
        let b = bias_angle_coherent(&k, &l).unwrap();
        assert_abs_diff_eq!(b.theta, 0.0, epsilon = 1e-15);

        // k against itself: |ln⟨α|α⟩| = 0 versus |ln⟨α|−α⟩| = 2μ
        let b = bias_angle_coherent(&k, &k).unwrap();
        assert_abs_diff_eq!(b.theta, mu, epsilon = 1e-15);

        let tiny = EncodingBasis::coherent("V", vec![c64(1e-9, 0.0), c64(-1e-9, 0.0)]);
        assert!(bias_angle_coherent(&tiny, &tiny).unwrap().theta < 1e-15);
    }

    #[test]
    fn coherent_saturates_on_vanishing_overlap() {
        let k = EncodingBasis::coherent("K", vec![c64(40.0, 0.0), c64(-40.0, 0.0)]);
        let b = bias_angle_coherent(&k, &k).unwrap();
        assert!(b.saturated);
        assert_eq!(b.theta, FRAC_PI_4);
    }

    #[test]
    fn m_factor_examples() {
        assert_eq!(m_factor(0.0), 1.0);
        assert_abs_diff_eq!(m_factor(FRAC_PI_2), 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(m_factor(14.48f64.to_radians()), 0.9702, epsilon = 1e-4);
    }

    #[test]
    fn modify_error_examples() {
        assert_eq!(modify_error(0.0, 0.0), 0.0);
        assert_abs_diff_eq!(modify_error(0.5, 1.1), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(modify_error(0.03, 14.48f64.to_radians()), 0.0440, epsilon = 5e-4);
    }

    #[test]
    fn bias_model_and_stats() {
        let m = BiasModel::from_theta(0.0).unwrap();
        assert_eq!(m.m_factor, 1.0);
        assert!(BiasModel::from_theta(1.0).is_err());
        let m = BiasModel::from_theta_b(0.254).unwrap();
        assert_abs_diff_eq!(m.m_factor, 1.0 / (1.0 + 0.254f64.sin().powi(2)).sqrt(), epsilon = 1e-12);

        let s = ChannelStats::new(0.02, 0.9).unwrap();
        assert_abs_diff_eq!(s.e_exp, (1.0 - 0.9 * 0.96) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ChannelStats::from_qber(0.02).unwrap().e_exp, 0.02, epsilon = 1e-15);
        assert!(ChannelStats::new(0.7, 1.0).is_err());
        assert!(s.modified(&m) >= s.e_exp);
    }
}
