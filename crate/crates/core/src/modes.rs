//! Finite-dimensional algebra of same-order transverse spatial modes.
//!
//! Order-`N` modes span a `d = N + 1` dimensional space. Taking the
//! Hermite-Gaussian modes `|h_{N−k,k}⟩` as the reference basis, the
//! Laguerre-Gaussian and 45°-rotated Hermite-Gaussian modes are obtained by
//! the unitaries `U_1` and `U_0`, whose entries are `(i^k)^q b(n,m,k)`.
//!
//! Rows of a [`ModeBasisMatrix`] are ordered `(n,m) = (N,0), (N−1,1), …, (0,N)`
//! and each row holds the components of one basis state in the HG basis.

use num_complex::Complex64;

use crate::bias::{bias_angle_single_photon, EncodingBasis};
use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix, CVector, HermitianOperator, KeyMap};

/// Spatial-mode basis selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeFamily {
    /// HG modes rotated by 45° (`q = 0`).
    RotatedHermiteGauss,
    /// Laguerre-Gaussian modes (`q = 1`).
    LaguerreGauss,
    /// Hermite-Gaussian modes (`q = 2`), the reference basis.
    HermiteGauss,
}

impl ModeFamily {
    pub const ALL: [ModeFamily; 3] = [
        ModeFamily::RotatedHermiteGauss,
        ModeFamily::LaguerreGauss,
        ModeFamily::HermiteGauss,
    ];

    pub fn q(self) -> u8 {
        match self {
            ModeFamily::RotatedHermiteGauss => 0,
            ModeFamily::LaguerreGauss => 1,
            ModeFamily::HermiteGauss => 2,
        }
    }

    pub fn from_q(q: u8) -> Result<Self> {
        match q {
            0 => Ok(ModeFamily::RotatedHermiteGauss),
            1 => Ok(ModeFamily::LaguerreGauss),
            2 => Ok(ModeFamily::HermiteGauss),
            _ => Err(Error::InvalidParameter(format!("mode family q={q} not in {{0,1,2}}"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModeFamily::RotatedHermiteGauss => "HG45",
            ModeFamily::LaguerreGauss => "LG",
            ModeFamily::HermiteGauss => "HG",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeIndex {
    pub n: u32,
    pub m: u32,
}

impl ModeIndex {
    pub fn order(self) -> u32 {
        self.n + self.m
    }

    /// `(N,0), (N−1,1), …, (0,N)`.
    pub fn enumerate(order: u32) -> impl Iterator<Item = ModeIndex> {
        (0..=order).map(move |r| ModeIndex { n: order - r, m: r })
    }
}

fn binomial(n: u32, k: u32) -> i128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i128 / (i + 1) as i128;
    }
    acc
}

/// Integer coefficients of `(1−t)^n (1+t)^m`, lowest degree first.
fn signed_binomial_product(n: u32, m: u32) -> Vec<i128> {
    let minus: Vec<i128> = (0..=n)
        .map(|j| if j % 2 == 0 { binomial(n, j) } else { -binomial(n, j) })
        .collect();
    let plus: Vec<i128> = (0..=m).map(|j| binomial(m, j)).collect();
    let mut out = vec![0i128; (n + m + 1) as usize];
    for (i, a) in minus.iter().enumerate() {
        for (j, b) in plus.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// `b(n,m,k) = √((N−k)! k! / (2^N n! m!)) · [tᵏ](1−t)ⁿ(1+t)ᵐ`.
///
/// The derivative in the defining formula divided by `k!` is exactly the
/// `k`-th Taylor coefficient, taken here from the integer expansion.
pub fn b_coeff(n: u32, m: u32, k: u32) -> Result<f64> {
    let order = n + m;
    if k > order {
        return Err(Error::InvalidParameter(format!(
            "k={k} out of range for mode order {order}"
        )));
    }
    let coeff = signed_binomial_product(n, m)[k as usize];
    if coeff == 0 {
        return Ok(0.0);
    }
    let ln_norm = 0.5
        * (ln_factorial(order - k) + ln_factorial(k)
            - order as f64 * std::f64::consts::LN_2
            - ln_factorial(n)
            - ln_factorial(m));
    Ok(ln_norm.exp() * coeff as f64)
}

fn i_pow(k: u32, q: u8) -> Complex64 {
    match (k as u64 * q as u64) % 4 {
        0 => c64(1.0, 0.0),
        1 => c64(0.0, 1.0),
        2 => c64(-1.0, 0.0),
        _ => c64(0.0, -1.0),
    }
}

/// Mode conversion matrix `U_q` of a given order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBasisMatrix {
    family: ModeFamily,
    order: u32,
    entries: CMatrix,
}

impl ModeBasisMatrix {
    pub fn family(&self) -> ModeFamily {
        self.family
    }

    pub fn q(&self) -> u8 {
        self.family.q()
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.order as usize + 1
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    /// Basis state `r` expressed in the HG basis.
    pub fn state(&self, r: usize) -> CVector {
        self.entries.row(r).transpose()
    }

    pub fn states(&self) -> Vec<CVector> {
        (0..self.dim()).map(|r| self.state(r)).collect()
    }

    pub fn encoding_basis(&self) -> Result<EncodingBasis> {
        EncodingBasis::from_rows(self.family.label(), &self.entries)
    }

    /// Max-abs deviation of `U U†` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let d = self.dim();
        let prod = &self.entries * self.entries.adjoint() - CMatrix::identity(d, d);
        crate::linalg::max_abs(&prod)
    }
}

pub fn u_matrix(q: u8, order: u32) -> Result<ModeBasisMatrix> {
    let family = ModeFamily::from_q(q)?;
    Ok(mode_matrix(family, order))
}

pub fn mode_matrix(family: ModeFamily, order: u32) -> ModeBasisMatrix {
    let d = order as usize + 1;
    let entries = if family == ModeFamily::HermiteGauss {
        CMatrix::identity(d, d)
    } else {
        let q = family.q();
        let mut m = CMatrix::zeros(d, d);
        for (r, idx) in ModeIndex::enumerate(order).enumerate() {
            for k in 0..=order {
                let b = b_coeff(idx.n, idx.m, k).expect("k within order");
                m[(r, k as usize)] = i_pow(k, q) * b;
            }
        }
        m
    };
    ModeBasisMatrix { family, order, entries }
}

/// How Bob's projectors are formed in the correlation operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationConvention {
    /// Alice projects on basis state `|a_r⟩`, Bob on its complex conjugate
    /// `|a_r*⟩`. The maximally entangled state then has zero error in every basis.
    #[default]
    Conjugate,
    /// `Σ_r U|h_r⟩⟨h_r|U† ⊗ U†|h_r⟩⟨h_r|U` with `U` the stored matrix read as
    /// a plain matrix product.
    Literal,
}

/// Correlation operator `C_q = Σ_r P_r ⊗ P'_r` on the `(N+1)²` joint space.
pub fn c_operator(q: u8, order: u32, convention: CorrelationConvention) -> Result<HermitianOperator> {
    let u = u_matrix(q, order)?;
    Ok(correlation_operator(&u, convention))
}

pub fn correlation_operator(u: &ModeBasisMatrix, convention: CorrelationConvention) -> HermitianOperator {
    let d = u.dim();
    let m = u.matrix();
    let mut acc = CMatrix::zeros(d * d, d * d);
    for r in 0..d {
        let (alice, bob): (CVector, CVector) = match convention {
            CorrelationConvention::Conjugate => {
                let a = u.state(r);
                let b = a.map(|z| z.conj());
                (a, b)
            }
            CorrelationConvention::Literal => {
                let a = m.column(r).into_owned();
                let b = m.adjoint().column(r).into_owned();
                (a, b)
            }
        };
        let pa = &alice * alice.adjoint();
        let pb = &bob * bob.adjoint();
        acc += pa.kronecker(&pb);
    }
    HermitianOperator::symmetrized(acc)
}

/// `E_q = I − C_q`.
pub fn error_operator(q: u8, order: u32, convention: CorrelationConvention) -> Result<HermitianOperator> {
    let c = c_operator(q, order, convention)?;
    Ok(HermitianOperator::identity(c.dim()).sub(&c))
}

/// Key map `{|l_r⟩⟨l_r| ⊗ I}` in the LG basis on Alice's side.
pub fn lg_key_map(order: u32) -> Result<KeyMap> {
    let u = mode_matrix(ModeFamily::LaguerreGauss, order);
    Ok(KeyMap::from_basis(&u.states())?.extend_to_first_of(u.dim()))
}

/// Basis bias angle `θ_b = 2θ`, `θ` the largest single-photon bias angle
/// over the three distinct pairs of {HG45, LG, HG}.
pub fn mpub_bias_angle(order: u32) -> Result<f64> {
    let bases: Vec<EncodingBasis> = ModeFamily::ALL
        .iter()
        .map(|&f| mode_matrix(f, order).encoding_basis())
        .collect::<Result<_>>()?;
    let mut theta = 0.0_f64;
    for i in 0..bases.len() {
        for j in (i + 1)..bases.len() {
            theta = theta.max(bias_angle_single_photon(&bases[i], &bases[j])?);
        }
    }
    Ok(2.0 * theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, maximally_entangled};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn b_coeff_examples() {
        assert_abs_diff_eq!(b_coeff(1, 0, 0).unwrap(), FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(b_coeff(1, 0, 1).unwrap(), -FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(b_coeff(0, 1, 1).unwrap(), FRAC_1_SQRT_2, epsilon = 1e-15);
        assert!(b_coeff(1, 1, 3).is_err());
    }

    #[test]
    fn b_coeff_order_three_by_hand() {
        // (1−t)³ = 1 − 3t + 3t² − t³, norm √((3−k)!k!/48)
        let expect = [
            (6.0f64 / 48.0).sqrt(),
            -3.0 * (2.0f64 / 48.0).sqrt(),
            3.0 * (2.0f64 / 48.0).sqrt(),
            -(6.0f64 / 48.0).sqrt(),
        ];
        for (k, e) in expect.iter().enumerate() {
            assert_abs_diff_eq!(b_coeff(3, 0, k as u32).unwrap(), *e, epsilon = 1e-15);
        }
    }

    #[test]
    fn u_matrix_examples() {
        let s = FRAC_1_SQRT_2;
        let u2 = u_matrix(2, 1).unwrap();
        assert_eq!(u2.matrix(), &CMatrix::identity(2, 2));

        let u0 = u_matrix(0, 1).unwrap();
        let expect0 = CMatrix::from_row_slice(2, 2, &[c64(s, 0.), c64(-s, 0.), c64(s, 0.), c64(s, 0.)]);
        assert!(max_abs(&(u0.matrix() - expect0)) < 1e-15);

        let u1 = u_matrix(1, 1).unwrap();
        let expect1 = CMatrix::from_row_slice(2, 2, &[c64(s, 0.), c64(0., -s), c64(s, 0.), c64(0., s)]);
        assert!(max_abs(&(u1.matrix() - expect1)) < 1e-15);

        assert!(u_matrix(3, 1).is_err());
    }

    #[test]
    fn c_operator_examples() {
        for conv in [CorrelationConvention::Conjugate, CorrelationConvention::Literal] {
            let c2 = c_operator(2, 2, conv).unwrap();
            let mut diag = vec![0.0; 9];
            for k in 0..3 {
                diag[k * 3 + k] = 1.0;
            }
            assert!(max_abs(&(c2.matrix() - HermitianOperator::from_real_diagonal(&diag).matrix())) < 1e-15);
            for q in 0..3u8 {
                for order in 1..=4 {
                    let c = c_operator(q, order, conv).unwrap();
                    assert_abs_diff_eq!(c.trace(), (order + 1) as f64, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn lg_correlator_acts_as_identity_on_correlated_state() {
        // Σ_r |l_r⟩|l_r*⟩/√2 equals the maximally entangled state
        let c1 = c_operator(1, 1, CorrelationConvention::Conjugate).unwrap();
        let phi = maximally_entangled(2);
        let out = c1.matrix() * &phi;
        assert!((out - &phi).norm() < 1e-14);
    }

    #[test]
    fn error_operator_examples() {
        for order in 1..=3u32 {
            let d = (order + 1) as usize;
            let phi = maximally_entangled(d);
            let e2 = error_operator(2, order, CorrelationConvention::Conjugate).unwrap();
            let val = phi.dotc(&(e2.matrix() * &phi)).re;
            assert_abs_diff_eq!(val, 0.0, epsilon = 1e-14);
            for q in 0..3u8 {
                let e = error_operator(q, order, CorrelationConvention::Conjugate).unwrap();
                assert_abs_diff_eq!(e.trace(), (d * d - d) as f64, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn error_operators_are_psd() {
        for conv in [CorrelationConvention::Conjugate, CorrelationConvention::Literal] {
            for order in 1..=5u32 {
                for q in 0..3u8 {
                    let e = error_operator(q, order, conv).unwrap().eig();
                    assert!(e.min() > -1e-12, "q={q} N={order} min={}", e.min());
                    assert!(e.values[e.values.len() - 1] < 1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn mpub_bias_angle_examples() {
        let deg = mpub_bias_angle(3).unwrap().to_degrees();
        assert_abs_diff_eq!(deg, 14.48, epsilon = 0.05);
        // exact value: sin θ_b = 1/4
        assert_abs_diff_eq!(mpub_bias_angle(3).unwrap(), 0.25f64.asin(), epsilon = 1e-12);
        // order 1: the three bases are mutually unbiased qubit bases
        assert_abs_diff_eq!(mpub_bias_angle(1).unwrap(), 0.0, epsilon = 1e-12);
        assert_eq!(mpub_bias_angle(0).unwrap(), 0.0);
    }

    #[test]
    fn identical_pair_is_excluded() {
        let hg = mode_matrix(ModeFamily::HermiteGauss, 3).encoding_basis().unwrap();
        let self_angle = bias_angle_single_photon(&hg, &hg).unwrap();
        assert_abs_diff_eq!(self_angle, std::f64::consts::FRAC_PI_4, epsilon = 1e-12);
        assert!(mpub_bias_angle(3).unwrap() < 2.0 * self_angle);
    }

    #[test]
    fn key_map_is_complete() {
        let z = lg_key_map(3).unwrap();
        assert_eq!(z.len(), 4);
        assert_eq!(z.dim(), 16);
    }
}
