use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use qkd_bias::bias::{bias_angle_single_photon, m_factor, modify_error, EncodingBasis};
use qkd_bias::decoy::{
    gllp_phase_error, simulate_gain_qber, tf_gain_qber, true_single_photon, vacuum_weak_bounds, ChannelParams,
};
use qkd_bias::linalg::{c64, h2, herm_eig};
use qkd_bias::modes::{b_coeff, mode_matrix, mpub_bias_angle, CorrelationConvention, ModeFamily};
use qkd_bias::protocols::{rfi_p_statistic, ErrorMatrix};
use qkd_bias::{entropy_h_d, fidelity, pinch, CMatrix, CVector, DensityMatrix, HermitianOperator, KeyMap};

fn complex_matrix(d: usize, re: &[f64], im: &[f64]) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| c64(re[i * d + j], im[i * d + j]))
}

fn hermitian(d: usize, re: &[f64], im: &[f64]) -> CMatrix {
    let a = complex_matrix(d, re, im);
    (&a + a.adjoint()) * c64(0.5, 0.0)
}

fn unitary(d: usize, re: &[f64], im: &[f64]) -> CMatrix {
    complex_matrix(d, re, im).qr().q()
}

fn state(d: usize, re: &[f64], im: &[f64]) -> DensityMatrix {
    let a = complex_matrix(d, re, im);
    let m = &a * a.adjoint();
    let t = m.trace();
    DensityMatrix::from_matrix(m / t).unwrap()
}

fn entries(max: usize) -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>)> {
    (2..=max).prop_flat_map(|d| {
        (
            Just(d),
            prop::collection::vec(-1.0..1.0f64, d * d),
            prop::collection::vec(-1.0..1.0f64, d * d),
        )
    })
}

fn fourier(d: usize) -> Vec<CVector> {
    (0..d)
        .map(|k| {
            CVector::from_fn(d, |j, _| {
                Complex64::from_polar(1.0 / (d as f64).sqrt(), 2.0 * PI * (j * k) as f64 / d as f64)
            })
        })
        .collect()
}

fn computational(d: usize) -> Vec<CVector> {
    (0..d)
        .map(|k| CVector::from_fn(d, |j, _| c64(if j == k { 1.0 } else { 0.0 }, 0.0)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eigendecomposition_reconstructs((d, re, im) in entries(32)) {
        let h = hermitian(d, &re, &im);
        let e = herm_eig(&h).unwrap();
        prop_assert!((e.reconstruct() - &h).norm() < 1e-9);
    }

    #[test]
    fn pinching_is_idempotent((d, re, im) in entries(6)) {
        let rho = state(d, &re, &im);
        let km = KeyMap::computational(d);
        let once = pinch(&rho, &km).unwrap();
        let twice = pinch(&once, &km).unwrap();
        prop_assert!((once.matrix() - twice.matrix()).norm() < 1e-12);
    }

    #[test]
    fn fidelity_symmetric_and_unitarily_invariant(
        (d, re, im) in entries(5),
        seed in prop::collection::vec(-1.0..1.0f64, 5 * 5 * 4),
    ) {
        let rho = state(d, &re, &im);
        let sigma = state(d, &seed[..d * d], &seed[d * d..2 * d * d]);
        let u = unitary(d, &seed[50..50 + d * d], &seed[75..75 + d * d]);
        let f = fidelity(&rho, &sigma).unwrap();
        prop_assert!((f - fidelity(&sigma, &rho).unwrap()).abs() < 1e-9);
        let g = fidelity(&rho.conjugated_by(&u), &sigma.conjugated_by(&u)).unwrap();
        prop_assert!((f - g).abs() < 1e-9);
    }

    #[test]
    fn qubit_entropy_is_binary_entropy(x in 1e-9..1.0 - 1e-9f64) {
        let h = -x * x.log2() - (1.0 - x) * (1.0 - x).log2();
        prop_assert!((entropy_h_d(x, 2) - h).abs() < 1e-12);
        prop_assert!((h2(x) - h).abs() < 1e-12);
    }

    #[test]
    fn bias_angle_symmetric(
        (d, re, im) in entries(4),
        more in prop::collection::vec(-1.0..1.0f64, 32),
    ) {
        let a = unitary(d, &re, &im);
        let b = unitary(d, &more[..d * d], &more[16..16 + d * d]);
        let ka = EncodingBasis::from_rows("a", &a).unwrap();
        let kb = EncodingBasis::from_rows("b", &b).unwrap();
        let t1 = bias_angle_single_photon(&ka, &kb).unwrap();
        let t2 = bias_angle_single_photon(&kb, &ka).unwrap();
        prop_assert!((t1 - t2).abs() < 1e-10);
        let m = m_factor(2.0 * t1);
        prop_assert!(m > 1.0 / 2f64.sqrt() && m <= 1.0);
    }

    #[test]
    fn decoy_bounds_are_conservative(
        distance in 0.0..200.0f64,
        y0 in 1e-7..1e-5f64,
        alpha in 0.15..0.3f64,
        e_d in 0.0..0.05f64,
        eta_det in 0.01..0.6f64,
        mu in 0.3..0.8f64,
        ratio in 0.05..0.5f64,
    ) {
        let ch = ChannelParams { y0, alpha_db_per_km: alpha, e_d, eta_det, f_ec: 1.16 };
        let nu = mu * ratio;
        let s = simulate_gain_qber(&ch, mu, distance).unwrap();
        let w = simulate_gain_qber(&ch, nu, distance).unwrap();
        let (y1, e1) = true_single_photon(&ch, distance);
        if let Ok(est) = vacuum_weak_bounds(s, w, y0, mu, nu) {
            prop_assert!(est.y1_lower <= y1 * (1.0 + 1e-9));
            prop_assert!(est.e1_upper >= e1 * (1.0 - 1e-9));
        }
    }

    #[test]
    fn gllp_phase_error_dominates(e1 in 0.0..0.5f64, delta in 0.0..0.1f64, y1 in 1e-6..1.0f64) {
        let b = gllp_phase_error(e1, delta, y1).unwrap();
        prop_assert!(b.e_phase >= e1);
        prop_assert!((0.0..=0.5).contains(&b.delta_prime));
        if delta > 0.0 && e1 < 0.5 {
            prop_assert!(b.e_phase > e1);
        }
    }
}

#[test]
fn gllp_without_imbalance_is_identity() {
    for e1 in [0.0, 0.01, 0.1, 0.3] {
        assert_eq!(gllp_phase_error(e1, 0.0, 1e-3).unwrap().e_phase, e1);
    }
}

#[test]
fn fourier_bases_are_unbiased() {
    for d in 2..=4 {
        let z = EncodingBasis::single_photon("z", computational(d)).unwrap();
        let f = EncodingBasis::single_photon("f", fourier(d)).unwrap();
        assert!(bias_angle_single_photon(&z, &f).unwrap().abs() < 1e-10);
    }
}

#[test]
fn modify_error_monotone_on_grid() {
    let n = 60;
    for i in 0..=n {
        let e = 0.5 * i as f64 / n as f64;
        for j in 0..=n {
            let t = FRAC_PI_2 * j as f64 / n as f64;
            let v = modify_error(e, t);
            if i < n {
                assert!(modify_error(0.5 * (i + 1) as f64 / n as f64, t) >= v);
            }
            if j < n {
                assert!(modify_error(e, FRAC_PI_2 * (j + 1) as f64 / n as f64) >= v);
            }
        }
    }
}

#[test]
fn mode_matrices_unitary_and_coefficients_normalized() {
    for order in 0..=6 {
        for family in ModeFamily::ALL {
            assert!(mode_matrix(family, order).unitarity_error() < 1e-10);
        }
        for n in 0..=order {
            let m = order - n;
            let s: f64 = (0..=order).map(|k| b_coeff(n, m, k).unwrap().powi(2)).sum();
            assert!((s - 1.0).abs() < 1e-12, "n={n} m={m}");
        }
    }
}

#[test]
fn mpub_bias_angle_is_deterministic() {
    let a = mpub_bias_angle(3).unwrap();
    assert_eq!(a, mpub_bias_angle(3).unwrap());
    // row permutations of either basis leave the angle unchanged
    let u = mode_matrix(ModeFamily::LaguerreGauss, 3);
    let v = mode_matrix(ModeFamily::RotatedHermiteGauss, 3);
    let rev = |m: &CMatrix| CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(m.nrows() - 1 - i, j)]);
    let ku = EncodingBasis::from_rows("lg", &rev(u.matrix())).unwrap();
    let kv = EncodingBasis::from_rows("hg45", v.matrix()).unwrap();
    let b = bias_angle_single_photon(&ku, &kv).unwrap();
    let ku = EncodingBasis::from_rows("lg", u.matrix()).unwrap();
    assert!((b - bias_angle_single_photon(&ku, &kv).unwrap()).abs() < 1e-12);
}

#[test]
fn correlation_operators_bounded() {
    for order in 1..=3 {
        for q in 0..3 {
            for conv in [CorrelationConvention::Conjugate, CorrelationConvention::Literal] {
                let c = qkd_bias::modes::c_operator(q, order, conv).unwrap();
                assert!(c.op_norm() <= 1.0 + 1e-12);
            }
        }
    }
}

#[test]
fn p_statistic_frame_independent() {
    for k in 0..=90 {
        let beta = (k as f64).to_radians();
        let p = rfi_p_statistic(&ErrorMatrix::noiseless_rfi(beta));
        assert!((p.value - 2.0).abs() < 1e-9, "beta={k}: {}", p.value);
    }
}

#[test]
fn gains_fall_and_errors_rise_with_distance() {
    let fiber = ChannelParams {
        y0: 1.7e-6,
        alpha_db_per_km: 0.21,
        e_d: 0.033,
        eta_det: 0.045,
        f_ec: 1.22,
    };
    let tf = ChannelParams {
        y0: 1e-11,
        alpha_db_per_km: 0.2,
        e_d: 0.0,
        eta_det: 0.8,
        f_ec: 1.1,
    };
    let mut last = (f64::INFINITY, 0.0, f64::INFINITY, 0.0);
    for k in 0..=120 {
        let l = 5.0 * k as f64;
        let a = simulate_gain_qber(&fiber, 0.48, l).unwrap();
        let b = tf_gain_qber(&tf, 0.0012, 0.0012, l, 16).unwrap();
        assert!(a.gain <= last.0 && a.qber >= last.1);
        assert!(b.gain <= last.2 && b.qber >= last.3);
        last = (a.gain, a.qber, b.gain, b.qber);
    }
}

#[test]
fn hermitian_operator_rejects_asymmetric_input() {
    let m = DMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]);
    assert!(HermitianOperator::new(m).is_err());
}
