//! Certified lower bound on `H(Z_A|E)` by minimizing `D(ρ‖Z(ρ))`.
//!
//! The primal is solved in a real parameterization of the affine constraint
//! set: `ρ = x₀ + N t` where `x₀` is the least-squares solution and `N` spans
//! the null space of the constraint map. An interior point is found by
//! maximizing a smoothed minimum eigenvalue, then a log-barrier sequence is
//! minimized with BFGS. The reported bound linearizes `f` at the final
//! iterate `ρ*` and bounds the remaining linear problem
//! `min_σ Tr(σ∇f(ρ*))` from below through its Lagrange dual
//!
//! ```text
//! φ(y) = λ_min(∇f − Σ yᵢΓᵢ) + Σ yᵢγᵢ − Σ |yᵢ|·tolᵢ
//! ```
//!
//! which is a valid bound for every `y`, so the result never depends on the
//! dual search having converged.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{c64, shannon_bits, trace_product, CMatrix, DensityMatrix, Eigen, HermitianOperator, KeyMap};

const DEFAULT_TOLERANCE: f64 = 1e-8;
const INFEASIBLE_RESIDUAL: f64 = 1e-6;
const INFEASIBLE_EIGENVALUE: f64 = -1e-7;
const THIN_SET_EIGENVALUE: f64 = 1e-12;
const THIN_SET_SHIFT: f64 = 1e-6;
const BARRIER_SCHEDULE: [f64; 7] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];
const SMOOTHING_SCHEDULE: [f64; 9] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9];
const DUAL_MAX_ITER: usize = 3000;
const DUAL_START_SCALE: f64 = 10.0;
const MIXING_TRIGGER: f64 = 1e-6;
const MIXING_WEIGHTS: [f64; 6] = [1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3];
const FLAT_STEPS: usize = 5;
const STAGE_FTOL: f64 = 1e-13;

/// Linear expectation constraint `|Tr(Γρ) − γ| ≤ tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub observable: HermitianOperator,
    pub value: f64,
    pub tolerance: f64,
}

impl Constraint {
    pub fn new(observable: HermitianOperator, value: f64) -> Result<Self> {
        Self::with_tolerance(observable, value, DEFAULT_TOLERANCE)
    }

    pub fn with_tolerance(observable: HermitianOperator, value: f64, tolerance: f64) -> Result<Self> {
        if !value.is_finite() || !(tolerance >= 0.0) {
            return Err(Error::Validation(format!(
                "constraint value {value} / tolerance {tolerance} out of range"
            )));
        }
        let norm = observable.op_norm();
        if value.abs() > norm * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::Validation(format!(
                "|value| = {} exceeds the operator norm {norm}",
                value.abs()
            )));
        }
        Ok(Self {
            observable,
            value,
            tolerance,
        })
    }

    /// `⟨I⟩ = 1`.
    pub fn normalization(dim: usize) -> Self {
        Self {
            observable: HermitianOperator::identity(dim),
            value: 1.0,
            tolerance: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.observable.dim()
    }

    pub fn residual(&self, rho: &DensityMatrix) -> f64 {
        (self.observable.expectation(rho) - self.value).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    /// BFGS iteration cap per stage.
    pub max_iter: usize,
    /// Relative objective change treated as stalled.
    pub tol: f64,
    /// Duality gap treated as converged.
    pub gap_tol: f64,
    /// Eigenvalue floor inside logarithms.
    pub floor: f64,
    /// Number of starts for the dual search (the first is `y = 0`).
    pub restarts: usize,
    pub seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-7,
            gap_tol: 1e-4,
            floor: 1e-12,
            restarts: 16,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct OptimizerResult {
    /// Certified lower bound on `H(Z_A|E)` in bits.
    pub h_lower: f64,
    pub rho_star: DensityMatrix,
    pub primal_value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

/// Coordinates in the orthonormal Hermitian basis
/// `{E_kk} ∪ {(E_jk+E_kj)/√2, i(E_kj−E_jk)/√2}`.
fn to_coords(m: &CMatrix) -> DVector<f64> {
    let d = m.nrows();
    let mut x = DVector::zeros(d * d);
    let s = std::f64::consts::SQRT_2;
    for k in 0..d {
        x[k] = m[(k, k)].re;
    }
    let mut idx = d;
    for j in 0..d {
        for k in j + 1..d {
            let z = m[(j, k)];
            x[idx] = s * z.re;
            x[idx + 1] = -s * z.im;
            idx += 2;
        }
    }
    x
}

fn from_coords(x: &DVector<f64>, d: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for k in 0..d {
        m[(k, k)] = c64(x[k], 0.0);
    }
    let mut idx = d;
    for j in 0..d {
        for k in j + 1..d {
            let z = c64(s * x[idx], -s * x[idx + 1]);
            m[(j, k)] = z;
            m[(k, j)] = z.conj();
            idx += 2;
        }
    }
    m
}

fn eig(m: &CMatrix) -> Eigen {
    HermitianOperator::symmetrized(m.clone()).eig()
}

/// `(−t·ln Σ exp(−λᵢ/t), Σ softmax weights · projectors, λ_min)`.
fn soft_min(m: &CMatrix, t: f64) -> (f64, CMatrix, f64) {
    let e = eig(m);
    let lmin = e.min();
    let w: Vec<f64> = e.values.iter().map(|&l| (-(l - lmin) / t).exp()).collect();
    let z: f64 = w.iter().sum();
    let mut scaled = e.vectors.clone();
    for (j, wj) in w.iter().enumerate() {
        scaled.column_mut(j).scale_mut(wj / z);
    }
    (lmin - t * z.ln(), scaled * e.vectors.adjoint(), lmin)
}

struct Bfgs {
    x: DVector<f64>,
    value: f64,
    iterations: usize,
    stalled: bool,
    inverse_hessian: DMatrix<f64>,
}

/// Minimizes `fun`, which returns `None` outside its domain. `step_limit`
/// caps the first trial step along a direction. Without a warm inverse
/// Hessian the identity is rescaled after the first step.
fn bfgs<F, S>(
    mut fun: F,
    step_limit: S,
    x0: DVector<f64>,
    warm: Option<DMatrix<f64>>,
    max_iter: usize,
    gtol: f64,
    ftol: f64,
) -> Bfgs
where
    F: FnMut(&DVector<f64>) -> Option<(f64, DVector<f64>)>,
    S: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    let n = x0.len();
    let (mut v, mut g) = fun(&x0).expect("BFGS start must lie in the domain");
    let mut x = x0;
    let mut rescale = warm.is_none();
    let mut h = warm.unwrap_or_else(|| DMatrix::<f64>::identity(n, n));
    let mut iterations = 0;
    let mut stalled = false;
    let mut flat = 0;
    if n == 0 {
        return Bfgs {
            x,
            value: v,
            iterations,
            stalled: true,
            inverse_hessian: h,
        };
    }
    while iterations < max_iter {
        if g.norm() < gtol {
            stalled = true;
            break;
        }
        let mut p = -(&h * &g);
        let mut slope = g.dot(&p);
        if slope >= 0.0 {
            h.fill_with_identity();
            p = -g.clone();
            slope = g.dot(&p);
        }
        let mut s = step_limit(&x, &p).min(1.0);
        let accepted = loop {
            let xn = &x + &p * s;
            if let Some((vn, gn)) = fun(&xn) {
                if vn <= v + 1e-4 * s * slope {
                    break Some((xn, vn, gn));
                }
            }
            s *= 0.5;
            if s < 1e-16 {
                break None;
            }
        };
        let Some((xn, vn, gn)) = accepted else {
            stalled = true;
            break;
        };
        let sk = &xn - &x;
        let yk = &gn - &g;
        let change = (v - vn).abs();
        x = xn;
        g = gn;
        let prev = v;
        v = vn;
        iterations += 1;
        let sy = sk.dot(&yk);
        if sy > 1e-16 {
            if rescale {
                h.fill_with_identity();
                h *= sy / yk.norm_squared();
                rescale = false;
            }
            let r = 1.0 / sy;
            let hy = &h * &yk;
            let yhy = yk.dot(&hy);
            // H ← (I − r s yᵀ) H (I − r y sᵀ) + r s sᵀ, expanded
            h.ger(-r, &hy, &sk, 1.0);
            h.ger(-r, &sk, &hy, 1.0);
            h.ger(r * r * yhy + r, &sk, &sk, 1.0);
        }
        if change <= ftol * prev.abs().max(1.0) {
            flat += 1;
            if flat >= FLAT_STEPS {
                stalled = true;
                break;
            }
        } else {
            flat = 0;
        }
    }
    Bfgs {
        x,
        value: v,
        iterations,
        stalled,
        inverse_hessian: h,
    }
}

/// Affine parameterization `x₀ + N t` of `{ρ : Tr(Γᵢρ) = γᵢ}`.
struct Affine {
    dim: usize,
    rows: Vec<DVector<f64>>,
    values: DVector<f64>,
    /// Orthonormal basis of the row space with `rows = R·basis` coefficients.
    row_basis: Vec<DVector<f64>>,
    null: DMatrix<f64>,
}

impl Affine {
    fn new(constraints: &[Constraint], dim: usize) -> Self {
        let n = dim * dim;
        let mut rows = vec![to_coords(HermitianOperator::identity(dim).matrix())];
        let mut values = vec![1.0];
        for c in constraints {
            rows.push(to_coords(c.observable.matrix()));
            values.push(c.value);
        }
        let mut basis: Vec<DVector<f64>> = Vec::new();
        let scale = rows.iter().map(|r| r.norm()).fold(0.0_f64, f64::max);
        for r in &rows {
            if let Some(q) = orthonormalize(r, &basis, 1e-10 * scale.max(1.0)) {
                basis.push(q);
            }
        }
        let row_basis = basis.clone();
        let mut null_vecs = Vec::with_capacity(n - basis.len());
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            if let Some(q) = orthonormalize(&e, &basis, 1e-6) {
                basis.push(q.clone());
                null_vecs.push(q);
            }
        }
        let null = if null_vecs.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&null_vecs)
        };
        Self {
            dim,
            rows,
            values: DVector::from_vec(values),
            row_basis,
            null,
        }
    }

    /// Least-squares solution in the row space and its residual.
    fn particular(&self, values: &DVector<f64>) -> (DVector<f64>, f64) {
        let m = self.rows.len();
        let r = self.row_basis.len();
        // A = C·Q with Q orthonormal rows; solve min‖C z − γ‖ then x = Qᵀz
        let mut c = DMatrix::zeros(m, r);
        for (i, row) in self.rows.iter().enumerate() {
            for (k, q) in self.row_basis.iter().enumerate() {
                c[(i, k)] = row.dot(q);
            }
        }
        let svd = c.clone().svd(true, true);
        let z = svd.solve(values, 1e-12).unwrap_or_else(|_| DVector::zeros(r));
        let mut x = DVector::zeros(self.dim * self.dim);
        for (k, q) in self.row_basis.iter().enumerate() {
            x += q * z[k];
        }
        let residual = (&c * &z - values).norm();
        (x, residual)
    }

    fn params(&self) -> usize {
        self.null.ncols()
    }

    fn point(&self, x0: &DVector<f64>, t: &DVector<f64>) -> CMatrix {
        from_coords(&(x0 + &self.null * t), self.dim)
    }

    /// Step along `p` from `x₀ + N t` that keeps 95% of the distance to the PSD boundary.
    fn boundary_step(&self, x0: &DVector<f64>, t: &DVector<f64>, p: &DVector<f64>) -> f64 {
        let e = eig(&self.point(x0, t));
        if e.min() <= 0.0 {
            return 1.0;
        }
        let inv_sqrt = e.map(|x| 1.0 / x.sqrt());
        let dir = from_coords(&(&self.null * p), self.dim);
        let lmin = eig(&(&inv_sqrt * dir * &inv_sqrt)).min();
        if lmin >= 0.0 {
            f64::INFINITY
        } else {
            -0.95 / lmin
        }
    }

    fn pull_back(&self, m: &CMatrix) -> DVector<f64> {
        self.null.tr_mul(&to_coords(m))
    }
}

fn orthonormalize(v: &DVector<f64>, basis: &[DVector<f64>], tol: f64) -> Option<DVector<f64>> {
    let mut w = v.clone();
    for _ in 0..2 {
        for q in basis {
            let c = q.dot(&w);
            w.axpy(-c, q, 1.0);
        }
    }
    let norm = w.norm();
    (norm > tol).then(|| w / norm)
}

struct Interior {
    x0: DVector<f64>,
    t: DVector<f64>,
    lambda_min: f64,
}

fn find_interior(aff: &Affine, values: &DVector<f64>, opts: &OptimizerOptions) -> Result<Interior> {
    let (x0, residual) = aff.particular(values);
    if residual > INFEASIBLE_RESIDUAL {
        return Err(Error::Infeasible { residual });
    }
    let mut t = DVector::zeros(aff.params());
    let mut lambda_min = eig(&aff.point(&x0, &t)).min();
    for &tt in &SMOOTHING_SCHEDULE {
        if lambda_min > 20.0 * tt {
            break;
        }
        let out = bfgs(
            |t| {
                let (v, w, _) = soft_min(&aff.point(&x0, t), tt);
                Some((-v, -aff.pull_back(&w)))
            },
            |_, _| f64::INFINITY,
            t,
            None,
            opts.max_iter.min(200),
            1e-12,
            0.0,
        );
        t = out.x;
        lambda_min = eig(&aff.point(&x0, &t)).min();
    }
    Ok(Interior { x0, t, lambda_min })
}

fn phase_one(aff: &Affine, opts: &OptimizerOptions) -> Result<Interior> {
    let found = find_interior(aff, &aff.values, opts)?;
    if found.lambda_min > THIN_SET_EIGENVALUE {
        return Ok(found);
    }
    if found.lambda_min < INFEASIBLE_EIGENVALUE {
        return Err(Error::Infeasible {
            residual: -found.lambda_min,
        });
    }
    // feasible set lies on the PSD boundary: shift towards the maximally mixed values
    let d = aff.dim as f64;
    let centre: Vec<f64> = aff.rows.iter().map(|r| r.rows(0, aff.dim).sum() / d).collect();
    let shifted = aff.values.map(|v| v * (1.0 - THIN_SET_SHIFT)) + DVector::from_vec(centre) * THIN_SET_SHIFT;
    let moved = find_interior(aff, &shifted, opts)?;
    if moved.lambda_min > 0.0 {
        Ok(moved)
    } else {
        Err(Error::Infeasible {
            residual: -moved.lambda_min,
        })
    }
}

/// Density matrix satisfying the constraints, found by least squares over the
/// Hermitian basis followed by a search for the most interior point.
pub fn feasible_point(constraints: &[Constraint], dim: usize) -> Result<DensityMatrix> {
    check_dims(constraints, dim)?;
    let aff = Affine::new(constraints, dim);
    let opts = OptimizerOptions::default();
    let found = phase_one(&aff, &opts)?;
    let m = aff.point(&found.x0, &found.t);
    DensityMatrix::from_operator_clipped(&HermitianOperator::symmetrized(m))
}

fn check_dims(constraints: &[Constraint], dim: usize) -> Result<()> {
    if dim < 1 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    for c in constraints {
        if c.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: c.dim(),
            });
        }
    }
    Ok(())
}

fn entropy_of(e: &Eigen, floor: f64) -> f64 {
    shannon_bits(e.values.iter().map(|&x| if x > floor { x } else { 0.0 }))
}

fn log2_of(e: &Eigen, floor: f64) -> CMatrix {
    e.map(|x| x.max(floor).log2())
}

/// `D(ρ‖Z(ρ)) = S(Z(ρ)) − S(ρ)` in bits.
pub fn objective(rho: &DensityMatrix, keymap: &KeyMap) -> Result<f64> {
    if rho.dim() != keymap.dim() {
        return Err(Error::DimensionMismatch {
            expected: keymap.dim(),
            found: rho.dim(),
        });
    }
    let floor = OptimizerOptions::default().floor;
    let e = eig(rho.matrix());
    let ez = eig(&keymap.pinch_matrix(rho.matrix()));
    Ok((entropy_of(&ez, floor) - entropy_of(&e, floor)).max(0.0))
}

struct Evaluation {
    value: f64,
    gradient: CMatrix,
    eigen: Eigen,
}

fn evaluate(m: &CMatrix, keymap: &KeyMap, floor: f64) -> Evaluation {
    let e = eig(m);
    let ez = eig(&keymap.pinch_matrix(m));
    let value = entropy_of(&ez, floor) - entropy_of(&e, floor);
    let gradient = log2_of(&e, floor) - log2_of(&ez, floor);
    Evaluation {
        value,
        gradient,
        eigen: e,
    }
}

/// `max_y φ(y)` over smoothing continuation and random restarts.
fn dual_bound(grad: &CMatrix, constraints: &[Constraint], opts: &OptimizerOptions) -> f64 {
    let k = constraints.len();
    let gammas: Vec<&CMatrix> = constraints.iter().map(|c| c.observable.matrix()).collect();
    let shifted = |y: &DVector<f64>| {
        let mut m = grad.clone();
        for (yi, g) in y.iter().zip(&gammas) {
            m -= *g * c64(*yi, 0.0);
        }
        m
    };
    let exact = |y: &DVector<f64>| {
        let mut v = eig(&shifted(y)).min();
        for (yi, c) in y.iter().zip(constraints) {
            v += yi * c.value - yi.abs() * c.tolerance;
        }
        v
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best = exact(&DVector::zeros(k));
    if k == 0 {
        return best;
    }
    for restart in 0..opts.restarts.max(1) {
        let mut y = if restart == 0 {
            DVector::zeros(k)
        } else {
            DVector::from_fn(k, |_, _| rng.random_range(-DUAL_START_SCALE..DUAL_START_SCALE))
        };
        for &tt in &SMOOTHING_SCHEDULE {
            let out = bfgs(
                |y| {
                    let (v, w, _) = soft_min(&shifted(y), tt);
                    let mut val = v;
                    let mut g = DVector::zeros(k);
                    for (i, c) in constraints.iter().enumerate() {
                        // √(y²+s²) ≥ |y| keeps the smoothed penalty conservative
                        let a = (y[i] * y[i] + tt * tt).sqrt();
                        val += y[i] * c.value - c.tolerance * a;
                        g[i] = c.value - trace_product(&w, gammas[i]) - c.tolerance * y[i] / a;
                    }
                    Some((-val, -g))
                },
                |_, _| f64::INFINITY,
                y,
                None,
                DUAL_MAX_ITER,
                1e-9,
                1e-13,
            );
            y = out.x;
        }
        best = best.max(exact(&y));
    }
    best
}

/// Certified minimization of `D(ρ‖Z(ρ))` over states satisfying `constraints`.
///
/// The normalization `Tr ρ = 1` is always imposed. Infeasible sets return
/// [`Error::Infeasible`].
pub fn minimize(
    constraints: &[Constraint],
    keymap: &KeyMap,
    dim: usize,
    options: &OptimizerOptions,
) -> Result<OptimizerResult> {
    check_dims(constraints, dim)?;
    if keymap.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: keymap.dim(),
        });
    }
    let aff = Affine::new(constraints, dim);
    let start = phase_one(&aff, options)?;
    let x0 = start.x0;
    let floor = options.floor;
    let mut t = start.t;
    let mut iterations = 0;
    let mut stalled = false;
    let mut warm = None;
    let mut previous = None;
    for &tau in &BARRIER_SCHEDULE {
        let out = bfgs(
            |t| {
                let m = aff.point(&x0, t);
                let ev = evaluate(&m, keymap, floor);
                if ev.eigen.min() <= 0.0 {
                    return None;
                }
                let log_det: f64 = ev.eigen.values.iter().map(|x| x.ln()).sum();
                let inv = ev.eigen.map(|x| 1.0 / x);
                let g = ev.gradient - inv * c64(tau, 0.0);
                Some((ev.value - tau * log_det, aff.pull_back(&g)))
            },
            |t, p| aff.boundary_step(&x0, t, p),
            t,
            warm.take(),
            options.max_iter,
            1e-10,
            STAGE_FTOL,
        );
        iterations += out.iterations;
        stalled = out.stalled;
        t = out.x;
        warm = Some(out.inverse_hessian);
        let done = previous.is_some_and(|p: f64| (p - out.value).abs() <= options.tol * p.abs().max(1.0));
        previous = Some(out.value);
        if done {
            break;
        }
    }

    let interior = aff.point(&x0, &t);
    let ev = evaluate(&interior, keymap, floor);
    let mut dual_constraints = vec![Constraint::normalization(dim)];
    dual_constraints.extend_from_slice(constraints);
    // f is convex, so linearizing at any positive definite point gives a valid
    // bound; mixing towards I/d tames the gradient near the boundary
    let certify = |m: &CMatrix, e: &Evaluation| {
        e.value - trace_product(m, &e.gradient) + dual_bound(&e.gradient, &dual_constraints, options)
    };
    let mut h_lower = certify(&interior, &ev);
    if ev.value - h_lower > MIXING_TRIGGER {
        let centre = CMatrix::identity(dim, dim) * c64(1.0 / dim as f64, 0.0);
        for &w in &MIXING_WEIGHTS {
            let m = &interior * c64(1.0 - w, 0.0) + &centre * c64(w, 0.0);
            let c = certify(&m, &evaluate(&m, keymap, floor));
            h_lower = h_lower.max(c);
        }
    }

    let rho_star = DensityMatrix::from_operator_clipped(&HermitianOperator::symmetrized(interior))?;
    let primal_value = ev.value;
    // ρ* is exactly feasible unless the set was thin and had to be shifted;
    // capping by an attained value keeps the bound valid either way
    let h_lower = h_lower.min(primal_value);
    let gap = primal_value - h_lower;
    let status = if stalled || gap < options.gap_tol {
        SolveStatus::Converged
    } else {
        SolveStatus::MaxIter
    };
    Ok(OptimizerResult {
        h_lower,
        rho_star,
        primal_value,
        gap,
        iterations,
        status,
    })
}
