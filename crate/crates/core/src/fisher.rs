//! Fisher information, noise covariances and error propagation.
//!
//! All matrices are 3×3 over a three-component parameter vector θ. Outcome
//! vectors are reduced to their first three entries, the fourth being fixed by
//! normalization.

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::evolution::VectorField;
use crate::numerics::{eig_hermitian, re, Operator};
use crate::quantum_state::QuantumState;
use crate::readout::{check_probability_vector, confusion_apply};

pub type Mat3 = Matrix3<f64>;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const EIGEN_PAIR_THRESHOLD: f64 = 1e-12;
pub const OUTCOME_THRESHOLD: f64 = 1e-12;
pub const CONDITION_LIMIT: f64 = 1e12;

/// Readout noise model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseSpec {
    /// Multinomial statistics of `n` projective shots.
    QuantumProjection { n: u64 },
    /// Multinomial statistics after symmetric misclassification at rate ε.
    SingleShot { n: u64, epsilon: f64 },
    /// Gaussian photon shot noise σ per signal, optionally plus the
    /// multinomial term of `projection_shots` shots.
    Averaged {
        sigma: f64,
        projection_shots: Option<u64>,
    },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::QuantumProjection { n: 0 } => {
                Err(Error::InvalidParameter("shot count must be ≥ 1".into()))
            }
            NoiseSpec::SingleShot { n: 0, .. } => {
                Err(Error::InvalidParameter("shot count must be ≥ 1".into()))
            }
            NoiseSpec::SingleShot { epsilon, .. } if !(0.0..1.0).contains(&epsilon) => {
                Err(Error::InvalidRate(epsilon))
            }
            NoiseSpec::Averaged { sigma, .. } if !(sigma > 0.0) || !sigma.is_finite() => Err(
                Error::InvalidParameter(format!("σ = {sigma} must be positive")),
            ),
            NoiseSpec::Averaged {
                projection_shots: Some(0),
                ..
            } => Err(Error::InvalidParameter(
                "projection shot count must be ≥ 1".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Fisher matrices and Jacobian at one parameter point.
#[derive(Clone, Debug, PartialEq)]
pub struct FisherMatrices {
    pub qfim: Option<Mat3>,
    pub cfim: Option<Mat3>,
    pub jacobian: Mat3,
}

/// Choice of weight matrix in the scalar figure of merit Tr[QFIM·W].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weight {
    Identity,
    /// diag(1, 1/B², 1/(B² sin²α)).
    Adapted,
}

pub fn weight_matrix(weight: Weight, f: VectorField) -> Result<Mat3> {
    match weight {
        Weight::Identity => Ok(Mat3::identity()),
        Weight::Adapted => {
            let s = f.alpha.sin();
            if f.b == 0.0 || s == 0.0 {
                return Err(Error::InvalidParameter(
                    "adapted weight needs B > 0 and sin α ≠ 0".into(),
                ));
            }
            let b2 = f.b * f.b;
            Ok(Mat3::from_diagonal(&Vector3::new(
                1.0,
                1.0 / b2,
                1.0 / (b2 * s * s),
            )))
        }
    }
}

fn fd_steps(theta: [f64; 3], step: f64) -> [f64; 3] {
    theta.map(|x| step * x.abs().max(1.0))
}

fn shifted(theta: [f64; 3], j: usize, h: f64) -> [f64; 3] {
    let mut t = theta;
    t[j] += h;
    t
}

fn check_step(step: f64) -> Result<()> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step {step} must be positive"
        )));
    }
    Ok(())
}

/// Quantum Fisher information matrix of θ ↦ ρ(θ) by central differences.
///
/// QFI_ij = 2 Σ_{k,h} Re[⟨k|∂_iρ|h⟩⟨h|∂_jρ|k⟩] / (λ_k + λ_h), summed over
/// eigenpairs with λ_k + λ_h above 1e−12.
pub fn qfim_numeric<F>(state_fn: F, theta: [f64; 3], step: f64) -> Result<Mat3>
where
    F: Fn([f64; 3]) -> Result<QuantumState>,
{
    check_step(step)?;
    let rho = state_fn(theta)?;
    let (lambda, v) = eig_hermitian(rho.rho())?;
    let vd = v.adjoint();
    let hs = fd_steps(theta, step);
    let mut derivs: Vec<Operator> = Vec::with_capacity(3);
    for j in 0..3 {
        let plus = state_fn(shifted(theta, j, hs[j]))?;
        let minus = state_fn(shifted(theta, j, -hs[j]))?;
        let d = (plus.rho() - minus.rho()).scale(re(1.0 / (2.0 * hs[j])));
        derivs.push(&(&vd * &d) * &v);
    }
    let n = lambda.len();
    let mut any_pair = false;
    let mut q = Mat3::zeros();
    for k in 0..n {
        for h in 0..n {
            let denom = lambda[k] + lambda[h];
            if denom <= EIGEN_PAIR_THRESHOLD {
                continue;
            }
            any_pair = true;
            for i in 0..3 {
                for j in i..3 {
                    let term = (derivs[i][(k, h)] * derivs[j][(h, k)]).re;
                    q[(i, j)] += 2.0 * term / denom;
                }
            }
        }
    }
    if !any_pair {
        return Err(Error::DegenerateState);
    }
    for i in 0..3 {
        for j in 0..i {
            q[(i, j)] = q[(j, i)];
        }
    }
    Ok(q)
}

/// Classical Fisher information of an outcome distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct Cfim {
    pub fim: Mat3,
    /// Outcomes left out because p_k ≤ 1e−12.
    pub skipped: usize,
}

/// FIM_ij = Σ_k ∂_i p_k ∂_j p_k / p_k by central differences.
pub fn cfim<F>(probs_fn: F, theta: [f64; 3], step: f64) -> Result<Cfim>
where
    F: Fn([f64; 3]) -> Result<Vec<f64>>,
{
    check_step(step)?;
    let p = probs_fn(theta)?;
    let hs = fd_steps(theta, step);
    let mut grads: Vec<Vec<f64>> = Vec::with_capacity(3);
    for j in 0..3 {
        let plus = probs_fn(shifted(theta, j, hs[j]))?;
        let minus = probs_fn(shifted(theta, j, -hs[j]))?;
        if plus.len() != p.len() || minus.len() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                found: plus.len().min(minus.len()),
            });
        }
        grads.push(
            plus.iter()
                .zip(&minus)
                .map(|(a, b)| (a - b) / (2.0 * hs[j]))
                .collect(),
        );
    }
    let mut fim = Mat3::zeros();
    let mut skipped = 0;
    for (k, &pk) in p.iter().enumerate() {
        if pk <= OUTCOME_THRESHOLD {
            skipped += 1;
            continue;
        }
        for i in 0..3 {
            for j in 0..3 {
                fim[(i, j)] += grads[i][k] * grads[j][k] / pk;
            }
        }
    }
    Ok(Cfim { fim, skipped })
}

/// Central-difference Jacobian J_ij = ∂f_i/∂θ_j with h_j = step·max(1, |θ_j|).
pub fn jacobian_fd<F>(f: F, theta: [f64; 3], step: f64) -> Result<Mat3>
where
    F: Fn([f64; 3]) -> Result<[f64; 3]>,
{
    check_step(step)?;
    let hs = fd_steps(theta, step);
    let mut jac = Mat3::zeros();
    for j in 0..3 {
        let plus = f(shifted(theta, j, hs[j]))?;
        let minus = f(shifted(theta, j, -hs[j]))?;
        for i in 0..3 {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * hs[j]);
        }
    }
    Ok(jac)
}

fn multinomial_covariance(p: &[f64], n: u64) -> Mat3 {
    let n = n as f64;
    Mat3::from_fn(|i, j| {
        if i == j {
            p[i] * (1.0 - p[i]) / n
        } else {
            -p[i] * p[j] / n
        }
    })
}

/// Covariance of the three retained signals under `spec`.
pub fn noise_covariance(p: &[f64], spec: NoiseSpec) -> Result<Mat3> {
    spec.validate()?;
    if p.len() != 3 && p.len() != 4 {
        return Err(Error::InvalidProbability(format!(
            "expected 3 or 4 outcomes, got {}",
            p.len()
        )));
    }
    check_probability_vector(p)?;
    let retained: f64 = p[..3].iter().sum();
    if retained > 1.0 + 1e-9 {
        return Err(Error::InvalidProbability(format!(
            "retained outcomes sum to {retained}"
        )));
    }
    match spec {
        NoiseSpec::QuantumProjection { n } => Ok(multinomial_covariance(p, n)),
        NoiseSpec::SingleShot { n, epsilon } => {
            let full = if p.len() == 4 {
                [p[0], p[1], p[2], p[3]]
            } else {
                [p[0], p[1], p[2], (1.0 - retained).max(0.0)]
            };
            let q = confusion_apply(full, epsilon)?;
            Ok(multinomial_covariance(&q, n))
        }
        NoiseSpec::Averaged {
            sigma,
            projection_shots,
        } => {
            let shot = Mat3::identity() * (sigma * sigma);
            Ok(match projection_shots {
                Some(n) => shot + multinomial_covariance(p, n),
                None => shot,
            })
        }
    }
}

/// Ratio of extreme singular values; infinite when the smallest vanishes.
pub fn condition_number(m: &Mat3) -> f64 {
    let sv = m.svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if !max.is_finite() || !min.is_finite() {
        return f64::INFINITY;
    }
    if min <= 0.0 {
        return f64::INFINITY;
    }
    max / min
}

/// Σ_θ = J⁻¹ Σ_p J⁻ᵀ.
pub fn propagate_errors(jacobian: &Mat3, sigma_p: &Mat3) -> Result<Mat3> {
    let condition = condition_number(jacobian);
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::SingularJacobian { condition });
    }
    let inv = jacobian
        .try_inverse()
        .ok_or(Error::SingularJacobian { condition })?;
    let s = inv * sigma_p * inv.transpose();
    Ok((s + s.transpose()) * 0.5)
}

/// δB² + B²δα² + B² sin²α δβ² = Tr[diag(1, B², B² sin²α)·Σ].
pub fn figure_of_merit(sigma_theta: &Mat3, f: VectorField) -> f64 {
    let b2 = f.b * f.b;
    let s = f.alpha.sin();
    sigma_theta[(0, 0)] + b2 * sigma_theta[(1, 1)] + b2 * s * s * sigma_theta[(2, 2)]
}

/// ∂(B_x, B_y, B_z)/∂(B, α, β).
pub fn spherical_to_cartesian_jacobian(f: VectorField) -> Mat3 {
    let (sa, ca) = f.alpha.sin_cos();
    let (sb, cb) = f.beta.sin_cos();
    let b = f.b;
    Mat3::new(
        sa * cb,
        b * ca * cb,
        -b * sa * sb,
        sa * sb,
        b * ca * sb,
        b * sa * cb,
        ca,
        -b * sa,
        0.0,
    )
}

/// Zero-field limit of Tr[QFIM·W] for the mixed probe with Bloch polarization P.
///
/// Adapted weight: T²(2 + P²). Identity weight: T²[1 − (1 − P²) sin²α cos²β].
pub fn mixed_probe_scalar_qfi(p_bloch: f64, f: VectorField, t: f64, weight: Weight) -> Result<f64> {
    if !(-1.0..=1.0).contains(&p_bloch) {
        return Err(Error::InvalidParameter(format!(
            "Bloch polarization {p_bloch} outside [-1, 1]"
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "evolution time {t} must be non-negative"
        )));
    }
    let p2 = p_bloch * p_bloch;
    let t2 = t * t;
    Ok(match weight {
        Weight::Adapted => t2 * (2.0 + p2),
        Weight::Identity => {
            let (sa, cb) = (f.alpha.sin(), f.beta.cos());
            t2 * (1.0 - (1.0 - p2) * sa * sa * cb * cb)
        }
    })
}

/// Multinomial counts by successive conditional binomial draws.
pub fn sample_multinomial<R: rand::Rng>(rng: &mut R, n: u64, p: &[f64]) -> Result<Vec<u64>> {
    check_probability_vector(p)?;
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidProbability(format!("entries sum to {total}")));
    }
    let mut counts = Vec::with_capacity(p.len());
    let mut remaining = n;
    let mut mass = 1.0;
    for (k, &pk) in p.iter().enumerate() {
        if k + 1 == p.len() {
            counts.push(remaining);
            break;
        }
        let c = if remaining == 0 || pk <= 0.0 {
            0
        } else if pk >= mass {
            remaining
        } else {
            Binomial::new(remaining, (pk / mass).clamp(0.0, 1.0))
                .map_err(|e| Error::InvalidProbability(e.to_string()))?
                .sample(rng)
        };
        counts.push(c);
        remaining -= c;
        mass -= pk;
    }
    Ok(counts)
}

/// Empirical covariance of the first three outcome frequencies over `draws`
/// seeded multinomial experiments of `shots` shots each.
pub fn monte_carlo_covariance(p: &[f64], shots: u64, draws: usize, seed: u64) -> Result<Mat3> {
    if shots == 0 || draws < 2 {
        return Err(Error::InvalidParameter(
            "need at least one shot and two draws".into(),
        ));
    }
    let full: Vec<f64> = if p.len() == 3 {
        let rest = (1.0 - p.iter().sum::<f64>()).max(0.0);
        vec![p[0], p[1], p[2], rest]
    } else {
        p.to_vec()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mean = Vector3::zeros();
    let mut m2 = Mat3::zeros();
    for k in 0..draws {
        let counts = sample_multinomial(&mut rng, shots, &full)?;
        let x = Vector3::new(counts[0] as f64, counts[1] as f64, counts[2] as f64) / shots as f64;
        // Welford update
        let delta = x - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (x - mean).transpose();
    }
    Ok(m2 / (draws - 1) as f64)
}

/// Symmetric within `tol` and no eigenvalue below −`tol`.
pub fn is_symmetric_psd(m: &Mat3, tol: f64) -> bool {
    if (m - m.transpose()).abs().max() > tol {
        return false;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min() >= -tol
}
