//! Signal sweeps, sensitivity scaling, sensitivity maps, rotation-basis
//! optimization and strategy comparisons.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolution::{
    derive_control, drive_hamiltonian, ideal_bell_probabilities, ideal_hamiltonian,
    rotated_bell_probabilities_cartesian, sensing_loop_unitary, DriveParams, RotationAngles,
    SequenceSpec, VectorField,
};
use crate::fisher::{
    cfim, figure_of_merit, jacobian_fd, noise_covariance, propagate_errors, qfim_numeric,
    FisherMatrices, Mat3, NoiseSpec, DEFAULT_STEP,
};
use crate::numerics::{evolve, kron, Operator};
use crate::quantum_state::{
    apply_unitary, ideal_bell_pair, prepare_probe, ProbeSpec, QuantumState,
};
use crate::readout::{measure_bell, spam_apply, MeasuredSignals, SpamModel};

/// Which evolution drives the sensing loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    /// Drive Hamiltonian alone, interleaved with its exact inverse at the operating point.
    IdealVectorField,
    /// Drive plus hyperfine interaction, frame-change factor and π-pulse decoupling.
    NvDrive,
}

/// One experiment configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scenario {
    pub model: Model,
    pub probe: ProbeSpec,
    pub sequence: SequenceSpec,
    pub target: DriveParams,
    /// When present its polarization replaces `probe`.
    pub spam: Option<SpamModel>,
    pub noise: NoiseSpec,
}

pub const DEVICE_RABI_MHZ: f64 = 11.2;
pub const DEVICE_DWELL_US: f64 = 0.03;
pub const DEVICE_HYPERFINE_MHZ: f64 = -2.16;
pub const DEVICE_SIGMA: f64 = 0.02;

impl Scenario {
    pub fn new(
        model: Model,
        probe: ProbeSpec,
        sequence: SequenceSpec,
        target: DriveParams,
        spam: Option<SpamModel>,
        noise: NoiseSpec,
    ) -> Result<Self> {
        let s = Self {
            model,
            probe,
            sequence,
            target,
            spam,
            noise,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.spam.is_some() && self.model != Model::NvDrive {
            return Err(Error::InvalidParameter(
                "SPAM errors apply only to the NV drive model".into(),
            ));
        }
        self.noise.validate()
    }

    /// Experimental operating point: Ω = (2π)·11.2 MHz, Δ = 0,
    /// Φ_t = 90°, t = 30 ns, A = −(2π)·2.16 MHz, U_r readout, SPAM
    /// (P, ζ, γ, η) = (0.85, 0.20, 0.15, 0.025), σ = 0.02.
    pub fn device(n_loops: usize) -> Self {
        let target = DriveParams {
            omega: TAU * DEVICE_RABI_MHZ,
            delta: 0.0,
            phi: FRAC_PI_2,
        };
        let sequence = SequenceSpec::operating_at(
            target,
            n_loops,
            DEVICE_DWELL_US,
            TAU * DEVICE_HYPERFINE_MHZ,
        )
        .expect("fixed parameters are valid")
        .with_rotation(RotationAngles::uniform());
        Self {
            model: Model::NvDrive,
            probe: ProbeSpec {
                polarization_population: 0.85,
            },
            sequence,
            target,
            spam: Some(SpamModel::experimental()),
            noise: NoiseSpec::Averaged {
                sigma: DEVICE_SIGMA,
                projection_shots: None,
            },
        }
    }

    pub fn without_spam(mut self) -> Self {
        if let Some(s) = self.spam.take() {
            self.probe = ProbeSpec {
                polarization_population: s.polarization,
            };
        }
        self
    }

    pub fn with_polarization(mut self, p: f64) -> Self {
        self.probe = ProbeSpec {
            polarization_population: p,
        };
        if let Some(s) = self.spam.as_mut() {
            s.polarization = p;
        }
        self
    }

    pub fn with_loops(mut self, n_loops: usize) -> Self {
        self.sequence.n_loops = n_loops;
        self
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = noise;
        self
    }

    pub fn polarization(&self) -> f64 {
        self.spam
            .map_or(self.probe.polarization_population, |s| s.polarization)
    }

    /// Target at which the control inverts the evolution.
    pub fn operating_point(&self) -> DriveParams {
        derive_control(self.sequence.control)
    }

    fn loop_unitary(&self, target: DriveParams) -> Result<Operator> {
        match self.model {
            Model::NvDrive => sensing_loop_unitary(target, &self.sequence),
            Model::IdealVectorField => {
                let t = self.sequence.dwell;
                let u = evolve(&drive_hamiltonian(target), t)?;
                let uc = evolve(&drive_hamiltonian(self.operating_point()), t)?.adjoint();
                Ok(kron(
                    &(&uc * &u).pow(self.sequence.n_loops),
                    &Operator::identity(2),
                ))
            }
        }
    }

    /// Probe → loop → rotation → disentangle → populations → SPAM.
    pub fn signals_at(&self, target: DriveParams) -> Result<MeasuredSignals> {
        let probe = prepare_probe(ProbeSpec::new(self.polarization())?);
        let state = apply_unitary(&probe, &self.loop_unitary(target)?)?;
        let s = measure_bell(&state, self.sequence.rotation);
        Ok(match &self.spam {
            Some(m) => spam_apply(s, m),
            None => s,
        })
    }

    pub fn signals(&self) -> Result<MeasuredSignals> {
        self.signals_at(self.target)
    }
}

/// Quantity varied by [`sweep_signal`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Omega,
    Delta,
    Phi,
    /// The rotation fraction `c` of the readout gate.
    RotationFraction,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

pub fn sweep_signal(scenario: &Scenario, axis: SweepAxis, grid: &[f64]) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("sweep grid is empty".into()));
    }
    scenario.validate()?;
    grid.par_iter()
        .map(|&value| {
            let mut sc = *scenario;
            let mut target = scenario.target;
            match axis {
                SweepAxis::Omega => target.omega = value,
                SweepAxis::Delta => target.delta = value,
                SweepAxis::Phi => target.phi = value,
                SweepAxis::RotationFraction => sc.sequence.rotation.c = value,
            }
            let s = sc.signals_at(target)?;
            Ok(SweepRow {
                value,
                p1: s.p1,
                p2: s.p2,
                p3: s.p3,
            })
        })
        .collect()
}

/// Error-propagated sensitivity of (Ω, Δ, Φ) at one loop count.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityReport {
    pub n_loops: usize,
    /// δΩ, δΔ, δΦ.
    pub std: [f64; 3],
    pub covariance: Mat3,
    pub jacobian: Mat3,
    pub signals: [f64; 3],
}

/// Jacobian of the observed signals with respect to the target, noise
/// covariance at the target, and Σ_θ = J⁻¹Σ_pJ⁻ᵀ.
pub fn sensitivity_at(scenario: &Scenario) -> Result<SensitivityReport> {
    scenario.validate()?;
    let f = |th: [f64; 3]| Ok(scenario.signals_at(DriveParams::from_array(th))?.observed());
    let jacobian = jacobian_fd(f, scenario.target.as_array(), DEFAULT_STEP)?;
    let signals = scenario.signals()?.observed();
    let sigma_p = noise_covariance(&signals, scenario.noise)?;
    let covariance = propagate_errors(&jacobian, &sigma_p)?;
    let std = [0, 1, 2].map(|i| covariance[(i, i)].max(0.0).sqrt());
    Ok(SensitivityReport {
        n_loops: scenario.sequence.n_loops,
        std,
        covariance,
        jacobian,
        signals,
    })
}

pub fn sensitivity_vs_n(scenario: &Scenario, n_values: &[usize]) -> Result<Vec<SensitivityReport>> {
    if n_values.is_empty() {
        return Err(Error::InvalidParameter("no loop counts given".into()));
    }
    if n_values.contains(&0) {
        return Err(Error::InvalidParameter("loop counts must be ≥ 1".into()));
    }
    n_values
        .par_iter()
        .map(|&n| sensitivity_at(&scenario.with_loops(n)))
        .collect()
}

/// Least-squares power law δ ∝ N^(−m).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingFit {
    pub exponent: f64,
    pub stderr: f64,
    pub points: Vec<(f64, f64)>,
}

pub fn fit_power_law(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::InvalidPoints(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|&(n, d)| !(n > 0.0 && d > 0.0 && n.is_finite() && d.is_finite()))
    {
        return Err(Error::InvalidPoints(
            "all coordinates must be positive and finite".into(),
        ));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidPoints("all N values coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (ssr / (k - 2.0) / sxx).sqrt();
    Ok(ScalingFit {
        exponent: -slope,
        stderr,
        points: points.to_vec(),
    })
}

/// Fits δΩ, δΔ and δΦ separately.
pub fn fit_reports(reports: &[SensitivityReport]) -> Result<[ScalingFit; 3]> {
    let fit = |i: usize| {
        fit_power_law(
            &reports
                .iter()
                .map(|r| (r.n_loops as f64, r.std[i]))
                .collect::<Vec<_>>(),
        )
    };
    Ok([fit(0)?, fit(1)?, fit(2)?])
}

// Ideal vector-field model: maps and optimization.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapPoint {
    pub b: f64,
    pub t: f64,
    pub value: f64,
}

/// Cartesian figure of merit δB_x² + δB_y² + δB_z² of the Bell readout
/// (optionally rotated) at field `bvec` and time `t`; infinite where the
/// Jacobian is singular.
pub fn cartesian_figure_of_merit(
    bvec: [f64; 3],
    t: f64,
    rotation: Option<RotationAngles>,
    noise: NoiseSpec,
) -> Result<f64> {
    let r = rotation.unwrap_or(RotationAngles::identity());
    let probs = |b: [f64; 3]| {
        let p = rotated_bell_probabilities_cartesian(b, t, r);
        Ok([p[0], p[1], p[2]])
    };
    let j = jacobian_fd(probs, bvec, DEFAULT_STEP)?;
    let p = rotated_bell_probabilities_cartesian(bvec, t, r);
    let sigma_p = noise_covariance(&p, noise)?;
    match propagate_errors(&j, &sigma_p) {
        Ok(s) => Ok(s.trace()),
        Err(Error::SingularJacobian { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Figure of merit over the (B, T) grid at fixed field direction (α, β),
/// row-major in `b_grid`.
pub fn sensitivity_map(
    noise: NoiseSpec,
    rotation: Option<RotationAngles>,
    b_grid: &[f64],
    t_grid: &[f64],
    angles: (f64, f64),
) -> Result<Vec<MapPoint>> {
    noise.validate()?;
    if b_grid.is_empty() || t_grid.is_empty() {
        return Err(Error::InvalidParameter("map grid is empty".into()));
    }
    if b_grid.iter().any(|&b| !(b >= 0.0)) || t_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidParameter(
            "map grid needs B ≥ 0 and T > 0".into(),
        ));
    }
    let dir = VectorField {
        b: 1.0,
        alpha: angles.0,
        beta: angles.1,
    }
    .direction();
    let cells: Vec<(f64, f64)> = b_grid
        .iter()
        .flat_map(|&b| t_grid.iter().map(move |&t| (b, t)))
        .collect();
    cells
        .par_iter()
        .map(|&(b, t)| {
            let value = cartesian_figure_of_merit(dir.map(|x| b * x), t, rotation, noise)?;
            Ok(MapPoint { b, t, value })
        })
        .collect()
}

/// Zero-field Jacobian of the rotated readout with respect to (B_x, B_y, B_z).
pub fn zero_field_jacobian(r: RotationAngles, t: f64) -> Mat3 {
    let (s1, c1) = (FRAC_PI_2 * r.c).sin_cos();
    let m = r.axis();
    let eps = |i: usize, j: usize, l: usize| -> f64 {
        match (i, j, l) {
            (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
            (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
            _ => 0.0,
        }
    };
    // retained outcomes: identity, z, x
    let rows = [None, Some(2), Some(0)];
    Mat3::from_fn(|row, l| match rows[row] {
        None => 2.0 * c1 * s1 * t * m[l],
        Some(i) => {
            let dq: f64 = -c1 * if i == l { 1.0 } else { 0.0 }
                + s1 * (0..3).map(|j| eps(i, j, l) * m[j]).sum::<f64>();
            2.0 * s1 * m[i] * t * dq
        }
    })
}

/// Zero-field figure of merit under averaged readout, σ₀²/n·Tr[(JᵀJ)⁻¹].
pub fn zero_field_objective(r: RotationAngles, sigma0: f64, n: u64, t: f64) -> f64 {
    let j = zero_field_jacobian(r, t);
    match (j.transpose() * j).try_inverse() {
        Some(inv) if inv.trace().is_finite() && inv.trace() > 0.0 => {
            sigma0 * sigma0 / n as f64 * inv.trace()
        }
        _ => f64::INFINITY,
    }
}

/// Result of one simplex search.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexResult {
    pub x: [f64; 3],
    pub value: f64,
    /// max_i |f(x_i) − f(x_best)| over the final simplex.
    pub spread: f64,
    pub converged: bool,
}

/// Nelder–Mead search from `x0` with initial edge `step`; converged when the
/// value spread drops below `tol`·max(1, |f_best|).
pub fn nelder_mead<F: Fn(&[f64; 3]) -> f64>(
    f: F,
    x0: [f64; 3],
    step: f64,
    tol: f64,
    max_iter: usize,
) -> SimplexResult {
    let eval = |x: &[f64; 3]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<([f64; 3], f64)> = (0..4)
        .map(|k| {
            let mut x = x0;
            if k > 0 {
                x[k - 1] += step;
            }
            (x, eval(&x))
        })
        .collect();
    let lerp = |a: &[f64; 3], b: &[f64; 3], t: f64| -> [f64; 3] {
        std::array::from_fn(|i| a[i] + t * (b[i] - a[i]))
    };
    let spread_of = |s: &[([f64; 3], f64)]| {
        let best = s[0].1;
        s.iter().map(|v| (v.1 - best).abs()).fold(0.0, f64::max)
    };
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = spread_of(&simplex);
        if spread.is_finite() && spread <= tol * simplex[0].1.abs().max(1.0) {
            return SimplexResult {
                x: simplex[0].0,
                value: simplex[0].1,
                spread,
                converged: true,
            };
        }
        let centroid: [f64; 3] =
            std::array::from_fn(|i| simplex[..3].iter().map(|v| v.0[i]).sum::<f64>() / 3.0);
        let worst = simplex[3];
        let xr = lerp(&centroid, &worst.0, -1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = lerp(&centroid, &worst.0, -2.0);
            let fe = eval(&xe);
            simplex[3] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = lerp(&centroid, &worst.0, -0.5);
                (x, eval(&x))
            } else {
                let x = lerp(&centroid, &worst.0, 0.5);
                (x, eval(&x))
            };
            if fc < worst.1.min(fr) {
                simplex[3] = (xc, fc);
            } else {
                let best = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    v.0 = lerp(&best, &v.0, 0.5);
                    v.1 = eval(&v.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let spread = spread_of(&simplex);
    SimplexResult {
        x: simplex[0].0,
        value: simplex[0].1,
        spread,
        converged: false,
    }
}

pub const OPTIMIZER_TOL: f64 = 1e-10;
const OPTIMIZER_MAX_ITER: usize = 4000;
const OPTIMIZER_POLISHES: usize = 4;

/// Best rotation angles found and the objective there.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationOptimum {
    pub angles: RotationAngles,
    pub value: f64,
    /// Objective at the best starting point.
    pub best_start: f64,
    pub converged_starts: usize,
}

fn fold_quarter(x: f64) -> f64 {
    let y = x.rem_euclid(PI);
    if y > FRAC_PI_2 {
        PI - y
    } else {
        y
    }
}

/// Representative of the symmetry orbit with a, b, πc/2 in [0, π/2].
pub fn canonical_angles(r: RotationAngles) -> RotationAngles {
    RotationAngles {
        a: fold_quarter(r.a),
        b: fold_quarter(r.b),
        c: fold_quarter(FRAC_PI_2 * r.c) / FRAC_PI_2,
    }
}

/// Minimizes the zero-field figure of merit over (a, b, c) from the uniform
/// rotation plus `starts − 1` seeded random starts, each polished by restarts.
pub fn optimize_rotation(
    sigma0: f64,
    n: u64,
    t: f64,
    starts: usize,
    seed: u64,
) -> Result<RotationOptimum> {
    if starts == 0 {
        return Err(Error::InvalidParameter("need at least one start".into()));
    }
    if !(sigma0 > 0.0) || n == 0 || !(t > 0.0) {
        return Err(Error::InvalidParameter(
            "σ₀, n and T must be positive".into(),
        ));
    }
    let objective =
        |x: &[f64; 3]| zero_field_objective(RotationAngles::from_array(*x), sigma0, n, t);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = 0.05;
    let starts_x: Vec<[f64; 3]> = (0..starts)
        .map(|k| {
            if k == 0 {
                RotationAngles::uniform().as_array()
            } else {
                [
                    rng.random_range(margin..FRAC_PI_2 - margin),
                    rng.random_range(margin..FRAC_PI_2 - margin),
                    rng.random_range(margin..1.0 - margin),
                ]
            }
        })
        .collect();
    let best_start = starts_x.iter().map(objective).fold(f64::INFINITY, f64::min);
    let runs: Vec<SimplexResult> = starts_x
        .par_iter()
        .map(|x0| {
            let mut res = nelder_mead(objective, *x0, 0.1, OPTIMIZER_TOL, OPTIMIZER_MAX_ITER);
            for k in 0..OPTIMIZER_POLISHES {
                let step = 1e-2 * 0.1f64.powi(k as i32);
                let next = nelder_mead(objective, res.x, step, OPTIMIZER_TOL, OPTIMIZER_MAX_ITER);
                let improved = next.value <= res.value;
                if improved {
                    res = next;
                }
                if res.converged && improved && k > 0 {
                    break;
                }
            }
            res
        })
        .collect();
    let converged: Vec<&SimplexResult> = runs.iter().filter(|r| r.converged).collect();
    let Some(best) = converged.iter().min_by(|a, b| a.value.total_cmp(&b.value)) else {
        let spread = runs.iter().map(|r| r.spread).fold(f64::INFINITY, f64::min);
        return Err(Error::NonConvergence {
            restarts: starts,
            spread,
        });
    };
    Ok(RotationOptimum {
        angles: canonical_angles(RotationAngles::from_array(best.x)),
        value: best.value,
        best_start,
        converged_starts: converged.len(),
    })
}

/// Figures of merit of the competing strategies.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyReport {
    pub sigma0: f64,
    pub n: u64,
    pub t: f64,
    /// Each component estimated separately with n/3 repetitions, averaged readout.
    pub sequential_single: f64,
    /// Uniform rotation U_r, averaged readout, from the finite-difference pipeline.
    pub uniform_rotated: f64,
    /// Optimized rotation, averaged readout.
    pub optimal_rotated: f64,
    pub optimal_angles: RotationAngles,
    /// Quantum projection limit of the simultaneous Bell scheme.
    pub projection_simultaneous: f64,
    /// Quantum projection limit of three separate single-parameter runs.
    pub projection_sequential: f64,
}

impl StrategyReport {
    /// Averaged-readout entries in units of σ₀²/(nT²).
    pub fn averaged_units(&self) -> [f64; 3] {
        let u = self.sigma0 * self.sigma0 / (self.n as f64 * self.t * self.t);
        [
            self.sequential_single / u,
            self.uniform_rotated / u,
            self.optimal_rotated / u,
        ]
    }

    /// Projection entries in units of 1/(nT²).
    pub fn projection_units(&self) -> [f64; 2] {
        let u = 1.0 / (self.n as f64 * self.t * self.t);
        [
            self.projection_simultaneous / u,
            self.projection_sequential / u,
        ]
    }
}

pub const COMPARE_STARTS: usize = 20;

pub fn compare_strategies(sigma0: f64, n: u64, t: f64, seed: u64) -> Result<StrategyReport> {
    if !(sigma0 > 0.0) || n == 0 || !(t > 0.0) {
        return Err(Error::InvalidParameter(
            "σ₀, n and T must be positive".into(),
        ));
    }
    let nf = n as f64;
    let per_component = nf / 3.0;
    let sequential_single = 3.0 * sigma0 * sigma0 / (per_component * t * t);
    let averaged = NoiseSpec::Averaged {
        sigma: sigma0 / nf.sqrt(),
        projection_shots: None,
    };
    let uniform_rotated =
        cartesian_figure_of_merit([0.0; 3], t, Some(RotationAngles::uniform()), averaged)?;
    let opt = optimize_rotation(sigma0, n, t, COMPARE_STARTS, seed)?;
    // zero-field Bell QFIM in Cartesian coordinates is 4T²·I
    let projection_simultaneous = 3.0 / (4.0 * nf * t * t);
    let projection_sequential = 3.0 / (4.0 * per_component * t * t);
    Ok(StrategyReport {
        sigma0,
        n,
        t,
        sequential_single,
        uniform_rotated,
        optimal_rotated: opt.value,
        optimal_angles: opt.angles,
        projection_simultaneous,
        projection_sequential,
    })
}

/// Numerical QFIM and Bell-measurement CFIM of the Bell probe after ideal
/// evolution for time `t`.
pub fn bell_probe_fisher(f: VectorField, t: f64) -> Result<FisherMatrices> {
    let probe = QuantumState::pure(&ideal_bell_pair())?;
    let state_fn = |th: [f64; 3]| {
        let u = kron(
            &evolve(&ideal_hamiltonian(VectorField::from_array(th)), t)?,
            &Operator::identity(2),
        );
        apply_unitary(&probe, &u)
    };
    let qfim = qfim_numeric(state_fn, f.as_array(), DEFAULT_STEP)?;
    let probs =
        |th: [f64; 3]| Ok(ideal_bell_probabilities(VectorField::from_array(th), t).to_vec());
    let c = cfim(probs, f.as_array(), DEFAULT_STEP)?;
    let jacobian = jacobian_fd(
        |th| {
            Ok(
                ideal_bell_probabilities(VectorField::from_array(th), t)[..3]
                    .try_into()
                    .expect("four outcomes"),
            )
        },
        f.as_array(),
        DEFAULT_STEP,
    )?;
    Ok(FisherMatrices {
        qfim: Some(qfim),
        cfim: Some(c.fim),
        jacobian,
    })
}

/// diag(4T², 4sin²(BT), 4sin²(BT)sin²α).
pub fn optimal_qfim(f: VectorField, t: f64) -> Mat3 {
    let s2 = (f.b * t).sin().powi(2);
    Mat3::from_diagonal(&Vector3::new(
        4.0 * t * t,
        4.0 * s2,
        4.0 * s2 * f.alpha.sin().powi(2),
    ))
}

/// Bell pair after N steps of ideal evolution at θ, each followed by the
/// exact inverse at θ₀.
pub fn sequential_state(
    theta: VectorField,
    theta0: VectorField,
    dwell: f64,
    n_steps: usize,
) -> Result<QuantumState> {
    let u = evolve(&ideal_hamiltonian(theta), dwell)?;
    let uc = evolve(&ideal_hamiltonian(theta0), dwell)?.adjoint();
    let step = kron(&(&uc * &u), &Operator::identity(2));
    QuantumState::pure(&step.pow(n_steps).apply(&ideal_bell_pair()))
}

/// Quantum Cramér–Rao figure of merit of the sequential scheme, from the
/// numerical QFIM of [`sequential_state`] with `shots` repetitions.
pub fn sequential_figure_of_merit(
    f: VectorField,
    dwell: f64,
    n_steps: usize,
    shots: u64,
) -> Result<f64> {
    if n_steps == 0 || shots == 0 {
        return Err(Error::InvalidParameter(
            "steps and shots must be ≥ 1".into(),
        ));
    }
    let state_fn = |th: [f64; 3]| sequential_state(VectorField::from_array(th), f, dwell, n_steps);
    let q = qfim_numeric(state_fn, f.as_array(), DEFAULT_STEP)?;
    let inv = q.try_inverse().ok_or(Error::SingularJacobian {
        condition: f64::INFINITY,
    })?;
    Ok(figure_of_merit(&(inv / shots as f64), f))
}

/// (1/4nN²)[1/t² + 2B²/sin²(Bt)].
pub fn sequential_figure_of_merit_closed_form(
    f: VectorField,
    dwell: f64,
    n_steps: usize,
    shots: u64,
) -> f64 {
    let (n, nn) = (shots as f64, n_steps as f64);
    let s = (f.b * dwell).sin();
    (1.0 / (dwell * dwell) + 2.0 * f.b * f.b / (s * s)) / (4.0 * n * nn * nn)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionShotRow {
    pub n_loops: usize,
    pub projection: [f64; 3],
    pub shot: [f64; 3],
}

/// Sensitivity vs N under quantum projection noise of `shots` repetitions
/// and under σ²I shot noise, on otherwise identical pipelines.
pub fn projection_vs_shot(
    scenario: &Scenario,
    n_values: &[usize],
    shots: u64,
    sigma: f64,
) -> Result<Vec<ProjectionShotRow>> {
    let proj = sensitivity_vs_n(
        &scenario.with_noise(NoiseSpec::QuantumProjection { n: shots }),
        n_values,
    )?;
    let shot = sensitivity_vs_n(
        &scenario.with_noise(NoiseSpec::Averaged {
            sigma,
            projection_shots: None,
        }),
        n_values,
    )?;
    Ok(proj
        .iter()
        .zip(&shot)
        .map(|(p, s)| ProjectionShotRow {
            n_loops: p.n_loops,
            projection: p.std,
            shot: s.std,
        })
        .collect())
}
