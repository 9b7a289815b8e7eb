//! Bell-basis readout and SPAM error models.

use crate::error::{Error, Result};
use crate::evolution::{rotation_gate, RotationAngles};
use crate::numerics::C64;
use crate::quantum_state::{
    apply_unitary, disentangler, ideal_bell_basis, populations, QuantumState,
};

const SIMPLEX_TOL: f64 = 1e-9;

/// State preparation (P) and linear leakage (ζ, γ, η) errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpamModel {
    pub polarization: f64,
    pub zeta: f64,
    pub gamma: f64,
    pub eta: f64,
}

impl SpamModel {
    pub fn new(polarization: f64, zeta: f64, gamma: f64, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&polarization) {
            return Err(Error::InvalidParameter(format!(
                "polarization {polarization} outside [0, 1]"
            )));
        }
        if !(0.0..=1.0).contains(&zeta) {
            return Err(Error::InvalidParameter(format!(
                "ζ = {zeta} outside [0, 1]"
            )));
        }
        if !(gamma >= 0.0 && eta >= 0.0) {
            return Err(Error::InvalidParameter(
                "γ and η must be non-negative".into(),
            ));
        }
        if 2.0 * gamma + 2.0 * eta > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "2γ + 2η = {} exceeds 1",
                2.0 * gamma + 2.0 * eta
            )));
        }
        Ok(Self {
            polarization,
            zeta,
            gamma,
            eta,
        })
    }

    /// Leakage-free model with the given polarization.
    pub fn ideal(polarization: f64) -> Self {
        Self {
            polarization,
            zeta: 0.0,
            gamma: 0.0,
            eta: 0.0,
        }
    }

    /// Values quoted for the experimental device: P = 0.85, ζ = 0.20, γ = 0.15, η = 0.025.
    pub fn experimental() -> Self {
        Self {
            polarization: 0.85,
            zeta: 0.20,
            gamma: 0.15,
            eta: 0.025,
        }
    }

    /// M with p′ = M p on (p₁, p₂, p₃).
    pub fn leakage_matrix(&self) -> [[f64; 3]; 3] {
        [
            [1.0, 0.0, 0.0],
            [0.0, 1.0 - self.zeta, self.eta],
            [0.0, 0.0, 1.0 - 2.0 * self.gamma - 2.0 * self.eta],
        ]
    }
}

/// Three measured populations plus the inferred fourth before SPAM.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasuredSignals {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: Option<f64>,
}

impl MeasuredSignals {
    pub fn from_populations(p: [f64; 4]) -> Self {
        Self {
            p1: p[0],
            p2: p[1],
            p3: p[2],
            p4: Some(p[3]),
        }
    }

    pub fn observed(&self) -> [f64; 3] {
        [self.p1, self.p2, self.p3]
    }
}

/// Rotation gate, disentangler, then populations in (p₁, p₂, p₃, p₄) order.
pub fn measure_bell(state: &QuantumState, r: RotationAngles) -> MeasuredSignals {
    let u = &disentangler() * &rotation_gate(r);
    let out = apply_unitary(state, &u).expect("rotation and disentangler are unitary");
    let p = populations(&out).map(|x| x.clamp(0.0, 1.0));
    MeasuredSignals::from_populations(p)
}

/// p₁′ = p₁, p₂′ = (1−ζ)p₂ + ηp₃, p₃′ = (1−2γ−2η)p₃; p₄ is dropped.
pub fn spam_apply(signals: MeasuredSignals, model: &SpamModel) -> MeasuredSignals {
    let m = model.leakage_matrix();
    let p = signals.observed();
    let out: [f64; 3] = std::array::from_fn(|i| (0..3).map(|j| m[i][j] * p[j]).sum());
    MeasuredSignals {
        p1: out[0],
        p2: out[1],
        p3: out[2],
        p4: None,
    }
}

pub fn check_probability_vector(p: &[f64]) -> Result<()> {
    if p.iter()
        .any(|x| !x.is_finite() || *x < -SIMPLEX_TOL || *x > 1.0 + SIMPLEX_TOL)
    {
        return Err(Error::InvalidProbability(format!(
            "entries {p:?} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Single-shot confusion: each outcome is misreported as each of the other
/// three with probability ε/3.
pub fn confusion_apply(p: [f64; 4], epsilon: f64) -> Result<[f64; 4]> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidRate(epsilon));
    }
    check_probability_vector(&p)?;
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidProbability(format!("entries sum to {total}")));
    }
    Ok(std::array::from_fn(|j| {
        let others: f64 = (0..4).filter(|&i| i != j).map(|i| p[i]).sum();
        (1.0 - epsilon) * p[j] + epsilon / 3.0 * others
    }))
}

/// Projection of a state of the ideal model onto the Bell basis
/// (Φ, σ_zΦ, σ_xΦ, σ_yΦ), optionally measured in the basis rotated by `r`.
pub fn ideal_bell_readout(state: &QuantumState, r: Option<RotationAngles>) -> [f64; 4] {
    let state = match r {
        Some(r) => apply_unitary(state, &rotation_gate(r).adjoint()).expect("rotation is unitary"),
        None => state.clone(),
    };
    let basis = ideal_bell_basis();
    std::array::from_fn(|k| state.overlap(&basis[k]).max(0.0))
}

/// Projection of a pure ket onto the ideal Bell basis.
pub fn ideal_bell_amplitudes(ket: &[C64]) -> [C64; 4] {
    let basis = ideal_bell_basis();
    std::array::from_fn(|k| basis[k].iter().zip(ket).map(|(a, b)| a.conj() * b).sum())
}
