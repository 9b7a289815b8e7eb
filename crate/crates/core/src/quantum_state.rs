//! Two-qubit density matrices, the Bell probe and population readout.
//!
//! Computational labeling of the sensor (electron) ⊗ ancilla (nucleus) space:
//!
//! | index | level      |
//! |-------|------------|
//! | 0     | \|0, +1⟩   |
//! | 1     | \|0, 0⟩    |
//! | 2     | \|−1, +1⟩  |
//! | 3     | \|−1, 0⟩   |
//!
//! The electron is the first Kronecker factor and σ_z has eigenvalue +1 on the
//! first state of each factor. In this labeling |Φ±⟩ = (e₁ ± e₂)/√2.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

use crate::error::{Error, Result};
use crate::numerics::{
    c, eig_hermitian, evolve, kron, pauli_x, pauli_y, pauli_z, re, Operator, C64,
};

pub const TRACE_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-9;
pub const STATE_UNITARY_TOL: f64 = 1e-9;

pub const IDX_0_PLUS1: usize = 0;
pub const IDX_0_0: usize = 1;
pub const IDX_M1_PLUS1: usize = 2;
pub const IDX_M1_0: usize = 3;

/// Density matrix of the two-qubit system.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    rho: Operator,
}

impl QuantumState {
    pub fn new(rho: Operator) -> Result<Self> {
        if rho.dim() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                found: rho.dim(),
            });
        }
        let deviation = rho.hermiticity_deviation();
        if deviation > 1e-10 {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {deviation:.3e})"
            )));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let (vals, _) = eig_hermitian(&rho)?;
        if vals[0] < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {:.3e}",
                vals[0]
            )));
        }
        Ok(Self { rho })
    }

    /// Pure state |ψ⟩⟨ψ|; `ket` is normalized first.
    pub fn pure(ket: &[C64]) -> Result<Self> {
        if ket.len() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                found: ket.len(),
            });
        }
        let norm = ket.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("zero or non-finite ket".into()));
        }
        let k: Vec<C64> = ket.iter().map(|z| z / norm).collect();
        Self::new(Operator::outer(&k, &k))
    }

    pub fn basis(index: usize) -> Self {
        Self {
            rho: Operator::outer(&basis_ket(index), &basis_ket(index)),
        }
    }

    pub fn maximally_mixed() -> Self {
        Self {
            rho: Operator::identity(4).scale(re(0.25)),
        }
    }

    pub fn rho(&self) -> &Operator {
        &self.rho
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eig_hermitian(&self.rho)
            .expect("density matrix is Hermitian")
            .0
    }

    /// ⟨ψ|ρ|ψ⟩ for a normalized ket.
    pub fn overlap(&self, ket: &[C64]) -> f64 {
        let rk = self.rho.apply(ket);
        ket.iter()
            .zip(&rk)
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            .re
    }

    /// Mixture Σ w_k ρ_k without re-validation of the weights.
    pub(crate) fn from_trusted(rho: Operator) -> Self {
        Self { rho }
    }
}

/// Probe preparation settings; `polarization_population` is the mixture weight P.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeSpec {
    pub polarization_population: f64,
}

impl ProbeSpec {
    pub fn new(polarization_population: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&polarization_population) {
            return Err(Error::InvalidParameter(format!(
                "polarization population {polarization_population} outside [0, 1]"
            )));
        }
        Ok(Self {
            polarization_population,
        })
    }

    pub fn pure() -> Self {
        Self {
            polarization_population: 1.0,
        }
    }

    pub fn bloch(&self) -> f64 {
        population_to_bloch(self.polarization_population)
    }
}

pub fn population_to_bloch(p: f64) -> f64 {
    2.0 * p - 1.0
}

pub fn bloch_to_population(p_bloch: f64) -> f64 {
    (1.0 + p_bloch) / 2.0
}

pub fn basis_ket(index: usize) -> Vec<C64> {
    assert!(index < 4, "basis index {index} out of range");
    let mut v = vec![re(0.0); 4];
    v[index] = re(1.0);
    v
}

pub fn phi_plus() -> Vec<C64> {
    vec![re(0.0), re(FRAC_1_SQRT_2), re(FRAC_1_SQRT_2), re(0.0)]
}

pub fn phi_minus() -> Vec<C64> {
    vec![re(0.0), re(FRAC_1_SQRT_2), re(-FRAC_1_SQRT_2), re(0.0)]
}

/// ρ = P|Φ₊⟩⟨Φ₊| + (1−P)|Φ₋⟩⟨Φ₋|.
pub fn prepare_probe(spec: ProbeSpec) -> QuantumState {
    let p = spec.polarization_population.clamp(0.0, 1.0);
    let plus = Operator::outer(&phi_plus(), &phi_plus()).scale(re(p));
    let minus = Operator::outer(&phi_minus(), &phi_minus()).scale(re(1.0 - p));
    QuantumState::from_trusted(&plus + &minus)
}

/// Nuclear π/2 rotation exp(+iπσ_y/4) followed by an electron π rotation
/// exp(+iπσ_y/2) selective on nuclear |+1⟩.
///
/// Maps |0,+1⟩ to −|Φ₊⟩ and |0,0⟩ to |Φ₋⟩.
pub fn entangler() -> Operator {
    let i2 = Operator::identity(2);
    let nuclear_half = evolve(&pauli_y(), -FRAC_PI_4).expect("Pauli is Hermitian");
    let electron_pi = evolve(&pauli_y(), -FRAC_PI_2).expect("Pauli is Hermitian");
    let on_plus1 = Operator::diagonal(&[1.0, 0.0]);
    let on_zero = Operator::diagonal(&[0.0, 1.0]);
    let selective = &kron(&electron_pi, &on_plus1) + &kron(&i2, &on_zero);
    &selective * &kron(&i2, &nuclear_half)
}

pub fn disentangler() -> Operator {
    entangler().adjoint()
}

/// UρU†; fails when `u` deviates from unitarity by more than 1e−9.
pub fn apply_unitary(state: &QuantumState, u: &Operator) -> Result<QuantumState> {
    if u.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: u.dim(),
        });
    }
    let deviation = u.unitarity_deviation();
    if deviation > STATE_UNITARY_TOL {
        return Err(Error::NotUnitary { deviation });
    }
    if is_diagonal(u) {
        // phases only touch coherences; |u_ii| = 1 leaves the diagonal as is
        let mut rho = state.rho().clone();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    rho[(i, j)] = u[(i, i)] * rho[(i, j)] * u[(j, j)].conj();
                }
            }
        }
        return Ok(QuantumState::from_trusted(rho));
    }
    let rho = &(u * state.rho()) * &u.adjoint();
    // restore exact Hermiticity lost to roundoff
    let rho = (&rho + &rho.adjoint()).scale(re(0.5));
    Ok(QuantumState::from_trusted(rho))
}

fn is_diagonal(u: &Operator) -> bool {
    let n = u.dim();
    (0..n).all(|i| (0..n).all(|j| i == j || u[(i, j)] == re(0.0)))
}

/// (p₁, p₂, p₃, p₄) = Pr(|−1,+1⟩, |−1,0⟩, |0,0⟩, |0,+1⟩).
pub fn populations(state: &QuantumState) -> [f64; 4] {
    let d = state.rho().diag_real();
    [d[IDX_M1_PLUS1], d[IDX_M1_0], d[IDX_0_0], d[IDX_0_PLUS1]]
}

/// Wootters concurrence max(0, λ₁ − λ₂ − λ₃ − λ₄), λ the descending square
/// roots of the spectrum of √ρ ρ̃ √ρ with ρ̃ = (σ_y⊗σ_y) ρ* (σ_y⊗σ_y).
pub fn concurrence(state: &QuantumState) -> f64 {
    let rho = state.rho();
    let (vals, vecs) = eig_hermitian(rho).expect("density matrix is Hermitian");
    let sqrt_vals: Vec<f64> = vals.iter().map(|&v| v.max(0.0).sqrt()).collect();
    let sqrt_rho = &(&vecs * &Operator::diagonal(&sqrt_vals)) * &vecs.adjoint();
    let yy = kron(&pauli_y(), &pauli_y());
    let conj =
        Operator::from_vec(4, rho.entries().iter().map(|z| z.conj()).collect()).expect("finite");
    let tilde = &(&yy * &conj) * &yy;
    let r = &(&sqrt_rho * &tilde) * &sqrt_rho;
    let r = (&r + &r.adjoint()).scale(re(0.5));
    let (mu, _) = eig_hermitian(&r).expect("symmetrized");
    let mut lam: Vec<f64> = mu.iter().map(|&m| m.max(0.0).sqrt()).collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    (lam[0] - lam[1] - lam[2] - lam[3]).clamp(0.0, 1.0)
}

// Ideal vector-field model. Standard two-qubit labels |s a⟩ with s the sensor.

/// Φ = (|00⟩ + |11⟩)/√2.
pub fn ideal_bell_pair() -> Vec<C64> {
    vec![re(FRAC_1_SQRT_2), re(0.0), re(0.0), re(FRAC_1_SQRT_2)]
}

/// Bell basis (Φ, σ_z⊗I Φ, σ_x⊗I Φ, σ_y⊗I Φ).
pub fn ideal_bell_basis() -> [Vec<C64>; 4] {
    let phi = ideal_bell_pair();
    let i2 = Operator::identity(2);
    let on = |p: Operator| kron(&p, &i2).apply(&phi);
    [phi.clone(), on(pauli_z()), on(pauli_x()), on(pauli_y())]
}

/// CNOT·(H⊗I) applied to |0⟩⟨0| ⊗ (I + P σ_z)/2 with P the Bloch polarization.
pub fn ideal_mixed_probe(p_bloch: f64) -> Result<QuantumState> {
    if !(-1.0..=1.0).contains(&p_bloch) {
        return Err(Error::InvalidParameter(format!(
            "Bloch polarization {p_bloch} outside [-1, 1]"
        )));
    }
    let ancilla = &Operator::identity(2) + &pauli_z().scale(re(p_bloch));
    let rho0 = kron(&Operator::diagonal(&[1.0, 0.0]), &ancilla.scale(re(0.5)));
    let h = Operator::from_rows([
        [re(FRAC_1_SQRT_2), re(FRAC_1_SQRT_2)],
        [re(FRAC_1_SQRT_2), re(-FRAC_1_SQRT_2)],
    ]);
    let cnot = Operator::from_rows([
        [re(1.0), re(0.0), re(0.0), re(0.0)],
        [re(0.0), re(1.0), re(0.0), re(0.0)],
        [re(0.0), re(0.0), re(0.0), re(1.0)],
        [re(0.0), re(0.0), re(1.0), re(0.0)],
    ]);
    let u = &cnot * &kron(&h, &Operator::identity(2));
    apply_unitary(&QuantumState::from_trusted(rho0), &u)
}

/// Global phase e^{iγ}·I₄.
pub fn global_phase(gamma: f64) -> Operator {
    Operator::identity(4).scale(c(gamma.cos(), gamma.sin()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn probe_pure_and_mixed() {
        let s = prepare_probe(ProbeSpec::pure());
        assert!((s.overlap(&phi_plus()) - 1.0).abs() < 1e-15);

        let s = prepare_probe(ProbeSpec::new(0.85).unwrap());
        let mut ev = s.eigenvalues();
        ev.sort_by(|a, b| b.total_cmp(a));
        assert!(close(&ev, &[0.85, 0.15, 0.0, 0.0], 1e-12));
        assert!((s.overlap(&phi_minus()) - 0.15).abs() < 1e-15);
    }

    #[test]
    fn probe_invariants_hold() {
        for p in [0.0, 0.25, 0.5, 0.85, 1.0] {
            let s = prepare_probe(ProbeSpec::new(p).unwrap());
            assert!(QuantumState::new(s.rho().clone()).is_ok());
        }
        assert!(ProbeSpec::new(1.2).is_err());
        assert!(ProbeSpec::new(-0.1).is_err());
    }

    #[test]
    fn concurrence_of_probe() {
        assert!((concurrence(&prepare_probe(ProbeSpec::pure())) - 1.0).abs() < 1e-9);
        assert!(concurrence(&prepare_probe(ProbeSpec::new(0.5).unwrap())).abs() < 1e-9);
        assert!((concurrence(&prepare_probe(ProbeSpec::new(0.85).unwrap())) - 0.7).abs() < 1e-9);
        assert!(concurrence(&QuantumState::basis(0)).abs() < 1e-9);
        assert!(concurrence(&QuantumState::maximally_mixed()).abs() < 1e-9);
    }

    #[test]
    fn entangler_maps_to_bell_states() {
        let e = entangler();
        assert!(e.unitarity_deviation() < 1e-14);
        let out = e.apply(&basis_ket(IDX_0_PLUS1));
        let expected: Vec<C64> = phi_plus().iter().map(|z| -z).collect();
        assert!(out
            .iter()
            .zip(&expected)
            .all(|(a, b)| (a - b).norm() < 1e-15));
        let out = e.apply(&basis_ket(IDX_0_0));
        assert!(out
            .iter()
            .zip(&phi_minus())
            .all(|(a, b)| (a - b).norm() < 1e-15));

        let s = apply_unitary(&QuantumState::basis(IDX_0_PLUS1), &e).unwrap();
        assert!(s.rho().distance(prepare_probe(ProbeSpec::pure()).rho()) < 1e-15);
    }

    #[test]
    fn apply_unitary_identity_and_involution() {
        let s = prepare_probe(ProbeSpec::new(0.85).unwrap());
        assert_eq!(
            apply_unitary(&s, &Operator::identity(4)).unwrap().rho(),
            s.rho()
        );
        let x = kron(&pauli_x(), &Operator::identity(2));
        let twice = apply_unitary(&apply_unitary(&s, &x).unwrap(), &x).unwrap();
        assert!(twice.rho().distance(s.rho()) < 1e-15);
    }

    #[test]
    fn apply_unitary_rejects_non_unitary() {
        let s = QuantumState::maximally_mixed();
        let m = Operator::identity(4).scale(re(1.1));
        assert!(matches!(
            apply_unitary(&s, &m),
            Err(Error::NotUnitary { .. })
        ));
        assert!(matches!(
            apply_unitary(&s, &Operator::identity(2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn populations_in_signal_order() {
        assert_eq!(
            populations(&QuantumState::basis(IDX_M1_PLUS1)),
            [1.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(populations(&QuantumState::maximally_mixed()), [0.25; 4]);
        let s = apply_unitary(
            &prepare_probe(ProbeSpec::new(0.85).unwrap()),
            &disentangler(),
        )
        .unwrap();
        assert!(close(&populations(&s), &[0.0, 0.0, 0.15, 0.85], 1e-12));
    }

    #[test]
    fn state_validation() {
        assert!(QuantumState::new(Operator::identity(4)).is_err());
        assert!(QuantumState::new(Operator::diagonal(&[1.5, -0.5, 0.0, 0.0])).is_err());
        assert!(QuantumState::new(Operator::identity(2).scale(re(0.5))).is_err());
        assert!(QuantumState::pure(&[re(0.0); 4]).is_err());
        let s = QuantumState::pure(&[re(1.0), re(1.0), re(0.0), re(0.0)]).unwrap();
        assert!((s.rho()[(0, 1)].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ideal_basis_orthonormal() {
        let basis = ideal_bell_basis();
        for i in 0..4 {
            for j in 0..4 {
                let ip: C64 = basis[i]
                    .iter()
                    .zip(&basis[j])
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((ip.norm() - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mixed_probe_endpoints() {
        let pure = ideal_mixed_probe(1.0).unwrap();
        assert!((pure.overlap(&ideal_bell_pair()) - 1.0).abs() < 1e-14);
        let partner = ideal_mixed_probe(-1.0).unwrap();
        assert!((partner.overlap(&ideal_bell_basis()[2]) - 1.0).abs() < 1e-14);
        let half = ideal_mixed_probe(0.4).unwrap();
        assert!((concurrence(&half) - 0.4).abs() < 1e-9);
        assert!(ideal_mixed_probe(1.5).is_err());
    }

    #[test]
    fn polarization_conversions() {
        assert_eq!(population_to_bloch(0.85), 0.7);
        assert_eq!(bloch_to_population(0.0), 0.5);
        assert_eq!(ProbeSpec::new(0.5).unwrap().bloch(), 0.0);
    }

    mod props {
        use super::*;
        use crate::numerics::evolve;
        use proptest::prelude::*;

        fn random_unitary(v: &[f64]) -> Operator {
            let mut h = Operator::zeros(4);
            let mut k = 0;
            for i in 0..4 {
                h[(i, i)] = re(v[k]);
                k += 1;
                for j in (i + 1)..4 {
                    h[(i, j)] = c(v[k], v[k + 1]);
                    h[(j, i)] = c(v[k], -v[k + 1]);
                    k += 2;
                }
            }
            evolve(&h, 1.0).unwrap()
        }

        proptest! {
            #[test]
            fn unitary_preserves_trace_and_spectrum(
                p in 0.0f64..=1.0,
                v in proptest::collection::vec(-2.0f64..2.0, 16),
            ) {
                let s = prepare_probe(ProbeSpec::new(p).unwrap());
                let out = apply_unitary(&s, &random_unitary(&v)).unwrap();
                prop_assert!((out.rho().trace().re - 1.0).abs() < 1e-10);
                let (a, b) = (s.eigenvalues(), out.eigenvalues());
                prop_assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9));
            }

            #[test]
            fn populations_ignore_global_phase(p in 0.0f64..=1.0, gamma in -10.0f64..10.0) {
                let s = prepare_probe(ProbeSpec::new(p).unwrap());
                let t = apply_unitary(&s, &global_phase(gamma)).unwrap();
                prop_assert_eq!(populations(&s), populations(&t));
            }

            #[test]
            fn concurrence_matches_population_rule(p in 0.0f64..=1.0) {
                let s = prepare_probe(ProbeSpec::new(p).unwrap());
                prop_assert!((concurrence(&s) - (2.0 * p - 1.0).abs()).abs() < 1e-9);
            }
        }
    }
}
