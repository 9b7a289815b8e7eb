//! Hamiltonians, pulses and the sequential sensing loop.
//!
//! Frequencies are angular (rad/µs) and times are in µs throughout.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::error::{Error, Result};
use crate::numerics::{c, evolve, kron, pauli_vector, pauli_x, pauli_y, pauli_z, re, Operator};

/// Field (B, α, β) of the ideal vector-field model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VectorField {
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl VectorField {
    pub fn new(b: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !b.is_finite() || b < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "field magnitude {b} must be finite and non-negative"
            )));
        }
        if !(0.0..=PI).contains(&alpha) {
            return Err(Error::InvalidParameter(format!(
                "polar angle {alpha} outside [0, π]"
            )));
        }
        if !(-PI..=PI).contains(&beta) {
            return Err(Error::InvalidParameter(format!(
                "azimuth {beta} outside [-π, π]"
            )));
        }
        Ok(Self { b, alpha, beta })
    }

    pub fn direction(&self) -> [f64; 3] {
        let (sa, ca) = self.alpha.sin_cos();
        let (sb, cb) = self.beta.sin_cos();
        [sa * cb, sa * sb, ca]
    }

    pub fn cartesian(&self) -> [f64; 3] {
        self.direction().map(|x| self.b * x)
    }

    pub fn from_cartesian(v: [f64; 3]) -> Self {
        let b = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if b == 0.0 {
            return Self {
                b,
                alpha: 0.0,
                beta: 0.0,
            };
        }
        Self {
            b,
            alpha: (v[2] / b).clamp(-1.0, 1.0).acos(),
            beta: v[1].atan2(v[0]),
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.b, self.alpha, self.beta]
    }

    /// Unchecked construction from (B, α, β), used by finite differences.
    pub fn from_array(v: [f64; 3]) -> Self {
        Self {
            b: v[0],
            alpha: v[1],
            beta: v[2],
        }
    }
}

/// Drive parameters (Ω, Δ, Φ).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveParams {
    pub omega: f64,
    pub delta: f64,
    pub phi: f64,
}

impl DriveParams {
    pub fn new(omega: f64, delta: f64, phi: f64) -> Result<Self> {
        if ![omega, delta, phi].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParameter(
                "drive parameters must be finite".into(),
            ));
        }
        if omega < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "Rabi frequency {omega} must be non-negative"
            )));
        }
        Ok(Self { omega, delta, phi })
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.omega, self.delta, self.phi]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self {
            omega: v[0],
            delta: v[1],
            phi: v[2],
        }
    }
}

/// Measurement-basis rotation: axis polar angle `a`, axis azimuth `b`,
/// rotation angle π·`c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationAngles {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl RotationAngles {
    pub fn identity() -> Self {
        Self {
            a: 0.0,
            b: 0.0,
            c: 0.0,
        }
    }

    /// Rotation by 2π/3 about (1, 1, 1)/√3.
    pub fn uniform() -> Self {
        Self {
            a: (1.0 / 3f64.sqrt()).acos(),
            b: FRAC_PI_4,
            c: 2.0 / 3.0,
        }
    }

    pub fn axis(&self) -> [f64; 3] {
        let (sa, ca) = self.a.sin_cos();
        let (sb, cb) = self.b.sin_cos();
        [sa * cb, sa * sb, ca]
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self {
            a: v[0],
            b: v[1],
            c: v[2],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum PulseModel {
    #[default]
    Instantaneous,
    FiniteDuration {
        rabi: f64,
    },
}

/// Sequential-control configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SequenceSpec {
    pub n_loops: usize,
    pub dwell: f64,
    pub hyperfine: f64,
    pub control: DriveParams,
    pub pi_pulse_phases: (f64, f64),
    pub rotation: RotationAngles,
    pub pulses: PulseModel,
    /// Undo the nuclear σ_z precession accumulated under the hyperfine term.
    pub nuclear_phase_correction: bool,
}

impl SequenceSpec {
    pub fn new(n_loops: usize, dwell: f64, hyperfine: f64, control: DriveParams) -> Result<Self> {
        if !(dwell > 0.0) || !dwell.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dwell time {dwell} must be positive"
            )));
        }
        if !hyperfine.is_finite() {
            return Err(Error::InvalidParameter(
                "hyperfine coupling must be finite".into(),
            ));
        }
        Ok(Self {
            n_loops,
            dwell,
            hyperfine,
            control,
            pi_pulse_phases: (0.0, 0.0),
            rotation: RotationAngles::identity(),
            pulses: PulseModel::Instantaneous,
            nuclear_phase_correction: true,
        })
    }

    /// Sequence operating at `target`: derived control and compensated first π pulse.
    pub fn operating_at(
        target: DriveParams,
        n_loops: usize,
        dwell: f64,
        hyperfine: f64,
    ) -> Result<Self> {
        let mut spec = Self::new(n_loops, dwell, hyperfine, derive_control(target))?;
        spec.pi_pulse_phases = (compensated_pi_phase(target.delta, dwell), 0.0);
        Ok(spec)
    }

    pub fn with_rotation(mut self, rotation: RotationAngles) -> Self {
        self.rotation = rotation;
        self
    }

    pub fn with_loops(mut self, n_loops: usize) -> Self {
        self.n_loops = n_loops;
        self
    }

    /// Total time spent under the hyperfine interaction.
    pub fn interaction_time(&self) -> f64 {
        let pulse = match self.pulses {
            PulseModel::Instantaneous => 0.0,
            PulseModel::FiniteDuration { rabi } => PI / rabi,
        };
        self.n_loops as f64 * 2.0 * (self.dwell + pulse)
    }
}

fn electron(op: &Operator) -> Operator {
    kron(op, &Operator::identity(2))
}

fn nuclear(op: &Operator) -> Operator {
    kron(&Operator::identity(2), op)
}

/// H(B) = B(sin α cos β σ_x + sin α sin β σ_y + cos α σ_z).
pub fn ideal_hamiltonian(f: VectorField) -> Operator {
    pauli_vector(f.cartesian())
}

/// Bell-outcome probabilities (Φ, σ_zΦ, σ_xΦ, σ_yΦ) after evolving the Bell
/// pair for time `t`.
pub fn ideal_bell_probabilities(f: VectorField, t: f64) -> [f64; 4] {
    let (s, c) = (f.b * t).sin_cos();
    let (sa, ca) = f.alpha.sin_cos();
    let (sb, cb) = f.beta.sin_cos();
    let (s2, c2) = (s * s, c * c);
    [
        c2,
        s2 * ca * ca,
        s2 * sa * sa * cb * cb,
        s2 * sa * sa * sb * sb,
    ]
}

/// Outcome probabilities when the Bell basis is rotated by [`rotation_gate`]
/// before projection, in the order (identity, z, x, y).
pub fn rotated_bell_probabilities(f: VectorField, t: f64, r: RotationAngles) -> [f64; 4] {
    rotated_bell_probabilities_cartesian(f.cartesian(), t, r)
}

/// As [`rotated_bell_probabilities`] for a Cartesian field vector; regular at B = 0.
pub fn rotated_bell_probabilities_cartesian(bvec: [f64; 3], t: f64, r: RotationAngles) -> [f64; 4] {
    let b = (bvec[0] * bvec[0] + bvec[1] * bvec[1] + bvec[2] * bvec[2]).sqrt();
    let bt = b * t;
    // sin(BT)·n = sinc(BT)·t·B⃗
    let sinc = if bt.abs() < 1e-8 {
        1.0 - bt * bt / 6.0
    } else {
        bt.sin() / bt
    };
    let sn = bvec.map(|x| sinc * t * x);
    let c2 = bt.cos();
    let (s1, c1) = (FRAC_PI_2 * r.c).sin_cos();
    let m = r.axis();
    let m_dot_sn = m[0] * sn[0] + m[1] * sn[1] + m[2] * sn[2];
    let cross = [
        m[1] * sn[2] - m[2] * sn[1],
        m[2] * sn[0] - m[0] * sn[2],
        m[0] * sn[1] - m[1] * sn[0],
    ];
    let q0 = c1 * c2 + s1 * m_dot_sn;
    let q: [f64; 3] = std::array::from_fn(|k| -(c1 * sn[k] - s1 * c2 * m[k] - s1 * cross[k]));
    [q0 * q0, q[2] * q[2], q[0] * q[0], q[1] * q[1]]
}

/// H(Ω, Δ, Φ) = (Δ/2)σ_z + (Ω/2)(cos Φ σ_x − sin Φ σ_y).
pub fn drive_hamiltonian(p: DriveParams) -> Operator {
    let (s, c) = p.phi.sin_cos();
    let z = pauli_z().scale(re(p.delta / 2.0));
    let x = pauli_x().scale(re(p.omega / 2.0 * c));
    let y = pauli_y().scale(re(-p.omega / 2.0 * s));
    &(&z + &x) + &y
}

/// H_int = A(−σ_z^e + σ_z^n − σ_z^e σ_z^n)/4.
pub fn hyperfine_hamiltonian(a: f64) -> Operator {
    let z = pauli_z();
    let sum = &(&nuclear(&z) - &electron(&z)) - &kron(&z, &z);
    sum.scale(re(a / 4.0))
}

fn drive_with_hyperfine(p: DriveParams, a: f64) -> Operator {
    &electron(&drive_hamiltonian(p)) + &hyperfine_hamiltonian(a)
}

/// U_t = exp(+iΔσ_z^e t/2)·exp(−i(H(Ω,Δ,Φ) + H_int)t).
pub fn target_unitary(p: DriveParams, a: f64, t: f64) -> Operator {
    let frame = evolve(&electron(&pauli_z()), -p.delta * t / 2.0).expect("σ_z is Hermitian");
    let u = evolve(&drive_with_hyperfine(p, a), t).expect("Hamiltonian is Hermitian");
    &frame * &u
}

/// U_c = exp(−i(H(control) + H_int)t).
pub fn control_unitary(p: DriveParams, a: f64, t: f64) -> Operator {
    evolve(&drive_with_hyperfine(p, a), t).expect("Hamiltonian is Hermitian")
}

/// Electron π pulse about the equatorial axis at angle `phase`.
pub fn pi_pulse(phase: f64, model: PulseModel, a: f64) -> Result<Operator> {
    match model {
        PulseModel::Instantaneous => {
            let (s, c) = phase.sin_cos();
            Ok(electron(&pauli_vector([c, s, 0.0]).scale(c64_neg_i())))
        }
        PulseModel::FiniteDuration { rabi } => {
            if !(rabi > 0.0) {
                return Err(Error::NonpositiveRabi(rabi));
            }
            let h = drive_with_hyperfine(
                DriveParams {
                    omega: rabi,
                    delta: 0.0,
                    phi: -phase,
                },
                a,
            );
            Ok(evolve(&h, PI / rabi)?)
        }
    }
}

fn c64_neg_i() -> crate::numerics::C64 {
    c(0.0, -1.0)
}

/// Control that inverts the target evolution between π pulses: (Ω_t, Δ_t, π − Φ_t).
pub fn derive_control(target: DriveParams) -> DriveParams {
    DriveParams {
        omega: target.omega,
        delta: target.delta,
        phi: PI - target.phi,
    }
}

/// First π-pulse phase cancelling the frame-change factor: −Δ_t·t/2 (mod π).
pub fn compensated_pi_phase(delta_t: f64, dwell: f64) -> f64 {
    (-delta_t * dwell / 2.0).rem_euclid(PI)
}

/// [U_π(φ₂)·U_c·U_π(φ₁)·U_t]^N, followed by the nuclear frame correction
/// exp(+iAτσ_z^n/4) when enabled.
pub fn sensing_loop_unitary(target: DriveParams, spec: &SequenceSpec) -> Result<Operator> {
    if spec.n_loops == 0 {
        return Ok(Operator::identity(4));
    }
    let a = spec.hyperfine;
    let ut = target_unitary(target, a, spec.dwell);
    let uc = control_unitary(spec.control, a, spec.dwell);
    let p1 = pi_pulse(spec.pi_pulse_phases.0, spec.pulses, a)?;
    let p2 = pi_pulse(spec.pi_pulse_phases.1, spec.pulses, a)?;
    let single = &(&(&p2 * &uc) * &p1) * &ut;
    let mut total = single.pow(spec.n_loops);
    if spec.nuclear_phase_correction && a != 0.0 {
        let corr = evolve(&nuclear(&pauli_z()), -a * spec.interaction_time() / 4.0)?;
        total = &corr * &total;
    }
    Ok(total)
}

/// exp(−i(πc/2)[cos a σ_z + sin a cos b σ_x + sin a sin b σ_y]) ⊗ I.
pub fn rotation_gate(r: RotationAngles) -> Operator {
    let (s, co) = (FRAC_PI_2 * r.c).sin_cos();
    let gen = pauli_vector(r.axis());
    let u = &Operator::identity(2).scale(re(co)) + &gen.scale(c(0.0, -s));
    electron(&u)
}

/// Scalar pulse-calibration quantities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseCalibration {
    /// Rabi frequency of the selective electron π pulse, δ/√3.
    pub selective_rabi: f64,
    pub selective_pi_duration: f64,
    /// RF π/2 durations must be integer multiples of 2π/|A|.
    pub rf_halfpi_duration_unit: f64,
    /// RF phase shift Aτ/2 compensating nuclear precession over τ.
    pub nuclear_phase_correction: f64,
}

pub fn pulse_calibration(hyperfine_splitting: f64, a: f64, tau: f64) -> Result<PulseCalibration> {
    if !(hyperfine_splitting > 0.0) || a == 0.0 || !a.is_finite() {
        return Err(Error::DegenerateSplitting {
            splitting: hyperfine_splitting,
            hyperfine: a,
        });
    }
    let selective_rabi = hyperfine_splitting / 3f64.sqrt();
    Ok(PulseCalibration {
        selective_rabi,
        selective_pi_duration: PI / selective_rabi,
        rf_halfpi_duration_unit: 2.0 * PI / a.abs(),
        nuclear_phase_correction: a * tau / 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::test_support::taylor_expm;
    use crate::numerics::C64;
    use crate::quantum_state::{ideal_bell_basis, ideal_bell_pair};
    use std::f64::consts::TAU;

    const TWO_PI: f64 = TAU;

    fn amplitude(bra: &[C64], ket: &[C64]) -> C64 {
        bra.iter().zip(ket).map(|(a, b)| a.conj() * b).sum()
    }

    /// Bell-pair simulation: evolve, optionally rotate the basis, project.
    fn simulated_probabilities(f: VectorField, t: f64, r: Option<RotationAngles>) -> [f64; 4] {
        let u = electron(&evolve(&ideal_hamiltonian(f), t).unwrap());
        let mut psi = u.apply(&ideal_bell_pair());
        if let Some(r) = r {
            psi = rotation_gate(r).adjoint().apply(&psi);
        }
        let basis = ideal_bell_basis();
        std::array::from_fn(|k| amplitude(&basis[k], &psi).norm_sqr())
    }

    #[test]
    fn ideal_hamiltonian_cases() {
        let b = 1.7;
        let h = ideal_hamiltonian(VectorField::new(b, 0.0, 0.9).unwrap());
        assert!(h.distance(&pauli_z().scale(re(b))) < 1e-15);
        let h = ideal_hamiltonian(VectorField::new(b, FRAC_PI_2, 0.0).unwrap());
        assert!(h.distance(&pauli_x().scale(re(b))) < 1e-15);
        let h = ideal_hamiltonian(VectorField::new(0.0, 1.0, 1.0).unwrap());
        assert_eq!(h.max_abs(), 0.0);
        let (vals, _) = crate::numerics::eig_hermitian(&ideal_hamiltonian(
            VectorField::new(b, 0.4, -2.0).unwrap(),
        ))
        .unwrap();
        assert!((vals[0] + b).abs() < 1e-14 && (vals[1] - b).abs() < 1e-14);
    }

    #[test]
    fn ideal_probabilities_cases() {
        assert_eq!(
            ideal_bell_probabilities(VectorField::new(0.0, 0.3, 0.2).unwrap(), 5.0),
            [1.0, 0.0, 0.0, 0.0]
        );
        let p = ideal_bell_probabilities(VectorField::new(FRAC_PI_2, FRAC_PI_2, 0.0).unwrap(), 1.0);
        assert!((p[2] - 1.0).abs() < 1e-15 && p[0] < 1e-30 && p[1] < 1e-30 && p[3] == 0.0);
    }

    #[test]
    fn ideal_probabilities_match_simulation() {
        for &(b, al, be, t) in &[
            (0.7, 0.4, 1.1, 1.3),
            (2.1, 2.5, -2.0, 0.6),
            (0.05, 1.2, 3.0, 9.0),
        ] {
            let f = VectorField::new(b, al, be).unwrap();
            let closed = ideal_bell_probabilities(f, t);
            let sim = simulated_probabilities(f, t, None);
            assert!(
                closed.iter().zip(&sim).all(|(x, y)| (x - y).abs() < 1e-10),
                "{closed:?} {sim:?}"
            );
        }
    }

    #[test]
    fn rotated_probabilities_cases() {
        let p = rotated_bell_probabilities(
            VectorField::new(0.0, 0.0, 0.0).unwrap(),
            1.0,
            RotationAngles::uniform(),
        );
        assert!(p.iter().all(|x| (x - 0.25).abs() < 1e-15));
        let f = VectorField::new(0.8, 1.0, 0.5).unwrap();
        let r0 = RotationAngles {
            a: 0.3,
            b: 1.2,
            c: 0.0,
        };
        let a = rotated_bell_probabilities(f, 1.4, r0);
        let b = ideal_bell_probabilities(f, 1.4);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-15));
    }

    #[test]
    fn rotated_probabilities_match_simulation() {
        let points = [
            (0.7, 0.4, 1.1, 1.3, RotationAngles::uniform()),
            (
                1.9,
                2.2,
                -0.7,
                0.4,
                RotationAngles {
                    a: 0.3,
                    b: -1.0,
                    c: 0.37,
                },
            ),
            (
                0.2,
                1.5,
                2.9,
                3.1,
                RotationAngles {
                    a: 2.0,
                    b: 2.5,
                    c: 1.4,
                },
            ),
        ];
        for (b, al, be, t, r) in points {
            let f = VectorField::new(b, al, be).unwrap();
            let closed = rotated_bell_probabilities(f, t, r);
            let sim = simulated_probabilities(f, t, Some(r));
            assert!(
                closed.iter().zip(&sim).all(|(x, y)| (x - y).abs() < 1e-10),
                "{closed:?} {sim:?}"
            );
        }
    }

    #[test]
    fn drive_hamiltonian_cases() {
        let w = 3.0;
        assert!(
            drive_hamiltonian(DriveParams::new(w, 0.0, 0.0).unwrap())
                .distance(&pauli_x().scale(re(w / 2.0)))
                < 1e-15
        );
        assert!(
            drive_hamiltonian(DriveParams::new(0.0, 1.4, 0.7).unwrap())
                .distance(&pauli_z().scale(re(0.7)))
                < 1e-15
        );
        assert!(
            drive_hamiltonian(DriveParams::new(w, 0.0, FRAC_PI_2).unwrap())
                .distance(&pauli_y().scale(re(-w / 2.0)))
                < 1e-15
        );
    }

    #[test]
    fn hyperfine_diagonal() {
        assert_eq!(hyperfine_hamiltonian(0.0).max_abs(), 0.0);
        let a = -TWO_PI * 2.16;
        let h = hyperfine_hamiltonian(a);
        assert_eq!(
            h.diag_real(),
            vec![-a / 4.0, -a / 4.0, 3.0 * a / 4.0, -a / 4.0]
        );
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(h[(i, j)], re(0.0));
                }
            }
        }
        for z in [electron(&pauli_z()), nuclear(&pauli_z())] {
            assert_eq!(&h * &z, &z * &h);
        }
    }

    #[test]
    fn target_unitary_cases() {
        let zero = DriveParams::new(0.0, 0.0, 0.0).unwrap();
        assert!(target_unitary(zero, 0.0, 0.7).distance(&Operator::identity(4)) < 1e-15);
        let w = 5.0;
        let u = target_unitary(DriveParams::new(w, 0.0, 0.0).unwrap(), 0.0, PI / w);
        assert!(u.distance(&electron(&pauli_x()).scale(c(0.0, -1.0))) < 1e-14);
    }

    #[test]
    fn target_unitary_matches_taylor_oracle() {
        let p = DriveParams::new(4.3, -1.7, 0.6).unwrap();
        let (a, t) = (-2.2, 0.37);
        let frame = taylor_expm(&electron(&pauli_z()), c(0.0, p.delta * t / 2.0));
        let body = taylor_expm(&drive_with_hyperfine(p, a), c(0.0, -t));
        let oracle = &frame * &body;
        assert!(target_unitary(p, a, t).distance(&oracle) < 1e-10);
    }

    #[test]
    fn pi_pulse_cases() {
        let p0 = pi_pulse(0.0, PulseModel::Instantaneous, 0.0).unwrap();
        assert!(p0.distance(&electron(&pauli_x()).scale(c(0.0, -1.0))) < 1e-15);
        let p90 = pi_pulse(FRAC_PI_2, PulseModel::Instantaneous, 0.0).unwrap();
        assert!(p90.distance(&electron(&pauli_y()).scale(c(0.0, -1.0))) < 1e-15);
        let zz = electron(&pauli_z());
        let conj = &(&p0 * &zz) * &p0.adjoint();
        assert!(conj.distance(&zz.scale(re(-1.0))) < 1e-12);
        assert!(matches!(
            pi_pulse(0.0, PulseModel::FiniteDuration { rabi: 0.0 }, 1.0),
            Err(Error::NonpositiveRabi(_))
        ));
        let fin = pi_pulse(0.3, PulseModel::FiniteDuration { rabi: 40.0 }, 0.0).unwrap();
        let inst = pi_pulse(0.3, PulseModel::Instantaneous, 0.0).unwrap();
        assert!(fin.distance(&inst) < 1e-12);
    }

    #[test]
    fn pi_pulse_flips_electron_terms_of_hyperfine() {
        let a = 1.3;
        let p = pi_pulse(0.0, PulseModel::Instantaneous, a).unwrap();
        let conj = &(&p * &hyperfine_hamiltonian(a)) * &p.adjoint();
        let z = pauli_z();
        let flipped = (&(&nuclear(&z) + &electron(&z)) + &kron(&z, &z)).scale(re(a / 4.0));
        assert_eq!(conj, flipped);
    }

    #[test]
    fn derive_control_cases() {
        let w = TWO_PI * 11.2;
        assert_eq!(
            derive_control(DriveParams::new(w, 0.0, 0.0).unwrap()),
            DriveParams::new(w, 0.0, PI).unwrap()
        );
        assert_eq!(
            derive_control(DriveParams::new(w, 0.0, FRAC_PI_2).unwrap()).phi,
            FRAC_PI_2
        );
        let p = DriveParams::new(w, 0.4, 2.9).unwrap();
        let twice = derive_control(derive_control(p)).phi;
        assert!(((twice - p.phi) / TWO_PI).fract().abs() < 1e-15);
    }

    fn device_target(delta: f64) -> DriveParams {
        DriveParams::new(TWO_PI * 11.2, delta, FRAC_PI_2).unwrap()
    }

    const HYPERFINE: f64 = -TWO_PI * 2.16;

    #[test]
    fn empty_loop_is_identity() {
        let spec = SequenceSpec::operating_at(device_target(0.0), 0, 0.03, HYPERFINE).unwrap();
        assert_eq!(
            sensing_loop_unitary(device_target(0.0), &spec).unwrap(),
            Operator::identity(4)
        );
    }

    #[test]
    fn loop_cancels_at_zero_detuning() {
        let target = device_target(0.0);
        for n in [1, 4, 16] {
            let spec = SequenceSpec::new(n, 0.03, HYPERFINE, derive_control(target)).unwrap();
            let u = sensing_loop_unitary(target, &spec).unwrap();
            assert!(
                u.distance_to_phase_identity() < 1e-8,
                "N={n}: {}",
                u.distance_to_phase_identity()
            );
        }
    }

    #[test]
    fn nuclear_residual_without_correction() {
        let target = device_target(0.0);
        let mut spec = SequenceSpec::new(1, 0.03, HYPERFINE, derive_control(target)).unwrap();
        spec.nuclear_phase_correction = false;
        let u = sensing_loop_unitary(target, &spec).unwrap();
        let residual = evolve(&nuclear(&pauli_z()), HYPERFINE * 0.03 / 2.0).unwrap();
        let phase = u[(0, 0)] / residual[(0, 0)];
        assert!(u.distance(&residual.scale(phase)) < 1e-12);
    }

    #[test]
    fn compensation_phase_scan() {
        // locate φ₁ restoring cancellation by brute force, independent of the closed form
        let dwell = 0.03;
        for delta in [TWO_PI * 1.5, -TWO_PI * 4.0, TWO_PI * 9.3] {
            let target = device_target(delta);
            let mut spec = SequenceSpec::new(1, dwell, HYPERFINE, derive_control(target)).unwrap();
            let dist = |phi1: f64, spec: &mut SequenceSpec| {
                spec.pi_pulse_phases = (phi1, 0.0);
                sensing_loop_unitary(target, spec)
                    .unwrap()
                    .distance_to_phase_identity()
            };
            let steps = 4000;
            let (mut best, mut best_d) = (0.0, f64::INFINITY);
            for k in 0..steps {
                let phi = TWO_PI * k as f64 / steps as f64;
                let d = dist(phi, &mut spec);
                if d < best_d {
                    (best, best_d) = (phi, d);
                }
            }
            let (mut lo, mut hi) = (best - TWO_PI / steps as f64, best + TWO_PI / steps as f64);
            for _ in 0..200 {
                let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
                if dist(m1, &mut spec) < dist(m2, &mut spec) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let found = 0.5 * (lo + hi);
            assert!(dist(found, &mut spec) < 1e-7);
            let rule = compensated_pi_phase(delta, dwell);
            let diff = (found - rule).rem_euclid(PI);
            assert!(
                diff.min(PI - diff) < 1e-6,
                "Δ={delta}: scan {found}, rule {rule}"
            );
            assert!(dist(rule, &mut spec) < 1e-8);
        }
    }

    #[test]
    fn loop_cancels_with_detuning_compensation() {
        for delta in [TWO_PI * 0.7, -TWO_PI * 3.1] {
            let target = device_target(delta);
            for n in [1, 4, 16] {
                let spec = SequenceSpec::operating_at(target, n, 0.03, HYPERFINE).unwrap();
                let u = sensing_loop_unitary(target, &spec).unwrap();
                assert!(u.distance_to_phase_identity() < 1e-8);
            }
        }
    }

    #[test]
    fn rotation_gate_cases() {
        assert!(
            rotation_gate(RotationAngles {
                a: 0.4,
                b: 0.2,
                c: 0.0
            })
            .distance(&Operator::identity(4))
                < 1e-15
        );
        let gen = pauli_vector([1.0, 1.0, 1.0]);
        let expected = electron(&evolve(&gen, PI / (3.0 * 3f64.sqrt())).unwrap());
        assert!(rotation_gate(RotationAngles::uniform()).distance(&expected) < 1e-12);
    }

    #[test]
    fn pulse_calibration_cases() {
        let delta = TWO_PI * 2.16;
        let cal = pulse_calibration(delta, -delta, 0.0).unwrap();
        assert!((cal.selective_rabi / TWO_PI - 1.247).abs() < 1e-3);
        assert!((cal.selective_pi_duration - 0.401).abs() < 1e-3);
        assert_eq!(cal.nuclear_phase_correction, 0.0);
        assert!((cal.rf_halfpi_duration_unit - 1.0 / 2.16).abs() < 1e-12);
        let doubled = pulse_calibration(2.0 * delta, -delta, 0.0).unwrap();
        assert!((doubled.selective_rabi - 2.0 * cal.selective_rabi).abs() < 1e-12);
        assert!((doubled.selective_pi_duration - cal.selective_pi_duration / 2.0).abs() < 1e-12);
        assert!(matches!(
            pulse_calibration(0.0, 1.0, 0.0),
            Err(Error::DegenerateSplitting { .. })
        ));
        assert!(matches!(
            pulse_calibration(1.0, 0.0, 0.0),
            Err(Error::DegenerateSplitting { .. })
        ));
    }

    #[test]
    fn zero_field_slope_vanishes() {
        let t = 2.0;
        let h = 1e-6;
        let p = |b: f64| {
            ideal_bell_probabilities(
                VectorField {
                    b,
                    alpha: 0.7,
                    beta: 0.3,
                },
                t,
            )[0]
        };
        assert!(((p(h) - p(-h)) / (2.0 * h)).abs() < 1e-9);
        assert!((p(1e-9) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vector_field_validation_and_cartesian() {
        assert!(VectorField::new(-1.0, 0.0, 0.0).is_err());
        assert!(VectorField::new(1.0, 4.0, 0.0).is_err());
        assert!(VectorField::new(1.0, 1.0, 4.0).is_err());
        let f = VectorField::new(1.3, 0.8, -2.1).unwrap();
        let back = VectorField::from_cartesian(f.cartesian());
        assert!(
            (back.b - f.b).abs() < 1e-14
                && (back.alpha - f.alpha).abs() < 1e-14
                && (back.beta - f.beta).abs() < 1e-14
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn evolution_operators_unitary(
                w in 0.0f64..100.0, d in -50.0f64..50.0, ph in -PI..PI, a in -20.0f64..20.0, t in 0.0f64..1.0,
                phase in -PI..PI, rabi in 1.0f64..100.0,
            ) {
                let p = DriveParams::new(w, d, ph).unwrap();
                prop_assert!(target_unitary(p, a, t).unitarity_deviation() < 1e-10);
                prop_assert!(control_unitary(p, a, t).unitarity_deviation() < 1e-10);
                let finite = PulseModel::FiniteDuration { rabi };
                prop_assert!(pi_pulse(phase, finite, a).unwrap().unitarity_deviation() < 1e-10);
                prop_assert!(pi_pulse(phase, PulseModel::Instantaneous, a).unwrap().unitarity_deviation() < 1e-10);
            }

            #[test]
            fn rotation_gate_unitary(a in -PI..PI, b in -PI..PI, c in -2.0f64..2.0) {
                let r = RotationAngles { a, b, c };
                prop_assert!(rotation_gate(r).unitarity_deviation() < 1e-10);
            }

            #[test]
            fn probabilities_normalized(
                bm in 0.0f64..5.0, al in 0.0..PI, be in -PI..PI, t in 0.0f64..5.0,
                a in -PI..PI, b in -PI..PI, c in -2.0f64..2.0,
            ) {
                let f = VectorField::new(bm, al, be).unwrap();
                let p = ideal_bell_probabilities(f, t);
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12 && p.iter().all(|&x| x >= 0.0));
                let r = RotationAngles { a, b, c };
                let q = rotated_bell_probabilities(f, t, r);
                prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12 && q.iter().all(|&x| x >= 0.0));
            }

            #[test]
            fn sequential_cancellation(w in 1.0f64..100.0, ph in -PI..PI, a in -20.0f64..20.0, ni in 0usize..3) {
                let n = [1, 4, 16][ni];
                let target = DriveParams::new(w, 0.0, ph).unwrap();
                let spec = SequenceSpec::new(n, 0.03, a, derive_control(target)).unwrap();
                let u = sensing_loop_unitary(target, &spec).unwrap();
                prop_assert!(u.distance_to_phase_identity() < 1e-8);
            }
        }
    }
}
