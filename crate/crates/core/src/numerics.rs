//! Dense complex linear algebra for 2- and 4-dimensional operators.
//!
//! Everything here works on small square matrices stored row-major. The
//! physical generators in this crate are all Hermitian, so the matrix
//! exponential goes through a Jacobi eigendecomposition rather than a
//! series expansion.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const UNITARY_TOL: f64 = 1e-10;

const MAX_JACOBI_SWEEPS: usize = 64;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Square complex matrix of dimension 2, 3 or 4.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dim: usize,
    data: Vec<C64>,
}

impl Operator {
    /// Builds an operator from row-major entries.
    pub fn from_vec(dim: usize, data: Vec<C64>) -> Result<Self> {
        if !(2..=4).contains(&dim) {
            return Err(Error::InvalidOperator(format!(
                "dimension {dim} not in {{2, 3, 4}}"
            )));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidOperator("non-finite entry".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<const N: usize>(rows: [[C64; N]; N]) -> Self {
        Self::from_vec(N, rows.iter().flatten().copied().collect())
            .expect("valid fixed-size operator")
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = re(1.0);
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = re(d);
        }
        m
    }

    /// Outer product |u><v|.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        assert_eq!(u.len(), v.len());
        let n = u.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = u[i] * v[j].conj();
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn diag_real(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self[(i, i)].re).collect()
    }

    /// Maximum entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Maximum entrywise distance to `other`.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        self.distance(&self.adjoint())
    }

    pub fn unitarity_deviation(&self) -> f64 {
        (self * &self.adjoint()).distance(&Self::identity(self.dim))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// `self^n` by repeated squaring; `n = 0` gives the identity.
    pub fn pow(&self, mut n: usize) -> Self {
        let mut base = self.clone();
        let mut acc = Self::identity(self.dim);
        while n > 0 {
            if n & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            n >>= 1;
        }
        acc
    }

    /// Distance from the nearest `e^{iγ} I`.
    pub fn distance_to_phase_identity(&self) -> f64 {
        let tr = self.trace();
        let phase = if tr.norm() > 0.0 {
            tr / tr.norm()
        } else {
            re(1.0)
        };
        self.distance(&Self::identity(self.dim).scale(phase))
    }
}

impl std::ops::Index<(usize, usize)> for Operator {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Operator {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "operator dimension mismatch");
        let n = self.dim;
        let mut out = Operator::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "operator dimension mismatch");
        Operator {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "operator dimension mismatch");
        Operator {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale(re(-1.0))
    }
}

pub fn pauli_x() -> Operator {
    Operator::from_rows([[re(0.0), re(1.0)], [re(1.0), re(0.0)]])
}

pub fn pauli_y() -> Operator {
    Operator::from_rows([[re(0.0), c(0.0, -1.0)], [c(0.0, 1.0), re(0.0)]])
}

pub fn pauli_z() -> Operator {
    Operator::from_rows([[re(1.0), re(0.0)], [re(0.0), re(-1.0)]])
}

/// `n_x σ_x + n_y σ_y + n_z σ_z`.
pub fn pauli_vector(n: [f64; 3]) -> Operator {
    let mut m = pauli_x().scale(re(n[0]));
    m = &m + &pauli_y().scale(re(n[1]));
    &m + &pauli_z().scale(re(n[2]))
}

/// Kronecker product. The result must itself be a valid operator (dimension 4 at most).
pub fn kron(a: &Operator, b: &Operator) -> Operator {
    let (na, nb) = (a.dim, b.dim);
    let n = na * nb;
    assert!(n <= 4, "kron result dimension {n} exceeds 4");
    let mut out = Operator::zeros(n);
    for i in 0..na {
        for j in 0..na {
            let aij = a[(i, j)];
            for k in 0..nb {
                for l in 0..nb {
                    out[(i * nb + k, j * nb + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Eigendecomposition of a Hermitian operator by cyclic complex Jacobi rotations.
///
/// Eigenvalues are returned in ascending order; the columns of the returned
/// operator are the matching orthonormal eigenvectors.
pub fn eig_hermitian(h: &Operator) -> Result<(Vec<f64>, Operator)> {
    let deviation = h.hermiticity_deviation();
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let n = h.dim;
    // symmetrize so roundoff in the input cannot leak into the rotations
    let mut a = (h + &h.adjoint()).scale(re(0.5));
    let mut v = Operator::identity(n);
    let scale = a.max_abs().max(f64::MIN_POSITIVE);

    for _ in 0..MAX_JACOBI_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum();
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let b = a[(p, q)];
                let mag = b.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = b / mag;
                let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * mag);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                // G = D·R with D = diag(1, e^{-iφ}) on (p, q) making the pivot real
                let mut g = Operator::identity(n);
                g[(p, p)] = re(cs);
                g[(p, q)] = re(sn);
                g[(q, p)] = phase.conj() * (-sn);
                g[(q, q)] = phase.conj() * cs;
                a = &(&g.adjoint() * &a) * &g;
                a[(p, q)] = re(0.0);
                a[(q, p)] = re(0.0);
                v = &v * &g;
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = Operator::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[(row, col)] = v[(row, src)];
        }
    }
    Ok((values, vectors))
}

/// `exp(scale · h)` for Hermitian `h`, via its spectral decomposition.
pub fn expm(h: &Operator, scale: C64) -> Result<Operator> {
    let (values, vectors) = eig_hermitian(h)?;
    let n = h.dim;
    let mut out = Operator::zeros(n);
    for k in 0..n {
        let e = (scale * values[k]).exp();
        for i in 0..n {
            let vik = vectors[(i, k)] * e;
            for j in 0..n {
                out[(i, j)] += vik * vectors[(j, k)].conj();
            }
        }
    }
    Ok(out)
}

/// Time evolution `exp(-i h t)` under a Hermitian generator.
pub fn evolve(h: &Operator, t: f64) -> Result<Operator> {
    expm(h, c(0.0, -t))
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    #[test]
    fn kron_block_structure() {
        let i2 = Operator::identity(2);
        assert_eq!(
            kron(&pauli_z(), &i2),
            Operator::diagonal(&[1.0, 1.0, -1.0, -1.0])
        );
        assert_eq!(kron(&i2, &i2), Operator::identity(4));
        let m = kron(&pauli_x(), &pauli_z());
        let expected = Operator::from_rows([
            [re(0.0), re(0.0), re(1.0), re(0.0)],
            [re(0.0), re(0.0), re(0.0), re(-1.0)],
            [re(1.0), re(0.0), re(0.0), re(0.0)],
            [re(0.0), re(-1.0), re(0.0), re(0.0)],
        ]);
        assert_eq!(m, expected);
    }

    #[test]
    fn kron_matches_direct_embedding() {
        // (a⊗b)(c⊗d) = (ac)⊗(bd) entrywise
        let (x, y, z) = (pauli_x(), pauli_y(), pauli_z());
        let lhs = &kron(&x, &y) * &kron(&z, &x);
        let rhs = kron(&(&x * &z), &(&y * &x));
        assert!(lhs.distance(&rhs) < 1e-15);
    }

    #[test]
    fn eig_of_paulis() {
        let (vals, vecs) = eig_hermitian(&pauli_z()).unwrap();
        assert_eq!(vals, vec![-1.0, 1.0]);
        assert!((vecs[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((vecs[(0, 1)].norm() - 1.0).abs() < 1e-15);

        let (vals, vecs) = eig_hermitian(&pauli_x()).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        // (|0> - |1>)/√2 and (|0> + |1>)/√2 up to phase
        let minus = [re(FRAC_1_SQRT_2), re(-FRAC_1_SQRT_2)];
        let plus = [re(FRAC_1_SQRT_2), re(FRAC_1_SQRT_2)];
        let overlap = |col: usize, v: &[C64; 2]| {
            (vecs[(0, col)].conj() * v[0] + vecs[(1, col)].conj() * v[1]).norm()
        };
        assert!((overlap(0, &minus) - 1.0).abs() < 1e-14);
        assert!((overlap(1, &plus) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = Operator::from_rows([[re(0.0), re(1.0)], [re(0.0), re(0.0)]]);
        assert!(matches!(eig_hermitian(&m), Err(Error::NotHermitian { .. })));
        assert!(matches!(
            expm(&m, c(0.0, -1.0)),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let h = random_hermitian(&mut rng, 4);
            let (vals, v) = eig_hermitian(&h).unwrap();
            assert!(vals.windows(2).all(|w| w[0] <= w[1]));
            assert!(v.unitarity_deviation() < 1e-9);
            let d = Operator::diagonal(&vals);
            let rebuilt = &(&v * &d) * &v.adjoint();
            assert!(
                rebuilt.distance(&h) < 1e-9,
                "reconstruction error {}",
                rebuilt.distance(&h)
            );
        }
    }

    #[test]
    fn eig_handles_degenerate_spectrum() {
        let h = kron(&pauli_z(), &Operator::identity(2));
        let (vals, v) = eig_hermitian(&h).unwrap();
        assert_eq!(vals, vec![-1.0, -1.0, 1.0, 1.0]);
        assert!(v.unitarity_deviation() < 1e-12);
    }

    #[test]
    fn expm_half_turn_and_zero() {
        let u = expm(&pauli_x(), c(0.0, -FRAC_PI_2)).unwrap();
        assert!(u.distance(&pauli_x().scale(c(0.0, -1.0))) < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_hermitian(&mut rng, 4);
        assert!(expm(&h, re(0.0)).unwrap().distance(&Operator::identity(4)) < 1e-14);
    }

    #[test]
    fn expm_matches_taylor_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let h = random_hermitian(&mut rng, 4);
            let t: f64 = rand::Rng::random_range(&mut rng, -3.0..3.0);
            let spectral = expm(&h, c(0.0, -t)).unwrap();
            let series = taylor_expm(&h, c(0.0, -t));
            assert!(
                spectral.distance(&series) < 1e-10,
                "diff {}",
                spectral.distance(&series)
            );
        }
    }

    #[test]
    fn pow_matches_repeated_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = evolve(&random_hermitian(&mut rng, 4), 0.37).unwrap();
        let mut acc = Operator::identity(4);
        for n in 0..9 {
            assert!(u.pow(n).distance(&acc) < 1e-13);
            acc = &acc * &u;
        }
    }

    #[test]
    fn from_vec_validates() {
        assert!(Operator::from_vec(5, vec![re(0.0); 25]).is_err());
        assert!(Operator::from_vec(2, vec![re(0.0); 3]).is_err());
        assert!(Operator::from_vec(2, vec![re(f64::NAN), re(0.0), re(0.0), re(0.0)]).is_err());
        assert!(Operator::from_vec(3, vec![re(1.0); 9]).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn hermitian4() -> impl Strategy<Value = Operator> {
            proptest::collection::vec(-3.0f64..3.0, 16).prop_map(|v| {
                let mut m = Operator::zeros(4);
                let mut k = 0;
                for i in 0..4 {
                    m[(i, i)] = re(v[k]);
                    k += 1;
                    for j in (i + 1)..4 {
                        let z = c(v[k], v[k + 1]);
                        k += 2;
                        m[(i, j)] = z;
                        m[(j, i)] = z.conj();
                    }
                }
                m
            })
        }

        proptest! {
            #[test]
            fn evolution_is_unitary(h in hermitian4(), t in -10.0f64..10.0) {
                let u = evolve(&h, t).unwrap();
                prop_assert!(u.unitarity_deviation() < 1e-10);
            }

            #[test]
            fn spectral_consistency(h in hermitian4(), s_re in -1.0f64..1.0, s_im in -2.0f64..2.0) {
                let s = c(s_re, s_im);
                let (vals, v) = eig_hermitian(&h).unwrap();
                let mut d = Operator::zeros(4);
                for k in 0..4 { d[(k, k)] = (s * vals[k]).exp(); }
                let direct = &(&v * &d) * &v.adjoint();
                prop_assert!(expm(&h, s).unwrap().distance(&direct) < 1e-9);
            }
        }
    }
}
