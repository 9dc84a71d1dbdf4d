//! Truncated Fock and qubit operators, the composite atom ⊗ field space,
//! partial traces, displacement operators and von Neumann entropy.
//!
//! Basis conventions: the atom is ordered (|e⟩, |g⟩) so that σ_z = diag(+1, −1);
//! the field is ordered (|0⟩, …, |n_max⟩); in tensor products the atom factor
//! is leftmost, so composite index = atom * (n_max + 1) + n.

pub mod linalg;

use ndarray::Array2;

use crate::error::{Error, Result};
pub use linalg::{ComplexMatrix, C64};
use linalg::{all_finite, dagger, ensure_square, hermitian_eigenvalues, hermiticity_error, trace};

pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Highest Fock level retained; the field dimension is `n_max + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FockCutoff(usize);

impl FockCutoff {
    /// Used for every reproduction run unless the truncation gate asks for more.
    pub const DEFAULT: FockCutoff = FockCutoff(15);

    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidCutoff(n_max));
        }
        Ok(FockCutoff(n_max))
    }

    pub fn n_max(self) -> usize {
        self.0
    }

    pub fn field_dim(self) -> usize {
        self.0 + 1
    }

    pub fn composite_dim(self) -> usize {
        2 * (self.0 + 1)
    }

    pub fn raised(self, by: usize) -> Self {
        FockCutoff(self.0 + by)
    }
}

impl Default for FockCutoff {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Which Hilbert space a density matrix lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    AtomOnly,
    Composite(FockCutoff),
}

impl Space {
    pub fn dim(self) -> usize {
        match self {
            Space::AtomOnly => 2,
            Space::Composite(c) => c.composite_dim(),
        }
    }
}

/// A Hermitian, unit-trace, positive semidefinite matrix tagged with its space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    space: Space,
}

impl DensityMatrix {
    /// Validates every invariant, including positivity (an eigenvalue solve).
    pub fn new(matrix: ComplexMatrix, space: Space) -> Result<Self> {
        let rho = Self::new_unchecked(matrix, space)?;
        rho.check_invariants(1.0)?;
        Ok(rho)
    }

    /// Only checks the shape; used on integrator output that is gated elsewhere.
    pub fn new_unchecked(matrix: ComplexMatrix, space: Space) -> Result<Self> {
        let n = ensure_square(&matrix)?;
        if n != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: n,
            });
        }
        Ok(DensityMatrix { matrix, space })
    }

    /// Checks Hermiticity, trace and positivity with tolerances scaled by `slack`.
    pub fn check_invariants(&self, slack: f64) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidDensityMatrix(what));
        if !all_finite(&self.matrix) {
            return bad("non-finite entries".into());
        }
        let herm = hermiticity_error(&self.matrix);
        if herm > HERMITICITY_TOL * slack {
            return bad(format!("hermiticity error {herm:e}"));
        }
        let tr = trace(&self.matrix);
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL * slack {
            return bad(format!("trace {tr}"));
        }
        let min_ev = hermitian_eigenvalues(&self.matrix)?[0];
        if min_ev < -POSITIVITY_TOL * slack {
            return bad(format!("negative eigenvalue {min_ev:e}"));
        }
        Ok(())
    }

    /// |ψ⟩⟨ψ| for a normalised column vector.
    pub fn from_pure(psi: &[C64], space: Space) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "state vector norm^2 = {norm}"
            )));
        }
        let n = psi.len();
        let m = Array2::from_shape_fn((n, n), |(i, j)| psi[i] * psi[j].conj());
        Self::new(m, space)
    }

    /// |e⟩⟨e| ⊗ |0⟩⟨0|, the initial state of every reproduction run.
    pub fn excited_vacuum(cutoff: FockCutoff) -> Self {
        let d = cutoff.composite_dim();
        let mut m = Array2::zeros((d, d));
        m[[0, 0]] = C64::new(1.0, 0.0);
        DensityMatrix {
            matrix: m,
            space: Space::Composite(cutoff),
        }
    }

    /// |e⟩⟨e| on the atom alone.
    pub fn excited_atom() -> Self {
        let mut m = Array2::zeros((2, 2));
        m[[0, 0]] = C64::new(1.0, 0.0);
        DensityMatrix {
            matrix: m,
            space: Space::AtomOnly,
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Reduced atomic state; the identity for atom-only states.
    pub fn atom(&self) -> DensityMatrix {
        match self.space {
            Space::AtomOnly => self.clone(),
            Space::Composite(_) => partial_trace_field(self).expect("composite"),
        }
    }
}

/// Annihilation operator on the truncated field: a[n-1, n] = √n.
pub fn fock_lowering(cutoff: FockCutoff) -> ComplexMatrix {
    let d = cutoff.field_dim();
    let mut a = Array2::zeros((d, d));
    for n in 1..d {
        a[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

pub fn fock_raising(cutoff: FockCutoff) -> ComplexMatrix {
    dagger(&fock_lowering(cutoff))
}

pub fn number_operator(cutoff: FockCutoff) -> ComplexMatrix {
    let d = cutoff.field_dim();
    Array2::from_shape_fn((d, d), |(i, j)| {
        if i == j {
            C64::new(i as f64, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Qubit ladder and inversion operators in the (|e⟩, |g⟩) basis.
#[derive(Debug, Clone)]
pub struct QubitOperators {
    pub sigma_plus: ComplexMatrix,
    pub sigma_minus: ComplexMatrix,
    pub sigma_z: ComplexMatrix,
}

pub fn qubit_operators() -> QubitOperators {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    QubitOperators {
        sigma_plus: ndarray::array![[zero, one], [zero, zero]],
        sigma_minus: ndarray::array![[zero, zero], [one, zero]],
        sigma_z: ndarray::array![[one, zero], [zero, -one]],
    }
}

/// Kronecker product with `a` as the leftmost factor.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| {
        a[[i / br, j / bc]] * b[[i % br, j % bc]]
    })
}

/// Traces out the field, leaving the 2×2 atomic state.
pub fn partial_trace_field(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let cutoff = match rho.space {
        Space::Composite(c) => c,
        Space::AtomOnly => return Err(Error::WrongSpace { expected: "composite" }),
    };
    let m = ptrace_field_matrix(&rho.matrix, cutoff.field_dim());
    Ok(DensityMatrix {
        matrix: m,
        space: Space::AtomOnly,
    })
}

/// Partial trace over the field factor of any composite operator.
pub fn ptrace_field_matrix(m: &ComplexMatrix, field_dim: usize) -> ComplexMatrix {
    let mut out = Array2::zeros((2, 2));
    for a in 0..2 {
        for b in 0..2 {
            let mut s = C64::new(0.0, 0.0);
            for n in 0..field_dim {
                s += m[[a * field_dim + n, b * field_dim + n]];
            }
            out[[a, b]] = s;
        }
    }
    out
}

/// D(α) = exp(α a† − α* a), exponentiated on the truncated space.
pub fn displacement(alpha: C64, cutoff: FockCutoff) -> ComplexMatrix {
    if alpha.norm_sqr() > 0.25 * cutoff.n_max() as f64 {
        log::warn!(
            "displacement |alpha|^2 = {:.3} is not small against n_max = {}; truncation error likely",
            alpha.norm_sqr(),
            cutoff.n_max()
        );
    }
    let a = fock_lowering(cutoff);
    let gen = dagger(&a) * alpha - a * alpha.conj();
    linalg::expm(&gen).expect("square generator")
}

/// D(α)|0⟩ on the truncated space, as a state vector.
pub fn coherent_state(alpha: C64, cutoff: FockCutoff) -> Vec<C64> {
    let d = displacement(alpha, cutoff);
    d.column(0).to_vec()
}

/// S = −Σ λ ln λ in nats, with eigenvalues clamped to [0, 1].
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    let ev = hermitian_eigenvalues(&rho.matrix).expect("square");
    ev.into_iter()
        .map(|l| l.clamp(0.0, 1.0))
        .filter(|&l| l > 0.0)
        .map(|l| -l * l.ln())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::linalg::{identity, max_abs_diff};
    use super::*;
    use proptest::prelude::*;

    fn cut(n: usize) -> FockCutoff {
        FockCutoff::new(n).unwrap()
    }

    #[test]
    fn cutoff_rejects_zero() {
        assert_eq!(FockCutoff::new(0), Err(Error::InvalidCutoff(0)));
        assert_eq!(cut(15).composite_dim(), 32);
    }

    #[test]
    fn lowering_operator_entries() {
        let a = fock_lowering(cut(1));
        assert_eq!(a[[0, 1]], C64::new(1.0, 0.0));
        let a = fock_lowering(cut(4));
        assert_eq!(a[[3, 4]], C64::new(2.0, 0.0));
        assert!(a.column(0).iter().all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn number_operator_is_exact_diagonal() {
        let c = cut(9);
        let n = fock_raising(c).dot(&fock_lowering(c));
        for i in 0..10 {
            for j in 0..10 {
                let want = if i == j { i as f64 } else { 0.0 };
                assert!((n[[i, j]] - C64::new(want, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn qubit_algebra() {
        let q = qubit_operators();
        let e = ndarray::array![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        assert_eq!(q.sigma_z.dot(&e), e);
        let proj = q.sigma_plus.dot(&q.sigma_minus);
        assert_eq!(proj[[0, 0]], C64::new(1.0, 0.0));
        assert_eq!(max_abs_diff(&proj, &Array2::from_shape_fn((2, 2), |(i, j)| {
            if i == 0 && j == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }
        })), 0.0);
        let comm = linalg::commutator(&q.sigma_plus, &q.sigma_minus);
        assert_eq!(comm, q.sigma_z);
    }

    #[test]
    fn tensor_of_identities_and_eigenvalue() {
        assert_eq!(tensor(&identity(2), &identity(3)), identity(6));
        let q = qubit_operators();
        let sz = tensor(&q.sigma_z, &identity(3));
        // |e⟩ ⊗ |0⟩ is composite index 0
        assert_eq!(sz[[0, 0]], C64::new(1.0, 0.0));
        assert_eq!(sz[[3, 3]], C64::new(-1.0, 0.0));
    }

    #[test]
    fn partial_trace_of_product_state() {
        let rho = DensityMatrix::excited_vacuum(cut(3));
        let at = partial_trace_field(&rho).unwrap();
        assert_eq!(at.matrix(), DensityMatrix::excited_atom().matrix());
        assert!(partial_trace_field(&at).is_err());
    }

    #[test]
    fn partial_trace_of_max_entangled_state() {
        let c = cut(2);
        let s = 1.0 / 2f64.sqrt();
        let mut psi = vec![C64::new(0.0, 0.0); 6];
        psi[0] = C64::new(s, 0.0); // |e⟩|0⟩
        psi[4] = C64::new(0.0, -s); // |g⟩|1⟩
        let rho = DensityMatrix::from_pure(&psi, Space::Composite(c)).unwrap();
        let at = partial_trace_field(&rho).unwrap();
        assert!(max_abs_diff(at.matrix(), &(identity(2) * C64::new(0.5, 0.0))) < 1e-15);
        assert!((von_neumann_entropy(&at) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn displacement_identity_and_coherent_photon_number() {
        let c = cut(20);
        assert!(max_abs_diff(&displacement(C64::new(0.0, 0.0), c), &identity(21)) < 1e-15);
        let alpha = C64::new(0.0, 0.5);
        let psi = coherent_state(alpha, c);
        let n: f64 = psi.iter().enumerate().map(|(k, z)| k as f64 * z.norm_sqr()).sum();
        assert!((n - 0.25).abs() < 1e-6);
    }

    #[test]
    fn displacement_is_unitary_for_small_alpha() {
        let c = cut(20);
        for alpha in [C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(0.6, 0.7)] {
            let d = displacement(alpha, c);
            let err = max_abs_diff(&dagger(&d).dot(&d), &identity(21));
            assert!(err < 1e-8, "alpha = {alpha}: {err:e}");
        }
    }

    #[test]
    fn entropy_values() {
        assert_eq!(von_neumann_entropy(&DensityMatrix::excited_atom()), 0.0);
        let mixed = DensityMatrix::new(
            Array2::from_diag(&ndarray::arr1(&[C64::new(0.9, 0.0), C64::new(0.1, 0.0)])),
            Space::AtomOnly,
        )
        .unwrap();
        // −0.9 ln 0.9 − 0.1 ln 0.1 evaluated directly
        let want = -(0.9f64 * 0.9f64.ln()) - 0.1 * 0.1f64.ln();
        assert!((want - 0.3251).abs() < 1e-4);
        assert!((von_neumann_entropy(&mixed) - want).abs() < 1e-14);
    }

    #[test]
    fn density_matrix_rejects_bad_input() {
        let m = Array2::from_diag(&ndarray::arr1(&[C64::new(0.7, 0.0), C64::new(0.1, 0.0)]));
        assert!(DensityMatrix::new(m, Space::AtomOnly).is_err());
        let m = Array2::from_diag(&ndarray::arr1(&[C64::new(1.2, 0.0), C64::new(-0.2, 0.0)]));
        assert!(DensityMatrix::new(m, Space::AtomOnly).is_err());
        let m = Array2::zeros((3, 3));
        assert!(DensityMatrix::new(m, Space::AtomOnly).is_err());
    }

    fn random_density(seed: u64, dim: usize) -> ComplexMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((dim, dim), |_| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let p = x.dot(&dagger(&x));
        let tr = trace(&p);
        p / tr
    }

    #[test]
    fn partial_trace_preserves_sigma_z_expectation() {
        let c = cut(3);
        let rho = DensityMatrix::new(random_density(7, 8), Space::Composite(c)).unwrap();
        let at = partial_trace_field(&rho).unwrap();
        assert!((trace(at.matrix()) - C64::new(1.0, 0.0)).norm() < 1e-12);
        let q = qubit_operators();
        let full = trace(&tensor(&q.sigma_z, &identity(4)).dot(rho.matrix()));
        let red = trace(&q.sigma_z.dot(at.matrix()));
        assert!((full - red).norm() < 1e-12);
    }

    #[test]
    fn trace_of_tensor_is_product_of_traces() {
        let a = random_density(1, 2) * C64::new(1.3, -0.2);
        let b = random_density(2, 3) * C64::new(-0.4, 2.0);
        let lhs = trace(&tensor(&a, &b));
        let rhs = trace(&a) * trace(&b);
        assert!((lhs - rhs).norm() < 1e-13);
    }

    proptest! {
        #[test]
        fn partial_trace_is_linear(s1 in 0u64..1000, s2 in 0u64..1000, x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let (r1, r2) = (random_density(s1, 6), random_density(s2, 6));
            let combo = &r1 * C64::from(x) + &r2 * C64::from(y);
            let lhs = ptrace_field_matrix(&combo, 3);
            let rhs = ptrace_field_matrix(&r1, 3) * C64::from(x) + ptrace_field_matrix(&r2, 3) * C64::from(y);
            prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
        }

        #[test]
        fn qubit_entropy_is_bounded(seed in 0u64..10_000) {
            let rho = DensityMatrix::new(random_density(seed, 2), Space::AtomOnly).unwrap();
            let s = von_neumann_entropy(&rho);
            prop_assert!(s >= 0.0 && s <= 2f64.ln() + 1e-9);
        }

        #[test]
        fn jacobi_spectrum_preserves_trace_and_frobenius(seed in 0u64..10_000) {
            let m = random_density(seed, 7);
            let ev = hermitian_eigenvalues(&m).unwrap();
            let tr: f64 = ev.iter().sum();
            let fro: f64 = ev.iter().map(|l| l * l).sum();
            let want_fro: f64 = m.iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((tr - 1.0).abs() < 1e-12);
            prop_assert!((fro - want_fro).abs() < 1e-12);
            prop_assert!(ev[0] > -1e-12);
        }
    }
}
