//! Lindblad generators for the three pictures of the driven cavity and their
//! time integration.
//!
//! All pictures use the dissipator convention
//! 𝓛_c(ρ) = 2cρc† − c†cρ − ρc†c, multiplied by the rate, so a field
//! amplitude decays at κ and the photon number at 2κ.

mod integrator;
pub mod propagator;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::hilbert::linalg::{dagger, ensure_square, hermiticity_error, identity, trace};
use crate::hilbert::{
    fock_lowering, qubit_operators, tensor, ComplexMatrix, DensityMatrix, FockCutoff, Space, C64,
};

pub use integrator::{evolve, evolve_with, EvolveOptions, IntegratorStats, Recording, Trajectory};

/// Frame in which the master equation is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Picture {
    /// Interaction picture of the lab frame, drive on the cavity.
    RotatingLab,
    /// Cavity displaced by α = −iε/κ; the drive acts on the atom.
    Displaced,
    /// Field adiabatically eliminated; atom-only master equation.
    EffectiveAtom,
}

impl Picture {
    pub fn as_str(self) -> &'static str {
        match self {
            Picture::RotatingLab => "rotating-lab",
            Picture::Displaced => "displaced",
            Picture::EffectiveAtom => "effective-atom",
        }
    }
}

impl std::str::FromStr for Picture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rotating-lab" | "lab" => Ok(Picture::RotatingLab),
            "displaced" => Ok(Picture::Displaced),
            "effective-atom" | "effective" => Ok(Picture::EffectiveAtom),
            other => Err(Error::InvalidParams(format!("unknown picture '{other}'"))),
        }
    }
}

impl std::fmt::Display for Picture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Model configuration. Rates are in units of κ when κ is set to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub g: f64,
    pub eps: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub cutoff: FockCutoff,
    pub picture: Picture,
}

impl SystemParams {
    /// Displaced-picture parameters with κ = 1, γ = 0 and the default cutoff.
    pub fn displaced(g: f64, eps: f64) -> Self {
        SystemParams {
            g,
            eps,
            kappa: 1.0,
            gamma: 0.0,
            cutoff: FockCutoff::DEFAULT,
            picture: Picture::Displaced,
        }
    }

    pub fn with_picture(mut self, picture: Picture) -> Self {
        self.picture = picture;
        self
    }

    pub fn with_cutoff(mut self, cutoff: FockCutoff) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("g", self.g), ("eps", self.eps), ("kappa", self.kappa), ("gamma", self.gamma)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.kappa == 0.0 && self.picture != Picture::RotatingLab {
            return Err(Error::InvalidParams(format!(
                "kappa = 0 is undefined in the {} picture",
                self.picture
            )));
        }
        Ok(())
    }

    /// Steady cavity amplitude α = −iε/κ.
    pub fn alpha(&self) -> C64 {
        C64::new(0.0, -self.eps / self.kappa)
    }

    /// Γ_eff = g²/κ + γ.
    pub fn gamma_eff(&self) -> f64 {
        self.g * self.g / self.kappa + self.gamma
    }

    /// Ω = 2εg/κ, the Rabi frequency of the effective classical drive.
    pub fn rabi_frequency(&self) -> f64 {
        2.0 * self.eps * self.g / self.kappa
    }

    pub fn space(&self) -> Space {
        match self.picture {
            Picture::EffectiveAtom => Space::AtomOnly,
            _ => Space::Composite(self.cutoff),
        }
    }

    /// The picture's natural initial state: |e⟩|0⟩, or |e⟩ for the atom alone.
    pub fn initial_state(&self) -> DensityMatrix {
        match self.picture {
            Picture::EffectiveAtom => DensityMatrix::excited_atom(),
            _ => DensityMatrix::excited_vacuum(self.cutoff),
        }
    }
}

#[derive(Debug, Clone, Default)]
struct SparseOp {
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    fn from_dense(m: &ComplexMatrix) -> Self {
        let entries = m
            .indexed_iter()
            .filter(|(_, z)| z.norm() > 0.0)
            .map(|((i, j), z)| (i, j, *z))
            .collect();
        SparseOp { entries }
    }
}

/// Right-hand side ρ ↦ dρ/dt of a Lindblad master equation.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    hamiltonian: ComplexMatrix,
    collapse_terms: Vec<(f64, ComplexMatrix)>,
    space: Space,
    // H − i Σ r c†c, and the jump operators with weights 2r.
    h_eff: SparseOp,
    jumps: Vec<(f64, SparseOp)>,
}

impl LindbladGenerator {
    pub fn new(
        hamiltonian: ComplexMatrix,
        collapse_terms: Vec<(f64, ComplexMatrix)>,
        space: Space,
    ) -> Result<Self> {
        let d = ensure_square(&hamiltonian)?;
        if d != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: d });
        }
        let herm = hermiticity_error(&hamiltonian);
        if herm > 1e-12 {
            return Err(Error::InvalidParams(format!("hamiltonian not Hermitian ({herm:e})")));
        }
        let mut h_eff = hamiltonian.clone();
        let mut jumps = Vec::new();
        for (rate, c) in &collapse_terms {
            if ensure_square(c)? != d {
                return Err(Error::DimensionMismatch { expected: d, found: c.nrows() });
            }
            if *rate < 0.0 || !rate.is_finite() {
                return Err(Error::InvalidParams(format!("collapse rate {rate}")));
            }
            if *rate == 0.0 {
                continue;
            }
            h_eff = h_eff - dagger(c).dot(c) * C64::new(0.0, *rate);
            jumps.push((2.0 * rate, SparseOp::from_dense(c)));
        }
        Ok(LindbladGenerator {
            h_eff: SparseOp::from_dense(&h_eff),
            hamiltonian,
            collapse_terms,
            space,
            jumps,
        })
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn collapse_terms(&self) -> &[(f64, ComplexMatrix)] {
        &self.collapse_terms
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn space(&self) -> Space {
        self.space
    }

    /// Writes dρ/dt for a row-major flattened `rho` into `out`; `scratch` must
    /// have the same length.
    pub(crate) fn apply_flat(&self, rho: &[C64], out: &mut [C64], scratch: &mut [C64]) {
        let d = self.dim();
        let zero = C64::new(0.0, 0.0);
        let minus_i = C64::new(0.0, -1.0);
        out.fill(zero);

        for &(i, k, v) in &self.h_eff.entries {
            let coef = minus_i * v;
            let src = &rho[k * d..(k + 1) * d];
            for (o, r) in out[i * d..(i + 1) * d].iter_mut().zip(src) {
                *o += coef * r;
            }
        }
        // ρ H_eff†: (ρ H_eff†)[i][j] = Σ_k ρ[i][k] conj(H_eff[j][k])
        for &(j, k, v) in &self.h_eff.entries {
            let coef = (minus_i * v).conj();
            for i in 0..d {
                out[i * d + j] += coef * rho[i * d + k];
            }
        }
        for (w, c) in &self.jumps {
            scratch.fill(zero);
            for &(i, k, v) in &c.entries {
                let src = &rho[k * d..(k + 1) * d];
                for (o, r) in scratch[i * d..(i + 1) * d].iter_mut().zip(src) {
                    *o += v * r;
                }
            }
            for &(j, k, v) in &c.entries {
                let coef = v.conj() * *w;
                for i in 0..d {
                    out[i * d + j] += coef * scratch[i * d + k];
                }
            }
        }
    }

    /// Dense dρ/dt for any square matrix of matching dimension.
    pub fn apply_matrix(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = self.dim();
        if rho.dim() != (d, d) {
            return Err(Error::DimensionMismatch { expected: d, found: rho.nrows() });
        }
        let flat: Vec<C64> = rho.iter().copied().collect();
        let mut out = vec![C64::new(0.0, 0.0); d * d];
        let mut scratch = out.clone();
        self.apply_flat(&flat, &mut out, &mut scratch);
        Ok(Array2::from_shape_vec((d, d), out).expect("shape"))
    }
}

/// Assembles the generator for `params.picture`.
pub fn build_generator(params: &SystemParams) -> Result<LindbladGenerator> {
    params.validate()?;
    let q = qubit_operators();
    match params.picture {
        Picture::RotatingLab | Picture::Displaced => {
            let c = params.cutoff;
            let a = fock_lowering(c);
            let ad = dagger(&a);
            let i_at = identity(2);
            let i_f = identity(c.field_dim());
            let g = C64::from(params.g);
            let mut h = (tensor(&q.sigma_plus, &a) + tensor(&q.sigma_minus, &ad)) * g;
            match params.picture {
                Picture::RotatingLab => {
                    h = h + tensor(&i_at, &(&a + &ad)) * C64::from(params.eps);
                }
                _ => {
                    let alpha = params.alpha();
                    let h_sc = &q.sigma_plus * (alpha * g) + &q.sigma_minus * (alpha.conj() * g);
                    h = h + tensor(&h_sc, &i_f);
                }
            }
            let collapse = vec![
                (params.kappa, tensor(&i_at, &a)),
                (params.gamma, tensor(&q.sigma_minus, &i_f)),
            ];
            LindbladGenerator::new(h, collapse, Space::Composite(c))
        }
        Picture::EffectiveAtom => {
            let amp = params.eps * params.g / params.kappa;
            let h = (&q.sigma_plus - &q.sigma_minus) * C64::new(0.0, -amp);
            LindbladGenerator::new(h, vec![(params.gamma_eff(), q.sigma_minus)], Space::AtomOnly)
        }
    }
}

/// dρ/dt = −i[H, ρ] + Σ r (2cρc† − c†cρ − ρc†c).
pub fn apply_generator(gen: &LindbladGenerator, rho: &DensityMatrix) -> Result<ComplexMatrix> {
    gen.apply_matrix(rho.matrix())
}

/// tr(op ρ).
pub fn expectation(rho: &DensityMatrix, op: &ComplexMatrix) -> Result<C64> {
    if op.dim() != (rho.dim(), rho.dim()) {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: op.nrows() });
    }
    Ok(trace(&op.dot(rho.matrix())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::linalg::{commutator, max_abs_diff};
    use proptest::prelude::*;

    fn cut(n: usize) -> FockCutoff {
        FockCutoff::new(n).unwrap()
    }

    fn random_hermitian(seed: u64, d: usize) -> ComplexMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((d, d), |_| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        &x + &dagger(&x)
    }

    // Direct dense evaluation of the Lindblad form, independent of the sparse path.
    fn dense_lindblad(gen: &LindbladGenerator, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = commutator(gen.hamiltonian(), rho) * C64::new(0.0, -1.0);
        for (r, c) in gen.collapse_terms() {
            let cd = dagger(c);
            let cdc = cd.dot(c);
            out = out
                + (c.dot(rho).dot(&cd) * C64::from(2.0) - cdc.dot(rho) - rho.dot(&cdc))
                    * C64::from(*r);
        }
        out
    }

    #[test]
    fn params_validation() {
        assert!(SystemParams::displaced(0.1, 1.0).validate().is_ok());
        assert!(SystemParams::displaced(-0.1, 1.0).validate().is_err());
        let p = SystemParams::displaced(0.1, 1.0).with_kappa(0.0);
        assert!(build_generator(&p).is_err());
        assert!(build_generator(&p.with_picture(Picture::EffectiveAtom)).is_err());
        assert!(build_generator(&p.with_picture(Picture::RotatingLab)).is_ok());
    }

    #[test]
    fn photon_decay_rate_has_factor_two() {
        // |e⟩⟨e| ⊗ |1⟩⟨1| under κ = 1 decay of I ⊗ a, cutoff 1
        let c = cut(1);
        let a = tensor(&identity(2), &fock_lowering(c));
        let gen =
            LindbladGenerator::new(Array2::zeros((4, 4)), vec![(1.0, a)], Space::Composite(c))
                .unwrap();
        let mut rho = Array2::zeros((4, 4));
        rho[[1, 1]] = C64::new(1.0, 0.0);
        let d = gen.apply_matrix(&rho).unwrap();
        let mut want = Array2::zeros((4, 4));
        want[[0, 0]] = C64::new(2.0, 0.0);
        want[[1, 1]] = C64::new(-2.0, 0.0);
        assert!(max_abs_diff(&d, &want) < 1e-15);
    }

    #[test]
    fn sparse_apply_matches_dense_formula_all_pictures() {
        for picture in [Picture::RotatingLab, Picture::Displaced, Picture::EffectiveAtom] {
            let p = SystemParams::displaced(0.7, 0.4)
                .with_gamma(0.3)
                .with_cutoff(cut(4))
                .with_picture(picture);
            let gen = build_generator(&p).unwrap();
            let rho = random_hermitian(11, gen.dim());
            let got = gen.apply_matrix(&rho).unwrap();
            assert!(max_abs_diff(&got, &dense_lindblad(&gen, &rho)) < 1e-12, "{picture}");
        }
    }

    #[test]
    fn displaced_hamiltonian_contains_classical_drive() {
        let p = SystemParams::displaced(0.5, 2.0).with_cutoff(cut(2));
        let gen = build_generator(&p).unwrap();
        // ⟨e,0| H |g,0⟩ = α g with α = −iε/κ
        let h = gen.hamiltonian();
        assert!((h[[0, 3]] - C64::new(0.0, -1.0)).norm() < 1e-15);
        assert!((h[[3, 0]] - C64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn effective_generator_shape() {
        let p = SystemParams::displaced(0.01, 1.0).with_picture(Picture::EffectiveAtom);
        let gen = build_generator(&p).unwrap();
        assert_eq!(gen.dim(), 2);
        assert!((gen.collapse_terms()[0].0 - 1e-4).abs() < 1e-18);
        assert!((gen.hamiltonian()[[0, 1]] - C64::new(0.0, -0.01)).norm() < 1e-15);
    }

    #[test]
    fn expectation_examples() {
        let q = qubit_operators();
        let e = DensityMatrix::excited_atom();
        assert_eq!(expectation(&e, &q.sigma_z).unwrap(), C64::new(1.0, 0.0));
        let mixed = DensityMatrix::new(identity(2) * C64::from(0.5), Space::AtomOnly).unwrap();
        assert_eq!(expectation(&mixed, &q.sigma_plus).unwrap(), C64::new(0.0, 0.0));
        assert!(expectation(&e, &identity(3)).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let gen = build_generator(&SystemParams::displaced(0.1, 0.1).with_cutoff(cut(2))).unwrap();
        assert!(apply_generator(&gen, &DensityMatrix::excited_atom()).is_err());
    }

    proptest! {
        #[test]
        fn generator_output_is_traceless_and_hermitian(seed in 0u64..5000, g in 0.0f64..3.0, eps in 0.0f64..3.0, gamma in 0.0f64..1.0) {
            for picture in [Picture::RotatingLab, Picture::Displaced, Picture::EffectiveAtom] {
                let p = SystemParams::displaced(g, eps).with_gamma(gamma).with_cutoff(cut(3)).with_picture(picture);
                let gen = build_generator(&p).unwrap();
                let rho = random_hermitian(seed, gen.dim());
                let d = gen.apply_matrix(&rho).unwrap();
                prop_assert!(trace(&d).norm() < 1e-12);
                prop_assert!(hermiticity_error(&d) < 1e-12);
            }
        }
    }
}
