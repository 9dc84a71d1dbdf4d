//! Fixed-step propagation with the exponential of the vectorised generator.
//!
//! This backend shares nothing with the Runge–Kutta path except the generator
//! definition, so the two serve as oracles for each other.

use ndarray::{Array1, Array2};

use super::LindbladGenerator;
use crate::error::{Error, Result};
use crate::hilbert::linalg::{dagger, expm, identity};
use crate::hilbert::{tensor, ComplexMatrix, DensityMatrix, C64};

/// Superoperator 𝓛 acting on row-major vec(ρ): vec(AρB) = (A ⊗ Bᵀ) vec(ρ).
pub fn superoperator(gen: &LindbladGenerator) -> ComplexMatrix {
    let d = gen.dim();
    let eye = identity(d);
    let h = gen.hamiltonian();
    let mut l = (tensor(h, &eye) - tensor(&eye, &h.t().to_owned())) * C64::new(0.0, -1.0);
    for (rate, c) in gen.collapse_terms() {
        if *rate == 0.0 {
            continue;
        }
        let cdc = dagger(c).dot(c);
        let jump = tensor(c, &c.mapv(|z| z.conj())) * C64::from(2.0);
        l = l + (jump - tensor(&cdc, &eye) - tensor(&eye, &cdc.t().to_owned())) * C64::from(*rate);
    }
    l
}

/// exp(𝓛 Δt), applied repeatedly.
#[derive(Debug, Clone)]
pub struct ExpmPropagator {
    step: f64,
    matrix: ComplexMatrix,
}

impl ExpmPropagator {
    pub fn new(gen: &LindbladGenerator, step: f64) -> Result<Self> {
        if step.is_nan() || step <= 0.0 {
            return Err(Error::InvalidParams(format!("propagator step must be > 0, got {step}")));
        }
        let l = superoperator(gen) * C64::from(step);
        Ok(ExpmPropagator { step, matrix: expm(&l)? })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn propagate(&self, rho: &DensityMatrix, n_steps: usize) -> Result<DensityMatrix> {
        let d = rho.dim();
        if d * d != self.matrix.nrows() {
            return Err(Error::DimensionMismatch { expected: self.matrix.nrows(), found: d * d });
        }
        let mut v: Array1<C64> = rho.matrix().iter().copied().collect();
        for _ in 0..n_steps {
            v = self.matrix.dot(&v);
        }
        let m = Array2::from_shape_vec((d, d), v.to_vec()).expect("shape");
        DensityMatrix::new_unchecked(m, rho.space())
    }
}

/// ρ(t_end) from `n_steps` equal propagator steps.
pub fn evolve_expm(
    gen: &LindbladGenerator,
    rho0: &DensityMatrix,
    t_end: f64,
    n_steps: usize,
) -> Result<DensityMatrix> {
    if n_steps == 0 {
        return Err(Error::InvalidParams("n_steps must be >= 1".into()));
    }
    let prop = ExpmPropagator::new(gen, t_end / n_steps as f64)?;
    prop.propagate(rho0, n_steps)
}
