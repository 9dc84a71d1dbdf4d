//! Heat and work fluxes on the atom, first-law bookkeeping and photon counts.
//!
//! Both fluxes are rates of change of the bare atomic energy (ω/2)σ_z and are
//! reported as J/(ħωg), which is free of ω. Work is the part generated by the
//! classical drive H_SC = αgσ₊ + α*gσ₋ of the displaced picture; heat is
//! everything else (the Jaynes–Cummings coupling plus both dissipators),
//! traced over the field.

use crate::dynamics::{LindbladGenerator, Picture, SystemParams, Trajectory};
use crate::error::{Error, Result};
use crate::hilbert::linalg::identity;
use crate::hilbert::{
    fock_lowering, qubit_operators, tensor, von_neumann_entropy, ComplexMatrix, DensityMatrix,
    Space, C64,
};

/// Atomic observables and normalised fluxes at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxSample {
    pub t: f64,
    /// J_W / ħωg
    pub jw_norm: f64,
    /// J_Q / ħωg
    pub jq_norm: f64,
    /// von Neumann entropy of the atom, nats
    pub entropy: f64,
    pub sigma_z: f64,
    pub re_sigma_plus: f64,
    pub im_sigma_plus: f64,
}

impl FluxSample {
    pub fn entropy_norm(&self) -> f64 {
        self.entropy / std::f64::consts::LN_2
    }
}

/// Photons that crossed the cavity versus photons resident in it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonAccounting {
    pub n_flux: f64,
    pub n_cav: f64,
}

/// ⟨σ_z⟩ of a composite or atomic matrix without forming the reduced state.
pub fn sigma_z_of(m: &ComplexMatrix) -> f64 {
    let d = m.nrows();
    let half = d / 2;
    (0..half).map(|n| m[[n, n]].re - m[[half + n, half + n]].re).sum()
}

/// ⟨σ₊⟩ = ⟨g|ρ_at|e⟩.
fn sigma_plus_of(rho_at: &DensityMatrix) -> C64 {
    rho_at.matrix()[[1, 0]]
}

/// J_W/(ωg) = −(2ε/κ) Re⟨σ₊⟩, identical for the full and effective models.
pub fn work_flux_norm(rho: &DensityMatrix, params: &SystemParams) -> f64 {
    let at = rho.atom();
    -2.0 * params.eps / params.kappa * sigma_plus_of(&at).re
}

/// Generator of everything except the classical drive: H_JC plus the κ and γ
/// dissipators, on the displaced-picture composite space.
pub fn heat_generator(params: &SystemParams) -> Result<LindbladGenerator> {
    if params.picture != Picture::Displaced {
        return Err(Error::PictureMismatch { expected: "displaced", found: params.picture.as_str() });
    }
    params.validate()?;
    let q = qubit_operators();
    let c = params.cutoff;
    let a = fock_lowering(c);
    let ad = a.t().mapv(|z| z.conj());
    let h_jc = (tensor(&q.sigma_plus, &a) + tensor(&q.sigma_minus, &ad)) * C64::from(params.g);
    let collapse = vec![
        (params.kappa, tensor(&identity(2), &a)),
        (params.gamma, tensor(&q.sigma_minus, &identity(c.field_dim()))),
    ];
    LindbladGenerator::new(h_jc, collapse, Space::Composite(c))
}

fn require_coupling(params: &SystemParams) -> Result<()> {
    if params.g <= 0.0 {
        return Err(Error::InvalidParams("fluxes are normalised by g, which must be > 0".into()));
    }
    Ok(())
}

/// J_Q/(ωg) = tr((σ_z/2) tr_f[−i[H_JC, ρ̃] + κ𝓛_a ρ̃ + γ𝓛_σ₋ ρ̃]) / g.
pub fn heat_flux_norm_full(rho: &DensityMatrix, params: &SystemParams) -> Result<f64> {
    require_coupling(params)?;
    let gen = heat_generator(params)?;
    if !matches!(rho.space(), Space::Composite(c) if c == params.cutoff) {
        return Err(Error::WrongSpace { expected: "composite" });
    }
    let d = gen.apply_matrix(rho.matrix())?;
    Ok(0.5 * sigma_z_of(&d) / params.g)
}

/// J_Q/(ωg) = −(2g/κ)⟨σ₊σ₋⟩ − (2γ/g)⟨σ₊σ₋⟩, the leading-in-ω part of the
/// adiabatic-elimination result.
pub fn heat_flux_norm_effective(rho: &DensityMatrix, params: &SystemParams) -> Result<f64> {
    let at = rho.atom();
    let pe = at.matrix()[[0, 0]].re;
    let mut jq = -2.0 * params.g / params.kappa * pe;
    if params.gamma > 0.0 {
        require_coupling(params)?;
        jq -= 2.0 * params.gamma / params.g * pe;
    }
    Ok(jq)
}

/// Evaluates [`FluxSample`]s for many states of one parameter set.
#[derive(Debug, Clone)]
pub struct FluxEvaluator {
    params: SystemParams,
    heat_gen: Option<LindbladGenerator>,
}

impl FluxEvaluator {
    pub fn new(params: &SystemParams) -> Result<Self> {
        params.validate()?;
        let heat_gen = match params.picture {
            Picture::Displaced => {
                require_coupling(params)?;
                Some(heat_generator(params)?)
            }
            Picture::EffectiveAtom => None,
            Picture::RotatingLab => {
                return Err(Error::PictureMismatch {
                    expected: "displaced or effective-atom",
                    found: params.picture.as_str(),
                })
            }
        };
        Ok(FluxEvaluator { params: *params, heat_gen })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn heat_norm(&self, rho: &DensityMatrix) -> Result<f64> {
        match &self.heat_gen {
            Some(gen) => {
                let d = gen.apply_matrix(rho.matrix())?;
                Ok(0.5 * sigma_z_of(&d) / self.params.g)
            }
            None => heat_flux_norm_effective(rho, &self.params),
        }
    }

    pub fn sample(&self, t: f64, rho: &DensityMatrix) -> Result<FluxSample> {
        let at = rho.atom();
        let sp = sigma_plus_of(&at);
        Ok(FluxSample {
            t,
            jw_norm: work_flux_norm(&at, &self.params),
            jq_norm: self.heat_norm(rho)?,
            entropy: von_neumann_entropy(&at),
            sigma_z: sigma_z_of(at.matrix()),
            re_sigma_plus: sp.re,
            im_sigma_plus: sp.im,
        })
    }
}

/// Largest first-law residual |d⟨σ_z/2⟩/dt / g − (J_W + J_Q)/(ωg)| over the
/// segment midpoints. The left side is the exact derivative of the cubic
/// Hermite interpolant of ⟨σ_z⟩; the fluxes are evaluated on the
/// interpolated state.
pub fn energy_balance(trajectory: &Trajectory, params: &SystemParams) -> Result<f64> {
    let eval = FluxEvaluator::new(params)?;
    let times = trajectory.times();
    let z: Vec<f64> = trajectory.states().iter().map(|s| sigma_z_of(s.matrix())).collect();
    let dz: Vec<f64> = trajectory.derivatives().iter().map(sigma_z_of).collect();
    let mut worst: f64 = 0.0;
    for i in 0..times.len().saturating_sub(1) {
        let h = times[i + 1] - times[i];
        if h <= 0.0 {
            continue;
        }
        let mid = times[i] + 0.5 * h;
        let slope = 1.5 * (z[i + 1] - z[i]) / h - 0.25 * (dz[i] + dz[i + 1]);
        let lhs = 0.5 * slope / params.g;
        let s = eval.sample(mid, &trajectory.state_at(mid))?;
        worst = worst.max((lhs - (s.jw_norm + s.jq_norm)).abs());
    }
    Ok(worst)
}

/// n̄_flux = (εt)², n̄_cav = (ε/κ)².
pub fn photon_accounting(t: f64, params: &SystemParams) -> PhotonAccounting {
    PhotonAccounting {
        n_flux: (params.eps * t).powi(2),
        n_cav: (params.eps / params.kappa).powi(2),
    }
}

/// Time-integrated work and heat, ∫J dt / ħω, by the trapezoid rule over
/// samples of one run. Diagnostic only.
pub fn integrated_fluxes(samples: &[FluxSample], g: f64) -> (f64, f64) {
    samples.windows(2).fold((0.0, 0.0), |(w, q), s| {
        let dt = s[1].t - s[0].t;
        (
            w + 0.5 * dt * g * (s[0].jw_norm + s[1].jw_norm),
            q + 0.5 * dt * g * (s[0].jq_norm + s[1].jq_norm),
        )
    })
}
