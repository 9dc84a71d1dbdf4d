//! Weak-coupling analysis: the adiabatically eliminated atom, where the
//! cavity acts as a classical drive plus an extra decay channel.

use ndarray::Array2;

use crate::dynamics::{build_generator, evolve, Picture, SystemParams};
use crate::error::{Error, Result};
use crate::experiments::{default_g_grid, find_tstar, run_fig2, RunSettings};
use crate::hilbert::linalg::expm;
use crate::hilbert::C64;
use crate::thermo::FluxEvaluator;

/// Tolerance for effective-model integrations.
const EFFECTIVE_TOL: f64 = 1e-10;
/// Resolution of the critical-drive bisection, in units of κ.
pub const CRITICAL_RESOLUTION: f64 = 0.05;

/// Closed-form ⟨σ_z⟩(t) and ⟨σ₊⟩(t) of the damped Rabi problem, starting in |e⟩.
///
/// Solves the Bloch equations ẋ = Ωz − Γx, ẏ = −Γy, ż = −Ωx − 2Γ(z + 1)
/// by exponentiating the affine generator.
pub fn damped_rabi_oracle(params: &SystemParams, t: f64) -> Result<(f64, C64)> {
    let w = params.rabi_frequency();
    let g = params.gamma_eff();
    #[rustfmt::skip]
    let a = Array2::from_shape_vec((4, 4), vec![
        -g,  0.0, w,         0.0,
        0.0, -g,  0.0,       0.0,
        -w,  0.0, -2.0 * g, -2.0 * g,
        0.0, 0.0, 0.0,       0.0,
    ])
    .expect("shape")
    .mapv(|v| C64::from(v * t));
    let e = expm(&a)?;
    // initial Bloch vector (0, 0, 1) with the affine slot set to 1
    let col = |i: usize| (e[[i, 2]] + e[[i, 3]]).re;
    let (x, y, z) = (col(0), col(1), col(2));
    Ok((z, C64::new(x, y) * 0.5))
}

/// Coupling where heat and work fluxes at t* have equal magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingResult {
    pub eps_over_kappa: f64,
    pub g_cross_over_kappa: f64,
    pub t_star: f64,
    pub re_sigma_plus_at_tstar: f64,
}

struct EffectivePoint {
    gap: f64,
    t_star: f64,
    re_sigma_plus: f64,
}

fn effective_point(eps: f64, g: f64) -> Result<EffectivePoint> {
    let p = SystemParams::displaced(g, eps).with_picture(Picture::EffectiveAtom);
    let horizon = 20.0 * std::f64::consts::PI / (4.0 * g) * (1.0 / eps).max(1.0);
    let traj = evolve(&build_generator(&p)?, &p.initial_state(), horizon, EFFECTIVE_TOL)?;
    let t_star = find_tstar(&traj)?;
    let s = FluxEvaluator::new(&p)?.sample(t_star, &traj.state_at(t_star))?;
    Ok(EffectivePoint {
        gap: s.jq_norm.abs() - s.jw_norm.abs(),
        t_star,
        re_sigma_plus: s.re_sigma_plus,
    })
}

/// Coupling g/κ at which |J_Q(t*)| = |J_W(t*)| in the effective model.
///
/// Scans the sweep grid for the first sign change of |J_Q| − |J_W| and
/// bisects in log g to a relative width of 10⁻⁹. Only meaningful when the
/// result is well below κ.
pub fn crossing_point(eps_over_kappa: f64) -> Result<CrossingResult> {
    if !(eps_over_kappa > 0.0 && eps_over_kappa.is_finite()) {
        return Err(Error::InvalidParams(format!("eps/kappa must be > 0, got {eps_over_kappa}")));
    }
    let eps = eps_over_kappa;
    let grid = default_g_grid();
    let (lo0, hi0) = (grid[0], grid[grid.len() - 1]);
    let mut prev: Option<(f64, f64)> = None;
    let mut bracket = None;
    for &g in &grid {
        let d = effective_point(eps, g)?.gap;
        if let Some((gp, dp)) = prev {
            if (dp < 0.0) != (d < 0.0) {
                bracket = Some((gp, dp, g));
                break;
            }
        }
        prev = Some((g, d));
    }
    let (mut lo, d_lo, mut hi) = bracket.ok_or(Error::NoCrossing { lo: lo0, hi: hi0 })?;
    while hi - lo > 1e-9 * hi {
        let mid = (lo * hi).sqrt();
        if (effective_point(eps, mid)?.gap < 0.0) == (d_lo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let g = (lo * hi).sqrt();
    if g > 0.1 {
        log::warn!("crossing at g/kappa = {g:.4} is not small compared to kappa; the effective model is unreliable there");
    }
    let pt = effective_point(eps, g)?;
    Ok(CrossingResult {
        eps_over_kappa: eps,
        g_cross_over_kappa: g,
        t_star: pt.t_star,
        re_sigma_plus_at_tstar: pt.re_sigma_plus,
    })
}

/// Bisection history of the critical-drive search.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalDrive {
    pub threshold: f64,
    pub lo: f64,
    pub hi: f64,
    /// Every drive tried, with whether its full-model sweep had a flux crossing.
    pub evaluations: Vec<(f64, bool)>,
}

/// Drive strength ε/κ above which |J_W| stays above |J_Q| over the whole
/// coupling grid. `lo` must show a crossing and `hi` must not.
pub fn critical_drive_search(lo: f64, hi: f64, grid: &[f64], settings: &RunSettings) -> Result<CriticalDrive> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParams(format!("need 0 < lo < hi, got [{lo}, {hi}]")));
    }
    let mut evaluations = Vec::new();
    let mut crosses = |eps: f64| -> Result<bool> {
        let c = run_fig2(eps, grid, settings)?.fluxes_cross();
        log::info!("eps/kappa = {eps:.4}: fluxes {}", if c { "cross" } else { "do not cross" });
        evaluations.push((eps, c));
        Ok(c)
    };
    let c_lo = crosses(lo)?;
    let c_hi = crosses(hi)?;
    if c_lo == c_hi || !c_lo {
        return Err(Error::SameRegime { lo, hi, crossing: c_lo });
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > CRITICAL_RESOLUTION {
        let mid = 0.5 * (a + b);
        if crosses(mid)? {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(CriticalDrive { threshold: 0.5 * (a + b), lo: a, hi: b, evaluations })
}

/// Threshold from [`critical_drive_search`] over the default coupling grid.
pub fn critical_drive(lo: f64, hi: f64, settings: &RunSettings) -> Result<f64> {
    critical_drive_search(lo, hi, &default_g_grid(), settings).map(|c| c.threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::evolve;
    use crate::thermo::sigma_z_of;

    #[test]
    fn oracle_matches_integrated_effective_model() {
        let p = SystemParams::displaced(0.3, 0.7).with_gamma(0.05).with_picture(Picture::EffectiveAtom);
        let gen = build_generator(&p).unwrap();
        let traj = evolve(&gen, &p.initial_state(), 12.0, 1e-11).unwrap();
        for t in [0.0, 0.5, 3.3, 7.0, 12.0] {
            let rho = traj.interpolate(t);
            let (z, sp) = damped_rabi_oracle(&p, t).unwrap();
            assert!((sigma_z_of(&rho) - z).abs() < 1e-8, "t = {t}");
            assert!((rho[[1, 0]] - sp).norm() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn oracle_undamped_limit() {
        let p = SystemParams::displaced(1e-12, 1.0).with_picture(Picture::EffectiveAtom);
        let w = p.rabi_frequency();
        let t = 1.3 / w;
        let (z, sp) = damped_rabi_oracle(&p, t).unwrap();
        assert!((z - (w * t).cos()).abs() < 1e-9);
        assert!((sp.re - 0.5 * (w * t).sin()).abs() < 1e-9);
    }

    #[test]
    fn crossing_rejects_nonpositive_drive() {
        assert!(crossing_point(0.0).is_err());
        assert!(crossing_point(f64::NAN).is_err());
    }

    #[test]
    fn crossing_scales_with_drive() {
        let a = crossing_point(0.01).unwrap();
        let b = crossing_point(0.02).unwrap();
        let r = b.g_cross_over_kappa / a.g_cross_over_kappa;
        assert!((r - 2.0).abs() < 2e-3, "{r}");
        assert!((a.re_sigma_plus_at_tstar - b.re_sigma_plus_at_tstar).abs() < 1e-3);
    }

    #[test]
    fn critical_drive_validates_bracket() {
        let s = RunSettings::default();
        assert!(critical_drive(1.2, 1.0, &s).is_err());
        assert!(critical_drive(0.0, 1.0, &s).is_err());
    }
}
