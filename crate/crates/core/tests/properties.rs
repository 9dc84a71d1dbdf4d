use std::f64::consts::PI;

use proptest::prelude::*;
use ramsey_core::dynamics::propagator::evolve_expm;
use ramsey_core::effective::{crossing_point, damped_rabi_oracle};
use ramsey_core::hilbert::linalg::{hermitian_eigenvalues, max_abs_diff};
use ramsey_core::hilbert::{
    coherent_state, displacement, fock_lowering, number_operator, partial_trace_field, ptrace_field_matrix,
};
use ramsey_core::thermo::{heat_flux_norm_effective, sigma_z_of, work_flux_norm};
use ramsey_core::{build_generator, evolve, DensityMatrix, FockCutoff, Picture, Space, SystemParams, C64};

fn trace_distance(a: &ramsey_core::ComplexMatrix, b: &ramsey_core::ComplexMatrix) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b)).unwrap().iter().map(|l| l.abs()).sum::<f64>()
}

/// |e⟩ ⊗ |α⟩ on the truncated composite space.
fn excited_coherent(alpha: C64, cutoff: FockCutoff) -> DensityMatrix {
    let coh = coherent_state(alpha, cutoff);
    let mut psi = vec![C64::new(0.0, 0.0); cutoff.composite_dim()];
    psi[..coh.len()].copy_from_slice(&coh);
    DensityMatrix::from_pure(&psi, Space::Composite(cutoff)).unwrap()
}

#[test]
fn operators_are_finite() {
    for n in [1, 5, 15, 40] {
        let c = FockCutoff::new(n).unwrap();
        assert!(fock_lowering(c).iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        assert!(number_operator(c).iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        assert!(displacement(C64::new(0.3, -0.2), c).iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    }
}

#[test]
fn integrator_error_scales_with_tolerance() {
    // Resonant JC against its closed form, worst error over the knots.
    let g = 1.0;
    let cut = FockCutoff::new(2).unwrap();
    let p = SystemParams::displaced(g, 0.0).with_cutoff(cut).with_kappa(0.0).with_picture(Picture::RotatingLab);
    let gen = build_generator(&p).unwrap();
    let err = |tol: f64| {
        let traj = evolve(&gen, &p.initial_state(), 20.0, tol).unwrap();
        traj.times()
            .iter()
            .zip(traj.states())
            .map(|(t, s)| (sigma_z_of(s.matrix()) - (2.0 * g * t).cos()).abs())
            .fold(0.0, f64::max)
    };
    let tols = [1e-4, 1e-5, 1e-6, 1e-7, 1e-8];
    let errs: Vec<f64> = tols.iter().map(|&t| err(t)).collect();
    // h ~ tol^(1/5) and a fifth-order global error give err ~ tol
    let xs: Vec<f64> = tols.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 5.0, ys.iter().sum::<f64>() / 5.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!((0.7..=1.3).contains(&slope), "slope {slope}");
}

#[test]
fn rk_and_expm_agree_with_decay() {
    let p = SystemParams::displaced(0.7, 0.4).with_gamma(0.3).with_cutoff(FockCutoff::new(4).unwrap());
    let gen = build_generator(&p).unwrap();
    let rk = evolve(&gen, &p.initial_state(), 5.0, 1e-11).unwrap();
    let ex = evolve_expm(&gen, &p.initial_state(), 5.0, 4).unwrap();
    assert!(max_abs_diff(rk.final_state().matrix(), ex.matrix()) < 1e-8);
}

#[test]
fn crossing_scales_linearly_with_drive() {
    let ratios: Vec<f64> = [0.05, 0.1, 0.25, 0.5]
        .iter()
        .map(|&eps| crossing_point(eps).unwrap().g_cross_over_kappa / eps)
        .collect();
    for r in &ratios {
        assert!((r / ratios[0] - 1.0).abs() < 0.02, "{ratios:?}");
    }
}

#[test]
fn re_sigma_plus_at_crossing_is_drive_independent() {
    for eps in [0.05, 0.1, 0.2, 0.5, 1.0] {
        let c = crossing_point(eps).unwrap();
        assert!((0.20..=0.24).contains(&c.re_sigma_plus_at_tstar), "eps = {eps}: {c:?}");
        let identity = (c.g_cross_over_kappa / eps - 2.0 * c.re_sigma_plus_at_tstar).abs();
        assert!(identity < 1e-3, "eps = {eps}: {identity:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 10, ..ProptestConfig::default() })]

    #[test]
    fn oracle_matches_effective_backend(
        g in 0.01f64..1.0,
        eps in 0.05f64..2.0,
        gamma in 0.0f64..0.2,
        frac in 0.0f64..1.0,
    ) {
        let p = SystemParams::displaced(g, eps).with_gamma(gamma).with_picture(Picture::EffectiveAtom);
        let t = frac * 2.0 * PI / p.rabi_frequency();
        let traj = evolve(&build_generator(&p).unwrap(), &p.initial_state(), t.max(1e-6), 1e-11).unwrap();
        let rho = traj.final_state().matrix().clone();
        let (z, sp) = damped_rabi_oracle(&p, t.max(1e-6)).unwrap();
        prop_assert!((sigma_z_of(&rho) - z).abs() < 1e-8);
        prop_assert!((rho[[1, 0]] - sp).norm() < 1e-8);
    }

    #[test]
    fn work_flux_sees_only_re_sigma_plus(
        pe in 0.05f64..0.95,
        re in -0.2f64..0.2,
        im1 in -0.2f64..0.2,
        im2 in -0.2f64..0.2,
        eps in 0.0f64..2.0,
    ) {
        let p = SystemParams::displaced(0.3, eps).with_picture(Picture::EffectiveAtom);
        let make = |pe: f64, im: f64| {
            let c = C64::new(re, -im);
            let m = ndarray::arr2(&[[C64::from(pe), c], [c.conj(), C64::from(1.0 - pe)]]);
            DensityMatrix::new_unchecked(m, Space::AtomOnly).unwrap()
        };
        let a = work_flux_norm(&make(pe, im1), &p);
        let b = work_flux_norm(&make(1.0 - pe, im2), &p);
        prop_assert_eq!(a, b);
        prop_assert!(heat_flux_norm_effective(&make(pe, im1), &p).unwrap() <= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn lab_and_displaced_frames_agree(
        g in 0.05f64..1.0,
        eps in 0.05f64..1.0,
        gamma in 0.0f64..0.2,
    ) {
        let cut = FockCutoff::new(10).unwrap();
        let disp = SystemParams::displaced(g, eps).with_gamma(gamma).with_cutoff(cut);
        let lab = disp.with_picture(Picture::RotatingLab);
        let t_end = 4.0;
        let a = evolve(&build_generator(&disp).unwrap(), &disp.initial_state(), t_end, 1e-11).unwrap();
        let b = evolve(&build_generator(&lab).unwrap(), &excited_coherent(disp.alpha(), cut), t_end, 1e-11).unwrap();
        for k in 0..=8 {
            let t = t_end * k as f64 / 8.0;
            let ra = ptrace_field_matrix(&a.interpolate(t), cut.field_dim());
            let rb = ptrace_field_matrix(&b.interpolate(t), cut.field_dim());
            prop_assert!(max_abs_diff(&ra, &rb) < 1e-6, "t = {}: {:e}", t, max_abs_diff(&ra, &rb));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 3, ..ProptestConfig::default() })]

    #[test]
    fn effective_model_tracks_full_model_at_weak_coupling(
        g in 3e-3f64..1e-2,
        eps in 0.2f64..1.0,
    ) {
        let full = SystemParams::displaced(g, eps);
        let eff = full.with_picture(Picture::EffectiveAtom);
        // π/2 rotation of the effective drive
        let t_end = PI / (2.0 * full.rabi_frequency());
        let a = evolve(&build_generator(&full).unwrap(), &full.initial_state(), t_end, 1e-9).unwrap();
        let b = evolve(&build_generator(&eff).unwrap(), &eff.initial_state(), t_end, 1e-10).unwrap();
        for k in 0..=20 {
            let t = t_end * k as f64 / 20.0;
            let at = partial_trace_field(&a.state_at(t)).unwrap();
            let d = trace_distance(at.matrix(), &b.interpolate(t));
            prop_assert!(d < 0.01, "t = {}: D = {}", t, d);
        }
    }
}
