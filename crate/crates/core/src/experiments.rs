//! Figure pipelines: time series in the two limiting regimes, coupling sweeps
//! sampled at the null-inversion time t*, and photon-flux curves.
//!
//! Every reported number passes the truncation gate: the same run repeated
//! with five more Fock levels must agree to [`GATE_TOL`].

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::dynamics::{build_generator, evolve_with, EvolveOptions, Picture, SystemParams, Trajectory};
use crate::error::{Error, Result};
use crate::hilbert::{von_neumann_entropy, ComplexMatrix, DensityMatrix, FockCutoff};
use crate::thermo::{energy_balance, photon_accounting, sigma_z_of, FluxEvaluator, FluxSample};

/// Integrator tolerance for reproduction runs.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Required |⟨σ_z⟩(t*)| after root polishing.
pub const TSTAR_TOL: f64 = 1e-6;
/// Allowed drift of any reported observable between n_max and n_max + 5.
pub const GATE_TOL: f64 = 1e-6;
pub const GATE_STEP: usize = 5;
pub const N_MAX_CAP: usize = 40;

/// Knobs shared by all pipelines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub tol: f64,
    pub workers: usize,
    /// Run the n_max vs n_max + 5 comparison.
    pub truncation_gate: bool,
    pub n_max: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            tol: DEFAULT_TOL,
            workers: 1,
            truncation_gate: true,
            n_max: FockCutoff::DEFAULT.n_max(),
        }
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n)
                .map(|k| match k {
                    0 => lo,
                    k if k == n - 1 => hi,
                    k => 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64),
                })
                .collect()
        }
    }
}

/// The grid used for Figs. 2 and 3: 60 points over g/κ ∈ [10⁻³, 10²].
pub fn default_g_grid() -> Vec<f64> {
    log_grid(1e-3, 1e2, 60)
}

fn hermite_scalar(t0: f64, y0: f64, f0: f64, t1: f64, y1: f64, f1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let (s2, s3) = (s * s, s * s * s);
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * f0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * f1
}

/// First time ⟨σ_z⟩ reaches zero from above: bracketed on the knots, then
/// bisected on the Hermite dense output.
pub fn find_tstar(trajectory: &Trajectory) -> Result<f64> {
    let times = trajectory.times();
    let z: Vec<f64> = trajectory.states().iter().map(|s| sigma_z_of(s.matrix())).collect();
    let dz: Vec<f64> = trajectory.derivatives().iter().map(sigma_z_of).collect();
    if z.is_empty() || z[0] <= 0.0 {
        return Err(Error::InvalidParams("trajectory must start with <sigma_z> > 0".into()));
    }
    let i = (0..z.len() - 1)
        .find(|&i| z[i] > 0.0 && z[i + 1] <= 0.0)
        .ok_or(Error::NoZeroCrossing { horizon: trajectory.t_end() })?;
    let eval = |t: f64| hermite_scalar(times[i], z[i], dz[i], times[i + 1], z[i + 1], dz[i + 1], t);
    let (mut lo, mut hi) = (times[i], times[i + 1]);
    if z[i + 1] == 0.0 {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eval(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t_star = if eval(lo).abs() < eval(hi).abs() { lo } else { hi };
    let residual = sigma_z_of(&trajectory.interpolate(t_star)).abs();
    if residual >= TSTAR_TOL {
        return Err(Error::InvariantViolation {
            t: t_star,
            what: format!("|<sigma_z>(t*)| = {residual:e} after bisection"),
        });
    }
    Ok(t_star)
}

/// Horizon for a t* search: twenty times the longer of the effective-Rabi
/// and vacuum-Rabi quarter periods.
pub fn tstar_horizon(params: &SystemParams) -> f64 {
    let jc = PI / (4.0 * params.g);
    let drive = if params.eps > 0.0 { PI * params.kappa / (4.0 * params.eps * params.g) } else { 0.0 };
    20.0 * jc.max(drive)
}

/// Integrates from the picture's initial state until ⟨σ_z⟩ first drops to
/// zero (or the horizon), keeping a thinned trajectory.
pub fn evolve_to_null_inversion(params: &SystemParams, tol: f64) -> Result<Trajectory> {
    let gen = build_generator(params)?;
    let mut stop = |_t: f64, rho: &ComplexMatrix| sigma_z_of(rho) <= 0.0;
    evolve_with(
        &gen,
        &params.initial_state(),
        tstar_horizon(params),
        &EvolveOptions::thinned(tol),
        Some(&mut stop),
    )
}

/// Dense-output state at `t`, checked to be a valid density matrix.
fn output_state(trajectory: &Trajectory, t: f64) -> Result<DensityMatrix> {
    let rho = trajectory.state_at(t);
    rho.check_invariants(1.0).map_err(|e| Error::InvariantViolation { t, what: e.to_string() })?;
    Ok(rho)
}

/// Observables at t* for one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TstarPoint {
    pub t_star: f64,
    pub sample: FluxSample,
    pub n_flux: f64,
    pub energy_residual: f64,
}

impl TstarPoint {
    fn drift(&self, other: &TstarPoint) -> f64 {
        let abs = [
            (self.sample.entropy - other.sample.entropy).abs(),
            (self.sample.jw_norm - other.sample.jw_norm).abs(),
            (self.sample.jq_norm - other.sample.jq_norm).abs(),
            (self.sample.re_sigma_plus - other.sample.re_sigma_plus).abs(),
        ];
        let rel = [
            (self.t_star - other.t_star).abs() / self.t_star,
            (self.n_flux - other.n_flux).abs() / self.n_flux.max(f64::MIN_POSITIVE),
        ];
        abs.into_iter().chain(rel).fold(0.0, f64::max)
    }
}

/// Full-model observables at t*, without the truncation gate.
pub fn tstar_point(params: &SystemParams, tol: f64) -> Result<TstarPoint> {
    let traj = evolve_to_null_inversion(params, tol)?;
    let t_star = find_tstar(&traj)?;
    let eval = FluxEvaluator::new(params)?;
    let sample = eval.sample(t_star, &output_state(&traj, t_star)?)?;
    Ok(TstarPoint {
        t_star,
        sample,
        n_flux: photon_accounting(t_star, params).n_flux,
        energy_residual: energy_balance(&traj, params)?,
    })
}

/// Outcome of raising the cutoff until results stop moving.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateReport {
    pub n_max: usize,
    pub drift: f64,
    pub passed: bool,
}

/// Runs `f` at n_max and n_max + 5, raising n_max in steps of 5 up to
/// [`N_MAX_CAP`] until the drift is below [`GATE_TOL`].
pub fn with_truncation_gate<T, F, D>(start: usize, gate: bool, mut run: F, drift: D) -> Result<(T, GateReport)>
where
    F: FnMut(FockCutoff) -> Result<T>,
    D: Fn(&T, &T) -> f64,
{
    let mut n = start;
    let mut current = run(FockCutoff::new(n)?)?;
    if !gate {
        return Ok((current, GateReport { n_max: n, drift: f64::NAN, passed: false }));
    }
    loop {
        let next = run(FockCutoff::new(n + GATE_STEP)?)?;
        let d = drift(&current, &next);
        if d < GATE_TOL {
            return Ok((current, GateReport { n_max: n, drift: d, passed: true }));
        }
        if n + GATE_STEP > N_MAX_CAP - GATE_STEP {
            log::warn!("truncation gate failed up to n_max = {} (drift {d:e})", n + GATE_STEP);
            return Ok((next, GateReport { n_max: n + GATE_STEP, drift: d, passed: false }));
        }
        n += GATE_STEP;
        current = next;
    }
}

/// One coupling value of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub g_over_kappa: f64,
    /// Absent when ⟨σ_z⟩ never reached zero within the horizon.
    pub point: Option<TstarPoint>,
    /// Truncation gate passed and t* located to tolerance.
    pub converged: bool,
    pub gate: Option<GateReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub eps_over_kappa: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Signed |J_Q| − |J_W| per present row.
    fn flux_gaps(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.point.map(|p| (r.g_over_kappa, p.sample.jq_norm.abs() - p.sample.jw_norm.abs())))
            .collect()
    }

    /// Couplings where |J_Q| − |J_W| changes sign, log-linearly interpolated.
    pub fn flux_crossings(&self) -> Vec<f64> {
        self.flux_gaps()
            .windows(2)
            .filter(|w| (w[0].1 < 0.0) != (w[1].1 < 0.0))
            .map(|w| {
                let (g0, d0) = w[0];
                let (g1, d1) = w[1];
                let s = d0 / (d0 - d1);
                10f64.powf(g0.log10() + s * (g1.log10() - g0.log10()))
            })
            .collect()
    }

    pub fn fluxes_cross(&self) -> bool {
        !self.flux_crossings().is_empty()
    }
}

fn sweep_point(eps: f64, g: f64, settings: &RunSettings) -> SweepRow {
    let run = |cutoff: FockCutoff| {
        let p = SystemParams::displaced(g, eps).with_cutoff(cutoff);
        tstar_point(&p, settings.tol)
    };
    match with_truncation_gate(settings.n_max, settings.truncation_gate, run, TstarPoint::drift) {
        Ok((point, gate)) => {
            let located = (point.sample.sigma_z).abs() < TSTAR_TOL;
            SweepRow {
                g_over_kappa: g,
                point: Some(point),
                converged: gate.passed && located,
                gate: Some(gate),
                error: None,
            }
        }
        Err(e) => SweepRow {
            g_over_kappa: g,
            point: None,
            converged: false,
            gate: None,
            error: Some(e.to_string()),
        },
    }
}

fn run_pool<T: Send, F: Fn() -> T + Send>(workers: usize, f: F) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Full-model coupling sweep at fixed drive: evolve from |e⟩|0⟩ to t* and
/// record entropy and fluxes there. Rows come back in grid order.
pub fn run_fig2(eps_over_kappa: f64, g_grid: &[f64], settings: &RunSettings) -> Result<SweepResult> {
    if eps_over_kappa.is_nan() || eps_over_kappa <= 0.0 {
        return Err(Error::InvalidParams(format!("eps/kappa must be > 0, got {eps_over_kappa}")));
    }
    if g_grid.iter().any(|g| g.is_nan() || *g <= 0.0) || g_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams("g grid must be positive and strictly ascending".into()));
    }
    let rows = run_pool(settings.workers, || {
        g_grid.par_iter().map(|&g| sweep_point(eps_over_kappa, g, settings)).collect()
    });
    Ok(SweepResult { eps_over_kappa, rows })
}

/// Photons crossing the cavity up to t* at n̄_cav = 1 (ε = κ).
pub fn run_fig3(g_grid: &[f64], settings: &RunSettings) -> Result<SweepResult> {
    run_fig2(1.0, g_grid, settings)
}

/// The two limiting parameter sets of the time-series figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fig1Regime {
    /// g = 10⁻³κ, ε = κ: classical rotation, work only.
    BD,
    /// g = κ, ε = 10⁻³κ: vacuum Rabi entanglement, heat only.
    CE,
}

impl Fig1Regime {
    pub fn params(self) -> SystemParams {
        match self {
            Fig1Regime::BD => SystemParams::displaced(1e-3, 1.0),
            Fig1Regime::CE => SystemParams::displaced(1.0, 1e-3),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Fig1Regime::BD => "b_d",
            Fig1Regime::CE => "c_e",
        }
    }
}

impl std::str::FromStr for Fig1Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "b_d" | "bd" => Ok(Fig1Regime::BD),
            "c_e" | "ce" => Ok(Fig1Regime::CE),
            other => Err(Error::InvalidParams(format!("unknown regime '{other}' (expected b_d or c_e)"))),
        }
    }
}

/// Default plotted range gt ∈ [0, 2π] and sample count.
pub const FIG1_GT_MAX: f64 = 2.0 * PI;
pub const FIG1_SAMPLES: usize = 401;

#[derive(Debug, Clone)]
pub struct Fig1Run {
    pub regime: Fig1Regime,
    pub params: SystemParams,
    pub samples: Vec<FluxSample>,
    pub energy_residual: f64,
    pub gate: GateReport,
    pub knots: usize,
}

struct Fig1Raw {
    params: SystemParams,
    samples: Vec<FluxSample>,
    trajectory: Trajectory,
}

fn fig1_raw(params: SystemParams, gt_max: f64, n_samples: usize, tol: f64) -> Result<Fig1Raw> {
    let gen = build_generator(&params)?;
    let t_end = gt_max / params.g;
    let traj = evolve_with(&gen, &params.initial_state(), t_end, &EvolveOptions::thinned(tol), None)?;
    let eval = FluxEvaluator::new(&params)?;
    let samples = (0..n_samples)
        .map(|k| {
            let t = t_end * k as f64 / (n_samples - 1) as f64;
            eval.sample(t, &output_state(&traj, t)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Fig1Raw { params, samples, trajectory: traj })
}

fn samples_drift(a: &[FluxSample], b: &[FluxSample]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| {
        [
            x.sigma_z - y.sigma_z,
            x.entropy_norm() - y.entropy_norm(),
            x.jw_norm - y.jw_norm,
            x.jq_norm - y.jq_norm,
        ]
        .into_iter()
        .fold(m, |m, d| m.max(d.abs()))
    })
}

/// Time series over gt ∈ [0, `gt_max`] with `n_samples` uniform samples.
pub fn run_fig1_range(regime: Fig1Regime, gt_max: f64, n_samples: usize, settings: &RunSettings) -> Result<Fig1Run> {
    if n_samples < 2 || gt_max.is_nan() || gt_max <= 0.0 {
        return Err(Error::InvalidParams("need gt_max > 0 and at least two samples".into()));
    }
    let base = regime.params();
    let run = |cutoff: FockCutoff| fig1_raw(base.with_cutoff(cutoff), gt_max, n_samples, settings.tol);
    let (raw, gate) = with_truncation_gate(settings.n_max, settings.truncation_gate, run, |a, b| {
        samples_drift(&a.samples, &b.samples)
    })?;
    let energy_residual = energy_balance(&raw.trajectory, &raw.params)?;
    Ok(Fig1Run {
        regime,
        params: raw.params,
        samples: raw.samples,
        energy_residual,
        gate,
        knots: raw.trajectory.len(),
    })
}

pub fn run_fig1(regime: Fig1Regime, settings: &RunSettings) -> Result<Fig1Run> {
    run_fig1_range(regime, FIG1_GT_MAX, FIG1_SAMPLES, settings)
}

/// A custom run sampled on a uniform time grid.
#[derive(Debug, Clone)]
pub struct EvolutionRun {
    pub params: SystemParams,
    /// Flux fields are NaN when `fluxes` is false.
    pub samples: Vec<FluxSample>,
    /// Fluxes need the displaced or effective picture and g > 0.
    pub fluxes: bool,
    /// `None` for the atom-only picture, which has no cutoff.
    pub gate: Option<GateReport>,
}

fn evolution_raw(params: SystemParams, t_end: f64, n_samples: usize, tol: f64) -> Result<Vec<FluxSample>> {
    let gen = build_generator(&params)?;
    let traj = evolve_with(&gen, &params.initial_state(), t_end, &EvolveOptions::thinned(tol), None)?;
    let eval = match params.picture {
        Picture::RotatingLab => None,
        _ if params.g <= 0.0 => None,
        _ => Some(FluxEvaluator::new(&params)?),
    };
    (0..n_samples)
        .map(|k| {
            let t = t_end * k as f64 / (n_samples - 1) as f64;
            let rho = output_state(&traj, t)?;
            match &eval {
                Some(e) => e.sample(t, &rho),
                None => {
                    let at = rho.atom();
                    let sp = at.matrix()[[1, 0]];
                    Ok(FluxSample {
                        t,
                        jw_norm: f64::NAN,
                        jq_norm: f64::NAN,
                        entropy: von_neumann_entropy(&at),
                        sigma_z: sigma_z_of(at.matrix()),
                        re_sigma_plus: sp.re,
                        im_sigma_plus: sp.im,
                    })
                }
            }
        })
        .collect()
}

/// Evolves `params` from its picture's initial state to `t_end` and samples
/// atomic observables (and fluxes where defined) at `n_samples` uniform times.
pub fn run_evolution(params: &SystemParams, t_end: f64, n_samples: usize, settings: &RunSettings) -> Result<EvolutionRun> {
    if n_samples < 2 || t_end.is_nan() || t_end <= 0.0 {
        return Err(Error::InvalidParams("need t_end > 0 and at least two samples".into()));
    }
    params.validate()?;
    let fluxes = params.picture != Picture::RotatingLab && params.g > 0.0;
    if params.picture == Picture::EffectiveAtom {
        let samples = evolution_raw(*params, t_end, n_samples, settings.tol)?;
        return Ok(EvolutionRun { params: *params, samples, fluxes, gate: None });
    }
    let run = |cutoff: FockCutoff| evolution_raw(params.with_cutoff(cutoff), t_end, n_samples, settings.tol);
    let drift = |a: &Vec<FluxSample>, b: &Vec<FluxSample>| {
        // f64::max skips the NaN flux differences of flux-free runs
        a.iter().zip(b).fold(samples_drift(a, b), |m, (x, y)| {
            m.max((x.re_sigma_plus - y.re_sigma_plus).abs()).max((x.im_sigma_plus - y.im_sigma_plus).abs())
        })
    };
    let (samples, gate) = with_truncation_gate(settings.n_max, settings.truncation_gate, run, drift)?;
    Ok(EvolutionRun { params: params.with_cutoff(FockCutoff::new(gate.n_max)?), samples, fluxes, gate: Some(gate) })
}

/// Full-model coupling where |J_Q| = |J_W| at t*, by bisection in log g
/// between a bracketing pair.
pub fn full_model_crossing(eps: f64, g_lo: f64, g_hi: f64, rel_tol: f64, settings: &RunSettings) -> Result<(f64, TstarPoint)> {
    let gap = |g: f64| -> Result<(f64, TstarPoint)> {
        let p = SystemParams::displaced(g, eps).with_cutoff(FockCutoff::new(settings.n_max)?);
        let pt = tstar_point(&p, settings.tol)?;
        Ok((pt.sample.jq_norm.abs() - pt.sample.jw_norm.abs(), pt))
    };
    let (mut lo, mut hi) = (g_lo, g_hi);
    let (d_lo, _) = gap(lo)?;
    let (d_hi, _) = gap(hi)?;
    if (d_lo < 0.0) == (d_hi < 0.0) {
        return Err(Error::NoCrossing { lo, hi });
    }
    while hi - lo > rel_tol * hi {
        let mid = (lo * hi).sqrt();
        let (d, _) = gap(mid)?;
        if (d < 0.0) == (d_lo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let g = (lo * hi).sqrt();
    let (_, pt) = gap(g)?;
    Ok((g, pt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::evolve;

    #[test]
    fn log_grid_endpoints_and_order() {
        let g = default_g_grid();
        assert_eq!(g.len(), 60);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[59], 1e2);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(log_grid(1.0, 2.0, 0).is_empty());
    }

    #[test]
    fn tstar_undamped_effective_rabi() {
        // Γ_eff/Ω = g/2ε, so g ≪ ε removes the damping and t* = π/2Ω
        let undamped = SystemParams::displaced(1e-5, 1e3).with_picture(Picture::EffectiveAtom);
        let traj = evolve(&build_generator(&undamped).unwrap(), &undamped.initial_state(), 100.0, 1e-10).unwrap();
        let want = PI / (2.0 * undamped.rabi_frequency());
        assert!((find_tstar(&traj).unwrap() - want).abs() < 1e-6 * want);
    }

    #[test]
    fn tstar_pure_jc() {
        let g = 0.8;
        let p = SystemParams::displaced(g, 0.0)
            .with_cutoff(FockCutoff::new(3).unwrap())
            .with_picture(Picture::RotatingLab)
            .with_kappa(0.0);
        let traj = evolve(&build_generator(&p).unwrap(), &p.initial_state(), 3.0, 1e-10).unwrap();
        let t_star = find_tstar(&traj).unwrap();
        assert!((t_star - PI / (4.0 * g)).abs() < 1e-9);
        let z = sigma_z_of(&traj.interpolate(t_star));
        assert!(z.abs() < TSTAR_TOL);
    }

    #[test]
    fn tstar_missing_is_an_error() {
        let p = SystemParams::displaced(0.0, 0.0).with_gamma(0.01).with_cutoff(FockCutoff::new(1).unwrap());
        let traj = evolve(&build_generator(&p).unwrap(), &p.initial_state(), 1.0, 1e-9).unwrap();
        assert!(matches!(find_tstar(&traj), Err(Error::NoZeroCrossing { .. })));
    }

    #[test]
    fn strong_coupling_weak_drive_crosses_early() {
        let p = SystemParams::displaced(1.0, 1e-3);
        let pt = tstar_point(&p, DEFAULT_TOL).unwrap();
        assert!(p.g * pt.t_star <= 2.0);
    }

    #[test]
    fn sweep_rejects_bad_grid() {
        let s = RunSettings::default();
        assert!(run_fig2(0.25, &[0.1, 0.05], &s).is_err());
        assert!(run_fig2(0.25, &[-0.1], &s).is_err());
        assert!(run_fig2(0.0, &[0.1], &s).is_err());
        assert_eq!(run_fig2(0.25, &[], &s).unwrap().rows.len(), 0);
    }

    #[test]
    fn small_sweep_is_ordered_and_gated() {
        let s = RunSettings { workers: 2, ..RunSettings::default() };
        let grid = [0.3, 1.0, 3.0];
        let res = run_fig2(0.25, &grid, &s).unwrap();
        let gs: Vec<f64> = res.rows.iter().map(|r| r.g_over_kappa).collect();
        assert_eq!(gs, grid);
        for r in &res.rows {
            assert!(r.converged, "{r:?}");
            assert!(r.point.unwrap().energy_residual < 1e-5);
        }
        // deterministic regardless of worker count
        let again = run_fig2(0.25, &grid, &RunSettings { workers: 1, ..s }).unwrap();
        assert_eq!(res, again);
    }
}
