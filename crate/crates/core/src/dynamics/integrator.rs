//! Dormand–Prince 5(4) integration of the flattened master equation, with
//! cubic Hermite dense output on (ρ, dρ/dt) at the recorded knots.

use ndarray::Array2;

use super::LindbladGenerator;
use crate::error::{Error, Result};
use crate::hilbert::linalg::hermitian_eigenvalues;
use crate::hilbert::{ComplexMatrix, DensityMatrix, POSITIVITY_TOL, C64};

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

// Pending knots checked per thinning decision, and the longest pending run.
const THIN_PROBES: usize = 8;
const THIN_MAX_PENDING: usize = 256;

/// Which accepted steps are kept as interpolation knots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Recording {
    EveryStep,
    /// Drop a step knot when the Hermite interpolant spanning it reproduces
    /// it to within `tol` (max-norm on ρ entries).
    Thinned { tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Local error tolerance per step (absolute and relative, max-norm).
    pub tol: f64,
    pub recording: Recording,
    pub max_steps: usize,
    /// Eigenvalue check on every recorded knot.
    pub check_positivity: bool,
}

impl EvolveOptions {
    pub fn new(tol: f64) -> Self {
        EvolveOptions {
            tol,
            recording: Recording::EveryStep,
            max_steps: 20_000_000,
            check_positivity: true,
        }
    }

    /// Thinned recording at the step tolerance. Positivity is left to the
    /// caller, which checks the states it actually reports.
    pub fn thinned(tol: f64) -> Self {
        EvolveOptions {
            recording: Recording::Thinned { tol },
            check_positivity: false,
            ..Self::new(tol)
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Time-ordered states with derivatives for Hermite dense output.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<DensityMatrix>,
    derivatives: Vec<ComplexMatrix>,
    stopped_early: bool,
    stats: IntegratorStats,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn derivatives(&self) -> &[ComplexMatrix] {
        &self.derivatives
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().unwrap()
    }

    /// True when a stop condition ended the run before `t_end`.
    pub fn stopped_early(&self) -> bool {
        self.stopped_early
    }

    pub fn stats(&self) -> IntegratorStats {
        self.stats
    }

    /// Index `i` of the knot interval [t_i, t_{i+1}] containing `t`.
    pub fn segment(&self, t: f64) -> usize {
        let n = self.times.len();
        if n < 2 {
            return 0;
        }
        match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Hermite interpolation of ρ(t); `t` is clamped to the recorded range.
    pub fn interpolate(&self, t: f64) -> ComplexMatrix {
        if self.times.len() == 1 {
            return self.states[0].matrix().clone();
        }
        let t = t.clamp(self.t_start(), self.t_end());
        let i = self.segment(t);
        hermite(
            self.times[i],
            self.states[i].matrix(),
            &self.derivatives[i],
            self.times[i + 1],
            self.states[i + 1].matrix(),
            &self.derivatives[i + 1],
            t,
        )
    }

    pub fn state_at(&self, t: f64) -> DensityMatrix {
        let space = self.states[0].space();
        DensityMatrix::new_unchecked(self.interpolate(t), space).expect("shape")
    }
}

fn hermite_weights(t0: f64, t1: f64, t: f64) -> [f64; 4] {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    [
        2.0 * s3 - 3.0 * s2 + 1.0,
        (s3 - 2.0 * s2 + s) * h,
        -2.0 * s3 + 3.0 * s2,
        (s3 - s2) * h,
    ]
}

fn hermite(
    t0: f64,
    y0: &ComplexMatrix,
    f0: &ComplexMatrix,
    t1: f64,
    y1: &ComplexMatrix,
    f1: &ComplexMatrix,
    t: f64,
) -> ComplexMatrix {
    let [w0, w1, w2, w3] = hermite_weights(t0, t1, t);
    let mut out = y0 * C64::from(w0);
    ndarray::Zip::from(&mut out)
        .and(f0)
        .and(y1)
        .and(f1)
        .for_each(|o, a, b, c| *o += a * w1 + b * w2 + c * w3);
    out
}

struct Knot {
    t: f64,
    y: Vec<C64>,
    f: Vec<C64>,
}

struct Recorder {
    mode: Recording,
    d: usize,
    kept: Vec<Knot>,
    pending: Vec<Knot>,
}

impl Recorder {
    fn push(&mut self, knot: Knot) {
        match self.mode {
            Recording::EveryStep => self.kept.push(knot),
            Recording::Thinned { tol } => {
                if self.pending.is_empty() {
                    self.pending.push(knot);
                    return;
                }
                let fits = self.pending.len() < THIN_MAX_PENDING && self.span_fits(&knot, tol);
                if !fits {
                    let last = self.pending.pop().unwrap();
                    self.pending.clear();
                    self.kept.push(last);
                }
                self.pending.push(knot);
            }
        }
    }

    fn span_fits(&self, end: &Knot, tol: f64) -> bool {
        let start = self.kept.last().expect("initial knot is always kept");
        let n = self.pending.len();
        let stride = n.div_ceil(THIN_PROBES).max(1);
        let probes = (0..n).rev().step_by(stride);
        for idx in probes {
            let p = &self.pending[idx];
            let [w0, w1, w2, w3] = hermite_weights(start.t, end.t, p.t);
            let bad = (0..self.d * self.d).any(|k| {
                let interp = start.y[k] * w0 + start.f[k] * w1 + end.y[k] * w2 + end.f[k] * w3;
                (interp - p.y[k]).norm() > tol
            });
            if bad {
                return false;
            }
        }
        true
    }

    /// Promotes the knot before the newest one so the last step is bracketed.
    fn keep_bracket(&mut self) {
        let n = self.pending.len();
        if n >= 2 {
            let newest = self.pending.pop().unwrap();
            let before = self.pending.pop().unwrap();
            self.pending.clear();
            self.kept.push(before);
            self.pending.push(newest);
        }
    }

    fn flush(&mut self) {
        if let Some(last) = self.pending.pop() {
            self.kept.push(last);
        }
        self.pending.clear();
    }
}

fn to_matrix(d: usize, v: Vec<C64>) -> ComplexMatrix {
    Array2::from_shape_vec((d, d), v).expect("shape")
}

/// Integrates from `rho0` at t = 0 to `t_end`, recording every step.
pub fn evolve(
    gen: &LindbladGenerator,
    rho0: &DensityMatrix,
    t_end: f64,
    tol: f64,
) -> Result<Trajectory> {
    evolve_with(gen, rho0, t_end, &EvolveOptions::new(tol), None)
}

/// Event callback on accepted steps.
pub type StopFn<'a> = &'a mut dyn FnMut(f64, &ComplexMatrix) -> bool;

/// Integrates until `t_end` or until `stop(t, ρ)` returns true after an
/// accepted step. On a stop both endpoints of the final step are recorded.
pub fn evolve_with(
    gen: &LindbladGenerator,
    rho0: &DensityMatrix,
    t_end: f64,
    opts: &EvolveOptions,
    mut stop: Option<StopFn<'_>>,
) -> Result<Trajectory> {
    let tol = opts.tol;
    if !(1e-12..=1e-4).contains(&tol) {
        return Err(Error::InvalidTolerance(tol));
    }
    if !t_end.is_finite() || t_end <= 0.0 {
        return Err(Error::InvalidParams(format!("t_end must be > 0, got {t_end}")));
    }
    let d = gen.dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: rho0.dim() });
    }
    let space = rho0.space();
    let n = d * d;
    let zero = C64::new(0.0, 0.0);
    let mut stats = IntegratorStats::default();

    let mut y: Vec<C64> = rho0.matrix().iter().copied().collect();
    let mut scratch = vec![zero; n];
    let mut k1 = vec![zero; n];
    let mut k2 = vec![zero; n];
    let mut k3 = vec![zero; n];
    let mut k4 = vec![zero; n];
    let mut k5 = vec![zero; n];
    let mut k6 = vec![zero; n];
    let mut k7 = vec![zero; n];
    let mut stage = vec![zero; n];
    let mut y_new = vec![zero; n];

    let mut rhs = |y: &[C64], out: &mut [C64], stats: &mut IntegratorStats| {
        gen.apply_flat(y, out, &mut scratch);
        stats.rhs_evals += 1;
    };

    rhs(&y, &mut k1, &mut stats);

    let mut rec = Recorder { mode: opts.recording, d, kept: Vec::new(), pending: Vec::new() };
    rec.kept.push(Knot { t: 0.0, y: y.clone(), f: k1.clone() });

    // Initial step (Hairer & Wanner, "Solving ODEs I", II.4).
    let scale = |v: &C64| tol + tol * v.norm();
    let rms = |a: &[C64], b: &[C64]| {
        (a.iter().zip(b).map(|(x, yv)| (x.norm() / scale(yv)).powi(2)).sum::<f64>() / n as f64)
            .sqrt()
    };
    let d0 = rms(&y, &y);
    let d1 = rms(&k1, &y);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(t_end);
    for i in 0..n {
        stage[i] = y[i] + k1[i] * h;
    }
    rhs(&stage, &mut k2, &mut stats);
    let diff: Vec<C64> = k2.iter().zip(&k1).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff, &y) / h;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    h = (100.0 * h).min(h1).min(t_end);

    let mut t = 0.0;
    let mut err_old: f64 = 1e-4;
    let mut last_rejected = false;
    let mut stopped = false;
    let check_tol = 10.0 * tol;

    while t < t_end {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::TooManySteps { t, max_steps: opts.max_steps });
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }

        for i in 0..n {
            stage[i] = y[i] + k1[i] * (h * A21);
        }
        rhs(&stage, &mut k2, &mut stats);
        for i in 0..n {
            stage[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
        }
        rhs(&stage, &mut k3, &mut stats);
        for i in 0..n {
            stage[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
        }
        rhs(&stage, &mut k4, &mut stats);
        for i in 0..n {
            stage[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
        }
        rhs(&stage, &mut k5, &mut stats);
        for i in 0..n {
            stage[i] = y[i]
                + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
        }
        rhs(&stage, &mut k6, &mut stats);
        for i in 0..n {
            y_new[i] = y[i]
                + (k1[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76) * h;
        }
        rhs(&y_new, &mut k7, &mut stats);

        let mut err: f64 = 0.0;
        for i in 0..n {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7)
                * h;
            let sc = tol + tol * y[i].norm().max(y_new[i].norm());
            err = err.max(e.norm() / sc);
        }

        if !err.is_finite() {
            h *= FAC_MIN;
            stats.rejected += 1;
            last_rejected = true;
            continue;
        }

        if err <= 1.0 {
            stats.accepted += 1;
            t = if last { t_end } else { t + h };
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);

            check_step_invariants(&y, d, t, check_tol)?;
            // L maps the anti-Hermitian part onto itself, so dropping it leaves
            // the Hermitian solution untouched. Near the stability edge of
            // stiff runs that part otherwise carries noise at the tol level.
            hermitize(&mut y, d);
            hermitize(&mut k1, d);

            let mut fac = SAFETY * err.max(1e-10).powf(-0.2 + 0.75 * BETA) * err_old.powf(BETA);
            fac = fac.clamp(FAC_MIN, FAC_MAX);
            if last_rejected {
                fac = fac.min(1.0);
            }
            err_old = err.max(1e-4);
            last_rejected = false;

            rec.push(Knot { t, y: y.clone(), f: k1.clone() });

            if let Some(cond) = stop.as_mut() {
                let rho = to_matrix(d, y.clone());
                if cond(t, &rho) {
                    stopped = t < t_end;
                    rec.keep_bracket();
                    break;
                }
            }
            h *= fac;
        } else {
            stats.rejected += 1;
            let fac = (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0);
            h *= fac;
            last_rejected = true;
        }
    }

    rec.flush();
    let mut times = Vec::with_capacity(rec.kept.len());
    let mut states = Vec::with_capacity(rec.kept.len());
    let mut derivatives = Vec::with_capacity(rec.kept.len());
    for knot in rec.kept {
        let rho = DensityMatrix::new_unchecked(to_matrix(d, knot.y), space)?;
        if opts.check_positivity {
            let min_ev = hermitian_eigenvalues(rho.matrix())?[0];
            if min_ev < -POSITIVITY_TOL.max(check_tol) {
                return Err(Error::InvariantViolation {
                    t: knot.t,
                    what: format!("negative eigenvalue {min_ev:e}"),
                });
            }
        }
        times.push(knot.t);
        states.push(rho);
        derivatives.push(to_matrix(d, knot.f));
    }
    Ok(Trajectory { times, states, derivatives, stopped_early: stopped, stats })
}

fn hermitize(v: &mut [C64], d: usize) {
    for i in 0..d {
        v[i * d + i].im = 0.0;
        for j in i + 1..d {
            let m = (v[i * d + j] + v[j * d + i].conj()) * 0.5;
            v[i * d + j] = m;
            v[j * d + i] = m.conj();
        }
    }
}

fn check_step_invariants(y: &[C64], d: usize, t: f64, tol: f64) -> Result<()> {
    let mut tr = C64::new(0.0, 0.0);
    let mut herm: f64 = 0.0;
    for i in 0..d {
        tr += y[i * d + i];
        for j in i..d {
            herm = herm.max((y[i * d + j] - y[j * d + i].conj()).norm());
        }
    }
    let trace_err = (tr - C64::new(1.0, 0.0)).norm();
    if !trace_err.is_finite() || trace_err > tol {
        return Err(Error::InvariantViolation { t, what: format!("trace error {trace_err:e}") });
    }
    if herm > tol {
        return Err(Error::InvariantViolation { t, what: format!("hermiticity error {herm:e}") });
    }
    Ok(())
}
