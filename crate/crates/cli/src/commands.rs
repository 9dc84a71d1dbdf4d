use std::path::{Path, PathBuf};

use ramsey_core::effective::{critical_drive_search, crossing_point};
use ramsey_core::experiments::{
    log_grid, run_evolution, run_fig1_range, run_fig2, run_fig3, RunSettings, SweepResult, GATE_TOL,
    TSTAR_TOL,
};
use ramsey_core::{FockCutoff, SystemParams};

use crate::args::{
    Command, CriticalDriveArgs, CrossingArgs, EvolveArgs, Fig1Args, Fig2Args, Fig3Args, GridOpts, RunOpts,
};
use crate::svg::{self, Axis, PlotSpec, Series};
use crate::table::{ensure_writable, format_number, meta_path, write_csv, write_meta, Cell, Meta, Table};
use crate::{CliError, Report};

pub const FIG1_HEADER: [&str; 5] = ["gt", "sigma_z", "entropy_norm", "jw_norm", "jq_norm"];
pub const FIG2_HEADER: [&str; 6] = ["g_over_kappa", "t_star", "entropy_norm", "jw_norm", "jq_norm", "converged"];
pub const FIG3_HEADER: [&str; 5] = ["g_over_kappa", "t_star", "n_flux", "entropy_norm", "converged"];
pub const EVOLVE_HEADER: [&str; 7] =
    ["t", "sigma_z", "entropy_norm", "jw_norm", "jq_norm", "re_sigma_plus", "im_sigma_plus"];
pub const CRITICAL_HEADER: [&str; 2] = ["eps_over_kappa", "crosses"];

pub fn run(command: &Command) -> Result<Report, CliError> {
    match command {
        Command::Fig1(a) => fig1(a),
        Command::Fig2(a) => fig2(a),
        Command::Fig3(a) => fig3(a),
        Command::Evolve(a) => evolve(a),
        Command::Crossing(a) => crossing(a),
        Command::CriticalDrive(a) => critical(a),
    }
}

fn settings(run: &RunOpts) -> RunSettings {
    RunSettings {
        tol: run.tol,
        workers: run.workers as usize,
        truncation_gate: !run.no_gate,
        n_max: run.n_max,
    }
}

fn grid(g: &GridOpts) -> Result<Vec<f64>, CliError> {
    if g.g_min >= g.g_max {
        return Err(CliError::Usage(format!("--g-min ({}) must be below --g-max ({})", g.g_min, g.g_max)));
    }
    Ok(log_grid(g.g_min, g.g_max, g.grid_points))
}

/// Output paths for `stem` under the run's directory: csv, meta, optional svg.
fn outputs(run: &RunOpts, stem: &str) -> Result<(PathBuf, PathBuf, Option<PathBuf>), CliError> {
    let csv = run.out_dir.join(format!("{stem}.csv"));
    let meta = meta_path(&csv);
    let svg = run.svg.then(|| csv.with_extension("svg"));
    let mut all = vec![csv.clone(), meta.clone()];
    all.extend(svg.clone());
    ensure_writable(&all, run.overwrite)?;
    Ok((csv, meta, svg))
}

fn base_meta(command: &str) -> Meta {
    let mut m = Meta::default();
    m.comment(format!("ramsey-thermo {} {command}", env!("CARGO_PKG_VERSION")));
    m.comment(format!("t* tolerance = {TSTAR_TOL:e}, truncation gate tolerance = {GATE_TOL:e}"));
    m
}

fn run_pairs(m: &mut Meta, run: &RunOpts) {
    m.set("tol", run.tol);
    m.set("n-max", run.n_max);
    m.set("no-gate", run.no_gate);
    m.set("workers", run.workers);
    m.set("svg", run.svg);
}

fn grid_pairs(m: &mut Meta, g: &GridOpts) {
    m.set("grid-points", g.grid_points);
    m.set("g-min", g.g_min);
    m.set("g-max", g.g_max);
}

fn write_all(
    table: &Table,
    meta: &Meta,
    csv: &Path,
    meta_file: &Path,
    svg: Option<(&Path, String)>,
) -> Result<Vec<PathBuf>, CliError> {
    write_csv(table, csv)?;
    write_meta(meta, meta_file)?;
    let mut written = vec![csv.to_path_buf(), meta_file.to_path_buf()];
    if let Some((path, doc)) = svg {
        std::fs::write(path, doc).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        written.push(path.to_path_buf());
    }
    Ok(written)
}

fn nan_to_missing(v: f64) -> Cell {
    if v.is_nan() { Cell::Missing } else { Cell::Num(v) }
}

fn fig1(a: &Fig1Args) -> Result<Report, CliError> {
    let (csv, meta_file, svg_file) = outputs(&a.run, &format!("fig1_{}", a.regime.as_str()))?;
    let res = run_fig1_range(a.regime, a.gt_max, a.samples, &settings(&a.run))?;
    let g = res.params.g;

    let mut table = Table::new(&FIG1_HEADER);
    for s in &res.samples {
        table.push(vec![(g * s.t).into(), s.sigma_z.into(), s.entropy_norm().into(), s.jw_norm.into(), s.jq_norm.into()]);
    }

    let mut meta = base_meta("fig1");
    meta.comment(format!(
        "g/kappa = {}, eps/kappa = {}, gamma/kappa = {}, initial state |e>|0> (displaced)",
        res.params.g, res.params.eps, res.params.gamma
    ));
    meta.comment(format!("n_max used = {}, gate drift = {:e}, gate passed = {}", res.gate.n_max, res.gate.drift, res.gate.passed));
    meta.comment(format!("energy-balance residual = {:e}", res.energy_residual));
    meta.set("command", "fig1");
    meta.set("regime", a.regime.as_str());
    meta.set("samples", a.samples);
    meta.set("gt-max", a.gt_max);
    meta.set("svg-fluxes", a.svg_fluxes);
    run_pairs(&mut meta, &a.run);

    let doc = svg_file.as_ref().map(|p| {
        let xs: Vec<f64> = table.column("gt").iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        let mut series = vec![
            Series::new("<σz>", Axis::Left, &xs, &table.column("sigma_z")),
            Series::new("S/ln(2)", Axis::Left, &xs, &table.column("entropy_norm")),
        ];
        if a.svg_fluxes {
            series.push(Series::new("J_W/ħωg", Axis::Left, &xs, &table.column("jw_norm")));
            series.push(Series::new("J_Q/ħωg", Axis::Left, &xs, &table.column("jq_norm")));
        }
        let spec = PlotSpec {
            title: format!("regime {}: g/κ = {}, ε/κ = {}", a.regime.as_str(), res.params.g, res.params.eps),
            x_label: "gt".into(),
            y_label: "value".into(),
            y2_label: None,
            log_x: false,
            log_y: false,
            log_y2: false,
        };
        (p.as_path(), svg::render(&spec, &series))
    });

    let written = write_all(&table, &meta, &csv, &meta_file, doc)?;
    let mut stdout = format!("wrote {} samples to {}\n", table.rows.len(), csv.display());
    if !res.gate.passed && !a.run.no_gate {
        stdout.push_str(&format!("warning: truncation gate failed (drift {:e})\n", res.gate.drift));
    }
    Ok(Report { stdout, written })
}

fn sweep_meta(meta: &mut Meta, res: &SweepResult) {
    let n_max = res.rows.iter().filter_map(|r| r.gate.map(|g| g.n_max)).max();
    let converged = res.rows.iter().filter(|r| r.converged).count();
    let residual = res.rows.iter().filter_map(|r| r.point.map(|p| p.energy_residual)).fold(0.0, f64::max);
    meta.comment(format!(
        "n_max used = {}, converged rows = {converged}/{}",
        n_max.map_or("-".to_string(), |n| n.to_string()),
        res.rows.len()
    ));
    meta.comment(format!("max energy-balance residual = {residual:e}"));
    for r in res.rows.iter().filter(|r| r.error.is_some()) {
        meta.comment(format!("g/kappa = {}: {}", r.g_over_kappa, r.error.as_deref().unwrap_or_default()));
    }
    let crossings: Vec<String> = res.flux_crossings().iter().map(|g| format_number(*g)).collect();
    meta.comment(format!("|J_Q| = |J_W| near g/kappa = [{}]", crossings.join(", ")));
}

fn sweep_summary(table: &Table, csv: &Path, res: &SweepResult) -> String {
    let missing = res.rows.iter().filter(|r| r.point.is_none()).count();
    let unconverged = res.rows.iter().filter(|r| !r.converged).count();
    format!(
        "wrote {} rows to {} ({missing} without t*, {unconverged} not converged)\n",
        table.rows.len(),
        csv.display()
    )
}

fn fig2(a: &Fig2Args) -> Result<Report, CliError> {
    let g_grid = grid(&a.grid)?;
    let (csv, meta_file, svg_file) = outputs(&a.run, &format!("fig2_eps{}", a.eps))?;
    let res = run_fig2(a.eps, &g_grid, &settings(&a.run))?;

    let mut table = Table::new(&FIG2_HEADER);
    for r in &res.rows {
        let p = r.point;
        table.push(vec![
            r.g_over_kappa.into(),
            p.map(|p| p.t_star).into(),
            p.map(|p| p.sample.entropy_norm()).into(),
            p.map(|p| p.sample.jw_norm).into(),
            p.map(|p| p.sample.jq_norm).into(),
            r.converged.into(),
        ]);
    }

    let mut meta = base_meta("fig2");
    meta.comment("kappa = 1, gamma = 0, initial state |e>|0> (displaced)");
    sweep_meta(&mut meta, &res);
    meta.set("command", "fig2");
    meta.set("eps", a.eps);
    grid_pairs(&mut meta, &a.grid);
    run_pairs(&mut meta, &a.run);

    let doc = svg_file.as_ref().map(|p| {
        let spec = PlotSpec {
            title: format!("at t*, ε/κ = {}", a.eps),
            x_label: "g/κ".into(),
            y_label: "value".into(),
            y2_label: None,
            log_x: true,
            log_y: false,
            log_y2: false,
        };
        let series = [
            Series::new("S/ln(2)", Axis::Left, &g_grid, &table.column("entropy_norm")),
            Series::new("J_W/ħωg", Axis::Left, &g_grid, &table.column("jw_norm")),
            Series::new("J_Q/ħωg", Axis::Left, &g_grid, &table.column("jq_norm")),
        ];
        (p.as_path(), svg::render(&spec, &series))
    });

    let written = write_all(&table, &meta, &csv, &meta_file, doc)?;
    Ok(Report { stdout: sweep_summary(&table, &csv, &res), written })
}

fn fig3(a: &Fig3Args) -> Result<Report, CliError> {
    let g_grid = grid(&a.grid)?;
    let (csv, meta_file, svg_file) = outputs(&a.run, "fig3")?;
    let res = run_fig3(&g_grid, &settings(&a.run))?;

    let mut table = Table::new(&FIG3_HEADER);
    for r in &res.rows {
        let p = r.point;
        table.push(vec![
            r.g_over_kappa.into(),
            p.map(|p| p.t_star).into(),
            p.map(|p| p.n_flux).into(),
            p.map(|p| p.sample.entropy_norm()).into(),
            r.converged.into(),
        ]);
    }

    let mut meta = base_meta("fig3");
    meta.comment("eps = kappa = 1, gamma = 0, n_flux = (eps t*)^2, n_cav = 1");
    sweep_meta(&mut meta, &res);
    meta.set("command", "fig3");
    grid_pairs(&mut meta, &a.grid);
    run_pairs(&mut meta, &a.run);

    let doc = svg_file.as_ref().map(|p| {
        let spec = PlotSpec {
            title: "photons crossing the cavity up to t*, ε = κ".into(),
            x_label: "g/κ".into(),
            y_label: "n_flux".into(),
            y2_label: Some("S/ln(2)".into()),
            log_x: true,
            log_y: true,
            log_y2: false,
        };
        let series = [
            Series::new("n_flux", Axis::Left, &g_grid, &table.column("n_flux")),
            Series::new("S/ln(2)", Axis::Right, &g_grid, &table.column("entropy_norm")),
        ];
        (p.as_path(), svg::render(&spec, &series))
    });

    let written = write_all(&table, &meta, &csv, &meta_file, doc)?;
    Ok(Report { stdout: sweep_summary(&table, &csv, &res), written })
}

fn evolve(a: &EvolveArgs) -> Result<Report, CliError> {
    let params = SystemParams {
        g: a.g,
        eps: a.eps,
        kappa: a.kappa,
        gamma: a.gamma,
        cutoff: FockCutoff::new(a.run.n_max)?,
        picture: a.picture,
    };
    params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let (csv, meta_file, svg_file) = outputs(&a.run, "evolve")?;
    let res = run_evolution(&params, a.t_end, a.samples, &settings(&a.run))?;

    let mut table = Table::new(&EVOLVE_HEADER);
    for s in &res.samples {
        table.push(vec![
            s.t.into(),
            s.sigma_z.into(),
            s.entropy_norm().into(),
            nan_to_missing(s.jw_norm),
            nan_to_missing(s.jq_norm),
            s.re_sigma_plus.into(),
            s.im_sigma_plus.into(),
        ]);
    }

    let mut meta = base_meta("evolve");
    match res.gate {
        Some(g) => meta.comment(format!("n_max used = {}, gate drift = {:e}, gate passed = {}", g.n_max, g.drift, g.passed)),
        None => meta.comment("atom-only picture, no Fock cutoff"),
    }
    if !res.fluxes {
        meta.comment("fluxes need the displaced or effective-atom picture and g > 0");
    }
    meta.set("command", "evolve");
    meta.set("g", a.g);
    meta.set("eps", a.eps);
    meta.set("kappa", a.kappa);
    meta.set("gamma", a.gamma);
    meta.set("picture", a.picture);
    meta.set("t-end", a.t_end);
    meta.set("samples", a.samples);
    run_pairs(&mut meta, &a.run);

    let doc = svg_file.as_ref().map(|p| {
        let xs: Vec<f64> = res.samples.iter().map(|s| s.t).collect();
        let mut series = vec![
            Series::new("<σz>", Axis::Left, &xs, &table.column("sigma_z")),
            Series::new("S/ln(2)", Axis::Left, &xs, &table.column("entropy_norm")),
        ];
        if res.fluxes {
            series.push(Series::new("J_W/ħωg", Axis::Left, &xs, &table.column("jw_norm")));
            series.push(Series::new("J_Q/ħωg", Axis::Left, &xs, &table.column("jq_norm")));
        }
        let spec = PlotSpec {
            title: format!("{} picture, g = {}, ε = {}, κ = {}, γ = {}", a.picture, a.g, a.eps, a.kappa, a.gamma),
            x_label: "t".into(),
            y_label: "value".into(),
            y2_label: None,
            log_x: false,
            log_y: false,
            log_y2: false,
        };
        (p.as_path(), svg::render(&spec, &series))
    });

    let written = write_all(&table, &meta, &csv, &meta_file, doc)?;
    let stdout = format!("wrote {} samples to {}\n", table.rows.len(), csv.display());
    Ok(Report { stdout, written })
}

fn crossing(a: &CrossingArgs) -> Result<Report, CliError> {
    let c = crossing_point(a.eps)?;
    let mut stdout = format!("g_cross_over_kappa = {}\n", format_number(c.g_cross_over_kappa));
    stdout.push_str(&format!("t_star = {}\n", format_number(c.t_star)));
    stdout.push_str(&format!("re_sigma_plus_at_tstar = {}\n", format_number(c.re_sigma_plus_at_tstar)));
    Ok(Report { stdout, written: vec![] })
}

fn critical(a: &CriticalDriveArgs) -> Result<Report, CliError> {
    if a.lo >= a.hi {
        return Err(CliError::Usage(format!("--lo ({}) must be below --hi ({})", a.lo, a.hi)));
    }
    let g_grid = grid(&a.grid)?;
    let (csv, meta_file, _) = outputs(&RunOpts { svg: false, ..a.run.clone() }, "critical_drive")?;
    let res = critical_drive_search(a.lo, a.hi, &g_grid, &settings(&a.run))?;

    let mut evals = res.evaluations.clone();
    evals.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut table = Table::new(&CRITICAL_HEADER);
    for (eps, crosses) in &evals {
        table.push(vec![(*eps).into(), (*crosses).into()]);
    }
    let mut meta = base_meta("critical-drive");
    meta.comment(format!("threshold = {}, bracket = [{}, {}]", res.threshold, res.lo, res.hi));
    meta.set("command", "critical-drive");
    meta.set("lo", a.lo);
    meta.set("hi", a.hi);
    grid_pairs(&mut meta, &a.grid);
    run_pairs(&mut meta, &RunOpts { svg: false, ..a.run.clone() });

    let written = write_all(&table, &meta, &csv, &meta_file, None)?;
    let mut stdout = String::new();
    for (eps, crosses) in &evals {
        stdout.push_str(&format!("eps_over_kappa = {} crosses = {crosses}\n", format_number(*eps)));
    }
    stdout.push_str(&format!("critical_eps_over_kappa = {}\n", format_number(res.threshold)));
    Ok(Report { stdout, written })
}
