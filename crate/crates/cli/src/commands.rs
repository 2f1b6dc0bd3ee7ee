use std::fmt;
use std::fs;
use std::io::{BufReader, Cursor};
use std::path::Path;

use krflow::flow::{run_flow, FlowOptions, Trajectory};
use krflow::io::{
    distance_rows, holder_row, read_field, write_field, write_pgm, DISTANCES_HEADER, HOLDER_HEADER,
};
use krflow::metric::{
    eikonal_distance, holder_fit_values, lattice_distance, ConformalMetric, DistanceField, Envelope,
};
use krflow::potentials::{Sign, SingularPotential};
use krflow::verify::{
    check_curve_integrability, check_trajectory, curvature_measure, density_audit,
    expected_radial_exponent, flow_metric_convergence, radial_exponent, report_csv,
    ricci_convergence, run_matched_ladder, sample_pairs, stability_ratio, CheckResult, PairSample,
    ToleranceBasis,
};
use krflow::{Point, ScalarField};
use rayon::prelude::*;

use crate::config::{ConfigError, ScenarioConfig};
use crate::output::{OutputDir, OutputError};

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(String),
    ChecksFailed(usize),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::ChecksFailed(_) => 1,
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) | Failure::Runtime(m) => f.write_str(m),
            Failure::ChecksFailed(k) => write!(f, "{k} check(s) failed"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<OutputError> for Failure {
    fn from(e: OutputError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn runtime(context: &str) -> impl Fn(krflow::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{context}: {e}"))
}

pub struct Potentials {
    pub plus: SingularPotential,
    pub minus: SingularPotential,
}

pub fn potentials(cfg: &ScenarioConfig) -> Result<Potentials, Failure> {
    let grid = cfg.grid();
    let ctx = format!("scenario {}", cfg.name);
    Ok(Potentials {
        plus: SingularPotential::from_specs(&grid, Sign::Plus, &cfg.poles)
            .map_err(runtime(&ctx))?,
        minus: SingularPotential::from_specs(&grid, Sign::Minus, &cfg.poles)
            .map_err(runtime(&ctx))?,
    })
}

fn anchor(cfg: &ScenarioConfig) -> Point {
    cfg.poles
        .first()
        .map_or(Point::new(0.5, 0.5), |p| p.location)
}

/// One trajectory per truncation level.
pub fn run_flows(
    cfg: &ScenarioConfig,
    pots: &Potentials,
) -> Result<Vec<(u32, Trajectory)>, Failure> {
    cfg.levels
        .par_iter()
        .map(|&j| {
            run_flow(
                &pots.plus,
                &pots.minus,
                j as f64,
                cfg.t_end,
                cfg.depth,
                FlowOptions::default(),
            )
            .map(|t| (j, t))
            .map_err(runtime(&format!("scenario {} level {j}", cfg.name)))
        })
        .collect()
}

fn checkpoint_name(level: u32, index: usize) -> String {
    format!("j{level}/state_{index:02}.krf")
}

pub fn cmd_run(
    cfg: &ScenarioConfig,
    out: &mut OutputDir,
) -> Result<Vec<(u32, Trajectory)>, Failure> {
    let pots = potentials(cfg)?;
    let trajs = run_flows(cfg, &pots)?;
    for (j, traj) in &trajs {
        for (i, s) in traj.states.iter().enumerate() {
            let mut buf = Vec::new();
            write_field(&mut buf, "phi", s.t, &s.phi, Some(out.hash()))
                .map_err(runtime("checkpoint"))?;
            write_field(&mut buf, "u", s.t, &s.u, Some(out.hash()))
                .map_err(runtime("checkpoint"))?;
            out.write(&checkpoint_name(*j, i), &buf)?;
        }
        out.write_csv(&format!("j{j}/diagnostics.csv"), &traj.diagnostics_csv())?;
        println!(
            "level {j}: {} states, {} steps",
            traj.states.len(),
            traj.steps
        );
    }
    Ok(trajs)
}

/// `u` of the checkpoint at time `t`, or an error listing the available times.
fn load_u(out: &OutputDir, level: u32, t: f64) -> Result<ScalarField, Failure> {
    let dir = out.path(&format!("j{level}"));
    if !dir.is_dir() {
        return Err(Failure::Runtime(format!(
            "missing checkpoint directory {} (run the `run` subcommand first)",
            dir.display()
        )));
    }
    let mut names: Vec<_> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "krf"))
        .collect();
    names.sort();
    let mut times = Vec::new();
    for path in names {
        let mut r = BufReader::new(fs::File::open(&path)?);
        while let Some((header, field)) =
            read_field(&mut r).map_err(runtime(&path.display().to_string()))?
        {
            if header
                .config_hash
                .as_deref()
                .is_some_and(|h| h != out.hash())
            {
                return Err(Failure::Config(format!(
                    "checkpoint {} belongs to config {}",
                    path.display(),
                    header.config_hash.unwrap_or_default()
                )));
            }
            if header.kind == "u" {
                if (header.t - t).abs() <= 1e-9 * t.abs().max(1e-300) {
                    return Ok(field);
                }
                times.push(header.t);
            }
        }
    }
    let list: Vec<String> = times.iter().map(|t| format!("{t:e}")).collect();
    Err(Failure::Runtime(format!(
        "no checkpoint at t = {t:e} for level {level}; available ladder times: {}",
        list.join(", ")
    )))
}

fn fit_rows(
    label: &str,
    fields: &[DistanceField],
    sample: &PairSample,
    grid: &krflow::TorusGrid,
) -> Vec<String> {
    let flat = sample.flat_distances(grid);
    let pts: Vec<(f64, f64)> = sample
        .pairs
        .iter()
        .zip(&flat)
        .map(|(&(i, k), &ds)| (fields[i].at(k), ds))
        .collect();
    [Envelope::Upper, Envelope::Lower]
        .iter()
        .filter_map(|&dir| match holder_fit_values(&pts, dir) {
            Ok(fit) => Some(holder_row(label, &fit)),
            Err(e) => {
                eprintln!("note: no {dir} fit for {label}: {e}");
                None
            }
        })
        .collect()
}

pub fn cmd_dist(
    cfg: &ScenarioConfig,
    out: &mut OutputDir,
    time: Option<f64>,
    level: Option<u32>,
) -> Result<(), Failure> {
    let grid = cfg.grid();
    let pots = potentials(cfg)?;
    let metric = match time {
        None => {
            ConformalMetric::singular(&pots.plus, &pots.minus).map_err(runtime("limit metric"))?
        }
        Some(t) => {
            let j = level.unwrap_or_else(|| *cfg.levels.iter().max().expect("non-empty"));
            if !cfg.levels.contains(&j) {
                return Err(Failure::Config(format!(
                    "level {j} is not among the configured levels {:?}",
                    cfg.levels
                )));
            }
            ConformalMetric::from_field(load_u(out, j, t)?)
        }
    };
    let sample = sample_pairs(&grid, cfg.seed, anchor(cfg));
    let solve = |f: fn(&ConformalMetric, &Point) -> krflow::Result<DistanceField>| {
        sample
            .sources
            .par_iter()
            .map(|s| f(&metric, s))
            .collect::<krflow::Result<Vec<_>>>()
            .map_err(runtime("distance"))
    };
    let eik = solve(eikonal_distance)?;
    let lat = solve(lattice_distance)?;
    let mut body = format!("{DISTANCES_HEADER}\n");
    for row in distance_rows(&eik, &sample.pairs, time)
        .into_iter()
        .chain(distance_rows(&lat, &sample.pairs, time))
    {
        body.push_str(&row);
        body.push('\n');
    }
    out.write_csv("distances.csv", &body)?;
    let when = time.map_or_else(|| "limit".to_string(), |t| format!("t={t:e}"));
    let mut holder = format!("{HOLDER_HEADER}\n");
    for (name, fields) in [("eikonal", &eik), ("lattice-oracle", &lat)] {
        for row in fit_rows(&format!("{when} {name}"), fields, &sample, &grid) {
            holder.push_str(&row);
            holder.push('\n');
        }
    }
    out.write_csv("holder.csv", &holder)?;
    println!(
        "{} pairs from {} sources written",
        sample.pairs.len(),
        sample.sources.len()
    );
    Ok(())
}

const METRIC_FINAL_FRACTION: f64 = 0.02;
const LADDER_NOISE: f64 = 1e-4;
const DRIFT: f64 = 0.2;
const CROSS_VALIDATION: f64 = 0.03;

/// Every check of the battery for one scenario.
pub fn verify_checks(cfg: &ScenarioConfig) -> Result<Vec<CheckResult>, Failure> {
    use ToleranceBasis::*;
    let grid = cfg.grid();
    let pots = potentials(cfg)?;
    let name = cfg.name.as_str();
    let mut checks = Vec::new();

    let trajs = run_flows(cfg, &pots)?;
    let mut fits = Vec::new();
    for (j, traj) in &trajs {
        let scenario = format!("{name}-j{j}");
        let (report, fit) = check_trajectory(&scenario, traj);
        checks.extend(report.checks);
        let gb = traj
            .states
            .iter()
            .map(|s| curvature_measure(&s.u).total.abs())
            .fold(0.0, f64::max);
        checks.push(CheckResult::at_most(
            "gauss-bonnet",
            &scenario,
            gb,
            1e-8,
            Exact,
        ));
        fits.push(fit);
    }
    let collect =
        |f: fn(&krflow::verify::TrajectoryFit) -> f64| fits.iter().map(f).collect::<Vec<_>>();
    checks.push(CheckResult::at_most(
        "b-plus-stable",
        name,
        stability_ratio(&collect(|f| f.b_plus)),
        2.0,
        Stated,
    ));
    checks.push(CheckResult::at_most(
        "b-minus-stable",
        name,
        stability_ratio(&collect(|f| f.b_minus)),
        2.0,
        Stated,
    ));
    checks.push(CheckResult::at_most(
        "concavity-stable",
        name,
        stability_ratio(&collect(|f| f.concavity.max(0.0))),
        2.0,
        Stated,
    ));
    checks.push(
        CheckResult::at_most(
            "gradient-growth-stable",
            name,
            stability_ratio(&collect(|f| f.gradient_growth)),
            2.0,
            Stated,
        )
        .optional(),
    );

    let ladder = run_matched_ladder(&pots.plus, &pots.minus, cfg.depth, FlowOptions::default())
        .map_err(runtime("matched ladder"))?;
    let gb = ladder
        .entries
        .iter()
        .map(|e| curvature_measure(&e.state.u).total.abs())
        .fold(0.0, f64::max);
    checks.push(CheckResult::at_most(
        "gauss-bonnet-ladder",
        name,
        gb,
        1e-8,
        Exact,
    ));
    let rc = ricci_convergence(&ladder, &pots.plus, &pots.minus)
        .map_err(runtime("ricci convergence"))?;
    checks.push(CheckResult::at_most(
        "ricci-l1-decreasing",
        name,
        rc.worst_l1_increase(),
        LADDER_NOISE,
        Stated,
    ));
    checks.push(CheckResult::at_most(
        "ricci-pairing-decreasing",
        name,
        rc.worst_pairing_increase(),
        LADDER_NOISE,
        Stated,
    ));
    checks.push(CheckResult::at_most(
        "ricci-l1-final",
        name,
        rc.final_l1(),
        0.05,
        Calibrated,
    ));

    let sample = sample_pairs(&grid, cfg.seed, anchor(cfg));
    match flow_metric_convergence(&ladder, &pots.plus, &pots.minus, &sample) {
        Ok(mc) => {
            checks.push(CheckResult::at_most(
                "metric-decreasing",
                name,
                mc.worst_increase(),
                grid.h(),
                Calibrated,
            ));
            checks.push(CheckResult::at_most(
                "metric-final",
                name,
                mc.final_sup(),
                METRIC_FINAL_FRACTION * mc.flat_diameter,
                Calibrated,
            ));
            checks.push(CheckResult::at_most(
                "equicontinuity-exponent-drift",
                name,
                mc.alpha_drift(),
                DRIFT,
                Calibrated,
            ));
            checks.push(CheckResult::at_most(
                "equicontinuity-constant-drift",
                name,
                mc.constant_drift(),
                DRIFT,
                Calibrated,
            ));
        }
        Err(e) => {
            eprintln!("metric convergence failed: {e}");
            for id in [
                "metric-decreasing",
                "metric-final",
                "equicontinuity-exponent-drift",
                "equicontinuity-constant-drift",
            ] {
                checks.push(CheckResult::at_most(id, name, f64::NAN, 0.0, Calibrated));
            }
        }
    }

    let scale = (pots.minus.max_lelong() / 0.6).max(1.0);
    let ci = check_curve_integrability(&pots.minus, scale, 0.2)
        .map_err(runtime("curve integrability"))?;
    checks.push(CheckResult::at_least(
        "curve-integrability",
        name,
        ci.min_exponent(),
        ci.threshold,
        Stated,
    ));

    let audit = density_audit(cfg.seed, 200, 50, grid.h() / 8.0);
    checks.push(CheckResult::at_most(
        "density-lemma",
        name,
        audit.violations as f64,
        0.0,
        Stated,
    ));

    if let Some((_, last)) = trajs.iter().max_by_key(|(j, _)| *j) {
        let u = last.states.last().expect("states").u.clone();
        let metric = ConformalMetric::from_field(u);
        let src = Point::new(0.3137, 0.4771);
        let l = lattice_distance(&metric, &src).map_err(runtime("lattice"))?;
        let e = eikonal_distance(&metric, &src).map_err(runtime("eikonal"))?;
        let rel = (0..grid.len())
            .filter(|&k| l.at(k) > 0.05)
            .map(|k| (l.at(k) - e.at(k)).abs() / l.at(k))
            .fold(0.0, f64::max);
        checks.push(CheckResult::at_most(
            "distance-cross-validation",
            name,
            rel,
            CROSS_VALIDATION,
            Calibrated,
        ));
    }

    if cfg.poles.len() == 1 {
        let p = &cfg.poles[0];
        match radial_exponent(&pots.plus, &pots.minus, &p.location) {
            Ok(s) => checks.push(CheckResult::at_most(
                "radial-exponent",
                name,
                (s - expected_radial_exponent(p)).abs(),
                0.05,
                Stated,
            )),
            Err(e) => eprintln!("radial exponent skipped: {e}"),
        }
    }

    Ok(checks.into_iter().filter(|c| cfg.wants(&c.id)).collect())
}

fn summarize(checks: &[CheckResult], strict: bool) -> usize {
    let mut failed = 0;
    for c in checks {
        let enforced = !c.optional || strict;
        let tag = match (c.passed, enforced) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "fail (optional)",
        };
        println!(
            "{tag:<16} {:<32} {:<24} value {:.4e}  tolerance {:.3e} ({})",
            c.id, c.scenario, c.value, c.tolerance, c.basis
        );
        if !c.passed && enforced {
            failed += 1;
        }
    }
    println!("{} checks, {failed} failing", checks.len());
    failed
}

pub fn cmd_verify(cfg: &ScenarioConfig, out: &mut OutputDir, strict: bool) -> Result<(), Failure> {
    let checks = verify_checks(cfg)?;
    out.write_csv("report.csv", &report_csv(&checks))?;
    match summarize(&checks, strict) {
        0 => Ok(()),
        k => Err(Failure::ChecksFailed(k)),
    }
}

pub fn cmd_counterexample(levels: &[u32], seed: u64, out: &mut OutputDir) -> Result<(), Failure> {
    let report = krflow::verify::counterexample_run(levels, seed).map_err(|e| match e {
        krflow::Error::InvalidInput(m) => Failure::Config(m),
        e => Failure::Runtime(format!("counterexample: {e}")),
    })?;
    let mut rows = String::from(
        "level,n,tube_width,diagonals,l1_deviation,half_discrepancy,lower_margin,full_discrepancy,max_flat\n",
    );
    for r in &report.rows {
        rows.push_str(&format!(
            "{},{},{:e},{},{:e},{:e},{:e},{:e},{:e}\n",
            r.level,
            r.n,
            r.tube_width,
            r.diagonals,
            r.l1_deviation,
            r.half_discrepancy,
            r.lower_margin,
            r.full_discrepancy,
            r.max_flat
        ));
    }
    out.write_csv("counterexample/levels.csv", &rows)?;
    out.write_csv("counterexample/report.csv", &report_csv(&report.checks))?;
    match summarize(&report.checks, true) {
        0 => Ok(()),
        k => Err(Failure::ChecksFailed(k)),
    }
}

/// Summary of `report.csv` plus heatmaps of the last state of every level.
pub fn cmd_report(out: &mut OutputDir) -> Result<(), Failure> {
    let report = out.path("report.csv");
    if report.exists() {
        let text = fs::read_to_string(&report)?;
        let mut total = 0;
        let mut failing = Vec::new();
        for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
            total += 1;
            let cols: Vec<&str> = line.split(',').collect();
            if cols.get(2) == Some(&"fail") {
                failing.push(format!("{} ({})", cols[0], cols[1]));
            }
        }
        println!("report.csv: {total} checks, {} failing", failing.len());
        for f in failing {
            println!("  failing: {f}");
        }
    } else {
        println!("no report.csv yet");
    }
    let mut levels: Vec<(u32, std::path::PathBuf)> = fs::read_dir(out.path(""))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().to_string();
            name.strip_prefix('j')
                .and_then(|s| s.parse().ok())
                .map(|j| (j, e.path()))
        })
        .collect();
    levels.sort();
    for (j, dir) in levels {
        let mut files: Vec<_> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "krf"))
            .collect();
        files.sort();
        let Some(last) = files.last() else { continue };
        let bytes = fs::read(last)?;
        let mut r = Cursor::new(bytes);
        while let Some((header, field)) =
            read_field(&mut r).map_err(runtime(&last.display().to_string()))?
        {
            if header.kind != "u" {
                continue;
            }
            let mut pgm = Vec::new();
            write_pgm(&mut pgm, &field, Some(out.hash())).map_err(runtime("heatmap"))?;
            out.write(&format!("heatmaps/j{j}_u.pgm"), &pgm)?;
            let n = field.grid().n();
            let mut csv = String::from("i,j,u\n");
            for jj in 0..n {
                for ii in 0..n {
                    csv.push_str(&format!("{ii},{jj},{:.12e}\n", field.at(ii, jj)));
                }
            }
            out.write_csv(&format!("heatmaps/j{j}_u.csv"), &csv)?;
            println!("level {j}: heatmap of u at t = {:e}", header.t);
        }
    }
    Ok(())
}

pub fn read_config(path: &Path) -> Result<ScenarioConfig, Failure> {
    let src = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    ScenarioConfig::parse(&src).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}
