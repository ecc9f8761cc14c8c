//! Experiment orchestration.

use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use gauss_schrodinger::field::{analytic_covariance, decompose, empirical_covariance, snapshot};
use gauss_schrodinger::ids::{bracketed_ids, density_bound_check, mc_ids, tail_check, trace_ids, weyl_check, Window};
use gauss_schrodinger::operator::{assemble, spectrum_csv, SolverOptions};
use gauss_schrodinger::probes::{decile_windows, localization_report};
use gauss_schrodinger::wegner::{t_envelope, verify_wegner, wegner_asymptotics, wegner_at_closed_form, wegner_constant};
use gauss_schrodinger::{
    make_gaussian_kernel, sample_field, validity_cutoff, BoundaryCondition, CovarianceSpec, Ensemble, FieldError,
    FieldSample, Grid, IdsCurve, IdsError, KernelSpec, OperatorError, ProbeError, WegnerError,
};
use serde_json::{json, Value};

use crate::config::{BcChoice, ExperimentConfig, ExperimentKind, OutputFormat};
use crate::output::{csv_table, Outputs};
use crate::CliError;

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub format: Option<OutputFormat>,
    /// Raw value of the worker-count environment variable.
    pub env_workers: Option<String>,
}

impl RunOptions {
    pub fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(dir) = &self.out {
            config.output.directory = dir.clone();
        }
        if let Some(seed) = self.seed {
            config.ensemble.master_seed = seed;
        }
        if let Some(f) = self.format {
            config.output.format = f;
        }
    }

    /// `--workers`, then `ensemble.workers`, then the environment, then 0 (all cores).
    pub fn resolve_workers(&self, config: &ExperimentConfig) -> Result<usize, CliError> {
        if let Some(w) = self.workers.or(config.ensemble.workers) {
            return Ok(w);
        }
        match &self.env_workers {
            None => Ok(0),
            Some(s) => s
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&w| w > 0)
                .ok_or_else(|| CliError::Config(vec![format!("{} must be a positive integer (got {s:?})", crate::WORKERS_ENV)])),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub directory: PathBuf,
    pub files: Vec<String>,
    pub samples: usize,
    pub failed_samples: usize,
    pub validation_failures: Vec<String>,
    /// Human-readable result lines.
    pub summary: Vec<String>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.failed_samples > 0 {
            3
        } else if !self.validation_failures.is_empty() {
            4
        } else {
            0
        }
    }
}

#[derive(Default)]
struct Tally {
    samples: usize,
    failed: usize,
    failures: Vec<String>,
    summary: Vec<String>,
}

impl Tally {
    fn counted(&mut self, samples: usize, failed: usize) {
        self.samples = self.samples.max(samples + failed);
        self.failed = self.failed.max(failed);
    }
}

fn field_err(e: FieldError) -> CliError {
    CliError::Config(vec![e.to_string()])
}

fn ids_err(e: IdsError) -> CliError {
    match e {
        IdsError::Operator(op) => op_err(op),
        IdsError::AllSamplesFailed(_) | IdsError::IncompleteSpectrum => CliError::Solver(e.to_string()),
        other => CliError::Config(vec![other.to_string()]),
    }
}

fn op_err(e: OperatorError) -> CliError {
    match e {
        OperatorError::SolverNotConverged(_) | OperatorError::TooLargeForDense { .. } => CliError::Solver(e.to_string()),
        other => CliError::Config(vec![other.to_string()]),
    }
}

fn wegner_err(e: WegnerError) -> CliError {
    CliError::Config(vec![e.to_string()])
}

fn probe_err(e: ProbeError) -> CliError {
    match e {
        ProbeError::Operator(op) => op_err(op),
        ProbeError::AllSamplesFailed(_) => CliError::Solver(e.to_string()),
        other => CliError::Config(vec![other.to_string()]),
    }
}

struct Context {
    config: ExperimentConfig,
    grid: Grid,
    kernel: KernelSpec,
    ensemble: Ensemble,
}

impl Context {
    fn covariance(&self) -> Result<CovarianceSpec, CliError> {
        let f = &self.config.field;
        CovarianceSpec::gaussian(f.sigma, f.xi, self.grid.dimension(), Some(f.ell)).map_err(field_err)
    }
}

/// Run one experiment and write its artifacts. Errors that prevent any
/// result are returned as `Err`; sample failures and validation failures are
/// recorded in the outcome (and in the manifest).
pub fn run(mut config: ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    opts.apply(&mut config);
    let errors = config.validate();
    if !errors.is_empty() {
        return Err(CliError::Config(errors));
    }
    let workers = opts.resolve_workers(&config)?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let clock = Instant::now();
    let grid = config.grid().map_err(|e| CliError::Config(vec![e.to_string()]))?;
    let d = grid.dimension();
    let kernel = if config.field.sigma == 0.0 {
        KernelSpec::zero(d)
    } else {
        make_gaussian_kernel(config.field.sigma, config.field.xi, d).map_err(field_err)?
    };
    let ensemble = Ensemble::new(config.ensemble.samples, config.ensemble.master_seed).with_workers(workers);
    let dir = config.output.directory.clone();
    let mut out = Outputs::new(&dir, &config)?;
    let ctx = Context { config, grid, kernel, ensemble };
    let mut tally = Tally::default();
    match ctx.config.experiment {
        ExperimentKind::SampleField => sample_field_run(&ctx, &mut out, &mut tally)?,
        ExperimentKind::CovarianceCheck => covariance_run(&ctx, &mut out, &mut tally)?,
        ExperimentKind::Ids => ids_run(&ctx, &mut out, &mut tally)?,
        ExperimentKind::TraceIds => trace_run(&ctx, &mut out, &mut tally)?,
        ExperimentKind::WegnerEval => wegner_eval_run(&ctx, &mut out, &mut tally)?,
        ExperimentKind::WegnerVerify => wegner_verify_run(&ctx, &mut out, &mut tally)?,
        ExperimentKind::Asymptotics => asymptotics_run(&ctx, &mut out, &mut tally)?,
        ExperimentKind::Localize => localize_run(&ctx, &mut out, &mut tally)?,
    }
    let outcome = RunOutcome {
        directory: dir,
        files: out.files.clone(),
        samples: tally.samples,
        failed_samples: tally.failed,
        validation_failures: tally.failures,
        summary: tally.summary,
    };
    let manifest = json!({
        "tool": "gschro",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": ctx.config.experiment.as_str(),
        "config": ctx.config.to_document(),
        "config_hash": ctx.config.hash(),
        "master_seed": ctx.config.ensemble.master_seed,
        "workers": workers,
        "started_unix": started,
        "wall_time_seconds": clock.elapsed().as_secs_f64(),
        "samples": outcome.samples,
        "failed_samples": outcome.failed_samples,
        "validation": {
            "passed": outcome.validation_failures.is_empty(),
            "failures": outcome.validation_failures,
        },
        "outputs": outcome.files,
        "exit_code": outcome.exit_code(),
    });
    out.manifest(&manifest)?;
    Ok(outcome)
}

type SampleSpectra = (FieldSample, Vec<(BoundaryCondition, String, Vec<f64>)>);

fn sample_field_run(ctx: &Context, out: &mut Outputs, tally: &mut Tally) -> Result<(), CliError> {
    let cutoff = ctx.config.energies.last().copied().unwrap_or_else(|| validity_cutoff(ctx.grid.spacing()));
    let bcs = ctx.config.grid.bc.conditions();
    let opts = SolverOptions::default();
    let results = ctx.ensemble.map(|seed| -> Result<SampleSpectra, CliError> {
        let field = sample_field(&ctx.kernel, &ctx.grid, seed).map_err(field_err)?;
        let mut spectra = Vec::new();
        for &bc in &bcs {
            let h = assemble(&field, bc).map_err(op_err)?;
            let s = h.eigenvalues_below(cutoff, &opts).map_err(op_err)?;
            spectra.push((bc, spectrum_csv(&s, &ctx.grid, bc, Some(seed)), s.eigenvalues));
        }
        Ok((field, spectra))
    });
    let mut json_spectra = Vec::new();
    let mut failed = 0;
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok((field, spectra)) => {
                out.raw(&format!("fields/field_{k:05}.txt"), &snapshot::to_string(&field))?;
                for (bc, csv, values) in spectra {
                    out.csv(&format!("spectra/spectrum_{bc}_{k:05}.csv"), &csv)?;
                    json_spectra.push(json!({ "sample": k, "bc": bc, "cutoff": cutoff, "eigenvalues": values }));
                }
            }
            Err(CliError::Config(e)) if k == 0 => return Err(CliError::Config(e)),
            Err(_) => failed += 1,
        }
    }
    out.json("spectra.json", Value::from(json_spectra))?;
    tally.counted(ctx.ensemble.samples - failed, failed);
    tally.summary.push(format!("sampled {} field(s) on {} points", ctx.ensemble.samples - failed, ctx.grid.len()));
    Ok(())
}

fn offset_position(grid: &Grid, offset: &[i64]) -> Vec<f64> {
    offset.iter().map(|&o| o as f64 * grid.spacing()).collect()
}

fn covariance_run(ctx: &Context, out: &mut Outputs, tally: &mut Tally) -> Result<(), CliError> {
    let results = ctx.ensemble.map(|seed| sample_field(&ctx.kernel, &ctx.grid, seed));
    let mut samples = Vec::new();
    for r in results {
        samples.push(r.map_err(field_err)?);
    }
    tally.counted(samples.len(), 0);
    let m = samples.len() as f64;
    let estimates = empirical_covariance(&samples, &ctx.config.covariance.offsets).map_err(field_err)?;
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    for est in &estimates {
        let x = offset_position(&ctx.grid, &est.offset);
        let analytic = analytic_covariance(&ctx.kernel, &x);
        let z = if est.std_error > 0.0 { (est.estimate - analytic) / est.std_error } else { 0.0 };
        let pass = z.abs() <= 5.0;
        if !pass {
            tally.failures.push(format!("covariance at offset {:?}: {} vs {analytic} ({z:.2} standard errors)", est.offset, est.estimate));
        }
        let distance = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let offset_str = est.offset.iter().map(i64::to_string).collect::<Vec<_>>().join(" ");
        rows.push(vec![
            offset_str,
            distance.to_string(),
            est.estimate.to_string(),
            est.std_error.to_string(),
            analytic.to_string(),
            z.to_string(),
            pass.to_string(),
        ]);
        json_rows.push(json!({
            "offset": est.offset, "distance": distance, "estimate": est.estimate,
            "std_error": est.std_error, "analytic": analytic, "z": z, "pass": pass,
        }));
    }
    out.csv("covariance.csv", &csv_table(&["offset", "distance", "estimate", "std_error", "analytic", "z", "pass"], rows))?;
    let mut result = json!({ "samples": samples.len(), "covariance": json_rows });

    if !ctx.config.covariance.decomposition_points.is_empty() {
        let cov = ctx.covariance()?;
        let n = ctx.grid.points_per_side() as i64;
        let origin = ctx.grid.unravel(ctx.grid.origin_index());
        let mut points = Vec::new();
        for off in &ctx.config.covariance.decomposition_points {
            let idx: Vec<i64> = off.iter().zip(origin).map(|(o, c)| o + c as i64).collect();
            if idx.iter().any(|&i| i < 0 || i >= n) {
                return Err(CliError::Config(vec![format!("decomposition point {off:?} lies outside the grid")]));
            }
            let idx: Vec<usize> = idx.iter().map(|&i| i as usize).collect();
            points.push(ctx.grid.ravel(&idx));
        }
        let decs: Vec<_> = samples.iter().map(|s| decompose(s, &cov)).collect();
        let max_units = decs.iter().zip(&samples).map(|(d, s)| d.reconstruction_error_units(&s.values)).fold(0.0, f64::max);
        let u_origin = decs.iter().map(|d| d.u_field[d.origin_index].abs()).fold(0.0, f64::max);
        if max_units > 1.0 {
            tally.failures.push(format!("decomposition reconstruction error {max_units} rounding units"));
        }
        if u_origin != 0.0 {
            tally.failures.push(format!("U at the origin is {u_origin}, expected 0"));
        }
        let v0: Vec<f64> = decs.iter().map(|d| d.v0).collect();
        let bound = 5.0 / m.sqrt();
        let mut rows = Vec::new();
        let mut json_rows = Vec::new();
        for (off, &p) in ctx.config.covariance.decomposition_points.iter().zip(&points) {
            let u: Vec<f64> = decs.iter().map(|d| d.u_field[p]).collect();
            let corr = correlation(&v0, &u);
            let pass = corr.abs() < bound;
            if !pass {
                tally.failures.push(format!("corr(V(0), U) at {off:?} is {corr}, bound {bound}"));
            }
            let off_str = off.iter().map(i64::to_string).collect::<Vec<_>>().join(" ");
            rows.push(vec![off_str, corr.to_string(), bound.to_string(), pass.to_string()]);
            json_rows.push(json!({ "point": off, "correlation": corr, "bound": bound, "pass": pass }));
        }
        out.csv("decomposition.csv", &csv_table(&["point", "correlation", "bound", "pass"], rows))?;
        result["decomposition"] = json!({
            "max_reconstruction_error_units": max_units,
            "max_abs_u_at_origin": u_origin,
            "points": json_rows,
        });
    }
    out.json("covariance.json", result)?;
    tally.summary.push(format!("covariance check on {} samples: {} failure(s)", samples.len(), tally.failures.len()));
    Ok(())
}

/// Pearson correlation; 0 when either input is constant.
fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let sab: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let saa: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let sbb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

fn ids_run(ctx: &Context, out: &mut Outputs, tally: &mut Tally) -> Result<(), CliError> {
    let energies = &ctx.config.energies;
    let mut curves: Vec<IdsCurve> = Vec::new();
    let mut result = json!({});
    if ctx.config.grid.bc == BcChoice::Both {
        let rep = bracketed_ids(&ctx.kernel, &ctx.grid, energies, &ctx.ensemble).map_err(ids_err)?;
        for &(k, e) in &rep.violations {
            tally.failures.push(format!("bracketing violated for sample {k} at E = {e}"));
        }
        tally.summary.push(format!(
            "{} paired samples, {} bracketing violation(s), max Dirichlet-Neumann gap {}",
            rep.paired_samples,
            rep.violations.len(),
            rep.max_gap
        ));
        result["bracketing"] = json!({
            "paired_samples": rep.paired_samples,
            "max_gap": rep.max_gap,
            "violations": rep.violations,
        });
        curves.push(rep.dirichlet);
        curves.push(rep.neumann);
    } else {
        curves.push(mc_ids(&ctx.kernel, &ctx.grid, ctx.config.grid.bc.primary(), energies, &ctx.ensemble).map_err(ids_err)?);
    }
    for c in &curves {
        tally.counted(c.samples, c.failed_samples);
        out.csv(&format!("ids_{}.csv", c.bc), &c.to_csv())?;
    }
    result["curves"] = serde_json::to_value(&curves).expect("serializable");

    let checks = &ctx.config.checks;
    if !checks.weyl_energies.is_empty() {
        let mut rows = Vec::new();
        let mut json_rows = Vec::new();
        for c in &curves {
            for p in weyl_check(c, &checks.weyl_energies).map_err(ids_err)? {
                let rel = (p.ratio - p.target) / p.target;
                rows.push(vec![c.bc.to_string(), p.energy.to_string(), p.ratio.to_string(), p.target.to_string(), rel.to_string()]);
                json_rows.push(json!({ "bc": c.bc, "energy": p.energy, "ratio": p.ratio, "target": p.target, "relative_error": rel }));
                tally.summary.push(format!("Weyl ratio ({}) at E = {}: {} (target {}, {:+.2}%)", c.bc, p.energy, p.ratio, p.target, 100.0 * rel));
            }
        }
        out.csv("weyl.csv", &csv_table(&["bc", "energy", "ratio", "target", "relative_error"], rows))?;
        result["weyl"] = Value::from(json_rows);
    }
    if checks.tail {
        let c0 = ctx.config.field.sigma.powi(2);
        let mut fits = Vec::new();
        for c in &curves {
            match tail_check(c, c0) {
                Ok(fit) => {
                    tally.summary.push(format!("tail slope ({}): {} (target {})", c.bc, fit.fitted_slope, fit.target_slope));
                    fits.push(json!({ "bc": c.bc, "fit": fit }));
                }
                Err(e) => tally.failures.push(format!("tail check ({}): {e}", c.bc)),
            }
        }
        result["tail"] = Value::from(fits);
    }
    if checks.density {
        let cov = ctx.covariance()?;
        let mut rows = Vec::new();
        let mut json_rows = Vec::new();
        for c in &curves {
            let points = match density_bound_check(c, &cov) {
                Ok(p) => p,
                Err(e) => {
                    tally.failures.push(format!("density check ({}): {e}", c.bc));
                    continue;
                }
            };
            for p in points {
                if !p.pass {
                    tally.failures.push(format!("dN/dE ({}) at E = {} is {} ± {}, above W = {}", c.bc, p.energy, p.derivative, p.derivative_err, p.wegner));
                }
                rows.push(vec![
                    c.bc.to_string(),
                    p.energy.to_string(),
                    p.derivative.to_string(),
                    p.derivative_err.to_string(),
                    p.wegner.to_string(),
                    p.pass.to_string(),
                ]);
                json_rows.push(json!({ "bc": c.bc, "point": p }));
            }
        }
        out.csv("dos.csv", &csv_table(&["bc", "energy", "derivative", "derivative_err", "wegner", "pass"], rows))?;
        result["density"] = Value::from(json_rows);
    }
    out.json("ids.json", result)?;
    Ok(())
}

fn trace_run(ctx: &Context, out: &mut Outputs, tally: &mut Tally) -> Result<(), CliError> {
    let side = ctx.config.trace.window.expect("validated");
    let window = Window::centered(&ctx.grid, side).map_err(ids_err)?;
    let mut result = Vec::new();
    for bc in ctx.config.grid.bc.conditions() {
        let est = trace_ids(&ctx.kernel, &ctx.grid, &window, bc, &ctx.config.energies, &ctx.ensemble).map_err(ids_err)?;
        let rows = est.iter().map(|e| {
            vec![e.energy.to_string(), e.estimate.to_string(), e.std_error.to_string(), window.volume(&ctx.grid).to_string(), bc.to_string()]
        });
        out.csv(&format!("trace_{bc}.csv"), &csv_table(&["energy", "estimate", "std_error", "window_volume", "bc"], rows))?;
        result.push(json!({ "bc": bc, "window": window, "estimates": est }));
    }
    tally.counted(ctx.ensemble.samples, 0);
    out.json("trace.json", Value::from(result))?;
    tally.summary.push(format!("trace estimator over a window of side {}", window.side as f64 * ctx.grid.spacing()));
    Ok(())
}

fn wegner_eval_run(ctx: &Context, out: &mut Outputs, tally: &mut Tally) -> Result<(), CliError> {
    let cov = ctx.covariance()?;
    let w = &ctx.config.wegner;
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    for &e in &ctx.config.energies {
        let eval = match w.t {
            Some(t) => wegner_constant(&cov, e, t),
            None => wegner_at_closed_form(&cov, e),
        }
        .map_err(wegner_err)?;
        let env = t_envelope(&cov, e, w.envelope_points, (w.envelope_t_min, w.envelope_t_max)).map_err(wegner_err)?;
        rows.push(vec![
            e.to_string(),
            eval.t.to_string(),
            eval.ell_e.to_string(),
            eval.b_e.to_string(),
            eval.c_e.to_string(),
            eval.ln_w.to_string(),
            eval.w.to_string(),
            env.grid_min_t.to_string(),
            env.grid_min_ln_w.to_string(),
            env.ratio.to_string(),
        ]);
        json_rows.push(json!({ "eval": eval, "envelope": env }));
        tally.summary.push(format!("E = {e}: W = {} (ln W = {}), closed-form/grid-min = {}", eval.w, eval.ln_w, env.ratio));
    }
    out.csv(
        "wegner.csv",
        &csv_table(&["energy", "t", "ellE", "bE", "CE", "ln_w", "w", "envelope_min_t", "envelope_min_ln_w", "envelope_ratio"], rows),
    )?;
    out.json("wegner.json", Value::from(json_rows))?;
    Ok(())
}

fn wegner_verify_run(ctx: &Context, out: &mut Outputs, tally: &mut Tally) -> Result<(), CliError> {
    let cov = ctx.covariance()?;
    let triples = ctx.config.wegner_triples();
    let rep = verify_wegner(&ctx.kernel, &cov, &ctx.grid, ctx.config.grid.bc.primary(), &triples, &ctx.ensemble, ctx.config.wegner.t)
        .map_err(ids_err)?;
    tally.counted(rep.samples, rep.failed_samples);
    for r in &rep.records {
        if r.is_violation() {
            tally.failures.push(format!(
                "Wegner bound violated on [{}, {}] at E = {}: {} ± {} > {}",
                r.e1, r.e2, r.e, r.lhs, r.lhs_err, r.rhs
            ));
        }
    }
    let min_margin = rep.records.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    tally.summary.push(format!("{} triple(s), {} samples, smallest margin {min_margin}", rep.records.len(), rep.samples));
    let rows = rep.records.iter().map(|r| {
        [r.e1, r.e2, r.e, r.lhs, r.lhs_err, r.rhs, r.t, r.ell_e, r.b_e, r.c_e, r.margin]
            .iter()
            .map(f64::to_string)
            .chain([r.pass.to_string()])
            .collect()
    });
    out.csv(
        "wegner_verify.csv",
        &csv_table(&["E1", "E2", "E", "lhs", "lhs_err", "rhs", "t", "ellE", "bE", "CE", "margin", "pass"], rows),
    )?;
    out.json("wegner_verify.json", serde_json::to_value(&rep).expect("serializable"))?;
    Ok(())
}

fn asymptotics_run(ctx: &Context, out: &mut Outputs, tally: &mut Tally) -> Result<(), CliError> {
    let cov = ctx.covariance()?;
    let a = &ctx.config.asymptotics;
    let rep = wegner_asymptotics(&cov, a.low_energy, a.high_energy, a.points_per_decade).map_err(wegner_err)?;
    let low_dev = (rep.low_ratio - rep.low_target).abs();
    let high_dev = ((rep.high_ratio - rep.high_target) / rep.high_target).abs();
    let low_pass = low_dev <= a.tolerance;
    let high_pass = high_dev <= a.tolerance;
    if !low_pass {
        tally.failures.push(format!("ln W/E² at E = {}: {} vs {} (|diff| {low_dev})", rep.low_energy, rep.low_ratio, rep.low_target));
    }
    if !high_pass {
        tally.failures.push(format!("W/E^(d/2) at E = {}: {} vs {} (rel {high_dev})", rep.high_energy, rep.high_ratio, rep.high_target));
    }
    tally.summary.push(format!("low: ln W/E² = {} (target {}); high: W/E^(d/2) = {} (target {})", rep.low_ratio, rep.low_target, rep.high_ratio, rep.high_target));
    let rows = rep.sweep.iter().map(|e| [e.energy, e.t, e.ell_e, e.b_e, e.c_e, e.ln_w, e.w].iter().map(f64::to_string).collect());
    out.csv("asymptotics.csv", &csv_table(&["energy", "t", "ellE", "bE", "CE", "ln_w", "w"], rows))?;
    out.json(
        "asymptotics.json",
        json!({
            "report": rep,
            "low_deviation": low_dev,
            "low_pass": low_pass,
            "high_relative_deviation": high_dev,
            "high_pass": high_pass,
            "tolerance": a.tolerance,
        }),
    )?;
    Ok(())
}

fn localize_run(ctx: &Context, out: &mut Outputs, tally: &mut Tally) -> Result<(), CliError> {
    let bc = ctx.config.grid.bc.primary();
    let l = &ctx.config.localize;
    let (low, mid) = match (l.low_window, l.mid_window) {
        (Some([a, b]), Some([c, d])) => ((a, b), (c, d)),
        _ => decile_windows(&ctx.kernel, &ctx.grid, bc, &ctx.ensemble).map_err(probe_err)?,
    };
    let rep = localization_report(&ctx.kernel, &ctx.grid, bc, low, mid, &ctx.ensemble).map_err(probe_err)?;
    tally.counted(rep.samples, rep.failed_samples);
    let ratio = match (rep.low.mean_ipr, rep.mid.mean_ipr) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    };
    if let Some(min) = l.min_ipr_ratio {
        match ratio {
            Some(r) if r > min => {}
            Some(r) => tally.failures.push(format!("IPR ratio low/mid = {r} does not exceed {min}")),
            None => tally.failures.push("IPR ratio unavailable: an energy window holds no eigenpairs".into()),
        }
    }
    tally.summary.push(format!(
        "low window {low:?}: {} eigenpairs, mean IPR {:?}; mid window {mid:?}: {} eigenpairs, mean IPR {:?}; ratio {ratio:?}",
        rep.low.eigenpairs, rep.low.mean_ipr, rep.mid.eigenpairs, rep.mid.mean_ipr
    ));
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let rows = [("low", &rep.low), ("mid", &rep.mid)].into_iter().map(|(name, w)| {
        vec![
            name.to_string(),
            w.energy_window.0.to_string(),
            w.energy_window.1.to_string(),
            w.eigenpairs.to_string(),
            opt(w.mean_ipr),
            opt(w.ipr_std_error),
            opt(w.mean_decay_length),
            opt(w.mean_fit_residual),
            w.exponential_fits.to_string(),
        ]
    });
    out.csv(
        "localization.csv",
        &csv_table(
            &["window", "lo", "hi", "eigenpairs", "mean_ipr", "ipr_std_error", "mean_decay_length", "mean_fit_residual", "exponential_fits"],
            rows,
        ),
    )?;
    out.csv("localization_eigenpairs.csv", &rep.records_csv())?;
    out.json("localization.json", json!({ "report": rep, "ipr_ratio": ratio }))?;
    Ok(())
}
