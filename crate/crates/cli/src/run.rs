//! Command bodies. Each produces its output files in memory so the store can
//! write them atomically or compare them against an existing run.

use std::sync::Mutex;

use arratia_core::analysis::martingale::{martingale_test, MartingaleSpec};
use arratia_core::analysis::qv::{predicted_cell_qv, predicted_smooth_mean_qv};
use arratia_core::analysis::stats::{batch_means, realized_qv, replicate};
use arratia_core::analysis::{
    compare_same_sheet, ito_residual, mass_scan_from_moments, path_mass_moments, CompareSpec, MassWeight, Report,
    TestResult,
};
use arratia_core::representation::{reconstruct_refined, sheet_battery, shared_column_control};
use arratia_core::rng::{derive_seed, replica_seed};
use arratia_core::{coalescing, smooth, CylinderFunctional, FlowPath, QuantileState, SheetGrid, SmoothConfig};

use crate::config::{FlowKind, Functional, RunConfig};

/// Named output files plus the gated report.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    pub report: Report,
}

impl Outcome {
    fn new(report: Report) -> Self {
        Outcome { files: Vec::new(), report }
    }

    fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    /// Appends `report.json` as the last file.
    fn finish(mut self) -> Self {
        let json = self.report.to_json().into_bytes();
        self.add("report.json", json);
        self
    }
}

type Result<T> = arratia_core::Result<T>;

fn seeds(cfg: &RunConfig) -> Vec<u64> {
    (0..cfg.replicas).map(|r| replica_seed(cfg.seed, r)).collect()
}

fn initial(cfg: &RunConfig) -> Result<QuantileState> {
    cfg.initial.discretize(cfg.grid.m_space)
}

fn smooth_config(cfg: &RunConfig) -> Result<SmoothConfig> {
    let s = cfg.smooth.as_ref().expect("smooth section resolved");
    Ok(SmoothConfig::new(cfg.mollifier().unwrap(), s.epsilon, cfg.grid_spec(), initial(cfg)?)?.with_repair(s.repair))
}

/// One path of the configured flow on the sheet for `seed`.
fn run_flow(cfg: &RunConfig, smooth_cfg: Option<&SmoothConfig>, seed: u64) -> Result<(FlowPath, usize)> {
    let sheet = SheetGrid::generate(cfg.grid_spec(), seed)?;
    match smooth_cfg {
        Some(sc) => {
            let run = smooth::simulate(sc, &sheet)?;
            let v = run.total_violations();
            Ok((run.path, v))
        }
        None => Ok((coalescing::simulate(&initial(cfg)?, &sheet, cfg.step_mode())?, 0)),
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

pub fn simulate(cfg: &RunConfig) -> Result<Outcome> {
    let smooth_cfg = match cfg.flow_kind() {
        FlowKind::Smooth => Some(smooth_config(cfg)?),
        FlowKind::Coalescing => None,
    };
    let (path, violations) = run_flow(cfg, smooth_cfg.as_ref(), replica_seed(cfg.seed, 0))?;
    let mut report = Report::new();
    let finite = path.states.iter().all(|s| s.values().iter().all(|v| v.is_finite()));
    report.push(TestResult::below("simulate/non-finite-values", if finite { 0.0 } else { 1.0 }, 0.5, 1));
    match cfg.flow_kind() {
        FlowKind::Coalescing => {
            let bad = path.check_coalescing_invariants().is_err();
            report.push(TestResult::below("simulate/invariant-violations", if bad { 1.0 } else { 0.0 }, 0.5, 1));
        }
        FlowKind::Smooth => {
            // recorded, not gated: the discrete scheme may cross cells
            let total = (path.m_space().saturating_sub(1) * path.steps()).max(1);
            report.push(TestResult::below("simulate/order-violation-rate", violations as f64 / total as f64, 1.0, 1));
        }
    }
    let mut out = Outcome::new(report);
    out.add("path.csv", csv_bytes(|b| path.write_csv(b))?);
    if cfg.flow_kind() == FlowKind::Coalescing {
        out.add("merges.csv", csv_bytes(|b| path.write_merge_csv(b))?);
    }
    out.add("initial.csv", csv_bytes(|b| path.initial().write_csv(b))?);
    Ok(out.finish())
}

struct VerifySample {
    invariants_ok: bool,
    qv: Vec<f64>,
    predicted: Vec<f64>,
    mean_path: Vec<f64>,
    mid_path: Vec<f64>,
}

pub fn verify(cfg: &RunConfig) -> Result<Outcome> {
    let tol = cfg.verify.as_ref().expect("verify section resolved").qv_tolerance;
    let smooth_cfg = match cfg.flow_kind() {
        FlowKind::Smooth => Some(smooth_config(cfg)?),
        FlowKind::Coalescing => None,
    };
    let m = cfg.grid.m_space;
    let mid = m / 2;
    let samples = replicate(&seeds(cfg), |seed| {
        let (path, _) = run_flow(cfg, smooth_cfg.as_ref(), seed)?;
        let mean_path = path.mean_path();
        Ok(match &smooth_cfg {
            None => VerifySample {
                invariants_ok: path.check_coalescing_invariants().is_ok(),
                qv: (0..m).map(|i| realized_qv(&path.cell_path(i))).collect(),
                predicted: (0..m).map(|i| predicted_cell_qv(&path, i)).collect(),
                mid_path: path.cell_path(mid),
                mean_path,
            },
            Some(sc) => VerifySample {
                invariants_ok: true,
                qv: vec![realized_qv(&mean_path)],
                predicted: vec![predicted_smooth_mean_qv(&path, sc)?],
                mid_path: path.cell_path(mid),
                mean_path,
            },
        })
    })?;
    let n = samples.len();
    let mut report = Report::new();
    let spec = MartingaleSpec::standard(cfg.grid.k_time);
    let column = |f: &dyn Fn(&VerifySample) -> f64| samples.iter().map(f).collect::<Vec<f64>>();
    match cfg.flow_kind() {
        FlowKind::Coalescing => {
            let bad = samples.iter().filter(|s| !s.invariants_ok).count();
            report.push(TestResult::below("verify/invariant-violations", bad as f64, 0.5, n));
            for i in 0..m {
                let realized = batch_means(&column(&|s| s.qv[i])).mean;
                let predicted = batch_means(&column(&|s| s.predicted[i])).mean;
                report.push(TestResult::relative(format!("verify/qv/cell-{i}"), realized, predicted, tol, n));
            }
        }
        FlowKind::Smooth => {
            let realized = batch_means(&column(&|s| s.qv[0])).mean;
            let predicted = batch_means(&column(&|s| s.predicted[0])).mean;
            report.push(TestResult::relative("verify/qv/mean", realized, predicted, tol, n));
        }
    }
    let means: Vec<Vec<f64>> = samples.iter().map(|s| s.mean_path.clone()).collect();
    report.extend(martingale_test("verify/martingale/mean", &means, &spec)?);
    let mids: Vec<Vec<f64>> = samples.iter().map(|s| s.mid_path.clone()).collect();
    report.extend(martingale_test(&format!("verify/martingale/cell-{mid}"), &mids, &spec)?);
    Ok(Outcome::new(report).finish())
}

pub fn compare(cfg: &RunConfig) -> Result<Outcome> {
    let g = initial(cfg)?;
    let repair = cfg.smooth.as_ref().map(|s| s.repair).unwrap_or_default();
    let spec = CompareSpec { grid: cfg.grid_spec(), initial: g.clone(), kernels: cfg.kernels(), repair, step_mode: cfg.step_mode() };
    let seeds = seeds(cfg);
    let study = compare_same_sheet(&spec, &seeds)?;
    let mut out = Outcome::new(study.report.clone());
    let sheet = SheetGrid::generate(spec.grid, seeds[0])?;
    let coal = coalescing::simulate(&g, &sheet, spec.step_mode)?;
    out.add("coalescing.csv", csv_bytes(|b| coal.write_csv(b))?);
    for k in &spec.kernels {
        let sc = SmoothConfig::new(arratia_core::MollifierParams::new(k.sigma)?, k.epsilon, spec.grid, g.clone())?
            .with_repair(repair);
        let run = smooth::simulate(&sc, &sheet)?;
        out.add(format!("smooth-sigma{}-eps{}.csv", k.sigma, k.epsilon), csv_bytes(|b| run.path.write_csv(b))?);
    }
    let mut json = serde_json::to_string_pretty(&study)?;
    json.push('\n');
    out.add("compare.json", json.into_bytes());
    Ok(out.finish())
}

pub fn ito(cfg: &RunConfig) -> Result<Outcome> {
    let section = cfg.ito.as_ref().expect("ito section resolved");
    let functional = match section.functional {
        Functional::Mean => CylinderFunctional::mean(),
        Functional::Sin => CylinderFunctional::sin_moment(),
    };
    let g = initial(cfg)?;
    let spec = cfg.grid_spec();
    let residuals = replicate(&seeds(cfg), |seed| {
        let sheet = SheetGrid::generate(spec, seed)?;
        let path = coalescing::simulate(&g, &sheet, cfg.step_mode())?;
        ito_residual(&path, &functional)
    })?;
    let n = residuals.len();
    let name = match section.functional {
        Functional::Mean => "mean",
        Functional::Sin => "sin",
    };
    let paths: Vec<Vec<f64>> = residuals.iter().map(|r| r.residual.clone()).collect();
    let mut report = martingale_test(&format!("ito/{name}/martingale"), &paths, &MartingaleSpec::standard(spec.k_time))?;
    let last = spec.k_time;
    let realized = batch_means(&residuals.iter().map(|r| r.realized_qv[last]).collect::<Vec<_>>()).mean;
    let predicted = batch_means(&residuals.iter().map(|r| r.predicted_qv[last]).collect::<Vec<_>>()).mean;
    report.push(TestResult::relative(format!("ito/{name}/qv"), realized, predicted, section.qv_tolerance, n));

    let avg = |f: &dyn Fn(&arratia_core::analysis::ItoResidual) -> f64| residuals.iter().map(f).sum::<f64>() / n as f64;
    let mut text = String::from("t,mean_residual,mean_realized_qv,mean_predicted_qv\n");
    for k in 0..=last {
        text.push_str(&format!(
            "{},{},{},{}\n",
            residuals[0].times[k],
            avg(&|r| r.residual[k]),
            avg(&|r| r.realized_qv[k]),
            avg(&|r| r.predicted_qv[k])
        ));
    }
    let mut out = Outcome::new(report);
    out.add("residual.csv", text.into_bytes());
    Ok(out.finish())
}

pub fn sheet_check(cfg: &RunConfig) -> Result<Outcome> {
    let section = cfg.sheet.as_ref().expect("sheet section resolved");
    let spec = cfg.grid_spec();
    let seeds = seeds(cfg);
    let mut report = sheet_battery("sheet/native", &seeds, |s| SheetGrid::generate(spec, s))?;
    if section.negative_control {
        let control = sheet_battery("sheet/control", &seeds, |s| shared_column_control(spec, s))?;
        let missed = control.failures().count() == 0;
        report.push(TestResult::below("sheet/control-detected", if missed { 1.0 } else { 0.0 }, 0.5, seeds.len()));
    }
    if section.reconstruct {
        let g = initial(cfg)?;
        let refine = section.refine;
        let worst = Mutex::new(0.0f64);
        report.extend(sheet_battery("sheet/reconstructed", &seeds, |s| {
            let r = reconstruct_refined(&g, spec, refine, s)?;
            let mut w = worst.lock().unwrap();
            *w = w.max(r.fine_residual);
            Ok(r.sheet)
        })?);
        let worst = worst.into_inner().unwrap();
        let fine_dt = spec.dt() / refine as f64;
        report.push(TestResult::below("sheet/reconstructed/fine-residual", worst, 5.0 * fine_dt.sqrt(), seeds.len()));
    }
    let mut out = Outcome::new(report);
    if section.dump_binary {
        let sheet = SheetGrid::generate(spec, derive_seed(cfg.seed, &[0x4455_4d50]))?;
        out.add("sheet.bin", csv_bytes(|b| sheet.write_binary(b))?);
    }
    Ok(out.finish())
}

pub fn mass_stats(cfg: &RunConfig) -> Result<Outcome> {
    let section = cfg.mass.as_ref().expect("mass section resolved");
    let (smooth_cfg, weight) = match cfg.flow_kind() {
        FlowKind::Smooth => {
            let sc = smooth_config(cfg)?;
            let eps = sc.epsilon;
            (Some(sc), MassWeight::Regularized { epsilon: eps })
        }
        FlowKind::Coalescing => (None, MassWeight::Block),
    };
    let per = replicate(&seeds(cfg), |seed| {
        let (path, _) = run_flow(cfg, smooth_cfg.as_ref(), seed)?;
        path_mass_moments(&path, weight, section.beta, &section.times)
    })?;
    let scan = mass_scan_from_moments(&per, section.beta, &section.times)?;
    let n = scan.n_samples;
    let mut report = Report::new();
    report.push(TestResult::below("mass/non-finite", if scan.all_finite() { 0.0 } else { 1.0 }, 0.5, n));
    report.push(TestResult::below("mass/non-monotone", if scan.is_monotone() { 0.0 } else { 1.0 }, 0.5, n));
    let [lo, hi] = section.exponent_window;
    let centre = 0.5 * (lo + hi);
    report.push(TestResult::below("mass/exponent-off-window", (scan.exponent - centre).abs(), 0.5 * (hi - lo), n));
    let mut json = serde_json::to_string_pretty(&scan)?;
    json.push('\n');
    let mut out = Outcome::new(report);
    out.add("mass.json", json.into_bytes());
    Ok(out.finish())
}
