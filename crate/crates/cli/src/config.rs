//! Run configuration: TOML with one table per namespace, resolved into a
//! fully-defaulted form that is written back as the run manifest.

use std::fmt;
use std::path::PathBuf;

use arratia_core::analysis::KernelChoice;
use arratia_core::{GridSpec, InitialCondition, MollifierParams, MonotoneRepair, PlateauRule, Profile, StepMode};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Compare,
    Verify,
    Ito,
    SheetCheck,
    MassStats,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Compare => "compare",
            Command::Verify => "verify",
            Command::Ito => "ito",
            Command::SheetCheck => "sheet-check",
            Command::MassStats => "mass-stats",
        }
    }

    fn default_replicas(self) -> usize {
        match self {
            Command::Simulate => 1,
            Command::Compare | Command::Verify | Command::MassStats => 200,
            Command::Ito => 1000,
            Command::SheetCheck => 10_000,
        }
    }
}

/// A configuration problem, located at a line of the source when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FlowKind {
    #[default]
    Coalescing,
    Smooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    #[default]
    Fixed,
    EventRefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Functional {
    #[default]
    Mean,
    Sin,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    m_space: Option<usize>,
    k_time: Option<usize>,
    horizon: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawFlow {
    kind: Option<FlowKind>,
    step_mode: Option<StepKind>,
    max_depth: Option<u32>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSmooth {
    sigma: Option<f64>,
    epsilon: Option<f64>,
    eta: Option<f64>,
    profile: Option<Profile>,
    plateau: Option<PlateauRule>,
    repair: Option<MonotoneRepair>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawCompare {
    sigmas: Option<Vec<f64>>,
    epsilons: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawVerify {
    qv_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawIto {
    functional: Option<Functional>,
    qv_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawMass {
    beta: Option<f64>,
    times: Option<Vec<f64>>,
    exponent_window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSheet {
    reconstruct: Option<bool>,
    refine: Option<usize>,
    negative_control: Option<bool>,
    dump_binary: Option<bool>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<String>,
    seed: Option<u64>,
    replicas: Option<usize>,
    output_dir: Option<PathBuf>,
    grid: Option<RawGrid>,
    initial: Option<InitialCondition>,
    flow: Option<RawFlow>,
    smooth: Option<RawSmooth>,
    compare: Option<RawCompare>,
    verify: Option<RawVerify>,
    ito: Option<RawIto>,
    mass: Option<RawMass>,
    sheet: Option<RawSheet>,
    /// Present in manifests; ignored on input.
    #[allow(dead_code)]
    manifest: Option<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSection {
    pub m_space: usize,
    pub k_time: usize,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSection {
    pub kind: FlowKind,
    pub step_mode: StepKind,
    pub max_depth: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothSection {
    pub sigma: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub profile: Profile,
    pub plateau: PlateauRule,
    pub repair: MonotoneRepair,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSection {
    pub sigmas: Vec<f64>,
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifySection {
    pub qv_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItoSection {
    pub functional: Functional,
    pub qv_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassSection {
    pub beta: f64,
    pub times: Vec<f64>,
    pub exponent_window: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SheetSection {
    pub reconstruct: bool,
    pub refine: usize,
    pub negative_control: bool,
    pub dump_binary: bool,
}

/// Fully resolved configuration; only the sections the command uses are set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: String,
    pub seed: u64,
    pub replicas: usize,
    pub grid: GridSection,
    pub initial: InitialCondition,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smooth: Option<SmoothSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ito: Option<ItoSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<MassSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sheet: Option<SheetSection>,
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn grid_spec(&self) -> GridSpec {
        GridSpec { m_space: self.grid.m_space, k_time: self.grid.k_time, horizon: self.grid.horizon }
    }

    pub fn step_mode(&self) -> StepMode {
        match self.flow.as_ref().map(|f| (f.step_mode, f.max_depth)) {
            Some((StepKind::EventRefined, d)) => StepMode::EventRefined { max_depth: d },
            _ => StepMode::Fixed,
        }
    }

    pub fn flow_kind(&self) -> FlowKind {
        self.flow.as_ref().map(|f| f.kind).unwrap_or_default()
    }

    pub fn mollifier(&self) -> Option<MollifierParams> {
        self.smooth.as_ref().map(|s| MollifierParams { sigma: s.sigma, eta: s.eta, profile: s.profile, plateau: s.plateau })
    }

    pub fn kernels(&self) -> Vec<KernelChoice> {
        let Some(c) = &self.compare else { return Vec::new() };
        c.sigmas
            .iter()
            .flat_map(|&sigma| c.epsilons.iter().map(move |&epsilon| KernelChoice { sigma, epsilon }))
            .collect()
    }

    /// Canonical TOML of the resolved configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("resolved config serializes")
    }
}

/// Line of `key` inside `[table]` (or at top level when `table` is empty).
pub fn locate(src: &str, table: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut table_line = None;
    for (n, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            if current == table {
                table_line = Some(n + 1);
            }
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else { continue };
        let lhs = lhs.trim();
        let dotted = format!("{table}.{key}");
        if (current == table && lhs == key) || (current.is_empty() && !table.is_empty() && lhs == dotted) {
            return Some(n + 1);
        }
    }
    if key.is_empty() {
        table_line
    } else {
        table_line.or(None)
    }
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, col)
}

struct Ctx<'a> {
    src: &'a str,
}

impl Ctx<'_> {
    fn err(&self, table: &str, key: &str, message: impl Into<String>) -> ConfigError {
        let line = locate(self.src, table, key).or_else(|| locate(self.src, table, ""));
        ConfigError { line, column: None, message: message.into() }
    }

    fn positive(&self, table: &str, key: &str, v: f64) -> Result<f64, ConfigError> {
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(self.err(table, key, format!("{table}.{key} must be positive, got {v}")))
        }
    }
}

/// Parses and resolves `src` for `cmd`; `seed_override` replaces `seed`.
pub fn parse(src: &str, cmd: Command, seed_override: Option<u64>) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(src).map_err(|e| {
        let (line, column) = match e.span() {
            Some(span) => {
                let (l, c) = line_col(src, span.start);
                (Some(l), Some(c))
            }
            None => (None, None),
        };
        ConfigError { line, column, message: e.message().trim().to_string() }
    })?;
    let cx = Ctx { src };
    if let Some(mode) = &raw.mode {
        if mode != cmd.name() {
            return Err(cx.err("", "mode", format!("configuration is for `{mode}`, not `{}`", cmd.name())));
        }
    }

    let seed = seed_override
        .or(raw.seed)
        .ok_or_else(|| cx.err("", "seed", "missing `seed` (set it in the config or pass --seed)"))?;
    let replicas = raw.replicas.unwrap_or(cmd.default_replicas());
    if replicas == 0 {
        return Err(cx.err("", "replicas", "replicas must be at least 1"));
    }

    let g = raw.grid.ok_or_else(|| cx.err("", "", "missing [grid] table"))?;
    let grid = GridSection {
        m_space: g.m_space.ok_or_else(|| cx.err("grid", "", "missing grid.m_space"))?,
        k_time: g.k_time.ok_or_else(|| cx.err("grid", "", "missing grid.k_time"))?,
        horizon: g.horizon.ok_or_else(|| cx.err("grid", "", "missing grid.horizon"))?,
    };
    if grid.m_space == 0 {
        return Err(cx.err("grid", "m_space", "grid.m_space must be at least 1"));
    }
    if grid.k_time == 0 {
        return Err(cx.err("grid", "k_time", "grid.k_time must be at least 1"));
    }
    cx.positive("grid", "horizon", grid.horizon)?;

    let initial = raw.initial.unwrap_or_default();
    initial
        .discretize(grid.m_space)
        .map_err(|e| cx.err("initial", "", format!("invalid initial condition: {e}")))?;

    let uses_flow = matches!(cmd, Command::Simulate | Command::Verify | Command::MassStats | Command::Compare | Command::Ito);
    let flow = if uses_flow {
        let f = raw.flow.clone().unwrap_or_default();
        let kind = if matches!(cmd, Command::Compare | Command::Ito) { FlowKind::Coalescing } else { f.kind.unwrap_or_default() };
        if cmd == Command::Ito && f.kind == Some(FlowKind::Smooth) {
            return Err(cx.err("flow", "kind", "the ito study runs on the coalescing flow only"));
        }
        Some(FlowSection { kind, step_mode: f.step_mode.unwrap_or_default(), max_depth: f.max_depth.unwrap_or(12) })
    } else {
        None
    };

    let needs_smooth = flow.as_ref().is_some_and(|f| f.kind == FlowKind::Smooth);
    let smooth = if needs_smooth {
        let s = raw.smooth.clone().unwrap_or_default();
        let sigma = s.sigma.ok_or_else(|| cx.err("flow", "kind", "smooth flow requires smooth.sigma"))?;
        let epsilon = s.epsilon.ok_or_else(|| cx.err("flow", "kind", "smooth flow requires smooth.epsilon"))?;
        cx.positive("smooth", "sigma", sigma)?;
        cx.positive("smooth", "epsilon", epsilon)?;
        let eta = s.eta.unwrap_or(sigma / 4.0);
        MollifierParams::with_eta(sigma, eta).map_err(|e| cx.err("smooth", if s.eta.is_some() { "eta" } else { "sigma" }, e.to_string()))?;
        Some(SmoothSection {
            sigma,
            epsilon,
            eta,
            profile: s.profile.unwrap_or_default(),
            plateau: s.plateau.unwrap_or_default(),
            repair: s.repair.unwrap_or_default(),
        })
    } else {
        None
    };

    let compare = if cmd == Command::Compare {
        let c = raw.compare.clone().unwrap_or_default();
        let sigmas = c.sigmas.ok_or_else(|| cx.err("compare", "", "compare requires compare.sigmas"))?;
        let epsilons = c.epsilons.ok_or_else(|| cx.err("compare", "", "compare requires compare.epsilons"))?;
        if sigmas.is_empty() || epsilons.is_empty() {
            return Err(cx.err("compare", "sigmas", "compare.sigmas and compare.epsilons must be non-empty"));
        }
        for &s in &sigmas {
            cx.positive("compare", "sigmas", s)?;
        }
        for &e in &epsilons {
            cx.positive("compare", "epsilons", e)?;
        }
        Some(CompareSection { sigmas, epsilons })
    } else {
        None
    };

    let verify = (cmd == Command::Verify).then(|| VerifySection {
        qv_tolerance: raw.verify.as_ref().and_then(|v| v.qv_tolerance).unwrap_or(0.05),
    });

    let ito = (cmd == Command::Ito).then(|| {
        let i = raw.ito.clone().unwrap_or_default();
        ItoSection { functional: i.functional.unwrap_or_default(), qv_tolerance: i.qv_tolerance.unwrap_or(0.1) }
    });

    let mass = if cmd == Command::MassStats {
        let m = raw.mass.clone().unwrap_or_default();
        let beta = m.beta.unwrap_or(1.0);
        cx.positive("mass", "beta", beta)?;
        let times = m.times.unwrap_or_else(|| vec![0.05, 0.1, 0.2, 0.4]);
        let dt = grid.horizon / grid.k_time as f64;
        for &t in &times {
            let k = (t / dt).round();
            if !(t > 0.0) || (k * dt - t).abs() > 1e-9 * t.max(1.0) || k as usize > grid.k_time {
                return Err(cx.err("mass", "times", format!("time {t} is not a positive grid time (dt = {dt})")));
            }
        }
        Some(MassSection { beta, times, exponent_window: m.exponent_window.unwrap_or([0.3, 0.7]) })
    } else {
        None
    };

    let sheet = if cmd == Command::SheetCheck {
        let s = raw.sheet.clone().unwrap_or_default();
        let refine = s.refine.unwrap_or(256);
        if refine == 0 {
            return Err(cx.err("sheet", "refine", "sheet.refine must be at least 1"));
        }
        Some(SheetSection {
            reconstruct: s.reconstruct.unwrap_or(false),
            refine,
            negative_control: s.negative_control.unwrap_or(true),
            dump_binary: s.dump_binary.unwrap_or(false),
        })
    } else {
        None
    };

    if matches!(cmd, Command::Verify | Command::Ito) && replicas < arratia_core::analysis::martingale::MIN_REPLICAS {
        return Err(cx.err(
            "",
            "replicas",
            format!("{} needs at least {} replicas", cmd.name(), arratia_core::analysis::martingale::MIN_REPLICAS),
        ));
    }

    Ok(RunConfig {
        mode: cmd.name().to_string(),
        seed,
        replicas,
        grid,
        initial,
        flow,
        smooth,
        compare,
        verify,
        ito,
        mass,
        sheet,
        output_dir: raw.output_dir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "seed = 42\n\n[grid]\nm_space = 5\nk_time = 200\nhorizon = 0.2\n";

    #[test]
    fn minimal_coalescing() {
        let c = parse(MINIMAL, Command::Simulate, None).unwrap();
        assert_eq!(c.seed, 42);
        assert_eq!(c.flow_kind(), FlowKind::Coalescing);
        assert_eq!(c.initial, InitialCondition::default());
        assert!(c.smooth.is_none());
        assert_eq!(parse(MINIMAL, Command::Simulate, Some(7)).unwrap().seed, 7);
    }

    #[test]
    fn unknown_key_reports_line() {
        let src = format!("{MINIMAL}bogus = 1\n");
        let e = parse(&src, Command::Simulate, None).unwrap_err();
        assert_eq!(e.line, Some(7), "{e}");
        assert!(e.message.contains("bogus"), "{e}");
    }

    #[test]
    fn syntax_error_reports_line() {
        let e = parse("seed = 1\n[grid\n", Command::Simulate, None).unwrap_err();
        assert_eq!(e.line, Some(2), "{e}");
    }

    #[test]
    fn smooth_requires_sigma_and_epsilon() {
        let src = format!("{MINIMAL}\n[flow]\nkind = \"smooth\"\n\n[smooth]\nsigma = 0.1\n");
        let e = parse(&src, Command::Simulate, None).unwrap_err();
        assert!(e.message.contains("epsilon"));
        assert_eq!(e.line, Some(9));
        let ok = format!("{src}epsilon = 0.01\n");
        let c = parse(&ok, Command::Simulate, None).unwrap();
        assert_eq!(c.smooth.unwrap().eta, 0.025);
    }

    #[test]
    fn semantic_error_points_at_key() {
        let src = "seed = 1\n[grid]\nm_space = 5\nk_time = 10\nhorizon = -1.0\n";
        let e = parse(src, Command::Simulate, None).unwrap_err();
        assert_eq!(e.line, Some(5));
        let bad_eta = format!("{MINIMAL}[flow]\nkind = \"smooth\"\n[smooth]\nsigma = 0.3\nepsilon = 0.1\neta = 0.2\n");
        assert_eq!(parse(&bad_eta, Command::Simulate, None).unwrap_err().line, Some(12));
    }

    #[test]
    fn missing_seed() {
        let e = parse("[grid]\nm_space = 5\nk_time = 10\nhorizon = 1.0\n", Command::Simulate, None).unwrap_err();
        assert!(e.message.contains("seed"));
    }

    #[test]
    fn manifest_round_trip() {
        let src = format!("{MINIMAL}[flow]\nkind = \"smooth\"\n[smooth]\nsigma = 0.1\nepsilon = 0.01\n");
        let c = parse(&src, Command::Verify, None).unwrap();
        let text = format!("{}\n[manifest]\ntool_version = \"x\"\n", c.to_toml());
        let again = parse(&text, Command::Verify, None).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.to_toml(), again.to_toml());
    }

    #[test]
    fn mass_times_must_be_on_grid() {
        let src = "seed = 1\n[grid]\nm_space = 8\nk_time = 20\nhorizon = 0.4\n[mass]\ntimes = [0.05, 0.1]\n";
        assert_eq!(parse(src, Command::MassStats, None).unwrap_err().line, Some(7));
        let src = "seed = 1\n[grid]\nm_space = 8\nk_time = 40\nhorizon = 0.4\n[mass]\ntimes = [0.1, 0.2]\n";
        assert!(parse(src, Command::MassStats, None).is_ok());
        let other = format!("mode = \"verify\"\n{}", src);
        assert!(parse(&other, Command::MassStats, None).is_err());
    }

    #[test]
    fn compare_kernels_are_a_product() {
        let src = format!("{MINIMAL}[compare]\nsigmas = [0.2, 0.1]\nepsilons = [0.1, 0.01]\n");
        let c = parse(&src, Command::Compare, None).unwrap();
        assert_eq!(c.kernels().len(), 4);
    }
}
