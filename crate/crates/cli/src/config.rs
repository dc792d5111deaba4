//! Experiment description files (JSON).
//!
//! A document has four blocks: `model`, `noise`, `run` and `output`. Only
//! `model` and `run` are required; `run.root_seed` is mandatory.

use std::fmt;

use qthreshold_core::models::{build_piecewise, build_tfim_anneal, per_qubit_noise, AnnealingProblem};
use qthreshold_core::models::{PiecewiseProgram, Segment};
use qthreshold_core::state::basis_state;
use qthreshold_core::{
    CoefficientSchedule, HamiltonianSchedule, NoiseChannel, NoiseSpec, Pauli, PauliString, Scheme,
    StateVector, TrajectoryConfig,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Largest register the CLI accepts (state vectors of `2^20` amplitudes).
pub const MAX_QUBITS: usize = 20;
/// Default step as a fraction of the total time.
pub const DEFAULT_DT_FRACTION: f64 = 1e-3;
pub const DEFAULT_ORACLE_TOLERANCE: f64 = 1e-8;
/// Relative tolerance when matching a stated total time to segment durations.
const TIME_MATCH_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedState {
    /// `|+⟩^{⊗n}`.
    Plus,
    /// `|0…0⟩`.
    Zero,
}

/// `"plus"`, `"zero"` or a computational basis index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Basis(usize),
    Named(NamedState),
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Named(NamedState::Plus)
    }
}

fn one() -> f64 {
    1.0
}

/// A Pauli string such as `"XZI"` (character `k` acts on qubit `k`) with a weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermConfig {
    pub pauli: String,
    #[serde(default = "one")]
    pub coefficient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentConfig {
    pub duration: f64,
    pub terms: Vec<TermConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case")]
pub enum ModelConfig {
    /// `Ĥ(t) = −A(t)ΣX_k + B(t)(ΣJ_ij Z_i Z_j + Σh_k Z_k)` with `A = 1 − t/T`, `B = t/T`.
    TfimAnneal {
        n_qubits: usize,
        #[serde(default)]
        couplings: Vec<(usize, usize, f64)>,
        /// One field per qubit; empty means all zero.
        #[serde(default)]
        fields: Vec<f64>,
        #[serde(default)]
        initial_state: InitialState,
    },
    /// Time-independent `Σ c_j P_j`.
    Constant {
        n_qubits: usize,
        terms: Vec<TermConfig>,
        #[serde(default)]
        initial_state: InitialState,
    },
    /// `Ĥ = 0`; only the noise acts.
    Idle {
        n_qubits: usize,
        #[serde(default)]
        initial_state: InitialState,
    },
    /// Consecutive constant segments; the total time is their summed duration.
    Piecewise {
        n_qubits: usize,
        segments: Vec<SegmentConfig>,
        #[serde(default)]
        initial_state: InitialState,
    },
    /// Alternating cost and transverse-mixer segments.
    Qaoa {
        n_qubits: usize,
        cost: Vec<TermConfig>,
        gammas: Vec<f64>,
        betas: Vec<f64>,
        #[serde(default)]
        initial_state: InitialState,
    },
}

pub const MODEL_BUILDERS: [&str; 5] = ["tfim_anneal", "constant", "idle", "piecewise", "qaoa"];
pub const NOISE_BUILDERS: [&str; 3] = ["none", "per_qubit", "channels"];

impl ModelConfig {
    pub fn n_qubits(&self) -> usize {
        match self {
            ModelConfig::TfimAnneal { n_qubits, .. }
            | ModelConfig::Constant { n_qubits, .. }
            | ModelConfig::Idle { n_qubits, .. }
            | ModelConfig::Piecewise { n_qubits, .. }
            | ModelConfig::Qaoa { n_qubits, .. } => *n_qubits,
        }
    }

    pub fn initial_state(&self) -> InitialState {
        match self {
            ModelConfig::TfimAnneal { initial_state, .. }
            | ModelConfig::Constant { initial_state, .. }
            | ModelConfig::Idle { initial_state, .. }
            | ModelConfig::Piecewise { initial_state, .. }
            | ModelConfig::Qaoa { initial_state, .. } => *initial_state,
        }
    }

    /// Duration fixed by the model itself, if any.
    fn intrinsic_time(&self) -> Option<f64> {
        match self {
            ModelConfig::Piecewise { segments, .. } => Some(segments.iter().map(|s| s.duration).sum()),
            ModelConfig::Qaoa { gammas, betas, .. } => {
                Some(gammas.iter().zip(betas).map(|(g, b)| g + b).sum())
            }
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrengthConfig {
    Constant { value: f64 },
    /// `(t, g)` knots from `t = 0` to `t = T`, linearly interpolated.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
    /// `(t, g)` knots; `g_i` holds on `[t_i, t_{i+1})`.
    PiecewiseConstant { knots: Vec<(f64, f64)> },
    /// Straight line from `start` at `t = 0` to `end` at `t = T`.
    LinearRamp { start: f64, end: f64 },
}

impl StrengthConfig {
    pub fn build(&self, total_time: f64) -> qthreshold_core::Result<CoefficientSchedule> {
        match self {
            StrengthConfig::Constant { value } => CoefficientSchedule::constant(*value, total_time),
            StrengthConfig::PiecewiseLinear { knots } => CoefficientSchedule::piecewise_linear(knots.clone()),
            StrengthConfig::PiecewiseConstant { knots } => {
                CoefficientSchedule::piecewise_constant(knots.clone())
            }
            StrengthConfig::LinearRamp { start, end } => {
                CoefficientSchedule::linear_ramp(*start, *end, total_time)
            }
        }
    }

    fn knots(&self) -> Option<&[(f64, f64)]> {
        match self {
            StrengthConfig::PiecewiseLinear { knots } | StrengthConfig::PiecewiseConstant { knots } => {
                Some(knots)
            }
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub pauli: String,
    pub strength: StrengthConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case")]
pub enum NoiseConfig {
    #[default]
    #[serde(rename = "none")]
    Off,
    /// The same letter on every qubit, all with one strength profile.
    PerQubit { letter: String, strength: StrengthConfig },
    /// Explicit Pauli-string channels.
    Channels { channels: Vec<ChannelConfig> },
}

/// `"auto"` (most probable noiseless outcome) or a basis index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Index(usize),
    Auto(AutoTarget),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoTarget {
    #[serde(rename = "auto")]
    Auto,
}

impl Default for Target {
    fn default() -> Self {
        Target::Auto(AutoTarget::Auto)
    }
}

fn default_margin() -> f64 {
    100.0
}
fn default_trials() -> u64 {
    200
}
fn default_p_star() -> f64 {
    0.95
}
fn default_repeats() -> u64 {
    100
}
fn default_r_cap() -> u64 {
    100_000
}
fn default_hoeffding_trials() -> u64 {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    /// Margin constant `c` in `r = ceil(c·max(1/δ², 1/α²))`.
    #[serde(default = "default_margin")]
    pub c: f64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_p_star")]
    pub p_star: f64,
    /// Noise exponents to test; the configured noise is rescaled to each.
    /// Absent means the configured Γ only.
    #[serde(default)]
    pub gammas: Option<Vec<f64>>,
    /// Replaces the planned `r` (contrast runs).
    #[serde(default)]
    pub r_override: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Constant strengths applied to every channel.
    #[serde(default)]
    pub g_grid: Option<Vec<f64>>,
    /// Noise exponents; converted to constant strengths `g = sqrt(2Γ/(K·T))`.
    #[serde(default)]
    pub gamma_grid: Option<Vec<f64>>,
    #[serde(default = "default_p_star")]
    pub p_star: f64,
    #[serde(default = "default_repeats")]
    pub repeats: u64,
    #[serde(default = "default_r_cap")]
    pub r_cap: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingConfig {
    pub r: u64,
    pub delta: f64,
    #[serde(default = "default_hoeffding_trials")]
    pub trials: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Required unless the model fixes its own duration.
    #[serde(default)]
    pub total_time: Option<f64>,
    /// Defaults to `1e-3·T`.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub scheme: Scheme,
    /// Euler–Maruyama only: renormalize after every step.
    #[serde(default)]
    pub renormalize: bool,
    #[serde(default)]
    pub target: Target,
    #[serde(default)]
    pub r: Option<u64>,
    pub root_seed: u64,
    /// Pauli string whose expectation is recorded per trajectory.
    #[serde(default)]
    pub observable: Option<String>,
    #[serde(default)]
    pub oracle_tolerance: Option<f64>,
    #[serde(default)]
    pub plan: Option<PlanConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub hoeffding: Option<HoeffdingConfig>,
}

fn default_dir() -> String {
    "out".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default)]
    pub dump_trajectories: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), dump_trajectories: false }
    }
}

/// One problem found in a document, located by a dotted field path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Report unknown keys as warnings instead of errors.
    pub lenient: bool,
}

/// A validated document with defaults filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct Parsed {
    pub config: ExperimentConfig,
    pub warnings: Vec<Violation>,
}

const BLOCKS: [&str; 4] = ["model", "noise", "run", "output"];

/// Parses and validates a document, reporting every violation found.
pub fn parse_config(text: &str, opts: ParseOptions) -> Result<Parsed, Vec<Violation>> {
    let doc: Value = serde_json::from_str(text).map_err(|e| vec![Violation::new("$", e.to_string())])?;
    let Value::Object(map) = &doc else {
        return Err(vec![Violation::new("$", "document must be a JSON object")]);
    };
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    for key in map.keys().filter(|k| !BLOCKS.contains(&k.as_str())) {
        let v = Violation::new(key.clone(), "unknown key");
        if opts.lenient {
            warnings.push(v);
        } else {
            errors.push(v);
        }
    }
    let model: Option<ModelConfig> = block(map.get("model"), "model", true, &mut errors);
    let noise: Option<NoiseConfig> = block(map.get("noise"), "noise", false, &mut errors);
    let run: Option<RunConfig> = block(map.get("run"), "run", true, &mut errors);
    let output: Option<OutputConfig> = block(map.get("output"), "output", false, &mut errors);
    let (Some(model), Some(run)) = (model, run) else {
        return Err(errors);
    };
    let mut config = ExperimentConfig {
        model,
        noise: noise.unwrap_or_default(),
        run,
        output: output.unwrap_or_default(),
    };
    // keys that the typed form does not carry back were not recognized
    let typed = serde_json::to_value(&config).expect("config serializes");
    let mut unknown = Vec::new();
    for b in BLOCKS {
        if let (Some(input), Some(known)) = (map.get(b), typed.get(b)) {
            unknown_keys(input, known, b, &mut unknown);
        }
    }
    for path in unknown {
        let v = Violation::new(path, "unknown key");
        if opts.lenient {
            warnings.push(v);
        } else {
            errors.push(v);
        }
    }
    errors.extend(validate(&config));
    if !errors.is_empty() {
        return Err(errors);
    }
    normalize(&mut config);
    Ok(Parsed { config, warnings })
}

fn block<T: DeserializeOwned>(
    value: Option<&Value>,
    name: &str,
    required: bool,
    errors: &mut Vec<Violation>,
) -> Option<T> {
    match value {
        None if required => {
            errors.push(Violation::new(name, "missing block"));
            None
        }
        None => None,
        Some(v) => match T::deserialize(v) {
            Ok(t) => Some(t),
            Err(e) => {
                let mut msg = e.to_string();
                if msg.contains("unknown variant") {
                    let list = if name == "model" { &MODEL_BUILDERS[..] } else { &NOISE_BUILDERS[..] };
                    msg = format!("{msg} (available builders: {})", list.join(", "));
                }
                errors.push(Violation::new(name, msg));
                None
            }
        },
    }
}

fn unknown_keys(input: &Value, known: &Value, path: &str, out: &mut Vec<String>) {
    match (input, known) {
        (Value::Object(a), Value::Object(b)) => {
            for (k, v) in a {
                let p = format!("{path}.{k}");
                match b.get(k) {
                    Some(kv) => unknown_keys(v, kv, &p, out),
                    None => out.push(p),
                }
            }
        }
        (Value::Array(a), Value::Array(b)) => {
            for (i, (x, y)) in a.iter().zip(b).enumerate() {
                unknown_keys(x, y, &format!("{path}[{i}]"), out);
            }
        }
        _ => {}
    }
}

fn finite(v: f64) -> bool {
    v.is_finite()
}

fn check_pauli(field: &str, s: &str, n: usize, errors: &mut Vec<Violation>) {
    match s.parse::<PauliString>() {
        Ok(p) if p.n_qubits() == n => {}
        Ok(p) => errors.push(Violation::new(field, format!("{s:?} acts on {} qubit(s), model has {n}", p.n_qubits()))),
        Err(e) => errors.push(Violation::new(field, e.to_string())),
    }
}

fn check_terms(field: &str, terms: &[TermConfig], n: usize, errors: &mut Vec<Violation>) {
    for (i, t) in terms.iter().enumerate() {
        check_pauli(&format!("{field}[{i}].pauli"), &t.pauli, n, errors);
        if !finite(t.coefficient) {
            errors.push(Violation::new(format!("{field}[{i}].coefficient"), "must be finite"));
        }
    }
}

/// The run's total time: stated or implied by the model.
pub fn total_time(cfg: &ExperimentConfig) -> Option<f64> {
    cfg.run.total_time.or_else(|| cfg.model.intrinsic_time())
}

fn validate(cfg: &ExperimentConfig) -> Vec<Violation> {
    let mut e = Vec::new();
    let n = cfg.model.n_qubits();
    if n == 0 || n > MAX_QUBITS {
        e.push(Violation::new("model.n_qubits", format!("must lie in 1..={MAX_QUBITS}, got {n}")));
    }
    let n_ok = n > 0 && n <= MAX_QUBITS;
    match &cfg.model {
        ModelConfig::TfimAnneal { couplings, fields, .. } => {
            for (k, &(i, j, c)) in couplings.iter().enumerate() {
                if n_ok && (i >= n || j >= n || i == j) {
                    e.push(Violation::new(
                        format!("model.couplings[{k}]"),
                        format!("needs distinct qubits below {n}, got ({i}, {j})"),
                    ));
                }
                if !finite(c) {
                    e.push(Violation::new(format!("model.couplings[{k}]"), "coupling must be finite"));
                }
            }
            if !fields.is_empty() && fields.len() != n {
                e.push(Violation::new("model.fields", format!("needs {n} entries or none, got {}", fields.len())));
            }
            if fields.iter().any(|h| !finite(*h)) {
                e.push(Violation::new("model.fields", "fields must be finite"));
            }
        }
        ModelConfig::Constant { terms, .. } => {
            if n_ok {
                check_terms("model.terms", terms, n, &mut e);
            }
        }
        ModelConfig::Idle { .. } => {}
        ModelConfig::Piecewise { segments, .. } => {
            if segments.is_empty() {
                e.push(Violation::new("model.segments", "needs at least one segment"));
            }
            for (i, s) in segments.iter().enumerate() {
                if !(s.duration > 0.0 && s.duration.is_finite()) {
                    e.push(Violation::new(format!("model.segments[{i}].duration"), "must be positive"));
                }
                if n_ok {
                    check_terms(&format!("model.segments[{i}].terms"), &s.terms, n, &mut e);
                }
            }
        }
        ModelConfig::Qaoa { cost, gammas, betas, .. } => {
            if n_ok {
                check_terms("model.cost", cost, n, &mut e);
            }
            if gammas.is_empty() || gammas.len() != betas.len() {
                e.push(Violation::new(
                    "model.gammas",
                    format!("needs as many entries as model.betas, at least one (got {} and {})", gammas.len(), betas.len()),
                ));
            }
            for (name, list) in [("model.gammas", gammas), ("model.betas", betas)] {
                if list.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                    e.push(Violation::new(name, "segment durations must be positive"));
                }
            }
        }
    }
    if let (InitialState::Basis(b), true) = (cfg.model.initial_state(), n_ok) {
        if b >= 1usize << n {
            e.push(Violation::new("model.initial_state", format!("basis index {b} out of range for {n} qubit(s)")));
        }
    }

    let run = &cfg.run;
    let t = match (run.total_time, cfg.model.intrinsic_time()) {
        (Some(t), Some(own)) => {
            if (t - own).abs() > TIME_MATCH_TOLERANCE * own.abs().max(1.0) {
                e.push(Violation::new("run.total_time", format!("model fixes the duration to {own}, got {t}")));
            }
            Some(own)
        }
        (Some(t), None) => Some(t),
        (None, own) => {
            if own.is_none() {
                e.push(Violation::new("run.total_time", "required for this model"));
            }
            own
        }
    };
    let t = t.filter(|t| {
        let ok = *t > 0.0 && t.is_finite();
        if !ok {
            e.push(Violation::new("run.total_time", format!("must be positive, got {t}")));
        }
        ok
    });
    if let Some(dt) = run.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            e.push(Violation::new("run.dt", format!("must be positive, got {dt}")));
        } else if let Some(t) = t {
            if dt > t {
                e.push(Violation::new("run.dt", format!("{dt} exceeds the total time {t}")));
            }
        }
    }
    if run.r == Some(0) {
        e.push(Violation::new("run.r", "must be at least 1"));
    }
    if let (Target::Index(m), true) = (run.target, n_ok) {
        if m >= 1usize << n {
            e.push(Violation::new("run.target", format!("basis index {m} out of range for {n} qubit(s)")));
        }
    }
    if let (Some(o), true) = (&run.observable, n_ok) {
        check_pauli("run.observable", o, n, &mut e);
    }
    if let Some(tol) = run.oracle_tolerance {
        if !(tol > 0.0 && tol.is_finite()) {
            e.push(Violation::new("run.oracle_tolerance", "must be positive"));
        }
    }
    if let Some(p) = &run.plan {
        if !(p.c >= 1.0 && p.c.is_finite()) {
            e.push(Violation::new("run.plan.c", format!("must be ≥ 1, got {}", p.c)));
        }
        if p.trials == 0 {
            e.push(Violation::new("run.plan.trials", "must be at least 1"));
        }
        if !(p.p_star > 0.0 && p.p_star <= 1.0) {
            e.push(Violation::new("run.plan.p_star", "must lie in (0, 1]"));
        }
        if let Some(g) = &p.gammas {
            if g.is_empty() || g.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                e.push(Violation::new("run.plan.gammas", "needs at least one finite Γ ≥ 0"));
            }
        }
        if p.r_override == Some(0) {
            e.push(Violation::new("run.plan.r_override", "must be at least 1"));
        }
    }
    if let Some(s) = &run.sweep {
        match (&s.g_grid, &s.gamma_grid) {
            (Some(_), Some(_)) | (None, None) => {
                e.push(Violation::new("run.sweep", "set exactly one of g_grid and gamma_grid"))
            }
            (Some(g), None) | (None, Some(g)) => {
                if g.is_empty() || g.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                    e.push(Violation::new("run.sweep", "grid needs at least one finite value ≥ 0"));
                }
            }
        }
        if !(s.p_star > 0.0 && s.p_star <= 1.0) {
            e.push(Violation::new("run.sweep.p_star", "must lie in (0, 1]"));
        }
        if s.repeats == 0 {
            e.push(Violation::new("run.sweep.repeats", "must be at least 1"));
        }
        if s.r_cap == 0 {
            e.push(Violation::new("run.sweep.r_cap", "must be at least 1"));
        }
    }
    if let Some(h) = &run.hoeffding {
        if h.r == 0 {
            e.push(Violation::new("run.hoeffding.r", "must be at least 1"));
        }
        if !(h.delta > 0.0 && h.delta.is_finite()) {
            e.push(Violation::new("run.hoeffding.delta", "must be positive"));
        }
        if h.trials == 0 {
            e.push(Violation::new("run.hoeffding.trials", "must be at least 1"));
        }
    }

    let strengths: Vec<(String, &StrengthConfig)> = match &cfg.noise {
        NoiseConfig::Off => vec![],
        NoiseConfig::PerQubit { letter, strength } => {
            if !matches!(letter.as_str(), "X" | "Y" | "Z") {
                e.push(Violation::new("noise.letter", format!("expected X, Y or Z, got {letter:?}")));
            }
            vec![("noise.strength".into(), strength)]
        }
        NoiseConfig::Channels { channels } => {
            if channels.is_empty() {
                e.push(Violation::new("noise.channels", "needs at least one channel"));
            }
            for (i, c) in channels.iter().enumerate() {
                if n_ok {
                    check_pauli(&format!("noise.channels[{i}].pauli"), &c.pauli, n, &mut e);
                }
            }
            channels.iter().enumerate().map(|(i, c)| (format!("noise.channels[{i}].strength"), &c.strength)).collect()
        }
    };
    for (field, s) in strengths {
        check_strength(&field, s, t, &mut e);
    }
    e
}

fn check_strength(field: &str, s: &StrengthConfig, t: Option<f64>, e: &mut Vec<Violation>) {
    let values: Vec<f64> = match s {
        StrengthConfig::Constant { value } => vec![*value],
        StrengthConfig::LinearRamp { start, end } => vec![*start, *end],
        StrengthConfig::PiecewiseLinear { knots } | StrengthConfig::PiecewiseConstant { knots } => {
            knots.iter().map(|k| k.1).collect()
        }
    };
    if values.iter().any(|v| !finite(*v)) {
        e.push(Violation::new(field, "strengths must be finite"));
    }
    if let Some(knots) = s.knots() {
        if knots.len() < 2 {
            e.push(Violation::new(field, "needs at least two knots"));
            return;
        }
        if knots[0].0 != 0.0 {
            e.push(Violation::new(field, format!("first knot must be at t = 0, got {}", knots[0].0)));
        }
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            e.push(Violation::new(field, "knot times must increase strictly"));
        }
        if let Some(t) = t {
            let last = knots[knots.len() - 1].0;
            if (last - t).abs() > TIME_MATCH_TOLERANCE * t.max(1.0) {
                e.push(Violation::new(field, format!("last knot must be at the total time {t}, got {last}")));
            }
        }
    }
}

/// Fills the documented defaults so the echoed config is explicit.
fn normalize(cfg: &mut ExperimentConfig) {
    let t = total_time(cfg).expect("validated");
    cfg.run.total_time = Some(t);
    cfg.run.dt.get_or_insert(DEFAULT_DT_FRACTION * t);
    cfg.run.oracle_tolerance.get_or_insert(DEFAULT_ORACLE_TOLERANCE);
    if let ModelConfig::TfimAnneal { n_qubits, fields, .. } = &mut cfg.model {
        if fields.is_empty() {
            *fields = vec![0.0; *n_qubits];
        }
    }
}

/// Core objects built from a validated config.
#[derive(Clone, Debug)]
pub struct Model {
    pub hamiltonian: HamiltonianSchedule,
    pub noise: NoiseSpec,
    pub initial_state: StateVector,
    pub total_time: f64,
    pub dt: f64,
}

impl Model {
    pub fn trajectory_config(&self, run: &RunConfig, dt: f64) -> qthreshold_core::Result<TrajectoryConfig> {
        TrajectoryConfig::new(
            self.hamiltonian.clone(),
            self.noise.clone(),
            self.initial_state.clone(),
            dt,
            run.scheme,
            run.renormalize,
        )
    }

    /// The same model with every channel strength replaced by the constant `g`.
    pub fn with_constant_strength(&self, g: f64) -> qthreshold_core::Result<NoiseSpec> {
        let schedule = CoefficientSchedule::constant(g, self.total_time)?;
        let channels = self
            .noise
            .channels()
            .iter()
            .map(|c| NoiseChannel::new(c.operator().clone(), schedule.clone()))
            .collect::<qthreshold_core::Result<Vec<_>>>()?;
        NoiseSpec::new(self.noise.n_qubits(), channels)
    }

    /// The same model with every channel strength multiplied by `factor`.
    pub fn with_scaled_strength(&self, factor: f64) -> qthreshold_core::Result<NoiseSpec> {
        let channels = self
            .noise
            .channels()
            .iter()
            .map(|c| NoiseChannel::new(c.operator().clone(), c.strength().scaled(factor)))
            .collect::<qthreshold_core::Result<Vec<_>>>()?;
        NoiseSpec::new(self.noise.n_qubits(), channels)
    }
}

fn terms(list: &[TermConfig]) -> qthreshold_core::Result<Vec<PauliString>> {
    list.iter()
        .map(|t| Ok(t.pauli.parse::<PauliString>()?.with_coefficient(t.coefficient)))
        .collect()
}

fn letter(s: &str) -> Pauli {
    s.chars().next().and_then(Pauli::from_char).unwrap_or(Pauli::Z)
}

/// Builds the Hamiltonian, noise and initial state of a validated config.
pub fn build_model(cfg: &ExperimentConfig) -> Result<Model, Vec<Violation>> {
    let wrap = |field: &str| {
        let field = field.to_string();
        move |e: qthreshold_core::Error| vec![Violation::new(field.clone(), e.to_string())]
    };
    let n = cfg.model.n_qubits();
    let t = total_time(cfg).ok_or_else(|| vec![Violation::new("run.total_time", "required for this model")])?;
    let hamiltonian = match &cfg.model {
        ModelConfig::TfimAnneal { couplings, fields, .. } => {
            let fields = if fields.is_empty() { vec![0.0; n] } else { fields.clone() };
            let p = AnnealingProblem::linear(n, couplings.clone(), fields, t).map_err(wrap("model"))?;
            build_tfim_anneal(&p).map_err(wrap("model"))?
        }
        ModelConfig::Constant { terms: list, .. } => {
            HamiltonianSchedule::constant(n, terms(list).map_err(wrap("model.terms"))?, t).map_err(wrap("model"))?
        }
        ModelConfig::Idle { .. } => HamiltonianSchedule::zero(n, t).map_err(wrap("model"))?,
        ModelConfig::Piecewise { segments, .. } => {
            let segments = segments
                .iter()
                .map(|s| Ok(Segment { duration: s.duration, terms: terms(&s.terms)? }))
                .collect::<qthreshold_core::Result<Vec<_>>>()
                .map_err(wrap("model.segments"))?;
            build_piecewise(&PiecewiseProgram { n_qubits: n, segments }).map_err(wrap("model"))?
        }
        ModelConfig::Qaoa { cost, gammas, betas, .. } => {
            let cost = terms(cost).map_err(wrap("model.cost"))?;
            let program = PiecewiseProgram::qaoa(n, cost, gammas, betas).map_err(wrap("model"))?;
            build_piecewise(&program).map_err(wrap("model"))?
        }
    };
    let noise = match &cfg.noise {
        NoiseConfig::Off => NoiseSpec::none(n),
        NoiseConfig::PerQubit { letter: l, strength } => {
            let g = strength.build(t).map_err(wrap("noise.strength"))?;
            per_qubit_noise(n, letter(l), &g).map_err(wrap("noise"))?
        }
        NoiseConfig::Channels { channels } => {
            let chs = channels
                .iter()
                .map(|c| NoiseChannel::new(c.pauli.parse()?, c.strength.build(t)?))
                .collect::<qthreshold_core::Result<Vec<_>>>()
                .map_err(wrap("noise.channels"))?;
            NoiseSpec::new(n, chs).map_err(wrap("noise"))?
        }
    };
    let initial_state = match cfg.model.initial_state() {
        InitialState::Named(NamedState::Plus) => StateVector::uniform_superposition(n),
        InitialState::Named(NamedState::Zero) => basis_state(n, 0),
        InitialState::Basis(b) => basis_state(n, b),
    }
    .map_err(wrap("model.initial_state"))?;
    let dt = cfg.run.dt.unwrap_or(DEFAULT_DT_FRACTION * t);
    Ok(Model { hamiltonian, noise, initial_state, total_time: t, dt })
}
