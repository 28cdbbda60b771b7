//! Run configuration: parsing, defaults and validation.
//!
//! A config is one JSON document. Every section is optional and falls back to the
//! defaults of the module it feeds; [`Materialized`] holds the fully resolved
//! values that are hashed and copied into the manifest.

use dilemma_core::reinforce::LearnerConfig;
use dilemma_core::{FlowParams, GameSpec, Strategy, Variant};
use dilemma_ssd::marl::TrainConfig;
use dilemma_ssd::{EnvConfig, GameKind};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Field,
    Flow,
    Volume,
    Sensitivity,
    Schelling,
    Reinforce,
    SsdTrain,
    SsdEval,
    ClusterDebug,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Field => "field",
            Kind::Flow => "flow",
            Kind::Volume => "volume",
            Kind::Sensitivity => "sensitivity",
            Kind::Schelling => "schelling",
            Kind::Reinforce => "reinforce",
            Kind::SsdTrain => "ssd-train",
            Kind::SsdEval => "ssd-eval",
            Kind::ClusterDebug => "cluster-debug",
        }
    }

    /// Kinds whose output does not depend on the seed.
    pub fn seedless(self) -> bool {
        matches!(self, Kind::Field | Kind::Schelling)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Severity {
    Parse,
    Schema,
    Range,
    MissingAsset,
}

/// One problem found in a config, located by line or by field path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Dotted field path, or `line L, column C` for syntax errors.
    pub location: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(severity: Severity, location: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic { severity, location: location.into(), message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Parse => "parse",
            Severity::Schema => "schema",
            Severity::Range => "range",
            Severity::MissingAsset => "missing-asset",
        };
        write!(f, "error[{tag}] {}: {}", self.location, self.message)
    }
}

/// Game section: a variant plus optional overrides of its defaults.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    pub variant: Option<Variant>,
    pub n: Option<usize>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub sigma: Option<f64>,
    pub p: Option<f64>,
    pub k: Option<f64>,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
}

impl GameSection {
    fn materialize(&self) -> GameSpec {
        let mut s = GameSpec::defaults(self.variant.unwrap_or(Variant::Cdnp));
        s.n = self.n.unwrap_or(s.n);
        s.b = self.b.unwrap_or(s.b);
        s.c = self.c.unwrap_or(s.c);
        s.sigma = self.sigma.unwrap_or(s.sigma);
        s.p = self.p.unwrap_or(s.p);
        s.k = self.k.unwrap_or(s.k);
        s.alpha = self.alpha.unwrap_or(s.alpha);
        s.lambda = self.lambda.unwrap_or(s.lambda);
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    pub resolution: usize,
}

impl Default for FieldSection {
    fn default() -> Self {
        FieldSection { resolution: 21 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySection {
    /// Shared start row; drawn uniformly from the seed when absent.
    pub start: Option<Vec<f64>>,
    /// Per-agent start rows; overrides `start`.
    pub rows: Option<Vec<Vec<f64>>>,
    pub steps: usize,
    pub thin: usize,
    pub cycle_eps: f64,
    /// Fraction of the snapshots discarded before looking for recurrence.
    pub transient_fraction: f64,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        TrajectorySection { start: None, rows: None, steps: 100_000, thin: 100, cycle_eps: 1e-3, transient_fraction: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolumeSection {
    pub samples: usize,
}

impl Default for VolumeSection {
    fn default() -> Self {
        VolumeSection { samples: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivitySection {
    pub delta: f64,
    pub samples: usize,
}

impl Default for SensitivitySection {
    fn default() -> Self {
        SensitivitySection { delta: 0.2, samples: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchellingSection {
    pub focal: (Strategy, Strategy),
    /// Per-slot counts of agents held fixed; all zero when absent.
    pub fixed: Option<Vec<usize>>,
}

impl Default for SchellingSection {
    fn default() -> Self {
        SchellingSection { focal: (Strategy::C, Strategy::D), fixed: None }
    }
}

/// Environment section: a preset selected by game and agent count, then overrides.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    pub game: Option<GameKind>,
    pub n_agents: Option<usize>,
    pub map: Option<String>,
    /// Layout file, resolved against the config's directory.
    pub map_file: Option<PathBuf>,
    pub view_size: Option<usize>,
    pub max_steps: Option<usize>,
    pub apple_respawn: Option<f64>,
    pub depletion_threshold: Option<f64>,
    pub restoration_threshold: Option<f64>,
    pub waste_spawn: Option<f64>,
    pub harvest_spawn: Option<[f64; 4]>,
    pub eta_e: Option<f64>,
    pub eta_c: Option<f64>,
    pub incentive_magnitude: Option<f64>,
    pub beam_length: Option<usize>,
}

impl EnvSection {
    fn materialize(&self, base_dir: &Path, diags: &mut Vec<Diagnostic>) -> Option<EnvConfig> {
        let n = self.n_agents.unwrap_or(3);
        let mut cfg = match self.game.unwrap_or(GameKind::Cleanup) {
            GameKind::Cleanup => match EnvConfig::cleanup(n) {
                Ok(c) => c,
                // Without a preset, a custom layout still needs the Cleanup defaults.
                Err(_) if self.map_file.is_some() || self.map.is_some() => {
                    EnvConfig { n_agents: n, ..EnvConfig::cleanup(3).expect("preset") }
                }
                Err(e) => {
                    diags.push(Diagnostic::new(Severity::Range, "env.n_agents", e.to_string()));
                    return None;
                }
            },
            GameKind::Harvest => EnvConfig::harvest(n),
        };
        if let Some(m) = &self.map {
            cfg.map.clone_from(m);
        }
        if let Some(file) = &self.map_file {
            let path = base_dir.join(file);
            match std::fs::read_to_string(&path) {
                Ok(text) => cfg.map_text = Some(text),
                Err(e) => {
                    diags.push(Diagnostic::new(
                        Severity::MissingAsset,
                        "env.map_file",
                        format!("cannot read layout {}: {e}", path.display()),
                    ));
                    return None;
                }
            }
        }
        macro_rules! apply {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        apply!(view_size, max_steps, apple_respawn, depletion_threshold, restoration_threshold, waste_spawn, harvest_spawn, eta_e, eta_c, incentive_magnitude, beam_length);
        Some(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Environment steps to train for.
    pub budget: usize,
    /// The run's seed list replaces `learner.seed`.
    pub learner: TrainConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection { budget: 100_000, learner: TrainConfig::default() }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Checkpoint written by `ssd-train`, resolved against the config's directory.
    pub checkpoint: Option<PathBuf>,
    pub episodes: Option<usize>,
    pub epsilon: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResolved {
    pub checkpoint: Option<PathBuf>,
    pub checkpoint_sha256: Option<String>,
    pub episodes: usize,
    pub epsilon: f64,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSection {
    /// CSV of feature rows (header line, numeric columns); synthetic groups when absent.
    pub features_file: Option<PathBuf>,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    /// Synthetic data: points per group.
    pub group_size: Option<usize>,
    /// Synthetic data: distance between the two group centres, in noise standard deviations.
    pub separation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterResolved {
    /// Rows read from the features file, if one was given.
    pub features: Option<Vec<Vec<f64>>>,
    pub k_min: usize,
    pub k_max: usize,
    pub group_size: usize,
    pub separation: f64,
}

/// The document as written by the user.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub schema_version: Option<u32>,
    pub kind: Option<Kind>,
    pub seeds: Option<Vec<u64>>,
    pub game: Option<GameSection>,
    pub flow: Option<FlowParams>,
    pub field: Option<FieldSection>,
    pub trajectory: Option<TrajectorySection>,
    pub volume: Option<VolumeSection>,
    pub sensitivity: Option<SensitivitySection>,
    pub schelling: Option<SchellingSection>,
    pub reinforce: Option<LearnerConfig>,
    pub env: Option<EnvSection>,
    pub train: Option<TrainSection>,
    pub eval: Option<EvalSection>,
    pub cluster: Option<ClusterSection>,
}

/// Fully resolved configuration for one kind. Only the sections the kind reads are
/// present, so unrelated edits do not change the hash.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Materialized {
    pub schema_version: u32,
    pub kind: Kind,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub game: Option<GameSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectorySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volume: Option<VolumeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<SensitivitySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schelling: Option<SchellingSection>,
    /// The run's seed list replaces `seed`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reinforce: Option<LearnerConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub env: Option<EnvConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalResolved>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster: Option<ClusterResolved>,
}

impl Materialized {
    pub fn game(&self) -> &GameSpec {
        self.game.as_ref().expect("kind reads a game section")
    }

    pub fn flow(&self) -> &FlowParams {
        self.flow.as_ref().expect("kind reads a flow section")
    }

    pub fn env(&self) -> &EnvConfig {
        self.env.as_ref().expect("kind reads an env section")
    }
}

/// Parses `text`, reporting syntax errors by line and type errors by field path.
pub fn parse(text: &str) -> Result<RawConfig, Diagnostic> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| {
        Diagnostic::new(Severity::Parse, format!("line {}, column {}", e.line(), e.column()), e.to_string())
    })?;
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let location = if path == "." { "(root)".to_string() } else { path };
        Diagnostic::new(Severity::Schema, location, e.into_inner().to_string())
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn checksum(bytes: &[u8]) -> String {
    sha256_hex(bytes)
}

/// Resolves defaults for `kind` and checks every section it reads.
///
/// `seed_override` replaces the config's seed list. Relative asset paths are
/// resolved against `base_dir`.
pub fn materialize(
    raw: &RawConfig,
    kind: Kind,
    seed_override: Option<u64>,
    base_dir: &Path,
) -> Result<Materialized, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let version = raw.schema_version.unwrap_or(SCHEMA_VERSION);
    if version != SCHEMA_VERSION {
        diags.push(Diagnostic::new(Severity::Schema, "schema_version", format!("unsupported version {version}, expected {SCHEMA_VERSION}")));
    }
    if let Some(k) = raw.kind {
        if k != kind {
            diags.push(Diagnostic::new(Severity::Schema, "kind", format!("config is for `{k}` but `{kind}` was requested")));
        }
    }
    let seeds = match seed_override {
        Some(s) => vec![s],
        None => raw.seeds.clone().unwrap_or_else(|| vec![0]),
    };
    if seeds.is_empty() {
        diags.push(Diagnostic::new(Severity::Range, "seeds", "need at least one seed"));
    }
    let mut m = Materialized {
        schema_version: SCHEMA_VERSION,
        kind,
        seeds,
        game: None,
        flow: None,
        field: None,
        trajectory: None,
        volume: None,
        sensitivity: None,
        schelling: None,
        reinforce: None,
        env: None,
        train: None,
        eval: None,
        cluster: None,
    };

    let uses_game = matches!(kind, Kind::Field | Kind::Flow | Kind::Volume | Kind::Sensitivity | Kind::Schelling | Kind::Reinforce);
    if uses_game {
        let spec = raw.game.clone().unwrap_or_default().materialize();
        if let Err(e) = spec.validate() {
            diags.push(game_diagnostic(&e));
        }
        m.game = Some(spec);
    }
    let arity = m.game.as_ref().map(|g| g.arity()).unwrap_or(3);

    if matches!(kind, Kind::Field | Kind::Flow | Kind::Volume | Kind::Sensitivity) {
        let flow = raw.flow.clone().unwrap_or_default();
        if let Err(e) = flow.validate(arity) {
            diags.push(Diagnostic::new(Severity::Range, "flow", e.to_string()));
        }
        m.flow = Some(flow);
    }

    match kind {
        Kind::Field => {
            let f = raw.field.clone().unwrap_or_default();
            if f.resolution < 2 {
                diags.push(Diagnostic::new(Severity::Range, "field.resolution", "must be at least 2"));
            }
            m.field = Some(f);
        }
        Kind::Flow => {
            let t = raw.trajectory.clone().unwrap_or_default();
            check_trajectory(&t, m.game(), &mut diags);
            m.trajectory = Some(t);
        }
        Kind::Volume => {
            let v = raw.volume.clone().unwrap_or_default();
            if v.samples == 0 {
                diags.push(Diagnostic::new(Severity::Range, "volume.samples", "must be at least 1"));
            }
            m.volume = Some(v);
        }
        Kind::Sensitivity => {
            let s = raw.sensitivity.clone().unwrap_or_default();
            if !(0.0..1.0).contains(&s.delta) {
                diags.push(Diagnostic::new(Severity::Range, "sensitivity.delta", format!("must lie in [0, 1), got {}", s.delta)));
            }
            if s.samples == 0 {
                diags.push(Diagnostic::new(Severity::Range, "sensitivity.samples", "must be at least 1"));
            }
            m.sensitivity = Some(s);
        }
        Kind::Schelling => {
            let mut s = raw.schelling.clone().unwrap_or_default();
            let fixed = s.fixed.get_or_insert_with(|| vec![0; arity]);
            if fixed.len() != arity {
                diags.push(Diagnostic::new(Severity::Range, "schelling.fixed", format!("needs {arity} entries, got {}", fixed.len())));
            }
            for (name, st) in [("schelling.focal[0]", s.focal.0), ("schelling.focal[1]", s.focal.1)] {
                if m.game().variant.index_of(st).is_none() {
                    diags.push(Diagnostic::new(Severity::Range, name, format!("{st} is not a strategy of {}", m.game().variant)));
                }
            }
            m.schelling = Some(s);
        }
        Kind::Reinforce => {
            let mut r = raw.reinforce.clone().unwrap_or_default();
            r.seed = 0;
            if let Err(e) = r.validate(m.game()) {
                diags.push(game_diagnostic(&e).prefixed("reinforce"));
            }
            m.reinforce = Some(r);
        }
        Kind::SsdTrain | Kind::SsdEval => {
            let env = raw.env.clone().unwrap_or_default().materialize(base_dir, &mut diags);
            if let Some(env) = &env {
                if let Err(e) = env.validate() {
                    diags.push(env_diagnostic(&e));
                }
            }
            m.env = env;
            let mut t = raw.train.clone().unwrap_or_default();
            t.learner.seed = 0;
            if t.budget == 0 {
                diags.push(Diagnostic::new(Severity::Range, "train.budget", "must be at least 1"));
            }
            if let Err(e) = t.learner.validate() {
                diags.push(train_diagnostic(&e));
            }
            m.train = Some(t);
            if kind == Kind::SsdEval {
                m.eval = Some(resolve_eval(raw.eval.as_ref(), base_dir, &mut diags));
            }
        }
        Kind::ClusterDebug => {
            m.cluster = Some(resolve_cluster(raw.cluster.as_ref(), base_dir, &mut diags));
        }
    }

    if diags.is_empty() {
        Ok(m)
    } else {
        Err(diags)
    }
}

impl Diagnostic {
    fn prefixed(mut self, section: &str) -> Self {
        self.location = format!("{section}.{}", self.location);
        self
    }
}

fn game_diagnostic(e: &dilemma_core::GameError) -> Diagnostic {
    match e {
        dilemma_core::GameError::InvalidSpec { field, reason } => Diagnostic::new(Severity::Range, format!("game.{field}"), reason.clone()),
        other => Diagnostic::new(Severity::Range, "game", other.to_string()),
    }
}

fn env_diagnostic(e: &dilemma_ssd::EnvError) -> Diagnostic {
    match e {
        dilemma_ssd::EnvError::Config { field, reason } => Diagnostic::new(Severity::Range, format!("env.{field}"), reason.clone()),
        other => Diagnostic::new(Severity::Range, "env", other.to_string()),
    }
}

fn train_diagnostic(e: &dilemma_ssd::marl::TrainError) -> Diagnostic {
    match e {
        dilemma_ssd::marl::TrainError::Config { field, reason } => Diagnostic::new(Severity::Range, format!("train.learner.{field}"), reason.clone()),
        other => Diagnostic::new(Severity::Range, "train", other.to_string()),
    }
}

fn check_trajectory(t: &TrajectorySection, spec: &GameSpec, diags: &mut Vec<Diagnostic>) {
    if t.steps == 0 {
        diags.push(Diagnostic::new(Severity::Range, "trajectory.steps", "must be at least 1"));
    }
    if t.thin == 0 {
        diags.push(Diagnostic::new(Severity::Range, "trajectory.thin", "must be at least 1"));
    }
    if !(t.cycle_eps > 0.0) {
        diags.push(Diagnostic::new(Severity::Range, "trajectory.cycle_eps", "must be positive"));
    }
    if !(0.0..1.0).contains(&t.transient_fraction) {
        diags.push(Diagnostic::new(Severity::Range, "trajectory.transient_fraction", "must lie in [0, 1)"));
    }
    let check_row = |row: &[f64], at: String, diags: &mut Vec<Diagnostic>| {
        let sum: f64 = row.iter().sum();
        if row.len() != spec.arity() || row.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            diags.push(Diagnostic::new(Severity::Range, at, format!("needs {} nonnegative entries summing to 1", spec.arity())));
        }
    };
    if let Some(rows) = &t.rows {
        if rows.len() != spec.n {
            diags.push(Diagnostic::new(Severity::Range, "trajectory.rows", format!("needs {} rows, got {}", spec.n, rows.len())));
        }
        for (i, r) in rows.iter().enumerate() {
            check_row(r, format!("trajectory.rows[{i}]"), diags);
        }
    } else if let Some(start) = &t.start {
        check_row(start, "trajectory.start".into(), diags);
    }
}

fn resolve_eval(e: Option<&EvalSection>, base_dir: &Path, diags: &mut Vec<Diagnostic>) -> EvalResolved {
    let e = e.cloned().unwrap_or_default();
    let episodes = e.episodes.unwrap_or(20);
    let epsilon = e.epsilon.unwrap_or(0.0);
    if episodes == 0 {
        diags.push(Diagnostic::new(Severity::Range, "eval.episodes", "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        diags.push(Diagnostic::new(Severity::Range, "eval.epsilon", format!("must lie in [0, 1], got {epsilon}")));
    }
    let mut checkpoint_sha256 = None;
    if let Some(path) = &e.checkpoint {
        match std::fs::read(base_dir.join(path)) {
            Ok(bytes) => checkpoint_sha256 = Some(sha256_hex(&bytes)),
            Err(err) => diags.push(Diagnostic::new(
                Severity::MissingAsset,
                "eval.checkpoint",
                format!("cannot read checkpoint {}: {err}", base_dir.join(path).display()),
            )),
        }
    }
    EvalResolved { checkpoint: e.checkpoint.map(|p| base_dir.join(p)), checkpoint_sha256, episodes, epsilon }
}

fn resolve_cluster(c: Option<&ClusterSection>, base_dir: &Path, diags: &mut Vec<Diagnostic>) -> ClusterResolved {
    let c = c.cloned().unwrap_or_default();
    let k_min = c.k_min.unwrap_or(2);
    let k_max = c.k_max.unwrap_or(4);
    if k_min == 0 || k_min > k_max {
        diags.push(Diagnostic::new(Severity::Range, "cluster.k_min", format!("need 1 <= k_min <= k_max, got {k_min} and {k_max}")));
    }
    let separation = c.separation.unwrap_or(5.0);
    if !(separation >= 0.0 && separation.is_finite()) {
        diags.push(Diagnostic::new(Severity::Range, "cluster.separation", "must be finite and nonnegative"));
    }
    let group_size = c.group_size.unwrap_or(20);
    if group_size == 0 {
        diags.push(Diagnostic::new(Severity::Range, "cluster.group_size", "must be at least 1"));
    }
    let features = c.features_file.and_then(|path| {
        let path = base_dir.join(path);
        match read_feature_rows(&path) {
            Ok(rows) if rows.is_empty() => {
                diags.push(Diagnostic::new(Severity::Range, "cluster.features_file", "file has no rows"));
                None
            }
            Ok(rows) => Some(rows),
            Err(FeatureError::Io(e)) => {
                diags.push(Diagnostic::new(Severity::MissingAsset, "cluster.features_file", format!("cannot read {}: {e}", path.display())));
                None
            }
            Err(FeatureError::Format(m)) => {
                diags.push(Diagnostic::new(Severity::Parse, format!("cluster.features_file {}", path.display()), m));
                None
            }
        }
    });
    ClusterResolved { features, k_min, k_max, group_size, separation }
}

enum FeatureError {
    Io(std::io::Error),
    Format(String),
}

fn read_feature_rows(path: &Path) -> Result<Vec<Vec<f64>>, FeatureError> {
    let text = std::fs::read_to_string(path).map_err(FeatureError::Io)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    let mut width = None;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| FeatureError::Format(e.to_string()))?;
        let row: Vec<f64> = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| FeatureError::Format(format!("line {}: {e}", i + 2)))?;
        if *width.get_or_insert(row.len()) != row.len() {
            return Err(FeatureError::Format(format!("line {}: expected {} columns", i + 2, width.unwrap())));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Hex SHA-256 of the canonical JSON form.
pub fn config_hash(m: &Materialized) -> String {
    sha256_hex(&serde_json::to_vec(m).expect("config serializes"))
}
