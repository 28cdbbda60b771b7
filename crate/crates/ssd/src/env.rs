//! Cleanup and Harvest gridworlds with per-target incentive actions.
//!
//! All agents face up. Cleaning beams fire upward and stop at walls. Moves are
//! resolved one agent at a time in index order against the current occupancy, so
//! a lower index wins any contested cell.

use crate::maps::{builtin, Layout, Tile};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("map error: {0}")]
    Map(String),
    #[error("{0}")]
    Contract(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameKind {
    Cleanup,
    Harvest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvAction {
    Stay,
    Up,
    Down,
    Left,
    Right,
    Clean,
}

impl EnvAction {
    pub const ALL: [EnvAction; 6] =
        [EnvAction::Stay, EnvAction::Up, EnvAction::Down, EnvAction::Left, EnvAction::Right, EnvAction::Clean];
    pub const COUNT: usize = 6;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    fn offset(self) -> (isize, isize) {
        match self {
            EnvAction::Up => (-1, 0),
            EnvAction::Down => (1, 0),
            EnvAction::Left => (0, -1),
            EnvAction::Right => (0, 1),
            EnvAction::Stay | EnvAction::Clean => (0, 0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IncentiveKind {
    Negative,
    Zero,
    Positive,
}

impl IncentiveKind {
    pub const ALL: [IncentiveKind; 3] = [IncentiveKind::Negative, IncentiveKind::Zero, IncentiveKind::Positive];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn sign(self) -> f64 {
        match self {
            IncentiveKind::Negative => -1.0,
            IncentiveKind::Zero => 0.0,
            IncentiveKind::Positive => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub game: GameKind,
    /// Name of a bundled layout, e.g. `cleanup_10x10`.
    pub map: String,
    /// Inline layout text; overrides `map` when present.
    #[serde(default)]
    pub map_text: Option<String>,
    pub n_agents: usize,
    pub view_size: usize,
    pub max_steps: usize,
    pub apple_respawn: f64,
    pub depletion_threshold: f64,
    pub restoration_threshold: f64,
    pub waste_spawn: f64,
    /// Harvest spawn probability for 0, 1, 2 and at least 3 apples within L1 distance 2.
    pub harvest_spawn: [f64; 4],
    pub eta_e: f64,
    pub eta_c: f64,
    pub incentive_magnitude: f64,
    pub beam_length: usize,
}

impl EnvConfig {
    /// Cleanup presets for 3, 5 and 10 agents.
    pub fn cleanup(n_agents: usize) -> Result<Self, EnvError> {
        let (map, view, steps, apple, depletion, waste) = match n_agents {
            3 => ("cleanup_10x10", 7, 50, 0.3, 0.4, 0.5),
            5 => ("cleanup_25x18", 15, 100, 0.05, 0.99, 0.05),
            10 => ("cleanup_48x18", 15, 100, 0.05, 0.99, 0.05),
            other => {
                return Err(EnvError::Config { field: "n_agents", reason: format!("no Cleanup preset for {other} agents") })
            }
        };
        Ok(EnvConfig {
            game: GameKind::Cleanup,
            map: map.into(),
            map_text: None,
            n_agents,
            view_size: view,
            max_steps: steps,
            apple_respawn: apple,
            depletion_threshold: depletion,
            restoration_threshold: 0.0,
            waste_spawn: waste,
            harvest_spawn: [0.0, 0.05, 0.08, 0.1],
            eta_e: 1.0,
            eta_c: 0.1,
            incentive_magnitude: 1.0,
            beam_length: 5,
        })
    }

    pub fn harvest(n_agents: usize) -> Self {
        EnvConfig {
            game: GameKind::Harvest,
            map: "harvest_32x18".into(),
            map_text: None,
            n_agents,
            view_size: 15,
            max_steps: 100,
            apple_respawn: 0.0,
            depletion_threshold: 1.0,
            restoration_threshold: 0.0,
            waste_spawn: 0.0,
            harvest_spawn: [0.0, 0.05, 0.08, 0.1],
            eta_e: 1.0,
            eta_c: 0.1,
            incentive_magnitude: 1.0,
            beam_length: 5,
        }
    }

    pub fn layout(&self) -> Result<Layout, EnvError> {
        match &self.map_text {
            Some(text) => Layout::parse(text),
            None => Layout::parse(builtin(&self.map).ok_or_else(|| EnvError::Map(format!("unknown map {:?}", self.map)))?),
        }
    }

    pub fn validate(&self) -> Result<Layout, EnvError> {
        let bad = |field: &'static str, reason: String| Err(EnvError::Config { field, reason });
        let prob = |x: f64| (0.0..=1.0).contains(&x);
        if self.n_agents == 0 {
            return bad("n_agents", "need at least one agent".into());
        }
        if self.view_size % 2 == 0 {
            return bad("view_size", format!("must be odd, got {}", self.view_size));
        }
        if self.max_steps == 0 {
            return bad("max_steps", "must be at least 1".into());
        }
        for (field, x) in [
            ("apple_respawn", self.apple_respawn),
            ("depletion_threshold", self.depletion_threshold),
            ("restoration_threshold", self.restoration_threshold),
            ("waste_spawn", self.waste_spawn),
        ] {
            if !prob(x) {
                return bad(field, format!("must lie in [0, 1], got {x}"));
            }
        }
        if self.game == GameKind::Cleanup && self.restoration_threshold >= self.depletion_threshold {
            return bad("restoration_threshold", "must be below the depletion threshold".into());
        }
        if !self.harvest_spawn.iter().all(|&x| prob(x)) {
            return bad("harvest_spawn", "probabilities must lie in [0, 1]".into());
        }
        for (field, x) in [("eta_e", self.eta_e), ("eta_c", self.eta_c), ("incentive_magnitude", self.incentive_magnitude)] {
            if !(x >= 0.0 && x.is_finite()) {
                return bad(field, format!("must be finite and nonnegative, got {x}"));
            }
        }
        let layout = self.layout()?;
        let spawns = layout.count(Tile::Spawn);
        if spawns < self.n_agents {
            return Err(EnvError::Config {
                field: "n_agents",
                reason: format!("map has {spawns} spawn points for {} agents", self.n_agents),
            });
        }
        if self.game == GameKind::Cleanup && layout.count(Tile::WasteField) == 0 {
            return Err(EnvError::Map("Cleanup map needs a waste field".into()));
        }
        Ok(layout)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Empty,
    Apple,
    Waste,
    Wall,
}

/// One agent's square window; cells outside the map read as walls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub side: usize,
    pub cells: Vec<Cell>,
    /// Agent standing on each cell, if any (the observer included).
    pub agents: Vec<Option<usize>>,
}

impl Observation {
    pub fn at(&self, row: usize, col: usize) -> (Cell, Option<usize>) {
        let k = row * self.side + col;
        (self.cells[k], self.agents[k])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncentiveRecord {
    pub giver: usize,
    pub receiver: usize,
    pub kind: IncentiveKind,
    /// Reward added to the receiver, `η_e · r`.
    pub delivered: f64,
    /// Cost paid by the giver, `η_c · |r|`.
    pub cost: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub env: Vec<f64>,
    pub received: Vec<f64>,
    pub cost: Vec<f64>,
}

impl RewardBreakdown {
    /// Environment reward plus incentives received minus incentive costs.
    pub fn total(&self, agent: usize) -> f64 {
        self.env[agent] + self.received[agent] - self.cost[agent]
    }
}

/// Spawn trials seen so far, for frequency audits. A trial is one eligible cell
/// drawn against its spawn probability.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpawnAudit {
    pub apple_trials: u64,
    pub apple_spawns: u64,
    pub apple_probability_sum: f64,
    pub waste_trials: u64,
    pub waste_spawns: u64,
    pub waste_probability_sum: f64,
    /// Harvest trials by neighbour class (0, 1, 2, 3+ apples nearby).
    pub harvest_trials: [u64; 4],
    pub harvest_spawns: [u64; 4],
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observations: Vec<Observation>,
    pub rewards: RewardBreakdown,
    pub incentives: Vec<IncentiveRecord>,
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SsdEnv {
    cfg: EnvConfig,
    rows: usize,
    cols: usize,
    cells: Vec<Cell>,
    occupant: Vec<Option<usize>>,
    positions: Vec<usize>,
    apple_cells: Vec<usize>,
    waste_cells: Vec<usize>,
    step: usize,
    rng: ChaCha8Rng,
    apples_eaten: Vec<u64>,
    waste_cleaned: Vec<u64>,
    /// Apples eaten that left no other apple within L1 distance 2.
    last_apples_eaten: Vec<u64>,
    audit: SpawnAudit,
}

impl SsdEnv {
    pub fn reset(cfg: &EnvConfig, seed: u64) -> Result<(Self, Vec<Observation>), EnvError> {
        let layout = cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rows, cols) = (layout.rows, layout.cols);
        let mut cells = vec![Cell::Empty; rows * cols];
        let (mut apple_cells, mut waste_cells, mut spawns) = (Vec::new(), Vec::new(), Vec::new());
        for (k, tile) in layout.tiles.iter().enumerate() {
            match tile {
                Tile::Wall => cells[k] = Cell::Wall,
                Tile::AppleField => apple_cells.push(k),
                Tile::WasteField => waste_cells.push(k),
                Tile::Spawn => spawns.push(k),
                Tile::Open => {}
            }
        }
        match cfg.game {
            GameKind::Cleanup => {
                // Smallest waste density strictly above the depletion threshold.
                let total = waste_cells.len();
                let fill = ((cfg.depletion_threshold * total as f64).floor() as usize + 1).min(total);
                let mut order = waste_cells.clone();
                order.shuffle(&mut rng);
                for &k in &order[..fill] {
                    cells[k] = Cell::Waste;
                }
            }
            GameKind::Harvest => {
                for &k in &apple_cells {
                    cells[k] = Cell::Apple;
                }
            }
        }
        spawns.shuffle(&mut rng);
        let positions: Vec<usize> = spawns[..cfg.n_agents].to_vec();
        let mut occupant = vec![None; rows * cols];
        for (i, &k) in positions.iter().enumerate() {
            occupant[k] = Some(i);
        }
        let n = cfg.n_agents;
        let env = SsdEnv {
            cfg: cfg.clone(),
            rows,
            cols,
            cells,
            occupant,
            positions,
            apple_cells,
            waste_cells,
            step: 0,
            rng,
            apples_eaten: vec![0; n],
            waste_cleaned: vec![0; n],
            last_apples_eaten: vec![0; n],
            audit: SpawnAudit::default(),
        };
        let obs = (0..n).map(|i| env.observe(i)).collect();
        Ok((env, obs))
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn n_agents(&self) -> usize {
        self.cfg.n_agents
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.cfg.max_steps
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.cols + col]
    }

    pub fn position(&self, agent: usize) -> (usize, usize) {
        let k = self.positions[agent];
        (k / self.cols, k % self.cols)
    }

    pub fn apples_eaten(&self) -> &[u64] {
        &self.apples_eaten
    }

    pub fn waste_cleaned(&self) -> &[u64] {
        &self.waste_cleaned
    }

    pub fn last_apples_eaten(&self) -> &[u64] {
        &self.last_apples_eaten
    }

    pub fn audit(&self) -> &SpawnAudit {
        &self.audit
    }

    pub fn apple_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == Cell::Apple).count()
    }

    pub fn waste_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == Cell::Waste).count()
    }

    /// Fraction of the waste field covered by waste; zero for maps without one.
    pub fn waste_density(&self) -> f64 {
        if self.waste_cells.is_empty() {
            return 0.0;
        }
        self.waste_cells.iter().filter(|&&k| self.cells[k] == Cell::Waste).count() as f64 / self.waste_cells.len() as f64
    }

    /// Removes all waste, e.g. to audit apple regrowth at full rate.
    pub fn clear_waste(&mut self) {
        for &k in &self.waste_cells {
            if self.cells[k] == Cell::Waste {
                self.cells[k] = Cell::Empty;
            }
        }
    }

    /// Removes all apples, e.g. to keep every apple cell eligible for spawning.
    pub fn clear_apples(&mut self) {
        for &k in &self.apple_cells {
            if self.cells[k] == Cell::Apple {
                self.cells[k] = Cell::Empty;
            }
        }
    }

    /// Empties an apple cell; returns whether there was an apple.
    pub fn remove_apple(&mut self, row: usize, col: usize) -> bool {
        let k = row * self.cols + col;
        let had = self.cells[k] == Cell::Apple;
        if had {
            self.cells[k] = Cell::Empty;
        }
        had
    }

    pub fn observe(&self, agent: usize) -> Observation {
        let side = self.cfg.view_size;
        let half = (side / 2) as isize;
        let (r0, c0) = self.position(agent);
        let mut cells = Vec::with_capacity(side * side);
        let mut agents = Vec::with_capacity(side * side);
        for dr in -half..=half {
            for dc in -half..=half {
                let (r, c) = (r0 as isize + dr, c0 as isize + dc);
                if r < 0 || c < 0 || r >= self.rows as isize || c >= self.cols as isize {
                    cells.push(Cell::Wall);
                    agents.push(None);
                } else {
                    let k = r as usize * self.cols + c as usize;
                    cells.push(self.cells[k]);
                    agents.push(self.occupant[k]);
                }
            }
        }
        Observation { side, cells, agents }
    }

    /// Advances one tick. `incentives[i][j]` is what agent `i` sends to agent `j`;
    /// diagonal entries must be [`IncentiveKind::Zero`].
    pub fn step(&mut self, actions: &[EnvAction], incentives: &[Vec<IncentiveKind>]) -> Result<StepResult, EnvError> {
        let n = self.cfg.n_agents;
        if self.is_done() {
            return Err(EnvError::Contract("episode is over".into()));
        }
        if actions.len() != n || incentives.len() != n || incentives.iter().any(|row| row.len() != n) {
            return Err(EnvError::Contract(format!("expected {n} actions and an {n}x{n} incentive matrix")));
        }
        if (0..n).any(|i| incentives[i][i] != IncentiveKind::Zero) {
            return Err(EnvError::Contract("agents cannot incentivize themselves".into()));
        }

        for (i, action) in actions.iter().enumerate() {
            let (dr, dc) = action.offset();
            if (dr, dc) == (0, 0) {
                continue;
            }
            let from = self.positions[i];
            let (r, c) = ((from / self.cols) as isize + dr, (from % self.cols) as isize + dc);
            if r < 0 || c < 0 || r >= self.rows as isize || c >= self.cols as isize {
                continue;
            }
            let to = r as usize * self.cols + c as usize;
            if self.cells[to] == Cell::Wall || self.occupant[to].is_some() {
                continue;
            }
            self.occupant[from] = None;
            self.occupant[to] = Some(i);
            self.positions[i] = to;
        }

        let mut env_reward = vec![0.0; n];
        for i in 0..n {
            let k = self.positions[i];
            if self.cells[k] == Cell::Apple {
                self.cells[k] = Cell::Empty;
                env_reward[i] = 1.0;
                self.apples_eaten[i] += 1;
                if self.apples_within(k) == 0 {
                    self.last_apples_eaten[i] += 1;
                }
            }
        }

        if self.cfg.game == GameKind::Cleanup {
            for (i, action) in actions.iter().enumerate() {
                if *action == EnvAction::Clean {
                    self.fire_beam(i);
                }
            }
        }

        match self.cfg.game {
            GameKind::Cleanup => self.spawn_cleanup(),
            GameKind::Harvest => self.spawn_harvest(),
        }

        let mut rewards = RewardBreakdown { env: env_reward, received: vec![0.0; n], cost: vec![0.0; n] };
        let mut records = Vec::new();
        for (giver, row) in incentives.iter().enumerate() {
            for (receiver, &kind) in row.iter().enumerate() {
                if giver == receiver {
                    continue;
                }
                let r = kind.sign() * self.cfg.incentive_magnitude;
                let delivered = self.cfg.eta_e * r;
                let cost = self.cfg.eta_c * r.abs();
                rewards.received[receiver] += delivered;
                rewards.cost[giver] += cost;
                records.push(IncentiveRecord { giver, receiver, kind, delivered, cost });
            }
        }

        self.step += 1;
        Ok(StepResult {
            observations: (0..n).map(|i| self.observe(i)).collect(),
            rewards,
            incentives: records,
            done: self.is_done(),
        })
    }

    fn fire_beam(&mut self, agent: usize) {
        let k = self.positions[agent];
        let (mut r, c) = (k / self.cols, k % self.cols);
        for _ in 0..self.cfg.beam_length {
            if r == 0 {
                break;
            }
            r -= 1;
            let cell = r * self.cols + c;
            match self.cells[cell] {
                Cell::Wall => break,
                Cell::Waste => {
                    self.cells[cell] = Cell::Empty;
                    self.waste_cleaned[agent] += 1;
                }
                _ => {}
            }
        }
    }

    fn spawn_cleanup(&mut self) {
        let density = self.waste_density();
        let (rest, dep) = (self.cfg.restoration_threshold, self.cfg.depletion_threshold);
        if density >= dep {
            return;
        }
        let apple_p = if density <= rest {
            self.cfg.apple_respawn
        } else {
            (1.0 - (density - rest) / (dep - rest)) * self.cfg.apple_respawn
        };
        for idx in 0..self.apple_cells.len() {
            let k = self.apple_cells[idx];
            if self.cells[k] != Cell::Empty || self.occupant[k].is_some() {
                continue;
            }
            let draw = self.rng.gen::<f64>();
            self.audit.apple_trials += 1;
            self.audit.apple_probability_sum += apple_p;
            if draw < apple_p {
                self.cells[k] = Cell::Apple;
                self.audit.apple_spawns += 1;
            }
        }
        // Clean waste-field cells are tried in random order until one spawns.
        let mut candidates: Vec<usize> =
            self.waste_cells.iter().copied().filter(|&k| self.cells[k] == Cell::Empty).collect();
        candidates.shuffle(&mut self.rng);
        for k in candidates {
            let draw = self.rng.gen::<f64>();
            self.audit.waste_trials += 1;
            self.audit.waste_probability_sum += self.cfg.waste_spawn;
            if draw < self.cfg.waste_spawn {
                self.cells[k] = Cell::Waste;
                self.audit.waste_spawns += 1;
                break;
            }
        }
    }

    fn apples_within(&self, k: usize) -> usize {
        let (r0, c0) = ((k / self.cols) as isize, (k % self.cols) as isize);
        let mut count = 0;
        for dr in -2isize..=2 {
            let span = 2 - dr.abs();
            for dc in -span..=span {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (r, c) = (r0 + dr, c0 + dc);
                if r >= 0 && c >= 0 && r < self.rows as isize && c < self.cols as isize {
                    count += (self.cells[r as usize * self.cols + c as usize] == Cell::Apple) as usize;
                }
            }
        }
        count
    }

    fn spawn_harvest(&mut self) {
        // Probabilities are computed from the grid before this tick's spawns.
        let eligible: Vec<(usize, usize)> = self
            .apple_cells
            .iter()
            .copied()
            .filter(|&k| self.cells[k] == Cell::Empty && self.occupant[k].is_none())
            .map(|k| (k, self.apples_within(k).min(3)))
            .collect();
        for (k, class) in eligible {
            let draw = self.rng.gen::<f64>();
            self.audit.harvest_trials[class] += 1;
            if draw < self.cfg.harvest_spawn[class] {
                self.cells[k] = Cell::Apple;
                self.audit.harvest_spawns[class] += 1;
            }
        }
    }
}
