//! Deterministic 2D team-shooter: two learnable white cubes against one
//! scripted red turret that can only turn in place.
//!
//! Headings are in degrees, clockwise from +y ("north"), so a heading `h`
//! points along `(sin h, cos h)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_WHITES: usize = 2;
pub const NUM_ACTIONS: usize = 7;
/// Length of the vector produced by [`observe`].
pub const OBS_DIM: usize = 16;
/// Unit id used for the red cube in attack events; whites are `0` and `1`.
pub const RED_ID: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArenaConfig {
    pub arena_size_m: f64,
    pub tick_seconds: f64,
    pub white_speed_m_per_tick: f64,
    pub gun_range_m: f64,
    pub gun_cooldown_ticks: u32,
    pub gun_damage_hp: u32,
    pub bomb_range_m: f64,
    pub bomb_cooldown_ticks: u32,
    pub bomb_damage_hp: u32,
    pub red_hp: u32,
    pub white_hp: u32,
    pub red_aim_range_m: f64,
    pub red_fire_range_m: f64,
    pub red_fire_cooldown_ticks: u32,
    pub red_turn_deg_per_tick: f64,
    pub red_aim_tolerance_deg: f64,
    pub max_ticks: u32,
    pub win_bonus: f64,
    pub loss_penalty: f64,
    pub damage_dealt_reward_per_hp: f64,
    pub damage_taken_penalty_per_hp: f64,
    /// Charged every tick, so stalling until the timeout is never free.
    pub time_penalty_per_tick: f64,
    pub spawn_jitter_m: f64,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        Self {
            arena_size_m: 40.0,
            tick_seconds: 0.5,
            white_speed_m_per_tick: 2.0,
            gun_range_m: 20.0,
            gun_cooldown_ticks: 4,
            gun_damage_hp: 1,
            bomb_range_m: 15.0,
            bomb_cooldown_ticks: 6,
            bomb_damage_hp: 2,
            red_hp: 8,
            white_hp: 2,
            red_aim_range_m: 100.0,
            red_fire_range_m: 20.0,
            red_fire_cooldown_ticks: 6,
            red_turn_deg_per_tick: 45.0,
            red_aim_tolerance_deg: 10.0,
            max_ticks: 240,
            win_bonus: 5.0,
            loss_penalty: 5.0,
            damage_dealt_reward_per_hp: 1.0,
            damage_taken_penalty_per_hp: 0.5,
            time_penalty_per_tick: 0.2,
            spawn_jitter_m: 2.0,
        }
    }
}

impl ArenaConfig {
    /// Lists every violated invariant, prefixed with `arena.`.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut positive = |name: &str, value: f64| {
            if !(value.is_finite() && value > 0.0) {
                v.push(format!(
                    "arena.{name} must be strictly positive (got {value})"
                ));
            }
        };
        positive("arena_size_m", self.arena_size_m);
        positive("tick_seconds", self.tick_seconds);
        positive("white_speed_m_per_tick", self.white_speed_m_per_tick);
        positive("gun_range_m", self.gun_range_m);
        positive("gun_cooldown_ticks", self.gun_cooldown_ticks as f64);
        positive("gun_damage_hp", self.gun_damage_hp as f64);
        positive("bomb_range_m", self.bomb_range_m);
        positive("bomb_cooldown_ticks", self.bomb_cooldown_ticks as f64);
        positive("bomb_damage_hp", self.bomb_damage_hp as f64);
        positive("red_hp", self.red_hp as f64);
        positive("white_hp", self.white_hp as f64);
        positive("red_aim_range_m", self.red_aim_range_m);
        positive("red_fire_range_m", self.red_fire_range_m);
        positive(
            "red_fire_cooldown_ticks",
            self.red_fire_cooldown_ticks as f64,
        );
        positive("red_turn_deg_per_tick", self.red_turn_deg_per_tick);
        positive("red_aim_tolerance_deg", self.red_aim_tolerance_deg);
        positive("max_ticks", self.max_ticks as f64);
        if self.gun_range_m <= self.bomb_range_m {
            v.push(format!(
                "arena.gun_range_m ({}) must exceed arena.bomb_range_m ({})",
                self.gun_range_m, self.bomb_range_m
            ));
        }
        if self.bomb_damage_hp <= self.gun_damage_hp {
            v.push(format!(
                "arena.bomb_damage_hp ({}) must exceed arena.gun_damage_hp ({})",
                self.bomb_damage_hp, self.gun_damage_hp
            ));
        }
        if self.red_aim_range_m < self.red_fire_range_m {
            v.push(format!(
                "arena.red_aim_range_m ({}) must be >= arena.red_fire_range_m ({})",
                self.red_aim_range_m, self.red_fire_range_m
            ));
        }
        for (name, value) in [
            ("win_bonus", self.win_bonus),
            ("loss_penalty", self.loss_penalty),
            (
                "damage_dealt_reward_per_hp",
                self.damage_dealt_reward_per_hp,
            ),
            (
                "damage_taken_penalty_per_hp",
                self.damage_taken_penalty_per_hp,
            ),
            ("time_penalty_per_tick", self.time_penalty_per_tick),
        ] {
            if !value.is_finite() {
                v.push(format!("arena.{name} must be finite"));
            }
        }
        if !(self.spawn_jitter_m.is_finite() && self.spawn_jitter_m >= 0.0) {
            v.push("arena.spawn_jitter_m must be >= 0".to_string());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    pub fn center(&self) -> [f64; 2] {
        [self.arena_size_m / 2.0, self.arena_size_m / 2.0]
    }

    /// Spawn anchors: opposite corners of the arena.
    pub fn spawn_anchors(&self) -> [[f64; 2]; NUM_WHITES] {
        [[0.0, 0.0], [self.arena_size_m, self.arena_size_m]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum WhiteAction {
    Stay = 0,
    MoveN = 1,
    MoveS = 2,
    MoveE = 3,
    MoveW = 4,
    FireGun = 5,
    FireBomb = 6,
}

impl WhiteAction {
    pub const ALL: [WhiteAction; NUM_ACTIONS] = [
        WhiteAction::Stay,
        WhiteAction::MoveN,
        WhiteAction::MoveS,
        WhiteAction::MoveE,
        WhiteAction::MoveW,
        WhiteAction::FireGun,
        WhiteAction::FireBomb,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or_else(|| Error::usage(format!("action index {index} outside 0..{NUM_ACTIONS}")))
    }

    fn displacement(self) -> [f64; 2] {
        match self {
            WhiteAction::MoveN => [0.0, 1.0],
            WhiteAction::MoveS => [0.0, -1.0],
            WhiteAction::MoveE => [1.0, 0.0],
            WhiteAction::MoveW => [-1.0, 0.0],
            _ => [0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhiteUnit {
    pub pos: [f64; 2],
    pub hp: u32,
    pub gun_cd: u32,
    pub bomb_cd: u32,
    pub alive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RedUnit {
    pub pos: [f64; 2],
    pub heading_deg: f64,
    pub hp: u32,
    pub fire_cd: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub tick: u32,
    pub white: [WhiteUnit; NUM_WHITES],
    pub red: RedUnit,
    pub rng: ChaCha8Rng,
}

impl WorldState {
    pub fn is_terminal(&self, config: &ArenaConfig) -> bool {
        self.red.hp == 0 || self.white.iter().all(|w| !w.alive) || self.tick >= config.max_ticks
    }

    /// Permanently removes white `k` (hp 0, not alive). Used to probe the
    /// single-white balance of the arena.
    pub fn remove_white(&mut self, k: usize) {
        let w = &mut self.white[k];
        w.hp = 0;
        w.alive = false;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weapon {
    Gun,
    Bomb,
    RedGun,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackEvent {
    pub shooter: usize,
    pub target: usize,
    pub weapon: Weapon,
    pub damage: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ongoing,
    Win,
    Loss,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: WorldState,
    pub reward: f64,
    pub done: bool,
    pub outcome: Outcome,
    pub events: Vec<AttackEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RedCommand {
    pub turn_delta_deg: f64,
    pub fire: bool,
    pub target: Option<usize>,
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Bearing from `from` to `to`, degrees in `[0, 360)`.
pub fn bearing_deg(from: [f64; 2], to: [f64; 2]) -> f64 {
    let b = (to[0] - from[0]).atan2(to[1] - from[1]).to_degrees();
    wrap_360(b)
}

fn wrap_360(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Signed smallest rotation from `from` to `to`, in `(-180, 180]`.
fn angle_diff(to: f64, from: f64) -> f64 {
    let d = (to - from).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

pub fn reset(config: &ArenaConfig, seed: u64) -> Result<WorldState> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let j = config.spawn_jitter_m;
    let size = config.arena_size_m;
    let mut white = [WhiteUnit {
        pos: [0.0, 0.0],
        hp: config.white_hp,
        gun_cd: 0,
        bomb_cd: 0,
        alive: true,
    }; NUM_WHITES];
    for (w, anchor) in white.iter_mut().zip(config.spawn_anchors()) {
        for axis in 0..2 {
            let offset = if j > 0.0 { rng.gen_range(-j..=j) } else { 0.0 };
            w.pos[axis] = (anchor[axis] + offset).clamp(0.0, size);
        }
    }
    Ok(WorldState {
        tick: 0,
        white,
        red: RedUnit {
            pos: config.center(),
            heading_deg: 0.0,
            hp: config.red_hp,
            fire_cd: 0,
        },
        rng,
    })
}

/// Behaviour tree of the red cube: select the nearest living white within
/// aim range (lower index wins ties), rotate toward it, fire when aligned,
/// in range and off cooldown.
pub fn red_controller(state: &WorldState, config: &ArenaConfig) -> RedCommand {
    let idle = RedCommand {
        turn_delta_deg: 0.0,
        fire: false,
        target: None,
    };
    if state.red.hp == 0 {
        return idle;
    }
    let mut target: Option<(usize, f64)> = None;
    for (k, w) in state.white.iter().enumerate() {
        if !w.alive {
            continue;
        }
        let d = distance(state.red.pos, w.pos);
        if d > config.red_aim_range_m {
            continue;
        }
        if target.map_or(true, |(_, best)| d < best) {
            target = Some((k, d));
        }
    }
    let Some((k, dist)) = target else {
        return idle;
    };
    let bearing = bearing_deg(state.red.pos, state.white[k].pos);
    let error = angle_diff(bearing, state.red.heading_deg);
    let max_turn = config.red_turn_deg_per_tick;
    let turn = error.clamp(-max_turn, max_turn);
    let residual = error - turn;
    let fire = residual.abs() <= config.red_aim_tolerance_deg
        && dist <= config.red_fire_range_m
        && state.red.fire_cd == 0;
    RedCommand {
        turn_delta_deg: turn,
        fire,
        target: Some(k),
    }
}

pub fn step(
    state: &WorldState,
    actions: [WhiteAction; NUM_WHITES],
    config: &ArenaConfig,
) -> Result<StepResult> {
    if state.is_terminal(config) {
        return Err(Error::usage(format!(
            "step called on a terminal state (tick {})",
            state.tick
        )));
    }
    let mut next = state.clone();
    let mut events = Vec::new();
    let size = config.arena_size_m;

    for (w, action) in next.white.iter_mut().zip(actions) {
        if !w.alive {
            continue;
        }
        let d = action.displacement();
        w.pos[0] = (w.pos[0] + d[0] * config.white_speed_m_per_tick).clamp(0.0, size);
        w.pos[1] = (w.pos[1] + d[1] * config.white_speed_m_per_tick).clamp(0.0, size);
    }

    let red_hp_before = next.red.hp;
    for (k, action) in actions.iter().enumerate() {
        let w = &mut next.white[k];
        if !w.alive || next.red.hp == 0 {
            continue;
        }
        let dist = distance(w.pos, next.red.pos);
        let (range, cd, cooldown, damage, weapon) = match action {
            WhiteAction::FireGun => (
                config.gun_range_m,
                &mut w.gun_cd,
                config.gun_cooldown_ticks,
                config.gun_damage_hp,
                Weapon::Gun,
            ),
            WhiteAction::FireBomb => (
                config.bomb_range_m,
                &mut w.bomb_cd,
                config.bomb_cooldown_ticks,
                config.bomb_damage_hp,
                Weapon::Bomb,
            ),
            _ => continue,
        };
        if *cd > 0 || dist > range {
            continue;
        }
        *cd = cooldown;
        let dealt = damage.min(next.red.hp);
        next.red.hp -= dealt;
        events.push(AttackEvent {
            shooter: k,
            target: RED_ID,
            weapon,
            damage: dealt,
        });
    }
    let dealt_total = red_hp_before - next.red.hp;

    let mut taken_total = 0;
    if next.red.hp > 0 {
        let cmd = red_controller(&next, config);
        next.red.heading_deg = wrap_360(next.red.heading_deg + cmd.turn_delta_deg);
        if let (true, Some(k)) = (cmd.fire, cmd.target) {
            next.red.fire_cd = config.red_fire_cooldown_ticks;
            let w = &mut next.white[k];
            let dealt = 1.min(w.hp);
            w.hp -= dealt;
            if w.hp == 0 {
                w.alive = false;
            }
            taken_total += dealt;
            events.push(AttackEvent {
                shooter: RED_ID,
                target: k,
                weapon: Weapon::RedGun,
                damage: dealt,
            });
        }
    }

    for w in next.white.iter_mut() {
        w.gun_cd = w.gun_cd.saturating_sub(1);
        w.bomb_cd = w.bomb_cd.saturating_sub(1);
    }
    next.red.fire_cd = next.red.fire_cd.saturating_sub(1);
    next.tick += 1;

    let outcome = if next.red.hp == 0 {
        Outcome::Win
    } else if next.white.iter().all(|w| !w.alive) {
        Outcome::Loss
    } else if next.tick >= config.max_ticks {
        Outcome::Timeout
    } else {
        Outcome::Ongoing
    };
    let mut reward = config.damage_dealt_reward_per_hp * dealt_total as f64
        - config.damage_taken_penalty_per_hp * taken_total as f64
        - config.time_penalty_per_tick;
    match outcome {
        Outcome::Win => reward += config.win_bonus,
        Outcome::Loss | Outcome::Timeout => reward -= config.loss_penalty,
        _ => {}
    }
    Ok(StepResult {
        next_state: next,
        reward,
        done: outcome != Outcome::Ongoing,
        outcome,
        events,
    })
}

/// Fixed-length observation of the global state.
///
/// Layout: for each white `[x, y, hp, gun_cd, bomb_cd, alive]`, then red
/// `[sin(heading), cos(heading), hp, fire_cd]`. Positions are divided by the
/// arena side, HP and cooldowns by their configured maxima.
pub fn observe(state: &WorldState, config: &ArenaConfig) -> [f64; OBS_DIM] {
    let mut obs = [0.0; OBS_DIM];
    for (k, w) in state.white.iter().enumerate() {
        let o = &mut obs[k * 6..k * 6 + 6];
        o[0] = w.pos[0] / config.arena_size_m;
        o[1] = w.pos[1] / config.arena_size_m;
        o[2] = w.hp as f64 / config.white_hp as f64;
        o[3] = w.gun_cd as f64 / config.gun_cooldown_ticks as f64;
        o[4] = w.bomb_cd as f64 / config.bomb_cooldown_ticks as f64;
        o[5] = if w.alive { 1.0 } else { 0.0 };
    }
    let h = state.red.heading_deg.to_radians();
    obs[12] = h.sin();
    obs[13] = h.cos();
    obs[14] = state.red.hp as f64 / config.red_hp as f64;
    obs[15] = state.red.fire_cd as f64 / config.red_fire_cooldown_ticks as f64;
    obs
}
