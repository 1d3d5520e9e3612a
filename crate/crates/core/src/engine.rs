//! Time stepping: synchronous three-phase update, periodic wrapping, collision
//! audit and trajectory recording.
//!
//! Phase 1 relaxes every motorcycle heading against the snapshot at `t`.
//! Phase 2 computes every speed from the updated headings and the unchanged
//! positions. Phase 3 moves all agents. Phases 1 and 2 read an immutable
//! snapshot, so they fan out over agents without affecting the result.

use glam::DVec2;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{
    wrap_displacement, AgentState, Curb, GeometryError, ModeClass, RoadGeometry,
};
use crate::navigation::{navigation_terms, relax_heading, NavigationTerms};
use crate::params::{ModelParams, ParamError};
use crate::sampler::{sample_with_retries, SamplerConfig, SamplerError};
use crate::speed::{speed_terms, SpeedError, SpeedTerms};
use crate::trajectory::{TrajectoryRecord, TrajectoryRow};

/// Slack absorbing floating-point wrap artifacts in the audit.
pub const AUDIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// A failed collision audit.
#[derive(Debug, Clone, PartialEq)]
pub enum AuditFailure {
    Overlap {
        step: u64,
        agent: u32,
        other: u32,
        deficit: f64,
    },
    Curb {
        step: u64,
        agent: u32,
        curb: Curb,
        deficit: f64,
    },
}

impl std::fmt::Display for AuditFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AuditFailure::Overlap {
                step,
                agent,
                other,
                deficit,
            } => write!(
                f,
                "step {step}: agents {agent} and {other} overlap, spacing deficit {deficit:.6e} m"
            ),
            AuditFailure::Curb {
                step,
                agent,
                curb,
                deficit,
            } => write!(
                f,
                "step {step}: agent {agent} penetrates the {} curb by {deficit:.6e} m",
                curb.as_str()
            ),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("collision audit failed at {0}")]
    Collision(AuditFailure),
    #[error("step {step}: {source}")]
    Speed { step: u64, source: SpeedError },
    #[error("step {step}: {source}")]
    Geometry { step: u64, source: GeometryError },
}

/// Initial-placement settings that live in the simulation config.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub p_min: f64,
    /// Vehicles per kilometre per lane.
    pub density: f64,
    pub k_candidates: usize,
    pub max_retries: u32,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self {
            r_min: 3.0,
            r_max: 6.0,
            p_min: 0.25,
            density: 100.0,
            k_candidates: 30,
            max_retries: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub road: RoadGeometry,
    pub params: ModelParams,
    pub placement: PlacementConfig,
    /// Simulated time in seconds.
    pub duration: f64,
    pub record_every: u64,
    pub seed: u64,
    pub parallel: bool,
    pub debug_navigation: bool,
    pub debug_speed: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            road: RoadGeometry::default(),
            params: ModelParams::default(),
            placement: PlacementConfig::default(),
            duration: 300.0,
            record_every: 20,
            seed: 0,
            parallel: false,
            debug_navigation: false,
            debug_speed: false,
        }
    }
}

impl SimulationConfig {
    /// Number of agents implied by the density.
    pub fn target_count(&self) -> usize {
        (self.placement.density * self.road.n_lanes as f64 * self.road.length / 1000.0).round()
            as usize
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            road: self.road,
            r_min: self.placement.r_min,
            r_max: self.placement.r_max,
            p_min: self.placement.p_min,
            target_count: self.target_count(),
            seed: self.seed,
            k_candidates: self.placement.k_candidates,
            v0_moto: self.params.v0_moto,
            v0_car: self.params.v0_car,
        }
    }

    /// Number of integration steps covering `duration`.
    pub fn n_steps(&self) -> u64 {
        (self.duration / self.params.dt).round() as u64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate()?;
        self.sampler_config().validate()?;
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(ConfigError::Invariant(format!(
                "duration must be non-negative (got {})",
                self.duration
            )));
        }
        if self.record_every == 0 {
            return Err(ConfigError::Invariant(
                "record_every must be at least 1".into(),
            ));
        }
        if !(self.placement.density >= 0.0) {
            return Err(ConfigError::Invariant(
                "density must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Per-step diagnostics, collected only when the matching debug flag is set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepDiagnostics {
    pub navigation: Vec<NavigationTerms>,
    pub speed: Vec<SpeedTerms>,
}

fn map_agents<T, F>(n: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// Checks pairwise non-overlap and curb containment.
pub fn audit(agents: &[AgentState], road: &RoadGeometry, step: u64) -> Result<(), AuditFailure> {
    for (n, a) in agents.iter().enumerate() {
        for c in Curb::BOTH {
            let deficit = a.radius_toward(c.direction()) - road.curb_distance(a.position.y, c);
            if deficit > AUDIT_TOLERANCE {
                return Err(AuditFailure::Curb {
                    step,
                    agent: a.id,
                    curb: c,
                    deficit,
                });
            }
        }
        for b in &agents[n + 1..] {
            let d = wrap_displacement(a.position, b.position, road);
            let s = d.length();
            let contact = if s > 0.0 {
                let u = d / s;
                a.radius_toward(u) + b.radius_toward(-u)
            } else {
                a.shape.semi_lateral + b.shape.semi_lateral
            };
            if contact - s > AUDIT_TOLERANCE {
                return Err(AuditFailure::Overlap {
                    step,
                    agent: a.id,
                    other: b.id,
                    deficit: contact - s,
                });
            }
        }
    }
    Ok(())
}

/// Advances the state by one step. `step` is the index of the step being
/// taken (1-based) and only labels errors.
pub fn step(
    agents: &[AgentState],
    config: &SimulationConfig,
    step: u64,
) -> Result<(Vec<AgentState>, StepDiagnostics), SimulationError> {
    let road = &config.road;
    let params = &config.params;
    let n = agents.len();

    // phase 1: headings from the t-snapshot
    let nav: Vec<Result<Option<NavigationTerms>, GeometryError>> =
        map_agents(n, config.parallel, |idx| match agents[idx].mode {
            ModeClass::Car => Ok(None),
            ModeClass::Motorcycle => navigation_terms(idx, agents, road, params).map(Some),
        });
    let mut headed = agents.to_vec();
    let mut diagnostics = StepDiagnostics::default();
    for (agent, terms) in headed.iter_mut().zip(nav) {
        let terms = terms.map_err(|source| SimulationError::Geometry { step, source })?;
        if let Some(terms) = terms {
            agent.heading = relax_heading(agent.heading, terms.desired, params);
            if config.debug_navigation {
                diagnostics.navigation.push(terms);
            }
        }
    }

    // phase 2: speeds from updated headings, unchanged positions
    let speeds: Vec<Result<SpeedTerms, SpeedError>> = map_agents(n, config.parallel, |idx| {
        speed_terms(idx, &headed, road, params)
    });

    // phase 3: move
    let mut next = headed.clone();
    for (agent, terms) in next.iter_mut().zip(speeds) {
        let terms = terms.map_err(|source| SimulationError::Speed { step, source })?;
        agent.speed = terms.speed;
        let moved = agent.position + agent.heading * (agent.speed * params.dt);
        agent.position = DVec2::new(road.wrap_x(moved.x), moved.y);
        if config.debug_speed {
            diagnostics.speed.push(terms);
        }
    }

    audit(&next, road, step).map_err(SimulationError::Collision)?;
    Ok((next, diagnostics))
}

/// Everything produced by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub record: TrajectoryRecord,
    pub final_state: Vec<AgentState>,
    /// Placement attempt that succeeded, 0 unless the sampler had to retry.
    pub placement_attempt: u32,
    pub navigation: Vec<(u64, NavigationTerms)>,
    pub speed: Vec<(u64, SpeedTerms)>,
}

pub fn snapshot_rows(agents: &[AgentState], t: f64) -> impl Iterator<Item = TrajectoryRow> + '_ {
    agents.iter().map(move |a| TrajectoryRow {
        t,
        id: a.id,
        mode: a.mode,
        x: a.position.x,
        y: a.position.y,
        theta: a.theta(),
        v: a.speed,
    })
}

/// Samples the initial placement.
pub fn initialize(config: &SimulationConfig) -> Result<(Vec<AgentState>, u32), ConfigError> {
    config.validate()?;
    Ok(sample_with_retries(
        &config.sampler_config(),
        config.placement.max_retries,
    )?)
}

/// Runs the configured scenario from a sampled placement.
pub fn run(config: &SimulationConfig) -> Result<RunOutput, SimulationError> {
    let (agents, attempt) = initialize(config)?;
    let mut out = run_from(agents, config)?;
    out.placement_attempt = attempt;
    Ok(out)
}

/// Runs from an explicit initial state.
pub fn run_from(
    initial: Vec<AgentState>,
    config: &SimulationConfig,
) -> Result<RunOutput, SimulationError> {
    config.params.validate().map_err(ConfigError::from)?;
    if config.record_every == 0 {
        return Err(ConfigError::Invariant("record_every must be at least 1".into()).into());
    }
    audit(&initial, &config.road, 0).map_err(SimulationError::Collision)?;
    let mut record = TrajectoryRecord::default();
    record.rows.extend(snapshot_rows(&initial, 0.0));
    let mut state = initial;
    let mut navigation = Vec::new();
    let mut speed = Vec::new();
    for k in 1..=config.n_steps() {
        let (next, diag) = step(&state, config, k)?;
        state = next;
        navigation.extend(diag.navigation.into_iter().map(|d| (k, d)));
        speed.extend(diag.speed.into_iter().map(|d| (k, d)));
        if k % config.record_every == 0 {
            record
                .rows
                .extend(snapshot_rows(&state, k as f64 * config.params.dt));
        }
    }
    Ok(RunOutput {
        record,
        final_state: state,
        placement_attempt: 0,
        navigation,
        speed,
    })
}
