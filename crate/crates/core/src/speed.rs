//! Longitudinal dynamics: imminent-collision sets, collision-free distances
//! and the first-order optimal-velocity speed update.

use glam::DVec2;
use thiserror::Error;

use crate::geometry::{perp, AgentState, Curb, GeometryError, PairGeometry, RoadGeometry};
use crate::params::ModelParams;

/// `cos(a_w)` at or below this value means travel parallel to the curb.
const PARALLEL_COS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpeedError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("agents {agent} and {other} overlap by {deficit:.3e} m")]
    Overlap {
        agent: u32,
        other: u32,
        deficit: f64,
    },
    #[error("agent {agent} penetrates the {curb} curb by {deficit:.3e} m")]
    CurbPenetration {
        agent: u32,
        curb: &'static str,
        deficit: f64,
    },
}

/// Free distance along the heading; `Unbounded` when nothing constrains it.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum FreeDistance {
    Bounded(f64),
    Unbounded,
}

impl FreeDistance {
    pub fn value(self) -> Option<f64> {
        match self {
            FreeDistance::Bounded(d) => Some(d),
            FreeDistance::Unbounded => None,
        }
    }

    fn min(self, d: f64) -> Self {
        match self {
            FreeDistance::Bounded(c) if c <= d => self,
            _ => FreeDistance::Bounded(d),
        }
    }
}

/// Leaders of `agents[index]`: agents ahead along its (updated) heading whose
/// bodies overlap its corridor. Returned as indices into `agents`.
pub fn imminent_agents(
    index: usize,
    agents: &[AgentState],
    road: &RoadGeometry,
) -> Result<Vec<(usize, PairGeometry)>, GeometryError> {
    let i = &agents[index];
    let lateral = perp(i.heading);
    let mut out = Vec::new();
    for (n, j) in agents.iter().enumerate() {
        if n == index {
            continue;
        }
        let pair = PairGeometry::between(i, j, road)?;
        if i.heading.dot(pair.unit) >= 0.0 && lateral.dot(pair.unit).abs() <= pair.overlap_ratio() {
            out.push((n, pair));
        }
    }
    Ok(out)
}

/// Curbs the heading points toward (inclusive of parallel travel).
pub fn imminent_curbs(agent: &AgentState) -> Vec<Curb> {
    Curb::BOTH
        .into_iter()
        .filter(|c| agent.heading.dot(c.direction()) >= 0.0)
        .collect()
}

/// Smallest net gap to a leader.
pub fn free_distance(
    agent: &AgentState,
    leaders: &[(usize, PairGeometry)],
    agents: &[AgentState],
) -> Result<FreeDistance, SpeedError> {
    let mut out = FreeDistance::Unbounded;
    for (n, pair) in leaders {
        let gap = pair.spacing - pair.radius_sum();
        if gap < 0.0 {
            return Err(SpeedError::Overlap {
                agent: agent.id,
                other: agents[*n].id,
                deficit: -gap,
            });
        }
        out = out.min(gap);
    }
    Ok(out)
}

/// Distance along the heading until the body reaches one of `curbs`.
pub fn free_curb_distance(
    agent: &AgentState,
    curbs: &[Curb],
    road: &RoadGeometry,
) -> Result<FreeDistance, SpeedError> {
    let mut out = FreeDistance::Unbounded;
    for &curb in curbs {
        let toward = curb.direction();
        let clearance = road.curb_distance(agent.position.y, curb) - agent.radius_toward(toward);
        if clearance < 0.0 {
            return Err(SpeedError::CurbPenetration {
                agent: agent.id,
                curb: curb.as_str(),
                deficit: -clearance,
            });
        }
        let cos = agent.heading.dot(toward);
        if cos > PARALLEL_COS {
            out = out.min(clearance / cos);
        }
    }
    Ok(out)
}

/// `min(v0, max(eps, s/T), max(eps, sw/T))`, dropping unbounded terms.
pub fn update_speed(
    desired_speed: f64,
    free: FreeDistance,
    free_curb: FreeDistance,
    params: &ModelParams,
) -> f64 {
    [free, free_curb]
        .into_iter()
        .filter_map(FreeDistance::value)
        .map(|d| (d / params.time_gap).max(params.epsilon))
        .fold(desired_speed, f64::min)
}

/// Diagnostic record of one speed evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedTerms {
    pub agent: u32,
    pub leaders: Vec<u32>,
    pub curbs: Vec<Curb>,
    pub free: FreeDistance,
    pub free_curb: FreeDistance,
    pub speed: f64,
}

/// Speed of `agents[index]`; `agents` must already carry the updated headings.
pub fn speed_terms(
    index: usize,
    agents: &[AgentState],
    road: &RoadGeometry,
    params: &ModelParams,
) -> Result<SpeedTerms, SpeedError> {
    let agent = &agents[index];
    let leaders = imminent_agents(index, agents, road)?;
    let free = free_distance(agent, &leaders, agents)?;
    let (curbs, free_curb) = if agent.is_car() {
        (Vec::new(), FreeDistance::Unbounded)
    } else {
        let curbs = imminent_curbs(agent);
        let d = free_curb_distance(agent, &curbs, road)?;
        (curbs, d)
    };
    Ok(SpeedTerms {
        agent: agent.id,
        leaders: leaders.iter().map(|(n, _)| agents[*n].id).collect(),
        curbs,
        free,
        free_curb,
        speed: update_speed(agent.desired_speed, free, free_curb, params),
    })
}

/// Unit heading helper used by tests and fixtures.
pub fn heading_from_angle(theta: f64) -> DVec2 {
    DVec2::new(theta.cos(), theta.sin())
}
