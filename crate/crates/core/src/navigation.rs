//! Heading dynamics of motorcycles: perception, anticipation, anisotropic
//! repulsion from agents and curbs, desired direction and relaxation.
//!
//! Every function reads an immutable snapshot, so per-agent evaluation can run
//! in any order (or in parallel) with identical results.

use glam::DVec2;

use crate::geometry::{
    perp, sign_nonneg, AgentState, Curb, GeometryError, PairGeometry, RoadGeometry,
};
use crate::params::ModelParams;

/// Below this norm the desired-direction sum is treated as a cancellation.
const DEGENERATE_NORM: f64 = 1e-12;

/// Direction that steers back to the initial lateral position through a
/// look-ahead point `look_ahead` metres downstream.
pub fn target_direction(agent: &AgentState, look_ahead: f64) -> DVec2 {
    DVec2::new(look_ahead, agent.y_init - agent.position.y).normalize()
}

/// Repulsion from one perceived agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentRepulsion {
    pub other: u32,
    pub anticipated_spacing: f64,
    pub magnitude: f64,
    pub normal: DVec2,
}

/// Repulsion from one curb.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurbRepulsion {
    pub curb: Curb,
    pub magnitude: f64,
    pub normal: DVec2,
}

/// All terms entering the desired direction of one motorcycle.
#[derive(Debug, Clone, PartialEq)]
pub struct NavigationTerms {
    pub agent: u32,
    pub target: DVec2,
    pub neighbours: Vec<AgentRepulsion>,
    pub curbs: Vec<CurbRepulsion>,
    pub desired: DVec2,
}

/// Whether `j` belongs to the perception set of `i` given the pair geometry.
fn perceives(i: &AgentState, target: DVec2, pair: &PairGeometry) -> bool {
    let along_heading = i.heading.dot(pair.unit);
    let along_target = target.dot(pair.unit);
    let ratio = pair.overlap_ratio();
    along_heading > 0.0
        || along_target > 0.0
        || along_heading.abs() <= ratio
        || along_target.abs() <= ratio
}

fn within_cutoff(pair: &PairGeometry, params: &ModelParams) -> bool {
    params.cutoff.is_none_or(|c| pair.spacing <= c)
}

/// Ids of the agents perceived by motorcycle `i`, in input order.
pub fn perceive(
    i: &AgentState,
    all: &[AgentState],
    road: &RoadGeometry,
    params: &ModelParams,
) -> Result<Vec<u32>, GeometryError> {
    let target = target_direction(i, params.look_ahead);
    let mut out = Vec::new();
    for j in all.iter().filter(|j| j.id != i.id) {
        let pair = PairGeometry::between(i, j, road)?;
        if within_cutoff(&pair, params) && perceives(i, target, &pair) {
            out.push(j.id);
        }
    }
    Ok(out)
}

/// Predicted displacement from `i` to `j` after `t_a`, continuing the current
/// periodic image of `j`.
fn predicted_displacement(i: &AgentState, j: &AgentState, pair: &PairGeometry, t_a: f64) -> DVec2 {
    pair.displacement + (j.velocity() - i.velocity()) * t_a
}

fn anticipated_from_pair(i: &AgentState, j: &AgentState, pair: &PairGeometry, t_a: f64) -> f64 {
    let projected = predicted_displacement(i, j, pair, t_a).dot(pair.unit);
    projected.max(pair.radius_sum())
}

/// Spacing between `i` and `j` predicted `t_a` seconds ahead, projected on the
/// current interaction direction and floored at contact.
pub fn anticipated_spacing(
    i: &AgentState,
    j: &AgentState,
    t_a: f64,
    road: &RoadGeometry,
) -> Result<f64, GeometryError> {
    let pair = PairGeometry::between(i, j, road)?;
    Ok(anticipated_from_pair(i, j, &pair, t_a))
}

/// `k (1 + (1 - e0 . e_j) / 2)`: `k` for co-moving, `2k` for head-on.
pub fn anisotropy(target: DVec2, other_heading: DVec2, k: f64) -> f64 {
    k * (1.0 + 0.5 * (1.0 - target.dot(other_heading)))
}

/// Exponential repulsion given the anticipated spacing and the contact distance.
pub fn repulsion_magnitude(intensity: f64, contact: f64, anticipated: f64, range: f64) -> f64 {
    intensity * ((contact - anticipated) / range).exp()
}

/// Dimensionless repulsion exerted by `j` on motorcycle `i`.
pub fn repulsion(
    i: &AgentState,
    j: &AgentState,
    road: &RoadGeometry,
    params: &ModelParams,
) -> Result<f64, GeometryError> {
    let pair = PairGeometry::between(i, j, road)?;
    let target = target_direction(i, params.look_ahead);
    let anticipated = anticipated_from_pair(i, j, &pair, params.t_a);
    Ok(repulsion_magnitude(
        anisotropy(target, j.heading, params.k),
        pair.radius_sum(),
        anticipated,
        params.range,
    ))
}

/// `-sign(v . e0_perp) e0_perp` with `sign(0) = +1`.
pub fn lateral_normal(target: DVec2, toward: DVec2) -> DVec2 {
    let lateral = perp(target);
    -sign_nonneg(toward.dot(lateral)) * lateral
}

fn normal_from_pair(target: DVec2, j: &AgentState, pair: &PairGeometry, t_a: f64) -> DVec2 {
    // from the current center of i to the predicted center of j
    let toward = pair.displacement + j.velocity() * t_a;
    lateral_normal(target, toward)
}

/// Unit normal along which `j` pushes `i`, always orthogonal to the target direction.
pub fn repulsion_normal(
    i: &AgentState,
    j: &AgentState,
    road: &RoadGeometry,
    params: &ModelParams,
) -> Result<DVec2, GeometryError> {
    let pair = PairGeometry::between(i, j, road)?;
    let target = target_direction(i, params.look_ahead);
    Ok(normal_from_pair(target, j, &pair, params.t_a))
}

fn curb_terms_with_target(
    i: &AgentState,
    target: DVec2,
    road: &RoadGeometry,
    params: &ModelParams,
) -> Vec<CurbRepulsion> {
    Curb::BOTH
        .iter()
        .map(|&curb| {
            let toward = curb.direction();
            let distance = road.curb_distance(i.position.y, curb);
            let radius = i.radius_toward(toward);
            CurbRepulsion {
                curb,
                magnitude: repulsion_magnitude(
                    params.k_curb(),
                    radius,
                    distance,
                    params.range_curb(),
                ),
                normal: lateral_normal(target, toward),
            }
        })
        .collect()
}

/// Repulsion from both curbs.
pub fn curb_terms(i: &AgentState, road: &RoadGeometry, params: &ModelParams) -> Vec<CurbRepulsion> {
    curb_terms_with_target(i, target_direction(i, params.look_ahead), road, params)
}

/// Normalized sum of the target direction and every lateral push. Falls back
/// to `current` when the sum cancels out.
pub fn desired_direction(
    target: DVec2,
    neighbours: &[AgentRepulsion],
    curbs: &[CurbRepulsion],
    current: DVec2,
) -> DVec2 {
    let sum = neighbours
        .iter()
        .map(|n| n.magnitude * n.normal)
        .chain(curbs.iter().map(|c| c.magnitude * c.normal))
        .fold(target, |acc, v| acc + v);
    let norm = sum.length();
    if norm < DEGENERATE_NORM {
        current
    } else {
        sum / norm
    }
}

/// One explicit Euler step of the heading relaxation, renormalized.
pub fn relax_heading(heading: DVec2, desired: DVec2, params: &ModelParams) -> DVec2 {
    let next = heading + (desired - heading) * (params.dt / params.tau);
    next.try_normalize().unwrap_or(heading)
}

/// Navigation terms of `agents[index]` against the snapshot `agents`.
pub fn navigation_terms(
    index: usize,
    agents: &[AgentState],
    road: &RoadGeometry,
    params: &ModelParams,
) -> Result<NavigationTerms, GeometryError> {
    let i = &agents[index];
    let target = target_direction(i, params.look_ahead);
    let mut neighbours = Vec::new();
    for (n, j) in agents.iter().enumerate() {
        if n == index {
            continue;
        }
        let pair = PairGeometry::between(i, j, road)?;
        if !within_cutoff(&pair, params) || !perceives(i, target, &pair) {
            continue;
        }
        let anticipated = anticipated_from_pair(i, j, &pair, params.t_a);
        neighbours.push(AgentRepulsion {
            other: j.id,
            anticipated_spacing: anticipated,
            magnitude: repulsion_magnitude(
                anisotropy(target, j.heading, params.k),
                pair.radius_sum(),
                anticipated,
                params.range,
            ),
            normal: normal_from_pair(target, j, &pair, params.t_a),
        });
    }
    let curbs = curb_terms_with_target(i, target, road, params);
    let desired = desired_direction(target, &neighbours, &curbs, i.heading);
    Ok(NavigationTerms {
        agent: i.id,
        target,
        neighbours,
        curbs,
        desired,
    })
}

/// New heading of `agents[index]` after one navigation step.
pub fn next_heading(
    index: usize,
    agents: &[AgentState],
    road: &RoadGeometry,
    params: &ModelParams,
) -> Result<DVec2, GeometryError> {
    let terms = navigation_terms(index, agents, road, params)?;
    Ok(relax_heading(agents[index].heading, terms.desired, params))
}
