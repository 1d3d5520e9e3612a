//! Collision-free initial placement by variable-radius Poisson disk sampling.
//!
//! Dart throwing after Bridson, adapted to two exclusion radii. Each sample
//! carries the radius of its class; a pair is accepted when its wrapped
//! distance is at least the smaller of the two radii, so cars keep `r_max`
//! between each other and anything involving a motorcycle keeps `r_min`. The
//! background grid uses cells no smaller than the largest radius and each cell
//! stores a list of samples, so a neighbourhood query only inspects the 3x3
//! block around the candidate. Cars are snapped onto the closest lane center
//! before testing; motorcycles keep their lateral coordinate.
//!
//! Classes are drawn up front from their own random stream and placed largest
//! first. When the active list runs dry the placement alone is retried from a
//! fresh stream, so the class counts of emitted configurations are plain
//! binomial draws whatever the placement difficulty.

use glam::DVec2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{wrap_displacement, AgentState, BodyShape, ModeClass, RoadGeometry};

const CLASS_STREAM: u64 = 0;
const PLACEMENT_STREAM: u64 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("active list exhausted after placing {achieved} of {target} agents")]
    Exhausted { achieved: usize, target: usize },
    #[error("invalid sampler configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub road: RoadGeometry,
    /// Exclusion radius of motorcycle samples.
    pub r_min: f64,
    /// Exclusion radius of car samples.
    pub r_max: f64,
    /// Probability of drawing `r_min` (a motorcycle).
    pub p_min: f64,
    pub target_count: usize,
    pub seed: u64,
    /// Candidate attempts around an active sample before it is retired.
    pub k_candidates: usize,
    pub v0_moto: f64,
    pub v0_car: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            road: RoadGeometry::default(),
            r_min: 3.0,
            r_max: 6.0,
            p_min: 0.25,
            target_count: 30,
            seed: 0,
            k_candidates: 30,
            v0_moto: 10.0,
            v0_car: 8.85,
        }
    }
}

impl SamplerConfig {
    /// Probabilities of the two radii, `[p(r_min), p(r_max)]`.
    pub fn probabilities(&self) -> [f64; 2] {
        [self.p_min, 1.0 - self.p_min]
    }

    pub fn radius_of(&self, mode: ModeClass) -> f64 {
        match mode {
            ModeClass::Motorcycle => self.r_min,
            ModeClass::Car => self.r_max,
        }
    }

    /// Minimum center distance required between two samples.
    pub fn separation(&self, a: ModeClass, b: ModeClass) -> f64 {
        self.radius_of(a).min(self.radius_of(b))
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::Invalid(m.to_string()));
        if !(self.r_min > 0.0 && self.r_max >= self.r_min) {
            return bad("radii must satisfy 0 < r_min <= r_max");
        }
        if !(0.0..=1.0).contains(&self.p_min) {
            return bad("p_min must lie in [0, 1]");
        }
        if self.k_candidates == 0 {
            return bad("k_candidates must be at least 1");
        }
        let road = &self.road;
        if !(road.length > 0.0 && road.lane_width > 0.0 && road.n_lanes > 0) {
            return bad("road must have positive length, lane width and lane count");
        }
        if road.width() < 2.0 * BodyShape::motorcycle().semi_lateral
            || road.lane_width < 2.0 * BodyShape::car().semi_lateral
        {
            return bad("road too narrow for the vehicle bodies");
        }
        Ok(())
    }
}

struct Sample {
    position: DVec2,
    radius: f64,
    mode: ModeClass,
}

/// Cell list over the periodic strip `[0, L) x [0, W]`.
struct Grid {
    cols: usize,
    rows: usize,
    cell_w: f64,
    cell_h: f64,
    cells: Vec<Vec<usize>>,
}

impl Grid {
    fn new(road: &RoadGeometry, min_cell: f64) -> Self {
        let cols = ((road.length / min_cell).floor() as usize).max(1);
        let rows = ((road.width() / min_cell).floor() as usize).max(1);
        Self {
            cols,
            rows,
            cell_w: road.length / cols as f64,
            cell_h: road.width() / rows as f64,
            cells: vec![Vec::new(); cols * rows],
        }
    }

    fn cell_of(&self, p: DVec2) -> (usize, usize) {
        let cx = ((p.x / self.cell_w) as usize).min(self.cols - 1);
        let cy = ((p.y / self.cell_h).max(0.0) as usize).min(self.rows - 1);
        (cx, cy)
    }

    fn insert(&mut self, p: DVec2, idx: usize) {
        let (cx, cy) = self.cell_of(p);
        self.cells[cy * self.cols + cx].push(idx);
    }

    fn neighbours(&self, p: DVec2) -> impl Iterator<Item = usize> + '_ {
        let (cx, cy) = self.cell_of(p);
        let mut cols: Vec<usize> = [self.cols - 1, 0, 1]
            .iter()
            .map(|d| (cx + d) % self.cols)
            .collect();
        cols.sort_unstable();
        cols.dedup();
        let rows = cy.saturating_sub(1)..=(cy + 1).min(self.rows - 1);
        rows.flat_map(move |r| {
            cols.clone()
                .into_iter()
                .flat_map(move |c| self.cells[r * self.cols + c].iter().copied())
        })
    }
}

struct Sampler<'a> {
    config: &'a SamplerConfig,
    rng: ChaCha8Rng,
    grid: Grid,
    samples: Vec<Sample>,
    moto_margin: f64,
}

impl<'a> Sampler<'a> {
    fn new(config: &'a SamplerConfig, rng: ChaCha8Rng) -> Self {
        Self {
            config,
            rng,
            grid: Grid::new(&config.road, config.r_max),
            samples: Vec::new(),
            moto_margin: BodyShape::motorcycle().semi_lateral,
        }
    }

    fn radius_of(&self, mode: ModeClass) -> f64 {
        self.config.radius_of(mode)
    }

    /// Applies the lateral constraint of `mode`; `None` if the candidate leaves the road.
    fn constrain(&self, p: DVec2, mode: ModeClass) -> Option<DVec2> {
        let road = &self.config.road;
        let x = road.wrap_x(p.x);
        match mode {
            ModeClass::Car => {
                if p.y < 0.0 || p.y > road.width() {
                    return None;
                }
                Some(DVec2::new(x, road.lane_center(road.nearest_lane(p.y))))
            }
            ModeClass::Motorcycle => {
                let lo = self.moto_margin;
                let hi = road.width() - self.moto_margin;
                (lo..=hi).contains(&p.y).then_some(DVec2::new(x, p.y))
            }
        }
    }

    fn fits(&self, p: DVec2, radius: f64) -> bool {
        let road = &self.config.road;
        self.grid.neighbours(p).all(|idx| {
            let q = &self.samples[idx];
            wrap_displacement(p, q.position, road).length() >= radius.min(q.radius)
        })
    }

    fn accept(&mut self, position: DVec2, mode: ModeClass) -> usize {
        let idx = self.samples.len();
        self.samples.push(Sample {
            position,
            radius: self.radius_of(mode),
            mode,
        });
        self.grid.insert(position, idx);
        idx
    }

    fn first_sample(&mut self, mode: ModeClass) -> DVec2 {
        let road = self.config.road;
        let x = self.rng.random_range(0.0..road.length);
        let y = match mode {
            ModeClass::Car => road.lane_center(self.rng.random_range(0..road.n_lanes)),
            ModeClass::Motorcycle => self
                .rng
                .random_range(self.moto_margin..=road.width() - self.moto_margin),
        };
        DVec2::new(x, y)
    }

    fn run(mut self, classes: &[ModeClass]) -> Result<Vec<AgentState>, SamplerError> {
        let target = classes.len();
        let Some((&first, rest)) = classes.split_first() else {
            return Ok(Vec::new());
        };
        let p = self.first_sample(first);
        let mut active = vec![self.accept(p, first)];
        let mut pending = rest.iter().copied().peekable();

        while let Some(&mode) = pending.peek() {
            if active.is_empty() {
                break;
            }
            let slot = self.rng.random_range(0..active.len());
            let origin = &self.samples[active[slot]];
            let (origin_pos, origin_radius) = (origin.position, origin.radius);
            let radius = self.radius_of(mode);
            let exclusion = radius.max(origin_radius);
            let mut placed = false;
            for _ in 0..self.config.k_candidates {
                let dist = self.rng.random_range(exclusion..2.0 * exclusion);
                let angle = self.rng.random_range(0.0..std::f64::consts::TAU);
                let raw = origin_pos + dist * DVec2::new(angle.cos(), angle.sin());
                let Some(candidate) = self.constrain(raw, mode) else {
                    continue;
                };
                if self.fits(candidate, radius) {
                    active.push(self.accept(candidate, mode));
                    pending.next();
                    placed = true;
                    break;
                }
            }
            if !placed {
                active.swap_remove(slot);
            }
        }

        if self.samples.len() < target {
            return Err(SamplerError::Exhausted {
                achieved: self.samples.len(),
                target,
            });
        }
        let config = self.config;
        Ok(self
            .samples
            .into_iter()
            .enumerate()
            .map(|(id, s)| {
                let v0 = match s.mode {
                    ModeClass::Car => config.v0_car,
                    ModeClass::Motorcycle => config.v0_moto,
                };
                let mut agent = AgentState::new(id as u32, s.mode, s.position, v0);
                if s.mode == ModeClass::Car {
                    agent.lane = Some(config.road.nearest_lane(s.position.y));
                }
                agent
            })
            .collect())
    }
}

/// Class list for one seed, cars first. Each entry is an independent draw
/// that is a motorcycle with probability `p_min`.
pub fn draw_classes(config: &SamplerConfig) -> Vec<ModeClass> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(CLASS_STREAM);
    let mut classes: Vec<ModeClass> = (0..config.target_count)
        .map(|_| {
            if rng.random_bool(config.p_min) {
                ModeClass::Motorcycle
            } else {
                ModeClass::Car
            }
        })
        .collect();
    // large bodies first
    classes.sort();
    classes
}

fn place(
    config: &SamplerConfig,
    classes: &[ModeClass],
    attempt: u32,
) -> Result<Vec<AgentState>, SamplerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(PLACEMENT_STREAM + u64::from(attempt));
    Sampler::new(config, rng).run(classes)
}

/// Draws `config.target_count` agents with guaranteed pairwise separation,
/// using a single placement attempt.
pub fn sample_initial_positions(config: &SamplerConfig) -> Result<Vec<AgentState>, SamplerError> {
    config.validate()?;
    place(config, &draw_classes(config), 0)
}

/// Runs the sampler, retrying the placement with fresh random streams on
/// exhaustion while keeping the drawn classes. Returns the agents and the
/// index of the successful attempt.
pub fn sample_with_retries(
    config: &SamplerConfig,
    max_retries: u32,
) -> Result<(Vec<AgentState>, u32), SamplerError> {
    config.validate()?;
    let classes = draw_classes(config);
    let mut last = None;
    for attempt in 0..=max_retries {
        match place(config, &classes, attempt) {
            Ok(agents) => return Ok((agents, attempt)),
            Err(e @ SamplerError::Exhausted { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Post-hoc separation check over every pair: returns the first violating pair.
pub fn find_separation_violation(
    agents: &[AgentState],
    config: &SamplerConfig,
) -> Option<(u32, u32, f64)> {
    for (n, a) in agents.iter().enumerate() {
        for b in &agents[n + 1..] {
            let d = wrap_displacement(a.position, b.position, &config.road).length();
            if d < config.separation(a.mode, b.mode) {
                return Some((a.id, b.id, d));
            }
        }
    }
    None
}
