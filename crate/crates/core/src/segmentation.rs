//! Microscopic trajectory segmentation.
//!
//! A trajectory is parameterized by arc length `s`. The phase
//! `phi = theta_vehicle - theta_road` has zero gradient `dphi/ds` at the
//! inflection points of the path, where the driver reverses the steering
//! direction. Those steering events cut the trajectory into intervals; each
//! interval gets a convexity from its most central extremum of the lateral
//! offset, and monotonic chains of those extrema shifting by more than the
//! maneuver threshold are lateral maneuvers.

use std::f64::consts::PI;
use std::fmt;

use crate::geometry::wrap_dx;
use crate::trajectory::{TrajectoryRecord, TrajectoryRow};

/// Displacement per step below which a sample counts as stationary.
pub const STATIONARY_STEP: f64 = 0.01;
/// Events closer than this (in arc length) are merged.
pub const EVENT_MERGE_DISTANCE: f64 = 1.0;
/// Lateral shift above which a monotonic chain of extrema is a maneuver.
pub const MANEUVER_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentationConfig {
    pub stationary_step: f64,
    pub merge_distance: f64,
    pub maneuver_threshold: f64,
    /// Road period used to unwrap longitudinal positions of periodic records.
    pub period: Option<f64>,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            stationary_step: STATIONARY_STEP,
            merge_distance: EVENT_MERGE_DISTANCE,
            maneuver_threshold: MANEUVER_THRESHOLD,
            period: None,
        }
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// A stretch of consecutive moving samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhasedRun {
    /// Cumulative arc length over the whole trajectory.
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    /// Phase wrapped into `(-pi, pi]`.
    pub phase: Vec<f64>,
    /// Phase made continuous across the seam, used for gradients.
    pub unwrapped: Vec<f64>,
    /// Signed distance to the left of the road axis through the origin.
    pub lateral: Vec<f64>,
}

impl PhasedRun {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Lateral offset at arc length `s`, linearly interpolated.
    pub fn lateral_at(&self, s: f64) -> f64 {
        interpolate(&self.s, &self.lateral, s)
    }

    pub fn time_at(&self, s: f64) -> f64 {
        interpolate(&self.s, &self.t, s)
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.partition_point(|&v| v < x);
    if n == 0 {
        return ys[0];
    }
    if n >= xs.len() {
        return ys[xs.len() - 1];
    }
    let (x0, x1) = (xs[n - 1], xs[n]);
    if x1 == x0 {
        return ys[n];
    }
    ys[n - 1] + (ys[n] - ys[n - 1]) * (x - x0) / (x1 - x0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseStatus {
    Ok,
    /// Every step was below the stationary threshold.
    Stationary,
    Empty,
}

impl PhaseStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseStatus::Ok => "ok",
            PhaseStatus::Stationary => "stationary",
            PhaseStatus::Empty => "empty",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhasedTrajectory {
    pub runs: Vec<PhasedRun>,
    pub status: PhaseStatus,
}

/// Builds the phase and arc-length parameterization of one vehicle's samples
/// (in time order). `azimuth` holds the road azimuth per sample.
///
/// Stationary steps break the trajectory: each maximal stretch of moving
/// steps becomes its own run, and single isolated samples are dropped.
pub fn compute_phase(
    rows: &[TrajectoryRow],
    azimuth: &[f64],
    config: &SegmentationConfig,
) -> PhasedTrajectory {
    assert_eq!(rows.len(), azimuth.len(), "one azimuth per sample");
    if rows.is_empty() {
        return PhasedTrajectory {
            runs: Vec::new(),
            status: PhaseStatus::Empty,
        };
    }
    let mut x = Vec::with_capacity(rows.len());
    x.push(rows[0].x);
    for w in rows.windows(2) {
        let dx = w[1].x - w[0].x;
        let dx = config.period.map_or(dx, |p| wrap_dx(dx, p));
        x.push(x.last().unwrap() + dx);
    }

    let mut runs = Vec::new();
    let mut current = PhasedRun::default();
    let mut s = 0.0;
    for (n, row) in rows.iter().enumerate() {
        if n > 0 {
            let step = (x[n] - x[n - 1]).hypot(row.y - rows[n - 1].y);
            if step < config.stationary_step {
                if current.len() >= 2 {
                    runs.push(std::mem::take(&mut current));
                } else {
                    current = PhasedRun::default();
                }
            } else {
                s += step;
            }
        }
        let road = azimuth[n];
        let phase = wrap_angle(row.theta - road);
        let unwrapped = match current.unwrapped.last() {
            Some(prev) => prev + wrap_angle(phase - prev),
            None => phase,
        };
        current.s.push(s);
        current.t.push(row.t);
        current.phase.push(phase);
        current.unwrapped.push(unwrapped);
        current
            .lateral
            .push(-road.sin() * x[n] + road.cos() * row.y);
    }
    if current.len() >= 2 {
        runs.push(current);
    }
    let status = if runs.is_empty() {
        PhaseStatus::Stationary
    } else {
        PhaseStatus::Ok
    };
    PhasedTrajectory { runs, status }
}

/// Central-difference gradient of `y` over `x`, one-sided at the ends.
pub fn gradient(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|k| {
            let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
            (y[b] - y[a]) / (x[b] - x[a])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringEvent {
    /// Sample closest to the event.
    pub index: usize,
    pub s: f64,
    pub t: f64,
}

/// Steering events: sign changes of `dphi/ds`.
pub fn detect_steering_events(run: &PhasedRun, merge_distance: f64) -> Vec<SteeringEvent> {
    if run.len() < 3 {
        return Vec::new();
    }
    let g = gradient(&run.s, &run.unwrapped);
    let mut raw = Vec::new();
    let mut last: Option<usize> = None;
    for (k, &gk) in g.iter().enumerate() {
        if gk == 0.0 {
            continue;
        }
        if let Some(p) = last {
            if g[p].signum() != gk.signum() {
                let s = if p + 1 == k {
                    run.s[p] + g[p] / (g[p] - gk) * (run.s[k] - run.s[p])
                } else {
                    // crossed a stretch of exact zeros
                    0.5 * (run.s[p + 1] + run.s[k - 1])
                };
                raw.push(s);
            }
        }
        last = Some(k);
    }

    let mut merged: Vec<Vec<f64>> = Vec::new();
    for s in raw {
        match merged.last_mut() {
            Some(cluster) if s - cluster.last().unwrap() < merge_distance => cluster.push(s),
            _ => merged.push(vec![s]),
        }
    }
    merged
        .into_iter()
        .map(|c| {
            let s = c.iter().sum::<f64>() / c.len() as f64;
            SteeringEvent {
                index: nearest_index(&run.s, s),
                s,
                t: run.time_at(s),
            }
        })
        .collect()
}

fn nearest_index(xs: &[f64], x: f64) -> usize {
    let n = xs.partition_point(|&v| v < x);
    if n == 0 {
        0
    } else if n >= xs.len() {
        xs.len() - 1
    } else if x - xs[n - 1] <= xs[n] - x {
        n - 1
    } else {
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convexity {
    Convex,
    Concave,
}

impl Convexity {
    pub fn as_str(self) -> &'static str {
        match self {
            Convexity::Convex => "convex",
            Convexity::Concave => "concave",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Toward positive lateral offset.
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    LaneKeeping,
    Maneuver(Direction),
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::LaneKeeping => "lane-keeping",
            Classification::Maneuver(Direction::Left) => "maneuver-left",
            Classification::Maneuver(Direction::Right) => "maneuver-right",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub s: f64,
    pub lateral: f64,
    pub convexity: Convexity,
}

/// One inter-event interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub s_start: f64,
    pub s_end: f64,
    pub extremum: Option<Extremum>,
    /// Fewer than three samples: no convexity could be determined.
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentLabel {
    pub s_start: f64,
    pub s_end: f64,
    pub convexity: Option<Convexity>,
    pub classification: Classification,
    /// Net lateral offset change over the segment.
    pub shift: f64,
    pub flagged: bool,
}

/// Splits the run at the events and picks the most central extremum of the
/// detrended lateral offset in each interval.
pub fn intervals(run: &PhasedRun, events: &[SteeringEvent]) -> Vec<Interval> {
    if run.is_empty() {
        return Vec::new();
    }
    let mut bounds = vec![run.s[0]];
    bounds.extend(events.iter().map(|e| e.s));
    bounds.push(*run.s.last().unwrap());

    bounds
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let idx: Vec<usize> = (0..run.len())
                .filter(|&k| run.s[k] >= a && run.s[k] <= b)
                .collect();
            if idx.len() < 3 {
                return Interval {
                    s_start: a,
                    s_end: b,
                    extremum: None,
                    flagged: true,
                };
            }
            Interval {
                s_start: a,
                s_end: b,
                extremum: central_extremum(run, &idx, a, b),
                flagged: false,
            }
        })
        .collect()
}

fn central_extremum(run: &PhasedRun, idx: &[usize], a: f64, b: f64) -> Option<Extremum> {
    let (ya, yb) = (run.lateral_at(a), run.lateral_at(b));
    let chord = |s: f64| {
        if b > a {
            ya + (yb - ya) * (s - a) / (b - a)
        } else {
            ya
        }
    };
    let d: Vec<f64> = idx
        .iter()
        .map(|&k| run.lateral[k] - chord(run.s[k]))
        .collect();
    let mid = 0.5 * (a + b);
    let mut best: Option<(f64, Extremum)> = None;
    for m in 1..d.len() - 1 {
        let (l, c, r) = (d[m - 1], d[m], d[m + 1]);
        let convexity = if c <= l && c <= r && (c < l || c < r) {
            Convexity::Convex
        } else if c >= l && c >= r && (c > l || c > r) {
            Convexity::Concave
        } else {
            continue;
        };
        let s = run.s[idx[m]];
        let dist = (s - mid).abs();
        if best.is_none_or(|(bd, _)| dist < bd) {
            best = Some((
                dist,
                Extremum {
                    s,
                    lateral: run.lateral[idx[m]],
                    convexity,
                },
            ));
        }
    }
    best.map(|(_, e)| e)
}

/// Monotonic chains of consecutive extrema, as pairs of indices into
/// `extrema`. Consecutive chains share their turning extremum.
fn monotonic_chains(extrema: &[Extremum]) -> Vec<(usize, usize)> {
    let mut chains = Vec::new();
    if extrema.len() < 2 {
        return chains;
    }
    let mut start = 0;
    let mut dir = 0.0f64;
    for k in 1..extrema.len() {
        let step = extrema[k].lateral - extrema[k - 1].lateral;
        let sign = if step > 0.0 {
            1.0
        } else if step < 0.0 {
            -1.0
        } else {
            0.0
        };
        if sign != 0.0 && dir != 0.0 && sign != dir {
            chains.push((start, k - 1));
            start = k - 1;
        }
        if sign != 0.0 {
            dir = sign;
        }
    }
    chains.push((start, extrema.len() - 1));
    chains
}

/// Labels a run. The returned segments partition the run: maneuvers span from
/// the first to the last extremum of their chain, and the remaining pieces of
/// each interval are lane-keeping with that interval's convexity.
pub fn classify_segments(
    run: &PhasedRun,
    events: &[SteeringEvent],
    threshold: f64,
) -> Vec<SegmentLabel> {
    let ivs = intervals(run, events);
    let chosen: Vec<(usize, Extremum)> = ivs
        .iter()
        .enumerate()
        .filter_map(|(n, iv)| iv.extremum.map(|e| (n, e)))
        .collect();
    let extrema: Vec<Extremum> = chosen.iter().map(|(_, e)| *e).collect();

    // (s_start, s_end, interval of the start extremum, direction)
    let maneuvers: Vec<(f64, f64, usize, Direction)> = monotonic_chains(&extrema)
        .into_iter()
        .filter_map(|(a, b)| {
            let shift = extrema[b].lateral - extrema[a].lateral;
            (shift.abs() > threshold).then(|| {
                let dir = if shift > 0.0 {
                    Direction::Left
                } else {
                    Direction::Right
                };
                (extrema[a].s, extrema[b].s, chosen[a].0, dir)
            })
        })
        .collect();

    let label = |s_start: f64, s_end: f64, convexity, classification, flagged| SegmentLabel {
        s_start,
        s_end,
        convexity,
        classification,
        shift: run.lateral_at(s_end) - run.lateral_at(s_start),
        flagged,
    };
    let mut out = Vec::new();
    let mut cursor = ivs.first().map_or(0.0, |iv| iv.s_start);
    let mut pending = maneuvers.iter().peekable();
    for iv in &ivs {
        let convexity = iv.extremum.map(|e| e.convexity);
        while cursor < iv.s_end {
            match pending.peek() {
                Some(&&(a, b, start_iv, dir)) if a < iv.s_end => {
                    if cursor < a {
                        out.push(label(
                            cursor,
                            a,
                            convexity,
                            Classification::LaneKeeping,
                            iv.flagged,
                        ));
                    }
                    let start_convexity = ivs[start_iv].extremum.map(|e| e.convexity);
                    out.push(label(
                        a,
                        b,
                        start_convexity,
                        Classification::Maneuver(dir),
                        false,
                    ));
                    cursor = b;
                    pending.next();
                }
                _ => {
                    out.push(label(
                        cursor,
                        iv.s_end,
                        convexity,
                        Classification::LaneKeeping,
                        iv.flagged,
                    ));
                    cursor = iv.s_end;
                }
            }
        }
        if iv.s_start == iv.s_end && out.last().is_none_or(|l| l.s_end < iv.s_start) {
            out.push(label(
                cursor,
                cursor,
                convexity,
                Classification::LaneKeeping,
                iv.flagged,
            ));
        }
    }
    out
}

/// Segmentation of one vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySegmentation {
    pub id: u32,
    pub status: PhaseStatus,
    pub events: Vec<SteeringEvent>,
    pub segments: Vec<SegmentLabel>,
}

impl TrajectorySegmentation {
    pub fn maneuvers(&self) -> usize {
        self.segments
            .iter()
            .filter(|s| matches!(s.classification, Classification::Maneuver(_)))
            .count()
    }

    pub fn flagged(&self) -> usize {
        self.segments.iter().filter(|s| s.flagged).count()
    }
}

/// Full pipeline for one vehicle's samples.
pub fn segment_trajectory(
    id: u32,
    rows: &[TrajectoryRow],
    azimuth: &[f64],
    config: &SegmentationConfig,
) -> TrajectorySegmentation {
    let phased = compute_phase(rows, azimuth, config);
    let mut events = Vec::new();
    let mut segments = Vec::new();
    for run in &phased.runs {
        let ev = detect_steering_events(run, config.merge_distance);
        segments.extend(classify_segments(run, &ev, config.maneuver_threshold));
        events.extend(ev);
    }
    TrajectorySegmentation {
        id,
        status: phased.status,
        events,
        segments,
    }
}

/// Segments every vehicle of a record. The road azimuth comes from the
/// record's per-row column when present, otherwise from `road_azimuth`.
pub fn segment_record(
    record: &TrajectoryRecord,
    road_azimuth: f64,
    config: &SegmentationConfig,
) -> Vec<TrajectorySegmentation> {
    record
        .ids()
        .into_iter()
        .map(|id| {
            let idx = record.indices_of(id);
            let rows: Vec<TrajectoryRow> = idx.iter().map(|&n| record.rows[n].clone()).collect();
            let azimuth: Vec<f64> = match &record.road_azimuth {
                Some(col) => idx.iter().map(|&n| col[n]).collect(),
                None => vec![road_azimuth; rows.len()],
            };
            segment_trajectory(id, &rows, &azimuth, config)
        })
        .collect()
}
