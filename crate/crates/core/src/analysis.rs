//! Estimators over trajectory records: periodic snapshots, leader spacing,
//! the speed/spacing piecewise-linear fit, moving-observer neighbourhood
//! speeds, lateral histograms and a lane-formation statistic.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::geometry::{wrap_dx, BodyShape, ModeClass, RoadGeometry};
use crate::trajectory::{TrajectoryRecord, TrajectoryRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("{name} must be strictly positive (got {value})")]
    NotPositive { name: &'static str, value: f64 },
    #[error("snapshot period {period} is shorter than the recording interval {interval}")]
    PeriodBelowResolution { period: f64, interval: f64 },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
}

fn positive(name: &'static str, value: f64) -> Result<(), AnalysisError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(AnalysisError::NotPositive { name, value })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Recorded time the snapshot was taken from.
    pub t: f64,
    pub rows: Vec<TrajectoryRow>,
}

/// One snapshot per `offset + n * period` up to the end of the record, each
/// taken at the nearest recorded time.
pub fn extract_snapshots(
    record: &TrajectoryRecord,
    period: f64,
    offset: f64,
) -> Result<Vec<Snapshot>, AnalysisError> {
    positive("period", period)?;
    let times = record.times();
    if let Some(interval) = times.windows(2).map(|w| w[1] - w[0]).min_by(f64::total_cmp) {
        // small slack so that period == interval is accepted despite rounding
        if period < interval * (1.0 - 1e-9) {
            return Err(AnalysisError::PeriodBelowResolution { period, interval });
        }
    }
    let Some(&t_max) = times.last() else {
        return Ok(Vec::new());
    };
    let slack = 1e-9 * t_max.abs().max(1.0);
    let mut out = Vec::new();
    let mut n = 0u64;
    loop {
        let target = offset + n as f64 * period;
        if target > t_max + slack {
            break;
        }
        n += 1;
        if target < times[0] - slack {
            continue;
        }
        let t = nearest(&times, target);
        if out.last().is_some_and(|s: &Snapshot| s.t == t) {
            continue;
        }
        let rows = record.rows.iter().filter(|r| r.t == t).cloned().collect();
        out.push(Snapshot { t, rows });
    }
    Ok(out)
}

fn nearest(sorted: &[f64], x: f64) -> f64 {
    let n = sorted.partition_point(|&v| v < x);
    match (n.checked_sub(1).map(|k| sorted[k]), sorted.get(n)) {
        (Some(a), Some(&b)) => {
            if x - a <= b - x {
                a
            } else {
                b
            }
        }
        (Some(a), None) => a,
        (None, Some(&b)) => b,
        (None, None) => x,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacingPoint {
    pub id: u32,
    pub mode: ModeClass,
    pub leader: u32,
    pub leader_mode: ModeClass,
    /// Center-to-center distance to the closest overlapping leader.
    pub spacing: f64,
    pub v: f64,
}

fn half_width(mode: ModeClass) -> f64 {
    BodyShape::for_mode(mode).semi_lateral
}

/// For each agent, the distance to the nearest agent ahead whose lateral
/// extent overlaps its own. Agents without such a leader are omitted.
/// `period` enables the minimum-image convention along the road.
pub fn pairwise_spacing(rows: &[TrajectoryRow], period: Option<f64>) -> Vec<SpacingPoint> {
    rows.iter()
        .filter_map(|a| {
            rows.iter()
                .filter(|b| b.id != a.id)
                .filter_map(|b| {
                    let dx = b.x - a.x;
                    let dx = period.map_or(dx, |p| wrap_dx(dx, p));
                    let dy = b.y - a.y;
                    (dx > 0.0 && dy.abs() < half_width(a.mode) + half_width(b.mode))
                        .then(|| (dx.hypot(dy), b))
                })
                .min_by(|p, q| p.0.total_cmp(&q.0))
                .map(|(spacing, b)| SpacingPoint {
                    id: a.id,
                    mode: a.mode,
                    leader: b.id,
                    leader_mode: b.mode,
                    spacing,
                    v: a.v,
                })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiecewiseLinearFit {
    /// Spacing where the congested branch meets the plateau.
    pub breakpoint: f64,
    /// Inverse slope of the congested branch.
    pub time_gap: f64,
    pub v_free: f64,
    /// Spacing at which the congested branch reaches zero speed.
    pub jam_spacing: f64,
    pub rms: f64,
    /// Set when the data do not support two regimes; the values then come
    /// from a single straight line.
    pub degenerate: bool,
}

/// Grid resolution of the breakpoint search, in metres.
pub const BREAKPOINT_GRID: f64 = 0.1;
pub const MIN_FIT_POINTS: usize = 10;

/// Least squares of `v = v_free + b * min(s - c, 0)` for a fixed breakpoint.
/// Returns `(v_free, b, rss)`.
fn fit_at(points: &[(f64, f64)], c: f64) -> Option<(f64, f64, f64)> {
    let n = points.len() as f64;
    let (mut su, mut sv, mut suu, mut suv) = (0.0, 0.0, 0.0, 0.0);
    for &(s, v) in points {
        let u = (s - c).min(0.0);
        su += u;
        sv += v;
        suu += u * u;
        suv += u * v;
    }
    let det = n * suu - su * su;
    if det <= 1e-12 * n * suu.max(1.0) {
        return None;
    }
    let b = (n * suv - su * sv) / det;
    let a = (sv - b * su) / n;
    let rss = points
        .iter()
        .map(|&(s, v)| (v - a - b * (s - c).min(0.0)).powi(2))
        .sum();
    Some((a, b, rss))
}

fn line_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let ms = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - ms).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - ms) * (p.1 - mv)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = mv - b * ms;
    let rss = points.iter().map(|p| (p.1 - a - b * p.0).powi(2)).sum();
    (a, b, rss)
}

/// Continuous two-segment fit `v = min(v_free, (s - s0) / T)`: grid search of
/// the breakpoint followed by golden-section refinement.
pub fn fit_speed_spacing(points: &[(f64, f64)]) -> Result<PiecewiseLinearFit, AnalysisError> {
    if points.len() < MIN_FIT_POINTS {
        return Err(AnalysisError::TooFewPoints {
            needed: MIN_FIT_POINTS,
            got: points.len(),
        });
    }
    let mut s: Vec<f64> = points.iter().map(|p| p.0).collect();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    // keep at least two points on each side of the breakpoint
    let (lo, hi) = (s[1], s[n - 2]);

    let rss_at = |c: f64| fit_at(points, c).map_or(f64::INFINITY, |f| f.2);
    let mut best: Option<(f64, f64)> = None;
    // coarser grid only for absurdly wide spacing ranges
    let grid = BREAKPOINT_GRID.max((hi - lo) / 1e5);
    let steps = ((hi - lo) / grid).floor() as usize;
    for k in 0..=steps {
        let c = lo + k as f64 * grid;
        let r = rss_at(c);
        if r.is_finite() && best.is_none_or(|(_, br)| r < br) {
            best = Some((c, r));
        }
    }

    let (line_a, line_b, line_rss) = line_fit(points);
    let degenerate_fit = |rss: f64| {
        let time_gap = if line_b > 0.0 {
            1.0 / line_b
        } else {
            f64::INFINITY
        };
        PiecewiseLinearFit {
            breakpoint: f64::NAN,
            time_gap,
            v_free: f64::NAN,
            jam_spacing: if line_b > 0.0 {
                -line_a / line_b
            } else {
                f64::NAN
            },
            rms: (rss / n as f64).sqrt(),
            degenerate: true,
        }
    };
    let Some((c0, _)) = best else {
        return Ok(degenerate_fit(line_rss));
    };

    let c = golden_section(rss_at, (c0 - grid).max(lo), (c0 + grid).min(hi));
    let (c, (a, b, rss)) = match fit_at(points, c) {
        Some(f) if f.2 <= rss_at(c0) => (c, f),
        _ => (c0, fit_at(points, c0).expect("grid candidate was feasible")),
    };
    let below = s.iter().filter(|&&v| v < c).count();
    let two_regimes = b > 0.0 && below >= 2 && n - below >= 2 && rss < 0.9 * line_rss;
    if !two_regimes {
        return Ok(degenerate_fit(line_rss));
    }
    let time_gap = 1.0 / b;
    Ok(PiecewiseLinearFit {
        breakpoint: c,
        time_gap,
        v_free: a,
        jam_spacing: c - a * time_gap,
        rms: (rss / n as f64).sqrt(),
        degenerate: false,
    })
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if b - a <= 1e-10 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Per-mode distributions of `neighbourhood mean speed - own speed`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObserverSpeeds {
    /// Sorted differences per mode.
    pub differences: BTreeMap<ModeClass, Vec<f64>>,
}

/// Differences within this tolerance do not count as slower.
pub const SLOWER_TOLERANCE: f64 = 1e-9;

impl ObserverSpeeds {
    /// Fraction of samples of `mode` slower than their neighbourhood.
    pub fn fraction_slower(&self, mode: ModeClass) -> Option<f64> {
        let d = self.differences.get(&mode)?;
        (!d.is_empty())
            .then(|| d.iter().filter(|&&x| x > SLOWER_TOLERANCE).count() as f64 / d.len() as f64)
    }

    /// Empirical CDF points `(difference, P(X <= difference))`.
    pub fn cdf(&self, mode: ModeClass) -> Vec<(f64, f64)> {
        let Some(d) = self.differences.get(&mode) else {
            return Vec::new();
        };
        let n = d.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (k, &x) in d.iter().enumerate() {
            let p = (k + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == x => last.1 = p,
                _ => out.push((x, p)),
            }
        }
        out
    }

    /// Histogram density of the differences with bins of width `bin`
    /// aligned on multiples of `bin`.
    pub fn pdf(&self, mode: ModeClass, bin: f64) -> Vec<(f64, f64)> {
        let Some(d) = self.differences.get(&mode).filter(|d| !d.is_empty()) else {
            return Vec::new();
        };
        let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
        for &x in d {
            *counts.entry((x / bin).floor() as i64).or_default() += 1;
        }
        let norm = d.len() as f64 * bin;
        counts
            .into_iter()
            .map(|(k, c)| (k as f64 * bin, c as f64 / norm))
            .collect()
    }
}

/// For every sample, the mean speed of the other agents within `window_x / 2`
/// along the road and `window_t / 2` in time. Samples with an empty
/// neighbourhood are skipped.
pub fn moving_observer_speeds(
    record: &TrajectoryRecord,
    window_x: f64,
    window_t: f64,
    period: Option<f64>,
) -> Result<ObserverSpeeds, AnalysisError> {
    positive("window_x", window_x)?;
    positive("window_t", window_t)?;
    let times = record.times();
    let mut by_time: Vec<Vec<&TrajectoryRow>> = vec![Vec::new(); times.len()];
    for r in &record.rows {
        let k = times.partition_point(|&t| t < r.t);
        by_time[k].push(r);
    }
    let (hx, ht) = (0.5 * window_x, 0.5 * window_t);
    let mut out = ObserverSpeeds::default();
    for r in &record.rows {
        let from = times.partition_point(|&t| t < r.t - ht);
        let to = times.partition_point(|&t| t <= r.t + ht);
        let (mut sum, mut count) = (0.0, 0usize);
        for slice in &by_time[from..to] {
            for o in slice.iter().filter(|o| o.id != r.id) {
                let dx = o.x - r.x;
                let dx = period.map_or(dx, |p| wrap_dx(dx, p));
                if dx.abs() <= hx {
                    sum += o.v;
                    count += 1;
                }
            }
        }
        if count > 0 {
            out.differences
                .entry(r.mode)
                .or_default()
                .push(sum / count as f64 - r.v);
        }
    }
    for d in out.differences.values_mut() {
        d.sort_by(f64::total_cmp);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub origin: f64,
    pub bin: f64,
    pub counts: Vec<usize>,
}

/// Default lateral bin width in metres.
pub const LATERAL_BIN: f64 = 0.25;

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `(bin start, bin end, count, density)` rows.
    pub fn rows(&self) -> Vec<(f64, f64, usize, f64)> {
        let norm = self.total() as f64 * self.bin;
        self.counts
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let a = self.origin + k as f64 * self.bin;
                let density = if norm > 0.0 { c as f64 / norm } else { 0.0 };
                (a, a + self.bin, c, density)
            })
            .collect()
    }
}

/// Lateral positions of `mode` over samples with `t >= t_from`, binned over
/// the road width. Positions outside the road land in the edge bins.
pub fn lateral_histogram(
    record: &TrajectoryRecord,
    mode: ModeClass,
    t_from: f64,
    bin: f64,
    width: f64,
) -> Result<Histogram, AnalysisError> {
    positive("bin", bin)?;
    positive("width", width)?;
    let n_bins = (width / bin).ceil() as usize;
    let mut counts = vec![0usize; n_bins];
    for r in record
        .rows
        .iter()
        .filter(|r| r.mode == mode && r.t >= t_from)
    {
        let k = ((r.y / bin).floor().max(0.0) as usize).min(n_bins - 1);
        counts[k] += 1;
    }
    Ok(Histogram {
        origin: 0.0,
        bin,
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneFormation {
    /// Motorcycle samples within the band around an inter-lane boundary.
    pub boundary: usize,
    /// Motorcycle samples within the band around a lane center.
    pub center: usize,
    pub total: usize,
}

impl LaneFormation {
    pub fn ratio(&self) -> f64 {
        self.boundary as f64 / self.center as f64
    }
}

/// Counts motorcycle samples after `t_from` near lane boundaries and near lane
/// centers, using bands of half-width `band`.
pub fn lane_formation(
    record: &TrajectoryRecord,
    road: &RoadGeometry,
    t_from: f64,
    band: f64,
) -> LaneFormation {
    let boundaries = road.lane_boundaries();
    let centers: Vec<f64> = (0..road.n_lanes).map(|k| road.lane_center(k)).collect();
    let near = |y: f64, lines: &[f64]| lines.iter().any(|l| (y - l).abs() <= band);
    let mut out = LaneFormation {
        boundary: 0,
        center: 0,
        total: 0,
    };
    for r in record
        .rows
        .iter()
        .filter(|r| r.mode == ModeClass::Motorcycle && r.t >= t_from)
    {
        out.total += 1;
        if near(r.y, &boundaries) {
            out.boundary += 1;
        }
        if near(r.y, &centers) {
            out.center += 1;
        }
    }
    out
}
