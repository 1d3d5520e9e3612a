//! Acceptance suite, one line per criterion.
//!
//! Runs with a custom harness so the lines always show up in the test output.
//! Criteria listed in `EXPECTED_RED` are known not to hold for the model as
//! specified; they still run and print FAIL, but do not fail the suite. If
//! one of them starts passing the suite fails so the list gets updated.

use std::process::{Command, ExitCode};
use std::sync::OnceLock;

use glam::DVec2;
use rayon::prelude::*;

use mixtraffic::analysis::{
    extract_snapshots, fit_speed_spacing, lane_formation, pairwise_spacing,
};
use mixtraffic::config;
use mixtraffic::engine::{run, step, RunOutput, SimulationConfig};
use mixtraffic::geometry::{wrap_displacement, AgentState, ModeClass, RoadGeometry};
use mixtraffic::navigation::relax_heading;
use mixtraffic::sampler::{
    find_separation_violation, sample_with_retries, SamplerConfig, SamplerError,
};
use mixtraffic::segmentation::{segment_trajectory, SegmentationConfig, TrajectorySegmentation};
use mixtraffic::TrajectoryRow;

// criterion 1 / 2
const SCENARIO_SEEDS: u64 = 20;
const LANE_PASS_FRACTION: f64 = 0.8;
const LANE_RATIO: f64 = 2.0;
const LANE_BAND: f64 = 1.0;
const LANE_FROM: f64 = 240.0;
// criterion 3
const GAP_STEPS: u64 = 1000;
const GAP_DT: f64 = 0.005;
const GAP_TABLE_STEPS: u64 = 150;
const GAP_REL_TOL: f64 = 1e-9;
// criterion 4
const RELAX_STEPS: usize = 100;
const RELAX_TOL: f64 = 0.10;
// criterion 5
const SAMPLER_SEEDS: u64 = 1000;
const SAMPLER_RETRIES: u32 = 1000;
const Z_99: f64 = 2.5758293035489;
// criterion 6
const FD_PERIOD: f64 = 10.0;
const FD_OFFSET: f64 = 30.0;
const FD_RANGE: (f64, f64) = (0.8, 1.0);
const FD_EXACT_TOL: f64 = 1e-6;
// criterion 7
const SWEEP_STEP: f64 = 0.05;

const EXPECTED_RED: &[u32] = &[2];

type Criterion = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn scenario_runs() -> &'static Vec<(u64, Result<RunOutput, String>)> {
    static RUNS: OnceLock<Vec<(u64, Result<RunOutput, String>)>> = OnceLock::new();
    RUNS.get_or_init(|| {
        (0..SCENARIO_SEEDS)
            .into_par_iter()
            .map(|seed| {
                let cfg = SimulationConfig {
                    seed,
                    ..Default::default()
                };
                (seed, run(&cfg).map_err(|e| e.to_string()))
            })
            .collect()
    })
}

fn collision_freedom() -> Outcome {
    let runs = scenario_runs();
    let failures: Vec<String> = runs
        .iter()
        .filter_map(|(seed, r)| r.as_ref().err().map(|e| format!("seed {seed}: {e}")))
        .collect();
    let steps = SimulationConfig::default().n_steps();
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} seeds x {steps} steps, 0 audit failures", runs.len())
        } else {
            failures.join("; ")
        },
    )
}

fn lane_formation_criterion() -> Outcome {
    let road = RoadGeometry::default();
    let ratios: Vec<f64> = scenario_runs()
        .iter()
        .filter_map(|(_, r)| r.as_ref().ok())
        .map(|out| lane_formation(&out.record, &road, LANE_FROM, LANE_BAND).ratio())
        .collect();
    let hits = ratios.iter().filter(|&&r| r >= LANE_RATIO).count();
    let needed = (LANE_PASS_FRACTION * SCENARIO_SEEDS as f64).ceil() as usize;
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted.get(sorted.len() / 2).copied().unwrap_or(f64::NAN);
    outcome(
        hits >= needed,
        format!(
            "{hits}/{} seeds reach boundary/center >= {LANE_RATIO} (need {needed}); median ratio {median:.3}",
            ratios.len()
        ),
    )
}

/// Car following a stopped car; returns the worst relative deviation from
/// the geometric gap sequence.
fn following_deviation(dt: f64, steps: u64) -> (f64, f64) {
    let mut cfg = SimulationConfig::default();
    cfg.params.dt = dt;
    let t = cfg.params.time_gap;
    let mut leader = AgentState::new(1, ModeClass::Car, DVec2::new(30.0, 6.0), 0.0);
    leader.lane = Some(1);
    let mut follower = AgentState::new(0, ModeClass::Car, DVec2::new(21.0, 6.0), 8.85);
    follower.lane = Some(1);
    let gap0 = 5.0;
    let mut state = vec![follower, leader];
    let mut worst = 0.0f64;
    let mut g = gap0;
    for k in 1..=steps {
        state = step(&state, &cfg, k).expect("following step").0;
        let simulated = wrap_displacement(state[0].position, state[1].position, &cfg.road).x - 4.0;
        let closed = gap0 * (1.0 - dt / t).powi(k as i32);
        worst = worst.max((simulated - closed).abs() / closed);
        g = simulated;
    }
    (worst, g)
}

fn following_oracle() -> Outcome {
    let (dev, last) = following_deviation(GAP_DT, GAP_STEPS);
    let (dev_table, last_table) =
        following_deviation(SimulationConfig::default().params.dt, GAP_TABLE_STEPS);
    outcome(
        dev <= GAP_REL_TOL && dev_table <= GAP_REL_TOL,
        format!(
            "dt={GAP_DT}: {GAP_STEPS} steps, max rel dev {dev:.2e}, final gap {last:.4} m; \
             dt=0.05: {GAP_TABLE_STEPS} steps, max rel dev {dev_table:.2e}, final gap {last_table:.2e} m"
        ),
    )
}

fn angle(v: DVec2) -> f64 {
    v.y.atan2(v.x)
}

fn heading_relaxation() -> Outcome {
    let cfg = SimulationConfig {
        debug_navigation: true,
        ..Default::default()
    };
    let (dt, tau) = (cfg.params.dt, cfg.params.tau);
    let mut m = AgentState::new(0, ModeClass::Motorcycle, DVec2::new(50.0, 6.0), 10.0);
    m.y_init = 8.0;
    let mut state = vec![m];
    let (mut sxy, mut sxx) = (0.0, 0.0);
    let mut errors = Vec::new();
    for k in 1..=RELAX_STEPS {
        let before = angle(state[0].heading);
        let (next, diag) = step(&state, &cfg, k as u64).expect("free motorcycle");
        let lag = angle(diag.navigation[0].desired) - before;
        let rate = (angle(next[0].heading) - before) / dt;
        sxy += lag * rate;
        sxx += lag * lag;
        errors.push(lag.abs());
        state = next;
    }
    let tau_fit = sxx / sxy;

    // frozen target: the lag itself decays geometrically; log-linear fit
    let desired = DVec2::new(10.0, 2.0).normalize();
    let mut h = DVec2::X;
    let (mut st, mut sl, mut stt, mut stl, n) = (0.0, 0.0, 0.0, 0.0, RELAX_STEPS as f64);
    for k in 0..RELAX_STEPS {
        let lag = (angle(desired) - angle(h)).abs().ln();
        let t = k as f64 * dt;
        st += t;
        sl += lag;
        stt += t * t;
        stl += t * lag;
        h = relax_heading(h, desired, &cfg.params);
    }
    let slope = (n * stl - st * sl) / (n * stt - st * st);
    let tau_frozen = -1.0 / slope;

    let y_err = (state[0].position.y - 8.0).abs();
    let decayed = errors[RELAX_STEPS - 1] < 0.1 * errors[0];
    let ok = (tau_fit - tau).abs() <= RELAX_TOL * tau
        && (tau_frozen - tau).abs() <= RELAX_TOL * tau
        && decayed;
    outcome(
        ok,
        format!(
            "rate regression tau={tau_fit:.4} s, frozen-target decay tau={tau_frozen:.4} s (target {tau} +/- {:.0}%); \
             lag {:.4} -> {:.2e} rad, |y - y_init| after {RELAX_STEPS} steps {y_err:.3} m",
            RELAX_TOL * 100.0,
            errors[0],
            errors[RELAX_STEPS - 1]
        ),
    )
}

fn sampler_validity() -> Outcome {
    let base = SimulationConfig::default().sampler_config();
    let results: Vec<Result<(Vec<AgentState>, u32), SamplerError>> = (0..SAMPLER_SEEDS)
        .into_par_iter()
        .map(|seed| {
            sample_with_retries(
                &SamplerConfig {
                    seed,
                    ..base.clone()
                },
                SAMPLER_RETRIES,
            )
        })
        .collect();
    let mut problems = Vec::new();
    let (mut motos, mut total, mut exhausted) = (0usize, 0usize, 0usize);
    for (seed, r) in results.iter().enumerate() {
        let agents = match r {
            Ok((a, _)) => a,
            Err(SamplerError::Exhausted { .. }) => {
                exhausted += 1;
                continue;
            }
            Err(e) => {
                problems.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        if let Some((a, b, d)) = find_separation_violation(agents, &base) {
            problems.push(format!("seed {seed}: {a}-{b} at {d}"));
        }
        for a in agents {
            if a.mode == ModeClass::Car {
                let lane = a.lane.expect("cars carry a lane");
                if a.position.y != base.road.lane_center(lane) {
                    problems.push(format!("seed {seed}: car {} off lane center", a.id));
                }
            } else {
                motos += 1;
            }
        }
        total += agents.len();
    }
    let p = base.p_min;
    let frac = motos as f64 / total as f64;
    let half = Z_99 * (p * (1.0 - p) / total as f64).sqrt();
    let in_interval = (frac - p).abs() <= half;
    outcome(
        problems.is_empty() && in_interval,
        format!(
            "{} accepted, {exhausted} exhausted after {SAMPLER_RETRIES} retries, {} violations; \
             motorcycle fraction {frac:.4} in [{:.4}, {:.4}]: {in_interval}",
            SAMPLER_SEEDS as usize - exhausted,
            problems.len(),
            p - half,
            p + half
        ),
    )
}

fn calibration() -> Outcome {
    let (_, out) = &scenario_runs()[0];
    let Ok(out) = out else {
        return outcome(false, "seed 0 run failed".into());
    };
    let period = RoadGeometry::default().length;
    let points: Vec<(f64, f64)> = extract_snapshots(&out.record, FD_PERIOD, FD_OFFSET)
        .expect("snapshots")
        .iter()
        .flat_map(|s| pairwise_spacing(&s.rows, Some(period)))
        .filter(|p| p.mode == ModeClass::Car && p.leader_mode == ModeClass::Car)
        .map(|p| (p.spacing, p.v))
        .collect();
    let fit = fit_speed_spacing(&points).expect("enough car pairs");
    let sim_ok = !fit.degenerate && fit.time_gap >= FD_RANGE.0 && fit.time_gap <= FD_RANGE.1;

    let synthetic: Vec<(f64, f64)> = (0..100)
        .map(|k| {
            let s = 3.0 + 0.3 * k as f64;
            (s, 10.0f64.min((s - 2.0) / 0.9))
        })
        .collect();
    let exact = fit_speed_spacing(&synthetic).expect("synthetic fit");
    let exact_err = (exact.time_gap - 0.9).abs();
    outcome(
        sim_ok && exact_err <= FD_EXACT_TOL,
        format!(
            "simulated car-car pairs ({} points): T={:.4} s in [{}, {}]; noiseless synthetic |T-0.9|={exact_err:.1e}",
            points.len(),
            fit.time_gap,
            FD_RANGE.0,
            FD_RANGE.1
        ),
    )
}

fn sampled(len: f64, dx: f64, f: impl Fn(f64) -> (f64, f64)) -> Vec<TrajectoryRow> {
    let n = (len / dx).round() as usize;
    (0..=n)
        .map(|k| {
            let x = k as f64 * dx;
            let (y, slope) = f(x);
            TrajectoryRow {
                t: k as f64 * dx / 10.0,
                id: 0,
                mode: ModeClass::Motorcycle,
                x,
                y,
                theta: slope.atan(),
                v: 10.0,
            }
        })
        .collect()
}

fn lane_change(shift: f64) -> Vec<TrajectoryRow> {
    let (approach, width) = (1000.0, 5.0);
    sampled(2.0 * approach, 0.5, |x| {
        let u = (x - approach) / width;
        (
            0.5 * shift * u.tanh(),
            0.5 * shift / width / u.cosh().powi(2),
        )
    })
}

fn segment(rows: &[TrajectoryRow]) -> TrajectorySegmentation {
    segment_trajectory(
        0,
        rows,
        &vec![0.0; rows.len()],
        &SegmentationConfig::default(),
    )
}

fn segmentation_fixtures() -> Outcome {
    let k = 2.0 * std::f64::consts::PI / 50.0;
    let wobble = segment(&sampled(1000.0, 0.5, |x| {
        (0.3 * (k * x).sin(), 0.3 * k * (k * x).cos())
    }));
    let a = wobble.maneuvers() == 0;

    let single = segment(&lane_change(3.5));
    let b = single.maneuvers() == 1 && single.events.len() == 1;

    let mut first_detected = None;
    let mut monotone = true;
    let mut prev = 0;
    for n in 0..=20 {
        let shift = 0.5 + n as f64 * SWEEP_STEP;
        let m = segment(&lane_change(shift)).maneuvers();
        monotone &= m >= prev && m <= 1;
        prev = m;
        if m == 1 && first_detected.is_none() {
            first_detected = Some(shift);
        }
    }
    let c = monotone && first_detected.is_some_and(|s| (s - 1.0).abs() <= SWEEP_STEP + 1e-12);
    outcome(
        a && b && c,
        format!(
            "(a) wobble: {} maneuvers over {} events; (b) 3.5 m change: {} maneuver, {} event; \
             (c) first detection at {:?} m (sweep step {SWEEP_STEP} m)",
            wobble.maneuvers(),
            wobble.events.len(),
            single.maneuvers(),
            single.events.len(),
            first_detected
        ),
    )
}

fn determinism() -> Outcome {
    let cfg = SimulationConfig {
        seed: 17,
        duration: 60.0,
        ..Default::default()
    };
    let csv = |cfg: &SimulationConfig| run(cfg).expect("run").record.to_csv_string();
    let first = csv(&cfg);
    let again = csv(&cfg);
    let parallel = csv(&SimulationConfig {
        parallel: true,
        ..cfg.clone()
    });
    let from_manifest = csv(&config::parse(&config::to_manifest(&cfg)).expect("manifest parses"));

    // through the executable: simulate, then re-run from the written manifest
    let dir = tempfile::tempdir().expect("tempdir");
    let exe = env!("CARGO_BIN_EXE_mixtraffic");
    let simulate = |args: &[&str], out: &std::path::Path| {
        Command::new(exe)
            .arg("simulate")
            .args(args)
            .arg("--out")
            .arg(out)
            .status()
            .expect("spawn")
            .success()
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cli_ok = simulate(&["--set", "seed=17", "--set", "duration=60"], &a)
        && simulate(&["--config", a.join("manifest.txt").to_str().unwrap()], &b);
    let read = |p: std::path::PathBuf| std::fs::read(p).unwrap_or_default();
    let cli_same = cli_ok
        && read(a.join("trajectory.csv")) == read(b.join("trajectory.csv"))
        && read(a.join("trajectory.csv")) == first.as_bytes();

    // a different seed must actually change the output
    let other = csv(&SimulationConfig {
        seed: 18,
        ..cfg.clone()
    });
    let ok =
        first == again && first == parallel && first == from_manifest && cli_same && other != first;
    outcome(
        ok,
        format!(
            "rerun identical: {}, parallel identical: {}, manifest round-trip identical: {}, cli round-trip identical: {}",
            first == again,
            first == parallel,
            first == from_manifest,
            cli_same
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (1, "collision-freedom at full scale", collision_freedom),
        (2, "lane formation", lane_formation_criterion),
        (3, "two-agent following oracle", following_oracle),
        (4, "heading relaxation", heading_relaxation),
        (5, "sampler validity", sampler_validity),
        (6, "calibration round-trip", calibration),
        (7, "segmentation fixtures", segmentation_fixtures),
        (8, "determinism and manifest round-trip", determinism),
    ];
    let mut unexpected = 0;
    for (id, name, check) in criteria {
        let o = check();
        let red = EXPECTED_RED.contains(&id);
        let tag = match (o.passed, red) {
            (true, false) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (expected, see README)",
            (true, true) => "PASS (unexpected, update EXPECTED_RED)",
        };
        if o.passed == red {
            unexpected += 1;
        }
        println!("criterion {id} [{tag}] {name}: {}", o.detail);
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
