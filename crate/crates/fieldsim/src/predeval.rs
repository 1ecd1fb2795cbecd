//! Offline predictor scoring against the crowd itself. A scenario runs the
//! ground-truth crowd at its own tick, samples sensor-rate windows at the
//! planner step, rolls the predictor along the same scripted robot, and
//! scores per-depth displacement error plus calibration: the fraction of
//! true positions that land inside the predicted two-sigma ellipse. This
//! is the certificate behind letting a rollout stand in for a learned
//! model: it has to be both accurate and honest about its spread before
//! the planner is allowed to trust it.

use crate::crowd::{orca_step, CrowdSim};
use crate::geom::Vec2;
use crate::predict::{
    AgentTrack, AgentTruth, ObservationWindow, Predictor, PREDICT_DT, T_OBS,
};
use crate::statmap::StaticMap;
use std::fmt::Write as _;

#[derive(Debug, Clone)]
pub struct EvalScenario {
    pub region_lo: Vec2,
    pub region_hi: Vec2,
    pub n_agents: usize,
    pub seed: u64,
    /// Ground-truth crowd tick (s). The planner step must be a whole
    /// number of these; 0.1 matches deployment, 0.5 matches the predictor
    /// step exactly.
    pub truth_dt: f64,
    /// Prediction depths to score, each one planner step.
    pub horizon: usize,
    pub robot_start: Vec2,
    pub robot_velocity: Vec2,
    /// Hand the decoder the true agent states at the window's end instead
    /// of only sensed positions. Oracle runs only; deployment never has
    /// these channels.
    pub ground_truth_window: bool,
    /// Whether arrived agents draw fresh goals mid-run, as the deployed
    /// crowd does. Oracle runs freeze intents: a rerolled goal is
    /// unpredictable by construction and would measure the dice, not the
    /// dynamics.
    pub refresh_goals: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct DepthStats {
    pub depth: usize,
    pub mean_err: f64,
    pub max_err: f64,
    /// Fraction of true positions with squared Mahalanobis distance
    /// at most 4 under the predicted Gaussian.
    pub calibration: f64,
}

/// Run one scenario and score one predictor per depth.
pub fn evaluate_predictor<P: Predictor>(
    predictor: &P,
    scenario: &EvalScenario,
    map: &StaticMap,
) -> Vec<DepthStats> {
    let substeps = (PREDICT_DT / scenario.truth_dt).round() as usize;
    assert!(
        substeps >= 1 && (substeps as f64 * scenario.truth_dt - PREDICT_DT).abs() < 1e-9,
        "planner step is not a whole number of truth ticks"
    );
    let total_ticks = (T_OBS - 1 + scenario.horizon) * substeps;
    // One shared robot position per tick; every velocity anyone sees is a
    // difference of two entries, so the truth crowd and the predictor
    // perceive the identical robot.
    let robot_path: Vec<Vec2> = (0..=total_ticks)
        .map(|j| scenario.robot_start + scenario.robot_velocity * (j as f64 * scenario.truth_dt))
        .collect();
    let robot_view = |j: usize| crate::crowd::RobotView {
        position: robot_path[j],
        velocity: (robot_path[j + 1] - robot_path[j]) / scenario.truth_dt,
    };

    let mut sim = CrowdSim::spawn(
        scenario.region_lo,
        scenario.region_hi,
        scenario.n_agents,
        map,
        scenario.robot_start,
        scenario.seed,
    );

    let mut advance = |sim: &mut CrowdSim, j: usize| {
        if scenario.refresh_goals {
            sim.step(Some(robot_view(j)), map, scenario.truth_dt);
        } else {
            let params = sim.params;
            orca_step(&mut sim.agents, Some(robot_view(j)), map, scenario.truth_dt, &params);
        }
    };

    let mut tracks: Vec<Vec<Vec2>> = sim.agents.iter().map(|a| vec![a.position]).collect();
    for k in 0..T_OBS - 1 {
        for s in 0..substeps {
            advance(&mut sim, k * substeps + s);
        }
        for (t, a) in tracks.iter_mut().zip(&sim.agents) {
            t.push(a.position);
        }
    }

    let window = ObservationWindow {
        dt: PREDICT_DT,
        robot: (0..T_OBS).map(|k| robot_path[k * substeps]).collect(),
        agents: sim
            .agents
            .iter()
            .zip(&tracks)
            .map(|(a, t)| AgentTrack {
                id: a.id,
                radius: a.radius,
                positions: t.clone(),
                truth: scenario.ground_truth_window.then_some(AgentTruth {
                    velocity: a.velocity,
                    pref_speed: a.pref_speed,
                    goal: a.goal,
                }),
            })
            .collect(),
    }
    .pad();

    let mut state = predictor.encode(&window);
    let mut stats = Vec::with_capacity(scenario.horizon);
    for k in 1..=scenario.horizon {
        let base = (T_OBS - 1 + k - 1) * substeps;
        for s in 0..substeps {
            advance(&mut sim, base + s);
        }
        let (pred, next) = predictor.step(&state, robot_path[base + substeps]);
        state = next;

        let mut sum = 0.0;
        let mut max: f64 = 0.0;
        let mut inside = 0usize;
        for (p, a) in pred.agents.iter().zip(&sim.agents) {
            debug_assert_eq!(p.id, a.id);
            let err = (p.mean - a.position).norm();
            sum += err;
            max = max.max(err);
            if p.cov.mahalanobis_sq(a.position - p.mean) <= 4.0 {
                inside += 1;
            }
        }
        let n = pred.agents.len() as f64;
        stats.push(DepthStats {
            depth: k,
            mean_err: sum / n,
            max_err: max,
            calibration: inside as f64 / n,
        });
    }
    stats
}

/// Depth-major CSV for predictor comparisons.
pub fn csv_report(entries: &[(&str, u64, Vec<DepthStats>)]) -> String {
    let mut out = String::from("predictor,seed,depth,mean_err_m,max_err_m,calibration\n");
    for (label, seed, stats) in entries {
        for s in stats {
            writeln!(
                out,
                "{label},{seed},{},{:.6},{:.6},{:.6}",
                s.depth, s.mean_err, s.max_err, s.calibration
            )
            .unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::vec2;
    use crate::predict::{CvPredictor, OrcaRollout};

    fn empty_map(origin: Vec2, side: f64) -> StaticMap {
        StaticMap::build(vec![], origin, side, side, 0.5, 0.75)
    }

    fn scenario(seed: u64, truth_dt: f64, ground_truth_window: bool) -> EvalScenario {
        EvalScenario {
            region_lo: vec2(10.0, 10.0),
            region_hi: vec2(50.0, 50.0),
            n_agents: 32,
            seed,
            truth_dt,
            horizon: 8,
            robot_start: vec2(8.0, 30.0),
            robot_velocity: vec2(1.4, 0.0),
            ground_truth_window,
            refresh_goals: !ground_truth_window,
        }
    }

    #[test]
    fn rollout_with_truth_channels_scores_zero_error() {
        let map = empty_map(vec2(0.0, 0.0), 60.0);
        let predictor = OrcaRollout::noiseless(&map);
        for seed in [0u64, 1, 2] {
            let stats = evaluate_predictor(&predictor, &scenario(seed, PREDICT_DT, true), &map);
            assert_eq!(stats.len(), 8);
            for s in &stats {
                assert_eq!(s.mean_err, 0.0, "seed {seed} depth {}", s.depth);
                assert_eq!(s.max_err, 0.0, "seed {seed} depth {}", s.depth);
            }
        }
    }

    #[test]
    fn errors_grow_with_depth_for_both_predictors() {
        let map = empty_map(vec2(0.0, 0.0), 60.0);
        let n_seeds = 10u64;
        let mut cv_err = vec![0.0; 8];
        let mut orca_err = vec![0.0; 8];
        for seed in 0..n_seeds {
            let sc = scenario(seed, 0.1, false);
            for (acc, stats) in [
                (&mut cv_err, evaluate_predictor(&CvPredictor::default(), &sc, &map)),
                (&mut orca_err, evaluate_predictor(&OrcaRollout::new(&map), &sc, &map)),
            ] {
                for (a, s) in acc.iter_mut().zip(&stats) {
                    *a += s.mean_err / n_seeds as f64;
                }
            }
        }
        for errs in [&cv_err, &orca_err] {
            for k in 1..errs.len() {
                assert!(
                    errs[k] >= errs[k - 1] - 1e-6,
                    "depth {k}: {} < {}",
                    errs[k],
                    errs[k - 1]
                );
            }
        }
    }

    /// The crossing robot forces detours the straight-line model cannot
    /// represent, so the rollout should hold a clear accuracy edge at the
    /// deep end of the horizon.
    #[test]
    fn rollout_beats_constant_velocity_under_interaction() {
        let map = empty_map(vec2(0.0, 0.0), 60.0);
        let n_seeds = 10u64;
        let mut cv_deep = 0.0;
        let mut orca_deep = 0.0;
        for seed in 0..n_seeds {
            let sc = scenario(seed, 0.1, false);
            cv_deep += evaluate_predictor(&CvPredictor::default(), &sc, &map)[7].mean_err;
            orca_deep += evaluate_predictor(&OrcaRollout::new(&map), &sc, &map)[7].mean_err;
        }
        assert!(
            orca_deep < cv_deep,
            "rollout {orca_deep:.3} not better than cv {cv_deep:.3}"
        );
    }

    #[test]
    fn rollout_calibration_holds_at_full_depth() {
        let map = empty_map(vec2(0.0, 0.0), 60.0);
        let predictor = OrcaRollout::new(&map);
        let n_seeds = 50u64;
        let mut calibration = 0.0;
        for seed in 0..n_seeds {
            let stats = evaluate_predictor(&predictor, &scenario(seed, 0.1, false), &map);
            calibration += stats[7].calibration / n_seeds as f64;
        }
        assert!(calibration >= 0.8, "depth-8 calibration {calibration:.3}");
    }

    #[test]
    fn csv_report_is_stable() {
        let map = empty_map(vec2(0.0, 0.0), 60.0);
        let sc = scenario(4, 0.1, false);
        let stats = evaluate_predictor(&CvPredictor::default(), &sc, &map);
        let a = csv_report(&[("cv", 4, stats.clone())]);
        let b = csv_report(&[("cv", 4, stats)]);
        assert_eq!(a, b);
        assert!(a.starts_with("predictor,seed,depth,mean_err_m,max_err_m,calibration\n"));
        assert_eq!(a.lines().count(), 9);
        let rerun = evaluate_predictor(&CvPredictor::default(), &scenario(4, 0.1, false), &map);
        assert_eq!(csv_report(&[("cv", 4, rerun)]), b);
    }
}
