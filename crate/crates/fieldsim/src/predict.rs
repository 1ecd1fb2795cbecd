//! Agent-future prediction. The local planner needs, for every candidate
//! action, where each nearby agent will be a few steps out and how sure
//! that guess is. A predictor turns an observation window into an opaque
//! state, then advances that state one planner step at a time, each
//! advance conditioned on where the robot intends to be next and yielding
//! a Gaussian per agent. Two implementations: a constant-velocity
//! extrapolation, and a rollout of the crowd model itself seeded with
//! states reconstructed from the window.

use crate::crowd::{orca_step, AgentState, OrcaParams, RobotView, AGENT_RADIUS, MAX_PREF_SPEED, MIN_PREF_SPEED};
use crate::geom::{vec2, Vec2};
use crate::statmap::StaticMap;
use std::f64::consts::PI;

/// Observation window length in planner steps.
pub const T_OBS: usize = 8;
/// Planner step: the spacing of the observation window and of every
/// prediction step.
pub const PREDICT_DT: f64 = 0.5;

/// One agent's sensed position history, oldest first.
#[derive(Debug, Clone)]
pub struct AgentTrack {
    pub id: u32,
    pub radius: f64,
    pub positions: Vec<Vec2>,
    /// Channels only the simulation itself can fill. Sensing supplies
    /// positions alone and leaves this `None`; the oracle harness uses it
    /// to show the rollout predictor and the crowd are the same dynamics.
    pub truth: Option<AgentTruth>,
}

#[derive(Debug, Clone, Copy)]
pub struct AgentTruth {
    pub velocity: Vec2,
    pub pref_speed: f64,
    pub goal: Vec2,
}

#[derive(Debug, Clone)]
pub struct ObservationWindow {
    /// Spacing between history entries (s).
    pub dt: f64,
    /// Robot position history, oldest first, same timestamps as the tracks.
    pub robot: Vec<Vec2>,
    pub agents: Vec<AgentTrack>,
}

impl ObservationWindow {
    /// Normalize every history to exactly `T_OBS` entries: front-pad short
    /// ones by repeating their oldest entry, drop all but the newest
    /// `T_OBS` of long ones. Empty histories are a caller bug.
    pub fn pad(mut self) -> ObservationWindow {
        fn fix(h: &mut Vec<Vec2>) {
            assert!(!h.is_empty(), "empty history");
            if h.len() > T_OBS {
                h.drain(..h.len() - T_OBS);
            }
            while h.len() < T_OBS {
                h.insert(0, h[0]);
            }
        }
        fix(&mut self.robot);
        for t in &mut self.agents {
            fix(&mut t.positions);
        }
        self
    }
}

/// Symmetric 2x2 covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cov2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Cov2 {
    pub fn isotropic(var: f64) -> Cov2 {
        Cov2 { xx: var, xy: 0.0, yy: var }
    }

    pub fn det(self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// Area of the one-sigma ellipse: the scalar uncertainty the planner
    /// charges for an agent. Rotation-invariant and monotone in spread.
    pub fn ellipse_area(self) -> f64 {
        PI * self.det().max(0.0).sqrt()
    }

    /// R(theta) * S * R(theta)^T.
    pub fn rotated(self, theta: f64) -> Cov2 {
        let (s, c) = theta.sin_cos();
        let xx = c * c * self.xx - 2.0 * s * c * self.xy + s * s * self.yy;
        let xy = s * c * (self.xx - self.yy) + (c * c - s * s) * self.xy;
        let yy = s * s * self.xx + 2.0 * s * c * self.xy + c * c * self.yy;
        Cov2 { xx, xy, yy }
    }

    /// d^T * S^-1 * d; infinite when the covariance is singular.
    pub fn mahalanobis_sq(self, d: Vec2) -> f64 {
        let det = self.det();
        if det <= 0.0 {
            return f64::INFINITY;
        }
        (self.yy * d.x * d.x - 2.0 * self.xy * d.x * d.y + self.xx * d.y * d.y) / det
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AgentPrediction {
    pub id: u32,
    pub mean: Vec2,
    pub cov: Cov2,
}

/// Per-agent Gaussians after `depth` planner steps.
#[derive(Debug, Clone)]
pub struct GaussianPrediction {
    pub depth: u32,
    pub agents: Vec<AgentPrediction>,
}

/// A predictor encodes a window once, then is stepped along each branch of
/// the search tree. States are immutable values so branches can share a
/// root and advance independently; each step is conditioned on the robot's
/// next intended position.
pub trait Predictor {
    type State: Clone;
    fn encode(&self, window: &ObservationWindow) -> Self::State;
    fn step(&self, state: &Self::State, robot_action: Vec2) -> (GaussianPrediction, Self::State);
}

/// Constant-velocity extrapolation. The latent is a least-squares linear
/// fit of each track; the robot's intent is ignored.
#[derive(Debug, Clone, Copy)]
pub struct CvPredictor {
    /// Per-step process noise variance added to each axis (m^2).
    pub q_var: f64,
}

impl Default for CvPredictor {
    fn default() -> CvPredictor {
        CvPredictor { q_var: 0.05 * 0.05 }
    }
}

#[derive(Debug, Clone)]
pub struct CvState {
    dt: f64,
    depth: u32,
    var: f64,
    agents: Vec<(u32, Vec2, Vec2)>,
}

impl Predictor for CvPredictor {
    type State = CvState;

    fn encode(&self, window: &ObservationWindow) -> CvState {
        let agents = window
            .agents
            .iter()
            .map(|t| {
                assert_eq!(t.positions.len(), T_OBS, "window not padded");
                (t.id, *t.positions.last().unwrap(), fit_velocity(&t.positions, window.dt))
            })
            .collect();
        CvState { dt: window.dt, depth: 0, var: 0.0, agents }
    }

    fn step(&self, state: &CvState, _robot_action: Vec2) -> (GaussianPrediction, CvState) {
        let mut next = state.clone();
        next.depth += 1;
        next.var += self.q_var;
        for (_, p, v) in &mut next.agents {
            *p = *p + *v * state.dt;
        }
        let pred = GaussianPrediction {
            depth: next.depth,
            agents: next
                .agents
                .iter()
                .map(|&(id, mean, _)| AgentPrediction { id, mean, cov: Cov2::isotropic(next.var) })
                .collect(),
        };
        (pred, next)
    }
}

/// Least-squares slope of position against time over the window.
/// Repetition padding weights a short track toward stillness, which is the
/// right prior for an agent seen only just now.
fn fit_velocity(positions: &[Vec2], dt: f64) -> Vec2 {
    let n = positions.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let mut p_mean = vec2(0.0, 0.0);
    for p in positions {
        p_mean = p_mean + *p;
    }
    p_mean = p_mean / n;
    let mut num = vec2(0.0, 0.0);
    let mut den = 0.0;
    for (k, p) in positions.iter().enumerate() {
        let w = k as f64 - t_mean;
        num = num + (*p - p_mean) * w;
        den += w * w;
    }
    num / (den * dt)
}

/// Rollout of the crowd dynamics themselves. The window is decoded into
/// full agent states, then each step runs one `orca_step` with the robot
/// moved toward its intended position; uncertainty grows by a fixed
/// per-step sigma. Reuses the exact crowd solver, so with ground-truth
/// decoding it reproduces the simulation bit for bit.
#[derive(Clone, Copy)]
pub struct OrcaRollout<'a> {
    pub map: &'a StaticMap,
    pub params: OrcaParams,
    /// Standard deviation added per prediction step (m); depth k carries
    /// sigma = k * sigma_step.
    pub sigma_step: f64,
}

/// How far ahead of an agent its inferred goal is placed. Only the
/// direction matters over an 8-step horizon; the distance just has to
/// outrun it.
const GOAL_PROJECTION: f64 = 30.0;

impl<'a> OrcaRollout<'a> {
    pub fn new(map: &'a StaticMap) -> OrcaRollout<'a> {
        OrcaRollout { map, params: OrcaParams::default(), sigma_step: 0.04 }
    }

    /// Zero growth: predictions carry singular covariances. For oracle
    /// comparisons of the means only.
    pub fn noiseless(map: &'a StaticMap) -> OrcaRollout<'a> {
        OrcaRollout { sigma_step: 0.0, ..OrcaRollout::new(map) }
    }
}

#[derive(Debug, Clone)]
pub struct OrcaRolloutState {
    dt: f64,
    depth: u32,
    robot: Vec2,
    agents: Vec<AgentState>,
}

impl Predictor for OrcaRollout<'_> {
    type State = OrcaRolloutState;

    fn encode(&self, window: &ObservationWindow) -> OrcaRolloutState {
        assert_eq!(window.robot.len(), T_OBS, "window not padded");
        let agents = window
            .agents
            .iter()
            .map(|t| {
                assert_eq!(t.positions.len(), T_OBS, "window not padded");
                let position = *t.positions.last().unwrap();
                match t.truth {
                    Some(truth) => AgentState {
                        id: t.id,
                        position,
                        velocity: truth.velocity,
                        radius: t.radius,
                        pref_speed: truth.pref_speed,
                        goal: truth.goal,
                    },
                    None => {
                        // Last displacement over the step, not the window
                        // fit: the rollout needs the current velocity, and
                        // a turning agent's window average lags it.
                        let velocity = (position - t.positions[T_OBS - 2]) / window.dt;
                        let speed = velocity.norm();
                        let goal = if speed > 1e-9 {
                            position + velocity * (GOAL_PROJECTION / speed)
                        } else {
                            position
                        };
                        AgentState {
                            id: t.id,
                            position,
                            velocity,
                            radius: t.radius,
                            pref_speed: speed.clamp(MIN_PREF_SPEED, MAX_PREF_SPEED),
                            goal,
                        }
                    }
                }
            })
            .collect();
        OrcaRolloutState { dt: window.dt, depth: 0, robot: *window.robot.last().unwrap(), agents }
    }

    fn step(&self, state: &OrcaRolloutState, robot_action: Vec2) -> (GaussianPrediction, OrcaRolloutState) {
        let mut next = state.clone();
        next.depth += 1;
        let robot = RobotView {
            position: state.robot,
            velocity: (robot_action - state.robot) / state.dt,
        };
        orca_step(&mut next.agents, Some(robot), self.map, state.dt, &self.params);
        next.robot = robot_action;
        let sigma = self.sigma_step * next.depth as f64;
        let pred = GaussianPrediction {
            depth: next.depth,
            agents: next
                .agents
                .iter()
                .map(|a| AgentPrediction { id: a.id, mean: a.position, cov: Cov2::isotropic(sigma * sigma) })
                .collect(),
        };
        (pred, next)
    }
}

/// Config-selected predictor behind one type, so the planner call sites
/// stay monomorphic while the choice stays a runtime switch.
#[derive(Clone, Copy)]
pub enum AnyPredictor<'a> {
    Cv(CvPredictor),
    OrcaRollout(OrcaRollout<'a>),
}

#[derive(Debug, Clone)]
pub enum AnyState {
    Cv(CvState),
    OrcaRollout(OrcaRolloutState),
}

impl Predictor for AnyPredictor<'_> {
    type State = AnyState;

    fn encode(&self, window: &ObservationWindow) -> AnyState {
        match self {
            AnyPredictor::Cv(p) => AnyState::Cv(p.encode(window)),
            AnyPredictor::OrcaRollout(p) => AnyState::OrcaRollout(p.encode(window)),
        }
    }

    fn step(&self, state: &AnyState, robot_action: Vec2) -> (GaussianPrediction, AnyState) {
        match (self, state) {
            (AnyPredictor::Cv(p), AnyState::Cv(s)) => {
                let (pred, next) = p.step(s, robot_action);
                (pred, AnyState::Cv(next))
            }
            (AnyPredictor::OrcaRollout(p), AnyState::OrcaRollout(s)) => {
                let (pred, next) = p.step(s, robot_action);
                (pred, AnyState::OrcaRollout(next))
            }
            _ => unreachable!("state from a different predictor"),
        }
    }
}

/// Window builder for straight-line sensed tracks, shared by tests and the
/// eval harness.
pub fn window_from_tracks(tracks: Vec<(u32, Vec<Vec2>)>, robot: Vec<Vec2>, dt: f64) -> ObservationWindow {
    ObservationWindow {
        dt,
        robot,
        agents: tracks
            .into_iter()
            .map(|(id, positions)| AgentTrack { id, radius: AGENT_RADIUS, positions, truth: None })
            .collect(),
    }
    .pad()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statmap::StaticMap;

    fn empty_map(origin: Vec2, side: f64) -> StaticMap {
        StaticMap::build(vec![], origin, side, side, 0.5, 0.75)
    }

    fn straight_track(start: Vec2, v: Vec2, dt: f64) -> Vec<Vec2> {
        (0..T_OBS).map(|k| start + v * (k as f64 * dt)).collect()
    }

    #[test]
    fn cv_fit_recovers_constant_velocity_exactly() {
        let w = window_from_tracks(
            vec![
                (0, straight_track(vec2(10.0, 10.0), vec2(1.0, 0.0), PREDICT_DT)),
                (1, vec![vec2(20.0, 20.0); T_OBS]),
            ],
            vec![vec2(0.0, 0.0); T_OBS],
            PREDICT_DT,
        );
        let p = CvPredictor::default();
        let s = p.encode(&w);
        assert!((s.agents[0].2 - vec2(1.0, 0.0)).norm() < 1e-12);
        assert_eq!(s.agents[1].2, vec2(0.0, 0.0));
    }

    #[test]
    fn cv_step_advances_mean_and_grows_covariance() {
        let w = window_from_tracks(
            vec![(0, straight_track(vec2(5.0, 5.0), vec2(1.0, 0.0), PREDICT_DT))],
            vec![vec2(0.0, 0.0); T_OBS],
            PREDICT_DT,
        );
        let p = CvPredictor::default();
        let s0 = p.encode(&w);
        let (pred1, s1) = p.step(&s0, vec2(0.0, 0.0));
        let (pred2, _) = p.step(&s1, vec2(0.0, 0.0));
        let last = 5.0 + (T_OBS - 1) as f64 * PREDICT_DT;
        assert!((pred1.agents[0].mean - vec2(last + 0.5, 5.0)).norm() < 1e-9);
        assert!((pred2.agents[0].mean - vec2(last + 1.0, 5.0)).norm() < 1e-9);
        let q = 0.05 * 0.05;
        assert!((pred1.agents[0].cov.xx - q).abs() < 1e-15);
        assert!((pred2.agents[0].cov.xx - 2.0 * q).abs() < 1e-15);
    }

    #[test]
    fn short_histories_pad_toward_stillness() {
        let w = window_from_tracks(
            vec![(0, vec![vec2(4.0, 4.0), vec2(4.5, 4.0)])],
            vec![vec2(0.0, 0.0)],
            PREDICT_DT,
        );
        assert_eq!(w.agents[0].positions.len(), T_OBS);
        assert_eq!(w.agents[0].positions[0], vec2(4.0, 4.0));
        let p = CvPredictor::default();
        let s = p.encode(&w);
        let v = s.agents[0].2;
        // A lone fresh displacement against seven repeated samples should
        // read as slow, not as 1 m/s.
        assert!(v.x > 0.0 && v.x < 0.5, "{v:?}");
    }

    #[test]
    fn ellipse_area_matches_closed_forms() {
        assert!((Cov2::isotropic(0.25).ellipse_area() - PI * 0.25).abs() < 1e-12);
        assert!((Cov2::isotropic(1.0).ellipse_area() - PI).abs() < 1e-12);
        let aniso = Cov2 { xx: 0.25, xy: 0.0, yy: 1.0 };
        assert!((aniso.ellipse_area() - PI * 0.5).abs() < 1e-12);
    }

    #[test]
    fn ellipse_area_is_rotation_invariant() {
        let c = Cov2 { xx: 0.9, xy: 0.2, yy: 0.3 };
        for k in 0..12 {
            let r = c.rotated(k as f64 * 0.53);
            assert!((r.ellipse_area() - c.ellipse_area()).abs() < 1e-12);
            // Still the same eigenvalues, so still SPD.
            assert!(r.det() > 0.0 && r.xx > 0.0);
        }
    }

    #[test]
    fn mahalanobis_matches_isotropic_distance() {
        let c = Cov2::isotropic(0.04);
        let d = vec2(0.3, 0.4);
        assert!((c.mahalanobis_sq(d) - 0.25 / 0.04).abs() < 1e-9);
        assert_eq!(Cov2::isotropic(0.0).mahalanobis_sq(d), f64::INFINITY);
    }

    fn depth_monotone<P: Predictor>(p: &P, w: &ObservationWindow) {
        let mut s = p.encode(w);
        let mut last_det = -1.0;
        for k in 1..=8 {
            let (pred, next) = p.step(&s, vec2(50.0, 50.0));
            assert_eq!(pred.depth, k);
            let det = pred.agents[0].cov.det();
            assert!(det >= last_det, "depth {k}: det {det} < {last_det}");
            last_det = det;
            s = next;
        }
    }

    #[test]
    fn uncertainty_grows_with_depth_for_both_predictors() {
        let map = empty_map(vec2(0.0, 0.0), 60.0);
        let w = window_from_tracks(
            vec![(0, straight_track(vec2(10.0, 10.0), vec2(0.8, 0.3), PREDICT_DT))],
            straight_track(vec2(30.0, 30.0), vec2(0.0, 0.0), PREDICT_DT),
            PREDICT_DT,
        );
        depth_monotone(&CvPredictor::default(), &w);
        depth_monotone(&OrcaRollout::new(&map), &w);
        depth_monotone(&AnyPredictor::Cv(CvPredictor::default()), &w);
        depth_monotone(&AnyPredictor::OrcaRollout(OrcaRollout::new(&map)), &w);
    }

    #[test]
    fn rollout_decode_reproduces_last_observation() {
        let map = empty_map(vec2(0.0, 0.0), 60.0);
        let track = straight_track(vec2(12.0, 9.0), vec2(1.1, -0.2), PREDICT_DT);
        let last = *track.last().unwrap();
        let w = window_from_tracks(
            vec![(3, track)],
            straight_track(vec2(30.0, 30.0), vec2(1.0, 0.0), PREDICT_DT),
            PREDICT_DT,
        );
        let s = OrcaRollout::new(&map).encode(&w);
        assert_eq!(s.agents[0].position, last);
        assert_eq!(s.agents[0].id, 3);
        assert!((s.agents[0].velocity - vec2(1.1, -0.2)).norm() < 1e-9);
    }

    /// Decoded states fed back through the same solver must match a crowd
    /// run step for step, robot and interactions included. The robot's
    /// per-step view derives its velocity from consecutive scripted
    /// positions on both sides, so the comparison is exact.
    #[test]
    fn rollout_reproduces_the_crowd_bit_for_bit() {
        let map = empty_map(vec2(0.0, 0.0), 60.0);
        let dt = PREDICT_DT;
        // Two agents converging near the robot's lane plus one loner.
        let mut truth = vec![
            AgentState { id: 0, position: vec2(20.0, 28.0), velocity: vec2(0.0, 0.0), radius: AGENT_RADIUS, pref_speed: 1.2, goal: vec2(40.0, 32.0) },
            AgentState { id: 1, position: vec2(36.0, 33.0), velocity: vec2(0.0, 0.0), radius: AGENT_RADIUS, pref_speed: 0.9, goal: vec2(16.0, 27.0) },
            AgentState { id: 2, position: vec2(28.0, 45.0), velocity: vec2(0.0, 0.0), radius: AGENT_RADIUS, pref_speed: 0.4, goal: vec2(28.0, 10.0) },
        ];
        let script: Vec<Vec2> = (0..T_OBS + 8)
            .map(|k| vec2(14.0, 30.0) + vec2(1.3, 0.05) * (k as f64 * dt))
            .collect();
        let params = OrcaParams::default();

        // Warm up through the window, recording what a sensor would see.
        let mut tracks: Vec<Vec<Vec2>> = truth.iter().map(|a| vec![a.position]).collect();
        for k in 0..T_OBS - 1 {
            let robot = RobotView {
                position: script[k],
                velocity: (script[k + 1] - script[k]) / dt,
            };
            orca_step(&mut truth, Some(robot), &map, dt, &params);
            for (t, a) in tracks.iter_mut().zip(&truth) {
                t.push(a.position);
            }
        }

        let window = ObservationWindow {
            dt,
            robot: script[..T_OBS].to_vec(),
            agents: truth
                .iter()
                .zip(&tracks)
                .map(|(a, t)| AgentTrack {
                    id: a.id,
                    radius: a.radius,
                    positions: t.clone(),
                    truth: Some(AgentTruth { velocity: a.velocity, pref_speed: a.pref_speed, goal: a.goal }),
                })
                .collect(),
        }
        .pad();

        let predictor = OrcaRollout::noiseless(&map);
        let mut state = predictor.encode(&window);
        for k in T_OBS - 1..T_OBS - 1 + 8 {
            let robot = RobotView {
                position: script[k],
                velocity: (script[k + 1] - script[k]) / dt,
            };
            orca_step(&mut truth, Some(robot), &map, dt, &params);
            let (pred, next) = predictor.step(&state, script[k + 1]);
            for (p, a) in pred.agents.iter().zip(&truth) {
                assert_eq!(p.mean.x, a.position.x, "depth {} agent {}", pred.depth, a.id);
                assert_eq!(p.mean.y, a.position.y, "depth {} agent {}", pred.depth, a.id);
            }
            state = next;
        }
    }

    /// An intended robot position parked on an agent's path must bend the
    /// predicted motion away from the straight line within a few steps.
    #[test]
    fn rollout_reacts_to_the_intended_robot_position() {
        let map = empty_map(vec2(0.0, 0.0), 60.0);
        let w = window_from_tracks(
            vec![(0, straight_track(vec2(20.0, 30.0), vec2(1.0, 0.0), PREDICT_DT))],
            vec![vec2(27.0, 30.0); T_OBS],
            PREDICT_DT,
        );
        let start = *w.agents[0].positions.last().unwrap();
        let predictor = OrcaRollout::new(&map);
        let mut s = predictor.encode(&w);
        let mut max_dev: f64 = 0.0;
        for k in 1..=3 {
            let (pred, next) = predictor.step(&s, vec2(27.0, 30.0));
            let straight = start + vec2(1.0, 0.0) * (k as f64 * PREDICT_DT);
            max_dev = max_dev.max((pred.agents[0].mean - straight).norm());
            s = next;
        }
        assert!(max_dev > 0.1, "no avoidance response: {max_dev}");
    }

    #[test]
    fn any_predictor_rejects_foreign_state() {
        let map = empty_map(vec2(0.0, 0.0), 60.0);
        let w = window_from_tracks(
            vec![(0, straight_track(vec2(10.0, 10.0), vec2(1.0, 0.0), PREDICT_DT))],
            vec![vec2(30.0, 30.0); T_OBS],
            PREDICT_DT,
        );
        let cv = AnyPredictor::Cv(CvPredictor::default());
        let orca = AnyPredictor::OrcaRollout(OrcaRollout::new(&map));
        let s = cv.encode(&w);
        let r = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| orca.step(&s, vec2(0.0, 0.0))));
        assert!(r.is_err());
    }
}
