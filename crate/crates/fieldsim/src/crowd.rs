//! Ground-truth crowd: disc agents that pick, every tick, the velocity
//! closest to their preferred one among those that keep them clear of
//! neighbors, the robot, and obstacle boundaries over a short horizon.
//! Each constraint is a half-plane in velocity space; the per-agent
//! program is solved against a frozen snapshot of all states, then every
//! position integrates as one batch, so a step is a pure function of its
//! inputs and a predictor can roll the identical dynamics forward.

use crate::geom::{vec2, Vec2};
use crate::rngutil;
use crate::statmap::StaticMap;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const AGENT_RADIUS: f64 = 0.5;
pub const MIN_PREF_SPEED: f64 = 0.1;
pub const MAX_PREF_SPEED: f64 = 1.5;
/// Within this distance of its goal an agent is handed a fresh one.
pub const GOAL_REACHED_DIST: f64 = 0.5;
/// Spawn rejection keeps agents at least this far from the robot.
pub const SPAWN_ROBOT_CLEARANCE: f64 = 2.0;

/// Velocities keep at least this gap between an agent center and obstacle
/// contours. The contours already carry the footprint dilation, which
/// exceeds the agent radius, so a small buffer is all that is needed.
const OBSTACLE_MARGIN: f64 = 0.1;
/// Obstacle half-planes per agent; the nearest few decide the program.
const MAX_OBSTACLE_LINES: usize = 6;
/// Preferred velocities rotate left by this much while any disc constraint
/// is active. Exactly aligned encounters otherwise collapse to a pure
/// braking line under which both parties creep into contact; a uniform
/// rotation gives the optimum a lateral component (everyone favors their
/// left) and, being the same for all agents, it preserves the mirror
/// symmetry of reciprocal encounters.
const PREF_BIAS_ANGLE: f64 = 0.02;
/// Personal-space pad added to agent-agent disc constraints. Two failure
/// modes motivate it: velocities riding a cone tangent sink a few
/// centimeters per tick of discrete integration before the overlap push
/// balances them, and a speed-capped agent pinched by the robot envelope
/// takes the infeasible program's violation split partly on its neighbor
/// line. Both stay inside the pad instead of inside the body. The robot
/// line is left exact: padding it only deepens the infeasibility that
/// causes the second mode.
const CONSTRAINT_MARGIN: f64 = 0.2;

const EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct AgentState {
    pub id: u32,
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    pub pref_speed: f64,
    pub goal: Vec2,
}

#[derive(Debug, Clone, Copy)]
pub struct OrcaParams {
    /// Agents stay mutually collision-free over this window (s).
    pub time_horizon: f64,
    /// Window for obstacle boundary constraints (s).
    pub time_horizon_static: f64,
    /// How large the robot looks to the agents (m).
    pub robot_perceived_radius: f64,
    pub max_neighbors: usize,
    /// Neighbors beyond this range are ignored (m).
    pub neighbor_range: f64,
}

impl Default for OrcaParams {
    fn default() -> OrcaParams {
        OrcaParams {
            time_horizon: 2.0,
            time_horizon_static: 1.0,
            robot_perceived_radius: 1.5,
            max_neighbors: 10,
            neighbor_range: 15.0,
        }
    }
}

/// The robot as agents perceive it: a non-cooperating disc. Agents take
/// full avoidance responsibility; the robot's own avoidance comes from its
/// planners, not from this module.
#[derive(Debug, Clone, Copy)]
pub struct RobotView {
    pub position: Vec2,
    pub velocity: Vec2,
}

/// Half-plane of admissible velocities: the side to the left of
/// `direction` through `point`.
#[derive(Debug, Clone, Copy)]
struct Line {
    point: Vec2,
    direction: Vec2,
}

fn det(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// One synchronous tick: every agent's new velocity solves its program
/// against the entry snapshot, then all positions integrate by `dt`. Goals
/// are left untouched here; refresh lives in [`CrowdSim::step`].
pub fn orca_step(
    agents: &mut [AgentState],
    robot: Option<RobotView>,
    obstacles: &StaticMap,
    dt: f64,
    params: &OrcaParams,
) {
    assert!(dt > 0.0 && dt <= 0.5, "dt out of range: {dt}");
    let snapshot: Vec<AgentState> = agents.to_vec();
    let velocities: Vec<Vec2> = snapshot
        .iter()
        .map(|a| solve_agent(a, &snapshot, robot, obstacles, dt, params))
        .collect();
    for (a, v) in agents.iter_mut().zip(velocities) {
        a.velocity = v;
        a.position = a.position + v * dt;
    }
}

fn solve_agent(
    agent: &AgentState,
    all: &[AgentState],
    robot: Option<RobotView>,
    obstacles: &StaticMap,
    dt: f64,
    params: &OrcaParams,
) -> Vec2 {
    let mut lines: Vec<Line> = Vec::new();

    // Obstacle half-planes first; the fallback never relaxes them.
    let reach = agent.radius + params.time_horizon_static * agent.pref_speed + 1.0;
    for seg in obstacles
        .segments_near(agent.position, reach)
        .into_iter()
        .take(MAX_OBSTACLE_LINES)
    {
        let q = seg.at(seg.project(agent.position));
        let gap = agent.position.dist(q);
        let n = if gap > 1e-9 {
            (agent.position - q) / gap
        } else {
            // Center exactly on the contour: push along whichever side of
            // the boundary is free.
            let t = (seg.b - seg.a).normalized();
            let c = vec2(-t.y, t.x);
            if obstacles.point_blocked(agent.position + c * 0.2) {
                -c
            } else {
                c
            }
        };
        // The velocity may close the remaining gap at most over the static
        // horizon; inside the margin the bound turns negative and ejects.
        let bound = (gap - OBSTACLE_MARGIN) / params.time_horizon_static;
        lines.push(Line {
            point: n * (-bound),
            direction: vec2(n.y, -n.x),
        });
    }
    let n_obstacle_lines = lines.len();

    if let Some(r) = robot {
        let rel = r.position - agent.position;
        if rel.norm_sq() <= params.neighbor_range * params.neighbor_range {
            // The perceived robot disc is a comfort envelope around the
            // physical machine, so intrusions recover over the normal
            // horizon rather than in a single step: a one-step demand
            // against a body this large exceeds any agent's speed, turns
            // the program infeasible and makes the fallback sacrifice
            // neighbor clearance to flee.
            lines.push(vo_line(
                agent.position,
                agent.velocity,
                r.position,
                r.velocity,
                agent.radius + params.robot_perceived_radius,
                params.time_horizon,
                params.time_horizon,
                1.0,
            ));
        }
    }

    // Nearest neighbors, deterministically ordered.
    let mut near: Vec<(f64, usize)> = all
        .iter()
        .enumerate()
        .filter(|(_, b)| b.id != agent.id)
        .map(|(i, b)| ((b.position - agent.position).norm_sq(), i))
        .filter(|(d2, _)| *d2 <= params.neighbor_range * params.neighbor_range)
        .collect();
    near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    near.truncate(params.max_neighbors);
    for (_, i) in near {
        let other = &all[i];
        lines.push(vo_line(
            agent.position,
            agent.velocity,
            other.position,
            other.velocity,
            agent.radius + other.radius + CONSTRAINT_MARGIN,
            params.time_horizon,
            dt,
            0.5,
        ));
    }

    let to_goal = agent.goal - agent.position;
    let d = to_goal.norm();
    let mut pref = if d > 1e-9 {
        to_goal * (agent.pref_speed / d)
    } else {
        vec2(0.0, 0.0)
    };
    if lines.len() > n_obstacle_lines {
        pref = pref.rotated(PREF_BIAS_ANGLE);
    }

    let mut new_v = vec2(0.0, 0.0);
    let fail = lp2(&lines, agent.pref_speed, pref, false, &mut new_v);
    if fail < lines.len() {
        lp3(&lines, n_obstacle_lines, fail, agent.pref_speed, &mut new_v);
    }
    new_v
}

/// Half-plane induced by one moving disc. `responsibility` is the share of
/// the correction this agent absorbs: 0.5 between cooperating agents, 1.0
/// against the robot. `overlap_recovery` is the time over which an
/// already-overlapping pair separates; one tick between agents.
#[allow(clippy::too_many_arguments)]
fn vo_line(
    pos: Vec2,
    vel: Vec2,
    other_pos: Vec2,
    other_vel: Vec2,
    combined_r: f64,
    time_horizon: f64,
    overlap_recovery: f64,
    responsibility: f64,
) -> Line {
    let rel_pos = other_pos - pos;
    let rel_vel = vel - other_vel;
    let dist_sq = rel_pos.norm_sq();
    let r_sq = combined_r * combined_r;

    let direction;
    let u;
    if dist_sq > r_sq {
        // Relative velocities inside the truncated cone collide within the
        // horizon; `u` is the shortest escape from it.
        let inv_t = 1.0 / time_horizon;
        let w = rel_vel - rel_pos * inv_t;
        let w_len_sq = w.norm_sq();
        let dot1 = w.dot(rel_pos);
        if dot1 < 0.0 && dot1 * dot1 > r_sq * w_len_sq {
            let w_len = w_len_sq.sqrt();
            let unit_w = w / w_len;
            direction = vec2(unit_w.y, -unit_w.x);
            u = unit_w * (combined_r * inv_t - w_len);
        } else {
            let leg = (dist_sq - r_sq).sqrt();
            if det(rel_pos, w) > 0.0 {
                direction = vec2(
                    rel_pos.x * leg - rel_pos.y * combined_r,
                    rel_pos.x * combined_r + rel_pos.y * leg,
                ) / dist_sq;
            } else {
                direction = vec2(
                    rel_pos.x * leg + rel_pos.y * combined_r,
                    -rel_pos.x * combined_r + rel_pos.y * leg,
                ) / -dist_sq;
            }
            u = direction * rel_vel.dot(direction) - rel_vel;
        }
    } else {
        // Already overlapping: separate over the recovery window.
        let inv_dt = 1.0 / overlap_recovery;
        let w = rel_vel - rel_pos * inv_dt;
        let w_len = w.norm();
        let unit_w = if w_len > 1e-12 {
            w / w_len
        } else if dist_sq > 1e-18 {
            rel_pos * (-1.0 / dist_sq.sqrt())
        } else {
            vec2(1.0, 0.0)
        };
        direction = vec2(unit_w.y, -unit_w.x);
        u = unit_w * (combined_r * inv_dt - w_len);
    }
    Line {
        point: vel + u * responsibility,
        direction,
    }
}

/// Clip the current 1D feasible interval of `lines[line_no]` against the
/// earlier half-planes and place the optimum on it. Returns false when the
/// interval is empty.
fn lp1(lines: &[Line], line_no: usize, radius: f64, opt_v: Vec2, dir_opt: bool, result: &mut Vec2) -> bool {
    let ln = &lines[line_no];
    let dot = ln.point.dot(ln.direction);
    let discriminant = dot * dot + radius * radius - ln.point.norm_sq();
    if discriminant < 0.0 {
        return false;
    }
    let sqrt_d = discriminant.sqrt();
    let mut t_left = -dot - sqrt_d;
    let mut t_right = -dot + sqrt_d;

    for prev in lines.iter().take(line_no) {
        let denom = det(ln.direction, prev.direction);
        let numer = det(prev.direction, ln.point - prev.point);
        if denom.abs() <= EPS {
            if numer < 0.0 {
                return false;
            }
            continue;
        }
        let t = numer / denom;
        if denom >= 0.0 {
            t_right = t_right.min(t);
        } else {
            t_left = t_left.max(t);
        }
        if t_left > t_right {
            return false;
        }
    }

    if dir_opt {
        *result = if opt_v.dot(ln.direction) > 0.0 {
            ln.point + ln.direction * t_right
        } else {
            ln.point + ln.direction * t_left
        };
    } else {
        let t = ln.direction.dot(opt_v - ln.point);
        *result = ln.point + ln.direction * t.clamp(t_left, t_right);
    }
    true
}

/// Sequential half-plane intersection inside the speed disc. Returns the
/// index of the first unsatisfiable constraint, or `lines.len()` on
/// success. With `dir_opt` the objective is a direction (`opt_v` unit) to
/// maximize along instead of a point to stay near.
fn lp2(lines: &[Line], radius: f64, opt_v: Vec2, dir_opt: bool, result: &mut Vec2) -> usize {
    if dir_opt {
        *result = opt_v * radius;
    } else if opt_v.norm_sq() > radius * radius {
        *result = opt_v.normalized() * radius;
    } else {
        *result = opt_v;
    }
    for (i, line) in lines.iter().enumerate() {
        if det(line.direction, line.point - *result) > 0.0 {
            let saved = *result;
            if !lp1(lines, i, radius, opt_v, dir_opt, result) {
                *result = saved;
                return i;
            }
        }
    }
    lines.len()
}

/// Fallback for an infeasible program: starting from the first violated
/// line, minimize the worst violation over the relaxable constraints while
/// the first `n_obstacle` lines stay hard.
fn lp3(lines: &[Line], n_obstacle: usize, begin: usize, radius: f64, result: &mut Vec2) {
    let mut distance = 0.0;
    for i in begin..lines.len() {
        if det(lines[i].direction, lines[i].point - *result) <= distance {
            continue;
        }
        let mut proj: Vec<Line> = lines[..n_obstacle].to_vec();
        for j in n_obstacle..i {
            let determinant = det(lines[i].direction, lines[j].direction);
            let point = if determinant.abs() <= EPS {
                if lines[i].direction.dot(lines[j].direction) > 0.0 {
                    continue;
                }
                (lines[i].point + lines[j].point) * 0.5
            } else {
                lines[i].point
                    + lines[i].direction
                        * (det(lines[j].direction, lines[i].point - lines[j].point) / determinant)
            };
            proj.push(Line {
                point,
                direction: (lines[j].direction - lines[i].direction).normalized(),
            });
        }
        let saved = *result;
        if lp2(
            &proj,
            radius,
            vec2(-lines[i].direction.y, lines[i].direction.x),
            true,
            result,
        ) < proj.len()
        {
            // Numerically the projected program should always admit the
            // current point; keep it if the solve degenerates.
            *result = saved;
        }
        distance = det(lines[i].direction, lines[i].point - *result);
    }
}

/// Crowd with goal management: agents live inside a rectangular active
/// region and draw fresh uniform goals from a seeded stream on arrival.
#[derive(Debug, Clone)]
pub struct CrowdSim {
    pub agents: Vec<AgentState>,
    pub params: OrcaParams,
    region_lo: Vec2,
    region_hi: Vec2,
    rng: ChaCha8Rng,
}

impl CrowdSim {
    /// Spawn `n_agents` uniformly over the region, off obstacles, mutually
    /// non-overlapping and clear of the robot.
    pub fn spawn(
        region_lo: Vec2,
        region_hi: Vec2,
        n_agents: usize,
        obstacles: &StaticMap,
        robot_position: Vec2,
        seed: u64,
    ) -> CrowdSim {
        assert!(region_hi.x > region_lo.x && region_hi.y > region_lo.y);
        let mut rng = rngutil::stream(seed, "crowd-spawn");
        let mut agents: Vec<AgentState> = Vec::with_capacity(n_agents);
        let mut attempts = 0usize;
        while agents.len() < n_agents {
            attempts += 1;
            assert!(
                attempts <= 1000 * n_agents.max(1),
                "could not place {n_agents} agents in the active region"
            );
            let p = uniform_point(&mut rng, region_lo, region_hi);
            if obstacles.point_blocked(p)
                || p.dist(robot_position) < SPAWN_ROBOT_CLEARANCE
                || agents
                    .iter()
                    .any(|a| a.position.dist(p) < 2.0 * AGENT_RADIUS + 0.1)
            {
                continue;
            }
            let pref_speed = MIN_PREF_SPEED + rng.gen::<f64>() * (MAX_PREF_SPEED - MIN_PREF_SPEED);
            let goal = free_point(&mut rng, region_lo, region_hi, obstacles);
            agents.push(AgentState {
                id: agents.len() as u32,
                position: p,
                velocity: vec2(0.0, 0.0),
                radius: AGENT_RADIUS,
                pref_speed,
                goal,
            });
        }
        CrowdSim {
            agents,
            params: OrcaParams::default(),
            region_lo,
            region_hi,
            rng,
        }
    }

    /// One tick: advance all agents, then re-goal the ones that arrived.
    pub fn step(&mut self, robot: Option<RobotView>, obstacles: &StaticMap, dt: f64) {
        orca_step(&mut self.agents, robot, obstacles, dt, &self.params);
        for a in &mut self.agents {
            if a.position.dist(a.goal) < GOAL_REACHED_DIST {
                a.goal = free_point(&mut self.rng, self.region_lo, self.region_hi, obstacles);
            }
        }
    }

    pub fn region(&self) -> (Vec2, Vec2) {
        (self.region_lo, self.region_hi)
    }
}

fn uniform_point(rng: &mut ChaCha8Rng, lo: Vec2, hi: Vec2) -> Vec2 {
    vec2(
        lo.x + rng.gen::<f64>() * (hi.x - lo.x),
        lo.y + rng.gen::<f64>() * (hi.y - lo.y),
    )
}

fn free_point(rng: &mut ChaCha8Rng, lo: Vec2, hi: Vec2, obstacles: &StaticMap) -> Vec2 {
    for _ in 0..10_000 {
        let p = uniform_point(rng, lo, hi);
        if !obstacles.point_blocked(p) {
            return p;
        }
    }
    panic!("active region is almost entirely blocked");
}
