//! Offline mission planning: a probabilistic roadmap over the terrain,
//! minimum-energy paths between mission locations, an exact asymmetric
//! tour over those costs, and recharge stops inserted so the battery never
//! runs dry.
//!
//! Energy, not distance, is the planning currency throughout. Uphill costs
//! more than downhill, so the cost matrix is asymmetric and tour direction
//! matters.

use std::collections::BinaryHeap;
use std::fmt::Write as _;

use rand::Rng;

use crate::clothoid::{fit_clothoid_pair, ClothoidPair, PathSpline};
use crate::geom::{pose, vec2, wrap_angle, Pose2D, Vec2};
use crate::rngutil;
use crate::statmap::StaticMap;
use crate::terrain::{edge_energy, EnergyModel, Heightmap};
use thiserror::Error;

/// Steering-limit curvature cap for roadmap edges: tan(max steer)/wheelbase.
pub const KAPPA_MAX: f64 = 0.6992598404200479;
/// Collision sampling spacing along candidate edges, meters. The samples are
/// joined into segments and those are tested exactly against the obstacle
/// contours, so the only approximation is curve-to-chord sag: at the
/// curvature cap over 0.25 m that is under a centimeter, far inside the
/// footprint dilation of the obstacle map.
pub const EDGE_SAMPLE_SPACING: f64 = 0.25;
/// Plan file polyline spacing, meters.
pub const PLAN_SAMPLE_SPACING: f64 = 0.5;
/// Held-Karp is exact up to this many locations (station included).
pub const ATSP_EXACT_LIMIT: usize = 13;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("location {0} is not connected to the recharge station in the roadmap")]
    Disconnected(usize),
    #[error("tour instance has {0} locations, exact solver limit is {ATSP_EXACT_LIMIT}")]
    TooLarge(usize),
    #[error("location {0} round trip exceeds battery capacity")]
    InfeasibleLeg(usize),
    #[error("could not sample {0} free roadmap nodes; map too crowded")]
    SamplingExhausted(usize),
    #[error("plan file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaypointKind {
    Observation,
    SoilSampling,
    WeedSpraying,
    Recharge,
}

impl WaypointKind {
    /// Positional accuracy demanded to count the waypoint as reached.
    pub fn accuracy(self) -> f64 {
        match self {
            WaypointKind::Observation => 5.0,
            WaypointKind::SoilSampling => 2.0,
            WaypointKind::WeedSpraying => 1.0,
            WaypointKind::Recharge => 0.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WaypointKind::Observation => "observation",
            WaypointKind::SoilSampling => "soil_sampling",
            WaypointKind::WeedSpraying => "weed_spraying",
            WaypointKind::Recharge => "recharge",
        }
    }

    pub fn parse(s: &str) -> Option<WaypointKind> {
        match s {
            "observation" => Some(WaypointKind::Observation),
            "soil_sampling" => Some(WaypointKind::SoilSampling),
            "weed_spraying" => Some(WaypointKind::WeedSpraying),
            "recharge" => Some(WaypointKind::Recharge),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub position: Vec2,
    pub kind: WaypointKind,
}

#[derive(Debug, Clone)]
pub struct RoadEdge {
    pub from: usize,
    pub to: usize,
    pub pair: ClothoidPair,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct Roadmap {
    pub nodes: Vec<Pose2D>,
    pub edges: Vec<RoadEdge>,
    /// Outgoing edge indices per node.
    pub adjacency: Vec<Vec<usize>>,
    /// The first `n_locations` nodes are mission locations, station first.
    pub n_locations: usize,
}

impl Roadmap {
    /// Deterministic text form; equality of this string is the determinism
    /// contract for identical seeds.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "nodes {} locations {}", self.nodes.len(), self.n_locations);
        for n in &self.nodes {
            let _ = writeln!(out, "n {:.9} {:.9} {:.9}", n.x, n.y, n.theta);
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "e {} {} {:.9} {:.9}",
                e.from,
                e.to,
                e.energy,
                e.pair.total_length()
            );
        }
        out
    }
}

/// Assign headings to mission locations. A location needs open ground
/// both ahead (departures) and behind (arrivals land along the heading
/// axis), so near the field border the heading runs tangential to the
/// border rather than at it; in open ground it faces the nearest other
/// location, the way travel actually flows.
pub fn location_poses(map: &Heightmap, station: Vec2, waypoints: &[Waypoint]) -> Vec<Pose2D> {
    let positions: Vec<Vec2> = std::iter::once(station)
        .chain(waypoints.iter().map(|w| w.position))
        .collect();
    let (lo, hi) = map.extent();
    let center = vec2(0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y));
    positions
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let toward_peer = positions
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .min_by(|a, b| p.dist(*a.1).total_cmp(&p.dist(*b.1)))
                .map(|(_, &q)| q - p)
                .unwrap_or(vec2(1.0, 0.0));
            let border_dist = (p.x - lo.x)
                .min(hi.x - p.x)
                .min(p.y - lo.y)
                .min(hi.y - p.y);
            let heading = if border_dist > 15.0 || p.dist(center) < 1e-9 {
                if toward_peer.norm() > 1e-9 {
                    toward_peer.angle()
                } else {
                    0.0
                }
            } else {
                let inward = center - p;
                let t = vec2(-inward.y, inward.x); // tangential
                if t.dot(toward_peer) >= 0.0 {
                    t.angle()
                } else {
                    (-t).angle()
                }
            };
            pose(p.x, p.y, heading)
        })
        .collect()
}

/// Build the roadmap: mission locations verbatim, then uniformly sampled
/// free poses with uniform random headings, each node joined to its k
/// nearest neighbors by clothoid pairs that respect the steering curvature
/// cap and pass sampled collision checks. Edges are directed because the
/// fit and the energy both depend on direction.
pub fn build_prm(
    map: &Heightmap,
    obstacles: &StaticMap,
    locations: &[Pose2D],
    model: &EnergyModel,
    n_samples: usize,
    k_neighbors: usize,
    seed: u64,
) -> Result<Roadmap, PlanError> {
    let mut roadmap =
        build_prm_unchecked(map, obstacles, locations, model, n_samples, k_neighbors, seed)?;

    // Every location must reach the station and be reachable from it; the
    // tour needs both directions. The nearest-neighbor scan alone leaves
    // the digraph fragmented on a fair share of seeds (directed fits fail
    // half the time, so the effective degree is low), so missing links are
    // repaired by bridging the two reachability sets explicitly: try the
    // closest node pairs that would join them until one fits.
    'outer: loop {
        let fwd = dijkstra(&roadmap, 0);
        let rev = dijkstra(&reversed(&roadmap), 0);
        for loc in 1..roadmap.n_locations {
            let missing_fwd = fwd[loc].0.is_infinite();
            let missing_rev = rev[loc].0.is_infinite();
            if !missing_fwd && !missing_rev {
                continue;
            }
            // To give loc a path to the station, connect something it
            // already reaches to something that already reaches the
            // station; the mirrored repair covers the other direction.
            let (sources, targets) = if missing_rev {
                let from_loc = dijkstra(&roadmap, loc);
                (
                    finite_set(&from_loc),
                    finite_set(&rev),
                )
            } else {
                let to_loc = dijkstra(&reversed(&roadmap), loc);
                (
                    finite_set(&fwd),
                    finite_set(&to_loc),
                )
            };
            let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
            for &a in &sources {
                for &b in &targets {
                    if a != b {
                        candidates.push((roadmap.nodes[a].dist(roadmap.nodes[b]), a, b));
                    }
                }
            }
            candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
            for &(_, a, b) in candidates.iter() {
                if let Some(edge) = try_edge(map, obstacles, model, &roadmap.nodes, a, b) {
                    roadmap.adjacency[a].push(roadmap.edges.len());
                    roadmap.edges.push(edge);
                    continue 'outer;
                }
            }
            return Err(PlanError::Disconnected(loc));
        }
        break;
    }
    Ok(roadmap)
}

fn finite_set(costs: &[(f64, Option<usize>)]) -> Vec<usize> {
    costs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.0.is_finite())
        .map(|(i, _)| i)
        .collect()
}

/// [`build_prm`] with the documented recovery for `Disconnected`: raise
/// the sample count (1.5x per step, two steps) and rebuild. Deterministic;
/// the escalation itself is part of the seed's outcome.
pub fn build_prm_with_retry(
    map: &Heightmap,
    obstacles: &StaticMap,
    locations: &[Pose2D],
    model: &EnergyModel,
    n_samples: usize,
    k_neighbors: usize,
    seed: u64,
) -> Result<Roadmap, PlanError> {
    let mut n = n_samples;
    let mut last = None;
    for _ in 0..3 {
        match build_prm(map, obstacles, locations, model, n, k_neighbors, seed) {
            Ok(r) => return Ok(r),
            Err(e @ PlanError::Disconnected(_)) => {
                last = Some(e);
                n = n + n / 2;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap())
}

fn build_prm_unchecked(
    map: &Heightmap,
    obstacles: &StaticMap,
    locations: &[Pose2D],
    model: &EnergyModel,
    n_samples: usize,
    k_neighbors: usize,
    seed: u64,
) -> Result<Roadmap, PlanError> {
    assert!(locations.len() >= 2, "need a station and at least one waypoint");
    assert!(n_samples >= locations.len());
    assert!(k_neighbors >= 3);

    let (lo, hi) = map.extent();
    let mut nodes: Vec<Pose2D> = locations.to_vec();

    // Straight approach and departure lanes: poses on each location's
    // heading axis fit to it (and from it) as exact straights, so every
    // location keeps usable entries and exits even where generic fits
    // into its fixed heading are scarce.
    for loc in locations {
        let u = vec2(loc.theta.cos(), loc.theta.sin());
        for off in [-12.0, -8.0, -4.0, 4.0, 8.0, 12.0] {
            if nodes.len() >= n_samples {
                break;
            }
            let p = loc.position() + u * off;
            if map.contains(p) && !obstacles.point_blocked(p) {
                nodes.push(pose(p.x, p.y, loc.theta));
            }
        }
    }

    let n_guards = nodes.len() - locations.len();
    let mut rng = rngutil::stream(seed, "prm-samples");
    let free_needed = n_samples - nodes.len();
    let mut attempts = 0usize;
    while nodes.len() < n_samples {
        attempts += 1;
        if attempts > 200 * n_samples {
            return Err(PlanError::SamplingExhausted(free_needed));
        }
        // A quarter of the samples cluster around the locations, where the
        // arrival and departure funnels need candidates the most. Their
        // headings stay uniform: same-heading parallel poses cannot reach
        // each other (the curvature profile cannot change sign), so an
        // aligned cluster would be internally disconnected.
        let p = if rng.gen::<f64>() < 0.25 {
            let loc = &locations[rng.gen_range(0..locations.len())];
            vec2(
                loc.x + (rng.gen::<f64>() - 0.5) * 24.0,
                loc.y + (rng.gen::<f64>() - 0.5) * 24.0,
            )
        } else {
            vec2(
                lo.x + rng.gen::<f64>() * (hi.x - lo.x),
                lo.y + rng.gen::<f64>() * (hi.y - lo.y),
            )
        };
        if !map.contains(p) || obstacles.point_blocked(p) {
            continue;
        }
        let heading = (rng.gen::<f64>() - 0.5) * std::f64::consts::TAU;
        nodes.push(pose(p.x, p.y, wrap_angle(heading)));
    }

    // Examine each node's 4k-nearest neighborhood in both directions and
    // keep every edge that fits. Half to two thirds of the heading
    // combinations are unreachable or too sharp for the steering cap, so
    // the accepted out-degree lands near k; keeping all fits (rather than
    // stopping at the first k) matters because the nearest fits are often
    // winding loops while the straighter hops sit a little farther out.
    let mut edges: Vec<RoadEdge> = Vec::new();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    let mut decided: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
    for i in 0..nodes.len() {
        // Neighbors by position, ties by index for determinism. Location
        // and lane nodes examine the whole graph: their fixed headings
        // make fits rarer, and a location without ambient links dooms the
        // plan.
        let examine_cap = if i < locations.len() + n_guards {
            nodes.len()
        } else {
            4 * k_neighbors
        };
        let mut order: Vec<usize> = (0..nodes.len()).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            nodes[i]
                .dist(nodes[a])
                .total_cmp(&nodes[i].dist(nodes[b]))
                .then(a.cmp(&b))
        });
        for &j in order.iter().take(examine_cap) {
            for (a, b) in [(i, j), (j, i)] {
                if decided.insert((a, b)) {
                    if let Some(edge) = try_edge(map, obstacles, model, &nodes, a, b) {
                        adjacency[a].push(edges.len());
                        edges.push(edge);
                    }
                }
            }
        }
    }

    Ok(Roadmap {
        nodes,
        edges,
        adjacency,
        n_locations: locations.len(),
    })
}

fn try_edge(
    map: &Heightmap,
    obstacles: &StaticMap,
    model: &EnergyModel,
    nodes: &[Pose2D],
    i: usize,
    j: usize,
) -> Option<RoadEdge> {
    let pair = fit_clothoid_pair(nodes[i], nodes[j]).ok()?;
    if pair.max_abs_curvature() > KAPPA_MAX {
        return None;
    }
    let spline = PathSpline::new(vec![pair]);
    let samples = spline.sample(EDGE_SAMPLE_SPACING);
    let polyline: Vec<Vec2> = samples.iter().map(|p| p.position()).collect();
    if polyline.iter().any(|&p| !map.contains(p)) {
        return None;
    }
    if obstacles.polyline_blocked(&polyline) {
        return None;
    }
    let energy = edge_energy(model, map, &polyline).ok()?;
    let pair = spline.pairs()[0].clone();
    Some(RoadEdge {
        from: i,
        to: j,
        pair,
        energy,
    })
}

fn reversed(r: &Roadmap) -> Roadmap {
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); r.nodes.len()];
    let edges: Vec<RoadEdge> = r
        .edges
        .iter()
        .map(|e| RoadEdge {
            from: e.to,
            to: e.from,
            pair: e.pair.clone(),
            energy: e.energy,
        })
        .collect();
    for (idx, e) in edges.iter().enumerate() {
        adjacency[e.from].push(idx);
    }
    Roadmap {
        nodes: r.nodes.clone(),
        edges,
        adjacency,
        n_locations: r.n_locations,
    }
}

/// Dijkstra from `source`; returns (cost, incoming edge index) per node.
fn dijkstra(r: &Roadmap, source: usize) -> Vec<(f64, Option<usize>)> {
    let mut best: Vec<(f64, Option<usize>)> = vec![(f64::INFINITY, None); r.nodes.len()];
    best[source].0 = 0.0;
    // Max-heap on Reverse-style ordering: encode as negative cost, ties by
    // node index so the visit order is deterministic.
    let mut heap: BinaryHeap<(std::cmp::Reverse<u64>, usize)> = BinaryHeap::new();
    let key = |c: f64| std::cmp::Reverse(c.to_bits());
    heap.push((key(0.0), source));
    while let Some((std::cmp::Reverse(bits), u)) = heap.pop() {
        let c = f64::from_bits(bits);
        if c > best[u].0 {
            continue;
        }
        for &ei in &r.adjacency[u] {
            let e = &r.edges[ei];
            let nc = c + e.energy;
            if nc < best[e.to].0 {
                best[e.to] = (nc, Some(ei));
                heap.push((key(nc), e.to));
            }
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct GoalGraph {
    /// Node indices of the locations within the roadmap (identity order).
    pub locations: Vec<usize>,
    pub cost: Vec<Vec<f64>>,
    /// paths[i][j] realizes cost[i][j]; empty spline on the diagonal.
    pub paths: Vec<Vec<PathSpline>>,
}

/// All-pairs minimum-energy paths between mission locations over the
/// roadmap.
pub fn min_energy_paths(roadmap: &Roadmap, _model: &EnergyModel) -> GoalGraph {
    let n = roadmap.n_locations;
    let mut cost = vec![vec![f64::INFINITY; n]; n];
    let mut paths: Vec<Vec<PathSpline>> = vec![vec![PathSpline::default(); n]; n];
    for i in 0..n {
        let best = dijkstra(roadmap, i);
        for j in 0..n {
            if i == j {
                cost[i][j] = 0.0;
                continue;
            }
            cost[i][j] = best[j].0;
            if best[j].0.is_finite() {
                // Walk incoming edges back to the source.
                let mut chain: Vec<usize> = Vec::new();
                let mut cur = j;
                while cur != i {
                    let ei = best[cur].1.expect("finite cost implies a path");
                    chain.push(ei);
                    cur = roadmap.edges[ei].from;
                }
                chain.reverse();
                let pairs: Vec<ClothoidPair> =
                    chain.iter().map(|&ei| roadmap.edges[ei].pair.clone()).collect();
                paths[i][j] = PathSpline::new(pairs);
            }
        }
    }
    GoalGraph {
        locations: (0..n).collect(),
        cost,
        paths,
    }
}

/// Exact minimum-cost Hamiltonian cycle anchored at location 0, by
/// Held-Karp over subsets. Among equal-cost tours the lexicographically
/// smallest visit order wins, which makes planning deterministic even on
/// symmetric instances.
pub fn solve_atsp(cost: &[Vec<f64>]) -> Result<Vec<usize>, PlanError> {
    let n = cost.len();
    assert!(n >= 2, "tour needs the station and at least one location");
    assert!(cost.iter().all(|row| row.len() == n));
    if n > ATSP_EXACT_LIMIT {
        return Err(PlanError::TooLarge(n));
    }
    let m = n - 1; // cities 1..n mapped to bits 0..m
    let full: usize = (1 << m) - 1;
    // to_go[mask][j]: cheapest completion visiting exactly `mask` then
    // returning to 0, starting at city j+1.
    let mut to_go = vec![vec![f64::INFINITY; m]; full + 1];
    for j in 0..m {
        to_go[0][j] = cost[j + 1][0];
    }
    for mask in 1..=full {
        for j in 0..m {
            if mask & (1 << j) != 0 {
                continue;
            }
            let mut best = f64::INFINITY;
            for k in 0..m {
                if mask & (1 << k) == 0 {
                    continue;
                }
                let c = cost[j + 1][k + 1] + to_go[mask & !(1 << k)][k];
                if c < best {
                    best = c;
                }
            }
            to_go[mask][j] = best;
        }
    }
    let mut total = f64::INFINITY;
    for k in 0..m {
        let c = cost[0][k + 1] + to_go[full & !(1 << k)][k];
        if c < total {
            total = c;
        }
    }

    // Forward reconstruction: at each step take the smallest next city
    // whose completion matches the optimal remainder exactly. `remaining`
    // is always a value the DP itself produced (never re-derived by
    // subtraction), so the comparison is the same arithmetic the DP did
    // and at least one city matches bit-for-bit.
    let mut order = vec![0usize];
    let mut mask = full;
    let mut cur = 0usize; // location index
    let mut remaining = total;
    while mask != 0 {
        let mut chosen = None;
        for k in 0..m {
            if mask & (1 << k) == 0 {
                continue;
            }
            if cost[cur][k + 1] + to_go[mask & !(1 << k)][k] == remaining {
                chosen = Some(k);
                break;
            }
        }
        let k = chosen.expect("DP reconstruction lost the optimal tour");
        order.push(k + 1);
        mask &= !(1 << k);
        remaining = to_go[mask][k];
        cur = k + 1;
    }
    order.push(0);
    Ok(order)
}

/// Nearest-neighbor construction plus directed 2-opt, for instances past
/// the exact limit. The result is feasible but flagged non-optimal.
pub fn solve_atsp_fallback(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut visited = vec![false; n];
    visited[0] = true;
    let mut order = vec![0usize];
    let mut cur = 0;
    for _ in 1..n {
        let next = (0..n)
            .filter(|&j| !visited[j])
            .min_by(|&a, &b| cost[cur][a].total_cmp(&cost[cur][b]).then(a.cmp(&b)))
            .unwrap();
        visited[next] = true;
        order.push(next);
        cur = next;
    }
    order.push(0);

    let tour_cost = |o: &[usize]| -> f64 { o.windows(2).map(|w| cost[w[0]][w[1]]).sum() };
    let mut best_cost = tour_cost(&order);
    // Directed 2-opt: segment reversal re-prices every arc inside, so
    // evaluate candidate tours whole.
    let mut improved = true;
    while improved {
        improved = false;
        for a in 1..order.len() - 2 {
            for b in a + 1..order.len() - 1 {
                let mut cand = order.clone();
                cand[a..=b].reverse();
                let c = tour_cost(&cand);
                if c + 1e-12 < best_cost {
                    order = cand;
                    best_cost = c;
                    improved = true;
                }
            }
        }
    }
    order
}

#[derive(Debug, Clone)]
pub struct PlanLeg {
    pub from: usize,
    pub to: usize,
    pub energy: f64,
    pub polyline: Vec<Pose2D>,
}

#[derive(Debug, Clone)]
pub struct MissionPlan {
    /// Location indices, starting and ending at the station (0), with any
    /// inserted recharge visits included.
    pub visit_order: Vec<usize>,
    pub legs: Vec<PlanLeg>,
    /// Positions within `visit_order` that were inserted for recharging.
    pub recharge_stops: Vec<usize>,
    pub tour_optimal: bool,
    pub total_energy: f64,
}

/// Walk the tour inserting station visits so that committing to a leg
/// always leaves enough battery to reach the leg's end *and* return to the
/// station afterwards. Recharges are to full.
pub fn insert_recharges(
    order: &[usize],
    goals: &GoalGraph,
    model: &EnergyModel,
    start_level: f64,
) -> Result<MissionPlan, PlanError> {
    assert_eq!(order.first(), Some(&0), "tour must start at the station");
    assert_eq!(order.last(), Some(&0), "tour must end at the station");
    let capacity = model.battery_capacity;
    for &loc in &order[1..order.len() - 1] {
        if goals.cost[0][loc] + goals.cost[loc][0] > capacity {
            return Err(PlanError::InfeasibleLeg(loc));
        }
    }

    let mut visit_order = vec![0usize];
    let mut recharge_stops = Vec::new();
    let mut legs: Vec<PlanLeg> = Vec::new();
    let mut level = start_level.min(capacity);
    let mut cur = 0usize;
    let push_leg = |from: usize, to: usize| -> PlanLeg {
        let spline = &goals.paths[from][to];
        let polyline = if spline.is_empty() {
            vec![]
        } else {
            spline.sample(PLAN_SAMPLE_SPACING)
        };
        PlanLeg {
            from,
            to,
            energy: goals.cost[from][to],
            polyline,
        }
    };

    for &target in &order[1..] {
        if target == cur {
            continue;
        }
        let need = goals.cost[cur][target] + goals.cost[target][0];
        if level < need {
            // Detour to the station and recharge to full. The maintained
            // invariant (level always covers the trip home) makes the
            // detour itself feasible.
            assert!(level >= goals.cost[cur][0] - 1e-9, "battery invariant violated");
            if cur != 0 {
                legs.push(push_leg(cur, 0));
                visit_order.push(0);
                recharge_stops.push(visit_order.len() - 1);
                cur = 0;
            }
            level = capacity;
            if goals.cost[cur][target] + goals.cost[target][0] > level {
                return Err(PlanError::InfeasibleLeg(target));
            }
        }
        level -= goals.cost[cur][target];
        legs.push(push_leg(cur, target));
        visit_order.push(target);
        cur = target;
    }

    let total_energy = legs.iter().map(|l| l.energy).sum();
    Ok(MissionPlan {
        visit_order,
        legs,
        recharge_stops,
        tour_optimal: true,
        total_energy,
    })
}

/// Replay a plan against the energy model, asserting the battery invariant
/// at every polyline vertex. Returns the minimum level seen.
pub fn replay_plan(
    plan: &MissionPlan,
    model: &EnergyModel,
    map: &Heightmap,
    start_level: f64,
) -> Result<f64, PlanError> {
    let mut level = start_level.min(model.battery_capacity);
    let mut min_level = level;
    for leg in &plan.legs {
        if leg.from == 0 {
            level = model.battery_capacity;
        }
        let pts: Vec<Vec2> = leg.polyline.iter().map(|p| p.position()).collect();
        for w in pts.windows(2) {
            let e = edge_energy(model, map, w).map_err(|err| PlanError::BadFile(err.to_string()))?;
            level -= e;
            min_level = min_level.min(level);
        }
    }
    Ok(min_level)
}

/// Plan file: visit order, per-leg energies, and the sampled polyline per
/// leg as `x y heading` triples.
pub fn plan_to_text(plan: &MissionPlan, version: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {version} plan");
    let _ = writeln!(
        out,
        "order {}",
        plan.visit_order
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    );
    let _ = writeln!(
        out,
        "recharges {}",
        plan.recharge_stops
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    );
    let _ = writeln!(out, "optimal {}", plan.tour_optimal);
    for leg in &plan.legs {
        let _ = writeln!(
            out,
            "leg {} {} {} {}",
            leg.from,
            leg.to,
            leg.energy,
            leg.polyline.len()
        );
        for p in &leg.polyline {
            let _ = writeln!(out, "{} {} {}", p.x, p.y, p.theta);
        }
    }
    out
}

pub fn plan_from_text(text: &str) -> Result<MissionPlan, PlanError> {
    let mut lines = text.lines().filter(|l| !l.trim_start().starts_with('#'));
    let bad = |msg: &str| PlanError::BadFile(msg.to_string());
    let order_line = lines.next().ok_or_else(|| bad("missing order line"))?;
    let visit_order: Vec<usize> = order_line
        .strip_prefix("order")
        .ok_or_else(|| bad("expected order line"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad("bad order index")))
        .collect::<Result<_, _>>()?;
    let recharge_line = lines.next().ok_or_else(|| bad("missing recharges line"))?;
    let recharge_stops: Vec<usize> = recharge_line
        .strip_prefix("recharges")
        .ok_or_else(|| bad("expected recharges line"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad("bad recharge index")))
        .collect::<Result<_, _>>()?;
    let optimal_line = lines.next().ok_or_else(|| bad("missing optimal line"))?;
    let tour_optimal = optimal_line
        .strip_prefix("optimal")
        .ok_or_else(|| bad("expected optimal line"))?
        .trim()
        .parse::<bool>()
        .map_err(|_| bad("bad optimal flag"))?;

    let mut legs = Vec::new();
    while let Some(line) = lines.next() {
        let rest = line
            .strip_prefix("leg")
            .ok_or_else(|| bad("expected leg line"))?;
        let mut it = rest.split_whitespace();
        let from = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad leg from"))?;
        let to = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad leg to"))?;
        let energy = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad leg energy"))?;
        let count: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad leg count"))?;
        let mut polyline = Vec::with_capacity(count);
        for _ in 0..count {
            let pl = lines.next().ok_or_else(|| bad("short polyline"))?;
            let vals: Vec<f64> = pl
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad("bad polyline number")))
                .collect::<Result<_, _>>()?;
            if vals.len() != 3 {
                return Err(bad("polyline line needs x y heading"));
            }
            polyline.push(pose(vals[0], vals[1], vals[2]));
        }
        legs.push(PlanLeg {
            from,
            to,
            energy,
            polyline,
        });
    }
    let total_energy = legs.iter().map(|l| l.energy).sum();
    Ok(MissionPlan {
        visit_order,
        legs,
        recharge_stops,
        tour_optimal,
        total_energy,
    })
}
