//! Sampling-based planning over the occupancy grid: RRT* point-to-point
//! planning, random trajectory graphs, and loop extraction.

use crate::grid::{CellState, OccupancyGrid};
use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("start position {0:?} is in collision or outside the grid")]
    StartInCollision(Vector3<f64>),
    #[error("goal position {0:?} is in collision or outside the grid")]
    GoalInCollision(Vector3<f64>),
    #[error("could not place {placed} of {requested} graph nodes in free space")]
    TooFewNodes { requested: usize, placed: usize },
}

/// Occupancy grid plus precomputed clearance distances. Unknown voxels are
/// treated as obstacles.
pub struct FreeSpace<'g> {
    pub grid: &'g OccupancyGrid,
    clearance: Vec<f64>,
}

impl<'g> FreeSpace<'g> {
    pub fn new(grid: &'g OccupancyGrid) -> Self {
        FreeSpace {
            grid,
            clearance: grid.clearance_field(),
        }
    }

    /// A point passes when its voxel is free and the nearest non-free voxel
    /// center is at least `clearance` plus half a voxel away.
    pub fn point_ok(&self, p: &Vector3<f64>, clearance: f64) -> bool {
        match self.grid.voxel_of(p) {
            Some(idx) => {
                self.grid.state(idx) == CellState::Free
                    && self.clearance[self.grid.linear(idx)]
                        >= clearance + 0.5 * self.grid.resolution
            }
            None => false,
        }
    }

    /// Segment check by sampling at half-voxel spacing.
    pub fn segment_ok(&self, a: &Vector3<f64>, b: &Vector3<f64>, clearance: f64) -> bool {
        let len = (b - a).norm();
        let step = self.grid.resolution * 0.5;
        let n = (len / step).ceil().max(1.0) as usize;
        for i in 0..=n {
            let p = a + (b - a) * (i as f64 / n as f64);
            if !self.point_ok(&p, clearance) {
                return false;
            }
        }
        true
    }

    pub fn polyline_ok(&self, pts: &[Vector3<f64>], clearance: f64) -> bool {
        if pts.len() == 1 {
            return self.point_ok(&pts[0], clearance);
        }
        pts.windows(2)
            .all(|w| self.segment_ok(&w[0], &w[1], clearance))
    }
}

#[derive(Debug, Clone)]
pub struct RrtParams {
    /// Maximum extension length per iteration, meters.
    pub step: f64,
    /// Required obstacle clearance, meters.
    pub clearance: f64,
    pub max_iters: usize,
    /// Probability of sampling the goal instead of free space.
    pub goal_bias: f64,
    /// Scale of the shrinking rewire radius gamma * (ln n / n)^(1/3).
    pub rewire_gamma: f64,
    /// Stop at the first feasible path instead of spending all iterations.
    pub early_stop: bool,
}

impl Default for RrtParams {
    fn default() -> Self {
        RrtParams {
            step: 0.75,
            clearance: 0.5,
            max_iters: 5000,
            goal_bias: 0.1,
            rewire_gamma: 8.0,
            early_stop: false,
        }
    }
}

struct Node {
    pos: Vector3<f64>,
    parent: usize,
    cost: f64,
}

pub fn path_length(path: &[Vector3<f64>]) -> f64 {
    path.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// RRT* between two free-space points. `Ok(None)` means no path was found
/// within the iteration budget (as opposed to invalid endpoints).
pub fn rrt_star(
    space: &FreeSpace,
    start: Vector3<f64>,
    goal: Vector3<f64>,
    params: &RrtParams,
    seed: u64,
) -> Result<Option<Vec<Vector3<f64>>>, PlanError> {
    if !space.point_ok(&start, params.clearance) {
        return Err(PlanError::StartInCollision(start));
    }
    if !space.point_ok(&goal, params.clearance) {
        return Err(PlanError::GoalInCollision(goal));
    }
    if (goal - start).norm() < 1e-12 {
        return Ok(Some(vec![start]));
    }
    // direct connection shortcut keeps open-space queries near-optimal
    if space.segment_ok(&start, &goal, params.clearance) {
        return Ok(Some(vec![start, goal]));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = space.grid.world_min();
    let hi = space.grid.world_max();
    let mut nodes = vec![Node {
        pos: start,
        parent: usize::MAX,
        cost: 0.0,
    }];
    let mut goal_parent: Option<(usize, f64)> = None; // (node, total cost)

    for _ in 0..params.max_iters {
        let target = if rng.gen_bool(params.goal_bias) {
            goal
        } else {
            Vector3::new(
                rng.gen_range(lo.x..hi.x),
                rng.gen_range(lo.y..hi.y),
                rng.gen_range(lo.z..hi.z),
            )
        };

        // nearest node
        let (nearest, _) = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (i, (n.pos - target).norm_squared()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();

        let from = nodes[nearest].pos;
        let d = target - from;
        let dist = d.norm();
        if dist < 1e-9 {
            continue;
        }
        let new_pos = if dist > params.step {
            from + d * (params.step / dist)
        } else {
            target
        };
        if !space.segment_ok(&from, &new_pos, params.clearance) {
            continue;
        }

        // choose best parent within the shrinking neighborhood
        let n = nodes.len() as f64;
        let radius = (params.rewire_gamma * ((n.ln().max(1.0)) / n).powf(1.0 / 3.0))
            .clamp(params.step, 3.0 * params.step);
        let mut parent = nearest;
        let mut cost = nodes[nearest].cost + (new_pos - from).norm();
        let mut neighbors = Vec::new();
        for (i, node) in nodes.iter().enumerate() {
            let d = (node.pos - new_pos).norm();
            if d <= radius {
                neighbors.push((i, d));
                let c = node.cost + d;
                if c < cost && space.segment_ok(&node.pos, &new_pos, params.clearance) {
                    parent = i;
                    cost = c;
                }
            }
        }
        let new_idx = nodes.len();
        nodes.push(Node {
            pos: new_pos,
            parent,
            cost,
        });

        // rewire neighbors through the new node
        for (i, d) in neighbors {
            let through = cost + d;
            if through + 1e-12 < nodes[i].cost
                && space.segment_ok(&new_pos, &nodes[i].pos, params.clearance)
            {
                nodes[i].parent = new_idx;
                let delta = nodes[i].cost - through;
                nodes[i].cost = through;
                // propagate the improvement to descendants
                let mut stack = vec![i];
                while let Some(j) = stack.pop() {
                    for (k, node) in nodes.iter().enumerate() {
                        if node.parent == j {
                            stack.push(k);
                        }
                    }
                    if j != i {
                        nodes[j].cost -= delta;
                    }
                }
            }
        }

        // try to finish through the new node
        let to_goal = (goal - new_pos).norm();
        if to_goal <= params.step && space.segment_ok(&new_pos, &goal, params.clearance) {
            let total = cost + to_goal;
            if goal_parent.map_or(true, |(_, c)| total < c) {
                goal_parent = Some((new_idx, total));
            }
            if params.early_stop {
                break;
            }
        }
    }

    let Some((gp, _)) = goal_parent else {
        return Ok(None);
    };
    // goal cost may have improved through rewiring; recompute via parents
    let mut path = vec![goal];
    let mut cur = gp;
    while cur != usize::MAX {
        path.push(nodes[cur].pos);
        cur = nodes[cur].parent;
    }
    path.reverse();
    Ok(Some(path))
}

#[derive(Debug, Clone)]
pub struct GraphEdge {
    pub a: usize,
    pub b: usize,
    /// Collision-free polyline from node a to node b.
    pub path: Vec<Vector3<f64>>,
    /// Arc length of `path`, meters.
    pub cost: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrajectoryGraph {
    pub nodes: Vec<Vector3<f64>>,
    pub edges: Vec<GraphEdge>,
}

impl TrajectoryGraph {
    pub fn incident(&self, node: usize) -> impl Iterator<Item = (usize, &GraphEdge)> {
        self.edges
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.a == node || e.b == node)
    }

    fn components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.nodes.len()];
        let mut next = 0;
        for s in 0..self.nodes.len() {
            if comp[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            comp[s] = next;
            while let Some(u) = stack.pop() {
                for (_, e) in self.incident(u) {
                    let v = if e.a == u { e.b } else { e.a };
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn num_components(&self) -> usize {
        let comp = self.components();
        comp.iter().copied().max().map_or(0, |m| m + 1)
    }

    /// A cycle exists iff some component has at least as many edges as nodes.
    pub fn has_cycle(&self) -> bool {
        let comp = self.components();
        let n_comp = comp.iter().copied().max().map_or(0, |m| m + 1);
        let mut node_count = vec![0usize; n_comp];
        let mut edge_count = vec![0usize; n_comp];
        for &c in &comp {
            node_count[c] += 1;
        }
        for e in &self.edges {
            edge_count[comp[e.a]] += 1;
        }
        (0..n_comp).any(|c| edge_count[c] >= node_count[c])
    }
}

#[derive(Debug, Clone)]
pub struct GraphParams {
    pub rrt: RrtParams,
    /// Pairwise planning is only attempted within this straight-line distance.
    pub pair_cutoff: f64,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams {
            rrt: RrtParams {
                early_stop: true,
                max_iters: 2000,
                ..RrtParams::default()
            },
            pair_cutoff: 40.0,
        }
    }
}

/// Samples `n_nodes` positions uniformly over free voxels with clearance and
/// plans RRT* paths between every pair within the distance cutoff. Failed
/// pairs are simply absent from the edge list.
pub fn build_graph(
    space: &FreeSpace,
    n_nodes: usize,
    params: &GraphParams,
    seed: u64,
) -> Result<TrajectoryGraph, PlanError> {
    let grid = space.grid;
    let candidates: Vec<[usize; 3]> = {
        let mut v = Vec::new();
        for z in 0..grid.dims[2] {
            for y in 0..grid.dims[1] {
                for x in 0..grid.dims[0] {
                    let idx = [x, y, z];
                    if space.point_ok(&grid.center(idx), params.rrt.clearance) {
                        v.push(idx);
                    }
                }
            }
        }
        v
    };
    if candidates.len() < 2 || n_nodes < 2 {
        return Err(PlanError::TooFewNodes {
            requested: n_nodes,
            placed: candidates.len().min(n_nodes),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes: Vec<Vector3<f64>> = Vec::new();
    let mut used = std::collections::HashSet::new();
    let mut attempts = 0;
    while nodes.len() < n_nodes && attempts < n_nodes * 200 {
        attempts += 1;
        let idx = candidates[rng.gen_range(0..candidates.len())];
        if used.insert(idx) {
            nodes.push(grid.center(idx));
        }
    }
    if nodes.len() < 2 {
        return Err(PlanError::TooFewNodes {
            requested: n_nodes,
            placed: nodes.len(),
        });
    }

    let mut edges = Vec::new();
    let n = nodes.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if (nodes[j] - nodes[i]).norm() > params.pair_cutoff {
                continue;
            }
            // per-pair RNG stream: parallel and serial construction agree
            let pair_seed = seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add((i * n + j) as u64);
            if let Ok(Some(path)) = rrt_star(space, nodes[i], nodes[j], &params.rrt, pair_seed) {
                let cost = path_length(&path);
                edges.push(GraphEdge {
                    a: i,
                    b: j,
                    path,
                    cost,
                });
            }
        }
    }
    Ok(TrajectoryGraph { nodes, edges })
}

/// A loop sampled from the graph: the node cycle plus the concatenated edge
/// polylines (first point == last point).
#[derive(Debug, Clone)]
pub struct LoopPath {
    pub node_cycle: Vec<usize>,
    pub polyline: Vec<Vector3<f64>>,
}

/// Random walk that returns to its start node without immediately reversing
/// the previous edge. `None` when the graph is acyclic.
pub fn sample_loop(graph: &TrajectoryGraph, seed: u64) -> Option<LoopPath> {
    if !graph.has_cycle() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_steps = 4 * graph.nodes.len().max(4);

    for _attempt in 0..200 {
        let start = rng.gen_range(0..graph.nodes.len());
        let mut cycle = vec![start];
        let mut edge_seq: Vec<(usize, bool)> = Vec::new(); // (edge index, forward)
        let mut prev_edge = usize::MAX;
        let mut cur = start;
        for _ in 0..max_steps {
            let options: Vec<(usize, usize)> = graph
                .incident(cur)
                .filter(|(ei, _)| *ei != prev_edge)
                .map(|(ei, e)| (ei, if e.a == cur { e.b } else { e.a }))
                .collect();
            if options.is_empty() {
                break;
            }
            let (ei, next) = options[rng.gen_range(0..options.len())];
            edge_seq.push((ei, graph.edges[ei].a == cur));
            cycle.push(next);
            prev_edge = ei;
            cur = next;
            if cur == start {
                let mut polyline: Vec<Vector3<f64>> = vec![graph.nodes[start]];
                for &(ei, forward) in &edge_seq {
                    let e = &graph.edges[ei];
                    if forward {
                        polyline.extend(e.path.iter().skip(1).copied());
                    } else {
                        polyline.extend(e.path.iter().rev().skip(1).copied());
                    }
                }
                return Some(LoopPath {
                    node_cycle: cycle,
                    polyline,
                });
            }
        }
    }
    None
}
