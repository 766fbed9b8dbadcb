//! Primal network simplex for uncapacitated min-cost flow.
//!
//! Minimises `sum c_a x_a` subject to `out(v) - in(v) = b_v` and `x >= 0`.
//! The starting basis joins every node to an artificial root with a big-M
//! arc and is strongly feasible; the leaving-arc rule keeps it that way,
//! which rules out cycling. Tree structure, potentials and flows are
//! rebuilt from scratch after every pivot, so rounding does not accumulate
//! across pivots.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub(crate) struct Network {
    pub supply: Vec<f64>,
    pub tail: Vec<usize>,
    pub head: Vec<usize>,
    pub cost: Vec<f64>,
}

impl Network {
    pub fn with_nodes(supply: Vec<f64>) -> Self {
        Self {
            supply,
            ..Self::default()
        }
    }

    pub fn add_arc(&mut self, tail: usize, head: usize, cost: f64) -> usize {
        self.tail.push(tail);
        self.head.push(head);
        self.cost.push(cost);
        self.tail.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.supply.len()
    }

    pub fn arc_count(&self) -> usize {
        self.tail.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SimplexOptions {
    pub max_pivots: Option<usize>,
    /// Relative magnitude of the deterministic cost perturbation; 0 disables it.
    pub perturbation: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct FlowSolution {
    /// Flow on every real arc.
    pub flow: Vec<f64>,
    /// Node potentials `y` with `c_a - y_tail + y_head >= 0` on every real arc
    /// and equality on arcs that carry flow.
    pub potential: Vec<f64>,
    pub pivots: usize,
}

impl FlowSolution {
    pub fn primal(&self, net: &Network) -> f64 {
        self.flow.iter().zip(&net.cost).map(|(x, c)| x * c).sum()
    }

    pub fn dual(&self, net: &Network) -> f64 {
        self.potential
            .iter()
            .zip(&net.supply)
            .map(|(y, b)| y * b)
            .sum()
    }
}

struct Tree {
    root: usize,
    tail: Vec<usize>,
    head: Vec<usize>,
    cost: Vec<f64>,
    supply: Vec<f64>,
    in_tree: Vec<bool>,
    adjacency: Vec<Vec<usize>>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    /// Whether `pred[v]` points from `v` to its parent.
    up: Vec<bool>,
    depth: Vec<usize>,
    y: Vec<f64>,
    flow: Vec<f64>,
    order: Vec<usize>,
    snap: f64,
}

impl Tree {
    fn rebuild(&mut self) {
        let root = self.root;
        self.order.clear();
        self.order.push(root);
        self.depth[root] = 0;
        self.y[root] = 0.0;
        self.parent[root] = usize::MAX;
        self.pred[root] = usize::MAX;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &a in &self.adjacency[v] {
                if a == self.pred[v] {
                    continue;
                }
                let (w, up) = if self.tail[a] == v {
                    (self.head[a], false)
                } else {
                    (self.tail[a], true)
                };
                self.parent[w] = v;
                self.pred[w] = a;
                self.up[w] = up;
                self.depth[w] = self.depth[v] + 1;
                // Tree arcs have zero reduced cost: y_tail - y_head = c.
                self.y[w] = if up {
                    self.y[v] + self.cost[a]
                } else {
                    self.y[v] - self.cost[a]
                };
                self.order.push(w);
                queue.push_back(w);
            }
        }
        debug_assert_eq!(self.order.len(), self.supply.len());

        let mut subtree = self.supply.clone();
        for &v in self.order.iter().skip(1).rev() {
            let a = self.pred[v];
            let s = subtree[v];
            let x = if self.up[v] { s } else { -s };
            self.flow[a] = if x.abs() <= self.snap { 0.0 } else { x.max(0.0) };
            subtree[self.parent[v]] += s;
        }
    }

    fn reduced_cost(&self, a: usize) -> f64 {
        self.cost[a] - self.y[self.tail[a]] + self.y[self.head[a]]
    }

    fn join(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a];
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b];
        }
        while a != b {
            a = self.parent[a];
            b = self.parent[b];
        }
        a
    }

    /// Node whose pred arc leaves the basis when `entering` comes in.
    fn leaving(&self, entering: usize) -> usize {
        let first = self.tail[entering];
        let second = self.head[entering];
        let join = self.join(first, second);
        let mut delta = f64::INFINITY;
        let mut out = usize::MAX;
        // Flow moves from the join down to `first`: arcs pointing up shrink.
        let mut v = first;
        while v != join {
            if self.up[v] && self.flow[self.pred[v]] < delta {
                delta = self.flow[self.pred[v]];
                out = v;
            }
            v = self.parent[v];
        }
        // Flow moves from `second` up to the join: arcs pointing down shrink.
        let mut v = second;
        while v != join {
            if !self.up[v] && self.flow[self.pred[v]] <= delta {
                delta = self.flow[self.pred[v]];
                out = v;
            }
            v = self.parent[v];
        }
        out
    }

    fn exchange(&mut self, entering: usize, leaving: usize) {
        for v in [self.tail[leaving], self.head[leaving]] {
            let list = &mut self.adjacency[v];
            if let Some(k) = list.iter().position(|&a| a == leaving) {
                list.swap_remove(k);
            }
        }
        self.in_tree[leaving] = false;
        self.flow[leaving] = 0.0;
        self.adjacency[self.tail[entering]].push(entering);
        self.adjacency[self.head[entering]].push(entering);
        self.in_tree[entering] = true;
    }
}

fn perturbation(a: usize) -> f64 {
    // Deterministic pseudo-random value in [0, 1).
    let h = (a as u64 ^ 0x9e37_79b9_7f4a_7c15).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    ((h >> 11) as f64) / ((1u64 << 53) as f64)
}

pub(crate) fn solve(net: &Network, opts: SimplexOptions) -> Result<FlowSolution> {
    let nodes = net.node_count();
    let real = net.arc_count();
    let total: f64 = net.supply.iter().sum();
    let mass_scale = net.supply.iter().map(|b| b.abs()).sum::<f64>().max(1.0);
    if total.abs() > 1e-9 * mass_scale {
        return Err(Error::Invalid(format!(
            "network supplies do not balance: net supply {total}"
        )));
    }

    let cost_scale = net.cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let big_m = (cost_scale + 1.0) * (nodes as f64 + 1.0);
    let root = nodes;

    let mut tail = net.tail.clone();
    let mut head = net.head.clone();
    let mut cost: Vec<f64> = if opts.perturbation > 0.0 {
        net.cost
            .iter()
            .enumerate()
            .map(|(a, c)| c + opts.perturbation * cost_scale.max(1.0) * perturbation(a))
            .collect()
    } else {
        net.cost.clone()
    };
    let mut supply = net.supply.clone();
    supply.push(0.0);
    let mut adjacency = vec![Vec::new(); nodes + 1];
    for v in 0..nodes {
        let a = tail.len();
        if net.supply[v] >= 0.0 {
            tail.push(v);
            head.push(root);
        } else {
            tail.push(root);
            head.push(v);
        }
        cost.push(big_m);
        adjacency[v].push(a);
        adjacency[root].push(a);
    }
    let arcs = tail.len();
    let mut in_tree = vec![false; arcs];
    in_tree[real..].iter_mut().for_each(|t| *t = true);

    let mut tree = Tree {
        root,
        tail,
        head,
        cost,
        supply,
        in_tree,
        adjacency,
        parent: vec![usize::MAX; nodes + 1],
        pred: vec![usize::MAX; nodes + 1],
        up: vec![false; nodes + 1],
        depth: vec![0; nodes + 1],
        y: vec![0.0; nodes + 1],
        flow: vec![0.0; arcs],
        order: Vec::with_capacity(nodes + 1),
        snap: 1e-14 * mass_scale,
    };
    tree.rebuild();

    let n2 = (nodes + 1) * (nodes + 1);
    let max_pivots = opts.max_pivots.unwrap_or(50 * n2);
    let block = ((real as f64).sqrt().ceil() as usize).max(16).min(real.max(1));
    let eps = 1e-12 * (cost_scale + 1.0);
    let mut next = 0usize;
    let mut pivots = 0usize;

    loop {
        // Block search pricing over real arcs only; artificial arcs that
        // leave the basis never return.
        let entering = {
            let mut best = None;
            let mut best_rc = -eps;
            let mut scanned = 0usize;
            let mut in_block = 0usize;
            while scanned < real {
                let a = next;
                next += 1;
                if next == real {
                    next = 0;
                }
                scanned += 1;
                in_block += 1;
                if !tree.in_tree[a] {
                    let rc = tree.reduced_cost(a);
                    if rc < best_rc {
                        best_rc = rc;
                        best = Some(a);
                    }
                }
                if in_block == block {
                    if best.is_some() {
                        break;
                    }
                    in_block = 0;
                }
            }
            best
        };
        let Some(entering) = entering else { break };
        if pivots >= max_pivots {
            let out = FlowSolution {
                flow: tree.flow[..real].to_vec(),
                potential: tree.y[..nodes].to_vec(),
                pivots,
            };
            return Err(Error::NonConvergence {
                iterations: pivots,
                primal: out.primal(net),
                dual: out.dual(net),
            });
        }
        let v = tree.leaving(entering);
        let leaving = tree.pred[v];
        tree.exchange(entering, leaving);
        tree.rebuild();
        pivots += 1;
    }

    if opts.perturbation > 0.0 {
        // Report potentials for the true costs on the optimal basis.
        tree.cost[..real].copy_from_slice(&net.cost);
        tree.rebuild();
    }

    let leftover = tree.flow[real..].iter().fold(0.0f64, |m, &x| m.max(x));
    if leftover > 1e-9 * mass_scale {
        return Err(Error::Numerical(format!(
            "no feasible flow: {leftover:e} units remain on artificial arcs"
        )));
    }
    log::debug!("network simplex: {nodes} nodes, {real} arcs, {pivots} pivots");
    Ok(FlowSolution {
        flow: tree.flow[..real].to_vec(),
        potential: tree.y[..nodes].to_vec(),
        pivots,
    })
}
