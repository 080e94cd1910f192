//! Max-flow / min-cut with the Boykov-Kolmogorov augmenting-tree search.
//!
//! Two search trees grow from the source and the sink over non-saturated
//! arcs. When they touch, the path through the contact arc is augmented; the
//! nodes cut off by saturated arcs become orphans and try to re-attach to
//! their own tree before being released. Trees are reused between
//! augmentations, which is what makes the method fast on the shallow,
//! grid-like graphs produced by segmentation energies.
//!
//! Given the same arc insertion order the search is deterministic.

use std::collections::VecDeque;

use crate::error::{Error, Result};

const FREE: u8 = 0;
const SOURCE: u8 = 1;
const SINK: u8 = 2;

const NO_PARENT: usize = usize::MAX;
const ROOT: usize = usize::MAX - 1;

/// A directed network with paired residual arcs.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    source: usize,
    sink: usize,
    head: Vec<usize>,
    /// Residual capacity per arc; arc `a ^ 1` is the reverse of arc `a`.
    residual: Vec<f64>,
    out: Vec<Vec<usize>>,
}

/// Result of [`max_flow`].
#[derive(Debug, Clone, PartialEq)]
pub struct MinCut {
    pub flow: f64,
    /// `true` for nodes on the source side of the minimum cut.
    pub source_side: Vec<bool>,
}

impl FlowNetwork {
    pub fn new(nodes: usize, source: usize, sink: usize) -> Result<Self> {
        if source >= nodes || sink >= nodes || source == sink {
            return Err(Error::InvalidInput(format!(
                "source {source} and sink {sink} must be distinct nodes below {nodes}"
            )));
        }
        Ok(Self {
            source,
            sink,
            head: Vec::new(),
            residual: Vec::new(),
            out: vec![Vec::new(); nodes],
        })
    }

    pub fn node_count(&self) -> usize {
        self.out.len()
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    /// Number of arc pairs.
    pub fn edge_count(&self) -> usize {
        self.head.len() / 2
    }

    /// Adds `from -> to` with capacity `cap` and its reverse with `rev_cap`.
    /// Returns the id of the forward arc.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64, rev_cap: f64) -> usize {
        assert!(from < self.out.len() && to < self.out.len(), "node out of range");
        assert!(cap >= 0.0 && rev_cap >= 0.0, "capacities must be non-negative");
        let a = self.head.len();
        self.head.push(to);
        self.residual.push(cap);
        self.head.push(from);
        self.residual.push(rev_cap);
        self.out[from].push(a);
        self.out[to].push(a + 1);
        a
    }

    /// Current residual capacity of arc `arc`.
    pub fn residual(&self, arc: usize) -> f64 {
        self.residual[arc]
    }

    #[inline]
    fn tail(&self, arc: usize) -> usize {
        self.head[arc ^ 1]
    }

    /// Runs the solver to completion, leaving the residual network in place.
    pub fn solve(&mut self) -> MinCut {
        let flow = Solver::new(self).run();
        let source_side = self.source_side();
        MinCut { flow, source_side }
    }

    /// Nodes that cannot reach the sink in the residual network. Nodes the
    /// flow never touched fall on the source side.
    fn source_side(&self) -> Vec<bool> {
        let n = self.out.len();
        let mut reaches_sink = vec![false; n];
        reaches_sink[self.sink] = true;
        let mut queue = VecDeque::from([self.sink]);
        while let Some(p) = queue.pop_front() {
            for &a in &self.out[p] {
                // Arc a leaves p; its reverse enters p from q.
                let q = self.head[a];
                if !reaches_sink[q] && self.residual[a ^ 1] > 0.0 {
                    reaches_sink[q] = true;
                    queue.push_back(q);
                }
            }
        }
        reaches_sink.iter().map(|&r| !r).collect()
    }
}

/// Maximum flow value and the source side of a minimum cut. The network is
/// not modified.
pub fn max_flow(net: &FlowNetwork) -> MinCut {
    net.clone().solve()
}

struct Solver<'a> {
    net: &'a mut FlowNetwork,
    tree: Vec<u8>,
    /// Arc to the parent: for source-tree nodes it points parent -> node,
    /// for sink-tree nodes node -> parent.
    parent: Vec<usize>,
    active: VecDeque<usize>,
    in_active: Vec<bool>,
    orphans: VecDeque<usize>,
    // Distance-to-terminal labels, valid when `stamp` is current.
    stamp: Vec<u64>,
    dist: Vec<u64>,
    time: u64,
}

impl<'a> Solver<'a> {
    fn new(net: &'a mut FlowNetwork) -> Self {
        let n = net.out.len();
        let mut s = Self {
            tree: vec![FREE; n],
            parent: vec![NO_PARENT; n],
            active: VecDeque::new(),
            in_active: vec![false; n],
            orphans: VecDeque::new(),
            stamp: vec![0; n],
            dist: vec![0; n],
            time: 0,
            net,
        };
        let (src, snk) = (s.net.source, s.net.sink);
        s.tree[src] = SOURCE;
        s.tree[snk] = SINK;
        s.parent[src] = ROOT;
        s.parent[snk] = ROOT;
        s.activate(src);
        s.activate(snk);
        s
    }

    fn activate(&mut self, p: usize) {
        if !self.in_active[p] {
            self.in_active[p] = true;
            self.active.push_back(p);
        }
    }

    /// Residual capacity in the direction the node's tree grows.
    #[inline]
    fn grow_cap(&self, tree: u8, arc: usize) -> f64 {
        if tree == SOURCE {
            self.net.residual[arc]
        } else {
            self.net.residual[arc ^ 1]
        }
    }

    /// Grows the trees until they touch; returns the contact arc oriented
    /// source-tree node -> sink-tree node.
    fn grow(&mut self) -> Option<usize> {
        while let Some(&p) = self.active.front() {
            if self.tree[p] == FREE {
                self.active.pop_front();
                self.in_active[p] = false;
                continue;
            }
            let tp = self.tree[p];
            for k in 0..self.net.out[p].len() {
                let a = self.net.out[p][k];
                if self.grow_cap(tp, a) <= 0.0 {
                    continue;
                }
                let q = self.net.head[a];
                match self.tree[q] {
                    FREE => {
                        self.tree[q] = tp;
                        self.parent[q] = if tp == SOURCE { a } else { a ^ 1 };
                        self.stamp[q] = self.stamp[p];
                        self.dist[q] = self.dist[p] + 1;
                        self.activate(q);
                    }
                    t if t != tp => {
                        return Some(if tp == SOURCE { a } else { a ^ 1 });
                    }
                    _ => {}
                }
            }
            self.active.pop_front();
            self.in_active[p] = false;
        }
        None
    }

    fn augment(&mut self, bridge: usize) -> f64 {
        let mut bottleneck = self.net.residual[bridge];
        let mut p = self.net.tail(bridge);
        while self.parent[p] != ROOT {
            let a = self.parent[p];
            bottleneck = bottleneck.min(self.net.residual[a]);
            p = self.net.tail(a);
        }
        let mut q = self.net.head[bridge];
        while self.parent[q] != ROOT {
            let a = self.parent[q];
            bottleneck = bottleneck.min(self.net.residual[a]);
            q = self.net.head[a];
        }

        self.push(bridge, bottleneck);
        let mut p = self.net.tail(bridge);
        while self.parent[p] != ROOT {
            let a = self.parent[p];
            self.push(a, bottleneck);
            let up = self.net.tail(a);
            if self.net.residual[a] <= 0.0 {
                self.parent[p] = NO_PARENT;
                self.orphans.push_back(p);
            }
            p = up;
        }
        let mut q = self.net.head[bridge];
        while self.parent[q] != ROOT {
            let a = self.parent[q];
            self.push(a, bottleneck);
            let up = self.net.head[a];
            if self.net.residual[a] <= 0.0 {
                self.parent[q] = NO_PARENT;
                self.orphans.push_back(q);
            }
            q = up;
        }
        bottleneck
    }

    #[inline]
    fn push(&mut self, arc: usize, amount: f64) {
        let r = self.net.residual[arc] - amount;
        // The bottleneck arc saturates exactly.
        self.net.residual[arc] = if r <= 0.0 { 0.0 } else { r };
        self.net.residual[arc ^ 1] += amount;
    }

    /// Distance from `p` to its tree's terminal, or `None` when the parent
    /// chain ends at an orphan.
    fn origin_distance(&mut self, p: usize) -> Option<u64> {
        let mut d = 0u64;
        let mut x = p;
        loop {
            if self.stamp[x] == self.time {
                d += self.dist[x];
                break;
            }
            match self.parent[x] {
                NO_PARENT => return None,
                ROOT => {
                    self.stamp[x] = self.time;
                    self.dist[x] = 0;
                    break;
                }
                a => {
                    d += 1;
                    x = if self.tree[x] == SOURCE {
                        self.net.tail(a)
                    } else {
                        self.net.head[a]
                    };
                }
            }
        }
        // Cache distances along the verified chain.
        let mut x = p;
        let mut dx = d;
        while self.stamp[x] != self.time {
            self.stamp[x] = self.time;
            self.dist[x] = dx;
            dx -= 1;
            let a = self.parent[x];
            x = if self.tree[x] == SOURCE {
                self.net.tail(a)
            } else {
                self.net.head[a]
            };
        }
        Some(d)
    }

    fn adopt(&mut self) {
        while let Some(o) = self.orphans.pop_front() {
            let t = self.tree[o];
            let mut best: Option<(usize, u64)> = None;
            for k in 0..self.net.out[o].len() {
                let a = self.net.out[o][k];
                let q = self.net.head[a];
                if self.tree[q] != t {
                    continue;
                }
                // Capacity from q towards o (source tree) or o towards q
                // (sink tree).
                let cap = if t == SOURCE {
                    self.net.residual[a ^ 1]
                } else {
                    self.net.residual[a]
                };
                if cap <= 0.0 {
                    continue;
                }
                if let Some(d) = self.origin_distance(q) {
                    if best.is_none_or(|(_, bd)| d < bd) {
                        best = Some((a, d));
                    }
                }
            }
            if let Some((a, d)) = best {
                self.parent[o] = if t == SOURCE { a ^ 1 } else { a };
                self.stamp[o] = self.time;
                self.dist[o] = d + 1;
                continue;
            }
            // No valid parent: release o and its children.
            for k in 0..self.net.out[o].len() {
                let a = self.net.out[o][k];
                let q = self.net.head[a];
                if self.tree[q] != t {
                    continue;
                }
                let cap = if t == SOURCE {
                    self.net.residual[a ^ 1]
                } else {
                    self.net.residual[a]
                };
                if cap > 0.0 {
                    self.activate(q);
                }
                let pq = self.parent[q];
                if pq != NO_PARENT && pq != ROOT {
                    let parent_of_q = if t == SOURCE {
                        self.net.tail(pq)
                    } else {
                        self.net.head[pq]
                    };
                    if parent_of_q == o {
                        self.parent[q] = NO_PARENT;
                        self.orphans.push_back(q);
                    }
                }
            }
            self.tree[o] = FREE;
        }
    }

    fn run(mut self) -> f64 {
        let mut flow = 0.0;
        while let Some(bridge) = self.grow() {
            self.time += 1;
            flow += self.augment(bridge);
            self.adopt();
        }
        flow
    }
}
