//! Alpha-expansion over the LFSP graph.
//!
//! Each move asks every free superpixel a binary question: keep its label
//! (source side of the cut) or switch to `alpha` (sink side). Superpixels
//! that cannot change, namely seeds and those already labeled `alpha`, are
//! left out of the network and their pairwise terms are folded into their
//! neighbors' terminal links. Because the pairwise term is a Potts metric
//! every move is solved exactly by one min-cut.

use serde::{Deserialize, Serialize};

use crate::energy::{total_energy, EnergyParams, UnaryCosts};
use crate::error::{Error, Result};
use crate::graph::LfspGraph;
use crate::lfsp::LfspSegmentation;
use crate::lightfield::ViewLabels;
use crate::maxflow::FlowNetwork;

/// One label (1-based) per superpixel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelField {
    labels: Vec<u8>,
    label_count: u8,
}

impl LabelField {
    pub fn new(labels: Vec<u8>, label_count: u8) -> Self {
        Self { labels, label_count }
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label_count(&self) -> u8 {
        self.label_count
    }

    pub fn get(&self, lfsp: usize) -> u8 {
        self.labels[lfsp]
    }

    /// Per-view pixel labels: every ray takes the label of its superpixel.
    pub fn expand(&self, seg: &LfspSegmentation) -> Result<ViewLabels> {
        if seg.count() != self.labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} superpixels",
                self.labels.len(),
                seg.count()
            )));
        }
        let pixels = seg.assignment().iter().map(|&id| self.labels[id as usize]).collect();
        ViewLabels::new(*seg.geometry(), pixels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerParams {
    pub max_cycles: usize,
    /// A cycle over all labels must lower the energy by more than this to
    /// continue.
    pub tolerance: f64,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        Self {
            max_cycles: 10,
            tolerance: 1e-9,
        }
    }
}

/// Precomputed neighbor lists with pairwise costs `lambda * B`.
struct Neighbors {
    start: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

impl Neighbors {
    fn new(graph: &LfspGraph, params: &EnergyParams) -> Self {
        let n = graph.lfsp_count;
        let mut deg = vec![0usize; n + 1];
        for e in &graph.edges {
            deg[e.a as usize] += 1;
            deg[e.b as usize] += 1;
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + deg[i];
        }
        let mut fill = start.clone();
        let mut entries = vec![(0usize, 0.0); start[n]];
        for e in &graph.edges {
            let w = params.pairwise_weight(e.kind) * e.weight;
            let (a, b) = (e.a as usize, e.b as usize);
            entries[fill[a]] = (b, w);
            fill[a] += 1;
            entries[fill[b]] = (a, w);
            fill[b] += 1;
        }
        Self { start, entries }
    }

    fn of(&self, i: usize) -> &[(usize, f64)] {
        &self.entries[self.start[i]..self.start[i + 1]]
    }
}

fn check_inputs(labels: &LabelField, unary: &UnaryCosts, graph: &LfspGraph) -> Result<()> {
    if labels.labels.len() != unary.len() || unary.len() != graph.lfsp_count {
        return Err(Error::DimensionMismatch(format!(
            "{} labels, {} unary rows, {} superpixels",
            labels.labels.len(),
            unary.len(),
            graph.lfsp_count
        )));
    }
    Ok(())
}

fn expand_with(
    current: &LabelField,
    alpha: u8,
    unary: &UnaryCosts,
    nb: &Neighbors,
) -> Result<LabelField> {
    let n = current.labels.len();
    let labels = &current.labels;
    // Network index of every free superpixel.
    let mut node = vec![usize::MAX; n];
    let mut free = Vec::new();
    for i in 0..n {
        if unary.seed(i).is_none() && labels[i] != alpha {
            node[i] = free.len();
            free.push(i);
        }
    }
    if free.is_empty() {
        return Ok(current.clone());
    }
    let (s, t) = (free.len(), free.len() + 1);
    let mut net = FlowNetwork::new(free.len() + 2, s, t)?;
    // cost1 - cost0 per free node, where x = 1 means "switch to alpha".
    let mut delta: Vec<f64> = free
        .iter()
        .map(|&i| unary.cost(i, alpha) - unary.cost(i, labels[i]))
        .collect();
    for (k, &i) in free.iter().enumerate() {
        let li = labels[i];
        for &(j, w) in nb.of(i) {
            if node[j] == usize::MAX {
                // Fixed neighbor keeps label lj in both outcomes.
                let lj = labels[j];
                let keep = if li != lj { w } else { 0.0 };
                let switch = if alpha != lj { w } else { 0.0 };
                delta[k] += switch - keep;
            } else if i < j {
                // E(xi, xj) with A = E(0,0), B = E(0,1), C = E(1,0), D = 0.
                let lj = labels[j];
                let a = if li != lj { w } else { 0.0 };
                let b = if li != alpha { w } else { 0.0 };
                let c = if alpha != lj { w } else { 0.0 };
                delta[k] += c - a;
                delta[node[j]] -= c;
                let cap = b + c - a;
                if cap > 0.0 {
                    net.add_edge(k, node[j], cap, 0.0);
                }
            }
        }
    }
    for (k, &d) in delta.iter().enumerate() {
        if d > 0.0 {
            net.add_edge(s, k, d, 0.0);
        } else if d < 0.0 {
            net.add_edge(k, t, -d, 0.0);
        }
    }
    let cut = net.solve();
    let mut next = labels.clone();
    for (k, &i) in free.iter().enumerate() {
        if !cut.source_side[k] {
            next[i] = alpha;
        }
    }
    Ok(LabelField::new(next, current.label_count))
}

/// One alpha-expansion move. The result never has higher energy than
/// `current`; a move that would raise it through round-off is discarded.
pub fn expansion_move(
    current: &LabelField,
    alpha: u8,
    unary: &UnaryCosts,
    graph: &LfspGraph,
    params: &EnergyParams,
) -> Result<LabelField> {
    check_inputs(current, unary, graph)?;
    let nb = Neighbors::new(graph, params);
    let before = total_energy(current, unary, graph, params)?;
    let next = expand_with(current, alpha, unary, &nb)?;
    let after = total_energy(&next, unary, graph, params)?;
    Ok(if after <= before { next } else { current.clone() })
}

/// Final labeling plus the energy after every move, starting with the
/// energy of the initial labeling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimized {
    pub initial: LabelField,
    pub labels: LabelField,
    pub trace: Vec<f64>,
    pub cycles: usize,
}

impl Minimized {
    pub fn energy(&self) -> f64 {
        *self.trace.last().expect("trace starts with the initial energy")
    }
}

/// Per-superpixel unary argmin with seeds at their own labels.
pub fn initial_labeling(unary: &UnaryCosts) -> LabelField {
    LabelField::new(unary.argmin(), unary.label_count())
}

/// Alpha-expansion from the unary argmin, sweeping labels in ascending
/// order until a sweep stops improving the energy.
pub fn minimize(
    unary: &UnaryCosts,
    graph: &LfspGraph,
    params: &EnergyParams,
    options: &OptimizerParams,
) -> Result<Minimized> {
    let initial = initial_labeling(unary);
    check_inputs(&initial, unary, graph)?;
    let nb = Neighbors::new(graph, params);
    let mut current = initial.clone();
    let mut energy = total_energy(&current, unary, graph, params)?;
    let mut trace = vec![energy];
    let mut cycles = 0;
    if unary.label_count() < 2 {
        return Ok(Minimized {
            initial,
            labels: current,
            trace,
            cycles,
        });
    }
    while cycles < options.max_cycles {
        cycles += 1;
        let cycle_start = energy;
        for alpha in 1..=unary.label_count() {
            let next = expand_with(&current, alpha, unary, &nb)?;
            let e = total_energy(&next, unary, graph, params)?;
            if e <= energy {
                current = next;
                energy = e;
            }
            trace.push(energy);
        }
        if cycle_start - energy <= options.tolerance {
            break;
        }
    }
    Ok(Minimized {
        initial,
        labels: current,
        trace,
        cycles,
    })
}
