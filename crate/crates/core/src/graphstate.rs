//! Graphs with a computation/output partition, decoration, and graph states.
//!
//! Register order of every graph state: computation vertices in the order of
//! the `computation` list, then output vertices in the order of the `output`
//! list, then (for decorated graphs) the red vertices in computation order.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::qlin::{qubit_mask, Ket, Operator, Tensor};
use crate::{Error, Result};

/// Default ceiling on the qubits of any register the crate builds.
pub const DEFAULT_QUBIT_CAP: usize = 14;

/// The JSON form of a resource graph. Labels are free-form strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub vertices: Vec<String>,
    pub edges: Vec<Vec<String>>,
    pub computation: Vec<String>,
    pub output: Vec<String>,
}

impl GraphSpec {
    pub fn new<S: AsRef<str>>(
        vertices: &[S],
        edges: &[(S, S)],
        computation: &[S],
        output: &[S],
    ) -> Self {
        let own = |xs: &[S]| xs.iter().map(|s| s.as_ref().to_owned()).collect();
        Self {
            vertices: own(vertices),
            edges: edges
                .iter()
                .map(|(a, b)| vec![a.as_ref().to_owned(), b.as_ref().to_owned()])
                .collect(),
            computation: own(computation),
            output: own(output),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> Result<Graph> {
        validate(self)
    }
}

/// One reason a [`GraphSpec`] is rejected.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    DuplicateVertex(String),
    UnknownVertex(String),
    MalformedEdge(usize),
    SelfLoop(String),
    DuplicateEdge(String, String),
    PartitionOverlap(String),
    Unpartitioned(String),
    DuplicateInPartition(String),
    EmptyComputation,
    EmptyOutput,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DuplicateVertex(v) => write!(f, "vertex `{v}` listed twice"),
            Self::UnknownVertex(v) => write!(f, "unknown vertex `{v}`"),
            Self::MalformedEdge(i) => write!(f, "edge #{i} does not have two endpoints"),
            Self::SelfLoop(v) => write!(f, "self-loop on `{v}`"),
            Self::DuplicateEdge(a, b) => write!(f, "duplicate edge ({a}, {b})"),
            Self::PartitionOverlap(v) => write!(f, "`{v}` is in both C and O"),
            Self::Unpartitioned(v) => write!(f, "`{v}` is in neither C nor O"),
            Self::DuplicateInPartition(v) => write!(f, "`{v}` repeated in a partition"),
            Self::EmptyComputation => write!(f, "computation set is empty"),
            Self::EmptyOutput => write!(f, "output set is empty"),
        }
    }
}

/// A validated simple graph with dense vertex indices in register order.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    labels: Vec<String>,
    edges: Vec<(usize, usize)>,
    num_computation: usize,
    num_output: usize,
    /// `decoration[j]` is the red partner of computation vertex `j`.
    decoration: Option<Vec<usize>>,
}

/// Checks every invariant of `spec`, collecting all violations.
pub fn validate(spec: &GraphSpec) -> Result<Graph> {
    let mut violations = Vec::new();
    let mut known = BTreeSet::new();
    for v in &spec.vertices {
        if !known.insert(v.as_str()) {
            violations.push(Violation::DuplicateVertex(v.clone()));
        }
    }

    let mut comp = BTreeSet::new();
    for v in &spec.computation {
        if !known.contains(v.as_str()) {
            violations.push(Violation::UnknownVertex(v.clone()));
        } else if !comp.insert(v.as_str()) {
            violations.push(Violation::DuplicateInPartition(v.clone()));
        }
    }
    let mut out = BTreeSet::new();
    for v in &spec.output {
        if !known.contains(v.as_str()) {
            violations.push(Violation::UnknownVertex(v.clone()));
        } else if !out.insert(v.as_str()) {
            violations.push(Violation::DuplicateInPartition(v.clone()));
        } else if comp.contains(v.as_str()) {
            violations.push(Violation::PartitionOverlap(v.clone()));
        }
    }
    for v in &known {
        if !comp.contains(v) && !out.contains(v) {
            violations.push(Violation::Unpartitioned((*v).to_owned()));
        }
    }
    if spec.computation.is_empty() {
        violations.push(Violation::EmptyComputation);
    }
    if spec.output.is_empty() {
        violations.push(Violation::EmptyOutput);
    }

    let labels: Vec<String> = spec
        .computation
        .iter()
        .chain(spec.output.iter().filter(|v| !comp.contains(v.as_str())))
        .cloned()
        .collect();
    let index: HashMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();

    let mut edges = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, e) in spec.edges.iter().enumerate() {
        let [a, b] = e.as_slice() else {
            violations.push(Violation::MalformedEdge(i));
            continue;
        };
        let (Some(&ia), Some(&ib)) = (index.get(a.as_str()), index.get(b.as_str())) else {
            for v in [a, b] {
                if !index.contains_key(v.as_str()) && !known.contains(v.as_str()) {
                    violations.push(Violation::UnknownVertex(v.clone()));
                }
            }
            continue;
        };
        if ia == ib {
            violations.push(Violation::SelfLoop(a.clone()));
            continue;
        }
        let key = (ia.min(ib), ia.max(ib));
        if !seen.insert(key) {
            violations.push(Violation::DuplicateEdge(a.clone(), b.clone()));
            continue;
        }
        edges.push(key);
    }

    if !violations.is_empty() {
        return Err(Error::InvalidGraph(violations));
    }
    Ok(Graph {
        labels,
        edges,
        num_computation: spec.computation.len(),
        num_output: spec.output.len(),
        decoration: None,
    })
}

impl Graph {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// `N`, the number of computation vertices.
    pub fn num_computation(&self) -> usize {
        self.num_computation
    }

    /// `n`, the number of output vertices.
    pub fn num_output(&self) -> usize {
        self.num_output
    }

    pub fn num_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn computation_indices(&self) -> std::ops::Range<usize> {
        0..self.num_computation
    }

    pub fn output_indices(&self) -> std::ops::Range<usize> {
        self.num_computation..self.num_computation + self.num_output
    }

    pub fn decoration(&self) -> Option<&[usize]> {
        self.decoration.as_deref()
    }

    pub fn is_decorated(&self) -> bool {
        self.decoration.is_some()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter_map(move |&(a, b)| {
            if a == v {
                Some(b)
            } else if b == v {
                Some(a)
            } else {
                None
            }
        })
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors(v).count()
    }

    /// Same graph with the edge list reordered.
    pub fn with_edge_order(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.edges.len() {
            return Err(Error::SizeMismatch {
                expected: self.edges.len(),
                found: order.len(),
            });
        }
        let mut g = self.clone();
        g.edges = order.iter().map(|&i| self.edges[i]).collect();
        Ok(g)
    }

    /// Undecorated graphs only: the spec this graph was validated from, with
    /// vertices in register order.
    pub fn to_spec(&self) -> GraphSpec {
        let label = |i: usize| self.labels[i].clone();
        GraphSpec {
            vertices: self.labels.clone(),
            edges: self.edges.iter().map(|&(a, b)| vec![label(a), label(b)]).collect(),
            computation: self.computation_indices().map(label).collect(),
            output: self.output_indices().map(label).collect(),
        }
    }

    /// Whether every vertex is reachable from vertex 0.
    pub fn is_connected(&self) -> bool {
        let n = self.num_vertices();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for u in self.neighbors(v) {
                if !std::mem::replace(&mut seen[u], true) {
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Attaches a fresh pendant ("red") vertex to every computation vertex.
pub fn decorate(g: &Graph) -> Result<Graph> {
    if g.is_decorated() {
        return Err(Error::AlreadyDecorated);
    }
    let mut labels = g.labels.clone();
    let mut edges = g.edges.clone();
    let mut decoration = Vec::with_capacity(g.num_computation);
    for j in g.computation_indices() {
        let mut label = format!("r_{}", g.labels[j]);
        while labels.contains(&label) {
            label.push('\'');
        }
        let red = labels.len();
        labels.push(label);
        edges.push((j, red));
        decoration.push(red);
    }
    Ok(Graph {
        labels,
        edges,
        num_computation: g.num_computation,
        num_output: g.num_output,
        decoration: Some(decoration),
    })
}

/// `(∏_{e∈E} CZ_e)|+⟩^{⊗|V|}`, applying the edges in stored order.
pub fn graph_state(g: &Graph) -> Ket {
    let k = g.num_vertices();
    let mut amps = Ket::plus_register(k).amplitudes().to_vec();
    for &(a, b) in &g.edges {
        let mask = qubit_mask(a, k) | qubit_mask(b, k);
        for (x, amp) in amps.iter_mut().enumerate() {
            if x & mask == mask {
                *amp = -*amp;
            }
        }
    }
    Ket::unnormalized(amps).expect("power-of-two register")
}

/// Builds the decorated graph state the second way: `|G⟩ ⊗ |+⟩^{⊗N}` followed
/// by a CZ between each computation qubit and its red partner.
pub fn decorated_state_via_entanglers(g: &Graph) -> Result<Ket> {
    if g.is_decorated() {
        return Err(Error::AlreadyDecorated);
    }
    let n = g.num_computation;
    let base = g.num_vertices();
    let mut state = graph_state(g).tensor(&Ket::plus_register(n));
    let cz = Operator::cz();
    for j in 0..n {
        state = state.apply_on_qubits(&cz, &[j, base + j])?;
    }
    Ok(state)
}

/// `max_v ‖K_v|ψ⟩ − |ψ⟩‖` with `K_v = X_v ∏_{u∈N(v)} Z_u`.
pub fn stabilizer_check(state: &Ket, g: &Graph) -> Result<f64> {
    let k = g.num_vertices();
    if state.num_qubits() != k {
        return Err(Error::SizeMismatch {
            expected: k,
            found: state.num_qubits(),
        });
    }
    let amps = state.amplitudes();
    let worst = (0..k)
        .map(|v| {
            let flip = qubit_mask(v, k);
            let zmask = g.neighbors(v).fold(0, |m, u| m | qubit_mask(u, k));
            amps.iter()
                .enumerate()
                .map(|(x, a)| {
                    let sign = if (x & zmask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    (amps[x ^ flip] * sign - a).norm_sqr()
                })
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    Ok(worst)
}

/// Preset resource graphs.
pub mod presets {
    use super::*;

    /// A path `c0 – c1 – … – c{k-2} – o0` on `num_vertices ≥ 2` vertices.
    pub fn path(num_vertices: usize) -> Graph {
        assert!(num_vertices >= 2, "a path needs at least two vertices");
        let comp: Vec<String> = (0..num_vertices - 1).map(|i| format!("c{i}")).collect();
        let mut verts = comp.clone();
        verts.push("o0".into());
        let edges: Vec<(String, String)> = verts
            .windows(2)
            .map(|w| (w[0].clone(), w[1].clone()))
            .collect();
        validate(&GraphSpec::new(&verts, &edges, &comp, &["o0".to_owned()]))
            .expect("path preset is valid")
    }

    /// `chains` disjoint paths of `vertices_per_chain` vertices, chain `i`
    /// being `c{i}_0 – … – o{i}`.
    pub fn parallel_chains(chains: usize, vertices_per_chain: usize) -> Graph {
        assert!(chains >= 1 && vertices_per_chain >= 2);
        let mut comp = Vec::new();
        let mut outs = Vec::new();
        let mut edges = Vec::new();
        for i in 0..chains {
            let chain: Vec<String> = (0..vertices_per_chain - 1)
                .map(|j| format!("c{i}_{j}"))
                .chain(std::iter::once(format!("o{i}")))
                .collect();
            edges.extend(chain.windows(2).map(|w| (w[0].clone(), w[1].clone())));
            comp.extend_from_slice(&chain[..vertices_per_chain - 1]);
            outs.push(chain[vertices_per_chain - 1].clone());
        }
        let verts: Vec<String> = comp.iter().chain(&outs).cloned().collect();
        validate(&GraphSpec::new(&verts, &edges, &comp, &outs)).expect("chain preset is valid")
    }

    /// A cycle on `cycle_len` computation vertices with one output vertex
    /// hanging off `c0`.
    pub fn cycle_with_output(cycle_len: usize) -> Graph {
        assert!(cycle_len >= 3);
        let comp: Vec<String> = (0..cycle_len).map(|i| format!("c{i}")).collect();
        let mut edges: Vec<(String, String)> = (0..cycle_len)
            .map(|i| (comp[i].clone(), comp[(i + 1) % cycle_len].clone()))
            .collect();
        edges.push((comp[0].clone(), "o0".into()));
        let mut verts = comp.clone();
        verts.push("o0".into());
        validate(&GraphSpec::new(&verts, &edges, &comp, &["o0".to_owned()]))
            .expect("cycle preset is valid")
    }

    /// A triangle `c0, c1, o0`.
    pub fn triangle() -> Graph {
        let v = ["c0", "c1", "o0"];
        validate(&GraphSpec::new(
            &v,
            &[("c0", "c1"), ("c1", "o0"), ("o0", "c0")],
            &["c0", "c1"],
            &["o0"],
        ))
        .expect("triangle preset is valid")
    }

    /// A random connected graph: a random spanning tree plus each remaining
    /// pair with probability `extra_edge_probability`.
    pub fn random_connected<R: Rng + ?Sized>(
        num_computation: usize,
        num_output: usize,
        extra_edge_probability: f64,
        rng: &mut R,
    ) -> Graph {
        assert!(num_computation >= 1 && num_output >= 1);
        let total = num_computation + num_output;
        let labels: Vec<String> = (0..num_computation)
            .map(|i| format!("c{i}"))
            .chain((0..num_output).map(|i| format!("o{i}")))
            .collect();
        let mut order: Vec<usize> = (0..total).collect();
        order.shuffle(rng);
        let mut pairs = BTreeSet::new();
        for i in 1..total {
            let parent = order[rng.gen_range(0..i)];
            let child = order[i];
            pairs.insert((parent.min(child), parent.max(child)));
        }
        for a in 0..total {
            for b in a + 1..total {
                if rng.gen_bool(extra_edge_probability) {
                    pairs.insert((a, b));
                }
            }
        }
        let edges: Vec<(String, String)> = pairs
            .into_iter()
            .map(|(a, b)| (labels[a].clone(), labels[b].clone()))
            .collect();
        validate(&GraphSpec::new(
            &labels,
            &edges,
            &labels[..num_computation],
            &labels[num_computation..],
        ))
        .expect("random preset is valid")
    }
}
