//! Causal MBQC: adaptive equatorial measurements on the computation qubits
//! with byproduct tracking, then computational-basis readout of the outputs.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graphstate::{graph_state, Graph};
use crate::qlin::{force_outcome, sample_projective, Ket, Measurement, Operator, QubitBasis};
use crate::{Error, Result};

/// `(-1)^sx · φ + π·sz`, reduced to `[0, 2π)`.
pub fn adapted_angle(phi: f64, sx: u8, sz: u8) -> f64 {
    let signed = if sx & 1 == 1 { -phi } else { phi };
    (signed + PI * f64::from(sz & 1)).rem_euclid(TAU)
}

fn reduce_angle(phi: f64) -> Result<f64> {
    if !phi.is_finite() {
        return Err(Error::MalformedPattern(format!("angle {phi} is not finite")));
    }
    Ok(phi.rem_euclid(TAU))
}

/// The JSON form of a measurement pattern, keyed by vertex labels. Missing
/// angles default to 0 and missing dependency sets to empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSpec {
    pub order: Vec<String>,
    #[serde(default)]
    pub angles: BTreeMap<String, f64>,
    #[serde(default)]
    pub x_deps: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub z_deps: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub out_x_deps: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub out_z_deps: BTreeMap<String, Vec<String>>,
}

impl PatternSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A measurement pattern over a graph's computation vertices. Vertex ids
/// are register indices: computation `0..N`, outputs `0..n` (relative).
#[derive(Clone, Debug, PartialEq)]
pub struct Pattern {
    order: Vec<usize>,
    angles: Vec<f64>,
    x_deps: Vec<Vec<usize>>,
    z_deps: Vec<Vec<usize>>,
    out_x_deps: Vec<Vec<usize>>,
    out_z_deps: Vec<Vec<usize>>,
}

impl Pattern {
    pub fn new(
        g: &Graph,
        order: Vec<usize>,
        angles: Vec<f64>,
        x_deps: Vec<Vec<usize>>,
        z_deps: Vec<Vec<usize>>,
        out_x_deps: Vec<Vec<usize>>,
        out_z_deps: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let n_c = g.num_computation();
        let n_o = g.num_output();
        let bad = |msg: String| Err(Error::MalformedPattern(msg));

        let mut position = vec![usize::MAX; n_c];
        if order.len() != n_c {
            return bad(format!("order lists {} of {n_c} vertices", order.len()));
        }
        for (i, &c) in order.iter().enumerate() {
            if c >= n_c || position[c] != usize::MAX {
                return bad(format!("order is not a permutation of C (entry {c})"));
            }
            position[c] = i;
        }
        if angles.len() != n_c {
            return bad(format!("{} angles for {n_c} vertices", angles.len()));
        }
        let angles = angles.into_iter().map(reduce_angle).collect::<Result<_>>()?;
        for deps in [&x_deps, &z_deps] {
            if deps.len() != n_c {
                return bad("dependency table does not cover C".into());
            }
            for (c, set) in deps.iter().enumerate() {
                for &d in set {
                    if d >= n_c || position[d] >= position[c] {
                        return bad(format!(
                            "vertex {} depends on {}, which is not measured earlier",
                            g.labels()[c],
                            g.labels().get(d).map_or("?", String::as_str)
                        ));
                    }
                }
            }
        }
        for deps in [&out_x_deps, &out_z_deps] {
            if deps.len() != n_o {
                return bad("output dependency table does not cover O".into());
            }
            if deps.iter().flatten().any(|&d| d >= n_c) {
                return bad("output dependency outside C".into());
            }
        }
        Ok(Self {
            order,
            angles,
            x_deps,
            z_deps,
            out_x_deps,
            out_z_deps,
        })
    }

    /// Fixed angles in index order, no adaptivity and no corrections.
    pub fn non_adaptive(g: &Graph, angles: &[f64]) -> Result<Self> {
        let n_c = g.num_computation();
        let n_o = g.num_output();
        Self::new(
            g,
            (0..n_c).collect(),
            angles.to_vec(),
            vec![vec![]; n_c],
            vec![vec![]; n_c],
            vec![vec![]; n_o],
            vec![vec![]; n_o],
        )
    }

    pub fn from_spec(spec: &PatternSpec, g: &Graph) -> Result<Self> {
        let n_c = g.num_computation();
        let lookup = |label: &str| -> Result<usize> {
            g.index_of(label)
                .ok_or_else(|| Error::MalformedPattern(format!("unknown vertex `{label}`")))
        };
        let comp = |label: &str| -> Result<usize> {
            let i = lookup(label)?;
            if i < n_c {
                Ok(i)
            } else {
                Err(Error::MalformedPattern(format!("`{label}` is not in C")))
            }
        };
        let out = |label: &str| -> Result<usize> {
            let i = lookup(label)?;
            if g.output_indices().contains(&i) {
                Ok(i - n_c)
            } else {
                Err(Error::MalformedPattern(format!("`{label}` is not in O")))
            }
        };
        let order = spec.order.iter().map(|l| comp(l)).collect::<Result<Vec<_>>>()?;
        let mut angles = vec![0.0; n_c];
        for (label, &phi) in &spec.angles {
            angles[comp(label)?] = phi;
        }
        let table = |map: &BTreeMap<String, Vec<String>>,
                     size: usize,
                     key: &dyn Fn(&str) -> Result<usize>|
         -> Result<Vec<Vec<usize>>> {
            let mut t = vec![vec![]; size];
            for (label, deps) in map {
                t[key(label)?] = deps.iter().map(|d| comp(d)).collect::<Result<_>>()?;
            }
            Ok(t)
        };
        Self::new(
            g,
            order,
            angles,
            table(&spec.x_deps, n_c, &comp)?,
            table(&spec.z_deps, n_c, &comp)?,
            table(&spec.out_x_deps, g.num_output(), &out)?,
            table(&spec.out_z_deps, g.num_output(), &out)?,
        )
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Replaces the angles, keeping order and dependency sets.
    pub fn with_angles(&self, angles: &[f64]) -> Result<Self> {
        if angles.len() != self.angles.len() {
            return Err(Error::SizeMismatch {
                expected: self.angles.len(),
                found: angles.len(),
            });
        }
        let mut p = self.clone();
        p.angles = angles.iter().copied().map(reduce_angle).collect::<Result<_>>()?;
        Ok(p)
    }

    fn signal(set: &[usize], m: &[u8]) -> u8 {
        set.iter().fold(0, |acc, &d| acc ^ m[d])
    }

    /// Measurement angle of computation vertex `c` given the outcomes so far.
    pub fn angle_for(&self, c: usize, m: &[u8]) -> f64 {
        adapted_angle(
            self.angles[c],
            Self::signal(&self.x_deps[c], m),
            Self::signal(&self.z_deps[c], m),
        )
    }

    /// Pauli byproduct exponents `(x, z)` for output `t`.
    pub fn output_correction(&self, t: usize, m: &[u8]) -> (u8, u8) {
        (
            Self::signal(&self.out_x_deps[t], m),
            Self::signal(&self.out_z_deps[t], m),
        )
    }
}

/// Preset pattern for graphs that are disjoint paths, each ending in exactly
/// one output vertex with every other vertex in C. Chains are measured from
/// the far end towards the output.
pub fn linear_cluster_pattern(g: &Graph, angles: &[f64]) -> Result<Pattern> {
    let n_c = g.num_computation();
    let n_o = g.num_output();
    let not_linear = |msg: String| Err(Error::NotLinearCluster(msg));
    if g.is_decorated() {
        return not_linear("decorated graph".into());
    }
    if (0..g.num_vertices()).any(|v| g.degree(v) > 2) {
        return not_linear("a vertex has degree above 2".into());
    }
    let mut order = Vec::with_capacity(n_c);
    let mut x_deps = vec![vec![]; n_c];
    let mut out_x_deps = vec![vec![]; n_o];
    let mut out_z_deps = vec![vec![]; n_o];
    let mut visited = vec![false; g.num_vertices()];
    for o in g.output_indices() {
        if g.degree(o) > 1 {
            return not_linear(format!("output `{}` is inside a chain", g.labels()[o]));
        }
        // Walk from the output to the far end of its chain.
        let mut chain = Vec::new();
        let (mut prev, mut cur) = (o, g.neighbors(o).next());
        visited[o] = true;
        while let Some(v) = cur {
            if visited[v] {
                return not_linear("cycle or shared chain".into());
            }
            if v >= n_c {
                return not_linear(format!("chain joins two outputs at `{}`", g.labels()[v]));
            }
            visited[v] = true;
            chain.push(v);
            let next = g.neighbors(v).find(|&u| u != prev);
            prev = v;
            cur = next;
        }
        chain.reverse();
        let len = chain.len();
        for (i, &c) in chain.iter().enumerate() {
            x_deps[c] = (0..i).rev().step_by(2).map(|k| chain[k]).collect();
        }
        let t = o - n_c;
        out_x_deps[t] = (0..len).rev().step_by(2).map(|k| chain[k]).collect();
        out_z_deps[t] = (0..len.saturating_sub(1)).rev().step_by(2).map(|k| chain[k]).collect();
        order.extend(chain);
    }
    if let Some(v) = visited.iter().position(|&s| !s) {
        return not_linear(format!("`{}` is not on a chain ending in O", g.labels()[v]));
    }
    Pattern::new(
        g,
        order,
        angles.to_vec(),
        x_deps,
        vec![vec![]; n_c],
        out_x_deps,
        out_z_deps,
    )
}

/// One causal run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    /// Outcomes on C, indexed by computation vertex.
    pub m: Vec<u8>,
    /// Readout on O.
    pub z: Vec<u8>,
    /// Exact probability of the realized `m` history.
    pub branch_probability: f64,
    pub corrected: bool,
}

/// Exact data of one `m` history.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub m: Vec<u8>,
    pub probability: f64,
    /// Readout distribution on O given this history, indexed with output 0
    /// as the most significant bit. Empty for impossible histories.
    pub z_distribution: Vec<f64>,
}

/// Measures C in pattern order, each outcome chosen by `measure`, and
/// returns `(m, probability of m, output state)` with corrections applied
/// when `correct` is set.
fn evolve<F>(g: &Graph, p: &Pattern, correct: bool, mut measure: F) -> Result<(Vec<u8>, f64, Ket)>
where
    F: FnMut(usize, &Ket, &QubitBasis, usize) -> Result<Measurement>,
{
    check_pattern(g, p)?;
    let n_c = g.num_computation();
    let mut state = graph_state(g);
    let mut live: Vec<usize> = (0..g.num_vertices()).collect();
    let mut m = vec![0u8; n_c];
    let mut probability = 1.0;
    for &c in &p.order {
        let basis = QubitBasis::equatorial(p.angle_for(c, &m));
        let pos = live.iter().position(|&v| v == c).expect("live vertex");
        let outcome = measure(c, &state, &basis, pos)?;
        m[c] = outcome.outcome;
        probability *= outcome.probability;
        state = outcome.post_state;
        live.remove(pos);
    }
    if correct {
        for t in 0..g.num_output() {
            let (x, z) = p.output_correction(t, &m);
            if z == 1 {
                state = state.apply_on_qubits(&Operator::pauli_z(), &[t])?;
            }
            if x == 1 {
                state = state.apply_on_qubits(&Operator::pauli_x(), &[t])?;
            }
        }
    }
    Ok((m, probability, state))
}

fn check_pattern(g: &Graph, p: &Pattern) -> Result<()> {
    if p.angles.len() != g.num_computation() || p.out_x_deps.len() != g.num_output() {
        return Err(Error::MalformedPattern("pattern does not match graph".into()));
    }
    Ok(())
}

/// One seeded run of the causal protocol.
pub fn run_causal<R: Rng + ?Sized>(
    g: &Graph,
    p: &Pattern,
    rng: &mut R,
    correct: bool,
) -> Result<RunRecord> {
    let (m, branch_probability, mut state) =
        evolve(g, p, correct, |_, s, b, pos| sample_projective(s, b, pos, rng))?;
    let computational = QubitBasis::computational();
    let mut z = Vec::with_capacity(g.num_output());
    for _ in 0..g.num_output() {
        let r = sample_projective(&state, &computational, 0, rng)?;
        z.push(r.outcome);
        state = r.post_state;
    }
    Ok(RunRecord {
        m,
        z,
        branch_probability,
        corrected: correct,
    })
}

/// Exact enumeration of all `2^N` histories.
pub fn enumerate_branches(g: &Graph, p: &Pattern, correct: bool) -> Result<Vec<Branch>> {
    let n_c = g.num_computation();
    (0..1usize << n_c)
        .map(|bits| {
            let wanted: Vec<u8> = (0..n_c).map(|c| ((bits >> (n_c - 1 - c)) & 1) as u8).collect();
            let forced = evolve(g, p, correct, |c, s, b, pos| force_outcome(s, b, pos, wanted[c]));
            match forced {
                Ok((m, probability, state)) => Ok(Branch {
                    m,
                    probability,
                    z_distribution: state.amplitudes().iter().map(|a| a.norm_sqr()).collect(),
                }),
                Err(Error::ZeroProbabilityBranch { .. }) => Ok(Branch {
                    m: wanted,
                    probability: 0.0,
                    z_distribution: Vec::new(),
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Exact readout distribution of the causal protocol, summed over histories.
pub fn causal_output_distribution(g: &Graph, p: &Pattern, correct: bool) -> Result<Vec<f64>> {
    let mut dist = vec![0.0; 1 << g.num_output()];
    for b in enumerate_branches(g, p, correct)? {
        for (acc, q) in dist.iter_mut().zip(&b.z_distribution) {
            *acc += b.probability * q;
        }
    }
    Ok(dist)
}

/// `Tr[|G⟩⟨G| (⊗_s |φ_s^{m_s}⟩⟨φ_s^{m_s}|) ⊗ (⊗_t |z_t⟩⟨z_t|)]` with the raw,
/// non-adapted angles.
pub fn branch_probability(g: &Graph, angles: &[f64], m: &[u8], z: &[u8]) -> Result<f64> {
    let n_c = g.num_computation();
    for (expected, found) in [(n_c, angles.len()), (n_c, m.len()), (g.num_output(), z.len())] {
        if expected != found {
            return Err(Error::SizeMismatch { expected, found });
        }
    }
    let bras: Vec<Ket> = angles
        .iter()
        .zip(m)
        .map(|(&phi, &mj)| Ket::equatorial(phi, mj))
        .chain(z.iter().map(|&zt| Ket::computational(zt)))
        .collect();
    let refs: Vec<&Ket> = bras.iter().collect();
    Ok(graph_state(g).product_overlap(&refs)?.norm_sqr())
}

/// Normalized output state after projecting every computation qubit onto
/// `|φ_j^0⟩`.
pub fn positive_branch_output(g: &Graph, angles: &[f64]) -> Result<Ket> {
    if angles.len() != g.num_computation() {
        return Err(Error::SizeMismatch {
            expected: g.num_computation(),
            found: angles.len(),
        });
    }
    let mut state = graph_state(g);
    for &phi in angles {
        state = force_outcome(&state, &QubitBasis::equatorial(phi), 0, 0)?.post_state;
    }
    Ok(state)
}
