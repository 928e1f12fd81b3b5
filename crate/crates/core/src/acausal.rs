//! The resource process matrix `W = 2^{N+n} |G′⟩⟨G′| ⊗ (I/2)^{⊗n}` and the
//! checks run against it.
//!
//! Register layout of `W`: computation qubits `0..N`, output qubits
//! `N..N+n`, red qubits `N+n..2N+n` (red `j` decorates computation `j`),
//! ancillas `2N+n..2N+2n`. Alice `j` reads computation qubit `j` and writes
//! red qubit `j`; Bob `t` reads output qubit `t` and writes ancilla `t`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::graphstate::{
    decorate, decorated_state_via_entanglers, graph_state, Graph, DEFAULT_QUBIT_CAP,
};
use crate::procmat::{
    alice_instrument, bob_instrument, enumerate_outcomes, pm_evaluate, Backend, CjOperator,
    Instrument, OutcomeTable, ProcessMatrix, Role, Slot, DENSE_BACKEND_MAX_QUBITS,
};
use crate::qlin::{sample_projective, Ket, QubitBasis, Tensor};
use crate::{split_seed, Error, Result};

/// Minimum fidelity between the two constructions of `|G′⟩`.
pub const CONSTRUCTION_FIDELITY: f64 = 1.0 - 1e-12;
/// Shots per independently seeded sampler batch.
pub const SHOT_BATCH: u64 = 4096;

/// A resource process matrix together with the graph it came from.
#[derive(Clone, Debug)]
pub struct ResourcePm {
    pm: ProcessMatrix,
    graph: Graph,
    decorated: Graph,
    construction_fidelity: f64,
}

/// Replacements used as negative controls.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Perturbation {
    /// Red qubits start in `|0⟩`, so the decoration entanglers act trivially.
    RedQubitsZero,
    /// The maximally mixed ancillas become `|0⟩⟨0|`.
    AncillasZero,
}

fn check_cap(g: &Graph, cap: usize) -> Result<()> {
    let needed = 2 * (g.num_computation() + g.num_output());
    if needed > cap {
        return Err(Error::SizeCap { needed, cap });
    }
    Ok(())
}

fn resource_slots(g: &Graph) -> Vec<Slot> {
    let n_c = g.num_computation();
    let n_o = g.num_output();
    let alices = (0..n_c).map(|j| Slot {
        party: format!("alice:{}", g.labels()[j]),
        role: Role::Alice,
        input: j,
        output: n_c + n_o + j,
    });
    let bobs = (0..n_o).map(|t| Slot {
        party: format!("bob:{}", g.labels()[n_c + t]),
        role: Role::Bob,
        input: n_c + t,
        output: 2 * n_c + n_o + t,
    });
    alices.chain(bobs).collect()
}

/// Builds `W` with the default qubit cap.
pub fn build_resource_pm(g: &Graph) -> Result<ResourcePm> {
    build_resource_pm_with_cap(g, DEFAULT_QUBIT_CAP)
}

pub fn build_resource_pm_with_cap(g: &Graph, cap: usize) -> Result<ResourcePm> {
    if g.is_decorated() {
        return Err(Error::AlreadyDecorated);
    }
    check_cap(g, cap)?;
    let decorated = decorate(g)?;
    let direct = graph_state(&decorated);
    let via = decorated_state_via_entanglers(g)?;
    let construction_fidelity = direct.fidelity(&via)?;
    if construction_fidelity < CONSTRUCTION_FIDELITY {
        return Err(Error::ConstructionMismatch {
            fidelity: construction_fidelity,
        });
    }
    let n = g.num_output();
    let scale = 2f64.powi((g.num_computation() + n) as i32);
    let pm = ProcessMatrix::pure_times_mixed(scale, direct, n, resource_slots(g))?;
    Ok(ResourcePm {
        pm,
        graph: g.clone(),
        decorated,
        construction_fidelity,
    })
}

impl ResourcePm {
    pub fn process_matrix(&self) -> &ProcessMatrix {
        &self.pm
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn decorated_graph(&self) -> &Graph {
        &self.decorated
    }

    pub fn num_computation(&self) -> usize {
        self.graph.num_computation()
    }

    pub fn num_output(&self) -> usize {
        self.graph.num_output()
    }

    /// Fidelity between the decorated graph state and the CZ-chain route.
    pub fn construction_fidelity(&self) -> f64 {
        self.construction_fidelity
    }

    /// `2^{N+n}`, the trace `W` must have.
    pub fn expected_trace(&self) -> f64 {
        2f64.powi((self.num_computation() + self.num_output()) as i32)
    }

    /// A deliberately broken copy of `W`.
    pub fn perturbed(&self, perturbation: Perturbation) -> Result<Self> {
        let n_c = self.num_computation();
        let n_o = self.num_output();
        let scale = self.expected_trace();
        let pm = match perturbation {
            Perturbation::RedQubitsZero => {
                let pure = graph_state(&self.graph).tensor(&Ket::basis_state(n_c, 0));
                ProcessMatrix::pure_times_mixed(scale, pure, n_o, resource_slots(&self.graph))?
            }
            Perturbation::AncillasZero => {
                let pure = graph_state(&self.decorated).tensor(&Ket::basis_state(n_o, 0));
                ProcessMatrix::pure_times_mixed(scale, pure, 0, resource_slots(&self.graph))?
            }
        };
        Ok(Self { pm, ..self.clone() })
    }

    fn check_angles(&self, angles: &[f64]) -> Result<()> {
        if angles.len() != self.num_computation() {
            return Err(Error::SizeMismatch {
                expected: self.num_computation(),
                found: angles.len(),
            });
        }
        Ok(())
    }

    /// Alice instruments for `angles` followed by Bob instruments.
    pub fn instruments(&self, angles: &[f64]) -> Result<Vec<Instrument>> {
        self.check_angles(angles)?;
        Ok(angles
            .iter()
            .map(|&phi| alice_instrument(phi))
            .chain((0..self.num_output()).map(|_| bob_instrument()))
            .collect())
    }

    /// Whether both backends can evaluate this process matrix.
    pub fn dense_feasible(&self) -> bool {
        self.pm.num_qubits() <= DENSE_BACKEND_MAX_QUBITS
    }
}

/// Index of `(m, z)` in an outcome table: `m` bits then `z` bits, most
/// significant first.
pub fn outcome_index(m: &[u8], z: &[u8]) -> usize {
    m.iter().chain(z).fold(0, |acc, &b| (acc << 1) | usize::from(b & 1))
}

/// `P(φ^m, z) = Tr[W (⊗_s |φ_s^{m_s}⟩⟨φ_s^{m_s}| ⊗ |m_s⟩⟨m_s|) ⊗ (⊗_t |z_t⟩⟨z_t| ⊗ |z_t⟩⟨z_t|)]`.
pub fn acausal_probability(r: &ResourcePm, angles: &[f64], m: &[u8], z: &[u8]) -> Result<f64> {
    acausal_probability_with(r, angles, m, z, Backend::Auto)
}

pub fn acausal_probability_with(
    r: &ResourcePm,
    angles: &[f64],
    m: &[u8],
    z: &[u8],
    backend: Backend,
) -> Result<f64> {
    let instruments = r.instruments(angles)?;
    if m.len() != r.num_computation() || z.len() != r.num_output() {
        return Err(Error::SizeMismatch {
            expected: r.num_computation() + r.num_output(),
            found: m.len() + z.len(),
        });
    }
    let ops: Vec<&CjOperator> = instruments
        .iter()
        .zip(m.iter().chain(z))
        .map(|(inst, &bit)| &inst.elements()[usize::from(bit & 1)])
        .collect();
    Ok(pm_evaluate(&r.pm, &ops, backend)?.probability)
}

/// All `2^{N+n}` probabilities, indexed by [`outcome_index`].
pub fn outcome_table(r: &ResourcePm, angles: &[f64], backend: Backend) -> Result<OutcomeTable> {
    enumerate_outcomes(&r.pm, &r.instruments(angles)?, backend)
}

/// `max_{m,z} |P(m, z) − P(0, z)|` by full enumeration.
pub fn branch_independence_report(r: &ResourcePm, angles: &[f64]) -> Result<f64> {
    let table = outcome_table(r, angles, Backend::Auto)?.probabilities;
    Ok(branch_deviation(&table, r.num_output()))
}

fn branch_deviation(table: &[f64], num_output: usize) -> f64 {
    let width = 1 << num_output;
    table
        .chunks_exact(width)
        .flat_map(|row| row.iter().zip(&table[..width]).map(|(p, p0)| (p - p0).abs()))
        .fold(0.0, f64::max)
}

/// `|Σ_{m,z} P(m, z) − 1|` by full enumeration.
pub fn normalization_report(r: &ResourcePm, angles: &[f64]) -> Result<f64> {
    let table = outcome_table(r, angles, Backend::Auto)?.probabilities;
    Ok((table.iter().sum::<f64>() - 1.0).abs())
}

/// Normalization deviation with arbitrary Alice instruments (Bobs measure
/// computationally).
pub fn normalization_with_instruments(r: &ResourcePm, alices: &[Instrument]) -> Result<f64> {
    if alices.len() != r.num_computation() {
        return Err(Error::SizeMismatch {
            expected: r.num_computation(),
            found: alices.len(),
        });
    }
    let instruments: Vec<Instrument> = alices
        .iter()
        .cloned()
        .chain((0..r.num_output()).map(|_| bob_instrument()))
        .collect();
    let table = enumerate_outcomes(&r.pm, &instruments, Backend::Auto)?;
    Ok((table.probabilities.iter().sum::<f64>() - 1.0).abs())
}

/// The Bobs' marginal distribution over `z`.
pub fn bob_marginal(r: &ResourcePm, angles: &[f64]) -> Result<Vec<f64>> {
    let table = outcome_table(r, angles, Backend::Auto)?.probabilities;
    let width = 1 << r.num_output();
    let mut marginal = vec![0.0; width];
    for row in table.chunks_exact(width) {
        for (acc, p) in marginal.iter_mut().zip(row) {
            *acc += p;
        }
    }
    Ok(marginal)
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0
}

/// Total-variation distance between the Bobs' marginals under two angle
/// assignments for the Alices.
pub fn signaling_tv(r: &ResourcePm, angles_a: &[f64], angles_b: &[f64]) -> Result<f64> {
    Ok(total_variation(
        &bob_marginal(r, angles_a)?,
        &bob_marginal(r, angles_b)?,
    ))
}

/// `max |dense − factorized|` over every outcome.
pub fn backend_agreement(r: &ResourcePm, angles: &[f64]) -> Result<f64> {
    let dense = outcome_table(r, angles, Backend::Dense)?.probabilities;
    let factorized = outcome_table(r, angles, Backend::Factorized)?.probabilities;
    Ok(dense
        .iter()
        .zip(&factorized)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Result of the postselected causal simulation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PostselectReport {
    pub acceptance: f64,
    /// `2^{-(N+n)}`.
    pub expected: f64,
    /// Distance of the accepted distribution from the exact one; `None` when
    /// nothing was accepted.
    pub tv: Option<f64>,
    pub shots: u64,
    pub seed: u64,
    pub accepted: u64,
    /// Accepted empirical distribution over `(m, z)`, indexed by
    /// [`outcome_index`].
    #[serde(skip)]
    pub distribution: Vec<f64>,
}

impl PostselectReport {
    /// Binomial standard deviation of the acceptance rate.
    pub fn acceptance_sigma(&self) -> f64 {
        (self.expected * (1.0 - self.expected) / self.shots as f64).sqrt()
    }
}

/// Emulates the acausal protocol causally. Each shot prepares `|G′⟩` and
/// draws a uniformly random computational state for every ancilla, measures
/// computation qubit `j` in the `φ_j` basis (`m_j`), red qubit `j` and output
/// `t` computationally (`r_j`, `z_t`), and keeps the shot iff `r = m` and each
/// ancilla equals `z_t`.
pub fn postselected_sampler(
    g: &Graph,
    angles: &[f64],
    shots: u64,
    seed: u64,
) -> Result<PostselectReport> {
    postselected_sampler_with_cap(g, angles, shots, seed, DEFAULT_QUBIT_CAP)
}

pub fn postselected_sampler_with_cap(
    g: &Graph,
    angles: &[f64],
    shots: u64,
    seed: u64,
    cap: usize,
) -> Result<PostselectReport> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    if g.num_output() == 0 {
        return Err(Error::InvalidArgument("postselection needs at least one output".into()));
    }
    let r = build_resource_pm_with_cap(g, cap)?;
    r.check_angles(angles)?;
    let n_c = g.num_computation();
    let n_o = g.num_output();
    let state = graph_state(r.decorated_graph());
    let bases: Vec<QubitBasis> = angles.iter().map(|&phi| QubitBasis::equatorial(phi)).collect();
    let computational = QubitBasis::computational();
    let outcomes = 1usize << (n_c + n_o);

    let batches = shots.div_ceil(SHOT_BATCH);
    let counts = (0..batches)
        .into_par_iter()
        .map(|b| -> Result<Vec<u64>> {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, b));
            let in_batch = SHOT_BATCH.min(shots - b * SHOT_BATCH);
            let mut counts = vec![0u64; outcomes];
            let mut m = vec![0u8; n_c];
            let mut red = vec![0u8; n_c];
            let mut z = vec![0u8; n_o];
            for _ in 0..in_batch {
                let ancilla: Vec<u8> = (0..n_o).map(|_| u8::from(rng.gen::<bool>())).collect();
                // Highest register index first, so lower positions stay put.
                let mut s = state.clone();
                for j in (0..n_c).rev() {
                    let out = sample_projective(&s, &computational, n_c + n_o + j, &mut rng)?;
                    red[j] = out.outcome;
                    s = out.post_state;
                }
                for t in (0..n_o).rev() {
                    let out = sample_projective(&s, &computational, n_c + t, &mut rng)?;
                    z[t] = out.outcome;
                    s = out.post_state;
                }
                for j in (0..n_c).rev() {
                    let out = sample_projective(&s, &bases[j], j, &mut rng)?;
                    m[j] = out.outcome;
                    s = out.post_state;
                }
                if red == m && ancilla == z {
                    counts[outcome_index(&m, &z)] += 1;
                }
            }
            Ok(counts)
        })
        .try_reduce(
            || vec![0u64; outcomes],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;

    let accepted: u64 = counts.iter().sum();
    let exact = outcome_table(&r, angles, Backend::Auto)?.probabilities;
    let distribution: Vec<f64> = if accepted == 0 {
        Vec::new()
    } else {
        counts.iter().map(|&c| c as f64 / accepted as f64).collect()
    };
    let tv = (accepted > 0).then(|| total_variation(&distribution, &exact));
    Ok(PostselectReport {
        acceptance: accepted as f64 / shots as f64,
        expected: 0.5f64.powi((n_c + n_o) as i32),
        tv,
        shots,
        seed,
        accepted,
        distribution,
    })
}

/// Machine-readable summary of every check on one graph and angle set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AcausalReport {
    pub branch_independence_max_dev: f64,
    pub normalization_dev: f64,
    pub min_eigenvalue: f64,
    pub trace: f64,
    pub signaling_tv: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub postselect: Option<PostselectReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend_agreement_max_dev: Option<f64>,
}

/// The comparison assignment used for signaling: every angle shifted by π.
pub fn flipped_angles(angles: &[f64]) -> Vec<f64> {
    angles.iter().map(|phi| phi + std::f64::consts::PI).collect()
}

/// Runs every exact check; `postselect_shots` adds a sampler run.
pub fn verify(
    r: &ResourcePm,
    angles: &[f64],
    postselect_shots: Option<u64>,
    seed: u64,
) -> Result<AcausalReport> {
    let table = outcome_table(r, angles, Backend::Auto)?.probabilities;
    let postselect = postselect_shots
        .map(|shots| postselected_sampler(r.graph(), angles, shots, seed))
        .transpose()?;
    let backend_agreement_max_dev = if r.dense_feasible() {
        Some(backend_agreement(r, angles)?)
    } else {
        None
    };
    Ok(AcausalReport {
        branch_independence_max_dev: branch_deviation(&table, r.num_output()),
        normalization_dev: (table.iter().sum::<f64>() - 1.0).abs(),
        min_eigenvalue: r.process_matrix().min_eigenvalue()?,
        trace: r.process_matrix().trace(),
        signaling_tv: signaling_tv(r, angles, &flipped_angles(angles))?,
        postselect,
        backend_agreement_max_dev,
    })
}
