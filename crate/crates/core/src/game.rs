//! The all-zero causal game: boys win when every output reads 0.
//!
//! Under a fixed causal order the winning probability `P₀` is bounded by
//! `½(1 + 2^{-n})`; the acausal resource reaches `P₀ = 1`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::acausal::{build_resource_pm, outcome_table, SHOT_BATCH};
use crate::graphstate::{graph_state, presets, Graph};
use crate::mbqc::{causal_output_distribution, linear_cluster_pattern, positive_branch_output, run_causal, Pattern};
use crate::procmat::Backend;
use crate::qlin::Ket;
use crate::{split_seed, Error, Result};

/// Minimum all-zero fidelity of a valid instance's positive branch.
pub const INSTANCE_FIDELITY: f64 = 1.0 - 1e-10;
/// Margin by which `P₀` must exceed the bound to count as a violation.
pub const VIOLATION_MARGIN: f64 = 1e-9;

/// `½(1 + 2^{-n})`.
pub fn causal_bound(n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidArgument("the game needs at least one output".into()));
    }
    Ok(0.5 * (1.0 + 0.5f64.powi(n as i32)))
}

pub fn violates_bound(p0: f64, n: usize) -> Result<bool> {
    Ok(p0 > causal_bound(n)? + VIOLATION_MARGIN)
}

/// A graph, angles and correcting pattern whose ideal output is `|0…0⟩`.
#[derive(Clone, Debug)]
pub struct GameInstance {
    graph: Graph,
    pattern: Pattern,
}

impl GameInstance {
    /// Accepts the instance only if its positive branch yields `|0^n⟩`.
    pub fn new(graph: Graph, pattern: Pattern) -> Result<Self> {
        let output = positive_branch_output(&graph, pattern.angles())?;
        let fidelity = Ket::basis_state(graph.num_output(), 0).fidelity(&output)?;
        if fidelity < INSTANCE_FIDELITY {
            return Err(Error::InvalidGameInstance { fidelity });
        }
        Ok(Self { graph, pattern })
    }

    /// `chains` parallel chains of `vertices_per_chain` vertices, all angles
    /// zero, with the linear-cluster corrections.
    pub fn parallel_chains(chains: usize, vertices_per_chain: usize) -> Result<Self> {
        let graph = presets::parallel_chains(chains, vertices_per_chain);
        let pattern = linear_cluster_pattern(&graph, &vec![0.0; graph.num_computation()])?;
        Self::new(graph, pattern)
    }

    /// The two-vertex instance `c0 – o0`.
    pub fn p2() -> Self {
        Self::parallel_chains(1, 2).expect("P2 is a valid instance")
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    pub fn angles(&self) -> &[f64] {
        self.pattern.angles()
    }

    pub fn num_output(&self) -> usize {
        self.graph.num_output()
    }
}

/// `Σ_m P_acausal(m, 0^n)` by exact enumeration.
pub fn acausal_p0(inst: &GameInstance) -> Result<f64> {
    let r = build_resource_pm(&inst.graph)?;
    let table = outcome_table(&r, inst.angles(), Backend::Auto)?.probabilities;
    let width = 1 << inst.num_output();
    Ok(table.iter().step_by(width).sum())
}

/// Girls measure first and may pass their outcomes to the boys.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GirlsFirst {
    pub exact: f64,
    pub empirical: Option<f64>,
    pub shots: u64,
}

/// Exact `P₀` when all girls precede all boys, plus an empirical estimate
/// over `shots` seeded runs (batch `b` uses stream `split_seed(seed, b)`).
pub fn girls_first_p0(inst: &GameInstance, correct: bool, shots: u64, seed: u64) -> Result<GirlsFirst> {
    let exact = causal_output_distribution(&inst.graph, &inst.pattern, correct)?[0];
    let empirical = if shots == 0 {
        None
    } else {
        let wins = (0..shots.div_ceil(SHOT_BATCH))
            .into_par_iter()
            .map(|b| -> Result<u64> {
                let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, b));
                let mut wins = 0;
                for _ in 0..SHOT_BATCH.min(shots - b * SHOT_BATCH) {
                    let run = run_causal(&inst.graph, &inst.pattern, &mut rng, correct)?;
                    wins += u64::from(run.z.iter().all(|&z| z == 0));
                }
                Ok(wins)
            })
            .try_reduce(|| 0, |a, b| Ok(a + b))?;
        Some(wins as f64 / shots as f64)
    };
    Ok(GirlsFirst {
        exact,
        empirical,
        shots,
    })
}

/// Boys measure first: `⟨0^n| Tr_C |G⟩⟨G| |0^n⟩`.
pub fn boys_first_p0(inst: &GameInstance) -> Result<f64> {
    let girls: Vec<usize> = inst.graph.computation_indices().collect();
    let boys = graph_state(&inst.graph).reduced_density(&girls)?;
    Ok(boys.matrix()[(0, 0)].re)
}

/// Every scenario of the game side by side.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameReport {
    pub p0_acausal: f64,
    pub p0_girls_first_corrected: f64,
    pub p0_girls_first_uncorrected: f64,
    pub p0_boys_first: f64,
    pub bound: f64,
    pub violated: bool,
}

pub fn game_report(inst: &GameInstance) -> Result<GameReport> {
    let n = inst.num_output();
    let p0_acausal = acausal_p0(inst)?;
    Ok(GameReport {
        p0_acausal,
        p0_girls_first_corrected: girls_first_p0(inst, true, 0, 0)?.exact,
        p0_girls_first_uncorrected: girls_first_p0(inst, false, 0, 0)?.exact,
        p0_boys_first: boys_first_p0(inst)?,
        bound: causal_bound(n)?,
        violated: violates_bound(p0_acausal, n)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_values() {
        assert_eq!(causal_bound(1).unwrap(), 0.75);
        assert_eq!(causal_bound(2).unwrap(), 0.625);
        assert!((causal_bound(40).unwrap() - 0.5).abs() < 1e-12);
        assert!(causal_bound(0).is_err());
    }

    #[test]
    fn p2_instance() {
        let inst = GameInstance::p2();
        assert!((acausal_p0(&inst).unwrap() - 1.0).abs() < 1e-10);
        assert!((girls_first_p0(&inst, true, 0, 0).unwrap().exact - 1.0).abs() < 1e-12);
        assert!((girls_first_p0(&inst, false, 0, 0).unwrap().exact - 0.5).abs() < 1e-12);
        assert!((boys_first_p0(&inst).unwrap() - 0.5).abs() < 1e-10);
        let report = game_report(&inst).unwrap();
        assert!(report.violated);
        assert!(!violates_bound(report.p0_boys_first, 1).unwrap());
    }

    #[test]
    fn two_chain_instance() {
        let inst = GameInstance::parallel_chains(2, 2).unwrap();
        let report = game_report(&inst).unwrap();
        assert!((report.p0_acausal - 1.0).abs() < 1e-10);
        assert!((report.p0_girls_first_corrected - 1.0).abs() < 1e-12);
        assert!((report.p0_boys_first - 0.25).abs() < 1e-10);
        assert_eq!(report.bound, 0.625);
        assert!(report.violated);
    }

    #[test]
    fn three_chain_is_not_an_instance() {
        let graph = presets::path(3);
        let pattern = linear_cluster_pattern(&graph, &[0.0, 0.0]).unwrap();
        let err = GameInstance::new(graph.clone(), pattern.clone());
        assert!(matches!(err, Err(Error::InvalidGameInstance { fidelity }) if (fidelity - 0.5).abs() < 1e-12));
        // Its acausal P₀ would be 1/2.
        let r = build_resource_pm(&graph).unwrap();
        let table = outcome_table(&r, &[0.0, 0.0], Backend::Auto).unwrap().probabilities;
        let p0: f64 = table.iter().step_by(2).sum();
        assert!((p0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empirical_girls_first_is_seeded() {
        let inst = GameInstance::p2();
        let a = girls_first_p0(&inst, false, 5000, 4).unwrap();
        let b = girls_first_p0(&inst, false, 5000, 4).unwrap();
        assert_eq!(a, b);
        let e = a.empirical.unwrap();
        assert!((e - 0.5).abs() < 5.0 * (0.25f64 / 5000.0).sqrt());
        let corrected = girls_first_p0(&inst, true, 2000, 4).unwrap();
        assert_eq!(corrected.empirical, Some(1.0));
    }

    #[test]
    fn longer_chains_are_valid() {
        for (chains, len) in [(1, 4), (1, 6), (3, 2)] {
            let inst = GameInstance::parallel_chains(chains, len).unwrap();
            let n = inst.num_output();
            assert!((acausal_p0(&inst).unwrap() - 1.0).abs() < 1e-10);
            assert!((boys_first_p0(&inst).unwrap() - 0.5f64.powi(n as i32)).abs() < 1e-10);
            let up = girls_first_p0(&inst, true, 0, 0).unwrap().exact;
            let down = girls_first_p0(&inst, false, 0, 0).unwrap().exact;
            assert!(up >= down);
        }
    }
}
