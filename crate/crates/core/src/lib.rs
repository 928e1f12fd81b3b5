//! Resource process matrices for acausal measurement-based quantum computing.
//!
//! The crate builds the decorated-graph-state process matrix
//! `W = 2^{N+n} |G′⟩⟨G′| ⊗ (I/2)^{⊗n}` for a graph with computation set `C`
//! (`N` qubits) and output set `O` (`n` qubits), and checks it numerically:
//!
//! * [`qlin`]: dense kets and operators, partial trace, projective sampling.
//! * [`graphstate`]: resource graphs, decoration, graph states.
//! * [`mbqc`]: the causal, adaptive measurement protocol.
//! * [`procmat`]: CJ operators, instruments, the process-matrix probability
//!   rule and validity checks.
//! * [`acausal`]: the resource process matrix, branch independence,
//!   normalization, signaling, and postselected sampling.
//! * [`game`]: the all-zero causal game.
//!
//! Every register orders qubits with qubit 0 as the most significant bit.

pub mod acausal;
pub mod error;
pub mod game;
pub mod graphstate;
pub mod mbqc;
pub mod procmat;
pub mod qlin;

pub use error::{Error, Result};

/// Seed of the `index`-th independent stream derived from `seed`
/// (SplitMix64 of `seed + (index + 1) · γ`). Parallel samplers key their
/// streams by batch index, so results do not depend on the thread count.
pub fn split_seed(seed: u64, index: u64) -> u64 {
    const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed used by every command when none is given.
pub const DEFAULT_SEED: u64 = 20_150_101;
