//! Dense complex linear algebra over ordered qubit registers.
//!
//! Every register in the crate uses one ordering rule: qubit 0 is the most
//! significant bit of a basis-state label, so on a `k`-qubit register qubit
//! `q` of basis index `x` is `(x >> (k - 1 - q)) & 1`. Tensor products keep
//! concatenation order.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::{Error, Result};

/// Hermiticity and orthonormality tolerance used throughout the crate.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Normalization tolerance for physical states.
pub const NORM_TOL: f64 = 1e-12;
/// Branches below this probability cannot be forced.
pub const MIN_FORCED_PROBABILITY: f64 = 1e-14;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Library-wide numeric tolerances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub hermitian: f64,
    pub norm: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermitian: HERMITIAN_TOL,
            norm: NORM_TOL,
        }
    }
}

/// Bit of `qubit` in basis index `index` of a `num_qubits` register.
#[inline]
pub fn bit_of(index: usize, qubit: usize, num_qubits: usize) -> usize {
    (index >> (num_qubits - 1 - qubit)) & 1
}

/// Mask selecting `qubit` in a `num_qubits` register.
#[inline]
pub fn qubit_mask(qubit: usize, num_qubits: usize) -> usize {
    1 << (num_qubits - 1 - qubit)
}

fn log2_exact(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(dim));
    }
    Ok(dim.trailing_zeros() as usize)
}

fn check_targets(targets: &[usize], num_qubits: usize) -> Result<()> {
    let mut seen = vec![false; num_qubits];
    for &t in targets {
        if t >= num_qubits {
            return Err(Error::QubitOutOfRange {
                index: t,
                num_qubits,
            });
        }
        if std::mem::replace(&mut seen[t], true) {
            return Err(Error::DuplicateQubit(t));
        }
    }
    Ok(())
}

fn check_permutation(perm: &[usize], num_qubits: usize) -> Result<()> {
    if perm.len() != num_qubits {
        return Err(Error::InvalidPermutation(num_qubits));
    }
    let mut seen = vec![false; num_qubits];
    for &p in perm {
        if p >= num_qubits || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidPermutation(num_qubits));
        }
    }
    Ok(())
}

/// Inverse of a qubit permutation.
pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// Maps each new basis index to the old one, where new qubit `i` is old
/// qubit `perm[i]`.
fn permuted_indices(perm: &[usize]) -> Vec<usize> {
    let k = perm.len();
    (0..1usize << k)
        .map(|y| {
            let mut x = 0;
            for (i, &p) in perm.iter().enumerate() {
                if bit_of(y, i, k) == 1 {
                    x |= qubit_mask(p, k);
                }
            }
            x
        })
        .collect()
}

/// Offsets of the `2^targets.len()` sub-indices on `targets` (first target is
/// the most significant sub-bit), and the bases of the complementary qubits.
fn split_indices(targets: &[usize], num_qubits: usize) -> (Vec<usize>, Vec<usize>) {
    let j = targets.len();
    let offsets = (0..1usize << j)
        .map(|s| {
            targets
                .iter()
                .enumerate()
                .filter(|&(i, _)| bit_of(s, i, j) == 1)
                .fold(0, |acc, (_, &t)| acc | qubit_mask(t, num_qubits))
        })
        .collect();
    let rest: Vec<usize> = (0..num_qubits).filter(|q| !targets.contains(q)).collect();
    let r = rest.len();
    let bases = (0..1usize << r)
        .map(|s| {
            rest.iter()
                .enumerate()
                .filter(|&(i, _)| bit_of(s, i, r) == 1)
                .fold(0, |acc, (_, &q)| acc | qubit_mask(q, num_qubits))
        })
        .collect();
    (offsets, bases)
}

/// Types that form tensor products.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Self;
}

/// Tensor product of a nonempty list, in list order.
pub fn kron_all<T: Tensor + Clone>(items: &[T]) -> Result<T> {
    let (first, rest) = items.split_first().ok_or(Error::EmptyList)?;
    Ok(rest.iter().fold(first.clone(), |acc, x| acc.tensor(x)))
}

/// A dense state vector on an ordered qubit register.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    amps: Vec<Complex64>,
    num_qubits: usize,
}

impl Ket {
    /// A physical state; the norm must equal 1 within [`NORM_TOL`].
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        Self::new_with_tolerance(amps, NORM_TOL)
    }

    pub fn new_with_tolerance(amps: Vec<Complex64>, tol: f64) -> Result<Self> {
        let ket = Self::unnormalized(amps)?;
        let deviation = (ket.norm_sqr().sqrt() - 1.0).abs();
        if deviation > tol {
            return Err(Error::NotNormalized { deviation });
        }
        Ok(ket)
    }

    /// A vector with no norm constraint.
    pub fn unnormalized(amps: Vec<Complex64>) -> Result<Self> {
        let num_qubits = log2_exact(amps.len())?;
        Ok(Self { amps, num_qubits })
    }

    pub fn basis_state(num_qubits: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; 1 << num_qubits];
        amps[index] = ONE;
        Self { amps, num_qubits }
    }

    /// The zero-qubit state, the unit of the tensor product.
    pub fn scalar_one() -> Self {
        Self::basis_state(0, 0)
    }

    pub fn computational(bit: u8) -> Self {
        Self::basis_state(1, usize::from(bit & 1))
    }

    pub fn plus() -> Self {
        Self::equatorial(0.0, 0)
    }

    pub fn minus() -> Self {
        Self::equatorial(0.0, 1)
    }

    /// `(|0⟩ + (-1)^outcome e^{iφ}|1⟩)/√2`.
    pub fn equatorial(phi: f64, outcome: u8) -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let sign = if outcome & 1 == 0 { 1.0 } else { -1.0 };
        Self {
            amps: vec![
                Complex64::new(h, 0.0),
                Complex64::from_polar(sign * h, phi),
            ],
            num_qubits: 1,
        }
    }

    /// `|+⟩^{⊗k}`.
    pub fn plus_register(num_qubits: usize) -> Self {
        let a = Complex64::new((0.5f64).powf(num_qubits as f64 / 2.0), 0.0);
        Self {
            amps: vec![a; 1 << num_qubits],
            num_qubits,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Ket) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::SizeMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &Ket) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm_sqr().sqrt();
        if norm < MIN_FORCED_PROBABILITY {
            return Err(Error::ZeroProbabilityBranch {
                probability: norm * norm,
            });
        }
        Ok(self.scaled(Complex64::new(1.0 / norm, 0.0)))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            amps: self.amps.iter().map(|a| a * factor).collect(),
            num_qubits: self.num_qubits,
        }
    }

    pub fn max_abs_diff(&self, other: &Ket) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// New qubit `i` is old qubit `perm[i]`.
    pub fn permute_qubits(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.num_qubits)?;
        let amps = permuted_indices(perm)
            .into_iter()
            .map(|x| self.amps[x])
            .collect();
        Ok(Self {
            amps,
            num_qubits: self.num_qubits,
        })
    }

    /// Applies a `j`-qubit operator to `targets` (listed in the operator's own
    /// qubit order), leaving the other qubits untouched.
    pub fn apply_on_qubits(&self, op: &Operator, targets: &[usize]) -> Result<Self> {
        check_targets(targets, self.num_qubits)?;
        if op.num_qubits() != targets.len() {
            return Err(Error::SizeMismatch {
                expected: targets.len(),
                found: op.num_qubits(),
            });
        }
        let (offsets, bases) = split_indices(targets, self.num_qubits);
        let m = op.matrix();
        let mut out = vec![ZERO; self.dim()];
        let mut buf = vec![ZERO; offsets.len()];
        for base in bases {
            for (b, &off) in buf.iter_mut().zip(&offsets) {
                *b = self.amps[base | off];
            }
            for (row, &off) in offsets.iter().enumerate() {
                out[base | off] = buf
                    .iter()
                    .enumerate()
                    .map(|(col, v)| m[(row, col)] * v)
                    .sum();
            }
        }
        Ok(Self {
            amps: out,
            num_qubits: self.num_qubits,
        })
    }

    /// Contracts `target` with `⟨bra|`, returning the unnormalized state of
    /// the remaining qubits in their original order.
    pub fn contract_qubit(&self, bra: &Ket, target: usize) -> Result<Self> {
        if bra.num_qubits != 1 {
            return Err(Error::SizeMismatch {
                expected: 1,
                found: bra.num_qubits,
            });
        }
        check_targets(&[target], self.num_qubits)?;
        let k = self.num_qubits;
        let low = k - 1 - target;
        let (b0, b1) = (bra.amps[0].conj(), bra.amps[1].conj());
        let amps = (0..self.dim() / 2)
            .map(|r| {
                let hi = (r >> low) << (low + 1);
                let lo = r & ((1 << low) - 1);
                let x0 = hi | lo;
                b0 * self.amps[x0] + b1 * self.amps[x0 | (1 << low)]
            })
            .collect();
        Ok(Self {
            amps,
            num_qubits: k - 1,
        })
    }

    /// `(⟨b_0| ⊗ ... ⊗ ⟨b_{k-1}|) |self⟩` for single-qubit `bras`.
    pub fn product_overlap(&self, bras: &[&Ket]) -> Result<Complex64> {
        if bras.len() != self.num_qubits {
            return Err(Error::SizeMismatch {
                expected: self.num_qubits,
                found: bras.len(),
            });
        }
        let mut cur = self.amps.clone();
        // Contract the last qubit first; it is the least significant bit.
        for bra in bras.iter().rev() {
            if bra.num_qubits != 1 {
                return Err(Error::SizeMismatch {
                    expected: 1,
                    found: bra.num_qubits,
                });
            }
            let (b0, b1) = (bra.amps[0].conj(), bra.amps[1].conj());
            cur = cur.chunks_exact(2).map(|p| b0 * p[0] + b1 * p[1]).collect();
        }
        Ok(cur[0])
    }

    /// `Tr_discard |self⟩⟨self|`, computed without the full projector.
    pub fn reduced_density(&self, discard: &[usize]) -> Result<Operator> {
        check_targets(discard, self.num_qubits)?;
        let (disc_offsets, keep_bases) = split_indices(discard, self.num_qubits);
        let d = keep_bases.len();
        let mut mat = DMatrix::zeros(d, d);
        for &e in &disc_offsets {
            let column: Vec<Complex64> = keep_bases.iter().map(|&b| self.amps[b | e]).collect();
            for (a, va) in column.iter().enumerate() {
                for (b, vb) in column.iter().enumerate() {
                    mat[(a, b)] += va * vb.conj();
                }
            }
        }
        Ok(Operator {
            mat,
            num_qubits: self.num_qubits - discard.len(),
        })
    }

    /// `|self⟩⟨self|`.
    pub fn projector(&self) -> Operator {
        Operator::outer(self, self)
    }
}

impl Tensor for Ket {
    fn tensor(&self, other: &Self) -> Self {
        let amps = self
            .amps
            .iter()
            .flat_map(|a| other.amps.iter().map(move |b| a * b))
            .collect();
        Self {
            amps,
            num_qubits: self.num_qubits + other.num_qubits,
        }
    }
}

/// A dense operator on an ordered qubit register.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    mat: DMatrix<Complex64>,
    num_qubits: usize,
}

impl Operator {
    pub fn from_matrix(mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::SizeMismatch {
                expected: mat.nrows(),
                found: mat.ncols(),
            });
        }
        let num_qubits = log2_exact(mat.nrows())?;
        Ok(Self { mat, num_qubits })
    }

    /// Row-major real entries, for small fixed gates.
    pub fn from_real_rows(dim: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return Err(Error::SizeMismatch {
                expected: dim * dim,
                found: rows.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_iterator(
            dim,
            dim,
            rows.iter().map(|&r| Complex64::new(r, 0.0)),
        ))
    }

    pub fn identity(num_qubits: usize) -> Self {
        let d = 1 << num_qubits;
        Self {
            mat: DMatrix::identity(d, d),
            num_qubits,
        }
    }

    pub fn zeros(num_qubits: usize) -> Self {
        let d = 1 << num_qubits;
        Self {
            mat: DMatrix::zeros(d, d),
            num_qubits,
        }
    }

    pub fn pauli_x() -> Self {
        Self::from_real_rows(2, &[0., 1., 1., 0.]).unwrap()
    }

    pub fn pauli_z() -> Self {
        Self::from_real_rows(2, &[1., 0., 0., -1.]).unwrap()
    }

    pub fn hadamard() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_real_rows(2, &[h, h, h, -h]).unwrap()
    }

    /// `|0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ Z`.
    pub fn cz() -> Self {
        let p0 = Ket::computational(0).projector();
        let p1 = Ket::computational(1).projector();
        p0.tensor(&Self::identity(1))
            .add(&p1.tensor(&Self::pauli_z()))
            .unwrap()
    }

    pub fn swap() -> Self {
        #[rustfmt::skip]
        let rows = [
            1., 0., 0., 0.,
            0., 0., 1., 0.,
            0., 1., 0., 0.,
            0., 0., 0., 1.,
        ];
        Self::from_real_rows(4, &rows).unwrap()
    }

    /// `|a⟩⟨b|`.
    pub fn outer(a: &Ket, b: &Ket) -> Self {
        let mat = DMatrix::from_fn(a.dim(), b.dim(), |i, j| a.amps[i] * b.amps[j].conj());
        Self {
            mat,
            num_qubits: a.num_qubits,
        }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::SizeMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self {
            mat: &self.mat + &other.mat,
            num_qubits: self.num_qubits,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self {
            mat: &self.mat - &other.mat,
            num_qubits: self.num_qubits,
        })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self {
            mat: &self.mat * &other.mat,
            num_qubits: self.num_qubits,
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            mat: self.mat.map(|x| x * factor),
            num_qubits: self.num_qubits,
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            mat: self.mat.adjoint(),
            num_qubits: self.num_qubits,
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    /// `Tr[self · other]` without forming the product.
    pub fn trace_product(&self, other: &Self) -> Result<Complex64> {
        self.check_same_dim(other)?;
        let d = self.dim();
        let mut acc = ZERO;
        for i in 0..d {
            for j in 0..d {
                acc += self.mat[(i, j)] * other.mat[(j, i)];
            }
        }
        Ok(acc)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.mat
            .iter()
            .zip(other.mat.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |A - A†|` entrywise.
    pub fn hermiticity_deviation(&self) -> f64 {
        let d = self.dim();
        let mut dev = 0.0f64;
        for i in 0..d {
            for j in i..d {
                dev = dev.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    pub fn apply(&self, ket: &Ket) -> Result<Ket> {
        if self.dim() != ket.dim() {
            return Err(Error::SizeMismatch {
                expected: self.dim(),
                found: ket.dim(),
            });
        }
        let v = nalgebra::DVector::from_column_slice(&ket.amps);
        Ok(Ket {
            amps: (&self.mat * v).as_slice().to_vec(),
            num_qubits: ket.num_qubits,
        })
    }

    /// New qubit `i` is old qubit `perm[i]`.
    pub fn permute_qubits(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.num_qubits)?;
        let idx = permuted_indices(perm);
        let d = self.dim();
        Ok(Self {
            mat: DMatrix::from_fn(d, d, |r, c| self.mat[(idx[r], idx[c])]),
            num_qubits: self.num_qubits,
        })
    }

    /// Traces out `discard`; the kept qubits retain their relative order.
    pub fn partial_trace(&self, discard: &[usize]) -> Result<Self> {
        check_targets(discard, self.num_qubits)?;
        let (disc_offsets, keep_bases) = split_indices(discard, self.num_qubits);
        let d = keep_bases.len();
        let mat = DMatrix::from_fn(d, d, |a, b| {
            disc_offsets
                .iter()
                .map(|&e| self.mat[(keep_bases[a] | e, keep_bases[b] | e)])
                .sum()
        });
        Ok(Self {
            mat,
            num_qubits: self.num_qubits - discard.len(),
        })
    }

    /// Ascending eigenvalues of a Hermitian operator.
    pub fn eigenvalues_hermitian(&self) -> Result<Vec<f64>> {
        let deviation = self.hermiticity_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        // Symmetrize so the solver sees an exactly Hermitian input.
        let herm = (&self.mat + self.mat.adjoint()).map(|x| x * 0.5);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues_hermitian()?[0])
    }
}

impl Tensor for Operator {
    fn tensor(&self, other: &Self) -> Self {
        Self {
            mat: self.mat.kronecker(&other.mat),
            num_qubits: self.num_qubits + other.num_qubits,
        }
    }
}

/// An orthonormal single-qubit measurement basis; outcome `m` projects onto
/// `ket(m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QubitBasis {
    kets: [Ket; 2],
}

impl QubitBasis {
    pub fn new(k0: Ket, k1: Ket) -> Result<Self> {
        for k in [&k0, &k1] {
            if k.num_qubits() != 1 {
                return Err(Error::SizeMismatch {
                    expected: 1,
                    found: k.num_qubits(),
                });
            }
        }
        let deviation = [
            (k0.norm_sqr() - 1.0).abs(),
            (k1.norm_sqr() - 1.0).abs(),
            k0.inner(&k1)?.norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(Self { kets: [k0, k1] })
    }

    pub fn computational() -> Self {
        Self {
            kets: [Ket::computational(0), Ket::computational(1)],
        }
    }

    /// `{|φ^0⟩, |φ^1⟩}` with `|φ^m⟩ = (|0⟩ + (-1)^m e^{iφ}|1⟩)/√2`.
    pub fn equatorial(phi: f64) -> Self {
        Self {
            kets: [Ket::equatorial(phi, 0), Ket::equatorial(phi, 1)],
        }
    }

    pub fn ket(&self, outcome: u8) -> &Ket {
        &self.kets[usize::from(outcome & 1)]
    }
}

/// Result of a single-qubit projective measurement. The measured qubit is
/// removed from `post_state`.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub outcome: u8,
    pub probability: f64,
    pub post_state: Ket,
}

/// Born-rule probabilities of both outcomes of measuring `target` in `basis`.
pub fn outcome_probabilities(state: &Ket, basis: &QubitBasis, target: usize) -> Result<[f64; 2]> {
    Ok([
        state.contract_qubit(basis.ket(0), target)?.norm_sqr(),
        state.contract_qubit(basis.ket(1), target)?.norm_sqr(),
    ])
}

/// Measures `target` in `basis`, drawing the outcome from `rng`.
pub fn sample_projective<R: Rng + ?Sized>(
    state: &Ket,
    basis: &QubitBasis,
    target: usize,
    rng: &mut R,
) -> Result<Measurement> {
    let branches = [
        state.contract_qubit(basis.ket(0), target)?,
        state.contract_qubit(basis.ket(1), target)?,
    ];
    let p0 = branches[0].norm_sqr();
    let p1 = branches[1].norm_sqr();
    let outcome = u8::from(rng.gen::<f64>() * (p0 + p1) >= p0);
    let [b0, b1] = branches;
    let (branch, probability) = if outcome == 0 { (b0, p0) } else { (b1, p1) };
    Ok(Measurement {
        outcome,
        probability,
        post_state: branch.normalized()?,
    })
}

/// Measures `target` in `basis` with a prescribed outcome (postselection).
pub fn force_outcome(
    state: &Ket,
    basis: &QubitBasis,
    target: usize,
    outcome: u8,
) -> Result<Measurement> {
    let branch = state.contract_qubit(basis.ket(outcome), target)?;
    let probability = branch.norm_sqr();
    if probability < MIN_FORCED_PROBABILITY {
        return Err(Error::ZeroProbabilityBranch { probability });
    }
    Ok(Measurement {
        outcome: outcome & 1,
        probability,
        post_state: branch.normalized()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_ket(num_qubits: usize, seed: u64) -> Ket {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..1 << num_qubits)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        Ket::unnormalized(amps).unwrap().normalized().unwrap()
    }

    fn random_density(num_qubits: usize, seed: u64) -> Operator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 1 << num_qubits;
        let a = DMatrix::from_fn(d, d, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let rho = &a * a.adjoint();
        let tr = rho.trace();
        Operator::from_matrix(rho.map(|x| x / tr)).unwrap()
    }

    #[test]
    fn kron_identity_and_kets() {
        let i4 = kron_all(&[Operator::identity(1), Operator::identity(1)]).unwrap();
        assert_eq!(i4, Operator::identity(2));

        let v = kron_all(&[Ket::computational(0), Ket::plus()]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let expected = Ket::new(vec![c(h), c(h), c(0.0), c(0.0)]).unwrap();
        assert!(v.max_abs_diff(&expected) < 1e-15);

        assert!(matches!(kron_all::<Ket>(&[]), Err(Error::EmptyList)));
    }

    #[test]
    fn kron_zz_diagonal() {
        let zz = kron_all(&[Operator::pauli_z(), Operator::pauli_z()]).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| zz.matrix()[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, -1.0, 1.0]);
        let ev = zz.eigenvalues_hermitian().unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-12 && (ev[1] + 1.0).abs() < 1e-12);
        assert!((ev[2] - 1.0).abs() < 1e-12 && (ev[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cz_on_plus_plus() {
        let pp = Ket::plus_register(2);
        let out = pp.apply_on_qubits(&Operator::cz(), &[0, 1]).unwrap();
        let expected = Ket::new(vec![c(0.5), c(0.5), c(0.5), c(-0.5)]).unwrap();
        assert!(out.max_abs_diff(&expected) < 1e-15);
        let twice = out.apply_on_qubits(&Operator::cz(), &[0, 1]).unwrap();
        assert!(twice.max_abs_diff(&pp) < 1e-15);
    }

    #[test]
    fn identity_application_is_noop() {
        let psi = random_ket(4, 3);
        let out = psi.apply_on_qubits(&Operator::identity(2), &[3, 1]).unwrap();
        assert!(out.max_abs_diff(&psi) < 1e-15);
    }

    #[test]
    fn apply_rejects_bad_targets() {
        let psi = random_ket(3, 1);
        assert!(matches!(
            psi.apply_on_qubits(&Operator::cz(), &[1, 1]),
            Err(Error::DuplicateQubit(1))
        ));
        assert!(matches!(
            psi.apply_on_qubits(&Operator::cz(), &[0, 3]),
            Err(Error::QubitOutOfRange { index: 3, .. })
        ));
    }

    #[test]
    fn partial_trace_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = Ket::new(vec![c(h), c(0.0), c(0.0), c(h)]).unwrap();
        let marginal = bell.projector().partial_trace(&[1]).unwrap();
        assert!(marginal.max_abs_diff(&Operator::identity(1).scaled(0.5)) < 1e-15);

        let rho = random_density(2, 7);
        let sigma = random_density(1, 8);
        let reduced = rho.tensor(&sigma).partial_trace(&[2]).unwrap();
        assert!(reduced.max_abs_diff(&rho) < 1e-14);

        let all = rho.partial_trace(&[0, 1]).unwrap();
        assert_eq!(all.dim(), 1);
        assert!((all.matrix()[(0, 0)] - c(1.0)).norm() < 1e-14);

        assert!(rho.partial_trace(&[2]).is_err());
    }

    #[test]
    fn partial_trace_keeps_qubit_order() {
        // Trace the middle qubit of |0⟩|+⟩|1⟩ and expect |01⟩⟨01|.
        let psi = kron_all(&[Ket::computational(0), Ket::plus(), Ket::computational(1)]).unwrap();
        let reduced = psi.projector().partial_trace(&[1]).unwrap();
        let expected = Ket::basis_state(2, 0b01).projector();
        assert!(reduced.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn reduced_density_matches_partial_trace() {
        let psi = random_ket(5, 40);
        let fast = psi.reduced_density(&[0, 3]).unwrap();
        let slow = psi.projector().partial_trace(&[0, 3]).unwrap();
        assert!(fast.max_abs_diff(&slow) < 1e-14);
    }

    #[test]
    fn min_eigenvalues() {
        assert!((Operator::identity(2).min_eigenvalue().unwrap() - 1.0).abs() < 1e-12);
        assert!((Operator::pauli_z().min_eigenvalue().unwrap() + 1.0).abs() < 1e-12);
        // The singlet is the -1 eigenvector of SWAP.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let singlet = Ket::new(vec![c(0.0), c(h), c(-h), c(0.0)]).unwrap();
        let swapped = Operator::swap().apply(&singlet).unwrap();
        assert!(swapped.max_abs_diff(&singlet.scaled(c(-1.0))) < 1e-15);
        assert!((Operator::swap().min_eigenvalue().unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn min_eigenvalue_rejects_non_hermitian() {
        let op = Operator::from_real_rows(2, &[0., 1., 0., 0.]).unwrap();
        assert!(matches!(op.min_eigenvalue(), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn measurement_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = sample_projective(&Ket::computational(0), &QubitBasis::computational(), 0, &mut rng)
            .unwrap();
        assert_eq!(m.outcome, 0);
        assert!((m.probability - 1.0).abs() < 1e-15);

        let p = outcome_probabilities(&Ket::plus(), &QubitBasis::computational(), 0).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);

        let g = Ket::plus_register(2)
            .apply_on_qubits(&Operator::cz(), &[0, 1])
            .unwrap();
        let pm = QubitBasis::equatorial(0.0);
        let m0 = force_outcome(&g, &pm, 0, 0).unwrap();
        assert!((m0.probability - 0.5).abs() < 1e-15);
        assert!(m0.post_state.max_abs_diff(&Ket::computational(0)) < 1e-15);
        let m1 = force_outcome(&g, &pm, 0, 1).unwrap();
        assert!((m1.probability - 0.5).abs() < 1e-15);
        assert!(m1.post_state.max_abs_diff(&Ket::computational(1)) < 1e-15);
    }

    #[test]
    fn forcing_impossible_branch_fails() {
        let err = force_outcome(&Ket::computational(0), &QubitBasis::computational(), 0, 1);
        assert!(matches!(err, Err(Error::ZeroProbabilityBranch { .. })));
    }

    #[test]
    fn non_orthonormal_basis_rejected() {
        let err = QubitBasis::new(Ket::computational(0), Ket::plus());
        assert!(matches!(err, Err(Error::NotOrthonormal { .. })));
    }

    #[test]
    fn sampling_is_seeded() {
        let psi = random_ket(3, 11);
        let basis = QubitBasis::equatorial(0.3);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..64)
                .map(|_| sample_projective(&psi, &basis, 1, &mut rng).unwrap().outcome)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
    }

    #[test]
    fn product_overlap_matches_dense() {
        let psi = random_ket(3, 21);
        let bras = [Ket::equatorial(0.4, 1), Ket::computational(1), Ket::plus()];
        let product = kron_all(&bras).unwrap();
        let expected = product.inner(&psi).unwrap();
        let got = psi.product_overlap(&bras.iter().collect::<Vec<_>>()).unwrap();
        assert!((got - expected).norm() < 1e-14);
    }

    /// Full operator `op ⊗ I` moved onto `targets` by explicit permutation.
    fn embed_by_permutation(op: &Operator, targets: &[usize], k: usize) -> Operator {
        let rest: Vec<usize> = (0..k).filter(|q| !targets.contains(q)).collect();
        let order: Vec<usize> = targets.iter().chain(&rest).copied().collect();
        let full = op.tensor(&Operator::identity(k - targets.len()));
        // `full` acts on the register reordered as `order`; undo that.
        full.permute_qubits(&inverse_permutation(&order)).unwrap()
    }

    fn random_unitary_like(num_qubits: usize, seed: u64) -> Operator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 1 << num_qubits;
        Operator::from_matrix(DMatrix::from_fn(d, d, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        }))
        .unwrap()
    }

    proptest! {
        #[test]
        fn permutation_round_trip(k in 1usize..=8, seed in any::<u64>()) {
            let psi = random_ket(k, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let mut perm: Vec<usize> = (0..k).collect();
            rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
            let back = psi
                .permute_qubits(&perm).unwrap()
                .permute_qubits(&inverse_permutation(&perm)).unwrap();
            prop_assert_eq!(back, psi);
        }

        #[test]
        fn partial_trace_preserves_trace(k in 1usize..=6, seed in any::<u64>(), mask in any::<u8>()) {
            let rho = random_density(k, seed);
            let discard: Vec<usize> = (0..k).filter(|q| mask >> q & 1 == 1).collect();
            let reduced = rho.partial_trace(&discard).unwrap();
            prop_assert!((reduced.trace() - rho.trace()).norm() < 1e-12);
        }

        #[test]
        fn apply_matches_explicit_embedding(k in 2usize..=6, j in 1usize..=2, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut qubits: Vec<usize> = (0..k).collect();
            rand::seq::SliceRandom::shuffle(qubits.as_mut_slice(), &mut rng);
            let targets = &qubits[..j];
            let op = random_unitary_like(j, seed ^ 1);
            let psi = random_ket(k, seed ^ 2);
            let fast = psi.apply_on_qubits(&op, targets).unwrap();
            let slow = embed_by_permutation(&op, targets, k).apply(&psi).unwrap();
            prop_assert!(fast.max_abs_diff(&slow) < 1e-10);
        }

        #[test]
        fn born_rule_complete(k in 1usize..=6, seed in any::<u64>(), phi in 0.0..std::f64::consts::TAU) {
            let psi = random_ket(k, seed);
            let target = (seed as usize) % k;
            let p = outcome_probabilities(&psi, &QubitBasis::equatorial(phi), target).unwrap();
            prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        }
    }
}
