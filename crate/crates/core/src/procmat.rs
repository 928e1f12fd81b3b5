//! Process matrices: CJ operators of instruments, the CPTP test, the
//! probability rule `P = Tr[W (M_a ⊗ M_b ⊗ ...)]`, and validity checks.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::qlin::{kron_all, Ket, Operator, QubitBasis, Tensor, HERMITIAN_TOL};
use crate::{split_seed, Error, Result};

/// Registers above this size are never materialized densely.
pub const DENSE_BACKEND_MAX_QUBITS: usize = 10;
/// Raw probabilities in `[-CLAMP_TOL, 0)` are clamped to zero.
pub const CLAMP_TOL: f64 = 1e-10;
/// Raw probabilities outside `[-RANGE_TOL, 1 + RANGE_TOL]` are errors.
pub const RANGE_TOL: f64 = 1e-8;

/// `Σ_{k,l} |k⟩⟨l| ⊗ M(|l⟩⟨k|)` for a map on `in_qubits` qubits.
fn choi_sum<F>(in_qubits: usize, map: F) -> Operator
where
    F: Fn(&Operator) -> Operator,
{
    let d = 1 << in_qubits;
    let mut acc: Option<Operator> = None;
    for k in 0..d {
        for l in 0..d {
            let bk = Ket::basis_state(in_qubits, k);
            let bl = Ket::basis_state(in_qubits, l);
            let term = Operator::outer(&bk, &bl).tensor(&map(&Operator::outer(&bl, &bk)));
            acc = Some(match acc {
                None => term,
                Some(a) => a.add(&term).expect("uniform shapes"),
            });
        }
    }
    acc.expect("nonempty sum")
}

/// The CJ operator of one instrument outcome on one input and one output
/// qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct CjOperator {
    op: Operator,
    in_count: usize,
    out_count: usize,
    outcome: usize,
    /// `(measure, reprepare)` when the operator is `|φ⟩⟨φ| ⊗ |r⟩⟨r|`.
    factors: Option<(Ket, Ket)>,
}

/// CJ operator of "project onto `measure`, then prepare `reprepare`".
pub fn choi_of_measure_reprepare(measure: &Ket, reprepare: &Ket) -> Result<CjOperator> {
    for k in [measure, reprepare] {
        if k.num_qubits() != 1 {
            return Err(Error::SizeMismatch {
                expected: 1,
                found: k.num_qubits(),
            });
        }
        let deviation = (k.norm_sqr() - 1.0).abs();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotNormalized { deviation });
        }
    }
    let bra = measure.projector();
    let prep = reprepare.projector();
    // M(ρ) = |r⟩⟨φ|ρ|φ⟩⟨r| = Tr[|φ⟩⟨φ| ρ] |r⟩⟨r|
    let op = choi_sum(1, |rho| {
        let weight = bra.trace_product(rho).expect("single qubit");
        Operator::from_matrix(prep.matrix().map(|x| x * weight)).expect("square")
    });
    Ok(CjOperator {
        op,
        in_count: 1,
        out_count: 1,
        outcome: 0,
        factors: Some((measure.clone(), reprepare.clone())),
    })
}

impl CjOperator {
    /// A general CJ operator on one input and one output qubit.
    pub fn from_operator(op: Operator, outcome: usize) -> Result<Self> {
        if op.num_qubits() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "CJ operator on {} qubits, expected 2",
                op.num_qubits()
            )));
        }
        Ok(Self {
            op,
            in_count: 1,
            out_count: 1,
            outcome,
            factors: None,
        })
    }

    pub fn with_outcome(mut self, outcome: usize) -> Self {
        self.outcome = outcome;
        self
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn in_count(&self) -> usize {
        self.in_count
    }

    pub fn out_count(&self) -> usize {
        self.out_count
    }

    pub fn outcome(&self) -> usize {
        self.outcome
    }

    pub fn factors(&self) -> Option<(&Ket, &Ket)> {
        self.factors.as_ref().map(|(a, b)| (a, b))
    }
}

/// A set of CJ operators, one per outcome, with a common shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Instrument {
    elements: Vec<CjOperator>,
    description: String,
}

impl Instrument {
    pub fn new(elements: Vec<CjOperator>, description: impl Into<String>) -> Result<Self> {
        let first = elements.first().ok_or(Error::EmptyList)?;
        let shape = (first.in_count, first.out_count);
        if elements.iter().any(|e| (e.in_count, e.out_count) != shape) {
            return Err(Error::ShapeMismatch("instrument elements differ in shape".into()));
        }
        Ok(Self {
            elements,
            description: description.into(),
        })
    }

    /// Outcome `a` measures `measure.ket(a)` and reprepares `reprepare.ket(a)`.
    pub fn measure_reprepare(
        measure: &QubitBasis,
        reprepare: &QubitBasis,
        description: impl Into<String>,
    ) -> Result<Self> {
        let elements = (0..2u8)
            .map(|a| {
                choi_of_measure_reprepare(measure.ket(a), reprepare.ket(a))
                    .map(|cj| cj.with_outcome(usize::from(a)))
            })
            .collect::<Result<_>>()?;
        Self::new(elements, description)
    }

    pub fn elements(&self) -> &[CjOperator] {
        &self.elements
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn without_outcome(&self, outcome: usize) -> Result<Self> {
        let elements = self
            .elements
            .iter()
            .filter(|e| e.outcome != outcome)
            .cloned()
            .collect();
        Self::new(elements, format!("{} minus outcome {outcome}", self.description))
    }

    /// CJ operator of the deterministic map `Σ_a M_a`.
    pub fn summed(&self) -> CjOperator {
        let op = self
            .elements
            .iter()
            .skip(1)
            .fold(self.elements[0].op.clone(), |acc, e| acc.add(&e.op).expect("uniform shapes"));
        CjOperator {
            op,
            in_count: self.elements[0].in_count,
            out_count: self.elements[0].out_count,
            outcome: 0,
            factors: None,
        }
    }
}

/// Equatorial measurement `{|φ^0⟩, |φ^1⟩}` followed by repreparing `|m⟩`.
pub fn alice_instrument(phi: f64) -> Instrument {
    Instrument::measure_reprepare(
        &QubitBasis::equatorial(phi),
        &QubitBasis::computational(),
        format!("equatorial(phi={phi})"),
    )
    .expect("orthonormal bases")
}

/// Computational measurement followed by repreparing `|z⟩`.
pub fn bob_instrument() -> Instrument {
    Instrument::measure_reprepare(
        &QubitBasis::computational(),
        &QubitBasis::computational(),
        "computational",
    )
    .expect("orthonormal bases")
}

/// Distance of an instrument from the CPTP conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CptpReport {
    /// `max |Tr_out(Σ_a M_a) − I|` entrywise.
    pub trace_deviation: f64,
    /// Smallest eigenvalue of `Σ_a M_a`.
    pub min_eigenvalue: f64,
}

impl CptpReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.trace_deviation <= tol && self.min_eigenvalue >= -tol
    }
}

pub fn cptp_check(inst: &Instrument) -> Result<CptpReport> {
    let total = inst.summed();
    let outputs: Vec<usize> = (total.in_count..total.in_count + total.out_count).collect();
    let reduced = total.op.partial_trace(&outputs)?;
    Ok(CptpReport {
        trace_deviation: reduced.max_abs_diff(&Operator::identity(total.in_count)),
        min_eigenvalue: total.op.min_eigenvalue()?,
    })
}

/// Which kind of party occupies a slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Alice,
    Bob,
    Other,
}

/// A party's input and output qubits in the process-matrix register.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Slot {
    pub party: String,
    pub role: Role,
    pub input: usize,
    pub output: usize,
}

#[derive(Clone, Debug, PartialEq)]
enum Body {
    Dense(Operator),
    /// `scale · |pure⟩⟨pure| ⊗ (I/2)^{⊗mixed}`, pure qubits first.
    PureTimesMixed {
        scale: f64,
        pure: Ket,
        mixed: usize,
    },
}

/// A process matrix over party slots.
#[derive(Debug)]
pub struct ProcessMatrix {
    body: Body,
    slots: Vec<Slot>,
    num_qubits: usize,
    /// Register qubit at each position of the slot-major order
    /// `[in_0, out_0, in_1, out_1, ...]`.
    slot_order: Vec<usize>,
    dense: OnceLock<Operator>,
    /// Transpose of the dense operator with qubits in slot-major order.
    slot_major_transpose: OnceLock<Operator>,
}

impl Clone for ProcessMatrix {
    fn clone(&self) -> Self {
        Self {
            body: self.body.clone(),
            slots: self.slots.clone(),
            num_qubits: self.num_qubits,
            slot_order: self.slot_order.clone(),
            dense: OnceLock::new(),
            slot_major_transpose: OnceLock::new(),
        }
    }
}

impl ProcessMatrix {
    fn with_body(body: Body, num_qubits: usize, slots: Vec<Slot>) -> Result<Self> {
        let slot_order: Vec<usize> = slots.iter().flat_map(|s| [s.input, s.output]).collect();
        if slot_order.len() != num_qubits {
            return Err(Error::ShapeMismatch(format!(
                "{} slot qubits for a {num_qubits}-qubit register",
                slot_order.len()
            )));
        }
        let mut seen = vec![false; num_qubits];
        for &q in &slot_order {
            if q >= num_qubits {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    num_qubits,
                });
            }
            if std::mem::replace(&mut seen[q], true) {
                return Err(Error::DuplicateQubit(q));
            }
        }
        Ok(Self {
            body,
            slots,
            num_qubits,
            slot_order,
            dense: OnceLock::new(),
            slot_major_transpose: OnceLock::new(),
        })
    }

    /// A dense Hermitian operator over the slots' qubits.
    pub fn dense(op: Operator, slots: Vec<Slot>) -> Result<Self> {
        let deviation = op.hermiticity_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let k = op.num_qubits();
        Self::with_body(Body::Dense(op), k, slots)
    }

    /// `scale · |pure⟩⟨pure| ⊗ (I/2)^{⊗mixed}`.
    pub fn pure_times_mixed(scale: f64, pure: Ket, mixed: usize, slots: Vec<Slot>) -> Result<Self> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::InvalidArgument(format!("scale {scale}")));
        }
        let k = pure.num_qubits() + mixed;
        Self::with_body(Body::PureTimesMixed { scale, pure, mixed }, k, slots)
    }

    /// `ρ ⊗ I` on `k` inputs and `k` outputs: with trivial output operations
    /// the process matrix reduces to the state `ρ`. Party `i` owns input
    /// qubit `i` and output qubit `k + i`.
    pub fn from_state(rho: &Operator) -> Result<Self> {
        let k = rho.num_qubits();
        let slots = (0..k)
            .map(|i| Slot {
                party: format!("party{i}"),
                role: Role::Other,
                input: i,
                output: k + i,
            })
            .collect();
        Self::dense(rho.tensor(&Operator::identity(k)), slots)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// The pure factor, for structured process matrices.
    pub fn pure_factor(&self) -> Option<(&Ket, f64, usize)> {
        match &self.body {
            Body::PureTimesMixed { scale, pure, mixed } => Some((pure, *scale, *mixed)),
            Body::Dense(_) => None,
        }
    }

    pub fn trace(&self) -> f64 {
        match &self.body {
            Body::Dense(op) => op.trace().re,
            Body::PureTimesMixed { scale, pure, .. } => scale * pure.norm_sqr(),
        }
    }

    /// Smallest eigenvalue. Structured matrices use the spectrum of the
    /// tensor factors; dense ones are diagonalized.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        match &self.body {
            Body::Dense(op) => op.min_eigenvalue(),
            Body::PureTimesMixed { scale, pure, mixed } => {
                let pure_spectrum = if pure.dim() > 1 {
                    vec![pure.norm_sqr(), 0.0]
                } else {
                    vec![pure.norm_sqr()]
                };
                let mixed_eigenvalue = 0.5f64.powi(*mixed as i32);
                // The extreme products of factor spectra are attained at
                // factor extremes.
                Ok(pure_spectrum
                    .into_iter()
                    .map(|p| scale * p * mixed_eigenvalue)
                    .fold(f64::INFINITY, f64::min))
            }
        }
    }

    /// Dense operator, materialized once. Fails above
    /// [`DENSE_BACKEND_MAX_QUBITS`] for structured matrices.
    pub fn dense_operator(&self) -> Result<&Operator> {
        if let Body::Dense(op) = &self.body {
            return Ok(op);
        }
        if self.num_qubits > DENSE_BACKEND_MAX_QUBITS {
            return Err(Error::SizeCap {
                needed: self.num_qubits,
                cap: DENSE_BACKEND_MAX_QUBITS,
            });
        }
        Ok(self.dense.get_or_init(|| match &self.body {
            Body::PureTimesMixed { scale, pure, mixed } => pure
                .projector()
                .scaled(*scale)
                .tensor(&Operator::identity(*mixed).scaled(0.5f64.powi(*mixed as i32))),
            Body::Dense(_) => unreachable!(),
        }))
    }

    fn slot_major_transpose(&self) -> Result<&Operator> {
        if let Some(op) = self.slot_major_transpose.get() {
            return Ok(op);
        }
        let permuted = self.dense_operator()?.permute_qubits(&self.slot_order)?;
        let transposed = Operator::from_matrix(permuted.matrix().transpose())?;
        Ok(self.slot_major_transpose.get_or_init(|| transposed))
    }

    fn check_assignment(&self, ops: &[&CjOperator]) -> Result<()> {
        if ops.len() != self.slots.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} operations for {} slots",
                ops.len(),
                self.slots.len()
            )));
        }
        for (slot, op) in self.slots.iter().zip(ops) {
            if op.in_count != 1 || op.out_count != 1 {
                return Err(Error::ShapeMismatch(format!(
                    "slot `{}` takes one input and one output qubit",
                    slot.party
                )));
            }
        }
        Ok(())
    }
}

/// Evaluation strategy for [`pm_evaluate`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Backend {
    /// Dense up to [`DENSE_BACKEND_MAX_QUBITS`], factorized above when
    /// possible.
    #[default]
    Auto,
    /// Full matrix trace.
    Dense,
    /// Pure-state overlap; needs a structured process matrix and
    /// measure-and-reprepare operators.
    Factorized,
}

/// A probability with the raw value it came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub probability: f64,
    pub raw: f64,
    pub clamped: bool,
}

fn dense_trace(w: &ProcessMatrix, ops: &[&CjOperator]) -> Result<num_complex::Complex64> {
    let w_t = w.slot_major_transpose()?;
    let owned: Vec<Operator> = ops.iter().map(|o| o.op.clone()).collect();
    let in_slot_order = kron_all(&owned)?;
    Ok(w_t
        .matrix()
        .iter()
        .zip(in_slot_order.matrix().iter())
        .map(|(a, b)| a * b)
        .sum())
}

fn factorized_trace(w: &ProcessMatrix, ops: &[&CjOperator]) -> Result<num_complex::Complex64> {
    let Body::PureTimesMixed { scale, pure, mixed } = &w.body else {
        return Err(Error::BackendUnavailable("process matrix is not pure ⊗ mixed"));
    };
    let mut kets: Vec<Option<&Ket>> = vec![None; w.num_qubits];
    for (slot, op) in w.slots.iter().zip(ops) {
        let (measure, reprepare) = op
            .factors()
            .ok_or(Error::BackendUnavailable("operation is not measure-and-reprepare"))?;
        kets[slot.input] = Some(measure);
        kets[slot.output] = Some(reprepare);
    }
    let kets: Vec<&Ket> = kets.into_iter().map(|k| k.expect("slots cover register")).collect();
    let k_pure = pure.num_qubits();
    let overlap = pure.product_overlap(&kets[..k_pure])?.norm_sqr();
    let mixed_weight: f64 = kets[k_pure..].iter().map(|k| k.norm_sqr() / 2.0).product();
    debug_assert_eq!(kets.len() - k_pure, *mixed);
    Ok(num_complex::Complex64::new(scale * overlap * mixed_weight, 0.0))
}

fn resolve_backend(w: &ProcessMatrix, ops: &[&CjOperator], backend: Backend) -> Backend {
    match backend {
        Backend::Auto => {
            let factorizable =
                matches!(w.body, Body::PureTimesMixed { .. }) && ops.iter().all(|o| o.factors.is_some());
            if factorizable && w.num_qubits > DENSE_BACKEND_MAX_QUBITS {
                Backend::Factorized
            } else {
                Backend::Dense
            }
        }
        b => b,
    }
}

/// `Tr[W · Π]` with `Π` the tensor product of `ops` (one per slot, in slot
/// order) placed on the slot qubits.
pub fn pm_evaluate(w: &ProcessMatrix, ops: &[&CjOperator], backend: Backend) -> Result<Evaluation> {
    w.check_assignment(ops)?;
    let value = match resolve_backend(w, ops, backend) {
        Backend::Factorized => factorized_trace(w, ops)?,
        _ => dense_trace(w, ops)?,
    };
    if value.im.abs() > CLAMP_TOL {
        return Err(Error::NonRealProbability(value.im));
    }
    let raw = value.re;
    if !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&raw) {
        return Err(Error::ProbabilityOutOfRange(raw));
    }
    let clamped = (-CLAMP_TOL..0.0).contains(&raw);
    Ok(Evaluation {
        probability: if clamped { 0.0 } else { raw },
        raw,
        clamped,
    })
}

/// Probability rule with operations keyed by party name.
pub fn pm_probability(w: &ProcessMatrix, assignment: &BTreeMap<String, CjOperator>) -> Result<f64> {
    let ops = w
        .slots
        .iter()
        .map(|s| {
            assignment
                .get(&s.party)
                .ok_or_else(|| Error::MissingSlot(s.party.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pm_evaluate(w, &ops, Backend::Auto)?.probability)
}

/// Joint outcome probabilities for one instrument per slot.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeTable {
    /// Indexed in mixed radix with slot 0 most significant.
    pub probabilities: Vec<f64>,
    pub clamped: usize,
}

/// Evaluates every joint outcome; parallel over outcomes.
pub fn enumerate_outcomes(
    w: &ProcessMatrix,
    instruments: &[Instrument],
    backend: Backend,
) -> Result<OutcomeTable> {
    if instruments.len() != w.slots.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} instruments for {} slots",
            instruments.len(),
            w.slots.len()
        )));
    }
    let radices: Vec<usize> = instruments.iter().map(|i| i.elements.len()).collect();
    let total: usize = radices.iter().product();
    let evals = (0..total)
        .into_par_iter()
        .map(|index| {
            let mut rest = index;
            let mut choice = vec![0; radices.len()];
            for (slot, &r) in radices.iter().enumerate().rev() {
                choice[slot] = rest % r;
                rest /= r;
            }
            let ops: Vec<&CjOperator> = instruments
                .iter()
                .zip(&choice)
                .map(|(inst, &a)| &inst.elements[a])
                .collect();
            pm_evaluate(w, &ops, backend)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OutcomeTable {
        clamped: evals.iter().filter(|e| e.clamped).count(),
        probabilities: evals.into_iter().map(|e| e.probability).collect(),
    })
}

/// `Tr[W (⊗_s Σ_a M_{s,a})]`, the total probability of deterministic maps.
pub fn deterministic_probability(w: &ProcessMatrix, instruments: &[Instrument]) -> Result<f64> {
    if w.num_qubits <= DENSE_BACKEND_MAX_QUBITS || matches!(w.body, Body::Dense(_)) {
        let summed: Vec<CjOperator> = instruments.iter().map(Instrument::summed).collect();
        let ops: Vec<&CjOperator> = summed.iter().collect();
        w.check_assignment(&ops)?;
        return Ok(dense_trace(w, &ops)?.re);
    }
    // By linearity, expand into rank-one terms.
    let table = enumerate_outcomes(w, instruments, Backend::Factorized)?;
    Ok(table.probabilities.iter().sum())
}

/// Draws one instrument per slot.
pub trait InstrumentFamily: Sync {
    fn name(&self) -> &str;
    fn sample(&self, slot: &Slot, rng: &mut ChaCha8Rng) -> Instrument;
}

/// Random equatorial measurements for Alices, computational ones for
/// everybody else.
#[derive(Clone, Copy, Debug, Default)]
pub struct MbqcFamily;

impl InstrumentFamily for MbqcFamily {
    fn name(&self) -> &str {
        "mbqc"
    }

    fn sample(&self, slot: &Slot, rng: &mut ChaCha8Rng) -> Instrument {
        match slot.role {
            Role::Alice => alice_instrument(rng.gen_range(0.0..std::f64::consts::TAU)),
            _ => bob_instrument(),
        }
    }
}

/// Haar-random single-qubit orthonormal basis.
pub fn random_basis<R: Rng + ?Sized>(rng: &mut R) -> QubitBasis {
    let theta = (1.0 - 2.0 * rng.gen::<f64>()).acos();
    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    let (s, c) = ((theta / 2.0).sin(), (theta / 2.0).cos());
    let k0 = Ket::new(vec![c.into(), num_complex::Complex64::from_polar(s, phi)]).expect("unit");
    let k1 = Ket::new(vec![
        num_complex::Complex64::from_polar(s, -phi) * -1.0,
        c.into(),
    ])
    .expect("unit");
    QubitBasis::new(k0, k1).expect("orthonormal")
}

/// Random rank-1 measure-and-reprepare instruments for Alices (random
/// measurement and repreparation bases), computational for the rest.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomRank1Family;

impl InstrumentFamily for RandomRank1Family {
    fn name(&self) -> &str {
        "random-rank1"
    }

    fn sample(&self, slot: &Slot, rng: &mut ChaCha8Rng) -> Instrument {
        match slot.role {
            Role::Alice => {
                let m = random_basis(rng);
                let r = random_basis(rng);
                Instrument::measure_reprepare(&m, &r, "random rank-1").expect("orthonormal")
            }
            _ => bob_instrument(),
        }
    }
}

/// Outcome of [`pm_validate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidityReport {
    pub family: String,
    pub min_eigenvalue: f64,
    pub positive: bool,
    pub trials: usize,
    pub worst_deviation: f64,
    /// Instrument descriptions of the worst trial, in slot order.
    pub worst_assignment: Vec<String>,
    pub passed: bool,
}

/// Checks positivity and, over `trials` sampled deterministic assignments,
/// unit total probability. Trial `t` draws from the stream
/// `split_seed(seed, t)`.
pub fn pm_validate(
    w: &ProcessMatrix,
    family: &dyn InstrumentFamily,
    trials: usize,
    tol: f64,
    seed: u64,
) -> Result<ValidityReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let min_eigenvalue = w.min_eigenvalue()?;
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, t as u64));
            let instruments: Vec<Instrument> =
                w.slots.iter().map(|s| family.sample(s, &mut rng)).collect();
            let total = deterministic_probability(w, &instruments)?;
            Ok(((total - 1.0).abs(), instruments))
        })
        .collect::<Result<Vec<_>>>()?;
    let (worst_deviation, worst) = outcomes
        .into_iter()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one trial");
    let positive = min_eigenvalue >= -tol;
    Ok(ValidityReport {
        family: family.name().to_owned(),
        min_eigenvalue,
        positive,
        trials,
        worst_deviation,
        worst_assignment: worst.iter().map(|i| i.description().to_owned()).collect(),
        passed: positive && worst_deviation <= tol,
    })
}
