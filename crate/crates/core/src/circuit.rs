//! Statevector simulator for parameterized circuits, the three ansatz
//! families, adjoint-method gradients and the Hadamard test.
//!
//! Qubit `q` of an `n`-qubit register is bit `n − 1 − q` of the basis index,
//! so qubit 0 is the leftmost (most significant) one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::inner;
use crate::pauli::PauliSum;
use crate::sparse::SparseOperator;
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Angle {
    Param(usize),
    Fixed(f64),
}

impl Angle {
    pub fn value(&self, params: &[f64]) -> f64 {
        match *self {
            Angle::Param(k) => params[k],
            Angle::Fixed(v) => v,
        }
    }

    pub fn slot(&self) -> Option<usize> {
        match *self {
            Angle::Param(k) => Some(k),
            Angle::Fixed(_) => None,
        }
    }

    fn bind(&self, params: &[f64]) -> Angle {
        Angle::Fixed(self.value(params))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    /// `exp(−iθσ^α/2)`.
    Rot { axis: Axis, q: usize, angle: Angle },
    H(usize),
    S(usize),
    X(usize),
    Y(usize),
    Z(usize),
    Cnot { control: usize, target: usize },
    /// `exp(i(θx XX + θy YY + θz ZZ))` on qubits `a`, `b`.
    NGate { a: usize, b: usize, angles: [Angle; 3] },
    /// `gate` applied only where qubit `control` equals `on`.
    Controlled { control: usize, on: bool, gate: Box<Gate> },
}

impl Gate {
    pub fn rx(q: usize, angle: Angle) -> Self {
        Gate::Rot { axis: Axis::X, q, angle }
    }

    pub fn ry(q: usize, angle: Angle) -> Self {
        Gate::Rot { axis: Axis::Y, q, angle }
    }

    pub fn rz(q: usize, angle: Angle) -> Self {
        Gate::Rot { axis: Axis::Z, q, angle }
    }

    /// `𝒩(θ, θ, θ)` with one shared parameter slot.
    pub fn tied_ngate(a: usize, b: usize, slot: usize) -> Self {
        Gate::NGate { a, b, angles: [Angle::Param(slot); 3] }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::Rot { q, .. } | Gate::H(q) | Gate::S(q) | Gate::X(q) | Gate::Y(q) | Gate::Z(q) => vec![*q],
            Gate::Cnot { control, target } => vec![*control, *target],
            Gate::NGate { a, b, .. } => vec![*a, *b],
            Gate::Controlled { control, gate, .. } => {
                let mut v = vec![*control];
                v.extend(gate.qubits());
                v
            }
        }
    }

    pub fn angles(&self) -> Vec<Angle> {
        match self {
            Gate::Rot { angle, .. } => vec![*angle],
            Gate::NGate { angles, .. } => angles.to_vec(),
            Gate::Controlled { gate, .. } => gate.angles(),
            _ => Vec::new(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Gate::Rot { axis: Axis::X, .. } => "rx".into(),
            Gate::Rot { axis: Axis::Y, .. } => "ry".into(),
            Gate::Rot { axis: Axis::Z, .. } => "rz".into(),
            Gate::H(_) => "h".into(),
            Gate::S(_) => "s".into(),
            Gate::X(_) => "x".into(),
            Gate::Y(_) => "y".into(),
            Gate::Z(_) => "z".into(),
            Gate::Cnot { .. } => "cnot".into(),
            Gate::NGate { .. } => "ngate".into(),
            Gate::Controlled { on: true, gate, .. } => format!("c1_{}", gate.name()),
            Gate::Controlled { on: false, gate, .. } => format!("c0_{}", gate.name()),
        }
    }

    /// Entangling two-qubit gates needed by the standard decomposition: one per
    /// CNOT, three per `𝒩`, two for a controlled single-qubit gate.
    pub fn cnot_count(&self) -> usize {
        match self {
            Gate::Cnot { .. } => 1,
            Gate::NGate { .. } => 3,
            Gate::Controlled { gate, .. } => match gate.as_ref() {
                Gate::X(_) | Gate::Y(_) | Gate::Z(_) => 1,
                g if g.qubits().len() == 1 => 2,
                g => 2 * g.cnot_count().max(1),
            },
            _ => 0,
        }
    }

    fn bind(&self, params: &[f64]) -> Gate {
        match self {
            Gate::Rot { axis, q, angle } => Gate::Rot { axis: *axis, q: *q, angle: angle.bind(params) },
            Gate::NGate { a, b, angles } => Gate::NGate { a: *a, b: *b, angles: angles.map(|x| x.bind(params)) },
            Gate::Controlled { control, on, gate } => {
                Gate::Controlled { control: *control, on: *on, gate: Box::new(gate.bind(params)) }
            }
            g => g.clone(),
        }
    }

    fn op(&self, params: &[f64]) -> Op {
        match self {
            Gate::Rot { axis, q, angle } => Op::one(*q, rotation(*axis, angle.value(params))),
            Gate::H(q) => {
                let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                Op::one(*q, [[h, h], [h, -h]])
            }
            Gate::S(q) => Op::one(*q, [[ONE, ZERO], [ZERO, I]]),
            Gate::X(q) => Op::one(*q, pauli_matrix(Axis::X)),
            Gate::Y(q) => Op::one(*q, pauli_matrix(Axis::Y)),
            Gate::Z(q) => Op::one(*q, pauli_matrix(Axis::Z)),
            Gate::Cnot { control, target } => {
                let mut m = [[ZERO; 4]; 4];
                m[0][0] = ONE;
                m[1][1] = ONE;
                m[2][3] = ONE;
                m[3][2] = ONE;
                Op::two(*control, *target, m)
            }
            Gate::NGate { a, b, angles } => {
                let [x, y, z] = angles.map(|t| t.value(params));
                Op::two(*a, *b, ngate_matrix(x, y, z))
            }
            Gate::Controlled { control, on, gate } => gate.op(params).controlled(*control, *on),
        }
    }

    /// Generators `G` with `∂U/∂θ_k = G U`, one per distinct parameter slot of
    /// the gate.
    fn generators(&self) -> Vec<(usize, Op)> {
        match self {
            Gate::Rot { axis, q, angle: Angle::Param(k) } => {
                let s = pauli_matrix(*axis);
                let h = C64::new(0.0, -0.5);
                vec![(*k, Op::one(*q, s.map(|r| r.map(|x| h * x))))]
            }
            Gate::NGate { a, b, angles } => {
                let mut slots: Vec<usize> = angles.iter().filter_map(|x| x.slot()).collect();
                slots.sort_unstable();
                slots.dedup();
                slots
                    .into_iter()
                    .map(|k| {
                        let mut m = [[ZERO; 4]; 4];
                        for (axis, angle) in [Axis::X, Axis::Y, Axis::Z].iter().zip(angles) {
                            if angle.slot() == Some(k) {
                                let pp = two_qubit_pauli(*axis);
                                for r in 0..4 {
                                    for c in 0..4 {
                                        m[r][c] += I * pp[r][c];
                                    }
                                }
                            }
                        }
                        (k, Op::two(*a, *b, m))
                    })
                    .collect()
            }
            Gate::Controlled { control, on, gate } => gate
                .generators()
                .into_iter()
                .map(|(k, op)| (k, op.controlled(*control, *on)))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Generators as weighted Pauli insertions `G = Σ c · P`, for circuits that
    /// can only apply unitaries (the Hadamard-test cross-check).
    pub fn pauli_generators(&self) -> Result<Vec<(usize, C64, Vec<Gate>)>> {
        let pauli_gate = |axis: Axis, q: usize| match axis {
            Axis::X => Gate::X(q),
            Axis::Y => Gate::Y(q),
            Axis::Z => Gate::Z(q),
        };
        match self {
            Gate::Rot { axis, q, angle: Angle::Param(k) } => {
                Ok(vec![(*k, C64::new(0.0, -0.5), vec![pauli_gate(*axis, *q)])])
            }
            Gate::NGate { a, b, angles } => Ok([Axis::X, Axis::Y, Axis::Z]
                .iter()
                .zip(angles)
                .filter_map(|(axis, angle)| {
                    angle.slot().map(|k| (k, I, vec![pauli_gate(*axis, *a), pauli_gate(*axis, *b)]))
                })
                .collect()),
            Gate::Controlled { .. } if !self.angles().iter().all(|a| a.slot().is_none()) => Err(
                Error::InvalidParameter("controlled parameterized gates have no unitary generator split".into()),
            ),
            _ => Ok(Vec::new()),
        }
    }
}

fn pauli_matrix(axis: Axis) -> [[C64; 2]; 2] {
    match axis {
        Axis::X => [[ZERO, ONE], [ONE, ZERO]],
        Axis::Y => [[ZERO, -I], [I, ZERO]],
        Axis::Z => [[ONE, ZERO], [ZERO, -ONE]],
    }
}

fn two_qubit_pauli(axis: Axis) -> [[C64; 4]; 4] {
    let p = pauli_matrix(axis);
    let mut m = [[ZERO; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            m[r][c] = p[r >> 1][c >> 1] * p[r & 1][c & 1];
        }
    }
    m
}

fn rotation(axis: Axis, theta: f64) -> [[C64; 2]; 2] {
    let (s, c) = (theta / 2.0).sin_cos();
    match axis {
        Axis::X => [[C64::new(c, 0.0), C64::new(0.0, -s)], [C64::new(0.0, -s), C64::new(c, 0.0)]],
        Axis::Y => [[C64::new(c, 0.0), C64::new(-s, 0.0)], [C64::new(s, 0.0), C64::new(c, 0.0)]],
        Axis::Z => [[C64::new(c, -s), ZERO], [ZERO, C64::new(c, s)]],
    }
}

/// `exp(i(x XX + y YY + z ZZ))` in closed form: the Bell states diagonalize
/// all three couplings at once.
pub fn ngate_matrix(x: f64, y: f64, z: f64) -> [[C64; 4]; 4] {
    let phi_p = C64::from_polar(1.0, x - y + z);
    let phi_m = C64::from_polar(1.0, -x + y + z);
    let psi_p = C64::from_polar(1.0, x + y - z);
    let psi_m = C64::from_polar(1.0, -(x + y + z));
    let mut m = [[ZERO; 4]; 4];
    m[0][0] = (phi_p + phi_m) * 0.5;
    m[3][3] = m[0][0];
    m[0][3] = (phi_p - phi_m) * 0.5;
    m[3][0] = m[0][3];
    m[1][1] = (psi_p + psi_m) * 0.5;
    m[2][2] = m[1][1];
    m[1][2] = (psi_p - psi_m) * 0.5;
    m[2][1] = m[1][2];
    m
}

#[derive(Clone, Debug)]
enum Local {
    One { q: usize, m: [[C64; 2]; 2] },
    Two { a: usize, b: usize, m: [[C64; 4]; 4] },
}

/// A local matrix with an optional control condition.
#[derive(Clone, Debug)]
struct Op {
    local: Local,
    control: Option<(usize, bool)>,
}

impl Op {
    fn one(q: usize, m: [[C64; 2]; 2]) -> Self {
        Op { local: Local::One { q, m }, control: None }
    }

    fn two(a: usize, b: usize, m: [[C64; 4]; 4]) -> Self {
        Op { local: Local::Two { a, b, m }, control: None }
    }

    fn controlled(mut self, control: usize, on: bool) -> Self {
        assert!(self.control.is_none(), "nested controls are not supported");
        self.control = Some((control, on));
        self
    }

    fn adjoint(&self) -> Self {
        let local = match &self.local {
            Local::One { q, m } => {
                let mut a = [[ZERO; 2]; 2];
                for r in 0..2 {
                    for c in 0..2 {
                        a[r][c] = m[c][r].conj();
                    }
                }
                Local::One { q: *q, m: a }
            }
            Local::Two { a: qa, b: qb, m } => {
                let mut a = [[ZERO; 4]; 4];
                for r in 0..4 {
                    for c in 0..4 {
                        a[r][c] = m[c][r].conj();
                    }
                }
                Local::Two { a: *qa, b: *qb, m: a }
            }
        };
        Op { local, control: self.control }
    }

    /// Applies the operator in place. With `project`, amplitudes outside the
    /// control branch are zeroed instead of left alone (generator insertion).
    fn apply(&self, state: &mut [C64], n: usize, project: bool) {
        let bit = |q: usize| 1usize << (n - 1 - q);
        let (cmask, cval) = match self.control {
            Some((c, on)) => (bit(c), if on { bit(c) } else { 0 }),
            None => (0, 0),
        };
        match &self.local {
            Local::One { q, m } => {
                let s = bit(*q);
                for i in 0..state.len() {
                    if i & s != 0 {
                        continue;
                    }
                    if i & cmask != cval {
                        if project {
                            state[i] = ZERO;
                            state[i | s] = ZERO;
                        }
                        continue;
                    }
                    let (x0, x1) = (state[i], state[i | s]);
                    state[i] = m[0][0] * x0 + m[0][1] * x1;
                    state[i | s] = m[1][0] * x0 + m[1][1] * x1;
                }
            }
            Local::Two { a, b, m } => {
                let (sa, sb) = (bit(*a), bit(*b));
                for i in 0..state.len() {
                    if i & (sa | sb) != 0 {
                        continue;
                    }
                    let idx = [i, i | sb, i | sa, i | sa | sb];
                    if i & cmask != cval {
                        if project {
                            idx.iter().for_each(|&k| state[k] = ZERO);
                        }
                        continue;
                    }
                    let x = idx.map(|k| state[k]);
                    for (r, &k) in idx.iter().enumerate() {
                        state[k] = m[r][0] * x[0] + m[r][1] * x[1] + m[r][2] * x[2] + m[r][3] * x[3];
                    }
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzKind {
    HardwareEfficient,
    SzConserving,
    TotalSpin,
}

impl AnsatzKind {
    /// Whether the circuit is the identity at zero parameters.
    pub fn identity_at_zero(&self) -> bool {
        !matches!(self, AnsatzKind::HardwareEfficient)
    }
}

impl std::fmt::Display for AnsatzKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AnsatzKind::HardwareEfficient => "hardware_efficient",
            AnsatzKind::SzConserving => "sz_conserving",
            AnsatzKind::TotalSpin => "total_spin",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub kind: String,
    pub targets: Vec<usize>,
    pub param_slots: Vec<Option<usize>>,
    pub fixed_angles: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    n_params: usize,
    kind: Option<AnsatzKind>,
    layers: usize,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, gates: Vec::new(), n_params: 0, kind: None, layers: 0 }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn kind(&self) -> Option<AnsatzKind> {
        self.kind
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        let qubits = gate.qubits();
        if let Some(&bad) = qubits.iter().find(|&&q| q >= self.n_qubits) {
            return Err(Error::InvalidParameter(format!("qubit {bad} outside a {}-qubit register", self.n_qubits)));
        }
        let mut sorted = qubits.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != qubits.len() {
            return Err(Error::InvalidParameter(format!("gate {} repeats a qubit: {qubits:?}", gate.name())));
        }
        if let Gate::Controlled { gate: inner, .. } = &gate {
            if matches!(inner.as_ref(), Gate::Controlled { .. }) {
                return Err(Error::InvalidParameter("nested controls are not supported".into()));
            }
        }
        for a in gate.angles() {
            if let Some(k) = a.slot() {
                self.n_params = self.n_params.max(k + 1);
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    /// Checks that every parameter slot below `n_params` drives some gate.
    pub fn validate(&self) -> Result<()> {
        let mut used = vec![false; self.n_params];
        for g in &self.gates {
            for a in g.angles() {
                if let Some(k) = a.slot() {
                    used[k] = true;
                }
            }
        }
        match used.iter().position(|u| !u) {
            Some(k) => Err(Error::InvalidParameter(format!("parameter slot {k} drives no gate"))),
            None => Ok(()),
        }
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().map(Gate::cnot_count).sum()
    }

    /// Copy with every parameterized angle replaced by its current value.
    pub fn bind(&self, params: &[f64]) -> Result<Circuit> {
        self.check_params(params)?;
        Ok(Circuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().map(|g| g.bind(params)).collect(),
            n_params: 0,
            kind: self.kind,
            layers: self.layers,
        })
    }

    /// The same gates on a register widened by `shift` leading qubits.
    pub fn shifted(&self, shift: usize) -> Circuit {
        fn shift_gate(g: &Gate, s: usize) -> Gate {
            match g {
                Gate::Rot { axis, q, angle } => Gate::Rot { axis: *axis, q: q + s, angle: *angle },
                Gate::H(q) => Gate::H(q + s),
                Gate::S(q) => Gate::S(q + s),
                Gate::X(q) => Gate::X(q + s),
                Gate::Y(q) => Gate::Y(q + s),
                Gate::Z(q) => Gate::Z(q + s),
                Gate::Cnot { control, target } => Gate::Cnot { control: control + s, target: target + s },
                Gate::NGate { a, b, angles } => Gate::NGate { a: a + s, b: b + s, angles: *angles },
                Gate::Controlled { control, on, gate } => {
                    Gate::Controlled { control: control + s, on: *on, gate: Box::new(shift_gate(gate, s)) }
                }
            }
        }
        Circuit {
            n_qubits: self.n_qubits + shift,
            gates: self.gates.iter().map(|g| shift_gate(g, shift)).collect(),
            n_params: self.n_params,
            kind: self.kind,
            layers: self.layers,
        }
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params {
            return Err(Error::Dimension { expected: self.n_params, got: params.len() });
        }
        Ok(())
    }

    fn check_state(&self, state: &[C64]) -> Result<()> {
        let dim = 1usize << self.n_qubits;
        if state.len() != dim {
            return Err(Error::Dimension { expected: dim, got: state.len() });
        }
        Ok(())
    }

    /// Applies one gate in place.
    pub fn apply_gate(&self, state: &mut [C64], gate: &Gate, params: &[f64]) -> Result<()> {
        self.check_state(state)?;
        gate.op(params).apply(state, self.n_qubits, false);
        Ok(())
    }

    /// `U(θ)|ψ₀⟩`.
    pub fn run(&self, params: &[f64], initial: &[C64]) -> Result<Vec<C64>> {
        self.check_params(params)?;
        self.check_state(initial)?;
        let mut state = initial.to_vec();
        for g in &self.gates {
            g.op(params).apply(&mut state, self.n_qubits, false);
        }
        Ok(state)
    }

    /// `⟨ψ(θ)|O|ψ(θ)⟩` and its gradient, by one forward and one backward sweep.
    pub fn expectation_and_gradient(
        &self,
        params: &[f64],
        observable: &SparseOperator,
        initial: &[C64],
    ) -> Result<(f64, Vec<f64>)> {
        let mut phi = self.run(params, initial)?;
        let mut lambda = observable.apply(&phi)?;
        let value = inner(&phi, &lambda).re;
        let mut grad = vec![0.0; self.n_params];
        let mut scratch = vec![ZERO; phi.len()];
        for g in self.gates.iter().rev() {
            for (k, gen) in g.generators() {
                scratch.copy_from_slice(&phi);
                gen.apply(&mut scratch, self.n_qubits, true);
                grad[k] += 2.0 * inner(&lambda, &scratch).re;
            }
            let inv = g.op(params).adjoint();
            inv.apply(&mut phi, self.n_qubits, false);
            inv.apply(&mut lambda, self.n_qubits, false);
        }
        Ok((value, grad))
    }

    pub fn gradient(&self, params: &[f64], observable: &PauliSum, initial: &[C64]) -> Result<Vec<f64>> {
        if observable.width() != self.n_qubits {
            return Err(Error::WidthMismatch { left: observable.width(), right: self.n_qubits });
        }
        let op = SparseOperator::from_pauli_sum(observable);
        Ok(self.expectation_and_gradient(params, &op, initial)?.1)
    }

    /// `∂|ψ(θ)⟩/∂θ_k`: the generator inserted after every gate driven by slot
    /// `k`, summed.
    pub fn derivative_state(&self, params: &[f64], k: usize, initial: &[C64]) -> Result<Vec<C64>> {
        if k >= self.n_params {
            return Err(Error::InvalidParameter(format!("slot {k} of {} parameters", self.n_params)));
        }
        self.check_params(params)?;
        self.check_state(initial)?;
        let mut psi = initial.to_vec();
        let mut acc = vec![ZERO; psi.len()];
        let mut scratch = vec![ZERO; psi.len()];
        for g in &self.gates {
            let op = g.op(params);
            op.apply(&mut psi, self.n_qubits, false);
            op.apply(&mut acc, self.n_qubits, false);
            for (slot, gen) in g.generators() {
                if slot == k {
                    scratch.copy_from_slice(&psi);
                    gen.apply(&mut scratch, self.n_qubits, true);
                    acc.iter_mut().zip(&scratch).for_each(|(a, s)| *a += s);
                }
            }
        }
        Ok(acc)
    }

    /// The state and all derivative states, computed in parallel over slots.
    pub fn derivative_states(&self, params: &[f64], initial: &[C64]) -> Result<(Vec<C64>, Vec<Vec<C64>>)> {
        let psi = self.run(params, initial)?;
        let derivs = (0..self.n_params)
            .into_par_iter()
            .map(|k| self.derivative_state(params, k, initial))
            .collect::<Result<Vec<_>>>()?;
        Ok((psi, derivs))
    }

    pub fn to_records(&self) -> Vec<GateRecord> {
        self.gates
            .iter()
            .map(|g| {
                let angles = g.angles();
                GateRecord {
                    kind: g.name(),
                    targets: g.qubits(),
                    param_slots: angles.iter().map(Angle::slot).collect(),
                    fixed_angles: angles
                        .iter()
                        .map(|a| match a {
                            Angle::Fixed(v) => Some(*v),
                            Angle::Param(_) => None,
                        })
                        .collect(),
                }
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_records()).expect("gate records serialize")
    }
}

/// Adds one shared-angle `𝒩` per pair of a brick layer: pairs starting at
/// even qubits first, then pairs starting at odd qubits.
fn push_brick(c: &mut Circuit, next: &mut usize) -> Result<()> {
    let n = c.n_qubits;
    for start in [0, 1] {
        let mut q = start;
        while q + 1 < n {
            c.push(Gate::tied_ngate(q, q + 1, *next))?;
            *next += 1;
            q += 2;
        }
    }
    Ok(())
}

fn push_rotation_column(c: &mut Circuit, next: &mut usize) -> Result<()> {
    for q in 0..c.n_qubits {
        c.push(Gate::ry(q, Angle::Param(*next)))?;
        c.push(Gate::rz(q, Angle::Param(*next + 1)))?;
        *next += 2;
    }
    Ok(())
}

/// Builds one of the ansatz families.
///
/// * `HardwareEfficient`: an Ry·Rz column, then per layer a CNOT ladder
///   `(q, q+1)` followed by another Ry·Rz column; `2n(L+1)` parameters.
/// * `SzConserving`: per layer one Rz per qubit, then a brick of shared-angle
///   `𝒩` gates.
/// * `TotalSpin`: per layer a brick of shared-angle `𝒩` gates only.
pub fn build_ansatz(kind: AnsatzKind, n_qubits: usize, layers: usize) -> Result<Circuit> {
    if n_qubits == 0 {
        return Err(Error::InvalidParameter("ansatz needs at least one qubit".into()));
    }
    let mut c = Circuit::new(n_qubits);
    let mut next = 0;
    match kind {
        AnsatzKind::HardwareEfficient => {
            push_rotation_column(&mut c, &mut next)?;
            for _ in 0..layers {
                for q in 0..n_qubits - 1 {
                    c.push(Gate::Cnot { control: q, target: q + 1 })?;
                }
                push_rotation_column(&mut c, &mut next)?;
            }
        }
        AnsatzKind::SzConserving => {
            for _ in 0..layers {
                for q in 0..n_qubits {
                    c.push(Gate::rz(q, Angle::Param(next)))?;
                    next += 1;
                }
                push_brick(&mut c, &mut next)?;
            }
        }
        AnsatzKind::TotalSpin => {
            for _ in 0..layers {
                push_brick(&mut c, &mut next)?;
            }
        }
    }
    c.kind = Some(kind);
    c.layers = layers;
    c.validate()?;
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HadamardMode {
    Real,
    Imag,
}

/// `⟨ψ|U_i† U_j|ψ⟩` by direct simulation.
pub fn transition_amplitude(u_i: &Circuit, u_j: &Circuit, state: &[C64]) -> Result<C64> {
    let a = u_i.run(&[], state)?;
    let b = u_j.run(&[], state)?;
    Ok(inner(&a, &b))
}

/// Probability of reading the ancilla in `|0⟩` after the Hadamard test of
/// `U_i† U_j` on `|ψ⟩`: `(1 + Re⟨ψ|U_i†U_j|ψ⟩)/2`, or the imaginary part with
/// the phase gate before the closing Hadamard.
///
/// The ancilla is qubit 0 of an explicitly simulated `(n + 1)`-qubit register.
/// `U_j` runs on the ancilla's `|0⟩` branch and `U_i` on its `|1⟩` branch.
/// Both circuits must be fully bound (no free parameters).
pub fn hadamard_test(u_i: &Circuit, u_j: &Circuit, state: &[C64], mode: HadamardMode) -> Result<f64> {
    if u_i.n_qubits() != u_j.n_qubits() {
        return Err(Error::WidthMismatch { left: u_i.n_qubits(), right: u_j.n_qubits() });
    }
    if u_i.n_params() != 0 || u_j.n_params() != 0 {
        return Err(Error::InvalidParameter("Hadamard test needs bound circuits".into()));
    }
    let n = u_i.n_qubits();
    u_i.check_state(state)?;
    let mut full = Circuit::new(n + 1);
    full.push(Gate::H(0))?;
    for (circuit, on) in [(u_j, false), (u_i, true)] {
        for g in circuit.shifted(1).gates {
            full.push(Gate::Controlled { control: 0, on, gate: Box::new(g) })?;
        }
    }
    if mode == HadamardMode::Imag {
        full.push(Gate::S(0))?;
    }
    full.push(Gate::H(0))?;
    let mut reg = vec![ZERO; 2 * state.len()];
    reg[..state.len()].copy_from_slice(state);
    let out = full.run(&[], &reg)?;
    Ok(out[..state.len()].iter().map(|a| a.norm_sqr()).sum())
}
