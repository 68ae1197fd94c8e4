//! McLachlan variational time evolution.
//!
//! Parameters follow `A^R θ̇ = C^I` with `A_ij = ⟨∂_iψ|∂_jψ⟩` and
//! `C_i = ⟨∂_iψ|H|ψ⟩`, integrated by forward Euler. The exact propagator of
//! the encoded Hamiltonian provides the reference trajectory.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_ansatz, hadamard_test, AnsatzKind, Circuit, Gate, HadamardMode};
use crate::encoding::{Encoder, EncodingKind};
use crate::error::{Error, Result};
use crate::linalg::inner;
use crate::models::{ModelDescriptor, QuditModel};
use crate::oracle::Spectrum;
use crate::pauli::{Pauli, PauliSum};
use crate::sparse::SparseOperator;
use crate::vqe::{tracked_operator, InitialState};
use crate::C64;

/// Largest regularization the step solver escalates to.
pub const MAX_LAMBDA: f64 = 1e-2;
/// Slack allowed below zero in the smallest eigenvalue of `A^R`.
pub const PSD_TOL: f64 = 1e-10;

fn default_dt() -> f64 {
    0.01
}
fn default_lambda() -> f64 {
    1e-6
}
fn default_fidelity_target() -> f64 {
    0.95
}
fn default_initial_state() -> String {
    "zeros".into()
}

/// Starting point of the parameter trajectory. Every choice must leave the
/// initial state unchanged.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamInit {
    #[default]
    Zeros,
    Values(Vec<f64>),
    /// Random angles arranged so the circuit multiplies to the identity; see
    /// [`mirrored_params`].
    Mirrored { seed: u64, width: f64 },
}

/// Parameters at which a total-spin brick circuit is exactly the identity
/// while its tangent space is generic.
///
/// The layers alternate blocks of commuting gates, even pairs then odd pairs.
/// Dropping the last odd block leaves an odd-length sequence whose gates
/// mirror around the centre block; the centre is set to zero and each block
/// after it undoes its mirror image, drawn uniformly from `±width`.
///
/// At all-zero parameters the tangent space of a basis initial state is
/// nearly empty (pair gates only add phases), so McLachlan dynamics can stall
/// at a stationary point that exact evolution leaves at second order.
pub fn mirrored_params(kind: AnsatzKind, n_qubits: usize, layers: usize, seed: u64, width: f64) -> Result<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    if kind != AnsatzKind::TotalSpin {
        return Err(Error::InvalidParameter(format!("mirrored parameters need the total_spin ansatz, not {kind}")));
    }
    if layers == 0 || n_qubits < 2 || !(width >= 0.0) {
        return Err(Error::InvalidParameter("mirrored parameters need a non-empty brick".into()));
    }
    let sizes = [n_qubits / 2, (n_qubits - 1) / 2];
    let mut blocks: Vec<Vec<f64>> = (0..2 * layers).map(|b| vec![0.0; sizes[b % 2]]).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let last = 2 * layers - 2;
    for k in 0..layers - 1 {
        let v: Vec<f64> = (0..blocks[k].len()).map(|_| rng.gen_range(-width..=width)).collect();
        blocks[last - k] = v.iter().map(|x| -x).collect();
        blocks[k] = v;
    }
    Ok(blocks.concat())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VteConfig {
    pub model: ModelDescriptor,
    pub encoding: EncodingKind,
    pub ansatz: AnsatzKind,
    pub layers: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub t_total: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub initial_params: ParamInit,
    #[serde(default = "default_initial_state")]
    pub initial_state: String,
    /// Qudit product states whose populations are recorded, as level lists.
    #[serde(default)]
    pub references: Vec<Vec<usize>>,
    /// Observables recorded at every time (same names as the VQE `track`).
    #[serde(default)]
    pub track: Vec<String>,
    /// Re-derive `A` and `C` from Hadamard-test circuits at every step and
    /// fail if they disagree with the direct computation.
    #[serde(default)]
    pub cross_check: bool,
    /// Project the parameter-dependent global phase out of `A` and `C`.
    #[serde(default)]
    pub phase_correction: bool,
    /// A run counts as converged when its fidelity with the exact state never
    /// drops below this.
    #[serde(default = "default_fidelity_target")]
    pub fidelity_target: f64,
}

impl VteConfig {
    pub fn new(model: ModelDescriptor, encoding: EncodingKind, ansatz: AnsatzKind, layers: usize, t_total: f64) -> Self {
        Self {
            model,
            encoding,
            ansatz,
            layers,
            dt: default_dt(),
            t_total,
            lambda: default_lambda(),
            initial_params: ParamInit::Zeros,
            initial_state: default_initial_state(),
            references: Vec::new(),
            track: Vec::new(),
            cross_check: false,
            phase_correction: false,
            fidelity_target: default_fidelity_target(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_total >= 0.0) {
            return Err(Error::InvalidParameter(format!("t_total must be non-negative, got {}", self.t_total)));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        self.initial_state.parse::<InitialState>()?;
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_total / self.dt).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VteTrajectory {
    pub config: VteConfig,
    pub n_qubits: usize,
    pub n_params: usize,
    pub cnot_count: usize,
    pub times: Vec<f64>,
    pub params: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    /// Fidelity with the exactly evolved state.
    pub fidelity: Vec<f64>,
    pub tracked: Vec<String>,
    /// `[time][observable]`.
    pub observables: Vec<Vec<f64>>,
    /// Labels of the reference product states, e.g. `"0,2"`.
    pub reference_labels: Vec<String>,
    /// `[time][reference]` populations of the variational state.
    pub populations: Vec<Vec<f64>>,
    /// The same populations for the exact state.
    pub exact_populations: Vec<Vec<f64>>,
    /// Smallest eigenvalue of `A^R` at every step.
    pub min_eigenvalue_a: Vec<f64>,
    /// Regularization actually used at every step.
    pub lambda_used: Vec<f64>,
    pub converged: bool,
}

impl VteTrajectory {
    pub fn min_fidelity(&self) -> f64 {
        self.fidelity.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Largest deviation between variational and exact population of
    /// reference `r` over the whole trajectory.
    pub fn max_population_error(&self, r: usize) -> f64 {
        self.populations
            .iter()
            .zip(&self.exact_populations)
            .map(|(v, e)| (v[r] - e[r]).abs())
            .fold(0.0, f64::max)
    }
}

/// `A^R`, `C` and the state at one parameter point.
#[derive(Clone, Debug)]
pub struct Tangent {
    pub state: Vec<C64>,
    pub a: DMatrix<f64>,
    pub c: Vec<C64>,
    /// `⟨∂_iψ|ψ⟩`.
    pub overlap: Vec<C64>,
    pub energy: f64,
}

/// Assembles `A^R_ij = Re⟨∂_iψ|∂_jψ⟩` and `C_i = ⟨∂_iψ|H|ψ⟩` from exact
/// derivative states.
pub fn tangent(circuit: &Circuit, params: &[f64], h: &SparseOperator, initial: &[C64]) -> Result<Tangent> {
    let (state, derivs) = circuit.derivative_states(params, initial)?;
    let h_psi = h.apply(&state)?;
    let n = derivs.len();
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| (0..=j).map(|i| inner(&derivs[i], &derivs[j]).re).collect())
        .collect();
    let a = DMatrix::from_fn(n, n, |i, j| if i <= j { columns[j][i] } else { columns[i][j] });
    let c = derivs.iter().map(|d| inner(d, &h_psi)).collect();
    let overlap = derivs.iter().map(|d| inner(d, &state)).collect();
    let energy = inner(&state, &h_psi).re;
    Ok(Tangent { state, a, c, overlap, energy })
}

impl Tangent {
    /// `A^R` and `C^I` of the derivative states with their component along
    /// `|ψ⟩` (a global phase change) projected out.
    pub fn phase_corrected(&self) -> (DMatrix<f64>, Vec<f64>) {
        let g = &self.overlap;
        let n = g.len();
        let a = DMatrix::from_fn(n, n, |i, j| self.a[(i, j)] - (g[i] * g[j].conj()).re);
        let c = self.c.iter().zip(g).map(|(c, gi)| (c - gi * self.energy).im).collect();
        (a, c)
    }
}

pub fn assemble_a(circuit: &Circuit, params: &[f64], initial: &[C64]) -> Result<DMatrix<f64>> {
    let zero = SparseOperator::zero(initial.len());
    Ok(tangent(circuit, params, &zero, initial)?.a)
}

pub fn assemble_c(circuit: &Circuit, params: &[f64], h: &PauliSum, initial: &[C64]) -> Result<Vec<C64>> {
    if h.width() != circuit.n_qubits() {
        return Err(Error::WidthMismatch { left: h.width(), right: circuit.n_qubits() });
    }
    Ok(tangent(circuit, params, &SparseOperator::from_pauli_sum(h), initial)?.c)
}

/// Bound copies of `circuit` with one generator Pauli inserted after the gate
/// it belongs to: `∂_k|ψ⟩ = Σ c · V|ψ₀⟩` over the entries with slot `k`.
fn generator_insertions(circuit: &Circuit, params: &[f64]) -> Result<Vec<(usize, C64, Circuit)>> {
    let bound = circuit.bind(params)?;
    let mut out = Vec::new();
    for (g, gate) in circuit.gates().iter().enumerate() {
        for (slot, coeff, paulis) in gate.pauli_generators()? {
            let mut v = Circuit::new(circuit.n_qubits());
            for (h, b) in bound.gates().iter().enumerate() {
                v.push(b.clone())?;
                if h == g {
                    for p in &paulis {
                        v.push(p.clone())?;
                    }
                }
            }
            out.push((slot, coeff, v));
        }
    }
    Ok(out)
}

/// `⟨ψ|U_i†U_j|ψ⟩` from the two Hadamard-test probabilities.
fn measured_amplitude(u_i: &Circuit, u_j: &Circuit, state: &[C64]) -> Result<C64> {
    let re = 2.0 * hadamard_test(u_i, u_j, state, HadamardMode::Real)? - 1.0;
    let im = 2.0 * hadamard_test(u_i, u_j, state, HadamardMode::Imag)? - 1.0;
    Ok(C64::new(re, im))
}

/// `A^R` and `C` assembled from ancilla Hadamard tests, the way a device
/// would estimate them. Much slower than [`tangent`]; used as a cross-check.
pub fn hadamard_tangent(
    circuit: &Circuit,
    params: &[f64],
    h: &PauliSum,
    initial: &[C64],
) -> Result<(DMatrix<f64>, Vec<C64>)> {
    let n = circuit.n_params();
    let insertions = generator_insertions(circuit, params)?;
    let pairs: Vec<(usize, usize)> =
        (0..insertions.len()).flat_map(|m| (m..insertions.len()).map(move |k| (m, k))).collect();
    let amps = pairs
        .par_iter()
        .map(|&(m, k)| measured_amplitude(&insertions[m].2, &insertions[k].2, initial))
        .collect::<Result<Vec<_>>>()?;
    let mut a = DMatrix::zeros(n, n);
    for (&(m, k), amp) in pairs.iter().zip(&amps) {
        let (sm, cm, _) = &insertions[m];
        let (sk, ck, _) = &insertions[k];
        let v = (cm.conj() * ck * amp).re;
        a[(*sm, *sk)] += v;
        if m != k {
            a[(*sk, *sm)] += v;
        }
    }

    let bound = circuit.bind(params)?;
    let mut measured = Vec::new();
    for (p, coeff) in h.iter() {
        let mut u = bound.clone();
        for (q, letter) in p.letters().into_iter().enumerate() {
            match letter {
                Pauli::I => {}
                Pauli::X => u.push(Gate::X(q))?,
                Pauli::Y => u.push(Gate::Y(q))?,
                Pauli::Z => u.push(Gate::Z(q))?,
            }
        }
        measured.push((*coeff, u));
    }
    let terms = insertions
        .par_iter()
        .map(|(slot, cm, v)| {
            let mut acc = C64::default();
            for (coeff, u) in &measured {
                acc += cm.conj() * coeff * measured_amplitude(v, u, initial)?;
            }
            Ok((*slot, acc))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut c = vec![C64::default(); n];
    for (slot, v) in terms {
        c[slot] += v;
    }
    Ok((a, c))
}

/// Checks `A^R` is symmetric and positive semidefinite; returns its smallest
/// eigenvalue.
pub fn check_metric(a: &DMatrix<f64>) -> Result<f64> {
    let asym = (a - a.transpose()).abs().max();
    if asym > 1e-12 {
        return Err(Error::InvalidParameter(format!("A^R asymmetric by {asym:e}")));
    }
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let min = a.clone().symmetric_eigenvalues().min();
    if min < -PSD_TOL {
        return Err(Error::InvalidParameter(format!("A^R has negative eigenvalue {min:e}")));
    }
    Ok(min)
}

/// One Euler step: solves `(A^R + λ𝕀) θ̇ = C^I` by Cholesky and returns
/// `(θ + δt θ̇, λ used)`. A failed factorization retries with `λ` raised ten-
/// fold, up to [`MAX_LAMBDA`].
pub fn step(params: &[f64], a: &DMatrix<f64>, c_imag: &[f64], dt: f64, lambda: f64) -> Result<(Vec<f64>, f64)> {
    let n = params.len();
    if a.nrows() != n || a.ncols() != n || c_imag.len() != n {
        return Err(Error::Dimension { expected: n, got: c_imag.len() });
    }
    let rhs = DVector::from_column_slice(c_imag);
    let mut lam = lambda;
    loop {
        let reg = a + DMatrix::identity(n, n) * lam;
        if let Some(chol) = reg.cholesky() {
            let rate = chol.solve(&rhs);
            let next = params.iter().zip(rate.iter()).map(|(p, r)| p + dt * r).collect();
            return Ok((next, lam));
        }
        if lam >= MAX_LAMBDA {
            return Err(Error::Factorization(format!("A^R + λI not positive definite at λ = {lam:e}")));
        }
        lam = (lam.max(1e-12) * 10.0).min(MAX_LAMBDA);
    }
}

/// A compiled VTE problem.
pub struct VteProblem {
    pub config: VteConfig,
    pub model: QuditModel,
    pub encoder: Encoder,
    pub circuit: Circuit,
    pub hamiltonian: PauliSum,
    pub initial_state: Vec<C64>,
    pub initial_params: Vec<f64>,
    h_op: SparseOperator,
    tracked_ops: Vec<SparseOperator>,
    references: Vec<Vec<C64>>,
}

impl VteProblem {
    pub fn new(config: &VteConfig) -> Result<Self> {
        config.validate()?;
        let model = config.model.build()?;
        let encoder = Encoder::new(config.encoding, model.d)?;
        let hamiltonian = encoder.encode_hamiltonian(&model)?;
        let n_qubits = model.n_sites * encoder.qubits_per_site();
        let circuit = build_ansatz(config.ansatz, n_qubits, config.layers)?;
        let initial_state = config.initial_state.parse::<InitialState>()?.prepare(n_qubits, &encoder)?;
        let params = match &config.initial_params {
            ParamInit::Zeros => vec![0.0; circuit.n_params()],
            ParamInit::Values(p) if p.len() != circuit.n_params() => {
                return Err(Error::Dimension { expected: circuit.n_params(), got: p.len() })
            }
            ParamInit::Values(p) => p.clone(),
            ParamInit::Mirrored { seed, width } => {
                mirrored_params(config.ansatz, n_qubits, config.layers, *seed, *width)?
            }
        };
        let start = circuit.run(&params, &initial_state)?;
        let drift = start.iter().zip(&initial_state).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if drift > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "the ansatz at the initial parameters moves the initial state (by {drift:e})"
            )));
        }
        let tracked_ops = config
            .track
            .iter()
            .map(|name| tracked_operator(name, &model, &encoder, n_qubits))
            .collect::<Result<Vec<_>>>()?;
        let references = config
            .references
            .iter()
            .map(|levels| encoder.encode_product_state(levels))
            .collect::<Result<Vec<_>>>()?;
        let h_op = SparseOperator::from_pauli_sum(&hamiltonian);
        Ok(Self {
            config: config.clone(),
            model,
            encoder,
            circuit,
            hamiltonian,
            initial_state,
            initial_params: params,
            h_op,
            tracked_ops,
            references,
        })
    }

    pub fn run(&self) -> Result<VteTrajectory> {
        let cfg = &self.config;
        let spectrum = Spectrum::of(&self.h_op)?;
        let populations = |state: &[C64]| -> Vec<f64> {
            self.references.iter().map(|r| inner(r, state).norm_sqr()).collect()
        };
        let mut traj = VteTrajectory {
            config: cfg.clone(),
            n_qubits: self.circuit.n_qubits(),
            n_params: self.circuit.n_params(),
            cnot_count: self.circuit.cnot_count(),
            times: Vec::new(),
            params: Vec::new(),
            energy: Vec::new(),
            fidelity: Vec::new(),
            tracked: cfg.track.clone(),
            observables: Vec::new(),
            reference_labels: cfg
                .references
                .iter()
                .map(|l| l.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
                .collect(),
            populations: Vec::new(),
            exact_populations: Vec::new(),
            min_eigenvalue_a: Vec::new(),
            lambda_used: Vec::new(),
            converged: false,
        };

        let mut params = self.initial_params.clone();
        let n_steps = cfg.n_steps();
        for s in 0..=n_steps {
            let t = s as f64 * cfg.dt;
            let tan = tangent(&self.circuit, &params, &self.h_op, &self.initial_state)?;
            let exact = spectrum.evolve(&self.initial_state, t)?;
            traj.times.push(t);
            traj.params.push(params.clone());
            traj.energy.push(self.h_op.expectation(&tan.state)?.re);
            traj.fidelity.push(inner(&exact, &tan.state).norm_sqr());
            traj.observables.push(
                self.tracked_ops.iter().map(|op| Ok(op.expectation(&tan.state)?.re)).collect::<Result<Vec<_>>>()?,
            );
            traj.populations.push(populations(&tan.state));
            traj.exact_populations.push(populations(&exact));
            if s == n_steps {
                break;
            }

            traj.min_eigenvalue_a.push(check_metric(&tan.a)?);
            if cfg.cross_check {
                let (a, c) = hadamard_tangent(&self.circuit, &params, &self.hamiltonian, &self.initial_state)?;
                let da = (&a - &tan.a).abs().max();
                let dc = c.iter().zip(&tan.c).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
                if da > 1e-8 || dc > 1e-8 {
                    return Err(Error::InvalidParameter(format!(
                        "Hadamard-test tangent disagrees at t = {t}: |ΔA| = {da:e}, |ΔC| = {dc:e}"
                    )));
                }
            }
            let (a, c_imag) = if cfg.phase_correction { tan.phase_corrected() } else { (tan.a.clone(), tan.c.iter().map(|c| c.im).collect()) };
            let (next, lam) = step(&params, &a, &c_imag, cfg.dt, cfg.lambda)?;
            traj.lambda_used.push(lam);
            params = next;
        }
        traj.converged = traj.min_fidelity() >= cfg.fidelity_target;
        Ok(traj)
    }
}

pub fn run_vte(config: &VteConfig) -> Result<VteTrajectory> {
    VteProblem::new(config)?.run()
}
