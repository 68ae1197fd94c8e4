//! Variational ground-state search on an encoded qudit Hamiltonian.
//!
//! The cost is `⟨H⟩ + β Σ_sites ⟨𝒫_site⟩`, minimized with L-BFGS from several
//! random starting points. Every iterate is compared with the exact qudit
//! ground manifold, which a real device could not do; the fidelity traces are
//! a simulation-side diagnostic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_ansatz, AnsatzKind, Circuit};
use crate::encoding::{Encoder, EncodingKind, PenaltyConfig};
use crate::error::{Error, Result};
use crate::lbfgs::{self, LbfgsOptions, Termination};
use crate::models::{ModelDescriptor, QuditModel};
use crate::oracle::{qudit_ground_manifold, GroundManifold};
use crate::pauli::{total_spin_component, total_spin_squared, Pauli, PauliSum};
use crate::sparse::SparseOperator;
use crate::C64;

/// How the qubit register is prepared before the ansatz.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    /// `|0…0⟩`.
    Zeros,
    /// A computational basis state, qubit 0 first.
    Bits(Vec<bool>),
    /// `⊗ |ψ⁻⟩` on qubit pairs `(0,1), (2,3), …`.
    SingletProduct,
    /// The singlet product with pair `k` replaced by `(|01⟩+|10⟩)/√2`.
    TripletAt(usize),
    /// Encoded image of a qudit product state `|j_1, …, j_N⟩`.
    Fock(Vec<usize>),
}

impl std::str::FromStr for InitialState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unknown initial state {s:?}"));
        let list = |body: &str| -> Result<Vec<usize>> {
            body.split(',')
                .map(|x| x.trim().parse::<usize>().map_err(|_| bad()))
                .collect()
        };
        match s.split_once(':') {
            None => match s {
                "zeros" => Ok(InitialState::Zeros),
                "singlet_product" => Ok(InitialState::SingletProduct),
                _ => Err(bad()),
            },
            Some(("bits", body)) => body
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(bad()),
                })
                .collect::<Result<_>>()
                .map(InitialState::Bits),
            Some(("triplet_at", k)) => k.trim().parse().map(InitialState::TripletAt).map_err(|_| bad()),
            Some(("fock", body)) => list(body).map(InitialState::Fock),
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for InitialState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitialState::Zeros => f.write_str("zeros"),
            InitialState::Bits(b) => {
                f.write_str("bits:")?;
                b.iter().try_for_each(|&x| f.write_str(if x { "1" } else { "0" }))
            }
            InitialState::SingletProduct => f.write_str("singlet_product"),
            InitialState::TripletAt(k) => write!(f, "triplet_at:{k}"),
            InitialState::Fock(l) => {
                let s: Vec<String> = l.iter().map(|x| x.to_string()).collect();
                write!(f, "fock:{}", s.join(","))
            }
        }
    }
}

impl InitialState {
    pub fn prepare(&self, n_qubits: usize, encoder: &Encoder) -> Result<Vec<C64>> {
        let dim = 1usize << n_qubits;
        let basis = |idx: usize| {
            let mut v = vec![C64::default(); dim];
            v[idx] = C64::new(1.0, 0.0);
            v
        };
        match self {
            InitialState::Zeros => Ok(basis(0)),
            InitialState::Bits(bits) => {
                if bits.len() != n_qubits {
                    return Err(Error::Dimension { expected: n_qubits, got: bits.len() });
                }
                Ok(basis(bits.iter().fold(0, |a, &b| 2 * a + b as usize)))
            }
            InitialState::SingletProduct | InitialState::TripletAt(_) => {
                if n_qubits % 2 != 0 {
                    return Err(Error::InvalidParameter(format!(
                        "pair product states need an even register, got {n_qubits} qubits"
                    )));
                }
                let h = std::f64::consts::FRAC_1_SQRT_2;
                let singlet = [C64::default(), C64::new(h, 0.0), C64::new(-h, 0.0), C64::default()];
                let triplet = [C64::default(), C64::new(h, 0.0), C64::new(h, 0.0), C64::default()];
                let pairs = n_qubits / 2;
                let special = match self {
                    InitialState::TripletAt(k) if *k >= pairs => {
                        return Err(Error::InvalidParameter(format!("pair {k} of {pairs}")));
                    }
                    InitialState::TripletAt(k) => Some(*k),
                    _ => None,
                };
                let mut v = vec![C64::new(1.0, 0.0)];
                for p in 0..pairs {
                    let local = if Some(p) == special { &triplet } else { &singlet };
                    v = v.iter().flat_map(|a| local.iter().map(move |b| a * b)).collect();
                }
                Ok(v)
            }
            InitialState::Fock(levels) => {
                let v = encoder.encode_product_state(levels)?;
                if v.len() != dim {
                    return Err(Error::Dimension { expected: dim, got: v.len() });
                }
                Ok(v)
            }
        }
    }
}

fn default_beta() -> f64 {
    10.0
}
fn default_max_iterations() -> usize {
    1000
}
fn default_gtol() -> f64 {
    1e-6
}
fn default_restarts() -> usize {
    50
}
fn default_initial_state() -> String {
    "zeros".into()
}
fn default_fidelity_target() -> f64 {
    0.95
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VqeConfig {
    pub model: ModelDescriptor,
    pub encoding: EncodingKind,
    pub ansatz: AnsatzKind,
    pub layers: usize,
    /// Adds `β Σ 𝒫` to the cost when set.
    #[serde(default)]
    pub penalty: bool,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_gtol")]
    pub gtol: f64,
    #[serde(default)]
    pub ftol: f64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_initial_state")]
    pub initial_state: String,
    #[serde(default = "default_fidelity_target")]
    pub fidelity_target: f64,
    /// Half-width of the uniform initial-parameter distribution; defaults to
    /// π for the hardware-efficient ansatz and 0.5 for the conserving ones.
    #[serde(default)]
    pub init_range: Option<f64>,
    /// Conserved quantities to record along the optimization: model symmetry
    /// names (encoded), `qubit_S_tot_z` / `qubit_S_tot_sq` for the register's
    /// own total spin, or `qubit_excitations` for its number of `|1⟩`s.
    #[serde(default)]
    pub track: Vec<String>,
}

impl VqeConfig {
    pub fn new(model: ModelDescriptor, encoding: EncodingKind, ansatz: AnsatzKind, layers: usize) -> Self {
        Self {
            model,
            encoding,
            ansatz,
            layers,
            penalty: false,
            beta: default_beta(),
            max_iterations: default_max_iterations(),
            gtol: default_gtol(),
            ftol: 0.0,
            restarts: default_restarts(),
            seed: 0,
            initial_state: default_initial_state(),
            fidelity_target: default_fidelity_target(),
            init_range: None,
            track: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("at least one restart is required".into()));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("penalty weight must be non-negative, got {}", self.beta)));
        }
        if !(self.gtol > 0.0) || !(self.ftol >= 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if let Some(r) = self.init_range {
            if !(r >= 0.0) {
                return Err(Error::InvalidParameter(format!("init_range must be non-negative, got {r}")));
            }
        }
        self.initial_state.parse::<InitialState>()?;
        Ok(())
    }

    pub fn effective_beta(&self) -> f64 {
        if self.penalty {
            self.beta
        } else {
            0.0
        }
    }

    pub fn init_half_width(&self) -> f64 {
        self.init_range.unwrap_or(match self.ansatz {
            AnsatzKind::HardwareEfficient => std::f64::consts::PI,
            _ => 0.5,
        })
    }
}

/// Resolves a tracked-quantity name (see [`VqeConfig::track`]).
pub fn tracked_operator(name: &str, model: &QuditModel, encoder: &Encoder, n_qubits: usize) -> Result<SparseOperator> {
    let sum = match name {
        "qubit_S_tot_z" => total_spin_component(n_qubits, Pauli::Z),
        "qubit_S_tot_sq" => total_spin_squared(n_qubits),
        "qubit_excitations" => {
            let diag = (0..1usize << n_qubits).map(|i| (i, i, C64::new(i.count_ones() as f64, 0.0))).collect();
            return Ok(SparseOperator::from_triplets(1 << n_qubits, diag));
        }
        other => encoder.encode_symmetry(model, other)?,
    };
    Ok(SparseOperator::from_pauli_sum(&sum))
}

/// `⟨H⟩ + β Σ_sites ⟨𝒫_site⟩`.
pub fn cost(state: &[C64], h: &PauliSum, penalties: &PenaltyConfig) -> Result<f64> {
    let mut value = h.expectation(state)?;
    if penalties.beta() != 0.0 {
        for t in penalties.site_terms() {
            value += t.expectation(state)? * penalties.beta();
        }
    }
    if value.im.abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!("cost has imaginary part {}", value.im)));
    }
    Ok(value.re)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub cost: f64,
    pub energy: f64,
    pub fidelity: f64,
    pub grad_norm: f64,
    /// Values of the tracked quantities, in configuration order.
    pub tracked: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub restart: usize,
    pub seed: u64,
    pub final_params: Vec<f64>,
    pub final_cost: f64,
    pub final_energy: f64,
    pub final_fidelity: f64,
    /// Fidelity with the part of the ground manifold sharing the initial
    /// state's total spin (symmetry encoding of spin chains only).
    pub sector_fidelity: Option<f64>,
    pub final_illegitimacy: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: String,
    #[serde(rename = "C_R")]
    pub c_r: usize,
    pub trace: Vec<TracePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VqeResult {
    pub config: VqeConfig,
    pub n_qubits: usize,
    /// Number of variational parameters `L`.
    pub n_params: usize,
    pub cnot_count: usize,
    pub hamiltonian_terms: usize,
    pub reference_energy: f64,
    pub reference_degeneracy: usize,
    pub tracked: Vec<String>,
    pub per_restart: Vec<RestartRecord>,
    pub mean_fidelity: f64,
    pub std_fidelity: f64,
    pub mean_energy: f64,
    pub std_energy: f64,
    pub mean_iterations: f64,
    #[serde(rename = "C_R_mean")]
    pub c_r_mean: f64,
    pub best_restart: usize,
    pub converged: bool,
}

impl VqeResult {
    pub fn best(&self) -> &RestartRecord {
        &self.per_restart[self.best_restart]
    }
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Everything a VQE run needs, compiled once and shared by the restarts.
pub struct VqeProblem {
    pub config: VqeConfig,
    pub model: QuditModel,
    pub encoder: Encoder,
    pub circuit: Circuit,
    pub hamiltonian: PauliSum,
    pub penalties: PenaltyConfig,
    pub initial_state: Vec<C64>,
    pub reference: GroundManifold,
    /// Ground-manifold members sharing the initial state's total spin.
    pub sector_reference: Option<GroundManifold>,
    cost_op: SparseOperator,
    energy_op: SparseOperator,
    tracked_ops: Vec<SparseOperator>,
}

impl VqeProblem {
    pub fn new(config: &VqeConfig) -> Result<Self> {
        config.validate()?;
        let model = config.model.build()?;
        let encoder = Encoder::new(config.encoding, model.d)?;
        let hamiltonian = encoder.encode_hamiltonian(&model)?;
        let n_qubits = model.n_sites * encoder.qubits_per_site();
        let circuit = build_ansatz(config.ansatz, n_qubits, config.layers)?;
        let penalties = encoder.penalty_config(model.n_sites, config.effective_beta())?;
        let initial_state = config.initial_state.parse::<InitialState>()?.prepare(n_qubits, &encoder)?;

        let energy_op = SparseOperator::from_pauli_sum(&hamiltonian);
        let cost_op = if penalties.beta() > 0.0 {
            energy_op.add(&SparseOperator::from_pauli_sum(&penalties.total()?))?
        } else {
            energy_op.clone()
        };
        let tracked_ops = config
            .track
            .iter()
            .map(|name| {
                tracked_operator(name, &model, &encoder, n_qubits)
            })
            .collect::<Result<Vec<_>>>()?;

        let qudit = qudit_ground_manifold(&model)?;
        let sector_reference = Self::sector_manifold(&model, &encoder, &qudit, &initial_state)?;
        let reference = qudit.encoded(&encoder, model.n_sites)?;
        Ok(Self {
            config: config.clone(),
            model,
            encoder,
            circuit,
            hamiltonian,
            penalties,
            initial_state,
            reference,
            sector_reference,
            cost_op,
            energy_op,
            tracked_ops,
        })
    }

    /// Members of a degenerate spin-chain ground manifold with the same total
    /// spin as the initial register state.
    fn sector_manifold(
        model: &QuditModel,
        encoder: &Encoder,
        qudit: &GroundManifold,
        initial: &[C64],
    ) -> Result<Option<GroundManifold>> {
        if encoder.kind() != EncodingKind::Symmetry || model.spin.is_none() || qudit.degeneracy() < 2 {
            return Ok(None);
        }
        let n_qubits = model.n_sites * encoder.qubits_per_site();
        let s2_init = total_spin_squared(n_qubits).expectation(initial)?.re;
        let s2 = model.symmetry_sparse("S_tot_sq")?;
        let k = qudit.degeneracy();
        let m = crate::CMatrix::from_fn(k, k, |r, c| {
            let applied = s2.apply(&qudit.states[c]).expect("manifold states match the model");
            crate::linalg::inner(&qudit.states[r], &applied)
        });
        let (values, vectors) = crate::linalg::hermitian_eigh(&m);
        let states: Vec<Vec<C64>> = (0..k)
            .filter(|&c| (values[c] - s2_init).abs() < 1e-6)
            .map(|c| {
                let mut v = vec![C64::default(); qudit.states[0].len()];
                for (r, s) in qudit.states.iter().enumerate() {
                    v.iter_mut().zip(s).for_each(|(a, b)| *a += vectors[(r, c)] * b);
                }
                v
            })
            .collect();
        if states.is_empty() {
            return Ok(None);
        }
        Ok(Some(GroundManifold { energy: qudit.energy, states }.encoded(encoder, model.n_sites)?))
    }

    pub fn n_qubits(&self) -> usize {
        self.circuit.n_qubits()
    }

    /// Cost and gradient at `params`.
    pub fn cost_and_gradient(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.circuit.expectation_and_gradient(params, &self.cost_op, &self.initial_state)
    }

    fn point(&self, iteration: usize, params: &[f64], cost: f64, grad: &[f64]) -> Result<TracePoint> {
        let state = self.circuit.run(params, &self.initial_state)?;
        let energy = self.energy_op.expectation(&state)?.re;
        let tracked = self
            .tracked_ops
            .iter()
            .map(|op| Ok(op.expectation(&state)?.re))
            .collect::<Result<Vec<f64>>>()?;
        Ok(TracePoint {
            iteration,
            cost,
            energy,
            fidelity: self.reference.fidelity(&state),
            grad_norm: grad.iter().fold(0.0f64, |m, g| m.max(g.abs())),
            tracked,
        })
    }

    pub fn initial_params(&self, restart: usize) -> (u64, Vec<f64>) {
        let seed = self.config.seed.wrapping_add(restart as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = self.config.init_half_width();
        let params = (0..self.circuit.n_params())
            .map(|_| if w > 0.0 { rng.gen_range(-w..w) } else { 0.0 })
            .collect();
        (seed, params)
    }

    /// One optimization from the restart's seeded starting point.
    pub fn run_restart(&self, restart: usize) -> Result<RestartRecord> {
        let (seed, x0) = self.initial_params(restart);
        self.run_from(restart, seed, &x0)
    }

    pub fn run_from(&self, restart: usize, seed: u64, x0: &[f64]) -> Result<RestartRecord> {
        let opts = LbfgsOptions {
            max_iter: self.config.max_iterations,
            gtol: self.config.gtol,
            ftol: self.config.ftol,
            ..Default::default()
        };
        let mut failure: Option<Error> = None;
        let mut trace_failure: Option<Error> = None;
        let mut trace = Vec::new();
        let result = lbfgs::minimize(
            |x| match self.cost_and_gradient(x) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    (f64::NAN, vec![0.0; x.len()])
                }
            },
            x0,
            &opts,
            |it, x, f, g| match self.point(it, x, f, g) {
                Ok(p) => trace.push(p),
                Err(e) => {
                    trace_failure.get_or_insert(e);
                }
            },
        );
        if let Some(e) = failure.or(trace_failure) {
            return Err(e);
        }
        let state = self.circuit.run(&result.x, &self.initial_state)?;
        let last = trace.last().expect("the starting point is always traced");
        Ok(RestartRecord {
            restart,
            seed,
            final_cost: result.f,
            final_energy: last.energy,
            final_fidelity: last.fidelity,
            sector_fidelity: self.sector_reference.as_ref().map(|m| m.fidelity(&state)),
            final_illegitimacy: self.encoder.illegitimacy_weight(&state, self.model.n_sites)?,
            iterations: result.iterations,
            evaluations: result.evaluations,
            termination: match result.termination {
                Termination::GradientTolerance => "gradient_tolerance",
                Termination::FunctionTolerance => "function_tolerance",
                Termination::MaxIterations => "max_iterations",
                Termination::LineSearchFailed => "line_search_failed",
            }
            .to_string(),
            c_r: self.circuit.n_params() * result.iterations,
            final_params: result.x,
            trace,
        })
    }

    pub fn run(&self) -> Result<VqeResult> {
        let per_restart = (0..self.config.restarts)
            .into_par_iter()
            .map(|r| self.run_restart(r))
            .collect::<Result<Vec<_>>>()?;
        let (mean_fidelity, std_fidelity) = mean_std(per_restart.iter().map(|r| r.final_fidelity));
        let (mean_energy, std_energy) = mean_std(per_restart.iter().map(|r| r.final_energy));
        let (mean_iterations, _) = mean_std(per_restart.iter().map(|r| r.iterations as f64));
        let (c_r_mean, _) = mean_std(per_restart.iter().map(|r| r.c_r as f64));
        let best_restart = (0..per_restart.len())
            .min_by(|&a, &b| per_restart[a].final_cost.total_cmp(&per_restart[b].final_cost))
            .unwrap_or(0);
        Ok(VqeResult {
            config: self.config.clone(),
            n_qubits: self.n_qubits(),
            n_params: self.circuit.n_params(),
            cnot_count: self.circuit.cnot_count(),
            hamiltonian_terms: self.hamiltonian.len(),
            reference_energy: self.reference.energy,
            reference_degeneracy: self.reference.degeneracy(),
            tracked: self.config.track.clone(),
            converged: mean_fidelity >= self.config.fidelity_target,
            per_restart,
            mean_fidelity,
            std_fidelity,
            mean_energy,
            std_energy,
            mean_iterations,
            c_r_mean,
            best_restart,
        })
    }
}

pub fn run_vqe(config: &VqeConfig) -> Result<VqeResult> {
    VqeProblem::new(config)?.run()
}
