//! Qudit-to-qubit encodings.
//!
//! An [`Encoder`] holds the isometry `T` (2^M × d) that sends qudit level `j`
//! to its qubit image. Binary encoding uses the zero-padded binary string of
//! `j` on `M = ⌈log2 d⌉` qubits; symmetry encoding uses the uniform
//! superposition of all `d − 1`-bit strings with `j` set bits. Within a site the
//! leftmost qubit is the most significant bit, and sites are concatenated left
//! to right.
//!
//! Operators are mapped as `T^{⊗k} A T^{†⊗k}` on whole local terms. Because
//! `T T† ≠ 𝕀` whenever illegitimate qubit states exist, a two-site term must be
//! encoded jointly rather than assembled from encoded single-site factors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{apply_site_map, kron_power};
use crate::models::{LocalTerm, ProductTerm, QuditModel};
use crate::pauli::{PauliSum, DEFAULT_PRUNE_TOL};
use crate::{CMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingKind {
    Binary,
    Symmetry,
}

impl std::fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EncodingKind::Binary => "binary",
            EncodingKind::Symmetry => "symmetry",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Encoder {
    kind: EncodingKind,
    d: usize,
    qubits_per_site: usize,
    isometry: CMatrix,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl Encoder {
    pub fn new(kind: EncodingKind, d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter(format!("qudit dimension must be at least 2, got {d}")));
        }
        let m = match kind {
            EncodingKind::Binary => (usize::BITS - (d - 1).leading_zeros()) as usize,
            EncodingKind::Symmetry => d - 1,
        };
        if m > 16 {
            return Err(Error::InvalidParameter(format!("{m} qubits per site is too many")));
        }
        let rows = 1usize << m;
        let mut t = CMatrix::zeros(rows, d);
        match kind {
            EncodingKind::Binary => {
                for j in 0..d {
                    t[(j, j)] = C64::new(1.0, 0.0);
                }
            }
            EncodingKind::Symmetry => {
                for b in 0..rows {
                    let j = b.count_ones() as usize;
                    t[(b, j)] = C64::new(1.0 / binomial(m, j).sqrt(), 0.0);
                }
            }
        }
        Ok(Self { kind, d, qubits_per_site: m, isometry: t })
    }

    pub fn binary(d: usize) -> Result<Self> {
        Self::new(EncodingKind::Binary, d)
    }

    pub fn symmetry(d: usize) -> Result<Self> {
        Self::new(EncodingKind::Symmetry, d)
    }

    pub fn kind(&self) -> EncodingKind {
        self.kind
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn qubits_per_site(&self) -> usize {
        self.qubits_per_site
    }

    pub fn isometry(&self) -> &CMatrix {
        &self.isometry
    }

    /// True when every qubit state of a site is the image of some qudit state.
    pub fn is_complete(&self) -> bool {
        self.d == 1 << self.qubits_per_site
    }

    pub fn encode_basis_state(&self, j: usize) -> Result<Vec<C64>> {
        if j >= self.d {
            return Err(Error::LevelOutOfRange { level: j, d: self.d });
        }
        Ok(self.isometry.column(j).iter().copied().collect())
    }

    /// `T A T†` for an operator acting on a single site.
    pub fn encode_site_matrix(&self, a: &CMatrix) -> Result<CMatrix> {
        self.encode_matrix(a, 1)
    }

    /// `T^{⊗k} A T^{†⊗k}` as a dense 2^{kM} matrix.
    pub fn encode_matrix(&self, a: &CMatrix, k: usize) -> Result<CMatrix> {
        let dim = self.d.pow(k as u32);
        if a.shape() != (dim, dim) {
            return Err(Error::Dimension { expected: dim, got: a.nrows() });
        }
        let t = kron_power(&self.isometry, k);
        Ok(&t * a * t.adjoint())
    }

    /// Encodes a dense operator on `k ∈ {1, 2}` adjacent sites into a Pauli sum
    /// on `k·M` qubits.
    pub fn encode_term(&self, term: &CMatrix, k: usize) -> Result<PauliSum> {
        if !(1..=2).contains(&k) {
            return Err(Error::InvalidParameter(format!("terms must span 1 or 2 sites, got {k}")));
        }
        let mapped = self.encode_matrix(term, k)?;
        PauliSum::from_matrix(&mapped, k * self.qubits_per_site, DEFAULT_PRUNE_TOL)
    }

    /// Qubit Hamiltonian `Σ_terms T^{⊗k} h T^{†⊗k}` on `N·M` qubits, each term
    /// placed at qubit offset `site·M`.
    pub fn encode_hamiltonian(&self, model: &QuditModel) -> Result<PauliSum> {
        self.check_model(model)?;
        self.encode_terms(&model.terms, model.n_sites)
    }

    fn encode_terms(&self, terms: &[LocalTerm], n_sites: usize) -> Result<PauliSum> {
        // Identical matrices (every bond of a uniform chain) are decomposed once.
        let mut distinct: Vec<&CMatrix> = Vec::new();
        let mut which = Vec::with_capacity(terms.len());
        for t in terms {
            match distinct.iter().position(|m| **m == t.matrix) {
                Some(k) => which.push(k),
                None => {
                    which.push(distinct.len());
                    distinct.push(&t.matrix);
                }
            }
        }
        let spans: Vec<usize> = (0..distinct.len())
            .map(|k| terms[which.iter().position(|&w| w == k).unwrap()].span)
            .collect();
        let encoded: Vec<PauliSum> = distinct
            .par_iter()
            .zip(spans.par_iter())
            .map(|(m, &span)| self.encode_term(m, span))
            .collect::<Result<_>>()?;
        let width = n_sites * self.qubits_per_site;
        let mut total = PauliSum::zero(width);
        for (t, &k) in terms.iter().zip(&which) {
            let placed = encoded[k].embed(t.site * self.qubits_per_site, width)?;
            for (p, c) in placed.iter() {
                total.add_term(*p, *c);
            }
        }
        total.prune(DEFAULT_PRUNE_TOL);
        Ok(total)
    }

    /// Encodes a sum of single-site operator products. Factors sharing a site
    /// are multiplied in the qudit space before encoding.
    pub fn encode_products(&self, terms: &[ProductTerm], n_sites: usize) -> Result<PauliSum> {
        let m = self.qubits_per_site;
        let width = n_sites * m;
        let mut total = PauliSum::zero(width);
        for term in terms {
            let mut acc = PauliSum::identity(width, term.coeff);
            for (site, op) in term.grouped_factors(self.d)? {
                if site >= n_sites {
                    return Err(Error::InvalidParameter(format!("site {site} outside chain of {n_sites}")));
                }
                let local = self.encode_term(&op, 1)?.embed(site * m, width)?;
                acc = acc.multiply(&local)?;
            }
            for (p, c) in acc.iter() {
                total.add_term(*p, *c);
            }
        }
        total.prune(DEFAULT_PRUNE_TOL);
        Ok(total)
    }

    /// Encodes one of the model's named symmetry operators.
    pub fn encode_symmetry(&self, model: &QuditModel, name: &str) -> Result<PauliSum> {
        self.check_model(model)?;
        let terms = model
            .symmetry(name)
            .ok_or_else(|| Error::InvalidParameter(format!("model has no symmetry {name:?}")))?;
        self.encode_products(terms, model.n_sites)
    }

    fn check_model(&self, model: &QuditModel) -> Result<()> {
        if model.d != self.d {
            return Err(Error::Dimension { expected: self.d, got: model.d });
        }
        Ok(())
    }

    /// `T^{⊗N} ψ` for a qudit state on `n_sites` sites.
    pub fn encode_state(&self, qudit_state: &[C64], n_sites: usize) -> Result<Vec<C64>> {
        let dim = self.d.pow(n_sites as u32);
        if qudit_state.len() != dim {
            return Err(Error::Dimension { expected: dim, got: qudit_state.len() });
        }
        let q = 1usize << self.qubits_per_site;
        let mut state = qudit_state.to_vec();
        for site in 0..n_sites {
            let prefix = q.pow(site as u32);
            let suffix = self.d.pow((n_sites - site - 1) as u32);
            state = apply_site_map(&state, prefix, suffix, &self.isometry);
        }
        Ok(state)
    }

    /// `T^{†⊗N} ψ`: the qudit amplitudes of the legitimate part of a qubit state.
    pub fn decode_state(&self, qubit_state: &[C64], n_sites: usize) -> Result<Vec<C64>> {
        let q = 1usize << self.qubits_per_site;
        let dim = 1usize << (self.qubits_per_site * n_sites);
        if qubit_state.len() != dim {
            return Err(Error::Dimension { expected: dim, got: qubit_state.len() });
        }
        let adj = self.isometry.adjoint();
        let mut state = qubit_state.to_vec();
        for site in 0..n_sites {
            let prefix = self.d.pow(site as u32);
            let suffix = q.pow((n_sites - site - 1) as u32);
            state = apply_site_map(&state, prefix, suffix, &adj);
        }
        Ok(state)
    }

    /// Encoded image of a qudit product basis state `|j_1, …, j_N⟩`.
    pub fn encode_product_state(&self, levels: &[usize]) -> Result<Vec<C64>> {
        let mut state = vec![C64::new(1.0, 0.0)];
        for &j in levels {
            let local = self.encode_basis_state(j)?;
            state = state
                .iter()
                .flat_map(|a| local.iter().map(move |b| a * b))
                .collect();
        }
        Ok(state)
    }

    /// `Π = T T†` as a dense 2^M matrix.
    pub fn legitimate_projector_matrix(&self) -> CMatrix {
        &self.isometry * self.isometry.adjoint()
    }

    /// `Π = Σ_j |enc(j)⟩⟨enc(j)|` on the `M` qubits of one site.
    pub fn legitimate_projector(&self) -> PauliSum {
        PauliSum::from_matrix(&self.legitimate_projector_matrix(), self.qubits_per_site, DEFAULT_PRUNE_TOL)
            .expect("projector has the encoder's shape")
    }

    /// Per-site penalty operator `2^M (𝕀 − Π) − 𝕀`: every legitimate state sits
    /// at −1 and every illegitimate state at `2^M − 1 ≥ 3`. For the spin-1
    /// symmetry encoding this is exactly `−(XX + YY + ZZ)`. An encoding without
    /// illegitimate states gets the zero operator.
    pub fn penalty_matrix(&self) -> CMatrix {
        let q = 1usize << self.qubits_per_site;
        if self.is_complete() {
            return CMatrix::zeros(q, q);
        }
        let id = CMatrix::identity(q, q);
        (&id - self.legitimate_projector_matrix()) * C64::new(q as f64, 0.0) - id
    }

    pub fn penalty_term(&self) -> PauliSum {
        PauliSum::from_matrix(&self.penalty_matrix(), self.qubits_per_site, DEFAULT_PRUNE_TOL)
            .expect("penalty has the encoder's shape")
    }

    /// Penalty operators placed on each of `n_sites` encoded sites.
    pub fn penalty_config(&self, n_sites: usize, beta: f64) -> Result<PenaltyConfig> {
        let m = self.qubits_per_site;
        let local = self.penalty_term();
        let site_terms = (0..n_sites)
            .map(|i| local.embed(i * m, n_sites * m))
            .collect::<Result<Vec<_>>>()?;
        PenaltyConfig::new(beta, site_terms)
    }

    /// `1 − ⟨ψ|Π^{⊗N}|ψ⟩`, the weight of a qubit state outside the encoded space.
    pub fn illegitimacy_weight(&self, state: &[C64], n_sites: usize) -> Result<f64> {
        let legit: f64 = self
            .decode_state(state, n_sites)?
            .iter()
            .map(|a| a.norm_sqr())
            .sum();
        Ok((1.0 - legit).clamp(0.0, 1.0))
    }
}

/// Penalty weight and the per-site operators it multiplies.
#[derive(Clone, Debug)]
pub struct PenaltyConfig {
    beta: f64,
    site_terms: Vec<PauliSum>,
}

impl PenaltyConfig {
    pub fn new(beta: f64, site_terms: Vec<PauliSum>) -> Result<Self> {
        if !(beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("penalty weight must be non-negative, got {beta}")));
        }
        if let Some(bad) = site_terms.iter().position(|t| !t.is_hermitian(1e-12)) {
            return Err(Error::InvalidParameter(format!("penalty term {bad} is not Hermitian")));
        }
        Ok(Self { beta, site_terms })
    }

    pub fn disabled(width: usize) -> Self {
        Self { beta: 0.0, site_terms: vec![PauliSum::zero(width)] }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn site_terms(&self) -> &[PauliSum] {
        &self.site_terms
    }

    /// `β Σ_sites 𝒫_site` as a single operator.
    pub fn total(&self) -> Result<PauliSum> {
        let width = self.site_terms.first().map_or(0, |t| t.width());
        let mut out = PauliSum::zero(width);
        for t in &self.site_terms {
            out = out.add(t)?;
        }
        Ok(out.scale(C64::new(self.beta, 0.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::PauliSum;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn assert_state(got: &[C64], expected: &[(usize, f64)]) {
        let mut want = vec![C64::default(); got.len()];
        for &(i, a) in expected {
            want[i] = c(a);
        }
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).norm() < 1e-15, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn basis_state_images() {
        let b9 = Encoder::binary(9).unwrap();
        assert_eq!(b9.qubits_per_site(), 4);
        assert_state(&b9.encode_basis_state(8).unwrap(), &[(0b1000, 1.0)]);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s3 = Encoder::symmetry(3).unwrap();
        assert_state(&s3.encode_basis_state(1).unwrap(), &[(0b01, h), (0b10, h)]);

        let s4 = Encoder::symmetry(4).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert_state(&s4.encode_basis_state(2).unwrap(), &[(0b110, r), (0b101, r), (0b011, r)]);

        assert!(matches!(s4.encode_basis_state(4), Err(Error::LevelOutOfRange { level: 4, d: 4 })));
    }

    #[test]
    fn qudit_dimension_two_is_identity_encoding() {
        for kind in [EncodingKind::Binary, EncodingKind::Symmetry] {
            let e = Encoder::new(kind, 2).unwrap();
            assert_eq!(e.qubits_per_site(), 1);
            for levels in [[0, 1, 1], [1, 0, 0]] {
                let s = e.encode_product_state(&levels).unwrap();
                let idx = levels.iter().fold(0, |a, &l| 2 * a + l);
                assert_state(&s, &[(idx, 1.0)]);
            }
        }
    }

    #[test]
    fn product_states_follow_site_order() {
        let s3 = Encoder::symmetry(3).unwrap();
        let mut q = vec![C64::default(); 9];
        q[2] = c(1.0); // |0̃, 2̃⟩
        assert_state(&s3.encode_state(&q, 2).unwrap(), &[(0b0011, 1.0)]);

        let s4 = Encoder::symmetry(4).unwrap();
        let mut q = vec![C64::default(); 256];
        q[3 * 64] = c(1.0); // |3̃, 0̃, 0̃, 0̃⟩
        assert_state(&s4.encode_state(&q, 4).unwrap(), &[(0b111000000000, 1.0)]);
        assert_eq!(s4.encode_product_state(&[3, 0, 0, 0]).unwrap(), s4.encode_state(&q, 4).unwrap());
    }

    #[test]
    fn projector_ranks() {
        let b4 = Encoder::binary(4).unwrap();
        let d = b4.legitimate_projector().sub(&PauliSum::identity(2, c(1.0))).unwrap();
        assert!(d.max_abs_coefficient() < 1e-15);

        let s3 = Encoder::symmetry(3).unwrap();
        // 𝕀 − |ψ⁻⟩⟨ψ⁻| = ¾𝕀 + ¼(XX + YY + ZZ)
        let expected = PauliSum::from_labels(
            2,
            &[(c(0.75), "II"), (c(0.25), "XX"), (c(0.25), "YY"), (c(0.25), "ZZ")],
        )
        .unwrap();
        let d = s3.legitimate_projector().sub(&expected).unwrap();
        assert!(d.max_abs_coefficient() < 1e-15, "{}", s3.legitimate_projector());
    }

    #[test]
    fn spin_one_penalty_is_negative_heisenberg() {
        let s3 = Encoder::symmetry(3).unwrap();
        let expected =
            PauliSum::from_labels(2, &[(c(-1.0), "XX"), (c(-1.0), "YY"), (c(-1.0), "ZZ")]).unwrap();
        let got = s3.penalty_term();
        let diff = got.sub(&expected).unwrap();
        assert!(diff.max_abs_coefficient() < 1e-15, "{got}");
        assert!(Encoder::binary(4).unwrap().penalty_term().is_empty());
    }

    #[test]
    fn illegitimacy_of_singlet_mixtures() {
        let s3 = Encoder::symmetry(3).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let singlet = [c(0.0), c(h), c(-h), c(0.0)];
        assert!((s3.illegitimacy_weight(&singlet, 1).unwrap() - 1.0).abs() < 1e-15);
        let mix = [c(h), c(0.5), c(-0.5), c(0.0)];
        assert!((s3.illegitimacy_weight(&mix, 1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn penalty_rejects_negative_beta() {
        assert!(PenaltyConfig::new(-1.0, vec![]).is_err());
    }
}
