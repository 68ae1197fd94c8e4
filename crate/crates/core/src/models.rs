//! Qudit Hamiltonians, their symmetry operators and the phase diagnostics
//! used on the spin-1 chain.
//!
//! A qudit basis index runs over sites left to right with site 0 as the most
//! significant digit, matching the Kronecker ordering used by the encoders.
//! Spin level `k` carries `m = s − k`, so level 0 is the fully polarized state.

use serde::{Deserialize, Serialize};

use crate::encoding::Encoder;
use crate::error::{Error, Result};
use crate::linalg::{apply_local, inner, kron};
use crate::sparse::SparseOperator;
use crate::{CMatrix, C64};

#[derive(Clone, Debug)]
pub struct SpinMatrices {
    pub s: f64,
    pub sx: CMatrix,
    pub sy: CMatrix,
    pub sz: CMatrix,
}

impl SpinMatrices {
    pub fn dim(&self) -> usize {
        self.sz.nrows()
    }

    /// `S⃗_1·S⃗_2` on two sites.
    pub fn heisenberg_bond(&self) -> CMatrix {
        kron(&self.sx, &self.sx) + kron(&self.sy, &self.sy) + kron(&self.sz, &self.sz)
    }

    /// `exp(iπ S^z)`, diagonal.
    pub fn string_phase(&self) -> CMatrix {
        CMatrix::from_fn(self.dim(), self.dim(), |r, c| {
            if r == c {
                C64::from_polar(1.0, std::f64::consts::PI * self.sz[(r, r)].re)
            } else {
                C64::default()
            }
        })
    }
}

/// Spin matrices for spin `s` (a non-negative half-integer) from the ladder
/// operators.
pub fn spin_matrices(s: f64) -> Result<SpinMatrices> {
    let two_s = 2.0 * s;
    if !(s > 0.0) || (two_s - two_s.round()).abs() > 1e-12 || two_s > 64.0 {
        return Err(Error::InvalidParameter(format!("spin must be a positive half-integer, got {s}")));
    }
    let d = two_s.round() as usize + 1;
    let m = |k: usize| s - k as f64;
    let mut sp = CMatrix::zeros(d, d);
    for k in 1..d {
        // S+ |m_k⟩ = √(s(s+1) − m_k(m_k+1)) |m_k + 1⟩, and m_{k−1} = m_k + 1.
        sp[(k - 1, k)] = C64::new((s * (s + 1.0) - m(k) * (m(k) + 1.0)).sqrt(), 0.0);
    }
    let sm = sp.adjoint();
    let sx = (&sp + &sm) * C64::new(0.5, 0.0);
    let sy = (&sp - &sm) * C64::new(0.0, -0.5);
    let sz = CMatrix::from_fn(d, d, |r, c| if r == c { C64::new(m(r), 0.0) } else { C64::default() });
    Ok(SpinMatrices { s, sx, sy, sz })
}

/// Truncated bosonic annihilation operator: `a|n⟩ = √n |n−1⟩`.
pub fn annihilation(d_trunc: usize) -> CMatrix {
    CMatrix::from_fn(d_trunc, d_trunc, |r, c| {
        if c == r + 1 {
            C64::new((c as f64).sqrt(), 0.0)
        } else {
            C64::default()
        }
    })
}

pub fn number_operator(d_trunc: usize) -> CMatrix {
    CMatrix::from_fn(d_trunc, d_trunc, |r, c| if r == c { C64::new(r as f64, 0.0) } else { C64::default() })
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BbhParams {
    #[serde(rename = "J", default = "one")]
    pub j: f64,
    pub theta: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default = "one")]
    pub s: f64,
}

impl BbhParams {
    pub fn new(theta: f64, n: usize) -> Self {
        Self { j: 1.0, theta, n, s: 1.0 }
    }

    pub fn with_spin(mut self, s: f64) -> Self {
        self.s = s;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoseHubbardParams {
    #[serde(default = "one")]
    pub t: f64,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub d_trunc: usize,
    #[serde(default)]
    pub n_bos: Option<usize>,
}

/// Model descriptor as it appears in configuration and export headers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelDescriptor {
    Bbh(BbhParams),
    BoseHubbard(BoseHubbardParams),
}

impl ModelDescriptor {
    pub fn build(&self) -> Result<QuditModel> {
        match self {
            ModelDescriptor::Bbh(p) => bbh_model(p),
            ModelDescriptor::BoseHubbard(p) => bose_hubbard_model(p),
        }
    }
}

/// A dense operator on `span` consecutive sites starting at `site` (0-based).
#[derive(Clone, Debug)]
pub struct LocalTerm {
    pub site: usize,
    pub span: usize,
    pub matrix: CMatrix,
}

/// `coeff · Π_k A_k` with each factor acting on a single site.
#[derive(Clone, Debug)]
pub struct ProductTerm {
    pub coeff: C64,
    pub factors: Vec<(usize, CMatrix)>,
}

impl ProductTerm {
    /// Factors multiplied together per site (in their original order), sorted
    /// by site.
    pub fn grouped_factors(&self, d: usize) -> Result<Vec<(usize, CMatrix)>> {
        let mut out: Vec<(usize, CMatrix)> = Vec::new();
        for (site, m) in &self.factors {
            if m.shape() != (d, d) {
                return Err(Error::Dimension { expected: d, got: m.nrows() });
            }
            match out.iter_mut().find(|(s, _)| s == site) {
                Some((_, acc)) => *acc = &*acc * m,
                None => out.push((*site, m.clone())),
            }
        }
        out.sort_by_key(|(s, _)| *s);
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct QuditModel {
    pub d: usize,
    pub n_sites: usize,
    pub terms: Vec<LocalTerm>,
    pub symmetries: Vec<(String, Vec<ProductTerm>)>,
    pub descriptor: ModelDescriptor,
    /// Single-site spin matrices; `None` for bosonic models.
    pub spin: Option<SpinMatrices>,
}

impl QuditModel {
    pub fn dim(&self) -> usize {
        self.d.pow(self.n_sites as u32)
    }

    pub fn symmetry(&self, name: &str) -> Option<&[ProductTerm]> {
        self.symmetries.iter().find(|(n, _)| n == name).map(|(_, t)| t.as_slice())
    }

    pub fn symmetry_names(&self) -> impl Iterator<Item = &str> {
        self.symmetries.iter().map(|(n, _)| n.as_str())
    }

    /// Boson-number sector requested by the descriptor, if any.
    pub fn particle_sector(&self) -> Option<usize> {
        match &self.descriptor {
            ModelDescriptor::BoseHubbard(p) => p.n_bos,
            ModelDescriptor::Bbh(_) => None,
        }
    }

    /// Qudit basis indices whose level digits sum to `total`.
    pub fn level_sum_basis(&self, total: usize) -> Vec<usize> {
        (0..self.dim()).filter(|&b| self.levels(b).iter().sum::<usize>() == total).collect()
    }

    /// Level digits of a qudit basis index, site 0 first.
    pub fn levels(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.n_sites];
        for slot in out.iter_mut().rev() {
            *slot = index % self.d;
            index /= self.d;
        }
        out
    }

    pub fn product_state(&self, levels: &[usize]) -> Result<Vec<C64>> {
        if levels.len() != self.n_sites {
            return Err(Error::Dimension { expected: self.n_sites, got: levels.len() });
        }
        let mut index = 0;
        for &l in levels {
            if l >= self.d {
                return Err(Error::LevelOutOfRange { level: l, d: self.d });
            }
            index = index * self.d + l;
        }
        let mut v = vec![C64::default(); self.dim()];
        v[index] = C64::new(1.0, 0.0);
        Ok(v)
    }

    pub fn hamiltonian_sparse(&self) -> SparseOperator {
        terms_to_sparse(self.d, self.n_sites, self.terms.iter().map(|t| (t.site, t.span, &t.matrix)))
    }

    pub fn hamiltonian_dense(&self) -> CMatrix {
        self.hamiltonian_sparse().to_dense()
    }

    pub fn symmetry_sparse(&self, name: &str) -> Result<SparseOperator> {
        let terms = self
            .symmetry(name)
            .ok_or_else(|| Error::InvalidParameter(format!("model has no symmetry {name:?}")))?;
        products_to_sparse(self.d, self.n_sites, terms)
    }

    fn check_state(&self, state: &[C64], frame: Frame<'_>) -> Result<()> {
        let expected = match frame {
            Frame::Qudit => self.dim(),
            Frame::Encoded(e) => {
                if e.d() != self.d {
                    return Err(Error::Dimension { expected: self.d, got: e.d() });
                }
                1usize << (e.qubits_per_site() * self.n_sites)
            }
        };
        if state.len() != expected {
            return Err(Error::Dimension { expected, got: state.len() });
        }
        Ok(())
    }

    /// `⟨ψ| A |ψ⟩` for an operator on `span` sites starting at `site`.
    pub fn local_expectation(
        &self,
        state: &[C64],
        frame: Frame<'_>,
        site: usize,
        span: usize,
        op: &CMatrix,
    ) -> Result<C64> {
        self.check_state(state, frame)?;
        if site + span > self.n_sites {
            return Err(Error::InvalidParameter(format!(
                "operator on sites {site}..{} outside chain of {}",
                site + span,
                self.n_sites
            )));
        }
        let applied = match frame {
            Frame::Qudit => apply_local(state, self.d, self.n_sites, site, span, op),
            Frame::Encoded(e) => {
                let mapped = e.encode_matrix(op, span)?;
                apply_local(state, 1 << e.qubits_per_site(), self.n_sites, site, span, &mapped)
            }
        };
        Ok(inner(state, &applied))
    }

    /// `⟨ψ| Π_k A_k |ψ⟩` for a product of single-site factors.
    pub fn product_expectation(&self, state: &[C64], frame: Frame<'_>, term: &ProductTerm) -> Result<C64> {
        self.check_state(state, frame)?;
        let mut v = state.to_vec();
        for (site, op) in term.grouped_factors(self.d)?.iter().rev() {
            if *site >= self.n_sites {
                return Err(Error::InvalidParameter(format!("site {site} outside chain of {}", self.n_sites)));
            }
            v = match frame {
                Frame::Qudit => apply_local(&v, self.d, self.n_sites, *site, 1, op),
                Frame::Encoded(e) => {
                    let mapped = e.encode_matrix(op, 1)?;
                    apply_local(&v, 1 << e.qubits_per_site(), self.n_sites, *site, 1, &mapped)
                }
            };
        }
        Ok(term.coeff * inner(state, &v))
    }

    fn spin(&self) -> Result<&SpinMatrices> {
        self.spin
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("order parameters need a spin chain".into()))
    }

    fn bbh_bond(&self) -> Result<CMatrix> {
        match &self.descriptor {
            ModelDescriptor::Bbh(p) => Ok(bbh_bond(self.spin()?, p)),
            _ => Err(Error::InvalidParameter("dimer order needs a BBH model".into())),
        }
    }

    /// `|⟨H_i⟩ − ⟨H_{i+1}⟩|` where `H_i` couples sites `i` and `i+1`
    /// (1-based).
    pub fn dimer_order(&self, state: &[C64], frame: Frame<'_>, i: usize) -> Result<f64> {
        if i == 0 || i + 2 > self.n_sites {
            return Err(Error::InvalidParameter(format!(
                "dimer order at bond {i} needs bonds {i} and {} on a chain of {}",
                i + 1,
                self.n_sites
            )));
        }
        let bond = self.bbh_bond()?;
        let a = self.local_expectation(state, frame, i - 1, 2, &bond)?;
        let b = self.local_expectation(state, frame, i, 2, &bond)?;
        Ok((a - b).re.abs())
    }

    /// `⟨S^z_i · Π_{i<j<i+r} e^{iπS^z_j} · S^z_{i+r}⟩` (1-based `i`).
    pub fn string_order(&self, state: &[C64], frame: Frame<'_>, i: usize, r: usize) -> Result<f64> {
        if i == 0 || r == 0 || i + r > self.n_sites {
            return Err(Error::InvalidParameter(format!(
                "string from site {i} of length {r} does not fit a chain of {}",
                self.n_sites
            )));
        }
        let sm = self.spin()?;
        let phase = sm.string_phase();
        let mut factors = vec![(i - 1, sm.sz.clone())];
        for j in i..i + r - 1 {
            factors.push((j, phase.clone()));
        }
        factors.push((i + r - 1, sm.sz.clone()));
        let value = self.product_expectation(state, frame, &ProductTerm { coeff: C64::new(1.0, 0.0), factors })?;
        Ok(value.re)
    }

    /// `(1/N) Σ_{k,l} e^{iq(k−l)} ⟨(S^z_k)² (S^z_l)²⟩`, diagonal included.
    pub fn nematic_structure_factor(&self, state: &[C64], frame: Frame<'_>, q: f64) -> Result<f64> {
        let sm = self.spin()?;
        let sz2 = &sm.sz * &sm.sz;
        let n = self.n_sites;
        let mut total = C64::default();
        for k in 0..n {
            for l in 0..n {
                let term = ProductTerm { coeff: C64::new(1.0, 0.0), factors: vec![(k, sz2.clone()), (l, sz2.clone())] };
                let phase = C64::from_polar(1.0, q * (k as f64 - l as f64));
                total += phase * self.product_expectation(state, frame, &term)?;
            }
        }
        Ok(total.re / n as f64)
    }
}

/// The basis a state is expressed in when evaluating model observables.
#[derive(Clone, Copy, Debug)]
pub enum Frame<'a> {
    Qudit,
    Encoded(&'a Encoder),
}

/// Default string-order window: start at site 2, span `N − 3`.
pub fn default_string_window(n_sites: usize) -> (usize, usize) {
    (2, n_sites.saturating_sub(3).max(1))
}

fn bbh_bond(sm: &SpinMatrices, p: &BbhParams) -> CMatrix {
    let ss = sm.heisenberg_bond();
    let ss2 = &ss * &ss;
    (ss * C64::new(p.theta.cos(), 0.0) + ss2 * C64::new(p.theta.sin(), 0.0)) * C64::new(p.j, 0.0)
}

fn spin_symmetries(sm: &SpinMatrices, n: usize) -> Vec<(String, Vec<ProductTerm>)> {
    let one = C64::new(1.0, 0.0);
    let sz_tot = (0..n).map(|i| ProductTerm { coeff: one, factors: vec![(i, sm.sz.clone())] }).collect();
    let mut s2 = Vec::with_capacity(3 * n * n);
    for a in [&sm.sx, &sm.sy, &sm.sz] {
        for i in 0..n {
            for j in 0..n {
                s2.push(ProductTerm { coeff: one, factors: vec![(i, a.clone()), (j, a.clone())] });
            }
        }
    }
    vec![("S_tot_z".to_string(), sz_tot), ("S_tot_sq".to_string(), s2)]
}

pub fn bbh_model(p: &BbhParams) -> Result<QuditModel> {
    if p.n < 2 {
        return Err(Error::InvalidParameter(format!("chain needs at least 2 sites, got {}", p.n)));
    }
    if !(p.theta.abs() <= std::f64::consts::PI + 1e-12) {
        return Err(Error::InvalidParameter(format!("theta must lie in [-π, π], got {}", p.theta)));
    }
    let sm = spin_matrices(p.s)?;
    let bond = bbh_bond(&sm, p);
    let terms = (0..p.n - 1).map(|i| LocalTerm { site: i, span: 2, matrix: bond.clone() }).collect();
    Ok(QuditModel {
        d: sm.dim(),
        n_sites: p.n,
        terms,
        symmetries: spin_symmetries(&sm, p.n),
        descriptor: ModelDescriptor::Bbh(p.clone()),
        spin: Some(sm),
    })
}

pub fn bose_hubbard_model(p: &BoseHubbardParams) -> Result<QuditModel> {
    if p.d_trunc < 2 {
        return Err(Error::InvalidParameter(format!("truncation must be at least 2, got {}", p.d_trunc)));
    }
    if p.n < 1 {
        return Err(Error::InvalidParameter("lattice needs at least one site".into()));
    }
    if let Some(nb) = p.n_bos {
        if nb > p.n * (p.d_trunc - 1) {
            return Err(Error::InvalidParameter(format!(
                "{nb} bosons do not fit {} sites truncated at {} levels",
                p.n, p.d_trunc
            )));
        }
    }
    let a = annihilation(p.d_trunc);
    let ad = a.adjoint();
    let num = number_operator(p.d_trunc);
    let id = CMatrix::identity(p.d_trunc, p.d_trunc);
    let hop = (kron(&ad, &a) + kron(&a, &ad)) * C64::new(-p.t, 0.0);
    let onsite = (&num * (&num - &id)) * C64::new(p.u / 2.0, 0.0);
    let mut terms = Vec::new();
    for i in 0..p.n {
        if p.u != 0.0 {
            terms.push(LocalTerm { site: i, span: 1, matrix: onsite.clone() });
        }
        if i + 1 < p.n {
            terms.push(LocalTerm { site: i, span: 2, matrix: hop.clone() });
        }
    }
    let w = (0..p.n).map(|i| ProductTerm { coeff: C64::new(1.0, 0.0), factors: vec![(i, num.clone())] }).collect();
    Ok(QuditModel {
        d: p.d_trunc,
        n_sites: p.n,
        terms,
        symmetries: vec![("N_tot".to_string(), w)],
        descriptor: ModelDescriptor::BoseHubbard(p.clone()),
        spin: None,
    })
}

/// Sparse `Σ 𝕀 ⊗ A ⊗ 𝕀` over local operators on a register of qudits.
pub fn terms_to_sparse<'a>(
    d: usize,
    n_sites: usize,
    terms: impl Iterator<Item = (usize, usize, &'a CMatrix)>,
) -> SparseOperator {
    let dim = d.pow(n_sites as u32);
    let mut triplets = Vec::new();
    for (site, span, m) in terms {
        let local = d.pow(span as u32);
        let suffix = d.pow((n_sites - site - span) as u32);
        for row in 0..dim {
            let p = row / (local * suffix);
            let r = (row / suffix) % local;
            let s = row % suffix;
            for c in 0..local {
                let v = m[(r, c)];
                if v.norm() > 0.0 {
                    triplets.push((row, (p * local + c) * suffix + s, v));
                }
            }
        }
    }
    SparseOperator::from_triplets(dim, triplets)
}

/// Sparse form of a sum of single-site products on a qudit register.
pub fn products_to_sparse(d: usize, n_sites: usize, terms: &[ProductTerm]) -> Result<SparseOperator> {
    let dim = d.pow(n_sites as u32);
    let mut triplets = Vec::new();
    let mut e = vec![C64::default(); dim];
    let grouped: Vec<Vec<(usize, CMatrix)>> =
        terms.iter().map(|t| t.grouped_factors(d)).collect::<Result<_>>()?;
    for col in 0..dim {
        e.iter_mut().for_each(|x| *x = C64::default());
        e[col] = C64::new(1.0, 0.0);
        for (term, factors) in terms.iter().zip(&grouped) {
            let mut v = e.clone();
            for (site, op) in factors.iter().rev() {
                v = apply_local(&v, d, n_sites, *site, 1, op);
            }
            for (row, x) in v.iter().enumerate() {
                if x.norm() > 0.0 {
                    triplets.push((row, col, term.coeff * x));
                }
            }
        }
    }
    Ok(SparseOperator::from_triplets(dim, triplets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigh;

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn spin_algebra() {
        for s in [0.5, 1.0, 1.5, 2.0] {
            let m = spin_matrices(s).unwrap();
            let i = C64::new(0.0, 1.0);
            let comm = |a: &CMatrix, b: &CMatrix| a * b - b * a;
            assert!(max_abs(&(comm(&m.sx, &m.sy) - &m.sz * i)) < 1e-12);
            assert!(max_abs(&(comm(&m.sy, &m.sz) - &m.sx * i)) < 1e-12);
            assert!(max_abs(&(comm(&m.sz, &m.sx) - &m.sy * i)) < 1e-12);
            let cas = &m.sx * &m.sx + &m.sy * &m.sy + &m.sz * &m.sz;
            let d = m.dim();
            assert!(max_abs(&(cas - CMatrix::identity(d, d) * C64::new(s * (s + 1.0), 0.0))) < 1e-12);
        }
    }

    #[test]
    fn printed_spin_matrices() {
        let s1 = spin_matrices(1.0).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(s1.sz[(0, 0)].re, 1.0);
        assert_eq!(s1.sz[(2, 2)].re, -1.0);
        assert!((s1.sx[(0, 1)].re - r).abs() < 1e-15);
        assert!((s1.sy[(0, 1)] - C64::new(0.0, -r)).norm() < 1e-15);

        let s32 = spin_matrices(1.5).unwrap();
        assert_eq!(s32.sz[(1, 1)].re, 0.5);
        assert!((s32.sx[(0, 1)].re - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((s32.sx[(1, 2)].re - 1.0).abs() < 1e-15);

        let half = spin_matrices(0.5).unwrap();
        assert!((half.sx[(0, 1)].re - 0.5).abs() < 1e-15);
        assert!(spin_matrices(0.3).is_err());
    }

    #[test]
    fn two_site_ground_energies() {
        let e0 = |theta: f64| {
            let m = bbh_model(&BbhParams::new(theta, 2)).unwrap();
            hermitian_eigh(&m.hamiltonian_dense()).0[0]
        };
        assert!((e0(0.0) + 2.0).abs() < 1e-12);
        assert!((e0(std::f64::consts::FRAC_PI_2) - 1.0).abs() < 1e-12);
        let zero = bbh_model(&BbhParams { j: 0.0, ..BbhParams::new(0.3, 3) }).unwrap();
        assert_eq!(zero.hamiltonian_sparse().nnz(), 0);
    }

    #[test]
    fn bose_hubbard_operators() {
        let a = annihilation(4);
        assert!((a[(2, 3)].re - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(number_operator(4)[(3, 3)].re, 3.0);

        let m = bose_hubbard_model(&BoseHubbardParams { t: 1.0, u: 0.0, n: 2, d_trunc: 2, n_bos: Some(1) }).unwrap();
        let basis = m.level_sum_basis(1);
        let h = m.hamiltonian_dense();
        let block = CMatrix::from_fn(basis.len(), basis.len(), |r, c| h[(basis[r], basis[c])]);
        assert!((hermitian_eigh(&block).0[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn conserved_quantities() {
        for n in [2, 3] {
            let h = bbh_model(&BbhParams::new(0.41, n)).unwrap();
            let hs = h.hamiltonian_sparse();
            for name in ["S_tot_z", "S_tot_sq"] {
                assert!(hs.commutator_norm(&h.symmetry_sparse(name).unwrap()).unwrap() < 1e-10);
            }
            let bh = bose_hubbard_model(&BoseHubbardParams { t: 1.0, u: 2.5, n, d_trunc: 4, n_bos: None }).unwrap();
            let w = bh.symmetry_sparse("N_tot").unwrap();
            assert!(bh.hamiltonian_sparse().commutator_norm(&w).unwrap() < 1e-10);
        }
    }

    #[test]
    fn ferromagnetic_state_is_eigenstate() {
        let m = bbh_model(&BbhParams::new(std::f64::consts::PI, 4)).unwrap();
        let psi = m.product_state(&[0; 4]).unwrap();
        let hpsi = m.hamiltonian_sparse().apply(&psi).unwrap();
        let e = inner(&psi, &hpsi);
        let (vals, _) = hermitian_eigh(&m.hamiltonian_dense());
        for (a, b) in hpsi.iter().zip(&psi) {
            assert!((a - e * b).norm() < 1e-10);
        }
        assert!((e.re - vals[0]).abs() < 1e-10);
    }

    #[test]
    fn order_parameters_on_product_states() {
        let m = bbh_model(&BbhParams::new(0.2, 6)).unwrap();
        let flat = m.product_state(&[1; 6]).unwrap();
        assert!(m.dimer_order(&flat, Frame::Qudit, 2).unwrap().abs() < 1e-14);
        assert_eq!(m.string_order(&flat, Frame::Qudit, 2, 3).unwrap(), 0.0);
        assert_eq!(m.nematic_structure_factor(&flat, Frame::Qudit, 2.0 * std::f64::consts::PI / 3.0).unwrap(), 0.0);

        let up = m.product_state(&[0; 6]).unwrap();
        assert!((m.nematic_structure_factor(&up, Frame::Qudit, 0.0).unwrap() - 6.0).abs() < 1e-12);
        // r = 1 has an empty string: ⟨S^z_2 S^z_3⟩ = 1 on the polarized state.
        assert!((m.string_order(&up, Frame::Qudit, 2, 1).unwrap() - 1.0).abs() < 1e-12);

        let short = bbh_model(&BbhParams::new(0.2, 3)).unwrap();
        let s = short.product_state(&[1; 3]).unwrap();
        assert!(short.dimer_order(&s, Frame::Qudit, 2).is_err());
    }

    #[test]
    fn encoded_frame_agrees_with_qudit_frame() {
        let m = bbh_model(&BbhParams::new(-0.4, 4)).unwrap();
        let h = m.hamiltonian_dense();
        let (_, vecs) = hermitian_eigh(&h);
        let gs: Vec<C64> = vecs.column(0).iter().copied().collect();
        for enc in [Encoder::binary(3).unwrap(), Encoder::symmetry(3).unwrap()] {
            let q = enc.encode_state(&gs, 4).unwrap();
            let a = m.dimer_order(&gs, Frame::Qudit, 2).unwrap();
            let b = m.dimer_order(&q, Frame::Encoded(&enc), 2).unwrap();
            assert!((a - b).abs() < 1e-12);
            let a = m.string_order(&gs, Frame::Qudit, 1, 3).unwrap();
            let b = m.string_order(&q, Frame::Encoded(&enc), 1, 3).unwrap();
            assert!((a - b).abs() < 1e-12);
            let a = m.nematic_structure_factor(&gs, Frame::Qudit, 1.0).unwrap();
            let b = m.nematic_structure_factor(&q, Frame::Encoded(&enc), 1.0).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn descriptor_json() {
        let d: ModelDescriptor = serde_json::from_str(r#"{"type":"bbh","theta":0.5,"N":4}"#).unwrap();
        assert_eq!(d, ModelDescriptor::Bbh(BbhParams::new(0.5, 4)));
        let d: ModelDescriptor =
            serde_json::from_str(r#"{"type":"bose_hubbard","U":2.0,"N":3,"d_trunc":4,"n_bos":3}"#).unwrap();
        assert!(matches!(d, ModelDescriptor::BoseHubbard(BoseHubbardParams { n_bos: Some(3), .. })));
        assert!(serde_json::from_str::<ModelDescriptor>(r#"{"type":"bbh","theta":0.5,"N":4,"x":1}"#).is_err());
    }
}
