//! Exact references: spectra, ground manifolds, eigenstate ranks, exact time
//! evolution and encoded-versus-qudit ground-state fidelities.
//!
//! Hamiltonians here conserve something (total `S^z`, particle number), so
//! their nonzero pattern splits into many small connected blocks. Each block
//! is diagonalized densely; blocks larger than [`DENSE_BLOCK_CAP`] fall back to
//! Lanczos for the extremal end only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::encoding::Encoder;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigh, inner, norm};
use crate::models::QuditModel;
use crate::sparse::SparseOperator;
use crate::{CMatrix, C64};

/// Eigenvalues within this distance of the minimum form the ground manifold.
pub const DEGENERACY_TOL: f64 = 1e-8;
pub const DENSE_BLOCK_CAP: usize = 4096;

/// Connected components of the operator's nonzero graph restricted to
/// `subset` (all indices when `None`). Each component is sorted.
pub fn connected_blocks(op: &SparseOperator, subset: Option<&[usize]>) -> Vec<Vec<usize>> {
    let dim = op.dim();
    let mut allowed = vec![subset.is_none(); dim];
    if let Some(s) = subset {
        s.iter().for_each(|&i| allowed[i] = true);
    }
    let mut seen = vec![false; dim];
    let mut blocks = Vec::new();
    for start in 0..dim {
        if !allowed[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut block = Vec::new();
        while let Some(r) = stack.pop() {
            block.push(r);
            for (c, _) in op.row(r) {
                if allowed[c] && !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        block.sort_unstable();
        blocks.push(block);
    }
    blocks
}

fn dense_block(op: &SparseOperator, indices: &[usize]) -> Result<CMatrix> {
    let mut local = std::collections::HashMap::with_capacity(indices.len());
    for (k, &i) in indices.iter().enumerate() {
        local.insert(i, k);
    }
    let n = indices.len();
    let mut m = CMatrix::zeros(n, n);
    for (r, &i) in indices.iter().enumerate() {
        for (c, v) in op.row(i) {
            if let Some(&k) = local.get(&c) {
                m[(r, k)] += v;
            }
        }
    }
    let asym = (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .map(|(r, c)| (m[(r, c)] - m[(c, r)].conj()).norm())
        .fold(0.0, f64::max);
    if asym > 1e-10 {
        return Err(Error::InvalidParameter(format!("operator is not Hermitian (asymmetry {asym:e})")));
    }
    Ok(m)
}

#[derive(Clone, Debug)]
struct Block {
    indices: Vec<usize>,
    values: Vec<f64>,
    vectors: CMatrix,
}

/// Full spectrum stored block by block, with a global ascending order.
#[derive(Clone, Debug)]
pub struct Spectrum {
    dim: usize,
    blocks: Vec<Block>,
    order: Vec<(usize, usize)>,
    values: Vec<f64>,
    tol: f64,
}

impl Spectrum {
    /// Full spectrum of a Hermitian operator.
    pub fn of(op: &SparseOperator) -> Result<Self> {
        Self::restricted(op, None)
    }

    /// Spectrum of the operator restricted to the span of `subset` basis states
    /// (which must be an invariant subspace for the result to be meaningful).
    pub fn restricted(op: &SparseOperator, subset: Option<&[usize]>) -> Result<Self> {
        let groups = connected_blocks(op, subset);
        if let Some(big) = groups.iter().find(|b| b.len() > DENSE_BLOCK_CAP) {
            return Err(Error::Capacity { width: big.len(), cap: DENSE_BLOCK_CAP });
        }
        let blocks = groups
            .into_par_iter()
            .map(|indices| {
                let m = dense_block(op, &indices)?;
                let (values, vectors) = hermitian_eigh(&m);
                Ok(Block { indices, values, vectors })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::assemble(op.dim(), blocks))
    }

    pub fn from_dense(m: &CMatrix) -> Result<Self> {
        let op = SparseOperator::from_dense(m)?;
        let mut s = Self::of(&op)?;
        s.dim = m.nrows();
        Ok(s)
    }

    fn assemble(dim: usize, blocks: Vec<Block>) -> Self {
        let mut order: Vec<(usize, usize)> = blocks
            .iter()
            .enumerate()
            .flat_map(|(b, blk)| (0..blk.values.len()).map(move |c| (b, c)))
            .collect();
        order.sort_by(|&(b1, c1), &(b2, c2)| {
            blocks[b1].values[c1]
                .total_cmp(&blocks[b2].values[c2])
                .then(blocks[b1].indices[0].cmp(&blocks[b2].indices[0]))
                .then(c1.cmp(&c2))
        });
        let values = order.iter().map(|&(b, c)| blocks[b].values[c]).collect();
        Self { dim, blocks, order, values, tol: DEGENERACY_TOL }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.indices.len()).collect()
    }

    /// The `k`-th eigenvector (0-based, ascending order) in the full basis.
    pub fn eigenvector(&self, k: usize) -> Vec<C64> {
        let (b, c) = self.order[k];
        let blk = &self.blocks[b];
        let mut v = vec![C64::default(); self.dim];
        for (r, &i) in blk.indices.iter().enumerate() {
            v[i] = blk.vectors[(r, c)];
        }
        v
    }

    pub fn ground_energy(&self) -> f64 {
        self.values[0]
    }

    /// Number of eigenvalues within the tolerance of the minimum.
    pub fn ground_degeneracy(&self) -> usize {
        self.cluster(0).1 + 1
    }

    pub fn ground_manifold(&self) -> GroundManifold {
        let k = self.ground_degeneracy();
        GroundManifold { energy: self.values[0], states: (0..k).map(|i| self.eigenvector(i)).collect() }
    }

    /// First and last (0-based) positions of eigenvalues within the tolerance of
    /// eigenvalue `k`, chained through neighbours.
    pub fn cluster(&self, k: usize) -> (usize, usize) {
        let mut lo = k;
        while lo > 0 && self.values[lo] - self.values[lo - 1] <= self.tol {
            lo -= 1;
        }
        let mut hi = k;
        while hi + 1 < self.values.len() && self.values[hi + 1] - self.values[hi] <= self.tol {
            hi += 1;
        }
        (lo, hi)
    }

    /// `|⟨v_k|target⟩|²` for every eigenvector, in ascending eigenvalue order.
    pub fn overlaps(&self, target: &[C64]) -> Result<Vec<f64>> {
        if target.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: target.len() });
        }
        Ok(self
            .order
            .iter()
            .map(|&(b, c)| {
                let blk = &self.blocks[b];
                blk.indices
                    .iter()
                    .enumerate()
                    .map(|(r, &i)| blk.vectors[(r, c)].conj() * target[i])
                    .sum::<C64>()
                    .norm_sqr()
            })
            .collect())
    }

    /// Position of the eigenvector with maximal overlap with `target`.
    pub fn eigenstate_rank(&self, target: &[C64], threshold: f64) -> Result<RankReport> {
        let ov = self.overlaps(target)?;
        let mut best = 0;
        for (k, &o) in ov.iter().enumerate() {
            if o > ov[best] {
                best = k;
            }
        }
        if ov.is_empty() || ov[best] <= threshold {
            return Err(Error::NoOverlap { threshold });
        }
        let (lo, hi) = self.cluster(best);
        Ok(RankReport {
            rank: best + 1,
            overlap: ov[best],
            cluster_first: lo + 1,
            cluster_last: hi + 1,
            cluster_overlap: ov[lo..=hi].iter().sum(),
            energy: self.values[best],
        })
    }

    /// `e^{−iHt}|ψ₀⟩` through the eigenbasis.
    pub fn evolve(&self, psi0: &[C64], t: f64) -> Result<Vec<C64>> {
        if psi0.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: psi0.len() });
        }
        let mut out = vec![C64::default(); self.dim];
        for blk in &self.blocks {
            let n = blk.indices.len();
            let local: Vec<C64> = blk.indices.iter().map(|&i| psi0[i]).collect();
            if local.iter().all(|x| x.norm_sqr() == 0.0) {
                continue;
            }
            for c in 0..n {
                let amp: C64 = (0..n).map(|r| blk.vectors[(r, c)].conj() * local[r]).sum();
                let amp = amp * C64::from_polar(1.0, -blk.values[c] * t);
                for (r, &i) in blk.indices.iter().enumerate() {
                    out[i] += blk.vectors[(r, c)] * amp;
                }
            }
        }
        Ok(out)
    }

    /// Largest `‖Hv − λv‖` over all eigenpairs.
    pub fn max_residual(&self, op: &SparseOperator) -> Result<f64> {
        (0..self.len())
            .into_par_iter()
            .map(|k| {
                let v = self.eigenvector(k);
                let hv = op.apply(&v)?;
                Ok(norm(&hv.iter().zip(&v).map(|(a, b)| a - b * self.values[k]).collect::<Vec<_>>()))
            })
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "dim": self.dim,
            "degeneracy_tol": self.tol,
            "eigenvalues": self.values,
            "block_sizes": self.block_sizes(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankReport {
    /// 1-based position of the best-overlap eigenvector.
    pub rank: usize,
    pub overlap: f64,
    /// 1-based bounds of the degenerate cluster containing `rank`.
    pub cluster_first: usize,
    pub cluster_last: usize,
    /// Total overlap carried by that cluster.
    pub cluster_overlap: f64,
    pub energy: f64,
}

#[derive(Clone, Debug)]
pub struct GroundManifold {
    pub energy: f64,
    pub states: Vec<Vec<C64>>,
}

impl GroundManifold {
    pub fn degeneracy(&self) -> usize {
        self.states.len()
    }

    /// `Σ_k |⟨m_k|ψ⟩|²`.
    pub fn fidelity(&self, state: &[C64]) -> f64 {
        manifold_fidelity(state, &self.states)
    }

    /// Images of the manifold under an encoder.
    pub fn encoded(&self, encoder: &Encoder, n_sites: usize) -> Result<GroundManifold> {
        Ok(GroundManifold {
            energy: self.energy,
            states: self.states.iter().map(|s| encoder.encode_state(s, n_sites)).collect::<Result<_>>()?,
        })
    }
}

/// Ground manifold of a Hermitian operator, optionally restricted to an
/// invariant set of basis states. Blocks up to [`DENSE_BLOCK_CAP`] are solved
/// densely; larger ones by deflated Lanczos.
pub fn ground_manifold(op: &SparseOperator, subset: Option<&[usize]>, tol: f64) -> Result<GroundManifold> {
    let groups = connected_blocks(op, subset);
    // Each block keeps its own lowest cluster; the global cut comes after.
    let per_block: Vec<Vec<(f64, Vec<C64>)>> = groups
        .into_par_iter()
        .map(|indices| {
            if indices.len() <= DENSE_BLOCK_CAP {
                let m = dense_block(op, &indices)?;
                let (values, vectors) = hermitian_eigh(&m);
                let lowest = values[0];
                Ok((0..values.len())
                    .take_while(|&c| values[c] - lowest <= tol)
                    .map(|c| {
                        let mut v = vec![C64::default(); op.dim()];
                        for (r, &i) in indices.iter().enumerate() {
                            v[i] = vectors[(r, c)];
                        }
                        (values[c], v)
                    })
                    .collect())
            } else {
                let (e, states) = lanczos_manifold(op, &indices, tol)?;
                Ok(states.into_iter().map(|v| (e, v)).collect())
            }
        })
        .collect::<Result<_>>()?;
    let energy = per_block.iter().flatten().map(|(e, _)| *e).fold(f64::INFINITY, f64::min);
    if !energy.is_finite() {
        return Err(Error::InvalidParameter("empty operator domain".into()));
    }
    let states = per_block
        .into_iter()
        .flatten()
        .filter(|(e, _)| e - energy <= tol)
        .map(|(_, v)| v)
        .collect();
    Ok(GroundManifold { energy, states })
}

/// Lowest eigenvalue cluster of the operator restricted to `indices`, found
/// by repeated Lanczos runs deflating already-found vectors.
fn lanczos_manifold(op: &SparseOperator, indices: &[usize], tol: f64) -> Result<(f64, Vec<Vec<C64>>)> {
    let mut found: Vec<Vec<C64>> = Vec::new();
    let mut energy = f64::INFINITY;
    for attempt in 0..indices.len() {
        let (e, v) = lanczos_lowest(op, indices, &found, attempt as u64)?;
        if found.is_empty() {
            energy = e;
        } else if e - energy > tol.max(1e-7) {
            break;
        }
        found.push(v);
    }
    Ok((energy, found))
}

/// Lowest eigenpair of `op` on the span of `indices`, orthogonal to `deflate`.
pub fn lanczos_lowest(
    op: &SparseOperator,
    indices: &[usize],
    deflate: &[Vec<C64>],
    seed: u64,
) -> Result<(f64, Vec<C64>)> {
    let dim = op.dim();
    let mut mask = vec![false; dim];
    indices.iter().for_each(|&i| mask[i] = true);
    let project = |v: &mut Vec<C64>| {
        for (x, &m) in v.iter_mut().zip(&mask) {
            if !m {
                *x = C64::default();
            }
        }
        for d in deflate {
            let a = inner(d, v);
            v.iter_mut().zip(d).for_each(|(x, y)| *x -= a * y);
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a2c_05 ^ seed);
    let mut v: Vec<C64> = (0..dim).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    project(&mut v);
    let n0 = norm(&v);
    if n0 < 1e-12 {
        return Err(Error::Factorization("Lanczos start vector vanished after deflation".into()));
    }
    v.iter_mut().for_each(|x| *x /= n0);
    let steps = (indices.len().saturating_sub(deflate.len())).clamp(1, 120);
    for _restart in 0..200 {
        let mut basis: Vec<Vec<C64>> = vec![v.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for j in 0..steps {
            let mut w = op.apply(&basis[j])?;
            project(&mut w);
            let a = inner(&basis[j], &w).re;
            alpha.push(a);
            for _ in 0..2 {
                for b in &basis {
                    let c = inner(b, &w);
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let bnorm = norm(&w);
            if j + 1 == steps || bnorm < 1e-12 {
                break;
            }
            beta.push(bnorm);
            basis.push(w.into_iter().map(|x| x / bnorm).collect());
        }
        let m = alpha.len();
        let t = nalgebra::DMatrix::<f64>::from_fn(m, m, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let eig = nalgebra::SymmetricEigen::new(t);
        let k = (0..m).min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
        let theta = eig.eigenvalues[k];
        let mut x = vec![C64::default(); dim];
        for (i, b) in basis.iter().enumerate().take(m) {
            let s = eig.eigenvectors[(i, k)];
            x.iter_mut().zip(b).for_each(|(xv, bv)| *xv += bv * s);
        }
        project(&mut x);
        let nx = norm(&x);
        x.iter_mut().for_each(|e| *e /= nx);
        let mut hx = op.apply(&x)?;
        project(&mut hx);
        let res = norm(&hx.iter().zip(&x).map(|(a, b)| a - b * theta).collect::<Vec<_>>());
        if res < 1e-10 || m == indices.len() - deflate.len().min(indices.len()) {
            return Ok((theta, x));
        }
        v = x;
    }
    Err(Error::Factorization("Lanczos did not converge".into()))
}

/// `Σ_k |⟨m_k|ψ⟩|²` over orthonormal manifold states.
pub fn manifold_fidelity(state: &[C64], manifold: &[Vec<C64>]) -> f64 {
    manifold.iter().map(|m| inner(m, state).norm_sqr()).sum()
}

/// `tr(P_a P_b)` for two orthonormal sets.
pub fn subspace_overlap(a: &[Vec<C64>], b: &[Vec<C64>]) -> f64 {
    a.iter().map(|x| manifold_fidelity(x, b)).sum()
}

/// `e^{−iHt}|ψ₀⟩`.
pub fn exact_evolve(op: &SparseOperator, psi0: &[C64], t: f64) -> Result<Vec<C64>> {
    Spectrum::of(op)?.evolve(psi0, t)
}

/// Exact reference for a qudit model: its ground manifold (within the
/// model's particle sector if one is set).
pub fn qudit_ground_manifold(model: &QuditModel) -> Result<GroundManifold> {
    let h = model.hamiltonian_sparse();
    match model.particle_sector() {
        Some(nb) => ground_manifold(&h, Some(&model.level_sum_basis(nb)), DEGENERACY_TOL),
        None => ground_manifold(&h, None, DEGENERACY_TOL),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FidelityPoint {
    pub theta: f64,
    pub qudit_energy: f64,
    pub qubit_energy: f64,
    pub qudit_degeneracy: usize,
    pub qubit_degeneracy: usize,
    /// `tr(P_qubit P_encoded) / dim(qudit manifold)`; `|⟨E₁|T|Ẽ₁⟩|²` when both
    /// ground states are unique.
    pub fidelity: f64,
}

/// Compares the qubit ground manifold with the encoded qudit ground manifold.
pub fn ground_state_fidelity(model: &QuditModel, encoder: &Encoder) -> Result<FidelityPoint> {
    let theta = match &model.descriptor {
        crate::models::ModelDescriptor::Bbh(p) => p.theta,
        _ => f64::NAN,
    };
    let qudit = qudit_ground_manifold(model)?;
    let encoded = qudit.encoded(encoder, model.n_sites)?;
    let h = SparseOperator::from_pauli_sum(&encoder.encode_hamiltonian(model)?);
    let qubit = ground_manifold(&h, None, DEGENERACY_TOL)?;
    Ok(FidelityPoint {
        theta,
        qudit_energy: qudit.energy,
        qubit_energy: qubit.energy,
        qudit_degeneracy: qudit.degeneracy(),
        qubit_degeneracy: qubit.degeneracy(),
        fidelity: subspace_overlap(&qubit.states, &encoded.states) / qudit.degeneracy() as f64,
    })
}

/// [`ground_state_fidelity`] over a grid of mixing angles.
pub fn fidelity_map(
    thetas: &[f64],
    build: impl Fn(f64) -> Result<QuditModel> + Sync,
    encoder: &Encoder,
) -> Result<Vec<FidelityPoint>> {
    thetas.iter().map(|&t| ground_state_fidelity(&build(t)?, encoder)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{bbh_model, BbhParams};

    fn diag(values: &[f64]) -> SparseOperator {
        SparseOperator::from_triplets(
            values.len(),
            values.iter().enumerate().map(|(i, &v)| (i, i, C64::new(v, 0.0))).collect(),
        )
    }

    #[test]
    fn two_site_spin_one() {
        let m = bbh_model(&BbhParams::new(0.0, 2)).unwrap();
        let gm = qudit_ground_manifold(&m).unwrap();
        assert_eq!(gm.degeneracy(), 1);
        assert!((gm.energy + 2.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_operator() {
        let op = diag(&[3.0, -1.0, 2.0]);
        let gm = ground_manifold(&op, None, DEGENERACY_TOL).unwrap();
        assert_eq!(gm.degeneracy(), 1);
        assert!((gm.states[0][1].norm() - 1.0).abs() < 1e-15);
        let s = Spectrum::of(&op).unwrap();
        assert_eq!(s.values(), &[-1.0, 2.0, 3.0]);
        let psi = vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::default()];
        let out = s.evolve(&psi, 1.3).unwrap();
        for (a, b) in out.iter().zip(&psi) {
            assert!((a.norm() - b.norm()).abs() < 1e-15);
        }
        assert_eq!(s.evolve(&psi, 0.0).unwrap(), psi);
    }

    #[test]
    fn rank_of_lowest_and_orthogonal_targets() {
        let m = bbh_model(&BbhParams::new(0.7, 3)).unwrap();
        let h = m.hamiltonian_sparse();
        let s = Spectrum::of(&h).unwrap();
        assert!(s.max_residual(&h).unwrap() < 1e-9);
        let r = s.eigenstate_rank(&s.eigenvector(0), 0.5).unwrap();
        assert_eq!(r.rank, 1);
        let zero = vec![C64::default(); s.dim()];
        assert!(matches!(s.eigenstate_rank(&zero, 1e-6), Err(Error::NoOverlap { .. })));
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let m = bbh_model(&BbhParams::new(-0.9, 5)).unwrap();
        let h = m.hamiltonian_sparse();
        let all: Vec<usize> = (0..h.dim()).collect();
        let dense = Spectrum::of(&h).unwrap();
        let (e, v) = lanczos_lowest(&h, &all, &[], 1).unwrap();
        assert!((e - dense.ground_energy()).abs() < 1e-9);
        assert!((norm(&v) - 1.0).abs() < 1e-12);
        let (e_manifold, states) = lanczos_manifold(&h, &all, DEGENERACY_TOL).unwrap();
        assert!((e_manifold - dense.ground_energy()).abs() < 1e-9);
        assert_eq!(states.len(), dense.ground_degeneracy());
    }

    #[test]
    fn encoded_two_site_fidelity() {
        let m = bbh_model(&BbhParams::new(-0.5 * std::f64::consts::PI, 2)).unwrap();
        for enc in [Encoder::binary(3).unwrap(), Encoder::symmetry(3).unwrap()] {
            let p = ground_state_fidelity(&m, &enc).unwrap();
            assert!((p.fidelity - 1.0).abs() < 1e-10, "{p:?}");
        }
    }
}
