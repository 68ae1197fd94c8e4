//! Small dense helpers shared by the encoders, models and the oracle.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{CMatrix, C64};

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_power(a: &CMatrix, k: usize) -> CMatrix {
    let mut out = CMatrix::identity(1, 1);
    for _ in 0..k {
        out = out.kronecker(a);
    }
    out
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(a: &mut [C64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        a.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Applies `map` (out × in) to the middle index of a state laid out as
/// `prefix × in × suffix`, producing `prefix × out × suffix`.
pub fn apply_site_map(state: &[C64], prefix: usize, suffix: usize, map: &CMatrix) -> Vec<C64> {
    let (n_out, n_in) = map.shape();
    debug_assert_eq!(state.len(), prefix * n_in * suffix);
    let mut out = vec![C64::default(); prefix * n_out * suffix];
    for p in 0..prefix {
        for c in 0..n_in {
            let src = &state[(p * n_in + c) * suffix..(p * n_in + c + 1) * suffix];
            if src.iter().all(|x| x.re == 0.0 && x.im == 0.0) {
                continue;
            }
            for r in 0..n_out {
                let m = map[(r, c)];
                if m.re == 0.0 && m.im == 0.0 {
                    continue;
                }
                let dst = &mut out[(p * n_out + r) * suffix..(p * n_out + r + 1) * suffix];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += m * s;
                }
            }
        }
    }
    out
}

/// Applies a square operator acting on sites `first..first + span` of a
/// register of `n_sites` sites with `site_dim` levels each.
pub fn apply_local(
    state: &[C64],
    site_dim: usize,
    n_sites: usize,
    first: usize,
    span: usize,
    op: &CMatrix,
) -> Vec<C64> {
    assert!(first + span <= n_sites, "local operator runs past the last site");
    let prefix = site_dim.pow(first as u32);
    let suffix = site_dim.pow((n_sites - first - span) as u32);
    apply_site_map(state, prefix, suffix, op)
}

pub fn is_real(m: &CMatrix) -> bool {
    m.iter().all(|x| x.im == 0.0)
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues ascending.
/// Real symmetric input takes a real-arithmetic path.
pub fn hermitian_eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let (values, vectors): (Vec<f64>, CMatrix) = if is_real(m) {
        let re: DMatrix<f64> = m.map(|x| x.re);
        let eig = SymmetricEigen::new(re);
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors.map(|x| C64::new(x, 0.0)))
    } else {
        let eig = SymmetricEigen::new(m.clone());
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted_values = order.iter().map(|&k| values[k]).collect();
    let sorted_vectors = CMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
    (sorted_values, sorted_vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn site_map_matches_kronecker_product() {
        let a = CMatrix::from_fn(2, 3, |r, c| C64::new((r + 2 * c) as f64, r as f64 - c as f64));
        let state: Vec<C64> = (0..2 * 3 * 2).map(|k| C64::new(k as f64, 0.5)).collect();
        let full = kron(&kron(&CMatrix::identity(2, 2), &a), &CMatrix::identity(2, 2));
        let expected = &full * nalgebra::DVector::from_vec(state.clone());
        let got = apply_site_map(&state, 2, 2, &a);
        for (x, y) in got.iter().zip(expected.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn eigh_sorts_and_reconstructs() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::new(1.0, 0.0)],
        );
        let (vals, vecs) = hermitian_eigh(&m);
        assert!((vals[0] - 0.0).abs() < 1e-12 && (vals[1] - 2.0).abs() < 1e-12);
        let recon = &vecs * CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            2,
            vals.iter().map(|&v| C64::new(v, 0.0)),
        )) * vecs.adjoint();
        assert!((recon - m).iter().all(|x| x.norm() < 1e-12));
    }
}
