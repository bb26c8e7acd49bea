//! Banded symmetric positive-definite solves and reverse Cuthill–McKee
//! ordering. Backs the smoothing-spline system (bandwidth 2) and the ARAP
//! global step (mesh Laplacians reordered to a narrow band).

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};

/// Lower-band storage of a symmetric matrix: entry (i, j) with i ≥ j and
/// i − j ≤ bandwidth.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    bandwidth: usize,
    /// data[(i − j) + j (bandwidth + 1)] = A[i][j]
    data: Vec<f64>,
    factored: bool,
}

impl BandedSpd {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        BandedSpd {
            n,
            bandwidth,
            data: vec![0.0; n * (bandwidth + 1)],
            factored: false,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= j && i - j <= self.bandwidth);
        (i - j) + j * (self.bandwidth + 1)
    }

    /// Adds `v` to the symmetric entry (i, j). Only the lower triangle is
    /// stored; callers pass any (i, j) with |i − j| ≤ bandwidth.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bandwidth {
            return 0.0;
        }
        self.data[self.idx(i, j)]
    }

    /// In-place banded Cholesky factorization (A = L Lᵀ).
    pub fn cholesky(&mut self) -> Result<()> {
        let n = self.n;
        let b = self.bandwidth;
        for j in 0..n {
            let k0 = j.saturating_sub(b);
            let mut diag = self.data[self.idx(j, j)];
            for k in k0..j {
                let ljk = self.data[self.idx(j, k)];
                diag -= ljk * ljk;
            }
            if !(diag.is_finite() && diag > 0.0) {
                return Err(Error::SingularSystem {
                    context: format!("banded Cholesky pivot {j} = {diag:.3e}"),
                });
            }
            let ljj = diag.sqrt();
            let dj = self.idx(j, j);
            self.data[dj] = ljj;
            let imax = (j + b).min(n - 1);
            for i in (j + 1)..=imax {
                let mut s = self.data[self.idx(i, j)];
                let kk0 = i.saturating_sub(b).max(k0);
                for k in kk0..j {
                    s -= self.data[self.idx(i, k)] * self.data[self.idx(j, k)];
                }
                let ij = self.idx(i, j);
                self.data[ij] = s / ljj;
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves A x = rhs using the Cholesky factor; `rhs` is overwritten with x.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        assert!(self.factored, "call cholesky() before solve");
        assert_eq!(rhs.len(), self.n);
        let n = self.n;
        let b = self.bandwidth;
        // Forward: L y = rhs
        for i in 0..n {
            let k0 = i.saturating_sub(b);
            let mut s = rhs[i];
            for k in k0..i {
                s -= self.data[self.idx(i, k)] * rhs[k];
            }
            rhs[i] = s / self.data[self.idx(i, i)];
        }
        // Backward: Lᵀ x = y
        for i in (0..n).rev() {
            let imax = (i + b).min(n - 1);
            let mut s = rhs[i];
            for k in (i + 1)..=imax {
                s -= self.data[self.idx(k, i)] * rhs[k];
            }
            rhs[i] = s / self.data[self.idx(i, i)];
        }
    }
}

/// Reverse Cuthill–McKee ordering for an undirected adjacency list.
/// Returns `perm` with `perm[new] = old`. Deterministic: ties broken by
/// ascending vertex index.
pub fn reverse_cuthill_mckee(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let degree: Vec<usize> = adjacency.iter().map(|a| a.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    // Start each component from its minimum-degree vertex.
    loop {
        let start = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree[v], v));
        let Some(start) = start else { break };
        let mut queue = std::collections::VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adjacency[v].iter().copied().filter(|&u| !visited[u]).collect();
            nbrs.sort_unstable_by_key(|&u| (degree[u], u));
            for u in nbrs {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

/// Bandwidth of a symmetric sparsity pattern under a given ordering.
pub fn ordered_bandwidth(adjacency: &[Vec<usize>], perm: &[usize]) -> usize {
    let n = adjacency.len();
    let mut inv = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let mut b = 0;
    for (old, nbrs) in adjacency.iter().enumerate() {
        for &u in nbrs {
            b = b.max(inv[old].abs_diff(inv[u]));
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn banded_cholesky_matches_dense_solve() {
        let mut rng = StdRng::seed_from_u64(7);
        for &(n, b) in &[(6usize, 1usize), (12, 3), (40, 5)] {
            // Random banded SPD: Aᵀ A + n I restricted to the band.
            let mut a = BandedSpd::zeros(n, b);
            let mut dense = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i.saturating_sub(b)..=i {
                    let v = if i == j { n as f64 + rng.random::<f64>() } else { rng.random::<f64>() - 0.5 };
                    a.add(i, j, v);
                    dense[(i, j)] = a.get(i, j);
                    dense[(j, i)] = a.get(i, j);
                }
            }
            let rhs: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let mut x = rhs.clone();
            a.cholesky().unwrap();
            a.solve_in_place(&mut x);
            let expect = dense
                .clone()
                .cholesky()
                .unwrap()
                .solve(&nalgebra::DVector::from_vec(rhs));
            for i in 0..n {
                assert!((x[i] - expect[i]).abs() < 1e-10, "n={n} b={b} i={i}");
            }
        }
    }

    #[test]
    fn singular_matrix_is_detected() {
        let mut a = BandedSpd::zeros(3, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 0.0);
        a.add(2, 2, 1.0);
        assert!(a.cholesky().is_err());
    }

    #[test]
    fn rcm_reduces_grid_bandwidth() {
        // 2D grid numbered row-major with a scrambled permutation applied.
        let (w, h) = (8usize, 8usize);
        let n = w * h;
        let mut scramble: Vec<usize> = (0..n).collect();
        let mut rng = StdRng::seed_from_u64(3);
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            scramble.swap(i, j);
        }
        let mut adj = vec![Vec::new(); n];
        let id = |x: usize, y: usize| scramble[y * w + x];
        for y in 0..h {
            for x in 0..w {
                if x + 1 < w {
                    adj[id(x, y)].push(id(x + 1, y));
                    adj[id(x + 1, y)].push(id(x, y));
                }
                if y + 1 < h {
                    adj[id(x, y)].push(id(x, y + 1));
                    adj[id(x, y + 1)].push(id(x, y));
                }
            }
        }
        let perm = reverse_cuthill_mckee(&adj);
        let b = ordered_bandwidth(&adj, &perm);
        assert!(b <= 2 * w, "bandwidth {b}");
        // Permutation sanity.
        let mut seen = vec![false; n];
        for &p in &perm {
            assert!(!seen[p]);
            seen[p] = true;
        }
    }
}
