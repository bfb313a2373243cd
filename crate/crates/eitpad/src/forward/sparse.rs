//! Direct solver for sparse symmetric positive definite systems: reverse
//! Cuthill-McKee reordering followed by an envelope (skyline) Cholesky
//! factorisation. Factor once per mesh, then each injection pattern is a
//! cheap pair of triangular solves.
//!
//! Deterministic by construction: plain f64 arithmetic, tie-breaks on node
//! index everywhere, no threading.

use crate::error::{Error, Result};

/// Envelope Cholesky factor of a permuted SPD matrix.
#[derive(Clone, Debug)]
pub struct SpdEnvelopeSolver {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// First stored column of each factor row (envelope start).
    first: Vec<usize>,
    /// Offset of each row's slice in `vals`; row `i` holds columns
    /// `first[i]..=i`.
    offset: Vec<usize>,
    vals: Vec<f64>,
}

impl SpdEnvelopeSolver {
    /// Assemble and factor. `triplets` describe the **full** symmetric
    /// matrix (both `(i,j)` and `(j,i)` present for off-diagonal entries;
    /// duplicates accumulate). Entries above the diagonal after permutation
    /// are folded onto their mirror image.
    pub fn new(n: usize, triplets: &[(usize, usize, f64)]) -> Result<SpdEnvelopeSolver> {
        if n == 0 {
            return Err(Error::Singular("empty system".into()));
        }
        // Adjacency for the ordering pass.
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(i, j, _) in triplets {
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch(format!(
                    "triplet ({i},{j}) outside {n}x{n} system"
                )));
            }
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for list in adj.iter_mut() {
            list.sort_unstable();
            list.dedup();
        }

        let perm = reverse_cuthill_mckee(&adj);
        let mut iperm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        // Envelope profile in the new ordering.
        let mut first: Vec<usize> = (0..n).collect();
        for &(i, j, _) in triplets {
            let (r, c) = order(iperm[i], iperm[j]);
            if c < first[r] {
                first[r] = c;
            }
        }
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i] + 1);
        }
        let mut vals = vec![0.0; offset[n]];
        for &(i, j, v) in triplets {
            let (r, c) = order(iperm[i], iperm[j]);
            if iperm[i] != iperm[j] || i == j {
                // Off-diagonal pairs arrive twice (both orders); fold the
                // upper copy away by only accepting r >= c placements once.
                if iperm[i] >= iperm[j] {
                    vals[offset[r] + (c - first[r])] += v;
                }
            }
        }

        let mut solver = SpdEnvelopeSolver {
            n,
            perm,
            first,
            offset,
            vals,
        };
        solver.factor()?;
        Ok(solver)
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.vals[self.offset[i]..self.offset[i + 1]]
    }

    /// In-place envelope Cholesky: row by row, each entry a dot product of
    /// two contiguous row slices.
    fn factor(&mut self) -> Result<()> {
        for i in 0..self.n {
            let fi = self.first[i];
            for j in fi..i {
                let fj = self.first[j];
                let k0 = fi.max(fj);
                let dot = {
                    let a = &self.vals
                        [self.offset[i] + (k0 - fi)..self.offset[i] + (j - fi)];
                    let b = &self.vals
                        [self.offset[j] + (k0 - fj)..self.offset[j] + (j - fj)];
                    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
                };
                let djj = self.vals[self.offset[j] + (j - fj)];
                let idx = self.offset[i] + (j - fi);
                self.vals[idx] = (self.vals[idx] - dot) / djj;
            }
            let sq: f64 = self.vals[self.offset[i]..self.offset[i] + (i - fi)]
                .iter()
                .map(|x| x * x)
                .sum();
            let idx = self.offset[i] + (i - fi);
            let d = self.vals[idx] - sq;
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Singular(format!(
                    "matrix is not positive definite at pivot {i} (d = {d:e})"
                )));
            }
            self.vals[idx] = d.sqrt();
        }
        Ok(())
    }

    /// Solve `A x = b` for one right-hand side.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "rhs length {} vs system size {}",
                b.len(),
                self.n
            )));
        }
        // Permute.
        let mut y: Vec<f64> = (0..self.n).map(|i| b[self.perm[i]]).collect();
        // Forward: L y' = y.
        for i in 0..self.n {
            let fi = self.first[i];
            let row = self.row(i);
            let mut acc = y[i];
            for (k, &lik) in row[..i - fi].iter().enumerate() {
                acc -= lik * y[fi + k];
            }
            y[i] = acc / row[i - fi];
        }
        // Backward: L^T x' = y', walking rows from the bottom and
        // scattering each solved value up its column.
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let row = self.row(i);
            let xi = y[i] / row[i - fi];
            y[i] = xi;
            for (k, &lik) in row[..i - fi].iter().enumerate() {
                y[fi + k] -= lik * xi;
            }
        }
        // Unpermute.
        let mut x = vec![0.0; self.n];
        for i in 0..self.n {
            x[self.perm[i]] = y[i];
        }
        Ok(x)
    }

    /// Bytes of factor storage; exposed for the curious and for tests that
    /// check the reordering actually tightens the envelope.
    pub fn envelope_len(&self) -> usize {
        self.vals.len()
    }
}

#[inline]
fn order(a: usize, b: usize) -> (usize, usize) {
    if a >= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Reverse Cuthill-McKee ordering: BFS from a pseudo-peripheral vertex,
/// neighbours visited in increasing degree (ties on index), then reversed.
/// Handles several components by restarting at the smallest-index
/// unvisited vertex.
fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let degree = |v: usize| adj[v].len();
    let mut visited = vec![false; n];
    let mut order: Vec<usize> = Vec::with_capacity(n);

    let mut component = Vec::new();
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // Collect the component (plain BFS).
        component.clear();
        component.push(seed);
        visited[seed] = true;
        let mut head = 0;
        while head < component.len() {
            let v = component[head];
            head += 1;
            for &w in &adj[v] {
                if !visited[w] {
                    visited[w] = true;
                    component.push(w);
                }
            }
        }
        // Pseudo-peripheral start: repeat "BFS to the farthest level, pick
        // its min-degree vertex" until the eccentricity stops growing.
        let mut start = *component
            .iter()
            .min_by_key(|&&v| (degree(v), v))
            .expect("component is non-empty");
        let mut ecc = 0usize;
        loop {
            let (levels, depth) = bfs_levels(adj, start, component.len());
            if depth <= ecc {
                break;
            }
            ecc = depth;
            start = *component
                .iter()
                .filter(|&&v| levels[v] == depth)
                .min_by_key(|&&v| (degree(v), v))
                .expect("deepest level is non-empty");
        }
        // Cuthill-McKee sweep over this component.
        let mut in_order = vec![false; n];
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(start);
        in_order[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !in_order[w]).collect();
            next.sort_by_key(|&w| (degree(w), w));
            for w in next {
                in_order[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// BFS levels from `start`; returns (level per vertex, max level).
fn bfs_levels(adj: &[Vec<usize>], start: usize, component_size: usize) -> (Vec<usize>, usize) {
    let mut level = vec![usize::MAX; adj.len()];
    let mut queue = std::collections::VecDeque::with_capacity(component_size);
    level[start] = 0;
    queue.push_back(start);
    let mut depth = 0;
    while let Some(v) = queue.pop_front() {
        depth = depth.max(level[v]);
        for &w in &adj[v] {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    (level, depth)
}
