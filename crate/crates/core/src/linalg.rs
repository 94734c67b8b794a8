//! Generalized symmetric eigenproblems `A x = λ W x` for banded `A` (optionally
//! with periodic wrap-around) and diagonal positive `W`.
//!
//! Eigenvalues come from bisection on the inertia of `A - σW`, computed by a
//! block LDLᵀ sweep with blocks of the bandwidth's size (a block Sturm
//! sequence). The periodic corner is folded in through the Schur complement of
//! the last block. Eigenvectors come from inverse iteration with a pivoted band
//! LU. Everything is O(n) per shift, so thousands of shifts are cheap.

use num_complex::Complex64;

use crate::error::{Result, WaveError};

pub const MAX_BANDWIDTH: usize = 4;

/// Real symmetric banded matrix with a diagonal weight.
#[derive(Debug, Clone)]
pub struct BandedSym {
    n: usize,
    k: usize,
    periodic: bool,
    /// `upper[d][i] = A[i][(i + d) mod n]`.
    upper: Vec<Vec<f64>>,
    weight: Vec<f64>,
}

impl BandedSym {
    /// Builds the matrix from an entry function evaluated for `j - i` in `0..=k`
    /// (cyclically when `periodic`).
    pub fn from_fn(
        n: usize,
        k: usize,
        periodic: bool,
        weight: Vec<f64>,
        entry: impl Fn(usize, usize) -> f64,
    ) -> Result<Self> {
        if k == 0 || k > MAX_BANDWIDTH {
            return Err(WaveError::config(format!("bandwidth {k} unsupported (1 to {MAX_BANDWIDTH})")));
        }
        if weight.len() != n {
            return Err(WaveError::usage("weight length differs from matrix size"));
        }
        if weight.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(WaveError::InvalidScenario(
                "generalized weight must be strictly positive".into(),
            ));
        }
        if periodic && (n % k != 0 || n / k < 4) {
            return Err(WaveError::config(format!(
                "periodic band matrix needs n divisible by {k} and at least {} rows",
                4 * k
            )));
        }
        if n < 2 * k + 1 {
            return Err(WaveError::config("band matrix too small"));
        }
        let mut upper = vec![vec![0.0; n]; k + 1];
        for (d, band) in upper.iter_mut().enumerate() {
            for (i, slot) in band.iter_mut().enumerate() {
                let j = i + d;
                if j < n {
                    *slot = entry(i, j);
                } else if periodic {
                    *slot = entry(i, j - n);
                }
            }
        }
        Ok(BandedSym {
            n,
            k,
            periodic,
            upper,
            weight,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    fn distance(&self, i: usize, j: usize) -> Option<(usize, usize)> {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        if d <= self.k {
            Some((d, lo))
        } else if self.periodic && self.n - d <= self.k {
            Some((self.n - d, hi))
        } else {
            None
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.distance(i, j).map_or(0.0, |(d, r)| self.upper[d][r])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.upper[0][i] * x[i];
            for d in 1..=self.k {
                if self.periodic {
                    let jp = (i + d) % n;
                    let jm = (i + n - d) % n;
                    acc += self.upper[d][i] * x[jp] + self.upper[d][jm] * x[jm];
                } else {
                    if i + d < n {
                        acc += self.upper[d][i] * x[i + d];
                    }
                    if i >= d {
                        acc += self.upper[d][i - d] * x[i - d];
                    }
                }
            }
            y[i] = acc;
        }
        y
    }

    fn row_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.n;
        let k = self.k;
        (0..=2 * k).filter_map(move |s| {
            let j = i as isize + s as isize - k as isize;
            if self.periodic {
                Some(j.rem_euclid(n as isize) as usize)
            } else if j >= 0 && (j as usize) < n {
                Some(j as usize)
            } else {
                None
            }
        })
    }

    /// Gershgorin interval of the weighted problem.
    pub fn spectrum_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let wi = self.weight[i];
            let center = self.upper[0][i] / wi;
            let mut radius = 0.0;
            for j in self.row_neighbors(i) {
                if j != i {
                    radius += self.entry(i, j).abs() / (wi * self.weight[j]).sqrt();
                }
            }
            lo = lo.min(center - radius);
            hi = hi.max(center + radius);
        }
        let pad = 1e-12 * (lo.abs().max(hi.abs()) + 1.0);
        (lo - pad, hi + pad)
    }

    fn scale(&self) -> f64 {
        let (lo, hi) = self.spectrum_bounds();
        lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE)
    }

    fn shifted_block(&self, sigma: f64, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Small {
        let mut m = Small::zeros(rows.len(), cols.len());
        for (a, i) in rows.clone().enumerate() {
            for (b, j) in cols.clone().enumerate() {
                let mut v = self.entry(i, j);
                if i == j {
                    v -= sigma * self.weight[i];
                }
                m.set(a, b, v);
            }
        }
        m
    }

    fn block_ranges(&self) -> Vec<std::ops::Range<usize>> {
        (0..self.n)
            .step_by(self.k)
            .map(|s| s..(s + self.k).min(self.n))
            .collect()
    }

    /// Number of eigenvalues of `(A, W)` strictly below `sigma`.
    pub fn count_below(&self, sigma: f64) -> usize {
        let pivmin = 4.0 * f64::EPSILON * (self.scale() + sigma.abs()) * max_weight(&self.weight);
        let blocks = self.block_ranges();
        let nb = blocks.len();
        let body = if self.periodic { nb - 1 } else { nb };

        let mut count = 0;
        let mut dinv: Vec<Small> = Vec::with_capacity(body);
        let mut uppers: Vec<Small> = Vec::with_capacity(body);
        for b in 0..body {
            let mut d = self.shifted_block(sigma, blocks[b].clone(), blocks[b].clone());
            if b > 0 {
                let u = &uppers[b - 1];
                d = d.sub(&u.transpose().mul(&dinv[b - 1]).mul(u));
            }
            let (neg, inv) = d.inertia_and_inverse(pivmin);
            count += neg;
            dinv.push(inv);
            if b + 1 < nb {
                uppers.push(self.shifted_block(sigma, blocks[b].clone(), blocks[b + 1].clone()));
            }
        }
        if !self.periodic {
            return count;
        }

        // Border = last block; C couples it to block 0 (corner) and block nb-2.
        let last = blocks[nb - 1].clone();
        let mut cblocks: Vec<Small> = blocks[..body]
            .iter()
            .map(|r| Small::zeros(r.len(), last.len()))
            .collect();
        cblocks[0] = self.shifted_block(sigma, blocks[0].clone(), last.clone());
        cblocks[body - 1] = cblocks[body - 1].add(&uppers[body - 1]);
        // Forward: Y_b = C_b - Uᵀ_{b-1} D⁻¹_{b-1} Y_{b-1}
        let mut y = cblocks.clone();
        for b in 1..body {
            let l = uppers[b - 1].transpose().mul(&dinv[b - 1]);
            y[b] = y[b].sub(&l.mul(&y[b - 1]));
        }
        // Backward: X_b = D⁻¹_b (Y_b - U_b X_{b+1})
        let mut x = vec![Small::zeros(0, 0); body];
        x[body - 1] = dinv[body - 1].mul(&y[body - 1]);
        for b in (0..body - 1).rev() {
            x[b] = dinv[b].mul(&y[b].sub(&uppers[b].mul(&x[b + 1])));
        }
        let mut schur = self.shifted_block(sigma, last.clone(), last);
        for b in [0, body - 1] {
            if b == body - 1 && body - 1 == 0 {
                continue;
            }
            schur = schur.sub(&cblocks[b].transpose().mul(&x[b]));
        }
        count + schur.inertia_and_inverse(pivmin).0
    }

    /// The `index`-th smallest eigenvalue (0-based).
    pub fn eigenvalue(&self, index: usize) -> Result<f64> {
        Ok(self.eigenvalues(index..index + 1)?[0])
    }

    /// Eigenvalues with the given (0-based, ascending) indices. Bisection
    /// intervals are shared, so neighbouring indices cost little extra.
    pub fn eigenvalues(&self, indices: std::ops::Range<usize>) -> Result<Vec<f64>> {
        if indices.end > self.n || indices.is_empty() {
            return Err(WaveError::config(format!(
                "requested eigenvalues {indices:?} of a {}-dimensional problem",
                self.n
            )));
        }
        let (lo, hi) = self.spectrum_bounds();
        let mut out = Vec::with_capacity(indices.len());
        let mut stack = vec![(lo, hi, 0usize, self.n)];
        while let Some((lo, hi, clo, chi)) = stack.pop() {
            if chi <= indices.start || clo >= indices.end || clo == chi {
                continue;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                for i in clo..chi {
                    if indices.contains(&i) {
                        out.push((i, mid));
                    }
                }
                continue;
            }
            let c = self.count_below(mid).clamp(clo, chi);
            stack.push((mid, hi, c, chi));
            stack.push((lo, mid, clo, c));
        }
        out.sort_by_key(|p| p.0);
        Ok(out.into_iter().map(|p| p.1).collect())
    }

    /// Eigenvector for an (accurately known) eigenvalue by inverse iteration.
    /// The result is `W`-orthogonal to every vector in `deflate` and has unit
    /// `W`-norm.
    pub fn eigenvector(&self, lambda: f64, deflate: &[Vec<f64>], seed: u64) -> Result<Vec<f64>> {
        let n = self.n;
        let scale = self.scale();
        let solver = ShiftedSolver::new(self, lambda, scale)?;
        let mut rng = Lcg(seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493));
        let mut x: Vec<f64> = (0..n).map(|_| rng.next() - 0.5).collect();
        self.w_orthonormalize(&mut x, deflate);
        for _ in 0..4 {
            let wx: Vec<f64> = x.iter().zip(&self.weight).map(|(a, w)| a * w).collect();
            let mut y = solver.solve(&wx);
            self.w_orthonormalize(&mut y, deflate);
            x = y;
        }
        Ok(x)
    }

    fn w_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.weight).map(|((x, y), w)| x * y * w).sum()
    }

    fn w_orthonormalize(&self, x: &mut [f64], against: &[Vec<f64>]) {
        for _ in 0..2 {
            for v in against {
                let c = self.w_dot(v, x);
                for (xi, vi) in x.iter_mut().zip(v) {
                    *xi -= c * vi;
                }
            }
        }
        let norm = self.w_dot(x, x).sqrt();
        if norm > 0.0 && norm.is_finite() {
            x.iter_mut().for_each(|v| *v /= norm);
        }
    }

    /// `‖A x - λ W x‖₂`.
    pub fn residual(&self, lambda: f64, x: &[f64]) -> f64 {
        self.matvec(x)
            .iter()
            .zip(x.iter().zip(&self.weight))
            .map(|(ax, (xi, w))| (ax - lambda * w * xi).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Eigenpairs for the listed eigenvalue indices, ascending.
    pub fn eigenpairs(&self, indices: &[usize]) -> Result<Vec<(f64, Vec<f64>)>> {
        let (Some(&first), Some(&last)) = (indices.iter().min(), indices.iter().max()) else {
            return Ok(Vec::new());
        };
        let all = self.eigenvalues(first..last + 1)?;
        self.pairs_for(indices.iter().map(|&i| (i, all[i - first])).collect())
    }

    fn pairs_for(&self, mut values: Vec<(usize, f64)>) -> Result<Vec<(f64, Vec<f64>)>> {
        values.sort_by(|a, b| a.1.total_cmp(&b.1));
        let scale = self.scale();
        let mut out: Vec<(f64, Vec<f64>)> = Vec::with_capacity(values.len());
        for (idx, lambda) in values {
            // Bisection near a degenerate periodic pair is only good to roughly
            // sqrt(eps); deflating against every close neighbour keeps the
            // vectors independent, and the Rayleigh quotient restores accuracy.
            let cluster: Vec<Vec<f64>> = out
                .iter()
                .filter(|(l, _)| (l - lambda).abs() <= 1e-6 * scale)
                .map(|(_, v)| v.clone())
                .collect();
            let v = self.eigenvector(lambda, &cluster, idx as u64)?;
            let av = self.matvec(&v);
            let rq = av.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / self.w_dot(&v, &v);
            out.push((rq, v));
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(out)
    }

    /// The `count` lowest eigenpairs.
    pub fn lowest(&self, count: usize) -> Result<Vec<(f64, Vec<f64>)>> {
        if count > self.n {
            return Err(WaveError::config(format!(
                "{count} states requested from a {}-dimensional problem",
                self.n
            )));
        }
        self.eigenpairs(&(0..count).collect::<Vec<_>>())
    }

    /// The `count` eigenpairs of smallest `|λ|`, sorted by `|λ|` (ties: negative first).
    pub fn smallest_magnitude(&self, count: usize) -> Result<Vec<(f64, Vec<f64>)>> {
        if count > self.n {
            return Err(WaveError::config(format!(
                "{count} states requested from a {}-dimensional problem",
                self.n
            )));
        }
        if count == 0 {
            return Ok(Vec::new());
        }
        let below = self.count_below(0.0);
        let lo = below.saturating_sub(count);
        let hi = (below + count).min(self.n);
        let mut candidates: Vec<(usize, f64)> = (lo..hi).zip(self.eigenvalues(lo..hi)?).collect();
        candidates.sort_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(a.1.total_cmp(&b.1)));
        candidates.truncate(count);
        let mut pairs = self.pairs_for(candidates)?;
        pairs.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()).then(a.0.total_cmp(&b.0)));
        Ok(pairs)
    }
}

fn max_weight(w: &[f64]) -> f64 {
    w.iter().fold(0.0f64, |m, v| m.max(*v))
}

/// Deterministic generator for inverse-iteration start vectors.
struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Small dense matrix (one block of the block LDLᵀ sweep).
#[derive(Debug, Clone)]
struct Small {
    r: usize,
    c: usize,
    a: Vec<f64>,
}

impl Small {
    fn zeros(r: usize, c: usize) -> Self {
        Small {
            r,
            c,
            a: vec![0.0; r * c],
        }
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.c + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.c + j] = v;
    }

    fn transpose(&self) -> Small {
        let mut t = Small::zeros(self.c, self.r);
        for i in 0..self.r {
            for j in 0..self.c {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    fn mul(&self, o: &Small) -> Small {
        debug_assert_eq!(self.c, o.r);
        let mut m = Small::zeros(self.r, o.c);
        for i in 0..self.r {
            for j in 0..o.c {
                let mut s = 0.0;
                for l in 0..self.c {
                    s += self.get(i, l) * o.get(l, j);
                }
                m.set(i, j, s);
            }
        }
        m
    }

    fn sub(&self, o: &Small) -> Small {
        Small {
            r: self.r,
            c: self.c,
            a: self.a.iter().zip(&o.a).map(|(x, y)| x - y).collect(),
        }
    }

    fn add(&self, o: &Small) -> Small {
        Small {
            r: self.r,
            c: self.c,
            a: self.a.iter().zip(&o.a).map(|(x, y)| x + y).collect(),
        }
    }

    /// Number of negative eigenvalues of a symmetric block and the inverse of
    /// the block with eigenvalues within `pivmin` of zero pushed to `-pivmin`.
    fn inertia_and_inverse(&self, pivmin: f64) -> (usize, Small) {
        match self.r {
            1 => {
                let mut d = self.get(0, 0);
                if d.abs() < pivmin {
                    d = -pivmin;
                }
                let mut m = Small::zeros(1, 1);
                m.set(0, 0, 1.0 / d);
                ((d < 0.0) as usize, m)
            }
            2 => {
                let (a, b, c) = (self.get(0, 0), 0.5 * (self.get(0, 1) + self.get(1, 0)), self.get(1, 1));
                let mean = 0.5 * (a + c);
                let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
                let mut l1 = mean - rad;
                let mut l2 = mean + rad;
                let mut shift = 0.0;
                if l1.abs() < pivmin {
                    shift = -pivmin - l1;
                    l1 = -pivmin;
                } else if l2.abs() < pivmin {
                    shift = -pivmin - l2;
                    l2 = -pivmin;
                }
                let (a, c) = (a + shift, c + shift);
                let det = a * c - b * b;
                let mut m = Small::zeros(2, 2);
                m.set(0, 0, c / det);
                m.set(0, 1, -b / det);
                m.set(1, 0, -b / det);
                m.set(1, 1, a / det);
                ((l1 < 0.0) as usize + (l2 < 0.0) as usize, m)
            }
            n => {
                let (mut values, vectors) = self.symmetric_eigen();
                for v in values.iter_mut() {
                    if v.abs() < pivmin {
                        *v = -pivmin;
                    }
                }
                let mut m = Small::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        let s: f64 = (0..n).map(|l| vectors.get(i, l) * vectors.get(j, l) / values[l]).sum();
                        m.set(i, j, s);
                    }
                }
                (values.iter().filter(|v| **v < 0.0).count(), m)
            }
        }
    }

    /// Cyclic Jacobi: eigenvalues and column eigenvectors of the symmetric part.
    fn symmetric_eigen(&self) -> (Vec<f64>, Small) {
        let n = self.r;
        let mut a = Small::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a.set(i, j, 0.5 * (self.get(i, j) + self.get(j, i)));
            }
        }
        let mut v = Small::zeros(n, n);
        for i in 0..n {
            v.set(i, i, 1.0);
        }
        for _ in 0..64 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
                .map(|(i, j)| a.get(i, j).powi(2))
                .sum();
            let diag: f64 = (0..n).map(|i| a.get(i, i).powi(2)).sum();
            if off <= f64::EPSILON * f64::EPSILON * diag || off == 0.0 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a.get(p, q);
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a.get(k, p), a.get(k, q));
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a.get(p, k), a.get(q, k));
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                    for k in 0..n {
                        let (vkp, vkq) = (v.get(k, p), v.get(k, q));
                        v.set(k, p, c * vkp - s * vkq);
                        v.set(k, q, s * vkp + c * vkq);
                    }
                }
            }
        }
        ((0..n).map(|i| a.get(i, i)).collect(), v)
    }
}

/// Pivoted LU of a general band matrix (LAPACK `gbtf2` layout).
struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    fn ldab(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.ab[(self.kl + self.ku + i - j) + j * self.ldab()]
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let ld = self.ldab();
        &mut self.ab[(self.kl + self.ku + i - j) + j * ld]
    }

    fn factor(n: usize, k: usize, entry: impl Fn(usize, usize) -> f64, tiny: f64) -> Self {
        let mut lu = BandLu {
            n,
            kl: k,
            ku: k,
            ab: vec![0.0; (3 * k + 1) * n],
            ipiv: vec![0; n],
        };
        for j in 0..n {
            let lo = j.saturating_sub(k);
            let hi = (j + k).min(n - 1);
            for i in lo..=hi {
                *lu.at_mut(i, j) = entry(i, j);
            }
        }
        let (kl, ku) = (k, k);
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = lu.at(j, j).abs();
            for p in 1..=km {
                let v = lu.at(j + p, j).abs();
                if v > best {
                    best = v;
                    jp = p;
                }
            }
            lu.ipiv[j] = j + jp;
            if lu.at(j + jp, j) == 0.0 {
                *lu.at_mut(j + jp, j) = tiny;
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = lu.at(j, c);
                    let b = lu.at(j + jp, c);
                    *lu.at_mut(j, c) = b;
                    *lu.at_mut(j + jp, c) = a;
                }
            }
            let piv = lu.at(j, j);
            if piv.abs() < tiny {
                *lu.at_mut(j, j) = if piv < 0.0 { -tiny } else { tiny };
            }
            let piv = lu.at(j, j);
            for p in 1..=km {
                *lu.at_mut(j + p, j) /= piv;
            }
            for c in j + 1..=ju {
                let u = lu.at(j, c);
                if u != 0.0 {
                    for p in 1..=km {
                        let l = lu.at(j + p, j);
                        *lu.at_mut(j + p, c) -= l * u;
                    }
                }
            }
        }
        lu
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = rhs.to_vec();
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                x.swap(j, p);
            }
            let km = self.kl.min(n - 1 - j);
            let xj = x[j];
            for q in 1..=km {
                x[j + q] -= self.at(j + q, j) * xj;
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.at(j, j);
            let xj = x[j];
            let lo = j.saturating_sub(self.kl + self.ku);
            for i in lo..j {
                x[i] -= self.at(i, j) * xj;
            }
        }
        x
    }
}

/// Solver for `(A - σW) x = r`, bordering the periodic corner.
struct ShiftedSolver {
    body: BandLu,
    border: Option<Border>,
}

struct Border {
    nb: usize,
    /// columns of `C` (length `body_n` each)
    c_cols: Vec<Vec<f64>>,
    /// columns of `X = T⁻¹ C`
    x_cols: Vec<Vec<f64>>,
    /// Schur complement `S = M_BB - Cᵀ X`, row-major
    schur: Vec<f64>,
}

impl ShiftedSolver {
    fn new(m: &BandedSym, sigma: f64, scale: f64) -> Result<Self> {
        let n = m.n;
        let k = m.k;
        let tiny = f64::EPSILON * scale.max(1e-300) * max_weight(&m.weight);
        let shifted = |i: usize, j: usize| {
            let mut v = m.entry(i, j);
            if i == j {
                v -= sigma * m.weight[i];
            }
            v
        };
        if !m.periodic {
            return Ok(ShiftedSolver {
                body: BandLu::factor(n, k, shifted, tiny),
                border: None,
            });
        }
        let nt = n - k;
        // Inside the body only true band couplings count, not the wrap-around.
        let body_entry = |i: usize, j: usize| {
            if i.abs_diff(j) <= k {
                shifted(i, j)
            } else {
                0.0
            }
        };
        let body = BandLu::factor(nt, k, body_entry, tiny);
        let mut c_cols = Vec::with_capacity(k);
        let mut x_cols = Vec::with_capacity(k);
        for b in 0..k {
            let col: Vec<f64> = (0..nt)
                .map(|i| if m.distance(i, nt + b).is_some() { shifted(i, nt + b) } else { 0.0 })
                .collect();
            x_cols.push(body.solve(&col));
            c_cols.push(col);
        }
        let mut schur = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                let cx: f64 = c_cols[a].iter().zip(&x_cols[b]).map(|(c, x)| c * x).sum();
                schur[a * k + b] = shifted(nt + a, nt + b) - cx;
            }
        }
        Ok(ShiftedSolver {
            body,
            border: Some(Border {
                nb: k,
                c_cols,
                x_cols,
                schur,
            }),
        })
    }

    fn solve(&self, r: &[f64]) -> Vec<f64> {
        let Some(border) = &self.border else {
            return self.body.solve(r);
        };
        let nt = self.body.n;
        let k = border.nb;
        let y = self.body.solve(&r[..nt]);
        let mut rhs: Vec<f64> = (0..k)
            .map(|a| r[nt + a] - border.c_cols[a].iter().zip(&y).map(|(c, v)| c * v).sum::<f64>())
            .collect();
        let xb = solve_dense(&border.schur, &mut rhs, k);
        let mut x = y;
        for (b, xbv) in xb.iter().enumerate() {
            for (xi, col) in x.iter_mut().zip(&border.x_cols[b]) {
                *xi -= col * xbv;
            }
        }
        x.extend_from_slice(&xb);
        x
    }
}

/// Gaussian elimination with partial pivoting for a tiny dense system.
fn solve_dense(a: &[f64], b: &mut [f64], k: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-300);
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&i, &j| m[i * k + col].abs().total_cmp(&m[j * k + col].abs()))
            .unwrap();
        if piv != col {
            for j in 0..k {
                m.swap(col * k + j, piv * k + j);
            }
            b.swap(col, piv);
        }
        if m[col * k + col].abs() < f64::EPSILON * scale {
            m[col * k + col] = f64::EPSILON * scale;
        }
        for i in col + 1..k {
            let f = m[i * k + col] / m[col * k + col];
            for j in col..k {
                m[i * k + j] -= f * m[col * k + j];
            }
            b[i] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| m[i * k + j] * x[j]).sum();
        x[i] = (b[i] - s) / m[i * k + i];
    }
    x
}

/// Direct solver for complex band matrices (optionally cyclic) whose Hermitian
/// part is positive definite, e.g. `I + iαH` with real symmetric `H`. Such
/// matrices factor stably without pivoting.
pub(crate) struct ComplexBandSolver {
    n: usize,
    k: usize,
    /// `rows[i][d]` holds `M[i][i - k + d]` after factorization (L below, U on and above).
    rows: Vec<Vec<Complex64>>,
    border: Option<ComplexBorder>,
}

struct ComplexBorder {
    r_rows: Vec<Vec<Complex64>>,
    x_cols: Vec<Vec<Complex64>>,
    schur: Vec<Complex64>,
}

impl ComplexBandSolver {
    pub(crate) fn new(n: usize, k: usize, periodic: bool, entry: impl Fn(usize, usize) -> Complex64) -> Result<Self> {
        if periodic && n < 3 * k + 2 {
            return Err(WaveError::config("cyclic band system too small"));
        }
        let nt = if periodic { n - k } else { n };
        let in_band = |i: usize, j: usize| i.abs_diff(j) <= k;
        let mut rows = vec![vec![Complex64::new(0.0, 0.0); 2 * k + 1]; nt];
        for (i, row) in rows.iter_mut().enumerate() {
            for (d, slot) in row.iter_mut().enumerate() {
                let j = i as isize - k as isize + d as isize;
                if j >= 0 && (j as usize) < nt && in_band(i, j as usize) {
                    *slot = entry(i, j as usize);
                }
            }
        }
        // In-place LU, L unit lower.
        for p in 0..nt {
            let piv = rows[p][k];
            if piv.norm() == 0.0 {
                return Err(WaveError::SingularDenominator("zero pivot in band solve".into()));
            }
            for i in p + 1..(p + k + 1).min(nt) {
                let dl = k - (i - p);
                let l = rows[i][dl] / piv;
                rows[i][dl] = l;
                for j in p + 1..(p + k + 1).min(nt) {
                    let du = k + j - p;
                    let di = k + j - i;
                    let u = rows[p][du];
                    rows[i][di] -= l * u;
                }
            }
        }
        let mut solver = ComplexBandSolver {
            n: nt,
            k,
            rows,
            border: None,
        };
        if periodic {
            let wrap = |i: usize, j: usize| {
                let d = i.abs_diff(j);
                d <= k || n - d <= k
            };
            let mut r_rows = Vec::with_capacity(k);
            let mut x_cols = Vec::with_capacity(k);
            for b in 0..k {
                let col: Vec<Complex64> = (0..nt)
                    .map(|i| if wrap(i, nt + b) { entry(i, nt + b) } else { Complex64::new(0.0, 0.0) })
                    .collect();
                let row: Vec<Complex64> = (0..nt)
                    .map(|j| if wrap(nt + b, j) { entry(nt + b, j) } else { Complex64::new(0.0, 0.0) })
                    .collect();
                x_cols.push(solver.solve_body(&col));
                r_rows.push(row);
            }
            let mut schur = vec![Complex64::new(0.0, 0.0); k * k];
            for a in 0..k {
                for b in 0..k {
                    let rx: Complex64 = r_rows[a].iter().zip(&x_cols[b]).map(|(r, x)| r * x).sum();
                    schur[a * k + b] = entry(nt + a, nt + b) - rx;
                }
            }
            solver.border = Some(ComplexBorder {
                r_rows,
                x_cols,
                schur,
            });
        }
        Ok(solver)
    }

    fn solve_body(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let (n, k) = (self.n, self.k);
        let mut x = rhs.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for p in i.saturating_sub(k)..i {
                s -= self.rows[i][k + p - i] * x[p];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..(i + k + 1).min(n) {
                s -= self.rows[i][k + j - i] * x[j];
            }
            x[i] = s / self.rows[i][k];
        }
        x
    }

    pub(crate) fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let Some(b) = &self.border else {
            return self.solve_body(rhs);
        };
        let nt = self.n;
        let k = self.k;
        let y = self.solve_body(&rhs[..nt]);
        let mut m = b.schur.clone();
        let mut r: Vec<Complex64> = (0..k)
            .map(|a| rhs[nt + a] - b.r_rows[a].iter().zip(&y).map(|(r, v)| r * v).sum::<Complex64>())
            .collect();
        // Tiny dense solve with partial pivoting.
        for col in 0..k {
            let piv = (col..k)
                .max_by(|&i, &j| m[i * k + col].norm().total_cmp(&m[j * k + col].norm()))
                .unwrap();
            if piv != col {
                for j in 0..k {
                    m.swap(col * k + j, piv * k + j);
                }
                r.swap(col, piv);
            }
            for i in col + 1..k {
                let f = m[i * k + col] / m[col * k + col];
                for j in col..k {
                    let v = m[col * k + j];
                    m[i * k + j] -= f * v;
                }
                let rc = r[col];
                r[i] -= f * rc;
            }
        }
        let mut xb = vec![Complex64::new(0.0, 0.0); k];
        for i in (0..k).rev() {
            let s: Complex64 = (i + 1..k).map(|j| m[i * k + j] * xb[j]).sum();
            xb[i] = (r[i] - s) / m[i * k + i];
        }
        let mut x = y;
        for (bi, xv) in xb.iter().enumerate() {
            for (xi, c) in x.iter_mut().zip(&b.x_cols[bi]) {
                *xi -= c * xv;
            }
        }
        x.extend_from_slice(&xb);
        x
    }
}
