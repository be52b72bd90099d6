//! Exact linear algebra over Z/p^N: Howell canonical forms, kernels,
//! cokernel structure, preimages and submodule intersection.
//!
//! Z/p^N is local, so every entry factors as unit * p^v and Gaussian
//! elimination works with valuation pivoting. Row spans need the Howell
//! form rather than plain echelon form because Z/p^N has zero divisors.

use std::fmt;

use crate::arith::Prec;

#[derive(Clone, PartialEq, Eq)]
pub struct ZpnMatrix {
    pub prec: Prec,
    pub rows: usize,
    pub cols: usize,
    entries: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinalgError {
    NoSolution,
    AmbientMismatch,
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::NoSolution => write!(f, "no solution"),
            LinalgError::AmbientMismatch => write!(f, "ambient rank mismatch"),
        }
    }
}

impl std::error::Error for LinalgError {}

impl fmt::Debug for ZpnMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}x{} over {:?}", self.rows, self.cols, self.prec)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", &self.entries[i * self.cols..(i + 1) * self.cols])?;
        }
        Ok(())
    }
}

impl ZpnMatrix {
    pub fn zero(prec: Prec, rows: usize, cols: usize) -> ZpnMatrix {
        ZpnMatrix { prec, rows, cols, entries: vec![0; rows * cols] }
    }

    pub fn identity(prec: Prec, n: usize) -> ZpnMatrix {
        let mut m = ZpnMatrix::zero(prec, n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(prec: Prec, rows: Vec<Vec<u64>>) -> ZpnMatrix {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut entries = Vec::with_capacity(nrows * ncols);
        for r in &rows {
            assert_eq!(r.len(), ncols, "ragged rows");
            entries.extend(r.iter().map(|&x| prec.reduce(x)));
        }
        ZpnMatrix { prec, rows: nrows, cols: ncols, entries }
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        self.entries[i * self.cols + j] = self.prec.reduce(v);
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&x| x == 0)
    }

    pub fn transpose(&self) -> ZpnMatrix {
        let mut t = ZpnMatrix::zero(self.prec, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul_mat(&self, other: &ZpnMatrix) -> ZpnMatrix {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.prec, other.prec);
        let pr = self.prec;
        let mut out = ZpnMatrix::zero(pr, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = pr.add(out.get(i, j), pr.mul(a, other.get(k, j)));
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[u64]) -> Vec<u64> {
        assert_eq!(self.cols, v.len());
        let pr = self.prec;
        (0..self.rows)
            .map(|i| {
                let mut acc = 0u64;
                for j in 0..self.cols {
                    acc = pr.add(acc, pr.mul(self.get(i, j), v[j]));
                }
                acc
            })
            .collect()
    }

    pub fn hstack(&self, other: &ZpnMatrix) -> ZpnMatrix {
        assert_eq!(self.rows, other.rows);
        let mut out = ZpnMatrix::zero(self.prec, self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j));
            }
            for j in 0..other.cols {
                out.set(i, self.cols + j, other.get(i, j));
            }
        }
        out
    }

    pub fn vstack(&self, other: &ZpnMatrix) -> ZpnMatrix {
        assert_eq!(self.cols, other.cols);
        let mut rows = Vec::with_capacity(self.rows + other.rows);
        for i in 0..self.rows {
            rows.push(self.row(i).to_vec());
        }
        for i in 0..other.rows {
            rows.push(other.row(i).to_vec());
        }
        ZpnMatrix::from_rows(self.prec, rows)
    }

    /// Reinterpret the canonical representatives at a higher precision.
    pub fn lift_to(&self, prec: Prec) -> ZpnMatrix {
        assert_eq!(prec.p, self.prec.p);
        assert!(prec.n >= self.prec.n);
        ZpnMatrix { prec, rows: self.rows, cols: self.cols, entries: self.entries.clone() }
    }

    pub fn reduce_to(&self, prec: Prec) -> ZpnMatrix {
        assert_eq!(prec.p, self.prec.p);
        assert!(prec.n <= self.prec.n);
        let entries = self.entries.iter().map(|&x| prec.reduce(x)).collect();
        ZpnMatrix { prec, rows: self.rows, cols: self.cols, entries }
    }
}

fn row_axpy(pr: &Prec, target: &mut [u64], source: &[u64], factor: u64) {
    if factor == 0 {
        return;
    }
    for (t, &s) in target.iter_mut().zip(source.iter()) {
        *t = pr.sub(*t, pr.mul(factor, s));
    }
}

/// Row echelon with valuation pivoting, pivots normalized to p^v and rows
/// above reduced. Shared by the Howell routine.
fn echelonize(pr: &Prec, rows: &mut Vec<Vec<u64>>) -> Vec<(usize, u32)> {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut pivots: Vec<(usize, u32)> = Vec::new();
    let mut next_row = 0usize;
    for col in 0..cols {
        // pick the minimal-valuation entry in this column at or below next_row
        let mut best: Option<(usize, u32)> = None;
        for r in next_row..rows.len() {
            let e = rows[r][col];
            if e != 0 {
                let v = pr.val(e);
                if best.map_or(true, |(_, bv)| v < bv) {
                    best = Some((r, v));
                }
            }
        }
        let Some((r, v)) = best else { continue };
        rows.swap(next_row, r);
        // normalize the pivot to exactly p^v
        let unit = rows[next_row][col] / pr.p.pow(v);
        let inv_unit = pr.inv(unit);
        for e in rows[next_row].iter_mut() {
            *e = pr.mul(*e, inv_unit);
        }
        // eliminate below
        let pivot_row = rows[next_row].clone();
        let pv = pr.p.pow(v);
        for r in next_row + 1..rows.len() {
            let e = rows[r][col];
            if e != 0 {
                let factor = e / pv;
                row_axpy(pr, &mut rows[r], &pivot_row, factor);
            }
        }
        pivots.push((col, v));
        next_row += 1;
        if next_row == rows.len() {
            break;
        }
    }
    rows.truncate(next_row);
    // reduce entries above each pivot modulo p^v, left to right so that a
    // reduction never disturbs columns already processed
    for k in 0..pivots.len() {
        let (col, v) = pivots[k];
        let pv = pr.p.pow(v);
        let pivot_row = rows[k].clone();
        for r in 0..k {
            let e = rows[r][col];
            let rem = e % pv;
            let factor = (e - rem) / pv;
            row_axpy(pr, &mut rows[r], &pivot_row, factor);
        }
    }
    pivots
}

/// Howell form of the row span. Canonical: two matrices have equal row
/// spans over Z/p^N iff their Howell forms are identical.
pub fn howell_form(m: &ZpnMatrix) -> ZpnMatrix {
    let pr = m.prec;
    let mut rows: Vec<Vec<u64>> = (0..m.rows)
        .map(|i| m.row(i).to_vec())
        .filter(|r| r.iter().any(|&x| x != 0))
        .collect();
    let span_size = |pivots: &[(usize, u32)]| -> u64 {
        pivots.iter().map(|&(_, v)| (pr.n - v) as u64).sum()
    };
    let mut pivots = echelonize(&pr, &mut rows);
    loop {
        let before = span_size(&pivots);
        // saturation: p^(N-v) * pivot row has zero pivot but may add new
        // span members further right
        let mut extra: Vec<Vec<u64>> = Vec::new();
        for (k, &(_, v)) in pivots.iter().enumerate() {
            if v == 0 {
                continue;
            }
            let mult = pr.p.pow(pr.n - v);
            let mut cand: Vec<u64> = rows[k].iter().map(|&x| pr.mul(x, mult)).collect();
            // best-effort reduction against current rows; echelonize below
            // is what actually decides whether the span grew
            for (j, &(c2, v2)) in pivots.iter().enumerate() {
                let e = cand[c2];
                if e != 0 {
                    let pv2 = pr.p.pow(v2);
                    if e % pv2 == 0 {
                        let factor = e / pv2;
                        let source = rows[j].clone();
                        row_axpy(&pr, &mut cand, &source, factor);
                    }
                }
            }
            if cand.iter().any(|&x| x != 0) {
                extra.push(cand);
            }
        }
        if extra.is_empty() {
            break;
        }
        rows.extend(extra);
        pivots = echelonize(&pr, &mut rows);
        if span_size(&pivots) == before {
            break;
        }
    }
    if rows.is_empty() {
        return ZpnMatrix::zero(pr, 0, m.cols);
    }
    ZpnMatrix::from_rows(pr, rows)
}

/// A submodule of (Z/p^N)^ambient, held as the Howell form of a generator
/// matrix so that equality and membership are decidable.
#[derive(Clone, PartialEq, Eq)]
pub struct Submodule {
    pub prec: Prec,
    pub ambient: usize,
    gens: ZpnMatrix,
}

impl fmt::Debug for Submodule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Submodule(ambient {}, {:?})", self.ambient, self.gens)
    }
}

impl Submodule {
    pub fn from_generators(prec: Prec, ambient: usize, gens: Vec<Vec<u64>>) -> Submodule {
        for g in &gens {
            assert_eq!(g.len(), ambient);
        }
        let m = if gens.is_empty() {
            ZpnMatrix::zero(prec, 0, ambient)
        } else {
            ZpnMatrix::from_rows(prec, gens)
        };
        Submodule { prec, ambient, gens: howell_form(&m) }
    }

    pub fn zero(prec: Prec, ambient: usize) -> Submodule {
        Submodule::from_generators(prec, ambient, vec![])
    }

    pub fn full(prec: Prec, ambient: usize) -> Submodule {
        let gens = (0..ambient)
            .map(|i| {
                let mut v = vec![0; ambient];
                v[i] = 1;
                v
            })
            .collect();
        Submodule::from_generators(prec, ambient, gens)
    }

    pub fn generators(&self) -> Vec<Vec<u64>> {
        (0..self.gens.rows).map(|i| self.gens.row(i).to_vec()).collect()
    }

    pub fn num_generators(&self) -> usize {
        self.gens.rows
    }

    pub fn contains(&self, v: &[u64]) -> bool {
        assert_eq!(v.len(), self.ambient);
        let pr = self.prec;
        let mut v: Vec<u64> = v.iter().map(|&x| pr.reduce(x)).collect();
        for i in 0..self.gens.rows {
            let col = (0..self.ambient).find(|&j| self.gens.get(i, j) != 0);
            let Some(col) = col else { continue };
            let pivot = self.gens.get(i, col);
            let pv = pr.p.pow(pr.val(pivot));
            let e = v[col];
            if e % pv == 0 {
                let factor = e / pv;
                let row = self.gens.row(i).to_vec();
                row_axpy(&pr, &mut v, &row, factor);
            }
        }
        v.iter().all(|&x| x == 0)
    }

    pub fn is_subset_of(&self, other: &Submodule) -> bool {
        self.generators().iter().all(|g| other.contains(g))
    }

    /// Elementary divisor structure of the submodule as an abstract module:
    /// a list of exponents e with the module isomorphic to the direct sum
    /// of Z/p^e. Exponent N entries are free summands.
    pub fn divisor_exponents(&self) -> Vec<u32> {
        if self.gens.rows == 0 {
            return vec![];
        }
        let smith = smith_normal_form(&self.gens);
        let pr = self.prec;
        let mut out: Vec<u32> = smith
            .diagonal
            .iter()
            .filter(|&&d| d != 0)
            .map(|&d| pr.n - pr.val(d))
            .filter(|&e| e > 0)
            .collect();
        out.sort_unstable();
        out
    }

    /// Number of free summands (divisors equal to the full p^N).
    pub fn free_rank(&self) -> usize {
        self.divisor_exponents().iter().filter(|&&e| e == self.prec.n).count()
    }
}

/// Smith normal form data: U * A * V = D with U, V invertible over Z/p^N.
pub struct SmithForm {
    pub u: ZpnMatrix,
    pub v: ZpnMatrix,
    pub diagonal: Vec<u64>,
    pub rows: usize,
    pub cols: usize,
}

pub fn smith_normal_form(a: &ZpnMatrix) -> SmithForm {
    let pr = a.prec;
    let (rows, cols) = (a.rows, a.cols);
    let mut m = a.clone();
    let mut u = ZpnMatrix::identity(pr, rows);
    let mut v = ZpnMatrix::identity(pr, cols);
    let steps = rows.min(cols);
    for k in 0..steps {
        // locate minimal-valuation entry in the trailing block
        let mut best: Option<(usize, usize, u32)> = None;
        for i in k..rows {
            for j in k..cols {
                let e = m.get(i, j);
                if e != 0 {
                    let val = pr.val(e);
                    if best.map_or(true, |(_, _, bv)| val < bv) {
                        best = Some((i, j, val));
                    }
                }
            }
        }
        let Some((bi, bj, val)) = best else { break };
        swap_rows(&mut m, k, bi);
        swap_rows(&mut u, k, bi);
        swap_cols(&mut m, k, bj);
        swap_cols(&mut v, k, bj);
        // normalize pivot to p^val
        let unit = m.get(k, k) / pr.p.pow(val);
        let inv_unit = pr.inv(unit);
        scale_row(&mut m, k, inv_unit);
        scale_row(&mut u, k, inv_unit);
        let pv = pr.p.pow(val);
        // clear the rest of column k and row k; the pivot has minimal
        // valuation so all factors are exact
        for i in k + 1..rows {
            let e = m.get(i, k);
            if e != 0 {
                let factor = e / pv;
                axpy_row(&mut m, i, k, factor);
                axpy_row(&mut u, i, k, factor);
            }
        }
        for j in k + 1..cols {
            let e = m.get(k, j);
            if e != 0 {
                let factor = e / pv;
                axpy_col(&mut m, j, k, factor);
                axpy_col(&mut v, j, k, factor);
            }
        }
    }
    let diagonal = (0..steps).map(|k| m.get(k, k)).collect();
    SmithForm { u, v, diagonal, rows, cols }
}

fn swap_rows(m: &mut ZpnMatrix, a: usize, b: usize) {
    if a == b {
        return;
    }
    for j in 0..m.cols {
        let t = m.get(a, j);
        m.set(a, j, m.get(b, j));
        m.set(b, j, t);
    }
}

fn swap_cols(m: &mut ZpnMatrix, a: usize, b: usize) {
    if a == b {
        return;
    }
    for i in 0..m.rows {
        let t = m.get(i, a);
        m.set(i, a, m.get(i, b));
        m.set(i, b, t);
    }
}

fn scale_row(m: &mut ZpnMatrix, r: usize, factor: u64) {
    let pr = m.prec;
    for j in 0..m.cols {
        m.set(r, j, pr.mul(m.get(r, j), factor));
    }
}

/// row[i] -= factor * row[k]
fn axpy_row(m: &mut ZpnMatrix, i: usize, k: usize, factor: u64) {
    let pr = m.prec;
    for j in 0..m.cols {
        let v = pr.sub(m.get(i, j), pr.mul(factor, m.get(k, j)));
        m.set(i, j, v);
    }
}

/// col[j] -= factor * col[k]
fn axpy_col(m: &mut ZpnMatrix, j: usize, k: usize, factor: u64) {
    let pr = m.prec;
    for i in 0..m.rows {
        let v = pr.sub(m.get(i, j), pr.mul(factor, m.get(i, k)));
        m.set(i, j, v);
    }
}

/// Right kernel: the submodule of vectors v with m * v = 0.
pub fn kernel(m: &ZpnMatrix) -> Submodule {
    let pr = m.prec;
    let smith = smith_normal_form(m);
    // m = U^-1 D V^-1, so m v = 0  <=>  D (V^-1 v) = 0. Kernel generators
    // of D: p^(N - e_i) on diagonal positions with divisor p^(e_i), free
    // unit vectors beyond the diagonal support.
    let mut gens: Vec<Vec<u64>> = Vec::new();
    let steps = smith.diagonal.len();
    for (i, &d) in smith.diagonal.iter().enumerate() {
        if d == 0 {
            let mut w = vec![0u64; m.cols];
            w[i] = 1;
            gens.push(w);
        } else {
            let e = pr.val(d);
            if e > 0 {
                let mut w = vec![0u64; m.cols];
                w[i] = pr.p.pow(pr.n - e);
                gens.push(w);
            }
        }
    }
    for j in steps..m.cols {
        let mut w = vec![0u64; m.cols];
        w[j] = 1;
        gens.push(w);
    }
    // transport back through V
    let vm = &smith.v;
    let gens: Vec<Vec<u64>> = gens.iter().map(|w| vm.mul_vec(w)).collect();
    let sub = Submodule::from_generators(pr, m.cols, gens);
    debug_assert!(sub.generators().iter().all(|g| m.mul_vec(g).iter().all(|&x| x == 0)));
    sub
}

/// Cokernel structure of coker(m) = (Z/p^N)^rows / column span: the sorted
/// torsion exponents e (0 < e < N) plus the count of full Z/p^N summands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CokernelStructure {
    pub prec: Prec,
    pub torsion_exponents: Vec<u32>,
    pub free_rank: usize,
}

impl CokernelStructure {
    pub fn is_trivial(&self) -> bool {
        self.torsion_exponents.is_empty() && self.free_rank == 0
    }

    /// log_p of the group order.
    pub fn logp_order(&self) -> u64 {
        self.torsion_exponents.iter().map(|&e| e as u64).sum::<u64>()
            + self.free_rank as u64 * self.prec.n as u64
    }

    pub fn max_exponent(&self) -> u32 {
        let t = self.torsion_exponents.last().copied().unwrap_or(0);
        if self.free_rank > 0 { self.prec.n.max(t) } else { t }
    }
}

pub fn cokernel_divisors(m: &ZpnMatrix) -> CokernelStructure {
    let pr = m.prec;
    let smith = smith_normal_form(m);
    let mut torsion = Vec::new();
    let mut nonzero_diag = 0usize;
    for &d in &smith.diagonal {
        if d != 0 {
            nonzero_diag += 1;
            let e = pr.val(d);
            if e > 0 {
                torsion.push(e);
            }
        }
    }
    let free_rank = m.rows - nonzero_diag;
    torsion.sort_unstable();
    CokernelStructure { prec: pr, torsion_exponents: torsion, free_rank }
}

/// Solve m * x = v exactly.
pub fn preimage(m: &ZpnMatrix, v: &[u64]) -> Result<Vec<u64>, LinalgError> {
    assert_eq!(v.len(), m.rows);
    let pr = m.prec;
    let smith = smith_normal_form(m);
    let rhs = smith.u.mul_vec(v);
    let mut w = vec![0u64; m.cols];
    for i in 0..m.rows {
        let target = rhs[i];
        if i < smith.diagonal.len() && smith.diagonal[i] != 0 {
            let d = smith.diagonal[i];
            let e = pr.val(d);
            if pr.val(target) < e {
                return Err(LinalgError::NoSolution);
            }
            w[i] = pr.div_exact(target, d);
        } else if target != 0 {
            return Err(LinalgError::NoSolution);
        }
    }
    let x = smith.v.mul_vec(&w);
    debug_assert_eq!(m.mul_vec(&x), v.iter().map(|&t| pr.reduce(t)).collect::<Vec<_>>());
    Ok(x)
}

/// Largest submodule contained in both arguments.
pub fn intersect(a: &Submodule, b: &Submodule) -> Result<Submodule, LinalgError> {
    if a.ambient != b.ambient || a.prec != b.prec {
        return Err(LinalgError::AmbientMismatch);
    }
    let pr = a.prec;
    let ga = a.generators();
    let gb = b.generators();
    if ga.is_empty() || gb.is_empty() {
        return Ok(Submodule::zero(pr, a.ambient));
    }
    // x = u A = w B  <=>  (u, w) in ker [A^T | -B^T]
    let at = ZpnMatrix::from_rows(pr, ga.clone()).transpose();
    let bt_neg = {
        let mut bt = ZpnMatrix::from_rows(pr, gb).transpose();
        for i in 0..bt.rows {
            for j in 0..bt.cols {
                bt.set(i, j, pr.neg(bt.get(i, j)));
            }
        }
        bt
    };
    let stacked = at.hstack(&bt_neg);
    let ker = kernel(&stacked);
    let amat = ZpnMatrix::from_rows(pr, ga);
    let gens: Vec<Vec<u64>> = ker
        .generators()
        .iter()
        .map(|uw| {
            let u = &uw[..amat.rows];
            amat.transpose().mul_vec(u)
        })
        .collect();
    Ok(Submodule::from_generators(pr, a.ambient, gens))
}

/// Structure of (span(extra) + span(rels)) / span(rels) inside (Z/p^N)^m,
/// with generators and relations given as column collections. Used for
/// images of cokernel transition maps.
pub fn quotient_image_structure(extra_cols: &ZpnMatrix, rel_cols: &ZpnMatrix) -> CokernelStructure {
    assert_eq!(extra_cols.rows, rel_cols.rows);
    let pr = extra_cols.prec;
    let smith = smith_normal_form(rel_cols);
    // coordinates in the cokernel of the relations: w = U * x with row i
    // living in Z/p^(N - e_i) (e_i the divisor exponent, N for free rows)
    let transformed = smith.u.mul_mat(extra_cols);
    // coordinate i of the quotient lives in Z/p^(e_i) when the relation
    // divisor is p^(e_i); embed it back into Z/p^N by scaling with p^(N-e_i)
    let mut scaled = transformed.clone();
    for i in 0..scaled.rows {
        let e = if i < smith.diagonal.len() && smith.diagonal[i] != 0 {
            pr.val(smith.diagonal[i])
        } else {
            pr.n
        };
        if e == pr.n {
            continue; // no relation on this coordinate
        }
        if e == 0 {
            for j in 0..scaled.cols {
                scaled.set(i, j, 0); // unit relation: coordinate dies
            }
        } else {
            let mult = pr.p.pow(pr.n - e);
            for j in 0..scaled.cols {
                scaled.set(i, j, pr.mul(scaled.get(i, j), mult));
            }
        }
    }
    // the image module is the span of the scaled columns
    let cols: Vec<Vec<u64>> = (0..scaled.cols).map(|j| (0..scaled.rows).map(|i| scaled.get(i, j)).collect()).collect();
    let sub = Submodule::from_generators(pr, scaled.rows, cols);
    let exps = sub.divisor_exponents();
    let free_rank = exps.iter().filter(|&&e| e == pr.n).count();
    let torsion = exps.into_iter().filter(|&e| e < pr.n).collect();
    CokernelStructure { prec: pr, torsion_exponents: torsion, free_rank }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::Rng;

    fn mat(p: u64, n: u32, rows: Vec<Vec<u64>>) -> ZpnMatrix {
        ZpnMatrix::from_rows(Prec::new(p, n), rows)
    }

    #[test]
    fn howell_examples_from_small_cases() {
        // identity fixed
        let id = ZpnMatrix::identity(Prec::new(2, 2), 2);
        assert_eq!(howell_form(&id), id);
        // [[p],[1]] over Z/p^2 -> unit row absorbs
        let m = mat(3, 2, vec![vec![3], vec![1]]);
        let h = howell_form(&m);
        assert_eq!(h.rows, 1);
        assert_eq!(h.get(0, 0), 1);
        // diag(p, p) over Z/p^2 already canonical
        let m = mat(2, 2, vec![vec![2, 0], vec![0, 2]]);
        assert_eq!(howell_form(&m), m);
    }

    #[test]
    fn howell_is_idempotent_and_span_canonical() {
        let mut rng = Rng::new(7);
        for &p in &[2u64, 3] {
            let pr = Prec::new(p, 3);
            for _ in 0..60 {
                let rows = (0..3)
                    .map(|_| (0..3).map(|_| rng.residue(&pr)).collect::<Vec<_>>())
                    .collect::<Vec<_>>();
                let m = ZpnMatrix::from_rows(pr, rows.clone());
                let h = howell_form(&m);
                assert_eq!(howell_form(&h), h);
                // shuffling generators does not change the form
                let mut shuffled = rows.clone();
                shuffled.reverse();
                let h2 = howell_form(&ZpnMatrix::from_rows(pr, shuffled));
                assert_eq!(h, h2);
            }
        }
    }

    #[test]
    fn howell_span_membership_matches_brute_force() {
        // exhaustive over (Z/4)^2 for a span with a zero divisor
        let pr = Prec::new(2, 2);
        let m = mat(2, 2, vec![vec![2, 2], vec![0, 2]]);
        let sub = Submodule::from_generators(pr, 2, vec![vec![2, 2], vec![0, 2]]);
        let mut count = 0;
        for a in 0..4u64 {
            for b in 0..4u64 {
                // brute force: is (a,b) = s*(2,2)+t*(0,2) for some s,t?
                let mut found = false;
                for s in 0..4u64 {
                    for t in 0..4u64 {
                        if pr.reduce(2 * s) == a && pr.reduce(2 * s + 2 * t) == b {
                            found = true;
                        }
                    }
                }
                assert_eq!(sub.contains(&[a, b]), found, "({a},{b})");
                if found {
                    count += 1;
                }
            }
        }
        assert_eq!(count, 4);
        let _ = m;
    }

    #[test]
    fn kernel_examples() {
        // 1x1 [p^(N-1)] over Z/p^N -> span{p}
        let m = mat(2, 2, vec![vec![2]]);
        let k = kernel(&m);
        assert!(k.contains(&[2]));
        assert!(!k.contains(&[1]));
        // invertible matrix -> zero module
        let m = mat(3, 2, vec![vec![1, 1], vec![0, 1]]);
        assert_eq!(kernel(&m).num_generators(), 0);
        // [[1,1],[p,p]] over Z/p^2: kernel = span{(1,-1)}
        let pr = Prec::new(2, 2);
        let m = mat(2, 2, vec![vec![1, 1], vec![2, 2]]);
        let k = kernel(&m);
        assert!(k.contains(&[1, pr.neg(1)]));
        // brute force over (Z/4)^2
        for a in 0..4u64 {
            for b in 0..4u64 {
                let in_ker = m.mul_vec(&[a, b]).iter().all(|&x| x == 0);
                assert_eq!(k.contains(&[a, b]), in_ker);
            }
        }
    }

    #[test]
    fn cokernel_examples() {
        // diag(1, p, p^2) over Z/p^3 -> divisors [p, p^2], free 0
        let m = mat(3, 3, vec![vec![1, 0, 0], vec![0, 3, 0], vec![0, 0, 9]]);
        let c = cokernel_divisors(&m);
        assert_eq!(c.torsion_exponents, vec![1, 2]);
        assert_eq!(c.free_rank, 0);
        // zero 2x2 map -> free rank 2
        let m = ZpnMatrix::zero(Prec::new(5, 2), 2, 2);
        let c = cokernel_divisors(&m);
        assert_eq!(c.free_rank, 2);
        assert!(c.torsion_exponents.is_empty());
        // [[2,2],[2,2]] over Z/8 -> divisors [2], free 1
        let m = mat(2, 3, vec![vec![2, 2], vec![2, 2]]);
        let c = cokernel_divisors(&m);
        assert_eq!(c.torsion_exponents, vec![1]);
        assert_eq!(c.free_rank, 1);
    }

    #[test]
    fn cokernel_matches_brute_force_quotient_order() {
        // |coker| * |im| = p^(N*rows); check orders by enumeration at p=2, N=2
        let pr = Prec::new(2, 2);
        let mut rng = Rng::new(11);
        for _ in 0..40 {
            let rows = (0..2)
                .map(|_| (0..2).map(|_| rng.residue(&pr)).collect::<Vec<_>>())
                .collect::<Vec<_>>();
            let m = ZpnMatrix::from_rows(pr, rows);
            // enumerate the column span
            let mut span = std::collections::BTreeSet::new();
            for a in 0..4u64 {
                for b in 0..4u64 {
                    span.insert(m.mul_vec(&[a, b]));
                }
            }
            let c = cokernel_divisors(&m);
            let coker_order = 1u64 << c.logp_order(); // p = 2
            assert_eq!(coker_order * span.len() as u64, 16);
        }
    }

    #[test]
    fn cokernel_invariant_under_unimodular_transforms() {
        let pr = Prec::new(3, 2);
        let mut rng = Rng::new(5);
        for _ in 0..30 {
            let rows = (0..3)
                .map(|_| (0..3).map(|_| rng.residue(&pr)).collect::<Vec<_>>())
                .collect::<Vec<_>>();
            let m = ZpnMatrix::from_rows(pr, rows);
            // random invertible U, V built from elementary operations
            let mut u = ZpnMatrix::identity(pr, 3);
            let mut v = ZpnMatrix::identity(pr, 3);
            for _ in 0..6 {
                let i = rng.below(3) as usize;
                let j = rng.below(3) as usize;
                if i != j {
                    let f = rng.residue(&pr);
                    axpy_row(&mut u, i, j, f);
                    axpy_col(&mut v, i, j, rng.residue(&pr));
                }
            }
            let m2 = u.mul_mat(&m).mul_mat(&v);
            assert_eq!(cokernel_divisors(&m), cokernel_divisors(&m2));
        }
    }

    #[test]
    fn preimage_examples() {
        // diag(p) x = p over Z/p^2 -> x = 1
        let m = mat(5, 2, vec![vec![5]]);
        assert_eq!(preimage(&m, &[5]).unwrap(), vec![1]);
        // diag(p) x = 1 -> no solution
        assert_eq!(preimage(&m, &[1]), Err(LinalgError::NoSolution));
        // random solvable systems, substitution check
        let pr = Prec::new(3, 3);
        let mut rng = Rng::new(23);
        for _ in 0..40 {
            let rows = (0..4)
                .map(|_| (0..4).map(|_| rng.residue(&pr)).collect::<Vec<_>>())
                .collect::<Vec<_>>();
            let m = ZpnMatrix::from_rows(pr, rows);
            let w: Vec<u64> = (0..4).map(|_| rng.residue(&pr)).collect();
            let v = m.mul_vec(&w);
            let x = preimage(&m, &v).expect("constructed to be solvable");
            assert_eq!(m.mul_vec(&x), v);
        }
    }

    #[test]
    fn intersect_examples() {
        let pr = Prec::new(2, 2);
        // X cap X = X
        let x = Submodule::from_generators(pr, 2, vec![vec![1, 2], vec![0, 2]]);
        assert_eq!(intersect(&x, &x).unwrap(), x);
        // span{1} cap span{p} = span{p} in rank 1
        let a = Submodule::from_generators(pr, 1, vec![vec![1]]);
        let b = Submodule::from_generators(pr, 1, vec![vec![2]]);
        assert_eq!(intersect(&a, &b).unwrap(), b);
        // span{(1,0)} cap span{(1,p)} = span{(p,0)} over Z/p^2
        let a = Submodule::from_generators(pr, 2, vec![vec![1, 0]]);
        let b = Submodule::from_generators(pr, 2, vec![vec![1, 2]]);
        let c = intersect(&a, &b).unwrap();
        let expect = Submodule::from_generators(pr, 2, vec![vec![2, 0]]);
        assert_eq!(c, expect);
        // ambient mismatch
        let d = Submodule::from_generators(pr, 3, vec![vec![1, 0, 0]]);
        assert!(matches!(intersect(&a, &d), Err(LinalgError::AmbientMismatch)));
    }

    #[test]
    fn intersect_membership_sampling() {
        let pr = Prec::new(2, 3);
        let mut rng = Rng::new(99);
        for _ in 0..20 {
            let ga: Vec<Vec<u64>> =
                (0..2).map(|_| (0..3).map(|_| rng.residue(&pr)).collect()).collect();
            let gb: Vec<Vec<u64>> =
                (0..2).map(|_| (0..3).map(|_| rng.residue(&pr)).collect()).collect();
            let a = Submodule::from_generators(pr, 3, ga);
            let b = Submodule::from_generators(pr, 3, gb);
            let c = intersect(&a, &b).unwrap();
            assert!(c.is_subset_of(&a));
            assert!(c.is_subset_of(&b));
            // everything in both spans lies in the intersection: sample
            // combinations of intersection-sized brute force at p=2, n<=3
            for v in a.generators() {
                if b.contains(&v) {
                    assert!(c.contains(&v));
                }
            }
        }
    }

    #[test]
    fn rank_nullity_accounting_exhaustive_n1() {
        // |ker| * |im| = p^cols at N = 1, all matrices up to 3x3 sampled
        for &p in &[2u64, 3] {
            let pr = Prec::new(p, 1);
            let mut rng = Rng::new(p);
            for _ in 0..50 {
                let rows = 1 + rng.below(3) as usize;
                let cols = 1 + rng.below(3) as usize;
                let m = ZpnMatrix::from_rows(
                    pr,
                    (0..rows).map(|_| (0..cols).map(|_| rng.residue(&pr)).collect()).collect(),
                );
                let k = kernel(&m);
                let ker_order = p.pow(k.divisor_exponents().iter().sum::<u32>());
                let c = cokernel_divisors(&m);
                let im_order = p.pow((pr.n as u64 * rows as u64 - c.logp_order()) as u32);
                assert_eq!(ker_order * im_order, p.pow(cols as u32));
            }
        }
    }

    #[test]
    fn quotient_image_structure_basics() {
        let pr = Prec::new(2, 3);
        // relations: span{(2,0)}; extra: span{(1,0)} -> quotient Z/2 on first coord
        let rels = ZpnMatrix::from_rows(pr, vec![vec![2], vec![0]]);
        let extra = ZpnMatrix::from_rows(pr, vec![vec![1], vec![0]]);
        let q = quotient_image_structure(&extra, &rels);
        assert_eq!(q.torsion_exponents, vec![1]);
        assert_eq!(q.free_rank, 0);
        // no relations: full structure of the span
        let rels = ZpnMatrix::zero(pr, 2, 0);
        let extra = ZpnMatrix::from_rows(pr, vec![vec![1, 0], vec![0, 2]]);
        let q = quotient_image_structure(&extra, &rels);
        assert_eq!(q.free_rank, 1);
        assert_eq!(q.torsion_exponents, vec![2]);
    }
}
