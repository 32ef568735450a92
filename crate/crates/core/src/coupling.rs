//! Tensor bases of polynomials on `(S^d)^N`, their rotation-invariant
//! subspaces and coefficient-space symmetrization.
//!
//! Every basis carries a unitary *frame* `U = [C | C⊥]` whose leading
//! columns span the invariant functions. On the circle the frame is the
//! identity because invariant indices are listed first; on the sphere it is
//! block diagonal with one block per tuple `(l_1, …, l_N)`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use faer::{c64, Mat, MatRef};

use crate::error::{Error, Result};
use crate::geometry::Configuration;
use crate::harmonics::sph_harm_all;

/// Residual norm below which Gram–Schmidt treats a vector as dependent.
pub const RANK_TOL: f64 = 1e-10;

/// Index of a tensor basis function.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MultiIndex {
    /// `φ_k(θ) = Π_j e^{i k_j θ_j}`.
    Circle(Vec<i32>),
    /// `φ_{l,m}(R) = Π_j Y_{l_j}^{m_j}(r_j)`.
    Sphere { l: Vec<usize>, m: Vec<i32> },
}

impl MultiIndex {
    /// `‖k‖₁` or `‖l‖₁`.
    pub fn total_degree(&self) -> usize {
        match self {
            MultiIndex::Circle(k) => k.iter().map(|x| x.unsigned_abs() as usize).sum(),
            MultiIndex::Sphere { l, .. } => l.iter().sum(),
        }
    }

    /// `Σk` (circle) or `Σm` (sphere): the weight under rotations about z.
    pub fn charge(&self) -> i32 {
        match self {
            MultiIndex::Circle(k) => k.iter().sum(),
            MultiIndex::Sphere { m, .. } => m.iter().sum(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            MultiIndex::Circle(k) => k.len(),
            MultiIndex::Sphere { l, .. } => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MultiIndex::Circle(k) => write!(f, "k={k:?}"),
            MultiIndex::Sphere { l, m } => write!(f, "l={l:?} m={m:?}"),
        }
    }
}

/// Contiguous run of sphere basis functions sharing one `l`-tuple.
#[derive(Debug, Clone)]
pub struct TensorBlock {
    pub start: usize,
    pub len: usize,
    pub ls: Vec<usize>,
    /// Unitary `len × len` frame; the first `rank` columns are invariant.
    frame: Mat<c64>,
    rank: usize,
    inv_offset: usize,
    non_offset: usize,
}

impl TensorBlock {
    /// Number of invariant directions inside this block.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn frame(&self) -> MatRef<'_, c64> {
        self.frame.as_ref()
    }
}

#[derive(Debug)]
struct Inner {
    dim: usize,
    n_particles: usize,
    degree: usize,
    indices: Vec<MultiIndex>,
    invariant_count: usize,
    blocks: Vec<TensorBlock>,
}

/// Ordered tensor basis of total degree `≤ K` with its invariant frame.
///
/// Cloning is cheap.
#[derive(Debug, Clone)]
pub struct BasisSpec(Arc<Inner>);

impl PartialEq for BasisSpec {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.dim == other.0.dim
                && self.0.n_particles == other.0.n_particles
                && self.0.degree == other.0.degree)
    }
}

impl BasisSpec {
    /// Sphere dimension `d`.
    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn n_particles(&self) -> usize {
        self.0.n_particles
    }

    /// Total degree `K`.
    pub fn degree(&self) -> usize {
        self.0.degree
    }

    /// Number of basis functions `p`.
    pub fn size(&self) -> usize {
        self.0.indices.len()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.0.indices
    }

    /// Dimension of the invariant subspace.
    pub fn invariant_count(&self) -> usize {
        self.0.invariant_count
    }

    /// Sphere blocks (empty on the circle).
    pub fn blocks(&self) -> &[TensorBlock] {
        &self.0.blocks
    }

    /// Row vector `(φ_j(R))_j`.
    pub fn evaluate(&self, config: &Configuration) -> Result<Vec<c64>> {
        let mut row = vec![c64::new(0.0, 0.0); self.size()];
        self.evaluate_into(config, &mut row)?;
        Ok(row)
    }

    pub(crate) fn evaluate_into(&self, config: &Configuration, row: &mut [c64]) -> Result<()> {
        if config.dim() != self.dim() || config.len() != self.n_particles() {
            return Err(Error::Dimension(format!(
                "basis over (S^{})^{} cannot evaluate a configuration of {} particles on S^{}",
                self.dim(),
                self.n_particles(),
                config.len(),
                config.dim()
            )));
        }
        let k_max = self.degree() as i32;
        match config.angles() {
            Some(angles) => {
                let width = 2 * self.degree() + 1;
                let powers: Vec<Vec<c64>> = angles
                    .iter()
                    .map(|t| (0..width).map(|k| c64::cis((k as i32 - k_max) as f64 * t)).collect())
                    .collect();
                for (out, idx) in row.iter_mut().zip(self.indices()) {
                    if let MultiIndex::Circle(k) = idx {
                        let mut z = c64::new(1.0, 0.0);
                        for (p, kj) in powers.iter().zip(k) {
                            z *= p[(kj + k_max) as usize];
                        }
                        *out = z;
                    }
                }
            }
            None => {
                let ylm: Vec<Vec<c64>> = config
                    .vectors()
                    .unwrap_or_default()
                    .iter()
                    .map(|r| sph_harm_all(self.degree(), r))
                    .collect();
                for (out, idx) in row.iter_mut().zip(self.indices()) {
                    if let MultiIndex::Sphere { l, m } = idx {
                        let mut z = c64::new(1.0, 0.0);
                        for ((y, lj), mj) in ylm.iter().zip(l).zip(m) {
                            z *= y[((lj * lj + lj) as i64 + *mj as i64) as usize];
                        }
                        *out = z;
                    }
                }
            }
        }
        Ok(())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.size() {
            return Err(Error::Dimension(format!(
                "coefficient vector has length {len}, basis has {}",
                self.size()
            )));
        }
        Ok(())
    }

    /// Frame coordinates `U*β`, invariant part first.
    pub fn to_frame(&self, beta: &[c64]) -> Result<Vec<c64>> {
        self.check_len(beta.len())?;
        if self.dim() == 1 {
            return Ok(beta.to_vec());
        }
        let r = self.invariant_count();
        let mut out = vec![c64::new(0.0, 0.0); beta.len()];
        for b in self.blocks() {
            for j in 0..b.len {
                let mut s = c64::new(0.0, 0.0);
                for i in 0..b.len {
                    s += b.frame[(i, j)].conj() * beta[b.start + i];
                }
                let pos = if j < b.rank {
                    b.inv_offset + j
                } else {
                    r + b.non_offset + j - b.rank
                };
                out[pos] = s;
            }
        }
        Ok(out)
    }

    /// Inverse of [`BasisSpec::to_frame`].
    pub fn from_frame(&self, gamma: &[c64]) -> Result<Vec<c64>> {
        self.check_len(gamma.len())?;
        if self.dim() == 1 {
            return Ok(gamma.to_vec());
        }
        let r = self.invariant_count();
        let mut out = vec![c64::new(0.0, 0.0); gamma.len()];
        for b in self.blocks() {
            for j in 0..b.len {
                let g = if j < b.rank {
                    gamma[b.inv_offset + j]
                } else {
                    gamma[r + b.non_offset + j - b.rank]
                };
                if g == c64::new(0.0, 0.0) {
                    continue;
                }
                for i in 0..b.len {
                    out[b.start + i] += b.frame[(i, j)] * g;
                }
            }
        }
        Ok(out)
    }

    /// Splits `β` into invariant coordinates `C*β` and complement `C⊥*β`.
    pub fn split(&self, beta: &[c64]) -> Result<(Vec<c64>, Vec<c64>)> {
        let mut f = self.to_frame(beta)?;
        let non = f.split_off(self.invariant_count());
        Ok((f, non))
    }

    /// `C·β_I`: the tensor coefficients of an invariant combination.
    pub fn embed_invariant(&self, beta_inv: &[c64]) -> Result<Vec<c64>> {
        let r = self.invariant_count();
        if beta_inv.len() != r {
            return Err(Error::Dimension(format!(
                "invariant coefficient vector has length {}, basis has {r} invariants",
                beta_inv.len()
            )));
        }
        let mut g = beta_inv.to_vec();
        g.resize(self.size(), c64::new(0.0, 0.0));
        self.from_frame(&g)
    }

    /// `A·U`, with the invariant columns `A·C` first.
    pub fn frame_columns(&self, a: MatRef<'_, c64>) -> Result<Mat<c64>> {
        self.check_len(a.ncols())?;
        if self.dim() == 1 {
            return Ok(a.to_owned());
        }
        let r = self.invariant_count();
        let n = a.nrows();
        let mut out = Mat::<c64>::zeros(n, a.ncols());
        for b in self.blocks() {
            let src = a.submatrix(0, b.start, n, b.len);
            let prod = if b.rank == 0 { src.to_owned() } else { src * b.frame.as_ref() };
            if b.rank > 0 {
                out.submatrix_mut(0, b.inv_offset, n, b.rank)
                    .copy_from(prod.submatrix(0, 0, n, b.rank));
            }
            out.submatrix_mut(0, r + b.non_offset, n, b.len - b.rank)
                .copy_from(prod.submatrix(0, b.rank, n, b.len - b.rank));
        }
        Ok(out)
    }

    /// `A·C`.
    pub fn invariant_columns(&self, a: MatRef<'_, c64>) -> Result<Mat<c64>> {
        self.check_len(a.ncols())?;
        let r = self.invariant_count();
        if self.dim() == 1 {
            return Ok(a.submatrix(0, 0, a.nrows(), r).to_owned());
        }
        let n = a.nrows();
        let mut out = Mat::<c64>::zeros(n, r);
        for b in self.blocks().iter().filter(|b| b.rank > 0) {
            let prod = a.submatrix(0, b.start, n, b.len) * b.frame.submatrix(0, 0, b.len, b.rank);
            out.submatrix_mut(0, b.inv_offset, n, b.rank).copy_from(&prod);
        }
        Ok(out)
    }

    /// The dense unitary frame `U` (columns in frame order).
    pub fn frame_matrix(&self) -> Mat<c64> {
        let p = self.size();
        let mut u = Mat::<c64>::zeros(p, p);
        if self.dim() == 1 {
            for i in 0..p {
                u[(i, i)] = c64::new(1.0, 0.0);
            }
            return u;
        }
        let r = self.invariant_count();
        for b in self.blocks() {
            for j in 0..b.len {
                let col = if j < b.rank {
                    b.inv_offset + j
                } else {
                    r + b.non_offset + j - b.rank
                };
                for i in 0..b.len {
                    u[(b.start + i, col)] = b.frame[(i, j)];
                }
            }
        }
        u
    }

    /// The `p × r` matrix `C` of orthonormal invariant coefficient vectors.
    pub fn coupling_matrix(&self) -> Mat<c64> {
        let r = self.invariant_count();
        let u = self.frame_matrix();
        u.submatrix(0, 0, self.size(), r).to_owned()
    }
}

/// Enumerates the tensor basis of `V_K^{N,d}` and its invariant frame.
///
/// Circle bases list `k` with `Σk = 0` first, each group in lexicographic
/// order. Sphere bases are ordered lexicographically by `l`-tuple and then
/// by `m`; invariants are available for `N ≤ 3`.
pub fn enumerate_basis(d: usize, n: usize, k: usize) -> Result<BasisSpec> {
    if n == 0 {
        return Err(Error::InvalidArgument("a basis needs at least one particle".into()));
    }
    match d {
        1 => {
            let all = circle_indices(n, k);
            let (mut inv, rest): (Vec<_>, Vec<_>) = all.into_iter().partition(|x| x.iter().sum::<i32>() == 0);
            let invariant_count = inv.len();
            inv.extend(rest);
            Ok(BasisSpec(Arc::new(Inner {
                dim: 1,
                n_particles: n,
                degree: k,
                indices: inv.into_iter().map(MultiIndex::Circle).collect(),
                invariant_count,
                blocks: Vec::new(),
            })))
        }
        2 => sphere_basis(n, k),
        _ => Err(Error::Dimension(format!("sphere dimension must be 1 or 2, got {d}"))),
    }
}

fn circle_indices(n: usize, k: usize) -> Vec<Vec<i32>> {
    fn rec(n: usize, budget: i32, cur: &mut Vec<i32>, out: &mut Vec<Vec<i32>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for v in -budget..=budget {
            cur.push(v);
            rec(n, budget - v.abs(), cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k as i32, &mut Vec::with_capacity(n), &mut out);
    out
}

fn l_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, budget: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for v in 0..=budget {
            cur.push(v);
            rec(n, budget - v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, &mut Vec::with_capacity(n), &mut out);
    out
}

fn m_tuples(ls: &[usize]) -> Vec<Vec<i32>> {
    let mut out = vec![Vec::new()];
    for &l in ls {
        let li = l as i32;
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (-li..=li).map(move |m| {
                    let mut v = prefix.clone();
                    v.push(m);
                    v
                })
            })
            .collect();
    }
    out
}

/// The `k` with `‖k‖₁ ≤ K` and `Σk = 0`, in lexicographic order.
pub fn invariant_indices_circle(n: usize, k: usize) -> Vec<MultiIndex> {
    circle_indices(n, k)
        .into_iter()
        .filter(|x| x.iter().sum::<i32>() == 0)
        .map(MultiIndex::Circle)
        .collect()
}

fn sphere_basis(n: usize, k: usize) -> Result<BasisSpec> {
    if n > 3 {
        return Err(Error::InvalidArgument(format!(
            "invariant sphere bases are implemented for at most 3 particles, got {n}"
        )));
    }
    let mut indices = Vec::new();
    let mut blocks = Vec::new();
    let mut inv_total = 0;
    let mut non_total = 0;
    for ls in l_tuples(n, k) {
        let ms = m_tuples(&ls);
        let start = indices.len();
        let len = ms.len();
        let invariants: Vec<Vec<c64>> = coupled_vector(&ls)
            .map(|v| v.into_iter().map(|x| c64::new(x, 0.0)).collect())
            .into_iter()
            .collect();
        let invariants = gram_schmidt(invariants, RANK_TOL);
        let rank = invariants.len();
        let frame = complete_frame(len, &invariants);
        blocks.push(TensorBlock {
            start,
            len,
            ls: ls.clone(),
            frame,
            rank,
            inv_offset: inv_total,
            non_offset: non_total,
        });
        inv_total += rank;
        non_total += len - rank;
        indices.extend(ms.into_iter().map(|m| MultiIndex::Sphere { l: ls.clone(), m }));
    }
    Ok(BasisSpec(Arc::new(Inner {
        dim: 2,
        n_particles: n,
        degree: k,
        indices,
        invariant_count: inv_total,
        blocks,
    })))
}

/// Extends orthonormal vectors to a unitary matrix, keeping them as the
/// leading columns.
fn complete_frame(len: usize, vectors: &[Vec<c64>]) -> Mat<c64> {
    let r = vectors.len();
    if r == 0 {
        return Mat::from_fn(len, len, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) });
    }
    let c = Mat::from_fn(len, r, |i, j| vectors[j][i]);
    let q = c.qr().compute_Q();
    let mut frame = q;
    for (j, v) in vectors.iter().enumerate() {
        for (i, x) in v.iter().enumerate() {
            frame[(i, j)] = *x;
        }
    }
    frame
}

/// Modified Gram–Schmidt with one re-orthogonalization pass. Vectors whose
/// residual drops below `tol` times their original norm are discarded.
pub fn gram_schmidt(vectors: Vec<Vec<c64>>, tol: f64) -> Vec<Vec<c64>> {
    let mut basis: Vec<Vec<c64>> = Vec::new();
    for mut v in vectors {
        let norm0 = l2(&v);
        if norm0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for b in &basis {
                let proj: c64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                for (y, x) in v.iter_mut().zip(b) {
                    *y -= *x * proj;
                }
            }
        }
        let norm = l2(&v);
        if norm > tol * norm0 {
            for y in &mut v {
                *y /= norm;
            }
            basis.push(v);
        }
    }
    basis
}

fn l2(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

const LOG_FACT_LEN: usize = 512;

fn log_factorial(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = vec![0.0; LOG_FACT_LEN];
        for i in 1..LOG_FACT_LEN {
            t[i] = t[i - 1] + (i as f64).ln();
        }
        t
    });
    table[n]
}

/// Clebsch–Gordan coefficient `⟨l1 m1; l2 m2 | l3 m3⟩` (Condon–Shortley).
///
/// Evaluated with the Racah sum over log-factorials. Returns zero whenever a
/// selection rule fails, including `|m| > l`.
pub fn clebsch_gordan(l1: i32, m1: i32, l2: i32, m2: i32, l3: i32, m3: i32) -> f64 {
    if l1 < 0 || l2 < 0 || l3 < 0 || m1.abs() > l1 || m2.abs() > l2 || m3.abs() > l3 {
        return 0.0;
    }
    if m1 + m2 != m3 || l3 < (l1 - l2).abs() || l3 > l1 + l2 {
        return 0.0;
    }
    let f = |n: i32| log_factorial(n as usize);
    let log_pre = 0.5
        * ((2.0 * l3 as f64 + 1.0).ln() + f(l1 + l2 - l3) + f(l1 - l2 + l3) + f(-l1 + l2 + l3)
            - f(l1 + l2 + l3 + 1)
            + f(l1 + m1)
            + f(l1 - m1)
            + f(l2 + m2)
            + f(l2 - m2)
            + f(l3 + m3)
            + f(l3 - m3));
    let k_min = 0.max(l2 - l3 - m1).max(l1 - l3 + m2);
    let k_max = (l1 + l2 - l3).min(l1 - m1).min(l2 + m2);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let log_den = f(k) + f(l1 + l2 - l3 - k) + f(l1 - m1 - k) + f(l2 + m2 - k) + f(l3 - l2 + m1 + k)
            + f(l3 - l1 - m2 + k);
        let term = (log_pre - log_den).exp();
        sum += if k % 2 == 0 { term } else { -term };
    }
    sum
}

/// Coefficients over the `m`-block of an `l`-tuple (first `m` varying
/// slowest) of the invariant obtained by Clebsch–Gordan coupling, or `None`
/// when the tuple admits no invariant.
///
/// For three particles the first two are coupled to `l_3` and the result is
/// contracted with the third to total angular momentum zero.
pub fn coupled_vector(ls: &[usize]) -> Option<Vec<f64>> {
    let ms = m_tuples(ls);
    let li: Vec<i32> = ls.iter().map(|&l| l as i32).collect();
    let v: Vec<f64> = match li.as_slice() {
        [l] => {
            if *l != 0 {
                return None;
            }
            vec![1.0]
        }
        [l1, l2] => {
            if l1 != l2 {
                return None;
            }
            ms.iter().map(|m| clebsch_gordan(*l1, m[0], *l2, m[1], 0, 0)).collect()
        }
        [l1, l2, l3] => {
            if *l3 < (l1 - l2).abs() || *l3 > l1 + l2 {
                return None;
            }
            ms.iter()
                .map(|m| {
                    let mm = m[0] + m[1];
                    if mm + m[2] != 0 {
                        return 0.0;
                    }
                    clebsch_gordan(*l1, m[0], *l2, m[1], *l3, mm) * clebsch_gordan(*l3, mm, *l3, m[2], 0, 0)
                })
                .collect()
        }
        _ => return None,
    };
    if v.iter().all(|x| x.abs() < RANK_TOL) {
        None
    } else {
        Some(v)
    }
}

/// A normalized CG-coupled invariant of three spherical harmonics.
#[derive(Debug, Clone)]
pub struct CoupledInvariant {
    pub ls: [usize; 3],
    /// Nonzero coefficients as `(m, value)`, with `m_1 + m_2 + m_3 = 0`.
    pub terms: Vec<([i32; 3], f64)>,
}

impl CoupledInvariant {
    pub fn total_degree(&self) -> usize {
        self.ls.iter().sum()
    }

    /// Evaluates the invariant from per-particle harmonics packed as in
    /// [`sph_harm_all`].
    pub fn eval_packed(&self, ylm: &[Vec<c64>; 3]) -> c64 {
        let at = |p: usize, m: i32| {
            let l = self.ls[p];
            ylm[p][((l * l + l) as i64 + m as i64) as usize]
        };
        self.terms
            .iter()
            .map(|(m, v)| at(0, m[0]) * at(1, m[1]) * at(2, m[2]) * *v)
            .sum()
    }
}

/// All normalized invariants of three particles on S² with `‖l‖₁ ≤ K`,
/// one per admissible `l`-tuple, in lexicographic order.
pub fn invariant_basis_sphere3(k: usize) -> Vec<CoupledInvariant> {
    let mut out = Vec::new();
    for ls in l_tuples(3, k) {
        let Some(v) = coupled_vector(&ls) else { continue };
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let terms = m_tuples(&ls)
            .into_iter()
            .zip(v)
            .filter(|(_, x)| x.abs() > 0.0)
            .map(|(m, x)| ([m[0], m[1], m[2]], x / norm))
            .collect();
        out.push(CoupledInvariant {
            ls: [ls[0], ls[1], ls[2]],
            terms,
        });
    }
    out
}

/// Orthogonal projection `C C* β` onto the invariant coefficients.
///
/// On the circle this zeroes every coefficient with `Σk ≠ 0` and copies the
/// rest bit for bit.
pub fn sym_coeffs(beta: &[c64], basis: &BasisSpec) -> Result<Vec<c64>> {
    basis.check_len(beta.len())?;
    if basis.dim() == 1 {
        let r = basis.invariant_count();
        return Ok(beta
            .iter()
            .enumerate()
            .map(|(i, z)| if i < r { *z } else { c64::new(0.0, 0.0) })
            .collect());
    }
    let (inv, _) = basis.split(beta)?;
    basis.embed_invariant(&inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{compose, rotate_config, sample_haar, so2_quadrature, so3_quadrature_euler, Group, Rotation};
    use crate::harmonics::generalized_d;
    use faer::Side;
    use nalgebra::Vector3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::collections::HashSet;
    use std::f64::consts::TAU;

    fn random_config<R: Rng>(d: usize, n: usize, rng: &mut R) -> Configuration {
        if d == 1 {
            Configuration::circle((0..n).map(|_| rng.random::<f64>() * TAU).collect()).unwrap()
        } else {
            Configuration::sphere_normalized(
                (0..n)
                    .map(|_| Vector3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng)))
                    .collect(),
            )
            .unwrap()
        }
    }

    fn random_coeffs<R: Rng>(p: usize, rng: &mut R) -> Vec<c64> {
        (0..p).map(|_| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    fn dot(a: &[c64], b: &[c64]) -> c64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn small_circle_bases() {
        let b = enumerate_basis(1, 3, 1).unwrap();
        assert_eq!(b.size(), 7);
        assert_eq!(b.indices()[0], MultiIndex::Circle(vec![0, 0, 0]));
        for idx in &b.indices()[1..] {
            assert_eq!(idx.total_degree(), 1);
        }
        assert_eq!(enumerate_basis(1, 1, 0).unwrap().size(), 1);
    }

    #[test]
    fn small_sphere_basis() {
        let b = enumerate_basis(2, 1, 1).unwrap();
        let got: Vec<_> = b
            .indices()
            .iter()
            .map(|i| match i {
                MultiIndex::Sphere { l, m } => (l[0], m[0]),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(got, vec![(0, 0), (1, -1), (1, 0), (1, 1)]);
        assert_eq!(b.invariant_count(), 1);
    }

    #[test]
    fn basis_sizes_match_counting_formulas() {
        let sphere = [1, 10, 52, 190, 553, 1372];
        for (k, &p) in sphere.iter().enumerate() {
            assert_eq!(enumerate_basis(2, 3, k).unwrap().size(), p);
        }
        for k in 0..=8 {
            let p = 1 + (1..=k).map(|j| 4 * j * j + 2).sum::<usize>();
            let b = enumerate_basis(1, 3, k).unwrap();
            assert_eq!(b.size(), p);
            let unique: HashSet<_> = b.indices().iter().collect();
            assert_eq!(unique.len(), p);
            assert!(b.indices().iter().all(|i| i.total_degree() <= k));
        }
    }

    #[test]
    fn circle_invariant_indices() {
        let inv = invariant_indices_circle(3, 2);
        assert_eq!(inv.len(), 7);
        let inv2 = invariant_indices_circle(2, 2);
        assert_eq!(
            inv2,
            vec![MultiIndex::Circle(vec![-1, 1]), MultiIndex::Circle(vec![0, 0]), MultiIndex::Circle(vec![1, -1])]
        );
        for k in 0..5 {
            assert_eq!(invariant_indices_circle(1, k), vec![MultiIndex::Circle(vec![0])]);
        }
        // brute force over the full cube
        for k in 0..=8usize {
            let ki = k as i32;
            let mut count = 0;
            for a in -ki..=ki {
                for b in -ki..=ki {
                    let c = -a - b;
                    if a.abs() + b.abs() + c.abs() <= ki {
                        count += 1;
                    }
                }
            }
            assert_eq!(invariant_indices_circle(3, k).len(), count);
            assert_eq!(enumerate_basis(1, 3, k).unwrap().invariant_count(), count);
        }
    }

    #[test]
    fn circle_ordering_is_invariant_first() {
        let b = enumerate_basis(1, 3, 4).unwrap();
        let r = b.invariant_count();
        assert!(b.indices()[..r].iter().all(|i| i.charge() == 0));
        assert!(b.indices()[r..].iter().all(|i| i.charge() != 0));
        assert!(b.indices()[..r].windows(2).all(|w| w[0] < w[1]));
        assert!(b.indices()[r..].windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn cg_known_values() {
        assert_eq!(clebsch_gordan(0, 0, 0, 0, 0, 0), 1.0);
        assert_eq!(clebsch_gordan(1, 1, 1, 1, 1, 1), 0.0);
        assert!((clebsch_gordan(1, 1, 1, -1, 0, 0) - 1.0 / 3f64.sqrt()).abs() < 1e-10);
        assert!((clebsch_gordan(1, 0, 1, 0, 2, 0) - (2.0f64 / 3.0).sqrt()).abs() < 1e-14);
        assert!((clebsch_gordan(1, 1, 1, -1, 1, 0) - 0.5f64.sqrt()).abs() < 1e-14);
        assert_eq!(clebsch_gordan(2, 3, 1, 0, 3, 3), 0.0);
        assert_eq!(clebsch_gordan(2, 0, 0, 0, 1, 0), 0.0);
    }

    /// Independent oracle: diagonalize J² on each J_z eigenspace of the
    /// product space and fix phases so that ⟨l1 l1; l2 (J−l1) | J J⟩ > 0,
    /// lowering from m = J for the remaining states.
    fn cg_oracle(l1: i32, l2: i32) -> std::collections::HashMap<(i32, i32, i32, i32), f64> {
        let d1 = (2 * l1 + 1) as usize;
        let d2 = (2 * l2 + 1) as usize;
        let dim = d1 * d2;
        let idx = |m1: i32, m2: i32| ((m1 + l1) as usize) * d2 + (m2 + l2) as usize;
        let jp = |l: i32, m: i32| ((l * (l + 1) - m * (m + 1)) as f64).sqrt();
        // J² = J−J+ + Jz² + Jz on the product space
        let mut jplus = Mat::<f64>::zeros(dim, dim);
        let mut jz = vec![0.0; dim];
        for m1 in -l1..=l1 {
            for m2 in -l2..=l2 {
                let c = idx(m1, m2);
                jz[c] = (m1 + m2) as f64;
                if m1 < l1 {
                    jplus[(idx(m1 + 1, m2), c)] += jp(l1, m1);
                }
                if m2 < l2 {
                    jplus[(idx(m1, m2 + 1), c)] += jp(l2, m2);
                }
            }
        }
        let jminus = jplus.transpose().to_owned();
        let mut j2 = &jminus * &jplus;
        for c in 0..dim {
            j2[(c, c)] += jz[c] * jz[c] + jz[c];
        }
        let mut out = std::collections::HashMap::new();
        for big_j in (l1 - l2).abs()..=(l1 + l2) {
            // highest-weight vector: J² eigenvector in the M = J subspace
            let sub: Vec<usize> = (0..dim).filter(|&c| jz[c] == big_j as f64).collect();
            let s = Mat::from_fn(sub.len(), sub.len(), |a, b| j2[(sub[a], sub[b])]);
            let evd = s.self_adjoint_eigen(Side::Lower).unwrap();
            let target = (big_j * (big_j + 1)) as f64;
            let col = (0..sub.len())
                .min_by(|&a, &b| {
                    (evd.S()[a] - target).abs().partial_cmp(&(evd.S()[b] - target).abs()).unwrap()
                })
                .unwrap();
            let mut v = vec![0.0; dim];
            for (a, &c) in sub.iter().enumerate() {
                v[c] = evd.U()[(a, col)];
            }
            // phase: coefficient with m1 = l1 positive
            let m2 = big_j - l1;
            if m2.abs() <= l2 && v[idx(l1, m2)] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            let mut m = big_j;
            loop {
                for m1 in -l1..=l1 {
                    for m2 in -l2..=l2 {
                        if m1 + m2 == m {
                            out.insert((m1, m2, big_j, m), v[idx(m1, m2)]);
                        }
                    }
                }
                if m == -big_j {
                    break;
                }
                let mut w = vec![0.0; dim];
                for r in 0..dim {
                    for c in 0..dim {
                        w[r] += jminus[(r, c)] * v[c];
                    }
                }
                let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                v = w.into_iter().map(|x| x / n).collect();
                m -= 1;
            }
        }
        out
    }

    #[test]
    fn cg_matches_diagonalization_oracle() {
        for l1 in 0..=4 {
            for l2 in 0..=4 {
                let oracle = cg_oracle(l1, l2);
                for l3 in 0..=8 {
                    for m1 in -l1..=l1 {
                        for m2 in -l2..=l2 {
                            for m3 in -l3..=l3 {
                                let expected = oracle.get(&(m1, m2, l3, m3)).copied().unwrap_or(0.0);
                                let got = clebsch_gordan(l1, m1, l2, m2, l3, m3);
                                assert!(
                                    (got - expected).abs() < 1e-12,
                                    "<{l1} {m1}; {l2} {m2} | {l3} {m3}> = {got}, oracle {expected}"
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn cg_exchange_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let l1: i32 = rng.random_range(0..8);
            let l2 = rng.random_range(0..8);
            let l3 = rng.random_range((l1 - l2).abs()..=l1 + l2);
            let m1 = rng.random_range(-l1..=l1);
            let m2 = rng.random_range(-l2..=l2);
            let m3 = m1 + m2;
            if m3.abs() > l3 {
                continue;
            }
            let a = clebsch_gordan(l1, m1, l2, m2, l3, m3);
            let b = clebsch_gordan(l2, m2, l1, m1, l3, m3);
            let sign = if (l1 + l2 - l3) % 2 == 0 { 1.0 } else { -1.0 };
            assert!((a - sign * b).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_rows_are_orthonormal() {
        for (l1, l2) in [(2i32, 3i32), (5, 4), (7, 7)] {
            for l3 in (l1 - l2).abs()..=l1 + l2 {
                for l3b in (l1 - l2).abs()..=l1 + l2 {
                    let m = 0;
                    let s: f64 = (-l1..=l1)
                        .map(|m1| clebsch_gordan(l1, m1, l2, m - m1, l3, m) * clebsch_gordan(l1, m1, l2, m - m1, l3b, m))
                        .sum();
                    let e = if l3 == l3b { 1.0 } else { 0.0 };
                    assert!((s - e).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn triangle_rule_selects_sphere_invariants() {
        assert_eq!(coupled_vector(&[0, 0, 0]), Some(vec![1.0]));
        assert!(coupled_vector(&[2, 0, 1]).is_none());
        assert!(coupled_vector(&[1, 1, 0]).is_some());
        let inv = invariant_basis_sphere3(3);
        assert!(inv.iter().all(|c| {
            let [a, b, l3] = c.ls;
            (a as i32 - b as i32).unsigned_abs() as usize <= l3 && l3 <= a + b
        }));
        let b = enumerate_basis(2, 3, 6).unwrap();
        assert_eq!(b.invariant_count(), invariant_basis_sphere3(6).len());
    }

    #[test]
    fn constant_invariant_is_normalized_product() {
        let inv = &invariant_basis_sphere3(0)[0];
        let r = Vector3::new(0.0, 0.6, 0.8);
        let y = [sph_harm_all(0, &r), sph_harm_all(0, &r), sph_harm_all(0, &r)];
        let expected = (4.0 * std::f64::consts::PI).powf(-1.5);
        assert!((inv.eval_packed(&y) - expected).norm() < 1e-15);
    }

    #[test]
    fn coupled_invariants_are_rotation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let invariants = invariant_basis_sphere3(6);
        for _ in 0..20 {
            let q = sample_haar(Group::So3, &mut rng);
            let c = random_config(2, 3, &mut rng);
            let qc = rotate_config(&q, &c).unwrap();
            let pack = |cfg: &Configuration| {
                let v = cfg.vectors().unwrap();
                [sph_harm_all(6, &v[0]), sph_harm_all(6, &v[1]), sph_harm_all(6, &v[2])]
            };
            let (y, yq) = (pack(&c), pack(&qc));
            for inv in &invariants {
                assert!((inv.eval_packed(&y) - inv.eval_packed(&yq)).norm() < 1e-10, "{:?}", inv.ls);
            }
        }
    }

    #[test]
    fn frame_columns_of_the_basis_are_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..=3 {
            let b = enumerate_basis(2, n, 4).unwrap();
            let cmat = b.coupling_matrix();
            for _ in 0..5 {
                let q = sample_haar(Group::So3, &mut rng);
                let c = random_config(2, n, &mut rng);
                let phi = b.evaluate(&c).unwrap();
                let phiq = b.evaluate(&rotate_config(&q, &c).unwrap()).unwrap();
                for j in 0..b.invariant_count() {
                    let col: Vec<c64> = (0..b.size()).map(|i| cmat[(i, j)]).collect();
                    assert!((dot(&phi, &col) - dot(&phiq, &col)).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn frames_are_unitary_and_block_supported() {
        for k in 0..=6 {
            let b = enumerate_basis(2, 3, k).unwrap();
            for blk in b.blocks() {
                let g = blk.frame().adjoint() * blk.frame();
                for i in 0..blk.len {
                    for j in 0..blk.len {
                        let e = if i == j { 1.0 } else { 0.0 };
                        assert!((g[(i, j)] - e).norm() < 1e-12);
                    }
                }
            }
        }
        for k in 0..=4 {
            let b = enumerate_basis(2, 3, k).unwrap();
            let c = b.coupling_matrix();
            let g = c.adjoint() * &c;
            for i in 0..g.nrows() {
                for j in 0..g.ncols() {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((g[(i, j)] - e).norm() < 1e-12);
                }
            }
            // every column lives on a single l-tuple
            for j in 0..c.ncols() {
                let support: HashSet<_> = (0..b.size())
                    .filter(|&i| c[(i, j)].norm() > 0.0)
                    .map(|i| match &b.indices()[i] {
                        MultiIndex::Sphere { l, .. } => l.clone(),
                        _ => unreachable!(),
                    })
                    .collect();
                assert_eq!(support.len(), 1);
            }
        }
        for k in 0..=8 {
            let b = enumerate_basis(1, 3, k).unwrap();
            let c = b.coupling_matrix();
            for j in 0..c.ncols() {
                for i in 0..c.nrows() {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert_eq!(c[(i, j)], c64::new(e, 0.0));
                }
                assert_eq!(b.indices()[j].charge(), 0);
            }
        }
    }

    #[test]
    fn invariant_count_matches_rank_of_averaged_d() {
        // The Haar average of 𝒟 is the projector onto invariants; an exact
        // quadrature of degree K computes it.
        for (n, k) in [(1, 3), (2, 3), (3, 3), (3, 4)] {
            let b = enumerate_basis(2, n, k).unwrap();
            let rule = so3_quadrature_euler(2 * k);
            let mut avg = Mat::<c64>::zeros(b.size(), b.size());
            for node in rule.nodes() {
                let d = generalized_d(&b, &node.rotation).unwrap().to_dense();
                avg += &d * faer::Scale(c64::new(node.weight, 0.0));
            }
            let sv = avg.singular_values().unwrap();
            let rank = sv.iter().filter(|s| **s > 1e-8).count();
            assert_eq!(rank, b.invariant_count(), "n={n} k={k}");
        }
    }

    #[test]
    fn sym_coeffs_on_circle_examples() {
        let b = enumerate_basis(1, 3, 2).unwrap();
        let pos = |k: Vec<i32>| b.indices().iter().position(|i| *i == MultiIndex::Circle(k.clone())).unwrap();
        let mut beta = vec![c64::new(0.0, 0.0); b.size()];
        beta[pos(vec![1, -1, 0])] = c64::new(0.3, -1.0);
        assert_eq!(sym_coeffs(&beta, &b).unwrap(), beta);
        let mut beta = vec![c64::new(0.0, 0.0); b.size()];
        beta[pos(vec![1, 0, 0])] = c64::new(1.0, 0.0);
        assert!(sym_coeffs(&beta, &b).unwrap().iter().all(|z| *z == c64::new(0.0, 0.0)));
        assert!(sym_coeffs(&beta[1..], &b).is_err());
    }

    #[test]
    fn sym_coeffs_matches_quadrature_average_of_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let k = 4;
        let b = enumerate_basis(1, 3, k).unwrap();
        let beta = random_coeffs(b.size(), &mut rng);
        let sym = sym_coeffs(&beta, &b).unwrap();
        let rule = so2_quadrature(2 * k + 1).unwrap();
        for _ in 0..50 {
            let c = random_config(1, 3, &mut rng);
            let mut avg = c64::new(0.0, 0.0);
            for node in rule.nodes() {
                avg += dot(&b.evaluate(&rotate_config(&node.rotation, &c).unwrap()).unwrap(), &beta) * node.weight;
            }
            assert!((avg - dot(&b.evaluate(&c).unwrap(), &sym)).norm() < 1e-10);
        }
    }

    #[test]
    fn sym_coeffs_matches_quadrature_average_on_sphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = enumerate_basis(2, 3, 3).unwrap();
        let beta = random_coeffs(b.size(), &mut rng);
        let sym = sym_coeffs(&beta, &b).unwrap();
        let rule = so3_quadrature_euler(3);
        for _ in 0..5 {
            let c = random_config(2, 3, &mut rng);
            let mut avg = c64::new(0.0, 0.0);
            for node in rule.nodes() {
                avg += dot(&b.evaluate(&rotate_config(&node.rotation, &c).unwrap()).unwrap(), &beta) * node.weight;
            }
            assert!((avg - dot(&b.evaluate(&c).unwrap(), &sym)).norm() < 1e-10);
        }
    }

    #[test]
    fn frame_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let b = enumerate_basis(2, 3, 4).unwrap();
        let beta = random_coeffs(b.size(), &mut rng);
        let back = b.from_frame(&b.to_frame(&beta).unwrap()).unwrap();
        assert!(beta.iter().zip(&back).all(|(x, y)| (x - y).norm() < 1e-13));
        let a = Mat::from_fn(3, b.size(), |i, j| c64::new((i + j) as f64, (i * j % 5) as f64));
        let au = b.frame_columns(a.as_ref()).unwrap();
        let dense = &a * b.frame_matrix();
        assert!((&au - &dense).norm_max() < 1e-12);
        let ac = b.invariant_columns(a.as_ref()).unwrap();
        assert!((&ac - &a * b.coupling_matrix()).norm_max() < 1e-12);
    }

    #[test]
    fn rotation_block_structure_keeps_invariants_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for (d, k) in [(1, 5), (2, 3)] {
            let b = enumerate_basis(d, 3, k).unwrap();
            let g = Group::for_sphere_dim(d).unwrap();
            let q = sample_haar(g, &mut rng);
            let dq = generalized_d(&b, &q).unwrap().to_dense();
            let u = b.frame_matrix();
            let t = u.adjoint() * &dq * &u;
            let r = b.invariant_count();
            for i in 0..b.size() {
                for j in 0..b.size() {
                    if (i < r) != (j < r) {
                        assert!(t[(i, j)].norm() < 1e-10);
                    }
                }
            }
            let _ = compose(&q, &Rotation::identity(g));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn sym_coeffs_is_an_orthogonal_projector(seed in any::<u64>(), d in 1usize..=2, k in 0usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = enumerate_basis(d, 3, k).unwrap();
            let beta = random_coeffs(b.size(), &mut rng);
            let s1 = sym_coeffs(&beta, &b).unwrap();
            let s2 = sym_coeffs(&s1, &b).unwrap();
            for (x, y) in s1.iter().zip(&s2) {
                prop_assert!((x - y).norm() < 1e-14);
            }
            let resid: Vec<c64> = beta.iter().zip(&s1).map(|(x, y)| x - y).collect();
            let n2 = |v: &[c64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
            prop_assert!((n2(&resid) + n2(&s1) - n2(&beta)).abs() < 1e-12 * n2(&beta).max(1.0));
        }
    }
}
