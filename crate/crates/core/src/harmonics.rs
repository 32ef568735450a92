//! Single-particle basis functions and their rotation matrices.
//!
//! Conventions: complex spherical harmonics with the Condon–Shortley phase,
//! zyz Euler angles, and the row-vector law `Y(Q·r) = Y(r)·D(Q)`. With these
//! choices `D(Q)` equals the textbook active Wigner matrix of `Q⁻¹`, so
//! `D(Q₁Q₂) = D(Q₂)D(Q₁)`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use faer::{c64, Mat, MatRef, Side};
use nalgebra::Vector3;

use crate::coupling::BasisSpec;
use crate::error::{Error, Result};
use crate::geometry::Rotation;

/// Largest `l` for which Wigner matrices are supported.
pub const MAX_L: usize = 30;

/// `e^{ikθ}`.
pub fn eval_fourier(k: i32, theta: f64) -> c64 {
    c64::cis(k as f64 * theta)
}

/// Degree/order pair `(l, m)` with `|m| ≤ l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SphericalIndex {
    l: usize,
    m: i32,
}

impl SphericalIndex {
    pub fn new(l: usize, m: i32) -> Result<Self> {
        if m.unsigned_abs() as usize > l {
            return Err(Error::InvalidArgument(format!("|m| = {} exceeds l = {l}", m.abs())));
        }
        Ok(Self { l, m })
    }

    pub fn l(self) -> usize {
        self.l
    }

    pub fn m(self) -> i32 {
        self.m
    }

    /// Position in the `l² + l + m` packing used by [`sph_harm_all`].
    pub fn flat(self) -> usize {
        ((self.l * self.l + self.l) as i64 + self.m as i64) as usize
    }
}

/// `Y_l^m(r)` for a unit vector `r` (checked within 1e-10).
pub fn sph_harm(idx: SphericalIndex, r: &Vector3<f64>) -> Result<c64> {
    let n = r.norm();
    if n.is_nan() || (n - 1.0).abs() > 1e-10 {
        return Err(Error::Domain(format!("spherical harmonics need a unit vector, norm is {n}")));
    }
    Ok(sph_harm_all(idx.l, r)[idx.flat()])
}

/// All `Y_l^m(r)` with `l ≤ l_max`, packed at `l² + l + m`.
///
/// Normalized associated Legendre functions are generated by the standard
/// upward recurrences in `l`, starting from the sectoral terms `P̄_m^m`.
/// `r` is assumed to be a unit vector.
pub fn sph_harm_all(l_max: usize, r: &Vector3<f64>) -> Vec<c64> {
    let size = (l_max + 1) * (l_max + 1);
    let mut out = vec![c64::new(0.0, 0.0); size];
    let ct = r.z.clamp(-1.0, 1.0);
    let st = r.x.hypot(r.y);
    let phi = r.y.atan2(r.x);
    let idx = |l: usize, m: i32| (l * l + l) as i64 + m as i64;

    let mut pmm = 0.5 / PI.sqrt();
    for m in 0..=l_max {
        if m > 0 {
            let mf = m as f64;
            pmm *= -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * st;
        }
        let e = c64::cis(m as f64 * phi);
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let mut put = |l: usize, p: f64| {
            let y = e * p;
            out[idx(l, m as i32) as usize] = y;
            if m > 0 {
                out[idx(l, -(m as i32)) as usize] = y.conj() * sign;
            }
        };
        put(m, pmm);
        if m == l_max {
            break;
        }
        let mut p_prev = pmm;
        let mut p_cur = (2.0 * m as f64 + 3.0).sqrt() * ct * pmm;
        put(m + 1, p_cur);
        let m2 = (m * m) as f64;
        for l in m + 2..=l_max {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - m2)).sqrt();
            let lm = lf - 1.0;
            let b = ((lm * lm - m2) / (4.0 * lm * lm - 1.0)).sqrt();
            let p_next = a * (ct * p_cur - b * p_prev);
            put(l, p_next);
            p_prev = p_cur;
            p_cur = p_next;
        }
    }
    out
}

/// The `(2l+1)×(2l+1)` matrix `D^l(Q)` with rows `m'` and columns `m`
/// running from `−l` to `l`.
#[derive(Debug, Clone)]
pub struct WignerBlock {
    l: usize,
    matrix: Mat<c64>,
}

impl WignerBlock {
    pub fn l(&self) -> usize {
        self.l
    }

    /// Entry at zero-based position `(i, j) = (m' + l, m + l)`.
    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.matrix[(i, j)]
    }

    /// Entry `D^l_{m'm}`.
    pub fn entry(&self, m_prime: i32, m: i32) -> c64 {
        let l = self.l as i32;
        self.matrix[((m_prime + l) as usize, (m + l) as usize)]
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.matrix.as_ref()
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.matrix
    }
}

// Eigenvectors of J_y in the |l m⟩ basis; row/column index m + l.
fn jy_eigenvectors(l: usize) -> &'static Mat<c64> {
    static CACHE: [OnceLock<Mat<c64>>; MAX_L + 1] = [const { OnceLock::new() }; MAX_L + 1];
    CACHE[l].get_or_init(|| {
        let dim = 2 * l + 1;
        let lf = l as f64;
        // J_y = (J+ − J−)/(2i); J+|m⟩ = √(l(l+1) − m(m+1)) |m+1⟩
        let jy = Mat::from_fn(dim, dim, |i, j| {
            let mi = i as f64 - lf;
            let mj = j as f64 - lf;
            if i == j + 1 {
                let c = (lf * (lf + 1.0) - mj * (mj + 1.0)).sqrt();
                c64::new(0.0, -0.5 * c)
            } else if j == i + 1 {
                let c = (lf * (lf + 1.0) - mi * (mi + 1.0)).sqrt();
                c64::new(0.0, 0.5 * c)
            } else {
                c64::new(0.0, 0.0)
            }
        });
        let evd = jy
            .self_adjoint_eigen(Side::Lower)
            .expect("eigendecomposition of a small Hermitian matrix");
        evd.U().to_owned()
    })
}

/// Little-d matrix `d^l_{m'm}(β) = ⟨l m'| e^{−iβJ_y} |l m⟩` (real).
///
/// Built from the eigenvectors of `J_y`, whose eigenvalues are exactly
/// `−l, …, l` in ascending order.
pub fn wigner_small_d(l: usize, beta: f64) -> Vec<f64> {
    assert!(l <= MAX_L, "l = {l} exceeds the supported maximum {MAX_L}");
    let dim = 2 * l + 1;
    let v = jy_eigenvectors(l);
    let phases: Vec<c64> = (0..dim).map(|k| c64::cis(-beta * (k as f64 - l as f64))).collect();
    let mut d = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let mut s = c64::new(0.0, 0.0);
            for k in 0..dim {
                s += v[(i, k)] * phases[k] * v[(j, k)].conj();
            }
            d[i * dim + j] = s.re;
        }
    }
    d
}

/// `D^l(Q)` satisfying `Y_l^m(Q·r) = Σ_{m'} Y_l^{m'}(r) D^l_{m'm}(Q)`.
pub fn wigner_d(l: usize, q: &Rotation) -> WignerBlock {
    let e = q.euler_zyz();
    wigner_from_euler(l, e.alpha, e.beta, e.gamma)
}

/// `D^0(Q), …, D^{l_max}(Q)`.
pub fn wigner_d_all(l_max: usize, q: &Rotation) -> Vec<WignerBlock> {
    let e = q.euler_zyz();
    (0..=l_max)
        .map(|l| wigner_from_euler(l, e.alpha, e.beta, e.gamma))
        .collect()
}

fn wigner_from_euler(l: usize, alpha: f64, beta: f64, gamma: f64) -> WignerBlock {
    let dim = 2 * l + 1;
    let d = wigner_small_d(l, beta);
    let li = l as i32;
    let ea: Vec<c64> = (-li..=li).map(|m| c64::cis(m as f64 * alpha)).collect();
    let eg: Vec<c64> = (-li..=li).map(|m| c64::cis(m as f64 * gamma)).collect();
    // D(Q)_{m'm} = e^{im'γ} d_{mm'}(β) e^{imα}
    let matrix = Mat::from_fn(dim, dim, |i, j| eg[i] * ea[j] * d[j * dim + i]);
    WignerBlock { l, matrix }
}

/// The matrix `𝒟(Q)` with `φ(Q·R) = φ(R)·𝒟(Q)` for the row vector `φ` of
/// tensor basis functions.
///
/// It is diagonal on the circle and block diagonal on the sphere, one block
/// per tuple `(l_1, …, l_N)`; only the nonzero structure is stored.
#[derive(Debug, Clone)]
pub enum GeneralizedD {
    Diagonal(Vec<c64>),
    Blocks { starts: Vec<usize>, blocks: Vec<Mat<c64>> },
}

impl GeneralizedD {
    pub fn size(&self) -> usize {
        match self {
            GeneralizedD::Diagonal(d) => d.len(),
            GeneralizedD::Blocks { blocks, .. } => blocks.iter().map(|b| b.nrows()).sum(),
        }
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let p = self.size();
        let mut out = Mat::<c64>::zeros(p, p);
        match self {
            GeneralizedD::Diagonal(d) => {
                for (i, z) in d.iter().enumerate() {
                    out[(i, i)] = *z;
                }
            }
            GeneralizedD::Blocks { starts, blocks } => {
                for (s, b) in starts.iter().zip(blocks) {
                    out.submatrix_mut(*s, *s, b.nrows(), b.ncols()).copy_from(b);
                }
            }
        }
        out
    }

    /// `A·𝒟` for a matrix with `p` columns.
    pub fn apply_right(&self, a: MatRef<'_, c64>) -> Mat<c64> {
        assert_eq!(a.ncols(), self.size(), "column count must match the basis size");
        match self {
            GeneralizedD::Diagonal(d) => Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * d[j]),
            GeneralizedD::Blocks { starts, blocks } => {
                let mut out = Mat::<c64>::zeros(a.nrows(), a.ncols());
                for (s, b) in starts.iter().zip(blocks) {
                    let w = b.nrows();
                    let src = a.submatrix(0, *s, a.nrows(), w);
                    out.submatrix_mut(0, *s, a.nrows(), w)
                        .copy_from(src * b.as_ref());
                }
                out
            }
        }
    }

    /// `self += weight · other` for two matrices of the same structure.
    pub fn add_scaled(&mut self, weight: f64, other: &GeneralizedD) {
        match (self, other) {
            (GeneralizedD::Diagonal(a), GeneralizedD::Diagonal(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += *y * weight;
                }
            }
            (GeneralizedD::Blocks { blocks: a, .. }, GeneralizedD::Blocks { blocks: b, .. }) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y * faer::Scale(c64::new(weight, 0.0));
                }
            }
            _ => panic!("mismatched generalized D structures"),
        }
    }

    /// Zero matrix with the same structure.
    pub fn zeros_like(&self) -> GeneralizedD {
        match self {
            GeneralizedD::Diagonal(d) => GeneralizedD::Diagonal(vec![c64::new(0.0, 0.0); d.len()]),
            GeneralizedD::Blocks { starts, blocks } => GeneralizedD::Blocks {
                starts: starts.clone(),
                blocks: blocks.iter().map(|b| Mat::zeros(b.nrows(), b.ncols())).collect(),
            },
        }
    }
}

/// Builds `𝒟(Q)` for a tensor basis.
pub fn generalized_d(basis: &BasisSpec, q: &Rotation) -> Result<GeneralizedD> {
    if q.group().sphere_dim() != basis.dim() {
        return Err(Error::Dimension(format!(
            "{} does not act on a basis over S^{}",
            q.group(),
            basis.dim()
        )));
    }
    match basis.dim() {
        1 => {
            let alpha = q.angle().unwrap_or(0.0);
            Ok(GeneralizedD::Diagonal(
                basis
                    .indices()
                    .iter()
                    .map(|k| c64::cis(alpha * k.charge() as f64))
                    .collect(),
            ))
        }
        _ => {
            let wig: Vec<Mat<c64>> = wigner_d_all(basis.degree(), q)
                .into_iter()
                .map(WignerBlock::into_matrix)
                .collect();
            let mut starts = Vec::with_capacity(basis.blocks().len());
            let mut blocks = Vec::with_capacity(basis.blocks().len());
            for block in basis.blocks() {
                let mut acc = wig[block.ls[0]].clone();
                for &l in &block.ls[1..] {
                    acc = kron(acc.as_ref(), wig[l].as_ref());
                }
                starts.push(block.start);
                blocks.push(acc);
            }
            Ok(GeneralizedD::Blocks { starts, blocks })
        }
    }
}

/// Kronecker product; the right factor's index varies fastest.
pub fn kron(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(a.nrows() * br, a.ncols() * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{gauss_legendre, sample_haar, Group};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::FRAC_PI_2;

    fn random_unit<R: Rng>(rng: &mut R) -> Vector3<f64> {
        let v: Vector3<f64> = Vector3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        v / v.norm()
    }

    #[test]
    fn fourier_values() {
        assert_eq!(eval_fourier(0, 1.234), c64::new(1.0, 0.0));
        assert!((eval_fourier(1, FRAC_PI_2) - c64::new(0.0, 1.0)).norm() < 1e-15);
        assert!((eval_fourier(-3, 0.7) - eval_fourier(3, 0.7).conj()).norm() < 1e-15);
        assert!((eval_fourier(17, 2.9).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn index_validation() {
        assert!(SphericalIndex::new(1, 2).is_err());
        assert_eq!(SphericalIndex::new(2, -1).unwrap().flat(), 5);
    }

    #[test]
    fn low_order_harmonics_match_closed_forms() {
        let y00 = sph_harm(SphericalIndex::new(0, 0).unwrap(), &Vector3::x()).unwrap();
        assert!((y00.re - 0.2820947918).abs() < 1e-10 && y00.im == 0.0);
        let y10 = sph_harm(SphericalIndex::new(1, 0).unwrap(), &Vector3::z()).unwrap();
        assert!((y10.re - 0.4886025119).abs() < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let r = random_unit(&mut rng);
            let y = sph_harm_all(2, &r);
            let xy = c64::new(r.x, r.y);
            let c11 = -(3.0 / (8.0 * PI)).sqrt();
            assert!((y[3] - xy * c11).norm() < 1e-14);
            assert!((y[1] + xy.conj() * c11).norm() < 1e-14);
            let c20 = (5.0 / (16.0 * PI)).sqrt();
            assert!((y[6] - c20 * (3.0 * r.z * r.z - 1.0)).norm() < 1e-14);
            let c21 = -(15.0 / (8.0 * PI)).sqrt();
            assert!((y[7] - xy * (c21 * r.z)).norm() < 1e-14);
            let c22 = (15.0 / (32.0 * PI)).sqrt();
            assert!((y[8] - xy * xy * c22).norm() < 1e-14);
        }
    }

    #[test]
    fn non_unit_vectors_are_rejected() {
        let idx = SphericalIndex::new(1, 0).unwrap();
        assert!(matches!(sph_harm(idx, &Vector3::new(1.0, 1.0, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn harmonics_are_orthonormal_under_product_rule() {
        // Gauss–Legendre in cos θ times a uniform rule in φ is exact for
        // products of harmonics of degree ≤ 8.
        let l_max = 8;
        let (x, w) = gauss_legendre(l_max + 1);
        let nphi = 2 * l_max + 1;
        let size = (l_max + 1) * (l_max + 1);
        let mut gram = vec![c64::new(0.0, 0.0); size * size];
        for (ct, wt) in x.iter().zip(&w) {
            let st = (1.0 - ct * ct).sqrt();
            for j in 0..nphi {
                let phi = 2.0 * PI * j as f64 / nphi as f64;
                let r = Vector3::new(st * phi.cos(), st * phi.sin(), *ct);
                let y = sph_harm_all(l_max, &r);
                let wq = wt * 2.0 * PI / nphi as f64;
                for a in 0..size {
                    for b in 0..size {
                        gram[a * size + b] += y[a].conj() * y[b] * wq;
                    }
                }
            }
        }
        for a in 0..size {
            for b in 0..size {
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((gram[a * size + b] - expected).norm() < 1e-10, "({a},{b})");
            }
        }
    }

    #[test]
    fn small_d_known_values() {
        let b = 0.83;
        let d1 = wigner_small_d(1, b);
        // rows m' = -1, 0, 1
        assert!((d1[4] - b.cos()).abs() < 1e-14);
        assert!((d1[2 * 3 + 2] - (1.0 + b.cos()) / 2.0).abs() < 1e-14);
        assert!((d1[2 * 3 + 1] + b.sin() / 2f64.sqrt()).abs() < 1e-14);
        assert!((d1[2 * 3] - (1.0 - b.cos()) / 2.0).abs() < 1e-14);
        let d2 = wigner_small_d(2, b);
        let p2 = 0.5 * (3.0 * b.cos().powi(2) - 1.0);
        assert!((d2[2 * 5 + 2] - p2).abs() < 1e-14);
    }

    #[test]
    fn wigner_identity_and_trivial_degree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = sample_haar(Group::So3, &mut rng);
        assert!((wigner_d(0, &q).get(0, 0) - 1.0).norm() < 1e-15);
        let id = Rotation::identity(Group::So3);
        for l in 0..=10 {
            let d = wigner_d(l, &id);
            for i in 0..2 * l + 1 {
                for j in 0..2 * l + 1 {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((d.get(i, j) - e).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn wigner_matrices_rotate_harmonics() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let q = sample_haar(Group::So3, &mut rng);
            let r = random_unit(&mut rng);
            let qr = q.apply_vector(&r);
            let y = sph_harm_all(6, &r);
            let yq = sph_harm_all(6, &qr);
            for (l, d) in wigner_d_all(6, &q).iter().enumerate() {
                let off = l * l;
                for j in 0..2 * l + 1 {
                    let rhs: c64 = (0..2 * l + 1).map(|i| y[off + i] * d.get(i, j)).sum();
                    assert!((yq[off + j] - rhs).norm() < 1e-12, "l={l}");
                }
            }
        }
    }

    #[test]
    fn wigner_matrices_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for l in [1, 5, 15, 30] {
            let d = wigner_d(l, &sample_haar(Group::So3, &mut rng));
            let dd = d.matrix().adjoint() * d.matrix();
            for i in 0..2 * l + 1 {
                for j in 0..2 * l + 1 {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((dd[(i, j)] - e).norm() < 1e-12, "l={l}");
                }
            }
        }
    }

    #[test]
    fn wigner_matrices_reverse_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = sample_haar(Group::So3, &mut rng);
        let b = sample_haar(Group::So3, &mut rng);
        let ab = crate::geometry::compose(&a, &b).unwrap();
        for l in 0..=6 {
            let lhs = wigner_d(l, &ab).into_matrix();
            let rhs = wigner_d(l, &b).matrix() * wigner_d(l, &a).matrix();
            assert!((&lhs - &rhs).norm_max() < 1e-12);
        }
    }

    #[test]
    fn kron_layout() {
        let a = Mat::from_fn(2, 2, |i, j| c64::new((i * 2 + j) as f64, 0.0));
        let b = Mat::from_fn(2, 2, |i, j| c64::new(0.0, (i * 2 + j + 1) as f64));
        let k = kron(a.as_ref(), b.as_ref());
        assert_eq!(k[(1, 3)], a[(0, 1)] * b[(1, 1)]);
        assert_eq!(k[(3, 2)], a[(1, 1)] * b[(1, 0)]);
    }
}
