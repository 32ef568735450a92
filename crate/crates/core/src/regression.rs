//! Least-squares fitting in a tensor basis: plain, invariant-only and
//! augmented by weighted rotation sets, with symmetrization diagnostics.
//!
//! All solvers work on the triangular factor `R₀` of `[A | Y]`. Because
//! `A∘Q = A·𝒟(Q)`, the augmented system `{√w_t (A𝒟_t | Y)}` has the same
//! normal equations as `{√w_t (R₀₁₁𝒟_t | r₁₂) ; (0 | r₂₂)}`, which needs
//! `p+1` rows per rotation instead of `n`.

use faer::{c64, Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::coupling::{sym_coeffs, BasisSpec};
use crate::error::{Error, Result};
use crate::geometry::{rotate_config, sample_haar, Configuration, Group, QuadratureRule, Rotation};
use crate::harmonics::{generalized_d, GeneralizedD};
pub use crate::linalg::{lsq_solve_with, Cutoff, LsqSolution};
use crate::linalg::{augment, extreme_singular_values, r_factor, reduced_residual, solve_reduced, RowReducer};

/// Smallest singular value of the augmented system for which the Schur
/// bound is reported.
pub const FULL_RANK_TOL: f64 = 1e-10;

/// Configurations with function values `Y_i = f(R_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    configs: Vec<Configuration>,
    values: Vec<c64>,
}

impl Dataset {
    pub fn new(configs: Vec<Configuration>, values: Vec<c64>) -> Result<Self> {
        if configs.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} configurations but {} values",
                configs.len(),
                values.len()
            )));
        }
        if let Some(first) = configs.first() {
            if let Some(bad) = configs
                .iter()
                .position(|c| c.dim() != first.dim() || c.len() != first.len())
            {
                return Err(Error::Dimension(format!(
                    "configuration {bad} does not share shape (d={}, N={})",
                    first.dim(),
                    first.len()
                )));
            }
        }
        Ok(Self { configs, values })
    }

    pub fn configs(&self) -> &[Configuration] {
        &self.configs
    }

    pub fn values(&self) -> &[c64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    /// `(d, N)` of the stored configurations.
    pub fn shape(&self) -> Option<(usize, usize)> {
        self.configs.first().map(|c| (c.dim(), c.len()))
    }

    /// `Q·R_i` with unchanged values.
    pub fn rotated(&self, q: &Rotation) -> Result<Dataset> {
        let configs = self
            .configs
            .iter()
            .map(|c| rotate_config(q, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            configs,
            values: self.values.clone(),
        })
    }
}

/// `A_ij = φ_j(R_i)`.
pub fn design_matrix(basis: &BasisSpec, data: &Dataset) -> Result<Mat<c64>> {
    design_matrix_of(basis, data.configs())
}

pub fn design_matrix_of(basis: &BasisSpec, configs: &[Configuration]) -> Result<Mat<c64>> {
    let p = basis.size();
    let mut a = Mat::<c64>::zeros(configs.len(), p);
    let mut row = vec![c64::new(0.0, 0.0); p];
    for (i, c) in configs.iter().enumerate() {
        basis.evaluate_into(c, &mut row)?;
        for (j, z) in row.iter().enumerate() {
            a[(i, j)] = *z;
        }
    }
    Ok(a)
}

/// Minimum-norm least-squares solution discarding `σ < cutoff`
/// (and always `σ < 1e-13·σ_max`).
pub fn lsq_solve(a: MatRef<'_, c64>, y: &[c64], cutoff: f64) -> Result<Vec<c64>> {
    Ok(lsq_solve_with(a, y, Cutoff::Absolute(cutoff))?.x)
}

/// How the design matrix is augmented by rotations.
#[derive(Debug, Clone, PartialEq)]
pub enum AugmentationScheme {
    Quadrature(QuadratureRule),
    /// `count` Haar rotations drawn from a ChaCha8 stream seeded with `seed`,
    /// each with weight `1/count`. Smaller counts use a prefix of the same
    /// stream.
    Random { count: usize, seed: u64 },
}

impl AugmentationScheme {
    /// The weighted rotation set acting on configurations of group `group`.
    pub fn rule(&self, group: Group) -> Result<QuadratureRule> {
        match self {
            AugmentationScheme::Quadrature(rule) => {
                if rule.group() != group {
                    return Err(Error::Dimension(format!(
                        "quadrature over {} cannot augment data acted on by {group}",
                        rule.group()
                    )));
                }
                Ok(rule.clone())
            }
            AugmentationScheme::Random { count, seed } => {
                if *count == 0 {
                    return Err(Error::InvalidArgument("random augmentation needs T ≥ 1".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let rotations = (0..*count).map(|_| sample_haar(group, &mut rng)).collect();
                QuadratureRule::equal_weights(group, rotations)
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            AugmentationScheme::Quadrature(rule) => rule.len(),
            AugmentationScheme::Random { count, .. } => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Quantities entering the upper bound on `ε_sym` obtained from the Schur
/// complement of the augmented normal equations.
#[derive(Debug, Clone, PartialEq)]
pub struct SchurDiagnostics {
    /// `‖A_N D̄_T‖·‖A_I β̄_I − Y‖ / c₂`, or `None` if the augmented system is
    /// numerically rank deficient.
    pub bound: Option<f64>,
    /// `‖D̄_T‖_op` with `D̄_T = Σ_t w_t C⊥*𝒟(Q_t)C⊥`.
    pub d_bar_norm: f64,
    /// `‖A_N D̄_T‖_op`.
    pub an_d_bar_norm: f64,
    /// `‖A_I β̄_I − Y‖` for the invariant least-squares solution `β̄_I`.
    pub invariant_residual: f64,
    /// `σ_min` of the Schur complement.
    pub c2: f64,
    /// Smallest singular value of the augmented system.
    pub sigma_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// `‖β_N‖₂`.
    pub eps_sym: f64,
    /// `‖Aβ − Y‖₂` on the training data (unaugmented).
    pub train_residual: f64,
    /// Number of singular values kept by the solver.
    pub rank: usize,
    pub schur: Option<SchurDiagnostics>,
}

/// Fitted coefficients and their split into invariant and complementary
/// frame coordinates.
#[derive(Debug, Clone)]
pub struct RegressionSolution {
    pub basis: BasisSpec,
    /// Coefficients in the tensor basis.
    pub beta: Vec<c64>,
    /// `C*β`.
    pub beta_inv: Vec<c64>,
    /// `C⊥*β`.
    pub beta_non: Vec<c64>,
    pub cutoff: Cutoff,
    pub diagnostics: Diagnostics,
}

impl RegressionSolution {
    fn from_beta(basis: &BasisSpec, beta: Vec<c64>, cutoff: Cutoff, train_residual: f64, rank: usize) -> Result<Self> {
        let (beta_inv, beta_non) = basis.split(&beta)?;
        let eps_sym = norm(&beta_non);
        Ok(Self {
            basis: basis.clone(),
            beta,
            beta_inv,
            beta_non,
            cutoff,
            diagnostics: Diagnostics {
                eps_sym,
                train_residual,
                rank,
                schur: None,
            },
        })
    }

    /// `P_β(R) = Σ_j β_j φ_j(R)`.
    pub fn eval(&self, config: &Configuration) -> Result<c64> {
        let row = self.basis.evaluate(config)?;
        Ok(row.iter().zip(&self.beta).map(|(a, b)| a * b).sum())
    }

    /// The same model with `β` replaced by its invariant projection.
    pub fn symmetrized(&self) -> Result<Self> {
        let beta = sym_coeffs(&self.beta, &self.basis)?;
        let mut out = Self::from_beta(&self.basis, beta, self.cutoff, f64::NAN, self.diagnostics.rank)?;
        out.diagnostics.eps_sym = 0.0;
        out.beta_non.iter_mut().for_each(|z| *z = c64::new(0.0, 0.0));
        Ok(out)
    }

    pub fn eps_sym(&self) -> f64 {
        self.diagnostics.eps_sym
    }
}

fn norm(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// A dataset reduced to the triangular factor of `[A | Y]`.
///
/// Build once and reuse for every solver and augmentation applied to the
/// same data.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    basis: BasisSpec,
    r0: Mat<c64>,
}

/// Triangular factor of an augmented system together with the averaged
/// rotation matrix `Σ_t w_t 𝒟(Q_t)`.
struct Augmented {
    r: Mat<c64>,
    d_bar: GeneralizedD,
}

impl ReducedSystem {
    pub fn new(basis: &BasisSpec, data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptySystem);
        }
        let a = design_matrix(basis, data)?;
        Self::from_design(basis, a.as_ref(), data.values())
    }

    pub fn from_design(basis: &BasisSpec, a: MatRef<'_, c64>, y: &[c64]) -> Result<Self> {
        if a.ncols() != basis.size() || a.nrows() != y.len() {
            return Err(Error::Dimension("design matrix does not match basis and data".into()));
        }
        if a.nrows() == 0 {
            return Err(Error::EmptySystem);
        }
        Ok(Self {
            basis: basis.clone(),
            r0: r_factor(augment(a, y).as_ref()),
        })
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    fn r11(&self) -> MatRef<'_, c64> {
        self.r0.submatrix(0, 0, self.r0.nrows(), self.basis.size())
    }

    fn group(&self) -> Group {
        Group::for_sphere_dim(self.basis.dim()).expect("basis dimension is 1 or 2")
    }

    /// Unaugmented least squares in the full basis.
    pub fn full(&self, cutoff: Cutoff) -> Result<RegressionSolution> {
        let sol = solve_reduced(self.r0.as_ref(), cutoff)?;
        RegressionSolution::from_beta(&self.basis, sol.x, cutoff, sol.residual, sol.rank)
    }

    /// Least squares restricted to the invariant columns `A_I = A·C`.
    pub fn invariant(&self, cutoff: Cutoff) -> Result<RegressionSolution> {
        let (beta_inv, sol) = self.invariant_coefficients(cutoff)?;
        let beta = self.basis.embed_invariant(&beta_inv)?;
        let mut out = RegressionSolution::from_beta(&self.basis, beta, cutoff, sol.residual, sol.rank)?;
        out.beta_inv = beta_inv;
        out.beta_non.iter_mut().for_each(|z| *z = c64::new(0.0, 0.0));
        out.diagnostics.eps_sym = 0.0;
        Ok(out)
    }

    fn invariant_coefficients(&self, cutoff: Cutoff) -> Result<(Vec<c64>, LsqSolution)> {
        let r = self.basis.invariant_count();
        if r == 0 {
            return Err(Error::InvalidArgument("basis has no invariant functions".into()));
        }
        let ai = self.basis.invariant_columns(self.r11())?;
        let p = self.basis.size();
        let k = self.r0.nrows();
        let sys = Mat::from_fn(k, r + 1, |i, j| if j < r { ai[(i, j)] } else { self.r0[(i, p)] });
        let sol = solve_reduced(r_factor(sys.as_ref()).as_ref(), cutoff)?;
        Ok((sol.x.clone(), sol))
    }

    fn augment_with(&self, rule: &QuadratureRule) -> Result<Augmented> {
        let p = self.basis.size();
        let k = self.r0.nrows();
        let r11 = self.r11();
        let mut reducer = RowReducer::new(p + 1);
        let mut d_bar: Option<GeneralizedD> = None;
        let mut block = Mat::<c64>::zeros(k, p + 1);
        for node in rule.nodes() {
            let d = generalized_d(&self.basis, &node.rotation)?;
            let rd = d.apply_right(r11);
            let s = node.weight.sqrt();
            for i in 0..k {
                for j in 0..p {
                    block[(i, j)] = rd[(i, j)] * s;
                }
                block[(i, p)] = self.r0[(i, p)] * s;
            }
            reducer.push(block.as_ref());
            match &mut d_bar {
                Some(acc) => acc.add_scaled(node.weight, &d),
                None => {
                    let mut acc = d.zeros_like();
                    acc.add_scaled(node.weight, &d);
                    d_bar = Some(acc);
                }
            }
        }
        let d_bar = d_bar.ok_or_else(|| Error::InvalidArgument("empty augmentation".into()))?;
        Ok(Augmented {
            r: reducer.finish(),
            d_bar,
        })
    }

    /// Minimizes `½ Σ_t w_t ‖(A∘Q_t)β − Y‖²`.
    pub fn augmented(&self, scheme: &AugmentationScheme, cutoff: Cutoff) -> Result<RegressionSolution> {
        let rule = scheme.rule(self.group())?;
        let aug = self.augment_with(&rule)?;
        let sol = solve_reduced(aug.r.as_ref(), cutoff)?;
        let train = reduced_residual(self.r0.as_ref(), &sol.x);
        RegressionSolution::from_beta(&self.basis, sol.x, cutoff, train, sol.rank)
    }

    /// Augmented solve together with the Schur-complement diagnostics.
    pub fn augmented_with_diagnostics(
        &self,
        scheme: &AugmentationScheme,
        cutoff: Cutoff,
    ) -> Result<RegressionSolution> {
        let rule = scheme.rule(self.group())?;
        let aug = self.augment_with(&rule)?;
        let sol = solve_reduced(aug.r.as_ref(), cutoff)?;
        let train = reduced_residual(self.r0.as_ref(), &sol.x);
        let mut out = RegressionSolution::from_beta(&self.basis, sol.x, cutoff, train, sol.rank)?;
        out.diagnostics.schur = Some(self.schur_from(&aug)?);
        Ok(out)
    }

    /// Schur-complement diagnostics for an augmentation scheme.
    pub fn schur(&self, scheme: &AugmentationScheme) -> Result<SchurDiagnostics> {
        let rule = scheme.rule(self.group())?;
        let aug = self.augment_with(&rule)?;
        self.schur_from(&aug)
    }

    fn schur_from(&self, aug: &Augmented) -> Result<SchurDiagnostics> {
        let p = self.basis.size();
        let r = self.basis.invariant_count();
        let q = p - r;
        let u = self.basis.frame_matrix();
        let un = u.submatrix(0, r, p, q);

        // D̄_T restricted to the complement, in frame coordinates
        let d_dense = aug.d_bar.to_dense();
        let d_nn = un.adjoint() * &d_dense * un;
        let d_bar_norm = extreme_singular_values(d_nn.as_ref())?.0;

        let an = self.r11() * un;
        let an_d = &an * &d_nn;
        let an_d_bar_norm = extreme_singular_values(an_d.as_ref())?.0;

        let (beta_inv, _) = self.invariant_coefficients(Cutoff::none())?;
        let beta_i = self.basis.embed_invariant(&beta_inv)?;
        let invariant_residual = reduced_residual(self.r0.as_ref(), &beta_i);

        // Augmented Gram matrix in frame coordinates is (R U)*(R U); its
        // Schur complement onto the N block is R_NN* R_NN.
        let ra = aug.r.submatrix(0, 0, aug.r.nrows(), p);
        let sigma_min = extreme_singular_values(ra)?.1;
        let rf = self.basis.frame_columns(ra)?;
        let rr = r_factor(rf.as_ref());
        let c2 = if rr.nrows() < p || q == 0 {
            0.0
        } else {
            let rnn = rr.submatrix(r, r, q, q);
            let s = extreme_singular_values(rnn)?.1;
            s * s
        };
        let bound = if sigma_min > FULL_RANK_TOL && c2 > 0.0 {
            Some(an_d_bar_norm * invariant_residual / c2)
        } else if q == 0 {
            Some(0.0)
        } else {
            None
        };
        Ok(SchurDiagnostics {
            bound,
            d_bar_norm,
            an_d_bar_norm,
            invariant_residual,
            c2,
            sigma_min,
        })
    }
}

/// Unaugmented least squares in the full tensor basis.
pub fn full_lsq(basis: &BasisSpec, data: &Dataset, cutoff: Cutoff) -> Result<RegressionSolution> {
    ReducedSystem::new(basis, data)?.full(cutoff)
}

/// Least squares over the invariant subspace only; `β_N = 0`.
pub fn invariant_lsq(basis: &BasisSpec, data: &Dataset, cutoff: Cutoff) -> Result<RegressionSolution> {
    ReducedSystem::new(basis, data)?.invariant(cutoff)
}

/// Least squares on the rotation-augmented data. `Y` is not rotated.
pub fn augmented_lsq(
    basis: &BasisSpec,
    data: &Dataset,
    scheme: &AugmentationScheme,
    cutoff: Cutoff,
) -> Result<RegressionSolution> {
    ReducedSystem::new(basis, data)?.augmented(scheme, cutoff)
}

/// `ε_sym = ‖β − sym(β)‖₂ = ‖β_N‖₂`.
pub fn symmetrization_error(sol: &RegressionSolution) -> f64 {
    norm(&sol.beta_non)
}

/// Root-mean-square of `|P_β(R_i) − Y_i|` over a test set.
pub fn l2_test_error(sol: &RegressionSolution, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::InvalidArgument("test set is empty".into()));
    }
    let a = design_matrix(&sol.basis, test)?;
    let mut sum = 0.0;
    for (i, y) in test.values().iter().enumerate() {
        let mut pred = c64::new(0.0, 0.0);
        for (j, b) in sol.beta.iter().enumerate() {
            pred += a[(i, j)] * b;
        }
        sum += (pred - y).norm_sqr();
    }
    Ok((sum / test.len() as f64).sqrt())
}

/// Schur-complement bound on `ε_sym` for an augmentation of `data`.
pub fn schur_diagnostics(
    basis: &BasisSpec,
    data: &Dataset,
    scheme: &AugmentationScheme,
) -> Result<SchurDiagnostics> {
    ReducedSystem::new(basis, data)?.schur(scheme)
}

/// Solves `(Σ_t w_t 𝒟_t* A* A 𝒟_t) β = Σ_t w_t 𝒟_t* A* Y` directly.
///
/// Only meant as a cross-check of the stacked solver on small, full-rank
/// problems.
pub fn normal_equations_solve(basis: &BasisSpec, data: &Dataset, scheme: &AugmentationScheme) -> Result<Vec<c64>> {
    let group = Group::for_sphere_dim(basis.dim())?;
    let rule = scheme.rule(group)?;
    let a = design_matrix(basis, data)?;
    let p = basis.size();
    let y = Mat::from_fn(data.len(), 1, |i, _| data.values()[i]);
    let mut m = Mat::<c64>::zeros(p, p);
    let mut rhs = Mat::<c64>::zeros(p, 1);
    for node in rule.nodes() {
        let ad = generalized_d(basis, &node.rotation)?.apply_right(a.as_ref());
        let w = faer::Scale(c64::new(node.weight, 0.0));
        m += (ad.adjoint() * &ad) * w;
        rhs += (ad.adjoint() * &y) * w;
    }
    let lu = m.partial_piv_lu();
    use faer::linalg::solvers::Solve;
    let x = lu.solve(&rhs);
    Ok((0..p).map(|i| x[(i, 0)]).collect())
}
