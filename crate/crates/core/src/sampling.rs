//! Data distributions on `(S^d)^3` and random rotation-invariant targets.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use faer::c64;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::coupling::{invariant_basis_sphere3, invariant_indices_circle, CoupledInvariant, MultiIndex};
use crate::error::{Error, Result};
use crate::geometry::Configuration;
use crate::harmonics::sph_harm_all;
use crate::regression::Dataset;

/// Number of particles in every sampled configuration.
pub const N_PARTICLES: usize = 3;
pub const DEFAULT_KAPPA: f64 = 100.0;
pub const DEFAULT_SIGMA: f64 = 0.1;

/// Per-particle measures, particle 1 first. `d` is a point mass, `ds` its
/// mollified version, `H1` the uniform measure on the x–z great circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistributionName {
    Uuu,
    DUu,
    DsUu,
    DH1U,
    DsH1sU,
}

impl DistributionName {
    pub const ALL: [DistributionName; 5] = [
        DistributionName::Uuu,
        DistributionName::DUu,
        DistributionName::DsUu,
        DistributionName::DH1U,
        DistributionName::DsH1sU,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DistributionName::Uuu => "UUU",
            DistributionName::DUu => "dUU",
            DistributionName::DsUu => "dsUU",
            DistributionName::DH1U => "dH1U",
            DistributionName::DsH1sU => "dsH1sU",
        }
    }

    pub fn valid_for(self, d: usize) -> bool {
        match self {
            DistributionName::Uuu | DistributionName::DUu | DistributionName::DsUu => d == 1 || d == 2,
            DistributionName::DH1U | DistributionName::DsH1sU => d == 2,
        }
    }

    /// Whether the measure is a mollified point mass, which calls for an
    /// SVD cutoff in unaugmented fits.
    pub fn is_mollified(self) -> bool {
        matches!(self, DistributionName::DsUu | DistributionName::DsH1sU)
    }
}

impl fmt::Display for DistributionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistributionName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidArgument(format!("unknown distribution {s:?}; expected one of UUU, dUU, dsUU, dH1U, dsH1sU"))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionSpec {
    d: usize,
    name: DistributionName,
    kappa: f64,
    sigma: f64,
}

impl DistributionSpec {
    /// Spec with `κ = 100` and `σ = 0.1`.
    pub fn new(d: usize, name: DistributionName) -> Result<Self> {
        Self::with_params(d, name, DEFAULT_KAPPA, DEFAULT_SIGMA)
    }

    pub fn with_params(d: usize, name: DistributionName, kappa: f64, sigma: f64) -> Result<Self> {
        if !name.valid_for(d) {
            return Err(Error::InvalidArgument(format!("distribution {name} is not defined on S^{d}")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidArgument(format!("von Mises concentration must be positive, got {kappa}")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("angle noise must be nonnegative, got {sigma}")));
        }
        Ok(Self { d, name, kappa, sigma })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn name(&self) -> DistributionName {
        self.name
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Von Mises angle in `[0, 2π)` by the Best–Fisher rejection scheme.
pub fn von_mises<R: Rng + ?Sized>(mu: f64, kappa: f64, rng: &mut R) -> f64 {
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let u3: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = if u3 > 0.5 { f.acos() } else { -f.acos() };
            return (mu + theta).rem_euclid(TAU);
        }
    }
}

pub fn uniform_sphere<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v: Vector3<f64> = Vector3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}

fn from_angles(polar: f64, azimuth: f64) -> Vector3<f64> {
    Vector3::new(polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin(), polar.cos())
}

/// Point at spherical angles `(polar, azimuth)` after independent Gaussian
/// noise on both angles.
fn perturbed<R: Rng + ?Sized>(polar: f64, azimuth: f64, sigma: f64, rng: &mut R) -> Vector3<f64> {
    if sigma == 0.0 {
        return from_angles(polar, azimuth);
    }
    let noise = Normal::new(0.0, sigma).expect("sigma is validated");
    let v = from_angles(polar + noise.sample(rng), azimuth + noise.sample(rng));
    v / v.norm()
}

pub fn sample_config<R: Rng + ?Sized>(spec: &DistributionSpec, rng: &mut R) -> Configuration {
    use DistributionName::*;
    if spec.d == 1 {
        let first = match spec.name {
            Uuu => rng.random::<f64>() * TAU,
            DUu => 0.0,
            _ => von_mises(0.0, spec.kappa, rng),
        };
        let angles = vec![first, rng.random::<f64>() * TAU, rng.random::<f64>() * TAU];
        return Configuration::circle(angles).expect("finite angles");
    }
    let north = Vector3::new(0.0, 0.0, 1.0);
    let (r1, r2) = match spec.name {
        Uuu => (uniform_sphere(rng), uniform_sphere(rng)),
        DUu => (north, uniform_sphere(rng)),
        DsUu => (perturbed(0.0, 0.0, spec.sigma, rng), uniform_sphere(rng)),
        DH1U => {
            let t = rng.random::<f64>() * TAU;
            (north, Vector3::new(t.sin(), 0.0, t.cos()))
        }
        DsH1sU => {
            let t = rng.random::<f64>() * TAU;
            (perturbed(0.0, 0.0, spec.sigma, rng), perturbed(t, 0.0, spec.sigma, rng))
        }
    };
    Configuration::sphere_normalized(vec![r1, r2, uniform_sphere(rng)]).expect("unit vectors")
}

pub fn sample_configs<R: Rng + ?Sized>(spec: &DistributionSpec, n: usize, rng: &mut R) -> Vec<Configuration> {
    (0..n).map(|_| sample_config(spec, rng)).collect()
}

/// Coefficient envelope `g(‖k‖₁)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decay {
    /// `e^{-α‖k‖₁}`.
    Exponential(f64),
    /// `(1 + ‖k‖₁)^{-p}`.
    Algebraic(f64),
}

impl Decay {
    pub fn weight(self, degree: usize) -> f64 {
        match self {
            Decay::Exponential(alpha) => (-alpha * degree as f64).exp(),
            Decay::Algebraic(p) => (1.0 + degree as f64).powf(-p),
        }
    }
}

/// Label of one invariant function in a target.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetIndex {
    /// `e^{i k·θ}` with `Σk = 0`.
    Circle(Vec<i32>),
    /// CG-coupled triple product of degrees `l`.
    Coupled([usize; 3]),
}

impl TargetIndex {
    pub fn degree(&self) -> usize {
        match self {
            TargetIndex::Circle(k) => k.iter().map(|x| x.unsigned_abs() as usize).sum(),
            TargetIndex::Coupled(l) => l.iter().sum(),
        }
    }
}

#[derive(Debug, Clone)]
enum Terms {
    Circle(Vec<(Vec<i32>, c64)>),
    Sphere(Vec<(CoupledInvariant, c64)>),
}

/// `f = Σ c_k g(‖k‖₁) φ̃_k` over invariant functions of degree `≤ K̃`.
#[derive(Debug, Clone)]
pub struct TargetFunction {
    d: usize,
    decay: Decay,
    generating_degree: usize,
    seed: u64,
    terms: Terms,
}

/// Random invariant target on `(S^d)^3` with raw coefficients uniform in
/// `[-1, 1]` drawn in basis order from a ChaCha8 stream.
pub fn make_target(d: usize, decay: Decay, generating_degree: usize, seed: u64) -> Result<TargetFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |deg: usize| c64::new(rng.random_range(-1.0..=1.0) * decay.weight(deg), 0.0);
    let terms = match d {
        1 => Terms::Circle(
            invariant_indices_circle(N_PARTICLES, generating_degree)
                .into_iter()
                .map(|idx| {
                    let deg = idx.total_degree();
                    let MultiIndex::Circle(k) = idx else { unreachable!() };
                    (k, draw(deg))
                })
                .collect(),
        ),
        2 => Terms::Sphere(
            invariant_basis_sphere3(generating_degree)
                .into_iter()
                .map(|inv| {
                    let c = draw(inv.total_degree());
                    (inv, c)
                })
                .collect(),
        ),
        _ => return Err(Error::Dimension(format!("sphere dimension must be 1 or 2, got {d}"))),
    };
    Ok(TargetFunction {
        d,
        decay,
        generating_degree,
        seed,
        terms,
    })
}

impl TargetFunction {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn decay(&self) -> Decay {
        self.decay
    }

    pub fn generating_degree(&self) -> usize {
        self.generating_degree
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        match &self.terms {
            Terms::Circle(t) => t.len(),
            Terms::Sphere(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Scaled coefficients with their labels.
    pub fn coefficients(&self) -> Vec<(TargetIndex, c64)> {
        match &self.terms {
            Terms::Circle(t) => t.iter().map(|(k, c)| (TargetIndex::Circle(k.clone()), *c)).collect(),
            Terms::Sphere(t) => t.iter().map(|(inv, c)| (TargetIndex::Coupled(inv.ls), *c)).collect(),
        }
    }

    /// Keeps the terms of degree `≤ k`.
    pub fn truncated(&self, k: usize) -> TargetFunction {
        let terms = match &self.terms {
            Terms::Circle(t) => Terms::Circle(
                t.iter()
                    .filter(|(idx, _)| idx.iter().map(|x| x.unsigned_abs() as usize).sum::<usize>() <= k)
                    .cloned()
                    .collect(),
            ),
            Terms::Sphere(t) => Terms::Sphere(t.iter().filter(|(inv, _)| inv.total_degree() <= k).cloned().collect()),
        };
        TargetFunction {
            generating_degree: self.generating_degree.min(k),
            terms,
            ..self.clone()
        }
    }

    /// `Σ_{‖k‖₁ > k} |coef|²`.
    pub fn tail_sq(&self, k: usize) -> f64 {
        self.coefficients()
            .iter()
            .filter(|(idx, _)| idx.degree() > k)
            .map(|(_, c)| c.norm_sqr())
            .sum()
    }

    /// `‖f − f_k‖` in `L²` of the uniform probability measure.
    ///
    /// The coupled invariants are orthonormal for the surface measure, so on
    /// the sphere the tail picks up a factor `(4π)^{-3/2}`.
    pub fn tail_rms(&self, k: usize) -> f64 {
        let scale = if self.d == 2 { (4.0 * PI).powf(-1.5) } else { 1.0 };
        scale * self.tail_sq(k).sqrt()
    }

    pub fn eval(&self, config: &Configuration) -> Result<c64> {
        if config.dim() != self.d || config.len() != N_PARTICLES {
            return Err(Error::Dimension(format!(
                "target on (S^{})^3 cannot evaluate {} particles on S^{}",
                self.d,
                config.len(),
                config.dim()
            )));
        }
        let kmax = self.generating_degree as i32;
        match &self.terms {
            Terms::Circle(terms) => {
                let angles = config.angles().expect("circle configuration");
                let powers: Vec<Vec<c64>> = angles
                    .iter()
                    .map(|t| (-kmax..=kmax).map(|k| c64::cis(k as f64 * t)).collect())
                    .collect();
                Ok(terms
                    .iter()
                    .map(|(k, c)| {
                        let mut z = *c;
                        for (p, kj) in powers.iter().zip(k) {
                            z *= p[(kj + kmax) as usize];
                        }
                        z
                    })
                    .sum())
            }
            Terms::Sphere(terms) => {
                let v = config.vectors().expect("sphere configuration");
                let ylm = [
                    sph_harm_all(self.generating_degree, &v[0]),
                    sph_harm_all(self.generating_degree, &v[1]),
                    sph_harm_all(self.generating_degree, &v[2]),
                ];
                Ok(terms.iter().map(|(inv, c)| inv.eval_packed(&ylm) * c).sum())
            }
        }
    }
}

pub fn eval_target(f: &TargetFunction, config: &Configuration) -> Result<c64> {
    f.eval(config)
}

/// `n` samples of `spec` labelled by `f`.
pub fn make_dataset<R: Rng + ?Sized>(
    spec: &DistributionSpec,
    f: &TargetFunction,
    n: usize,
    rng: &mut R,
) -> Result<Dataset> {
    if spec.d() != f.d() {
        return Err(Error::Dimension(format!(
            "distribution on S^{} but target on S^{}",
            spec.d(),
            f.d()
        )));
    }
    let configs = sample_configs(spec, n, rng);
    let values = configs.iter().map(|c| f.eval(c)).collect::<Result<Vec<_>>>()?;
    Dataset::new(configs, values)
}

/// CSV with a `d,N` header line, its values, then one row per sample:
/// flattened coordinates followed by `re,im`.
pub fn write_dataset_csv<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    let (d, n) = data
        .shape()
        .ok_or_else(|| Error::InvalidArgument("cannot export an empty dataset".into()))?;
    writeln!(out, "d,N")?;
    writeln!(out, "{d},{n}")?;
    for (c, y) in data.configs().iter().zip(data.values()) {
        let mut fields: Vec<String> = c.coordinates().iter().map(|x| format!("{x:e}")).collect();
        fields.push(format!("{:e}", y.re));
        fields.push(format!("{:e}", y.im));
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn read_dataset_csv<R: BufRead>(input: R) -> Result<Dataset> {
    let mut lines = input.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, l)) => Ok((i + 1, l?)),
            None => Err(Error::Format(format!("missing {what}"))),
        }
    };
    let (line, header) = next("header")?;
    if header.trim() != "d,N" {
        return Err(Error::Parse {
            line,
            msg: format!("expected header \"d,N\", found {header:?}"),
        });
    }
    let (line, shape) = next("shape line")?;
    let nums: Vec<usize> = shape
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse {
            line,
            msg: format!("bad shape: {e}"),
        })?;
    let [d, n] = nums[..] else {
        return Err(Error::Parse {
            line,
            msg: "shape line must hold two integers".into(),
        });
    };
    let width = if d == 1 { n } else { 3 * n };
    let mut configs = Vec::new();
    let mut values = Vec::new();
    for (i, l) in lines {
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        let line = i + 1;
        let fields: Vec<f64> = l
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line,
                msg: format!("bad number: {e}"),
            })?;
        if fields.len() != width + 2 {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", width + 2, fields.len()),
            });
        }
        configs.push(Configuration::from_coordinates(d, &fields[..width])?);
        values.push(c64::new(fields[width], fields[width + 1]));
    }
    Dataset::new(configs, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rotate_config, sample_haar, Group};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn names_round_trip_and_validate() {
        for n in DistributionName::ALL {
            assert_eq!(n.as_str().parse::<DistributionName>().unwrap(), n);
        }
        assert!(DistributionSpec::new(1, DistributionName::DH1U).is_err());
        assert!(DistributionSpec::with_params(1, DistributionName::DsUu, 0.0, 0.1).is_err());
        assert!(DistributionSpec::with_params(2, DistributionName::DsUu, 1.0, -0.1).is_err());
        assert!("xyz".parse::<DistributionName>().is_err());
    }

    #[test]
    fn point_masses_are_exact() {
        let mut r = rng(1);
        let s = DistributionSpec::new(1, DistributionName::DUu).unwrap();
        for _ in 0..100 {
            assert_eq!(sample_config(&s, &mut r).angles().unwrap()[0], 0.0);
        }
        let s = DistributionSpec::new(2, DistributionName::DH1U).unwrap();
        for _ in 0..100 {
            let c = sample_config(&s, &mut r);
            let v = c.vectors().unwrap();
            assert_eq!(v[0], Vector3::new(0.0, 0.0, 1.0));
            assert!(v[1].y.abs() < 1e-12);
            assert!((v[1].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbed_variants_stay_near_their_support() {
        let mut r = rng(2);
        let s = DistributionSpec::new(2, DistributionName::DsH1sU).unwrap();
        for _ in 0..200 {
            let c = sample_config(&s, &mut r);
            let v = c.vectors().unwrap();
            assert!(v[0].z > 0.8);
            assert!(v[1].y.abs() < 0.6);
        }
    }

    #[test]
    fn uniform_sphere_mean_vanishes() {
        let mut r = rng(3);
        let n = 100_000;
        let mut sum = Vector3::zeros();
        for _ in 0..n {
            sum += uniform_sphere(&mut r);
        }
        let mean = sum / n as f64;
        assert!(mean.norm() < 4.0 / 3f64.sqrt() / (n as f64).sqrt());
    }

    #[test]
    fn von_mises_circular_mean() {
        let mut r = rng(4);
        let n = 100_000;
        let kappa = 100.0;
        let (mut s, mut c) = (0.0, 0.0);
        for _ in 0..n {
            let t = von_mises(0.0, kappa, &mut r);
            s += t.sin();
            c += t.cos();
        }
        let mean = s.atan2(c);
        assert!(mean.abs() < 4.0 / (n as f64 * kappa).sqrt());
        // E cos θ = I₁(κ)/I₀(κ) ≈ 1 − 1/(2κ) for large κ
        assert!((c / n as f64 - (1.0 - 0.5 / kappa - 0.125 / (kappa * kappa))).abs() < 1e-3);
    }

    #[test]
    fn haar_rotated_mollified_samples_are_uniform() {
        let mut r = rng(5);
        let s = DistributionSpec::new(1, DistributionName::DsUu).unwrap();
        let n = 100_000;
        let mut bins = [0usize; 16];
        for _ in 0..n {
            let c = sample_config(&s, &mut r);
            let q = sample_haar(Group::So2, &mut r);
            let t = rotate_config(&q, &c).unwrap().angles().unwrap()[0].rem_euclid(TAU);
            bins[((t / TAU * 16.0) as usize).min(15)] += 1;
        }
        let expected = n as f64 / 16.0;
        let chi2: f64 = bins.iter().map(|&b| (b as f64 - expected).powi(2) / expected).sum();
        // 0.999 quantile of χ² with 15 degrees of freedom
        assert!(chi2 < 37.697, "chi2 = {chi2}");
    }

    #[test]
    fn targets_are_deterministic_and_bounded() {
        let a = make_target(1, Decay::Exponential(2.0), 10, 7).unwrap();
        let b = make_target(1, Decay::Exponential(2.0), 10, 7).unwrap();
        assert_eq!(a.coefficients(), b.coefficients());
        let (idx, c0) = &a.coefficients()[..]
            .iter()
            .find(|(i, _)| i.degree() == 0)
            .cloned()
            .unwrap();
        assert_eq!(idx, &TargetIndex::Circle(vec![0, 0, 0]));
        assert!(c0.norm() <= 1.0);
        for (idx, c) in a.coefficients() {
            assert!(c.norm() <= (-2.0 * idx.degree() as f64).exp() + 1e-15);
        }
        let other = make_target(1, Decay::Exponential(2.0), 10, 8).unwrap();
        assert_ne!(a.coefficients(), other.coefficients());
    }

    #[test]
    fn constant_targets() {
        let f = make_target(1, Decay::Exponential(2.0), 0, 3).unwrap();
        let c0 = f.coefficients()[0].1;
        let cfg = Configuration::circle(vec![0.3, 1.0, 2.0]).unwrap();
        assert!((f.eval(&cfg).unwrap() - c0).norm() < 1e-15);
        let g = make_target(2, Decay::Exponential(2.0), 0, 3).unwrap();
        let c0 = g.coefficients()[0].1;
        let cfg = sample_config(&DistributionSpec::new(2, DistributionName::Uuu).unwrap(), &mut rng(1));
        assert!((g.eval(&cfg).unwrap() - c0 * (4.0 * PI).powf(-1.5)).norm() < 1e-14);
    }

    #[test]
    fn targets_are_rotation_invariant() {
        let mut r = rng(6);
        for d in [1, 2] {
            let f = make_target(d, Decay::Exponential(1.0), if d == 1 { 12 } else { 7 }, 9).unwrap();
            let spec = DistributionSpec::new(d, DistributionName::Uuu).unwrap();
            let g = Group::for_sphere_dim(d).unwrap();
            for _ in 0..50 {
                let c = sample_config(&spec, &mut r);
                let q = sample_haar(g, &mut r);
                let diff = f.eval(&rotate_config(&q, &c).unwrap()).unwrap() - f.eval(&c).unwrap();
                assert!(diff.norm() < 1e-9);
            }
        }
    }

    #[test]
    fn tail_matches_direct_sum_and_monte_carlo() {
        let f = make_target(1, Decay::Exponential(1.0), 12, 4).unwrap();
        let direct: f64 = f
            .coefficients()
            .iter()
            .filter(|(i, _)| i.degree() > 3)
            .map(|(_, c)| c.norm() * c.norm())
            .sum();
        assert!((f.tail_sq(3) - direct).abs() < 1e-14);
        assert_eq!(f.tail_sq(12), 0.0);
        let fk = f.truncated(3);
        assert!((fk.tail_sq(0) - (f.tail_sq(0) - f.tail_sq(3))).abs() < 1e-14);

        let mut r = rng(10);
        let spec = DistributionSpec::new(1, DistributionName::Uuu).unwrap();
        let n = 1000;
        let sup: f64 = f.coefficients().iter().filter(|(i, _)| i.degree() > 3).map(|(_, c)| c.norm()).sum();
        let mut acc = 0.0;
        for _ in 0..n {
            let c = sample_config(&spec, &mut r);
            acc += (f.eval(&c).unwrap() - fk.eval(&c).unwrap()).norm_sqr();
        }
        let rms = (acc / n as f64).sqrt();
        assert!(rms <= sup);
        assert!((rms - f.tail_rms(3)).abs() < 4.0 / (n as f64).sqrt() * sup);
    }

    #[test]
    fn algebraic_decay_envelope() {
        assert_eq!(Decay::Algebraic(2.0).weight(0), 1.0);
        assert!((Decay::Algebraic(0.5).weight(3) - 0.5).abs() < 1e-15);
        assert!((Decay::Exponential(2.0).weight(1) - (-2f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn datasets_are_reproducible_and_round_trip() {
        for d in [1, 2] {
            let f = make_target(d, Decay::Exponential(2.0), 4, 1).unwrap();
            let spec = DistributionSpec::new(d, DistributionName::DsUu).unwrap();
            let a = make_dataset(&spec, &f, 20, &mut rng(11)).unwrap();
            let b = make_dataset(&spec, &f, 20, &mut rng(11)).unwrap();
            assert_eq!(a, b);
            let mut buf = Vec::new();
            write_dataset_csv(&a, &mut buf).unwrap();
            let back = read_dataset_csv(&buf[..]).unwrap();
            assert_eq!(back.len(), 20);
            for (x, y) in back.configs().iter().zip(a.configs()) {
                assert!(x.max_distance(y).unwrap() < 1e-14);
            }
            assert_eq!(back.values(), a.values());
        }
        assert!(read_dataset_csv("x,y\n".as_bytes()).is_err());
        assert!(matches!(read_dataset_csv("d,N\n1,3\n0,0\n".as_bytes()), Err(Error::Parse { line: 3, .. })));
    }
}
