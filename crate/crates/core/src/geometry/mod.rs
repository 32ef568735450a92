//! Particle configurations on S¹ and S², rotations of SO(2)/SO(3) and
//! Haar-distributed sampling.

mod quadrature;

pub use quadrature::{
    gauss_legendre, read_quadrature, so2_quadrature, so3_quadrature_euler, verify_exactness,
    write_quadrature, QuadratureNode, QuadratureRule, EXACTNESS_TOL,
};

use std::f64::consts::TAU;
use std::fmt;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Tolerance used when validating unit vectors and orthogonal matrices.
pub const GEOMETRY_TOL: f64 = 1e-12;

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    // rem_euclid rounds tiny negative inputs up to exactly TAU
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Distance between two angles on the circle, in `[0, π]`.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(TAU - d)
}

/// The rotation group acting on a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    So2,
    So3,
}

impl Group {
    /// The group acting on the sphere of dimension `dim` (1 → SO(2), 2 → SO(3)).
    pub fn for_sphere_dim(dim: usize) -> Result<Self> {
        match dim {
            1 => Ok(Group::So2),
            2 => Ok(Group::So3),
            _ => Err(Error::Dimension(format!(
                "sphere dimension must be 1 or 2, got {dim}"
            ))),
        }
    }

    pub fn sphere_dim(self) -> usize {
        match self {
            Group::So2 => 1,
            Group::So3 => 2,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Group::So2 => f.write_str("SO(2)"),
            Group::So3 => f.write_str("SO(3)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Points {
    Circle(Vec<f64>),
    Sphere(Vec<Vector3<f64>>),
}

/// An ordered collection of `N ≥ 1` particles on S¹ (angles) or S² (unit vectors).
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    points: Points,
}

impl Configuration {
    /// Particles on the circle. Angles are canonicalized to `[0, 2π)`.
    pub fn circle(angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::InvalidArgument(
                "configuration needs at least one particle".into(),
            ));
        }
        if let Some(a) = angles.iter().find(|a| !a.is_finite()) {
            return Err(Error::Domain(format!("non-finite angle {a}")));
        }
        Ok(Self {
            points: Points::Circle(angles.into_iter().map(wrap_angle).collect()),
        })
    }

    /// Particles on the unit sphere. Every vector must have unit length within 1e-12.
    pub fn sphere(points: Vec<Vector3<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument(
                "configuration needs at least one particle".into(),
            ));
        }
        for (i, p) in points.iter().enumerate() {
            let n = p.norm();
            if !n.is_finite() || (n - 1.0).abs() > GEOMETRY_TOL {
                return Err(Error::Domain(format!(
                    "particle {i} is not a unit vector (norm {n})"
                )));
            }
        }
        Ok(Self {
            points: Points::Sphere(points),
        })
    }

    /// Like [`Configuration::sphere`] but projects every vector back onto the
    /// sphere first. Fails on zero or non-finite vectors.
    pub fn sphere_normalized(points: Vec<Vector3<f64>>) -> Result<Self> {
        let mut out = Vec::with_capacity(points.len());
        for p in points {
            let n = p.norm();
            if !(n.is_finite() && n > 0.0) {
                return Err(Error::Domain("cannot normalize a zero vector".into()));
            }
            out.push(p / n);
        }
        Self::sphere(out)
    }

    /// Sphere dimension `d` (1 or 2).
    pub fn dim(&self) -> usize {
        match self.points {
            Points::Circle(_) => 1,
            Points::Sphere(_) => 2,
        }
    }

    /// Number of particles.
    pub fn len(&self) -> usize {
        match &self.points {
            Points::Circle(a) => a.len(),
            Points::Sphere(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn angles(&self) -> Option<&[f64]> {
        match &self.points {
            Points::Circle(a) => Some(a),
            Points::Sphere(_) => None,
        }
    }

    pub fn vectors(&self) -> Option<&[Vector3<f64>]> {
        match &self.points {
            Points::Circle(_) => None,
            Points::Sphere(v) => Some(v),
        }
    }

    /// Flattened coordinates: angles for d=1, `x y z` triples for d=2.
    pub fn coordinates(&self) -> Vec<f64> {
        match &self.points {
            Points::Circle(a) => a.clone(),
            Points::Sphere(v) => v.iter().flat_map(|p| [p.x, p.y, p.z]).collect(),
        }
    }

    /// Inverse of [`Configuration::coordinates`].
    pub fn from_coordinates(dim: usize, coords: &[f64]) -> Result<Self> {
        match dim {
            1 => Self::circle(coords.to_vec()),
            2 => {
                if coords.len() % 3 != 0 {
                    return Err(Error::Dimension(format!(
                        "{} coordinates do not form 3-vectors",
                        coords.len()
                    )));
                }
                Self::sphere(
                    coords
                        .chunks_exact(3)
                        .map(|c| Vector3::new(c[0], c[1], c[2]))
                        .collect(),
                )
            }
            _ => Err(Error::Dimension(format!("unsupported sphere dimension {dim}"))),
        }
    }

    /// Largest coordinate-wise distance to another configuration
    /// (angles compared modulo 2π).
    pub fn max_distance(&self, other: &Configuration) -> Option<f64> {
        match (&self.points, &other.points) {
            (Points::Circle(a), Points::Circle(b)) if a.len() == b.len() => Some(
                a.iter()
                    .zip(b)
                    .map(|(x, y)| angle_distance(*x, *y))
                    .fold(0.0, f64::max),
            ),
            (Points::Sphere(a), Points::Sphere(b)) if a.len() == b.len() => Some(
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y).amax())
                    .fold(0.0, f64::max),
            ),
            _ => None,
        }
    }
}

/// Rotation angles of the zyz Euler decomposition `Rz(alpha) Ry(beta) Rz(gamma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerZyz {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl EulerZyz {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { alpha, beta, gamma }
    }

    /// Active rotation matrix `Rz(alpha) Ry(beta) Rz(gamma)`.
    pub fn to_matrix(self) -> Matrix3<f64> {
        rot_z(self.alpha) * rot_y(self.beta) * rot_z(self.gamma)
    }

    /// Extracts zyz angles from a rotation matrix. `beta` lands in `[0, π]`;
    /// at the poles (`sin beta = 0`) the whole in-plane angle goes to `alpha`.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let sb = m[(0, 2)].hypot(m[(1, 2)]);
        let beta = sb.atan2(m[(2, 2)]);
        if sb > 1e-14 {
            let alpha = m[(1, 2)].atan2(m[(0, 2)]);
            let gamma = m[(2, 1)].atan2(-m[(2, 0)]);
            Self::new(wrap_angle(alpha), beta, wrap_angle(gamma))
        } else if m[(2, 2)] > 0.0 {
            Self::new(wrap_angle(m[(1, 0)].atan2(m[(0, 0)])), 0.0, 0.0)
        } else {
            Self::new(
                wrap_angle((-m[(1, 0)]).atan2(-m[(0, 0)])),
                std::f64::consts::PI,
                0.0,
            )
        }
    }
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn rot_y(b: f64) -> Matrix3<f64> {
    let (s, c) = b.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// An element of SO(2) or SO(3).
///
/// SO(3) rotations always carry their matrix; rotations built from Euler
/// angles remember them so that Wigner matrices can be evaluated without
/// re-extracting the angles.
#[derive(Debug, Clone, PartialEq)]
pub enum Rotation {
    So2 {
        angle: f64,
    },
    So3 {
        matrix: Matrix3<f64>,
        euler: Option<EulerZyz>,
    },
}

impl Rotation {
    pub fn so2(angle: f64) -> Self {
        Rotation::So2 {
            angle: wrap_angle(angle),
        }
    }

    pub fn from_euler_zyz(alpha: f64, beta: f64, gamma: f64) -> Self {
        let euler = EulerZyz::new(alpha, beta, gamma);
        Rotation::So3 {
            matrix: euler.to_matrix(),
            euler: Some(euler),
        }
    }

    /// Wraps an orthogonal matrix with determinant +1 (both checked within 1e-12).
    pub fn so3_from_matrix(matrix: Matrix3<f64>) -> Result<Self> {
        let defect = (matrix.transpose() * matrix - Matrix3::identity()).amax();
        let det = matrix.determinant();
        if defect.is_nan() || defect > GEOMETRY_TOL || (det - 1.0).abs() > GEOMETRY_TOL {
            return Err(Error::Domain(format!(
                "matrix is not in SO(3): orthogonality defect {defect:e}, det {det}"
            )));
        }
        Ok(Rotation::So3 {
            matrix,
            euler: None,
        })
    }

    pub fn identity(group: Group) -> Self {
        match group {
            Group::So2 => Rotation::So2 { angle: 0.0 },
            Group::So3 => Rotation::So3 {
                matrix: Matrix3::identity(),
                euler: Some(EulerZyz::new(0.0, 0.0, 0.0)),
            },
        }
    }

    pub fn group(&self) -> Group {
        match self {
            Rotation::So2 { .. } => Group::So2,
            Rotation::So3 { .. } => Group::So3,
        }
    }

    /// Rotation angle for SO(2).
    pub fn angle(&self) -> Option<f64> {
        match self {
            Rotation::So2 { angle } => Some(*angle),
            Rotation::So3 { .. } => None,
        }
    }

    /// Rotation matrix; SO(2) rotations are embedded as rotations about z.
    pub fn matrix(&self) -> Matrix3<f64> {
        match self {
            Rotation::So2 { angle } => rot_z(*angle),
            Rotation::So3 { matrix, .. } => *matrix,
        }
    }

    /// zyz Euler angles (stored ones when available).
    pub fn euler_zyz(&self) -> EulerZyz {
        match self {
            Rotation::So2 { angle } => EulerZyz::new(*angle, 0.0, 0.0),
            Rotation::So3 {
                euler: Some(e), ..
            } => *e,
            Rotation::So3 { matrix, .. } => EulerZyz::from_matrix(matrix),
        }
    }

    pub fn inverse(&self) -> Self {
        match self {
            Rotation::So2 { angle } => Rotation::so2(-angle),
            Rotation::So3 { matrix, euler } => Rotation::So3 {
                matrix: matrix.transpose(),
                euler: euler.map(|e| EulerZyz::new(-e.gamma, -e.beta, -e.alpha)),
            },
        }
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.matrix() * v
    }
}

/// Element-wise action `Q·R`.
pub fn rotate_config(rotation: &Rotation, config: &Configuration) -> Result<Configuration> {
    match (rotation, &config.points) {
        (Rotation::So2 { angle }, Points::Circle(a)) => Ok(Configuration {
            points: Points::Circle(a.iter().map(|t| wrap_angle(t + angle)).collect()),
        }),
        (Rotation::So3 { matrix, .. }, Points::Sphere(v)) => Ok(Configuration {
            points: Points::Sphere(v.iter().map(|p| matrix * p).collect()),
        }),
        _ => Err(Error::Dimension(format!(
            "{} cannot act on a configuration in S^{}",
            rotation.group(),
            config.dim()
        ))),
    }
}

/// Group product `first ∘ second` (apply `second`, then `first`).
pub fn compose(first: &Rotation, second: &Rotation) -> Result<Rotation> {
    match (first, second) {
        (Rotation::So2 { angle: a }, Rotation::So2 { angle: b }) => Ok(Rotation::so2(a + b)),
        (Rotation::So3 { matrix: a, .. }, Rotation::So3 { matrix: b, .. }) => {
            Ok(Rotation::So3 {
                matrix: a * b,
                euler: None,
            })
        }
        _ => Err(Error::Dimension(format!(
            "cannot compose {} with {}",
            first.group(),
            second.group()
        ))),
    }
}

/// Draws a Haar-distributed rotation.
///
/// SO(3) uses the QR factorization of a standard Gaussian matrix with the
/// sign of each `R` diagonal entry moved into `Q`, then flips one column if
/// the determinant is negative.
pub fn sample_haar<R: Rng + ?Sized>(group: Group, rng: &mut R) -> Rotation {
    match group {
        Group::So2 => Rotation::so2(rng.random::<f64>() * TAU),
        Group::So3 => {
            let g = Matrix3::from_fn(|_, _| StandardNormal.sample(rng));
            let qr = g.qr();
            let mut q = qr.q();
            let r = qr.r();
            for j in 0..3 {
                if r[(j, j)] < 0.0 {
                    q.column_mut(j).neg_mut();
                }
            }
            if q.determinant() < 0.0 {
                q.column_mut(0).neg_mut();
            }
            Rotation::So3 {
                matrix: q,
                euler: None,
            }
        }
    }
}
