use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use faer::c64;

use super::{Group, Rotation};
use crate::error::{Error, Result};
use crate::harmonics::wigner_d_all;

/// Threshold below which a group average of a matrix coefficient counts as zero.
pub const EXACTNESS_TOL: f64 = 1e-10;

const WEIGHT_SUM_TOL: f64 = 1e-12;
const FILE_WEIGHT_SUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureNode {
    pub weight: f64,
    pub rotation: Rotation,
}

/// Weighted rotations `(w_t, Q_t)` with weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    group: Group,
    nodes: Vec<QuadratureNode>,
    degree: usize,
}

impl QuadratureRule {
    /// Builds a rule from raw nodes and rescales the weights to sum to one.
    pub fn new(group: Group, nodes: Vec<QuadratureNode>, degree: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidArgument("quadrature rule has no nodes".into()));
        }
        let mut sum = 0.0;
        for (i, node) in nodes.iter().enumerate() {
            if !(node.weight.is_finite() && node.weight > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "node {i} has non-positive weight {}",
                    node.weight
                )));
            }
            if node.rotation.group() != group {
                return Err(Error::Dimension(format!(
                    "node {i} is in {}, rule is over {group}",
                    node.rotation.group()
                )));
            }
            sum += node.weight;
        }
        let mut nodes = nodes;
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            for node in &mut nodes {
                node.weight /= sum;
            }
        }
        Ok(Self {
            group,
            nodes,
            degree,
        })
    }

    /// The rule consisting of the identity alone; exact only for constants.
    pub fn identity(group: Group) -> Self {
        Self {
            group,
            nodes: vec![QuadratureNode {
                weight: 1.0,
                rotation: Rotation::identity(group),
            }],
            degree: 0,
        }
    }

    /// Equal weights `1/T` on the given rotations.
    pub fn equal_weights(group: Group, rotations: Vec<Rotation>) -> Result<Self> {
        let w = 1.0 / rotations.len().max(1) as f64;
        Self::new(
            group,
            rotations
                .into_iter()
                .map(|rotation| QuadratureNode {
                    weight: w,
                    rotation,
                })
                .collect(),
            0,
        )
    }

    pub fn group(&self) -> Group {
        self.group
    }

    pub fn nodes(&self) -> &[QuadratureNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Declared degree of accuracy.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn weight_sum(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }
}

/// Equispaced SO(2) rule `{(1/n, 2πt/n)}`, exact for `e^{ikα}` with `|k| ≤ n−1`.
pub fn so2_quadrature(n_points: usize) -> Result<QuadratureRule> {
    if n_points == 0 {
        return Err(Error::InvalidArgument(
            "SO(2) quadrature needs at least one point".into(),
        ));
    }
    let w = 1.0 / n_points as f64;
    let nodes = (0..n_points)
        .map(|t| QuadratureNode {
            weight: w,
            rotation: Rotation::so2(TAU * t as f64 / n_points as f64),
        })
        .collect();
    Ok(QuadratureRule {
        group: Group::So2,
        nodes,
        degree: n_points - 1,
    })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (weights sum to 2).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let dp = legendre_with_derivative(n, z).1;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Euler-angle product rule on SO(3) of degree `n`.
///
/// Uses `n+1` equispaced values of α and γ and `⌈(n+1)/2⌉` Gauss–Legendre
/// nodes in `cos β`, giving `(n+1)²⌈(n+1)/2⌉` rotations.
pub fn so3_quadrature_euler(n: usize) -> QuadratureRule {
    let m = n + 1;
    let (x, wx) = gauss_legendre(m.div_ceil(2));
    let mut nodes = Vec::with_capacity(m * m * x.len());
    for (xb, wb) in x.iter().zip(&wx) {
        let beta = xb.clamp(-1.0, 1.0).acos();
        for ia in 0..m {
            let alpha = TAU * ia as f64 / m as f64;
            for ig in 0..m {
                let gamma = TAU * ig as f64 / m as f64;
                nodes.push(QuadratureNode {
                    weight: 0.5 * wb / (m * m) as f64,
                    rotation: Rotation::from_euler_zyz(alpha, beta, gamma),
                });
            }
        }
    }
    QuadratureRule {
        group: Group::So3,
        nodes,
        degree: n,
    }
}

/// Largest `l ≤ l_max` such that the rule averages every nontrivial matrix
/// coefficient of degree `1..=l` to zero (below [`EXACTNESS_TOL`]).
pub fn verify_exactness(rule: &QuadratureRule, l_max: usize) -> usize {
    match rule.group {
        Group::So2 => {
            for k in 1..=l_max {
                let s: c64 = rule
                    .nodes
                    .iter()
                    .map(|n| c64::cis(k as f64 * n.rotation.angle().unwrap_or(0.0)) * n.weight)
                    .sum();
                if s.norm() >= EXACTNESS_TOL {
                    return k - 1;
                }
            }
            l_max
        }
        Group::So3 => {
            let mut sums: Vec<Vec<c64>> = (0..=l_max)
                .map(|l| vec![c64::new(0.0, 0.0); (2 * l + 1) * (2 * l + 1)])
                .collect();
            for node in &rule.nodes {
                for (l, block) in wigner_d_all(l_max, &node.rotation).iter().enumerate() {
                    let dim = 2 * l + 1;
                    for i in 0..dim {
                        for j in 0..dim {
                            sums[l][i * dim + j] += block.get(i, j) * node.weight;
                        }
                    }
                }
            }
            for (l, s) in sums.iter().enumerate().skip(1) {
                if s.iter().any(|z| z.norm() >= EXACTNESS_TOL) {
                    return l - 1;
                }
            }
            l_max
        }
    }
}

/// Reads an SO(3) rule in the text format
///
/// ```text
/// degree <n>
/// count <T>
/// w alpha beta gamma     (T lines, zyz Euler angles in radians)
/// ```
///
/// Blank lines and `#` comments are ignored. Weights may be normalized to
/// one or to the Haar volume `8π²`.
pub fn read_quadrature(path: impl AsRef<Path>) -> Result<QuadratureRule> {
    parse_quadrature(&fs::read_to_string(path)?)
}

pub(crate) fn parse_quadrature(text: &str) -> Result<QuadratureRule> {
    let mut degree = None;
    let mut count = None;
    let mut raw = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let perr = |msg: String| Error::Parse { line: lineno, msg };
        if degree.is_none() {
            match fields.as_slice() {
                ["degree", v] => {
                    degree = Some(
                        v.parse::<usize>()
                            .map_err(|e| perr(format!("bad degree {v:?}: {e}")))?,
                    )
                }
                _ => return Err(perr("expected `degree <n>`".into())),
            }
            continue;
        }
        if count.is_none() {
            match fields.as_slice() {
                ["count", v] => {
                    count = Some(
                        v.parse::<usize>()
                            .map_err(|e| perr(format!("bad count {v:?}: {e}")))?,
                    )
                }
                _ => return Err(perr("expected `count <T>`".into())),
            }
            continue;
        }
        if fields.len() != 4 {
            return Err(perr(format!(
                "expected 4 fields `w alpha beta gamma`, found {}",
                fields.len()
            )));
        }
        let mut vals = [0.0; 4];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f
                .parse::<f64>()
                .map_err(|e| perr(format!("bad number {f:?}: {e}")))?;
            if !v.is_finite() {
                return Err(perr(format!("non-finite value {f:?}")));
            }
        }
        if vals[0] <= 0.0 {
            return Err(perr(format!("weight must be positive, got {}", vals[0])));
        }
        raw.push(vals);
    }
    let degree = degree.ok_or_else(|| Error::Format("missing `degree` header".into()))?;
    let count = count.ok_or_else(|| Error::Format("missing `count` header".into()))?;
    if raw.len() != count {
        return Err(Error::Format(format!(
            "header declares {count} nodes, file has {}",
            raw.len()
        )));
    }
    let sum: f64 = raw.iter().map(|v| v[0]).sum();
    let haar = 8.0 * PI * PI;
    if (sum - 1.0).abs() > FILE_WEIGHT_SUM_TOL && ((sum - haar) / haar).abs() > FILE_WEIGHT_SUM_TOL
    {
        return Err(Error::Format(format!(
            "weights sum to {sum}, expected 1 or 8π²"
        )));
    }
    let nodes = raw
        .into_iter()
        .map(|[w, a, b, g]| QuadratureNode {
            weight: w / sum,
            rotation: Rotation::from_euler_zyz(a, b, g),
        })
        .collect();
    QuadratureRule::new(Group::So3, nodes, degree)
}

/// Writes an SO(3) rule in the format accepted by [`read_quadrature`].
pub fn write_quadrature(rule: &QuadratureRule, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_quadrature(rule)?)?;
    Ok(())
}

pub(crate) fn format_quadrature(rule: &QuadratureRule) -> Result<String> {
    if rule.group != Group::So3 {
        return Err(Error::InvalidArgument(
            "only SO(3) rules have a file format".into(),
        ));
    }
    let mut out = format!("degree {}\ncount {}\n", rule.degree, rule.len());
    for node in &rule.nodes {
        let e = node.rotation.euler_zyz();
        // `{}` on f64 prints the shortest representation that round-trips
        let _ = writeln!(out, "{} {} {} {}", node.weight, e.alpha, e.beta, e.gamma);
    }
    Ok(out)
}
