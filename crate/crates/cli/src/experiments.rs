//! Experiment runners. Every runner is deterministic given its config:
//! independent cells draw from their own ChaCha8 stream of the config seed,
//! run in parallel and are aggregated in a fixed order.

use std::fmt;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use symquad_core::dynamics::{self, PerturbedPotential, PhaseState, TrajectoryPoint};
use symquad_core::geometry::{so2_quadrature, so3_quadrature_euler, QuadratureRule};
use symquad_core::regression::{l2_test_error, AugmentationScheme, Dataset, ReducedSystem};
use symquad_core::sampling::{make_dataset, make_target, Decay, DistributionName, DistributionSpec, TargetFunction};
use symquad_core::{enumerate_basis, BasisSpec, Cutoff};

use crate::config::{default_cutoff, Experiment, ExperimentConfig};
use crate::table::{Provenance, ResultTable};

/// Ratios between symmetrization errors are capped here once the
/// denominator reaches machine precision.
pub const RATIO_CAP: f64 = 1e12;

/// Largest basis an experiment may request.
pub const MAX_BASIS_SIZE: usize = 20_000;

/// Stream ids separating the independent random inputs of one cell.
const STREAM_TRAIN: u64 = 0;
const STREAM_TEST: u64 = 1;
const STREAM_ROTATIONS: u64 = 2;

#[derive(Debug)]
pub enum RunError {
    /// Infeasible or inconsistent parameters.
    Config(String),
    /// A solver or integrator failed.
    Numerical(String),
    Io(std::io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "configuration error: {m}"),
            RunError::Numerical(m) => write!(f, "numerical abort: {m}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<symquad_core::Error> for RunError {
    fn from(e: symquad_core::Error) -> Self {
        use symquad_core::Error as E;
        match e {
            E::Numerical(_) | E::EmptySystem => RunError::Numerical(e.to_string()),
            E::Io(io) => RunError::Io(io),
            other => RunError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

/// A recorded trajectory and the file stem it is written under.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub name: String,
    pub points: Vec<TrajectoryPoint>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: ResultTable,
    pub trajectories: Vec<Trajectory>,
    /// Simulations that blew up, as `(name, last finite time)`.
    pub aborted: Vec<(String, f64)>,
}

impl RunOutput {
    fn table(table: ResultTable) -> Self {
        Self {
            table,
            trajectories: Vec::new(),
            aborted: Vec::new(),
        }
    }
}

/// Seeded generator for stream `stream` of cell `cell`.
pub fn cell_rng(seed: u64, cell: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(cell);
    rng
}

/// Seed of the rotation stream of a cell; random schemes of different
/// sizes in the same cell share a prefix.
pub fn rotation_seed(seed: u64, cell: u64) -> u64 {
    use rand::RngCore;
    cell_rng(seed, cell, STREAM_ROTATIONS).next_u64()
}

/// Quadrature rule of degree of exactness `n` for `S^d` data: `n+1` equally
/// spaced angles on the circle, the Gauss–Legendre product rule on SO(3).
pub fn exact_rule(d: usize, n: usize) -> Result<QuadratureRule, RunError> {
    Ok(match d {
        1 => so2_quadrature(n + 1)?,
        _ => so3_quadrature_euler(n),
    })
}

/// `random / quad`, capped at [`RATIO_CAP`].
pub fn capped_ratio(random: f64, quad: f64) -> f64 {
    if quad <= 0.0 || random / quad > RATIO_CAP {
        RATIO_CAP
    } else {
        random / quad
    }
}

/// Number of three-particle tensor basis functions of degree `≤ k`.
fn basis_size(d: usize, k: usize) -> usize {
    let per_particle = |l: usize| if d == 1 { if l == 0 { 1 } else { 2 } } else { 2 * l + 1 };
    let mut total = 0;
    for a in 0..=k {
        for b in 0..=k - a {
            for c in 0..=k - a - b {
                total += per_particle(a) * per_particle(b) * per_particle(c);
            }
        }
    }
    total
}

fn basis(d: usize, k: usize) -> Result<BasisSpec, RunError> {
    let size = basis_size(d, k);
    if size > MAX_BASIS_SIZE {
        return Err(RunError::Config(format!(
            "degree {k} on S^{d} needs {size} basis functions, more than {MAX_BASIS_SIZE}"
        )));
    }
    Ok(enumerate_basis(d, 3, k)?)
}

fn spec(cfg: &ExperimentConfig, name: DistributionName) -> Result<DistributionSpec, RunError> {
    Ok(DistributionSpec::with_params(cfg.d(), name, cfg.kappa(), cfg.sigma())?)
}

fn cutoff_for(cfg: &ExperimentConfig, name: DistributionName) -> Cutoff {
    Cutoff::Absolute(cfg.cutoff.unwrap_or_else(|| default_cutoff(cfg.d(), name)))
}

fn exp_target(cfg: &ExperimentConfig) -> Result<TargetFunction, RunError> {
    Ok(make_target(cfg.d(), Decay::Exponential(cfg.alpha()), cfg.target_degree(), cfg.seed())?)
}

fn provenance(cfg: &ExperimentConfig) -> Provenance {
    Provenance::new(cfg.hash(), cfg.seed())
}

/// Training and uniform test data of one cell.
fn cell_data(
    cfg: &ExperimentConfig,
    dist: DistributionName,
    target: &TargetFunction,
    cell: u64,
) -> Result<(Dataset, Dataset), RunError> {
    let train = make_dataset(&spec(cfg, dist)?, target, cfg.n_train(), &mut cell_rng(cfg.seed(), cell, STREAM_TRAIN))?;
    let test = make_dataset(
        &spec(cfg, DistributionName::Uuu)?,
        target,
        cfg.n_test(),
        &mut cell_rng(cfg.seed(), cell, STREAM_TEST),
    )?;
    Ok((train, test))
}

/// Runs `f` over `0..trials` in parallel, preserving order.
fn per_trial<T, F>(trials: usize, f: F) -> Result<Vec<T>, RunError>
where
    T: Send,
    F: Fn(usize) -> Result<T, RunError> + Sync + Send,
{
    (0..trials).into_par_iter().map(f).collect()
}

fn column<T>(rows: &[T], f: impl Fn(&T) -> f64) -> Vec<f64> {
    rows.iter().map(f).collect()
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    cfg.validate().map_err(|e| RunError::Config(e.to_string()))?;
    info!("running {} ({})", cfg.name(), cfg.experiment());
    match cfg.experiment() {
        Experiment::ApproxRates => run_approx_rates(cfg).map(RunOutput::table),
        Experiment::QuadSweep => run_quad_sweep(cfg).map(RunOutput::table),
        Experiment::RandomSweep => run_random_sweep(cfg).map(RunOutput::table),
        Experiment::Compare => run_compare(cfg).map(RunOutput::table),
        Experiment::Drift => run_drift(cfg),
        Experiment::RegularitySweep => run_regularity_sweep(cfg).map(RunOutput::table),
        Experiment::DistributionsPreview => run_distributions_preview(cfg).map(RunOutput::table),
    }
}

/// Test errors of full, invariant and symmetrized full fits per degree.
pub fn run_approx_rates(cfg: &ExperimentConfig) -> Result<ResultTable, RunError> {
    let target = exp_target(cfg)?;
    let mut table = ResultTable::new(cfg.name(), "K", provenance(cfg));
    for dist in cfg.distributions() {
        let cutoff = cutoff_for(cfg, dist);
        for k in cfg.degrees() {
            let b = basis(cfg.d(), k)?;
            let runs = per_trial(cfg.trials(), |trial| {
                let (train, test) = cell_data(cfg, dist, &target, trial as u64)?;
                let sys = ReducedSystem::new(&b, &train)?;
                let full = sys.full(cutoff)?;
                let inv = sys.invariant(cutoff)?;
                let sym = full.symmetrized()?;
                Ok([
                    l2_test_error(&full, &test)?,
                    l2_test_error(&inv, &test)?,
                    l2_test_error(&sym, &test)?,
                    full.eps_sym(),
                ])
            })?;
            let series = format!("dist={dist}");
            let x = k as f64;
            table.push(&series, x, "full_error", &column(&runs, |r| r[0]));
            table.push(&series, x, "invariant_error", &column(&runs, |r| r[1]));
            table.push(&series, x, "sym_error", &column(&runs, |r| r[2]));
            table.push(&series, x, "full_eps_sym", &column(&runs, |r| r[3]));
            table.push(&series, x, "tail", &[target.tail_rms(k)]);
            info!("approx-rates {dist} K={k} done");
        }
    }
    Ok(table)
}

/// Symmetrization error, test error and distance to the invariant fit
/// against the exactness of a quadrature augmentation, per model degree.
pub fn run_quad_sweep(cfg: &ExperimentConfig) -> Result<ResultTable, RunError> {
    let target = exp_target(cfg)?;
    let quad: Vec<usize> = cfg.quad_degrees.clone().unwrap_or_default();
    let rules = quad.iter().map(|&n| exact_rule(cfg.d(), n)).collect::<Result<Vec<_>, _>>()?;
    let mut table = ResultTable::new(cfg.name(), "n", provenance(cfg));
    for dist in cfg.distributions() {
        let cutoff = cutoff_for(cfg, dist);
        for k in cfg.degrees() {
            let b = basis(cfg.d(), k)?;
            let runs = per_trial(cfg.trials(), |trial| {
                let (train, test) = cell_data(cfg, dist, &target, trial as u64)?;
                let sys = ReducedSystem::new(&b, &train)?;
                let inv = sys.invariant(cutoff)?;
                rules
                    .iter()
                    .map(|rule| {
                        let sol = sys.augmented(&AugmentationScheme::Quadrature(rule.clone()), cutoff)?;
                        let gap = sol.beta.iter().zip(&inv.beta).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
                        Ok([sol.eps_sym(), l2_test_error(&sol, &test)?, gap])
                    })
                    .collect::<Result<Vec<_>, RunError>>()
            })?;
            let series = format!("dist={dist},K={k}");
            for (j, (&n, rule)) in quad.iter().zip(&rules).enumerate() {
                let x = n as f64;
                table.push(&series, x, "eps_sym", &column(&runs, |r| r[j][0]));
                table.push(&series, x, "test_error", &column(&runs, |r| r[j][1]));
                table.push(&series, x, "beta_gap", &column(&runs, |r| r[j][2]));
                table.push(&series, x, "nodes", &[rule.len() as f64]);
                table.push(&series, x, "exact", &[if n >= k { 1.0 } else { 0.0 }]);
            }
            info!("quad-sweep {dist} K={k} done");
        }
    }
    Ok(table)
}

/// Per-trial results of a random augmentation sweep: for each `T`,
/// `[ε_sym, test error, bound, bound holds]`.
fn random_cells(
    cfg: &ExperimentConfig,
    dist: DistributionName,
    target: &TargetFunction,
    b: &BasisSpec,
    t_values: &[usize],
    with_schur: bool,
) -> Result<Vec<Vec<[f64; 4]>>, RunError> {
    let cutoff = cutoff_for(cfg, dist);
    per_trial(cfg.trials(), |trial| {
        let (train, test) = cell_data(cfg, dist, target, trial as u64)?;
        let sys = ReducedSystem::new(b, &train)?;
        let rot_seed = rotation_seed(cfg.seed(), trial as u64);
        t_values
            .iter()
            .map(|&t| {
                let scheme = AugmentationScheme::Random { count: t, seed: rot_seed };
                let sol = if with_schur {
                    sys.augmented_with_diagnostics(&scheme, cutoff)?
                } else {
                    sys.augmented(&scheme, cutoff)?
                };
                let eps = sol.eps_sym();
                let bound = sol
                    .diagnostics
                    .schur
                    .as_ref()
                    .and_then(|s| s.bound)
                    .unwrap_or(f64::NAN);
                let holds = if eps <= bound { 1.0 } else { 0.0 };
                Ok([eps, l2_test_error(&sol, &test)?, bound, holds])
            })
            .collect()
    })
}

/// Symmetrization error, test error and Schur bound against the number of
/// random rotations.
pub fn run_random_sweep(cfg: &ExperimentConfig) -> Result<ResultTable, RunError> {
    let target = exp_target(cfg)?;
    let t_values = cfg.t_values.clone().unwrap_or_default();
    let mut table = ResultTable::new(cfg.name(), "T", provenance(cfg));
    for dist in cfg.distributions() {
        for k in cfg.degrees() {
            let b = basis(cfg.d(), k)?;
            let runs = random_cells(cfg, dist, &target, &b, &t_values, cfg.schur())?;
            let series = format!("dist={dist},K={k}");
            for (j, &t) in t_values.iter().enumerate() {
                let x = t as f64;
                table.push(&series, x, "eps_sym", &column(&runs, |r| r[j][0]));
                table.push(&series, x, "test_error", &column(&runs, |r| r[j][1]));
                if cfg.schur() {
                    table.push(&series, x, "bound", &column(&runs, |r| r[j][2]));
                    table.push(&series, x, "bound_holds", &column(&runs, |r| r[j][3]));
                }
            }
            info!("random-sweep {dist} K={k} done");
        }
    }
    Ok(table)
}

/// Quadrature against random augmentation with the same number of
/// rotations, on the same training data.
pub fn run_compare(cfg: &ExperimentConfig) -> Result<ResultTable, RunError> {
    let target = exp_target(cfg)?;
    let quad: Vec<usize> = cfg.quad_degrees.clone().unwrap_or_default();
    let rules = quad.iter().map(|&n| exact_rule(cfg.d(), n)).collect::<Result<Vec<_>, _>>()?;
    let mut table = ResultTable::new(cfg.name(), "budget", provenance(cfg));
    for dist in cfg.distributions() {
        let cutoff = cutoff_for(cfg, dist);
        for k in cfg.degrees() {
            let b = basis(cfg.d(), k)?;
            let runs = per_trial(cfg.trials(), |trial| {
                let (train, _) = cell_data(cfg, dist, &target, trial as u64)?;
                let sys = ReducedSystem::new(&b, &train)?;
                let rot_seed = rotation_seed(cfg.seed(), trial as u64);
                rules
                    .iter()
                    .map(|rule| {
                        let q = sys.augmented(&AugmentationScheme::Quadrature(rule.clone()), cutoff)?;
                        let r = sys.augmented(
                            &AugmentationScheme::Random {
                                count: rule.len(),
                                seed: rot_seed,
                            },
                            cutoff,
                        )?;
                        Ok([q.eps_sym(), r.eps_sym()])
                    })
                    .collect::<Result<Vec<_>, RunError>>()
            })?;
            let series = format!("dist={dist},K={k}");
            for (j, (&n, rule)) in quad.iter().zip(&rules).enumerate() {
                let x = rule.len() as f64;
                table.push(&series, x, "quad_eps_sym", &column(&runs, |r| r[j][0]));
                table.push(&series, x, "random_eps_sym", &column(&runs, |r| r[j][1]));
                table.push(&series, x, "ratio", &column(&runs, |r| capped_ratio(r[j][1], r[j][0])));
                table.push(&series, x, "quad_degree", &[n as f64]);
            }
            info!("compare {dist} K={k} done");
        }
    }
    Ok(table)
}

/// Hitting times of `|J|` and energy statistics for each perturbation
/// strength and initial condition.
pub fn run_drift(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let eps = cfg.eps.clone().unwrap_or_default();
    let steps = cfg.steps.unwrap_or(1);
    let targets = cfg.hit_targets();
    let dt = cfg.dt();
    let every = cfg.record_every();
    let cells: Vec<(usize, usize)> = (0..eps.len()).flat_map(|e| (0..cfg.seeds()).map(move |s| (e, s))).collect();
    type Cell = (Vec<Option<u64>>, Vec<TrajectoryPoint>, f64, Option<f64>);
    let results: Vec<Cell> = cells
        .par_iter()
        .map(|&(e, s)| {
            let pot = PerturbedPotential::standard(3, eps[e])?;
            let init = if cfg.random_initial() {
                PhaseState::random_initial(3, cfg.seed().wrapping_add(s as u64))
            } else {
                PhaseState::default_initial()
            };
            let mut hits = vec![None; targets.len()];
            let mut points = Vec::new();
            let mut max_j: f64 = 0.0;
            let outcome = dynamics::simulate_with(&pot, &init, dt, steps, 1, |pt| {
                max_j = max_j.max(pt.j.abs());
                for (h, t) in hits.iter_mut().zip(&targets) {
                    if h.is_none() && pt.j.abs() >= *t {
                        *h = Some(pt.step);
                    }
                }
                if pt.step % every == 0 {
                    points.push(*pt);
                }
                true
            })?;
            Ok((hits, points, max_j, outcome.aborted_at))
        })
        .collect::<Result<_, RunError>>()?;

    let mut table = ResultTable::new(cfg.name(), "eps", provenance(cfg));
    let mut trajectories = Vec::new();
    let mut aborted = Vec::new();
    for (&(e, s), (hits, points, max_j, abort)) in cells.iter().zip(results) {
        let x = eps[e];
        let seed_label = format!("seed={s}");
        for (t, h) in targets.iter().zip(&hits) {
            let v = h.map_or(f64::INFINITY, |h| h as f64);
            table.push(format!("{seed_label},target={t:e}"), x, "hitting_step", &[v]);
        }
        let (drift, amplitude) = dynamics::energy_drift(&points);
        table.push(&seed_label, x, "max_abs_j", &[max_j]);
        table.push(&seed_label, x, "energy_drift", &[drift]);
        table.push(&seed_label, x, "energy_amplitude", &[amplitude]);
        let name = format!("{}_eps{:e}_seed{s}", cfg.name(), x);
        if let Some(t) = abort {
            aborted.push((name.clone(), t));
        }
        trajectories.push(Trajectory { name, points });
    }
    Ok(RunOutput {
        table,
        trajectories,
        aborted,
    })
}

/// Random-augmentation symmetrization error for targets with algebraic
/// coefficient decay, per decay exponent and model degree.
pub fn run_regularity_sweep(cfg: &ExperimentConfig) -> Result<ResultTable, RunError> {
    let t_values = cfg.t_values.clone().unwrap_or_default();
    let mut table = ResultTable::new(cfg.name(), "T", provenance(cfg));
    for p in cfg.powers.clone().unwrap_or_default() {
        let target = make_target(cfg.d(), Decay::Algebraic(p), cfg.target_degree(), cfg.seed())?;
        for dist in cfg.distributions() {
            for k in cfg.degrees() {
                let b = basis(cfg.d(), k)?;
                let runs = random_cells(cfg, dist, &target, &b, &t_values, false)?;
                let series = format!("p={p},dist={dist},K={k}");
                for (j, &t) in t_values.iter().enumerate() {
                    table.push(&series, t as f64, "eps_sym", &column(&runs, |r| r[j][0]));
                    table.push(&series, t as f64, "test_error", &column(&runs, |r| r[j][1]));
                }
                info!("regularity-sweep p={p} {dist} K={k} done");
            }
        }
    }
    Ok(table)
}

/// Mean resultant length (d=1) or mean-vector norm (d=2) of each particle.
pub fn run_distributions_preview(cfg: &ExperimentConfig) -> Result<ResultTable, RunError> {
    let mut table = ResultTable::new(cfg.name(), "particle", provenance(cfg));
    for (i, dist) in cfg.distributions().into_iter().enumerate() {
        let s = spec(cfg, dist)?;
        let mut rng = cell_rng(cfg.seed(), i as u64, STREAM_TRAIN);
        let configs = symquad_core::sampling::sample_configs(&s, cfg.n_train(), &mut rng);
        let n = configs.len() as f64;
        for particle in 0..3 {
            let mut acc = [0.0f64; 3];
            for c in &configs {
                match c.angles() {
                    Some(a) => {
                        acc[0] += a[particle].cos();
                        acc[1] += a[particle].sin();
                    }
                    None => {
                        let v = c.vectors().expect("sphere configuration")[particle];
                        acc[0] += v.x;
                        acc[1] += v.y;
                        acc[2] += v.z;
                    }
                }
            }
            let norm = (acc[0] * acc[0] + acc[1] * acc[1] + acc[2] * acc[2]).sqrt() / n;
            table.push(format!("dist={dist}"), (particle + 1) as f64, "mean_resultant", &[norm]);
        }
    }
    Ok(table)
}
