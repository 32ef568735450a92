//! Velocity Verlet dynamics of particles on the circle under nearly
//! rotation-invariant potentials, and the drift of total angular momentum.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Tolerance for the numerical invariance check of `F`.
pub const INVARIANCE_TOL: f64 = 1e-12;

/// Perturbation strengths swept by default.
pub const DEFAULT_EPSILONS: [f64; 5] = [0.0, 1e-4, 1e-3, 1e-2, 1e-1];
pub const DEFAULT_DT: f64 = 0.05;

/// `amplitude · cos(k·θ + phase)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigTerm {
    pub amplitude: f64,
    pub k: Vec<i32>,
    pub phase: f64,
}

impl TrigTerm {
    pub fn cos(amplitude: f64, k: Vec<i32>) -> Self {
        Self { amplitude, k, phase: 0.0 }
    }

    pub fn sin(amplitude: f64, k: Vec<i32>) -> Self {
        Self {
            amplitude,
            k,
            phase: -FRAC_PI_2,
        }
    }

    fn argument(&self, theta: &[f64]) -> f64 {
        self.k.iter().zip(theta).map(|(k, t)| *k as f64 * t).sum::<f64>() + self.phase
    }
}

/// Real trigonometric polynomial in `n` angles.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial {
    n: usize,
    terms: Vec<TrigTerm>,
}

impl TrigPolynomial {
    pub fn new(n: usize, terms: Vec<TrigTerm>) -> Result<Self> {
        if let Some(t) = terms.iter().find(|t| t.k.len() != n) {
            return Err(Error::Dimension(format!(
                "term with {} frequencies in a polynomial of {n} angles",
                t.k.len()
            )));
        }
        if terms.iter().any(|t| !t.amplitude.is_finite() || !t.phase.is_finite()) {
            return Err(Error::InvalidArgument("trigonometric term is not finite".into()));
        }
        Ok(Self { n, terms })
    }

    pub fn zero(n: usize) -> Self {
        Self { n, terms: Vec::new() }
    }

    /// `Σ_{i<j} cos(θ_i − θ_j)`.
    pub fn pair_cosines(n: usize) -> Self {
        let mut terms = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let mut k = vec![0; n];
                k[i] = 1;
                k[j] = -1;
                terms.push(TrigTerm::cos(1.0, k));
            }
        }
        Self { n, terms }
    }

    /// `Σ_i sin(2θ_i) + ½ cos(θ_i)`.
    pub fn default_perturbation(n: usize) -> Self {
        let mut terms = Vec::new();
        for i in 0..n {
            let mut k2 = vec![0; n];
            k2[i] = 2;
            terms.push(TrigTerm::sin(1.0, k2));
            let mut k1 = vec![0; n];
            k1[i] = 1;
            terms.push(TrigTerm::cos(0.5, k1));
        }
        Self { n, terms }
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.amplitude * t.argument(theta).cos()).sum()
    }

    /// Adds `scale · ∇` to `grad`.
    fn add_gradient(&self, theta: &[f64], scale: f64, grad: &mut [f64]) {
        for t in &self.terms {
            let s = -scale * t.amplitude * t.argument(theta).sin();
            for (g, k) in grad.iter_mut().zip(&t.k) {
                if *k != 0 {
                    *g += s * *k as f64;
                }
            }
        }
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        self.add_gradient(theta, 1.0, &mut g);
        g
    }

    /// Whether `P(θ + α·1) = P(θ)` at a set of deterministic probe points.
    pub fn is_rotation_invariant(&self) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        (0..16).all(|_| {
            let theta: Vec<f64> = (0..self.n).map(|_| rng.random::<f64>() * TAU).collect();
            let alpha = rng.random::<f64>() * TAU;
            let shifted: Vec<f64> = theta.iter().map(|t| t + alpha).collect();
            (self.value(&shifted) - self.value(&theta)).abs() <= INVARIANCE_TOL * (1.0 + self.value(&theta).abs())
        })
    }
}

/// `U = F + εG` with `F` rotation-invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedPotential {
    invariant: TrigPolynomial,
    perturbation: TrigPolynomial,
    epsilon: f64,
}

impl PerturbedPotential {
    pub fn new(invariant: TrigPolynomial, perturbation: TrigPolynomial, epsilon: f64) -> Result<Self> {
        if invariant.arity() != perturbation.arity() {
            return Err(Error::Dimension(format!(
                "F has {} angles but G has {}",
                invariant.arity(),
                perturbation.arity()
            )));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be finite and nonnegative, got {epsilon}")));
        }
        if !invariant.is_rotation_invariant() {
            return Err(Error::InvalidArgument("the unperturbed potential is not rotation invariant".into()));
        }
        Ok(Self {
            invariant,
            perturbation,
            epsilon,
        })
    }

    /// Pair-cosine `F` and the default non-invariant `G` for `n` particles.
    pub fn standard(n: usize, epsilon: f64) -> Result<Self> {
        Self::new(
            TrigPolynomial::pair_cosines(n),
            TrigPolynomial::default_perturbation(n),
            epsilon,
        )
    }

    pub fn arity(&self) -> usize {
        self.invariant.arity()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn invariant_part(&self) -> &TrigPolynomial {
        &self.invariant
    }

    pub fn perturbation(&self) -> &TrigPolynomial {
        &self.perturbation
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let mut u = self.invariant.value(theta);
        if self.epsilon != 0.0 {
            u += self.epsilon * self.perturbation.value(theta);
        }
        u
    }

    fn force_into(&self, theta: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        self.invariant.add_gradient(theta, -1.0, out);
        if self.epsilon != 0.0 {
            self.perturbation.add_gradient(theta, -self.epsilon, out);
        }
    }
}

/// `−∇U(θ)`.
pub fn force(pot: &PerturbedPotential, theta: &[f64]) -> Vec<f64> {
    let mut f = vec![0.0; theta.len()];
    pot.force_into(theta, &mut f);
    f
}

/// Angles, unit-mass momenta and time.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub theta: Vec<f64>,
    pub p: Vec<f64>,
    pub time: f64,
}

impl PhaseState {
    pub fn new(theta: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if theta.len() != p.len() {
            return Err(Error::Dimension(format!("{} angles but {} momenta", theta.len(), p.len())));
        }
        let state = Self { theta, p, time: 0.0 };
        if !state.is_finite() {
            return Err(Error::InvalidArgument("initial state is not finite".into()));
        }
        Ok(state)
    }

    /// `θ = (0.1, 2.2, 4.0)`, `p = (0.3, −0.1, −0.2)`, so `J = 0`.
    pub fn default_initial() -> Self {
        Self {
            theta: vec![0.1, 2.2, 4.0],
            p: vec![0.3, -0.1, -0.2],
            time: 0.0,
        }
    }

    /// Uniform angles and Gaussian momenta of standard deviation `0.3`,
    /// shifted to zero total momentum.
    pub fn random_initial(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.3).expect("valid deviation");
        let theta = (0..n).map(|_| rng.random::<f64>() * TAU).collect();
        let mut p: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let mean = p.iter().sum::<f64>() / n as f64;
        p.iter_mut().for_each(|x| *x -= mean);
        Self { theta, p, time: 0.0 }
    }

    /// Total angular momentum `J = Σ p_i`.
    pub fn momentum(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn energy(&self, pot: &PerturbedPotential) -> f64 {
        0.5 * self.p.iter().map(|x| x * x).sum::<f64>() + pot.value(&self.theta)
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().chain(&self.p).all(|x| x.is_finite()) && self.time.is_finite()
    }
}

/// Kick-drift-kick step with a precomputed force at the current angles;
/// leaves the force at the new angles in `f`.
fn verlet_in_place(state: &mut PhaseState, pot: &PerturbedPotential, dt: f64, f: &mut [f64]) {
    let half = 0.5 * dt;
    for (p, fi) in state.p.iter_mut().zip(f.iter()) {
        *p += half * fi;
    }
    for (t, p) in state.theta.iter_mut().zip(&state.p) {
        *t += dt * p;
    }
    pot.force_into(&state.theta, f);
    for (p, fi) in state.p.iter_mut().zip(f.iter()) {
        *p += half * fi;
    }
    state.time += dt;
}

pub fn verlet_step(state: &PhaseState, pot: &PerturbedPotential, dt: f64) -> Result<PhaseState> {
    check_arity(state, pot)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let mut next = state.clone();
    let mut f = force(pot, &state.theta);
    verlet_in_place(&mut next, pot, dt, &mut f);
    Ok(next)
}

fn check_arity(state: &PhaseState, pot: &PerturbedPotential) -> Result<()> {
    if state.theta.len() != pot.arity() || state.p.len() != pot.arity() {
        return Err(Error::Dimension(format!(
            "state of {} particles for a potential of {}",
            state.theta.len(),
            pot.arity()
        )));
    }
    Ok(())
}

/// One recorded sample of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub step: u64,
    pub time: f64,
    /// Total angular momentum.
    pub j: f64,
    /// Total energy.
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutcome {
    pub final_state: PhaseState,
    /// Steps actually taken.
    pub steps: u64,
    /// Time of the last finite state if the run blew up.
    pub aborted_at: Option<f64>,
}

/// Runs `n_steps` Verlet steps, calling `on_record` at step 0 and every
/// `record_every` steps. Returning `false` from the callback stops the run.
pub fn simulate_with<F>(
    pot: &PerturbedPotential,
    init: &PhaseState,
    dt: f64,
    n_steps: u64,
    record_every: u64,
    mut on_record: F,
) -> Result<SimulationOutcome>
where
    F: FnMut(&TrajectoryPoint) -> bool,
{
    check_arity(init, pot)?;
    if n_steps == 0 || record_every == 0 {
        return Err(Error::InvalidArgument("n_steps and record_every must be at least 1".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let mut state = init.clone();
    let mut last_good = state.clone();
    let mut f = force(pot, &state.theta);
    let record = |state: &PhaseState, step: u64| TrajectoryPoint {
        step,
        time: state.time,
        j: state.momentum(),
        h: state.energy(pot),
    };
    if !on_record(&record(&state, 0)) {
        return Ok(SimulationOutcome {
            final_state: state,
            steps: 0,
            aborted_at: None,
        });
    }
    for step in 1..=n_steps {
        verlet_in_place(&mut state, pot, dt, &mut f);
        if !state.is_finite() {
            return Ok(SimulationOutcome {
                aborted_at: Some(last_good.time),
                final_state: last_good,
                steps: step - 1,
            });
        }
        if step % record_every == 0 && !on_record(&record(&state, step)) {
            return Ok(SimulationOutcome {
                final_state: state,
                steps: step,
                aborted_at: None,
            });
        }
        last_good.clone_from(&state);
    }
    Ok(SimulationOutcome {
        final_state: state,
        steps: n_steps,
        aborted_at: None,
    })
}

/// Runs a simulation and keeps every recorded point.
pub fn simulate(
    pot: &PerturbedPotential,
    init: &PhaseState,
    dt: f64,
    n_steps: u64,
    record_every: u64,
) -> Result<(Vec<TrajectoryPoint>, SimulationOutcome)> {
    let mut points = Vec::new();
    let outcome = simulate_with(pot, init, dt, n_steps, record_every, |p| {
        points.push(*p);
        true
    })?;
    Ok((points, outcome))
}

/// First index `n` with `|J_n| ≥ target`.
pub fn hitting_time(j_series: &[f64], target: f64) -> Option<usize> {
    j_series.iter().position(|j| j.abs() >= target)
}

/// First recorded step at which `|J|` reaches each target, computed in a
/// single streaming pass that stops once every target is hit.
pub fn hitting_steps(
    pot: &PerturbedPotential,
    init: &PhaseState,
    dt: f64,
    n_steps: u64,
    targets: &[f64],
) -> Result<(Vec<Option<u64>>, SimulationOutcome)> {
    let mut hits = vec![None; targets.len()];
    let outcome = simulate_with(pot, init, dt, n_steps, 1, |pt| {
        for (h, t) in hits.iter_mut().zip(targets) {
            if h.is_none() && pt.j.abs() >= *t {
                *h = Some(pt.step);
            }
        }
        hits.iter().any(Option::is_none)
    })?;
    Ok((hits, outcome))
}

/// Least-squares slope of `H` against `t` times the time span, and the
/// peak-to-peak amplitude of `H`. No secular drift means the first is
/// smaller than the second.
pub fn energy_drift(points: &[TrajectoryPoint]) -> (f64, f64) {
    if points.len() < 2 {
        return (0.0, 0.0);
    }
    let n = points.len() as f64;
    let tm = points.iter().map(|p| p.time).sum::<f64>() / n;
    let hm = points.iter().map(|p| p.h).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.time - tm) * (p.h - hm)).sum();
    let sxx: f64 = points.iter().map(|p| (p.time - tm).powi(2)).sum();
    let span = points[points.len() - 1].time - points[0].time;
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.h), hi.max(p.h)));
    ((sxy / sxx * span).abs(), hi - lo)
}

pub fn write_trajectory_csv<W: Write>(points: &[TrajectoryPoint], mut out: W) -> Result<()> {
    writeln!(out, "step,time,J,H")?;
    for p in points {
        writeln!(out, "{},{:e},{:e},{:e}", p.step, p.time, p.j, p.h)?;
    }
    Ok(())
}
