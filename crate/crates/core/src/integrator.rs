//! Time discretization of the Galerkin SDE
//! `dX = P_n b(X) dt + P_n dW` and trajectory simulation.
//!
//! Every path is driven by its own counter-based noise stream keyed by
//! `(seed, path)`, so trajectories do not depend on scheduling and the
//! ensemble can be evaluated in parallel (feature `parallel`, on by default)
//! or sequentially with identical results.

use std::ops::Range;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::constitutive::{DriftEngine, DriftWorkspace, FluidParams};
use crate::error::{Error, Result};
use crate::exponents::admissible_existence;
use crate::noise::{self, CovarianceSpectrum, NoiseSampler, StreamKey, ValidatedSpectrum};
use crate::spectral::{make_basis, Basis, LpQuadrature};

pub const DEFAULT_DIVERGENCE_CEILING: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepperKind {
    EulerMaruyama,
    #[default]
    Tamed,
    SemiImplicit,
}

/// Law of the initial state `ξ` (only `P_n ξ` enters the simulation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialCondition {
    /// Deterministic `amplitude · ψ_{z,j}`; `z` defaults to the first unit vector.
    Mode {
        #[serde(default)]
        z: Option<Vec<i32>>,
        #[serde(default = "one_usize")]
        j: usize,
        amplitude: f64,
    },
    /// Independent coordinates `X^{z,j} ~ N(0, σ²(1+4π²|z|²)^{−r})`.
    Gaussian { sigma: f64, r: f64 },
    Zero,
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Mode {
            z: None,
            j: 1,
            amplitude: 1.0,
        }
    }
}

fn one_usize() -> usize {
    1
}

fn one_u32() -> u32 {
    1
}

fn default_ceiling() -> f64 {
    DEFAULT_DIVERGENCE_CEILING
}

/// Everything needed to reproduce an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub d: usize,
    pub p: f64,
    pub nu: f64,
    pub n: usize,
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub stepper: StepperKind,
    #[serde(default)]
    pub init: InitialCondition,
    #[serde(default = "CovarianceSpectrum::zero")]
    pub gamma: CovarianceSpectrum,
    #[serde(default = "one_usize")]
    pub record_every: usize,
    #[serde(default = "default_ceiling")]
    pub divergence_ceiling: f64,
    /// Fine Brownian increments summed per step; lets runs at `dt`, `dt/2`,
    /// ... share one Brownian path.
    #[serde(default = "one_u32")]
    pub brownian_substeps: u32,
}

impl SimConfig {
    /// Minimal configuration with defaults for every optional field.
    pub fn new(d: usize, p: f64, nu: f64, n: usize, dt: f64, horizon: f64, n_paths: usize, seed: u64) -> Self {
        SimConfig {
            d,
            p,
            nu,
            n,
            dt,
            horizon,
            n_paths,
            seed,
            stepper: StepperKind::default(),
            init: InitialCondition::default(),
            gamma: CovarianceSpectrum::zero(),
            record_every: 1,
            divergence_ceiling: DEFAULT_DIVERGENCE_CEILING,
            brownian_substeps: 1,
        }
    }

    /// Checks every invariant; returns warnings for admissible-but-unusual settings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if self.d < 2 {
            return Err(Error::config("d", format!("dimension must be at least 2, got {}", self.d)));
        }
        FluidParams::new(self.p, self.nu)?;
        if self.n < 1 {
            return Err(Error::config("n", "truncation order must be at least 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt", format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(Error::config("T", format!("horizon {} must be at least dt = {}", self.horizon, self.dt)));
        }
        if self.n_paths < 1 {
            return Err(Error::config("n_paths", "need at least one path"));
        }
        if self.record_every < 1 {
            return Err(Error::config("record_every", "must be at least 1"));
        }
        if !(self.divergence_ceiling > 0.0) {
            return Err(Error::config("divergence_ceiling", "must be positive"));
        }
        if self.brownian_substeps < 1 {
            return Err(Error::config("brownian_substeps", "must be at least 1"));
        }
        noise::validate(&self.gamma, self.d)?;
        match &self.init {
            InitialCondition::Mode { z, j, amplitude } => {
                if let Some(z) = z {
                    if z.len() != self.d || z.iter().all(|&c| c == 0) {
                        return Err(Error::config("init.z", format!("need a nonzero {}-vector, got {z:?}", self.d)));
                    }
                    if z.iter().any(|c| c.unsigned_abs() as usize > self.n) {
                        warnings.push(format!("init.z = {z:?} lies outside the truncation n = {}; P_n ξ = 0", self.n));
                    }
                }
                if *j == 0 || *j > 2 * self.d - 2 {
                    return Err(Error::config("init.j", format!("j = {j} outside 1..={}", 2 * self.d - 2)));
                }
                if !amplitude.is_finite() {
                    return Err(Error::config("init.amplitude", "must be finite"));
                }
            }
            InitialCondition::Gaussian { sigma, r } => {
                if !(*sigma >= 0.0 && sigma.is_finite()) {
                    return Err(Error::config("init.sigma", "must be finite and ≥ 0"));
                }
                let threshold = noise::power_decay_threshold(self.d);
                if !(*r > threshold) {
                    return Err(Error::config(
                        "init.r",
                        format!("need r > {threshold} for a finite first Sobolev moment, got {r}"),
                    ));
                }
            }
            InitialCondition::Zero => {}
        }
        if !admissible_existence(self.p, self.d) {
            warnings.push(format!(
                "p = {} lies outside the existence range for d = {}; simulation is out-of-theorem",
                self.p, self.d
            ));
        }
        Ok(warnings)
    }

    /// Step count and step size: `T` split into an integer number of steps,
    /// `dt` adjusted downward if needed.
    pub fn time_grid(&self) -> (usize, f64) {
        let ratio = self.horizon / self.dt;
        let nearest = ratio.round();
        let steps = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest
        } else {
            ratio.ceil()
        }
        .max(1.0) as usize;
        (steps, self.horizon / steps as f64)
    }

    pub fn fluid(&self) -> Result<FluidParams> {
        FluidParams::new(self.p, self.nu)
    }
}

/// Diagnostics recorded at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordRow {
    pub t: f64,
    /// `‖X‖₂²`
    pub norm_l2_sq: f64,
    /// `‖X‖_{p,1}^p`
    pub norm_vp1_p: f64,
    /// `∫₀ᵗ ⟨e(X), τ(X)⟩ ds`, left endpoint
    pub int_diss: f64,
    /// `∫₀ᵗ ⟨ΓX, X⟩ ds`, left endpoint
    pub int_gamma: f64,
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Divergence {
    pub step: usize,
    pub time: f64,
    pub norm: f64,
    pub reason: String,
}

impl Divergence {
    pub fn to_error(&self) -> Error {
        Error::StepFailure {
            step: self.step,
            reason: self.reason.clone(),
            norm: self.norm,
        }
    }
}

/// One simulated path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub path: u64,
    pub dt: f64,
    pub steps: usize,
    pub rows: Vec<RecordRow>,
    /// Set when the path left the admissible region; rows stop there.
    pub diverged: Option<Divergence>,
}

impl TrajectoryRecord {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn first(&self) -> &RecordRow {
        &self.rows[0]
    }

    pub fn last(&self) -> &RecordRow {
        self.rows.last().expect("records start with the initial state")
    }

    pub fn completed(&self) -> bool {
        self.diverged.is_none()
    }
}

/// The drift came out non-finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonFiniteDrift {
    pub state_norm: f64,
}

/// Buffers owned by one stepping loop.
#[derive(Debug, Clone)]
pub struct StepWorkspace {
    drift_ws: DriftWorkspace,
    drift: Vec<f64>,
}

impl StepWorkspace {
    pub fn new(engine: &DriftEngine) -> Self {
        StepWorkspace {
            drift_ws: engine.workspace(),
            drift: vec![0.0; engine.basis().len()],
        }
    }

    /// Drift at the state before the last step.
    pub fn last_drift(&self) -> &[f64] {
        &self.drift
    }
}

/// Advances `state` by one step and returns `⟨e(X), τ(X)⟩` at the old state.
///
/// * Euler–Maruyama: `X' = X + dt b(X) + dW`
/// * tamed: `X' = X + dt b(X)/(1 + dt|b(X)|) + dW`
/// * semi-implicit: `(1 + dt ν4π²|z|²) X' = X + dt (b(X) + ν4π²|z|² X) + dW`
pub fn step(
    state: &mut [f64],
    dt: f64,
    dw: &[f64],
    engine: &DriftEngine,
    ws: &mut StepWorkspace,
    stepper: StepperKind,
) -> std::result::Result<f64, NonFiniteDrift> {
    let dissipation = engine.evaluate(&mut ws.drift_ws, state, &mut ws.drift);
    let b = &ws.drift;
    let b_norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !b_norm.is_finite() {
        return Err(NonFiniteDrift {
            state_norm: state.iter().map(|x| x * x).sum::<f64>().sqrt(),
        });
    }
    match stepper {
        StepperKind::EulerMaruyama => {
            for ((x, b), w) in state.iter_mut().zip(b).zip(dw) {
                *x += dt * b + w;
            }
        }
        StepperKind::Tamed => {
            let h = dt / (1.0 + dt * b_norm);
            for ((x, b), w) in state.iter_mut().zip(b).zip(dw) {
                *x += h * b + w;
            }
        }
        StepperKind::SemiImplicit => {
            for (((x, b), w), s) in state.iter_mut().zip(b).zip(dw).zip(engine.stokes_rates()) {
                *x = (*x + dt * (b + s * *x) + w) / (1.0 + dt * s);
            }
        }
    }
    Ok(dissipation)
}

/// Prepared simulator for one configuration.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimConfig,
    basis: Arc<Basis>,
    engine: DriftEngine,
    spectrum: ValidatedSpectrum,
    noise: NoiseSampler,
    gamma: Vec<f64>,
    steps: usize,
    dt: f64,
}

struct PathState {
    x: Vec<f64>,
    record: TrajectoryRecord,
    int_diss: f64,
    int_gamma: f64,
    ws: StepWorkspace,
}

impl Simulator {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let basis = Arc::new(make_basis(config.n, config.d)?);
        let engine = DriftEngine::new(basis.clone(), config.fluid()?)?;
        let spectrum = noise::validate(&config.gamma, config.d)?;
        let noise = NoiseSampler::new(&spectrum, &basis, config.brownian_substeps)?;
        let gamma = spectrum.gamma_vector(&basis);
        let (steps, dt) = config.time_grid();
        Ok(Simulator {
            config: config.clone(),
            basis,
            engine,
            spectrum,
            noise,
            gamma,
            steps,
            dt,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn engine(&self) -> &DriftEngine {
        &self.engine
    }

    pub fn spectrum(&self) -> &ValidatedSpectrum {
        &self.spectrum
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn stream(&self, path: u64) -> StreamKey {
        StreamKey {
            seed: self.config.seed,
            path,
        }
    }

    /// `P_n ξ` for this path.
    pub fn initial_condition(&self, path: u64) -> Vec<f64> {
        let mut x = vec![0.0; self.basis.len()];
        match &self.config.init {
            InitialCondition::Mode { z, j, amplitude } => {
                let z = z.clone().unwrap_or_else(|| {
                    let mut e = vec![0; self.config.d];
                    e[0] = 1;
                    e
                });
                let (canon, _) = crate::spectral::WaveVector::new(z)
                    .expect("validated nonzero")
                    .canonical();
                if let Some(i) = self.basis.index_of(canon.components(), *j) {
                    x[i] = *amplitude;
                }
            }
            InitialCondition::Gaussian { sigma, r } => {
                let mut rng = self.stream(path).init_rng();
                for (xi, idx) in x.iter_mut().zip(self.basis.indices()) {
                    let sd = sigma * idx.z.bessel_symbol().powf(-0.5 * r);
                    let g: f64 = StandardNormal.sample(&mut rng);
                    *xi = sd * g;
                }
            }
            InitialCondition::Zero => {}
        }
        x
    }

    /// `E‖P_n ξ‖₂²`, exact for every initial-condition family.
    pub fn expected_initial_energy(&self) -> f64 {
        match &self.config.init {
            InitialCondition::Gaussian { sigma, r } => self
                .basis
                .indices()
                .iter()
                .map(|idx| sigma * sigma * idx.z.bessel_symbol().powf(-r))
                .sum(),
            _ => self.initial_condition(0).iter().map(|x| x * x).sum(),
        }
    }

    fn row(&self, t: f64, x: &[f64], int_diss: f64, int_gamma: f64, quad: &mut LpQuadrature) -> RecordRow {
        let field = self.basis.to_field(x).expect("basis-sized state");
        let norm_vp1_p = quad
            .sobolev_pow(&field, self.config.p, 1.0)
            .expect("validated exponent");
        RecordRow {
            t,
            norm_l2_sq: x.iter().map(|c| c * c).sum(),
            norm_vp1_p,
            int_diss,
            int_gamma,
            coords: x.to_vec(),
        }
    }

    /// Integrates several initial states driven by the same noise stream.
    fn run(&self, path: u64, inits: Vec<Vec<f64>>) -> Vec<TrajectoryRecord> {
        let key = self.stream(path);
        let mut quad = LpQuadrature::new(self.config.d, self.config.n).expect("validated dimension");
        let mut states: Vec<PathState> = inits
            .into_iter()
            .map(|x| {
                let row = self.row(0.0, &x, 0.0, 0.0, &mut quad);
                PathState {
                    x,
                    record: TrajectoryRecord {
                        path,
                        dt: self.dt,
                        steps: self.steps,
                        rows: vec![row],
                        diverged: None,
                    },
                    int_diss: 0.0,
                    int_gamma: 0.0,
                    ws: StepWorkspace::new(&self.engine),
                }
            })
            .collect();
        let mut dw = vec![0.0; self.basis.len()];
        for k in 0..self.steps {
            if states.iter().all(|s| s.record.diverged.is_some()) {
                break;
            }
            self.noise.sample_increment(&key, k as u64, self.dt, &mut dw);
            let t_next = (k + 1) as f64 * self.dt;
            for s in states.iter_mut().filter(|s| s.record.diverged.is_none()) {
                let gamma_xx: f64 = s.x.iter().zip(&self.gamma).map(|(x, g)| g * x * x).sum();
                match step(&mut s.x, self.dt, &dw, &self.engine, &mut s.ws, self.config.stepper) {
                    Ok(diss) => {
                        s.int_diss += self.dt * diss;
                        s.int_gamma += self.dt * gamma_xx;
                    }
                    Err(e) => {
                        s.record.diverged = Some(Divergence {
                            step: k,
                            time: k as f64 * self.dt,
                            norm: e.state_norm,
                            reason: "non-finite drift".into(),
                        });
                        continue;
                    }
                }
                let norm = s.x.iter().map(|x| x * x).sum::<f64>().sqrt();
                if !(norm <= self.config.divergence_ceiling) {
                    s.record.diverged = Some(Divergence {
                        step: k + 1,
                        time: t_next,
                        norm,
                        reason: format!("‖X‖₂ exceeded ceiling {:e}", self.config.divergence_ceiling),
                    });
                    continue;
                }
                if (k + 1) % self.config.record_every == 0 || k + 1 == self.steps {
                    let row = self.row(t_next, &s.x, s.int_diss, s.int_gamma, &mut quad);
                    s.record.rows.push(row);
                }
            }
        }
        states.into_iter().map(|s| s.record).collect()
    }

    pub fn simulate(&self, path: u64) -> TrajectoryRecord {
        self.simulate_from(path, self.initial_condition(path))
    }

    pub fn simulate_from(&self, path: u64, init: Vec<f64>) -> TrajectoryRecord {
        assert_eq!(init.len(), self.basis.len(), "initial state has wrong length");
        self.run(path, vec![init]).pop().expect("one trajectory")
    }

    /// Two trajectories from different initial states, same noise stream.
    pub fn simulate_paired(&self, path: u64, init_a: Vec<f64>, init_b: Vec<f64>) -> (TrajectoryRecord, TrajectoryRecord) {
        assert_eq!(init_a.len(), self.basis.len(), "initial state has wrong length");
        assert_eq!(init_b.len(), self.basis.len(), "initial state has wrong length");
        let mut out = self.run(path, vec![init_a, init_b]);
        let b = out.pop().expect("two trajectories");
        let a = out.pop().expect("two trajectories");
        (a, b)
    }

    /// Simulates `paths` in index order, one after another.
    pub fn run_ensemble_sequential(&self, paths: Range<u64>) -> Vec<TrajectoryRecord> {
        paths.map(|p| self.simulate(p)).collect()
    }

    /// Simulates `paths`; results are ordered by path index regardless of scheduling.
    #[cfg(feature = "parallel")]
    pub fn run_ensemble(&self, paths: Range<u64>) -> Vec<TrajectoryRecord> {
        use rayon::prelude::*;
        paths.into_par_iter().map(|p| self.simulate(p)).collect()
    }

    #[cfg(not(feature = "parallel"))]
    pub fn run_ensemble(&self, paths: Range<u64>) -> Vec<TrajectoryRecord> {
        self.run_ensemble_sequential(paths)
    }

    #[cfg(feature = "parallel")]
    pub fn run_paired_ensemble(&self, jobs: &[(u64, Vec<f64>, Vec<f64>)]) -> Vec<(TrajectoryRecord, TrajectoryRecord)> {
        use rayon::prelude::*;
        jobs.par_iter()
            .map(|(p, a, b)| self.simulate_paired(*p, a.clone(), b.clone()))
            .collect()
    }

    #[cfg(not(feature = "parallel"))]
    pub fn run_paired_ensemble(&self, jobs: &[(u64, Vec<f64>, Vec<f64>)]) -> Vec<(TrajectoryRecord, TrajectoryRecord)> {
        jobs.iter()
            .map(|(p, a, b)| self.simulate_paired(*p, a.clone(), b.clone()))
            .collect()
    }
}

/// Single path of `config`.
pub fn simulate(config: &SimConfig, path: u64) -> Result<TrajectoryRecord> {
    Ok(Simulator::new(config)?.simulate(path))
}

/// Two paths of `config` from `init_a` and `init_b` sharing the noise of `path`.
pub fn simulate_paired(
    config: &SimConfig,
    path: u64,
    init_a: Vec<f64>,
    init_b: Vec<f64>,
) -> Result<(TrajectoryRecord, TrajectoryRecord)> {
    let sim = Simulator::new(config)?;
    let n = sim.basis().len();
    if init_a.len() != n || init_b.len() != n {
        return Err(Error::Dimension(format!("initial states must have {n} coordinates")));
    }
    Ok(sim.simulate_paired(path, init_a, init_b))
}
