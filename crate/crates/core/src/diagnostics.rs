//! Ensemble statistics checked against the energy identity, the a priori
//! bounds, the dissipation functional and the Gronwall envelope of the
//! uniqueness argument.
//!
//! All running time integrals are left-endpoint sums, matching the
//! Euler–Maruyama discretization of the Itô energy identity.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponents;
use crate::integrator::{SimConfig, Simulator, TrajectoryRecord};
use crate::noise::{NoiseSampler, StreamKey, ValidatedSpectrum};
use crate::spectral::{from_grid, to_grid, Basis, LpQuadrature, FOUR_PI_SQ};

/// `|LHS − RHS| ≤ ENERGY_STDERR_FACTOR · stderr + bias allowance`
pub const ENERGY_STDERR_FACTOR: f64 = 3.0;
/// Accepted range of the bias ratio under dt-halving (first-order scheme).
pub const BIAS_RATIO_RANGE: (f64, f64) = (1.5, 2.5);
/// Bias allowance `= BIAS_ALLOWANCE_FACTOR · |L(dt) − L(dt/2)|`.
///
/// For bias `B(h) ≈ c h^q` with ratio `2^q ∈ [1.5, 2.5]` the remaining bias at
/// `dt` is `|L(dt) − L(dt/2)| · r/(r − 1) ≤ 3 |L(dt) − L(dt/2)|`.
pub const BIAS_ALLOWANCE_FACTOR: f64 = 3.0;
/// Largest log-log growth exponent of the a priori statistics accepted as affine.
pub const GROWTH_EXPONENT_LIMIT: f64 = 1.1;
/// Relative slack when comparing a separation against its envelope.
pub const ENVELOPE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

/// Sample mean and its standard error (unbiased variance).
pub fn mean_estimate(values: &[f64]) -> MeanEstimate {
    let count = values.len();
    let mean = values.iter().sum::<f64>() / count as f64;
    let stderr = if count > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
        (var / count as f64).sqrt()
    } else {
        f64::NAN
    };
    MeanEstimate { mean, stderr, count }
}

fn completed(records: &[TrajectoryRecord]) -> (Vec<&TrajectoryRecord>, usize) {
    let ok: Vec<_> = records.iter().filter(|r| r.completed()).collect();
    let diverged = records.len() - ok.len();
    (ok, diverged)
}

/// `‖X_T‖₂² + 2∫₀ᵀ⟨e(X),τ(X)⟩dt` for one path.
pub fn energy_functional(record: &TrajectoryRecord) -> f64 {
    let last = record.last();
    last.norm_l2_sq + 2.0 * last.int_diss
}

/// Per-path defect of the zero-noise energy equality,
/// `|‖X_T‖² + 2∫⟨e,τ⟩ − ‖X₀‖²|`.
pub fn deterministic_energy_defect(record: &TrajectoryRecord) -> f64 {
    (energy_functional(record) - record.first().norm_l2_sq).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyBalanceReport {
    pub dt: f64,
    pub lhs_mean: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub n_paths: usize,
    pub n_diverged: usize,
    pub z_score: f64,
}

impl EnergyBalanceReport {
    pub fn residual(&self) -> f64 {
        self.lhs_mean - self.rhs
    }
}

/// Ensemble estimate of `E[‖X_T‖² + 2∫⟨e,τ⟩]` against `E‖X₀‖² + tr(ΓP_n)T`.
pub fn energy_balance(records: &[TrajectoryRecord], sim: &Simulator) -> Result<EnergyBalanceReport> {
    let (ok, n_diverged) = completed(records);
    if ok.len() < 2 {
        return Err(Error::Diagnostics(format!(
            "energy balance needs at least 2 completed paths, got {} ({} diverged)",
            ok.len(),
            n_diverged
        )));
    }
    let horizon = sim.steps() as f64 * sim.dt();
    let values: Vec<f64> = ok.iter().map(|r| energy_functional(r)).collect();
    let est = mean_estimate(&values);
    let rhs = sim.expected_initial_energy() + sim.spectrum().trace_pn(sim.config().n) * horizon;
    let residual = est.mean - rhs;
    let z_score = if est.stderr > 0.0 {
        residual / est.stderr
    } else if residual == 0.0 {
        0.0
    } else {
        residual.signum() * f64::INFINITY
    };
    Ok(EnergyBalanceReport {
        dt: sim.dt(),
        lhs_mean: est.mean,
        lhs_stderr: est.stderr,
        rhs,
        n_paths: ok.len(),
        n_diverged,
        z_score,
    })
}

/// The energy identity at `dt`, `dt/2`, `dt/4` on one shared Brownian path per
/// ensemble member.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyLadderReport {
    pub levels: Vec<EnergyBalanceReport>,
    /// `(L(dt) − L(dt/2)) / (L(dt/2) − L(dt/4))`
    pub bias_ratio: f64,
    pub bias_allowance: f64,
    pub tolerance: f64,
    pub ratio_ok: bool,
    pub within_tolerance: bool,
    /// Invariants over every recorded state of all three levels.
    pub structure: StructuralReport,
}

impl EnergyLadderReport {
    pub fn passed(&self) -> bool {
        self.ratio_ok && self.within_tolerance
    }

    pub fn coarse(&self) -> &EnergyBalanceReport {
        &self.levels[0]
    }
}

/// Configurations for `dt`, `dt/2`, `dt/4` whose noise is built from the same
/// fine increments.
pub fn ladder_configs(config: &SimConfig, levels: u32) -> Vec<SimConfig> {
    let (steps, dt) = config.time_grid();
    let records = config.record_every.min(steps);
    (0..levels)
        .map(|i| {
            let mut c = config.clone();
            let refine = 1usize << i;
            c.dt = dt / refine as f64;
            c.record_every = records * refine;
            c.brownian_substeps = config.brownian_substeps << (levels - 1 - i);
            c
        })
        .collect()
}

/// Runs the ladder and applies the acceptance rule
/// `|LHS − RHS| ≤ 3·stderr + 3|L(dt) − L(dt/2)|` with a bias ratio in `[1.5, 2.5]`.
pub fn energy_ladder(config: &SimConfig) -> Result<EnergyLadderReport> {
    let mut levels = Vec::with_capacity(3);
    let mut structure = StructuralReport::default();
    for c in ladder_configs(config, 3) {
        let sim = Simulator::new(&c)?;
        let records = sim.run_ensemble(0..c.n_paths as u64);
        levels.push(energy_balance(&records, &sim)?);
        structure = structure.merge(structural_check(&records, sim.basis())?);
    }
    let l: Vec<f64> = levels.iter().map(|r| r.lhs_mean).collect();
    let bias_ratio = (l[0] - l[1]) / (l[1] - l[2]);
    let bias_allowance = BIAS_ALLOWANCE_FACTOR * (l[0] - l[1]).abs();
    let tolerance = ENERGY_STDERR_FACTOR * levels[0].lhs_stderr + bias_allowance;
    let ratio_ok = (BIAS_RATIO_RANGE.0..=BIAS_RATIO_RANGE.1).contains(&bias_ratio);
    let within_tolerance = levels[0].residual().abs() <= tolerance;
    Ok(EnergyLadderReport {
        levels,
        bias_ratio,
        bias_allowance,
        tolerance,
        ratio_ok,
        within_tolerance,
        structure,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AprioriLevel {
    pub horizon: f64,
    /// `E sup_{t≤T} ‖X_t‖₂²` over recorded times
    pub sup_l2_sq: MeanEstimate,
    /// `E ∫₀ᵀ ‖X_t‖_{p,1}^p dt`
    pub int_vp1: MeanEstimate,
    /// `E (∫₀ᵀ ‖X_t‖_{p,1}^p dt)^δ`, `δ = p/(p+2)`
    pub delta_moment: MeanEstimate,
}

impl AprioriLevel {
    pub fn combined(&self) -> f64 {
        self.sup_l2_sq.mean + self.int_vp1.mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AprioriReport {
    pub levels: Vec<AprioriLevel>,
    pub n_diverged: usize,
    /// Least-squares slope of `E[sup‖X‖² + ∫‖X‖_{p,1}^p]` against `T`.
    pub slope: f64,
    /// Least-squares slope of its logarithm against `log T`.
    pub growth_exponent: f64,
    pub affine_ok: bool,
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// A priori statistics on horizons `T/4, T/2, T` of an ensemble run to `T`.
pub fn apriori_check(records: &[TrajectoryRecord], config: &SimConfig) -> Result<AprioriReport> {
    let (_, dt) = config.time_grid();
    let full = config.horizon;
    apriori_check_at(records, config.p, &[full / 4.0, full / 2.0, full], 0.5 * dt)
}

/// A priori statistics on the given horizons; `slack` absorbs time rounding.
pub fn apriori_check_at(records: &[TrajectoryRecord], p: f64, horizons: &[f64], slack: f64) -> Result<AprioriReport> {
    let delta = exponents::delta(p)?;
    let (ok, n_diverged) = completed(records);
    if ok.is_empty() {
        return Err(Error::Diagnostics("a priori check needs at least one completed path".into()));
    }
    let mut levels = Vec::with_capacity(horizons.len());
    for &h in horizons {
        let mut sups = Vec::with_capacity(ok.len());
        let mut ints = Vec::with_capacity(ok.len());
        let mut moments = Vec::with_capacity(ok.len());
        for r in &ok {
            let mut sup = 0.0f64;
            let mut int = 0.0;
            for (k, row) in r.rows.iter().enumerate() {
                if row.t > h + slack {
                    break;
                }
                sup = sup.max(row.norm_l2_sq);
                if let Some(next) = r.rows.get(k + 1).filter(|n| n.t <= h + slack) {
                    int += row.norm_vp1_p * (next.t - row.t);
                }
            }
            sups.push(sup);
            ints.push(int);
            moments.push(int.powf(delta));
        }
        levels.push(AprioriLevel {
            horizon: h,
            sup_l2_sq: mean_estimate(&sups),
            int_vp1: mean_estimate(&ints),
            delta_moment: mean_estimate(&moments),
        });
    }
    let t: Vec<f64> = levels.iter().map(|l| l.horizon).collect();
    let s: Vec<f64> = levels.iter().map(AprioriLevel::combined).collect();
    let slope = least_squares_slope(&t, &s);
    let growth_exponent = if s.iter().all(|&v| v > 0.0) && t.iter().all(|&v| v > 0.0) {
        let lt: Vec<f64> = t.iter().map(|v| v.ln()).collect();
        let ls: Vec<f64> = s.iter().map(|v| v.ln()).collect();
        least_squares_slope(&lt, &ls)
    } else {
        0.0
    };
    Ok(AprioriReport {
        levels,
        n_diverged,
        slope,
        growth_exponent,
        affine_ok: growth_exponent <= GROWTH_EXPONENT_LIMIT,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticVariation {
    pub times: Vec<f64>,
    /// `⟨M⟩_t = ∫₀ᵗ ⟨ΓX, X⟩ ds`
    pub qv: Vec<f64>,
    /// `max γ · ∫₀ᵗ ‖X‖₂² ds`
    pub bound: Vec<f64>,
}

impl QuadraticVariation {
    pub fn bound_holds(&self) -> bool {
        self.qv.iter().zip(&self.bound).all(|(q, b)| *q <= b * (1.0 + 1e-12))
    }

    pub fn nondecreasing(&self) -> bool {
        self.qv.windows(2).all(|w| w[1] >= w[0])
    }
}

/// Running quadratic variation of the martingale part of `‖X‖²` over the
/// recorded times of `record`.
pub fn quadratic_variation(record: &TrajectoryRecord, gamma: &[f64]) -> QuadraticVariation {
    let max_gamma = gamma.iter().copied().fold(0.0, f64::max);
    let mut times = Vec::with_capacity(record.rows.len());
    let mut qv = Vec::with_capacity(record.rows.len());
    let mut bound = Vec::with_capacity(record.rows.len());
    let (mut q, mut b) = (0.0, 0.0);
    for (k, row) in record.rows.iter().enumerate() {
        if k > 0 {
            let prev = &record.rows[k - 1];
            let h = row.t - prev.t;
            q += h * prev.coords.iter().zip(gamma).map(|(x, g)| g * x * x).sum::<f64>();
            b += h * max_gamma * prev.norm_l2_sq;
        }
        times.push(row.t);
        qv.push(q);
        bound.push(b);
    }
    QuadraticVariation { times, qv, bound }
}

/// Evaluates `J` at one state:
/// `‖ΔX‖₂²/(1+‖∇X‖₂²)^λ` for `p ≥ 2`, and
/// `‖ΔX‖_p²/((1+‖∇X‖₂²)^λ (1+‖∇X‖_p)^{2−p})` for `1 < p < 2`.
pub struct DissipationEvaluator<'a> {
    basis: &'a Basis,
    p: f64,
    lambda: f64,
    wave_sq: Vec<f64>,
    quad: LpQuadrature,
}

impl<'a> DissipationEvaluator<'a> {
    pub fn new(basis: &'a Basis, p: f64) -> Result<Self> {
        Ok(DissipationEvaluator {
            basis,
            p,
            lambda: exponents::lambda(p, basis.d())?,
            wave_sq: basis.wave_norms_sq().iter().map(|w| FOUR_PI_SQ * w).collect(),
            quad: LpQuadrature::new(basis.d(), basis.n())?,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn evaluate(&mut self, coords: &[f64]) -> Result<f64> {
        let grad_l2_sq: f64 = coords.iter().zip(&self.wave_sq).map(|(x, w)| w * x * x).sum();
        let damping = (1.0 + grad_l2_sq).powf(self.lambda);
        if self.p >= 2.0 {
            let lap_sq: f64 = coords.iter().zip(&self.wave_sq).map(|(x, w)| w * w * x * x).sum();
            return Ok(lap_sq / damping);
        }
        let field = self.basis.to_field(coords)?;
        let lap = self.quad.laplacian(&field, self.p)?;
        let grad = self.quad.gradient(&field, self.p)?;
        Ok(lap * lap / (damping * (1.0 + grad).powf(2.0 - self.p)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipationFunctional {
    pub times: Vec<f64>,
    pub j: Vec<f64>,
    /// Left-endpoint `∫₀ᵀ J_t dt` over the recorded times.
    pub integral: f64,
}

pub fn dissipation_functional(record: &TrajectoryRecord, basis: &Basis, p: f64) -> Result<DissipationFunctional> {
    let mut eval = DissipationEvaluator::new(basis, p)?;
    let mut j = Vec::with_capacity(record.rows.len());
    for row in &record.rows {
        j.push(eval.evaluate(&row.coords)?);
    }
    let times = record.times();
    let integral = times.windows(2).zip(&j).map(|(t, v)| v * (t[1] - t[0])).sum();
    Ok(DissipationFunctional { times, j, integral })
}

/// `2p/(2p − d)`, the power of `‖∇X‖_p` in the Gronwall exponent.
pub fn gronwall_exponent(p: f64, d: usize) -> Result<f64> {
    let dd = d as f64;
    if !(2.0 * p > dd) {
        return Err(Error::Domain(format!("Gronwall exponent needs 2p > d, got p = {p}, d = {d}")));
    }
    Ok(2.0 * p / (2.0 * p - dd))
}

/// Separation of one pair together with
/// `I_t = ∫₀ᵗ ‖∇X_s‖_p^{2p/(2p−d)} ds` along the first trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationTrace {
    pub path: u64,
    pub times: Vec<f64>,
    pub sep_sq: Vec<f64>,
    pub integral: Vec<f64>,
}

impl SeparationTrace {
    /// Smallest `C ≥ 0` with `‖Z_t‖² ≤ ‖Z₀‖² e^{C I_t}` at every recorded time.
    pub fn required_constant(&self) -> Result<f64> {
        let z0 = self.sep_sq[0];
        let mut c = 0.0f64;
        for (s, i) in self.sep_sq.iter().zip(&self.integral).skip(1) {
            if *s <= z0 * (1.0 + ENVELOPE_RTOL) {
                continue;
            }
            if z0 == 0.0 || *i <= 0.0 {
                return Err(Error::Diagnostics(format!(
                    "path {}: separation grew from {z0:e} to {s:e} with I_t = {i:e}; no finite constant",
                    self.path
                )));
            }
            c = c.max((s / z0).ln() / i);
        }
        Ok(c)
    }

    pub fn envelope(&self, c: f64) -> Vec<f64> {
        self.integral.iter().map(|i| self.sep_sq[0] * (c * i).exp()).collect()
    }
}

pub fn separation_trace(a: &TrajectoryRecord, b: &TrajectoryRecord, basis: &Basis, p: f64) -> Result<SeparationTrace> {
    if a.path != b.path || a.rows.len() != b.rows.len() || a.rows.iter().zip(&b.rows).any(|(x, y)| x.t != y.t) {
        return Err(Error::Diagnostics(format!(
            "trajectories {} and {} are not a noise-sharing pair on a common time grid",
            a.path, b.path
        )));
    }
    if !(a.completed() && b.completed()) {
        return Err(Error::Diagnostics(format!("pair {} diverged", a.path)));
    }
    let power = gronwall_exponent(p, basis.d())?;
    let mut quad = LpQuadrature::new(basis.d(), basis.n())?;
    let mut times = Vec::with_capacity(a.rows.len());
    let mut sep_sq = Vec::with_capacity(a.rows.len());
    let mut integral = Vec::with_capacity(a.rows.len());
    let mut acc = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        if let Some((t0, g0)) = prev {
            acc += g0 * (ra.t - t0);
        }
        let grad = quad.gradient(&basis.to_field(&ra.coords)?, p)?;
        prev = Some((ra.t, grad.powf(power)));
        times.push(ra.t);
        sep_sq.push(ra.coords.iter().zip(&rb.coords).map(|(x, y)| (x - y).powi(2)).sum());
        integral.push(acc);
    }
    Ok(SeparationTrace {
        path: a.path,
        times,
        sep_sq,
        integral,
    })
}

/// Smallest constant that makes the envelope hold on every calibration trace.
pub fn calibrate_gronwall(traces: &[SeparationTrace]) -> Result<f64> {
    traces
        .iter()
        .map(SeparationTrace::required_constant)
        .try_fold(0.0f64, |acc, c| Ok(acc.max(c?)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GronwallPair {
    pub path: u64,
    pub times: Vec<f64>,
    pub sep_sq: Vec<f64>,
    pub envelope: Vec<f64>,
    /// Smallest constant this pair alone would need.
    pub required_constant: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GronwallReport {
    pub exponent: f64,
    pub c_hat: f64,
    pub margin: f64,
    /// `p ≥ 1 + d/2`
    pub in_theorem: bool,
    pub pairs: Vec<GronwallPair>,
    pub checked: usize,
    pub violations: usize,
    /// Invariants over the states of the checked pairs (and calibration
    /// pairs when produced by [`uniqueness_experiment`]).
    pub structure: StructuralReport,
}

impl GronwallReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }

    /// Largest constant required by any single checked pair.
    pub fn max_required(&self) -> f64 {
        self.pairs.iter().map(|p| p.required_constant).fold(0.0, f64::max)
    }
}

/// Envelope `‖Z₀‖² exp(Ĉ(1+margin) I_t)` against the separations of `pairs`.
pub fn gronwall_check(
    pairs: &[(TrajectoryRecord, TrajectoryRecord)],
    basis: &Basis,
    p: f64,
    c_hat: f64,
    margin: f64,
) -> Result<GronwallReport> {
    let d = basis.d();
    let exponent = gronwall_exponent(p, d)?;
    let c = c_hat * (1.0 + margin);
    let mut out = Vec::with_capacity(pairs.len());
    let (mut checked, mut violations) = (0, 0);
    let mut structure = StructuralReport::default();
    for (a, b) in pairs {
        structure = structure.merge(structural_check([a, b], basis)?);
        let trace = separation_trace(a, b, basis, p)?;
        let envelope = trace.envelope(c);
        let required_constant = trace.required_constant().unwrap_or(f64::INFINITY);
        let v = trace
            .sep_sq
            .iter()
            .zip(&envelope)
            .filter(|(s, e)| **s > **e * (1.0 + ENVELOPE_RTOL))
            .count();
        checked += trace.sep_sq.len();
        violations += v;
        out.push(GronwallPair {
            path: trace.path,
            times: trace.times,
            sep_sq: trace.sep_sq,
            envelope,
            required_constant,
            violations: v,
        });
    }
    Ok(GronwallReport {
        exponent,
        c_hat,
        margin,
        in_theorem: exponents::uniqueness_ok(p, d),
        pairs: out,
        checked,
        violations,
        structure,
    })
}

/// Seed offset separating validation pairs from calibration pairs.
pub const VALIDATION_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

/// Calibrate on `calibration` pairs of `config.seed`, validate on
/// `validation` pairs of a fresh seed. Initial data `ξ` and `ξ + ε ψ_{e₁,1}`.
pub fn uniqueness_experiment(
    config: &SimConfig,
    eps: f64,
    calibration: usize,
    validation: usize,
    margin: f64,
) -> Result<GronwallReport> {
    if !(eps.is_finite()) {
        return Err(Error::config("eps", "must be finite"));
    }
    let paired = |seed: u64, count: usize| -> Result<(Simulator, Vec<(TrajectoryRecord, TrajectoryRecord)>)> {
        let mut c = config.clone();
        c.seed = seed;
        let sim = Simulator::new(&c)?;
        let mut e1 = vec![0; c.d];
        e1[0] = 1;
        let k = sim.basis().index_of(&e1, 1).expect("e1 lies in every truncation");
        let jobs: Vec<_> = (0..count as u64)
            .map(|path| {
                let a = sim.initial_condition(path);
                let mut b = a.clone();
                b[k] += eps;
                (path, a, b)
            })
            .collect();
        let runs = sim.run_paired_ensemble(&jobs);
        Ok((sim, runs))
    };
    let (sim, calib) = paired(config.seed, calibration)?;
    let traces = calib
        .iter()
        .map(|(a, b)| separation_trace(a, b, sim.basis(), config.p))
        .collect::<Result<Vec<_>>>()?;
    let c_hat = calibrate_gronwall(&traces)?;
    let mut calib_structure = StructuralReport::default();
    for (a, b) in &calib {
        calib_structure = calib_structure.merge(structural_check([a, b], sim.basis())?);
    }
    let (sim, valid) = paired(config.seed.wrapping_add(VALIDATION_SEED_OFFSET), validation)?;
    let mut report = gronwall_check(&valid, sim.basis(), config.p, c_hat, margin)?;
    report.structure = report.structure.merge(calib_structure);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StructuralReport {
    pub states: usize,
    /// `max |z · X̂_z|`
    pub max_divergence: f64,
    /// `max |X̂_{−z} − conj X̂_z|` after a grid round trip
    pub max_conjugate_defect: f64,
}

impl StructuralReport {
    pub fn merge(self, other: StructuralReport) -> StructuralReport {
        StructuralReport {
            states: self.states + other.states,
            max_divergence: self.max_divergence.max(other.max_divergence),
            max_conjugate_defect: self.max_conjugate_defect.max(other.max_conjugate_defect),
        }
    }
}

/// Divergence and conjugate-symmetry defects of every recorded state, the
/// latter measured on the full Fourier cube recovered from physical space.
pub fn structural_check<'a>(
    records: impl IntoIterator<Item = &'a TrajectoryRecord>,
    basis: &Basis,
) -> Result<StructuralReport> {
    let m = 2 * basis.n() + 1;
    let mut report = StructuralReport::default();
    for row in records.into_iter().flat_map(|r| &r.rows) {
        let field = basis.to_field(&row.coords)?;
        let modal = from_grid(&to_grid(&field, m)?, basis.n())?;
        report.states += 1;
        report.max_divergence = report
            .max_divergence
            .max(field.divergence_defect())
            .max(modal.divergence_defect());
        report.max_conjugate_defect = report.max_conjugate_defect.max(modal.conjugate_symmetry_defect());
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceRatioReport {
    pub var_dt: f64,
    pub var_4dt: f64,
    pub ratio: f64,
    pub ratio_stderr: f64,
    pub expected: f64,
}

impl VarianceRatioReport {
    pub fn within(&self, k: f64) -> bool {
        (self.ratio - self.expected).abs() <= k * self.ratio_stderr
    }
}

/// Sample variances of coordinate `index` over `draws` increments at `dt`
/// and at `4 dt`, taken from independent streams of `seed`.
pub fn noise_variance_ratio(
    spectrum: &ValidatedSpectrum,
    basis: &Basis,
    index: usize,
    dt: f64,
    draws: usize,
    seed: u64,
) -> Result<VarianceRatioReport> {
    if draws < 2 || index >= basis.len() {
        return Err(Error::Diagnostics(format!(
            "need ≥ 2 draws and an index below {}, got {draws} and {index}",
            basis.len()
        )));
    }
    let sampler = NoiseSampler::new(spectrum, basis, 1)?;
    let mut buf = vec![0.0; basis.len()];
    let mut variance = |h: f64, offset: u64| {
        let values: Vec<f64> = (0..draws as u64)
            .map(|i| {
                let key = StreamKey {
                    seed,
                    path: offset + i,
                };
                sampler.sample_increment(&key, 0, h, &mut buf);
                buf[index]
            })
            .collect();
        let mean = values.iter().sum::<f64>() / draws as f64;
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws - 1) as f64
    };
    let var_dt = variance(dt, 0);
    let var_4dt = variance(4.0 * dt, draws as u64);
    let ratio = var_4dt / var_dt;
    // each sample variance has relative error sqrt(2/(N−1))
    let ratio_stderr = ratio * (4.0 / (draws - 1) as f64).sqrt();
    Ok(VarianceRatioReport {
        var_dt,
        var_4dt,
        ratio,
        ratio_stderr,
        expected: 4.0,
    })
}
