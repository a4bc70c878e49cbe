//! Q-Wiener noise with covariance diagonal in the `ψ_{z,j}` basis.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{make_basis, Basis, BasisIndex, WaveVector};

/// Eigenvalues `γ_{z,j}` of the covariance `Γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CovarianceSpectrum {
    /// `γ_{z,j} = c (1 + 4π²|z|²)^{−s}`
    Power { c: f64, s: f64 },
    /// Finitely many nonzero eigenvalues.
    Explicit {
        #[serde(default)]
        entries: Vec<ExplicitEntry>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitEntry {
    pub z: Vec<i32>,
    pub j: usize,
    pub value: f64,
}

impl CovarianceSpectrum {
    pub fn zero() -> Self {
        CovarianceSpectrum::Explicit { entries: Vec::new() }
    }
}

/// A spectrum checked to be nonnegative and trace class together with `ΔΓ`.
#[derive(Debug, Clone)]
pub struct ValidatedSpectrum {
    d: usize,
    kind: Validated,
}

#[derive(Debug, Clone)]
enum Validated {
    Power { c: f64, s: f64 },
    Explicit(HashMap<(WaveVector, usize), f64>),
}

/// Decay threshold `(d+2)/2` above which `Σ |z|² (1+4π²|z|²)^{−s}` converges on `Z^d`.
pub fn power_decay_threshold(d: usize) -> f64 {
    (d as f64 + 2.0) / 2.0
}

pub fn validate(spec: &CovarianceSpectrum, d: usize) -> Result<ValidatedSpectrum> {
    if d < 2 {
        return Err(Error::config("d", format!("dimension must be at least 2, got {d}")));
    }
    let kind = match spec {
        &CovarianceSpectrum::Power { c, s } => {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::config("gamma.c", format!("amplitude must be finite and ≥ 0, got {c}")));
            }
            let threshold = power_decay_threshold(d);
            if !(s > threshold) {
                return Err(Error::TraceClass(format!(
                    "Σ_z 4π²|z|² γ_z = Σ_z 4π²|z|² c(1+4π²|z|²)^(-{s}) diverges on Z^{d}: need s > {threshold}"
                )));
            }
            Validated::Power { c, s }
        }
        CovarianceSpectrum::Explicit { entries } => {
            let mut map = HashMap::with_capacity(entries.len());
            for e in entries {
                if e.z.len() != d {
                    return Err(Error::config("gamma.entries", format!("z = {:?} is not a {d}-vector", e.z)));
                }
                let z = WaveVector::new(e.z.clone())
                    .map_err(|_| Error::config("gamma.entries", "z = 0 carries no basis function"))?;
                if e.j == 0 || e.j > 2 * d - 2 {
                    return Err(Error::config("gamma.entries", format!("j = {} outside 1..={}", e.j, 2 * d - 2)));
                }
                if !(e.value >= 0.0 && e.value.is_finite()) {
                    return Err(Error::config(
                        "gamma.entries",
                        format!("eigenvalue at z = {:?}, j = {} must be finite and ≥ 0, got {}", e.z, e.j, e.value),
                    ));
                }
                let key = (z.canonical().0, e.j);
                if map.insert(key, e.value).is_some() {
                    return Err(Error::config("gamma.entries", format!("duplicate entry z = {:?}, j = {}", e.z, e.j)));
                }
            }
            Validated::Explicit(map)
        }
    };
    Ok(ValidatedSpectrum { d, kind })
}

impl ValidatedSpectrum {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn gamma(&self, idx: &BasisIndex) -> f64 {
        match &self.kind {
            Validated::Power { c, s } => c * idx.z.bessel_symbol().powf(-s),
            Validated::Explicit(map) => map.get(&(idx.z.clone(), idx.j)).copied().unwrap_or(0.0),
        }
    }

    /// `γ` for every coordinate of `basis`.
    pub fn gamma_vector(&self, basis: &Basis) -> Vec<f64> {
        basis.indices().iter().map(|b| self.gamma(b)).collect()
    }

    /// Largest eigenvalue, i.e. `‖Γ‖` restricted to `V_n`.
    pub fn max_gamma(&self, basis: &Basis) -> f64 {
        self.gamma_vector(basis).into_iter().fold(0.0, f64::max)
    }

    /// `tr(Γ P_n)`
    pub fn trace_pn(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        match &self.kind {
            Validated::Explicit(map) => map
                .iter()
                .filter(|((z, _), _)| z.order() <= n)
                .map(|(_, v)| v)
                .sum(),
            Validated::Power { .. } => {
                let basis = make_basis(n, self.d).expect("validated dimension");
                self.gamma_vector(&basis).iter().sum()
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            Validated::Power { c, .. } => *c == 0.0,
            Validated::Explicit(map) => map.values().all(|&v| v == 0.0),
        }
    }
}

/// Counter-based key of one noise stream: global seed and path index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub path: u64,
}

impl StreamKey {
    fn generator(&self, lane: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(2 * self.path + lane);
        rng
    }

    /// Generator positioned at the start of fine step `step`.
    pub fn noise_rng(&self, step: u64) -> ChaCha8Rng {
        let mut rng = self.generator(0);
        rng.set_word_pos((step as u128) << 32);
        rng
    }

    /// Generator reserved for initial conditions of this path.
    pub fn init_rng(&self) -> ChaCha8Rng {
        self.generator(1)
    }
}

/// Draws `ΔW^{z,j} ~ N(0, γ_{z,j} dt)` independently per coordinate.
///
/// With `substeps = S` the increment over `dt` is the sum of `S` increments
/// over `dt/S` at fine steps `step·S .. step·S + S − 1`, so runs at
/// different step sizes see the same Brownian path.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    sqrt_gamma: Vec<f64>,
    substeps: u32,
}

impl NoiseSampler {
    pub fn new(spectrum: &ValidatedSpectrum, basis: &Basis, substeps: u32) -> Result<Self> {
        if spectrum.d() != basis.d() {
            return Err(Error::Dimension(format!(
                "spectrum for d = {}, basis for d = {}",
                spectrum.d(),
                basis.d()
            )));
        }
        if substeps == 0 {
            return Err(Error::config("brownian_substeps", "must be at least 1"));
        }
        Ok(NoiseSampler {
            sqrt_gamma: spectrum.gamma_vector(basis).iter().map(|g| g.sqrt()).collect(),
            substeps,
        })
    }

    pub fn len(&self) -> usize {
        self.sqrt_gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sqrt_gamma.is_empty()
    }

    pub fn substeps(&self) -> u32 {
        self.substeps
    }

    pub fn sample_increment(&self, key: &StreamKey, step: u64, dt: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.sqrt_gamma.len());
        out.fill(0.0);
        let scale = (dt / self.substeps as f64).sqrt();
        let fine0 = step * self.substeps as u64;
        for s in 0..self.substeps as u64 {
            let mut rng = key.noise_rng(fine0 + s);
            for (o, g) in out.iter_mut().zip(&self.sqrt_gamma) {
                let xi: f64 = StandardNormal.sample(&mut rng);
                *o += g * scale * xi;
            }
        }
    }
}

/// One-shot increment for truncation `n`.
pub fn sample_increment(spectrum: &ValidatedSpectrum, n: usize, dt: f64, key: &StreamKey, step: u64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::config("dt", format!("time step must be positive, got {dt}")));
    }
    let basis = make_basis(n, spectrum.d())?;
    let sampler = NoiseSampler::new(spectrum, &basis, 1)?;
    let mut out = vec![0.0; sampler.len()];
    sampler.sample_increment(key, step, dt, &mut out);
    Ok(out)
}
