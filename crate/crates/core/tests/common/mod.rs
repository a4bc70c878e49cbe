#![allow(dead_code)]

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use splf::cli::parse_config;
use splf::integrator::SimConfig;
use splf::spectral::{Basis, SpectralField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian coordinates scaled to unit `L₂` norm.
pub fn unit_coords(basis: &Basis, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut c: Vec<f64> = (0..basis.len()).map(|_| StandardNormal.sample(rng)).collect();
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    c.iter_mut().for_each(|x| *x /= norm);
    c
}

pub fn unit_field(basis: &Basis, rng: &mut ChaCha8Rng) -> SpectralField {
    basis.to_field(&unit_coords(basis, rng)).unwrap()
}

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

pub fn load_config(name: &str) -> SimConfig {
    parse_config(&config_path(name)).unwrap().0
}
