//! Divergence-free Fourier machinery on the torus `T^d = [0,1)^d`.
//!
//! Real fields are stored by their Fourier coefficients on a canonical
//! half-space of wave vectors (first nonzero component positive); the
//! coefficient at `-z` is the complex conjugate and is never stored.

mod basis;
mod field;
mod grid;
mod norms;
pub mod snapshot;

pub use basis::{make_basis, Basis, BasisIndex};
pub use field::{inner_product, project_div_free, project_pn, ModalData, SpectralField};
pub use grid::{
    dealiased_resolution, from_grid, gradient_grid, to_grid, FourierGrid, GridScratch, GridTensorField,
    GridVectorField,
};
pub use norms::{gradient_lp_norm, lp_resolution, sobolev_norm, LpQuadrature};

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub(crate) const TWO_PI: f64 = 2.0 * PI;
pub(crate) const FOUR_PI_SQ: f64 = 4.0 * PI * PI;

/// Nonzero integer wave vector `z ∈ Z^d`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WaveVector(Box<[i32]>);

impl WaveVector {
    pub fn new(components: impl Into<Box<[i32]>>) -> Result<Self> {
        let components = components.into();
        if components.iter().all(|&c| c == 0) {
            return Err(Error::Domain("wave vector z = 0 is excluded (mean-zero space)".into()));
        }
        Ok(WaveVector(components))
    }

    pub fn components(&self) -> &[i32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `|z|^2`
    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|&c| (c as f64) * (c as f64)).sum()
    }

    /// Largest `|z_a|`, i.e. the smallest truncation order containing `z`.
    pub fn order(&self) -> usize {
        self.0.iter().map(|c| c.unsigned_abs() as usize).max().unwrap_or(0)
    }

    /// Representative of `{z, -z}` in the half-space: first nonzero component positive.
    pub fn is_canonical(&self) -> bool {
        self.0.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
    }

    pub fn negated(&self) -> Self {
        WaveVector(self.0.iter().map(|c| -c).collect())
    }

    pub fn canonical(&self) -> (Self, bool) {
        if self.is_canonical() {
            (self.clone(), false)
        } else {
            (self.negated(), true)
        }
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.0.iter().zip(v).map(|(&c, x)| c as f64 * x).sum()
    }

    /// Symbol `1 + 4π²|z|²` of `1 − Δ`.
    pub fn bessel_symbol(&self) -> f64 {
        1.0 + FOUR_PI_SQ * self.norm_sq()
    }
}

impl fmt::Debug for WaveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// The canonical half-space modes of `[-n, n]^d \ {0}` in lexicographic order.
#[derive(Debug)]
pub struct ModeSet {
    d: usize,
    n: usize,
    modes: Vec<WaveVector>,
    // full-cube offset -> (half-space index, stored as conjugate partner)
    lookup: Vec<Option<(usize, bool)>>,
}

impl ModeSet {
    pub fn new(d: usize, n: usize) -> Result<Arc<Self>> {
        if d < 2 {
            return Err(Error::config("d", format!("dimension must be at least 2, got {d}")));
        }
        let side = 2 * n + 1;
        let cube = side
            .checked_pow(d as u32)
            .filter(|&c| c <= 1 << 28)
            .ok_or_else(|| Error::config("n", format!("mode cube (2n+1)^d too large for n={n}, d={d}")))?;
        let mut modes = Vec::with_capacity(cube / 2);
        let mut lookup = vec![None; cube];
        let mut z = vec![0i32; d];
        for offset in 0..cube {
            decode_cube(offset, n, &mut z);
            let wv = WaveVector(z.clone().into_boxed_slice());
            if wv.is_canonical() {
                lookup[offset] = Some((modes.len(), false));
                modes.push(wv);
            }
        }
        for offset in 0..cube {
            decode_cube(offset, n, &mut z);
            if z.iter().any(|&c| c != 0) && lookup[offset].is_none() {
                let partner: Vec<i32> = z.iter().map(|c| -c).collect();
                let (k, _) = lookup[encode_cube(&partner, n)].expect("partner is canonical");
                lookup[offset] = Some((k, true));
            }
        }
        Ok(Arc::new(ModeSet { d, n, modes, lookup }))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[WaveVector] {
        &self.modes
    }

    /// Half-space index of `z` (or of `-z`), with a flag telling whether `z`
    /// itself is the conjugate partner of the stored mode.
    pub fn locate(&self, z: &[i32]) -> Option<(usize, bool)> {
        if z.len() != self.d || z.iter().any(|c| c.unsigned_abs() as usize > self.n) {
            return None;
        }
        self.lookup[encode_cube(z, self.n)]
    }
}

fn decode_cube(mut offset: usize, n: usize, z: &mut [i32]) {
    let side = 2 * n + 1;
    for c in z.iter_mut().rev() {
        *c = (offset % side) as i32 - n as i32;
        offset /= side;
    }
}

fn encode_cube(z: &[i32], n: usize) -> usize {
    let side = 2 * n + 1;
    z.iter().fold(0, |acc, &c| acc * side + (c + n as i32) as usize)
}
