use std::f64::consts::SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;

use super::{ModeSet, SpectralField, WaveVector};
use crate::error::{Error, Result};

/// One real basis function `ψ_{z,j}`.
///
/// `j ∈ 1..=d-1` selects `√2 e_{z,j} cos(2π z·x)`, `j ∈ d..=2d-2` selects
/// `√2 e_{z,j-d+1} sin(2π z·x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisIndex {
    pub z: WaveVector,
    pub j: usize,
    pub e_vec: Vec<f64>,
    /// Position of `z` in the half-space mode list.
    pub mode: usize,
}

impl BasisIndex {
    pub fn is_cosine(&self) -> bool {
        self.j < self.z.dim()
    }
}

/// The ordered divergence-free basis of the Galerkin space of order `n`.
#[derive(Debug, Clone)]
pub struct Basis {
    modes: Arc<ModeSet>,
    // frames[(k * (d-1) + r) * d + i] = i-th component of e_{z_k, r+1}
    frames: Vec<f64>,
    indices: Vec<BasisIndex>,
}

/// Enumerates `ψ_{z,j}` for `z` in the canonical half-space of `[-n,n]^d \ {0}`.
pub fn make_basis(n: usize, d: usize) -> Result<Basis> {
    if n < 1 {
        return Err(Error::config("n", "truncation order must be at least 1"));
    }
    Basis::new(ModeSet::new(d, n)?)
}

impl Basis {
    pub fn new(modes: Arc<ModeSet>) -> Result<Self> {
        let d = modes.d();
        let mut frames = Vec::with_capacity(modes.len() * (d - 1) * d);
        let mut indices = Vec::with_capacity(modes.len() * 2 * (d - 1));
        for (k, z) in modes.modes().iter().enumerate() {
            let frame = hyperplane_frame(z);
            for r in 0..2 * (d - 1) {
                indices.push(BasisIndex {
                    z: z.clone(),
                    j: r + 1,
                    e_vec: frame[r % (d - 1)].clone(),
                    mode: k,
                });
            }
            frames.extend(frame.into_iter().flatten());
        }
        Ok(Basis {
            modes,
            frames,
            indices,
        })
    }

    pub fn d(&self) -> usize {
        self.modes.d()
    }

    pub fn n(&self) -> usize {
        self.modes.n()
    }

    /// Number of real coordinates `N = dim V_n`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[BasisIndex] {
        &self.indices
    }

    pub fn mode_set(&self) -> &Arc<ModeSet> {
        &self.modes
    }

    pub fn coords_per_mode(&self) -> usize {
        2 * (self.d() - 1)
    }

    /// Orthonormal vectors `e_{z_k,1..d-1}`, flattened row by row.
    pub fn frame(&self, k: usize) -> &[f64] {
        let d = self.d();
        let len = (d - 1) * d;
        &self.frames[k * len..(k + 1) * len]
    }

    pub fn index_of(&self, z: &[i32], j: usize) -> Option<usize> {
        let (k, conj) = self.modes.locate(z)?;
        if conj || j == 0 || j > self.coords_per_mode() {
            return None;
        }
        Some(k * self.coords_per_mode() + j - 1)
    }

    /// Half-space Fourier coefficients `v̂_z` from coordinates `X^{z,j}`.
    pub fn modal_from_coords(&self, coords: &[f64], out: &mut [Complex64]) {
        let d = self.d();
        let m = d - 1;
        debug_assert_eq!(coords.len(), self.len());
        debug_assert_eq!(out.len(), self.modes.len() * d);
        for k in 0..self.modes.len() {
            let c = &coords[k * 2 * m..(k + 1) * 2 * m];
            let frame = self.frame(k);
            let slot = &mut out[k * d..(k + 1) * d];
            slot.fill(Complex64::new(0.0, 0.0));
            for r in 0..m {
                let w = Complex64::new(c[r], -c[m + r]) / SQRT_2;
                for (s, e) in slot.iter_mut().zip(&frame[r * d..(r + 1) * d]) {
                    *s += w * e;
                }
            }
        }
    }

    /// Coordinates `⟨v, ψ_{z,j}⟩` from half-space Fourier coefficients.
    pub fn coords_from_modal(&self, modal: &[Complex64], out: &mut [f64]) {
        let d = self.d();
        let m = d - 1;
        for k in 0..self.modes.len() {
            let v = &modal[k * d..(k + 1) * d];
            let frame = self.frame(k);
            let c = &mut out[k * 2 * m..(k + 1) * 2 * m];
            for r in 0..m {
                let e = &frame[r * d..(r + 1) * d];
                let proj: Complex64 = v.iter().zip(e).map(|(a, b)| a * b).sum();
                c[r] = SQRT_2 * proj.re;
                c[m + r] = -SQRT_2 * proj.im;
            }
        }
    }

    pub fn to_field(&self, coords: &[f64]) -> Result<SpectralField> {
        if coords.len() != self.len() {
            return Err(Error::Dimension(format!(
                "coordinate vector has length {}, basis has {}",
                coords.len(),
                self.len()
            )));
        }
        let mut modal = vec![Complex64::new(0.0, 0.0); self.modes.len() * self.d()];
        self.modal_from_coords(coords, &mut modal);
        Ok(SpectralField::from_parts(self.modes.clone(), modal))
    }

    /// Coordinate representation of `field`; the field may have a lower order
    /// than the basis, never a higher one.
    pub fn coordinates(&self, field: &SpectralField) -> Result<Vec<f64>> {
        if field.d() != self.d() {
            return Err(Error::Dimension(format!(
                "field dimension {} vs basis dimension {}",
                field.d(),
                self.d()
            )));
        }
        if field.n() > self.n() {
            return Err(Error::Dimension(format!(
                "field order {} exceeds basis truncation {}",
                field.n(),
                self.n()
            )));
        }
        let embedded = field.with_order(self.n());
        let mut out = vec![0.0; self.len()];
        self.coords_from_modal(embedded.coeffs(), &mut out);
        Ok(out)
    }

    /// The single basis function at coordinate position `index`.
    pub fn psi(&self, index: usize) -> SpectralField {
        let mut coords = vec![0.0; self.len()];
        coords[index] = 1.0;
        self.to_field(&coords).expect("basis-sized vector")
    }

    /// `|z|^2` for each coordinate.
    pub fn wave_norms_sq(&self) -> Vec<f64> {
        self.indices.iter().map(|b| b.z.norm_sq()).collect()
    }
}

/// Gram–Schmidt of the canonical unit vectors against `z`, dropping the axis
/// with the largest `|z_a|` (lowest index on ties).
fn hyperplane_frame(z: &WaveVector) -> Vec<Vec<f64>> {
    let d = z.dim();
    let comps = z.components();
    let norm = z.norm_sq().sqrt();
    let zhat: Vec<f64> = comps.iter().map(|&c| c as f64 / norm).collect();
    let mut drop = 0;
    for a in 1..d {
        if comps[a].abs() > comps[drop].abs() {
            drop = a;
        }
    }
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    for a in (0..d).filter(|&a| a != drop) {
        let mut v = vec![0.0; d];
        v[a] = 1.0;
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            remove_component(&mut v, &zhat);
            for e in &frame {
                remove_component(&mut v, e);
            }
        }
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= len);
        frame.push(v);
    }
    frame
}

fn remove_component(v: &mut [f64], unit: &[f64]) {
    let c: f64 = v.iter().zip(unit).map(|(a, b)| a * b).sum();
    v.iter_mut().zip(unit).for_each(|(a, b)| *a -= c * b);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{to_grid, GridVectorField};

    fn grid_inner(a: &GridVectorField, b: &GridVectorField) -> f64 {
        a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum::<f64>() / a.points() as f64
    }

    #[test]
    fn counts_for_small_cases() {
        assert_eq!(make_basis(1, 2).unwrap().len(), 8);
        assert_eq!(make_basis(2, 2).unwrap().len(), 24);
        assert_eq!(make_basis(1, 3).unwrap().len(), 13 * 4);
        assert!(make_basis(0, 2).is_err());
        assert!(make_basis(1, 1).is_err());
    }

    #[test]
    fn frames_are_orthonormal_and_orthogonal_to_z() {
        let basis = make_basis(2, 3).unwrap();
        for idx in basis.indices() {
            let len: f64 = idx.e_vec.iter().map(|x| x * x).sum();
            assert!((len - 1.0).abs() < 1e-15);
            assert!(idx.z.dot(&idx.e_vec).abs() < 1e-14);
        }
        for k in 0..basis.mode_set().len() {
            let f = basis.frame(k);
            let e1 = &f[0..3];
            let e2 = &f[3..6];
            let dot: f64 = e1.iter().zip(e2).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-15);
        }
    }

    #[test]
    fn orthonormal_under_grid_quadrature() {
        let basis = make_basis(1, 2).unwrap();
        let grids: Vec<_> = (0..basis.len())
            .map(|i| to_grid(&basis.psi(i), 8).unwrap())
            .collect();
        for (a, ga) in grids.iter().enumerate() {
            for (b, gb) in grids.iter().enumerate() {
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((grid_inner(ga, gb) - expected).abs() < 1e-12, "({a},{b})");
            }
        }
    }

    #[test]
    fn psi_matches_cos_sin_definition() {
        let basis = make_basis(2, 2).unwrap();
        let m = 10;
        for (i, idx) in basis.indices().iter().enumerate() {
            let g = to_grid(&basis.psi(i), m).unwrap();
            for p in 0..m * m {
                let x = [(p / m) as f64 / m as f64, (p % m) as f64 / m as f64];
                let phase = crate::spectral::TWO_PI * idx.z.dot(&x);
                let wave = if idx.is_cosine() { phase.cos() } else { phase.sin() };
                for c in 0..2 {
                    let expected = SQRT_2 * idx.e_vec[c] * wave;
                    assert!((g.component(c)[p] - expected).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn unit_coordinates_round_trip() {
        let basis = make_basis(2, 3).unwrap();
        for i in [0, 5, basis.len() - 1] {
            let coords = basis.coordinates(&basis.psi(i)).unwrap();
            for (k, c) in coords.iter().enumerate() {
                let expected = if k == i { 1.0 } else { 0.0 };
                assert!((c - expected).abs() < 1e-15);
            }
        }
        let zero = SpectralField::zero(3, 2).unwrap();
        assert!(basis.coordinates(&zero).unwrap().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn truncation_mismatch_rejected() {
        let small = make_basis(1, 2).unwrap();
        let big = make_basis(2, 2).unwrap();
        let field = big.psi(big.len() - 1);
        assert!(matches!(small.coordinates(&field), Err(Error::Dimension(_))));
        // lower-order fields embed
        let low = small.psi(0);
        let coords = big.coordinates(&low).unwrap();
        assert!((coords.iter().map(|c| c * c).sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
