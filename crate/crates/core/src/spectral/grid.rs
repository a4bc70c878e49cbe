use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{ModalData, ModeSet, SpectralField, TWO_PI};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Grid size per axis on which quadratic products of order-`n` fields are alias-free.
pub fn dealiased_resolution(n: usize) -> usize {
    2 * (2 * n + 1)
}

/// Uniform `m^d` grid on `[0,1)^d` with a cached `d`-dimensional FFT.
///
/// Points are ordered row-major with the last axis fastest. The inverse
/// transform evaluates `Σ_k ĉ_k e^{2πi k·x}`; the forward transform is
/// unnormalized, callers divide by [`FourierGrid::points`].
#[derive(Clone)]
pub struct FourierGrid {
    d: usize,
    m: usize,
    points: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FourierGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierGrid")
            .field("d", &self.d)
            .field("m", &self.m)
            .finish()
    }
}

/// Reusable buffers for [`FourierGrid`] transforms.
#[derive(Debug, Clone)]
pub struct GridScratch {
    buf: Vec<Complex64>,
    line: Vec<Complex64>,
    fft: Vec<Complex64>,
}

impl FourierGrid {
    pub fn new(d: usize, m: usize) -> Result<Self> {
        if d < 1 || m < 1 {
            return Err(Error::Domain(format!("grid needs d ≥ 1 and m ≥ 1, got d={d}, m={m}")));
        }
        let points = m
            .checked_pow(d as u32)
            .filter(|&p| p <= 1 << 26)
            .ok_or_else(|| Error::Domain(format!("grid {m}^{d} too large")))?;
        let mut planner = FftPlanner::new();
        Ok(FourierGrid {
            d,
            m,
            points,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn scratch(&self) -> GridScratch {
        let fft_len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        GridScratch {
            buf: vec![ZERO; self.points],
            line: vec![ZERO; self.m],
            fft: vec![ZERO; fft_len],
        }
    }

    /// Flat grid index holding the coefficient of wave vector `z`.
    pub fn slot(&self, z: &[i32]) -> usize {
        let m = self.m as i32;
        z.iter()
            .fold(0, |acc, &c| acc * self.m + c.rem_euclid(m) as usize)
    }

    /// `(slot(z), slot(-z))` for each half-space mode.
    pub fn mode_slots(&self, modes: &ModeSet) -> Vec<(usize, usize)> {
        modes
            .modes()
            .iter()
            .map(|z| (self.slot(z.components()), self.slot(z.negated().components())))
            .collect()
    }

    /// Physical coordinates of grid point `p`.
    pub fn coordinates(&self, mut p: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.d];
        for c in x.iter_mut().rev() {
            *c = (p % self.m) as f64 / self.m as f64;
            p /= self.m;
        }
        x
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>, line: &mut [Complex64], scratch: &mut [Complex64]) {
        let m = self.m;
        // last axis is contiguous
        fft.process_with_scratch(data, scratch);
        let mut stride = m;
        for _ in 1..self.d {
            let block = stride * m;
            for base in (0..self.points).step_by(block) {
                for inner in 0..stride {
                    let start = base + inner;
                    for (t, l) in line.iter_mut().enumerate() {
                        *l = data[start + t * stride];
                    }
                    fft.process_with_scratch(line, scratch);
                    for (t, l) in line.iter().enumerate() {
                        data[start + t * stride] = *l;
                    }
                }
            }
            stride = block;
        }
    }

    pub fn inverse_in_place(&self, data: &mut [Complex64], scratch: &mut GridScratch) {
        self.transform(data, &self.inverse, &mut scratch.line, &mut scratch.fft);
    }

    pub fn forward_in_place(&self, data: &mut [Complex64], scratch: &mut GridScratch) {
        self.transform(data, &self.forward, &mut scratch.line, &mut scratch.fft);
    }

    /// Evaluates real fields given by half-space coefficients on the grid,
    /// two at a time through one complex transform.
    pub fn synthesize_real(
        &self,
        slots: &[(usize, usize)],
        spectra: &[Vec<Complex64>],
        out: &mut [Vec<f64>],
        scratch: &mut GridScratch,
    ) {
        debug_assert_eq!(spectra.len(), out.len());
        let mut buf = std::mem::take(&mut scratch.buf);
        for (pair, dest) in spectra.chunks(2).zip(out.chunks_mut(2)) {
            buf.fill(ZERO);
            let a = &pair[0];
            for (k, &(plus, minus)) in slots.iter().enumerate() {
                buf[plus] += a[k];
                buf[minus] += a[k].conj();
            }
            if let Some(b) = pair.get(1) {
                for (k, &(plus, minus)) in slots.iter().enumerate() {
                    buf[plus] += I * b[k];
                    buf[minus] += I * b[k].conj();
                }
            }
            self.inverse_in_place(&mut buf, scratch);
            for (p, v) in buf.iter().enumerate() {
                dest[0][p] = v.re;
            }
            if dest.len() > 1 {
                for (p, v) in buf.iter().enumerate() {
                    dest[1][p] = v.im;
                }
            }
        }
        scratch.buf = buf;
    }

    /// Half-space Fourier coefficients of real grid fields, two per transform.
    pub fn analyze_real(
        &self,
        slots: &[(usize, usize)],
        grids: &[Vec<f64>],
        out: &mut [Vec<Complex64>],
        scratch: &mut GridScratch,
    ) {
        debug_assert_eq!(grids.len(), out.len());
        let norm = 1.0 / self.points as f64;
        let mut buf = std::mem::take(&mut scratch.buf);
        for (pair, dest) in grids.chunks(2).zip(out.chunks_mut(2)) {
            match pair.get(1) {
                Some(b) => {
                    for ((slot, &x), &y) in buf.iter_mut().zip(&pair[0]).zip(b) {
                        *slot = Complex64::new(x, y);
                    }
                }
                None => {
                    for (slot, &x) in buf.iter_mut().zip(&pair[0]) {
                        *slot = Complex64::new(x, 0.0);
                    }
                }
            }
            self.forward_in_place(&mut buf, scratch);
            for (k, &(plus, minus)) in slots.iter().enumerate() {
                let f = buf[plus] * norm;
                let g = buf[minus].conj() * norm;
                dest[0][k] = (f + g) * 0.5;
                if dest.len() > 1 {
                    dest[1][k] = (f - g) * Complex64::new(0.0, -0.5);
                }
            }
        }
        scratch.buf = buf;
    }
}

/// Real `d`-vector field sampled on the uniform grid, stored component by component.
#[derive(Debug, Clone, PartialEq)]
pub struct GridVectorField {
    d: usize,
    m: usize,
    values: Vec<f64>,
}

impl GridVectorField {
    pub fn new(d: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        let points = m.pow(d as u32);
        if values.len() != d * points {
            return Err(Error::Dimension(format!(
                "expected {} grid values, got {}",
                d * points,
                values.len()
            )));
        }
        Ok(GridVectorField { d, m, values })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn points(&self) -> usize {
        self.values.len() / self.d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let p = self.points();
        &self.values[c * p..(c + 1) * p]
    }

    pub fn at(&self, p: usize) -> Vec<f64> {
        (0..self.d).map(|c| self.component(c)[p]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Real `d×d` tensor field on the uniform grid; component `(i, j)` is block `i*d + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTensorField {
    d: usize,
    m: usize,
    values: Vec<f64>,
}

impl GridTensorField {
    pub(crate) fn from_components(d: usize, m: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), d * d * m.pow(d as u32));
        GridTensorField { d, m, values }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn points(&self) -> usize {
        self.values.len() / (self.d * self.d)
    }

    pub fn component(&self, i: usize, j: usize) -> &[f64] {
        let p = self.points();
        let c = i * self.d + j;
        &self.values[c * p..(c + 1) * p]
    }

    pub fn at(&self, p: usize) -> Vec<f64> {
        let d = self.d;
        (0..d * d).map(|c| self.component(c / d, c % d)[p]).collect()
    }

    pub fn trace_at(&self, p: usize) -> f64 {
        (0..self.d).map(|i| self.component(i, i)[p]).sum()
    }

    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.d {
            for j in i + 1..self.d {
                for (a, b) in self.component(i, j).iter().zip(self.component(j, i)) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }

    /// `∫ A : B` by the rectangle rule.
    pub fn contract_mean(&self, other: &GridTensorField) -> f64 {
        assert_eq!((self.d, self.m), (other.d, other.m));
        let sum: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        sum / self.points() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

fn check_resolution(m: usize, n: usize) -> Result<()> {
    let required = 2 * n + 1;
    if m < required {
        return Err(Error::Aliasing { m, n, required });
    }
    Ok(())
}

fn component_spectra(field: &SpectralField) -> Vec<Vec<Complex64>> {
    let d = field.d();
    (0..d)
        .map(|c| field.coeffs().iter().skip(c).step_by(d).copied().collect())
        .collect()
}

/// Samples `field` on the `m^d` grid; requires `m ≥ 2n+1`.
pub fn to_grid(field: &SpectralField, m: usize) -> Result<GridVectorField> {
    check_resolution(m, field.n())?;
    let d = field.d();
    let grid = FourierGrid::new(d, m)?;
    let slots = grid.mode_slots(field.mode_set());
    let spectra = component_spectra(field);
    let mut out = vec![vec![0.0; grid.points()]; d];
    grid.synthesize_real(&slots, &spectra, &mut out, &mut grid.scratch());
    GridVectorField::new(d, m, out.concat())
}

/// Full-cube Fourier coefficients of grid data up to order `n` (no constraint applied).
pub fn from_grid(field: &GridVectorField, n: usize) -> Result<ModalData> {
    check_resolution(field.m(), n)?;
    let d = field.d();
    let grid = FourierGrid::new(d, field.m())?;
    let mut scratch = grid.scratch();
    let mut data = ModalData::zero(d, n);
    let cube: Vec<Vec<i32>> = data.wave_vectors().collect();
    let norm = 1.0 / grid.points() as f64;
    let mut buf = vec![ZERO; grid.points()];
    for c in 0..d {
        for (b, &v) in buf.iter_mut().zip(field.component(c)) {
            *b = Complex64::new(v, 0.0);
        }
        grid.forward_in_place(&mut buf, &mut scratch);
        for z in &cube {
            data.slot_mut(z)[c] = buf[grid.slot(z)] * norm;
        }
    }
    Ok(data)
}

/// Velocity gradient `G_{ij} = ∂_i v_j` sampled on the `m^d` grid.
pub fn gradient_grid(field: &SpectralField, m: usize) -> Result<GridTensorField> {
    check_resolution(m, field.n())?;
    let d = field.d();
    let grid = FourierGrid::new(d, m)?;
    let slots = grid.mode_slots(field.mode_set());
    let mut spectra = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            spectra.push(
                field
                    .modes()
                    .iter()
                    .enumerate()
                    .map(|(k, z)| I * (TWO_PI * z.components()[i] as f64) * field.coeff(k)[j])
                    .collect(),
            );
        }
    }
    let mut out = vec![vec![0.0; grid.points()]; d * d];
    grid.synthesize_real(&slots, &spectra, &mut out, &mut grid.scratch());
    Ok(GridTensorField::from_components(d, m, out.concat()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_basis;
    use crate::testutil::{random_field, rng};

    #[test]
    fn zero_field_gives_zero_grid() {
        let f = SpectralField::zero(2, 3).unwrap();
        assert_eq!(to_grid(&f, 8).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn aliasing_rejected() {
        let f = SpectralField::zero(2, 3).unwrap();
        assert!(matches!(to_grid(&f, 6), Err(Error::Aliasing { required: 7, .. })));
        let g = to_grid(&f, 7).unwrap();
        assert!(from_grid(&g, 4).is_err());
    }

    #[test]
    fn single_mode_round_trip() {
        let basis = make_basis(2, 3).unwrap();
        let psi = basis.psi(17);
        let modal = from_grid(&to_grid(&psi, 5).unwrap(), 2).unwrap();
        let back = psi.to_modal();
        for z in back.wave_vectors() {
            for (a, b) in modal.get(&z).iter().zip(back.get(&z)) {
                assert!((a - b).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn random_order_four_round_trip_at_sixteen() {
        let mut r = rng(11);
        for _ in 0..5 {
            let v = random_field(2, 4, &mut r);
            let modal = from_grid(&to_grid(&v, 16).unwrap(), 4).unwrap();
            let want = v.to_modal();
            let err = modal
                .wave_vectors()
                .flat_map(|z| {
                    modal
                        .get(&z)
                        .iter()
                        .zip(want.get(&z))
                        .map(|(a, b)| (a - b).norm())
                        .collect::<Vec<_>>()
                })
                .fold(0.0, f64::max);
            assert!(err < 1e-12, "round-trip error {err}");
        }
    }

    #[test]
    fn odd_grid_and_three_dimensions() {
        let mut r = rng(2);
        let v = random_field(3, 2, &mut r);
        let modal = from_grid(&to_grid(&v, 7).unwrap(), 2).unwrap();
        assert!(modal.conjugate_symmetry_defect() < 1e-14);
        assert!(modal.divergence_defect() < 1e-13);
    }

    #[test]
    fn gradient_trace_vanishes() {
        let mut r = rng(4);
        let v = random_field(2, 3, &mut r);
        let g = gradient_grid(&v, 14).unwrap();
        for p in 0..g.points() {
            assert!(g.trace_at(p).abs() < 1e-12);
        }
    }

    #[test]
    fn analyze_inverts_synthesize() {
        let mut r = rng(7);
        let v = random_field(2, 2, &mut r);
        let grid = FourierGrid::new(2, 10).unwrap();
        let slots = grid.mode_slots(v.mode_set());
        let spectra = component_spectra(&v);
        let mut scratch = grid.scratch();
        let mut real = vec![vec![0.0; grid.points()]; 2];
        grid.synthesize_real(&slots, &spectra, &mut real, &mut scratch);
        let mut back = vec![vec![ZERO; slots.len()]; 2];
        grid.analyze_real(&slots, &real, &mut back, &mut scratch);
        for (a, b) in spectra.iter().flatten().zip(back.iter().flatten()) {
            assert!((a - b).norm() < 1e-15);
        }
    }
}
