use std::sync::Arc;

use num_complex::Complex64;

use super::{ModeSet, WaveVector};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Divergence-free, mean-zero, real vector field on `T^d` of finite order.
///
/// Only the canonical half-space coefficients are stored; reality
/// (`v̂_{-z} = conj v̂_z`) is therefore structural.
#[derive(Debug, Clone)]
pub struct SpectralField {
    modes: Arc<ModeSet>,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zero(d: usize, n: usize) -> Result<Self> {
        let modes = ModeSet::new(d, n)?;
        let coeffs = vec![ZERO; modes.len() * d];
        Ok(SpectralField { modes, coeffs })
    }

    pub(crate) fn from_parts(modes: Arc<ModeSet>, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), modes.len() * modes.d());
        let field = SpectralField { modes, coeffs };
        debug_assert!(
            field.divergence_defect() <= 1e-13 * (1.0 + field.max_abs()),
            "divergence defect {}",
            field.divergence_defect()
        );
        field
    }

    pub fn d(&self) -> usize {
        self.modes.d()
    }

    pub fn n(&self) -> usize {
        self.modes.n()
    }

    pub fn mode_set(&self) -> &Arc<ModeSet> {
        &self.modes
    }

    pub fn modes(&self) -> &[WaveVector] {
        self.modes.modes()
    }

    /// Half-space coefficients, `d` consecutive entries per mode.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> &[Complex64] {
        let d = self.d();
        &self.coeffs[k * d..(k + 1) * d]
    }

    /// `v̂_z` for any `z`, including non-canonical and out-of-range ones.
    pub fn get(&self, z: &[i32]) -> Vec<Complex64> {
        match self.modes.locate(z) {
            Some((k, false)) => self.coeff(k).to_vec(),
            Some((k, true)) => self.coeff(k).iter().map(|c| c.conj()).collect(),
            None => vec![ZERO; self.d()],
        }
    }

    /// Same field viewed at another truncation order (zero padded or truncated).
    pub fn with_order(&self, n: usize) -> SpectralField {
        if n == self.n() {
            return self.clone();
        }
        let modes = ModeSet::new(self.d(), n).expect("dimension already validated");
        let d = self.d();
        let mut coeffs = vec![ZERO; modes.len() * d];
        for (k, z) in modes.modes().iter().enumerate() {
            if let Some((src, false)) = self.modes.locate(z.components()) {
                coeffs[k * d..(k + 1) * d].copy_from_slice(self.coeff(src));
            }
        }
        SpectralField { modes, coeffs }
    }

    pub fn scaled(&self, factor: f64) -> SpectralField {
        SpectralField {
            modes: self.modes.clone(),
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// `self + factor * other`; orders are merged to the larger one.
    pub fn add_scaled(&self, other: &SpectralField, factor: f64) -> Result<SpectralField> {
        if self.d() != other.d() {
            return Err(Error::Dimension(format!("d = {} vs {}", self.d(), other.d())));
        }
        let n = self.n().max(other.n());
        let mut out = self.with_order(n);
        let rhs = other.with_order(n);
        out.coeffs
            .iter_mut()
            .zip(&rhs.coeffs)
            .for_each(|(a, b)| *a += b * factor);
        Ok(out)
    }

    /// Applies a real Fourier multiplier `m(z)` mode by mode.
    pub fn apply_multiplier(&self, symbol: impl Fn(&WaveVector) -> f64) -> SpectralField {
        let d = self.d();
        let mut coeffs = self.coeffs.clone();
        for (k, z) in self.modes().iter().enumerate() {
            let s = symbol(z);
            coeffs[k * d..(k + 1) * d].iter_mut().for_each(|c| *c *= s);
        }
        SpectralField {
            modes: self.modes.clone(),
            coeffs,
        }
    }

    /// `‖v‖₂²` by Parseval (each stored mode counts twice).
    pub fn norm_l2_sq(&self) -> f64 {
        2.0 * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// `max_z |z · v̂_z|`
    pub fn divergence_defect(&self) -> f64 {
        self.modes()
            .iter()
            .enumerate()
            .map(|(k, z)| {
                self.coeff(k)
                    .iter()
                    .zip(z.components())
                    .map(|(c, &zc)| c * zc as f64)
                    .sum::<Complex64>()
                    .norm()
            })
            .fold(0.0, f64::max)
    }

    fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Expands to the full `[-n,n]^d` coefficient cube.
    pub fn to_modal(&self) -> ModalData {
        let d = self.d();
        let n = self.n();
        let mut data = ModalData::zero(d, n);
        for (k, z) in self.modes().iter().enumerate() {
            let v = self.coeff(k);
            data.slot_mut(z.components()).copy_from_slice(v);
            let conj: Vec<Complex64> = v.iter().map(|c| c.conj()).collect();
            data.slot_mut(z.negated().components()).copy_from_slice(&conj);
        }
        data
    }
}

/// Unconstrained complex `d`-vectors on the full cube `[-n,n]^d`, including
/// `z = 0` and both members of each `±z` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalData {
    d: usize,
    n: usize,
    coeffs: Vec<Complex64>,
}

impl ModalData {
    pub fn zero(d: usize, n: usize) -> Self {
        let side = 2 * n + 1;
        ModalData {
            d,
            n,
            coeffs: vec![ZERO; side.pow(d as u32) * d],
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn offset(&self, z: &[i32]) -> usize {
        let side = 2 * self.n + 1;
        let cube = z
            .iter()
            .fold(0, |acc, &c| acc * side + (c + self.n as i32) as usize);
        cube * self.d
    }

    fn in_range(&self, z: &[i32]) -> bool {
        z.len() == self.d && z.iter().all(|c| c.unsigned_abs() as usize <= self.n)
    }

    pub fn get(&self, z: &[i32]) -> &[Complex64] {
        assert!(self.in_range(z), "wave vector {z:?} outside cube of order {}", self.n);
        let o = self.offset(z);
        &self.coeffs[o..o + self.d]
    }

    pub fn slot_mut(&mut self, z: &[i32]) -> &mut [Complex64] {
        assert!(self.in_range(z), "wave vector {z:?} outside cube of order {}", self.n);
        let o = self.offset(z);
        &mut self.coeffs[o..o + self.d]
    }

    /// Every wave vector of the cube in lexicographic order.
    pub fn wave_vectors(&self) -> impl Iterator<Item = Vec<i32>> + '_ {
        let side = 2 * self.n + 1;
        let d = self.d;
        let n = self.n as i32;
        (0..side.pow(d as u32)).map(move |mut off| {
            let mut z = vec![0i32; d];
            for c in z.iter_mut().rev() {
                *c = (off % side) as i32 - n;
                off /= side;
            }
            z
        })
    }

    /// `max_z |v̂_{-z} − conj v̂_z|`
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        self.wave_vectors()
            .map(|z| {
                let minus: Vec<i32> = z.iter().map(|c| -c).collect();
                self.get(&z)
                    .iter()
                    .zip(self.get(&minus))
                    .map(|(a, b)| (a.conj() - b).norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// `max_z |z · v̂_z|`
    pub fn divergence_defect(&self) -> f64 {
        self.wave_vectors()
            .map(|z| {
                self.get(&z)
                    .iter()
                    .zip(&z)
                    .map(|(c, &zc)| c * zc as f64)
                    .sum::<Complex64>()
                    .norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Leray projection onto divergence-free, mean-zero, real fields.
///
/// The input is symmetrized first, `z = 0` is dropped, and each mode becomes
/// `v̂_z − (z·v̂_z) z/|z|²`.
pub fn project_div_free(raw: &ModalData) -> Result<SpectralField> {
    let d = raw.d();
    let modes = ModeSet::new(d, raw.n())?;
    let mut coeffs = vec![ZERO; modes.len() * d];
    for (k, z) in modes.modes().iter().enumerate() {
        let zc = z.components();
        let plus = raw.get(zc);
        let minus = raw.get(z.negated().components());
        let slot = &mut coeffs[k * d..(k + 1) * d];
        for i in 0..d {
            slot[i] = (plus[i] + minus[i].conj()) * 0.5;
        }
        let along: Complex64 = slot.iter().zip(zc).map(|(c, &a)| c * a as f64).sum();
        let scale = along / z.norm_sq();
        for (s, &a) in slot.iter_mut().zip(zc) {
            *s -= scale * a as f64;
        }
    }
    Ok(SpectralField::from_parts(modes, coeffs))
}

/// Orthogonal projection onto modes with `z ∈ [-n,n]^d`.
pub fn project_pn(field: &SpectralField, n: usize) -> SpectralField {
    if n >= field.n() {
        field.clone()
    } else {
        field.with_order(n)
    }
}

/// `⟨u, v⟩` in `L₂(T^d → R^d)`, evaluated as a Parseval sum.
pub fn inner_product(u: &SpectralField, v: &SpectralField) -> Result<f64> {
    if u.d() != v.d() {
        return Err(Error::Dimension(format!("d = {} vs {}", u.d(), v.d())));
    }
    let (small, large) = if u.n() <= v.n() { (u, v) } else { (v, u) };
    let mut acc = 0.0;
    for (k, z) in small.modes().iter().enumerate() {
        if let Some((other, false)) = large.mode_set().locate(z.components()) {
            acc += small
                .coeff(k)
                .iter()
                .zip(large.coeff(other))
                .map(|(a, b)| (a * b.conj()).re)
                .sum::<f64>();
        }
    }
    Ok(2.0 * acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_basis;
    use crate::testutil::{random_field, rng};

    #[test]
    fn leray_keeps_divergence_free_input() {
        let mut r = rng(3);
        let v = random_field(3, 2, &mut r);
        let p = project_div_free(&v.to_modal()).unwrap();
        for (a, b) in v.coeffs().iter().zip(p.coeffs()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn leray_kills_gradients() {
        let mut raw = ModalData::zero(2, 2);
        let z = [1, 2];
        let c = Complex64::new(0.3, -0.7);
        raw.slot_mut(&z).copy_from_slice(&[c * 1.0, c * 2.0]);
        raw.slot_mut(&[-1, -2]).copy_from_slice(&[c.conj(), c.conj() * 2.0]);
        raw.slot_mut(&[0, 0]).copy_from_slice(&[c, c]);
        let p = project_div_free(&raw).unwrap();
        assert!(p.coeffs().iter().all(|c| c.norm() < 1e-15));
    }

    #[test]
    fn leray_on_asymmetric_raw_data() {
        let mut raw = ModalData::zero(2, 1);
        raw.slot_mut(&[1, 0]).copy_from_slice(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0)]);
        let p = project_div_free(&raw).unwrap();
        // symmetrized half of the (0, 2i) component survives, the x-part is a gradient
        let v = p.get(&[1, 0]);
        assert!(v[0].norm() < 1e-15);
        assert!((v[1] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert!(p.to_modal().conjugate_symmetry_defect() < 1e-15);
    }

    #[test]
    fn pn_truncates_and_is_idempotent() {
        let mut r = rng(5);
        let v = random_field(2, 3, &mut r);
        assert_eq!(project_pn(&v, 4).coeffs(), v.coeffs());
        let p1 = project_pn(&v, 1);
        assert_eq!(p1.n(), 1);
        assert_eq!(project_pn(&p1, 1).coeffs(), p1.coeffs());
        assert!(p1.norm_l2_sq() <= v.norm_l2_sq());
        let p0 = project_pn(&v, 0);
        assert_eq!(p0.norm_l2_sq(), 0.0);
    }

    #[test]
    fn inner_product_basics() {
        let basis = make_basis(2, 2).unwrap();
        let psi = basis.psi(3);
        assert!((inner_product(&psi, &psi).unwrap() - 1.0).abs() < 1e-15);
        let mut r = rng(9);
        let u = random_field(2, 2, &mut r);
        let v = random_field(2, 3, &mut r);
        let uv = inner_product(&u, &v).unwrap();
        let vu = inner_product(&v, &u).unwrap();
        assert!((uv - vu).abs() < 1e-14);
        let w = random_field(3, 2, &mut r);
        assert!(inner_product(&u, &w).is_err());
    }

    #[test]
    fn get_handles_partners_and_out_of_range() {
        let mut r = rng(1);
        let v = random_field(2, 2, &mut r);
        let a = v.get(&[1, -2]);
        let b = v.get(&[-1, 2]);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.conj(), *y);
        }
        assert!(v.get(&[5, 0]).iter().all(|c| c.norm() == 0.0));
    }
}
