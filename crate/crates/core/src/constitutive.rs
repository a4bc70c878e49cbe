//! Rate of strain, the regularized power-law stress, convection, and the
//! weak-form pairings that make up the Galerkin drift.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    dealiased_resolution, gradient_grid, project_div_free, to_grid, Basis, BasisIndex, FourierGrid,
    GridScratch, GridTensorField, GridVectorField, ModalData, SpectralField, FOUR_PI_SQ, TWO_PI,
};

/// Power-law exponent `p > 1` and kinematic viscosity `ν > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    pub p: f64,
    pub nu: f64,
}

impl FluidParams {
    pub fn new(p: f64, nu: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::config("p", format!("power-law exponent must satisfy p > 1, got {p}")));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::config("nu", format!("viscosity must be positive, got {nu}")));
        }
        Ok(FluidParams { p, nu })
    }

    /// Scalar factor `2ν(1+|e|²)^{(p−2)/2}` multiplying `e` in the stress law.
    #[inline]
    pub fn stress_factor(&self, strain_sq: f64) -> f64 {
        if self.p == 2.0 {
            2.0 * self.nu
        } else {
            2.0 * self.nu * (1.0 + strain_sq).powf(0.5 * (self.p - 2.0))
        }
    }
}

/// Spectral rate of strain: `ê_{ij}(z) = πi (z_i v̂_j + z_j v̂_i)`, `d×d` entries per mode.
pub fn strain_spectrum(v: &SpectralField) -> Vec<Complex64> {
    let d = v.d();
    let mut out = Vec::with_capacity(v.modes().len() * d * d);
    for (k, z) in v.modes().iter().enumerate() {
        let c = v.coeff(k);
        let zc = z.components();
        for i in 0..d {
            for j in 0..d {
                let w = c[j] * zc[i] as f64 + c[i] * zc[j] as f64;
                out.push(Complex64::new(0.0, 0.5 * TWO_PI) * w);
            }
        }
    }
    out
}

fn symmetrize(grad: &GridTensorField) -> GridTensorField {
    let d = grad.d();
    let p = grad.points();
    let mut values = vec![0.0; d * d * p];
    for i in 0..d {
        for j in 0..d {
            let dst = &mut values[(i * d + j) * p..(i * d + j + 1) * p];
            for ((o, a), b) in dst.iter_mut().zip(grad.component(i, j)).zip(grad.component(j, i)) {
                *o = 0.5 * (a + b);
            }
        }
    }
    GridTensorField::from_components(d, grad.m(), values)
}

/// `e(v)_{ij} = (∂_i v_j + ∂_j v_i)/2` sampled on the `m^d` grid.
pub fn rate_of_strain(v: &SpectralField, m: usize) -> Result<GridTensorField> {
    Ok(symmetrize(&gradient_grid(v, m)?))
}

fn check_oversampled(m: usize, n: usize) -> Result<()> {
    let required = dealiased_resolution(n);
    if m < required {
        return Err(Error::Aliasing { m, n, required });
    }
    Ok(())
}

/// `τ(v) = 2ν(1+|e(v)|²)^{(p−2)/2} e(v)` pointwise, `|e|²` the squared Frobenius norm.
pub fn stress(v: &SpectralField, params: &FluidParams, m: usize) -> Result<GridTensorField> {
    check_oversampled(m, v.n())?;
    let e = rate_of_strain(v, m)?;
    Ok(stress_from_strain(&e, params))
}

fn stress_from_strain(e: &GridTensorField, params: &FluidParams) -> GridTensorField {
    let d = e.d();
    let points = e.points();
    let mut values = vec![0.0; d * d * points];
    for x in 0..points {
        let at = e.at(x);
        let sq: f64 = at.iter().map(|a| a * a).sum();
        let f = params.stress_factor(sq);
        for (c, a) in at.iter().enumerate() {
            values[c * points + x] = f * a;
        }
    }
    GridTensorField::from_components(d, e.m(), values)
}

/// `⟨e(φ), τ(v)⟩`, i.e. minus the weak pairing `⟨φ, div τ(v)⟩`.
pub fn pairing_stress(phi: &SpectralField, v: &SpectralField, params: &FluidParams) -> Result<f64> {
    if phi.d() != v.d() {
        return Err(Error::Dimension(format!("d = {} vs {}", phi.d(), v.d())));
    }
    let m = dealiased_resolution(phi.n().max(v.n()));
    let e_phi = rate_of_strain(phi, m)?;
    let tau = stress(v, params, m)?;
    Ok(e_phi.contract_mean(&tau))
}

/// Grid values of `(v·∇)w = Σ_i v_i ∂_i w`, formed pointwise on an
/// oversampled grid.
pub fn convection(v: &SpectralField, w: &SpectralField, m: usize) -> Result<GridVectorField> {
    if v.d() != w.d() {
        return Err(Error::Dimension(format!("d = {} vs {}", v.d(), w.d())));
    }
    check_oversampled(m, v.n().max(w.n()))?;
    let d = v.d();
    let vg = to_grid(v, m)?;
    let grad = gradient_grid(w, m)?;
    let points = vg.points();
    let mut values = vec![0.0; d * points];
    for j in 0..d {
        let out = &mut values[j * points..(j + 1) * points];
        for i in 0..d {
            for ((o, a), g) in out.iter_mut().zip(vg.component(i)).zip(grad.component(i, j)) {
                *o += a * g;
            }
        }
    }
    GridVectorField::new(d, m, values)
}

/// `⟨w, (v·∇)φ⟩` by alias-free quadrature.
pub fn pairing_convection(w: &SpectralField, v: &SpectralField, phi: &SpectralField) -> Result<f64> {
    if w.d() != v.d() || v.d() != phi.d() {
        return Err(Error::Dimension("all three fields must share d".into()));
    }
    let m = dealiased_resolution(w.n().max(v.n()).max(phi.n()));
    let conv = convection(v, phi, m)?;
    let wg = to_grid(w, m)?;
    let sum: f64 = conv.values().iter().zip(wg.values()).map(|(a, b)| a * b).sum();
    Ok(sum / conv.points() as f64)
}

impl BasisIndex {
    /// `ψ_{z,j}` as a spectral field of order `n` (at least the order of `z`).
    pub fn to_field(&self, n: usize) -> Result<SpectralField> {
        let d = self.z.dim();
        let n = n.max(self.z.order());
        let mut raw = ModalData::zero(d, n);
        let w = if self.is_cosine() {
            Complex64::new(1.0 / SQRT_2, 0.0)
        } else {
            Complex64::new(0.0, -1.0 / SQRT_2)
        };
        let plus: Vec<Complex64> = self.e_vec.iter().map(|e| w * e).collect();
        let minus: Vec<Complex64> = plus.iter().map(|c| c.conj()).collect();
        raw.slot_mut(self.z.components()).copy_from_slice(&plus);
        raw.slot_mut(self.z.negated().components()).copy_from_slice(&minus);
        project_div_free(&raw)
    }
}

/// One coordinate of the projected drift,
/// `b^{z,j}(X) = ⟨X, (X·∇)ψ_{z,j}⟩ − ⟨τ(X), e(ψ_{z,j})⟩`, from the pairings.
pub fn drift_coord(x: &SpectralField, idx: &BasisIndex, params: &FluidParams) -> Result<f64> {
    let psi = idx.to_field(x.n())?;
    Ok(pairing_convection(x, x, &psi)? - pairing_stress(&psi, x, params)?)
}

/// `P_n b(X)` as a coordinate vector over `make_basis(n, d)`.
pub fn drift(x: &SpectralField, n: usize, params: &FluidParams) -> Result<Vec<f64>> {
    let basis = Arc::new(crate::spectral::make_basis(n, x.d())?);
    let coords = basis.coordinates(x)?;
    let engine = DriftEngine::new(basis, *params)?;
    let mut ws = engine.workspace();
    let mut out = vec![0.0; coords.len()];
    engine.evaluate(&mut ws, &coords, &mut out);
    Ok(out)
}

/// Shared-pass evaluator of the Galerkin drift on the dealiased grid.
///
/// One evaluation synthesizes `X` and `∇X`, applies the stress law and the
/// convective product pointwise, transforms `τ` and `(X·∇)X` back, and
/// projects `−(X·∇)X + div τ` onto the basis.
#[derive(Debug, Clone)]
pub struct DriftEngine {
    basis: Arc<Basis>,
    params: FluidParams,
    grid: FourierGrid,
    slots: Vec<(usize, usize)>,
    // 2π z for each mode, d entries per mode
    wave: Vec<f64>,
    stokes: Vec<f64>,
}

/// Per-caller buffers for [`DriftEngine::evaluate`]; never shared between
/// simultaneous evaluations.
#[derive(Debug, Clone)]
pub struct DriftWorkspace {
    scratch: GridScratch,
    modal: Vec<Complex64>,
    spectra_in: Vec<Vec<Complex64>>,
    real_in: Vec<Vec<f64>>,
    real_out: Vec<Vec<f64>>,
    spectra_out: Vec<Vec<Complex64>>,
}

impl DriftEngine {
    pub fn new(basis: Arc<Basis>, params: FluidParams) -> Result<Self> {
        let d = basis.d();
        if d > 6 {
            return Err(Error::config("d", format!("drift evaluation supports d ≤ 6, got {d}")));
        }
        let grid = FourierGrid::new(d, dealiased_resolution(basis.n()))?;
        let slots = grid.mode_slots(basis.mode_set());
        let wave = basis
            .mode_set()
            .modes()
            .iter()
            .flat_map(|z| z.components().iter().map(|&c| TWO_PI * c as f64).collect::<Vec<_>>())
            .collect();
        let stokes = basis
            .indices()
            .iter()
            .map(|b| params.nu * FOUR_PI_SQ * b.z.norm_sq())
            .collect();
        Ok(DriftEngine {
            basis,
            params,
            grid,
            slots,
            wave,
            stokes,
        })
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn params(&self) -> &FluidParams {
        &self.params
    }

    pub fn grid_resolution(&self) -> usize {
        self.grid.m()
    }

    /// `ν 4π²|z|²` per coordinate: minus the Newtonian (`p = 2`) part of the drift.
    pub fn stokes_rates(&self) -> &[f64] {
        &self.stokes
    }

    pub fn workspace(&self) -> DriftWorkspace {
        let d = self.basis.d();
        let modes = self.slots.len();
        let points = self.grid.points();
        let n_in = d + d * d;
        let n_out = d * (d + 1) / 2 + d;
        DriftWorkspace {
            scratch: self.grid.scratch(),
            modal: vec![Complex64::new(0.0, 0.0); modes * d],
            spectra_in: vec![vec![Complex64::new(0.0, 0.0); modes]; n_in],
            real_in: vec![vec![0.0; points]; n_in],
            real_out: vec![vec![0.0; points]; n_out],
            spectra_out: vec![vec![Complex64::new(0.0, 0.0); modes]; n_out],
        }
    }

    /// Writes `P_n b(X)` into `out` and returns `⟨e(X), τ(X)⟩` from the same pass.
    pub fn evaluate(&self, ws: &mut DriftWorkspace, coords: &[f64], out: &mut [f64]) -> f64 {
        let d = self.basis.d();
        let modes = self.slots.len();
        self.basis.modal_from_coords(coords, &mut ws.modal);

        // spectra: X_i, then ∂_i X_j at i*d + j
        for k in 0..modes {
            let c = &ws.modal[k * d..(k + 1) * d];
            let z = &self.wave[k * d..(k + 1) * d];
            for j in 0..d {
                ws.spectra_in[j][k] = c[j];
            }
            for i in 0..d {
                for j in 0..d {
                    ws.spectra_in[d + i * d + j][k] = Complex64::new(-c[j].im * z[i], c[j].re * z[i]);
                }
            }
        }
        self.grid
            .synthesize_real(&self.slots, &ws.spectra_in, &mut ws.real_in, &mut ws.scratch);

        let points = self.grid.points();
        let n_tau = d * (d + 1) / 2;
        let mut dissipation = 0.0;
        let mut e = [0.0f64; 36];
        let mut vel = [0.0f64; 6];
        for x in 0..points {
            for i in 0..d {
                vel[i] = ws.real_in[i][x];
            }
            let mut sq = 0.0;
            for i in 0..d {
                for j in 0..d {
                    let s = 0.5 * (ws.real_in[d + i * d + j][x] + ws.real_in[d + j * d + i][x]);
                    e[i * d + j] = s;
                    sq += s * s;
                }
            }
            let f = self.params.stress_factor(sq);
            dissipation += f * sq;
            let mut t = 0;
            for i in 0..d {
                for j in i..d {
                    ws.real_out[t][x] = f * e[i * d + j];
                    t += 1;
                }
            }
            for j in 0..d {
                let mut acc = 0.0;
                for i in 0..d {
                    acc += vel[i] * ws.real_in[d + i * d + j][x];
                }
                ws.real_out[n_tau + j][x] = acc;
            }
        }
        dissipation /= points as f64;

        self.grid
            .analyze_real(&self.slots, &ws.real_out, &mut ws.spectra_out, &mut ws.scratch);

        // Ĝ_j = −(X·∇)X^_j + Σ_i 2πi z_i τ̂_ij
        for k in 0..modes {
            let z = &self.wave[k * d..(k + 1) * d];
            for j in 0..d {
                let mut g = -ws.spectra_out[n_tau + j][k];
                for i in 0..d {
                    let (a, b) = if i <= j { (i, j) } else { (j, i) };
                    let t = a * d - a * (a + 1) / 2 + b;
                    let tau = ws.spectra_out[t][k];
                    g += Complex64::new(-tau.im * z[i], tau.re * z[i]);
                }
                ws.modal[k * d + j] = g;
            }
        }
        self.basis.coords_from_modal(&ws.modal, out);
        dissipation
    }
}
