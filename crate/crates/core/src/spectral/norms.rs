use num_complex::Complex64;

use super::grid::GridScratch;
use super::{FourierGrid, SpectralField, FOUR_PI_SQ, TWO_PI};
use crate::error::{Error, Result};

/// Rectangle-rule resolution used for `L_p` integrals of order-`n` fields.
pub fn lp_resolution(n: usize) -> usize {
    (2 * (2 * n + 1)).max(32)
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("L_p exponent must lie in [1, ∞), got {p}")));
    }
    Ok(())
}

/// Reusable `L_p` quadrature on the `lp_resolution(n)` grid.
#[derive(Debug, Clone)]
pub struct LpQuadrature {
    grid: FourierGrid,
    scratch: GridScratch,
    n: usize,
}

impl LpQuadrature {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        let grid = FourierGrid::new(d, lp_resolution(n))?;
        let scratch = grid.scratch();
        Ok(LpQuadrature { grid, scratch, n })
    }

    fn check_field(&self, field: &SpectralField) -> Result<()> {
        if field.d() != self.grid.d() || field.n() > self.n {
            return Err(Error::Dimension(format!(
                "quadrature built for d={}, n≤{}; field has d={}, n={}",
                self.grid.d(),
                self.n,
                field.d(),
                field.n()
            )));
        }
        Ok(())
    }

    /// `∫ |F(x)|^p dx` where `F` has the given component spectra and `|·|`
    /// is the Euclidean (Frobenius for tensors) norm at each point.
    fn integrate_pow(&mut self, field: &SpectralField, spectra: &[Vec<Complex64>], p: f64) -> f64 {
        let slots = self.grid.mode_slots(field.mode_set());
        let points = self.grid.points();
        let mut values = vec![vec![0.0; points]; spectra.len()];
        self.grid
            .synthesize_real(&slots, spectra, &mut values, &mut self.scratch);
        let mut acc = 0.0;
        for x in 0..points {
            let sq: f64 = values.iter().map(|c| c[x] * c[x]).sum();
            acc += if p == 2.0 { sq } else { sq.powf(0.5 * p) };
        }
        acc / points as f64
    }

    /// `‖v‖_{p,α}^p = ∫ |(1−Δ)^{α/2} v|^p`
    pub fn sobolev_pow(&mut self, field: &SpectralField, p: f64, alpha: f64) -> Result<f64> {
        check_exponent(p)?;
        self.check_field(field)?;
        let d = field.d();
        let spectra: Vec<Vec<Complex64>> = (0..d)
            .map(|c| {
                field
                    .modes()
                    .iter()
                    .enumerate()
                    .map(|(k, z)| field.coeff(k)[c] * z.bessel_symbol().powf(0.5 * alpha))
                    .collect()
            })
            .collect();
        Ok(self.integrate_pow(field, &spectra, p))
    }

    pub fn sobolev(&mut self, field: &SpectralField, p: f64, alpha: f64) -> Result<f64> {
        Ok(self.sobolev_pow(field, p, alpha)?.powf(1.0 / p))
    }

    /// `‖∇v‖_p` with the Frobenius norm of the gradient at each point.
    pub fn gradient(&mut self, field: &SpectralField, p: f64) -> Result<f64> {
        check_exponent(p)?;
        self.check_field(field)?;
        let d = field.d();
        let mut spectra = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                spectra.push(
                    field
                        .modes()
                        .iter()
                        .enumerate()
                        .map(|(k, z)| {
                            Complex64::new(0.0, TWO_PI * z.components()[i] as f64) * field.coeff(k)[j]
                        })
                        .collect(),
                );
            }
        }
        Ok(self.integrate_pow(field, &spectra, p).powf(1.0 / p))
    }

    /// `‖Δv‖_p`
    pub fn laplacian(&mut self, field: &SpectralField, p: f64) -> Result<f64> {
        check_exponent(p)?;
        self.check_field(field)?;
        let lap = field.apply_multiplier(|z| -FOUR_PI_SQ * z.norm_sq());
        let d = field.d();
        let spectra: Vec<Vec<Complex64>> = (0..d)
            .map(|c| lap.coeffs().iter().skip(c).step_by(d).copied().collect())
            .collect();
        Ok(self.integrate_pow(field, &spectra, p).powf(1.0 / p))
    }
}

/// `‖v‖_{p,α} = ‖(1−Δ)^{α/2} v‖_{L_p}` via the Bessel-potential multiplier
/// `(1+4π²|z|²)^{α/2}` and rectangle-rule quadrature.
pub fn sobolev_norm(field: &SpectralField, p: f64, alpha: f64) -> Result<f64> {
    check_exponent(p)?;
    LpQuadrature::new(field.d(), field.n())?.sobolev(field, p, alpha)
}

/// `‖∇v‖_p`
pub fn gradient_lp_norm(field: &SpectralField, p: f64) -> Result<f64> {
    check_exponent(p)?;
    LpQuadrature::new(field.d(), field.n())?.gradient(field, p)
}
