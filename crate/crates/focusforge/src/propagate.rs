//! Band-limited angular-spectrum propagation.
//!
//! A sampled field is decomposed into plane waves by FFT; each propagating
//! component advances by `exp(i 2 pi dz sqrt(1/lambda^2 - nu_x^2 - nu_y^2))`,
//! evanescent components are dropped, and components beyond the Matsushima
//! band limit are windowed out to suppress wrap-around aliasing of the
//! sampled transfer function. The band limit is evaluated at the plane's
//! total distance from the z = 0 source plane, which makes propagation obey
//! the group law exactly: hopping to z1 and then to z1 + z2 applies the same
//! windows as hopping there directly.

use crate::field::ComplexField;
use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::TAU;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PropagationError {
    #[error("back-propagation not supported: dz = {0} um")]
    BackPropagation(f64),
}

/// FFT sample frequencies for n samples at pitch dx (cycles per um).
fn fft_freqs(n: usize, dx: f64) -> Vec<f64> {
    let df = 1.0 / (n as f64 * dx);
    (0..n)
        .map(|i| {
            if i <= (n - 1) / 2 {
                i as f64 * df
            } else {
                (i as f64 - n as f64) * df
            }
        })
        .collect()
}

fn fft_rows(data: &mut Array2<Complex64>, fft: &Arc<dyn Fft<f64>>) {
    data.axis_iter_mut(Axis(0))
        .into_par_iter()
        .for_each_init(
            || vec![Complex64::default(); fft.get_inplace_scratch_len()],
            |scratch, mut row| {
                fft.process_with_scratch(row.as_slice_mut().unwrap(), scratch);
            },
        );
}

fn transpose(data: Array2<Complex64>) -> Array2<Complex64> {
    let flipped = data.reversed_axes();
    flipped.as_standard_layout().to_owned()
}

/// Forward spectrum of a field, reusable across several target planes.
pub struct Spectrum {
    data: Array2<Complex64>,
    nu_x: Vec<f64>,
    nu_y: Vec<f64>,
    dx_um: f64,
    wavelength_um: f64,
    z_um: f64,
}

impl Spectrum {
    pub fn analyze(field: &ComplexField) -> Self {
        if field.dx_um() > field.wavelength_um() / 2.0 {
            log::warn!(
                "field sampled at dx = {} um, coarser than lambda/2 = {} um; propagating orders may alias",
                field.dx_um(),
                field.wavelength_um() / 2.0
            );
        }
        let mut planner = FftPlanner::new();
        let (ny, nx) = (field.ny(), field.nx());
        let fft_x = planner.plan_fft_forward(nx);
        let fft_y = planner.plan_fft_forward(ny);

        let mut data = field.samples().clone();
        fft_rows(&mut data, &fft_x);
        let mut data = transpose(data);
        fft_rows(&mut data, &fft_y);
        let data = transpose(data);

        Self {
            data,
            nu_x: fft_freqs(nx, field.dx_um()),
            nu_y: fft_freqs(ny, field.dx_um()),
            dx_um: field.dx_um(),
            wavelength_um: field.wavelength_um(),
            z_um: field.z_um(),
        }
    }

    /// Synthesize the field at absolute plane `z_um >=` the source plane.
    pub fn field_at(&self, z_um: f64) -> Result<ComplexField, PropagationError> {
        let dz = z_um - self.z_um;
        if dz < 0.0 {
            return Err(PropagationError::BackPropagation(dz));
        }
        let lam = self.wavelength_um;
        let inv_lam_sq = 1.0 / (lam * lam);
        let (ny, nx) = self.data.dim();
        // Matsushima band limit at the total offset from the source plane
        let limit = |n: usize| {
            let dnu = 1.0 / (n as f64 * self.dx_um);
            1.0 / (lam * ((2.0 * dnu * z_um).powi(2) + 1.0).sqrt())
        };
        let (lim_x, lim_y) = (limit(nx), limit(ny));

        let mut out = self.data.clone();
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(iy, mut row)| {
                let nu_y = self.nu_y[iy];
                for (ix, v) in row.iter_mut().enumerate() {
                    let nu_x = self.nu_x[ix];
                    let nu_sq = nu_x * nu_x + nu_y * nu_y;
                    if nu_sq > inv_lam_sq || nu_x.abs() > lim_x || nu_y.abs() > lim_y {
                        *v = Complex64::default();
                    } else {
                        let kz = TAU * (inv_lam_sq - nu_sq).sqrt();
                        *v *= Complex64::from_polar(1.0, kz * dz);
                    }
                }
            });

        let mut planner = FftPlanner::new();
        let ifft_x = planner.plan_fft_inverse(nx);
        let ifft_y = planner.plan_fft_inverse(ny);
        fft_rows(&mut out, &ifft_x);
        let mut out = transpose(out);
        fft_rows(&mut out, &ifft_y);
        let mut out = transpose(out);

        let scale = 1.0 / (nx * ny) as f64;
        out.par_mapv_inplace(|v| v * scale);
        Ok(ComplexField::from_parts(out, self.dx_um, lam, z_um))
    }
}

/// Propagate a field forward by `dz_um`.
pub fn propagate(field: &ComplexField, dz_um: f64) -> Result<ComplexField, PropagationError> {
    if dz_um < 0.0 {
        return Err(PropagationError::BackPropagation(dz_um));
    }
    Spectrum::analyze(field).field_at(field.z_um() + dz_um)
}

/// 1-D band-limited angular-spectrum hop, used by the per-row micro-lens
/// calibration and 1-D oracles.
pub fn propagate_1d(
    samples: &[Complex64],
    dx_um: f64,
    wavelength_um: f64,
    dz_um: f64,
) -> Result<Vec<Complex64>, PropagationError> {
    if dz_um < 0.0 {
        return Err(PropagationError::BackPropagation(dz_um));
    }
    let n = samples.len();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);

    let mut data = samples.to_vec();
    fft.process(&mut data);

    let lam = wavelength_um;
    let inv_lam_sq = 1.0 / (lam * lam);
    let dnu = 1.0 / (n as f64 * dx_um);
    let lim = 1.0 / (lam * ((2.0 * dnu * dz_um).powi(2) + 1.0).sqrt());
    for (i, nu) in fft_freqs(n, dx_um).into_iter().enumerate() {
        if nu * nu > inv_lam_sq || nu.abs() > lim {
            data[i] = Complex64::default();
        } else {
            let kz = TAU * (inv_lam_sq - nu * nu).sqrt();
            data[i] *= Complex64::from_polar(1.0, kz * dz_um);
        }
    }

    ifft.process(&mut data);
    let scale = 1.0 / n as f64;
    for v in &mut data {
        *v *= scale;
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{field_from_profile, total_power, ComplexField};
    use crate::lens::LensSpec;
    use crate::quantize::discretize;
    use crate::synthesis::point_focus_phase;
    use ndarray::Array2;

    fn plane_wave(n: usize, dx: f64) -> ComplexField {
        ComplexField::new(
            Array2::from_elem((n, n), Complex64::new(1.0, 0.0)),
            dx,
            0.685,
            0.0,
        )
        .unwrap()
    }

    fn lens_field(w: f64, f: f64, padding: f64) -> ComplexField {
        let spec = LensSpec::new(0.685, f, 0.22, w, w, 2.74, 0.6).unwrap();
        let profile = discretize(|x, y| point_focus_phase(x, y, &spec), &spec);
        field_from_profile(&profile, padding).unwrap()
    }

    fn rel_err(a: &ComplexField, b: &ComplexField) -> f64 {
        let num: f64 = a
            .samples()
            .iter()
            .zip(b.samples().iter())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum();
        let den: f64 = b.samples().iter().map(|y| y.norm_sqr()).sum();
        (num / den).sqrt()
    }

    #[test]
    fn zero_distance_is_identity_on_band_limited_fields() {
        let field = plane_wave(32, 0.22);
        let out = propagate(&field, 0.0).unwrap();
        assert!(rel_err(&out, &field) < 1e-12);
    }

    #[test]
    fn negative_distance_rejected() {
        let field = plane_wave(8, 0.22);
        assert!(matches!(
            propagate(&field, -1.0).unwrap_err(),
            PropagationError::BackPropagation(_)
        ));
    }

    #[test]
    fn plane_wave_advances_by_two_pi_dz_over_lambda() {
        let field = plane_wave(16, 0.22);
        let dz = 3.7;
        let out = propagate(&field, dz).unwrap();
        let expected = TAU * dz / 0.685;
        for s in out.samples() {
            assert!((s.norm() - 1.0).abs() < 1e-12);
            let diff = (s.arg() - expected).rem_euclid(TAU);
            assert!(diff.min(TAU - diff) < 1e-9);
        }
    }

    #[test]
    fn low_na_lens_focuses_on_axis_and_matches_rayleigh_sommerfeld() {
        // W = 10 um, f = 30 um: NA ~ 0.16
        let spec = LensSpec::new(0.685, 30.0, 0.22, 10.0, 10.0, 2.74, 0.6).unwrap();
        let profile = discretize(|x, y| point_focus_phase(x, y, &spec), &spec);
        let field = field_from_profile(&profile, 2.0).unwrap();
        let out = propagate(&field, 30.0).unwrap();

        let intensity = out.intensity();
        let (mut pi, mut pj, mut best) = (0, 0, -1.0);
        for ((i, j), &v) in intensity.indexed_iter() {
            if v > best {
                best = v;
                pi = i;
                pj = j;
            }
        }
        let (x, y) = (out.cell_x(pj), out.cell_y(pi));
        assert!(
            x.abs() <= out.dx_um() && y.abs() <= out.dx_um(),
            "peak at ({x}, {y})"
        );

        // direct Rayleigh-Sommerfeld summation on a coarse 9 x 9 target grid
        let k = TAU / 0.685;
        let mut rs_best = (-1.0f64, 0.0, 0.0);
        for gy in -4..=4 {
            for gx in -4..=4 {
                let (tx, ty) = (gx as f64 * 0.44, gy as f64 * 0.44);
                let mut sum = Complex64::default();
                for ((i, j), s) in field.samples().indexed_iter() {
                    if s.norm_sqr() == 0.0 {
                        continue;
                    }
                    let dx = tx - field.cell_x(j);
                    let dy = ty - field.cell_y(i);
                    let rho = (dx * dx + dy * dy + 30.0 * 30.0).sqrt();
                    // RS-I kernel, constant factors dropped
                    sum += s * Complex64::from_polar(1.0 / rho * (30.0 / rho), k * rho);
                }
                let v = sum.norm_sqr();
                if v > rs_best.0 {
                    rs_best = (v, tx, ty);
                }
            }
        }
        assert!(
            rs_best.1.abs() <= 0.44 && rs_best.2.abs() <= 0.44,
            "RS oracle peak at ({}, {})",
            rs_best.1,
            rs_best.2
        );
    }

    #[test]
    fn group_law_holds_to_1e9() {
        let field = lens_field(10.0, 15.0, 2.0);
        let two_hops = propagate(&propagate(&field, 9.0).unwrap(), 6.0).unwrap();
        let direct = propagate(&field, 15.0).unwrap();
        assert!(rel_err(&two_hops, &direct) <= 1e-9);
    }

    #[test]
    fn power_non_increasing_and_conserved_for_paraxial_fields() {
        let field = lens_field(10.0, 15.0, 2.0);
        let before = total_power(&field);
        let after = total_power(&propagate(&field, 12.0).unwrap());
        assert!(after <= before * (1.0 + 1e-12));

        // paraxial: a broad Gaussian has negligible content near the band edge
        let n = 128;
        let mut g = Array2::default((n, n));
        for ((i, j), v) in g.indexed_iter_mut() {
            let x = (j as f64 - n as f64 / 2.0) * 0.22;
            let y = (i as f64 - n as f64 / 2.0) * 0.22;
            *v = Complex64::new((-(x * x + y * y) / 16.0).exp(), 0.0);
        }
        let gaussian = ComplexField::new(g, 0.22, 0.685, 0.0).unwrap();
        let p0 = total_power(&gaussian);
        let p1 = total_power(&propagate(&gaussian, 10.0).unwrap());
        assert!(p1 <= p0 * (1.0 + 1e-12));
        assert!((p0 - p1).abs() / p0 <= 1e-12);
    }

    #[test]
    fn propagation_is_linear() {
        let f1 = lens_field(10.0, 15.0, 2.0);
        let spec = LensSpec::new(0.685, 9.0, 0.22, 10.0, 10.0, 2.74, 0.6).unwrap();
        let profile = discretize(|x, y| point_focus_phase(x, y, &spec), &spec);
        let f2 = field_from_profile(&profile, 2.0).unwrap();
        let (alpha, beta) = (Complex64::new(0.8, 0.3), Complex64::new(-0.2, 1.1));

        let combo = ComplexField::new(
            f1.samples() * alpha + f2.samples() * beta,
            0.22,
            0.685,
            0.0,
        )
        .unwrap();
        let lhs = propagate(&combo, 7.0).unwrap();
        let p1 = propagate(&f1, 7.0).unwrap();
        let p2 = propagate(&f2, 7.0).unwrap();
        let rhs = ComplexField::new(
            p1.samples() * alpha + p2.samples() * beta,
            0.22,
            0.685,
            7.0,
        )
        .unwrap();
        assert!(rel_err(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn one_dimensional_plane_wave_advances() {
        let samples = vec![Complex64::new(1.0, 0.0); 64];
        let out = propagate_1d(&samples, 0.22, 0.685, 5.0).unwrap();
        let expected = TAU * 5.0 / 0.685;
        for s in &out {
            assert!((s.norm() - 1.0).abs() < 1e-12);
            let diff = (s.arg() - expected).rem_euclid(TAU);
            assert!(diff.min(TAU - diff) < 1e-9);
        }
    }
}
