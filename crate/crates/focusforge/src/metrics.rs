//! Focal-plane search and focus measurements.

use crate::field::{total_power, ComplexField};
use crate::lens::LensSpec;
use crate::pattern::{RowAssignment, RowAxis};
use crate::propagate::{PropagationError, Spectrum};
use crate::synthesis::local_na;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("degenerate field: all samples are zero")]
    DegenerateField,
    #[error("focal scan needs z_min < z_max, got [{z_min_um}, {z_max_um}]")]
    BadScanRange { z_min_um: f64, z_max_um: f64 },
    #[error("focal scan needs at least 3 steps, got {0}")]
    TooFewScanSteps(usize),
    #[error("scan starts at {z_min_um} um but the field is already at {z_um} um")]
    ScanBehindField { z_min_um: f64, z_um: f64 },
    #[error("unbounded peak: no half-max crossing on both sides of the maximum")]
    UnboundedPeak,
    #[error("cut too short for a FWHM measurement ({0} samples)")]
    CutTooShort(usize),
    #[error("search window [{lo_um}, {hi_um}] around ({x_um}, {y_um}) leaves the field")]
    WindowOutsideField {
        x_um: f64,
        y_um: f64,
        lo_um: f64,
        hi_um: f64,
    },
    #[error("assignment has no sub-apertures to measure")]
    EmptyAssignment,
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Synthesis(#[from] crate::synthesis::SynthesisError),
}

/// Measured focus quantities at one plane. Intensities are normalized to
/// unit source power, so values are comparable across paddings and grids.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FocusMetrics {
    pub peak_intensity: f64,
    pub peak_x_um: f64,
    pub peak_y_um: f64,
    pub fwhm_x_um: Option<f64>,
    pub fwhm_y_um: Option<f64>,
    pub homogeneity_ratio: Option<f64>,
}

/// FWHM of a 1-D intensity cut by linear interpolation between the samples
/// straddling half maximum on each side of the global peak.
pub fn fwhm_of_cut(intensity: &[f64], dx_um: f64) -> Result<f64, MetricsError> {
    let n = intensity.len();
    if n < 3 {
        return Err(MetricsError::CutTooShort(n));
    }
    let mut peak = 0;
    for (i, &v) in intensity.iter().enumerate() {
        if v > intensity[peak] {
            peak = i;
        }
    }
    if peak == 0 || peak == n - 1 {
        return Err(MetricsError::UnboundedPeak);
    }
    let half = intensity[peak] / 2.0;
    if half <= 0.0 {
        return Err(MetricsError::UnboundedPeak);
    }

    let mut left = None;
    for j in (0..peak).rev() {
        if intensity[j] < half {
            let t = (half - intensity[j]) / (intensity[j + 1] - intensity[j]);
            left = Some(j as f64 + t);
            break;
        }
    }
    let mut right = None;
    for j in peak + 1..n {
        if intensity[j] < half {
            let t = (intensity[j - 1] - half) / (intensity[j - 1] - intensity[j]);
            right = Some((j - 1) as f64 + t);
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => Ok((r - l) * dx_um),
        _ => Err(MetricsError::UnboundedPeak),
    }
}

/// Global peak metrics of a field, with FWHM cuts through the peak where
/// measurable. `source_power` normalizes intensities.
fn focus_metrics_with_norm(field: &ComplexField, source_power: f64) -> FocusMetrics {
    let intensity = field.intensity();
    let (mut pi, mut pj, mut best) = (0usize, 0usize, f64::NEG_INFINITY);
    for ((i, j), &v) in intensity.indexed_iter() {
        if v > best {
            best = v;
            pi = i;
            pj = j;
        }
    }
    let row: Vec<f64> = intensity.row(pi).to_vec();
    let col: Vec<f64> = intensity.column(pj).to_vec();
    let dx = field.dx_um();
    FocusMetrics {
        peak_intensity: best / source_power,
        peak_x_um: field.cell_x(pj),
        peak_y_um: field.cell_y(pi),
        fwhm_x_um: fwhm_of_cut(&row, dx).ok(),
        fwhm_y_um: fwhm_of_cut(&col, dx).ok(),
        homogeneity_ratio: None,
    }
}

/// Scan planes between `z_min_um` and `z_max_um` (inclusive, absolute
/// coordinates) and return the plane of maximum peak intensity, smallest z
/// winning ties, together with its metrics.
pub fn find_focal_plane(
    field0: &ComplexField,
    z_min_um: f64,
    z_max_um: f64,
    n_steps: usize,
) -> Result<(f64, FocusMetrics), MetricsError> {
    if n_steps < 3 {
        return Err(MetricsError::TooFewScanSteps(n_steps));
    }
    if !(z_min_um < z_max_um) {
        return Err(MetricsError::BadScanRange {
            z_min_um,
            z_max_um,
        });
    }
    if z_min_um < field0.z_um() {
        return Err(MetricsError::ScanBehindField {
            z_min_um,
            z_um: field0.z_um(),
        });
    }
    if field0.is_all_zero() {
        return Err(MetricsError::DegenerateField);
    }

    let source_power = total_power(field0);
    let spectrum = Spectrum::analyze(field0);
    let step = (z_max_um - z_min_um) / (n_steps - 1) as f64;

    let mut z_star = z_min_um;
    let mut best_peak = f64::NEG_INFINITY;
    for i in 0..n_steps {
        let z = z_min_um + i as f64 * step;
        let field = spectrum.field_at(z)?;
        let peak = field
            .samples()
            .iter()
            .map(|s| s.norm_sqr())
            .fold(f64::NEG_INFINITY, f64::max);
        if peak > best_peak {
            best_peak = peak;
            z_star = z;
        }
    }

    let best_field = spectrum.field_at(z_star)?;
    Ok((z_star, focus_metrics_with_norm(&best_field, source_power)))
}

/// Peak measurement for one pattern row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowPeak {
    /// Row coordinate (y for the default row axis).
    pub y_um: f64,
    pub segment_id: usize,
    /// Where the row's sub-aperture steers its micro focus.
    pub expected_x_um: f64,
    /// Measured ridge position along the target axis, sub-sample refined.
    pub peak_x_um: f64,
    pub peak_intensity: f64,
}

/// Pattern-wide focus measurements: global metrics plus per-row peaks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternMetrics {
    pub focus: FocusMetrics,
    pub rows: Vec<RowPeak>,
}

/// Measure a focal-plane field against its design assignment: per-row peak
/// intensity inside a diffraction-scaled window around each expected target,
/// the max/min homogeneity ratio, and ridge positions for line fits.
pub fn pattern_metrics(
    field: &ComplexField,
    assignment: &RowAssignment,
    spec: &LensSpec,
) -> Result<PatternMetrics, MetricsError> {
    if field.is_all_zero() {
        return Err(MetricsError::DegenerateField);
    }
    let source_power = total_power(field);
    let intensity = field.intensity();
    let mut rows = Vec::new();

    for row in &assignment.rows {
        for sub in &row.sub_apertures {
            let f_eff = spec.focal_length_um + sub.s_um;
            let na = local_na(sub.x_hi_um - sub.x_lo_um, sub.a_um, f_eff)?;
            // +-2 focal-spot radii around the expected target
            let w = 2.0 * spec.wavelength_um / (2.0 * na);
            let target = -sub.a_um;
            let (ex, ey) = match assignment.row_axis {
                RowAxis::Y => (target, row.y_um),
                RowAxis::X => (row.y_um, target),
            };

            let dx = field.dx_um();
            let half_w = field.nx() as f64 * dx / 2.0;
            let half_h = field.ny() as f64 * dx / 2.0;
            let window = |c: f64, half: f64| -> Result<(usize, usize), MetricsError> {
                let to_idx = |v: f64| (v + half) / dx - 0.5;
                let lo = to_idx(c - w).ceil();
                let hi = to_idx(c + w).floor();
                let n = (2.0 * half / dx).round();
                if lo < 0.0 || hi >= n || lo > hi {
                    return Err(MetricsError::WindowOutsideField {
                        x_um: ex,
                        y_um: ey,
                        lo_um: c - w,
                        hi_um: c + w,
                    });
                }
                Ok((lo as usize, hi as usize))
            };
            let (jx0, jx1) = window(ex, half_w)?;
            let (iy0, iy1) = window(ey, half_h)?;

            let (mut bi, mut bj, mut best) = (iy0, jx0, f64::NEG_INFINITY);
            for i in iy0..=iy1 {
                for j in jx0..=jx1 {
                    if intensity[[i, j]] > best {
                        best = intensity[[i, j]];
                        bi = i;
                        bj = j;
                    }
                }
            }

            // parabolic sub-sample refinement along the target axis
            let refined = match assignment.row_axis {
                RowAxis::Y => refine_axis(&intensity, bi, bj, jx0, jx1, true)
                    .map(|d| field.cell_x(bj) + d * dx)
                    .unwrap_or_else(|| field.cell_x(bj)),
                RowAxis::X => refine_axis(&intensity, bi, bj, iy0, iy1, false)
                    .map(|d| field.cell_y(bi) + d * dx)
                    .unwrap_or_else(|| field.cell_y(bi)),
            };

            rows.push(RowPeak {
                y_um: row.y_um,
                segment_id: sub.segment_id,
                expected_x_um: target,
                peak_x_um: refined,
                peak_intensity: best / source_power,
            });
        }
    }

    if rows.is_empty() {
        return Err(MetricsError::EmptyAssignment);
    }

    let max = rows
        .iter()
        .map(|r| r.peak_intensity)
        .fold(f64::NEG_INFINITY, f64::max);
    let min = rows
        .iter()
        .map(|r| r.peak_intensity)
        .fold(f64::INFINITY, f64::min);
    let homogeneity = (min > 0.0).then(|| max / min);

    let mut focus = focus_metrics_with_norm(field, source_power);
    focus.homogeneity_ratio = homogeneity;
    Ok(PatternMetrics { focus, rows })
}

/// Three-point parabolic peak refinement along one axis; returns the
/// sub-sample offset in cells, or None at window edges.
fn refine_axis(
    intensity: &ndarray::Array2<f64>,
    i: usize,
    j: usize,
    lo: usize,
    hi: usize,
    along_x: bool,
) -> Option<f64> {
    let idx = if along_x { j } else { i };
    if idx == lo || idx == hi {
        return None;
    }
    let get = |k: usize| {
        if along_x {
            intensity[[i, k]]
        } else {
            intensity[[k, j]]
        }
    };
    let (a, b, c) = (get(idx - 1), get(idx), get(idx + 1));
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return None;
    }
    Some(0.5 * (a - c) / denom)
}

/// Least-squares line through ridge positions: `x = slope * y + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept_um: f64,
    pub rms_um: f64,
}

pub fn fit_ridge_line(rows: &[RowPeak]) -> Option<LineFit> {
    let n = rows.len() as f64;
    if rows.len() < 2 {
        return None;
    }
    let sy: f64 = rows.iter().map(|r| r.y_um).sum();
    let sx: f64 = rows.iter().map(|r| r.peak_x_um).sum();
    let syy: f64 = rows.iter().map(|r| r.y_um * r.y_um).sum();
    let sxy: f64 = rows.iter().map(|r| r.y_um * r.peak_x_um).sum();
    let denom = n * syy - sy * sy;
    if denom.abs() < 1e-12 {
        return None;
    }
    let slope = (n * sxy - sy * sx) / denom;
    let intercept = (sx - slope * sy) / n;
    let rms = (rows
        .iter()
        .map(|r| {
            let e = r.peak_x_um - (slope * r.y_um + intercept);
            e * e
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Some(LineFit {
        slope,
        intercept_um: intercept,
        rms_um: rms,
    })
}
