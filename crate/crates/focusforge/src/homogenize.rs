//! Focal-shift calibration for homogeneous pattern intensity.
//!
//! Rows steering to large offsets lose focused power to the pitch
//! discretization, so a pattern drawn with varying `a(y)` comes out uneven.
//! The calibration sweeps the focal shift `s` for each offset `a` on a 1-D
//! micro-lens model, measures peak intensity at the design plane, and picks
//! the `s` that brings every row to a common target — by default the best
//! intensity the weakest row can reach, since no row can be pushed above its
//! own optimum. The cost is a wider focus for strongly shifted rows.

use crate::lens::LensSpec;
use crate::pattern::RowAssignment;
use crate::propagate::{propagate_1d, PropagationError};
use crate::quantize::wrap;
use crate::synthesis::shifted_focus_phase;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("no offsets to calibrate")]
    EmptyOffsets,
    #[error("s range [{s_min_um}, {s_max_um}] must span 0")]
    RangeMustSpanZero { s_min_um: f64, s_max_um: f64 },
    #[error("s step must be positive, got {0}")]
    StepNotPositive(f64),
    #[error("infeasible shift range: f + s_min = {f_eff_um} um is not positive")]
    InfeasibleShiftRange { f_eff_um: f64 },
    #[error("micro aperture of {width_um} um holds fewer than 2 cells at pitch {pitch_um} um")]
    MicroApertureTooSmall { width_um: f64, pitch_um: f64 },
    #[error(
        "target intensity unreachable for a = {a_um} um: achieved {achieved}, target {target} (tolerance {tolerance_rel})"
    )]
    TargetUnreachable {
        a_um: f64,
        achieved: f64,
        target: f64,
        tolerance_rel: f64,
    },
    #[error("selected s = {s_um} um for a = {a_um} um sits on the search-range edge; widen the range")]
    RangeClipped { a_um: f64, s_um: f64 },
    #[error("calibration range exceeded: a = {a_um} um outside [{lo_um}, {hi_um}] um")]
    RangeExceeded { a_um: f64, lo_um: f64, hi_um: f64 },
    #[error(transparent)]
    Synthesis(#[from] crate::synthesis::SynthesisError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
}

/// What the calibration equalizes to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TargetPolicy {
    /// The best intensity the weakest offset can reach (any brighter target
    /// is infeasible for that row).
    #[default]
    WeakestRow,
    /// A fixed normalized intensity.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub micro_aperture_w_um: f64,
    pub s_min_um: f64,
    pub s_max_um: f64,
    pub s_step_um: f64,
    /// Zero-padding factor of the 1-D micro-lens window. Large offsets need
    /// room: the padded window must contain the steered focus.
    pub padding_factor: f64,
    /// Relative band around the target within which a row counts as matched.
    pub tolerance_rel: f64,
    pub target: TargetPolicy,
}

impl CalibrationConfig {
    pub fn new(micro_aperture_w_um: f64, s_min_um: f64, s_max_um: f64, s_step_um: f64) -> Self {
        Self {
            micro_aperture_w_um,
            s_min_um,
            s_max_um,
            s_step_um,
            padding_factor: 8.0,
            tolerance_rel: 0.15,
            target: TargetPolicy::WeakestRow,
        }
    }

    fn shift_grid(&self) -> Vec<f64> {
        let n = ((self.s_max_um - self.s_min_um) / self.s_step_um + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.s_min_um + i as f64 * self.s_step_um).collect()
    }
}

/// One calibrated offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftEntry {
    pub a_um: f64,
    pub s_um: f64,
    pub achieved_intensity: f64,
}

/// Calibrated focal shifts over a range of offsets, interpolable in `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftTable {
    pub entries: Vec<ShiftEntry>,
    pub target_intensity: f64,
    pub config: CalibrationConfig,
}

impl ShiftTable {
    /// Linear interpolation of `s` at offset `a`; extrapolation is refused.
    pub fn shift_at(&self, a_um: f64) -> Result<f64, CalibrationError> {
        let e = &self.entries;
        let (lo, hi) = (e[0].a_um, e[e.len() - 1].a_um);
        let eps = 1e-9;
        if a_um < lo - eps || a_um > hi + eps {
            return Err(CalibrationError::RangeExceeded {
                a_um,
                lo_um: lo,
                hi_um: hi,
            });
        }
        if e.len() == 1 || a_um <= lo {
            return Ok(e[0].s_um);
        }
        if a_um >= hi {
            return Ok(e[e.len() - 1].s_um);
        }
        let k = e.partition_point(|entry| entry.a_um <= a_um) - 1;
        let (e0, e1) = (&e[k], &e[k + 1]);
        let t = (a_um - e0.a_um) / (e1.a_um - e0.a_um);
        Ok(e0.s_um + t * (e1.s_um - e0.s_um))
    }
}

/// Peak intensity and width of one simulated micro focus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroFocusProbe {
    /// Peak intensity at the design plane per unit aperture power.
    pub peak_intensity: f64,
    pub fwhm_um: Option<f64>,
}

/// Simulate one row as a 1-D micro metalens with offset `a` and shift `s`,
/// propagated to the design focal plane.
pub fn micro_focus_probe(
    a_um: f64,
    s_um: f64,
    spec: &LensSpec,
    config: &CalibrationConfig,
) -> Result<MicroFocusProbe, CalibrationError> {
    let pitch = spec.pitch_um;
    let n_aperture = (config.micro_aperture_w_um / pitch).round() as usize;
    if n_aperture < 2 {
        return Err(CalibrationError::MicroApertureTooSmall {
            width_um: config.micro_aperture_w_um,
            pitch_um: pitch,
        });
    }
    let n_padded = (n_aperture as f64 * config.padding_factor).ceil() as usize;
    let offset = (n_padded - n_aperture) / 2;

    let row = crate::lens::RowParams::new(0.0, a_um, s_um);
    let mut samples = vec![Complex64::default(); n_padded];
    for j in 0..n_aperture {
        let x = (j as f64 + 0.5) * pitch - n_aperture as f64 * pitch / 2.0;
        let phase = wrap(shifted_focus_phase(x, &row, spec)?);
        samples[j + offset] = Complex64::from_polar(1.0, -phase);
    }

    let out = propagate_1d(&samples, pitch, spec.wavelength_um, spec.focal_length_um)?;
    let intensity: Vec<f64> = out.iter().map(|s| s.norm_sqr()).collect();
    let peak = intensity.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(MicroFocusProbe {
        peak_intensity: peak / n_aperture as f64,
        fwhm_um: crate::metrics::fwhm_of_cut(&intensity, pitch).ok(),
    })
}

/// Calibrate the focal shift for each offset so every micro focus reaches the
/// target intensity at the design plane.
///
/// The intensity map `I(a, s)` is computed once per distinct |a| (the 1-D
/// problem is mirror symmetric), the target defaults to
/// `min over a of max over s of I(a, s)`, and each offset picks the `s`
/// nearest the target, tie-broken toward smallest |s| and then positive `s`.
pub fn calibrate_focal_shift(
    a_values_um: &[f64],
    spec: &LensSpec,
    config: &CalibrationConfig,
) -> Result<ShiftTable, CalibrationError> {
    if a_values_um.is_empty() {
        return Err(CalibrationError::EmptyOffsets);
    }
    if !(config.s_min_um <= 0.0 && config.s_max_um >= 0.0) {
        return Err(CalibrationError::RangeMustSpanZero {
            s_min_um: config.s_min_um,
            s_max_um: config.s_max_um,
        });
    }
    if !(config.s_step_um > 0.0) {
        return Err(CalibrationError::StepNotPositive(config.s_step_um));
    }
    let f_eff_min = spec.focal_length_um + config.s_min_um;
    if f_eff_min <= 0.0 {
        return Err(CalibrationError::InfeasibleShiftRange {
            f_eff_um: f_eff_min,
        });
    }

    let mut offsets: Vec<f64> = a_values_um.to_vec();
    offsets.sort_by(f64::total_cmp);
    offsets.dedup();

    // every distinct |a| gets one sweep; mirrored offsets share it exactly
    let mut magnitudes: Vec<f64> = offsets.iter().map(|a| a.abs()).collect();
    magnitudes.sort_by(f64::total_cmp);
    magnitudes.dedup();

    let shifts = config.shift_grid();
    let sweeps: Vec<(f64, Vec<(f64, f64)>)> = magnitudes
        .par_iter()
        .map(|&a| {
            let curve = shifts
                .iter()
                .map(|&s| {
                    micro_focus_probe(a, s, spec, config).map(|p| (s, p.peak_intensity))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((a, curve))
        })
        .collect::<Result<Vec<_>, CalibrationError>>()?;

    let curve_for = |a: f64| -> &Vec<(f64, f64)> {
        let idx = sweeps
            .binary_search_by(|(m, _)| m.total_cmp(&a.abs()))
            .expect("every |a| was swept");
        &sweeps[idx].1
    };

    let target = match config.target {
        TargetPolicy::Fixed(t) => t,
        TargetPolicy::WeakestRow => offsets
            .iter()
            .map(|&a| {
                curve_for(a)
                    .iter()
                    .map(|&(_, i)| i)
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .fold(f64::INFINITY, f64::min),
    };

    let mut entries = Vec::with_capacity(offsets.len());
    for &a in &offsets {
        let curve = curve_for(a);
        let (s_sel, achieved) = curve
            .iter()
            .copied()
            .min_by(|&(s1, i1), &(s2, i2)| {
                (i1 - target)
                    .abs()
                    .total_cmp(&(i2 - target).abs())
                    .then(s1.abs().total_cmp(&s2.abs()))
                    .then(s2.total_cmp(&s1)) // positive s first
            })
            .expect("shift grid is never empty");
        if target > 0.0 && (achieved - target).abs() / target > config.tolerance_rel {
            return Err(CalibrationError::TargetUnreachable {
                a_um: a,
                achieved,
                target,
                tolerance_rel: config.tolerance_rel,
            });
        }
        let last = shifts.len() - 1;
        if (s_sel == shifts[0] && shifts.len() > 1) || (s_sel == shifts[last] && last > 0) {
            return Err(CalibrationError::RangeClipped { a_um: a, s_um: s_sel });
        }
        entries.push(ShiftEntry {
            a_um: a,
            s_um: s_sel,
            achieved_intensity: achieved,
        });
    }

    Ok(ShiftTable {
        entries,
        target_intensity: target,
        config: config.clone(),
    })
}

/// Apply a calibrated table to every sub-aperture of an assignment:
/// `s` is interpolated in `a`, all other fields stay unchanged.
pub fn apply_homogenization(
    assignment: &RowAssignment,
    table: &ShiftTable,
) -> Result<RowAssignment, CalibrationError> {
    apply_homogenization_filtered(assignment, table, |_| true)
}

/// Like [`apply_homogenization`] but only for sub-apertures whose segment id
/// passes the filter; used when a pattern mixes homogenized and plain
/// segments.
pub fn apply_homogenization_filtered(
    assignment: &RowAssignment,
    table: &ShiftTable,
    segment_filter: impl Fn(usize) -> bool,
) -> Result<RowAssignment, CalibrationError> {
    let mut out = assignment.clone();
    for row in &mut out.rows {
        for sub in &mut row.sub_apertures {
            if segment_filter(sub.segment_id) {
                sub.s_um = table.shift_at(sub.a_um)?;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lens(f: f64) -> LensSpec {
        LensSpec::new(0.685, f, 0.22, 10.0, 10.0, 2.74, 0.6).unwrap()
    }

    fn config() -> CalibrationConfig {
        CalibrationConfig::new(10.0, -2.0, 2.0, 0.5)
    }

    #[test]
    fn single_on_axis_offset_selects_zero_shift() {
        let spec = lens(3.0);
        let table = calibrate_focal_shift(&[0.0], &spec, &config()).unwrap();
        assert_eq!(table.entries.len(), 1);
        assert_eq!(table.entries[0].s_um, 0.0);
        assert_eq!(table.entries[0].achieved_intensity, table.target_intensity);
    }

    #[test]
    fn mirrored_offsets_share_the_same_shift() {
        let spec = lens(6.0);
        let table = calibrate_focal_shift(&[-5.0, 0.0, 5.0], &spec, &config()).unwrap();
        let s_neg = table.entries[0].s_um;
        let s_pos = table.entries[2].s_um;
        assert_eq!(s_neg, s_pos);
        assert_eq!(
            table.entries[0].achieved_intensity,
            table.entries[2].achieved_intensity
        );
    }

    #[test]
    fn off_axis_row_sets_the_target_and_keeps_small_shift() {
        let spec = lens(6.0);
        let table = calibrate_focal_shift(&[0.0, 5.0], &spec, &config()).unwrap();
        let on_axis = &table.entries[0];
        let off_axis = &table.entries[1];
        // the off-axis row is the weak one: its best intensity is the target
        assert!(off_axis.s_um.abs() <= 0.5 + 1e-12);
        assert!(on_axis.s_um != 0.0, "bright row must be detuned");
        let rel = (on_axis.achieved_intensity - table.target_intensity).abs()
            / table.target_intensity;
        assert!(rel <= 0.15, "matched within tolerance, got {rel}");
    }

    #[test]
    fn calibration_is_deterministic() {
        let spec = lens(6.0);
        let a = calibrate_focal_shift(&[0.0, 2.0, 5.0], &spec, &config()).unwrap();
        let b = calibrate_focal_shift(&[0.0, 2.0, 5.0], &spec, &config()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn preconditions_are_enforced() {
        let spec = lens(6.0);
        assert!(matches!(
            calibrate_focal_shift(&[], &spec, &config()).unwrap_err(),
            CalibrationError::EmptyOffsets
        ));
        let mut bad = config();
        bad.s_min_um = 0.5;
        assert!(matches!(
            calibrate_focal_shift(&[0.0], &spec, &bad).unwrap_err(),
            CalibrationError::RangeMustSpanZero { .. }
        ));
        let mut bad = config();
        bad.s_step_um = 0.0;
        assert!(matches!(
            calibrate_focal_shift(&[0.0], &spec, &bad).unwrap_err(),
            CalibrationError::StepNotPositive(_)
        ));
        let mut bad = config();
        bad.s_min_um = -10.0;
        assert!(matches!(
            calibrate_focal_shift(&[0.0], &spec, &bad).unwrap_err(),
            CalibrationError::InfeasibleShiftRange { .. }
        ));
    }

    #[test]
    fn identity_table_leaves_assignment_unchanged() {
        let table = ShiftTable {
            entries: vec![
                ShiftEntry {
                    a_um: -5.0,
                    s_um: 0.0,
                    achieved_intensity: 1.0,
                },
                ShiftEntry {
                    a_um: 5.0,
                    s_um: 0.0,
                    achieved_intensity: 1.0,
                },
            ],
            target_intensity: 1.0,
            config: config(),
        };
        let spec = lens(6.0);
        let pattern = crate::pattern::PatternSpec {
            segments: vec![crate::pattern::Segment::Line {
                k: -2.0,
                c_um: 0.0,
                y_min_um: -5.0,
                y_max_um: 5.0,
                homogenize: true,
            }],
            bounding_box: crate::pattern::BoundingBox {
                x_min_um: -10.0,
                x_max_um: 10.0,
                y_min_um: -10.0,
                y_max_um: 10.0,
            },
            row_axis: crate::pattern::RowAxis::Y,
        };
        let compiled = crate::pattern::compile_segments(&pattern, &spec).unwrap();
        let applied = apply_homogenization(&compiled.assignment, &table).unwrap();
        assert_eq!(applied, compiled.assignment);
    }

    #[test]
    fn interpolation_hits_knots_and_refuses_extrapolation() {
        let table = ShiftTable {
            entries: vec![
                ShiftEntry {
                    a_um: 0.0,
                    s_um: 1.0,
                    achieved_intensity: 1.0,
                },
                ShiftEntry {
                    a_um: 2.0,
                    s_um: 3.0,
                    achieved_intensity: 1.0,
                },
            ],
            target_intensity: 1.0,
            config: config(),
        };
        assert_eq!(table.shift_at(0.0).unwrap(), 1.0);
        assert_eq!(table.shift_at(2.0).unwrap(), 3.0);
        assert_eq!(table.shift_at(1.0).unwrap(), 2.0);
        assert!(matches!(
            table.shift_at(2.5).unwrap_err(),
            CalibrationError::RangeExceeded { .. }
        ));
    }
}
