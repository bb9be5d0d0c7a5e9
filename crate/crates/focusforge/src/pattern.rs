//! Declarative target patterns and their compilation into per-row steering
//! parameters.
//!
//! A pattern is an ordered list of segments (points, lines, vertical strokes,
//! arcs) drawn on the focal plane. Compilation walks the lens rows: every row
//! intersecting a segment's y-range gets a sub-aperture steering its micro
//! focus onto that segment. Rows crossed by several segments are split into
//! equal-width contiguous sub-apertures, ordered so the leftmost sub-aperture
//! targets the leftmost stroke (smallest steering angles).

use crate::lens::LensSpec;
use crate::synthesis::{self, local_na, SynthesisError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("pattern has no segments")]
    EmptyPattern,
    #[error("segment {index}: {reason}")]
    InvalidSegment { index: usize, reason: String },
    #[error("segment {index} locus leaves the pattern bounding box at ({x_um}, {y_um})")]
    LocusOutsideBoundingBox { index: usize, x_um: f64, y_um: f64 },
    #[error("segment {index} outside aperture: no lens row intersects its y-range")]
    SegmentOutsideAperture { index: usize },
    #[error("unknown preset '{name}'; available presets: {available}")]
    UnknownPreset { name: String, available: &'static str },
    #[error("preset '{name}' needs a {needed_w_um} x {needed_h_um} um aperture, lens is {lens_w_um} x {lens_h_um} um")]
    PatternExceedsLens {
        name: String,
        needed_w_um: f64,
        needed_h_um: f64,
        lens_w_um: f64,
        lens_h_um: f64,
    },
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Lens(#[from] crate::lens::LensError),
}

/// Non-fatal compilation diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CompileWarning {
    /// Two targets on the same row sit closer than one diffraction limit;
    /// their micro focuses will not resolve.
    OverlappingTargets {
        y_um: f64,
        segment_a: usize,
        segment_b: usize,
        separation_um: f64,
        limit_um: f64,
    },
    /// Part of the segment's y-range falls outside the lens.
    SegmentClipped { segment: usize },
}

/// Which lens axis parameterizes the pattern's y coordinate. Rows run along
/// the other axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RowAxis {
    #[default]
    Y,
    X,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min_um: f64,
    pub x_max_um: f64,
    pub y_min_um: f64,
    pub y_max_um: f64,
}

impl BoundingBox {
    pub fn contains(&self, x_um: f64, y_um: f64) -> bool {
        x_um >= self.x_min_um
            && x_um <= self.x_max_um
            && y_um >= self.y_min_um
            && y_um <= self.y_max_um
    }
}

/// One stroke of a target pattern.
///
/// `LineTarget` describes the focal-plane line `y = k x + c`; the offset of a
/// row at height y is `a(y) = -(y - c)/k`. `ConstantOffsetTarget` is a
/// vertical stroke given by its offset directly (target x = -a). `ArcTarget`
/// is a circular arc swept counterclockwise from `azimuth_start_deg` to
/// `azimuth_end_deg` (0 degrees = +x axis).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    Point {
        x_um: f64,
        y_um: f64,
        #[serde(default)]
        homogenize: bool,
    },
    Line {
        k: f64,
        c_um: f64,
        y_min_um: f64,
        y_max_um: f64,
        #[serde(default)]
        homogenize: bool,
    },
    ConstantOffset {
        a_um: f64,
        y_min_um: f64,
        y_max_um: f64,
        #[serde(default)]
        homogenize: bool,
    },
    Arc {
        r_um: f64,
        center_x_um: f64,
        center_y_um: f64,
        azimuth_start_deg: f64,
        azimuth_end_deg: f64,
        #[serde(default)]
        homogenize: bool,
    },
}

impl Segment {
    pub fn homogenize(&self) -> bool {
        match self {
            Segment::Point { homogenize, .. }
            | Segment::Line { homogenize, .. }
            | Segment::ConstantOffset { homogenize, .. }
            | Segment::Arc { homogenize, .. } => *homogenize,
        }
    }

    /// y-range of rows this segment can claim; `None` bound means unbounded.
    fn y_range(&self) -> (Option<f64>, Option<f64>) {
        match self {
            Segment::Point { .. } => (None, None),
            Segment::Line {
                y_min_um, y_max_um, ..
            }
            | Segment::ConstantOffset {
                y_min_um, y_max_um, ..
            } => (Some(*y_min_um), Some(*y_max_um)),
            Segment::Arc {
                r_um,
                center_y_um,
                azimuth_start_deg,
                azimuth_end_deg,
                ..
            } => {
                let (lo, hi) =
                    interval_extrema(*azimuth_start_deg, *azimuth_end_deg, f64::sin);
                (Some(center_y_um + r_um * lo), Some(center_y_um + r_um * hi))
            }
        }
    }

    fn validate(&self, index: usize) -> Result<(), CompileError> {
        let invalid = |reason: String| CompileError::InvalidSegment { index, reason };
        match self {
            Segment::Point { .. } => Ok(()),
            Segment::Line {
                k,
                y_min_um,
                y_max_um,
                ..
            } => {
                if *k == 0.0 {
                    return Err(SynthesisError::VerticalLineSlope.into());
                }
                if y_min_um >= y_max_um {
                    return Err(invalid(format!(
                        "empty y-range [{y_min_um}, {y_max_um}]"
                    )));
                }
                Ok(())
            }
            Segment::ConstantOffset {
                y_min_um, y_max_um, ..
            } => {
                if y_min_um >= y_max_um {
                    return Err(invalid(format!(
                        "empty y-range [{y_min_um}, {y_max_um}]"
                    )));
                }
                Ok(())
            }
            Segment::Arc {
                r_um,
                azimuth_start_deg,
                azimuth_end_deg,
                ..
            } => {
                if !(*r_um > 0.0) {
                    return Err(invalid(format!("non-positive radius {r_um}")));
                }
                if !(azimuth_start_deg < azimuth_end_deg
                    && *azimuth_end_deg <= azimuth_start_deg + 360.0)
                {
                    return Err(invalid(format!(
                        "azimuth range [{azimuth_start_deg}, {azimuth_end_deg}] must satisfy start < end <= start + 360"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Target x positions (and offsets a = -x) where this segment crosses a
    /// given row. Arcs can cross a row twice.
    fn strokes_at(&self, y_um: f64) -> Result<Vec<Stroke>, SynthesisError> {
        match self {
            Segment::Point { x_um, .. } => Ok(vec![Stroke {
                target_x_um: *x_um,
                a_um: -*x_um,
            }]),
            Segment::Line { k, c_um, .. } => {
                let a = synthesis::line_offset(y_um, *k, *c_um)?;
                Ok(vec![Stroke {
                    target_x_um: -a,
                    a_um: a,
                }])
            }
            Segment::ConstantOffset { a_um, .. } => Ok(vec![Stroke {
                target_x_um: -*a_um,
                a_um: *a_um,
            }]),
            Segment::Arc {
                r_um,
                center_x_um,
                center_y_um,
                azimuth_start_deg,
                azimuth_end_deg,
                ..
            } => {
                let sin_theta = (y_um - center_y_um) / r_um;
                if sin_theta.abs() > 1.0 {
                    return Err(SynthesisError::RowOutsideArcSupport {
                        y_abs_um: (y_um - center_y_um).abs(),
                        radius_um: *r_um,
                    });
                }
                let t = sin_theta.asin().to_degrees();
                let mut strokes = Vec::new();
                for theta_deg in [t, 180.0 - t] {
                    if !azimuth_contains(*azimuth_start_deg, *azimuth_end_deg, theta_deg) {
                        continue;
                    }
                    let x = center_x_um + r_um * theta_deg.to_radians().cos();
                    let stroke = Stroke {
                        target_x_um: x,
                        a_um: -x,
                    };
                    // the two branches coincide at theta = +-90
                    if !strokes
                        .iter()
                        .any(|s: &Stroke| (s.target_x_um - x).abs() < 1e-9)
                    {
                        strokes.push(stroke);
                    }
                }
                Ok(strokes)
            }
        }
    }

    /// Extreme locus points, used for bounding-box validation.
    fn locus_extremes(&self) -> Vec<(f64, f64)> {
        match self {
            Segment::Point { x_um, y_um, .. } => vec![(*x_um, *y_um)],
            Segment::Line {
                k,
                c_um,
                y_min_um,
                y_max_um,
                ..
            } => {
                let x_at = |y: f64| (y - c_um) / k;
                vec![(x_at(*y_min_um), *y_min_um), (x_at(*y_max_um), *y_max_um)]
            }
            Segment::ConstantOffset {
                a_um,
                y_min_um,
                y_max_um,
                ..
            } => vec![(-*a_um, *y_min_um), (-*a_um, *y_max_um)],
            Segment::Arc {
                r_um,
                center_x_um,
                center_y_um,
                azimuth_start_deg,
                azimuth_end_deg,
                ..
            } => {
                let (cx_lo, cx_hi) =
                    interval_extrema(*azimuth_start_deg, *azimuth_end_deg, f64::cos);
                let (sy_lo, sy_hi) =
                    interval_extrema(*azimuth_start_deg, *azimuth_end_deg, f64::sin);
                vec![
                    (center_x_um + r_um * cx_lo, *center_y_um),
                    (center_x_um + r_um * cx_hi, *center_y_um),
                    (*center_x_um, center_y_um + r_um * sy_lo),
                    (*center_x_um, center_y_um + r_um * sy_hi),
                ]
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Stroke {
    target_x_um: f64,
    a_um: f64,
}

/// Min and max of a trig function over an azimuth interval in degrees.
fn interval_extrema(start_deg: f64, end_deg: f64, f: fn(f64) -> f64) -> (f64, f64) {
    let mut lo = f(start_deg.to_radians()).min(f(end_deg.to_radians()));
    let mut hi = f(start_deg.to_radians()).max(f(end_deg.to_radians()));
    // quarter-turn stations inside the interval can carry the extrema
    let mut q = (start_deg / 90.0).ceil() * 90.0;
    while q <= end_deg {
        let v = f(q.to_radians());
        lo = lo.min(v);
        hi = hi.max(v);
        q += 90.0;
    }
    (lo, hi)
}

/// Membership of an azimuth in [start, end), taken modulo 360.
fn azimuth_contains(start_deg: f64, end_deg: f64, theta_deg: f64) -> bool {
    if end_deg - start_deg >= 360.0 {
        return true;
    }
    let turn = (theta_deg - start_deg).rem_euclid(360.0);
    turn < end_deg - start_deg
}

/// A focal-plane target pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub segments: Vec<Segment>,
    pub bounding_box: BoundingBox,
    #[serde(default)]
    pub row_axis: RowAxis,
}

impl PatternSpec {
    pub fn validate(&self) -> Result<(), CompileError> {
        if self.segments.is_empty() {
            return Err(CompileError::EmptyPattern);
        }
        for (index, segment) in self.segments.iter().enumerate() {
            segment.validate(index)?;
            for (x, y) in segment.locus_extremes() {
                if !self.bounding_box.contains(x, y) {
                    return Err(CompileError::LocusOutsideBoundingBox {
                        index,
                        x_um: x,
                        y_um: y,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pattern serialization cannot fail")
    }
}

/// One sub-aperture of a lens row, steering its micro focus to one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubAperture {
    pub x_lo_um: f64,
    pub x_hi_um: f64,
    pub a_um: f64,
    pub s_um: f64,
    pub segment_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub y_um: f64,
    pub sub_apertures: Vec<SubAperture>,
}

/// Per-row steering assignment for a whole lens. Rows without any target
/// keep an empty sub-aperture list and synthesize to flat phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowAssignment {
    pub rows: Vec<Row>,
    #[serde(default)]
    pub row_axis: RowAxis,
}

impl RowAssignment {
    /// Sorted deduplicated offsets across all sub-apertures.
    pub fn offset_values(&self) -> Vec<f64> {
        let mut a: Vec<f64> = self
            .rows
            .iter()
            .flat_map(|r| r.sub_apertures.iter().map(|s| s.a_um))
            .collect();
        a.sort_by(f64::total_cmp);
        a.dedup();
        a
    }

    /// Width of the narrowest sub-aperture, the natural micro-lens aperture
    /// for focal-shift calibration.
    pub fn min_sub_aperture_width(&self) -> Option<f64> {
        self.rows
            .iter()
            .flat_map(|r| r.sub_apertures.iter().map(|s| s.x_hi_um - s.x_lo_um))
            .min_by(f64::total_cmp)
    }
}

/// Compilation result: the assignment plus non-fatal diagnostics.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub assignment: RowAssignment,
    pub warnings: Vec<CompileWarning>,
}

/// Compile a pattern into per-row sub-apertures on the lens grid.
pub fn compile_segments(pattern: &PatternSpec, spec: &LensSpec) -> Result<Compiled, CompileError> {
    pattern.validate()?;
    spec.validate()?;

    // rows run along y unless the pattern is rotated onto the x axis
    let (n_rows, aperture_w) = match pattern.row_axis {
        RowAxis::Y => (spec.ny(), spec.aperture_w_um),
        RowAxis::X => (spec.nx(), spec.aperture_h_um),
    };
    let row_center = |i: usize| match pattern.row_axis {
        RowAxis::Y => spec.cell_y(i),
        RowAxis::X => spec.cell_x(i),
    };
    let row_lo = row_center(0);
    let row_hi = row_center(n_rows - 1);

    let mut warnings = Vec::new();
    let mut covered = vec![false; pattern.segments.len()];
    let mut rows = Vec::with_capacity(n_rows);

    for i in 0..n_rows {
        let y = row_center(i);
        let mut strokes: Vec<(usize, Stroke)> = Vec::new();
        for (seg_id, segment) in pattern.segments.iter().enumerate() {
            let (lo, hi) = segment.y_range();
            if lo.is_some_and(|lo| y < lo) || hi.is_some_and(|hi| y > hi) {
                continue;
            }
            for stroke in segment.strokes_at(y)? {
                strokes.push((seg_id, stroke));
            }
            covered[seg_id] = true;
        }

        strokes.sort_by(|(ia, a), (ib, b)| {
            a.target_x_um
                .total_cmp(&b.target_x_um)
                .then(ia.cmp(ib))
        });

        let n = strokes.len();
        let mut sub_apertures = Vec::with_capacity(n);
        for (j, (seg_id, stroke)) in strokes.iter().enumerate() {
            let sub_w = aperture_w / n as f64;
            sub_apertures.push(SubAperture {
                x_lo_um: -aperture_w / 2.0 + j as f64 * sub_w,
                x_hi_um: -aperture_w / 2.0 + (j + 1) as f64 * sub_w,
                a_um: stroke.a_um,
                s_um: 0.0,
                segment_id: *seg_id,
            });
        }

        // adjacent targets inside one diffraction-limited spot cannot resolve
        for w in strokes.windows(2) {
            let (seg_a, sa) = w[0];
            let (seg_b, sb) = w[1];
            let sub_w = aperture_w / n as f64;
            let na_a = local_na(sub_w, sa.a_um, spec.focal_length_um)?;
            let na_b = local_na(sub_w, sb.a_um, spec.focal_length_um)?;
            let limit = spec.wavelength_um / (2.0 * na_a.min(na_b));
            let separation = sb.target_x_um - sa.target_x_um;
            if separation < limit {
                warnings.push(CompileWarning::OverlappingTargets {
                    y_um: y,
                    segment_a: seg_a,
                    segment_b: seg_b,
                    separation_um: separation,
                    limit_um: limit,
                });
            }
        }

        rows.push(Row {
            y_um: y,
            sub_apertures,
        });
    }

    for (seg_id, segment) in pattern.segments.iter().enumerate() {
        if !covered[seg_id] {
            return Err(CompileError::SegmentOutsideAperture { index: seg_id });
        }
        let (lo, hi) = segment.y_range();
        if lo.is_some_and(|lo| lo < row_lo - spec.pitch_um)
            || hi.is_some_and(|hi| hi > row_hi + spec.pitch_um)
        {
            warnings.push(CompileWarning::SegmentClipped { segment: seg_id });
        }
    }

    Ok(Compiled {
        assignment: RowAssignment {
            rows,
            row_axis: pattern.row_axis,
        },
        warnings,
    })
}

/// Letter presets reproducing the fabricated designs: an 'M' drawn from two
/// verticals and two opposite-slope diagonals, and a 'U' drawn from two
/// verticals joined by a half ring. Both span a 40 x 40 um box.
pub fn compile_letter(preset: &str, spec: &LensSpec) -> Result<PatternSpec, CompileError> {
    const HALF: f64 = 20.0;
    let segments = match preset.to_ascii_uppercase().as_str() {
        "M" => vec![
            Segment::ConstantOffset {
                a_um: HALF, // left vertical, target x = -20
                y_min_um: -HALF,
                y_max_um: HALF,
                homogenize: true,
            },
            Segment::Line {
                // from (-20, 20) down to (0, -20)
                k: -2.0,
                c_um: -HALF,
                y_min_um: -HALF,
                y_max_um: HALF,
                homogenize: true,
            },
            Segment::Line {
                // from (0, -20) up to (20, 20)
                k: 2.0,
                c_um: -HALF,
                y_min_um: -HALF,
                y_max_um: HALF,
                homogenize: true,
            },
            Segment::ConstantOffset {
                a_um: -HALF, // right vertical, target x = +20
                y_min_um: -HALF,
                y_max_um: HALF,
                homogenize: true,
            },
        ],
        "U" => vec![
            Segment::ConstantOffset {
                a_um: HALF,
                y_min_um: 0.0,
                y_max_um: HALF,
                homogenize: false,
            },
            Segment::ConstantOffset {
                a_um: -HALF,
                y_min_um: 0.0,
                y_max_um: HALF,
                homogenize: false,
            },
            Segment::Arc {
                r_um: HALF,
                center_x_um: 0.0,
                center_y_um: 0.0,
                azimuth_start_deg: 180.0,
                azimuth_end_deg: 360.0,
                homogenize: false,
            },
        ],
        other => {
            return Err(CompileError::UnknownPreset {
                name: other.to_string(),
                available: "M, U",
            })
        }
    };
    if spec.aperture_w_um < 2.0 * HALF || spec.aperture_h_um < 2.0 * HALF {
        return Err(CompileError::PatternExceedsLens {
            name: preset.to_string(),
            needed_w_um: 2.0 * HALF,
            needed_h_um: 2.0 * HALF,
            lens_w_um: spec.aperture_w_um,
            lens_h_um: spec.aperture_h_um,
        });
    }
    Ok(PatternSpec {
        segments,
        bounding_box: BoundingBox {
            x_min_um: -HALF,
            x_max_um: HALF,
            y_min_um: -HALF,
            y_max_um: HALF,
        },
        row_axis: RowAxis::Y,
    })
}
