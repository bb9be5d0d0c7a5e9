use focusforge::field::field_from_profile;
use focusforge::homogenize::{micro_focus_probe, CalibrationConfig};
use focusforge::lens::LensSpec;
use focusforge::pattern::{compile_segments, BoundingBox, PatternSpec, RowAxis, Segment};
use focusforge::profile::synthesize_profile;
use focusforge::propagate::propagate;

#[test]
#[ignore]
fn probe_arc_rows() {
    let spec = LensSpec::new(0.685, 6.0, 0.22, 10.0, 10.0, 2.74, 0.6).unwrap();
    let pattern = PatternSpec {
        segments: vec![Segment::Arc {
            r_um: 10.0,
            center_x_um: 0.0,
            center_y_um: 0.0,
            azimuth_start_deg: -90.0,
            azimuth_end_deg: 90.0,
            homogenize: false,
        }],
        bounding_box: BoundingBox { x_min_um: -11.0, x_max_um: 11.0, y_min_um: -11.0, y_max_um: 11.0 },
        row_axis: RowAxis::Y,
    };
    let compiled = compile_segments(&pattern, &spec).unwrap();
    let profile = synthesize_profile(&compiled.assignment, &spec).unwrap();
    let field = field_from_profile(&profile, 4.0).unwrap();
    let focal = propagate(&field, 6.0).unwrap();
    let intensity = focal.intensity();
    // per-row: expected x, on-row argmax x in [7,11], that intensity
    for row in &compiled.assignment.rows {
        let i = focal.row_at(row.y_um).unwrap();
        let a = row.sub_apertures[0].a_um;
        let expected = -a;
        let mut best = (0.0f64, 0.0f64);
        for j in 0..focal.nx() {
            let x = focal.cell_x(j);
            if x >= 6.0 && x <= 12.0 && intensity[[i, j]] > best.1 {
                best = (x, intensity[[i, j]]);
            }
        }
        println!("y={:+.2} exp={:6.3} got={:6.3} I={:9.1}", row.y_um, expected, best.0, best.1);
    }
}

#[test]
#[ignore]
fn probe_micro_curve() {
    let spec = LensSpec::new(0.685, 15.0, 0.22, 44.0, 80.0, 2.74, 0.6).unwrap();
    let config = CalibrationConfig::new(11.0, -3.0, 3.0, 0.25);
    for &a in &[0.0, 5.0, 10.0, 15.0, 20.0] {
        print!("a={a:5.1}: ");
        for i in 0..=24 {
            let s = -3.0 + i as f64 * 0.25;
            let p = micro_focus_probe(a, s, &spec, &config).unwrap();
            print!("{:5.1}", p.peak_intensity);
        }
        println!();
    }
}
