//! Uniform Catmull-Rom spline evaluation. The curve interpolates the
//! interior control points; the first and last points only shape the end
//! tangents.

use crate::error::{Error, Result};

/// Evaluate the spline at parameter `u` in [0,1]. `u = 0` maps to the first
/// interior control point, `u = 1` to the last.
pub fn spline_eval(control_points: &[[f64; 3]], u: f64) -> Result<[f64; 3]> {
    if control_points.len() < 4 {
        return Err(Error::Config(format!(
            "spline needs at least 4 control points, got {}",
            control_points.len()
        )));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Config(format!(
            "spline parameter must lie in [0,1], got {u}"
        )));
    }
    let segments = control_points.len() - 3;
    let s = u * segments as f64;
    let i = (s.floor() as usize).min(segments - 1);
    let t = s - i as f64;

    let p0 = control_points[i];
    let p1 = control_points[i + 1];
    let p2 = control_points[i + 2];
    let p3 = control_points[i + 3];

    let mut out = [0.0; 3];
    for a in 0..3 {
        let c0 = 2.0 * p1[a];
        let c1 = p2[a] - p0[a];
        let c2 = 2.0 * p0[a] - 5.0 * p1[a] + 4.0 * p2[a] - p3[a];
        let c3 = -p0[a] + 3.0 * p1[a] - 3.0 * p2[a] + p3[a];
        out[a] = 0.5 * (c0 + c1 * t + c2 * t * t + c3 * t * t * t);
    }
    Ok(out)
}
