//! Smooth random motion trajectories: Catmull-Rom curves through seeded
//! control points, rescaled so per-step motion respects the magnitude
//! class while the path stays long enough to be a real motion and close
//! enough to the origin to stay inside the phantom.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

use super::spline::spline_eval;
use super::{norm3, EXCURSION_CAP_FACTOR};

/// Positions sampled per trajectory: the observed window plus two future
/// label points.
pub const TRAJECTORY_SAMPLES: usize = 7;

/// Interior spline knots; samples land exactly on them.
const INTERIOR_POINTS: usize = TRAJECTORY_SAMPLES;

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Interior knots plus one reflected handle at each end.
    pub control_points: Vec<[f64; 3]>,
    /// Positions in mm at t0..t6; t0 is exactly the origin.
    pub samples: Vec<[f64; 3]>,
    /// Maximum per-step displacement in mm.
    pub magnitude_class: f64,
}

impl Trajectory {
    /// A motionless trajectory (all samples at the origin).
    pub fn stationary() -> Self {
        Trajectory {
            control_points: vec![[0.0; 3]; INTERIOR_POINTS + 2],
            samples: vec![[0.0; 3]; TRAJECTORY_SAMPLES],
            magnitude_class: 0.0,
        }
    }

    /// Largest displacement between consecutive samples, mm.
    pub fn max_step(&self) -> f64 {
        self.steps().fold(0.0, f64::max)
    }

    /// Total length of the sampled path, mm.
    pub fn path_length(&self) -> f64 {
        self.steps().sum()
    }

    fn steps(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples
            .windows(2)
            .map(|w| norm3([w[1][0] - w[0][0], w[1][1] - w[0][1], w[1][2] - w[0][2]]))
    }
}

/// Generate a trajectory whose per-step displacement never exceeds
/// `magnitude_class` mm, whose sampled path length is at least half of it,
/// and whose whole course (densely evaluated) stays within
/// `EXCURSION_CAP_FACTOR * magnitude_class` of the origin.
pub fn generate_trajectory(seed: u64, magnitude_class: f64) -> Result<Trajectory> {
    if !(magnitude_class.is_finite() && magnitude_class >= 0.0) {
        return Err(Error::Config(format!(
            "magnitude class must be nonnegative, got {magnitude_class}"
        )));
    }
    let mut rng = rng::stream(seed, Domain::Trajectory, 0);

    let mut points;
    let (mut samples, mut max_step, mut path_len, mut excursion);
    loop {
        let mut interior: Vec<[f64; 3]> = (0..INTERIOR_POINTS)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
            .collect();
        interior[0] = [0.0; 3];

        // reflected end handles keep the end tangents on the chain's scale
        let reflect = |a: [f64; 3], b: [f64; 3]| -> [f64; 3] {
            std::array::from_fn(|i| 2.0 * a[i] - b[i])
        };
        points = Vec::with_capacity(INTERIOR_POINTS + 2);
        points.push(reflect(interior[0], interior[1]));
        points.extend_from_slice(&interior);
        points.push(reflect(
            interior[INTERIOR_POINTS - 1],
            interior[INTERIOR_POINTS - 2],
        ));

        samples = sample_positions(&points)?;
        max_step = chain_max_step(&samples);
        path_len = chain_length(&samples);
        excursion = dense_excursion(&points)?;
        if max_step > 1e-9 {
            break;
        }
    }

    let mut scale = (magnitude_class / max_step)
        .min(EXCURSION_CAP_FACTOR * magnitude_class / excursion);
    if scale * path_len < 0.5 * magnitude_class {
        // scaling up to the length floor cannot break the step cap: the
        // path is at least as long as its largest step
        scale = 0.5 * magnitude_class / path_len;
    }

    for p in &mut points {
        for a in 0..3 {
            p[a] *= scale;
        }
    }
    for s in &mut samples {
        for a in 0..3 {
            s[a] *= scale;
        }
    }
    samples[0] = [0.0; 3];

    Ok(Trajectory {
        control_points: points,
        samples,
        magnitude_class,
    })
}

fn sample_positions(points: &[[f64; 3]]) -> Result<Vec<[f64; 3]>> {
    (0..TRAJECTORY_SAMPLES)
        .map(|t| spline_eval(points, t as f64 / (TRAJECTORY_SAMPLES - 1) as f64))
        .collect()
}

fn chain_max_step(samples: &[[f64; 3]]) -> f64 {
    samples
        .windows(2)
        .map(|w| norm3([w[1][0] - w[0][0], w[1][1] - w[0][1], w[1][2] - w[0][2]]))
        .fold(0.0, f64::max)
}

fn chain_length(samples: &[[f64; 3]]) -> f64 {
    samples
        .windows(2)
        .map(|w| norm3([w[1][0] - w[0][0], w[1][1] - w[0][1], w[1][2] - w[0][2]]))
        .sum()
}

fn dense_excursion(points: &[[f64; 3]]) -> Result<f64> {
    let mut max = 0.0f64;
    for k in 0..=256 {
        let p = spline_eval(points, k as f64 / 256.0)?;
        max = max.max(norm3(p));
    }
    Ok(max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_sample_is_exactly_the_origin() {
        for seed in 0..20 {
            let t = generate_trajectory(seed, 1.0).unwrap();
            assert_eq!(t.samples[0], [0.0; 3]);
            assert_eq!(t.samples.len(), TRAJECTORY_SAMPLES);
        }
    }

    #[test]
    fn samples_lie_on_the_spline() {
        let t = generate_trajectory(3, 2.0).unwrap();
        for (i, s) in t.samples.iter().enumerate() {
            let u = i as f64 / (TRAJECTORY_SAMPLES - 1) as f64;
            let p = spline_eval(&t.control_points, u).unwrap();
            for a in 0..3 {
                assert!((p[a] - s[a]).abs() < 1e-9, "sample {i} axis {a}");
            }
        }
    }

    #[test]
    fn step_cap_holds_over_a_hundred_trajectories() {
        for seed in 0..100 {
            for &mag in &super::super::MAGNITUDE_CLASSES {
                let t = generate_trajectory(seed, mag).unwrap();
                assert!(
                    t.max_step() <= mag * (1.0 + 1e-12),
                    "seed {seed} class {mag}: step {}",
                    t.max_step()
                );
            }
        }
    }

    #[test]
    fn path_length_floor_holds() {
        for seed in 0..100 {
            let t = generate_trajectory(seed, 1.0).unwrap();
            assert!(t.path_length() >= 0.5 - 1e-12, "seed {seed}: {}", t.path_length());
        }
    }

    #[test]
    fn excursion_stays_under_the_cap() {
        for seed in 0..100 {
            let t = generate_trajectory(seed, 2.0).unwrap();
            let e = dense_excursion(&t.control_points).unwrap();
            assert!(
                e <= EXCURSION_CAP_FACTOR * 2.0 + 1e-9,
                "seed {seed}: excursion {e}"
            );
        }
    }

    #[test]
    fn vanishing_magnitude_gives_vanishing_motion() {
        let t = generate_trajectory(7, 1e-9).unwrap();
        for s in &t.samples {
            assert!(norm3(*s) <= EXCURSION_CAP_FACTOR * 1e-9);
        }
        let zero = generate_trajectory(7, 0.0).unwrap();
        for s in &zero.samples {
            assert_eq!(*s, [0.0; 3]);
        }
    }

    #[test]
    fn same_seed_reproduces_the_trajectory() {
        let a = generate_trajectory(11, 1.0).unwrap();
        let b = generate_trajectory(11, 1.0).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.control_points, b.control_points);
    }

    #[test]
    fn negative_magnitude_rejected() {
        assert!(generate_trajectory(1, -0.5).is_err());
    }
}
