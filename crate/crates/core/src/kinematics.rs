//! Node motion state, constant-velocity integration, unit-disk range tests
//! and link expiration time prediction.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative velocity magnitude squared, in (m/s)², below which two nodes are
/// treated as co-moving and their link never expires.
pub const EPS_REL_VELOCITY: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("time step must be non-negative, got {0}")]
    NegativeStep(f64),
    #[error("nodes are {distance} m apart, outside range {range} m")]
    OutOfRange { distance: f64, range: f64 },
}

/// Position (meters), speed (m/s) and heading (radians from +x) of a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeKinematics {
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub heading: f64,
}

impl NodeKinematics {
    /// Builds a motion state, clamping speed at zero and wrapping the heading
    /// into `[0, 2π)`.
    pub fn new(x: f64, y: f64, speed: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            speed: speed.max(0.0),
            heading: normalize_heading(heading),
        }
    }

    pub fn stationary(x: f64, y: f64) -> Self {
        Self::new(x, y, 0.0, 0.0)
    }

    pub fn velocity(&self) -> (f64, f64) {
        (
            self.speed * self.heading.cos(),
            self.speed * self.heading.sin(),
        )
    }

    pub fn distance_to(&self, other: &NodeKinematics) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Same position, new speed and heading.
    pub fn with_velocity(&self, speed: f64, heading: f64) -> Self {
        Self::new(self.x, self.y, speed, heading)
    }
}

pub fn normalize_heading(heading: f64) -> f64 {
    let h = heading.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if h >= TAU {
        0.0
    } else {
        h
    }
}

/// Unit-disk radio: transmission range and per-hop delivery latency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioModel {
    pub range: f64,
    #[serde(default)]
    pub hop_delay: f64,
    /// Link bandwidth (Mbit/s) used when no per-link value is tabulated.
    #[serde(default = "default_link_bandwidth")]
    pub link_bandwidth: f64,
}

fn default_link_bandwidth() -> f64 {
    1.0
}

impl RadioModel {
    pub fn new(range: f64, hop_delay: f64) -> Self {
        Self {
            range,
            hop_delay,
            link_bandwidth: default_link_bandwidth(),
        }
    }
}

/// Moves a node along its heading for `dt` seconds.
pub fn advance(k: &NodeKinematics, dt: f64) -> Result<NodeKinematics, KinematicsError> {
    if dt < 0.0 || dt.is_nan() {
        return Err(KinematicsError::NegativeStep(dt));
    }
    if dt == 0.0 || k.speed == 0.0 {
        return Ok(*k);
    }
    let (vx, vy) = k.velocity();
    Ok(NodeKinematics {
        x: k.x + vx * dt,
        y: k.y + vy * dt,
        ..*k
    })
}

/// Inclusive unit-disk connectivity test.
pub fn in_range(ki: &NodeKinematics, kj: &NodeKinematics, radio: &RadioModel) -> bool {
    ki.distance_to(kj) <= radio.range
}

/// Predicted time until two constant-velocity nodes drift beyond radio range.
///
/// Returns `f64::INFINITY` for co-moving nodes. With relative velocity
/// `(a, c)` and relative position `(b, d)` the exit time is the positive root
/// of `|(b, d) + t (a, c)|² = r²`:
///
/// `LET = (-(ab + cd) + sqrt((a² + c²) r² - (ad - bc)²)) / (a² + c²)`
pub fn compute_let(
    ki: &NodeKinematics,
    kj: &NodeKinematics,
    radio: &RadioModel,
) -> Result<f64, KinematicsError> {
    let distance = ki.distance_to(kj);
    if distance > radio.range {
        return Err(KinematicsError::OutOfRange {
            distance,
            range: radio.range,
        });
    }
    let (vix, viy) = ki.velocity();
    let (vjx, vjy) = kj.velocity();
    let a = vix - vjx;
    let b = ki.x - kj.x;
    let c = viy - vjy;
    let d = ki.y - kj.y;

    let rel_sq = a * a + c * c;
    if rel_sq < EPS_REL_VELOCITY {
        return Ok(f64::INFINITY);
    }
    let r = radio.range;
    let cross = a * d - b * c;
    let disc = rel_sq * r * r - cross * cross;
    // Cauchy-Schwarz bounds cross² by rel_sq * distance², so only rounding
    // can push the discriminant negative while in range.
    debug_assert!(
        disc >= -1e-9 * rel_sq * r * r,
        "negative discriminant {disc} for in-range pair"
    );
    let q = disc.max(0.0).sqrt();
    Ok(((-(a * b + c * d) + q) / rel_sq).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn radio(r: f64) -> RadioModel {
        RadioModel::new(r, 0.0)
    }

    #[test]
    fn advance_axis_aligned() {
        let k = NodeKinematics::new(0.0, 0.0, 1.0, 0.0);
        let moved = advance(&k, 2.0).unwrap();
        assert_eq!((moved.x, moved.y), (2.0, 0.0));
        assert_eq!(moved.speed, 1.0);
        assert_eq!(moved.heading, 0.0);
    }

    #[test]
    fn advance_zero_dt_and_stationary() {
        let k = NodeKinematics::new(1.5, -2.0, 3.0, 0.4);
        assert_eq!(advance(&k, 0.0).unwrap(), k);
        let still = NodeKinematics::new(3.0, 4.0, 0.0, 1.2);
        let moved = advance(&still, 100.0).unwrap();
        assert_eq!((moved.x, moved.y), (3.0, 4.0));
    }

    #[test]
    fn advance_rejects_negative_dt() {
        let k = NodeKinematics::stationary(0.0, 0.0);
        assert!(matches!(
            advance(&k, -0.1),
            Err(KinematicsError::NegativeStep(_))
        ));
    }

    #[test]
    fn heading_normalization() {
        let k = NodeKinematics::new(0.0, 0.0, 1.0, -std::f64::consts::FRAC_PI_2);
        assert!((k.heading - 1.5 * std::f64::consts::PI).abs() < 1e-12);
        assert!(NodeKinematics::new(0.0, 0.0, 1.0, TAU).heading < TAU);
        assert!(NodeKinematics::new(0.0, 0.0, 1.0, -1e-300).heading < TAU);
        assert_eq!(NodeKinematics::new(0.0, 0.0, -4.0, 0.0).speed, 0.0);
    }

    #[test]
    fn range_boundary_is_inclusive() {
        let o = NodeKinematics::stationary(0.0, 0.0);
        assert!(in_range(&o, &o, &radio(10.0)));
        assert!(in_range(&o, &NodeKinematics::stationary(10.0, 0.0), &radio(10.0)));
        assert!(!in_range(&o, &NodeKinematics::stationary(10.01, 0.0), &radio(10.0)));
    }

    #[test]
    fn let_comoving_is_infinite() {
        let k = NodeKinematics::new(0.0, 0.0, 5.0, 0.7);
        assert_eq!(compute_let(&k, &k, &radio(10.0)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn let_unit_speed_separation() {
        let ki = NodeKinematics::stationary(0.0, 0.0);
        let kj = NodeKinematics::new(0.0, 0.0, 1.0, 0.0);
        let t = compute_let(&ki, &kj, &radio(10.0)).unwrap();
        assert!((t - 10.0).abs() < 1e-12, "{t}");
    }

    #[test]
    fn let_head_on_approach_passes_through() {
        // j starts 5 m to the right moving left at 1 m/s; exits on the far side at x = -10
        let ki = NodeKinematics::stationary(0.0, 0.0);
        let kj = NodeKinematics::new(5.0, 0.0, 1.0, std::f64::consts::PI);
        let t = compute_let(&ki, &kj, &radio(10.0)).unwrap();
        assert!((t - 15.0).abs() < 1e-9, "{t}");
    }

    #[test]
    fn let_out_of_range_is_error() {
        let ki = NodeKinematics::stationary(0.0, 0.0);
        let kj = NodeKinematics::stationary(20.0, 0.0);
        assert!(matches!(
            compute_let(&ki, &kj, &radio(10.0)),
            Err(KinematicsError::OutOfRange { .. })
        ));
    }

    fn arb_pair() -> impl Strategy<Value = (NodeKinematics, NodeKinematics)> {
        (
            -50.0..50.0f64,
            -50.0..50.0f64,
            0.0..20.0f64,
            0.0..TAU,
            0.0..1.0f64,
            0.0..TAU,
            0.0..20.0f64,
            0.0..TAU,
        )
            .prop_map(|(x, y, vi, hi, rho, phi, vj, hj)| {
                let ki = NodeKinematics::new(x, y, vi, hi);
                let dist = 100.0 * rho.sqrt();
                let kj = NodeKinematics::new(x + dist * phi.cos(), y + dist * phi.sin(), vj, hj);
                (ki, kj)
            })
    }

    proptest! {
        #[test]
        fn let_is_symmetric((ki, kj) in arb_pair()) {
            let r = radio(100.0);
            let a = compute_let(&ki, &kj, &r).unwrap();
            let b = compute_let(&kj, &ki, &r).unwrap();
            if a.is_infinite() {
                prop_assert!(b.is_infinite());
            } else {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }

        #[test]
        fn let_brackets_range_exit((ki, kj) in arb_pair()) {
            let r = radio(100.0);
            let t = compute_let(&ki, &kj, &r).unwrap();
            prop_assume!(t.is_finite() && t > 1e-3);
            let eps = 1e-6 * t;
            let before_i = advance(&ki, t - eps).unwrap();
            let before_j = advance(&kj, t - eps).unwrap();
            let after_i = advance(&ki, t + eps).unwrap();
            let after_j = advance(&kj, t + eps).unwrap();
            prop_assert!(in_range(&before_i, &before_j, &r));
            prop_assert!(!in_range(&after_i, &after_j, &r));
        }

        #[test]
        fn let_translation_invariant((ki, kj) in arb_pair(), dx in -1e3..1e3f64, dy in -1e3..1e3f64) {
            let r = radio(100.0);
            let shift = |k: &NodeKinematics| NodeKinematics { x: k.x + dx, y: k.y + dy, ..*k };
            let a = compute_let(&ki, &kj, &r).unwrap();
            let b = compute_let(&shift(&ki), &shift(&kj), &r).unwrap();
            if a.is_infinite() {
                prop_assert!(b.is_infinite());
            } else {
                prop_assert!((a - b).abs() <= 1e-6 * a.max(1.0), "{} vs {}", a, b);
            }
        }

        #[test]
        fn let_infinite_iff_negligible_relative_velocity((ki, kj) in arb_pair()) {
            let (vix, viy) = ki.velocity();
            let (vjx, vjy) = kj.velocity();
            let rel = (vix - vjx).powi(2) + (viy - vjy).powi(2);
            let t = compute_let(&ki, &kj, &radio(100.0)).unwrap();
            prop_assert_eq!(t.is_infinite(), rel < EPS_REL_VELOCITY);
        }
    }
}
