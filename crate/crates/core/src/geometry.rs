//! Scene geometry and the Doppler <-> velocity relations for the direct and
//! IRS-reflected links.
//!
//! All angles are in radians and measured from the positive x-axis, which is
//! also the axis both uniform linear arrays lie along.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this |cos(heading - theta_tb)| the speed is read from the IRS-link
/// Doppler instead of the direct-link one.
pub const PERPENDICULAR_EPS: f64 = 1e-6;

/// |sin| of the half bistatic angle below which the scene is treated as
/// degenerate (BS, IRS and target collinear with the target outside the
/// BS-IRS segment).
const BISTATIC_EPS: f64 = 1e-12;

/// A point in the plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Direction of the ray from `self` to `other`, in (-pi, pi].
    pub fn bearing_to(&self, other: &Point) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }

    pub fn distance_to(&self, other: &Point) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from(p: [f64; 2]) -> Self {
        Self::new(p[0], p[1])
    }
}

/// Positions of the base station, the IRS and the target together with the
/// four aspect angles derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneGeometry {
    pub bs_position: Point,
    pub irs_position: Point,
    pub target_position: Point,
    /// Direction of the target seen from the BS.
    pub theta_tb: f64,
    /// Direction of the target seen from the IRS.
    pub theta_it: f64,
    /// Direction of the IRS seen from the BS.
    pub theta_bi: f64,
    /// Direction of the BS seen from the IRS.
    pub theta_ib: f64,
}

impl SceneGeometry {
    /// Builds the scene from three positions.
    pub fn from_positions(bs: Point, irs: Point, target: Point) -> Result<Self> {
        angles_from_positions(bs, irs, target)
    }

    /// Places the target at the intersection of the ray leaving the BS at
    /// `theta_tb` and the ray leaving the IRS at `theta_it`.
    pub fn from_angles(bs: Point, irs: Point, theta_tb: f64, theta_it: f64) -> Result<Self> {
        // bs + s * u = irs + t * w, solved for (s, t) by Cramer's rule.
        let (u, w) = ((theta_tb.cos(), theta_tb.sin()), (theta_it.cos(), theta_it.sin()));
        let det = -u.0 * w.1 + u.1 * w.0;
        if det.abs() < 1e-12 {
            return Err(Error::DegenerateGeometry(
                "rays from BS and IRS toward the target are parallel".into(),
            ));
        }
        let (dx, dy) = (irs.x - bs.x, irs.y - bs.y);
        let s = (-dx * w.1 + dy * w.0) / det;
        let t = (u.0 * dy - u.1 * dx) / det;
        if s <= 0.0 || t <= 0.0 {
            return Err(Error::DegenerateGeometry(format!(
                "rays intersect behind the {}",
                if s <= 0.0 { "BS" } else { "IRS" }
            )));
        }
        let target = Point::new(bs.x + s * u.0, bs.y + s * u.1);
        angles_from_positions(bs, irs, target)
    }

    /// Half the bistatic angle, (theta_it - theta_tb) / 2.
    pub fn half_bistatic(&self) -> f64 {
        0.5 * (self.theta_it - self.theta_tb)
    }
}

/// Derives the four aspect angles from the three positions.
pub fn angles_from_positions(bs: Point, irs: Point, target: Point) -> Result<SceneGeometry> {
    let coincident = |a: &Point, b: &Point| a.distance_to(b) <= 1e-12 * (1.0 + a.x.abs().max(a.y.abs()));
    if coincident(&bs, &irs) || coincident(&bs, &target) || coincident(&irs, &target) {
        return Err(Error::DegenerateGeometry("BS, IRS and target must be pairwise distinct".into()));
    }
    let scene = SceneGeometry {
        bs_position: bs,
        irs_position: irs,
        target_position: target,
        theta_tb: bs.bearing_to(&target),
        theta_it: irs.bearing_to(&target),
        theta_bi: bs.bearing_to(&irs),
        theta_ib: irs.bearing_to(&bs),
    };
    check_bistatic(scene.theta_tb, scene.theta_it)?;
    Ok(scene)
}

fn check_bistatic(theta_tb: f64, theta_it: f64) -> Result<()> {
    if (0.5 * (theta_it - theta_tb)).sin().abs() < BISTATIC_EPS {
        return Err(Error::DegenerateGeometry(
            "target, BS and IRS are aligned so the two links see the same projection".into(),
        ));
    }
    Ok(())
}

/// Planar velocity in polar form. Speed is non-negative, heading in [0, 2pi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityVector {
    speed: f64,
    heading: f64,
}

impl VelocityVector {
    /// A negative speed is folded into the heading.
    pub fn new(speed: f64, heading: f64) -> Self {
        let (speed, heading) = if speed < 0.0 { (-speed, heading + PI) } else { (speed, heading) };
        Self { speed, heading: wrap_angle(heading) }
    }

    pub fn zero() -> Self {
        Self { speed: 0.0, heading: 0.0 }
    }

    pub fn from_cartesian(vx: f64, vy: f64) -> Self {
        let speed = vx.hypot(vy);
        if speed == 0.0 {
            return Self::zero();
        }
        Self::new(speed, vy.atan2(vx))
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn cartesian(&self) -> [f64; 2] {
        [self.speed * self.heading.cos(), self.speed * self.heading.sin()]
    }

    /// Euclidean distance between the two vectors, m/s.
    pub fn distance(&self, other: &VelocityVector) -> f64 {
        let (a, b) = (self.cartesian(), other.cartesian());
        (a[0] - b[0]).hypot(a[1] - b[1])
    }
}

/// Wraps an angle into [0, 2pi).
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Doppler frequencies of the direct link and the IRS link, Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DopplerPair {
    pub mu_d: f64,
    pub mu_r: f64,
}

impl DopplerPair {
    pub const fn new(mu_d: f64, mu_r: f64) -> Self {
        Self { mu_d, mu_r }
    }

    /// Checks the per-symbol phase advance of both tones stays inside half a cycle.
    pub fn check_unambiguous(&self, symbol_period_s: f64) -> Result<()> {
        for (name, mu) in [("mu_d", self.mu_d), ("mu_r", self.mu_r)] {
            if !mu.is_finite() || (mu * symbol_period_s).abs() >= 0.5 {
                return Err(Error::Config(format!(
                    "{name} = {mu} Hz aliases at symbol period {symbol_period_s} s (|mu*Ts| must be < 1/2)"
                )));
            }
        }
        Ok(())
    }
}

/// Intermediate angles of the IRS-link Doppler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrsDoppler {
    pub mu_r: f64,
    /// Angle between the velocity and the bisector of the BS-target-IRS angle.
    pub theta1: f64,
    /// Half the bistatic angle.
    pub theta2: f64,
}

/// One-way Doppler of the target relative to the BS.
pub fn doppler_target_bs(v: &VelocityVector, theta_tb: f64, wavelength: f64) -> f64 {
    v.speed() * (v.heading() - theta_tb).cos() / wavelength
}

/// One-way Doppler of the target relative to the IRS.
pub fn doppler_irs_target(v: &VelocityVector, theta_it: f64, wavelength: f64) -> f64 {
    v.speed() * (theta_it - v.heading()).cos() / wavelength
}

/// Round-trip Doppler of the direct BS-target-BS link.
pub fn doppler_direct(v: &VelocityVector, theta_tb: f64, wavelength: f64) -> f64 {
    2.0 * v.speed() * (v.heading() - theta_tb).cos() / wavelength
}

/// Doppler of the BS-target-IRS link, written as a product of two
/// projections: onto the bistatic bisector, then onto either leg.
pub fn doppler_irs(v: &VelocityVector, theta_tb: f64, theta_it: f64, wavelength: f64) -> IrsDoppler {
    let theta1 = 0.5 * (theta_tb + theta_it) - v.heading();
    let theta2 = 0.5 * (theta_it - theta_tb);
    IrsDoppler {
        mu_r: 2.0 * v.speed() / wavelength * theta1.cos() * theta2.cos(),
        theta1,
        theta2,
    }
}

/// Doppler pair produced by velocity `v` in the given scene.
pub fn forward_dopplers(v: &VelocityVector, scene: &SceneGeometry, wavelength: f64) -> DopplerPair {
    DopplerPair::new(
        doppler_direct(v, scene.theta_tb, wavelength),
        doppler_irs(v, scene.theta_tb, scene.theta_it, wavelength).mu_r,
    )
}

/// Closed-form inverse of the two Doppler maps.
///
/// The heading comes from the ratio mu_d / mu_r through the principal
/// arctangent branch; the speed from the direct link unless the motion is
/// within [`PERPENDICULAR_EPS`] of tangential, in which case the IRS-link
/// form is used. A negative speed is folded back by rotating the heading by
/// pi, so the whole heading circle is reachable.
pub fn recover_velocity(
    mu: DopplerPair,
    theta_tb: f64,
    theta_it: f64,
    wavelength: f64,
) -> Result<VelocityVector> {
    if !(wavelength > 0.0) {
        return Err(Error::Input(format!("wavelength must be positive, got {wavelength}")));
    }
    check_bistatic(theta_tb, theta_it)?;
    if mu.mu_d == 0.0 && mu.mu_r == 0.0 {
        return Ok(VelocityVector::zero());
    }
    if mu.mu_r == 0.0 {
        return Err(Error::UnrecoverableVelocity(
            "IRS-link Doppler is zero, heading ratio undefined".into(),
        ));
    }
    let theta2 = 0.5 * (theta_it - theta_tb);
    let bisector = 0.5 * (theta_tb + theta_it);
    let ratio = 1.0 - mu.mu_d / mu.mu_r;
    if !ratio.is_finite() {
        return Err(Error::UnrecoverableVelocity(format!("Doppler ratio not finite: {mu:?}")));
    }
    // Principal branch: heading - bisector in (-pi/2, pi/2).
    let heading = (ratio / theta2.tan()).atan() + bisector;

    let radial = (heading - theta_tb).cos();
    let speed = if radial.abs() >= PERPENDICULAR_EPS {
        0.5 * wavelength * mu.mu_d / radial
    } else {
        let theta1 = bisector - heading;
        0.5 * wavelength * mu.mu_r / (theta1.cos() * theta2.cos())
    };
    if !speed.is_finite() {
        return Err(Error::UnrecoverableVelocity(format!("speed not finite for {mu:?}")));
    }
    Ok(VelocityVector::new(speed, heading))
}

/// Velocity estimate available to a lone mono-static BS: the radial
/// component along the BS-target line.
pub fn radial_velocity_no_irs(mu_d: f64, theta_tb: f64, wavelength: f64) -> VelocityVector {
    let radial_speed = 0.5 * wavelength * mu_d;
    VelocityVector::from_cartesian(radial_speed * theta_tb.cos(), radial_speed * theta_tb.sin())
}
