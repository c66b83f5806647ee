//! Attitude kinematics for the truth model and the model-based consistency check.
//!
//! Quaternions are scalar-last `(x, y, z, w)` and describe body-to-inertial rotations. Body
//! rates compose on the right: `q(t + dt) = q(t) ⊗ exp(omega * dt / 2)`.

use rand::Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = [f64; 3];

/// Accepted deviation from unit norm on inputs.
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttitudeError {
    #[error("non-finite attitude input")]
    NonFinite,
    #[error("quaternion norm {0} is not unit")]
    NotUnit(f64),
    #[error("rotation axis has zero length")]
    ZeroAxis,
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("body rate {rate} rad/s exceeds the configured maximum {max} rad/s")]
    RateTooHigh { rate: f64, max: f64 },
}

fn norm3(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn finite3(v: Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Quaternion {
    pub const IDENTITY: Self = Self {
        x: 0.0,
        y: 0.0,
        z: 0.0,
        w: 1.0,
    };

    pub const fn new(x: f64, y: f64, z: f64, w: f64) -> Self {
        Self { x, y, z, w }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.z, self.w]
    }

    /// Rotation of `angle` radians about `axis`. The axis is normalized.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self, AttitudeError> {
        if !finite3(axis) || !angle.is_finite() {
            return Err(AttitudeError::NonFinite);
        }
        let n = norm3(axis);
        if n < 1e-12 {
            return Err(AttitudeError::ZeroAxis);
        }
        let (s, c) = (angle / 2.0).sin_cos();
        Ok(Self::new(axis[0] / n * s, axis[1] / n * s, axis[2] / n * s, c))
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z + self.w * other.w
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self::new(self.x / n, self.y / n, self.z / n, self.w / n)
    }

    pub fn conjugate(self) -> Self {
        Self::new(-self.x, -self.y, -self.z, self.w)
    }

    /// Representative with `w >= 0`.
    pub fn canonical(self) -> Self {
        if self.w < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn check_unit(&self) -> Result<(), AttitudeError> {
        if !self.is_finite() {
            return Err(AttitudeError::NonFinite);
        }
        let n = self.norm();
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(AttitudeError::NotUnit(n));
        }
        Ok(())
    }
}

impl std::ops::Neg for Quaternion {
    type Output = Self;

    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z, -self.w)
    }
}

/// Hamilton product `self ⊗ rhs`.
impl std::ops::Mul for Quaternion {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (self, rhs);
        Self::new(
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        )
    }
}

/// Rotation angle between two attitudes, in `[0, pi]`. `q` and `-q` are the same rotation.
pub fn angular_distance(a: &Quaternion, b: &Quaternion) -> Result<f64, AttitudeError> {
    a.check_unit()?;
    b.check_unit()?;
    // 2·acos(|<a,b>|) written via atan2 of the relative rotation, which stays accurate near 0.
    let r = a.conjugate() * *b;
    let v = norm3([r.x, r.y, r.z]);
    Ok(2.0 * v.atan2(r.w.abs()))
}

/// `q` followed by an extra body-frame rotation of `angle` about `axis`.
pub fn rotate_by(q: &Quaternion, axis: Vec3, angle: f64) -> Result<Quaternion, AttitudeError> {
    if !q.is_finite() {
        return Err(AttitudeError::NonFinite);
    }
    let r = Quaternion::from_axis_angle(axis, angle)?;
    Ok((*q * r).normalized())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttitudeState {
    pub q: Quaternion,
    /// Body rates, rad/s.
    pub omega: Vec3,
    /// Seconds since simulation start.
    pub t: f64,
}

impl AttitudeState {
    pub fn new(q: Quaternion, omega: Vec3, t: f64) -> Self {
        Self { q, omega, t }
    }
}

/// Constant-rate closed-form propagation: rotate by `|omega|·dt` about `omega/|omega|`.
pub fn propagate(state: &AttitudeState, dt: f64) -> Result<AttitudeState, AttitudeError> {
    if !dt.is_finite() || !state.q.is_finite() || !finite3(state.omega) || !state.t.is_finite() {
        return Err(AttitudeError::NonFinite);
    }
    if dt <= 0.0 {
        return Err(AttitudeError::NonPositiveStep(dt));
    }
    let rate = norm3(state.omega);
    let q = if rate == 0.0 {
        state.q
    } else {
        let step = Quaternion::from_axis_angle(state.omega, rate * dt)?;
        (state.q * step).normalized()
    };
    Ok(AttitudeState {
        q,
        omega: state.omega,
        t: state.t + dt,
    })
}

/// Adds zero-mean small-angle noise: a rotation about a uniformly random axis with a normally
/// distributed angle of standard deviation `sigma` radians.
pub fn perturb<R: Rng + ?Sized>(q: &Quaternion, sigma: f64, rng: &mut R) -> Quaternion {
    if sigma <= 0.0 {
        return *q;
    }
    let axis: [f64; 3] = UnitSphere.sample(rng);
    let angle = Normal::new(0.0, sigma).map(|n| n.sample(rng)).unwrap_or(0.0);
    rotate_by(q, axis, angle).unwrap_or(*q)
}

/// A body-rate change taking effect at `tick`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateChange {
    pub tick: u64,
    pub omega: Vec3,
}

/// Piecewise-constant body-rate profile shared by the truth model and the model checker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateProfile {
    pub initial: Vec3,
    /// Sorted by tick.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub changes: Vec<RateChange>,
}

impl RateProfile {
    pub fn constant(omega: Vec3) -> Self {
        Self {
            initial: omega,
            changes: Vec::new(),
        }
    }

    pub fn rate_at(&self, tick: u64) -> Vec3 {
        self.changes
            .iter()
            .take_while(|c| c.tick <= tick)
            .last()
            .map(|c| c.omega)
            .unwrap_or(self.initial)
    }

    pub fn max_rate(&self) -> f64 {
        std::iter::once(self.initial)
            .chain(self.changes.iter().map(|c| c.omega))
            .map(norm3)
            .fold(0.0, f64::max)
    }

    /// Propagates `q` from `from_tick` to `to_tick`, splitting at rate changes.
    pub fn propagate_between(
        &self,
        q: &Quaternion,
        from_tick: u64,
        to_tick: u64,
        tick_seconds: f64,
    ) -> Result<Quaternion, AttitudeError> {
        let mut q = *q;
        let mut t = from_tick;
        while t < to_tick {
            let next = self
                .changes
                .iter()
                .map(|c| c.tick)
                .find(|&ct| ct > t)
                .map_or(to_tick, |ct| ct.min(to_tick));
            let state = AttitudeState::new(q, self.rate_at(t), 0.0);
            q = propagate(&state, (next - t) as f64 * tick_seconds)?.q;
            t = next;
        }
        Ok(q)
    }
}

/// Ground-truth attitude, advanced one tick at a time by the simulation loop.
#[derive(Debug, Clone)]
pub struct TruthModel {
    state: AttitudeState,
    profile: RateProfile,
    tick: u64,
    tick_seconds: f64,
}

impl TruthModel {
    pub fn new(q0: Quaternion, profile: RateProfile, tick_seconds: f64, max_rate: f64) -> Result<Self, AttitudeError> {
        q0.check_unit()?;
        let rate = profile.max_rate();
        if !rate.is_finite() {
            return Err(AttitudeError::NonFinite);
        }
        if rate > max_rate {
            return Err(AttitudeError::RateTooHigh { rate, max: max_rate });
        }
        Ok(Self {
            state: AttitudeState::new(q0.normalized(), profile.rate_at(0), 0.0),
            profile,
            tick: 0,
            tick_seconds,
        })
    }

    pub fn state(&self) -> &AttitudeState {
        &self.state
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn advance(&mut self) -> Result<(), AttitudeError> {
        self.state.omega = self.profile.rate_at(self.tick);
        let mut next = propagate(&self.state, self.tick_seconds)?;
        self.tick += 1;
        next.omega = self.profile.rate_at(self.tick);
        next.t = self.tick as f64 * self.tick_seconds;
        self.state = next;
        Ok(())
    }
}
