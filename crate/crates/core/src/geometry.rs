//! Field-of-operation geometry.
//!
//! The reachable region of the manipulator is approximated by the shell
//! between two spheres centred on the robot base. A recognised direction is
//! turned into a single pose increment that carries the tool from its current
//! position to the first shell boundary met along that direction.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used when checking that a commanded point lies on or
/// inside the shell.
pub const BOUNDARY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("direction vector has zero length")]
    ZeroDirection,
    #[error("direction must be a signed unit basis vector, got {0:?}")]
    NotBasisDirection(Vec3),
    #[error("position {0:?} lies outside the field of operation")]
    OutsideWorkspace(Vec3),
    #[error("rotation {value} deg about {axis:?} is outside [{min}, {max}]")]
    RotationOutOfLimits { axis: Axis, value: f64, min: f64, max: f64 },
    #[error("no boundary intersection along the requested direction")]
    NoBoundaryHit,
    #[error("invalid workspace: {0}")]
    InvalidWorkspace(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Returns the axis and sign when `self` is exactly `±e_x`, `±e_y` or `±e_z`.
    pub fn as_signed_axis(self) -> Option<(Axis, Sign)> {
        let comps = self.to_array();
        let nonzero: Vec<usize> = (0..3).filter(|&i| comps[i] != 0.0).collect();
        match nonzero.as_slice() {
            [i] if comps[*i] == 1.0 => Some((Axis::ALL[*i], Sign::Positive)),
            [i] if comps[*i] == -1.0 => Some((Axis::ALL[*i], Sign::Negative)),
            _ => None,
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn unit(self) -> Vec3 {
        let mut a = [0.0; 3];
        a[self.index()] = 1.0;
        Vec3::from_array(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

/// Tool pose: position in mm and rotation about X, Y, Z in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub rotation: [f64; 3],
}

impl Pose {
    pub fn new(position: Vec3, rotation: [f64; 3]) -> Self {
        Self { position, rotation }
    }

    pub fn at(position: Vec3) -> Self {
        Self::new(position, [0.0; 3])
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.rotation.iter().all(|r| r.is_finite())
    }

    /// Pose reached after applying `inc` to `self`.
    pub fn offset_by(&self, inc: &PoseIncrement) -> Pose {
        let t = inc.translation();
        let r = inc.rotation();
        Pose::new(
            self.position + t,
            [
                self.rotation[0] + r[0],
                self.rotation[1] + r[1],
                self.rotation[2] + r[2],
            ],
        )
    }
}

/// Relative motion `[i1..i6]`: translation along X, Y, Z in mm followed by
/// rotation about X, Y, Z in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseIncrement(pub [f64; 6]);

impl PoseIncrement {
    pub fn translation(&self) -> Vec3 {
        Vec3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn rotation(&self) -> [f64; 3] {
        [self.0[3], self.0[4], self.0[5]]
    }

    pub fn nonzero_count(&self) -> usize {
        self.0.iter().filter(|v| **v != 0.0).count()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn is_translation(&self) -> bool {
        self.0[3..].iter().all(|v| *v == 0.0)
    }

    pub fn scaled(&self, k: f64) -> PoseIncrement {
        PoseIncrement(self.0.map(|v| v * k))
    }
}

/// Spherical shell plus per-axis rotation limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    r_int: f64,
    r_ext: f64,
    rot_limits: [(f64, f64); 3],
    backoff: f64,
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            r_int: 500.0,
            r_ext: 2000.0,
            rot_limits: [(-170.0, 170.0); 3],
            backoff: 0.999,
        }
    }
}

impl Workspace {
    pub fn new(r_int: f64, r_ext: f64) -> Result<Self, GeometryError> {
        Self::with_limits(r_int, r_ext, [(-170.0, 170.0); 3], 0.999)
    }

    /// `backoff` scales translation increments when they are turned into
    /// robot commands, so the commanded point stays strictly inside the shell.
    pub fn with_limits(
        r_int: f64,
        r_ext: f64,
        rot_limits: [(f64, f64); 3],
        backoff: f64,
    ) -> Result<Self, GeometryError> {
        if !(r_int.is_finite() && r_ext.is_finite() && r_int > 0.0 && r_ext > r_int) {
            return Err(GeometryError::InvalidWorkspace(format!(
                "radii must satisfy r_ext > r_int > 0, got r_int={r_int} r_ext={r_ext}"
            )));
        }
        for (axis, (lo, hi)) in Axis::ALL.iter().zip(rot_limits) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(GeometryError::InvalidWorkspace(format!(
                    "rotation limits for {axis:?} must satisfy min < max, got ({lo}, {hi})"
                )));
            }
        }
        if !(backoff > 0.0 && backoff <= 1.0) {
            return Err(GeometryError::InvalidWorkspace(format!(
                "backoff must lie in (0, 1], got {backoff}"
            )));
        }
        Ok(Self {
            r_int,
            r_ext,
            rot_limits,
            backoff,
        })
    }

    pub fn r_int(&self) -> f64 {
        self.r_int
    }

    pub fn r_ext(&self) -> f64 {
        self.r_ext
    }

    pub fn rot_limits(&self) -> [(f64, f64); 3] {
        self.rot_limits
    }

    pub fn backoff(&self) -> f64 {
        self.backoff
    }

    /// Exact membership test; both spherical boundaries count as inside.
    pub fn contains(&self, p: Vec3) -> bool {
        let n2 = p.norm_squared();
        self.r_int * self.r_int <= n2 && n2 <= self.r_ext * self.r_ext
    }

    /// Membership with each boundary relaxed by `BOUNDARY_TOLERANCE` of its radius.
    pub fn contains_with_tolerance(&self, p: Vec3) -> bool {
        let n = p.norm();
        n >= self.r_int * (1.0 - BOUNDARY_TOLERANCE) && n <= self.r_ext * (1.0 + BOUNDARY_TOLERANCE)
    }

    /// True when every point of the straight segment `a → b` is inside the
    /// (tolerance-relaxed) shell. The outer ball is convex, so the endpoints
    /// settle that side; the inner side needs the point closest to the origin.
    pub fn segment_inside(&self, a: Vec3, b: Vec3) -> bool {
        if !(self.contains_with_tolerance(a) && self.contains_with_tolerance(b)) {
            return false;
        }
        let ab = b - a;
        let len2 = ab.norm_squared();
        let closest = if len2 == 0.0 {
            a
        } else {
            let s = (-a.dot(ab) / len2).clamp(0.0, 1.0);
            a + ab * s
        };
        closest.norm() >= self.r_int * (1.0 - BOUNDARY_TOLERANCE)
    }

    pub fn rotation_within_limits(&self, axis: Axis, value: f64) -> bool {
        let (lo, hi) = self.rot_limits[axis.index()];
        lo <= value && value <= hi
    }
}

/// Smallest `k > 0` with `‖origin + k·dir‖ = radius`, or `None` when the
/// line has no positive root.
pub fn ray_sphere_hit(origin: Vec3, dir: Vec3, radius: f64) -> Result<Option<f64>, GeometryError> {
    let a = dir.norm_squared();
    if a == 0.0 || !a.is_finite() {
        return Err(GeometryError::ZeroDirection);
    }
    // a·k² + 2·h·k + c = 0 with h the half linear coefficient.
    let h = origin.dot(dir);
    let c = (origin.norm() - radius) * (origin.norm() + radius);
    let disc = h * h - a * c;
    if disc < 0.0 {
        return Ok(None);
    }
    let sq = disc.sqrt();
    // Pair the square root with h's sign so no cancellation happens in q.
    let q = if h >= 0.0 { -(h + sq) } else { -h + sq };
    let mut roots = [f64::NAN, f64::NAN];
    if q != 0.0 {
        roots = [q / a, c / q];
    } else if c == 0.0 {
        // Origin on the sphere, direction tangent: double root at zero.
        roots = [0.0, 0.0];
    }
    Ok(roots
        .into_iter()
        .filter(|k| k.is_finite() && *k > 0.0)
        .min_by(|x, y| x.total_cmp(y)))
}

/// Increment that moves the tool from `current` along the signed basis
/// direction `d` to the first shell boundary. The inner sphere wins when the
/// line meets it ahead of the tool; otherwise the outer sphere limits.
pub fn translation_increment(current: &Pose, d: Vec3, w: &Workspace) -> Result<PoseIncrement, GeometryError> {
    if d.norm_squared() == 0.0 {
        return Err(GeometryError::ZeroDirection);
    }
    if d.as_signed_axis().is_none() {
        return Err(GeometryError::NotBasisDirection(d));
    }
    let origin = current.position;
    if !origin.is_finite() || !w.contains_with_tolerance(origin) {
        return Err(GeometryError::OutsideWorkspace(origin));
    }
    let k = match ray_sphere_hit(origin, d, w.r_int)? {
        Some(k) => k,
        None => ray_sphere_hit(origin, d, w.r_ext)?.ok_or(GeometryError::NoBoundaryHit)?,
    };
    let t = d * k;
    Ok(PoseIncrement([t.x, t.y, t.z, 0.0, 0.0, 0.0]))
}

/// Increment that rotates about `axis` in direction `sign` up to the
/// configured limit on that axis.
pub fn rotation_increment(
    current: &Pose,
    axis: Axis,
    sign: Sign,
    w: &Workspace,
) -> Result<PoseIncrement, GeometryError> {
    let i = axis.index();
    let value = current.rotation[i];
    let (lo, hi) = w.rot_limits[i];
    if !value.is_finite() || !w.rotation_within_limits(axis, value) {
        return Err(GeometryError::RotationOutOfLimits {
            axis,
            value,
            min: lo,
            max: hi,
        });
    }
    let limit = match sign {
        Sign::Positive => hi,
        Sign::Negative => lo,
    };
    let mut inc = [0.0; 6];
    inc[3 + i] = limit - value;
    Ok(PoseIncrement(inc))
}
