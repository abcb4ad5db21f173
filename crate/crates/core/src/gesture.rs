//! Gesture and posture classes recognised from the right arm.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Axis, Sign, Vec3};

/// The twelve trainable classes plus `Unknown`.
///
/// The discriminant of a trainable class is its output-neuron index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GestureClass {
    Xp = 0,
    Xn,
    Yp,
    Yn,
    Zp,
    Zn,
    Rxp,
    Rxn,
    Ryp,
    Ryn,
    Rzp,
    Rzn,
    Unknown,
}

pub const NUM_CLASSES: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassError {
    #[error("unknown class label {0:?}")]
    BadLabel(String),
    #[error("class index {0} out of range")]
    BadIndex(usize),
    #[error("UNKNOWN has no motion")]
    NoMotion,
}

/// What a recognised class asks the robot to do.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    Translation(Vec3),
    Rotation(Axis, Sign),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassKind {
    /// X±, Y±, Z±: dynamic arm movement.
    Translation,
    /// Rx±, Ry±: static orientation read from gravity.
    Posture,
    /// Rz±: twisting about the gravity axis.
    Twist,
}

impl GestureClass {
    /// Trainable classes in output-neuron order.
    pub const ALL: [GestureClass; NUM_CLASSES] = [
        GestureClass::Xp,
        GestureClass::Xn,
        GestureClass::Yp,
        GestureClass::Yn,
        GestureClass::Zp,
        GestureClass::Zn,
        GestureClass::Rxp,
        GestureClass::Rxn,
        GestureClass::Ryp,
        GestureClass::Ryn,
        GestureClass::Rzp,
        GestureClass::Rzn,
    ];

    pub fn from_index(i: usize) -> Result<Self, ClassError> {
        Self::ALL.get(i).copied().ok_or(ClassError::BadIndex(i))
    }

    /// Output-neuron index, `None` for `Unknown`.
    pub fn index(self) -> Option<usize> {
        match self {
            GestureClass::Unknown => None,
            c => Some(c as usize),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            GestureClass::Xp => "XP",
            GestureClass::Xn => "XN",
            GestureClass::Yp => "YP",
            GestureClass::Yn => "YN",
            GestureClass::Zp => "ZP",
            GestureClass::Zn => "ZN",
            GestureClass::Rxp => "RXP",
            GestureClass::Rxn => "RXN",
            GestureClass::Ryp => "RYP",
            GestureClass::Ryn => "RYN",
            GestureClass::Rzp => "RZP",
            GestureClass::Rzn => "RZN",
            GestureClass::Unknown => "UNKNOWN",
        }
    }

    /// Conventional short name such as `X+` or `Rz-`.
    pub fn display_name(self) -> &'static str {
        match self {
            GestureClass::Xp => "X+",
            GestureClass::Xn => "X-",
            GestureClass::Yp => "Y+",
            GestureClass::Yn => "Y-",
            GestureClass::Zp => "Z+",
            GestureClass::Zn => "Z-",
            GestureClass::Rxp => "Rx+",
            GestureClass::Rxn => "Rx-",
            GestureClass::Ryp => "Ry+",
            GestureClass::Ryn => "Ry-",
            GestureClass::Rzp => "Rz+",
            GestureClass::Rzn => "Rz-",
            GestureClass::Unknown => "?",
        }
    }

    pub fn kind(self) -> Option<ClassKind> {
        use GestureClass::*;
        match self {
            Xp | Xn | Yp | Yn | Zp | Zn => Some(ClassKind::Translation),
            Rxp | Rxn | Ryp | Ryn => Some(ClassKind::Posture),
            Rzp | Rzn => Some(ClassKind::Twist),
            Unknown => None,
        }
    }

    /// Axis and sign carried by the class name.
    pub fn axis_sign(self) -> Option<(Axis, Sign)> {
        use GestureClass::*;
        let (axis, sign) = match self {
            Xp | Rxp => (Axis::X, Sign::Positive),
            Xn | Rxn => (Axis::X, Sign::Negative),
            Yp | Ryp => (Axis::Y, Sign::Positive),
            Yn | Ryn => (Axis::Y, Sign::Negative),
            Zp | Rzp => (Axis::Z, Sign::Positive),
            Zn | Rzn => (Axis::Z, Sign::Negative),
            Unknown => return None,
        };
        Some((axis, sign))
    }

    /// Maps a recognised class onto the motion it commands: translations
    /// become a signed unit direction, rotations an axis and sign.
    pub fn to_motion(self) -> Result<Motion, ClassError> {
        let (axis, sign) = self.axis_sign().ok_or(ClassError::NoMotion)?;
        Ok(match self.kind() {
            Some(ClassKind::Translation) => Motion::Translation(axis.unit() * sign.factor()),
            _ => Motion::Rotation(axis, sign),
        })
    }
}

impl fmt::Display for GestureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for GestureClass {
    type Err = ClassError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        if upper == "UNKNOWN" {
            return Ok(GestureClass::Unknown);
        }
        GestureClass::ALL
            .into_iter()
            .find(|c| c.label() == upper || c.display_name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ClassError::BadLabel(s.to_string()))
    }
}
