//! Accelerometer-driven robot control.
//!
//! A 9-10-12 sigmoid network recognises twelve right-arm gestures and
//! postures from a three-sample acceleration window. Left-arm postures arm and
//! stop the system, and a heartbeat watchdog stops it when the left-arm stream
//! drops. Recognised classes become single-axis pose increments that drive the
//! tool to the edge of a two-sphere field of operation.

pub mod dataset;
pub mod eval;
pub mod geometry;
pub mod gesture;
pub mod mlp;
pub mod robot;
pub mod sensor;
pub mod session;
pub mod synth;

pub use geometry::{Axis, Pose, PoseIncrement, Sign, Vec3, Workspace};
pub use gesture::GestureClass;
pub use mlp::{FeatureVector, GestureClassifier, MlpModel, TrainingConfig, TrainingExample};
pub use sensor::{AccelSample, Arm};
pub use session::{Mode, Session, SessionConfig, SessionEvent, StopReason, WatchdogConfig};
