//! Accelerometer samples and the newline-delimited sensor frame format.
//!
//! One frame per line: `{"t":<ms>,"arm":"L"|"R","ax":<g>,"ay":<g>,"az":<g>}`.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

/// One 3-axis reading in g, timestamped in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelSample {
    pub t: u64,
    pub arm: Arm,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("malformed sensor frame: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("sensor frame carries a non-finite acceleration")]
    NonFinite,
}

impl AccelSample {
    pub fn new(t: u64, arm: Arm, ax: f64, ay: f64, az: f64) -> Self {
        Self { t, arm, ax, ay, az }
    }

    pub fn left(t: u64, a: [f64; 3]) -> Self {
        Self::new(t, Arm::Left, a[0], a[1], a[2])
    }

    pub fn right(t: u64, a: [f64; 3]) -> Self {
        Self::new(t, Arm::Right, a[0], a[1], a[2])
    }

    pub fn accel(&self) -> [f64; 3] {
        [self.ax, self.ay, self.az]
    }

    pub fn is_finite(&self) -> bool {
        self.ax.is_finite() && self.ay.is_finite() && self.az.is_finite()
    }

    pub fn to_frame(&self) -> String {
        serde_json::to_string(self).expect("sample serializes")
    }

    pub fn from_frame(line: &str) -> Result<Self, FrameError> {
        let s: AccelSample = serde_json::from_str(line.trim())?;
        if !s.is_finite() {
            return Err(FrameError::NonFinite);
        }
        Ok(s)
    }
}

/// Frames read from a replay stream; malformed lines are counted and skipped.
#[derive(Debug, Default)]
pub struct ReplayFrames {
    pub samples: Vec<AccelSample>,
    pub malformed: usize,
}

pub fn read_frames<R: BufRead>(reader: R) -> io::Result<ReplayFrames> {
    let mut out = ReplayFrames::default();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match AccelSample::from_frame(&line) {
            Ok(s) => out.samples.push(s),
            Err(e) => {
                log::debug!("skipping frame: {e}");
                out.malformed += 1;
            }
        }
    }
    Ok(out)
}

pub fn write_frames<W: Write>(mut w: W, samples: &[AccelSample]) -> io::Result<()> {
    for s in samples {
        writeln!(w, "{}", s.to_frame())?;
    }
    Ok(())
}
