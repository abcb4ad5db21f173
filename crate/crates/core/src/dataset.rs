//! Text dataset format.
//!
//! ```text
//! gestibot-dataset v1
//! XP,ax1,ay1,az1,ax2,ay2,az2,ax3,ay3,az3
//! ```
//!
//! Accelerations are raw g, before normalisation.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::gesture::GestureClass;
use crate::synth::LabeledWindow;

pub const DATASET_HEADER: &str = "gestibot-dataset v1";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing or wrong header, expected {DATASET_HEADER:?}")]
    BadHeader,
    #[error("line {line}: {msg}")]
    BadRecord { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_dataset<W: Write>(mut w: W, windows: &[LabeledWindow]) -> io::Result<()> {
    writeln!(w, "{DATASET_HEADER}")?;
    for win in windows {
        write!(w, "{}", win.label.label())?;
        for v in win.samples.iter().flatten() {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<Vec<LabeledWindow>, DatasetError> {
    let mut lines = r.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == DATASET_HEADER => {}
        Some(Err(e)) => return Err(e.into()),
        _ => return Err(DatasetError::BadHeader),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| DatasetError::BadRecord { line: lineno, msg };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 10 {
            return Err(bad(format!("expected 10 fields, found {}", fields.len())));
        }
        let label: GestureClass = fields[0].parse().map_err(|e| bad(format!("{e}")))?;
        if label == GestureClass::Unknown {
            return Err(bad("UNKNOWN is not a training label".into()));
        }
        let mut values = [0.0; 9];
        for (slot, f) in values.iter_mut().zip(&fields[1..]) {
            *slot = f
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("bad acceleration {f:?}")))?;
        }
        out.push(LabeledWindow {
            label,
            samples: [
                [values[0], values[1], values[2]],
                [values[3], values[4], values[5]],
                [values[6], values[7], values[8]],
            ],
        });
    }
    Ok(out)
}
