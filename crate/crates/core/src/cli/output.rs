use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};

/// Wall-clock measurements. Reports keep these under a `wall_clock` key so
/// that determinism checks can drop the section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WallClock {
    pub wall_seconds: f64,
}

impl WallClock {
    pub fn since(start: Instant) -> Self {
        Self {
            wall_seconds: start.elapsed().as_secs_f64(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Data(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Parses a JSON report and removes every `wall_clock` section, recursively.
pub fn strip_wall_clock(text: &str) -> Result<serde_json::Value> {
    fn strip(v: &mut serde_json::Value) {
        match v {
            serde_json::Value::Object(map) => {
                map.remove("wall_clock");
                map.values_mut().for_each(strip);
            }
            serde_json::Value::Array(items) => items.iter_mut().for_each(strip),
            _ => {}
        }
    }
    let mut v: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Data(format!("invalid report JSON: {e}")))?;
    strip(&mut v);
    Ok(v)
}
