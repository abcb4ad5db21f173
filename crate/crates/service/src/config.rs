//! Flat `key = value` service configuration.
//!
//! ```text
//! # comments and blank lines are ignored
//! listen = 127.0.0.1:8765   # client socket
//! model = model.gmlp
//! r_ext = 1800
//! ```

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use gestibot_core::geometry::GeometryError;
use gestibot_core::robot::{RobotConfig, DEFAULT_HOME};
use gestibot_core::session::SAMPLE_PERIOD_MS;
use gestibot_core::{Pose, SessionConfig, Vec3, WatchdogConfig, Workspace};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {msg}")]
    BadValue { key: String, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServeConfig {
    /// Client socket (WebSocket, one envelope per text frame).
    pub listen: SocketAddr,
    /// Robot protocol port of the hosted simulator.
    pub robot_listen: SocketAddr,
    /// Drive an already running robot instead of hosting the simulator.
    pub robot_connect: Option<SocketAddr>,
    pub model: Option<PathBuf>,
    pub r_int: f64,
    pub r_ext: f64,
    pub rot_min: f64,
    pub rot_max: f64,
    pub backoff: f64,
    pub home: [f64; 3],
    pub heartbeat_timeout_ms: u64,
    pub start_hold: usize,
    pub lin_speed: f64,
    pub rot_speed: f64,
    pub tick_hz: u32,
    pub telemetry_hz: u32,
    /// Noise and seed for traces synthesised on behalf of UI gestures.
    pub noise: f64,
    pub seed: u64,
}

impl Default for ServeConfig {
    fn default() -> Self {
        let ws = Workspace::default();
        let (rot_min, rot_max) = ws.rot_limits()[0];
        Self {
            listen: "127.0.0.1:8765".parse().expect("literal address"),
            robot_listen: "127.0.0.1:8766".parse().expect("literal address"),
            robot_connect: None,
            model: None,
            r_int: ws.r_int(),
            r_ext: ws.r_ext(),
            rot_min,
            rot_max,
            backoff: ws.backoff(),
            home: DEFAULT_HOME.to_array(),
            heartbeat_timeout_ms: WatchdogConfig::default().heartbeat_timeout_ms,
            start_hold: SessionConfig::default().start_hold,
            lin_speed: RobotConfig::default().lin_speed,
            rot_speed: RobotConfig::default().rot_speed,
            tick_hz: 100,
            telemetry_hz: 10,
            noise: 0.05,
            seed: 0,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_string(),
        msg: format!("{value:?}: {e}"),
    })
}

impl ServeConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg = Self::parse(&text)?;
        Ok(cfg.relative_to(path.parent().unwrap_or(Path::new("."))))
    }

    /// Resolves a relative model path against the config file's directory.
    fn relative_to(mut self, dir: &Path) -> Self {
        if let Some(m) = &self.model {
            if m.is_relative() {
                self.model = Some(dir.join(m));
            }
        }
        self
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split_once('#').map_or(raw, |(content, _)| content).trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    msg: format!("expected key = value, got {line:?}"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    msg: format!("duplicate key {key:?}"),
                });
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "listen" => self.listen = parse_value(key, value)?,
            "robot_listen" => self.robot_listen = parse_value(key, value)?,
            "robot_connect" => self.robot_connect = Some(parse_value(key, value)?),
            "model" => self.model = Some(PathBuf::from(value)),
            "r_int" => self.r_int = parse_value(key, value)?,
            "r_ext" => self.r_ext = parse_value(key, value)?,
            "rot_min" => self.rot_min = parse_value(key, value)?,
            "rot_max" => self.rot_max = parse_value(key, value)?,
            "backoff" => self.backoff = parse_value(key, value)?,
            "home" => {
                let parts: Vec<f64> = value
                    .split(',')
                    .map(|v| parse_value(key, v.trim()))
                    .collect::<Result<_, _>>()?;
                self.home = parts.try_into().map_err(|_| ConfigError::BadValue {
                    key: key.into(),
                    msg: "expected x,y,z".into(),
                })?;
            }
            "heartbeat_timeout_ms" => self.heartbeat_timeout_ms = parse_value(key, value)?,
            "start_hold" => self.start_hold = parse_value(key, value)?,
            "lin_speed" => self.lin_speed = parse_value(key, value)?,
            "rot_speed" => self.rot_speed = parse_value(key, value)?,
            "tick_hz" => self.tick_hz = parse_value(key, value)?,
            "telemetry_hz" => self.telemetry_hz = parse_value(key, value)?,
            "noise" => self.noise = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.workspace().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.tick_hz == 0 || self.telemetry_hz == 0 {
            return Err(ConfigError::Invalid("tick_hz and telemetry_hz must be positive".into()));
        }
        if self.telemetry_hz > self.tick_hz {
            return Err(ConfigError::Invalid("telemetry_hz cannot exceed tick_hz".into()));
        }
        self.session()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.watchdog()
            .validate(SAMPLE_PERIOD_MS)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.lin_speed > 0.0 && self.rot_speed > 0.0) {
            return Err(ConfigError::Invalid("speeds must be positive".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(ConfigError::Invalid("noise must be non-negative".into()));
        }
        let ws = self.workspace().expect("checked above");
        if !ws.contains(self.home_pose().position) {
            return Err(ConfigError::Invalid(format!(
                "home {:?} lies outside the workspace",
                self.home
            )));
        }
        Ok(())
    }

    pub fn workspace(&self) -> Result<Workspace, GeometryError> {
        Workspace::with_limits(self.r_int, self.r_ext, [(self.rot_min, self.rot_max); 3], self.backoff)
    }

    pub fn session(&self) -> SessionConfig {
        SessionConfig {
            start_hold: self.start_hold,
        }
    }

    pub fn watchdog(&self) -> WatchdogConfig {
        WatchdogConfig {
            heartbeat_timeout_ms: self.heartbeat_timeout_ms,
        }
    }

    pub fn robot(&self) -> RobotConfig {
        RobotConfig {
            lin_speed: self.lin_speed,
            rot_speed: self.rot_speed,
        }
    }

    pub fn home_pose(&self) -> Pose {
        Pose::at(Vec3::from_array(self.home))
    }

    pub fn tick_period(&self) -> std::time::Duration {
        std::time::Duration::from_secs_f64(1.0 / f64::from(self.tick_hz))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ServeConfig::parse("# nothing\n\n").unwrap(), ServeConfig::default());
    }

    #[test]
    fn keys_override_defaults() {
        let cfg = ServeConfig::parse("r_ext = 1800\nhome = 900, 0, 100\nmodel=m.gmlp\nlisten=0.0.0.0:9000").unwrap();
        assert_eq!(cfg.r_ext, 1800.0);
        assert_eq!(cfg.home, [900.0, 0.0, 100.0]);
        assert_eq!(cfg.model, Some(PathBuf::from("m.gmlp")));
        assert_eq!(cfg.listen.port(), 9000);
    }

    #[test]
    fn trailing_comments_are_dropped() {
        let cfg = ServeConfig::parse("start_hold = 1   # arm on the first reading\n").unwrap();
        assert_eq!(cfg.start_hold, 1);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            ServeConfig::parse("r_ext"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            ServeConfig::parse("colour = red"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            ServeConfig::parse("r_ext = far"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            ServeConfig::parse("r_ext=1\nr_ext=2"),
            Err(ConfigError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            ServeConfig::parse("r_int = 3000"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            ServeConfig::parse("home = 10,0,0"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            ServeConfig::parse("tick_hz = 0"),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn relative_model_follows_the_file() {
        let cfg = ServeConfig::parse("model = m.gmlp")
            .unwrap()
            .relative_to(Path::new("/etc/gb"));
        assert_eq!(cfg.model, Some(PathBuf::from("/etc/gb/m.gmlp")));
    }
}
