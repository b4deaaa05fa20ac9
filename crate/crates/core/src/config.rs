//! Service configuration, loaded from a TOML document. Every key is optional;
//! missing keys fall back to the reference configuration (R = 300 mm,
//! m = 50 mm, RCM at the origin, 250 Hz tick).

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, JointVector, PerJoint, RobotGeometry};
use crate::plant::{register_deadband, AxisConfig, PlantConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSettings {
    /// Encoder counts per joint unit (per rad for q1, per mm for q2/q3).
    pub encoder_resolution: PerJoint<f64>,
    pub homing_seek_fraction: f64,
    pub homing_backoff_fraction: f64,
    /// Homing gives up after this multiple of the joint span.
    pub homing_travel_factor: f64,
    pub instrument_slew: f64,
    /// Power-up pose; defaults to the tip resting on the RCM, pointing down.
    pub initial: Option<JointVector>,
}

impl Default for PlantSettings {
    fn default() -> Self {
        PlantSettings {
            encoder_resolution: PerJoint { q1: 10_000.0, q2: 100.0, q3: 200.0 },
            homing_seek_fraction: 0.10,
            homing_backoff_fraction: 0.02,
            homing_travel_factor: 1.25,
            instrument_slew: 1.0,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupervisorSettings {
    /// Maximum distance (mm) between the tip, inserted to the goal depth with
    /// the current orientation, and the RCM→goal ray.
    pub alignment_tolerance: f64,
    /// Largest accepted joint jog per command.
    pub jog_max_step: PerJoint<f64>,
    /// Largest accepted Cartesian jog per command (mm).
    pub jog_cartesian_max_step: f64,
}

impl Default for SupervisorSettings {
    fn default() -> Self {
        SupervisorSettings {
            alignment_tolerance: 0.5,
            jog_max_step: PerJoint { q1: 0.1, q2: 10.0, q3: 10.0 },
            jog_cartesian_max_step: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSettings {
    pub bind: String,
    /// Newline-delimited JSON command channel.
    pub command_port: u16,
    /// HTTP + WebSocket (telemetry, state, config, console commands).
    pub http_port: u16,
    /// Modbus-TCP holding registers.
    pub modbus_port: u16,
    /// Broadcast every n-th telemetry frame on the WebSocket.
    pub telemetry_decimation: u32,
}

impl Default for NetworkSettings {
    fn default() -> Self {
        NetworkSettings {
            bind: "127.0.0.1".to_string(),
            command_port: 7410,
            http_port: 7411,
            modbus_port: 5502,
            telemetry_decimation: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub geometry: RobotGeometry,
    /// Control tick rate (Hz).
    pub tick_hz: f64,
    pub plant: PlantSettings,
    pub supervisor: SupervisorSettings,
    pub network: NetworkSettings,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            geometry: RobotGeometry::default(),
            tick_hz: 250.0,
            plant: PlantSettings::default(),
            supervisor: SupervisorSettings::default(),
            network: NetworkSettings::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ServiceConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serialisable")
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.tick_hz
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.geometry.validate()?;
        let invalid = |msg: &str| Err(ConfigError::Invalid(msg.to_string()));
        if !(self.tick_hz.is_finite() && self.tick_hz > 0.0) {
            return invalid("tick_hz must be positive");
        }
        let p = &self.plant;
        if p.encoder_resolution.iter().any(|(_, r)| !(r.is_finite() && *r > 0.0)) {
            return invalid("encoder resolutions must be positive");
        }
        for (name, f) in [("homing_seek_fraction", p.homing_seek_fraction), ("homing_backoff_fraction", p.homing_backoff_fraction)] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(ConfigError::Invalid(format!("{name} must be in (0, 1]")));
            }
        }
        if !(p.homing_travel_factor >= 1.0) {
            return invalid("homing_travel_factor must be at least 1");
        }
        if !(p.instrument_slew.is_finite() && p.instrument_slew > 0.0) {
            return invalid("instrument_slew must be positive");
        }
        if let Some(q) = p.initial {
            if !q.is_finite() {
                return invalid("initial pose must be finite");
            }
        }
        let s = &self.supervisor;
        if !(s.alignment_tolerance > 0.0) {
            return invalid("alignment_tolerance must be positive");
        }
        if s.jog_max_step.iter().any(|(_, v)| !(*v > 0.0)) || !(s.jog_cartesian_max_step > 0.0) {
            return invalid("jog limits must be positive");
        }
        if self.network.telemetry_decimation == 0 {
            return invalid("telemetry_decimation must be at least 1");
        }
        Ok(())
    }

    pub fn plant_config(&self) -> PlantConfig {
        let geom = &self.geometry;
        let p = &self.plant;
        let axes = PerJoint::from_fn(|j| {
            let lim = geom.limits[j];
            AxisConfig {
                caps: geom.caps[j],
                encoder_resolution: p.encoder_resolution[j],
                home_position: lim.min,
                far_limit: lim.max,
                seek_fraction: p.homing_seek_fraction,
                backoff_fraction: p.homing_backoff_fraction,
                travel_budget: p.homing_travel_factor * lim.span(),
                deadband: register_deadband(j),
            }
        });
        let resting = JointVector::new(0.0, geom.rail_radius * std::f64::consts::FRAC_PI_2, geom.q3_at_rcm());
        PlantConfig { axes, instrument_slew: p.instrument_slew, initial: p.initial.unwrap_or(resting) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_reference_configuration() {
        let cfg = ServiceConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ServiceConfig::default());
        assert_eq!(cfg.geometry.rail_radius, 300.0);
        assert_eq!(cfg.geometry.tool_offset, 50.0);
        assert_eq!(cfg.dt(), 0.004);
    }

    #[test]
    fn partial_override() {
        let cfg = ServiceConfig::from_toml_str(
            r#"
            tick_hz = 500.0
            [geometry]
            tool_offset = 20.0
            [geometry.caps]
            q1 = { v_max = 0.5, a_max = 1.0 }
            q2 = { v_max = 50.0, a_max = 100.0 }
            q3 = { v_max = 10.0, a_max = 20.0 }
            [network]
            command_port = 9000
            "#,
        )
        .unwrap();
        assert_eq!(cfg.tick_hz, 500.0);
        assert_eq!(cfg.geometry.tool_offset, 20.0);
        assert_eq!(cfg.geometry.rail_radius, 300.0);
        assert_eq!(cfg.geometry.caps.q3.v_max, 10.0);
        assert_eq!(cfg.geometry.caps.q1.v_max, 0.5);
        assert_eq!(cfg.network.command_port, 9000);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ServiceConfig::default();
        assert_eq!(ServiceConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }

    #[test]
    fn rejects_invalid_values() {
        assert!(matches!(
            ServiceConfig::from_toml_str("[geometry]\ntool_offset = 400.0\n"),
            Err(ConfigError::Geometry(_))
        ));
        assert!(matches!(ServiceConfig::from_toml_str("tick_hz = 0.0\n"), Err(ConfigError::Invalid(_))));
        assert!(matches!(ServiceConfig::from_toml_str("bogus = 1\n"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn plant_config_uses_limits_for_sensors() {
        let cfg = ServiceConfig::default();
        let pc = cfg.plant_config();
        assert_eq!(pc.axes.q3.home_position, 0.0);
        assert_eq!(pc.axes.q3.far_limit, 600.0);
        assert_eq!(pc.initial.q3, 250.0);
    }
}
