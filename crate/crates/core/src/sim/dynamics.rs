use alloc::format;

use crate::error::{Error, Result};

/// Longitudinal vehicle behavior. Swapping this record is the only
/// difference between the simulated and the "real" environment.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VehicleDynamics {
    /// m/s²
    pub accel: f64,
    /// Comfortable deceleration, m/s².
    pub decel: f64,
    /// Hard braking cap, m/s².
    pub emergency_decel: f64,
    /// Seconds a stopped queue head waits after its movement turns green.
    pub startup_delay: f64,
}

impl VehicleDynamics {
    pub const DEFAULT: Self = Self {
        accel: 2.0,
        decel: 4.5,
        emergency_decel: 9.0,
        startup_delay: 0.0,
    };
    pub const RAINY: Self = Self {
        accel: 0.75,
        decel: 3.5,
        emergency_decel: 4.0,
        startup_delay: 0.25,
    };
    pub const SNOWY: Self = Self {
        accel: 0.5,
        decel: 1.5,
        emergency_decel: 2.0,
        startup_delay: 0.5,
    };

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "default" => Some(Self::DEFAULT),
            "rainy" => Some(Self::RAINY),
            "snowy" => Some(Self::SNOWY),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.accel,
            self.decel,
            self.emergency_decel,
            self.startup_delay,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite
            || self.accel <= 0.0
            || self.decel <= 0.0
            || self.decel > self.emergency_decel
            || self.startup_delay < 0.0
        {
            return Err(Error::Config(format!(
                "vehicle dynamics need 0 < accel, 0 < decel <= emergency_decel and startup_delay >= 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

impl Default for VehicleDynamics {
    fn default() -> Self {
        Self::DEFAULT
    }
}
