//! The scenario file format: a single JSON document with explicit unit
//! annotations (km, km/s, days), converted to seconds/km at ingestion.
//! Internal-unit conversion happens later, inside `propagate`.

use std::path::Path;

use idealframe::forces::MoonParams;
use idealframe::math::Vec3;
use idealframe::propagator::Scenario;
use idealframe::state::GravParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SECONDS_PER_DAY: f64 = 86400.0;

/// On-disk scenario document. Absent `j2`/`moon` blocks disable the
/// corresponding perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    pub gm_km3_s2: f64,
    #[serde(default)]
    pub t0_days: f64,
    pub tf_days: f64,
    pub x0_km: [f64; 3],
    pub v0_km_s: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j2: Option<J2Block>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moon: Option<MoonBlock>,
    #[serde(default)]
    pub output_epochs_days: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct J2Block {
    pub j2: f64,
    pub re_km: f64,
    #[serde(default = "default_true")]
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoonBlock {
    pub gm_km3_s2: f64,
    pub radius_km: f64,
    pub mean_motion_rad_s: f64,
    pub inclination_deg: f64,
    pub node_deg: f64,
    pub phase0_deg: f64,
    #[serde(default = "default_true")]
    pub enabled: bool,
}

fn default_true() -> bool {
    true
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<ScenarioFile, CliError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| {
            // serde_json reports line and column in its Display output
            CliError::Usage(format!("{}: {e}", path.display()))
        })
    }

    /// Validated in-memory scenario in km / km/s / seconds.
    pub fn to_scenario(&self) -> Result<Scenario, CliError> {
        let enable_j2 = self.j2.as_ref().map_or(false, |b| b.enabled);
        let enable_moon = self.moon.as_ref().map_or(false, |b| b.enabled);
        let moon = match (&self.moon, enable_moon) {
            (Some(b), true) => Some(
                MoonParams::new(
                    b.gm_km3_s2,
                    b.radius_km,
                    b.mean_motion_rad_s,
                    b.inclination_deg.to_radians(),
                    b.node_deg.to_radians(),
                    b.phase0_deg.to_radians(),
                )
                .map_err(|e| CliError::Usage(format!("moon block: {e}")))?,
            ),
            _ => None,
        };
        let scn = Scenario {
            name: self.name.clone(),
            t0: self.t0_days * SECONDS_PER_DAY,
            tf: self.tf_days * SECONDS_PER_DAY,
            x0: Vec3::new(self.x0_km[0], self.x0_km[1], self.x0_km[2]),
            v0: Vec3::new(self.v0_km_s[0], self.v0_km_s[1], self.v0_km_s[2]),
            grav: GravParams {
                gm: self.gm_km3_s2,
                j2: self.j2.as_ref().map_or(0.0, |b| b.j2),
                re: self.j2.as_ref().map_or(1.0, |b| b.re_km),
            },
            enable_j2,
            enable_moon,
            moon,
            output_epochs: self
                .output_epochs_days
                .iter()
                .map(|d| d * SECONDS_PER_DAY)
                .collect(),
        };
        scn.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(scn)
    }
}

/// Load + validate a scenario file.
pub fn parse_scenario(path: &Path) -> Result<Scenario, CliError> {
    ScenarioFile::load(path)?.to_scenario()
}
