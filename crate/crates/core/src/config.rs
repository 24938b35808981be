//! Run configuration: JSON on disk, SI units throughout.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detection::DetectionChain;
use crate::error::{Error, Result};
use crate::model::{default_fiber_fs_pm_7811, FiberAssembly, PulseSpec, TimeGrid};
use crate::propagate::StepperConfig;

/// Requested time grid. Missing entries are derived from the pulse
/// duration (dt = fwhm/16) and the walk-off excursion.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridRequest {
    pub n_points: Option<usize>,
    /// s
    pub window: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StderrMethod {
    /// V·√(2/(K−1)), valid for near-Gaussian Stokes fluctuations.
    #[default]
    Gaussian,
    Bootstrap { resamples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "paper_pulse")]
    pub pulse: PulseSpec,
    #[serde(default = "paper_assembly")]
    pub assembly: FiberAssembly,
    #[serde(default)]
    pub grid: GridRequest,
    #[serde(default)]
    pub stepper: StepperConfig,
    #[serde(default)]
    pub chain: DetectionChain,
    #[serde(default = "default_trajectories")]
    pub n_trajectories: usize,
    /// Leading trajectories of the ensemble used to calibrate the wave
    /// plates.
    #[serde(default = "default_pilot")]
    pub pilot_trajectories: usize,
    /// Size of the γ = 0 shot-noise reference ensemble.
    #[serde(default = "default_reference")]
    pub reference_trajectories: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub stderr_method: StderrMethod,
    /// Laser repetition rate, Hz. Recorded only.
    #[serde(default = "default_repetition_rate")]
    pub repetition_rate: f64,
}

fn paper_pulse() -> PulseSpec {
    PulseSpec {
        fwhm: 200e-15,
        energy_total: 160e-12,
        center_wavelength: 1560e-9,
        split_ratio: 0.5,
    }
}

fn paper_assembly() -> FiberAssembly {
    FiberAssembly::split(default_fiber_fs_pm_7811(), 5.2, 0.03, 0.96)
}

fn default_trajectories() -> usize {
    3000
}

fn default_pilot() -> usize {
    100
}

fn default_reference() -> usize {
    50_000
}

fn default_repetition_rate() -> f64 {
    80e6
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl SimulationConfig {
    /// 5.2 m of FS-PM-7811 cut into 2.615 m + 2.585 m, 160 pJ of 200 fs
    /// pulses at 1560 nm, 3000 trajectories.
    pub fn paper() -> Self {
        SimulationConfig {
            pulse: paper_pulse(),
            assembly: paper_assembly(),
            grid: GridRequest::default(),
            stepper: StepperConfig::default(),
            chain: DetectionChain::default(),
            n_trajectories: default_trajectories(),
            pilot_trajectories: default_pilot(),
            reference_trajectories: default_reference(),
            master_seed: 0,
            stderr_method: StderrMethod::Gaussian,
            repetition_rate: default_repetition_rate(),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper()),
            other => Err(Error::invalid("preset", format!("unknown preset {other:?}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pulse.validate()?;
        self.assembly.validate()?;
        self.stepper.validate()?;
        self.chain.validate()?;
        if self.n_trajectories < 2 {
            return Err(Error::invalid("config", "n_trajectories must be >= 2"));
        }
        if self.pilot_trajectories < 2 || self.pilot_trajectories > self.n_trajectories {
            return Err(Error::invalid(
                "config",
                "pilot_trajectories must lie in [2, n_trajectories]",
            ));
        }
        if self.reference_trajectories < 2 {
            return Err(Error::invalid("config", "reference_trajectories must be >= 2"));
        }
        if let StderrMethod::Bootstrap { resamples } = self.stderr_method {
            if resamples < 2 {
                return Err(Error::invalid("config", "bootstrap needs >= 2 resamples"));
            }
        }
        if let Some(n) = self.grid.n_points {
            if n < 2 || !n.is_power_of_two() {
                return Err(Error::invalid(
                    "grid",
                    format!("n_points = {n} must be a power of two"),
                ));
            }
        }
        if let Some(w) = self.grid.window {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::invalid("grid", "window must be > 0"));
            }
        }
        self.time_grid().map(|_| ())
    }

    /// Resolves the grid request against the pulse and fibre.
    pub fn time_grid(&self) -> Result<TimeGrid> {
        let fwhm = self.pulse.fwhm;
        let delay = self.assembly.max_walkoff_delay();
        let dt = fwhm / 16.0;
        let grid = match (self.grid.n_points, self.grid.window) {
            (None, None) => return TimeGrid::auto(fwhm, delay),
            (Some(n), Some(w)) => TimeGrid::new(n, w)?,
            (Some(n), None) => TimeGrid::new(
                n,
                (n as f64 * dt).max(TimeGrid::required_window(fwhm, delay)),
            )?,
            (None, Some(w)) => {
                TimeGrid::new(((w / dt).ceil() as usize).next_power_of_two().max(2), w)?
            }
        };
        grid.check_resolves(fwhm, delay)?;
        Ok(grid)
    }

    /// Same run with the nonlinearity switched off, as used for the
    /// shot-noise reference.
    pub fn linear_reference(&self) -> Self {
        let mut c = self.clone();
        c.assembly.first.gamma = 0.0;
        c.assembly.second.gamma = 0.0;
        c
    }

    /// Hex SHA-256 of the canonical JSON form with the seed removed.
    pub fn digest(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let serde_json::Value::Object(map) = &mut value {
            map.remove("master_seed");
        }
        // serde_json maps are key-sorted, which makes this canonical.
        let text = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimulationConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<SimulationConfig> {
    let text = std::fs::read_to_string(path)?;
    SimulationConfig::from_json(&text)
}
