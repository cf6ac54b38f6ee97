//! Run configuration: a versioned TOML document, dotted-path overrides,
//! and validation that names the offending key.
//!
//! ```
//! use nafd_isac::config::RunConfig;
//!
//! let cfg = RunConfig::from_toml_str("", &["scenario.n_antennas=8".to_string()]).unwrap();
//! assert_eq!(cfg.scenario.n_antennas, 8);
//! assert_eq!(cfg.scenario.m_total, 16);
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::beamforming::{BeamPolicy, CombinerMode};
use crate::channel::FadingParams;
use crate::comm::{CommSettings, NumeratorForm, RateWeights};
use crate::dqn::DqnConfig;
use crate::error::{Error, Result};
use crate::experiments::{GridSpec, ScenarioParams, SweepVar};
use crate::geometry::{
    make_circle_deployment, make_random_deployment, ArraySpec, NetworkLayout, Position,
};
use crate::moo::NsgaConfig;
use crate::sensing::{RadarParams, SensingWeights};
use crate::units::{dbm_to_watts, sub_seed, wavelength};

pub const CONFIG_SCHEMA: &str = "nafd-isac/config";
pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeploymentKind {
    #[default]
    Circle,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub deployment: DeploymentKind,
    /// Total RRU count; even indices are DL-RRUs on the circle.
    pub m_total: usize,
    pub n_antennas: usize,
    pub k_ul: usize,
    pub k_dl: usize,
    pub circle_radius: f64,
    pub region_radius: f64,
    /// Fixed target position `[x, y]`; drawn with the users when unset.
    pub target: Option<[f64; 2]>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            deployment: DeploymentKind::Circle,
            m_total: 16,
            n_antennas: 16,
            k_ul: 3,
            k_dl: 3,
            circle_radius: 200.0,
            region_radius: 300.0,
            target: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub p_max: f64,
    pub p_ul: f64,
    pub alpha_dl: f64,
    pub alpha_ul: f64,
    pub alpha_t: f64,
    pub alpha_i: f64,
    pub noise_dl_dbm: f64,
    pub noise_ul_dbm: f64,
    pub csi_error_dl_dbm: f64,
    pub csi_error_ul_dbm: f64,
    /// Sensing receiver noise; the UL estimation-error power when unset.
    pub sensing_noise_dbm: Option<f64>,
    pub g_t: f64,
    pub g_r: f64,
    pub rcs: f64,
    pub reference_distance: Option<f64>,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            carrier_hz: 3.5e9,
            bandwidth_hz: 1e6,
            p_max: 1.0,
            p_ul: 0.2,
            alpha_dl: 3.7,
            alpha_ul: 3.7,
            alpha_t: 4.0,
            alpha_i: 3.0,
            noise_dl_dbm: -83.0,
            noise_ul_dbm: -83.0,
            csi_error_dl_dbm: -105.0,
            csi_error_ul_dbm: -105.0,
            sensing_noise_dbm: None,
            g_t: 1.0,
            g_r: 1.0,
            rcs: 1.0,
            reference_distance: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamConfig {
    pub combiner: CombinerMode,
    pub numerator: NumeratorForm,
    /// Error of the a priori target position `[dx, dy]` the sensing beams
    /// aim at.
    pub prior_offset: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightConfig {
    pub omega_d: f64,
    pub omega_u: f64,
    pub omega_sp: f64,
    pub omega_so: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig {
            omega_d: 1.0,
            omega_u: 1.0,
            omega_sp: 1.0,
            omega_so: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContourConfig {
    pub grid: GridSpec,
    /// Pilot factor on every DL-RRU.
    pub beta: f64,
}

impl Default for ContourConfig {
    fn default() -> Self {
        ContourConfig {
            grid: GridSpec::default(),
            beta: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub variable: SweepVar,
    pub values: Vec<f64>,
    pub antennas: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            variable: SweepVar::Beta,
            values: (1..=10).map(|i| i as f64 / 10.0).collect(),
            antennas: vec![4, 16],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeConfig {
    pub block_symbols: usize,
    pub durations: Vec<usize>,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            block_symbols: 100,
            durations: vec![5, 10, 20, 30, 40, 50, 60],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParetoConfig {
    pub antennas: Vec<usize>,
    pub with_dqn: bool,
}

impl Default for ParetoConfig {
    fn default() -> Self {
        ParetoConfig {
            antennas: vec![4, 16],
            with_dqn: true,
        }
    }
}

/// Everything a run needs. Field defaults reproduce the reference
/// parameter set; all randomness derives from `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema: String,
    pub version: u32,
    pub seed: u64,
    pub trials: usize,
    pub scenario: ScenarioConfig,
    pub physics: PhysicsConfig,
    pub beams: BeamConfig,
    pub weights: WeightConfig,
    pub nsga2: NsgaConfig,
    pub dqn: DqnConfig,
    pub contour: ContourConfig,
    pub sweep: SweepConfig,
    pub schemes: SchemeConfig,
    pub pareto: ParetoConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema: CONFIG_SCHEMA.into(),
            version: CONFIG_VERSION,
            seed: 1,
            trials: 200,
            scenario: ScenarioConfig::default(),
            physics: PhysicsConfig::default(),
            beams: BeamConfig::default(),
            weights: WeightConfig::default(),
            nsga2: NsgaConfig::default(),
            dqn: DqnConfig::default(),
            contour: ContourConfig::default(),
            sweep: SweepConfig::default(),
            schemes: SchemeConfig::default(),
            pareto: ParetoConfig::default(),
        }
    }
}

/// Seed labels for the independent random streams of a run.
mod stream {
    pub const LAYOUT: u64 = 1;
    pub const CHANNELS: u64 = 2;
    pub const NSGA2: u64 = 3;
    pub const DQN: u64 = 4;
}

impl RunConfig {
    /// Reads `path` (if any), applies `key=value` overrides in order and
    /// validates the result.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| {
                Error::config("--config", format!("cannot read {}: {e}", p.display()))
            })?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("config", e.to_string()))?;
        for ov in overrides {
            apply_override(&mut table, ov)?;
        }
        let cfg: RunConfig =
            serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
                let key = e.path().to_string();
                Error::config(
                    if key == "." { "config".into() } else { key },
                    e.inner().message().to_string(),
                )
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::config(
                "schema",
                format!("expected `{CONFIG_SCHEMA}`, got `{}`", self.schema),
            ));
        }
        if self.version != CONFIG_VERSION {
            return Err(Error::config(
                "version",
                format!("unsupported version {}", self.version),
            ));
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be positive"));
        }
        let s = &self.scenario;
        if s.m_total < 2 {
            return Err(Error::config(
                "scenario.m_total",
                "needs at least one DL-RRU and one UL-RRU",
            ));
        }
        if s.n_antennas == 0 {
            return Err(Error::config("scenario.n_antennas", "must be positive"));
        }
        if s.k_dl == 0 {
            return Err(Error::config("scenario.k_dl", "must be positive"));
        }
        if s.k_dl > s.n_antennas * s.m_total.div_ceil(2) {
            return Err(Error::config(
                "scenario.k_dl",
                "exceeds the DL antenna count",
            ));
        }
        if s.k_ul > s.n_antennas * (s.m_total / 2) {
            return Err(Error::config(
                "scenario.k_ul",
                "exceeds the UL antenna count",
            ));
        }
        positive("scenario.circle_radius", s.circle_radius)?;
        positive("scenario.region_radius", s.region_radius)?;
        let p = &self.physics;
        for (key, v) in [
            ("physics.carrier_hz", p.carrier_hz),
            ("physics.bandwidth_hz", p.bandwidth_hz),
            ("physics.p_max", p.p_max),
            ("physics.alpha_dl", p.alpha_dl),
            ("physics.alpha_ul", p.alpha_ul),
            ("physics.alpha_t", p.alpha_t),
            ("physics.alpha_i", p.alpha_i),
            ("physics.g_t", p.g_t),
            ("physics.g_r", p.g_r),
            ("physics.rcs", p.rcs),
        ] {
            positive(key, v)?;
        }
        if !(p.p_ul >= 0.0 && p.p_ul.is_finite()) {
            return Err(Error::config(
                "physics.p_ul",
                "must be finite and non-negative",
            ));
        }
        if let Some(d0) = p.reference_distance {
            positive("physics.reference_distance", d0)?;
        }
        for (key, v) in [
            ("physics.noise_dl_dbm", p.noise_dl_dbm),
            ("physics.noise_ul_dbm", p.noise_ul_dbm),
            ("physics.csi_error_dl_dbm", p.csi_error_dl_dbm),
            ("physics.csi_error_ul_dbm", p.csi_error_ul_dbm),
        ] {
            if !v.is_finite() {
                return Err(Error::config(key, "must be finite"));
            }
        }
        let w = &self.weights;
        for (key, v) in [
            ("weights.omega_d", w.omega_d),
            ("weights.omega_u", w.omega_u),
            ("weights.omega_sp", w.omega_sp),
            ("weights.omega_so", w.omega_so),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be finite and non-negative"));
            }
        }
        self.nsga2.validate()?;
        self.dqn.validate()?;
        self.contour.grid.validate()?;
        if !(0.0..=1.0).contains(&self.contour.beta) {
            return Err(Error::config("contour.beta", "must lie in [0, 1]"));
        }
        if self.sweep.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("sweep.values", "must be finite"));
        }
        for (key, list) in [
            ("sweep.antennas", &self.sweep.antennas),
            ("pareto.antennas", &self.pareto.antennas),
        ] {
            if list.is_empty() || list.contains(&0) {
                return Err(Error::config(
                    key,
                    "needs at least one positive antenna count",
                ));
            }
        }
        if self.schemes.block_symbols == 0 {
            return Err(Error::config("schemes.block_symbols", "must be positive"));
        }
        if let Some(&d) = self
            .schemes
            .durations
            .iter()
            .find(|&&d| d > self.schemes.block_symbols)
        {
            return Err(Error::config(
                "schemes.durations",
                format!("{d} exceeds block_symbols"),
            ));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        wavelength(self.physics.carrier_hz)
    }

    pub fn layout_seed(&self) -> u64 {
        sub_seed(self.seed, stream::LAYOUT)
    }

    pub fn layout(&self) -> Result<NetworkLayout> {
        let s = &self.scenario;
        let array = ArraySpec::new(s.n_antennas, self.wavelength());
        let layout = match s.deployment {
            DeploymentKind::Circle => make_circle_deployment(
                s.m_total,
                s.circle_radius,
                s.k_ul,
                s.k_dl,
                s.region_radius,
                array,
                self.layout_seed(),
            )?,
            DeploymentKind::Random => make_random_deployment(
                s.m_total,
                s.k_ul,
                s.k_dl,
                s.region_radius,
                array,
                self.layout_seed(),
            )?,
        };
        Ok(match s.target {
            Some([x, y]) => layout.with_target(Position::new(x, y)),
            None => layout,
        })
    }

    pub fn fading(&self) -> FadingParams {
        let p = &self.physics;
        FadingParams {
            alpha_dl: p.alpha_dl,
            alpha_ul: p.alpha_ul,
            alpha_t: p.alpha_t,
            alpha_i: p.alpha_i,
            sigma2_dl: dbm_to_watts(p.noise_dl_dbm),
            sigma2_ul: dbm_to_watts(p.noise_ul_dbm),
            sigma2_sp_dl: dbm_to_watts(p.csi_error_dl_dbm),
            sigma2_sp_ul: dbm_to_watts(p.csi_error_ul_dbm),
            reference_distance: p.reference_distance,
        }
    }

    pub fn radar(&self) -> RadarParams {
        let p = &self.physics;
        RadarParams {
            g_t: p.g_t,
            g_r: p.g_r,
            rcs: p.rcs,
            delta_f: p.bandwidth_hz,
            sigma2_n: dbm_to_watts(p.sensing_noise_dbm.unwrap_or(p.csi_error_ul_dbm)),
            wavelength: self.wavelength(),
        }
    }

    pub fn scenario_params(&self) -> ScenarioParams {
        ScenarioParams {
            fading: self.fading(),
            radar: self.radar(),
            policy: BeamPolicy {
                combiner: self.beams.combiner,
                prior_offset: Position::new(self.beams.prior_offset[0], self.beams.prior_offset[1]),
            },
            comm: CommSettings {
                form: self.beams.numerator,
                weights: RateWeights {
                    omega_d: self.weights.omega_d,
                    omega_u: self.weights.omega_u,
                },
            },
            sensing_weights: SensingWeights {
                omega_sp: self.weights.omega_sp,
                omega_so: self.weights.omega_so,
            },
            p_max: self.physics.p_max,
            p_ul: self.physics.p_ul,
            trials: self.trials,
            seed: sub_seed(self.seed, stream::CHANNELS),
        }
    }

    pub fn nsga_config(&self) -> NsgaConfig {
        NsgaConfig {
            seed: sub_seed(self.seed, stream::NSGA2),
            ..self.nsga2
        }
    }

    pub fn dqn_config(&self) -> DqnConfig {
        DqnConfig {
            seed: sub_seed(self.seed, stream::DQN),
            ..self.dqn.clone()
        }
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be positive, got {v}")))
    }
}

/// Applies `a.b.c=value`. The value is parsed as a TOML value, falling
/// back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(assignment, "override must have the form key=value"))?;
    let path = path.trim();
    let raw = raw.trim();
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(Error::config(path, "empty key segment"));
    }
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut keys: Vec<&str> = path.split('.').collect();
    let last = keys.pop().expect("non-empty path");
    let mut cursor = table;
    for (depth, key) in keys.iter().enumerate() {
        let entry = cursor
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(keys[..=depth].join("."), "is not a table"))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}
