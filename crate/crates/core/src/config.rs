//! Flat TOML configuration.
//!
//! Keys are the lower_snake_case names of the simulation parameter table
//! (`number_of_v_ues`, `resource_reservation_period_ms`, ...); the short
//! field names used in code (`n_ues`, `rri_ms`, ...) are accepted as aliases.
//! Unknown keys are rejected. Any key may be omitted and falls back to its
//! default. Command-line overrides use the same structure and win over the
//! file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{LosMode, ScenarioKind, SimConfig};
use crate::error::{Error, Result};
use crate::pool::{Bandwidth, SubchannelScheme, SubframeBitmap};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    // general
    #[serde(alias = "n_ues", skip_serializing_if = "Option::is_none")]
    pub number_of_v_ues: Option<usize>,
    #[serde(alias = "duration_ms", skip_serializing_if = "Option::is_none")]
    pub simulation_time_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_distance_min_m: Option<f64>,
    #[serde(alias = "baseline_b_m", skip_serializing_if = "Option::is_none")]
    pub baseline_distance_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speed_kmh: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub los_mode: Option<String>,

    // V-UE
    #[serde(alias = "message_size", skip_serializing_if = "Option::is_none")]
    pub message_size_bytes: Option<u32>,
    #[serde(alias = "tx_power_dbm", skip_serializing_if = "Option::is_none")]
    pub transmission_power_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub antenna_height_m: Option<f64>,
    #[serde(alias = "rri_ms", skip_serializing_if = "Option::is_none")]
    pub resource_reservation_period_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t1_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t2_ms: Option<u64>,
    #[serde(alias = "resel_prob", skip_serializing_if = "Option::is_none")]
    pub resource_reselection_probability: Option<f64>,
    #[serde(alias = "mcs", skip_serializing_if = "Option::is_none")]
    pub modulation_and_coding_scheme: Option<u8>,

    // resource pool
    #[serde(
        alias = "bandwidth_mhz",
        alias = "cellular_bandwidth_mhz",
        skip_serializing_if = "Option::is_none"
    )]
    pub channel_bandwidth_mhz: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rbs_per_subchannel: Option<u32>,
    #[serde(alias = "num_subchannels", skip_serializing_if = "Option::is_none")]
    pub number_of_subchannels: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subframe_bitmap: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subchannel_scheme: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lowest_rb_subchannel_index: Option<u32>,

    // channel and PHY
    #[serde(alias = "fc_ghz", skip_serializing_if = "Option::is_none")]
    pub carrier_frequency_ghz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_figure_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sinr_threshold_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rsrp_decode_threshold_dbm: Option<f64>,

    // sensing
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rsrp_exclusion_threshold_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclude_unmonitored: Option<bool>,
}

macro_rules! overlay {
    ($base:expr, $over:expr, $($field:ident),* $(,)?) => {
        $( if $over.$field.is_some() { $base.$field = $over.$field.clone(); } )*
    };
}

impl ConfigFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigParse {
            path: path.to_path_buf(),
            message: e.to_string().trim_end().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("cannot read config {}", path.display()), e))?;
        Self::parse(&text, path)
    }

    /// Values set in `over` replace those of `self`.
    pub fn overlay(mut self, over: &ConfigFile) -> Self {
        overlay!(
            self,
            over,
            number_of_v_ues,
            simulation_time_ms,
            warmup_ms,
            seed,
            scenario,
            trace_path,
            baseline_distance_min_m,
            baseline_distance_m,
            speed_kmh,
            los_mode,
            message_size_bytes,
            transmission_power_dbm,
            antenna_height_m,
            resource_reservation_period_ms,
            t1_ms,
            t2_ms,
            resource_reselection_probability,
            modulation_and_coding_scheme,
            channel_bandwidth_mhz,
            rbs_per_subchannel,
            number_of_subchannels,
            subframe_bitmap,
            subchannel_scheme,
            lowest_rb_subchannel_index,
            carrier_frequency_ghz,
            noise_figure_db,
            sinr_threshold_db,
            rsrp_decode_threshold_dbm,
            rsrp_exclusion_threshold_dbm,
            exclude_unmonitored,
        );
        self
    }

    /// Fills every omitted key with its default and validates the result.
    pub fn resolve(&self) -> Result<SimConfig> {
        let mut cfg = SimConfig::default();
        macro_rules! set {
            ($src:ident => $($dst:tt)+) => {
                if let Some(v) = self.$src.clone() {
                    cfg.$($dst)+ = v;
                }
            };
        }
        set!(number_of_v_ues => n_ues);
        set!(simulation_time_ms => duration_ms);
        set!(warmup_ms => warmup_ms);
        set!(seed => seed);
        set!(baseline_distance_min_m => baseline_a_m);
        set!(baseline_distance_m => baseline_b_m);
        set!(speed_kmh => speed_kmh);
        set!(message_size_bytes => radio.message_size_bytes);
        set!(transmission_power_dbm => radio.tx_power_dbm);
        set!(antenna_height_m => radio.antenna_height_m);
        set!(resource_reselection_probability => radio.resel_prob);
        set!(modulation_and_coding_scheme => radio.mcs);
        set!(rbs_per_subchannel => pool.rbs_per_subchannel);
        set!(lowest_rb_subchannel_index => pool.lowest_rb_index);
        set!(carrier_frequency_ghz => channel.fc_ghz);
        set!(noise_figure_db => phy.noise_figure_db);
        set!(sinr_threshold_db => phy.sinr_threshold_db);
        set!(rsrp_decode_threshold_dbm => phy.rsrp_decode_threshold_dbm);
        set!(rsrp_exclusion_threshold_dbm => rsrp_exclusion_threshold_dbm);
        set!(exclude_unmonitored => exclude_unmonitored);

        if let Some(rri) = self.resource_reservation_period_ms {
            if rri == 0 {
                return Err(Error::config(
                    "resource_reservation_period_ms",
                    "must be positive",
                ));
            }
            cfg.radio.rri_ms = rri;
            cfg.radio.t2_ms = rri.min(100);
        }
        set!(t1_ms => radio.t1_ms);
        set!(t2_ms => radio.t2_ms);

        if let Some(mhz) = self.channel_bandwidth_mhz {
            let bw = Bandwidth::try_from(mhz)
                .map_err(|_| Error::config("channel_bandwidth_mhz", "must be 10 or 20"))?;
            cfg.pool.bandwidth = bw;
            cfg.pool.num_subchannels = bw.default_subchannels();
        }
        set!(number_of_subchannels => pool.num_subchannels);
        if let Some(bits) = &self.subframe_bitmap {
            cfg.pool.subframe_bitmap = bits.parse::<SubframeBitmap>()?;
        }
        if let Some(scheme) = &self.subchannel_scheme {
            cfg.pool.scheme = scheme.parse::<SubchannelScheme>()?;
        }

        cfg.scenario =
            match self.scenario.as_deref() {
                None | Some("static") => ScenarioKind::Static,
                Some("manhattan") => ScenarioKind::Manhattan,
                Some("trace") => ScenarioKind::Trace(self.trace_path.clone().ok_or_else(|| {
                    Error::config("trace_path", "required for scenario = \"trace\"")
                })?),
                Some(other) => {
                    return Err(Error::config(
                        "scenario",
                        format!("unknown scenario `{other}` (static, manhattan, trace)"),
                    ))
                }
            };
        cfg.los_mode = match self.los_mode.as_deref() {
            None | Some("geometric") => LosMode::Geometric,
            Some("all_los") => LosMode::AllLos,
            Some(other) => {
                return Err(Error::config(
                    "los_mode",
                    format!("unknown mode `{other}` (geometric, all_los)"),
                ))
            }
        };

        cfg.validate()?;
        Ok(cfg)
    }

    /// Every key set, as the resolved config would be written back.
    pub fn from_sim(cfg: &SimConfig) -> Self {
        let (scenario, trace_path) = match &cfg.scenario {
            ScenarioKind::Trace(p) => ("trace", Some(p.clone())),
            other => (other.label(), None),
        };
        ConfigFile {
            number_of_v_ues: Some(cfg.n_ues),
            simulation_time_ms: Some(cfg.duration_ms),
            warmup_ms: Some(cfg.warmup_ms),
            seed: Some(cfg.seed),
            scenario: Some(scenario.to_string()),
            trace_path,
            baseline_distance_min_m: Some(cfg.baseline_a_m),
            baseline_distance_m: Some(cfg.baseline_b_m),
            speed_kmh: Some(cfg.speed_kmh),
            los_mode: Some(
                match cfg.los_mode {
                    LosMode::Geometric => "geometric",
                    LosMode::AllLos => "all_los",
                }
                .to_string(),
            ),
            message_size_bytes: Some(cfg.radio.message_size_bytes),
            transmission_power_dbm: Some(cfg.radio.tx_power_dbm),
            antenna_height_m: Some(cfg.radio.antenna_height_m),
            resource_reservation_period_ms: Some(cfg.radio.rri_ms),
            t1_ms: Some(cfg.radio.t1_ms),
            t2_ms: Some(cfg.radio.t2_ms),
            resource_reselection_probability: Some(cfg.radio.resel_prob),
            modulation_and_coding_scheme: Some(cfg.radio.mcs),
            channel_bandwidth_mhz: Some(cfg.pool.bandwidth.mhz()),
            rbs_per_subchannel: Some(cfg.pool.rbs_per_subchannel),
            number_of_subchannels: Some(cfg.pool.num_subchannels),
            subframe_bitmap: Some(String::from(cfg.pool.subframe_bitmap)),
            subchannel_scheme: Some(
                match cfg.pool.scheme {
                    SubchannelScheme::Adjacent => "adjacent",
                    SubchannelScheme::NonAdjacent => "non_adjacent",
                }
                .to_string(),
            ),
            lowest_rb_subchannel_index: Some(cfg.pool.lowest_rb_index),
            carrier_frequency_ghz: Some(cfg.channel.fc_ghz),
            noise_figure_db: Some(cfg.phy.noise_figure_db),
            sinr_threshold_db: Some(cfg.phy.sinr_threshold_db),
            rsrp_decode_threshold_dbm: Some(cfg.phy.rsrp_decode_threshold_dbm),
            rsrp_exclusion_threshold_dbm: Some(cfg.rsrp_exclusion_threshold_dbm),
            exclude_unmonitored: Some(cfg.exclude_unmonitored),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }
}

/// Reads `path` (if any), applies `overrides` and resolves.
pub fn load_config(path: Option<&Path>, overrides: &ConfigFile) -> Result<SimConfig> {
    let file = match path {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    file.overlay(overrides).resolve()
}

/// Hash of the resolved config without its seed: runs that differ only in
/// the seed share it.
pub fn config_hash(cfg: &SimConfig) -> String {
    let mut flat = ConfigFile::from_sim(cfg);
    flat.seed = None;
    let digest = Sha256::digest(flat.to_toml().as_bytes());
    hex::encode(&digest[..8])
}
