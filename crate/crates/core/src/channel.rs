//! WINNER+ B1 (urban microcell) path loss for vehicle-to-vehicle links.
//!
//! All formulas take the carrier frequency in GHz, except the breakpoint
//! distance which uses it in Hz. There is no shadowing or fast fading: path
//! loss is a deterministic function of distance and the LOS state.
//!
//! Below the breakpoint the LOS branch uses the free-space-like slope and
//! above it the 40 dB/decade branch. With 1.5 m antennas the two branches
//! do not meet at the breakpoint (about 13.8 dB drop); see
//! [`los_breakpoint_jump_db`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::mobility::StreetMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub fc_ghz: f64,
    pub h_bs_m: f64,
    pub h_ms_m: f64,
    pub min_distance_m: f64,
    pub c_mps: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            fc_ghz: 5.9,
            h_bs_m: 1.5,
            h_ms_m: 1.5,
            min_distance_m: 3.0,
            c_mps: 3e8,
        }
    }
}

impl ChannelParams {
    pub fn with_antenna_height(h_m: f64) -> Self {
        Self {
            h_bs_m: h_m,
            h_ms_m: h_m,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fc_ghz > 0.0) {
            return Err(Error::config("carrier_frequency_ghz", "must be positive"));
        }
        if !(self.h_bs_m > 1.0 && self.h_ms_m > 1.0) {
            return Err(Error::config("antenna_height_m", "must exceed 1 m"));
        }
        if !(self.min_distance_m > 0.0) {
            return Err(Error::config("min_distance_m", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LosState {
    Los,
    Nlos,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub distance_m: f64,
    pub los: LosState,
}

impl LinkGeometry {
    pub fn new(distance_m: f64, los: LosState) -> Self {
        Self { distance_m, los }
    }
}

/// Effective breakpoint distance `4 h'_BS h'_MS f_c / c` with `h' = h - 1 m`.
pub fn breakpoint_distance(p: &ChannelParams) -> f64 {
    4.0 * (p.h_bs_m - 1.0) * (p.h_ms_m - 1.0) * (p.fc_ghz * 1e9) / p.c_mps
}

pub fn pathloss_los_db(d: f64, p: &ChannelParams) -> f64 {
    let d = d.max(p.min_distance_m);
    if d < breakpoint_distance(p) {
        22.7 * d.log10() + 27.0 + 20.0 * p.fc_ghz.log10()
    } else {
        40.0 * d.log10() + 9.0 - 16.2 * p.h_bs_m.log10() - 16.2 * p.h_ms_m.log10()
            + 3.8 * p.fc_ghz.log10()
    }
}

pub fn pathloss_nlos_db(d: f64, p: &ChannelParams) -> f64 {
    let d = d.max(p.min_distance_m);
    let hb = p.h_bs_m.log10();
    (44.9 - 6.55 * hb) * d.log10() + 5.83 * hb + 15.38 + 23.0 * p.fc_ghz.log10()
}

pub fn pathloss_db(geometry: &LinkGeometry, p: &ChannelParams) -> f64 {
    match geometry.los {
        LosState::Los => pathloss_los_db(geometry.distance_m, p),
        LosState::Nlos => pathloss_nlos_db(geometry.distance_m, p),
    }
}

/// Received power with 0 dBi antennas.
pub fn received_power_dbm(tx_power_dbm: f64, geometry: &LinkGeometry, p: &ChannelParams) -> f64 {
    tx_power_dbm - pathloss_db(geometry, p)
}

/// Signed step of the LOS curve at the breakpoint (after minus before).
pub fn los_breakpoint_jump_db(p: &ChannelParams) -> f64 {
    let bp = breakpoint_distance(p);
    let before = 22.7 * bp.log10() + 27.0 + 20.0 * p.fc_ghz.log10();
    pathloss_los_db(bp, p) - before
}

/// LOS iff the straight segment between the nodes clears every building.
/// Maps without buildings (the open square) are always LOS.
pub fn classify_los(tx: &Point, rx: &Point, map: &StreetMap) -> LosState {
    if map.blocks.iter().any(|b| b.intersects_segment(tx, rx)) {
        LosState::Nlos
    } else {
        LosState::Los
    }
}
