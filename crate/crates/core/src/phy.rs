//! Per-subframe link abstraction: interference, SINR, half-duplex and the
//! measurements the scheduler senses.

use serde::{Deserialize, Serialize};

use crate::pool::{ResourceId, ResourcePoolConfig, RB_BANDWIDTH_HZ};
use crate::sps::{DecodedReservation, SensedEntry};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhyParams {
    pub noise_figure_db: f64,
    pub thermal_noise_density_dbm_hz: f64,
    /// Step-function reception threshold; 12 dB stands in for MCS 20.
    pub sinr_threshold_db: f64,
    pub rsrp_decode_threshold_dbm: f64,
}

impl Default for PhyParams {
    fn default() -> Self {
        Self {
            noise_figure_db: 9.0,
            thermal_noise_density_dbm_hz: -174.0,
            sinr_threshold_db: 12.0,
            rsrp_decode_threshold_dbm: -110.0,
        }
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

pub fn noise_power_for_bandwidth_dbm(bandwidth_hz: f64, phy: &PhyParams) -> f64 {
    phy.thermal_noise_density_dbm_hz + 10.0 * bandwidth_hz.log10() + phy.noise_figure_db
}

/// Thermal noise plus noise figure over `n_subchannels` subchannels.
pub fn noise_power_dbm(pool: &ResourcePoolConfig, phy: &PhyParams, n_subchannels: u32) -> f64 {
    let hz = f64::from(n_subchannels * pool.rbs_per_subchannel) * RB_BANDWIDTH_HZ;
    noise_power_for_bandwidth_dbm(hz, phy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transmission {
    pub sender: NodeId,
    pub packet_id: u64,
    pub resource: ResourceId,
    pub n_subchannels: u32,
    /// Reservation period announced in the control information.
    pub rri_ms: u64,
}

impl Transmission {
    pub fn subchannels(&self) -> std::ops::Range<u32> {
        self.resource.subchannel..self.resource.subchannel + self.n_subchannels
    }

    pub fn covers(&self, subchannel: u32) -> bool {
        self.subchannels().contains(&subchannel)
    }

    pub fn overlaps(&self, other: &Transmission) -> bool {
        let (a, b) = (self.subchannels(), other.subchannels());
        a.start < b.end && b.start < a.end
    }
}

/// A transmission on the air together with its received power at every node.
#[derive(Debug, Clone)]
pub struct AirTransmission {
    pub tx: Transmission,
    rx_power_mw: Vec<f64>,
}

impl AirTransmission {
    /// `rx_power_dbm[r]` is the power node `r` receives; the sender's own
    /// entry is ignored.
    pub fn new(tx: Transmission, rx_power_dbm: &[f64]) -> Self {
        Self {
            tx,
            rx_power_mw: rx_power_dbm.iter().map(|&p| dbm_to_mw(p)).collect(),
        }
    }

    pub fn from_mw(tx: Transmission, rx_power_mw: Vec<f64>) -> Self {
        Self { tx, rx_power_mw }
    }

    pub fn power_mw(&self, receiver: NodeId) -> f64 {
        self.rx_power_mw[receiver]
    }

    pub fn power_dbm(&self, receiver: NodeId) -> f64 {
        mw_to_dbm(self.rx_power_mw[receiver])
    }
}

#[derive(Debug, Clone, Default)]
pub struct SubframeAirState {
    pub subframe: u64,
    pub transmissions: Vec<AirTransmission>,
}

impl SubframeAirState {
    pub fn new(subframe: u64) -> Self {
        Self {
            subframe,
            transmissions: Vec::new(),
        }
    }

    pub fn is_transmitting(&self, node: NodeId) -> bool {
        self.transmissions.iter().any(|t| t.tx.sender == node)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReceptionStatus {
    Received,
    HalfDuplexLoss,
    SinrFail,
    BelowSensitivity,
}

impl ReceptionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ReceptionStatus::Received => "RECEIVED",
            ReceptionStatus::HalfDuplexLoss => "HALF_DUPLEX_LOSS",
            ReceptionStatus::SinrFail => "SINR_FAIL",
            ReceptionStatus::BelowSensitivity => "BELOW_SENSITIVITY",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceptionOutcome {
    pub receiver: NodeId,
    pub sender: NodeId,
    pub packet_id: u64,
    pub status: ReceptionStatus,
    /// NaN for half-duplex losses.
    pub sinr_db: f64,
}

/// SINR of transmission `idx` at `receiver`, in dB.
pub fn sinr_db(
    state: &SubframeAirState,
    idx: usize,
    receiver: NodeId,
    pool: &ResourcePoolConfig,
    phy: &PhyParams,
) -> f64 {
    let wanted = &state.transmissions[idx];
    let interference: f64 = state
        .transmissions
        .iter()
        .enumerate()
        .filter(|(j, other)| *j != idx && other.tx.overlaps(&wanted.tx))
        .map(|(_, other)| other.power_mw(receiver))
        .sum();
    let noise = dbm_to_mw(noise_power_dbm(pool, phy, wanted.tx.n_subchannels));
    mw_to_dbm(wanted.power_mw(receiver) / (noise + interference))
}

/// Outcomes at one receiver for every transmission it did not send itself,
/// appended to `out` in transmission order.
pub fn resolve_receiver(
    state: &SubframeAirState,
    receiver: NodeId,
    pool: &ResourcePoolConfig,
    phy: &PhyParams,
    out: &mut Vec<ReceptionOutcome>,
) {
    let busy = state.is_transmitting(receiver);
    for (idx, air) in state.transmissions.iter().enumerate() {
        if air.tx.sender == receiver {
            continue;
        }
        let (status, sinr) = if busy {
            (ReceptionStatus::HalfDuplexLoss, f64::NAN)
        } else {
            let sinr = sinr_db(state, idx, receiver, pool, phy);
            let status = if air.power_dbm(receiver) < phy.rsrp_decode_threshold_dbm {
                ReceptionStatus::BelowSensitivity
            } else if sinr < phy.sinr_threshold_db {
                ReceptionStatus::SinrFail
            } else {
                ReceptionStatus::Received
            };
            (status, sinr)
        };
        out.push(ReceptionOutcome {
            receiver,
            sender: air.tx.sender,
            packet_id: air.tx.packet_id,
            status,
            sinr_db: sinr,
        });
    }
}

/// Outcomes for every (receiver, transmission) pair, receiver-major.
pub fn resolve_subframe(
    state: &SubframeAirState,
    n_nodes: usize,
    pool: &ResourcePoolConfig,
    phy: &PhyParams,
) -> Vec<ReceptionOutcome> {
    let mut out = Vec::with_capacity(n_nodes * state.transmissions.len());
    for receiver in 0..n_nodes {
        resolve_receiver(state, receiver, pool, phy, &mut out);
    }
    out
}

/// Sensing measurements taken by `receiver` in this subframe: one entry per
/// occupied subchannel with the total power seen there, carrying the
/// reservation of the transmission decoded on it, if any. A transmitting
/// receiver senses nothing.
///
/// `outcomes` must hold this receiver's outcomes for the subframe.
pub fn measure_for_sensing(
    state: &SubframeAirState,
    receiver: NodeId,
    outcomes: &[ReceptionOutcome],
) -> Vec<SensedEntry> {
    if state.is_transmitting(receiver) {
        return Vec::new();
    }
    let mut occupied: Vec<u32> = state
        .transmissions
        .iter()
        .flat_map(|t| t.tx.subchannels())
        .collect();
    occupied.sort_unstable();
    occupied.dedup();

    occupied
        .into_iter()
        .map(|sc| {
            let on_subchannel = || state.transmissions.iter().filter(move |t| t.tx.covers(sc));
            let rssi_mw: f64 = on_subchannel().map(|t| t.power_mw(receiver)).sum();
            // At most one overlapping transmission clears a non-negative SINR
            // threshold; with a negative one keep the strongest.
            let decoded = on_subchannel()
                .filter(|t| {
                    outcomes.iter().any(|o| {
                        o.receiver == receiver
                            && o.sender == t.tx.sender
                            && o.status == ReceptionStatus::Received
                    })
                })
                .max_by(|a, b| a.power_mw(receiver).total_cmp(&b.power_mw(receiver)))
                .map(|t| DecodedReservation {
                    source: t.tx.sender,
                    rri_ms: t.tx.rri_ms,
                    rsrp_dbm: t.power_dbm(receiver),
                });
            SensedEntry {
                observed_subframe: state.subframe,
                subchannel: sc,
                rssi_dbm: mw_to_dbm(rssi_mw),
                decoded,
            }
        })
        .collect()
}
