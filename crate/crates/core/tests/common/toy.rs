//! The 10-subframe x 2-subchannel pool used by the SPS oracle checks.

use cv2x::pool::ResourcePoolConfig;
use cv2x::sps::{DecodedReservation, SensedEntry, SpsParams, SpsState};

pub const NOW: u64 = 1_000;
pub const RRI: u64 = 10;
pub const K: usize = 4; // ceil(0.2 * 20)

pub fn toy_pool() -> ResourcePoolConfig {
    ResourcePoolConfig {
        num_subchannels: 2,
        ..ResourcePoolConfig::default()
    }
}

pub fn toy_params() -> SpsParams {
    SpsParams {
        rri_ms: RRI,
        t1_ms: 1,
        t2_ms: 10,
        exclude_unmonitored: false,
        ..SpsParams::default()
    }
}

pub fn state_with(mut sensing: Vec<SensedEntry>) -> SpsState {
    sensing.sort_by_key(|e| e.observed_subframe);
    let mut state = SpsState::new(toy_params(), 1);
    state.ingest_sensing(sensing, NOW);
    state
}

pub fn entry(t: u64, sc: u32, rssi: f64, decoded: Option<(u64, f64)>) -> SensedEntry {
    SensedEntry {
        observed_subframe: t,
        subchannel: sc,
        rssi_dbm: rssi,
        decoded: decoded.map(|(rri_ms, rsrp_dbm)| DecodedReservation {
            source: 1,
            rri_ms,
            rsrp_dbm,
        }),
    }
}

pub fn value(phase: u64, sc: u32) -> f64 {
    // distinct levels 0..19 over the 20 (phase, subchannel) slots
    -100.0 + ((7 * phase + 10 * u64::from(sc)) % 20) as f64
}

/// Every (phase, subchannel) slot observed once at a distinct level, plus
/// three decoded reservations: one excluding 1005 on subchannel 0, one too
/// weak to exclude 1002 on subchannel 1 and a 100 ms one excluding 1003 on
/// subchannel 1.
pub fn scripted_history() -> Vec<SensedEntry> {
    let mut sensing: Vec<SensedEntry> = (0..10)
        .flat_map(|p| (0..2).map(move |sc| entry(980 + p, sc, value(p, sc), None)))
        .collect();
    sensing.push(entry(995, 0, value(5, 0), Some((10, -90.0))));
    sensing.push(entry(992, 1, value(2, 1), Some((10, -120.0))));
    sensing.push(entry(903, 1, value(3, 1), Some((100, -100.0))));
    sensing
}
