//! Subframe-stepped simulation of one scenario.
//!
//! Every subframe runs the same fixed sequence: positions are refreshed,
//! UEs due for their first selection pick a resource, UEs holding a
//! resource for this subframe transmit (and run the counter/reselection
//! logic for their next one), the PHY resolves every receiver, metrics take
//! the outcomes once the warm-up is over and idle UEs append what they heard
//! to their sensing history. All randomness comes from one ChaCha stream
//! seeded by the config: placement and mobility first, then the cold-start
//! offsets in node order, then MAC draws in the order they happen.

use std::path::PathBuf;
use std::time::Instant;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{classify_los, pathloss_db, ChannelParams, LinkGeometry, LosState};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::metrics::{Metrics, ReceiverReport};
use crate::mobility::{
    build_manhattan_scenario, build_static_scenario, load_trace, trace_scenario, ManhattanParams,
    Scenario, StreetMap,
};
use crate::phy::{
    dbm_to_mw, measure_for_sensing, resolve_receiver, AirTransmission, NodeId, PhyParams,
    ReceptionOutcome, ReceptionStatus, SubframeAirState, Transmission,
};
use crate::pool::{
    subchannels_per_packet, ResourceId, ResourcePoolConfig, UeRadioConfig, BITMAP_PERIOD,
};
use crate::sps::{ReselectionDecision, SpsParams, SpsState, SENSING_WINDOW_MS};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Static,
    Manhattan,
    Trace(PathBuf),
}

impl ScenarioKind {
    /// Label used in the CSV outputs.
    pub fn label(&self) -> &'static str {
        match self {
            ScenarioKind::Static => "static",
            ScenarioKind::Manhattan => "manhattan",
            ScenarioKind::Trace(_) => "trace",
        }
    }
}

/// How links on the street grid are classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LosMode {
    /// NLOS whenever a building block cuts the straight line.
    Geometric,
    AllLos,
}

/// Which per-event logs a run keeps. All off by default; the outcome log in
/// particular grows with `n_ues^2 * duration / rri`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RecordOptions {
    pub outcomes: bool,
    pub transmissions: bool,
    pub selections: bool,
    pub pir_samples: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub duration_ms: u64,
    pub warmup_ms: u64,
    pub seed: u64,
    pub n_ues: usize,
    pub scenario: ScenarioKind,
    pub pool: ResourcePoolConfig,
    pub radio: UeRadioConfig,
    pub phy: PhyParams,
    /// Antenna heights are taken from `radio.antenna_height_m` at run time.
    pub channel: ChannelParams,
    pub los_mode: LosMode,
    pub speed_kmh: f64,
    pub rsrp_exclusion_threshold_dbm: f64,
    pub exclude_unmonitored: bool,
    pub baseline_a_m: f64,
    pub baseline_b_m: f64,
    pub record: RecordOptions,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            duration_ms: 30_000,
            warmup_ms: 1_000,
            seed: 1,
            n_ues: 50,
            scenario: ScenarioKind::Static,
            pool: ResourcePoolConfig::default(),
            radio: UeRadioConfig::default(),
            phy: PhyParams::default(),
            channel: ChannelParams::default(),
            los_mode: LosMode::Geometric,
            speed_kmh: ManhattanParams::default().speed_kmh,
            rsrp_exclusion_threshold_dbm: SpsParams::default().rsrp_exclusion_threshold_dbm,
            exclude_unmonitored: true,
            baseline_a_m: 0.0,
            baseline_b_m: 150.0,
            record: RecordOptions::default(),
        }
    }
}

impl SimConfig {
    pub fn channel_params(&self) -> ChannelParams {
        ChannelParams {
            h_bs_m: self.radio.antenna_height_m,
            h_ms_m: self.radio.antenna_height_m,
            ..self.channel.clone()
        }
    }

    pub fn sps_params(&self) -> SpsParams {
        SpsParams {
            rsrp_exclusion_threshold_dbm: self.rsrp_exclusion_threshold_dbm,
            exclude_unmonitored: self.exclude_unmonitored,
            ..SpsParams::from_radio(&self.radio)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pool.validate()?;
        self.radio.validate()?;
        self.channel_params().validate()?;
        subchannels_per_packet(&self.radio, &self.pool)?;
        if self.duration_ms <= self.warmup_ms {
            return Err(Error::config(
                "duration_ms",
                format!("must exceed warmup_ms ({})", self.warmup_ms),
            ));
        }
        if self.warmup_ms < SENSING_WINDOW_MS {
            warn!(
                "warmup_ms = {} is shorter than the {SENSING_WINDOW_MS} ms sensing window",
                self.warmup_ms
            );
        }
        if !(self.baseline_a_m >= 0.0 && self.baseline_b_m > self.baseline_a_m) {
            return Err(Error::config(
                "baseline_distance_m",
                "need 0 <= a < b for the baseline annulus (a, b]",
            ));
        }
        if !self.pool.subframe_bitmap.is_full() && !self.radio.rri_ms.is_multiple_of(BITMAP_PERIOD) {
            return Err(Error::config(
                "resource_reservation_period_ms",
                format!("must be a multiple of {BITMAP_PERIOD} ms with a partial subframe bitmap"),
            ));
        }
        if self.scenario == ScenarioKind::Manhattan && !(self.speed_kmh > 0.0) {
            return Err(Error::config("speed_kmh", "must be positive"));
        }
        if !self.rsrp_exclusion_threshold_dbm.is_finite() {
            return Err(Error::config(
                "rsrp_exclusion_threshold_dbm",
                "must be finite",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionKind {
    Initial,
    Reselected,
    Kept,
}

/// A selection or counter expiry of one UE. `resource` is the next resource
/// it will use and `counter` the freshly drawn reselection counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionRecord {
    pub subframe: u64,
    pub node: NodeId,
    pub kind: SelectionKind,
    pub resource: ResourceId,
    pub counter: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeRecord {
    pub subframe: u64,
    pub sender: NodeId,
    pub receiver: NodeId,
    pub packet_id: u64,
    pub distance_m: f64,
    pub status: ReceptionStatus,
    pub sinr_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransmissionRecord {
    pub subframe: u64,
    pub sender: NodeId,
    pub packet_id: u64,
    pub subchannel: u32,
    pub n_subchannels: u32,
}

/// Per-event logs; the outcome log covers the whole run, warm-up included.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub outcomes: Vec<OutcomeRecord>,
    pub transmissions: Vec<TransmissionRecord>,
    pub selections: Vec<SelectionRecord>,
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub config_hash: String,
    pub seed: u64,
    pub n_ues: usize,
    pub metrics: Metrics,
    pub total_transmissions: u64,
    pub wall_time_s: f64,
    pub log: RunLog,
}

fn build_scenario<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<Scenario> {
    Ok(match &config.scenario {
        ScenarioKind::Static => build_static_scenario(config.n_ues, rng),
        ScenarioKind::Manhattan => {
            let params = ManhattanParams {
                speed_kmh: config.speed_kmh,
                duration_ms: config.duration_ms,
                ..ManhattanParams::default()
            };
            build_manhattan_scenario(config.n_ues, &params, rng)
        }
        ScenarioKind::Trace(path) => {
            let trace = load_trace(path)?;
            if config.n_ues != trace.len() {
                debug!(
                    "trace {} defines {} nodes; n_ues = {} ignored",
                    path.display(),
                    trace.len(),
                    config.n_ues
                );
            }
            trace_scenario(trace)
        }
    })
}

/// Distance and linear received power of every directed link from `tx`.
struct LinkBudget<'a> {
    channel: ChannelParams,
    tx_power_dbm: f64,
    los_mode: LosMode,
    map: &'a StreetMap,
}

impl LinkBudget<'_> {
    fn link(&self, a: &Point, b: &Point) -> (f64, f64) {
        let distance_m = a.distance(b);
        let los = match self.los_mode {
            LosMode::AllLos => LosState::Los,
            LosMode::Geometric => classify_los(a, b, self.map),
        };
        let pl = pathloss_db(&LinkGeometry::new(distance_m, los), &self.channel);
        (distance_m, dbm_to_mw(self.tx_power_dbm - pl))
    }

    fn row(&self, tx: NodeId, positions: &[Point], dist: &mut [f64], power_mw: &mut [f64]) {
        for (rx, p) in positions.iter().enumerate() {
            if rx == tx {
                dist[rx] = 0.0;
                power_mw[rx] = 0.0;
            } else {
                (dist[rx], power_mw[rx]) = self.link(&positions[tx], p);
            }
        }
    }
}

pub fn run(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scenario = build_scenario(config, &mut rng)?;
    let n = scenario.trace.len();
    let pool = &config.pool;
    let width = subchannels_per_packet(&config.radio, pool)?;
    let rri = config.radio.rri_ms;

    let budget = LinkBudget {
        channel: config.channel_params(),
        tx_power_dbm: config.radio.tx_power_dbm,
        los_mode: config.los_mode,
        map: &scenario.map,
    };

    let starts: Vec<u64> = (0..n).map(|_| rng.gen_range(0..rri)).collect();
    let sps_params = config.sps_params();
    let mut sps: Vec<SpsState> = (0..n)
        .map(|_| SpsState::new(sps_params.clone(), width))
        .collect();
    let mut packet_ids = vec![0u64; n];

    let mut metrics = Metrics::new(
        n,
        config.baseline_a_m,
        config.baseline_b_m,
        config.record.pir_samples,
    );
    let mut log = RunLog::default();
    let mut total_transmissions = 0u64;

    let mut cursor = scenario.trace.cursor();
    let mut positions: Vec<Point> = Vec::with_capacity(n);
    cursor.positions_at(0.0, &mut positions);

    // Fixed geometry: one table for the whole run.
    let is_static = scenario.is_static();
    let (static_dist, static_mw) = if is_static {
        let mut dist = vec![0.0; n * n];
        let mut mw = vec![0.0; n * n];
        for tx in 0..n {
            budget.row(
                tx,
                &positions,
                &mut dist[tx * n..(tx + 1) * n],
                &mut mw[tx * n..(tx + 1) * n],
            );
        }
        (dist, mw)
    } else {
        (Vec::new(), Vec::new())
    };
    // Rows of the current transmitters in mobile scenarios, indexed like
    // `air.transmissions`.
    let mut dyn_dist: Vec<Vec<f64>> = Vec::new();

    let mut outcomes: Vec<ReceptionOutcome> = Vec::new();

    for t in 0..config.duration_ms {
        if !is_static {
            cursor.positions_at(t as f64, &mut positions);
        }

        for (node, state) in sps.iter_mut().enumerate() {
            if starts[node] == t {
                let resource = state.initial_selection(t, pool, &mut rng);
                if config.record.selections {
                    log.selections.push(SelectionRecord {
                        subframe: t,
                        node,
                        kind: SelectionKind::Initial,
                        resource,
                        counter: state.reselection_counter(),
                    });
                }
            }
        }

        let mut air = SubframeAirState::new(t);
        dyn_dist.clear();
        for node in 0..n {
            if sps[node].next_resource().map(|r| r.subframe) != Some(t) {
                continue;
            }
            let grant = sps[node].on_transmit_opportunity(t, pool, &mut rng);
            if config.record.selections && grant.decision != ReselectionDecision::Continue {
                let kind = match grant.decision {
                    ReselectionDecision::Reselected { .. } => SelectionKind::Reselected,
                    _ => SelectionKind::Kept,
                };
                log.selections.push(SelectionRecord {
                    subframe: t,
                    node,
                    kind,
                    resource: sps[node].next_resource().expect("resource after grant"),
                    counter: sps[node].reselection_counter(),
                });
            }
            let packet_id = packet_ids[node];
            packet_ids[node] += 1;
            total_transmissions += 1;
            let tx = Transmission {
                sender: node,
                packet_id,
                resource: grant.resource,
                n_subchannels: width,
                rri_ms: rri,
            };
            if config.record.transmissions {
                log.transmissions.push(TransmissionRecord {
                    subframe: t,
                    sender: node,
                    packet_id,
                    subchannel: grant.resource.subchannel,
                    n_subchannels: width,
                });
            }
            let row_mw = if is_static {
                static_mw[node * n..(node + 1) * n].to_vec()
            } else {
                let mut dist = vec![0.0; n];
                let mut mw = vec![0.0; n];
                budget.row(node, &positions, &mut dist, &mut mw);
                dyn_dist.push(dist);
                mw
            };
            air.transmissions.push(AirTransmission::from_mw(tx, row_mw));
        }

        if air.transmissions.is_empty() {
            continue;
        }

        let measuring = t >= config.warmup_ms;
        for receiver in 0..n {
            outcomes.clear();
            resolve_receiver(&air, receiver, pool, &config.phy, &mut outcomes);
            if measuring || config.record.outcomes {
                for o in &outcomes {
                    let distance_m = if is_static {
                        static_dist[o.sender * n + receiver]
                    } else {
                        let idx = air
                            .transmissions
                            .iter()
                            .position(|a| a.tx.sender == o.sender)
                            .expect("outcome of an unknown sender");
                        dyn_dist[idx][receiver]
                    };
                    if measuring {
                        metrics.record_one(
                            o.sender,
                            t,
                            &ReceiverReport {
                                receiver,
                                distance_m,
                                status: o.status,
                            },
                        );
                    }
                    if config.record.outcomes {
                        log.outcomes.push(OutcomeRecord {
                            subframe: t,
                            sender: o.sender,
                            receiver,
                            packet_id: o.packet_id,
                            distance_m,
                            status: o.status,
                            sinr_db: o.sinr_db,
                        });
                    }
                }
            }
            if !air.is_transmitting(receiver) {
                let heard = measure_for_sensing(&air, receiver, &outcomes);
                sps[receiver].ingest_sensing(heard, t);
            }
        }
    }

    Ok(SimResult {
        config_hash: crate::config::config_hash(config),
        seed: config.seed,
        n_ues: n,
        metrics,
        total_transmissions,
        wall_time_s: started.elapsed().as_secs_f64(),
        log,
    })
}
