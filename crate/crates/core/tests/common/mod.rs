//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

pub mod toy;

use std::collections::{BTreeMap, BTreeSet};

use cv2x::engine::{RunLog, SelectionKind, SimConfig};
use cv2x::phy::ReceptionStatus;
use cv2x::pool::ResourceId;
use cv2x::sps::SensedEntry;

/// PRR counts and sorted PIR samples recomputed from a full outcome log.
pub fn brute_force_metrics(log: &RunLog, cfg: &SimConfig) -> (u64, u64, Vec<u64>) {
    let (mut x, mut y) = (0u64, 0u64);
    let mut receptions: BTreeMap<(usize, usize), Vec<u64>> = BTreeMap::new();
    for o in &log.outcomes {
        if o.subframe < cfg.warmup_ms
            || !(o.distance_m > cfg.baseline_a_m && o.distance_m <= cfg.baseline_b_m)
        {
            continue;
        }
        y += 1;
        if o.status == ReceptionStatus::Received {
            x += 1;
            receptions
                .entry((o.sender, o.receiver))
                .or_default()
                .push(o.subframe);
        }
    }
    let mut pir: Vec<u64> = receptions
        .values()
        .flat_map(|times| times.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>())
        .collect();
    pir.sort_unstable();
    (x, y, pir)
}

/// Every transmission is judged at every other node, and a node never
/// receives in a subframe it transmits in.
pub fn check_half_duplex(log: &RunLog, n_ues: usize) -> Result<(), String> {
    let transmitting: BTreeSet<(u64, usize)> = log
        .transmissions
        .iter()
        .map(|t| (t.subframe, t.sender))
        .collect();
    let expected = log.transmissions.len() * n_ues.saturating_sub(1);
    if log.outcomes.len() != expected {
        return Err(format!(
            "{} outcomes for {} transmissions and {n_ues} nodes",
            log.outcomes.len(),
            log.transmissions.len()
        ));
    }
    for o in &log.outcomes {
        if o.sender == o.receiver {
            return Err(format!("self reception at {}", o.subframe));
        }
        let busy = transmitting.contains(&(o.subframe, o.receiver));
        if busy != (o.status == ReceptionStatus::HalfDuplexLoss) {
            return Err(format!(
                "receiver {} at {} busy={busy} but status {:?}",
                o.receiver, o.subframe, o.status
            ));
        }
    }
    Ok(())
}

/// Counters in [5, 15], new resources inside [n + T1, n + T2], kept
/// resources exactly one RRI later, and transmissions only on held
/// resources.
pub fn check_selections(log: &RunLog, cfg: &SimConfig) -> Result<(), String> {
    let (t1, t2, rri) = (cfg.radio.t1_ms, cfg.radio.t2_ms, cfg.radio.rri_ms);
    for s in &log.selections {
        if !(5..=15).contains(&s.counter) {
            return Err(format!(
                "counter {} of node {} at {}",
                s.counter, s.node, s.subframe
            ));
        }
        let sf = s.resource.subframe;
        match s.kind {
            SelectionKind::Initial | SelectionKind::Reselected => {
                if !(s.subframe + t1..=s.subframe + t2).contains(&sf) {
                    return Err(format!(
                        "node {} picked {} outside [{}, {}]",
                        s.node,
                        s.resource,
                        s.subframe + t1,
                        s.subframe + t2
                    ));
                }
            }
            SelectionKind::Kept => {
                if sf != s.subframe + rri {
                    return Err(format!("kept resource {} after {}", s.resource, s.subframe));
                }
            }
        }
    }

    // Replay: between selections a node transmits every RRI on one subchannel.
    let mut held: BTreeMap<usize, ResourceId> = BTreeMap::new();
    let mut events: Vec<(u64, u8, usize)> = Vec::new();
    for (i, s) in log.selections.iter().enumerate() {
        events.push((s.subframe, 1, i));
    }
    for (i, t) in log.transmissions.iter().enumerate() {
        events.push((t.subframe, 0, i));
    }
    events.sort_unstable();
    for (_, kind, i) in events {
        if kind == 1 {
            let s = &log.selections[i];
            held.insert(s.node, s.resource);
            continue;
        }
        let t = &log.transmissions[i];
        let Some(r) = held.get(&t.sender).copied() else {
            return Err(format!("node {} transmitted without a resource", t.sender));
        };
        if r.subframe != t.subframe || r.subchannel != t.subchannel {
            return Err(format!(
                "node {} sent on {}:{} but held {r}",
                t.sender, t.subframe, t.subchannel
            ));
        }
        held.insert(t.sender, ResourceId::new(t.subframe + rri, t.subchannel));
    }
    Ok(())
}

/// Candidate set by exhaustive enumeration: a single-subchannel resource
/// `(sf, sc)` of `[first, last]` is excluded iff some decoded reservation
/// on `sc` with RSRP at or above the threshold lands on `sf` after a whole
/// number (>= 1) of its periods.
pub fn reference_candidates(
    first: u64,
    last: u64,
    n_sub: u32,
    sensing: &[SensedEntry],
    threshold_dbm: f64,
) -> Vec<ResourceId> {
    let mut out = Vec::new();
    for sf in first..=last {
        for sc in 0..n_sub {
            let excluded = sensing.iter().any(|e| {
                let Some(d) = &e.decoded else { return false };
                if e.subchannel != sc || d.rsrp_dbm < threshold_dbm || d.rri_ms == 0 {
                    return false;
                }
                (1..=((last + 1) / d.rri_ms + 1)).any(|k| e.observed_subframe + k * d.rri_ms == sf)
            });
            if !excluded {
                out.push(ResourceId::new(sf, sc));
            }
        }
    }
    out
}

/// Mean linear RSSI (as dBm) over sensed entries on the same subchannel
/// whose subframe matches modulo `period`; `-inf` if none.
pub fn reference_rssi(r: &ResourceId, sensing: &[SensedEntry], period: u64) -> f64 {
    let matching: Vec<f64> = sensing
        .iter()
        .filter(|e| {
            e.subchannel == r.subchannel && e.observed_subframe % period == r.subframe % period
        })
        .map(|e| 10f64.powf(e.rssi_dbm / 10.0))
        .collect();
    if matching.is_empty() {
        f64::NEG_INFINITY
    } else {
        10.0 * (matching.iter().sum::<f64>() / matching.len() as f64).log10()
    }
}

/// The `k` lowest candidates by [`reference_rssi`], found by checking every
/// candidate against all others: `r` is in the set iff fewer than `k`
/// candidates are strictly quieter. With distinct RSSI values this is
/// exactly the `k` quietest.
pub fn reference_lowest(
    candidates: &[ResourceId],
    k: usize,
    sensing: &[SensedEntry],
    period: u64,
) -> BTreeSet<ResourceId> {
    candidates
        .iter()
        .filter(|r| {
            let own = reference_rssi(r, sensing, period);
            candidates
                .iter()
                .filter(|o| reference_rssi(o, sensing, period) < own)
                .count()
                < k
        })
        .copied()
        .collect()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
