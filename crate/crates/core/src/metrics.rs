//! Packet Reception Ratio and Packet Inter-Reception accumulators.
//!
//! PRR is `X / Y` where `Y` counts receivers inside the baseline annulus
//! `(a, b]` around the sender at transmission time and `X` those among them
//! that received the packet. PIR is the gap between two successive
//! successful receptions at B of packets sent by A, tracked per ordered pair
//! for receivers inside the same annulus.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::phy::{NodeId, ReceptionStatus};

/// Quantiles reported in `pir.csv`.
pub const STANDARD_QUANTILES: [f64; 6] = [0.001, 0.25, 0.5, 0.75, 0.99, 0.999];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrrAccumulator {
    pub baseline_a_m: f64,
    pub baseline_b_m: f64,
    pub x: u64,
    pub y: u64,
}

impl PrrAccumulator {
    pub fn new(baseline_a_m: f64, baseline_b_m: f64) -> Self {
        Self {
            baseline_a_m,
            baseline_b_m,
            x: 0,
            y: 0,
        }
    }

    pub fn in_baseline(&self, distance_m: f64) -> bool {
        distance_m > self.baseline_a_m && distance_m <= self.baseline_b_m
    }

    pub fn record(&mut self, distance_m: f64, received: bool) {
        if self.in_baseline(distance_m) {
            self.y += 1;
            self.x += u64::from(received);
        }
    }

    /// `None` when no receiver was ever eligible.
    pub fn prr(&self) -> Option<f64> {
        (self.y > 0).then(|| self.x as f64 / self.y as f64)
    }

    pub fn merge(&mut self, other: &PrrAccumulator) {
        self.x += other.x;
        self.y += other.y;
    }
}

impl Default for PrrAccumulator {
    fn default() -> Self {
        Self::new(0.0, 150.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PirSample {
    pub sender: NodeId,
    pub receiver: NodeId,
    pub subframe: u64,
    pub pir_ms: u64,
}

const NEVER: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PirTracker {
    n_nodes: usize,
    last: Vec<u64>,
    histogram: BTreeMap<u64, u64>,
    raw: Option<Vec<PirSample>>,
}

impl PirTracker {
    pub fn new(n_nodes: usize, keep_raw: bool) -> Self {
        Self {
            n_nodes,
            last: vec![NEVER; n_nodes * n_nodes],
            histogram: BTreeMap::new(),
            raw: keep_raw.then(Vec::new),
        }
    }

    /// Successful reception at `receiver` of a packet sent by `sender`.
    pub fn record_reception(&mut self, sender: NodeId, receiver: NodeId, subframe: u64) {
        let slot = &mut self.last[sender * self.n_nodes + receiver];
        if *slot != NEVER && subframe > *slot {
            let pir_ms = subframe - *slot;
            *self.histogram.entry(pir_ms).or_default() += 1;
            if let Some(raw) = &mut self.raw {
                raw.push(PirSample {
                    sender,
                    receiver,
                    subframe,
                    pir_ms,
                });
            }
        }
        *slot = subframe;
    }

    pub fn n_samples(&self) -> u64 {
        self.histogram.values().sum()
    }

    /// Sample counts keyed by PIR in ms.
    pub fn histogram(&self) -> &BTreeMap<u64, u64> {
        &self.histogram
    }

    pub fn raw_samples(&self) -> Option<&[PirSample]> {
        self.raw.as_deref()
    }

    pub fn quantiles(&self, qs: &[f64]) -> Option<Vec<u64>> {
        histogram_quantiles(&self.histogram, qs)
    }

    pub fn merge(&mut self, other: &PirTracker) {
        for (&k, &v) in &other.histogram {
            *self.histogram.entry(k).or_default() += v;
        }
    }
}

/// 1-based rank of quantile `q` among `n` samples: `floor(q n) + 1`,
/// clamped to `[1, n]`.
pub fn quantile_rank(q: f64, n: u64) -> u64 {
    let scaled = (q * n as f64 + 1e-9).floor() as u64;
    (scaled + 1).clamp(1, n)
}

/// Order-statistic quantiles of a value histogram; `None` without samples.
pub fn histogram_quantiles(histogram: &BTreeMap<u64, u64>, qs: &[f64]) -> Option<Vec<u64>> {
    let n: u64 = histogram.values().sum();
    if n == 0 {
        return None;
    }
    Some(
        qs.iter()
            .map(|&q| {
                let rank = quantile_rank(q, n);
                let mut seen = 0;
                for (&value, &count) in histogram {
                    seen += count;
                    if seen >= rank {
                        return value;
                    }
                }
                unreachable!("rank {rank} beyond {n} samples")
            })
            .collect(),
    )
}

/// Quantiles of a plain sample list, same rank rule as the histogram form.
pub fn sample_quantiles(samples: &[u64], qs: &[f64]) -> Option<Vec<u64>> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as u64;
    Some(
        qs.iter()
            .map(|&q| sorted[(quantile_rank(q, n) - 1) as usize])
            .collect(),
    )
}

/// Receiver-side view of one transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverReport {
    pub receiver: NodeId,
    pub distance_m: f64,
    pub status: ReceptionStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub prr: PrrAccumulator,
    pub pir: PirTracker,
}

impl Metrics {
    pub fn new(n_nodes: usize, baseline_a_m: f64, baseline_b_m: f64, keep_raw_pir: bool) -> Self {
        Self {
            prr: PrrAccumulator::new(baseline_a_m, baseline_b_m),
            pir: PirTracker::new(n_nodes, keep_raw_pir),
        }
    }

    pub fn record_transmission(
        &mut self,
        sender: NodeId,
        subframe: u64,
        reports: &[ReceiverReport],
    ) {
        for r in reports {
            self.record_one(sender, subframe, r);
        }
    }

    pub fn record_one(&mut self, sender: NodeId, subframe: u64, r: &ReceiverReport) {
        if r.receiver == sender || !self.prr.in_baseline(r.distance_m) {
            return;
        }
        let received = r.status == ReceptionStatus::Received;
        self.prr.record(r.distance_m, received);
        if received {
            self.pir.record_reception(sender, r.receiver, subframe);
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn report(receiver: NodeId, distance_m: f64, ok: bool) -> ReceiverReport {
        ReceiverReport {
            receiver,
            distance_m,
            status: if ok {
                ReceptionStatus::Received
            } else {
                ReceptionStatus::SinrFail
            },
        }
    }

    #[test]
    fn prr_arithmetic() {
        let mut m = Metrics::new(6, 0.0, 150.0, false);
        m.record_transmission(
            0,
            10,
            &[
                report(1, 20.0, true),
                report(2, 40.0, true),
                report(3, 60.0, false),
                report(4, 150.0, true),
                report(5, 150.5, true),
            ],
        );
        assert_eq!((m.prr.x, m.prr.y), (3, 4));
        assert_eq!(m.prr.prr(), Some(0.75));
    }

    #[test]
    fn prr_edge_values() {
        let mut acc = PrrAccumulator::default();
        assert_eq!(acc.prr(), None);
        acc.record(10.0, false);
        assert_eq!(acc.prr(), Some(0.0));
        let full = PrrAccumulator {
            x: 5,
            y: 5,
            ..PrrAccumulator::default()
        };
        assert_eq!(full.prr(), Some(1.0));
        let most = PrrAccumulator {
            x: 98,
            y: 100,
            ..PrrAccumulator::default()
        };
        assert_eq!(most.prr(), Some(0.98));
    }

    #[test]
    fn pir_between_successive_receptions() {
        let mut pir = PirTracker::new(2, true);
        pir.record_reception(0, 1, 1100);
        assert_eq!(pir.n_samples(), 0);
        pir.record_reception(0, 1, 1200);
        assert_eq!(pir.quantiles(&[0.5]), Some(vec![100]));
        // reverse direction is a separate pair
        pir.record_reception(1, 0, 1250);
        assert_eq!(pir.n_samples(), 1);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(sample_quantiles(&[], &[0.5]), None);
        let constant = vec![100u64; 50];
        assert_eq!(
            sample_quantiles(&constant, &STANDARD_QUANTILES),
            Some(vec![100; 6])
        );
        let ramp: Vec<u64> = (4..=100).collect();
        assert_eq!(sample_quantiles(&ramp, &[0.5]), Some(vec![52]));

        let mut tail = vec![100u64; 999];
        tail.push(1000);
        assert_eq!(
            sample_quantiles(&tail, &[0.99, 0.999]),
            Some(vec![100, 1000])
        );
    }

    proptest! {
        #[test]
        fn histogram_and_list_quantiles_agree(
            samples in prop::collection::vec(1u64..2000, 1..300),
            q in 0.0f64..=1.0,
        ) {
            let mut hist = BTreeMap::new();
            for &s in &samples {
                *hist.entry(s).or_insert(0u64) += 1;
            }
            prop_assert_eq!(
                histogram_quantiles(&hist, &[q]),
                sample_quantiles(&samples, &[q])
            );
        }

        #[test]
        fn prr_invariant_under_relabeling(
            outcomes in prop::collection::vec((0.0f64..300.0, any::<bool>()), 1..40),
            shift in 1usize..40,
        ) {
            let n = outcomes.len() + 1;
            let mut a = Metrics::new(n, 0.0, 150.0, false);
            let mut b = Metrics::new(n, 0.0, 150.0, false);
            let reports: Vec<_> = outcomes
                .iter()
                .enumerate()
                .map(|(i, &(d, ok))| report(i + 1, d, ok))
                .collect();
            a.record_transmission(0, 5, &reports);
            // relabel node i as (i + shift) mod n
            let relabeled: Vec<_> = reports
                .iter()
                .map(|r| ReceiverReport { receiver: (r.receiver + shift) % n, ..*r })
                .collect();
            b.record_transmission(shift % n, 5, &relabeled);
            prop_assert_eq!(a.prr.prr(), b.prr.prr());
            prop_assert!(a.prr.x <= a.prr.y);
        }
    }
}
