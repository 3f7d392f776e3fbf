//! Sensing-based semi-persistent scheduling (SPS) for one V-UE.
//!
//! A UE keeps a 1000 ms sensing history of what it measured on the air.
//! When it needs a resource it looks at the selection window
//! `[n + T1, n + T2]`, drops candidates that a decoded neighbour has
//! reserved (projected forward by the neighbour's announced period) or that
//! fall on its own unmonitored subframes, ranks the rest by average RSSI and
//! picks uniformly among the quietest 20 % of the window. If fewer than 20 %
//! survive the exclusion, the RSRP threshold is raised in 3 dB steps.
//!
//! The chosen resource is then used every RRI for a random number of
//! transmissions drawn from `[5, 15]`; when the counter runs out the UE
//! reselects with probability `resel_prob`, otherwise it keeps the resource
//! and draws a fresh counter.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::phy::{dbm_to_mw, mw_to_dbm, NodeId};
use crate::pool::{ResourceId, ResourcePoolConfig, UeRadioConfig};

pub const SENSING_WINDOW_MS: u64 = 1000;
pub const COUNTER_MIN: u32 = 5;
pub const COUNTER_MAX: u32 = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedReservation {
    pub source: NodeId,
    pub rri_ms: u64,
    pub rsrp_dbm: f64,
}

/// One observation of one subchannel in one subframe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensedEntry {
    pub observed_subframe: u64,
    pub subchannel: u32,
    pub rssi_dbm: f64,
    /// Present when the transmission on this subchannel was decoded.
    pub decoded: Option<DecodedReservation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpsParams {
    pub rri_ms: u64,
    pub t1_ms: u64,
    pub t2_ms: u64,
    pub resel_prob: f64,
    pub rsrp_exclusion_threshold_dbm: f64,
    pub exclusion_step_db: f64,
    pub best_fraction: f64,
    /// Exclude subframes that line up with this UE's own past transmissions,
    /// which it could not monitor.
    pub exclude_unmonitored: bool,
}

impl SpsParams {
    pub fn from_radio(radio: &UeRadioConfig) -> Self {
        Self {
            rri_ms: radio.rri_ms,
            t1_ms: radio.t1_ms,
            t2_ms: radio.t2_ms,
            resel_prob: radio.resel_prob,
            ..Self::default()
        }
    }
}

impl Default for SpsParams {
    fn default() -> Self {
        Self {
            rri_ms: 100,
            t1_ms: 4,
            t2_ms: 100,
            resel_prob: 0.5,
            rsrp_exclusion_threshold_dbm: -110.0,
            exclusion_step_db: 3.0,
            best_fraction: 0.2,
            exclude_unmonitored: true,
        }
    }
}

/// Candidate interval `[trigger + t1, trigger + t2]`, both ends inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionWindow {
    pub trigger: u64,
    pub t1_ms: u64,
    pub t2_ms: u64,
}

impl SelectionWindow {
    pub fn new(trigger: u64, t1_ms: u64, t2_ms: u64) -> Self {
        Self {
            trigger,
            t1_ms,
            t2_ms,
        }
    }

    pub fn first(&self) -> u64 {
        self.trigger + self.t1_ms
    }

    pub fn last(&self) -> u64 {
        self.trigger + self.t2_ms
    }

    pub fn contains(&self, subframe: u64) -> bool {
        (self.first()..=self.last()).contains(&subframe)
    }

    /// All single-subframe resources of the window for runs of `width`
    /// subchannels.
    pub fn resources<'a>(
        &self,
        pool: &'a ResourcePoolConfig,
        width: u32,
    ) -> impl Iterator<Item = ResourceId> + 'a {
        let starts = pool.num_subchannels.saturating_sub(width) + 1;
        (self.first()..=self.last())
            .filter(move |&sf| pool.is_usable(sf))
            .flat_map(move |sf| (0..starts).map(move |sc| ResourceId::new(sf, sc)))
    }

    pub fn size(&self, pool: &ResourcePoolConfig, width: u32) -> usize {
        let starts = (pool.num_subchannels.saturating_sub(width) + 1) as usize;
        pool.usable_subframes(self.first(), self.last() + 1) as usize * starts
    }
}

/// The quietest fraction of the candidates. Everything in `sure` is in the
/// set; `fill` more are drawn from `ties`, which share the cut-off RSSI.
#[derive(Debug, Clone, PartialEq)]
pub struct LowestRssiSet {
    pub sure: Vec<ResourceId>,
    pub ties: Vec<ResourceId>,
    pub fill: usize,
}

impl LowestRssiSet {
    pub fn len(&self) -> usize {
        self.sure.len() + self.fill
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Uniform pick over the set, with the tied slots filled at random.
    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> ResourceId {
        let slot = rng.gen_range(0..self.len());
        if slot < self.sure.len() {
            self.sure[slot]
        } else {
            self.ties[rng.gen_range(0..self.ties.len())]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReselectionDecision {
    /// Counter still running.
    Continue,
    Kept,
    Reselected {
        old: ResourceId,
        new: ResourceId,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grant {
    pub resource: ResourceId,
    pub decision: ReselectionDecision,
    /// Counter value drawn when the counter expired.
    pub counter_draw: Option<u32>,
}

pub fn draw_counter<R: Rng + ?Sized>(rng: &mut R) -> u32 {
    rng.gen_range(COUNTER_MIN..=COUNTER_MAX)
}

#[derive(Debug, Clone)]
pub struct SpsState {
    params: SpsParams,
    width: u32,
    next: Option<ResourceId>,
    counter: u32,
    sensing: VecDeque<SensedEntry>,
    own_tx: VecDeque<u64>,
}

impl SpsState {
    /// `width` is the number of adjacent subchannels per message.
    pub fn new(params: SpsParams, width: u32) -> Self {
        Self {
            params,
            width: width.max(1),
            next: None,
            counter: 0,
            sensing: VecDeque::new(),
            own_tx: VecDeque::new(),
        }
    }

    pub fn params(&self) -> &SpsParams {
        &self.params
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// Resource of the next scheduled transmission, once one was selected.
    pub fn next_resource(&self) -> Option<ResourceId> {
        self.next
    }

    pub fn reselection_counter(&self) -> u32 {
        self.counter
    }

    pub fn sensing(&self) -> impl Iterator<Item = &SensedEntry> {
        self.sensing.iter()
    }

    pub fn own_transmissions(&self) -> impl Iterator<Item = u64> + '_ {
        self.own_tx.iter().copied()
    }

    /// Selection window for a trigger at `now`.
    pub fn window_at(&self, now: u64) -> SelectionWindow {
        SelectionWindow::new(now, self.params.t1_ms, self.params.t2_ms)
    }

    /// Drops everything outside the sensing window `(now - 1000, now]`.
    pub fn prune(&mut self, now: u64) {
        let Some(oldest_kept) = (now + 1).checked_sub(SENSING_WINDOW_MS) else {
            return;
        };
        while self
            .sensing
            .front()
            .is_some_and(|e| e.observed_subframe < oldest_kept)
        {
            self.sensing.pop_front();
        }
        while self.own_tx.front().is_some_and(|&t| t < oldest_kept) {
            self.own_tx.pop_front();
        }
    }

    /// Appends this subframe's measurements and ages out old ones.
    pub fn ingest_sensing<I>(&mut self, entries: I, now: u64)
    where
        I: IntoIterator<Item = SensedEntry>,
    {
        self.sensing.extend(entries);
        self.prune(now);
    }

    /// Candidates surviving exclusion at the configured RSRP threshold.
    pub fn build_candidate_set(
        &self,
        window: &SelectionWindow,
        pool: &ResourcePoolConfig,
    ) -> Vec<ResourceId> {
        self.candidates_at(
            window,
            pool,
            self.params.rsrp_exclusion_threshold_dbm,
            self.params.exclude_unmonitored,
        )
    }

    fn candidates_at(
        &self,
        window: &SelectionWindow,
        pool: &ResourcePoolConfig,
        threshold_dbm: f64,
        exclude_unmonitored: bool,
    ) -> Vec<ResourceId> {
        let first = window.first();
        let last = window.last();
        let span = (last - first + 1) as usize;
        let n_sub = pool.num_subchannels as usize;
        // blocked[subframe offset][subchannel]
        let mut blocked = vec![false; span * n_sub];
        let mut blocked_subframe = vec![false; span];

        // first subframe >= max(first, origin + period) congruent to origin
        let first_hit = |origin: u64, period: u64| -> u64 {
            let from = first.max(origin + period);
            let offset = (from - origin) % period;
            if offset == 0 {
                from
            } else {
                from + (period - offset)
            }
        };

        if exclude_unmonitored {
            let period = self.params.rri_ms;
            for &t in &self.own_tx {
                let mut y = first_hit(t, period);
                while y <= last {
                    blocked_subframe[(y - first) as usize] = true;
                    y += period;
                }
            }
        }

        for e in &self.sensing {
            let Some(res) = &e.decoded else { continue };
            if res.rsrp_dbm < threshold_dbm || res.rri_ms == 0 {
                continue;
            }
            let mut y = first_hit(e.observed_subframe, res.rri_ms);
            while y <= last {
                blocked[(y - first) as usize * n_sub + e.subchannel as usize] = true;
                y += res.rri_ms;
            }
        }

        window
            .resources(pool, self.width)
            .filter(|r| {
                let row = (r.subframe - first) as usize;
                !blocked_subframe[row]
                    && (r.subchannel..r.subchannel + self.width)
                        .all(|sc| !blocked[row * n_sub + sc as usize])
            })
            .collect()
    }

    /// Average sensed RSSI (linear mean, in dBm) of each resource over the
    /// sensing window, matching subframes modulo this UE's reservation
    /// period. Resources never observed rank as `-inf`.
    pub fn rssi_metric(&self, resources: &[ResourceId], pool: &ResourcePoolConfig) -> Vec<f64> {
        let period = self.params.rri_ms.max(1) as usize;
        let n_sub = pool.num_subchannels as usize;
        let mut sum = vec![0.0f64; period * n_sub];
        let mut count = vec![0u32; period * n_sub];
        for e in &self.sensing {
            let idx = (e.observed_subframe as usize % period) * n_sub + e.subchannel as usize;
            sum[idx] += dbm_to_mw(e.rssi_dbm);
            count[idx] += 1;
        }
        resources
            .iter()
            .map(|r| {
                let phase = r.subframe as usize % period;
                let (s, c) = (r.subchannel..r.subchannel + self.width)
                    .map(|sc| phase * n_sub + sc as usize)
                    .fold((0.0, 0u32), |(s, c), i| (s + sum[i], c + count[i]));
                if c == 0 {
                    f64::NEG_INFINITY
                } else {
                    mw_to_dbm(s / f64::from(c))
                }
            })
            .collect()
    }

    /// The `k` quietest candidates by [`Self::rssi_metric`].
    pub fn lowest_rssi_set(
        &self,
        candidates: &[ResourceId],
        k: usize,
        pool: &ResourcePoolConfig,
    ) -> LowestRssiSet {
        let k = k.min(candidates.len());
        if k == 0 {
            return LowestRssiSet {
                sure: Vec::new(),
                ties: Vec::new(),
                fill: 0,
            };
        }
        let metric = self.rssi_metric(candidates, pool);
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&a, &b| metric[a].total_cmp(&metric[b]).then(a.cmp(&b)));
        let cutoff = metric[order[k - 1]];
        let sure: Vec<ResourceId> = order
            .iter()
            .filter(|&&i| metric[i] < cutoff)
            .map(|&i| candidates[i])
            .collect();
        let ties: Vec<ResourceId> = order
            .iter()
            .filter(|&&i| metric[i] == cutoff)
            .map(|&i| candidates[i])
            .collect();
        let fill = k - sure.len();
        LowestRssiSet { sure, ties, fill }
    }

    /// Number of resources the final pick is drawn from.
    pub fn target_size(&self, window: &SelectionWindow, pool: &ResourcePoolConfig) -> usize {
        let total = window.size(pool, self.width);
        ((total as f64 * self.params.best_fraction).ceil() as usize).clamp(1, total.max(1))
    }

    /// Candidate set after relaxing the RSRP threshold until at least the
    /// target share of the window survives.
    pub fn relaxed_candidates(
        &self,
        window: &SelectionWindow,
        pool: &ResourcePoolConfig,
    ) -> Vec<ResourceId> {
        let target = self.target_size(window, pool);
        let strongest = self
            .sensing
            .iter()
            .filter_map(|e| e.decoded.as_ref().map(|d| d.rsrp_dbm))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut threshold = self.params.rsrp_exclusion_threshold_dbm;
        let mut unmonitored = self.params.exclude_unmonitored;
        loop {
            let candidates = self.candidates_at(window, pool, threshold, unmonitored);
            if candidates.len() >= target {
                return candidates;
            }
            if threshold > strongest {
                if unmonitored {
                    // own subframes alone leave too little room
                    unmonitored = false;
                    continue;
                }
                return candidates;
            }
            threshold += self.params.exclusion_step_db;
        }
    }

    pub fn select_resource<R: Rng + ?Sized>(
        &self,
        window: &SelectionWindow,
        pool: &ResourcePoolConfig,
        rng: &mut R,
    ) -> ResourceId {
        let candidates = self.relaxed_candidates(window, pool);
        let best = self.lowest_rssi_set(&candidates, self.target_size(window, pool), pool);
        assert!(
            !best.is_empty(),
            "selection window {window:?} holds no usable resource"
        );
        best.pick(rng)
    }

    /// First selection of a UE that holds no resource yet.
    pub fn initial_selection<R: Rng + ?Sized>(
        &mut self,
        now: u64,
        pool: &ResourcePoolConfig,
        rng: &mut R,
    ) -> ResourceId {
        self.prune(now);
        let chosen = self.select_resource(&self.window_at(now), pool, rng);
        self.next = Some(chosen);
        self.counter = draw_counter(rng);
        chosen
    }

    /// Transmit on the held resource at `now` and schedule the next one.
    pub fn on_transmit_opportunity<R: Rng + ?Sized>(
        &mut self,
        now: u64,
        pool: &ResourcePoolConfig,
        rng: &mut R,
    ) -> Grant {
        let current = self.next.expect("transmit opportunity without a resource");
        debug_assert_eq!(
            current.subframe, now,
            "transmission off its reserved subframe"
        );
        self.prune(now);
        self.own_tx.push_back(now);
        self.counter = self.counter.saturating_sub(1);

        let periodic = ResourceId::new(now + self.params.rri_ms, current.subchannel);
        if self.counter > 0 {
            self.next = Some(periodic);
            return Grant {
                resource: current,
                decision: ReselectionDecision::Continue,
                counter_draw: None,
            };
        }

        let decision = if rng.gen::<f64>() < self.params.resel_prob {
            let new = self.select_resource(&self.window_at(now), pool, rng);
            self.next = Some(new);
            ReselectionDecision::Reselected { old: current, new }
        } else {
            self.next = Some(periodic);
            ReselectionDecision::Kept
        };
        let draw = draw_counter(rng);
        self.counter = draw;
        Grant {
            resource: current,
            decision,
            counter_draw: Some(draw),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn entry(t: u64, sc: u32, rssi: f64, decoded: Option<(NodeId, u64)>) -> SensedEntry {
        SensedEntry {
            observed_subframe: t,
            subchannel: sc,
            rssi_dbm: rssi,
            decoded: decoded.map(|(source, rri_ms)| DecodedReservation {
                source,
                rri_ms,
                rsrp_dbm: rssi,
            }),
        }
    }

    #[test]
    fn empty_history_keeps_whole_window() {
        let pool = ResourcePoolConfig::default();
        let state = SpsState::new(SpsParams::default(), 1);
        let window = SelectionWindow::new(1000, 5, 100);
        assert_eq!(window.size(&pool, 1), 480);
        assert_eq!(state.build_candidate_set(&window, &pool).len(), 480);
    }

    #[test]
    fn decoded_neighbour_blocks_its_phase() {
        let pool = ResourcePoolConfig::default();
        let mut state = SpsState::new(SpsParams::default(), 1);
        // neighbour seen at phase 37 on subchannel 2, ten periods back
        state.ingest_sensing([entry(937, 2, -70.0, Some((9, 100)))], 1000);
        let window = SelectionWindow::new(1000, 4, 100);
        let cands: BTreeSet<_> = state
            .build_candidate_set(&window, &pool)
            .into_iter()
            .collect();
        assert_eq!(cands.len(), window.size(&pool, 1) - 1);
        assert!(!cands.contains(&ResourceId::new(1037, 2)));
        assert!(cands.contains(&ResourceId::new(1037, 1)));
    }

    #[test]
    fn weak_neighbour_is_not_excluded() {
        let pool = ResourcePoolConfig::default();
        let mut state = SpsState::new(SpsParams::default(), 1);
        state.ingest_sensing([entry(937, 2, -115.0, Some((9, 100)))], 1000);
        let window = SelectionWindow::new(1000, 4, 100);
        assert_eq!(
            state.build_candidate_set(&window, &pool).len(),
            window.size(&pool, 1)
        );
    }

    #[test]
    fn quiet_resource_is_always_among_the_best() {
        // Every resource observed busy except subchannel 3 at phase 50.
        let pool = ResourcePoolConfig::default();
        let params = SpsParams {
            rsrp_exclusion_threshold_dbm: 100.0,
            exclude_unmonitored: false,
            ..SpsParams::default()
        };
        let mut state = SpsState::new(params, 1);
        for t in 900..1000u64 {
            for sc in 0..5 {
                if t % 100 == 50 && sc == 3 {
                    continue;
                }
                state.ingest_sensing([entry(t, sc, -60.0, Some((1, 100)))], t);
            }
        }
        let window = state.window_at(999);
        let cands = state.build_candidate_set(&window, &pool);
        let best = state.lowest_rssi_set(&cands, state.target_size(&window, &pool), &pool);
        assert!(best.sure.contains(&ResourceId::new(1050, 3)));
    }

    #[test]
    fn cold_start_is_uniform_over_window() {
        let pool = ResourcePoolConfig::default();
        let state = SpsState::new(SpsParams::default(), 1);
        let window = state.window_at(0);
        let cands = state.build_candidate_set(&window, &pool);
        let best = state.lowest_rssi_set(&cands, state.target_size(&window, &pool), &pool);
        assert!(best.sure.is_empty());
        assert_eq!(best.ties.len(), window.size(&pool, 1));
        assert_eq!(best.fill, 97);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seen = BTreeSet::new();
        for _ in 0..20_000 {
            let r = state.select_resource(&window, &pool, &mut rng);
            assert!(window.contains(r.subframe));
            seen.insert(r);
        }
        assert_eq!(seen.len(), window.size(&pool, 1));
    }

    #[test]
    fn selection_is_deterministic_per_seed() {
        let pool = ResourcePoolConfig::default();
        let mut state = SpsState::new(SpsParams::default(), 1);
        state.ingest_sensing(
            (0..50).map(|i| entry(950 + i, (i % 5) as u32, -80.0 + i as f64, Some((2, 100)))),
            999,
        );
        let window = state.window_at(999);
        let pick =
            |seed| state.select_resource(&window, &pool, &mut ChaCha8Rng::seed_from_u64(seed));
        assert_eq!(pick(11), pick(11));
    }

    #[test]
    fn threshold_relaxes_until_enough_candidates() {
        let pool = ResourcePoolConfig::default();
        let mut state = SpsState::new(SpsParams::default(), 1);
        // every resource of the window reserved by a decodable neighbour at -100 dBm,
        // except subchannel 0 which is reserved at -80 dBm
        for t in 900..1000u64 {
            for sc in 0..5 {
                let rsrp = if sc == 0 { -80.0 } else { -100.0 };
                state.ingest_sensing([entry(t, sc, rsrp, Some((1, 100)))], t);
            }
        }
        let window = state.window_at(999);
        assert!(state.build_candidate_set(&window, &pool).is_empty());
        let relaxed = state.relaxed_candidates(&window, &pool);
        // -110 + 3k first exceeds -100 at k = 4 (-98 dBm): four subchannels reopen
        assert_eq!(relaxed.len(), 4 * 97);
        assert!(relaxed.iter().all(|r| r.subchannel != 0));
    }

    #[test]
    fn counter_counts_down_between_reselections() {
        let pool = ResourcePoolConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut state = SpsState::new(SpsParams::default(), 1);
        let first = state.initial_selection(0, &pool, &mut rng);
        let draw = state.reselection_counter();
        assert!((COUNTER_MIN..=COUNTER_MAX).contains(&draw));
        let mut now = first.subframe;
        for expected in (1..draw).rev() {
            let g = state.on_transmit_opportunity(now, &pool, &mut rng);
            assert_eq!(g.decision, ReselectionDecision::Continue);
            assert_eq!(state.reselection_counter(), expected);
            let next = state.next_resource().unwrap();
            assert_eq!(next.subframe, now + 100);
            assert_eq!(next.subchannel, first.subchannel);
            now = next.subframe;
        }
        let g = state.on_transmit_opportunity(now, &pool, &mut rng);
        assert_ne!(g.decision, ReselectionDecision::Continue);
        assert!(g.counter_draw.is_some());
    }

    #[test]
    fn certain_reselection_always_reselects() {
        let pool = ResourcePoolConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = SpsParams {
            resel_prob: 1.0,
            ..SpsParams::default()
        };
        let mut state = SpsState::new(params, 1);
        state.initial_selection(0, &pool, &mut rng);
        let mut expiries = 0;
        for _ in 0..500 {
            let now = state.next_resource().unwrap().subframe;
            let g = state.on_transmit_opportunity(now, &pool, &mut rng);
            match g.decision {
                ReselectionDecision::Continue => {}
                ReselectionDecision::Kept => panic!("kept with resel_prob = 1"),
                ReselectionDecision::Reselected { new, .. } => {
                    expiries += 1;
                    assert!(state.window_at(now).contains(new.subframe));
                }
            }
        }
        assert!(expiries > 20);
    }

    #[test]
    fn counter_draws_are_uniform() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 10_000;
        let mut hist = [0u32; 11];
        for _ in 0..n {
            let d = draw_counter(&mut rng);
            hist[(d - COUNTER_MIN) as usize] += 1;
        }
        let expected = n as f64 / 11.0;
        let chi2: f64 = hist
            .iter()
            .map(|&o| (f64::from(o) - expected).powi(2) / expected)
            .sum();
        let critical = ChiSquared::new(10.0).unwrap().inverse_cdf(0.99);
        assert!(chi2 < critical, "chi2 = {chi2}, critical = {critical}");
    }

    #[test]
    fn sensing_window_edges() {
        let mut state = SpsState::new(SpsParams::default(), 1);
        state.ingest_sensing([entry(0, 0, -90.0, None)], 0);
        state.prune(1001);
        assert_eq!(state.sensing().count(), 0);

        let mut state = SpsState::new(SpsParams::default(), 1);
        for t in 0..=1000u64 {
            state.ingest_sensing([entry(t, 0, -90.0, None)], t);
        }
        // window is (now - 1000, now]
        assert_eq!(state.sensing().count(), 1000);
        assert_eq!(state.sensing().next().unwrap().observed_subframe, 1);
    }

    #[test]
    fn duplicate_observations_are_averaged_at_ranking() {
        let pool = ResourcePoolConfig::default();
        let mut state = SpsState::new(SpsParams::default(), 1);
        let powers = [-90.0, -80.0, -85.0];
        state.ingest_sensing(powers.iter().map(|&p| entry(950, 1, p, None)), 950);
        assert_eq!(state.sensing().count(), 3);
        let metric = state.rssi_metric(&[ResourceId::new(1050, 1)], &pool)[0];
        let brute = mw_to_dbm(powers.iter().map(|&p| dbm_to_mw(p)).sum::<f64>() / 3.0);
        assert!((metric - brute).abs() < 1e-12);
    }

    #[test]
    fn lone_ue_loses_only_its_own_subframes() {
        let pool = ResourcePoolConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for exclude_unmonitored in [false, true] {
            let params = SpsParams {
                exclude_unmonitored,
                ..SpsParams::default()
            };
            let mut state = SpsState::new(params, 1);
            state.initial_selection(0, &pool, &mut rng);
            for _ in 0..200 {
                let now = state.next_resource().unwrap().subframe;
                let window = state.window_at(now);
                let full = window.size(&pool, 1);
                state.on_transmit_opportunity(now, &pool, &mut rng);
                let cands = state.build_candidate_set(&window, &pool).len();
                let own_hits: BTreeSet<u64> = state
                    .own_transmissions()
                    .flat_map(|t| (1..=10).map(move |q| t + 100 * q))
                    .filter(|&y| window.contains(y))
                    .collect();
                assert!(!own_hits.is_empty());
                let expected = if exclude_unmonitored {
                    full - 5 * own_hits.len()
                } else {
                    full
                };
                assert_eq!(cands, expected);
            }
        }
    }
}
