//! Sidelink resource pool geometry and per-UE radio configuration.
//!
//! Time is counted in absolute subframes (1 ms each) from the start of a
//! run. The frequency axis is split into subchannels of a fixed number of
//! resource blocks; a transmission occupies a run of adjacent subchannels
//! in one subframe.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SUBFRAME_MS: u64 = 1;

/// Length of the repeating subframe bitmap.
pub const BITMAP_PERIOD: u64 = 20;

pub const RB_BANDWIDTH_HZ: f64 = 180e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Bandwidth {
    Mhz10,
    Mhz20,
}

impl Bandwidth {
    pub fn mhz(self) -> u32 {
        match self {
            Bandwidth::Mhz10 => 10,
            Bandwidth::Mhz20 => 20,
        }
    }

    pub fn total_rbs(self) -> u32 {
        match self {
            Bandwidth::Mhz10 => 50,
            Bandwidth::Mhz20 => 100,
        }
    }

    /// Subchannel count used with 10-RB subchannels.
    pub fn default_subchannels(self) -> u32 {
        match self {
            Bandwidth::Mhz10 => 5,
            Bandwidth::Mhz20 => 10,
        }
    }
}

impl TryFrom<u32> for Bandwidth {
    type Error = Error;

    fn try_from(mhz: u32) -> Result<Self> {
        match mhz {
            10 => Ok(Bandwidth::Mhz10),
            20 => Ok(Bandwidth::Mhz20),
            other => Err(Error::config(
                "bandwidth_mhz",
                format!("{other} MHz is not supported (expected 10 or 20)"),
            )),
        }
    }
}

impl From<Bandwidth> for u32 {
    fn from(bw: Bandwidth) -> u32 {
        bw.mhz()
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.mhz())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubchannelScheme {
    Adjacent,
    NonAdjacent,
}

impl FromStr for SubchannelScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adjacent" => Ok(Self::Adjacent),
            "non_adjacent" | "non-adjacent" => Ok(Self::NonAdjacent),
            other => Err(Error::config(
                "subchannel_scheme",
                format!("unknown scheme `{other}`"),
            )),
        }
    }
}

/// 20-bit subframe bitmap; bit `i` (LSB first) marks subframe `i mod 20` usable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SubframeBitmap(u32);

impl SubframeBitmap {
    pub const ALL: SubframeBitmap = SubframeBitmap(0xF_FFFF);

    pub fn new(bits: u32) -> Result<Self> {
        if bits == 0 || bits > 0xF_FFFF {
            return Err(Error::config(
                "subframe_bitmap",
                format!("{bits:#x} must be a non-zero 20-bit mask"),
            ));
        }
        Ok(Self(bits))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn is_full(self) -> bool {
        self.0 == Self::ALL.0
    }

    pub fn is_set(self, subframe: u64) -> bool {
        (self.0 >> (subframe % BITMAP_PERIOD)) & 1 == 1
    }

    pub fn usable_per_period(self) -> u32 {
        self.0.count_ones()
    }
}

impl Default for SubframeBitmap {
    fn default() -> Self {
        Self::ALL
    }
}

impl FromStr for SubframeBitmap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
            Some(hex) => u32::from_str_radix(hex, 16),
            None => t.parse(),
        };
        let bits = parsed.map_err(|e| Error::config("subframe_bitmap", format!("`{s}`: {e}")))?;
        Self::new(bits)
    }
}

impl TryFrom<String> for SubframeBitmap {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SubframeBitmap> for String {
    fn from(b: SubframeBitmap) -> String {
        format!("{:#07X}", b.0).replace("0X", "0x")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourcePoolConfig {
    pub bandwidth: Bandwidth,
    pub rbs_per_subchannel: u32,
    pub num_subchannels: u32,
    pub subframe_bitmap: SubframeBitmap,
    pub scheme: SubchannelScheme,
    pub lowest_rb_index: u32,
}

impl ResourcePoolConfig {
    pub fn new(bandwidth: Bandwidth) -> Self {
        Self {
            bandwidth,
            rbs_per_subchannel: 10,
            num_subchannels: bandwidth.default_subchannels(),
            subframe_bitmap: SubframeBitmap::ALL,
            scheme: SubchannelScheme::Adjacent,
            lowest_rb_index: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rbs_per_subchannel == 0 {
            return Err(Error::config("rbs_per_subchannel", "must be at least 1"));
        }
        if self.num_subchannels == 0 {
            return Err(Error::config("num_subchannels", "must be at least 1"));
        }
        let used = self.lowest_rb_index + self.num_subchannels * self.rbs_per_subchannel;
        if used > self.bandwidth.total_rbs() {
            return Err(Error::config(
                "num_subchannels",
                format!(
                    "{} subchannels x {} RBs from RB {} exceed the {} RBs of {} MHz",
                    self.num_subchannels,
                    self.rbs_per_subchannel,
                    self.lowest_rb_index,
                    self.bandwidth.total_rbs(),
                    self.bandwidth.mhz()
                ),
            ));
        }
        if self.scheme != SubchannelScheme::Adjacent {
            return Err(Error::config(
                "subchannel_scheme",
                "only the adjacent scheme is implemented",
            ));
        }
        Ok(())
    }

    pub fn is_usable(&self, subframe: u64) -> bool {
        self.subframe_bitmap.is_set(subframe)
    }

    pub fn usable_subframes(&self, from: u64, to: u64) -> u64 {
        (from..to).filter(|&sf| self.is_usable(sf)).count() as u64
    }
}

impl Default for ResourcePoolConfig {
    fn default() -> Self {
        Self::new(Bandwidth::Mhz10)
    }
}

/// One single-subframe resource: a subframe and the first subchannel of the
/// occupied run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ResourceId {
    pub subframe: u64,
    pub subchannel: u32,
}

impl ResourceId {
    pub const fn new(subframe: u64, subchannel: u32) -> Self {
        Self {
            subframe,
            subchannel,
        }
    }
}

impl fmt::Display for ResourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.subframe, self.subchannel)
    }
}

/// Every usable `(subframe, subchannel)` pair in `[from, to)`, subframe-major.
pub fn iter_grid(
    pool: &ResourcePoolConfig,
    from: u64,
    to: u64,
) -> impl Iterator<Item = ResourceId> + '_ {
    (from..to)
        .filter(move |&sf| pool.is_usable(sf))
        .flat_map(move |sf| (0..pool.num_subchannels).map(move |sc| ResourceId::new(sf, sc)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeRadioConfig {
    pub tx_power_dbm: f64,
    pub antenna_height_m: f64,
    pub message_size_bytes: u32,
    pub mcs: u8,
    pub rri_ms: u64,
    pub t1_ms: u64,
    pub t2_ms: u64,
    pub resel_prob: f64,
}

impl UeRadioConfig {
    /// Defaults with the given reservation period; T2 is capped at 100 ms.
    pub fn with_rri(rri_ms: u64) -> Self {
        Self {
            rri_ms,
            t2_ms: rri_ms.min(100),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.2..=1.0).contains(&self.resel_prob) {
            return Err(Error::config(
                "resel_prob",
                format!("{} is outside the interval [0.2, 1]", self.resel_prob),
            ));
        }
        if self.rri_ms == 0 {
            return Err(Error::config("rri_ms", "must be positive"));
        }
        if self.t1_ms >= self.t2_ms {
            return Err(Error::config(
                "t1_ms",
                format!("T1 = {} must be below T2 = {}", self.t1_ms, self.t2_ms),
            ));
        }
        if self.t2_ms > self.rri_ms {
            return Err(Error::config(
                "t2_ms",
                format!(
                    "T2 = {} exceeds the reservation period {}",
                    self.t2_ms, self.rri_ms
                ),
            ));
        }
        if self.mcs > 28 {
            return Err(Error::config(
                "mcs",
                format!("{} is not in 0..=28", self.mcs),
            ));
        }
        if !self.tx_power_dbm.is_finite() {
            return Err(Error::config("tx_power_dbm", "must be finite"));
        }
        if !(self.antenna_height_m > 1.0) {
            return Err(Error::config("antenna_height_m", "must exceed 1 m"));
        }
        Ok(())
    }
}

impl Default for UeRadioConfig {
    fn default() -> Self {
        Self {
            tx_power_dbm: 23.0,
            antenna_height_m: 1.5,
            message_size_bytes: 190,
            mcs: 20,
            rri_ms: 100,
            t1_ms: 4,
            t2_ms: 100,
            resel_prob: 0.5,
        }
    }
}

/// Transport block sizes in bits for 10 PRBs, indexed by I_TBS 0..=26
/// (TS 36.213 Table 7.1.7.2.1-1, N_PRB = 10 column).
const TBS_10_PRB: [u32; 27] = [
    256, 344, 424, 568, 696, 872, 1032, 1192, 1352, 1544, 1736, 1992, 2280, 2600, 2856, 3112, 3240,
    3624, 4008, 4392, 4968, 5352, 5736, 6200, 6712, 6968, 7480,
];

/// PUSCH/PSSCH MCS to TBS index mapping (TS 36.213 Table 8.6.1-1).
fn tbs_index(mcs: u8) -> usize {
    match mcs {
        0..=10 => mcs as usize,
        11..=20 => mcs as usize - 1,
        _ => mcs as usize - 2,
    }
}

/// Transport block size for `n_prb` resource blocks. Sizes for widths other
/// than 10 PRBs are scaled linearly from the 10-PRB column and rounded down.
pub fn transport_block_bits(mcs: u8, n_prb: u32) -> u32 {
    let per_ten = u64::from(TBS_10_PRB[tbs_index(mcs).min(26)]);
    (per_ten * u64::from(n_prb) / 10) as u32
}

/// Number of adjacent subchannels one message occupies.
pub fn subchannels_per_packet(cfg: &UeRadioConfig, pool: &ResourcePoolConfig) -> Result<u32> {
    let bits = cfg.message_size_bytes.saturating_mul(8);
    (1..=pool.num_subchannels)
        .find(|&n| transport_block_bits(cfg.mcs, n * pool.rbs_per_subchannel) >= bits)
        .ok_or_else(|| {
            Error::config(
                "message_size_bytes",
                format!(
                    "{} bytes at MCS {} do not fit in {} subchannels of {} RBs",
                    cfg.message_size_bytes, cfg.mcs, pool.num_subchannels, pool.rbs_per_subchannel
                ),
            )
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_message_fits_one_subchannel() {
        let radio = UeRadioConfig::default();
        let pool = ResourcePoolConfig::default();
        // MCS 20 -> I_TBS 19 -> 4392 bits in 10 PRBs, above 190 * 8 = 1520
        assert_eq!(tbs_index(20), 19);
        assert!(transport_block_bits(20, 10) >= 1520);
        assert_eq!(subchannels_per_packet(&radio, &pool).unwrap(), 1);
    }

    #[test]
    fn empty_message_still_needs_one_subchannel() {
        let radio = UeRadioConfig {
            message_size_bytes: 0,
            ..UeRadioConfig::default()
        };
        assert_eq!(
            subchannels_per_packet(&radio, &ResourcePoolConfig::default()).unwrap(),
            1
        );
    }

    #[test]
    fn larger_messages_span_adjacent_subchannels() {
        let pool = ResourcePoolConfig::default();
        let radio = UeRadioConfig {
            message_size_bytes: 1900,
            ..UeRadioConfig::default()
        };
        // 15200 bits: 3 x 4392 = 13176 < 15200 <= 4 x 4392 = 17568
        assert_eq!(subchannels_per_packet(&radio, &pool).unwrap(), 4);
    }

    #[test]
    fn oversized_message_is_a_config_error() {
        let pool = ResourcePoolConfig::default();
        let radio = UeRadioConfig {
            message_size_bytes: 3000,
            ..UeRadioConfig::default()
        };
        assert!(matches!(
            subchannels_per_packet(&radio, &pool),
            Err(Error::InvalidConfig {
                field: "message_size_bytes",
                ..
            })
        ));
    }

    #[test]
    fn grid_counts() {
        let pool = ResourcePoolConfig::default();
        assert_eq!(iter_grid(&pool, 0, 10).count(), 50);
        assert_eq!(iter_grid(&pool, 7, 7).count(), 0);

        let masked = ResourcePoolConfig {
            subframe_bitmap: SubframeBitmap::new(0b0101_0101_0101_0101_0101).unwrap(),
            ..ResourcePoolConfig::default()
        };
        assert_eq!(masked.subframe_bitmap.usable_per_period(), 10);
        assert_eq!(iter_grid(&masked, 0, 20).count(), 50);
        assert!(iter_grid(&masked, 0, 20).all(|r| r.subframe % 2 == 0));
    }

    #[test]
    fn grid_is_deterministic_and_ordered() {
        let pool = ResourcePoolConfig::new(Bandwidth::Mhz20);
        let a: Vec<_> = iter_grid(&pool, 100, 197).collect();
        let b: Vec<_> = iter_grid(&pool, 100, 197).collect();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a.len(), 970);
    }

    #[test]
    fn default_pools_have_expected_width() {
        for (bw, width) in [(Bandwidth::Mhz10, 5), (Bandwidth::Mhz20, 10)] {
            let pool = ResourcePoolConfig::new(bw);
            pool.validate().unwrap();
            assert_eq!(pool.num_subchannels, width);
            assert_eq!(
                pool.num_subchannels * pool.rbs_per_subchannel,
                bw.total_rbs()
            );
        }
    }

    #[test]
    fn pool_validation() {
        let too_wide = ResourcePoolConfig {
            num_subchannels: 6,
            ..ResourcePoolConfig::default()
        };
        assert!(too_wide.validate().is_err());
        let non_adjacent = ResourcePoolConfig {
            scheme: SubchannelScheme::NonAdjacent,
            ..ResourcePoolConfig::default()
        };
        let err = non_adjacent.validate().unwrap_err().to_string();
        assert!(err.contains("adjacent"), "{err}");
    }

    #[test]
    fn bitmap_parse_and_format() {
        let b: SubframeBitmap = "0xFFFFF".parse().unwrap();
        assert!(b.is_full());
        assert_eq!(String::from(b), "0xFFFFF");
        assert!("0x1FFFFF".parse::<SubframeBitmap>().is_err());
        assert!("0x0".parse::<SubframeBitmap>().is_err());
        let half: SubframeBitmap = "0x003FF".parse().unwrap();
        assert!(half.is_set(9) && !half.is_set(10) && half.is_set(20));
    }

    #[test]
    fn radio_validation() {
        assert!(UeRadioConfig::default().validate().is_ok());
        let low = UeRadioConfig {
            resel_prob: 0.1,
            ..UeRadioConfig::default()
        };
        assert!(low.validate().unwrap_err().to_string().contains("[0.2, 1]"));
        assert_eq!(UeRadioConfig::with_rri(50).t2_ms, 50);
        assert_eq!(UeRadioConfig::with_rri(500).t2_ms, 100);
        let bad_t2 = UeRadioConfig {
            t2_ms: 200,
            ..UeRadioConfig::default()
        };
        assert!(bad_t2.validate().is_err());
    }
}
