//! Parameter sweeps: cartesian products of a few axes and a seed list, run
//! in parallel. Results come back in expansion order whatever the number of
//! worker threads.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::engine::{run, ScenarioKind, SimConfig, SimResult};
use crate::error::{Error, Result};
use crate::pool::Bandwidth;

#[derive(Debug, Clone, PartialEq)]
pub enum Axis {
    NUes(Vec<usize>),
    Bandwidth(Vec<Bandwidth>),
    Scenario(Vec<ScenarioKind>),
    Rri(Vec<u64>),
    ReselProb(Vec<f64>),
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::NUes(_) => "n_ues",
            Axis::Bandwidth(_) => "bandwidth_mhz",
            Axis::Scenario(_) => "scenario",
            Axis::Rri(_) => "rri_ms",
            Axis::ReselProb(_) => "resel_prob",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Axis::NUes(v) => v.len(),
            Axis::Bandwidth(v) => v.len(),
            Axis::Scenario(v) => v.len(),
            Axis::Rri(v) => v.len(),
            Axis::ReselProb(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sets the `idx`-th value on `cfg`. Changing the bandwidth also moves
    /// to its default subchannel count; changing the RRI resets T2 to
    /// `min(100, rri)`.
    pub fn apply(&self, idx: usize, cfg: &mut SimConfig) {
        match self {
            Axis::NUes(v) => cfg.n_ues = v[idx],
            Axis::Bandwidth(v) => {
                cfg.pool.bandwidth = v[idx];
                cfg.pool.num_subchannels = v[idx].default_subchannels();
            }
            Axis::Scenario(v) => cfg.scenario = v[idx].clone(),
            Axis::Rri(v) => {
                cfg.radio.rri_ms = v[idx];
                cfg.radio.t2_ms = v[idx].min(100);
            }
            Axis::ReselProb(v) => cfg.radio.resel_prob = v[idx],
        }
    }
}

fn parse_list<T: FromStr>(key: &'static str, values: &str) -> Result<Vec<T>> {
    values
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::config(key, format!("cannot parse axis value `{v}`")))
        })
        .collect()
}

/// `key=v1,v2,...`
impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (key, values) = s
            .split_once('=')
            .ok_or_else(|| Error::config("axis", format!("expected key=v1,v2,... in `{s}`")))?;
        let axis = match key.trim() {
            "n_ues" | "number_of_v_ues" => Axis::NUes(parse_list("n_ues", values)?),
            "bandwidth_mhz" | "channel_bandwidth_mhz" => Axis::Bandwidth(
                parse_list::<u32>("bandwidth_mhz", values)?
                    .into_iter()
                    .map(Bandwidth::try_from)
                    .collect::<Result<_>>()?,
            ),
            "scenario" => Axis::Scenario(
                values
                    .split(',')
                    .map(|v| match v.trim() {
                        "static" => Ok(ScenarioKind::Static),
                        "manhattan" => Ok(ScenarioKind::Manhattan),
                        other => Err(Error::config(
                            "scenario",
                            format!("`{other}` cannot be swept (static, manhattan)"),
                        )),
                    })
                    .collect::<Result<_>>()?,
            ),
            "rri_ms" | "resource_reservation_period_ms" => Axis::Rri(parse_list("rri_ms", values)?),
            "resel_prob" | "resource_reselection_probability" => {
                Axis::ReselProb(parse_list("resel_prob", values)?)
            }
            other => return Err(Error::config(
                "axis",
                format!(
                    "unknown axis `{other}` (n_ues, bandwidth_mhz, scenario, rri_ms, resel_prob)"
                ),
            )),
        };
        if axis.is_empty() {
            return Err(Error::config("axis", "no values"));
        }
        Ok(axis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Preset {
    PrrVsDensity,
    PirVsDensity,
    PrrVsRri,
    PrrVsReselProb,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::PrrVsDensity => "prr_vs_density",
            Preset::PirVsDensity => "pir_vs_density",
            Preset::PrrVsRri => "prr_vs_rri",
            Preset::PrrVsReselProb => "prr_vs_resel_prob",
        }
    }

    /// Fixed parameters applied to the base config before the axes.
    pub fn base(self, mut cfg: SimConfig) -> SimConfig {
        match self {
            Preset::PrrVsDensity | Preset::PirVsDensity => {}
            Preset::PrrVsRri | Preset::PrrVsReselProb => {
                cfg.scenario = ScenarioKind::Static;
                cfg.n_ues = 250;
                Axis::Bandwidth(vec![Bandwidth::Mhz10]).apply(0, &mut cfg);
            }
        }
        cfg
    }

    pub fn axes(self) -> Vec<Axis> {
        let densities = Axis::NUes(vec![50, 100, 150, 200, 250]);
        match self {
            Preset::PrrVsDensity | Preset::PirVsDensity => vec![
                Axis::Scenario(vec![ScenarioKind::Static, ScenarioKind::Manhattan]),
                Axis::Bandwidth(vec![Bandwidth::Mhz10, Bandwidth::Mhz20]),
                densities,
            ],
            Preset::PrrVsRri => vec![Axis::Rri(vec![50, 100, 200, 500, 1000])],
            Preset::PrrVsReselProb => vec![Axis::ReselProb(vec![0.2, 0.4, 0.6, 0.8, 1.0])],
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Cartesian product of `axes` (first axis outermost) with `seeds`
/// innermost.
pub fn expand(base: &SimConfig, axes: &[Axis], seeds: &[u64]) -> Vec<SimConfig> {
    let mut cells = vec![base.clone()];
    for axis in axes {
        cells = cells
            .into_iter()
            .flat_map(|cell| {
                (0..axis.len()).map(move |i| {
                    let mut c = cell.clone();
                    axis.apply(i, &mut c);
                    c
                })
            })
            .collect();
    }
    cells
        .into_iter()
        .flat_map(|cell| {
            seeds.iter().map(move |&seed| SimConfig {
                seed,
                ..cell.clone()
            })
        })
        .collect()
}

pub fn describe(cfg: &SimConfig) -> String {
    format!(
        "scenario={} bandwidth_mhz={} n_ues={} rri_ms={} resel_prob={} seed={}",
        cfg.scenario.label(),
        cfg.pool.bandwidth.mhz(),
        cfg.n_ues,
        cfg.radio.rri_ms,
        cfg.radio.resel_prob,
        cfg.seed
    )
}

/// Runs every cell on `jobs` worker threads (0 = one per CPU). Every cell
/// is validated before the first one starts; the first failing cell in
/// expansion order is reported.
pub fn run_cells(cells: &[SimConfig], jobs: usize) -> Result<Vec<SimResult>> {
    let wrap = |cfg: &SimConfig, e: Error| Error::Sweep {
        cell: describe(cfg),
        source: Box::new(e),
    };
    for cfg in cells {
        cfg.validate().map_err(|e| wrap(cfg, e))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::config("jobs", e.to_string()))?;
    let results: Vec<Result<SimResult>> = pool.install(|| cells.par_iter().map(run).collect());
    results
        .into_iter()
        .zip(cells)
        .map(|(r, cfg)| r.map_err(|e| wrap(cfg, e)))
        .collect()
}

pub fn sweep(
    base: &SimConfig,
    axes: &[Axis],
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<SimResult>> {
    run_cells(&expand(base, axes, seeds), jobs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_counts() {
        let base = SimConfig::default();
        let axes = [
            Axis::NUes(vec![50, 100, 150, 200, 250]),
            Axis::Bandwidth(vec![Bandwidth::Mhz10, Bandwidth::Mhz20]),
        ];
        assert_eq!(expand(&base, &axes, &[1]).len(), 10);
        let density = Preset::PrrVsDensity;
        let seeds: Vec<u64> = (1..=10).collect();
        assert_eq!(
            expand(&density.base(base.clone()), &density.axes(), &seeds).len(),
            200
        );
    }

    #[test]
    fn presets_expand_to_valid_cells() {
        for preset in [
            Preset::PrrVsDensity,
            Preset::PirVsDensity,
            Preset::PrrVsRri,
            Preset::PrrVsReselProb,
        ] {
            for cell in expand(&preset.base(SimConfig::default()), &preset.axes(), &[1]) {
                cell.validate().unwrap_or_else(|e| panic!("{preset}: {e}"));
            }
        }
    }

    #[test]
    fn axis_application() {
        let mut cfg = SimConfig::default();
        "bandwidth_mhz=20"
            .parse::<Axis>()
            .unwrap()
            .apply(0, &mut cfg);
        assert_eq!(cfg.pool.num_subchannels, 10);
        "rri_ms=50,1000".parse::<Axis>().unwrap().apply(0, &mut cfg);
        assert_eq!((cfg.radio.rri_ms, cfg.radio.t2_ms), (50, 50));
        "rri_ms=50,1000".parse::<Axis>().unwrap().apply(1, &mut cfg);
        assert_eq!((cfg.radio.rri_ms, cfg.radio.t2_ms), (1000, 100));
        assert!("colour=red".parse::<Axis>().is_err());
        assert!("bandwidth_mhz=15".parse::<Axis>().is_err());
    }

    #[test]
    fn failing_cell_names_itself() {
        let base = SimConfig {
            duration_ms: 2_000,
            ..SimConfig::default()
        };
        let err = sweep(&base, &[Axis::ReselProb(vec![0.5, 0.1])], &[7], 1).unwrap_err();
        match err {
            Error::Sweep { cell, .. } => assert!(cell.contains("resel_prob=0.1"), "{cell}"),
            other => panic!("unexpected {other}"),
        }
    }
}
