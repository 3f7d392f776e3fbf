//! Node placement and movement.
//!
//! Three sources of positions: the static 100 m x 100 m square, a synthetic
//! Manhattan grid with constant-speed random-turn vehicles, and external
//! position traces (`time_ms,node_id,x_m,y_m` CSV).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point, Rect};

pub const STATIC_SIDE_M: f64 = 100.0;

/// Soft cap on the number of V-UEs in the static square.
pub const STATIC_MAX_UES: usize = 250;

pub const TRACE_HEADER: [&str; 4] = ["time_ms", "node_id", "x_m", "y_m"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub from: Point,
    pub to: Point,
    pub width_m: f64,
}

impl Lane {
    pub fn length(&self) -> f64 {
        self.from.distance(&self.to)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreetMap {
    pub extent: Rect,
    pub blocks: Vec<Rect>,
    pub lanes: Vec<Lane>,
}

impl StreetMap {
    /// A square without buildings.
    pub fn open(extent: Rect) -> Self {
        Self {
            extent,
            blocks: Vec::new(),
            lanes: Vec::new(),
        }
    }

    pub fn inside_block(&self, p: &Point) -> bool {
        self.blocks.iter().any(|b| b.contains(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub time_ms: f64,
    pub pos: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTrack {
    pub id: u32,
    pub samples: Vec<TraceSample>,
}

impl NodeTrack {
    /// Linear interpolation between samples; clamped outside the sampled span.
    pub fn position_at(&self, t_ms: f64) -> Point {
        let s = &self.samples;
        let i = s.partition_point(|x| x.time_ms <= t_ms);
        interpolate(s, i, t_ms)
    }
}

fn interpolate(s: &[TraceSample], upper: usize, t_ms: f64) -> Point {
    if upper == 0 {
        return s[0].pos;
    }
    if upper >= s.len() {
        return s[s.len() - 1].pos;
    }
    let (a, b) = (&s[upper - 1], &s[upper]);
    let frac = (t_ms - a.time_ms) / (b.time_ms - a.time_ms);
    a.pos.lerp(&b.pos, frac)
}

/// Per-node position samples, nodes ordered by id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MobilityTrace {
    pub tracks: Vec<NodeTrack>,
}

impl MobilityTrace {
    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn position_at(&self, node: usize, t_ms: f64) -> Point {
        self.tracks[node].position_at(t_ms)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tracks.iter().all(|t| t.samples.is_empty()) {
            return Err(Error::TraceValidation("trace holds no samples".into()));
        }
        for track in &self.tracks {
            if track.samples.is_empty() {
                return Err(Error::TraceValidation(format!(
                    "node {} has no samples",
                    track.id
                )));
            }
            if let Some(w) = track
                .samples
                .windows(2)
                .find(|w| !(w[1].time_ms > w[0].time_ms))
            {
                return Err(Error::TraceValidation(format!(
                    "node {}: timestamps not strictly increasing ({} then {})",
                    track.id, w[0].time_ms, w[1].time_ms
                )));
            }
        }
        Ok(())
    }

    pub fn bounding_box(&self) -> Rect {
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for s in self.tracks.iter().flat_map(|t| &t.samples) {
            min.x = min.x.min(s.pos.x);
            min.y = min.y.min(s.pos.y);
            max.x = max.x.max(s.pos.x);
            max.y = max.y.max(s.pos.y);
        }
        Rect { min, max }
    }

    pub fn cursor(&self) -> TraceCursor<'_> {
        TraceCursor {
            trace: self,
            upper: vec![0; self.tracks.len()],
        }
    }
}

/// Position lookups for non-decreasing query times.
#[derive(Debug, Clone)]
pub struct TraceCursor<'a> {
    trace: &'a MobilityTrace,
    upper: Vec<usize>,
}

impl TraceCursor<'_> {
    pub fn positions_at(&mut self, t_ms: f64, out: &mut Vec<Point>) {
        out.clear();
        for (track, upper) in self.trace.tracks.iter().zip(self.upper.iter_mut()) {
            let s = &track.samples;
            while *upper < s.len() && s[*upper].time_ms <= t_ms {
                *upper += 1;
            }
            out.push(interpolate(s, *upper, t_ms));
        }
    }
}

/// Street layout plus movement of every node.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub map: StreetMap,
    pub trace: MobilityTrace,
}

impl Scenario {
    pub fn is_static(&self) -> bool {
        self.trace.tracks.iter().all(|t| t.samples.len() <= 1)
    }
}

/// `n_ues` stationary nodes uniformly placed on the open square.
pub fn build_static_scenario<R: Rng + ?Sized>(n_ues: usize, rng: &mut R) -> Scenario {
    if n_ues > STATIC_MAX_UES {
        warn!("{n_ues} V-UEs on the static square exceed the usual {STATIC_MAX_UES}");
    }
    let tracks = (0..n_ues)
        .map(|i| {
            let pos = Point::new(
                rng.gen_range(0.0..=STATIC_SIDE_M),
                rng.gen_range(0.0..=STATIC_SIDE_M),
            );
            NodeTrack {
                id: i as u32,
                samples: vec![TraceSample { time_ms: 0.0, pos }],
            }
        })
        .collect();
    Scenario {
        map: StreetMap::open(Rect::new(0.0, 0.0, STATIC_SIDE_M, STATIC_SIDE_M)),
        trace: MobilityTrace { tracks },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManhattanParams {
    pub columns: usize,
    pub rows: usize,
    pub block_width_m: f64,
    pub block_height_m: f64,
    /// Full width of a street corridor (two lanes per direction).
    pub street_width_m: f64,
    pub lane_width_m: f64,
    pub speed_kmh: f64,
    pub duration_ms: u64,
}

impl Default for ManhattanParams {
    fn default() -> Self {
        Self {
            columns: 3,
            rows: 3,
            block_width_m: 250.0,
            block_height_m: 433.0,
            street_width_m: 4.0 * 3.5,
            lane_width_m: 3.5,
            speed_kmh: 60.0,
            duration_ms: 30_000,
        }
    }
}

impl ManhattanParams {
    pub fn extent(&self) -> Rect {
        Rect::new(
            0.0,
            0.0,
            self.columns as f64 * self.block_width_m,
            self.rows as f64 * self.block_height_m,
        )
    }

    pub fn speed_m_per_ms(&self) -> f64 {
        self.speed_kmh / 3600.0
    }

    /// Street centerlines: the block grid lines, boundary streets pulled
    /// inside the playground.
    fn centerlines(count: usize, pitch: f64, half: f64) -> Vec<f64> {
        let end = count as f64 * pitch;
        (0..=count)
            .map(|i| (i as f64 * pitch).clamp(half, end - half))
            .collect()
    }
}

/// Directed street segment between adjacent intersections.
#[derive(Debug, Clone, Copy)]
struct Edge {
    from: (usize, usize),
    to: (usize, usize),
}

struct Grid {
    xs: Vec<f64>,
    ys: Vec<f64>,
    lane_offset: f64,
}

impl Grid {
    fn node(&self, (i, j): (usize, usize)) -> Point {
        Point::new(self.xs[i], self.ys[j])
    }

    /// Right-hand-traffic lane centerline of an edge.
    fn lane(&self, e: Edge) -> (Point, Point) {
        let a = self.node(e.from);
        let b = self.node(e.to);
        let len = a.distance(&b);
        let (ux, uy) = ((b.x - a.x) / len, (b.y - a.y) / len);
        let (nx, ny) = (uy * self.lane_offset, -ux * self.lane_offset);
        (
            Point::new(a.x + nx, a.y + ny),
            Point::new(b.x + nx, b.y + ny),
        )
    }

    fn outgoing(&self, (i, j): (usize, usize)) -> Vec<Edge> {
        let (ni, nj) = (self.xs.len() as isize, self.ys.len() as isize);
        [(1, 0), (-1, 0), (0, 1), (0, -1)]
            .into_iter()
            .map(|(di, dj)| (i as isize + di, j as isize + dj))
            .filter(|&(a, b)| a >= 0 && b >= 0 && a < ni && b < nj)
            .map(|(a, b)| Edge {
                from: (i, j),
                to: (a as usize, b as usize),
            })
            .collect()
    }

    fn edges(&self) -> Vec<Edge> {
        let mut all = Vec::new();
        for i in 0..self.xs.len() {
            for j in 0..self.ys.len() {
                all.extend(self.outgoing((i, j)));
            }
        }
        all
    }
}

/// 3 x 3 blocks of 250 m x 433 m (750 m x 1299 m in total) separated by
/// two-way streets. Vehicles start at random lane positions, drive at a
/// constant speed and turn uniformly at random at every intersection (no
/// U-turns). The street network is closed by the perimeter roads, so
/// vehicles never leave the playground.
pub fn build_manhattan_scenario<R: Rng + ?Sized>(
    n_ues: usize,
    params: &ManhattanParams,
    rng: &mut R,
) -> Scenario {
    let half = params.street_width_m / 2.0;
    let grid = Grid {
        xs: ManhattanParams::centerlines(params.columns, params.block_width_m, half),
        ys: ManhattanParams::centerlines(params.rows, params.block_height_m, half),
        lane_offset: params.lane_width_m / 2.0,
    };

    let mut blocks = Vec::new();
    for wx in grid.xs.windows(2) {
        for wy in grid.ys.windows(2) {
            blocks.push(Rect::new(
                wx[0] + half,
                wy[0] + half,
                wx[1] - half,
                wy[1] - half,
            ));
        }
    }

    let edges = grid.edges();
    let lanes: Vec<Lane> = edges
        .iter()
        .map(|&e| {
            let (from, to) = grid.lane(e);
            Lane {
                from,
                to,
                width_m: params.lane_width_m,
            }
        })
        .collect();
    let total_length: f64 = lanes.iter().map(Lane::length).sum();
    let speed = params.speed_m_per_ms();
    let horizon = params.duration_ms as f64;

    let mut tracks = Vec::with_capacity(n_ues);
    for id in 0..n_ues {
        // spawn uniformly over the total lane length
        let mut at = rng.gen_range(0.0..total_length);
        let mut k = 0;
        while k + 1 < lanes.len() && at >= lanes[k].length() {
            at -= lanes[k].length();
            k += 1;
        }
        let mut edge = edges[k];
        let (lane_from, lane_to) = grid.lane(edge);
        let start = lane_from.lerp(&lane_to, (at / lanes[k].length()).min(1.0));

        let mut samples = vec![TraceSample {
            time_ms: 0.0,
            pos: start,
        }];
        let mut here = start;
        let mut t = 0.0;
        let mut push = |p: Point, here: &mut Point, t: &mut f64| {
            let d = here.distance(&p);
            if d > 1e-9 {
                *t += d / speed;
                samples.push(TraceSample {
                    time_ms: *t,
                    pos: p,
                });
                *here = p;
            }
        };
        push(lane_to, &mut here, &mut t);
        while t < horizon && speed > 0.0 {
            let options: Vec<Edge> = grid
                .outgoing(edge.to)
                .into_iter()
                .filter(|e| e.to != edge.from)
                .collect();
            edge = *options.choose(rng).expect("every intersection has an exit");
            let (from, to) = grid.lane(edge);
            push(from, &mut here, &mut t);
            push(to, &mut here, &mut t);
        }
        tracks.push(NodeTrack {
            id: id as u32,
            samples,
        });
    }

    Scenario {
        map: StreetMap {
            extent: params.extent(),
            blocks,
            lanes,
        },
        trace: MobilityTrace { tracks },
    }
}

pub fn load_trace(path: &Path) -> Result<MobilityTrace> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::io(format!("cannot open trace {}", path.display()), e))?;
    read_trace(file)
}

/// Parses `time_ms,node_id,x_m,y_m` rows; rows of different nodes may be
/// interleaved.
pub fn read_trace<R: Read>(reader: R) -> Result<MobilityTrace> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::TraceParse {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != TRACE_HEADER {
        if headers.is_empty() {
            return Err(Error::TraceValidation("trace file is empty".into()));
        }
        return Err(Error::TraceParse {
            line: 1,
            message: format!("expected header `{}`", TRACE_HEADER.join(",")),
        });
    }

    let mut by_node: BTreeMap<u32, Vec<TraceSample>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::TraceParse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |what: &str| Error::TraceParse {
            line,
            message: format!("invalid {what}"),
        };
        let num = |i: usize, what: &str| -> Result<f64> {
            record
                .get(i)
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(what))
        };
        let time_ms = num(0, "time_ms")?;
        let node: u32 = record
            .get(1)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("node_id"))?;
        let pos = Point::new(num(2, "x_m")?, num(3, "y_m")?);
        by_node
            .entry(node)
            .or_default()
            .push(TraceSample { time_ms, pos });
    }

    let trace = MobilityTrace {
        tracks: by_node
            .into_iter()
            .map(|(id, samples)| NodeTrack { id, samples })
            .collect(),
    };
    trace.validate()?;
    Ok(trace)
}

pub fn write_trace<W: Write>(trace: &MobilityTrace, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRACE_HEADER)?;
    for track in &trace.tracks {
        for s in &track.samples {
            w.write_record([
                s.time_ms.to_string(),
                track.id.to_string(),
                s.pos.x.to_string(),
                s.pos.y.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("cannot write trace", e))?;
    Ok(())
}

/// Open playground around an external trace.
pub fn trace_scenario(trace: MobilityTrace) -> Scenario {
    Scenario {
        map: StreetMap::open(trace.bounding_box()),
        trace,
    }
}
