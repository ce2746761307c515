//! Rail network model: stations, ordered lines, and segment travel times.
//!
//! Loaded from a TOML document:
//!
//! ```toml
//! [[stations]]
//! id = "vine-city"
//! name = "Vine City"
//! parking = 0            # optional
//!
//! [[lines]]
//! id = "blue"
//! axis = "east-west"     # or "north-south"; forward along the list = east/north
//! stations = ["hamilton-holmes", "vine-city", "dome-gwcc", "..."]
//!
//! [[segments]]
//! from = "vine-city"
//! to = "dome-gwcc"
//! seconds = 120
//! reverse_seconds = 120  # optional asymmetric override; defaults to `seconds`
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{IngestError, Seconds, StationId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineAxis {
    EastWest,
    NorthSouth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    East,
    West,
    North,
    South,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Station {
    pub id: StationId,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub parking: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LineSpec {
    id: String,
    #[serde(default = "default_axis")]
    axis: LineAxis,
    stations: Vec<StationId>,
}

fn default_axis() -> LineAxis {
    LineAxis::EastWest
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SegmentSpec {
    from: StationId,
    to: StationId,
    seconds: Seconds,
    #[serde(default)]
    reverse_seconds: Option<Seconds>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetworkFile {
    stations: Vec<Station>,
    lines: Vec<LineSpec>,
    segments: Vec<SegmentSpec>,
}

#[derive(Debug, Clone)]
pub struct Line {
    pub id: String,
    pub axis: LineAxis,
    pub stations: Vec<StationId>,
    position: HashMap<StationId, usize>,
}

#[derive(Debug, Clone)]
pub struct NetworkModel {
    pub stations: Vec<Station>,
    pub lines: Vec<Line>,
    station_lines: HashMap<StationId, BTreeSet<String>>,
    segment_times: HashMap<(StationId, StationId), Seconds>,
}

impl NetworkModel {
    pub fn from_toml_str(text: &str) -> Result<Self, IngestError> {
        let file: NetworkFile =
            toml::from_str(text).map_err(|e| IngestError::Network(e.to_string()))?;
        Self::build(file)
    }

    pub fn from_file(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| IngestError::Io { path: path.display().to_string(), source: e })?;
        Self::from_toml_str(&text)
    }

    fn build(file: NetworkFile) -> Result<Self, IngestError> {
        let ids: BTreeSet<&str> = file.stations.iter().map(|s| s.id.as_str()).collect();
        if ids.len() != file.stations.len() {
            return Err(IngestError::Network("duplicate station id".into()));
        }

        let mut segment_times: HashMap<(StationId, StationId), Seconds> = HashMap::new();
        for seg in &file.segments {
            if seg.seconds <= 0 || seg.reverse_seconds.is_some_and(|r| r <= 0) {
                return Err(IngestError::Network(format!(
                    "segment {} -> {} must have positive seconds",
                    seg.from, seg.to
                )));
            }
            segment_times.insert((seg.from.clone(), seg.to.clone()), seg.seconds);
            segment_times
                .entry((seg.to.clone(), seg.from.clone()))
                .or_insert(seg.reverse_seconds.unwrap_or(seg.seconds));
        }

        let mut station_lines: HashMap<StationId, BTreeSet<String>> = HashMap::new();
        let mut lines = Vec::new();
        for spec in file.lines {
            let mut position = HashMap::new();
            for (i, sid) in spec.stations.iter().enumerate() {
                if !ids.contains(sid.as_str()) {
                    return Err(IngestError::Network(format!(
                        "line '{}' references unknown station '{}'",
                        spec.id, sid
                    )));
                }
                position.insert(sid.clone(), i);
                station_lines.entry(sid.clone()).or_default().insert(spec.id.clone());
            }
            for pair in spec.stations.windows(2) {
                let fwd = (pair[0].clone(), pair[1].clone());
                if !segment_times.contains_key(&fwd) {
                    return Err(IngestError::Network(format!(
                        "line '{}' segment {} -> {} has no travel time",
                        spec.id, pair[0], pair[1]
                    )));
                }
            }
            lines.push(Line { id: spec.id, axis: spec.axis, stations: spec.stations, position });
        }

        Ok(NetworkModel { stations: file.stations, lines, station_lines, segment_times })
    }

    pub fn station(&self, id: &str) -> Option<&Station> {
        self.stations.iter().find(|s| s.id == id)
    }

    pub fn lines_of(&self, station: &str) -> Option<&BTreeSet<String>> {
        self.station_lines.get(station)
    }

    fn common_lines(&self, a: &str, b: &str) -> Vec<&Line> {
        let (Some(la), Some(lb)) = (self.station_lines.get(a), self.station_lines.get(b)) else {
            return Vec::new();
        };
        self.lines
            .iter()
            .filter(|line| la.contains(&line.id) && lb.contains(&line.id))
            .collect()
    }

    fn path_seconds(&self, line: &Line, from_pos: usize, to_pos: usize) -> Seconds {
        if from_pos == to_pos {
            return 0;
        }
        let mut total = 0;
        if from_pos < to_pos {
            for i in from_pos..to_pos {
                total += self.segment_times[&(line.stations[i].clone(), line.stations[i + 1].clone())];
            }
        } else {
            for i in (to_pos..from_pos).rev() {
                total += self.segment_times[&(line.stations[i + 1].clone(), line.stations[i].clone())];
            }
        }
        total
    }

    /// Travel time along the shortest same-line path between two stations.
    pub fn travel_time(&self, origin: &str, dest: &str) -> Result<Seconds, IngestError> {
        if self.station(origin).is_none() {
            return Err(IngestError::UnknownStation(origin.to_string()));
        }
        if self.station(dest).is_none() {
            return Err(IngestError::UnknownStation(dest.to_string()));
        }
        if origin == dest {
            return Ok(0);
        }
        self.common_lines(origin, dest)
            .iter()
            .map(|line| self.path_seconds(line, line.position[origin], line.position[dest]))
            .min()
            .ok_or_else(|| IngestError::NoCommonLine(origin.to_string(), dest.to_string()))
    }

    /// Travel direction from `origin` to `dest` on their first common line.
    pub fn direction(&self, origin: &str, dest: &str) -> Result<Direction, IngestError> {
        let lines = self.common_lines(origin, dest);
        let line = lines
            .first()
            .ok_or_else(|| IngestError::NoCommonLine(origin.to_string(), dest.to_string()))?;
        let forward = line.position[origin] <= line.position[dest];
        Ok(match (line.axis, forward) {
            (LineAxis::EastWest, true) => Direction::East,
            (LineAxis::EastWest, false) => Direction::West,
            (LineAxis::NorthSouth, true) => Direction::North,
            (LineAxis::NorthSouth, false) => Direction::South,
        })
    }

    /// Whether `via` lies on a common line between `origin` and `dest`, at or
    /// between their positions.
    pub fn passes_through(&self, origin: &str, via: &str, dest: &str) -> bool {
        self.common_lines(origin, dest).iter().any(|line| {
            line.position.get(via).is_some_and(|&p| {
                let a = line.position[origin];
                let b = line.position[dest];
                p >= a.min(b) && p <= a.max(b)
            })
        })
    }

    /// Stations per line in order, for reports.
    pub fn line_orders(&self) -> BTreeMap<String, Vec<StationId>> {
        self.lines.iter().map(|l| (l.id.clone(), l.stations.clone())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_network() -> NetworkModel {
        NetworkModel::from_toml_str(
            r#"
            [[stations]]
            id = "a"
            [[stations]]
            id = "b"
            [[stations]]
            id = "c"
            [[stations]]
            id = "x"
            [[stations]]
            id = "y"

            [[lines]]
            id = "blue"
            axis = "east-west"
            stations = ["a", "b", "c"]

            [[lines]]
            id = "red"
            axis = "north-south"
            stations = ["x", "y"]

            [[segments]]
            from = "a"
            to = "b"
            seconds = 120
            [[segments]]
            from = "b"
            to = "c"
            seconds = 180
            [[segments]]
            from = "x"
            to = "y"
            seconds = 240
            "#,
        )
        .unwrap()
    }

    #[test]
    fn same_station_is_zero() {
        let net = tiny_network();
        assert_eq!(net.travel_time("a", "a").unwrap(), 0);
    }

    #[test]
    fn segments_are_additive() {
        let net = tiny_network();
        assert_eq!(net.travel_time("a", "c").unwrap(), 300);
        assert_eq!(net.travel_time("c", "a").unwrap(), 300); // symmetric by default
    }

    #[test]
    fn disjoint_lines_error() {
        let net = tiny_network();
        assert!(matches!(net.travel_time("a", "y"), Err(IngestError::NoCommonLine(_, _))));
    }

    #[test]
    fn direction_follows_axis() {
        let net = tiny_network();
        assert_eq!(net.direction("a", "c").unwrap(), Direction::East);
        assert_eq!(net.direction("c", "a").unwrap(), Direction::West);
        assert_eq!(net.direction("x", "y").unwrap(), Direction::North);
    }

    #[test]
    fn passes_through_checks_betweenness() {
        let net = tiny_network();
        assert!(net.passes_through("a", "b", "c"));
        assert!(net.passes_through("a", "a", "c"));
        assert!(!net.passes_through("a", "c", "b"));
    }

    #[test]
    fn asymmetric_override_honored() {
        let net = NetworkModel::from_toml_str(
            r#"
            [[stations]]
            id = "a"
            [[stations]]
            id = "b"
            [[lines]]
            id = "l"
            stations = ["a", "b"]
            [[segments]]
            from = "a"
            to = "b"
            seconds = 100
            reverse_seconds = 140
            "#,
        )
        .unwrap();
        assert_eq!(net.travel_time("a", "b").unwrap(), 100);
        assert_eq!(net.travel_time("b", "a").unwrap(), 140);
    }

    #[test]
    fn missing_segment_rejected() {
        let bad = NetworkModel::from_toml_str(
            r#"
            [[stations]]
            id = "a"
            [[stations]]
            id = "b"
            [[lines]]
            id = "l"
            stations = ["a", "b"]
            "#,
        );
        assert!(bad.is_err());
    }
}
