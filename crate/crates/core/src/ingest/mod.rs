//! Fare-gate transaction ingestion: tap parsing, trip chaining, the rail
//! network model, and inter-station travel times.
//!
//! Timestamps are integer seconds in local civil time. The source data has
//! no timezone information, so no timezone or DST math is applied; this is a
//! documented limitation.

mod csvio;
pub mod network;

pub use csvio::{
    load_events, parse_taps, parse_taps_file, read_trips_csv, write_anomalies_csv, write_trips_csv,
};
pub use network::{Direction, LineAxis, NetworkModel, Station};

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Seconds = i64;
pub type StationId = String;
pub type CardId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UseType {
    Entry,
    Exit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TapEvent {
    pub card_id: CardId,
    pub timestamp: Seconds,
    pub use_type: UseType,
    pub station_id: StationId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TripFlags {
    pub forced_entry: bool,
    pub forced_exit: bool,
    pub self_loop: bool,
}

impl TripFlags {
    pub fn is_clean(&self) -> bool {
        !self.forced_entry && !self.forced_exit
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trip {
    pub card_id: CardId,
    pub entry_station: StationId,
    pub entry_time: Seconds,
    pub exit_station: StationId,
    pub exit_time: Seconds,
    pub flags: TripFlags,
}

impl Trip {
    pub fn duration(&self) -> Seconds {
        self.exit_time - self.entry_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnomalyKind {
    /// Two consecutive entries on one card; a forced exit was synthesized.
    EntryWithoutExit,
    /// An exit with no open entry; a forced entry was synthesized.
    ExitWithoutEntry,
    /// An entry left open longer than the chaining timeout.
    EntryTimeout,
    /// Same-second duplicate tap (same card, station, direction, second).
    DoubleTap,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anomaly {
    pub card_id: CardId,
    pub kind: AnomalyKind,
    pub timestamp: Seconds,
    pub station_id: StationId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub begin: Seconds,
    pub category: String,
    pub name: String,
    pub location: String,
    pub attendance: u64,
    pub true_attendance: Option<u64>,
    /// Home-team win percentage minus away-team win percentage.
    pub wpdiff: Option<f64>,
    /// Margin of victory over the league margin std, negative if the home team wins.
    pub regularized_margin: Option<f64>,
    /// Delay of the actual event end relative to start + average duration.
    pub end_offset_minutes: Option<f64>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: missing required column '{column}'")]
    MissingColumn { path: String, column: String },
    #[error("{path}:{line}: bad timestamp '{value}'")]
    BadTimestamp { path: String, line: u64, value: String },
    #[error("{path}:{line}: bad use type '{value}'")]
    BadUseType { path: String, line: u64, value: String },
    #[error("{path}:{line}: bad attendance '{value}'")]
    BadAttendance { path: String, line: u64, value: String },
    #[error("{path}:{line}: bad field '{column}': '{value}'")]
    BadField { path: String, line: u64, column: String, value: String },
    #[error("{path}:{line}: {source}")]
    Csv { path: String, line: u64, source: csv::Error },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("network model: {0}")]
    Network(String),
    #[error("no common line between '{0}' and '{1}'")]
    NoCommonLine(StationId, StationId),
    #[error("unknown station '{0}'")]
    UnknownStation(StationId),
}

/// Parse `YYYY/MM/DD H:MM[:SS]` into local-civil epoch seconds.
pub fn parse_tap_timestamp(s: &str) -> Option<Seconds> {
    let s = s.trim();
    for fmt in ["%Y/%m/%d %H:%M:%S", "%Y/%m/%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    None
}

/// Parse `MM/DD/YYYY H:MM[:SS]` (event catalog style) into epoch seconds.
pub fn parse_event_timestamp(s: &str) -> Option<Seconds> {
    let s = s.trim();
    for fmt in ["%m/%d/%Y %H:%M:%S", "%m/%d/%Y %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    None
}

pub fn format_timestamp(t: Seconds) -> String {
    let dt = chrono::DateTime::from_timestamp(t, 0).expect("timestamp in range");
    dt.naive_utc().format("%Y/%m/%d %H:%M:%S").to_string()
}

/// `HH:MM:SS` within the civil day of `t`.
pub fn format_time_of_day(t: Seconds) -> String {
    let dt = chrono::DateTime::from_timestamp(t, 0).expect("timestamp in range");
    let time = dt.naive_utc().time();
    format!("{:02}:{:02}:{:02}", time.hour(), time.minute(), time.second())
}

pub fn date_of(t: Seconds) -> NaiveDate {
    chrono::DateTime::from_timestamp(t, 0)
        .expect("timestamp in range")
        .naive_utc()
        .date()
}

/// Epoch seconds of local-civil midnight of `date`.
pub fn midnight(date: NaiveDate) -> Seconds {
    date.and_hms_opt(0, 0, 0)
        .expect("valid midnight")
        .and_utc()
        .timestamp()
}

#[derive(Debug, Clone, Copy)]
pub struct ChainConfig {
    /// An entry left open this long is closed with a forced exit.
    pub entry_timeout: Seconds,
}

impl Default for ChainConfig {
    fn default() -> Self {
        // Paper describes the timeout as "3-4 hours"; we fix 4.
        ChainConfig { entry_timeout: 4 * 3600 }
    }
}

/// Match entries to the following exit of the same card, synthesizing
/// forced entries/exits for unpaired taps.
///
/// Every tap ends up in exactly one trip: each entry produces one trip
/// (clean or forced-exit) and each unmatched exit produces one forced-entry
/// trip. Per card, taps are ordered by time with file order breaking ties.
pub fn chain_trips(taps: &[TapEvent], config: ChainConfig) -> (Vec<Trip>, Vec<Anomaly>) {
    // Group per card, preserving file order for stable tie-breaking.
    let mut by_card: Vec<(&str, Vec<&TapEvent>)> = Vec::new();
    let mut index: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    for tap in taps {
        match index.get(tap.card_id.as_str()) {
            Some(&i) => by_card[i].1.push(tap),
            None => {
                index.insert(tap.card_id.as_str(), by_card.len());
                by_card.push((tap.card_id.as_str(), vec![tap]));
            }
        }
    }

    let mut trips = Vec::new();
    let mut anomalies = Vec::new();

    for (_card, mut card_taps) in by_card {
        card_taps.sort_by_key(|t| t.timestamp); // stable: file order breaks ties

        for pair in card_taps.windows(2) {
            if pair[0].timestamp == pair[1].timestamp
                && pair[0].station_id == pair[1].station_id
                && pair[0].use_type == pair[1].use_type
            {
                anomalies.push(Anomaly {
                    card_id: pair[1].card_id.clone(),
                    kind: AnomalyKind::DoubleTap,
                    timestamp: pair[1].timestamp,
                    station_id: pair[1].station_id.clone(),
                });
            }
        }

        let mut pending: Option<&TapEvent> = None;
        for tap in card_taps {
            match tap.use_type {
                UseType::Entry => {
                    if let Some(open) = pending.take() {
                        trips.push(forced_exit_trip(open));
                        anomalies.push(Anomaly {
                            card_id: open.card_id.clone(),
                            kind: AnomalyKind::EntryWithoutExit,
                            timestamp: open.timestamp,
                            station_id: open.station_id.clone(),
                        });
                    }
                    pending = Some(tap);
                }
                UseType::Exit => match pending.take() {
                    Some(open) if tap.timestamp - open.timestamp <= config.entry_timeout => {
                        let self_loop = open.station_id == tap.station_id;
                        trips.push(Trip {
                            card_id: open.card_id.clone(),
                            entry_station: open.station_id.clone(),
                            entry_time: open.timestamp,
                            exit_station: tap.station_id.clone(),
                            exit_time: tap.timestamp,
                            flags: TripFlags { self_loop, ..TripFlags::default() },
                        });
                    }
                    Some(open) => {
                        // Entry expired; close it and treat this exit as unmatched.
                        trips.push(forced_exit_trip(open));
                        anomalies.push(Anomaly {
                            card_id: open.card_id.clone(),
                            kind: AnomalyKind::EntryTimeout,
                            timestamp: open.timestamp,
                            station_id: open.station_id.clone(),
                        });
                        trips.push(forced_entry_trip(tap));
                        anomalies.push(exit_anomaly(tap));
                    }
                    None => {
                        trips.push(forced_entry_trip(tap));
                        anomalies.push(exit_anomaly(tap));
                    }
                },
            }
        }
        if let Some(open) = pending {
            trips.push(forced_exit_trip(open));
            anomalies.push(Anomaly {
                card_id: open.card_id.clone(),
                kind: AnomalyKind::EntryWithoutExit,
                timestamp: open.timestamp,
                station_id: open.station_id.clone(),
            });
        }
    }

    (trips, anomalies)
}

fn forced_exit_trip(open: &TapEvent) -> Trip {
    Trip {
        card_id: open.card_id.clone(),
        entry_station: open.station_id.clone(),
        entry_time: open.timestamp,
        exit_station: open.station_id.clone(),
        exit_time: open.timestamp,
        flags: TripFlags { forced_exit: true, self_loop: true, ..TripFlags::default() },
    }
}

fn forced_entry_trip(tap: &TapEvent) -> Trip {
    Trip {
        card_id: tap.card_id.clone(),
        entry_station: tap.station_id.clone(),
        entry_time: tap.timestamp,
        exit_station: tap.station_id.clone(),
        exit_time: tap.timestamp,
        flags: TripFlags { forced_entry: true, self_loop: true, ..TripFlags::default() },
    }
}

fn exit_anomaly(tap: &TapEvent) -> Anomaly {
    Anomaly {
        card_id: tap.card_id.clone(),
        kind: AnomalyKind::ExitWithoutEntry,
        timestamp: tap.timestamp,
        station_id: tap.station_id.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tap(card: &str, ts: Seconds, use_type: UseType, station: &str) -> TapEvent {
        TapEvent {
            card_id: card.into(),
            timestamp: ts,
            use_type,
            station_id: station.into(),
        }
    }

    #[test]
    fn entry_exit_pair_chains_to_one_trip() {
        let taps = vec![
            tap("101", 1000, UseType::Entry, "Doraville"),
            tap("101", 2620, UseType::Exit, "Lindbergh"),
        ];
        let (trips, anomalies) = chain_trips(&taps, ChainConfig::default());
        assert_eq!(trips.len(), 1);
        assert!(anomalies.is_empty());
        let t = &trips[0];
        assert_eq!(t.entry_station, "Doraville");
        assert_eq!(t.exit_station, "Lindbergh");
        assert!(t.flags.is_clean());
        assert!(!t.flags.self_loop);
    }

    #[test]
    fn lone_exit_becomes_forced_entry_self_loop() {
        let taps = vec![tap("7", 500, UseType::Exit, "Five Points")];
        let (trips, anomalies) = chain_trips(&taps, ChainConfig::default());
        assert_eq!(trips.len(), 1);
        assert!(trips[0].flags.forced_entry);
        assert!(trips[0].flags.self_loop);
        assert_eq!(trips[0].entry_time, trips[0].exit_time);
        assert_eq!(trips[0].entry_station, "Five Points");
        assert_eq!(anomalies.len(), 1);
        assert_eq!(anomalies[0].kind, AnomalyKind::ExitWithoutEntry);
    }

    // All 2-tap orderings of one card, checked against the matching rule.
    #[test]
    fn two_tap_orderings_enumerated() {
        let cfg = ChainConfig::default();

        // entry, entry -> forced exit for the first + open second closed at end
        let (trips, anomalies) = chain_trips(
            &[tap("c", 10, UseType::Entry, "A"), tap("c", 20, UseType::Entry, "B")],
            cfg,
        );
        assert_eq!(trips.len(), 2);
        assert!(trips[0].flags.forced_exit);
        assert_eq!(trips[0].exit_time, 10);
        assert!(trips[1].flags.forced_exit);
        assert_eq!(anomalies.iter().filter(|a| a.kind == AnomalyKind::EntryWithoutExit).count(), 2);

        // exit, exit -> two forced entries
        let (trips, _) = chain_trips(
            &[tap("c", 10, UseType::Exit, "A"), tap("c", 20, UseType::Exit, "B")],
            cfg,
        );
        assert_eq!(trips.len(), 2);
        assert!(trips.iter().all(|t| t.flags.forced_entry));

        // exit, entry -> forced entry + forced exit (entry left open)
        let (trips, _) = chain_trips(
            &[tap("c", 10, UseType::Exit, "A"), tap("c", 20, UseType::Entry, "B")],
            cfg,
        );
        assert_eq!(trips.len(), 2);
        assert!(trips[0].flags.forced_entry);
        assert!(trips[1].flags.forced_exit);

        // entry, exit -> one clean trip
        let (trips, _) = chain_trips(
            &[tap("c", 10, UseType::Entry, "A"), tap("c", 20, UseType::Exit, "B")],
            cfg,
        );
        assert_eq!(trips.len(), 1);
        assert!(trips[0].flags.is_clean());
    }

    #[test]
    fn entry_timeout_forces_exit() {
        let cfg = ChainConfig::default();
        let taps = vec![
            tap("c", 0, UseType::Entry, "A"),
            tap("c", 5 * 3600, UseType::Exit, "B"),
        ];
        let (trips, anomalies) = chain_trips(&taps, cfg);
        assert_eq!(trips.len(), 2);
        assert!(trips[0].flags.forced_exit);
        assert!(trips[1].flags.forced_entry);
        assert!(anomalies.iter().any(|a| a.kind == AnomalyKind::EntryTimeout));
    }

    #[test]
    fn double_tap_kept_and_flagged() {
        let taps = vec![
            tap("c", 100, UseType::Entry, "A"),
            tap("c", 100, UseType::Entry, "A"),
            tap("c", 400, UseType::Exit, "B"),
        ];
        let (trips, anomalies) = chain_trips(&taps, ChainConfig::default());
        // First entry force-closed, second chains with the exit.
        assert_eq!(trips.len(), 2);
        assert!(anomalies.iter().any(|a| a.kind == AnomalyKind::DoubleTap));
    }

    #[test]
    fn tap_conservation_holds() {
        let taps = vec![
            tap("a", 10, UseType::Entry, "A"),
            tap("a", 50, UseType::Exit, "B"),
            tap("b", 20, UseType::Exit, "C"),
            tap("b", 30, UseType::Entry, "C"),
            tap("c", 5, UseType::Entry, "D"),
        ];
        let entries = taps.iter().filter(|t| t.use_type == UseType::Entry).count();
        let (trips, _) = chain_trips(&taps, ChainConfig::default());
        // entries + unmatched exits (card b's exit) = trips
        assert_eq!(trips.len(), entries + 1);
    }

    #[test]
    fn timestamp_formats_round_trip() {
        let t = parse_tap_timestamp("2018/03/20 8:01").unwrap();
        assert_eq!(format_timestamp(t), "2018/03/20 08:01:00");
        let t2 = parse_tap_timestamp(&format_timestamp(t)).unwrap();
        assert_eq!(t, t2);
        assert!(parse_tap_timestamp("not a time").is_none());
        let e = parse_event_timestamp("01/15/2018 15:00:00").unwrap();
        assert_eq!(format_time_of_day(e), "15:00:00");
    }
}
