//! CSV readers and writers for taps, events, trips, and anomalies.
//!
//! Malformed rows are hard errors carrying the file path and 1-based line
//! number; nothing is silently dropped.

use std::io::{Read, Write};
use std::path::Path;

use super::{
    format_timestamp, parse_event_timestamp, parse_tap_timestamp, Anomaly, EventRecord,
    IngestError, TapEvent, Trip, TripFlags, UseType,
};

fn header_index(headers: &csv::StringRecord, name: &str, path: &str) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(name))
        .ok_or_else(|| IngestError::MissingColumn { path: path.to_string(), column: name.to_string() })
}

fn optional_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name))
}

/// Read a taps CSV with columns `card_id,timestamp,use_type,station_id`.
///
/// `use_type` accepts `Entry (Tag On)` / `Exit (Tag Off)` as well as the
/// bare words `Entry` / `Exit`.
pub fn parse_taps<R: Read>(reader: R, path: &str) -> Result<Vec<TapEvent>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::Csv { path: path.to_string(), line: 1, source: e })?
        .clone();
    let card_col = header_index(&headers, "card_id", path)?;
    let ts_col = header_index(&headers, "timestamp", path)?;
    let use_col = header_index(&headers, "use_type", path)?;
    let station_col = header_index(&headers, "station_id", path)?;

    let mut taps = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i as u64 + 2; // 1-based, after the header
        let record = record.map_err(|e| IngestError::Csv { path: path.to_string(), line, source: e })?;
        let raw_ts = record.get(ts_col).unwrap_or("");
        let timestamp = parse_tap_timestamp(raw_ts).ok_or_else(|| IngestError::BadTimestamp {
            path: path.to_string(),
            line,
            value: raw_ts.to_string(),
        })?;
        if timestamp < 0 {
            return Err(IngestError::BadTimestamp { path: path.to_string(), line, value: raw_ts.to_string() });
        }
        let raw_use = record.get(use_col).unwrap_or("");
        let use_type = parse_use_type(raw_use).ok_or_else(|| IngestError::BadUseType {
            path: path.to_string(),
            line,
            value: raw_use.to_string(),
        })?;
        taps.push(TapEvent {
            card_id: record.get(card_col).unwrap_or("").to_string(),
            timestamp,
            use_type,
            station_id: record.get(station_col).unwrap_or("").to_string(),
        });
    }
    Ok(taps)
}

fn parse_use_type(s: &str) -> Option<UseType> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("Entry (Tag On)") || s.eq_ignore_ascii_case("Entry") {
        Some(UseType::Entry)
    } else if s.eq_ignore_ascii_case("Exit (Tag Off)") || s.eq_ignore_ascii_case("Exit") {
        Some(UseType::Exit)
    } else {
        None
    }
}

fn parse_count(raw: &str) -> Option<u64> {
    let cleaned: String = raw.chars().filter(|c| *c != ',' && !c.is_whitespace()).collect();
    if cleaned.starts_with('-') {
        return None;
    }
    cleaned.parse().ok()
}

/// Read an events CSV:
/// `begin,category,name,location,attendance[,true_attendance,wpdiff,regularized_margin,end_offset_minutes]`.
///
/// Attendance accepts thousands separators ("15,000" inside a quoted field).
pub fn load_events<R: Read>(reader: R, path: &str) -> Result<Vec<EventRecord>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::Csv { path: path.to_string(), line: 1, source: e })?
        .clone();
    let begin_col = header_index(&headers, "begin", path)?;
    let category_col = header_index(&headers, "category", path)?;
    let name_col = header_index(&headers, "name", path)?;
    let location_col = header_index(&headers, "location", path)?;
    let attendance_col = header_index(&headers, "attendance", path)?;
    let true_att_col = optional_index(&headers, "true_attendance");
    let wpdiff_col = optional_index(&headers, "wpdiff");
    let margin_col = optional_index(&headers, "regularized_margin");
    let offset_col = optional_index(&headers, "end_offset_minutes");

    let mut events = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| IngestError::Csv { path: path.to_string(), line, source: e })?;
        let raw_begin = record.get(begin_col).unwrap_or("");
        let begin = parse_event_timestamp(raw_begin).ok_or_else(|| IngestError::BadTimestamp {
            path: path.to_string(),
            line,
            value: raw_begin.to_string(),
        })?;
        let raw_att = record.get(attendance_col).unwrap_or("");
        let attendance = parse_count(raw_att).ok_or_else(|| IngestError::BadAttendance {
            path: path.to_string(),
            line,
            value: raw_att.to_string(),
        })?;
        let true_attendance = match true_att_col.and_then(|c| record.get(c)).filter(|s| !s.is_empty()) {
            Some(raw) => Some(parse_count(raw).ok_or_else(|| IngestError::BadAttendance {
                path: path.to_string(),
                line,
                value: raw.to_string(),
            })?),
            None => None,
        };
        let parse_opt_f64 = |col: Option<usize>, name: &str| -> Result<Option<f64>, IngestError> {
            match col.and_then(|c| record.get(c)).filter(|s| !s.is_empty()) {
                Some(raw) => raw.parse::<f64>().map(Some).map_err(|_| IngestError::BadField {
                    path: path.to_string(),
                    line,
                    column: name.to_string(),
                    value: raw.to_string(),
                }),
                None => Ok(None),
            }
        };
        events.push(EventRecord {
            begin,
            category: record.get(category_col).unwrap_or("").to_string(),
            name: record.get(name_col).unwrap_or("").to_string(),
            location: record.get(location_col).unwrap_or("").to_string(),
            attendance,
            true_attendance,
            wpdiff: parse_opt_f64(wpdiff_col, "wpdiff")?,
            regularized_margin: parse_opt_f64(margin_col, "regularized_margin")?,
            end_offset_minutes: parse_opt_f64(offset_col, "end_offset_minutes")?,
        });
    }
    Ok(events)
}

fn flags_to_str(flags: &TripFlags) -> String {
    let mut parts = Vec::new();
    if flags.forced_entry {
        parts.push("FORCED_ENTRY");
    }
    if flags.forced_exit {
        parts.push("FORCED_EXIT");
    }
    if flags.self_loop {
        parts.push("SELF_LOOP");
    }
    parts.join(";")
}

fn flags_from_str(s: &str) -> TripFlags {
    let mut flags = TripFlags::default();
    for part in s.split(';').filter(|p| !p.is_empty()) {
        match part {
            "FORCED_ENTRY" => flags.forced_entry = true,
            "FORCED_EXIT" => flags.forced_exit = true,
            "SELF_LOOP" => flags.self_loop = true,
            _ => {}
        }
    }
    flags
}

pub fn write_trips_csv<W: Write>(writer: W, trips: &[Trip]) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["card_id", "entry_station", "entry_time", "exit_station", "exit_time", "flags"])?;
    for t in trips {
        wtr.write_record([
            t.card_id.as_str(),
            t.entry_station.as_str(),
            &format_timestamp(t.entry_time),
            t.exit_station.as_str(),
            &format_timestamp(t.exit_time),
            &flags_to_str(&t.flags),
        ])?;
    }
    wtr.flush()
}

pub fn read_trips_csv<R: Read>(reader: R, path: &str) -> Result<Vec<Trip>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::Csv { path: path.to_string(), line: 1, source: e })?
        .clone();
    let card = header_index(&headers, "card_id", path)?;
    let e_st = header_index(&headers, "entry_station", path)?;
    let e_t = header_index(&headers, "entry_time", path)?;
    let x_st = header_index(&headers, "exit_station", path)?;
    let x_t = header_index(&headers, "exit_time", path)?;
    let fl = header_index(&headers, "flags", path)?;

    let mut trips = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| IngestError::Csv { path: path.to_string(), line, source: e })?;
        let parse_t = |raw: &str| {
            parse_tap_timestamp(raw).ok_or_else(|| IngestError::BadTimestamp {
                path: path.to_string(),
                line,
                value: raw.to_string(),
            })
        };
        trips.push(Trip {
            card_id: record.get(card).unwrap_or("").to_string(),
            entry_station: record.get(e_st).unwrap_or("").to_string(),
            entry_time: parse_t(record.get(e_t).unwrap_or(""))?,
            exit_station: record.get(x_st).unwrap_or("").to_string(),
            exit_time: parse_t(record.get(x_t).unwrap_or(""))?,
            flags: flags_from_str(record.get(fl).unwrap_or("")),
        });
    }
    Ok(trips)
}

pub fn write_anomalies_csv<W: Write>(writer: W, anomalies: &[Anomaly]) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["card_id", "kind", "timestamp", "station_id"])?;
    for a in anomalies {
        wtr.write_record([
            a.card_id.as_str(),
            &format!("{:?}", a.kind),
            &format_timestamp(a.timestamp),
            a.station_id.as_str(),
        ])?;
    }
    wtr.flush()
}

/// Convenience: parse taps from a file path.
pub fn parse_taps_file(path: &Path) -> Result<Vec<TapEvent>, IngestError> {
    let file = std::fs::File::open(path)
        .map_err(|e| IngestError::Io { path: path.display().to_string(), source: e })?;
    parse_taps(std::io::BufReader::new(file), &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tag_on_row() {
        let data = "card_id,timestamp,use_type,station_id\n101,2018/3/20 8:01,Entry (Tag On),Doraville\n";
        let taps = parse_taps(data.as_bytes(), "test.csv").unwrap();
        assert_eq!(taps.len(), 1);
        assert_eq!(taps[0].card_id, "101");
        assert_eq!(taps[0].use_type, UseType::Entry);
        assert_eq!(taps[0].station_id, "Doraville");
        assert_eq!(format_timestamp(taps[0].timestamp), "2018/03/20 08:01:00");
    }

    #[test]
    fn parses_tag_off_variant() {
        let data = "card_id,timestamp,use_type,station_id\n101,2018/3/20 8:28,Exit (Tag Off),Lindbergh Center\n";
        let taps = parse_taps(data.as_bytes(), "test.csv").unwrap();
        assert_eq!(taps[0].use_type, UseType::Exit);
    }

    #[test]
    fn empty_file_with_header_is_empty_list() {
        let data = "card_id,timestamp,use_type,station_id\n";
        assert!(parse_taps(data.as_bytes(), "t.csv").unwrap().is_empty());
    }

    #[test]
    fn bad_use_type_reports_line() {
        let data = "card_id,timestamp,use_type,station_id\n1,2018/3/20 8:01,Entry (Tag On),A\n2,2018/3/20 9:00,Teleport,B\n";
        match parse_taps(data.as_bytes(), "t.csv") {
            Err(IngestError::BadUseType { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected BadUseType, got {other:?}"),
        }
    }

    #[test]
    fn bad_timestamp_reports_line() {
        let data = "card_id,timestamp,use_type,station_id\n1,yesterday,Entry,A\n";
        match parse_taps(data.as_bytes(), "t.csv") {
            Err(IngestError::BadTimestamp { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected BadTimestamp, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_an_error() {
        let data = "card_id,when,use_type,station_id\n";
        assert!(matches!(
            parse_taps(data.as_bytes(), "t.csv"),
            Err(IngestError::MissingColumn { .. })
        ));
    }

    #[test]
    fn event_with_thousands_separator() {
        let data = "begin,category,name,location,attendance\n\
                    01/15/2018 15:00:00,Basketball - Hawks,Hawks v San Antonio Spurs,State Farm Arena,\"15,000\"\n";
        let events = load_events(data.as_bytes(), "events.csv").unwrap();
        assert_eq!(events[0].attendance, 15_000);
        assert!(events[0].wpdiff.is_none());
    }

    #[test]
    fn negative_attendance_rejected() {
        let data = "begin,category,name,location,attendance\n01/15/2018 15:00:00,Expo,X,GWCC,-5\n";
        assert!(matches!(
            load_events(data.as_bytes(), "e.csv"),
            Err(IngestError::BadAttendance { line: 2, .. })
        ));
    }

    #[test]
    fn optional_columns_read_when_present() {
        let data = "begin,category,name,location,attendance,true_attendance,wpdiff,regularized_margin,end_offset_minutes\n\
                    09/22/2018 19:00:00,Soccer,ATL vs RSL,MBS,\"70,000\",72548,0.12,-1.3,0\n";
        let events = load_events(data.as_bytes(), "e.csv").unwrap();
        assert_eq!(events[0].true_attendance, Some(72_548));
        assert_eq!(events[0].wpdiff, Some(0.12));
        assert_eq!(events[0].regularized_margin, Some(-1.3));
        assert_eq!(events[0].end_offset_minutes, Some(0.0));
    }

    #[test]
    fn trips_round_trip_through_csv() {
        let trips = vec![
            Trip {
                card_id: "a".into(),
                entry_station: "X".into(),
                entry_time: 1_537_650_060,
                exit_station: "Y".into(),
                exit_time: 1_537_651_200,
                flags: TripFlags::default(),
            },
            Trip {
                card_id: "b".into(),
                entry_station: "Z".into(),
                entry_time: 1_537_650_000,
                exit_station: "Z".into(),
                exit_time: 1_537_650_000,
                flags: TripFlags { forced_entry: true, self_loop: true, ..TripFlags::default() },
            },
        ];
        let mut buf = Vec::new();
        write_trips_csv(&mut buf, &trips).unwrap();
        let back = read_trips_csv(buf.as_slice(), "trips.csv").unwrap();
        assert_eq!(trips, back);
    }
}
