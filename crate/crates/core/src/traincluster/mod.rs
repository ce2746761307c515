//! Train-level analysis: shift rider times onto the event station, cluster
//! riders into trains, and recover the post-event train schedule.

mod hdbscan;

pub use hdbscan::{hdbscan_1d, ClusterError, Clustering, HdbscanParams, NOISE};

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boardsim::TrainSpec;
use crate::ingest::network::Direction;
use crate::ingest::{format_time_of_day, IngestError, NetworkModel, Seconds, StationId, Trip};
use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjustedTrip {
    /// Index of the source trip in the caller's trip list.
    pub trip_index: usize,
    pub card_id: String,
    pub origin: StationId,
    pub destination: StationId,
    pub entry_time: Seconds,
    pub exit_time: Seconds,
    pub event_station: StationId,
    /// Inferred arrival at the event station: entry + travel(origin, event).
    pub adjusted_arrival: Seconds,
    /// Inferred departure from the event station: exit - travel(event, destination).
    pub adjusted_departure: Seconds,
    pub direction: Direction,
}

impl AdjustedTrip {
    pub fn implied_wait(&self) -> Seconds {
        self.adjusted_departure - self.adjusted_arrival
    }
}

#[derive(Debug, Error)]
pub enum TrainClusterError {
    #[error("trip for card '{card_id}' ({origin} -> {destination}) does not pass through '{event_station}'")]
    NotOnEventPath {
        card_id: String,
        origin: StationId,
        destination: StationId,
        event_station: StationId,
    },
    #[error(transparent)]
    Network(#[from] IngestError),
    #[error(transparent)]
    Clustering(#[from] ClusterError),
    #[error("adjusted trips mix event stations or directions")]
    MixedTrips,
    #[error("refine target {0} is not a first-pass cluster id")]
    UnknownRefineTarget(usize),
    #[error("no trips to cluster")]
    NoTrips,
}

/// Shift one trip's entry/exit times onto the event station.
pub fn adjust_trip(
    trip: &Trip,
    trip_index: usize,
    net: &NetworkModel,
    event_station: &str,
) -> Result<AdjustedTrip, TrainClusterError> {
    if trip.entry_station == trip.exit_station
        || !net.passes_through(&trip.entry_station, event_station, &trip.exit_station)
    {
        return Err(TrainClusterError::NotOnEventPath {
            card_id: trip.card_id.clone(),
            origin: trip.entry_station.clone(),
            destination: trip.exit_station.clone(),
            event_station: event_station.to_string(),
        });
    }
    let to_event = net.travel_time(&trip.entry_station, event_station)?;
    let from_event = net.travel_time(event_station, &trip.exit_station)?;
    let direction = net.direction(&trip.entry_station, &trip.exit_station)?;
    Ok(AdjustedTrip {
        trip_index,
        card_id: trip.card_id.clone(),
        origin: trip.entry_station.clone(),
        destination: trip.exit_station.clone(),
        entry_time: trip.entry_time,
        exit_time: trip.exit_time,
        event_station: event_station.to_string(),
        adjusted_arrival: trip.entry_time + to_event,
        adjusted_departure: trip.exit_time - from_event,
        direction,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ScreenConfig {
    /// Trips whose implied wait falls outside [0, max_wait] are data noise.
    pub max_wait: Seconds,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        ScreenConfig { max_wait: 45 * 60 }
    }
}

/// Drop adjusted trips with negative or implausibly long implied waits.
/// Returns the survivors and the number excluded.
pub fn screen_trips(trips: Vec<AdjustedTrip>, config: ScreenConfig) -> (Vec<AdjustedTrip>, usize) {
    let before = trips.len();
    let kept: Vec<AdjustedTrip> = trips
        .into_iter()
        .filter(|t| {
            let w = t.implied_wait();
            w >= 0 && w <= config.max_wait
        })
        .collect();
    let excluded = before - kept.len();
    (kept, excluded)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainCluster {
    pub train_index: usize,
    /// Latest member departure from the event station.
    pub departure_estimate: Seconds,
    /// Indexes into the adjusted-trip list passed to `cluster_riders`.
    pub members: Vec<usize>,
    pub per_origin_counts: BTreeMap<StationId, usize>,
}

/// Cluster riders into trains on their adjusted departures.
///
/// `refine` lists first-pass cluster ids to re-cluster in isolation (the
/// second pass is operator-directed); each target is replaced by its
/// sub-clusters, with sub-noise dropped. Surviving clusters are ordered by
/// departure estimate and renumbered from zero.
pub fn cluster_riders<F: Scalar>(
    trips: &[AdjustedTrip],
    params: HdbscanParams,
    refine: &[usize],
) -> Result<Vec<TrainCluster>, TrainClusterError> {
    if trips.is_empty() {
        return Err(TrainClusterError::NoTrips);
    }
    let station = &trips[0].event_station;
    let direction = trips[0].direction;
    if trips.iter().any(|t| &t.event_station != station || t.direction != direction) {
        return Err(TrainClusterError::MixedTrips);
    }

    let points: Vec<F> = trips.iter().map(|t| F::from_i64_lossy(t.adjusted_departure)).collect();
    let first_pass = hdbscan_1d(&points, params)?;

    for &target in refine {
        if target >= first_pass.n_clusters {
            return Err(TrainClusterError::UnknownRefineTarget(target));
        }
    }

    // member index lists per final cluster
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for cluster_id in 0..first_pass.n_clusters as i32 {
        let members = first_pass.members_of(cluster_id);
        if refine.contains(&(cluster_id as usize)) {
            let sub_points: Vec<F> = members.iter().map(|&i| points[i]).collect();
            let sub = hdbscan_1d(&sub_points, params)?;
            for sub_id in 0..sub.n_clusters as i32 {
                let sub_members: Vec<usize> = sub
                    .members_of(sub_id)
                    .into_iter()
                    .map(|local| members[local])
                    .collect();
                groups.push(sub_members);
            }
        } else {
            groups.push(members);
        }
    }

    let mut clusters: Vec<TrainCluster> = groups
        .into_iter()
        .filter(|members| !members.is_empty())
        .map(|members| {
            let departure_estimate = members
                .iter()
                .map(|&i| trips[i].adjusted_departure)
                .max()
                .expect("members nonempty");
            let mut per_origin_counts: BTreeMap<StationId, usize> = BTreeMap::new();
            for &i in &members {
                *per_origin_counts.entry(trips[i].origin.clone()).or_default() += 1;
            }
            TrainCluster { train_index: 0, departure_estimate, members, per_origin_counts }
        })
        .collect();

    clusters.sort_by_key(|c| (c.departure_estimate, c.members.first().copied().unwrap_or(usize::MAX)));
    for (i, c) in clusters.iter_mut().enumerate() {
        c.train_index = i;
    }
    Ok(clusters)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveredTrain {
    pub train_index: usize,
    pub departures: BTreeMap<StationId, Seconds>,
    pub serves: BTreeSet<StationId>,
    /// Candidate stations this train passed without stopping (no members
    /// from the station while the next train has some).
    pub skips: BTreeSet<StationId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveredSchedule {
    pub event_station: StationId,
    pub trains: Vec<RecoveredTrain>,
    /// Monotonicity or headway-consistency violations, reported not fatal.
    pub warnings: Vec<String>,
}

impl RecoveredSchedule {
    /// Departure times at one station for the trains serving it.
    pub fn times_at(&self, station: &str) -> Vec<(usize, Seconds)> {
        self.trains
            .iter()
            .filter_map(|t| t.departures.get(station).map(|&d| (t.train_index, d)))
            .collect()
    }

    pub fn to_train_specs(&self, capacity: i64) -> Vec<TrainSpec> {
        self.trains
            .iter()
            .map(|t| TrainSpec { departures: t.departures.clone(), capacity })
            .collect()
    }
}

/// Recover per-station train departure times from cluster memberships.
///
/// The event-station departure is the cluster's departure estimate; at each
/// candidate boarding station the departure is the latest member entry time.
pub fn recover_schedule(
    clusters: &[TrainCluster],
    trips: &[AdjustedTrip],
    net: &NetworkModel,
    candidate_stations: &[StationId],
) -> RecoveredSchedule {
    let event_station = trips
        .first()
        .map(|t| t.event_station.clone())
        .unwrap_or_default();

    let mut trains: Vec<RecoveredTrain> = clusters
        .iter()
        .map(|c| {
            let mut departures = BTreeMap::new();
            departures.insert(event_station.clone(), c.departure_estimate);
            let mut serves = BTreeSet::from([event_station.clone()]);
            for station in candidate_stations {
                if station == &event_station {
                    continue;
                }
                let latest = c
                    .members
                    .iter()
                    .filter(|&&i| &trips[i].origin == station)
                    .map(|&i| trips[i].entry_time)
                    .max();
                if let Some(t) = latest {
                    departures.insert(station.clone(), t);
                    serves.insert(station.clone());
                }
            }
            RecoveredTrain { train_index: c.train_index, departures, serves, skips: BTreeSet::new() }
        })
        .collect();

    // Skipped stops: no members from the station while the next train has some.
    for i in 0..trains.len() {
        for station in candidate_stations {
            if station == &event_station || trains[i].serves.contains(station) {
                continue;
            }
            if trains.get(i + 1).is_some_and(|next| next.serves.contains(station)) {
                trains[i].skips.insert(station.clone());
            }
        }
    }

    let mut warnings = Vec::new();
    let mut stations_seen: BTreeSet<&StationId> = BTreeSet::new();
    for t in &trains {
        stations_seen.extend(t.departures.keys());
    }
    for station in stations_seen {
        let mut last: Option<(usize, Seconds)> = None;
        for t in &trains {
            if let Some(&d) = t.departures.get(station) {
                if let Some((prev_idx, prev)) = last {
                    if d <= prev {
                        warnings.push(format!(
                            "departures at '{station}' not increasing: train {} at {} then train {} at {}",
                            prev_idx,
                            format_time_of_day(prev),
                            t.train_index,
                            format_time_of_day(d)
                        ));
                    }
                }
                last = Some((t.train_index, d));
            }
        }
    }
    // Downstream consistency: event-station departure should not precede an
    // upstream departure plus the segment travel time, less 60s slack.
    for t in &trains {
        let Some(&event_dep) = t.departures.get(&event_station) else { continue };
        for (station, &dep) in &t.departures {
            if station == &event_station {
                continue;
            }
            if let Ok(tt) = net.travel_time(station, &event_station) {
                if event_dep < dep + tt - 60 {
                    warnings.push(format!(
                        "train {}: departure at '{}' ({}) inconsistent with '{}' ({}) plus {}s travel",
                        t.train_index,
                        event_station,
                        format_time_of_day(event_dep),
                        station,
                        format_time_of_day(dep),
                        tt
                    ));
                }
            }
        }
    }

    RecoveredSchedule { event_station, trains, warnings }
}

/// Left-behind proportions implied by the cluster assignments at one
/// boarding station: riders are binned by the serving trains' departure
/// times, and a rider counts as left behind by every serving train that
/// departed at or after their arrival before the one they boarded.
pub fn observed_left_behind<F: Scalar>(
    clusters: &[TrainCluster],
    trips: &[AdjustedTrip],
    station: &str,
    boundaries: &[(usize, Seconds)],
    denominator: crate::boardsim::Denominator,
) -> Vec<F> {
    // (arrival, boarded serving-train position) for riders starting at `station`
    let mut riders: Vec<(Seconds, usize)> = Vec::new();
    for (pos, &(train_index, _)) in boundaries.iter().enumerate() {
        let Some(cluster) = clusters.iter().find(|c| c.train_index == train_index) else {
            continue;
        };
        for &m in &cluster.members {
            if trips[m].origin == station {
                riders.push((trips[m].entry_time, pos));
            }
        }
    }
    riders.sort_unstable();

    let mut proportions = Vec::with_capacity(boundaries.len());
    let mut counted = 0usize;
    let mut leftover = 0u64;
    for (pos, &(_, time)) in boundaries.iter().enumerate() {
        let upto = riders.partition_point(|&(a, _)| a <= time);
        let new_demand = (upto - counted) as u64;
        counted = upto;
        let total = leftover + new_demand;
        let left: u64 = riders[..upto].iter().filter(|&&(_, boarded)| boarded > pos).count() as u64;
        let denom = match denominator {
            crate::boardsim::Denominator::Total => total,
            crate::boardsim::Denominator::New => new_demand,
        };
        proportions.push(if denom == 0 {
            F::zero()
        } else {
            F::from_u64(left).unwrap() / F::from_u64(denom).unwrap()
        });
        leftover = left;
    }
    proportions
}

pub fn write_clusters_csv<W: Write>(
    writer: W,
    clusters: &[TrainCluster],
    trips: &[AdjustedTrip],
) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["trip_ref", "card_id", "train_index", "departure_estimate"])?;
    for c in clusters {
        for &m in &c.members {
            wtr.write_record([
                trips[m].trip_index.to_string(),
                trips[m].card_id.clone(),
                c.train_index.to_string(),
                format_time_of_day(c.departure_estimate),
            ])?;
        }
    }
    wtr.flush()
}

pub fn write_schedule_csv<W: Write>(writer: W, schedule: &RecoveredSchedule) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["train_index", "station", "departure"])?;
    for t in &schedule.trains {
        for (station, &dep) in &t.departures {
            wtr.write_record([t.train_index.to_string(), station.clone(), format_time_of_day(dep)])?;
        }
    }
    wtr.flush()
}
