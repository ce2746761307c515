//! Deterministic synthetic AFC-data generator. Baseline days draw Poisson
//! riders per station bin; event days add riders whose boarding outcomes are
//! produced by the boarding simulation itself, so downstream inference has
//! an exact answer key.

pub mod fixtures;

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::boardsim::{simulate_boarding, Assignment, SimInput, TrainSpec};
use crate::ingest::{midnight, NetworkModel, Seconds, StationId, TapEvent, UseType};
use crate::signatures::DayType;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DayRates {
    /// Riders per 15-minute bin, 96 bins from 03:00.
    pub weekday: Vec<f64>,
    pub weekend: Vec<f64>,
}

impl DayRates {
    pub fn flat(weekday: f64, weekend: f64) -> DayRates {
        DayRates { weekday: vec![weekday; 96], weekend: vec![weekend; 96] }
    }

    fn for_day(&self, day_type: DayType) -> &[f64] {
        match day_type {
            DayType::Weekday => &self.weekday,
            DayType::Weekend => &self.weekend,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub rates: BTreeMap<StationId, DayRates>,
    /// Destination weights per origin; weights need not be normalized.
    pub destinations: BTreeMap<StationId, Vec<(StationId, f64)>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainDef {
    pub departures: BTreeMap<StationId, Seconds>,
}

/// Proportional far-east quota for the in-window riders, pinning the
/// clusterable subset to an exact size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowQuota {
    /// Window in event-station (adjusted) time.
    pub window: (Seconds, Seconds),
    pub subset_destinations: BTreeSet<StationId>,
    pub subset_total: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventDaySpec {
    pub date: NaiveDate,
    /// Boarding stations in travel order, upstream first.
    pub boarding_stations: Vec<StationId>,
    pub event_station: StationId,
    /// Ground-truth trains (pre-peak, peak, and post-peak service).
    pub trains: Vec<TrainDef>,
    pub capacity: i64,
    /// Eastbound rider arrivals per boarding station, sorted ascending.
    pub arrivals: BTreeMap<StationId, Vec<Seconds>>,
    pub east_destinations: Vec<(StationId, f64)>,
    pub quota: Option<WindowQuota>,
    /// Riders boarding in the opposite direction; not capacity-modeled.
    pub west_riders: BTreeMap<StationId, Vec<Seconds>>,
    pub west_destinations: Vec<(StationId, f64)>,
    /// Uniform jitter in [-j, j] applied to event-rider exit taps.
    pub exit_jitter: Seconds,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub baseline: BaselineSpec,
    pub baseline_dates: Vec<NaiveDate>,
    pub event: Option<EventDaySpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GtRider {
    pub card_id: String,
    pub station: StationId,
    pub arrival: Seconds,
    pub destination: StationId,
    /// Ground-truth boarded train index; None if never served.
    pub train: Option<usize>,
    pub eastbound: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub capacity: i64,
    pub trains: Vec<TrainDef>,
    pub riders: Vec<GtRider>,
}

#[derive(Debug, Clone)]
pub struct GeneratedScenario {
    pub baseline_days: Vec<(NaiveDate, Vec<TapEvent>)>,
    pub event_day: Option<(NaiveDate, Vec<TapEvent>, GroundTruth)>,
}

fn day_rng(seed: u64, date: NaiveDate, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let days = date.signed_duration_since(NaiveDate::from_ymd_opt(1970, 1, 1).unwrap()).num_days();
    rng.set_stream((days as u64) << 3 | purpose);
    rng
}

fn weighted_pick<'a>(weights: &'a [(StationId, f64)], rng: &mut ChaCha8Rng) -> &'a StationId {
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    let mut draw = rng.gen_range(0.0..total);
    for (station, w) in weights {
        if draw < *w {
            return station;
        }
        draw -= w;
    }
    &weights.last().expect("nonempty weights").0
}

/// Deterministic proportional sequencing: rider k gets the destination with
/// the largest accumulated weight deficit.
struct WeightedStride<'a> {
    weights: &'a [(StationId, f64)],
    acc: Vec<f64>,
}

impl<'a> WeightedStride<'a> {
    fn new(weights: &'a [(StationId, f64)]) -> Self {
        WeightedStride { weights, acc: vec![0.0; weights.len()] }
    }

    fn next(&mut self) -> &'a StationId {
        let total: f64 = self.weights.iter().map(|(_, w)| w).sum();
        for (i, (_, w)) in self.weights.iter().enumerate() {
            self.acc[i] += w / total;
        }
        let best = self
            .acc
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite weights"))
            .map(|(i, _)| i)
            .expect("nonempty weights");
        self.acc[best] -= 1.0;
        &self.weights[best].0
    }
}

/// One baseline day of taps for every station with rates.
pub fn gen_baseline_day(
    spec: &ScenarioSpec,
    net: &NetworkModel,
    date: NaiveDate,
) -> Vec<TapEvent> {
    let mut rng = day_rng(spec.seed, date, 0);
    let day_type = DayType::of(date);
    let day0 = midnight(date) + 3 * 3600;
    let mut taps = Vec::new();
    let mut card_seq = 0u64;
    let day_tag = date.format("%Y%m%d").to_string();

    for (station, rates) in &spec.baseline.rates {
        let Some(dests) = spec.baseline.destinations.get(station) else {
            continue;
        };
        for (bin, &rate) in rates.for_day(day_type).iter().enumerate() {
            if rate <= 0.0 {
                continue;
            }
            let count = Poisson::new(rate).expect("positive rate").sample(&mut rng) as u64;
            for _ in 0..count {
                let entry = day0 + bin as Seconds * 900 + rng.gen_range(0..900);
                let dest = weighted_pick(dests, &mut rng).clone();
                let travel = net.travel_time(station, &dest).unwrap_or(600);
                let exit = entry + rng.gen_range(60..=360) + travel;
                let card = format!("B{day_tag}-{card_seq}");
                card_seq += 1;
                taps.push(TapEvent {
                    card_id: card.clone(),
                    timestamp: entry,
                    use_type: UseType::Entry,
                    station_id: station.clone(),
                });
                taps.push(TapEvent {
                    card_id: card,
                    timestamp: exit,
                    use_type: UseType::Exit,
                    station_id: dest,
                });
            }
        }
    }
    taps.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then(a.card_id.cmp(&b.card_id)));
    taps
}

/// Split a station's in-window arrivals into boarding intervals by the
/// serving trains' departure times.
fn interval_cells(arrivals: &[Seconds], boundaries: &[Seconds], window: (Seconds, Seconds)) -> Vec<(usize, usize)> {
    // Returns [start, end) index ranges, one per boundary covering the window.
    let mut cells = Vec::new();
    let mut start = arrivals.partition_point(|&a| a <= window.0);
    for &b in boundaries {
        if b <= window.0 {
            continue;
        }
        let end = arrivals.partition_point(|&a| a <= b.min(window.1));
        if end > start {
            cells.push((start, end));
        }
        start = end;
        if b >= window.1 {
            break;
        }
    }
    cells
}

/// Assign east destinations. When a quota is present, the in-window riders
/// receive exactly `subset_total` far-east destinations, spread across
/// boarding-interval cells by largest remainder and evenly within each cell;
/// everything else follows the weighted stride.
fn assign_destinations(
    event: &EventDaySpec,
    net: &NetworkModel,
) -> BTreeMap<StationId, Vec<StationId>> {
    let far_weights: Vec<(StationId, f64)> = event
        .quota
        .as_ref()
        .map(|q| {
            event
                .east_destinations
                .iter()
                .filter(|(s, _)| q.subset_destinations.contains(s))
                .cloned()
                .collect()
        })
        .unwrap_or_default();
    let near_weights: Vec<(StationId, f64)> = event
        .quota
        .as_ref()
        .map(|q| {
            event
                .east_destinations
                .iter()
                .filter(|(s, _)| !q.subset_destinations.contains(s))
                .cloned()
                .collect()
        })
        .unwrap_or_default();

    let mut out = BTreeMap::new();
    match &event.quota {
        None => {
            for (station, arrivals) in &event.arrivals {
                let mut stride = WeightedStride::new(&event.east_destinations);
                out.insert(station.clone(), arrivals.iter().map(|_| stride.next().clone()).collect());
            }
        }
        Some(quota) => {
            // Window in raw station time = adjusted window minus travel to event.
            let mut cells_by_station: Vec<(StationId, (usize, usize))> = Vec::new();
            let mut window_total = 0usize;
            for (station, arrivals) in &event.arrivals {
                let tt = net.travel_time(station, &event.event_station).unwrap_or(0);
                let raw_window = (quota.window.0 - tt, quota.window.1 - tt);
                let boundaries: Vec<Seconds> = event
                    .trains
                    .iter()
                    .filter_map(|t| t.departures.get(station).copied())
                    .collect();
                for cell in interval_cells(arrivals, &boundaries, raw_window) {
                    window_total += cell.1 - cell.0;
                    cells_by_station.push((station.clone(), cell));
                }
            }

            // Largest-remainder quotas per cell.
            let share = quota.subset_total as f64 / window_total.max(1) as f64;
            let mut quotas: Vec<usize> = Vec::with_capacity(cells_by_station.len());
            let mut remainders: Vec<(usize, f64)> = Vec::new();
            let mut assigned = 0usize;
            for (i, (_, (s, e))) in cells_by_station.iter().enumerate() {
                let exact = (e - s) as f64 * share;
                let base = exact.floor() as usize;
                quotas.push(base.min(e - s));
                assigned += quotas[i];
                remainders.push((i, exact - base as f64));
            }
            remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite").then(a.0.cmp(&b.0)));
            let mut deficit = quota.subset_total.saturating_sub(assigned);
            for (i, _) in remainders {
                if deficit == 0 {
                    break;
                }
                let (_, (s, e)) = &cells_by_station[i];
                if quotas[i] < e - s {
                    quotas[i] += 1;
                    deficit -= 1;
                }
            }
            assert_eq!(deficit, 0, "window too small for the requested subset");

            // Materialize per-station destination lists.
            let mut far_stride = WeightedStride::new(&far_weights);
            let mut near_stride = WeightedStride::new(&near_weights);
            for (station, arrivals) in &event.arrivals {
                let mut dests: Vec<Option<StationId>> = vec![None; arrivals.len()];
                for ((cell_station, (s, e)), &q) in cells_by_station.iter().zip(&quotas) {
                    if cell_station != station {
                        continue;
                    }
                    let len = e - s;
                    // Evenly spread q far-east riders across the cell, with
                    // the cell's final rider always in the subset so the
                    // latest boarding time per interval is observable.
                    let mut marks = vec![false; len];
                    for j in 0..q {
                        let pos = ((j + 1) * len + q - 1) / q - 1;
                        let mut p = pos.min(len - 1);
                        while marks[p] {
                            p = (p + len - 1) % len;
                        }
                        marks[p] = true;
                    }
                    for (k, &far) in marks.iter().enumerate() {
                        dests[s + k] = Some(if far {
                            far_stride.next().clone()
                        } else {
                            near_stride.next().clone()
                        });
                    }
                }
                // Off-window riders: free weighted stride.
                let mut stride = WeightedStride::new(&event.east_destinations);
                let filled: Vec<StationId> = dests
                    .into_iter()
                    .map(|d| d.unwrap_or_else(|| stride.next().clone()))
                    .collect();
                out.insert(station.clone(), filled);
            }
        }
    }
    out
}

/// One event day: baseline traffic plus event riders whose exits come from
/// the ground-truth boarding simulation.
pub fn gen_event_day(
    spec: &ScenarioSpec,
    net: &NetworkModel,
    event: &EventDaySpec,
) -> (Vec<TapEvent>, GroundTruth) {
    let mut taps = gen_baseline_day(spec, net, event.date);
    let mut rng = day_rng(spec.seed, event.date, 1);

    let trains: Vec<TrainSpec> = event
        .trains
        .iter()
        .map(|t| TrainSpec { departures: t.departures.clone(), capacity: event.capacity })
        .collect();
    let input = SimInput {
        stations: event.boarding_stations.clone(),
        trains,
        arrivals: event.arrivals.clone(),
    };
    let result = simulate_boarding(&input).expect("ground-truth schedule is well-formed");

    // Rider outcomes keyed by (station, arrival index in input order).
    let mut assignment: BTreeMap<(StationId, usize), Assignment> = BTreeMap::new();
    let mut per_station_counter: BTreeMap<StationId, usize> = BTreeMap::new();
    for rider in &result.riders {
        let idx = per_station_counter.entry(rider.station.clone()).or_default();
        assignment.insert((rider.station.clone(), *idx), rider.assignment);
        *idx += 1;
    }

    let destinations = assign_destinations(event, net);
    let last_departure = event
        .trains
        .iter()
        .filter_map(|t| t.departures.get(&event.event_station))
        .max()
        .copied()
        .unwrap_or(0);

    let mut riders = Vec::new();
    let mut card_seq = 0u64;
    for (station, arrivals) in &event.arrivals {
        let dests = &destinations[station];
        for (idx, &arrival) in arrivals.iter().enumerate() {
            let card = format!("E{card_seq}");
            card_seq += 1;
            let destination = dests[idx].clone();
            let (train, event_station_departure) =
                match assignment[&(station.clone(), idx)] {
                    Assignment::Boarded { train, .. } => (
                        Some(train),
                        event.trains[train].departures[&event.event_station],
                    ),
                    Assignment::Unserved => (None, last_departure + 600),
                };
            let jitter = if event.exit_jitter > 0 {
                rng.gen_range(-event.exit_jitter..=event.exit_jitter)
            } else {
                0
            };
            let exit = event_station_departure
                + net.travel_time(&event.event_station, &destination).expect("east destination on line")
                + jitter;
            taps.push(TapEvent {
                card_id: card.clone(),
                timestamp: arrival,
                use_type: UseType::Entry,
                station_id: station.clone(),
            });
            taps.push(TapEvent {
                card_id: card.clone(),
                timestamp: exit,
                use_type: UseType::Exit,
                station_id: destination.clone(),
            });
            riders.push(GtRider {
                card_id: card,
                station: station.clone(),
                arrival,
                destination,
                train,
                eastbound: true,
            });
        }
    }

    for (station, arrivals) in &event.west_riders {
        let mut stride = WeightedStride::new(&event.west_destinations);
        for &arrival in arrivals {
            let card = format!("W{card_seq}");
            card_seq += 1;
            let destination = stride.next().clone();
            let travel = net.travel_time(station, &destination).expect("west destination on line");
            let exit = arrival + rng.gen_range(120..=300) + travel;
            taps.push(TapEvent {
                card_id: card.clone(),
                timestamp: arrival,
                use_type: UseType::Entry,
                station_id: station.clone(),
            });
            taps.push(TapEvent {
                card_id: card.clone(),
                timestamp: exit,
                use_type: UseType::Exit,
                station_id: destination.clone(),
            });
            riders.push(GtRider {
                card_id: card,
                station: station.clone(),
                arrival,
                destination,
                train: None,
                eastbound: false,
            });
        }
    }

    taps.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then(a.card_id.cmp(&b.card_id)));
    let ground_truth = GroundTruth {
        capacity: event.capacity,
        trains: event.trains.clone(),
        riders,
    };
    (taps, ground_truth)
}

pub fn generate(spec: &ScenarioSpec, net: &NetworkModel) -> GeneratedScenario {
    let baseline_days = spec
        .baseline_dates
        .iter()
        .map(|&d| (d, gen_baseline_day(spec, net, d)))
        .collect();
    let event_day = spec
        .event
        .as_ref()
        .map(|e| {
            let (taps, gt) = gen_event_day(spec, net, e);
            (e.date, taps, gt)
        });
    GeneratedScenario { baseline_days, event_day }
}

/// Evenly spread `count` arrivals over the half-open interval `(start, end]`
/// with the first rider exactly at `end`. `skew` > 1 biases arrivals toward
/// the end of the interval.
pub fn spread_arrivals(start: Seconds, end: Seconds, count: usize, skew: f64) -> Vec<Seconds> {
    let len = (end - start) as f64;
    let mut out: Vec<Seconds> = (0..count)
        .map(|k| {
            let fraction = (k as f64 / count.max(1) as f64).powf(skew);
            end - (len * fraction) as Seconds
        })
        .collect();
    out.sort_unstable();
    out
}
