//! FIFO boarding simulation: riders queue at stations in travel order and
//! board finite-capacity trains, with leftovers taking the head of the queue
//! for the next train.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Seconds, StationId};
use crate::num::Scalar;
use crate::stats::{mean, quantile_sorted, std_pop};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSpec {
    /// Departure time per station; a station absent from the map is skipped.
    pub departures: BTreeMap<StationId, Seconds>,
    pub capacity: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimInput {
    /// Stations in travel order; upstream stations board first.
    pub stations: Vec<StationId>,
    pub trains: Vec<TrainSpec>,
    /// Arrival times per station, sorted ascending.
    pub arrivals: BTreeMap<StationId, Vec<Seconds>>,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("train {train} has negative capacity {capacity}")]
    NegativeCapacity { train: usize, capacity: i64 },
    #[error("departures at '{station}' are not strictly increasing (train {train})")]
    InvalidSchedule { station: StationId, train: usize },
    #[error("arrivals at '{station}' are not sorted")]
    UnsortedArrivals { station: StationId },
    #[error("arrivals reference station '{0}' not in the station list")]
    UnknownStation(StationId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellStats {
    pub train: usize,
    pub station: StationId,
    /// d_i^s: arrivals since the previous train serving this station.
    pub new_demand: u64,
    /// r_i^s = leftover + new demand.
    pub total_demand: u64,
    pub boarded: u64,
    /// l_i^s = max(r_i^s - C_i^s, 0).
    pub left_behind: u64,
    /// C_i^{s+1} = max(0, C_i^s - r_i^s).
    pub remaining_capacity: i64,
}

impl CellStats {
    /// l / r, zero when nobody wanted the train.
    pub fn proportion_of_total<F: Scalar>(&self) -> F {
        if self.total_demand == 0 {
            F::zero()
        } else {
            F::from_u64(self.left_behind).unwrap() / F::from_u64(self.total_demand).unwrap()
        }
    }

    /// l / d, zero when there were no new arrivals.
    pub fn proportion_of_new<F: Scalar>(&self) -> F {
        if self.new_demand == 0 {
            F::zero()
        } else {
            F::from_u64(self.left_behind).unwrap() / F::from_u64(self.new_demand).unwrap()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Assignment {
    Boarded {
        train: usize,
        wait_seconds: Seconds,
        /// How many eligible trains departed full before this rider boarded.
        trains_waited: usize,
    },
    Unserved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiderOutcome {
    pub station: StationId,
    pub arrival: Seconds,
    pub assignment: Assignment,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimResult {
    pub cells: Vec<CellStats>,
    pub riders: Vec<RiderOutcome>,
    pub unserved: u64,
}

impl SimResult {
    pub fn cell(&self, train: usize, station: &str) -> Option<&CellStats> {
        self.cells.iter().find(|c| c.train == train && c.station == station)
    }

    /// Left-behind proportions at one station, one entry per train serving it.
    pub fn station_proportions<F: Scalar>(&self, station: &str, denominator: Denominator) -> Vec<F> {
        self.cells
            .iter()
            .filter(|c| c.station == station)
            .map(|c| match denominator {
                Denominator::Total => c.proportion_of_total(),
                Denominator::New => c.proportion_of_new(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Denominator {
    /// l / r: share of everyone waiting for the train (final algorithm).
    Total,
    /// l / d: share of the interval's new arrivals (earlier table construction).
    New,
}

fn validate(input: &SimInput) -> Result<(), SimError> {
    for (i, train) in input.trains.iter().enumerate() {
        if train.capacity < 0 {
            return Err(SimError::NegativeCapacity { train: i, capacity: train.capacity });
        }
    }
    for station in input.arrivals.keys() {
        if !input.stations.contains(station) {
            return Err(SimError::UnknownStation(station.clone()));
        }
    }
    for station in &input.stations {
        let mut last: Option<Seconds> = None;
        for (i, train) in input.trains.iter().enumerate() {
            if let Some(&t) = train.departures.get(station) {
                if last.is_some_and(|prev| t <= prev) {
                    return Err(SimError::InvalidSchedule { station: station.clone(), train: i });
                }
                last = Some(t);
            }
        }
        if let Some(arr) = input.arrivals.get(station) {
            if arr.windows(2).any(|w| w[0] > w[1]) {
                return Err(SimError::UnsortedArrivals { station: station.clone() });
            }
        }
    }
    Ok(())
}

/// Run the boarding simulation.
///
/// Trains are processed in order; within a train, stations in travel order
/// deplete its capacity. At a station, riders with arrival ≤ the train's
/// departure are eligible (closed boundary); leftovers from previous trains
/// precede new arrivals in the queue. Riders still waiting after the last
/// serving train are unserved.
pub fn simulate_boarding(input: &SimInput) -> Result<SimResult, SimError> {
    validate(input)?;

    let empty: Vec<Seconds> = Vec::new();
    let arrivals_of = |s: &StationId| input.arrivals.get(s).unwrap_or(&empty);

    // Per-station serving train times, for trains_waited.
    let mut serving: BTreeMap<&StationId, Vec<(usize, Seconds)>> = BTreeMap::new();
    for station in &input.stations {
        let times: Vec<(usize, Seconds)> = input
            .trains
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.departures.get(station).map(|&d| (i, d)))
            .collect();
        serving.insert(station, times);
    }

    let mut eligible_upto: BTreeMap<&StationId, usize> =
        input.stations.iter().map(|s| (s, 0usize)).collect();
    let mut boarded_upto: BTreeMap<&StationId, usize> =
        input.stations.iter().map(|s| (s, 0usize)).collect();
    let mut assignments: BTreeMap<&StationId, Vec<Assignment>> = input
        .stations
        .iter()
        .map(|s| (s, vec![Assignment::Unserved; arrivals_of(s).len()]))
        .collect();

    let mut cells = Vec::new();
    for (train_idx, train) in input.trains.iter().enumerate() {
        let mut cap = train.capacity;
        for station in &input.stations {
            let Some(&depart) = train.departures.get(station) else {
                continue;
            };
            let arr = arrivals_of(station);
            let elig = eligible_upto.get_mut(station).unwrap();
            let new_upto = arr.partition_point(|&a| a <= depart);
            let new_demand = (new_upto - *elig) as u64;
            *elig = new_upto;

            let boarded_ptr = boarded_upto.get_mut(station).unwrap();
            let total_demand = (new_upto - *boarded_ptr) as u64;
            let boarding = total_demand.min(cap.max(0) as u64);
            let left_behind = total_demand - boarding;

            let station_serving = &serving[station];
            let this_serving_idx = station_serving
                .iter()
                .position(|&(i, _)| i == train_idx)
                .expect("train serves station");
            let assign = assignments.get_mut(station).unwrap();
            for rider in *boarded_ptr..*boarded_ptr + boarding as usize {
                let arrival = arr[rider];
                let first_eligible = station_serving.partition_point(|&(_, d)| d < arrival);
                assign[rider] = Assignment::Boarded {
                    train: train_idx,
                    wait_seconds: depart - arrival,
                    trains_waited: this_serving_idx - first_eligible,
                };
            }
            *boarded_ptr += boarding as usize;

            let remaining_capacity = (cap - total_demand as i64).max(0);
            cells.push(CellStats {
                train: train_idx,
                station: station.clone(),
                new_demand,
                total_demand,
                boarded: boarding,
                left_behind,
                remaining_capacity,
            });
            cap = remaining_capacity;
        }
    }

    let mut riders = Vec::new();
    let mut unserved = 0u64;
    for station in &input.stations {
        let arr = arrivals_of(station);
        let assign = &assignments[station];
        for (i, &arrival) in arr.iter().enumerate() {
            if assign[i] == Assignment::Unserved {
                unserved += 1;
            }
            riders.push(RiderOutcome { station: station.clone(), arrival, assignment: assign[i] });
        }
    }

    Ok(SimResult { cells, riders, unserved })
}

/// Capacity-independent demand profile for fast repeated simulation over a
/// capacity grid: pre-resolves per-train eligible-arrival counts so one
/// candidate evaluation is pure integer recursion.
#[derive(Debug, Clone)]
pub struct DemandProfile {
    stations: Vec<StationId>,
    /// [station][train] -> cumulative eligible arrivals, None when skipped.
    cum_eligible: Vec<Vec<Option<u64>>>,
    n_trains: usize,
}

impl DemandProfile {
    pub fn new(
        stations: &[StationId],
        trains: &[TrainSpec],
        arrivals: &BTreeMap<StationId, Vec<Seconds>>,
    ) -> Self {
        let empty: Vec<Seconds> = Vec::new();
        let cum_eligible = stations
            .iter()
            .map(|s| {
                let arr = arrivals.get(s).unwrap_or(&empty);
                trains
                    .iter()
                    .map(|t| {
                        t.departures
                            .get(s)
                            .map(|&d| arr.partition_point(|&a| a <= d) as u64)
                    })
                    .collect()
            })
            .collect();
        DemandProfile { stations: stations.to_vec(), cum_eligible, n_trains: trains.len() }
    }

    /// Algorithm-1 recursion for a uniform train capacity.
    pub fn left_behind(&self, capacity: i64) -> Vec<CellStats> {
        let mut cells = Vec::new();
        let mut caps = vec![capacity; self.n_trains];
        for (s_idx, station) in self.stations.iter().enumerate() {
            let mut prev_eligible = 0u64;
            let mut leftover = 0u64;
            for train in 0..self.n_trains {
                let Some(cum) = self.cum_eligible[s_idx][train] else {
                    continue;
                };
                let new_demand = cum - prev_eligible;
                prev_eligible = cum;
                let total_demand = leftover + new_demand;
                let cap = caps[train].max(0) as u64;
                let boarded = total_demand.min(cap);
                let left_behind = total_demand - boarded;
                let remaining = (caps[train] - total_demand as i64).max(0);
                cells.push(CellStats {
                    train,
                    station: station.clone(),
                    new_demand,
                    total_demand,
                    boarded,
                    left_behind,
                    remaining_capacity: remaining,
                });
                caps[train] = remaining;
                leftover = left_behind;
            }
        }
        // Reorder by (train, station order) to match simulate_boarding.
        let order: BTreeMap<&StationId, usize> =
            self.stations.iter().enumerate().map(|(i, s)| (s, i)).collect();
        cells.sort_by_key(|c| (c.train, order[&c.station]));
        cells
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaitStats<F> {
    pub median: F,
    pub q3: F,
    pub mean: F,
    pub std: F,
    pub served: u64,
    pub unserved: u64,
    pub max_trains_waited: usize,
    pub waits_seconds: Vec<Seconds>,
}

/// Wait-time summary over served riders; unserved riders are excluded from
/// the quantiles and counted separately.
pub fn wait_times<F: Scalar>(result: &SimResult) -> WaitStats<F> {
    let mut waits: Vec<Seconds> = Vec::new();
    let mut max_trains_waited = 0usize;
    for rider in &result.riders {
        if let Assignment::Boarded { wait_seconds, trains_waited, .. } = rider.assignment {
            waits.push(wait_seconds);
            max_trains_waited = max_trains_waited.max(trains_waited);
        }
    }
    waits.sort_unstable();
    let as_f: Vec<F> = waits.iter().map(|&w| F::from_i64_lossy(w)).collect();
    let (median, q3, mean_v, std_v) = if as_f.is_empty() {
        (F::zero(), F::zero(), F::zero(), F::zero())
    } else {
        (
            quantile_sorted(&as_f, F::from_f64_lossy(0.5)),
            quantile_sorted(&as_f, F::from_f64_lossy(0.75)),
            mean(&as_f),
            std_pop(&as_f),
        )
    };
    WaitStats {
        median,
        q3,
        mean: mean_v,
        std: std_v,
        served: as_f.len() as u64,
        unserved: result.unserved,
        max_trains_waited,
        waits_seconds: waits,
    }
}

/// One row per (train, station) cell with both proportion conventions.
pub fn left_behind_table<W: Write>(writer: W, result: &SimResult) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "train",
        "station",
        "new_demand",
        "total_demand",
        "boarded",
        "left_behind",
        "remaining_capacity",
        "proportion_of_total",
        "proportion_of_new",
    ])?;
    for c in &result.cells {
        wtr.write_record([
            c.train.to_string(),
            c.station.clone(),
            c.new_demand.to_string(),
            c.total_demand.to_string(),
            c.boarded.to_string(),
            c.left_behind.to_string(),
            c.remaining_capacity.to_string(),
            format!("{}", c.proportion_of_total::<f64>()),
            format!("{}", c.proportion_of_new::<f64>()),
        ])?;
    }
    wtr.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_station_input(departures: &[Seconds], capacity: i64, arrivals: Vec<Seconds>) -> SimInput {
        SimInput {
            stations: vec!["s".into()],
            trains: departures
                .iter()
                .map(|&d| TrainSpec {
                    departures: BTreeMap::from([("s".to_string(), d)]),
                    capacity,
                })
                .collect(),
            arrivals: BTreeMap::from([("s".to_string(), arrivals)]),
        }
    }

    #[test]
    fn uncongested_limit_everyone_boards_first_train() {
        let input = single_station_input(&[100, 200, 300], 1_000_000, (0..250).collect());
        let result = simulate_boarding(&input).unwrap();
        assert_eq!(result.unserved, 0);
        for c in &result.cells {
            assert_eq!(c.left_behind, 0);
            assert_eq!(c.proportion_of_total::<f64>(), 0.0);
        }
        for r in &result.riders {
            match r.assignment {
                Assignment::Boarded { train, trains_waited, .. } => {
                    let first = [100, 200, 300].iter().position(|&d| d >= r.arrival).unwrap();
                    assert_eq!(train, first);
                    assert_eq!(trains_waited, 0);
                }
                Assignment::Unserved => panic!("all riders served"),
            }
        }
    }

    // Hand execution: 10 riders before T1, capacity 7 -> 3 left, who board
    // train 2 ahead of its new arrivals.
    #[test]
    fn leftovers_board_next_train_first() {
        let mut arrivals: Vec<Seconds> = (1..=10).collect();
        arrivals.extend([101, 102, 103, 104, 105]); // 5 new for train 2
        let input = single_station_input(&[100, 200], 7, arrivals);
        let result = simulate_boarding(&input).unwrap();

        let t1 = result.cell(0, "s").unwrap();
        assert_eq!(t1.new_demand, 10);
        assert_eq!(t1.left_behind, 3);
        assert!((t1.proportion_of_total::<f64>() - 0.3).abs() < 1e-12);

        let t2 = result.cell(1, "s").unwrap();
        assert_eq!(t2.new_demand, 5);
        assert_eq!(t2.total_demand, 8);
        assert_eq!(t2.left_behind, 1); // 3 leftovers + 5 new vs capacity 7

        // Leftover riders 8..10 board train 2; the last new arrival is left.
        for r in &result.riders {
            if (8..=10).contains(&r.arrival) {
                assert!(matches!(
                    r.assignment,
                    Assignment::Boarded { train: 1, trains_waited: 1, .. }
                ));
            }
            if r.arrival == 105 {
                assert_eq!(r.assignment, Assignment::Unserved);
            }
        }
    }

    #[test]
    fn arrival_exactly_at_departure_is_eligible() {
        let input = single_station_input(&[100], 10, vec![100]);
        let result = simulate_boarding(&input).unwrap();
        assert!(matches!(
            result.riders[0].assignment,
            Assignment::Boarded { train: 0, wait_seconds: 0, .. }
        ));
    }

    #[test]
    fn riders_after_last_train_unserved() {
        let input = single_station_input(&[100], 10, vec![50, 150]);
        let result = simulate_boarding(&input).unwrap();
        assert_eq!(result.unserved, 1);
    }

    #[test]
    fn upstream_station_boards_first() {
        let input = SimInput {
            stations: vec!["up".into(), "down".into()],
            trains: vec![TrainSpec {
                departures: BTreeMap::from([("up".to_string(), 90), ("down".to_string(), 100)]),
                capacity: 5,
            }],
            arrivals: BTreeMap::from([
                ("up".to_string(), vec![10, 11, 12]),
                ("down".to_string(), vec![10, 11, 12]),
            ]),
        };
        let result = simulate_boarding(&input).unwrap();
        assert_eq!(result.cell(0, "up").unwrap().boarded, 3);
        assert_eq!(result.cell(0, "up").unwrap().remaining_capacity, 2);
        assert_eq!(result.cell(0, "down").unwrap().boarded, 2);
        assert_eq!(result.cell(0, "down").unwrap().left_behind, 1);
    }

    #[test]
    fn skipped_station_rolls_demand_forward() {
        let input = SimInput {
            stations: vec!["s".into()],
            trains: vec![
                TrainSpec { departures: BTreeMap::new(), capacity: 100 }, // skips s
                TrainSpec { departures: BTreeMap::from([("s".to_string(), 200)]), capacity: 100 },
            ],
            arrivals: BTreeMap::from([("s".to_string(), vec![10, 20, 150])]),
        };
        let result = simulate_boarding(&input).unwrap();
        assert_eq!(result.cells.len(), 1);
        assert_eq!(result.cell(1, "s").unwrap().new_demand, 3);
    }

    #[test]
    fn schedule_must_increase_per_station() {
        let input = single_station_input(&[100, 100], 5, vec![]);
        assert!(matches!(simulate_boarding(&input), Err(SimError::InvalidSchedule { .. })));
    }

    #[test]
    fn negative_capacity_rejected() {
        let input = single_station_input(&[100], -1, vec![]);
        assert!(matches!(simulate_boarding(&input), Err(SimError::NegativeCapacity { .. })));
    }

    #[test]
    fn demand_profile_matches_full_simulation() {
        let mut arrivals: Vec<Seconds> = (1..=10).collect();
        arrivals.extend([101, 102, 103, 104, 105]);
        let input = single_station_input(&[100, 200], 7, arrivals);
        let full = simulate_boarding(&input).unwrap();
        let profile = DemandProfile::new(&input.stations, &input.trains, &input.arrivals);
        assert_eq!(profile.left_behind(7), full.cells);
    }

    #[test]
    fn zero_wait_median_when_trains_depart_instantly() {
        let input = single_station_input(&[10, 20, 30], 100, vec![10, 20, 30]);
        let result = simulate_boarding(&input).unwrap();
        let stats: WaitStats<f64> = wait_times(&result);
        assert_eq!(stats.median, 0.0);
        assert_eq!(stats.served, 3);
    }

    #[test]
    fn conservation_of_riders() {
        let arrivals: Vec<Seconds> = (0..97).map(|i| i * 7 % 331).collect();
        let mut sorted = arrivals.clone();
        sorted.sort_unstable();
        let input = single_station_input(&[50, 120, 200], 20, sorted);
        let result = simulate_boarding(&input).unwrap();
        let boarded: u64 = result
            .cells
            .iter()
            .map(|c| c.boarded)
            .sum();
        assert_eq!(boarded + result.unserved, 97);
    }

    #[test]
    fn empty_arrivals_empty_table() {
        let input = single_station_input(&[100], 5, vec![]);
        let result = simulate_boarding(&input).unwrap();
        let mut buf = Vec::new();
        left_behind_table(&mut buf, &result).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2); // header + one all-zero cell row
    }
}
