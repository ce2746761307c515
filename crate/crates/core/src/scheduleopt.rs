//! Demand-matched train schedules: the retrospective optimal schedule from
//! observed arrivals, the prospective proposed schedule from forecasted
//! demand, and simulation-based schedule comparison.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boardsim::{simulate_boarding, wait_times, SimInput, TrainSpec};
use crate::ingest::{format_time_of_day, Seconds};
use crate::num::Scalar;
use crate::signatures::ThroughputCurve;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("no arrivals to schedule against")]
    EmptyArrivals,
    #[error("arrivals must be sorted ascending")]
    UnsortedArrivals,
    #[error("capacity must be at least 1, got {0}")]
    BadCapacity(i64),
    #[error(transparent)]
    Sim(#[from] crate::boardsim::SimError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    /// Departure times at the anchor station, strictly increasing.
    pub departures: Vec<Seconds>,
    pub capacity: i64,
    pub window: (Seconds, Seconds),
}

impl Schedule {
    pub fn n_trains(&self) -> usize {
        self.departures.len()
    }

    pub fn trains_within(&self, window: (Seconds, Seconds)) -> usize {
        self.departures.iter().filter(|&&d| d >= window.0 && d <= window.1).count()
    }

    pub fn headways(&self) -> Vec<Seconds> {
        self.departures.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Append a departure, nudging forward by one second if it would not be
/// strictly later than the previous train (possible only when a full
/// capacity block shares one arrival second).
fn push_departure(departures: &mut Vec<Seconds>, t: Seconds) {
    match departures.last() {
        Some(&last) if t <= last => departures.push(last + 1),
        _ => departures.push(t),
    }
}

/// Ideal retrospective schedule: train i departs at the arrival time of
/// rider i*n, so each train leaves exactly full; a final train at the last
/// arrival picks up the remainder. Every rider boards the first train at or
/// after their arrival.
pub fn optimal_schedule(sorted_arrivals: &[Seconds], capacity: i64) -> Result<Schedule, ScheduleError> {
    if sorted_arrivals.is_empty() {
        return Err(ScheduleError::EmptyArrivals);
    }
    if sorted_arrivals.windows(2).any(|w| w[0] > w[1]) {
        return Err(ScheduleError::UnsortedArrivals);
    }
    if capacity < 1 {
        return Err(ScheduleError::BadCapacity(capacity));
    }
    let n = capacity as usize;
    let total = sorted_arrivals.len();
    let mut departures = Vec::with_capacity(total / n + 1);
    let mut i = 1;
    while i * n <= total {
        push_departure(&mut departures, sorted_arrivals[i * n - 1]);
        i += 1;
    }
    if total % n != 0 {
        push_departure(&mut departures, sorted_arrivals[total - 1]);
    }
    Ok(Schedule {
        departures,
        capacity,
        window: (sorted_arrivals[0], sorted_arrivals[total - 1]),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastProvenance<F> {
    pub predicted_ridership: F,
    pub east_share: F,
    pub peak_share: F,
    pub buffer: F,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrivalForecast<F> {
    pub bin_width: Seconds,
    /// Absolute start of the forecast window.
    pub window_start: Seconds,
    pub bins: Vec<u64>,
    pub total: u64,
    pub provenance: ForecastProvenance<F>,
}

impl<F> ArrivalForecast<F> {
    pub fn window_end(&self) -> Seconds {
        self.window_start + self.bins.len() as Seconds * self.bin_width
    }
}

pub const DEFAULT_EAST_SHARE: f64 = 0.92;
pub const DEFAULT_PEAK_SHARE: f64 = 0.68;
pub const DEFAULT_BUFFER: f64 = 1.10;

/// Scale a normalized throughput curve into per-bin rider counts:
/// percent * prediction * direction share * peak share * planning buffer,
/// rounded half-up per bin.
pub fn forecast_arrivals<F: Scalar>(
    curve: &ThroughputCurve<F>,
    predicted_ridership: F,
    east_share: F,
    peak_share: F,
    buffer: F,
    window_start: Seconds,
) -> ArrivalForecast<F> {
    let half = F::from_f64_lossy(0.5);
    let bins: Vec<u64> = curve
        .percent
        .iter()
        .map(|&p| {
            let x = p * predicted_ridership * east_share * peak_share * buffer;
            (x + half).floor().to_u64().unwrap_or(0)
        })
        .collect();
    let total = bins.iter().sum();
    ArrivalForecast {
        bin_width: curve.bin_width,
        window_start,
        bins,
        total,
        provenance: ForecastProvenance {
            predicted_ridership,
            east_share,
            peak_share,
            buffer,
        },
    }
}

/// Spread each bin's riders evenly across the bin, mid-aligned.
pub fn materialize_forecast<F: Scalar>(forecast: &ArrivalForecast<F>) -> Vec<Seconds> {
    let mut arrivals = Vec::with_capacity(forecast.total as usize);
    for (b, &count) in forecast.bins.iter().enumerate() {
        let start = forecast.window_start + b as Seconds * forecast.bin_width;
        for k in 0..count {
            let offset = (forecast.bin_width as f64 * (k as f64 + 0.5) / count as f64) as Seconds;
            arrivals.push(start + offset);
        }
    }
    arrivals.sort_unstable();
    arrivals
}

/// Prospective schedule from forecasted demand: each train departs as soon
/// as cumulative demand reaches the next capacity multiple, plus a sweeper
/// at the window end for any residual.
pub fn propose_schedule<F: Scalar>(
    forecast: &ArrivalForecast<F>,
    capacity: i64,
) -> Result<Schedule, ScheduleError> {
    if capacity < 1 {
        return Err(ScheduleError::BadCapacity(capacity));
    }
    let window = (forecast.window_start, forecast.window_end());
    let arrivals = materialize_forecast(forecast);
    if arrivals.is_empty() {
        return Ok(Schedule { departures: vec![window.1], capacity, window });
    }
    let n = capacity as usize;
    let mut departures = Vec::new();
    let mut k = 1;
    while k * n <= arrivals.len() {
        push_departure(&mut departures, arrivals[k * n - 1]);
        k += 1;
    }
    if arrivals.len() % n != 0 || departures.is_empty() {
        push_departure(&mut departures, window.1);
    }
    Ok(Schedule { departures, capacity, window })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleMetrics<F> {
    pub label: String,
    /// Trains departing within the comparison window.
    pub n_trains: usize,
    pub wait_median_s: F,
    pub wait_q3_s: F,
    pub wait_mean_s: F,
    pub wait_std_s: F,
    /// Mean left-behind proportion over in-window trains.
    pub avg_left_behind: F,
    pub max_trains_waited: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport<F> {
    pub window: (Seconds, Seconds),
    pub capacity: i64,
    pub actual: ScheduleMetrics<F>,
    pub proposed: ScheduleMetrics<F>,
}

/// Normal post-peak service headway assumed when extending schedules past
/// their windows.
pub const NORMAL_HEADWAY: Seconds = 600;

/// Extend a departure list with normal-headway trains until it covers the
/// last arrival.
fn extend_to_cover(departures: &[Seconds], last_arrival: Seconds) -> Vec<Seconds> {
    let mut all = departures.to_vec();
    let mut last = *all.last().expect("schedule has at least one train");
    while last < last_arrival {
        last += NORMAL_HEADWAY;
        all.push(last);
    }
    all
}

/// Simulate one schedule against realized arrivals at an assumed capacity.
pub fn evaluate_schedule<F: Scalar>(
    label: &str,
    schedule: &Schedule,
    realized_arrivals: &[Seconds],
    capacity: i64,
    window: (Seconds, Seconds),
) -> Result<ScheduleMetrics<F>, ScheduleError> {
    if realized_arrivals.is_empty() {
        return Err(ScheduleError::EmptyArrivals);
    }
    let station = "platform".to_string();
    let last_arrival = *realized_arrivals.iter().max().expect("nonempty");
    let departures = extend_to_cover(&schedule.departures, last_arrival);
    let trains: Vec<TrainSpec> = departures
        .iter()
        .map(|&d| TrainSpec { departures: BTreeMap::from([(station.clone(), d)]), capacity })
        .collect();
    let mut arrivals = realized_arrivals.to_vec();
    arrivals.sort_unstable();
    let input = SimInput {
        stations: vec![station.clone()],
        trains,
        arrivals: BTreeMap::from([(station.clone(), arrivals)]),
    };
    let result = simulate_boarding(&input)?;
    let waits = wait_times::<F>(&result);

    let in_window: Vec<F> = result
        .cells
        .iter()
        .filter(|c| {
            let d = departures[c.train];
            d >= window.0 && d <= window.1
        })
        .map(|c| c.proportion_of_total::<F>())
        .collect();
    let avg_left_behind = if in_window.is_empty() {
        F::zero()
    } else {
        crate::stats::mean(&in_window)
    };

    Ok(ScheduleMetrics {
        label: label.to_string(),
        n_trains: departures.iter().filter(|&&d| d >= window.0 && d <= window.1).count(),
        wait_median_s: waits.median,
        wait_q3_s: waits.q3,
        wait_mean_s: waits.mean,
        wait_std_s: waits.std,
        avg_left_behind,
        max_trains_waited: waits.max_trains_waited,
    })
}

/// Side-by-side simulation of the actual and proposed schedules against the
/// same realized arrivals. Both schedules are extended past the window with
/// normal-headway trains so every rider is eventually served.
pub fn compare_schedules<F: Scalar>(
    actual: &Schedule,
    proposed: &Schedule,
    realized_arrivals: &[Seconds],
    capacity: i64,
    window: (Seconds, Seconds),
) -> Result<ComparisonReport<F>, ScheduleError> {
    Ok(ComparisonReport {
        window,
        capacity,
        actual: evaluate_schedule("actual", actual, realized_arrivals, capacity, window)?,
        proposed: evaluate_schedule("proposed", proposed, realized_arrivals, capacity, window)?,
    })
}

pub fn write_schedule_csv<W: Write>(writer: W, schedule: &Schedule) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["train_index", "departure"])?;
    for (i, &d) in schedule.departures.iter().enumerate() {
        wtr.write_record([i.to_string(), format_time_of_day(d)])?;
    }
    wtr.flush()
}

pub fn write_comparison_csv<F: Scalar, W: Write>(
    writer: W,
    reports: &[ComparisonReport<F>],
) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "schedule",
        "n_trains",
        "avg_wt_min",
        "std_min",
        "median_wt_min",
        "avg_pct_lb",
        "max_trains_waited",
    ])?;
    let minutes = F::from_f64_lossy(1.0 / 60.0);
    let hundred = F::from_f64_lossy(100.0);
    for report in reports {
        for m in [&report.actual, &report.proposed] {
            wtr.write_record([
                m.label.clone(),
                m.n_trains.to_string(),
                format!("{}", m.wait_mean_s * minutes),
                format!("{}", m.wait_std_s * minutes),
                format!("{}", m.wait_median_s * minutes),
                format!("{}", m.avg_left_behind * hundred),
                m.max_trains_waited.to_string(),
            ])?;
        }
    }
    wtr.flush()
}
