//! Baseline station signatures, event-ridership isolation, and post-event
//! throughput curves.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{midnight, Seconds, StationId, TapEvent, UseType};
use crate::num::Scalar;
use crate::stats::quantile_sorted;

pub const BINS_PER_DAY: usize = 96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DayType {
    Weekday,
    Weekend,
}

impl DayType {
    pub fn of(date: NaiveDate) -> DayType {
        match date.weekday() {
            Weekday::Sat | Weekday::Sun => DayType::Weekend,
            _ => DayType::Weekday,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DayConfig {
    /// Service day starts at this hour so late-night event exits stay with
    /// the event's date.
    pub day_start_hour: u32,
    pub bin_width: Seconds,
}

impl Default for DayConfig {
    fn default() -> Self {
        DayConfig { day_start_hour: 3, bin_width: 900 }
    }
}

impl DayConfig {
    pub fn bins_per_day(&self) -> usize {
        (86_400 / self.bin_width) as usize
    }
}

/// Map a timestamp to its service day and bin index; bins are left-closed,
/// right-open.
pub fn assign_bin(timestamp: Seconds, config: &DayConfig) -> (NaiveDate, usize) {
    let shifted = timestamp - config.day_start_hour as Seconds * 3600;
    let day_index = shifted.div_euclid(86_400);
    let within = shifted.rem_euclid(86_400);
    let date = chrono::DateTime::from_timestamp(day_index * 86_400, 0)
        .expect("timestamp in range")
        .naive_utc()
        .date();
    (date, (within / config.bin_width) as usize)
}

/// Start-of-bin timestamp for a (service day, bin) pair.
pub fn bin_start(date: NaiveDate, bin: usize, config: &DayConfig) -> Seconds {
    midnight(date) + config.day_start_hour as Seconds * 3600 + bin as Seconds * config.bin_width
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignatureBin<F> {
    pub mean: F,
    pub p10: F,
    pub p90: F,
    pub n_days: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationSignature<F> {
    pub station_id: StationId,
    pub day_type: DayType,
    pub direction: UseType,
    pub bin_width: Seconds,
    pub bins: Vec<SignatureBin<F>>,
}

#[derive(Debug, Error)]
pub enum SignatureError {
    #[error("no baseline days supplied")]
    EmptyBaseline,
    #[error("only {got} baseline days, {need} required")]
    InsufficientBaseline { got: usize, need: usize },
    #[error("no games supplied")]
    EmptyGameList,
    #[error("event day counts must have {expected} bins, got {got}")]
    BinMismatch { expected: usize, got: usize },
}

/// Count taps for one station and direction per (service day, bin).
pub fn bin_counts(
    taps: &[TapEvent],
    station: &str,
    direction: UseType,
    config: &DayConfig,
) -> BTreeMap<NaiveDate, Vec<u32>> {
    let bins = config.bins_per_day();
    let mut out: BTreeMap<NaiveDate, Vec<u32>> = BTreeMap::new();
    for tap in taps {
        if tap.station_id != station || tap.use_type != direction {
            continue;
        }
        let (date, bin) = assign_bin(tap.timestamp, config);
        out.entry(date).or_insert_with(|| vec![0; bins])[bin] += 1;
    }
    out
}

/// Build a baseline signature from per-day bin counts.
///
/// Days listed in `baseline_days` but absent from `day_counts` contribute
/// all-zero bins; callers are responsible for excluding event days.
pub fn build_signature<F: Scalar>(
    station: &str,
    direction: UseType,
    day_type: DayType,
    day_counts: &BTreeMap<NaiveDate, Vec<u32>>,
    baseline_days: &[NaiveDate],
    config: &DayConfig,
    min_days: usize,
) -> Result<StationSignature<F>, SignatureError> {
    let days: Vec<NaiveDate> = baseline_days
        .iter()
        .copied()
        .filter(|d| DayType::of(*d) == day_type)
        .collect();
    if days.is_empty() {
        return Err(SignatureError::EmptyBaseline);
    }
    if days.len() < min_days {
        return Err(SignatureError::InsufficientBaseline { got: days.len(), need: min_days });
    }

    let bins = config.bins_per_day();
    let zeros = vec![0u32; bins];
    let mut signature_bins = Vec::with_capacity(bins);
    for bin in 0..bins {
        let mut sample: Vec<F> = days
            .iter()
            .map(|d| {
                let counts = day_counts.get(d).unwrap_or(&zeros);
                F::from_u32(counts[bin]).expect("count fits scalar")
            })
            .collect();
        sample.sort_by(|a, b| a.partial_cmp(b).expect("finite counts"));
        let n = F::from_usize_lossy(sample.len());
        let mean = sample.iter().copied().sum::<F>() / n;
        signature_bins.push(SignatureBin {
            mean,
            p10: quantile_sorted(&sample, F::from_f64_lossy(0.10)),
            p90: quantile_sorted(&sample, F::from_f64_lossy(0.90)),
            n_days: days.len() as u32,
        });
    }

    Ok(StationSignature {
        station_id: station.to_string(),
        day_type,
        direction,
        bin_width: config.bin_width,
        bins: signature_bins,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventRidershipEstimate<F> {
    pub station_id: StationId,
    /// Exceedance span as inclusive bin indexes; `None` when the event day
    /// never rises above the baseline band.
    pub span: Option<(usize, usize)>,
    /// Above-baseline riders per bin over the span (empty when no span).
    pub above_baseline: Vec<F>,
    pub total: F,
    pub upper_bound: F,
}

impl<F: Scalar> EventRidershipEstimate<F> {
    pub fn has_exceedance(&self) -> bool {
        self.span.is_some()
    }
}

/// Isolate event ridership above the baseline band.
///
/// A bin counts toward the event exactly when the day's ridership strictly
/// exceeds the baseline's 90th percentile; in those bins the contribution is
/// the excess over the baseline mean, clamped at zero. The upper bound sums
/// raw ridership over the span padded by two bins wherever the day exceeds
/// the baseline mean.
pub fn estimate_event_ridership<F: Scalar>(
    signature: &StationSignature<F>,
    event_day_counts: &[u32],
) -> Result<EventRidershipEstimate<F>, SignatureError> {
    let bins = signature.bins.len();
    if event_day_counts.len() != bins {
        return Err(SignatureError::BinMismatch { expected: bins, got: event_day_counts.len() });
    }

    let exceeds: Vec<bool> = (0..bins)
        .map(|t| F::from_u32(event_day_counts[t]).unwrap() > signature.bins[t].p90)
        .collect();
    let t_start = exceeds.iter().position(|&e| e);
    let Some(t_start) = t_start else {
        return Ok(EventRidershipEstimate {
            station_id: signature.station_id.clone(),
            span: None,
            above_baseline: Vec::new(),
            total: F::zero(),
            upper_bound: F::zero(),
        });
    };
    let t_end = exceeds.iter().rposition(|&e| e).expect("nonempty exceedance");

    let mut above_baseline = Vec::with_capacity(t_end - t_start + 1);
    let mut total = F::zero();
    for t in t_start..=t_end {
        let r = if exceeds[t] {
            let diff = F::from_u32(event_day_counts[t]).unwrap() - signature.bins[t].mean;
            diff.max(F::zero())
        } else {
            F::zero()
        };
        total += r;
        above_baseline.push(r);
    }

    let pad = 2;
    let lo = t_start.saturating_sub(pad);
    let hi = (t_end + pad).min(bins - 1);
    let mut upper_bound = F::zero();
    for t in lo..=hi {
        let r_e = F::from_u32(event_day_counts[t]).unwrap();
        if r_e > signature.bins[t].mean {
            upper_bound += r_e;
        }
    }

    Ok(EventRidershipEstimate {
        station_id: signature.station_id.clone(),
        span: Some((t_start, t_end)),
        above_baseline,
        total,
        upper_bound,
    })
}

pub const THROUGHPUT_BIN_WIDTH: Seconds = 300;
/// Window relative to the adjusted event end: 40 minutes before to 80 after.
pub const THROUGHPUT_WINDOW: (Seconds, Seconds) = (-2400, 4800);
pub const THROUGHPUT_BINS: usize =
    ((THROUGHPUT_WINDOW.1 - THROUGHPUT_WINDOW.0) / THROUGHPUT_BIN_WIDTH) as usize;

/// One game's station arrivals plus its adjusted end time
/// (scheduled start + average game length + offset).
#[derive(Debug, Clone)]
pub struct GameArrivals {
    pub label: String,
    pub arrivals: Vec<Seconds>,
    pub adjusted_end: Seconds,
}

/// Average game length after the scheduled start, in seconds.
pub fn average_game_length(category: &str) -> Option<Seconds> {
    let c = category.to_ascii_lowercase();
    if c.contains("soccer") {
        Some(110 * 60) // 1h50m
    } else if c.contains("football") {
        Some(190 * 60) // 3h10m
    } else {
        None
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThroughputCurve<F> {
    pub bin_width: Seconds,
    pub window_start: Seconds,
    pub per_game: BTreeMap<String, Vec<u32>>,
    pub mean: Vec<F>,
    pub percent: Vec<F>,
}

/// Bin each game's arrivals relative to its adjusted end, average across
/// games, and normalize the mean to percentages.
pub fn throughput_curve<F: Scalar>(games: &[GameArrivals]) -> Result<ThroughputCurve<F>, SignatureError> {
    if games.is_empty() {
        return Err(SignatureError::EmptyGameList);
    }
    let mut per_game = BTreeMap::new();
    for game in games {
        let mut counts = vec![0u32; THROUGHPUT_BINS];
        for &arrival in &game.arrivals {
            let rel = arrival - game.adjusted_end;
            if rel < THROUGHPUT_WINDOW.0 || rel >= THROUGHPUT_WINDOW.1 {
                continue;
            }
            counts[((rel - THROUGHPUT_WINDOW.0) / THROUGHPUT_BIN_WIDTH) as usize] += 1;
        }
        per_game.insert(game.label.clone(), counts);
    }

    let n = F::from_usize_lossy(per_game.len());
    let mean: Vec<F> = (0..THROUGHPUT_BINS)
        .map(|b| {
            per_game.values().map(|c| F::from_u32(c[b]).unwrap()).sum::<F>() / n
        })
        .collect();
    let total: F = mean.iter().copied().sum();
    let percent = if total > F::zero() {
        mean.iter().map(|&m| m / total).collect()
    } else {
        vec![F::zero(); THROUGHPUT_BINS]
    };

    Ok(ThroughputCurve {
        bin_width: THROUGHPUT_BIN_WIDTH,
        window_start: THROUGHPUT_WINDOW.0,
        per_game,
        mean,
        percent,
    })
}

/// Signature rows as plot-ready CSV: one row per bin.
pub fn write_signature_csv<F: Scalar, W: Write>(
    writer: W,
    signature: &StationSignature<F>,
) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["bin", "bin_start_seconds", "mean", "p10", "p90", "n_days"])?;
    let day_start = 3 * 3600;
    for (i, bin) in signature.bins.iter().enumerate() {
        wtr.write_record([
            i.to_string(),
            (day_start + i as Seconds * signature.bin_width).to_string(),
            format!("{}", bin.mean),
            format!("{}", bin.p10),
            format!("{}", bin.p90),
            bin.n_days.to_string(),
        ])?;
    }
    wtr.flush()
}

pub fn write_estimate_csv<F: Scalar, W: Write>(
    writer: W,
    estimate: &EventRidershipEstimate<F>,
) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["bin", "above_baseline"])?;
    if let Some((start, _)) = estimate.span {
        for (off, v) in estimate.above_baseline.iter().enumerate() {
            wtr.write_record([(start + off).to_string(), format!("{v}")])?;
        }
    }
    wtr.flush()
}

pub fn write_throughput_csv<F: Scalar, W: Write>(
    writer: W,
    curve: &ThroughputCurve<F>,
) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["bin_start_offset_seconds", "mean", "percent"])?;
    for i in 0..curve.mean.len() {
        wtr.write_record([
            (curve.window_start + i as Seconds * curve.bin_width).to_string(),
            format!("{}", curve.mean[i]),
            format!("{}", curve.percent[i]),
        ])?;
    }
    wtr.flush()
}
