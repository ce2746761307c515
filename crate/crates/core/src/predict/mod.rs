//! Event-day feature assembly and ridership prediction models: linear
//! regression, random forest, and the combined model where a forest predicts
//! the linear model's residual.

mod forest;
mod linear;

pub use forest::{
    fit_forest, group_importance, importance_ranking, permutation_importance, ForestModel,
    ForestParams, Tree,
};
pub use linear::{fit_linear, residuals, LinearError, LinearModel};

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{date_of, midnight, EventRecord, Seconds};
use crate::num::Scalar;

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("no sporting event on {0}")]
    NoSportingEvent(NaiveDate),
    #[error("no ridership target for {0}")]
    MissingTarget(NaiveDate),
    #[error("need at least {need} rows, got {got}")]
    TooFewRows { got: usize, need: usize },
    #[error(transparent)]
    Linear(#[from] LinearError),
}

pub const NO_SECOND_CATEGORY: &str = "NONE";
pub const NO_SECOND_LOCATION: &str = "No Location";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub date: NaiveDate,
    pub category: String,
    pub location: String,
    /// True attendance when known, else the catalog estimate.
    pub attendance: f64,
    pub wpdiff: f64,
    pub regularized_margin: f64,
    pub category2: String,
    pub location2: String,
    pub attendance2: f64,
    pub time_difference_min: f64,
    pub two_event: bool,
    pub week: bool,
    pub month: u32,
    pub target_post_event: f64,
    pub target_whole_day: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    PostEvent,
    WholeDay,
}

impl FeatureRow {
    pub fn target(&self, target: Target) -> f64 {
        match target {
            Target::PostEvent => self.target_post_event,
            Target::WholeDay => self.target_whole_day,
        }
    }
}

pub fn is_sporting(category: &str) -> bool {
    let c = category.to_ascii_lowercase();
    c.contains("basketball") || c.contains("soccer") || c.contains("football")
}

/// Post-event evaluation window in minutes after the event start, per
/// category: basketball 75-195, football 30-420, soccer 60-300.
pub fn post_event_window_minutes(category: &str) -> Option<(i64, i64)> {
    let c = category.to_ascii_lowercase();
    if c.contains("basketball") {
        Some((75, 195))
    } else if c.contains("football") {
        Some((30, 420))
    } else if c.contains("soccer") {
        Some((60, 300))
    } else {
        None
    }
}

/// Per-day ridership targets joined into the feature rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayTargets {
    pub post_event: f64,
    pub whole_day: f64,
}

/// Assemble one feature row per event day.
///
/// The sporting event is Event 1 (the later start when two sporting events
/// share the day); the largest remaining event, if any, is Event 2 with its
/// fields at their null encodings otherwise.
pub fn build_feature_rows(
    events_by_day: &BTreeMap<NaiveDate, Vec<EventRecord>>,
    targets: &BTreeMap<NaiveDate, DayTargets>,
) -> Result<Vec<FeatureRow>, PredictError> {
    let mut rows = Vec::new();
    for (&date, events) in events_by_day {
        let mut sporting: Vec<&EventRecord> = events.iter().filter(|e| is_sporting(&e.category)).collect();
        if sporting.is_empty() {
            return Err(PredictError::NoSportingEvent(date));
        }
        sporting.sort_by_key(|e| e.begin);
        let event1 = *sporting.last().expect("nonempty");

        let mut others: Vec<&EventRecord> = events
            .iter()
            .filter(|e| !std::ptr::eq(*e, event1))
            .collect();
        others.sort_by(|a, b| b.attendance.cmp(&a.attendance).then(a.begin.cmp(&b.begin)));
        let event2 = others.first().copied();

        let day_targets = targets.get(&date).ok_or(PredictError::MissingTarget(date))?;

        let attendance = event1.true_attendance.unwrap_or(event1.attendance) as f64;
        let (category2, location2, attendance2, time_difference_min) = match event2 {
            Some(e2) => (
                e2.category.clone(),
                e2.location.clone(),
                e2.attendance as f64,
                ((event1.begin - e2.begin).abs() / 60) as f64,
            ),
            None => (NO_SECOND_CATEGORY.to_string(), NO_SECOND_LOCATION.to_string(), 0.0, 0.0),
        };

        rows.push(FeatureRow {
            date,
            category: event1.category.clone(),
            location: event1.location.clone(),
            attendance,
            wpdiff: event1.wpdiff.unwrap_or(0.0),
            regularized_margin: event1.regularized_margin.unwrap_or(0.0),
            category2,
            location2,
            attendance2,
            time_difference_min,
            two_event: event2.is_some(),
            week: matches!(date.weekday(), Weekday::Sat | Weekday::Sun),
            month: date.month(),
            target_post_event: day_targets.post_event,
            target_whole_day: day_targets.whole_day,
        });
    }
    Ok(rows)
}

/// Event begin time as a service-date key (events run within one civil day).
pub fn event_date(begin: Seconds) -> NaiveDate {
    date_of(begin)
}

/// Absolute post-event window for a sporting event, for target computation.
pub fn post_event_window_abs(event: &EventRecord) -> Option<(Seconds, Seconds)> {
    let (lo, hi) = post_event_window_minutes(&event.category)?;
    Some((event.begin + lo * 60, event.begin + hi * 60))
}

/// Whole service day window around an event (3AM to 3AM).
pub fn whole_day_window(event: &EventRecord) -> (Seconds, Seconds) {
    let day0 = midnight(event_date(event.begin)) + 3 * 3600;
    (day0, day0 + 86_400)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Feature {
    Attendance,
    Attendance2,
    TimeDifference,
    Wpdiff,
    RegularizedMargin,
    TwoEvent,
    Week,
    Category,
    Location,
    Category2,
    Location2,
    Month,
}

pub const ALL_FEATURES: [Feature; 12] = [
    Feature::Attendance,
    Feature::Attendance2,
    Feature::TimeDifference,
    Feature::Wpdiff,
    Feature::RegularizedMargin,
    Feature::TwoEvent,
    Feature::Week,
    Feature::Category,
    Feature::Location,
    Feature::Category2,
    Feature::Location2,
    Feature::Month,
];

impl Feature {
    pub fn is_categorical(&self) -> bool {
        matches!(
            self,
            Feature::Category | Feature::Location | Feature::Category2 | Feature::Location2 | Feature::Month
        )
    }

    fn numeric(&self, row: &FeatureRow) -> f64 {
        match self {
            Feature::Attendance => row.attendance,
            Feature::Attendance2 => row.attendance2,
            Feature::TimeDifference => row.time_difference_min,
            Feature::Wpdiff => row.wpdiff,
            Feature::RegularizedMargin => row.regularized_margin,
            Feature::TwoEvent => row.two_event as u8 as f64,
            Feature::Week => row.week as u8 as f64,
            _ => unreachable!("categorical feature"),
        }
    }

    fn categorical<'a>(&self, row: &'a FeatureRow) -> String {
        match self {
            Feature::Category => row.category.clone(),
            Feature::Location => row.location.clone(),
            Feature::Category2 => row.category2.clone(),
            Feature::Location2 => row.location2.clone(),
            Feature::Month => row.month.to_string(),
            _ => unreachable!("numeric feature"),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Feature::Attendance => "attendance",
            Feature::Attendance2 => "attendance2",
            Feature::TimeDifference => "time_difference",
            Feature::Wpdiff => "wpdiff",
            Feature::RegularizedMargin => "regularized_margin",
            Feature::TwoEvent => "two_event",
            Feature::Week => "week",
            Feature::Category => "category",
            Feature::Location => "location",
            Feature::Category2 => "category2",
            Feature::Location2 => "location2",
            Feature::Month => "month",
        }
    }
}

/// One-hot design-matrix encoder. Categorical levels are the values observed
/// at fit time, sorted; unseen levels at predict time encode as all zeros.
/// `drop_first` removes each categorical's first level so an intercepted
/// linear model stays full rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub features: Vec<Feature>,
    pub levels: BTreeMap<Feature, Vec<String>>,
    pub drop_first: bool,
    pub column_names: Vec<String>,
}

impl Encoder {
    pub fn fit(rows: &[FeatureRow], features: &[Feature], drop_first: bool) -> Encoder {
        let mut levels = BTreeMap::new();
        for &f in features.iter().filter(|f| f.is_categorical()) {
            let mut values: Vec<String> = rows.iter().map(|r| f.categorical(r)).collect();
            values.sort();
            values.dedup();
            levels.insert(f, values);
        }
        let mut column_names = Vec::new();
        for &f in features {
            if f.is_categorical() {
                let lv = &levels[&f];
                let start = usize::from(drop_first && !lv.is_empty());
                for v in &lv[start.min(lv.len())..] {
                    column_names.push(format!("{}={}", f.name(), v));
                }
            } else {
                column_names.push(f.name().to_string());
            }
        }
        Encoder { features: features.to_vec(), levels, drop_first, column_names }
    }

    pub fn encode_row<F: Scalar>(&self, row: &FeatureRow) -> Vec<F> {
        let mut out = Vec::with_capacity(self.column_names.len());
        for &f in &self.features {
            if f.is_categorical() {
                let lv = &self.levels[&f];
                let value = f.categorical(row);
                let start = usize::from(self.drop_first && !lv.is_empty());
                for v in &lv[start.min(lv.len())..] {
                    out.push(if *v == value { F::one() } else { F::zero() });
                }
            } else {
                out.push(F::from_f64_lossy(f.numeric(row)));
            }
        }
        out
    }

    pub fn encode<F: Scalar>(&self, rows: &[FeatureRow]) -> Vec<Vec<F>> {
        rows.iter().map(|r| self.encode_row(r)).collect()
    }
}

/// The combined model: a linear fit plus a forest on its residuals;
/// prediction is their sum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CombinedModel<F> {
    pub linear: LinearModel<F>,
    pub linear_encoder: Encoder,
    pub residual_forest: ForestModel<F>,
    pub forest_encoder: Encoder,
}

impl<F: Scalar> CombinedModel<F> {
    pub fn predict(&self, row: &FeatureRow) -> F {
        self.linear.predict(&self.linear_encoder.encode_row(row))
            + self.residual_forest.predict(&self.forest_encoder.encode_row(row))
    }
}

/// Fit the combined model: OLS on `linear_features`, then a forest on the
/// residuals over `forest_features`.
pub fn fit_lr_rf<F: Scalar>(
    rows: &[FeatureRow],
    target: Target,
    linear_features: &[Feature],
    forest_features: &[Feature],
    params: ForestParams,
) -> Result<CombinedModel<F>, PredictError> {
    let linear_encoder = Encoder::fit(rows, linear_features, true);
    let x_lin = linear_encoder.encode::<F>(rows);
    let y: Vec<F> = rows.iter().map(|r| F::from_f64_lossy(r.target(target))).collect();
    let linear = fit_linear(&x_lin, &y)?;
    let resid = residuals(&linear, &x_lin, &y);

    let forest_encoder = Encoder::fit(rows, forest_features, false);
    let x_forest = forest_encoder.encode::<F>(rows);
    let residual_forest = fit_forest(&x_forest, &resid, params);

    Ok(CombinedModel { linear, linear_encoder, residual_forest, forest_encoder })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    /// Baseline: predict the training mean.
    Mean,
    Linear { features: Vec<Feature> },
    Forest { features: Vec<Feature>, params: ForestParams },
    LrRf { linear_features: Vec<Feature>, forest_features: Vec<Feature>, params: ForestParams },
}

impl ModelSpec {
    /// Attendance-only LR, as printed in the model equation.
    pub fn simple_lr() -> ModelSpec {
        ModelSpec::Linear { features: vec![Feature::Attendance] }
    }

    pub fn default_rf(seed: u64) -> ModelSpec {
        ModelSpec::Forest {
            features: ALL_FEATURES.to_vec(),
            params: ForestParams { n_trees: 1500, seed, ..Default::default() },
        }
    }

    pub fn default_lr_rf(seed: u64) -> ModelSpec {
        ModelSpec::LrRf {
            linear_features: vec![Feature::Attendance],
            forest_features: ALL_FEATURES.to_vec(),
            params: ForestParams { n_trees: 800, seed, ..Default::default() },
        }
    }
}

pub enum FittedModel<F> {
    Mean(F),
    Linear { model: LinearModel<F>, encoder: Encoder },
    Forest { model: ForestModel<F>, encoder: Encoder },
    Combined(CombinedModel<F>),
}

impl<F: Scalar> FittedModel<F> {
    pub fn predict(&self, row: &FeatureRow) -> F {
        match self {
            FittedModel::Mean(m) => *m,
            FittedModel::Linear { model, encoder } => model.predict(&encoder.encode_row(row)),
            FittedModel::Forest { model, encoder } => model.predict(&encoder.encode_row(row)),
            FittedModel::Combined(c) => c.predict(row),
        }
    }
}

pub fn fit_model<F: Scalar>(
    rows: &[FeatureRow],
    target: Target,
    spec: &ModelSpec,
    seed: u64,
) -> Result<FittedModel<F>, PredictError> {
    match spec {
        ModelSpec::Mean => {
            let y: Vec<F> = rows.iter().map(|r| F::from_f64_lossy(r.target(target))).collect();
            if y.is_empty() {
                return Err(PredictError::TooFewRows { got: 0, need: 1 });
            }
            Ok(FittedModel::Mean(crate::stats::mean(&y)))
        }
        ModelSpec::Linear { features } => {
            let encoder = Encoder::fit(rows, features, true);
            let x = encoder.encode::<F>(rows);
            let y: Vec<F> = rows.iter().map(|r| F::from_f64_lossy(r.target(target))).collect();
            Ok(FittedModel::Linear { model: fit_linear(&x, &y)?, encoder })
        }
        ModelSpec::Forest { features, params } => {
            let encoder = Encoder::fit(rows, features, false);
            let x = encoder.encode::<F>(rows);
            let y: Vec<F> = rows.iter().map(|r| F::from_f64_lossy(r.target(target))).collect();
            let params = ForestParams { seed, ..*params };
            Ok(FittedModel::Forest { model: fit_forest(&x, &y, params), encoder })
        }
        ModelSpec::LrRf { linear_features, forest_features, params } => {
            let params = ForestParams { seed, ..*params };
            Ok(FittedModel::Combined(fit_lr_rf(rows, target, linear_features, forest_features, params)?))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport<F> {
    pub mae: F,
    /// Mean absolute percentage error over rows with nonzero targets.
    pub mape: F,
    pub mse: F,
    pub rmse: F,
    pub n: usize,
    pub zero_targets_excluded: usize,
    pub failed_folds: usize,
}

pub fn metrics<F: Scalar>(actual: &[F], predicted: &[F]) -> MetricsReport<F> {
    assert_eq!(actual.len(), predicted.len());
    let n = actual.len();
    let nf = F::from_usize_lossy(n.max(1));
    let mae = actual
        .iter()
        .zip(predicted)
        .map(|(&y, &p)| (y - p).abs())
        .sum::<F>()
        / nf;
    let mse = actual
        .iter()
        .zip(predicted)
        .map(|(&y, &p)| (y - p) * (y - p))
        .sum::<F>()
        / nf;

    let mut mape_sum = F::zero();
    let mut mape_n = 0usize;
    let mut excluded = 0usize;
    for (&y, &p) in actual.iter().zip(predicted) {
        if y == F::zero() {
            excluded += 1;
        } else {
            mape_sum += ((y - p) / y).abs();
            mape_n += 1;
        }
    }
    let mape = if mape_n == 0 { F::zero() } else { mape_sum / F::from_usize_lossy(mape_n) };

    MetricsReport {
        mae,
        mape,
        mse,
        rmse: mse.sqrt(),
        n,
        zero_targets_excluded: excluded,
        failed_folds: 0,
    }
}

/// Leave-one-out cross validation. Fold i trains on the other n-1 rows with
/// a seed derived from (base_seed, i); folds whose fit fails are excluded
/// and counted.
pub fn loocv<F: Scalar>(
    rows: &[FeatureRow],
    target: Target,
    spec: &ModelSpec,
    base_seed: u64,
) -> Result<MetricsReport<F>, PredictError> {
    if rows.len() < 3 {
        return Err(PredictError::TooFewRows { got: rows.len(), need: 3 });
    }
    let mut actual = Vec::with_capacity(rows.len());
    let mut predicted = Vec::with_capacity(rows.len());
    let mut failed = 0usize;
    for i in 0..rows.len() {
        let training: Vec<FeatureRow> = rows
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, r)| r.clone())
            .collect();
        let fold_seed = base_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64);
        match fit_model::<F>(&training, target, spec, fold_seed) {
            Ok(model) => {
                actual.push(F::from_f64_lossy(rows[i].target(target)));
                predicted.push(model.predict(&rows[i]));
            }
            Err(_) => failed += 1,
        }
    }
    let mut report = metrics(&actual, &predicted);
    report.failed_folds = failed;
    Ok(report)
}

pub fn write_feature_rows_csv<W: Write>(writer: W, rows: &[FeatureRow]) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "date",
        "category",
        "location",
        "attendance",
        "wpdiff",
        "regularized_margin",
        "category2",
        "location2",
        "attendance2",
        "time_difference_min",
        "two_event",
        "week",
        "month",
        "target_post_event",
        "target_whole_day",
    ])?;
    for r in rows {
        wtr.write_record([
            r.date.to_string(),
            r.category.clone(),
            r.location.clone(),
            format!("{}", r.attendance),
            format!("{}", r.wpdiff),
            format!("{}", r.regularized_margin),
            r.category2.clone(),
            r.location2.clone(),
            format!("{}", r.attendance2),
            format!("{}", r.time_difference_min),
            r.two_event.to_string(),
            r.week.to_string(),
            r.month.to_string(),
            format!("{}", r.target_post_event),
            format!("{}", r.target_whole_day),
        ])?;
    }
    wtr.flush()
}
