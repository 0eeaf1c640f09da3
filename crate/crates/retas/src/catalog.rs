//! Earthquake catalog data model, CSV ingestion, validation and windowing.
//!
//! A catalog is an ordered list of events `(t, x, y, m)` observed on
//! `[0, T] x S` above a threshold magnitude `m0`. Times are days since the
//! catalog origin. The likelihood recursions require strictly increasing
//! event times, so tied times are broken by nudging the k-th duplicate
//! forward by `k * 1e-9` days (reported, never silent).

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("missing column {0:?} in header")]
    MissingColumn(String),
    #[error("catalog empty after filtering (dropped {dropped})")]
    EmptyAfterFilter { dropped: usize },
    #[error("invalid catalog: {0}")]
    Invalid(String),
}

/// A single earthquake: occurrence time in days, planar coordinates, magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub m: f64,
}

/// Spatial observation region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpatialWindow {
    WholePlane,
    Rectangle { x_min: f64, x_max: f64, y_min: f64, y_max: f64 },
}

impl SpatialWindow {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            SpatialWindow::WholePlane => true,
            SpatialWindow::Rectangle { x_min, x_max, y_min, y_max } => {
                x >= *x_min && x <= *x_max && y >= *y_min && y <= *y_max
            }
        }
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        if let SpatialWindow::Rectangle { x_min, x_max, y_min, y_max } = self {
            if !(x_min < x_max && y_min < y_max) {
                return Err(CatalogError::Invalid(format!(
                    "rectangle needs x_min < x_max and y_min < y_max, got [{x_min}, {x_max}] x [{y_min}, {y_max}]"
                )));
            }
        }
        Ok(())
    }
}

/// An ordered, validated earthquake catalog.
///
/// Immutable after construction; safe to share read-only across workers.
#[derive(Debug, Clone)]
pub struct Catalog {
    pub events: Vec<Event>,
    /// Censoring time T in days; every event time is <= T.
    pub t_end: f64,
    /// Threshold magnitude; every event magnitude is >= m0.
    pub m0: f64,
    pub window: SpatialWindow,
    /// Calendar origin of the day axis, when known (reporting only).
    pub origin: Option<NaiveDateTime>,
}

impl Catalog {
    /// Construct from pre-sorted events, checking every invariant.
    pub fn new(
        events: Vec<Event>,
        t_end: f64,
        m0: f64,
        window: SpatialWindow,
    ) -> Result<Catalog, CatalogError> {
        let catalog = Catalog { events, t_end, m0, window, origin: None };
        let report = validate(&catalog);
        if let Some(first) = report.violations.first() {
            return Err(CatalogError::Invalid(first.clone()));
        }
        Ok(catalog)
    }

    pub fn n(&self) -> usize {
        self.events.len()
    }
}

/// Column names for CSV ingestion; defaults to `time,x,y,magnitude`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub time: String,
    pub x: String,
    pub y: String,
    pub magnitude: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            time: "time".into(),
            x: "x".into(),
            y: "y".into(),
            magnitude: "magnitude".into(),
        }
    }
}

/// Ingestion options: threshold, window, optional calendar origin and
/// explicit censoring time.
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub columns: ColumnMap,
    pub m0: f64,
    pub window: SpatialWindow,
    /// Calendar origin for datetime inputs; defaults to the first event.
    pub origin: Option<NaiveDateTime>,
    /// Censoring time in days since origin; defaults to the last event time.
    pub t_end: Option<f64>,
}

impl LoadOptions {
    pub fn new(m0: f64, window: SpatialWindow) -> LoadOptions {
        LoadOptions { columns: ColumnMap::default(), m0, window, origin: None, t_end: None }
    }
}

/// A loaded catalog together with ingestion diagnostics.
#[derive(Debug, Clone)]
pub struct LoadedCatalog {
    pub catalog: Catalog,
    /// Events dropped for magnitude below m0, location outside the window,
    /// or time past the censoring time.
    pub dropped: usize,
    /// Input rows were not sorted by time; the loader sorted them.
    pub sort_warning: bool,
    /// Number of events nudged forward to break exact time ties.
    pub ties_broken: usize,
}

fn parse_time_cell(cell: &str, row: usize) -> Result<TimeCell, CatalogError> {
    if let Ok(days) = cell.parse::<f64>() {
        if !days.is_finite() {
            return Err(CatalogError::Row { row, message: format!("non-finite time {cell:?}") });
        }
        return Ok(TimeCell::Days(days));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(cell, fmt) {
            return Ok(TimeCell::Stamp(dt));
        }
    }
    if let Ok(d) = chrono::NaiveDate::parse_from_str(cell, "%Y-%m-%d") {
        return Ok(TimeCell::Stamp(d.and_hms_opt(0, 0, 0).expect("midnight")));
    }
    Err(CatalogError::Row { row, message: format!("unparsable time {cell:?}") })
}

enum TimeCell {
    Days(f64),
    Stamp(NaiveDateTime),
}

const SECONDS_PER_DAY: f64 = 86_400.0;

fn days_since(origin: NaiveDateTime, stamp: NaiveDateTime) -> f64 {
    let delta = stamp.signed_duration_since(origin);
    delta.num_seconds() as f64 / SECONDS_PER_DAY
        + f64::from(delta.subsec_nanos()) * 1e-9 / SECONDS_PER_DAY
}

/// Load and validate a catalog from a headered CSV file.
///
/// The time column accepts either float days or ISO-8601 timestamps.
/// Sub-threshold and out-of-window rows are dropped (counted), unsorted
/// input is sorted with a warning flag, and tied times are perturbed.
pub fn load_catalog(path: &Path, options: &LoadOptions) -> Result<LoadedCatalog, CatalogError> {
    let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_catalog_str(&text, options)
}

/// As [`load_catalog`], from an in-memory CSV document.
pub fn load_catalog_str(text: &str, options: &LoadOptions) -> Result<LoadedCatalog, CatalogError> {
    options.window.validate()?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CatalogError::Row { row: 1, message: "empty file".into() })?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let col = |wanted: &str| -> Result<usize, CatalogError> {
        names
            .iter()
            .position(|n| n.eq_ignore_ascii_case(wanted))
            .ok_or_else(|| CatalogError::MissingColumn(wanted.to_string()))
    };
    let c_time = col(&options.columns.time)?;
    let c_x = col(&options.columns.x)?;
    let c_y = col(&options.columns.y)?;
    let c_m = col(&options.columns.magnitude)?;

    let mut stamps: Vec<(TimeCell, f64, f64, f64)> = Vec::new();
    for (idx, line) in lines {
        let row = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let need = c_time.max(c_x).max(c_y).max(c_m);
        if cells.len() <= need {
            return Err(CatalogError::Row { row, message: format!("expected at least {} columns", need + 1) });
        }
        let parse_f = |i: usize, what: &str| -> Result<f64, CatalogError> {
            cells[i].parse::<f64>().map_err(|_| CatalogError::Row {
                row,
                message: format!("unparsable {what} {:?}", cells[i]),
            })
        };
        let time = parse_time_cell(cells[c_time], row)?;
        let x = parse_f(c_x, "x")?;
        let y = parse_f(c_y, "y")?;
        let m = parse_f(c_m, "magnitude")?;
        stamps.push((time, x, y, m));
    }

    // Resolve the day axis: explicit origin, else the first timestamped row.
    let origin = options.origin.or_else(|| {
        stamps.iter().find_map(|(t, ..)| match t {
            TimeCell::Stamp(dt) => Some(*dt),
            TimeCell::Days(_) => None,
        })
    });
    let mut raw: Vec<Event> = Vec::with_capacity(stamps.len());
    for (i, (time, x, y, m)) in stamps.into_iter().enumerate() {
        let t = match time {
            TimeCell::Days(d) => d,
            TimeCell::Stamp(dt) => days_since(
                origin.expect("origin exists when any row is a timestamp"),
                dt,
            ),
        };
        if !t.is_finite() || t < 0.0 {
            return Err(CatalogError::Row { row: i + 2, message: format!("time {t} outside [0, inf)") });
        }
        raw.push(Event { t, x, y, m });
    }

    let total = raw.len();
    let mut events: Vec<Event> = raw
        .into_iter()
        .filter(|e| e.m >= options.m0 && options.window.contains(e.x, e.y))
        .collect();
    let sort_warning = events.windows(2).any(|w| w[1].t < w[0].t);
    if sort_warning {
        events.sort_by(|a, b| a.t.total_cmp(&b.t));
    }
    let mut ties_broken = 0;
    for i in 1..events.len() {
        if events[i].t <= events[i - 1].t {
            events[i].t = events[i - 1].t + 1e-9;
            ties_broken += 1;
        }
    }
    let t_end = options.t_end.unwrap_or_else(|| events.last().map_or(0.0, |e| e.t));
    let before_censor = events.len();
    events.retain(|e| e.t <= t_end);
    let dropped = total - events.len();
    let _ = before_censor;
    if events.is_empty() {
        return Err(CatalogError::EmptyAfterFilter { dropped });
    }

    let catalog = Catalog { events, t_end, m0: options.m0, window: options.window, origin };
    let report = validate(&catalog);
    if let Some(first) = report.violations.first() {
        return Err(CatalogError::Invalid(first.clone()));
    }
    Ok(LoadedCatalog { catalog, dropped, sort_warning, ties_broken })
}

/// Serialize a catalog to the ingestion CSV schema, floats at 17
/// significant digits so a reload is bit-identical.
pub fn save_catalog(catalog: &Catalog, path: &Path) -> Result<(), CatalogError> {
    let mut out = String::from("time,x,y,magnitude\n");
    for e in &catalog.events {
        let _ = writeln!(out, "{},{},{},{}", fmt_g17(e.t), fmt_g17(e.x), fmt_g17(e.y), fmt_g17(e.m));
    }
    std::fs::write(path, out).map_err(|source| CatalogError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Format with 17 significant digits (round-trips any f64 exactly).
pub fn fmt_g17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Invariant-violation report; `violations` is empty for a valid catalog.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check every catalog invariant without mutating; returns all violations.
pub fn validate(catalog: &Catalog) -> ValidationReport {
    let mut violations = Vec::new();
    if catalog.window.validate().is_err() {
        violations.push("window: rectangle bounds are not ordered".to_string());
    }
    for (i, e) in catalog.events.iter().enumerate() {
        if !e.t.is_finite() || e.t < 0.0 {
            violations.push(format!("event {i}: time {} not finite and >= 0", e.t));
        }
        if e.t > catalog.t_end {
            violations.push(format!("event {i}: time {} exceeds censoring time {}", e.t, catalog.t_end));
        }
        if e.m < catalog.m0 {
            violations.push(format!("event {i}: magnitude {} below threshold {}", e.m, catalog.m0));
        }
        if !catalog.window.contains(e.x, e.y) {
            violations.push(format!("event {i}: location ({}, {}) outside window", e.x, e.y));
        }
        if i > 0 && e.t <= catalog.events[i - 1].t {
            violations.push(format!("event {i}: time {} not strictly after predecessor", e.t));
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
pub(crate) fn test_catalog(rows: &[(f64, f64, f64, f64)], t_end: f64, m0: f64) -> Catalog {
    let events = rows.iter().map(|&(t, x, y, m)| Event { t, x, y, m }).collect();
    Catalog::new(events, t_end, m0, SpatialWindow::WholePlane).expect("valid test catalog")
}
