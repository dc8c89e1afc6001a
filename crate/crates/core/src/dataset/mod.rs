//! Monthly precipitation series: ingestion, cleaning, splitting, windowing
//! and descriptive statistics.

mod stats;
mod windows;

pub use stats::{monthly_boxplot_stats, tukey_quartiles, yearly_trend_table, MonthStats, MonthlyStats, TrendTable};
pub use windows::{make_windows, make_windows_with, shuffle_windows, GapPolicy, Window, WindowedDataset};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{PluviaError, Result};
use crate::rng::Rng;

/// Marker used by the source data for a missing observation.
pub const MISSING_SENTINEL: f64 = -99.0;

pub const MONTH_ABBREVIATIONS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonthlyPoint {
    pub year: i32,
    /// 1 = January.
    pub month: u8,
    pub precip_mm: f64,
}

impl MonthlyPoint {
    /// Months since year 0; consecutive months differ by exactly one.
    pub fn ordinal(&self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MonthlySeries {
    pub points: Vec<MonthlyPoint>,
    pub provenance: String,
    /// Positions (in the series handed to [`clean_missing`]) that were dropped.
    pub gap_indices: Vec<usize>,
    pub warnings: Vec<String>,
}

impl MonthlySeries {
    pub fn from_points(points: Vec<MonthlyPoint>, provenance: impl Into<String>) -> Self {
        MonthlySeries {
            points,
            provenance: provenance.into(),
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.precip_mm).collect()
    }

    /// Largest observation, the default output scale. Falls back to 1 when
    /// the series is empty or entirely dry.
    pub fn max_precip(&self) -> f64 {
        let max = self.points.iter().map(|p| p.precip_mm).fold(0.0, f64::max);
        if max > 0.0 {
            max
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesFormat {
    /// `Year,Jan,...,Dec`, one row per year.
    Wide,
    /// `year,month,precip_mm`, one row per month.
    Long,
}

impl FromStr for SeriesFormat {
    type Err = PluviaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wide" => Ok(SeriesFormat::Wide),
            "long" => Ok(SeriesFormat::Long),
            other => Err(PluviaError::Parameter(format!("unknown format {other:?} (wide|long)"))),
        }
    }
}

impl fmt::Display for SeriesFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeriesFormat::Wide => "wide",
            SeriesFormat::Long => "long",
        })
    }
}

fn parse_value(field: &str, line: u64) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| PluviaError::Parse {
        line,
        message: format!("not a number: {field:?}"),
    })?;
    if !v.is_finite() {
        return Err(PluviaError::Parse {
            line,
            message: format!("non-finite value {field:?}"),
        });
    }
    if v < 0.0 && v != MISSING_SENTINEL {
        return Err(PluviaError::Validation(format!(
            "line {line}: negative precipitation {v}"
        )));
    }
    Ok(v)
}

fn parse_int<T: FromStr>(field: &str, what: &str, line: u64) -> Result<T> {
    field.parse().map_err(|_| PluviaError::Parse {
        line,
        message: format!("bad {what}: {field:?}"),
    })
}

/// Read a CSV in either layout. Missing-value sentinels are kept; see
/// [`clean_missing`]. Rows out of chronological order are sorted and a
/// warning is recorded.
pub fn parse_series(text: &str, format: SeriesFormat, provenance: &str) -> Result<MonthlySeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());

    let header: Vec<String> = reader
        .headers()
        .map_err(|e| PluviaError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    let expected: Vec<String> = match format {
        SeriesFormat::Long => ["year", "month", "precip_mm"].iter().map(|s| s.to_string()).collect(),
        SeriesFormat::Wide => std::iter::once("year".to_string())
            .chain(MONTH_ABBREVIATIONS.iter().map(|m| m.to_ascii_lowercase()))
            .collect(),
    };
    if header != expected {
        return Err(PluviaError::Parse {
            line: 1,
            message: format!("expected {format} header {expected:?}, found {header:?}"),
        });
    }

    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| PluviaError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if record.len() != expected.len() {
            return Err(PluviaError::Parse {
                line,
                message: format!("expected {} fields, found {}", expected.len(), record.len()),
            });
        }
        let year: i32 = parse_int(&record[0], "year", line)?;
        match format {
            SeriesFormat::Long => {
                let month: u8 = parse_int(&record[1], "month", line)?;
                if !(1..=12).contains(&month) {
                    return Err(PluviaError::Validation(format!(
                        "line {line}: month {month} outside 1-12"
                    )));
                }
                points.push(MonthlyPoint {
                    year,
                    month,
                    precip_mm: parse_value(&record[2], line)?,
                });
            }
            SeriesFormat::Wide => {
                for m in 0..12 {
                    points.push(MonthlyPoint {
                        year,
                        month: m as u8 + 1,
                        precip_mm: parse_value(&record[m + 1], line)?,
                    });
                }
            }
        }
    }
    if points.is_empty() {
        return Err(PluviaError::Parse {
            line: 1,
            message: "no data rows".into(),
        });
    }

    let mut warnings = Vec::new();
    if points.windows(2).any(|w| w[0].ordinal() > w[1].ordinal()) {
        points.sort_by_key(MonthlyPoint::ordinal);
        warnings.push("rows were not in chronological order and have been sorted".to_string());
    }
    if let Some(w) = points.windows(2).find(|w| w[0].ordinal() == w[1].ordinal()) {
        return Err(PluviaError::Validation(format!(
            "duplicate observation for {}-{:02}",
            w[0].year, w[0].month
        )));
    }
    Ok(MonthlySeries {
        points,
        provenance: provenance.to_string(),
        gap_indices: Vec::new(),
        warnings,
    })
}

/// Drop sentinel observations, recording where they were. The remaining
/// points are treated as a contiguous series downstream.
pub fn clean_missing(series: &MonthlySeries) -> MonthlySeries {
    let mut out = MonthlySeries {
        points: Vec::with_capacity(series.len()),
        provenance: series.provenance.clone(),
        gap_indices: series.gap_indices.clone(),
        warnings: series.warnings.clone(),
    };
    let mut removed = Vec::new();
    for (i, p) in series.points.iter().enumerate() {
        if p.precip_mm == MISSING_SENTINEL {
            removed.push(i);
        } else {
            out.points.push(*p);
        }
    }
    if !removed.is_empty() {
        out.gap_indices = removed;
    }
    out
}

/// Number of leading points assigned to training: `floor(fraction * n)`.
pub fn split_index(n: usize, train_fraction: f64) -> Result<usize> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(PluviaError::Parameter(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    // The nudge keeps products such as 0.29 * 100 from flooring to 28.
    Ok(((train_fraction * n as f64) + 1e-9).floor() as usize)
}

/// First `floor(fraction * n)` points train, the rest test. No shuffling.
pub fn chronological_split(series: &MonthlySeries, train_fraction: f64) -> Result<(MonthlySeries, MonthlySeries)> {
    let k = split_index(series.len(), train_fraction)?;
    let part = |points: &[MonthlyPoint]| MonthlySeries {
        points: points.to_vec(),
        provenance: series.provenance.clone(),
        gap_indices: Vec::new(),
        warnings: Vec::new(),
    };
    Ok((part(&series.points[..k]), part(&series.points[k..])))
}

/// Seasonal test signal `base + amplitude * sin(2π m / 12) + noise`, where
/// `m` counts months from January of `start_year` and the noise is Gaussian
/// with standard deviation `noise_sigma`. Values are clamped at zero.
pub fn synthetic_seasonal_series(
    start_year: i32,
    months: usize,
    base: f64,
    amplitude: f64,
    noise_sigma: f64,
    seed: u64,
) -> MonthlySeries {
    let mut rng = Rng::new(seed);
    let points = (0..months)
        .map(|m| {
            let clean = base + amplitude * (2.0 * std::f64::consts::PI * m as f64 / 12.0).sin();
            MonthlyPoint {
                year: start_year + (m / 12) as i32,
                month: (m % 12) as u8 + 1,
                precip_mm: (clean + noise_sigma * rng.normal()).max(0.0),
            }
        })
        .collect();
    MonthlySeries::from_points(points, format!("synthetic(seed={seed})"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn long_minimal() {
        let s = parse_series("year,month,precip_mm\n1972,1,3.1\n1972,2,0.0\n", SeriesFormat::Long, "t").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s.points[0].month, s.points[0].precip_mm), (1, 3.1));
        assert_eq!((s.points[1].month, s.points[1].precip_mm), (2, 0.0));
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn wide_row_maps_to_months() {
        let text = "Year,Jan,Feb,Mar,Apr,May,Jun,Jul,Aug,Sep,Oct,Nov,Dec\n\
                    1972,3.1,0.0,1,2,3,4,5,6,7,8,9,10\n";
        let s = parse_series(text, SeriesFormat::Wide, "t").unwrap();
        assert_eq!(s.len(), 12);
        assert!(s.points.iter().enumerate().all(|(i, p)| p.year == 1972 && p.month as usize == i + 1));
        assert_eq!(s.points[0].precip_mm, 3.1);
        assert_eq!(s.points[11].precip_mm, 10.0);
    }

    #[test]
    fn out_of_order_sorted_with_warning() {
        let s = parse_series(
            "year,month,precip_mm\n1973,1,5\n1972,12,4\n1972,11,3\n",
            SeriesFormat::Long,
            "t",
        )
        .unwrap();
        let mut expected = s.points.clone();
        expected.sort_by_key(|p| (p.year, p.month));
        assert_eq!(s.points, expected);
        assert_eq!(s.values(), vec![3.0, 4.0, 5.0]);
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = parse_series("year,month,precip_mm\n1972,1,3\n1972,2,abc\n", SeriesFormat::Long, "t").unwrap_err();
        assert_eq!(
            err,
            PluviaError::Parse {
                line: 3,
                message: "not a number: \"abc\"".into()
            }
        );
    }

    #[test]
    fn month_out_of_range() {
        let err = parse_series("year,month,precip_mm\n1972,13,3\n", SeriesFormat::Long, "t").unwrap_err();
        assert!(matches!(err, PluviaError::Validation(_)));
    }

    #[test]
    fn header_and_empty_input() {
        assert!(matches!(
            parse_series("", SeriesFormat::Long, "t"),
            Err(PluviaError::Parse { line: 1, .. })
        ));
        assert!(parse_series("a,b,c\n1,2,3\n", SeriesFormat::Long, "t").is_err());
        assert!(parse_series("year,month,precip_mm\n", SeriesFormat::Long, "t").is_err());
    }

    #[test]
    fn duplicate_month_rejected() {
        let err = parse_series("year,month,precip_mm\n1972,1,3\n1972,1,4\n", SeriesFormat::Long, "t").unwrap_err();
        assert!(matches!(err, PluviaError::Validation(_)));
    }

    #[test]
    fn negative_non_sentinel_rejected() {
        assert!(parse_series("year,month,precip_mm\n1972,1,-3\n", SeriesFormat::Long, "t").is_err());
        let s = parse_series("year,month,precip_mm\n1972,1,-99.0\n1972,2,-99\n", SeriesFormat::Long, "t").unwrap();
        assert_eq!(s.values(), vec![-99.0, -99.0]);
    }

    fn series(values: &[f64]) -> MonthlySeries {
        let points = values
            .iter()
            .enumerate()
            .map(|(i, &v)| MonthlyPoint {
                year: 1972 + (i / 12) as i32,
                month: (i % 12) as u8 + 1,
                precip_mm: v,
            })
            .collect();
        MonthlySeries::from_points(points, "t")
    }

    #[test]
    fn clean_examples() {
        let c = clean_missing(&series(&[10.0, -99.0, 20.0]));
        assert_eq!(c.values(), vec![10.0, 20.0]);
        assert_eq!(c.gap_indices, vec![1]);

        let s = series(&[1.0, 2.0]);
        let c = clean_missing(&s);
        assert_eq!(c.points, s.points);
        assert!(c.gap_indices.is_empty());

        let c = clean_missing(&series(&[-99.0, -99.0]));
        assert!(c.is_empty());
        assert_eq!(make_windows(&c, 1, 1.0).unwrap().len(), 0);
    }

    #[test]
    fn clean_is_idempotent() {
        let once = clean_missing(&series(&[3.0, -99.0, -99.0, 4.0, -99.0]));
        assert_eq!(clean_missing(&once), once);
    }

    #[test]
    fn split_counts() {
        let (a, b) = chronological_split(&series(&[0.0; 10]), 0.8).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        let (a, b) = chronological_split(&series(&[0.0; 372]), 0.8).unwrap();
        assert_eq!((a.len(), b.len()), (297, 75));
        assert_eq!(split_index(100, 0.29).unwrap(), 29);
        assert!(chronological_split(&series(&[0.0; 3]), 1.0).is_err());
        assert!(chronological_split(&series(&[0.0; 3]), 0.0).is_err());
    }

    #[test]
    fn synthetic_is_seeded() {
        let a = synthetic_seasonal_series(1950, 24, 200.0, 180.0, 10.0, 5);
        let b = synthetic_seasonal_series(1950, 24, 200.0, 180.0, 10.0, 5);
        assert_eq!(a, b);
        assert_eq!(a.points[13].year, 1951);
        assert!(a.points.iter().all(|p| p.precip_mm >= 0.0));
    }
}
