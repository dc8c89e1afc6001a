use std::fmt::Write as _;

use super::{MonthlySeries, MONTH_ABBREVIATIONS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonthStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub count: usize,
}

/// Five-number summaries by calendar month. Index 0 is January; months with
/// no observations are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyStats {
    pub months: [Option<MonthStats>; 12],
}

/// Quartiles by Tukey's hinges: the median splits the sorted sample, and for
/// odd `n` the median belongs to both halves. Each quartile is the median of
/// its half. `sorted` must be ascending and non-empty.
pub fn tukey_quartiles(sorted: &[f64]) -> (f64, f64, f64) {
    let n = sorted.len();
    assert!(n > 0, "quartiles of an empty sample");
    let lower = &sorted[..n.div_ceil(2)];
    let upper = &sorted[n / 2..];
    (median_sorted(lower), median_sorted(sorted), median_sorted(upper))
}

fn median_sorted(s: &[f64]) -> f64 {
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

pub fn monthly_boxplot_stats(series: &MonthlySeries) -> MonthlyStats {
    let mut buckets: [Vec<f64>; 12] = Default::default();
    for p in &series.points {
        buckets[p.month as usize - 1].push(p.precip_mm);
    }
    let months = buckets.map(|mut values| {
        if values.is_empty() {
            return None;
        }
        values.sort_by(f64::total_cmp);
        let (q1, median, q3) = tukey_quartiles(&values);
        Some(MonthStats {
            min: values[0],
            q1,
            median,
            q3,
            max: values[values.len() - 1],
            mean: values.iter().sum::<f64>() / values.len() as f64,
            count: values.len(),
        })
    });
    MonthlyStats { months }
}

impl MonthlyStats {
    /// `month,min,q1,median,q3,max,mean,count`; absent months leave the
    /// statistics empty and report a zero count.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("month,min,q1,median,q3,max,mean,count\n");
        for (i, m) in self.months.iter().enumerate() {
            match m {
                Some(s) => writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    i + 1,
                    s.min,
                    s.q1,
                    s.median,
                    s.q3,
                    s.max,
                    s.mean,
                    s.count
                ),
                None => writeln!(out, "{},,,,,,,0", i + 1),
            }
            .expect("write to string");
        }
        out
    }
}

/// Year-by-month pivot. Years run from the first to the last observed year;
/// months without an observation are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendTable {
    pub years: Vec<i32>,
    pub cells: Vec<[Option<f64>; 12]>,
}

pub fn yearly_trend_table(series: &MonthlySeries) -> TrendTable {
    let (Some(first), Some(last)) = (series.points.first(), series.points.last()) else {
        return TrendTable {
            years: Vec::new(),
            cells: Vec::new(),
        };
    };
    let years: Vec<i32> = (first.year..=last.year).collect();
    let mut cells = vec![[None; 12]; years.len()];
    for p in &series.points {
        cells[(p.year - first.year) as usize][p.month as usize - 1] = Some(p.precip_mm);
    }
    TrendTable { years, cells }
}

impl TrendTable {
    pub fn column_mean(&self, month: u8) -> Option<f64> {
        let vals: Vec<f64> = self.cells.iter().filter_map(|r| r[month as usize - 1]).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// `year,Jan,...,Dec` with empty cells for absent months.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("year");
        for m in MONTH_ABBREVIATIONS {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        for (year, row) in self.years.iter().zip(&self.cells) {
            write!(out, "{year}").expect("write to string");
            for cell in row {
                out.push(',');
                if let Some(v) = cell {
                    write!(out, "{v}").expect("write to string");
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::{clean_missing, MonthlyPoint};
    use super::*;
    use proptest::prelude::*;

    fn one_month(values: &[f64]) -> MonthlySeries {
        let points = values
            .iter()
            .enumerate()
            .map(|(i, &v)| MonthlyPoint {
                year: 1950 + i as i32,
                month: 7,
                precip_mm: v,
            })
            .collect();
        MonthlySeries::from_points(points, "t")
    }

    #[test]
    fn even_sample_hinges() {
        let s = monthly_boxplot_stats(&one_month(&[4.0, 1.0, 3.0, 2.0]));
        let jul = s.months[6].unwrap();
        assert_eq!((jul.q1, jul.median, jul.q3), (1.5, 2.5, 3.5));
        assert_eq!((jul.min, jul.max, jul.count), (1.0, 4.0, 4));
        assert_eq!(jul.mean, 2.5);
        assert!(s.months[0].is_none());
    }

    #[test]
    fn odd_sample_shares_median() {
        assert_eq!(tukey_quartiles(&[1.0, 2.0, 3.0, 4.0, 5.0]), (2.0, 3.0, 4.0));
        assert_eq!(tukey_quartiles(&[7.0]), (7.0, 7.0, 7.0));
    }

    #[test]
    fn constant_series() {
        let s = monthly_boxplot_stats(&one_month(&[5.5; 9]));
        let m = s.months[6].unwrap();
        assert!([m.min, m.q1, m.median, m.q3, m.max].iter().all(|&v| v == 5.5));
    }

    #[test]
    fn stats_csv_marks_absent_months() {
        let csv = monthly_boxplot_stats(&one_month(&[1.0, 2.0])).to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "month,min,q1,median,q3,max,mean,count");
        assert_eq!(lines[1], "1,,,,,,,0");
        assert_eq!(lines[7], "7,1,1,1.5,2,2,1.5,2");
    }

    fn two_years() -> MonthlySeries {
        let points = (0..24)
            .map(|i| MonthlyPoint {
                year: 1990 + i / 12,
                month: (i % 12) as u8 + 1,
                precip_mm: if i == 5 { -99.0 } else { i as f64 },
            })
            .collect();
        MonthlySeries::from_points(points, "t")
    }

    #[test]
    fn pivot_dense_and_gaps() {
        let raw = two_years();
        let t = yearly_trend_table(&raw);
        assert_eq!(t.years, vec![1990, 1991]);
        assert_eq!(t.cells[1][11], Some(23.0));
        let t = yearly_trend_table(&clean_missing(&raw));
        assert_eq!(t.cells[0][5], None);
        assert_eq!(t.cells[1][5], Some(17.0));
        assert_eq!(t.column_mean(6), Some(17.0));
        let csv = t.to_csv();
        assert!(csv.starts_with("year,Jan,Feb,Mar"));
        assert!(csv.lines().nth(1).unwrap().starts_with("1990,0,1,2,3,4,,6"));
    }

    /// Independent oracle: sort by insertion, split into halves explicitly,
    /// average the middle pair (or take the middle element) of each.
    fn oracle_quartiles(sample: &[f64]) -> (f64, f64, f64) {
        let mut s: Vec<f64> = Vec::new();
        for &x in sample {
            let pos = s.iter().position(|&y| y > x).unwrap_or(s.len());
            s.insert(pos, x);
        }
        let mid = |v: &[f64]| -> f64 {
            let n = v.len();
            let lo = v[(n - 1) / 2];
            let hi = v[n / 2];
            (lo + hi) / 2.0
        };
        let n = s.len();
        let half = if n % 2 == 0 { n / 2 } else { n / 2 + 1 };
        let lower: Vec<f64> = s.iter().take(half).copied().collect();
        let upper: Vec<f64> = s.iter().rev().take(half).rev().copied().collect();
        (mid(&lower), mid(&s), mid(&upper))
    }

    proptest! {
        #[test]
        fn quartiles_match_oracle(sample in prop::collection::vec(0.0f64..700.0, 1..=50)) {
            let mut sorted = sample.clone();
            sorted.sort_by(f64::total_cmp);
            let got = tukey_quartiles(&sorted);
            prop_assert_eq!(got, oracle_quartiles(&sample));
            prop_assert!(sorted[0] <= got.0 && got.0 <= got.1 && got.1 <= got.2 && got.2 <= sorted[sorted.len() - 1]);
        }
    }
}
