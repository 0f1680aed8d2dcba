//! Time series containers, Hankel trajectory matrices and sliding windows.
//!
//! A trajectory matrix stacks every length-`M1` window of a series as a
//! column, so entry `(i, j)` is `t[i + j]`. Storage is column-major
//! (nalgebra's native layout), which keeps each window contiguous.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::stats;

/// Ordered real-valued samples with optional per-stamp anomaly labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    labels: Option<Vec<bool>>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::validate(&values)?;
        Ok(Self { values, labels: None })
    }

    pub fn with_labels(values: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        Self::validate(&values)?;
        if labels.len() != values.len() {
            return Err(Error::LabelLength { values: values.len(), labels: labels.len() });
        }
        Ok(Self { values, labels: Some(labels) })
    }

    fn validate(values: &[f64]) -> Result<()> {
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sub-series over `range`, labels sliced alongside.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        let values = self.values[range.clone()].to_vec();
        match &self.labels {
            Some(l) => Self::with_labels(values, l[range].to_vec()),
            None => Self::new(values),
        }
    }

    pub fn into_parts(self) -> (Vec<f64>, Option<Vec<bool>>) {
        (self.values, self.labels)
    }
}

/// `M1 × M2` Hankel embedding of a series, `M2 = n - M1 + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMatrix {
    data: DMatrix<f64>,
}

impl TrajectoryMatrix {
    pub fn window_size(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_windows(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[(row, col)]
    }

    /// Read the source series back off the anti-diagonals (first column, then last row).
    pub fn to_series(&self) -> Vec<f64> {
        let (m1, m2) = self.data.shape();
        let mut out: Vec<f64> = self.data.column(0).iter().copied().collect();
        out.extend((1..m2).map(|j| self.data[(m1 - 1, j)]));
        out
    }

    /// Anti-diagonal averaging (Hankelization) of an arbitrary matrix of the same
    /// shape. On an exact trajectory matrix this equals [`Self::to_series`].
    pub fn diagonal_average(matrix: &DMatrix<f64>) -> Vec<f64> {
        let (m1, m2) = matrix.shape();
        let n = m1 + m2 - 1;
        let mut sums = vec![0.0; n];
        let mut counts = vec![0usize; n];
        for j in 0..m2 {
            for i in 0..m1 {
                sums[i + j] += matrix[(i, j)];
                counts[i + j] += 1;
            }
        }
        sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect()
    }
}

/// The most recent `M1` samples; the last element is the current stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Window(DVector<f64>);

impl Window {
    pub fn new(values: &[f64]) -> Self {
        Window(DVector::from_column_slice(values))
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> f64 {
        self.0[self.0.len() - 1]
    }
}

fn check_window(window: usize, len: usize) -> Result<()> {
    if window == 0 {
        return Err(Error::ZeroWindow);
    }
    if window > len {
        return Err(Error::WindowTooLarge { window, len });
    }
    Ok(())
}

/// Build the trajectory matrix of a raw slice.
pub fn trajectory_of(values: &[f64], window: usize) -> Result<TrajectoryMatrix> {
    check_window(window, values.len())?;
    let m2 = values.len() - window + 1;
    let data = DMatrix::from_fn(window, m2, |i, j| values[i + j]);
    Ok(TrajectoryMatrix { data })
}

pub fn build_trajectory(t: &TimeSeries, window: usize) -> Result<TrajectoryMatrix> {
    trajectory_of(t.values(), window)
}

pub fn last_window_of(values: &[f64], window: usize) -> Result<Window> {
    check_window(window, values.len())?;
    Ok(Window::new(&values[values.len() - window..]))
}

pub fn last_window(t: &TimeSeries, window: usize) -> Result<Window> {
    last_window_of(t.values(), window)
}

/// A series read from CSV together with its carried-through timestamp column.
#[derive(Debug, Clone)]
pub struct CsvSeries {
    pub timestamps: Vec<String>,
    pub series: TimeSeries,
}

fn parse_label(field: &str, index: usize) -> Result<bool> {
    match field.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "t" | "yes" => Ok(true),
        "0" | "false" | "f" | "no" | "" => Ok(false),
        other => Err(Error::Csv(format!("bad label {other:?} at index {index}"))),
    }
}

/// Read `timestamp,value[,label]` rows. A leading header row is skipped when its
/// value field is not numeric. Empty value fields (and `NaN`) are missing values:
/// rejected unless `impute_median` is set, in which case they are replaced by the
/// median of the present samples. Infinite values are always rejected.
pub fn read_csv<R: Read>(reader: R, impute_median: bool) -> Result<CsvSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut timestamps = Vec::new();
    let mut values: Vec<Option<f64>> = Vec::new();
    let mut labels: Vec<bool> = Vec::new();
    let mut any_label = false;

    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() < 2 {
            return Err(Error::Csv(format!("row {row} has {} fields, expected 2 or 3", record.len())));
        }
        let raw = &record[1];
        let parsed = if raw.is_empty() { None } else { raw.parse::<f64>().ok() };
        if row == 0 && parsed.is_none() && !raw.is_empty() && !raw.eq_ignore_ascii_case("nan") {
            // header
            continue;
        }
        let index = values.len();
        let value = match parsed {
            None if raw.is_empty() => None,
            None => return Err(Error::Csv(format!("unparseable value {raw:?} at index {index}"))),
            Some(v) if v.is_nan() => None,
            Some(v) if v.is_infinite() => return Err(Error::NonFinite { index, value: v }),
            Some(v) => Some(v),
        };
        timestamps.push(record[0].to_string());
        values.push(value);
        match record.get(2) {
            Some(l) => {
                any_label = true;
                labels.push(parse_label(l, index)?);
            }
            None => labels.push(false),
        }
    }

    let present: Vec<f64> = values.iter().flatten().copied().collect();
    let filled = match values.iter().position(Option::is_none) {
        None => present,
        Some(index) if !impute_median || present.is_empty() => {
            return Err(Error::MissingValue { index })
        }
        Some(_) => {
            let med = stats::median(&present);
            values.iter().map(|v| v.unwrap_or(med)).collect()
        }
    };

    let series = if any_label {
        TimeSeries::with_labels(filled, labels)?
    } else {
        TimeSeries::new(filled)?
    };
    Ok(CsvSeries { timestamps, series })
}

/// Write `timestamp,value[,label]` with a header row. Timestamps default to
/// the sample ordinal when `timestamps` is `None`.
pub fn write_csv<W: Write>(writer: W, series: &TimeSeries, timestamps: Option<&[String]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let labelled = series.labels().is_some();
    if labelled {
        w.write_record(["timestamp", "value", "label"])?;
    } else {
        w.write_record(["timestamp", "value"])?;
    }
    for (i, v) in series.values().iter().enumerate() {
        let ts = timestamps.map(|t| t[i].clone()).unwrap_or_else(|| i.to_string());
        let value = format!("{v:?}");
        match series.labels() {
            Some(l) => w.write_record([ts, value, u8::from(l[i]).to_string()])?,
            None => w.write_record([ts, value])?,
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(v: &[f64]) -> TimeSeries {
        TimeSeries::new(v.to_vec()).unwrap()
    }

    #[test]
    fn small_hankel() {
        let x = build_trajectory(&ts(&[1.0, 2.0, 3.0, 4.0]), 2).unwrap();
        assert_eq!(x.data(), &DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn single_sample() {
        let x = build_trajectory(&ts(&[5.0]), 1).unwrap();
        assert_eq!(x.data(), &DMatrix::from_element(1, 1, 5.0));
    }

    #[test]
    fn default_window_shape() {
        let t = ts(&(0..100).map(f64::from).collect::<Vec<_>>());
        let x = build_trajectory(&t, 30).unwrap();
        assert_eq!((x.window_size(), x.n_windows()), (30, 71));
    }

    #[test]
    fn window_too_large() {
        assert_eq!(
            build_trajectory(&ts(&[1.0, 2.0]), 3),
            Err(Error::WindowTooLarge { window: 3, len: 2 })
        );
        assert!(matches!(last_window(&ts(&[1.0]), 2), Err(Error::WindowTooLarge { .. })));
        assert_eq!(build_trajectory(&ts(&[1.0]), 0), Err(Error::ZeroWindow));
    }

    #[test]
    fn last_window_examples() {
        assert_eq!(last_window(&ts(&[1.0, 2.0, 3.0, 4.0]), 2).unwrap(), Window::new(&[3.0, 4.0]));
        assert_eq!(last_window(&ts(&[7.0]), 1).unwrap(), Window::new(&[7.0]));
        let mut v = vec![0.0; 30];
        v[29] = 9.0;
        assert_eq!(last_window(&ts(&v), 30).unwrap().last(), 9.0);
    }

    #[test]
    fn diagonal_average_of_exact_hankel() {
        let v: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let x = trajectory_of(&v, 5).unwrap();
        let back = TrajectoryMatrix::diagonal_average(x.data());
        for (a, b) in back.iter().zip(&v) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_finite_and_bad_labels() {
        assert!(matches!(
            TimeSeries::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert_eq!(TimeSeries::new(vec![]), Err(Error::EmptySeries));
        assert_eq!(
            TimeSeries::with_labels(vec![1.0], vec![true, false]),
            Err(Error::LabelLength { values: 1, labels: 2 })
        );
    }

    #[test]
    fn csv_with_header_and_labels() {
        let text = "timestamp,value,label\n2020-01-01,1.5,0\n2020-01-02,2.5,1\n";
        let s = read_csv(text.as_bytes(), false).unwrap();
        assert_eq!(s.series.values(), &[1.5, 2.5]);
        assert_eq!(s.series.labels(), Some(&[false, true][..]));
        assert_eq!(s.timestamps, vec!["2020-01-01", "2020-01-02"]);
    }

    #[test]
    fn csv_missing_values() {
        let text = "0,1.0\n1,\n2,3.0\n3,NaN\n";
        assert_eq!(read_csv(text.as_bytes(), false).unwrap_err(), Error::MissingValue { index: 1 });
        let s = read_csv(text.as_bytes(), true).unwrap();
        assert_eq!(s.series.values(), &[1.0, 2.0, 3.0, 2.0]);
        assert!(s.series.labels().is_none());
    }

    #[test]
    fn csv_rejects_infinity() {
        let text = "0,1.0\n1,inf\n";
        assert!(matches!(read_csv(text.as_bytes(), true), Err(Error::NonFinite { index: 1, .. })));
    }

    #[test]
    fn csv_round_trip() {
        let s = TimeSeries::with_labels(vec![0.1, -2.0 / 3.0, 1e-17], vec![false, true, false]).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &s, None).unwrap();
        let back = read_csv(buf.as_slice(), false).unwrap();
        assert_eq!(back.series, s);
    }
}
