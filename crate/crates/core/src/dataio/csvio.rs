use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{DataError, Dataset, PointRecord, FEATURE_NAMES, LABEL_COLUMN, NUM_CLASSES, NUM_FEATURES};
use crate::numerics::{Matrix, Scalar};

/// Reads a labeled point-cloud CSV file.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<Dataset<T>, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file)
}

pub fn read_csv<T: Scalar, R: Read>(reader: R) -> Result<Dataset<T>, DataError> {
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for row in RecordReader::new(reader)? {
        let (_, rec) = row?;
        data.extend(rec.features().iter().map(|&v| T::lit(v)));
        labels.push(rec.label);
    }
    let features = Matrix::from_vec(labels.len(), NUM_FEATURES, data)?;
    Dataset::new(features, labels)
}

/// Streaming row reader shared by [`read_csv`] and the subsampler.
pub(crate) struct RecordReader<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
}

impl<R: Read> RecordReader<R> {
    pub(crate) fn new(reader: R) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers().map_err(|e| DataError::Csv(e.to_string()))?.clone();
        check_header(&header)?;
        Ok(Self {
            records: rdr.into_records(),
        })
    }
}

impl<R: Read> Iterator for RecordReader<R> {
    type Item = Result<(u64, PointRecord<f64>), DataError>;

    fn next(&mut self) -> Option<Self::Item> {
        let rec = self.records.next()?;
        Some(rec.map_err(csv_error).and_then(|r| parse_record(&r)))
    }
}

fn csv_error(e: csv::Error) -> DataError {
    match e.position() {
        Some(pos) => DataError::Validation {
            line: pos.line(),
            message: e.to_string(),
        },
        None => DataError::Csv(e.to_string()),
    }
}

fn expected_columns() -> impl Iterator<Item = &'static str> {
    FEATURE_NAMES.iter().copied().chain(std::iter::once(LABEL_COLUMN))
}

fn check_header(header: &csv::StringRecord) -> Result<(), DataError> {
    let found: Vec<&str> = header.iter().collect();
    for name in expected_columns() {
        if !found.contains(&name) {
            return Err(DataError::MissingColumn(name.to_string()));
        }
    }
    if let Some(extra) = found.iter().find(|n| !expected_columns().any(|e| e == **n)) {
        return Err(DataError::UnexpectedColumn(extra.to_string()));
    }
    if found.len() != NUM_FEATURES + 1 {
        // duplicated column names
        return Err(DataError::UnexpectedColumn(
            found
                .iter()
                .find(|n| found.iter().filter(|m| m == n).count() > 1)
                .unwrap()
                .to_string(),
        ));
    }
    for (expected, name) in expected_columns().enumerate() {
        let pos = found.iter().position(|n| *n == name).unwrap();
        if pos != expected {
            return Err(DataError::ColumnOrder {
                name: name.to_string(),
                expected,
                found: pos,
            });
        }
    }
    Ok(())
}

fn parse_record(rec: &csv::StringRecord) -> Result<(u64, PointRecord<f64>), DataError> {
    let line = rec.position().map_or(0, |p| p.line());
    let mut features = [0.0f64; NUM_FEATURES];
    for (j, name) in FEATURE_NAMES.iter().enumerate() {
        let cell = &rec[j];
        let value: f64 = cell.parse().map_err(|_| DataError::Parse {
            line,
            column: name.to_string(),
            value: cell.to_string(),
        })?;
        if !value.is_finite() {
            return Err(DataError::Validation {
                line,
                message: format!("column `{name}` is not finite"),
            });
        }
        features[j] = value;
    }
    let cell = &rec[NUM_FEATURES];
    let label: i64 = cell.parse().map_err(|_| DataError::Parse {
        line,
        column: LABEL_COLUMN.to_string(),
        value: cell.to_string(),
    })?;
    if !(0..NUM_CLASSES as i64).contains(&label) {
        return Err(DataError::Validation {
            line,
            message: format!("class {label} outside 0..={}", NUM_CLASSES - 1),
        });
    }
    Ok((line, PointRecord::from_features(&features, label as usize)))
}

/// Writes a dataset in the ingestion format; floats use the shortest
/// representation that parses back to the same value.
pub fn write_csv<T: Scalar>(d: &Dataset<T>, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_csv_to(d, file)
}

pub fn write_csv_to<T: Scalar, W: Write>(d: &Dataset<T>, writer: W) -> Result<(), DataError> {
    let mut w = RecordWriter::new(writer)?;
    for rec in d.records() {
        w.write(&rec)?;
    }
    w.flush()
}

pub(crate) struct RecordWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RecordWriter<W> {
    pub(crate) fn new(writer: W) -> Result<Self, DataError> {
        let mut inner = csv::Writer::from_writer(writer);
        inner
            .write_record(expected_columns())
            .map_err(|e| DataError::Csv(e.to_string()))?;
        Ok(Self { inner })
    }

    pub(crate) fn write<T: Scalar>(&mut self, rec: &PointRecord<T>) -> Result<(), DataError> {
        let mut fields: Vec<String> = rec.features().iter().map(|v| v.to_string()).collect();
        fields.push(rec.label.to_string());
        self.inner
            .write_record(&fields)
            .map_err(|e| DataError::Csv(e.to_string()))
    }

    pub(crate) fn flush(&mut self) -> Result<(), DataError> {
        self.inner.flush().map_err(|source| DataError::Io {
            path: "<csv writer>".into(),
            source,
        })
    }
}
