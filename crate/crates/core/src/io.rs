//! Dataset files.
//!
//! A coordinate file is a headerless CSV with one point per row. A distance
//! matrix file starts with the line `# matrix` followed by `n` rows of `n`
//! distances. Blank lines and other `#` lines are ignored.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metric::Dataset;

const MATRIX_HEADER: &str = "# matrix";

/// Parses a dataset from CSV text.
pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let is_matrix = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .is_some_and(|l| l.eq_ignore_ascii_case(MATRIX_HEADER));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidDataset(format!("row {}: cannot parse {field:?} as a number", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if is_matrix {
        Dataset::from_matrix(rows)
    } else {
        Dataset::from_points(rows)
    }
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_dataset(&fs::read_to_string(path)?)
}

/// Serializes a dataset; values use the shortest representation that
/// round-trips exactly.
pub fn dataset_to_csv(data: &Dataset) -> Result<String> {
    let mut out = Vec::new();
    if data.is_matrix() {
        writeln!(out, "{MATRIX_HEADER}")?;
    }
    {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(&mut out);
        for p in data.point_ids() {
            let row = data.coords(p).or_else(|| data.matrix_row(p)).unwrap_or_default();
            writer.write_record(row.iter().map(|v| format!("{v:?}")))?;
        }
        writer.flush()?;
    }
    String::from_utf8(out).map_err(|e| Error::InvalidDataset(e.to_string()))
}

pub fn write_dataset(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, dataset_to_csv(data)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::PointId;
    use proptest::prelude::*;

    #[test]
    fn parses_coordinates() {
        let d = parse_dataset("0,0\n3, 4\n\n").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dist(PointId(0), PointId(1)), 5.0);
    }

    #[test]
    fn parses_matrix_with_header() {
        let d = parse_dataset("# matrix\n0,2\n2,0\n").unwrap();
        assert!(d.is_matrix());
        assert_eq!(d.dist(PointId(1), PointId(0)), 2.0);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_dataset("1,x\n").is_err());
        assert!(parse_dataset("1,2\n3\n").is_err());
        assert!(parse_dataset("# matrix\n0,1\n").is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let d = Dataset::from_matrix(vec![vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        write_dataset(&d, &path).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), d);
    }

    proptest! {
        #[test]
        fn coordinates_round_trip_exactly(pts in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..20)) {
            let d = Dataset::from_points(pts).unwrap();
            let back = parse_dataset(&dataset_to_csv(&d).unwrap()).unwrap();
            prop_assert_eq!(back, d);
        }
    }
}
