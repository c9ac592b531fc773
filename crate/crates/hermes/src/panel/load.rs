//! CSV loaders and writers for the fashion and M4-weekly panel formats.
//!
//! Fashion format: header row of ISO week dates, one row per series
//! (`id,v1,...,vT`), all rows the same length. Weak signals live in a
//! sibling file `<stem>.weak.csv` with the identical shape; a missing
//! sibling yields K = 0.
//!
//! M4 format: id column then variable-length value columns, blanks for the
//! absent tail.

use super::{SeriesRecord, TimePanel, WeakEntry, WeakSignalPanel};
use crate::error::{Error, Result};
use chrono::{Duration, NaiveDate};
use std::path::{Path, PathBuf};

/// First week of the fashion dataset.
pub const FASHION_START_DATE: &str = "2015-01-05";

/// `n` consecutive ISO week dates starting at `start`.
pub fn week_dates(start: &str, n: usize) -> Vec<String> {
    let d0 = NaiveDate::parse_from_str(start, "%Y-%m-%d").expect("valid ISO date");
    (0..n)
        .map(|i| (d0 + Duration::weeks(i as i64)).format("%Y-%m-%d").to_string())
        .collect()
}

fn weak_sibling(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default();
    path.with_file_name(format!("{stem}.weak.csv"))
}

fn parse_cell(cell: &str, row: usize, col: usize) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| {
        Error::load(format!("non-numeric cell '{cell}' at row {row}, column {col}"))
    })?;
    if !v.is_finite() {
        return Err(Error::load(format!(
            "non-finite value at row {row}, column {col}"
        )));
    }
    Ok(v)
}

fn read_fashion_rows(path: &Path) -> Result<(Vec<String>, Vec<(String, Vec<f64>)>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut rows = reader.records();
    let header = rows
        .next()
        .ok_or_else(|| Error::load(format!("{}: empty file", path.display())))??;
    let dates: Vec<String> = header.iter().skip(1).map(|s| s.to_string()).collect();
    let expected = dates.len();
    if expected == 0 {
        return Err(Error::load(format!("{}: header has no week columns", path.display())));
    }

    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, record) in rows.enumerate() {
        let record = record?;
        let row = i + 1; // header is row 0
        let mut fields = record.iter();
        let id = fields
            .next()
            .ok_or_else(|| Error::load(format!("empty row {row}")))?
            .trim()
            .to_string();
        if id.is_empty() {
            return Err(Error::load(format!("missing id at row {row}")));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::load(format!("duplicate id '{id}' at row {row}")));
        }
        let values: Vec<f64> = fields
            .enumerate()
            .map(|(c, cell)| parse_cell(cell, row, c + 1))
            .collect::<Result<_>>()?;
        if values.len() != expected {
            return Err(Error::load(format!(
                "length mismatch at row {row}: got {} values, expected {expected}",
                values.len()
            )));
        }
        out.push((id, values));
    }
    Ok((dates, out))
}

/// Load a fashion-format panel and its weak-signal sibling file (if any).
pub fn load_fashion_panel(path: impl AsRef<Path>) -> Result<(TimePanel, WeakSignalPanel)> {
    let path = path.as_ref();
    let (dates, rows) = read_fashion_rows(path)?;
    let series = rows
        .into_iter()
        .map(|(id, values)| SeriesRecord::new(id, values))
        .collect();
    let mut panel = TimePanel::new(series)?;
    panel.dates = Some(dates);

    let weak_path = weak_sibling(path);
    let weak = if weak_path.exists() {
        let (_, rows) = read_fashion_rows(&weak_path)?;
        let weak = WeakSignalPanel {
            entries: rows
                .into_iter()
                .map(|(id, values)| WeakEntry {
                    id,
                    channels: vec![values],
                })
                .collect(),
        };
        weak.validate_against(&panel)?;
        weak
    } else {
        WeakSignalPanel::empty()
    };
    Ok((panel, weak))
}

/// Load an M4-style CSV: id column then variable-length values, blanks for
/// the absent tail. A non-numeric first data row is treated as a header.
pub fn load_m4_weekly(path: impl AsRef<Path>) -> Result<TimePanel> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut series = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if i == 0 {
            // Header row if the first value cell does not parse.
            if record
                .iter()
                .nth(1)
                .is_some_and(|c| !c.trim().is_empty() && c.trim().parse::<f64>().is_err())
            {
                continue;
            }
        }
        let mut fields = record.iter();
        let id = fields
            .next()
            .ok_or_else(|| Error::load(format!("empty row {i}")))?
            .trim()
            .trim_matches('"')
            .to_string();
        if id.is_empty() && record.iter().all(|c| c.trim().is_empty()) {
            continue; // blank line
        }
        let mut values = Vec::new();
        for (c, cell) in fields.enumerate() {
            if cell.trim().is_empty() {
                break; // absent tail
            }
            values.push(parse_cell(cell, i, c + 1)?);
        }
        if values.is_empty() {
            return Err(Error::load(format!("empty series '{id}' at row {i}")));
        }
        series.push(SeriesRecord::new(id, values));
    }
    TimePanel::new(series)
}

fn write_rows<I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: Iterator<Item = (String, Vec<f64>)>,
{
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut writer = csv::WriterBuilder::new().flexible(true).from_path(path)?;
    let mut head = vec!["id".to_string()];
    head.extend_from_slice(header);
    writer.write_record(&head)?;
    for (id, values) in rows {
        let mut rec = vec![id];
        // `{}` on f64 is the shortest representation that round-trips.
        rec.extend(values.iter().map(|v| format!("{v}")));
        writer.write_record(&rec)?;
    }
    writer.flush()?;
    Ok(())
}

/// Write a uniform-length panel in the fashion CSV format.
pub fn write_fashion_panel(panel: &TimePanel, path: impl AsRef<Path>) -> Result<()> {
    let t = panel
        .uniform_len()
        .ok_or_else(|| Error::invalid("fashion format requires a uniform-length panel"))?;
    let dates = panel
        .dates
        .clone()
        .unwrap_or_else(|| week_dates(FASHION_START_DATE, t));
    write_rows(
        path.as_ref(),
        &dates,
        panel
            .series
            .iter()
            .map(|s| (s.id.clone(), s.values.clone())),
    )
}

/// Write a K=1 weak-signal panel as the fashion sibling file of `main_path`.
pub fn write_weak_panel(weak: &WeakSignalPanel, main_path: impl AsRef<Path>) -> Result<()> {
    if weak.k() != 1 {
        return Err(Error::invalid(
            "fashion weak-signal file stores exactly one channel",
        ));
    }
    let t = weak.entries[0].channels[0].len();
    let dates = week_dates(FASHION_START_DATE, t);
    write_rows(
        &weak_sibling(main_path.as_ref()),
        &dates,
        weak.entries
            .iter()
            .map(|e| (e.id.clone(), e.channels[0].clone())),
    )
}

/// Write a (possibly ragged) panel in the M4 CSV format.
pub fn write_m4_weekly(panel: &TimePanel, path: impl AsRef<Path>) -> Result<()> {
    let width = panel
        .series
        .iter()
        .map(|s| s.values.len())
        .max()
        .unwrap_or(0);
    let header: Vec<String> = (1..=width).map(|i| format!("V{i}")).collect();
    if let Some(dir) = path.as_ref().parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut writer = csv::WriterBuilder::new().flexible(true).from_path(path.as_ref())?;
    let mut head = vec!["id".to_string()];
    head.extend(header);
    writer.write_record(&head)?;
    for s in &panel.series {
        let mut rec = vec![s.id.clone()];
        rec.extend(s.values.iter().map(|v| format!("{v}")));
        rec.extend(std::iter::repeat(String::new()).take(width - s.values.len()));
        writer.write_record(&rec)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tmpfile(name: &str, contents: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("hermes-load-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn fashion_two_rows() {
        let dates = week_dates(FASHION_START_DATE, 261).join(",");
        let mut body = format!("id,{dates}\n");
        let vals: Vec<String> = (0..261).map(|i| format!("{}", i as f64 * 0.5)).collect();
        body.push_str(&format!("a,{}\n", vals.join(",")));
        body.push_str(&format!("b,{}\n", vals.join(",")));
        let path = tmpfile("two_rows.csv", &body);
        let (panel, weak) = load_fashion_panel(&path).unwrap();
        assert_eq!(panel.len(), 2);
        assert_eq!(panel.uniform_len(), Some(261));
        assert_eq!(weak.k(), 0);
    }

    #[test]
    fn fashion_ragged_row_named() {
        let dates = week_dates(FASHION_START_DATE, 5).join(",");
        let body = format!("id,{dates}\na,1,2,3,4,5\nb,1,2,3,4\n");
        let path = tmpfile("ragged.csv", &body);
        let err = load_fashion_panel(&path).unwrap_err().to_string();
        assert!(err.contains("length mismatch at row 2"), "{err}");
    }

    #[test]
    fn fashion_duplicate_id() {
        let body = "id,2015-01-05,2015-01-12\na,1,2\na,3,4\n";
        let path = tmpfile("dup.csv", body);
        assert!(load_fashion_panel(&path).is_err());
    }

    #[test]
    fn fashion_non_numeric_cell() {
        let body = "id,2015-01-05,2015-01-12\na,1,oops\n";
        let path = tmpfile("nonnum.csv", body);
        let err = load_fashion_panel(&path).unwrap_err().to_string();
        assert!(err.contains("row 1"), "{err}");
    }

    #[test]
    fn m4_toy_and_header() {
        let path = tmpfile("m4toy.csv", "id,V1,V2,V3,V4,V5\nW1,1,2,3,4,5\n");
        let panel = load_m4_weekly(&path).unwrap();
        assert_eq!(panel.len(), 1);
        assert_eq!(panel.series[0].values, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn m4_ragged_tail() {
        let path = tmpfile("m4rag.csv", "id,V1,V2,V3\nW1,1,2,3\nW2,7,8,\n");
        let panel = load_m4_weekly(&path).unwrap();
        assert_eq!(panel.series[1].values, vec![7.0, 8.0]);
    }

    #[test]
    fn m4_empty_series_rejected() {
        let path = tmpfile("m4empty.csv", "id,V1\nW1,\n");
        assert!(load_m4_weekly(&path).is_err());
    }

    #[test]
    fn fashion_round_trip_bit_exact() {
        let values = vec![0.1, 1.0 / 3.0, 2.5e-5, 123456.789, 1e-300];
        let mut panel = TimePanel::new(vec![SeriesRecord::new("a", values)]).unwrap();
        panel.dates = Some(week_dates(FASHION_START_DATE, 5));
        let dir = std::env::temp_dir().join(format!("hermes-rt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rt.csv");
        write_fashion_panel(&panel, &path).unwrap();
        let (loaded, _) = load_fashion_panel(&path).unwrap();
        assert_eq!(loaded.series, panel.series);
    }
}
