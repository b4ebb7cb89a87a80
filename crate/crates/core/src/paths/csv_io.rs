//! CSV path files: one row per node, a mandatory header, columns
//! `t,x1,..,xd` where the `t` column is optional.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::PiecewisePath;
use crate::error::{Error, Result};

pub fn read_csv(path: impl AsRef<Path>) -> Result<PiecewisePath> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_from(file)
}

pub fn read_csv_from<R: Read>(reader: R) -> Result<PiecewisePath> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::InvalidInput("path csv needs a header row".into()));
    }
    let timed = headers.get(0).is_some_and(|h| h.eq_ignore_ascii_case("t"));
    let coords = headers.len() - usize::from(timed);
    if coords == 0 {
        return Err(Error::InvalidInput("path csv has no coordinate columns".into()));
    }
    if let Some(bad) = headers.iter().find(|h| h.parse::<f64>().is_ok()) {
        return Err(Error::InvalidInput(format!(
            "path csv header looks numeric (`{bad}`); a header row is required"
        )));
    }

    let mut points = Vec::new();
    let mut times = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let values = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| {
                    Error::InvalidInput(format!("row {}: `{field}` is not a number", row + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if timed {
            times.push(values[0]);
            points.push(values[1..].to_vec());
        } else {
            points.push(values);
        }
    }
    if timed {
        PiecewisePath::with_times(points, times)
    } else {
        PiecewisePath::new(points)
    }
}

pub fn write_csv(path: impl AsRef<Path>, data: &PiecewisePath) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(file, data)
}

/// Writes the path with a `t` column whenever it carries timestamps.
pub fn write_csv_to<W: Write>(writer: W, data: &PiecewisePath) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = Vec::with_capacity(data.dim() + 1);
    if data.times().is_some() {
        header.push("t".into());
    }
    header.extend((1..=data.dim()).map(|i| format!("x{i}")));
    wtr.write_record(&header)?;
    for (i, p) in data.points().iter().enumerate() {
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        if let Some(t) = data.times() {
            row.push(format_float(t[i]));
        }
        row.extend(p.iter().map(|&v| format_float(v)));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Shortest representation that parses back to the identical `f64`.
fn format_float(v: f64) -> String {
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timed_round_trip_is_exact() {
        let p = PiecewisePath::with_times(
            vec![vec![0.1, 1.0 / 3.0], vec![2.0, -7.25]],
            vec![0.0, 0.1 + 0.2],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_csv_to(&mut buf, &p).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x1,x2\n"));
        assert_eq!(read_csv_from(buf.as_slice()).unwrap(), p);
    }

    #[test]
    fn untimed_files_are_accepted() {
        let p = read_csv_from("x1,x2\n0,0\n1,2\n".as_bytes()).unwrap();
        assert_eq!(p.times(), None);
        assert_eq!(p.points(), &[vec![0.0, 0.0], vec![1.0, 2.0]]);
    }

    #[test]
    fn missing_header_is_an_error() {
        assert!(read_csv_from("0,0\n1,2\n".as_bytes()).is_err());
        assert!(read_csv_from("t,x1\n0,a\n".as_bytes()).is_err());
    }
}
