//! Per-tick evaluation logs as CSV.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One control tick. Angles are radians except `dtheta_deg`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub robot_x: f64,
    pub robot_y: f64,
    pub robot_heading: f64,
    pub person_x: f64,
    pub person_y: f64,
    pub goal_x: f64,
    pub goal_y: f64,
    pub dtheta_deg: f64,
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
    pub visible: bool,
    pub tracked: bool,
    pub collision: bool,
    pub r_yaw: f64,
    pub r_smooth: f64,
    pub reward: f64,
    pub blocked: bool,
    pub admissible: usize,
    pub min_clearance: f64,
}

pub const COLUMNS: [&str; 21] = [
    "t",
    "robot_x",
    "robot_y",
    "robot_heading",
    "person_x",
    "person_y",
    "goal_x",
    "goal_y",
    "dtheta_deg",
    "vx",
    "vy",
    "omega",
    "visible",
    "tracked",
    "collision",
    "r_yaw",
    "r_smooth",
    "reward",
    "blocked",
    "admissible",
    "min_clearance",
];

pub fn write_log<W: Write>(out: W, rows: &[LogRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_log(path: &Path, rows: &[LogRow]) -> Result<()> {
    write_log(std::fs::File::create(path)?, rows)
}

/// Parses a log, checking the header and that time strictly increases.
/// Errors carry the 1-based data row number.
pub fn read_log<R: Read>(input: R) -> Result<Vec<LogRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(COLUMNS.iter().copied()) {
        return Err(Error::RunLog {
            row: 0,
            msg: format!("unexpected header, expected {}", COLUMNS.join(",")),
        });
    }
    let mut rows: Vec<LogRow> = Vec::new();
    for (i, rec) in r.deserialize::<LogRow>().enumerate() {
        let row = rec.map_err(|e| Error::RunLog {
            row: i + 1,
            msg: e.to_string(),
        })?;
        if let Some(prev) = rows.last() {
            if !(row.t > prev.t) {
                return Err(Error::RunLog {
                    row: i + 1,
                    msg: format!("time {} does not follow {}", row.t, prev.t),
                });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn load_log(path: &Path) -> Result<Vec<LogRow>> {
    read_log(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64) -> LogRow {
        LogRow {
            t,
            robot_x: 0.1 + t,
            robot_y: -0.3,
            robot_heading: 0.7,
            person_x: 1.0 / 3.0,
            person_y: 2.0,
            goal_x: 1.0,
            goal_y: 2.0,
            dtheta_deg: -12.345678901234567,
            vx: 0.5,
            vy: -0.0,
            omega: 1e-17,
            visible: true,
            tracked: false,
            collision: false,
            r_yaw: 0.2,
            r_smooth: -0.1,
            reward: 0.1,
            blocked: false,
            admissible: 121,
            min_clearance: 2.0,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let rows = vec![row(0.1), row(0.2), row(0.30000000000000004)];
        let mut buf = Vec::new();
        write_log(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&COLUMNS.join(",")));
        assert_eq!(read_log(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn empty_log_has_header() {
        let mut buf = Vec::new();
        write_log(&mut buf, &[]).unwrap();
        assert!(read_log(buf.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn malformed_row_is_numbered() {
        let mut buf = Vec::new();
        write_log(&mut buf, &[row(0.1), row(0.2)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[2] = lines[2].replacen("0.2,", "zero,", 1);
        let text = lines.join("\n");
        match read_log(text.as_bytes()) {
            Err(Error::RunLog { row, .. }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn time_must_increase() {
        let mut buf = Vec::new();
        write_log(&mut buf, &[row(0.2), row(0.1)]).unwrap();
        assert!(matches!(read_log(buf.as_slice()), Err(Error::RunLog { row: 2, .. })));
    }
}
