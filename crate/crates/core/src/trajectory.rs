//! Trajectory CSV: `t,id,mode,x,y,theta,v`, plus an optional `theta_road`
//! column accepted on input.

use std::io::{Read, Write};

use thiserror::Error;

use crate::geometry::ModeClass;

pub const HEADER: [&str; 7] = ["t", "id", "mode", "x", "y", "theta", "v"];

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("line {line}: time does not increase for agent {id}")]
    NonIncreasingTime { line: u64, id: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub id: u32,
    pub mode: ModeClass,
    pub x: f64,
    pub y: f64,
    /// Heading angle in radians.
    pub theta: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryRecord {
    pub rows: Vec<TrajectoryRow>,
    /// Per-row road azimuth, when the input carried a `theta_road` column.
    pub road_azimuth: Option<Vec<f64>>,
}

impl TrajectoryRecord {
    pub fn from_rows(rows: Vec<TrajectoryRow>) -> Self {
        Self {
            rows,
            road_azimuth: None,
        }
    }

    /// Agent ids in order of first appearance.
    pub fn ids(&self) -> Vec<u32> {
        let mut seen = std::collections::BTreeSet::new();
        self.rows
            .iter()
            .filter(|r| seen.insert(r.id))
            .map(|r| r.id)
            .collect()
    }

    /// Row indices of one agent, in file order.
    pub fn indices_of(&self, id: u32) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.id == id)
            .map(|(n, _)| n)
            .collect()
    }

    /// Distinct recorded times, ascending.
    pub fn times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.rows.iter().map(|r| r.t).collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", HEADER.join(","))?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.t, r.id, r.mode, r.x, r.y, r.theta, r.v
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    /// Parses a trajectory CSV. Columns are located by header name, extra
    /// columns are ignored. Time must strictly increase per agent.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, RecordError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = reader.headers()?.clone();
        let col = |name: &'static str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or(RecordError::MissingColumn(name))
        };
        let idx = [
            col("t")?,
            col("id")?,
            col("mode")?,
            col("x")?,
            col("y")?,
            col("theta")?,
            col("v")?,
        ];
        let road_col = headers.iter().position(|h| h == "theta_road");

        let mut rows = Vec::new();
        let mut road = road_col.map(|_| Vec::new());
        let mut last_t = std::collections::HashMap::new();
        for result in reader.records() {
            let record = result?;
            let line = record.position().map_or(0, |p| p.line());
            let field = |n: usize, name: &str| -> Result<&str, RecordError> {
                record.get(n).ok_or_else(|| RecordError::Malformed {
                    line,
                    message: format!("missing field `{name}`"),
                })
            };
            let float = |n: usize, name: &str| -> Result<f64, RecordError> {
                let raw = field(n, name)?;
                let v: f64 = raw.parse().map_err(|_| RecordError::Malformed {
                    line,
                    message: format!("`{name}` is not a number: `{raw}`"),
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(RecordError::Malformed {
                        line,
                        message: format!("`{name}` is not finite"),
                    })
                }
            };
            let raw_id = field(idx[1], "id")?;
            let id: u32 = raw_id.parse().map_err(|_| RecordError::Malformed {
                line,
                message: format!("`id` is not a non-negative integer: `{raw_id}`"),
            })?;
            let mode: ModeClass = field(idx[2], "mode")?
                .parse()
                .map_err(|message| RecordError::Malformed { line, message })?;
            let row = TrajectoryRow {
                t: float(idx[0], "t")?,
                id,
                mode,
                x: float(idx[3], "x")?,
                y: float(idx[4], "y")?,
                theta: float(idx[5], "theta")?,
                v: float(idx[6], "v")?,
            };
            if let Some(prev) = last_t.insert(id, row.t) {
                if row.t <= prev {
                    return Err(RecordError::NonIncreasingTime { line, id });
                }
            }
            if let (Some(col), Some(road)) = (road_col, road.as_mut()) {
                road.push(float(col, "theta_road")?);
            }
            rows.push(row);
        }
        Ok(Self {
            rows,
            road_azimuth: road,
        })
    }
}
