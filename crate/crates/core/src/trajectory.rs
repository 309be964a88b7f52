//! Recorded trajectories with their diagnostic columns, and the CSV format
//! they are persisted in.
//!
//! Columns: `t,S,x,S_r,x_r,D,u1,u2,z_tilde,xi_tilde,L1,L2,L3,V`, followed by
//! `y_1..y_n,L4` for multi-species runs. Numbers are written in scientific
//! notation with 17 significant digits, so a reload is bit-exact.

use std::io::{Read, Write};

use crate::error::{ChemostatError, Result};
use crate::model::{ErrorCoords, State};

pub const BASE_COLUMNS: [&str; 14] = [
    "t", "S", "x", "S_r", "x_r", "D", "u1", "u2", "z_tilde", "xi_tilde", "L1", "L2", "L3", "V",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub s: f64,
    pub x: f64,
    pub s_ref: f64,
    pub x_ref: f64,
    pub dilution: f64,
    pub u1: f64,
    pub u2: f64,
    pub z_tilde: f64,
    pub xi_tilde: f64,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub v: f64,
    pub y: Vec<f64>,
    pub l4: Option<f64>,
}

impl Sample {
    pub fn state(&self) -> State {
        State::new(self.s, self.x)
    }

    pub fn error(&self) -> ErrorCoords {
        ErrorCoords::new(self.z_tilde, self.xi_tilde)
    }

    pub fn u_norm(&self) -> f64 {
        self.u1.hypot(self.u2)
    }

    /// `(S, x, y_1, ..)`.
    pub fn state_vec(&self) -> Vec<f64> {
        let mut v = vec![self.s, self.x];
        v.extend_from_slice(&self.y);
        v
    }

    fn base_values(&self) -> [f64; 14] {
        [
            self.t,
            self.s,
            self.x,
            self.s_ref,
            self.x_ref,
            self.dilution,
            self.u1,
            self.u2,
            self.z_tilde,
            self.xi_tilde,
            self.l1,
            self.l2,
            self.l3,
            self.v,
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryMeta {
    pub scenario_id: String,
    /// Steps split by the integrator's positivity guard.
    pub positivity_retries: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Number of extra species columns.
    pub species: usize,
    pub meta: TrajectoryMeta,
}

fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

impl Trajectory {
    pub fn is_multi(&self) -> bool {
        self.samples.first().is_some_and(|s| s.l4.is_some())
    }

    pub fn first(&self) -> Result<&Sample> {
        self.samples
            .first()
            .ok_or_else(|| ChemostatError::MissingData("trajectory has no samples".into()))
    }

    pub fn last(&self) -> Result<&Sample> {
        self.samples
            .last()
            .ok_or_else(|| ChemostatError::MissingData("trajectory has no samples".into()))
    }

    pub fn header(&self) -> Vec<String> {
        let mut cols: Vec<String> = BASE_COLUMNS.iter().map(|c| c.to_string()).collect();
        if self.is_multi() {
            cols.extend((1..=self.species).map(|i| format!("y_{i}")));
            cols.push("L4".into());
        }
        cols
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let header = self.header();
        let idx = header.iter().position(|c| c == name)?;
        Some(
            self.samples
                .iter()
                .map(|s| {
                    if idx < BASE_COLUMNS.len() {
                        s.base_values()[idx]
                    } else if idx < BASE_COLUMNS.len() + self.species {
                        s.y[idx - BASE_COLUMNS.len()]
                    } else {
                        s.l4.unwrap_or(f64::NAN)
                    }
                })
                .collect(),
        )
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(self.header()).map_err(csv_error)?;
        let multi = self.is_multi();
        let mut row: Vec<String> = Vec::with_capacity(BASE_COLUMNS.len() + self.species + 1);
        for s in &self.samples {
            row.clear();
            row.extend(s.base_values().iter().map(|&v| format_value(v)));
            if multi {
                row.extend(s.y.iter().map(|&v| format_value(v)));
                row.push(format_value(s.l4.unwrap_or(f64::NAN)));
            }
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is ASCII")
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header: Vec<String> = r.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
        for (i, name) in BASE_COLUMNS.iter().enumerate() {
            if header.get(i).map(String::as_str) != Some(*name) {
                return Err(ChemostatError::Parse(format!(
                    "expected column {} to be '{name}', header is {header:?}",
                    i + 1
                )));
            }
        }
        let extra = &header[BASE_COLUMNS.len()..];
        let species = match extra {
            [] => 0,
            [ys @ .., last] if last == "L4" => {
                for (i, name) in ys.iter().enumerate() {
                    if *name != format!("y_{}", i + 1) {
                        return Err(ChemostatError::Parse(format!("unexpected column '{name}'")));
                    }
                }
                ys.len()
            }
            _ => {
                return Err(ChemostatError::Parse(format!(
                    "unexpected trailing columns {extra:?}"
                )))
            }
        };
        let multi = !extra.is_empty();
        let mut samples = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record.map_err(csv_error)?;
            if record.len() != header.len() {
                return Err(ChemostatError::Parse(format!(
                    "row {} has {} fields, expected {}",
                    line + 2,
                    record.len(),
                    header.len()
                )));
            }
            let values = record
                .iter()
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|_| {
                        ChemostatError::Parse(format!("row {}: '{f}' is not a number", line + 2))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            let b = &values[..BASE_COLUMNS.len()];
            samples.push(Sample {
                t: b[0],
                s: b[1],
                x: b[2],
                s_ref: b[3],
                x_ref: b[4],
                dilution: b[5],
                u1: b[6],
                u2: b[7],
                z_tilde: b[8],
                xi_tilde: b[9],
                l1: b[10],
                l2: b[11],
                l3: b[12],
                v: b[13],
                y: values[BASE_COLUMNS.len()..BASE_COLUMNS.len() + species].to_vec(),
                l4: multi.then(|| values[values.len() - 1]),
            });
        }
        if let Some(w) = samples.windows(2).find(|w| !(w[1].t > w[0].t)) {
            return Err(ChemostatError::Parse(format!(
                "time column must be strictly increasing (t={} then t={})",
                w[0].t, w[1].t
            )));
        }
        Ok(Self {
            samples,
            species,
            meta: TrajectoryMeta::default(),
        })
    }
}

fn csv_error(e: csv::Error) -> ChemostatError {
    ChemostatError::Parse(e.to_string())
}
