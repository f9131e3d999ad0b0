//! Observation sets and their noise models.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ObsPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    /// Many locations at one time.
    Spatial,
    /// One location at many times.
    Time,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    IidGaussian { sigma: f64 },
    /// Dense row-major covariance, already scaled and floored.
    Covariance { matrix: Vec<f64>, variance_floor: f64 },
}

impl NoiseModel {
    pub fn validate(&self, n_obs: usize) -> Result<()> {
        match self {
            NoiseModel::IidGaussian { sigma } => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(Error::InvalidParameter(format!("noise sigma must be positive, got {sigma}")));
                }
            }
            NoiseModel::Covariance { matrix, variance_floor } => {
                if matrix.len() != n_obs * n_obs {
                    return Err(Error::DimensionMismatch {
                        context: "covariance matrix",
                        expected: n_obs * n_obs,
                        got: matrix.len(),
                    });
                }
                if matrix.iter().any(|v| !v.is_finite()) || !variance_floor.is_finite() {
                    return Err(Error::NonFinite("covariance matrix".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub points: Vec<ObsPoint>,
    pub values: Vec<f64>,
    pub noise: NoiseModel,
    pub kind: SeriesKind,
}

impl ObservationSet {
    pub fn new(points: Vec<ObsPoint>, values: Vec<f64>, noise: NoiseModel, kind: SeriesKind) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch {
                context: "observation values",
                expected: points.len(),
                got: values.len(),
            });
        }
        if points.is_empty() {
            return Err(Error::InvalidParameter("observation set is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observation values".into()));
        }
        if points.iter().any(|p| !(p.t.is_finite() && p.t >= 0.0 && p.x.is_finite())) {
            return Err(Error::InvalidParameter("observation points need finite x and t >= 0".into()));
        }
        noise.validate(points.len())?;
        Ok(Self {
            points,
            values,
            noise,
            kind,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_domain(&self, length: f64) -> Result<()> {
        match self.points.iter().find(|p| !(0.0..=length).contains(&p.x)) {
            Some(p) => Err(Error::InvalidParameter(format!("observation x={} outside [0, {length}]", p.x))),
            None => Ok(()),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_points_csv(w, &self.points, &self.values)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    x: f64,
    t: f64,
    value: f64,
}

pub fn write_points_csv<W: Write>(w: W, points: &[ObsPoint], values: &[f64]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for (p, &value) in points.iter().zip(values) {
        wr.serialize(Row { x: p.x, t: p.t, value })?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads `x,t,value` rows.
pub fn read_points_csv<R: Read>(r: R) -> Result<(Vec<ObsPoint>, Vec<f64>)> {
    let mut rd = csv::Reader::from_reader(r);
    let mut points = Vec::new();
    let mut values = Vec::new();
    for row in rd.deserialize() {
        let row: Row = row?;
        points.push(ObsPoint::new(row.x, row.t));
        values.push(row.value);
    }
    Ok((points, values))
}

pub fn load_points_csv(path: &Path) -> Result<(Vec<ObsPoint>, Vec<f64>)> {
    read_points_csv(std::fs::File::open(path)?)
}

/// Headerless square matrix, one row per line.
pub fn write_matrix_csv<W: Write>(w: W, matrix: &[f64], n: usize) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in matrix.chunks(n) {
        wr.write_record(row.iter().map(|v| format!("{v:e}")))?;
    }
    wr.flush()?;
    Ok(())
}

/// Returns the row-major matrix and its dimension.
pub fn read_matrix_csv<R: Read>(r: R) -> Result<(Vec<f64>, usize)> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
    let mut data = Vec::new();
    let mut rows = 0;
    for rec in rd.records() {
        let rec = rec?;
        for field in rec.iter() {
            data.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("matrix entry {field:?}: {e}")))?,
            );
        }
        rows += 1;
    }
    if data.len() != rows * rows {
        return Err(Error::Parse(format!("matrix has {rows} rows but {} entries", data.len())));
    }
    Ok((data, rows))
}

/// `n` evenly spaced locations on `[0, length)` at time `t`.
pub fn spatial_series(n: usize, length: f64, t: f64) -> Vec<ObsPoint> {
    (0..n).map(|i| ObsPoint::new(length * i as f64 / n as f64, t)).collect()
}

/// `n` evenly spaced times on `[0, t_end]` at location `x`.
pub fn time_series(n: usize, x: f64, t_end: f64) -> Vec<ObsPoint> {
    match n {
        0 => Vec::new(),
        1 => vec![ObsPoint::new(x, 0.0)],
        _ => (0..n)
            .map(|i| ObsPoint::new(x, t_end * i as f64 / (n - 1) as f64))
            .collect(),
    }
}
