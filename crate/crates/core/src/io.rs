//! CSV exchange formats: fields as `r,theta,value`, radial profiles as
//! `r,u,du,ddu`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poisson::{AnnulusGrid, PoissonError, ScalarField};
use crate::radial::RadialProfile;
use crate::scalar::Real;

const GRID_MATCH: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("IO: {0}")]
    Io(#[from] std::io::Error),
    #[error("FORMAT: {0}")]
    Format(String),
    #[error(transparent)]
    Poisson(#[from] PoissonError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    pub r: f64,
    pub theta: f64,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub r: f64,
    pub u: f64,
    pub du: f64,
    pub ddu: f64,
}

pub fn write_field_csv<T: Real, W: Write>(out: W, field: &ScalarField<T>) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    let g = field.grid();
    for j in 0..g.n_r() {
        for i in 0..g.n_theta() {
            w.serialize(FieldRecord {
                r: g.radius(j).as_f64(),
                theta: g.theta(i).as_f64(),
                value: field.get(j, i).as_f64(),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= GRID_MATCH * scale.max(1.0)
}

/// Reads a field written on an [`AnnulusGrid`]. Row order is free; the grid is
/// reconstructed from the distinct radii and angles and must be complete.
pub fn read_field_csv<T: Real, R: Read>(input: R) -> Result<ScalarField<T>, IoError> {
    let mut rdr = csv::Reader::from_reader(input);
    let rows: Vec<FieldRecord> = rdr.deserialize().collect::<Result<_, _>>()?;
    if rows.is_empty() {
        return Err(IoError::Format("no rows".into()));
    }
    let distinct = |mut v: Vec<f64>| {
        v.sort_by(|a, b| a.total_cmp(b));
        let mut out: Vec<f64> = Vec::new();
        for x in v {
            if out.last().is_none_or(|l| !close(*l, x, x.abs())) {
                out.push(x);
            }
        }
        out
    };
    let radii = distinct(rows.iter().map(|r| r.r).collect());
    let thetas = distinct(rows.iter().map(|r| r.theta).collect());
    let (n_r, n_t) = (radii.len(), thetas.len());
    if rows.len() != n_r * n_t {
        return Err(IoError::Format(format!(
            "{} rows do not form a complete {n_r} x {n_t} polar grid",
            rows.len()
        )));
    }
    let grid = AnnulusGrid::new(T::lit(radii[0]), T::lit(radii[n_r - 1]), n_r, n_t)?;
    for (j, r) in radii.iter().enumerate() {
        if !close(grid.radius(j).as_f64(), *r, *r) {
            return Err(IoError::Format(format!("radius {r} is not on a logarithmic grid")));
        }
    }
    for (i, t) in thetas.iter().enumerate() {
        if !close(grid.theta(i).as_f64(), *t, 1.0) {
            return Err(IoError::Format(format!("angle {t} is not on a uniform grid")));
        }
    }
    let mut values = vec![None; grid.len()];
    let locate = |sorted: &[f64], x: f64| {
        let k = sorted.partition_point(|v| *v < x - GRID_MATCH * x.abs().max(1.0));
        (k < sorted.len() && close(sorted[k], x, x.abs())).then_some(k)
    };
    for row in &rows {
        let (Some(j), Some(i)) = (locate(&radii, row.r), locate(&thetas, row.theta)) else {
            return Err(IoError::Format(format!(
                "row ({}, {}) is off the grid",
                row.r, row.theta
            )));
        };
        let slot = &mut values[j * n_t + i];
        if slot.is_some() {
            return Err(IoError::Format(format!("duplicate node ({}, {})", row.r, row.theta)));
        }
        *slot = Some(T::lit(row.value));
    }
    let values = values.into_iter().map(|v| v.expect("complete grid")).collect();
    Ok(ScalarField::new(grid, values)?)
}

pub fn write_profile_csv<T: Real, W: Write>(out: W, profile: &RadialProfile<T>) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    for i in 0..profile.len() {
        w.serialize(ProfileRecord {
            r: profile.r[i].as_f64(),
            u: profile.u[i].as_f64(),
            du: profile.du[i].as_f64(),
            ddu: profile.ddu[i].as_f64(),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_profile_csv<R: Read>(input: R) -> Result<Vec<ProfileRecord>, IoError> {
    let mut rdr = csv::Reader::from_reader(input);
    let rows: Vec<ProfileRecord> = rdr.deserialize().collect::<Result<_, _>>()?;
    if rows.windows(2).any(|w| !(w[1].r > w[0].r)) {
        return Err(IoError::Format("profile radii must be strictly increasing".into()));
    }
    Ok(rows)
}
