use std::io::{Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::blocks::{BlockDataset, DatasetFile};
use crate::error::{Error, Result};
use crate::euclid::TangentBasis;
use crate::eval::ErrorReport;
use crate::manifold::{Element, ManifoldDescriptor, Point};
use crate::nmdf::{Factorization, Method, Params};

pub fn write_dataset_json(ds: &BlockDataset, mut w: impl Write) -> Result<()> {
    serde_json::to_writer(&mut w, &DatasetFile::from(ds))?;
    writeln!(w)?;
    Ok(())
}

pub fn read_dataset_json(r: impl Read) -> Result<BlockDataset> {
    let file: DatasetFile = serde_json::from_reader(r)?;
    BlockDataset::try_from(file)
}

#[derive(Serialize, Deserialize)]
struct FactorizationFile {
    descriptor: ManifoldDescriptor,
    basepoint: Element,
    #[serde(rename = "H")]
    h: Vec<Vec<f64>>,
    #[serde(rename = "F")]
    f: Vec<Vec<f64>>,
    rank: usize,
    method: Method,
    seed: u64,
    params: Params,
    objective_trace: Vec<f64>,
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matrix(rows: Vec<Vec<f64>>, ncols: usize, name: &str) -> Result<Array2<f64>> {
    let nrows = rows.len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::ShapeMismatch(format!("{name} rows must all have {ncols} entries")));
    }
    Array2::from_shape_vec((nrows, ncols), rows.into_iter().flatten().collect())
        .map_err(|e| Error::ShapeMismatch(e.to_string()))
}

/// Writes `H`, `F`, the base point and the run parameters; tangent and manifold factors
/// are recomputed on load. Only canonical-basis factorizations can be stored.
pub fn write_factorization_json(fac: &Factorization, mut w: impl Write) -> Result<()> {
    if !fac.basis.is_canonical() {
        return Err(Error::InvalidInput("only canonical-basis factorizations can be serialized".into()));
    }
    let file = FactorizationFile {
        descriptor: fac.basepoint.descriptor().clone(),
        basepoint: fac.basepoint.value().clone(),
        h: rows(&fac.h),
        f: rows(&fac.f),
        rank: fac.rank(),
        method: fac.method,
        seed: fac.params.seed,
        params: fac.params,
        objective_trace: fac.objective_trace.clone(),
    };
    serde_json::to_writer_pretty(&mut w, &file)?;
    writeln!(w)?;
    Ok(())
}

pub fn read_factorization_json(r: impl Read) -> Result<Factorization> {
    let file: FactorizationFile = serde_json::from_reader(r)?;
    let q = Point::new(file.descriptor, file.basepoint)?;
    let h = matrix(file.h, file.rank, "H")?;
    let f = matrix(file.f, q.dim(), "F")?;
    if f.nrows() != file.rank {
        return Err(Error::ShapeMismatch(format!("F has {} rows for rank {}", f.nrows(), file.rank)));
    }
    let mut params = file.params;
    params.seed = file.seed;
    Factorization::assemble(file.method, params, q, TangentBasis::canonical(), h, f, file.objective_trace)
}

/// Error CSV with header `rank,exact,tangent,cc,wall_time_s`. Wall times are written as 0
/// unless `timing` is set, keeping the output a function of the inputs.
pub fn write_report_csv(reports: &[ErrorReport], timing: bool, w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["rank", "exact", "tangent", "cc", "wall_time_s"]).map_err(csv_err)?;
    for r in reports {
        let time = if timing { r.wall_time_s } else { 0.0 };
        out.write_record([
            r.rank.to_string(),
            r.exact.to_string(),
            r.tangent.to_string(),
            r.cc.to_string(),
            time.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a report CSV written by [`write_report_csv`].
pub fn read_report_csv(r: impl Read) -> Result<Vec<ErrorReport>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["rank", "exact", "tangent", "cc", "wall_time_s"] {
        return Err(Error::Parse { line: 1, reason: format!("unexpected header {headers:?}") });
    }
    rdr.deserialize().map(|rec| rec.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse { line, reason: e.to_string() }
}
