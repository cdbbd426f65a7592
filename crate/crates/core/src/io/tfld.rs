use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_sym, packed_len, pd_tolerance, SymMatrix};

/// Grid of symmetric matrices, stored x-major, then y, then z.
///
/// Masked-out voxels hold the zero matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorField {
    pub dims: [usize; 3],
    pub n: usize,
    pub voxels: Vec<SymMatrix>,
    pub mask: Vec<bool>,
}

impl TensorField {
    /// Field with every voxel masked out.
    pub fn empty(dims: [usize; 3], n: usize) -> Result<Self> {
        if dims.contains(&0) || n == 0 {
            return Err(Error::InvalidInput(format!("invalid field shape {dims:?}, n={n}")));
        }
        let len = dims.iter().product();
        Ok(TensorField { dims, n, voxels: vec![SymMatrix::zeros(n); len], mask: vec![false; len] })
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (x * self.dims[1] + y) * self.dims[2] + z
    }

    /// Stores `value` at `(x, y, z)`; the voxel is kept only if it is positive definite.
    /// Returns whether it was kept.
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: SymMatrix) -> Result<bool> {
        if value.order() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "voxel of order {} in a field of order {}",
                value.order(),
                self.n
            )));
        }
        let idx = self.index(x, y, z);
        let ok = is_pd(&value)?;
        if ok {
            self.voxels[idx] = value;
        } else {
            self.voxels[idx] = SymMatrix::zeros(self.n);
        }
        self.mask[idx] = ok;
        Ok(ok)
    }

    pub fn unset(&mut self, x: usize, y: usize, z: usize) {
        let idx = self.index(x, y, z);
        self.voxels[idx] = SymMatrix::zeros(self.n);
        self.mask[idx] = false;
    }
}

fn is_pd(s: &SymMatrix) -> Result<bool> {
    let e = eig_sym(s)?;
    Ok(e.min_value() > pd_tolerance(e.max_value()))
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse { line, reason: reason.into() }
}

/// Reads a TFLD v1 stream. Blank lines and lines starting with `#` are ignored; voxels that
/// are not positive definite are masked out.
pub fn parse_tfld(reader: impl BufRead) -> Result<TensorField> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = || -> Result<Option<(usize, String)>> {
        for (no, line) in lines.by_ref() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Ok(Some((no, t.to_string())));
        }
        Ok(None)
    };

    let (no, header) = next()?.ok_or_else(|| parse_err(1, "empty input"))?;
    let mut it = header.split_whitespace();
    if it.next() != Some("TFLD") {
        return Err(parse_err(no, "missing TFLD header"));
    }
    match it.next() {
        Some("1") if it.next().is_none() => {}
        Some(v) => return Err(Error::Version(v.to_string())),
        None => return Err(parse_err(no, "missing format version")),
    }

    let (no, dims_line) = next()?.ok_or_else(|| parse_err(no + 1, "missing dims line"))?;
    let fields: Vec<&str> = dims_line.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "dims" {
        return Err(parse_err(no, "expected `dims X Y Z n`"));
    }
    let nums: Vec<usize> = fields[1..]
        .iter()
        .map(|f| f.parse::<usize>().map_err(|_| parse_err(no, format!("bad dimension {f:?}"))))
        .collect::<Result<_>>()?;
    if nums.contains(&0) {
        return Err(parse_err(no, "dimensions must be positive"));
    }
    let mut field = TensorField::empty([nums[0], nums[1], nums[2]], nums[3])?;
    let entries = packed_len(field.n);
    let mut seen = vec![false; field.len()];

    while let Some((no, line)) = next()? {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] != "voxel" {
            return Err(parse_err(no, format!("unexpected record {:?}", fields[0])));
        }
        if fields.len() != 4 + entries {
            return Err(parse_err(no, format!("expected 3 coordinates and {entries} entries")));
        }
        let mut xyz = [0usize; 3];
        for a in 0..3 {
            xyz[a] = fields[1 + a].parse().map_err(|_| parse_err(no, format!("bad coordinate {:?}", fields[1 + a])))?;
            if xyz[a] >= field.dims[a] {
                return Err(parse_err(no, format!("coordinate {} out of range", xyz[a])));
            }
        }
        let upper: Vec<f64> = fields[4..]
            .iter()
            .map(|f| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(parse_err(no, format!("bad value {f:?}"))),
            })
            .collect::<Result<_>>()?;
        let idx = field.index(xyz[0], xyz[1], xyz[2]);
        if std::mem::replace(&mut seen[idx], true) {
            return Err(parse_err(no, format!("duplicate voxel {xyz:?}")));
        }
        let value = SymMatrix::from_upper(field.n, upper).map_err(|e| parse_err(no, e.to_string()))?;
        if !field.set(xyz[0], xyz[1], xyz[2], value)? {
            log::debug!("voxel {xyz:?} on line {no} is not positive definite; masked out");
        }
    }
    Ok(field)
}

/// Writes the field in TFLD v1 with 17 significant digits, valid voxels only.
pub fn write_tfld(field: &TensorField, mut w: impl Write) -> Result<()> {
    writeln!(w, "TFLD 1")?;
    writeln!(w, "dims {} {} {} {}", field.dims[0], field.dims[1], field.dims[2], field.n)?;
    for x in 0..field.dims[0] {
        for y in 0..field.dims[1] {
            for z in 0..field.dims[2] {
                let idx = field.index(x, y, z);
                if !field.mask[idx] {
                    continue;
                }
                write!(w, "voxel {x} {y} {z}")?;
                for v in field.voxels[idx].upper() {
                    write!(w, " {v:.16e}")?;
                }
                writeln!(w)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
