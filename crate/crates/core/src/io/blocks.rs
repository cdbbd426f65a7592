use serde::{Deserialize, Serialize};

use super::TensorField;
use crate::error::{Error, Result};
use crate::manifold::{Element, ManifoldDescriptor, Point};

/// Unfolded voxel blocks, one power-manifold point per block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDataset {
    pub block: [usize; 3],
    pub descriptor: ManifoldDescriptor,
    pub points: Vec<Point>,
    /// Grid coordinates of the first voxel of every block.
    pub origins: Vec<[usize; 3]>,
}

/// Tiles the grid into non-overlapping `block`-sized boxes anchored at multiples of the block
/// size and keeps the boxes whose voxels are all valid. Partial boxes at the far edges are
/// dropped. Components within a block run x-major, then y, then z.
pub fn extract_blocks(field: &TensorField, block: [usize; 3]) -> Result<BlockDataset> {
    if block.contains(&0) {
        return Err(Error::InvalidInput(format!("block dimensions must be positive, got {block:?}")));
    }
    let m = block.iter().product();
    let descriptor = ManifoldDescriptor::power(ManifoldDescriptor::spd(field.n), m);
    let counts: Vec<usize> = (0..3).map(|a| field.dims[a] / block[a]).collect();
    let mut points = Vec::new();
    let mut origins = Vec::new();
    for bx in 0..counts[0] {
        for by in 0..counts[1] {
            for bz in 0..counts[2] {
                let origin = [bx * block[0], by * block[1], bz * block[2]];
                let mut parts = Vec::with_capacity(m);
                let mut valid = true;
                'voxels: for x in 0..block[0] {
                    for y in 0..block[1] {
                        for z in 0..block[2] {
                            let idx = field.index(origin[0] + x, origin[1] + y, origin[2] + z);
                            if !field.mask[idx] {
                                valid = false;
                                break 'voxels;
                            }
                            parts.push(Element::Sym(field.voxels[idx].clone()));
                        }
                    }
                }
                if valid {
                    points.push(Point::new(descriptor.clone(), Element::Product(parts))?);
                    origins.push(origin);
                }
            }
        }
    }
    Ok(BlockDataset { block, descriptor, points, origins })
}

#[derive(Serialize, Deserialize)]
pub(crate) struct DatasetFile {
    pub descriptor: ManifoldDescriptor,
    pub block: [usize; 3],
    pub origins: Vec<[usize; 3]>,
    pub points: Vec<Element>,
}

impl From<&BlockDataset> for DatasetFile {
    fn from(ds: &BlockDataset) -> Self {
        DatasetFile {
            descriptor: ds.descriptor.clone(),
            block: ds.block,
            origins: ds.origins.clone(),
            points: ds.points.iter().map(|p| p.value().clone()).collect(),
        }
    }
}

impl TryFrom<DatasetFile> for BlockDataset {
    type Error = Error;
    fn try_from(f: DatasetFile) -> Result<Self> {
        if f.origins.len() != f.points.len() {
            return Err(Error::InvalidInput(format!("{} origins for {} points", f.origins.len(), f.points.len())));
        }
        let points = f.points.into_iter().map(|v| Point::new(f.descriptor.clone(), v)).collect::<Result<_>>()?;
        Ok(BlockDataset { block: f.block, descriptor: f.descriptor, points, origins: f.origins })
    }
}
