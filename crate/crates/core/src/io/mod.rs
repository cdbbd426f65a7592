//! File formats and rendering: the TFLD tensor-field text format, voxel block extraction,
//! dataset and factorization JSON, error CSV and SVG glyphs.

mod blocks;
mod formats;
mod svg;
mod tfld;

pub use blocks::{extract_blocks, BlockDataset};
pub use formats::{
    read_dataset_json, read_factorization_json, read_report_csv, write_dataset_json, write_factorization_json,
    write_report_csv,
};
pub use svg::{ellipse_of, fractional_anisotropy, ramp_color, render_glyphs, GlyphOptions};
pub use tfld::{parse_tfld, write_tfld, TensorField};
