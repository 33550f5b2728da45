//! Resource tables compiled into the library.
//!
//! The PMI table is synthetic, derived from coarse articulatory classes.
//! Load an empirically estimated table with `--pmi` for real experiments.

use crate::corpus::Phonology;
use crate::phon::{AsjpMapping, FeatureTable};
use crate::pmialign::PmiMatrix;

pub const FEATURES_TSV: &str = include_str!("../resources/features.tsv");
pub const ASJP_TSV: &str = include_str!("../resources/asjp.tsv");
pub const PMI_TSV: &str = include_str!("../resources/pmi.tsv");
pub const ABLATION_GRID_TSV: &str = include_str!("../resources/ablation_grid.tsv");

pub fn phonology() -> Phonology {
    Phonology {
        features: FeatureTable::parse(FEATURES_TSV, "bundled features.tsv").expect("bundled feature table parses"),
        asjp: AsjpMapping::parse(ASJP_TSV, "bundled asjp.tsv").expect("bundled ASJP mapping parses"),
    }
}

pub fn pmi() -> PmiMatrix {
    PmiMatrix::parse(PMI_TSV, "bundled pmi.tsv").expect("bundled PMI table parses")
}
