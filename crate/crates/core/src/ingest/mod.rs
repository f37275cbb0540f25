//! Dataset loaders, the canonical CSV format and the synthetic biased-logging generator.

mod canonical;
mod coat;
mod synthetic;
mod yahoo;

pub use canonical::{read_canonical, write_canonical, write_id_map};
pub use coat::{load_coat, parse_coat_matrix, COAT_BIASED_FILE, COAT_RANDOMIZED_FILE};
pub use synthetic::{generate_synthetic, GroundTruth, SyntheticConfig, SyntheticOutput};
pub use yahoo::{load_yahoo, load_yahoo_with_ids, IdMap, YAHOO_TEST_FILE, YAHOO_TRAIN_FILE};

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
