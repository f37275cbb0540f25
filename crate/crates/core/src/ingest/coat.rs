use std::path::Path;

use crate::data::{Dataset, FeedbackKind, Interaction, Source};
use crate::error::{Error, Result};

/// Self-selected ratings in the public release.
pub const COAT_BIASED_FILE: &str = "train.ascii";
/// Ratings on uniformly assigned items in the public release.
pub const COAT_RANDOMIZED_FILE: &str = "test.ascii";

/// Parses a dense whitespace-separated rating matrix, one user per line.
///
/// Entry 0 means unobserved; 1..=5 become interactions tagged `source`.
/// Returns the matrix shape alongside the interactions.
pub fn parse_coat_matrix(text: &str, source: Source, origin: &Path) -> Result<(usize, usize, Vec<Interaction>)> {
    let mut width: Option<usize> = None;
    let mut users = 0;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = 0;
        for (item, tok) in line.split_whitespace().enumerate() {
            let v: u8 = tok
                .parse()
                .map_err(|_| Error::parse(origin, lineno + 1, format!("bad entry `{tok}`")))?;
            if v > 5 {
                return Err(Error::parse(origin, lineno + 1, format!("entry {v} outside 0..5")));
            }
            if v > 0 {
                out.push(Interaction::new(users, item, v as f64, source));
            }
            cols += 1;
        }
        match width {
            None => width = Some(cols),
            Some(w) if w != cols => {
                return Err(Error::parse(
                    origin,
                    lineno + 1,
                    format!("ragged row: {cols} entries, expected {w}"),
                ))
            }
            _ => {}
        }
        users += 1;
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok((users, width.unwrap_or(0), out))
}

/// Loads the public COAT release from `dir`.
///
/// Returns `(biased, randomized)`, both explicit on a 1..5 scale and sharing
/// the matrix shape (290 users x 300 items for the public files).
pub fn load_coat(dir: impl AsRef<Path>) -> Result<(Dataset, Dataset)> {
    let dir = dir.as_ref();
    let load = |file: &str, source: Source| {
        let path = dir.join(file);
        let text = super::read_to_string(&path)?;
        parse_coat_matrix(&text, source, &path)
    };
    let (bu, bi, biased) = load(COAT_BIASED_FILE, Source::BiasedLog)?;
    let (ru, ri, randomized) = load(COAT_RANDOMIZED_FILE, Source::Randomized)?;
    if (bu, bi) != (ru, ri) {
        return Err(Error::InvalidArgument(format!(
            "COAT matrices disagree on shape: {bu}x{bi} vs {ru}x{ri}"
        )));
    }
    let make = |name: &str, interactions| Dataset {
        name: name.to_string(),
        num_users: bu,
        num_items: bi,
        kind: FeedbackKind::Explicit,
        rating_min: 1.0,
        rating_max: 5.0,
        interactions,
    };
    Ok((make("coat", biased), make("coat", randomized)))
}
