use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use crate::data::{Dataset, FeedbackKind, Interaction, Source};
use crate::error::{Error, Result};

pub const YAHOO_TRAIN_FILE: &str = "ydata-ymusic-rating-study-v1-u-train.txt";
pub const YAHOO_TEST_FILE: &str = "ydata-ymusic-rating-study-v1-u-test.txt";

/// Dense index -> raw id, for users and items.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IdMap {
    pub users: Vec<u64>,
    pub items: Vec<u64>,
}

struct RawRow {
    user: u64,
    item: u64,
    rating: u8,
}

fn parse_file(path: &Path) -> Result<Vec<RawRow>> {
    let text = super::read_to_string(path)?;
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: String| Error::parse(path, lineno + 1, msg);
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 fields, got {}", fields.len())));
        }
        let id = |s: &str| -> Result<u64> {
            match s.parse::<u64>() {
                Ok(v) if v >= 1 => Ok(v),
                _ => Err(bad(format!("bad 1-based id `{s}`"))),
            }
        };
        let user = id(fields[0])?;
        let item = id(fields[1])?;
        let rating: u8 = match fields[2].parse() {
            Ok(r) if (1..=5).contains(&r) => r,
            _ => return Err(bad(format!("rating `{}` outside 1..5", fields[2]))),
        };
        if !seen.insert((user, item)) {
            return Err(Error::DuplicateTriple {
                user: (user - 1) as usize,
                item: (item - 1) as usize,
            });
        }
        rows.push(RawRow { user, item, rating });
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(rows)
}

fn densify(ids: BTreeSet<u64>) -> (Vec<u64>, HashMap<u64, usize>) {
    let raw: Vec<u64> = ids.into_iter().collect();
    let index = raw.iter().enumerate().map(|(k, &r)| (r, k)).collect();
    (raw, index)
}

/// Loads Yahoo!R3 and returns the raw-id mapping as well.
///
/// Ids from both files are pooled, sorted and densified, so the public
/// release (contiguous 1-based ids) maps to `raw - 1`.
pub fn load_yahoo_with_ids(train: impl AsRef<Path>, test: impl AsRef<Path>) -> Result<(Dataset, Dataset, IdMap)> {
    let train_rows = parse_file(train.as_ref())?;
    let test_rows = parse_file(test.as_ref())?;
    let all = || train_rows.iter().chain(test_rows.iter());
    let (users, user_index) = densify(all().map(|r| r.user).collect());
    let (items, item_index) = densify(all().map(|r| r.item).collect());
    let convert = |rows: &[RawRow], source| -> Vec<Interaction> {
        rows.iter()
            .map(|r| Interaction::new(user_index[&r.user], item_index[&r.item], r.rating as f64, source))
            .collect()
    };
    let make = |interactions| Dataset {
        name: "yahoo-r3".to_string(),
        num_users: users.len(),
        num_items: items.len(),
        kind: FeedbackKind::Explicit,
        rating_min: 1.0,
        rating_max: 5.0,
        interactions,
    };
    let biased = make(convert(&train_rows, Source::BiasedLog));
    let randomized = make(convert(&test_rows, Source::Randomized));
    Ok((biased, randomized, IdMap { users, items }))
}

/// Loads Yahoo!R3: the train file is the biased log, the test file the randomized one.
pub fn load_yahoo(train: impl AsRef<Path>, test: impl AsRef<Path>) -> Result<(Dataset, Dataset)> {
    let (b, r, _) = load_yahoo_with_ids(train, test)?;
    Ok((b, r))
}
