//! `user,item,rating,source` CSV plus a `.meta` sidecar holding the header
//! fields a bare CSV cannot express (name, shape, kind, scale).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ini::Ini;

use crate::data::{Dataset, FeedbackKind, Interaction, Source};
use crate::error::{Error, Result};

const HEADER: [&str; 4] = ["user", "item", "rating", "source"];

pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta")
}

pub fn write_canonical(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    w.write_record(HEADER)?;
    for x in &ds.interactions {
        w.write_record([
            x.user.to_string(),
            x.item.to_string(),
            x.rating.to_string(),
            x.source.as_str().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let mut meta = Ini::new();
    meta.with_section(Some("dataset"))
        .set("name", ds.name.as_str())
        .set("num_users", ds.num_users.to_string())
        .set("num_items", ds.num_items.to_string())
        .set("kind", ds.kind.as_str())
        .set("rating_min", ds.rating_min.to_string())
        .set("rating_max", ds.rating_max.to_string());
    let mp = meta_path(path);
    meta.write_to_file(&mp).map_err(|e| Error::io(mp, e))?;
    Ok(())
}

fn meta_field<T: std::str::FromStr>(ini: &Ini, path: &Path, key: &str) -> Result<T> {
    let raw = ini
        .section(Some("dataset"))
        .and_then(|s| s.get(key))
        .ok_or_else(|| Error::parse(path, 0, format!("missing `{key}`")))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::parse(path, 0, format!("bad value for `{key}`: {raw}")))
}

/// Reads a canonical CSV. Without a sidecar the shape is inferred from the
/// largest ids and the scale from the ratings ({0,1} => implicit, else 1..5
/// explicit widened to cover what is present).
pub fn read_canonical(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = r.headers()?.clone();
    if header.iter().map(str::trim).ne(HEADER) {
        return Err(Error::parse(path, 1, format!("expected header {}", HEADER.join(","))));
    }
    let mut interactions = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        if rec.len() != 4 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 4 fields, got {}", rec.len()),
            ));
        }
        let field = |i: usize| rec[i].trim();
        let user = field(0)
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad user `{}`", field(0))))?;
        let item = field(1)
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad item `{}`", field(1))))?;
        let rating: f64 = field(2)
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad rating `{}`", field(2))))?;
        let source: Source = field(3)
            .parse()
            .map_err(|e: Error| Error::parse(path, line, e.to_string()))?;
        interactions.push(Interaction::new(user, item, rating, source));
    }
    if interactions.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mp = meta_path(path);
    let ds = if mp.exists() {
        let ini = Ini::load_from_file(&mp).map_err(|e| Error::parse(&mp, 0, e.to_string()))?;
        Dataset {
            name: meta_field(&ini, &mp, "name")?,
            num_users: meta_field(&ini, &mp, "num_users")?,
            num_items: meta_field(&ini, &mp, "num_items")?,
            kind: meta_field(&ini, &mp, "kind")?,
            rating_min: meta_field(&ini, &mp, "rating_min")?,
            rating_max: meta_field(&ini, &mp, "rating_max")?,
            interactions,
        }
    } else {
        infer(path, interactions)
    };
    let violations = ds.validate();
    if !violations.is_empty() {
        let shown: Vec<String> = violations.iter().take(5).map(|v| v.to_string()).collect();
        return Err(Error::InvalidArgument(format!(
            "{}: {} invariant violation(s): {}",
            path.display(),
            violations.len(),
            shown.join("; ")
        )));
    }
    Ok(ds)
}

fn infer(path: &Path, interactions: Vec<Interaction>) -> Dataset {
    let num_users = interactions.iter().map(|x| x.user).max().unwrap_or(0) + 1;
    let num_items = interactions.iter().map(|x| x.item).max().unwrap_or(0) + 1;
    let binary = interactions.iter().all(|x| x.rating == 0.0 || x.rating == 1.0);
    let (kind, lo, hi) = if binary {
        (FeedbackKind::Implicit, 0.0, 1.0)
    } else {
        let lo = interactions.iter().map(|x| x.rating).fold(1.0, f64::min).floor();
        let hi = interactions.iter().map(|x| x.rating).fold(5.0, f64::max).ceil();
        (FeedbackKind::Explicit, lo, hi)
    };
    Dataset {
        name: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        num_users,
        num_items,
        kind,
        rating_min: lo,
        rating_max: hi,
        interactions,
    }
}

/// Writes an `index,raw` table for densified ids.
pub fn write_id_map(path: impl AsRef<Path>, raw_ids: &[u64]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "index,raw").map_err(io)?;
    for (k, raw) in raw_ids.iter().enumerate() {
        writeln!(w, "{k},{raw}").map_err(io)?;
    }
    w.flush().map_err(io)
}
