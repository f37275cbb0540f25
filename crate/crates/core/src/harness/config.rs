//! INI experiment configuration.
//!
//! ```ini
//! [dataset]
//! kind = coat            ; coat | yahoo | synthetic | canonical
//! path = data/coat
//!
//! [run]
//! models = mf-biased, ips, dr
//! repeats = 10
//! base_seed = 0
//! split = 0.05, 0.05, 0.90
//! out = runs/coat
//!
//! [model:*]
//! latent_dim = 8
//!
//! [model:ips]
//! learning_rate = 0.02
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::{Ini, Properties};

use crate::data::{DataSplit, Dataset, SplitRatios};
use crate::error::{Error, Result};
use crate::ingest::{
    generate_synthetic, load_coat, load_yahoo, read_canonical, SyntheticConfig, YAHOO_TEST_FILE, YAHOO_TRAIN_FILE,
};
use crate::metrics::DEFAULT_K;
use crate::models::{HyperParams, ModelKind, PropensityMethod};

pub const MAX_REPEATS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSpec {
    /// Directory holding `train.ascii` and `test.ascii`.
    Coat {
        dir: PathBuf,
    },
    Yahoo {
        train: PathBuf,
        test: PathBuf,
    },
    Synthetic(SyntheticConfig),
    Canonical {
        biased: PathBuf,
        randomized: Option<PathBuf>,
    },
}

/// A biased log and, when the source has one, its randomized counterpart.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedData {
    pub biased: Dataset,
    pub randomized: Option<Dataset>,
}

impl DatasetSpec {
    pub fn load(&self) -> Result<LoadedData> {
        let (biased, randomized) = match self {
            DatasetSpec::Coat { dir } => {
                let (b, r) = load_coat(dir)?;
                (b, Some(r))
            }
            DatasetSpec::Yahoo { train, test } => {
                let (b, r) = load_yahoo(train, test)?;
                (b, Some(r))
            }
            DatasetSpec::Synthetic(cfg) => {
                let out = generate_synthetic(cfg)?;
                (out.biased, out.randomized)
            }
            DatasetSpec::Canonical { biased, randomized } => {
                let b = read_canonical(biased)?;
                let r = randomized.as_ref().map(read_canonical).transpose()?;
                (b, r)
            }
        };
        Ok(LoadedData { biased, randomized })
    }

    /// Builds a dataset spec from a `kind` tag, an optional input path and an
    /// optional synthetic preset name.
    pub fn from_parts(kind: &str, input: Option<&Path>, preset: Option<&str>) -> Result<Self> {
        let need = |what: &str| Error::Config(format!("dataset kind `{kind}` needs {what}"));
        match kind {
            "coat" => Ok(DatasetSpec::Coat {
                dir: input.ok_or_else(|| need("an input directory"))?.to_path_buf(),
            }),
            "yahoo" => {
                let dir = input.ok_or_else(|| need("an input directory"))?;
                Ok(DatasetSpec::Yahoo {
                    train: dir.join(YAHOO_TRAIN_FILE),
                    test: dir.join(YAHOO_TEST_FILE),
                })
            }
            "synthetic" => {
                let name = preset.ok_or_else(|| need("a preset"))?;
                SyntheticConfig::preset(name)
                    .map(DatasetSpec::Synthetic)
                    .ok_or_else(|| Error::Config(format!("unknown synthetic preset `{name}`")))
            }
            "canonical" => Ok(DatasetSpec::Canonical {
                biased: input.ok_or_else(|| need("a biased CSV path"))?.to_path_buf(),
                randomized: None,
            }),
            other => Err(Error::Config(format!("unknown dataset kind `{other}`"))),
        }
    }
}

impl LoadedData {
    /// D_T/D_U/D_V/D_Te for one seed. Without a randomized log the holdout
    /// parts come from the biased log and D_U stays empty.
    pub fn split(&self, ratios: SplitRatios, holdout: (f64, f64), seed: u64) -> Result<DataSplit> {
        match &self.randomized {
            Some(r) => DataSplit::standard(&self.biased, r, ratios, seed),
            None => DataSplit::biased_holdout(&self.biased, holdout.0, holdout.1, seed),
        }
    }

    pub fn name(&self) -> &str {
        &self.biased.name
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub models: Vec<ModelKind>,
    pub hyper: BTreeMap<ModelKind, HyperParams>,
    /// `None` picks per split (see `default_propensity_method`).
    pub propensity: Option<PropensityMethod>,
    pub repeats: usize,
    pub base_seed: u64,
    pub ratios: SplitRatios,
    /// Validation and test fractions carved from the biased log when there
    /// is no randomized log.
    pub holdout: (f64, f64),
    pub k: usize,
    /// Concurrent repeats; 1 runs them in order.
    pub threads: usize,
    pub out: PathBuf,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSpec, models: Vec<ModelKind>) -> Self {
        Self {
            dataset,
            hyper: models.iter().map(|&m| (m, HyperParams::default())).collect(),
            models,
            propensity: None,
            repeats: 1,
            base_seed: 0,
            ratios: SplitRatios::STANDARD,
            holdout: (0.1, 0.1),
            k: DEFAULT_K,
            threads: 1,
            out: PathBuf::from("runs"),
        }
    }

    pub fn hyper_params(&self, model: ModelKind) -> HyperParams {
        self.hyper.get(&model).cloned().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Config("no models requested".into()));
        }
        if self.repeats == 0 || self.repeats > MAX_REPEATS {
            return Err(Error::Config(format!(
                "repeats must be in 1..={MAX_REPEATS}, got {}",
                self.repeats
            )));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        self.ratios.check()?;
        for m in &self.models {
            self.hyper_params(*m).validate()?;
        }
        if let DatasetSpec::Synthetic(s) = &self.dataset {
            s.validate()?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = crate::ingest::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_ini_str(&text, base)
    }

    pub fn from_ini_str(text: &str, base_dir: &Path) -> Result<Self> {
        let ini = Ini::load_from_str_noescape(text).map_err(|e| Error::Config(e.to_string()))?;
        for name in ini.sections().flatten() {
            if !(name == "dataset" || name == "run" || name.starts_with("model:")) {
                return Err(Error::Config(format!("unknown section [{name}]")));
            }
        }
        let resolve = |p: &str| {
            let p = Path::new(p.trim());
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };

        let ds = ini
            .section(Some("dataset"))
            .ok_or_else(|| Error::Config("missing [dataset] section".into()))?;
        let dataset = parse_dataset(ds, &resolve)?;

        let run = ini.section(Some("run"));
        let get = |key: &str| run.and_then(|r| r.get(key));
        let models: Vec<ModelKind> = match get("models") {
            Some(list) => list
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(str::parse)
                .collect::<Result<_>>()?,
            None => return Err(Error::Config("missing `models` in [run]".into())),
        };
        let mut cfg = ExperimentConfig::new(dataset, models);
        if let Some(r) = run {
            for (key, value) in r.iter() {
                match key {
                    "models" => {}
                    "repeats" => cfg.repeats = parse_value(key, value)?,
                    "base_seed" => cfg.base_seed = parse_value(key, value)?,
                    "k" => cfg.k = parse_value(key, value)?,
                    "threads" => cfg.threads = parse_value(key, value)?,
                    "propensity" => cfg.propensity = Some(value.parse()?),
                    "out" => cfg.out = resolve(value),
                    "split" => {
                        let v = parse_list(key, value, 3)?;
                        cfg.ratios = SplitRatios::new(v[0], v[1], v[2])?;
                    }
                    "holdout" => {
                        let v = parse_list(key, value, 2)?;
                        cfg.holdout = (v[0], v[1]);
                    }
                    other => return Err(Error::Config(format!("unknown key `{other}` in [run]"))),
                }
            }
        }

        // [model:*] first, then the per-model sections on top
        let shared = ini.section(Some("model:*"));
        for m in cfg.models.clone() {
            let mut hp = HyperParams::default();
            let own = ini.section(Some(format!("model:{}", m.tag())));
            for props in [shared, own].into_iter().flatten() {
                for (k, v) in props.iter() {
                    hp.set(k, v)?;
                }
            }
            cfg.hyper.insert(m, hp);
        }
        for name in ini.sections().flatten() {
            if let Some(tag) = name.strip_prefix("model:") {
                if tag != "*" {
                    tag.parse::<ModelKind>()?;
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_list(key: &str, value: &str, n: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = value.split(',').map(|s| parse_value(key, s)).collect::<Result<_>>()?;
    if v.len() != n {
        return Err(Error::Config(format!("`{key}` needs {n} comma-separated values")));
    }
    Ok(v)
}

fn parse_dataset(ds: &Properties, resolve: &dyn Fn(&str) -> PathBuf) -> Result<DatasetSpec> {
    let kind = ds
        .get("kind")
        .ok_or_else(|| Error::Config("missing `kind` in [dataset]".into()))?
        .trim();
    let path = |key: &str| {
        ds.get(key)
            .map(resolve)
            .ok_or_else(|| Error::Config(format!("dataset kind `{kind}` needs `{key}`")))
    };
    let allow = |keys: &[&str]| -> Result<()> {
        for (k, _) in ds.iter() {
            if k != "kind" && !keys.contains(&k) {
                return Err(Error::Config(format!("unknown key `{k}` for dataset kind `{kind}`")));
            }
        }
        Ok(())
    };
    match kind {
        "coat" => {
            allow(&["path"])?;
            Ok(DatasetSpec::Coat { dir: path("path")? })
        }
        "yahoo" => {
            allow(&["path", "train", "test"])?;
            if ds.contains_key("path") {
                let dir = path("path")?;
                Ok(DatasetSpec::Yahoo {
                    train: dir.join(YAHOO_TRAIN_FILE),
                    test: dir.join(YAHOO_TEST_FILE),
                })
            } else {
                Ok(DatasetSpec::Yahoo {
                    train: path("train")?,
                    test: path("test")?,
                })
            }
        }
        "canonical" => {
            allow(&["biased", "randomized"])?;
            Ok(DatasetSpec::Canonical {
                biased: path("biased")?,
                randomized: ds.get("randomized").map(resolve),
            })
        }
        "synthetic" => {
            let mut cfg = match ds.get("preset") {
                Some(p) => SyntheticConfig::preset(p.trim())
                    .ok_or_else(|| Error::Config(format!("unknown synthetic preset `{p}`")))?,
                None => SyntheticConfig::set_a(),
            };
            for (k, v) in ds.iter() {
                match k {
                    "kind" | "preset" => {}
                    "name" => cfg.name = v.trim().to_string(),
                    "num_users" => cfg.num_users = parse_value(k, v)?,
                    "num_items" => cfg.num_items = parse_value(k, v)?,
                    "latent_dim" => cfg.latent_dim = parse_value(k, v)?,
                    "slots" => cfg.slots = parse_value(k, v)?,
                    "position_decay" => cfg.position_decay = parse_value(k, v)?,
                    "popularity_skew" => cfg.popularity_skew = parse_value(k, v)?,
                    "biased_impressions" => cfg.biased_impressions = parse_value(k, v)?,
                    "randomized_impressions" => cfg.randomized_impressions = parse_value(k, v)?,
                    "purchase_noise" => cfg.purchase_noise = parse_value(k, v)?,
                    "seed" => cfg.seed = parse_value(k, v)?,
                    other => return Err(Error::Config(format!("unknown key `{other}` for synthetic dataset"))),
                }
            }
            cfg.validate()?;
            Ok(DatasetSpec::Synthetic(cfg))
        }
        other => Err(Error::Config(format!("unknown dataset kind `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
[dataset]
kind = synthetic
preset = set-b
num_users = 300
biased_impressions = 2000
randomized_impressions = 3000

[run]
models = mf-biased, ips, dr
repeats = 3
base_seed = 7
split = 0.1, 0.1, 0.8
out = out/x

[model:*]
latent_dim = 4

[model:ips]
learning_rate = 0.02
";

    #[test]
    fn parses_sample() {
        let cfg = ExperimentConfig::from_ini_str(SAMPLE, Path::new("/base")).unwrap();
        assert_eq!(cfg.models, vec![ModelKind::MfBiased, ModelKind::Ips, ModelKind::Dr]);
        assert_eq!(cfg.repeats, 3);
        assert_eq!(cfg.base_seed, 7);
        assert_eq!(cfg.out, PathBuf::from("/base/out/x"));
        assert_eq!(cfg.ratios, SplitRatios::new(0.1, 0.1, 0.8).unwrap());
        let ips = cfg.hyper_params(ModelKind::Ips);
        assert_eq!((ips.latent_dim, ips.learning_rate), (4, 0.02));
        let dr = cfg.hyper_params(ModelKind::Dr);
        assert_eq!(
            (dr.latent_dim, dr.learning_rate),
            (4, HyperParams::default().learning_rate)
        );
        match cfg.dataset {
            DatasetSpec::Synthetic(s) => {
                assert_eq!((s.num_users, s.num_items, s.seed), (300, 40, 2));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let base = Path::new(".");
        let bad = [
            SAMPLE.replace("repeats = 3", "repeats = 11"),
            SAMPLE.replace("repeats = 3", "repeats = 0"),
            SAMPLE.replace("models = mf-biased, ips, dr", "models = "),
            SAMPLE.replace("models = mf-biased, ips, dr", "models = svd"),
            SAMPLE.replace("[model:ips]", "[model:svd]"),
            SAMPLE.replace("learning_rate = 0.02", "momentum = 0.9"),
            SAMPLE.replace("0.1, 0.1, 0.8", "0.1, 0.1"),
            SAMPLE.replace("kind = synthetic", "kind = netflix"),
            SAMPLE.replace("[run]", "[runs]"),
        ];
        for text in bad {
            assert!(ExperimentConfig::from_ini_str(&text, base).is_err(), "{text}");
        }
    }
}
