//! Optional `key=value` run configuration for `train`.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

pub const KEYS: &[&str] = &[
    "corpus",
    "labels",
    "gazetteers",
    "out",
    "features",
    "variant",
    "seed",
    "embed-dim",
    "filters",
    "filter-width",
    "context-length",
    "epochs",
    "lr",
    "batch-size",
    "unk-threshold",
];

/// Values keyed by flag name. `_` in keys is read as `-`.
#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, (usize, String)>,
    source: String,
}

impl Settings {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{source}:{}: expected key=value, found {raw:?}", i + 1);
            };
            let key = key.trim().replace('_', "-");
            if !KEYS.contains(&key.as_str()) {
                bail!("{source}:{}: unknown key {key:?}", i + 1);
            }
            if values
                .insert(key.clone(), (i + 1, value.trim().to_string()))
                .is_some()
            {
                bail!("{source}:{}: duplicate key {key:?}", i + 1);
            }
        }
        Ok(Settings {
            values,
            source: source.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// `flag` if given, else the file value, else `None`.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        let Some((line, value)) = self.values.get(key) else {
            return Ok(None);
        };
        value
            .parse()
            .map(Some)
            .map_err(|e| anyhow::anyhow!("{}:{line}: {key}: {e}", self.source))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let s = Settings::parse("# run\nepochs = 5\nembed_dim=8\n\n", "cfg").unwrap();
        assert_eq!(s.pick::<usize>(None, "epochs").unwrap(), Some(5));
        assert_eq!(s.pick(Some(9usize), "epochs").unwrap(), Some(9));
        assert_eq!(s.pick::<usize>(None, "embed-dim").unwrap(), Some(8));
        assert_eq!(s.pick::<usize>(None, "seed").unwrap(), None);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = Settings::parse("epochs=1\nnonsense\n", "cfg").unwrap_err();
        assert!(e.to_string().starts_with("cfg:2:"), "{e}");
        let e = Settings::parse("colour=red\n", "cfg").unwrap_err();
        assert!(e.to_string().contains("unknown key"));
        let e = Settings::parse("seed=1\nseed=2\n", "cfg").unwrap_err();
        assert!(e.to_string().contains("duplicate"));
        let s = Settings::parse("\nepochs=many\n", "cfg").unwrap();
        let e = s.pick::<usize>(None, "epochs").unwrap_err();
        assert!(e.to_string().starts_with("cfg:2: epochs:"), "{e}");
    }
}
