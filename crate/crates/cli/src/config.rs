//! Flat `key = value` config files.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Default, Clone, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
    source: String,
}

impl ConfigFile {
    pub fn load(path: &Path, allowed: &[&str]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string(), allowed)
    }

    /// Blank lines and lines starting with `#` are skipped. Keys may use
    /// `-` or `_` interchangeably.
    pub fn parse(text: &str, source: &str, allowed: &[&str]) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!("{source}:{}: expected `key = value`", i + 1)));
            };
            let key = key.trim().replace('_', "-");
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("{source}:{}: unknown key '{key}'", i + 1)));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::Usage(format!("{source}:{}: duplicate key '{key}'", i + 1)));
            }
        }
        Ok(ConfigFile {
            values,
            source: source.to_string(),
        })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| CliError::Usage(format!("{}: bad value '{raw}' for '{key}': {e}", self.source))),
        }
    }

    /// The flag if given, else the file value.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEYS: &[&str] = &["epochs", "lr", "weight-decay"];

    #[test]
    fn parses_and_prefers_flags() {
        let c = ConfigFile::parse("# run\nepochs = 3\n\nlr=0.5\nweight_decay = 1e-4\n", "t", KEYS).unwrap();
        assert_eq!(c.get::<usize>("epochs").unwrap(), Some(3));
        assert_eq!(c.pick(Some(9usize), "epochs").unwrap(), Some(9));
        assert_eq!(c.pick::<f64>(None, "weight-decay").unwrap(), Some(1e-4));
        assert_eq!(c.pick::<f64>(None, "missing").unwrap(), None);
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        let e = ConfigFile::parse("epochz = 3", "t", KEYS).unwrap_err();
        assert!(e.to_string().contains("epochz"));
        assert!(ConfigFile::parse("lr = 1\nlr = 2", "t", KEYS).is_err());
        assert!(ConfigFile::parse("lr 1", "t", KEYS).is_err());
        let c = ConfigFile::parse("epochs = many", "t", KEYS).unwrap();
        assert!(c.get::<usize>("epochs").is_err());
    }
}
