//! Flat key-value run configuration: a text file of `key = value` lines
//! merged with command-line overrides (overrides win), validated into a
//! [`RunConfig`] plus output paths. Unknown keys are rejected by name.

use crate::error::{Error, Result};
use crate::orchestrator::{DatasetKind, Method, PartitionKind, RunConfig};
use std::path::{Path, PathBuf};

/// A parsed configuration: the run itself plus where to write metrics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadedConfig {
    pub run: RunConfig,
    pub output: OutputPaths,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputPaths {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

/// All recognized config keys, kept in one place so errors and docs agree.
pub const CONFIG_KEYS: &[&str] = &[
    "method",
    "n_clients",
    "rounds",
    "local_epochs",
    "batch_size",
    "lambda",
    "tau",
    "alpha_t",
    "lr",
    "epsilon_dist",
    "normalize_by_sqrt_dim",
    "participation_fraction",
    "seed",
    "toy_lambda",
    "hidden_layers",
    "partition.scheme",
    "partition.classes_per_client",
    "partition.alpha",
    "partition.groups",
    "partition.dominant_classes_per_group",
    "partition.dominant_fraction",
    "partition.train_per_client",
    "partition.test_per_client",
    "dataset.kind",
    "dataset.num_classes",
    "dataset.samples_per_class",
    "dataset.feature_dim",
    "dataset.separation",
    "dataset.noise_sigma",
    "dataset.images",
    "dataset.labels",
    "dataset.test_images",
    "dataset.test_labels",
    "output.csv",
    "output.json",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| {
        Error::InvalidConfig(format!(
            "{key}: cannot parse {value:?} as {}",
            std::any::type_name::<T>()
        ))
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(Error::InvalidConfig(format!(
            "{key}: expected true or false, got {other:?}"
        ))),
    }
}

/// Apply one `key = value` pair.
pub fn apply_key(config: &mut LoadedConfig, key: &str, value: &str) -> Result<()> {
    let run = &mut config.run;
    match key {
        "method" => run.method = Method::parse(value.trim())?,
        "n_clients" => run.n_clients = parse_num(key, value)?,
        "rounds" => run.rounds = parse_num(key, value)?,
        "local_epochs" => run.local_epochs = parse_num(key, value)?,
        "batch_size" => run.batch_size = parse_num(key, value)?,
        "lambda" => run.lambda = parse_num(key, value)?,
        "tau" => run.tau = parse_num(key, value)?,
        "alpha_t" => run.alpha_t = parse_num(key, value)?,
        "lr" => run.lr = parse_num(key, value)?,
        "epsilon_dist" => run.epsilon_dist = parse_num(key, value)?,
        "normalize_by_sqrt_dim" => run.normalize_by_sqrt_dim = parse_bool(key, value)?,
        "participation_fraction" => run.participation_fraction = parse_num(key, value)?,
        "seed" => run.seed = parse_num(key, value)?,
        "toy_lambda" => run.toy_lambda = parse_num(key, value)?,
        "hidden_layers" => {
            run.hidden_layers = value
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| parse_num::<usize>(key, s))
                .collect::<Result<_>>()?;
        }
        "partition.scheme" => run.partition.scheme = PartitionKind::parse(value.trim())?,
        "partition.classes_per_client" => {
            run.partition.classes_per_client = parse_num(key, value)?
        }
        "partition.alpha" => run.partition.alpha = parse_num(key, value)?,
        "partition.groups" => run.partition.groups = parse_num(key, value)?,
        "partition.dominant_classes_per_group" => {
            run.partition.dominant_classes_per_group = parse_num(key, value)?
        }
        "partition.dominant_fraction" => run.partition.dominant_fraction = parse_num(key, value)?,
        "partition.train_per_client" => run.partition.train_per_client = parse_num(key, value)?,
        "partition.test_per_client" => run.partition.test_per_client = parse_num(key, value)?,
        "dataset.kind" => run.dataset.kind = DatasetKind::parse(value.trim())?,
        "dataset.num_classes" => run.dataset.num_classes = parse_num(key, value)?,
        "dataset.samples_per_class" => run.dataset.samples_per_class = parse_num(key, value)?,
        "dataset.feature_dim" => run.dataset.feature_dim = parse_num(key, value)?,
        "dataset.separation" => run.dataset.separation = parse_num(key, value)?,
        "dataset.noise_sigma" => run.dataset.noise_sigma = parse_num(key, value)?,
        "dataset.images" => run.dataset.images = Some(PathBuf::from(value.trim())),
        "dataset.labels" => run.dataset.labels = Some(PathBuf::from(value.trim())),
        "dataset.test_images" => run.dataset.test_images = Some(PathBuf::from(value.trim())),
        "dataset.test_labels" => run.dataset.test_labels = Some(PathBuf::from(value.trim())),
        "output.csv" => config.output.csv = Some(PathBuf::from(value.trim())),
        "output.json" => config.output.json = Some(PathBuf::from(value.trim())),
        unknown => {
            return Err(Error::InvalidConfig(format!(
                "unknown config key {unknown:?}"
            )))
        }
    }
    Ok(())
}

fn parse_file(config: &mut LoadedConfig, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!(
                "{}:{}: expected key = value, got {line:?}",
                path.display(),
                lineno + 1
            ))
        })?;
        apply_key(config, key.trim(), value)?;
    }
    Ok(())
}

/// Build a configuration from defaults, an optional file, and override
/// pairs applied in order (so later pairs win). The result is validated.
pub fn parse_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<LoadedConfig> {
    let mut config = LoadedConfig {
        run: RunConfig::default(),
        output: OutputPaths::default(),
    };
    if let Some(p) = path {
        parse_file(&mut config, p)?;
    }
    for (key, value) in overrides {
        apply_key(&mut config, key, value)?;
    }
    config.run.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn empty_config_is_full_defaults() {
        let c = parse_config(None, &[]).unwrap();
        assert_eq!(c.run.n_clients, 40);
        assert_eq!(c.run.rounds, 500);
        assert_eq!(c.run.local_epochs, 10);
        assert_eq!(c.run.batch_size, 100);
        assert_eq!(c.run.lambda, 2.0);
        assert_eq!(c.run.alpha_t, 1.0);
        assert_eq!(c.run.lr, 0.001);
        assert_eq!(c.run.participation_fraction, 1.0);
        assert_eq!(c.run.method, Method::Diversifed);
        assert!(c.output.csv.is_none());
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "# a comment").unwrap();
        writeln!(f, "tau = 0.5").unwrap();
        writeln!(f, "lambda = 7").unwrap();
        writeln!(f, "alpha_t = 1.0").unwrap();
        writeln!(f, "output.csv = metrics.csv").unwrap();
        drop(f);
        let overrides = vec![
            ("tau".to_string(), "0.9".to_string()),
            ("lambda".to_string(), "2".to_string()),
            ("alpha_t".to_string(), "0.1".to_string()),
        ];
        let c = parse_config(Some(&path), &overrides).unwrap();
        assert_eq!(c.run.tau, 0.9);
        assert_eq!(c.run.lambda, 2.0);
        assert_eq!(c.run.alpha_t, 0.1);
        assert_eq!(c.output.csv, Some(PathBuf::from("metrics.csv")));
    }

    #[test]
    fn unknown_key_is_named_in_the_error() {
        let err = parse_config(None, &[("taus".into(), "1".into())]).unwrap_err();
        assert!(err.to_string().contains("taus"), "{err}");
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        let err = parse_config(
            None,
            &[("participation_fraction".into(), "1.5".into())],
        )
        .unwrap_err();
        assert!(err.to_string().contains("participation_fraction"));
        assert!(parse_config(None, &[("tau".into(), "abc".into())]).is_err());
    }

    #[test]
    fn hidden_layers_parse_as_comma_list() {
        let c = parse_config(None, &[("hidden_layers".into(), "32, 16".into())]).unwrap();
        assert_eq!(c.run.hidden_layers, vec![32, 16]);
    }

    #[test]
    fn every_documented_key_is_accepted() {
        for key in CONFIG_KEYS {
            let value = match *key {
                "method" => "separate",
                "partition.scheme" => "dirichlet",
                "dataset.kind" => "blobs",
                "normalize_by_sqrt_dim" => "true",
                "hidden_layers" => "64",
                k if k.starts_with("dataset.") && (k.ends_with("images") || k.ends_with("labels")) => "x",
                k if k.starts_with("output.") => "out",
                _ => "1",
            };
            let mut config = LoadedConfig {
                run: RunConfig::default(),
                output: OutputPaths::default(),
            };
            apply_key(&mut config, key, value).unwrap_or_else(|e| panic!("{key}: {e}"));
        }
    }
}
