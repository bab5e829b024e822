use std::path::Path;

use bsus_core::benchmarks::{Algorithm, ExperimentConfig};

use crate::error::CliError;

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub benchmark: Option<String>,
    pub dim: Option<usize>,
    pub algorithm: Option<Algorithm>,
    pub seed: Option<u64>,
    pub level_size: Option<usize>,
    pub level_probability: Option<f64>,
    pub graph_budget: Option<u64>,
    pub replications: Option<usize>,
}

/// Reads an experiment config from a TOML file (if given), applies
/// overrides, fills defaults and validates the result.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", p.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    let mut set = |key: &str, value: Option<toml::Value>| {
        if let Some(v) = value {
            table.insert(key.to_string(), v);
        }
    };
    let int = |v: u64| -> Result<toml::Value, CliError> {
        i64::try_from(v)
            .map(toml::Value::Integer)
            .map_err(|_| CliError::Validation(format!("{v} is too large")))
    };
    set("benchmark", overrides.benchmark.clone().map(toml::Value::String));
    set("dim", overrides.dim.map(|d| int(d as u64)).transpose()?);
    set(
        "algorithm",
        overrides.algorithm.map(|a| {
            toml::Value::String(match a {
                Algorithm::Sus => "sus".into(),
                Algorithm::Bsus => "bsus".into(),
            })
        }),
    );
    set("seed", overrides.seed.map(int).transpose()?);
    set("level_size", overrides.level_size.map(|n| int(n as u64)).transpose()?);
    set("level_probability", overrides.level_probability.map(toml::Value::Float));
    set("graph_budget", overrides.graph_budget.map(int).transpose()?);
    set("replications", overrides.replications.map(|r| int(r as u64)).transpose()?);

    let config: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Validation(e.message().to_string()))?;
    config.prepare()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let f = file("benchmark = \"piecewise_linear\"\nlevel_size = 500\n");
        let c = load_config(Some(f.path()), &Overrides::default()).unwrap();
        assert_eq!(c.level_probability, 0.1);
        assert_eq!(c.c, 1.0);
        assert_eq!(c.replications, 100);
    }

    #[test]
    fn non_integral_seed_count_is_rejected() {
        let f = file("benchmark = \"linear\"\nlevel_size = 501\nlevel_probability = 0.1\n");
        let err = load_config(Some(f.path()), &Overrides::default()).unwrap_err();
        assert!(matches!(err, CliError::Validation(ref m) if m.contains("n*p")), "{err}");
    }

    #[test]
    fn overrides_win() {
        let f = file("benchmark = \"linear\"\nlevel_size = 100\nseed = 3\n");
        let o = Overrides {
            seed: Some(99),
            level_size: Some(200),
            ..Default::default()
        };
        let c = load_config(Some(f.path()), &o).unwrap();
        assert_eq!((c.seed, c.level_size), (99, 200));
    }

    #[test]
    fn unknown_benchmark_lists_names() {
        let o = Overrides {
            benchmark: Some("rosenbrock".into()),
            level_size: Some(100),
            ..Default::default()
        };
        let err = load_config(None, &o).unwrap_err().to_string();
        assert!(err.contains("himmelblau") && err.contains("piecewise_linear"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let f = file("benchmark = \"linear\"\nlevel_size = 100\nlevel_sise = 3\n");
        assert!(load_config(Some(f.path()), &Overrides::default()).is_err());
    }
}
