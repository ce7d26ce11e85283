//! JSON config file, command-line overrides and their merge.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Deserializer};
use slowbond::experiments::ExperimentConfig;
use slowbond::lattice_walk::Beta;

/// Keys of the JSON config. All optional; missing keys keep their defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub u: Option<f64>,
    pub t: Option<f64>,
    pub alpha: Option<f64>,
    #[serde(default, deserialize_with = "beta_value")]
    pub beta: Option<Beta>,
    pub n_list: Option<Vec<u32>>,
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub tail_tol: Option<f64>,
    /// CSV output path.
    pub out: Option<PathBuf>,
    /// SVG plot path.
    pub plot: Option<PathBuf>,
}

/// `beta` is a number or the string `"inf"`.
fn beta_value<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Beta>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    let raw = Option::<Raw>::deserialize(d)?;
    match raw {
        None => Ok(None),
        Some(Raw::Num(b)) => b.to_string().parse().map(Some).map_err(serde::de::Error::custom),
        Some(Raw::Text(s)) => s.parse().map(Some).map_err(serde::de::Error::custom),
    }
}

pub fn load(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        anyhow::anyhow!("config {}: field `{field}`: {}", path.display(), e.inner())
    })
}

/// Flags shared by the experiment subcommands; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Macroscopic start point (nonzero).
    #[arg(long, allow_hyphen_values = true)]
    pub u: Option<f64>,
    /// Macroscopic time.
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Exponent of the slow bond, a number or `inf`.
    #[arg(long)]
    pub beta: Option<Beta>,
    /// Comma-separated scaling parameters.
    #[arg(long = "n", value_delimiter = ',')]
    pub n_list: Option<Vec<u32>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo sample size.
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub tail_tol: Option<f64>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write an SVG log-log plot here.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

/// Everything a subcommand needs after merging.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub experiment: ExperimentConfig,
    pub out: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

pub fn resolve(file: Option<FileConfig>, flags: &Common) -> Result<Resolved> {
    let file = file.unwrap_or_default();
    let mut c = ExperimentConfig::default();
    macro_rules! set {
        ($field:ident) => {
            if let Some(v) = flags.$field.clone().or(file.$field) {
                c.$field = v;
            }
        };
    }
    set!(u);
    set!(t);
    set!(alpha);
    set!(beta);
    set!(n_list);
    set!(seed);
    set!(replicas);
    set!(tail_tol);
    c.validate()?;
    Ok(Resolved {
        experiment: c,
        out: flags.out.clone().or(file.out),
        plot: flags.plot.clone().or(file.plot),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<FileConfig> {
        let dir = tempfile::tempdir()?;
        let p = dir.path().join("c.json");
        std::fs::write(&p, s)?;
        load(&p)
    }

    #[test]
    fn reads_all_keys() {
        let f = parse(r#"{"u": -0.5, "t": 2, "alpha": 1.5, "beta": "inf", "n_list": [8, 16], "seed": 3, "replicas": 10, "tail_tol": 1e-10}"#).unwrap();
        let r = resolve(Some(f), &Common::default()).unwrap();
        assert_eq!(r.experiment.u, -0.5);
        assert_eq!(r.experiment.beta, Beta::Infinite);
        assert_eq!(r.experiment.n_list, vec![8, 16]);
    }

    #[test]
    fn flags_override_the_file() {
        let f = parse(r#"{"beta": 0.5, "n_list": [8, 16]}"#).unwrap();
        let flags = Common { beta: Some(Beta::Finite(4.0)), ..Default::default() };
        let r = resolve(Some(f), &flags).unwrap();
        assert_eq!(r.experiment.beta, Beta::Finite(4.0));
        assert_eq!(r.experiment.n_list, vec![8, 16]);
    }

    #[test]
    fn type_errors_name_the_field() {
        let e = parse(r#"{"n_list": [8, "x"]}"#).unwrap_err().to_string();
        assert!(e.contains("n_list[1]"), "{e}");
        let e = parse(r#"{"beta": -2}"#).unwrap_err().to_string();
        assert!(e.contains("`beta`"), "{e}");
        let e = parse(r#"{"tail": 1}"#).unwrap_err().to_string();
        assert!(e.contains("unknown field"), "{e}");
    }

    #[test]
    fn invalid_values_name_the_field() {
        let f = parse(r#"{"u": 0}"#).unwrap();
        let e = resolve(Some(f), &Common::default()).unwrap_err().to_string();
        assert!(e.contains("`u`"), "{e}");
        let f = parse(r#"{"n_list": [16, 8]}"#).unwrap();
        let e = resolve(Some(f), &Common::default()).unwrap_err().to_string();
        assert!(e.contains("`n_list`"), "{e}");
    }
}
