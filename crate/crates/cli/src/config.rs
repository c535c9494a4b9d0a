//! Config loading (TOML or JSON by extension) and the pieces shared by commands.

use std::path::{Path, PathBuf};

use graph_matern::experiments::HyperScale;
use graph_matern::lgm::LogNormalPrior;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::{config_err, CliError, Result};

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let parsed = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(&text).map_err(|e| e.to_string()),
        Some("toml") => toml::from_str(&text).map_err(|e| e.to_string()),
        _ => return config_err(format!("{}: config must end in .toml or .json", path.display())),
    };
    parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Seed and output directory after command-line overrides.
#[derive(Debug, Clone)]
pub struct Common {
    pub seed: u64,
    pub out: PathBuf,
}

pub fn resolve_common(
    seed: Option<u64>,
    out: Option<PathBuf>,
    arg_seed: Option<u64>,
    arg_out: Option<PathBuf>,
) -> Result<Common> {
    let Some(seed) = arg_seed.or(seed) else {
        return config_err("seed is mandatory: set `seed` in the config or pass --seed");
    };
    let Some(out) = arg_out.or(out) else {
        return config_err("no output directory: set `out` in the config or pass --out");
    };
    Ok(Common { seed, out })
}

pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        config_err(format!("{what} file {} does not exist", path.display()))
    }
}

pub fn require(ok: bool, msg: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        config_err(msg)
    }
}

/// Lognormal prior given by its median and the variance of the log.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogNormal {
    pub median: f64,
    pub var: f64,
}

impl LogNormal {
    pub fn prior(self, name: &str) -> Result<LogNormalPrior> {
        require(self.median > 0.0 && self.var > 0.0, format!("{name}: median and var must be positive"))?;
        Ok(LogNormalPrior::new(self.median, self.var))
    }
}

/// "none", "eigenvalue" (the n0-th Laplacian eigenvalue) or a positive number.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScaleSpec {
    Target(f64),
    Named(String),
}

impl ScaleSpec {
    pub fn resolve(&self, n0: usize) -> Result<HyperScale> {
        match self {
            ScaleSpec::Target(t) if *t > 0.0 && *t != 1.0 => Ok(HyperScale::Target(*t)),
            ScaleSpec::Target(t) => config_err(format!("tau_scale target must be positive and not 1, got {t}")),
            ScaleSpec::Named(s) if s == "none" => Ok(HyperScale::Unscaled),
            ScaleSpec::Named(s) if s == "eigenvalue" => Ok(HyperScale::Eigenvalue(n0)),
            ScaleSpec::Named(s) => {
                config_err(format!("tau_scale must be \"none\", \"eigenvalue\" or a number, got \"{s}\""))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    StationaryFixed,
    StationaryInferred,
    NonstationaryFixed,
    NonstationaryInferred,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::StationaryFixed,
        Variant::StationaryInferred,
        Variant::NonstationaryFixed,
        Variant::NonstationaryInferred,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::StationaryFixed => "stationary_fixed",
            Variant::StationaryInferred => "stationary_inferred",
            Variant::NonstationaryFixed => "nonstationary_fixed",
            Variant::NonstationaryInferred => "nonstationary_inferred",
        }
    }

    pub fn stationary(self) -> bool {
        matches!(self, Variant::StationaryFixed | Variant::StationaryInferred)
    }

    pub fn inferred(self) -> bool {
        matches!(self, Variant::StationaryInferred | Variant::NonstationaryInferred)
    }
}

pub fn all_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}

pub fn check_variants(v: &[Variant]) -> Result<()> {
    require(!v.is_empty(), "variants must not be empty")?;
    for (i, a) in v.iter().enumerate() {
        require(!v[..i].contains(a), format!("variant {} listed twice", a.name()))?;
    }
    Ok(())
}

/// Independent stream seed for (seed, tag, index), via the splitmix64 finalizer.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
