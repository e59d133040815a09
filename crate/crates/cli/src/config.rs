//! Run configuration: a TOML file, then `--set key=value` overrides, then
//! validation.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fastthresh::robustness::{ModelKind, DEFAULT_CENSUS_FACTORS, DEFAULT_SIGMAS};
use fastthresh::{PriorConfig, SamplerConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    pub output_dir: PathBuf,
    /// Exit with status 2 when any R-hat exceeds 1.1.
    pub strict: bool,
    pub write_draws: bool,
    /// Worker threads for sampling and sweeps; 0 uses every core.
    pub threads: usize,
    pub input: InputConfig,
    pub columns: ColumnMap,
    /// Records are kept only if they match every filter.
    pub filters: Vec<Filter>,
    pub sampler: SamplerConfig,
    pub priors: PriorConfig,
    pub synth: SynthConfig,
    pub robustness: RobustnessConfig,
    pub approx: ApproxConfig,
    pub dist: DistConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Frisk,
            output_dir: "fastthresh-out".into(),
            strict: false,
            write_draws: false,
            threads: 0,
            input: InputConfig::default(),
            columns: ColumnMap::default(),
            filters: Vec::new(),
            sampler: SamplerConfig::default(),
            priors: PriorConfig::default(),
            synth: SynthConfig::default(),
            robustness: RobustnessConfig::default(),
            approx: ApproxConfig::default(),
            dist: DistConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Stop records, or per-cell counts when `aggregated` is set.
    pub stops: Option<PathBuf>,
    /// Census fractions by precinct and race (stop model only).
    pub census: Option<PathBuf>,
    /// The stop file holds `race, precinct, stops, hits` rows.
    pub aggregated: bool,
    /// Posterior draws written by an earlier fit, for `ppc`.
    pub draws: Option<PathBuf>,
}

/// Column names in the input files. Public releases of stop data rename
/// columns between years, so every name is configurable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub race: String,
    pub precinct: String,
    pub frisked: String,
    pub weapon_found: String,
    pub stops: String,
    pub hits: String,
    pub fraction: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            race: "race".into(),
            precinct: "precinct".into(),
            frisked: "frisked".into(),
            weapon_found: "weapon_found".into(),
            stops: "stops".into(),
            hits: "hits".into(),
            fraction: "fraction".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Filter {
    pub column: String,
    pub equals: String,
}

/// Generating design for `synth` and the heterogeneity sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub races: Vec<String>,
    pub locations: usize,
    pub phi_race: Vec<f64>,
    pub lambda_race: Vec<f64>,
    pub threshold_center: Vec<f64>,
    /// Standard deviations of the location effects and of cell thresholds
    /// around their race center, all on the logit or log scale.
    pub location_phi_sd: f64,
    pub location_lambda_sd: f64,
    pub threshold_sd: f64,
    pub stops_per_cell: u64,
    pub heterogeneity_sigma: f64,
    /// Stop model: encounters per location and mean census shares, which
    /// are perturbed per location by a log-normal factor.
    pub encounters_per_location: u64,
    pub census_shares: Vec<f64>,
    pub census_sd: f64,
    /// Adds a random column with this many levels, for placebo runs.
    pub placebo_column: Option<String>,
    pub placebo_levels: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            races: vec!["white".into(), "black".into(), "hispanic".into()],
            locations: 10,
            phi_race: vec![-3.3, -3.6, -3.5],
            lambda_race: vec![0.0, 0.1, 0.05],
            threshold_center: vec![-3.0, -3.9, -3.6],
            location_phi_sd: 0.3,
            location_lambda_sd: 0.15,
            threshold_sd: 1.0,
            stops_per_cell: 10_000,
            heterogeneity_sigma: 0.0,
            encounters_per_location: 200_000,
            census_shares: vec![0.45, 0.35, 0.2],
            census_sd: 0.5,
            placebo_column: Some("day".into()),
            placebo_levels: 7,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessConfig {
    pub sigmas: Vec<f64>,
    pub census_factors: Vec<f64>,
    /// Race whose census share is rescaled.
    pub census_race: String,
    /// Column used by `placebo` and `disaggregate`.
    pub column: String,
    /// Levels to fit in `disaggregate`; all observed levels when absent.
    pub levels: Option<Vec<String>>,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            sigmas: DEFAULT_SIGMAS.to_vec(),
            census_factors: DEFAULT_CENSUS_FACTORS.to_vec(),
            census_race: "white".into(),
            column: "day".into(),
            levels: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApproxConfig {
    /// Grid file; the bundled grid when absent.
    pub grid: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistConfig {
    pub phi: f64,
    pub delta: f64,
    pub points: usize,
}

impl Default for DistConfig {
    fn default() -> Self {
        Self { phi: 0.3, delta: 1.5, points: 99 }
    }
}

/// Parses an override value as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let Some((key, raw)) = assignment.split_once('=') else {
        bail!("override '{assignment}' is not of the form key=value");
    };
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        bail!("override key '{key}' is malformed");
    }
    let mut node = table;
    for part in &path[..path.len() - 1] {
        let entry = node.entry(part.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
        node = entry.as_table_mut().with_context(|| format!("'{part}' in '{key}' is not a section"))?;
    }
    node.insert(path[path.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                text.parse::<toml::Table>().with_context(|| format!("parsing config {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = toml::Value::Table(table).try_into().context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.priors.validate()?;
        self.sampler.validate()?;
        let s = &self.synth;
        let r = s.races.len();
        if r == 0 || s.phi_race.len() != r || s.lambda_race.len() != r || s.threshold_center.len() != r {
            bail!("synth: phi_race, lambda_race and threshold_center need one entry per race");
        }
        if s.census_shares.len() != r {
            bail!("synth: census_shares needs one entry per race");
        }
        for (name, v) in [
            ("location_phi_sd", s.location_phi_sd),
            ("location_lambda_sd", s.location_lambda_sd),
            ("threshold_sd", s.threshold_sd),
            ("heterogeneity_sigma", s.heterogeneity_sigma),
            ("census_sd", s.census_sd),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                bail!("synth: {name} must be finite and >= 0");
            }
        }
        if s.locations == 0 {
            bail!("synth: need at least one location");
        }
        if self.dist.points == 0 || !(self.dist.phi > 0.0 && self.dist.phi < 1.0) || !(self.dist.delta > 0.0) {
            bail!("dist: need 0 < phi < 1, delta > 0 and at least one point");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the resolved configuration, so equal hashes mean equal runs.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_toml().as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
