//! Run configuration: a flat `key = value` text file, `--set` overrides and a
//! mandatory seed.
//!
//! ```text
//! # comments run to the end of the line
//! seed = 7
//! suites = spectrum, ks
//! grid.ladder = 32, 48, 64
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use spin_so4::operators::ProbePolicy;
use spin_so4::radial::RadialSettings;

/// Keys and their default values. `seed` is deliberately absent: it must be
/// given explicitly.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("suites", "all"),
    ("coulomb.mass", "1"),
    ("coulomb.k", "0.5, 0.8, 1.2"),
    ("coulomb.n_max", "4"),
    ("degeneracy.k", "0.8"),
    ("oscillator.mass", "1"),
    ("oscillator.omega", "1, 1.4142135623730951"),
    ("oscillator.n_max", "8"),
    ("radial.points_per_length", "100"),
    ("radial.initial_cutoff_lengths", "24"),
    ("radial.defect_tolerance", "1e-10"),
    ("ks.points", "100000"),
    ("ks.bridge_n_max", "40"),
    ("ks.degeneracy_n_max", "20"),
    ("grid.ladder", "32, 48, 64"),
    ("grid.box", "20"),
    ("probes.count", "8"),
    ("probes.design_points", "64"),
    ("probes.origin_margin", "5.5"),
    ("probes.momentum_margin", "5.5"),
    ("probes.band_margin", "5.5"),
    ("algebra.k", "0.8"),
    ("casimir.k", "0.8"),
    ("casimir.levels", "1, 2"),
    ("casimir.points", "72"),
    ("casimir.box", "44"),
    ("casimir.tol", "1e-6"),
    ("limits.k", "0.8"),
    ("limits.masses", "5, 20, 80"),
    ("limits.points", "32"),
    ("limits.box", "20"),
    ("limits.probes", "4"),
    ("limits.design_points", "32"),
    ("limits.margin", "2.5"),
    ("limits.halving_n_max", "4"),
    ("output.dir", ""),
    ("output.format", "text"),
];

const SEED_KEY: &str = "seed";

/// Where a configuration value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Default,
    File { line: usize },
    Override,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub origin: Option<Origin>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.origin {
            Some(Origin::File { line }) => write!(f, "line {line}: ")?,
            Some(Origin::Override) => write!(f, "--set: ")?,
            _ => {}
        }
        if let Some(key) = &self.key {
            write!(f, "key `{key}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl ConfigError {
    fn new(origin: Option<Origin>, key: Option<&str>, message: impl Into<String>) -> Self {
        Self {
            origin,
            key: key.map(str::to_owned),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Suite {
    Spectrum,
    Algebra,
    Radial,
    Ks,
    Limits,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Spectrum, Suite::Algebra, Suite::Radial, Suite::Ks, Suite::Limits];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Spectrum => "spectrum",
            Suite::Algebra => "algebra",
            Suite::Radial => "radial",
            Suite::Ks => "ks",
            Suite::Limits => "limits",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Text => "txt",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "text" => Ok(Format::Text),
            other => Err(format!("unknown format `{other}` (json, csv, text)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoulombSettings {
    pub mass: f64,
    pub couplings: Vec<f64>,
    pub n_max: u32,
    /// Coupling at which the l-degeneracy is checked.
    pub degeneracy_k: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorSettings {
    pub mass: f64,
    pub omegas: Vec<f64>,
    pub n_max: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KsSettings {
    pub points: usize,
    pub bridge_n_max: u32,
    pub degeneracy_n_max: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridLadder {
    pub points: Vec<usize>,
    pub box_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CasimirSettings {
    pub k: f64,
    pub levels: Vec<u32>,
    pub points: usize,
    pub box_length: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitSettings {
    pub k: f64,
    pub masses: Vec<f64>,
    pub points: usize,
    pub box_length: f64,
    pub policy: ProbePolicy,
    pub halving_n_max: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub suites: Vec<Suite>,
    pub seed: u64,
    pub coulomb: CoulombSettings,
    pub oscillator: OscillatorSettings,
    pub radial: RadialSettings,
    pub ks: KsSettings,
    pub grid: GridLadder,
    pub probes: ProbePolicy,
    pub algebra_k: f64,
    pub casimir: CasimirSettings,
    pub limits: LimitSettings,
    pub output_dir: Option<PathBuf>,
    pub format: Format,
    /// Every resolved key with its value, as echoed into reports.
    pub echo: BTreeMap<String, String>,
}

/// Collects raw key/value pairs from the defaults, a file and overrides.
#[derive(Debug, Clone)]
pub struct ConfigBuilder {
    values: BTreeMap<String, (String, Origin)>,
}

impl Default for ConfigBuilder {
    fn default() -> Self {
        let values = DEFAULTS
            .iter()
            .map(|(k, v)| (k.to_string(), (v.to_string(), Origin::Default)))
            .collect();
        Self { values }
    }
}

fn known(key: &str) -> bool {
    key == SEED_KEY || DEFAULTS.iter().any(|(k, _)| *k == key)
}

fn split_pair(text: &str) -> Option<(&str, &str)> {
    let (k, v) = text.split_once('=')?;
    Some((k.trim(), v.trim()))
}

impl ConfigBuilder {
    /// Reads a config file body. Later lines may not repeat a key.
    pub fn parse_text(mut self, text: &str) -> Result<Self, ConfigError> {
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let origin = Some(Origin::File { line });
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) =
                split_pair(body).ok_or_else(|| ConfigError::new(origin, None, format!("expected `key = value`, got `{body}`")))?;
            if !known(key) {
                return Err(ConfigError::new(origin, Some(key), "unknown key"));
            }
            if let Some(first) = seen.insert(key.to_owned(), line) {
                return Err(ConfigError::new(origin, Some(key), format!("already set on line {first}")));
            }
            self.values.insert(key.to_owned(), (value.to_owned(), Origin::File { line }));
        }
        Ok(self)
    }

    /// Applies one `key=value` override.
    pub fn set(mut self, assignment: &str) -> Result<Self, ConfigError> {
        let origin = Some(Origin::Override);
        let (key, value) = split_pair(assignment)
            .ok_or_else(|| ConfigError::new(origin, None, format!("expected `key=value`, got `{assignment}`")))?;
        if !known(key) {
            return Err(ConfigError::new(origin, Some(key), "unknown key"));
        }
        self.values.insert(key.to_owned(), (value.to_owned(), Origin::Override));
        Ok(self)
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.values.insert(SEED_KEY.into(), (seed.to_string(), Origin::Override));
        self
    }

    fn raw(&self, key: &str) -> Result<(&str, Origin), ConfigError> {
        self.values
            .get(key)
            .map(|(v, o)| (v.as_str(), *o))
            .ok_or_else(|| ConfigError::new(None, Some(key), "missing value"))
    }

    fn fail(&self, key: &str, message: impl Into<String>) -> ConfigError {
        let origin = self.values.get(key).map(|(_, o)| *o);
        ConfigError::new(origin, Some(key), message)
    }

    fn scalar<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let (v, _) = self.raw(key)?;
        v.parse().map_err(|e| self.fail(key, format!("cannot parse `{v}`: {e}")))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let (v, _) = self.raw(key)?;
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| self.fail(key, format!("cannot parse `{s}`: {e}"))))
            .collect()
    }

    fn positive(&self, key: &str) -> Result<f64, ConfigError> {
        let v: f64 = self.scalar(key)?;
        if !(v.is_finite() && v > 0.0) {
            return Err(self.fail(key, format!("must be finite and positive, got {v}")));
        }
        Ok(v)
    }

    fn positive_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let vs: Vec<f64> = self.list(key)?;
        if vs.is_empty() {
            return Err(self.fail(key, "must not be empty"));
        }
        if let Some(bad) = vs.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(self.fail(key, format!("entries must be finite and positive, got {bad}")));
        }
        Ok(vs)
    }

    fn increasing<T: PartialOrd + Copy>(&self, key: &str, vs: &[T]) -> Result<(), ConfigError> {
        if vs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(self.fail(key, "must be strictly increasing"));
        }
        Ok(())
    }

    fn in_range(&self, key: &str, lo: u32, hi: u32) -> Result<u32, ConfigError> {
        let v: u32 = self.scalar(key)?;
        if v < lo || v > hi {
            return Err(self.fail(key, format!("must lie in {lo}..={hi}, got {v}")));
        }
        Ok(v)
    }

    fn grid_points(&self, key: &str, v: usize) -> Result<usize, ConfigError> {
        if v < 16 || v % 2 == 1 {
            return Err(self.fail(key, format!("grid sizes must be even and at least 16, got {v}")));
        }
        Ok(v)
    }

    fn suites(&self) -> Result<Vec<Suite>, ConfigError> {
        let names: Vec<String> = self.list("suites")?;
        if names.is_empty() {
            return Err(self.fail("suites", "no suites selected"));
        }
        let mut out = Vec::new();
        for name in names {
            let picked: Vec<Suite> = match name.as_str() {
                "all" => Suite::ALL.to_vec(),
                other => vec![*Suite::ALL
                    .iter()
                    .find(|s| s.name() == other)
                    .ok_or_else(|| self.fail("suites", format!("unknown suite `{other}`")))?],
            };
            for s in picked {
                if !out.contains(&s) {
                    out.push(s);
                }
            }
        }
        Ok(out)
    }

    /// Validates every key and produces the typed configuration.
    pub fn build(self) -> Result<RunConfig, ConfigError> {
        let suites = self.suites()?;
        if !self.values.contains_key(SEED_KEY) {
            return Err(ConfigError::new(
                None,
                Some(SEED_KEY),
                "a seed is mandatory (set `seed` in the config or pass --seed)",
            ));
        }
        let seed: u64 = self.scalar(SEED_KEY)?;

        let coulomb = CoulombSettings {
            mass: self.positive("coulomb.mass")?,
            couplings: self.positive_list("coulomb.k")?,
            n_max: self.in_range("coulomb.n_max", 1, 6)?,
            degeneracy_k: self.positive("degeneracy.k")?,
        };
        let oscillator = OscillatorSettings {
            mass: self.positive("oscillator.mass")?,
            omegas: self.positive_list("oscillator.omega")?,
            n_max: self.in_range("oscillator.n_max", 0, 16)?,
        };
        let radial = RadialSettings {
            points_per_length: self.positive("radial.points_per_length")?,
            initial_cutoff_lengths: self.positive("radial.initial_cutoff_lengths")?,
            defect_tolerance: self.positive("radial.defect_tolerance")?,
        };
        let ks_points: usize = self.scalar("ks.points")?;
        if ks_points == 0 {
            return Err(self.fail("ks.points", "must be positive"));
        }
        let ks = KsSettings {
            points: ks_points,
            bridge_n_max: self.in_range("ks.bridge_n_max", 0, 400)?,
            degeneracy_n_max: self.in_range("ks.degeneracy_n_max", 1, 200)?,
        };

        let ladder: Vec<usize> = self.list("grid.ladder")?;
        if ladder.is_empty() {
            return Err(self.fail("grid.ladder", "must not be empty"));
        }
        for &n in &ladder {
            self.grid_points("grid.ladder", n)?;
        }
        self.increasing("grid.ladder", &ladder)?;
        let grid = GridLadder {
            points: ladder,
            box_length: self.positive("grid.box")?,
        };
        let probes = ProbePolicy {
            count: self.scalar("probes.count")?,
            design_points: self.scalar("probes.design_points")?,
            origin_margin: self.positive("probes.origin_margin")?,
            momentum_origin_margin: self.positive("probes.momentum_margin")?,
            band_margin: self.positive("probes.band_margin")?,
        };
        if probes.count == 0 {
            return Err(self.fail("probes.count", "must be positive"));
        }

        let levels: Vec<u32> = self.list("casimir.levels")?;
        if levels.is_empty() || levels.iter().any(|&n| n == 0 || n > 3) {
            return Err(self.fail("casimir.levels", "levels must be in 1..=3"));
        }
        self.increasing("casimir.levels", &levels)?;
        let casimir = CasimirSettings {
            k: self.positive("casimir.k")?,
            levels,
            points: self.grid_points("casimir.points", self.scalar("casimir.points")?)?,
            box_length: self.positive("casimir.box")?,
            tol: self.positive("casimir.tol")?,
        };

        let masses = self.positive_list("limits.masses")?;
        if masses.len() < 2 {
            return Err(self.fail("limits.masses", "need at least two masses"));
        }
        self.increasing("limits.masses", &masses)?;
        let margin = self.positive("limits.margin")?;
        let limit_probes: usize = self.scalar("limits.probes")?;
        if limit_probes == 0 {
            return Err(self.fail("limits.probes", "must be positive"));
        }
        let limits = LimitSettings {
            k: self.positive("limits.k")?,
            masses,
            points: self.grid_points("limits.points", self.scalar("limits.points")?)?,
            box_length: self.positive("limits.box")?,
            policy: ProbePolicy {
                count: limit_probes,
                design_points: self.scalar("limits.design_points")?,
                origin_margin: margin,
                momentum_origin_margin: margin,
                band_margin: margin,
            },
            halving_n_max: self.in_range("limits.halving_n_max", 1, 50)?,
        };

        let (dir, _) = self.raw("output.dir")?;
        let output_dir = (!dir.is_empty()).then(|| PathBuf::from(dir));
        let format = self.scalar("output.format")?;

        let echo = self.values.iter().map(|(k, (v, _))| (k.clone(), v.clone())).collect();
        Ok(RunConfig {
            suites,
            seed,
            coulomb,
            oscillator,
            radial,
            ks,
            grid,
            probes,
            algebra_k: self.positive("algebra.k")?,
            casimir,
            limits,
            output_dir,
            format,
            echo,
        })
    }
}

impl RunConfig {
    /// Defaults plus a seed.
    pub fn with_seed(seed: u64) -> Self {
        ConfigBuilder::default().seed(seed).build().expect("defaults are valid")
    }

    /// Parses a config body, applies overrides in order and validates.
    pub fn from_parts(text: Option<&str>, overrides: &[String], seed: Option<u64>) -> Result<Self, ConfigError> {
        let mut b = ConfigBuilder::default();
        if let Some(text) = text {
            b = b.parse_text(text)?;
        }
        for o in overrides {
            b = b.set(o)?;
        }
        if let Some(seed) = seed {
            b = b.seed(seed);
        }
        b.build()
    }

    /// Seed for one named stream, derived from the master seed so that suites
    /// never share random draws.
    pub fn stream_seed(&self, tag: &str) -> u64 {
        // FNV-1a over the tag, then a splitmix64 finaliser.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in tag.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x100_0000_01b3);
        }
        let mut z = self.seed ^ h;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}
