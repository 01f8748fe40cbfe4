use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::ValueEnum;
use hybrid_teleport::protocols::{Distillation, NormConvention, Protocol};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolArg {
    CvBsm,
    HbsmTwoState,
    HbsmFourState,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::CvBsm => Protocol::CvBsm,
            ProtocolArg::HbsmTwoState => Protocol::HbsmTwoState,
            ProtocolArg::HbsmFourState => Protocol::HbsmFourState,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistillArg {
    None,
    Qs,
    Pc,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormArg {
    Ratio,
    #[default]
    PerPoint,
}

impl From<NormArg> for NormConvention {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::Ratio => NormConvention::Ratio,
            NormArg::PerPoint => NormConvention::PerPoint,
        }
    }
}

impl NormArg {
    pub fn name(self) -> &'static str {
        match self {
            NormArg::Ratio => "ratio",
            NormArg::PerPoint => "per-point",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// A list of grid values, written either as `1,2,5` or as an inclusive range
/// `start:stop:step` (items may be mixed: `0,1:4:1,10`).
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(into = "Vec<f64>")]
pub struct Grid(pub Vec<f64>);

impl From<Grid> for Vec<f64> {
    fn from(g: Grid) -> Self {
        g.0
    }
}

impl FromStr for Grid {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        let mut out = Vec::new();
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let parts: Vec<&str> = item.split(':').collect();
            match parts.as_slice() {
                [v] => out.push(v.parse().with_context(|| format!("bad grid value {v:?}"))?),
                [a, b, step] => {
                    let a: f64 = a.parse().with_context(|| format!("bad range start {a:?}"))?;
                    let b: f64 = b.parse().with_context(|| format!("bad range stop {b:?}"))?;
                    let step: f64 = step.parse().with_context(|| format!("bad range step {step:?}"))?;
                    if !(step > 0.0) || b < a {
                        bail!("range {item:?} needs start <= stop and a positive step");
                    }
                    let n = ((b - a) / step + 1e-9).floor() as usize;
                    // integer multiples keep the values free of accumulated drift
                    out.extend((0..=n).map(|i| round_grid(a + step * i as f64)));
                }
                _ => bail!("grid item {item:?} is neither a number nor start:stop:step"),
            }
        }
        Ok(Grid(out))
    }
}

fn round_grid(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            List(Vec<f64>),
            One(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::List(v) => Ok(Grid(v)),
            Raw::One(v) => Ok(Grid(vec![v])),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// One sweep: a protocol, a distillation choice and the grids to cover.
///
/// Keys of the TOML document match the field names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub protocol: ProtocolArg,
    #[serde(default = "default_distill")]
    pub distill: DistillArg,
    pub r_db: Grid,
    /// Loss of both arms, or of arm 1 when `loss2_db` is given.
    pub loss_db: Grid,
    #[serde(default)]
    pub loss2_db: Option<Grid>,
    #[serde(default = "default_eta")]
    pub eta: Grid,
    /// Optimize the free parameters (gain, `T_s`, `T_c`).
    #[serde(default = "default_true")]
    pub optimize: bool,
    /// Fixed values used when `optimize` is off.
    #[serde(default = "default_g")]
    pub g: f64,
    #[serde(default = "default_ts")]
    pub ts: f64,
    #[serde(default = "default_tc")]
    pub tc: f64,
    #[serde(default)]
    pub norm_convention: NormArg,
    #[serde(default = "default_mass")]
    pub truncation_mass: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

fn default_distill() -> DistillArg {
    DistillArg::None
}
fn default_eta() -> Grid {
    Grid(vec![1.0])
}
fn default_true() -> bool {
    true
}
fn default_g() -> f64 {
    1.0
}
fn default_ts() -> f64 {
    0.25
}
fn default_tc() -> f64 {
    0.1
}
fn default_mass() -> f64 {
    hybrid_teleport::resource::DEFAULT_TRUNCATION_MASS
}

impl SweepConfig {
    pub fn new(protocol: ProtocolArg, distill: DistillArg, r_db: Vec<f64>, loss_db: Vec<f64>) -> Self {
        Self {
            protocol,
            distill,
            r_db: Grid(r_db),
            loss_db: Grid(loss_db),
            loss2_db: None,
            eta: default_eta(),
            optimize: true,
            g: default_g(),
            ts: default_ts(),
            tc: default_tc(),
            norm_convention: NormArg::default(),
            truncation_mass: default_mass(),
            out: None,
            format: Format::Csv,
        }
    }

    pub fn with_eta(mut self, eta: Vec<f64>) -> Self {
        self.eta = Grid(eta);
        self
    }

    pub fn from_toml_str(s: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn distillation(&self) -> Distillation {
        match self.distill {
            DistillArg::None => Distillation::None,
            DistillArg::Qs => Distillation::Qs { ts: self.ts },
            DistillArg::Pc => Distillation::Pc { tc: self.tc },
        }
    }

    /// Checks grids and scalar settings; runs before any computation.
    pub fn validate(&self) -> anyhow::Result<()> {
        let mut grids = vec![
            ("r_db", &self.r_db),
            ("loss_db", &self.loss_db),
            ("eta", &self.eta),
        ];
        if let Some(l2) = &self.loss2_db {
            grids.push(("loss2_db", l2));
        }
        for (name, g) in grids {
            if g.0.is_empty() {
                bail!("grid {name} is empty");
            }
            if g.0.iter().any(|v| !v.is_finite()) {
                bail!("grid {name} has a non-finite value");
            }
        }
        for (name, g) in [("r_db", &self.r_db), ("loss_db", &self.loss_db)] {
            if g.0.iter().any(|&v| v < 0.0) {
                bail!("grid {name} has a negative dB value");
            }
        }
        if let Some(l2) = &self.loss2_db {
            if l2.0.iter().any(|&v| v < 0.0) {
                bail!("grid loss2_db has a negative dB value");
            }
        }
        if self.eta.0.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            bail!("eta values must lie in (0, 1]");
        }
        if !(self.truncation_mass > 0.0 && self.truncation_mass < 1.0) {
            bail!("truncation_mass must lie in (0, 1)");
        }
        if !self.optimize {
            if !(self.g >= 0.0 && self.g.is_finite()) {
                bail!("g must be finite and >= 0");
            }
            if self.distill == DistillArg::Qs && !(self.ts > 0.0 && self.ts < 0.5) {
                bail!("ts must lie in (0, 0.5)");
            }
            if self.distill == DistillArg::Pc && !(self.tc > 0.0 && self.tc < 0.25) {
                bail!("tc must lie in (0, 0.25)");
            }
        }
        Ok(())
    }

    pub fn num_points(&self) -> usize {
        self.r_db.0.len()
            * self.loss_db.0.len()
            * self.loss2_db.as_ref().map_or(1, |g| g.0.len())
            * self.eta.0.len()
    }
}
