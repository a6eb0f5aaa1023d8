use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ExampleId;
use crate::error::{Error, Result};
use crate::kkt::KktConfig;
use crate::regpath::{default_schedule, InnerTolerances, RegPathConfig};

/// Which data set to run: a manufactured example, or constant data without a
/// known solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExampleSel {
    Manufactured(ExampleId),
    Custom,
}

impl fmt::Display for ExampleSel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExampleSel::Manufactured(id) => write!(f, "{id}"),
            ExampleSel::Custom => f.write_str("custom"),
        }
    }
}

impl std::str::FromStr for ExampleSel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" => Ok(ExampleSel::Manufactured(ExampleId::One)),
            "2" => Ok(ExampleSel::Manufactured(ExampleId::Two)),
            "custom" => Ok(ExampleSel::Custom),
            other => Err(Error::Config(format!("unknown example {other:?}, expected 1, 2, or custom"))),
        }
    }
}

impl Serialize for ExampleSel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExampleSel::Manufactured(ExampleId::One) => s.serialize_u8(1),
            ExampleSel::Manufactured(ExampleId::Two) => s.serialize_u8(2),
            ExampleSel::Custom => s.serialize_str("custom"),
        }
    }
}

impl<'de> Deserialize<'de> for ExampleSel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Text(String),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Num(n) => n.to_string(),
            Raw::Text(t) => t,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Kkt,
    State,
    Regpath,
    Check,
    #[default]
    Sweep,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Kkt => "kkt",
            Mode::State => "state",
            Mode::Regpath => "regpath",
            Mode::Check => "check",
            Mode::Sweep => "sweep",
        })
    }
}

/// Optional overrides of solver and diagnostic tolerances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub tol_residual: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol_p_critical: Option<f64>,
    pub zero_tol: Option<f64>,
    pub sign_tol: Option<f64>,
    pub stationarity_tol: Option<f64>,
}

/// Constant source and target for `example = "custom"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomData {
    pub f: f64,
    pub y_d: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub example: ExampleSel,
    #[serde(default = "default_m_list")]
    pub m_list: Vec<usize>,
    #[serde(default = "default_alpha_list")]
    pub alpha_list: Vec<f64>,
    /// Defaults to `1e-4` for example 1 and `1e-12` otherwise.
    #[serde(default)]
    pub gamma_list: Option<Vec<f64>>,
    #[serde(default = "default_schedule")]
    pub eps_schedule: Vec<f64>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub custom: Option<CustomData>,
}

fn default_m_list() -> Vec<usize> {
    vec![33, 65, 129, 257]
}

fn default_alpha_list() -> Vec<f64> {
    vec![1e-4]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// Defaults for one example, matching the first block of its table.
    pub fn for_example(example: ExampleSel) -> Self {
        Self {
            example,
            m_list: default_m_list(),
            alpha_list: default_alpha_list(),
            gamma_list: None,
            eps_schedule: default_schedule(),
            mode: Mode::default(),
            output_dir: default_output_dir(),
            tolerances: Tolerances::default(),
            custom: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn gammas(&self) -> Vec<f64> {
        match &self.gamma_list {
            Some(g) => g.clone(),
            None if self.example == ExampleSel::Manufactured(ExampleId::One) => vec![1e-4],
            None => vec![1e-12],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        if self.m_list.is_empty() {
            return cfg_err("m_list is empty".into());
        }
        if self.alpha_list.is_empty() {
            return cfg_err("alpha_list is empty".into());
        }
        if self.gammas().is_empty() {
            return cfg_err("gamma_list is empty".into());
        }
        for &m in &self.m_list {
            if m < 2 {
                return cfg_err(format!("m must be at least 2, got {m}"));
            }
            if matches!(self.example, ExampleSel::Manufactured(_)) && m % 2 == 0 {
                return cfg_err(format!("m must be odd for the manufactured examples, got {m}"));
            }
        }
        for &a in &self.alpha_list {
            self.kkt_config(a, 1.0).map_err(|e| Error::Config(e.to_string()))?;
        }
        for g in self.gammas() {
            self.kkt_config(1.0, g).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.mode == Mode::Regpath {
            self.regpath_config().validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        match (self.example, &self.custom) {
            (ExampleSel::Custom, None) => return cfg_err("example \"custom\" needs a \"custom\" block".into()),
            (ExampleSel::Manufactured(_), Some(_)) => {
                return cfg_err("a \"custom\" block is only valid with example \"custom\"".into())
            }
            (ExampleSel::Custom, Some(c)) if !(c.f.is_finite() && c.y_d.is_finite()) => {
                return cfg_err("custom data must be finite".into())
            }
            _ => {}
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("zero_tol", t.zero_tol),
            ("sign_tol", t.sign_tol),
            ("stationarity_tol", t.stationarity_tol),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0) {
                    return cfg_err(format!("{name} must be non-negative"));
                }
            }
        }
        Ok(())
    }

    pub fn kkt_config(&self, alpha: f64, gamma: f64) -> Result<KktConfig> {
        let mut c = KktConfig::new(alpha, gamma)?;
        let t = &self.tolerances;
        if let Some(v) = t.tol_residual {
            c.tol_residual = v;
        }
        if let Some(v) = t.max_iter {
            c.max_iter = v;
        }
        if let Some(v) = t.tol_p_critical {
            c.tol_p_critical = v;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn regpath_config(&self) -> RegPathConfig {
        let mut inner = InnerTolerances::default();
        if let Some(v) = self.tolerances.tol_residual {
            inner.tol_residual = v;
        }
        RegPathConfig {
            eps_schedule: self.eps_schedule.clone(),
            inner,
            warm_start: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = RunConfig::from_json(r#"{"example": 1}"#).unwrap();
        assert_eq!(c.m_list, vec![33, 65, 129, 257]);
        assert_eq!(c.gammas(), vec![1e-4]);
        let c = RunConfig::from_json(r#"{"example": "2", "mode": "check"}"#).unwrap();
        assert_eq!(c.gammas(), vec![1e-12]);
        assert_eq!(c.mode, Mode::Check);
    }

    #[test]
    fn empty_alpha_list_is_rejected() {
        let e = RunConfig::from_json(r#"{"example": 1, "alpha_list": []}"#).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn invalid_configs() {
        for bad in [
            r#"{}"#,
            r#"{"example": 3}"#,
            r#"{"example": 1, "m_list": [32]}"#,
            r#"{"example": 1, "m_list": [1]}"#,
            r#"{"example": 1, "gamma_list": [-1]}"#,
            r#"{"example": 1, "unknown": 0}"#,
            r#"{"example": "custom"}"#,
            r#"{"example": 1, "custom": {"f": 1, "y_d": 0}}"#,
            r#"{"example": 1, "mode": "regpath", "eps_schedule": [1e-3, 1e-2]}"#,
            r#"{"example": 1, "tolerances": {"sign_tol": -1}}"#,
            r#"[1, 2]"#,
        ] {
            assert!(RunConfig::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn custom_allows_even_meshes() {
        let c = RunConfig::from_json(r#"{"example": "custom", "m_list": [8], "custom": {"f": 10, "y_d": 0}}"#).unwrap();
        assert_eq!(c.example, ExampleSel::Custom);
    }

    #[test]
    fn floats_round_trip_exactly() {
        let c = RunConfig::from_json(r#"{"example": 2, "gamma_list": [1e-12, 1e-81]}"#).unwrap();
        let back = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn round_trip() {
        let c = RunConfig::for_example(ExampleSel::Manufactured(ExampleId::Two));
        let back = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, back);
    }
}
