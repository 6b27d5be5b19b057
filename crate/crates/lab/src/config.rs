//! Flat `key = value` scenario files with dotted section keys.
//!
//! `#` starts a comment. Every key is consumed exactly once; unknown or
//! duplicated keys are diagnostics, never silently ignored.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use viscowave::{Domain, ModalSeries, ModalTerm, SourceSign, TimeProfile};

/// Parse or validation failure, located by line and key where possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, key: &str, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    pub fn key(key: &str, message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    pub fn general(message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            key: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.key) {
            (Some(l), Some(k)) => write!(f, "line {l}, key `{k}`: {}", self.message),
            (None, Some(k)) => write!(f, "key `{k}`: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

type Entries = BTreeMap<String, (String, usize)>;

struct Reader {
    entries: Entries,
    used: RefCell<BTreeSet<String>>,
}

impl Reader {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = Entries::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError {
                    line: Some(line),
                    key: None,
                    message: format!("expected `key = value`, got `{content}`"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(ConfigError {
                    line: Some(line),
                    key: None,
                    message: format!("malformed key `{key}`"),
                });
            }
            if let Some((_, first)) = entries.get(key) {
                return Err(ConfigError::at(line, key, format!("duplicate key (first set on line {first})")));
            }
            entries.insert(key.to_string(), (value.to_string(), line));
        }
        Ok(Reader {
            entries,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    fn raw(&self, key: &str) -> Option<(&str, usize)> {
        let hit = self.entries.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some((hit.0.as_str(), hit.1))
    }

    fn has_prefix(&self, prefix: &str) -> bool {
        self.entries.keys().any(|k| k.starts_with(prefix))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| ConfigError::at(line, key, format!("cannot parse `{v}`"))),
        }
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v
                .split(',')
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<T>()
                        .map_err(|_| ConfigError::at(line, key, format!("cannot parse list item `{s}`")))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    fn word(&self, key: &str, allowed: &[&str], default: &str) -> Result<String, ConfigError> {
        match self.raw(key) {
            None => Ok(default.to_string()),
            Some((v, line)) => {
                if allowed.contains(&v) {
                    Ok(v.to_string())
                } else {
                    Err(ConfigError::at(line, key, format!("expected one of {allowed:?}, got `{v}`")))
                }
            }
        }
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.1)
    }

    fn finish(&self) -> Result<(), ConfigError> {
        let used = self.used.borrow();
        match self.entries.iter().find(|(k, _)| !used.contains(*k)) {
            Some((k, (_, line))) => Err(ConfigError::at(*line, k, "unknown key")),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelConfig {
    Prony { amplitudes: Vec<f64>, rates: Vec<f64> },
    Power { amplitude: f64, exponent: f64 },
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeConfig {
    Full,
    Truncated { k: f64 },
    Cutoff { n: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependConfig {
    pub deltas: Vec<f64>,
    /// Direction of the perturbation; the base past history when absent.
    pub perturbation: Option<ModalSeries<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub m: Vec<f64>,
    pub p: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub signs: Vec<SourceSign>,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeConfig {
    pub levels: usize,
    /// Spatial part of the weak-form test function, as `(mode, amplitude)`.
    pub test_modes: Vec<(usize, f64)>,
    pub test_omega: f64,
}

/// Everything a scenario file can set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub domain: Domain<f64>,
    pub modes: usize,
    pub kernel: KernelConfig,
    pub tail_tolerance: f64,
    pub damping_m: f64,
    pub damping_coefficient: f64,
    pub source_p: f64,
    pub source_growth: Option<f64>,
    pub source_sign: SourceSign,
    /// `false` switches the source off entirely.
    pub source_on: bool,
    pub source_mode: ModeConfig,
    pub past: ModalSeries<f64>,
    pub dt: f64,
    pub horizon: f64,
    pub lipschitz_samples: usize,
    pub depend: DependConfig,
    pub sweep: SweepConfig,
    pub converge: ConvergeConfig,
}

fn parse_modes(r: &Reader, key: &str) -> Result<Vec<(usize, f64)>, ConfigError> {
    let Some((v, line)) = r.raw(key) else {
        return Err(ConfigError::key(key, "missing mode list"));
    };
    v.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (j, a) = item
                .split_once(':')
                .ok_or_else(|| ConfigError::at(line, key, format!("expected `mode:amplitude`, got `{item}`")))?;
            let j: usize = j
                .trim()
                .parse()
                .map_err(|_| ConfigError::at(line, key, format!("bad mode number `{j}`")))?;
            let a: f64 = a
                .trim()
                .parse()
                .map_err(|_| ConfigError::at(line, key, format!("bad amplitude `{a}`")))?;
            if j == 0 {
                return Err(ConfigError::at(line, key, "mode numbers start at 1"));
            }
            Ok((j, a))
        })
        .collect()
}

fn parse_series(r: &Reader, prefix: &str) -> Result<Option<ModalSeries<f64>>, ConfigError> {
    if !r.has_prefix(&format!("{prefix}.")) {
        return Ok(None);
    }
    let scale: f64 = r.or(&format!("{prefix}.scale"), 1.0)?;
    let mut terms = Vec::new();
    let mut i = 1;
    loop {
        let key = format!("{prefix}.{i}.profile");
        let Some((kind, line)) = r.raw(&key) else {
            break;
        };
        let field = |name: &str| format!("{prefix}.{i}.{name}");
        let profile = match kind {
            "constant" => TimeProfile::Constant,
            "polynomial" => TimeProfile::Polynomial(
                r.list(&field("coefficients"))?
                    .ok_or_else(|| ConfigError::key(&field("coefficients"), "polynomial needs coefficients"))?,
            ),
            "trig" => TimeProfile::Trig {
                omega: r.or(&field("omega"), 1.0)?,
                phase: r.or(&field("phase"), 0.0)?,
            },
            "exponential" => TimeProfile::Exponential {
                rate: r.or(&field("rate"), 1.0)?,
            },
            other => {
                return Err(ConfigError::at(
                    line,
                    &key,
                    format!("unknown profile `{other}` (constant, polynomial, trig, exponential)"),
                ))
            }
        };
        let modes = parse_modes(r, &field("modes"))?
            .into_iter()
            .map(|(j, a)| (j, a * scale))
            .collect();
        terms.push(ModalTerm { profile, modes });
        i += 1;
    }
    if terms.is_empty() {
        return Err(ConfigError::key(
            &format!("{prefix}.1.profile"),
            "history terms must be numbered from 1",
        ));
    }
    Ok(Some(ModalSeries { terms }))
}

fn sign_of(word: &str) -> Option<SourceSign> {
    match word {
        "building" => Some(SourceSign::EnergyBuilding),
        "dissipative" => Some(SourceSign::Dissipative),
        _ => None,
    }
}

fn positive(r: &Reader, key: &str, value: f64) -> Result<f64, ConfigError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        let err = format!("must be positive and finite, got {value}");
        Err(match r.line_of(key) {
            Some(l) => ConfigError::at(l, key, err),
            None => ConfigError::key(key, err),
        })
    }
}

impl ScenarioConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::general(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let r = Reader::parse(text)?;

        let domain = match r.word("domain", &["interval", "rectangle"], "interval")?.as_str() {
            "interval" => Domain::Interval {
                length: positive(&r, "domain.length", r.or("domain.length", 1.0)?)?,
            },
            _ => Domain::Rectangle {
                lx: positive(&r, "domain.lx", r.or("domain.lx", 1.0)?)?,
                ly: positive(&r, "domain.ly", r.or("domain.ly", 1.0)?)?,
            },
        };
        let modes: usize = r.or("basis.modes", 32)?;
        if modes == 0 {
            return Err(ConfigError::at(r.line_of("basis.modes").unwrap_or(0), "basis.modes", "need at least one mode"));
        }

        let kernel = match r.word("kernel.family", &["prony", "power", "none"], "prony")?.as_str() {
            "prony" => KernelConfig::Prony {
                amplitudes: r.list("kernel.amplitudes")?.unwrap_or_else(|| vec![1.0]),
                rates: r.list("kernel.rates")?.unwrap_or_else(|| vec![1.0]),
            },
            "power" => KernelConfig::Power {
                amplitude: r.or("kernel.amplitude", 1.0)?,
                exponent: r.or("kernel.exponent", 3.0)?,
            },
            _ => KernelConfig::None,
        };
        let tail_tolerance = r.or("kernel.tail_tolerance", 1e-10)?;

        let damping_m = r.or("damping.m", 3.0)?;
        let damping_coefficient = r.or("damping.coefficient", 1.0)?;

        let source_on = r.word("source", &["on", "off"], "on")? == "on";
        let source_p = r.or("source.p", 3.0)?;
        let source_growth = r.get("source.growth")?;
        let source_sign = sign_of(&r.word("source.sign", &["building", "dissipative"], "building")?)
            .expect("word restricted to known signs");
        let source_mode = match r.word("source.mode", &["full", "truncated", "cutoff"], "full")?.as_str() {
            "full" => ModeConfig::Full,
            "truncated" => ModeConfig::Truncated {
                k: positive(&r, "source.k", r.get("source.k")?.unwrap_or(f64::NAN))?,
            },
            _ => {
                let n: u32 = r
                    .get("source.n")?
                    .ok_or_else(|| ConfigError::key("source.n", "cutoff mode needs a level n ≥ 1"))?;
                if n == 0 {
                    return Err(ConfigError::key("source.n", "cutoff level must be at least 1"));
                }
                ModeConfig::Cutoff { n }
            }
        };

        let past = parse_series(&r, "past")?.unwrap_or_else(ModalSeries::zero);

        let dt = positive(&r, "time.dt", r.or("time.dt", 1.0 / 64.0)?)?;
        let horizon: f64 = r.or("time.horizon", 1.0)?;
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(ConfigError::key("time.horizon", "must be finite and nonnegative"));
        }
        let lipschitz_samples = r.or("checks.lipschitz_samples", 10_000)?;

        let deltas = r
            .list("depend.deltas")?
            .unwrap_or_else(|| (0..5).map(|k| 0.1 * 0.5f64.powi(k)).collect());
        if deltas.iter().any(|d: &f64| !(*d >= 0.0) || !d.is_finite()) {
            return Err(ConfigError::key("depend.deltas", "perturbation sizes must be finite and nonnegative"));
        }
        let perturbation = parse_series(&r, "depend.perturbation")?;

        let signs = match r.list::<String>("sweep.sign")? {
            None => vec![SourceSign::EnergyBuilding],
            Some(words) => words
                .iter()
                .map(|w| {
                    sign_of(w).ok_or_else(|| {
                        ConfigError::at(
                            r.line_of("sweep.sign").unwrap_or(0),
                            "sweep.sign",
                            format!("expected building or dissipative, got `{w}`"),
                        )
                    })
                })
                .collect::<Result<_, _>>()?,
        };
        let sweep = SweepConfig {
            m: r.list("sweep.m")?.unwrap_or_else(|| vec![damping_m]),
            p: r.list("sweep.p")?.unwrap_or_else(|| vec![source_p]),
            amplitude: r.list("sweep.amplitude")?.unwrap_or_else(|| vec![1.0]),
            signs,
            horizon: r.or("sweep.horizon", horizon)?,
        };

        let converge = ConvergeConfig {
            levels: r.or("converge.levels", 5)?,
            test_modes: if r.line_of("converge.test.modes").is_some() {
                parse_modes(&r, "converge.test.modes")?
            } else {
                vec![(1, 1.0)]
            },
            test_omega: r.or("converge.test.omega", 1.0)?,
        };
        if converge.levels < 2 {
            return Err(ConfigError::key("converge.levels", "need at least two levels to fit an order"));
        }

        r.finish()?;
        Ok(ScenarioConfig {
            domain,
            modes,
            kernel,
            tail_tolerance,
            damping_m,
            damping_coefficient,
            source_p,
            source_growth,
            source_sign,
            source_on,
            source_mode,
            past,
            dt,
            horizon,
            lipschitz_samples,
            depend: DependConfig { deltas, perturbation },
            sweep,
            converge,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_file() {
        let c = ScenarioConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(c.modes, 32);
        assert_eq!(c.kernel, KernelConfig::Prony { amplitudes: vec![1.0], rates: vec![1.0] });
        assert!(c.past.terms.is_empty());
        assert_eq!(c.depend.deltas.len(), 5);
    }

    #[test]
    fn past_terms_and_scale() {
        let c = ScenarioConfig::parse(
            "past.scale = 2\npast.1.profile = trig\npast.1.omega = 3\npast.1.modes = 1:1.0, 3:-0.5\n\
             past.2.profile = polynomial\npast.2.coefficients = 0, 1\npast.2.modes = 2:1",
        )
        .unwrap();
        assert_eq!(c.past.terms.len(), 2);
        assert_eq!(c.past.terms[0].modes, vec![(1, 2.0), (3, -1.0)]);
        assert_eq!(c.past.terms[1].profile, TimeProfile::Polynomial(vec![0.0, 1.0]));
    }

    #[test]
    fn diagnostics_name_line_and_key() {
        let e = ScenarioConfig::parse("basis.modes = 8\ndamping.m = three").unwrap_err();
        assert_eq!(e.line, Some(2));
        assert_eq!(e.key.as_deref(), Some("damping.m"));
        let e = ScenarioConfig::parse("damping.q = 1").unwrap_err();
        assert_eq!(e.to_string(), "line 1, key `damping.q`: unknown key");
        let e = ScenarioConfig::parse("a = 1\na = 2").unwrap_err();
        assert!(e.message.contains("duplicate"));
        let e = ScenarioConfig::parse("just words").unwrap_err();
        assert_eq!(e.line, Some(1));
        let e = ScenarioConfig::parse("source.mode = truncated").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("source.k"));
        let e = ScenarioConfig::parse("past.1.profile = spline\npast.1.modes = 1:1").unwrap_err();
        assert!(e.message.contains("spline"));
    }

    #[test]
    fn malformed_inputs_never_panic() {
        for text in ["=", "= 3", "x =", "past.2.profile = trig", "time.dt = -1", "sweep.sign = up", "basis.modes = 0", "past.1.profile = trig\npast.1.modes = 0:1"] {
            assert!(ScenarioConfig::parse(text).is_err(), "{text}");
        }
    }
}
