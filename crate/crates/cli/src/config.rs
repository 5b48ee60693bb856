//! TOML run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use endoscope::elliptic::{EllipticConfig, Truncation};
use endoscope::orbital::{standard_theta_data, BumpProfile, FChoice, PadicStepFunction, ThetaData, ThetaInf};
use endoscope::SConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// dotted path of the offending field, empty for whole-file errors
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn at(field: &str, message: impl fmt::Display) -> Self {
        ConfigError { field: field.into(), message: message.to_string() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

/// A scalar or a list of scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacesSection {
    pub finite_places: Vec<u64>,
    /// Hecke index (one value or a list)
    pub n: OneOrMany<u64>,
}

/// Named bump family for `theta_inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    /// `smooth` (`exp(-1/(1-u^2))`), `poly` (`(1-u^2)^order`) or `zero`
    #[serde(default = "smooth")]
    pub family: String,
    #[serde(default)]
    pub center: f64,
    #[serde(default = "one")]
    pub half_width: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub order: Option<u32>,
}

fn smooth() -> String {
    "smooth".into()
}

fn one() -> f64 {
    1.0
}

impl BumpSpec {
    fn build(&self, field: &str) -> Result<ThetaInf, ConfigError> {
        let base = |profile| ThetaInf { center: self.center, half_width: self.half_width, amplitude: self.amplitude, profile };
        let th = match self.family.as_str() {
            "smooth" => base(BumpProfile::Smooth),
            "poly" => {
                let n = self.order.ok_or_else(|| ConfigError::at(&format!("{field}.order"), "poly family needs an order"))?;
                base(BumpProfile::Poly(n))
            }
            "zero" => ThetaInf::zero(),
            other => return Err(ConfigError::at(&format!("{field}.family"), format!("unknown bump family {other:?}"))),
        };
        if th.amplitude != 0.0 && !(th.half_width > 0.0 && th.half_width.is_finite()) {
            return Err(ConfigError::at(&format!("{field}.half_width"), "must be finite and positive"));
        }
        Ok(th)
    }
}

/// One explicit `theta_q^{sign, nu}` from inline JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepEntry {
    pub sign: i32,
    pub nu: Vec<i32>,
    pub place: usize,
    pub step: PadicStepFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaSection {
    /// per finite place: `standard:f=K`, `standard:f=I`, `standard:f=X^m` (prefix optional),
    /// or `json:` followed by a list of step entries (then all places come from the JSON)
    pub f: Vec<String>,
    pub vartheta: OneOrMany<f64>,
    pub plus: BumpSpec,
    pub minus: BumpSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    /// multiplies every numerical limit
    #[serde(default = "one")]
    pub scale: f64,
    /// relative tolerance of the final residual
    #[serde(rename = "final", default = "final_default")]
    pub final_rel: f64,
}

fn final_default() -> f64 {
    1e-2
}

impl Default for ToleranceSection {
    fn default() -> Self {
        ToleranceSection { scale: 1.0, final_rel: final_default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "S")]
    pub places: PlacesSection,
    pub theta: ThetaSection,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default)]
    pub tolerance: ToleranceSection,
    #[serde(default = "one_job")]
    pub jobs: usize,
}

fn one_job() -> usize {
    1
}

pub const DEFAULT_TOML: &str = r#"jobs = 1

[S]
finite_places = [2]
n = 1

[theta]
f = ["standard:f=K"]
vartheta = 0.5
plus = { family = "smooth", center = 2.0, half_width = 0.7 }
minus = { family = "smooth", center = 0.0, half_width = 1.2 }

[tolerance]
scale = 1.0
final = 1e-2
"#;

enum ThetaSpec {
    Standard(Vec<FChoice>),
    Steps(Vec<StepEntry>),
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| ConfigError::at("", format!("cannot read {}: {e}", p.display())))?,
            None => DEFAULT_TOML.to_string(),
        };
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let rc: RunConfig = toml::from_str(text).map_err(|e| ConfigError::at("", e.to_string().trim_end()))?;
        rc.validate()?;
        Ok(rc)
    }

    /// Cheap checks on every field; the expensive theta construction happens later.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let ns = self.places.n.to_vec();
        if ns.is_empty() {
            return Err(ConfigError::at("S.n", "needs at least one value"));
        }
        for n in &ns {
            SConfig::new(self.places.finite_places.clone(), *n).map_err(|e| ConfigError::at("S.finite_places", e))?;
        }
        let vts = self.theta.vartheta.to_vec();
        if vts.is_empty() {
            return Err(ConfigError::at("theta.vartheta", "needs at least one value"));
        }
        for v in vts {
            if !(v > 0.0 && v < 1.0) {
                return Err(ConfigError::at("theta.vartheta", format!("{v} must lie in (0, 1)")));
            }
        }
        self.theta.plus.build("theta.plus")?;
        self.theta.minus.build("theta.minus")?;
        self.theta_spec()?;
        if !(self.tolerance.scale > 0.0 && self.tolerance.scale.is_finite()) {
            return Err(ConfigError::at("tolerance.scale", "must be finite and positive"));
        }
        if !(self.tolerance.final_rel > 0.0) {
            return Err(ConfigError::at("tolerance.final", "must be positive"));
        }
        if self.jobs == 0 {
            return Err(ConfigError::at("jobs", "must be at least 1"));
        }
        Ok(())
    }

    fn theta_spec(&self) -> Result<ThetaSpec, ConfigError> {
        let r = self.places.finite_places.len();
        let f = &self.theta.f;
        if let [only] = f.as_slice() {
            if let Some(js) = only.trim().strip_prefix("json:") {
                let steps: Vec<StepEntry> = serde_json::from_str(js).map_err(|e| ConfigError::at("theta.f[0]", format!("bad step JSON: {e}")))?;
                for (i, s) in steps.iter().enumerate() {
                    let field = format!("theta.f[0][{i}]");
                    match self.places.finite_places.get(s.place) {
                        Some(&q) if q == s.step.prime => {}
                        _ => return Err(ConfigError::at(&field, format!("place {} does not carry prime {}", s.place, s.step.prime))),
                    }
                    if s.nu.len() != r || !(s.sign == 1 || s.sign == -1) {
                        return Err(ConfigError::at(&field, "needs sign = +-1 and one nu per place"));
                    }
                }
                return Ok(ThetaSpec::Steps(steps));
            }
        }
        if f.len() != r {
            return Err(ConfigError::at("theta.f", format!("{} entries for {r} finite places", f.len())));
        }
        let mut out = vec![];
        for (i, s) in f.iter().enumerate() {
            let body = s.trim();
            let body = body.strip_prefix("standard:").unwrap_or(body);
            let body = body.strip_prefix("f=").unwrap_or(body);
            out.push(FChoice::parse_standard(body).map_err(|e| ConfigError::at(&format!("theta.f[{i}]"), e))?);
        }
        Ok(ThetaSpec::Standard(out))
    }

    /// One elliptic configuration per `(n, vartheta)`, `n` outer.
    pub fn elliptic_configs(&self, jobs: usize) -> Result<Vec<EllipticConfig>, ConfigError> {
        let plus = self.theta.plus.build("theta.plus")?;
        let minus = self.theta.minus.build("theta.minus")?;
        let mut tr = self.truncation.clone();
        tr.jobs = jobs;
        let spec = self.theta_spec()?;
        let mut out = vec![];
        for n in self.places.n.to_vec() {
            let cfg = SConfig::new(self.places.finite_places.clone(), n).map_err(|e| ConfigError::at("S", e))?;
            let theta = match &spec {
                ThetaSpec::Standard(f) => standard_theta_data(f, &cfg.finite_places, n, plus, minus, tr.padic_depth)
                    .map_err(|e| ConfigError::at("theta.f", e))?,
                ThetaSpec::Steps(steps) => {
                    let mut theta_q = BTreeMap::new();
                    let mut nu_bound = 0;
                    for s in steps {
                        nu_bound = nu_bound.max(s.nu.iter().map(|v| v.abs()).max().unwrap_or(0) + 1);
                        theta_q.insert((s.sign, s.nu.clone(), s.place), s.step.clone());
                    }
                    let f_choices = steps.iter().map(|s| FChoice::Step(s.step.clone())).collect();
                    ThetaData { theta_inf_plus: plus, theta_inf_minus: minus, theta_q, nu_bound, singular_error: 0.0, f_choices }
                }
            };
            for vt in self.theta.vartheta.to_vec() {
                let ec = EllipticConfig::new(cfg.clone(), theta.clone(), vt, tr.clone(), self.tolerance.final_rel)
                    .map_err(|e| ConfigError::at("truncation", e))?;
                out.push(ec);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_parses() {
        let rc = RunConfig::parse(DEFAULT_TOML).unwrap();
        assert_eq!(rc.places.finite_places, vec![2]);
        assert_eq!(rc.truncation, Truncation::default());
    }

    #[test]
    fn missing_two_names_the_field() {
        let t = DEFAULT_TOML.replace("finite_places = [2]", "finite_places = [3]");
        let e = RunConfig::parse(&t).unwrap_err();
        assert_eq!(e.field, "S.finite_places");
        assert_eq!(e.message, "finite_places must contain 2");
    }

    #[test]
    fn bad_fields() {
        let t = DEFAULT_TOML.replace("\"standard:f=K\"", "\"standard:f=Q\"");
        assert_eq!(RunConfig::parse(&t).unwrap_err().field, "theta.f[0]");
        let t = DEFAULT_TOML.replace("vartheta = 0.5", "vartheta = [0.3, 1.5]");
        assert_eq!(RunConfig::parse(&t).unwrap_err().field, "theta.vartheta");
        let t = DEFAULT_TOML.replace("family = \"smooth\", center = 2.0", "family = \"poly\", center = 2.0");
        assert_eq!(RunConfig::parse(&t).unwrap_err().field, "theta.plus.order");
        let t = format!("{DEFAULT_TOML}\n[truncation]\nomega_maxx = 3.0\n");
        let e = RunConfig::parse(&t).unwrap_err();
        assert!(e.message.contains("omega_maxx"), "{e}");
    }

    #[test]
    fn lists_expand_n_outer() {
        let t = DEFAULT_TOML.replace("n = 1", "n = [1, 3]").replace("vartheta = 0.5", "vartheta = [0.3, 0.7]");
        let rc = RunConfig::parse(&t).unwrap();
        let ecs = rc.elliptic_configs(1).unwrap();
        let got: Vec<(u64, f64)> = ecs.iter().map(|e| (e.cfg.hecke_n, e.vartheta)).collect();
        assert_eq!(got, vec![(1, 0.3), (1, 0.7), (3, 0.3), (3, 0.7)]);
    }

    #[test]
    fn inline_step_data() {
        let js = r#"json:[{"sign":1,"nu":[0],"place":0,"step":{"prime":2,"pieces":[{"center":"1","radius_exp":2,"re":1.0,"im":0.0}]}}]"#;
        let t = DEFAULT_TOML.replace("\"standard:f=K\"", &format!("'{js}'"));
        let rc = RunConfig::parse(&t).unwrap();
        let ecs = rc.elliptic_configs(1).unwrap();
        assert_eq!(ecs[0].theta.theta_q.len(), 1);
        let bad = t.replace("\"prime\":2", "\"prime\":3");
        assert_eq!(RunConfig::parse(&bad).unwrap_err().field, "theta.f[0][0]");
    }
}
