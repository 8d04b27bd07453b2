//! Run configuration shared by the command line and TOML config files.
//!
//! Every field is optional so that a file and command-line flags can be
//! layered; [`RunConfig::resolve`] fills defaults for the chosen command and
//! family and rejects anything that does not apply to them.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functionals::DEFAULT_ENERGY_TOLERANCE;
use crate::mollifier::{MollifySpec, MollifyTarget, DEFAULT_RELATIVE_DELTA};
use crate::profiles::{
    AngularProfile, Piece, PieceKind, PiecewiseProfile, ProfileError, RadialDomain, SeparableAnsatz,
};
use crate::scans::fmt_float;
use crate::solvers::{CoreHaloParams, Family, FamilyKind, MonotonicParams, UniformParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("missing required setting `{field}` for the {context}")]
    Missing { field: &'static str, context: String },
    #[error("setting `{field}` does not apply to the {context}")]
    Extraneous { field: &'static str, context: String },
    #[error("invalid setting `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid profile: {0}")]
    Profile(#[from] ProfileError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Human,
    Kv,
    Csv,
}

impl OutputFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputFormat::Human => "human",
            OutputFormat::Kv => "kv",
            OutputFormat::Csv => "csv",
        }
    }
}

/// The subcommand a configuration is resolved for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Certify,
    Report,
    Mollify,
    Scan,
    Asymptotics,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Certify => "certify",
            Command::Report => "report",
            Command::Mollify => "mollify",
            Command::Scan => "scan",
            Command::Asymptotics => "asymptotics",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Absolute ramp half-width.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Ramp half-width relative to the smallest piece width.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<MollifyTarget>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Spatial pieces of a custom ansatz; the zero tail is implied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spatial: Option<Vec<Piece>>,
    /// Momentum pieces of a custom ansatz; the zero tail is implied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub momentum: Option<Vec<Piece>>,
    /// Angular pieces covering `[-1, 1]`; `a` gives a plain cutoff instead.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angular: Option<Vec<Piece>>,
}

macro_rules! layer {
    ($base:ident, $top:ident, $($f:ident),*) => {
        RunConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

macro_rules! present {
    ($cfg:ident, $($f:ident),*) => {
        [$((stringify!($f), $cfg.$f.is_some())),*]
    };
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    /// Settings in `top` win over settings in `self`.
    pub fn layered(self, top: RunConfig) -> RunConfig {
        let base = self;
        layer!(
            base, top, family, r1, r2, r3, p, n, a, alpha, delta, delta_rel, target, tol_energy, format, out,
            p_min, p_max, points, a_points, threshold, spatial, momentum, angular
        )
    }

    fn context(cmd: Command, family: FamilyKind) -> String {
        format!("{} family under `{}`", family.as_str(), cmd.as_str())
    }

    /// Fills defaults for `cmd` and the chosen family, then checks that every
    /// supplied setting applies and every value is in range.
    pub fn resolve(self, cmd: Command) -> Result<RunConfig, ConfigError> {
        // The scaling fits exist only for the core-halo family.
        let implied = (cmd == Command::Asymptotics).then_some(FamilyKind::CoreHalo);
        let family = self.family.or(implied).ok_or(ConfigError::Missing {
            field: "family",
            context: format!("`{}` command", cmd.as_str()),
        })?;
        let context = Self::context(cmd, family);
        let allowed = allowed_fields(cmd, family).ok_or_else(|| ConfigError::Invalid {
            field: "family",
            reason: format!(
                "`{}` does not support the {} family",
                cmd.as_str(),
                family.as_str()
            ),
        })?;
        let cfg = &self;
        let supplied = present!(
            cfg, r1, r2, r3, p, n, a, alpha, delta, delta_rel, target, p_min, p_max, points, a_points,
            threshold, spatial, momentum, angular
        );
        for (field, is_set) in supplied {
            if is_set && !allowed.contains(&field) {
                return Err(ConfigError::Extraneous {
                    field: static_name(field),
                    context,
                });
            }
        }
        if self.delta.is_some() && self.delta_rel.is_some() {
            return Err(ConfigError::Invalid {
                field: "delta",
                reason: "give either `delta` or `delta-rel`, not both".into(),
            });
        }

        let mut out = self.with_defaults(cmd, family);
        out.family = Some(family);
        out.tol_energy.get_or_insert(DEFAULT_ENERGY_TOLERANCE);
        out.format.get_or_insert(OutputFormat::Human);
        out.check_ranges(cmd, family)?;
        Ok(out)
    }

    fn with_defaults(mut self, cmd: Command, family: FamilyKind) -> RunConfig {
        let scan = matches!(cmd, Command::Scan | Command::Asymptotics);
        match (family, scan) {
            (FamilyKind::Uniform, false) => {
                self.p.get_or_insert(1.0);
                self.a.get_or_insert(-0.8);
            }
            (FamilyKind::Uniform, true) => {
                self.p_min.get_or_insert(1e-2);
                self.p_max.get_or_insert(1e4);
                self.points.get_or_insert(200);
                self.a_points.get_or_insert(40);
            }
            (FamilyKind::CoreHalo, false) => {
                self.r1.get_or_insert(0.2);
                self.r2.get_or_insert(1.0);
                self.r3.get_or_insert(2.0);
                self.p.get_or_insert(1.0);
                self.a.get_or_insert(-0.8);
            }
            (FamilyKind::CoreHalo, true) => {
                self.p_min.get_or_insert(1e2);
                self.p_max.get_or_insert(1e4);
                self.points.get_or_insert(10);
                self.a.get_or_insert(-0.9);
                if cmd == Command::Asymptotics {
                    self.threshold.get_or_insert(-10.0);
                }
            }
            (FamilyKind::Monotonic, _) => {
                self.r1.get_or_insert(0.01);
                self.r2.get_or_insert(1.0 / 11.0);
                self.r3.get_or_insert(0.1);
                self.n.get_or_insert(3.0);
                self.a.get_or_insert(-0.95);
            }
            (FamilyKind::Custom, _) => {}
        }
        if cmd == Command::Mollify {
            if self.delta.is_none() {
                self.delta_rel.get_or_insert(DEFAULT_RELATIVE_DELTA);
            }
            self.target.get_or_insert(MollifyTarget::All);
        }
        self
    }

    fn check_ranges(&self, cmd: Command, family: FamilyKind) -> Result<(), ConfigError> {
        let positive = |field: &'static str, v: Option<f64>| match v {
            Some(x) if !(x.is_finite() && x > 0.0) => Err(ConfigError::Invalid {
                field,
                reason: format!("{x} is not a positive number"),
            }),
            _ => Ok(()),
        };
        for (field, v) in [
            ("r1", self.r1),
            ("r2", self.r2),
            ("r3", self.r3),
            ("p", self.p),
            ("n", self.n),
            ("alpha", self.alpha),
            ("tol-energy", self.tol_energy),
            ("p-min", self.p_min),
            ("p-max", self.p_max),
        ] {
            positive(field, v)?;
        }
        for (field, v) in [("delta", self.delta), ("delta-rel", self.delta_rel)] {
            if let Some(x) = v {
                if !(x.is_finite() && x >= 0.0) {
                    return Err(ConfigError::Invalid {
                        field,
                        reason: format!("{x} is not a non-negative number"),
                    });
                }
            }
        }
        if let Some(a) = self.a {
            if !(a > -1.0 && a <= 1.0) {
                return Err(ConfigError::Invalid {
                    field: "a",
                    reason: format!("{a} is outside (-1, 1]"),
                });
            }
        }
        if let (Some(r1), Some(r2), Some(r3)) = (self.r1, self.r2, self.r3) {
            if !(r1 <= r2 && r2 <= r3) {
                return Err(ConfigError::Invalid {
                    field: "r1",
                    reason: format!("radii must satisfy r1 <= r2 <= r3, got {r1}, {r2}, {r3}"),
                });
            }
        }
        if let (Some(lo), Some(hi)) = (self.p_min, self.p_max) {
            if !(lo <= hi) {
                return Err(ConfigError::Invalid {
                    field: "p-min",
                    reason: format!("p-min {lo} exceeds p-max {hi}"),
                });
            }
        }
        for (field, v) in [("points", self.points), ("a-points", self.a_points)] {
            if v == Some(0) {
                return Err(ConfigError::Invalid {
                    field,
                    reason: "grid is empty".into(),
                });
            }
        }
        if let Some(t) = self.threshold {
            if !(t < 0.0) {
                return Err(ConfigError::Invalid {
                    field: "threshold",
                    reason: format!("{t} is not negative"),
                });
            }
        }
        if family == FamilyKind::Custom && cmd != Command::Scan {
            self.custom_ansatz()?;
        }
        Ok(())
    }

    /// The parametrized family, for every family but `custom`.
    pub fn family(&self) -> Result<Family, ConfigError> {
        let kind = self.family.ok_or(ConfigError::Missing {
            field: "family",
            context: "run".into(),
        })?;
        let need = |field: &'static str, v: Option<f64>| {
            v.ok_or_else(|| ConfigError::Missing {
                field,
                context: format!("{} family", kind.as_str()),
            })
        };
        Ok(match kind {
            FamilyKind::Uniform => Family::Uniform(UniformParams {
                p: need("p", self.p)?,
                a: need("a", self.a)?,
            }),
            FamilyKind::CoreHalo => Family::CoreHalo(CoreHaloParams {
                r1: need("r1", self.r1)?,
                r2: need("r2", self.r2)?,
                r3: need("r3", self.r3)?,
                p: need("p", self.p)?,
                a: need("a", self.a)?,
                alpha: self.alpha,
            }),
            FamilyKind::Monotonic => Family::Monotonic(MonotonicParams {
                r1: need("r1", self.r1)?,
                r2: need("r2", self.r2)?,
                r3: need("r3", self.r3)?,
                n: need("n", self.n)?,
                a: need("a", self.a)?,
            }),
            FamilyKind::Custom => {
                return Err(ConfigError::Invalid {
                    field: "family",
                    reason: "the custom family has no free parameter".into(),
                })
            }
        })
    }

    /// The ansatz given by profile literals.
    pub fn custom_ansatz(&self) -> Result<SeparableAnsatz, ConfigError> {
        let missing = |field| ConfigError::Missing {
            field,
            context: "custom family".into(),
        };
        let spatial = self.spatial.clone().ok_or_else(|| missing("spatial"))?;
        let momentum = self.momentum.clone().ok_or_else(|| missing("momentum"))?;
        let angular = match (&self.angular, self.a) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid {
                    field: "angular",
                    reason: "give either `angular` pieces or a cutoff `a`, not both".into(),
                })
            }
            (Some(pieces), None) => AngularProfile::new(pieces.clone())?,
            (None, Some(a)) => AngularProfile::cutoff(a)?,
            (None, None) => return Err(missing("angular")),
        };
        Ok(SeparableAnsatz::new(
            PiecewiseProfile::from_support(spatial, RadialDomain::Position)?,
            PiecewiseProfile::from_support(momentum, RadialDomain::Momentum)?,
            angular,
        )?)
    }

    pub fn mollify_spec(&self) -> MollifySpec {
        let target = self.target.unwrap_or(MollifyTarget::All);
        match self.delta {
            Some(d) => MollifySpec::absolute(d, target),
            None => MollifySpec::relative(self.delta_rel.unwrap_or(DEFAULT_RELATIVE_DELTA), target),
        }
    }

    pub fn tol_energy(&self) -> f64 {
        self.tol_energy.unwrap_or(DEFAULT_ENERGY_TOLERANCE)
    }

    pub fn format(&self) -> OutputFormat {
        self.format.unwrap_or_default()
    }

    /// `config.<key>=<value>` pairs for every set field, in a fixed order.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut lines = Vec::new();
        let mut push = |k: &str, v: String| lines.push((format!("config.{k}"), v));
        if let Some(f) = self.family {
            push("family", f.as_str().into());
        }
        for (k, v) in [
            ("r1", self.r1),
            ("r2", self.r2),
            ("r3", self.r3),
            ("p", self.p),
            ("n", self.n),
            ("a", self.a),
            ("alpha", self.alpha),
            ("delta", self.delta),
            ("delta-rel", self.delta_rel),
        ] {
            if let Some(v) = v {
                push(k, fmt_float(v));
            }
        }
        if let Some(t) = self.target {
            push("target", t.as_str().into());
        }
        if let Some(t) = self.tol_energy {
            push("tol-energy", fmt_float(t));
        }
        for (k, v) in [("p-min", self.p_min), ("p-max", self.p_max)] {
            if let Some(v) = v {
                push(k, fmt_float(v));
            }
        }
        for (k, v) in [("points", self.points), ("a-points", self.a_points)] {
            if let Some(v) = v {
                push(k, v.to_string());
            }
        }
        if let Some(t) = self.threshold {
            push("threshold", fmt_float(t));
        }
        for (k, pieces) in [
            ("spatial", &self.spatial),
            ("momentum", &self.momentum),
            ("angular", &self.angular),
        ] {
            if let Some(pieces) = pieces {
                for (i, piece) in pieces.iter().enumerate() {
                    push(&format!("{k}.{i}"), piece_literal(piece));
                }
            }
        }
        if let Some(f) = self.format {
            push("format", f.as_str().into());
        }
        if let Some(o) = &self.out {
            push("out", o.display().to_string());
        }
        lines
    }
}

fn piece_literal(p: &Piece) -> String {
    let mut s = format!("[{}, {}) ", fmt_float(p.lo), fmt_float(p.hi));
    let _ = match p.kind {
        PieceKind::Constant { value } => write!(s, "constant value={}", fmt_float(value)),
        PieceKind::PowerLaw { value, exponent } => write!(
            s,
            "power-law value={} exponent={}",
            fmt_float(value),
            fmt_float(exponent)
        ),
        PieceKind::SmoothRamp {
            left,
            right,
            left_slope,
            right_slope,
        } => write!(
            s,
            "smooth-ramp left={} right={} left-slope={} right-slope={}",
            fmt_float(left),
            fmt_float(right),
            fmt_float(left_slope),
            fmt_float(right_slope)
        ),
    };
    s
}

const FIELD_NAMES: &[&str] = &[
    "r1",
    "r2",
    "r3",
    "p",
    "n",
    "a",
    "alpha",
    "delta",
    "delta-rel",
    "target",
    "p-min",
    "p-max",
    "points",
    "a-points",
    "threshold",
    "spatial",
    "momentum",
    "angular",
];

fn static_name(field: &str) -> &'static str {
    let dashed = field.replace('_', "-");
    FIELD_NAMES
        .iter()
        .find(|f| **f == dashed)
        .copied()
        .unwrap_or("unknown")
}

/// Settings a command accepts for a family; `None` if the pair is not
/// supported.
fn allowed_fields(cmd: Command, family: FamilyKind) -> Option<Vec<&'static str>> {
    use FamilyKind as F;
    let mut fields: Vec<&'static str> = match (cmd, family) {
        (Command::Scan, F::Uniform) => vec!["p_min", "p_max", "points", "a_points"],
        (Command::Scan, F::CoreHalo) => vec!["p_min", "p_max", "points", "a"],
        (Command::Asymptotics, F::CoreHalo) => vec!["p_min", "p_max", "points", "a", "threshold"],
        (Command::Scan | Command::Asymptotics, _) => return None,
        (_, F::Uniform) => vec!["p", "a"],
        (_, F::CoreHalo) => vec!["r1", "r2", "r3", "p", "a", "alpha"],
        (_, F::Monotonic) => vec!["r1", "r2", "r3", "n", "a"],
        (_, F::Custom) => vec!["spatial", "momentum", "angular", "a"],
    };
    if cmd == Command::Mollify {
        fields.extend(["delta", "delta_rel", "target"]);
    }
    Some(fields)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUSTOM: &str = r#"
family = "custom"
a = -0.8

[[spatial]]
lo = 0.0
hi = 0.2
kind = "constant"
value = 1.0

[[spatial]]
lo = 0.2
hi = 0.5
kind = "power-law"
value = 1.0
exponent = 2.0

[[momentum]]
lo = 0.0
hi = 1.0
kind = "smooth-ramp"
left = 1.0
right = 0.0
"#;

    #[test]
    fn toml_round_trip_is_lossless() {
        let cfg = RunConfig {
            family: Some(FamilyKind::CoreHalo),
            r1: Some(0.1 + 0.2),
            r2: Some(1.0 / 3.0),
            r3: Some(std::f64::consts::PI),
            p: Some(1e-300),
            a: Some(-0.8),
            tol_energy: Some(1e-9),
            format: Some(OutputFormat::Kv),
            ..RunConfig::default()
        };
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);

        let custom = RunConfig::from_toml(CUSTOM).unwrap();
        assert_eq!(RunConfig::from_toml(&custom.to_toml()).unwrap(), custom);
    }

    #[test]
    fn custom_profiles_parse() {
        let cfg = RunConfig::from_toml(CUSTOM)
            .unwrap()
            .resolve(Command::Certify)
            .unwrap();
        let f = cfg.custom_ansatz().unwrap();
        assert_eq!(f.eta().pieces().len(), 3);
        assert!((f.eta().eval(0.4) - 0.25).abs() < 1e-15);
        assert!((f.phi().eval(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn defaults_and_rejections() {
        let base = RunConfig {
            family: Some(FamilyKind::CoreHalo),
            ..RunConfig::default()
        };
        let cfg = base.clone().resolve(Command::Certify).unwrap();
        assert_eq!((cfg.r1, cfg.r3, cfg.a), (Some(0.2), Some(2.0), Some(-0.8)));

        let extra = RunConfig {
            n: Some(3.0),
            ..base.clone()
        };
        assert!(matches!(
            extra.resolve(Command::Certify),
            Err(ConfigError::Extraneous { field: "n", .. })
        ));
        let delta = RunConfig {
            delta: Some(1e-3),
            ..base.clone()
        };
        assert!(delta.clone().resolve(Command::Certify).is_err());
        assert!(delta.resolve(Command::Mollify).is_ok());

        let unordered = RunConfig {
            r1: Some(3.0),
            ..base.clone()
        };
        assert!(matches!(
            unordered.resolve(Command::Certify),
            Err(ConfigError::Invalid { field: "r1", .. })
        ));
        let empty = RunConfig {
            family: Some(FamilyKind::Uniform),
            points: Some(0),
            ..RunConfig::default()
        };
        assert!(empty.resolve(Command::Scan).is_err());
        assert!(RunConfig::from_toml("family = \"uniform\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn layering_prefers_flags() {
        let file = RunConfig {
            family: Some(FamilyKind::Uniform),
            p: Some(2.0),
            a: Some(-0.5),
            ..RunConfig::default()
        };
        let flags = RunConfig {
            p: Some(3.0),
            ..RunConfig::default()
        };
        let cfg = file.layered(flags);
        assert_eq!((cfg.p, cfg.a), (Some(3.0), Some(-0.5)));
    }
}
