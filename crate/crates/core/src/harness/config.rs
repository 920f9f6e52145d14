//! Flat `key = value` configuration files.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored. Keys
//! are the [`SimulationConfig`] field names; unknown or repeated keys are
//! errors. `--set key=value` overrides replace file entries before the
//! values are interpreted.
//!
//! ```text
//! equation = nls
//! g = -1
//! dim = 1
//! points_per_axis = 2048
//! box_length = 80
//! t_final = 10
//! initial_condition = soliton
//! gauge = near_optimal      # zero | near_optimal | heun_optimal | numeric_optimal | constant:<C>
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::gauge::{GaugeStrategy, NumericSearch};
use crate::potential::{PotentialKind, DEFAULT_BLOWUP_THRESHOLD};

/// Tolerance used when a config does not set one.
pub const DEFAULT_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Equation {
    Nls,
    Sn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableauKind {
    Heun,
    Dp54,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialCondition {
    /// `√2 sech(√2 x)`, the stationary NLS soliton for `g = −1`.
    Soliton,
    /// `e^{−|x|²/2}` scaled to unit mass, analytically (`normalized =
    /// false`, factor `π^{−dim/4}`) or on the discrete grid (`true`).
    Gaussian { normalized: bool },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationConfig {
    pub equation: Equation,
    pub g: f64,
    pub dim: usize,
    pub points_per_axis: usize,
    pub box_length: f64,
    pub t_final: f64,
    pub tol: f64,
    pub tableau: TableauKind,
    pub gauge: GaugeStrategy,
    pub initial_condition: InitialCondition,
    pub h0: Option<f64>,
    pub accept_threshold: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub record_every: usize,
    pub blowup_threshold: f64,
    pub seed: u64,
}

const KEYS: &[&str] = &[
    "equation",
    "g",
    "dim",
    "points_per_axis",
    "box_length",
    "t_final",
    "tol",
    "tableau",
    "gauge",
    "numeric_tol",
    "numeric_max_evals",
    "initial_condition",
    "h0",
    "accept_threshold",
    "output_dir",
    "record_every",
    "blowup_threshold",
    "seed",
];

const REQUIRED: &[&str] = &[
    "equation",
    "g",
    "dim",
    "points_per_axis",
    "box_length",
    "t_final",
    "initial_condition",
];

/// Raw entries in file order, as `(line, key, value)`.
pub fn parse_entries(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            msg: format!("expected `key = value`, got `{content}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        validate_key(key).map_err(|msg| Error::Parse { line, msg })?;
        if value.is_empty() {
            return Err(Error::Parse {
                line,
                msg: format!("missing value for `{key}`"),
            });
        }
        out.push((line, key.to_string(), value.to_string()));
    }
    Ok(out)
}

fn validate_key(key: &str) -> std::result::Result<(), String> {
    if key.is_empty() {
        return Err("empty key".into());
    }
    if !key
        .chars()
        .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
    {
        return Err(format!("invalid key `{key}`"));
    }
    if !KEYS.contains(&key) {
        return Err(format!("unknown key `{key}`"));
    }
    Ok(())
}

/// Parse one `key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (key, value) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not of the form key=value")))?;
    let key = key.trim();
    let value = value.trim();
    validate_key(key).map_err(Error::Config)?;
    if value.is_empty() {
        return Err(Error::Config(format!("override for `{key}` has an empty value")));
    }
    Ok((key.to_string(), value.to_string()))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: `{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(Error::Config(format!("`{key}` must be finite")));
    }
    Ok(x)
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: `{v}` is not a non-negative integer")))
}

/// Parse a gauge strategy name, e.g. `near_optimal` or `constant:1.5`.
pub fn parse_gauge(v: &str, search: NumericSearch) -> Result<GaugeStrategy> {
    match v {
        "zero" => Ok(GaugeStrategy::Zero),
        "near_optimal" => Ok(GaugeStrategy::NearOptimal),
        "heun_optimal" => Ok(GaugeStrategy::HeunOptimal),
        "numeric_optimal" => Ok(GaugeStrategy::NumericOptimal(search)),
        other => match other.strip_prefix("constant:") {
            Some(c) => Ok(GaugeStrategy::Constant(parse_f64("gauge", c.trim())?)),
            None => Err(Error::Config(format!("unknown gauge strategy `{other}`"))),
        },
    }
}

impl SimulationConfig {
    /// Build from a key → value map (file entries with overrides applied).
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        for key in map.keys() {
            validate_key(key).map_err(Error::Config)?;
        }
        for key in REQUIRED {
            if !map.contains_key(*key) {
                return Err(Error::Config(format!("missing required key `{key}`")));
            }
        }
        let get = |k: &str| map.get(k).map(String::as_str);
        let f = |k: &str| get(k).map(|v| parse_f64(k, v)).transpose();
        let u = |k: &str| get(k).map(|v| parse_usize(k, v)).transpose();

        let equation = match get("equation").unwrap_or_default() {
            "nls" => Equation::Nls,
            "sn" => Equation::Sn,
            other => return Err(Error::Config(format!("unknown equation `{other}`"))),
        };
        let tableau = match get("tableau").unwrap_or("dp54") {
            "heun" => TableauKind::Heun,
            "dp54" => TableauKind::Dp54,
            other => return Err(Error::Config(format!("unknown tableau `{other}`"))),
        };
        let initial_condition = match get("initial_condition").unwrap_or_default() {
            "soliton" => InitialCondition::Soliton,
            "gaussian" => InitialCondition::Gaussian { normalized: false },
            "gaussian_normalized" => InitialCondition::Gaussian { normalized: true },
            other => return Err(Error::Config(format!("unknown initial_condition `{other}`"))),
        };
        let mut search = NumericSearch::default();
        if let Some(t) = f("numeric_tol")? {
            search.tol = t;
        }
        if let Some(n) = u("numeric_max_evals")? {
            search.max_evals = n;
        }
        let gauge = parse_gauge(get("gauge").unwrap_or("near_optimal"), search)?;
        let seed = get("seed")
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| Error::Config(format!("`seed`: `{v}` is not an integer")))
            })
            .transpose()?
            .unwrap_or(0);

        let config = Self {
            equation,
            g: f("g")?.unwrap_or_default(),
            dim: u("dim")?.unwrap_or_default(),
            points_per_axis: u("points_per_axis")?.unwrap_or_default(),
            box_length: f("box_length")?.unwrap_or_default(),
            t_final: f("t_final")?.unwrap_or_default(),
            tol: f("tol")?.unwrap_or(DEFAULT_TOL),
            tableau,
            gauge,
            initial_condition,
            h0: f("h0")?,
            accept_threshold: f("accept_threshold")?,
            output_dir: get("output_dir").map(PathBuf::from),
            record_every: u("record_every")?.unwrap_or(1),
            blowup_threshold: f("blowup_threshold")?.unwrap_or(DEFAULT_BLOWUP_THRESHOLD),
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    /// Parse config text, then apply `key=value` overrides in order.
    pub fn parse_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (line, key, value) in parse_entries(text)? {
            if map.insert(key.clone(), value).is_some() {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate key `{key}`"),
                });
            }
        }
        for (k, v) in overrides {
            validate_key(k).map_err(Error::Config)?;
            map.insert(k.clone(), v.clone());
        }
        Self::from_map(&map)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_overrides(text, &[])
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read `{}`: {e}", path.display())))?;
        Self::parse_with_overrides(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if !(1..=2).contains(&self.dim) {
            return err(format!("dim must be 1 or 2, got {}", self.dim));
        }
        if self.points_per_axis < 4 || !self.points_per_axis.is_power_of_two() {
            return err(format!(
                "points_per_axis must be a power of two >= 4, got {}",
                self.points_per_axis
            ));
        }
        if !(self.box_length > 0.0) {
            return err(format!("box_length must be positive, got {}", self.box_length));
        }
        if !(self.t_final > 0.0) {
            return err(format!("t_final must be positive, got {}", self.t_final));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return err(format!("tol must lie in (0, 1), got {}", self.tol));
        }
        if self.initial_condition == InitialCondition::Soliton
            && !(self.equation == Equation::Nls && self.dim == 1)
        {
            return err("the soliton initial condition requires equation = nls and dim = 1".into());
        }
        if self.gauge == GaugeStrategy::HeunOptimal && self.tableau != TableauKind::Heun {
            return err("gauge = heun_optimal requires tableau = heun".into());
        }
        if let GaugeStrategy::NumericOptimal(s) = self.gauge {
            if !(s.tol > 0.0) || s.max_evals < 2 {
                return err("numeric_tol must be positive and numeric_max_evals >= 2".into());
            }
        }
        if matches!(self.h0, Some(h) if !(h > 0.0)) {
            return err("h0 must be positive".into());
        }
        if matches!(self.accept_threshold, Some(a) if !(a > 0.0)) {
            return err("accept_threshold must be positive".into());
        }
        if self.record_every == 0 {
            return err("record_every must be at least 1".into());
        }
        if !(self.blowup_threshold > 0.0) {
            return err("blowup_threshold must be positive".into());
        }
        Ok(())
    }

    pub fn potential_kind(&self) -> PotentialKind {
        match self.equation {
            Equation::Nls => PotentialKind::Nls { g: self.g },
            Equation::Sn => PotentialKind::Sn { g: self.g },
        }
    }

    /// Copy with a different gauge strategy.
    pub fn with_gauge(&self, gauge: GaugeStrategy) -> Self {
        Self {
            gauge,
            ..self.clone()
        }
    }

    /// True when both configs describe the same physical problem and
    /// numerics, i.e. differ at most in gauge and output settings.
    pub fn same_problem(&self, other: &Self) -> bool {
        let strip = |c: &Self| Self {
            gauge: GaugeStrategy::Zero,
            output_dir: None,
            record_every: 1,
            seed: 0,
            ..c.clone()
        };
        strip(self) == strip(other)
    }

    /// Serialize back to the file format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let eq = match self.equation {
            Equation::Nls => "nls",
            Equation::Sn => "sn",
        };
        let tab = match self.tableau {
            TableauKind::Heun => "heun",
            TableauKind::Dp54 => "dp54",
        };
        let ic = match self.initial_condition {
            InitialCondition::Soliton => "soliton",
            InitialCondition::Gaussian { normalized: false } => "gaussian",
            InitialCondition::Gaussian { normalized: true } => "gaussian_normalized",
        };
        let _ = writeln!(s, "equation = {eq}");
        let _ = writeln!(s, "g = {:?}", self.g);
        let _ = writeln!(s, "dim = {}", self.dim);
        let _ = writeln!(s, "points_per_axis = {}", self.points_per_axis);
        let _ = writeln!(s, "box_length = {:?}", self.box_length);
        let _ = writeln!(s, "t_final = {:?}", self.t_final);
        let _ = writeln!(s, "tol = {:?}", self.tol);
        let _ = writeln!(s, "tableau = {tab}");
        match self.gauge {
            GaugeStrategy::Constant(c) => {
                let _ = writeln!(s, "gauge = constant:{c:?}");
            }
            GaugeStrategy::NumericOptimal(search) => {
                let _ = writeln!(s, "gauge = numeric_optimal");
                let _ = writeln!(s, "numeric_tol = {:?}", search.tol);
                let _ = writeln!(s, "numeric_max_evals = {}", search.max_evals);
            }
            other => {
                let _ = writeln!(s, "gauge = {}", other.name());
            }
        }
        let _ = writeln!(s, "initial_condition = {ic}");
        if let Some(h0) = self.h0 {
            let _ = writeln!(s, "h0 = {h0:?}");
        }
        if let Some(a) = self.accept_threshold {
            let _ = writeln!(s, "accept_threshold = {a:?}");
        }
        if let Some(dir) = &self.output_dir {
            let _ = writeln!(s, "output_dir = {}", dir.display());
        }
        let _ = writeln!(s, "record_every = {}", self.record_every);
        let _ = writeln!(s, "blowup_threshold = {:?}", self.blowup_threshold);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SOLITON: &str = "\
# NLS 1D soliton
equation = nls
g = -1
dim = 1
points_per_axis = 2048
box_length = 80
t_final = 10
tol = 1e-7
tableau = dp54
gauge = near_optimal
initial_condition = soliton
";

    #[test]
    fn parses_soliton_config() {
        let c = SimulationConfig::parse(SOLITON).unwrap();
        assert_eq!(c.equation, Equation::Nls);
        assert_eq!(c.g, -1.0);
        assert_eq!(c.points_per_axis, 2048);
        assert_eq!(c.gauge, GaugeStrategy::NearOptimal);
        assert_eq!(c.record_every, 1);
        assert_eq!(c.blowup_threshold, 1e8);
    }

    #[test]
    fn overrides_replace_entries() {
        let o = vec![parse_override("gauge=constant:1.5").unwrap(), parse_override("t_final = 2").unwrap()];
        let c = SimulationConfig::parse_with_overrides(SOLITON, &o).unwrap();
        assert_eq!(c.gauge, GaugeStrategy::Constant(1.5));
        assert_eq!(c.t_final, 2.0);
    }

    #[test]
    fn rejects_bad_input() {
        let bad = [
            format!("{SOLITON}bogus = 1\n"),
            format!("{SOLITON}g = 2\n"),
            SOLITON.replace("t_final = 10", "t_final = 0"),
            SOLITON.replace("tol = 1e-7", "tol = 1.5"),
            SOLITON.replace("equation = nls", "equation = sn"),
            SOLITON.replace("gauge = near_optimal", "gauge = heun_optimal"),
            SOLITON.replace("gauge = near_optimal", "gauge = constant:nan"),
            SOLITON.replace("points_per_axis = 2048", "points_per_axis = 2000"),
            SOLITON.replace("dim = 1", "dim = x"),
            SOLITON.replace("g = -1", "g ="),
            SOLITON.replace("g = -1", "g -1"),
            SOLITON.replace("box_length = 80\n", ""),
        ];
        for text in &bad {
            let e = SimulationConfig::parse(text).unwrap_err();
            assert!(e.is_config(), "{e}");
        }
        assert!(parse_override("nokey").is_err());
        assert!(parse_override("unknown=3").is_err());
        assert!(parse_override("g=").is_err());
    }

    #[test]
    fn trailing_comments_and_blank_lines() {
        let text = SOLITON.replace("g = -1", "\n\n   g = -1   # attractive\n");
        assert_eq!(SimulationConfig::parse(&text).unwrap().g, -1.0);
    }

    #[test]
    fn same_problem_ignores_gauge() {
        let a = SimulationConfig::parse(SOLITON).unwrap();
        let b = a.with_gauge(GaugeStrategy::Zero);
        assert!(a.same_problem(&b));
        let mut c = b.clone();
        c.points_per_axis = 1024;
        assert!(!a.same_problem(&c));
    }

    fn arb_gauge() -> impl Strategy<Value = GaugeStrategy> {
        prop_oneof![
            Just(GaugeStrategy::Zero),
            Just(GaugeStrategy::NearOptimal),
            (-100.0f64..100.0).prop_map(GaugeStrategy::Constant),
            (1e-6f64..1.0, 2usize..100)
                .prop_map(|(tol, max_evals)| GaugeStrategy::NumericOptimal(NumericSearch { tol, max_evals })),
        ]
    }

    proptest! {
        #[test]
        fn text_round_trip(
            sn in any::<bool>(),
            g in -1e3f64..1e3,
            dim in 1usize..=2,
            exp in 2u32..12,
            box_length in 1e-3f64..1e3,
            t_final in 1e-3f64..1e3,
            tol in 1e-12f64..0.5,
            heun in any::<bool>(),
            gauge in arb_gauge(),
            normalized in any::<bool>(),
            h0 in proptest::option::of(1e-9f64..1.0),
            record_every in 1usize..100,
            seed in any::<u64>(),
        ) {
            let c = SimulationConfig {
                equation: if sn { Equation::Sn } else { Equation::Nls },
                g, dim,
                points_per_axis: 1 << exp,
                box_length, t_final, tol,
                tableau: if heun { TableauKind::Heun } else { TableauKind::Dp54 },
                gauge,
                initial_condition: InitialCondition::Gaussian { normalized },
                h0,
                accept_threshold: None,
                output_dir: Some(PathBuf::from("out/run")),
                record_every,
                blowup_threshold: 1e8,
                seed,
            };
            let back = SimulationConfig::parse(&c.to_text()).unwrap();
            prop_assert_eq!(back, c);
        }

        #[test]
        fn parser_never_panics(text in "\\PC{0,200}") {
            let _ = SimulationConfig::parse(&text);
        }
    }
}
