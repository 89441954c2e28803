//! Problem configuration: a TOML document with fixed sections, checked
//! strictly and reported with line and column.

use std::fmt::{self, Write as _};

use thiserror::Error;
use toml::{Table, Value};

use super::expr::{Expr, ExprError};
use crate::bundle::{BundleError, DhData};
use crate::functionals::{LSign, PrescribedData, PrescribedField, QuadratureOptions, StabilityOptions};
use crate::polytope::{Facet, Polytope, PolytopeError, Rational};
use crate::solver::{MonitorConfig, NewtonConfig, PathConfig, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConfigErrorKind {
    Syntax,
    UnknownSection,
    UnknownKey,
    MissingKey,
    TypeMismatch,
    Domain,
    Expression,
}

#[derive(Clone, Debug, Error, PartialEq)]
#[error("{line}:{column}: {kind:?}: {message}")]
pub struct ConfigError {
    pub kind: ConfigErrorKind,
    /// 1-based.
    pub line: usize,
    /// 1-based.
    pub column: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolytopeConfig {
    pub facets: Vec<Facet>,
    /// Defaults to the vertex centroid.
    pub base_point: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BundleConfig {
    pub roots: Vec<[Rational; 2]>,
    pub sigma: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldSpec {
    Constant(f64),
    /// The curvature `A₀` of the Guillemin potential.
    Endpoint,
    Expression(Expr),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrescribedConfig {
    pub field: FieldSpec,
    pub l_sign: LSign,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridConfig {
    pub h: f64,
    /// Defaults to `4h`.
    pub h_min: Option<f64>,
}

impl GridConfig {
    pub fn h_min(&self) -> f64 {
        self.h_min.unwrap_or(4.0 * self.h)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemConfig {
    pub polytope: PolytopeConfig,
    pub bundle: BundleConfig,
    pub prescribed: PrescribedConfig,
    pub grid: GridConfig,
    pub newton: NewtonConfig,
    pub path: PathConfig,
    pub monitors: MonitorConfig,
    pub stability_size: usize,
    pub quadrature: QuadratureOptions,
}

const SECTIONS: [(&str, &[&str]); 7] = [
    ("polytope", &["facets", "base_point"]),
    ("bundle", &["roots", "sigma"]),
    ("prescribed", &["A", "l_sign"]),
    ("grid", &["h", "h_min"]),
    (
        "solver",
        &[
            "tol_residual",
            "max_iters",
            "max_halvings",
            "dt_init",
            "dt_min",
            "growth",
            "shrink",
            "fast_iters",
            "oscillation_factor",
            "h_proxy_factor",
        ],
    ),
    ("stability", &["size"]),
    ("functional", &["tol_quad", "levels", "order"]),
];

/// Maps section and key names back to positions in the source text.
struct Locator<'a> {
    text: &'a str,
}

impl Locator<'_> {
    fn position(&self, offset: usize) -> (usize, usize) {
        let before = &self.text[..offset.min(self.text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        (line, column)
    }

    fn section(&self, name: &str) -> Option<(usize, usize)> {
        let mut offset = 0;
        for line in self.text.split_inclusive('\n') {
            let t = line.trim();
            if t.starts_with('[') && t.trim_start_matches('[').trim_end_matches(']').trim() == name {
                return Some((offset, offset + line.len()));
            }
            offset += line.len();
        }
        None
    }

    /// Byte offset of `key` within `section`, or of the section header.
    fn key(&self, section: Option<&str>, key: Option<&str>) -> usize {
        let (start, body) = match section {
            Some(s) => match self.section(s) {
                Some((header, body)) => (header, body),
                None => return 0,
            },
            None => (0, 0),
        };
        let Some(key) = key else { return start };
        let mut offset = body;
        for line in self.text[body..].split_inclusive('\n') {
            let t = line.trim_start();
            if section.is_some() && t.starts_with('[') {
                break;
            }
            if let Some(rest) = t.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return offset + (line.len() - t.len());
                }
            }
            offset += line.len();
        }
        start
    }

    fn error(&self, kind: ConfigErrorKind, section: Option<&str>, key: Option<&str>, message: String) -> ConfigError {
        let (line, column) = self.position(self.key(section, key));
        ConfigError {
            kind,
            line,
            column,
            message,
        }
    }

    /// Offset of the first character after `=` on a key's line that is not whitespace.
    fn value_offset(&self, section: &str, key: &str) -> usize {
        let k = self.key(Some(section), Some(key));
        let line = &self.text[k..];
        let eq = line.find('=').map_or(0, |i| i + 1);
        let rest = &line[eq..];
        k + eq + (rest.len() - rest.trim_start().len())
    }
}

struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    loc: &'a Locator<'a>,
}

impl<'a> Section<'a> {
    fn err(&self, kind: ConfigErrorKind, key: &str, message: String) -> ConfigError {
        self.loc.error(kind, Some(self.name), Some(key), message)
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn mismatch(&self, key: &str, expected: &str, got: &Value) -> ConfigError {
        self.err(
            ConfigErrorKind::TypeMismatch,
            key,
            format!("`{}.{key}` must be {expected}, found {}", self.name, got.type_str()),
        )
    }

    fn float(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => as_float(v).ok_or_else(|| self.mismatch(key, "a number", v)),
        }
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.float(key, default)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(self.err(ConfigErrorKind::Domain, key, format!("`{}.{key}` must be positive, got {v}", self.name)));
        }
        Ok(v)
    }

    fn count(&self, key: &str, default: usize, min: usize) -> Result<usize, ConfigError> {
        let v = match self.get(key) {
            None => return Ok(default),
            Some(Value::Integer(i)) => *i,
            Some(v) => return Err(self.mismatch(key, "an integer", v)),
        };
        if v < min as i64 {
            return Err(self.err(ConfigErrorKind::Domain, key, format!("`{}.{key}` must be at least {min}, got {v}", self.name)));
        }
        Ok(v as usize)
    }

    fn pair(&self, key: &str, v: &Value) -> Result<[f64; 2], ConfigError> {
        match v.as_array().map(|a| a.as_slice()) {
            Some([a, b]) => match (as_float(a), as_float(b)) {
                (Some(a), Some(b)) => Ok([a, b]),
                _ => Err(self.mismatch(key, "a pair of numbers", v)),
            },
            _ => Err(self.mismatch(key, "a pair of numbers", v)),
        }
    }
}

fn as_float(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

/// An integer, or a string `"p/q"`.
fn as_rational(v: &Value) -> Option<Rational> {
    match v {
        Value::Integer(i) => Some(Rational::from_integer(*i as i128)),
        Value::String(s) => {
            let (p, q) = s.split_once('/')?;
            let (p, q): (i128, i128) = (p.trim().parse().ok()?, q.trim().parse().ok()?);
            (q != 0).then(|| Rational::new(p, q))
        }
        _ => None,
    }
}

fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.to_integer().to_string()
    } else {
        format!("\"{}/{}\"", r.numer(), r.denom())
    }
}

pub fn parse_config(text: &str) -> Result<ProblemConfig, ConfigError> {
    let loc = Locator { text };
    let table: Table = text.parse().map_err(|e: toml::de::Error| {
        let (line, column) = loc.position(e.span().map_or(0, |s| s.start));
        ConfigError {
            kind: ConfigErrorKind::Syntax,
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    for (name, value) in &table {
        let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| s == name) else {
            let kind = if value.is_table() {
                ConfigErrorKind::UnknownSection
            } else {
                ConfigErrorKind::UnknownKey
            };
            let offset = if value.is_table() { loc.key(Some(name), None) } else { loc.key(None, Some(name)) };
            let (line, column) = loc.position(offset);
            return Err(ConfigError {
                kind,
                line,
                column,
                message: format!("unknown {} `{name}`", if value.is_table() { "section" } else { "key" }),
            });
        };
        let Some(t) = value.as_table() else {
            return Err(loc.error(ConfigErrorKind::TypeMismatch, None, Some(name), format!("`{name}` must be a section")));
        };
        for key in t.keys() {
            if !keys.contains(&key.as_str()) {
                return Err(loc.error(
                    ConfigErrorKind::UnknownKey,
                    Some(name),
                    Some(key),
                    format!("unknown key `{key}` in section `{name}`"),
                ));
            }
        }
    }
    let section = |name: &'static str| Section {
        name,
        table: table.get(name).and_then(|v| v.as_table()),
        loc: &loc,
    };

    let poly = section("polytope");
    let Some(facets_value) = poly.get("facets") else {
        return Err(loc.error(ConfigErrorKind::MissingKey, Some("polytope"), None, "`polytope.facets` is required".into()));
    };
    let facet_err = |v: &Value| poly.mismatch("facets", "a list of [n1, n2, offset] with integer normals", v);
    let mut facets = Vec::new();
    for f in facets_value.as_array().ok_or_else(|| facet_err(facets_value))? {
        match f.as_array().map(|a| a.as_slice()) {
            Some([Value::Integer(a), Value::Integer(b), c]) => {
                let c = as_rational(c).ok_or_else(|| facet_err(f))?;
                facets.push(Facet::new([*a, *b], c));
            }
            _ => return Err(facet_err(f)),
        }
    }
    let base_point = poly.get("base_point").map(|v| poly.pair("base_point", v)).transpose()?;

    let bundle = section("bundle");
    let mut roots = Vec::new();
    if let Some(v) = bundle.get("roots") {
        let root_err = |v: &Value| bundle.mismatch("roots", "a list of [m1, m2] with integer or \"p/q\" entries", v);
        for r in v.as_array().ok_or_else(|| root_err(v))? {
            match r.as_array().map(|a| a.as_slice()) {
                Some([a, b]) => match (as_rational(a), as_rational(b)) {
                    (Some(a), Some(b)) => roots.push([a, b]),
                    _ => return Err(root_err(r)),
                },
                _ => return Err(root_err(r)),
            }
        }
    }
    let sigma = match bundle.get("sigma") {
        Some(v) => bundle.pair("sigma", v)?,
        None => [0.0, 0.0],
    };
    if let Err(e) = DhData::new(roots.clone(), sigma) {
        let key = if matches!(e, BundleError::NonFiniteSigma) { "sigma" } else { "roots" };
        return Err(bundle.err(ConfigErrorKind::Domain, key, e.to_string()));
    }

    let pres = section("prescribed");
    let field = match pres.get("A") {
        None => FieldSpec::Endpoint,
        Some(Value::Float(f)) => FieldSpec::Constant(*f),
        Some(Value::Integer(i)) => FieldSpec::Constant(*i as f64),
        Some(Value::String(s)) => match Expr::parse(s) {
            Ok(Expr::Endpoint) => FieldSpec::Endpoint,
            Ok(e) => FieldSpec::Expression(e),
            Err(ExprError { column, message }) => {
                // position inside the string literal, after its opening quote
                let (line, col) = loc.position(loc.value_offset("prescribed", "A"));
                return Err(ConfigError {
                    kind: ConfigErrorKind::Expression,
                    line,
                    column: col + column,
                    message,
                });
            }
        },
        Some(v) => return Err(pres.mismatch("A", "a number or an expression string", v)),
    };
    let l_sign = match pres.get("l_sign") {
        None => LSign::Minus,
        Some(Value::String(s)) if s == "minus" => LSign::Minus,
        Some(Value::String(s)) if s == "plus" => LSign::Plus,
        Some(Value::String(s)) => {
            return Err(pres.err(ConfigErrorKind::Domain, "l_sign", format!("`l_sign` must be \"minus\" or \"plus\", got {s:?}")));
        }
        Some(v) => return Err(pres.mismatch("l_sign", "a string", v)),
    };

    let grid = section("grid");
    let h = grid.positive("h", 1.0 / 32.0)?;
    let h_min = match grid.get("h_min") {
        None => None,
        Some(_) => Some(grid.positive("h_min", 0.0)?),
    };

    let s = section("solver");
    let (nd, pd, md) = (NewtonConfig::default(), PathConfig::default(), MonitorConfig::default());
    let newton = NewtonConfig {
        tol_residual: s.positive("tol_residual", nd.tol_residual)?,
        max_iters: s.count("max_iters", nd.max_iters, 1)?,
        max_halvings: s.count("max_halvings", nd.max_halvings, 0)?,
    };
    let path = PathConfig {
        dt_init: s.positive("dt_init", pd.dt_init)?,
        dt_min: s.positive("dt_min", pd.dt_min)?,
        growth: s.positive("growth", pd.growth)?,
        shrink: s.positive("shrink", pd.shrink)?,
        fast_iters: s.count("fast_iters", pd.fast_iters, 0)?,
    };
    if path.dt_min > path.dt_init {
        return Err(s.err(ConfigErrorKind::Domain, "dt_min", format!("dt_min = {} exceeds dt_init = {}", path.dt_min, path.dt_init)));
    }
    if path.growth < 1.0 {
        return Err(s.err(ConfigErrorKind::Domain, "growth", "growth must be at least 1".into()));
    }
    if path.shrink >= 1.0 {
        return Err(s.err(ConfigErrorKind::Domain, "shrink", "shrink must be below 1".into()));
    }
    let monitors = MonitorConfig {
        oscillation_factor: s.positive("oscillation_factor", md.oscillation_factor)?,
        h_proxy_factor: s.positive("h_proxy_factor", md.h_proxy_factor)?,
    };

    let stability_size = section("stability").count("size", 16, 1)?;
    let f = section("functional");
    let qd = QuadratureOptions::default();
    let quadrature = QuadratureOptions {
        tol: f.positive("tol_quad", qd.tol)?,
        levels: f.count("levels", qd.levels, 1)?,
        order: f.count("order", qd.order, 1)?,
    };

    Ok(ProblemConfig {
        polytope: PolytopeConfig { facets, base_point },
        bundle: BundleConfig { roots, sigma },
        prescribed: PrescribedConfig { field, l_sign },
        grid: GridConfig { h, h_min },
        newton,
        path,
        monitors,
        stability_size,
        quadrature,
    })
}

impl ProblemConfig {
    pub fn polytope(&self) -> Result<Polytope, PolytopeError> {
        let facets = self.polytope.facets.clone();
        match self.polytope.base_point {
            Some(p) => Polytope::new(facets, p),
            None => Polytope::with_centroid_base(facets),
        }
    }

    pub fn dh(&self) -> Result<DhData, BundleError> {
        DhData::new(self.bundle.roots.clone(), self.bundle.sigma)
    }

    pub fn prescribed(&self, dh: DhData) -> PrescribedData {
        let field = match &self.prescribed.field {
            FieldSpec::Constant(c) => PrescribedField::Constant(*c),
            FieldSpec::Endpoint => PrescribedField::Endpoint,
            FieldSpec::Expression(e) => {
                let uses_endpoint = e.uses_endpoint();
                let e = e.clone();
                PrescribedField::Custom {
                    f: std::sync::Arc::new(move |xi, a0| e.eval(xi, a0)),
                    uses_endpoint,
                }
            }
        };
        PrescribedData::new(field, dh).with_sign(self.prescribed.l_sign)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            h: self.grid.h,
            h_min: self.grid.h_min(),
            newton: self.newton,
            path: self.path,
            monitors: self.monitors,
        }
    }

    pub fn stability_options(&self) -> StabilityOptions {
        StabilityOptions {
            quadrature: self.quadrature,
            ..StabilityOptions::default()
        }
    }

    /// Replaces the grid spacing, keeping an explicit `h_min` only if one was given.
    pub fn with_grid_h(mut self, h: f64) -> Self {
        self.grid.h = h;
        self
    }

    /// Every section with every key, defaults written out.
    pub fn to_canonical(&self) -> String {
        let mut s = String::new();
        let pair = |p: [f64; 2]| format!("[{:?}, {:?}]", p[0], p[1]);
        s.push_str("[polytope]\nfacets = [");
        for (i, f) in self.polytope.facets.iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            let _ = write!(s, "[{}, {}, {}]", f.normal[0], f.normal[1], format_rational(&f.offset));
        }
        s.push_str("]\n");
        if let Some(p) = self.polytope.base_point {
            let _ = writeln!(s, "base_point = {}", pair(p));
        }
        s.push_str("\n[bundle]\nroots = [");
        for (i, r) in self.bundle.roots.iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            let _ = write!(s, "[{}, {}]", format_rational(&r[0]), format_rational(&r[1]));
        }
        let _ = writeln!(s, "]\nsigma = {}", pair(self.bundle.sigma));
        let a = match &self.prescribed.field {
            FieldSpec::Constant(c) => format!("{c:?}"),
            FieldSpec::Endpoint => "\"A0\"".into(),
            FieldSpec::Expression(e) => format!("\"{e}\""),
        };
        let sign = match self.prescribed.l_sign {
            LSign::Minus => "minus",
            LSign::Plus => "plus",
        };
        let _ = writeln!(s, "\n[prescribed]\nA = {a}\nl_sign = \"{sign}\"");
        let _ = writeln!(s, "\n[grid]\nh = {:?}", self.grid.h);
        if let Some(m) = self.grid.h_min {
            let _ = writeln!(s, "h_min = {m:?}");
        }
        let (n, p, m) = (&self.newton, &self.path, &self.monitors);
        let _ = writeln!(
            s,
            "\n[solver]\ntol_residual = {:?}\nmax_iters = {}\nmax_halvings = {}\ndt_init = {:?}\ndt_min = {:?}\ngrowth = {:?}\nshrink = {:?}\nfast_iters = {}\noscillation_factor = {:?}\nh_proxy_factor = {:?}",
            n.tol_residual, n.max_iters, n.max_halvings, p.dt_init, p.dt_min, p.growth, p.shrink, p.fast_iters, m.oscillation_factor, m.h_proxy_factor
        );
        let _ = writeln!(s, "\n[stability]\nsize = {}", self.stability_size);
        let q = &self.quadrature;
        let _ = writeln!(s, "\n[functional]\ntol_quad = {:?}\nlevels = {}\norder = {}", q.tol, q.levels, q.order);
        s
    }
}

impl fmt::Display for ProblemConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "[polytope]\nfacets = [[1, 0, 0], [0, 1, 0], [-1, 0, -1], [0, -1, -1]]\n";

    #[test]
    fn minimal_square_gets_defaults() {
        let c = parse_config(SQUARE).unwrap();
        assert_eq!(c.polytope.facets.len(), 4);
        assert_eq!(c.grid.h, 1.0 / 32.0);
        assert_eq!(c.grid.h_min(), 0.125);
        assert_eq!(c.prescribed.field, FieldSpec::Endpoint);
        assert_eq!(c.prescribed.l_sign, LSign::Minus);
        assert_eq!(c.stability_size, 16);
        assert_eq!(c.polytope().unwrap().base_point(), [0.5, 0.5]);
        assert!(c.dh().unwrap().is_toric());
    }

    #[test]
    fn negative_root_entry_is_a_domain_error() {
        let text = format!("{SQUARE}\n[bundle]\nroots = [[1,0],[0,-1]]\n");
        let e = parse_config(&text).unwrap_err();
        assert_eq!(e.kind, ConfigErrorKind::Domain);
        assert_eq!((e.line, e.column), (5, 1));
        assert!(e.message.contains("negative"), "{}", e.message);
    }

    #[test]
    fn expression_parses_and_evaluates() {
        let text = format!("{SQUARE}[prescribed]\nA = \"4 + 0.1*log(xi1)\"\n");
        let c = parse_config(&text).unwrap();
        let data = c.prescribed(c.dh().unwrap());
        let v = data.value(&c.polytope().unwrap(), [std::f64::consts::E, 0.5]).unwrap();
        assert!((v - 4.1).abs() < 1e-15);
    }

    #[test]
    fn error_kinds_are_distinct_and_positioned() {
        let cases = [
            ("[polytope\n", ConfigErrorKind::Syntax, 1),
            ("[polytope]\nfacets = [[1,0,0]]\nfoo = 1\n", ConfigErrorKind::UnknownKey, 3),
            ("[polytope]\nfacets = [[1,0,0]]\n[extra]\na = 1\n", ConfigErrorKind::UnknownSection, 3),
            ("[grid]\nh = 0.1\n", ConfigErrorKind::MissingKey, 1),
            ("[polytope]\nfacets = [[1,0,0]]\n[grid]\nh = \"x\"\n", ConfigErrorKind::TypeMismatch, 4),
            ("[polytope]\nfacets = [[1,0,0]]\n[grid]\nh = -0.5\n", ConfigErrorKind::Domain, 4),
            ("[polytope]\nfacets = [[1,0,0]]\n[prescribed]\nA = \"1 + @\"\n", ConfigErrorKind::Expression, 4),
        ];
        for (text, kind, line) in cases {
            let e = parse_config(text).unwrap_err();
            assert_eq!(e.kind, kind, "{text:?} -> {e}");
            assert_eq!(e.line, line, "{text:?} -> {e}");
        }
        let e = parse_config("[polytope]\nfacets = [[1,0,0]]\n[prescribed]\nA = \"1 + @\"\n").unwrap_err();
        assert_eq!(e.column, 10);
    }

    #[test]
    fn canonical_form_round_trips() {
        let text = format!(
            "{SQUARE}base_point = [0.25, 0.5]\n[bundle]\nroots = [[1, 0], [\"1/2\", 3]]\nsigma = [1, 0.5]\n[prescribed]\nA = \"A0 + 0.1*cos(2*pi*xi1)\"\nl_sign = \"plus\"\n[grid]\nh = 0.0625\nh_min = 0.2\n[stability]\nsize = 8\n"
        );
        let c = parse_config(&text).unwrap();
        let canon = c.to_canonical();
        let again = parse_config(&canon).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_canonical(), canon);
    }
}
