//! Flat `key = value` scenario files.
//!
//! ```text
//! # robot with a heavier state weight
//! plant = wmr
//! wmr.x0 = [2, 2, pi/4]
//! gains.q = eye(3, 4)
//! sim.t_final = 30
//! ```
//!
//! Values are numbers (with `pi` allowed in products and quotients),
//! `true`/`false`, bare words, quoted strings, vectors `[a, b]`, matrices
//! `[[a, b], [c, d]]`, `diag([a, b])`, `eye(n, s)` and `fill(n, v)`.
//! Anything not given falls back to the bundled scenario for the chosen
//! plant.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;

use aac_core::learner::LearnerState;
use aac_core::plants::{make_ibvs_plant, make_scalar_plant, make_wmr_plant, Intrinsics, PlantKind, IBVS_FEATURES};
use aac_core::presets::{self, Scenario};
use aac_core::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "`{key}`: ")?;
        }
        f.write_str(&self.message)
    }
}

fn err(line: Option<usize>, key: Option<&str>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        key: key.map(String::from),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Bool(bool),
    Word(String),
    Text(String),
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

impl Value {
    fn kind(&self) -> &'static str {
        match self {
            Value::Number(_) => "a number",
            Value::Bool(_) => "a boolean",
            Value::Word(_) => "a word",
            Value::Text(_) => "a string",
            Value::Vector(_) => "a vector",
            Value::Matrix(_) => "a matrix",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    line: Option<usize>,
    value: Value,
}

/// Parsed but not yet interpreted configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = strip_comment(raw).trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(err(Some(line), None, "expected `key = value`"));
            };
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
                return Err(err(Some(line), None, format!("malformed key `{key}`")));
            }
            let value = parse_value(value.trim()).map_err(|m| err(Some(line), Some(key), m))?;
            let entry = Entry {
                line: Some(line),
                value,
            };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                return Err(err(
                    Some(line),
                    Some(key),
                    format!("duplicate key (first set on line {})", prev.line.unwrap_or(0)),
                ));
            }
        }
        Ok(RawConfig { entries })
    }

    /// Sets or replaces one entry, e.g. from a sweep.
    pub fn set(&mut self, key: &str, value: Value) {
        self.entries.insert(key.to_string(), Entry { line: None, value });
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.get(key).map(|e| &e.value)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_string = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_string = !in_string,
            '#' if !in_string => return &line[..i],
            _ => {}
        }
    }
    line
}

/// Parses a single value in the config syntax.
pub fn parse_value(text: &str) -> Result<Value, String> {
    let mut p = Parser {
        s: text.as_bytes(),
        pos: 0,
    };
    let v = p.value()?;
    p.skip_ws();
    if p.pos != p.s.len() {
        return Err(format!("unexpected trailing input `{}`", &text[p.pos..]));
    }
    Ok(v)
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), String> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(format!("expected `{}`", c as char))
        }
    }

    fn word(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && (self.s[self.pos].is_ascii_alphanumeric() || self.s[self.pos] == b'_') {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.s[start..self.pos]).into_owned()
    }

    fn value(&mut self) -> Result<Value, String> {
        match self.peek() {
            None => Err("missing value".into()),
            Some(b'"') => {
                self.pos += 1;
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos] != b'"' {
                    self.pos += 1;
                }
                if self.pos == self.s.len() {
                    return Err("unterminated string".into());
                }
                let text = String::from_utf8_lossy(&self.s[start..self.pos]).into_owned();
                self.pos += 1;
                Ok(Value::Text(text))
            }
            Some(b'[') => self.bracketed(),
            Some(c) if c.is_ascii_alphabetic() => {
                let save = self.pos;
                let w = self.word();
                match w.as_str() {
                    "true" => Ok(Value::Bool(true)),
                    "false" => Ok(Value::Bool(false)),
                    "pi" => {
                        self.pos = save;
                        Ok(Value::Number(self.expr()?))
                    }
                    "eye" | "fill" | "diag" => self.call(&w),
                    _ => Ok(Value::Word(w)),
                }
            }
            Some(_) => Ok(Value::Number(self.expr()?)),
        }
    }

    fn bracketed(&mut self) -> Result<Value, String> {
        self.expect(b'[')?;
        if self.peek() == Some(b'[') {
            let mut rows = Vec::new();
            loop {
                match self.bracketed()? {
                    Value::Vector(r) => rows.push(r),
                    _ => return Err("matrices nest only one level deep".into()),
                }
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b']') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err("expected `,` or `]`".into()),
                }
            }
            if rows.iter().any(|r| r.len() != rows[0].len()) {
                return Err("matrix rows have different lengths".into());
            }
            return Ok(Value::Matrix(rows));
        }
        let mut items = Vec::new();
        if self.peek() == Some(b']') {
            self.pos += 1;
            return Ok(Value::Vector(items));
        }
        loop {
            items.push(self.expr()?);
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b']') => {
                    self.pos += 1;
                    break;
                }
                _ => return Err("expected `,` or `]`".into()),
            }
        }
        Ok(Value::Vector(items))
    }

    fn call(&mut self, name: &str) -> Result<Value, String> {
        self.expect(b'(')?;
        let out = match name {
            "diag" => match self.bracketed()? {
                Value::Vector(d) => {
                    let n = d.len();
                    Value::Matrix(
                        (0..n)
                            .map(|i| (0..n).map(|j| if i == j { d[i] } else { 0.0 }).collect())
                            .collect(),
                    )
                }
                _ => return Err("diag takes a vector".into()),
            },
            _ => {
                let n = self.expr()?;
                if n < 1.0 || n.fract() != 0.0 || n > 1e4 {
                    return Err(format!("{name} size must be a positive integer, got {n}"));
                }
                let n = n as usize;
                self.expect(b',')?;
                let s = self.expr()?;
                if name == "fill" {
                    Value::Vector(vec![s; n])
                } else {
                    Value::Matrix(
                        (0..n)
                            .map(|i| (0..n).map(|j| if i == j { s } else { 0.0 }).collect())
                            .collect(),
                    )
                }
            }
        };
        self.expect(b')')?;
        Ok(out)
    }

    /// `factor (('*' | '/') factor)*`
    fn expr(&mut self) -> Result<f64, String> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc *= self.factor()?;
                }
                Some(b'/') => {
                    self.pos += 1;
                    acc /= self.factor()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<f64, String> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.factor()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.factor()
            }
            Some(c) if c.is_ascii_alphabetic() => match self.word().as_str() {
                "pi" => Ok(std::f64::consts::PI),
                w => Err(format!("unknown name `{w}` in a number")),
            },
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.s.len() {
                    let c = self.s[self.pos];
                    let exp_sign = (c == b'-' || c == b'+') && matches!(self.s[self.pos - 1], b'e' | b'E');
                    if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
                text.parse::<f64>().map_err(|_| format!("bad number `{text}`"))
            }
            _ => Err("expected a number".into()),
        }
    }
}

const COMMON_KEYS: &[&str] = &[
    "plant",
    "gains.q",
    "gains.r",
    "gains.gamma_c",
    "gains.c1",
    "gains.gamma",
    "gains.gamma_a",
    "gains.gamma_a2",
    "gains.gamma_theta",
    "gains.k_cl",
    "gains.sigma2",
    "gains.c2",
    "gains.probing_amplitude",
    "gains.wc_radius",
    "gains.wa_radius",
    "gains.theta_lo",
    "gains.theta_hi",
    "gains.eps_rank",
    "gains.stack_capacity",
    "gains.adapt_theta",
    "sim.dt",
    "sim.t_final",
    "sim.sample_every",
    "sim.log_every",
    "sim.seed",
    "sim.probed_bellman",
    "sim.g_bound",
    "init.wc",
    "init.wa",
    "init.theta",
    "output.dir",
];

const SCALAR_KEYS: &[&str] = &["scalar.b", "scalar.x0", "scalar.x_d"];
const WMR_KEYS: &[&str] = &["wmr.a", "wmr.b", "wmr.x0", "wmr.x_d"];
const IBVS_KEYS: &[&str] = &[
    "ibvs.pixels0",
    "ibvs.pixels_d",
    "ibvs.focal",
    "ibvs.principal",
    "ibvs.depths0",
];

fn plant_keys(plant: &str) -> &'static [&'static str] {
    match plant {
        "scalar" => SCALAR_KEYS,
        "wmr" => WMR_KEYS,
        _ => IBVS_KEYS,
    }
}

/// Keys that take a single number, i.e. the ones a sweep may vary.
pub fn is_scalar_key(key: &str) -> bool {
    matches!(
        key,
        "scalar.b"
            | "wmr.a"
            | "wmr.b"
            | "gains.gamma_c"
            | "gains.c1"
            | "gains.gamma"
            | "gains.gamma_a"
            | "gains.gamma_a2"
            | "gains.gamma_theta"
            | "gains.k_cl"
            | "gains.sigma2"
            | "gains.c2"
            | "gains.probing_amplitude"
            | "gains.wc_radius"
            | "gains.wa_radius"
            | "gains.eps_rank"
            | "gains.stack_capacity"
            | "sim.dt"
            | "sim.t_final"
            | "sim.sample_every"
            | "sim.log_every"
            | "sim.seed"
            | "sim.g_bound"
    )
}

/// A fully resolved run: scenario plus where to put the results.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub output_dir: Option<PathBuf>,
}

struct Reader<'a> {
    raw: &'a RawConfig,
}

impl Reader<'_> {
    fn entry(&self, key: &str) -> Option<&Entry> {
        self.raw.entries.get(key)
    }

    fn fail(&self, key: &str, message: impl Into<String>) -> ConfigError {
        err(self.entry(key).and_then(|e| e.line), Some(key), message)
    }

    fn number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.entry(key).map(|e| &e.value) {
            None => Ok(None),
            Some(Value::Number(v)) if v.is_finite() => Ok(Some(*v)),
            Some(Value::Number(v)) => Err(self.fail(key, format!("{v} is not finite"))),
            Some(other) => Err(self.fail(key, format!("expected a number, got {}", other.kind()))),
        }
    }

    fn count(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.number(key)? {
            None => Ok(None),
            Some(v) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => Ok(Some(v as u64)),
            Some(v) => Err(self.fail(key, format!("expected a non-negative integer, got {v}"))),
        }
    }

    fn flag(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.entry(key).map(|e| &e.value) {
            None => Ok(None),
            Some(Value::Bool(b)) => Ok(Some(*b)),
            Some(other) => Err(self.fail(key, format!("expected true or false, got {}", other.kind()))),
        }
    }

    fn vector(&self, key: &str, len: usize) -> Result<Option<Vector>, ConfigError> {
        let v = match self.entry(key).map(|e| &e.value) {
            None => return Ok(None),
            Some(Value::Vector(v)) => v.clone(),
            Some(Value::Number(x)) if len == 1 => vec![*x],
            Some(other) => return Err(self.fail(key, format!("expected a vector, got {}", other.kind()))),
        };
        if v.len() != len {
            return Err(self.fail(key, format!("expected {len} entries, got {}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(self.fail(key, "entries must be finite"));
        }
        Ok(Some(Vector::from_vec(v)))
    }

    fn matrix(&self, key: &str, rows: usize, cols: usize) -> Result<Option<Matrix>, ConfigError> {
        let m = match self.entry(key).map(|e| &e.value) {
            None => return Ok(None),
            Some(Value::Matrix(m)) => m.clone(),
            Some(Value::Number(x)) if rows == 1 && cols == 1 => vec![vec![*x]],
            Some(other) => return Err(self.fail(key, format!("expected a matrix, got {}", other.kind()))),
        };
        let shape = (m.len(), m.first().map_or(0, Vec::len));
        if shape != (rows, cols) {
            return Err(self.fail(
                key,
                format!("expected a {rows}x{cols} matrix, got {}x{}", shape.0, shape.1),
            ));
        }
        if m.iter().flatten().any(|x| !x.is_finite()) {
            return Err(self.fail(key, "entries must be finite"));
        }
        Ok(Some(Matrix::from_fn(rows, cols, |i, j| m[i][j])))
    }

    fn points(&self, key: &str) -> Result<Option<[[f64; 2]; IBVS_FEATURES]>, ConfigError> {
        Ok(self
            .matrix(key, IBVS_FEATURES, 2)?
            .map(|m| std::array::from_fn(|i| [m[(i, 0)], m[(i, 1)]])))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let r = Reader { raw };
        let plant_name = match r.entry("plant").map(|e| &e.value) {
            Some(Value::Word(w)) => w.clone(),
            Some(other) => return Err(r.fail("plant", format!("expected a plant name, got {}", other.kind()))),
            None => return Err(err(None, Some("plant"), "missing; choose scalar, wmr or ibvs")),
        };
        let mut s = match presets::by_name(&plant_name) {
            Some(s) => s,
            None => {
                return Err(r.fail(
                    "plant",
                    format!("unknown plant `{plant_name}`; choose scalar, wmr or ibvs"),
                ))
            }
        };
        let allowed = plant_keys(&plant_name);
        for (key, entry) in &raw.entries {
            if COMMON_KEYS.contains(&key.as_str()) || allowed.contains(&key.as_str()) {
                continue;
            }
            let known = [SCALAR_KEYS, WMR_KEYS, IBVS_KEYS]
                .iter()
                .any(|ks| ks.contains(&key.as_str()));
            let message = if known {
                format!("does not apply to plant `{plant_name}`")
            } else {
                "unknown key".to_string()
            };
            return Err(err(entry.line, Some(key), message));
        }

        s.plant = build_plant(&r, &s, &plant_name)?;
        let dims = s.plant.dims();
        let nc = s.basis().len();

        let g = &mut s.gains;
        let q = r.matrix("gains.q", dims.n, dims.n)?.unwrap_or_else(|| g.q().clone());
        let rw = r.matrix("gains.r", dims.m, dims.m)?.unwrap_or_else(|| g.r().clone());
        g.set_weights(q, rw)
            .map_err(|e| err(None, Some("gains.q/gains.r"), e.to_string()))?;
        let scalars: [(&str, &mut f64); 13] = [
            ("gains.gamma_c", &mut g.gamma_c),
            ("gains.c1", &mut g.c1),
            ("gains.gamma_a", &mut g.gamma_a),
            ("gains.gamma_a2", &mut g.gamma_a2),
            ("gains.gamma_theta", &mut g.gamma_theta),
            ("gains.k_cl", &mut g.k_cl),
            ("gains.sigma2", &mut g.sigma2),
            ("gains.c2", &mut g.c2),
            ("gains.probing_amplitude", &mut g.probing_amplitude),
            ("gains.wc_radius", &mut g.wc_radius),
            ("gains.wa_radius", &mut g.wa_radius),
            ("gains.eps_rank", &mut g.eps_rank),
            ("sim.dt", &mut s.sim.dt),
        ];
        for (key, slot) in scalars {
            if let Some(v) = r.number(key)? {
                *slot = v;
            }
        }
        if let Some(v) = r.number("gains.gamma")? {
            g.gamma = Some(v);
        }
        if let Some(v) = r.vector("gains.theta_lo", dims.p)? {
            g.theta_lo = v;
        }
        if let Some(v) = r.vector("gains.theta_hi", dims.p)? {
            g.theta_hi = v;
        }
        if let Some(v) = r.count("gains.stack_capacity")? {
            g.stack_capacity = v as usize;
        }
        if let Some(v) = r.flag("gains.adapt_theta")? {
            g.adapt_theta = v;
        }
        if let Some(v) = r.number("sim.t_final")? {
            s.sim.t_final = v;
        }
        if let Some(v) = r.number("sim.g_bound")? {
            s.sim.g_bound = v;
        }
        if let Some(v) = r.count("sim.sample_every")? {
            s.sim.sample_every = v as usize;
        }
        if let Some(v) = r.count("sim.log_every")? {
            s.sim.log_every = v as usize;
        }
        if let Some(v) = r.count("sim.seed")? {
            s.sim.seed = v;
        }
        if let Some(v) = r.flag("sim.probed_bellman")? {
            s.sim.probed_bellman = v;
        }

        let wc = r.vector("init.wc", nc)?.unwrap_or_else(|| s.init.wc.clone());
        let wa = r.vector("init.wa", nc)?.unwrap_or_else(|| s.init.wa.clone());
        let theta = r.vector("init.theta", dims.p)?.unwrap_or_else(|| s.init.theta.clone());
        s.init = LearnerState::new(wc, wa, theta, s.gains.c2).map_err(|e| err(None, Some("init"), e.to_string()))?;

        let output_dir = match r.entry("output.dir").map(|e| &e.value) {
            None => None,
            Some(Value::Text(t)) | Some(Value::Word(t)) => Some(PathBuf::from(t)),
            Some(other) => return Err(r.fail("output.dir", format!("expected a path, got {}", other.kind()))),
        };

        presets::validate(&s).map_err(|e| err(None, None, e.to_string()))?;
        Ok(RunConfig {
            scenario: s,
            output_dir,
        })
    }

    /// Every setting spelled out, so that parsing the text back gives the
    /// same scenario bit for bit.
    pub fn to_text(&self) -> String {
        let s = &self.scenario;
        let mut out = String::new();
        let mut put = |key: &str, value: String| {
            let _ = writeln!(out, "{key} = {value}");
        };
        match s.plant.kind() {
            PlantKind::Scalar { b } => {
                put("plant", "scalar".into());
                put("scalar.b", num(*b));
                put("scalar.x0", vector(s.plant.initial_state()));
                put("scalar.x_d", vector(s.plant.desired_state()));
            }
            PlantKind::Wmr { a, b } => {
                put("plant", "wmr".into());
                put("wmr.a", num(*a));
                put("wmr.b", num(*b));
                put("wmr.x0", vector(s.plant.initial_state()));
                put("wmr.x_d", vector(s.plant.desired_state()));
            }
            PlantKind::Ibvs { intrinsics, depths0 } => {
                put("plant", "ibvs".into());
                let pixels = |x: &Vector| {
                    let rows: Vec<String> = (0..IBVS_FEATURES)
                        .map(|i| {
                            let p = intrinsics.to_pixels([x[2 * i], x[2 * i + 1]]);
                            format!("[{}, {}]", num(p[0]), num(p[1]))
                        })
                        .collect();
                    format!("[{}]", rows.join(", "))
                };
                put("ibvs.pixels0", pixels(s.plant.initial_state()));
                put("ibvs.pixels_d", pixels(s.plant.desired_state()));
                put(
                    "ibvs.focal",
                    format!("[{}, {}]", num(intrinsics.fx), num(intrinsics.fy)),
                );
                put(
                    "ibvs.principal",
                    format!("[{}, {}]", num(intrinsics.cx), num(intrinsics.cy)),
                );
                put("ibvs.depths0", list(depths0));
            }
        }
        let g = &s.gains;
        put("gains.q", matrix(g.q()));
        put("gains.r", matrix(g.r()));
        put("gains.gamma_c", num(g.gamma_c));
        put("gains.c1", num(g.c1));
        if let Some(v) = g.gamma {
            put("gains.gamma", num(v));
        }
        put("gains.gamma_a", num(g.gamma_a));
        put("gains.gamma_a2", num(g.gamma_a2));
        put("gains.gamma_theta", num(g.gamma_theta));
        put("gains.k_cl", num(g.k_cl));
        put("gains.sigma2", num(g.sigma2));
        put("gains.c2", num(g.c2));
        put("gains.probing_amplitude", num(g.probing_amplitude));
        put("gains.wc_radius", num(g.wc_radius));
        put("gains.wa_radius", num(g.wa_radius));
        put("gains.theta_lo", vector(&g.theta_lo));
        put("gains.theta_hi", vector(&g.theta_hi));
        put("gains.eps_rank", num(g.eps_rank));
        put("gains.stack_capacity", g.stack_capacity.to_string());
        put("gains.adapt_theta", g.adapt_theta.to_string());
        put("sim.dt", num(s.sim.dt));
        put("sim.t_final", num(s.sim.t_final));
        put("sim.sample_every", s.sim.sample_every.to_string());
        put("sim.log_every", s.sim.log_every.to_string());
        put("sim.seed", s.sim.seed.to_string());
        put("sim.probed_bellman", s.sim.probed_bellman.to_string());
        put("sim.g_bound", num(s.sim.g_bound));
        put("init.wc", vector(&s.init.wc));
        put("init.wa", vector(&s.init.wa));
        put("init.theta", vector(&s.init.theta));
        if let Some(dir) = &self.output_dir {
            put("output.dir", format!("\"{}\"", dir.display()));
        }
        out
    }
}

fn build_plant(r: &Reader<'_>, base: &Scenario, name: &str) -> Result<aac_core::PlantModel, ConfigError> {
    fn wrap(key: &'static str) -> impl Fn(aac_core::Error) -> ConfigError {
        move |e| err(None, Some(key), e.to_string())
    }
    match name {
        "scalar" => {
            let b = r.number("scalar.b")?.unwrap_or(match base.plant.kind() {
                PlantKind::Scalar { b } => *b,
                _ => unreachable!("scalar preset"),
            });
            let x0 = r
                .vector("scalar.x0", 1)?
                .unwrap_or_else(|| base.plant.initial_state().clone());
            let x_d = r
                .vector("scalar.x_d", 1)?
                .unwrap_or_else(|| base.plant.desired_state().clone());
            make_scalar_plant(b)
                .and_then(|p| p.with_initial_state(x0))
                .and_then(|p| p.with_desired_state(x_d))
                .map_err(wrap("scalar.b"))
        }
        "wmr" => {
            let (a0, b0) = match base.plant.kind() {
                PlantKind::Wmr { a, b } => (*a, *b),
                _ => unreachable!("robot preset"),
            };
            let a = r.number("wmr.a")?.unwrap_or(a0);
            let b = r.number("wmr.b")?.unwrap_or(b0);
            let x0 = r
                .vector("wmr.x0", 3)?
                .unwrap_or_else(|| base.plant.initial_state().clone());
            let x_d = r
                .vector("wmr.x_d", 3)?
                .unwrap_or_else(|| base.plant.desired_state().clone());
            make_wmr_plant(a, b, x0, x_d).map_err(wrap("wmr.a/wmr.b"))
        }
        _ => {
            let (k0, d0) = match base.plant.kind() {
                PlantKind::Ibvs { intrinsics, depths0 } => (*intrinsics, *depths0),
                _ => unreachable!("visual servoing preset"),
            };
            let focal = r.vector("ibvs.focal", 2)?;
            let principal = r.vector("ibvs.principal", 2)?;
            let k = Intrinsics {
                fx: focal.as_ref().map_or(k0.fx, |f| f[0]),
                fy: focal.as_ref().map_or(k0.fy, |f| f[1]),
                cx: principal.as_ref().map_or(k0.cx, |c| c[0]),
                cy: principal.as_ref().map_or(k0.cy, |c| c[1]),
            };
            let to_pixels = |x: &Vector| -> [[f64; 2]; IBVS_FEATURES] {
                std::array::from_fn(|i| k0.to_pixels([x[2 * i], x[2 * i + 1]]))
            };
            let px0 = r
                .points("ibvs.pixels0")?
                .unwrap_or_else(|| to_pixels(base.plant.initial_state()));
            let pxd = r
                .points("ibvs.pixels_d")?
                .unwrap_or_else(|| to_pixels(base.plant.desired_state()));
            let depths = match r.vector("ibvs.depths0", IBVS_FEATURES)? {
                Some(d) => std::array::from_fn(|i| d[i]),
                None => d0,
            };
            make_ibvs_plant(&px0, &pxd, k, depths).map_err(wrap("ibvs"))
        }
    }
}

/// Shortest text that parses back to exactly `v`.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn list(values: &[f64]) -> String {
    format!("[{}]", values.iter().map(|v| num(*v)).collect::<Vec<_>>().join(", "))
}

fn vector(v: &Vector) -> String {
    list(v.as_slice())
}

fn matrix(m: &Matrix) -> String {
    let off_diagonal_zero = m.is_square() && (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == 0.0));
    if off_diagonal_zero {
        return format!("diag({})", list(m.diagonal().as_slice()));
    }
    let rows: Vec<String> = m
        .row_iter()
        .map(|r| list(&r.iter().copied().collect::<Vec<_>>()))
        .collect();
    format!("[{}]", rows.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_with_pi() {
        assert_eq!(parse_value("pi/4").unwrap(), Value::Number(std::f64::consts::FRAC_PI_4));
        assert_eq!(
            parse_value("-3*pi/2").unwrap(),
            Value::Number(-1.5 * std::f64::consts::PI)
        );
        assert_eq!(parse_value("1e-6").unwrap(), Value::Number(1e-6));
        assert_eq!(parse_value("2.5E+3").unwrap(), Value::Number(2500.0));
    }

    #[test]
    fn compound_values() {
        assert_eq!(
            parse_value("[1, 2, pi]").unwrap(),
            Value::Vector(vec![1.0, 2.0, std::f64::consts::PI])
        );
        assert_eq!(
            parse_value("[[1, 0], [0, 2]]").unwrap(),
            parse_value("diag([1, 2])").unwrap()
        );
        assert_eq!(
            parse_value("eye(2, 3)").unwrap(),
            Value::Matrix(vec![vec![3.0, 0.0], vec![0.0, 3.0]])
        );
        assert_eq!(parse_value("fill(3, 0.5)").unwrap(), Value::Vector(vec![0.5; 3]));
        assert_eq!(parse_value("[]").unwrap(), Value::Vector(vec![]));
        assert_eq!(parse_value("\"out dir\"").unwrap(), Value::Text("out dir".into()));
        assert_eq!(parse_value("wmr").unwrap(), Value::Word("wmr".into()));
        assert_eq!(parse_value("true").unwrap(), Value::Bool(true));
    }

    #[test]
    fn malformed_values() {
        for bad in [
            "",
            "[1, 2",
            "[[1, 2], [3]]",
            "2 3",
            "eye(0, 1)",
            "fill(2.5, 1)",
            "1 / foo",
            "\"open",
            "[[[1]]]",
        ] {
            assert!(parse_value(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn comments_and_blank_lines() {
        let raw = RawConfig::parse("# header\n\nplant = wmr  # trailing\noutput.dir = \"a#b\"\n").unwrap();
        assert_eq!(raw.get("plant"), Some(&Value::Word("wmr".into())));
        assert_eq!(raw.get("output.dir"), Some(&Value::Text("a#b".into())));
    }

    #[test]
    fn diagnostics_name_line_and_key() {
        let e = RunConfig::parse("plant = wmr\n\ngains.bogus = 1\n").unwrap_err();
        assert_eq!((e.line, e.key.as_deref()), (Some(3), Some("gains.bogus")));
        assert_eq!(e.to_string(), "line 3: `gains.bogus`: unknown key");

        let e = RunConfig::parse("plant = wmr\nscalar.b = 2\n").unwrap_err();
        assert!(e.message.contains("does not apply"));

        let e = RunConfig::parse("plant = wmr\nwmr.x0 = [1, 2]\n").unwrap_err();
        assert_eq!(e.line, Some(2));

        let e = RunConfig::parse("plant = wmr\nsim.dt = 1\nsim.dt = 2\n").unwrap_err();
        assert!(e.message.contains("duplicate"));

        assert!(RunConfig::parse("sim.dt = 0.1\n")
            .unwrap_err()
            .message
            .contains("missing"));
        assert!(RunConfig::parse("plant = boat\n").is_err());
        assert!(RunConfig::parse("plant = wmr\nsim.sample_every = 2.5\n").is_err());
        assert!(RunConfig::parse("plant = wmr\ngains.q = eye(3, -1)\n").is_err());
        assert!(RunConfig::parse("plant = wmr\nsim.dt = -1\n").is_err());
    }

    #[test]
    fn plant_name_alone_gives_the_bundled_scenario() {
        for name in ["scalar", "wmr", "ibvs"] {
            let cfg = RunConfig::parse(&format!("plant = {name}\n")).unwrap();
            assert_eq!(cfg.scenario, presets::by_name(name).unwrap());
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        for name in ["scalar", "wmr", "ibvs"] {
            let text = format!("plant = {name}\ngains.gamma = 0.3\nsim.t_final = 1/3\noutput.dir = \"x\"\n");
            let cfg = RunConfig::parse(&text).unwrap();
            let again = RunConfig::parse(&cfg.to_text()).unwrap();
            assert_eq!(again, cfg);
            assert_eq!(again.to_text(), cfg.to_text());
        }
    }

    #[test]
    fn overrides_apply() {
        let cfg =
            RunConfig::parse("plant = wmr\nwmr.x0 = [1, -1, pi/2]\ngains.q = eye(3, 4)\ninit.theta = [1.2, 0.8]\n")
                .unwrap();
        assert_eq!(cfg.scenario.plant.initial_state()[1], -1.0);
        assert_eq!(cfg.scenario.gains.q()[(2, 2)], 4.0);
        assert_eq!(cfg.scenario.init.theta[1], 0.8);
        assert_eq!(cfg.scenario.init.gamma[(0, 0)], cfg.scenario.gains.c2);
    }
}
