//! Flat key = value run configuration with strict unknown-key rejection.
//! Command-line flags overlay file values; every effective value, defaults
//! included, is echoed into the JSON report for provenance.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use platelab_core::discretize::{BcKind, Resolution};
use platelab_core::elasticity::{default_mu_grid, Material};
use platelab_core::geometry::{C0Extension, DomainSpec, RadialProfile};

/// Every key the configuration understands, with its default as written.
/// A `*` default is computed from other keys at use time.
pub const KNOWN_KEYS: &[(&str, &str)] = &[
    ("domain", "disk:1"),
    ("bc", "navier"),
    ("mu", "0.3"),
    ("extension", "parallel"),
    ("resolution", "*default for domain"),
    ("modes", "4"),
    ("mu_grid", "0.05:0.95:19"),
    ("ids", "*all applicable"),
    ("sign", "both"),
    ("field", "x3y"),
    ("nodes", "256"),
    ("analytic", "false"),
    ("trace", "false"),
    ("young_modulus", "1"),
    ("thickness", "1"),
    ("areal_density", "1"),
    ("resolutions", "25,50,100,200"),
    ("out_dir", "out"),
    ("margin_floor", "0.01"),
    ("residual_floor", "1e-9"),
];

fn is_known(key: &str) -> bool {
    KNOWN_KEYS.iter().any(|(k, _)| *k == key)
}

/// Parsed key-value store; values stay strings until a typed accessor
/// reads them, so unused malformed keys still fail fast at load time only
/// for structure, not for type.
#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Strict parse: one `key = value` per line, `#` comments, no unknown
    /// or duplicate keys. Errors carry the offending line number.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config = Self::empty();
        for (index, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let number = index + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {number}: expected `key = value`, got `{line}`"))?;
            let key = key.trim();
            let value = value.trim();
            if !is_known(key) {
                bail!("config line {number}: unknown key `{key}`");
            }
            if value.is_empty() {
                bail!("config line {number}: key `{key}` has an empty value");
            }
            if config.values.insert(key.to_string(), value.to_string()).is_some() {
                bail!("config line {number}: duplicate key `{key}`");
            }
        }
        Ok(config)
    }

    /// Overlay one value (command-line flags win over the file).
    pub fn set(&mut self, key: &'static str, value: impl Into<String>) {
        debug_assert!(is_known(key), "unregistered config key {key}");
        self.values.insert(key.to_string(), value.into());
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn raw_or_default(&self, key: &str) -> &str {
        self.raw(key).unwrap_or_else(|| {
            KNOWN_KEYS
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, d)| *d)
                .expect("registered key")
        })
    }

    /// Every key with its effective value: explicit settings as given,
    /// defaults filled in, resolution expanded per domain. This map goes
    /// into each JSON report verbatim.
    pub fn effective(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        for (key, default) in KNOWN_KEYS {
            let value = match self.raw(key) {
                Some(v) => v.to_string(),
                None if *key == "resolution" => match self.domain().and_then(|d| {
                    let bc = self.bc()?;
                    Ok(Resolution::default_for(&d, &bc))
                }) {
                    Ok(res) => res.label(),
                    Err(_) => default.to_string(),
                },
                None => default.to_string(),
            };
            map.insert(key.to_string(), value);
        }
        map
    }

    pub fn domain(&self) -> Result<DomainSpec<f64>> {
        parse_domain(self.raw_or_default("domain"))
    }

    pub fn mu(&self) -> Result<f64> {
        parse_f64("mu", self.raw_or_default("mu"))
    }

    pub fn extension(&self) -> Result<C0Extension> {
        match self.raw_or_default("extension") {
            "parallel" => Ok(C0Extension::ParallelCurve),
            "constant" => Ok(C0Extension::Constant),
            other => bail!("extension must be `parallel` or `constant`, got `{other}`"),
        }
    }

    pub fn bc(&self) -> Result<BcKind<f64>> {
        match self.raw_or_default("bc") {
            "dirichlet" | "clamped" => Ok(BcKind::Dirichlet),
            "navier" | "hinged" => Ok(BcKind::Navier),
            "supported" | "simply-supported" => Ok(BcKind::Supported {
                mu: self.mu()?,
                extension: self.extension()?,
            }),
            other => bail!(
                "bc must be one of dirichlet|clamped, navier|hinged, supported, got `{other}`"
            ),
        }
    }

    /// Resolution for the configured domain: `R,A` (polar) or `NX,NY`
    /// (tensor) counts, or a scale factor like `2x` applied to the default.
    pub fn resolution(&self, domain: &DomainSpec<f64>, bc: &BcKind<f64>) -> Result<Resolution> {
        let default = Resolution::default_for(domain, bc);
        let Some(text) = self.raw("resolution") else {
            return Ok(default);
        };
        if let Some(factor) = text.strip_suffix('x') {
            let factor: f64 = factor
                .parse()
                .with_context(|| format!("resolution scale `{text}`"))?;
            if factor <= 0.0 {
                bail!("resolution scale must be positive, got `{text}`");
            }
            return Ok(default.scaled(factor));
        }
        let parts = parse_usize_list("resolution", text)?;
        if parts.len() != 2 {
            bail!("resolution needs two counts, got `{text}`");
        }
        Ok(match default {
            Resolution::Polar { .. } => Resolution::Polar { radial: parts[0], angular: parts[1] },
            Resolution::Tensor { .. } => Resolution::Tensor { nx: parts[0], ny: parts[1] },
        })
    }

    pub fn modes(&self) -> Result<usize> {
        let n = parse_usize("modes", self.raw_or_default("modes"))?;
        if n == 0 {
            bail!("modes must be at least 1");
        }
        Ok(n)
    }

    /// `start:end:count` (inclusive, uniform) or an explicit comma list.
    pub fn mu_grid(&self) -> Result<Vec<f64>> {
        let text = self.raw_or_default("mu_grid");
        if text == "default" {
            return Ok(default_mu_grid());
        }
        if let Some((start, rest)) = text.split_once(':') {
            let (end, count) = rest
                .split_once(':')
                .ok_or_else(|| anyhow!("mu_grid range needs start:end:count, got `{text}`"))?;
            let start = parse_f64("mu_grid start", start)?;
            let end = parse_f64("mu_grid end", end)?;
            let count = parse_usize("mu_grid count", count)?;
            if count < 2 || end <= start {
                bail!("mu_grid range needs end > start and count >= 2, got `{text}`");
            }
            let step = (end - start) / (count - 1) as f64;
            return Ok((0..count).map(|i| start + step * i as f64).collect());
        }
        text.split(',')
            .map(|part| parse_f64("mu_grid entry", part))
            .collect()
    }

    /// Identity selection for verify/study; `None` means all applicable.
    pub fn ids(&self) -> Option<Vec<String>> {
        self.raw("ids")
            .map(|text| text.split(',').map(|s| s.trim().to_string()).collect())
    }

    pub fn sign(&self) -> Result<&str> {
        match self.raw_or_default("sign") {
            s @ ("plus" | "minus" | "both") => Ok(s),
            other => bail!("sign must be plus|minus|both, got `{other}`"),
        }
    }

    pub fn field(&self) -> Result<&str> {
        match self.raw_or_default("field") {
            f @ ("quad" | "x3y" | "dist") => Ok(f),
            other => bail!("field must be quad|x3y|dist, got `{other}`"),
        }
    }

    pub fn nodes(&self) -> Result<usize> {
        let n = parse_usize("nodes", self.raw_or_default("nodes"))?;
        if n < 8 || n % 2 != 0 {
            bail!("nodes must be an even count of at least 8, got {n}");
        }
        Ok(n)
    }

    pub fn analytic(&self) -> Result<bool> {
        parse_bool("analytic", self.raw_or_default("analytic"))
    }

    pub fn trace(&self) -> Result<bool> {
        parse_bool("trace", self.raw_or_default("trace"))
    }

    pub fn material(&self) -> Result<Material<f64>> {
        Material::new(
            self.mu()?,
            parse_f64("young_modulus", self.raw_or_default("young_modulus"))?,
            parse_f64("thickness", self.raw_or_default("thickness"))?,
            parse_f64("areal_density", self.raw_or_default("areal_density"))?,
        )
        .map_err(|err| anyhow!("material: {err}"))
    }

    /// Refinement ladder (radial levels, or boundary nodes under
    /// `analytic = true`).
    pub fn resolutions(&self) -> Result<Vec<usize>> {
        parse_usize_list("resolutions", self.raw_or_default("resolutions"))
    }

    pub fn out_dir(&self) -> &Path {
        Path::new(self.raw_or_default("out_dir"))
    }

    pub fn margin_floor(&self) -> Result<f64> {
        let floor = parse_f64("margin_floor", self.raw_or_default("margin_floor"))?;
        if floor <= 0.0 {
            bail!("margin_floor must be positive");
        }
        Ok(floor)
    }

    pub fn residual_floor(&self) -> Result<f64> {
        let floor = parse_f64("residual_floor", self.raw_or_default("residual_floor"))?;
        if floor <= 0.0 {
            bail!("residual_floor must be positive");
        }
        Ok(floor)
    }
}

fn parse_f64(name: &str, text: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .with_context(|| format!("{name}: expected a number, got `{text}`"))
}

fn parse_usize(name: &str, text: &str) -> Result<usize> {
    text.trim()
        .parse::<usize>()
        .with_context(|| format!("{name}: expected a count, got `{text}`"))
}

fn parse_bool(name: &str, text: &str) -> Result<bool> {
    match text.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => bail!("{name}: expected true|false, got `{other}`"),
    }
}

fn parse_usize_list(name: &str, text: &str) -> Result<Vec<usize>> {
    text.split(',').map(|part| parse_usize(name, part)).collect()
}

/// Domain grammar: `disk:R`, `ellipse:A,B`, `rect:A,B`, or
/// `star:RHO0,cos3=0.2,sin2=-0.1` (any number of Fourier terms).
pub fn parse_domain(text: &str) -> Result<DomainSpec<f64>> {
    let (kind, rest) = text
        .split_once(':')
        .ok_or_else(|| anyhow!("domain needs kind:params, got `{text}`"))?;
    let domain = match kind {
        "disk" => DomainSpec::Disk { radius: parse_f64("disk radius", rest)? },
        "ellipse" => {
            let (a, b) = rest
                .split_once(',')
                .ok_or_else(|| anyhow!("ellipse needs two semi-axes, got `{rest}`"))?;
            DomainSpec::Ellipse { a: parse_f64("ellipse a", a)?, b: parse_f64("ellipse b", b)? }
        }
        "rect" | "rectangle" => {
            let (a, b) = rest
                .split_once(',')
                .ok_or_else(|| anyhow!("rect needs two side lengths, got `{rest}`"))?;
            DomainSpec::Rectangle { a: parse_f64("rect a", a)?, b: parse_f64("rect b", b)? }
        }
        "star" => {
            let mut parts = rest.split(',');
            let constant = parse_f64(
                "star constant",
                parts.next().ok_or_else(|| anyhow!("star needs a constant radius"))?,
            )?;
            let mut cos: Vec<f64> = Vec::new();
            let mut sin: Vec<f64> = Vec::new();
            for part in parts {
                let (key, value) = part
                    .split_once('=')
                    .ok_or_else(|| anyhow!("star term needs cosK=V or sinK=V, got `{part}`"))?;
                let (bank, harmonic) = if let Some(k) = key.strip_prefix("cos") {
                    (&mut cos, k)
                } else if let Some(k) = key.strip_prefix("sin") {
                    (&mut sin, k)
                } else {
                    bail!("star term must start with cos or sin, got `{part}`");
                };
                let harmonic = parse_usize("star harmonic", harmonic)?;
                if harmonic == 0 {
                    bail!("star harmonics start at 1, got `{part}`");
                }
                if bank.len() < harmonic {
                    bank.resize(harmonic, 0.0);
                }
                bank[harmonic - 1] = parse_f64("star amplitude", value)?;
            }
            DomainSpec::Star { profile: RadialProfile { constant, cos, sin } }
        }
        other => bail!("domain kind must be disk|ellipse|rect|star, got `{other}`"),
    };
    domain.validate().map_err(|err| anyhow!("domain `{text}`: {err}"))?;
    Ok(domain)
}

/// Render the effective configuration as `key = value` lines (the format
/// `from_file` reads back), used for `--help` examples and reports.
pub fn render(map: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for (key, value) in map {
        let _ = writeln!(out, "{key} = {value}");
    }
    out
}
