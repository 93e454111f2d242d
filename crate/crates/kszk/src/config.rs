//! Flat-text run configuration: `key = value` lines, `#` comments, strict
//! key checking, and a canonical serialization so configs diff cleanly.

use std::collections::BTreeMap;

use crate::basis::ModeGrid;
use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::solver::{InitialData, InitialKind, Scheme, SolverConfig};

/// Every key the parser accepts, in canonical output order.
pub const KNOWN_KEYS: [&str; 19] = [
    "n",
    "lengths",
    "modes",
    "grid_points",
    "dt",
    "t_end",
    "scheme",
    "zk",
    "nonlinear",
    "dealias",
    "record_every",
    "ic.kind",
    "ic.amplitude",
    "ic.mode",
    "seed",
    "c_s",
    "output_path",
    "sweep.scale",
    "sweep.amplitude",
];

/// An inclusive range with a sample count, parsed from `min,max,count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range3 {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Range3 {
    pub fn validate(&self, what: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(Error::Config(format!(
                "{what} range needs finite min <= max, got {},{}",
                self.min, self.max
            )));
        }
        if self.count == 0 {
            return Err(Error::Config(format!("{what} range needs count >= 1")));
        }
        if self.count == 1 && self.min != self.max {
            return Err(Error::Config(format!(
                "{what} range with count 1 needs min = max"
            )));
        }
        Ok(())
    }

    /// The `count` sample points, evenly spaced, endpoints included.
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        (0..self.count)
            .map(|i| {
                self.min + (self.max - self.min) * i as f64 / (self.count - 1) as f64
            })
            .collect()
    }
}

/// Sweep axes, present only when the config carries `sweep.*` keys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRanges {
    /// Multiplies every box length.
    pub scale: Range3,
    /// Replaces `ic.amplitude`.
    pub amplitude: Range3,
}

/// Fully resolved configuration for one run (and optionally a sweep).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub modes: Vec<usize>,
    pub grid_points: Vec<usize>,
    pub solver: SolverConfig,
    pub initial: InitialData,
    pub c_s: Option<f64>,
    pub output_path: String,
    pub sweep: Option<SweepRanges>,
}

impl RunConfig {
    /// Build the discretization this config describes.
    pub fn grid(&self) -> Result<ModeGrid> {
        ModeGrid::new(
            self.domain.clone(),
            self.modes.clone(),
            self.grid_points.clone(),
        )
    }

    /// The canonical text form: every key present, fixed order, shortest
    /// round-trip float formatting. `parse` of this text reproduces the
    /// config exactly.
    pub fn canonical_text(&self) -> String {
        let join_f = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let join_u = |v: &[usize]| {
            v.iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut out = String::new();
        out.push_str(&format!("n = {}\n", self.domain.dim()));
        out.push_str(&format!("lengths = {}\n", join_f(self.domain.lengths())));
        out.push_str(&format!("modes = {}\n", join_u(&self.modes)));
        out.push_str(&format!("grid_points = {}\n", join_u(&self.grid_points)));
        out.push_str(&format!("dt = {}\n", self.solver.dt));
        out.push_str(&format!("t_end = {}\n", self.solver.t_end));
        out.push_str(&format!(
            "scheme = {}\n",
            match self.solver.scheme {
                Scheme::Imex1 => "imex1",
                Scheme::Cnab2 => "cnab2",
            }
        ));
        out.push_str(&format!("zk = {}\n", self.solver.zk));
        out.push_str(&format!("nonlinear = {}\n", self.solver.nonlinear));
        out.push_str(&format!("dealias = {}\n", self.solver.dealias));
        out.push_str(&format!("record_every = {}\n", self.solver.record_every));
        out.push_str(&format!(
            "ic.kind = {}\n",
            match self.initial.kind {
                InitialKind::PotentialBump => "potential_bump",
                InitialKind::SingleMode => "single_mode",
                InitialKind::RandomCurlFree => "random_curl_free",
            }
        ));
        out.push_str(&format!("ic.amplitude = {}\n", self.initial.amplitude));
        if let Some(mode) = &self.initial.mode {
            out.push_str(&format!("ic.mode = {}\n", join_u(mode)));
        }
        out.push_str(&format!("seed = {}\n", self.initial.seed));
        if let Some(cs) = self.c_s {
            out.push_str(&format!("c_s = {cs}\n"));
        }
        out.push_str(&format!("output_path = {}\n", self.output_path));
        if let Some(sweep) = &self.sweep {
            out.push_str(&format!(
                "sweep.scale = {},{},{}\n",
                sweep.scale.min, sweep.scale.max, sweep.scale.count
            ));
            out.push_str(&format!(
                "sweep.amplitude = {},{},{}\n",
                sweep.amplitude.min, sweep.amplitude.max, sweep.amplitude.count
            ));
        }
        out
    }
}

/// Split raw config text into a key/value map, rejecting malformed lines,
/// unknown keys, and duplicates.
pub fn parse_raw(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(Error::Config(format!(
                "line {}: expected `key = value`, got `{raw_line}`",
                lineno + 1
            )));
        };
        let key = line[..eq].trim();
        let value = line[eq + 1..].trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!(
                "line {}: unknown key `{key}`",
                lineno + 1
            )));
        }
        if value.is_empty() {
            return Err(Error::Config(format!(
                "line {}: key `{key}` has no value",
                lineno + 1
            )));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::Config(format!(
                "line {}: duplicate key `{key}`",
                lineno + 1
            )));
        }
    }
    Ok(map)
}

/// Parse one `key=value` override argument.
pub fn parse_override(arg: &str) -> Result<(String, String)> {
    let Some(eq) = arg.find('=') else {
        return Err(Error::Config(format!(
            "override `{arg}` must have the form key=value"
        )));
    };
    let key = arg[..eq].trim();
    let value = arg[eq + 1..].trim();
    if !KNOWN_KEYS.contains(&key) {
        return Err(Error::Config(format!("override has unknown key `{key}`")));
    }
    if value.is_empty() {
        return Err(Error::Config(format!("override `{arg}` has no value")));
    }
    Ok((key.to_string(), value.to_string()))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| Error::Config(format!("key `{key}`: `{v}` is not a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| Error::Config(format!("key `{key}`: `{v}` is not a non-negative integer")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!(
            "key `{key}`: expected true or false, got `{v}`"
        ))),
    }
}

/// Comma-separated list; a single entry broadcasts to `n` copies.
fn parse_usize_list(key: &str, v: &str, n: usize) -> Result<Vec<usize>> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    let vals: Vec<usize> = parts
        .iter()
        .map(|p| parse_usize(key, p))
        .collect::<Result<_>>()?;
    if vals.len() == 1 && n > 1 {
        return Ok(vec![vals[0]; n]);
    }
    if vals.len() != n {
        return Err(Error::Config(format!(
            "key `{key}`: expected {n} comma-separated values, got {}",
            vals.len()
        )));
    }
    Ok(vals)
}

fn parse_f64_list(key: &str, v: &str, n: usize) -> Result<Vec<f64>> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    let vals: Vec<f64> = parts
        .iter()
        .map(|p| parse_f64(key, p))
        .collect::<Result<_>>()?;
    if vals.len() == 1 && n > 1 {
        return Ok(vec![vals[0]; n]);
    }
    if vals.len() != n {
        return Err(Error::Config(format!(
            "key `{key}`: expected {n} comma-separated values, got {}",
            vals.len()
        )));
    }
    Ok(vals)
}

fn parse_range3(key: &str, v: &str) -> Result<Range3> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "key `{key}`: expected min,max,count, got `{v}`"
        )));
    }
    let range = Range3 {
        min: parse_f64(key, parts[0])?,
        max: parse_f64(key, parts[1])?,
        count: parse_usize(key, parts[2])?,
    };
    range.validate(key)?;
    Ok(range)
}

/// Assemble a [`RunConfig`] from the raw map, filling defaults and
/// validating every field.
pub fn build_config(map: &BTreeMap<String, String>) -> Result<RunConfig> {
    let require = |key: &str| -> Result<&String> {
        map.get(key)
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    };

    let n = parse_usize("n", require("n")?)?;
    if !(2..=7).contains(&n) {
        return Err(Error::Config(format!(
            "n must be between 2 and 7, got {n}"
        )));
    }
    let lengths = parse_f64_list("lengths", require("lengths")?, n)?;
    let domain = DomainSpec::new(lengths)?;

    let modes = parse_usize_list("modes", require("modes")?, n)?;
    let grid_points = match map.get("grid_points") {
        Some(v) => parse_usize_list("grid_points", v, n)?,
        // Default: the smallest grid that dealiases quadratic products.
        None => modes.iter().map(|&m| (3 * m + 2) / 2).collect(),
    };

    let solver = SolverConfig {
        dt: parse_f64("dt", require("dt")?)?,
        t_end: parse_f64("t_end", require("t_end")?)?,
        scheme: match map.get("scheme").map(String::as_str) {
            None | Some("cnab2") => Scheme::Cnab2,
            Some("imex1") => Scheme::Imex1,
            Some(other) => {
                return Err(Error::Config(format!(
                    "key `scheme`: expected imex1 or cnab2, got `{other}`"
                )))
            }
        },
        zk: map
            .get("zk")
            .map(|v| parse_bool("zk", v))
            .transpose()?
            .unwrap_or(true),
        nonlinear: map
            .get("nonlinear")
            .map(|v| parse_bool("nonlinear", v))
            .transpose()?
            .unwrap_or(true),
        dealias: map
            .get("dealias")
            .map(|v| parse_bool("dealias", v))
            .transpose()?
            .unwrap_or(true),
        record_every: map
            .get("record_every")
            .map(|v| parse_usize("record_every", v))
            .transpose()?
            .unwrap_or(1),
    };
    solver.validate()?;

    let initial = InitialData {
        kind: match map.get("ic.kind").map(String::as_str) {
            None | Some("potential_bump") => InitialKind::PotentialBump,
            Some("single_mode") => InitialKind::SingleMode,
            Some("random_curl_free") => InitialKind::RandomCurlFree,
            Some(other) => {
                return Err(Error::Config(format!(
                    "key `ic.kind`: expected potential_bump, single_mode or \
                     random_curl_free, got `{other}`"
                )))
            }
        },
        amplitude: map
            .get("ic.amplitude")
            .map(|v| parse_f64("ic.amplitude", v))
            .transpose()?
            .unwrap_or(1.0),
        mode: map
            .get("ic.mode")
            .map(|v| parse_usize_list("ic.mode", v, n))
            .transpose()?,
        seed: map
            .get("seed")
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| Error::Config(format!("key `seed`: `{v}` is not an integer")))
            })
            .transpose()?
            .unwrap_or(0),
    };

    let c_s = map
        .get("c_s")
        .map(|v| parse_f64("c_s", v))
        .transpose()?;
    if let Some(cs) = c_s {
        if !(cs.is_finite() && cs > 0.0) {
            return Err(Error::Config(format!("c_s must be positive, got {cs}")));
        }
    }

    let sweep = match (map.get("sweep.scale"), map.get("sweep.amplitude")) {
        (None, None) => None,
        (Some(s), Some(a)) => Some(SweepRanges {
            scale: parse_range3("sweep.scale", s)?,
            amplitude: parse_range3("sweep.amplitude", a)?,
        }),
        _ => {
            return Err(Error::Config(
                "sweep.scale and sweep.amplitude must be given together".into(),
            ))
        }
    };

    let config = RunConfig {
        domain,
        modes,
        grid_points,
        solver,
        initial,
        c_s,
        output_path: map
            .get("output_path")
            .cloned()
            .unwrap_or_else(|| "run.csv".to_string()),
        sweep,
    };
    // Surface inconsistent mode/grid shapes at parse time.
    config.grid()?;
    Ok(config)
}

/// Parse config text and apply `key=value` overrides on top.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut map = parse_raw(text)?;
    for arg in overrides {
        let (key, value) = parse_override(arg)?;
        map.insert(key, value);
    }
    build_config(&map)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "\
# benchmark box
n = 2
lengths = 1,1
modes = 8
dt = 1e-4
t_end = 1e-2
";

    #[test]
    fn parses_with_defaults() {
        let cfg = parse_config(BASE, &[]).unwrap();
        assert_eq!(cfg.domain.lengths(), &[1.0, 1.0]);
        assert_eq!(cfg.modes, vec![8, 8]);
        assert_eq!(cfg.grid_points, vec![13, 13]);
        assert_eq!(cfg.solver.scheme, Scheme::Cnab2);
        assert!(cfg.solver.zk && cfg.solver.nonlinear && cfg.solver.dealias);
        assert_eq!(cfg.solver.record_every, 1);
        assert_eq!(cfg.initial.kind, InitialKind::PotentialBump);
        assert_eq!(cfg.initial.amplitude, 1.0);
        assert_eq!(cfg.initial.seed, 0);
        assert_eq!(cfg.output_path, "run.csv");
        assert!(cfg.c_s.is_none() && cfg.sweep.is_none());
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let bad = format!("{BASE}espresso = strong\n");
        assert!(parse_config(&bad, &[]).is_err());
        let dup = format!("{BASE}dt = 1e-5\n");
        assert!(parse_config(&dup, &[]).is_err());
        let noval = format!("{BASE}zk =\n");
        assert!(parse_config(&noval, &[]).is_err());
        let noeq = format!("{BASE}just words\n");
        assert!(parse_config(&noeq, &[]).is_err());
    }

    #[test]
    fn rejects_missing_required_keys() {
        for missing in ["n", "lengths", "modes", "dt", "t_end"] {
            let text: String = BASE
                .lines()
                .filter(|l| !l.starts_with(missing))
                .map(|l| format!("{l}\n"))
                .collect();
            assert!(parse_config(&text, &[]).is_err(), "missing {missing}");
        }
    }

    #[test]
    fn overrides_replace_file_values() {
        let cfg = parse_config(
            BASE,
            &[
                "dt=1e-5".to_string(),
                "scheme=imex1".to_string(),
                "ic.kind=single_mode".to_string(),
                "ic.mode=1,2".to_string(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.solver.dt, 1e-5);
        assert_eq!(cfg.solver.scheme, Scheme::Imex1);
        assert_eq!(cfg.initial.kind, InitialKind::SingleMode);
        assert_eq!(cfg.initial.mode, Some(vec![1, 2]));
        assert!(parse_config(BASE, &["bogus=1".to_string()]).is_err());
        assert!(parse_config(BASE, &["no_equals".to_string()]).is_err());
    }

    #[test]
    fn canonical_text_round_trips() {
        let texts = [
            BASE.to_string(),
            format!(
                "{BASE}scheme = imex1\nzk = false\nic.kind = single_mode\n\
                 ic.mode = 2,1\nc_s = 0.25\nseed = 9\noutput_path = out/x.csv\n"
            ),
            format!("{BASE}sweep.scale = 0.5,2,4\nsweep.amplitude = 0.1,0.1,1\n"),
        ];
        for text in texts {
            let cfg = parse_config(&text, &[]).unwrap();
            let canon = cfg.canonical_text();
            let reparsed = parse_config(&canon, &[]).unwrap();
            assert_eq!(cfg, reparsed);
            assert_eq!(canon, reparsed.canonical_text());
        }
    }

    #[test]
    fn sweep_keys_must_come_in_pairs_and_validate() {
        let half = format!("{BASE}sweep.scale = 1,2,3\n");
        assert!(parse_config(&half, &[]).is_err());
        let bad_count = format!("{BASE}sweep.scale = 1,2,0\nsweep.amplitude = 1,1,1\n");
        assert!(parse_config(&bad_count, &[]).is_err());
        let bad_order = format!("{BASE}sweep.scale = 2,1,3\nsweep.amplitude = 1,1,1\n");
        assert!(parse_config(&bad_order, &[]).is_err());

        let ok = format!("{BASE}sweep.scale = 0.5,2,4\nsweep.amplitude = 0.05,0.2,2\n");
        let cfg = parse_config(&ok, &[]).unwrap();
        let sweep = cfg.sweep.unwrap();
        assert_eq!(sweep.scale.points(), vec![0.5, 1.0, 1.5, 2.0]);
        assert_eq!(sweep.amplitude.points(), vec![0.05, 0.2]);
    }

    #[test]
    fn range_with_single_point_needs_equal_endpoints() {
        assert!(parse_range3("sweep.scale", "1,1,1").is_ok());
        assert!(parse_range3("sweep.scale", "1,2,1").is_err());
        assert_eq!(parse_range3("sweep.scale", "3,3,1").unwrap().points(), vec![3.0]);
    }

    #[test]
    fn mode_and_grid_shape_mismatches_are_caught() {
        let bad = format!("{BASE}grid_points = 4\n"); // below modes = 8
        assert!(parse_config(&bad, &[]).is_err());
        let bad_len = format!("{BASE}ic.mode = 1,2,3\n");
        assert!(parse_config(&bad_len, &[]).is_err());
    }
}
