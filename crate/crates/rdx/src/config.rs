//! Simulation config files.
//!
//! Line-oriented `section.key = value` text; `#` starts a comment. Keys per
//! section:
//!
//! ```text
//! grid.dim        1 | 2                      (default 1)
//! grid.nx         cells in x                 (required)
//! grid.ny         cells in y                 (required when dim = 2)
//! grid.lx         length in x                (default 1)
//! grid.ly         length in y                (default 1)
//! time.t_end      horizon                    (required)
//! time.dt_init    first step                 (required)
//! time.dt_min     smallest step              (default dt_init·1e-6)
//! time.dt_max     largest step               (default dt_init)
//! time.scheme     lie | strang               (default lie)
//! time.steady_tol steady-state threshold     (default 1e-10)
//! time.safety     post-rejection factor      (default 0.9)
//! init.<species>  constant C
//!                 random MIN MAX SEED
//!                 gaussian X0 [Y0] SIGMA AMP BASE
//! boundary.<species> = B  (B <= 0, default 0)
//! output.interval snapshot spacing           (default t_end/10)
//! output.lp       norm exponent              (default 2)
//! output.dir      output directory           (default "out")
//! output.snapshots true | false              (default true)
//! ```
//!
//! Every species of the network needs an `init` line.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rdx_core::integrator::SimulationSetup;
use rdx_core::{BoundaryFlux, Grid, IntegratorConfig, ReactionNetwork, Splitting, StateField};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {message}")]
    InvalidValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("line {line}: unknown species {name}")]
    UnknownSpecies { line: usize, name: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("no initializer for species {0}")]
    MissingInit(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Initializer {
    Constant(f64),
    Random {
        min: f64,
        max: f64,
        seed: u64,
    },
    Gaussian {
        x0: f64,
        y0: f64,
        sigma: f64,
        amp: f64,
        base: f64,
    },
}

impl Initializer {
    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        match *self {
            Initializer::Constant(c) => vec![c; grid.cell_count()],
            Initializer::Random { min, max, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..grid.cell_count())
                    .map(|_| {
                        if max > min {
                            rng.gen_range(min..max)
                        } else {
                            min
                        }
                    })
                    .collect()
            }
            Initializer::Gaussian {
                x0,
                y0,
                sigma,
                amp,
                base,
            } => grid.sample(|x, y| {
                let mut r2 = (x - x0) * (x - x0);
                if grid.dim() == 2 {
                    r2 += (y - y0) * (y - y0);
                }
                base + amp * (-r2 / (2.0 * sigma * sigma)).exp()
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry<T> {
    line: usize,
    value: T,
}

/// Parsed config, not yet bound to a network.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dim: usize,
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub t_end: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub scheme: Splitting,
    pub steady_tol: f64,
    pub safety: f64,
    pub output_interval: f64,
    pub lp: f64,
    pub dir: PathBuf,
    pub snapshots: bool,
    init: Vec<(String, Entry<Initializer>)>,
    boundary: Vec<(String, Entry<f64>)>,
}

fn parse_f64(line: usize, key: &str, s: &str) -> Result<f64, ConfigError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ConfigError::InvalidValue {
            line,
            key: key.to_string(),
            message: format!("`{s}` is not a finite number"),
        }),
    }
}

fn parse_usize(line: usize, key: &str, s: &str) -> Result<usize, ConfigError> {
    s.parse::<usize>().map_err(|_| ConfigError::InvalidValue {
        line,
        key: key.to_string(),
        message: format!("`{s}` is not a nonnegative integer"),
    })
}

fn parse_init(line: usize, key: &str, s: &str) -> Result<Initializer, ConfigError> {
    let bad = |message: String| ConfigError::InvalidValue {
        line,
        key: key.to_string(),
        message,
    };
    let mut words = s.split_whitespace();
    let kind = words
        .next()
        .ok_or_else(|| bad("empty initializer".into()))?;
    let args: Vec<&str> = words.collect();
    let nums = |args: &[&str]| -> Result<Vec<f64>, ConfigError> {
        args.iter().map(|a| parse_f64(line, key, a)).collect()
    };
    let init = match (kind, args.len()) {
        ("constant", 1) => Initializer::Constant(nums(&args)?[0]),
        ("random", 3) => {
            let v = nums(&args[..2])?;
            let seed = args[2]
                .parse::<u64>()
                .map_err(|_| bad(format!("seed `{}` is not an unsigned integer", args[2])))?;
            if v[1] < v[0] {
                return Err(bad("random needs MIN <= MAX".into()));
            }
            Initializer::Random {
                min: v[0],
                max: v[1],
                seed,
            }
        }
        ("gaussian", 4) | ("gaussian", 5) => {
            let v = nums(&args)?;
            let (x0, y0, rest) = if v.len() == 4 {
                (v[0], 0.0, &v[1..])
            } else {
                (v[0], v[1], &v[2..])
            };
            if !(rest[0] > 0.0) {
                return Err(bad("gaussian SIGMA must be positive".into()));
            }
            Initializer::Gaussian {
                x0,
                y0,
                sigma: rest[0],
                amp: rest[1],
                base: rest[2],
            }
        }
        ("constant" | "random" | "gaussian", n) => {
            return Err(bad(format!("wrong number of arguments ({n}) for `{kind}`")))
        }
        _ => return Err(bad(format!("unknown initializer `{kind}`"))),
    };
    Ok(init)
}

impl SimConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut scalars: BTreeMap<String, Entry<String>> = BTreeMap::new();
        let mut init: Vec<(String, Entry<Initializer>)> = Vec::new();
        let mut boundary: Vec<(String, Entry<f64>)> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: "expected `section.key = value`".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            let (section, name) = key.split_once('.').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("key `{key}` has no section"),
            })?;
            if value.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("missing value for `{key}`"),
                });
            }
            let duplicate = || ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
            };
            match section {
                "init" => {
                    if init.iter().any(|(n, _)| n == name) {
                        return Err(duplicate());
                    }
                    let value = parse_init(line, key, value)?;
                    init.push((name.to_string(), Entry { line, value }));
                }
                "boundary" => {
                    if boundary.iter().any(|(n, _)| n == name) {
                        return Err(duplicate());
                    }
                    let value = parse_f64(line, key, value)?;
                    if value > 0.0 {
                        return Err(ConfigError::InvalidValue {
                            line,
                            key: key.to_string(),
                            message: "boundary flux must be <= 0".into(),
                        });
                    }
                    boundary.push((name.to_string(), Entry { line, value }));
                }
                "grid" | "time" | "output" => {
                    const KNOWN: &[&str] = &[
                        "grid.dim",
                        "grid.nx",
                        "grid.ny",
                        "grid.lx",
                        "grid.ly",
                        "time.t_end",
                        "time.dt_init",
                        "time.dt_min",
                        "time.dt_max",
                        "time.scheme",
                        "time.steady_tol",
                        "time.safety",
                        "output.interval",
                        "output.lp",
                        "output.dir",
                        "output.snapshots",
                    ];
                    if !KNOWN.contains(&key) {
                        return Err(ConfigError::UnknownKey {
                            line,
                            key: key.to_string(),
                        });
                    }
                    if scalars.contains_key(key) {
                        return Err(duplicate());
                    }
                    scalars.insert(
                        key.to_string(),
                        Entry {
                            line,
                            value: value.to_string(),
                        },
                    );
                }
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })
                }
            }
        }

        let num = |key: &'static str| -> Result<Option<f64>, ConfigError> {
            scalars
                .get(key)
                .map(|e| parse_f64(e.line, key, &e.value))
                .transpose()
        };
        let int = |key: &'static str| -> Result<Option<usize>, ConfigError> {
            scalars
                .get(key)
                .map(|e| parse_usize(e.line, key, &e.value))
                .transpose()
        };
        let invalid = |key: &'static str, message: &str| {
            let line = scalars.get(key).map_or(0, |e| e.line);
            ConfigError::InvalidValue {
                line,
                key: key.to_string(),
                message: message.to_string(),
            }
        };

        let dim = int("grid.dim")?.unwrap_or(1);
        if dim != 1 && dim != 2 {
            return Err(invalid("grid.dim", "must be 1 or 2"));
        }
        let nx = int("grid.nx")?.ok_or(ConfigError::Missing("grid.nx"))?;
        let ny = match (dim, int("grid.ny")?) {
            (1, None) => 1,
            (1, Some(_)) => return Err(invalid("grid.ny", "only allowed when grid.dim = 2")),
            (_, Some(n)) => n,
            (_, None) => return Err(ConfigError::Missing("grid.ny")),
        };
        let t_end = num("time.t_end")?.ok_or(ConfigError::Missing("time.t_end"))?;
        let dt_init = num("time.dt_init")?.ok_or(ConfigError::Missing("time.dt_init"))?;
        let scheme = match scalars.get("time.scheme").map(|e| e.value.as_str()) {
            None | Some("lie") => Splitting::Lie,
            Some("strang") => Splitting::Strang,
            Some(_) => return Err(invalid("time.scheme", "expected `lie` or `strang`")),
        };
        let snapshots = match scalars.get("output.snapshots").map(|e| e.value.as_str()) {
            None | Some("true") => true,
            Some("false") => false,
            Some(_) => return Err(invalid("output.snapshots", "expected `true` or `false`")),
        };
        let lp = match scalars.get("output.lp").map(|e| e.value.as_str()) {
            Some("inf") => f64::INFINITY,
            _ => num("output.lp")?.unwrap_or(2.0),
        };
        if !(lp >= 1.0) {
            return Err(invalid("output.lp", "must be >= 1 or `inf`"));
        }
        let cfg = Self {
            dim,
            nx,
            ny,
            lx: num("grid.lx")?.unwrap_or(1.0),
            ly: num("grid.ly")?.unwrap_or(1.0),
            t_end,
            dt_init,
            dt_min: num("time.dt_min")?.unwrap_or(dt_init * 1e-6),
            dt_max: num("time.dt_max")?.unwrap_or(dt_init),
            scheme,
            steady_tol: num("time.steady_tol")?.unwrap_or(1e-10),
            safety: num("time.safety")?.unwrap_or(0.9),
            output_interval: num("output.interval")?.unwrap_or(t_end / 10.0),
            lp,
            dir: PathBuf::from(
                scalars
                    .get("output.dir")
                    .map_or("out", |e| e.value.as_str()),
            ),
            snapshots,
            init,
            boundary,
        };
        cfg.integrator()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(cfg.output_interval > 0.0) {
            return Err(invalid("output.interval", "must be positive"));
        }
        cfg.grid()?;
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        let g = if self.dim == 1 {
            Grid::line(self.nx, self.lx)
        } else {
            Grid::rect(self.nx, self.ny, self.lx, self.ly)
        };
        g.map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            dt_init: self.dt_init,
            dt_min: self.dt_min,
            dt_max: self.dt_max,
            safety: self.safety,
            scheme: self.scheme,
            t_end: self.t_end,
            steady_tol: self.steady_tol,
        }
    }

    pub fn initializer(&self, species: &str) -> Option<&Initializer> {
        self.init
            .iter()
            .find(|(n, _)| n == species)
            .map(|(_, e)| &e.value)
    }

    /// Binds the config to a network: every species name must exist, every
    /// species needs an initializer, and initial values must be nonnegative.
    pub fn setup(&self, network: &ReactionNetwork) -> Result<SimulationSetup, ConfigError> {
        for (name, entry) in self
            .init
            .iter()
            .map(|(n, e)| (n, e.line))
            .chain(self.boundary.iter().map(|(n, e)| (n, e.line)))
        {
            if network.species_index(name).is_none() {
                return Err(ConfigError::UnknownSpecies {
                    line: entry,
                    name: name.clone(),
                });
            }
        }
        let grid = self.grid()?;
        let mut values = Vec::with_capacity(grid.cell_count() * network.species_count());
        for sp in network.species() {
            let (_, entry) = self
                .init
                .iter()
                .find(|(n, _)| *n == sp.name)
                .ok_or_else(|| ConfigError::MissingInit(sp.name.clone()))?;
            let field = entry.value.sample(&grid);
            if let Some(v) = field.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                return Err(ConfigError::InvalidValue {
                    line: entry.line,
                    key: format!("init.{}", sp.name),
                    message: format!("initial value {v} is negative or not finite"),
                });
            }
            values.extend(field);
        }
        let initial = StateField::new(grid, network.species_count(), values)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let flux = BoundaryFlux::new(
            network
                .species()
                .iter()
                .map(|sp| {
                    self.boundary
                        .iter()
                        .find(|(n, _)| *n == sp.name)
                        .map_or(0.0, |(_, e)| e.value)
                })
                .collect(),
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(SimulationSetup {
            initial,
            flux,
            integrator: self.integrator(),
            output_interval: self.output_interval,
            lp: self.lp,
        })
    }
}

/// SHA-256 over the network and config texts, hex encoded.
pub fn config_hash(network_text: &str, config_text: &str) -> String {
    let mut h = Sha256::new();
    h.update(network_text.as_bytes());
    h.update([0u8]);
    h.update(config_text.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rdx_core::network::parse_network;

    const NET: &str = "species A D=1.0\nspecies B D=0.5\nA <-> B : kf=1, kb=1\n";

    const CFG: &str = "\
# comment
grid.nx = 8
grid.lx = 2.0
time.t_end = 1
time.dt_init = 1e-3
time.scheme = strang
init.A = constant 2   # trailing
init.B = random 0 1 7
boundary.A = -0.5
output.interval = 0.25
";

    #[test]
    fn parses_and_binds() {
        let cfg = SimConfig::parse(CFG).unwrap();
        assert_eq!(cfg.nx, 8);
        assert_eq!(cfg.ny, 1);
        assert_eq!(cfg.dt_max, 1e-3);
        assert_eq!(cfg.scheme, Splitting::Strang);
        assert_eq!(cfg.dir, PathBuf::from("out"));
        let net = parse_network(NET).unwrap();
        let setup = cfg.setup(&net).unwrap();
        assert_eq!(setup.initial.species(0), &[2.0; 8]);
        assert!(setup
            .initial
            .species(1)
            .iter()
            .all(|v| (0.0..1.0).contains(v)));
        assert_eq!(setup.flux.values(), &[-0.5, 0.0]);
        assert_eq!(setup.output_interval, 0.25);
    }

    #[test]
    fn random_init_is_seeded() {
        let g = Grid::line(16, 1.0).unwrap();
        let a = Initializer::Random {
            min: 0.0,
            max: 3.0,
            seed: 5,
        };
        assert_eq!(a.sample(&g), a.sample(&g));
        let b = Initializer::Random {
            min: 0.0,
            max: 3.0,
            seed: 6,
        };
        assert_ne!(a.sample(&g), b.sample(&g));
    }

    #[test]
    fn gaussian_two_d() {
        let g = Grid::rect(5, 5, 1.0, 1.0).unwrap();
        let init = parse_init(1, "init.A", "gaussian 0.5 0.5 0.1 2 1").unwrap();
        let v = init.sample(&g);
        assert!((v[g.index(2, 2)] - 3.0).abs() < 1e-12);
        assert!(v.iter().all(|x| *x >= 1.0));
    }

    #[test]
    fn unknown_species_is_reported() {
        let net = parse_network(NET).unwrap();
        let cfg = SimConfig::parse(&format!("{CFG}init.C = constant 1\n")).unwrap();
        assert_eq!(
            cfg.setup(&net),
            Err(ConfigError::UnknownSpecies {
                line: 11,
                name: "C".into()
            })
        );
    }

    #[test]
    fn missing_init_is_reported() {
        let net = parse_network("species A D=1\nspecies Z D=1\n").unwrap();
        let cfg =
            SimConfig::parse("grid.nx=4\ntime.t_end=1\ntime.dt_init=0.1\ninit.A=constant 1\n")
                .unwrap();
        assert_eq!(cfg.setup(&net), Err(ConfigError::MissingInit("Z".into())));
    }

    #[test]
    fn rejects_bad_lines() {
        let base = "grid.nx=4\ntime.t_end=1\ntime.dt_init=0.1\n";
        let cases = [
            ("grid.nx 4", "line 1"),
            ("nx = 4", "no section"),
            ("grid.depth = 3", "unknown key"),
            ("boundary.A = 0.1", "<= 0"),
            ("init.A = linear 1", "unknown initializer"),
            ("init.A = random 2 1 0", "MIN <= MAX"),
            ("time.scheme = rk4", "lie"),
        ];
        for (line, needle) in cases {
            let err = SimConfig::parse(&format!("{line}\n{base}")).unwrap_err();
            assert!(err.to_string().contains(needle), "{line}: {err}");
        }
        assert_eq!(
            SimConfig::parse("grid.nx=4\ntime.t_end=1\n"),
            Err(ConfigError::Missing("time.dt_init"))
        );
        assert!(matches!(
            SimConfig::parse(&format!("{base}grid.nx=5\n")),
            Err(ConfigError::DuplicateKey { line: 4, .. })
        ));
        assert!(SimConfig::parse(&format!("{base}time.dt_min=1\n")).is_err());
        assert!(
            SimConfig::parse("grid.dim=2\ngrid.nx=4\ntime.t_end=1\ntime.dt_init=0.1\n").is_err()
        );
    }

    #[test]
    fn hash_depends_on_both_inputs() {
        let h = config_hash("a", "b");
        assert_eq!(h.len(), 64);
        assert_eq!(h, config_hash("a", "b"));
        assert_ne!(h, config_hash("a", "c"));
        assert_ne!(config_hash("ab", ""), config_hash("a", "b"));
    }
}
