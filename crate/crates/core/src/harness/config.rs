//! Line-oriented `key = value` experiment configuration.
//!
//! Keys are dotted paths (`problem.family`, `optimizer.2.local.method`). `#`
//! starts a comment. Every key must be consumed by the schema; a leftover key
//! is reported as an unknown field. The schema is documented in
//! `docs/config.md`.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::chaining::{ChainConfig, PartialChainConfig, Phase2Stepsize, Selection, SelectionNoise};
use crate::error::{Error, Result};
use crate::federation::OracleConfig;
use crate::objectives::{ShuffleSpec, SyntheticSpec};
use crate::optimizers::{AsgSchedule, Averaging, Method, OptimizerSpec, SagaOption, Stepsize};
use crate::vector::Vector;

/// Raw entries plus a record of which keys the schema has read.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
    used: RefCell<BTreeSet<String>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line_no}: expected `key = value`")))?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Config(format!("line {line_no}: malformed key `{key}`")));
            }
            if entries
                .insert(key.to_string(), (value.trim().to_string(), line_no))
                .is_some()
            {
                return Err(Error::Config(format!("line {line_no}: duplicate key `{key}`")));
            }
        }
        Ok(RawConfig {
            entries,
            used: RefCell::default(),
        })
    }

    /// Overrides or adds an entry, as the command-line flags do.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), (value.into(), 0));
    }

    /// SHA-256 over the sorted `key = value` lines.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (k, (v, _)) in &self.entries {
            h.update(k.as_bytes());
            h.update(b" = ");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    fn get(&self, key: &str) -> Option<&str> {
        let v = self.entries.get(key).map(|(v, _)| v.as_str());
        if v.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        v
    }

    fn has_prefix(&self, prefix: &str) -> bool {
        let dotted = format!("{prefix}.");
        self.entries.keys().any(|k| k.starts_with(&dotted))
    }

    fn parse_as<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Config(format!("`{key}`: expected {what}, got `{v}`"))),
        }
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.parse_as(key, "a number")
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.parse_as(key, "a nonnegative integer")
    }

    fn u64(&self, key: &str) -> Result<Option<u64>> {
        self.parse_as(key, "a nonnegative integer")
    }

    fn bool(&self, key: &str) -> Result<Option<bool>> {
        self.parse_as(key, "true or false")
    }

    fn required<T>(&self, key: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    /// Fails on the first key the schema never read.
    fn check_all_used(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.entries.keys().find(|k| !used.contains(*k)) {
            Some(k) => Err(Error::UnknownField(k.clone())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemConfig {
    Toy,
    Synthetic(SyntheticSpec),
    Shuffle(ShuffleSpec),
    Pl,
    Hard {
        l2: f64,
        zeta_hat: f64,
        /// Defaults to the convex-case choice for `rounds`.
        mu: Option<f64>,
        rounds: usize,
        /// Defaults to the smallest admissible dimension.
        dim: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitConfig {
    Zero,
    /// Random direction at a prescribed initial gap.
    Gap {
        gap: f64,
        seed: u64,
    },
    Point(Vector),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunKind {
    Single(OptimizerSpec),
    Chain(ChainConfig),
    Partial(PartialChainConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub label: String,
    pub kind: RunKind,
}

impl RunSpec {
    pub fn method_name(&self) -> String {
        match &self.kind {
            RunKind::Single(s) => optimizer_name(s),
            RunKind::Chain(c) => format!("fedchain({}->{})", optimizer_name(&c.local), optimizer_name(&c.global)),
            RunKind::Partial(_) => "partial-fedavg-sgd".into(),
        }
    }

    pub fn total_rounds(&self) -> usize {
        match &self.kind {
            RunKind::Single(s) => s.rounds,
            RunKind::Chain(c) => c.total_rounds(),
            RunKind::Partial(p) => p.rounds,
        }
    }

    /// File-name friendly form of [`RunSpec::method_name`].
    pub fn slug(&self) -> String {
        let slug = |s: &OptimizerSpec| optimizer_name(s).replace('-', "_");
        match &self.kind {
            RunKind::Single(s) => slug(s),
            RunKind::Chain(c) => format!("fedchain_{}_{}", slug(&c.local), slug(&c.global)),
            RunKind::Partial(_) => "partial".into(),
        }
    }
}

fn optimizer_name(spec: &OptimizerSpec) -> String {
    if spec.multistage {
        format!("m-{}", spec.method.name())
    } else {
        spec.method.name().to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub repeat: usize,
    pub problem: ProblemConfig,
    pub init: InitConfig,
    pub oracle: OracleConfig,
    pub runs: Vec<RunSpec>,
    pub out_dir: Option<PathBuf>,
    /// Rounds `[start, end)` for slope fitting; defaults to the positive prefix.
    pub slope_window: Option<(usize, usize)>,
    pub digest: String,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let name = raw.get("name").unwrap_or("experiment").to_string();
        let seed = raw.u64("seed")?.unwrap_or(0);
        let repeat = raw.usize("repeat")?.unwrap_or(1);
        if repeat == 0 {
            return Err(Error::Config("`repeat` must be at least 1".into()));
        }
        let default_rounds = raw.usize("rounds")?;
        let problem = parse_problem(raw)?;
        let n_hint = client_count(&problem);
        let init = parse_init(raw)?;
        let oracle = OracleConfig::new(
            raw.f64("oracle.sigma")?.unwrap_or(0.0),
            raw.f64("oracle.sigma_f")?.unwrap_or(0.0),
        )
        .map_err(|e| Error::Config(e.to_string()))?;

        let mut indices: BTreeSet<usize> = BTreeSet::new();
        for key in raw.entries.keys() {
            if let Some(rest) = key.strip_prefix("optimizer.") {
                let idx = rest.split('.').next().unwrap_or("");
                let idx: usize = idx.parse().map_err(|_| Error::UnknownField(key.clone()))?;
                indices.insert(idx);
            }
        }
        if indices.is_empty() {
            return Err(Error::Config("no optimizer blocks (`optimizer.1.method = ...`)".into()));
        }
        let mut runs = Vec::new();
        for idx in indices {
            let prefix = format!("optimizer.{idx}");
            let kind = parse_run(raw, &prefix, default_rounds, n_hint)?;
            let mut spec = RunSpec {
                label: String::new(),
                kind,
            };
            spec.label = match raw.get(&format!("{prefix}.label")) {
                Some(l) => sanitize_label(l)?,
                None => format!("{idx}-{}", spec.slug()),
            };
            runs.push(spec);
        }
        let mut labels = BTreeSet::new();
        for r in &runs {
            if r.total_rounds() == 0 {
                return Err(Error::Config(format!(
                    "run `{}` has no rounds; R must be at least 1",
                    r.label
                )));
            }
            if !labels.insert(r.label.clone()) {
                return Err(Error::Config(format!("duplicate run label `{}`", r.label)));
            }
        }
        let out_dir = raw.get("output.dir").map(PathBuf::from);
        let slope_window = match raw.get("output.slope_window") {
            None => None,
            Some(v) => {
                let (a, b) = v
                    .split_once("..")
                    .ok_or_else(|| Error::Config(format!("`output.slope_window`: expected `start..end`, got `{v}`")))?;
                let parse = |s: &str| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("`output.slope_window`: bad bound `{s}`")))
                };
                Some((parse(a)?, parse(b)?))
            }
        };
        raw.check_all_used()?;
        Ok(ExperimentConfig {
            name,
            seed,
            repeat,
            problem,
            init,
            oracle,
            runs,
            out_dir,
            slope_window,
            digest: raw.digest(),
        })
    }
}

fn sanitize_label(l: &str) -> Result<String> {
    if l.is_empty() || !l.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
        return Err(Error::Config(format!(
            "label `{l}` must be nonempty ASCII letters, digits, `-`, `_` or `.`"
        )));
    }
    Ok(l.to_string())
}

fn client_count(problem: &ProblemConfig) -> Option<usize> {
    match problem {
        ProblemConfig::Toy | ProblemConfig::Hard { .. } => Some(2),
        ProblemConfig::Pl => Some(1),
        ProblemConfig::Synthetic(s) => Some(s.clients),
        ProblemConfig::Shuffle(s) => Some(s.clients),
    }
}

fn parse_problem(raw: &RawConfig) -> Result<ProblemConfig> {
    let family = raw.required("problem.family", raw.get("problem.family"))?;
    let seed = raw.u64("problem.seed")?.unwrap_or(0);
    Ok(match family {
        "toy" => ProblemConfig::Toy,
        "pl" => ProblemConfig::Pl,
        "synthetic" => {
            let clients = raw.required("problem.clients", raw.usize("problem.clients")?)?;
            let dim = raw.required("problem.dim", raw.usize("problem.dim")?)?;
            let condition = raw.required("problem.condition", raw.f64("problem.condition")?)?;
            let zeta = raw.required("problem.zeta", raw.f64("problem.zeta")?)?;
            let spread = raw.f64("problem.spread")?.unwrap_or(0.0);
            ProblemConfig::Synthetic(SyntheticSpec::new(clients, dim, condition, zeta, seed).with_spread(spread))
        }
        "shuffle" => {
            let clients = raw.usize("problem.clients")?.unwrap_or(5);
            let pct = raw.required("problem.homogeneity", raw.f64("problem.homogeneity")?)?;
            let per_class = raw.usize("problem.samples_per_class")?.unwrap_or(50);
            let mut spec = ShuffleSpec::new(clients, pct, per_class, seed);
            if let Some(mu) = raw.f64("problem.mu")? {
                spec.mu = mu;
            }
            if let Some(scale) = raw.f64("problem.scale")? {
                spec.scale = scale;
            }
            ProblemConfig::Shuffle(spec)
        }
        "hard" => ProblemConfig::Hard {
            l2: raw.f64("problem.l2")?.unwrap_or(1.0),
            zeta_hat: raw.f64("problem.zeta_hat")?.unwrap_or(1.0),
            mu: raw.f64("problem.mu")?,
            rounds: raw.required("problem.rounds", raw.usize("problem.rounds")?)?,
            dim: raw.usize("problem.dim")?,
        },
        other => {
            return Err(Error::Config(format!(
                "unknown problem family `{other}` (toy, synthetic, shuffle, pl, hard)"
            )))
        }
    })
}

fn parse_init(raw: &RawConfig) -> Result<InitConfig> {
    let gap = raw.f64("init.gap")?;
    let point = raw.get("init.point");
    let seed = raw.u64("init.seed")?;
    match (gap, point) {
        (Some(_), Some(_)) => Err(Error::Config("set at most one of `init.gap` and `init.point`".into())),
        (Some(gap), None) => Ok(InitConfig::Gap {
            gap,
            seed: seed.unwrap_or(0),
        }),
        (None, Some(p)) => {
            let coords = p
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("`init.point`: bad coordinate `{s}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(InitConfig::Point(Vector::new(coords)))
        }
        (None, None) => Ok(InitConfig::Zero),
    }
}

fn parse_eta(raw: &RawConfig, key: &str) -> Result<Stepsize> {
    match raw.get(key) {
        None | Some("preset") => Ok(Stepsize::Preset),
        Some(v) => v
            .parse::<f64>()
            .map(Stepsize::Fixed)
            .map_err(|_| Error::Config(format!("`{key}`: expected a number or `preset`, got `{v}`"))),
    }
}

fn parse_optimizer(
    raw: &RawConfig,
    prefix: &str,
    method: &str,
    rounds: Option<usize>,
    n_hint: Option<usize>,
) -> Result<OptimizerSpec> {
    let key = |k: &str| format!("{prefix}.{k}");
    let method = match method {
        "sgd" => Method::Sgd {
            averaging: match raw.get(&key("averaging")) {
                None | Some("last") => Averaging::Last,
                Some("weighted") => Averaging::Weighted,
                Some(v) => {
                    return Err(Error::Config(format!(
                        "`{}`: expected last or weighted, got `{v}`",
                        key("averaging")
                    )))
                }
            },
        },
        "fedavg" => Method::FedAvg,
        "asg" => Method::Asg {
            schedule: match raw.f64(&key("phi"))? {
                Some(phi) => AsgSchedule::Fixed { phi },
                None => AsgSchedule::Multistage {
                    delta: raw.f64(&key("delta"))?,
                    zeta: raw.f64(&key("zeta"))?,
                },
            },
        },
        "saga" => Method::Saga {
            option: match raw.usize(&key("saga_option"))? {
                None | Some(1) => SagaOption::One,
                Some(2) => SagaOption::Two,
                Some(v) => {
                    return Err(Error::Config(format!(
                        "`{}`: expected 1 or 2, got {v}",
                        key("saga_option")
                    )))
                }
            },
        },
        "ssnm" => Method::Ssnm {
            tau: raw.f64(&key("tau"))?,
        },
        other => {
            return Err(Error::Config(format!(
                "`{}`: unknown method `{other}` (sgd, asg, fedavg, saga, ssnm, fedchain, partial)",
                key("method")
            )))
        }
    };
    let clients = match raw.usize(&key("clients"))? {
        Some(s) => s,
        None => n_hint.ok_or_else(|| Error::Config(format!("missing required key `{}`", key("clients"))))?,
    };
    let rounds = raw
        .usize(&key("rounds"))?
        .or(rounds)
        .ok_or_else(|| Error::Config(format!("missing `{}` and no top-level `rounds`", key("rounds"))))?;
    let mut spec = OptimizerSpec::new(
        method,
        parse_eta(raw, &key("eta"))?,
        clients,
        raw.usize(&key("local_steps"))?.unwrap_or(1),
        rounds,
    );
    spec.multistage = raw.bool(&key("multistage"))?.unwrap_or(false);
    Ok(spec)
}

fn parse_run(raw: &RawConfig, prefix: &str, rounds: Option<usize>, n_hint: Option<usize>) -> Result<RunKind> {
    let key = |k: &str| format!("{prefix}.{k}");
    let method = raw.required(&key("method"), raw.get(&key("method")))?;
    match method {
        "fedchain" => {
            let total = raw.usize(&key("rounds"))?.or(rounds);
            let local_prefix = key("local");
            let global_prefix = key("global");
            if !raw.has_prefix(&local_prefix) || !raw.has_prefix(&global_prefix) {
                return Err(Error::Config(format!(
                    "`{prefix}` needs `local.*` and `global.*` blocks"
                )));
            }
            let local_rounds = raw.usize(&format!("{local_prefix}.rounds"))?;
            let global_rounds = raw.usize(&format!("{global_prefix}.rounds"))?;
            let (lr, gr) = match (local_rounds, global_rounds, total) {
                (Some(l), Some(g), _) => (l, g),
                (Some(l), None, Some(t)) => (
                    l,
                    t.checked_sub(l)
                        .ok_or_else(|| Error::Config("local rounds exceed the total".into()))?,
                ),
                (None, Some(g), Some(t)) => (
                    t.checked_sub(g)
                        .ok_or_else(|| Error::Config("global rounds exceed the total".into()))?,
                    g,
                ),
                (None, None, Some(t)) => (t / 2, t - t / 2),
                _ => return Err(Error::Config(format!("`{prefix}` needs `rounds` or per-phase rounds"))),
            };
            let local_method = raw.required(
                &format!("{local_prefix}.method"),
                raw.get(&format!("{local_prefix}.method")),
            )?;
            let global_method = raw.required(
                &format!("{global_prefix}.method"),
                raw.get(&format!("{global_prefix}.method")),
            )?;
            let local = parse_optimizer(raw, &local_prefix, local_method, Some(lr), n_hint)?;
            let global = parse_optimizer(raw, &global_prefix, global_method, Some(gr), n_hint)?;
            let mut chain = ChainConfig::new(local, global);
            let sel = key("selection");
            let clients = raw.usize(&format!("{sel}.clients"))?;
            let samples = raw.usize(&format!("{sel}.samples"))?;
            let noise = match raw.get(&format!("{sel}.noise")) {
                None | Some("shared") => SelectionNoise::Shared,
                Some("independent") => SelectionNoise::Independent,
                Some(v) => {
                    return Err(Error::Config(format!(
                        "`{sel}.noise`: expected shared or independent, got `{v}`"
                    )))
                }
            };
            if clients.is_some() || samples.is_some() || noise != SelectionNoise::Shared {
                let default = chain.selection();
                chain.selection = Some(Selection {
                    clients: clients.unwrap_or(default.clients),
                    samples: samples.unwrap_or(default.samples),
                    noise,
                });
            }
            Ok(RunKind::Chain(chain))
        }
        "partial" => {
            let eta1 = raw.f64(&key("eta1"))?;
            let eta2 = match raw.get(&key("eta2")) {
                Some(v) if v.contains(',') => Phase2Stepsize::Schedule(
                    v.split(',')
                        .map(|s| {
                            s.trim()
                                .parse::<f64>()
                                .map_err(|_| Error::Config(format!("`{}`: bad stepsize `{s}`", key("eta2"))))
                        })
                        .collect::<Result<_>>()?,
                ),
                Some(v) => Phase2Stepsize::Constant(
                    v.parse()
                        .map_err(|_| Error::Config(format!("`{}`: expected a number, got `{v}`", key("eta2"))))?,
                ),
                None => return Err(Error::Config(format!("missing required key `{}`", key("eta2")))),
            };
            Ok(RunKind::Partial(PartialChainConfig {
                // NaN marks "take μ/(8β²)" and is resolved against the problem.
                eta1: eta1.unwrap_or(f64::NAN),
                mu: raw.f64(&key("mu"))?,
                local_steps: raw.required(&key("local_steps"), raw.usize(&key("local_steps"))?)?,
                eta2,
                clients: match raw.usize(&key("clients"))? {
                    Some(s) => s,
                    None => {
                        n_hint.ok_or_else(|| Error::Config(format!("missing required key `{}`", key("clients"))))?
                    }
                },
                rounds: raw
                    .usize(&key("rounds"))?
                    .or(rounds)
                    .ok_or_else(|| Error::Config(format!("missing `{}` and no top-level `rounds`", key("rounds"))))?,
            }))
        }
        other => Ok(RunKind::Single(parse_optimizer(raw, prefix, other, rounds, n_hint)?)),
    }
}
