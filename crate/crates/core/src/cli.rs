//! Batch runner behind the `daugavet` binary.
//!
//! Every command produces a [`Report`]: a list of named checks with exact
//! values, rendered as JSON or CSV. Exit status is 0 when every check
//! passes, 1 on a mathematical failure and 2 on bad input or configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::absnorm::{
    certified_strict_midpoint, circle_point, is_v_point, pt, supporting_slice_construction, transfer_predicate,
    v_point_witness, verify_supporting_slice, AbsNorm2, NormJson, PlanePoint, Polyhedral, SpherePoint,
};
use crate::dyadic::{self, Node, TreeSpanElement};
use crate::error::{Error, Result};
use crate::freespace::{
    distance_to_denting_report, free_norm, free_norm_certified, mcshane_extend, molecule, FreeElement,
    LipschitzFunction, Slice,
};
use crate::metric::{
    example_space_a, example_space_b, random_graph_metric, validate_metric, ExampleSpace, FiniteMetricSpace, SpaceJson,
    MAX_LEVEL,
};
use crate::rational::{fmt_q, pow2, q, qi, ExactValue, Q};
use crate::rtree::{
    combination_element, daugavet_witness_h, g_mu_build, g_mu_property_check, l_projection_split,
    projection_property_violation, random_element, random_normed_combination, random_tree, recombine,
    retraction_identities_check, HWitness, PropertyOutcome, RTreeSubset, TreePoint,
};

#[derive(Debug, Parser)]
#[command(
    name = "daugavet",
    version,
    about = "Exact certificates for Daugavet-, Delta- and relative Daugavet-points"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Truncation level of the example spaces.
    #[arg(long, global = true)]
    pub level: Option<u32>,
    /// Maximal node depth for the dyadic suite.
    #[arg(long, global = true)]
    pub depth: Option<u32>,
    /// Number of random instances per sampled check.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Metric space JSON file checked by the metric and freespace suites.
    #[arg(long, global = true)]
    pub space: Option<PathBuf>,
    /// Builtin norm name (`l1`, `l2`, `linf`, `lp:<p>`, `figure-alpha`) or a norm JSON file.
    #[arg(long, global = true)]
    pub norm: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Relative Daugavet-point that is not a Daugavet-point.
    ExampleA,
    /// Delta-point that is not a relative Daugavet-point.
    ExampleB,
    /// Run a property suite.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Metric,
    Freespace,
    Rtree,
    Absnorm,
    Dyadic,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub level: Option<u32>,
    pub depth: Option<u32>,
    pub samples: Option<usize>,
    pub seed: u64,
    pub format: Format,
    pub space: Option<String>,
    pub norm: Option<String>,
}

/// Upper bound on `--samples`.
pub const MAX_SAMPLES: usize = 100_000;
/// Upper bound on `--depth`.
pub const MAX_DEPTH: u32 = 8;

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let command = match &cli.command {
            Command::ExampleA => "example-a".to_string(),
            Command::ExampleB => "example-b".to_string(),
            Command::Verify { suite } => format!("verify {}", suite_name(*suite)),
        };
        let min_level = if matches!(cli.command, Command::ExampleB) { 2 } else { 1 };
        if let Some(l) = cli.level {
            if l < min_level || l > MAX_LEVEL {
                return Err(Error::Config(format!("--level must be in {min_level}..={MAX_LEVEL}")));
            }
        }
        if let Some(d) = cli.depth {
            if !(1..=MAX_DEPTH).contains(&d) {
                return Err(Error::Config(format!("--depth must be in 1..={MAX_DEPTH}")));
            }
        }
        if let Some(s) = cli.samples {
            if !(1..=MAX_SAMPLES).contains(&s) {
                return Err(Error::Config(format!("--samples must be in 1..={MAX_SAMPLES}")));
            }
        }
        Ok(RunConfig {
            command,
            level: cli.level,
            depth: cli.depth,
            samples: cli.samples,
            seed: cli.seed,
            format: cli.format,
            space: cli.space.as_ref().map(|p| p.display().to_string()),
            norm: cli.norm.clone(),
        })
    }

    fn samples_or(&self, default: usize) -> usize {
        self.samples.unwrap_or(default)
    }
}

fn suite_name(s: Suite) -> &'static str {
    match s {
        Suite::Metric => "metric",
        Suite::Freespace => "freespace",
        Suite::Rtree => "rtree",
        Suite::Absnorm => "absnorm",
        Suite::Dyadic => "dyadic",
        Suite::All => "all",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub passed: bool,
    pub count: usize,
    pub detail: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl Report {
    fn new(config: RunConfig, checks: Vec<Check>) -> Self {
        Report {
            command: config.command.clone(),
            seed: config.seed,
            passed: checks.iter().all(|c| c.passed),
            config,
            checks,
        }
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => serde_json::to_string_pretty(self)
                .map(|s| s + "\n")
                .map_err(|e| Error::Config(e.to_string())),
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                let io = |e: csv::Error| Error::Config(e.to_string());
                w.write_record(["command", "seed", "suite", "check", "passed", "count", "detail"])
                    .map_err(io)?;
                for c in &self.checks {
                    w.write_record([
                        self.command.as_str(),
                        &self.seed.to_string(),
                        &c.suite,
                        &c.name,
                        &c.passed.to_string(),
                        &c.count.to_string(),
                        &c.detail.to_string(),
                    ])
                    .map_err(io)?;
                }
                let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
                String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
            }
        }
    }
}

fn ev(x: &Q) -> Value {
    serde_json::to_value(ExactValue::from(x)).expect("plain strings")
}

/// Runs a check body; errors become a failed check carrying the message.
fn check(suite: &str, name: &str, body: impl FnOnce() -> Result<(bool, usize, Value)>) -> Check {
    let (passed, count, detail) = body().unwrap_or_else(|e| (false, 0, json!({ "error": e.to_string() })));
    Check {
        suite: suite.to_string(),
        name: name.to_string(),
        passed,
        count,
        detail,
    }
}

/// Parses arguments, runs the command and writes the report. Returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let text = match report.render(cli.format) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return 2;
            }
        }
        None => print!("{text}"),
    }
    if report.passed {
        0
    } else {
        1
    }
}

/// Inputs read from files, parsed before any suite runs.
struct Inputs {
    space: Option<SpaceJson>,
    norm: Option<AbsNorm2>,
}

fn read_inputs(cli: &Cli) -> Result<Inputs> {
    let read =
        |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())));
    let space = match &cli.space {
        Some(p) => {
            Some(serde_json::from_str::<SpaceJson>(&read(p)?).map_err(|e| Error::Parse(format!("space file: {e}")))?)
        }
        None => None,
    };
    let norm = match &cli.norm {
        Some(n) if Path::new(n).is_file() => {
            let j: NormJson =
                serde_json::from_str(&read(Path::new(n))?).map_err(|e| Error::Parse(format!("norm file: {e}")))?;
            Some(j.build()?)
        }
        Some(n) => Some(AbsNorm2::builtin(n)?),
        None => None,
    };
    Ok(Inputs { space, norm })
}

pub fn run(cli: &Cli) -> Result<Report> {
    let config = RunConfig::from_cli(cli)?;
    let inputs = read_inputs(cli)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let checks = match &cli.command {
        Command::ExampleA => example_a_checks(config.level.unwrap_or(3)),
        Command::ExampleB => example_b_checks(config.level.unwrap_or(4), config.samples_or(20), &mut rng),
        Command::Verify { suite } => {
            let suites: Vec<Suite> = match suite {
                Suite::All => vec![
                    Suite::Metric,
                    Suite::Freespace,
                    Suite::Rtree,
                    Suite::Absnorm,
                    Suite::Dyadic,
                ],
                s => vec![*s],
            };
            let mut out = Vec::new();
            for s in suites {
                // each suite draws from its own stream so results do not depend on which suites ran before
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(s as u64);
                out.extend(match s {
                    Suite::Metric => metric_suite(&config, &inputs, &mut rng),
                    Suite::Freespace => freespace_suite(&config, &inputs, &mut rng),
                    Suite::Rtree => rtree_suite(&config, &mut rng),
                    Suite::Absnorm => absnorm_suite(&config, &inputs, &mut rng),
                    Suite::Dyadic => dyadic_suite(&config, &mut rng),
                    Suite::All => unreachable!(),
                });
            }
            out
        }
    };
    Ok(Report::new(config, checks))
}

fn metric_suite(cfg: &RunConfig, inputs: &Inputs, rng: &mut ChaCha8Rng) -> Vec<Check> {
    const S: &str = "metric";
    let level = cfg.level.unwrap_or(3);
    let mut checks = vec![
        check(S, "random_spaces_validate", || {
            let n = cfg.samples_or(100);
            let mut ok = 0;
            for _ in 0..n {
                let s = random_graph_metric(rng, 8);
                let table = s.to_json().to_table()?;
                if s.validate().is_pass() && validate_metric(&table)?.is_pass() {
                    ok += 1;
                }
            }
            Ok((ok == n, n, json!({ "valid": ok })))
        }),
        check(S, "example_spaces_validate", || {
            let mut ok = true;
            let mut sizes = BTreeMap::new();
            for l in 1..=level {
                for ex in [example_space_a(l)?, example_space_b(l)?] {
                    ok &= ex.space.validate().is_pass();
                    sizes.insert(format!("{:?}{l}", ex.kind), ex.space.len());
                }
            }
            Ok((ok, 2 * level as usize, json!({ "points": sizes })))
        }),
        check(S, "corrupted_table_rejected", || {
            let ex = example_space_a(1)?;
            let mut j = ex.space.to_json();
            j.dist[ex.x][ex.y] = Some("3/1".into());
            j.dist[ex.y][ex.x] = Some("3/1".into());
            let report = validate_metric(&j.to_table()?)?;
            Ok((
                !report.is_pass(),
                1,
                serde_json::to_value(&report).expect("serializable"),
            ))
        }),
        check(S, "example_a_uv_segment", || {
            let ex = example_space_a(level)?;
            let (u, v) = (ex.rows[1][0], ex.rows[1][1]);
            let seg = ex.space.segment(u, v)?;
            Ok((
                seg.len() == 2,
                1,
                json!({ "segment": seg.iter().map(|&p| ex.space.name(p)).collect::<Vec<_>>() }),
            ))
        }),
    ];
    if let Some(space) = &inputs.space {
        checks.push(check(S, "input_space_validates", || {
            let report = validate_metric(&space.to_table()?)?;
            Ok((
                report.is_pass(),
                1,
                serde_json::to_value(&report).expect("serializable"),
            ))
        }));
    }
    checks
}

fn space_from_json(j: &SpaceJson) -> Result<FiniteMetricSpace> {
    let t = j.to_table()?;
    let dist = t
        .dist
        .into_iter()
        .map(|r| r.into_iter().collect::<Option<Vec<_>>>())
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::MalformedTable("missing entries".into()))?;
    FiniteMetricSpace::new(t.points, &t.base, dist)
}

/// Duality, atom and molecule norms on one space. Returns failures.
fn duality_on(space: &FiniteMetricSpace, rng: &mut ChaCha8Rng, elements: usize) -> usize {
    let mut failures = 0;
    for _ in 0..elements {
        let mu = random_element(rng, space, 6);
        let cert = free_norm_certified(&mu);
        if !(cert.verify(&mu) && cert.dual.lip_norm() <= Q::one() && cert.dual.eval(&mu) == cert.norm) {
            failures += 1;
        }
    }
    for p in 0..space.len() {
        for r in 0..space.len() {
            if p == r {
                continue;
            }
            let diff = FreeElement::delta(space, p)
                .and_then(|a| Ok(a.sub(&FreeElement::delta(space, r)?)))
                .map(|d| free_norm(&d));
            let m = molecule(space, p, r).map(|m| free_norm(&m));
            if diff.ok().as_ref() != Some(space.d(p, r)) || m.ok() != Some(Q::one()) {
                failures += 1;
            }
        }
    }
    failures
}

fn freespace_suite(cfg: &RunConfig, inputs: &Inputs, rng: &mut ChaCha8Rng) -> Vec<Check> {
    const S: &str = "freespace";
    let mut checks = vec![check(S, "transport_duality", || {
        let n = cfg.samples_or(200);
        let mut failures = 0;
        for _ in 0..n {
            let space = random_graph_metric(rng, 8);
            failures += duality_on(&space, rng, 1);
        }
        Ok((failures == 0, n, json!({ "failures": failures })))
    })];
    if let Some(j) = &inputs.space {
        checks.push(check(S, "input_space_duality", || {
            let space = space_from_json(j)?;
            let failures = duality_on(&space, rng, cfg.samples_or(20));
            Ok((failures == 0, space.len(), json!({ "failures": failures })))
        }));
    }
    checks.extend(example_a_checks(cfg.level.unwrap_or(3)));
    checks.extend(example_b_checks(cfg.level.unwrap_or(4).max(2), 20, rng));
    checks
}

/// McShane functional exposing `m_xy` in the first example: data
/// `x -> 0, y -> -1, u, v -> -1/2`.
pub fn example_a_functional(ex: &ExampleSpace) -> Result<LipschitzFunction<'_>> {
    let (u, v) = (ex.rows[1][0], ex.rows[1][1]);
    let data = BTreeMap::from([(ex.x, qi(0)), (ex.y, qi(-1)), (u, q(-1, 2)), (v, q(-1, 2))]);
    mcshane_extend(&ex.space, &data)
}

pub fn example_a_checks(level: u32) -> Vec<Check> {
    const S: &str = "example_a";
    let built = example_space_a(level);
    let ex = match built {
        Ok(ex) => ex,
        Err(e) => return vec![check(S, "space", || Err(e))],
    };
    let (u, v) = (ex.rows[1][0], ex.rows[1][1]);
    vec![
        check(S, "functional", || {
            let f = example_a_functional(&ex)?;
            let mxy = molecule(&ex.space, ex.x, ex.y)?;
            let muv = molecule(&ex.space, u, v)?;
            let slice = Slice::new(f.clone(), qi(1))?;
            let lip = f.lip_norm();
            let (fxy, fuv) = (f.eval(&mxy), f.eval(&muv));
            let excluded = !slice.contains(&muv);
            Ok((
                lip.is_one() && fxy.is_one() && fuv.is_zero() && excluded,
                1,
                json!({ "lip_norm": ev(&lip), "f_m_xy": ev(&fxy), "f_m_uv": ev(&fuv), "m_uv_in_slice": !excluded }),
            ))
        }),
        check(S, "m_uv_distance", || {
            let d = free_norm(&molecule(&ex.space, ex.x, ex.y)?.sub(&molecule(&ex.space, u, v)?));
            Ok((d < qi(2), 1, json!({ "distance": ev(&d) })))
        }),
        check(S, "denting_distances", || {
            let f = example_a_functional(&ex)?;
            let slice = Slice::new(f, qi(1))?;
            let mxy = molecule(&ex.space, ex.x, ex.y)?;
            let report = distance_to_denting_report(&ex, &mxy, &slice)?;
            let (un, vn) = (ex.space.name(u), ex.space.name(v));
            let off: Vec<(String, String)> = report
                .entries
                .iter()
                .filter(|e| !(e.p == un && e.q == vn) && e.exact_distance != qi(2))
                .map(|e| (e.p.clone(), e.q.clone()))
                .collect();
            Ok((
                report.all_in_slice_at_two && off.is_empty(),
                report.entries.len(),
                json!({ "report": report, "other_pairs_not_at_two": off }),
            ))
        }),
    ]
}

/// Random 1-Lipschitz `f` with `f(m_xy) = 1` on an example space: values
/// at a few random points chosen inside their feasible intervals, then
/// McShane-extended.
pub fn sample_supporting_functional<'s>(rng: &mut impl Rng, ex: &'s ExampleSpace) -> Result<LipschitzFunction<'s>> {
    let d = |a, b| ex.space.d(a, b);
    let mut data = BTreeMap::from([(ex.x, qi(0)), (ex.y, qi(-1))]);
    let mut others: Vec<usize> = (0..ex.space.len()).filter(|&p| p != ex.x && p != ex.y).collect();
    others.shuffle(rng);
    let k = rng.gen_range(0..=6.min(others.len()));
    for &p in &others[..k] {
        let lo = data.iter().map(|(&a, fa)| fa - d(p, a)).max().expect("nonempty");
        let hi = data.iter().map(|(&a, fa)| fa + d(p, a)).min().expect("nonempty");
        let val = &lo + (&hi - &lo) * q(rng.gen_range(0..=8), 8);
        data.insert(p, val);
    }
    mcshane_extend(&ex.space, &data)
}

pub fn example_b_checks(level: u32, slices: usize, rng: &mut impl Rng) -> Vec<Check> {
    const S: &str = "example_b";
    let ex = match example_space_b(level) {
        Ok(ex) => ex,
        Err(e) => return vec![check(S, "space", || Err(e))],
    };
    let certified: Vec<(u32, usize, usize)> = ex
        .adjacent_pairs()
        .into_iter()
        .filter(|&(n, a, b)| {
            n >= 2 && crate::freespace::denting_molecule_certificate(&ex, a, b).is_ok_and(|c| c.denting)
        })
        .collect();
    vec![
        check(S, "adjacent_pairs_below_two", || {
            let mxy = molecule(&ex.space, ex.x, ex.y)?;
            let mut rows: BTreeMap<u32, Vec<Value>> = BTreeMap::new();
            let mut ok = !certified.is_empty();
            for &(n, a, b) in &certified {
                let dist = free_norm(&mxy.sub(&molecule(&ex.space, a, b)?));
                ok &= dist < qi(2);
                rows.entry(n).or_default().push(json!({
                    "u": ex.space.name(a), "v": ex.space.name(b), "distance": fmt_q(&dist)
                }));
            }
            Ok((ok, certified.len(), json!({ "rows": rows })))
        }),
        check(S, "supporting_slices", || {
            let mxy = molecule(&ex.space, ex.x, ex.y)?;
            let mut hits = 0;
            let mut log = Vec::new();
            for _ in 0..slices {
                let f = sample_supporting_functional(rng, &ex)?;
                debug_assert!(f.lip_norm().is_one() && f.eval(&mxy).is_one());
                let alpha = q(rng.gen_range(2..=8), 8);
                let slice = Slice::new(f, alpha.clone())?;
                let mut found = None;
                for &(_, a, b) in &certified {
                    for (s, t) in [(a, b), (b, a)] {
                        let m = molecule(&ex.space, s, t)?;
                        if found.is_none() && slice.contains(&m) {
                            let dist = free_norm(&mxy.sub(&m));
                            if dist < qi(2) {
                                found = Some((s, t, dist));
                            }
                        }
                    }
                }
                if let Some((s, t, dist)) = &found {
                    hits += 1;
                    log.push(json!({ "alpha": fmt_q(&alpha), "u": ex.space.name(*s), "v": ex.space.name(*t), "distance": fmt_q(dist) }));
                } else {
                    log.push(json!({ "alpha": fmt_q(&alpha), "u": null }));
                }
            }
            Ok((hits == slices, slices, json!({ "slices": log })))
        }),
    ]
}

fn rtree_suite(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Vec<Check> {
    const S: &str = "rtree";
    let n = cfg.samples_or(200);
    let mut decomposition = 0;
    let mut additivity = 0;
    let mut g_ok = 0;
    let mut witnesses = 0;
    let mut vacuous = 0;
    let mut recombined = 0;
    let (mut h_witnessed, mut h_obstructed, mut h_easy, mut h_bad) = (0, 0, 0, 0);
    let mut errors = Vec::new();
    let eps = q(1, 8);
    for k in 0..n {
        let size = rng.gen_range(3..=10);
        let tree = random_tree(rng, size, 4);
        let space = tree.space();
        let mut body = || -> Result<()> {
            let x = rng.gen_range(0..size);
            let y = (x + rng.gen_range(1..size)) % size;
            let e = rng.gen_range(0..tree.edges().len());
            let len = tree.edges()[e].len.clone();
            let p = tree.point_on_edge(e, len * q(rng.gen_range(0..=4), 4))?;
            let r = TreePoint::Vertex(rng.gen_range(0..size));
            if retraction_identities_check(&tree, &TreePoint::Vertex(x), &TreePoint::Vertex(y), &p, &r)?.holds() {
                decomposition += 1;
            }
            let full = RTreeSubset::full(&tree);
            let mu = random_element(rng, space, 6);
            if l_projection_split(&full, x, y, &mu)?.additive {
                additivity += 1;
            }

            let (f, comb) = random_normed_combination(rng, &tree, 4);
            let g = g_mu_build(&tree, &comb, &f)?;
            let mu_c = combination_element(space, &comb)?;
            if g.eval(&mu_c).is_one() && g.lip_norm() <= Q::one() {
                g_ok += 1;
            }
            // the molecule g rates highest, tested against a random width
            let (mut best, mut bu, mut bv) = (None::<Q>, 0, 1);
            for a in 0..size {
                for b in 0..size {
                    if a != b {
                        let val = g.eval(&molecule(space, a, b)?);
                        if best.as_ref().is_none_or(|m| val > *m) {
                            best = Some(val);
                            (bu, bv) = (a, b);
                        }
                    }
                }
            }
            let alpha = q(rng.gen_range(1..=8), 8);
            match g_mu_property_check(&tree, &comb, &g, bu, bv, &alpha)? {
                PropertyOutcome::Witness { .. } => witnesses += 1,
                PropertyOutcome::Vacuous => vacuous += 1,
                PropertyOutcome::NoWitness => errors.push(format!("instance {k}: no witness")),
            }

            let out = recombine(&full, &comb)?;
            if combination_element(space, &out)? == mu_c && projection_property_violation(&tree, &out).is_none() {
                recombined += 1;
            }

            let raw = random_element(rng, space, 6);
            if raw.is_zero() || free_norm(&raw).is_zero() {
                h_easy += 1;
                return Ok(());
            }
            let unit = raw.scale(&free_norm(&raw).recip());
            let f = free_norm_certified(&unit).dual;
            match daugavet_witness_h(&tree, &unit, &f, x, y, &eps) {
                Ok(HWitness::Witnessed { lip, gap, .. }) => {
                    if lip.is_one() && gap == qi(2) - qi(4) * &eps {
                        h_witnessed += 1;
                    } else {
                        h_bad += 1;
                    }
                }
                Ok(HWitness::Obstructed { .. }) => h_obstructed += 1,
                Err(Error::Precondition(_)) => {
                    // f itself gives the distance
                    let mxy = molecule(space, x, y)?;
                    if f.eval(&unit) - f.eval(&mxy) >= qi(2) - qi(4) * &eps {
                        h_easy += 1;
                    } else {
                        h_bad += 1;
                    }
                }
                Err(e) => return Err(e),
            }
            Ok(())
        };
        if let Err(e) = body() {
            errors.push(format!("instance {k}: {e}"));
        }
    }
    let err = json!({ "errors": errors });
    vec![
        check(S, "retraction_decomposition", || {
            Ok((decomposition == n, n, json!({ "holds": decomposition })))
        }),
        check(S, "l_projection_additivity", || {
            Ok((additivity == n, n, json!({ "additive": additivity })))
        }),
        check(S, "g_mu", || {
            Ok((
                g_ok == n && witnesses + vacuous == n && errors.is_empty(),
                n,
                json!({ "norming": g_ok, "witnesses": witnesses, "vacuous": vacuous, "errors": err["errors"] }),
            ))
        }),
        check(S, "recombine", || {
            Ok((recombined == n, n, json!({ "exact": recombined })))
        }),
        check(S, "witness_h", || {
            Ok((
                h_bad == 0,
                n,
                json!({ "witnessed": h_witnessed, "obstructed": h_obstructed, "f_suffices": h_easy, "bad": h_bad, "epsilon": fmt_q(&eps) }),
            ))
        }),
    ]
}

/// Sphere points of a polyhedral norm in the closed positive quadrant:
/// extreme points and facet midpoints.
fn positive_sphere_points(p: &Polyhedral) -> (Vec<PlanePoint>, Vec<PlanePoint>) {
    let ext: Vec<PlanePoint> = p
        .extreme_points()
        .into_iter()
        .filter(|e| !e.a.is_negative() && !e.b.is_negative())
        .collect();
    let cone = p.cone_vertices();
    let mids = cone.windows(2).map(|w| w[0].add(&w[1]).scale(&q(1, 2))).collect();
    (ext, mids)
}

fn norm_checks(name: &str, norm: &AbsNorm2, samples: usize, rng: &mut ChaCha8Rng) -> Vec<Check> {
    const S: &str = "absnorm";
    let mut checks = vec![check(S, &format!("bipolarity[{name}]"), || {
        Ok((norm.dual().dual() == *norm, 1, json!({ "dual": norm.dual().to_json() })))
    })];
    match norm.as_polyhedral() {
        Some(p) => {
            checks.push(check(S, &format!("v_points[{name}]"), || {
                let ext = p.extreme_points();
                let mut ok = true;
                for e in &ext {
                    ok &= is_v_point(norm, &SpherePoint::Exact(e.clone()))? && v_point_witness(&p, e).is_some();
                }
                let (_, mids) = positive_sphere_points(&p);
                for m in &mids {
                    ok &= !is_v_point(norm, &SpherePoint::Exact(m.clone()))?;
                }
                let pts: Vec<_> = ext.iter().map(|e| e.to_strings()).collect();
                Ok((ok, ext.len() + mids.len(), json!({ "extreme_points": pts })))
            }));
            checks.push(check(S, &format!("supporting_slices[{name}]"), || {
                let (ext, mids) = positive_sphere_points(&p);
                let mut ok = true;
                let mut log = Vec::new();
                for x in ext.iter().chain(&mids) {
                    let s = supporting_slice_construction(&p, x)?;
                    let v = verify_supporting_slice(&p, x, &s);
                    ok &= v.passes;
                    log.push(json!({ "x": x.to_strings(), "functional": s.functional.to_strings(), "alpha": fmt_q(&s.alpha), "passes": v.passes }));
                }
                Ok((ok, log.len(), json!({ "slices": log })))
            }));
            checks.push(check(S, &format!("transfer_predicate[{name}]"), || {
                let mut ok = true;
                let cone = p.cone_vertices();
                let mut count = 0;
                for w in cone.windows(2) {
                    for k in 0..=4 {
                        let x = w[0].scale(&q(k, 4)).add(&w[1].scale(&q(4 - k, 4)));
                        ok &= transfer_predicate(norm, &SpherePoint::Exact(x))?;
                        count += 1;
                    }
                }
                Ok((ok, count, json!({})))
            }));
        }
        None => {
            checks.push(check(S, &format!("no_v_points[{name}]"), || {
                let mut ok = true;
                for _ in 0..samples {
                    let d = random_direction(rng);
                    let other = random_direction(rng);
                    let x = SpherePoint::Normalized(d.clone());
                    let strict = d.cross(&other).is_zero() || certified_strict_midpoint(norm, &d, &other)?;
                    ok &= !is_v_point(norm, &x)? && strict;
                }
                Ok((ok, samples, json!({})))
            }));
        }
    }
    checks
}

fn random_direction(rng: &mut impl Rng) -> PlanePoint {
    loop {
        let d = pt(q(rng.gen_range(-16..=16), 8), q(rng.gen_range(-16..=16), 8));
        if !d.is_zero() {
            return d;
        }
    }
}

fn absnorm_suite(cfg: &RunConfig, inputs: &Inputs, rng: &mut ChaCha8Rng) -> Vec<Check> {
    const S: &str = "absnorm";
    let samples = cfg.samples_or(50);
    if let Some(n) = &inputs.norm {
        let name = cfg.norm.clone().unwrap_or_default();
        return norm_checks(&name, n, samples, rng);
    }
    let mut checks = vec![
        check(S, "l1_linf_extreme_points", || {
            let l1: Vec<_> = Polyhedral::l1().extreme_points();
            let linf: Vec<_> = Polyhedral::linf().extreme_points();
            let mut want_l1 = vec![pt(qi(1), qi(0)), pt(qi(0), qi(1)), pt(qi(-1), qi(0)), pt(qi(0), qi(-1))];
            let mut want_linf = vec![
                pt(qi(1), qi(1)),
                pt(qi(-1), qi(1)),
                pt(qi(-1), qi(-1)),
                pt(qi(1), qi(-1)),
            ];
            let (mut a, mut b) = (l1.clone(), linf.clone());
            a.sort();
            b.sort();
            want_l1.sort();
            want_linf.sort();
            Ok((a == want_l1 && b == want_linf, 8, json!({})))
        }),
        check(S, "figure_norm", || {
            let fig = AbsNorm2::figure_alpha();
            let p = fig.as_polyhedral().expect("polyhedral");
            let want = vec![
                pt(qi(1), qi(0)),
                pt(q(3, 4), q(1, 2)),
                pt(q(1, 2), q(3, 4)),
                pt(qi(0), qi(1)),
            ];
            Ok((
                fig.is_polyhedral() && p.cone_vertices() == want.as_slice(),
                4,
                json!(fig.to_json()),
            ))
        }),
        check(S, "transfer_false_on_l2", || {
            let l2 = AbsNorm2::builtin("l2")?;
            let mut ok = true;
            for k in 1..samples as i64 + 1 {
                let x = circle_point(&q(k, samples as i64 + 1));
                ok &= !transfer_predicate(&l2, &SpherePoint::Exact(x))?;
            }
            Ok((ok, samples, json!({})))
        }),
    ];
    for name in ["l1", "linf", "figure-alpha", "l2", "lp:3/2", "lp:3"] {
        match AbsNorm2::builtin(name) {
            Ok(n) => checks.extend(norm_checks(name, &n, samples, rng)),
            Err(e) => checks.push(check(S, name, || Err(e))),
        }
    }
    checks
}

/// Exact `<x*, f_s>` for the separation functional of `t`, derived from the
/// supports: `-2^-|t|` at `s = t`, `2^-|t|` for children of `t`, `2^-(|t|+1)`
/// for deeper successors and zero otherwise.
pub fn expected_separation_value(t: &Node, s: &Node) -> Q {
    let n = t.len() as i64;
    if s == t {
        -pow2(-n)
    } else if t.is_prefix_of(s) && s.len() == t.len() + 1 {
        pow2(-n)
    } else if t.is_prefix_of(s) {
        pow2(-n - 1)
    } else {
        Q::zero()
    }
}

fn dyadic_suite(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Vec<Check> {
    const S: &str = "dyadic";
    let depth = cfg.depth.unwrap_or(6);
    let samples = cfg.samples_or(50);
    vec![
        check(S, "unit_norms", || {
            let mut ok = true;
            let mut count = 0;
            for n in 1..=depth {
                for t in Node::level(n) {
                    ok &= dyadic::f_fn(&t)?.l1_norm().is_one() && dyadic::h_fn(&t)?.l1_norm().is_one();
                    count += 1;
                }
            }
            Ok((ok, count, json!({ "depth": depth })))
        }),
        check(S, "norm_formula", || {
            let mut ok = 0;
            for _ in 0..samples {
                let g = dyadic::random_f_span(rng, depth.min(5), 6);
                if dyadic::l1_norm(&g)? == dyadic::span_norm_formula(&g.f)? {
                    ok += 1;
                }
            }
            Ok((ok == samples, samples, json!({ "agree": ok })))
        }),
        check(S, "cascade_inequality", || {
            let mut ok = 0;
            for _ in 0..samples {
                let n = rng.gen_range(1..=8);
                let a: Vec<Q> = (0..n).map(|_| q(rng.gen_range(-9..=9), rng.gen_range(1..=5))).collect();
                let m = rng.gen_range(1..=n);
                if dyadic::cascade_inequality_check(&a, m, n)?.2 {
                    ok += 1;
                }
            }
            Ok((ok == samples, samples, json!({ "holds": ok })))
        }),
        check(S, "concentration", || {
            let mut ok = true;
            let mut count = 0;
            for n in 1..=depth.min(4) {
                for t in Node::level(n) {
                    let (l, r, _) = dyadic::concentration_check(&TreeSpanElement::single_f(t, Q::one()), n)?;
                    ok &= l == r;
                    count += 1;
                }
            }
            for _ in 0..samples {
                let g = dyadic::random_f_span(rng, depth.min(4), 4);
                ok &= dyadic::concentration_check(&g, rng.gen_range(1..=5))?.2;
                count += 1;
            }
            Ok((ok, count, json!({})))
        }),
        check(S, "martingale_isometry", || {
            let mut ok = true;
            let mut levels = Vec::new();
            for n in 1..=depth.min(6) {
                let nodes = Node::level(n);
                let coeffs: BTreeMap<Node, Q> = (0..nodes.len().min(8))
                    .map(|_| {
                        (
                            nodes[rng.gen_range(0..nodes.len())].clone(),
                            q(rng.gen_range(-5..=5), 3),
                        )
                    })
                    .collect();
                let r = dyadic::martingale_and_isometry_check(n, &coeffs)?;
                ok &= r.martingale && r.isometry;
                levels.push(r);
            }
            Ok((ok, levels.len(), json!({ "levels": levels })))
        }),
        check(S, "separation", || {
            let mut ok = true;
            let mut count = 0;
            let deep: Vec<Node> = (1..=6).flat_map(Node::level).collect();
            for n in 1..=4 {
                for t in Node::level(n) {
                    let x = dyadic::separation_functional(&t)?;
                    let f = dyadic::separated_element(&t).to_step()?;
                    ok &= x.pair(&f)? == f.l1_norm();
                    for s in &deep {
                        let v = dyadic::separation_functional_values(&t, s)?;
                        ok &= v == expected_separation_value(&t, s) && v.abs() < Q::one();
                        count += 1;
                    }
                }
            }
            Ok((ok, count, json!({})))
        }),
        check(S, "exposure", || {
            let mut reports = Vec::new();
            let mut ok = true;
            for t in ["0", "01", "110"] {
                for eps in [q(1, 2), q(1, 4), q(1, 8)] {
                    let r = dyadic::exposure_experiment(&Node::parse(t)?, &eps, samples.min(20), rng)?;
                    ok &= r.violations == 0;
                    reports.push(r);
                }
            }
            Ok((ok, reports.len(), json!({ "runs": reports })))
        }),
        check(S, "not_relative_daugavet", || {
            let mut ok = true;
            let mut out = Vec::new();
            for _ in 0..samples.min(20) {
                let g = dyadic::random_h_sphere(rng, 3, 4);
                let x = g.to_step()?.sign();
                let eps = [q(1, 2), q(1, 4), q(1, 8)][rng.gen_range(0..3)].clone();
                let w = dyadic::not_relative_daugavet_witness(&g, &x, &eps)?;
                ok &= w.min_below_two;
                out.push(json!({ "g": g.to_json(), "epsilon": fmt_q(&eps), "witness": w }));
            }
            Ok((ok, out.len(), json!({ "witnesses": out })))
        }),
        check(S, "delta_witness", || {
            let mut ok = true;
            let mut out = Vec::new();
            for _ in 0..samples.min(5) {
                let g = dyadic::random_h_sphere(rng, 3, 4);
                let x = g.to_step()?.sign();
                let alpha = q(1, 2);
                for eps in [q(1, 2), q(1, 4), q(1, 8)] {
                    let w = dyadic::delta_witness(&g, &x, &alpha, &eps)?;
                    let good = w.distance >= qi(2) - &eps && w.pairing > Q::one() - &alpha && w.norm <= Q::one();
                    ok &= good;
                    out.push(json!({ "epsilon": fmt_q(&eps), "y": w.y.to_json(), "distance": fmt_q(&w.distance) }));
                }
            }
            Ok((ok, out.len(), json!({ "witnesses": out })))
        }),
    ]
}
