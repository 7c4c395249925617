//! Command-line front end.
//!
//! Exit codes: 0 on success or PASS, 2 when a verdict is FAIL, 1 on errors
//! (including usage errors).

use crate::bergman::{build_basis, gram_moments, FeatureSpace, OrthonormalBasis, DEFAULT_TAU, PIVOT_TOL};
use crate::domains::DomainSpec;
use crate::error::{Error, Result};
use crate::maps::{MapKind, ProperMapSpec};
use crate::numerics::C64;
use crate::quadrature::{self, Weight};
use crate::verify::{self, IdentityReport, RunSettings, TestFunction, Verdict, FIBER_TOL};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAIL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "friedrichs", version, about = "Bergman kernels and Friedrichs-operator rank experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalOpts {
    /// Accepted sample count per stream [default: 1048576].
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Stream seed [default: 1].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Sampling sequence [default: halton].
    #[arg(long, global = true, value_enum)]
    pub sequence: Option<SequenceArg>,
    /// Flat key=value file; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Sample cache directory (also FRIEDRICHS_CACHE_DIR).
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the JSON output to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Append a one-line summary per report to this CSV file.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    /// Leave wall-clock time out of reports.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SequenceArg {
    Halton,
    Pseudo,
}

impl SequenceArg {
    fn label(self) -> &'static str {
        match self {
            SequenceArg::Halton => "halton",
            SequenceArg::Pseudo => "pseudo",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Whether a point lies in a domain.
    Membership {
        domain: String,
        /// Comma-separated complex coordinates, e.g. `0,2i,1-0.5i`.
        #[arg(allow_hyphen_values = true)]
        point: String,
    },
    /// Volume estimate.
    Volume { domain: String },
    /// Monomial Gram matrix.
    Gram {
        domain: String,
        #[arg(long)]
        degree: Option<usize>,
    },
    /// Truncated Bergman kernel K(z, w).
    Kernel {
        domain: String,
        #[arg(long)]
        degree: Option<usize>,
        /// The 2n coordinates of z followed by w.
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
    /// Friedrichs matrix spectrum and rank verdict.
    Friedrichs {
        domain: String,
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
        /// Allow domains whose rank is an open question.
        #[arg(long)]
        exploratory: bool,
    },
    /// Preimages of a target point.
    Fibers {
        map: String,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
    /// Check one identity for a proper map.
    Verify {
        #[arg(value_enum)]
        identity: IdentityArg,
        map: String,
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
        /// Interior points (or point pairs).
        #[arg(long)]
        points: Option<usize>,
        /// Test function for bergman-projection: `mono:a,b,…`, `conj:k`, `abs2:k`.
        #[arg(long = "function")]
        function: Option<String>,
    },
    /// Run every acceptance criterion.
    Suite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IdentityArg {
    Cov,
    Projection,
    KernelTransform,
    BergmanProjection,
    WeightedRankone,
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub target: Option<String>,
    pub degree: Option<usize>,
    pub samples: usize,
    pub seed: u64,
    pub sequence: String,
    pub tau: f64,
    pub points: Option<usize>,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub no_timestamp: bool,
}

/// Parses a flat `key=value` file; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {}: expected key=value", n + 1)))?;
        out.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(out)
}

fn file_value<T: std::str::FromStr>(file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    file.get(key)
        .map(|v| v.parse::<T>().map_err(|_| Error::Parse(format!("config key {key}: bad value '{v}'"))))
        .transpose()
}

const KNOWN_KEYS: [&str; 11] = [
    "samples",
    "seed",
    "sequence",
    "degree",
    "tau",
    "points",
    "out",
    "csv",
    "cache_dir",
    "threads",
    "no_timestamp",
];

impl RunConfig {
    /// Merges flags over the optional config file over defaults.
    pub fn resolve(cli: &Cli) -> Result<Self> {
        let file = match &cli.global.config {
            Some(p) => parse_config_text(&std::fs::read_to_string(p)?)?,
            None => BTreeMap::new(),
        };
        if let Some(k) = file.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(Error::Parse(format!("unknown config key '{k}'")));
        }
        let g = &cli.global;
        let (command, target, degree, tau, points) = match &cli.command {
            Command::Membership { domain, .. } => ("membership", Some(domain.clone()), None, None, None),
            Command::Volume { domain } => ("volume", Some(domain.clone()), None, None, None),
            Command::Gram { domain, degree } => ("gram", Some(domain.clone()), *degree, None, None),
            Command::Kernel { domain, degree, .. } => ("kernel", Some(domain.clone()), *degree, None, None),
            Command::Friedrichs { domain, degree, tau, .. } => ("friedrichs", Some(domain.clone()), *degree, *tau, None),
            Command::Fibers { map, .. } => ("fibers", Some(map.clone()), None, None, None),
            Command::Verify {
                map,
                degree,
                tau,
                points,
                ..
            } => ("verify", Some(map.clone()), *degree, *tau, *points),
            Command::Suite => ("suite", None, None, None, None),
        };
        let sequence = match g.sequence {
            Some(s) => s.label().to_string(),
            None => file_value::<String>(&file, "sequence")?.unwrap_or_else(|| "halton".into()),
        };
        let cfg = Self {
            command: command.into(),
            target,
            degree: degree.or(file_value(&file, "degree")?),
            samples: g.samples.or(file_value(&file, "samples")?).unwrap_or(1 << 20),
            seed: g.seed.or(file_value(&file, "seed")?).unwrap_or(1),
            sequence,
            tau: tau.or(file_value(&file, "tau")?).unwrap_or(DEFAULT_TAU),
            points: points.or(file_value(&file, "points")?),
            out: g.out.clone().or(file_value(&file, "out")?),
            csv: g.csv.clone().or(file_value(&file, "csv")?),
            cache_dir: g.cache_dir.clone().or(file_value(&file, "cache_dir")?),
            threads: g.threads.or(file_value(&file, "threads")?),
            no_timestamp: g.no_timestamp || file_value(&file, "no_timestamp")?.unwrap_or(false),
        };
        cfg.run_settings()?;
        Ok(cfg)
    }

    pub fn run_settings(&self) -> Result<RunSettings> {
        RunSettings::new(self.samples, self.seed, &self.sequence)
    }
}

/// Parses `a`, `bi`, `a+bi`, `a-bi` (also `i`, `-i`, exponents).
pub fn parse_complex(s: &str) -> Result<C64> {
    let bad = || Error::Parse(format!("bad complex literal '{s}'"));
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err(bad());
    }
    let Some(body) = t.strip_suffix(['i', 'j']) else {
        return Ok(C64::new(t.parse().map_err(|_| bad())?, 0.0));
    };
    // split before the last sign that is not leading and not an exponent sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        x => x.parse().map_err(|_| bad())?,
    };
    Ok(C64::new(re.parse().map_err(|_| bad())?, im))
}

/// Comma-separated complex coordinates.
pub fn parse_point(s: &str) -> Result<Vec<C64>> {
    s.split(',').map(parse_complex).collect()
}

fn parse_domain(s: &str) -> Result<DomainSpec> {
    s.parse()
}

fn parse_map(s: &str) -> Result<ProperMapSpec> {
    s.parse()
}

/// Writes `text` atomically.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

const CSV_HEADER: &str = "identity,domain,map,degree,samples,seed,sequence,points,max_residual,tolerance,verdict";

/// One CSV row per report, with a header when the file is new.
pub fn append_csv(path: &Path, reports: &[IdentityReport]) -> Result<()> {
    let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "{CSV_HEADER}")?;
    }
    for r in reports {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{:e},{:e},{}",
            csv_field(&r.identity),
            csv_field(&r.domain),
            csv_field(r.map.as_deref().unwrap_or("")),
            r.degree,
            r.samples,
            r.seed,
            r.sequence,
            r.points,
            r.max_residual,
            r.tolerance,
            r.verdict
        )?;
    }
    Ok(())
}

/// Result of one command: text for the output channel, the reports it
/// produced and the exit code.
pub struct Outcome {
    pub text: String,
    pub reports: Vec<IdentityReport>,
    pub code: i32,
}

impl Outcome {
    fn plain(text: String) -> Self {
        Self {
            text,
            reports: Vec::new(),
            code: EXIT_OK,
        }
    }

    fn json<T: Serialize>(v: &T) -> Result<Self> {
        Ok(Self::plain(serde_json::to_string_pretty(v)?))
    }

    fn report(r: IdentityReport) -> Result<Self> {
        let code = if r.passed() { EXIT_OK } else { EXIT_FAIL };
        Ok(Self {
            text: r.to_json()?,
            reports: vec![r],
            code,
        })
    }
}

#[derive(Serialize)]
struct VolumeOut {
    domain: String,
    value: f64,
    stderr: f64,
    samples: usize,
    acceptance: f64,
    provenance: String,
}

#[derive(Serialize)]
struct GramOut {
    domain: String,
    degree: usize,
    exponents: Vec<Vec<i32>>,
    /// Row-major `[re, im]` pairs.
    gram: Vec<[f64; 2]>,
    stderr: Vec<f64>,
    provenance: String,
}

#[derive(Serialize)]
struct KernelOut {
    domain: String,
    degree: usize,
    z: Vec<[f64; 2]>,
    w: Vec<[f64; 2]>,
    value: [f64; 2],
    basis_size: usize,
    retained: usize,
    provenance: String,
}

#[derive(Serialize)]
struct FiberOut {
    map: String,
    base: Vec<[f64; 2]>,
    preimages: Vec<Vec<[f64; 2]>>,
    max_residual: f64,
}

fn pairs(v: &[C64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn default_degree(d: &DomainSpec) -> usize {
    match d.dimension() {
        1 => 20,
        2 | 3 => 4,
        _ => 3,
    }
}

/// Default degree for identity checks on a map.
pub fn default_map_degree(identity: IdentityArg, m: &ProperMapSpec) -> usize {
    match identity {
        IdentityArg::Cov => 4,
        IdentityArg::Projection => 3,
        IdentityArg::KernelTransform | IdentityArg::BergmanProjection => match m.kind() {
            MapKind::Pi(2) => 6,
            _ => 3,
        },
        IdentityArg::WeightedRankone => match m.kind() {
            MapKind::Pi(n) if n > 3 => 2,
            _ => 4,
        },
    }
}

/// Runs one identity check; `None` picks the default degree or point count.
pub fn verify_identity(
    identity: IdentityArg,
    m: &ProperMapSpec,
    degree: Option<usize>,
    points: Option<usize>,
    tau: f64,
    function: Option<&str>,
    run: &RunSettings,
) -> Result<IdentityReport> {
    let degree = degree.unwrap_or_else(|| default_map_degree(identity, m));
    match identity {
        IdentityArg::Cov => verify::check_change_of_variables(m, degree, run),
        IdentityArg::Projection => verify::check_projection_formula(m, points.unwrap_or(10_000), true, run),
        IdentityArg::KernelTransform => verify::check_kernel_transform(m, degree, points.unwrap_or(10), run),
        IdentityArg::BergmanProjection => {
            let g: TestFunction = match function {
                Some(s) => s.parse()?,
                None => TestFunction::Conj(0),
            };
            verify::check_bergman_projection_relation(m, &g, degree, points.unwrap_or(10), run)
        }
        IdentityArg::WeightedRankone => verify::check_weighted_rankone(m, degree, tau, run),
    }
}

fn timed<F: FnOnce() -> Result<IdentityReport>>(stamp: bool, f: F) -> Result<IdentityReport> {
    let t = Instant::now();
    let mut r = f()?;
    if stamp {
        r.wall_time_ms = Some(t.elapsed().as_millis() as u64);
    }
    Ok(r)
}

/// One acceptance criterion and the reports that decide it.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub criterion: usize,
    pub name: String,
    pub verdict: Verdict,
    pub reports: Vec<IdentityReport>,
}

fn criterion(n: usize, name: &str, reports: Vec<IdentityReport>) -> CriterionResult {
    let verdict = if reports.iter().all(|r| r.passed()) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    CriterionResult {
        criterion: n,
        name: name.into(),
        verdict,
        reports,
    }
}

/// The acceptance battery. Each item runs independently; errors become FAIL
/// lines rather than aborting the battery.
pub fn run_suite(run: &RunSettings, stamp: bool, mut progress: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    let mut out = Vec::new();
    let mut push = |n: usize, name: &str, f: &dyn Fn() -> Result<Vec<IdentityReport>>| {
        let c = match f() {
            Ok(v) => criterion(n, name, v),
            Err(e) => {
                let mut c = criterion(n, name, Vec::new());
                c.verdict = Verdict::Fail;
                c.name = format!("{name} (error: {e})");
                c
            }
        };
        progress(&c);
        out.push(c);
    };
    let m = |s: &str| -> Result<ProperMapSpec> { s.parse() };
    let d = |s: &str| -> Result<DomainSpec> { s.parse() };
    push(1, "closed-form disc suite", &|| Ok(vec![timed(stamp, || verify::check_disc_suite(run))?]));
    push(
        2,
        "volumes",
        &|| {
            // the polar Halton map makes disc and polydisc volumes exact, so
            // the square-box pseudo-random stream is checked as well
            let pseudo = RunSettings::new(run.samples, run.seed, "pseudo")?;
            let halton = RunSettings::new(run.samples, run.seed, "halton")?;
            Ok(vec![
                timed(stamp, || verify::check_volumes(&halton))?,
                timed(stamp, || verify::check_volumes(&pseudo))?,
            ])
        },
    );
    push(
        3,
        "change of variables",
        &|| {
            ["Phi", "Psi", "pi:2", "pi:3"]
                .iter()
                .map(|s| timed(stamp, || verify::check_change_of_variables(&m(s)?, 4, run)))
                .collect()
        },
    );
    push(
        4,
        "homogeneous orthogonality",
        &|| {
            let cases: [(&str, Option<&str>); 7] = [
                ("S", None),
                ("S", Some("Phi")),
                ("L", None),
                ("L", Some("Psi")),
                ("ball:3", None),
                ("polydisc:3", None),
                ("polydisc:3", Some("pi:3")),
            ];
            cases
                .iter()
                .map(|(dom, mp)| {
                    let w = match mp {
                        Some(s) => Weight::JacobianSq(m(s)?),
                        None => Weight::Unweighted,
                    };
                    timed(stamp, || verify::check_homogeneous_orthogonality(&d(dom)?, &w, 4, run))
                })
                .collect()
        },
    );
    push(
        5,
        "rank-one verdicts",
        &|| {
            [
                ("ball:3", 4),
                ("polydisc:3", 4),
                ("S", 4),
                ("L", 4),
                ("tetrablock", 4),
                ("pentablock", 4),
                ("Gn:2", 4),
                ("Gn:3", 3),
            ]
            .iter()
            .map(|(s, deg)| timed(stamp, || verify::run_friedrichs_experiment(&d(s)?, *deg, DEFAULT_TAU, false, run)))
            .collect()
        },
    );
    push(
        6,
        "negative controls",
        &|| {
            [("annulus:0.5", 3), ("hartogs:2", 3)]
                .iter()
                .map(|(s, deg)| timed(stamp, || verify::run_friedrichs_experiment(&d(s)?, *deg, DEFAULT_TAU, false, run)))
                .collect()
        },
    );
    push(
        7,
        "kernel transformation",
        &|| {
            [("pi:2", 6), ("Phi", 3)]
                .iter()
                .map(|(s, deg)| timed(stamp, || verify::check_kernel_transform(&m(s)?, *deg, 10, run)))
                .collect()
        },
    );
    push(
        8,
        "projection formula",
        &|| {
            ["Phi", "Psi", "pi:2", "pi:3"]
                .iter()
                .map(|s| timed(stamp, || verify::check_projection_formula(&m(s)?, 10_000, false, run)))
                .collect()
        },
    );
    push(
        9,
        "Bergman projection relation",
        &|| {
            let pi2 = m("pi:2")?;
            ["mono:1,0", "mono:0,1", "mono:2,1", "conj:0", "abs2:1"]
                .iter()
                .map(|g| timed(stamp, || verify::check_bergman_projection_relation(&pi2, &g.parse()?, 6, 10, run)))
                .collect()
        },
    );
    push(
        10,
        "fiber counts",
        &|| {
            ["Phi", "Psi", "pi:2", "pi:3"]
                .iter()
                .map(|s| timed(stamp, || verify::check_fiber_counts(&m(s)?, 100, run.seed)))
                .collect()
        },
    );
    push(11, "determinism", &|| Ok(vec![determinism_report(run)?]));
    out
}

/// Recomputes a Friedrichs report from scratch twice and compares bytes.
pub fn determinism_report(run: &RunSettings) -> Result<IdentityReport> {
    let d: DomainSpec = "tetrablock".parse()?;
    let small = RunSettings::new(run.samples.min(1 << 16), run.seed, &run.sequence)?;
    let once = || -> Result<String> {
        quadrature::clear_memory_cache();
        verify::run_friedrichs_experiment(&d, 3, DEFAULT_TAU, false, &small)?.to_json()
    };
    let (a, b) = (once()?, once()?);
    let mut r = verify::run_friedrichs_experiment(&d, 3, DEFAULT_TAU, false, &small)?;
    r.identity = "determinism".into();
    r.sigma.clear();
    let differ = if a == b { 0.0 } else { 1.0 };
    r.residuals = vec![differ];
    r.max_residual = differ;
    r.tolerance = 0.0;
    r.parts.clear();
    r.verdict = if a == b { Verdict::Pass } else { Verdict::Fail };
    Ok(r)
}

/// Executes a parsed command line.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let cfg = RunConfig::resolve(cli)?;
    if let Some(n) = cfg.threads {
        // ignore a second initialization within one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    if let Some(dir) = &cfg.cache_dir {
        quadrature::set_cache_dir(Some(dir.clone()));
    }
    let run = cfg.run_settings()?;
    let stamp = !cfg.no_timestamp;
    let outcome = match &cli.command {
        Command::Membership { domain, point } => {
            let d = parse_domain(domain)?;
            let z = parse_point(point)?;
            Outcome::plain(if d.contains(&z)? { "inside" } else { "outside" }.to_string())
        }
        Command::Volume { domain } => {
            let d = parse_domain(domain)?;
            let s = run.stream(0)?;
            let v = quadrature::volume(&d, &s)?;
            Outcome::json(&VolumeOut {
                domain: d.to_string(),
                value: v.value.re,
                stderr: v.stderr(),
                samples: v.samples_used,
                acceptance: v.acceptance,
                provenance: quadrature::config_hash(&d, &s),
            })?
        }
        Command::Gram { domain, .. } => {
            let d = parse_domain(domain)?;
            let degree = cfg.degree.unwrap_or_else(|| default_degree(&d));
            let space = FeatureSpace::monomials(build_basis(&d, degree));
            let m = gram_moments(&d, &space, &Weight::Unweighted, &run.stream(0)?)?;
            Outcome::json(&GramOut {
                domain: d.to_string(),
                degree,
                exponents: space.basis.exponents().to_vec(),
                gram: pairs(m.mm.gram.as_slice()),
                stderr: m.mm.gram_stderr.clone(),
                provenance: m.provenance.clone(),
            })?
        }
        Command::Kernel { domain, at, .. } => {
            let d = parse_domain(domain)?;
            let degree = cfg.degree.unwrap_or_else(|| default_degree(&d));
            let pts = parse_point(at)?;
            let n = d.dimension();
            if pts.len() != 2 * n {
                return Err(Error::DimensionMismatch {
                    expected: 2 * n,
                    got: pts.len(),
                });
            }
            let (z, w) = pts.split_at(n);
            let space = FeatureSpace::monomials(build_basis(&d, degree));
            let m = gram_moments(&d, &space, &Weight::Unweighted, &run.stream(0)?)?;
            let onb = OrthonormalBasis::from_moments(&m, PIVOT_TOL)?;
            let k = onb.kernel(z, w);
            Outcome::json(&KernelOut {
                domain: d.to_string(),
                degree,
                z: pairs(z),
                w: pairs(w),
                value: [k.re, k.im],
                basis_size: space.len(),
                retained: onb.len(),
                provenance: onb.provenance.clone(),
            })?
        }
        Command::Friedrichs { domain, exploratory, .. } => {
            let d = parse_domain(domain)?;
            let degree = cfg.degree.unwrap_or_else(|| default_degree(&d));
            Outcome::report(timed(stamp, || {
                verify::run_friedrichs_experiment(&d, degree, cfg.tau, *exploratory, &run)
            })?)?
        }
        Command::Fibers { map, at } => {
            let m = parse_map(map)?;
            let w = parse_point(at)?;
            let f = m.preimages(&w, FIBER_TOL)?;
            Outcome::json(&FiberOut {
                map: m.to_string(),
                base: pairs(&f.base),
                preimages: f.preimages.iter().map(|p| pairs(p)).collect(),
                max_residual: f.max_residual,
            })?
        }
        Command::Verify { identity, map, function, .. } => {
            let m = parse_map(map)?;
            let r = timed(stamp, || verify_identity(*identity, &m, cfg.degree, cfg.points, cfg.tau, function.as_deref(), &run))?;
            Outcome::report(r)?
        }
        Command::Suite => {
            let results = run_suite(&run, stamp, |c| {
                eprintln!("criterion {:>2} {}: {}", c.criterion, c.name, c.verdict);
            });
            let code = if results.iter().all(|c| c.verdict.passed()) {
                EXIT_OK
            } else {
                EXIT_FAIL
            };
            Outcome {
                text: serde_json::to_string_pretty(&results)?,
                reports: results.iter().flat_map(|c| c.reports.clone()).collect(),
                code,
            }
        }
    };
    if let Some(p) = &cfg.csv {
        append_csv(p, &outcome.reports)?;
    }
    Ok(outcome)
}

/// Parses `args`, runs, prints and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(o) => {
            let out = cli.global.out.clone().or_else(|| RunConfig::resolve(&cli).ok().and_then(|c| c.out));
            let written = match out {
                Some(p) => write_atomic(&p, &(o.text.clone() + "\n")),
                None => {
                    println!("{}", o.text);
                    Ok(())
                }
            };
            match written {
                Ok(()) => o.code,
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_ERROR
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Unknown { .. }) {
                eprintln!("run `friedrichs --help` for usage");
            }
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("0").unwrap(), c(0.0, 0.0));
        assert_eq!(parse_complex("2i").unwrap(), c(0.0, 2.0));
        assert_eq!(parse_complex("-0.25").unwrap(), c(-0.25, 0.0));
        assert_eq!(parse_complex("1-0.5i").unwrap(), c(1.0, -0.5));
        assert_eq!(parse_complex("-1e-3+2e+1i").unwrap(), c(-1e-3, 20.0));
        assert_eq!(parse_complex("i").unwrap(), c(0.0, 1.0));
        assert_eq!(parse_complex("-i").unwrap(), c(0.0, -1.0));
        assert_eq!(parse_complex("3-i").unwrap(), c(3.0, -1.0));
        for bad in ["", "x", "1+", "1+2", "i2"] {
            assert!(parse_complex(bad).is_err(), "{bad}");
        }
        assert_eq!(parse_point("0,2i,1").unwrap(), vec![c(0.0, 0.0), c(0.0, 2.0), c(1.0, 0.0)]);
    }

    #[test]
    fn config_text() {
        let m = parse_config_text("samples = 4096\n# c\nseed=3 # trailing\n\ncache-dir=/tmp/x\n").unwrap();
        assert_eq!(m["samples"], "4096");
        assert_eq!(m["seed"], "3");
        assert_eq!(m["cache_dir"], "/tmp/x");
        assert!(parse_config_text("novalue").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        std::fs::write(&p, "samples=4096\nseed=9\ntau=0.2\n").unwrap();
        let cli = Cli::try_parse_from(["friedrichs", "--config", p.to_str().unwrap(), "--seed", "4", "volume", "disc"]).unwrap();
        let cfg = RunConfig::resolve(&cli).unwrap();
        assert_eq!((cfg.samples, cfg.seed, cfg.tau), (4096, 4, 0.2));
        std::fs::write(&p, "bogus=1\n").unwrap();
        assert!(RunConfig::resolve(&cli).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main_with_args(["friedrichs", "membership", "pentablock", "0,2i,1"]), EXIT_OK);
        assert_eq!(main_with_args(["friedrichs", "membership", "nowhere", "0"]), EXIT_ERROR);
        assert_eq!(main_with_args(["friedrichs", "verify", "bogus", "pi:2"]), EXIT_ERROR);
        assert_eq!(main_with_args(["friedrichs", "fibers", "pi:2", "--at", "0,-0.25"]), EXIT_OK);
    }

    #[test]
    fn csv_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let r = verify::check_fiber_counts(&"Psi".parse().unwrap(), 5, 1).unwrap();
        append_csv(&p, std::slice::from_ref(&r)).unwrap();
        append_csv(&p, &[r]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("fibers,pentablock,Psi,"));
    }
}
