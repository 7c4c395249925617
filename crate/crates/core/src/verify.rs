//! Numerical checks of the proper-map identities and the rank statements,
//! each producing an [`IdentityReport`].
//!
//! Two-sided identities draw their left and right hand sides from different
//! sample streams: stream 0 of the run seed for the target, stream 1 for the
//! source. Pointwise comparisons use interior points obtained by halving
//! sampled points toward the origin.

use crate::bergman::{
    bergman_project, build_basis, friedrichs_from_moments, friedrichs_rank, gram_moments, moments, FeatureSpace, Features,
    MonomialBasis, OrthonormalBasis, PIVOT_TOL, RANK_ONE_GAP,
};
use crate::domains::{sample, DomainKind, DomainSpec, SamplerConfig, Sequence};
use crate::error::{Error, Result};
use crate::maps::{ProperMapSpec, BRANCH_TOL};
use crate::numerics::{ComplexMatrix, C64};
use crate::quadrature::{self, batch_matrix_stderr, cached_samples, Weight};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::collections::HashMap;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

/// Residual floor below which relative residuals become absolute.
pub const ABS_FLOOR: f64 = 1e-8;
/// Tolerance of the pointwise two-pipeline identities.
pub const POINTWISE_TOL: f64 = 0.05;
/// Tolerance of the quadrature-free identities.
pub const EXACT_TOL: f64 = 1e-10;
/// Fiber residual bound.
pub const FIBER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    /// Reported without a verdict.
    Exploratory,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self != Verdict::Fail
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Exploratory => "EXPLORATORY",
        })
    }
}

/// One named sub-check of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

/// Outcome of one check.
///
/// When a report has several [`Part`]s with their own tolerances, `residuals`
/// holds each part's residual divided by its tolerance and `tolerance` is 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity: String,
    pub domain: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub map: Option<String>,
    pub degree: usize,
    pub samples: usize,
    pub seed: u64,
    pub sequence: String,
    pub points: usize,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub sigma: Vec<f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub parts: Vec<Part>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub extras: BTreeMap<String, f64>,
    pub provenance: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_ms: Option<u64>,
}

fn max_of(v: &[f64]) -> f64 {
    // NaN propagates so that it can never pass.
    v.iter().fold(0.0, |m: f64, &x| if x.is_nan() || m.is_nan() { f64::NAN } else { m.max(x) })
}

fn judge(residual: f64, tol: f64) -> Verdict {
    if residual <= tol {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

impl IdentityReport {
    fn new(identity: &str, domain: &DomainSpec, map: Option<&ProperMapSpec>, degree: usize, run: &RunSettings) -> Self {
        Self {
            identity: identity.into(),
            domain: domain.to_string(),
            map: map.map(|m| m.to_string()),
            degree,
            samples: run.samples,
            seed: run.seed,
            sequence: run.sequence.clone(),
            points: 0,
            residuals: Vec::new(),
            max_residual: 0.0,
            sigma: Vec::new(),
            tolerance: 0.0,
            verdict: Verdict::Fail,
            parts: Vec::new(),
            extras: BTreeMap::new(),
            provenance: Vec::new(),
            wall_time_ms: None,
        }
    }

    fn finish(mut self, residuals: Vec<f64>, tolerance: f64) -> Self {
        self.max_residual = max_of(&residuals);
        self.residuals = residuals;
        self.tolerance = tolerance;
        self.verdict = judge(self.max_residual, tolerance);
        self
    }

    fn finish_parts(mut self, parts: Vec<Part>) -> Self {
        let scaled: Vec<f64> = parts.iter().map(|p| p.max_residual / p.tolerance).collect();
        self.parts = parts;
        self.finish(scaled, 1.0)
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Sample budget and stream selection shared by every check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub samples: usize,
    pub seed: u64,
    /// `halton` or `pseudo`.
    pub sequence: String,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            samples: 1 << 20,
            seed: 1,
            sequence: "halton".into(),
        }
    }
}

impl RunSettings {
    pub fn new(samples: usize, seed: u64, sequence: &str) -> Result<Self> {
        let r = Self {
            samples,
            seed,
            sequence: sequence.into(),
        };
        r.stream(0)?.validate()?;
        Ok(r)
    }

    /// Independent sample stream number `k`.
    pub fn stream(&self, k: u64) -> Result<SamplerConfig> {
        let seed = self
            .seed
            .checked_add(k)
            .ok_or_else(|| Error::InvalidConfig("seed overflow".into()))?;
        Ok(SamplerConfig::new(self.samples, Sequence::from_seed(&self.sequence, seed)?))
    }

    fn point_seed(&self, salt: u64) -> u64 {
        self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt
    }
}

/// Uniform points of `d` halved toward the origin, kept when still inside.
pub fn half_radius_points(d: &DomainSpec, count: usize, seed: u64) -> Result<Vec<Vec<C64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bb = d.bounding_box().to_vec();
    let cap = (count as u64 + 1) * 1_000_000;
    let mut out = Vec::with_capacity(count);
    let mut draws = 0u64;
    while out.len() < count {
        draws += 1;
        if draws > cap {
            return Err(Error::SamplerExhausted {
                draws,
                accepted: out.len(),
                acceptance: out.len() as f64 / draws as f64,
            });
        }
        let z: Vec<C64> = bb
            .iter()
            .map(|&r| loop {
                let (x, y) = (rng.random_range(-r..r), rng.random_range(-r..r));
                if x * x + y * y < r * r {
                    break C64::new(x, y);
                }
            })
            .collect();
        if !d.contains_point(&z) {
            continue;
        }
        let h: Vec<C64> = z.iter().map(|v| v * 0.5).collect();
        if d.contains_point(&h) {
            out.push(h);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Target functions

/// A test function on the target of a map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TestFunction {
    /// `w^α`.
    Monomial(Vec<u32>),
    /// `conj(w_k)`.
    Conj(usize),
    /// `|w_k|²`.
    AbsSq(usize),
}

impl TestFunction {
    pub fn eval(&self, w: &[C64]) -> C64 {
        match self {
            TestFunction::Monomial(a) => a.iter().zip(w).map(|(&e, &x)| x.powu(e)).product(),
            TestFunction::Conj(k) => w[*k].conj(),
            TestFunction::AbsSq(k) => C64::new(w[*k].norm_sqr(), 0.0),
        }
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        let ok = match self {
            TestFunction::Monomial(a) => a.len() == n,
            TestFunction::Conj(k) | TestFunction::AbsSq(k) => *k < n,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("test function {self} does not fit dimension {n}")))
        }
    }
}

impl std::fmt::Display for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TestFunction::Monomial(a) => {
                let s: Vec<String> = a.iter().map(|e| e.to_string()).collect();
                write!(f, "mono:{}", s.join(","))
            }
            TestFunction::Conj(k) => write!(f, "conj:{k}"),
            TestFunction::AbsSq(k) => write!(f, "abs2:{k}"),
        }
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    /// `mono:a,b,…`, `conj:k` or `abs2:k` (coordinates counted from 0).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad test function '{s}'"));
        let (head, arg) = s.split_once(':').ok_or_else(bad)?;
        match head {
            "mono" => Ok(TestFunction::Monomial(
                arg.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?,
            )),
            "conj" => Ok(TestFunction::Conj(arg.parse().map_err(|_| bad())?)),
            "abs2" => Ok(TestFunction::AbsSq(arg.parse().map_err(|_| bad())?)),
            _ => Err(bad()),
        }
    }
}

// ---------------------------------------------------------------------------
// Bases matched across a map

/// Target monomials whose pullback under `map` has degree at most `source_degree`.
pub fn pullback_basis(map: &ProperMapSpec, source_degree: usize) -> Result<MonomialBasis> {
    let degs = map.component_degrees();
    let n = degs.len();
    let mut out = Vec::new();
    let mut cur = vec![0i32; n];
    fn rec(i: usize, left: usize, degs: &[usize], cur: &mut Vec<i32>, out: &mut Vec<Vec<i32>>) {
        if i == degs.len() {
            out.push(cur.clone());
            return;
        }
        let mut e = 0;
        while e * degs[i] <= left {
            cur[i] = e as i32;
            rec(i + 1, left - e * degs[i], degs, cur, out);
            e += 1;
        }
        cur[i] = 0;
    }
    rec(0, source_degree, &degs, &mut cur, &mut out);
    MonomialBasis::new(n, source_degree, out)
}

/// Unweighted target basis and `|Jφ|²`-weighted source basis, built on
/// independent streams, such that the pullback of the target span is exactly
/// the deck-invariant part of the source span.
struct MatchedBases {
    target: OrthonormalBasis,
    source: OrthonormalBasis,
}

fn matched_bases(map: &ProperMapSpec, degree: usize, run: &RunSettings) -> Result<Arc<MatchedBases>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<MatchedBases>>>> = OnceLock::new();
    let key = format!("{map}|{degree}|{}|{}|{}", run.samples, run.seed, run.sequence);
    let cache = CACHE.get_or_init(Default::default);
    if let Some(b) = cache.lock().unwrap().get(&key) {
        return Ok(b.clone());
    }
    let sd = degree * map.max_component_degree();
    let tspace = FeatureSpace::monomials(pullback_basis(map, sd)?);
    let sspace = FeatureSpace::monomials(build_basis(map.source(), sd));
    let target = OrthonormalBasis::from_moments(
        &gram_moments(map.target(), &tspace, &Weight::Unweighted, &run.stream(0)?)?,
        PIVOT_TOL,
    )?;
    let source = OrthonormalBasis::from_moments(
        &gram_moments(map.source(), &sspace, &Weight::JacobianSq(map.clone()), &run.stream(1)?)?,
        PIVOT_TOL,
    )?;
    let b = Arc::new(MatchedBases { target, source });
    cache.lock().unwrap().insert(key, b.clone());
    Ok(b)
}

fn relative(l: C64, r: C64, floor: f64) -> f64 {
    (l - r).norm() / l.norm().max(r.norm()).max(floor)
}

// ---------------------------------------------------------------------------
// Checks

/// `m ∫_{D₂} f dV = ∫_{D₁} (f∘φ)|Jφ|² dV` for every target monomial of degree
/// at most `degree`. Residuals are in units of the combined standard error;
/// the tolerance is 3.
pub fn check_change_of_variables(map: &ProperMapSpec, degree: usize, run: &RunSettings) -> Result<IdentityReport> {
    let basis = build_basis(map.target(), degree);
    let k = basis.len();
    let m = map.multiplicity() as f64;
    let tcfg = run.stream(0)?;
    let scfg = run.stream(1)?;
    let ts = cached_samples(map.target(), &tcfg)?;
    let ss = cached_samples(map.source(), &scfg)?;
    let one = |_: &[C64]| C64::new(1.0, 0.0);
    // projections give ∫ g·conj(f_a); with g = 1 conjugate afterwards
    let (lv, le) = quadrature::projections(map.target(), &ts, k, &Weight::Unweighted, |z, o| basis.eval_into(z, o), one)?;
    let pull = FeatureSpace {
        basis: basis.clone(),
        features: Features::Pullback(map.clone()),
    };
    let (rv, re) =
        quadrature::projections(map.source(), &ss, k, &Weight::JacobianSq(map.clone()), |z, o| pull.eval_into(z, o), one)?;
    let mut rep = IdentityReport::new("cov", map.target(), Some(map), degree, run);
    let mut res = Vec::with_capacity(k);
    let mut sig = Vec::with_capacity(k);
    let mut rel = 0.0f64;
    for a in 0..k {
        let l = lv[a].conj() * m;
        let r = rv[a].conj();
        let s = (m * le[a]).hypot(re[a]);
        let s = s.max(1e-14 * l.norm().max(r.norm()));
        res.push((l - r).norm() / s);
        sig.push(s);
        rel = rel.max(relative(l, r, ABS_FLOOR));
    }
    let vol_t = lv[0].re;
    let vol_s = rv[0].re / m;
    rep.points = ts.len() + ss.len();
    rep.sigma = sig;
    rep.extras.insert("max_relative_residual".into(), rel);
    rep.extras.insert("target_volume".into(), vol_t);
    rep.extras.insert("target_volume_via_source".into(), vol_s);
    rep.provenance = vec![quadrature::config_hash(map.target(), &tcfg), quadrature::config_hash(map.source(), &scfg)];
    Ok(rep.finish(res, 3.0))
}

/// `Q g = (1/m) Σ g∘δ_j` over the deck group.
pub fn symmetrize<G: Fn(&[C64]) -> C64>(map: &ProperMapSpec, g: G, z: &[C64]) -> C64 {
    let decks = map.deck_transforms();
    let mut dz = vec![C64::new(0.0, 0.0); z.len()];
    let mut acc = C64::new(0.0, 0.0);
    for d in &decks {
        d.apply_into(z, &mut dz);
        acc += g(&dz);
    }
    acc / decks.len() as f64
}

/// Idempotence of `Q` and `Q∘Γ_ν = Γ_ν` at `points` source points (no
/// quadrature), plus `⟨Qg, h⟩_ν = ⟨g, Qh⟩_ν` within 5 standard errors.
pub fn check_projection_formula(
    map: &ProperMapSpec,
    points: usize,
    self_adjoint: bool,
    run: &RunSettings,
) -> Result<IdentityReport> {
    let src = map.source();
    let tests = build_basis(src, 3);
    let tmon = build_basis(map.target(), 3);
    let pts = sample(src, &SamplerConfig::pseudo(points, run.point_seed(11)))?;
    let mut idem: f64 = 0.0;
    let mut fixed: f64 = 0.0;
    let mut w = vec![C64::new(0.0, 0.0); src.dimension()];
    for z in pts.points() {
        for a in 0..tests.len() {
            let g = |x: &[C64]| tests.eval(x)[a];
            let qg = symmetrize(map, g, z);
            let qqg = symmetrize(map, |x| symmetrize(map, g, x), z);
            idem = idem.max((qqg - qg).norm() / qg.norm().max(1.0));
        }
        for a in 0..tmon.len() {
            let f = |x: &[C64]| {
                let mut y = vec![C64::new(0.0, 0.0); x.len()];
                map.apply_into(x, &mut y);
                tmon.eval(&y)[a]
            };
            map.apply_into(z, &mut w);
            let direct = tmon.eval(&w)[a];
            let q = symmetrize(map, f, z);
            fixed = fixed.max((q - direct).norm() / direct.norm().max(1.0));
        }
    }
    let mut parts = vec![
        Part {
            name: "idempotence".into(),
            max_residual: idem,
            tolerance: EXACT_TOL,
            verdict: judge(idem, EXACT_TOL),
        },
        Part {
            name: "fixes_pullbacks".into(),
            max_residual: fixed,
            tolerance: EXACT_TOL,
            verdict: judge(fixed, EXACT_TOL),
        },
    ];
    let mut rep = IdentityReport::new("projection", src, Some(map), 3, run);
    rep.points = pts.len();
    if self_adjoint {
        let g = build_basis(src, 2);
        let k = g.len();
        let cfg = run.stream(1)?;
        let s = cached_samples(src, &cfg)?;
        let space = FeatureSpace {
            basis: g.clone(),
            features: Features::Symmetrized(map.clone()),
        };
        let mm = quadrature::moment_matrices_with(src, &s, 2 * k, &Weight::JacobianSq(map.clone()), |z, out| {
            g.eval_into(z, &mut out[..k]);
            space.eval_into(z, &mut out[k..]);
        }, false)?;
        let diff = |gm: &ComplexMatrix| ComplexMatrix::from_fn(k, k, |i, j| gm[(k + i, j)] - gm[(i, k + j)]);
        let d = diff(&mm.gram);
        let derr = batch_matrix_stderr(&mm.gram_batches.iter().map(diff).collect::<Vec<_>>());
        let mut z: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                let e = derr[i * k + j].max(1e-14 * mm.gram[(i, i)].norm());
                z = z.max(d[(i, j)].norm() / e);
            }
        }
        parts.push(Part {
            name: "self_adjoint".into(),
            max_residual: z,
            tolerance: 5.0,
            verdict: judge(z, 5.0),
        });
        rep.provenance.push(quadrature::config_hash(src, &cfg));
    }
    Ok(rep.finish_parts(parts))
}

/// `K_{D₂}(φz, φw) = Σ_j K^ν_{D₁}(δ_j z, w)` at `pairs` interior pairs.
pub fn check_kernel_transform(map: &ProperMapSpec, degree: usize, pairs: usize, run: &RunSettings) -> Result<IdentityReport> {
    let b = matched_bases(map, degree, run)?;
    let pts = half_radius_points(map.source(), 2 * pairs, run.point_seed(23))?;
    let decks = map.deck_transforms();
    let mut res = Vec::with_capacity(pairs);
    let mut lhs_abs = Vec::with_capacity(pairs);
    for p in pts.chunks(2) {
        let (z, w) = (&p[0], &p[1]);
        let (fz, fw) = (map.apply(z)?, map.apply(w)?);
        let l = b.target.kernel(&fz, &fw);
        let r: C64 = decks.iter().map(|d| b.source.kernel(&d.apply(z), w)).sum();
        res.push(relative(l, r, ABS_FLOOR));
        lhs_abs.push(l.norm());
    }
    let mut rep = IdentityReport::new("kernel-transform", map.target(), Some(map), degree, run);
    rep.points = pairs;
    rep.sigma = lhs_abs;
    rep.extras.insert("target_basis_size".into(), b.target.len() as f64);
    rep.extras.insert("source_basis_size".into(), b.source.len() as f64);
    rep.provenance = vec![b.target.provenance.clone(), b.source.provenance.clone()];
    Ok(rep.finish(res, POINTWISE_TOL))
}

/// `B_{D₂}(g)(ζ) = (1/m) Σ_j B^ν_{D₁}(g∘φ)(φʲ(ζ))` at `points` interior points.
///
/// Residuals are relative to `max(|LHS|, |RHS|, ‖g‖)` with `‖g‖` the root mean
/// square of `g` over the target, so that functions whose projection vanishes
/// are compared on the scale of `g`.
pub fn check_bergman_projection_relation(
    map: &ProperMapSpec,
    g: &TestFunction,
    degree: usize,
    points: usize,
    run: &RunSettings,
) -> Result<IdentityReport> {
    g.check_dim(map.dimension())?;
    let b = matched_bases(map, degree, run)?;
    let tcfg = run.stream(0)?;
    let scfg = run.stream(1)?;
    let gt = |w: &[C64]| g.eval(w);
    let gs = |z: &[C64]| {
        let mut w = vec![C64::new(0.0, 0.0); z.len()];
        map.apply_into(z, &mut w);
        g.eval(&w)
    };
    let lp = bergman_project(&b.target, gt, &tcfg)?;
    let rp = bergman_project(&b.source, gs, &scfg)?;
    let norm = quadrature::integrate(map.target(), |w| C64::new(g.eval(w).norm_sqr(), 0.0), &Weight::Unweighted, &tcfg)?;
    let vol = quadrature::volume(map.target(), &tcfg)?;
    let rms = (norm.value.re / vol.value.re).sqrt();
    let pts = half_radius_points(map.source(), points, run.point_seed(37))?;
    let m = map.multiplicity() as f64;
    let mut res = Vec::with_capacity(points);
    let mut worst_fiber: f64 = 0.0;
    for z in &pts {
        let zeta = map.apply(z)?;
        let fiber = map.preimages(&zeta, FIBER_TOL)?;
        worst_fiber = worst_fiber.max(fiber.max_residual);
        let l = lp.eval(&b.target, &zeta);
        let r: C64 = fiber.preimages.iter().map(|p| rp.eval(&b.source, p)).sum::<C64>() / m;
        let floor = rms.max(ABS_FLOOR);
        let mut e = relative(l, r, floor);
        if let TestFunction::Monomial(_) = g {
            // holomorphic g is fixed by both projections
            let exact = g.eval(&zeta);
            e = e.max(relative(l, exact, floor)).max(relative(r, exact, floor));
        }
        res.push(e);
    }
    let mut rep = IdentityReport::new("bergman-projection", map.target(), Some(map), degree, run);
    rep.points = points;
    rep.extras.insert("rms_g".into(), rms);
    rep.extras.insert("max_fiber_residual".into(), worst_fiber);
    rep.provenance = vec![b.target.provenance.clone(), b.source.provenance.clone()];
    rep.identity = format!("bergman-projection[{g}]");
    Ok(rep.finish(res, POINTWISE_TOL))
}

/// Rank of the Friedrichs matrix on a Reinhardt domain predicted from the
/// moment table: `∫ z^α z^β dV ≠ 0` iff `α + β = 0`, so the rank counts the
/// exponents whose negatives are also in the basis.
pub fn reinhardt_moment_rank(basis: &MonomialBasis) -> usize {
    let ex = basis.exponents();
    ex.iter()
        .filter(|a| {
            let neg: Vec<i32> = a.iter().map(|x| -x).collect();
            ex.contains(&neg)
        })
        .count()
}

/// What a Friedrichs run is expected to show.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankExpectation {
    RankOne,
    Exactly(usize),
    AtLeast(usize),
    Open,
}

pub fn rank_expectation(d: &DomainSpec, degree: usize) -> RankExpectation {
    match d.kind() {
        DomainKind::Annulus(_) => RankExpectation::Exactly(2 * degree + 1),
        DomainKind::Hartogs { .. } => RankExpectation::AtLeast(2),
        DomainKind::ExtSymmPolydisc(_) => RankExpectation::Open,
        _ => RankExpectation::RankOne,
    }
}

/// Unweighted orthonormal basis, Friedrichs matrix and rank verdict on `d`.
pub fn run_friedrichs_experiment(
    d: &DomainSpec,
    degree: usize,
    tau: f64,
    exploratory: bool,
    run: &RunSettings,
) -> Result<IdentityReport> {
    let expect = rank_expectation(d, degree);
    if expect == RankExpectation::Open && !exploratory {
        return Err(Error::InvalidConfig(format!("{d} is exploratory; pass --exploratory")));
    }
    let space = FeatureSpace::monomials(build_basis(d, degree));
    let cfg = run.stream(0)?;
    let m = moments(d, &space, &Weight::Unweighted, &cfg)?;
    let onb = OrthonormalBasis::from_moments(&m, PIVOT_TOL)?;
    let fm = friedrichs_from_moments(&onb, &m)?;
    let v = friedrichs_rank(&fm, tau);
    let mut rep = IdentityReport::new("friedrichs", d, None, degree, run);
    rep.points = m.mm.samples_used;
    rep.sigma = fm.singulars.values().to_vec();
    rep.provenance = vec![m.provenance.clone()];
    rep.extras.insert("rank".into(), v.rank as f64);
    rep.extras.insert("sigma2_over_sigma1".into(), v.ratio);
    rep.extras.insert("tau".into(), tau);
    rep.extras.insert("basis_size".into(), space.len() as f64);
    rep.extras.insert("retained".into(), onb.len() as f64);
    if matches!(d.kind(), DomainKind::Annulus(_) | DomainKind::Hartogs { .. }) {
        rep.extras.insert("moment_table_rank".into(), reinhardt_moment_rank(&space.basis) as f64);
    }
    Ok(match expect {
        RankExpectation::RankOne => rep.finish(vec![v.ratio], RANK_ONE_GAP),
        RankExpectation::Exactly(r) => rep.finish(vec![(v.rank as f64 - r as f64).abs()], 0.0),
        RankExpectation::AtLeast(r) => rep.finish(vec![(r as f64 - v.rank as f64).max(0.0)], 0.0),
        RankExpectation::Open => {
            let mut rep = rep.finish(vec![v.ratio], RANK_ONE_GAP);
            rep.verdict = Verdict::Exploratory;
            rep
        }
    })
}

/// Rank of `B_jk = ∫ e_j e_k ν dV` for a `ν`-orthonormal basis of the
/// deck-invariant polynomials on the source.
pub fn check_weighted_rankone(map: &ProperMapSpec, degree: usize, tau: f64, run: &RunSettings) -> Result<IdentityReport> {
    let src = map.source();
    if !src.is_circular_with_origin() {
        return Err(Error::InvalidConfig(format!("{src} is not circular around 0")));
    }
    let space = FeatureSpace {
        basis: build_basis(src, degree),
        features: Features::Symmetrized(map.clone()),
    };
    let cfg = run.stream(1)?;
    let m = moments(src, &space, &Weight::JacobianSq(map.clone()), &cfg)?;
    let onb = OrthonormalBasis::from_moments(&m, PIVOT_TOL)?;
    let fm = friedrichs_from_moments(&onb, &m)?;
    let v = friedrichs_rank(&fm, tau);
    let mut rep = IdentityReport::new("weighted-rankone", src, Some(map), degree, run);
    rep.points = m.mm.samples_used;
    rep.sigma = fm.singulars.values().to_vec();
    rep.provenance = vec![m.provenance.clone()];
    rep.extras.insert("rank".into(), v.rank as f64);
    rep.extras.insert("retained".into(), onb.len() as f64);
    rep.extras.insert("tau".into(), tau);
    let residual = if v.rank == 1 { v.ratio } else { f64::INFINITY };
    Ok(rep.finish(vec![residual], RANK_ONE_GAP))
}

/// Cross-degree Gram entries `|G_ab| / stderr_ab` for `deg α ≠ deg β`.
pub fn check_homogeneous_orthogonality(
    d: &DomainSpec,
    weight: &Weight,
    degree: usize,
    run: &RunSettings,
) -> Result<IdentityReport> {
    let basis = build_basis(d, degree);
    let space = FeatureSpace::monomials(basis.clone());
    let cfg = run.stream(match weight {
        Weight::Unweighted => 0,
        Weight::JacobianSq(_) => 1,
    })?;
    let m = moments(d, &space, weight, &cfg)?;
    let mut res = Vec::new();
    for a in 0..basis.len() {
        for b in a + 1..basis.len() {
            if basis.total_degree(a) != basis.total_degree(b) {
                let e = m.mm.gram_err(a, b).max(1e-14 * (m.mm.gram[(a, a)].re * m.mm.gram[(b, b)].re).sqrt());
                res.push(m.mm.gram[(a, b)].norm() / e);
            }
        }
    }
    let mut rep = IdentityReport::new("orthogonality", d, None, degree, run);
    if let Weight::JacobianSq(map) = weight {
        rep.map = Some(map.to_string());
    }
    rep.points = m.mm.samples_used;
    rep.provenance = vec![m.provenance];
    Ok(rep.finish(res, 5.0))
}

/// Preimages of `φ(z)` for `count` random source points `z`: exactly `m`
/// distinct points, each mapped back within [`FIBER_TOL`], one of them `z`.
pub fn check_fiber_counts(map: &ProperMapSpec, count: usize, seed: u64) -> Result<IdentityReport> {
    let pts = sample(map.source(), &SamplerConfig::pseudo(count, seed))?;
    let m = map.multiplicity();
    let mut res = Vec::with_capacity(count);
    let mut wrong = 0usize;
    for z in pts.points() {
        let w = map.apply(z)?;
        let r = match map.preimages(&w, FIBER_TOL) {
            Ok(f) => {
                let mut distinct: Vec<&Vec<C64>> = Vec::new();
                for p in &f.preimages {
                    if !distinct.iter().any(|q| dist(q, p) < BRANCH_TOL) {
                        distinct.push(p);
                    }
                }
                if distinct.len() != m {
                    wrong += 1;
                }
                let back = f.preimages.iter().map(|p| dist(p, z)).fold(f64::INFINITY, f64::min);
                f.max_residual.max(back)
            }
            Err(Error::RootRefinementFailed { residual, .. }) => residual,
            Err(e) => return Err(e),
        };
        res.push(r);
    }
    let mut rep = IdentityReport::new(
        "fibers",
        map.target(),
        Some(map),
        0,
        &RunSettings {
            samples: count,
            seed,
            sequence: "pseudo".into(),
        },
    );
    rep.points = count;
    rep.extras.insert("multiplicity".into(), m as f64);
    rep.extras.insert("wrong_counts".into(), wrong as f64);
    let mut rep = rep.finish(res, FIBER_TOL);
    if wrong > 0 {
        rep.verdict = Verdict::Fail;
    }
    Ok(rep)
}

fn dist(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Disc closed forms: `‖zᵏ‖² = π/(k+1)` for `k ≤ 8` (residuals in stderr,
/// tolerance 3) and the degree-20 kernel against `1/(π(1 − z w̄)²)` on
/// `|z|, |w| ≤ 1/2` (relative, tolerance 1e-2).
pub fn check_disc_suite(run: &RunSettings) -> Result<IdentityReport> {
    let d: DomainSpec = "disc".parse()?;
    let cfg = run.stream(0)?;
    let norms = moments(&d, &FeatureSpace::monomials(build_basis(&d, 8)), &Weight::Unweighted, &cfg)?;
    let mut zs: Vec<f64> = Vec::new();
    for k in 0..=8 {
        let e = norms.mm.gram_err(k, k).max(1e-15);
        zs.push((norms.mm.gram[(k, k)].re - PI / (k as f64 + 1.0)).abs() / e);
    }
    let z_max = max_of(&zs);
    let space = FeatureSpace::monomials(build_basis(&d, 20));
    let onb = OrthonormalBasis::from_moments(&moments(&d, &space, &Weight::Unweighted, &cfg)?, PIVOT_TOL)?;
    let mut rng = ChaCha8Rng::seed_from_u64(run.point_seed(41));
    let mut kr: f64 = 0.0;
    for _ in 0..20 {
        let mut pt = || {
            let r = 0.5 * rng.random::<f64>().sqrt();
            C64::from_polar(r, rng.random::<f64>() * 2.0 * PI)
        };
        let (z, w) = (pt(), pt());
        let truth = 1.0 / (PI * (C64::new(1.0, 0.0) - z * w.conj()).powi(2));
        kr = kr.max(relative(onb.kernel(&[z], &[w]), truth, ABS_FLOOR));
    }
    for r in [0.5, -0.5] {
        let z = C64::new(r, 0.0);
        let truth = 1.0 / (PI * (1.0 - r * r) * (1.0 - r * r));
        kr = kr.max(relative(onb.kernel(&[z], &[z]), C64::new(truth, 0.0), ABS_FLOOR));
    }
    let mut rep = IdentityReport::new("disc-suite", &d, None, 20, run);
    rep.points = norms.mm.samples_used;
    rep.sigma = (0..=8).map(|k| norms.mm.gram_err(k, k)).collect();
    rep.provenance = vec![norms.provenance.clone(), onb.provenance.clone()];
    Ok(rep.finish_parts(vec![
        Part {
            name: "monomial_norms".into(),
            max_residual: z_max,
            tolerance: 3.0,
            verdict: judge(z_max, 3.0),
        },
        Part {
            name: "kernel_closed_form".into(),
            max_residual: kr,
            tolerance: 1e-2,
            verdict: judge(kr, 1e-2),
        },
    ]))
}

/// Volumes of disc, polydisc(2) and ball(2) against `π`, `π²`, `π²/2`;
/// residuals in stderr, tolerance 3.
pub fn check_volumes(run: &RunSettings) -> Result<IdentityReport> {
    let cases = [("disc", PI), ("polydisc:2", PI * PI), ("ball:2", PI * PI / 2.0)];
    let cfg = run.stream(0)?;
    let mut res = Vec::new();
    let mut sig = Vec::new();
    let mut rep = IdentityReport::new("volumes", &"disc".parse()?, None, 0, run);
    for (name, truth) in cases {
        let d: DomainSpec = name.parse()?;
        let v = quadrature::volume(&d, &cfg)?;
        let s = v.stderr_re;
        let diff = (v.value.re - truth).abs();
        res.push(if s > 0.0 { diff / s } else if diff < 1e-12 * truth { 0.0 } else { f64::INFINITY });
        sig.push(s);
        rep.extras.insert(format!("volume[{name}]"), v.value.re);
        rep.provenance.push(quadrature::config_hash(&d, &cfg));
    }
    rep.domain = cases.iter().map(|c| c.0).collect::<Vec<_>>().join(",");
    rep.sigma = sig;
    rep.points = run.samples * cases.len();
    Ok(rep.finish(res, 3.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(s: &str) -> ProperMapSpec {
        s.parse().unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn quick() -> RunSettings {
        RunSettings::new(1 << 14, 3, "halton").unwrap()
    }

    #[test]
    fn verdict_follows_tolerance() {
        let d: DomainSpec = "disc".parse().unwrap();
        let r = IdentityReport::new("x", &d, None, 0, &quick());
        assert_eq!(r.clone().finish(vec![0.1, 0.2], 0.2).verdict, Verdict::Pass);
        assert_eq!(r.clone().finish(vec![0.1, 0.21], 0.2).verdict, Verdict::Fail);
        assert_eq!(r.finish(vec![f64::NAN, 0.0], 1.0).verdict, Verdict::Fail);
    }

    #[test]
    fn symmetrization_examples() {
        let z = [c(0.3, 0.1), c(-0.2, 0.4), c(0.1, -0.25)];
        let q = symmetrize(&map("pi:2"), |x| x[0], &z[..2]);
        assert!((q - (z[0] + z[1]) / 2.0).norm() < 1e-15);
        assert!(symmetrize(&map("Phi"), |x| x[2], &z).norm() < 1e-15);
        let q = symmetrize(&map("Psi"), |x| x[0], &z);
        assert!((q - (z[0] + z[1]) / 2.0).norm() < 1e-15);
    }

    #[test]
    fn pullback_basis_weighted_degrees() {
        // s^a p^b with a + 2b ≤ 4
        let b = pullback_basis(&map("pi:2"), 4).unwrap();
        assert_eq!(b.len(), 5 + 3 + 1);
        let b = pullback_basis(&map("Phi"), 2).unwrap();
        assert_eq!(b.len(), 6 + 1);
    }

    #[test]
    fn test_function_parse() {
        let f: TestFunction = "mono:1,2".parse().unwrap();
        assert_eq!(f, TestFunction::Monomial(vec![1, 2]));
        assert_eq!(f.to_string().parse::<TestFunction>().unwrap(), f);
        assert_eq!("conj:0".parse::<TestFunction>().unwrap(), TestFunction::Conj(0));
        assert!("mono:".parse::<TestFunction>().is_err());
        assert!("sin:1".parse::<TestFunction>().is_err());
        let w = [c(0.5, 0.5), c(0.0, 1.0)];
        assert!((TestFunction::AbsSq(0).eval(&w) - c(0.5, 0.0)).norm() < 1e-15);
        assert!((f.eval(&w) - w[0] * w[1] * w[1]).norm() < 1e-15);
    }

    #[test]
    fn half_radius_points_are_interior() {
        let d: DomainSpec = "tetrablock".parse().unwrap();
        let p = half_radius_points(&d, 50, 9).unwrap();
        assert_eq!(p.len(), 50);
        for z in &p {
            let doubled: Vec<C64> = z.iter().map(|v| v * 2.0).collect();
            assert!(d.contains_point(z) && d.contains_point(&doubled));
        }
        assert_eq!(p, half_radius_points(&d, 50, 9).unwrap());
    }

    #[test]
    fn moment_table_rank_oracle() {
        let d: DomainSpec = "annulus:0.5".parse().unwrap();
        assert_eq!(reinhardt_moment_rank(&build_basis(&d, 3)), 7);
        let h: DomainSpec = "hartogs:2".parse().unwrap();
        // 1, w·w⁻¹ and w⁻¹·w
        assert_eq!(reinhardt_moment_rank(&build_basis(&h, 3)), 3);
        assert_eq!(reinhardt_moment_rank(&build_basis(&"disc".parse().unwrap(), 5)), 1);
    }

    #[test]
    fn projection_formula_quadrature_free() {
        for m in ["pi:2", "pi:3", "Phi", "Psi"] {
            let r = check_projection_formula(&map(m), 500, false, &quick()).unwrap();
            assert_eq!(r.verdict, Verdict::Pass, "{m}: {:?}", r.parts);
        }
    }

    #[test]
    fn projection_self_adjoint() {
        let r = check_projection_formula(&map("Psi"), 50, true, &quick()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.parts);
        assert_eq!(r.parts.len(), 3);
    }

    #[test]
    fn fiber_counts() {
        for m in ["Phi", "Psi", "pi:2", "pi:3"] {
            let r = check_fiber_counts(&map(m), 100, 5).unwrap();
            assert_eq!(r.verdict, Verdict::Pass, "{m}: {}", r.max_residual);
        }
    }

    #[test]
    fn change_of_variables_pi2() {
        let r = check_change_of_variables(&map("pi:2"), 2, &quick()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.residuals);
        assert!((r.extras["target_volume_via_source"] - PI * PI / 2.0).abs() < 0.05);
    }

    #[test]
    fn weighted_rankone_degree_zero() {
        let r = check_weighted_rankone(&map("pi:2"), 0, 0.1, &quick()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.sigma.len(), 1);
    }

    #[test]
    fn exploratory_needs_flag() {
        let d: DomainSpec = "Gtilde:2".parse().unwrap();
        assert!(run_friedrichs_experiment(&d, 1, 0.1, false, &quick()).is_err());
        let r = run_friedrichs_experiment(&d, 1, 0.1, true, &quick()).unwrap();
        assert_eq!(r.verdict, Verdict::Exploratory);
    }

    #[test]
    fn report_json_round_trip() {
        let r = check_fiber_counts(&map("Psi"), 10, 1).unwrap();
        let back: IdentityReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
