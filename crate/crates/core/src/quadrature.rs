//! Monte Carlo and quasi-Monte Carlo integration over sampled domains.
//!
//! Every estimate is a sum over the accepted points of one [`SampleSet`],
//! scaled by `box_volume / total_draws`. Sums are formed per batch (16
//! consecutive slices of the accepted stream) from fixed chunks of 4096
//! points; inside a chunk, plain sums over 64 points are folded into a
//! compensated total. Chunk totals are merged pairwise in index order, so the
//! result is bitwise independent of the number of worker threads.

use crate::domains::{sample, DomainSpec, SampleSet, SamplerConfig, Sequence};
use crate::error::{Error, Result};
use crate::maps::ProperMapSpec;
use crate::numerics::{ComplexMatrix, C64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

pub const BATCHES: usize = 16;
const CHUNK: usize = 4096;
const MICRO: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureEstimate {
    pub value: C64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub samples_used: usize,
    pub acceptance: f64,
}

impl QuadratureEstimate {
    /// Standard error of the complex value, `√(σ_re² + σ_im²)`.
    pub fn stderr(&self) -> f64 {
        self.stderr_re.hypot(self.stderr_im)
    }
}

/// Integration weight on the source of a proper map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Weight {
    Unweighted,
    /// `ν(z) = |Jφ(z)|²`.
    JacobianSq(ProperMapSpec),
}

impl Weight {
    #[inline]
    pub fn eval(&self, z: &[C64]) -> f64 {
        match self {
            Weight::Unweighted => 1.0,
            Weight::JacobianSq(m) => m.jacobian(z).norm_sqr(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Weight::Unweighted => "unweighted".into(),
            Weight::JacobianSq(m) => format!("jacobian_sq:{m}"),
        }
    }
}

// ---------------------------------------------------------------------------
// Deterministic reduction

#[derive(Clone)]
struct Compensated {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl Compensated {
    fn new(width: usize) -> Self {
        Self {
            sum: vec![0.0; width],
            comp: vec![0.0; width],
        }
    }

    /// Neumaier addition of a whole vector.
    fn add(&mut self, x: &[f64]) {
        for ((s, c), &v) in self.sum.iter_mut().zip(self.comp.iter_mut()).zip(x) {
            let t = *s + v;
            if s.abs() >= v.abs() {
                *c += (*s - t) + v;
            } else {
                *c += (v - t) + *s;
            }
            *s = t;
        }
    }

    fn total(&self) -> Vec<f64> {
        self.sum.iter().zip(&self.comp).map(|(s, c)| s + c).collect()
    }
}

fn pairwise_merge(mut parts: Vec<Vec<f64>>, width: usize) -> Vec<f64> {
    if parts.is_empty() {
        return vec![0.0; width];
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap()
}

/// Accepted-point index range of batch `k`.
pub fn batch_range(n: usize, k: usize) -> (usize, usize) {
    (k * n / BATCHES, (k + 1) * n / BATCHES)
}

/// Per-batch sums of a vector-valued per-point contribution.
///
/// `add(state, z, acc)` must add the contribution of point `z` into `acc`
/// (length `width`); `init` builds per-chunk scratch state.
pub(crate) fn batch_sums<S, I, A>(s: &SampleSet, width: usize, init: I, add: A) -> Result<Vec<Vec<f64>>>
where
    I: Fn() -> S + Sync,
    A: Fn(&mut S, &[C64], &mut [f64]) + Sync,
{
    let n = s.len();
    let mut jobs = Vec::new();
    for k in 0..BATCHES {
        let (a, b) = batch_range(n, k);
        let mut c = a;
        while c < b {
            jobs.push((k, c, (c + CHUNK).min(b)));
            c += CHUNK;
        }
    }
    let chunk_totals: Vec<(usize, Vec<f64>)> = jobs
        .par_iter()
        .map(|&(k, a, b)| {
            let mut state = init();
            let mut acc = Compensated::new(width);
            let mut micro = vec![0.0; width];
            let mut i = a;
            while i < b {
                micro.iter_mut().for_each(|x| *x = 0.0);
                for j in i..(i + MICRO).min(b) {
                    add(&mut state, s.point(j), &mut micro);
                }
                acc.add(&micro);
                i += MICRO;
            }
            (k, acc.total())
        })
        .collect();
    if chunk_totals.iter().any(|(_, t)| t.iter().any(|x| !x.is_finite())) {
        // Locate the offending point for the error message.
        let mut state = init();
        let mut tmp = vec![0.0; width];
        for j in 0..n {
            tmp.iter_mut().for_each(|x| *x = 0.0);
            add(&mut state, s.point(j), &mut tmp);
            if tmp.iter().any(|x| !x.is_finite()) {
                return Err(Error::IntegrandNaN {
                    point: format!("{:?}", s.point(j)),
                });
            }
        }
        return Err(Error::NonFinite("integrand sum overflowed".into()));
    }
    let mut per_batch: Vec<Vec<Vec<f64>>> = vec![Vec::new(); BATCHES];
    for (k, t) in chunk_totals {
        per_batch[k].push(t);
    }
    Ok(per_batch.into_iter().map(|p| pairwise_merge(p, width)).collect())
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

/// Scales raw batch sums into per-batch integral estimates.
fn batch_estimates(s: &SampleSet, sums: &[Vec<f64>], idx: usize) -> Vec<f64> {
    (0..BATCHES)
        .map(|k| {
            let (a, b) = batch_range(s.len(), k);
            if b == a {
                0.0
            } else {
                s.box_volume() * sums[k][idx] / s.draws_between(a, b) as f64
            }
        })
        .collect()
}

/// Standard error of component `idx` from the spread of batch estimates.
fn batch_stderr(s: &SampleSet, sums: &[Vec<f64>], idx: usize) -> f64 {
    let est = batch_estimates(s, sums, idx);
    mean_sd(&est).1 / (BATCHES as f64).sqrt()
}

// ---------------------------------------------------------------------------
// Sample cache

static MEMORY: OnceLock<Mutex<MemoryCache>> = OnceLock::new();
static CACHE_DIR: OnceLock<Mutex<Option<PathBuf>>> = OnceLock::new();
const MEMORY_BUDGET: usize = 1 << 30;

#[derive(Default)]
struct MemoryCache {
    entries: HashMap<String, Arc<SampleSet>>,
    order: Vec<String>,
    bytes: usize,
}

fn set_bytes(s: &SampleSet) -> usize {
    s.len() * (s.dim() * 16 + 8)
}

/// Overrides the on-disk cache root (otherwise `FRIEDRICHS_CACHE_DIR`).
pub fn set_cache_dir(dir: Option<PathBuf>) {
    *CACHE_DIR.get_or_init(|| Mutex::new(None)).lock().unwrap() = dir;
}

fn cache_dir() -> Option<PathBuf> {
    if let Some(d) = CACHE_DIR.get_or_init(|| Mutex::new(None)).lock().unwrap().clone() {
        return Some(d);
    }
    std::env::var_os("FRIEDRICHS_CACHE_DIR").map(PathBuf::from)
}

/// Content hash of a sampling request.
pub fn config_hash(d: &DomainSpec, cfg: &SamplerConfig) -> String {
    let mut h = Sha256::new();
    let (label, key) = match cfg.sequence {
        Sequence::Pseudo { seed } => ("pseudo", seed),
        Sequence::Halton { offset } => ("halton", offset),
    };
    h.update(format!("friedrichs-samples-v1|{d}|{label}|{key}|{}|{}", cfg.count, cfg.max_draws).as_bytes());
    hex::encode(h.finalize())
}

const MAGIC: &[u8; 8] = b"FRSAMP01";

#[derive(Serialize, Deserialize)]
struct DiskHeader {
    config_hash: String,
    domain: String,
    count: usize,
    sequence: Sequence,
    max_draws: u64,
    dim: usize,
    box_volume: f64,
}

fn write_disk(dir: &Path, hash: &str, s: &SampleSet) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let header = DiskHeader {
        config_hash: hash.to_string(),
        domain: s.domain().to_string(),
        count: s.len(),
        sequence: s.config().sequence,
        max_draws: s.config().max_draws,
        dim: s.dim(),
        box_volume: s.box_volume(),
    };
    let meta = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(16 + meta.len() + set_bytes(s));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    buf.extend_from_slice(&meta);
    for &c in s.cumulative_draws() {
        buf.extend_from_slice(&c.to_le_bytes());
    }
    for z in s.raw_points() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(&buf)?;
    tmp.persist(dir.join(format!("{hash}.samples")))
        .map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn read_disk(path: &Path, hash: &str, cfg: &SamplerConfig) -> Option<SampleSet> {
    let mut f = std::fs::File::open(path).ok()?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf).ok()?;
    if buf.len() < 16 || &buf[..8] != MAGIC {
        return None;
    }
    let meta_len = u64::from_le_bytes(buf[8..16].try_into().ok()?) as usize;
    let header: DiskHeader = serde_json::from_slice(buf.get(16..16 + meta_len)?).ok()?;
    if header.config_hash != hash || header.count != cfg.count {
        return None;
    }
    let mut pos = 16 + meta_len;
    let n = header.count;
    if buf.len() != pos + n * 8 + n * header.dim * 16 {
        return None;
    }
    let mut cum = Vec::with_capacity(n);
    for _ in 0..n {
        cum.push(u64::from_le_bytes(buf[pos..pos + 8].try_into().ok()?));
        pos += 8;
    }
    let mut pts = Vec::with_capacity(n * header.dim);
    for _ in 0..n * header.dim {
        let re = f64::from_le_bytes(buf[pos..pos + 8].try_into().ok()?);
        let im = f64::from_le_bytes(buf[pos + 8..pos + 16].try_into().ok()?);
        pts.push(C64::new(re, im));
        pos += 16;
    }
    Some(SampleSet::from_parts(header.domain, *cfg, header.dim, pts, cum, header.box_volume))
}

/// Accepted points for `(d, cfg)`, from memory, disk, or a fresh run.
pub fn cached_samples(d: &DomainSpec, cfg: &SamplerConfig) -> Result<Arc<SampleSet>> {
    let hash = config_hash(d, cfg);
    let mem = MEMORY.get_or_init(|| Mutex::new(MemoryCache::default()));
    if let Some(s) = mem.lock().unwrap().entries.get(&hash) {
        return Ok(s.clone());
    }
    let dir = cache_dir();
    let from_disk = dir
        .as_ref()
        .and_then(|dir| read_disk(&dir.join(format!("{hash}.samples")), &hash, cfg));
    let set = match from_disk {
        Some(s) => s,
        None => {
            let s = sample(d, cfg)?;
            if let Some(dir) = &dir {
                write_disk(dir, &hash, &s)?;
            }
            s
        }
    };
    let set = Arc::new(set);
    let mut m = mem.lock().unwrap();
    if !m.entries.contains_key(&hash) {
        let bytes = set_bytes(&set);
        while m.bytes + bytes > MEMORY_BUDGET && !m.order.is_empty() {
            let old = m.order.remove(0);
            if let Some(s) = m.entries.remove(&old) {
                m.bytes -= set_bytes(&s);
            }
        }
        m.bytes += bytes;
        m.order.push(hash.clone());
        m.entries.insert(hash, set.clone());
    }
    Ok(set)
}

/// Drops every in-memory sample set.
pub fn clear_memory_cache() {
    if let Some(m) = MEMORY.get() {
        *m.lock().unwrap() = MemoryCache::default();
    }
}

// ---------------------------------------------------------------------------
// Estimators

fn check_nonempty(d: &DomainSpec, s: &SampleSet) -> Result<()> {
    if s.is_empty() || s.acceptance() == 0.0 {
        return Err(Error::ZeroAcceptance(d.to_string()));
    }
    Ok(())
}

/// Volume as box volume times acceptance rate.
pub fn volume_of(d: &DomainSpec, s: &SampleSet) -> Result<QuadratureEstimate> {
    check_nonempty(d, s)?;
    let p = s.acceptance();
    let value = s.box_volume() * p;
    let stderr = match s.config().sequence {
        Sequence::Pseudo { .. } => s.box_volume() * (p * (1.0 - p) / s.total_draws() as f64).sqrt(),
        Sequence::Halton { .. } => {
            let est: Vec<f64> = (0..BATCHES)
                .map(|k| {
                    let (a, b) = batch_range(s.len(), k);
                    s.box_volume() * (b - a) as f64 / s.draws_between(a, b).max(1) as f64
                })
                .collect();
            mean_sd(&est).1 / (BATCHES as f64).sqrt()
        }
    };
    Ok(QuadratureEstimate {
        value: C64::new(value, 0.0),
        stderr_re: stderr,
        stderr_im: 0.0,
        samples_used: s.len(),
        acceptance: p,
    })
}

pub fn volume(d: &DomainSpec, cfg: &SamplerConfig) -> Result<QuadratureEstimate> {
    volume_of(d, &*cached_samples(d, cfg)?)
}

/// `∫ f · w dV` over the given sample set.
pub fn integrate_on<F>(d: &DomainSpec, s: &SampleSet, f: F, w: &Weight) -> Result<QuadratureEstimate>
where
    F: Fn(&[C64]) -> C64 + Sync,
{
    check_nonempty(d, s)?;
    let sums = batch_sums(
        s,
        4,
        || (),
        |_, z, acc| {
            let v = f(z) * w.eval(z);
            acc[0] += v.re;
            acc[1] += v.im;
            acc[2] += v.re * v.re;
            acc[3] += v.im * v.im;
        },
    )?;
    let total = pairwise_merge(sums.clone(), 4);
    let draws = s.total_draws() as f64;
    let scale = s.box_volume() / draws;
    let value = C64::new(total[0] * scale, total[1] * scale);
    let (stderr_re, stderr_im) = match s.config().sequence {
        Sequence::Pseudo { .. } => {
            // iid over raw draws: the integrand is f·w on accepted draws, 0 elsewhere.
            let se = |m1: f64, m2: f64| {
                let mean = m1 / draws;
                let var = (m2 / draws - mean * mean).max(0.0);
                s.box_volume() * (var / draws).sqrt()
            };
            (se(total[0], total[2]), se(total[1], total[3]))
        }
        Sequence::Halton { .. } => (batch_stderr(s, &sums, 0), batch_stderr(s, &sums, 1)),
    };
    Ok(QuadratureEstimate {
        value,
        stderr_re,
        stderr_im,
        samples_used: s.len(),
        acceptance: s.acceptance(),
    })
}

pub fn integrate<F>(d: &DomainSpec, f: F, w: &Weight, cfg: &SamplerConfig) -> Result<QuadratureEstimate>
where
    F: Fn(&[C64]) -> C64 + Sync,
{
    integrate_on(d, &*cached_samples(d, cfg)?, f, w)
}

/// `⟨f, g⟩_w = ∫ f · conj(g) · w dV`.
pub fn inner_product<F, G>(d: &DomainSpec, f: F, g: G, w: &Weight, cfg: &SamplerConfig) -> Result<QuadratureEstimate>
where
    F: Fn(&[C64]) -> C64 + Sync,
    G: Fn(&[C64]) -> C64 + Sync,
{
    integrate(d, |z| f(z) * g(z).conj(), w, cfg)
}

/// Gram and bilinear moment matrices of a feature map, with batch stderr.
#[derive(Debug, Clone)]
pub struct MomentMatrices {
    /// `G_ab = ∫ f_a conj(f_b) w dV`.
    pub gram: ComplexMatrix,
    pub gram_stderr: Vec<f64>,
    /// `M_ab = ∫ f_a f_b w dV`.
    pub bilinear: ComplexMatrix,
    pub bilinear_stderr: Vec<f64>,
    /// Per-batch estimates of `gram` and `bilinear`, for propagating
    /// batch-means errors through linear transformations.
    pub gram_batches: Vec<ComplexMatrix>,
    pub bilinear_batches: Vec<ComplexMatrix>,
    pub samples_used: usize,
    pub acceptance: f64,
    /// False when only the Gram matrix was accumulated.
    pub has_bilinear: bool,
}

impl MomentMatrices {
    pub fn gram_err(&self, a: usize, b: usize) -> f64 {
        self.gram_stderr[a * self.gram.cols() + b]
    }

    pub fn bilinear_err(&self, a: usize, b: usize) -> f64 {
        self.bilinear_stderr[a * self.bilinear.cols() + b]
    }
}

/// Entrywise batch-means standard error of a family of 16 batch matrices.
pub fn batch_matrix_stderr(batches: &[ComplexMatrix]) -> Vec<f64> {
    let (r, c) = (batches[0].rows(), batches[0].cols());
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            let re: Vec<f64> = batches.iter().map(|b| b[(i, j)].re).collect();
            let im: Vec<f64> = batches.iter().map(|b| b[(i, j)].im).collect();
            let n = (batches.len() as f64).sqrt();
            out[i * c + j] = (mean_sd(&re).1 / n).hypot(mean_sd(&im).1 / n);
        }
    }
    out
}

/// Accumulates both moment matrices of `features` (k values per point) in one
/// pass. Standard errors come from the 16 batch means in both sampling modes.
pub fn moment_matrices<F>(d: &DomainSpec, s: &SampleSet, k: usize, w: &Weight, features: F) -> Result<MomentMatrices>
where
    F: Fn(&[C64], &mut [C64]) + Sync,
{
    moment_matrices_with(d, s, k, w, features, true)
}

/// Like [`moment_matrices`]; with `bilinear = false` only the Gram matrix is
/// accumulated and the bilinear fields are zero.
pub fn moment_matrices_with<F>(
    d: &DomainSpec,
    s: &SampleSet,
    k: usize,
    w: &Weight,
    features: F,
    bilinear: bool,
) -> Result<MomentMatrices>
where
    F: Fn(&[C64], &mut [C64]) + Sync,
{
    check_nonempty(d, s)?;
    let tri = k * (k + 1) / 2;
    // Layout: [G re/im upper triangle | M re/im upper triangle].
    let width = if bilinear { 4 * tri } else { 2 * tri };
    let sums = batch_sums(
        s,
        width,
        || (vec![C64::new(0.0, 0.0); k], vec![C64::new(0.0, 0.0); k]),
        |(f, wf), z, acc| {
            features(z, f);
            let wt = w.eval(z);
            for (a, b) in wf.iter_mut().zip(f.iter()) {
                *a = b * wt;
            }
            let (g, m) = acc.split_at_mut(2 * tri);
            let mut t = 0;
            for a in 0..k {
                let x = wf[a];
                if bilinear {
                    for y in &f[a..] {
                        // x·conj(y) and x·y
                        let (xr, xi, yr, yi) = (x.re, x.im, y.re, y.im);
                        g[2 * t] += xr * yr + xi * yi;
                        g[2 * t + 1] += xi * yr - xr * yi;
                        m[2 * t] += xr * yr - xi * yi;
                        m[2 * t + 1] += xi * yr + xr * yi;
                        t += 1;
                    }
                } else {
                    for y in &f[a..] {
                        let (xr, xi, yr, yi) = (x.re, x.im, y.re, y.im);
                        g[2 * t] += xr * yr + xi * yi;
                        g[2 * t + 1] += xi * yr - xr * yi;
                        t += 1;
                    }
                }
            }
        },
    )?;
    let mut sums = sums;
    if !bilinear {
        sums.iter_mut().for_each(|v| v.resize(4 * tri, 0.0));
    }
    let total = pairwise_merge(sums.clone(), 4 * tri);
    let scale = s.box_volume() / s.total_draws() as f64;
    let mut gram = ComplexMatrix::zeros(k, k);
    let mut bil = ComplexMatrix::zeros(k, k);
    let mut gerr = vec![0.0; k * k];
    let mut merr = vec![0.0; k * k];
    let mut t = 0;
    for a in 0..k {
        for b in a..k {
            let gv = C64::new(total[2 * t], total[2 * t + 1]) * scale;
            let mv = C64::new(total[2 * tri + 2 * t], total[2 * tri + 2 * t + 1]) * scale;
            let ge = batch_stderr(s, &sums, 2 * t).hypot(batch_stderr(s, &sums, 2 * t + 1));
            let me = batch_stderr(s, &sums, 2 * tri + 2 * t).hypot(batch_stderr(s, &sums, 2 * tri + 2 * t + 1));
            gram[(a, b)] = gv;
            gram[(b, a)] = gv.conj();
            bil[(a, b)] = mv;
            bil[(b, a)] = mv;
            gerr[a * k + b] = ge;
            gerr[b * k + a] = ge;
            merr[a * k + b] = me;
            merr[b * k + a] = me;
            t += 1;
        }
    }
    let mut gram_batches = Vec::with_capacity(BATCHES);
    let mut bilinear_batches = Vec::with_capacity(BATCHES);
    for (kb, sum) in sums.iter().enumerate() {
        let (a0, b0) = batch_range(s.len(), kb);
        let sc = if b0 > a0 { s.box_volume() / s.draws_between(a0, b0) as f64 } else { 0.0 };
        let mut g = ComplexMatrix::zeros(k, k);
        let mut m = ComplexMatrix::zeros(k, k);
        let mut t = 0;
        for a in 0..k {
            for b in a..k {
                let gv = C64::new(sum[2 * t], sum[2 * t + 1]) * sc;
                let mv = C64::new(sum[2 * tri + 2 * t], sum[2 * tri + 2 * t + 1]) * sc;
                g[(a, b)] = gv;
                g[(b, a)] = gv.conj();
                m[(a, b)] = mv;
                m[(b, a)] = mv;
                t += 1;
            }
        }
        gram_batches.push(g);
        bilinear_batches.push(m);
    }
    Ok(MomentMatrices {
        gram,
        gram_stderr: gerr,
        bilinear: bil,
        bilinear_stderr: merr,
        gram_batches,
        bilinear_batches,
        samples_used: s.len(),
        acceptance: s.acceptance(),
        has_bilinear: bilinear,
    })
}

/// `∫ g · conj(f_a) · w dV` for every feature, with per-batch estimates.
#[derive(Debug, Clone)]
pub struct ProjectionMoments {
    pub values: Vec<C64>,
    pub stderr: Vec<f64>,
    pub batches: Vec<Vec<C64>>,
}

/// Entrywise batch-means standard error of a family of batch vectors.
pub fn batch_vector_stderr(batches: &[Vec<C64>]) -> Vec<f64> {
    let k = batches.first().map_or(0, |b| b.len());
    let n = (batches.len() as f64).sqrt();
    (0..k)
        .map(|a| {
            let re: Vec<f64> = batches.iter().map(|b| b[a].re).collect();
            let im: Vec<f64> = batches.iter().map(|b| b[a].im).collect();
            (mean_sd(&re).1 / n).hypot(mean_sd(&im).1 / n)
        })
        .collect()
}

pub fn projection_moments<F, G>(
    d: &DomainSpec,
    s: &SampleSet,
    k: usize,
    w: &Weight,
    features: F,
    g: G,
) -> Result<ProjectionMoments>
where
    F: Fn(&[C64], &mut [C64]) + Sync,
    G: Fn(&[C64]) -> C64 + Sync,
{
    check_nonempty(d, s)?;
    let sums = batch_sums(
        s,
        2 * k,
        || vec![C64::new(0.0, 0.0); k],
        |f, z, acc| {
            features(z, f);
            let gw = g(z) * w.eval(z);
            for (a, fa) in f.iter().enumerate() {
                let v = gw * fa.conj();
                acc[2 * a] += v.re;
                acc[2 * a + 1] += v.im;
            }
        },
    )?;
    let total = pairwise_merge(sums.clone(), 2 * k);
    let scale = s.box_volume() / s.total_draws() as f64;
    let values = (0..k).map(|a| C64::new(total[2 * a], total[2 * a + 1]) * scale).collect();
    let stderr = (0..k)
        .map(|a| batch_stderr(s, &sums, 2 * a).hypot(batch_stderr(s, &sums, 2 * a + 1)))
        .collect();
    let batches = sums
        .iter()
        .enumerate()
        .map(|(kb, sum)| {
            let (a0, b0) = batch_range(s.len(), kb);
            let sc = if b0 > a0 { s.box_volume() / s.draws_between(a0, b0) as f64 } else { 0.0 };
            (0..k).map(|a| C64::new(sum[2 * a], sum[2 * a + 1]) * sc).collect()
        })
        .collect();
    Ok(ProjectionMoments { values, stderr, batches })
}

/// Values and standard errors of [`projection_moments`].
pub fn projections<F, G>(
    d: &DomainSpec,
    s: &SampleSet,
    k: usize,
    w: &Weight,
    features: F,
    g: G,
) -> Result<(Vec<C64>, Vec<f64>)>
where
    F: Fn(&[C64], &mut [C64]) + Sync,
    G: Fn(&[C64]) -> C64 + Sync,
{
    let p = projection_moments(d, s, k, w, features, g)?;
    Ok((p.values, p.stderr))
}
