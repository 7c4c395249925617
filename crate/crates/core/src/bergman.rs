//! Truncated Bergman spaces: monomial bases, Gram matrices, orthonormal
//! bases, kernels, projections and the Friedrichs matrix.

use crate::domains::{DomainKind, DomainSpec, SamplerConfig};
use crate::error::{Error, Result};
use crate::maps::ProperMapSpec;
use crate::numerics::{
    cholesky_hermitian, lower_triangular_inverse, numerical_rank, singular_values, ComplexMatrix, SingularSpectrum, C64,
};
use crate::quadrature::{self, batch_matrix_stderr, cached_samples, config_hash, MomentMatrices, Weight};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Default relative pivot threshold after diagonal equilibration.
pub const PIVOT_TOL: f64 = 1e-10;
/// Default singular-value threshold for numerical rank.
pub const DEFAULT_TAU: f64 = 0.1;
/// `σ₂/σ₁` must fall below this for a rank-one verdict.
pub const RANK_ONE_GAP: f64 = 5e-2;

/// Multi-indices of a truncated monomial basis, in graded order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonomialBasis {
    dim: usize,
    degree: usize,
    exponents: Vec<Vec<i32>>,
}

fn graded_cmp(a: &[i32], b: &[i32]) -> std::cmp::Ordering {
    let da: i32 = a.iter().sum();
    let db: i32 = b.iter().sum();
    da.cmp(&db).then_with(|| b.cmp(a))
}

impl MonomialBasis {
    /// Basis from explicit exponents; duplicates are rejected and the list is
    /// put in graded order.
    pub fn new(dim: usize, degree: usize, mut exponents: Vec<Vec<i32>>) -> Result<Self> {
        if exponents.iter().any(|e| e.len() != dim) {
            return Err(Error::InvalidConfig("exponent length differs from dimension".into()));
        }
        exponents.sort_by(|a, b| graded_cmp(a, b));
        if exponents.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("duplicate exponent".into()));
        }
        Ok(Self { dim, degree, exponents })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[Vec<i32>] {
        &self.exponents
    }

    /// Homogeneity degree `Σ αᵢ` of monomial `i`.
    pub fn total_degree(&self, i: usize) -> i32 {
        self.exponents[i].iter().sum()
    }

    fn max_abs_exponent(&self) -> usize {
        self.exponents
            .iter()
            .flatten()
            .map(|e| e.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    /// All monomials at `z`.
    pub fn eval_into(&self, z: &[C64], out: &mut [C64]) {
        let d = self.max_abs_exponent();
        let w = 2 * d + 1;
        let mut pow = vec![C64::new(1.0, 0.0); self.dim * w];
        for (i, &zi) in z.iter().enumerate() {
            let row = &mut pow[i * w..(i + 1) * w];
            for e in 1..=d {
                row[d + e] = row[d + e - 1] * zi;
            }
            if self.exponents.iter().any(|a| a[i] < 0) {
                let inv = C64::new(1.0, 0.0) / zi;
                for e in 1..=d {
                    row[d - e] = row[d - e + 1] * inv;
                }
            }
        }
        for (o, a) in out.iter_mut().zip(&self.exponents) {
            let mut v = C64::new(1.0, 0.0);
            for (i, &e) in a.iter().enumerate() {
                if e != 0 {
                    v *= pow[i * w + (d as i32 + e) as usize];
                }
            }
            *o = v;
        }
    }

    pub fn eval(&self, z: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.len()];
        self.eval_into(z, &mut out);
        out
    }
}

fn multi_indices(dim: usize, lo: &[i32], hi: &[i32], budget: i32, out: &mut Vec<Vec<i32>>, cur: &mut Vec<i32>) {
    let i = cur.len();
    if i == dim {
        out.push(cur.clone());
        return;
    }
    let used: i32 = cur.iter().map(|e| e.abs()).sum();
    for e in lo[i]..=hi[i] {
        if used + e.abs() <= budget {
            cur.push(e);
            multi_indices(dim, lo, hi, budget, out, cur);
            cur.pop();
        }
    }
}

/// Monomials with `Σ|αᵢ| ≤ degree`; negative exponents only on Laurent
/// coordinates, and only square-integrable ones on Hartogs triangles.
pub fn build_basis(d: &DomainSpec, degree: usize) -> MonomialBasis {
    let n = d.dimension();
    let deg = degree as i32;
    let lo: Vec<i32> = d.laurent().iter().map(|&l| if l { -deg } else { 0 }).collect();
    let hi = vec![deg; n];
    let mut all = Vec::new();
    multi_indices(n, &lo, &hi, deg, &mut all, &mut Vec::new());
    if let DomainKind::Hartogs { p, q } = d.kind() {
        // z^a w^b ∈ L² on {|z|^(p/q) < |w| < 1} iff q(a+1) + p(b+1) > 0.
        let (p, q) = (*p as i32, *q as i32);
        all.retain(|e| q * (e[0] + 1) + p * (e[1] + 1) > 0);
    }
    MonomialBasis::new(n, degree, all).expect("generated exponents are unique")
}

/// How basis functions are formed from monomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Features {
    Monomials,
    /// `Q m = (1/m) Σ m ∘ deck_j`.
    Symmetrized(ProperMapSpec),
    /// `Jφ · m`.
    JacobianTimes(ProperMapSpec),
    /// `m ∘ φ` for monomials `m` on the target.
    Pullback(ProperMapSpec),
}

impl Features {
    pub fn label(&self) -> String {
        match self {
            Features::Monomials => "monomials".into(),
            Features::Symmetrized(m) => format!("symmetrized:{m}"),
            Features::JacobianTimes(m) => format!("jacobian_times:{m}"),
            Features::Pullback(m) => format!("pullback:{m}"),
        }
    }
}

/// A finite family of functions spanning a truncated space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub basis: MonomialBasis,
    pub features: Features,
}

impl FeatureSpace {
    pub fn monomials(basis: MonomialBasis) -> Self {
        Self {
            basis,
            features: Features::Monomials,
        }
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn eval_into(&self, z: &[C64], out: &mut [C64]) {
        match &self.features {
            Features::Monomials => self.basis.eval_into(z, out),
            Features::JacobianTimes(m) => {
                self.basis.eval_into(z, out);
                let j = m.jacobian(z);
                out.iter_mut().for_each(|v| *v *= j);
            }
            Features::Pullback(m) => {
                let w = m.apply(z).expect("dimension checked at construction");
                self.basis.eval_into(&w, out);
            }
            Features::Symmetrized(m) => {
                let decks = m.deck_transforms();
                let k = out.len();
                out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
                let mut tmp = vec![C64::new(0.0, 0.0); k];
                let mut dz = vec![C64::new(0.0, 0.0); z.len()];
                for d in &decks {
                    d.apply_into(z, &mut dz);
                    self.basis.eval_into(&dz, &mut tmp);
                    for (o, t) in out.iter_mut().zip(&tmp) {
                        *o += t;
                    }
                }
                let inv = 1.0 / decks.len() as f64;
                out.iter_mut().for_each(|v| *v *= inv);
            }
        }
    }

    pub fn eval(&self, z: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.len()];
        self.eval_into(z, &mut out);
        out
    }
}

/// Moment matrices of a feature space on one sample stream.
#[derive(Debug, Clone)]
pub struct Moments {
    pub domain: DomainSpec,
    pub weight: Weight,
    pub space: FeatureSpace,
    pub mm: MomentMatrices,
    pub provenance: String,
}

fn provenance(d: &DomainSpec, cfg: &SamplerConfig, w: &Weight, space: &FeatureSpace) -> String {
    let mut h = Sha256::new();
    h.update(config_hash(d, cfg).as_bytes());
    h.update(w.label().as_bytes());
    h.update(space.features.label().as_bytes());
    h.update(serde_json::to_vec(space.basis.exponents()).unwrap_or_default());
    hex::encode(h.finalize())
}

/// Gram (`∫ f_a conj(f_b) w`) and bilinear (`∫ f_a f_b w`) moments in one pass.
pub fn moments(d: &DomainSpec, space: &FeatureSpace, w: &Weight, cfg: &SamplerConfig) -> Result<Moments> {
    moments_with(d, space, w, cfg, true)
}

/// Gram moments only; enough for an orthonormal basis.
pub fn gram_moments(d: &DomainSpec, space: &FeatureSpace, w: &Weight, cfg: &SamplerConfig) -> Result<Moments> {
    moments_with(d, space, w, cfg, false)
}

fn moments_with(d: &DomainSpec, space: &FeatureSpace, w: &Weight, cfg: &SamplerConfig, bilinear: bool) -> Result<Moments> {
    if space.basis.dim() != d.dimension() {
        return Err(Error::DimensionMismatch {
            expected: d.dimension(),
            got: space.basis.dim(),
        });
    }
    let samples = cached_samples(d, cfg)?;
    let mm = quadrature::moment_matrices_with(d, &samples, space.len(), w, |z, out| space.eval_into(z, out), bilinear)?;
    Ok(Moments {
        domain: d.clone(),
        weight: w.clone(),
        space: space.clone(),
        mm,
        provenance: provenance(d, cfg, w, space),
    })
}

/// Hermitian Gram matrix of the monomials.
pub fn gram(d: &DomainSpec, basis: &MonomialBasis, w: &Weight, cfg: &SamplerConfig) -> Result<ComplexMatrix> {
    Ok(gram_moments(d, &FeatureSpace::monomials(basis.clone()), w, cfg)?.mm.gram)
}

/// Coefficients turning the features into an orthonormal family.
///
/// Returns the `k × r` matrix `C` (column `j` holds the coefficients of
/// `e_j`) and the retained feature indices. Features are equilibrated to unit
/// norm before the pivoted Cholesky factorization; features with a
/// negligible norm are dropped up front.
pub fn orthonormalize(g: &ComplexMatrix, pivot_tol: f64) -> Result<(ComplexMatrix, Vec<usize>)> {
    if !g.is_square() {
        return Err(Error::NotSquare {
            rows: g.rows(),
            cols: g.cols(),
        });
    }
    let k = g.rows();
    let max_diag = (0..k).map(|i| g[(i, i)].re).fold(0.0, f64::max);
    if !(max_diag > 0.0) {
        return Err(Error::GramNumericallyZero);
    }
    let live: Vec<usize> = (0..k).filter(|&i| g[(i, i)].re > pivot_tol * max_diag).collect();
    let scale: Vec<f64> = live.iter().map(|&i| 1.0 / g[(i, i)].re.sqrt()).collect();
    let eq = ComplexMatrix::from_fn(live.len(), live.len(), |a, b| g[(live[a], live[b])] * (scale[a] * scale[b]));
    let chol = cholesky_hermitian(&eq, pivot_tol)?;
    let linv = lower_triangular_inverse(&chol.l);
    let r = chol.retained.len();
    let mut c = ComplexMatrix::zeros(k, r);
    for (kk, &p) in chol.retained.iter().enumerate() {
        for j in 0..r {
            c[(live[p], j)] = linv[(j, kk)] * scale[p];
        }
    }
    let retained = chol.retained.iter().map(|&p| live[p]).collect();
    Ok((c, retained))
}

/// An orthonormal basis of a truncated (possibly weighted) Bergman space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthonormalBasis {
    pub domain: DomainSpec,
    pub weight: Weight,
    pub space: FeatureSpace,
    /// `k × r`, column `j` = coefficients of `e_j` in the features.
    pub coeffs: ComplexMatrix,
    pub retained: Vec<usize>,
    pub provenance: String,
}

impl OrthonormalBasis {
    pub fn from_moments(m: &Moments, pivot_tol: f64) -> Result<Self> {
        let (coeffs, retained) = orthonormalize(&m.mm.gram, pivot_tol)?;
        Ok(Self {
            domain: m.domain.clone(),
            weight: m.weight.clone(),
            space: m.space.clone(),
            coeffs,
            retained,
            provenance: m.provenance.clone(),
        })
    }

    /// Samples, estimates the Gram matrix and orthonormalizes.
    pub fn build(d: &DomainSpec, space: &FeatureSpace, w: &Weight, cfg: &SamplerConfig) -> Result<Self> {
        Self::from_moments(&gram_moments(d, space, w, cfg)?, PIVOT_TOL)
    }

    pub fn len(&self) -> usize {
        self.coeffs.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(e_1(z), …, e_r(z))`.
    pub fn eval(&self, z: &[C64]) -> Vec<C64> {
        self.coeffs.vec_mul(&self.space.eval(z))
    }

    pub fn eval_into(&self, z: &[C64], feats: &mut [C64], out: &mut [C64]) {
        self.space.eval_into(z, feats);
        let r = self.len();
        out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for (a, fa) in feats.iter().enumerate() {
            if *fa == C64::new(0.0, 0.0) {
                continue;
            }
            let row = self.coeffs.row(a);
            for j in 0..r {
                out[j] += row[j] * fa;
            }
        }
    }

    /// Truncated kernel `Σ e_j(z) conj(e_j(w))`.
    pub fn kernel(&self, z: &[C64], w: &[C64]) -> C64 {
        let ez = self.eval(z);
        let ew = self.eval(w);
        ez.iter().zip(&ew).map(|(a, b)| a * b.conj()).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&OnbRecord::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<OnbRecord>(s)?.try_into()
    }
}

/// Persisted form of an [`OrthonormalBasis`].
#[derive(Serialize, Deserialize)]
struct OnbRecord {
    domain: String,
    weight: Weight,
    degree: usize,
    features: Features,
    exponents: Vec<Vec<i32>>,
    retained: Vec<usize>,
    rows: usize,
    cols: usize,
    /// Row-major `[re, im]` pairs.
    coeffs: Vec<[f64; 2]>,
    provenance: String,
}

impl From<&OrthonormalBasis> for OnbRecord {
    fn from(o: &OrthonormalBasis) -> Self {
        Self {
            domain: o.domain.to_string(),
            weight: o.weight.clone(),
            degree: o.space.basis.degree(),
            features: o.space.features.clone(),
            exponents: o.space.basis.exponents().to_vec(),
            retained: o.retained.clone(),
            rows: o.coeffs.rows(),
            cols: o.coeffs.cols(),
            coeffs: o.coeffs.as_slice().iter().map(|z| [z.re, z.im]).collect(),
            provenance: o.provenance.clone(),
        }
    }
}

impl TryFrom<OnbRecord> for OrthonormalBasis {
    type Error = Error;

    fn try_from(r: OnbRecord) -> Result<Self> {
        let domain: DomainSpec = r.domain.parse()?;
        let basis = MonomialBasis::new(domain.dimension(), r.degree, r.exponents)?;
        if basis.len() != r.rows {
            return Err(Error::Parse("coefficient rows differ from basis size".into()));
        }
        let coeffs = ComplexMatrix::from_row_major(r.rows, r.cols, r.coeffs.iter().map(|p| C64::new(p[0], p[1])).collect())?;
        Ok(Self {
            domain,
            weight: r.weight,
            space: FeatureSpace {
                basis,
                features: r.features,
            },
            coeffs,
            retained: r.retained,
            provenance: r.provenance,
        })
    }
}

/// Projection coefficients `c_j = ⟨g, e_j⟩` with batch standard errors.
#[derive(Debug, Clone, Serialize)]
pub struct Projection {
    pub coeffs: Vec<C64>,
    pub stderr: Vec<f64>,
}

impl Projection {
    /// `Σ c_j e_j(z)`.
    pub fn eval(&self, onb: &OrthonormalBasis, z: &[C64]) -> C64 {
        onb.eval(z).iter().zip(&self.coeffs).map(|(e, c)| e * c).sum()
    }
}

/// Coefficients of the Bergman projection of `g` in the basis `onb`.
pub fn bergman_project<G>(onb: &OrthonormalBasis, g: G, cfg: &SamplerConfig) -> Result<Projection>
where
    G: Fn(&[C64]) -> C64 + Sync,
{
    let samples = cached_samples(&onb.domain, cfg)?;
    let space = &onb.space;
    let pm = quadrature::projection_moments(&onb.domain, &samples, space.len(), &onb.weight, |z, out| space.eval_into(z, out), g)?;
    // ⟨g, e_j⟩ = Σ_a conj(C_aj) ⟨g, f_a⟩
    let ch = onb.coeffs.conj_transpose();
    let to_onb = |v: &[C64]| -> Vec<C64> { ch.mul_vec(v) };
    let batches: Vec<Vec<C64>> = pm.batches.iter().map(|b| to_onb(b)).collect();
    Ok(Projection {
        coeffs: to_onb(&pm.values),
        stderr: quadrature::batch_vector_stderr(&batches),
    })
}

/// `B_jk = ∫ e_j e_k w dV` with its spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct FriedrichsMatrix {
    pub entries: ComplexMatrix,
    pub stderr: Vec<f64>,
    pub singulars: SingularSpectrum,
}

fn congruence(c: &ComplexMatrix, m: &ComplexMatrix) -> Result<ComplexMatrix> {
    c.transpose().matmul(m)?.matmul(c)
}

/// Friedrichs matrix of `onb` from the bilinear moments `m` (which must
/// describe the same feature space and weight).
pub fn friedrichs_from_moments(onb: &OrthonormalBasis, m: &Moments) -> Result<FriedrichsMatrix> {
    if m.space != onb.space || m.weight != onb.weight {
        return Err(Error::InvalidConfig("moments and basis describe different spaces".into()));
    }
    if !m.mm.has_bilinear {
        return Err(Error::InvalidConfig("moments lack the bilinear matrix".into()));
    }
    let entries = congruence(&onb.coeffs, &m.mm.bilinear)?.symmetric_part();
    let batches: Vec<ComplexMatrix> = m
        .mm
        .bilinear_batches
        .iter()
        .map(|b| congruence(&onb.coeffs, b).map(|x| x.symmetric_part()))
        .collect::<Result<_>>()?;
    let stderr = batch_matrix_stderr(&batches);
    let singulars = singular_values(&entries);
    Ok(FriedrichsMatrix {
        entries,
        stderr,
        singulars,
    })
}

/// Friedrichs matrix of `onb` on the sample stream `cfg`.
pub fn friedrichs_matrix(onb: &OrthonormalBasis, cfg: &SamplerConfig) -> Result<FriedrichsMatrix> {
    let m = moments(&onb.domain, &onb.space, &onb.weight, cfg)?;
    friedrichs_from_moments(onb, &m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankVerdict {
    pub rank: usize,
    pub sigma1: f64,
    /// `σ₂/σ₁` (0 for a 1×1 matrix).
    pub ratio: f64,
    pub rank_one: bool,
}

pub fn friedrichs_rank(fm: &FriedrichsMatrix, tau: f64) -> RankVerdict {
    let rank = numerical_rank(&fm.singulars, tau);
    let ratio = fm.singulars.ratio(1);
    RankVerdict {
        rank,
        sigma1: fm.singulars.sigma1(),
        ratio,
        rank_one: rank == 1 && ratio < RANK_ONE_GAP,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn dom(s: &str) -> DomainSpec {
        s.parse().unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    const N: usize = 1 << 16;

    #[test]
    fn basis_examples() {
        let b = build_basis(&dom("disc"), 2);
        assert_eq!(b.exponents(), &[vec![0], vec![1], vec![2]]);
        let b = build_basis(&dom("polydisc:2"), 1);
        assert_eq!(b.exponents(), &[vec![0, 0], vec![1, 0], vec![0, 1]]);
        let b = build_basis(&dom("annulus:0.5"), 2);
        assert_eq!(b.exponents(), &[vec![-2], vec![-1], vec![0], vec![1], vec![2]]);
        assert_eq!(build_basis(&dom("ball:3"), 4).len(), 35);
        assert_eq!(build_basis(&dom("disc"), 0).len(), 1);
    }

    #[test]
    fn hartogs_basis_is_square_integrable() {
        let b = build_basis(&dom("hartogs:2"), 2);
        for e in b.exponents() {
            assert!(e[0] >= 0 && e[0] + 1 + 2 * (e[1] + 1) > 0, "{e:?}");
        }
        // ∫|w|⁻² over the triangle is ∫ π|w|⁻¹ dA(w) < ∞; |w|⁻⁴ diverges.
        assert!(b.exponents().contains(&vec![1, -1]));
        assert!(b.exponents().contains(&vec![0, -1]));
        assert!(!b.exponents().contains(&vec![0, -2]));
    }

    #[test]
    fn duplicate_exponents_rejected() {
        assert!(MonomialBasis::new(1, 1, vec![vec![1], vec![1]]).is_err());
        assert!(MonomialBasis::new(2, 1, vec![vec![1]]).is_err());
    }

    #[test]
    fn monomial_evaluation() {
        let b = MonomialBasis::new(2, 3, vec![vec![2, -1], vec![0, 3], vec![0, 0]]).unwrap();
        let z = [c(0.3, 0.2), c(-0.5, 0.4)];
        let v = b.eval(&z);
        let expect = |e: &[i32]| z[0].powi(e[0]) * z[1].powi(e[1]);
        for (x, e) in v.iter().zip(b.exponents()) {
            assert!((x - expect(e)).norm() < 1e-14);
        }
    }

    #[test]
    fn orthonormalize_diagonal() {
        let g = ComplexMatrix::from_diag(&[c(4.0, 0.0), c(1.0, 0.0)]);
        let (co, ret) = orthonormalize(&g, 1e-12).unwrap();
        assert_eq!(ret.len(), 2);
        // e_j are the monomials scaled: m₁/2 and m₂.
        let mut cols: Vec<(usize, C64)> = (0..2)
            .map(|j| {
                let i = (0..2).find(|&i| co[(i, j)].norm() > 0.0).unwrap();
                (i, co[(i, j)])
            })
            .collect();
        cols.sort_by_key(|x| x.0);
        assert!((cols[0].1.norm() - 0.5).abs() < 1e-15);
        assert!((cols[1].1.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orthonormalize_drops_dependent_and_zero_features() {
        // f2 = 2 f0, f3 = 0.
        let f = ComplexMatrix::from_row_major(
            4,
            3,
            vec![
                c(1.0, 0.0), c(0.5, 0.1), c(0.0, 0.2),
                c(0.3, 0.0), c(1.0, 0.0), c(0.1, 0.0),
                c(2.0, 0.0), c(1.0, 0.2), c(0.0, 0.4),
                c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0),
            ],
        )
        .unwrap();
        let g = f.matmul(&f.conj_transpose()).unwrap();
        let (co, ret) = orthonormalize(&g, 1e-10).unwrap();
        assert_eq!(ret.len(), 2);
        let ge = co.transpose().matmul(&g).unwrap().matmul(&co.conj()).unwrap();
        assert!(ge.sub(&ComplexMatrix::identity(2)).max_abs() < 1e-10);
        assert!(co.row(3).iter().all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn disc_gram_is_diagonal() {
        let d = dom("disc");
        let m = moments(&d, &FeatureSpace::monomials(build_basis(&d, 2)), &Weight::Unweighted, &SamplerConfig::pseudo(N, 1)).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let truth = if a == b { PI / (a as f64 + 1.0) } else { 0.0 };
                let err = m.mm.gram_err(a, b);
                assert!((m.mm.gram[(a, b)] - c(truth, 0.0)).norm() < 3.0 * err + 1e-12, "{a}{b}");
            }
        }
    }

    #[test]
    fn weighted_gram_constant_entry() {
        let d = dom("polydisc:2");
        let w = Weight::JacobianSq("pi:2".parse().unwrap());
        let m = moments(&d, &FeatureSpace::monomials(build_basis(&d, 1)), &w, &SamplerConfig::halton(N, 1)).unwrap();
        assert!((m.mm.gram[(0, 0)].re - PI * PI).abs() < 3.0 * m.mm.gram_err(0, 0));
    }

    #[test]
    fn orthonormal_on_independent_stream() {
        let d = dom("disc");
        let space = FeatureSpace::monomials(build_basis(&d, 4));
        let onb = OrthonormalBasis::build(&d, &space, &Weight::Unweighted, &SamplerConfig::pseudo(N, 1)).unwrap();
        let other = moments(&d, &space, &Weight::Unweighted, &SamplerConfig::pseudo(N, 2)).unwrap();
        let ge = onb.coeffs.transpose().matmul(&other.mm.gram).unwrap().matmul(&onb.coeffs.conj()).unwrap();
        let batches: Vec<ComplexMatrix> = other
            .mm
            .gram_batches
            .iter()
            .map(|b| onb.coeffs.transpose().matmul(b).unwrap().matmul(&onb.coeffs.conj()).unwrap())
            .collect();
        let err = batch_matrix_stderr(&batches);
        let r = onb.len();
        for j in 0..r {
            for k in 0..r {
                let truth = if j == k { 1.0 } else { 0.0 };
                assert!((ge[(j, k)] - c(truth, 0.0)).norm() < 5.0 * err[j * r + k] + 1e-12, "{j}{k}: {}", ge[(j, k)]);
            }
        }
    }

    #[test]
    fn ill_conditioned_basis_drops_pivots() {
        let d = dom("S");
        let space = FeatureSpace::monomials(build_basis(&d, 12));
        let m = moments(&d, &space, &Weight::Unweighted, &SamplerConfig::halton(1 << 13, 1)).unwrap();
        // smallest relative pivot here sits near 1e-7, so 1e-10 keeps everything
        let onb = OrthonormalBasis::from_moments(&m, 1e-6).unwrap();
        assert!(onb.len() < space.len(), "{} of {}", onb.len(), space.len());
        let ge = onb.coeffs.transpose().matmul(&m.mm.gram).unwrap().matmul(&onb.coeffs.conj()).unwrap();
        assert!(ge.sub(&ComplexMatrix::identity(onb.len())).max_abs() < 1e-6);
        assert!(OrthonormalBasis::from_moments(&m, PIVOT_TOL).is_ok());
    }

    #[test]
    fn disc_kernel_closed_form() {
        let d = dom("disc");
        let space = FeatureSpace::monomials(build_basis(&d, 20));
        let onb = OrthonormalBasis::build(&d, &space, &Weight::Unweighted, &SamplerConfig::halton(1 << 18, 1)).unwrap();
        let k = |z: C64, w: C64| 1.0 / (PI * (C64::new(1.0, 0.0) - z * w.conj()).powi(2));
        let z0 = [c(0.0, 0.0)];
        assert!((onb.kernel(&z0, &z0) - k(z0[0], z0[0])).norm() < 1e-3 / PI);
        let h = [c(0.5, 0.0)];
        assert!((onb.kernel(&h, &h) - k(h[0], h[0])).norm() < 1e-2 * k(h[0], h[0]).norm());
        let (a, b) = ([c(0.1, 0.3)], [c(-0.2, 0.25)]);
        assert_eq!(onb.kernel(&a, &b), onb.kernel(&b, &a).conj());
    }

    #[test]
    fn kernel_diagonal_grows_with_degree() {
        let d = dom("ball:2");
        let cfg = SamplerConfig::pseudo(N, 3);
        let pts = [[c(0.1, 0.2), c(-0.3, 0.1)], [c(0.0, 0.0), c(0.6, 0.0)], [c(0.4, -0.4), c(0.2, 0.3)]];
        let mut prev = vec![0.0; pts.len()];
        for deg in 0..=6 {
            let space = FeatureSpace::monomials(build_basis(&d, deg));
            let onb = OrthonormalBasis::build(&d, &space, &Weight::Unweighted, &cfg).unwrap();
            for (p, z) in prev.iter_mut().zip(&pts) {
                let k = onb.kernel(z, z).re;
                assert!(k >= *p * (1.0 - 1e-9), "degree {deg}: {k} < {p}");
                *p = k;
            }
        }
    }

    #[test]
    fn projection_examples_on_disc() {
        let d = dom("disc");
        let cfg = SamplerConfig::pseudo(N, 4);
        let space = FeatureSpace::monomials(build_basis(&d, 4));
        let onb = OrthonormalBasis::build(&d, &space, &Weight::Unweighted, &cfg).unwrap();
        // Reproducing: projecting e₂ gives the unit vector.
        let p = bergman_project(&onb, |z| onb.eval(z)[2], &cfg).unwrap();
        for (j, (cj, e)) in p.coeffs.iter().zip(&p.stderr).enumerate() {
            let truth = if j == 2 { 1.0 } else { 0.0 };
            assert!((cj - c(truth, 0.0)).norm() < 5.0 * e + 1e-9, "{j}: {cj}");
        }
        // Antiholomorphic input is orthogonal to every eₖ, on an independent stream.
        let other = SamplerConfig::pseudo(N, 5);
        let p = bergman_project(&onb, |z| z[0].conj(), &other).unwrap();
        for (cj, e) in p.coeffs.iter().zip(&p.stderr) {
            assert!(cj.norm() < 5.0 * e, "{cj} vs {e}");
        }
        // |z|² projects onto the constant: ⟨|z|², 1/√π⟩ = (π/2)/√π.
        let p = bergman_project(&onb, |z| c(z[0].norm_sqr(), 0.0), &other).unwrap();
        let const_idx = (0..onb.len()).max_by(|&a, &b| onb.coeffs[(0, a)].norm().total_cmp(&onb.coeffs[(0, b)].norm())).unwrap();
        let truth = (PI / 2.0) / PI.sqrt();
        assert!((p.coeffs[const_idx].norm() - truth).abs() < 5.0 * p.stderr[const_idx]);
    }

    #[test]
    fn disc_friedrichs_is_rank_one() {
        let d = dom("disc");
        let cfg = SamplerConfig::halton(N, 1);
        let space = FeatureSpace::monomials(build_basis(&d, 4));
        let m = moments(&d, &space, &Weight::Unweighted, &cfg).unwrap();
        let onb = OrthonormalBasis::from_moments(&m, PIVOT_TOL).unwrap();
        let fm = friedrichs_from_moments(&onb, &m).unwrap();
        assert_eq!(fm.entries, fm.entries.transpose());
        let v = friedrichs_rank(&fm, DEFAULT_TAU);
        assert!(v.rank_one, "{v:?}");
    }

    #[test]
    fn annulus_friedrichs_is_antidiagonal() {
        let d = dom("annulus:0.5");
        let space = FeatureSpace::monomials(build_basis(&d, 3));
        let onb = OrthonormalBasis::build(&d, &space, &Weight::Unweighted, &SamplerConfig::halton(N, 1)).unwrap();
        let fm = friedrichs_matrix(&onb, &SamplerConfig::halton(N, 1)).unwrap();
        let v = friedrichs_rank(&fm, DEFAULT_TAU);
        assert_eq!(v.rank, 7, "{:?}", fm.singulars);
    }

    #[test]
    fn degree_zero_basis_is_rank_one() {
        let d = dom("tetrablock");
        let space = FeatureSpace::monomials(build_basis(&d, 0));
        let onb = OrthonormalBasis::build(&d, &space, &Weight::Unweighted, &SamplerConfig::halton(1 << 12, 1)).unwrap();
        let v = friedrichs_rank(&friedrichs_matrix(&onb, &SamplerConfig::halton(1 << 12, 1)).unwrap(), DEFAULT_TAU);
        assert!(v.rank_one && v.ratio == 0.0);
    }

    #[test]
    fn graded_orthogonality_on_s() {
        let d = dom("S");
        let basis = build_basis(&d, 3);
        let m = moments(&d, &FeatureSpace::monomials(basis.clone()), &Weight::Unweighted, &SamplerConfig::halton(N, 2)).unwrap();
        let g = &m.mm.gram;
        for a in 0..basis.len() {
            for b in 0..basis.len() {
                if basis.total_degree(a) != basis.total_degree(b) {
                    assert!(g[(a, b)].norm() < 5.0 * m.mm.gram_err(a, b) + 1e-12, "{a},{b}");
                }
            }
        }
    }

    #[test]
    fn symmetrized_features_are_deck_invariant() {
        let map: ProperMapSpec = "Phi".parse().unwrap();
        let space = FeatureSpace {
            basis: build_basis(map.source(), 3),
            features: Features::Symmetrized(map.clone()),
        };
        let z = [c(0.1, 0.2), c(-0.3, 0.1), c(0.25, -0.1)];
        let v = space.eval(&z);
        let w = space.eval(&map.deck_transforms()[1].apply(&z));
        assert_eq!(v, w);
        // Odd powers of the third coordinate vanish.
        for (e, x) in space.basis.exponents().iter().zip(&v) {
            if e[2] % 2 == 1 {
                assert!(x.norm() < 1e-16);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let d = dom("pentablock");
        let space = FeatureSpace::monomials(build_basis(&d, 2));
        let onb = OrthonormalBasis::build(&d, &space, &Weight::Unweighted, &SamplerConfig::pseudo(1 << 12, 1)).unwrap();
        let back = OrthonormalBasis::from_json(&onb.to_json().unwrap()).unwrap();
        assert_eq!(back, onb);
    }
}
