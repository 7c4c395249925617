//! Bounded domains in Cⁿ: membership, bounding polydiscs, circularity, and
//! rejection sampling.
//!
//! All domains are open; points on the boundary are reported as outside.

mod halton;
mod sampler;

pub use halton::{first_primes, HaltonStream};
pub use sampler::{sample, SampleSet, SamplerConfig, Sequence};

use crate::error::{Error, Result};
use crate::maps::poly::{poly_roots, roots_in_open_unit_disc};
use crate::numerics::C64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Which domain, with its parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    Disc,
    Polydisc(usize),
    Ball(usize),
    /// `{r < |z| < 1}`.
    Annulus(f64),
    /// Fat Hartogs triangle `{|z|^(p/q) < |w| < 1}`.
    Hartogs { p: u32, q: u32 },
    /// Operator-norm unit ball of symmetric 2×2 matrices `[[x, z], [z, y]]`.
    S,
    /// `{x, y ∈ 𝔻, 2|z| < |1 − x ȳ| + √((1−|x|²)(1−|y|²))}`.
    L,
    Tetrablock,
    Pentablock,
    /// Symmetrized polydisc Gₙ.
    SymmPolydisc(usize),
    /// Extended symmetrized polydisc G̃ₙ, coordinates `(y₁, …, y_{n−1}, q)`.
    ExtSymmPolydisc(usize),
}

/// A bounded domain together with its bounding polydisc and Laurent flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    kind: DomainKind,
    bounding_box: Vec<f64>,
    laurent: Vec<bool>,
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl DomainSpec {
    pub fn new(kind: DomainKind) -> Result<Self> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        let (bounding_box, laurent) = match &kind {
            DomainKind::Disc => (vec![1.0], vec![false]),
            DomainKind::Polydisc(n) | DomainKind::Ball(n) => {
                if *n == 0 {
                    return bad("dimension must be at least 1");
                }
                (vec![1.0; *n], vec![false; *n])
            }
            DomainKind::Annulus(r) => {
                if !(*r > 0.0 && *r < 1.0) {
                    return bad("annulus inner radius must lie in (0, 1)");
                }
                (vec![1.0], vec![true])
            }
            DomainKind::Hartogs { p, q } => {
                if *p == 0 || *q == 0 {
                    return bad("hartogs exponent p/q must be positive");
                }
                // w never vanishes on the domain, z does.
                (vec![1.0, 1.0], vec![false, true])
            }
            DomainKind::S | DomainKind::L | DomainKind::Tetrablock => (vec![1.0; 3], vec![false; 3]),
            DomainKind::Pentablock => (vec![1.0, 2.0, 1.0], vec![false; 3]),
            DomainKind::SymmPolydisc(n) => {
                if *n == 0 {
                    return bad("Gn requires n >= 1");
                }
                ((1..=*n).map(|k| binomial(*n, k)).collect(), vec![false; *n])
            }
            DomainKind::ExtSymmPolydisc(n) => {
                if *n < 2 {
                    return bad("Gtilde requires n >= 2");
                }
                let mut b: Vec<f64> = (1..*n).map(|k| binomial(*n, k)).collect();
                b.push(1.0);
                (b, vec![false; *n])
            }
        };
        Ok(Self {
            kind,
            bounding_box,
            laurent,
        })
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        self.bounding_box.len()
    }

    /// Per-coordinate modulus bounds: the domain lies in the product of these discs.
    pub fn bounding_box(&self) -> &[f64] {
        &self.bounding_box
    }

    pub fn laurent(&self) -> &[bool] {
        &self.laurent
    }

    /// Whether the domain is known to be circular and to contain the origin.
    pub fn is_circular_with_origin(&self) -> bool {
        matches!(
            self.kind,
            DomainKind::Disc | DomainKind::Polydisc(_) | DomainKind::Ball(_) | DomainKind::S | DomainKind::L
        )
    }

    pub fn contains(&self, z: &[C64]) -> Result<bool> {
        if z.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: z.len(),
            });
        }
        Ok(self.contains_point(z))
    }

    /// Membership without the dimension check; `z.len()` must equal the dimension.
    #[inline]
    pub fn contains_point(&self, z: &[C64]) -> bool {
        match &self.kind {
            DomainKind::Disc => z[0].norm_sqr() < 1.0,
            DomainKind::Polydisc(_) => z.iter().all(|w| w.norm_sqr() < 1.0),
            DomainKind::Ball(_) => z.iter().map(|w| w.norm_sqr()).sum::<f64>() < 1.0,
            DomainKind::Annulus(r) => {
                let m = z[0].norm_sqr();
                m < 1.0 && m > r * r
            }
            DomainKind::Hartogs { p, q } => {
                let w = z[1].norm_sqr().sqrt();
                w < 1.0 && z[0].norm_sqr().sqrt().powi(*p as i32) < w.powi(*q as i32)
            }
            DomainKind::S => in_s(z[0], z[1], z[2]),
            DomainKind::L => in_l(z[0], z[1], z[2]),
            DomainKind::Tetrablock => tetrablock_margins(z[0], z[1], z[2])[0] > 0.0,
            DomainKind::Pentablock => in_pentablock(z[0], z[1], z[2]),
            DomainKind::SymmPolydisc(_) => in_symm_polydisc(z),
            DomainKind::ExtSymmPolydisc(_) => in_ext_symm_polydisc(z),
        }
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DomainKind::Disc => write!(f, "disc"),
            DomainKind::Polydisc(n) => write!(f, "polydisc:{n}"),
            DomainKind::Ball(n) => write!(f, "ball:{n}"),
            DomainKind::Annulus(r) => write!(f, "annulus:{r}"),
            DomainKind::Hartogs { p, q } => write!(f, "hartogs:{p}/{q}"),
            DomainKind::S => write!(f, "S"),
            DomainKind::L => write!(f, "L"),
            DomainKind::Tetrablock => write!(f, "tetrablock"),
            DomainKind::Pentablock => write!(f, "pentablock"),
            DomainKind::SymmPolydisc(n) => write!(f, "Gn:{n}"),
            DomainKind::ExtSymmPolydisc(n) => write!(f, "Gtilde:{n}"),
        }
    }
}

impl FromStr for DomainSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::Unknown {
            kind: "domain",
            name: s.to_string(),
        };
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let count = |a: Option<&str>| -> Result<usize> {
            a.ok_or_else(unknown)?.parse::<usize>().map_err(|_| unknown())
        };
        let kind = match (head, arg) {
            ("disc", None) => DomainKind::Disc,
            ("polydisc", a) => DomainKind::Polydisc(count(a)?),
            ("ball", a) => DomainKind::Ball(count(a)?),
            ("annulus", Some(a)) => DomainKind::Annulus(a.parse().map_err(|_| unknown())?),
            ("hartogs", Some(a)) => {
                let (p, q) = a.split_once('/').unwrap_or((a, "1"));
                DomainKind::Hartogs {
                    p: p.parse().map_err(|_| unknown())?,
                    q: q.parse().map_err(|_| unknown())?,
                }
            }
            ("S", None) => DomainKind::S,
            ("L", None) => DomainKind::L,
            ("tetrablock", None) => DomainKind::Tetrablock,
            ("pentablock", None) => DomainKind::Pentablock,
            ("Gn", a) => DomainKind::SymmPolydisc(count(a)?),
            ("Gtilde", a) => DomainKind::ExtSymmPolydisc(count(a)?),
            _ => return Err(unknown()),
        };
        DomainSpec::new(kind)
    }
}

fn in_s(x: C64, y: C64, z: C64) -> bool {
    // ‖A‖ < 1 for A = [[x, z], [z, y]]: (1 − σ₁²)(1 − σ₂²) > 0 and σ₁² + σ₂² < 2.
    let frob = x.norm_sqr() + y.norm_sqr() + 2.0 * z.norm_sqr();
    let det = x * y - z * z;
    frob < 2.0 && 1.0 - frob + det.norm_sqr() > 0.0
}

fn in_l(x: C64, y: C64, z: C64) -> bool {
    let (ax, ay) = (x.norm_sqr(), y.norm_sqr());
    if ax >= 1.0 || ay >= 1.0 {
        return false;
    }
    2.0 * z.norm_sqr().sqrt() < (C64::new(1.0, 0.0) - x * y.conj()).norm_sqr().sqrt() + ((1.0 - ax) * (1.0 - ay)).sqrt()
}

/// `rhs − lhs` for the three inequality characterizations of the tetrablock
/// (in the order 2, 3, 4 of the standard list); membership iff positive.
pub fn tetrablock_margins(x1: C64, x2: C64, x3: C64) -> [f64; 3] {
    let a = (x1 - x2.conj() * x3).norm_sqr().sqrt();
    let b = (x2 - x1.conj() * x3).norm_sqr().sqrt();
    let c = (x1 * x2 - x3).norm_sqr().sqrt();
    [
        1.0 - x2.norm_sqr() - a - c,
        1.0 - x1.norm_sqr() - b - c,
        1.0 - x3.norm_sqr() - a - b,
    ]
}

/// Membership of `(s, p)` in the symmetrized bidisc.
pub fn in_g2(s: C64, p: C64) -> bool {
    roots_in_open_unit_disc(&[p, -s, C64::new(1.0, 0.0)])
}

fn in_pentablock(a: C64, s: C64, p: C64) -> bool {
    if !in_g2(s, p) {
        return false;
    }
    a.norm_sqr().sqrt() < pentablock_bound(s, p)
}

/// Right-hand side of the β-form pentablock inequality, `(s, p) ∈ G₂`.
pub fn pentablock_bound(s: C64, p: C64) -> f64 {
    let beta = (s - s.conj() * p) / (1.0 - p.norm_sqr());
    let root = (1.0 - beta.norm_sqr()).max(1e-15).sqrt();
    (C64::new(1.0, 0.0) - 0.5 * s * beta.conj() / (1.0 + root)).norm_sqr().sqrt()
}

/// The λ-form: `2|a| < |1 − λ̄₂λ₁| + √((1−|λ₁|²)(1−|λ₂|²))` with the roots of
/// `t² − s t + p`. Returns the half right-hand side.
pub fn pentablock_bound_lambda(s: C64, p: C64) -> Result<f64> {
    let r = poly_roots(&[p, -s, C64::new(1.0, 0.0)])?;
    let (l1, l2) = (r[0], r[1]);
    let rhs = (C64::new(1.0, 0.0) - l2.conj() * l1).norm_sqr().sqrt()
        + ((1.0 - l1.norm_sqr()).max(0.0) * (1.0 - l2.norm_sqr()).max(0.0)).sqrt();
    Ok(0.5 * rhs)
}

/// Ascending coefficients of `tⁿ − s₁tⁿ⁻¹ + s₂tⁿ⁻² − … + (−1)ⁿsₙ`.
pub fn symmetric_polynomial_coeffs(s: &[C64]) -> Vec<C64> {
    let n = s.len();
    let mut a = vec![C64::new(0.0, 0.0); n + 1];
    a[n] = C64::new(1.0, 0.0);
    for (k, sk) in s.iter().enumerate() {
        let sign = if (k + 1) % 2 == 0 { 1.0 } else { -1.0 };
        a[n - k - 1] = sign * sk;
    }
    a
}

fn in_symm_polydisc(s: &[C64]) -> bool {
    let n = s.len();
    // Gₙ ⊂ G̃ₙ: a cheap necessary condition that rejects most of the box.
    if n >= 3 && !in_ext_symm_polydisc(s) {
        return false;
    }
    if n >= 16 {
        return roots_in_open_unit_disc(&symmetric_polynomial_coeffs(s));
    }
    let mut a = [C64::new(0.0, 0.0); 17];
    a[n] = C64::new(1.0, 0.0);
    for (k, sk) in s.iter().enumerate() {
        a[n - k - 1] = if k.is_multiple_of(2) { -sk } else { *sk };
    }
    roots_in_open_unit_disc(&a[..=n])
}

/// Root-based Gₙ membership by explicit root moduli (slower, used as a cross-check).
pub fn symm_polydisc_root_moduli(s: &[C64]) -> Result<Vec<f64>> {
    Ok(poly_roots(&symmetric_polynomial_coeffs(s))?.iter().map(|r| r.norm_sqr().sqrt()).collect())
}

/// The unique `β` with `y_j = β_j + β̄_{n−j} q` (1-based `j = 1..n−1`).
pub fn ext_symm_beta(y: &[C64], q: C64) -> Vec<C64> {
    let m = y.len();
    let denom = 1.0 - q.norm_sqr();
    (0..m).map(|j| (y[j] - y[m - 1 - j].conj() * q) / denom).collect()
}

fn in_ext_symm_polydisc(z: &[C64]) -> bool {
    let n = z.len();
    let q = z[n - 1];
    let qq = q.norm_sqr();
    if qq >= 1.0 {
        return false;
    }
    let y = &z[..n - 1];
    let m = y.len();
    let inv = 1.0 / (1.0 - qq);
    let beta = |j: usize| ((y[j] - y[m - 1 - j].conj() * q) * inv).norm_sqr().sqrt();
    (0..m.div_ceil(2)).all(|j| beta(j) + beta(m - 1 - j) < binomial(n, j + 1))
}

/// `sup |f_s|` over `grid` equispaced points of the unit circle and a coarse
/// interior mesh; `+∞` when the denominator of `f_s` vanishes on the closed disc.
pub fn costara_sup(s: &[C64], grid: usize) -> f64 {
    let n = s.len();
    let sk = |k: usize| if k == 0 { C64::new(1.0, 0.0) } else { s[k - 1] };
    let sign = |k: usize| if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    // numerator Σ_{k=1}^{n} k(−1)^k s_k z^{k−1}; denominator Σ_{k=0}^{n−1} (n−k)(−1)^k s_k z^k
    let num: Vec<C64> = (1..=n).map(|k| k as f64 * sign(k) * sk(k)).collect();
    let mut den: Vec<C64> = (0..n).map(|k| (n - k) as f64 * sign(k) * sk(k)).collect();
    while den.len() > 1 && den[den.len() - 1].norm_sqr().sqrt() == 0.0 {
        den.pop();
    }
    if den.len() > 1 {
        let lead = den[den.len() - 1];
        let monic: Vec<C64> = den.iter().map(|c| c / lead).collect();
        match poly_roots(&monic) {
            Ok(r) if r.iter().any(|z| z.norm_sqr().sqrt() <= 1.0 + 1e-12) => return f64::INFINITY,
            Ok(_) => {}
            Err(_) => return f64::INFINITY,
        }
    }
    let eval = |c: &[C64], z: C64| crate::maps::poly::eval(c, z);
    let grid = grid.max(4);
    let mut sup: f64 = 0.0;
    let mut visit = |z: C64| {
        let d = eval(&den, z);
        let v = if d.norm_sqr().sqrt() < 1e-14 { f64::INFINITY } else { (eval(&num, z) / d).norm_sqr().sqrt() };
        sup = sup.max(v);
    };
    for k in 0..grid {
        visit(C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / grid as f64));
    }
    let rings = 8;
    let spokes = (grid / 4).max(8);
    visit(C64::new(0.0, 0.0));
    for r in 1..rings {
        for k in 0..spokes {
            visit(C64::from_polar(r as f64 / rings as f64, std::f64::consts::TAU * k as f64 / spokes as f64));
        }
    }
    sup
}

/// Result of a randomized circularity probe.
#[derive(Debug, Clone)]
pub struct CircularityResult {
    pub circular: bool,
    /// Interior point and rotation angle that leave the domain, when found.
    pub witness: Option<(Vec<C64>, f64)>,
}

/// Rotates `trials` random interior points by `angles` equispaced angles and
/// reports the first point that leaves the domain.
pub fn circularity_check<R: Rng>(d: &DomainSpec, trials: usize, angles: usize, rng: &mut R) -> CircularityResult {
    let n = d.dimension();
    let bbox = d.bounding_box();
    let mut z = vec![C64::new(0.0, 0.0); n];
    let mut found = 0;
    let mut attempts = 0u64;
    while found < trials && attempts < 1_000_000 * trials as u64 {
        attempts += 1;
        for (zi, &r) in z.iter_mut().zip(bbox) {
            let rad = r * rng.random::<f64>().sqrt();
            *zi = C64::from_polar(rad, rng.random_range(0.0..std::f64::consts::TAU));
        }
        if !d.contains_point(&z) {
            continue;
        }
        found += 1;
        for k in 1..=angles.max(1) {
            let theta = std::f64::consts::TAU * k as f64 / (angles.max(1) + 1) as f64;
            let rot = C64::from_polar(1.0, theta);
            let w: Vec<C64> = z.iter().map(|v| v * rot).collect();
            if !d.contains_point(&w) {
                return CircularityResult {
                    circular: false,
                    witness: Some((z.clone(), theta)),
                };
            }
        }
    }
    CircularityResult {
        circular: true,
        witness: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn dom(s: &str) -> DomainSpec {
        s.parse().unwrap()
    }

    #[test]
    fn names_roundtrip() {
        for name in [
            "disc", "polydisc:2", "ball:3", "annulus:0.5", "hartogs:2/1", "S", "L", "tetrablock", "pentablock",
            "Gn:3", "Gtilde:4",
        ] {
            assert_eq!(dom(name).to_string(), name);
        }
        assert_eq!(dom("hartogs:2").to_string(), "hartogs:2/1");
        assert!("banana".parse::<DomainSpec>().is_err());
        assert!("annulus:1.5".parse::<DomainSpec>().is_err());
        assert!("Gtilde:1".parse::<DomainSpec>().is_err());
    }

    #[test]
    fn tetrablock_examples() {
        let e = dom("tetrablock");
        assert!(e.contains(&[c(0.0, 0.0); 3]).unwrap());
        assert!(!e.contains(&[c(0.0, 1.0), c(1.0, 0.0), c(1.0, 0.0)]).unwrap());
        assert!(!e.contains(&[c(1.0, 0.0), c(0.0, 1.0), c(1.0, 0.0)]).unwrap());
        assert!(!e.contains(&[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)]).unwrap());
    }

    #[test]
    fn pentablock_examples() {
        let p = dom("pentablock");
        assert!(!p.contains(&[c(0.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]).unwrap());
        assert!(!p.contains(&[c(0.0, 0.0), c(0.0, 2.0), c(1.0, 0.0)]).unwrap());
        assert!(p.contains(&[c(0.0, 0.0); 3]).unwrap());
        // (0, 2r, r²) approaches (0, 2, 1) from inside; (0, 2ir, r²) does not.
        assert!(p.contains(&[c(0.0, 0.0), c(1.98, 0.0), c(0.9801, 0.0)]).unwrap());
        assert!(!p.contains(&[c(0.0, 0.0), c(0.0, 1.98), c(0.9801, 0.0)]).unwrap());
    }

    #[test]
    fn symm_polydisc_example() {
        let g2 = dom("Gn:2");
        assert!(g2.contains(&[c(0.0, 0.0), c(-0.25, 0.0)]).unwrap());
        assert!(!g2.contains(&[c(2.0, 0.0), c(1.0, 0.0)]).unwrap());
        let roots = symm_polydisc_root_moduli(&[c(0.0, 0.0), c(-0.25, 0.0)]).unwrap();
        assert!(roots.iter().all(|r| (r - 0.5).abs() < 1e-12));
    }

    #[test]
    fn s_is_the_operator_norm_ball() {
        let s = dom("S");
        // diag(0.9, 0.9) has norm 0.9.
        assert!(s.contains(&[c(0.9, 0.0), c(0.9, 0.0), c(0.0, 0.0)]).unwrap());
        // [[.9,.5],[.5,.9]] has eigenvalue 1.4.
        assert!(!s.contains(&[c(0.9, 0.0), c(0.9, 0.0), c(0.5, 0.0)]).unwrap());
        // diag(1.05, 0.3): inside the inequality with |det| instead of |det|², outside the ball.
        assert!(!s.contains(&[c(1.05, 0.0), c(0.3, 0.0), c(0.0, 0.0)]).unwrap());
        // diag(2, 2) passes 1 − ‖A‖²_F + |det|² > 0 on its own.
        assert!(!s.contains(&[c(2.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)]).unwrap());
    }

    #[test]
    fn s_matches_singular_values_of_symmetric_matrix() {
        use crate::numerics::{singular_values, ComplexMatrix};
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = dom("S");
        for _ in 0..2000 {
            let v: Vec<C64> = (0..3).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let a = ComplexMatrix::from_row_major(2, 2, vec![v[0], v[2], v[2], v[1]]).unwrap();
            let norm = singular_values(&a).sigma1();
            if (norm - 1.0).abs() > 1e-9 {
                assert_eq!(s.contains_point(&v), norm < 1.0);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(dom("tetrablock").contains(&[c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn bounding_boxes() {
        assert_eq!(dom("tetrablock").bounding_box(), &[1.0, 1.0, 1.0]);
        assert_eq!(dom("pentablock").bounding_box(), &[1.0, 2.0, 1.0]);
        assert_eq!(dom("Gn:3").bounding_box(), &[3.0, 3.0, 1.0]);
        assert_eq!(dom("Gtilde:4").bounding_box(), &[4.0, 6.0, 4.0, 1.0]);
    }

    #[test]
    fn laurent_flags_only_where_zero_is_excluded() {
        assert_eq!(dom("annulus:0.5").laurent(), &[true]);
        assert_eq!(dom("hartogs:2/1").laurent(), &[false, true]);
        assert!(dom("S").laurent().iter().all(|l| !l));
    }

    #[test]
    fn costara_examples() {
        assert_eq!(costara_sup(&[c(0.0, 0.0), c(0.0, 0.0)], 64), 0.0);
        assert!(costara_sup(&[c(0.0, 0.0), c(-0.25, 0.0)], 256) < 1.0);
        assert!(costara_sup(&[c(2.0, 0.0), c(1.0, 0.0)], 256) >= 1.0);
    }

    #[test]
    fn circularity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(circularity_check(&dom("S"), 300, 12, &mut rng).circular);
        assert!(circularity_check(&dom("L"), 300, 12, &mut rng).circular);
        assert!(circularity_check(&dom("polydisc:2"), 300, 12, &mut rng).circular);
        let e = circularity_check(&dom("tetrablock"), 2000, 12, &mut rng);
        assert!(!e.circular);
        let (w, theta) = e.witness.unwrap();
        let d = dom("tetrablock");
        assert!(d.contains_point(&w));
        let rotated: Vec<C64> = w.iter().map(|v| v * C64::from_polar(1.0, theta)).collect();
        assert!(!d.contains_point(&rotated));
    }

    #[test]
    fn tetrablock_characterizations_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut compared = 0;
        for _ in 0..10_000 {
            let x: Vec<C64> = (0..3)
                .map(|_| C64::from_polar(rng.random::<f64>().sqrt(), rng.random_range(0.0..std::f64::consts::TAU)))
                .collect();
            let m = tetrablock_margins(x[0], x[1], x[2]);
            if m.iter().any(|v| v.abs() < 1e-9) {
                continue;
            }
            compared += 1;
            assert_eq!(m[0] > 0.0, m[1] > 0.0, "{x:?}");
            assert_eq!(m[0] > 0.0, m[2] > 0.0, "{x:?}");
        }
        assert!(compared > 9_900);
    }

    #[test]
    fn tetrablock_beta_parametrization_is_inside() {
        // x1 = β1 + β̄2 x3, x2 = β2 + β̄1 x3 with |β1|+|β2| < 1, |x3| < 1.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let e = dom("tetrablock");
        for _ in 0..2000 {
            let t: f64 = rng.random_range(0.0..0.999);
            let split: f64 = rng.random();
            let b1 = C64::from_polar(t * split, rng.random_range(0.0..6.3));
            let b2 = C64::from_polar(t * (1.0 - split), rng.random_range(0.0..6.3));
            let x3 = C64::from_polar(rng.random::<f64>().sqrt() * 0.999, rng.random_range(0.0..6.3));
            let x = [b1 + b2.conj() * x3, b2 + b1.conj() * x3, x3];
            assert!(e.contains_point(&x), "{x:?}");
        }
    }

    #[test]
    fn pentablock_characterizations_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut compared = 0;
        for _ in 0..1000 {
            let l1 = C64::from_polar(rng.random::<f64>().sqrt() * 0.999, rng.random_range(0.0..6.3));
            let l2 = C64::from_polar(rng.random::<f64>().sqrt() * 0.999, rng.random_range(0.0..6.3));
            let (s, p) = (l1 + l2, l1 * l2);
            let a = C64::from_polar(rng.random::<f64>() * 1.2, rng.random_range(0.0..6.3));
            let b1 = pentablock_bound(s, p);
            let b2 = pentablock_bound_lambda(s, p).unwrap();
            if (a.norm() - b1).abs() < 1e-9 || (a.norm() - b2).abs() < 1e-9 {
                continue;
            }
            compared += 1;
            assert_eq!(a.norm() < b1, a.norm() < b2, "s={s} p={p} a={a} {b1} {b2}");
        }
        assert!(compared > 990);
    }

    #[test]
    fn gn_root_test_agrees_with_costara() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for n in 2..=4 {
            let d = DomainSpec::new(DomainKind::SymmPolydisc(n)).unwrap();
            let mut compared = 0;
            for _ in 0..400 {
                let roots: Vec<C64> = (0..n)
                    .map(|_| C64::from_polar(rng.random_range(0.0..1.3), rng.random_range(0.0..6.3)))
                    .collect();
                if roots.iter().any(|r| (r.norm() - 1.0).abs() < 1e-3) {
                    continue;
                }
                let coeffs = crate::maps::poly::monic_from_roots(&roots);
                // s_k = (−1)^k a_{n−k}
                let s: Vec<C64> = (1..=n)
                    .map(|k| if k.is_multiple_of(2) { coeffs[n - k] } else { -coeffs[n - k] })
                    .collect();
                let inside = d.contains_point(&s);
                assert_eq!(inside, roots.iter().all(|r| r.norm() < 1.0));
                assert_eq!(inside, costara_sup(&s, 512) < 1.0, "n={n} roots={roots:?}");
                compared += 1;
            }
            assert!(compared > 300);
        }
    }

    #[test]
    fn ext_symm_polydisc_reduces_to_known_domains() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let g2 = dom("Gn:2");
        let gt2 = dom("Gtilde:2");
        let e = dom("tetrablock");
        let gt3 = dom("Gtilde:3");
        for _ in 0..5000 {
            let p: Vec<C64> = (0..2)
                .map(|i| C64::from_polar(rng.random::<f64>().sqrt() * [2.0, 1.0][i], rng.random_range(0.0..6.3)))
                .collect();
            assert_eq!(g2.contains_point(&p), gt2.contains_point(&p));
            let y: Vec<C64> = (0..3)
                .map(|i| C64::from_polar(rng.random::<f64>().sqrt() * [3.0, 3.0, 1.0][i], rng.random_range(0.0..6.3)))
                .collect();
            let m = tetrablock_margins(y[0] / 3.0, y[1] / 3.0, y[2]);
            if m[0].abs() > 1e-9 {
                assert_eq!(gt3.contains_point(&y), e.contains_point(&[y[0] / 3.0, y[1] / 3.0, y[2]]));
            }
        }
    }

    #[test]
    fn ext_symm_beta_is_unique_under_random_search() {
        // Rejected points admit no admissible β: random admissible β never reproduce them.
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let n = 4;
        let d = DomainSpec::new(DomainKind::ExtSymmPolydisc(n)).unwrap();
        let bound = [4.0, 6.0, 4.0];
        let mut rejected = 0;
        while rejected < 50 {
            let z: Vec<C64> = d
                .bounding_box()
                .iter()
                .map(|&r| C64::from_polar(r * rng.random::<f64>().sqrt(), rng.random_range(0.0..6.3)))
                .collect();
            if d.contains_point(&z) || z[3].norm() >= 1.0 {
                continue;
            }
            rejected += 1;
            let q = z[3];
            let beta0 = ext_symm_beta(&z[..3], q);
            let mut best = f64::INFINITY;
            for _ in 0..2000 {
                let scale: f64 = rng.random();
                let mut beta: Vec<C64> = beta0
                    .iter()
                    .map(|b| b * scale + C64::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05)))
                    .collect();
                for j in 0..3 {
                    let sum = beta[j].norm() + beta[2 - j].norm();
                    if sum >= bound[j] {
                        let f = 0.999 * bound[j] / sum;
                        beta[j] *= f;
                        beta[2 - j] *= f;
                    }
                }
                let resid = (0..3)
                    .map(|j| (beta[j] + beta[2 - j].conj() * q - z[j]).norm())
                    .fold(0.0, f64::max);
                best = best.min(resid);
            }
            assert!(best > 1e-9, "alternative β found for {z:?}");
        }
    }

    #[test]
    fn ext_symm_beta_parametrization_is_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let d = dom("Gtilde:4");
        let bound = [4.0, 6.0, 4.0];
        for _ in 0..2000 {
            let q = C64::from_polar(rng.random::<f64>().sqrt() * 0.999, rng.random_range(0.0..6.3));
            let mut beta = [C64::new(0.0, 0.0); 3];
            let t1: f64 = rng.random_range(0.0..0.999);
            let split: f64 = rng.random();
            beta[0] = C64::from_polar(bound[0] * t1 * split, rng.random_range(0.0..6.3));
            beta[2] = C64::from_polar(bound[0] * t1 * (1.0 - split), rng.random_range(0.0..6.3));
            beta[1] = C64::from_polar(bound[1] / 2.0 * rng.random_range(0.0..0.999), rng.random_range(0.0..6.3));
            let y: Vec<C64> = (0..3).map(|j| beta[j] + beta[2 - j].conj() * q).collect();
            assert!(d.contains_point(&[y[0], y[1], y[2], q]));
        }
    }

    #[test]
    fn symmetrized_polydisc_lies_in_extended_one() {
        // Images of polydisc points pass both the prefilter and the root test.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in 3..=5 {
            let pi: crate::maps::ProperMapSpec = format!("pi:{n}").parse().unwrap();
            for _ in 0..20_000 {
                let z: Vec<C64> = (0..n)
                    .map(|_| C64::from_polar(rng.random::<f64>().sqrt() * 0.999, rng.random::<f64>() * 6.3))
                    .collect();
                let s = pi.apply(&z).unwrap();
                assert!(in_ext_symm_polydisc(&s), "{s:?}");
                assert!(in_symm_polydisc(&s));
            }
        }
    }
}
