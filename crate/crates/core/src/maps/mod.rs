//! Proper holomorphic covering maps: evaluation, Jacobians, deck
//! transformations and fibers.

pub mod poly;

use crate::domains::{DomainKind, DomainSpec};
use crate::error::{Error, Result};
use crate::numerics::C64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Roots closer than this are treated as one multiple root.
pub const BRANCH_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MapKind {
    /// `(x, y, z) ↦ (x, y, xy − z²)`, S → tetrablock.
    Phi,
    /// `(x, y, z) ↦ (z, x + y, xy)`, L → pentablock.
    Psi,
    /// Elementary symmetric polynomials, 𝔻ⁿ → Gₙ.
    Pi(usize),
}

/// A deck transformation `z ↦ (sign_i · z_{perm_i})_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Deck {
    perm: Vec<usize>,
    sign: Vec<f64>,
}

impl Deck {
    pub fn identity(n: usize) -> Self {
        Self {
            perm: (0..n).collect(),
            sign: vec![1.0; n],
        }
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p) && self.sign.iter().all(|&s| s == 1.0)
    }

    #[inline]
    pub fn apply_into(&self, z: &[C64], out: &mut [C64]) {
        for ((o, &p), &s) in out.iter_mut().zip(&self.perm).zip(&self.sign) {
            *o = z[p] * s;
        }
    }

    pub fn apply(&self, z: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); z.len()];
        self.apply_into(z, &mut out);
        out
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn signs(&self) -> &[f64] {
        &self.sign
    }
}

/// All permutations of `0..n` in lexicographic order (identity first).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut cur: Vec<usize> = (0..n).collect();
    let mut out = vec![cur.clone()];
    loop {
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProperMapSpec {
    kind: MapKind,
    source: DomainSpec,
    target: DomainSpec,
}

/// Preimages of one target point, counted with multiplicity.
#[derive(Debug, Clone, Serialize)]
pub struct Fiber {
    pub base: Vec<C64>,
    pub preimages: Vec<Vec<C64>>,
    pub max_residual: f64,
}

impl ProperMapSpec {
    pub fn new(kind: MapKind) -> Result<Self> {
        let (source, target) = match kind {
            MapKind::Phi => (DomainKind::S, DomainKind::Tetrablock),
            MapKind::Psi => (DomainKind::L, DomainKind::Pentablock),
            MapKind::Pi(n) => {
                if n < 1 {
                    return Err(Error::InvalidConfig("pi:n needs n ≥ 1".into()));
                }
                (DomainKind::Polydisc(n), DomainKind::SymmPolydisc(n))
            }
        };
        Ok(Self {
            kind,
            source: DomainSpec::new(source)?,
            target: DomainSpec::new(target)?,
        })
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn source(&self) -> &DomainSpec {
        &self.source
    }

    pub fn target(&self) -> &DomainSpec {
        &self.target
    }

    pub fn dimension(&self) -> usize {
        self.source.dimension()
    }

    pub fn multiplicity(&self) -> usize {
        match self.kind {
            MapKind::Phi | MapKind::Psi => 2,
            MapKind::Pi(n) => (1..=n).product(),
        }
    }

    /// Homogeneity degree of the Jacobian determinant.
    pub fn jacobian_degree(&self) -> usize {
        match self.kind {
            MapKind::Phi | MapKind::Psi => 1,
            MapKind::Pi(n) => n * (n - 1) / 2,
        }
    }

    /// Largest total degree of a component polynomial; a target monomial of
    /// degree `d` pulls back to degree at most `d` times this.
    pub fn max_component_degree(&self) -> usize {
        match self.kind {
            MapKind::Phi | MapKind::Psi => 2,
            MapKind::Pi(n) => n,
        }
    }

    /// Total degree of each component polynomial.
    pub fn component_degrees(&self) -> Vec<usize> {
        match self.kind {
            MapKind::Phi => vec![1, 1, 2],
            MapKind::Psi => vec![1, 1, 2],
            MapKind::Pi(n) => (1..=n).collect(),
        }
    }

    fn check_dim(&self, z: &[C64], n: usize) -> Result<()> {
        if z.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: z.len(),
            });
        }
        Ok(())
    }

    /// Image of `z` without any checks.
    #[inline]
    pub fn apply_into(&self, z: &[C64], out: &mut [C64]) {
        match self.kind {
            MapKind::Phi => {
                out[0] = z[0];
                out[1] = z[1];
                out[2] = z[0] * z[1] - z[2] * z[2];
            }
            MapKind::Psi => {
                out[0] = z[2];
                out[1] = z[0] + z[1];
                out[2] = z[0] * z[1];
            }
            MapKind::Pi(n) => {
                // e_k via the recurrence e_k ← e_k + z_j e_{k−1}.
                let mut e = [C64::new(0.0, 0.0); 16];
                if n < e.len() {
                    e[0] = C64::new(1.0, 0.0);
                    for (j, &zj) in z.iter().enumerate() {
                        for k in (1..=j + 1).rev() {
                            e[k] += zj * e[k - 1];
                        }
                    }
                    out[..n].copy_from_slice(&e[1..=n]);
                } else {
                    let c = poly::monic_from_roots(z);
                    for k in 1..=n {
                        let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                        out[k - 1] = c[n - k] * s;
                    }
                }
            }
        }
    }

    pub fn apply(&self, z: &[C64]) -> Result<Vec<C64>> {
        self.check_dim(z, self.dimension())?;
        let mut out = vec![C64::new(0.0, 0.0); self.dimension()];
        self.apply_into(z, &mut out);
        Ok(out)
    }

    /// Image plus a flag telling whether `z` was inside the source domain.
    pub fn apply_flagged(&self, z: &[C64]) -> Result<(Vec<C64>, bool)> {
        let w = self.apply(z)?;
        Ok((w, self.source.contains_point(z)))
    }

    #[inline]
    pub fn jacobian(&self, z: &[C64]) -> C64 {
        match self.kind {
            MapKind::Phi => z[2] * -2.0,
            MapKind::Psi => z[0] - z[1],
            MapKind::Pi(n) => {
                let mut j = C64::new(1.0, 0.0);
                for a in 0..n {
                    for b in a + 1..n {
                        j *= z[a] - z[b];
                    }
                }
                j
            }
        }
    }

    /// The `m` deck transformations, identity first.
    pub fn deck_transforms(&self) -> Vec<Deck> {
        match self.kind {
            MapKind::Phi => vec![
                Deck::identity(3),
                Deck {
                    perm: vec![0, 1, 2],
                    sign: vec![1.0, 1.0, -1.0],
                },
            ],
            MapKind::Psi => vec![
                Deck::identity(3),
                Deck {
                    perm: vec![1, 0, 2],
                    sign: vec![1.0; 3],
                },
            ],
            MapKind::Pi(n) => permutations(n)
                .into_iter()
                .map(|perm| Deck {
                    perm,
                    sign: vec![1.0; n],
                })
                .collect(),
        }
    }

    /// All `m` preimages of `w`, repeated according to multiplicity.
    pub fn preimages(&self, w: &[C64], tol: f64) -> Result<Fiber> {
        self.check_dim(w, self.dimension())?;
        let base_point: Vec<C64> = match self.kind {
            MapKind::Phi => {
                let z = (w[0] * w[1] - w[2]).sqrt();
                vec![w[0], w[1], z]
            }
            MapKind::Psi => {
                // Roots of t² − s t + p without cancellation.
                let (s, p) = (w[1], w[2]);
                let disc = (s * s - p * 4.0).sqrt();
                let big = if (s + disc).norm() >= (s - disc).norm() { s + disc } else { s - disc } * 0.5;
                let mut r = if big.norm() == 0.0 { [big, big] } else { [big, p / big] };
                poly::cluster_roots(&mut r, BRANCH_TOL);
                vec![r[0], r[1], w[0]]
            }
            MapKind::Pi(n) => {
                let mut c = vec![C64::new(1.0, 0.0); n + 1];
                for k in 1..=n {
                    let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                    c[n - k] = w[k - 1] * s;
                }
                let mut r = poly::poly_roots(&c)?;
                poly::cluster_roots(&mut r, BRANCH_TOL);
                r
            }
        };
        let preimages: Vec<Vec<C64>> = self.deck_transforms().iter().map(|d| d.apply(&base_point)).collect();
        let mut img = vec![C64::new(0.0, 0.0); w.len()];
        let mut max_residual: f64 = 0.0;
        for p in &preimages {
            self.apply_into(p, &mut img);
            for (a, b) in img.iter().zip(w) {
                max_residual = max_residual.max((a - b).norm());
            }
        }
        if !(max_residual <= tol) {
            return Err(Error::RootRefinementFailed {
                residual: max_residual,
                tol,
            });
        }
        Ok(Fiber {
            base: w.to_vec(),
            preimages,
            max_residual,
        })
    }
}

impl fmt::Display for ProperMapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            MapKind::Phi => write!(f, "Phi"),
            MapKind::Psi => write!(f, "Psi"),
            MapKind::Pi(n) => write!(f, "pi:{n}"),
        }
    }
}

impl FromStr for ProperMapSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::Unknown {
            kind: "map",
            name: s.to_string(),
        };
        let kind = match s {
            "Phi" => MapKind::Phi,
            "Psi" => MapKind::Psi,
            _ => match s.strip_prefix("pi:") {
                Some(n) => MapKind::Pi(n.parse().map_err(|_| unknown())?),
                None => return Err(unknown()),
            },
        };
        ProperMapSpec::new(kind)
    }
}
