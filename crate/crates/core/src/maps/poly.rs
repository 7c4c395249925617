//! Univariate complex polynomials: roots and unit-disc root location.
//!
//! Coefficients are stored in ascending order, `a[0] + a[1] t + … + a[n] tⁿ`.

use crate::error::{Error, Result};
use crate::numerics::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Horner evaluation.
pub fn eval(coeffs: &[C64], t: C64) -> C64 {
    coeffs.iter().rev().fold(ZERO, |acc, &a| acc * t + a)
}

fn eval_with_derivative(coeffs: &[C64], t: C64) -> (C64, C64) {
    let mut p = ZERO;
    let mut dp = ZERO;
    for &a in coeffs.iter().rev() {
        dp = dp * t + p;
        p = p * t + a;
    }
    (p, dp)
}

/// Ascending coefficients of the monic polynomial `∏ (t − r)`.
pub fn monic_from_roots(roots: &[C64]) -> Vec<C64> {
    let mut c = vec![ONE];
    for &r in roots {
        let mut next = vec![ZERO; c.len() + 1];
        for (k, &ck) in c.iter().enumerate() {
            next[k + 1] += ck;
            next[k] -= r * ck;
        }
        c = next;
    }
    c
}

fn residual_scale(coeffs: &[C64]) -> f64 {
    coeffs.iter().map(|a| a.norm()).fold(1.0, f64::max)
}

/// Largest `|p(r)|` over the given roots.
pub fn max_residual(coeffs: &[C64], roots: &[C64]) -> f64 {
    roots.iter().map(|&r| eval(coeffs, r).norm()).fold(0.0, f64::max)
}

/// Residual bound accepted by [`poly_roots`]: `1e-10 × max(1, max|a_k|)`.
pub fn residual_tolerance(coeffs: &[C64]) -> f64 {
    1e-10 * residual_scale(coeffs)
}

/// All roots of a monic polynomial.
///
/// Durand–Kerner simultaneous iteration first; if its residual misses the
/// bound, the eigenvalues of the companion matrix are used instead.
pub fn poly_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let n = coeffs.len().saturating_sub(1);
    if n == 0 {
        return Err(Error::InvalidConfig("polynomial degree must be at least 1".into()));
    }
    if (coeffs[n] - ONE).norm() > 1e-12 {
        return Err(Error::InvalidConfig("polynomial must be monic".into()));
    }
    if coeffs.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("polynomial coefficient".into()));
    }
    let tol = residual_tolerance(coeffs);
    if n == 1 {
        return Ok(vec![-coeffs[0]]);
    }

    let mut roots = durand_kerner(coeffs, 2000);
    polish(coeffs, &mut roots);
    let mut res = max_residual(coeffs, &roots);
    if res <= tol {
        return Ok(roots);
    }
    if let Some(mut alt) = companion_roots(coeffs) {
        polish(coeffs, &mut alt);
        let alt_res = max_residual(coeffs, &alt);
        if alt_res <= tol {
            return Ok(alt);
        }
        res = res.min(alt_res);
    }
    Err(Error::RootsNotConverged { residual: res })
}

fn durand_kerner(coeffs: &[C64], max_iter: usize) -> Vec<C64> {
    let n = coeffs.len() - 1;
    // Fujiwara-type radius for the starting circle.
    let radius = (1..=n)
        .map(|k| coeffs[n - k].norm().powf(1.0 / k as f64))
        .fold(0.5, f64::max);
    let mut z: Vec<C64> = (0..n)
        .map(|k| C64::from_polar(radius, 0.4 + std::f64::consts::TAU * k as f64 / n as f64))
        .collect();
    for _ in 0..max_iter {
        let mut max_step: f64 = 0.0;
        for i in 0..n {
            let mut denom = ONE;
            for j in 0..n {
                if i != j {
                    denom *= z[i] - z[j];
                }
            }
            if denom == ZERO {
                denom = C64::new(1e-300, 0.0);
            }
            let step = eval(coeffs, z[i]) / denom;
            if step.is_finite() {
                z[i] -= step;
                max_step = max_step.max(step.norm() / z[i].norm().max(1.0));
            }
        }
        if max_step <= 1e-16 {
            break;
        }
    }
    z
}

/// A few Newton steps per root, kept only when they reduce the residual.
fn polish(coeffs: &[C64], roots: &mut [C64]) {
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = eval_with_derivative(coeffs, *r);
            if dp.norm() == 0.0 {
                break;
            }
            let cand = *r - p / dp;
            if cand.is_finite() && eval(coeffs, cand).norm() < p.norm() {
                *r = cand;
            } else {
                break;
            }
        }
    }
}

/// Eigenvalues of the companion matrix by shifted QR on its Hessenberg form.
pub fn companion_roots(coeffs: &[C64]) -> Option<Vec<C64>> {
    let n = coeffs.len() - 1;
    let mut h = vec![vec![ZERO; n]; n];
    for i in 1..n {
        h[i][i - 1] = ONE;
    }
    for (i, row) in h.iter_mut().enumerate() {
        row[n - 1] = -coeffs[i];
    }
    hessenberg_eigenvalues(h)
}

fn hessenberg_eigenvalues(mut h: Vec<Vec<C64>>) -> Option<Vec<C64>> {
    let n = h.len();
    let eps = f64::EPSILON;
    let mut eig = Vec::with_capacity(n);
    let mut hi = n as isize - 1;
    let mut iter = 0usize;
    while hi >= 0 {
        let hiu = hi as usize;
        if hiu == 0 {
            eig.push(h[0][0]);
            break;
        }
        let mut lo = hiu;
        while lo > 0 {
            let s = h[lo][lo].norm() + h[lo - 1][lo - 1].norm();
            let s = if s == 0.0 { 1.0 } else { s };
            if h[lo][lo - 1].norm() <= eps * s {
                h[lo][lo - 1] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hiu {
            eig.push(h[hiu][hiu]);
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > 200 {
            return None;
        }
        // Wilkinson shift from the trailing 2×2 block.
        let (a, b, c, d) = (h[hiu - 1][hiu - 1], h[hiu - 1][hiu], h[hiu][hiu - 1], h[hiu][hiu]);
        let half = (a - d) * 0.5;
        let disc = (half * half + b * c).sqrt();
        let m1 = (a + d) * 0.5 + disc;
        let m2 = (a + d) * 0.5 - disc;
        let mut mu = if (m1 - d).norm() < (m2 - d).norm() { m1 } else { m2 };
        if iter.is_multiple_of(11) {
            mu += C64::new(h[hiu][hiu - 1].norm(), 0.0) * 0.75;
        }
        for k in lo..=hiu {
            h[k][k] -= mu;
        }
        let mut rots = Vec::with_capacity(hiu - lo);
        for k in lo..hiu {
            let x = h[k][k];
            let y = h[k + 1][k];
            let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
            let (cg, sg) = if r == 0.0 { (ONE, ZERO) } else { (x / r, y / r) };
            for j in k..=hiu {
                let top = h[k][j];
                let bot = h[k + 1][j];
                h[k][j] = cg.conj() * top + sg.conj() * bot;
                h[k + 1][j] = -sg * top + cg * bot;
            }
            rots.push((cg, sg));
        }
        for (idx, (cg, sg)) in rots.into_iter().enumerate() {
            let k = lo + idx;
            let row_end = (k + 2).min(hiu);
            for row in h.iter_mut().take(row_end + 1).skip(lo) {
                let left = row[k];
                let right = row[k + 1];
                row[k] = left * cg + right * sg;
                row[k + 1] = -left * sg.conj() + right * cg.conj();
            }
        }
        for k in lo..=hiu {
            h[k][k] += mu;
        }
    }
    Some(eig)
}

/// Whether every root of the polynomial lies in the open unit disc.
///
/// Schur–Cohn reduction: with `|a₀| < |a_n|`, `(p − (a₀/ā_n) p*)/t` has one
/// root fewer inside the disc and the same number outside.
pub fn roots_in_open_unit_disc(coeffs: &[C64]) -> bool {
    const CAP: usize = 17;
    if coeffs.len() > CAP {
        return schur_cohn_heap(coeffs.to_vec());
    }
    let mut a = [ZERO; CAP];
    let mut next = [ZERO; CAP];
    let mut len = coeffs.len();
    a[..len].copy_from_slice(coeffs);
    while len > 1 && a[len - 1] == ZERO {
        len -= 1;
    }
    loop {
        let m = len - 1;
        if m == 0 {
            return a[0] != ZERO;
        }
        let lead = a[m];
        if a[0].norm_sqr() >= lead.norm_sqr() {
            return false;
        }
        let c = a[0] / lead.conj();
        let mut big: f64 = 0.0;
        for k in 1..=m {
            next[k - 1] = a[k] - c * a[m - k].conj();
            big = big.max(next[k - 1].norm_sqr());
        }
        if big == 0.0 || !big.is_finite() {
            return false;
        }
        len = m;
        if (1e-100..=1e100).contains(&big) {
            a[..len].copy_from_slice(&next[..len]);
        } else {
            let inv = 1.0 / big.sqrt();
            for k in 0..len {
                a[k] = next[k] * inv;
            }
        }
    }
}

fn schur_cohn_heap(mut a: Vec<C64>) -> bool {
    while a.len() > 1 && a[a.len() - 1] == ZERO {
        a.pop();
    }
    loop {
        let m = a.len() - 1;
        if m == 0 {
            return a[0] != ZERO;
        }
        let lead = a[m];
        if a[0].norm() >= lead.norm() {
            return false;
        }
        let c = a[0] / lead.conj();
        let next: Vec<C64> = (1..=m).map(|k| a[k] - c * a[m - k].conj()).collect();
        let scale = next.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 || !scale.is_finite() {
            return false;
        }
        a = next.into_iter().map(|z| z / scale).collect();
    }
}

/// Replaces roots closer than `tol` to one another by their cluster mean.
pub fn cluster_roots(roots: &mut [C64], tol: f64) {
    let n = roots.len();
    let mut label: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in 0..i {
            if (roots[i] - roots[j]).norm() < tol {
                let (li, lj) = (label[i], label[j]);
                for l in label.iter_mut() {
                    if *l == li {
                        *l = lj;
                    }
                }
            }
        }
    }
    for group in 0..n {
        let members: Vec<usize> = (0..n).filter(|&i| label[i] == group).collect();
        if members.len() > 1 {
            let mean = members.iter().map(|&i| roots[i]).sum::<C64>() / members.len() as f64;
            for i in members {
                roots[i] = mean;
            }
        }
    }
}
