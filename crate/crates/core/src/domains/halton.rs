//! Halton low-discrepancy sequence with O(1) amortized increments.

/// The first `k` primes.
pub fn first_primes(k: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(k);
    let mut c = 2u64;
    while out.len() < k {
        if out.iter().take_while(|&&p| p * p <= c).all(|&p| !c.is_multiple_of(p)) {
            out.push(c);
        }
        c += 1;
    }
    out
}

/// Digit-reversal state for one base. The radical inverse is kept as the exact
/// integer `rev / base^K`.
#[derive(Debug, Clone)]
struct RadicalInverse {
    base: u64,
    digits: Vec<u64>,
    place: Vec<u64>,
    rev: u64,
    scale: f64,
}

impl RadicalInverse {
    fn new(base: u64, index: u64) -> Self {
        let mut k = 0usize;
        let mut cap: u64 = 1;
        while let Some(next) = cap.checked_mul(base) {
            if next > (1u64 << 62) {
                break;
            }
            cap = next;
            k += 1;
        }
        assert!(index < cap, "Halton index {index} exceeds base-{base} capacity");
        let place: Vec<u64> = (0..k).map(|i| base.pow((k - 1 - i) as u32)).collect();
        let mut digits = vec![0u64; k];
        let mut rev = 0u64;
        let mut rest = index;
        for i in 0..k {
            digits[i] = rest % base;
            rev += digits[i] * place[i];
            rest /= base;
        }
        Self {
            base,
            digits,
            place,
            rev,
            scale: 1.0 / cap as f64,
        }
    }

    #[inline]
    fn value(&self) -> f64 {
        self.rev as f64 * self.scale
    }

    #[inline]
    fn increment(&mut self) {
        let mut i = 0;
        while self.digits[i] == self.base - 1 {
            self.digits[i] = 0;
            self.rev -= (self.base - 1) * self.place[i];
            i += 1;
        }
        self.digits[i] += 1;
        self.rev += self.place[i];
    }
}

/// Multi-dimensional Halton stream in the first `dims` prime bases, starting
/// at an arbitrary index.
#[derive(Debug, Clone)]
pub struct HaltonStream {
    axes: Vec<RadicalInverse>,
}

impl HaltonStream {
    pub fn new(dims: usize, start_index: u64) -> Self {
        Self {
            axes: first_primes(dims)
                .into_iter()
                .map(|b| RadicalInverse::new(b, start_index))
                .collect(),
        }
    }

    /// Writes the current point into `out` and advances.
    #[inline]
    pub fn next_into(&mut self, out: &mut [f64]) {
        for (o, ax) in out.iter_mut().zip(self.axes.iter_mut()) {
            *o = ax.value();
            ax.increment();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radical_inverse(mut i: u64, b: u64) -> f64 {
        let mut f = 1.0;
        let mut r = 0.0;
        while i > 0 {
            f /= b as f64;
            r += f * (i % b) as f64;
            i /= b;
        }
        r
    }

    #[test]
    fn primes() {
        assert_eq!(first_primes(8), vec![2, 3, 5, 7, 11, 13, 17, 19]);
    }

    #[test]
    fn incremental_matches_direct() {
        let start = 123_456_789u64;
        let mut h = HaltonStream::new(6, start);
        let mut buf = [0.0; 6];
        let bases = first_primes(6);
        for k in 0..5000u64 {
            h.next_into(&mut buf);
            for (d, &b) in bases.iter().enumerate() {
                assert!((buf[d] - radical_inverse(start + k, b)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn van_der_corput_prefix() {
        let mut h = HaltonStream::new(1, 1);
        let mut buf = [0.0];
        let expect = [0.5, 0.25, 0.75, 0.125, 0.625];
        for e in expect {
            h.next_into(&mut buf);
            assert_eq!(buf[0], e);
        }
    }
}
