//! Deterministic quasi-random sample points.

use alloc::vec::Vec;

fn primes(count: usize) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::with_capacity(count);
    let mut c = 2u64;
    while out.len() < count {
        if out.iter().take_while(|&&p| p * p <= c).all(|&p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

/// Radical inverse of `index` in base `b`.
pub fn radical_inverse(mut index: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % b) as f64;
        index /= b;
        f *= inv;
    }
    r
}

/// Halton sequence in `[0,1)^dim`, starting at index 1 so the origin is
/// never produced.
#[derive(Clone, Debug)]
pub struct Halton {
    bases: Vec<u64>,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize) -> Self {
        Halton { bases: primes(dim), index: 1 }
    }

    pub fn dim(&self) -> usize {
        self.bases.len()
    }
}

impl Iterator for Halton {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let i = self.index;
        self.index += 1;
        Some(self.bases.iter().map(|&b| radical_inverse(i, b)).collect())
    }
}

/// An axis-aligned box `[lo_j, hi_j]` per coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SampleBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len(), "box bounds differ in length");
        SampleBox { lo, hi }
    }

    /// `[a, b]^dim`.
    pub fn cube(dim: usize, a: f64, b: f64) -> Self {
        SampleBox::new(alloc::vec![a; dim], alloc::vec![b; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// The first `count` Halton points mapped into the box.
    pub fn halton(&self, count: usize) -> Vec<Vec<f64>> {
        Halton::new(self.dim())
            .take(count)
            .map(|u| u.iter().zip(self.lo.iter().zip(&self.hi)).map(|(t, (a, b))| a + t * (b - a)).collect())
            .collect()
    }
}

/// Default number of sample points for pointwise checks.
pub const DEFAULT_SAMPLES: usize = 100;
