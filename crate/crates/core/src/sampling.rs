//! Deterministic quasi-random sampling of a working box of states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Axis-aligned box of states on which structural conditions are checked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkingBox<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Real> WorkingBox<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidParameter("working box bounds must have equal, nonzero length".into()));
        }
        if lo.iter().zip(&hi).any(|(&a, &b)| !(a <= b)) {
            return Err(Error::InvalidParameter("working box lower bound exceeds upper bound".into()));
        }
        Ok(Self { lo, hi })
    }

    /// `[-r, r]^n`.
    pub fn symmetric(n: usize, r: T) -> Self {
        Self { lo: vec![-r; n], hi: vec![r; n] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, u: &[T]) -> bool {
        u.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&x, (&a, &b))| x >= a && x <= b)
    }

    /// Box scaled about its centre by `factor`.
    pub fn inflated(&self, factor: T) -> Self {
        let half = lit::<T>(0.5);
        let (lo, hi) = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| {
                let c = (a + b) * half;
                let r = (b - a) * half * factor;
                (c - r, c + r)
            })
            .unzip();
        Self { lo, hi }
    }

    pub fn max_abs(&self) -> Vec<T> {
        self.lo.iter().zip(&self.hi).map(|(&a, &b)| a.abs().max(b.abs())).collect()
    }

    pub fn corners(&self) -> Vec<Vec<T>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| (0..n).map(|k| if mask >> k & 1 == 1 { self.hi[k] } else { self.lo[k] }).collect())
            .collect()
    }

    fn map_unit(&self, unit: impl Fn(usize) -> f32) -> Vec<T> {
        (0..self.dim())
            .map(|k| {
                let s: T = lit(unit(k) as f64);
                self.lo[k] + (self.hi[k] - self.lo[k]) * s
            })
            .collect()
    }

    /// Box corners followed by `n` scrambled Sobol points.
    ///
    /// The Sobol part of a larger `n` extends the smaller one, so refining a
    /// check never discards an earlier witness.
    pub fn sample(&self, n: usize, seed: u32) -> Vec<Vec<T>> {
        let mut pts = self.corners();
        pts.extend((0..n).map(|i| self.map_unit(|k| sobol_burley::sample(i as u32, k as u32, seed))));
        pts
    }

    /// `n` pairs of states drawn from independent Sobol dimensions.
    pub fn sample_pairs(&self, n: usize, seed: u32) -> Vec<(Vec<T>, Vec<T>)> {
        let d = self.dim() as u32;
        (0..n)
            .map(|i| {
                let a = self.map_unit(|k| sobol_burley::sample(i as u32, k as u32, seed));
                let b = self.map_unit(|k| sobol_burley::sample(i as u32, d + k as u32, seed));
                (a, b)
            })
            .collect()
    }

    /// `n` unit-norm direction tuples in `(R^dim)^count`.
    pub fn sample_directions(dim: usize, count: usize, n: usize, seed: u32) -> Vec<Vec<Vec<T>>> {
        (0..n)
            .map(|i| {
                let mut tuple: Vec<Vec<T>> = (0..count)
                    .map(|j| {
                        (0..dim)
                            .map(|k| {
                                let s = sobol_burley::sample(i as u32, (j * dim + k) as u32, seed) as f64;
                                lit(2.0 * s - 1.0)
                            })
                            .collect()
                    })
                    .collect();
                let norm = tuple.iter().flatten().map(|&x| x * x).sum::<T>().sqrt();
                if norm > T::zero() {
                    for x in tuple.iter_mut().flatten() {
                        *x = *x / norm;
                    }
                }
                tuple
            })
            .collect()
    }
}
