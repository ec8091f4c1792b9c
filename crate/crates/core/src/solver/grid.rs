use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, Real};

/// Uniform cell-centred grid on `[xmin, xmax]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    pub xmin: T,
    pub xmax: T,
    pub n: usize,
}

impl<T: Real> Grid<T> {
    pub fn new(xmin: T, xmax: T, n: usize) -> Result<Self> {
        if !(xmax > xmin) || !xmin.is_finite() || !xmax.is_finite() {
            return Err(Error::InvalidParameter("grid needs finite xmin < xmax".into()));
        }
        if n < 4 {
            return Err(Error::InvalidParameter(format!("grid needs at least 4 cells, got {n}")));
        }
        Ok(Self { xmin, xmax, n })
    }

    pub fn length(&self) -> T {
        self.xmax - self.xmin
    }

    pub fn dx(&self) -> T {
        self.length() / from_usize(self.n)
    }

    /// Centre of cell `i`; also valid for ghost indices given as signed offsets.
    pub fn x(&self, i: isize) -> T {
        self.xmin + (T::from_isize(i).expect("index") + lit(0.5)) * self.dx()
    }

    pub fn centers(&self) -> Vec<T> {
        (0..self.n as isize).map(|i| self.x(i)).collect()
    }

    /// Same interval with `n * factor` cells.
    pub fn refined(&self, factor: usize) -> Self {
        Self { n: self.n * factor, ..*self }
    }
}

/// Cell values of an `n`-component field, stored cell-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile<T> {
    pub comps: usize,
    pub data: Vec<T>,
}

impl<T: Real> Profile<T> {
    pub fn zeros(cells: usize, comps: usize) -> Self {
        Self { comps, data: vec![T::zero(); cells * comps] }
    }

    /// Samples `f` at the cell centres (midpoint-rule cell averages).
    pub fn from_fn(grid: &Grid<T>, comps: usize, f: impl Fn(T) -> Vec<T>) -> Self {
        let mut p = Self::zeros(grid.n, comps);
        for (i, x) in grid.centers().into_iter().enumerate() {
            p.cell_mut(i).copy_from_slice(&f(x));
        }
        p
    }

    pub fn cells(&self) -> usize {
        if self.comps == 0 { 0 } else { self.data.len() / self.comps }
    }

    pub fn cell(&self, i: usize) -> &[T] {
        &self.data[i * self.comps..(i + 1) * self.comps]
    }

    pub fn cell_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.comps..(i + 1) * self.comps]
    }

    pub fn iter_cells(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks(self.comps)
    }

    pub fn component(&self, k: usize) -> Vec<T> {
        self.iter_cells().map(|c| c[k]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    /// Averages groups of `factor` consecutive cells.
    pub fn restrict(&self, factor: usize) -> Self {
        let cells = self.cells() / factor;
        let mut out = Self::zeros(cells, self.comps);
        let w = T::one() / from_usize(factor);
        for i in 0..cells {
            for j in 0..factor {
                let src = self.cell(i * factor + j).to_vec();
                for (o, s) in out.cell_mut(i).iter_mut().zip(src) {
                    *o = *o + s * w;
                }
            }
        }
        out
    }

    pub fn map_cells(&self, out_comps: usize, f: impl Fn(&[T]) -> Vec<T>) -> Self {
        let mut out = Self::zeros(self.cells(), out_comps);
        for i in 0..self.cells() {
            out.cell_mut(i).copy_from_slice(&f(self.cell(i)));
        }
        out
    }

    /// `sum_i |p_i|^2 dx`.
    pub fn l2_squared(&self, dx: T) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>() * dx
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { comps: self.comps, data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect() }
    }
}
