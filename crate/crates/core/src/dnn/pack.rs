//! Pairs of real columns become one complex mode: `Wc[i,k] = W[i,2k] + i W[i,2k+1]`
//! and `xc[k] = x[2k] - i x[2k+1]`, so that `Re(Wc . xc) = W . x`.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;

use crate::gaussian::ComplexVec;

#[derive(Clone, Debug, PartialEq)]
pub struct PackedLayer {
    wc: Array2<Complex64>,
    source_cols: usize,
}

impl PackedLayer {
    pub fn new(w: ArrayView2<'_, f64>) -> Self {
        let (rows, cols) = w.dim();
        let modes = cols.div_ceil(2);
        let wc = Array2::from_shape_fn((rows, modes), |(i, k)| {
            let re = w[(i, 2 * k)];
            let im = if 2 * k + 1 < cols {
                w[(i, 2 * k + 1)]
            } else {
                0.0
            };
            Complex64::new(re, im)
        });
        PackedLayer {
            wc,
            source_cols: cols,
        }
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.wc
    }

    pub fn modes(&self) -> usize {
        self.wc.ncols()
    }

    pub fn source_cols(&self) -> usize {
        self.source_cols
    }

    /// Inverse of [`PackedLayer::new`]; drops the zero padding column.
    pub fn unpack(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.wc.nrows(), self.source_cols), |(i, j)| {
            let c = self.wc[(i, j / 2)];
            if j % 2 == 0 {
                c.re
            } else {
                c.im
            }
        })
    }

    /// `Re(Wc . xc)` for every row.
    pub fn real_matvec(&self, xc: &ComplexVec) -> Vec<f64> {
        self.wc
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(xc.as_slice()).map(|(w, x)| (w * x).re).sum())
            .collect()
    }
}

/// Packs a data vector, zero-padding odd lengths.
pub fn pack_vector(x: &[f64]) -> ComplexVec {
    ComplexVec::new(
        x.chunks(2)
            .map(|p| Complex64::new(p[0], -p.get(1).copied().unwrap_or(0.0)))
            .collect(),
    )
}

pub fn complex_pack(w: ArrayView2<'_, f64>, x: &[f64]) -> (PackedLayer, ComplexVec) {
    (PackedLayer::new(w), pack_vector(x))
}
