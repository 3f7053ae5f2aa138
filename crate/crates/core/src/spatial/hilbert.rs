use crate::error::{Error, Result};

/// Position of a grid cell along a `dims`-dimensional Hilbert curve with
/// `order` bits per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HilbertKey {
    pub order: u32,
    pub key: u64,
}

/// Order used when none is configured: 8 bits per axis, shrinking to
/// `63 / d` once `8 * d` no longer fits a 64-bit key.
pub fn default_order(dims: usize) -> u32 {
    if dims <= 8 {
        8
    } else {
        (63 / dims.max(1)) as u32
    }
}

fn check_width(dims: usize, order: u32) -> Result<()> {
    if dims == 0 || order == 0 || dims as u64 * order as u64 > 64 {
        return Err(Error::KeyWidth { dims, order });
    }
    Ok(())
}

/// Hilbert key of integer cell coordinates, each `< 2^order`.
///
/// Skilling's transpose algorithm ("Programming the Hilbert curve", 2004):
/// undo excess work, Gray-encode, then interleave the transposed bits
/// most-significant first.
pub fn hilbert_index(cell: &[u32], order: u32) -> Result<HilbertKey> {
    let n = cell.len();
    check_width(n, order)?;
    let mut x: Vec<u64> = cell.iter().map(|&c| c as u64).collect();
    let m = 1u64 << (order - 1);

    let mut q = m;
    while q > 1 {
        let p = q - 1;
        for i in 0..n {
            if x[i] & q != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q >>= 1;
    }
    for i in 1..n {
        x[i] ^= x[i - 1];
    }
    let mut t = 0;
    q = m;
    while q > 1 {
        if x[n - 1] & q != 0 {
            t ^= q - 1;
        }
        q >>= 1;
    }
    for xi in x.iter_mut() {
        *xi ^= t;
    }

    let mut key = 0u64;
    for b in (0..order).rev() {
        for xi in &x {
            key = (key << 1) | ((xi >> b) & 1);
        }
    }
    Ok(HilbertKey { order, key })
}

/// Map a normalized point to its grid cell and return the cell's key.
/// Coordinates are clamped to `[0, 1]`.
pub fn hilbert_key_of_point(point: &[f64], order: u32) -> Result<HilbertKey> {
    check_width(point.len(), order)?;
    let side = 1u64 << order;
    let cell: Vec<u32> = point
        .iter()
        .map(|&v| {
            let c = (v.clamp(0.0, 1.0) * side as f64) as u64;
            c.min(side - 1) as u32
        })
        .collect();
    hilbert_index(&cell, order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_cells(dims: usize, order: u32) -> Vec<Vec<u32>> {
        let side = 1u32 << order;
        let total = (side as usize).pow(dims as u32);
        (0..total)
            .map(|mut i| {
                (0..dims)
                    .map(|_| {
                        let c = (i % side as usize) as u32;
                        i /= side as usize;
                        c
                    })
                    .collect()
            })
            .collect()
    }

    /// Sort every cell by key; keys must be 0..N and consecutive cells
    /// must differ by one step along exactly one axis.
    fn assert_curve(dims: usize, order: u32) {
        let mut keyed: Vec<(u64, Vec<u32>)> = all_cells(dims, order)
            .into_iter()
            .map(|c| (hilbert_index(&c, order).unwrap().key, c))
            .collect();
        keyed.sort();
        for (i, (k, _)) in keyed.iter().enumerate() {
            assert_eq!(*k, i as u64, "keys must be a permutation");
        }
        for w in keyed.windows(2) {
            let dist: u32 = w[0].1.iter().zip(&w[1].1).map(|(a, b)| a.abs_diff(*b)).sum();
            assert_eq!(dist, 1, "cells {:?} and {:?} not adjacent", w[0].1, w[1].1);
        }
    }

    #[test]
    fn one_dimension_is_identity() {
        for c in 0..256u32 {
            assert_eq!(hilbert_index(&[c], 8).unwrap().key, c as u64);
        }
    }

    #[test]
    fn order_one_square() {
        assert_curve(2, 1);
    }

    #[test]
    fn order_four_square() {
        assert_curve(2, 4);
    }

    #[test]
    fn small_cubes() {
        assert_curve(3, 2);
        assert_curve(4, 2);
    }

    #[test]
    fn key_width_checked() {
        assert!(hilbert_index(&[0; 9], 8).is_err());
        assert!(hilbert_index(&[0; 8], 8).is_ok());
        assert_eq!(default_order(8), 8);
        assert_eq!(default_order(11), 5);
    }

    #[test]
    fn point_mapping_clamps() {
        let a = hilbert_key_of_point(&[1.0, 1.0], 3).unwrap();
        let b = hilbert_key_of_point(&[0.99, 0.99], 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(hilbert_key_of_point(&[0.0], 4).unwrap().key, 0);
    }
}
