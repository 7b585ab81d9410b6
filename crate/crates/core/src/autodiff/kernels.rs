//! Dense matrix products on row-major buffers.
//!
//! Large products split their output rows across threads. Each output element
//! is still accumulated by one thread in a fixed order, so results do not
//! depend on the thread count.

use rayon::prelude::*;

/// Work (multiply-adds) below which products stay on the calling thread.
const PARALLEL_WORK: usize = 1 << 18;
/// Inner-dimension block length for the `nn` kernel.
const K_BLOCK: usize = 128;

/// `c (m x n) += a (m x k) . b (k x n)`
pub fn gemm_nn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if n == 0 {
        return;
    }
    let row = |(i, c_row): (usize, &mut [f64])| {
        let a_row = &a[i * k..(i + 1) * k];
        for k0 in (0..k).step_by(K_BLOCK) {
            let k1 = (k0 + K_BLOCK).min(k);
            for l in k0..k1 {
                let x = a_row[l];
                if x == 0.0 {
                    continue;
                }
                let b_row = &b[l * n..(l + 1) * n];
                for (cj, bj) in c_row.iter_mut().zip(b_row) {
                    *cj += x * bj;
                }
            }
        }
    };
    if m * k * n >= PARALLEL_WORK {
        c.par_chunks_mut(n).enumerate().for_each(row);
    } else {
        c.chunks_mut(n).enumerate().for_each(row);
    }
}

/// `c (m x n) += a (m x k) . b^T` where `b` is `n x k`.
pub fn gemm_nt(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    if n == 0 {
        return;
    }
    let row = |(i, c_row): (usize, &mut [f64])| {
        let a_row = &a[i * k..(i + 1) * k];
        for (j, cj) in c_row.iter_mut().enumerate() {
            let b_row = &b[j * k..(j + 1) * k];
            *cj += a_row.iter().zip(b_row).map(|(x, y)| x * y).sum::<f64>();
        }
    };
    if m * k * n >= PARALLEL_WORK {
        c.par_chunks_mut(n).enumerate().for_each(row);
    } else {
        c.chunks_mut(n).enumerate().for_each(row);
    }
}

/// `c (k x n) += a^T . b` where `a` is `m x k` and `b` is `m x n`.
pub fn gemm_tn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(c.len(), k * n);
    if n == 0 {
        return;
    }
    let row = |(i, c_row): (usize, &mut [f64])| {
        for l in 0..m {
            let x = a[l * k + i];
            if x == 0.0 {
                continue;
            }
            let b_row = &b[l * n..(l + 1) * n];
            for (cj, bj) in c_row.iter_mut().zip(b_row) {
                *cj += x * bj;
            }
        }
    };
    if m * k * n >= PARALLEL_WORK {
        c.par_chunks_mut(n).enumerate().for_each(row);
    } else {
        c.chunks_mut(n).enumerate().for_each(row);
    }
}
