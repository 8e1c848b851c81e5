//! Deterministic data-parallel primitives.
//!
//! Reductions split the index range into chunks whose boundaries depend only
//! on the problem size, compute each chunk's partial in index order, and fold
//! partials in chunk order. The parallel and sequential paths therefore
//! produce bitwise-identical results, and results do not depend on thread
//! count. Without the `parallel` feature, [`Exec::Par`] degrades to the
//! sequential path.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution policy for the data-parallel kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Seq,
    Par,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Par
        } else {
            Exec::Seq
        }
    }
}

/// Chunk length targeting ~64 partials; fixed by `n` alone so that the
/// reduction tree never depends on the executing thread pool.
pub fn chunk_len(n: usize) -> usize {
    n.div_ceil(64).clamp(16, 8192)
}

fn ranges(n: usize, chunk: usize) -> Vec<std::ops::Range<usize>> {
    (0..n.div_ceil(chunk))
        .map(|c| c * chunk..((c + 1) * chunk).min(n))
        .collect()
}

/// Map fixed chunks of `0..n` to partials and fold them in chunk order.
pub fn map_reduce<T, M, F>(exec: Exec, n: usize, chunk: usize, map: M, mut fold: F) -> Option<T>
where
    T: Send,
    M: Fn(std::ops::Range<usize>) -> T + Sync + Send,
    F: FnMut(&mut T, T),
{
    if n == 0 {
        return None;
    }
    let parts = ranges(n, chunk.max(1));
    let partials: Vec<T> = match exec {
        Exec::Seq => parts.into_iter().map(map).collect(),
        #[cfg(feature = "parallel")]
        Exec::Par => parts.into_par_iter().map(map).collect(),
        #[cfg(not(feature = "parallel"))]
        Exec::Par => parts.into_iter().map(map).collect(),
    };
    let mut iter = partials.into_iter();
    let mut acc = iter.next()?;
    for p in iter {
        fold(&mut acc, p);
    }
    Some(acc)
}

/// Apply `f` to disjoint row blocks of `data`. Each block is `chunk` rows of
/// `row_len` elements; `f` receives the index of the block's first row.
/// Writes are disjoint, so ordering is irrelevant to the result.
pub fn for_each_row_block<F>(exec: Exec, data: &mut [f64], row_len: usize, chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    debug_assert!(row_len > 0 && data.len().is_multiple_of(row_len));
    let block = chunk.max(1) * row_len;
    match exec {
        Exec::Seq => {
            for (i, slab) in data.chunks_mut(block).enumerate() {
                f(i * chunk, slab);
            }
        }
        #[cfg(feature = "parallel")]
        Exec::Par => {
            data.par_chunks_mut(block)
                .enumerate()
                .for_each(|(i, slab)| f(i * chunk, slab));
        }
        #[cfg(not(feature = "parallel"))]
        Exec::Par => {
            for (i, slab) in data.chunks_mut(block).enumerate() {
                f(i * chunk, slab);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seq_and_par_fold_identically() {
        // Sums of adversarially scaled terms: identical chunking must give
        // bitwise-equal floats on both paths.
        let n = 10_000;
        let term = |i: usize| ((i as f64) * 1e-3).sin() * 10f64.powi((i % 7) as i32 - 3);
        let run = |exec| {
            map_reduce(
                exec,
                n,
                chunk_len(n),
                |r| r.map(term).sum::<f64>(),
                |a, b| *a += b,
            )
            .unwrap()
        };
        let s = run(Exec::Seq);
        let p = run(Exec::Par);
        assert_eq!(s.to_bits(), p.to_bits());
    }

    #[test]
    fn row_blocks_cover_everything() {
        let mut data = vec![0.0; 7 * 3];
        for_each_row_block(Exec::Par, &mut data, 3, 2, |start, slab| {
            for (r, row) in slab.chunks_mut(3).enumerate() {
                row.fill((start + r) as f64);
            }
        });
        for r in 0..7 {
            assert!(data[r * 3..(r + 1) * 3].iter().all(|&v| v == r as f64));
        }
    }

    #[test]
    fn empty_input_reduces_to_none() {
        let out: Option<f64> = map_reduce(Exec::Par, 0, 16, |_| 0.0, |a, b| *a += b);
        assert!(out.is_none());
    }
}
