//! Execution strategy for the data-parallel kernels.
//!
//! Every kernel partitions its work into fixed-size pieces (output rows, or
//! row chunks for reductions) and combines partial results in a fixed order.
//! Results are therefore bit-identical between [`Exec::Sequential`] and
//! [`Exec::Parallel`] and independent of the thread count.
//!
//! Without the `parallel` feature, [`Exec::Parallel`] runs sequentially.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Rows per chunk for chunked reductions.
pub const REDUCE_CHUNK: usize = 256;

/// Below this many output elements the parallel path is not worth the
/// scheduling overhead.
#[cfg(feature = "parallel")]
const PAR_MIN_WORK: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// True when this strategy will actually fan out to worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Calls `f(row, out_row)` for every row of a row-major buffer.
    pub fn for_each_row<F>(self, out: &mut [f64], row_len: usize, f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        if row_len == 0 {
            return;
        }
        #[cfg(feature = "parallel")]
        if self.is_parallel() && out.len() >= PAR_MIN_WORK {
            out.par_chunks_mut(row_len)
                .enumerate()
                .for_each(|(i, row)| f(i, row));
            return;
        }
        for (i, row) in out.chunks_mut(row_len).enumerate() {
            f(i, row);
        }
    }

    /// Maps `f` over `0..n`, preserving order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() && n > 1 {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Maps `f` over fixed-size chunks of `0..n`, preserving chunk order.
    pub fn map_chunks<T, F>(self, n: usize, chunk: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<usize>) -> T + Sync + Send,
    {
        let chunk = chunk.max(1);
        let num_chunks = n.div_ceil(chunk);
        self.map(num_chunks, |c| f(c * chunk..((c + 1) * chunk).min(n)))
    }
}
