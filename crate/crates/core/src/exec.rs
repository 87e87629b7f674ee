//! Execution strategy for data-parallel loops.
//!
//! Every batch entry point in this crate takes an [`Exec`]. With the
//! `parallel` feature (default) [`Exec::Parallel`] runs on rayon; without it
//! the parallel variant silently degrades to the sequential loop, so callers
//! never need their own `cfg` switches.

/// How a batch operation distributes its work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    /// Single-threaded, in order.
    Sequential,
    /// Data-parallel on the global rayon pool.
    #[default]
    Parallel,
    /// Data-parallel on a dedicated pool of the given size.
    Threads(usize),
}

impl Exec {
    /// Maps a `--jobs` style value: 1 is sequential, 0 means "all cores".
    pub fn from_jobs(jobs: usize) -> Self {
        match jobs {
            0 => Exec::Parallel,
            1 => Exec::Sequential,
            n => Exec::Threads(n),
        }
    }

    /// True when this build can actually run work in parallel.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self != Exec::Sequential
    }

    /// Applies `f` to every element, preserving input order in the output.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            match self {
                Exec::Sequential => items.iter().map(f).collect(),
                Exec::Parallel => items.par_iter().map(f).collect(),
                Exec::Threads(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                    Ok(pool) => pool.install(|| items.par_iter().map(f).collect()),
                    Err(_) => items.par_iter().map(f).collect(),
                },
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            items.iter().map(f).collect()
        }
    }

    /// Like [`Exec::map`] over the index range `0..len`.
    pub fn map_range<U, F>(self, len: usize, f: F) -> Vec<U>
    where
        U: Send,
        F: Fn(usize) -> U + Sync + Send,
    {
        let idx: Vec<usize> = (0..len).collect();
        self.map(&idx, |&i| f(i))
    }
}
