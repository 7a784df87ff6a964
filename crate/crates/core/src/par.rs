//! Task-level parallelism with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over a rayon pool;
//! without it every entry point runs in order on the calling thread. Either
//! way results come back in index order, so callers see identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, in parallel when the feature is enabled.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// How a batch of independent tasks is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// `jobs = None` uses the global pool.
    Parallel { jobs: Option<usize> },
}

impl Execution {
    /// `jobs <= 1` means sequential.
    pub fn from_jobs(jobs: usize) -> Self {
        if jobs <= 1 {
            Execution::Sequential
        } else {
            Execution::Parallel { jobs: Some(jobs) }
        }
    }

    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match *self {
            Execution::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel { jobs: None } => map_indexed(n, f),
            #[cfg(feature = "parallel")]
            Execution::Parallel { jobs: Some(j) } => match rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
            {
                Ok(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
                Err(_) => map_indexed(n, f),
            },
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel { .. } => (0..n).map(f).collect(),
        }
    }

    /// Runs `f` so that nested [`map_indexed`] calls honour this setting:
    /// one thread for `Sequential`, `jobs` threads for a sized pool.
    pub fn install<R, F>(&self, f: F) -> R
    where
        R: Send,
        F: FnOnce() -> R + Send,
    {
        #[cfg(feature = "parallel")]
        {
            let threads = match *self {
                Execution::Sequential => Some(1),
                Execution::Parallel { jobs } => jobs,
            };
            if let Some(t) = threads {
                if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(t).build() {
                    return pool.install(f);
                }
            }
        }
        f()
    }
}

impl Default for Execution {
    fn default() -> Self {
        Execution::Parallel { jobs: None }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let seq = Execution::Sequential.map(100, |i| i * i);
        let par = Execution::from_jobs(4).map(100, |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(map_indexed(5, |i| i), vec![0, 1, 2, 3, 4]);
    }
}
