//! Data-parallel map with a sequential fallback.
//!
//! Results are always collected in input order, so any reduction over them is
//! independent of the number of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How independent work units are executed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    /// Rayon worker pool when the `parallel` feature is enabled, otherwise sequential.
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `f(0), .., f(n-1)` in order.
pub fn map_range<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// `f` over a slice, in order.
pub fn map_slice<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let par = map_range(Execution::Parallel, 1000, |i| i * i);
        let seq = map_range(Execution::Sequential, 1000, |i| i * i);
        assert_eq!(par, seq);
        assert_eq!(map_slice(Execution::Parallel, &[3, 1, 2], |x| x + 1), vec![4, 2, 3]);
    }
}
