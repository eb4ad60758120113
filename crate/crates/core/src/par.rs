//! Execution strategy for the data-parallel loops.
//!
//! With the `parallel` feature (default) [`Execution::Parallel`] runs on the
//! rayon global pool. Without it, `Parallel` silently degrades to the
//! sequential path. Both paths return results in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// `(0..n).map(f).collect()`, in index order.
    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Like [`Execution::map_range`] for fallible closures; the error with
    /// the lowest index wins.
    pub fn try_map_range<T, E, F>(self, n: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            let out: Vec<Result<T, E>> = (0..n).into_par_iter().map(f).collect();
            return out.into_iter().collect();
        }
        (0..n).map(f).collect()
    }

    /// First `Some` in index order.
    pub fn find_map_first<T, F>(self, n: usize, f: F) -> Option<T>
    where
        T: Send,
        F: Fn(usize) -> Option<T> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().find_map_first(f);
        }
        (0..n).find_map(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_paths_agree() {
        let f = |i: usize| (i * 7919) % 101;
        assert_eq!(
            Execution::Sequential.map_range(1000, f),
            Execution::Parallel.map_range(1000, f)
        );
        let g = |i: usize| if i % 97 == 96 { Some(i) } else { None };
        assert_eq!(Execution::Sequential.find_map_first(1000, g), Some(96));
        assert_eq!(Execution::Parallel.find_map_first(1000, g), Some(96));
    }
}
