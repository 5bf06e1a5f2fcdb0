//! Order-preserving data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature the [`Parallelism::Rayon`] strategy fans work
//! out over the rayon pool; without it every call runs sequentially. Results
//! are always returned in input order so reductions over them are
//! bit-identical regardless of thread count.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    Rayon,
}

impl Default for Parallelism {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Parallelism::Rayon
        } else {
            Parallelism::Sequential
        }
    }
}

pub fn map_indexed<T, R, F>(items: &[T], strategy: Parallelism, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    match strategy {
        #[cfg(feature = "parallel")]
        Parallelism::Rayon => {
            use rayon::prelude::*;
            items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
        }
        _ => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree_and_keep_order() {
        let xs: Vec<u64> = (0..100).collect();
        let a = map_indexed(&xs, Parallelism::Sequential, |i, x| x * 3 + i as u64);
        let b = map_indexed(&xs, Parallelism::Rayon, |i, x| x * 3 + i as u64);
        assert_eq!(a, b);
        assert_eq!(a[10], 40);
    }
}
