//! Data-parallel helpers over index ranges.
//!
//! With the `parallel` feature these dispatch to rayon; without it they run
//! sequentially. Results are collected in index order, and every
//! floating-point reduction in the crate is done sequentially over the
//! collected values, so output is bit-identical in both builds.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `(0..n).map(f).collect()`, possibly in parallel.
#[cfg(feature = "parallel")]
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Number of indices in `0..n` satisfying `pred`.
#[cfg(feature = "parallel")]
pub fn count_range<F>(n: usize, pred: F) -> usize
where
    F: Fn(usize) -> bool + Sync + Send,
{
    (0..n).into_par_iter().filter(|&i| pred(i)).count()
}

#[cfg(not(feature = "parallel"))]
pub fn count_range<F>(n: usize, pred: F) -> usize
where
    F: Fn(usize) -> bool + Sync + Send,
{
    (0..n).filter(|&i| pred(i)).count()
}

/// Apply `f` to every element of `items` in place, possibly in parallel.
#[cfg(feature = "parallel")]
pub fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    items.par_iter_mut().enumerate().for_each(|(i, t)| f(i, t));
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    items.iter_mut().enumerate().for_each(|(i, t)| f(i, t));
}

/// Sequential sum in index order.
pub fn ordered_sum(values: &[f64]) -> f64 {
    values.iter().sum()
}
