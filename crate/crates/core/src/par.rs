//! Fan-out helpers. Rayon-backed with `std`, sequential otherwise. Every
//! closure receives the item index so callers key RNG streams by index,
//! never by worker.

use crate::prelude::*;

#[cfg(feature = "std")]
pub(crate) fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

#[cfg(not(feature = "std"))]
pub(crate) fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    F: Fn(usize, &mut T),
{
    items.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

#[cfg(feature = "std")]
pub(crate) fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "std"))]
pub(crate) fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    (0..n).map(f).collect()
}

/// Runs `f` on every item and returns the error of the lowest failing
/// index, so the reported failure does not depend on scheduling.
pub(crate) fn try_for_each_mut<T, E, F>(items: &mut [T], f: F) -> Result<(), E>
where
    T: Send,
    E: Send,
    F: Fn(usize, &mut T) -> Result<(), E> + Sync + Send,
{
    #[cfg(feature = "std")]
    let out: Vec<Result<(), E>> = {
        use rayon::prelude::*;
        let mut out = Vec::new();
        items.par_iter_mut().enumerate().map(|(i, x)| f(i, x)).collect_into_vec(&mut out);
        out
    };
    #[cfg(not(feature = "std"))]
    let out: Vec<Result<(), E>> = items.iter_mut().enumerate().map(|(i, x)| f(i, x)).collect();
    out.into_iter().collect()
}
