use alloc::vec::Vec;

/// Evaluates `f` for every index in `0..count`, in parallel when the
/// `parallel` feature is on. Results keep index order, so any reduction
/// done afterwards is deterministic.
pub(crate) fn map_indices<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}
