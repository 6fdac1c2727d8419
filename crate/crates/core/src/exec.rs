//! Execution-mode plumbing for the data-parallel paths.
//!
//! Heavy loops (grid search, multi-start descent, sweep points) run through
//! [`map_indexed`], which preserves input order in its output. Results are
//! merged with order-independent folds over totally ordered candidates, so
//! `Sequential` and `Parallel` produce bitwise-identical results. Without
//! the `parallel` cargo feature both modes run sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How batch work is executed. Output is identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    #[default]
    Parallel,
    Sequential,
}

/// Maps `f` over `items`, preserving order.
pub fn map_indexed<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        ExecMode::Sequential => items.iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => items.par_iter().map(f).collect(),
        #[cfg(not(feature = "parallel"))]
        ExecMode::Parallel => items.iter().map(f).collect(),
    }
}
