use rayon::prelude::*;
use weanscope_core::nn::Executor;

/// Runs jobs on the global rayon pool. Results come back in index order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl Executor for Rayon {
    fn width(&self) -> usize {
        rayon::current_num_threads()
    }

    fn run<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).into_par_iter().map(f).collect()
    }
}
