//! Order-preserving data-parallel map.
//!
//! With the `parallel` feature the work runs on a rayon pool of the requested
//! size; without it (or with one worker) it is a plain sequential loop. Output
//! order always matches input order, and callers reduce the collected results
//! sequentially, so numeric results are identical for every worker count.

/// Worker count; `0` means "let rayon decide".
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Workers(pub usize);

impl Workers {
    pub const SEQUENTIAL: Workers = Workers(1);
    pub const AUTO: Workers = Workers(0);

    pub fn is_sequential(self) -> bool {
        self.0 == 1 || !cfg!(feature = "parallel")
    }
}

impl Default for Workers {
    fn default() -> Self {
        Workers::AUTO
    }
}

/// `f(i, &items[i])` for every item, results in input order.
pub fn map<T, R, F>(workers: Workers, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    if workers.is_sequential() || items.len() < 2 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    parallel_map(workers, items, f)
}

/// `f(i)` for `i in 0..n`, results in index order.
pub fn map_range<R, F>(workers: Workers, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    let idx: Vec<usize> = (0..n).collect();
    map(workers, &idx, |_, &i| f(i))
}

#[cfg(feature = "parallel")]
fn parallel_map<T, R, F>(workers: Workers, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    let run = || {
        items
            .par_iter()
            .enumerate()
            .map(|(i, t)| f(i, t))
            .collect::<Vec<R>>()
    };
    if workers.0 == 0 {
        return run();
    }
    match rayon::ThreadPoolBuilder::new()
        .num_threads(workers.0)
        .build()
    {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, R, F>(_workers: Workers, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}
