//! Data-parallel map over trial indices. With the `parallel` feature the
//! work is spread over the rayon pool; without it the same closure runs
//! sequentially. Output order is always the index order.

pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_parallel(n, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_sequential(n, f)
    }
}

pub fn map_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_parallel<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}
