//! Worker-thread control for batch loops.
//!
//! The thread count is read once from `CUL_THREADS` (default 1). Batches are
//! split into contiguous chunks, one per worker, and chunk results are
//! combined in chunk order, so a given thread count always reduces in the
//! same order. The default of one thread reproduces the serial reduction
//! exactly.

use std::sync::OnceLock;

static WORKERS: OnceLock<usize> = OnceLock::new();

/// Number of worker threads for batch fan-out.
pub fn worker_threads() -> usize {
    *WORKERS.get_or_init(|| {
        std::env::var("CUL_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .map(|n| n.clamp(1, 256))
            .unwrap_or(1)
    })
}

/// Applies `work` to contiguous index chunks of `0..n` and returns the chunk
/// results in order. With one worker the closure runs on the calling thread.
pub fn map_chunks<T, F>(n: usize, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync,
{
    let threads = worker_threads().min(n.max(1));
    if threads <= 1 || n == 0 {
        return vec![work(0..n)];
    }
    let chunk = n.div_ceil(threads);
    let ranges: Vec<std::ops::Range<usize>> = (0..threads)
        .map(|t| (t * chunk).min(n)..((t + 1) * chunk).min(n))
        .filter(|r| !r.is_empty())
        .collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = ranges
            .into_iter()
            .map(|r| scope.spawn(|| work(r)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_covers_all_indices() {
        let parts = map_chunks(100, |r| r.sum::<usize>());
        let total: usize = parts.into_iter().sum();
        assert_eq!(total, (0..100).sum::<usize>());
    }

    #[test]
    fn empty_input_is_fine() {
        let parts = map_chunks(0, |r| r.len());
        assert_eq!(parts.into_iter().sum::<usize>(), 0);
    }
}
