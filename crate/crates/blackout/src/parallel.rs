//! Order-preserving fan-out over sample indices.

use std::thread;

/// Evaluate `f(i)` for `i in 0..count` on `threads` workers; results come
/// back in index order, so output is independent of the thread count.
pub fn map_indices<T, E, F>(count: usize, threads: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(u64) -> Result<T, E> + Sync,
{
    let threads = threads.clamp(1, count.max(1));
    if threads == 1 {
        return (0..count as u64).map(&f).collect();
    }
    let chunk = count.div_ceil(threads);
    thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let f = &f;
                let lo = (w * chunk).min(count);
                let hi = ((w + 1) * chunk).min(count);
                scope.spawn(move || (lo as u64..hi as u64).map(f).collect::<Result<Vec<T>, E>>())
            })
            .collect();
        let mut out = Vec::with_capacity(count);
        for h in handles {
            out.extend(h.join().expect("worker panicked")?);
        }
        Ok(out)
    })
}
