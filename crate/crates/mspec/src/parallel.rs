use std::time::Instant;

use mspec_core::training::Clock;

/// `f(0..n)` computed on up to `workers` scoped threads. Each index is
/// evaluated exactly once and results come back in index order, so the
/// output does not depend on `workers` when `f` seeds from its index.
pub fn par_map<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = workers.clamp(1, n.max(1));
    if workers == 1 {
        return (0..n).map(&f).collect();
    }
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let f = &f;
                scope.spawn(move || (w..n).step_by(workers).map(|i| (i, f(i))).collect::<Vec<_>>())
            })
            .collect();
        for h in handles {
            for (i, v) in h.join().expect("worker thread panicked") {
                slots[i] = Some(v);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every index is computed")).collect()
}

/// Milliseconds since construction.
pub struct SystemClock(Instant);

impl SystemClock {
    pub fn start() -> Self {
        SystemClock(Instant::now())
    }
}

impl Clock for SystemClock {
    fn now_ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_workers() {
        let serial = par_map(37, 1, |i| i * i);
        for w in [2, 3, 8, 100] {
            assert_eq!(par_map(37, w, |i| i * i), serial);
        }
        assert!(par_map(0, 4, |i| i).is_empty());
    }

    #[test]
    fn clock_advances() {
        let c = SystemClock::start();
        let a = c.now_ms();
        std::thread::sleep(std::time::Duration::from_millis(2));
        assert!(c.now_ms() > a);
    }
}
