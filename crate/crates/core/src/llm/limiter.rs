use std::sync::{Condvar, Mutex};

/// Counting semaphore bounding concurrent live calls.
#[derive(Debug)]
pub struct InflightLimiter {
    limit: usize,
    in_use: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a> {
    limiter: &'a InflightLimiter,
}

impl InflightLimiter {
    pub fn new(limit: usize) -> Self {
        Self { limit: limit.max(1), in_use: Mutex::new(0), freed: Condvar::new() }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut in_use = self.in_use.lock().expect("limiter lock");
        while *in_use >= self.limit {
            in_use = self.freed.wait(in_use).expect("limiter lock");
        }
        *in_use += 1;
        Permit { limiter: self }
    }

    pub fn in_use(&self) -> usize {
        *self.in_use.lock().expect("limiter lock")
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.limiter.in_use.lock().expect("limiter lock") -= 1;
        self.limiter.freed.notify_one();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::time::Duration;

    #[test]
    fn never_exceeds_limit() {
        let limiter = InflightLimiter::new(2);
        let peak = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    let _p = limiter.acquire();
                    peak.fetch_max(limiter.in_use(), Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
        assert_eq!(limiter.in_use(), 0);
    }
}
