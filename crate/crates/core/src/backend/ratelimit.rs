use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Sliding-window admission: at most `limit` departures in any window of
/// length `window`. Time is passed in explicitly so the policy can be tested
/// without sleeping.
#[derive(Debug, Clone)]
pub struct SlidingWindow {
    limit: usize,
    window: Duration,
    departures: VecDeque<Duration>,
}

impl SlidingWindow {
    pub fn new(limit: usize, window: Duration) -> Self {
        assert!(limit > 0, "rate limit must be positive");
        SlidingWindow {
            limit,
            window,
            departures: VecDeque::with_capacity(limit),
        }
    }

    pub fn per_minute(limit: usize) -> Self {
        Self::new(limit, Duration::from_secs(60))
    }

    /// Admit a request at `now` (monotone across calls), or return how long
    /// to wait before retrying.
    pub fn try_admit(&mut self, now: Duration) -> Result<(), Duration> {
        while let Some(&t) = self.departures.front() {
            if now >= t + self.window {
                self.departures.pop_front();
            } else {
                break;
            }
        }
        if self.departures.len() < self.limit {
            self.departures.push_back(now);
            Ok(())
        } else {
            let oldest = *self.departures.front().expect("window is full");
            Err(oldest + self.window - now)
        }
    }
}

/// Blocking wrapper over [`SlidingWindow`] on the wall clock; shareable
/// across worker threads.
#[derive(Debug)]
pub struct RateLimiter {
    start: Instant,
    inner: Mutex<SlidingWindow>,
}

impl RateLimiter {
    pub fn per_minute(limit: usize) -> Self {
        RateLimiter {
            start: Instant::now(),
            inner: Mutex::new(SlidingWindow::per_minute(limit)),
        }
    }

    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut w = self.inner.lock().expect("rate limiter poisoned");
                match w.try_admit(self.start.elapsed()) {
                    Ok(()) => return,
                    Err(wait) => wait,
                }
            };
            std::thread::sleep(wait);
        }
    }
}
