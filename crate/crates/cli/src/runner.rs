//! OS-thread batch runner. Worker count is bounded by the PCSOD_THREADS
//! environment variable (default: available parallelism, capped at 8).
//! Results are collected by job index, so outcomes are independent of
//! scheduling order.

use pcsod_core::train::BatchRunner;

pub struct ThreadedRunner {
    threads: usize,
}

impl ThreadedRunner {
    pub fn new(threads: usize) -> Self {
        ThreadedRunner {
            threads: threads.max(1),
        }
    }

    /// Worker count from PCSOD_THREADS, else the machine's parallelism.
    pub fn from_env() -> Self {
        let available = std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
            .min(8);
        let threads = std::env::var("PCSOD_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n >= 1)
            .unwrap_or(available);
        ThreadedRunner::new(threads)
    }

    pub fn threads(&self) -> usize {
        self.threads
    }
}

impl BatchRunner for ThreadedRunner {
    fn run<O: Send, F: Fn(usize) -> O + Sync>(&self, jobs: usize, f: F) -> Vec<O> {
        let workers = self.threads.min(jobs.max(1));
        if workers <= 1 || jobs <= 1 {
            return (0..jobs).map(f).collect();
        }
        let f = &f;
        let mut chunks: Vec<Vec<(usize, O)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    scope.spawn(move || {
                        (w..jobs)
                            .step_by(workers)
                            .map(|i| (i, f(i)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        let mut slots: Vec<Option<O>> = (0..jobs).map(|_| None).collect();
        for chunk in chunks.drain(..) {
            for (i, o) in chunk {
                slots[i] = Some(o);
            }
        }
        slots.into_iter().map(|s| s.unwrap()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_in_job_order() {
        let runner = ThreadedRunner::new(4);
        let out = runner.run(37, |i| i * i);
        assert_eq!(out, (0..37).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn single_job_runs_inline() {
        let runner = ThreadedRunner::new(8);
        assert_eq!(runner.run(1, |i| i + 10), vec![10]);
    }
}
