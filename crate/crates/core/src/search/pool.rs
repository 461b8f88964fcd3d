use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, Sender, TryRecvError};

use super::{Evaluation, Evaluator, Job};
use crate::error::{Error, Result};

/// A finished job as delivered to the manager.
#[derive(Clone, Debug)]
pub struct Finished {
    pub job: Job,
    pub evaluation: Evaluation,
    pub wall_seconds: f64,
}

/// Local thread pool behind a nonblocking submit / poll contract.
pub struct WorkerPool {
    jobs: Option<Sender<Job>>,
    results: Receiver<Finished>,
    handles: Vec<JoinHandle<()>>,
    in_flight: usize,
}

impl WorkerPool {
    pub fn new(workers: usize, evaluator: Arc<dyn Evaluator>) -> Result<Self> {
        if workers == 0 {
            return Err(Error::Config("worker count must be >= 1".into()));
        }
        let (job_tx, job_rx) = unbounded::<Job>();
        let (res_tx, res_rx) = unbounded::<Finished>();
        let handles = (0..workers)
            .map(|_| {
                let jobs = job_rx.clone();
                let results = res_tx.clone();
                let eval = Arc::clone(&evaluator);
                std::thread::spawn(move || {
                    for job in jobs {
                        let start = Instant::now();
                        let evaluation = catch_unwind(AssertUnwindSafe(|| eval.evaluate(&job)))
                            .unwrap_or_else(|p| {
                                let msg = p
                                    .downcast_ref::<&str>()
                                    .map(|s| s.to_string())
                                    .or_else(|| p.downcast_ref::<String>().cloned())
                                    .unwrap_or_else(|| "worker panicked".into());
                                Evaluation::failed(msg)
                            });
                        let done = Finished {
                            job,
                            evaluation,
                            wall_seconds: start.elapsed().as_secs_f64(),
                        };
                        if results.send(done).is_err() {
                            break;
                        }
                    }
                })
            })
            .collect();
        Ok(Self {
            jobs: Some(job_tx),
            results: res_rx,
            handles,
            in_flight: 0,
        })
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight
    }

    /// Queues a job without blocking; returns its id as the ticket.
    pub fn submit(&mut self, job: Job) -> Result<u64> {
        let id = job.id;
        let tx = self.jobs.as_ref().ok_or(Error::PoolShutdown)?;
        tx.send(job).map_err(|_| Error::PoolShutdown)?;
        self.in_flight += 1;
        Ok(id)
    }

    /// Every result available right now, possibly none.
    pub fn check_finished(&mut self) -> Result<Vec<Finished>> {
        let mut out = Vec::new();
        loop {
            match self.results.try_recv() {
                Ok(f) => out.push(f),
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) if self.in_flight > out.len() => {
                    return Err(Error::PoolShutdown)
                }
                Err(TryRecvError::Disconnected) => break,
            }
        }
        self.in_flight -= out.len();
        Ok(out)
    }

    /// Blocks up to `timeout` for the first result, then drains whatever else is ready.
    pub fn wait_finished(&mut self, timeout: Duration) -> Result<Vec<Finished>> {
        if self.in_flight == 0 {
            return Ok(Vec::new());
        }
        match self.results.recv_timeout(timeout) {
            Ok(first) => {
                self.in_flight -= 1;
                let mut rest = self.check_finished()?;
                rest.insert(0, first);
                Ok(rest)
            }
            Err(RecvTimeoutError::Timeout) => Ok(Vec::new()),
            Err(RecvTimeoutError::Disconnected) => Err(Error::PoolShutdown),
        }
    }

    /// Stops accepting jobs, lets queued ones finish and joins the workers.
    pub fn shutdown(&mut self) {
        self.jobs = None;
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}

impl Drop for WorkerPool {
    fn drop(&mut self) {
        self.shutdown();
    }
}
