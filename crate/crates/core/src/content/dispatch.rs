//! Request dispatch. `submit` and `poll` never wait on a provider.

use std::collections::{HashMap, VecDeque};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::prompt::PromptSpec;
use super::provider::{ContentProvider, ProviderError};
use super::{ContentRequest, Exhibit, Provenance};

#[derive(Debug, Clone)]
pub struct Job {
    pub request: ContentRequest,
    pub spec: PromptSpec,
    pub exhibit: Exhibit,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Generated { text: String, provenance: Provenance },
    Failed(ProviderError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub request: ContentRequest,
    pub outcome: Outcome,
}

pub trait Dispatcher: Send {
    /// Hands a job off. Must return without waiting on the provider.
    fn submit(&mut self, job: Job, now: f64);

    /// Completions that are ready at session time `now`, in completion order.
    fn poll(&mut self, now: f64) -> Vec<Completion>;

    fn pending(&self) -> usize;
}

/// Deterministic dispatcher for replay and tests.
///
/// Runs the provider when the job is submitted and releases the result
/// `latency` session-seconds later; latencies above `timeout` resolve as
/// timeouts at `submit + timeout`. Only suitable for in-process providers
/// such as the mock, since the provider call happens inside `submit`.
pub struct SimulatedDispatcher {
    provider: Arc<dyn ContentProvider>,
    latency: f64,
    timeout: f64,
    queue: VecDeque<(f64, Completion)>,
}

impl SimulatedDispatcher {
    pub fn new(provider: Arc<dyn ContentProvider>, latency: f64, timeout: f64) -> Self {
        SimulatedDispatcher {
            provider,
            latency,
            timeout,
            queue: VecDeque::new(),
        }
    }
}

impl Dispatcher for SimulatedDispatcher {
    fn submit(&mut self, job: Job, now: f64) {
        let (ready_at, outcome) = if self.latency > self.timeout {
            (now + self.timeout, Outcome::Failed(ProviderError::Timeout))
        } else {
            let outcome = match self.provider.generate(&job.spec, &job.exhibit) {
                Ok(text) => Outcome::Generated {
                    text,
                    provenance: self.provider.provenance(),
                },
                Err(e) => Outcome::Failed(e),
            };
            (now + self.latency, outcome)
        };
        // Constant latency keeps the queue sorted by ready time.
        self.queue.push_back((
            ready_at,
            Completion {
                request: job.request,
                outcome,
            },
        ));
    }

    fn poll(&mut self, now: f64) -> Vec<Completion> {
        let mut out = Vec::new();
        while self.queue.front().is_some_and(|(at, _)| *at <= now) {
            out.push(self.queue.pop_front().expect("front checked").1);
        }
        out
    }

    fn pending(&self) -> usize {
        self.queue.len()
    }
}

type WorkerResult = (u64, Result<String, ProviderError>);

/// Deadlines are checked on every `CLOCK_STRIDE`-th poll, which keeps the
/// clock read off most frames. At 90 Hz that is roughly 90 ms of slack.
const CLOCK_STRIDE: u32 = 8;

/// Worker-pool dispatcher with a wall-clock timeout.
///
/// Results that arrive after their request timed out are dropped; the
/// request already resolved to a timeout.
pub struct ThreadedDispatcher {
    jobs: Option<Sender<Job>>,
    results: Receiver<WorkerResult>,
    in_flight: HashMap<u64, ContentRequest>,
    /// Submission order; with a fixed timeout this is also deadline order.
    deadlines: VecDeque<(u64, Instant)>,
    timeout: Duration,
    provenance: Provenance,
    closed: Arc<AtomicBool>,
    polls: u32,
}

impl ThreadedDispatcher {
    pub fn new(provider: Arc<dyn ContentProvider>, workers: usize, timeout: Duration) -> Self {
        let (job_tx, job_rx) = mpsc::channel::<Job>();
        let (res_tx, res_rx) = mpsc::channel::<WorkerResult>();
        let job_rx = Arc::new(Mutex::new(job_rx));
        let provenance = provider.provenance();
        let closed = Arc::new(AtomicBool::new(false));
        for i in 0..workers.max(1) {
            let job_rx = Arc::clone(&job_rx);
            let res_tx = res_tx.clone();
            let provider = Arc::clone(&provider);
            let closed = Arc::clone(&closed);
            thread::Builder::new()
                .name(format!("content-worker-{i}"))
                .spawn(move || loop {
                    let job = {
                        let rx = job_rx.lock().unwrap_or_else(|e| e.into_inner());
                        match rx.recv() {
                            Ok(job) => job,
                            Err(_) => return,
                        }
                    };
                    if closed.load(Ordering::Acquire) {
                        return;
                    }
                    let result = provider.generate(&job.spec, &job.exhibit);
                    if res_tx.send((job.request.request_id, result)).is_err() {
                        return;
                    }
                })
                .expect("spawn content worker");
        }
        ThreadedDispatcher {
            jobs: Some(job_tx),
            results: res_rx,
            in_flight: HashMap::new(),
            deadlines: VecDeque::new(),
            timeout,
            provenance,
            closed,
            polls: 0,
        }
    }
}

impl Dispatcher for ThreadedDispatcher {
    fn submit(&mut self, job: Job, _now: f64) {
        let request = job.request.clone();
        let id = request.request_id;
        let now = Instant::now();
        let sent = self.jobs.as_ref().is_some_and(|tx| tx.send(job).is_ok());
        let deadline = if sent {
            now + self.timeout
        } else {
            log::error!("content worker pool is gone; request {id} will time out");
            now
        };
        self.in_flight.insert(id, request);
        self.deadlines.push_back((id, deadline));
    }

    fn poll(&mut self, _now: f64) -> Vec<Completion> {
        let mut out = Vec::new();
        let mut received = 0usize;
        while let Ok((id, result)) = self.results.try_recv() {
            received += 1;
            let Some(request) = self.in_flight.remove(&id) else {
                log::debug!("dropping late result for request {id}");
                continue;
            };
            let outcome = match result {
                Ok(text) => Outcome::Generated {
                    text,
                    provenance: self.provenance,
                },
                Err(e) => Outcome::Failed(e),
            };
            out.push(Completion { request, outcome });
        }
        self.polls = self.polls.wrapping_add(1);
        let check_clock = self.polls.is_multiple_of(CLOCK_STRIDE);
        if let Some(&(_, first)) = self.deadlines.front().filter(|_| check_clock) {
            let now = Instant::now();
            if now >= first {
                while let Some(&(id, deadline)) = self.deadlines.front() {
                    if deadline > now {
                        break;
                    }
                    self.deadlines.pop_front();
                    if let Some(request) = self.in_flight.remove(&id) {
                        out.push(Completion {
                            request,
                            outcome: Outcome::Failed(ProviderError::Timeout),
                        });
                    }
                }
            }
        }
        // Entries resolved by a worker leave stale deadlines behind.
        while received > 0
            && self
            .deadlines
            .front()
            .is_some_and(|(id, _)| !self.in_flight.contains_key(id))
        {
            self.deadlines.pop_front();
        }
        out
    }

    fn pending(&self) -> usize {
        self.in_flight.len()
    }
}

impl Drop for ThreadedDispatcher {
    fn drop(&mut self) {
        // Idle workers exit on the closed channel; busy ones finish their
        // call and skip whatever is still queued.
        self.closed.store(true, Ordering::Release);
        self.jobs.take();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::content::prompt::{build_prompt, PromptTemplates};
    use crate::content::provider::MockProvider;
    use crate::state::EngagementState;

    fn job(id: u64) -> Job {
        let exhibit = Exhibit::new("a", "A", "one two three four five six seven");
        let spec = build_prompt(&exhibit, EngagementState::Neutral, &PromptTemplates::default()).unwrap();
        Job {
            request: ContentRequest {
                request_id: id,
                exhibit_id: "a".into(),
                level: EngagementState::Neutral,
                issued_at_state_seq: 0,
            },
            spec,
            exhibit,
        }
    }

    #[test]
    fn simulated_releases_after_latency() {
        let mut d = SimulatedDispatcher::new(Arc::new(MockProvider::new()), 0.5, 4.0);
        d.submit(job(1), 10.0);
        assert!(d.poll(10.4).is_empty());
        let done = d.poll(10.5);
        assert_eq!(done.len(), 1);
        assert!(matches!(done[0].outcome, Outcome::Generated { provenance: Provenance::Mock, .. }));
        assert_eq!(d.pending(), 0);
    }

    #[test]
    fn simulated_timeout() {
        let mut d = SimulatedDispatcher::new(Arc::new(MockProvider::new()), 5.0, 4.0);
        d.submit(job(1), 0.0);
        assert!(d.poll(3.9).is_empty());
        let done = d.poll(4.0);
        assert_eq!(done[0].outcome, Outcome::Failed(ProviderError::Timeout));
    }

    #[test]
    fn threaded_submit_returns_immediately_and_times_out() {
        let provider = Arc::new(MockProvider::with_delay(Duration::from_secs(5)));
        let mut d = ThreadedDispatcher::new(provider, 1, Duration::from_millis(100));
        let start = Instant::now();
        d.submit(job(1), 0.0);
        assert!(d.poll(0.0).is_empty());
        assert!(start.elapsed() < Duration::from_millis(50));
        thread::sleep(Duration::from_millis(150));
        // Deadlines are read every CLOCK_STRIDE polls.
        let done: Vec<_> = (0..CLOCK_STRIDE).flat_map(|_| d.poll(0.0)).collect();
        assert_eq!(done.len(), 1);
        assert_eq!(done[0].outcome, Outcome::Failed(ProviderError::Timeout));
    }

    #[test]
    fn threaded_delivers_results() {
        let mut d = ThreadedDispatcher::new(Arc::new(MockProvider::new()), 2, Duration::from_secs(4));
        for id in 1..=4 {
            d.submit(job(id), 0.0);
        }
        let mut got = Vec::new();
        let start = Instant::now();
        while got.len() < 4 && start.elapsed() < Duration::from_secs(2) {
            got.extend(d.poll(0.0));
            thread::sleep(Duration::from_millis(1));
        }
        assert_eq!(got.len(), 4);
        assert!(got.iter().all(|c| matches!(c.outcome, Outcome::Generated { .. })));
    }
}
