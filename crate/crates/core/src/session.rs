//! One visitor session: inference, content, and metrics on a single writer.

use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use crate::config::{EngineConfig, ProviderKind};
use crate::content::{
    Catalog, ContentCache, ContentError, ContentPipeline, DisplayEvent, Dispatcher, HttpProvider, MockProvider,
    SimulatedDispatcher, ThreadedDispatcher,
};
use crate::engine::{Engine, EngineError, StepOutput};
use crate::metrics::{MetricsEvent, SessionMetrics};
use crate::signal::TelemetryFrame;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Content(#[from] ContentError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionStep {
    pub output: StepOutput,
    pub displays: Vec<DisplayEvent>,
    /// A text dwell crossed the reading-event threshold on this frame.
    pub reading_event: bool,
}

/// Builds the dispatcher selected by `cfg.provider`.
///
/// The mock runs through the deterministic simulated dispatcher; the remote
/// provider runs on worker threads with a wall-clock timeout.
pub fn dispatcher_from_config(cfg: &EngineConfig) -> Box<dyn Dispatcher> {
    let timeout = cfg.content.timeout;
    match cfg.provider.kind {
        ProviderKind::Mock => Box::new(SimulatedDispatcher::new(
            Arc::new(MockProvider::new()),
            cfg.content.mock_latency,
            timeout,
        )),
        ProviderKind::Remote => {
            let endpoint = cfg
                .provider
                .endpoint
                .clone()
                .expect("validated: remote provider has an endpoint");
            let provider = HttpProvider::new(endpoint, cfg.provider.credential(), Duration::from_secs_f64(timeout));
            Box::new(ThreadedDispatcher::new(
                Arc::new(provider),
                cfg.provider.workers,
                Duration::from_secs_f64(timeout),
            ))
        }
    }
}

pub struct Session {
    engine: Engine,
    content: ContentPipeline,
    metrics: SessionMetrics,
}

impl Session {
    pub fn new(engine: Engine, content: ContentPipeline) -> Self {
        Session {
            engine,
            content,
            metrics: SessionMetrics::new(),
        }
    }

    /// Session with the configured provider. `cfg` must be validated.
    pub fn from_config(cfg: &EngineConfig, catalog: Catalog, cache: ContentCache) -> Result<Self, SessionError> {
        Self::with_dispatcher(cfg, catalog, cache, dispatcher_from_config(cfg))
    }

    pub fn with_dispatcher(
        cfg: &EngineConfig,
        catalog: Catalog,
        cache: ContentCache,
        dispatcher: Box<dyn Dispatcher>,
    ) -> Result<Self, SessionError> {
        let content = ContentPipeline::new(
            catalog,
            cfg.content.levels.clone(),
            cache,
            dispatcher,
            cfg.content.debounce,
            cfg.content.live_swap,
        )?;
        Ok(Session::new(Engine::new(cfg.clone()), content))
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn content(&self) -> &ContentPipeline {
        &self.content
    }

    pub fn metrics(&self) -> &SessionMetrics {
        &self.metrics
    }

    pub fn into_parts(self) -> (Engine, ContentPipeline, SessionMetrics) {
        (self.engine, self.content, self.metrics)
    }

    pub fn step(&mut self, frame: &TelemetryFrame) -> Result<SessionStep, SessionError> {
        let signal_cfg = &self.engine.config().signal;
        let event_threshold = signal_cfg.gaze_dwell_threshold;
        let prev_state = self.engine.state();
        let prev_reading = self.engine.tracker().reading_context(signal_cfg);
        let prev_text = self.engine.tracker().text_dwell_elapsed();

        let output = self.engine.step(frame)?;
        let tracker = self.engine.tracker();
        let text = tracker.text_dwell_elapsed();
        let reading_event = prev_text < event_threshold && text >= event_threshold;
        let displays = self
            .content
            .tick(frame.timestamp, tracker.current_target(), output.state)?;

        let words: Vec<usize> = displays.iter().map(|d| d.record.word_count).collect();
        self.metrics.accumulate(&MetricsEvent {
            state: Some(prev_state),
            dt: output.dt,
            reading: prev_reading,
            reading_event,
            displayed_words: &words,
            card: frame.card.as_deref(),
        });
        if output.tick.is_some() {
            self.metrics.ticks += 1;
        }
        Ok(SessionStep {
            output,
            displays,
            reading_event,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::EngagementState;

    fn session() -> Session {
        Session::from_config(&EngineConfig::default(), Catalog::builtin(), ContentCache::new()).unwrap()
    }

    #[test]
    fn focused_reading_displays_content_and_counts_reading() {
        let mut s = session();
        let mut displays = Vec::new();
        for i in 0..(30 * 90) {
            let f = TelemetryFrame::new(i as f64 / 90.0, 1.0, 0.0).gazing("ex-01", true);
            displays.extend(s.step(&f).unwrap().displays);
        }
        assert_eq!(s.engine().state(), EngagementState::HighlyEngaged);
        assert_eq!(s.metrics().reading_events, 1);
        assert!(s.metrics().reading_view_time > 25.0);
        assert!(!displays.is_empty());
        assert!(displays.iter().all(|d| d.record.level == d.level));
        assert_eq!(
            s.metrics().words_exposed,
            displays.iter().map(|d| d.record.word_count as u64).sum::<u64>()
        );
    }

    #[test]
    fn bad_frame_propagates() {
        let mut s = session();
        let f = TelemetryFrame::new(0.0, f64::NAN, 0.0);
        assert!(matches!(s.step(&f), Err(SessionError::Engine(EngineError::Signal(_)))));
    }
}
