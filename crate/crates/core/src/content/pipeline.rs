//! Engagement-driven content requests, staleness handling, and display.

use std::collections::BTreeMap;

use super::dispatch::{Completion, Dispatcher, Job, Outcome};
use super::prompt::{build_prompt, PromptTemplates};
use super::provider::ProviderError;
use super::{Catalog, ContentCache, ContentError, ContentRecord, ContentRequest};
use crate::state::EngagementState;

#[derive(Debug, Clone, PartialEq)]
pub enum RequestOutcome {
    /// Served from cache; no provider call.
    Hit(ContentRecord),
    /// A request for this key is already in flight.
    InFlight(u64),
    Dispatched(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseDisposition {
    /// Cached and eligible for display.
    Accepted,
    /// Cached, but the level moved on since the request was issued.
    DiscardedStale,
    /// Request already resolved; ignored.
    Duplicate,
}

/// A record shown on the exhibit panel.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplayEvent {
    pub at: f64,
    pub record: ContentRecord,
    /// Level in force when the record was shown.
    pub level: EngagementState,
}

#[derive(Debug, Clone)]
struct Panel {
    exhibit_id: String,
    shown: Option<EngagementState>,
    /// Levels of this exhibit with a request in flight, one bit per level.
    pending: u8,
    /// Levels already seen in the cache. Entries are never evicted.
    cached: u8,
}

fn level_bit(level: EngagementState) -> u8 {
    1 << level.index()
}

/// Session-side coordinator. The inference loop is its only writer.
///
/// A request goes out for `(focused exhibit, level)` once the level has
/// held for the debounce interval and the pair is neither cached nor in
/// flight. The panel opens when gaze focus moves to an exhibit and shows
/// the cached record for the current level, or the first matching response
/// to arrive while it is open. With `live_swap` off, an open panel keeps
/// its text until it is reopened.
pub struct ContentPipeline {
    catalog: Catalog,
    templates: PromptTemplates,
    cache: ContentCache,
    dispatcher: Box<dyn Dispatcher>,
    debounce: f64,
    live_swap: bool,
    next_request_id: u64,
    in_flight: BTreeMap<u64, ContentRequest>,
    provider_calls: u64,
    fallbacks: u64,
    level: Option<(EngagementState, f64)>,
    state_seq: u64,
    panel: Option<Panel>,
}

impl ContentPipeline {
    pub fn new(
        catalog: Catalog,
        templates: PromptTemplates,
        cache: ContentCache,
        dispatcher: Box<dyn Dispatcher>,
        debounce: f64,
        live_swap: bool,
    ) -> Result<Self, ContentError> {
        templates.validate().map_err(ContentError::Config)?;
        Ok(ContentPipeline {
            catalog,
            templates,
            cache,
            dispatcher,
            debounce,
            live_swap,
            next_request_id: 1,
            in_flight: BTreeMap::new(),
            provider_calls: 0,
            fallbacks: 0,
            level: None,
            state_seq: 0,
            panel: None,
        })
    }

    pub fn cache(&self) -> &ContentCache {
        &self.cache
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn provider_calls(&self) -> u64 {
        self.provider_calls
    }

    pub fn fallbacks(&self) -> u64 {
        self.fallbacks
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    /// Serves `(exhibit_id, level)` from cache or dispatches a request.
    pub fn request_content(
        &mut self,
        exhibit_id: &str,
        level: EngagementState,
        now: f64,
    ) -> Result<RequestOutcome, ContentError> {
        let exhibit = self
            .catalog
            .get(exhibit_id)
            .ok_or_else(|| ContentError::UnknownExhibit(exhibit_id.to_owned()))?;
        if let Some(rec) = self.cache.get(exhibit_id, level) {
            return Ok(RequestOutcome::Hit(rec));
        }
        if let Some(req) = self
            .in_flight
            .values()
            .find(|r| r.level == level && r.exhibit_id == exhibit_id)
        {
            return Ok(RequestOutcome::InFlight(req.request_id));
        }
        let spec = build_prompt(exhibit, level, &self.templates)?;
        let request = ContentRequest {
            request_id: self.next_request_id,
            exhibit_id: exhibit_id.to_owned(),
            level,
            issued_at_state_seq: self.state_seq,
        };
        self.next_request_id += 1;
        self.provider_calls += 1;
        self.in_flight.insert(request.request_id, request.clone());
        if let Some(p) = self.panel.as_mut().filter(|p| p.exhibit_id == exhibit_id) {
            p.pending |= level_bit(level);
        }
        let id = request.request_id;
        self.dispatcher.submit(
            Job {
                request,
                spec,
                exhibit: exhibit.clone(),
            },
            now,
        );
        Ok(RequestOutcome::Dispatched(id))
    }

    /// Resolves an in-flight request with `record`.
    ///
    /// Every first response is cached. It is displayable only if the level
    /// in force still equals the requested level.
    pub fn apply_response(
        &mut self,
        record: ContentRecord,
        request: &ContentRequest,
        current_level: EngagementState,
    ) -> ResponseDisposition {
        if self.in_flight.remove(&request.request_id).is_none() {
            return ResponseDisposition::Duplicate;
        }
        if let Some(p) = self.panel.as_mut().filter(|p| p.exhibit_id == request.exhibit_id) {
            p.pending &= !level_bit(request.level);
        }
        self.cache.insert(record);
        if current_level == request.level {
            ResponseDisposition::Accepted
        } else {
            ResponseDisposition::DiscardedStale
        }
    }

    fn record_for(&mut self, completion: &Completion, now: f64) -> ContentRecord {
        let req = &completion.request;
        let exhibit = self
            .catalog
            .get(&req.exhibit_id)
            .expect("requests are only issued for catalog exhibits");
        let fallback = |err: &ProviderError| {
            match err {
                ProviderError::Timeout => log::warn!(
                    "request {} ({} / {}) timed out; serving static text",
                    req.request_id,
                    req.exhibit_id,
                    req.level
                ),
                other => log::error!(
                    "request {} ({} / {}) failed: {other}; serving static text",
                    req.request_id,
                    req.exhibit_id,
                    req.level
                ),
            }
            ContentRecord::fallback(exhibit, req.level, now)
        };
        match &completion.outcome {
            Outcome::Generated { text, provenance } => {
                match ContentRecord::new(req.exhibit_id.clone(), req.level, text.clone(), *provenance, now) {
                    Some(rec) => rec,
                    None => {
                        self.fallbacks += 1;
                        fallback(&ProviderError::Malformed("blank text".into()))
                    }
                }
            }
            Outcome::Failed(err) => {
                self.fallbacks += 1;
                fallback(err)
            }
        }
    }

    fn show(&mut self, record: ContentRecord, level: EngagementState, now: f64, out: &mut Vec<DisplayEvent>) {
        if let Some(panel) = &mut self.panel {
            debug_assert_eq!(panel.exhibit_id, record.exhibit_id);
            debug_assert_eq!(record.level, level);
            panel.shown = Some(level);
            out.push(DisplayEvent { at: now, record, level });
        }
    }

    fn panel_accepts(&self, exhibit_id: &str) -> bool {
        self.panel
            .as_ref()
            .is_some_and(|p| p.exhibit_id == exhibit_id && (p.shown.is_none() || self.live_swap))
    }

    /// Advances the pipeline by one frame and returns what was displayed.
    ///
    /// `focus` is the exhibit currently under gaze and `level` the emitted
    /// engagement state.
    pub fn tick(
        &mut self,
        now: f64,
        focus: Option<&str>,
        level: EngagementState,
    ) -> Result<Vec<DisplayEvent>, ContentError> {
        let mut displays = Vec::new();

        match self.level {
            Some((l, _)) if l == level => {}
            Some(_) => {
                self.level = Some((level, now));
                self.state_seq += 1;
            }
            None => self.level = Some((level, now)),
        }

        for completion in self.dispatcher.poll(now) {
            let record = self.record_for(&completion, now);
            let disposition = self.apply_response(record.clone(), &completion.request, level);
            if disposition == ResponseDisposition::Accepted && self.panel_accepts(&record.exhibit_id) {
                self.show(record, level, now, &mut displays);
            }
        }

        let focus_changed = self.panel.as_ref().map(|p| p.exhibit_id.as_str()) != focus;
        if focus_changed {
            self.panel = focus.map(|id| Panel {
                exhibit_id: id.to_owned(),
                shown: None,
                pending: self
                    .in_flight
                    .values()
                    .filter(|r| r.exhibit_id == id)
                    .fold(0, |bits, r| bits | level_bit(r.level)),
                cached: 0,
            });
            if let Some(id) = focus {
                if let Some(rec) = self.cache.get(id, level) {
                    self.show(rec, level, now, &mut displays);
                }
            }
        }

        let stable_for = self.level.map_or(0.0, |(_, since)| now - since);
        let bit = level_bit(level);
        if let (Some(id), Some(panel)) = (focus, &mut self.panel) {
            if stable_for >= self.debounce && panel.pending & bit == 0 {
                let wants = panel.shown != Some(level) && (panel.shown.is_none() || self.live_swap);
                if panel.cached & bit == 0 && self.cache.contains(id, level) {
                    panel.cached |= bit;
                }
                if panel.cached & bit == 0 {
                    self.request_content(id, level, now)?;
                } else if wants {
                    if let RequestOutcome::Hit(rec) = self.request_content(id, level, now)? {
                        self.show(rec, level, now, &mut displays);
                    }
                }
            }
        }
        Ok(displays)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::content::dispatch::SimulatedDispatcher;
    use crate::content::provider::{ContentProvider, MockProvider};
    use crate::content::{Exhibit, Provenance, PromptSpec};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;
    use EngagementState::*;

    struct Counting(AtomicUsize);

    impl ContentProvider for Counting {
        fn generate(&self, spec: &PromptSpec, exhibit: &Exhibit) -> Result<String, ProviderError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok(MockProvider::compose(spec, exhibit))
        }
        fn provenance(&self) -> Provenance {
            Provenance::Mock
        }
    }

    struct Failing;

    impl ContentProvider for Failing {
        fn generate(&self, _: &PromptSpec, _: &Exhibit) -> Result<String, ProviderError> {
            Err(ProviderError::Malformed("not json".into()))
        }
        fn provenance(&self) -> Provenance {
            Provenance::Remote
        }
    }

    fn pipeline_with(provider: Arc<dyn ContentProvider>, latency: f64) -> ContentPipeline {
        ContentPipeline::new(
            Catalog::builtin(),
            PromptTemplates::default(),
            ContentCache::new(),
            Box::new(SimulatedDispatcher::new(provider, latency, 4.0)),
            2.0,
            false,
        )
        .unwrap()
    }

    #[test]
    fn second_request_is_a_cache_hit() {
        let counter = Arc::new(Counting(AtomicUsize::new(0)));
        let mut p = pipeline_with(counter.clone(), 0.0);
        assert!(matches!(p.request_content("ex-01", HighlyEngaged, 0.0).unwrap(), RequestOutcome::Dispatched(1)));
        assert!(matches!(p.request_content("ex-01", HighlyEngaged, 0.0).unwrap(), RequestOutcome::InFlight(1)));
        p.tick(0.0, None, HighlyEngaged).unwrap();
        let calls = counter.0.load(Ordering::SeqCst);
        assert!(matches!(p.request_content("ex-01", HighlyEngaged, 1.0).unwrap(), RequestOutcome::Hit(_)));
        assert_eq!(counter.0.load(Ordering::SeqCst), calls);
        assert_eq!(p.provider_calls(), 1);
    }

    #[test]
    fn unknown_exhibit_is_rejected() {
        let mut p = pipeline_with(Arc::new(MockProvider::new()), 0.0);
        assert!(matches!(p.request_content("nope", Neutral, 0.0), Err(ContentError::UnknownExhibit(_))));
    }

    #[test]
    fn failing_provider_falls_back_to_static_text() {
        let mut p = pipeline_with(Arc::new(Failing), 0.1);
        let mut shown = Vec::new();
        for i in 0..400 {
            let t = i as f64 / 90.0;
            shown.extend(p.tick(t, Some("ex-02"), Neutral).unwrap());
        }
        assert_eq!(shown.len(), 1);
        assert_eq!(shown[0].record.provenance, Provenance::StaticFallback);
        assert_eq!(shown[0].record.text, Catalog::builtin().get("ex-02").unwrap().base_facts);
        assert_eq!(p.fallbacks(), 1);
        assert_eq!(p.in_flight(), 0);
    }

    #[test]
    fn rapid_transitions_are_debounced() {
        let counter = Arc::new(Counting(AtomicUsize::new(0)));
        let mut p = pipeline_with(counter.clone(), 0.0);
        let level_at = |t: f64| {
            if t < 3.0 {
                Engaged
            } else if t < 3.8 {
                HighlyEngaged
            } else {
                Engaged
            }
        };
        for i in 0..450 {
            let t = i as f64 / 90.0;
            p.tick(t, Some("ex-01"), level_at(t)).unwrap();
        }
        // Engaged was stable long enough once; HighlyEngaged never was.
        assert_eq!(counter.0.load(Ordering::SeqCst), 1);
        assert!(!p.cache().contains("ex-01", HighlyEngaged));
    }

    #[test]
    fn refocus_during_flight_does_not_duplicate() {
        let counter = Arc::new(Counting(AtomicUsize::new(0)));
        let mut p = pipeline_with(counter.clone(), 3.0);
        let mut shown = Vec::new();
        for i in 0..900 {
            let t = i as f64 / 90.0;
            // Glance away for a moment every second.
            let focus = if i % 90 < 10 { Some("ex-02") } else { Some("ex-01") };
            shown.extend(p.tick(t, focus, Engaged).unwrap());
        }
        assert_eq!(p.provider_calls(), 2);
        assert_eq!(counter.0.load(Ordering::SeqCst), 2);
        assert!(shown.iter().any(|d| d.record.exhibit_id == "ex-01"));
        assert!(shown.iter().all(|d| d.record.level == Engaged));
    }

    #[test]
    fn stale_response_is_cached_not_displayed() {
        let mut p = pipeline_with(Arc::new(MockProvider::new()), 0.0);
        let id = match p.request_content("ex-03", Engaged, 0.0).unwrap() {
            RequestOutcome::Dispatched(id) => id,
            other => panic!("{other:?}"),
        };
        let req = ContentRequest {
            request_id: id,
            exhibit_id: "ex-03".into(),
            level: Engaged,
            issued_at_state_seq: 0,
        };
        let rec = ContentRecord::new("ex-03", Engaged, "late words", Provenance::Mock, 1.0).unwrap();
        assert_eq!(p.apply_response(rec.clone(), &req, Neutral), ResponseDisposition::DiscardedStale);
        assert!(p.cache().contains("ex-03", Engaged));
        assert_eq!(p.apply_response(rec, &req, Engaged), ResponseDisposition::Duplicate);
    }

    #[test]
    fn accepted_when_level_unchanged() {
        let mut p = pipeline_with(Arc::new(MockProvider::new()), 0.0);
        p.request_content("ex-03", Engaged, 0.0).unwrap();
        let req = ContentRequest {
            request_id: 1,
            exhibit_id: "ex-03".into(),
            level: Engaged,
            issued_at_state_seq: 0,
        };
        let rec = ContentRecord::new("ex-03", Engaged, "words", Provenance::Mock, 1.0).unwrap();
        assert_eq!(p.apply_response(rec, &req, Engaged), ResponseDisposition::Accepted);
    }

    #[test]
    fn revisit_displays_cached_record_again() {
        let mut p = pipeline_with(Arc::new(MockProvider::new()), 0.5);
        let mut shown = Vec::new();
        let mut t = 0.0;
        let mut run = |p: &mut ContentPipeline, focus: Option<&str>, secs: f64, shown: &mut Vec<DisplayEvent>| {
            for _ in 0..(secs * 90.0) as usize {
                shown.extend(p.tick(t, focus, Neutral).unwrap());
                t += 1.0 / 90.0;
            }
        };
        run(&mut p, Some("ex-01"), 4.0, &mut shown);
        run(&mut p, None, 1.0, &mut shown);
        run(&mut p, Some("ex-01"), 1.0, &mut shown);
        assert_eq!(shown.len(), 2);
        assert_eq!(p.provider_calls(), 1);
        assert!(shown.iter().all(|d| d.level == d.record.level));
    }
}
