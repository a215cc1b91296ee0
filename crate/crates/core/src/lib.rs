//! Engagement inference from implicit behavioral telemetry, driving
//! level-adaptive exhibit content.
//!
//! The per-frame path is [`signal`] → [`fusion`] → [`gating`], composed by
//! [`engine::Engine`]. [`session::Session`] adds the asynchronous
//! [`content`] pipeline and [`metrics`]. Traces are read and written by
//! [`trace`], synthesized by [`scenario`], and re-executed by [`replay`].

pub mod bench;
pub mod config;
pub mod content;
pub mod engine;
pub mod fusion;
pub mod gating;
pub mod metrics;
pub mod replay;
pub mod scenario;
pub mod session;
pub mod signal;
pub mod state;
pub mod trace;

pub use config::{ConfigError, EngineConfig, ProviderKind, StageOrder};
pub use content::{Catalog, ContentCache, ContentRecord, Exhibit, Provenance};
pub use engine::{EngagementEstimate, Engine, EngineError, StepOutput, TickRecord};
pub use fusion::{FusionWeights, RollingWindow};
pub use gating::{ClassifierBands, Gate, GateConfig, GateState};
pub use metrics::{MetricsReport, SessionMetrics};
pub use scenario::{Scenario, ScenarioError};
pub use session::{Session, SessionError};
pub use signal::{DwellTracker, NormalizedSignals, SignalConfig, TelemetryFrame};
pub use state::EngagementState;
pub use trace::{Trace, TraceError, TraceHeader};
