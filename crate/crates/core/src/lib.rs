pub mod channel_metrics;
pub mod channels;
pub mod error;
pub mod numkit;
pub mod optimize;
pub mod state;
pub mod state_metrics;
pub mod verify;

pub use channel_metrics::{ChannelMetricsReport, ChannelPair, ConditionalMetrics};
pub use channels::{ChannelDensity, KrausChannel};
pub use error::{Error, Result};
pub use numkit::ComplexMatrix;
pub use optimize::{OptResult, OptimizerConfig};
pub use state::DensityOperator;
