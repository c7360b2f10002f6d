//! QuickTalk: infrared pinpointing plus association-free WiFi broadcast
//! communication for walk-up interaction with nearby IoT devices, together
//! with a deterministic discrete-event simulator that reproduces the
//! protocol's timing, loss, and coexistence behavior.
//!
//! The crate is organized around the protocol pipeline:
//!
//! * [`ir_codec`]: 40-bit NEC-format IR frames and pulse trains
//! * [`device_filter`]: hierarchical 4/4/6-bit device-type filters
//! * [`ir_link`]: parametric distance/angle IR channel model
//! * [`wifi_medium`]: 11-channel broadcast medium with switching blindness
//!   and load-dependent loss
//! * [`user_device`] / [`iot_device`]: the two protocol state machines
//! * [`traffic`]: background request/response sessions and a bulk download
//! * [`sim_engine`]: event queue, virtual clock, named RNG streams, metrics
//! * [`scenario`] / [`sim`] / [`report`]: scenario files, the bound
//!   simulation world, and CSV/summary output consumed by `quicktalk-sim`

pub mod device_filter;
pub mod iot_device;
pub mod ir_codec;
pub mod ir_link;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod sim_engine;
pub mod time;
pub mod traffic;
pub mod user_device;
pub mod wifi_medium;
pub mod wire;

pub use device_filter::{DeviceType, DeviceTypeFilter, TypeRegistry};
pub use ir_codec::{DecodeResult, IrFrame, PulseSegment, PulseState, PulseTrain};
pub use ir_link::{IrEnvironment, IrGeometry, OutcomeClass};
pub use report::{ReportRow, Summary};
pub use scenario::Scenario;
pub use sim::{RunOutput, Simulation};
pub use sim_engine::{percentile, RngStreams, Scheduler, TransactionRecord};
pub use time::{SimDuration, SimTime};
pub use wifi_medium::{BroadcastFrame, Channel, FrameKind, NodeId, WifiMedium};
