//! Buffer management and scheduling for packets whose work and profit may
//! be unknown until they are first processed.
//!
//! The crate covers the cycle-level system model, an MMPP traffic
//! generator, the SAM / SAO / SAM-SS policy family, a simulation engine,
//! a knapsack-based throughput benchmark and evaluators for the lower
//! bounds on competitive ratio.
//!
//! ```
//! use mistqueue::{generate_trace, run, substream, PolicyConfig, SchedOrder, Stream, TrafficConfig};
//!
//! let cfg = TrafficConfig { total_packets: 500, seed: 7, ..TrafficConfig::default() };
//! let trace = generate_trace(&cfg, &mut substream(7, Stream::Traffic)).unwrap();
//! let stats = run(&trace, &PolicyConfig::sao(10, 1.0, SchedOrder::Effect), 7).unwrap();
//! assert!(stats.throughput > 0);
//! ```

pub mod bounds;
pub mod class;
pub mod engine;
pub mod experiment;
pub mod knapsack;
pub mod model;
pub mod policy;
pub mod rng;
pub mod trace;
pub mod traffic;

pub use class::{ClassId, ClassSelector, Regime, SelectedClass};
pub use engine::{
    run, run_batch, run_observed, BatchRow, BatchTable, Pairing, SimError, Step, Summary,
};
pub use experiment::{sweep, RegimeChoice, Scenario, SweepParam, SweepPoint};
pub use knapsack::{knapsack_upper_bound, performance_ratio, CapacityRule, UpperBound};
pub use model::{ArrivalBatch, CycleKind, DropCause, Packet, PacketSpec, QueueEvent, RunStats};
pub use policy::{PolicyConfig, PolicyKind, PolicyName, QueuePolicy, SchedOrder, SelectionSpec};
pub use rng::{derive_seed, substream, Stream};
pub use trace::{read_trace, write_trace, Trace, TraceError, TraceMeta};
pub use traffic::{generate_trace, TrafficConfig};
