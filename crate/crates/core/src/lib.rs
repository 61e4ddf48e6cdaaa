//! Packet-level simulator for strict-priority datacenter fabrics with
//! Scout-driven congestion control.

pub mod config;
pub mod engine;
pub mod error;
pub mod fluid;
pub mod metrics;
pub mod packet;
pub mod port;
pub mod runner;
pub mod scenarios;
pub mod scout;
pub mod sim;
pub mod time;
pub mod topology;
pub mod transport;
pub mod workload;

pub use time::SimTime;
