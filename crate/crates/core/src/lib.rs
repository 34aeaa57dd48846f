//! Simulation and optimization toolkit for heterogeneous recurrent spiking
//! networks: LIF/STDP reservoirs with distribution-sampled parameters,
//! memory-capacity and spike-efficiency metrics, Bayesian optimization over
//! parameter distributions, and a Hawkes-process model of the network's
//! firing.

pub mod bayesopt;
pub mod codec;
pub mod datagen;
pub mod distribution;
pub mod error;
pub mod hawkes;
pub mod metrics;
pub mod network;
pub mod neuron;
pub mod pipeline;
pub mod plasticity;
pub mod raster;
pub mod readout;
pub mod rng;
pub mod stats;

pub use distribution::{DistributionSpec, Family};
pub use error::{Error, ErrorKind, Result};
pub use raster::SpikeRaster;
