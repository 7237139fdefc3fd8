//! Host-side reimplementation of the T800 intelligent packet filter and its
//! benchmark laboratory.
//!
//! The crate is organized around a strategy registry: every filtering policy
//! (decision tree, logistic regression, linear SVM, MLP, quantized MLP) lives
//! behind the [`policy::Policy`] trait, is registered by name in
//! [`policy::PolicyRegistry`], and can be swapped into the running filter at
//! any time. Around that core sit:
//!
//! * [`packet`] — IPv4/TCP header parsing, the chained packet buffer model,
//!   feature extraction and classic pcap I/O;
//! * [`trainer`] — from-scratch trainers for all four model families plus
//!   dataset handling and evaluation;
//! * [`synth`] — seeded benign bulk-transfer and port-scan traffic generators;
//! * [`filter`] — the interception hook with runtime policy replacement;
//! * [`harness`] — the six-step experiment protocol, scenario execution and
//!   per-second metric sampling over the 2x2 traffic grid;
//! * [`analysis`] — summary statistics and the 2^3 full-factorial
//!   influence-of-factors regression.

pub mod analysis;
pub mod filter;
pub mod harness;
pub mod packet;
pub mod policy;
pub mod rng;
pub mod synth;
pub mod trainer;

pub use packet::{FeatureVector, PacketBuf, PacketHeader, FEATURE_LEN, FEATURE_ORDER};
pub use policy::{Class, Policy, PolicyModel, PolicyRegistry};
