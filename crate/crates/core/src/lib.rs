//! Telemetry event processing, community matchmaking, and care-ecosystem
//! simulation.
//!
//! The crate is organized around five subsystems:
//!
//! - [`events`]: vital-sign readings, the line-oriented event-log codec, and
//!   time-ordered replay of recorded streams.
//! - [`rules`]: a small textual language for describing alert rules
//!   (thresholds, sliding-window aggregates, trend predictions, sequences)
//!   with a canonical formatter.
//! - [`cep`]: the incremental rule engine that turns an event stream into
//!   alerts, plus risk scoring, action selection, and adaptive monitoring
//!   intervals.
//! - [`catalyst`]: a publish/subscribe registry of service offers and
//!   requests with taxonomy-based semantic matching and mutual ("win-win")
//!   pairing discovery.
//! - [`sim`]: a seeded multi-agent simulation comparing a traditional
//!   dispatch organization against a community-based one with a cloud of
//!   informal verifiers.
//!
//! Everything is deterministic: replay, matching, and simulation are pure
//! functions of their inputs (including the seed).
//!
//! ```
//! use telecare_core::cep::CepEngine;
//! use telecare_core::events::{parse_event_line, replay_log, LogSource};
//! use telecare_core::rules::parse_rules;
//!
//! let rules = parse_rules("rule hypo: when glucose < 70 severity high").unwrap();
//! let log = "p1,0,glucose,82\np1,600,glucose,64\n";
//! let stream = replay_log(&[LogSource::new("demo", log)]).unwrap();
//!
//! let mut engine = CepEngine::new(rules);
//! let alerts: Vec<_> = stream
//!     .iter()
//!     .flat_map(|e| engine.ingest(e).unwrap())
//!     .collect();
//! assert_eq!(alerts.len(), 1);
//! assert_eq!(alerts[0].rule_name, "hypo");
//! assert_eq!(alerts[0].fire_time, 600);
//! ```

pub mod catalyst;
pub mod cep;
pub mod events;
pub mod numfmt;
pub mod rules;
pub mod sim;
