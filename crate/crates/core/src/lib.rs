//! Finite-horizon repeated Prisoner's Dilemma with complexity-bounded players.
//!
//! Strategies are written in a small language ([`dsl`]), compiled to a
//! cost-accounted machine ([`vm`]) and played in two-player matches
//! ([`ftpd`]) or in populations with opting out and rematching ([`opd`]).

pub mod analysis;
pub mod cli;
pub mod dsl;
pub mod ftpd;
pub mod game;
pub mod library;
pub mod opd;
pub mod vm;
