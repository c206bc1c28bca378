//! Rules core for SpaceRace, a team quiz race played on a shared grid map.
//!
//! Everything in this crate is a pure function over owned values: the engine
//! never reads a clock, never touches the network and never allocates a
//! random generator it was not seeded with. Hosts (see the `spacerace`
//! crate) inject time and IO.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod engine;
pub mod grading;
pub mod protocol;
pub mod question;
pub mod world;

mod rng;

pub use engine::{EngineError, Event, GameConfig, GameState, PlayerId, Report};
pub use grading::{grade, GradeError, Submission, Verdict};
pub use protocol::{decode_message, encode_message, Payload, WireMessage};
pub use question::{load_bank, save_bank, Question, QuestionBank};
pub use world::{Cell, Direction, WorldMap};
