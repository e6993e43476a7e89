//! Compile Alice&Bob protocol narrations into prudent per-role programs.
//!
//! The pipeline is: parse a narration, extract one role specification per
//! agent, then compile every role into an active frame whose sends are
//! recipes over earlier messages and whose receptions carry every equality
//! check observable on the intended messages.

pub mod term;
pub mod rewrite;
pub mod narration;
pub mod role;
pub mod deduction;
pub mod basis;
pub mod xor;
pub mod compiler;
pub mod runtime;
pub mod oracle;
