//! Data-driven co-design of distributed controllers and dynamic
//! event-triggering schemes for interconnected discrete-time linear systems.
//!
//! - [`network`]: graphs, subsystem models, the pendulum benchmark and
//!   zero-order-hold discretization.
//! - [`data`]: seeded open-loop experiments and the quadratic description of
//!   all systems consistent with them.
//! - [`ets`]: the dynamic periodic trigger and the closed-loop simulator.
//! - [`lmi`]: LMI assembly, the solver backend and design recovery.

pub mod data;
pub mod error;
pub mod ets;
pub mod linalg;
pub mod lmi;
pub mod network;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/triggering.md")]
    mod triggering {}
    #[doc = include_str!("../../../book/src/design.md")]
    mod design {}
}
