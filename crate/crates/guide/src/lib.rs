//! Runs the guide chapters as doctests.

#[doc = include_str!("../../../book/src/intro.md")]
mod intro {}
#[doc = include_str!("../../../book/src/model.md")]
mod model {}
#[doc = include_str!("../../../book/src/rules.md")]
mod rules {}
#[doc = include_str!("../../../book/src/monitor.md")]
mod monitor {}
#[doc = include_str!("../../../book/src/rta.md")]
mod rta {}
#[doc = include_str!("../../../book/src/simulation.md")]
mod simulation {}
#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
