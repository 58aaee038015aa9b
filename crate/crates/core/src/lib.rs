//! Mixed-traffic simulation of a signalized single-lane corridor and a
//! multi-residual mixture-of-experts eco-driving controller trained with
//! PPO.

pub mod cli;
pub mod error;
pub mod net;
pub mod eval;
pub mod learner;
pub mod nominal;
pub mod policy;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
