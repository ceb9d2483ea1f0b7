#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod dpd;
pub mod error;
pub mod learn;
pub mod metrics;
pub mod observe;
pub mod pa;
pub mod scenario;
pub mod signals;
