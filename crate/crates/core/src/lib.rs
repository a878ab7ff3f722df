#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baselines;
pub mod learner;
pub mod mmdp;
pub mod moead;
pub mod net;
pub mod sadn;
pub mod sigmoid;
pub mod training;
