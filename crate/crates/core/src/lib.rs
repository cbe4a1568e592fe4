pub mod cli;
pub mod controller;
pub mod error;
pub mod golden;
pub mod numerics;
pub mod plant;
pub mod primary;
pub mod secondary;
pub mod simulator;
pub mod verification;
