pub mod cli;
pub mod env_id;
pub mod learn;
pub mod pomg;
pub mod rewards;
pub mod world;
