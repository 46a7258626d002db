pub mod beam;
pub mod geometry;
pub mod lumped;
pub mod world;
pub mod skills;
pub mod rl;
pub mod scenario;
pub mod commands;
pub mod export;
