pub mod bench;
pub mod dataset;
pub mod extract;
pub mod integrate;
pub mod neural;
pub mod rng;
pub mod systems;
pub mod verify;
