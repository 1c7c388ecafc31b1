pub mod arith;
pub mod kex;
pub mod netsim;
pub mod privacy;
pub mod protocol;
pub mod rng;
pub mod snark;
pub mod stats;
pub mod wire;
