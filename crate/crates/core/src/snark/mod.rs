//! Pedersen commitments and two proof backends behind one 128-byte envelope.

pub mod circuit;
pub mod pedersen;
pub mod pinocchio;
pub mod poly;
pub mod qap;
pub mod r1cs;
pub mod schnorr;
pub mod zk;

use std::fmt;
use std::str::FromStr;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::Fq;

pub use circuit::{compile_flightpath_circuit, route_accumulator, FlightCircuit, Geofence};
pub use pedersen::{commit, FlightPath, PedersenCommitment, ROUTE_LENGTHS};
pub use pinocchio::{gen_proof, gen_proof_blinded, snark_setup, ver_proof, ProvingKey, QapProof, VerificationKey};
pub use qap::{r1cs_to_qap, QAPInstance};
pub use r1cs::R1CSystem;
pub use schnorr::{schnorr_prove, schnorr_verify, schnorr_verify_recover};

pub const PROOF_BYTES: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SnarkError {
    #[error("flight path is empty")]
    EmptyPath,
    #[error("route length {0} not supported")]
    InvalidRouteLength(usize),
    #[error("commitment nonce is zero")]
    ZeroNonce,
    #[error("geofence bounds exceed the 16-bit grid or are inverted")]
    BoundsOutOfGrid,
    #[error("circuit has no constraints")]
    DegenerateCircuit,
    #[error("witness violates constraint {constraint}")]
    WitnessInvalid { constraint: usize },
    #[error("statement does not match the witness or key")]
    StatementMismatch,
    #[error("opening does not match the commitment")]
    InconsistentOpening,
    #[error("malformed proof envelope")]
    MalformedProof,
    #[error("key file: {0}")]
    KeyFile(String),
}

/// Fixed-size proof envelope as carried on the wire.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SnarkProof(pub [u8; PROOF_BYTES]);

impl SnarkProof {
    /// True when the bytes match the padding layout of either backend.
    pub fn has_valid_padding(&self) -> bool {
        schnorr::SchnorrProof::is_envelope_shape(self) || QapProof::is_envelope_shape(self)
    }
}

impl fmt::Debug for SnarkProof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SnarkProof({})", hex::encode(self.0))
    }
}

/// Public inputs `s_1..s_n` of a circuit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Statement {
    pub public_inputs: Vec<Fq>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Schnorr,
    Qap,
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Schnorr => "schnorr",
            Backend::Qap => "qap",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "schnorr" => Ok(Backend::Schnorr),
            "qap" => Ok(Backend::Qap),
            _ => Err(format!("unknown backend {s:?} (expected schnorr or qap)")),
        }
    }
}

// The four algorithm names. Setup and Keygen share one trusted-setup run.

pub fn setup<R: RngCore + CryptoRng>(
    security: u32,
    circuit: &R1CSystem,
    rng: &mut R,
) -> Result<(ProvingKey, VerificationKey), SnarkError> {
    snark_setup(security, circuit, rng)
}

pub fn keygen<R: RngCore + CryptoRng>(
    security: u32,
    circuit: &R1CSystem,
    rng: &mut R,
) -> Result<(ProvingKey, VerificationKey), SnarkError> {
    snark_setup(security, circuit, rng)
}

pub fn genproof(pk: &ProvingKey, x: &Statement, w: &[Fq]) -> Result<SnarkProof, SnarkError> {
    gen_proof(pk, x, w).map(|p| p.to_envelope())
}

pub fn verproof(vk: &VerificationKey, x: &Statement, proof: &SnarkProof) -> bool {
    QapProof::from_envelope(proof).is_ok_and(|p| ver_proof(vk, x, &p))
}
