//! Shared inputs for the criterion benches.

use std::sync::Arc;

use zaps_core::arith::{secp256k1, Scalar};
use zaps_core::protocol::{random_route, standard_fence, Authority, Role};
use zaps_core::rng::{sub_rng, SimRng};
use zaps_core::snark::{
    commit, genproof, route_accumulator, schnorr_prove, Backend, FlightCircuit, FlightPath, PedersenCommitment,
    ProvingKey, SnarkProof, Statement, VerificationKey,
};
use zaps_core::arith::Fq;

pub struct SchnorrFixture {
    pub route: FlightPath,
    pub r: Scalar,
    pub commitment: PedersenCommitment,
    pub proof: SnarkProof,
    pub rng: SimRng,
}

pub struct QapFixture {
    pub route: FlightPath,
    pub circuit: Arc<FlightCircuit>,
    pub keys: Arc<(ProvingKey, VerificationKey)>,
    pub witness: Vec<Fq>,
    pub statement: Statement,
    pub proof: SnarkProof,
}

pub const CONTEXT: &[u8] = b"bench";

pub fn schnorr(n: usize) -> SchnorrFixture {
    let mut rng = sub_rng(n as u64, "bench/schnorr");
    let route = random_route(&mut rng, &standard_fence(), n);
    let r = loop {
        let r = Scalar::random(secp256k1(), &mut rng);
        if !r.is_zero() {
            break r;
        }
    };
    let commitment = commit(&route, &r).expect("valid route");
    let proof = schnorr_prove(&commitment, &route, &r, CONTEXT, &mut rng).expect("consistent opening");
    SchnorrFixture {
        route,
        r,
        commitment,
        proof,
        rng,
    }
}

pub fn qap(n: usize) -> QapFixture {
    let auth = Authority::standard(0, Backend::Qap);
    let keys = auth.params.keyring.get(Role::User, n).expect("supported length");
    let circuit = auth.params.circuit(standard_fence(), n).expect("supported length");
    let route = random_route(&mut sub_rng(n as u64, "bench/qap"), &standard_fence(), n);
    let witness = circuit.witness(&route).expect("route inside fence");
    let statement = circuit.statement(route_accumulator(&route));
    let proof = genproof(&keys.0, &statement, &witness).expect("satisfying witness");
    QapFixture {
        route,
        circuit,
        keys,
        witness,
        statement,
        proof,
    }
}
