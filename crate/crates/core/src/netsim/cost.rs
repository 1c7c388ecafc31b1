//! Per-message processing costs replayed by the simulator.
//!
//! Costs are wall-clock samples of the real operations. The pinned tables
//! were sampled once on the reference machine so that simulator output is
//! reproducible anywhere; [`CostModel::calibrate`] resamples them locally.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::protocol::{enroll_pair, honest_run, random_route, standard_fence, Authority, Envelope, Role};
use crate::rng::sub_rng;
use crate::snark::{commit, schnorr_prove, schnorr_verify_recover, verproof, Backend};
use crate::arith::Scalar;
use crate::stats::median;
use crate::wire::MsgKind;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    pub backend: Backend,
    /// Cost of `user_begin_init` or `drone_begin_init` on the device, µs.
    pub start_us: u64,
    /// Receiver cost per message kind, Msg1 first, µs.
    pub receive_us: [u64; 8],
    /// Proof-verification share of `receive_us`, µs.
    pub verify_us: [u64; 8],
}

impl CostModel {
    pub fn pinned(backend: Backend) -> Self {
        match backend {
            Backend::Schnorr => CostModel {
                backend,
                start_us: 516,
                receive_us: [680, 690, 286, 466, 408, 653, 248, 2],
                verify_us: [0, 0, 0, 0, 210, 210, 210, 0],
            },
            Backend::Qap => CostModel {
                backend,
                start_us: 514,
                receive_us: [690, 700, 288, 596, 285, 289, 13, 2],
                verify_us: [0, 0, 0, 0, 10, 10, 10, 0],
            },
        }
    }

    pub fn receive(&self, kind: MsgKind) -> u64 {
        self.receive_us[slot(kind)]
    }

    pub fn verify(&self, kind: MsgKind) -> u64 {
        self.verify_us[slot(kind)]
    }

    /// Server init work happens when the second init message arrives; the
    /// pinned tables split it evenly over Msg1 and Msg2.
    ///
    /// Samples every receive path `reps` times on this machine and keeps
    /// the medians.
    pub fn calibrate(backend: Backend, reps: usize) -> Self {
        let reps = reps.max(1);
        let authority = Authority::standard(0xca1b, backend);
        let fence = standard_fence();
        let mut samples: Vec<Vec<f64>> = vec![Vec::new(); 8];
        let mut start = Vec::new();
        for i in 0..reps as u64 {
            let (user, drone) = enroll_pair(&authority, 0xca1b, i).expect("fresh enrollment");
            let route = random_route(&mut sub_rng(i, "calibrate/route"), &fence, 5);
            let mut run = honest_run(&authority, user, drone, &route, false, sub_rng(i, "calibrate/run"));
            let t0 = Instant::now();
            let mut queue: Vec<Envelope> = run.start(1_000_000);
            start.push(t0.elapsed().as_secs_f64() * 1e6 / 2.0);
            while !queue.is_empty() {
                let env = queue.remove(0);
                let t = Instant::now();
                let out = run.deliver(&env, 1_000_000);
                samples[slot(env.kind)].push(t.elapsed().as_secs_f64() * 1e6);
                queue.extend(out);
            }
        }
        let mut receive_us = [0u64; 8];
        for (k, s) in samples.iter().enumerate() {
            receive_us[k] = median(s).round() as u64;
        }
        let v = verify_sample(&authority, backend, reps);
        let mut verify_us = [0u64; 8];
        for k in [MsgKind::Msg5, MsgKind::Msg6, MsgKind::Msg7] {
            verify_us[slot(k)] = v.min(receive_us[slot(k)]);
        }
        CostModel {
            backend,
            start_us: median(&start).round() as u64,
            receive_us,
            verify_us,
        }
    }
}

fn slot(k: MsgKind) -> usize {
    k.index() - 1
}

fn verify_sample(authority: &Authority, backend: Backend, reps: usize) -> u64 {
    let params = &authority.params;
    let fence = standard_fence();
    let mut rng = sub_rng(0, "calibrate/verify");
    let route = random_route(&mut rng, &fence, 5);
    let mut times = Vec::new();
    match backend {
        Backend::Schnorr => {
            let r = Scalar::random(params.curve, &mut rng);
            let c = commit(&route, &r).expect("valid route");
            let proof = schnorr_prove(&c, &route, &r, b"calibrate", &mut rng).expect("valid opening");
            for _ in 0..reps {
                let t = Instant::now();
                assert!(schnorr_verify_recover(params.curve, &proof, b"calibrate").is_some());
                times.push(t.elapsed().as_secs_f64() * 1e6);
            }
        }
        Backend::Qap => {
            let keys = params.keyring.get(Role::User, 5).expect("setup");
            let circuit = params.circuit(fence, 5).expect("circuit");
            let w = circuit.witness(&route).expect("witness");
            let x = circuit.statement(crate::snark::route_accumulator(&route));
            let proof = crate::snark::genproof(&keys.0, &x, &w).expect("proof");
            for _ in 0..reps {
                let t = Instant::now();
                assert!(verproof(&keys.1, &x, &proof));
                times.push(t.elapsed().as_secs_f64() * 1e6);
            }
        }
    }
    median(&times).round() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    #[ignore = "prints a calibration table"]
    fn print_calibration() {
        for b in [Backend::Schnorr, Backend::Qap] {
            println!("{:?}", CostModel::calibrate(b, 15));
        }
    }
}
