//! Flight-path circuit: every coordinate is decomposed into 16 bits, the
//! geofence is enforced by decomposing `c - min` and `max - c` into 16 bits
//! as well, and the route is folded into an accumulator
//! `acc' = (acc + x + 2^16 y)^3 + k` whose final value is public.
//!
//! Constraint count: 50 per coordinate (48 booleanity + 2 linear), 2 per
//! accumulator round, 1 final equality, so `m = 102 n + 1`. Wire count is
//! `1 + 5 + 98 n` (constant, 5 public inputs, 96 bits + 2 accumulator
//! wires per waypoint).

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use super::pedersen::{FlightPath, ROUTE_LENGTHS};
use super::r1cs::{LinComb, R1CSystem};
use super::{SnarkError, Statement};
use crate::arith::{hash, Fq};

pub const COORD_BITS: usize = 16;
pub const NUM_PUBLIC: usize = 5;

const X_MIN: usize = 1;
const X_MAX: usize = 2;
const Y_MIN: usize = 3;
const Y_MAX: usize = 4;
const ACC_OUT: usize = 5;

/// Round constant `k = H("ZAPS-acc") mod q`.
pub static ACC_CONSTANT: LazyLock<Fq> = LazyLock::new(|| Fq::from_be_bytes_reduced(hash(b"ZAPS-acc").as_bytes()));

/// Inclusive geofence rectangle on the 16-bit grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Geofence {
    pub x_min: u16,
    pub x_max: u16,
    pub y_min: u16,
    pub y_max: u16,
}

impl Geofence {
    pub fn new(x_min: u16, x_max: u16, y_min: u16, y_max: u16) -> Result<Self, SnarkError> {
        if x_min > x_max || y_min > y_max {
            return Err(SnarkError::BoundsOutOfGrid);
        }
        Ok(Geofence { x_min, x_max, y_min, y_max })
    }

    /// Checked construction from wide integers, rejecting values beyond the grid.
    pub fn from_wide(x_min: u32, x_max: u32, y_min: u32, y_max: u32) -> Result<Self, SnarkError> {
        let c = |v: u32| u16::try_from(v).map_err(|_| SnarkError::BoundsOutOfGrid);
        Self::new(c(x_min)?, c(x_max)?, c(y_min)?, c(y_max)?)
    }

    pub fn contains(&self, (x, y): (u16, u16)) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }
}

/// One accumulator round.
pub fn acc_step(acc: Fq, (x, y): (u16, u16)) -> Fq {
    let s = acc + Fq::new(x as u64) + Fq::new((y as u64) << 16);
    s * s * s + *ACC_CONSTANT
}

/// Route digest published as the last public input.
pub fn route_accumulator(path: &FlightPath) -> Fq {
    path.waypoints().iter().fold(Fq::ZERO, |acc, w| acc_step(acc, *w))
}

pub fn expected_constraints(n: usize) -> usize {
    102 * n + 1
}

pub fn expected_wires(n: usize) -> usize {
    1 + NUM_PUBLIC + 98 * n
}

#[derive(Clone, Debug)]
pub struct FlightCircuit {
    pub system: R1CSystem,
    pub bounds: Geofence,
    pub n_waypoints: usize,
}

fn bits_lc(bits: &[usize]) -> LinComb {
    bits.iter().enumerate().map(|(j, w)| (*w, Fq::new(1 << j))).collect()
}

fn alloc_bits(sys: &mut R1CSystem) -> Vec<usize> {
    let bits: Vec<usize> = (0..COORD_BITS).map(|_| sys.alloc()).collect();
    for &b in &bits {
        // b * (1 - b) = 0
        sys.enforce(vec![(b, Fq::ONE)], vec![(0, Fq::ONE), (b, -Fq::ONE)], vec![]);
    }
    bits
}

/// Range constraints for one coordinate; returns the coordinate bit wires.
fn coordinate(sys: &mut R1CSystem, lo: usize, hi: usize) -> Vec<usize> {
    let c = alloc_bits(sys);
    let d1 = alloc_bits(sys);
    let d2 = alloc_bits(sys);
    // (d1 - c + lo) * 1 = 0
    let mut lc = bits_lc(&d1);
    lc.extend(bits_lc(&c).into_iter().map(|(w, k)| (w, -k)));
    lc.push((lo, Fq::ONE));
    sys.enforce(lc, vec![(0, Fq::ONE)], vec![]);
    // (d2 + c - hi) * 1 = 0
    let mut lc = bits_lc(&d2);
    lc.extend(bits_lc(&c));
    lc.push((hi, -Fq::ONE));
    sys.enforce(lc, vec![(0, Fq::ONE)], vec![]);
    c
}

pub fn compile_flightpath_circuit(bounds: Geofence, n_waypoints: usize) -> Result<FlightCircuit, SnarkError> {
    if !ROUTE_LENGTHS.contains(&n_waypoints) {
        return Err(SnarkError::InvalidRouteLength(n_waypoints));
    }
    Geofence::new(bounds.x_min, bounds.x_max, bounds.y_min, bounds.y_max)?;
    let mut sys = R1CSystem::new(NUM_PUBLIC);
    let k = *ACC_CONSTANT;
    let mut acc: Option<usize> = None;
    for _ in 0..n_waypoints {
        let xb = coordinate(&mut sys, X_MIN, X_MAX);
        let yb = coordinate(&mut sys, Y_MIN, Y_MAX);
        // s = acc + x + 2^16 y
        let mut s = bits_lc(&xb);
        s.extend(yb.iter().enumerate().map(|(j, w)| (*w, Fq::new(1 << (16 + j)))));
        if let Some(a) = acc {
            s.push((a, Fq::ONE));
        }
        let t = sys.alloc();
        let next = sys.alloc();
        sys.enforce(s.clone(), s.clone(), vec![(t, Fq::ONE)]);
        sys.enforce(vec![(t, Fq::ONE)], s, vec![(next, Fq::ONE), (0, -k)]);
        acc = Some(next);
    }
    let last = acc.expect("at least one waypoint");
    sys.enforce(vec![(last, Fq::ONE), (ACC_OUT, -Fq::ONE)], vec![(0, Fq::ONE)], vec![]);
    Ok(FlightCircuit {
        system: sys,
        bounds,
        n_waypoints,
    })
}

impl FlightCircuit {
    pub fn statement(&self, acc_out: Fq) -> Statement {
        let b = &self.bounds;
        Statement {
            public_inputs: vec![
                Fq::new(b.x_min as u64),
                Fq::new(b.x_max as u64),
                Fq::new(b.y_min as u64),
                Fq::new(b.y_max as u64),
                acc_out,
            ],
        }
    }

    /// Full wire assignment for `path`, in allocation order. Fails when the
    /// path has the wrong length or leaves the geofence.
    pub fn witness(&self, path: &FlightPath) -> Result<Vec<Fq>, SnarkError> {
        if path.len() != self.n_waypoints {
            return Err(SnarkError::InvalidRouteLength(path.len()));
        }
        let b = self.bounds;
        let mut z = Vec::with_capacity(self.system.num_wires);
        z.push(Fq::ONE);
        z.extend(self.statement(route_accumulator(path)).public_inputs);
        let push_bits = |z: &mut Vec<Fq>, v: u32| {
            for j in 0..COORD_BITS {
                z.push(Fq::new(((v >> j) & 1) as u64));
            }
        };
        let mut acc = Fq::ZERO;
        for (i, &(x, y)) in path.waypoints().iter().enumerate() {
            for (c, lo, hi) in [(x, b.x_min, b.x_max), (y, b.y_min, b.y_max)] {
                if c < lo || c > hi {
                    return Err(SnarkError::WitnessInvalid { constraint: 102 * i });
                }
                push_bits(&mut z, c as u32);
                push_bits(&mut z, (c - lo) as u32);
                push_bits(&mut z, (hi - c) as u32);
            }
            let s = acc + Fq::new(x as u64) + Fq::new((y as u64) << 16);
            let t = s * s;
            acc = t * s + *ACC_CONSTANT;
            z.push(t);
            z.push(acc);
        }
        debug_assert_eq!(z.len(), self.system.num_wires);
        Ok(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fence() -> Geofence {
        Geofence::new(100, 200, 1000, 1100).unwrap()
    }

    #[test]
    fn closed_form_counts() {
        for n in ROUTE_LENGTHS {
            let c = compile_flightpath_circuit(fence(), n).unwrap();
            assert_eq!(c.system.num_constraints(), expected_constraints(n));
            assert_eq!(c.system.num_wires, expected_wires(n));
        }
        assert_eq!(expected_constraints(5), 511);
    }

    #[test]
    fn boundary_inclusive_and_outside_rejected() {
        let c = compile_flightpath_circuit(fence(), 5).unwrap();
        let p = FlightPath::new(vec![(100, 1000), (200, 1100), (150, 1050), (100, 1100), (200, 1000)]).unwrap();
        let z = c.witness(&p).unwrap();
        assert!(c.system.is_satisfied(&z));
        let out = FlightPath::new(vec![(99, 1000), (200, 1100), (150, 1050), (100, 1100), (200, 1000)]).unwrap();
        assert!(matches!(c.witness(&out), Err(SnarkError::WitnessInvalid { .. })));
    }

    #[test]
    fn forced_outside_assignment_is_unsatisfiable() {
        // Build the assignment for x = 99 by hand; the d1 bits cannot encode -1.
        let c = compile_flightpath_circuit(fence(), 5).unwrap();
        let p = FlightPath::new(vec![(100, 1000); 5]).unwrap();
        let mut z = c.witness(&p).unwrap();
        // coordinate bits of x_0 start at wire 6; set x = 99 = 0b1100011
        for j in 0..16 {
            z[6 + j] = Fq::new((99 >> j) & 1);
        }
        assert!(!c.system.is_satisfied(&z));
    }

    #[test]
    fn bounds_and_lengths_validated() {
        assert_eq!(Geofence::from_wide(0, 70000, 0, 1), Err(SnarkError::BoundsOutOfGrid));
        assert_eq!(Geofence::new(5, 4, 0, 1), Err(SnarkError::BoundsOutOfGrid));
        assert!(matches!(
            compile_flightpath_circuit(fence(), 7),
            Err(SnarkError::InvalidRouteLength(7))
        ));
    }

    #[test]
    fn accumulator_is_public_output() {
        let c = compile_flightpath_circuit(fence(), 5).unwrap();
        let p = FlightPath::new(vec![(120, 1010); 5]).unwrap();
        let mut z = c.witness(&p).unwrap();
        z[ACC_OUT] = z[ACC_OUT] + Fq::ONE;
        assert_eq!(c.system.first_unsatisfied(&z), Some(c.system.num_constraints() - 1));
    }
}
