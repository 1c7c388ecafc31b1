use serde::{Deserialize, Serialize};

use super::SnarkError;
use crate::arith::{hash_concat, CurvePoint, DomainParams, Scalar};

/// Route lengths used in simulation mode.
pub const ROUTE_LENGTHS: [usize; 4] = [5, 8, 10, 15];

/// An ordered list of 16-bit grid waypoints.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlightPath {
    waypoints: Vec<(u16, u16)>,
}

impl FlightPath {
    pub fn new(waypoints: Vec<(u16, u16)>) -> Result<Self, SnarkError> {
        if waypoints.is_empty() {
            return Err(SnarkError::EmptyPath);
        }
        if waypoints.len() > u16::MAX as usize {
            return Err(SnarkError::InvalidRouteLength(waypoints.len()));
        }
        Ok(FlightPath { waypoints })
    }

    /// Constructor for simulation routes; the length must be one of
    /// [`ROUTE_LENGTHS`].
    pub fn simulation(waypoints: Vec<(u16, u16)>) -> Result<Self, SnarkError> {
        if !ROUTE_LENGTHS.contains(&waypoints.len()) {
            return Err(SnarkError::InvalidRouteLength(waypoints.len()));
        }
        Self::new(waypoints)
    }

    pub fn waypoints(&self) -> &[(u16, u16)] {
        &self.waypoints
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// `len (u16) || x_1 || y_1 || ...`, big-endian.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 + 4 * self.waypoints.len());
        out.extend_from_slice(&(self.waypoints.len() as u16).to_be_bytes());
        for (x, y) in &self.waypoints {
            out.extend_from_slice(&x.to_be_bytes());
            out.extend_from_slice(&y.to_be_bytes());
        }
        out
    }
}

/// `C = r*G + H(w || r)*G`. The opening is kept only on the prover side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PedersenCommitment {
    pub point: CurvePoint,
    opening: Option<Scalar>,
}

impl PedersenCommitment {
    /// Verifier-side view without opening.
    pub fn from_point(point: CurvePoint) -> Self {
        PedersenCommitment { point, opening: None }
    }

    pub fn opening(&self) -> Option<&Scalar> {
        self.opening.as_ref()
    }

    pub fn public_view(&self) -> Self {
        Self::from_point(self.point)
    }
}

/// `H(w || r)` reduced mod n.
pub fn message_scalar(curve: &'static DomainParams, path: &FlightPath, r: &Scalar) -> Scalar {
    let d = hash_concat(&[&path.encode(), &r.to_be_bytes()]);
    Scalar::from_be_bytes_reduced(curve, d.as_bytes())
}

/// Discrete log of the commitment, `r + H(w || r)`.
pub fn commitment_scalar(path: &FlightPath, r: &Scalar) -> Scalar {
    *r + message_scalar(r.curve(), path, r)
}

pub fn commit(path: &FlightPath, r: &Scalar) -> Result<PedersenCommitment, SnarkError> {
    if r.is_zero() {
        return Err(SnarkError::ZeroNonce);
    }
    if path.is_empty() {
        return Err(SnarkError::EmptyPath);
    }
    let curve = r.curve();
    let g = CurvePoint::generator(curve);
    let point = g.mul(&(*r + message_scalar(curve, path, r)));
    Ok(PedersenCommitment {
        point,
        opening: Some(*r),
    })
}
