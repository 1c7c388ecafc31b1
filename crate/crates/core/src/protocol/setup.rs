//! System setup, the authority's directory and registration.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex};

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use super::context::SessionContext;
use super::tokens;
use super::{ProtocolError, Role, DEFAULT_DELTA_T};
use crate::arith::{CurvePoint, DomainParams, Fq, Scalar};
use crate::kex::{ecdh, gen_keypair, KeyPair};
use crate::rng::sub_rng;
use crate::snark::circuit::{compile_flightpath_circuit, FlightCircuit};
use crate::snark::{route_accumulator, snark_setup, Backend, FlightPath, Geofence, ProvingKey, VerificationKey};
use crate::wire::{Alias, Point};

/// Security parameter recorded in QAP keys.
pub const QAP_SECURITY: u32 = 64;

type KeyPairRef = Arc<(ProvingKey, VerificationKey)>;

/// Per-role, per-length QAP keys, generated on first use from a fixed seed.
#[derive(Debug)]
pub struct QapKeyring {
    seed: u64,
    keys: Mutex<HashMap<(Role, usize), KeyPairRef>>,
}

impl QapKeyring {
    pub fn new(seed: u64) -> Self {
        QapKeyring {
            seed,
            keys: Mutex::new(HashMap::new()),
        }
    }

    /// Circuits differ only in their public inputs across geofences, so one
    /// key pair per route length serves every mission.
    pub fn get(&self, role: Role, n: usize) -> Result<Arc<(ProvingKey, VerificationKey)>, ProtocolError> {
        let mut keys = self.keys.lock().expect("keyring lock");
        if let Some(k) = keys.get(&(role, n)) {
            return Ok(k.clone());
        }
        let circuit = compile_flightpath_circuit(Geofence::new(0, 0, 0, 0)?, n)?;
        let mut rng = sub_rng(self.seed, &format!("qap-setup/{role:?}/{n}"));
        let pair = Arc::new(snark_setup(QAP_SECURITY, &circuit.system, &mut rng)?);
        keys.insert((role, n), pair.clone());
        Ok(pair)
    }
}

/// Published parameters: curve, server public key and identity, freshness
/// window and proof backend.
#[derive(Debug)]
pub struct SystemParams {
    pub curve: &'static DomainParams,
    pub p_s: CurvePoint,
    pub p_s_x: Point,
    pub id_s: [u8; 16],
    pub sid: Alias,
    pub delta_t: u32,
    pub backend: Backend,
    pub keyring: QapKeyring,
    circuits: Mutex<HashMap<(Geofence, usize), Arc<FlightCircuit>>>,
}

impl SystemParams {
    /// Compiled circuit for a geofence and route length, cached.
    pub fn circuit(&self, fence: Geofence, n: usize) -> Result<Arc<FlightCircuit>, ProtocolError> {
        let mut cache = self.circuits.lock().expect("circuit cache lock");
        if let Some(c) = cache.get(&(fence, n)) {
            return Ok(c.clone());
        }
        let c = Arc::new(compile_flightpath_circuit(fence, n)?);
        cache.insert((fence, n), c.clone());
        Ok(c)
    }
}

/// Append-only set of used nonces and message digests.
#[derive(Debug, Default)]
pub struct NonceRegistry {
    seen: Mutex<HashSet<[u8; 32]>>,
}

impl Clone for NonceRegistry {
    fn clone(&self) -> Self {
        NonceRegistry {
            seen: Mutex::new(self.seen.lock().expect("registry lock").clone()),
        }
    }
}

impl NonceRegistry {
    /// Returns false when `tag` was already present.
    pub fn insert(&self, tag: [u8; 32]) -> bool {
        self.seen.lock().expect("registry lock").insert(tag)
    }

    pub fn contains(&self, tag: &[u8; 32]) -> bool {
        self.seen.lock().expect("registry lock").contains(tag)
    }

    pub fn len(&self) -> usize {
        self.seen.lock().expect("registry lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Record {
    pub id: [u8; 16],
    pub credential: [u8; 32],
    pub public: CurvePoint,
}

#[derive(Debug, Default)]
pub(crate) struct Directory {
    pub users: HashMap<Alias, Record>,
    pub drones: HashMap<Alias, Record>,
}

/// The ground control station: server key pair plus the registration directory.
#[derive(Clone, Debug)]
pub struct Authority {
    pub params: Arc<SystemParams>,
    pub(crate) server: KeyPair,
    pub(crate) directory: Arc<Mutex<Directory>>,
    pub nonces: Arc<NonceRegistry>,
}

impl Authority {
    pub fn setup<R: RngCore + CryptoRng>(
        curve: &'static DomainParams,
        backend: Backend,
        delta_t: u32,
        qap_seed: u64,
        rng: &mut R,
    ) -> Self {
        let server = gen_keypair(curve, rng);
        let mut id_s = [0u8; 16];
        rng.fill_bytes(&mut id_s);
        let p_s_x = server.public().to_xonly().expect("server key is not the identity");
        let params = SystemParams {
            curve,
            p_s: *server.public(),
            p_s_x,
            id_s,
            sid: tokens::sid(&id_s, &p_s_x),
            delta_t,
            backend,
            keyring: QapKeyring::new(qap_seed),
            circuits: Mutex::new(HashMap::new()),
        };
        Authority {
            params: Arc::new(params),
            server,
            directory: Arc::new(Mutex::new(Directory::default())),
            nonces: Arc::new(NonceRegistry::default()),
        }
    }

    /// Default setup on secp256k1 with the default window.
    pub fn standard(seed: u64, backend: Backend) -> Self {
        Self::setup(
            crate::arith::secp256k1(),
            backend,
            DEFAULT_DELTA_T,
            seed,
            &mut sub_rng(seed, "authority"),
        )
    }

    /// A fresh server-side context for one session.
    pub fn server_session(&self) -> SessionContext {
        SessionContext::server(self)
    }

    /// Server private key, exposed for collusion scenarios.
    pub fn server_secret(&self) -> &Scalar {
        self.server.secret()
    }

    pub fn registered_users(&self) -> usize {
        self.directory.lock().expect("directory lock").users.len()
    }
}

/// Registration request. `secret` pins the long-term key; otherwise one is
/// drawn from the rng.
#[derive(Clone, Debug)]
pub struct Enrollment {
    pub role: Role,
    pub id: [u8; 16],
    pub pwd: Vec<u8>,
    pub secret: Option<Scalar>,
}

impl Enrollment {
    pub fn user(id: [u8; 16], pwd: &[u8]) -> Self {
        Enrollment {
            role: Role::User,
            id,
            pwd: pwd.to_vec(),
            secret: None,
        }
    }

    pub fn drone(id: [u8; 16]) -> Self {
        Enrollment {
            role: Role::Drone,
            id,
            pwd: Vec::new(),
            secret: None,
        }
    }

    pub fn with_secret(mut self, s: Scalar) -> Self {
        self.secret = Some(s);
        self
    }
}

/// Installs a long-term key pair, stores the credential digest with the
/// authority and returns a context in `Registered`.
pub fn register<R: RngCore + CryptoRng>(
    authority: &Authority,
    enrollment: Enrollment,
    rng: &mut R,
) -> Result<SessionContext, ProtocolError> {
    let curve = authority.params.curve;
    let keypair = match enrollment.secret {
        Some(s) => {
            let kp = KeyPair::from_secret(s)?;
            if kp.public().has_even_y() {
                kp
            } else {
                KeyPair::from_secret(-s)?
            }
        }
        None => gen_keypair(curve, rng),
    };
    let p_x = keypair.public().to_xonly().expect("public key is not the identity");
    let (alias, credential) = match enrollment.role {
        Role::User => (
            tokens::rid(&enrollment.pwd, &enrollment.id, &p_x),
            tokens::user_credential(&enrollment.id, &enrollment.pwd),
        ),
        Role::Drone => (tokens::did(&enrollment.id, &p_x), tokens::drone_credential(&enrollment.id)),
        Role::Server => {
            return Err(ProtocolError::ProtocolViolation {
                op: "register",
                role: Role::Server,
                phase: super::Phase::Idle,
            })
        }
    };
    // Sanity: the SMK is derivable before anything is stored.
    ecdh(keypair.secret(), &authority.params.p_s)?;
    {
        let mut dir = authority.directory.lock().expect("directory lock");
        let table = match enrollment.role {
            Role::User => &mut dir.users,
            _ => &mut dir.drones,
        };
        let duplicate = table.contains_key(&alias) || table.values().any(|r| r.id == enrollment.id);
        if duplicate {
            return Err(ProtocolError::DuplicateRegistration);
        }
        table.insert(
            alias,
            Record {
                id: enrollment.id,
                credential,
                public: *keypair.public(),
            },
        );
    }
    Ok(SessionContext::registered(authority, enrollment.role, enrollment.id, alias, keypair, credential))
}

/// What every party agrees to prove: the geofence, the route length, the
/// accumulator of the planned route and the number of proof rounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mission {
    pub geofence: Geofence,
    pub route_len: usize,
    #[serde(with = "fq_serde")]
    pub acc_out: Fq,
    pub rounds: usize,
}

impl Mission {
    /// Mission for a planned route. `per_waypoint` repeats the proof round
    /// once per waypoint.
    pub fn for_route(geofence: Geofence, route: &FlightPath, per_waypoint: bool) -> Self {
        Mission {
            geofence,
            route_len: route.len(),
            acc_out: route_accumulator(route),
            rounds: if per_waypoint { route.len() } else { 1 },
        }
    }
}

mod fq_serde {
    use crate::arith::Fq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Fq, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(v.value())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Fq, D::Error> {
        let v = u64::deserialize(d)?;
        Fq::from_canonical(v).ok_or_else(|| serde::de::Error::custom("non-canonical field element"))
    }
}
