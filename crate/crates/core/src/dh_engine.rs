//! Modular-exponentiation Diffie-Hellman for the IKEv2 MODP groups.
//!
//! Covers the eight MODP groups negotiated by VoWiFi deployments (IANA ids
//! 1, 2, 5, 14, 15, 16, 17, 18) plus SHA-256 fingerprinting of public values
//! in network byte order.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use num_bigint::{BigUint, RandBigInt};
use num_traits::One;
use rand::RngCore;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// MODP group ids in ascending strength order.
pub const MODP_GROUP_IDS: [u16; 8] = [1, 2, 5, 14, 15, 16, 17, 18];

/// ECP group ids the codec can name but this engine refuses.
pub const ECP_GROUP_IDS: [u16; 6] = [19, 20, 21, 25, 26, 31];

#[derive(Debug, Error)]
pub enum DhError {
    #[error("unknown or non-MODP group {0}")]
    UnknownGroup(u16),
    #[error("invalid peer public key: {0}")]
    InvalidPeerKey(String),
    #[error("invalid private exponent: {0}")]
    InvalidExponent(String),
}

/// A Diffie-Hellman parameter set: prime modulus, generator, bit length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DhGroup {
    pub id: u16,
    pub bits: u64,
    pub p: BigUint,
    pub g: BigUint,
}

impl DhGroup {
    /// Build a non-standard group, used for toy exchanges in tests and
    /// simulations. `id` 0 marks it as unregistered.
    pub fn custom(p: BigUint, g: BigUint) -> DhGroup {
        let bits = p.bits();
        DhGroup { id: 0, bits, p, g }
    }

    /// Modulus length in octets; MODP public values and KE payloads carry
    /// exactly this many bytes.
    pub fn modulus_octets(&self) -> usize {
        self.bits.div_ceil(8) as usize
    }

    /// Serialize a field element big-endian, left-padded with zero octets to
    /// the modulus length.
    pub fn to_padded_bytes(&self, value: &BigUint) -> Vec<u8> {
        let raw = value.to_bytes_be();
        let want = self.modulus_octets();
        if raw.len() >= want {
            return raw;
        }
        let mut out = vec![0u8; want - raw.len()];
        out.extend_from_slice(&raw);
        out
    }
}

/// One side's key material for a group.
#[derive(Debug, Clone)]
pub struct DhKeyPair {
    pub group: DhGroup,
    /// Private exponent `a`.
    pub private: BigUint,
    /// Public value `A = g^a mod p`.
    pub public: BigUint,
}

/// Result of one key agreement: `K = B^a mod p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharedSecret {
    pub group_id: u16,
    pub k: BigUint,
}

/// How wide to draw private exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExponentWidth {
    /// Per-group width at the upper end of the published strength guidance
    /// for each modulus size. Full-width exponents cost ~12x more per
    /// exchange and add nothing against the attacker models considered here.
    #[default]
    Standard,
    /// Full modulus width.
    Full,
    /// Explicit bit count.
    Bits(u32),
}

/// Classification of a peer public value received off the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeerKeyClass {
    Valid,
    /// 0, 1, or >= p: rejected outright.
    Degenerate,
    /// p-1 generates the order-2 subgroup; accepted but worth flagging in
    /// scan output.
    SmallSubgroup,
}

// RFC 2409 6.1/6.2 and RFC 3526 2-7. All share the leading pi-derived words;
// each is a safe prime with generator 2.
const MODP_768: &str = "\
FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74\
020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437\
4FE1356D6D51C245E485B576625E7EC6F44C42E9A63A3620FFFFFFFFFFFFFFFF";

const MODP_1024: &str = "\
FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74\
020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437\
4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED\
EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE65381FFFFFFFFFFFFFFFF";

const MODP_1536: &str = "\
FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74\
020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437\
4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED\
EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05\
98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB\
9ED529077096966D670C354E4ABC9804F1746C08CA237327FFFFFFFFFFFFFFFF";

const MODP_2048: &str = "\
FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74\
020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437\
4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED\
EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05\
98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB\
9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B\
E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718\
3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF";

const MODP_3072: &str = "\
FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74\
020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437\
4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED\
EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05\
98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB\
9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B\
E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718\
3995497CEA956AE515D2261898FA051015728E5A8AAAC42DAD33170D04507A33\
A85521ABDF1CBA64ECFB850458DBEF0A8AEA71575D060C7DB3970F85A6E1E4C7\
ABF5AE8CDB0933D71E8C94E04A25619DCEE3D2261AD2EE6BF12FFA06D98A0864\
D87602733EC86A64521F2B18177B200CBBE117577A615D6C770988C0BAD946E2\
08E24FA074E5AB3143DB5BFCE0FD108E4B82D120A93AD2CAFFFFFFFFFFFFFFFF";

const MODP_4096: &str = "\
FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74\
020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437\
4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED\
EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05\
98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB\
9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B\
E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718\
3995497CEA956AE515D2261898FA051015728E5A8AAAC42DAD33170D04507A33\
A85521ABDF1CBA64ECFB850458DBEF0A8AEA71575D060C7DB3970F85A6E1E4C7\
ABF5AE8CDB0933D71E8C94E04A25619DCEE3D2261AD2EE6BF12FFA06D98A0864\
D87602733EC86A64521F2B18177B200CBBE117577A615D6C770988C0BAD946E2\
08E24FA074E5AB3143DB5BFCE0FD108E4B82D120A92108011A723C12A787E6D7\
88719A10BDBA5B2699C327186AF4E23C1A946834B6150BDA2583E9CA2AD44CE8\
DBBBC2DB04DE8EF92E8EFC141FBECAA6287C59474E6BC05D99B2964FA090C3A2\
233BA186515BE7ED1F612970CEE2D7AFB81BDD762170481CD0069127D5B05AA9\
93B4EA988D8FDDC186FFB7DC90A6C08F4DF435C934063199FFFFFFFFFFFFFFFF";

const MODP_6144: &str = "\
FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74\
020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437\
4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED\
EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05\
98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB\
9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B\
E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718\
3995497CEA956AE515D2261898FA051015728E5A8AAAC42DAD33170D04507A33\
A85521ABDF1CBA64ECFB850458DBEF0A8AEA71575D060C7DB3970F85A6E1E4C7\
ABF5AE8CDB0933D71E8C94E04A25619DCEE3D2261AD2EE6BF12FFA06D98A0864\
D87602733EC86A64521F2B18177B200CBBE117577A615D6C770988C0BAD946E2\
08E24FA074E5AB3143DB5BFCE0FD108E4B82D120A92108011A723C12A787E6D7\
88719A10BDBA5B2699C327186AF4E23C1A946834B6150BDA2583E9CA2AD44CE8\
DBBBC2DB04DE8EF92E8EFC141FBECAA6287C59474E6BC05D99B2964FA090C3A2\
233BA186515BE7ED1F612970CEE2D7AFB81BDD762170481CD0069127D5B05AA9\
93B4EA988D8FDDC186FFB7DC90A6C08F4DF435C93402849236C3FAB4D27C7026\
C1D4DCB2602646DEC9751E763DBA37BDF8FF9406AD9E530EE5DB382F413001AE\
B06A53ED9027D831179727B0865A8918DA3EDBEBCF9B14ED44CE6CBACED4BB1B\
DB7F1447E6CC254B332051512BD7AF426FB8F401378CD2BF5983CA01C64B92EC\
F032EA15D1721D03F482D7CE6E74FEF6D55E702F46980C82B5A84031900B1C9E\
59E7C97FBEC7E8F323A97A7E36CC88BE0F1D45B7FF585AC54BD407B22B4154AA\
CC8F6D7EBF48E1D814CC5ED20F8037E0A79715EEF29BE32806A1D58BB7C5DA76\
F550AA3D8A1FBFF0EB19CCB1A313D55CDA56C9EC2EF29632387FE8D76E3C0468\
043E8F663F4860EE12BF2D5B0B7474D6E694F91E6DCC4024FFFFFFFFFFFFFFFF";

const MODP_8192: &str = "\
FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74\
020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437\
4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED\
EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05\
98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB\
9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B\
E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718\
3995497CEA956AE515D2261898FA051015728E5A8AAAC42DAD33170D04507A33\
A85521ABDF1CBA64ECFB850458DBEF0A8AEA71575D060C7DB3970F85A6E1E4C7\
ABF5AE8CDB0933D71E8C94E04A25619DCEE3D2261AD2EE6BF12FFA06D98A0864\
D87602733EC86A64521F2B18177B200CBBE117577A615D6C770988C0BAD946E2\
08E24FA074E5AB3143DB5BFCE0FD108E4B82D120A92108011A723C12A787E6D7\
88719A10BDBA5B2699C327186AF4E23C1A946834B6150BDA2583E9CA2AD44CE8\
DBBBC2DB04DE8EF92E8EFC141FBECAA6287C59474E6BC05D99B2964FA090C3A2\
233BA186515BE7ED1F612970CEE2D7AFB81BDD762170481CD0069127D5B05AA9\
93B4EA988D8FDDC186FFB7DC90A6C08F4DF435C93402849236C3FAB4D27C7026\
C1D4DCB2602646DEC9751E763DBA37BDF8FF9406AD9E530EE5DB382F413001AE\
B06A53ED9027D831179727B0865A8918DA3EDBEBCF9B14ED44CE6CBACED4BB1B\
DB7F1447E6CC254B332051512BD7AF426FB8F401378CD2BF5983CA01C64B92EC\
F032EA15D1721D03F482D7CE6E74FEF6D55E702F46980C82B5A84031900B1C9E\
59E7C97FBEC7E8F323A97A7E36CC88BE0F1D45B7FF585AC54BD407B22B4154AA\
CC8F6D7EBF48E1D814CC5ED20F8037E0A79715EEF29BE32806A1D58BB7C5DA76\
F550AA3D8A1FBFF0EB19CCB1A313D55CDA56C9EC2EF29632387FE8D76E3C0468\
043E8F663F4860EE12BF2D5B0B7474D6E694F91E6DBE115974A3926F12FEE5E4\
38777CB6A932DF8CD8BEC4D073B931BA3BC832B68D9DD300741FA7BF8AFC47ED\
2576F6936BA424663AAB639C5AE4F5683423B4742BF1C978238F16CBE39D652D\
E3FDB8BEFC848AD922222E04A4037C0713EB57A81A23F0C73473FC646CEA306B\
4BCBC8862F8385DDFA9D4B7FA2C087E879683303ED5BDD3A062B3CF5B3A278A6\
6D2A13F83F44F82DDF310EE074AB6A364597E899A0255DC164F31CC50846851D\
F9AB48195DED7EA1B1D510BD7EE74D73FAF36BC31ECFA268359046F4EB879F92\
4009438B481C6CD7889A002ED5EE382BC9190DA6FC026E479558E4475677E9AA\
9E3050E2765694DFC81F56E880B96E7160C980DD98EDD3DFFFFFFFFFFFFFFFFF";

fn group_from_hex(id: u16, bits: u64, hex: &str) -> DhGroup {
    let p = BigUint::parse_bytes(hex.as_bytes(), 16).expect("builtin prime hex");
    debug_assert_eq!(p.bits(), bits);
    DhGroup {
        id,
        bits,
        p,
        g: BigUint::from(2u8),
    }
}

static GROUPS: LazyLock<BTreeMap<u16, DhGroup>> = LazyLock::new(|| {
    [
        group_from_hex(1, 768, MODP_768),
        group_from_hex(2, 1024, MODP_1024),
        group_from_hex(5, 1536, MODP_1536),
        group_from_hex(14, 2048, MODP_2048),
        group_from_hex(15, 3072, MODP_3072),
        group_from_hex(16, 4096, MODP_4096),
        group_from_hex(17, 6144, MODP_6144),
        group_from_hex(18, 8192, MODP_8192),
    ]
    .into_iter()
    .map(|g| (g.id, g))
    .collect()
});

/// Look up the standardized parameters for a MODP group id.
///
/// ECP ids (19, 20, 21, 25, 26, 31) are deliberately `UnknownGroup`: this
/// engine does no curve arithmetic.
pub fn group_params(id: u16) -> Result<&'static DhGroup, DhError> {
    GROUPS.get(&id).ok_or(DhError::UnknownGroup(id))
}

/// True if the id names one of the eight supported MODP groups.
pub fn is_modp_group(id: u16) -> bool {
    GROUPS.contains_key(&id)
}

fn exponent_bits_for(group: &DhGroup, width: ExponentWidth) -> u64 {
    match width {
        ExponentWidth::Full => group.bits,
        ExponentWidth::Bits(b) => u64::from(b).min(group.bits),
        ExponentWidth::Standard => match group.id {
            1 => 192,
            2 => 224,
            5 => 256,
            14 => 320,
            15 => 384,
            16 => 480,
            17 => 544,
            18 => 640,
            // custom groups: full width below a threshold where the
            // bounded draw would not even apply
            _ => group.bits.min(320),
        },
    }
}

/// Generate a fresh keypair. The caller controls randomness, so deterministic
/// RNGs reproduce fixed-key servers and make tests hermetic.
pub fn gen_keypair<R: RngCore + ?Sized>(group: &DhGroup, rng: &mut R) -> DhKeyPair {
    gen_keypair_with(group, rng, ExponentWidth::default())
}

/// `gen_keypair` with explicit exponent sizing.
pub fn gen_keypair_with<R: RngCore + ?Sized>(
    group: &DhGroup,
    rng: &mut R,
    width: ExponentWidth,
) -> DhKeyPair {
    let one = BigUint::one();
    let upper = &group.p - 2u8; // a in [2, p-2]
    let bits = exponent_bits_for(group, width);
    let private = loop {
        let candidate = if bits >= group.bits {
            rng.gen_biguint_range(&BigUint::from(2u8), &upper)
        } else {
            rng.gen_biguint(bits)
        };
        if candidate > one && candidate < upper {
            break candidate;
        }
    };
    let public = group.g.modpow(&private, &group.p);
    DhKeyPair {
        group: group.clone(),
        private,
        public,
    }
}

/// Rebuild a keypair from a known private exponent (static-key pools).
pub fn keypair_from_exponent(group: &DhGroup, private: BigUint) -> Result<DhKeyPair, DhError> {
    let one = BigUint::one();
    if private <= one || private >= &group.p - 1u8 {
        return Err(DhError::InvalidExponent(format!(
            "exponent outside (1, p-1) for group {}",
            group.id
        )));
    }
    let public = group.g.modpow(&private, &group.p);
    Ok(DhKeyPair {
        group: group.clone(),
        private,
        public,
    })
}

/// Classify a peer public value. `Degenerate` values must be rejected;
/// `SmallSubgroup` (p-1) is accepted for scan continuity but flagged.
pub fn classify_peer_key(group: &DhGroup, peer_public: &BigUint) -> PeerKeyClass {
    let one = BigUint::one();
    if *peer_public <= one || *peer_public >= group.p {
        PeerKeyClass::Degenerate
    } else if *peer_public == &group.p - 1u8 {
        PeerKeyClass::SmallSubgroup
    } else {
        PeerKeyClass::Valid
    }
}

/// `K = B^a mod p`. Rejects degenerate peer values (0, 1, >= p); p-1 is
/// accepted, callers flag it via [`classify_peer_key`].
pub fn shared_secret(
    group: &DhGroup,
    private: &BigUint,
    peer_public: &BigUint,
) -> Result<SharedSecret, DhError> {
    if classify_peer_key(group, peer_public) == PeerKeyClass::Degenerate {
        return Err(DhError::InvalidPeerKey(format!(
            "peer value outside (1, p) for group {}",
            group.id
        )));
    }
    Ok(SharedSecret {
        group_id: group.id,
        k: peer_public.modpow(private, &group.p),
    })
}

/// SHA-256 over the public value serialized big-endian and left-padded with
/// zero octets to the group's modulus length; lowercase hex.
pub fn pubkey_fingerprint(public: &BigUint, group: &DhGroup) -> Result<String, DhError> {
    if classify_peer_key(group, public) == PeerKeyClass::Degenerate {
        return Err(DhError::InvalidPeerKey(
            "cannot fingerprint a degenerate public value".into(),
        ));
    }
    Ok(sha256_hex(&group.to_padded_bytes(public)))
}

/// Lowercase-hex SHA-256, also used for nonce fingerprints.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}
