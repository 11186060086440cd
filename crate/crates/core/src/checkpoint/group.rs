use curve25519_dalek::constants::{RISTRETTO_BASEPOINT_POINT, RISTRETTO_BASEPOINT_TABLE};
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use curve25519_dalek::traits::Identity;
use rand::{CryptoRng, RngCore};
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::CheckpointError;

/// The prime-order group used for key agreement: ristretto255, order
/// 2^252 + 27742317777372353535851937790883648493.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct GroupParams;

impl GroupParams {
    pub const NAME: &'static str = "ristretto255";

    pub fn generator(&self) -> RistrettoPoint {
        RISTRETTO_BASEPOINT_POINT
    }

    /// Little-endian encoding of the group order.
    pub fn order_le_bytes(&self) -> [u8; 32] {
        ORDER_LE
    }

    /// The generator is not the identity and is annihilated by the order.
    pub fn generator_has_full_order(&self) -> bool {
        let g = self.generator();
        // ℓ reduces to zero as a Scalar, so multiply by (ℓ − 1) + 1.
        let order_minus_one = Scalar::ZERO - Scalar::ONE;
        g != RistrettoPoint::identity() && order_minus_one * g + g == RistrettoPoint::identity()
    }
}

/// ℓ = 2²⁵² + 27742317777372353535851937790883648493.
const ORDER_LE: [u8; 32] = [
    0xed, 0xd3, 0xf5, 0x5c, 0x1a, 0x63, 0x12, 0x58, 0xd6, 0x9c, 0xf7, 0xa2, 0xde, 0xf9, 0xde, 0x14, 0x00, 0x00, 0x00,
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x10,
];

#[derive(Clone)]
pub struct DhKeyPair {
    secret: Scalar,
    pub public: CompressedRistretto,
}

impl std::fmt::Debug for DhKeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DhKeyPair")
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

impl DhKeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        loop {
            let x = Scalar::random(rng);
            if x != Scalar::ZERO {
                return Self::from_secret(x);
            }
        }
    }

    pub fn from_secret(secret: Scalar) -> Self {
        Self {
            secret,
            public: (&secret * RISTRETTO_BASEPOINT_TABLE).compress(),
        }
    }

    pub fn secret(&self) -> &Scalar {
        &self.secret
    }

    /// `Y == g^x`.
    pub fn verify(&self) -> bool {
        (&self.secret * RISTRETTO_BASEPOINT_TABLE).compress() == self.public
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SharedKey {
    pub prf_seed: [u8; 32],
}

impl std::fmt::Debug for SharedKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SharedKey({:02x}{:02x}..)", self.prf_seed[0], self.prf_seed[1])
    }
}

/// `Z = Y^x`, then a domain-tagged SHA-256 extraction of the encoded element.
pub fn derive_shared_key(
    my_secret: &Scalar,
    partner_public: &CompressedRistretto,
) -> Result<SharedKey, CheckpointError> {
    if *my_secret == Scalar::ZERO {
        return Err(CheckpointError::ZeroSecret);
    }
    let y = partner_public.decompress().ok_or(CheckpointError::InvalidEncoding)?;
    if y == RistrettoPoint::identity() {
        return Err(CheckpointError::IdentityElement);
    }
    let z = (my_secret * y).compress();
    let mut h = Sha256::new();
    h.update(b"onionlab/checkpoint/extract");
    h.update(z.as_bytes());
    Ok(SharedKey {
        prf_seed: h.finalize().into(),
    })
}
