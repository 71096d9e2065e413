//! Deterministic keyed noise.
//!
//! Every random value released by the mechanisms is a pure function of a
//! 256-bit [`NoiseSeed`], a [`NoiseRole`] and an element id. The seed itself is
//! an HMAC-SHA256 of the canonical query text and the dataset date under a
//! system secret, so repeating a query on the same snapshot reproduces the same
//! answer while the seed cannot be recomputed without the secret.
//!
//! Uniform draws come from a counter-mode PRF: a SipHash-1-3 keyed by the seed
//! derives a 128-bit stream key per `(role, element)` and each counter value is
//! passed through two rounds of a 64-bit finalizer. Random access per element
//! means no mutable state is shared between elements, so results do not depend
//! on the order elements are visited in.

use std::fmt;
use std::hash::Hasher;

use chrono::NaiveDate;
use hmac::{Hmac, Mac};
use sha2::Sha256;
use siphasher::sip128::{Hasher128, SipHasher13};

/// Reserved element id for the noisy threshold of the unknown-domain
/// mechanisms.
pub const BOT_THRESHOLD_ID: &str = "⊥-threshold";

/// Minimum length of the system secret, in bytes.
pub const MIN_SECRET_LEN: usize = 32;

const UNIFORM_MIN: f64 = 1.0 / (1u64 << 53) as f64;
const UNIFORM_MAX: f64 = 1.0 - UNIFORM_MIN;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NoiseError {
    #[error("noise secret must not be empty")]
    EmptySecret,
    #[error("noise secret must be at least {MIN_SECRET_LEN} bytes, got {0}")]
    ShortSecret(usize),
    #[error("noise secret is not valid hex: {0}")]
    BadHex(String),
    #[error("noise scale must be positive and finite, got {0}")]
    BadScale(f64),
}

/// System secret mixed into every seed.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey(Vec<u8>);

impl SecretKey {
    /// Wraps raw key bytes. Only emptiness is rejected here; use
    /// [`SecretKey::from_hex`] for configured keys, which also enforces the
    /// minimum length.
    pub fn new(bytes: impl Into<Vec<u8>>) -> Result<Self, NoiseError> {
        let bytes = bytes.into();
        if bytes.is_empty() {
            return Err(NoiseError::EmptySecret);
        }
        Ok(Self(bytes))
    }

    pub fn from_hex(text: &str) -> Result<Self, NoiseError> {
        let bytes = hex::decode(text.trim()).map_err(|e| NoiseError::BadHex(e.to_string()))?;
        if bytes.is_empty() {
            return Err(NoiseError::EmptySecret);
        }
        if bytes.len() < MIN_SECRET_LEN {
            return Err(NoiseError::ShortSecret(bytes.len()));
        }
        Ok(Self(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SecretKey(<{} bytes>)", self.0.len())
    }
}

/// Everything that determines the noise of one query evaluation.
#[derive(Debug, Clone)]
pub struct NoiseKey<'a> {
    pub secret: &'a [u8],
    pub query_canon: &'a str,
    pub data_date: NaiveDate,
}

/// 256-bit seed for one query evaluation.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoiseSeed([u8; 32]);

impl fmt::Debug for NoiseSeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NoiseSeed({})", hex::encode(self.0))
    }
}

/// HMAC-SHA256 under the secret of the length-prefixed query text followed by
/// the length-prefixed ISO-8601 date.
pub fn derive_seed(key: &NoiseKey<'_>) -> Result<NoiseSeed, NoiseError> {
    if key.secret.is_empty() {
        return Err(NoiseError::EmptySecret);
    }
    let mut mac = Hmac::<Sha256>::new_from_slice(key.secret).expect("HMAC accepts any key length");
    let date = key.data_date.format("%Y-%m-%d").to_string();
    for field in [key.query_canon.as_bytes(), date.as_bytes()] {
        mac.update(&(field.len() as u64).to_le_bytes());
        mac.update(field);
    }
    Ok(NoiseSeed(mac.finalize().into_bytes().into()))
}

/// What a noise value is used for. Each role gets its own substream for a
/// given element so selection noise and released-count noise are independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseRole {
    /// Gumbel or Laplace noise that decides which elements are selected.
    Selection,
    /// Laplace noise attached to a released count.
    Count,
    /// Noise on the data-dependent threshold.
    Threshold,
    /// Noise used while searching for the optimal threshold rank.
    ThresholdScan,
}

impl NoiseRole {
    fn tag(self) -> u8 {
        match self {
            NoiseRole::Selection => 1,
            NoiseRole::Count => 2,
            NoiseRole::Threshold => 3,
            NoiseRole::ThresholdScan => 4,
        }
    }
}

impl NoiseSeed {
    pub const fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    fn word(&self, i: usize) -> u64 {
        u64::from_le_bytes(self.0[8 * i..8 * i + 8].try_into().unwrap())
    }

    /// Substream for `element_id` under `role`.
    pub fn substream(&self, role: NoiseRole, element_id: &str) -> NoiseStream {
        let mut h = SipHasher13::new_with_keys(self.word(0), self.word(1));
        h.write_u8(role.tag());
        h.write_u64(element_id.len() as u64);
        h.write(element_id.as_bytes());
        let k = h.finish128();
        NoiseStream {
            key: [k.h1 ^ self.word(2), k.h2 ^ self.word(3)],
            counter: 0,
        }
    }
}

/// A counter-mode stream of uniforms. Cloning a stream replays it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseStream {
    key: [u64; 2],
    counter: u64,
}

#[inline(always)]
fn fmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl NoiseStream {
    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// The uniform at position `counter`, in `[2^-53, 1 - 2^-53]`.
    #[inline]
    pub fn uniform_at(&self, counter: u64) -> f64 {
        let x = fmix64(fmix64(self.key[0].wrapping_add(counter.wrapping_mul(0x9e37_79b9_7f4a_7c15))) ^ self.key[1]);
        let u = ((x >> 11) as f64 + 0.5) * UNIFORM_MIN;
        u.clamp(UNIFORM_MIN, UNIFORM_MAX)
    }

    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        let u = self.uniform_at(self.counter);
        self.counter += 1;
        u
    }
}

fn check_scale(scale: f64) -> Result<f64, NoiseError> {
    if scale > 0.0 && scale.is_finite() {
        Ok(scale)
    } else {
        Err(NoiseError::BadScale(scale))
    }
}

/// Laplace inverse CDF.
#[inline]
pub fn laplace_from_uniform(u: f64, scale: f64) -> f64 {
    let centered = u - 0.5;
    -scale * centered.signum() * (1.0 - 2.0 * centered.abs()).ln()
}

/// Gumbel (max) inverse CDF.
#[inline]
pub fn gumbel_from_uniform(u: f64, scale: f64) -> f64 {
    -scale * (-u.ln()).ln()
}

/// Laplace distribution with a validated scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Laplace {
    scale: f64,
}

impl Laplace {
    pub fn new(scale: f64) -> Result<Self, NoiseError> {
        check_scale(scale).map(|scale| Self { scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    #[inline]
    pub fn sample(&self, stream: &mut NoiseStream) -> f64 {
        laplace_from_uniform(stream.next_uniform(), self.scale)
    }
}

/// Gumbel distribution with a validated scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gumbel {
    scale: f64,
}

impl Gumbel {
    pub fn new(scale: f64) -> Result<Self, NoiseError> {
        check_scale(scale).map(|scale| Self { scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    #[inline]
    pub fn sample(&self, stream: &mut NoiseStream) -> f64 {
        gumbel_from_uniform(stream.next_uniform(), self.scale)
    }

    #[inline]
    pub fn sample_at(&self, stream: &NoiseStream, counter: u64) -> f64 {
        gumbel_from_uniform(stream.uniform_at(counter), self.scale)
    }
}

/// One Laplace draw of the given scale from `stream`.
pub fn laplace(stream: &mut NoiseStream, scale: f64) -> Result<f64, NoiseError> {
    Ok(Laplace::new(scale)?.sample(stream))
}

/// One Gumbel draw of the given scale from `stream`.
pub fn gumbel(stream: &mut NoiseStream, scale: f64) -> Result<f64, NoiseError> {
    Ok(Gumbel::new(scale)?.sample(stream))
}
