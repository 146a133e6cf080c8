//! 2-universal hash families that fold class ids into bucket ids.
//!
//! Every ensemble member owns one function drawn from such a family. The
//! 2-universal guarantee (any two distinct class ids collide with probability
//! at most `1/B` over the draw of the function) is what keeps classes
//! distinguishable after hashing, so both constructions here are implemented
//! exactly and validated aggressively.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default modulus for [`HashKind::CarterWegman`]: the Mersenne prime
/// `2^61 - 1`, large enough for any realistic class universe while keeping
/// `a * x + b` inside `u128`.
pub const DEFAULT_PRIME: u64 = (1 << 61) - 1;

/// Which 2-universal construction a [`HashSpec`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HashKind {
    /// `((a * x + b) mod p) mod B` with `p` prime, `1 <= a < p`, `0 <= b < p`.
    CarterWegman,
    /// `(a * x mod 2^64) >> (64 - log2 B)`-style multiplicative hashing,
    /// simplified to `(a * x mod 2^64) & (B - 1)` with `a` odd and `B` a
    /// power of two.
    OddMultiplier,
}

/// One hash function mapping class ids `[0, universe)` to buckets `[0, buckets)`.
///
/// The constants are drawn once (see [`make_hash_family`]) and then treated
/// as immutable model state: they are persisted with the model and must hash
/// identically forever after.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashSpec {
    kind: HashKind,
    a: u64,
    b: u64,
    /// Prime modulus; zero for [`HashKind::OddMultiplier`], which reduces
    /// modulo `2^64` implicitly.
    p: u64,
    buckets: u64,
    universe: u64,
}

impl HashSpec {
    /// Builds a Carter-Wegman function `x -> ((a*x + b) mod p) mod buckets`.
    ///
    /// Requires `p` prime and larger than `universe` (so distinct class ids
    /// stay distinct modulo `p`), `1 <= a < p`, `b < p`, `buckets >= 2`, and
    /// `universe >= 1`.
    pub fn carter_wegman(a: u64, b: u64, p: u64, buckets: u64, universe: u64) -> Result<Self> {
        let spec = HashSpec {
            kind: HashKind::CarterWegman,
            a,
            b,
            p,
            buckets,
            universe,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds an odd-multiplier function `x -> (a*x mod 2^64) & (buckets - 1)`.
    ///
    /// Requires `a` odd and `buckets` a power of two with `buckets >= 2`.
    pub fn odd_multiplier(a: u64, buckets: u64, universe: u64) -> Result<Self> {
        let spec = HashSpec {
            kind: HashKind::OddMultiplier,
            a,
            b: 0,
            p: 0,
            buckets,
            universe,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds the function that maps every class id to itself.
    ///
    /// This is the Carter-Wegman member with `a = 1, b = 0`: for
    /// `x < universe <= buckets < p` the composition of the two moduli is the
    /// identity. It turns one ensemble member into an exact one-vs-all
    /// classifier, which is useful as a baseline and as a degenerate case in
    /// tests.
    pub fn identity(universe: u64, buckets: u64) -> Result<Self> {
        if buckets < universe {
            return Err(Error::InvalidParameter(format!(
                "identity hashing needs at least as many buckets as classes, got {buckets} < {universe}"
            )));
        }
        if buckets >= DEFAULT_PRIME {
            return Err(Error::InvalidParameter(format!(
                "identity hashing supports at most {} buckets",
                DEFAULT_PRIME - 1
            )));
        }
        HashSpec::carter_wegman(1, 0, DEFAULT_PRIME, buckets, universe)
    }

    /// Checks every structural invariant of the constants.
    ///
    /// Called by the constructors and again when a spec is read back from a
    /// model file, so a corrupted or hand-edited file cannot smuggle in a
    /// function outside the family.
    pub fn validate(&self) -> Result<()> {
        if self.universe == 0 {
            return Err(Error::InvalidParameter(
                "class universe must be at least 1".into(),
            ));
        }
        if self.buckets < 2 {
            return Err(Error::InvalidParameter(format!(
                "bucket count must be at least 2, got {}",
                self.buckets
            )));
        }
        match self.kind {
            HashKind::CarterWegman => {
                if !is_prime(self.p) {
                    return Err(Error::InvalidParameter(format!(
                        "modulus {} is not prime",
                        self.p
                    )));
                }
                if self.p <= self.universe {
                    return Err(Error::InvalidParameter(format!(
                        "modulus {} must exceed the class universe {}",
                        self.p, self.universe
                    )));
                }
                if self.a == 0 || self.a >= self.p {
                    return Err(Error::InvalidParameter(format!(
                        "multiplier {} is outside [1, {})",
                        self.a, self.p
                    )));
                }
                if self.b >= self.p {
                    return Err(Error::InvalidParameter(format!(
                        "offset {} is outside [0, {})",
                        self.b, self.p
                    )));
                }
            }
            HashKind::OddMultiplier => {
                if self.a % 2 == 0 {
                    return Err(Error::InvalidParameter(format!(
                        "multiplier {} must be odd",
                        self.a
                    )));
                }
                if !self.buckets.is_power_of_two() {
                    return Err(Error::InvalidParameter(format!(
                        "bucket count {} must be a power of two for the odd-multiplier construction",
                        self.buckets
                    )));
                }
                if self.b != 0 || self.p != 0 {
                    return Err(Error::InvalidParameter(
                        "odd-multiplier functions carry no offset or modulus".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Maps a class id to its bucket, rejecting ids outside the universe.
    pub fn bucket_of(&self, class: u64) -> Result<u64> {
        if class >= self.universe {
            return Err(Error::ClassOutOfRange {
                class,
                universe: self.universe,
            });
        }
        Ok(self.bucket_unchecked(class))
    }

    /// Maps a class id already known to be inside the universe.
    pub(crate) fn bucket_unchecked(&self, class: u64) -> u64 {
        debug_assert!(class < self.universe);
        match self.kind {
            HashKind::CarterWegman => {
                let t = (self.a as u128 * class as u128 + self.b as u128) % self.p as u128;
                (t % self.buckets as u128) as u64
            }
            HashKind::OddMultiplier => self.a.wrapping_mul(class) & (self.buckets - 1),
        }
    }

    /// Construction this function belongs to.
    pub fn kind(&self) -> HashKind {
        self.kind
    }

    /// Multiplier constant.
    pub fn a(&self) -> u64 {
        self.a
    }

    /// Additive constant (zero for odd-multiplier functions).
    pub fn b(&self) -> u64 {
        self.b
    }

    /// Prime modulus (zero for odd-multiplier functions).
    pub fn prime(&self) -> u64 {
        self.p
    }

    /// Number of output buckets.
    pub fn buckets(&self) -> u64 {
        self.buckets
    }

    /// Size of the input class universe.
    pub fn universe(&self) -> u64 {
        self.universe
    }
}

/// Draws `reps` independent hash functions, one per ensemble member.
///
/// Constants are drawn from a counter-based ChaCha stream keyed by `seed`,
/// with member `j` reading stream `j`. Two consequences worth relying on:
/// the family is a pure function of `(seed, kind, buckets, universe, reps)`,
/// and growing `reps` extends the family without perturbing earlier members.
pub fn make_hash_family(
    universe: u64,
    buckets: u64,
    reps: usize,
    seed: u64,
    kind: HashKind,
) -> Result<Vec<HashSpec>> {
    if reps == 0 {
        return Err(Error::InvalidParameter(
            "a hash family needs at least one member".into(),
        ));
    }
    if universe == 0 {
        return Err(Error::InvalidParameter(
            "class universe must be at least 1".into(),
        ));
    }
    if kind == HashKind::CarterWegman && universe >= DEFAULT_PRIME {
        return Err(Error::InvalidParameter(format!(
            "class universe {universe} does not fit under the default modulus {DEFAULT_PRIME}"
        )));
    }
    let mut family = Vec::with_capacity(reps);
    for j in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64);
        let spec = match kind {
            HashKind::CarterWegman => {
                let a = rng.random_range(1..DEFAULT_PRIME);
                let b = rng.random_range(0..DEFAULT_PRIME);
                HashSpec::carter_wegman(a, b, DEFAULT_PRIME, buckets, universe)?
            }
            HashKind::OddMultiplier => {
                let a = rng.random::<u64>() | 1;
                HashSpec::odd_multiplier(a, buckets, universe)?
            }
        };
        family.push(spec);
    }
    Ok(family)
}

/// Deterministic Miller-Rabin primality test, exact for all `u64` inputs.
pub fn is_prime(n: u64) -> bool {
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &q in &SMALL {
        if n == q {
            return true;
        }
        if n % q == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    // These witnesses decide primality exactly for every integer below
    // 3.3 * 10^24, which covers u64.
    'witness: for &a in &SMALL {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}
