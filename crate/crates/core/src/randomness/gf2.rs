//! Arithmetic in GF(2^n) for n ≤ 32, with polynomials packed into `u64`.

/// Multiplication modulo a fixed irreducible polynomial of degree `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gf2n {
    n: u32,
    modulus: u64,
}

fn clmul(a: u64, b: u64) -> u64 {
    let mut r = 0;
    let mut b = b;
    let mut a = a;
    while b != 0 {
        if b & 1 == 1 {
            r ^= a;
        }
        a <<= 1;
        b >>= 1;
    }
    r
}

fn degree(p: u64) -> i32 {
    63 - p.leading_zeros() as i32
}

fn poly_mod(mut a: u64, p: u64) -> u64 {
    let dp = degree(p);
    while a != 0 && degree(a) >= dp {
        a ^= p << (degree(a) - dp);
    }
    a
}

fn poly_gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = poly_mod(a, b);
        a = b;
        b = r;
    }
    a
}

fn mulmod(a: u64, b: u64, p: u64) -> u64 {
    // a, b < 2^32 so the carry-less product fits in 64 bits
    poly_mod(clmul(a, b), p)
}

/// Ben-Or irreducibility test.
pub fn is_irreducible(p: u64) -> bool {
    let n = degree(p);
    if n <= 0 {
        return false;
    }
    let mut xp = 0b10u64; // x
    for _ in 0..n / 2 {
        xp = mulmod(xp, xp, p); // x^(2^i)
        if poly_gcd(p, xp ^ 0b10) != 1 {
            return false;
        }
    }
    true
}

impl Gf2n {
    /// Field with the numerically smallest irreducible modulus of degree `n`.
    pub fn new(n: u32) -> Self {
        assert!((1..=32).contains(&n), "field degree must be in 1..=32");
        let lo = 1u64 << n;
        let modulus = (lo..lo << 1).step_by(2).map(|p| p | 1).find(|&p| is_irreducible(p)).expect("irreducible polynomial exists");
        Gf2n { n, modulus }
    }

    pub fn degree(&self) -> u32 {
        self.n
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        mulmod(a, b, self.modulus)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_moduli() {
        assert_eq!(Gf2n::new(1).modulus(), 0b11);
        assert_eq!(Gf2n::new(2).modulus(), 0b111);
        assert_eq!(Gf2n::new(8).modulus(), 0x11b);
        assert!(!is_irreducible(0b101)); // x^2 + 1 = (x+1)^2
    }

    #[test]
    fn multiplication_by_nonzero_is_bijective() {
        for n in 1..=8 {
            let f = Gf2n::new(n);
            for a in 1..(1u64 << n) {
                let mut seen = vec![false; 1 << n];
                for x in 0..(1u64 << n) {
                    let y = f.mul(a, x);
                    assert!(!seen[y as usize]);
                    seen[y as usize] = true;
                }
            }
        }
    }
}
