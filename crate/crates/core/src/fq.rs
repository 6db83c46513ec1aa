//! Small finite fields F_{p^m} with explicit Frobenius.
//!
//! Elements are indices `0..q` packing base-p digits of the polynomial
//! representation modulo a fixed irreducible. Multiplication goes through
//! discrete-log tables, so everything here assumes desk-scale fields
//! (q up to a few thousand), which is all the strata computations need.

use std::fmt;
use std::sync::Arc;

struct Inner {
    p: u32,
    m: u32,
    q: u32,
    /// exp[i] = g^i for a fixed generator g, length 2(q-1).
    exp: Vec<u16>,
    /// log[a] for a in 1..q; log[0] unused.
    log: Vec<u32>,
    /// frob[a] = a^p.
    frob: Vec<u16>,
    /// frob_inv[a^p] = a.
    frob_inv: Vec<u16>,
}

/// A finite field context. Cheap to clone; elements are plain `u16` handles
/// that only make sense together with their field.
#[derive(Clone)]
pub struct FqField(Arc<Inner>);

impl fmt::Debug for FqField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FqField(p={}, m={})", self.0.p, self.0.m)
    }
}

impl PartialEq for FqField {
    fn eq(&self, other: &Self) -> bool {
        self.0.p == other.0.p && self.0.m == other.0.m
    }
}
impl Eq for FqField {}

pub type El = u16;

fn poly_mul_mod(a: &[u32], b: &[u32], modulus: &[u32], p: u32) -> Vec<u32> {
    let m = modulus.len() - 1;
    let mut prod = vec![0u32; a.len() + b.len()];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + ai * bj) % p;
        }
    }
    // reduce by the monic modulus
    for i in (m..prod.len()).rev() {
        let c = prod[i];
        if c == 0 {
            continue;
        }
        prod[i] = 0;
        for k in 0..m {
            let sub = (c * modulus[k]) % p;
            prod[i - m + k] = (prod[i - m + k] + p * p - sub) % p;
        }
    }
    prod.truncate(m.max(1));
    prod
}

fn find_irreducible(p: u32, m: u32) -> Vec<u32> {
    // monic degree-m polynomial with no factor of degree <= m/2,
    // found by trial division against all smaller monic polynomials
    let m = m as usize;
    if m == 1 {
        return vec![0, 1];
    }
    let total = (p as u64).pow(m as u32);
    for code in 0..total {
        let mut f = Vec::with_capacity(m + 1);
        let mut c = code;
        for _ in 0..m {
            f.push((c % p as u64) as u32);
            c /= p as u64;
        }
        f.push(1);
        if f[0] == 0 {
            continue;
        }
        if is_irreducible(&f, p) {
            return f;
        }
    }
    unreachable!("irreducible polynomials of every degree exist")
}

fn is_irreducible(f: &[u32], p: u32) -> bool {
    let m = f.len() - 1;
    for deg in 1..=m / 2 {
        let count = (p as u64).pow(deg as u32);
        for code in 0..count {
            let mut g = Vec::with_capacity(deg + 1);
            let mut c = code;
            for _ in 0..deg {
                g.push((c % p as u64) as u32);
                c /= p as u64;
            }
            g.push(1);
            if poly_divides(&g, f, p) {
                return false;
            }
        }
    }
    true
}

fn poly_divides(g: &[u32], f: &[u32], p: u32) -> bool {
    let mut rem: Vec<u32> = f.to_vec();
    let dg = g.len() - 1;
    while rem.len() >= g.len() {
        let lead = *rem.last().unwrap();
        if lead != 0 {
            let shift = rem.len() - g.len();
            for k in 0..=dg {
                let sub = (lead * g[k]) % p;
                rem[shift + k] = (rem[shift + k] + p * p - sub) % p;
            }
        }
        rem.pop();
    }
    rem.iter().all(|&c| c == 0)
}

impl FqField {
    /// Builds F_{p^m}. Panics if `p` is not prime or the field is too large
    /// for table-based arithmetic.
    pub fn new(p: u32, m: u32) -> FqField {
        assert!(m >= 1, "extension degree must be positive");
        assert!(p >= 2 && (2..p).all(|d| !p.is_multiple_of(d)), "p must be prime");
        let q = p.checked_pow(m).expect("field too large");
        assert!(q <= 1 << 14, "field too large for table arithmetic");
        let modulus = find_irreducible(p, m);

        let digits = |a: u32| -> Vec<u32> {
            let mut v = Vec::with_capacity(m as usize);
            let mut a = a;
            for _ in 0..m {
                v.push(a % p);
                a /= p;
            }
            v
        };
        let pack = |v: &[u32]| -> u32 {
            let mut a = 0u32;
            for &c in v.iter().rev() {
                a = a * p + c;
            }
            a
        };

        let mul_raw = |a: u32, b: u32| -> u32 {
            pack(&poly_mul_mod(&digits(a), &digits(b), &modulus, p))
        };

        // find a generator of the multiplicative group
        let order_factors = {
            let mut n = q - 1;
            let mut fs = Vec::new();
            let mut d = 2;
            while d * d <= n {
                if n.is_multiple_of(d) {
                    fs.push(d);
                    while n.is_multiple_of(d) {
                        n /= d;
                    }
                }
                d += 1;
            }
            if n > 1 {
                fs.push(n);
            }
            fs
        };
        let pow_raw = |mut a: u32, mut k: u32| -> u32 {
            let mut acc = 1u32;
            while k > 0 {
                if k & 1 == 1 {
                    acc = mul_raw(acc, a);
                }
                a = mul_raw(a, a);
                k >>= 1;
            }
            acc
        };
        let mut gen = 0;
        for cand in 2..q.max(3) {
            if cand >= q {
                break;
            }
            if order_factors
                .iter()
                .all(|&r| pow_raw(cand, (q - 1) / r) != 1)
            {
                gen = cand;
                break;
            }
        }
        if q == 2 {
            gen = 1;
        }
        assert!(gen != 0, "no generator found");

        let mut exp = vec![0u16; 2 * (q as usize - 1).max(1)];
        let mut log = vec![0u32; q as usize];
        let mut acc = 1u32;
        for i in 0..(q - 1) as usize {
            exp[i] = acc as u16;
            log[acc as usize] = i as u32;
            acc = mul_raw(acc, gen);
        }
        for i in 0..(q - 1) as usize {
            exp[i + (q - 1) as usize] = exp[i];
        }

        let mut frob = vec![0u16; q as usize];
        let mut frob_inv = vec![0u16; q as usize];
        for a in 0..q {
            let fp = pow_raw(a, p);
            frob[a as usize] = fp as u16;
            frob_inv[fp as usize] = a as u16;
        }

        FqField(Arc::new(Inner {
            p,
            m,
            q,
            exp,
            log,
            frob,
            frob_inv,
        }))
    }

    pub fn p(&self) -> u32 {
        self.0.p
    }
    pub fn m(&self) -> u32 {
        self.0.m
    }
    pub fn q(&self) -> u32 {
        self.0.q
    }
    pub fn zero(&self) -> El {
        0
    }
    pub fn one(&self) -> El {
        1
    }

    pub fn add(&self, a: El, b: El) -> El {
        let p = self.0.p;
        let (mut a, mut b) = (a as u32, b as u32);
        let mut out = 0u32;
        let mut place = 1u32;
        for _ in 0..self.0.m {
            out += ((a % p + b % p) % p) * place;
            a /= p;
            b /= p;
            place *= p;
        }
        out as El
    }

    pub fn neg(&self, a: El) -> El {
        let p = self.0.p;
        let mut a = a as u32;
        let mut out = 0u32;
        let mut place = 1u32;
        for _ in 0..self.0.m {
            out += ((p - a % p) % p) * place;
            a /= p;
            place *= p;
        }
        out as El
    }

    pub fn sub(&self, a: El, b: El) -> El {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: El, b: El) -> El {
        if a == 0 || b == 0 {
            return 0;
        }
        let i = self.0.log[a as usize] as usize + self.0.log[b as usize] as usize;
        self.0.exp[i]
    }

    pub fn inv(&self, a: El) -> El {
        assert!(a != 0, "division by zero");
        let q1 = (self.0.q - 1) as usize;
        let i = (q1 - self.0.log[a as usize] as usize) % q1;
        self.0.exp[i]
    }

    pub fn div(&self, a: El, b: El) -> El {
        self.mul(a, self.inv(b))
    }

    /// σ^k applied to `a`, where σ(x) = x^p generates Gal(F_q / F_p).
    /// Negative `k` means the inverse automorphism.
    pub fn frob_pow(&self, a: El, k: i64) -> El {
        let m = self.0.m as i64;
        let k = k.rem_euclid(m);
        let mut a = a;
        for _ in 0..k {
            a = self.0.frob[a as usize];
        }
        a
    }

    pub fn frob(&self, a: El) -> El {
        self.0.frob[a as usize]
    }

    pub fn frob_inv(&self, a: El) -> El {
        self.0.frob_inv[a as usize]
    }

    pub fn elements(&self) -> impl Iterator<Item = El> {
        0..self.0.q as El
    }

    /// Raises to an arbitrary integer power (with a^0 = 1, 0^k = 0 for k > 0).
    pub fn pow(&self, a: El, k: u64) -> El {
        if k == 0 {
            return 1;
        }
        if a == 0 {
            return 0;
        }
        let q1 = (self.0.q - 1) as u64;
        let i = (self.0.log[a as usize] as u64 * (k % q1)) % q1;
        self.0.exp[i as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_axioms_small() {
        for (p, m) in [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (5, 1), (2, 4)] {
            let k = FqField::new(p, m);
            let q = k.q();
            for a in k.elements() {
                assert_eq!(k.add(a, k.neg(a)), 0);
                assert_eq!(k.mul(a, 1), a);
                if a != 0 {
                    assert_eq!(k.mul(a, k.inv(a)), 1);
                }
                // Frobenius is a field automorphism of order m
                assert_eq!(k.frob_pow(a, k.m() as i64), a);
                assert_eq!(k.frob_inv(k.frob(a)), a);
            }
            for a in k.elements() {
                for b in k.elements() {
                    assert_eq!(k.add(a, b), k.add(b, a));
                    assert_eq!(k.mul(a, b), k.mul(b, a));
                    assert_eq!(k.frob(k.mul(a, b)), k.mul(k.frob(a), k.frob(b)));
                    assert_eq!(k.frob(k.add(a, b)), k.add(k.frob(a), k.frob(b)));
                }
            }
            // multiplicative group has the right size
            let mut seen = std::collections::BTreeSet::new();
            for a in 1..q as El {
                seen.insert(k.mul(a, a));
            }
            assert!(!seen.contains(&0));
        }
    }

    #[test]
    fn distributivity_f9() {
        let k = FqField::new(3, 2);
        for a in k.elements() {
            for b in k.elements() {
                for c in k.elements() {
                    assert_eq!(k.mul(a, k.add(b, c)), k.add(k.mul(a, b), k.mul(a, c)));
                }
            }
        }
    }
}
