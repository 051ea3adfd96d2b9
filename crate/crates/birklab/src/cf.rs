//! Exact continued-fraction arithmetic: digit extraction, big-integer
//! convergents, the two-sided Diophantine inequality, and Lévy statistics.
//!
//! Inputs are exact rationals (digits via the Euclidean algorithm) or
//! certified rational enclosures of irrationals (digits emitted only while
//! the floor is constant across the whole interval). Denominators qₙ grow
//! like e^{γn} and overflow any fixed width near n ≈ 36, so convergents
//! are unbounded integers and log qₙ is taken from the bit length plus a
//! normalized mantissa.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// An exact number in (0,1): a rational, or a certified enclosure
/// lo ≤ x ≤ hi of an irrational.
#[derive(Debug, Clone)]
pub enum CfNumber {
    Rational(BigRational),
    Interval { lo: BigRational, hi: BigRational },
}

impl CfNumber {
    pub fn rational_u64(p: u64, q: u64) -> Result<CfNumber> {
        if q == 0 {
            return Err(Error::domain("zero denominator"));
        }
        let r = BigRational::new(BigInt::from(p), BigInt::from(q));
        CfNumber::rational(r)
    }

    pub fn rational(r: BigRational) -> Result<CfNumber> {
        if r <= BigRational::zero() || r >= BigRational::one() {
            return Err(Error::domain(format!(
                "continued-fraction input {r} outside (0,1)"
            )));
        }
        Ok(CfNumber::Rational(r))
    }

    fn check_interval(lo: BigRational, hi: BigRational) -> Result<CfNumber> {
        if lo >= hi {
            return Err(Error::domain("empty certification interval"));
        }
        if lo <= BigRational::zero() || hi >= BigRational::one() {
            return Err(Error::domain("certification interval escapes (0,1)"));
        }
        Ok(CfNumber::Interval { lo, hi })
    }
}

/// Continued-fraction digits a₁, a₂, … of a number in (0,1).
/// `terminated` marks a rational whose expansion ended before the
/// requested length.
#[derive(Debug, Clone)]
pub struct CfExpansion {
    pub digits: Vec<BigUint>,
    pub terminated: bool,
}

impl CfExpansion {
    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// Digit as u64 when it fits (it essentially always does for
    /// statistical inputs; adversarial rationals can exceed it).
    pub fn digit_u64(&self, i: usize) -> Option<u64> {
        self.digits.get(i).and_then(|d| d.to_u64())
    }
}

/// pₙ/qₙ with the standard seeds p₀ = 0, q₀ = 1.
#[derive(Debug, Clone)]
pub struct ConvergentPair {
    pub index: usize,
    pub p: BigUint,
    pub q: BigUint,
}

impl ConvergentPair {
    pub fn value(&self) -> BigRational {
        BigRational::new(BigInt::from(self.p.clone()), BigInt::from(self.q.clone()))
    }

    pub fn log_q(&self) -> f64 {
        log_biguint(&self.q)
    }
}

/// log of an unbounded positive integer: bit length plus normalized
/// 53-bit mantissa.
pub fn log_biguint(q: &BigUint) -> f64 {
    let bits = q.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 53 {
        return q.to_f64().expect("fits").ln();
    }
    let shift = bits - 53;
    let top = (q >> shift).to_f64().expect("53 bits fit");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// log of a positive rational via the numerator/denominator bit lengths.
pub fn log_rational(x: &BigRational) -> f64 {
    log_biguint(x.numer().magnitude()) - log_biguint(x.denom().magnitude())
}

/// Continued-fraction digits of x, at most n of them.
///
/// Rational inputs run the Euclidean algorithm and may terminate early
/// (`terminated` set). Interval inputs emit a digit only when ⌊1/x⌋ is
/// constant across the enclosure; running out of certified digits is a
/// precision error naming the certified count.
pub fn cf_digits(x: &CfNumber, n: usize) -> Result<CfExpansion> {
    match x {
        CfNumber::Rational(r) => {
            // x = num/den in (0,1); a = ⌊den/num⌋, then (num, den) ← (den mod num, num).
            let mut num = r.numer().magnitude().clone();
            let mut den = r.denom().magnitude().clone();
            let mut digits = Vec::new();
            let mut terminated = false;
            for _ in 0..n {
                if num.is_zero() {
                    terminated = true;
                    break;
                }
                let (a, rem) = den.div_rem(&num);
                digits.push(a);
                den = num;
                num = rem;
            }
            if digits.len() < n && !terminated {
                terminated = num.is_zero();
            }
            Ok(CfExpansion { digits, terminated })
        }
        CfNumber::Interval { lo, hi } => {
            let mut lo = lo.clone();
            let mut hi = hi.clone();
            let mut digits = Vec::new();
            for k in 0..n {
                if lo <= BigRational::zero() || hi >= BigRational::one() {
                    return Err(Error::PrecisionExhausted {
                        certified: k,
                        requested: n,
                    });
                }
                // 1/x is decreasing: 1/x ∈ [1/hi, 1/lo].
                let inv_lo = hi.recip();
                let inv_hi = lo.recip();
                let a_lo = inv_lo.floor();
                let a_hi = inv_hi.floor();
                if a_lo != a_hi {
                    return Err(Error::PrecisionExhausted {
                        certified: k,
                        requested: n,
                    });
                }
                let a = a_lo
                    .to_integer()
                    .to_biguint()
                    .ok_or_else(|| Error::domain("negative digit"))?;
                if a.is_zero() {
                    return Err(Error::PrecisionExhausted {
                        certified: k,
                        requested: n,
                    });
                }
                let next_lo = inv_lo - &a_lo;
                let next_hi = inv_hi - &a_lo;
                digits.push(a);
                lo = next_lo;
                hi = next_hi;
            }
            Ok(CfExpansion {
                digits,
                terminated: false,
            })
        }
    }
}

/// The first n convergents p₁/q₁, …, pₙ/qₙ via the standard recurrence
/// pₖ = aₖp_{k−1} + p_{k−2}, qₖ = aₖq_{k−1} + q_{k−2}.
pub fn convergents(digits: &CfExpansion, n: usize) -> Result<Vec<ConvergentPair>> {
    if digits.len() < n {
        return Err(Error::InsufficientDigits {
            have: digits.len(),
            need: n,
        });
    }
    let mut out = Vec::with_capacity(n);
    let mut p_prev = BigUint::one(); // p₋₁
    let mut p_cur = BigUint::zero(); // p₀
    let mut q_prev = BigUint::zero(); // q₋₁
    let mut q_cur = BigUint::one(); // q₀
    for (i, a) in digits.digits.iter().take(n).enumerate() {
        let p_next = a * &p_cur + &p_prev;
        let q_next = a * &q_cur + &q_prev;
        p_prev = std::mem::replace(&mut p_cur, p_next);
        q_prev = std::mem::replace(&mut q_cur, q_next);
        out.push(ConvergentPair {
            index: i + 1,
            p: p_cur.clone(),
            q: q_cur.clone(),
        });
    }
    Ok(out)
}

/// pₙq_{n−1} − p_{n−1}qₙ = (−1)^{n−1}, the exact integrity check on the
/// big-integer recurrence (seeds included).
pub fn determinant_identity_holds(pairs: &[ConvergentPair]) -> bool {
    let mut p_prev = BigInt::zero(); // p₀
    let mut q_prev = BigInt::one(); // q₀
    for pair in pairs {
        let p = BigInt::from(pair.p.clone());
        let q = BigInt::from(pair.q.clone());
        let det = &p * &q_prev - &p_prev * &q;
        let expect = if pair.index % 2 == 1 {
            BigInt::one()
        } else {
            -BigInt::one()
        };
        if det != expect {
            return false;
        }
        p_prev = p;
        q_prev = q;
    }
    true
}

/// Exact bottom-up evaluation of [a₁, …, aₙ] as a rational.
pub fn fold_value(digits: &CfExpansion, n: usize) -> Result<BigRational> {
    if digits.len() < n || n == 0 {
        return Err(Error::InsufficientDigits {
            have: digits.len(),
            need: n.max(1),
        });
    }
    let mut acc = BigRational::from(BigInt::from(digits.digits[n - 1].clone()));
    for a in digits.digits[..n - 1].iter().rev() {
        acc = BigRational::from(BigInt::from(a.clone())) + acc.recip();
    }
    Ok(acc.recip())
}

/// One row of a Diophantine-inequality check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DiophantineRecord {
    pub n: usize,
    /// 1/(2q_{n+1}²), as f64 for reporting.
    pub lower: f64,
    /// |x − pₙ/qₙ|.
    pub error: f64,
    /// 1/qₙ².
    pub upper: f64,
    /// Exact x = pₙ/qₙ (a rational at its last convergent): the left
    /// inequality is degenerate there.
    pub terminal: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct DiophantineReport {
    pub records: Vec<DiophantineRecord>,
    pub all_passed: bool,
}

/// Verify 1/(2q_{n+1}²) ≤ |x − pₙ/qₙ| ≤ 1/qₙ² for every index up to n,
/// exactly for rational x, and over the entire enclosure for interval
/// x — a record passes only when every point of the enclosure passes.
/// An enclosure too wide to decide an index is a precision error.
pub fn diophantine_check(x: &CfNumber, n: usize) -> Result<DiophantineReport> {
    let digits = cf_digits(x, n + 1)?;
    if digits.is_empty() {
        return Err(Error::InsufficientDigits {
            have: 0,
            need: n + 1,
        });
    }
    let have = digits.len();
    let pairs = convergents(&digits, have)?;
    let (x_lo, x_hi) = match x {
        CfNumber::Rational(r) => (r.clone(), r.clone()),
        CfNumber::Interval { lo, hi } => (lo.clone(), hi.clone()),
    };

    let two = BigRational::from(BigInt::from(2));
    let mut records = Vec::new();
    // Rational sources that ran out check what exists; the final
    // convergent equals x and is flagged terminal.
    let upto = n.min(have.saturating_sub(1));
    for k in 1..=upto {
        let ck = &pairs[k - 1];
        let cnext = &pairs[k];
        let q2 = BigRational::new(BigInt::one(), BigInt::from(&ck.q * &ck.q));
        let qnext2 = BigRational::new(BigInt::one(), BigInt::from(&cnext.q * &cnext.q)) / &two;
        let center = ck.value();
        // |x − pₖ/qₖ| over the enclosure
        let d_lo_signed = &x_lo - &center;
        let d_hi_signed = &x_hi - &center;
        let (diff_min, diff_max) = if d_lo_signed >= BigRational::zero() {
            (d_lo_signed.clone(), d_hi_signed.clone())
        } else if d_hi_signed <= BigRational::zero() {
            (d_hi_signed.abs(), d_lo_signed.abs())
        } else {
            // straddles the convergent
            (BigRational::zero(), d_lo_signed.abs().max(d_hi_signed.abs()))
        };
        let terminal = diff_max.is_zero();
        let passed = if terminal {
            true
        } else {
            let upper_ok_all = diff_max <= q2;
            let lower_ok_all = diff_min >= qnext2;
            if upper_ok_all && lower_ok_all {
                true
            } else if diff_min > q2 || diff_max < qnext2 {
                false
            } else {
                // verdict depends on where x sits inside the enclosure
                return Err(Error::PrecisionExhausted {
                    certified: k - 1,
                    requested: n,
                });
            }
        };
        records.push(DiophantineRecord {
            n: k,
            lower: rational_to_f64(&qnext2),
            error: rational_to_f64(&diff_max),
            upper: rational_to_f64(&q2),
            terminal,
            passed,
        });
    }
    let all_passed = records.iter().all(|r| r.passed);
    Ok(DiophantineReport {
        records,
        all_passed,
    })
}

/// log qₙ(x)/n, the finite-n Lévy statistic. The limit constant is
/// [`crate::levy_gamma`] = π²/(12 log 2).
pub fn levy_statistic(x: &CfNumber, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("levy_statistic needs n >= 1"));
    }
    let digits = cf_digits(x, n)?;
    if digits.len() < n {
        return Err(Error::InsufficientDigits {
            have: digits.len(),
            need: n,
        });
    }
    let pairs = convergents(&digits, n)?;
    Ok(pairs[n - 1].log_q() / n as f64)
}

/// Exact value of log |(Gⁿ)′(x)| = −2 Σ_{k<n} log x_k for rational x,
/// from the Euclidean remainders (no orbit roundoff at all).
pub fn gauss_orbit_log_derivative_sum(x: &BigRational, n: usize) -> Result<f64> {
    if x <= &BigRational::zero() || x >= &BigRational::one() {
        return Err(Error::domain("orbit start outside (0,1)"));
    }
    let mut num = x.numer().magnitude().clone();
    let mut den = x.denom().magnitude().clone();
    let mut sum = 0.0;
    for k in 0..n {
        if num.is_zero() {
            return Err(Error::OrbitTerminated {
                survived: k,
                requested: n,
            });
        }
        // x_k = num/den; log x_k from bit lengths.
        sum += log_biguint(&num) - log_biguint(&den);
        let (_, rem) = den.div_rem(&num);
        den = num;
        num = rem;
    }
    Ok(-2.0 * sum)
}

fn rational_to_f64(x: &BigRational) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let sign = if x.is_negative() { -1.0 } else { 1.0 };
    sign * log_rational(&x.abs()).exp()
}

/// Uniform dyadic rational m/2^bits in (0,1), from the keyed counter
/// stream at (index, counter_base...).
pub fn random_dyadic(rng: &CounterRng, index: u64, bits: u64, counter_base: u64) -> BigRational {
    let words = bits.div_ceil(64);
    let mut raw = Vec::with_capacity(words as usize);
    for w in 0..words {
        raw.push(rng.draw_at(index, counter_base + w));
    }
    // trim to exactly `bits` bits and keep the numerator odd so the
    // denominator stays 2^bits
    let excess = words * 64 - bits;
    let mut m = BigUint::zero();
    for w in raw {
        m = (m << 64) | BigUint::from(w);
    }
    m >>= excess;
    m |= BigUint::one();
    BigRational::new(BigInt::from(m), BigInt::from(BigUint::one() << bits))
}

// ---------------------------------------------------------------------
// Certified enclosures of named constants.
// ---------------------------------------------------------------------

/// Certified dyadic enclosure of a named constant's fractional part in
/// (0,1): "golden" (√5−1)/2, "sqrt2" √2−1, "e" e−2, "pi" π−3.
pub fn named_constant(name: &str, bits: u64) -> Result<CfNumber> {
    let bits = bits.max(16);
    match name {
        "golden" => {
            let (lo, hi) = sqrt_enclosure(5, bits);
            let one = BigRational::one();
            let two = BigRational::from(BigInt::from(2));
            CfNumber::check_interval((lo - &one) / &two, (hi - &one) / &two)
        }
        "sqrt2" => {
            let (lo, hi) = sqrt_enclosure(2, bits);
            let one = BigRational::one();
            CfNumber::check_interval(lo - &one, hi - &one)
        }
        "e" => {
            let (lo, hi) = e_enclosure(bits);
            let two = BigRational::from(BigInt::from(2));
            CfNumber::check_interval(lo - &two, hi - &two)
        }
        "pi" => {
            let (lo, hi) = pi_enclosure(bits);
            let three = BigRational::from(BigInt::from(3));
            CfNumber::check_interval(lo - &three, hi - &three)
        }
        other => Err(Error::Config(format!(
            "unknown constant {other:?}; known: golden, sqrt2, e, pi"
        ))),
    }
}

/// [s/2^k, (s+1)/2^k] with s = ⌊√(v·4^k)⌋.
fn sqrt_enclosure(v: u64, bits: u64) -> (BigRational, BigRational) {
    let scaled = BigUint::from(v) << (2 * bits);
    let s = scaled.sqrt();
    let den = BigInt::from(BigUint::one() << bits);
    (
        BigRational::new(BigInt::from(s.clone()), den.clone()),
        BigRational::new(BigInt::from(s + BigUint::one()), den),
    )
}

/// Fixed-point Σ 1/j! with floor division per term; the slop is one ulp
/// per term plus the factorial tail bound.
fn e_enclosure(bits: u64) -> (BigRational, BigRational) {
    let scale = BigUint::one() << (bits + 8);
    let mut acc = &scale * BigUint::from(2u32); // 1/0! + 1/1!
    let mut fact = BigUint::one();
    let mut terms = 0u64;
    let mut j = 2u64;
    loop {
        fact *= j;
        let term = &scale / &fact;
        terms += 1;
        if term.is_zero() {
            break;
        }
        acc += term;
        j += 1;
    }
    // truncation tail < 2/ (j+1)! which is below one ulp once term = 0
    let slop = BigUint::from(terms + 2);
    let den = BigInt::from(scale);
    (
        BigRational::new(BigInt::from(acc.clone()), den.clone()),
        BigRational::new(BigInt::from(acc + slop), den),
    )
}

/// Machin's formula π = 16 arctan(1/5) − 4 arctan(1/239) in fixed point,
/// with certified one-ulp-per-term slop.
fn pi_enclosure(bits: u64) -> (BigRational, BigRational) {
    let guard = 16u64;
    let shift = bits + guard;

    // arctan(1/x)·2^shift ∈ [acc − slop, acc + slop]
    fn arctan_recip_fixed(x: u64, shift: u64) -> (BigInt, BigInt) {
        let x2 = BigUint::from(x) * BigUint::from(x);
        let mut acc = BigInt::zero();
        let mut power = BigUint::one() << shift; // x^{-(2j+1)} scaled, times x
        power /= BigUint::from(x);
        let mut j = 0u64;
        let mut terms = 0u64;
        loop {
            let term = &power / BigUint::from(2 * j + 1);
            if term.is_zero() {
                break;
            }
            if j.is_multiple_of(2) {
                acc += BigInt::from(term);
            } else {
                acc -= BigInt::from(term);
            }
            power /= &x2;
            j += 1;
            terms += 1;
        }
        // alternating series: truncation below first omitted term ≤ 1 ulp;
        // floor divisions lose ≤ 1 ulp each
        let slop = BigInt::from(terms + 2);
        (acc.clone() - &slop, acc + slop)
    }

    let (a5_lo, a5_hi) = arctan_recip_fixed(5, shift);
    let (a239_lo, a239_hi) = arctan_recip_fixed(239, shift);
    let lo = BigInt::from(16) * a5_lo - BigInt::from(4) * a239_hi;
    let hi = BigInt::from(16) * a5_hi - BigInt::from(4) * a239_lo;
    let den = BigInt::from(BigUint::one() << shift);
    (BigRational::new(lo, den.clone()), BigRational::new(hi, den))
}

/// Parse a CLI continued-fraction input: "p/q", a decimal string
/// (taken as the exact decimal rational), or a named constant.
pub fn parse_input(s: &str, bits: u64) -> Result<CfNumber> {
    if let Some((p, q)) = s.split_once('/') {
        let p: BigUint = p
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad fraction numerator in {s:?}")))?;
        let q: BigUint = q
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad fraction denominator in {s:?}")))?;
        if q.is_zero() {
            return Err(Error::Config("zero denominator".into()));
        }
        return CfNumber::rational(BigRational::new(BigInt::from(p), BigInt::from(q)));
    }
    if s.contains('.') {
        let (int_part, frac_part) = s.split_once('.').expect("contains dot");
        if int_part
            .parse::<u64>()
            .map_err(|_| Error::Config(format!("bad decimal {s:?}")))?
            != 0
        {
            return Err(Error::Config(format!(
                "decimal input {s:?} must lie in (0,1)"
            )));
        }
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::Config(format!("bad decimal {s:?}")));
        }
        let digits: BigUint = frac_part.parse().expect("checked digits");
        let den = BigUint::from(10u32).pow(frac_part.len() as u32);
        return CfNumber::rational(BigRational::new(BigInt::from(digits), BigInt::from(den)));
    }
    named_constant(s, bits)
}
