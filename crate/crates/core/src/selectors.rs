//! Construction and exhaustive verification of (I, k)-strongly-selective
//! families, and the derived constants used by the general leader
//! election.
//!
//! A family of subsets of `[1, I]` is an (I, k)-ssf if for every
//! nonempty `Z` with `|Z| <= k`, every `z` in `Z` is the unique element
//! of `Z` in some listed set. Executing a family on a station set means
//! station `v` transmits in round `i` iff its id lies in set `i mod s`.
//!
//! The constructive family is a superimposed code over a prime field:
//! ids are degree-`m` polynomials over `F_q`, and set `(j, y)` collects
//! the ids whose polynomial passes through `(j, y)`. Two distinct
//! polynomials agree on at most `m` points, so `q > (k-1) m` guarantees
//! every member of a small `Z` an evaluation point of its own. Sets are
//! never materialized for large domains; membership is evaluated
//! arithmetically.

use crate::error::{Error, Result};

/// Exhaustive verification refuses above this many candidate subsets.
const ENUMERATION_LIMIT: u128 = 20_000_000;

/// Documented bound constant: constructed families have at most
/// `SIZE_BOUND_CONSTANT * k^2 * ceil(log2 I)` sets (regression-tested).
pub const SIZE_BOUND_CONSTANT: u64 = 4;

/// An (I, k)-strongly-selective family as an ordered list of subsets of
/// `[1, I]`.
#[derive(Debug, Clone)]
pub struct Ssf {
    pub id_domain: u64,
    pub k: u64,
    len: usize,
    repr: SsfRepr,
}

#[derive(Debug, Clone)]
enum SsfRepr {
    /// The single set `[1, I]`; sufficient for k = 1.
    FullSet,
    /// The I singletons; sufficient for any k and optimal for large k.
    Singletons,
    /// Polynomial superimposed code with `q^2` sets.
    Polynomial { q: u64, degree: u32 },
    /// Arbitrary family, e.g. loaded from a file.
    Explicit(Vec<Vec<u64>>),
}

impl Ssf {
    /// Number of listed sets.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// One-line description of how the family was built.
    pub fn construction(&self) -> String {
        match &self.repr {
            SsfRepr::FullSet => "full-set".into(),
            SsfRepr::Singletons => "singletons".into(),
            SsfRepr::Polynomial { q, degree } => {
                format!("polynomial code over F_{q}, degree {degree}")
            }
            SsfRepr::Explicit(_) => "explicit".into(),
        }
    }

    pub fn from_sets(id_domain: u64, k: u64, sets: Vec<Vec<u64>>) -> Result<Self> {
        if id_domain == 0 {
            return Err(Error::invalid_arg("id domain must be positive"));
        }
        let mut sets = sets;
        for s in &mut sets {
            s.sort_unstable();
            s.dedup();
            if s.iter().any(|&id| id == 0 || id > id_domain) {
                return Err(Error::invalid_arg(format!(
                    "set member outside the id domain [1, {id_domain}]"
                )));
            }
        }
        Ok(Ssf { id_domain, k, len: sets.len(), repr: SsfRepr::Explicit(sets) })
    }

    /// Whether `id` belongs to set `idx` (indices taken modulo the
    /// family length, matching the execution semantics).
    pub fn set_contains(&self, idx: usize, id: u64) -> bool {
        debug_assert!(id >= 1 && id <= self.id_domain);
        let idx = idx % self.len.max(1);
        match &self.repr {
            SsfRepr::FullSet => true,
            SsfRepr::Singletons => (id - 1) as usize == idx,
            SsfRepr::Polynomial { q, degree } => {
                let j = (idx as u64) / q;
                let y = (idx as u64) % q;
                poly_eval(id - 1, *q, *degree, j) == y
            }
            SsfRepr::Explicit(sets) => sets[idx].binary_search(&id).is_ok(),
        }
    }

    /// Materializes the sets. Refused when the explicit listing would be
    /// unreasonably large.
    pub fn sets(&self) -> Result<Vec<Vec<u64>>> {
        if let SsfRepr::Explicit(sets) = &self.repr {
            return Ok(sets.clone());
        }
        let cost = self.id_domain as u128 * self.len as u128;
        if cost > 8_000_000 {
            return Err(Error::RefuseToEnumerate(format!(
                "materializing {} sets over [1, {}] is too large",
                self.len, self.id_domain
            )));
        }
        let mut sets = vec![Vec::new(); self.len];
        for id in 1..=self.id_domain {
            for (idx, set) in sets.iter_mut().enumerate() {
                if self.set_contains(idx, id) {
                    set.push(id);
                }
            }
        }
        Ok(sets)
    }
}

/// Evaluates the polynomial whose base-q digits are the coefficients of
/// `code` at point `x`, over `F_q`.
fn poly_eval(code: u64, q: u64, degree: u32, x: u64) -> u64 {
    // Horner, most significant coefficient first.
    let mut coeffs = [0u64; 64];
    let mut c = code;
    for coeff in coeffs.iter_mut().take(degree as usize + 1) {
        *coeff = c % q;
        c /= q;
    }
    let mut acc = 0u64;
    for t in (0..=degree as usize).rev() {
        acc = (acc * x + coeffs[t]) % q;
    }
    acc
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// Smallest exponent `t` with `q^t >= i`.
fn pow_exponent_for(q: u64, i: u64) -> u32 {
    let mut t = 0u32;
    let mut acc: u128 = 1;
    while acc < u128::from(i) {
        acc *= u128::from(q);
        t += 1;
    }
    t.max(1)
}

/// Builds a verified (I, k)-strongly-selective family. Deterministic;
/// the returned family's length is at most
/// `SIZE_BOUND_CONSTANT * k^2 * ceil(log2 I)`.
pub fn build_ssf(id_domain: u64, k: u64) -> Result<Ssf> {
    if id_domain == 0 || k == 0 {
        return Err(Error::invalid_arg("id domain and k must be positive"));
    }
    if k > id_domain {
        return Err(Error::invalid_arg(format!(
            "selectivity k = {k} exceeds the id domain {id_domain}"
        )));
    }
    if k == 1 {
        // Any singleton Z is isolated by the full set.
        return Ok(Ssf { id_domain, k, len: 1, repr: SsfRepr::FullSet });
    }
    // Pick the smallest prime q whose degree budget separates any k ids:
    // degree m with q^(m+1) >= I, requiring q > (k-1) * m.
    let mut q = 2u64;
    let (q, degree) = loop {
        if is_prime(q) {
            let t = pow_exponent_for(q, id_domain);
            let m = u64::from(t - 1);
            if q > (k - 1) * m {
                break (q, t - 1);
            }
        }
        q += 1;
    };
    let poly_len = (q * q) as usize;
    if poly_len as u64 >= id_domain {
        // Singletons are smaller and valid for every k.
        return Ok(Ssf { id_domain, k, len: id_domain as usize, repr: SsfRepr::Singletons });
    }
    Ok(Ssf { id_domain, k, len: poly_len, repr: SsfRepr::Polynomial { q, degree } })
}

/// A violation witness: the subset `Z` and the member `z` that no listed
/// set isolates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SsfViolation {
    pub z: Vec<u64>,
    pub member: u64,
}

fn binomial(n: u64, k: u64) -> u128 {
    let mut acc: u128 = 1;
    for t in 0..k.min(n) {
        acc = acc.saturating_mul(u128::from(n - t)) / u128::from(t + 1);
        if acc > ENUMERATION_LIMIT * 8 {
            return acc;
        }
    }
    acc
}

/// Exhaustively checks the strongly-selective property, returning the
/// first violating (Z, z) pair or `None` when the family verifies.
/// Intended for small domains; larger ones are refused.
pub fn verify_ssf_witness(f: &Ssf) -> Result<Option<SsfViolation>> {
    let i = f.id_domain;
    let kmax = f.k.min(i);
    let mut total: u128 = 0;
    for m in 1..=kmax {
        total = total.saturating_add(binomial(i, m));
    }
    if total > ENUMERATION_LIMIT {
        return Err(Error::RefuseToEnumerate(format!(
            "{total} candidate subsets for I = {i}, k = {kmax} exceed the enumeration limit"
        )));
    }

    // Per-id membership bitmap over the family.
    let words = f.len().div_ceil(64).max(1);
    let mut masks = vec![0u64; (i as usize + 1) * words];
    for id in 1..=i {
        for idx in 0..f.len() {
            if f.set_contains(idx, id) {
                masks[id as usize * words + idx / 64] |= 1 << (idx % 64);
            }
        }
    }
    let mask_of = |id: u64| -> &[u64] { &masks[id as usize * words..(id as usize + 1) * words] };

    // Lexicographic successor of an m-subset of [1, I]; false when
    // exhausted.
    fn next_combination(z: &mut [u64], i: u64) -> bool {
        let m = z.len();
        let mut pos = m;
        while pos > 0 {
            pos -= 1;
            if z[pos] < i - (m - 1 - pos) as u64 {
                z[pos] += 1;
                for t in pos + 1..m {
                    z[t] = z[t - 1] + 1;
                }
                return true;
            }
        }
        false
    }

    let mut union = vec![0u64; words];
    for m in 1..=kmax as usize {
        let mut z: Vec<u64> = (1..=m as u64).collect();
        loop {
            for pick in 0..m {
                union.iter_mut().for_each(|w| *w = 0);
                for (other, &idv) in z.iter().enumerate() {
                    if other != pick {
                        for (w, mw) in union.iter_mut().zip(mask_of(idv)) {
                            *w |= mw;
                        }
                    }
                }
                let isolated = mask_of(z[pick])
                    .iter()
                    .zip(&union)
                    .any(|(mw, uw)| mw & !uw != 0);
                if !isolated {
                    return Ok(Some(SsfViolation { z: z.clone(), member: z[pick] }));
                }
            }
            if !next_combination(&mut z, i) {
                break;
            }
        }
    }
    Ok(None)
}

/// True iff the family satisfies the strongly-selective property,
/// checked exhaustively.
pub fn verify_ssf(f: &Ssf) -> Result<bool> {
    Ok(verify_ssf_witness(f)?.is_none())
}

/// The selectivity parameter `k = (2 d' + 1)^2` that guarantees the
/// closest same-box pair exchanges messages during one family
/// execution, for margin `lambda` in (0, 1):
/// `d = ceil((8 * 2^(alpha/2) / (N * lambda * (alpha - 2)))^(1/(alpha-2)))`
/// and `d' = ceil(d / lambda^(1/(alpha-2)))`.
pub fn elimination_k(params: &crate::sinr::SinrParams, lambda: f64) -> Result<u64> {
    if !(params.alpha > 2.0) {
        return Err(Error::UnsupportedParameters(format!(
            "alpha must exceed 2, got {}",
            params.alpha
        )));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid_arg(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    let a = params.alpha;
    let inv = 1.0 / (a - 2.0);
    let d = (8.0 * 2f64.powf(a / 2.0) / (params.noise * lambda * (a - 2.0))).powf(inv).ceil();
    let d_prime = (d / lambda.powf(inv)).ceil();
    Ok((2.0 * d_prime + 1.0).powi(2) as u64)
}

/// Parses a family from its text form: header `I k`, then one set per
/// line as space-separated ids (a blank line is an empty set).
pub fn parse_ssf(text: &str) -> Result<Ssf> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty family file".into()))?;
    let mut parts = header.split_whitespace();
    let i: u64 = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse("header must be `I k`".into()))?;
    let k: u64 = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse("header must be `I k`".into()))?;
    if parts.next().is_some() {
        return Err(Error::Parse("header must be exactly `I k`".into()));
    }
    let mut sets = Vec::new();
    for (no, line) in lines.enumerate() {
        let mut set = Vec::new();
        for tok in line.split_whitespace() {
            let id: u64 = tok
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad id `{tok}`", no + 2)))?;
            set.push(id);
        }
        sets.push(set);
    }
    Ssf::from_sets(i, k, sets)
}

/// Renders a family in the text form accepted by [`parse_ssf`].
pub fn format_ssf(f: &Ssf) -> Result<String> {
    let sets = f.sets()?;
    let mut out = format!("{} {}\n", f.id_domain, f.k);
    for set in sets {
        let toks: Vec<String> = set.iter().map(|id| id.to_string()).collect();
        out.push_str(&toks.join(" "));
        out.push('\n');
    }
    Ok(out)
}
