//! Exact rational calculus over Lebesgue/Sobolev exponents.
//!
//! Everything in this module is exact: exponents are rationals with an
//! explicit infinity sentinel, predicates compare without floating point,
//! and the feasibility scan enumerates candidates deterministically so a
//! witness is reproducible across platforms. Floating point is forbidden
//! here because the feasibility system is built from strict inequalities
//! that rounding would blur.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = Ratio<i64>;

/// Default reciprocal-denominator bound for the feasibility scan.
pub const DEFAULT_DENOMINATOR_BOUND: u32 = 60;

/// A Lebesgue exponent: an exact rational or the sentinel infinity.
///
/// Infinity participates in reciprocals as 1/inf = 0 and compares above
/// every finite value.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExtRational {
    Finite(Rational),
    Infinity,
}

pub use ExtRational::{Finite, Infinity};

impl ExtRational {
    pub fn new(numer: i64, denom: i64) -> Self {
        Finite(Rational::new(numer, denom))
    }

    pub fn integer(n: i64) -> Self {
        Finite(Rational::from_integer(n))
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Finite(_))
    }

    /// Reciprocal with the conventions 1/inf = 0 and 1/0 = inf.
    pub fn recip(&self) -> ExtRational {
        match self {
            Infinity => Finite(Rational::zero()),
            Finite(x) if x.is_zero() => Infinity,
            Finite(x) => Finite(x.recip()),
        }
    }

    /// Reciprocal as a plain rational; exponents in [1, inf] always have one.
    pub fn recip_rational(&self) -> Rational {
        match self {
            Infinity => Rational::zero(),
            Finite(x) => {
                assert!(!x.is_zero(), "reciprocal of zero exponent");
                x.recip()
            }
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            Infinity => f64::INFINITY,
            Finite(x) => *x.numer() as f64 / *x.denom() as f64,
        }
    }

    /// Holder conjugate: 1/x' = 1 - 1/x.
    pub fn conjugate(&self) -> ExtRational {
        let u = Rational::one() - self.recip_rational();
        if u.is_zero() {
            Infinity
        } else {
            Finite(u.recip())
        }
    }
}

impl PartialOrd for ExtRational {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtRational {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering::*;
        match (self, other) {
            (Infinity, Infinity) => Equal,
            (Infinity, Finite(_)) => Greater,
            (Finite(_), Infinity) => Less,
            (Finite(a), Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for ExtRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Infinity => write!(f, "inf"),
            Finite(x) if x.denom() == &1 => write!(f, "{}", x.numer()),
            Finite(x) => write!(f, "{}/{}", x.numer(), x.denom()),
        }
    }
}

impl fmt::Debug for ExtRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for ExtRational {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") || s == "∞" {
            return Ok(Infinity);
        }
        match s.split_once('/') {
            Some((num, den)) => {
                let n: i64 = num.trim().parse().map_err(|_| format!("bad numerator `{num}`"))?;
                let d: i64 = den.trim().parse().map_err(|_| format!("bad denominator `{den}`"))?;
                if d == 0 {
                    return Err("zero denominator".into());
                }
                Ok(Finite(Rational::new(n, d)))
            }
            None => {
                let n: i64 = s.parse().map_err(|_| format!("bad rational `{s}`"))?;
                Ok(Finite(Rational::from_integer(n)))
            }
        }
    }
}

/// Parse a rational string like `7/2` or `4` (no infinity).
pub fn parse_rational(s: &str) -> std::result::Result<Rational, String> {
    match ExtRational::from_str(s)? {
        Finite(x) => Ok(x),
        Infinity => Err("expected a finite rational".into()),
    }
}

pub fn rational_to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// A pair of Lebesgue exponents, time-like first.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ExponentPair {
    pub q: ExtRational,
    pub r: ExtRational,
}

impl ExponentPair {
    pub fn new(q: ExtRational, r: ExtRational) -> Self {
        Self { q, r }
    }
}

impl fmt::Display for ExponentPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.q, self.r)
    }
}

impl fmt::Debug for ExponentPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Problem parameters: dimensions, nonlinearity power and coupling, and the
/// regularity indices derived from them.
#[derive(Clone, Copy, Debug)]
pub struct NonlinearityContext {
    /// Euclidean (dispersive) dimension.
    pub n: u32,
    /// Compact (torus) dimension.
    pub k: u32,
    /// Nonlinearity power in |u|^mu u.
    pub mu: Rational,
    /// Coupling; negative is defocusing.
    pub lambda: f64,
    /// Derived dispersive Sobolev index (mu n - 4) / (2 mu); zero at mass
    /// criticality, negative below it.
    pub s: Rational,
    /// Transverse regularity.
    pub sigma: f64,
}

impl NonlinearityContext {
    pub fn new(n: u32, k: u32, mu: Rational, lambda: f64, sigma: f64) -> Result<Self> {
        if !mu.is_positive() {
            return Err(Error::NonPositiveMu { mu: mu.to_string() });
        }
        let s = sobolev_index(mu, n)?;
        Ok(Self { n, k, mu, lambda, s, sigma })
    }

    pub fn is_mass_critical(&self) -> bool {
        self.mu == Rational::new(4, self.n as i64)
    }

    /// Checks 4/n <= mu < mu*(n).
    pub fn mu_in_range(&self) -> bool {
        let lower = Rational::new(4, self.n as i64);
        self.mu >= lower && Finite(self.mu) < mu_star(self.n)
    }

    pub(crate) fn require_mu_range(&self) -> Result<()> {
        if self.mu_in_range() {
            Ok(())
        } else {
            Err(Error::MuRange {
                n: self.n,
                mu: self.mu.to_string(),
                mu_star: mu_star(self.n).to_string(),
            })
        }
    }
}

/// A complete exponent witness: the working pair, its inhomogeneous dual,
/// and the admissible pair derived from them.
#[derive(Clone, Copy, Debug)]
pub struct StrichartzSystem {
    pub ctx: NonlinearityContext,
    pub pair: ExponentPair,
    pub dual_pair: ExponentPair,
    pub derived_pair: ExponentPair,
}

/// Upper nonlinearity threshold: 4/(n-1) for n >= 2, infinite for n = 1.
pub fn mu_star(n: u32) -> ExtRational {
    if n >= 2 {
        ExtRational::new(4, n as i64 - 1)
    } else {
        Infinity
    }
}

/// Dispersive Sobolev index (mu n - 4) / (2 mu); may be negative, the
/// caller checks range.
pub fn sobolev_index(mu: Rational, n: u32) -> Result<Rational> {
    if !mu.is_positive() {
        return Err(Error::NonPositiveMu { mu: mu.to_string() });
    }
    let n = Rational::from_integer(n as i64);
    Ok((mu * n - Rational::from_integer(4)) / (Rational::from_integer(2) * mu))
}

fn half() -> Rational {
    Rational::new(1, 2)
}

/// Schrodinger-admissible: 2 <= l, p <= inf, 2/l + n/p = n/2, and the
/// triple (l, p, n) = (2, inf, 2) is excluded.
pub fn is_admissible(n: u32, pair: ExponentPair) -> bool {
    let two = ExtRational::integer(2);
    if pair.q < two || pair.r < two {
        return false;
    }
    if n == 2 && pair.q == two && pair.r == Infinity {
        return false;
    }
    let (u, v) = (pair.q.recip_rational(), pair.r.recip_rational());
    let n = Rational::from_integer(n as i64);
    Rational::from_integer(2) * u + n * v == n * half()
}

/// Schrodinger-acceptable: 1 <= q < inf, 2 <= r <= inf with the strict
/// scaling gap 1/q < n (1/2 - 1/r), or the endpoint (q, r) = (inf, 2).
pub fn is_acceptable(n: u32, pair: ExponentPair) -> bool {
    if pair.q == Infinity {
        return pair.r == ExtRational::integer(2);
    }
    if pair.q < ExtRational::integer(1) || pair.r < ExtRational::integer(2) {
        return false;
    }
    let (u, v) = (pair.q.recip_rational(), pair.r.recip_rational());
    let n = Rational::from_integer(n as i64);
    u < n * (half() - v)
}

/// Homogeneous scaling test: 2/q + n/r = n/2 - s with the dimension
/// dependent q-range (q >= 4 for n = 1, q > 2 for n = 2, q >= 2 otherwise)
/// and 2 <= r <= inf.
pub fn homogeneous_ok(n: u32, s: Rational, pair: ExponentPair) -> Result<bool> {
    let nq = Rational::from_integer(n as i64);
    if s >= nq * half() {
        return Err(Error::SobolevIndexRange { s: s.to_string(), n });
    }
    if pair.r < ExtRational::integer(2) {
        return Ok(false);
    }
    let range_ok = match n {
        1 => pair.q >= ExtRational::integer(4),
        2 => pair.q > ExtRational::integer(2),
        _ => pair.q >= ExtRational::integer(2),
    };
    if !range_ok {
        return Ok(false);
    }
    let (u, v) = (pair.q.recip_rational(), pair.r.recip_rational());
    Ok(Rational::from_integer(2) * u + nq * v == nq * half() - s)
}

/// Extended inhomogeneous compatibility between an acceptable pair and its
/// dual: the scaling relation 1/q + 1/qt = n/2 (1/rt' - 1/r), the shared
/// range 2 <= q, r, qt, rt <= inf, finiteness of r, rt for n = 2, and for
/// n >= 3 both ratio conditions together with 1/q < 1/qt'.
pub fn inhomogeneous_ok(n: u32, pair: ExponentPair, dual: ExponentPair) -> Result<bool> {
    for p in [pair, dual] {
        if !is_acceptable(n, p) {
            return Err(Error::NotAcceptable {
                q: p.q.to_string(),
                r: p.r.to_string(),
                n,
            });
        }
    }
    let two = ExtRational::integer(2);
    if pair.q < two || pair.r < two || dual.q < two || dual.r < two {
        return Ok(false);
    }
    let nq = Rational::from_integer(n as i64);
    let (uq, ur) = (pair.q.recip_rational(), pair.r.recip_rational());
    let (vq, vr) = (dual.q.recip_rational(), dual.r.recip_rational());
    // 1/rt' = 1 - 1/rt
    let scaling = uq + vq == nq * half() * (Rational::one() - vr - ur);
    if !scaling {
        return Ok(false);
    }
    match n {
        1 => Ok(true),
        2 => Ok(pair.r != Infinity && dual.r != Infinity),
        _ => {
            // 1/q < 1/qt' = 1 - 1/qt
            if uq >= Rational::one() - vq {
                return Ok(false);
            }
            // (n-2)/n <= r/rt <= n/(n-2), written on reciprocals so the
            // infinite endpoints come out right.
            let nm2 = nq - Rational::from_integer(2);
            Ok(nq * vr >= nm2 * ur && nq * ur >= nm2 * vr)
        }
    }
}

/// One scanned witness: the reciprocals are what the feasibility system
/// constrains, the exponents are what callers use.
fn witness_from_r(ctx: &NonlinearityContext, r: Rational) -> Option<(ExponentPair, ExponentPair)> {
    let mu = ctx.mu;
    let n = Rational::from_integer(ctx.n as i64);
    let one = Rational::one();
    let open_box = |u: Rational| u.is_positive() && u < half();

    let ur = r.recip();
    // q is pinned by mu/q + mu n / (2r) = 1.
    let uq = (one - mu * n * ur / Rational::from_integer(2)) / mu;
    // Duality: 1/qt = 1 - (mu+1)/q, 1/rt = 1 - (mu+1)/r.
    let uqt = one - (mu + one) * uq;
    let urt = one - (mu + one) * ur;

    if !(open_box(uq) && open_box(ur) && open_box(uqt) && open_box(urt)) {
        return None;
    }
    if ctx.n >= 3 {
        // 1/q + 1/qt < 1 and (n-2)/n < r/rt < n/(n-2), strictly.
        if uq + uqt >= one {
            return None;
        }
        let nm2 = n - Rational::from_integer(2);
        if !(n * urt > nm2 * ur && n * ur > nm2 * urt) {
            return None;
        }
    }
    // Acceptability gaps for both pairs: 1/q + n/r < n/2 and its dual
    // twin with the same spatial weight n.
    if uq + n * ur >= n * half() || uqt + n * urt >= n * half() {
        return None;
    }
    // Scaling identities; automatic given the pinning above, but the
    // postcondition is exact re-verification, so check them anyway.
    if Rational::from_integer(2) * uq + n * ur != n * half() - ctx.s {
        return None;
    }
    let total = Rational::from_integer(2) * (uq + uqt) + n * (ur + urt);
    if total != n {
        return None;
    }
    if one - uqt != (mu + one) * uq || one - urt != (mu + one) * ur {
        return None;
    }
    if mu * uq + mu * n * ur / Rational::from_integer(2) != one || mu * ur >= one {
        return None;
    }
    let fin = |u: Rational| Finite(u.recip());
    Some((
        ExponentPair::new(fin(uq), fin(ur)),
        ExponentPair::new(fin(uqt), fin(urt)),
    ))
}

/// Candidate r values in increasing (denominator, numerator) order, reduced
/// fractions only. The feasible window (max(2, mu+1), 2(mu+1)) comes from
/// the open-box constraints on 1/r and 1/rt.
fn r_candidates(mu: Rational, bound: u32) -> impl Iterator<Item = Rational> {
    let lo = std::cmp::max(Rational::from_integer(2), mu + Rational::one());
    let hi = Rational::from_integer(2) * (mu + Rational::one());
    (1..=bound as i64).flat_map(move |den| {
        let first = (lo * Rational::from_integer(den)).floor().to_integer();
        let last = (hi * Rational::from_integer(den)).ceil().to_integer();
        (first..=last).filter_map(move |num| {
            let r = Rational::new(num, den);
            // reduced fractions only, so each rational is visited once
            (*r.denom() == den && r > lo && r < hi).then_some(r)
        })
    })
}

/// Every feasibility witness on the reciprocal lattice with denominators up
/// to `bound`, in deterministic scan order.
pub fn scan_witnesses(ctx: &NonlinearityContext, bound: u32) -> Result<Vec<StrichartzSystem>> {
    ctx.require_mu_range()?;
    let mut out = Vec::new();
    for r in r_candidates(ctx.mu, bound) {
        if let Some((pair, dual)) = witness_from_r(ctx, r) {
            let derived = derived_pair(ctx, pair)?;
            out.push(StrichartzSystem {
                ctx: *ctx,
                pair,
                dual_pair: dual,
                derived_pair: derived,
            });
        }
    }
    Ok(out)
}

/// First witness of the deterministic scan at the given denominator bound.
///
/// Infeasibility at the bound is an explicit error carrying the bound; it
/// is not a proof that no witness exists.
pub fn solve_system_with_bound(ctx: &NonlinearityContext, bound: u32) -> Result<StrichartzSystem> {
    ctx.require_mu_range()?;
    for r in r_candidates(ctx.mu, bound) {
        if let Some((pair, dual)) = witness_from_r(ctx, r) {
            let derived = derived_pair(ctx, pair)?;
            return Ok(StrichartzSystem {
                ctx: *ctx,
                pair,
                dual_pair: dual,
                derived_pair: derived,
            });
        }
    }
    Err(Error::Infeasible {
        n: ctx.n,
        mu: ctx.mu.to_string(),
        bound,
    })
}

/// `solve_system_with_bound` at the default bound.
pub fn solve_system(ctx: &NonlinearityContext) -> Result<StrichartzSystem> {
    solve_system_with_bound(ctx, DEFAULT_DENOMINATOR_BOUND)
}

/// The admissible pair carried by a witness: 1/l = mu n / (4r),
/// 1/p = 1/2 - mu/(2r). Errors if the result fails admissibility, which
/// would mean the witness itself is inconsistent.
pub fn derived_pair(ctx: &NonlinearityContext, pair: ExponentPair) -> Result<ExponentPair> {
    let r = match pair.r {
        Finite(x) if !x.is_zero() => x,
        other => return Err(Error::DegenerateExponent { r: other.to_string() }),
    };
    let mu = ctx.mu;
    let n = Rational::from_integer(ctx.n as i64);
    let ul = mu * n / (Rational::from_integer(4) * r);
    let up = half() - mu / (Rational::from_integer(2) * r);
    let l = if ul.is_zero() { Infinity } else { Finite(ul.recip()) };
    let p = if up.is_zero() { Infinity } else { Finite(up.recip()) };
    let out = ExponentPair::new(l, p);
    // mu n / (2r) + mu / q = 1 must carry over from the witness.
    let uq = pair.q.recip_rational();
    let identity = mu * n / (Rational::from_integer(2) * r) + mu * uq == Rational::one();
    if !identity || !is_admissible(ctx.n, out) {
        return Err(Error::DerivedNotAdmissible {
            l: l.to_string(),
            p: p.to_string(),
        });
    }
    Ok(out)
}

/// Mass-critical contraction exponents: the working pair lbar = pbar =
/// mu + 2 = (2n+4)/n and its dual conjugates 1/lt' = (mu+1)/lbar,
/// 1/pt' = (mu+1)/pbar. Requires mu = 4/n exactly.
pub fn contraction_exponents(
    ctx: &NonlinearityContext,
) -> Result<(ExtRational, ExtRational, ExtRational, ExtRational)> {
    if !ctx.is_mass_critical() {
        return Err(Error::NotMassCritical {
            mu: ctx.mu.to_string(),
            n: ctx.n,
        });
    }
    let lbar = ctx.mu + Rational::from_integer(2);
    let dual_recip = (ctx.mu + Rational::one()) / lbar;
    let lt_prime = Finite(dual_recip.recip());
    let pair = ExponentPair::new(Finite(lbar), Finite(lbar));
    debug_assert!(is_admissible(ctx.n, pair));
    Ok((Finite(lbar), Finite(lbar), lt_prime, lt_prime))
}

/// Re-verify every constraint a stored witness claims, exactly.
pub fn verify_system(sys: &StrichartzSystem) -> bool {
    let ctx = &sys.ctx;
    let pair_ok = match witness_from_r(ctx, match sys.pair.r {
        Finite(x) => x,
        Infinity => return false,
    }) {
        Some((p, d)) => p == sys.pair && d == sys.dual_pair,
        None => false,
    };
    let hom = homogeneous_ok(ctx.n, ctx.s, sys.pair).unwrap_or(false);
    let acc = is_acceptable(ctx.n, sys.pair) && is_acceptable(ctx.n, sys.dual_pair);
    let inhom = inhomogeneous_ok(ctx.n, sys.pair, sys.dual_pair).unwrap_or(false);
    let derived = derived_pair(ctx, sys.pair)
        .map(|d| d == sys.derived_pair && is_admissible(ctx.n, d))
        .unwrap_or(false);
    pair_ok && hom && acc && inhom && derived
}
