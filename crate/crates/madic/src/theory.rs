//! Quantitative bounds and the marked-interval machinery.
//!
//! Writing w = m^α, the oscillation of any measure obeys the two-sided
//! estimate: every measure has
//!
//!   ĉ_loc ⩾ max_{i,j} ( w^i/⌊w^i⌋, ⌈w^j⌉/w^j )      (lower bound)
//!
//! in the limit, while the greedy uniform measure achieves
//!
//!   ĉ ⩽ ⌈w⌉/⌊w⌋                                      (upper bound).
//!
//! The lower-bound side runs through a pigeonhole selection: among
//! positive z₁..z_n with Σ z_j = w and n < u, one z_j always lands in
//! [τ, w/⌈w⌉] ∪ [w/⌊w⌋−δ, w] for τ = ⌊w⌋δ/u. Applied to the per-child
//! density ratios z = f_{n+1}/f_n of a support interval (which sum to w),
//! this marks at least one child of every interval as either *little*
//! (ratio in the first range) or *big* (second range). The right
//! endpoint of the big range is closed here: a single support child
//! carries the ratio exactly w, and the selection argument excludes only
//! the open middle gap, so closing the endpoint is what makes the
//! mark-existence guarantee hold verbatim.
//!
//! Members of the marked level sets Γ_n carry at least the fraction
//! K = τ·m^{−α} of their parent's mass, so the mass avoiding Γ_1..Γ_{n′}
//! decays geometrically like (1−K)^{n′}. K is irrational; checks use an
//! exact rational under-approximation K_lo ≤ K (64-bit tight), which
//! only weakens the asserted bound and keeps it sound.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::measure::TreeMeasure;
use crate::space::{AlphaParam, Interval, WScaled};

// ---------------------------------------------------------------------------
// Exact floor/ceiling powers and the bound pair
// ---------------------------------------------------------------------------

/// Exact (⌊m^{αi}⌋, ⌈m^{αi}⌉) via the integer q-th root of m^{pi}.
pub fn floor_ceil_power(alpha: &AlphaParam, i: u32) -> (BigUint, BigUint) {
    let mp = BigUint::from(alpha.m()).pow(alpha.p() * i);
    let fl = mp.nth_root(alpha.q());
    let exact = fl.pow(alpha.q()) == mp;
    let ceil = if exact { fl.clone() } else { &fl + 1u32 };
    (fl, ceil)
}

/// Which term family attains the lower bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermKind {
    /// w^i/⌊w^i⌋.
    FloorRatio,
    /// ⌈w^j⌉/w^j.
    CeilRatio,
}

impl TermKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TermKind::FloorRatio => "i",
            TermKind::CeilRatio => "j",
        }
    }
}

/// One term of the lower-bound maximum, with its exact value.
#[derive(Clone, Debug)]
pub struct BoundTerm {
    pub kind: TermKind,
    pub index: u32,
    pub value: WScaled,
}

/// The bound pair at a finite search cap.
#[derive(Clone, Debug)]
pub struct BoundReport {
    pub alpha: AlphaParam,
    pub i_max: u32,
    pub lower: BoundTerm,
    pub upper: BigRational,
}

impl BoundReport {
    pub fn lower_le_upper(&self) -> bool {
        !self
            .alpha
            .cmp_scaled(&self.lower.value, &WScaled::from_rational(self.upper.clone()))
            .is_gt()
    }

    /// key=value export lines.
    pub fn export(&self) -> String {
        format!(
            "m={}\nalpha={}/{}\nI_max={}\nlower_approx={}\nlower_kind={}\nlower_index={}\nupper={}\n",
            self.alpha.m(),
            self.alpha.p(),
            self.alpha.q(),
            self.i_max,
            self.alpha.approx_fixed(&self.lower.value, 6),
            self.lower.kind.as_str(),
            self.lower.index,
            format_rational(&self.upper),
        )
    }
}

/// Renders a rational without the denominator when it is 1.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// The capped maximum over i, j ∈ [1, i_max] of w^i/⌊w^i⌋ and ⌈w^j⌉/w^j,
/// with exact term comparisons. Ties keep the earlier term, the i-family
/// ranking before the j-family. For integer w every term is exactly 1.
///
/// The true supremum ranges over all of ℕ; the capped value is monotone
/// in i_max and reported with its argmax.
pub fn lower_bound(alpha: &AlphaParam, i_max: u32) -> BoundTerm {
    assert!(i_max >= 1, "search cap must be at least 1");
    let mut best: Option<BoundTerm> = None;
    let mut consider = |term: BoundTerm| {
        let improves = match &best {
            None => true,
            Some(cur) => alpha.cmp_scaled(&term.value, &cur.value).is_gt(),
        };
        if improves {
            best = Some(term);
        }
    };
    for i in 1..=i_max {
        let (fl, _) = floor_ceil_power(alpha, i);
        let value = WScaled::new(
            i as i64,
            BigRational::new(BigInt::one(), BigInt::from(fl)),
        );
        consider(BoundTerm { kind: TermKind::FloorRatio, index: i, value });
    }
    for j in 1..=i_max {
        let (_, ceil) = floor_ceil_power(alpha, j);
        let value = WScaled::new(-(j as i64), BigRational::from_integer(BigInt::from(ceil)));
        consider(BoundTerm { kind: TermKind::CeilRatio, index: j, value });
    }
    best.expect("at least one term considered")
}

/// ⌈w⌉/⌊w⌋ in lowest terms, the oscillation of the greedy measure.
pub fn upper_bound(alpha: &AlphaParam) -> BigRational {
    BigRational::new(BigInt::from(alpha.ceil_w()), BigInt::from(alpha.floor_w()))
}

/// Evaluates both bounds and checks lower ⩽ upper exactly (the lower
/// bound applies to every measure, in particular to the greedy one).
pub fn cross_check_bounds(alpha: &AlphaParam, i_max: u32) -> BoundReport {
    let report = BoundReport {
        alpha: alpha.clone(),
        i_max,
        lower: lower_bound(alpha, i_max),
        upper: upper_bound(alpha),
    };
    debug_assert!(report.lower_le_upper());
    report
}

// ---------------------------------------------------------------------------
// The pigeonhole selection lemma (rational w)
// ---------------------------------------------------------------------------

/// The explicit selection threshold τ = ⌊w⌋δ/u for non-integer rational
/// w > 1, rational u > 1, and δ with w/⌊w⌋ − δ > 1.
pub fn dirichlet_tau(
    w: &BigRational,
    u: &BigRational,
    delta: &BigRational,
) -> Result<BigRational> {
    if *w <= BigRational::one() || *u <= BigRational::one() {
        return Err(Error::InvalidParam("w and u must exceed 1".into()));
    }
    if w.is_integer() {
        return Err(Error::InvalidParam("w must not be an integer".into()));
    }
    if !delta.is_positive() {
        return Err(Error::InvalidParam("delta must be positive".into()));
    }
    let floor_w = w.floor();
    if w / &floor_w - delta <= BigRational::one() {
        return Err(Error::InvalidParam(format!(
            "delta={delta} too large: w/floor(w) - delta must exceed 1"
        )));
    }
    Ok(floor_w * delta / u)
}

/// Picks the smallest (1-based) index j with
/// z_j ∈ [τ, w/⌈w⌉] ∪ [w/⌊w⌋−δ, w], given positive z₁..z_n summing to w
/// with n < u. The selection always succeeds; the right endpoint w is
/// included (a single z forces z₁ = w).
pub fn dirichlet_select(
    zs: &[BigRational],
    w: &BigRational,
    u: &BigRational,
    delta: &BigRational,
) -> Result<usize> {
    let tau = dirichlet_tau(w, u, delta)?;
    if zs.is_empty() {
        return Err(Error::InvalidParam("need at least one z".into()));
    }
    if BigRational::from_integer(BigInt::from(zs.len())) >= *u {
        return Err(Error::InvalidParam(format!("need len(zs)={} < u={u}", zs.len())));
    }
    if zs.iter().any(|z| !z.is_positive()) {
        return Err(Error::InvalidParam("every z must be positive".into()));
    }
    let total: BigRational = zs.iter().cloned().sum();
    if total != *w {
        return Err(Error::InvalidParam(format!("sum of z is {total}, expected w={w}")));
    }
    let floor_w = w.floor();
    let ceil_w = w.ceil();
    let little_hi = w / &ceil_w;
    let big_lo = w / &floor_w - delta;
    for (idx, z) in zs.iter().enumerate() {
        if (*z >= tau && *z <= little_hi) || (*z >= big_lo && z <= w) {
            return Ok(idx + 1);
        }
    }
    unreachable!("pigeonhole selection cannot fail on valid input")
}

// ---------------------------------------------------------------------------
// Mark classification and marked level sets
// ---------------------------------------------------------------------------

/// Classification of a support child by its density ratio
/// z = f_{n+1}/f_n = w·mass(child)/mass(parent).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarkClass {
    /// z ∈ [τ, w/⌈w⌉].
    Little,
    /// z ∈ [w/⌊w⌋−δ, w], right endpoint closed.
    Big,
    Unmarked,
}

impl MarkClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            MarkClass::Little => "little",
            MarkClass::Big => "big",
            MarkClass::Unmarked => "unmarked",
        }
    }
}

/// One classified child: the fraction t = mass(child)/mass(parent) with
/// ratio z = w·t.
#[derive(Clone, Debug)]
pub struct ClassifiedChild {
    pub digits: Vec<u32>,
    pub class: MarkClass,
    pub mass_fraction: BigRational,
}

impl ClassifiedChild {
    pub fn ratio(&self) -> WScaled {
        WScaled::new(1, self.mass_fraction.clone())
    }
}

/// Classifies every support child of the interval. The per-child ratios
/// z = w·t sum to w exactly because the fractions t sum to 1.
///
/// Membership tests never materialize w: z ⩾ τ is w·t ⩾ τ, decided by
/// q-th powers; z ⩽ w/⌈w⌉ is t ⩽ 1/⌈w⌉, a rational comparison;
/// z ⩾ w/⌊w⌋−δ is w·(t−1/⌊w⌋) ⩾ −δ.
pub fn classify_children(
    mu: &TreeMeasure,
    alpha: &AlphaParam,
    iv: &Interval,
    tau: &BigRational,
    delta: &BigRational,
) -> Result<Vec<ClassifiedChild>> {
    if alpha.m() != mu.base() {
        return Err(Error::BaseMismatch(mu.base(), alpha.m()));
    }
    if alpha.is_degenerate() {
        return Err(Error::InvalidParam(
            "mark classification needs non-integer w".into(),
        ));
    }
    if iv.level() >= mu.depth() {
        return Err(Error::LevelBeyondDepth { level: iv.level() + 1, depth: mu.depth() });
    }
    let parent_mass = mu
        .get(iv.prefix().digits())
        .ok_or_else(|| Error::NotInSupport(iv.to_string()))?;
    let inv_floor = BigRational::new(BigInt::one(), BigInt::from(alpha.floor_w()));
    let inv_ceil = BigRational::new(BigInt::one(), BigInt::from(alpha.ceil_w()));
    let neg_delta = -delta.clone();
    let mut out = Vec::new();
    for (digits, mass) in mu.support_children(iv.prefix().digits()) {
        let t = mass / parent_mass;
        let little = !alpha.cmp_w_times(&t, tau).is_lt() && t <= inv_ceil;
        let big = !alpha.cmp_w_times(&(&t - &inv_floor), &neg_delta).is_lt()
            && t <= BigRational::one();
        let class = if little {
            MarkClass::Little
        } else if big {
            MarkClass::Big
        } else {
            MarkClass::Unmarked
        };
        out.push(ClassifiedChild { digits: digits.clone(), class, mass_fraction: t });
    }
    Ok(out)
}

/// A marked entry of some Γ_n.
#[derive(Clone, Debug)]
pub struct MarkEntry {
    pub class: MarkClass,
    pub mass_fraction: BigRational,
}

/// A mark-machinery failure, reported as data: both kinds indicate an
/// internal inconsistency, since the selection lemma guarantees them.
#[derive(Clone, Debug)]
pub enum MarkViolation {
    NoMarkedChild { interval: Interval },
    HypothesisFail { interval: Interval, marked_mass: BigRational, required: BigRational },
}

impl fmt::Display for MarkViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarkViolation::NoMarkedChild { interval } => {
                write!(f, "interval {interval} has no marked child")
            }
            MarkViolation::HypothesisFail { interval, marked_mass, required } => write!(
                f,
                "interval {interval}: marked mass {marked_mass} below K_lo bound {required}"
            ),
        }
    }
}

/// Per-level marked sets Γ_1..Γ_N with the parameters that produced them.
#[derive(Clone, Debug)]
pub struct MarkTable {
    pub alpha: AlphaParam,
    pub delta: BigRational,
    pub tau: BigRational,
    /// The selection cap: m, or m+1 when some interval branches fully.
    pub u: u64,
    /// Exact rational K_lo ≤ K = τ·m^{−α}.
    pub k_lo: BigRational,
    /// levels[n] is Γ_{n+1} (marked intervals of level n+1).
    pub levels: Vec<BTreeMap<Vec<u32>, MarkEntry>>,
    pub violations: Vec<MarkViolation>,
}

impl MarkTable {
    pub fn gamma(&self, level: usize) -> Option<&BTreeMap<Vec<u32>, MarkEntry>> {
        level.checked_sub(1).and_then(|i| self.levels.get(i))
    }

    pub fn total_marked(&self) -> usize {
        self.levels.iter().map(|g| g.len()).sum()
    }

    /// `mark <level> <prefix> <little|big> (1,<t>) ~<approx>` lines,
    /// preceded by the parameter header.
    pub fn export(&self, mu: &TreeMeasure) -> String {
        let mut out = format!(
            "m={}\nalpha={}/{}\ndelta={}\ntau={}\nu={}\nK_lo={}\n",
            self.alpha.m(),
            self.alpha.p(),
            self.alpha.q(),
            format_rational(&self.delta),
            format_rational(&self.tau),
            self.u,
            format_rational(&self.k_lo),
        );
        for (i, gamma) in self.levels.iter().enumerate() {
            for (digits, entry) in gamma {
                let ratio = WScaled::new(1, entry.mass_fraction.clone());
                out.push_str(&format!(
                    "mark {} {} {} (1,{}/{}) ~{}\n",
                    i + 1,
                    mu.prefix(digits),
                    entry.class.as_str(),
                    entry.mass_fraction.numer(),
                    entry.mass_fraction.denom(),
                    self.alpha.approx_fixed(&ratio, 6),
                ));
            }
        }
        out
    }
}

/// A rational r ≤ m^{−α} with r^q·m^p ≤ 1, within 2^{−bits} of the true
/// value: r = ⌊2^bits·m^{−α}⌋/2^bits.
fn w_inverse_lower(alpha: &AlphaParam, bits: u32) -> BigRational {
    let mp = BigUint::from(alpha.m()).pow(alpha.p());
    let scaled = (BigUint::one() << (bits as usize * alpha.q() as usize)) / mp;
    let root = scaled.nth_root(alpha.q());
    BigRational::new(BigInt::from(root), BigInt::from(BigUint::one() << bits as usize))
}

/// A rational lower approximation of w itself: ⌊2^bits·w⌋/2^bits.
fn w_lower(alpha: &AlphaParam, bits: u32) -> BigRational {
    let mp = BigUint::from(alpha.m()).pow(alpha.p());
    let scaled = mp << (bits as usize * alpha.q() as usize);
    let root = scaled.nth_root(alpha.q());
    BigRational::new(BigInt::from(root), BigInt::from(BigUint::one() << bits as usize))
}

/// The default δ: min(1/10, (w/⌊w⌋ − 1)/2), taken as an exact rational
/// below the irrational candidate. Requires non-integer w.
pub fn default_delta(alpha: &AlphaParam) -> Result<BigRational> {
    if alpha.is_degenerate() {
        return Err(Error::InvalidParam("delta needs non-integer w".into()));
    }
    let floor_w = BigRational::from_integer(BigInt::from(alpha.floor_w()));
    let mut bits = 64;
    let candidate = loop {
        let w_lo = w_lower(alpha, bits);
        if w_lo > floor_w {
            break (w_lo - &floor_w) / (BigRational::from_integer(BigInt::from(2)) * &floor_w);
        }
        bits *= 2;
    };
    let tenth = BigRational::new(BigInt::one(), BigInt::from(10));
    Ok(candidate.min(tenth))
}

/// Checks w/⌊w⌋ − δ > 1 exactly: m^p > (⌊w⌋(1+δ))^q.
pub fn delta_valid(alpha: &AlphaParam, delta: &BigRational) -> bool {
    if !delta.is_positive() {
        return false;
    }
    let bound = BigRational::from_integer(BigInt::from(alpha.floor_w()))
        * (BigRational::one() + delta);
    let mp = BigInt::from(alpha.m()).pow(alpha.p());
    let lhs = mp * bound.denom().pow(alpha.q());
    let rhs = bound.numer().pow(alpha.q());
    lhs > rhs
}

/// Builds Γ_{n+1} for every level n by classifying all support children,
/// then verifies the two guarantees the marks carry: every support
/// interval has a marked child, and the marked children of an interval
/// hold at least K_lo times its mass. δ and τ default to
/// [`default_delta`] and ⌊w⌋δ/u.
///
/// The cap u is m, except when some support interval has all m children
/// in support: the selection lemma needs n < u strictly, so u becomes
/// m+1 there (with the correspondingly smaller τ).
pub fn build_marked_sets(
    mu: &TreeMeasure,
    alpha: &AlphaParam,
    tau: Option<BigRational>,
    delta: Option<BigRational>,
) -> Result<MarkTable> {
    if alpha.m() != mu.base() {
        return Err(Error::BaseMismatch(mu.base(), alpha.m()));
    }
    if alpha.is_degenerate() {
        return Err(Error::InvalidParam("marked sets need non-integer w".into()));
    }
    let delta = match delta {
        Some(d) => {
            if !delta_valid(alpha, &d) {
                return Err(Error::InvalidParam(format!(
                    "delta={d} too large: w/floor(w) - delta must exceed 1"
                )));
            }
            d
        }
        None => default_delta(alpha)?,
    };
    // full branching at any node forces the cap one past the base
    let mut max_children = 0usize;
    for level in 0..mu.depth() {
        for (digits, _) in mu.level_nodes(level) {
            max_children = max_children.max(mu.support_children(digits).len());
        }
    }
    let u = if max_children as u64 == mu.base() { mu.base() + 1 } else { mu.base() };
    let tau = match tau {
        Some(t) => {
            if !t.is_positive() {
                return Err(Error::InvalidParam("tau must be positive".into()));
            }
            t
        }
        None => {
            BigRational::from_integer(BigInt::from(alpha.floor_w())) * &delta
                / BigRational::from_integer(BigInt::from(u))
        }
    };
    let k_lo = &tau * w_inverse_lower(alpha, 64);

    let mut levels: Vec<BTreeMap<Vec<u32>, MarkEntry>> = vec![BTreeMap::new(); mu.depth()];
    let mut violations = Vec::new();
    for level in 0..mu.depth() {
        for (digits, mass) in mu.level_nodes(level) {
            let iv = Interval::new(mu.prefix(digits));
            let children = classify_children(mu, alpha, &iv, &tau, &delta)?;
            let mut marked_mass = BigRational::zero();
            let mut any = false;
            for child in children {
                if child.class != MarkClass::Unmarked {
                    any = true;
                    marked_mass += &child.mass_fraction * mass;
                    levels[level].insert(
                        child.digits,
                        MarkEntry { class: child.class, mass_fraction: child.mass_fraction },
                    );
                }
            }
            if !any {
                violations.push(MarkViolation::NoMarkedChild { interval: iv });
                continue;
            }
            let required = &k_lo * mass;
            if marked_mass < required {
                violations.push(MarkViolation::HypothesisFail {
                    interval: iv,
                    marked_mass,
                    required,
                });
            }
        }
    }
    Ok(MarkTable { alpha: alpha.clone(), delta, tau, u, k_lo, levels, violations })
}

// ---------------------------------------------------------------------------
// Avoidance decay
// ---------------------------------------------------------------------------

/// One row of the decay check: mass avoiding Γ_1..Γ_{n′} vs the bound.
#[derive(Clone, Debug)]
pub struct AvoidanceRow {
    pub n_prime: usize,
    pub avoid_mass: BigRational,
    pub bound: BigRational,
    pub ok: bool,
}

#[derive(Clone, Debug)]
pub struct AvoidanceReport {
    pub d_consec: u32,
    pub k_lo: BigRational,
    pub rows: Vec<AvoidanceRow>,
    pub all_ok: bool,
}

impl AvoidanceReport {
    pub fn export(&self) -> String {
        let mut out = format!("d_consec={}\nK_lo={}\n", self.d_consec, format_rational(&self.k_lo));
        for row in &self.rows {
            out.push_str(&format!(
                "avoid n'={} mass={} bound={} {}\n",
                row.n_prime,
                format_rational(&row.avoid_mass),
                format_rational(&row.bound),
                if row.ok { "ok" } else { "VIOLATED" },
            ));
        }
        out
    }
}

/// Checks μ(avoiding Γ_1..Γ_{n′}) ≤ (1−K_lo)^{n′}·x₀ for every
/// n′ = 1..=n_max, exact. For d_consec = d > 1 the measure is block
/// lifted to base m^d and the marks are rebuilt there (with default δ
/// and τ for the lifted scale w^d), turning runs of d consecutive marks
/// into single lifted marks.
pub fn avoidance_decay_check(
    mu: &TreeMeasure,
    table: &MarkTable,
    d_consec: u32,
    n_max: usize,
) -> Result<AvoidanceReport> {
    if d_consec == 0 {
        return Err(Error::InvalidParam("d_consec must be >= 1".into()));
    }
    if d_consec > 1 {
        let lifted = mu.block_lift(d_consec)?;
        let lifted_alpha = table.alpha.lift(d_consec)?;
        if n_max > lifted.depth() {
            return Err(Error::LevelBeyondDepth {
                level: n_max * d_consec as usize,
                depth: mu.depth(),
            });
        }
        let lifted_table = build_marked_sets(&lifted, &lifted_alpha, None, None)?;
        let mut report = avoidance_decay_check(&lifted, &lifted_table, 1, n_max)?;
        report.d_consec = d_consec;
        return Ok(report);
    }
    if n_max > mu.depth() {
        return Err(Error::LevelBeyondDepth { level: n_max, depth: mu.depth() });
    }
    let one_minus_k = BigRational::one() - &table.k_lo;
    let mut rows = Vec::with_capacity(n_max);
    let mut survivors: Vec<Vec<u32>> = vec![Vec::new()];
    let mut bound = mu.root_mass().clone();
    for n in 1..=n_max {
        let gamma = table.gamma(n);
        let mut next = Vec::new();
        let mut avoid_mass = BigRational::zero();
        for parent in &survivors {
            for (child, mass) in mu.support_children(parent) {
                let marked = gamma.map(|g| g.contains_key(child)).unwrap_or(false);
                if !marked {
                    avoid_mass += mass;
                    next.push(child.clone());
                }
            }
        }
        bound *= &one_minus_k;
        let ok = avoid_mass <= bound;
        rows.push(AvoidanceRow { n_prime: n, avoid_mass, bound: bound.clone(), ok });
        survivors = next;
    }
    let all_ok = rows.iter().all(|r| r.ok);
    Ok(AvoidanceReport { d_consec: 1, k_lo: table.k_lo.clone(), rows, all_ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{build_greedy, build_random, build_uniform, BranchingSpec, RandomParams};
    use crate::space::Prefix;
    use std::cmp::Ordering;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn alpha(m: u64, p: u32, q: u32) -> AlphaParam {
        AlphaParam::new(m, p, q).unwrap()
    }

    #[test]
    fn floor_ceil_power_known_values() {
        let a = alpha(2, 1, 2);
        assert_eq!(floor_ceil_power(&a, 2), (BigUint::from(2u32), BigUint::from(2u32)));
        assert_eq!(floor_ceil_power(&a, 3), (BigUint::from(2u32), BigUint::from(3u32)));
        let a = alpha(3, 5, 6);
        assert_eq!(floor_ceil_power(&a, 1), (BigUint::from(2u32), BigUint::from(3u32)));
    }

    #[test]
    fn floor_ceil_power_root_contract() {
        for (m, p, q) in [(2u64, 1u32, 2u32), (3, 5, 6), (7, 2, 3), (11, 1, 3)] {
            let a = alpha(m, p, q);
            for i in 1..=12u32 {
                let (fl, ceil) = floor_ceil_power(&a, i);
                let mp = BigUint::from(m).pow(p * i);
                assert!(fl.pow(q) <= mp);
                assert!((&fl + 1u32).pow(q) > mp);
                assert!(ceil == fl || ceil == &fl + 1u32);
                assert_eq!(ceil == fl, fl.pow(q) == mp);
            }
        }
    }

    #[test]
    fn lower_bound_sqrt2() {
        let a = alpha(2, 1, 2);
        let term = lower_bound(&a, 8);
        // √2 attained at i=1; the exact ties at i=3 and j=1 lose to it
        assert_eq!(term.kind, TermKind::FloorRatio);
        assert_eq!(term.index, 1);
        assert_eq!(a.qth_power(&term.value), rat(2, 1));
        assert_eq!(a.approx_fixed(&term.value, 6), "1.414214");
    }

    #[test]
    fn lower_bound_base3() {
        let a = alpha(3, 5, 6);
        let term = lower_bound(&a, 8);
        assert_eq!((term.kind, term.index), (TermKind::FloorRatio, 1));
        // (w/2)^6 = 3^5/64
        assert_eq!(a.qth_power(&term.value), BigRational::new(BigInt::from(243), BigInt::from(64)));
        assert_eq!(a.approx_fixed(&term.value, 6), "1.249025");
        // the j=1 term 3/w is smaller: (3/w)^6 = 729/243 = 3 < 243/64
        let j1 = WScaled::new(-1, rat(3, 1));
        assert!(a.cmp_scaled(&j1, &term.value).is_lt());
    }

    #[test]
    fn lower_bound_cube_root_five() {
        let a = alpha(5, 1, 3);
        let term = lower_bound(&a, 8);
        // floor(w) = 1, so the i=1 term is w itself
        assert_eq!((term.kind, term.index), (TermKind::FloorRatio, 1));
        assert_eq!(a.qth_power(&term.value), rat(5, 1));
        // the i=3 term w³/⌊w³⌋ = 5/5 is exactly 1
        let (fl3, _) = floor_ceil_power(&a, 3);
        assert_eq!(fl3, BigUint::from(5u32));
        assert_eq!(upper_bound(&a), rat(2, 1));
    }

    #[test]
    fn lower_bound_trivial_for_integer_w() {
        let a = alpha(4, 1, 2);
        let term = lower_bound(&a, 16);
        assert_eq!(
            a.cmp_scaled(&term.value, &WScaled::one()),
            Ordering::Equal,
            "integer w must give the trivial estimate 1"
        );
        assert_eq!(upper_bound(&a), BigRational::one());
    }

    #[test]
    fn lower_bound_monotone_in_cap() {
        for (m, p, q) in [(2u64, 1u32, 2u32), (3, 5, 6), (7, 2, 3), (2, 7, 8)] {
            let a = alpha(m, p, q);
            let mut prev: Option<WScaled> = None;
            for cap in [1u32, 2, 4, 8, 16, 32] {
                let term = lower_bound(&a, cap);
                if let Some(p) = &prev {
                    assert!(!a.cmp_scaled(&term.value, p).is_lt());
                }
                prev = Some(term.value);
            }
        }
    }

    #[test]
    fn cross_check_upper_dominates() {
        for (m, p, q) in [(2u64, 1, 2), (3, 5, 6), (5, 1, 3), (7, 2, 3), (2, 7, 8), (16, 7, 8)] {
            let report = cross_check_bounds(&alpha(m, p as u32, q as u32), 32);
            assert!(report.lower_le_upper(), "m={m} alpha={p}/{q}");
            assert!(!report
                .alpha
                .cmp_scaled(&report.lower.value, &WScaled::one())
                .is_lt());
        }
    }

    #[test]
    fn bound_export_format() {
        let report = cross_check_bounds(&alpha(2, 1, 2), 32);
        assert_eq!(
            report.export(),
            "m=2\nalpha=1/2\nI_max=32\nlower_approx=1.414214\nlower_kind=i\nlower_index=1\nupper=2\n"
        );
    }

    #[test]
    fn dirichlet_tau_formula() {
        assert_eq!(dirichlet_tau(&rat(5, 2), &rat(3, 1), &rat(1, 10)).unwrap(), rat(1, 15));
        assert_eq!(dirichlet_tau(&rat(3, 2), &rat(2, 1), &rat(1, 10)).unwrap(), rat(1, 20));
        // delta too large: w/floor - delta = 5/4 - 2 < 1
        assert!(dirichlet_tau(&rat(5, 2), &rat(3, 1), &rat(2, 1)).is_err());
        // integer w rejected
        assert!(dirichlet_tau(&rat(3, 1), &rat(3, 1), &rat(1, 10)).is_err());
        assert!(dirichlet_tau(&rat(1, 2), &rat(3, 1), &rat(1, 10)).is_err());
    }

    #[test]
    fn dirichlet_select_examples() {
        let w = rat(5, 2);
        let u = rat(3, 1);
        let delta = rat(1, 10);
        // little window [1/15, 5/6], big window [23/20, 5/2]
        let zs = [rat(9, 10), rat(9, 10), rat(7, 10)];
        assert_eq!(dirichlet_select(&zs, &w, &u, &delta).unwrap(), 3);
        let zs = [rat(6, 5), rat(13, 10)];
        assert_eq!(dirichlet_select(&zs, &w, &u, &delta).unwrap(), 1);
        // ⌈w⌉ copies of w/⌈w⌉ hit the little endpoint (needs u > ⌈w⌉)
        let zs = [rat(5, 6), rat(5, 6), rat(5, 6)];
        assert_eq!(dirichlet_select(&zs, &w, &rat(4, 1), &delta).unwrap(), 1);
        // a single z is w itself: the closed right endpoint
        let zs = [rat(5, 2)];
        assert_eq!(dirichlet_select(&zs, &w, &u, &delta).unwrap(), 1);
    }

    #[test]
    fn dirichlet_select_rejects_bad_input() {
        let w = rat(5, 2);
        let u = rat(3, 1);
        let delta = rat(1, 10);
        assert!(dirichlet_select(&[rat(1, 2), rat(1, 2)], &w, &u, &delta).is_err());
        assert!(dirichlet_select(&[rat(5, 6), rat(5, 6), rat(5, 6)], &w, &u, &delta).is_err());
        assert!(dirichlet_select(&[], &w, &u, &delta).is_err());
        assert!(dirichlet_select(&[rat(3, 1), rat(-1, 2)], &w, &u, &delta).is_err());
    }

    #[test]
    fn dirichlet_select_randomized_sweep() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            // random non-integer rational w in (1, 10)
            let (w, floor_w) = loop {
                let num = rng.gen_range(11..1000i64);
                let den = rng.gen_range(2..100i64);
                let w = rat(num, den);
                if w > BigRational::one() && w < rat(10, 1) && !w.is_integer() {
                    let fl = w.floor();
                    break (w, fl);
                }
            };
            let n = rng.gen_range(1..=9usize);
            let u = BigRational::from_integer(BigInt::from(n as i64))
                + rat(rng.gen_range(1..20), 19);
            // delta strictly below w/floor - 1
            let gap = &w / &floor_w - BigRational::one();
            let delta = gap * rat(1, rng.gen_range(2..10));
            // positive rationals summing to w
            let weights: Vec<i64> = (0..n).map(|_| rng.gen_range(1..50)).collect();
            let total: i64 = weights.iter().sum();
            let zs: Vec<BigRational> =
                weights.iter().map(|&g| &w * rat(g, total)).collect();
            let picked = dirichlet_select(&zs, &w, &u, &delta).unwrap();
            // re-verify membership directly
            let tau = dirichlet_tau(&w, &u, &delta).unwrap();
            let z = &zs[picked - 1];
            let little = *z >= tau && *z <= &w / w.ceil();
            let big = *z >= &w / &floor_w - &delta && *z <= w;
            assert!(little || big, "w={w} zs={zs:?} picked={picked}");
        }
    }

    #[test]
    fn classify_greedy_levels() {
        let a = alpha(3, 5, 6);
        let mu = build_greedy(&a, &BigRational::one(), 2).unwrap().measure;
        let delta = default_delta(&a).unwrap();
        let tau = rat(1, 20);
        // level 0 has s=2 children, each with ratio w/2 (big side)
        let root = Interval::whole_space(3);
        let classes = classify_children(&mu, &a, &root, &tau, &delta).unwrap();
        assert_eq!(classes.len(), 2);
        for c in &classes {
            assert_eq!(c.class, MarkClass::Big);
            assert_eq!(c.mass_fraction, rat(1, 2));
        }
        // level 1 has s=3 children with ratio w/3 = w/⌈w⌉: the closed
        // little endpoint
        let iv = Interval::new(Prefix::parse(3, "0").unwrap());
        let classes = classify_children(&mu, &a, &iv, &tau, &delta).unwrap();
        assert_eq!(classes.len(), 3);
        for c in &classes {
            assert_eq!(c.class, MarkClass::Little);
            assert_eq!(c.mass_fraction, rat(1, 3));
        }
    }

    #[test]
    fn classify_ratios_sum_to_w() {
        let a = alpha(2, 1, 2);
        let mu = build_random(2, 5, 9, &RandomParams::for_base(2)).unwrap();
        let delta = default_delta(&a).unwrap();
        let tau = rat(1, 30);
        for level in 0..mu.depth() {
            for (digits, _) in mu.level_nodes(level) {
                let iv = Interval::new(mu.prefix(digits));
                let classes = classify_children(&mu, &a, &iv, &tau, &delta).unwrap();
                let total: BigRational =
                    classes.iter().map(|c| c.mass_fraction.clone()).sum();
                assert_eq!(total, BigRational::one());
            }
        }
    }

    #[test]
    fn classify_mixed_example() {
        // root mass 1 with children (4/5, 1/5): ratios 4w/5 (gap) and w/5
        // (little)
        let a = alpha(2, 1, 2);
        let mut nodes = std::collections::BTreeMap::new();
        nodes.insert(vec![], BigRational::one());
        nodes.insert(vec![0], rat(4, 5));
        nodes.insert(vec![1], rat(1, 5));
        let mu = TreeMeasure::from_nodes(2, 1, None, nodes);
        let classes =
            classify_children(&mu, &a, &Interval::whole_space(2), &rat(1, 10), &rat(1, 5))
                .unwrap();
        assert_eq!(classes[0].class, MarkClass::Unmarked);
        assert_eq!(classes[1].class, MarkClass::Little);
    }

    #[test]
    fn classify_single_child_is_big_endpoint() {
        let a = alpha(2, 1, 2);
        let spec = BranchingSpec::new(BigRational::one(), vec![1, 1]).unwrap();
        let mu = build_uniform(2, &spec, 2).unwrap();
        let delta = default_delta(&a).unwrap();
        let classes =
            classify_children(&mu, &a, &Interval::whole_space(2), &rat(1, 30), &delta).unwrap();
        assert_eq!(classes.len(), 1);
        // z = w exactly: the closed right endpoint of the big range
        assert_eq!(classes[0].class, MarkClass::Big);
        assert_eq!(classes[0].mass_fraction, BigRational::one());
    }

    #[test]
    fn classify_rejects_degenerate_and_off_support() {
        let a4 = alpha(4, 1, 2);
        let mu = build_greedy(&a4, &BigRational::one(), 2).unwrap().measure;
        assert!(classify_children(&mu, &a4, &Interval::whole_space(4), &rat(1, 10), &rat(1, 10))
            .is_err());
        let a = alpha(2, 1, 2);
        let spec = BranchingSpec::new(BigRational::one(), vec![1, 1]).unwrap();
        let mu = build_uniform(2, &spec, 2).unwrap();
        let off = Interval::new(Prefix::parse(2, "1").unwrap());
        assert!(matches!(
            classify_children(&mu, &a, &off, &rat(1, 10), &rat(1, 10)),
            Err(Error::NotInSupport(_))
        ));
    }

    #[test]
    fn marked_sets_on_greedy_cover_everything() {
        let a = alpha(3, 5, 6);
        let mu = build_greedy(&a, &BigRational::one(), 4).unwrap().measure;
        let table = build_marked_sets(&mu, &a, None, None).unwrap();
        assert!(table.violations.is_empty());
        for level in 1..=mu.depth() {
            assert_eq!(
                table.gamma(level).unwrap().len(),
                mu.level_nodes(level).len(),
                "greedy levels are fully marked"
            );
        }
        // K_lo ≤ τ·m^{−α} < 1, exactly: K_lo·w ≤ τ
        assert!(!a.cmp_w_times(&table.k_lo, &table.tau).is_gt());
        assert!(table.k_lo < BigRational::one());
        assert!(table.k_lo.is_positive());
    }

    #[test]
    fn marked_sets_u_bumps_on_full_branching() {
        let a = alpha(3, 5, 6);
        // full branching at the root: u must be m+1
        let spec = BranchingSpec::new(BigRational::one(), vec![3, 2]).unwrap();
        let mu = build_uniform(3, &spec, 2).unwrap();
        let table = build_marked_sets(&mu, &a, None, None).unwrap();
        assert_eq!(table.u, 4);
        assert_eq!(
            table.tau,
            BigRational::from_integer(BigInt::from(2)) * &table.delta / rat(4, 1)
        );
        // without full branching u stays at m
        let spec = BranchingSpec::new(BigRational::one(), vec![2, 2]).unwrap();
        let mu = build_uniform(3, &spec, 2).unwrap();
        let table = build_marked_sets(&mu, &a, None, None).unwrap();
        assert_eq!(table.u, 3);
    }

    #[test]
    fn marked_sets_hold_on_random_measures() {
        let a2 = alpha(2, 1, 2);
        let mu = build_random(2, 6, 42, &RandomParams::for_base(2)).unwrap();
        let table = build_marked_sets(&mu, &a2, None, Some(rat(1, 5))).unwrap();
        assert!(table.violations.is_empty(), "{:?}", table.violations);
        // hypothesis re-checked directly: marked children of every
        // interval carry at least K_lo of its mass
        for level in 0..mu.depth() {
            for (digits, mass) in mu.level_nodes(level) {
                let gamma = table.gamma(level + 1).unwrap();
                let marked: BigRational = mu
                    .support_children(digits)
                    .iter()
                    .filter(|(child, _)| gamma.contains_key(*child))
                    .map(|(_, m)| (*m).clone())
                    .sum();
                assert!(marked >= &table.k_lo * mass);
            }
        }
    }

    #[test]
    fn avoidance_zero_on_fully_marked() {
        let a = alpha(3, 5, 6);
        let mu = build_greedy(&a, &BigRational::one(), 4).unwrap().measure;
        let table = build_marked_sets(&mu, &a, None, None).unwrap();
        let report = avoidance_decay_check(&mu, &table, 1, 4).unwrap();
        assert!(report.all_ok);
        for row in &report.rows {
            assert!(row.avoid_mass.is_zero());
        }
    }

    #[test]
    fn avoidance_decay_on_random_measure() {
        let a = alpha(2, 1, 2);
        let mu = build_random(2, 10, 7, &RandomParams::for_base(2)).unwrap();
        let table = build_marked_sets(&mu, &a, None, Some(rat(1, 5))).unwrap();
        assert!(table.violations.is_empty());
        let report = avoidance_decay_check(&mu, &table, 1, 10).unwrap();
        assert!(report.all_ok, "{}", report.export());
        assert_eq!(report.rows.len(), 10);
        // bound itself strictly decays
        for pair in report.rows.windows(2) {
            assert!(pair[1].bound < pair[0].bound);
        }
    }

    #[test]
    fn avoidance_block_lifted() {
        let a = alpha(3, 5, 6);
        let mu = build_random(3, 10, 3, &RandomParams::for_base(3)).unwrap();
        let table = build_marked_sets(&mu, &a, None, None).unwrap();
        let report = avoidance_decay_check(&mu, &table, 2, 5).unwrap();
        assert_eq!(report.d_consec, 2);
        assert!(report.all_ok, "{}", report.export());
        assert_eq!(report.rows.len(), 5);
        // depth cap: n_max·d must fit
        assert!(avoidance_decay_check(&mu, &table, 2, 6).is_err());
    }

    #[test]
    fn k_lo_underapproximates_w_inverse() {
        for (m, p, q) in [(2u64, 1u32, 2u32), (3, 5, 6), (5, 1, 3), (2, 7, 8)] {
            let a = alpha(m, p, q);
            let r = w_inverse_lower(&a, 64);
            // r·w ≤ 1 and r is within 2^{-60} of 1/w (sanity via floats)
            assert!(!a.cmp_w_times(&r, &BigRational::one()).is_gt());
            let w = (m as f64).powf(p as f64 / q as f64);
            let rf = r.to_f64().unwrap();
            assert!((rf - 1.0 / w).abs() < 1e-15);
        }
    }

    #[test]
    fn default_delta_is_valid() {
        for (m, p, q) in [(2u64, 1, 2), (3, 5, 6), (5, 1, 3), (7, 2, 3), (2, 7, 8), (16, 7, 8)] {
            let a = alpha(m, p as u32, q as u32);
            let d = default_delta(&a).unwrap();
            assert!(d.is_positive());
            assert!(delta_valid(&a, &d), "m={m} {p}/{q} delta={d}");
            assert!(d <= rat(1, 10));
        }
        assert!(default_delta(&alpha(4, 1, 2)).is_err());
    }
}
