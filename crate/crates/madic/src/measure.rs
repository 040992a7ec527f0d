//! Finite-depth Borel measures on the m-adic space as sparse
//! mass-labelled trees.
//!
//! A [`TreeMeasure`] stores exact rational masses on its support nodes
//! only; an absent node has mass 0. Consistency means every stored node
//! above the truncation depth carries exactly the sum of its stored
//! children, so the restriction to any level is a partition of the total
//! mass x₀ = μ(𝕋).
//!
//! A uniform measure is determined (up to shuffling intervals inside
//! their parents) by x₀ and a branching sequence s_n: every support
//! interval of level n has s_n support children, each of mass
//! x₀/(s₀⋯s_n). Constructions here place support children canonically at
//! digits 0..s_n−1. The greedy construction picks s_n ∈ {⌊w⌋, ⌈w⌉} so
//! that the density f_n = w^n·μ(B_n(x)) stays inside
//! [x₀, (⌈w⌉/⌊w⌋)·x₀]; its selection predicate is decided by exact
//! integer comparisons of m^{p(n+1)} against (⌈w⌉·s₀⋯s_{n−1})^q.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::density::{DensityProfile, ProfileEntry};
use crate::error::{Error, Result};
use crate::space::{AlphaParam, Interval, Prefix};

// ---------------------------------------------------------------------------
// TreeMeasure
// ---------------------------------------------------------------------------

/// A finite-depth measure: exact positive rational masses on the nodes
/// of a sparse base-`m` digit tree of the given depth.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeMeasure {
    base: u64,
    depth: usize,
    alpha_hint: Option<(u32, u32)>,
    nodes: BTreeMap<Vec<u32>, BigRational>,
}

/// A single violated tree invariant, as data rather than an error.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    RootMissing,
    NonPositiveMass { node: Prefix },
    Orphan { node: Prefix },
    LevelBeyondDepth { node: Prefix },
    ChildSumMismatch { node: Prefix, mass: BigRational, child_sum: BigRational },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RootMissing => write!(f, "root node is missing"),
            Violation::NonPositiveMass { node } => {
                write!(f, "node {node} has non-positive mass")
            }
            Violation::Orphan { node } => write!(f, "node {node} has no stored parent"),
            Violation::LevelBeyondDepth { node } => {
                write!(f, "node {node} lies beyond the declared depth")
            }
            Violation::ChildSumMismatch { node, mass, child_sum } => {
                write!(f, "node {node} has mass {mass} but children sum to {child_sum}")
            }
        }
    }
}

impl TreeMeasure {
    /// Assembles a measure from raw (digits, mass) pairs without
    /// validating; callers that take untrusted input run
    /// [`TreeMeasure::validate`].
    pub fn from_nodes(
        base: u64,
        depth: usize,
        alpha_hint: Option<(u32, u32)>,
        nodes: BTreeMap<Vec<u32>, BigRational>,
    ) -> Self {
        TreeMeasure { base, depth, alpha_hint, nodes }
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn alpha_hint(&self) -> Option<(u32, u32)> {
        self.alpha_hint
    }

    pub fn set_alpha_hint(&mut self, hint: Option<(u32, u32)>) {
        self.alpha_hint = hint;
    }

    /// x₀ = μ(𝕋). Panics on an empty tree (measures are nonzero).
    pub fn root_mass(&self) -> &BigRational {
        self.nodes.get([].as_slice()).expect("nonzero measure has a root")
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&Vec<u32>, &BigRational)> {
        self.nodes.iter()
    }

    /// Stored mass of the digit string, or None when outside support.
    pub fn get(&self, digits: &[u32]) -> Option<&BigRational> {
        self.nodes.get(digits)
    }

    /// The prefix for a digit string, carrying this measure's base.
    pub fn prefix(&self, digits: &[u32]) -> Prefix {
        Prefix::new(self.base, digits.to_vec()).expect("stored digits are below base")
    }

    /// All support nodes of one level, in digit order.
    pub fn level_nodes(&self, level: usize) -> Vec<(&Vec<u32>, &BigRational)> {
        self.nodes.iter().filter(|(k, _)| k.len() == level).collect()
    }

    /// Support children of a node, in digit order.
    pub fn support_children(&self, parent: &[u32]) -> Vec<(&Vec<u32>, &BigRational)> {
        let mut lo = parent.to_vec();
        lo.push(0);
        self.nodes
            .range(lo..)
            .take_while(|(k, _)| k.len() > parent.len() && k[..parent.len()] == *parent)
            .filter(|(k, _)| k.len() == parent.len() + 1)
            .collect()
    }

    /// μ(B) for an interval B: the stored mass, or exact 0 off support.
    pub fn mass_of(&self, iv: &Interval) -> Result<BigRational> {
        if iv.base() != self.base {
            return Err(Error::BaseMismatch(self.base, iv.base()));
        }
        if iv.level() > self.depth {
            return Err(Error::LevelBeyondDepth { level: iv.level(), depth: self.depth });
        }
        Ok(self.nodes.get(iv.prefix().digits()).cloned().unwrap_or_else(BigRational::zero))
    }

    /// Reports every node violating consistency, positivity, or the
    /// orphan rule; the measure is valid iff the list is empty.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !self.nodes.contains_key([].as_slice()) {
            out.push(Violation::RootMissing);
        }
        for (digits, mass) in &self.nodes {
            if !mass.is_positive() {
                out.push(Violation::NonPositiveMass { node: self.prefix(digits) });
            }
            if digits.len() > self.depth {
                out.push(Violation::LevelBeyondDepth { node: self.prefix(digits) });
            }
            if !digits.is_empty() && !self.nodes.contains_key(&digits[..digits.len() - 1]) {
                out.push(Violation::Orphan { node: self.prefix(digits) });
            }
            if digits.len() < self.depth {
                let child_sum: BigRational =
                    self.support_children(digits).into_iter().map(|(_, m)| m.clone()).sum();
                if child_sum != *mass {
                    out.push(Violation::ChildSumMismatch {
                        node: self.prefix(digits),
                        mass: mass.clone(),
                        child_sum,
                    });
                }
            }
        }
        out
    }

    /// Re-reads the measure over base m^d by grouping d digit levels into
    /// one (block (a_1..a_d) becomes the digit Σ a_i·m^{d−i}); trailing
    /// levels not filling a block are truncated.
    pub fn block_lift(&self, d: u32) -> Result<TreeMeasure> {
        if d == 0 {
            return Err(Error::InvalidParam("block size d must be >= 1".into()));
        }
        let new_base = self.base.checked_pow(d).ok_or_else(|| {
            Error::InvalidParam(format!("lifted base {}^{d} overflows", self.base))
        })?;
        let d = d as usize;
        let new_depth = self.depth / d;
        let mut nodes = BTreeMap::new();
        for (digits, mass) in &self.nodes {
            if digits.len() % d != 0 || digits.len() / d > new_depth {
                continue;
            }
            let blocks: Vec<u32> = digits
                .chunks(d)
                .map(|chunk| {
                    chunk.iter().fold(0u64, |acc, &a| acc * self.base + u64::from(a)) as u32
                })
                .collect();
            nodes.insert(blocks, mass.clone());
        }
        Ok(TreeMeasure { base: new_base, depth: new_depth, alpha_hint: self.alpha_hint, nodes })
    }

    /// A μ-distributed support path of full depth, deterministic in the
    /// seed: each step picks a child with probability mass/parent-mass.
    pub fn sample_path(&self, seed: u64) -> Prefix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut digits: Vec<u32> = Vec::with_capacity(self.depth);
        let two64 = BigInt::from(2u8).pow(64);
        for _ in 0..self.depth {
            let parent_mass = self.nodes.get(&digits).expect("support path").clone();
            let u = rng.next_u64();
            let threshold = parent_mass * BigRational::new(BigInt::from(u), two64.clone());
            let mut cum = BigRational::zero();
            let mut chosen = None;
            for (child, mass) in self.support_children(&digits) {
                cum += mass;
                if cum > threshold {
                    chosen = Some(child[child.len() - 1]);
                    break;
                }
            }
            digits.push(chosen.expect("children sum to parent mass"));
        }
        Prefix::new(self.base, digits).expect("digits below base")
    }

    /// The line-oriented text form: a `MADIC 1` header, the base/depth
    /// line, an optional alpha line, then one `node <prefix> <num>/<den>`
    /// line per support node in preorder, rationals in lowest terms.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str("MADIC 1\n");
        out.push_str(&format!("m={} depth={}\n", self.base, self.depth));
        if let Some((p, q)) = self.alpha_hint {
            out.push_str(&format!("alpha={p}/{q}\n"));
        }
        for (digits, mass) in &self.nodes {
            out.push_str(&format!(
                "node {} {}/{}\n",
                self.prefix(digits),
                mass.numer(),
                mass.denom()
            ));
        }
        out
    }
}

/// Parses the text form, re-reducing rationals and validating the
/// resulting tree; syntax errors carry 1-based line numbers.
pub fn deserialize(text: &str) -> Result<TreeMeasure> {
    let mut base: Option<u64> = None;
    let mut depth: Option<usize> = None;
    let mut alpha_hint: Option<(u32, u32)> = None;
    let mut nodes: BTreeMap<Vec<u32>, BigRational> = BTreeMap::new();
    let mut saw_magic = false;

    let err = |line: usize, msg: String| Error::Parse { line, msg };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if !saw_magic {
            if line != "MADIC 1" {
                return Err(err(lineno, format!("expected \"MADIC 1\" header, got {line:?}")));
            }
            saw_magic = true;
            continue;
        }
        if base.is_none() {
            let rest = line.strip_prefix("m=").ok_or_else(|| {
                err(lineno, format!("expected \"m=<int> depth=<int>\", got {line:?}"))
            })?;
            let (m_str, d_part) =
                rest.split_once(' ').ok_or_else(|| err(lineno, "missing depth field".into()))?;
            let d_str = d_part
                .trim()
                .strip_prefix("depth=")
                .ok_or_else(|| err(lineno, "missing depth field".into()))?;
            let m: u64 = m_str.parse().map_err(|_| err(lineno, format!("bad base {m_str:?}")))?;
            if m < 2 {
                return Err(err(lineno, format!("base m={m} must be at least 2")));
            }
            base = Some(m);
            depth =
                Some(d_str.parse().map_err(|_| err(lineno, format!("bad depth {d_str:?}")))?);
            continue;
        }
        if let Some(rest) = line.strip_prefix("alpha=") {
            if !nodes.is_empty() {
                return Err(err(lineno, "alpha line must precede node lines".into()));
            }
            let (p, q) = rest
                .split_once('/')
                .ok_or_else(|| err(lineno, format!("bad alpha {rest:?}")))?;
            let p: u32 = p.parse().map_err(|_| err(lineno, format!("bad alpha {rest:?}")))?;
            let q: u32 = q.parse().map_err(|_| err(lineno, format!("bad alpha {rest:?}")))?;
            alpha_hint = Some((p, q));
            continue;
        }
        let rest = line
            .strip_prefix("node ")
            .ok_or_else(|| err(lineno, format!("expected node line, got {line:?}")))?;
        let (prefix_str, mass_str) = rest
            .trim()
            .split_once(' ')
            .ok_or_else(|| err(lineno, "node line needs a prefix and a mass".into()))?;
        let prefix = Prefix::parse(base.unwrap(), prefix_str.trim())
            .map_err(|e| err(lineno, e.to_string()))?;
        let (num, den) = mass_str
            .trim()
            .split_once('/')
            .ok_or_else(|| err(lineno, format!("mass must be <num>/<den>, got {mass_str:?}")))?;
        let num: BigInt = num.parse().map_err(|_| err(lineno, format!("bad numerator {num:?}")))?;
        let den: BigInt =
            den.parse().map_err(|_| err(lineno, format!("bad denominator {den:?}")))?;
        if den.is_zero() {
            return Err(err(lineno, "zero denominator".into()));
        }
        if nodes.insert(prefix.digits().to_vec(), BigRational::new(num, den)).is_some() {
            return Err(err(lineno, format!("duplicate node {prefix_str}")));
        }
    }

    let base = base.ok_or_else(|| err(text.lines().count() + 1, "missing header".into()))?;
    if nodes.is_empty() {
        return Err(Error::InvalidMeasure("no nodes: measures are nonzero by assumption".into()));
    }
    let mu = TreeMeasure { base, depth: depth.unwrap(), alpha_hint, nodes };
    let violations = mu.validate();
    if let Some(v) = violations.first() {
        return Err(Error::InvalidMeasure(v.to_string()));
    }
    Ok(mu)
}

// ---------------------------------------------------------------------------
// Uniform measures and their branching data
// ---------------------------------------------------------------------------

/// The data that determines a uniform measure: the total mass x₀ and the
/// per-level support branching counts s_n.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BranchingSpec {
    pub x0: BigRational,
    pub s_seq: Vec<u32>,
}

impl BranchingSpec {
    pub fn new(x0: BigRational, s_seq: Vec<u32>) -> Result<Self> {
        if !x0.is_positive() {
            return Err(Error::InvalidSpec("x0 must be positive".into()));
        }
        if s_seq.iter().any(|&s| s == 0) {
            return Err(Error::InvalidSpec("every s_n must be at least 1".into()));
        }
        Ok(BranchingSpec { x0, s_seq })
    }
}

/// Builds the canonical uniform measure for a branching spec: support
/// children sit at digits 0..s_n−1 and every support node of level n has
/// mass x₀/(s₀⋯s_{n−1}).
pub fn build_uniform(m: u64, spec: &BranchingSpec, depth: usize) -> Result<TreeMeasure> {
    if depth > spec.s_seq.len() {
        return Err(Error::InvalidSpec(format!(
            "depth {depth} exceeds branching sequence length {}",
            spec.s_seq.len()
        )));
    }
    for (n, &s) in spec.s_seq.iter().take(depth).enumerate() {
        if u64::from(s) > m {
            return Err(Error::InvalidSpec(format!("s_{n}={s} exceeds base m={m}")));
        }
    }
    let mut nodes = BTreeMap::new();
    nodes.insert(Vec::new(), spec.x0.clone());
    let mut level: Vec<Vec<u32>> = vec![Vec::new()];
    let mut level_mass = spec.x0.clone();
    for &s in spec.s_seq.iter().take(depth) {
        level_mass /= BigRational::from_integer(BigInt::from(s));
        let mut next = Vec::with_capacity(level.len() * s as usize);
        for parent in &level {
            for digit in 0..s {
                let mut child = parent.clone();
                child.push(digit);
                nodes.insert(child.clone(), level_mass.clone());
                next.push(child);
            }
        }
        level = next;
    }
    Ok(TreeMeasure { base: m, depth, alpha_hint: None, nodes })
}

/// Outcome of [`is_uniform`]: either the recovered branching data or a
/// witness pair of same-level intervals breaking equal-mass or
/// equal-branching.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UniformCheck {
    Uniform(BranchingSpec),
    NotUniform { witness: (Interval, Interval), reason: String },
}

/// Decides whether the measure is uniform: at every level all support
/// nodes carry equal mass and have equally many support children. On
/// success the branching data (x₀, s₀..s_{N−1}) is returned.
pub fn is_uniform(mu: &TreeMeasure) -> UniformCheck {
    let mut s_seq = Vec::with_capacity(mu.depth());
    for level in 0..=mu.depth() {
        let nodes = mu.level_nodes(level);
        let (first_digits, first_mass) = nodes[0];
        for (digits, mass) in &nodes[1..] {
            if *mass != first_mass {
                return UniformCheck::NotUniform {
                    witness: (
                        Interval::new(mu.prefix(first_digits)),
                        Interval::new(mu.prefix(digits)),
                    ),
                    reason: format!("unequal masses at level {level}: {first_mass} vs {mass}"),
                };
            }
        }
        if level < mu.depth() {
            let first_count = mu.support_children(first_digits).len();
            for (digits, _) in &nodes[1..] {
                let count = mu.support_children(digits).len();
                if count != first_count {
                    return UniformCheck::NotUniform {
                        witness: (
                            Interval::new(mu.prefix(first_digits)),
                            Interval::new(mu.prefix(digits)),
                        ),
                        reason: format!(
                            "unequal branching at level {level}: {first_count} vs {count}"
                        ),
                    };
                }
            }
            s_seq.push(first_count as u32);
        }
    }
    UniformCheck::Uniform(BranchingSpec { x0: mu.root_mass().clone(), s_seq })
}

// ---------------------------------------------------------------------------
// The greedy construction
// ---------------------------------------------------------------------------

/// Branching sequence and density trace of the greedy construction,
/// without the materialized tree (the support grows like w^n, so deep
/// traces cannot be stored as trees).
#[derive(Clone, Debug)]
pub struct GreedyTrace {
    pub spec: BranchingSpec,
    pub profile: DensityProfile,
    /// Set when w is an integer and the construction degenerates to
    /// s_n = w with constant density.
    pub degenerate: bool,
}

/// The greedy construction with its materialized measure.
#[derive(Clone, Debug)]
pub struct GreedyResult {
    pub measure: TreeMeasure,
    pub spec: BranchingSpec,
    pub profile: DensityProfile,
    pub degenerate: bool,
}

/// Runs the greedy selection rule: starting from f₀ = x₀,
///
/// s_n = ⌈w⌉ if f_n·w/⌊w⌋ > (⌈w⌉/⌊w⌋)·x₀, else ⌊w⌋;  f_{n+1} = f_n·w/s_n.
///
/// The predicate is equivalent to w^{n+1} > ⌈w⌉·s₀⋯s_{n−1} (x₀ cancels),
/// decided exactly as m^{p(n+1)} > (⌈w⌉·s₀⋯s_{n−1})^q; ties take the
/// ⌊w⌋ branch. The profile lists (n, x₀/(s₀⋯s_{n−1})) for n = 0..=depth
/// along the all-zeros support path.
pub fn greedy_trace(alpha: &AlphaParam, x0: &BigRational, depth: usize) -> Result<GreedyTrace> {
    if !x0.is_positive() {
        return Err(Error::InvalidSpec("x0 must be positive".into()));
    }
    let floor_w = alpha.floor_w();
    let ceil_w = alpha.ceil_w();
    let m_p = BigUint::from(alpha.m()).pow(alpha.p());

    let mut s_seq: Vec<u32> = Vec::with_capacity(depth);
    let mut masses: Vec<BigRational> = Vec::with_capacity(depth + 1);
    masses.push(x0.clone());

    let mut product = BigUint::one(); // s₀⋯s_{n−1}
    let mut m_pow = m_p.clone(); // m^{p(n+1)}
    let mut rhs = BigUint::from(ceil_w).pow(alpha.q()); // (⌈w⌉·product)^q

    for _ in 0..depth {
        let s = if m_pow > rhs { ceil_w } else { floor_w };
        s_seq.push(s as u32);
        product *= s;
        rhs *= BigUint::from(s).pow(alpha.q());
        m_pow *= &m_p;
        masses.push(x0 / BigRational::from_integer(BigInt::from(product.clone())));
    }

    let path = Prefix::new(alpha.m(), vec![0; depth]).expect("zero digits are valid");
    let entries = masses
        .into_iter()
        .enumerate()
        .map(|(level, mass)| ProfileEntry { level, mass })
        .collect();
    Ok(GreedyTrace {
        spec: BranchingSpec { x0: x0.clone(), s_seq },
        profile: DensityProfile { alpha: alpha.clone(), path, entries },
        degenerate: alpha.is_degenerate(),
    })
}

/// Greedy construction with the tree materialized via [`build_uniform`].
/// The support has s₀⋯s_{N−1} leaves, so this is for moderate depths;
/// use [`greedy_trace`] for deep traces.
pub fn build_greedy(alpha: &AlphaParam, x0: &BigRational, depth: usize) -> Result<GreedyResult> {
    let trace = greedy_trace(alpha, x0, depth)?;
    let mut measure = build_uniform(alpha.m(), &trace.spec, depth)?;
    measure.set_alpha_hint(Some((alpha.p(), alpha.q())));
    Ok(GreedyResult {
        measure,
        spec: trace.spec,
        profile: trace.profile,
        degenerate: trace.degenerate,
    })
}

// ---------------------------------------------------------------------------
// Random measures
// ---------------------------------------------------------------------------

/// How a random node splits its mass among its children.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitLaw {
    /// All children get the same mass.
    Equal,
    /// Children get mass proportional to integer weights drawn from 1..=8.
    WeightedUniform,
}

#[derive(Clone, Debug)]
pub struct RandomParams {
    pub min_children: u32,
    pub max_children: u32,
    pub split: SplitLaw,
}

impl RandomParams {
    pub fn for_base(m: u64) -> Self {
        RandomParams { min_children: 1, max_children: m as u32, split: SplitLaw::WeightedUniform }
    }
}

/// A seeded random measure of total mass 1: every node draws a child
/// count in [min, max], picks that many distinct digits, and splits its
/// mass by the split law. Identical arguments give identical measures.
pub fn build_random(m: u64, depth: usize, seed: u64, params: &RandomParams) -> Result<TreeMeasure> {
    if params.min_children < 1
        || params.min_children > params.max_children
        || u64::from(params.max_children) > m
    {
        return Err(Error::InvalidParam(format!(
            "child-count bounds [{}, {}] invalid for base {m}",
            params.min_children, params.max_children
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = BTreeMap::new();
    nodes.insert(Vec::new(), BigRational::one());
    let mut level: Vec<(Vec<u32>, BigRational)> = vec![(Vec::new(), BigRational::one())];
    for _ in 0..depth {
        let mut next = Vec::new();
        for (digits, mass) in &level {
            let k = rng.gen_range(params.min_children..=params.max_children) as usize;
            // distinct digits via a partial Fisher-Yates over 0..m
            let mut pool: Vec<u32> = (0..m as u32).collect();
            for i in 0..k {
                let j = rng.gen_range(i..pool.len());
                pool.swap(i, j);
            }
            let mut chosen: Vec<u32> = pool[..k].to_vec();
            chosen.sort_unstable();
            let weights: Vec<u64> = match params.split {
                SplitLaw::Equal => vec![1; k],
                SplitLaw::WeightedUniform => (0..k).map(|_| rng.gen_range(1..=8u64)).collect(),
            };
            let total: u64 = weights.iter().sum();
            for (digit, weight) in chosen.into_iter().zip(weights) {
                let child_mass =
                    mass * BigRational::new(BigInt::from(weight), BigInt::from(total));
                let mut child = digits.clone();
                child.push(digit);
                nodes.insert(child.clone(), child_mass.clone());
                next.push((child, child_mass));
            }
        }
        level = next;
    }
    Ok(TreeMeasure { base: m, depth, alpha_hint: None, nodes })
}
