//! Density profiles f_n = m^{αn}·μ(B_n(x)) and finite-depth oscillation
//! estimators.
//!
//! The upper and lower α-densities at a point are the limsup/liminf of
//! f_n(x) as n → ∞; at a finite truncation only windowed extremes over
//! n ∈ [n0, N] are computable. Everything here reports such proxies —
//! never limits — and carries its window so that the provenance of every
//! estimate stays visible. The local oscillation proxy ĉ_loc is the
//! worst windowed max/min ratio over support paths; the global proxy ĉ
//! divides the windowed max over all paths by the windowed min over all
//! paths, so ĉ ≥ ĉ_loc ≥ 1 always.
//!
//! Profiles store (n, mass) pairs; the f-values themselves stay symbolic
//! as mass·w^n ([`WScaled`]) and every ordering is exact. Ties are broken
//! toward smaller levels and lexicographically smaller paths.

use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::measure::TreeMeasure;
use crate::space::{AlphaParam, Interval, Prefix, WScaled};

/// Default significant digits for decimal renderings of f-values.
pub const DEFAULT_SIG_DIGITS: usize = 15;

/// One profile entry: the mass of the level-n ancestor ball of the path.
/// The density value f_n = mass·w^n is derived, never stored as a float.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProfileEntry {
    pub level: usize,
    pub mass: BigRational,
}

impl ProfileEntry {
    pub fn f_value(&self) -> WScaled {
        WScaled::new(self.level as i64, self.mass.clone())
    }
}

/// The density sequence along one path, stored exactly.
#[derive(Clone, Debug)]
pub struct DensityProfile {
    pub alpha: AlphaParam,
    pub path: Prefix,
    pub entries: Vec<ProfileEntry>,
}

impl DensityProfile {
    /// Level of the last entry (the profile truncates where the path
    /// exits the support).
    pub fn last_level(&self) -> usize {
        self.entries.last().map(|e| e.level).unwrap_or(0)
    }

    /// Decimal rendering of one entry's f-value.
    pub fn f_approx(&self, entry: &ProfileEntry, sig_digits: usize) -> String {
        self.alpha.approx_sig(&entry.f_value(), sig_digits)
    }

    /// CSV export: `n,prefix,mass_num,mass_den,f_approx`, one row per level.
    pub fn to_csv(&self, sig_digits: usize) -> String {
        let mut out = String::from("n,prefix,mass_num,mass_den,f_approx\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.level,
                self.path.truncate(e.level),
                e.mass.numer(),
                e.mass.denom(),
                self.f_approx(e, sig_digits)
            ));
        }
        out
    }
}

/// The profile of μ along a path: one entry per level from 0 up to the
/// last level at which the path's prefix carries positive mass (beyond
/// that f is 0 and entries are not emitted).
pub fn f_profile(mu: &TreeMeasure, alpha: &AlphaParam, path: &Prefix) -> Result<DensityProfile> {
    if alpha.m() != mu.base() {
        return Err(Error::BaseMismatch(mu.base(), alpha.m()));
    }
    if path.base() != mu.base() {
        return Err(Error::BaseMismatch(mu.base(), path.base()));
    }
    if path.level() > mu.depth() {
        return Err(Error::LevelBeyondDepth { level: path.level(), depth: mu.depth() });
    }
    let mut entries = Vec::with_capacity(path.level() + 1);
    for n in 0..=path.level() {
        match mu.get(&path.digits()[..n]) {
            Some(mass) => entries.push(ProfileEntry { level: n, mass: mass.clone() }),
            None => break,
        }
    }
    Ok(DensityProfile { alpha: alpha.clone(), path: path.clone(), entries })
}

/// Windowed extremes of f over n ∈ [n0, last]: (upper, lower). These are
/// finite-depth proxies for the limsup/liminf, not limits. Ties go to the
/// smallest level.
pub fn density_estimates(
    profile: &DensityProfile,
    n0: usize,
) -> Result<(ProfileEntry, ProfileEntry)> {
    let window: Vec<&ProfileEntry> = profile.entries.iter().filter(|e| e.level >= n0).collect();
    if window.is_empty() {
        return Err(Error::EmptyWindow { n0, last: profile.last_level() });
    }
    let alpha = &profile.alpha;
    let mut upper = window[0];
    let mut lower = window[0];
    for e in &window[1..] {
        if alpha.cmp_scaled(&e.f_value(), &upper.f_value()).is_gt() {
            upper = e;
        }
        if alpha.cmp_scaled(&e.f_value(), &lower.f_value()).is_lt() {
            lower = e;
        }
    }
    Ok((upper.clone(), lower.clone()))
}

/// An exact ratio f_{n1}(x)/f_{n2}(y) of two profile entries.
#[derive(Clone, Debug)]
pub struct FRatio {
    pub num: ProfileEntry,
    pub den: ProfileEntry,
}

impl FRatio {
    pub fn value(&self) -> WScaled {
        WScaled::ratio(&self.num.f_value(), &self.den.f_value())
    }

    /// The export form `(n1,mass1)/(n2,mass2)`.
    pub fn export(&self) -> String {
        format!(
            "({},{}/{})/({},{}/{})",
            self.num.level,
            self.num.mass.numer(),
            self.num.mass.denom(),
            self.den.level,
            self.den.mass.numer(),
            self.den.mass.denom()
        )
    }
}

/// Finite-depth oscillation statistics over the window [n0, N].
#[derive(Clone, Debug)]
pub struct OscillationReport {
    pub alpha: AlphaParam,
    pub n0: usize,
    /// N, the truncation depth of the measure.
    pub depth: usize,
    /// Worst per-path windowed max/min ratio.
    pub c_loc_hat: FRatio,
    /// Lexicographically smallest path attaining ĉ_loc.
    pub c_loc_argmax: Prefix,
    /// Global windowed max over global windowed min.
    pub c_hat: FRatio,
    /// Paths attaining the global max and the global min.
    pub c_hat_argmax: (Prefix, Prefix),
}

impl OscillationReport {
    /// Line-oriented key=value export with exact pairs and decimal
    /// renderings (6 decimal places).
    pub fn export(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("m={}\n", self.alpha.m()));
        out.push_str(&format!("alpha={}/{}\n", self.alpha.p(), self.alpha.q()));
        out.push_str(&format!("n0={}\n", self.n0));
        out.push_str(&format!("N={}\n", self.depth));
        out.push_str(&format!("c_loc_hat={}\n", self.c_loc_hat.export()));
        out.push_str(&format!(
            "c_loc_hat_approx={}\n",
            self.alpha.approx_fixed(&self.c_loc_hat.value(), 6)
        ));
        out.push_str(&format!("c_loc_argmax={}\n", self.c_loc_argmax));
        out.push_str(&format!("c_hat={}\n", self.c_hat.export()));
        out.push_str(&format!(
            "c_hat_approx={}\n",
            self.alpha.approx_fixed(&self.c_hat.value(), 6)
        ));
        out.push_str(&format!("c_hat_argmax={},{}\n", self.c_hat_argmax.0, self.c_hat_argmax.1));
        out
    }
}

/// Enumerates all depth-N support paths, takes each path's windowed
/// extremes over [n0, N], and aggregates: ĉ_loc is the worst per-path
/// ratio, ĉ the ratio of global extremes. Exact ties are broken by the
/// lexicographically smallest path.
pub fn oscillation_report(
    mu: &TreeMeasure,
    alpha: &AlphaParam,
    n0: usize,
) -> Result<OscillationReport> {
    if alpha.m() != mu.base() {
        return Err(Error::BaseMismatch(mu.base(), alpha.m()));
    }
    if n0 > mu.depth() {
        return Err(Error::EmptyWindow { n0, last: mu.depth() });
    }
    let mut best_loc: Option<(FRatio, Prefix)> = None;
    let mut best_upper: Option<(ProfileEntry, Prefix)> = None;
    let mut best_lower: Option<(ProfileEntry, Prefix)> = None;

    for (digits, _) in mu.level_nodes(mu.depth()) {
        let path = mu.prefix(digits);
        let profile = f_profile(mu, alpha, &path)?;
        let (upper, lower) = density_estimates(&profile, n0)?;
        let ratio = FRatio { num: upper.clone(), den: lower.clone() };
        let improves = match &best_loc {
            None => true,
            Some((cur, _)) => alpha.cmp_scaled(&ratio.value(), &cur.value()).is_gt(),
        };
        if improves {
            best_loc = Some((ratio, path.clone()));
        }
        let improves = match &best_upper {
            None => true,
            Some((cur, _)) => alpha.cmp_scaled(&upper.f_value(), &cur.f_value()).is_gt(),
        };
        if improves {
            best_upper = Some((upper, path.clone()));
        }
        let improves = match &best_lower {
            None => true,
            Some((cur, _)) => alpha.cmp_scaled(&lower.f_value(), &cur.f_value()).is_lt(),
        };
        if improves {
            best_lower = Some((lower, path));
        }
    }

    let (c_loc_hat, c_loc_argmax) =
        best_loc.ok_or_else(|| Error::InvalidMeasure("no support nodes at depth".into()))?;
    let (upper, upper_path) = best_upper.expect("nonempty support");
    let (lower, lower_path) = best_lower.expect("nonempty support");
    Ok(OscillationReport {
        alpha: alpha.clone(),
        n0,
        depth: mu.depth(),
        c_loc_hat,
        c_loc_argmax,
        c_hat: FRatio { num: upper, den: lower },
        c_hat_argmax: (upper_path, lower_path),
    })
}

/// Independent mass oracle: sums the depth-N leaf masses below the
/// interval without reading any intermediate node. Equals
/// [`TreeMeasure::mass_of`] exactly on every consistent measure.
pub fn brute_force_mass(mu: &TreeMeasure, iv: &Interval) -> Result<BigRational> {
    if iv.base() != mu.base() {
        return Err(Error::BaseMismatch(mu.base(), iv.base()));
    }
    if iv.level() > mu.depth() {
        return Err(Error::LevelBeyondDepth { level: iv.level(), depth: mu.depth() });
    }
    let want = iv.prefix().digits();
    let mut total = BigRational::zero();
    for (digits, mass) in mu.nodes() {
        if digits.len() == mu.depth() && digits[..want.len().min(digits.len())] == *want {
            total += mass;
        }
    }
    Ok(total)
}
