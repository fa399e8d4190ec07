//! APSK constellation design and the RIS bit mapping.
//!
//! Ring radii are found by exhaustive grid search over the adjacent-ring
//! ratios, maximizing the minimum squared Euclidean distance. A ring is
//! realized on the surface by the number of ON (or amplified) elements, and
//! phase slots within a ring by a common phase offset `psi`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::scalar::{cis, from_usize, lit, to_f64, Cx, Real};

/// Upper bound on each adjacent-ring radius ratio.
pub const RATIO_UPPER: f64 = 4.0;

/// Largest ring count accepted by the grid search.
pub const MAX_SEARCH_RINGS: usize = 4;

/// Default grid step of the ratio search.
pub const DEFAULT_GRID_STEP: f64 = 0.01;

fn is_pow2(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

/// Ring point counts `n_1 + ... + n_R` together with the PSK order of the
/// active transmitter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingSchedule {
    ring_counts: Vec<usize>,
    modulation_order: usize,
    active_order: usize,
}

impl RingSchedule {
    pub fn new(ring_counts: Vec<usize>, active_order: usize) -> Result<Self> {
        if ring_counts.is_empty() {
            return Err(Error::Schedule("no rings".into()));
        }
        if !is_pow2(active_order) {
            return Err(Error::Schedule(format!(
                "active order {active_order} is not a power of two"
            )));
        }
        for (k, &n) in ring_counts.iter().enumerate() {
            if n == 0 {
                return Err(Error::Schedule(format!("ring {} is empty", k + 1)));
            }
            if n % active_order != 0 {
                return Err(Error::Schedule(format!(
                    "ring {} has {n} points, not a multiple of A = {active_order}",
                    k + 1
                )));
            }
        }
        if ring_counts.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Schedule(format!(
                "ring counts {ring_counts:?} must be non-decreasing"
            )));
        }
        let m: usize = ring_counts.iter().sum();
        if !is_pow2(m) {
            return Err(Error::Schedule(format!("M = {m} is not a power of two")));
        }
        Ok(Self {
            ring_counts,
            modulation_order: m,
            active_order,
        })
    }

    /// Parses `"4+12+16"` style ring counts.
    pub fn parse(text: &str, active_order: usize) -> Result<Self> {
        let counts = text
            .split('+')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Schedule(format!("cannot parse `{text}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(counts, active_order)
    }

    pub fn ring_counts(&self) -> &[usize] {
        &self.ring_counts
    }

    pub fn rings(&self) -> usize {
        self.ring_counts.len()
    }

    /// `M`.
    pub fn modulation_order(&self) -> usize {
        self.modulation_order
    }

    /// `A`.
    pub fn active_order(&self) -> usize {
        self.active_order
    }

    /// `P = M / A`, the number of backscatter symbols.
    pub fn backscatter_order(&self) -> usize {
        self.modulation_order / self.active_order
    }

    /// Number of phase slots a ring contributes to the backscatter alphabet.
    pub fn slots(&self, ring: usize) -> usize {
        self.ring_counts[ring] / self.active_order
    }

    pub fn label(&self) -> String {
        self.ring_counts
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join("+")
    }
}

impl fmt::Display for RingSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-APSK", self.label())
    }
}

/// Radii from outer-ring normalization `r_R = 1` and ratios `r_{k+1}/r_k`.
fn radii_from_ratios<T: Real>(ratios: &[T]) -> Vec<T> {
    let mut radii = vec![T::one(); ratios.len() + 1];
    for k in (0..ratios.len()).rev() {
        radii[k] = radii[k + 1] / ratios[k];
    }
    radii
}

fn check_ratios<T: Real>(schedule: &RingSchedule, ratios: &[T]) -> Result<()> {
    if ratios.len() + 1 != schedule.rings() {
        return Err(param(
            "ratios",
            format!(
                "{} ratios for {} rings",
                ratios.len(),
                schedule.rings()
            ),
        ));
    }
    let upper: T = lit(RATIO_UPPER);
    for (index, &g) in ratios.iter().enumerate() {
        if !(g > T::one() && g < upper) {
            return Err(Error::RatioOutOfRange {
                index,
                value: to_f64(g),
                upper: RATIO_UPPER,
            });
        }
    }
    Ok(())
}

/// In-ring squared distances `d_k^2` and adjacent-ring squared distances
/// `d_{k,k+1}^2` for the given ratios.
pub fn ring_distances<T: Real>(schedule: &RingSchedule, ratios: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    check_ratios(schedule, ratios)?;
    Ok(ring_distances_unchecked(schedule.ring_counts(), ratios))
}

fn ring_distances_unchecked<T: Real>(counts: &[usize], ratios: &[T]) -> (Vec<T>, Vec<T>) {
    let radii = radii_from_ratios(ratios);
    let two: T = lit(2.0);
    let within = counts
        .iter()
        .zip(&radii)
        .map(|(&n, &r)| two * r * r * (T::one() - (T::two_pi() / from_usize::<T>(n)).cos()))
        .collect();
    let across = ratios
        .iter()
        .zip(&radii)
        .map(|(&g, &r)| {
            let d = (g - T::one()) * r;
            d * d
        })
        .collect();
    (within, across)
}

fn min_candidate<T: Real>(within: &[T], across: &[T]) -> T {
    within
        .iter()
        .chain(across)
        .copied()
        .reduce(|a, b| a.min(b))
        .expect("at least one ring")
}

/// Grid values `1 + i * step` strictly inside `(1, RATIO_UPPER)`.
pub fn ratio_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite() && step < RATIO_UPPER - 1.0) {
        return Err(param("grid_step", format!("{step} not in (0, {})", RATIO_UPPER - 1.0)));
    }
    let span = (RATIO_UPPER - 1.0) / step;
    let last = if (span - span.round()).abs() < 1e-9 {
        span.round() as usize - 1
    } else {
        span.floor() as usize
    };
    Ok((1..=last).map(|i| 1.0 + i as f64 * step).collect())
}

/// Objective ties within this relative margin keep the earlier grid point.
pub fn tie_tolerance<T: Real>() -> T {
    T::default_epsilon() * lit(64.0)
}

/// A normalized APSK constellation with `r_R = 1` and zero ring phase offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ApskConstellation<T> {
    schedule: RingSchedule,
    radius_ratios: Vec<T>,
    radii: Vec<T>,
    phase_offsets: Vec<T>,
    points: Vec<Cx<T>>,
    min_sq_distance: T,
}

impl<T: Real> ApskConstellation<T> {
    /// Builds the constellation for explicit radius ratios.
    pub fn from_ratios(schedule: RingSchedule, ratios: Vec<T>) -> Result<Self> {
        check_ratios(&schedule, &ratios)?;
        let (within, across) = ring_distances_unchecked(schedule.ring_counts(), &ratios);
        let min_sq_distance = min_candidate(&within, &across);
        let radii = radii_from_ratios(&ratios);
        let points = schedule
            .ring_counts()
            .iter()
            .zip(&radii)
            .flat_map(|(&n, &r)| {
                (0..n).map(move |i| {
                    cis(T::two_pi() * from_usize::<T>(i) / from_usize::<T>(n)) * r
                })
            })
            .collect();
        Ok(Self {
            phase_offsets: vec![T::zero(); schedule.rings()],
            schedule,
            radius_ratios: ratios,
            radii,
            points,
            min_sq_distance,
        })
    }

    /// Maximizes the minimum squared distance over the ratio grid.
    ///
    /// Grid points are visited in lexicographic order of the ratio vector and
    /// only a strictly larger objective (beyond [`tie_tolerance`]) replaces
    /// the incumbent, so ties resolve to the lexicographically smallest vector.
    pub fn optimize(schedule: RingSchedule, grid_step: f64) -> Result<Self> {
        let rings = schedule.rings();
        if rings > MAX_SEARCH_RINGS {
            return Err(Error::TooManyRings {
                rings,
                max: MAX_SEARCH_RINGS,
            });
        }
        if rings == 1 {
            return Self::from_ratios(schedule, Vec::new());
        }
        let grid: Vec<T> = ratio_grid(grid_step)?.into_iter().map(lit).collect();
        let dims = rings - 1;
        let counts = schedule.ring_counts().to_vec();
        let tol = tie_tolerance::<T>();

        let mut index = vec![0usize; dims];
        let mut ratios = vec![grid[0]; dims];
        let mut best: Option<(T, Vec<T>)> = None;
        loop {
            for (r, &i) in ratios.iter_mut().zip(&index) {
                *r = grid[i];
            }
            let (within, across) = ring_distances_unchecked(&counts, &ratios);
            let value = min_candidate(&within, &across);
            let better = match &best {
                None => true,
                Some((b, _)) => value > *b + tol * b.abs(),
            };
            if better {
                best = Some((value, ratios.clone()));
            }
            // odometer, last coordinate fastest
            let mut d = dims;
            loop {
                if d == 0 {
                    let (_, ratios) = best.expect("grid is non-empty");
                    return Self::from_ratios(schedule, ratios);
                }
                d -= 1;
                index[d] += 1;
                if index[d] < grid.len() {
                    break;
                }
                index[d] = 0;
            }
        }
    }

    pub fn schedule(&self) -> &RingSchedule {
        &self.schedule
    }

    /// `gamma_k = r_{k+1} / r_k`.
    pub fn radius_ratios(&self) -> &[T] {
        &self.radius_ratios
    }

    pub fn radii(&self) -> &[T] {
        &self.radii
    }

    pub fn phase_offsets(&self) -> &[T] {
        &self.phase_offsets
    }

    /// All `M` points, inner ring first.
    pub fn points(&self) -> &[Cx<T>] {
        &self.points
    }

    pub fn min_sq_distance(&self) -> T {
        self.min_sq_distance
    }

    /// Product of the ratios from ring `k` (0-based) outward.
    fn ratio_product_from(&self, k: usize) -> T {
        self.radius_ratios[k..]
            .iter()
            .fold(T::one(), |acc, &g| acc * g)
    }

    /// Product of all ratios, i.e. `r_R / r_1`.
    pub fn total_ratio(&self) -> T {
        self.ratio_product_from(0)
    }
}

/// How the element-count alphabet is realized on the surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceMode {
    /// Elements are ON (unit gain) or OFF.
    Passive,
    /// Elements are amplified (gain xi) or passive (unit gain).
    ActiveOn,
    /// Elements are amplified or OFF; used when xi is below the ring span.
    ActiveOff,
}

impl SurfaceMode {
    pub fn is_active(self) -> bool {
        !matches!(self, SurfaceMode::Passive)
    }
}

impl fmt::Display for SurfaceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SurfaceMode::Passive => "passive",
            SurfaceMode::ActiveOn => "active-on",
            SurfaceMode::ActiveOff => "active-off",
        })
    }
}

impl FromStr for SurfaceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "passive" => Ok(SurfaceMode::Passive),
            "active-on" => Ok(SurfaceMode::ActiveOn),
            "active-off" => Ok(SurfaceMode::ActiveOff),
            other => Err(param("mode", format!("unknown mode `{other}`"))),
        }
    }
}

/// Element counts `N_a`, one per ring, inner ring first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementAlphabet {
    pub counts: Vec<usize>,
    pub mode: SurfaceMode,
    pub n_elements: usize,
    pub xi: f64,
}

impl ElementAlphabet {
    pub fn ring_of(&self, n_a: usize) -> Option<usize> {
        self.counts.iter().position(|&c| c == n_a)
    }
}

fn passive_counts<T: Real>(c: &ApskConstellation<T>, n: usize) -> Vec<i64> {
    let rings = c.schedule.rings();
    let nn: T = from_usize(n);
    (0..rings)
        .map(|k| {
            if k + 1 == rings {
                n as i64
            } else {
                to_f64((nn / c.ratio_product_from(k)).round()) as i64
            }
        })
        .collect()
}

fn active_counts<T: Real>(c: &ApskConstellation<T>, n: usize, xi: T) -> Vec<i64> {
    let rings = c.schedule.rings();
    let nn: T = from_usize(n);
    (0..rings)
        .map(|k| {
            if k + 1 == rings {
                n as i64
            } else {
                let v = (xi * nn / c.ratio_product_from(k) - nn) / (xi - T::one());
                to_f64(v.round()) as i64
            }
        })
        .collect()
}

fn valid_counts(counts: &[i64], min_first: i64) -> bool {
    counts.first().is_some_and(|&c| c >= min_first) && counts.windows(2).all(|w| w[0] < w[1])
}

fn smallest_separating_n(f: impl Fn(usize) -> Vec<i64>, min_first: i64, from: usize) -> usize {
    (from.max(1)..1 << 24)
        .find(|&m| valid_counts(&f(m), min_first))
        .unwrap_or(usize::MAX)
}

/// Element counts for passive ON/OFF realization of the rings.
pub fn passive_na_alphabet<T: Real>(c: &ApskConstellation<T>, n: usize) -> Result<ElementAlphabet> {
    if n == 0 {
        return Err(param("n_elements", "must be at least 1"));
    }
    let counts = passive_counts(c, n);
    if !valid_counts(&counts, 1) {
        return Err(Error::DuplicateAlphabet {
            alphabet: counts.iter().map(|&v| v.max(0) as usize).collect(),
            min_n: smallest_separating_n(|m| passive_counts(c, m), 1, n),
        });
    }
    Ok(ElementAlphabet {
        counts: counts.into_iter().map(|v| v as usize).collect(),
        mode: SurfaceMode::Passive,
        n_elements: n,
        xi: 1.0,
    })
}

/// Element counts for an active surface with amplifier gain `xi`.
///
/// When `xi` is smaller than the total ring ratio the amplified/passive split
/// cannot reach the inner ring; the passive elements are switched OFF instead
/// and the passive alphabet is reused ([`SurfaceMode::ActiveOff`]).
pub fn active_na_alphabet<T: Real>(
    c: &ApskConstellation<T>,
    n: usize,
    xi: T,
) -> Result<ElementAlphabet> {
    if !(xi > T::one()) {
        return Err(param("xi", format!("{} must exceed 1", to_f64(xi))));
    }
    if n == 0 {
        return Err(param("n_elements", "must be at least 1"));
    }
    if xi < c.total_ratio() {
        let mut alphabet = passive_na_alphabet(c, n)?;
        alphabet.mode = SurfaceMode::ActiveOff;
        alphabet.xi = to_f64(xi);
        return Ok(alphabet);
    }
    let counts = active_counts(c, n, xi);
    if !valid_counts(&counts, 0) {
        return Err(Error::DuplicateAlphabet {
            alphabet: counts.iter().map(|&v| v.max(0) as usize).collect(),
            min_n: smallest_separating_n(|m| active_counts(c, m, xi), 0, n),
        });
    }
    Ok(ElementAlphabet {
        counts: counts.into_iter().map(|v| v as usize).collect(),
        mode: SurfaceMode::ActiveOn,
        n_elements: n,
        xi: to_f64(xi),
    })
}

/// Inverse of the binary-reflected Gray code.
fn gray_decode(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

/// One row of the bit mapping table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BitMapEntry<T> {
    /// `active * P + backscatter`.
    pub label: usize,
    pub active: usize,
    pub backscatter: usize,
    pub x: Cx<T>,
    pub n_a: usize,
    pub psi: T,
    pub ring: usize,
}

/// Table from `log2(A) + log2(P)` bit labels to `(x, N_a, psi)`.
///
/// Active bits select `x` through a Gray-coded A-PSK; backscatter bits
/// enumerate `(ring, slot)` pairs in natural binary, inner ring first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BitMap<T> {
    active_order: usize,
    backscatter_order: usize,
    alphabet: ElementAlphabet,
    entries: Vec<BitMapEntry<T>>,
}

impl<T: Real> BitMap<T> {
    pub fn build(c: &ApskConstellation<T>, alphabet: &ElementAlphabet) -> Result<Self> {
        let schedule = c.schedule();
        if alphabet.counts.len() != schedule.rings() {
            return Err(param(
                "alphabet",
                format!(
                    "{} entries for {} rings",
                    alphabet.counts.len(),
                    schedule.rings()
                ),
            ));
        }
        let a_order = schedule.active_order();
        let p_order = schedule.backscatter_order();

        let mut backscatter = Vec::with_capacity(p_order);
        for (ring, &n_k) in schedule.ring_counts().iter().enumerate() {
            for slot in 0..schedule.slots(ring) {
                let psi = T::two_pi() * from_usize::<T>(slot) / from_usize::<T>(n_k);
                backscatter.push((ring, alphabet.counts[ring], psi));
            }
        }
        debug_assert_eq!(backscatter.len(), p_order);

        let mut entries = Vec::with_capacity(a_order * p_order);
        for active in 0..a_order {
            let phase = T::two_pi() * from_usize::<T>(gray_decode(active)) / from_usize::<T>(a_order);
            let x = snap_unit(cis(phase));
            for (b, &(ring, n_a, psi)) in backscatter.iter().enumerate() {
                entries.push(BitMapEntry {
                    label: active * p_order + b,
                    active,
                    backscatter: b,
                    x,
                    n_a,
                    psi,
                    ring,
                });
            }
        }
        Ok(Self {
            active_order: a_order,
            backscatter_order: p_order,
            alphabet: alphabet.clone(),
            entries,
        })
    }

    pub fn entries(&self) -> &[BitMapEntry<T>] {
        &self.entries
    }

    pub fn entry(&self, label: usize) -> Option<&BitMapEntry<T>> {
        self.entries.get(label)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn active_order(&self) -> usize {
        self.active_order
    }

    pub fn backscatter_order(&self) -> usize {
        self.backscatter_order
    }

    pub fn alphabet(&self) -> &ElementAlphabet {
        &self.alphabet
    }

    /// Bits per channel use, `log2(A * P)`.
    pub fn bits(&self) -> u32 {
        self.entries.len().trailing_zeros()
    }

    /// The `P` backscatter symbols `(N_a, psi)` in label order.
    pub fn backscatter_symbols(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.entries[..self.backscatter_order]
            .iter()
            .map(|e| (e.n_a, e.psi))
    }

    /// The `A` active symbols in label order.
    pub fn active_symbols(&self) -> impl Iterator<Item = Cx<T>> + '_ {
        self.entries
            .iter()
            .step_by(self.backscatter_order)
            .map(|e| e.x)
    }

    /// Finds the label carrying `(x, N_a, psi)`.
    pub fn lookup(&self, x: Cx<T>, n_a: usize, psi: T) -> Option<usize> {
        let tol: T = lit(1e-6);
        self.entries
            .iter()
            .find(|e| {
                e.n_a == n_a && (e.psi - psi).abs() < tol && (e.x - x).norm_sqr() < tol
            })
            .map(|e| e.label)
    }

    /// Label formatted as `[aa|bb]`.
    pub fn format_label(&self, label: usize) -> String {
        let ab = self.active_order.trailing_zeros() as usize;
        let pb = self.backscatter_order.trailing_zeros() as usize;
        let a = label / self.backscatter_order;
        let p = label % self.backscatter_order;
        let fmt_bits = |v: usize, w: usize| {
            (0..w)
                .rev()
                .map(|i| if (v >> i) & 1 == 1 { '1' } else { '0' })
                .collect::<String>()
        };
        format!("[{}|{}]", fmt_bits(a, ab), fmt_bits(p, pb))
    }
}

/// Removes rounding residue so that e.g. `cos(pi/2)` becomes exactly zero.
fn snap_unit<T: Real>(z: Cx<T>) -> Cx<T> {
    let eps: T = lit(1e-12);
    let snap = |v: T| {
        if v.abs() < eps {
            T::zero()
        } else if (v - T::one()).abs() < eps {
            T::one()
        } else if (v + T::one()).abs() < eps {
            -T::one()
        } else {
            v
        }
    };
    Cx::new(snap(z.re), snap(z.im))
}

/// Serializable constellation plus bit map, for the JSON export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstellationExport {
    pub schedule: String,
    pub ring_counts: Vec<usize>,
    pub active_order: usize,
    pub backscatter_order: usize,
    pub gamma: Vec<f64>,
    pub radii: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub min_sq_distance: f64,
    pub rounding: String,
    pub alphabet: Option<ElementAlphabet>,
    pub bit_map: Vec<BitMapRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BitMapRow {
    pub bits: String,
    pub x: [f64; 2],
    pub n_a: usize,
    pub psi: f64,
}

impl ConstellationExport {
    pub fn new<T: Real>(c: &ApskConstellation<T>, bit_map: Option<&BitMap<T>>) -> Self {
        Self {
            schedule: c.schedule().label(),
            ring_counts: c.schedule().ring_counts().to_vec(),
            active_order: c.schedule().active_order(),
            backscatter_order: c.schedule().backscatter_order(),
            gamma: c.radius_ratios().iter().map(|&g| to_f64(g)).collect(),
            radii: c.radii().iter().map(|&r| to_f64(r)).collect(),
            points: c
                .points()
                .iter()
                .map(|p| [to_f64(p.re), to_f64(p.im)])
                .collect(),
            min_sq_distance: to_f64(c.min_sq_distance()),
            rounding: "half-away-from-zero".into(),
            alphabet: bit_map.map(|b| b.alphabet().clone()),
            bit_map: bit_map
                .map(|b| {
                    b.entries()
                        .iter()
                        .map(|e| BitMapRow {
                            bits: b.format_label(e.label),
                            x: [to_f64(e.x.re), to_f64(e.x.im)],
                            n_a: e.n_a,
                            psi: to_f64(e.psi),
                        })
                        .collect()
                })
                .unwrap_or_default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sched(s: &str, a: usize) -> RingSchedule {
        RingSchedule::parse(s, a).unwrap()
    }

    #[test]
    fn schedule_validation() {
        assert!(RingSchedule::parse("4+12", 4).is_ok());
        assert!(matches!(RingSchedule::parse("4+12", 8), Err(Error::Schedule(_))));
        assert!(RingSchedule::parse("12+4", 4).is_err());
        assert!(RingSchedule::parse("4+10", 2).is_err());
        assert!(RingSchedule::parse("4+12", 3).is_err());
        assert!(RingSchedule::parse("4+x", 4).is_err());
        let s = sched("8+24+32", 8);
        assert_eq!(s.modulation_order(), 64);
        assert_eq!(s.backscatter_order(), 8);
        assert_eq!(s.to_string(), "8+24+32-APSK");
    }

    #[test]
    fn ring_distance_substitution() {
        let s = sched("4+12", 4);
        let (within, across) = ring_distances(&s, &[2.0f64]).unwrap();
        // r_1 = 1/2
        assert!((within[0] - 2.0 * 0.25).abs() < 1e-15);
        assert!((across[0] - 0.25).abs() < 1e-15);
        let one = sched("4", 4);
        let (w, a) = ring_distances::<f64>(&one, &[]).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-15);
        assert!(a.is_empty());
        // gamma = 2 and r_k = 1 gives (gamma - 1)^2 = 1
        let s3 = sched("4+4+8", 4);
        let (_, a3) = ring_distances(&s3, &[2.0f64, 1.5]).unwrap();
        assert!((a3[0] - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn ratios_out_of_range_rejected() {
        let s = sched("4+12", 4);
        for bad in [1.0f64, 0.5, 4.0, 7.0, f64::NAN] {
            assert!(matches!(
                ring_distances(&s, &[bad]),
                Err(Error::RatioOutOfRange { .. })
            ));
        }
        assert!(ring_distances(&s, &[2.0f64, 2.0]).is_err());
    }

    #[test]
    fn grid_is_open_interval() {
        let g = ratio_grid(0.01).unwrap();
        assert_eq!(g.len(), 299);
        assert!((g[0] - 1.01).abs() < 1e-12);
        assert!((g[298] - 3.99).abs() < 1e-12);
        assert_eq!(ratio_grid(0.7).unwrap().len(), 4);
        assert!(ratio_grid(0.0).is_err());
        assert!(ratio_grid(-1.0).is_err());
    }

    #[test]
    fn single_ring_is_psk() {
        let c = ApskConstellation::<f64>::optimize(sched("8", 8), 0.01).unwrap();
        assert!(c.radius_ratios().is_empty());
        assert_eq!(c.points().len(), 8);
        let expect = 2.0 * (1.0 - (2.0 * PI / 8.0).cos());
        assert!((c.min_sq_distance() - expect).abs() < 1e-15);
        for p in c.points() {
            assert!((p.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn too_many_rings_rejected() {
        let s = RingSchedule::new(vec![4, 4, 4, 4, 16], 4).unwrap();
        assert!(matches!(
            ApskConstellation::<f64>::optimize(s, 0.01),
            Err(Error::TooManyRings { rings: 5, .. })
        ));
    }

    #[test]
    fn radii_are_normalized_and_increasing() {
        let c = ApskConstellation::<f64>::optimize(sched("4+12+16", 4), 0.05).unwrap();
        let r = c.radii();
        assert_eq!(*r.last().unwrap(), 1.0);
        assert!(r.windows(2).all(|w| w[0] < w[1]));
        for (k, g) in c.radius_ratios().iter().enumerate() {
            assert!((r[k] * g - r[k + 1]).abs() < 1e-14);
        }
        assert!(c.phase_offsets().iter().all(|&t| t == 0.0));
    }

    #[test]
    fn passive_alphabet_single_ring() {
        let c = ApskConstellation::<f64>::optimize(sched("16", 4), 0.01).unwrap();
        let a = passive_na_alphabet(&c, 128).unwrap();
        assert_eq!(a.counts, vec![128]);
    }

    #[test]
    fn passive_alphabet_structure() {
        let c = ApskConstellation::<f64>::from_ratios(sched("4+12", 4), vec![2.08]).unwrap();
        let a = passive_na_alphabet(&c, 128).unwrap();
        assert_eq!(a.counts, vec![62, 128]);
        assert!(passive_na_alphabet(&c, 0).is_err());
    }

    #[test]
    fn duplicate_alphabet_names_minimum_n() {
        let c = ApskConstellation::<f64>::from_ratios(sched("4+12+16", 4), vec![1.05, 1.05])
            .unwrap();
        match passive_na_alphabet(&c, 8) {
            Err(Error::DuplicateAlphabet { min_n, .. }) => {
                assert!(min_n > 8);
                assert!(passive_na_alphabet(&c, min_n).is_ok());
                assert!(passive_na_alphabet(&c, min_n - 1).is_err());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn active_alphabet_and_fallback() {
        let c = ApskConstellation::<f64>::from_ratios(sched("4+12", 4), vec![2.08]).unwrap();
        let a = active_na_alphabet(&c, 128, 10.0).unwrap();
        let expect = ((1280.0 / 2.08 - 128.0) / 9.0f64).round() as usize;
        assert_eq!(a.counts, vec![expect, 128]);
        assert_eq!(a.mode, SurfaceMode::ActiveOn);

        let off = active_na_alphabet(&c, 128, 1.5).unwrap();
        assert_eq!(off.mode, SurfaceMode::ActiveOff);
        assert_eq!(off.counts, passive_na_alphabet(&c, 128).unwrap().counts);

        assert!(active_na_alphabet(&c, 128, 1.0).is_err());
        assert!(active_na_alphabet(&c, 128, 0.5).is_err());
    }

    #[test]
    fn active_alphabet_large_gain_tends_to_passive() {
        let c = ApskConstellation::<f64>::from_ratios(sched("4+12+16", 4), vec![1.7, 1.4])
            .unwrap();
        let passive = passive_na_alphabet(&c, 128).unwrap();
        let active = active_na_alphabet(&c, 128, 1e9).unwrap();
        assert_eq!(active.counts, passive.counts);
    }

    #[test]
    fn bit_map_reference_rows() {
        let c = ApskConstellation::<f64>::from_ratios(sched("4+12", 4), vec![2.08]).unwrap();
        let alpha = passive_na_alphabet(&c, 128).unwrap();
        let map = BitMap::build(&c, &alpha).unwrap();
        assert_eq!(map.len(), 16);
        assert_eq!(map.bits(), 4);
        let row = |bits: &str| {
            map.entries()
                .iter()
                .find(|e| map.format_label(e.label) == bits)
                .unwrap()
                .clone()
        };
        let nr1 = alpha.counts[0];
        let expect = [
            ("[00|00]", (1.0, 0.0), nr1, 0.0),
            ("[00|01]", (1.0, 0.0), 128, 0.0),
            ("[00|10]", (1.0, 0.0), 128, PI / 6.0),
            ("[00|11]", (1.0, 0.0), 128, PI / 3.0),
            ("[01|00]", (0.0, 1.0), nr1, 0.0),
            ("[01|11]", (0.0, 1.0), 128, PI / 3.0),
            ("[10|01]", (0.0, -1.0), 128, 0.0),
            ("[10|10]", (0.0, -1.0), 128, PI / 6.0),
            ("[11|00]", (-1.0, 0.0), nr1, 0.0),
            ("[11|11]", (-1.0, 0.0), 128, PI / 3.0),
        ];
        for (bits, (re, im), n_a, psi) in expect {
            let e = row(bits);
            assert_eq!((e.x.re, e.x.im), (re, im), "{bits}");
            assert_eq!(e.n_a, n_a, "{bits}");
            assert!((e.psi - psi).abs() < 1e-15, "{bits}");
        }
    }

    #[test]
    fn unmodulated_carrier_map() {
        let c = ApskConstellation::<f64>::from_ratios(sched("4+12", 1), vec![2.08]).unwrap();
        let alpha = passive_na_alphabet(&c, 128).unwrap();
        let map = BitMap::build(&c, &alpha).unwrap();
        assert_eq!(map.len(), 16);
        assert!(map.entries().iter().all(|e| e.x == Cx::new(1.0, 0.0)));
        assert_eq!(map.format_label(5), "[|0101]");
    }

    #[test]
    fn bit_map_lookup_roundtrip() {
        let c = ApskConstellation::<f64>::optimize(sched("8+24+32", 8), 0.05).unwrap();
        let alpha = passive_na_alphabet(&c, 128).unwrap();
        let map = BitMap::build(&c, &alpha).unwrap();
        assert_eq!(map.len(), 64);
        for e in map.entries() {
            assert_eq!(map.lookup(e.x, e.n_a, e.psi), Some(e.label));
        }
    }

    #[test]
    fn gray_decode_small() {
        assert_eq!(
            (0..8).map(gray_decode).collect::<Vec<_>>(),
            vec![0, 1, 3, 2, 7, 6, 4, 5]
        );
    }

    #[test]
    fn works_in_single_precision() {
        let c = ApskConstellation::<f32>::optimize(sched("4+12", 4), 0.01).unwrap();
        assert!((c.radius_ratios()[0] - 2.08).abs() < 1e-5);
        let alpha = passive_na_alphabet(&c, 128).unwrap();
        assert_eq!(alpha.counts, vec![62, 128]);
    }
}
