//! Table-driven models: explicit (change pattern, window pattern, rate)
//! triples. Patterns are anchored at the change's primary site (the site of
//! an arrival or departure, the departure site of a migration); the first
//! matching entry wins and absent patterns mean rate zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::change::{enumerate_changes_at, Change};
use crate::config::{CoreError, LocalConfiguration};
use crate::lattice::{Geometry, Site};
use crate::model::{admissible_result, RateModel};
use crate::rat::{rat, zero, Rat};

use super::ModelsError;

#[derive(Clone, Debug)]
pub struct PatternEntry {
    /// Change with sites relative to the anchor (the anchor itself is the
    /// origin).
    pub shape: Change,
    /// Required values at offsets relative to the anchor; empty means the
    /// entry matches whenever the change is admissible.
    pub window: Vec<(Site, u32)>,
    pub rate: Rat,
}

#[derive(Clone, Debug)]
pub struct PatternRatesModel {
    pub n: u32,
    pub dim: u32,
    pub delta: u32,
    pub k_max: u32,
    pub l_max: u32,
    entries: Vec<PatternEntry>,
    rho: u32,
}

/// The primary site a pattern is anchored at.
pub(crate) fn anchor_of(change: &Change) -> &Site {
    match change {
        Change::Arrival { site, .. } | Change::Departure { site, .. } => site,
        Change::Migration { from, .. } => from,
    }
}

impl PatternRatesModel {
    pub fn new(
        n: u32,
        dim: u32,
        delta: u32,
        k_max: u32,
        l_max: u32,
        entries: Vec<PatternEntry>,
    ) -> Result<PatternRatesModel, ModelsError> {
        let origin = Site(vec![0; dim as usize]);
        let mut rho = 0u32;
        for e in &entries {
            if e.rate < zero() {
                return Err(ModelsError::Invalid("negative rate".to_string()));
            }
            if *anchor_of(&e.shape) != origin {
                return Err(ModelsError::Invalid(format!(
                    "pattern {:?} is not anchored at the origin",
                    e.shape
                )));
            }
            if let Change::Migration { to, .. } = &e.shape {
                if origin.l1_dist(to) > delta {
                    return Err(ModelsError::Invalid(format!(
                        "pattern {:?} migrates beyond the neighbourhood radius {delta}",
                        e.shape
                    )));
                }
            }
            for (off, v) in &e.window {
                if *v > n {
                    return Err(ModelsError::Invalid(format!(
                        "window constraint value {v} exceeds N = {n}"
                    )));
                }
                // distance from the constrained offset to the nearest touched site
                let d = e
                    .shape
                    .touched_sites()
                    .iter()
                    .map(|t| t.relative_to(&origin).l1_dist(off))
                    .min()
                    .unwrap_or(0);
                rho = rho.max(d);
            }
        }
        Ok(PatternRatesModel {
            n,
            dim,
            delta,
            k_max,
            l_max,
            entries,
            rho,
        })
    }

    pub fn entries(&self) -> &[PatternEntry] {
        &self.entries
    }
}

impl RateModel for PatternRatesModel {
    fn max_value(&self) -> u32 {
        self.n
    }

    fn dep_radius(&self) -> u32 {
        self.rho
    }

    fn delta(&self) -> u32 {
        self.delta
    }

    fn dim(&self) -> u32 {
        self.dim
    }

    fn k_max(&self) -> u32 {
        self.k_max
    }

    fn l_max(&self) -> u32 {
        self.l_max
    }

    fn rate(&self, change: &Change, w: &LocalConfiguration) -> Result<Rat, CoreError> {
        if admissible_result(change, w)?.is_none() {
            return Ok(zero());
        }
        let anchor = anchor_of(change).clone();
        let rel = change.relative_to(&anchor);
        for e in &self.entries {
            if e.shape != rel {
                continue;
            }
            let mut matches = true;
            for (off, v) in &e.window {
                if w.value(&anchor.translate(off))? != *v {
                    matches = false;
                    break;
                }
            }
            if matches {
                return Ok(e.rate.clone());
            }
        }
        Ok(zero())
    }
}

/// A reproducible fuzz model: every change shape within the bounds gets a
/// random rate for each combination of values at its touched sites, with
/// roughly the requested share of zero entries. The rate depends only on the
/// touched sites, so the dependency radius is zero.
pub fn random_local_model(
    seed: u64,
    n: u32,
    dim: u32,
    delta: u32,
    k_max: u32,
    l_max: u32,
    zero_percent: u32,
) -> PatternRatesModel {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let origin = Site(vec![0; dim as usize]);
    let geo = Geometry::Open { dim, delta };
    let mut shapes: Vec<Change> = Vec::new();
    for c in enumerate_changes_at(&origin, &geo, k_max, l_max) {
        let rel = c.relative_to(anchor_of(&c));
        if !shapes.contains(&rel) {
            shapes.push(rel);
        }
    }
    let mut entries = Vec::new();
    for shape in shapes {
        let touched: Vec<Site> = shape.touched_sites().into_iter().cloned().collect();
        let mut combos = vec![vec![]];
        for _ in 0..touched.len() {
            let mut next = Vec::new();
            for c in &combos {
                for v in 0..=n {
                    let mut c2: Vec<u32> = c.clone();
                    c2.push(v);
                    next.push(c2);
                }
            }
            combos = next;
        }
        for combo in combos {
            let rate = if rng.gen_range(0..100) < zero_percent {
                zero()
            } else {
                rat(rng.gen_range(1..=12), rng.gen_range(1..=6))
            };
            if rate == zero() {
                continue;
            }
            entries.push(PatternEntry {
                shape: shape.clone(),
                window: touched.iter().cloned().zip(combo).collect(),
                rate,
            });
        }
    }
    PatternRatesModel::new(n, dim, delta, k_max, l_max, entries).expect("valid fuzz model")
}
