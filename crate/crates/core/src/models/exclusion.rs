//! General exclusion processes on an explicit finite site list: each site
//! holds at most one particle, and a particle at `x` jumps to an empty `y`
//! (any other site) at a rate that may depend on the whole configuration.

use std::collections::BTreeMap;

use crate::change::Change;
use crate::config::{CoreError, LocalConfiguration};
use crate::lattice::{Site, Window};
use crate::model::RateModel;
use crate::rat::{fmt_rat, pos_part, zero, Rat};

use super::{CheckOutcome, ModelsError};

/// Jump rates `gamma[(configuration, from, to)]`. Missing entries are zero;
/// entries with an empty source or an occupied destination are rejected.
#[derive(Clone, Debug)]
pub struct ExclusionParams {
    pub sites: Vec<Site>,
    gamma: BTreeMap<(Vec<u32>, Site, Site), Rat>,
}

impl ExclusionParams {
    pub fn new(
        sites: Vec<Site>,
        entries: Vec<((Vec<u32>, Site, Site), Rat)>,
    ) -> Result<ExclusionParams, ModelsError> {
        let mut gamma = BTreeMap::new();
        let pos = |s: &Site| sites.iter().position(|t| t == s);
        for ((eta, from, to), rate) in entries {
            if rate < zero() {
                return Err(ModelsError::Invalid("negative rate".to_string()));
            }
            if eta.len() != sites.len() || eta.iter().any(|v| *v > 1) {
                return Err(ModelsError::Invalid(format!(
                    "configuration {eta:?} is not a 0/1 vector over {} sites",
                    sites.len()
                )));
            }
            let (fi, ti) = match (pos(&from), pos(&to)) {
                (Some(f), Some(t)) if f != t => (f, t),
                _ => {
                    return Err(ModelsError::Invalid(format!(
                        "bad jump pair {from:?} -> {to:?}"
                    )))
                }
            };
            if eta[fi] == 0 || eta[ti] == 1 {
                return Err(ModelsError::Invalid(format!(
                    "rate attached to an impossible jump {from:?} -> {to:?} from {eta:?}"
                )));
            }
            if rate > zero() {
                gamma.insert((eta, from, to), rate);
            }
        }
        Ok(ExclusionParams { sites, gamma })
    }

    pub fn gamma(&self, eta: &[u32], from: &Site, to: &Site) -> Rat {
        self.gamma
            .get(&(eta.to_vec(), from.clone(), to.clone()))
            .cloned()
            .unwrap_or_else(zero)
    }

    pub fn window(&self) -> std::sync::Arc<Window> {
        Window::from_sites(self.sites.clone()).expect("distinct sites")
    }
}

impl RateModel for ExclusionParams {
    fn max_value(&self) -> u32 {
        1
    }

    fn dep_radius(&self) -> u32 {
        // rates may read the whole site list
        self.sites.len() as u32
    }

    fn delta(&self) -> u32 {
        self.sites.len() as u32
    }

    fn dim(&self) -> u32 {
        1
    }

    fn k_max(&self) -> u32 {
        1
    }

    fn l_max(&self) -> u32 {
        1
    }

    fn rate(&self, change: &Change, w: &LocalConfiguration) -> Result<Rat, CoreError> {
        match change {
            Change::Migration {
                from,
                to,
                depart: 1,
                arrive: 1,
            } => {
                let mut eta = Vec::with_capacity(self.sites.len());
                for s in &self.sites {
                    eta.push(w.value(s)?);
                }
                if w.value(from)? == 0 || w.value(to)? == 1 {
                    return Ok(zero());
                }
                Ok(self.gamma(&eta, from, to))
            }
            _ => Ok(zero()),
        }
    }

    fn sites(&self) -> Option<Vec<Site>> {
        Some(self.sites.clone())
    }
}

/// Simple exclusion: the jump rate from `x` to `y` ignores the rest of the
/// configuration.
pub fn simple_exclusion(
    sites: Vec<Site>,
    q: impl Fn(&Site, &Site) -> Rat,
) -> Result<ExclusionParams, ModelsError> {
    let n = sites.len();
    let mut entries = Vec::new();
    for mask in 0u32..(1 << n) {
        let eta: Vec<u32> = (0..n).map(|i| (mask >> i) & 1).collect();
        for (fi, from) in sites.iter().enumerate() {
            for (ti, to) in sites.iter().enumerate() {
                if fi != ti && eta[fi] == 1 && eta[ti] == 0 {
                    entries.push(((eta.clone(), from.clone(), to.clone()), q(from, to)));
                }
            }
        }
    }
    ExclusionParams::new(sites, entries)
}

/// Attractiveness of a general exclusion process, checked directly from the
/// two families of inequalities: for every ordered pair of configurations,
/// inflow a lower configuration must make into an empty shared hole is
/// covered by donors the upper configuration can spare, and symmetrically
/// for outflow from a shared particle.
pub fn check_exclusion_attractive(p: &ExclusionParams) -> CheckOutcome {
    let n = p.sites.len();
    assert!(n <= 20, "site list too large for exhaustive check");
    for eta_mask in 0u32..(1 << n) {
        // xi ranges over supersets of eta
        let free = !eta_mask & ((1 << n) - 1);
        let mut extra = free;
        loop {
            let xi_mask = eta_mask | extra;
            let eta: Vec<u32> = (0..n).map(|i| (eta_mask >> i) & 1).collect();
            let xi: Vec<u32> = (0..n).map(|i| (xi_mask >> i) & 1).collect();
            for (xi_idx, x) in p.sites.iter().enumerate() {
                if xi[xi_idx] == 0 {
                    // inflow condition at a hole of the upper configuration
                    let mut lhs = zero();
                    let mut rhs = zero();
                    for (yi, y) in p.sites.iter().enumerate() {
                        if eta[yi] == 1 {
                            lhs += pos_part(&(p.gamma(&eta, y, x) - p.gamma(&xi, y, x)));
                        }
                        if xi[yi] == 1 && eta[yi] == 0 {
                            rhs += p.gamma(&xi, y, x);
                        }
                    }
                    if lhs > rhs {
                        return CheckOutcome::fail(format!(
                            "inflow condition fails at x={x:?}, eta={eta:?}, xi={xi:?}: {} > {}",
                            fmt_rat(&lhs),
                            fmt_rat(&rhs)
                        ));
                    }
                }
                if eta[xi_idx] == 1 {
                    // outflow condition at a particle of the lower configuration
                    let mut lhs = zero();
                    let mut rhs = zero();
                    for (yi, y) in p.sites.iter().enumerate() {
                        if xi[yi] == 0 {
                            lhs += pos_part(&(p.gamma(&xi, x, y) - p.gamma(&eta, x, y)));
                        }
                        if xi[yi] == 1 && eta[yi] == 0 {
                            rhs += p.gamma(&eta, x, y);
                        }
                    }
                    if lhs > rhs {
                        return CheckOutcome::fail(format!(
                            "outflow condition fails at x={x:?}, eta={eta:?}, xi={xi:?}: {} > {}",
                            fmt_rat(&lhs),
                            fmt_rat(&rhs)
                        ));
                    }
                }
            }
            if extra == 0 {
                break;
            }
            extra = (extra - 1) & free;
        }
    }
    CheckOutcome::pass()
}
