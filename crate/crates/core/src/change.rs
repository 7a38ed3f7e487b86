//! Canonical local change maps: arrivals, departures and (possibly
//! non-conservative) migrations.
//!
//! A migration moving `depart` individuals out of `from` while `arrive`
//! individuals land at `to` has exactly one representation here, so the two
//! ways of writing the same map (viewed from either endpoint) collapse to a
//! single value.

use std::fmt;

use crate::config::{CoreError, LocalConfiguration};
use crate::lattice::{Geometry, Site};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Change {
    /// `k` individuals appear at `site`.
    Arrival { site: Site, k: u32 },
    /// `k` individuals leave `site` (a departure or catastrophe).
    Departure { site: Site, k: u32 },
    /// `depart` individuals leave `from`; `arrive` individuals reach `to`.
    Migration {
        from: Site,
        to: Site,
        depart: u32,
        arrive: u32,
    },
}

impl fmt::Debug for Change {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.descriptor())
    }
}

impl Change {
    pub fn arrival(site: Site, k: u32) -> Change {
        assert!(k >= 1);
        Change::Arrival { site, k }
    }

    pub fn departure(site: Site, k: u32) -> Change {
        assert!(k >= 1);
        Change::Departure { site, k }
    }

    pub fn migration(from: Site, to: Site, depart: u32, arrive: u32) -> Change {
        assert!(depart >= 1 && arrive >= 1);
        assert!(from != to, "migration endpoints must differ");
        Change::Migration {
            from,
            to,
            depart,
            arrive,
        }
    }

    /// Sites whose value the change modifies.
    pub fn touched_sites(&self) -> Vec<&Site> {
        match self {
            Change::Arrival { site, .. } | Change::Departure { site, .. } => vec![site],
            Change::Migration { from, to, .. } => vec![from, to],
        }
    }

    /// Signed value deltas per touched site.
    pub fn deltas(&self) -> Vec<(&Site, i64)> {
        match self {
            Change::Arrival { site, k } => vec![(site, *k as i64)],
            Change::Departure { site, k } => vec![(site, -(*k as i64))],
            Change::Migration {
                from,
                to,
                depart,
                arrive,
            } => vec![(from, -(*depart as i64)), (to, *arrive as i64)],
        }
    }

    /// The change with all deltas negated. Applying a change and then its
    /// inverse restores the original configuration.
    pub fn inverse(&self) -> Change {
        match self {
            Change::Arrival { site, k } => Change::departure(site.clone(), *k),
            Change::Departure { site, k } => Change::arrival(site.clone(), *k),
            Change::Migration {
                from,
                to,
                depart,
                arrive,
            } => Change::migration(to.clone(), from.clone(), *arrive, *depart),
        }
    }

    /// Change translated so that sites move by `base` (used to shift between
    /// torus coordinates and window-relative coordinates).
    pub fn translate(&self, base: &Site) -> Change {
        match self {
            Change::Arrival { site, k } => Change::Arrival {
                site: site.translate(base),
                k: *k,
            },
            Change::Departure { site, k } => Change::Departure {
                site: site.translate(base),
                k: *k,
            },
            Change::Migration {
                from,
                to,
                depart,
                arrive,
            } => Change::Migration {
                from: from.translate(base),
                to: to.translate(base),
                depart: *depart,
                arrive: *arrive,
            },
        }
    }

    pub fn relative_to(&self, base: &Site) -> Change {
        let neg = Site(base.0.iter().map(|c| -c).collect());
        self.translate(&neg)
    }

    /// Wire descriptor: `arr:x:k`, `dep:x:k` or `mig:from:to:k:l` where `k`
    /// departs and `l` arrives.
    pub fn descriptor(&self) -> String {
        match self {
            Change::Arrival { site, k } => format!("arr:{site}:{k}"),
            Change::Departure { site, k } => format!("dep:{site}:{k}"),
            Change::Migration {
                from,
                to,
                depart,
                arrive,
            } => format!("mig:{from}:{to}:{depart}:{arrive}"),
        }
    }

    pub fn parse_descriptor(s: &str) -> Result<Change, String> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let usite = crate::lattice::parse_site;
        let uk = |t: &str| -> Result<u32, String> {
            let k: u32 = t.parse().map_err(|_| format!("bad count {t:?}"))?;
            if k == 0 {
                return Err("counts must be at least 1".into());
            }
            Ok(k)
        };
        match parts.as_slice() {
            ["arr", x, k] => Ok(Change::arrival(usite(x)?, uk(k)?)),
            ["dep", x, k] => Ok(Change::departure(usite(x)?, uk(k)?)),
            ["mig", from, to, k, l] => {
                Ok(Change::migration(usite(from)?, usite(to)?, uk(k)?, uk(l)?))
            }
            _ => Err(format!("bad change descriptor {s:?}")),
        }
    }
}

/// Applies a change to a window, failing when a touched site falls outside
/// the window or when a resulting value leaves `[0, max_value]`.
pub fn apply_change(
    change: &Change,
    w: &LocalConfiguration,
) -> Result<LocalConfiguration, CoreError> {
    let mut out = w.clone();
    for (site, delta) in change.deltas() {
        let old = w.value(site)? as i64;
        let new = old + delta;
        if new < 0 || new > w.max_value() as i64 {
            return Err(CoreError::Domain {
                site: site.clone(),
                max: w.max_value(),
            });
        }
        out.set(site, new as u32);
    }
    Ok(out)
}

/// True when the change can fire from `w` (all touched sites present and in
/// range afterwards).
pub fn admissible(change: &Change, w: &LocalConfiguration) -> bool {
    apply_change(change, w).is_ok()
}

/// All canonical changes involving site `x`: arrivals and departures at `x`
/// plus migrations between `x` and each of its neighbours, with batch sizes
/// bounded by `k_max` departing and `l_max` arriving.
pub fn enumerate_changes_at(
    x: &Site,
    geometry: &Geometry,
    k_max: u32,
    l_max: u32,
) -> Vec<Change> {
    assert!(k_max >= 1 && l_max >= 1);
    let mut out = Vec::new();
    for k in 1..=k_max {
        out.push(Change::arrival(x.clone(), k));
    }
    for k in 1..=k_max {
        out.push(Change::departure(x.clone(), k));
    }
    for y in geometry.neighbors(x) {
        for depart in 1..=k_max {
            for arrive in 1..=l_max {
                out.push(Change::migration(x.clone(), y.clone(), depart, arrive));
                out.push(Change::migration(y.clone(), x.clone(), depart, arrive));
            }
        }
    }
    out
}
