//! The rate-model interface: a rule assigning a non-negative rational rate
//! to each (change, configuration) pair.
//!
//! A model's rate is zero whenever the change cannot fire from the
//! configuration, and may depend only on values within the dependency
//! radius of the change's touched sites. Querying a value outside the
//! supplied window is an error, never a silent zero.

use crate::change::{apply_change, Change};
use crate::config::{CoreError, LocalConfiguration};
use crate::lattice::{Geometry, Site};
use crate::rat::Rat;

pub trait RateModel: Send + Sync {
    /// Maximum occupancy `N`; site values live in `[0, N]`.
    fn max_value(&self) -> u32;

    /// Dependency radius: rates may read values up to this L1 distance from
    /// the change's touched sites.
    fn dep_radius(&self) -> u32;

    /// Neighbourhood radius for migrations.
    fn delta(&self) -> u32;

    fn dim(&self) -> u32;

    /// Largest batch that can depart in one change.
    fn k_max(&self) -> u32;

    /// Largest batch that can arrive in one change.
    fn l_max(&self) -> u32;

    fn rate(&self, change: &Change, w: &LocalConfiguration) -> Result<Rat, CoreError>;

    /// Explicit site list for models without translation invariance
    /// (e.g. exclusion processes with arbitrary-range jumps).
    fn sites(&self) -> Option<Vec<Site>> {
        None
    }

    fn is_translation_invariant(&self) -> bool {
        self.sites().is_none()
    }

    fn geometry(&self) -> Geometry {
        match self.sites() {
            Some(sites) => Geometry::Complete { sites },
            None => Geometry::Open {
                dim: self.dim(),
                delta: self.delta(),
            },
        }
    }
}

/// Admissibility helper shared by model implementations: `Ok(None)` means
/// the change cannot fire (rate zero); window errors propagate.
pub fn admissible_result(
    change: &Change,
    w: &LocalConfiguration,
) -> Result<Option<LocalConfiguration>, CoreError> {
    match apply_change(change, w) {
        Ok(res) => Ok(Some(res)),
        Err(CoreError::Domain { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}
