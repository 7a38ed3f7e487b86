//! Classification of the changes involving a site, for a fixed ordered pair
//! of configurations.
//!
//! For the lower configuration the dangerous moves are the ones that raise
//! the site strictly above the upper configuration; for the upper
//! configuration, the ones that drop it strictly below the lower one. Every
//! admissible rate-positive change is labelled by what it does at the site
//! (up or down, alone or paired with a neighbour) and by whether it keeps
//! the order against the other configuration frozen.

use thiserror::Error;

use crate::change::{apply_change, enumerate_changes_at, Change};
use crate::config::{CoreError, LocalConfiguration};
use crate::lattice::{Geometry, Site};
use crate::model::RateModel;
use crate::rat::{zero, Rat};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("window too small: classification at {site} needs radius {needed}")]
    WindowTooSmall { site: Site, needed: u32 },
    #[error("configurations are not ordered; classification is defined for eta <= xi only")]
    NotOrdered,
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// What a change does at the classified site.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CellKind {
    /// Raises the site, touching nothing else.
    UpAlone,
    /// Lowers the site, touching nothing else.
    DownAlone,
    /// Raises the site while lowering the partner.
    UpPair(Site),
    /// Lowers the site while raising the partner.
    DownPair(Site),
}

impl CellKind {
    pub fn partner(&self) -> Option<&Site> {
        match self {
            CellKind::UpPair(y) | CellKind::DownPair(y) => Some(y),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ClassifiedChange {
    pub change: Change,
    pub rate: Rat,
    pub result: LocalConfiguration,
    pub result_at_x: u32,
    pub kind: CellKind,
    /// Side 1: the result stays below the frozen upper configuration.
    /// Side 2: the frozen lower configuration stays below the result.
    pub order_safe: bool,
}

/// Classification of both processes' changes at one site.
pub struct Classification {
    pub x: Site,
    pub eta: LocalConfiguration,
    pub xi: LocalConfiguration,
    pub side1: Vec<ClassifiedChange>,
    pub side2: Vec<ClassifiedChange>,
    geometry: Geometry,
    k_max: u32,
    l_max: u32,
}

fn kind_at(change: &Change, x: &Site) -> CellKind {
    match change {
        Change::Arrival { .. } => CellKind::UpAlone,
        Change::Departure { .. } => CellKind::DownAlone,
        Change::Migration { from, to, .. } => {
            if to == x {
                CellKind::UpPair(from.clone())
            } else {
                CellKind::DownPair(to.clone())
            }
        }
    }
}

pub fn classify(
    m1: &dyn RateModel,
    m2: &dyn RateModel,
    eta: &LocalConfiguration,
    xi: &LocalConfiguration,
    x: &Site,
) -> Result<Classification, ClassifyError> {
    if !eta.leq(xi)? {
        return Err(ClassifyError::NotOrdered);
    }
    let geometry = m1.geometry();
    let k_max = m1.k_max().max(m2.k_max());
    let l_max = m1.l_max().max(m2.l_max());
    if matches!(geometry, Geometry::Open { .. }) {
        let needed = m1.delta().max(m2.delta()) + m1.dep_radius().max(m2.dep_radius());
        if !eta.window().covers_ball(x, needed) {
            return Err(ClassifyError::WindowTooSmall {
                site: x.clone(),
                needed,
            });
        }
    }

    let mut side1 = Vec::new();
    let mut side2 = Vec::new();
    for change in enumerate_changes_at(x, &geometry, k_max, l_max) {
        if let Ok(result) = apply_change(&change, eta) {
            let rate = m1.rate(&change, eta)?;
            if rate > zero() {
                let order_safe = result.leq(xi)?;
                side1.push(ClassifiedChange {
                    result_at_x: result.value(x)?,
                    kind: kind_at(&change, x),
                    change: change.clone(),
                    rate,
                    result,
                    order_safe,
                });
            }
        }
        if let Ok(result) = apply_change(&change, xi) {
            let rate = m2.rate(&change, xi)?;
            if rate > zero() {
                let order_safe = eta.leq(&result)?;
                side2.push(ClassifiedChange {
                    result_at_x: result.value(x)?,
                    kind: kind_at(&change, x),
                    change,
                    rate,
                    result,
                    order_safe,
                });
            }
        }
    }
    Ok(Classification {
        x: x.clone(),
        eta: eta.clone(),
        xi: xi.clone(),
        side1,
        side2,
        geometry,
        k_max,
        l_max,
    })
}

impl Classification {
    fn x_val_eta(&self) -> u32 {
        self.eta.value(&self.x).expect("x in window")
    }

    fn x_val_xi(&self) -> u32 {
        self.xi.value(&self.x).expect("x in window")
    }

    /// Side-1 changes that break the order alone: they push the site above
    /// the upper configuration.
    pub fn breaking1(&self) -> Vec<&ClassifiedChange> {
        let top = self.x_val_xi();
        self.side1
            .iter()
            .filter(|c| c.result_at_x > top)
            .collect()
    }

    /// Side-1 changes that lower the site.
    pub fn falling1(&self) -> Vec<&ClassifiedChange> {
        let base = self.x_val_eta();
        self.side1
            .iter()
            .filter(|c| c.result_at_x < base)
            .collect()
    }

    /// Side-2 changes that break the order alone: they drop the site below
    /// the lower configuration.
    pub fn breaking2(&self) -> Vec<&ClassifiedChange> {
        let base = self.x_val_eta();
        self.side2
            .iter()
            .filter(|c| c.result_at_x < base)
            .collect()
    }

    /// Side-2 changes that raise the site.
    pub fn rising2(&self) -> Vec<&ClassifiedChange> {
        let top = self.x_val_xi();
        self.side2
            .iter()
            .filter(|c| c.result_at_x > top)
            .collect()
    }

    pub fn is_breaking1(&self, c: &ClassifiedChange) -> bool {
        c.result_at_x > self.x_val_xi()
    }

    pub fn is_falling1(&self, c: &ClassifiedChange) -> bool {
        c.result_at_x < self.x_val_eta()
    }

    pub fn is_breaking2(&self, c: &ClassifiedChange) -> bool {
        c.result_at_x < self.x_val_eta()
    }

    pub fn is_rising2(&self, c: &ClassifiedChange) -> bool {
        c.result_at_x > self.x_val_xi()
    }

    /// All changes involving the site that are admissible from the upper
    /// configuration, with their side-2 rates (zero-rate ones included).
    fn admissible2(&self) -> Vec<(Change, LocalConfiguration)> {
        enumerate_changes_at(&self.x, &self.geometry, self.k_max, self.l_max)
            .into_iter()
            .filter_map(|c| apply_change(&c, &self.xi).ok().map(|r| (c, r)))
            .collect()
    }

    fn admissible1(&self) -> Vec<(Change, LocalConfiguration)> {
        enumerate_changes_at(&self.x, &self.geometry, self.k_max, self.l_max)
            .into_iter()
            .filter_map(|c| apply_change(&c, &self.eta).ok().map(|r| (c, r)))
            .collect()
    }

    /// Changes of the upper process dominating some member of `d1`: the
    /// up-set `{b : exists a in d1 with result(a) <= result(b)}`.
    pub fn up_set(&self, d1: &[Change]) -> Result<Vec<Change>, ClassifyError> {
        let results1: Vec<LocalConfiguration> = d1
            .iter()
            .map(|a| apply_change(a, &self.eta).map_err(ClassifyError::Core))
            .collect::<Result<_, _>>()?;
        let mut out = Vec::new();
        for (b, rb) in self.admissible2() {
            if results1
                .iter()
                .any(|ra| ra.leq(&rb).unwrap_or(false))
            {
                out.push(b);
            }
        }
        Ok(out)
    }

    /// Changes of the lower process dominated by some member of `d2`.
    pub fn down_set(&self, d2: &[Change]) -> Result<Vec<Change>, ClassifyError> {
        let results2: Vec<LocalConfiguration> = d2
            .iter()
            .map(|b| apply_change(b, &self.xi).map_err(ClassifyError::Core))
            .collect::<Result<_, _>>()?;
        let mut out = Vec::new();
        for (a, ra) in self.admissible1() {
            if results2
                .iter()
                .any(|rb| ra.leq(rb).unwrap_or(false))
            {
                out.push(a);
            }
        }
        Ok(out)
    }
}
