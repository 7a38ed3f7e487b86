//! Conservative batch migrations without births or deaths: `k` individuals
//! hop from one site to a neighbour at a rate depending on both occupancies
//! and on the batch size.

use std::collections::BTreeMap;

use crate::change::Change;
use crate::config::{CoreError, LocalConfiguration};
use crate::model::{admissible_result, RateModel};
use crate::rat::{fmt_rat, zero, Rat};

use super::{CheckOutcome, ModelsError};

/// Rates `gamma[(alpha, beta, k)]`: a batch of `k` leaves a site holding
/// `alpha` for a neighbour holding `beta`. Entries absent from the table
/// are zero; the rate is direction-symmetric.
#[derive(Clone, Debug)]
pub struct GsTable {
    pub n: u32,
    pub m: u32,
    gamma: BTreeMap<(u32, u32, u32), Rat>,
}

impl GsTable {
    pub fn new(
        n: u32,
        m: u32,
        entries: Vec<((u32, u32, u32), Rat)>,
    ) -> Result<GsTable, ModelsError> {
        let mut gamma = BTreeMap::new();
        for ((alpha, beta, k), rate) in entries {
            if rate < zero() {
                return Err(ModelsError::Invalid("negative rate".to_string()));
            }
            if alpha > n || beta > n || k == 0 || k > m {
                return Err(ModelsError::Invalid(format!(
                    "bad table index ({alpha}, {beta}, {k})"
                )));
            }
            if k > alpha || beta + k > n {
                return Err(ModelsError::Invalid(format!(
                    "entry ({alpha}, {beta}, {k}) moves a value out of [0, {n}]"
                )));
            }
            if rate > zero() {
                *gamma.entry((alpha, beta, k)).or_insert_with(zero) += rate;
            }
        }
        Ok(GsTable { n, m, gamma })
    }

    pub fn rate(&self, alpha: u32, beta: u32, k: u32) -> Rat {
        self.gamma
            .get(&(alpha, beta, k))
            .cloned()
            .unwrap_or_else(zero)
    }

    /// Tail sum over batch sizes strictly above `above`.
    fn tail(&self, alpha: u32, beta: u32, above: i64) -> Rat {
        let mut acc = zero();
        for k in 1..=self.m {
            if (k as i64) > above {
                acc += self.rate(alpha, beta, k);
            }
        }
        acc
    }
}

/// Tail-sum attractiveness conditions for conservative batch migrations,
/// evaluated for every ordered occupancy pair and every threshold from zero
/// upward. (The threshold must start at zero: the single-batch comparisons
/// such as "a full batch here must be matchable there" appear only at the
/// zero threshold.)
pub fn check_gs_conservative(table: &GsTable) -> CheckOutcome {
    let n = table.n;
    for alpha in 0..=n {
        for gamma_v in alpha..=n {
            for beta in 0..=n {
                for delta_v in beta..=n {
                    for t in 0..=table.m {
                        let t = t as i64;
                        // departures from the lower pair must be matched above
                        let lhs = table.tail(alpha, beta, (delta_v - beta) as i64 + t);
                        let rhs = table.tail(gamma_v, delta_v, t);
                        if lhs > rhs {
                            return CheckOutcome::fail(format!(
                                "first tail condition violated at (alpha,beta)=({alpha},{beta}), \
                                 (gamma,delta)=({gamma_v},{delta_v}), l={t}: {} > {}",
                                fmt_rat(&lhs),
                                fmt_rat(&rhs)
                            ));
                        }
                        // and departures from the upper pair matched below
                        let lhs = table.tail(alpha, beta, t);
                        let rhs = table.tail(gamma_v, delta_v, (gamma_v - alpha) as i64 + t);
                        if lhs < rhs {
                            return CheckOutcome::fail(format!(
                                "second tail condition violated at (alpha,beta)=({alpha},{beta}), \
                                 (gamma,delta)=({gamma_v},{delta_v}), k={t}: {} < {}",
                                fmt_rat(&lhs),
                                fmt_rat(&rhs)
                            ));
                        }
                    }
                }
            }
        }
    }
    CheckOutcome::pass()
}

/// A translation-invariant nearest-neighbour model driven by a [`GsTable`].
#[derive(Clone, Debug)]
pub struct GsConservativeModel {
    pub table: GsTable,
    pub dim: u32,
}

impl RateModel for GsConservativeModel {
    fn max_value(&self) -> u32 {
        self.table.n
    }

    fn dep_radius(&self) -> u32 {
        0
    }

    fn delta(&self) -> u32 {
        1
    }

    fn dim(&self) -> u32 {
        self.dim
    }

    fn k_max(&self) -> u32 {
        self.table.m
    }

    fn l_max(&self) -> u32 {
        self.table.m
    }

    fn rate(&self, change: &Change, w: &LocalConfiguration) -> Result<Rat, CoreError> {
        if admissible_result(change, w)?.is_none() {
            return Ok(zero());
        }
        match change {
            Change::Migration {
                from,
                to,
                depart,
                arrive,
            } if depart == arrive && from.l1_dist(to) <= 1 => {
                Ok(self.table.rate(w.value(from)?, w.value(to)?, *depart))
            }
            _ => Ok(zero()),
        }
    }
}

/// The symmetric one-dimensional two-species exclusion model: values 0, 1, 2
/// encode the two species and holes; the five rates cover single and double
/// swaps in either direction.
pub type TwoSpeciesModel = GsConservativeModel;

/// Builds the ten-transition two-species model from its five rates.
pub fn two_species_rates(rates: &[Rat; 5]) -> Result<TwoSpeciesModel, ModelsError> {
    Ok(GsConservativeModel {
        table: two_species_gs_table(rates)?,
        dim: 1,
    })
}

pub fn two_species_gs_table(rates: &[Rat; 5]) -> Result<GsTable, ModelsError> {
    let [r1, r2, r3, r4, r5] = rates.clone();
    GsTable::new(
        2,
        2,
        vec![
            ((2, 0, 2), r1),
            ((1, 1, 1), r2),
            ((1, 0, 1), r3),
            ((2, 1, 1), r4),
            ((2, 0, 1), r5),
        ],
    )
}

/// Necessary-and-sufficient attractiveness chain for the two-species model:
/// `r1 v r2 <= r3 ^ r4 <= r3 v r4 <= r1 + r5`.
pub fn check_two_species_chain(rates: &[Rat; 5]) -> CheckOutcome {
    let [r1, r2, r3, r4, r5] = rates;
    let lo = r1.clone().max(r2.clone());
    let mid = r3.clone().min(r4.clone());
    let hi = r3.clone().max(r4.clone());
    let cap = r1 + r5;
    if lo > mid {
        CheckOutcome::fail(format!(
            "r1 v r2 = {} > {} = r3 ^ r4",
            fmt_rat(&lo),
            fmt_rat(&mid)
        ))
    } else if hi > cap {
        CheckOutcome::fail(format!(
            "r3 v r4 = {} > {} = r1 + r5",
            fmt_rat(&hi),
            fmt_rat(&cap)
        ))
    } else {
        CheckOutcome::pass()
    }
}
