//! The worked non-conservative pair: a first process with deaths,
//! conservative single migrations and migrations that gain an individual in
//! transit, against a second process with arrivals, the same deaths and
//! conservative migrations only.

use crate::change::Change;
use crate::lattice::Site;
use crate::rat::{zero, Rat};

use super::table::{PatternEntry, PatternRatesModel};
use super::ModelsError;

/// Parameters of the pair; all rates are constant in the configuration.
#[derive(Clone, Debug)]
pub struct NonconservativeRates {
    pub mu1: Rat,
    pub mu2: Rat,
    pub gamma1: Rat,
    pub gamma2: Rat,
    pub alpha1: Rat,
    pub alpha2: Rat,
    pub beta: Rat,
}

/// Builds the two processes on values `0..=n`; the first has deaths of one
/// and two, conservative migrations at `gamma1` and gain-one migrations at
/// `gamma2`; the second has arrivals of one and two, the same deaths, and
/// conservative migrations at `beta`.
pub fn nonconservative_example_rates(
    r: &NonconservativeRates,
    n: u32,
) -> Result<(PatternRatesModel, PatternRatesModel), ModelsError> {
    for v in [
        &r.mu1, &r.mu2, &r.gamma1, &r.gamma2, &r.alpha1, &r.alpha2, &r.beta,
    ] {
        if *v < zero() {
            return Err(ModelsError::Invalid("negative rate".to_string()));
        }
    }
    let o = Site::at(0);
    let dirs = [Site::at(1), Site::at(-1)];
    let plain = |shape: Change, rate: &Rat| PatternEntry {
        shape,
        window: vec![],
        rate: rate.clone(),
    };

    let mut first = vec![
        plain(Change::departure(o.clone(), 1), &r.mu1),
        plain(Change::departure(o.clone(), 2), &r.mu2),
    ];
    for d in &dirs {
        first.push(plain(Change::migration(o.clone(), d.clone(), 1, 1), &r.gamma1));
        first.push(plain(Change::migration(o.clone(), d.clone(), 1, 2), &r.gamma2));
    }
    let first = PatternRatesModel::new(n, 1, 1, 2, 2, first)?;

    let mut second = vec![
        plain(Change::arrival(o.clone(), 1), &r.alpha1),
        plain(Change::arrival(o.clone(), 2), &r.alpha2),
        plain(Change::departure(o.clone(), 1), &r.mu1),
        plain(Change::departure(o.clone(), 2), &r.mu2),
    ];
    for d in &dirs {
        second.push(plain(Change::migration(o.clone(), d.clone(), 1, 1), &r.beta));
    }
    let second = PatternRatesModel::new(n, 1, 1, 2, 2, second)?;

    Ok((first, second))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::LocalConfiguration;
    use crate::model::RateModel;
    use crate::rat::{rat, rint};

    pub(crate) fn worked_rates() -> NonconservativeRates {
        NonconservativeRates {
            mu1: rint(1),
            mu2: rat(3, 2),
            gamma1: rint(1),
            gamma2: rint(2),
            alpha1: rint(1),
            alpha2: rint(4),
            beta: rat(3, 2),
        }
    }

    #[test]
    fn rates_match_the_table() {
        let (a, b) = nonconservative_example_rates(&worked_rates(), 5).unwrap();
        let w = LocalConfiguration::path(&[1, 2, 3, 1, 1], 5);
        // first process: a gain-one migration (one departs, two arrive)
        let c = Change::migration(Site::at(0), Site::at(1), 1, 2);
        assert_eq!(a.rate(&c, &w).unwrap(), rint(2));
        // second process: arrivals of two
        let c = Change::arrival(Site::at(0), 2);
        assert_eq!(b.rate(&c, &w).unwrap(), rint(4));
        // second process has no gain-one migration
        let c = Change::migration(Site::at(0), Site::at(1), 1, 2);
        assert_eq!(b.rate(&c, &w).unwrap(), zero());
        // both processes share the death rates
        let c = Change::departure(Site::at(0), 2);
        assert_eq!(a.rate(&c, &w).unwrap(), rat(3, 2));
        assert_eq!(b.rate(&c, &w).unwrap(), rat(3, 2));
    }

    #[test]
    fn rates_vanish_outside_the_domain() {
        let (a, _) = nonconservative_example_rates(&worked_rates(), 5).unwrap();
        // nothing can die at an empty site
        let w = LocalConfiguration::path(&[1, 1, 0, 1, 1], 5);
        assert_eq!(
            a.rate(&Change::departure(Site::at(0), 1), &w).unwrap(),
            zero()
        );
        // a gain-one migration cannot overfill its destination
        let w = LocalConfiguration::path(&[1, 4, 2, 1, 1], 5);
        assert_eq!(
            a.rate(&Change::migration(Site::at(0), Site::at(-1), 1, 2), &w)
                .unwrap(),
            zero()
        );
    }
}
