//! Deciding the two rate conditions at a site, and lifting them to whole
//! models by enumerating ordered configuration pairs.
//!
//! At a site, the first condition asks that every set of order-breaking
//! raises of the lower process be outweighed by the upper-process changes
//! dominating it; the second is the mirror for order-breaking drops of the
//! upper process. Each family of subset inequalities is decided in one shot
//! as a transportation-saturation problem: demands are the breaking moves at
//! their exact rates, supplies are all rate-positive moves of the other
//! process, and an arc exists where the results are ordered. Feasibility of
//! that network is equivalent to all the subset inequalities at once, and an
//! infeasibility cut yields a violating subset. A literal subset enumerator
//! serves as the independent oracle.

use std::fmt;

use thiserror::Error;

use crate::change::Change;
use crate::changesets::{classify, Classification, ClassifyError};
use crate::config::LocalConfiguration;
use crate::lattice::{Site, Window};
use crate::model::RateModel;
use crate::netflow::{FlowNetwork, Node};
use crate::rat::{fmt_rat, zero, Rat};

#[derive(Debug, Error)]
pub enum CompError {
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error("models are incompatible: {0}")]
    Mismatch(String),
    #[error("breaking set of size {0} too large for subset enumeration")]
    TooLarge(usize),
    #[error("enumeration of {0} condition checks exceeds the budget {1}")]
    ExplosionGuard(u64, u64),
    #[error("window radius {0} below the dependency requirement {1}")]
    RadiusTooSmall(u32, u32),
}

/// Which of the two conditions a certificate violates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CondSide {
    C1,
    C2,
}

impl fmt::Display for CondSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CondSide::C1 => write!(f, "c1"),
            CondSide::C2 => write!(f, "c2"),
        }
    }
}

/// A violated subset inequality, replayable against the models.
#[derive(Clone, Debug)]
pub struct ConditionCertificate {
    pub x: Site,
    pub eta: LocalConfiguration,
    pub xi: LocalConfiguration,
    pub side: CondSide,
    pub subset: Vec<Change>,
    pub lhs: Rat,
    pub rhs: Rat,
}

impl ConditionCertificate {
    /// Recomputes both sides of the violated inequality from scratch.
    pub fn replay(
        &self,
        m1: &dyn RateModel,
        m2: &dyn RateModel,
    ) -> Result<(Rat, Rat), CompError> {
        let cls = classify(m1, m2, &self.eta, &self.xi, &self.x)?;
        let (lhs, rhs) = match self.side {
            CondSide::C1 => {
                let lhs = self
                    .subset
                    .iter()
                    .map(|a| m1.rate(a, &self.eta).map_err(ClassifyError::Core))
                    .sum::<Result<Rat, _>>()?;
                let up = cls.up_set(&self.subset)?;
                let rhs = up
                    .iter()
                    .map(|b| m2.rate(b, &self.xi).map_err(ClassifyError::Core))
                    .sum::<Result<Rat, _>>()?;
                (lhs, rhs)
            }
            CondSide::C2 => {
                let lhs = self
                    .subset
                    .iter()
                    .map(|b| m2.rate(b, &self.xi).map_err(ClassifyError::Core))
                    .sum::<Result<Rat, _>>()?;
                let down = cls.down_set(&self.subset)?;
                let rhs = down
                    .iter()
                    .map(|a| m1.rate(a, &self.eta).map_err(ClassifyError::Core))
                    .sum::<Result<Rat, _>>()?;
                (lhs, rhs)
            }
        };
        Ok((lhs, rhs))
    }

    pub fn describe(&self) -> String {
        let subset: Vec<String> = self.subset.iter().map(|c| c.descriptor()).collect();
        format!(
            "condition ({}) fails at x = {}, eta = {:?}, xi = {:?}: subset {{{}}} has rate {} > {}",
            self.side,
            self.x,
            self.eta.values(),
            self.xi.values(),
            subset.join(", "),
            fmt_rat(&self.lhs),
            fmt_rat(&self.rhs),
        )
    }
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub holds: bool,
    pub certificate: Option<ConditionCertificate>,
}

impl Verdict {
    fn pass() -> Verdict {
        Verdict {
            holds: true,
            certificate: None,
        }
    }

    fn fail(cert: ConditionCertificate) -> Verdict {
        Verdict {
            holds: false,
            certificate: Some(cert),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum CondNode {
    Supply(Change),
    Demand(Change),
}

impl fmt::Debug for CondNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CondNode::Supply(c) => write!(f, "sup:{}", c.descriptor()),
            CondNode::Demand(c) => write!(f, "dem:{}", c.descriptor()),
        }
    }
}

/// One side of the condition pair as a saturation problem: returns the
/// violating subset if the demands cannot all be met.
fn saturation_check(
    demands: &[(&Change, &LocalConfiguration, Rat)],
    supplies: &[(&Change, &LocalConfiguration, Rat)],
    demand_below_supply: bool,
) -> Option<Vec<Change>> {
    if demands.is_empty() {
        return None;
    }
    let mut net: FlowNetwork<CondNode> = FlowNetwork::new();
    for (b, _, rate) in supplies {
        net.arc(
            Node::O,
            Node::Inner(CondNode::Supply((*b).clone())),
            zero(),
            Some(rate.clone()),
        )
        .expect("fresh supply arc");
    }
    for (a, ra, rate) in demands {
        net.arc(
            Node::Inner(CondNode::Demand((*a).clone())),
            Node::Z,
            rate.clone(),
            Some(rate.clone()),
        )
        .expect("fresh demand arc");
        for (b, rb, _) in supplies {
            let dominated = if demand_below_supply {
                ra.leq(rb).unwrap_or(false)
            } else {
                rb.leq(ra).unwrap_or(false)
            };
            if dominated {
                net.arc(
                    Node::Inner(CondNode::Supply((*b).clone())),
                    Node::Inner(CondNode::Demand((*a).clone())),
                    zero(),
                    None,
                )
                .expect("fresh middle arc");
            }
        }
    }
    match net.solve_feasible() {
        Ok(_) => None,
        Err(cut) => {
            let mut subset = Vec::new();
            for (a, _, _) in demands {
                let node = Node::Inner(CondNode::Demand((*a).clone()));
                if !cut.x_side.contains(&node) {
                    subset.push((*a).clone());
                }
            }
            Some(subset)
        }
    }
}

/// Decides both conditions at one site via the saturation reduction.
pub fn check_c1_c2_at(
    m1: &dyn RateModel,
    m2: &dyn RateModel,
    eta: &LocalConfiguration,
    xi: &LocalConfiguration,
    x: &Site,
) -> Result<Verdict, CompError> {
    let cls = classify(m1, m2, eta, xi, x)?;
    check_c1_c2_classified(&cls)
}

fn certificate_from(
    cls: &Classification,
    side: CondSide,
    subset: Vec<Change>,
) -> Result<ConditionCertificate, CompError> {
    let (lhs, rhs) = match side {
        CondSide::C1 => {
            let lhs = subset
                .iter()
                .map(|a| {
                    cls.side1
                        .iter()
                        .find(|c| &c.change == a)
                        .map(|c| c.rate.clone())
                        .unwrap_or_else(zero)
                })
                .sum();
            let results: Vec<&LocalConfiguration> = cls
                .side1
                .iter()
                .filter(|c| subset.contains(&c.change))
                .map(|c| &c.result)
                .collect();
            let rhs = cls
                .side2
                .iter()
                .filter(|b| results.iter().any(|ra| ra.leq(&b.result).unwrap_or(false)))
                .map(|b| b.rate.clone())
                .sum();
            (lhs, rhs)
        }
        CondSide::C2 => {
            let lhs = subset
                .iter()
                .map(|b| {
                    cls.side2
                        .iter()
                        .find(|c| &c.change == b)
                        .map(|c| c.rate.clone())
                        .unwrap_or_else(zero)
                })
                .sum();
            let results: Vec<&LocalConfiguration> = cls
                .side2
                .iter()
                .filter(|c| subset.contains(&c.change))
                .map(|c| &c.result)
                .collect();
            let rhs = cls
                .side1
                .iter()
                .filter(|a| results.iter().any(|rb| a.result.leq(rb).unwrap_or(false)))
                .map(|a| a.rate.clone())
                .sum();
            (lhs, rhs)
        }
    };
    Ok(ConditionCertificate {
        x: cls.x.clone(),
        eta: cls.eta.clone(),
        xi: cls.xi.clone(),
        side,
        subset,
        lhs,
        rhs,
    })
}

pub(crate) fn check_c1_c2_classified(cls: &Classification) -> Result<Verdict, CompError> {
    // first condition: breaking raises of the lower process as demands,
    // everything the upper process can do as supplies
    let demands: Vec<(&Change, &LocalConfiguration, Rat)> = cls
        .breaking1()
        .iter()
        .map(|c| (&c.change, &c.result, c.rate.clone()))
        .collect();
    let supplies: Vec<(&Change, &LocalConfiguration, Rat)> = cls
        .side2
        .iter()
        .map(|c| (&c.change, &c.result, c.rate.clone()))
        .collect();
    if let Some(subset) = saturation_check(&demands, &supplies, true) {
        let cert = certificate_from(cls, CondSide::C1, subset)?;
        debug_assert!(cert.lhs > cert.rhs);
        return Ok(Verdict::fail(cert));
    }
    // second condition: breaking drops of the upper process as demands,
    // everything the lower process can do as supplies
    let demands: Vec<(&Change, &LocalConfiguration, Rat)> = cls
        .breaking2()
        .iter()
        .map(|c| (&c.change, &c.result, c.rate.clone()))
        .collect();
    let supplies: Vec<(&Change, &LocalConfiguration, Rat)> = cls
        .side1
        .iter()
        .map(|c| (&c.change, &c.result, c.rate.clone()))
        .collect();
    if let Some(subset) = saturation_check(&demands, &supplies, false) {
        let cert = certificate_from(cls, CondSide::C2, subset)?;
        debug_assert!(cert.lhs > cert.rhs);
        return Ok(Verdict::fail(cert));
    }
    Ok(Verdict::pass())
}

/// Literal subset enumeration of both condition families; the independent
/// oracle for [`check_c1_c2_at`].
pub fn check_c1_c2_bruteforce(
    m1: &dyn RateModel,
    m2: &dyn RateModel,
    eta: &LocalConfiguration,
    xi: &LocalConfiguration,
    x: &Site,
) -> Result<Verdict, CompError> {
    let cls = classify(m1, m2, eta, xi, x)?;

    let run = |demands: Vec<&crate::changesets::ClassifiedChange>,
               supplies: Vec<&crate::changesets::ClassifiedChange>,
               demand_below: bool,
               side: CondSide|
     -> Result<Option<ConditionCertificate>, CompError> {
        let n = demands.len();
        if n > 20 {
            return Err(CompError::TooLarge(n));
        }
        // per-supply bitmask of dominated demands
        let masks: Vec<u64> = supplies
            .iter()
            .map(|b| {
                let mut m = 0u64;
                for (i, a) in demands.iter().enumerate() {
                    let dom = if demand_below {
                        a.result.leq(&b.result).unwrap_or(false)
                    } else {
                        b.result.leq(&a.result).unwrap_or(false)
                    };
                    if dom {
                        m |= 1 << i;
                    }
                }
                m
            })
            .collect();
        for subset in 1u64..(1 << n) {
            let mut lhs = zero();
            for (i, a) in demands.iter().enumerate() {
                if subset & (1 << i) != 0 {
                    lhs += &a.rate;
                }
            }
            let mut rhs = zero();
            for (b, mask) in supplies.iter().zip(&masks) {
                if mask & subset != 0 {
                    rhs += &b.rate;
                }
            }
            if lhs > rhs {
                let chosen: Vec<Change> = demands
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| subset & (1 << i) != 0)
                    .map(|(_, a)| a.change.clone())
                    .collect();
                return Ok(Some(certificate_from(&cls, side, chosen)?));
            }
        }
        Ok(None)
    };

    if let Some(cert) = run(
        cls.breaking1(),
        cls.side2.iter().collect(),
        true,
        CondSide::C1,
    )? {
        return Ok(Verdict::fail(cert));
    }
    if let Some(cert) = run(
        cls.breaking2(),
        cls.side1.iter().collect(),
        false,
        CondSide::C2,
    )? {
        return Ok(Verdict::fail(cert));
    }
    Ok(Verdict::pass())
}

/// Enumeration controls for whole-model checks.
#[derive(Clone, Debug)]
pub struct EnumerationConfig {
    /// Window radius for translation-invariant models; defaults to the
    /// dependency requirement `delta + rho`.
    pub radius: Option<u32>,
    /// Maximum number of per-site condition checks.
    pub budget: u64,
    pub threads: usize,
}

impl Default for EnumerationConfig {
    fn default() -> Self {
        EnumerationConfig {
            radius: None,
            budget: 5_000_000,
            threads: 1,
        }
    }
}

fn compatible(m1: &dyn RateModel, m2: &dyn RateModel) -> Result<(), CompError> {
    if m1.max_value() != m2.max_value() {
        return Err(CompError::Mismatch(format!(
            "occupancy bounds differ: {} vs {}",
            m1.max_value(),
            m2.max_value()
        )));
    }
    if m1.dim() != m2.dim() || m1.delta() != m2.delta() {
        return Err(CompError::Mismatch(
            "lattice dimension or neighbourhood radius differ".to_string(),
        ));
    }
    match (m1.sites(), m2.sites()) {
        (None, None) => Ok(()),
        (Some(a), Some(b)) if a == b => Ok(()),
        _ => Err(CompError::Mismatch(
            "models live on different site sets".to_string(),
        )),
    }
}

/// Decides whole-model comparability by enumerating every ordered pair of
/// configurations on a dependency-covering window (translation-invariant
/// models check a generic site; site-list models check every site).
pub fn check_model_comparability(
    m1: &dyn RateModel,
    m2: &dyn RateModel,
    cfg: &EnumerationConfig,
) -> Result<Verdict, CompError> {
    compatible(m1, m2)?;
    let n = m1.max_value();

    let (window, check_sites) = match m1.sites() {
        Some(sites) => {
            let w = Window::from_sites(sites.clone()).expect("distinct sites");
            (w, sites)
        }
        None => {
            let needed = m1.delta().max(m2.delta()) + m1.dep_radius().max(m2.dep_radius());
            let radius = cfg.radius.unwrap_or(needed);
            if radius < needed {
                return Err(CompError::RadiusTooSmall(radius, needed));
            }
            let origin = Site(vec![0; m1.dim() as usize]);
            let w = if m1.dim() == 1 {
                Window::path_1d(0, radius)
            } else {
                Window::box_dd(&origin, radius)
            };
            (w, vec![origin])
        }
    };

    // ordered value pairs per site, lexicographic
    let pair_codes: Vec<(u32, u32)> = (0..=n)
        .flat_map(|a| (a..=n).map(move |b| (a, b)))
        .collect();
    let t = pair_codes.len() as u64;
    let sites_in_window = window.len() as u32;
    let total_pairs = t
        .checked_pow(sites_in_window)
        .ok_or(CompError::ExplosionGuard(u64::MAX, cfg.budget))?;
    let total_checks = total_pairs
        .checked_mul(check_sites.len() as u64)
        .ok_or(CompError::ExplosionGuard(u64::MAX, cfg.budget))?;
    if total_checks > cfg.budget {
        return Err(CompError::ExplosionGuard(total_checks, cfg.budget));
    }

    let decode = |mut idx: u64| -> (Vec<u32>, Vec<u32>) {
        let mut lo = vec![0u32; window.len()];
        let mut hi = vec![0u32; window.len()];
        for i in (0..window.len()).rev() {
            let (a, b) = pair_codes[(idx % t) as usize];
            idx /= t;
            lo[i] = a;
            hi[i] = b;
        }
        (lo, hi)
    };

    let scan = |from: u64, to: u64| -> Result<Option<(u64, ConditionCertificate)>, CompError> {
        for idx in from..to {
            let (lo, hi) = decode(idx);
            let eta = LocalConfiguration::new(window.clone(), lo, n)
                .map_err(ClassifyError::Core)?;
            let xi = LocalConfiguration::new(window.clone(), hi, n)
                .map_err(ClassifyError::Core)?;
            for x in check_sites.iter() {
                let v = check_c1_c2_at(m1, m2, &eta, &xi, x)?;
                if let Some(cert) = v.certificate {
                    return Ok(Some((idx, cert)));
                }
            }
        }
        Ok(None)
    };

    let threads = cfg.threads.max(1).min(total_pairs.max(1) as usize);
    let first = if threads <= 1 {
        scan(0, total_pairs)?
    } else {
        let chunk = total_pairs.div_ceil(threads as u64);
        let results: Vec<Result<Option<(u64, ConditionCertificate)>, CompError>> =
            std::thread::scope(|scope| {
                let mut handles = Vec::new();
                for i in 0..threads as u64 {
                    let from = i * chunk;
                    let to = ((i + 1) * chunk).min(total_pairs);
                    let scan_ref = &scan;
                    handles.push(scope.spawn(move || scan_ref(from, to)));
                }
                handles.into_iter().map(|h| h.join().unwrap()).collect()
            });
        let mut best: Option<(u64, ConditionCertificate)> = None;
        for r in results {
            if let Some((idx, cert)) = r? {
                if best.as_ref().map(|(b, _)| idx < *b).unwrap_or(true) {
                    best = Some((idx, cert));
                }
            }
        }
        best
    };

    Ok(match first {
        Some((_, cert)) => Verdict::fail(cert),
        None => Verdict::pass(),
    })
}

/// Attractiveness: the model checked against itself.
pub fn check_attractive(
    m: &dyn RateModel,
    cfg: &EnumerationConfig,
) -> Result<Verdict, CompError> {
    check_model_comparability(m, m, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{
        nonconservative_example_rates, random_local_model, two_species_rates,
        NonconservativeRates,
    };
    use crate::rat::{rat, rint};
    use rand::{Rng, SeedableRng};

    fn worked_window() -> (LocalConfiguration, LocalConfiguration) {
        (
            LocalConfiguration::path(&[0, 2, 0, 1, 2], 2),
            LocalConfiguration::path(&[1, 2, 1, 1, 2], 2),
        )
    }

    #[test]
    fn single_breaking_move_reduces_to_rate_comparison() {
        // at the worked window the first condition at the centre is r1 <= r4
        let ok = two_species_rates(&[rint(1), rint(1), rat(3, 2), rat(3, 2), rint(1)]).unwrap();
        let (eta, xi) = worked_window();
        let v = check_c1_c2_at(&ok, &ok, &eta, &xi, &Site::at(0)).unwrap();
        assert!(v.holds);

        let bad = two_species_rates(&[rint(1), rint(1), rat(3, 2), rat(1, 2), rint(1)]).unwrap();
        let v = check_c1_c2_at(&bad, &bad, &eta, &xi, &Site::at(0)).unwrap();
        let cert = v.certificate.expect("violation");
        assert_eq!(cert.side, CondSide::C1);
        assert_eq!(
            cert.subset,
            vec![Change::migration(Site::at(-1), Site::at(0), 2, 2)]
        );
        assert_eq!(cert.lhs, rint(1));
        assert_eq!(cert.rhs, rat(1, 2));
        let (lhs, rhs) = cert.replay(&bad, &bad).unwrap();
        assert_eq!((lhs, rhs), (cert.lhs, cert.rhs));
    }

    #[test]
    fn empty_breaking_sets_hold_trivially() {
        let m = two_species_rates(&std::array::from_fn(|_| rint(1))).unwrap();
        let w = LocalConfiguration::path(&[1, 0, 0, 0, 1], 2);
        let v = check_c1_c2_at(&m, &m, &w, &w, &Site::at(0)).unwrap();
        assert!(v.holds);
    }

    #[test]
    fn flow_and_bruteforce_agree_on_fuzzed_instances() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(500);
        let mut disagreements = 0;
        let mut violations = 0;
        for seed in 0..120u64 {
            let m1 = random_local_model(seed * 2 + 1, 3, 1, 1, 2, 2, 35);
            let m2 = random_local_model(seed * 2 + 2, 3, 1, 1, 2, 2, 35);
            let eta: Vec<u32> = (0..5).map(|_| rng.gen_range(0..=3)).collect();
            let xi: Vec<u32> = eta.iter().map(|v| rng.gen_range(*v..=3)).collect();
            let eta = LocalConfiguration::path(&eta, 3);
            let xi = LocalConfiguration::path(&xi, 3);
            let fast = check_c1_c2_at(&m1, &m2, &eta, &xi, &Site::at(0)).unwrap();
            let slow = check_c1_c2_bruteforce(&m1, &m2, &eta, &xi, &Site::at(0)).unwrap();
            if fast.holds != slow.holds {
                disagreements += 1;
            }
            if !fast.holds {
                violations += 1;
                let cert = fast.certificate.unwrap();
                let (lhs, rhs) = cert.replay(&m1, &m2).unwrap();
                assert!(lhs > rhs);
            }
        }
        assert_eq!(disagreements, 0);
        // random rates violate often enough to exercise both outcomes
        assert!(violations > 30, "only {violations} violations sampled");
    }

    #[test]
    fn planted_violation_found_by_both() {
        // one breaking move whose rate exceeds everything the upper process has
        use crate::models::{PatternEntry, PatternRatesModel};
        let heavy = PatternRatesModel::new(
            2,
            1,
            1,
            1,
            1,
            vec![PatternEntry {
                shape: Change::migration(Site::at(0), Site::at(1), 1, 1),
                window: vec![],
                rate: rint(5),
            }],
        )
        .unwrap();
        let light = PatternRatesModel::new(
            2,
            1,
            1,
            1,
            1,
            vec![PatternEntry {
                shape: Change::migration(Site::at(0), Site::at(1), 1, 1),
                window: vec![],
                rate: rint(1),
            }],
        )
        .unwrap();
        let eta = LocalConfiguration::path(&[0, 1, 0, 0, 0], 2);
        let xi = LocalConfiguration::path(&[0, 1, 0, 0, 0], 2);
        let fast = check_c1_c2_at(&heavy, &light, &eta, &xi, &Site::at(0)).unwrap();
        let slow = check_c1_c2_bruteforce(&heavy, &light, &eta, &xi, &Site::at(0)).unwrap();
        assert!(!fast.holds && !slow.holds);
        let cert = fast.certificate.unwrap();
        assert_eq!(cert.subset.len(), 1);
        assert_eq!(cert.lhs, rint(5));
    }

    #[test]
    fn worked_two_species_model_is_attractive() {
        let m = two_species_rates(&[rint(1), rint(1), rat(3, 2), rat(3, 2), rint(1)]).unwrap();
        let v = check_attractive(&m, &EnumerationConfig::default()).unwrap();
        assert!(v.holds);
        let bad = two_species_rates(&[rint(1), rint(1), rat(1, 2), rat(3, 2), rint(1)]).unwrap();
        let v = check_attractive(&bad, &EnumerationConfig::default()).unwrap();
        assert!(!v.holds);
    }

    #[test]
    fn verdicts_independent_of_thread_count() {
        let bad = two_species_rates(&[rint(1), rint(1), rat(1, 2), rat(3, 2), rint(1)]).unwrap();
        let single = check_attractive(&bad, &EnumerationConfig::default()).unwrap();
        let multi = check_attractive(
            &bad,
            &EnumerationConfig {
                threads: 4,
                ..Default::default()
            },
        )
        .unwrap();
        let a = single.certificate.unwrap();
        let b = multi.certificate.unwrap();
        assert_eq!(a.eta.values(), b.eta.values());
        assert_eq!(a.xi.values(), b.xi.values());
        assert_eq!(a.subset, b.subset);
    }

    #[test]
    fn budget_guard_trips() {
        let m = two_species_rates(&std::array::from_fn(|_| rint(1))).unwrap();
        let err = check_attractive(
            &m,
            &EnumerationConfig {
                budget: 10,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, CompError::ExplosionGuard(_, 10)));
    }

    #[test]
    fn scaling_both_models_preserves_verdicts() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(900);
        for seed in 0..10u64 {
            let m1 = random_local_model(seed + 400, 2, 1, 1, 2, 2, 30);
            let m2 = random_local_model(seed + 800, 2, 1, 1, 2, 2, 30);
            let scale = rat(rng.gen_range(1..=7), rng.gen_range(1..=3));
            let scaled = |m: &crate::models::PatternRatesModel| {
                let entries = m
                    .entries()
                    .iter()
                    .map(|e| crate::models::PatternEntry {
                        shape: e.shape.clone(),
                        window: e.window.clone(),
                        rate: &e.rate * &scale,
                    })
                    .collect();
                crate::models::PatternRatesModel::new(2, 1, 1, 2, 2, entries).unwrap()
            };
            let (s1, s2) = (scaled(&m1), scaled(&m2));
            let eta = LocalConfiguration::path(&[1, 0, 2, 1, 0], 2);
            let xi = LocalConfiguration::path(&[1, 1, 2, 2, 1], 2);
            let plain = check_c1_c2_at(&m1, &m2, &eta, &xi, &Site::at(0)).unwrap();
            let scaled = check_c1_c2_at(&s1, &s2, &eta, &xi, &Site::at(0)).unwrap();
            assert_eq!(plain.holds, scaled.holds);
        }
    }

    #[test]
    fn nonconservative_pair_comparable_when_down_moves_match() {
        // global comparability needs the upper process's downward moves
        // matched everywhere (beta <= gamma1; mu2 <= mu1, since an isolated
        // one-above-zero pair leaves only the single death to cover the
        // upper catastrophe) and, at one below the ceiling where double
        // arrivals are blocked, 2 gamma2 <= alpha1 + 2 beta
        let (a, b) = nonconservative_example_rates(
            &NonconservativeRates {
                mu1: rint(1),
                mu2: rint(1),
                gamma1: rint(1),
                gamma2: rint(2),
                alpha1: rint(2),
                alpha2: rint(4),
                beta: rint(1),
            },
            5,
        )
        .unwrap();
        let v = check_model_comparability(&a, &b, &EnumerationConfig::default()).unwrap();
        assert!(v.holds, "{:?}", v.certificate.map(|c| c.describe()));

        // with beta above gamma1 the upper process out-migrates the lower
        // one from equal pairs and comparability fails
        let (a, b) = nonconservative_example_rates(
            &NonconservativeRates {
                mu1: rint(1),
                mu2: rint(1),
                gamma1: rint(1),
                gamma2: rint(2),
                alpha1: rint(2),
                alpha2: rint(4),
                beta: rat(3, 2),
            },
            5,
        )
        .unwrap();
        let v = check_model_comparability(&a, &b, &EnumerationConfig::default()).unwrap();
        assert!(!v.holds);
        assert_eq!(v.certificate.unwrap().side, CondSide::C2);
    }
}
