//! Cross-module operation checks: the transportation shortcut on the
//! exclusion reduction, the builder-success guarantee behind a positive
//! comparability verdict, and the capacity inheritance between site and
//! pair flows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use ipsflow::change::Change;
use ipsflow::comparability::{check_c1_c2_at, check_model_comparability, EnumerationConfig};
use ipsflow::config::LocalConfiguration;
use ipsflow::coupling::{
    audit_pair_flow, audit_site_flow, pair_zero_violations, site_zero_violations, solve_bundle,
    solve_px, solve_pxy,
};
use ipsflow::lattice::{Lattice, Site};

use ipsflow::models::{
    nonconservative_example_rates, random_local_model, simple_exclusion, two_species_rates,
    NonconservativeRates,
};
use ipsflow::netflow::transport_initial;
use ipsflow::rat::{pos_part, rat, rint, zero, Rat};
use ipsflow::sim::{simulate_single, SimConfig};

/// The transportation form of the exclusion site problem: occupied-in-both
/// donors must cover the inflow the lower process makes in excess, with the
/// slack absorbed by an implicit dummy.
#[test]
fn transport_solves_the_exclusion_site_reduction() {
    let sites: Vec<Site> = (0..4).map(Site::at).collect();
    let q = |a: &Site, b: &Site| rat((a.0[0] + 2 * b.0[0] + 2) as i64, 4);
    let p = simple_exclusion(sites.clone(), q).unwrap();
    // eta <= xi with a shared hole at site 0
    let eta = vec![0u32, 0, 1, 1];
    let xi = vec![0u32, 1, 1, 1];
    let x = Site::at(0);
    let gamma = |cfg: &[u32], from: &Site| p.gamma(cfg, from, &x);

    // supplies: upper-only particles; demands: excess inflow of shared ones
    let mut supplies = Vec::new();
    let mut demands = Vec::new();
    for (i, site) in sites.iter().enumerate() {
        if eta[i] == 0 && xi[i] == 1 {
            supplies.push((site.clone(), gamma(&xi, site)));
        }
        if eta[i] == 1 && xi[i] == 1 {
            let excess = pos_part(&(gamma(&eta, site) - gamma(&xi, site)));
            if excess > zero() {
                demands.push((site.clone(), excess));
            }
        }
    }
    let total_supply: Rat = supplies.iter().map(|(_, s)| s.clone()).sum();
    let total_demand: Rat = demands.iter().map(|(_, d)| d.clone()).sum();
    assert!(total_demand <= total_supply, "instance must be feasible");

    let plan = transport_initial(&supplies, &demands, |_, _| true).unwrap();
    // the plan meets each demand exactly and respects each supply
    for (site, d) in &demands {
        let got: Rat = plan
            .iter()
            .filter(|((_, dst), _)| dst == site)
            .map(|(_, v)| v.clone())
            .sum();
        assert_eq!(&got, d);
    }
    for (site, s) in &supplies {
        let used: Rat = plan
            .iter()
            .filter(|((src, _), _)| src == site)
            .map(|(_, v)| v.clone())
            .sum();
        assert!(used <= *s);
    }
    // the dummy absorbs the slack
    let used: Rat = plan.iter().map(|(_, v)| v.clone()).sum();
    assert_eq!(used, total_demand);
}

/// A positive whole-model verdict means the constructive pipeline succeeds
/// at every enumerated ordered pair.
#[test]
fn comparability_implies_the_builder_succeeds() {
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
    let verdict = check_model_comparability(&a, &b, &EnumerationConfig::default()).unwrap();
    assert!(verdict.holds);

    let mut rng = ChaCha12Rng::seed_from_u64(303);
    for _ in 0..60 {
        let lo: Vec<u32> = (0..5).map(|_| rng.gen_range(0..=5)).collect();
        let hi: Vec<u32> = lo.iter().map(|v| rng.gen_range(*v..=5)).collect();
        let eta = LocalConfiguration::path(&lo, 5);
        let xi = LocalConfiguration::path(&hi, 5);
        let v = check_c1_c2_at(&a, &b, &eta, &xi, &Site::at(0)).unwrap();
        assert!(v.holds, "conditions must hold for a comparable pair");
        let bundle = solve_bundle(&a, &b, &eta, &xi, &[Site::at(0)]);
        assert!(bundle.is_ok(), "builder failed where the conditions hold");
    }
}

/// The pair flow never draws more from a safe move than the site flow that
/// capacity was inherited from.
#[test]
fn pair_flows_respect_inherited_capacities() {
    let mut rng = ChaCha12Rng::seed_from_u64(909);
    let mut pairs_solved = 0;
    for seed in 0..80u64 {
        let m1 = random_local_model(seed + 100, 3, 1, 1, 2, 2, 30);
        let m2 = random_local_model(seed + 600, 3, 1, 1, 2, 2, 30);
        let lo: Vec<u32> = (0..7).map(|_| rng.gen_range(0..=3)).collect();
        let hi: Vec<u32> = lo.iter().map(|v| rng.gen_range(*v..=3)).collect();
        let eta = LocalConfiguration::path(&lo, 3);
        let xi = LocalConfiguration::path(&hi, 3);
        let (x, y) = (Site::at(0), Site::at(1));
        let vx = check_c1_c2_at(&m1, &m2, &eta, &xi, &x).unwrap();
        let vy = check_c1_c2_at(&m1, &m2, &eta, &xi, &y).unwrap();
        if !(vx.holds && vy.holds) {
            continue;
        }
        let fx = solve_px(&m1, &m2, &eta, &xi, &x).unwrap();
        let fy = solve_px(&m1, &m2, &eta, &xi, &y).unwrap();
        let pf = solve_pxy(&fx, &fy).unwrap();
        pairs_solved += 1;
        // full bound audits and zero patterns on everything solved
        audit_site_flow(&fx).unwrap();
        audit_site_flow(&fy).unwrap();
        audit_pair_flow(&pf, &fx, &fy).unwrap();
        assert!(site_zero_violations(&fx).is_empty());
        assert!(site_zero_violations(&fy).is_empty());
        assert!(pair_zero_violations(&pf).is_empty());
        // flow the pair problem sends into a safe fall at x from the
        // breaking upper migrations x -> y never exceeds what the site flow
        // already routed there
        for c in &fx.cls.side1 {
            if fx.cls.is_falling1(c) && c.order_safe {
                let from_pair = pf.sum_into_from_bad(&c.change, &x);
                let from_site = fx.sum_into(&c.change, |b| {
                    !b.order_safe
                        && matches!(&b.change, Change::Migration { from, to, .. } if *from == x && *to == y)
                });
                assert!(from_pair <= from_site);
            }
        }
    }
    assert!(pairs_solved >= 20, "only {pairs_solved} pairs exercised");
}

/// Wherever the conditions hold on a random window, the whole pipeline
/// goes through and the assembled table passes every validator.
#[test]
fn random_window_couplings_validate() {
    use ipsflow::coupling::{assemble_generator, validate_coupling};
    let mut rng = ChaCha12Rng::seed_from_u64(606);
    let sites: Vec<Site> = vec![Site::at(-1), Site::at(0), Site::at(1)];
    let mut validated = 0;
    let mut attempts = 0;
    while validated < 40 && attempts < 500 {
        attempts += 1;
        let m1 = random_local_model(3000 + attempts, 2, 1, 1, 2, 2, 45);
        let m2 = random_local_model(4000 + attempts, 2, 1, 1, 2, 2, 45);
        let lo: Vec<u32> = (0..5).map(|_| rng.gen_range(0..=2)).collect();
        let hi: Vec<u32> = lo.iter().map(|v| rng.gen_range(*v..=2)).collect();
        let eta = LocalConfiguration::path(&lo, 2);
        let xi = LocalConfiguration::path(&hi, 2);
        let all_hold = sites.iter().all(|x| {
            check_c1_c2_at(&m1, &m2, &eta, &xi, x)
                .map(|v| v.holds)
                .unwrap_or(false)
        });
        if !all_hold {
            continue;
        }
        let bundle = solve_bundle(&m1, &m2, &eta, &xi, &sites)
            .expect("conditions hold, so the bundle must solve");
        for fx in bundle.site_flows.values() {
            audit_site_flow(fx).unwrap();
            assert!(site_zero_violations(fx).is_empty());
        }
        for ((x, y), pf) in &bundle.pair_flows {
            audit_pair_flow(pf, &bundle.site_flows[x], &bundle.site_flows[y]).unwrap();
            assert!(pair_zero_violations(pf).is_empty());
        }
        let table = assemble_generator(&m1, &m2, &bundle).unwrap();
        let report = validate_coupling(&table, &m1, &m2).unwrap();
        assert!(report.all_pass(), "{}", report.render());
        validated += 1;
    }
    assert!(validated >= 40, "only {validated} instances validated");
}

/// A lower process whose arrivals outpace the upper process's fails the
/// conditions at an equal pair, where its arrival lands strictly above.
#[test]
fn faster_lower_arrivals_break_comparability() {
    use ipsflow::models::{PatternEntry, PatternRatesModel};
    let arrivals = |rate: i64| {
        PatternRatesModel::new(
            2,
            1,
            1,
            1,
            1,
            vec![PatternEntry {
                shape: Change::arrival(Site::at(0), 1),
                window: vec![],
                rate: rint(rate),
            }],
        )
        .unwrap()
    };
    let fast = arrivals(2);
    let slow = arrivals(1);
    let v = check_model_comparability(&fast, &slow, &EnumerationConfig::default()).unwrap();
    assert!(!v.holds);
    let cert = v.certificate.unwrap();
    assert_eq!(cert.subset, vec![Change::arrival(Site::at(0), 1)]);
    assert_eq!(cert.lhs, rint(2));
    assert_eq!(cert.rhs, rint(1));
    // the other way round is fine
    let v = check_model_comparability(&slow, &fast, &EnumerationConfig::default()).unwrap();
    assert!(v.holds);
}

/// A process with no transitions is trivially attractive.
#[test]
fn zero_rate_model_is_attractive() {
    use ipsflow::comparability::check_attractive;
    use ipsflow::models::PatternRatesModel;
    let m = PatternRatesModel::new(2, 1, 1, 1, 1, vec![]).unwrap();
    assert!(check_attractive(&m, &EnumerationConfig::default())
        .unwrap()
        .holds);
}

/// Bumping one coupled rate breaks the exact-marginal validator, which
/// names the change.
#[test]
fn tampered_coupled_rate_fails_the_marginal_validator() {
    use ipsflow::coupling::{assemble_generator, validate_coupling};
    use ipsflow::rat::Rat;
    let m = two_species_rates(&[rint(1), rint(1), rat(3, 2), rat(3, 2), rint(1)]).unwrap();
    let eta = LocalConfiguration::path(&[0, 2, 0, 1, 2], 2);
    let xi = LocalConfiguration::path(&[1, 2, 1, 1, 2], 2);
    let sites: Vec<Site> = vec![Site::at(-1), Site::at(0), Site::at(1)];
    let bundle = solve_bundle(&m, &m, &eta, &xi, &sites).unwrap();
    let mut table = assemble_generator(&m, &m, &bundle).unwrap();
    let report = validate_coupling(&table, &m, &m).unwrap();
    assert!(report.all_pass());

    let idx = table
        .entries
        .iter()
        .position(|e| e.effect1.is_some() && e.effect2.is_some())
        .unwrap();
    let named = table.entries[idx].effect1.clone().unwrap();
    table.entries[idx].rate = &table.entries[idx].rate + Rat::from_integer(1.into());
    let report = validate_coupling(&table, &m, &m).unwrap();
    assert!(!report.all_pass());
    let v3 = report
        .checks
        .iter()
        .find(|c| c.name.starts_with("V3") && !c.passed)
        .expect("a marginal check fails");
    assert!(
        v3.failures.iter().any(|f| f.contains(&named.descriptor())),
        "failure must name the tampered change: {:?}",
        v3.failures
    );
}

/// A coupled attractive pair started strictly ordered stays ordered.
#[test]
fn two_species_coupled_run_from_unequal_start() {
    use ipsflow::sim::simulate_coupled;
    let m = two_species_rates(&[rint(1), rint(1), rat(3, 2), rat(3, 2), rint(1)]).unwrap();
    let init1 = [0u32, 1, 0, 0, 2, 0, 1, 0, 0, 0];
    let init2 = [1u32, 2, 0, 1, 2, 1, 1, 0, 2, 0];
    for seed in 0..5 {
        let cfg = SimConfig {
            lattice: Lattice::new(1, 10, 1, 0).unwrap(),
            t_max: 5.0,
            seed,
            record_events: false,
            inject_violation_after: None,
            audit_every: Some(100),
        };
        let traj = simulate_coupled(&m, &m, &init1, &init2, &cfg).unwrap();
        assert!(traj.n_events > 20);
        let final2 = traj.final2.unwrap();
        for (a, b) in traj.final1.iter().zip(&final2) {
            assert!(a <= b, "order must persist");
        }
        // conservative dynamics on both components
        assert_eq!(traj.final1.iter().sum::<u32>(), init1.iter().sum::<u32>());
        assert_eq!(final2.iter().sum::<u32>(), init2.iter().sum::<u32>());
    }
}

/// The conservative two-species dynamics keep the total particle mass.
#[test]
fn two_species_simulation_conserves_mass() {
    let m = two_species_rates(&[rint(1), rint(1), rat(3, 2), rat(3, 2), rint(1)]).unwrap();
    let init = [2u32, 0, 1, 1, 0, 2, 0, 1, 2, 0];
    let total: u32 = init.iter().sum();
    let cfg = SimConfig {
        lattice: Lattice::new(1, 10, 1, 0).unwrap(),
        t_max: 10.0,
        seed: 5,
        record_events: true,
        inject_violation_after: None,
        audit_every: None,
    };
    let traj = simulate_single(&m, &init, &cfg).unwrap();
    assert!(traj.n_events > 30);
    assert_eq!(traj.final1.iter().sum::<u32>(), total);
    for pair in traj.events.windows(2) {
        assert!(pair[0].t < pair[1].t, "event times must strictly increase");
    }
    // every logged event is a migration, conserving mass step by step
    for e in &traj.events {
        match &e.effect1 {
            Some(Change::Migration { depart, arrive, .. }) => assert_eq!(depart, arrive),
            other => panic!("unexpected event {other:?}"),
        }
    }
}
