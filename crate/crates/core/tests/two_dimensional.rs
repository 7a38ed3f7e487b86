//! Two-dimensional smoke tests: the checkers and the simulator are not
//! tied to one dimension.

use ipsflow::comparability::{check_attractive, EnumerationConfig};
use ipsflow::lattice::{Lattice, Site};
use ipsflow::model::RateModel;
use ipsflow::models::{binomial_bdm, check_bdm_attractive};
use ipsflow::rat::{rat, rint};
use ipsflow::sim::{simulate_coupled, simulate_single, SimConfig};

#[test]
fn planar_binomial_model_is_attractive() {
    // d = 2: four neighbours, catastrophe column mu_k / 4
    let m = binomial_bdm(rint(1), rat(2, 5), 1, 1, 1, 2, rint(1), rint(1)).unwrap();
    assert_eq!(m.dim(), 2);
    assert!(check_bdm_attractive(&m).unwrap().holds);
    let cfg = EnumerationConfig {
        radius: None,
        budget: 10_000_000,
        threads: 4,
    };
    let v = check_attractive(&m, &cfg).unwrap();
    assert!(v.holds, "{:?}", v.certificate.map(|c| c.describe()));
}

#[test]
fn planar_coupled_pair_stays_ordered() {
    let m = binomial_bdm(rint(1), rat(1, 2), 2, 1, 1, 2, rint(2), rint(2)).unwrap();
    let lattice = Lattice::new(2, 5, 1, 0).unwrap();
    let cfg = SimConfig {
        lattice,
        t_max: 0.5,
        seed: 4,
        record_events: false,
        inject_violation_after: None,
        audit_every: Some(50),
    };
    let init1 = vec![0u32; 25];
    let mut init2 = vec![1u32; 25];
    init2[12] = 2;
    let traj = simulate_coupled(&m, &m, &init1, &init2, &cfg).unwrap();
    assert!(traj.n_events > 10);
    let final2 = traj.final2.unwrap();
    for (a, b) in traj.final1.iter().zip(&final2) {
        assert!(a <= b);
    }
}

#[test]
fn planar_simulation_runs_and_reproduces() {
    let m = binomial_bdm(rint(1), rat(1, 2), 2, 1, 1, 2, rint(2), rint(2)).unwrap();
    let lattice = Lattice::new(2, 5, 1, 0).unwrap();
    assert_eq!(lattice.num_sites(), 25);
    // index round trip across the plane
    for idx in 0..lattice.num_sites() {
        assert_eq!(lattice.index(&lattice.site_from_index(idx)), idx);
    }
    assert_eq!(lattice.neighbors(&Site(vec![0, 0])).len(), 4);

    let cfg = SimConfig {
        lattice,
        t_max: 2.0,
        seed: 9,
        record_events: true,
        inject_violation_after: None,
        audit_every: None,
    };
    let init = vec![1u32; 25];
    let a = simulate_single(&m, &init, &cfg).unwrap();
    let b = simulate_single(&m, &init, &cfg).unwrap();
    assert!(a.n_events > 50);
    assert_eq!(a.export_events(), b.export_events());
    // every event stayed within bounds
    assert!(a.final1.iter().all(|v| *v <= 2));
}
