//! The two published worked examples, entered as data: their window pair,
//! the five flow solutions and the coupled-change tables. Used to audit the
//! published numbers against this build's bounds and validators, and to
//! compare this build's own solutions side by side.

use std::sync::Arc;

use crate::change::Change;
use crate::config::LocalConfiguration;
use crate::coupling::{
    assemble_generator, audit_pair_flow, audit_site_flow, pair_flow_from_values,
    pair_zero_violations, site_flow_from_values, site_zero_violations, solve_bundle,
    validate_coupling, CouplingEntry, CouplingError, FlowBundle, GenTerm, PairFlow, SiteFlow,
};
use crate::lattice::Site;
use crate::model::RateModel;
use crate::models::{
    nonconservative_example_rates, two_species_rates, NonconservativeRates,
};
use crate::rat::{fmt_rat, rat, rint, Rat};

type ArcRow = (&'static [u32], &'static [u32], Rat);

/// One worked example: models, window, published flows and coupled rows.
pub struct WorkedExample {
    pub name: &'static str,
    pub m1: Arc<dyn RateModel>,
    pub m2: Arc<dyn RateModel>,
    pub eta: LocalConfiguration,
    pub xi: LocalConfiguration,
    /// Sites whose problems the example solves.
    pub sites: Vec<Site>,
    /// Published site solutions: middle arcs as (upper result, lower result, value).
    pub site_rows: Vec<(Site, Vec<ArcRow>)>,
    /// Published pair solutions.
    pub pair_rows: Vec<((Site, Site), Vec<ArcRow>)>,
    /// Published coupled changes involving the centre site.
    pub coupled_rows: Vec<(&'static [u32], &'static [u32], Rat, GenTerm)>,
}

/// Reads a change off the difference between a base configuration and a
/// target value vector (the way the published tables label nodes).
pub fn change_from_result(
    base: &LocalConfiguration,
    target: &[u32],
) -> Result<Change, String> {
    if target.len() != base.values().len() {
        return Err("target length differs from the window".to_string());
    }
    let sites = base.window().sites();
    let mut ups: Vec<(Site, u32)> = Vec::new();
    let mut downs: Vec<(Site, u32)> = Vec::new();
    for (i, (old, new)) in base.values().iter().zip(target).enumerate() {
        match new.cmp(old) {
            std::cmp::Ordering::Greater => ups.push((sites[i].clone(), new - old)),
            std::cmp::Ordering::Less => downs.push((sites[i].clone(), old - new)),
            std::cmp::Ordering::Equal => {}
        }
    }
    match (ups.as_slice(), downs.as_slice()) {
        ([(site, k)], []) => Ok(Change::arrival(site.clone(), *k)),
        ([], [(site, k)]) => Ok(Change::departure(site.clone(), *k)),
        ([(to, arrive)], [(from, depart)]) => Ok(Change::migration(
            from.clone(),
            to.clone(),
            *depart,
            *arrive,
        )),
        _ => Err(format!("{target:?} is not one change away from the base")),
    }
}

/// The symmetric two-species window construction with the published flows.
pub fn two_species_example(rates: &[Rat; 5]) -> WorkedExample {
    let model = Arc::new(two_species_rates(rates).expect("valid rates"));
    let [r1, r2, _r3, r4, _r5] = rates.clone();
    let r4_minus_r1 = &r4 - &r1;
    let eta = LocalConfiguration::path(&[0, 2, 0, 1, 2], 2);
    let xi = LocalConfiguration::path(&[1, 2, 1, 1, 2], 2);
    WorkedExample {
        name: "two-species",
        m1: model.clone(),
        m2: model,
        eta,
        xi,
        sites: vec![Site::at(-1), Site::at(0), Site::at(1)],
        site_rows: vec![
            (
                Site::at(-1),
                vec![
                    (&[2, 1, 1, 1, 2], &[1, 1, 0, 1, 2], r4_minus_r1.clone()),
                    (&[2, 1, 1, 1, 2], &[2, 0, 0, 1, 2], r1.clone()),
                    (&[1, 1, 2, 1, 2], &[0, 1, 1, 1, 2], r4_minus_r1.clone()),
                    (&[1, 1, 2, 1, 2], &[0, 0, 2, 1, 2], r1.clone()),
                ],
            ),
            (
                Site::at(0),
                vec![(&[1, 1, 2, 1, 2], &[0, 0, 2, 1, 2], r1.clone())],
            ),
            (
                Site::at(1),
                vec![
                    (&[1, 2, 2, 0, 2], &[0, 2, 1, 0, 2], r2.clone()),
                    (&[1, 2, 1, 2, 1], &[0, 2, 0, 2, 1], r4.clone()),
                ],
            ),
        ],
        pair_rows: vec![
            (
                (Site::at(-1), Site::at(0)),
                vec![
                    (&[1, 1, 2, 1, 2], &[0, 0, 2, 1, 2], r1.clone()),
                    (&[1, 1, 2, 1, 2], &[0, 1, 1, 1, 2], r4_minus_r1.clone()),
                ],
            ),
            (
                (Site::at(0), Site::at(1)),
                vec![(&[1, 2, 2, 0, 2], &[0, 2, 1, 0, 2], r2.clone())],
            ),
        ],
        coupled_rows: vec![
            (&[0, 0, 2, 1, 2], &[1, 1, 2, 1, 2], r1, GenTerm::GenX),
            (&[0, 1, 1, 1, 2], &[1, 1, 2, 1, 2], r4_minus_r1, GenTerm::Gen4),
            (&[0, 2, 1, 0, 2], &[1, 2, 2, 0, 2], r2, GenTerm::Gen4),
        ],
    }
}

/// The non-conservative window construction with the published flows.
pub fn nonconservative_example(r: &NonconservativeRates, n: u32) -> WorkedExample {
    let (m1, m2) = nonconservative_example_rates(r, n).expect("valid rates");
    let eta = LocalConfiguration::path(&[1, 1, 2, 1, 1], n);
    let xi = LocalConfiguration::path(&[1, 2, 3, 1, 1], n);
    let mu2_minus_mu1 = &r.mu2 - &r.mu1;
    let excess = &r.beta - &r.gamma1; // beta - gamma1
    let two_excess = rint(2) * &excess;
    let slack = rint(2) * &r.gamma1 - &r.beta; // 2 gamma1 - beta
    let gain_rest = &r.gamma2 - &two_excess; // gamma2 - 2(beta - gamma1)
    WorkedExample {
        name: "nonconservative",
        m1: Arc::new(m1),
        m2: Arc::new(m2),
        eta,
        xi,
        sites: vec![Site::at(-1), Site::at(0), Site::at(1)],
        site_rows: vec![
            (
                Site::at(-1),
                vec![
                    (&[1, 0, 3, 1, 1], &[1, 0, 2, 1, 1], r.mu1.clone()),
                    (&[1, 0, 3, 1, 1], &[1, 0, 3, 1, 1], mu2_minus_mu1.clone()),
                    (&[1, 4, 3, 1, 1], &[1, 3, 1, 1, 1], r.gamma2.clone()),
                    (&[1, 4, 3, 1, 1], &[0, 3, 2, 1, 1], r.gamma2.clone()),
                ],
            ),
            (
                Site::at(0),
                vec![
                    (&[1, 2, 1, 1, 1], &[1, 1, 0, 1, 1], r.mu2.clone()),
                    (&[1, 2, 5, 1, 1], &[1, 1, 4, 0, 1], r.gamma2.clone()),
                    (&[1, 2, 5, 1, 1], &[1, 0, 4, 1, 1], r.gamma2.clone()),
                ],
            ),
            (
                Site::at(1),
                vec![
                    (&[1, 2, 3, 0, 1], &[1, 1, 2, 0, 1], r.mu1.clone()),
                    (&[1, 2, 4, 0, 1], &[1, 1, 3, 0, 1], slack.clone()),
                    (&[1, 2, 4, 0, 1], &[1, 1, 4, 0, 1], two_excess.clone()),
                    (&[1, 2, 3, 0, 2], &[1, 1, 3, 0, 1], excess.clone()),
                    (&[1, 2, 3, 0, 2], &[1, 1, 2, 0, 2], r.gamma1.clone()),
                    (&[1, 2, 3, 3, 1], &[1, 1, 1, 3, 1], r.gamma2.clone()),
                    (&[1, 2, 3, 3, 1], &[1, 1, 2, 3, 0], r.gamma2.clone()),
                    (&[1, 2, 2, 2, 1], &[1, 1, 1, 2, 1], r.gamma1.clone()),
                    (&[1, 2, 3, 2, 0], &[1, 1, 2, 2, 0], r.gamma1.clone()),
                ],
            ),
        ],
        pair_rows: vec![
            (
                (Site::at(-1), Site::at(0)),
                vec![
                    (&[1, 2, 5, 1, 1], &[1, 0, 4, 1, 1], r.gamma2.clone()),
                    (&[1, 4, 3, 1, 1], &[1, 3, 1, 1, 1], r.gamma2.clone()),
                ],
            ),
            (
                (Site::at(0), Site::at(1)),
                vec![
                    (&[1, 2, 4, 0, 1], &[1, 1, 4, 0, 1], two_excess.clone()),
                    (&[1, 2, 4, 0, 1], &[1, 1, 3, 0, 1], slack.clone()),
                    (&[1, 2, 5, 1, 1], &[1, 1, 4, 0, 1], gain_rest.clone()),
                    (&[1, 2, 3, 3, 1], &[1, 1, 1, 3, 1], r.gamma2.clone()),
                    (&[1, 2, 2, 2, 1], &[1, 1, 1, 2, 1], r.gamma1.clone()),
                ],
            ),
        ],
        coupled_rows: vec![
            (&[1, 1, 0, 1, 1], &[1, 2, 1, 1, 1], r.mu2.clone(), GenTerm::Gen3),
            (&[1, 0, 3, 1, 1], &[1, 0, 3, 1, 1], mu2_minus_mu1, GenTerm::Gen3),
            (&[1, 1, 3, 0, 1], &[1, 2, 4, 0, 1], slack, GenTerm::Gen4),
            (&[1, 0, 4, 1, 1], &[1, 2, 5, 1, 1], r.gamma2.clone(), GenTerm::Gen6),
            (&[1, 3, 1, 1, 1], &[1, 4, 3, 1, 1], r.gamma2.clone(), GenTerm::Gen6),
            (&[1, 1, 1, 3, 1], &[1, 2, 3, 3, 1], r.gamma2.clone(), GenTerm::Gen6),
            (&[1, 1, 1, 2, 1], &[1, 2, 2, 2, 1], r.gamma1.clone(), GenTerm::Gen6),
            (&[1, 1, 4, 0, 1], &[1, 2, 5, 1, 1], gain_rest, GenTerm::Gen6),
            (&[1, 1, 4, 0, 1], &[1, 2, 4, 0, 1], two_excess, GenTerm::GenX),
        ],
    }
}

/// The parameter values the published tables are evaluated at.
pub fn worked_nonconservative_rates() -> NonconservativeRates {
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

pub fn worked_two_species_rates() -> [Rat; 5] {
    [rint(1), rint(1), rat(3, 2), rat(3, 2), rint(1)]
}

/// Outcome of replaying an example: a line-stable report plus the pieces
/// tests assert on.
pub struct ExampleReplay {
    pub report: String,
    pub ok: bool,
    pub published_bundle: FlowBundle,
    pub published_table: crate::coupling::CouplingTable,
    pub own_bundle: FlowBundle,
    pub own_table: crate::coupling::CouplingTable,
}

fn decode_rows(
    ex: &WorkedExample,
    rows: &[ArcRow],
) -> Result<Vec<((Change, Change), Rat)>, CouplingError> {
    rows.iter()
        .map(|(b, a, r)| {
            let bc = change_from_result(&ex.xi, b).map_err(CouplingError::Invalid)?;
            let ac = change_from_result(&ex.eta, a).map_err(CouplingError::Invalid)?;
            Ok(((bc, ac), r.clone()))
        })
        .collect()
}

struct Reporter {
    text: String,
    ok: bool,
}

impl Reporter {
    fn line(&mut self, s: String, good: bool) {
        self.ok &= good;
        self.note(s);
    }

    fn note(&mut self, s: String) {
        self.text.push_str(&s);
        self.text.push('\n');
    }
}

/// Replays a worked example end to end: audits the published flows against
/// this build's bounds, assembles and validates the coupling they induce,
/// compares its coupled rows at the centre with the published table, and
/// then does the same for this build's own solutions.
pub fn replay_example(ex: &WorkedExample) -> Result<ExampleReplay, CouplingError> {
    let m1 = ex.m1.as_ref();
    let m2 = ex.m2.as_ref();
    let mut rep = Reporter {
        text: String::new(),
        ok: true,
    };
    rep.note(format!("== worked example: {} ==", ex.name));
    rep.note(format!("eta = {:?}", ex.eta.values()));
    rep.note(format!("xi  = {:?}", ex.xi.values()));

    // published site flows
    let mut site_flows: std::collections::BTreeMap<Site, SiteFlow> = Default::default();
    for (x, rows) in &ex.site_rows {
        let values = decode_rows(ex, rows)?;
        let fx = site_flow_from_values(m1, m2, &ex.eta, &ex.xi, x, values)?;
        let bounds = audit_site_flow(&fx);
        let zeros = site_zero_violations(&fx);
        rep.line(
            format!(
                "published site flow at {x}: bounds {}, zero-pattern {} ({} arcs)",
                if bounds.is_ok() { "PASS" } else { "FAIL" },
                if zeros.is_empty() { "PASS" } else { "FAIL" },
                rows.len()
            ),
            bounds.is_ok() && zeros.is_empty(),
        );
        if let Err(e) = &bounds {
            rep.note(format!("  {e}"));
        }
        for z in &zeros {
            rep.note(format!("  {z}"));
        }
        site_flows.insert(x.clone(), fx);
    }

    // published pair flows
    let mut pair_flows: std::collections::BTreeMap<(Site, Site), PairFlow> = Default::default();
    for ((x, y), rows) in &ex.pair_rows {
        let values = decode_rows(ex, rows)?;
        let pf = pair_flow_from_values(&site_flows[x], &site_flows[y], values)?;
        let bounds = audit_pair_flow(&pf, &site_flows[x], &site_flows[y]);
        let zeros = pair_zero_violations(&pf);
        rep.line(
            format!(
                "published pair flow at ({x}, {y}): bounds {}, zero-pattern {} ({} arcs)",
                if bounds.is_ok() { "PASS" } else { "FAIL" },
                if zeros.is_empty() { "PASS" } else { "FAIL" },
                rows.len()
            ),
            bounds.is_ok() && zeros.is_empty(),
        );
        if let Err(e) = &bounds {
            rep.note(format!("  {e}"));
        }
        for z in &zeros {
            rep.note(format!("  {z}"));
        }
        pair_flows.insert((x.clone(), y.clone()), pf);
    }

    let published_bundle = FlowBundle {
        eta: ex.eta.clone(),
        xi: ex.xi.clone(),
        site_flows,
        pair_flows,
    };
    let published_table = assemble_generator(m1, m2, &published_bundle)?;
    let validation = validate_coupling(&published_table, m1, m2)?;
    rep.line(
        format!(
            "coupling from published flows:\n{}",
            validation.render().trim_end()
        ),
        validation.all_pass(),
    );

    // the coupled rows at the centre must reproduce the published table
    let centre = Site::at(0);
    let expected: Vec<CouplingEntry> = ex
        .coupled_rows
        .iter()
        .map(|(a, b, r, term)| {
            Ok(CouplingEntry {
                effect1: Some(change_from_result(&ex.eta, a).map_err(CouplingError::Invalid)?),
                effect2: Some(change_from_result(&ex.xi, b).map_err(CouplingError::Invalid)?),
                rate: r.clone(),
                term: *term,
            })
        })
        .collect::<Result<_, CouplingError>>()?;
    let mut got: Vec<CouplingEntry> = published_table
        .entries_involving(&centre)
        .into_iter()
        .filter(|e| e.effect1.is_some() && e.effect2.is_some())
        .cloned()
        .collect();
    let mut missing = Vec::new();
    for e in &expected {
        if let Some(pos) = got.iter().position(|g| g == e) {
            got.remove(pos);
        } else {
            missing.push(e);
        }
    }
    rep.line(
        format!(
            "published coupled rows at the centre: {} ({} expected, {} missing, {} extra)",
            if missing.is_empty() && got.is_empty() {
                "PASS"
            } else {
                "FAIL"
            },
            expected.len(),
            missing.len(),
            got.len()
        ),
        missing.is_empty() && got.is_empty(),
    );
    for e in &missing {
        rep.note(format!(
            "  missing: {:?} / {:?} at {}",
            e.effect1,
            e.effect2,
            fmt_rat(&e.rate)
        ));
    }
    for e in &got {
        rep.note(format!(
            "  extra: {:?} / {:?} at {} ({})",
            e.effect1,
            e.effect2,
            fmt_rat(&e.rate),
            e.term.tag()
        ));
    }

    // this build's own solutions for the same window
    let own_bundle = solve_bundle(m1, m2, &ex.eta, &ex.xi, &ex.sites)?;
    for (x, fx) in &own_bundle.site_flows {
        let bounds = audit_site_flow(fx);
        let zeros = site_zero_violations(fx);
        rep.line(
            format!(
                "own site flow at {x}: bounds {}, zero-pattern {}",
                if bounds.is_ok() { "PASS" } else { "FAIL" },
                if zeros.is_empty() { "PASS" } else { "FAIL" }
            ),
            bounds.is_ok() && zeros.is_empty(),
        );
    }
    for ((x, y), pf) in &own_bundle.pair_flows {
        let bounds = audit_pair_flow(pf, &own_bundle.site_flows[x], &own_bundle.site_flows[y]);
        let zeros = pair_zero_violations(pf);
        rep.line(
            format!(
                "own pair flow at ({x}, {y}): bounds {}, zero-pattern {}",
                if bounds.is_ok() { "PASS" } else { "FAIL" },
                if zeros.is_empty() { "PASS" } else { "FAIL" }
            ),
            bounds.is_ok() && zeros.is_empty(),
        );
    }
    let own_table = assemble_generator(m1, m2, &own_bundle)?;
    let own_validation = validate_coupling(&own_table, m1, m2)?;
    rep.line(
        format!("own coupling:\n{}", own_validation.render().trim_end()),
        own_validation.all_pass(),
    );

    rep.note("own coupled rows at the centre:".to_string());
    for e in own_table.entries_involving(&centre) {
        if e.effect1.is_some() && e.effect2.is_some() {
            rep.note(format!(
                "  {:?} / {:?} at {} ({})",
                e.effect1,
                e.effect2,
                fmt_rat(&e.rate),
                e.term.tag()
            ));
        }
    }

    let ok = rep.ok;
    rep.note(format!(
        "result: {}",
        if ok { "ALL CHECKS PASS" } else { "FAILURES FOUND" }
    ));
    Ok(ExampleReplay {
        report: rep.text,
        ok,
        published_bundle,
        published_table,
        own_bundle,
        own_table,
    })
}
