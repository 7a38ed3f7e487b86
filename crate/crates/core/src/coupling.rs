//! Construction of the order-preserving coupling from flow solutions.
//!
//! For each site a flow problem pairs the mandatory order-breaking moves of
//! one process with dominating moves of the other; for each neighbour pair a
//! second problem does the same for the migrations between them, reusing the
//! site solutions as capacities. The coupling generator then reads off
//! coupled transitions from the flows and leaves the remainders uncoupled.
//! Validators confirm non-negativity, order preservation, exact marginals
//! and the total-rate bound on every assembled table.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::change::{apply_change, enumerate_changes_at, Change};
use crate::changesets::{classify, CellKind, Classification, ClassifiedChange, ClassifyError};
use crate::config::{CoreError, LocalConfiguration};
use crate::lattice::Site;
use crate::model::RateModel;
use crate::netflow::{audit, Flow, FlowNetwork, Node};
use crate::rat::{fmt_rat, parse_rat, zero, Rat};

#[derive(Debug, Error)]
pub enum CouplingError {
    #[error("flow problem at {site} infeasible ({detail}); the condition checker and the builder disagree")]
    Infeasible { site: Site, detail: String },
    #[error("negative uncoupled remainder {residual} for {change:?} at {site}")]
    NegativeResidual {
        site: Site,
        change: Change,
        residual: String,
    },
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    Invalid(String),
}

/// Node labels in the site and pair problems: one process per side.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SideNode {
    Lower(Change),
    Upper(Change),
}

impl fmt::Debug for SideNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SideNode::Lower(c) => write!(f, "1:{}", c.descriptor()),
            SideNode::Upper(c) => write!(f, "2:{}", c.descriptor()),
        }
    }
}

/// A solved site problem: the middle arcs (upper change, lower change) of a
/// flow satisfying the site bounds, after the cleanup that removes flow
/// between the two safe classes.
pub struct SiteFlow {
    pub x: Site,
    pub cls: Classification,
    middle: BTreeMap<(Change, Change), Rat>,
}

impl SiteFlow {
    pub fn value(&self, b: &Change, a: &Change) -> Rat {
        self.middle
            .get(&(b.clone(), a.clone()))
            .cloned()
            .unwrap_or_else(zero)
    }

    pub fn arcs(&self) -> impl Iterator<Item = (&Change, &Change, &Rat)> {
        self.middle.iter().map(|((b, a), r)| (b, a, r))
    }

    fn side1_info(&self, a: &Change) -> Option<&ClassifiedChange> {
        self.cls.side1.iter().find(|c| &c.change == a)
    }

    fn side2_info(&self, b: &Change) -> Option<&ClassifiedChange> {
        self.cls.side2.iter().find(|c| &c.change == b)
    }

    /// Sum of flow into `a` from upper changes selected by `pred`.
    pub fn sum_into(&self, a: &Change, pred: impl Fn(&ClassifiedChange) -> bool) -> Rat {
        let mut acc = zero();
        for ((b, aa), r) in &self.middle {
            if aa == a {
                if let Some(info) = self.side2_info(b) {
                    if pred(info) {
                        acc += r;
                    }
                }
            }
        }
        acc
    }

    /// Sum of flow out of `b` into lower changes selected by `pred`.
    pub fn sum_from(&self, b: &Change, pred: impl Fn(&ClassifiedChange) -> bool) -> Rat {
        let mut acc = zero();
        for ((bb, a), r) in &self.middle {
            if bb == b {
                if let Some(info) = self.side1_info(a) {
                    if pred(info) {
                        acc += r;
                    }
                }
            }
        }
        acc
    }
}

fn build_site_network(cls: &Classification) -> FlowNetwork<SideNode> {
    let mut net = FlowNetwork::new();
    let t2: Vec<&ClassifiedChange> = cls
        .side2
        .iter()
        .filter(|c| cls.is_rising2(c) || cls.is_breaking2(c))
        .collect();
    let t1: Vec<&ClassifiedChange> = cls
        .side1
        .iter()
        .filter(|c| cls.is_falling1(c) || cls.is_breaking1(c))
        .collect();
    for b in &t2 {
        let lower = if cls.is_breaking2(b) {
            b.rate.clone()
        } else {
            zero()
        };
        net.arc(
            Node::O,
            Node::Inner(SideNode::Upper(b.change.clone())),
            lower,
            Some(b.rate.clone()),
        )
        .expect("fresh arc");
    }
    for a in &t1 {
        let lower = if cls.is_breaking1(a) {
            a.rate.clone()
        } else {
            zero()
        };
        net.arc(
            Node::Inner(SideNode::Lower(a.change.clone())),
            Node::Z,
            lower,
            Some(a.rate.clone()),
        )
        .expect("fresh arc");
    }
    for b in &t2 {
        for a in &t1 {
            if a.result.leq(&b.result).unwrap_or(false) {
                net.arc(
                    Node::Inner(SideNode::Upper(b.change.clone())),
                    Node::Inner(SideNode::Lower(a.change.clone())),
                    zero(),
                    None,
                )
                .expect("fresh arc");
            }
        }
    }
    net
}

fn middle_of(flow: &Flow<SideNode>) -> BTreeMap<(Change, Change), Rat> {
    let mut out = BTreeMap::new();
    for (from, to, r) in flow.positive_arcs() {
        if let (Node::Inner(SideNode::Upper(b)), Node::Inner(SideNode::Lower(a))) = (from, to) {
            out.insert((b, a), r.clone());
        }
    }
    out
}

/// Extends a middle assignment to a full flow by summing rows and columns
/// onto the terminal arcs.
fn extend_middle(middle: &BTreeMap<(Change, Change), Rat>) -> Flow<SideNode> {
    let mut values = Vec::new();
    let mut row: BTreeMap<Change, Rat> = BTreeMap::new();
    let mut col: BTreeMap<Change, Rat> = BTreeMap::new();
    for ((b, a), r) in middle {
        values.push((
            (
                Node::Inner(SideNode::Upper(b.clone())),
                Node::Inner(SideNode::Lower(a.clone())),
            ),
            r.clone(),
        ));
        *row.entry(b.clone()).or_insert_with(zero) += r;
        *col.entry(a.clone()).or_insert_with(zero) += r;
    }
    for (b, r) in row {
        values.push(((Node::O, Node::Inner(SideNode::Upper(b))), r));
    }
    for (a, r) in col {
        values.push(((Node::Inner(SideNode::Lower(a)), Node::Z), r));
    }
    Flow::from_values(values)
}

/// Solves the site problem and applies the safe-by-safe cleanup, leaving a
/// flow that still meets every bound.
pub fn solve_px(
    m1: &dyn RateModel,
    m2: &dyn RateModel,
    eta: &LocalConfiguration,
    xi: &LocalConfiguration,
    x: &Site,
) -> Result<SiteFlow, CouplingError> {
    let cls = classify(m1, m2, eta, xi, x)?;
    // without breaking moves there are no mandatory arcs, and the zero flow
    // is exactly what the solver returns
    if cls.breaking1().is_empty() && cls.breaking2().is_empty() {
        return Ok(SiteFlow {
            x: x.clone(),
            cls,
            middle: BTreeMap::new(),
        });
    }
    let net = build_site_network(&cls);
    let flow = net.solve_feasible().map_err(|cut| CouplingError::Infeasible {
        site: x.clone(),
        detail: format!(
            "lower bounds {} into the violating side exceed uppers {} out",
            fmt_rat(&cut.lower_into),
            fmt_rat(&cut.upper_out)
        ),
    })?;
    let mut middle = middle_of(&flow);
    // drop safe-with-safe pairings: rising-safe upper flow into falling-safe
    // lower changes is never needed and would double-couple the remainders
    middle.retain(|(b, a), _| {
        let b_safe = cls
            .side2
            .iter()
            .any(|c| &c.change == b && c.order_safe && cls.is_rising2(c));
        let a_safe = cls
            .side1
            .iter()
            .any(|c| &c.change == a && c.order_safe && cls.is_falling1(c));
        !(b_safe && a_safe)
    });
    Ok(SiteFlow {
        x: x.clone(),
        cls,
        middle,
    })
}

/// Structural classes of a pair-problem node, relative to the canonically
/// ordered pair `(lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PairCell {
    /// Safe downward move attributed to `lo` (side 1) / safe upward move
    /// attributed to `lo` (side 2).
    GoodLo,
    GoodHi,
    /// Order-breaking migration from `lo` to `hi`.
    BadLoHi,
    /// Order-breaking migration from `hi` to `lo`.
    BadHiLo,
}

struct PairNode {
    change: Change,
    rate: Rat,
    result: LocalConfiguration,
    cell: PairCell,
}

/// A solved pair problem, symmetric in its two sites.
pub struct PairFlow {
    pub lo: Site,
    pub hi: Site,
    side1: Vec<PairNode>,
    side2: Vec<PairNode>,
    middle: BTreeMap<(Change, Change), Rat>,
}

impl PairFlow {
    pub fn value(&self, b: &Change, a: &Change) -> Rat {
        self.middle
            .get(&(b.clone(), a.clone()))
            .cloned()
            .unwrap_or_else(zero)
    }

    pub fn arcs(&self) -> impl Iterator<Item = (&Change, &Change, &Rat)> {
        self.middle.iter().map(|((b, a), r)| (b, a, r))
    }

    fn cell1(&self, a: &Change) -> Option<PairCell> {
        self.side1.iter().find(|n| &n.change == a).map(|n| n.cell)
    }

    fn cell2(&self, b: &Change) -> Option<PairCell> {
        self.side2.iter().find(|n| &n.change == b).map(|n| n.cell)
    }

    /// Flow out of `b` into the breaking migrations from `from` to `to`.
    pub fn sum_from_into_bad(&self, b: &Change, from: &Site) -> Rat {
        let want = if *from == self.lo {
            PairCell::BadLoHi
        } else {
            PairCell::BadHiLo
        };
        let mut acc = zero();
        for ((bb, a), r) in &self.middle {
            if bb == b && self.cell1(a) == Some(want) {
                acc += r;
            }
        }
        acc
    }

    /// Flow into `a` from the breaking upper migrations departing `from`.
    pub fn sum_into_from_bad(&self, a: &Change, from: &Site) -> Rat {
        let want = if *from == self.lo {
            PairCell::BadLoHi
        } else {
            PairCell::BadHiLo
        };
        let mut acc = zero();
        for ((b, aa), r) in &self.middle {
            if aa == a && self.cell2(b) == Some(want) {
                acc += r;
            }
        }
        acc
    }
}

fn migration_from(change: &Change, from: &Site) -> bool {
    matches!(change, Change::Migration { from: f, .. } if f == from)
}

fn migration_to(change: &Change, to: &Site) -> bool {
    matches!(change, Change::Migration { to: t, .. } if t == to)
}

/// Collects the pair-problem nodes for one side from the two site
/// classifications.
fn pair_nodes(
    cls_lo: &Classification,
    cls_hi: &Classification,
    lo: &Site,
    hi: &Site,
    side1: bool,
) -> Vec<PairNode> {
    let mut out = Vec::new();
    let mut push = |c: &ClassifiedChange, cell: PairCell| {
        out.push(PairNode {
            change: c.change.clone(),
            rate: c.rate.clone(),
            result: c.result.clone(),
            cell,
        });
    };
    if side1 {
        // safe downward moves attributed to each site, and the breaking
        // migrations between the pair
        for c in &cls_lo.side1 {
            if cls_lo.is_falling1(c) && c.order_safe {
                push(c, PairCell::GoodLo);
            }
            if !c.order_safe && migration_from(&c.change, lo) && migration_to(&c.change, hi) {
                push(c, PairCell::BadLoHi);
            }
        }
        for c in &cls_hi.side1 {
            if cls_hi.is_falling1(c) && c.order_safe {
                push(c, PairCell::GoodHi);
            }
            if !c.order_safe && migration_from(&c.change, hi) && migration_to(&c.change, lo) {
                push(c, PairCell::BadHiLo);
            }
        }
    } else {
        // safe upward moves attributed to their destination, and the
        // breaking upper migrations between the pair
        for c in &cls_lo.side2 {
            if cls_lo.is_rising2(c) && c.order_safe {
                push(c, PairCell::GoodLo);
            }
            if !c.order_safe && migration_from(&c.change, lo) && migration_to(&c.change, hi) {
                push(c, PairCell::BadLoHi);
            }
        }
        for c in &cls_hi.side2 {
            if cls_hi.is_rising2(c) && c.order_safe {
                push(c, PairCell::GoodHi);
            }
            if !c.order_safe && migration_from(&c.change, hi) && migration_to(&c.change, lo) {
                push(c, PairCell::BadHiLo);
            }
        }
    }
    out
}

/// Terminal-arc bounds of an upper pair-problem node: breaking migrations
/// carry their exact rate; safe rises are capped by the site flow they
/// already exchange with the breaking lower migrations of the pair.
fn pair_bounds2(n: &PairNode, flo: &SiteFlow, fhi: &SiteFlow) -> (Rat, Rat) {
    let (lo, hi) = (&flo.x, &fhi.x);
    match n.cell {
        PairCell::BadLoHi | PairCell::BadHiLo => (n.rate.clone(), n.rate.clone()),
        PairCell::GoodLo => (
            zero(),
            flo.sum_from(&n.change, |a| {
                !a.order_safe && migration_from(&a.change, hi) && migration_to(&a.change, lo)
            }),
        ),
        PairCell::GoodHi => (
            zero(),
            fhi.sum_from(&n.change, |a| {
                !a.order_safe && migration_from(&a.change, lo) && migration_to(&a.change, hi)
            }),
        ),
    }
}

/// Terminal-arc bounds of a lower pair-problem node; safe falls are capped
/// by the site flow they receive from the breaking upper migrations.
fn pair_bounds1(n: &PairNode, flo: &SiteFlow, fhi: &SiteFlow) -> (Rat, Rat) {
    let (lo, hi) = (&flo.x, &fhi.x);
    match n.cell {
        PairCell::BadLoHi | PairCell::BadHiLo => (n.rate.clone(), n.rate.clone()),
        PairCell::GoodLo => (
            zero(),
            flo.sum_into(&n.change, |b| {
                !b.order_safe && migration_from(&b.change, lo) && migration_to(&b.change, hi)
            }),
        ),
        PairCell::GoodHi => (
            zero(),
            fhi.sum_into(&n.change, |b| {
                !b.order_safe && migration_from(&b.change, hi) && migration_to(&b.change, lo)
            }),
        ),
    }
}

/// Solves the pair problem for neighbouring sites from their (cleaned-up)
/// site flows. The problem splits into two independent halves, each solved
/// exactly; afterwards any safe-to-safe flow is removed.
pub fn solve_pxy(fx: &SiteFlow, fy: &SiteFlow) -> Result<PairFlow, CouplingError> {
    let (flo, fhi) = if fx.x <= fy.x { (fx, fy) } else { (fy, fx) };
    let lo = flo.x.clone();
    let hi = fhi.x.clone();
    let side1 = pair_nodes(&flo.cls, &fhi.cls, &lo, &hi, true);
    let side2 = pair_nodes(&flo.cls, &fhi.cls, &lo, &hi, false);

    // A half pairs the breaking lower migrations in one direction with the
    // safe upper rises at their destination, and the breaking upper
    // migrations of the same direction with the safe lower falls at their
    // source.
    let half = |bad: PairCell, good1: PairCell, good2: PairCell|
     -> Result<BTreeMap<(Change, Change), Rat>, CouplingError> {
        let nodes1: Vec<&PairNode> = side1
            .iter()
            .filter(|n| n.cell == bad || n.cell == good1)
            .collect();
        let nodes2: Vec<&PairNode> = side2
            .iter()
            .filter(|n| n.cell == bad || n.cell == good2)
            .collect();
        // all lower bounds vanish without breaking migrations, so the zero
        // flow solves the half exactly as the solver would
        if !side1.iter().any(|n| n.cell == bad) && !side2.iter().any(|n| n.cell == bad) {
            return Ok(BTreeMap::new());
        }
        let mut net: FlowNetwork<SideNode> = FlowNetwork::new();
        for b in &nodes2 {
            let (l, u) = pair_bounds2(b, flo, fhi);
            net.arc(
                Node::O,
                Node::Inner(SideNode::Upper(b.change.clone())),
                l,
                Some(u),
            )
            .expect("fresh arc");
        }
        for a in &nodes1 {
            let (l, u) = pair_bounds1(a, flo, fhi);
            net.arc(
                Node::Inner(SideNode::Lower(a.change.clone())),
                Node::Z,
                l,
                Some(u),
            )
            .expect("fresh arc");
        }
        for b in &nodes2 {
            for a in &nodes1 {
                if a.result.leq(&b.result).unwrap_or(false) {
                    net.arc(
                        Node::Inner(SideNode::Upper(b.change.clone())),
                        Node::Inner(SideNode::Lower(a.change.clone())),
                        zero(),
                        None,
                    )
                    .expect("fresh arc");
                }
            }
        }
        let flow = net.solve_feasible().map_err(|cut| CouplingError::Infeasible {
            site: lo.clone(),
            detail: format!(
                "pair problem with {hi}: lower bounds {} exceed uppers {}",
                fmt_rat(&cut.lower_into),
                fmt_rat(&cut.upper_out)
            ),
        })?;
        Ok(middle_of(&flow))
    };

    let mut middle = half(PairCell::BadHiLo, PairCell::GoodHi, PairCell::GoodLo)?;
    let other = half(PairCell::BadLoHi, PairCell::GoodLo, PairCell::GoodHi)?;
    middle.extend(other);

    let mut pf = PairFlow {
        lo,
        hi,
        side1,
        side2,
        middle,
    };
    // safe-by-safe cleanup
    let drop_keys: Vec<(Change, Change)> = pf
        .middle
        .keys()
        .filter(|(b, a)| {
            matches!(pf.cell2(b), Some(PairCell::GoodLo | PairCell::GoodHi))
                && matches!(pf.cell1(a), Some(PairCell::GoodLo | PairCell::GoodHi))
        })
        .cloned()
        .collect();
    for k in drop_keys {
        pf.middle.remove(&k);
    }
    Ok(pf)
}

/// Rebuilds a site flow around externally supplied middle-arc values (for
/// validating published solutions); every arc must join classified changes
/// with ordered results.
pub fn site_flow_from_values(
    m1: &dyn RateModel,
    m2: &dyn RateModel,
    eta: &LocalConfiguration,
    xi: &LocalConfiguration,
    x: &Site,
    values: Vec<((Change, Change), Rat)>,
) -> Result<SiteFlow, CouplingError> {
    let cls = classify(m1, m2, eta, xi, x)?;
    let mut middle = BTreeMap::new();
    for ((b, a), r) in values {
        let bi = cls
            .side2
            .iter()
            .find(|c| c.change == b)
            .ok_or_else(|| CouplingError::Invalid(format!("{b:?} is not a rate-positive upper change at {x}")))?;
        let ai = cls
            .side1
            .iter()
            .find(|c| c.change == a)
            .ok_or_else(|| CouplingError::Invalid(format!("{a:?} is not a rate-positive lower change at {x}")))?;
        if !ai.result.leq(&bi.result)? {
            return Err(CouplingError::Invalid(format!(
                "arc {b:?} -> {a:?} joins unordered results"
            )));
        }
        if r > zero() {
            *middle.entry((b, a)).or_insert_with(zero) += r;
        }
    }
    Ok(SiteFlow {
        x: x.clone(),
        cls,
        middle,
    })
}

/// Independent bound-and-conservation audit of a site flow against its
/// bounds table.
pub fn audit_site_flow(fx: &SiteFlow) -> Result<(), String> {
    let net = build_site_network(&fx.cls);
    audit(&net, &extend_middle(&fx.middle)).map_err(|e| e.to_string())
}

fn build_pair_network(pf: &PairFlow, flo: &SiteFlow, fhi: &SiteFlow) -> FlowNetwork<SideNode> {
    let mut net = FlowNetwork::new();
    for b in &pf.side2 {
        let (l, u) = pair_bounds2(b, flo, fhi);
        net.arc(Node::O, Node::Inner(SideNode::Upper(b.change.clone())), l, Some(u))
            .expect("fresh arc");
    }
    for a in &pf.side1 {
        let (l, u) = pair_bounds1(a, flo, fhi);
        net.arc(Node::Inner(SideNode::Lower(a.change.clone())), Node::Z, l, Some(u))
            .expect("fresh arc");
    }
    for b in &pf.side2 {
        for a in &pf.side1 {
            if a.result.leq(&b.result).unwrap_or(false) {
                net.arc(
                    Node::Inner(SideNode::Upper(b.change.clone())),
                    Node::Inner(SideNode::Lower(a.change.clone())),
                    zero(),
                    None,
                )
                .expect("fresh arc");
            }
        }
    }
    net
}

/// Rebuilds a pair flow around externally supplied middle-arc values.
pub fn pair_flow_from_values(
    fx: &SiteFlow,
    fy: &SiteFlow,
    values: Vec<((Change, Change), Rat)>,
) -> Result<PairFlow, CouplingError> {
    let (flo, fhi) = if fx.x <= fy.x { (fx, fy) } else { (fy, fx) };
    let lo = flo.x.clone();
    let hi = fhi.x.clone();
    let side1 = pair_nodes(&flo.cls, &fhi.cls, &lo, &hi, true);
    let side2 = pair_nodes(&flo.cls, &fhi.cls, &lo, &hi, false);
    let mut middle = BTreeMap::new();
    for ((b, a), r) in values {
        if !side2.iter().any(|n| n.change == b) {
            return Err(CouplingError::Invalid(format!(
                "{b:?} is not an upper node of the pair problem at ({lo}, {hi})"
            )));
        }
        if !side1.iter().any(|n| n.change == a) {
            return Err(CouplingError::Invalid(format!(
                "{a:?} is not a lower node of the pair problem at ({lo}, {hi})"
            )));
        }
        if r > zero() {
            *middle.entry((b, a)).or_insert_with(zero) += r;
        }
    }
    Ok(PairFlow {
        lo,
        hi,
        side1,
        side2,
        middle,
    })
}

/// Independent audit of a pair flow against its bounds table (which inherits
/// capacities from the two site flows).
pub fn audit_pair_flow(pf: &PairFlow, fx: &SiteFlow, fy: &SiteFlow) -> Result<(), String> {
    let (flo, fhi) = if fx.x <= fy.x { (fx, fy) } else { (fy, fx) };
    let net = build_pair_network(pf, flo, fhi);
    audit(&net, &extend_middle(&pf.middle)).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// Flow bundles and the assembled coupling

pub struct FlowBundle {
    pub eta: LocalConfiguration,
    pub xi: LocalConfiguration,
    pub site_flows: BTreeMap<Site, SiteFlow>,
    pub pair_flows: BTreeMap<(Site, Site), PairFlow>,
}

impl FlowBundle {
    pub fn pair(&self, x: &Site, y: &Site) -> Option<&PairFlow> {
        let key = if x <= y {
            (x.clone(), y.clone())
        } else {
            (y.clone(), x.clone())
        };
        self.pair_flows.get(&key)
    }
}

/// Solves site problems for the given sites and pair problems for every
/// neighbouring pair among them.
pub fn solve_bundle(
    m1: &dyn RateModel,
    m2: &dyn RateModel,
    eta: &LocalConfiguration,
    xi: &LocalConfiguration,
    sites: &[Site],
) -> Result<FlowBundle, CouplingError> {
    let geometry = m1.geometry();
    let mut site_flows = BTreeMap::new();
    for x in sites {
        site_flows.insert(x.clone(), solve_px(m1, m2, eta, xi, x)?);
    }
    let mut pair_flows = BTreeMap::new();
    for x in sites {
        for y in geometry.neighbors(x) {
            if !sites.contains(&y) {
                continue;
            }
            let key = if *x <= y {
                (x.clone(), y.clone())
            } else {
                (y.clone(), x.clone())
            };
            if pair_flows.contains_key(&key) {
                continue;
            }
            let pf = solve_pxy(&site_flows[&key.0], &site_flows[&key.1])?;
            pair_flows.insert(key, pf);
        }
    }
    Ok(FlowBundle {
        eta: eta.clone(),
        xi: xi.clone(),
        site_flows,
        pair_flows,
    })
}

/// Generator term tags; the wire names are part of the table format.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum GenTerm {
    Gen1,
    Gen10,
    Gen2,
    Gen11,
    Gen3,
    Gen5,
    Gen4,
    Gen6,
    GenX,
}

impl GenTerm {
    pub fn tag(&self) -> &'static str {
        match self {
            GenTerm::Gen1 => "gen1",
            GenTerm::Gen10 => "gen10",
            GenTerm::Gen2 => "gen2",
            GenTerm::Gen11 => "gen11",
            GenTerm::Gen3 => "gen3",
            GenTerm::Gen5 => "gen5",
            GenTerm::Gen4 => "gen4",
            GenTerm::Gen6 => "gen6",
            GenTerm::GenX => "genx",
        }
    }

    pub fn parse(s: &str) -> Result<GenTerm, String> {
        Ok(match s {
            "gen1" => GenTerm::Gen1,
            "gen10" => GenTerm::Gen10,
            "gen2" => GenTerm::Gen2,
            "gen11" => GenTerm::Gen11,
            "gen3" => GenTerm::Gen3,
            "gen5" => GenTerm::Gen5,
            "gen4" => GenTerm::Gen4,
            "gen6" => GenTerm::Gen6,
            "genx" => GenTerm::GenX,
            other => return Err(format!("unknown term tag {other:?}")),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CouplingEntry {
    pub effect1: Option<Change>,
    pub effect2: Option<Change>,
    pub rate: Rat,
    pub term: GenTerm,
}

pub struct CouplingTable {
    pub eta: LocalConfiguration,
    pub xi: LocalConfiguration,
    pub entries: Vec<CouplingEntry>,
    /// Sites with a solved site problem; their coupled terms are complete.
    pub covered_sites: Vec<Site>,
    /// Sites whose uncoupled remainders could be computed (every neighbour
    /// pair solved); marginals are exact for changes attributed here.
    pub fully_covered: Vec<Site>,
    pub covered_pairs: Vec<(Site, Site)>,
}

/// Builds the coupling table from a bundle of flow solutions.
pub fn assemble_generator(
    m1: &dyn RateModel,
    _m2: &dyn RateModel,
    bundle: &FlowBundle,
) -> Result<CouplingTable, CouplingError> {
    let geometry = m1.geometry();
    let covered_sites: Vec<Site> = bundle.site_flows.keys().cloned().collect();
    let covered_pairs: Vec<(Site, Site)> = bundle.pair_flows.keys().cloned().collect();
    let fully_covered: Vec<Site> = covered_sites
        .iter()
        .filter(|x| {
            geometry
                .neighbors(x)
                .iter()
                .all(|y| bundle.pair(x, y).is_some())
        })
        .cloned()
        .collect();

    let mut entries = Vec::new();
    let mut push = |effect1: Option<Change>, effect2: Option<Change>, rate: Rat, term: GenTerm| {
        if rate > zero() {
            entries.push(CouplingEntry {
                effect1,
                effect2,
                rate,
                term,
            });
        }
    };

    for (x, fx) in &bundle.site_flows {
        let cls = &fx.cls;
        // uncoupled safe arrivals of the lower process
        for c in &cls.side1 {
            if c.kind == CellKind::UpAlone && c.order_safe {
                push(Some(c.change.clone()), None, c.rate.clone(), GenTerm::Gen1);
            }
        }
        // uncoupled safe departures of the upper process
        for c in &cls.side2 {
            if c.kind == CellKind::DownAlone && c.order_safe {
                push(None, Some(c.change.clone()), c.rate.clone(), GenTerm::Gen10);
            }
        }
        // coupled pairs from the site flow
        for (b, a, r) in fx.arcs() {
            let b_info = fx.side2_info(b).expect("flow within classification");
            let a_info = fx.side1_info(a).expect("flow within classification");
            if b_info.kind == CellKind::DownAlone && !b_info.order_safe {
                push(Some(a.clone()), Some(b.clone()), r.clone(), GenTerm::Gen3);
            } else if a_info.kind == CellKind::UpAlone && !a_info.order_safe {
                push(Some(a.clone()), Some(b.clone()), r.clone(), GenTerm::Gen5);
            }
        }
        // uncoupled remainders need every neighbour pair solved
        if !fully_covered.contains(x) {
            continue;
        }
        for c in &cls.side1 {
            if !(cls.is_falling1(c) && c.order_safe) {
                continue;
            }
            let mut residual = c.rate.clone();
            residual -= fx.sum_into(&c.change, |b| {
                b.kind == CellKind::DownAlone && !b.order_safe
            });
            for y in geometry.neighbors(x) {
                if let Some(pf) = bundle.pair(x, &y) {
                    residual -= pf.sum_into_from_bad(&c.change, x);
                }
            }
            if residual < zero() {
                return Err(CouplingError::NegativeResidual {
                    site: x.clone(),
                    change: c.change.clone(),
                    residual: fmt_rat(&residual),
                });
            }
            push(Some(c.change.clone()), None, residual, GenTerm::Gen2);
        }
        for c in &cls.side2 {
            if !(cls.is_rising2(c) && c.order_safe) {
                continue;
            }
            let mut residual = c.rate.clone();
            residual -= fx.sum_from(&c.change, |a| {
                a.kind == CellKind::UpAlone && !a.order_safe
            });
            for y in geometry.neighbors(x) {
                if let Some(pf) = bundle.pair(x, &y) {
                    // breaking inbound migrations into x depart from y
                    residual -= pf.sum_from_into_bad(&c.change, &y);
                }
            }
            if residual < zero() {
                return Err(CouplingError::NegativeResidual {
                    site: x.clone(),
                    change: c.change.clone(),
                    residual: fmt_rat(&residual),
                });
            }
            push(None, Some(c.change.clone()), residual, GenTerm::Gen11);
        }
    }

    // coupled pairs from the pair flows
    for pf in bundle.pair_flows.values() {
        for (b, a, r) in pf.arcs() {
            let c2 = pf.cell2(b).expect("arc endpoint classified");
            let c1 = pf.cell1(a).expect("arc endpoint classified");
            let term = match (c2, c1) {
                // breaking upper migration paired with a safe fall at its source
                (PairCell::BadLoHi, PairCell::GoodLo)
                | (PairCell::BadHiLo, PairCell::GoodHi) => GenTerm::Gen4,
                // breaking lower migration paired with a safe rise at its destination
                (PairCell::GoodHi, PairCell::BadLoHi)
                | (PairCell::GoodLo, PairCell::BadHiLo) => GenTerm::Gen6,
                // both migrations breaking, same ordered pair
                (PairCell::BadLoHi, PairCell::BadLoHi)
                | (PairCell::BadHiLo, PairCell::BadHiLo) => GenTerm::GenX,
                other => {
                    return Err(CouplingError::Invalid(format!(
                        "pair flow carries an arc in a forbidden cell pair {other:?}"
                    )))
                }
            };
            push(Some(a.clone()), Some(b.clone()), r.clone(), term);
        }
    }

    Ok(CouplingTable {
        eta: bundle.eta.clone(),
        xi: bundle.xi.clone(),
        entries,
        covered_sites,
        fully_covered,
        covered_pairs,
    })
}

/// The coupling terms attributed to one site: its uncoupled moves and
/// remainders, its site-flow couplings, and the pair couplings whose
/// breaking migrations depart from it. Summed over all sites this is the
/// whole generator, each term exactly once. Changes are expressed relative
/// to the window; the window must cover twice the neighbourhood radius plus
/// the dependency radius around `x`.
pub fn site_entries(
    m1: &dyn RateModel,
    m2: &dyn RateModel,
    eta: &LocalConfiguration,
    xi: &LocalConfiguration,
    x: &Site,
) -> Result<Vec<CouplingEntry>, CouplingError> {
    let geometry = m1.geometry();
    let fx = solve_px(m1, m2, eta, xi, x)?;
    let mut pairs: Vec<(Site, PairFlow)> = Vec::new();
    for y in geometry.neighbors(x) {
        let fy = solve_px(m1, m2, eta, xi, &y)?;
        pairs.push((y.clone(), solve_pxy(&fx, &fy)?));
    }

    let mut entries = Vec::new();
    let mut push = |effect1: Option<Change>, effect2: Option<Change>, rate: Rat, term: GenTerm| {
        if rate > zero() {
            entries.push(CouplingEntry {
                effect1,
                effect2,
                rate,
                term,
            });
        }
    };

    let cls = &fx.cls;
    for c in &cls.side1 {
        if c.kind == CellKind::UpAlone && c.order_safe {
            push(Some(c.change.clone()), None, c.rate.clone(), GenTerm::Gen1);
        }
    }
    for c in &cls.side2 {
        if c.kind == CellKind::DownAlone && c.order_safe {
            push(None, Some(c.change.clone()), c.rate.clone(), GenTerm::Gen10);
        }
    }
    for (b, a, r) in fx.arcs() {
        let b_info = fx.side2_info(b).expect("flow within classification");
        let a_info = fx.side1_info(a).expect("flow within classification");
        if b_info.kind == CellKind::DownAlone && !b_info.order_safe {
            push(Some(a.clone()), Some(b.clone()), r.clone(), GenTerm::Gen3);
        } else if a_info.kind == CellKind::UpAlone && !a_info.order_safe {
            push(Some(a.clone()), Some(b.clone()), r.clone(), GenTerm::Gen5);
        }
    }
    for c in &cls.side1 {
        if !(cls.is_falling1(c) && c.order_safe) {
            continue;
        }
        let mut residual = c.rate.clone();
        residual -= fx.sum_into(&c.change, |b| {
            b.kind == CellKind::DownAlone && !b.order_safe
        });
        for (_, pf) in &pairs {
            residual -= pf.sum_into_from_bad(&c.change, x);
        }
        if residual < zero() {
            return Err(CouplingError::NegativeResidual {
                site: x.clone(),
                change: c.change.clone(),
                residual: fmt_rat(&residual),
            });
        }
        push(Some(c.change.clone()), None, residual, GenTerm::Gen2);
    }
    for c in &cls.side2 {
        if !(cls.is_rising2(c) && c.order_safe) {
            continue;
        }
        let mut residual = c.rate.clone();
        residual -= fx.sum_from(&c.change, |a| {
            a.kind == CellKind::UpAlone && !a.order_safe
        });
        for (y, pf) in &pairs {
            residual -= pf.sum_from_into_bad(&c.change, y);
        }
        if residual < zero() {
            return Err(CouplingError::NegativeResidual {
                site: x.clone(),
                change: c.change.clone(),
                residual: fmt_rat(&residual),
            });
        }
        push(None, Some(c.change.clone()), residual, GenTerm::Gen11);
    }

    // pair couplings whose breaking migrations depart from x
    for (_, pf) in &pairs {
        let bad_from_x = if *x == pf.lo {
            PairCell::BadLoHi
        } else {
            PairCell::BadHiLo
        };
        for (b, a, r) in pf.arcs() {
            let c2 = pf.cell2(b).expect("arc endpoint classified");
            let c1 = pf.cell1(a).expect("arc endpoint classified");
            let term = if c2 == bad_from_x && c1 == bad_from_x {
                GenTerm::GenX
            } else if c2 == bad_from_x
                && matches!(c1, PairCell::GoodLo | PairCell::GoodHi)
            {
                GenTerm::Gen4
            } else if c1 == bad_from_x
                && matches!(c2, PairCell::GoodLo | PairCell::GoodHi)
            {
                GenTerm::Gen6
            } else {
                continue;
            };
            push(Some(a.clone()), Some(b.clone()), r.clone(), term);
        }
    }
    Ok(entries)
}

impl CouplingTable {
    /// Entries whose effects touch the given site.
    pub fn entries_involving(&self, site: &Site) -> Vec<&CouplingEntry> {
        self.entries
            .iter()
            .filter(|e| {
                e.effect1
                    .iter()
                    .chain(e.effect2.iter())
                    .any(|c| c.touched_sites().contains(&site))
            })
            .collect()
    }

    pub fn total_rate(&self) -> Rat {
        self.entries.iter().map(|e| e.rate.clone()).sum()
    }

    /// CSV serialisation: `effect1,effect2,rate,term` with `-` for an
    /// absent effect.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("effect1,effect2,rate,term\n");
        for e in &self.entries {
            let eff = |c: &Option<Change>| match c {
                Some(c) => c.descriptor(),
                None => "-".to_string(),
            };
            out.push_str(&format!(
                "{},{},{},{}\n",
                eff(&e.effect1),
                eff(&e.effect2),
                fmt_rat(&e.rate),
                e.term.tag()
            ));
        }
        out
    }
}

/// Parses the CSV table format back into entries.
pub fn parse_coupling_csv(text: &str) -> Result<Vec<CouplingEntry>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some("effect1,effect2,rate,term") => {}
        other => return Err(format!("bad header {other:?}")),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(format!("line {}: expected 4 fields", i + 2));
        }
        let eff = |s: &str| -> Result<Option<Change>, String> {
            if s == "-" {
                Ok(None)
            } else {
                Change::parse_descriptor(s).map(Some)
            }
        };
        let effect1 = eff(parts[0])?;
        let effect2 = eff(parts[1])?;
        if effect1.is_none() && effect2.is_none() {
            return Err(format!("line {}: both effects absent", i + 2));
        }
        out.push(CouplingEntry {
            effect1,
            effect2,
            rate: parse_rat(parts[2])?,
            term: GenTerm::parse(parts[3])?,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Validators

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub checked: usize,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub checks: Vec<CheckReport>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{}: {} ({} checks)\n",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.checked
            ));
            for f in c.failures.iter().take(5) {
                out.push_str(&format!("  {f}\n"));
            }
        }
        out
    }
}

/// Attribution of a lower-process change for marginal accounting: arrivals
/// and departures belong to their site, migrations to their source.
fn attribution1(change: &Change) -> &Site {
    match change {
        Change::Arrival { site, .. } | Change::Departure { site, .. } => site,
        Change::Migration { from, .. } => from,
    }
}

/// Upper-process changes attribute migrations to their destination.
fn attribution2(change: &Change) -> &Site {
    match change {
        Change::Arrival { site, .. } | Change::Departure { site, .. } => site,
        Change::Migration { to, .. } => to,
    }
}

/// Runs the four validators against a table.
pub fn validate_coupling(
    table: &CouplingTable,
    m1: &dyn RateModel,
    m2: &dyn RateModel,
) -> Result<ValidationReport, CouplingError> {
    let eta = &table.eta;
    let xi = &table.xi;
    let geometry = m1.geometry();
    let mut checks = Vec::new();

    // V1: positive rates
    let mut v1 = CheckReport {
        name: "V1 non-negativity",
        passed: true,
        checked: table.entries.len(),
        failures: vec![],
    };
    for e in &table.entries {
        if e.rate <= zero() {
            v1.passed = false;
            v1.failures
                .push(format!("non-positive rate on {:?}/{:?}", e.effect1, e.effect2));
        }
    }
    checks.push(v1);

    // V2: order preserved by every entry
    let mut v2 = CheckReport {
        name: "V2 order preservation",
        passed: true,
        checked: table.entries.len(),
        failures: vec![],
    };
    for e in &table.entries {
        let after1 = match &e.effect1 {
            Some(c) => apply_change(c, eta),
            None => Ok(eta.clone()),
        };
        let after2 = match &e.effect2 {
            Some(c) => apply_change(c, xi),
            None => Ok(xi.clone()),
        };
        match (after1, after2) {
            (Ok(a1), Ok(a2)) => {
                if !a1.leq(&a2)? {
                    v2.passed = false;
                    v2.failures
                        .push(format!("order broken by {:?}/{:?}", e.effect1, e.effect2));
                }
            }
            _ => {
                v2.passed = false;
                v2.failures.push(format!(
                    "entry {:?}/{:?} cannot fire from the window pair",
                    e.effect1, e.effect2
                ));
            }
        }
    }
    checks.push(v2);

    // V3 / V3': exact marginals for changes whose accounting scope is covered
    let pair_covered = |a: &Site, b: &Site| -> bool {
        table
            .covered_pairs
            .iter()
            .any(|(p, q)| (p == a && q == b) || (p == b && q == a))
    };
    let mut v3 = CheckReport {
        name: "V3 lower marginals",
        passed: true,
        checked: 0,
        failures: vec![],
    };
    let mut v3p = CheckReport {
        name: "V3' upper marginals",
        passed: true,
        checked: 0,
        failures: vec![],
    };
    let k_max = m1.k_max().max(m2.k_max());
    let l_max = m1.l_max().max(m2.l_max());
    for x in &table.covered_sites {
        for change in enumerate_changes_at(x, &geometry, k_max, l_max) {
            // lower process
            if attribution1(&change) == x {
                if let Ok(result) = apply_change(&change, eta) {
                    let rate = m1.rate(&change, eta)?;
                    if rate > zero() {
                        let safe = result.leq(xi)?;
                        let in_scope = match &change {
                            Change::Arrival { .. } => {
                                // safe arrivals are single uncoupled entries;
                                // breaking ones couple through the site flow
                                true
                            }
                            Change::Departure { .. } => table.fully_covered.contains(x),
                            Change::Migration { from, to, .. } => {
                                if safe {
                                    table.fully_covered.contains(x)
                                } else {
                                    let _ = from;
                                    pair_covered(x, to)
                                }
                            }
                        };
                        if in_scope {
                            v3.checked += 1;
                            let total: Rat = table
                                .entries
                                .iter()
                                .filter(|e| e.effect1.as_ref() == Some(&change))
                                .map(|e| e.rate.clone())
                                .sum();
                            if total != rate {
                                v3.passed = false;
                                v3.failures.push(format!(
                                    "{:?}: entries sum to {}, rate is {}",
                                    change,
                                    fmt_rat(&total),
                                    fmt_rat(&rate)
                                ));
                            }
                        }
                    }
                }
            }
            // upper process
            if attribution2(&change) == x {
                if let Ok(result) = apply_change(&change, xi) {
                    let rate = m2.rate(&change, xi)?;
                    if rate > zero() {
                        let safe = eta.leq(&result)?;
                        let in_scope = match &change {
                            Change::Departure { .. } => true,
                            Change::Arrival { .. } => table.fully_covered.contains(x),
                            Change::Migration { from, .. } => {
                                if safe {
                                    table.fully_covered.contains(x)
                                } else {
                                    pair_covered(from, x)
                                }
                            }
                        };
                        if in_scope {
                            v3p.checked += 1;
                            let total: Rat = table
                                .entries
                                .iter()
                                .filter(|e| e.effect2.as_ref() == Some(&change))
                                .map(|e| e.rate.clone())
                                .sum();
                            if total != rate {
                                v3p.passed = false;
                                v3p.failures.push(format!(
                                    "{:?}: entries sum to {}, rate is {}",
                                    change,
                                    fmt_rat(&total),
                                    fmt_rat(&rate)
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    checks.push(v3);
    checks.push(v3p);

    // V4: total rate bounded by the summed single-process rates; without
    // coverage information (externally supplied tables) there is no scope
    // to bound against
    if table.covered_sites.is_empty() {
        checks.push(CheckReport {
            name: "V4 total rate bound",
            passed: true,
            checked: 0,
            failures: vec![],
        });
    } else {
        let mut bound = zero();
        for x in &table.covered_sites {
            for change in enumerate_changes_at(x, &geometry, k_max, l_max) {
                if apply_change(&change, eta).is_ok() {
                    bound += m1.rate(&change, eta)?;
                }
                if apply_change(&change, xi).is_ok() {
                    bound += m2.rate(&change, xi)?;
                }
            }
        }
        let total = table.total_rate();
        checks.push(CheckReport {
            name: "V4 total rate bound",
            passed: total <= bound,
            checked: 1,
            failures: if total <= bound {
                vec![]
            } else {
                vec![format!(
                    "total {} exceeds bound {}",
                    fmt_rat(&total),
                    fmt_rat(&bound)
                )]
            },
        });
    }

    Ok(ValidationReport { checks })
}

// ---------------------------------------------------------------------------
// Zero-pattern checks

/// Confirms the structural zero pattern of a site flow: positive flow only
/// where the cell pair admits it.
pub fn site_zero_violations(fx: &SiteFlow) -> Vec<String> {
    let mut out = Vec::new();
    for (b, a, r) in fx.arcs() {
        if *r <= zero() {
            continue;
        }
        let bi = match fx.side2_info(b) {
            Some(i) => i,
            None => {
                out.push(format!("flow from unclassified upper change {b:?}"));
                continue;
            }
        };
        let ai = match fx.side1_info(a) {
            Some(i) => i,
            None => {
                out.push(format!("flow into unclassified lower change {a:?}"));
                continue;
            }
        };
        let ok = match (&bi.kind, bi.order_safe, &ai.kind, ai.order_safe) {
            // breaking upper falls pair with safe lower falls
            (CellKind::DownAlone, false, CellKind::DownAlone, true) => true,
            (CellKind::DownAlone, false, CellKind::DownPair(_), true) => true,
            (CellKind::DownPair(_), false, CellKind::DownAlone, true) => true,
            (CellKind::DownPair(_), false, CellKind::DownPair(_), true) => true,
            // breaking falls on both sides must share the partner
            (CellKind::DownPair(yb), false, CellKind::DownPair(ya), false) => ya == yb,
            // breaking rises on both sides must share the partner
            (CellKind::UpPair(yb), false, CellKind::UpPair(ya), false) => ya == yb,
            // safe upper rises pair with breaking lower rises
            (CellKind::UpAlone, true, CellKind::UpAlone, false) => true,
            (CellKind::UpAlone, true, CellKind::UpPair(_), false) => true,
            (CellKind::UpPair(_), true, CellKind::UpAlone, false) => true,
            (CellKind::UpPair(_), true, CellKind::UpPair(_), false) => true,
            _ => false,
        };
        if !ok {
            out.push(format!(
                "forbidden site-flow arc {b:?} ({:?}, safe={}) -> {a:?} ({:?}, safe={})",
                bi.kind, bi.order_safe, ai.kind, ai.order_safe
            ));
        }
    }
    out
}

/// Confirms the structural zero pattern of a pair flow.
pub fn pair_zero_violations(pf: &PairFlow) -> Vec<String> {
    let mut out = Vec::new();
    for (b, a, r) in pf.arcs() {
        if *r <= zero() {
            continue;
        }
        let ok = matches!(
            (pf.cell2(b), pf.cell1(a)),
            (Some(PairCell::BadLoHi), Some(PairCell::GoodLo | PairCell::BadLoHi))
                | (Some(PairCell::BadHiLo), Some(PairCell::GoodHi | PairCell::BadHiLo))
                | (Some(PairCell::GoodHi), Some(PairCell::BadLoHi))
                | (Some(PairCell::GoodLo), Some(PairCell::BadHiLo))
        );
        if !ok {
            out.push(format!(
                "forbidden pair-flow arc {b:?} ({:?}) -> {a:?} ({:?})",
                pf.cell2(b),
                pf.cell1(a)
            ));
        }
    }
    out
}
