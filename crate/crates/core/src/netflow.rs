//! Feasible flows in directed networks with per-arc lower and upper bounds.
//!
//! Networks have two distinguished terminals `O` (origin, no in-arcs) and
//! `Z` (destination, no out-arcs). A flow must respect every arc bound and
//! conserve mass at every interior node. Infeasibility is certified by a
//! node partition with the origin and destination on the same side whose
//! incoming lower bounds exceed its outgoing upper bounds.
//!
//! The solver removes lower bounds by the usual reduction: subtract lowers,
//! add a super source/sink absorbing the per-node imbalance, close the
//! network with a return arc from `Z` to `O`, and run a shortest-augmenting-
//! path maximum flow. Infinite uppers are capped internally; the cap is
//! chosen at least one unit above the total mandatory mass, so in an
//! infeasible instance no capped arc is ever saturated and the residual cut
//! translates into a genuine violating partition of the original network.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;

use num_traits::Zero;
use thiserror::Error;

use crate::rat::{fmt_rat, one, zero, Rat};

/// A node: one of the two terminals or an inner node with label `L`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node<L> {
    O,
    Z,
    Inner(L),
}

impl<L: fmt::Debug> fmt::Debug for Node<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::O => write!(f, "O"),
            Node::Z => write!(f, "Z"),
            Node::Inner(l) => write!(f, "{l:?}"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetworkError {
    #[error("arc lower bound exceeds its upper bound")]
    LowerAboveUpper,
    #[error("negative arc bound")]
    NegativeBound,
    #[error("arc into the origin")]
    ArcIntoOrigin,
    #[error("arc out of the destination")]
    ArcOutOfDestination,
    #[error("self-loop arc")]
    SelfLoop,
    #[error("duplicate arc")]
    DuplicateArc,
}

#[derive(Clone, Debug)]
struct ArcDef {
    from: usize,
    to: usize,
    lower: Rat,
    upper: Option<Rat>,
}

/// Directed network with bounds; terminals exist implicitly.
#[derive(Clone, Debug)]
pub struct FlowNetwork<L: Clone + Eq + Hash> {
    labels: Vec<L>,
    index: HashMap<L, usize>,
    arcs: Vec<ArcDef>,
    arc_set: HashMap<(usize, usize), usize>,
}

const NODE_O: usize = 0;
const NODE_Z: usize = 1;

impl<L: Clone + Eq + Hash + fmt::Debug> Default for FlowNetwork<L> {
    fn default() -> Self {
        Self::new()
    }
}

impl<L: Clone + Eq + Hash + fmt::Debug> FlowNetwork<L> {
    pub fn new() -> Self {
        FlowNetwork {
            labels: Vec::new(),
            index: HashMap::new(),
            arcs: Vec::new(),
            arc_set: HashMap::new(),
        }
    }

    fn node_id(&mut self, node: &Node<L>) -> usize {
        match node {
            Node::O => NODE_O,
            Node::Z => NODE_Z,
            Node::Inner(l) => {
                if let Some(i) = self.index.get(l) {
                    *i
                } else {
                    let i = self.labels.len() + 2;
                    self.labels.push(l.clone());
                    self.index.insert(l.clone(), i);
                    i
                }
            }
        }
    }

    fn node_of(&self, id: usize) -> Node<L> {
        match id {
            NODE_O => Node::O,
            NODE_Z => Node::Z,
            _ => Node::Inner(self.labels[id - 2].clone()),
        }
    }

    /// Registers an inner node even if no arc touches it yet.
    pub fn ensure_node(&mut self, label: L) {
        self.node_id(&Node::Inner(label));
    }

    /// Adds an arc; `upper = None` means unbounded above.
    pub fn arc(
        &mut self,
        from: Node<L>,
        to: Node<L>,
        lower: Rat,
        upper: Option<Rat>,
    ) -> Result<(), NetworkError> {
        if to == Node::O {
            return Err(NetworkError::ArcIntoOrigin);
        }
        if from == Node::Z {
            return Err(NetworkError::ArcOutOfDestination);
        }
        if from == to {
            return Err(NetworkError::SelfLoop);
        }
        if lower < zero() {
            return Err(NetworkError::NegativeBound);
        }
        if let Some(u) = &upper {
            if *u < zero() {
                return Err(NetworkError::NegativeBound);
            }
            if lower > *u {
                return Err(NetworkError::LowerAboveUpper);
            }
        }
        let f = self.node_id(&from);
        let t = self.node_id(&to);
        if self.arc_set.contains_key(&(f, t)) {
            return Err(NetworkError::DuplicateArc);
        }
        self.arc_set.insert((f, t), self.arcs.len());
        self.arcs.push(ArcDef {
            from: f,
            to: t,
            lower,
            upper,
        });
        Ok(())
    }

    pub fn inner_nodes(&self) -> &[L] {
        &self.labels
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs(&self) -> impl Iterator<Item = (Node<L>, Node<L>, &Rat, Option<&Rat>)> {
        self.arcs.iter().map(|a| {
            (
                self.node_of(a.from),
                self.node_of(a.to),
                &a.lower,
                a.upper.as_ref(),
            )
        })
    }

    fn sum_lowers(&self) -> Rat {
        self.arcs.iter().map(|a| a.lower.clone()).sum()
    }

    /// Cap applied to unbounded arcs, per the documented rule: all lower
    /// bounds plus all finite uppers leaving the origin, floored at one.
    pub fn infinite_cap(&self) -> Rat {
        let mut cap = self.sum_lowers();
        for a in &self.arcs {
            if a.from == NODE_O {
                if let Some(u) = &a.upper {
                    cap += u;
                }
            }
        }
        if cap < one() {
            cap = one();
        }
        cap
    }

    /// Feasible flow or a violating partition.
    pub fn solve_feasible(&self) -> Result<Flow<L>, CutCertificate<L>> {
        self.solve_with_cap(&self.infinite_cap())
    }

    /// Same as [`solve_feasible`](Self::solve_feasible) with an explicit cap
    /// for unbounded arcs (must be at least the default cap to be sound);
    /// exposed so tests can confirm the cap does not change verdicts.
    pub fn solve_with_cap(&self, inf_cap: &Rat) -> Result<Flow<L>, CutCertificate<L>> {
        let n = self.labels.len() + 2;
        let s_star = n;
        let t_star = n + 1;
        let mut mf = MaxFlow::new(n + 2);

        // per-node imbalance created by subtracting lower bounds
        let mut balance: Vec<Rat> = vec![zero(); n];
        let mut need = zero();
        for a in &self.arcs {
            balance[a.to] += &a.lower;
            balance[a.from] -= &a.lower;
        }
        for b in &balance {
            if *b > zero() {
                need += b;
            }
        }
        // reduced capacities; unbounded arcs stay unsaturated in any
        // infeasible run because their cap strictly exceeds `need`
        let head = &need + one();
        let mut arc_edges = Vec::with_capacity(self.arcs.len());
        for a in &self.arcs {
            let cap = match &a.upper {
                Some(u) => u - &a.lower,
                None => {
                    let c = inf_cap - &a.lower;
                    if c < head {
                        head.clone()
                    } else {
                        c
                    }
                }
            };
            arc_edges.push(mf.add_edge(a.from, a.to, cap));
        }
        // return arc closing the network; never saturates
        mf.add_edge(NODE_Z, NODE_O, &self.infinite_cap() + &head);
        for (v, b) in balance.iter().enumerate() {
            if *b > zero() {
                mf.add_edge(s_star, v, b.clone());
            } else if *b < zero() {
                mf.add_edge(v, t_star, -b.clone());
            }
        }

        let value = mf.run(s_star, t_star);
        if value == need {
            let mut values = HashMap::new();
            for (a, e) in self.arcs.iter().zip(&arc_edges) {
                let f = &a.lower + mf.flow(*e);
                if !f.is_zero() {
                    values.insert((a.from, a.to), f);
                }
            }
            Ok(Flow {
                labels: self.labels.clone(),
                index: self.index.clone(),
                values,
            })
        } else {
            Err(self.extract_certificate(&mf, s_star))
        }
    }

    fn extract_certificate(&self, mf: &MaxFlow, s_star: usize) -> CutCertificate<L> {
        let reach = mf.residual_reachable(s_star);
        let mut in_x: Vec<bool> = (0..self.labels.len() + 2).map(|i| reach[i]).collect();
        // the return arc keeps slack, so Z reachable implies O reachable;
        // an O alone in X can be dropped because O has no in-arcs
        if in_x[NODE_O] && !in_x[NODE_Z] {
            in_x[NODE_O] = false;
        }
        debug_assert!(!(in_x[NODE_Z] && !in_x[NODE_O]));
        let mut lower_into = zero();
        let mut upper_out = zero();
        for a in &self.arcs {
            if !in_x[a.from] && in_x[a.to] {
                lower_into += &a.lower;
            } else if in_x[a.from] && !in_x[a.to] {
                let u = a
                    .upper
                    .as_ref()
                    .expect("unbounded arc cannot cross a violating cut");
                upper_out += u;
            }
        }
        let x_side: Vec<Node<L>> = (0..self.labels.len() + 2)
            .filter(|i| in_x[*i])
            .map(|i| self.node_of(i))
            .collect();
        let cert = CutCertificate {
            x_side,
            lower_into,
            upper_out,
        };
        debug_assert!(cert.verify(self));
        cert
    }

    /// Exhaustively tests the partition criterion; intended for small
    /// networks in tests. Returns the first violating partition in subset
    /// order, if any.
    pub fn exhaustive_violation(&self) -> Option<CutCertificate<L>> {
        let k = self.labels.len();
        assert!(k <= 20, "exhaustive partition check limited to 20 nodes");
        // O and Z on the same side: together inside X or together outside
        for oz_in in [false, true] {
            for mask in 0u32..(1 << k) {
                let mut in_x = vec![false; k + 2];
                in_x[NODE_O] = oz_in;
                in_x[NODE_Z] = oz_in;
                for i in 0..k {
                    in_x[i + 2] = mask & (1 << i) != 0;
                }
                let mut lower_into = zero();
                let mut upper_out: Option<Rat> = Some(zero());
                for a in &self.arcs {
                    if !in_x[a.from] && in_x[a.to] {
                        lower_into += &a.lower;
                    } else if in_x[a.from] && !in_x[a.to] {
                        upper_out = match (upper_out, &a.upper) {
                            (Some(acc), Some(u)) => Some(acc + u),
                            _ => None,
                        };
                    }
                }
                if let Some(u) = upper_out {
                    if lower_into > u {
                        let x_side = (0..k + 2)
                            .filter(|i| in_x[*i])
                            .map(|i| self.node_of(i))
                            .collect();
                        return Some(CutCertificate {
                            x_side,
                            lower_into,
                            upper_out: u,
                        });
                    }
                }
            }
        }
        None
    }

    /// Plain-text arc list `origin destination lower upper flow`.
    pub fn dump(&self, flow: Option<&Flow<L>>) -> String {
        let mut out = String::new();
        for a in &self.arcs {
            let from = self.node_of(a.from);
            let to = self.node_of(a.to);
            let upper = match &a.upper {
                Some(u) => fmt_rat(u),
                None => "inf".to_string(),
            };
            let f = match flow {
                Some(fl) => fmt_rat(&fl.value(&from, &to)),
                None => "-".to_string(),
            };
            out.push_str(&format!(
                "{:?} {:?} {} {} {}\n",
                from,
                to,
                fmt_rat(&a.lower),
                upper,
                f
            ));
        }
        out
    }
}

/// A violating partition: the origin and destination sit on the same side,
/// yet the lower bounds entering `x_side` exceed the upper bounds leaving it.
#[derive(Clone, Debug)]
pub struct CutCertificate<L> {
    pub x_side: Vec<Node<L>>,
    pub lower_into: Rat,
    pub upper_out: Rat,
}

impl<L: Clone + Eq + Hash + fmt::Debug> CutCertificate<L> {
    /// Recomputes both sums from the network and confirms the violation.
    pub fn verify(&self, net: &FlowNetwork<L>) -> bool {
        let in_x = |node: &Node<L>| self.x_side.contains(node);
        let same_side = in_x(&Node::O) == in_x(&Node::Z);
        let mut lower_into = zero();
        let mut upper_out: Option<Rat> = Some(zero());
        for (from, to, l, u) in net.arcs() {
            if !in_x(&from) && in_x(&to) {
                lower_into += l;
            } else if in_x(&from) && !in_x(&to) {
                upper_out = match (upper_out, u) {
                    (Some(acc), Some(u)) => Some(acc + u),
                    _ => None,
                };
            }
        }
        same_side
            && upper_out.as_ref() == Some(&self.upper_out)
            && lower_into == self.lower_into
            && self.lower_into > self.upper_out
    }
}

/// An arc assignment; absent arcs carry zero.
#[derive(Clone, Debug)]
pub struct Flow<L: Clone + Eq + Hash> {
    labels: Vec<L>,
    index: HashMap<L, usize>,
    values: HashMap<(usize, usize), Rat>,
}

impl<L: Clone + Eq + Hash + fmt::Debug> Flow<L> {
    pub fn empty() -> Flow<L> {
        Flow {
            labels: Vec::new(),
            index: HashMap::new(),
            values: HashMap::new(),
        }
    }

    fn id(&self, node: &Node<L>) -> Option<usize> {
        match node {
            Node::O => Some(NODE_O),
            Node::Z => Some(NODE_Z),
            Node::Inner(l) => self.index.get(l).copied(),
        }
    }

    pub fn value(&self, from: &Node<L>, to: &Node<L>) -> Rat {
        match (self.id(from), self.id(to)) {
            (Some(f), Some(t)) => self.values.get(&(f, t)).cloned().unwrap_or_else(zero),
            _ => zero(),
        }
    }

    pub fn positive_arcs(&self) -> impl Iterator<Item = (Node<L>, Node<L>, &Rat)> {
        self.values.iter().map(|((f, t), r)| {
            let node = |id: usize| match id {
                NODE_O => Node::O,
                NODE_Z => Node::Z,
                _ => Node::Inner(self.labels[id - 2].clone()),
            };
            (node(*f), node(*t), r)
        })
    }

    /// Builds a flow directly from arc values (used for externally supplied
    /// solutions such as published tables); entries must be non-negative.
    pub fn from_values(values: Vec<((Node<L>, Node<L>), Rat)>) -> Flow<L> {
        let mut flow = Flow::empty();
        for ((from, to), v) in values {
            assert!(v >= zero(), "flow values must be non-negative");
            let f = flow.intern(&from);
            let t = flow.intern(&to);
            if !v.is_zero() {
                *flow.values.entry((f, t)).or_insert_with(zero) += v;
            }
        }
        flow
    }

    fn intern(&mut self, node: &Node<L>) -> usize {
        match node {
            Node::O => NODE_O,
            Node::Z => NODE_Z,
            Node::Inner(l) => {
                if let Some(i) = self.index.get(l) {
                    *i
                } else {
                    let i = self.labels.len() + 2;
                    self.labels.push(l.clone());
                    self.index.insert(l.clone(), i);
                    i
                }
            }
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AuditError {
    #[error("flow below lower bound on arc {0}")]
    BelowLower(String),
    #[error("flow above upper bound on arc {0}")]
    AboveUpper(String),
    #[error("flow on an arc absent from the network: {0}")]
    OffNetwork(String),
    #[error("conservation fails at node {0}")]
    NotConserved(String),
    #[error("origin outflow differs from destination inflow")]
    TerminalImbalance,
}

/// Independent bound-and-conservation audit of a flow against a network.
pub fn audit<L: Clone + Eq + Hash + fmt::Debug>(
    net: &FlowNetwork<L>,
    flow: &Flow<L>,
) -> Result<(), AuditError> {
    let mut net_arcs: HashMap<(Node<L>, Node<L>), (Rat, Option<Rat>)> = HashMap::new();
    for (from, to, l, u) in net.arcs() {
        net_arcs.insert((from, to), (l.clone(), u.cloned()));
    }
    let mut balance: HashMap<Node<L>, Rat> = HashMap::new();
    for (from, to, v) in flow.positive_arcs() {
        if !net_arcs.contains_key(&(from.clone(), to.clone())) {
            return Err(AuditError::OffNetwork(format!("{from:?} -> {to:?}")));
        }
        *balance.entry(from).or_insert_with(zero) -= v;
        *balance.entry(to).or_insert_with(zero) += v;
    }
    for ((from, to), (l, u)) in &net_arcs {
        let v = flow.value(from, to);
        if v < *l {
            return Err(AuditError::BelowLower(format!("{from:?} -> {to:?}")));
        }
        if let Some(u) = u {
            if v > *u {
                return Err(AuditError::AboveUpper(format!("{from:?} -> {to:?}")));
            }
        }
    }
    for (node, b) in &balance {
        match node {
            Node::O | Node::Z => {}
            Node::Inner(_) => {
                if !b.is_zero() {
                    return Err(AuditError::NotConserved(format!("{node:?}")));
                }
            }
        }
    }
    let out_o = -balance.get(&Node::O).cloned().unwrap_or_else(zero);
    let in_z = balance.get(&Node::Z).cloned().unwrap_or_else(zero);
    if out_o != in_z {
        return Err(AuditError::TerminalImbalance);
    }
    Ok(())
}

/// Greedy transportation start: supplies and demands are scanned in their
/// declared order and each demand is filled from the first admissible
/// supplies with remaining stock; leftover supply drains to an implicit
/// dummy demand. Fails (for escalation to the full solver) when some demand
/// cannot be met this way.
pub fn transport_initial<L: Clone + Eq + Hash + fmt::Debug>(
    supplies: &[(L, Rat)],
    demands: &[(L, Rat)],
    admissible: impl Fn(&L, &L) -> bool,
) -> Result<Vec<((L, L), Rat)>, String> {
    for (_, s) in supplies {
        if *s < zero() {
            return Err("negative supply".into());
        }
    }
    for (_, d) in demands {
        if *d < zero() {
            return Err("negative demand".into());
        }
    }
    let mut remaining: Vec<Rat> = supplies.iter().map(|(_, s)| s.clone()).collect();
    let mut plan = Vec::new();
    for (dl, d) in demands {
        let mut short = d.clone();
        for (i, (sl, _)) in supplies.iter().enumerate() {
            if short.is_zero() {
                break;
            }
            if !admissible(sl, dl) || remaining[i].is_zero() {
                continue;
            }
            let take = if remaining[i] < short {
                remaining[i].clone()
            } else {
                short.clone()
            };
            remaining[i] -= &take;
            short -= &take;
            plan.push(((sl.clone(), dl.clone()), take));
        }
        if !short.is_zero() {
            return Err(format!("demand {dl:?} cannot be met greedily"));
        }
    }
    Ok(plan)
}

// ---------------------------------------------------------------------------
// Edmonds–Karp on exact rationals

struct MfEdge {
    to: usize,
    cap: Rat,
    flow: Rat,
}

struct MaxFlow {
    adj: Vec<Vec<usize>>,
    edges: Vec<MfEdge>,
}

impl MaxFlow {
    fn new(n: usize) -> MaxFlow {
        MaxFlow {
            adj: vec![Vec::new(); n],
            edges: Vec::new(),
        }
    }

    /// Returns the forward edge id; the paired reverse edge is `id ^ 1`.
    fn add_edge(&mut self, from: usize, to: usize, cap: Rat) -> usize {
        let id = self.edges.len();
        self.adj[from].push(id);
        self.edges.push(MfEdge {
            to,
            cap,
            flow: zero(),
        });
        self.adj[to].push(id + 1);
        self.edges.push(MfEdge {
            to: from,
            cap: zero(),
            flow: zero(),
        });
        id
    }

    fn residual(&self, e: usize) -> Rat {
        &self.edges[e].cap - &self.edges[e].flow
    }

    fn flow(&self, e: usize) -> &Rat {
        &self.edges[e].flow
    }

    /// Shortest augmenting paths; BFS visits edges in insertion order, so
    /// runs are reproducible.
    fn run(&mut self, s: usize, t: usize) -> Rat {
        let mut total = zero();
        loop {
            let mut parent: Vec<Option<usize>> = vec![None; self.adj.len()];
            let mut queue = std::collections::VecDeque::new();
            queue.push_back(s);
            let mut seen = vec![false; self.adj.len()];
            seen[s] = true;
            while let Some(v) = queue.pop_front() {
                if v == t {
                    break;
                }
                for &e in &self.adj[v] {
                    let w = self.edges[e].to;
                    if !seen[w] && self.residual(e) > zero() {
                        seen[w] = true;
                        parent[w] = Some(e);
                        queue.push_back(w);
                    }
                }
            }
            if !seen[t] {
                return total;
            }
            // bottleneck along the path
            let mut bottleneck: Option<Rat> = None;
            let mut v = t;
            while v != s {
                let e = parent[v].unwrap();
                let r = self.residual(e);
                bottleneck = Some(match bottleneck {
                    None => r,
                    Some(b) if r < b => r,
                    Some(b) => b,
                });
                v = self.edges[e ^ 1].to;
            }
            let push = bottleneck.unwrap();
            let mut v = t;
            while v != s {
                let e = parent[v].unwrap();
                self.edges[e].flow += &push;
                self.edges[e ^ 1].flow -= &push;
                v = self.edges[e ^ 1].to;
            }
            total += &push;
        }
    }

    fn residual_reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &e in &self.adj[v] {
                let w = self.edges[e].to;
                if !seen[w] && self.residual(e) > zero() {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }
}
