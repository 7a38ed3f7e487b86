//! Birth–death–migration metapopulation models.
//!
//! Site values count individuals in a patch. Individuals give birth at
//! unit per-capita rate while below the ceiling `N`, die at per-capita
//! rates that may switch below the Allee threshold `N_A`, disappear in
//! catastrophes of `k` at once, and migrate in flocks of up to `M`, with a
//! possibly different batch size arriving than departed. All parameters may
//! depend on the vector `r` of values at the nearest neighbours of the
//! departure site.

use std::collections::BTreeMap;

use crate::change::Change;
use crate::config::{CoreError, LocalConfiguration};
use crate::lattice::{l1_ball_offsets, Site};
use crate::model::{admissible_result, RateModel};
use crate::rat::{binomial, fmt_rat, pow, rint, zero, Rat};

use super::{CheckOutcome, ModelsError};

/// A parameter that is either constant or tabulated over the neighbour
/// vector. Tables make "for every pair of ordered neighbour vectors"
/// checkable by finite enumeration.
#[derive(Clone, Debug)]
pub enum ParamTable<T> {
    Constant(T),
    Table(BTreeMap<Vec<u32>, T>),
}

impl<T> ParamTable<T> {
    pub fn is_constant(&self) -> bool {
        matches!(self, ParamTable::Constant(_))
    }

    pub fn get(&self, r: &[u32]) -> Result<&T, CoreError> {
        match self {
            ParamTable::Constant(t) => Ok(t),
            ParamTable::Table(map) => map.get(r).ok_or_else(|| {
                CoreError::Model(format!("missing parameter entry for neighbour vector {r:?}"))
            }),
        }
    }
}

/// Parameter vector of the birth–death–migration family.
#[derive(Clone, Debug)]
pub struct BdmParams {
    pub n: u32,
    pub n_a: u32,
    pub m: u32,
    pub dim: u32,
    pub phi: ParamTable<Rat>,
    pub phi_a: ParamTable<Rat>,
    /// Catastrophe rates, one per batch size `1..=M`.
    pub mu: ParamTable<Vec<Rat>>,
    /// Migration rates indexed `[departing-1][arriving-1]`, an `M x N` matrix.
    pub lambda: ParamTable<Vec<Vec<Rat>>>,
}

impl BdmParams {
    pub fn validate(&self) -> Result<(), ModelsError> {
        if self.m > self.n || self.n_a > self.n {
            return Err(ModelsError::Invalid(
                "need M <= N and N_A <= N".to_string(),
            ));
        }
        let neighbours = 2 * self.dim as usize;
        let check_key = |key: &Vec<u32>| -> Result<(), ModelsError> {
            if key.len() != neighbours {
                return Err(ModelsError::Invalid(format!(
                    "neighbour vector {key:?} should have length {neighbours}"
                )));
            }
            if key.iter().any(|v| *v > self.n) {
                return Err(ModelsError::Invalid(format!(
                    "neighbour vector {key:?} exceeds the occupancy bound"
                )));
            }
            Ok(())
        };
        let nonneg = |r: &Rat| *r >= zero();
        let mut scalars: Vec<&Rat> = Vec::new();
        match &self.phi {
            ParamTable::Constant(v) => scalars.push(v),
            ParamTable::Table(t) => {
                for (k, v) in t {
                    check_key(k)?;
                    scalars.push(v);
                }
            }
        }
        match &self.phi_a {
            ParamTable::Constant(v) => scalars.push(v),
            ParamTable::Table(t) => {
                for (k, v) in t {
                    check_key(k)?;
                    scalars.push(v);
                }
            }
        }
        let mut mu_vecs: Vec<&Vec<Rat>> = Vec::new();
        match &self.mu {
            ParamTable::Constant(v) => mu_vecs.push(v),
            ParamTable::Table(t) => {
                for (k, v) in t {
                    check_key(k)?;
                    mu_vecs.push(v);
                }
            }
        }
        for v in &mu_vecs {
            if v.len() != self.m as usize {
                return Err(ModelsError::Invalid(format!(
                    "catastrophe vector should have length M = {}",
                    self.m
                )));
            }
            scalars.extend(v.iter());
        }
        let mut lam_mats: Vec<&Vec<Vec<Rat>>> = Vec::new();
        match &self.lambda {
            ParamTable::Constant(v) => lam_mats.push(v),
            ParamTable::Table(t) => {
                for (k, v) in t {
                    check_key(k)?;
                    lam_mats.push(v);
                }
            }
        }
        for mat in &lam_mats {
            if mat.len() != self.m as usize || mat.iter().any(|row| row.len() != self.n as usize) {
                return Err(ModelsError::Invalid(format!(
                    "migration matrix should be {} x {}",
                    self.m, self.n
                )));
            }
            for row in mat.iter() {
                scalars.extend(row.iter());
            }
        }
        if scalars.into_iter().any(|r| !nonneg(r)) {
            return Err(ModelsError::Invalid("negative parameter".to_string()));
        }
        Ok(())
    }

    fn needs_neighbours(&self) -> bool {
        !(self.phi.is_constant()
            && self.phi_a.is_constant()
            && self.mu.is_constant()
            && self.lambda.is_constant())
    }

    /// Neighbour vector of `x` in `w`, ordered by coordinate offset.
    fn neighbour_vector(&self, x: &Site, w: &LocalConfiguration) -> Result<Vec<u32>, CoreError> {
        if !self.needs_neighbours() {
            return Ok(Vec::new());
        }
        l1_ball_offsets(self.dim, 1)
            .into_iter()
            .map(|off| w.value(&x.offset(&off)))
            .collect()
    }

    /// Catastrophe rate for a batch of `k` (`1..=M`), given the vector.
    fn mu_k(&self, k: u32, r: &[u32]) -> Result<Rat, CoreError> {
        Ok(self.mu.get(r)?[(k - 1) as usize].clone())
    }

    fn lambda_kl(&self, k: u32, l: u32, r: &[u32]) -> Result<Rat, CoreError> {
        Ok(self.lambda.get(r)?[(k - 1) as usize][(l - 1) as usize].clone())
    }
}

impl RateModel for BdmParams {
    fn max_value(&self) -> u32 {
        self.n
    }

    fn dep_radius(&self) -> u32 {
        if self.needs_neighbours() {
            1
        } else {
            0
        }
    }

    fn delta(&self) -> u32 {
        1
    }

    fn dim(&self) -> u32 {
        self.dim
    }

    fn k_max(&self) -> u32 {
        self.m.max(1)
    }

    fn l_max(&self) -> u32 {
        self.n
    }

    fn rate(&self, change: &Change, w: &LocalConfiguration) -> Result<Rat, CoreError> {
        if admissible_result(change, w)?.is_none() {
            return Ok(zero());
        }
        let floor = self.n - self.m; // departures must not drop a site below N - M
        match change {
            Change::Arrival { site, k } => {
                let v = w.value(site)?;
                if *k == 1 && v < self.n {
                    Ok(rint(v as i64))
                } else {
                    Ok(zero())
                }
            }
            Change::Departure { site, k } => {
                let v = w.value(site)?;
                let r = self.neighbour_vector(site, w)?;
                if *k == 1 {
                    let percap = if v <= self.n_a {
                        self.phi_a.get(&r)?.clone()
                    } else {
                        self.phi.get(&r)?.clone()
                    };
                    let mut rate = rint(v as i64) * percap;
                    if self.m >= 1 && v > floor {
                        rate += self.mu_k(1, &r)?;
                    }
                    Ok(rate)
                } else if *k <= self.m && v >= *k && v - k >= floor {
                    self.mu_k(*k, &r)
                } else {
                    Ok(zero())
                }
            }
            Change::Migration {
                from,
                to,
                depart,
                arrive,
            } => {
                if from.l1_dist(to) > 1 || *depart > self.m || *arrive > self.n {
                    return Ok(zero());
                }
                let vf = w.value(from)?;
                let vt = w.value(to)?;
                if vf < *depart || vf - depart < floor || vt + arrive > self.n {
                    return Ok(zero());
                }
                let r = self.neighbour_vector(from, w)?;
                self.lambda_kl(*depart, *arrive, &r)
            }
        }
    }
}

/// Flocks lose each member independently with probability `1 - p` in
/// transit: `lambda_kl = lambda * C(k, l) p^l (1-p)^(k-l)` and the whole
/// flock vanishes at `mu_k = 2 d lambda (1-p)^k`.
pub fn binomial_bdm(
    lambda: Rat,
    p: Rat,
    n: u32,
    n_a: u32,
    m: u32,
    dim: u32,
    phi: Rat,
    phi_a: Rat,
) -> Result<BdmParams, ModelsError> {
    if p < zero() || p > rint(1) {
        return Err(ModelsError::Invalid("p must lie in [0, 1]".to_string()));
    }
    let q = rint(1) - &p;
    let mut mat = vec![vec![zero(); n as usize]; m as usize];
    for k in 1..=m {
        for l in 1..=k.min(n) {
            mat[(k - 1) as usize][(l - 1) as usize] =
                &lambda * binomial(k, l) * pow(&p, l) * pow(&q, k - l);
        }
    }
    let mu: Vec<Rat> = (1..=m)
        .map(|k| rint(2 * dim as i64) * &lambda * pow(&q, k))
        .collect();
    let params = BdmParams {
        n,
        n_a,
        m,
        dim,
        phi: ParamTable::Constant(phi),
        phi_a: ParamTable::Constant(phi_a),
        mu: ParamTable::Constant(mu),
        lambda: ParamTable::Constant(mat),
    };
    params.validate()?;
    Ok(params)
}

/// Flock migrations keep their size: a diagonal migration matrix built from
/// per-size rates (the flock-size-dependent family, with catastrophes).
pub fn diagonal_bdm(
    n: u32,
    n_a: u32,
    m: u32,
    dim: u32,
    phi: ParamTable<Rat>,
    phi_a: ParamTable<Rat>,
    mu: ParamTable<Vec<Rat>>,
    lambda_diag: ParamTable<Vec<Rat>>,
) -> Result<BdmParams, ModelsError> {
    let to_mat = |diag: &Vec<Rat>| -> Result<Vec<Vec<Rat>>, ModelsError> {
        if diag.len() != m as usize {
            return Err(ModelsError::Invalid(format!(
                "diagonal migration vector should have length M = {m}"
            )));
        }
        let mut mat = vec![vec![zero(); n as usize]; m as usize];
        for k in 1..=m {
            if k <= n {
                mat[(k - 1) as usize][(k - 1) as usize] = diag[(k - 1) as usize].clone();
            }
        }
        Ok(mat)
    };
    let lambda = match &lambda_diag {
        ParamTable::Constant(diag) => ParamTable::Constant(to_mat(diag)?),
        ParamTable::Table(t) => {
            let mut out = BTreeMap::new();
            for (k, diag) in t {
                out.insert(k.clone(), to_mat(diag)?);
            }
            ParamTable::Table(out)
        }
    };
    let params = BdmParams {
        n,
        n_a,
        m,
        dim,
        phi,
        phi_a,
        mu,
        lambda,
    };
    params.validate()?;
    Ok(params)
}

/// Migration and catastrophe rates with an Allee-type switch on the total
/// neighbourhood occupancy: crowded surroundings attract migrants, sparse
/// surroundings raise the catastrophe rate.
#[derive(Clone, Debug)]
pub struct AlleeParams {
    pub n: u32,
    pub n_a: u32,
    pub m: u32,
    pub dim: u32,
    pub phi: Rat,
    pub phi_a: Rat,
    /// Per-flock-size migration base rates, length `M`.
    pub lambda: Vec<Rat>,
    pub lambda_a: Rat,
    /// Per-size catastrophe base rates, length `M`.
    pub mu: Vec<Rat>,
    pub mu_a: Rat,
    /// Neighbourhood-occupancy threshold `A`.
    pub threshold: u32,
}

impl AlleeParams {
    pub fn to_bdm(&self) -> Result<BdmParams, ModelsError> {
        let len = 2 * self.dim as usize;
        let mut mu_table = BTreeMap::new();
        let mut lam_table = BTreeMap::new();
        for r in all_vectors(len, self.n) {
            let total: u32 = r.iter().sum();
            let lam: Vec<Rat> = self
                .lambda
                .iter()
                .map(|l| {
                    if total >= self.threshold {
                        l + &self.lambda_a
                    } else {
                        l.clone()
                    }
                })
                .collect();
            let mu: Vec<Rat> = self
                .mu
                .iter()
                .map(|m| {
                    if total < self.threshold {
                        m + &self.mu_a
                    } else {
                        m.clone()
                    }
                })
                .collect();
            lam_table.insert(r.clone(), lam);
            mu_table.insert(r, mu);
        }
        diagonal_bdm(
            self.n,
            self.n_a,
            self.m,
            self.dim,
            ParamTable::Constant(self.phi.clone()),
            ParamTable::Constant(self.phi_a.clone()),
            ParamTable::Table(mu_table),
            ParamTable::Table(lam_table),
        )
    }
}

/// All vectors in `{0..=max}^len`, lexicographically.
pub(crate) fn all_vectors(len: usize, max: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        let mut next = Vec::with_capacity(out.len() * (max as usize + 1));
        for v in &out {
            for x in 0..=max {
                let mut w = v.clone();
                w.push(x);
                next.push(w);
            }
        }
        out = next;
    }
    out
}

/// All ordered pairs `(r, s)` with `r <= s` componentwise, lexicographically
/// by the pair of per-coordinate value pairs. Constant parameter sets only
/// need the single representative pair.
fn ordered_vector_pairs(len: usize, max: u32, constant: bool) -> Vec<(Vec<u32>, Vec<u32>)> {
    if constant {
        return vec![(vec![0; len], vec![0; len])];
    }
    let mut out = vec![(vec![], vec![])];
    for _ in 0..len {
        let mut next = Vec::new();
        for (r, s) in &out {
            for a in 0..=max {
                for b in a..=max {
                    let mut r2 = r.clone();
                    let mut s2 = s.clone();
                    r2.push(a);
                    s2.push(b);
                    next.push((r2, s2));
                }
            }
        }
        out = next;
    }
    out
}

fn shared_shape(p1: &BdmParams, p2: &BdmParams) -> Result<(), ModelsError> {
    if p1.n != p2.n || p1.n_a != p2.n_a || p1.m != p2.m || p1.dim != p2.dim {
        return Err(ModelsError::ParameterMismatch(format!(
            "(N, N_A, M, d) = ({}, {}, {}, {}) vs ({}, {}, {}, {})",
            p1.n, p1.n_a, p1.m, p1.dim, p2.n, p2.n_a, p2.m, p2.dim
        )));
    }
    Ok(())
}

/// Sufficient conditions for the first process to be stochastically below
/// the second, quantified over all ordered neighbour-vector pairs:
/// death rates dominate downward, partial column sums of the migration
/// matrix dominate upward, and partial row sums (with the catastrophe
/// column `lambda_i0 = mu_i / 2d` prepended) dominate downward.
pub fn check_bdm_comparability(
    p1: &BdmParams,
    p2: &BdmParams,
) -> Result<CheckOutcome, ModelsError> {
    shared_shape(p1, p2)?;
    p1.validate()?;
    p2.validate()?;
    let n = p1.n as usize;
    let m = p1.m as usize;
    let two_d = rint(2 * p1.dim as i64);
    let constant = !p1.needs_neighbours() && !p2.needs_neighbours();
    let err = |e: CoreError| ModelsError::Invalid(e.to_string());

    for (r, s) in ordered_vector_pairs(2 * p1.dim as usize, p1.n, constant) {
        let phi1 = p1.phi.get(&r).map_err(err)?;
        let phi2 = p2.phi.get(&s).map_err(err)?;
        if phi1 < phi2 {
            return Ok(CheckOutcome::fail(format!(
                "(a) phi({r:?}) = {} < {} = phi'({s:?})",
                fmt_rat(phi1),
                fmt_rat(phi2)
            )));
        }
        let phia1 = p1.phi_a.get(&r).map_err(err)?;
        let phia2 = p2.phi_a.get(&s).map_err(err)?;
        if phia1 < phia2 {
            return Ok(CheckOutcome::fail(format!(
                "(a) phi_A({r:?}) = {} < {} = phi_A'({s:?})",
                fmt_rat(phia1),
                fmt_rat(phia2)
            )));
        }
        if m == 0 {
            continue;
        }
        let lam1 = p1.lambda.get(&r).map_err(err)?;
        let lam2 = p2.lambda.get(&s).map_err(err)?;
        let mu1 = p1.mu.get(&r).map_err(err)?;
        let mu2 = p2.mu.get(&s).map_err(err)?;

        // (b): column partial sums over departing sizes
        let mut col1 = vec![zero(); n];
        let mut col2 = vec![zero(); n];
        for mm in 1..=m {
            for j in 0..n {
                col1[j] += &lam1[mm - 1][j];
                col2[j] += &lam2[mm - 1][j];
            }
            let mut min2 = col2[0].clone();
            for j in 1..=n {
                if col2[j - 1] < min2 {
                    min2 = col2[j - 1].clone();
                }
                // min2 = min over k <= j of the second model's column sums
                if col1[j - 1] > min2 {
                    let k = (1..=j)
                        .min_by_key(|k| col2[*k - 1].clone())
                        .expect("nonempty");
                    return Ok(CheckOutcome::fail(format!(
                        "(b) violated at r={r:?}, s={s:?}, m={mm}, k={k}, j={j}: {} > {}",
                        fmt_rat(&col1[j - 1]),
                        fmt_rat(&col2[k - 1])
                    )));
                }
            }
        }

        // (c): row partial sums with the catastrophe column prepended
        let row_sum = |lam: &Vec<Vec<Rat>>, mu: &Vec<Rat>, i: usize, upto: usize| -> Rat {
            let mut acc = &mu[i - 1] / &two_d;
            for j in 1..=upto {
                acc += &lam[i - 1][j - 1];
            }
            acc
        };
        for nn in 0..=n {
            let mut min1 = row_sum(lam1, mu1, 1, nn);
            for l in 1..=m {
                let r1 = row_sum(lam1, mu1, l, nn);
                if r1 < min1 {
                    min1 = r1;
                }
                let r2 = row_sum(lam2, mu2, l, nn);
                if min1 < r2 {
                    let i = (1..=l)
                        .min_by_key(|i| row_sum(lam1, mu1, *i, nn))
                        .expect("nonempty");
                    return Ok(CheckOutcome::fail(format!(
                        "(c) violated at r={r:?}, s={s:?}, n={nn}, i={i}, l={l}: {} < {}",
                        fmt_rat(&min1),
                        fmt_rat(&r2)
                    )));
                }
            }
        }
    }
    Ok(CheckOutcome::pass())
}

pub fn check_bdm_attractive(p: &BdmParams) -> Result<CheckOutcome, ModelsError> {
    check_bdm_comparability(p, p)
}

fn diagonal_of(p: &BdmParams, r: &[u32]) -> Result<Vec<Rat>, ModelsError> {
    let mat = p
        .lambda
        .get(r)
        .map_err(|e| ModelsError::Invalid(e.to_string()))?;
    for (k, row) in mat.iter().enumerate() {
        for (l, v) in row.iter().enumerate() {
            if k != l && *v != zero() {
                return Err(ModelsError::NotDiagonal { k: k + 1, l: l + 1 });
            }
        }
    }
    Ok((0..p.m as usize)
        .map(|k| {
            if k < p.n as usize {
                mat[k][k].clone()
            } else {
                zero()
            }
        })
        .collect())
}

/// Comparability conditions specialised to size-preserving flock
/// migrations (diagonal migration matrix) with catastrophes.
pub fn check_msdc(p1: &BdmParams, p2: &BdmParams) -> Result<CheckOutcome, ModelsError> {
    shared_shape(p1, p2)?;
    p1.validate()?;
    p2.validate()?;
    let m = p1.m as usize;
    let two_d = rint(2 * p1.dim as i64);
    let constant = !p1.needs_neighbours() && !p2.needs_neighbours();
    let err = |e: CoreError| ModelsError::Invalid(e.to_string());

    for (r, s) in ordered_vector_pairs(2 * p1.dim as usize, p1.n, constant) {
        let phi1 = p1.phi.get(&r).map_err(err)?;
        let phi2 = p2.phi.get(&s).map_err(err)?;
        let phia1 = p1.phi_a.get(&r).map_err(err)?;
        let phia2 = p2.phi_a.get(&s).map_err(err)?;
        if phi1 < phi2 || phia1 < phia2 {
            return Ok(CheckOutcome::fail(format!(
                "(a) death rates not ordered at r={r:?}, s={s:?}"
            )));
        }
        if m == 0 {
            continue;
        }
        let lam1 = diagonal_of(p1, &r)?;
        let lam2 = diagonal_of(p2, &s)?;
        let mu1 = p1.mu.get(&r).map_err(err)?;
        let mu2 = p2.mu.get(&s).map_err(err)?;
        for j in 1..=m {
            for k in 1..=j {
                if lam1[j - 1] > lam2[k - 1] {
                    return Ok(CheckOutcome::fail(format!(
                        "(b) violated at r={r:?}, s={s:?}, k={k}, j={j}: lambda_{j} = {} > {} = lambda'_{k}",
                        fmt_rat(&lam1[j - 1]),
                        fmt_rat(&lam2[k - 1])
                    )));
                }
            }
        }
        for l in 1..=m {
            for i in 1..=l {
                if mu1[i - 1] < mu2[l - 1] {
                    return Ok(CheckOutcome::fail(format!(
                        "(c) violated at r={r:?}, s={s:?}, i={i}, l={l}: mu_{i} = {} < {} = mu'_{l}",
                        fmt_rat(&mu1[i - 1]),
                        fmt_rat(&mu2[l - 1])
                    )));
                }
                let lhs = &mu1[i - 1] + &two_d * &lam1[i - 1];
                let rhs = &mu2[l - 1] + &two_d * &lam2[l - 1];
                if lhs < rhs {
                    return Ok(CheckOutcome::fail(format!(
                        "(c) violated at r={r:?}, s={s:?}, i={i}, l={l}: mu_{i} + 2d lambda_{i} = {} < {} = mu'_{l} + 2d lambda'_{l}",
                        fmt_rat(&lhs),
                        fmt_rat(&rhs)
                    )));
                }
            }
        }
    }
    Ok(CheckOutcome::pass())
}

/// Attractiveness for the diagonal family: the comparability conditions
/// applied to the process against itself.
pub fn check_msdc_attractive(p: &BdmParams) -> Result<CheckOutcome, ModelsError> {
    check_msdc(p, p)
}

/// Closed-form attractiveness for the Allee-switch family.
pub fn check_allee_attractive(p: &AlleeParams) -> Result<CheckOutcome, ModelsError> {
    if p.lambda.len() != p.m as usize || p.mu.len() != p.m as usize {
        return Err(ModelsError::Invalid(
            "lambda and mu must have length M".to_string(),
        ));
    }
    let two_d = rint(2 * p.dim as i64);
    if &two_d * &p.lambda_a > p.mu_a {
        return Ok(CheckOutcome::fail(format!(
            "(a) 2d lambda_A = {} > {} = mu_A",
            fmt_rat(&(&two_d * &p.lambda_a)),
            fmt_rat(&p.mu_a)
        )));
    }
    let m = p.m as usize;
    for j in 1..=m {
        for k in 1..=j {
            if p.lambda[j - 1] > p.lambda[k - 1] {
                return Ok(CheckOutcome::fail(format!(
                    "(b) lambda_{j} > lambda_{k}"
                )));
            }
        }
    }
    for l in 1..=m {
        for i in 1..=l {
            if p.mu[i - 1] < p.mu[l - 1] {
                return Ok(CheckOutcome::fail(format!("(c) mu_{i} < mu_{l}")));
            }
            let lhs = &p.mu[i - 1] + &two_d * &p.lambda[i - 1];
            let rhs = &p.mu[l - 1] + &two_d * &p.lambda[l - 1];
            if lhs < rhs {
                return Ok(CheckOutcome::fail(format!(
                    "(c) mu_{i} + 2d lambda_{i} < mu_{l} + 2d lambda_{l}"
                )));
            }
        }
    }
    Ok(CheckOutcome::pass())
}
