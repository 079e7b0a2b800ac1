//! Exhaustive enumeration of small branching random walks in exact rational
//! arithmetic.
//!
//! Trees are generated in depth-first pre-order, the same order in which
//! the sampler draws them, together with every assignment of steps. Two
//! truncations are supported. A node cap keeps trees with at most `n`
//! particles, so probabilities of events are restricted to {|T| ≤ n} and the
//! excluded mass is reported. A generation cap stops reproduction at
//! generation D, which is an exact marginal of the process, so identities
//! for visit counts up to generation D hold with no slack at all.
//!
//! For a configuration whose leftmost visiting particle sits at the end of
//! the ancestral path γ = (z_0, …, z_k), l_i and m_i count the older and the
//! younger siblings of the i-th particle on the path. The probability of
//! {N>0, γ̃ = γ, a_i = l_i, b_i = m_i} factorizes as
//! s(γ)·∏ P(μ = l_i + m_i + 1)·q(z_{i−1})^{l_i}, where q(z) = Σ_y θ(y)·h(z+y)
//! is the non-visit probability of one child of a particle at z. The checks
//! here compare enumerated probabilities with that product, both as exact
//! size-refined generating functions and against the fixed-point brackets.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::distributions::{OffspringDistribution, StepDistribution};
use crate::point::sup_norm;

use super::series::Series;
use super::{OracleError, OracleField};

/// Largest node cap accepted by [`enumerate_small`].
pub const MAX_NODES: usize = 12;
/// Largest number of particles a generation-capped tree may contain.
pub const MAX_DEPTH_NODES: u64 = 40;
/// Guard on the number of complete configurations visited.
pub const MAX_CONFIGURATIONS: u64 = 50_000_000;

/// How the trees are truncated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// Trees with at most this many particles.
    Nodes(usize),
    /// Particles in this generation do not reproduce.
    Depth(u32),
}

/// Exact per-path statistics.
#[derive(Debug, Clone)]
pub struct PathStatistics {
    /// γ = (z_0 = 0, …, z_k = a).
    pub path: Vec<Vec<i64>>,
    /// ∏ θ(z_i − z_{i−1}).
    pub s_gamma: BigRational,
    /// P(N>0, γ̃ = γ) restricted to the enumerated trees.
    pub p_gamma: BigRational,
    /// E(N | N>0, γ̃ = γ) restricted to the enumerated trees.
    pub e_gamma: BigRational,
    /// Σ_j G(a − z_j) with the Green function truncated to the generations
    /// left after z_j. Absent under a node cap.
    pub g_gamma: Option<BigRational>,
    /// E(b_i | N>0, γ̃ = γ) for i = 1..k.
    pub sibling_means: Vec<BigRational>,
    /// Probability mass not covered by the enumeration.
    pub slack: f64,
}

impl PathStatistics {
    pub fn s(&self) -> f64 {
        to_f64(&self.s_gamma)
    }
    pub fn p(&self) -> f64 {
        to_f64(&self.p_gamma)
    }
    pub fn e(&self) -> f64 {
        to_f64(&self.e_gamma)
    }
    pub fn g(&self) -> Option<f64> {
        self.g_gamma.as_ref().map(to_f64)
    }

    /// The path as a word of steps, e.g. `+1,+1,-1`.
    pub fn step_word(&self) -> String {
        self.path
            .windows(2)
            .map(|w| {
                let y: Vec<String> = w[1].iter().zip(&w[0]).map(|(b, a)| format!("{:+}", b - a)).collect();
                if y.len() == 1 {
                    y[0].clone()
                } else {
                    format!("({})", y.join(" "))
                }
            })
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Outcome of comparing enumerated probabilities with the product formula.
#[derive(Debug, Clone, Default)]
pub struct FactorizationCheck {
    /// Distinct (γ, l, m) events seen.
    pub events: usize,
    /// Events whose exact probability differs from the product formula at
    /// some tree size (node cap) or at all (generation cap).
    pub exact_mismatches: usize,
    /// Largest amount by which an enumerated probability exceeds the
    /// product formula evaluated with the upper q bracket.
    pub max_excess_over_upper: f64,
    /// Largest amount by which an enumerated probability falls short of the
    /// product formula with the lower q bracket.
    pub max_shortfall_below_lower: f64,
    /// Whether the bracket comparison was run.
    pub bracket_checked: bool,
}

#[derive(Debug, Clone)]
pub struct EnumerationReport {
    pub truncation: Truncation,
    pub paths: Vec<PathStatistics>,
    /// P(N>0) over the enumerated trees.
    pub visit_probability: BigRational,
    /// E[N] over the enumerated trees.
    pub visit_mass: BigRational,
    pub enumerated_mass: BigRational,
    /// 1 − enumerated mass.
    pub excluded_mass: BigRational,
    pub configurations: u64,
    pub factorization: FactorizationCheck,
    /// Node cap: P(N>0, |T| ≤ n) from the size generating functions.
    pub gf_visit_probability: Option<BigRational>,
    /// Generation cap: Σ_{n≤D} θ^{*n}(a).
    pub truncated_green: Option<BigRational>,
    /// Generation cap: events whose conditional mean of N differs from
    /// G(0) + Σ m_i G(a − z_{i−1}) with truncated Green functions.
    pub conditional_mean_mismatches: usize,
    pub p_exceeds_s: usize,
}

impl EnumerationReport {
    pub fn excluded(&self) -> f64 {
        to_f64(&self.excluded_mass)
    }
}

#[derive(Debug, Clone, Default)]
pub struct LemmaReport {
    pub paths_checked: usize,
    pub sibling_indices_checked: usize,
    /// min over γ of e(γ) − P(μ≥2)·g(γ) + slack.
    pub min_margin: f64,
    /// min over γ and i of E(b_i|γ) − P(μ≥2) + slack.
    pub min_sibling_margin: f64,
    pub p_le_s_checked: usize,
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

struct ExactLaws {
    offspring: Vec<(u32, BigRational)>,
    steps: Vec<(Vec<i64>, BigRational)>,
}

impl ExactLaws {
    fn of(offspring: &OffspringDistribution, step: &StepDistribution) -> Result<Self, OracleError> {
        let off: Vec<(u32, BigRational)> = offspring
            .exact_atoms()
            .ok_or(OracleError::NotExact)?
            .map(|(k, p)| (k, p.clone()))
            .collect();
        let w = step.exact_weights().ok_or(OracleError::NotExact)?;
        let steps = (0..step.len()).map(|j| (step.vector(j).to_vec(), w[j].clone())).collect();
        Ok(Self { offspring: off, steps })
    }

    fn offspring_prob(&self, k: u32) -> BigRational {
        self.offspring
            .iter()
            .find(|(j, _)| *j == k)
            .map(|(_, p)| p.clone())
            .unwrap_or_else(BigRational::zero)
    }

    fn step_prob(&self, y: &[i64]) -> BigRational {
        self.steps
            .iter()
            .find(|(v, _)| v.as_slice() == y)
            .map(|(_, p)| p.clone())
            .unwrap_or_else(BigRational::zero)
    }

    fn p_ge2(&self) -> BigRational {
        self.offspring.iter().filter(|(k, _)| *k >= 2).map(|(_, p)| p.clone()).sum()
    }

    fn range(&self) -> i64 {
        self.steps.iter().map(|(v, _)| sup_norm(v)).max().unwrap_or(0)
    }
}

#[derive(Clone)]
struct Frame {
    pos: Vec<i64>,
    total: u32,
    remaining: u32,
    depth: u32,
}

#[derive(Clone)]
struct FirstVisit {
    path: Vec<Vec<i64>>,
    left: Vec<u32>,
    right: Vec<u32>,
}

#[derive(Clone)]
struct State {
    stack: Vec<Frame>,
    created: usize,
    pending: usize,
    prob: BigRational,
    visits: u32,
    first: Option<FirstVisit>,
}

type EventKey = (Vec<Vec<i64>>, Vec<u32>, Vec<u32>);

#[derive(Default)]
struct EventMass {
    // index = tree size
    by_size: Vec<BigRational>,
    prob: BigRational,
    visit_mass: BigRational,
}

struct Enumerator<'a> {
    laws: &'a ExactLaws,
    target: Vec<i64>,
    truncation: Truncation,
    events: BTreeMap<EventKey, EventMass>,
    total_mass: BigRational,
    visit_mass: BigRational,
    configurations: u64,
}

impl Enumerator<'_> {
    fn node_cap(&self) -> usize {
        match self.truncation {
            Truncation::Nodes(n) => n,
            Truncation::Depth(_) => usize::MAX,
        }
    }

    fn reproduces(&self, depth: u32) -> bool {
        match self.truncation {
            Truncation::Nodes(_) => true,
            Truncation::Depth(d) => depth < d,
        }
    }

    /// Offspring choices for a new particle, with their probabilities.
    fn offspring_choices(&self, depth: u32, created: usize, pending: usize) -> Vec<(u32, BigRational)> {
        if !self.reproduces(depth) {
            return vec![(0, BigRational::one())];
        }
        let cap = self.node_cap();
        self.laws
            .offspring
            .iter()
            .filter(|(c, _)| created + pending + *c as usize <= cap)
            .cloned()
            .collect()
    }

    fn push(&self, st: &mut State, pos: Vec<i64>, depth: u32, children: u32) {
        if children > 0 {
            st.stack.push(Frame {
                pos,
                total: children,
                remaining: children,
                depth,
            });
            st.pending += children as usize;
        }
    }

    fn run(&mut self) -> Result<(), OracleError> {
        let root = vec![0; self.target.len()];
        let at_target = root == self.target;
        let base = State {
            stack: Vec::new(),
            created: 1,
            pending: 0,
            prob: BigRational::one(),
            visits: at_target as u32,
            first: at_target.then(|| FirstVisit {
                path: vec![root.clone()],
                left: vec![],
                right: vec![],
            }),
        };
        for (c, pc) in self.offspring_choices(0, 1, 0) {
            let mut st = base.clone();
            st.prob = pc;
            self.push(&mut st, root.clone(), 0, c);
            self.extend(st)?;
        }
        Ok(())
    }

    fn extend(&mut self, mut st: State) -> Result<(), OracleError> {
        while st.stack.last().is_some_and(|f| f.remaining == 0) {
            st.stack.pop();
        }
        let Some(parent) = st.stack.last_mut() else {
            return self.record(st);
        };
        parent.remaining -= 1;
        let parent_pos = parent.pos.clone();
        let depth = parent.depth + 1;
        st.pending -= 1;
        st.created += 1;
        for j in 0..self.laws.steps.len() {
            let (y, w) = &self.laws.steps[j];
            let pos: Vec<i64> = parent_pos.iter().zip(y).map(|(a, b)| a + b).collect();
            let hit = pos == self.target;
            let first = if hit && st.first.is_none() {
                let mut path: Vec<Vec<i64>> = st.stack.iter().map(|f| f.pos.clone()).collect();
                path.push(pos.clone());
                Some(FirstVisit {
                    path,
                    left: st.stack.iter().map(|f| f.total - 1 - f.remaining).collect(),
                    right: st.stack.iter().map(|f| f.remaining).collect(),
                })
            } else {
                None
            };
            for (c, pc) in self.offspring_choices(depth, st.created, st.pending) {
                let mut next = st.clone();
                next.prob = &st.prob * w * pc;
                next.visits += hit as u32;
                if first.is_some() {
                    next.first = first.clone();
                }
                self.push(&mut next, pos.clone(), depth, c);
                self.extend(next)?;
            }
        }
        Ok(())
    }

    fn record(&mut self, st: State) -> Result<(), OracleError> {
        self.configurations += 1;
        if self.configurations > MAX_CONFIGURATIONS {
            return Err(OracleError::TooLarge(format!("more than {MAX_CONFIGURATIONS} configurations")));
        }
        self.total_mass += &st.prob;
        let weighted = &st.prob * rat(st.visits as i64);
        self.visit_mass += &weighted;
        if let Some(f) = st.first {
            let e = self.events.entry((f.path, f.left, f.right)).or_default();
            if e.by_size.len() <= st.created {
                e.by_size.resize(st.created + 1, BigRational::zero());
            }
            e.by_size[st.created] += &st.prob;
            e.prob += &st.prob;
            e.visit_mass += weighted;
        }
        Ok(())
    }
}

/// Σ_y θ(y)·v(z + y).
fn smooth<F: FnMut(&[i64]) -> BigRational>(laws: &ExactLaws, z: &[i64], mut value: F) -> BigRational {
    let mut acc = BigRational::zero();
    for (y, w) in &laws.steps {
        let x: Vec<i64> = z.iter().zip(y).map(|(a, b)| a + b).collect();
        acc += value(&x) * w;
    }
    acc
}

fn smooth_series(laws: &ExactLaws, z: &[i64], field: &HashMap<Vec<i64>, Series>, degree: usize) -> Series {
    let mut acc = Series::zero(degree);
    for (y, w) in &laws.steps {
        let x: Vec<i64> = z.iter().zip(y).map(|(a, b)| a + b).collect();
        if let Some(v) = field.get(&x) {
            acc.add_assign(&v.scale(w));
        }
    }
    acc
}

fn box_sites(dim: usize, radius: i64) -> Vec<Vec<i64>> {
    let mut sites = vec![vec![]];
    for _ in 0..dim {
        sites = sites
            .into_iter()
            .flat_map(|s| {
                (-radius..=radius).map(move |c| {
                    let mut t = s.clone();
                    t.push(c);
                    t
                })
            })
            .collect();
    }
    sites
}

/// Size generating functions H_w(x) = E[x^{|T|}; no visit | root at w],
/// truncated at `degree`, for every w with ‖w‖∞ ≤ radius.
fn nonvisit_series(
    laws: &ExactLaws,
    target: &[i64],
    degree: usize,
    radius: i64,
) -> HashMap<Vec<i64>, Series> {
    let sites = box_sites(target.len(), radius);
    let mut h: HashMap<Vec<i64>, Series> = sites.iter().map(|s| (s.clone(), Series::zero(degree))).collect();
    // each sweep fixes one more coefficient
    for _ in 0..degree {
        let mut next = HashMap::with_capacity(h.len());
        for w in &sites {
            let s = if w.as_slice() == target {
                Series::zero(degree)
            } else {
                smooth_series(laws, w, &h, degree).compose_pgf(&laws.offspring).shift()
            };
            next.insert(w.clone(), s);
        }
        h = next;
    }
    h
}

/// Size generating function of the whole tree.
fn tree_series(laws: &ExactLaws, degree: usize) -> Series {
    let mut t = Series::zero(degree);
    for _ in 0..degree {
        t = t.compose_pgf(&laws.offspring).shift();
    }
    t
}

/// Non-visit probabilities h_r for r = 0..=depth: h_0 = 1{w≠a},
/// h_r(w) = 1{w≠a}·f(Σ θ(y) h_{r−1}(w+y)).
fn nonvisit_by_generation(laws: &ExactLaws, target: &[i64], depth: u32, radius: i64) -> Vec<HashMap<Vec<i64>, BigRational>> {
    let sites = box_sites(target.len(), radius);
    let indicator = |w: &[i64]| if w == target { BigRational::zero() } else { BigRational::one() };
    let mut out = vec![sites.iter().map(|w| (w.clone(), indicator(w))).collect::<HashMap<_, _>>()];
    for r in 1..=depth as usize {
        let prev = &out[r - 1];
        let mut layer = HashMap::with_capacity(sites.len());
        for w in &sites {
            let v = if w.as_slice() == target {
                BigRational::zero()
            } else {
                let s = smooth(laws, w, |x| prev.get(x).cloned().unwrap_or_else(|| indicator(x)));
                laws.offspring.iter().map(|(k, p)| p * num_traits::pow(s.clone(), *k as usize)).sum()
            };
            layer.insert(w.clone(), v);
        }
        out.push(layer);
    }
    out
}

/// G_r(x) = Σ_{n≤r} θ^{*n}(x) for r = 0..=depth, as maps over the reachable
/// sites.
fn truncated_green(laws: &ExactLaws, dim: usize, depth: u32) -> Vec<HashMap<Vec<i64>, BigRational>> {
    let mut law: HashMap<Vec<i64>, BigRational> = HashMap::from([(vec![0; dim], BigRational::one())]);
    let mut acc = law.clone();
    let mut out = vec![acc.clone()];
    for _ in 0..depth {
        let mut next: HashMap<Vec<i64>, BigRational> = HashMap::new();
        for (x, p) in &law {
            for (y, w) in &laws.steps {
                let z: Vec<i64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
                *next.entry(z).or_insert_with(BigRational::zero) += p * w;
            }
        }
        for (x, p) in &next {
            *acc.entry(x.clone()).or_insert_with(BigRational::zero) += p;
        }
        law = next;
        out.push(acc.clone());
    }
    out
}

fn lookup(map: &HashMap<Vec<i64>, BigRational>, x: &[i64]) -> BigRational {
    map.get(x).cloned().unwrap_or_else(BigRational::zero)
}

fn diff(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn s_of(laws: &ExactLaws, path: &[Vec<i64>]) -> BigRational {
    path.windows(2).map(|w| laws.step_prob(&diff(&w[1], &w[0]))).product()
}

fn collect_paths(
    laws: &ExactLaws,
    events: &BTreeMap<EventKey, EventMass>,
    slack: f64,
    g_of: impl Fn(&[Vec<i64>]) -> Option<BigRational>,
) -> Vec<PathStatistics> {
    struct Acc {
        p: BigRational,
        visits: BigRational,
        right: Vec<BigRational>,
    }
    let mut by_path: BTreeMap<Vec<Vec<i64>>, Acc> = BTreeMap::new();
    for ((path, _, right), m) in events {
        let acc = by_path.entry(path.clone()).or_insert_with(|| Acc {
            p: BigRational::zero(),
            visits: BigRational::zero(),
            right: vec![BigRational::zero(); right.len()],
        });
        acc.p += &m.prob;
        acc.visits += &m.visit_mass;
        for (r, &b) in acc.right.iter_mut().zip(right) {
            *r += &m.prob * rat(b as i64);
        }
    }
    by_path
        .into_iter()
        .map(|(path, acc)| PathStatistics {
            s_gamma: s_of(laws, &path),
            e_gamma: &acc.visits / &acc.p,
            sibling_means: acc.right.iter().map(|r| r / &acc.p).collect(),
            p_gamma: acc.p,
            g_gamma: g_of(&path),
            path,
            slack,
        })
        .collect()
}

/// Non-visit size series on a box large enough for every event of trees
/// with at most `n` particles.
fn node_series(laws: &ExactLaws, target: &[i64], n: usize) -> HashMap<Vec<i64>, Series> {
    let reach = sup_norm(target).max(1) + laws.range() * n as i64;
    nonvisit_series(laws, target, n, reach + laws.range() * n as i64)
}

/// Events whose size-refined probabilities differ from
/// x^k·∏[P(μ=l_i+m_i+1)·θ(z_i−z_{i−1})·Q_{z_{i−1}}^{l_i}·T^{m_i}]·T, with Q
/// built from the non-visit series `h` of `q_laws`.
fn node_factorization_mismatches(
    q_laws: &ExactLaws,
    h: &HashMap<Vec<i64>, Series>,
    t: &Series,
    events: &BTreeMap<EventKey, EventMass>,
    n: usize,
) -> usize {
    let zero = BigRational::zero();
    events
        .iter()
        .filter(|((path, left, right), mass)| {
            let mut gf = Series::one(n);
            for _ in 1..path.len() {
                gf = gf.shift();
            }
            for i in 1..path.len() {
                let z = &path[i - 1];
                let (l, m) = (left[i - 1], right[i - 1]);
                let c = q_laws.offspring_prob(l + m + 1) * q_laws.step_prob(&diff(&path[i], z));
                let q = smooth_series(q_laws, z, h, n);
                gf = gf.mul(&q.pow(l)).mul(&t.pow(m)).scale(&c);
            }
            gf = gf.mul(t);
            !(0..=n).all(|j| mass.by_size.get(j).unwrap_or(&zero) == &gf.0[j])
        })
        .count()
}

/// Enumerates every tree with at most `max_nodes` particles.
///
/// When `bracket` holds fixed-point bounds for the same laws and target, the
/// product formula is also evaluated with the bounds on q, and enumerated
/// probabilities are compared with it up to the excluded mass.
pub fn enumerate_small(
    offspring: &OffspringDistribution,
    step: &StepDistribution,
    target: &[i64],
    max_nodes: usize,
    bracket: Option<&OracleField>,
) -> Result<EnumerationReport, OracleError> {
    if target.len() != step.dim() {
        return Err(OracleError::TargetDimension {
            expected: step.dim(),
            found: target.len(),
        });
    }
    if max_nodes == 0 || max_nodes > MAX_NODES {
        return Err(OracleError::TooLarge(format!("max_nodes must be in 1..={MAX_NODES}")));
    }
    let laws = ExactLaws::of(offspring, step)?;
    let mut en = run_enumerator(&laws, target, Truncation::Nodes(max_nodes))?;
    let n = max_nodes;

    let h = node_series(&laws, target, n);
    let t = tree_series(&laws, n);
    let origin = vec![0; target.len()];
    let gf_visit = t.sub(&h[&origin]).total();

    let excluded = BigRational::one() - &en.total_mass;
    let excluded_f = to_f64(&excluded);
    let mut check = FactorizationCheck {
        events: en.events.len(),
        exact_mismatches: node_factorization_mismatches(&laws, &h, &t, &en.events, n),
        bracket_checked: bracket.is_some(),
        ..Default::default()
    };
    if let Some(b) = bracket {
        for ((path, left, right), mass) in &en.events {
            let mut hi = 1.0;
            let mut lo = 1.0;
            for i in 1..path.len() {
                let z = &path[i - 1];
                let l = left[i - 1];
                let c = to_f64(&(laws.offspring_prob(l + right[i - 1] + 1) * laws.step_prob(&diff(&path[i], z))));
                let (ql, qh) = b.q_bounds(z);
                hi *= c * qh.powi(l as i32);
                lo *= c * ql.powi(l as i32);
            }
            let p = to_f64(&mass.prob);
            check.max_excess_over_upper = check.max_excess_over_upper.max(p - hi);
            check.max_shortfall_below_lower = check.max_shortfall_below_lower.max(lo - excluded_f - p);
        }
    }

    let paths = collect_paths(&laws, &en.events, excluded_f, |_| None);
    let p_exceeds_s = paths.iter().filter(|s| s.p_gamma > s.s_gamma).count();
    let visit_probability = en.events.values().map(|m| m.prob.clone()).sum();
    Ok(EnumerationReport {
        truncation: Truncation::Nodes(max_nodes),
        paths,
        visit_probability,
        visit_mass: std::mem::take(&mut en.visit_mass),
        enumerated_mass: en.total_mass.clone(),
        excluded_mass: excluded,
        configurations: en.configurations,
        factorization: check,
        gf_visit_probability: Some(gf_visit),
        truncated_green: None,
        conditional_mean_mismatches: 0,
        p_exceeds_s,
    })
}

/// Enumerates the process up to generation `depth`.
///
/// Every identity is exact here: the factorization with generation-limited
/// non-visit probabilities, the first moment against Σ_{n≤D} θ^{*n}(a), and
/// the conditional mean of N given (γ, l, m).
pub fn enumerate_depth(
    offspring: &OffspringDistribution,
    step: &StepDistribution,
    target: &[i64],
    depth: u32,
) -> Result<EnumerationReport, OracleError> {
    if target.len() != step.dim() {
        return Err(OracleError::TargetDimension {
            expected: step.dim(),
            found: target.len(),
        });
    }
    let laws = ExactLaws::of(offspring, step)?;
    let branching = laws.offspring.iter().map(|(k, _)| *k as u64).max().unwrap_or(0);
    let mut nodes = 1u64;
    let mut layer = 1u64;
    for _ in 0..depth {
        layer = layer.saturating_mul(branching);
        nodes = nodes.saturating_add(layer);
    }
    if nodes > MAX_DEPTH_NODES {
        return Err(OracleError::TooLarge(format!(
            "trees up to generation {depth} may hold {nodes} particles"
        )));
    }
    let mut en = run_enumerator(&laws, target, Truncation::Depth(depth))?;

    let dim = target.len();
    let radius = sup_norm(target).max(1) + laws.range() * (2 * depth as i64 + 2);
    let h = nonvisit_by_generation(&laws, target, depth, radius);
    let green = truncated_green(&laws, dim, depth);
    let g_trunc = |r: u32, x: &[i64]| lookup(&green[r as usize], x);

    let mut check = FactorizationCheck {
        events: en.events.len(),
        ..Default::default()
    };
    let mut mean_mismatches = 0;
    for ((path, left, right), mass) in &en.events {
        let k = path.len() - 1;
        let mut product = BigRational::one();
        let mut mean = g_trunc(depth - k as u32, &vec![0; dim]);
        for i in 1..=k {
            let z = &path[i - 1];
            let (l, m) = (left[i - 1], right[i - 1]);
            let layer = &h[(depth - i as u32) as usize];
            let q: BigRational = smooth(&laws, z, |x| lookup(layer, x));
            product *= laws.offspring_prob(l + m + 1) * laws.step_prob(&diff(&path[i], z)) * num_traits::pow(q, l as usize);
            mean += rat(m as i64) * g_trunc(depth - i as u32 + 1, &diff(target, z));
        }
        if product != mass.prob {
            check.exact_mismatches += 1;
        }
        if &mass.visit_mass / &mass.prob != mean {
            mean_mismatches += 1;
        }
    }

    let paths = collect_paths(&laws, &en.events, 0.0, |path| {
        Some(
            path.iter()
                .enumerate()
                .map(|(j, z)| g_trunc(depth - j as u32, &diff(target, z)))
                .sum(),
        )
    });
    let p_exceeds_s = paths.iter().filter(|s| s.p_gamma > s.s_gamma).count();
    let visit_probability = en.events.values().map(|m| m.prob.clone()).sum();
    let excluded_mass = BigRational::one() - &en.total_mass;
    Ok(EnumerationReport {
        truncation: Truncation::Depth(depth),
        paths,
        visit_probability,
        visit_mass: std::mem::take(&mut en.visit_mass),
        enumerated_mass: en.total_mass.clone(),
        excluded_mass,
        configurations: en.configurations,
        factorization: check,
        gf_visit_probability: None,
        truncated_green: Some(g_trunc(depth, target)),
        conditional_mean_mismatches: mean_mismatches,
        p_exceeds_s,
    })
}

fn run_enumerator<'a>(laws: &'a ExactLaws, target: &[i64], truncation: Truncation) -> Result<Enumerator<'a>, OracleError> {
    let mut en = Enumerator {
        laws,
        target: target.to_vec(),
        truncation,
        events: BTreeMap::new(),
        total_mass: BigRational::zero(),
        visit_mass: BigRational::zero(),
        configurations: 0,
    };
    en.run()?;
    Ok(en)
}

/// Checks e(γ) ≥ P(μ≥2)·g(γ), E(b_i | γ) ≥ P(μ≥2) and p(γ) ≤ s(γ) for
/// every path with p(γ) > 0, each up to the path's slack.
///
/// Paths without a g value (node-capped enumerations) only take part in the
/// sibling and p ≤ s checks when their slack is zero, since restricting the
/// tree size biases both conditional means downwards.
pub fn lemma1_check(stats: &[PathStatistics], p_ge2: &BigRational) -> Result<LemmaReport, OracleError> {
    let mut report = LemmaReport {
        min_margin: f64::INFINITY,
        min_sibling_margin: f64::INFINITY,
        ..Default::default()
    };
    let violation = |s: &PathStatistics, detail: String| OracleError::ViolationFound {
        path: s.path.clone(),
        detail,
    };
    for s in stats.iter().filter(|s| s.p_gamma > BigRational::zero()) {
        if s.p_gamma > s.s_gamma {
            return Err(violation(s, format!("p = {} exceeds s = {}", s.p_gamma, s.s_gamma)));
        }
        report.p_le_s_checked += 1;
        let exact = s.slack == 0.0;
        if let Some(g) = &s.g_gamma {
            let margin = &s.e_gamma - p_ge2 * g;
            let m = to_f64(&margin) + s.slack;
            if (exact && margin < BigRational::zero()) || m < 0.0 {
                return Err(violation(s, format!("e = {} below P(mu>=2)*g = {}", s.e(), to_f64(&(p_ge2 * g)))));
            }
            report.min_margin = report.min_margin.min(m);
            report.paths_checked += 1;
        }
        if s.g_gamma.is_some() || exact {
            for (i, b) in s.sibling_means.iter().enumerate() {
                let margin = b - p_ge2;
                if margin < BigRational::zero() && (exact || to_f64(&margin) + s.slack < 0.0) {
                    return Err(violation(s, format!("E(b_{}) = {} below P(mu>=2)", i + 1, to_f64(b))));
                }
                report.min_sibling_margin = report.min_sibling_margin.min(to_f64(&margin) + s.slack);
                report.sibling_indices_checked += 1;
            }
        }
    }
    Ok(report)
}

/// P(μ ≥ 2) in exact arithmetic.
pub fn exact_p_ge2(offspring: &OffspringDistribution) -> Result<BigRational, OracleError> {
    Ok(ExactLaws {
        offspring: offspring
            .exact_atoms()
            .ok_or(OracleError::NotExact)?
            .map(|(k, p)| (k, p.clone()))
            .collect(),
        steps: vec![],
    }
    .p_ge2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::solve_nonvisit;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn binary() -> OffspringDistribution {
        OffspringDistribution::from_ratios(&[(0, 1, 2), (2, 1, 2)]).unwrap()
    }

    fn srw1() -> StepDistribution {
        StepDistribution::simple(1).unwrap()
    }

    /// Direct sum over explicitly listed trees: every plane tree is a child
    /// count sequence in pre-order, every step assignment a word.
    fn brute_visit_probability(target: i64, max_nodes: usize) -> BigRational {
        fn trees(max: usize) -> Vec<Vec<u32>> {
            // pre-order child-count sequences of complete binary trees
            let mut out = Vec::new();
            let mut stack = vec![(vec![], 1usize)];
            while let Some((seq, open)) = stack.pop() {
                if open == 0 {
                    out.push(seq);
                    continue;
                }
                for c in [0u32, 2] {
                    if seq.len() + open + c as usize <= max {
                        let mut s: Vec<u32> = seq.clone();
                        s.push(c);
                        stack.push((s, open - 1 + c as usize));
                    }
                }
            }
            out
        }
        let mut total = BigRational::zero();
        for seq in trees(max_nodes) {
            let n = seq.len();
            // parent of each node from the pre-order sequence
            let mut parent = vec![usize::MAX; n];
            let mut open: Vec<(usize, u32)> = vec![];
            for (v, &c) in seq.iter().enumerate() {
                if let Some(top) = open.last_mut() {
                    parent[v] = top.0;
                    top.1 -= 1;
                }
                while open.last().is_some_and(|t| t.1 == 0) {
                    open.pop();
                }
                if c > 0 {
                    open.push((v, c));
                }
            }
            let tree_p = num_traits::pow(r(1, 2), n);
            for word in 0..(1u32 << (n - 1)) {
                let mut pos = vec![0i64; n];
                let mut hit = target == 0;
                for v in 1..n {
                    let y = if word >> (v - 1) & 1 == 1 { 1 } else { -1 };
                    pos[v] = pos[parent[v]] + y;
                    hit |= pos[v] == target;
                }
                if hit {
                    total += &tree_p * num_traits::pow(r(1, 2), n - 1);
                }
            }
        }
        total
    }

    #[test]
    fn single_node_tree() {
        for a in [0i64, 1] {
            let rep = enumerate_small(&binary(), &srw1(), &[a], 1, None).unwrap();
            let expected = if a == 0 { r(1, 2) } else { BigRational::zero() };
            // only the childless root fits
            assert_eq!(rep.enumerated_mass, r(1, 2));
            assert_eq!(rep.visit_probability, expected);
        }
    }

    #[test]
    fn two_independent_sums_agree() {
        let rep = enumerate_small(&binary(), &srw1(), &[1], 5, None).unwrap();
        assert_eq!(rep.visit_probability, brute_visit_probability(1, 5));
        assert_eq!(rep.gf_visit_probability.as_ref(), Some(&rep.visit_probability));
    }

    #[test]
    fn factorization_is_exact_for_binary_fixture() {
        let rep = enumerate_small(&binary(), &srw1(), &[1], 9, None).unwrap();
        // paths (0,1) and (0,-1,0,1)
        assert_eq!(rep.paths.len(), 2);
        assert_eq!(rep.factorization.events, 10);
        assert_eq!(rep.factorization.exact_mismatches, 0);
        assert_eq!(rep.p_exceeds_s, 0);
        assert_eq!(rep.gf_visit_probability.as_ref(), Some(&rep.visit_probability));
    }

    #[test]
    fn factorization_pins_the_q_direction() {
        // skewed steps and a law with p1 > 0
        let off = OffspringDistribution::from_ratios(&[(0, 1, 2), (1, 1, 4), (3, 1, 4)]).unwrap();
        let step = StepDistribution::from_weights(
            1,
            &[
                (vec![1], crate::distributions::Weight::ratio(2, 3)),
                (vec![-2], crate::distributions::Weight::ratio(1, 3)),
            ],
        )
        .unwrap();
        let rep = enumerate_small(&off, &step, &[2], 7, None).unwrap();
        assert_eq!(rep.factorization.exact_mismatches, 0);
        assert_eq!(rep.gf_visit_probability.as_ref(), Some(&rep.visit_probability));
        // the mirrored convention, q read from the reversed walk, fails
        let laws = ExactLaws::of(&off, &step).unwrap();
        let mirrored = ExactLaws::of(&off, &step.reversed()).unwrap();
        let en = run_enumerator(&laws, &[2], Truncation::Nodes(7)).unwrap();
        let t = tree_series(&laws, 7);
        let h = node_series(&mirrored, &[2], 7);
        assert!(node_factorization_mismatches(&mirrored, &h, &t, &en.events, 7) > 0);
    }

    #[test]
    fn bracket_sandwiches_enumerated_events() {
        let field = solve_nonvisit(&binary(), &srw1(), &[1], 60, 1_000_000, 1e-13).unwrap();
        let rep = enumerate_small(&binary(), &srw1(), &[1], 9, Some(&field)).unwrap();
        assert!(rep.factorization.bracket_checked);
        assert!(rep.factorization.max_excess_over_upper <= 1e-12, "{:?}", rep.factorization);
        assert!(rep.factorization.max_shortfall_below_lower <= 0.0, "{:?}", rep.factorization);
    }

    #[test]
    fn depth_identities_are_exact() {
        let rep = enumerate_depth(&binary(), &srw1(), &[1], 3).unwrap();
        assert_eq!(rep.enumerated_mass, BigRational::one());
        assert_eq!(rep.factorization.exact_mismatches, 0);
        assert_eq!(rep.conditional_mean_mismatches, 0);
        // P(S_1 = 1) + P(S_3 = 1) = 1/2 + 3/8
        assert_eq!(rep.truncated_green, Some(r(7, 8)));
        assert_eq!(rep.visit_mass, r(7, 8));
        let lemma = lemma1_check(&rep.paths, &r(1, 2)).unwrap();
        assert!(lemma.paths_checked > 0 && lemma.min_margin >= 0.0);
        assert!(lemma.min_sibling_margin >= 0.0);
    }

    #[test]
    fn root_at_target_path() {
        let rep = enumerate_depth(&binary(), &srw1(), &[0], 2).unwrap();
        assert_eq!(rep.paths.len(), 1);
        let s = &rep.paths[0];
        assert_eq!(s.path, vec![vec![0]]);
        assert_eq!(s.p_gamma, BigRational::one());
        // g = G_2(0) = 1 + 1/2, e = E N_2 = G_2(0)
        assert_eq!(s.g_gamma, Some(r(3, 2)));
        assert_eq!(s.e_gamma, r(3, 2));
        lemma1_check(&rep.paths, &r(1, 2)).unwrap();
    }

    #[test]
    fn lemma_violation_is_reported() {
        let mut rep = enumerate_depth(&binary(), &srw1(), &[1], 2).unwrap();
        rep.paths[0].e_gamma = BigRational::zero();
        assert!(matches!(
            lemma1_check(&rep.paths, &r(1, 2)),
            Err(OracleError::ViolationFound { .. })
        ));
    }

    #[test]
    fn guards() {
        assert!(matches!(
            enumerate_small(&binary(), &srw1(), &[1], 13, None),
            Err(OracleError::TooLarge(_))
        ));
        assert!(matches!(
            enumerate_depth(&binary(), &srw1(), &[1], 6),
            Err(OracleError::TooLarge(_))
        ));
        let float = OffspringDistribution::new(&[(0, 0.5), (2, 0.5)]).unwrap();
        assert!(matches!(
            enumerate_small(&float, &srw1(), &[1], 3, None),
            Err(OracleError::NotExact)
        ));
    }
}
