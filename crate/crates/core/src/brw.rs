//! Streaming sampler for critical branching random walks.
//!
//! A Galton–Watson tree is generated and explored in one depth-first pass
//! with an explicit stack of `(position, remaining children)` frames. Children
//! are explored left to right, so the first node met at the target is the
//! leftmost element of V_a, and its root path is read off the live stack.
//! Memory is proportional to the tree height.

use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::distributions::{OffspringDistribution, StepDistribution};
use crate::green::GreenTable;
use crate::point::{to_coords, Coords};
use crate::sampling::WordSource;

/// Default cap on the number of particles per sample.
pub const DEFAULT_NODE_CAP: u64 = 10_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum BrwConfigError {
    #[error("target has dimension {found}, step law has dimension {expected}")]
    TargetDimension { expected: usize, found: usize },
    #[error("node cap must be at least 1")]
    ZeroNodeCap,
    #[error("Green table is for a different step law")]
    GreenMismatch,
}

#[derive(Debug, Clone)]
pub struct BrwConfig {
    offspring: OffspringDistribution,
    step: StepDistribution,
    target: Coords,
    node_cap: u64,
    green: Option<Arc<GreenTable>>,
}

impl BrwConfig {
    pub fn new(
        offspring: OffspringDistribution,
        step: StepDistribution,
        target: &[i64],
        node_cap: u64,
        green: Option<Arc<GreenTable>>,
    ) -> Result<Self, BrwConfigError> {
        if target.len() != step.dim() {
            return Err(BrwConfigError::TargetDimension {
                expected: step.dim(),
                found: target.len(),
            });
        }
        if node_cap == 0 {
            return Err(BrwConfigError::ZeroNodeCap);
        }
        if let Some(g) = &green {
            if g.step().fingerprint() != step.fingerprint() {
                return Err(BrwConfigError::GreenMismatch);
            }
        }
        Ok(Self {
            offspring,
            step,
            target: to_coords(target),
            node_cap,
            green,
        })
    }

    pub fn offspring(&self) -> &OffspringDistribution {
        &self.offspring
    }

    pub fn step(&self) -> &StepDistribution {
        &self.step
    }

    pub fn dim(&self) -> usize {
        self.step.dim()
    }

    pub fn target(&self) -> &[i64] {
        &self.target[..self.dim()]
    }

    pub fn node_cap(&self) -> u64 {
        self.node_cap
    }

    pub fn green(&self) -> Option<&GreenTable> {
        self.green.as_deref()
    }

    pub fn with_target(&self, target: &[i64]) -> Result<Self, BrwConfigError> {
        Self::new(
            self.offspring.clone(),
            self.step.clone(),
            target,
            self.node_cap,
            self.green.clone(),
        )
    }

    /// G(target − z) from the attached table.
    fn green_from(&self, z: &Coords) -> Option<f64> {
        let d = self.dim();
        let g = self.green.as_ref()?;
        let mut diff = [0i64; crate::point::MAX_DIM];
        for i in 0..d {
            diff[i] = self.target[i] - z[i];
        }
        Some(g.value(&diff[..d]))
    }
}

/// Statistics of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct BrwSample {
    /// N: particles located at the target.
    pub n_visits: u64,
    /// Particles generated (equals the node cap when truncated).
    pub tree_size: u64,
    /// Sum of offspring counts drawn; equals `tree_size − 1` for complete trees.
    pub children_drawn: u64,
    /// Root path of the leftmost visiting particle, z_0 = 0, …, z_k = a.
    pub leftmost_path: Option<Vec<Vec<i64>>>,
    /// Younger siblings of each path vertex z_1..z_k at the first visit.
    pub right_siblings: Option<Vec<u32>>,
    /// Pre-order index (root = 1) of the leftmost visiting particle. A run
    /// with node cap c would have seen the visit iff this is at most c.
    pub first_visit_node: Option<u64>,
    /// g(γ̃) = Σ G(a − z_i); present when visited and a table is attached.
    pub g_of_path: Option<f64>,
    /// 𝒢: g(γ̃) on the visit event, 0 otherwise.
    pub g_var: f64,
    pub truncated: bool,
    /// Expected visits among the unexplored particles, given the explored
    /// prefix; 0 for complete trees.
    pub pending_visits: f64,
}

impl BrwSample {
    pub fn visited(&self) -> bool {
        self.n_visits > 0
    }

    /// N plus the conditional expectation of the truncated remainder.
    pub fn completed_visits(&self) -> f64 {
        self.n_visits as f64 + self.pending_visits
    }
}

struct Frame {
    pos: Coords,
    remaining: u32,
}

/// Expected visits among the unexplored children on the stack. Each such
/// child of a particle at x starts an independent critical subtree whose
/// expected visit count is Σθ(y)G(a−x−y) = G(a−x) − 1{x=a}.
fn pending(cfg: &BrwConfig, stack: &[Frame]) -> f64 {
    stack
        .iter()
        .filter(|f| f.remaining > 0)
        .map(|f| {
            let g = cfg.green_from(&f.pos).unwrap_or(f64::NAN);
            let own = if f.pos == cfg.target { 1.0 } else { 0.0 };
            f.remaining as f64 * (g - own)
        })
        .sum()
}

/// One full realization; traversal continues past the first visit.
pub fn sample_brw<R: Rng + ?Sized>(cfg: &BrwConfig, rng: &mut R) -> BrwSample {
    let d = cfg.dim();
    let target = cfg.target;
    let mut stack: Vec<Frame> = Vec::with_capacity(64);
    let mut n_visits = 0u64;
    let mut children_drawn = 0u64;
    let mut path: Option<Vec<Vec<i64>>> = None;
    let mut right: Option<Vec<u32>> = None;
    let mut first_visit_node = None;

    let mut src = WordSource::new(rng);
    let root = cfg.offspring.sample_from(&mut src);
    children_drawn += root as u64;
    let origin = [0i64; crate::point::MAX_DIM];
    if origin == target {
        n_visits = 1;
        path = Some(vec![vec![0; d]]);
        right = Some(Vec::new());
        first_visit_node = Some(1);
    }
    stack.push(Frame {
        pos: origin,
        remaining: root,
    });
    let mut tree_size = 1u64;
    let mut truncated = false;

    while let Some(top) = stack.last_mut() {
        if top.remaining == 0 {
            stack.pop();
            continue;
        }
        if tree_size >= cfg.node_cap {
            truncated = true;
            break;
        }
        top.remaining -= 1;
        let mut pos = top.pos;
        let y = cfg.step.coords(cfg.step.sample_index_from(&mut src));
        for i in 0..d {
            pos[i] += y[i];
        }
        let k = cfg.offspring.sample_from(&mut src);
        children_drawn += k as u64;
        tree_size += 1;
        if pos == target {
            n_visits += 1;
            if path.is_none() {
                let mut p: Vec<Vec<i64>> = stack.iter().map(|f| f.pos[..d].to_vec()).collect();
                p.push(pos[..d].to_vec());
                path = Some(p);
                right = Some(stack.iter().map(|f| f.remaining).collect());
                first_visit_node = Some(tree_size);
            }
        }
        stack.push(Frame { pos, remaining: k });
    }

    let pending_visits = if truncated { pending(cfg, &stack) } else { 0.0 };
    let g_of_path = path.as_ref().and_then(|p| {
        p.iter()
            .map(|z| cfg.green_from(&to_coords(z)))
            .sum::<Option<f64>>()
    });
    BrwSample {
        n_visits,
        tree_size,
        children_drawn,
        g_var: g_of_path.filter(|_| n_visits > 0).unwrap_or(0.0),
        leftmost_path: path,
        right_siblings: right,
        first_visit_node,
        g_of_path,
        truncated,
        pending_visits,
    }
}

/// Outcome of a run that stops at the first visit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisitOutcome {
    pub visited: bool,
    /// The cap was hit before either a visit or extinction.
    pub truncated: bool,
    /// Particles generated; on a visit, the pre-order index of the leftmost
    /// visiting particle.
    pub nodes: u64,
    /// 𝒢 = g(γ̃) when visited and a Green table is attached, else 0.
    pub g_var: f64,
    /// On truncation, the expected number of visits among the unexplored
    /// particles (NaN without a Green table). Bounds the conditional
    /// probability that the rest of the tree visits.
    pub pending_visits: f64,
}

/// Same tree law and draw order as [`sample_brw`], stopped at the first
/// visit.
pub fn sample_visit<R: Rng + ?Sized>(cfg: &BrwConfig, rng: &mut R) -> VisitOutcome {
    let d = cfg.dim();
    let target = cfg.target;
    let origin = [0i64; crate::point::MAX_DIM];
    let mut src = WordSource::new(rng);
    let root = cfg.offspring.sample_from(&mut src);
    let mut out = VisitOutcome {
        visited: false,
        truncated: false,
        nodes: 1,
        g_var: 0.0,
        pending_visits: 0.0,
    };
    if origin == target {
        out.visited = true;
        out.g_var = cfg.green_from(&origin).unwrap_or(0.0);
        return out;
    }
    let mut stack = vec![Frame {
        pos: origin,
        remaining: root,
    }];
    while let Some(top) = stack.last_mut() {
        if top.remaining == 0 {
            stack.pop();
            continue;
        }
        if out.nodes >= cfg.node_cap {
            out.truncated = true;
            out.pending_visits = pending(cfg, &stack);
            return out;
        }
        top.remaining -= 1;
        let mut pos = top.pos;
        let y = cfg.step.coords(cfg.step.sample_index_from(&mut src));
        for i in 0..d {
            pos[i] += y[i];
        }
        let k = cfg.offspring.sample_from(&mut src);
        out.nodes += 1;
        if pos == target {
            out.visited = true;
            if cfg.green.is_some() {
                out.g_var = stack
                    .iter()
                    .map(|f| cfg.green_from(&f.pos).unwrap_or(0.0))
                    .sum::<f64>()
                    + cfg.green_from(&pos).unwrap_or(0.0);
            }
            return out;
        }
        stack.push(Frame { pos, remaining: k });
    }
    out
}

/// Σ_i G(target − z_i) along a path of vectors.
pub use crate::green::path_g;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::green_quadrature;
    use crate::rng::substream;
    use proptest::prelude::*;

    fn binary() -> OffspringDistribution {
        OffspringDistribution::from_ratios(&[(0, 1, 2), (2, 1, 2)]).unwrap()
    }

    fn srw_cfg(d: usize, target: &[i64], green: bool) -> BrwConfig {
        let step = StepDistribution::simple(d).unwrap();
        let table = green.then(|| Arc::new(green_quadrature(&step, 4, 1e-6).unwrap()));
        BrwConfig::new(binary(), step, target, 1_000_000, table).unwrap()
    }

    #[test]
    fn config_rejects_bad_input() {
        let step = StepDistribution::simple(3).unwrap();
        assert_eq!(
            BrwConfig::new(binary(), step.clone(), &[1, 0], 10, None).unwrap_err(),
            BrwConfigError::TargetDimension { expected: 3, found: 2 }
        );
        assert_eq!(
            BrwConfig::new(binary(), step, &[1, 0, 0], 0, None).unwrap_err(),
            BrwConfigError::ZeroNodeCap
        );
    }

    #[test]
    fn origin_target_is_always_visited() {
        let cfg = srw_cfg(3, &[0, 0, 0], true);
        let g0 = cfg.green().unwrap().value(&[0, 0, 0]);
        let mut rng = substream(7, 0, 0);
        for _ in 0..200 {
            let s = sample_brw(&cfg, &mut rng);
            assert!(s.n_visits >= 1);
            assert_eq!(s.leftmost_path, Some(vec![vec![0, 0, 0]]));
            assert_eq!(s.g_var, g0);
            assert!(sample_visit(&cfg, &mut rng).visited);
        }
    }

    #[test]
    fn samples_are_reproducible() {
        let cfg = srw_cfg(3, &[1, 0, 0], true);
        let a: Vec<BrwSample> = (0..500).scan(substream(1, 2, 3), |r, _| Some(sample_brw(&cfg, r))).collect();
        let b: Vec<BrwSample> = (0..500).scan(substream(1, 2, 3), |r, _| Some(sample_brw(&cfg, r))).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn visit_statistics_are_coherent() {
        let cfg = srw_cfg(3, &[1, 1, 0], true);
        let g0 = cfg.green().unwrap().value(&[0, 0, 0]);
        let mut rng = substream(3, 0, 0);
        for _ in 0..3000 {
            let s = sample_brw(&cfg, &mut rng);
            if !s.truncated {
                assert_eq!(s.children_drawn + 1, s.tree_size);
            }
            assert_eq!(s.visited(), s.leftmost_path.is_some());
            assert_eq!(s.visited(), s.g_var > 0.0);
            if let Some(p) = &s.leftmost_path {
                assert_eq!(p[0], vec![0, 0, 0]);
                assert_eq!(p.last().unwrap(), &vec![1, 1, 0]);
                for w in p.windows(2) {
                    let inc: Vec<i64> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
                    assert!(cfg.step().prob(&inc) > 0.0);
                }
                assert!(s.g_var >= g0);
                assert_eq!(s.g_var, path_g(p, cfg.target(), cfg.green().unwrap()));
                assert_eq!(s.right_siblings.as_ref().unwrap().len(), p.len() - 1);
            }
        }
    }

    #[test]
    fn truncation_adds_expected_remainder() {
        let step = StepDistribution::simple(3).unwrap();
        let table = Arc::new(green_quadrature(&step, 4, 1e-6).unwrap());
        let cfg = BrwConfig::new(binary(), step, &[1, 0, 0], 5, Some(table)).unwrap();
        let mut rng = substream(11, 0, 0);
        let mut seen = false;
        for _ in 0..1000 {
            let s = sample_brw(&cfg, &mut rng);
            assert!(s.tree_size <= 5);
            if s.truncated {
                seen = true;
                assert_eq!(s.tree_size, 5);
                assert!(s.pending_visits > 0.0);
            } else {
                assert_eq!(s.pending_visits, 0.0);
            }
        }
        assert!(seen);
    }

    #[test]
    fn early_stop_agrees_with_full_pass() {
        let cfg = srw_cfg(3, &[1, 1, 0], true);
        for seed in 0..3000 {
            let full = sample_brw(&cfg, &mut substream(seed, 0, 0));
            let early = sample_visit(&cfg, &mut substream(seed, 0, 0));
            assert_eq!(early.visited, full.visited());
            assert_eq!(early.g_var, full.g_var);
            if early.visited {
                assert_eq!(Some(early.nodes), full.first_visit_node);
            } else {
                assert_eq!(early.nodes, full.tree_size);
                assert_eq!(early.truncated, full.truncated);
            }
        }
    }

    // Pre-order materialization drawing in the same order as the streaming
    // sampler: a node's offspring count, then for each child its step and
    // subtree.
    struct Node {
        pos: Vec<i64>,
        children: Vec<Node>,
    }

    fn materialize<R: rand::Rng>(cfg: &BrwConfig, pos: Vec<i64>, rng: &mut WordSource<'_, R>, size: &mut u64) -> Node {
        let k = cfg.offspring().sample_from(rng);
        *size += 1;
        let mut children = Vec::new();
        for _ in 0..k {
            let y = cfg.step().vector(cfg.step().sample_index_from(rng)).to_vec();
            let child: Vec<i64> = pos.iter().zip(&y).map(|(a, b)| a + b).collect();
            children.push(materialize(cfg, child, rng, size));
        }
        Node { pos, children }
    }

    // Labels of all nodes at `target` (child-index words), and their paths.
    fn collect(node: &Node, label: &mut Vec<usize>, path: &mut Vec<Vec<i64>>, target: &[i64], out: &mut Vec<(Vec<usize>, Vec<Vec<i64>>)>) {
        path.push(node.pos.clone());
        if node.pos == target {
            out.push((label.clone(), path.clone()));
        }
        for (i, c) in node.children.iter().enumerate() {
            label.push(i);
            collect(c, label, path, target, out);
            label.pop();
        }
        path.pop();
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn leftmost_path_matches_materialized_tree(seed in any::<u64>(), ax in -2i64..=2, ay in -2i64..=2) {
            let step = StepDistribution::simple(2).unwrap();
            let cfg = BrwConfig::new(binary(), step, &[ax, ay], 100_000, None).unwrap();
            let s = sample_brw(&cfg, &mut substream(seed, 0, 0));
            if s.truncated {
                return Ok(());
            }
            let mut size = 0;
            let mut rng = substream(seed, 0, 0);
            let tree = materialize(&cfg, vec![0, 0], &mut WordSource::new(&mut rng), &mut size);
            prop_assert_eq!(size, s.tree_size);
            let mut hits = Vec::new();
            collect(&tree, &mut Vec::new(), &mut Vec::new(), &[ax, ay], &mut hits);
            prop_assert_eq!(hits.len() as u64, s.n_visits);
            let leftmost = hits.into_iter().min_by(|a, b| a.0.cmp(&b.0)).map(|h| h.1);
            prop_assert_eq!(leftmost, s.leftmost_path);
        }
    }
}
