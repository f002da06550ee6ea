//! Tree-based genetic-programming symbolic regression.
//!
//! Fitness uses linearly scaled error: each expression `e` is scored by the best
//! affine fit `a + b·e` to the targets, so search concentrates on shape rather
//! than on matching arbitrary offsets and scales. Reported expressions carry
//! that affine map folded in, so they predict the targets directly.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::expr::{Expression, Node, BINARY_OPS, UNARY_OPS};
use super::{ExtractError, PhiSamples};
use crate::rng::{self, label, StreamRng};

pub const MIN_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    pub population: usize,
    pub iterations: usize,
    /// Generations evolved per iteration.
    pub cycles_per_iteration: usize,
    pub tournament: usize,
    pub p_crossover: f64,
    pub p_subtree: f64,
    pub p_point: f64,
    pub max_depth: usize,
    pub init_max_depth: usize,
    pub const_range: f64,
    pub parsimony: f64,
    pub immigrants: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            population: 15,
            iterations: 50,
            cycles_per_iteration: 20,
            tournament: 3,
            p_crossover: 0.7,
            p_subtree: 0.2,
            p_point: 0.1,
            max_depth: 8,
            init_max_depth: 4,
            const_range: 2.0,
            parsimony: 0.001,
            immigrants: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HallEntry {
    /// Affine-folded expression predicting the targets.
    pub expression: Expression,
    /// Node count of `expression`.
    pub complexity: usize,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpResult {
    /// Best expression found at each complexity, ascending.
    pub hall_of_fame: Vec<HallEntry>,
    /// Entries strictly better in error than every simpler entry.
    pub pareto: Vec<HallEntry>,
}

#[derive(Clone)]
struct Scored {
    expr: Expression,
    /// `expr` with its affine rescaling folded in.
    folded: Expression,
    mse: f64,
    fitness: f64,
}

/// Best affine fit of `pred` to `target`: returns (mse, a, b).
///
/// A fit within rounding of the identity map snaps to it, so an exact hit
/// is reported without a spurious `0 + 1·e` wrapper.
fn scaled_error(pred: &[f64], target: &[f64]) -> Option<(f64, f64, f64)> {
    if pred.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mt = target.iter().sum::<f64>() / n;
    let (mut spp, mut spt, mut stt) = (0.0, 0.0, 0.0);
    for (p, t) in pred.iter().zip(target) {
        spp += (p - mp) * (p - mp);
        spt += (p - mp) * (t - mt);
        stt += (t - mt) * (t - mt);
    }
    let mut b = if spp > 1e-300 { spt / spp } else { 0.0 };
    // A slope whose whole effect is below rounding is just noise.
    if (b * (spp / n).sqrt()).abs() <= 1e-12 * mt.abs().max(1e-300) {
        b = 0.0;
    }
    let a = mt - b * mp;
    let mse_of = |a: f64, b: f64| pred.iter().zip(target).map(|(p, t)| (t - a - b * p).powi(2)).sum::<f64>() / n;
    let mse = mse_of(a, b);
    if !mse.is_finite() {
        return None;
    }
    let slack = 1e-12 * (stt / n + mt * mt) + 1e-300;
    for (sa, sb) in [(0.0, 1.0), (a, 1.0), (0.0, b)] {
        if (sa, sb) != (a, b) && (sb - b).abs() <= 1e-9 * b.abs().max(1.0) && (sa - a).abs() <= 1e-9 * mt.abs().max(1.0) {
            let snapped = mse_of(sa, sb);
            if snapped <= mse + slack {
                return Some((snapped, sa, sb));
            }
        }
    }
    Some((mse, a, b))
}

fn score(expr: Expression, cols: &[&[f64]], target: &[f64], parsimony: f64) -> Scored {
    let pred = expr.eval_columns(cols);
    match scaled_error(&pred, target) {
        Some((mse, a, b)) => {
            // Complexity counts the rescaling constants, as in the reported form.
            let folded = fold_affine(&expr, a, b);
            let fitness = mse * (1.0 + parsimony * folded.complexity() as f64);
            Scored { expr, folded, mse, fitness }
        }
        None => Scored { folded: expr.clone(), expr, mse: f64::INFINITY, fitness: f64::INFINITY },
    }
}

fn fold_affine(expr: &Expression, a: f64, b: f64) -> Expression {
    if b == 0.0 {
        return Expression::constant(a);
    }
    let scaled = if b == 1.0 {
        expr.clone()
    } else {
        Expression::apply_binary(Node::Mul, Expression::constant(b), expr.clone())
    };
    if a == 0.0 {
        scaled
    } else {
        Expression::apply_binary(Node::Add, Expression::constant(a), scaled)
    }
}

struct Breeder<'a> {
    cfg: &'a GpConfig,
    n_vars: usize,
    rng: StreamRng,
}

impl Breeder<'_> {
    fn terminal(&mut self) -> Node {
        if self.rng.gen_bool(0.6) {
            Node::Var(self.rng.gen_range(0..self.n_vars))
        } else {
            Node::Const(self.rng.gen_range(-self.cfg.const_range..=self.cfg.const_range))
        }
    }

    fn operator(&mut self) -> Node {
        let k = self.rng.gen_range(0..BINARY_OPS.len() + UNARY_OPS.len());
        if k < BINARY_OPS.len() {
            BINARY_OPS[k]
        } else {
            UNARY_OPS[k - BINARY_OPS.len()]
        }
    }

    /// Random tree of depth at most `depth`; `full` forces operators until the limit.
    fn tree(&mut self, depth: usize, full: bool, out: &mut Vec<Node>) {
        if depth <= 1 || (!full && self.rng.gen_bool(0.3)) {
            out.push(self.terminal());
            return;
        }
        let op = self.operator();
        out.push(op);
        for _ in 0..op.arity() {
            self.tree(depth - 1, full, out);
        }
    }

    fn random_expr(&mut self, depth: usize, full: bool) -> Expression {
        let mut nodes = Vec::new();
        self.tree(depth, full, &mut nodes);
        Expression::from_nodes(nodes).expect("generator builds whole trees")
    }

    fn tournament<'p>(&mut self, pop: &'p [Scored]) -> &'p Scored {
        let mut best = &pop[self.rng.gen_range(0..pop.len())];
        for _ in 1..self.cfg.tournament {
            let c = &pop[self.rng.gen_range(0..pop.len())];
            if c.fitness < best.fitness {
                best = c;
            }
        }
        best
    }

    fn crossover(&mut self, a: &Expression, b: &Expression) -> Expression {
        let i = self.rng.gen_range(0..a.complexity());
        let j = self.rng.gen_range(0..b.complexity());
        let donor = &b.nodes()[j..b.subtree_end(j)];
        a.replace_subtree(i, donor)
    }

    fn subtree_mutation(&mut self, a: &Expression) -> Expression {
        let i = self.rng.gen_range(0..a.complexity());
        let fresh = self.random_expr(3, false);
        a.replace_subtree(i, fresh.nodes())
    }

    fn point_mutation(&mut self, a: &Expression) -> Expression {
        let mut out = a.clone();
        let i = self.rng.gen_range(0..a.complexity());
        let node = out.nodes()[i];
        let replacement = match node {
            Node::Const(c) if self.rng.gen_bool(0.5) => {
                Node::Const(c + 0.1 * self.cfg.const_range * self.rng.gen_range(-1.0..=1.0))
            }
            Node::Var(_) | Node::Const(_) => self.terminal(),
            op if op.arity() == 1 => UNARY_OPS[self.rng.gen_range(0..UNARY_OPS.len())],
            _ => BINARY_OPS[self.rng.gen_range(0..BINARY_OPS.len())],
        };
        out.nodes_mut()[i] = replacement;
        out
    }

    fn offspring(&mut self, pop: &[Scored]) -> Expression {
        let u: f64 = self.rng.gen();
        let parent = self.tournament(pop).expr.clone();
        let child = if u < self.cfg.p_crossover {
            let other = self.tournament(pop).expr.clone();
            self.crossover(&parent, &other)
        } else if u < self.cfg.p_crossover + self.cfg.p_subtree {
            self.subtree_mutation(&parent)
        } else {
            self.point_mutation(&parent)
        };
        if child.depth() > self.cfg.max_depth {
            parent
        } else {
            child
        }
    }
}

/// Evolves expressions approximating `samples.values` from the sample states.
///
/// Children are built sequentially from one seeded stream and scored in
/// parallel, so results do not depend on the worker count.
pub fn gp_symreg(samples: &PhiSamples, cfg: &GpConfig, seed: u64) -> Result<GpResult, ExtractError> {
    if samples.len() < MIN_SAMPLES {
        return Err(ExtractError::TooFewSamples { min: MIN_SAMPLES, got: samples.len() });
    }
    let cols = samples.column_refs();
    let target = &samples.values;
    let mut br = Breeder { cfg, n_vars: samples.dim.max(1), rng: rng::stream(seed, &[label::GP]) };
    let pop_size = cfg.population.max(2);

    // The constant model is always in the running, so the simplest entry of
    // the hall of fame is the target's mean.
    let initial: Vec<Expression> = std::iter::once(Expression::constant(0.0))
        .chain((1..pop_size).map(|i| {
            let depth = 2 + i % cfg.init_max_depth.saturating_sub(1).max(1);
            br.random_expr(depth, i % 2 == 0)
        }))
        .collect();
    let mut pop: Vec<Scored> =
        initial.into_par_iter().map(|e| score(e, &cols, target, cfg.parsimony)).collect();

    let mut hall: BTreeMap<usize, Scored> = BTreeMap::new();
    let record = |hall: &mut BTreeMap<usize, Scored>, s: &Scored| {
        if !s.mse.is_finite() {
            return;
        }
        let k = s.folded.complexity();
        if hall.get(&k).map_or(true, |h| s.mse < h.mse) {
            hall.insert(k, s.clone());
        }
    };
    pop.iter().for_each(|s| record(&mut hall, s));

    let generations = cfg.iterations * cfg.cycles_per_iteration;
    for _ in 0..generations {
        let elite = pop
            .iter()
            .min_by(|a, b| a.fitness.total_cmp(&b.fitness))
            .expect("nonempty population")
            .clone();
        let n_children = pop_size.saturating_sub(1 + cfg.immigrants);
        let mut fresh: Vec<Expression> = (0..n_children).map(|_| br.offspring(&pop)).collect();
        for _ in 0..cfg.immigrants.min(pop_size - 1) {
            let depth = br.rng.gen_range(2..=cfg.init_max_depth.max(2));
            fresh.push(br.random_expr(depth, false));
        }
        let scored: Vec<Scored> = fresh.into_par_iter().map(|e| score(e, &cols, target, cfg.parsimony)).collect();
        scored.iter().for_each(|s| record(&mut hall, s));
        pop = std::iter::once(elite).chain(scored).collect();
    }

    let entry = |s: &Scored| HallEntry { expression: s.folded.clone(), complexity: s.folded.complexity(), mse: s.mse };
    let hall_of_fame: Vec<HallEntry> = hall.values().map(entry).collect();
    let mut pareto = Vec::new();
    let mut best = f64::INFINITY;
    for h in &hall_of_fame {
        if h.mse < best {
            best = h.mse;
            pareto.push(h.clone());
        }
    }
    Ok(GpResult { hall_of_fame, pareto })
}
