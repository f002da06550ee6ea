//! Symbolic expressions stored as prefix-order node lists.
//!
//! The flat layout keeps genetic operators simple: every subtree is a
//! contiguous slice, found by counting arities.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Denominators smaller than this make a division invalid.
pub const DIV_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// Zero-based state index, rendered one-based (`x1`, `x2`, ...).
    Var(usize),
    Const(f64),
    Add,
    Sub,
    Mul,
    Div,
    Square,
    Cube,
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
}

pub const BINARY_OPS: [Node; 4] = [Node::Add, Node::Sub, Node::Mul, Node::Div];
pub const UNARY_OPS: [Node; 7] = [Node::Square, Node::Cube, Node::Sqrt, Node::Exp, Node::Log, Node::Sin, Node::Cos];

impl Node {
    pub fn arity(self) -> usize {
        match self {
            Node::Var(_) | Node::Const(_) => 0,
            Node::Add | Node::Sub | Node::Mul | Node::Div => 2,
            _ => 1,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Node::Var(_) | Node::Const(_) => "",
            Node::Add => "+",
            Node::Sub => "-",
            Node::Mul => "*",
            Node::Div => "/",
            Node::Square => "square",
            Node::Cube => "cube",
            Node::Sqrt => "sqrt",
            Node::Exp => "exp",
            Node::Log => "log",
            Node::Sin => "sin",
            Node::Cos => "cos",
        }
    }

    fn from_symbol(s: &str) -> Option<Node> {
        BINARY_OPS.iter().chain(&UNARY_OPS).copied().find(|n| n.symbol() == s)
    }

    fn unary(self, a: f64) -> f64 {
        match self {
            Node::Square => a * a,
            Node::Cube => a * a * a,
            Node::Sqrt if a >= 0.0 => a.sqrt(),
            Node::Exp => a.exp(),
            Node::Log if a > 0.0 => a.ln(),
            Node::Sin => a.sin(),
            Node::Cos => a.cos(),
            _ => f64::NAN,
        }
    }

    fn binary(self, a: f64, b: f64) -> f64 {
        match self {
            Node::Add => a + b,
            Node::Sub => a - b,
            Node::Mul => a * b,
            Node::Div if b.abs() >= DIV_GUARD => a / b,
            _ => f64::NAN,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unexpected token `{0}`")]
    UnexpectedToken(String),
    #[error("operator `{op}` takes {expected} operands")]
    Arity { op: String, expected: usize },
    #[error("trailing input after expression")]
    Trailing,
}

/// An expression tree in prefix order. Complexity is the node count.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    nodes: Vec<Node>,
}

impl Expression {
    /// Wraps a prefix node list, checking that it forms exactly one tree.
    pub fn from_nodes(nodes: Vec<Node>) -> Option<Self> {
        let mut need = 1usize;
        for (i, n) in nodes.iter().enumerate() {
            if need == 0 {
                return None;
            }
            need = need - 1 + n.arity();
            if need == 0 && i + 1 != nodes.len() {
                return None;
            }
        }
        (need == 0).then_some(Expression { nodes })
    }

    pub fn var(i: usize) -> Self {
        Expression { nodes: vec![Node::Var(i)] }
    }

    pub fn constant(c: f64) -> Self {
        Expression { nodes: vec![Node::Const(c)] }
    }

    pub fn apply_unary(op: Node, a: Expression) -> Self {
        debug_assert_eq!(op.arity(), 1);
        let mut nodes = vec![op];
        nodes.extend(a.nodes);
        Expression { nodes }
    }

    pub fn apply_binary(op: Node, a: Expression, b: Expression) -> Self {
        debug_assert_eq!(op.arity(), 2);
        let mut nodes = Vec::with_capacity(1 + a.nodes.len() + b.nodes.len());
        nodes.push(op);
        nodes.extend(a.nodes);
        nodes.extend(b.nodes);
        Expression { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn complexity(&self) -> usize {
        self.nodes.len()
    }

    /// Highest variable index used, plus one.
    pub fn arity_needed(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Var(i) => Some(i + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Exclusive end of the subtree rooted at `start`.
    pub fn subtree_end(&self, start: usize) -> usize {
        subtree_end(&self.nodes, start)
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> (usize, usize) {
            let mut next = i + 1;
            let mut d = 0;
            for _ in 0..nodes[i].arity() {
                let (cd, cn) = go(nodes, next);
                d = d.max(cd);
                next = cn;
            }
            (d + 1, next)
        }
        go(&self.nodes, 0).0
    }

    /// Replaces the subtree at `start` with `with`.
    pub fn replace_subtree(&self, start: usize, with: &[Node]) -> Expression {
        let end = self.subtree_end(start);
        let mut nodes = Vec::with_capacity(self.nodes.len() - (end - start) + with.len());
        nodes.extend_from_slice(&self.nodes[..start]);
        nodes.extend_from_slice(with);
        nodes.extend_from_slice(&self.nodes[end..]);
        Expression { nodes }
    }

    pub(crate) fn nodes_mut(&mut self) -> &mut [Node] {
        &mut self.nodes
    }

    /// Evaluates at a single point. Invalid operations give NaN.
    pub fn eval_point(&self, x: &[f64]) -> f64 {
        fn go(nodes: &[Node], i: usize, x: &[f64]) -> (f64, usize) {
            match nodes[i] {
                Node::Var(k) => (x.get(k).copied().unwrap_or(f64::NAN), i + 1),
                Node::Const(c) => (c, i + 1),
                op if op.arity() == 1 => {
                    let (a, n) = go(nodes, i + 1, x);
                    (op.unary(a), n)
                }
                op => {
                    let (a, n) = go(nodes, i + 1, x);
                    let (b, n) = go(nodes, n, x);
                    (op.binary(a, b), n)
                }
            }
        }
        go(&self.nodes, 0, x).0
    }

    /// Evaluates over column-major samples: `cols[d][s]` is variable `d` at sample `s`.
    pub fn eval_columns(&self, cols: &[&[f64]]) -> Vec<f64> {
        let n = cols.first().map_or(0, |c| c.len());
        fn go(nodes: &[Node], i: usize, cols: &[&[f64]], n: usize) -> (Vec<f64>, usize) {
            match nodes[i] {
                Node::Var(k) => match cols.get(k) {
                    Some(c) => (c.to_vec(), i + 1),
                    None => (vec![f64::NAN; n], i + 1),
                },
                Node::Const(c) => (vec![c; n], i + 1),
                op if op.arity() == 1 => {
                    let (mut a, next) = go(nodes, i + 1, cols, n);
                    a.iter_mut().for_each(|v| *v = op.unary(*v));
                    (a, next)
                }
                op => {
                    let (mut a, next) = go(nodes, i + 1, cols, n);
                    let (b, next) = go(nodes, next, cols, n);
                    a.iter_mut().zip(&b).for_each(|(v, &w)| *v = op.binary(*v, w));
                    (a, next)
                }
            }
        }
        go(&self.nodes, 0, cols, n).0
    }

    /// Evaluates over row-major `samples × dim` states.
    pub fn eval_rows(&self, rows: &[f64], dim: usize) -> Vec<f64> {
        let steps = rows.len() / dim;
        let cols: Vec<Vec<f64>> = (0..dim).map(|d| (0..steps).map(|s| rows[s * dim + d]).collect()).collect();
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        self.eval_columns(&refs)
    }

    /// Conventional infix rendering, for people.
    pub fn to_infix(&self) -> String {
        fn go(nodes: &[Node], i: usize) -> (String, usize) {
            match nodes[i] {
                Node::Var(k) => (format!("x{}", k + 1), i + 1),
                Node::Const(c) => (if c < 0.0 { format!("({c})") } else { format!("{c}") }, i + 1),
                Node::Square | Node::Cube => {
                    let (a, n) = go(nodes, i + 1);
                    let p = if nodes[i] == Node::Square { 2 } else { 3 };
                    let needs_parens = nodes[i + 1].arity() > 0;
                    (if needs_parens { format!("({a})^{p}") } else { format!("{a}^{p}") }, n)
                }
                op if op.arity() == 1 => {
                    let (a, n) = go(nodes, i + 1);
                    (format!("{}({a})", op.symbol()), n)
                }
                op => {
                    let (a, n) = go(nodes, i + 1);
                    let (b, n) = go(nodes, n);
                    (format!("({a} {} {b})", op.symbol()), n)
                }
            }
        }
        go(&self.nodes, 0).0
    }
}

fn subtree_end(nodes: &[Node], start: usize) -> usize {
    let mut need = 1usize;
    let mut i = start;
    while need > 0 {
        need = need - 1 + nodes[i].arity();
        i += 1;
    }
    i
}

/// Prefix S-expression form: `(+ (square x1) (* 0.5 x2))`. Constants use the
/// shortest decimal that round-trips, so parsing the text restores the tree exactly.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(nodes: &[Node], i: usize, f: &mut fmt::Formatter<'_>) -> Result<usize, fmt::Error> {
            match nodes[i] {
                Node::Var(k) => write!(f, "x{}", k + 1).map(|_| i + 1),
                Node::Const(c) => write!(f, "{c:?}").map(|_| i + 1),
                op => {
                    write!(f, "({}", op.symbol())?;
                    let mut next = i + 1;
                    for _ in 0..op.arity() {
                        write!(f, " ")?;
                        next = go(nodes, next, f)?;
                    }
                    write!(f, ")").map(|_| next)
                }
            }
        }
        go(&self.nodes, 0, f).map(|_| ())
    }
}

impl FromStr for Expression {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        let spaced = s.replace('(', " ( ").replace(')', " ) ");
        let tokens: Vec<&str> = spaced.split_whitespace().collect();
        let mut nodes = Vec::new();
        let mut pos = 0;
        parse_term(&tokens, &mut pos, &mut nodes)?;
        if pos != tokens.len() {
            return Err(ParseError::Trailing);
        }
        Ok(Expression { nodes })
    }
}

fn parse_atom(tok: &str) -> Result<Node, ParseError> {
    if let Some(idx) = tok.strip_prefix('x').and_then(|r| r.parse::<usize>().ok()) {
        if idx >= 1 {
            return Ok(Node::Var(idx - 1));
        }
    }
    tok.parse::<f64>()
        .map(Node::Const)
        .map_err(|_| ParseError::UnexpectedToken(tok.to_string()))
}

fn parse_term(tokens: &[&str], pos: &mut usize, out: &mut Vec<Node>) -> Result<(), ParseError> {
    let tok = *tokens.get(*pos).ok_or(ParseError::UnexpectedEnd)?;
    *pos += 1;
    if tok != "(" {
        if tok == ")" {
            return Err(ParseError::UnexpectedToken(tok.into()));
        }
        out.push(parse_atom(tok)?);
        return Ok(());
    }
    let op_tok = *tokens.get(*pos).ok_or(ParseError::UnexpectedEnd)?;
    *pos += 1;
    let op = Node::from_symbol(op_tok).ok_or_else(|| ParseError::UnexpectedToken(op_tok.into()))?;
    out.push(op);
    let mut count = 0;
    while tokens.get(*pos).is_some_and(|t| *t != ")") {
        parse_term(tokens, pos, out)?;
        count += 1;
    }
    if tokens.get(*pos).is_none() {
        return Err(ParseError::UnexpectedEnd);
    }
    *pos += 1;
    if count != op.arity() {
        return Err(ParseError::Arity { op: op_tok.into(), expected: op.arity() });
    }
    Ok(())
}

impl Serialize for Expression {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Expression {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Builds `Σ w_j · term_j`, skipping weights below `prune·max|w|`.
pub fn linear_combination(weights: &[f64], terms: &[Expression], prune: f64) -> Expression {
    assert_eq!(weights.len(), terms.len());
    let wmax = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let mut acc: Option<Expression> = None;
    for (w, term) in weights.iter().zip(terms) {
        if w.abs() <= prune * wmax || *w == 0.0 {
            continue;
        }
        let scaled = Expression::apply_binary(Node::Mul, Expression::constant(*w), term.clone());
        acc = Some(match acc {
            None => scaled,
            Some(prev) => Expression::apply_binary(Node::Add, prev, scaled),
        });
    }
    acc.unwrap_or_else(|| Expression::constant(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn evaluates_and_prints() {
        let e: Expression = "(+ (square x1) (* -0.5 (log x2)))".parse().unwrap();
        assert_eq!(e.complexity(), 7);
        assert_eq!(e.depth(), 4);
        assert_eq!(e.arity_needed(), 2);
        let v = e.eval_point(&[3.0, std::f64::consts::E]);
        assert!((v - 8.5).abs() < 1e-12);
        assert_eq!(e.to_string(), "(+ (square x1) (* -0.5 (log x2)))");
        assert_eq!(e.to_infix(), "(x1^2 + ((-0.5) * log(x2)))");
        let cols: [&[f64]; 2] = [&[3.0, 1.0], &[std::f64::consts::E, -1.0]];
        let out = e.eval_columns(&cols);
        assert!((out[0] - 8.5).abs() < 1e-12 && out[1].is_nan());
    }

    #[test]
    fn invalid_operations_are_flagged() {
        for text in ["(/ x1 0.0)", "(/ 1.0 1e-13)", "(log -1.0)", "(log 0.0)", "(sqrt -2.0)"] {
            let e: Expression = text.parse().unwrap();
            assert!(e.eval_point(&[1.0]).is_nan(), "{text}");
        }
        let e: Expression = "(exp (exp x1))".parse().unwrap();
        assert!(!e.eval_point(&[10.0]).is_finite());
    }

    #[test]
    fn parse_errors() {
        assert_eq!("(+ x1)".parse::<Expression>(), Err(ParseError::Arity { op: "+".into(), expected: 2 }));
        assert_eq!("(+ x1 x2".parse::<Expression>(), Err(ParseError::UnexpectedEnd));
        assert!(matches!("(foo x1)".parse::<Expression>(), Err(ParseError::UnexpectedToken(_))));
        assert_eq!("x1 x2".parse::<Expression>(), Err(ParseError::Trailing));
        assert!("x0".parse::<Expression>().is_err());
    }

    #[test]
    fn subtree_surgery() {
        let e: Expression = "(* (+ x1 2.0) (sin x2))".parse().unwrap();
        assert_eq!(e.subtree_end(1), 4);
        assert_eq!(e.subtree_end(4), 6);
        let r = e.replace_subtree(1, &[Node::Var(2)]);
        assert_eq!(r.to_string(), "(* x3 (sin x2))");
        assert!(Expression::from_nodes(vec![Node::Add, Node::Var(0)]).is_none());
        assert!(Expression::from_nodes(vec![Node::Var(0), Node::Var(1)]).is_none());
    }

    #[test]
    fn linear_combination_prunes_tiny_weights() {
        let terms = [Expression::var(0), Expression::var(1), Expression::var(2)];
        let e = linear_combination(&[2.0, 1e-9, -1.0], &terms, 1e-6);
        assert_eq!(e.to_string(), "(+ (* 2.0 x1) (* -1.0 x3))");
    }

    fn arb_expr() -> impl Strategy<Value = Expression> {
        let leaf = prop_oneof![
            (0usize..4).prop_map(Expression::var),
            any::<f64>().prop_filter("finite", |c| c.is_finite()).prop_map(Expression::constant),
        ];
        leaf.prop_recursive(5, 40, 2, |inner| {
            prop_oneof![
                (0usize..7, inner.clone()).prop_map(|(k, a)| Expression::apply_unary(UNARY_OPS[k], a)),
                (0usize..4, inner.clone(), inner).prop_map(|(k, a, b)| Expression::apply_binary(BINARY_OPS[k], a, b)),
            ]
        })
    }

    proptest! {
        #[test]
        fn text_round_trip_is_exact(e in arb_expr()) {
            let back: Expression = e.to_string().parse().unwrap();
            prop_assert_eq!(&back, &e);
            let json = serde_json::to_string(&e).unwrap();
            prop_assert_eq!(serde_json::from_str::<Expression>(&json).unwrap(), e);
        }

        #[test]
        fn column_and_point_evaluation_agree(e in arb_expr(), x in proptest::collection::vec(-3.0f64..3.0, 4)) {
            let cols: Vec<&[f64]> = x.iter().map(std::slice::from_ref).collect();
            let a = e.eval_columns(&cols)[0];
            let b = e.eval_point(&x);
            prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }
}
