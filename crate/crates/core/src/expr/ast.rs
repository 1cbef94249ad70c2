use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Tanh,
}

impl UnaryOp {
    /// Looks up a callable function by name. `Neg` is not callable.
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "sqrt" => UnaryOp::Sqrt,
            "tanh" => UnaryOp::Tanh,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "neg",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Tanh => "tanh",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Literal(f64),
    Constant(String),
    X,
    U,
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
}

impl Node {
    pub fn unary(op: UnaryOp, arg: Node) -> Node {
        Node::Unary(op, Box::new(arg))
    }

    pub fn binary(op: BinaryOp, lhs: Node, rhs: Node) -> Node {
        Node::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// True when the subtree mentions neither `x` nor `u`.
    pub fn is_state_free(&self) -> bool {
        match self {
            Node::Literal(_) | Node::Constant(_) => true,
            Node::X | Node::U => false,
            Node::Unary(_, a) => a.is_state_free(),
            Node::Binary(_, a, b) => a.is_state_free() && b.is_state_free(),
        }
    }

    fn collect_constants<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Node::Constant(name) => {
                out.insert(name);
            }
            Node::Unary(_, a) => a.collect_constants(out),
            Node::Binary(_, a, b) => {
                a.collect_constants(out);
                b.collect_constants(out);
            }
            _ => {}
        }
    }

    /// Prefix form, e.g. `(+ (^ u 2) (^ x 2))`.
    pub fn to_sexpr(&self) -> String {
        match self {
            Node::Literal(v) => format!("{v}"),
            Node::Constant(name) => name.clone(),
            Node::X => "x".into(),
            Node::U => "u".into(),
            Node::Unary(op, a) => format!("({} {})", op.name(), a.to_sexpr()),
            Node::Binary(op, a, b) => format!("({} {} {})", op.symbol(), a.to_sexpr(), b.to_sexpr()),
        }
    }
}

/// Fully parenthesised infix. Re-parsing the output yields the same tree.
impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Literal(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => {
                write!(f, "(0 - {})", -v)
            }
            Node::Literal(v) => write!(f, "{v}"),
            Node::Constant(name) => f.write_str(name),
            Node::X => f.write_str("x"),
            Node::U => f.write_str("u"),
            Node::Unary(UnaryOp::Neg, a) => write!(f, "(-{a})"),
            Node::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Node::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

/// A parsed integrand. Immutable and cheap to clone.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Arc<Node>,
}

impl Expression {
    pub fn new(root: Node) -> Self {
        Expression { root: Arc::new(root) }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Names of every named constant referenced by the tree, sorted.
    pub fn constant_names(&self) -> Vec<String> {
        let mut names = BTreeSet::new();
        self.root.collect_constants(&mut names);
        names.into_iter().map(str::to_owned).collect()
    }

    pub fn to_sexpr(&self) -> String {
        self.root.to_sexpr()
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}
