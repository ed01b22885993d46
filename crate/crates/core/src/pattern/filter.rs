use std::cmp::Ordering;
use std::fmt;

use super::{Binding, Variable};
use crate::rdf::{Literal, Term, XSD, XSD_BOOLEAN, XSD_STRING};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }

    fn holds(self, ord: Ordering) -> bool {
        match self {
            CompareOp::Eq => ord == Ordering::Equal,
            CompareOp::Ne => ord != Ordering::Equal,
            CompareOp::Lt => ord == Ordering::Less,
            CompareOp::Le => ord != Ordering::Greater,
            CompareOp::Gt => ord == Ordering::Greater,
            CompareOp::Ge => ord != Ordering::Less,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Var(Variable),
    Const(Term),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Var(v) => v.fmt(f),
            Operand::Const(t) => t.fmt(f),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum FilterExpr {
    Compare(CompareOp, Operand, Operand),
    And(Box<FilterExpr>, Box<FilterExpr>),
    Or(Box<FilterExpr>, Box<FilterExpr>),
    Not(Box<FilterExpr>),
    StrStarts(Operand, Operand),
    Contains(Operand, Operand),
}

impl fmt::Display for FilterExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterExpr::Compare(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            FilterExpr::And(a, b) => write!(f, "({a} && {b})"),
            FilterExpr::Or(a, b) => write!(f, "({a} || {b})"),
            FilterExpr::Not(a) => write!(f, "!{a}"),
            FilterExpr::StrStarts(a, b) => write!(f, "STRSTARTS({a}, {b})"),
            FilterExpr::Contains(a, b) => write!(f, "CONTAINS({a}, {b})"),
        }
    }
}

/// Evaluation error; coerced to `false` at the top level.
struct EvalError;

type Eval<T> = Result<T, EvalError>;

/// Evaluates `f` under `mu`. Unbound variables and type errors make the filter false.
pub fn eval_filter(f: &FilterExpr, mu: &Binding) -> bool {
    eval(f, mu).unwrap_or(false)
}

fn eval(f: &FilterExpr, mu: &Binding) -> Eval<bool> {
    match f {
        FilterExpr::Compare(op, a, b) => compare(*op, operand(a, mu)?, operand(b, mu)?),
        // SPARQL's three-valued logic: an error on one side can be absorbed.
        FilterExpr::And(a, b) => match (eval(a, mu), eval(b, mu)) {
            (Ok(false), _) | (_, Ok(false)) => Ok(false),
            (Ok(true), Ok(true)) => Ok(true),
            _ => Err(EvalError),
        },
        FilterExpr::Or(a, b) => match (eval(a, mu), eval(b, mu)) {
            (Ok(true), _) | (_, Ok(true)) => Ok(true),
            (Ok(false), Ok(false)) => Ok(false),
            _ => Err(EvalError),
        },
        FilterExpr::Not(a) => eval(a, mu).map(|v| !v),
        FilterExpr::StrStarts(a, b) => {
            let (x, y) = (string_arg(operand(a, mu)?)?, string_arg(operand(b, mu)?)?);
            Ok(x.starts_with(y))
        }
        FilterExpr::Contains(a, b) => {
            let (x, y) = (string_arg(operand(a, mu)?)?, string_arg(operand(b, mu)?)?);
            Ok(x.contains(y))
        }
    }
}

fn operand<'a>(o: &'a Operand, mu: &'a Binding) -> Eval<&'a Term> {
    match o {
        Operand::Const(t) => Ok(t),
        Operand::Var(v) => mu.get(v).ok_or(EvalError),
    }
}

fn string_arg(t: &Term) -> Eval<&str> {
    match t {
        Term::Literal(l) if is_string_like(l) => Ok(l.lexical()),
        _ => Err(EvalError),
    }
}

fn is_string_like(l: &Literal) -> bool {
    l.language().is_some() || matches!(l.datatype(), None | Some(XSD_STRING))
}

const INTEGER_TYPES: &[&str] = &[
    "integer",
    "int",
    "long",
    "short",
    "byte",
    "nonNegativeInteger",
    "nonPositiveInteger",
    "positiveInteger",
    "negativeInteger",
    "unsignedLong",
    "unsignedInt",
    "unsignedShort",
    "unsignedByte",
];

enum Numeric {
    Int(i128),
    Float(f64),
}

fn numeric(l: &Literal) -> Option<Eval<Numeric>> {
    let local = l.datatype()?.strip_prefix(XSD)?;
    let lex = l.lexical().trim();
    if INTEGER_TYPES.contains(&local) {
        Some(lex.parse::<i128>().map(Numeric::Int).map_err(|_| EvalError))
    } else if matches!(local, "decimal" | "double" | "float") {
        Some(lex.parse::<f64>().map(Numeric::Float).map_err(|_| EvalError))
    } else {
        None
    }
}

fn numeric_cmp(a: Numeric, b: Numeric) -> Eval<Ordering> {
    match (a, b) {
        (Numeric::Int(x), Numeric::Int(y)) => Ok(x.cmp(&y)),
        (x, y) => {
            let as_f = |n: Numeric| match n {
                Numeric::Int(i) => i as f64,
                Numeric::Float(f) => f,
            };
            as_f(x).partial_cmp(&as_f(y)).ok_or(EvalError)
        }
    }
}

fn compare(op: CompareOp, a: &Term, b: &Term) -> Eval<bool> {
    if let (Term::Literal(x), Term::Literal(y)) = (a, b) {
        match (numeric(x), numeric(y)) {
            (Some(nx), Some(ny)) => return Ok(op.holds(numeric_cmp(nx?, ny?)?)),
            (None, None) => {}
            // numeric against non-numeric: only (in)equality is meaningful
            _ => {
                return match op {
                    CompareOp::Eq => Ok(false),
                    CompareOp::Ne => Ok(true),
                    _ => Err(EvalError),
                }
            }
        }
        let plain = |l: &Literal| l.language().is_none() && matches!(l.datatype(), None | Some(XSD_STRING));
        if plain(x) && plain(y) {
            return Ok(op.holds(x.lexical().cmp(y.lexical())));
        }
        if x.datatype() == Some(XSD_BOOLEAN) && y.datatype() == Some(XSD_BOOLEAN) {
            let parse = |l: &Literal| match l.lexical() {
                "true" | "1" => Ok(true),
                "false" | "0" => Ok(false),
                _ => Err(EvalError),
            };
            return Ok(op.holds(parse(x)?.cmp(&parse(y)?)));
        }
    }
    match op {
        CompareOp::Eq => Ok(a == b),
        CompareOp::Ne => Ok(a != b),
        _ => Err(EvalError),
    }
}
