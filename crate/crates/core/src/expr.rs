//! Coefficient expressions: a small arithmetic language over `x1..xn`, `r`
//! and `p1..pn`.
//!
//! Source text is parsed by recursive descent into an [`Ast`], then lowered
//! to postfix code so repeated evaluation on grids and samples does not walk
//! the tree.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    /// `x_{i+1}`
    X(usize),
    R,
    /// `p_{i+1}`
    P(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Abs,
    Sqrt,
    Min,
    Max,
}

impl Func {
    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "exp" => Self::Exp,
            "sin" => Self::Sin,
            "cos" => Self::Cos,
            "abs" => Self::Abs,
            "sqrt" => Self::Sqrt,
            "min" => Self::Min,
            "max" => Self::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Exp => "exp",
            Self::Sin => "sin",
            Self::Cos => "cos",
            Self::Abs => "abs",
            Self::Sqrt => "sqrt",
            Self::Min => "min",
            Self::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Self::Min | Self::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Ast {
    Num(f64),
    Var(Var),
    Neg(Box<Ast>),
    Bin(BinOp, Box<Ast>, Box<Ast>),
    Call(Func, Vec<Ast>),
}

impl fmt::Display for Ast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ast::Num(v) => write!(f, "{v:?}"),
            Ast::Var(Var::X(i)) => write!(f, "x{}", i + 1),
            Ast::Var(Var::R) => write!(f, "r"),
            Ast::Var(Var::P(i)) => write!(f, "p{}", i + 1),
            Ast::Neg(a) => write!(f, "(-{a})"),
            Ast::Bin(op, a, b) => {
                let s = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {s} {b})")
            }
            Ast::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Values bound to the variables during evaluation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Env<'a> {
    pub x: &'a [f64],
    pub r: f64,
    pub p: &'a [f64],
}

impl<'a> Env<'a> {
    pub fn at_point(x: &'a [f64]) -> Self {
        Self { x, r: 0.0, p: &[] }
    }

    pub fn at_gradient(p: &'a [f64]) -> Self {
        Self { x: &[], r: 0.0, p }
    }

    fn lookup(&self, v: Var) -> Result<f64> {
        match v {
            Var::X(i) => self.x.get(i).copied().ok_or_else(|| unbound("x", i)),
            Var::R => Ok(self.r),
            Var::P(i) => self.p.get(i).copied().ok_or_else(|| unbound("p", i)),
        }
    }
}

fn unbound(prefix: &str, i: usize) -> Error {
    Error::Eval(format!("variable {prefix}{} is not bound", i + 1))
}

#[derive(Clone, Debug, PartialEq)]
enum Op {
    Push(f64),
    Load(Var),
    Neg,
    Bin(BinOp),
    Call(Func),
}

/// A parsed expression together with its compiled postfix code.
#[derive(Clone, Debug)]
pub struct Expression {
    source: String,
    ast: Ast,
    code: Vec<Op>,
    depth: usize,
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.ast == other.ast
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.ast.fmt(f)
    }
}

impl Expression {
    pub fn from_ast(ast: Ast) -> Self {
        let mut code = Vec::new();
        compile(&ast, &mut code);
        let depth = stack_depth(&code);
        Self {
            source: ast.to_string(),
            ast,
            code,
            depth,
        }
    }

    pub fn ast(&self) -> &Ast {
        &self.ast
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, env: &Env) -> Result<f64> {
        let mut stack: Vec<f64> = Vec::with_capacity(self.depth);
        for op in &self.code {
            match op {
                Op::Push(v) => stack.push(*v),
                Op::Load(v) => stack.push(env.lookup(*v)?),
                Op::Neg => {
                    let a = stack.pop().expect("compiled stack");
                    stack.push(-a);
                }
                Op::Bin(b) => {
                    let rhs = stack.pop().expect("compiled stack");
                    let lhs = stack.pop().expect("compiled stack");
                    stack.push(apply_bin(*b, lhs, rhs)?);
                }
                Op::Call(func) => {
                    let v = if func.arity() == 2 {
                        let b = stack.pop().expect("compiled stack");
                        let a = stack.pop().expect("compiled stack");
                        apply_call(*func, &[a, b])?
                    } else {
                        let a = stack.pop().expect("compiled stack");
                        apply_call(*func, &[a])?
                    };
                    stack.push(v);
                }
            }
        }
        let v = stack.pop().expect("compiled stack");
        if v.is_nan() {
            return Err(Error::Eval(format!("`{}` evaluated to NaN", self.source)));
        }
        Ok(v)
    }

    /// Whether the expression mentions any of `r`, `p_i` or `x_i`.
    pub fn uses(&self, pred: impl Fn(Var) -> bool) -> bool {
        self.code
            .iter()
            .any(|op| matches!(op, Op::Load(v) if pred(*v)))
    }

    pub fn is_constant(&self) -> bool {
        !self.uses(|_| true)
    }

    /// Largest `x` (or `p`) index referenced, 1-based; 0 when unused.
    pub fn max_index(&self, of_x: bool) -> usize {
        self.code
            .iter()
            .filter_map(|op| match op {
                Op::Load(Var::X(i)) if of_x => Some(i + 1),
                Op::Load(Var::P(i)) if !of_x => Some(i + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }
}

pub(crate) fn apply_bin(op: BinOp, a: f64, b: f64) -> Result<f64> {
    Ok(match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b == 0.0 {
                return Err(Error::Eval("division by zero".into()));
            }
            a / b
        }
        BinOp::Pow => a.powf(b),
    })
}

pub(crate) fn apply_call(func: Func, args: &[f64]) -> Result<f64> {
    Ok(match func {
        Func::Exp => args[0].exp(),
        Func::Sin => args[0].sin(),
        Func::Cos => args[0].cos(),
        Func::Abs => args[0].abs(),
        Func::Sqrt => {
            if args[0] < 0.0 {
                return Err(Error::Eval(format!("sqrt of negative value {}", args[0])));
            }
            args[0].sqrt()
        }
        Func::Min => args[0].min(args[1]),
        Func::Max => args[0].max(args[1]),
    })
}

fn compile(ast: &Ast, out: &mut Vec<Op>) {
    match ast {
        Ast::Num(v) => out.push(Op::Push(*v)),
        Ast::Var(v) => out.push(Op::Load(*v)),
        Ast::Neg(a) => {
            compile(a, out);
            out.push(Op::Neg);
        }
        Ast::Bin(op, a, b) => {
            compile(a, out);
            compile(b, out);
            out.push(Op::Bin(*op));
        }
        Ast::Call(f, args) => {
            for a in args {
                compile(a, out);
            }
            out.push(Op::Call(*f));
        }
    }
}

fn stack_depth(code: &[Op]) -> usize {
    let mut d: isize = 0;
    let mut max = 0;
    for op in code {
        d += match op {
            Op::Push(_) | Op::Load(_) => 1,
            Op::Neg => 0,
            Op::Bin(_) => -1,
            Op::Call(f) => 1 - f.arity() as isize,
        };
        max = max.max(d);
    }
    max as usize
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::End => "end of input".into(),
        }
    }
}

struct Lexed {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Lexed>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let start = (line, col);
        if c.is_ascii_digit() || c == '.' {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut k = i + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    i = k;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[begin..i].iter().collect();
            let v: f64 = text.parse().map_err(|_| Error::Syntax {
                line: start.0,
                col: start.1,
                expected: vec!["number".into()],
                found: format!("`{text}`"),
            })?;
            col += i - begin;
            out.push(Lexed {
                tok: Tok::Num(v),
                line: start.0,
                col: start.1,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - begin;
            out.push(Lexed {
                tok: Tok::Ident(chars[begin..i].iter().collect()),
                line: start.0,
                col: start.1,
            });
        } else if "+-*/^(),".contains(c) {
            i += 1;
            col += 1;
            out.push(Lexed {
                tok: Tok::Sym(c),
                line: start.0,
                col: start.1,
            });
        } else {
            return Err(Error::Syntax {
                line,
                col,
                expected: vec!["expression".into()],
                found: format!("`{c}`"),
            });
        }
    }
    out.push(Lexed {
        tok: Tok::End,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Lexed>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> Error {
        let here = &self.toks[self.pos];
        Error::Syntax {
            line: here.line,
            col: here.col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: here.tok.describe(),
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[&format!("`{c}`")]))
        }
    }

    fn expr(&mut self) -> Result<Ast> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Ast::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Ast> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Ast::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Ast> {
        if *self.peek() == Tok::Sym('-') {
            self.bump();
            return Ok(Ast::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    // `^` binds tighter than unary minus and associates to the right
    fn power(&mut self) -> Result<Ast> {
        let base = self.atom()?;
        if *self.peek() == Tok::Sym('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Ast::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Ast> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Ast::Num(v))
            }
            Tok::Sym('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(v) = parse_var(&name) {
                    self.bump();
                    return Ok(Ast::Var(v));
                }
                let at = self.pos;
                self.bump();
                if *self.peek() != Tok::Sym('(') {
                    return Err(self.error(&["`(`"]));
                }
                let Some(func) = Func::from_name(&name) else {
                    self.pos = at;
                    return Err(self.error(&["variable", "function name"]));
                };
                self.bump();
                let mut args = vec![self.expr()?];
                while *self.peek() == Tok::Sym(',') {
                    self.bump();
                    args.push(self.expr()?);
                }
                if args.len() != func.arity() {
                    return Err(Error::Syntax {
                        line: self.toks[at].line,
                        col: self.toks[at].col,
                        expected: vec![format!("{} argument(s) to {}", func.arity(), func.name())],
                        found: format!("{} argument(s)", args.len()),
                    });
                }
                self.expect(')')?;
                Ok(Ast::Call(func, args))
            }
            _ => Err(self.error(&["number", "variable", "function call", "`(`", "`-`"])),
        }
    }
}

fn parse_var(name: &str) -> Option<Var> {
    if name == "r" {
        return Some(Var::R);
    }
    let (head, digits) = name.split_at(1);
    let idx: usize = digits.parse().ok()?;
    if idx == 0 || digits.starts_with('0') {
        return None;
    }
    match head {
        "x" => Some(Var::X(idx - 1)),
        "p" => Some(Var::P(idx - 1)),
        _ => None,
    }
}

/// Parses `src` into a compiled expression.
pub fn parse_expression(src: &str) -> Result<Expression> {
    let mut parser = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    let ast = parser.expr()?;
    if *parser.peek() != Tok::End {
        return Err(parser.error(&["operator", "end of input"]));
    }
    let mut e = Expression::from_ast(ast);
    e.source = src.to_string();
    Ok(e)
}
