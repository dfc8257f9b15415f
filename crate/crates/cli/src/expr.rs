//! Arithmetic expressions in one variable `t`.
//!
//! Grammar: numbers, `t`, `pi`, `e`, `+ - * /`, `^` (right associative,
//! binding tighter than unary minus), parentheses and the functions
//! `exp log sqrt sin cos`.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var,
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at position {}", self.message, self.position + 1)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(s: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let b = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < b.len() && ((b[i] as char).is_ascii_digit() || b[i] == b'.') {
                i += 1;
            }
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                let mut j = i + 1;
                if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                    j += 1;
                }
                if j < b.len() && b[j].is_ascii_digit() {
                    i = j;
                    while i < b.len() && b[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &s[start..i];
            let v = text.parse::<f64>().map_err(|_| ParseError {
                position: start,
                message: format!("malformed number '{text}'"),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(s[start..i].to_string())));
        } else if c == '*' && b.get(i + 1) == Some(&b'*') {
            out.push((i, Tok::Sym('^')));
            i += 2;
        } else if "+-*/^(),".contains(c) {
            out.push((i, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(ParseError {
                position: i,
                message: format!("unexpected character '{c}'"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn at(&self) -> usize {
        self.toks.get(self.pos).map_or(self.len, |(p, _)| *p)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            position: self.at(),
            message: message.into(),
        })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = if self.eat('+') {
                Op::Add
            } else if self.eat('-') {
                Op::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.product()?));
        }
    }

    fn product(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                Op::Mul
            } else if self.eat('/') {
                Op::Div
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of expression");
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Tok::Sym('(') => {
                self.pos += 1;
                let inner = self.sum()?;
                if !self.eat(')') {
                    return self.err("expected ')'");
                }
                Ok(inner)
            }
            Tok::Ident(name) => {
                let start = self.at();
                self.pos += 1;
                match name.as_str() {
                    "t" => return Ok(Node::Var),
                    "pi" => return Ok(Node::Num(std::f64::consts::PI)),
                    "e" => return Ok(Node::Num(std::f64::consts::E)),
                    _ => {}
                }
                let func = match name.as_str() {
                    "exp" => Func::Exp,
                    "log" | "ln" => Func::Log,
                    "sqrt" => Func::Sqrt,
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    _ => {
                        return Err(ParseError {
                            position: start,
                            message: format!("unknown name '{name}'"),
                        })
                    }
                };
                if !self.eat('(') {
                    return self.err(format!("expected '(' after {name}"));
                }
                let arg = self.sum()?;
                if !self.eat(')') {
                    return self.err("expected ')'");
                }
                Ok(Node::Call(func, Box::new(arg)))
            }
            Tok::Sym(c) => self.err(format!("unexpected '{c}'")),
        }
    }
}

fn eval(n: &Node, t: f64) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Var => t,
        Node::Neg(a) => -eval(a, t),
        Node::Bin(op, a, b) => {
            let (x, y) = (eval(a, t), eval(b, t));
            match op {
                Op::Add => x + y,
                Op::Sub => x - y,
                Op::Mul => x * y,
                Op::Div => x / y,
                Op::Pow => x.powf(y),
            }
        }
        Node::Call(f, a) => {
            let x = eval(a, t);
            match f {
                Func::Exp => x.exp(),
                Func::Log => x.ln(),
                Func::Sqrt => x.sqrt(),
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
            }
        }
    }
}

fn uses_var(n: &Node) -> bool {
    match n {
        Node::Num(_) => false,
        Node::Var => true,
        Node::Neg(a) | Node::Call(_, a) => uses_var(a),
        Node::Bin(_, a, b) => uses_var(a) || uses_var(b),
    }
}

impl Expr {
    pub fn parse(s: &str) -> Result<Self, ParseError> {
        let toks = tokenize(s)?;
        let mut p = Parser { toks, pos: 0, len: s.len() };
        let root = p.sum()?;
        if p.pos != p.toks.len() {
            return p.err("unexpected trailing input");
        }
        Ok(Self { root, source: s.trim().to_string() })
    }

    pub fn eval(&self, t: f64) -> f64 {
        eval(&self.root, t)
    }

    pub fn is_constant(&self) -> bool {
        !uses_var(&self.root)
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

/// A constant expression such as `log(2)`.
pub fn constant(s: &str) -> Result<f64, ParseError> {
    let e = Expr::parse(s)?;
    if !e.is_constant() {
        return Err(ParseError {
            position: 0,
            message: "expected a constant, found a function of t".into(),
        });
    }
    Ok(e.eval(0.0))
}
