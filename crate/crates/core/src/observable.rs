//! Smooth local observables as expression trees.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := unary ('*' unary)*
//! unary  := '-' unary | factor
//! factor := primary ('^' integer)*
//! primary:= number | symbol '(' coords ')' | func '(' expr ')' | '(' expr ')'
//! func   := cos | sin | exp
//! symbol := sx | sy | sz          (sphere2)
//!         | q | p                 (torus2)
//! coords := integer (',' integer)*
//! ```
//!
//! The grammar is closed under differentiation, so gradients are exact
//! (forward-mode accumulation, no numeric differencing). The support of an
//! observable is exactly the set of sites whose symbols occur in the tree;
//! evaluation reads the configuration only at those sites.

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::lattice::{SiteIndex, SiteSet};
use crate::manifold::ManifoldKind;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CoordSym {
    Sx,
    Sy,
    Sz,
    Q,
    P,
}

impl CoordSym {
    pub fn kind(&self) -> ManifoldKind {
        match self {
            CoordSym::Sx | CoordSym::Sy | CoordSym::Sz => ManifoldKind::Sphere2,
            CoordSym::Q | CoordSym::P => ManifoldKind::Torus2,
        }
    }

    /// Index into the per-site gradient slots: sphere (sx,sy,sz) -> (0,1,2),
    /// torus (q,p) -> (0,1).
    pub fn slot(&self) -> usize {
        match self {
            CoordSym::Sx | CoordSym::Q => 0,
            CoordSym::Sy | CoordSym::P => 1,
            CoordSym::Sz => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CoordSym::Sx => "sx",
            CoordSym::Sy => "sy",
            CoordSym::Sz => "sz",
            CoordSym::Q => "q",
            CoordSym::P => "p",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    /// Non-negative literal; negative constants are spelled Neg(Const).
    Const(f64),
    Coord { sym: CoordSym, site: SiteIndex },
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
    Cos(Box<Expr>),
    Sin(Box<Expr>),
    Exp(Box<Expr>),
}

/// A parsed observable with cached support.
#[derive(Clone, Debug)]
pub struct Observable {
    expr: Expr,
    support: SiteSet,
    kind: ManifoldKind,
}

impl PartialEq for Observable {
    fn eq(&self, other: &Self) -> bool {
        self.expr == other.expr && self.kind == other.kind
    }
}

impl Observable {
    pub fn parse(text: &str, kind: ManifoldKind) -> Result<Self> {
        let tokens = lex(text)?;
        let mut p = Parser {
            tokens: &tokens,
            pos: 0,
            kind,
        };
        let expr = p.parse_expr()?;
        p.expect_end()?;
        Ok(Observable::from_expr(expr, kind))
    }

    pub fn from_expr(expr: Expr, kind: ManifoldKind) -> Self {
        let mut support = SiteSet::new();
        collect_support(&expr, &mut support);
        Observable {
            expr,
            support,
            kind,
        }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    /// Exactly the sites whose symbols occur in the tree.
    pub fn support(&self) -> &SiteSet {
        &self.support
    }

    /// Lattice dimension of the support sites; 0 for constants.
    pub fn dim(&self) -> usize {
        self.support.iter().next().map(|s| s.dim()).unwrap_or(0)
    }

    pub fn evaluate(&self, config: &Configuration) -> Result<f64> {
        eval_node(&self.expr, config)
    }

    /// Ambient gradient at one site: sphere -> (d/dsx, d/dsy, d/dsz),
    /// torus -> (d/dq, d/dp, 0). A site outside the support yields the zero
    /// vector.
    pub fn grad_site(&self, config: &Configuration, site: SiteIndex) -> Result<[f64; 3]> {
        if !self.support.contains(&site) {
            return Ok([0.0; 3]);
        }
        Ok(eval_dual(&self.expr, config, site)?.d)
    }

    /// Exact partial derivative with respect to one site coordinate, as a
    /// new expression tree. The grammar is closed under differentiation.
    pub fn differentiate(&self, sym: CoordSym, site: SiteIndex) -> Observable {
        Observable::from_expr(diff_node(&self.expr, sym, site), self.kind)
    }

    /// The observable with every site index shifted by `shift`.
    pub fn translate(&self, shift: SiteIndex) -> Observable {
        fn walk(e: &Expr, shift: SiteIndex) -> Expr {
            match e {
                Expr::Const(c) => Expr::Const(*c),
                Expr::Coord { sym, site } => Expr::Coord {
                    sym: *sym,
                    site: site.offset_by(shift),
                },
                Expr::Add(a, b) => Expr::Add(walk(a, shift).into(), walk(b, shift).into()),
                Expr::Sub(a, b) => Expr::Sub(walk(a, shift).into(), walk(b, shift).into()),
                Expr::Mul(a, b) => Expr::Mul(walk(a, shift).into(), walk(b, shift).into()),
                Expr::Neg(a) => Expr::Neg(walk(a, shift).into()),
                Expr::Pow(a, n) => Expr::Pow(walk(a, shift).into(), *n),
                Expr::Cos(a) => Expr::Cos(walk(a, shift).into()),
                Expr::Sin(a) => Expr::Sin(walk(a, shift).into()),
                Expr::Exp(a) => Expr::Exp(walk(a, shift).into()),
            }
        }
        Observable::from_expr(walk(&self.expr, shift), self.kind)
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, &self.expr, 0)
    }
}

fn collect_support(e: &Expr, out: &mut SiteSet) {
    match e {
        Expr::Const(_) => {}
        Expr::Coord { site, .. } => {
            out.insert(*site);
        }
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
            collect_support(a, out);
            collect_support(b, out);
        }
        Expr::Neg(a) | Expr::Pow(a, _) | Expr::Cos(a) | Expr::Sin(a) | Expr::Exp(a) => {
            collect_support(a, out)
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

fn eval_node(e: &Expr, cfg: &Configuration) -> Result<f64> {
    Ok(match e {
        Expr::Const(c) => *c,
        Expr::Coord { sym, site } => cfg.coord(*site, *sym)?,
        Expr::Add(a, b) => eval_node(a, cfg)? + eval_node(b, cfg)?,
        Expr::Sub(a, b) => eval_node(a, cfg)? - eval_node(b, cfg)?,
        Expr::Mul(a, b) => eval_node(a, cfg)? * eval_node(b, cfg)?,
        Expr::Neg(a) => -eval_node(a, cfg)?,
        Expr::Pow(a, n) => eval_node(a, cfg)?.powi(*n as i32),
        Expr::Cos(a) => eval_node(a, cfg)?.cos(),
        Expr::Sin(a) => eval_node(a, cfg)?.sin(),
        Expr::Exp(a) => eval_node(a, cfg)?.exp(),
    })
}

/// Forward-mode dual number carrying partials with respect to the (up to
/// three) coordinates of a single site.
#[derive(Clone, Copy)]
struct Dual {
    v: f64,
    d: [f64; 3],
}

impl Dual {
    fn constant(v: f64) -> Self {
        Dual { v, d: [0.0; 3] }
    }
}

fn eval_dual(e: &Expr, cfg: &Configuration, site: SiteIndex) -> Result<Dual> {
    Ok(match e {
        Expr::Const(c) => Dual::constant(*c),
        Expr::Coord { sym, site: s } => {
            let v = cfg.coord(*s, *sym)?;
            let mut d = [0.0; 3];
            if *s == site {
                d[sym.slot()] = 1.0;
            }
            Dual { v, d }
        }
        Expr::Add(a, b) => {
            let (a, b) = (eval_dual(a, cfg, site)?, eval_dual(b, cfg, site)?);
            Dual {
                v: a.v + b.v,
                d: [a.d[0] + b.d[0], a.d[1] + b.d[1], a.d[2] + b.d[2]],
            }
        }
        Expr::Sub(a, b) => {
            let (a, b) = (eval_dual(a, cfg, site)?, eval_dual(b, cfg, site)?);
            Dual {
                v: a.v - b.v,
                d: [a.d[0] - b.d[0], a.d[1] - b.d[1], a.d[2] - b.d[2]],
            }
        }
        Expr::Mul(a, b) => {
            let (a, b) = (eval_dual(a, cfg, site)?, eval_dual(b, cfg, site)?);
            Dual {
                v: a.v * b.v,
                d: [
                    a.v * b.d[0] + b.v * a.d[0],
                    a.v * b.d[1] + b.v * a.d[1],
                    a.v * b.d[2] + b.v * a.d[2],
                ],
            }
        }
        Expr::Neg(a) => {
            let a = eval_dual(a, cfg, site)?;
            Dual {
                v: -a.v,
                d: [-a.d[0], -a.d[1], -a.d[2]],
            }
        }
        Expr::Pow(a, n) => {
            let a = eval_dual(a, cfg, site)?;
            if *n == 0 {
                Dual::constant(1.0)
            } else {
                let f = n.wrapping_sub(1);
                let base = a.v.powi(f as i32);
                let coeff = *n as f64 * base;
                Dual {
                    v: base * a.v,
                    d: [coeff * a.d[0], coeff * a.d[1], coeff * a.d[2]],
                }
            }
        }
        Expr::Cos(a) => {
            let a = eval_dual(a, cfg, site)?;
            let s = -a.v.sin();
            Dual {
                v: a.v.cos(),
                d: [s * a.d[0], s * a.d[1], s * a.d[2]],
            }
        }
        Expr::Sin(a) => {
            let a = eval_dual(a, cfg, site)?;
            let c = a.v.cos();
            Dual {
                v: a.v.sin(),
                d: [c * a.d[0], c * a.d[1], c * a.d[2]],
            }
        }
        Expr::Exp(a) => {
            let a = eval_dual(a, cfg, site)?;
            let e = a.v.exp();
            Dual {
                v: e,
                d: [e * a.d[0], e * a.d[1], e * a.d[2]],
            }
        }
    })
}

// ---------------------------------------------------------------------------
// Poisson brackets
// ---------------------------------------------------------------------------

/// Single-site Poisson bracket contribution at `site`.
///
/// Sphere: s . (grad_i f x grad_i g) with ambient gradients; the triple
/// product projects out any radial extension ambiguity. Torus:
/// df/dq dg/dp - df/dp dg/dq.
pub fn site_bracket(
    f: &Observable,
    g: &Observable,
    config: &Configuration,
    site: SiteIndex,
) -> Result<f64> {
    if !f.support().contains(&site) || !g.support().contains(&site) {
        return Ok(0.0);
    }
    let gf = f.grad_site(config, site)?;
    let gg = g.grad_site(config, site)?;
    match config.get(site)? {
        crate::manifold::SitePoint::Sphere(s) => {
            let cross = [
                gf[1] * gg[2] - gf[2] * gg[1],
                gf[2] * gg[0] - gf[0] * gg[2],
                gf[0] * gg[1] - gf[1] * gg[0],
            ];
            Ok(s[0] * cross[0] + s[1] * cross[1] + s[2] * cross[2])
        }
        crate::manifold::SitePoint::Torus { .. } => Ok(gf[0] * gg[1] - gf[1] * gg[0]),
    }
}

// Smart constructors with constant folding keep derivative trees small.
fn fold_add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), _) if *x == 0.0 => b,
        (_, Expr::Const(y)) if *y == 0.0 => a,
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        _ => Expr::Add(a.into(), b.into()),
    }
}

fn fold_sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (_, Expr::Const(y)) if *y == 0.0 => a,
        (Expr::Const(x), _) if *x == 0.0 => Expr::Neg(b.into()),
        _ => Expr::Sub(a.into(), b.into()),
    }
}

fn fold_mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), _) if *x == 0.0 => Expr::Const(0.0),
        (_, Expr::Const(y)) if *y == 0.0 => Expr::Const(0.0),
        (Expr::Const(x), _) if *x == 1.0 => b,
        (_, Expr::Const(y)) if *y == 1.0 => a,
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        _ => Expr::Mul(a.into(), b.into()),
    }
}

fn fold_neg(a: Expr) -> Expr {
    match &a {
        Expr::Const(x) if *x == 0.0 => a,
        _ => Expr::Neg(a.into()),
    }
}

fn diff_node(e: &Expr, sym: CoordSym, site: SiteIndex) -> Expr {
    match e {
        Expr::Const(_) => Expr::Const(0.0),
        Expr::Coord { sym: s, site: i } => {
            Expr::Const(if *s == sym && *i == site { 1.0 } else { 0.0 })
        }
        Expr::Add(a, b) => fold_add(diff_node(a, sym, site), diff_node(b, sym, site)),
        Expr::Sub(a, b) => fold_sub(diff_node(a, sym, site), diff_node(b, sym, site)),
        Expr::Mul(a, b) => fold_add(
            fold_mul(diff_node(a, sym, site), (**b).clone()),
            fold_mul((**a).clone(), diff_node(b, sym, site)),
        ),
        Expr::Neg(a) => fold_neg(diff_node(a, sym, site)),
        Expr::Pow(a, n) => {
            if *n == 0 {
                Expr::Const(0.0)
            } else {
                fold_mul(
                    fold_mul(Expr::Const(*n as f64), Expr::Pow((**a).clone().into(), n - 1)),
                    diff_node(a, sym, site),
                )
            }
        }
        Expr::Cos(a) => fold_neg(fold_mul(
            Expr::Sin((**a).clone().into()),
            diff_node(a, sym, site),
        )),
        Expr::Sin(a) => fold_mul(Expr::Cos((**a).clone().into()), diff_node(a, sym, site)),
        Expr::Exp(a) => fold_mul(Expr::Exp((**a).clone().into()), diff_node(a, sym, site)),
    }
}

/// The Poisson bracket {f,g} as an expression tree, built from symbolic
/// derivatives. This is an independent route to the same function that
/// `product_bracket` evaluates with forward-mode duals.
pub fn bracket_observable(f: &Observable, g: &Observable) -> Result<Observable> {
    if f.kind() != g.kind() {
        return Err(Error::InvalidObservable(
            "bracket of observables over different manifolds".into(),
        ));
    }
    let mut total = Expr::Const(0.0);
    for site in f.support().intersection(g.support()) {
        let site = *site;
        let term = match f.kind() {
            ManifoldKind::Sphere2 => {
                let d = |h: &Observable, s: CoordSym| diff_node(h.expr(), s, site);
                let coord = |s: CoordSym| Expr::Coord { sym: s, site };
                let cross = |a1: Expr, a2: Expr, b1: Expr, b2: Expr| {
                    fold_sub(fold_mul(a1, a2), fold_mul(b1, b2))
                };
                // s . (grad f x grad g), componentwise.
                let cx = cross(
                    d(f, CoordSym::Sy),
                    d(g, CoordSym::Sz),
                    d(f, CoordSym::Sz),
                    d(g, CoordSym::Sy),
                );
                let cy = cross(
                    d(f, CoordSym::Sz),
                    d(g, CoordSym::Sx),
                    d(f, CoordSym::Sx),
                    d(g, CoordSym::Sz),
                );
                let cz = cross(
                    d(f, CoordSym::Sx),
                    d(g, CoordSym::Sy),
                    d(f, CoordSym::Sy),
                    d(g, CoordSym::Sx),
                );
                fold_add(
                    fold_add(
                        fold_mul(coord(CoordSym::Sx), cx),
                        fold_mul(coord(CoordSym::Sy), cy),
                    ),
                    fold_mul(coord(CoordSym::Sz), cz),
                )
            }
            ManifoldKind::Torus2 => fold_sub(
                fold_mul(
                    diff_node(f.expr(), CoordSym::Q, site),
                    diff_node(g.expr(), CoordSym::P, site),
                ),
                fold_mul(
                    diff_node(f.expr(), CoordSym::P, site),
                    diff_node(g.expr(), CoordSym::Q, site),
                ),
            ),
        };
        total = fold_add(total, term);
    }
    Ok(Observable::from_expr(total, f.kind()))
}

/// Product-manifold Poisson bracket: the sum of site brackets over the
/// common support. Independent of any enlargement of the ambient window.
pub fn product_bracket(f: &Observable, g: &Observable, config: &Configuration) -> Result<f64> {
    if f.kind() != g.kind() {
        return Err(Error::InvalidObservable(
            "bracket of observables over different manifolds".into(),
        ));
    }
    let mut sum = 0.0;
    for site in f.support().intersection(g.support()) {
        sum += site_bracket(f, g, config, *site)?;
    }
    Ok(sum)
}

// ---------------------------------------------------------------------------
// Lexer / parser
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Caret,
    Comma,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&ch) = chars.peek() {
        let (l, c) = (line, col);
        match ch {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => {
                chars.next();
                col += 1;
            }
            '(' | ')' | '+' | '-' | '*' | '^' | ',' => {
                chars.next();
                col += 1;
                let tok = match ch {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '^' => Tok::Caret,
                    _ => Tok::Comma,
                };
                out.push(Token { tok, line: l, col: c });
            }
            '0'..='9' | '.' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() || d == '.' {
                        s.push(d);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                if let Some(&e) = chars.peek() {
                    if e == 'e' || e == 'E' {
                        let mut probe = s.clone();
                        probe.push(e);
                        let mut it = chars.clone();
                        it.next();
                        let mut extra = 1usize;
                        if let Some(&sgn) = it.peek() {
                            if sgn == '+' || sgn == '-' {
                                probe.push(sgn);
                                it.next();
                                extra += 1;
                            }
                        }
                        let mut digits = 0;
                        while let Some(&d) = it.peek() {
                            if d.is_ascii_digit() {
                                probe.push(d);
                                it.next();
                                extra += 1;
                                digits += 1;
                            } else {
                                break;
                            }
                        }
                        if digits > 0 {
                            s = probe;
                            chars = it;
                            col += extra;
                        }
                    }
                }
                let v: f64 = s.parse().map_err(|_| Error::Parse {
                    line: l,
                    col: c,
                    msg: format!("bad number literal `{s}`"),
                })?;
                out.push(Token {
                    tok: Tok::Num(v),
                    line: l,
                    col: c,
                });
            }
            a if a.is_ascii_alphabetic() || a == '_' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        s.push(d);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                out.push(Token {
                    tok: Tok::Ident(s),
                    line: l,
                    col: c,
                });
            }
            other => {
                return Err(Error::Parse {
                    line: l,
                    col: c,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    kind: ManifoldKind,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, msg: impl Into<String>) -> Error {
        let (line, col) = self
            .tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map(|t| (t.line, t.col))
            .unwrap_or((1, 1));
        Error::Parse {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        match self.peek() {
            Some(t) if t.tok == tok => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err_here(format!("expected {what}"))),
        }
    }

    fn expect_end(&self) -> Result<()> {
        if self.pos == self.tokens.len() {
            Ok(())
        } else {
            Err(self.err_here("unexpected trailing input"))
        }
    }

    fn parse_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_term()?;
        loop {
            match self.peek().map(|t| t.tok.clone()) {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Expr::Add(lhs.into(), rhs.into());
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Expr::Sub(lhs.into(), rhs.into());
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn parse_term(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_unary()?;
        while let Some(Tok::Star) = self.peek().map(|t| t.tok.clone()) {
            self.pos += 1;
            let rhs = self.parse_unary()?;
            lhs = Expr::Mul(lhs.into(), rhs.into());
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr> {
        if let Some(Tok::Minus) = self.peek().map(|t| t.tok.clone()) {
            self.pos += 1;
            let inner = self.parse_unary()?;
            return Ok(Expr::Neg(inner.into()));
        }
        self.parse_factor()
    }

    fn parse_factor(&mut self) -> Result<Expr> {
        let mut base = self.parse_primary()?;
        while let Some(Tok::Caret) = self.peek().map(|t| t.tok.clone()) {
            self.pos += 1;
            let n = self.parse_exponent()?;
            base = Expr::Pow(base.into(), n);
        }
        Ok(base)
    }

    fn parse_exponent(&mut self) -> Result<u32> {
        match self.next().map(|t| (t.tok.clone(), t.line, t.col)) {
            Some((Tok::Num(v), line, col)) => {
                if v.fract() != 0.0 || v < 0.0 || v > u32::MAX as f64 {
                    Err(Error::Parse {
                        line,
                        col,
                        msg: format!("exponent must be a non-negative integer, got `{v}`"),
                    })
                } else {
                    Ok(v as u32)
                }
            }
            Some((Tok::Minus, line, col)) => Err(Error::Parse {
                line,
                col,
                msg: "negative exponents are not smooth on these manifolds".into(),
            }),
            _ => Err(self.err_here("expected integer exponent after `^`")),
        }
    }

    fn parse_primary(&mut self) -> Result<Expr> {
        let t = self
            .peek()
            .cloned()
            .ok_or_else(|| self.err_here("unexpected end of input"))?;
        match t.tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Tok::LParen => {
                self.pos += 1;
                let e = self.parse_expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.pos += 1;
                match name.as_str() {
                    "cos" | "sin" | "exp" => {
                        self.expect(Tok::LParen, "`(` after function name")?;
                        let e = self.parse_expr()?;
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(match name.as_str() {
                            "cos" => Expr::Cos(e.into()),
                            "sin" => Expr::Sin(e.into()),
                            _ => Expr::Exp(e.into()),
                        })
                    }
                    "sx" | "sy" | "sz" | "q" | "p" => {
                        let sym = match name.as_str() {
                            "sx" => CoordSym::Sx,
                            "sy" => CoordSym::Sy,
                            "sz" => CoordSym::Sz,
                            "q" => CoordSym::Q,
                            _ => CoordSym::P,
                        };
                        if sym.kind() != self.kind {
                            return Err(Error::UnknownSymbol {
                                symbol: name.clone(),
                                manifold: self.kind.name().into(),
                                line: t.line,
                                col: t.col,
                            });
                        }
                        self.expect(Tok::LParen, "`(` after symbol")?;
                        let site = self.parse_site()?;
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(Expr::Coord { sym, site })
                    }
                    other => Err(Error::Parse {
                        line: t.line,
                        col: t.col,
                        msg: format!("unknown identifier `{other}`"),
                    }),
                }
            }
            _ => Err(self.err_here("expected number, symbol, function or `(`")),
        }
    }

    fn parse_site(&mut self) -> Result<SiteIndex> {
        let mut coords = Vec::new();
        loop {
            coords.push(self.parse_signed_int()?);
            match self.peek().map(|t| t.tok.clone()) {
                Some(Tok::Comma) => {
                    self.pos += 1;
                }
                _ => break,
            }
        }
        SiteIndex::new(&coords).map_err(|e| self.err_here(e.to_string()))
    }

    fn parse_signed_int(&mut self) -> Result<i64> {
        let mut sign = 1i64;
        if let Some(Tok::Minus) = self.peek().map(|t| t.tok.clone()) {
            self.pos += 1;
            sign = -1;
        }
        match self.next().map(|t| (t.tok.clone(), t.line, t.col)) {
            Some((Tok::Num(v), line, col)) => {
                if v.fract() != 0.0 || v < 0.0 {
                    Err(Error::Parse {
                        line,
                        col,
                        msg: format!("site coordinate must be an integer, got `{v}`"),
                    })
                } else {
                    Ok(sign * v as i64)
                }
            }
            _ => Err(self.err_here("expected integer site coordinate")),
        }
    }
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

// Precedence levels: 1 add/sub, 2 mul, 3 unary minus, 4 pow, 5 atoms.
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        _ => 5,
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, parent: u8) -> fmt::Result {
    let mine = prec(e);
    let parens = mine < parent;
    if parens {
        f.write_str("(")?;
    }
    match e {
        Expr::Const(c) => write!(f, "{c}")?,
        Expr::Coord { sym, site } => write!(f, "{}({})", sym.name(), site.key_string())?,
        Expr::Add(a, b) => {
            write_expr(f, a, 1)?;
            f.write_str(" + ")?;
            write_expr(f, b, 2)?;
        }
        Expr::Sub(a, b) => {
            write_expr(f, a, 1)?;
            f.write_str(" - ")?;
            write_expr(f, b, 2)?;
        }
        Expr::Mul(a, b) => {
            write_expr(f, a, 2)?;
            f.write_str(" * ")?;
            write_expr(f, b, 3)?;
        }
        Expr::Neg(a) => {
            f.write_str("-")?;
            write_expr(f, a, 3)?;
        }
        Expr::Pow(a, n) => {
            write_expr(f, a, 5)?;
            write!(f, "^{n}")?;
        }
        Expr::Cos(a) => {
            f.write_str("cos(")?;
            write_expr(f, a, 0)?;
            f.write_str(")")?;
        }
        Expr::Sin(a) => {
            f.write_str("sin(")?;
            write_expr(f, a, 0)?;
            f.write_str(")")?;
        }
        Expr::Exp(a) => {
            f.write_str("exp(")?;
            write_expr(f, a, 0)?;
            f.write_str(")")?;
        }
    }
    if parens {
        f.write_str(")")?;
    }
    Ok(())
}
