//! Static analysis of Python seed programs.
//!
//! Seeds, historical bug codes and code pairs are all Python programs. This
//! module wraps the parser and exposes the handful of facts the pipeline
//! needs: parseability, names bound and read per top-level statement, call
//! sites with their literal arguments, numeric literals in API-input
//! positions, and a comment-insensitive normal form.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::ops::Range;

use rustpython_ast::Visitor;
use rustpython_parser::ast::{self, Constant, Expr, ExprContext, Ranged, Stmt, UnaryOp};
use rustpython_parser::lexer::lex;
use rustpython_parser::{Mode, Tok};

/// Parse failure with the byte offset reported by the parser.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub message: String,
    pub offset: usize,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at byte {}", self.message, self.offset)
    }
}

impl std::error::Error for SyntaxError {}

pub fn parse(src: &str) -> Result<Vec<Stmt>, SyntaxError> {
    rustpython_parser::parse(src, Mode::Module, "<seed>")
        .map(|module| match module {
            ast::Mod::Module(m) => m.body,
            _ => Vec::new(),
        })
        .map_err(|e| SyntaxError {
            message: e.error.to_string(),
            offset: e.offset.to_usize(),
        })
}

pub fn is_parseable(src: &str) -> bool {
    parse(src).is_ok()
}

/// Last dotted component: `mlx.core.eye` -> `eye`.
pub fn terminal_name(api: &str) -> &str {
    api.rsplit('.').next().unwrap_or(api)
}

/// Dotted spelling of a callee expression (`mx.random.normal`), if it is a
/// plain name/attribute chain.
pub fn dotted(expr: &Expr) -> Option<String> {
    match expr {
        Expr::Name(n) => Some(n.id.to_string()),
        Expr::Attribute(a) => dotted(&a.value).map(|base| format!("{base}.{}", a.attr)),
        _ => None,
    }
}

fn base_name(expr: &Expr) -> Option<String> {
    match expr {
        Expr::Name(n) => Some(n.id.to_string()),
        Expr::Attribute(a) => base_name(&a.value),
        Expr::Subscript(s) => base_name(&s.value),
        Expr::Call(c) => base_name(&c.func),
        _ => None,
    }
}

fn span<T: Ranged>(r: &T) -> Range<usize> {
    let r = r.range();
    r.start().to_usize()..r.end().to_usize()
}

/// Collects names read and bound, and every call expression.
#[derive(Default)]
struct Scanner {
    loads: Vec<String>,
    stores: Vec<String>,
    calls: Vec<ast::ExprCall>,
}

impl Scanner {
    fn scan(stmts: &[Stmt]) -> Self {
        let mut s = Scanner::default();
        for stmt in stmts {
            s.visit_stmt(stmt.clone());
        }
        s
    }

    fn mark_target(&mut self, target: &Expr) {
        // `a[0] = v` and `a.x = v` mutate `a`: it is both read and (re)bound.
        match target {
            Expr::Subscript(_) | Expr::Attribute(_) => {
                if let Some(b) = base_name(target) {
                    self.stores.push(b);
                }
            }
            Expr::Tuple(t) => t.elts.iter().for_each(|e| self.mark_target(e)),
            Expr::List(l) => l.elts.iter().for_each(|e| self.mark_target(e)),
            Expr::Starred(s) => self.mark_target(&s.value),
            _ => {}
        }
    }
}

impl Visitor for Scanner {
    fn visit_stmt_function_def(&mut self, node: ast::StmtFunctionDef) {
        self.stores.push(node.name.to_string());
        self.generic_visit_stmt_function_def(node)
    }
    fn visit_stmt_async_function_def(&mut self, node: ast::StmtAsyncFunctionDef) {
        self.stores.push(node.name.to_string());
        self.generic_visit_stmt_async_function_def(node)
    }
    fn visit_stmt_class_def(&mut self, node: ast::StmtClassDef) {
        self.stores.push(node.name.to_string());
        self.generic_visit_stmt_class_def(node)
    }
    fn visit_stmt_assign(&mut self, node: ast::StmtAssign) {
        node.targets.iter().for_each(|t| self.mark_target(t));
        self.generic_visit_stmt_assign(node)
    }
    fn visit_stmt_aug_assign(&mut self, node: ast::StmtAugAssign) {
        if let Expr::Name(n) = node.target.as_ref() {
            self.loads.push(n.id.to_string());
        }
        self.mark_target(&node.target);
        self.generic_visit_stmt_aug_assign(node)
    }
    fn visit_stmt_import(&mut self, node: ast::StmtImport) {
        for alias in &node.names {
            let bound = match &alias.asname {
                Some(a) => a.to_string(),
                None => alias.name.split('.').next().unwrap_or_default().to_string(),
            };
            self.stores.push(bound);
        }
    }
    fn visit_stmt_import_from(&mut self, node: ast::StmtImportFrom) {
        for alias in &node.names {
            let bound = alias.asname.as_ref().unwrap_or(&alias.name);
            self.stores.push(bound.to_string());
        }
    }
    fn visit_excepthandler_except_handler(&mut self, node: ast::ExceptHandlerExceptHandler) {
        if let Some(name) = &node.name {
            self.stores.push(name.to_string());
        }
        self.generic_visit_excepthandler_except_handler(node)
    }
    fn visit_expr_name(&mut self, node: ast::ExprName) {
        match node.ctx {
            ExprContext::Load => self.loads.push(node.id.to_string()),
            ExprContext::Store | ExprContext::Del => self.stores.push(node.id.to_string()),
        }
    }
    fn visit_expr_call(&mut self, node: ast::ExprCall) {
        self.calls.push(node.clone());
        self.generic_visit_expr_call(node)
    }
    fn visit_keyword(&mut self, node: ast::Keyword) {
        self.visit_expr(node.value)
    }
    fn visit_comprehension(&mut self, node: ast::Comprehension) {
        self.visit_expr(node.target);
        self.visit_expr(node.iter);
        for cond in node.ifs {
            self.visit_expr(cond);
        }
    }
    fn visit_withitem(&mut self, node: ast::WithItem) {
        self.visit_expr(node.context_expr);
        if let Some(v) = node.optional_vars {
            self.visit_expr(*v);
        }
    }
    fn visit_arguments(&mut self, node: ast::Arguments) {
        let all = node
            .posonlyargs
            .into_iter()
            .chain(node.args)
            .chain(node.kwonlyargs);
        for arg in all {
            self.stores.push(arg.def.arg.to_string());
            if let Some(d) = arg.default {
                self.visit_expr(*d);
            }
        }
        if let Some(v) = node.vararg {
            self.stores.push(v.arg.to_string());
        }
        if let Some(k) = node.kwarg {
            self.stores.push(k.arg.to_string());
        }
    }
    fn visit_match_case(&mut self, node: ast::MatchCase) {
        if let Some(g) = node.guard {
            self.visit_expr(*g);
        }
        for stmt in node.body {
            self.visit_stmt(stmt);
        }
    }
}

fn is_call_to(call: &ast::ExprCall, terminal: &str) -> bool {
    match call.func.as_ref() {
        Expr::Name(n) => n.id.as_str() == terminal,
        Expr::Attribute(a) => a.attr.as_str() == terminal,
        _ => false,
    }
}

/// Facts about one top-level statement, used for statement-granular slicing.
#[derive(Debug, Clone)]
pub struct StmtFacts {
    /// Byte span widened to whole source lines (without the final newline).
    pub span: Range<usize>,
    pub defs: BTreeSet<String>,
    pub uses: BTreeSet<String>,
    /// Number of call sites of the API inside this statement.
    pub api_calls: usize,
}

pub fn top_level_facts(src: &str, api_terminal: &str) -> Result<Vec<StmtFacts>, SyntaxError> {
    let suite = parse(src)?;
    let modules: BTreeSet<String> = suite
        .iter()
        .flat_map(|stmt| match stmt {
            Stmt::Import(i) => i
                .names
                .iter()
                .map(|a| match &a.asname {
                    Some(n) => n.to_string(),
                    None => a.name.split('.').next().unwrap_or_default().to_string(),
                })
                .collect::<Vec<_>>(),
            Stmt::ImportFrom(i) => i
                .names
                .iter()
                .map(|a| a.asname.as_ref().unwrap_or(&a.name).to_string())
                .collect(),
            _ => Vec::new(),
        })
        .collect();
    Ok(suite
        .iter()
        .map(|stmt| {
            let scan = Scanner::scan(std::slice::from_ref(stmt));
            let mut defs: BTreeSet<String> = scan.stores.iter().cloned().collect();
            let mut uses: BTreeSet<String> = scan.loads.iter().cloned().collect();
            // `x.append(v)` as a bare statement mutates `x`; module functions
            // and the API under test are treated as pure.
            if let Stmt::Expr(e) = stmt {
                if let Expr::Call(c) = e.value.as_ref() {
                    if let Expr::Attribute(a) = c.func.as_ref() {
                        if let Expr::Name(n) = a.value.as_ref() {
                            if a.attr.as_str() != api_terminal && !modules.contains(n.id.as_str()) {
                                defs.insert(n.id.to_string());
                                uses.insert(n.id.to_string());
                            }
                        }
                    }
                }
            }
            let api_calls = scan.calls.iter().filter(|c| is_call_to(c, api_terminal)).count();
            StmtFacts {
                span: line_span(src, span(stmt)),
                defs,
                uses,
                api_calls,
            }
        })
        .collect())
}

fn line_span(src: &str, r: Range<usize>) -> Range<usize> {
    let start = src[..r.start].rfind('\n').map_or(0, |i| i + 1);
    let end = src[r.end..].find('\n').map_or(src.len(), |i| r.end + i);
    start..end
}

/// Module roots named by `import` / `from ... import` statements anywhere.
pub fn imported_modules(src: &str) -> Result<BTreeSet<String>, SyntaxError> {
    struct Imports(BTreeSet<String>);
    impl Visitor for Imports {
        fn visit_stmt_import(&mut self, node: ast::StmtImport) {
            for a in node.names {
                self.0.insert(a.name.split('.').next().unwrap_or_default().to_string());
            }
        }
        fn visit_stmt_import_from(&mut self, node: ast::StmtImportFrom) {
            if let Some(m) = node.module {
                if node.level.map_or(0, |l| l.to_u32()) == 0 {
                    self.0.insert(m.split('.').next().unwrap_or_default().to_string());
                }
            }
        }
    }
    let mut v = Imports(BTreeSet::new());
    for stmt in parse(src)? {
        v.visit_stmt(stmt);
    }
    Ok(v.0)
}

/// Every identifier read anywhere in the program.
pub fn referenced_names(src: &str) -> Result<BTreeSet<String>, SyntaxError> {
    let suite = parse(src)?;
    Ok(Scanner::scan(&suite).loads.into_iter().collect())
}

/// Names read but never bound in the program, in order of first appearance.
pub fn free_names(src: &str) -> Result<Vec<String>, SyntaxError> {
    let suite = parse(src)?;
    let scan = Scanner::scan(&suite);
    let bound: HashSet<&String> = scan.stores.iter().collect();
    let mut seen = HashSet::new();
    Ok(scan
        .loads
        .iter()
        .filter(|n| !bound.contains(n) && seen.insert(n.as_str()))
        .cloned()
        .collect())
}

/// Dotted callee names of every call in the program, in source order.
pub fn called_names(src: &str) -> Result<Vec<String>, SyntaxError> {
    let suite = parse(src)?;
    let mut calls = Scanner::scan(&suite).calls;
    calls.sort_by_key(|c| c.range.start());
    Ok(calls.iter().filter_map(|c| dotted(&c.func)).collect())
}

/// Comment- and layout-insensitive normal form used for deduplication.
pub fn normalized(src: &str) -> String {
    let mut out = String::new();
    let mut ok = true;
    for tok in lex(src, Mode::Module) {
        match tok {
            Ok((Tok::Newline, _)) => out.push('\n'),
            Ok((t, _)) => {
                out.push_str(&format!("{t:?}"));
                out.push(' ');
            }
            Err(_) => {
                ok = false;
                break;
            }
        }
    }
    if ok {
        out
    } else {
        src.split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

/// Where a literal sits within a call's argument list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArgKey {
    Pos(usize),
    Kw(String),
}

impl fmt::Display for ArgKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgKey::Pos(i) => write!(f, "arg{i}"),
            ArgKey::Kw(k) => f.write_str(k),
        }
    }
}

/// A numeric literal appearing as (part of) an argument to a call.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericLiteral {
    /// Byte span, including a leading unary minus when present.
    pub span: Range<usize>,
    pub text: String,
    pub value: f64,
    pub is_float: bool,
    pub callee: String,
    pub arg: ArgKey,
    /// Index path into nested list/tuple displays; empty for a bare argument.
    pub path: Vec<usize>,
}

/// Numeric literals in API-input positions: direct call arguments and the
/// contents of list/tuple displays passed as arguments.
pub fn input_literals(src: &str) -> Result<Vec<NumericLiteral>, SyntaxError> {
    let suite = parse(src)?;
    let mut out = Vec::new();
    for call in Scanner::scan(&suite).calls {
        let callee = dotted(&call.func).unwrap_or_default();
        for (i, arg) in call.args.iter().enumerate() {
            collect_literals(src, arg, &callee, &ArgKey::Pos(i), &mut Vec::new(), &mut out);
        }
        for kw in &call.keywords {
            if let Some(name) = &kw.arg {
                let key = ArgKey::Kw(name.to_string());
                collect_literals(src, &kw.value, &callee, &key, &mut Vec::new(), &mut out);
            }
        }
    }
    out.sort_by_key(|l| l.span.start);
    out.dedup_by_key(|l| l.span.start);
    Ok(out)
}

fn collect_literals(
    src: &str,
    expr: &Expr,
    callee: &str,
    arg: &ArgKey,
    path: &mut Vec<usize>,
    out: &mut Vec<NumericLiteral>,
) {
    let literal = |value: f64, is_float: bool, r: Range<usize>| NumericLiteral {
        text: src[r.clone()].to_string(),
        span: r,
        value,
        is_float,
        callee: callee.to_string(),
        arg: arg.clone(),
        path: path.clone(),
    };
    match expr {
        Expr::Constant(c) => {
            if let Some((v, is_float)) = numeric_constant(&c.value) {
                out.push(literal(v, is_float, span(c)));
            }
        }
        Expr::UnaryOp(u) if matches!(u.op, UnaryOp::USub | UnaryOp::UAdd) => {
            if let Expr::Constant(c) = u.operand.as_ref() {
                if let Some((v, is_float)) = numeric_constant(&c.value) {
                    let v = if matches!(u.op, UnaryOp::USub) { -v } else { v };
                    out.push(literal(v, is_float, span(u)));
                }
            }
        }
        Expr::List(l) => {
            for (i, e) in l.elts.iter().enumerate() {
                path.push(i);
                collect_literals(src, e, callee, arg, path, out);
                path.pop();
            }
        }
        Expr::Tuple(t) => {
            for (i, e) in t.elts.iter().enumerate() {
                path.push(i);
                collect_literals(src, e, callee, arg, path, out);
                path.pop();
            }
        }
        _ => {}
    }
}

fn numeric_constant(c: &Constant) -> Option<(f64, bool)> {
    match c {
        Constant::Int(i) => Some((i.to_string().parse::<f64>().ok()?, false)),
        Constant::Float(f) => Some((*f, true)),
        _ => None,
    }
}

/// Statically recovered value of a call argument.
#[derive(Debug, Clone, PartialEq)]
pub enum ArgValue {
    /// Integer literal (kept as text when it exceeds `i128`).
    Int(i128),
    Float(f64),
    /// Array-like display: shape plus its scalar elements.
    Array { shape: Vec<usize>, elements: Vec<f64> },
    Unknown(String),
}

/// A call site of a tracked API with its statically known arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct CallArgs {
    pub callee: String,
    pub args: Vec<(ArgKey, ArgValue)>,
}

/// Recover literal arguments of calls whose terminal name is in `apis`.
/// Simple names are resolved through the last top-level assignment that
/// precedes the call.
pub fn call_arguments(src: &str, apis: &[&str]) -> Result<Vec<CallArgs>, SyntaxError> {
    let suite = parse(src)?;
    let mut env: Vec<(String, Expr, usize)> = Vec::new();
    for stmt in &suite {
        if let Stmt::Assign(a) = stmt {
            for t in &a.targets {
                if let Expr::Name(n) = t {
                    env.push((n.id.to_string(), (*a.value).clone(), a.range.start().to_usize()));
                }
            }
        }
    }
    let mut calls = Scanner::scan(&suite).calls;
    calls.sort_by_key(|c| c.range.start());
    let mut out = Vec::new();
    for call in calls {
        if !apis.iter().any(|a| is_call_to(&call, terminal_name(a))) {
            continue;
        }
        let at = call.range.start().to_usize();
        let resolve = |e: &Expr| eval_arg(src, e, &env, at, 0);
        let mut args: Vec<(ArgKey, ArgValue)> = call
            .args
            .iter()
            .enumerate()
            .map(|(i, e)| (ArgKey::Pos(i), resolve(e)))
            .collect();
        for kw in &call.keywords {
            if let Some(name) = &kw.arg {
                args.push((ArgKey::Kw(name.to_string()), resolve(&kw.value)));
            }
        }
        out.push(CallArgs {
            callee: dotted(&call.func).unwrap_or_default(),
            args,
        });
    }
    Ok(out)
}

const SPECIAL_NAN: &[&str] = &["nan", "NaN", "NAN"];
const SPECIAL_INF: &[&str] = &["inf", "Inf", "infty", "Infinity", "PINF"];

fn eval_arg(src: &str, e: &Expr, env: &[(String, Expr, usize)], at: usize, depth: u8) -> ArgValue {
    if depth > 8 {
        return ArgValue::Unknown(src[span(e)].to_string());
    }
    let unknown = || ArgValue::Unknown(src[span(e)].to_string());
    match e {
        Expr::Constant(c) => match &c.value {
            Constant::Int(i) => i
                .to_string()
                .parse::<i128>()
                .map(ArgValue::Int)
                .unwrap_or_else(|_| ArgValue::Float(i.to_string().parse().unwrap_or(f64::INFINITY))),
            Constant::Float(f) => ArgValue::Float(*f),
            Constant::Bool(b) => ArgValue::Int(i128::from(*b)),
            _ => unknown(),
        },
        Expr::UnaryOp(u) => match (u.op, eval_arg(src, &u.operand, env, at, depth + 1)) {
            (UnaryOp::USub, ArgValue::Int(i)) => ArgValue::Int(-i),
            (UnaryOp::USub, ArgValue::Float(f)) => ArgValue::Float(-f),
            (UnaryOp::UAdd, v @ (ArgValue::Int(_) | ArgValue::Float(_))) => v,
            _ => unknown(),
        },
        Expr::BinOp(b) => {
            let l = eval_arg(src, &b.left, env, at, depth + 1);
            let r = eval_arg(src, &b.right, env, at, depth + 1);
            match (b.op, l, r) {
                (ast::Operator::Pow, ArgValue::Int(x), ArgValue::Int(y)) if (0..=126).contains(&y) => {
                    x.checked_pow(y as u32)
                        .map(ArgValue::Int)
                        .unwrap_or_else(|| ArgValue::Float((x as f64).powi(y as i32)))
                }
                (ast::Operator::Mult, ArgValue::Int(x), ArgValue::Int(y)) => {
                    x.checked_mul(y).map(ArgValue::Int).unwrap_or_else(unknown)
                }
                _ => unknown(),
            }
        }
        Expr::Attribute(a) => {
            let attr = a.attr.as_str();
            if SPECIAL_NAN.contains(&attr) {
                ArgValue::Float(f64::NAN)
            } else if SPECIAL_INF.contains(&attr) {
                ArgValue::Float(f64::INFINITY)
            } else {
                unknown()
            }
        }
        Expr::Call(c) => {
            let callee = dotted(&c.func).unwrap_or_default();
            if callee == "float" && c.args.len() == 1 {
                if let Expr::Constant(k) = &c.args[0] {
                    if let Constant::Str(s) = &k.value {
                        return match s.trim().to_ascii_lowercase().as_str() {
                            "nan" | "+nan" | "-nan" => ArgValue::Float(f64::NAN),
                            "inf" | "+inf" | "infinity" => ArgValue::Float(f64::INFINITY),
                            "-inf" | "-infinity" => ArgValue::Float(f64::NEG_INFINITY),
                            other => other.parse().map(ArgValue::Float).unwrap_or_else(|_| unknown()),
                        };
                    }
                }
            }
            // Array constructors: `mx.array([...])`, `torch.tensor([...])`.
            let ctor = terminal_name(&callee);
            if matches!(ctor, "array" | "tensor" | "Tensor" | "asarray" | "constant" | "convert_to_tensor")
                && !c.args.is_empty()
            {
                return eval_arg(src, &c.args[0], env, at, depth + 1);
            }
            unknown()
        }
        Expr::List(_) | Expr::Tuple(_) => {
            let mut elements = Vec::new();
            match array_shape(src, e, env, at, depth, &mut elements) {
                Some(shape) => ArgValue::Array { shape, elements },
                None => unknown(),
            }
        }
        Expr::Name(n) => {
            let id = n.id.as_str();
            if let Some((_, value, _)) = env.iter().rev().find(|(name, _, pos)| name == id && *pos < at) {
                eval_arg(src, value, env, at, depth + 1)
            } else if SPECIAL_NAN.contains(&id) {
                ArgValue::Float(f64::NAN)
            } else if SPECIAL_INF.contains(&id) {
                ArgValue::Float(f64::INFINITY)
            } else {
                unknown()
            }
        }
        _ => unknown(),
    }
}

fn array_shape(
    src: &str,
    e: &Expr,
    env: &[(String, Expr, usize)],
    at: usize,
    depth: u8,
    elements: &mut Vec<f64>,
) -> Option<Vec<usize>> {
    let elts = match e {
        Expr::List(l) => &l.elts,
        Expr::Tuple(t) => &t.elts,
        _ => {
            return match eval_arg(src, e, env, at, depth + 1) {
                ArgValue::Int(i) => {
                    elements.push(i as f64);
                    Some(Vec::new())
                }
                ArgValue::Float(f) => {
                    elements.push(f);
                    Some(Vec::new())
                }
                _ => None,
            }
        }
    };
    let mut inner: Option<Vec<usize>> = None;
    for elt in elts {
        let s = array_shape(src, elt, env, at, depth + 1, elements)?;
        match &inner {
            Some(prev) if *prev != s => return None,
            _ => inner = Some(s),
        }
    }
    let mut shape = vec![elts.len()];
    shape.extend(inner.unwrap_or_default());
    Some(shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_valid_and_rejects_invalid() {
        assert!(is_parseable("import torch\nx = torch.eye(3)\n"));
        assert!(!is_parseable("x = (1,\n"));
    }

    #[test]
    fn facts_track_defs_and_uses() {
        let src = "import mlx.core as mx\na = mx.array([1, 2])\nb = mx.eye(3)\nmx.eye(a.shape[0])\n";
        let facts = top_level_facts(src, "eye").unwrap();
        assert_eq!(facts.len(), 4);
        assert!(facts[0].defs.contains("mx"));
        assert!(facts[1].defs.contains("a") && facts[1].uses.contains("mx"));
        assert_eq!(facts[2].api_calls, 1);
        assert!(facts[3].uses.contains("a"));
        assert_eq!(&src[facts[3].span.clone()], "mx.eye(a.shape[0])");
    }

    #[test]
    fn keyword_values_are_scanned() {
        let facts = top_level_facts("f(x=a)\n", "f").unwrap();
        assert!(facts[0].uses.contains("a"));
    }

    #[test]
    fn free_names_skip_bound_ones() {
        let free = free_names("import numpy as np\nx = torch.eye(3)\ny = x + np.ones(2)\n").unwrap();
        assert_eq!(free, vec!["torch".to_string()]);
    }

    #[test]
    fn literals_in_input_positions() {
        let src = "x = mx.array([1.5, -2])\ny = mx.eye(3, k=-1)\nz = 4 + 5\n";
        let lits = input_literals(src).unwrap();
        let texts: Vec<_> = lits.iter().map(|l| l.text.as_str()).collect();
        assert_eq!(texts, vec!["1.5", "-2", "3", "-1"]);
        assert_eq!(lits[1].path, vec![1]);
        assert_eq!(lits[3].arg, ArgKey::Kw("k".into()));
        assert!(lits[0].is_float && !lits[2].is_float);
    }

    #[test]
    fn call_arguments_resolve_specials_and_names() {
        let src = "import torch\nn = 10**20\nx = torch.tensor([[float('nan'), 1.0], [2.0, 3.0]])\ntorch.eye(n, 5)\ntorch.sum(x)\n";
        let calls = call_arguments(src, &["torch.eye", "torch.sum"]).unwrap();
        assert_eq!(calls[0].args[0].1, ArgValue::Int(10i128.pow(20)));
        assert_eq!(calls[0].args[1].1, ArgValue::Int(5));
        match &calls[1].args[0].1 {
            ArgValue::Array { shape, elements } => {
                assert_eq!(shape, &vec![2, 2]);
                assert!(elements[0].is_nan());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn normal_form_ignores_comments_and_blank_lines() {
        let a = "x = f(1)  # note\n\ny = 2\n";
        let b = "x = f(1)\ny = 2\n";
        assert_eq!(normalized(a), normalized(b));
        assert_ne!(normalized(a), normalized("x = f(2)\ny = 2\n"));
    }

    #[test]
    fn imports_and_called_names() {
        let src = "import tensorflow as tf\nfrom torch import nn\nz = tf.zeros([2])\n";
        let mods = imported_modules(src).unwrap();
        assert!(mods.contains("tensorflow") && mods.contains("torch"));
        assert_eq!(called_names(src).unwrap(), vec!["tf.zeros".to_string()]);
    }
}
