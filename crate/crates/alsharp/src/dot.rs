//! Graphviz DOT interchange for Mealy machines.
//!
//! Accepted input is the subset used by common model repositories: a
//! `digraph` whose edges carry `label="input / output"`. The initial state is
//! the target of an edge leaving a pseudo-node named `__start*`; without one,
//! the first declared state is initial.

use std::fmt::Write as _;

use alsharp_core::{MealyBuilder, MealyError, MealyMachine, ObservationTree};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DotError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: edge label `{label}` is not of the form `input / output`")]
    Label { line: usize, col: usize, label: String },
    #[error("no states declared")]
    Empty,
    #[error(transparent)]
    Machine(#[from] MealyError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Id(String),
    Arrow,
    Undirected,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Eq,
    Semi,
    Comma,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, DotError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, col, msg: &str| DotError::Syntax { line, col, msg: msg.to_string() };
    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c.is_whitespace() {
            bump!();
        } else if c == '/' && chars.get(i + 1) == Some(&'/') || c == '#' && col == 1 {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(err(l0, c0, "unterminated comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
        } else if c == '"' {
            bump!();
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => return Err(err(l0, c0, "unterminated string")),
                    Some('"') => {
                        bump!();
                        break;
                    }
                    Some('\\') if chars.get(i + 1) == Some(&'"') => {
                        s.push('"');
                        bump!();
                        bump!();
                    }
                    Some('\\') if chars.get(i + 1) == Some(&'\\') => {
                        s.push('\\');
                        bump!();
                        bump!();
                    }
                    Some(&ch) => {
                        s.push(ch);
                        bump!();
                    }
                }
            }
            out.push(Spanned { tok: Tok::Id(s), line: l0, col: c0 });
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            bump!();
            bump!();
            out.push(Spanned { tok: Tok::Arrow, line: l0, col: c0 });
        } else if c == '-' && chars.get(i + 1) == Some(&'-') {
            bump!();
            bump!();
            out.push(Spanned { tok: Tok::Undirected, line: l0, col: c0 });
        } else if c.is_alphanumeric() || c == '_' || c == '.' || c == '-' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                s.push(chars[i]);
                bump!();
            }
            if s.is_empty() {
                // a lone '-' starting a negative number
                s.push('-');
                bump!();
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    s.push(chars[i]);
                    bump!();
                }
            }
            out.push(Spanned { tok: Tok::Id(s), line: l0, col: c0 });
        } else {
            let tok = match c {
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                '=' => Tok::Eq,
                ';' => Tok::Semi,
                ',' => Tok::Comma,
                _ => return Err(err(l0, c0, &format!("unexpected character `{c}`"))),
            };
            bump!();
            out.push(Spanned { tok, line: l0, col: c0 });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|s| (s.line, s.col)).unwrap_or(self.end)
    }

    fn fail<T>(&self, msg: &str) -> Result<T, DotError> {
        let (line, col) = self.here();
        Err(DotError::Syntax { line, col, msg: msg.to_string() })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), DotError> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(&format!("expected {what}"))
        }
    }

    fn id(&mut self) -> Result<String, DotError> {
        match self.peek() {
            Some(Tok::Id(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.fail("expected an identifier"),
        }
    }

    fn attrs(&mut self) -> Result<Vec<(String, String)>, DotError> {
        let mut out = Vec::new();
        while self.peek() == Some(&Tok::LBracket) {
            self.pos += 1;
            loop {
                match self.peek() {
                    Some(Tok::RBracket) => {
                        self.pos += 1;
                        break;
                    }
                    Some(Tok::Comma | Tok::Semi) => self.pos += 1,
                    _ => {
                        let k = self.id()?;
                        self.expect(Tok::Eq, "`=` in attribute")?;
                        let v = self.id()?;
                        out.push((k, v));
                    }
                }
            }
        }
        Ok(out)
    }
}

struct Edge {
    from: String,
    to: String,
    label: Option<String>,
    line: usize,
    col: usize,
}

fn is_start(name: &str) -> bool {
    name.starts_with("__start")
}

/// Parses a DOT digraph into a Mealy machine. Nondeterministic edges are
/// rejected.
pub fn parse_dot(text: &str) -> Result<MealyMachine, DotError> {
    let toks = lex(text)?;
    let end = toks.last().map(|t| (t.line, t.col + 1)).unwrap_or((1, 1));
    let mut p = Parser { toks, pos: 0, end };
    if p.peek() == Some(&Tok::Id("strict".into())) {
        p.pos += 1;
    }
    match p.id()?.as_str() {
        "digraph" => {}
        _ => return Err(DotError::Syntax { line: 1, col: 1, msg: "expected `digraph`".into() }),
    }
    if matches!(p.peek(), Some(Tok::Id(_))) {
        p.pos += 1;
    }
    p.expect(Tok::LBrace, "`{`")?;
    let mut nodes: Vec<String> = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut depth = 1;
    while depth > 0 {
        let (line, col) = p.here();
        match p.peek() {
            None => return p.fail("unexpected end of input, expected `}`"),
            Some(Tok::RBrace) => {
                p.pos += 1;
                depth -= 1;
            }
            Some(Tok::Semi | Tok::Comma) => p.pos += 1,
            Some(Tok::LBrace) => {
                p.pos += 1;
                depth += 1;
            }
            Some(Tok::Id(_)) => {
                let first = p.id()?;
                if depth == 1 && matches!(first.as_str(), "node" | "edge" | "graph") && p.peek() == Some(&Tok::LBracket) {
                    p.attrs()?;
                    continue;
                }
                if first == "subgraph" {
                    if matches!(p.peek(), Some(Tok::Id(_))) {
                        p.pos += 1;
                    }
                    continue;
                }
                match p.peek() {
                    Some(Tok::Eq) => {
                        p.pos += 1;
                        p.id()?;
                    }
                    Some(Tok::Arrow) => {
                        let mut chain = vec![first];
                        while p.peek() == Some(&Tok::Arrow) {
                            p.pos += 1;
                            chain.push(p.id()?);
                        }
                        let attrs = p.attrs()?;
                        let label = attrs.into_iter().find(|(k, _)| k == "label").map(|(_, v)| v);
                        for w in chain.windows(2) {
                            for n in w {
                                if !is_start(n) && !nodes.contains(n) {
                                    nodes.push(n.clone());
                                }
                            }
                            edges.push(Edge { from: w[0].clone(), to: w[1].clone(), label: label.clone(), line, col });
                        }
                    }
                    Some(Tok::Undirected) => return p.fail("undirected edge in a digraph"),
                    _ => {
                        p.attrs()?;
                        if !is_start(&first) && !nodes.contains(&first) {
                            nodes.push(first);
                        }
                    }
                }
            }
            Some(_) => return p.fail("unexpected token"),
        }
    }
    if p.pos != p.toks.len() {
        return p.fail("trailing input after the graph");
    }
    let mut b = MealyBuilder::new();
    for n in &nodes {
        b.state(n);
    }
    let mut initial = None;
    for e in &edges {
        if is_start(&e.from) {
            initial.get_or_insert(e.to.clone());
            continue;
        }
        let label = e.label.as_deref().unwrap_or("");
        let Some((i, o)) = label.split_once('/') else {
            return Err(DotError::Label { line: e.line, col: e.col, label: label.to_string() });
        };
        let (i, o) = (i.trim(), o.trim());
        if i.is_empty() {
            return Err(DotError::Label { line: e.line, col: e.col, label: label.to_string() });
        }
        b.edge(&e.from, i, o, &e.to)?;
    }
    let first = initial.or_else(|| nodes.first().cloned()).ok_or(DotError::Empty)?;
    b.initial(&first);
    Ok(b.build()?)
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// Writes `m` so that [`parse_dot`] reads it back unchanged.
pub fn write_dot(m: &MealyMachine) -> String {
    let mut s = String::from("digraph g {\n");
    s.push_str("  __start0 [label=\"\" shape=\"none\"];\n");
    for name in m.states() {
        let _ = writeln!(s, "  {} [shape=\"circle\" label={}];", quote(name), quote(name));
    }
    for (from, i, o, to) in m.transitions() {
        let _ = writeln!(s, "  {} -> {} [label={}];", quote(from), quote(to), quote(&format!("{i} / {o}")));
    }
    let _ = writeln!(s, "  __start0 -> {};", quote(&m.states()[m.initial()]));
    s.push_str("}\n");
    s
}

/// Debug rendering of an observation tree: basis nodes are filled, frontier
/// nodes dashed.
pub fn tree_to_dot(tree: &ObservationTree, inputs: &[String], outputs: &[String]) -> String {
    let mut s = String::from("digraph tree {\n  node [shape=\"circle\"];\n");
    for q in 0..tree.len() {
        let style = if tree.is_basis(q) {
            " style=\"filled\" fillcolor=\"lightblue\""
        } else if tree.is_frontier(q) {
            " style=\"dashed\""
        } else {
            ""
        };
        let _ = writeln!(s, "  t{q} [label=\"t{q}\"{style}];");
    }
    for q in 0..tree.len() {
        for (i, label) in inputs.iter().enumerate() {
            if let Some((o, t)) = tree.child(q, i) {
                let out = outputs.get(o).map(String::as_str).unwrap_or("?");
                let _ = writeln!(s, "  t{q} -> t{t} [label={}];", quote(&format!("{label} / {out}")));
            }
        }
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use alsharp_core::language_equivalent;

    #[test]
    fn self_loop() {
        let m = parse_dot("digraph g {\n s0 -> s0 [label=\"a / 1\"]; }").unwrap();
        assert_eq!(m.num_states(), 1);
        assert_eq!(m.step(0, 0), Some((0, 0)));
        assert_eq!(m.output_label(0), "1");
    }

    #[test]
    fn label_format_and_start_node() {
        let text = r#"digraph g {
            __start0 [label="" shape="none"];
            s0 [shape="circle" label="s0"];
            s1 [shape="circle" label="s1"];
            s0 -> s1 [label="a / 1"];
            s1 -> s0 [label="a/0"];
            __start0 -> s1;
        }"#;
        let m = parse_dot(text).unwrap();
        assert_eq!(m.states()[m.initial()], "s1");
        let s0 = m.state_index("s0").unwrap();
        let (t, o) = m.step(s0, m.input_index("a").unwrap()).unwrap();
        assert_eq!((m.states()[t].as_str(), m.output_label(o)), ("s1", "1"));
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_dot("digraph g {\n  s0 -> s1 [label=\"a\"];\n}").unwrap_err();
        assert_eq!(e, DotError::Label { line: 2, col: 3, label: "a".into() });
        let e = parse_dot("digraph g {\n  s0 -> ;\n}").unwrap_err();
        assert!(matches!(e, DotError::Syntax { line: 2, col: 9, .. }), "{e}");
        let e = parse_dot("digraph g { s0 -> s1 [label=\"a/0\"]; s0 -> s0 [label=\"a/1\"]; }").unwrap_err();
        assert!(matches!(e, DotError::Machine(MealyError::Nondeterministic { .. })));
        assert!(parse_dot("digraph g { }").is_err());
    }

    #[test]
    fn round_trip_with_awkward_labels() {
        let mut b = MealyBuilder::new();
        b.initial("q \"0\"");
        b.edge("q \"0\"", "x\\y", "o,1", "q1").unwrap();
        b.edge("q1", "x\\y", "-", "q \"0\"").unwrap();
        let m = b.build().unwrap();
        let back = parse_dot(&write_dot(&m)).unwrap();
        assert_eq!(back, m);
        assert!(language_equivalent(&back, &m).unwrap().is_equivalent());
    }

    #[test]
    fn comments_and_defaults_are_skipped() {
        let text = "// header\ndigraph \"m\" {\n node [shape=circle];\n rankdir=LR;\n /* block */ a -> b [label=\"i/o\", color=red];\n b -> a [label=\"i/p\"];\n}\n";
        let m = parse_dot(text).unwrap();
        assert_eq!(m.num_states(), 2);
        assert_eq!(m.states()[m.initial()], "a");
    }
}
