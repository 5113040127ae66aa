//! Text formats for programs and fact files.
//!
//! Programs are sequences of rules `Head(args) :- B1(args), ..., Bn(args).`.
//! Inside rules a bare identifier is a variable, `_` is a fresh anonymous
//! variable, and constants are written quoted (`"a"`) or as tokens starting
//! with a digit (`0`, `42`). Fact files hold one ground atom per line, where
//! bare identifiers are constants. `%` starts a comment in both formats.

use crate::datalog::{Atom, Database, Fact, Program, Rule, Term};
use crate::error::{Error, Result};
use crate::symbol::Symbol;

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Ident(String),
    Number(String),
    Quoted(String),
    LParen,
    RParen,
    Comma,
    Dot,
    ImpliedBy,
}

#[derive(Clone, Debug)]
struct Spanned {
    token: Token,
    line: usize,
    col: usize,
}

fn syntax(line: usize, col: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        col,
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<Spanned>> {
    let mut tokens = Vec::new();
    for (line_idx, line) in text.lines().enumerate() {
        let line_no = line_idx + 1;
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            let single = |token| Spanned {
                token,
                line: line_no,
                col,
            };
            match c {
                '%' => break,
                c if c.is_whitespace() => i += 1,
                '(' => {
                    tokens.push(single(Token::LParen));
                    i += 1;
                }
                ')' => {
                    tokens.push(single(Token::RParen));
                    i += 1;
                }
                ',' => {
                    tokens.push(single(Token::Comma));
                    i += 1;
                }
                '.' => {
                    tokens.push(single(Token::Dot));
                    i += 1;
                }
                ':' => {
                    if chars.get(i + 1) == Some(&'-') {
                        tokens.push(single(Token::ImpliedBy));
                        i += 2;
                    } else {
                        return Err(syntax(line_no, col, "expected `:-`"));
                    }
                }
                '"' => {
                    let mut value = String::new();
                    i += 1;
                    loop {
                        match chars.get(i) {
                            None => return Err(syntax(line_no, col, "unterminated string")),
                            Some('"') => {
                                i += 1;
                                break;
                            }
                            Some('\\') => {
                                match chars.get(i + 1) {
                                    Some('n') => value.push('\n'),
                                    Some(&e @ ('"' | '\\')) => value.push(e),
                                    _ => return Err(syntax(line_no, i + 1, "bad escape")),
                                }
                                i += 2;
                            }
                            Some(&ch) => {
                                value.push(ch);
                                i += 1;
                            }
                        }
                    }
                    tokens.push(single(Token::Quoted(value)));
                }
                c if c.is_alphanumeric() || c == '_' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                        i += 1;
                    }
                    let word: String = chars[start..i].iter().collect();
                    let token = if c.is_ascii_digit() {
                        Token::Number(word)
                    } else {
                        Token::Ident(word)
                    };
                    tokens.push(single(token));
                }
                other => return Err(syntax(line_no, col, format!("unexpected character `{other}`"))),
            }
        }
    }
    Ok(tokens)
}

struct Cursor<'a> {
    tokens: &'a [Spanned],
    pos: usize,
    /// Position reported at end of input.
    eof: (usize, usize),
}

impl<'a> Cursor<'a> {
    fn new(tokens: &'a [Spanned]) -> Self {
        let eof = tokens.last().map(|t| (t.line, t.col + 1)).unwrap_or((1, 1));
        Cursor { tokens, pos: 0, eof }
    }

    fn peek(&self) -> Option<&'a Spanned> {
        self.tokens.get(self.pos)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map(|t| (t.line, t.col)).unwrap_or(self.eof)
    }

    fn error(&self, message: impl Into<String>) -> Error {
        let (line, col) = self.here();
        syntax(line, col, message)
    }

    fn eat(&mut self, expected: &Token) -> bool {
        if self.peek().map(|t| &t.token) == Some(expected) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, expected: &Token, what: &str) -> Result<()> {
        if self.eat(expected) {
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn next(&mut self) -> Option<&'a Spanned> {
        let t = self.tokens.get(self.pos);
        self.pos += 1;
        t
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Rule,
    Ground,
}

/// Parses `Pred(t1,...,tk)`; bare `Pred` is a nullary atom.
fn parse_atom_tokens(cursor: &mut Cursor<'_>, mode: Mode, anon: &mut usize) -> Result<Atom> {
    let predicate = match cursor.next() {
        Some(Spanned {
            token: Token::Ident(name),
            ..
        }) => Symbol::intern(name),
        _ => {
            cursor.pos = cursor.pos.saturating_sub(1);
            return Err(cursor.error("expected a predicate name"));
        }
    };
    let mut args = Vec::new();
    if cursor.eat(&Token::LParen) && !cursor.eat(&Token::RParen) {
        loop {
            let term = match cursor.next().map(|t| &t.token) {
                Some(Token::Ident(name)) if mode == Mode::Rule => {
                    if name == "_" {
                        *anon += 1;
                        Term::Var(Symbol::intern(&format!("_anon{anon}")))
                    } else {
                        Term::Var(Symbol::intern(name))
                    }
                }
                Some(Token::Ident(name)) | Some(Token::Number(name)) | Some(Token::Quoted(name)) => {
                    Term::Const(Symbol::intern(name))
                }
                _ => {
                    cursor.pos -= 1;
                    return Err(cursor.error("expected a term"));
                }
            };
            args.push(term);
            if cursor.eat(&Token::RParen) {
                break;
            }
            cursor.expect(&Token::Comma, "`,` or `)`")?;
        }
    }
    Ok(Atom { predicate, args })
}

pub fn parse_program(text: &str) -> Result<Program> {
    let tokens = tokenize(text)?;
    let mut cursor = Cursor::new(&tokens);
    let mut rules = Vec::new();
    while !cursor.at_end() {
        let mut anon = 0;
        let head = parse_atom_tokens(&mut cursor, Mode::Rule, &mut anon)?;
        if !cursor.eat(&Token::ImpliedBy) {
            return Err(cursor.error("expected `:-` (rules need a non-empty body)"));
        }
        let mut body = vec![parse_atom_tokens(&mut cursor, Mode::Rule, &mut anon)?];
        while cursor.eat(&Token::Comma) {
            body.push(parse_atom_tokens(&mut cursor, Mode::Rule, &mut anon)?);
        }
        cursor.expect(&Token::Dot, "`.` at end of rule")?;
        rules.push(Rule { head, body });
    }
    Program::new(rules)
}

/// Parses one ground atom, e.g. a goal `A(d)`; a trailing `.` is accepted.
pub fn parse_fact(text: &str) -> Result<Fact> {
    let tokens = tokenize(text)?;
    let mut cursor = Cursor::new(&tokens);
    let atom = parse_atom_tokens(&mut cursor, Mode::Ground, &mut 0)?;
    cursor.eat(&Token::Dot);
    if !cursor.at_end() {
        return Err(cursor.error("trailing input after fact"));
    }
    Ok(atom.ground(|_| unreachable!("ground mode yields constants only")))
}

/// Parses an atom in rule syntax (variables allowed).
pub fn parse_atom(text: &str) -> Result<Atom> {
    let tokens = tokenize(text)?;
    let mut cursor = Cursor::new(&tokens);
    let atom = parse_atom_tokens(&mut cursor, Mode::Rule, &mut 0)?;
    if !cursor.at_end() {
        return Err(cursor.error("trailing input after atom"));
    }
    Ok(atom)
}

/// Which predicates a fact file may mention.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactScope {
    /// Extensional predicates only (an input database).
    Input,
    /// Any predicate of the program's schema.
    Schema,
}

/// Parses a fact file against `program`'s schema. One fact per line with an
/// optional trailing `.`; blank lines and comments are skipped.
pub fn parse_database(text: &str, program: &Program, scope: FactScope) -> Result<Database> {
    let tokens = tokenize(text)?;
    let mut db = Database::new();
    let mut start = 0;
    while start < tokens.len() {
        let line = tokens[start].line;
        let end = tokens[start..]
            .iter()
            .position(|t| t.line != line)
            .map_or(tokens.len(), |p| start + p);
        let mut cursor = Cursor::new(&tokens[start..end]);
        let atom = parse_atom_tokens(&mut cursor, Mode::Ground, &mut 0)?;
        cursor.eat(&Token::Dot);
        if !cursor.at_end() {
            return Err(cursor.error("expected one fact per line"));
        }
        let fact = atom.ground(|_| unreachable!());
        match program.arity(fact.predicate) {
            None => return Err(Error::UnknownPredicate(fact.predicate.to_string())),
            Some(expected) if expected != fact.arity() => {
                return Err(Error::ArityMismatch {
                    predicate: fact.predicate.to_string(),
                    expected,
                    found: fact.arity(),
                })
            }
            Some(_) => {}
        }
        if scope == FactScope::Input && program.is_intensional(fact.predicate) {
            return Err(Error::IdbFactInInput(fact.to_string()));
        }
        db.insert(fact);
        start = end;
    }
    Ok(db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EXAMPLE_DB: &str = "S(a)\nT(a,a,b)\nT(a,a,c)\nT(a,a,d)\nT(b,c,a)\n";

    fn path_program() -> Program {
        parse_program("A(x) :- S(x). % base\nA(x) :- A(y),A(z),T(y,z,x).").unwrap()
    }

    #[test]
    fn parses_example_database() {
        let db = parse_database(EXAMPLE_DB, &path_program(), FactScope::Input).unwrap();
        assert_eq!(db.len(), 5);
        assert!(db.contains(&Fact::new("T", ["b", "c", "a"])));
    }

    #[test]
    fn empty_text_is_empty_database() {
        let db = parse_database("", &path_program(), FactScope::Input).unwrap();
        assert!(db.is_empty());
        let db = parse_database("% only a comment\n\n", &path_program(), FactScope::Input).unwrap();
        assert!(db.is_empty());
    }

    #[test]
    fn idb_fact_rejected_in_input() {
        let err = parse_database("A(a)", &path_program(), FactScope::Input).unwrap_err();
        assert!(matches!(err, Error::IdbFactInInput(_)));
        assert!(parse_database("A(a)", &path_program(), FactScope::Schema).is_ok());
    }

    #[test]
    fn unknown_predicate_and_arity() {
        let p = path_program();
        assert!(matches!(
            parse_database("Q(a)", &p, FactScope::Input),
            Err(Error::UnknownPredicate(_))
        ));
        assert!(matches!(
            parse_database("S(a,b)", &p, FactScope::Input),
            Err(Error::ArityMismatch { .. })
        ));
    }

    #[test]
    fn syntax_error_reports_position() {
        match parse_program("A(x) :- S(x).\nA(x) :- S(x) T(x).") {
            Err(Error::Syntax { line, col, .. }) => assert_eq!((line, col), (2, 14)),
            other => panic!("unexpected {other:?}"),
        }
        match parse_database("S(a)\nS(b\n", &path_program(), FactScope::Input) {
            Err(Error::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rule_without_body_is_rejected() {
        assert!(matches!(parse_program("A(a)."), Err(Error::Syntax { .. })));
    }

    #[test]
    fn constants_in_rules() {
        let p = parse_program("A(x) :- S(x, \"k\"), N(x, 0).").unwrap();
        let body = &p.rules()[0].body;
        assert_eq!(body[0].args[1], Term::Const(Symbol::intern("k")));
        assert_eq!(body[1].args[1], Term::Const(Symbol::intern("0")));
    }

    #[test]
    fn anonymous_variables_are_distinct() {
        let p = parse_program("R(x) :- Var(x, _, _).").unwrap();
        let args = &p.rules()[0].body[0].args;
        assert_ne!(args[1], args[2]);
        assert!(args[1].is_var());
    }

    #[test]
    fn goal_fact_parses_with_quotes() {
        let f = parse_fact("A(\"hello world\").").unwrap();
        assert_eq!(f.args[0].as_str(), "hello world");
        assert!(parse_fact("A(b) junk").is_err());
    }

    fn arb_term() -> impl Strategy<Value = Term> {
        prop_oneof![
            prop::sample::select(vec!["x", "y", "z", "w"]).prop_map(|v| Term::Var(Symbol::intern(v))),
            prop::sample::select(vec!["0", "1", "a b", "c"]).prop_map(|c| Term::Const(Symbol::intern(c))),
        ]
    }

    fn arb_rule() -> impl Strategy<Value = Rule> {
        let atom = |pred: &'static str, n: usize| {
            prop::collection::vec(arb_term(), n).prop_map(move |args| Atom::new(pred, args))
        };
        (
            prop::collection::vec(
                prop::sample::select(vec![("E", 2usize), ("F", 1), ("P", 2), ("Q", 3)])
                    .prop_flat_map(move |(p, n)| atom(p, n)),
                1..4,
            ),
            prop::sample::select(vec![("P", 2usize), ("Q", 3)]),
        )
            .prop_map(|(body, (hp, hn))| {
                let body_vars: Vec<Term> = body
                    .iter()
                    .flat_map(|a| a.args.iter().copied())
                    .collect();
                let head_args = (0..hn)
                    .map(|i| body_vars.get(i).copied().unwrap_or(Term::Const(Symbol::intern("1"))))
                    .collect();
                Rule::new(Atom::new(hp, head_args), body)
            })
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(rules in prop::collection::vec(arb_rule(), 1..6)) {
            let program = Program::new(rules).unwrap();
            let text = program.to_string();
            let reparsed = parse_program(&text).unwrap();
            prop_assert_eq!(program, reparsed);
        }

        #[test]
        fn linearity_invariant_under_reordering(rules in prop::collection::vec(arb_rule(), 1..6), seed in any::<u64>()) {
            let program = Program::new(rules.clone()).unwrap();
            let mut shuffled = rules;
            let n = shuffled.len();
            shuffled.rotate_left((seed as usize) % n);
            let other = Program::new(shuffled).unwrap();
            prop_assert_eq!(program.classify(), other.classify());
        }
    }
}
