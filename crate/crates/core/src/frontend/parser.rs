use super::lexer::{tokenize, Tok, Token};
use super::validate::validate;
use super::{FrontendError, Parsed, PrivateDecl, ProtocolSpec, SourceSpan, SpanTable};
use crate::kernel::{
    is_identifier, Action, Branch, Channel, Endpoint, GlobalType, Message, Participant, PathStep, PublicDecl,
    TermPath, DEFAULT_INDEX, TAU,
};

/// Parses and validates a protocol file.
pub fn parse(text: &str) -> Result<ProtocolSpec, FrontendError> {
    parse_spanned(text).map(|p| p.spec)
}

/// Parses and validates, keeping node positions.
pub fn parse_spanned(text: &str) -> Result<Parsed, FrontendError> {
    let parsed = parse_syntax(text)?;
    validate(&parsed.spec, &parsed.spans)?;
    Ok(parsed)
}

/// Parses without well-formedness checks, so that ill-formed protocols can
/// still be handed to the coherence checker.
pub fn parse_syntax(text: &str) -> Result<Parsed, FrontendError> {
    let toks = tokenize(text).map_err(|e| FrontendError::Lex {
        span: e.span,
        found: e.found,
    })?;
    let mut p = Parser { toks, pos: 0 };
    let spec = p.spec()?;
    Ok(spec)
}

/// Parses a bare global type (no header), without validation.
pub fn parse_global_type(text: &str) -> Result<GlobalType, FrontendError> {
    let toks = tokenize(text).map_err(|e| FrontendError::Lex {
        span: e.span,
        found: e.found,
    })?;
    let mut p = Parser { toks, pos: 0 };
    let (g, _) = p.gtype()?;
    p.expect_after_term(Tok::Eof, &[])?;
    Ok(g)
}

/// Spans mirroring the shape of a parsed term: one child per branch,
/// alternative, operand or body.
struct SpanTree {
    span: SourceSpan,
    kids: Vec<SpanTree>,
}

fn collect_spans(g: &GlobalType, st: &SpanTree, path: &TermPath, out: &mut SpanTable) {
    out.insert(path.clone(), st.span);
    let steps: Vec<(PathStep, &GlobalType)> = match g {
        GlobalType::End | GlobalType::Var(_) => Vec::new(),
        GlobalType::Rec { body, .. } => vec![(PathStep::Body, body)],
        GlobalType::Par(l, r) => vec![(PathStep::Left, l), (PathStep::Right, r)],
        GlobalType::Choice(gs) => gs.iter().enumerate().map(|(i, g)| (PathStep::Alt(i), g)).collect(),
        GlobalType::Action(a) => a
            .branches
            .iter()
            .enumerate()
            .map(|(i, b)| (PathStep::Branch(i), &b.cont))
            .collect(),
    };
    for ((step, child), kid) in steps.into_iter().zip(&st.kids) {
        collect_spans(child, kid, &path.child(step), out);
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &[&str]) -> Result<T, FrontendError> {
        let t = self.peek();
        Err(FrontendError::Parse {
            span: t.span,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.tok.describe(),
        })
    }

    fn expect(&mut self, tok: Tok) -> Result<Token, FrontendError> {
        if self.peek().tok == tok {
            Ok(self.advance())
        } else {
            self.error(&[&tok.describe()])
        }
    }

    /// Like `expect`, after a complete term, where `||` or one of `others`
    /// could also have continued the input.
    fn expect_after_term(&mut self, tok: Tok, others: &[Tok]) -> Result<Token, FrontendError> {
        if self.peek().tok == tok {
            return Ok(self.advance());
        }
        let expected: Vec<String> = others
            .iter()
            .chain([&Tok::ParBar, &tok])
            .map(Tok::describe)
            .collect();
        let refs: Vec<&str> = expected.iter().map(String::as_str).collect();
        self.error(&refs)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(&self.peek().tok, Tok::Word(x) if x == w)
    }

    fn keyword(&mut self, w: &str) -> Result<Token, FrontendError> {
        if self.is_word(w) {
            Ok(self.advance())
        } else {
            self.error(&[&format!("'{w}'")])
        }
    }

    fn word(&mut self, what: &str) -> Result<(String, SourceSpan), FrontendError> {
        match &self.peek().tok {
            Tok::Word(w) => {
                let w = w.clone();
                let t = self.advance();
                Ok((w, t.span))
            }
            _ => self.error(&[what]),
        }
    }

    fn identifier(&mut self, what: &str) -> Result<(String, SourceSpan), FrontendError> {
        match &self.peek().tok {
            Tok::Word(w) if is_identifier(w) => self.word(what),
            _ => self.error(&[what]),
        }
    }

    fn spec(&mut self) -> Result<Parsed, FrontendError> {
        self.keyword("protocol")?;
        let (name, _) = self.identifier("protocol name")?;
        let mut publics = Vec::new();
        let mut privates = Vec::new();
        loop {
            if self.is_word("public") {
                self.advance();
                let (channel, _) = self.word("channel name")?;
                self.expect(Tok::Colon)?;
                let server = self.endpoint()?.participant;
                publics.push(PublicDecl { channel, server });
            } else if self.is_word("private") {
                self.advance();
                let (channel, _) = self.word("channel name")?;
                self.expect(Tok::Colon)?;
                let left = self.endpoint()?;
                self.expect(Tok::Comma)?;
                let right = self.endpoint()?;
                privates.push(PrivateDecl { channel, left, right });
            } else {
                break;
            }
        }
        let (body, st) = self.gtype()?;
        self.expect_after_term(Tok::Eof, &[])?;
        let mut spans = SpanTable::new();
        collect_spans(&body, &st, &TermPath::root(), &mut spans);
        Ok(Parsed {
            spec: ProtocolSpec {
                name,
                publics,
                privates,
                body,
            },
            spans,
        })
    }

    fn endpoint(&mut self) -> Result<Endpoint, FrontendError> {
        let (role, _) = self.identifier("role name")?;
        let index = if self.peek().tok == Tok::Dot {
            self.advance();
            self.word("thread index")?.0
        } else {
            DEFAULT_INDEX.to_string()
        };
        let participant = Participant::new(role, index);
        if self.peek().tok == Tok::Tilde {
            self.advance();
            Ok(Endpoint::crashed(participant))
        } else {
            Ok(Endpoint::live(participant))
        }
    }

    /// `prefix ("||" gtype)?`; parallel composition nests to the right.
    fn gtype(&mut self) -> Result<(GlobalType, SpanTree), FrontendError> {
        let (left, ls) = self.prefix()?;
        if self.peek().tok != Tok::ParBar {
            return Ok((left, ls));
        }
        self.advance();
        let (right, rs) = self.gtype()?;
        let span = ls.span;
        Ok((
            GlobalType::par(left, right),
            SpanTree {
                span,
                kids: vec![ls, rs],
            },
        ))
    }

    fn prefix(&mut self) -> Result<(GlobalType, SpanTree), FrontendError> {
        let start = self.peek().span;
        let leaf = |g: GlobalType, span: SourceSpan| Ok((g, SpanTree { span, kids: Vec::new() }));
        match self.peek().tok.clone() {
            Tok::LParen => {
                self.advance();
                let inner = self.gtype()?;
                self.expect_after_term(Tok::RParen, &[])?;
                Ok(inner)
            }
            Tok::Word(w) if w == "end" => {
                self.advance();
                leaf(GlobalType::End, start)
            }
            Tok::Word(w) if w == "rec" && matches!(self.peek_at(1), Tok::Word(_)) => {
                self.advance();
                let (var, _) = self.identifier("recursion variable")?;
                let mut generation = 0;
                if self.peek().tok == Tok::At {
                    self.advance();
                    let (n, span) = self.word("generation number")?;
                    generation = n.parse().map_err(|_| FrontendError::Parse {
                        span,
                        expected: vec!["generation number".into()],
                        found: format!("'{n}'"),
                    })?;
                }
                self.expect(Tok::Dot)?;
                let (body, bs) = self.gtype()?;
                Ok((
                    GlobalType::Rec {
                        var,
                        generation,
                        body: Box::new(body),
                    },
                    SpanTree {
                        span: start,
                        kids: vec![bs],
                    },
                ))
            }
            Tok::Word(w) if w == "choice" && *self.peek_at(1) == Tok::LBrace => self.choice(),
            Tok::Word(w) => match self.peek_at(1) {
                Tok::Arrow | Tok::Dot | Tok::Tilde => self.action(),
                _ if w.starts_with(|c: char| c.is_ascii_uppercase()) && is_identifier(&w) => {
                    self.advance();
                    leaf(GlobalType::Var(w), start)
                }
                _ => self.error(&["'->'"]),
            },
            _ => self.error(&["global type"]),
        }
    }

    fn choice(&mut self) -> Result<(GlobalType, SpanTree), FrontendError> {
        let start = self.advance().span;
        self.expect(Tok::LBrace)?;
        let mut alts = vec![self.gtype()?];
        while self.peek().tok == Tok::Bar {
            self.advance();
            alts.push(self.gtype()?);
        }
        if alts.len() < 2 {
            return self.error(&["'|'"]);
        }
        self.expect_after_term(Tok::RBrace, &[Tok::Bar])?;
        // nested choices are one n-ary choice
        let mut gs = Vec::new();
        let mut kids = Vec::new();
        for (g, st) in alts {
            match g {
                GlobalType::Choice(inner) => {
                    gs.extend(inner);
                    kids.extend(st.kids);
                }
                g => {
                    gs.push(g);
                    kids.push(st);
                }
            }
        }
        Ok((GlobalType::Choice(gs), SpanTree { span: start, kids }))
    }

    fn action(&mut self) -> Result<(GlobalType, SpanTree), FrontendError> {
        let start = self.peek().span;
        let sender = self.endpoint()?;
        self.expect(Tok::Arrow)?;
        let receiver = self.endpoint()?;
        self.expect(Tok::Colon)?;
        let (ch, ch_span) = self.word("channel name")?;
        let channel = if ch == TAU { Channel::Tau } else { Channel::Named(ch) };
        let span = if ch_span.line == start.line {
            SourceSpan {
                length: ch_span.column + ch_span.length - start.column,
                ..start
            }
        } else {
            start
        };
        self.expect(Tok::LBrace)?;
        let mut branches = vec![self.branch()?];
        while self.peek().tok == Tok::Comma {
            self.advance();
            branches.push(self.branch()?);
        }
        self.expect_after_term(Tok::RBrace, &[Tok::Comma])?;
        // error branches are kept last
        let (errs, mut rest): (Vec<_>, Vec<_>) = branches.into_iter().partition(|(b, _)| b.message.is_err());
        rest.extend(errs);
        let (branches, kids): (Vec<Branch>, Vec<SpanTree>) = rest.into_iter().unzip();
        Ok((
            GlobalType::Action(Action {
                sender,
                receiver,
                channel,
                branches,
            }),
            SpanTree { span, kids },
        ))
    }

    fn branch(&mut self) -> Result<(Branch, SpanTree), FrontendError> {
        let message = match (self.peek().tok.clone(), self.peek_at(1).clone()) {
            (Tok::Word(w), Tok::Dot) if w == "ERR" => {
                self.advance();
                Message::Err
            }
            (Tok::Word(w), Tok::Word(_)) if w == "new" => {
                self.advance();
                Message::New(self.word("channel name")?.0)
            }
            (Tok::Word(_), Tok::LParen) => {
                let (label, _) = self.identifier("label")?;
                self.advance();
                let payload = match &self.peek().tok {
                    Tok::Word(_) => Some(self.identifier("payload sort")?.0),
                    _ => None,
                };
                self.expect(Tok::RParen)?;
                Message::Label { label, payload }
            }
            _ => return self.error(&["label", "'new'", "'ERR'"]),
        };
        self.expect(Tok::Dot)?;
        let (cont, st) = self.gtype()?;
        Ok((Branch::new(message, cont), st))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_actions_and_headers() {
        let p = parse_syntax(
            "protocol demo
             public k : srv
             private s : a, b.x
             a -> b.x : s { L(T) . end, ERR . end }",
        )
        .unwrap();
        assert_eq!(p.spec.publics[0].server, Participant::root("srv"));
        assert_eq!(p.spec.privates[0].right.participant, Participant::new("b", "x"));
        assert_eq!(p.spec.body.to_string(), "a -> b.x : s { L(T) . end, ERR . end }");
        assert_eq!(p.spans[&TermPath::root()], SourceSpan { line: 4, column: 14, length: 12 });
    }

    #[test]
    fn err_branch_moves_last_and_choices_flatten() {
        let g = parse_global_type("a -> b : s { ERR . end, L() . end }").unwrap();
        assert_eq!(g.to_string(), "a -> b : s { L() . end, ERR . end }");
        let c = parse_global_type("choice { end | choice { X | Y } }").unwrap();
        assert_eq!(c.to_string(), "choice { end | X | Y }");
    }

    #[test]
    fn parallel_is_right_nested() {
        let g = parse_global_type("X || Y || Z").unwrap();
        assert_eq!(g.to_string(), "(X || (Y || Z))");
        let h = parse_global_type("(X || Y) || Z").unwrap();
        assert_eq!(h.to_string(), "((X || Y) || Z)");
    }

    #[test]
    fn runtime_annotations() {
        let g = parse_global_type("rec X@1 . a~ -> b.t#2 : t#2 { ERR . X }").unwrap();
        assert_eq!(g.to_string(), "rec X@1 . a~ -> b.t#2 : t#2 { ERR . X }");
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_syntax("protocol p\na -> b : s { L() . end").unwrap_err();
        match e {
            FrontendError::Parse { span, expected, .. } => {
                assert_eq!(span.line, 2);
                assert!(expected.contains(&"'}'".to_string()));
            }
            other => panic!("{other}"),
        }
        assert!(matches!(parse_syntax("protocol p\n$"), Err(FrontendError::Lex { .. })));
    }
}
