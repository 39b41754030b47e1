use super::SourceSpan;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    /// Identifiers, keywords and numbers; may carry a `#n` suffix.
    Word(String),
    Arrow,
    Colon,
    Comma,
    Dot,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Bar,
    ParBar,
    Tilde,
    At,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("'{w}'"),
            Tok::Arrow => "'->'".into(),
            Tok::Colon => "':'".into(),
            Tok::Comma => "','".into(),
            Tok::Dot => "'.'".into(),
            Tok::LBrace => "'{'".into(),
            Tok::RBrace => "'}'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Bar => "'|'".into(),
            Tok::ParBar => "'||'".into(),
            Tok::Tilde => "'~'".into(),
            Tok::At => "'@'".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub span: SourceSpan,
    pub found: char,
}

fn is_word_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

/// Splits `text` into tokens. `#` starts a line comment unless it directly
/// follows a word character, where it is a freshness suffix (`t#1`).
pub fn tokenize(text: &str) -> Result<Vec<Token>, LexError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < bytes.len() {
        let c = bytes[i];
        let start = (line, col);
        let span = |len: usize| SourceSpan {
            line: start.0,
            column: start.1,
            length: len,
        };
        match c {
            b'\n' => {
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            b' ' | b'\t' | b'\r' => {
                i += 1;
                col += 1;
                continue;
            }
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            _ if is_word_char(c) => {
                let begin = i;
                while i < bytes.len() && is_word_char(bytes[i]) {
                    i += 1;
                }
                if i + 1 < bytes.len() && bytes[i] == b'#' && bytes[i + 1].is_ascii_digit() {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let len = i - begin;
                col += len;
                out.push(Token {
                    tok: Tok::Word(text[begin..i].to_string()),
                    span: span(len),
                });
                continue;
            }
            _ => {}
        }
        let next = bytes.get(i + 1).copied();
        let (tok, len) = match (c, next) {
            (b'-', Some(b'>')) => (Tok::Arrow, 2),
            (b'|', Some(b'|')) => (Tok::ParBar, 2),
            (b'|', _) => (Tok::Bar, 1),
            (b':', _) => (Tok::Colon, 1),
            (b',', _) => (Tok::Comma, 1),
            (b'.', _) => (Tok::Dot, 1),
            (b'{', _) => (Tok::LBrace, 1),
            (b'}', _) => (Tok::RBrace, 1),
            (b'(', _) => (Tok::LParen, 1),
            (b')', _) => (Tok::RParen, 1),
            (b'~', _) => (Tok::Tilde, 1),
            (b'@', _) => (Tok::At, 1),
            _ => {
                return Err(LexError {
                    span: span(1),
                    found: text[i..].chars().next().unwrap_or('?'),
                })
            }
        };
        out.push(Token { tok, span: span(len) });
        i += len;
        col += len;
    }
    out.push(Token {
        tok: Tok::Eof,
        span: SourceSpan {
            line,
            column: col,
            length: 1,
        },
    });
    Ok(out)
}
