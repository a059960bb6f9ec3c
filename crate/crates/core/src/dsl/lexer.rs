use super::ast::Span;
use super::DslError;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    /// Unsigned decimal literal, kept as written.
    Number(String),
    DoubleColon,
    Arrow,
    Colon,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Minus,
    /// Newline or `;`.
    End,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::DoubleColon => "`::`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Colon => "`:`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Minus => "`-`".into(),
            Tok::End => "end of statement".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let mut push = |tok: Tok, line: u32, col: u32| out.push(Token { tok, span: Span { line, col } });

    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let next = chars.get(i + 1).copied();
        let mut width = 1;
        match c {
            '\n' => {
                push(Tok::End, l0, c0);
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            ' ' | '\t' | '\r' => {}
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                    col += 1;
                }
                continue;
            }
            ';' => push(Tok::End, l0, c0),
            ':' if next == Some(':') => {
                push(Tok::DoubleColon, l0, c0);
                width = 2;
            }
            ':' => push(Tok::Colon, l0, c0),
            '-' if next == Some('>') => {
                push(Tok::Arrow, l0, c0);
                width = 2;
            }
            '-' => push(Tok::Minus, l0, c0),
            '→' => push(Tok::Arrow, l0, c0),
            '(' => push(Tok::LParen, l0, c0),
            ')' => push(Tok::RParen, l0, c0),
            '[' => push(Tok::LBracket, l0, c0),
            ']' => push(Tok::RBracket, l0, c0),
            ',' => push(Tok::Comma, l0, c0),
            '<' if next == Some('=') => {
                push(Tok::Le, l0, c0);
                width = 2;
            }
            '<' => push(Tok::Lt, l0, c0),
            '>' if next == Some('=') => {
                push(Tok::Ge, l0, c0);
                width = 2;
            }
            '>' => push(Tok::Gt, l0, c0),
            '≤' => push(Tok::Le, l0, c0),
            '≥' => push(Tok::Ge, l0, c0),
            '=' => push(Tok::Eq, l0, c0),
            '∧' => push(Tok::Ident("and".into()), l0, c0),
            '∨' => push(Tok::Ident("or".into()), l0, c0),
            '¬' => push(Tok::Ident("not".into()), l0, c0),
            '∈' => push(Tok::Ident("in".into()), l0, c0),
            '∉' => {
                push(Tok::Ident("not".into()), l0, c0);
                push(Tok::Ident("in".into()), l0, c0);
            }
            d if d.is_ascii_digit() || (d == '.' && next.is_some_and(|n| n.is_ascii_digit())) => {
                let start = i;
                let mut seen_dot = false;
                while i < chars.len() && (chars[i].is_ascii_digit() || (chars[i] == '.' && !seen_dot)) {
                    seen_dot |= chars[i] == '.';
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                col += (i - start) as u32;
                push(Tok::Number(text), l0, c0);
                continue;
            }
            a if a.is_alphabetic() || a == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                col += (i - start) as u32;
                push(Tok::Ident(text), l0, c0);
                continue;
            }
            other => {
                return Err(DslError::Syntax {
                    line: l0,
                    col: c0,
                    expected: "a token".into(),
                    found: format!("`{other}`"),
                })
            }
        }
        i += width;
        col += width as u32;
    }
    out.push(Token { tok: Tok::Eof, span: Span { line, col } });
    Ok(out)
}
