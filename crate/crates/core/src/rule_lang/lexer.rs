use super::{Direction, RuleError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum TokenKind {
    /// Bare identifier or keyword.
    Word(String),
    /// `pkt_in.name` / `pkt_out.name`
    Attr(Direction, String),
    /// Unquoted run of digits and dots, or a quoted string (quotes kept).
    Literal(String),
    LParen,
    RParen,
    Colon,
    Eof,
}

impl TokenKind {
    pub(crate) fn describe(&self) -> String {
        match self {
            TokenKind::Word(w) => format!("`{w}`"),
            TokenKind::Attr(d, n) => format!("`{}.{n}`", d.prefix()),
            TokenKind::Literal(l) => format!("literal `{l}`"),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Colon => "`:`".into(),
            TokenKind::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub column: usize,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, RuleError> {
    let chars: Vec<char> = src.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    let syntax = |line, column, expected: &str, found: String| RuleError::Syntax {
        line,
        column,
        expected: expected.to_string(),
        found,
    };

    while i < chars.len() {
        let c = chars[i];
        let (tline, tcol) = (line, col);
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
                continue;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '(' | ')' | ':' => {
                let kind = match c {
                    '(' => TokenKind::LParen,
                    ')' => TokenKind::RParen,
                    _ => TokenKind::Colon,
                };
                tokens.push(Token {
                    kind,
                    line: tline,
                    column: tcol,
                });
                i += 1;
                col += 1;
                continue;
            }
            '"' => {
                let start = i;
                i += 1;
                while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                    i += 1;
                }
                if i >= chars.len() || chars[i] != '"' {
                    return Err(syntax(tline, tcol, "closing `\"`", "end of line".into()));
                }
                i += 1;
                let text: String = chars[start..i].iter().collect();
                col += i - start;
                tokens.push(Token {
                    kind: TokenKind::Literal(text),
                    line: tline,
                    column: tcol,
                });
                continue;
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                col += i - start;
                tokens.push(Token {
                    kind: TokenKind::Literal(text),
                    line: tline,
                    column: tcol,
                });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let direction = match word.as_str() {
                    "pkt_in" => Some(Direction::In),
                    "pkt_out" => Some(Direction::Out),
                    _ => None,
                };
                if let (Some(dir), Some('.')) = (direction, chars.get(i)) {
                    i += 1;
                    let name_start = i;
                    while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                        i += 1;
                    }
                    let name: String = chars[name_start..i].iter().collect();
                    col += i - start;
                    if !super::is_attribute_name(&name) {
                        return Err(syntax(
                            tline,
                            tcol + word.len() + 1,
                            "attribute name matching [a-z_][a-z0-9_]*",
                            format!("`{name}`"),
                        ));
                    }
                    tokens.push(Token {
                        kind: TokenKind::Attr(dir, name),
                        line: tline,
                        column: tcol,
                    });
                } else {
                    col += i - start;
                    tokens.push(Token {
                        kind: TokenKind::Word(word),
                        line: tline,
                        column: tcol,
                    });
                }
                continue;
            }
            other => {
                return Err(syntax(tline, tcol, "a token", format!("`{other}`")));
            }
        }
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        line,
        column: col,
    });
    Ok(tokens)
}
