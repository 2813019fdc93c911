use std::fmt;

use super::ast::Span;
use super::FrontendError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Num(u64),
    KwSkip,
    KwIf,
    KwElse,
    KwWhile,
    KwLetvar,
    KwIn,
    KwOut,
    KwProc,
    KwLow,
    KwHigh,
    KwTrue,
    KwFalse,
    Assign,
    Semi,
    Comma,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Plus,
    Minus,
    Star,
    PlusPlus,
    MinusMinus,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    NotEq,
    AndAnd,
    OrOr,
    Bang,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TokenKind::Ident(name) => return write!(f, "identifier `{name}`"),
            TokenKind::Num(n) => return write!(f, "number `{n}`"),
            TokenKind::KwSkip => "`skip`",
            TokenKind::KwIf => "`if`",
            TokenKind::KwElse => "`else`",
            TokenKind::KwWhile => "`while`",
            TokenKind::KwLetvar => "`letvar`",
            TokenKind::KwIn => "`in`",
            TokenKind::KwOut => "`out`",
            TokenKind::KwProc => "`proc`",
            TokenKind::KwLow => "`low`",
            TokenKind::KwHigh => "`high`",
            TokenKind::KwTrue => "`true`",
            TokenKind::KwFalse => "`false`",
            TokenKind::Assign => "`:=`",
            TokenKind::Semi => "`;`",
            TokenKind::Comma => "`,`",
            TokenKind::LParen => "`(`",
            TokenKind::RParen => "`)`",
            TokenKind::LBrace => "`{`",
            TokenKind::RBrace => "`}`",
            TokenKind::Plus => "`+`",
            TokenKind::Minus => "`-`",
            TokenKind::Star => "`*`",
            TokenKind::PlusPlus => "`++`",
            TokenKind::MinusMinus => "`--`",
            TokenKind::Lt => "`<`",
            TokenKind::Le => "`<=`",
            TokenKind::Gt => "`>`",
            TokenKind::Ge => "`>=`",
            TokenKind::EqEq => "`==`",
            TokenKind::NotEq => "`!=`",
            TokenKind::AndAnd => "`&&`",
            TokenKind::OrOr => "`||`",
            TokenKind::Bang => "`!`",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

fn keyword(word: &str) -> Option<TokenKind> {
    Some(match word {
        "skip" => TokenKind::KwSkip,
        "if" => TokenKind::KwIf,
        "else" => TokenKind::KwElse,
        "while" => TokenKind::KwWhile,
        "letvar" => TokenKind::KwLetvar,
        "in" => TokenKind::KwIn,
        "out" => TokenKind::KwOut,
        "proc" => TokenKind::KwProc,
        "low" => TokenKind::KwLow,
        "high" => TokenKind::KwHigh,
        "true" => TokenKind::KwTrue,
        "false" => TokenKind::KwFalse,
        _ => return None,
    })
}

/// Splits source text into tokens.
///
/// Identifiers are `[A-Za-z_][A-Za-z0-9_]*`, optionally followed by a
/// `#<digits>` suffix produced by alpha-renaming. A `#` that does not
/// directly continue an identifier starts a line comment.
pub fn tokenize(source: &str) -> Result<Vec<Token>, FrontendError> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);

    while i < chars.len() {
        let c = chars[i];
        let span = Span::new(line, col);
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
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '#' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let word: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            let kind = keyword(&word).unwrap_or(TokenKind::Ident(word));
            tokens.push(Token { kind, span });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            let value = text.parse::<u64>().map_err(|_| FrontendError::Lex {
                message: format!("integer literal `{text}` out of range"),
                span,
            })?;
            tokens.push(Token {
                kind: TokenKind::Num(value),
                span,
            });
            continue;
        }

        let next = chars.get(i + 1).copied();
        let (kind, width) = match (c, next) {
            (':', Some('=')) => (TokenKind::Assign, 2),
            ('+', Some('+')) => (TokenKind::PlusPlus, 2),
            ('-', Some('-')) => (TokenKind::MinusMinus, 2),
            ('<', Some('=')) => (TokenKind::Le, 2),
            ('>', Some('=')) => (TokenKind::Ge, 2),
            ('=', Some('=')) => (TokenKind::EqEq, 2),
            ('!', Some('=')) => (TokenKind::NotEq, 2),
            ('&', Some('&')) => (TokenKind::AndAnd, 2),
            ('|', Some('|')) => (TokenKind::OrOr, 2),
            (';', _) => (TokenKind::Semi, 1),
            (',', _) => (TokenKind::Comma, 1),
            ('(', _) => (TokenKind::LParen, 1),
            (')', _) => (TokenKind::RParen, 1),
            ('{', _) => (TokenKind::LBrace, 1),
            ('}', _) => (TokenKind::RBrace, 1),
            ('+', _) => (TokenKind::Plus, 1),
            ('-', _) => (TokenKind::Minus, 1),
            ('*', _) => (TokenKind::Star, 1),
            ('<', _) => (TokenKind::Lt, 1),
            ('>', _) => (TokenKind::Gt, 1),
            ('!', _) => (TokenKind::Bang, 1),
            _ => {
                return Err(FrontendError::Lex {
                    message: format!("unexpected character `{c}`"),
                    span,
                })
            }
        };
        tokens.push(Token { kind, span });
        i += width;
        col += width as u32;
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::TokenKind::*;
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    fn id(s: &str) -> TokenKind {
        Ident(s.to_string())
    }

    #[test]
    fn skip_statement() {
        assert_eq!(kinds("skip;"), vec![KwSkip, Semi]);
    }

    #[test]
    fn annihilated_assignment() {
        assert_eq!(
            kinds("l := h * 0"),
            vec![id("l"), Assign, id("h"), Star, Num(0)]
        );
    }

    #[test]
    fn maximal_munch_keeps_keyword_prefixes_as_identifiers() {
        assert_eq!(kinds("whilex"), vec![id("whilex")]);
    }

    // Hand-written expectations, independent of the lexer's tables.
    #[test]
    fn token_oracle_corpus() {
        let corpus: Vec<(&str, Vec<TokenKind>)> = vec![
            ("skip", vec![KwSkip]),
            ("skipper", vec![id("skipper")]),
            ("if", vec![KwIf]),
            ("iff", vec![id("iff")]),
            ("else_", vec![id("else_")]),
            ("while(", vec![KwWhile, LParen]),
            (
                "letvar x := 1 in",
                vec![KwLetvar, id("x"), Assign, Num(1), KwIn],
            ),
            ("inout", vec![id("inout")]),
            ("in out", vec![KwIn, KwOut]),
            (
                "proc f(in a, out b)",
                vec![
                    KwProc,
                    id("f"),
                    LParen,
                    KwIn,
                    id("a"),
                    Comma,
                    KwOut,
                    id("b"),
                    RParen,
                ],
            ),
            ("low l, m;", vec![KwLow, id("l"), Comma, id("m"), Semi]),
            ("highest", vec![id("highest")]),
            ("true false", vec![KwTrue, KwFalse]),
            ("c++;", vec![id("c"), PlusPlus, Semi]),
            ("a--;", vec![id("a"), MinusMinus, Semi]),
            ("a-b", vec![id("a"), Minus, id("b")]),
            ("a - - b", vec![id("a"), Minus, Minus, id("b")]),
            ("x<=y", vec![id("x"), Le, id("y")]),
            ("x< y", vec![id("x"), Lt, id("y")]),
            ("x>=1", vec![id("x"), Ge, Num(1)]),
            ("x==y!=z", vec![id("x"), EqEq, id("y"), NotEq, id("z")]),
            ("!x", vec![Bang, id("x")]),
            ("a&&b||c", vec![id("a"), AndAnd, id("b"), OrOr, id("c")]),
            ("x#1", vec![id("x#1")]),
            ("x #1", vec![id("x")]),
            ("x# 1", vec![id("x")]),
            ("# only a comment", vec![]),
            ("skip; # trailing\nskip;", vec![KwSkip, Semi, KwSkip, Semi]),
            ("{ }", vec![LBrace, RBrace]),
            ("_tmp9", vec![id("_tmp9")]),
            ("007", vec![Num(7)]),
            ("a*b+c", vec![id("a"), Star, id("b"), Plus, id("c")]),
        ];
        assert!(corpus.len() >= 30);
        for (src, expected) in corpus {
            assert_eq!(kinds(src), expected, "source {src:?}");
        }
    }

    #[test]
    fn lone_equals_is_rejected() {
        assert!(tokenize("x < = y").is_err());
    }

    #[test]
    fn positions_track_lines_and_columns() {
        let toks = tokenize("skip;\n  x := 1;").unwrap();
        assert_eq!((toks[2].span.line, toks[2].span.col), (2, 3));
        assert_eq!((toks[3].span.line, toks[3].span.col), (2, 5));
    }

    #[test]
    fn lexical_error_reports_position() {
        match tokenize("x := 1 $") {
            Err(FrontendError::Lex { span, .. }) => assert_eq!((span.line, span.col), (1, 8)),
            other => panic!("expected lex error, got {other:?}"),
        }
    }
}
