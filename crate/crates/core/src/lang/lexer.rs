use super::ast::Loc;
use super::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Var(String),
    Int(i64),
    Not,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    Dot,
    DotDot,
    If,
    WeakIf,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Count,
    Amp,
    Pipe,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Var(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::Not => "not",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Dot => ".",
            Tok::DotDot => "..",
            Tok::If => ":-",
            Tok::WeakIf => ":~",
            Tok::Eq => "=",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Count => "#count",
            Tok::Amp => "&",
            Tok::Pipe => "|",
            _ => "",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub loc: Loc,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! adv {
        ($n:expr) => {{
            for _ in 0..$n {
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let loc = Loc { line, column: col };
        if c.is_whitespace() {
            adv!(1);
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                adv!(1);
            }
            continue;
        }
        let peek = chars.get(i + 1).copied();
        let (tok, len) = match c {
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '[' => (Tok::LBracket, 1),
            ']' => (Tok::RBracket, 1),
            '{' => (Tok::LBrace, 1),
            '}' => (Tok::RBrace, 1),
            ',' => (Tok::Comma, 1),
            ';' => (Tok::Semi, 1),
            '+' => (Tok::Plus, 1),
            '-' => (Tok::Minus, 1),
            '*' => (Tok::Star, 1),
            '&' => (Tok::Amp, 1),
            '|' => (Tok::Pipe, 1),
            '=' if peek == Some('=') => (Tok::Eq, 2),
            '=' => (Tok::Eq, 1),
            '!' if peek == Some('=') => (Tok::Ne, 2),
            '<' if peek == Some('=') => (Tok::Le, 2),
            '<' if peek == Some('>') => (Tok::Ne, 2),
            '<' => (Tok::Lt, 1),
            '>' if peek == Some('=') => (Tok::Ge, 2),
            '>' => (Tok::Gt, 1),
            ':' if peek == Some('-') => (Tok::If, 2),
            ':' if peek == Some('~') => (Tok::WeakIf, 2),
            ':' => (Tok::Colon, 1),
            '.' if peek == Some('.') => (Tok::DotDot, 2),
            '.' => (Tok::Dot, 1),
            '#' => {
                let word: String = chars[i + 1..]
                    .iter()
                    .take_while(|c| c.is_ascii_alphanumeric() || **c == '_')
                    .collect();
                if word == "count" {
                    (Tok::Count, 1 + word.len())
                } else {
                    return Err(ParseError::syntax(
                        loc,
                        format!("unsupported directive `#{word}`"),
                    ));
                }
            }
            c if c.is_ascii_digit() => {
                let digits: String = chars[i..].iter().take_while(|c| c.is_ascii_digit()).collect();
                let value = digits.parse::<i64>().map_err(|_| {
                    ParseError::syntax(loc, format!("integer literal `{digits}` out of range"))
                })?;
                (Tok::Int(value), digits.len())
            }
            c if c.is_alphabetic() || c == '_' => {
                let word: String = chars[i..]
                    .iter()
                    .take_while(|c| c.is_alphanumeric() || **c == '_' || **c == '\'')
                    .collect();
                let len = word.chars().count();
                let tok = if word == "not" {
                    Tok::Not
                } else if c.is_uppercase() || c == '_' {
                    Tok::Var(word)
                } else {
                    Tok::Ident(word)
                };
                (tok, len)
            }
            other => {
                return Err(ParseError::syntax(loc, format!("unexpected character `{other}`")));
            }
        };
        out.push(Token { tok, loc });
        adv!(len);
    }
    out.push(Token {
        tok: Tok::Eof,
        loc: Loc { line, column: col },
    });
    Ok(out)
}
