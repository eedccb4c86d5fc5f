use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::expr::Rat;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Num(Rat),
    Kw(&'static str),
    Sym(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Num(n) => format!("number `{n}`"),
            Tok::Kw(k) => format!("`{k}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const KEYWORDS: &[&str] = &["skip", "wait", "if", "then", "else", "endif", "true", "false"];

// Longest symbols first.
const SYMBOLS: &[&str] = &[
    "-->", ":=", "->", "<=", ">=", "==", "&&", "||", "|>", "!", "?", ";", "$", "(", ")", "*", "<", ">", "=", "&", "[",
    "]", ",", "+", "-", "/", "^",
];

pub fn lex(src: &str) -> Result<Vec<Token>, (usize, usize, String)> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
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
        let (start_line, start_col) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                i += 1;
                col += 1;
            }
            let tok = match KEYWORDS.iter().find(|k| **k == s) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(s),
            };
            out.push(Token { tok, line: start_line, col: start_col });
            continue;
        }
        if c.is_ascii_digit() {
            let mut int = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                int.push(chars[i]);
                i += 1;
                col += 1;
            }
            let mut value = Rat::from_integer(int.parse::<BigInt>().expect("digits"));
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                col += 1;
                let mut scale = Rat::one();
                let ten = Rat::from_integer(BigInt::from(10));
                let mut frac = Rat::zero();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    scale /= &ten;
                    let digit = chars[i].to_digit(10).expect("digit") as i64;
                    frac += Rat::from_integer(BigInt::from(digit)) * &scale;
                    i += 1;
                    col += 1;
                }
                value += frac;
            }
            out.push(Token { tok: Tok::Num(value), line: start_line, col: start_col });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                i += s.len();
                col += s.len();
                out.push(Token { tok: Tok::Sym(s), line: start_line, col: start_col });
            }
            None => return Err((line, col, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}
