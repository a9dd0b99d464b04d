//! Tokenizer for `.ir` sources. `#` starts a comment to end of line.

use super::{Diagnostic, Pos};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Kw(Kw),
    Punct(Punct),
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kw {
    Framework,
    App,
    Class,
    Interface,
    Extends,
    Implements,
    Final,
    Static,
    Api,
    Public,
    Protected,
    Private,
    If,
    Goto,
    Return,
    New,
    Virtual,
    Special,
    True,
    False,
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Punct {
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Semi,
    Colon,
    Dot,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    Lt,
    Gt,
    Le,
    Ge,
    EqEq,
    Ne,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

fn keyword(word: &str) -> Option<Kw> {
    Some(match word {
        "framework" => Kw::Framework,
        "app" => Kw::App,
        "class" => Kw::Class,
        "interface" => Kw::Interface,
        "extends" => Kw::Extends,
        "implements" => Kw::Implements,
        "final" => Kw::Final,
        "static" => Kw::Static,
        "api" => Kw::Api,
        "public" => Kw::Public,
        "protected" => Kw::Protected,
        "private" => Kw::Private,
        "if" => Kw::If,
        "goto" => Kw::Goto,
        "return" => Kw::Return,
        "new" => Kw::New,
        "virtual" => Kw::Virtual,
        "special" => Kw::Special,
        "true" => Kw::True,
        "false" => Kw::False,
        "null" => Kw::Null,
        _ => return None,
    })
}

pub fn tokenize(text: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut tokens = Vec::new();
    let mut diags = Vec::new();
    let bytes: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;

    macro_rules! push {
        ($tok:expr, $pos:expr) => {
            tokens.push(Token { tok: $tok, pos: $pos })
        };
    }

    while i < bytes.len() {
        let c = bytes[i];
        let pos = Pos { line, col };
        match c {
            '\n' => {
                line += 1;
                col = 1;
                i += 1;
            }
            c if c.is_whitespace() => {
                col += 1;
                i += 1;
            }
            '#' => {
                while i < bytes.len() && bytes[i] != '\n' {
                    i += 1;
                }
            }
            '"' => {
                let mut s = String::new();
                i += 1;
                col += 1;
                let mut closed = false;
                while i < bytes.len() {
                    match bytes[i] {
                        '"' => {
                            i += 1;
                            col += 1;
                            closed = true;
                            break;
                        }
                        '\\' if i + 1 < bytes.len() => {
                            let esc = bytes[i + 1];
                            s.push(match esc {
                                'n' => '\n',
                                't' => '\t',
                                other => other,
                            });
                            i += 2;
                            col += 2;
                        }
                        '\n' => break,
                        other => {
                            s.push(other);
                            i += 1;
                            col += 1;
                        }
                    }
                }
                if !closed {
                    diags.push(Diagnostic::error(pos, "unterminated string literal"));
                }
                push!(Tok::Str(s), pos);
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                    col += 1;
                }
                let word: String = bytes[start..i].iter().collect();
                match word.parse::<i64>() {
                    Ok(v) => push!(Tok::Int(v), pos),
                    Err(_) => diags.push(Diagnostic::error(pos, format!("integer literal out of range: {word}"))),
                }
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                    col += 1;
                }
                let word: String = bytes[start..i].iter().collect();
                match keyword(&word) {
                    Some(kw) => push!(Tok::Kw(kw), pos),
                    None => push!(Tok::Ident(word), pos),
                }
            }
            _ => {
                let two: String = bytes[i..(i + 2).min(bytes.len())].iter().collect();
                let (punct, len) = match two.as_str() {
                    "<=" => (Some(Punct::Le), 2),
                    ">=" => (Some(Punct::Ge), 2),
                    "==" => (Some(Punct::EqEq), 2),
                    "!=" => (Some(Punct::Ne), 2),
                    _ => {
                        let p = match c {
                            '{' => Some(Punct::LBrace),
                            '}' => Some(Punct::RBrace),
                            '(' => Some(Punct::LParen),
                            ')' => Some(Punct::RParen),
                            ',' => Some(Punct::Comma),
                            ';' => Some(Punct::Semi),
                            ':' => Some(Punct::Colon),
                            '.' => Some(Punct::Dot),
                            '=' => Some(Punct::Assign),
                            '+' => Some(Punct::Plus),
                            '-' => Some(Punct::Minus),
                            '*' => Some(Punct::Star),
                            '/' => Some(Punct::Slash),
                            '<' => Some(Punct::Lt),
                            '>' => Some(Punct::Gt),
                            _ => None,
                        };
                        (p, 1)
                    }
                };
                match punct {
                    Some(p) => {
                        push!(Tok::Punct(p), pos);
                        i += len;
                        col += len;
                    }
                    None => {
                        diags.push(Diagnostic::error(pos, format!("unexpected character '{c}'")));
                        i += 1;
                        col += 1;
                    }
                }
            }
        }
    }
    tokens.push(Token { tok: Tok::Eof, pos: Pos { line, col } });
    (tokens, diags)
}
