//! S-expression reader with source positions.

use std::fmt;

use super::PddlError;

/// 1-based line/column of a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SExpr {
    Atom { text: String, pos: Pos },
    List { items: Vec<SExpr>, pos: Pos },
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Atom { pos, .. } | SExpr::List { pos, .. } => *pos,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom { text, .. } => Some(text),
            SExpr::List { .. } => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List { items, .. } => Some(items),
            SExpr::Atom { .. } => None,
        }
    }

    /// Head symbol of a non-empty list whose first item is an atom.
    pub fn head(&self) -> Option<&str> {
        self.as_list()?.first()?.as_atom()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open(Pos),
    Close(Pos),
    Atom(String, Pos),
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    for (line_idx, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find(';') {
            Some(cut) => &raw_line[..cut],
            None => raw_line,
        };
        let mut current = String::new();
        let mut start = Pos::default();
        for (col_idx, ch) in line.chars().enumerate() {
            let pos = Pos {
                line: line_idx + 1,
                col: col_idx + 1,
            };
            if ch == '(' || ch == ')' || ch.is_whitespace() {
                if !current.is_empty() {
                    tokens.push(Token::Atom(std::mem::take(&mut current), start));
                }
                match ch {
                    '(' => tokens.push(Token::Open(pos)),
                    ')' => tokens.push(Token::Close(pos)),
                    _ => {}
                }
            } else {
                if current.is_empty() {
                    start = pos;
                }
                current.extend(ch.to_lowercase());
            }
        }
        if !current.is_empty() {
            tokens.push(Token::Atom(current, start));
        }
    }
    tokens
}

/// Reads exactly one top-level expression; trailing tokens are an error.
pub fn read(text: &str) -> Result<SExpr, PddlError> {
    let tokens = tokenize(text);
    let mut stack: Vec<(Pos, Vec<SExpr>)> = Vec::new();
    let mut done: Option<SExpr> = None;

    for token in tokens {
        if done.is_some() {
            let pos = match token {
                Token::Open(p) | Token::Close(p) | Token::Atom(_, p) => p,
            };
            return Err(PddlError::syntax(pos, "unexpected content after the top-level form"));
        }
        match token {
            Token::Open(pos) => stack.push((pos, Vec::new())),
            Token::Close(pos) => {
                let (open, items) = stack
                    .pop()
                    .ok_or_else(|| PddlError::syntax(pos, "unbalanced ')'"))?;
                let list = SExpr::List { items, pos: open };
                match stack.last_mut() {
                    Some((_, parent)) => parent.push(list),
                    None => done = Some(list),
                }
            }
            Token::Atom(text, pos) => match stack.last_mut() {
                Some((_, parent)) => parent.push(SExpr::Atom { text, pos }),
                None => {
                    return Err(PddlError::syntax(pos, format!("expected '(' but found '{text}'")))
                }
            },
        }
    }
    if let Some((open, _)) = stack.last() {
        return Err(PddlError::syntax(*open, "unclosed '('"));
    }
    done.ok_or_else(|| PddlError::syntax(Pos { line: 1, col: 1 }, "empty input"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_are_stripped_and_case_folded() {
        let expr = read("(Define ; a comment (with parens\n  (Domain X))").unwrap();
        let items = expr.as_list().unwrap();
        assert_eq!(items[0].as_atom(), Some("define"));
        assert_eq!(items[1].head(), Some("domain"));
        assert_eq!(items[1].as_list().unwrap()[1].as_atom(), Some("x"));
        assert_eq!(items[1].pos(), Pos { line: 2, col: 3 });
    }

    #[test]
    fn unbalanced_input_reports_position() {
        let err = read("(a (b c)").unwrap_err();
        assert_eq!(err.pos(), Some(Pos { line: 1, col: 1 }));
        let err = read("(a))").unwrap_err();
        assert_eq!(err.pos(), Some(Pos { line: 1, col: 4 }));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(read("  ; nothing\n").is_err());
    }
}
