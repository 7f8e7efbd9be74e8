//! A minimal s-expression reader for the PDDL subset this crate emits.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SExpr {
    Atom(String),
    List(Vec<SExpr>),
}

impl SExpr {
    pub fn as_atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(a) => Some(a),
            SExpr::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(l) => Some(l),
            SExpr::Atom(_) => None,
        }
    }

    /// Head atom of a list, lower-cased.
    pub fn head(&self) -> Option<String> {
        self.as_list()?.first()?.as_atom().map(str::to_ascii_lowercase)
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Atom(a) => f.write_str(a),
            SExpr::List(items) => {
                f.write_str("(")?;
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{it}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Parses every top-level expression; `;` starts a comment to end of line.
pub fn parse_all(text: &str) -> Result<Vec<SExpr>> {
    let mut stack: Vec<Vec<SExpr>> = vec![Vec::new()];
    let mut line = 1;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                line += 1;
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            ';' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '(' => {
                chars.next();
                stack.push(Vec::new());
            }
            ')' => {
                chars.next();
                if stack.len() == 1 {
                    return Err(Error::Format(format!("line {line}: unmatched `)`")));
                }
                let list = stack.pop().unwrap();
                stack.last_mut().unwrap().push(SExpr::List(list));
            }
            _ => {
                let mut atom = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    atom.push(c);
                    chars.next();
                }
                stack.last_mut().unwrap().push(SExpr::Atom(atom));
            }
        }
    }
    if stack.len() != 1 {
        return Err(Error::Format(format!("{} unclosed `(` at end of input", stack.len() - 1)));
    }
    Ok(stack.pop().unwrap())
}

/// Parses exactly one top-level expression.
pub fn parse_one(text: &str) -> Result<SExpr> {
    let mut all = parse_all(text)?;
    if all.len() != 1 {
        return Err(Error::Format(format!("expected one expression, found {}", all.len())));
    }
    Ok(all.pop().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_lists_and_comments() {
        let e = parse_one("(a (b c) ; note\n d)").unwrap();
        assert_eq!(e.to_string(), "(a (b c) d)");
    }

    #[test]
    fn unbalanced_is_rejected() {
        assert!(parse_all("(a (b)").is_err());
        assert!(parse_all("a)").is_err());
    }
}
