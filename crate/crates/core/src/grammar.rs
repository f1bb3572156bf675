//! Text forms for constraints, evidence and events.
//!
//! ```text
//! constraint := term ('>=' | '<=') number
//!             | term ('-' | '/') term '>=' number
//! term       := 'P' '(' name '=' name ')'
//! evidence   := [name '=' name (',' name '=' name)*]
//! ```
//!
//! Names are runs of ASCII letters, digits, `_` and `.`. Whitespace is
//! ignored. Errors carry the byte offset of the offending token.

use crate::error::{Error, Result};
use crate::instantiation::{Event, Evidence};
use crate::tuner::{Constraint, ConstraintKind};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    LParen,
    RParen,
    Equals,
    Minus,
    Plus,
    Slash,
    AtLeast,
    AtMost,
    Comma,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Word(w) => format!("`{w}`"),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::Equals => "`=`".into(),
            Token::Minus => "`-`".into(),
            Token::Plus => "`+`".into(),
            Token::Slash => "`/`".into(),
            Token::AtLeast => "`>=`".into(),
            Token::AtMost => "`<=`".into(),
            Token::Comma => "`,`".into(),
        }
    }
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

fn lex(input: &str) -> Result<Vec<(usize, Token)>> {
    let mut tokens = Vec::new();
    let mut chars = input.char_indices().peekable();
    while let Some((pos, c)) = chars.next() {
        let token = match c {
            c if c.is_whitespace() => continue,
            '(' => Token::LParen,
            ')' => Token::RParen,
            '=' => Token::Equals,
            '-' => Token::Minus,
            '+' => Token::Plus,
            '/' => Token::Slash,
            ',' => Token::Comma,
            '>' | '<' => {
                if chars.next_if(|&(_, n)| n == '=').is_none() {
                    return Err(Error::Grammar {
                        position: pos,
                        message: format!("expected `{c}=`"),
                    });
                }
                if c == '>' {
                    Token::AtLeast
                } else {
                    Token::AtMost
                }
            }
            c if is_name_char(c) => {
                let mut word = String::from(c);
                while let Some((_, n)) = chars.next_if(|&(_, n)| is_name_char(n)) {
                    word.push(n);
                }
                Token::Word(word)
            }
            other => {
                return Err(Error::Grammar {
                    position: pos,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        tokens.push((pos, token));
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    next: usize,
    end: usize,
}

impl Parser {
    fn new(input: &str) -> Result<Self> {
        Ok(Self {
            tokens: lex(input)?,
            next: 0,
            end: input.len(),
        })
    }

    fn position(&self) -> usize {
        self.tokens.get(self.next).map_or(self.end, |(p, _)| *p)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Grammar {
            position: self.position(),
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.next).map(|(_, t)| t)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.next).map(|(_, t)| t.clone());
        self.next += 1;
        t
    }

    fn expect(&mut self, want: Token) -> Result<()> {
        match self.peek() {
            Some(t) if *t == want => {
                self.next += 1;
                Ok(())
            }
            Some(t) => {
                let msg = format!("expected {}, found {}", want.describe(), t.describe());
                self.error(msg)
            }
            None => self.error(format!("expected {}, found end of input", want.describe())),
        }
    }

    fn name(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(Token::Word(w)) => {
                let w = w.clone();
                self.next += 1;
                Ok(w)
            }
            Some(t) => {
                let msg = format!("expected {what}, found {}", t.describe());
                self.error(msg)
            }
            None => self.error(format!("expected {what}, found end of input")),
        }
    }

    fn event(&mut self) -> Result<Event> {
        let variable = self.name("a variable name")?;
        self.expect(Token::Equals)?;
        let state = self.name("a state name")?;
        Ok(Event::new(variable, state))
    }

    fn term(&mut self) -> Result<Event> {
        match self.peek() {
            Some(Token::Word(w)) if w == "P" => self.next += 1,
            _ => return self.error("expected `P(`"),
        }
        self.expect(Token::LParen)?;
        let event = self.event()?;
        self.expect(Token::RParen)?;
        Ok(event)
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.position();
        let negative = match self.peek() {
            Some(Token::Minus) => {
                self.next += 1;
                true
            }
            Some(Token::Plus) => {
                self.next += 1;
                false
            }
            _ => false,
        };
        let word = self.name("a number")?;
        match word.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(if negative { -v } else { v }),
            _ => Err(Error::Grammar {
                position: start,
                message: format!("`{word}` is not a number"),
            }),
        }
    }

    fn finish(&mut self) -> Result<()> {
        match self.peek() {
            None => Ok(()),
            Some(t) => {
                let msg = format!("unexpected {} after the end", t.describe());
                self.error(msg)
            }
        }
    }
}

pub fn parse_constraint(input: &str) -> Result<Constraint> {
    let mut p = Parser::new(input)?;
    let y = p.term()?;
    let operator_at = p.position();
    let constraint = match p.bump() {
        Some(Token::AtLeast) => Constraint::at_least(y, p.number()?),
        Some(Token::AtMost) => Constraint::at_most(y, p.number()?),
        Some(op @ (Token::Minus | Token::Slash)) => {
            let z = p.term()?;
            p.expect(Token::AtLeast)?;
            let eps = p.number()?;
            let kind = if op == Token::Minus {
                ConstraintKind::Difference
            } else {
                ConstraintKind::Ratio
            };
            Constraint::new(kind, y, Some(z), eps)
        }
        other => {
            return Err(Error::Grammar {
                position: operator_at,
                message: match other {
                    Some(t) => format!("expected `>=`, `<=`, `-` or `/`, found {}", t.describe()),
                    None => "expected `>=`, `<=`, `-` or `/`, found end of input".into(),
                },
            })
        }
    };
    p.finish()?;
    constraint
}

/// Comma-separated `VAR=STATE` pairs; empty input is empty evidence.
pub fn parse_evidence(input: &str) -> Result<Evidence> {
    let mut p = Parser::new(input)?;
    let mut evidence = Evidence::new();
    if p.peek().is_none() {
        return Ok(evidence);
    }
    loop {
        let at = p.position();
        let event = p.event()?;
        if evidence.contains(&event.variable) {
            return Err(Error::Grammar {
                position: at,
                message: format!("variable `{}` is assigned more than once", event.variable),
            });
        }
        evidence.insert(event)?;
        match p.bump() {
            None => return Ok(evidence),
            Some(Token::Comma) => continue,
            Some(t) => {
                p.next -= 1;
                return p.error(format!("expected `,`, found {}", t.describe()));
            }
        }
    }
}

/// A single `VAR=STATE`.
pub fn parse_event(input: &str) -> Result<Event> {
    let mut p = Parser::new(input)?;
    let event = p.event()?;
    p.finish()?;
    Ok(event)
}
