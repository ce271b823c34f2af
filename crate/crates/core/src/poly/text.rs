//! Plain-text polynomial format: a sum of terms `c*x1^a*x2^b`, variables
//! named `x1..xn`, whitespace ignored. The printer emits shortest
//! round-trip float representations, so `parse(print(p)) == p`.

use std::fmt;

use super::{Monomial, PolyError, Polynomial};

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms().enumerate() {
            let mag = c.abs();
            if k == 0 {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else if c < 0.0 {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if m.is_constant() {
                write_coeff(f, mag)?;
            } else if mag == 1.0 {
                write!(f, "{m}")?;
            } else {
                write_coeff(f, mag)?;
                write!(f, "*{m}")?;
            }
        }
        Ok(())
    }
}

fn write_coeff(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if (1e-4..1e15).contains(&c) {
        write!(f, "{c}")
    } else {
        write!(f, "{c:e}")
    }
}

/// Parses the text format into a polynomial over `nvars` variables.
pub fn parse_polynomial(text: &str, nvars: usize) -> Result<Polynomial, PolyError> {
    let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
    let mut p = Parser {
        chars,
        pos: 0,
        nvars,
        src: text,
    };
    p.polynomial()
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    nvars: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn err(&self, msg: impl Into<String>) -> PolyError {
        PolyError::Parse {
            input: self.src.to_string(),
            message: format!("{} (at offset {})", msg.into(), self.pos),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn polynomial(&mut self) -> Result<Polynomial, PolyError> {
        if self.chars.is_empty() {
            return Err(self.err("empty polynomial"));
        }
        let mut terms = Vec::new();
        let mut sign = 1.0;
        match self.peek() {
            Some('-') => {
                sign = -1.0;
                self.pos += 1;
            }
            Some('+') => self.pos += 1,
            _ => {}
        }
        loop {
            let (c, m) = self.term()?;
            terms.push((m, sign * c));
            match self.peek() {
                None => break,
                Some('+') => sign = 1.0,
                Some('-') => sign = -1.0,
                Some(ch) => return Err(self.err(format!("unexpected '{ch}'"))),
            }
            self.pos += 1;
        }
        Ok(Polynomial::from_terms(self.nvars, terms))
    }

    fn term(&mut self) -> Result<(f64, Monomial), PolyError> {
        let mut coeff = 1.0;
        let mut exps = vec![0u32; self.nvars];
        loop {
            match self.peek() {
                Some('x') => {
                    self.pos += 1;
                    let idx = self.integer()?;
                    if idx == 0 || idx as usize > self.nvars {
                        return Err(self.err(format!(
                            "variable x{idx} out of range 1..={}",
                            self.nvars
                        )));
                    }
                    let mut e = 1;
                    if self.peek() == Some('^') {
                        self.pos += 1;
                        e = self.integer()?;
                    }
                    exps[idx as usize - 1] += e;
                }
                Some(ch) if ch.is_ascii_digit() || ch == '.' => coeff *= self.number()?,
                _ => return Err(self.err("expected a number or variable")),
            }
            if self.peek() == Some('*') {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok((coeff, Monomial::new(exps)))
    }

    fn integer(&mut self) -> Result<u32, PolyError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected an integer"));
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse().map_err(|_| self.err("integer overflow"))
    }

    fn number(&mut self) -> Result<f64, PolyError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.') {
            self.pos += 1;
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            self.pos += 1;
            if matches!(self.peek(), Some('+' | '-')) {
                self.pos += 1;
            }
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse()
            .map_err(|_| self.err(format!("malformed number '{s}'")))
    }
}
