//! Text grammars for frequencies, potentials, phases and energies.
//!
//! ```text
//! frequency := dec:<digits> | surd:(a+b*sqrt(d))/c | cf:[a1,a2,...]
//!            | liouville:beta=<x>,depth=<k>,budget=<digits>
//! potential := const:<c> | saw | cos:lambda=<λ> | maryland:lambda=<λ>
//!            | tanmono:lambda=<λ> | steps:[(x0,v0),(x1,v1),...] | table:<path>
//! phase     := <decimal> | <p>/<q>
//! energy    := <real> | box-mid:k=<k>
//! ```

use std::fmt;
use std::path::Path;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use qpgordon_core::contfrac::FrequencySpec;
use qpgordon_core::periodic::{Direction, PeriodicFunction, TableRow};

/// A parse failure with the character offset where it happened.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub input: String,
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} at position {}", self.message, self.position)?;
        writeln!(f, "  {}", self.input)?;
        write!(f, "  {}^", " ".repeat(self.position))
    }
}

pub type ParseResult<T> = Result<T, ParseError>;

struct Cursor<'a> {
    input: &'a str,
    chars: Vec<char>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(input: &'a str) -> Self {
        Cursor {
            input,
            chars: input.chars().collect(),
            pos: 0,
        }
    }

    fn error_at<T>(&self, pos: usize, message: impl Into<String>) -> ParseResult<T> {
        Err(ParseError {
            input: self.input.to_string(),
            position: pos,
            message: message.into(),
        })
    }

    fn error<T>(&self, message: impl Into<String>) -> ParseResult<T> {
        self.error_at(self.pos, message)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> ParseResult<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.error(format!("expected '{c}'"))
        }
    }

    fn eat_word(&mut self, word: &str) -> bool {
        self.skip_ws();
        let w: Vec<char> = word.chars().collect();
        if self.chars[self.pos..].starts_with(&w) {
            self.pos += w.len();
            true
        } else {
            false
        }
    }

    fn rest(&self) -> String {
        self.chars[self.pos..].iter().collect()
    }

    fn finish(&mut self) -> ParseResult<()> {
        self.skip_ws();
        if self.pos < self.chars.len() {
            self.error("unexpected trailing input")
        } else {
            Ok(())
        }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> (usize, String) {
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(&pred) {
            self.pos += 1;
        }
        (start, self.chars[start..self.pos].iter().collect())
    }

    fn unsigned(&mut self) -> ParseResult<BigUint> {
        let (start, digits) = self.take_while(|c| c.is_ascii_digit());
        if digits.is_empty() {
            return self.error_at(start, "expected an integer");
        }
        Ok(digits.parse().expect("ascii digits"))
    }

    fn usize(&mut self) -> ParseResult<usize> {
        let start = self.pos;
        let v = self.unsigned()?;
        match usize::try_from(v) {
            Ok(v) => Ok(v),
            Err(_) => self.error_at(start, "integer out of range"),
        }
    }

    /// A decimal literal kept as text, so it can also be read exactly.
    fn decimal_text(&mut self) -> ParseResult<(usize, String)> {
        let (start, text) = self.take_while(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'));
        if text.is_empty() {
            return self.error_at(start, "expected a number");
        }
        Ok((start, text))
    }

    fn real(&mut self) -> ParseResult<f64> {
        let (start, text) = self.decimal_text()?;
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => self.error_at(start, format!("not a finite number: {text:?}")),
        }
    }

    /// `key=value` pairs separated by commas, in any order.
    fn key_values(&mut self, keys: &[&str]) -> ParseResult<Vec<(String, usize)>> {
        let mut seen = Vec::new();
        loop {
            let (start, key) = self.take_while(|c| c.is_ascii_alphanumeric() || c == '_');
            if !keys.contains(&key.as_str()) {
                return self.error_at(start, format!("expected one of {}", keys.join(", ")));
            }
            if seen.iter().any(|(k, _)| *k == key) {
                return self.error_at(start, format!("duplicate key {key}"));
            }
            self.expect('=')?;
            seen.push((key, self.pos));
            // The caller parses the value; skip to the next separator here.
            while self.peek().is_some_and(|c| c != ',') {
                self.pos += 1;
            }
            if !self.eat(',') {
                return Ok(seen);
            }
        }
    }
}

fn signed_integer(c: &mut Cursor) -> ParseResult<BigInt> {
    let neg = c.eat('-');
    if !neg {
        c.eat('+');
    }
    let v = BigInt::from(c.unsigned()?);
    Ok(if neg { -v } else { v })
}

/// Parses a frequency spec.
pub fn parse_frequency(input: &str) -> ParseResult<FrequencySpec> {
    let mut c = Cursor::new(input);
    let spec = if c.eat_word("dec:") {
        let start = c.pos;
        let (_, text) = c.take_while(|ch| ch.is_ascii_digit() || ch == '.');
        if text.is_empty() || text.chars().filter(|&ch| ch == '.').count() > 1 {
            return c.error_at(start, "expected decimal digits such as 0.618");
        }
        FrequencySpec::decimal(&text, None).map_err(|e| ParseError {
            input: input.to_string(),
            position: start,
            message: e.to_string(),
        })?
    } else if c.eat_word("surd:") {
        surd(&mut c)?
    } else if c.eat_word("cf:") {
        c.expect('[')?;
        let mut qs = Vec::new();
        loop {
            let start = c.pos;
            let a = c.unsigned()?;
            if a.is_zero() {
                return c.error_at(start, "partial quotients must be positive");
            }
            qs.push(a);
            if !c.eat(',') {
                break;
            }
        }
        c.expect(']')?;
        FrequencySpec::Quotients(qs)
    } else if c.eat_word("liouville:") {
        liouville(&mut c)?
    } else {
        return c.error("expected dec:, surd:, cf: or liouville:");
    };
    c.finish()?;
    Ok(spec)
}

fn liouville(c: &mut Cursor) -> ParseResult<FrequencySpec> {
    let body = c.pos;
    let keys = c.key_values(&["beta", "depth", "budget"])?;
    let end = c.pos;
    let (mut beta, mut depth, mut budget) = (None, 3, 10_000);
    for (key, at) in keys {
        c.pos = at;
        match key.as_str() {
            "beta" => {
                let v = c.real()?;
                if v <= 0.0 {
                    return c.error_at(at, "beta must be positive");
                }
                beta = Some(v);
            }
            "depth" => depth = c.usize()?,
            _ => budget = c.usize()?,
        }
        c.skip_ws();
        if !matches!(c.peek(), None | Some(',')) {
            return c.error("unexpected character in value");
        }
    }
    c.pos = end;
    let Some(beta) = beta else {
        return c.error_at(body, "missing beta=<x>");
    };
    Ok(FrequencySpec::Liouville { beta, depth, budget })
}

/// `(a + b*sqrt(d))/c` with the terms in any order and `/c` optional.
fn surd(c: &mut Cursor) -> ParseResult<FrequencySpec> {
    let start = c.pos;
    let paren = c.eat('(');
    let (mut a, mut b, mut d): (BigInt, BigInt, Option<BigUint>) = (BigInt::zero(), BigInt::zero(), None);
    let mut first = true;
    loop {
        c.skip_ws();
        let sign = if c.eat('-') {
            -1
        } else if c.eat('+') || first {
            1
        } else {
            break;
        };
        first = false;
        c.skip_ws();
        let coef = if c.peek().is_some_and(|ch| ch.is_ascii_digit()) {
            Some(BigInt::from(c.unsigned()?))
        } else {
            None
        };
        let radical = if coef.is_none() || c.eat('*') {
            if !c.eat_word("sqrt") {
                return c.error("expected sqrt(d)");
            }
            c.expect('(')?;
            let at = c.pos;
            let rad = c.unsigned()?;
            if d.as_ref().is_some_and(|old| *old != rad) {
                return c.error_at(at, "only one radicand is supported");
            }
            d = Some(rad);
            c.expect(')')?;
            true
        } else {
            false
        };
        let v = coef.unwrap_or_else(BigInt::one) * sign;
        if radical {
            b += v;
        } else {
            a += v;
        }
    }
    if paren {
        c.expect(')')?;
    }
    let den = if c.eat('/') {
        let at = c.pos;
        let v = signed_integer(c)?;
        if v.is_zero() {
            return c.error_at(at, "division by zero");
        }
        v
    } else {
        BigInt::one()
    };
    let Some(d) = d else {
        return c.error_at(start, "a surd needs a sqrt(d) term");
    };
    Ok(FrequencySpec::Surd { a, b, d, c: den })
}

fn lambda(c: &mut Cursor) -> ParseResult<f64> {
    if !c.eat_word("lambda") {
        return c.error("expected lambda=<value>");
    }
    c.expect('=')?;
    c.real()
}

/// Parses a potential spec; `table:` paths are resolved against `base`.
pub fn parse_potential(input: &str, base: &Path) -> ParseResult<PeriodicFunction> {
    let mut c = Cursor::new(input);
    let f = if c.eat_word("const:") {
        PeriodicFunction::constant(c.real()?)
    } else if c.eat_word("cos:") {
        PeriodicFunction::cosine(lambda(&mut c)?)
    } else if c.eat_word("maryland:") {
        PeriodicFunction::maryland(lambda(&mut c)?)
    } else if c.eat_word("tanmono:") {
        PeriodicFunction::tan_monotone(lambda(&mut c)?)
    } else if c.eat_word("steps:") {
        let start = c.pos;
        c.expect('[')?;
        let mut steps = Vec::new();
        loop {
            c.expect('(')?;
            let x = c.real()?;
            c.expect(',')?;
            let v = c.real()?;
            c.expect(')')?;
            steps.push((x, v));
            if !c.eat(',') {
                break;
            }
        }
        c.expect(']')?;
        PeriodicFunction::steps(steps).or_else(|e| c.error_at(start, e.to_string()))?
    } else if c.eat_word("table:") {
        let start = c.pos;
        let path = c.rest();
        c.pos = c.chars.len();
        let path = base.join(path.trim());
        let rows = read_table(&path).or_else(|m| c.error_at(start, m))?;
        PeriodicFunction::table(rows, path.display().to_string()).or_else(|e| c.error_at(start, e.to_string()))?
    } else if c.eat_word("saw") {
        PeriodicFunction::sawtooth()
    } else {
        return c.error("expected const:, saw, cos:, maryland:, tanmono:, steps: or table:");
    };
    c.finish()?;
    Ok(f)
}

#[derive(serde::Deserialize)]
struct RawRow {
    x: f64,
    value: f64,
    direction: String,
}

fn read_table(path: &Path) -> Result<Vec<TableRow>, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("cannot read table {}: {e}", path.display()))?;
    let mut rows = Vec::new();
    for (line, rec) in rdr.deserialize::<RawRow>().enumerate() {
        let r = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        let direction = match r.direction.to_ascii_lowercase().as_str() {
            "up" => Direction::Up,
            "down" => Direction::Down,
            "flat" => Direction::Flat,
            other => return Err(format!("{} row {}: direction {other:?} is not up, down or flat", path.display(), line + 2)),
        };
        rows.push(TableRow {
            x: r.x,
            value: r.value,
            direction,
        });
    }
    Ok(rows)
}

/// An exact phase written as a decimal or as `p/q`.
pub fn parse_rational(input: &str) -> ParseResult<BigRational> {
    let mut c = Cursor::new(input);
    let neg = c.eat('-');
    let (start, int_part) = c.take_while(|ch| ch.is_ascii_digit());
    let value = if c.eat('/') {
        if int_part.is_empty() {
            return c.error_at(start, "expected a numerator");
        }
        let at = c.pos;
        let den = c.unsigned()?;
        if den.is_zero() {
            return c.error_at(at, "division by zero");
        }
        BigRational::new(int_part.parse().expect("digits"), BigInt::from(den))
    } else {
        let frac_part = if c.peek() == Some('.') {
            c.pos += 1;
            c.take_while(|ch| ch.is_ascii_digit()).1
        } else {
            String::new()
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return c.error_at(start, "expected a decimal or p/q");
        }
        let mantissa: BigInt = format!("0{int_part}{frac_part}").parse().expect("digits");
        BigRational::new(mantissa, BigInt::from(10u32).pow(frac_part.len() as u32))
    };
    c.finish()?;
    Ok(if neg { -value } else { value })
}

/// An energy: a number, or the middle eigenvalue of the box with `N = q_k`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum EnergyChoice {
    Value(f64),
    BoxMid { k: usize },
}

pub fn parse_energy(input: &str) -> ParseResult<EnergyChoice> {
    let mut c = Cursor::new(input);
    let e = if c.eat_word("box-mid:") {
        if !c.eat_word("k") {
            return c.error("expected k=<index>");
        }
        c.expect('=')?;
        EnergyChoice::BoxMid { k: c.usize()? }
    } else {
        EnergyChoice::Value(c.real()?)
    };
    c.finish()?;
    Ok(e)
}
