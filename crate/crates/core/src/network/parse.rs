//! Line-oriented `.rxn` reaction file format.
//!
//! ```text
//! # comment
//! species A D=1.0
//! species B D=0.5
//! species C D=0.1
//! A + B <-> C : kf=1.0, kb=0.5
//! 2 A -> B : kf=3e-2
//! ```
//!
//! `->` declares an irreversible reaction (`kb = 0`, no `kb=` allowed);
//! `<->` requires both constants. A term is `[INT] NAME`; repeated names on
//! one side accumulate. A side written as a lone `0` is empty (`0 -> A`).
//! Species may be declared anywhere in the file and are indexed in
//! declaration order.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use super::{is_valid_name, NetworkError, Reaction, ReactionNetwork};

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str, line: usize) -> Self {
        Self { text, pos: 0, line }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn column(&self) -> usize {
        self.text[..self.pos].chars().count() + 1
    }

    fn error(&self, message: impl Into<String>) -> NetworkError {
        NetworkError::Syntax {
            line: self.line,
            column: self.column(),
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.text.len() - trimmed.len();
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.rest().is_empty()
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), NetworkError> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{token}`")))
        }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        let rest = self.rest();
        let len = rest.find(|c| !pred(c)).unwrap_or(rest.len());
        self.pos += len;
        &rest[..len]
    }

    fn name(&mut self) -> Result<(&'a str, usize), NetworkError> {
        self.skip_ws();
        let column = self.column();
        if !self.rest().starts_with(|c: char| c.is_ascii_alphabetic()) {
            return Err(self.error("expected a species name"));
        }
        let name = self.take_while(|c| c.is_ascii_alphanumeric() || c == '_');
        Ok((name, column))
    }

    fn float(&mut self) -> Result<f64, NetworkError> {
        self.skip_ws();
        let start = self.pos;
        let column = self.column();
        let lexeme =
            self.take_while(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-'));
        match lexeme.parse::<f64>() {
            Ok(v) if v.is_finite() && !lexeme.is_empty() => Ok(v),
            _ => {
                self.pos = start;
                Err(NetworkError::Syntax {
                    line: self.line,
                    column,
                    message: format!("expected a number, found `{}`", first_token(self.rest())),
                })
            }
        }
    }
}

fn first_token(s: &str) -> &str {
    let end = s.find(char::is_whitespace).unwrap_or(s.len());
    &s[..end]
}

struct PendingReaction<'a> {
    line: usize,
    left: Vec<(u32, &'a str, usize)>,
    right: Vec<(u32, &'a str, usize)>,
    kf: f64,
    kb: f64,
}

fn parse_side<'a>(cur: &mut Cursor<'a>) -> Result<Vec<(u32, &'a str, usize)>, NetworkError> {
    let mut terms = Vec::new();
    cur.skip_ws();
    if let Some(after) = cur.rest().strip_prefix('0') {
        let after = after.trim_start();
        if after.is_empty()
            || after.starts_with("->")
            || after.starts_with("<->")
            || after.starts_with(':')
        {
            cur.pos += 1;
            return Ok(terms);
        }
    }
    loop {
        cur.skip_ws();
        let coefficient = if cur.rest().starts_with(|c: char| c.is_ascii_digit()) {
            let digits = cur.take_while(|c| c.is_ascii_digit());
            digits
                .parse::<u32>()
                .map_err(|_| cur.error("stoichiometric coefficient out of range"))?
        } else {
            1
        };
        let (name, column) = cur.name()?;
        terms.push((coefficient, name, column));
        cur.skip_ws();
        // `+` separates terms; `+` followed by nothing that starts a term is an error
        if !cur.eat("+") {
            break;
        }
    }
    Ok(terms)
}

fn parse_reaction_line<'a>(cur: &mut Cursor<'a>) -> Result<PendingReaction<'a>, NetworkError> {
    let line = cur.line;
    let left = parse_side(cur)?;
    let reversible = if cur.eat("<->") {
        true
    } else if cur.eat("->") {
        false
    } else {
        return Err(cur.error("expected `<->` or `->`"));
    };
    let right = parse_side(cur)?;
    cur.expect(":")?;
    cur.expect("kf")?;
    cur.expect("=")?;
    let kf_col = {
        cur.skip_ws();
        cur.column()
    };
    let kf = cur.float()?;
    let kb = if cur.eat(",") {
        cur.expect("kb")?;
        cur.expect("=")?;
        cur.skip_ws();
        let col = cur.column();
        let kb = cur.float()?;
        if !reversible {
            return Err(NetworkError::Syntax {
                line,
                column: col,
                message: "`kb` given for an irreversible `->` reaction".to_string(),
            });
        }
        if kb < 0.0 {
            return Err(NetworkError::Syntax {
                line,
                column: col,
                message: format!("negative rate constant kb={kb}"),
            });
        }
        kb
    } else {
        if reversible {
            return Err(cur.error("reversible `<->` reaction needs `, kb=`"));
        }
        0.0
    };
    if kf < 0.0 {
        return Err(NetworkError::Syntax {
            line,
            column: kf_col,
            message: format!("negative rate constant kf={kf}"),
        });
    }
    if !cur.at_end() {
        return Err(cur.error("unexpected trailing input"));
    }
    Ok(PendingReaction {
        line,
        left,
        right,
        kf,
        kb,
    })
}

/// Parses `.rxn` text into a validated network.
pub fn parse_network(text: &str) -> Result<ReactionNetwork, NetworkError> {
    let mut species: Vec<(String, f64)> = Vec::new();
    let mut pending = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let mut cur = Cursor::new(content, line);
        if cur.at_end() {
            continue;
        }
        let is_species = {
            let rest = cur.rest();
            rest.starts_with("species") && rest["species".len()..].starts_with(char::is_whitespace)
        };
        if is_species {
            cur.expect("species")?;
            let (name, _) = cur.name()?;
            cur.expect("D")?;
            cur.expect("=")?;
            let d = cur.float()?;
            if !cur.at_end() {
                return Err(cur.error("unexpected trailing input"));
            }
            if species.iter().any(|(n, _)| n == name) {
                return Err(NetworkError::DuplicateSpecies(name.to_string()));
            }
            if d <= 0.0 {
                return Err(NetworkError::InvalidDiffusion {
                    name: name.to_string(),
                    value: d,
                });
            }
            species.push((name.to_string(), d));
        } else {
            pending.push(parse_reaction_line(&mut cur)?);
        }
    }

    let n = species.len();
    let lookup = |name: &str, line: usize| {
        species
            .iter()
            .position(|(s, _)| s == name)
            .ok_or_else(|| NetworkError::UnknownSpecies {
                line,
                name: name.to_string(),
            })
    };
    let mut reactions = Vec::with_capacity(pending.len());
    for p in &pending {
        let mut mu = vec![0u32; n];
        let mut nu = vec![0u32; n];
        for (target, side) in [(&mut mu, &p.left), (&mut nu, &p.right)] {
            for &(c, name, _) in side.iter() {
                let idx = lookup(name, p.line)?;
                target[idx] = target[idx].saturating_add(c);
            }
        }
        reactions.push(Reaction::new(mu, nu, p.kf, p.kb));
    }
    ReactionNetwork::new(species, reactions)
}

fn render_side(out: &mut String, network: &ReactionNetwork, coefficients: &[u32]) {
    let mut first = true;
    for (s, &c) in network.species().iter().zip(coefficients) {
        if c == 0 {
            continue;
        }
        if !first {
            out.push_str(" + ");
        }
        first = false;
        if c > 1 {
            let _ = write!(out, "{c} ");
        }
        out.push_str(&s.name);
    }
    if first {
        out.push('0');
    }
}

/// Canonical text form; `parse_network(&render_network(n)) == Ok(n)`.
pub fn render_network(network: &ReactionNetwork) -> String {
    let mut out = String::new();
    for s in network.species() {
        debug_assert!(is_valid_name(&s.name));
        let _ = writeln!(out, "species {} D={:?}", s.name, s.diffusion);
    }
    for r in network.reactions() {
        render_side(&mut out, network, &r.mu);
        if r.kb > 0.0 {
            out.push_str(" <-> ");
        } else {
            out.push_str(" -> ");
        }
        render_side(&mut out, network, &r.nu);
        let _ = write!(out, " : kf={:?}", r.kf);
        if r.kb > 0.0 {
            let _ = write!(out, ", kb={:?}", r.kb);
        }
        out.push('\n');
    }
    out
}
