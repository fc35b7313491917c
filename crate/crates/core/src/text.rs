//! Canonical text form and JSON form of traits and allocations.
//!
//! Text: traits are printed as their sorted index list with repetition and an
//! allocation lists its traits in lexicographic order, e.g.
//! `{{1,1,4},{1},{3,3}}`. The empty allocation prints as `∅`. The parser is
//! whitespace-insensitive and also accepts `{}` for the empty allocation.
//!
//! JSON: `{"horizon": N, "traits": [[[index, multiplicity], …], …]}` with
//! traits in lexicographic order and repeated traits listed repeatedly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::alloc::{OrderedTraitAllocation, Trait, TraitAllocation};
use crate::error::{Error, Result};

pub const EMPTY_SYMBOL: &str = "∅";

impl fmt::Display for Trait {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (pos, i) in self.indices().enumerate() {
            if pos > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for Trait {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn write_traits<'a>(
    f: &mut fmt::Formatter<'_>,
    traits: impl Iterator<Item = &'a Trait>,
    open: &str,
    close: &str,
) -> fmt::Result {
    f.write_str(open)?;
    for (pos, t) in traits.enumerate() {
        if pos > 0 {
            f.write_str(",")?;
        }
        write!(f, "{t}")?;
    }
    f.write_str(close)
}

impl fmt::Display for TraitAllocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str(EMPTY_SYMBOL);
        }
        write_traits(f, self.iter_copies(), "{", "}")
    }
}

impl fmt::Debug for TraitAllocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}@{}", self.horizon())
    }
}

impl fmt::Display for OrderedTraitAllocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_traits(f, self.traits().iter(), "(", ")")
    }
}

impl fmt::Debug for OrderedTraitAllocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}@{}", self.horizon())
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            position: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn expect(&mut self, c: char) -> Result<()> {
        match self.peek() {
            Some(got) if got == c => {
                self.pos += c.len_utf8();
                Ok(())
            }
            Some(got) => self.err(format!("expected '{c}', found '{got}'")),
            None => self.err(format!("expected '{c}', found end of input")),
        }
    }

    fn number(&mut self) -> Result<usize> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest.bytes().take_while(u8::is_ascii_digit).count();
        if len == 0 {
            return self.err("expected an index");
        }
        let value = rest[..len]
            .parse()
            .or_else(|_| self.err("index out of range"))?;
        self.pos += len;
        Ok(value)
    }

    fn parse_trait(&mut self) -> Result<Trait> {
        self.expect('{')?;
        if self.peek() == Some('}') {
            return self.err("empty trait");
        }
        let mut indices = vec![self.number()?];
        while self.peek() == Some(',') {
            self.pos += 1;
            indices.push(self.number()?);
        }
        self.expect('}')?;
        if indices.contains(&0) {
            return self.err("indices start at 1");
        }
        Trait::from_indices(&indices)
    }

    fn parse_traits(&mut self) -> Result<Vec<Trait>> {
        if self.peek() == Some('∅') {
            self.pos += '∅'.len_utf8();
            return Ok(Vec::new());
        }
        self.expect('{')?;
        let mut traits = Vec::new();
        if self.peek() != Some('}') {
            traits.push(self.parse_trait()?);
            while self.peek() == Some(',') {
                self.pos += 1;
                traits.push(self.parse_trait()?);
            }
        }
        self.expect('}')?;
        Ok(traits)
    }

    fn finish(&mut self) -> Result<()> {
        match self.peek() {
            None => Ok(()),
            Some(c) => self.err(format!("unexpected trailing '{c}'")),
        }
    }
}

impl FromStr for Trait {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser::new(s);
        let t = p.parse_trait()?;
        p.finish()?;
        Ok(t)
    }
}

impl TraitAllocation {
    /// Parses the canonical text form under an explicit horizon; any index
    /// beyond `horizon` is an error.
    pub fn parse_with_horizon(s: &str, horizon: usize) -> Result<Self> {
        let mut p = Parser::new(s);
        let traits = p.parse_traits()?;
        p.finish()?;
        Self::new(horizon, traits)
    }
}

/// Parses with the horizon set to the largest index present.
impl FromStr for TraitAllocation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser::new(s);
        let traits = p.parse_traits()?;
        p.finish()?;
        let horizon = traits.iter().map(Trait::max_index).max().unwrap_or(0);
        Self::new(horizon, traits)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AllocationJson {
    horizon: usize,
    traits: Vec<Vec<(usize, usize)>>,
}

impl Serialize for Trait {
    fn serialize<S: Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        self.entries().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Trait {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        let entries = Vec::<(usize, usize)>::deserialize(deserializer)?;
        Trait::new(entries).map_err(serde::de::Error::custom)
    }
}

impl Serialize for TraitAllocation {
    fn serialize<S: Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        AllocationJson {
            horizon: self.horizon(),
            traits: self.iter_copies().map(|t| t.entries().to_vec()).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TraitAllocation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        let raw = AllocationJson::deserialize(deserializer)?;
        let traits = raw
            .traits
            .into_iter()
            .map(Trait::new)
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        TraitAllocation::new(raw.horizon, traits).map_err(serde::de::Error::custom)
    }
}
