use std::fmt;

use serde::{Deserialize, Serialize};

use super::LanguageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Colour {
    Orange,
    Blue,
    Green,
}

impl Colour {
    pub const ALL: [Colour; 3] = [Colour::Orange, Colour::Blue, Colour::Green];

    pub fn name(self) -> &'static str {
        match self {
            Colour::Orange => "orange",
            Colour::Blue => "blue",
            Colour::Green => "green",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn parse(s: &str) -> Result<Self, LanguageError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "orange" => Ok(Colour::Orange),
            "blue" => Ok(Colour::Blue),
            "green" => Ok(Colour::Green),
            other => Err(LanguageError::InvalidMeaning(format!("unknown colour {other:?}"))),
        }
    }
}

impl fmt::Display for Colour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One of the three stimulus attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Shape,
    Colour,
    Amount,
}

impl Attribute {
    pub const ALL: [Attribute; 3] = [Attribute::Shape, Attribute::Colour, Attribute::Amount];

    /// Number of values each attribute can take.
    pub const CARDINALITY: usize = 3;

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Shape => "shape",
            Attribute::Colour => "colour",
            Attribute::Amount => "amount",
        }
    }
}

/// A stimulus: a point in the shape x colour x amount space.
///
/// The derived ordering is lexicographic over (shape, colour, amount), which is
/// the canonical iteration order used everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawMeaning")]
pub struct Meaning {
    shape: u8,
    colour: Colour,
    amount: u8,
}

#[derive(Deserialize)]
struct RawMeaning {
    shape: u8,
    colour: Colour,
    amount: u8,
}

impl TryFrom<RawMeaning> for Meaning {
    type Error = LanguageError;

    fn try_from(raw: RawMeaning) -> Result<Self, Self::Error> {
        Meaning::new(raw.shape, raw.colour, raw.amount)
    }
}

impl Meaning {
    pub const COUNT: usize = 27;

    pub fn new(shape: u8, colour: Colour, amount: u8) -> Result<Self, LanguageError> {
        if !(1..=3).contains(&shape) {
            return Err(LanguageError::InvalidMeaning(format!("shape {shape} not in 1..=3")));
        }
        if !(1..=3).contains(&amount) {
            return Err(LanguageError::InvalidMeaning(format!("amount {amount} not in 1..=3")));
        }
        Ok(Meaning { shape, colour, amount })
    }

    /// Builds a meaning from zero-based value indices in attribute order.
    pub fn from_indices(idx: [usize; 3]) -> Self {
        assert!(idx.iter().all(|&i| i < 3), "attribute index out of range: {idx:?}");
        Meaning {
            shape: idx[0] as u8 + 1,
            colour: Colour::ALL[idx[1]],
            amount: idx[2] as u8 + 1,
        }
    }

    pub fn shape(&self) -> u8 {
        self.shape
    }

    pub fn colour(&self) -> Colour {
        self.colour
    }

    pub fn amount(&self) -> u8 {
        self.amount
    }

    /// Zero-based index of this meaning's value for `attr`.
    pub fn value_index(&self, attr: Attribute) -> usize {
        match attr {
            Attribute::Shape => usize::from(self.shape - 1),
            Attribute::Colour => self.colour.index(),
            Attribute::Amount => usize::from(self.amount - 1),
        }
    }

    pub fn indices(&self) -> [usize; 3] {
        Attribute::ALL.map(|a| self.value_index(a))
    }

    /// Position in canonical order, 0..27.
    pub fn ordinal(&self) -> usize {
        let [s, c, a] = self.indices();
        s * 9 + c * 3 + a
    }
}

impl fmt::Display for Meaning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.shape, self.colour, self.amount)
    }
}

/// All 27 meanings in canonical order.
pub fn enumerate_meanings() -> Vec<Meaning> {
    let mut out = Vec::with_capacity(Meaning::COUNT);
    for s in 0..3 {
        for c in 0..3 {
            for a in 0..3 {
                out.push(Meaning::from_indices([s, c, a]));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn enumeration_is_canonical_and_complete() {
        let all = enumerate_meanings();
        assert_eq!(all.len(), 27);
        assert_eq!(all[0], Meaning::new(1, Colour::Orange, 1).unwrap());
        assert_eq!(all, enumerate_meanings());
        assert_eq!(all.iter().collect::<HashSet<_>>().len(), 27);
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(sorted, all);
        for (i, m) in all.iter().enumerate() {
            assert_eq!(m.ordinal(), i);
        }
    }

    #[test]
    fn rejects_out_of_range_values() {
        assert!(Meaning::new(0, Colour::Blue, 1).is_err());
        assert!(Meaning::new(1, Colour::Blue, 4).is_err());
        let bad: Result<Meaning, _> =
            serde_json::from_str(r#"{"shape":4,"colour":"blue","amount":1}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn serde_shape() {
        let m = Meaning::new(2, Colour::Green, 3).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"shape":2,"colour":"green","amount":3}"#);
        assert_eq!(serde_json::from_str::<Meaning>(&s).unwrap(), m);
    }
}
