//! SI dimensions, scaled units and quantity kinds.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Exponents over (m, kg, s, A, K, mol, cd).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Dimension(pub [i8; 7]);

const BASE_SYMBOLS: [&str; 7] = ["m", "kg", "s", "A", "K", "mol", "cd"];

impl Dimension {
    pub const NONE: Dimension = Dimension([0; 7]);
    pub const LENGTH: Dimension = Dimension([1, 0, 0, 0, 0, 0, 0]);
    pub const MASS: Dimension = Dimension([0, 1, 0, 0, 0, 0, 0]);
    pub const TIME: Dimension = Dimension([0, 0, 1, 0, 0, 0, 0]);
    pub const CURRENT: Dimension = Dimension([0, 0, 0, 1, 0, 0, 0]);
    pub const TEMPERATURE: Dimension = Dimension([0, 0, 0, 0, 1, 0, 0]);
    pub const AMOUNT: Dimension = Dimension([0, 0, 0, 0, 0, 1, 0]);
    pub const LUMINOUS: Dimension = Dimension([0, 0, 0, 0, 0, 0, 1]);

    pub fn mul(self, other: Dimension) -> Dimension {
        let mut out = [0i8; 7];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.0[i] + other.0[i];
        }
        Dimension(out)
    }

    pub fn inv(self) -> Dimension {
        Dimension(self.0.map(|e| -e))
    }

    pub fn pow(self, n: i8) -> Dimension {
        Dimension(self.0.map(|e| e * n))
    }

    pub fn is_dimensionless(self) -> bool {
        self == Dimension::NONE
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_dimensionless() {
            return f.write_str("1");
        }
        let mut first = true;
        for (sym, &e) in BASE_SYMBOLS.iter().zip(self.0.iter()) {
            if e == 0 {
                continue;
            }
            if !first {
                f.write_str("·")?;
            }
            first = false;
            f.write_str(sym)?;
            if e != 1 {
                f.write_str(&superscript(e))?;
            }
        }
        Ok(())
    }
}

fn superscript(e: i8) -> String {
    const DIGITS: [char; 10] = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];
    let mut s = String::new();
    if e < 0 {
        s.push('⁻');
    }
    for c in e.unsigned_abs().to_string().chars() {
        s.push(DIGITS[c.to_digit(10).unwrap() as usize]);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnitError {
    #[error("unknown unit symbol `{0}`")]
    UnknownSymbol(String),
    #[error("malformed unit expression `{0}`")]
    Malformed(String),
}

/// A unit: a dimension plus an exact factor to the coherent SI unit.
#[derive(Debug, Clone)]
pub struct Unit {
    dims: Dimension,
    scale: Ratio<i128>,
    symbol: String,
}

impl PartialEq for Unit {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.scale == other.scale
    }
}

impl Eq for Unit {}

impl Unit {
    pub fn new(dims: Dimension, scale: Ratio<i128>, symbol: impl Into<String>) -> Self {
        assert!(scale > Ratio::from_integer(0), "unit scale must be positive");
        Unit { dims, scale, symbol: symbol.into() }
    }

    /// The coherent SI unit of a dimension.
    pub fn coherent(dims: Dimension) -> Self {
        Unit { dims, scale: Ratio::from_integer(1), symbol: dims.to_string() }
    }

    pub fn dimensionless() -> Self {
        Unit::coherent(Dimension::NONE)
    }

    pub fn seconds() -> Self {
        Unit { dims: Dimension::TIME, scale: Ratio::from_integer(1), symbol: "s".into() }
    }

    pub fn dims(&self) -> Dimension {
        self.dims
    }

    pub fn scale(&self) -> Ratio<i128> {
        self.scale
    }

    pub fn scale_f64(&self) -> f64 {
        *self.scale.numer() as f64 / *self.scale.denom() as f64
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn mul(&self, other: &Unit) -> Unit {
        Unit {
            dims: self.dims.mul(other.dims),
            scale: self.scale * other.scale,
            symbol: join_symbols(&self.symbol, "·", &other.symbol),
        }
    }

    pub fn div(&self, other: &Unit) -> Unit {
        Unit {
            dims: self.dims.mul(other.dims.inv()),
            scale: self.scale / other.scale,
            symbol: join_symbols(&self.symbol, "/", &other.symbol),
        }
    }

    /// Factor converting a value in `self` into `target`, when dimensions agree.
    pub fn conversion_factor(&self, target: &Unit) -> Option<f64> {
        if self.dims != target.dims {
            return None;
        }
        let r = self.scale / target.scale;
        Some(*r.numer() as f64 / *r.denom() as f64)
    }
}

fn join_symbols(a: &str, op: &str, b: &str) -> String {
    let wrap = |s: &str| if s.contains('/') { format!("({s})") } else { s.to_string() };
    match (a, b) {
        ("1", _) if op == "·" => b.to_string(),
        (_, "1") => a.to_string(),
        _ => format!("{}{}{}", wrap(a), op, wrap(b)),
    }
}

/// True iff the two units have equal exponent vectors.
pub fn check_dimensions(a: &Unit, b: &Unit) -> bool {
    a.dims == b.dims
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.symbol)
    }
}

impl Serialize for Unit {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.symbol)
    }
}

impl<'de> Deserialize<'de> for Unit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

struct Atom {
    symbol: &'static str,
    dims: Dimension,
    scale: (i128, i128),
    prefixable: bool,
}

const fn d(e: [i8; 7]) -> Dimension {
    Dimension(e)
}

const ATOMS: &[Atom] = &[
    Atom { symbol: "m", dims: Dimension::LENGTH, scale: (1, 1), prefixable: true },
    Atom { symbol: "g", dims: Dimension::MASS, scale: (1, 1000), prefixable: true },
    Atom { symbol: "s", dims: Dimension::TIME, scale: (1, 1), prefixable: true },
    Atom { symbol: "A", dims: Dimension::CURRENT, scale: (1, 1), prefixable: true },
    Atom { symbol: "K", dims: Dimension::TEMPERATURE, scale: (1, 1), prefixable: true },
    Atom { symbol: "mol", dims: Dimension::AMOUNT, scale: (1, 1), prefixable: true },
    Atom { symbol: "cd", dims: Dimension::LUMINOUS, scale: (1, 1), prefixable: false },
    Atom { symbol: "Pa", dims: d([-1, 1, -2, 0, 0, 0, 0]), scale: (1, 1), prefixable: true },
    Atom { symbol: "bar", dims: d([-1, 1, -2, 0, 0, 0, 0]), scale: (100_000, 1), prefixable: true },
    Atom { symbol: "N", dims: d([1, 1, -2, 0, 0, 0, 0]), scale: (1, 1), prefixable: true },
    Atom { symbol: "J", dims: d([2, 1, -2, 0, 0, 0, 0]), scale: (1, 1), prefixable: true },
    Atom { symbol: "W", dims: d([2, 1, -3, 0, 0, 0, 0]), scale: (1, 1), prefixable: true },
    Atom { symbol: "V", dims: d([2, 1, -3, -1, 0, 0, 0]), scale: (1, 1), prefixable: true },
    Atom { symbol: "Ohm", dims: d([2, 1, -3, -2, 0, 0, 0]), scale: (1, 1), prefixable: true },
    Atom { symbol: "Hz", dims: d([0, 0, -1, 0, 0, 0, 0]), scale: (1, 1), prefixable: true },
    Atom { symbol: "L", dims: d([3, 0, 0, 0, 0, 0, 0]), scale: (1, 1000), prefixable: true },
    Atom { symbol: "min", dims: Dimension::TIME, scale: (60, 1), prefixable: false },
    Atom { symbol: "h", dims: Dimension::TIME, scale: (3600, 1), prefixable: false },
    Atom { symbol: "%", dims: Dimension::NONE, scale: (1, 100), prefixable: false },
];

const PREFIXES: &[(&str, i128, i128)] = &[
    ("G", 1_000_000_000, 1),
    ("M", 1_000_000, 1),
    ("k", 1000, 1),
    ("h", 100, 1),
    ("c", 1, 100),
    ("m", 1, 1000),
    ("u", 1, 1_000_000),
    ("µ", 1, 1_000_000),
    ("n", 1, 1_000_000_000),
];

fn lookup_atom(sym: &str) -> Option<(Dimension, Ratio<i128>)> {
    if let Some(a) = ATOMS.iter().find(|a| a.symbol == sym) {
        return Some((a.dims, Ratio::new(a.scale.0, a.scale.1)));
    }
    for (p, n, dd) in PREFIXES {
        if let Some(rest) = sym.strip_prefix(p) {
            if let Some(a) = ATOMS.iter().find(|a| a.symbol == rest && a.prefixable) {
                return Some((a.dims, Ratio::new(a.scale.0 * n, a.scale.1 * dd)));
            }
        }
    }
    None
}

fn parse_superscript(s: &str) -> Option<i8> {
    let mut neg = false;
    let mut digits = String::new();
    for c in s.chars() {
        match c {
            '⁻' if digits.is_empty() && !neg => neg = true,
            '⁰' => digits.push('0'),
            '¹' => digits.push('1'),
            '²' => digits.push('2'),
            '³' => digits.push('3'),
            '⁴' => digits.push('4'),
            '⁵' => digits.push('5'),
            '⁶' => digits.push('6'),
            '⁷' => digits.push('7'),
            '⁸' => digits.push('8'),
            '⁹' => digits.push('9'),
            _ => return None,
        }
    }
    let v: i8 = digits.parse().ok()?;
    Some(if neg { -v } else { v })
}

/// Splits `sym^n`, `sym⁻¹` or `sym2` into (symbol, exponent).
fn split_exponent(factor: &str) -> Option<(&str, i8)> {
    if let Some((base, exp)) = factor.split_once('^') {
        return Some((base, exp.parse().ok()?));
    }
    let sup_start = factor.char_indices().find(|(_, c)| "⁻⁰¹²³⁴⁵⁶⁷⁸⁹".contains(*c)).map(|(i, _)| i);
    if let Some(i) = sup_start {
        return Some((&factor[..i], parse_superscript(&factor[i..])?));
    }
    let digit_start = factor.char_indices().find(|(_, c)| c.is_ascii_digit() || *c == '-').map(|(i, _)| i);
    match digit_start {
        Some(0) => None,
        Some(i) => Some((&factor[..i], factor[i..].parse().ok()?)),
        None => Some((factor, 1)),
    }
}

impl FromStr for Unit {
    type Err = UnitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        if trimmed.is_empty() || trimmed == "1" {
            return Ok(Unit { dims: Dimension::NONE, scale: Ratio::from_integer(1), symbol: "1".into() });
        }
        let mut dims = Dimension::NONE;
        let mut scale = Ratio::from_integer(1i128);
        let mut sign: i8 = 1;
        let mut token = String::new();
        let mut apply = |token: &mut String, sign: i8| -> Result<(), UnitError> {
            if token.is_empty() {
                return Err(UnitError::Malformed(trimmed.to_string()));
            }
            if token == "1" {
                token.clear();
                return Ok(());
            }
            let (sym, exp) = split_exponent(token).ok_or_else(|| UnitError::Malformed(trimmed.to_string()))?;
            let (adims, ascale) = lookup_atom(sym).ok_or_else(|| UnitError::UnknownSymbol(sym.to_string()))?;
            let e = exp * sign;
            dims = dims.mul(adims.pow(e));
            scale *= ascale.pow(i32::from(e));
            token.clear();
            Ok(())
        };
        for c in trimmed.chars() {
            match c {
                '*' | '·' | '.' | ' ' => {
                    apply(&mut token, sign)?;
                }
                '/' => {
                    apply(&mut token, sign)?;
                    sign = -1;
                }
                c => token.push(c),
            }
        }
        apply(&mut token, sign)?;
        Ok(Unit { dims, scale, symbol: trimmed.to_string() })
    }
}

/// Physical quantity label attached to every measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantityKind {
    Temperature,
    Pressure,
    Flow,
    MassFlow,
    Power,
    Energy,
    Voltage,
    Current,
    Length,
    Mass,
    Time,
    Frequency,
    Dimensionless,
    /// Result of arithmetic with no dedicated label; matches any dimension.
    Derived,
}

impl QuantityKind {
    pub const ALL: [QuantityKind; 14] = [
        QuantityKind::Temperature,
        QuantityKind::Pressure,
        QuantityKind::Flow,
        QuantityKind::MassFlow,
        QuantityKind::Power,
        QuantityKind::Energy,
        QuantityKind::Voltage,
        QuantityKind::Current,
        QuantityKind::Length,
        QuantityKind::Mass,
        QuantityKind::Time,
        QuantityKind::Frequency,
        QuantityKind::Dimensionless,
        QuantityKind::Derived,
    ];

    /// Canonical dimension; `None` for [`QuantityKind::Derived`].
    pub fn canonical_dimension(self) -> Option<Dimension> {
        use QuantityKind::*;
        Some(match self {
            Temperature => Dimension::TEMPERATURE,
            Pressure => d([-1, 1, -2, 0, 0, 0, 0]),
            Flow => d([3, 0, -1, 0, 0, 0, 0]),
            MassFlow => d([0, 1, -1, 0, 0, 0, 0]),
            Power => d([2, 1, -3, 0, 0, 0, 0]),
            Energy => d([2, 1, -2, 0, 0, 0, 0]),
            Voltage => d([2, 1, -3, -1, 0, 0, 0]),
            Current => Dimension::CURRENT,
            Length => Dimension::LENGTH,
            Mass => Dimension::MASS,
            Time => Dimension::TIME,
            Frequency => d([0, 0, -1, 0, 0, 0, 0]),
            Dimensionless => Dimension::NONE,
            Derived => return None,
        })
    }

    /// The first labelled kind with this dimension, else `Derived`.
    pub fn for_dimension(dims: Dimension) -> QuantityKind {
        QuantityKind::ALL.into_iter().find(|k| k.canonical_dimension() == Some(dims)).unwrap_or(QuantityKind::Derived)
    }

    pub fn accepts(self, unit: &Unit) -> bool {
        self.canonical_dimension().is_none_or(|dims| dims == unit.dims())
    }

    pub fn as_str(self) -> &'static str {
        use QuantityKind::*;
        match self {
            Temperature => "temperature",
            Pressure => "pressure",
            Flow => "flow",
            MassFlow => "mass_flow",
            Power => "power",
            Energy => "energy",
            Voltage => "voltage",
            Current => "current",
            Length => "length",
            Mass => "mass",
            Time => "time",
            Frequency => "frequency",
            Dimensionless => "dimensionless",
            Derived => "derived",
        }
    }
}

impl fmt::Display for QuantityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuantityKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QuantityKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown quantity kind `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(s: &str) -> Unit {
        s.parse().unwrap()
    }

    #[test]
    fn check_dimensions_examples() {
        assert!(check_dimensions(&u("m/s"), &u("m·s⁻¹")));
        assert!(!check_dimensions(&u("K"), &u("Pa")));
        assert!(check_dimensions(&Unit::dimensionless(), &u("1")));
    }

    #[test]
    fn prefixes_and_scales() {
        assert_eq!(u("kg").scale(), Ratio::from_integer(1));
        assert_eq!(u("bar").conversion_factor(&u("kPa")), Some(100.0));
        assert_eq!(u("mbar").conversion_factor(&u("Pa")), Some(100.0));
        assert_eq!(u("mm").conversion_factor(&u("m")), Some(1e-3));
        assert_eq!(u("min").conversion_factor(&u("s")), Some(60.0));
        assert_eq!(u("m3/h").dims(), QuantityKind::Flow.canonical_dimension().unwrap());
        assert_eq!(u("L/min"), u("m^3").div(&u("s")).mul(&Unit::new(Dimension::NONE, Ratio::new(1, 60_000), "x")));
    }

    #[test]
    fn multiplication_adds_exponents() {
        let w = u("V").mul(&u("A"));
        assert_eq!(w, u("W"));
        assert_eq!(u("Pa").mul(&u("m^2")), u("N"));
        assert_eq!(u("m").div(&u("m")).dims(), Dimension::NONE);
    }

    #[test]
    fn rejects_unknown() {
        assert!(matches!("furlong".parse::<Unit>(), Err(UnitError::UnknownSymbol(_))));
        assert!(matches!("m//s".parse::<Unit>(), Err(UnitError::Malformed(_))));
    }

    #[test]
    fn quantity_kinds() {
        assert_eq!(QuantityKind::for_dimension(u("kPa").dims()), QuantityKind::Pressure);
        assert!(QuantityKind::Temperature.accepts(&u("K")));
        assert!(!QuantityKind::Temperature.accepts(&u("Pa")));
        assert!(QuantityKind::Derived.accepts(&u("Pa")));
        assert_eq!("mass_flow".parse::<QuantityKind>().unwrap(), QuantityKind::MassFlow);
    }

    #[test]
    fn display_dimension() {
        assert_eq!(Unit::coherent(u("m/s").dims()).symbol(), "m·s⁻¹");
    }
}
