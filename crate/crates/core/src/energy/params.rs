//! Loop-table parameters and their TOML file format.
//!
//! ```toml
//! [stack]            # all 36 "outer/inner" pair-type combinations
//! "GC/GC" = -3.0
//! [hairpin]          # energies[k] is the penalty for k+1 unpaired
//! energies = [6.0, 5.8, 5.4]
//! [bulge]
//! energies = [3.8, 2.8]
//! [internal]         # keyed by total unpaired length
//! energies = [1.0, 1.0, 1.7]
//! [multibranch]      # a + b * branches + c * unpaired
//! a = 3.4
//! b = 0.4
//! c = 0.0
//! ```
//!
//! Pair types are read 5' to 3': the stack closed by `(i,j)` over
//! `(i+1,j-1)` is keyed `"{seq[i]seq[j]}/{seq[i+1]seq[j-1]}"`.

use std::path::Path;

use thiserror::Error;
use toml::{Table, Value};

use crate::scalar::Energy;
use crate::structure::PairType;

/// Longest loop length a table may list; longer loops are extrapolated.
pub const MAX_TABLE_LEN: usize = 30;

/// Slope of the logarithmic extrapolation, `1.75 * RT` at 37 C.
pub const EXTRAPOLATION_SLOPE: f64 = 1.75 * 0.616;

const EXAMPLE: &str = include_str!("../../data/example_loop_table.toml");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("cannot read parameter file: {0}")]
    Io(String),
    #[error("malformed parameter file: {0}")]
    Syntax(String),
    #[error("missing section [{0}]")]
    MissingSection(&'static str),
    #[error("[{section}] is missing key {key:?}")]
    MissingKey { section: &'static str, key: &'static str },
    #[error("[{section}] {key}: expected a finite number")]
    NotANumber { section: &'static str, key: String },
    #[error("[stack] key {0:?} is not of the form \"XY/XY\"")]
    BadStackKey(String),
    #[error("[stack] key {key:?}: {pair:?} is not an admissible pair type")]
    InadmissiblePairType { key: String, pair: String },
    #[error("[stack] has no entry for {0:?}")]
    MissingStackEntry(String),
    #[error("[{section}] energies: expected 1..={max} entries, found {found}")]
    WrongLength { section: &'static str, found: usize, max: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiBranchParams<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopTableParams<T> {
    /// `stack[outer][inner]`, indexed by [`PairType::index`].
    pub stack: [[T; 6]; 6],
    pub hairpin: Vec<T>,
    pub bulge: Vec<T>,
    pub internal: Vec<T>,
    pub multibranch: MultiBranchParams<T>,
}

/// Entry for `len` unpaired positions: `table[len - 1]`, with
/// `E(max) + slope * ln(len / max)` past the end. Length zero reads the
/// first entry.
pub fn length_energy<T: Energy>(table: &[T], len: usize) -> T {
    let len = len.max(1);
    let max = table.len();
    if len <= max {
        table[len - 1]
    } else {
        table[max - 1] + T::lit(EXTRAPOLATION_SLOPE * (len as f64 / max as f64).ln())
    }
}

impl<T: Energy> LoopTableParams<T> {
    /// The parameters shipped in `data/example_loop_table.toml`. They are
    /// illustrative and chosen for reproducible tests, not measured.
    pub fn example() -> Self {
        load_parameters(EXAMPLE).expect("shipped example parameters parse")
    }

    pub fn from_file(path: &Path) -> Result<Self, ParamError> {
        let text = std::fs::read_to_string(path).map_err(|e| ParamError::Io(format!("{}: {e}", path.display())))?;
        load_parameters(&text)
    }

    pub fn stack_energy(&self, outer: PairType, inner: PairType) -> T {
        self.stack[outer.index()][inner.index()]
    }

    pub fn hairpin_energy(&self, unpaired: usize) -> T {
        length_energy(&self.hairpin, unpaired)
    }

    pub fn bulge_energy(&self, unpaired: usize) -> T {
        length_energy(&self.bulge, unpaired)
    }

    pub fn internal_energy(&self, unpaired: usize) -> T {
        length_energy(&self.internal, unpaired)
    }

    pub fn multibranch_energy(&self, branches: usize, unpaired: usize) -> T {
        let m = &self.multibranch;
        m.a + m.b * T::lit(branches as f64) + m.c * T::lit(unpaired as f64)
    }
}

fn section<'a>(root: &'a Table, name: &'static str) -> Result<&'a Table, ParamError> {
    match root.get(name) {
        Some(Value::Table(t)) => Ok(t),
        Some(_) => Err(ParamError::Syntax(format!("[{name}] must be a table"))),
        None => Err(ParamError::MissingSection(name)),
    }
}

fn number<T: Energy>(v: &Value, section: &'static str, key: &str) -> Result<T, ParamError> {
    let x = match v {
        Value::Float(x) => *x,
        Value::Integer(i) => *i as f64,
        _ => f64::NAN,
    };
    if !x.is_finite() {
        return Err(ParamError::NotANumber { section, key: key.to_string() });
    }
    T::from_f64(x).ok_or(ParamError::NotANumber { section, key: key.to_string() })
}

fn length_table<T: Energy>(root: &Table, name: &'static str) -> Result<Vec<T>, ParamError> {
    let t = section(root, name)?;
    let values = match t.get("energies") {
        Some(Value::Array(a)) => a,
        Some(_) => return Err(ParamError::NotANumber { section: name, key: "energies".into() }),
        None => return Err(ParamError::MissingKey { section: name, key: "energies" }),
    };
    if values.is_empty() || values.len() > MAX_TABLE_LEN {
        return Err(ParamError::WrongLength { section: name, found: values.len(), max: MAX_TABLE_LEN });
    }
    values.iter().enumerate().map(|(k, v)| number(v, name, &format!("energies[{k}]"))).collect()
}

fn pair_type(key: &str, part: &str) -> Result<PairType, ParamError> {
    let letters_ok = part.len() == 2 && part.chars().all(|c| "ACGU".contains(c));
    if !letters_ok {
        return Err(ParamError::BadStackKey(key.to_string()));
    }
    part.parse().map_err(|_| ParamError::InadmissiblePairType { key: key.to_string(), pair: part.to_string() })
}

/// Parses and range-checks a loop-table parameter file.
pub fn load_parameters<T: Energy>(text: &str) -> Result<LoopTableParams<T>, ParamError> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| ParamError::Syntax(e.message().to_string()))?;

    let stack_section = section(&root, "stack")?;
    let mut stack = [[None::<T>; 6]; 6];
    for (key, value) in stack_section {
        let (outer, inner) = key.split_once('/').ok_or_else(|| ParamError::BadStackKey(key.clone()))?;
        let outer = pair_type(key, outer)?;
        let inner = pair_type(key, inner)?;
        stack[outer.index()][inner.index()] = Some(number(value, "stack", key)?);
    }
    let mut table = [[T::zero(); 6]; 6];
    for outer in PairType::ALL {
        for inner in PairType::ALL {
            table[outer.index()][inner.index()] = stack[outer.index()][inner.index()]
                .ok_or_else(|| ParamError::MissingStackEntry(format!("{}/{}", outer.name(), inner.name())))?;
        }
    }

    let hairpin = length_table(&root, "hairpin")?;
    let bulge = length_table(&root, "bulge")?;
    let internal = length_table(&root, "internal")?;

    let mb = section(&root, "multibranch")?;
    let coef = |key: &'static str| -> Result<T, ParamError> {
        let v = mb.get(key).ok_or(ParamError::MissingKey { section: "multibranch", key })?;
        number(v, "multibranch", key)
    };
    let multibranch = MultiBranchParams { a: coef("a")?, b: coef("b")?, c: coef("c")? };

    Ok(LoopTableParams { stack: table, hairpin, bulge, internal, multibranch })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_loads() {
        let p: LoopTableParams<f64> = LoopTableParams::example();
        assert_eq!(p.stack_energy(PairType::GC, PairType::GC), -3.0);
        assert_eq!(p.hairpin_energy(3), 5.4);
        let p32: LoopTableParams<f32> = LoopTableParams::example();
        assert_eq!(p32.hairpin_energy(3), 5.4f32);
    }

    #[test]
    fn extrapolates_past_table_end() {
        let table = [1.0f64, 2.0, 3.0];
        assert_eq!(length_energy(&table, 0), 1.0);
        assert_eq!(length_energy(&table, 3), 3.0);
        let e6 = length_energy(&table, 6);
        assert!((e6 - (3.0 + 1.078 * 2f64.ln())).abs() < 1e-12);
        assert!(length_energy(&table, 7) > e6);
    }

    fn example_without(section: &str) -> String {
        let mut out = String::new();
        let mut skipping = false;
        for line in EXAMPLE.lines() {
            if line.starts_with('[') {
                skipping = line.trim() == format!("[{section}]");
            }
            if !skipping {
                out.push_str(line);
                out.push('\n');
            }
        }
        out
    }

    #[test]
    fn missing_sections_are_named() {
        for (name, expected) in [
            ("stack", ParamError::MissingSection("stack")),
            ("hairpin", ParamError::MissingSection("hairpin")),
            ("multibranch", ParamError::MissingSection("multibranch")),
        ] {
            let err = load_parameters::<f64>(&example_without(name)).unwrap_err();
            assert_eq!(err, expected);
            assert!(err.to_string().contains(name));
        }
    }

    #[test]
    fn rejects_bad_stack_keys() {
        let text = EXAMPLE.replace("\"GC/GC\" = -3.0", "\"GC/GC\" = -3.0\n\"AG/GC\" = -1.0");
        assert_eq!(
            load_parameters::<f64>(&text),
            Err(ParamError::InadmissiblePairType { key: "AG/GC".into(), pair: "AG".into() })
        );
        let text = EXAMPLE.replace("\"GC/GC\" = -3.0", "\"GCGC\" = -3.0");
        assert!(matches!(load_parameters::<f64>(&text), Err(ParamError::BadStackKey(_))));
        let text = EXAMPLE.replace("\"GC/GC\" = -3.0", "");
        assert_eq!(load_parameters::<f64>(&text), Err(ParamError::MissingStackEntry("GC/GC".into())));
    }

    #[test]
    fn rejects_malformed_numbers_and_lengths() {
        let text = EXAMPLE.replace("\"GC/GC\" = -3.0", "\"GC/GC\" = -3.x");
        assert!(matches!(load_parameters::<f64>(&text), Err(ParamError::Syntax(_))));
        let text = EXAMPLE.replace("\"GC/GC\" = -3.0", "\"GC/GC\" = \"low\"");
        assert!(matches!(load_parameters::<f64>(&text), Err(ParamError::NotANumber { .. })));

        let long: Vec<String> = (0..31).map(|k| format!("{k}.0")).collect();
        let text = format!("{}\n[bulge]\nenergies = [{}]\n", example_without("bulge"), long.join(", "));
        assert_eq!(
            load_parameters::<f64>(&text),
            Err(ParamError::WrongLength { section: "bulge", found: 31, max: 30 })
        );
        let text = format!("{}\n[bulge]\nenergies = []\n", example_without("bulge"));
        assert!(matches!(load_parameters::<f64>(&text), Err(ParamError::WrongLength { found: 0, .. })));
    }
}
