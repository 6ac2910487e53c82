use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

/// Resources seen during one tick, as a presence vector of width `m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObservationSymbol {
    pub present: Vec<bool>,
}

impl ObservationSymbol {
    pub fn none(m: usize) -> Self {
        ObservationSymbol { present: vec![false; m] }
    }

    pub fn from_ids(ids: &[usize], m: usize) -> Result<Self> {
        let mut present = vec![false; m];
        for &l in ids {
            *present.get_mut(l).ok_or_else(|| {
                Error::invalid(format!("resource id {l} out of range for m = {m}"))
            })? = true;
        }
        Ok(ObservationSymbol { present })
    }

    pub fn width(&self) -> usize {
        self.present.len()
    }

    pub fn ids(&self) -> Vec<usize> {
        self.present
            .iter()
            .enumerate()
            .filter_map(|(l, &p)| p.then_some(l))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }

    /// Draws each resource independently with its own probability.
    pub fn sample<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Self {
        ObservationSymbol {
            present: probs.iter().map(|&e| rng.random::<f64>() < e).collect(),
        }
    }

    /// `prod_l (e_l if present else 1 - e_l)`.
    pub fn probability(&self, probs: &[f64]) -> f64 {
        self.present
            .iter()
            .zip(probs)
            .map(|(&seen, &e)| if seen { e } else { 1.0 - e })
            .product()
    }
}

/// One symbol per tick, oldest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationSequence {
    pub m: usize,
    pub symbols: Vec<ObservationSymbol>,
}

impl ObservationSequence {
    pub fn new(m: usize, symbols: Vec<ObservationSymbol>) -> Result<Self> {
        if let Some(bad) = symbols.iter().find(|s| s.width() != m) {
            return Err(Error::invalid(format!(
                "observation width {} does not match m = {m}",
                bad.width()
            )));
        }
        Ok(ObservationSequence { m, symbols })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn prefix(&self, len: usize) -> ObservationSequence {
        ObservationSequence { m: self.m, symbols: self.symbols[..len.min(self.len())].to_vec() }
    }

    /// JSON list of lists of observed resource ids.
    pub fn to_json(&self) -> String {
        let lists: Vec<Vec<usize>> = self.symbols.iter().map(ObservationSymbol::ids).collect();
        serde_json::to_string(&lists).expect("lists of integers serialize")
    }

    pub fn from_json(text: &str, m: usize) -> Result<Self> {
        let lists: Vec<Vec<usize>> = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "observation sequence".into(),
            source,
        })?;
        let symbols = lists
            .iter()
            .map(|ids| ObservationSymbol::from_ids(ids, m))
            .collect::<Result<_>>()?;
        ObservationSequence::new(m, symbols)
    }

    /// One headerless row of `m` 0/1 cells per tick.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for s in &self.symbols {
            let cells: Vec<&str> = s.present.iter().map(|&p| if p { "1" } else { "0" }).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, m: usize) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut symbols = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|source| Error::Csv {
                context: format!("observation row {row}"),
                source,
            })?;
            let present = record
                .iter()
                .map(|cell| match cell {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(Error::invalid(format!(
                        "observation row {row}: expected 0 or 1, found {other:?}"
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            symbols.push(ObservationSymbol { present });
        }
        ObservationSequence::new(m, symbols)
    }

    /// Reads CSV when the extension says so, JSON otherwise.
    pub fn read(path: &Path, m: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Self::from_csv(&text, m),
            _ => Self::from_json(&text, m),
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_and_csv_agree() {
        let seq = ObservationSequence::new(
            3,
            vec![
                ObservationSymbol::from_ids(&[0, 2], 3).unwrap(),
                ObservationSymbol::none(3),
                ObservationSymbol::from_ids(&[1], 3).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(seq.to_json(), "[[0,2],[],[1]]");
        assert_eq!(seq.to_csv(), "1,0,1\n0,0,0\n0,1,0\n");
        assert_eq!(ObservationSequence::from_json(&seq.to_json(), 3).unwrap(), seq);
        assert_eq!(ObservationSequence::from_csv(&seq.to_csv(), 3).unwrap(), seq);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(ObservationSequence::from_json("[[5]]", 3).is_err());
        assert!(ObservationSequence::from_csv("1,0\n", 3).is_err());
        assert!(ObservationSequence::from_csv("1,2,0\n", 3).is_err());
        assert!(ObservationSequence::from_json("{", 3).is_err());
    }

    #[test]
    fn product_form_probability() {
        let e = [0.5, 0.5];
        assert_eq!(ObservationSymbol::from_ids(&[0], 2).unwrap().probability(&e), 0.25);
        let terminal = [0.0, 0.0];
        assert_eq!(ObservationSymbol::none(2).probability(&terminal), 1.0);
    }
}
