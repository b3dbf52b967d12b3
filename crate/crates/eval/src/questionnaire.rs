//! Post-trial 7-point questionnaire responses.

use serde::{Deserialize, Serialize};

use crate::EvalError;

pub const SCALE: std::ops::RangeInclusive<u8> = 1..=7;
/// The midpoint of the scale, used for comparisons against neutral.
pub const NEUTRAL: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireRecord {
    pub session_id: String,
    pub trial_id: String,
    #[serde(rename = "L1")]
    pub l1: u8,
    #[serde(rename = "L2")]
    pub l2: u8,
    #[serde(rename = "L3")]
    pub l3: u8,
    #[serde(rename = "L4")]
    pub l4: u8,
}

impl QuestionnaireRecord {
    pub fn responses(&self) -> [u8; 4] {
        [self.l1, self.l2, self.l3, self.l4]
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        for (i, r) in self.responses().into_iter().enumerate() {
            if !SCALE.contains(&r) {
                return Err(EvalError::InvalidResponse(format!("L{} = {r} is outside 1..7", i + 1)));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: std::io::Write>(records: &[QuestionnaireRecord], w: W) -> Result<(), EvalError> {
        let mut wr = csv::Writer::from_writer(w);
        for r in records {
            r.validate()?;
            wr.serialize(r)?;
        }
        wr.flush().map_err(|e| EvalError::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<QuestionnaireRecord>, EvalError> {
        let mut rd = csv::Reader::from_reader(r);
        let records: Vec<QuestionnaireRecord> = rd.deserialize().collect::<Result<_, _>>()?;
        for r in &records {
            r.validate()?;
        }
        Ok(records)
    }
}

/// Numeric values of a named column from any CSV with a header row.
pub fn read_column<R: std::io::Read>(r: R, name: &str) -> Result<Vec<f64>, EvalError> {
    let mut rd = csv::Reader::from_reader(r);
    let idx = rd
        .headers()?
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| EvalError::Invalid(format!("no column named {name:?}")))?;
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let v = rec.get(idx).unwrap_or("");
        out.push(v.trim().parse().map_err(|_| EvalError::Schema {
            line: i + 2,
            message: format!("{name} value {v:?} is not a number"),
        })?);
    }
    Ok(out)
}
