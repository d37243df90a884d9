use serde::{Deserialize, Serialize};

use super::DataError;

/// Per-sample coastal water quality class under the Croatian criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QualityClass {
    Excellent,
    Sufficient,
    OverLimit,
}

impl QualityClass {
    pub fn as_str(self) -> &'static str {
        match self {
            QualityClass::Excellent => "excellent",
            QualityClass::Sufficient => "sufficient",
            QualityClass::OverLimit => "over_limit",
        }
    }
}

const EXCELLENT_EC: i64 = 150;
const EXCELLENT_ENT: i64 = 100;
const SUFFICIENT_EC: i64 = 300;
const SUFFICIENT_ENT: i64 = 185;

/// Classify one sample from its EC and ENT counts (CFU/100 mL). All bounds are strict.
pub fn classify_quality(ec: i64, ent: i64) -> Result<QualityClass, DataError> {
    if ec < 0 || ent < 0 {
        return Err(DataError::Domain(format!("counts must be non-negative (ec={ec}, ent={ent})")));
    }
    Ok(if ec < EXCELLENT_EC && ent < EXCELLENT_ENT {
        QualityClass::Excellent
    } else if ec < SUFFICIENT_EC && ent < SUFFICIENT_ENT {
        QualityClass::Sufficient
    } else {
        QualityClass::OverLimit
    })
}
