//! Every tunable of the pipeline in one serializable document.
//!
//! A `params.json` file may set any subset of fields; the rest keep their
//! defaults. Unknown keys are rejected so typos do not pass silently.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::disparity::TensorParams;
use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::lfsp::LfspParams;
use crate::optimizer::OptimizerParams;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub lfsp: LfspParams,
    pub energy: EnergyParams,
    pub tensor: TensorParams,
    pub optimizer: OptimizerParams,
}

impl Params {
    /// Defaults tuned for estimated disparity (weaker disparity cue).
    pub fn for_estimated_disparity() -> Self {
        Self {
            energy: EnergyParams::for_estimated_disparity(),
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Params =
            serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("params: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::load(path, e.to_string()))
    }

    /// Applies the fields present in `text` on top of `self`.
    pub fn merged_with_json(&self, text: &str) -> Result<Self> {
        let mut base = serde_json::to_value(self).expect("params serialize");
        let patch: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("params: {e}")))?;
        merge(&mut base, patch);
        let p: Params =
            serde_json::from_value(base).map_err(|e| Error::InvalidParameter(format!("params: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }

    pub fn validate(&self) -> Result<()> {
        self.energy.validate()?;
        let l = &self.lfsp;
        if l.size < 4 {
            return Err(Error::InvalidParameter(format!("superpixel size {} must be >= 4", l.size)));
        }
        if !(l.compactness >= 0.0 && l.disparity_weight >= 0.0 && l.convergence >= 0.0) {
            return Err(Error::InvalidParameter(
                "compactness, disparity_weight and convergence must be >= 0".into(),
            ));
        }
        if !(self.optimizer.tolerance >= 0.0) {
            return Err(Error::InvalidParameter("optimizer tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let p = Params::default();
        assert_eq!(Params::from_json(&p.to_json()).unwrap(), p);
        assert_eq!(p.energy.lambda_s, 10.0);
        assert_eq!(p.lfsp.size, 20);
        assert_eq!(p.tensor.outer_sigma, 2.0);
        assert_eq!(p.optimizer.max_cycles, 10);
    }

    #[test]
    fn partial_override_keeps_other_defaults() {
        let p = Params::from_json(r#"{"energy": {"lambda_d": 0.3}, "lfsp": {"size": 12}}"#).unwrap();
        assert_eq!(p.energy.lambda_d, 0.3);
        assert_eq!(p.energy.lambda_s, 10.0);
        assert_eq!(p.lfsp.size, 12);
        assert_eq!(p.lfsp.compactness, 10.0);
    }

    #[test]
    fn merge_applies_on_top_of_current_values() {
        let base = Params::for_estimated_disparity();
        let p = base.merged_with_json(r#"{"energy": {"lambda_s": 4}}"#).unwrap();
        assert_eq!(p.energy.lambda_s, 4.0);
        assert_eq!(p.energy.lambda_d, 0.3);
    }

    #[test]
    fn typos_and_bad_values_are_rejected() {
        assert!(Params::from_json(r#"{"energy": {"lamda_s": 1}}"#).is_err());
        assert!(Params::from_json(r#"{"energy": {"lambda_s": -1}}"#).is_err());
        assert!(Params::from_json(r#"{"lfsp": {"size": 2}}"#).is_err());
        assert!(Params::from_json(r#"{"energy": {"color_norm": "l2"}}"#).is_ok());
    }
}
