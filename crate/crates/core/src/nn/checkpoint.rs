//! Versioned JSON checkpoints with bit-exact float round trips.

use super::{AdamState, Param, ParamStore, Tensor};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const CHECKPOINT_FORMAT: &str = "regrasp-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamRepr {
    weight: Tensor,
    bias: Tensor,
}

#[derive(Serialize, Deserialize)]
struct OptimizerRepr {
    t: u64,
    m: BTreeMap<String, ParamRepr>,
    v: BTreeMap<String, ParamRepr>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointRepr {
    format: String,
    version: u32,
    step: u64,
    params: BTreeMap<String, ParamRepr>,
    optimizer: Option<OptimizerRepr>,
    meta: serde_json::Value,
}

/// Parameters, optional optimizer state, global step, and free-form metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    pub params: ParamStore,
    pub optimizer: Option<AdamState>,
    pub meta: serde_json::Value,
}

fn to_repr(ps: &ParamStore) -> BTreeMap<String, ParamRepr> {
    ps.iter()
        .map(|(k, p)| {
            (
                k.clone(),
                ParamRepr {
                    weight: p.weight.clone(),
                    bias: p.bias.clone(),
                },
            )
        })
        .collect()
}

fn from_repr(m: BTreeMap<String, ParamRepr>) -> Result<ParamStore> {
    let mut ps = ParamStore::new();
    for (k, p) in m {
        // Re-validate through the checked constructor.
        let weight = Tensor::new(p.weight.shape().to_vec(), p.weight.into_data())?;
        let bias = Tensor::new(p.bias.shape().to_vec(), p.bias.into_data())?;
        ps.insert(k, Param { weight, bias });
    }
    Ok(ps)
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        let repr = CheckpointRepr {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            step: self.step,
            params: to_repr(&self.params),
            optimizer: self.optimizer.as_ref().map(|o| OptimizerRepr {
                t: o.t,
                m: to_repr(&o.m),
                v: to_repr(&o.v),
            }),
            meta: self.meta.clone(),
        };
        Ok(serde_json::to_string(&repr)?)
    }

    pub fn from_json(s: &str) -> Result<Checkpoint> {
        let repr: CheckpointRepr = serde_json::from_str(s)?;
        if repr.format != CHECKPOINT_FORMAT || repr.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                repr.format, repr.version
            )));
        }
        let optimizer = match repr.optimizer {
            Some(o) => Some(AdamState {
                t: o.t,
                m: from_repr(o.m)?,
                v: from_repr(o.v)?,
            }),
            None => None,
        };
        Ok(Checkpoint {
            step: repr.step,
            params: from_repr(repr.params)?,
            optimizer,
            meta: repr.meta,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        Checkpoint::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LayerSpec, Network};

    #[test]
    fn bit_exact_round_trip() {
        let net = Network::new(vec![3], vec![LayerSpec::dense("a", 4, 9), LayerSpec::dense("b", 1, 10)]);
        let mut ps = ParamStore::new();
        net.init_params(&mut ps).unwrap();
        *ps.value_mut(0).unwrap() = -0.0;
        *ps.value_mut(1).unwrap() = 1.0 / 3.0;
        let mut opt = AdamState::new(&ps);
        opt.t = 17;
        *opt.v.value_mut(2).unwrap() = 5e-324;
        let ck = Checkpoint {
            step: 17,
            params: ps,
            optimizer: Some(opt),
            meta: serde_json::json!({"variant": "fusion"}),
        };
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
        let bits = |p: &ParamStore| p.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.params), bits(&ck.params));
    }

    #[test]
    fn rejects_foreign_format() {
        let s = r#"{"format":"other","version":1,"step":0,"params":{},"optimizer":null,"meta":null}"#;
        assert!(Checkpoint::from_json(s).is_err());
    }
}
