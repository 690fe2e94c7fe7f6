use serde::{Deserialize, Serialize};

use super::OptimError;
use crate::linalg::Matrix;
use crate::moments::MomentState;

/// Logical shape of a parameter. Vectors are stored as `1 × n` matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamShape {
    Matrix(usize, usize),
    Vector(usize),
}

impl ParamShape {
    pub fn from_dims(dims: &[usize]) -> Result<Self, OptimError> {
        match *dims {
            [n] if n > 0 => Ok(ParamShape::Vector(n)),
            [m, n] if m > 0 && n > 0 => Ok(ParamShape::Matrix(m, n)),
            _ => Err(OptimError::UnsupportedShape(dims.to_vec())),
        }
    }

    /// Storage shape `(rows, cols)`.
    pub fn storage(self) -> (usize, usize) {
        match self {
            ParamShape::Matrix(m, n) => (m, n),
            ParamShape::Vector(n) => (1, n),
        }
    }

    pub fn numel(self) -> usize {
        let (r, c) = self.storage();
        r * c
    }
}

/// Which update rule a parameter receives in the hybrid scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    MuonFamily,
    AdamwFamily,
}

/// Optimizer buffers for one slot. Created on the first step by whichever
/// update rule owns the slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotState {
    /// EMA mean and variance surrogate (Muon-NSR, Muon-VS, reshuffled).
    Moments(MomentState),
    /// Unnormalized momentum `B ← βB + G` (Muon) or EMA momentum (Signum).
    Momentum {
        buf: Matrix,
        t: u64,
    },
    Adam {
        m: Matrix,
        v: Matrix,
        t: u64,
    },
}

impl SlotState {
    pub fn step_count(&self) -> u64 {
        match self {
            SlotState::Moments(s) => s.t,
            SlotState::Momentum { t, .. } | SlotState::Adam { t, .. } => *t,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SlotState::Moments(_) => "moments",
            SlotState::Momentum { .. } => "momentum",
            SlotState::Adam { .. } => "adam",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSlot {
    pub id: String,
    pub shape: ParamShape,
    pub family: Family,
    pub weights: Matrix,
    pub state: Option<SlotState>,
}

impl ParamSlot {
    pub fn new(
        id: impl Into<String>,
        shape: ParamShape,
        family: Family,
        weights: Matrix,
    ) -> Result<Self, OptimError> {
        if weights.shape() != shape.storage() {
            return Err(OptimError::WeightShape {
                id: id.into(),
                expected: shape.storage(),
                got: weights.shape(),
            });
        }
        if family == Family::MuonFamily && !matches!(shape, ParamShape::Matrix(..)) {
            return Err(OptimError::UnsupportedShape(vec![shape.numel()]));
        }
        Ok(Self {
            id: id.into(),
            shape,
            family,
            weights,
            state: None,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.state.as_ref().map_or(0, SlotState::step_count)
    }
}

/// A named tensor handed to [`partition_params`].
#[derive(Debug, Clone, PartialEq)]
pub struct NamedParam {
    pub name: String,
    pub dims: Vec<usize>,
    pub is_embedding: bool,
    pub values: Vec<f64>,
}

impl NamedParam {
    pub fn new(name: impl Into<String>, dims: &[usize], values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            dims: dims.to_vec(),
            is_embedding: false,
            values,
        }
    }

    pub fn embedding(mut self) -> Self {
        self.is_embedding = true;
        self
    }
}

/// Hybrid partitioning: 2-D non-embedding parameters go to the Muon family,
/// vectors and embedding tables to AdamW. Order is preserved.
pub fn partition_params(params: Vec<NamedParam>) -> Result<Vec<ParamSlot>, OptimError> {
    params
        .into_iter()
        .map(|p| {
            let shape = ParamShape::from_dims(&p.dims)?;
            let family = match shape {
                ParamShape::Matrix(..) if !p.is_embedding => Family::MuonFamily,
                _ => Family::AdamwFamily,
            };
            let (r, c) = shape.storage();
            let weights = Matrix::from_vec(r, c, p.values)?;
            ParamSlot::new(p.name, shape, family, weights)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_examples() {
        let slots = partition_params(vec![
            NamedParam::new("block.w", &[64, 64], vec![0.0; 64 * 64]),
            NamedParam::new("block.b", &[64], vec![0.0; 64]),
            NamedParam::new("wte", &[100, 16], vec![0.0; 1600]).embedding(),
        ])
        .unwrap();
        let fams: Vec<_> = slots.iter().map(|s| (s.id.as_str(), s.family)).collect();
        assert_eq!(
            fams,
            vec![
                ("block.w", Family::MuonFamily),
                ("block.b", Family::AdamwFamily),
                ("wte", Family::AdamwFamily),
            ]
        );
        assert_eq!(slots[1].weights.shape(), (1, 64));
    }

    #[test]
    fn partition_rejects_3d_and_bad_lengths() {
        let err = partition_params(vec![NamedParam::new("conv", &[3, 3, 3], vec![0.0; 27])]);
        assert!(matches!(err, Err(OptimError::UnsupportedShape(_))));
        let err = partition_params(vec![NamedParam::new("w", &[2, 2], vec![0.0; 3])]);
        assert!(err.is_err());
    }
}
