use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Heads;
use crate::imaging::{Crf, CrfPair};
use crate::render::{RayBatch, RenderOutput};

/// Pixel space in which residuals are measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LossSpace {
    /// Stored (gamma-encoded) pixel values.
    Display,
    /// Values mapped through the inverse response first.
    Linear(CrfPair),
}

impl LossSpace {
    pub(crate) fn crf(&self, heads: Heads) -> Option<Crf> {
        match self {
            LossSpace::Display => None,
            LossSpace::Linear(pair) => Some(if heads == Heads::Fast {
                pair.fast
            } else {
                pair.well
            }),
        }
    }
}

/// Squared residual of one channel and its derivative with respect to the
/// prediction.
#[inline]
pub(crate) fn channel_term(z: f64, target: f64, crf: Option<&Crf>) -> (f64, f64) {
    match crf {
        None => {
            let r = z - target;
            (r * r, 2.0 * r)
        }
        Some(c) => {
            let r = c.inverse(z) - c.inverse(target);
            (r * r, 2.0 * r * c.inverse_derivative(z))
        }
    }
}

/// Mean squared error and its gradient with respect to the predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotometricLoss {
    pub value: f64,
    /// Mean over the well terms alone, when selected.
    pub well: Option<f64>,
    pub fast: Option<f64>,
    pub d_well: Vec<[f64; 3]>,
    pub d_fast: Vec<[f64; 3]>,
}

/// Mean squared error over the valid rays, the three channels and the
/// selected heads.
pub fn photometric_loss(
    pred: &RenderOutput,
    batch: &RayBatch,
    which: Heads,
    space: LossSpace,
) -> Result<PhotometricLoss> {
    let n = batch.len();
    if pred.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {n} rays",
            pred.len()
        )));
    }
    let valid = batch.valid_count();
    if valid == 0 {
        return Err(Error::EmptyBatch);
    }
    let heads = [(Heads::Well, which.well()), (Heads::Fast, which.fast())];
    let count = (3 * valid * heads.iter().filter(|h| h.1).count()) as f64;
    let mut out = PhotometricLoss {
        value: 0.0,
        well: None,
        fast: None,
        d_well: vec![[0.0; 3]; n],
        d_fast: vec![[0.0; 3]; n],
    };
    for (head, on) in heads {
        if !on {
            continue;
        }
        let (z, t, d) = match head {
            Heads::Well => (
                Some(&pred.z_well),
                batch.target_well.as_ref(),
                &mut out.d_well,
            ),
            _ => (
                pred.z_fast.as_ref(),
                batch.target_fast.as_ref(),
                &mut out.d_fast,
            ),
        };
        let name = if head == Heads::Well { "well" } else { "fast" };
        let z = z.ok_or_else(|| Error::Invalid(format!("no {name} predictions")))?;
        let t = t.ok_or_else(|| Error::Invalid(format!("batch has no {name} targets")))?;
        let crf = space.crf(head);
        let mut sum = 0.0;
        for i in (0..n).filter(|&i| batch.valid[i]) {
            for c in 0..3 {
                let (sq, g) = channel_term(z[i][c], t[i][c], crf.as_ref());
                sum += sq;
                d[i][c] = g / count;
            }
        }
        out.value += sum / count;
        let mean = sum / (3 * valid) as f64;
        match head {
            Heads::Well => out.well = Some(mean),
            _ => out.fast = Some(mean),
        }
    }
    Ok(out)
}
