use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Axis-aligned box in scene units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        let b = Self { min, max };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for k in 0..3 {
            if !(self.min[k].is_finite() && self.max[k].is_finite() && self.max[k] > self.min[k]) {
                return Err(Error::Config(format!(
                    "degenerate bounds on axis {k}: [{}, {}]",
                    self.min[k], self.max[k]
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }

    pub fn padded(&self, pad: f64) -> Aabb {
        Aabb {
            min: self.min.map(|v| v - pad),
            max: self.max.map(|v| v + pad),
        }
    }

    pub fn center(&self) -> Vec3 {
        Vec3::new(
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        )
    }

    /// Parametric entry and exit distances of a ray, clipped to `t >= 0`.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, f64)> {
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for k in 0..3 {
            if dir[k] == 0.0 {
                if origin[k] < self.min[k] || origin[k] > self.max[k] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[k];
            let (mut a, mut b) = (
                (self.min[k] - origin[k]) * inv,
                (self.max[k] - origin[k]) * inv,
            );
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
        }
        (t1 > t0).then_some((t0, t1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Softplus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    /// Cells per axis for each grid level.
    pub grid_resolutions: Vec<usize>,
    pub features_per_level: usize,
    pub embedding_dim: usize,
    pub density_hidden: Vec<usize>,
    pub color_head_hidden: Vec<usize>,
    pub direction_encoding_bands: usize,
    pub hidden_activation: Activation,
    /// Density of the freshly initialized field, per scene unit.
    pub initial_density: f64,
    pub bounds: Aabb,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            grid_resolutions: vec![16, 32, 64, 128],
            features_per_level: 4,
            embedding_dim: 16,
            density_hidden: vec![32],
            color_head_hidden: vec![32, 32],
            direction_encoding_bands: 4,
            hidden_activation: Activation::Softplus,
            initial_density: 0.1,
            bounds: Aabb {
                min: [-1.0; 3],
                max: [1.0; 3],
            },
        }
    }
}

impl FieldConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::Config(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        if self.grid_resolutions.is_empty() {
            return Err(Error::Config("at least one grid level required".into()));
        }
        for &r in &self.grid_resolutions {
            positive("grid resolution", r)?;
        }
        positive("features_per_level", self.features_per_level)?;
        positive("embedding_dim", self.embedding_dim)?;
        for &h in self.density_hidden.iter().chain(&self.color_head_hidden) {
            positive("hidden layer width", h)?;
        }
        if !(self.initial_density > 0.0 && self.initial_density.is_finite()) {
            return Err(Error::Config("initial_density must be positive".into()));
        }
        self.bounds.validate()
    }

    pub fn grid_feature_dim(&self) -> usize {
        self.grid_resolutions.len() * self.features_per_level
    }

    pub fn direction_encoding_dim(&self) -> usize {
        3 + 6 * self.direction_encoding_bands
    }

    pub fn density_layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.grid_feature_dim()];
        s.extend(&self.density_hidden);
        s.push(1 + self.embedding_dim);
        s
    }

    pub fn color_layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.embedding_dim + self.direction_encoding_dim()];
        s.extend(&self.color_head_hidden);
        s.push(3);
        s
    }

    pub fn grid_table_len(&self, level: usize) -> usize {
        let v = self.grid_resolutions[level] + 1;
        v * v * v * self.features_per_level
    }

    pub fn grid_param_count(&self) -> usize {
        (0..self.grid_resolutions.len())
            .map(|l| self.grid_table_len(l))
            .sum()
    }

    pub fn density_head_param_count(&self) -> usize {
        mlp_param_count(&self.density_layer_sizes())
    }

    pub fn color_head_param_count(&self) -> usize {
        mlp_param_count(&self.color_layer_sizes())
    }

    pub fn param_count(&self) -> usize {
        self.grid_param_count()
            + self.density_head_param_count()
            + 2 * self.color_head_param_count()
    }
}

pub(crate) fn mlp_param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_counts() {
        let c = FieldConfig::default();
        assert_eq!(c.grid_feature_dim(), 16);
        assert_eq!(c.direction_encoding_dim(), 27);
        assert_eq!(c.density_layer_sizes(), vec![16, 32, 17]);
        assert_eq!(c.color_layer_sizes(), vec![43, 32, 32, 3]);
        assert_eq!(
            c.color_head_param_count(),
            43 * 32 + 32 + 32 * 32 + 32 + 32 * 3 + 3
        );
        assert_eq!(c.grid_table_len(0), 17 * 17 * 17 * 4);
    }

    #[test]
    fn validation() {
        let mut c = FieldConfig::default();
        assert!(c.validate().is_ok());
        c.features_per_level = 0;
        assert!(c.validate().is_err());
        let mut c = FieldConfig::default();
        c.bounds.max[1] = c.bounds.min[1];
        assert!(c.validate().is_err());
    }

    #[test]
    fn ray_box_intersection() {
        let b = Aabb::new([-1.0; 3], [1.0; 3]).unwrap();
        let (t0, t1) = b.intersect(&Vec3::zeros(), &Vec3::x()).unwrap();
        assert_eq!((t0, t1), (0.0, 1.0));
        let (t0, t1) = b.intersect(&Vec3::new(-3.0, 0.0, 0.0), &Vec3::x()).unwrap();
        assert_eq!((t0, t1), (2.0, 4.0));
        assert!(b
            .intersect(&Vec3::new(-3.0, 2.0, 0.0), &Vec3::x())
            .is_none());
    }
}
