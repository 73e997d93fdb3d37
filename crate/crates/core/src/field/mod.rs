//! Trainable scene representation: dense multiresolution feature grids feed a
//! density head that emits the density and a latent embedding; two color
//! heads (well- and fast-exposed) map the embedding and the view direction to
//! colors.
//!
//! All trainables live in one flat `Vec<f64>`, ordered
//! `[grid levels | density head | well head | fast head]`, so each parameter
//! group is a contiguous range.

mod config;
mod mlp;

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{Aabb, Activation, FieldConfig};
pub(crate) use mlp::{sigmoid, softplus};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use mlp::Mlp;

const GRID_INIT_RANGE: f64 = 1e-4;

/// Which color heads to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heads {
    Well,
    Fast,
    Both,
}

impl Heads {
    pub fn well(self) -> bool {
        matches!(self, Heads::Well | Heads::Both)
    }

    pub fn fast(self) -> bool {
        matches!(self, Heads::Fast | Heads::Both)
    }
}

/// Colors produced by the selected heads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadColors {
    pub well: Option<[f64; 3]>,
    pub fast: Option<[f64; 3]>,
}

/// One evaluated point along a ray.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldSample {
    pub density: f64,
    pub color_well: [f64; 3],
    pub color_fast: [f64; 3],
}

/// Upstream gradient with respect to one [`FieldSample`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SampleGrad {
    pub density: f64,
    pub color_well: [f64; 3],
    pub color_fast: [f64; 3],
}

/// Disjoint, exhaustive parameter groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamPartition {
    /// Grids plus density/embedding head.
    pub shared: Range<usize>,
    pub well: Range<usize>,
    pub fast: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    level_offsets: Vec<usize>,
    head_start: usize,
    density: Mlp,
    well: Mlp,
    fast: Mlp,
}

impl Layout {
    fn new(cfg: &FieldConfig) -> Self {
        let mut level_offsets = Vec::with_capacity(cfg.grid_resolutions.len());
        let mut o = 0;
        for l in 0..cfg.grid_resolutions.len() {
            level_offsets.push(o);
            o += cfg.grid_table_len(l);
        }
        let density = Mlp::new(0, cfg.density_layer_sizes());
        let well = Mlp::new(density.param_count(), cfg.color_layer_sizes());
        let fast = Mlp::new(well.offset + well.param_count(), cfg.color_layer_sizes());
        Self {
            level_offsets,
            head_start: o,
            density,
            well,
            fast,
        }
    }

    fn head_param_count(&self) -> usize {
        self.fast.offset + self.fast.param_count()
    }
}

/// Parameters of the radiance field together with the configuration that
/// shapes them.
#[derive(Debug, Clone, PartialEq)]
pub struct RadianceFieldParams {
    config: FieldConfig,
    layout: Layout,
    values: Vec<f64>,
}

impl RadianceFieldParams {
    /// Fresh parameters: grid features uniform in +-1e-4, weights uniform in
    /// +-1/sqrt(fan_in), zero biases except the density output, which starts
    /// at `config.initial_density`.
    pub fn init(config: FieldConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(config.param_count());
        for _ in 0..layout.head_start {
            values.push(rng.gen_range(-GRID_INIT_RANGE..GRID_INIT_RANGE));
        }
        for mlp in [&layout.density, &layout.well, &layout.fast] {
            for k in 0..mlp.layers() {
                let fan_in = mlp.sizes[k];
                let bound = 1.0 / (fan_in as f64).sqrt();
                for _ in 0..fan_in * mlp.sizes[k + 1] {
                    values.push(rng.gen_range(-bound..bound));
                }
                values.extend(std::iter::repeat(0.0).take(mlp.sizes[k + 1]));
            }
        }
        debug_assert_eq!(values.len(), config.param_count());
        let mut field = Self {
            config,
            layout,
            values,
        };
        // Solve for the output bias that yields the target density on
        // all-zero grid features (grid noise is negligible at init).
        let d = &field.layout.density;
        let p = &field.values[field.layout.head_start..];
        let zeros = vec![0.0; field.config.grid_feature_dim()];
        let mut tape = vec![0.0; d.tape_len()];
        d.forward(
            p,
            &zeros,
            d.bias(p, 0),
            field.config.hidden_activation,
            &mut tape,
        );
        let pre = d.output(&tape)[0];
        let bias = field.density_output_bias_index();
        let target = inverse_softplus(field.config.initial_density);
        field.values[bias] += target - pre;
        Ok(field)
    }

    /// A field that is homogeneous inside its bounds: every weight and grid
    /// value is zero, and the output biases produce the requested density and
    /// head colors (each channel strictly inside `(0, 1)`).
    pub fn constant(
        config: FieldConfig,
        density: f64,
        well: [f64; 3],
        fast: [f64; 3],
    ) -> Result<Self> {
        config.validate()?;
        if !(density > 0.0 && density.is_finite()) {
            return Err(Error::Invalid(format!(
                "constant density {density} must be positive"
            )));
        }
        if well.iter().chain(&fast).any(|c| !(*c > 0.0 && *c < 1.0)) {
            return Err(Error::Invalid(
                "constant colors must lie strictly inside (0, 1)".into(),
            ));
        }
        let n = config.param_count();
        let mut f = Self::from_values(config, vec![0.0; n])?;
        let b = f.density_output_bias_index();
        f.values[b] = inverse_softplus(density);
        let part = f.partition();
        for (range, c) in [(part.well, well), (part.fast, fast)] {
            for k in 0..3 {
                f.values[range.end - 3 + k] = (c[k] / (1.0 - c[k])).ln();
            }
        }
        Ok(f)
    }

    pub fn from_values(config: FieldConfig, values: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if values.len() != config.param_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameter values for a field with {}",
                values.len(),
                config.param_count()
            )));
        }
        let layout = Layout::new(&config);
        Ok(Self {
            config,
            layout,
            values,
        })
    }

    pub fn config(&self) -> &FieldConfig {
        &self.config
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn partition(&self) -> ParamPartition {
        let h = self.layout.head_start;
        ParamPartition {
            shared: 0..h + self.layout.well.offset,
            well: h + self.layout.well.offset..h + self.layout.fast.offset,
            fast: h + self.layout.fast.offset..self.values.len(),
        }
    }

    /// Named contiguous blocks: one per grid level and one per head.
    pub fn blocks(&self) -> Vec<(String, Range<usize>)> {
        let mut out = Vec::new();
        for (l, &o) in self.layout.level_offsets.iter().enumerate() {
            out.push((format!("grid.{l}"), o..o + self.config.grid_table_len(l)));
        }
        let h = self.layout.head_start;
        out.push(("density".into(), h..h + self.layout.well.offset));
        let p = self.partition();
        out.push(("well".into(), p.well));
        out.push(("fast".into(), p.fast));
        out
    }

    pub fn grid_param_count(&self) -> usize {
        self.layout.head_start
    }

    fn heads_params(&self) -> &[f64] {
        &self.values[self.layout.head_start..]
    }

    fn density_output_bias_index(&self) -> usize {
        let d = &self.layout.density;
        self.layout.head_start + d.bias_offset(d.layers() - 1)
    }

    /// Density and embedding at `x`; zero for points outside the bounds.
    pub fn eval_density(&self, x: &Vec3) -> (f64, Vec<f64>) {
        let mut tape = FieldTape::default();
        self.record(&mut tape, std::slice::from_ref(x), &Vec3::x(), Heads::Well);
        (tape.samples[0].density, tape.embedding(0).to_vec())
    }

    /// Colors of the selected heads for an embedding and unit direction.
    pub fn eval_colors(&self, embedding: &[f64], dir: &Vec3, heads: Heads) -> Result<HeadColors> {
        if embedding.len() != self.config.embedding_dim {
            return Err(Error::DimensionMismatch(format!(
                "embedding of length {} (expected {})",
                embedding.len(),
                self.config.embedding_dim
            )));
        }
        let p = self.heads_params();
        let enc = encode_direction(dir, self.config.direction_encoding_bands);
        let e = self.config.embedding_dim;
        let eval = |mlp: &Mlp| {
            let mut pre = mlp.bias(p, 0).to_vec();
            mlp.first_layer_partial(p, e, &enc, &mut pre);
            let mut tape = vec![0.0; mlp.tape_len()];
            mlp.forward(p, embedding, &pre, self.config.hidden_activation, &mut tape);
            let o = mlp.output(&tape);
            [sigmoid(o[0]), sigmoid(o[1]), sigmoid(o[2])]
        };
        Ok(HeadColors {
            well: heads.well().then(|| eval(&self.layout.well)),
            fast: heads.fast().then(|| eval(&self.layout.fast)),
        })
    }

    /// Evaluates the field at `points` (all sharing view direction `dir`) and
    /// records everything the reverse pass needs into `tape`.
    pub fn record<'t>(
        &self,
        tape: &'t mut FieldTape,
        points: &[Vec3],
        dir: &Vec3,
        heads: Heads,
    ) -> &'t [FieldSample] {
        let cfg = &self.config;
        let lay = &self.layout;
        tape.prepare(self, points.len(), heads);
        let p = self.heads_params();

        encode_direction_into(dir, cfg.direction_encoding_bands, &mut tape.dir_enc);
        let e_dim = cfg.embedding_dim;
        for (on, mlp, pre) in [
            (heads.well(), &lay.well, &mut tape.dir_pre_well),
            (heads.fast(), &lay.fast, &mut tape.dir_pre_fast),
        ] {
            if on {
                pre.copy_from_slice(mlp.bias(p, 0));
                mlp.first_layer_partial(p, e_dim, &tape.dir_enc, pre);
            }
        }

        let n_levels = cfg.grid_resolutions.len();
        let feat_dim = cfg.grid_feature_dim();
        let act = cfg.hidden_activation;
        let st = tape.strides;
        for (i, x) in points.iter().enumerate() {
            let row = &mut tape.buf[i * st.total..(i + 1) * st.total];
            let (feats, rest) = row.split_at_mut(feat_dim);
            let (fracs, rest) = rest.split_at_mut(3 * n_levels);
            let (dens_tape, rest) = rest.split_at_mut(st.density);
            let (well_tape, fast_tape) = rest.split_at_mut(st.head);
            let inside = cfg.bounds.contains(x);
            tape.inside[i] = inside;
            let mut sample = FieldSample::default();
            if inside {
                self.grid_lookup(
                    x,
                    feats,
                    fracs,
                    &mut tape.bases[i * n_levels..(i + 1) * n_levels],
                );
                lay.density
                    .forward(p, feats, lay.density.bias(p, 0), act, dens_tape);
                sample.density = softplus(lay.density.output(dens_tape)[0]);
            } else {
                dens_tape.iter_mut().for_each(|v| *v = 0.0);
            }
            let e = &lay.density.output(dens_tape)[1..];
            if heads.well() {
                lay.well.forward(p, e, &tape.dir_pre_well, act, well_tape);
                let o = lay.well.output(well_tape);
                sample.color_well = [sigmoid(o[0]), sigmoid(o[1]), sigmoid(o[2])];
            }
            if heads.fast() {
                lay.fast
                    .forward(p, e, &tape.dir_pre_fast, act, &mut fast_tape[..st.head]);
                let o = lay.fast.output(fast_tape);
                sample.color_fast = [sigmoid(o[0]), sigmoid(o[1]), sigmoid(o[2])];
            }
            tape.samples[i] = sample;
        }
        tape.recorded = true;
        &tape.samples[..points.len()]
    }

    /// Reverse pass over a recorded evaluation, accumulating into `grads`.
    pub fn backward(
        &self,
        tape: &FieldTape,
        upstream: &[SampleGrad],
        grads: &mut Gradients,
    ) -> Result<()> {
        if !tape.recorded {
            return Err(Error::NoForward);
        }
        if upstream.len() != tape.n {
            return Err(Error::DimensionMismatch(format!(
                "{} upstream gradients for {} recorded samples",
                upstream.len(),
                tape.n
            )));
        }
        grads.ensure_shape(self);
        let cfg = &self.config;
        let lay = &self.layout;
        let p = self.heads_params();
        let act = cfg.hidden_activation;
        let n_levels = cfg.grid_resolutions.len();
        let feat_dim = cfg.grid_feature_dim();
        let e_dim = cfg.embedding_dim;
        let st = tape.strides;
        let heads = tape.heads.ok_or(Error::NoForward)?;

        let mut scratch = vec![0.0; 2 * lay.density.width().max(lay.well.width())];
        let mut d_first = vec![0.0; lay.density.first_hidden().max(lay.well.first_hidden())];
        let mut d_dir_well = vec![0.0; lay.well.first_hidden()];
        let mut d_dir_fast = vec![0.0; lay.fast.first_hidden()];
        let mut de = vec![0.0; e_dim];
        let mut de_head = vec![0.0; e_dim];
        let mut d_dens_out = vec![0.0; 1 + e_dim];
        let mut d_feats = vec![0.0; feat_dim];

        for (i, up) in upstream.iter().enumerate() {
            let row = &tape.buf[i * st.total..(i + 1) * st.total];
            let (feats, rest) = row.split_at(feat_dim);
            let (fracs, rest) = rest.split_at(3 * n_levels);
            let (dens_tape, rest) = rest.split_at(st.density);
            let (well_tape, fast_tape) = rest.split_at(st.head);
            let e = &lay.density.output(dens_tape)[1..];
            let sample = &tape.samples[i];
            de.iter_mut().for_each(|v| *v = 0.0);
            let mut any_color = false;

            for (on, mlp, htape, color, d_color, d_dir) in [
                (
                    heads.well(),
                    &lay.well,
                    well_tape,
                    &sample.color_well,
                    &up.color_well,
                    &mut d_dir_well,
                ),
                (
                    heads.fast(),
                    &lay.fast,
                    &fast_tape[..st.head],
                    &sample.color_fast,
                    &up.color_fast,
                    &mut d_dir_fast,
                ),
            ] {
                if !on || d_color.iter().all(|g| *g == 0.0) {
                    continue;
                }
                any_color = true;
                let d_out = [
                    d_color[0] * color[0] * (1.0 - color[0]),
                    d_color[1] * color[1] * (1.0 - color[1]),
                    d_color[2] * color[2] * (1.0 - color[2]),
                ];
                let hidden = mlp.first_hidden();
                mlp.backward(
                    p,
                    e,
                    htape,
                    &d_out,
                    act,
                    &mut grads.heads,
                    &mut d_first[..hidden],
                    Some(&mut de_head),
                    &mut scratch,
                );
                for (a, b) in d_dir.iter_mut().zip(&d_first[..hidden]) {
                    *a += b;
                }
                for (a, b) in de.iter_mut().zip(&de_head) {
                    *a += b;
                }
            }

            if !tape.inside[i] || (up.density == 0.0 && !any_color) {
                continue;
            }
            let out = lay.density.output(dens_tape);
            d_dens_out[0] = up.density * sigmoid(out[0]);
            d_dens_out[1..].copy_from_slice(&de);
            let hidden = lay.density.first_hidden();
            lay.density.backward(
                p,
                feats,
                dens_tape,
                &d_dens_out,
                act,
                &mut grads.heads,
                &mut d_first[..hidden],
                Some(&mut d_feats),
                &mut scratch,
            );
            let b0 = lay.density.bias_offset(0);
            for (g, d) in grads.heads[b0..b0 + hidden]
                .iter_mut()
                .zip(&d_first[..hidden])
            {
                *g += d;
            }
            let f = cfg.features_per_level;
            for l in 0..n_levels {
                grads.grid.push(GridGrad {
                    level: l as u32,
                    base: tape.bases[i * n_levels + l],
                    frac: [fracs[3 * l], fracs[3 * l + 1], fracs[3 * l + 2]],
                });
                grads
                    .grid_values
                    .extend_from_slice(&d_feats[l * f..(l + 1) * f]);
            }
        }

        let enc = &tape.dir_enc;
        for (on, mlp, d_dir) in [
            (heads.well(), &lay.well, &d_dir_well),
            (heads.fast(), &lay.fast, &d_dir_fast),
        ] {
            if !on {
                continue;
            }
            let n_in = mlp.sizes[0];
            let wo = mlp.weight_offset(0);
            let bo = mlp.bias_offset(0);
            for (o, &d) in d_dir.iter().enumerate() {
                grads.heads[bo + o] += d;
                if d == 0.0 {
                    continue;
                }
                let g = &mut grads.heads[wo + o * n_in + e_dim..wo + (o + 1) * n_in];
                for (gi, xi) in g.iter_mut().zip(enc) {
                    *gi += d * xi;
                }
            }
        }
        Ok(())
    }

    /// Trilinear lookup of every level at `x` (which must be inside the bounds).
    fn grid_lookup(&self, x: &Vec3, feats: &mut [f64], fracs: &mut [f64], bases: &mut [usize]) {
        let cfg = &self.config;
        let b = &cfg.bounds;
        let f = cfg.features_per_level;
        let xn = [
            (x[0] - b.min[0]) / b.extent(0),
            (x[1] - b.min[1]) / b.extent(1),
            (x[2] - b.min[2]) / b.extent(2),
        ];
        for (l, &res) in cfg.grid_resolutions.iter().enumerate() {
            let v = res + 1;
            let mut idx = [0usize; 3];
            let mut fr = [0f64; 3];
            for k in 0..3 {
                let s = (xn[k] * res as f64).clamp(0.0, res as f64);
                let i = (s.floor() as usize).min(res - 1);
                idx[k] = i;
                fr[k] = s - i as f64;
            }
            let base = self.layout.level_offsets[l] + ((idx[2] * v + idx[1]) * v + idx[0]) * f;
            bases[l] = base;
            fracs[3 * l..3 * l + 3].copy_from_slice(&fr);
            let (dx, dy, dz) = (f, v * f, v * v * f);
            let out = &mut feats[l * f..(l + 1) * f];
            out.iter_mut().for_each(|o| *o = 0.0);
            for (corner, w) in corner_weights(&fr) {
                let off = base + corner_offset(corner, dx, dy, dz);
                let table = &self.values[off..off + f];
                for c in 0..f {
                    out[c] += w * table[c];
                }
            }
        }
    }

    /// Index of the density output bias (exposed for analytic checks).
    pub fn density_bias_index(&self) -> usize {
        self.density_output_bias_index()
    }
}

#[inline]
fn corner_offset(corner: usize, dx: usize, dy: usize, dz: usize) -> usize {
    (corner & 1) * dx + ((corner >> 1) & 1) * dy + ((corner >> 2) & 1) * dz
}

#[inline]
fn corner_weights(fr: &[f64; 3]) -> [(usize, f64); 8] {
    let (x1, y1, z1) = (fr[0], fr[1], fr[2]);
    let (x0, y0, z0) = (1.0 - x1, 1.0 - y1, 1.0 - z1);
    [
        (0, x0 * y0 * z0),
        (1, x1 * y0 * z0),
        (2, x0 * y1 * z0),
        (3, x1 * y1 * z0),
        (4, x0 * y0 * z1),
        (5, x1 * y0 * z1),
        (6, x0 * y1 * z1),
        (7, x1 * y1 * z1),
    ]
}

pub(crate) fn inverse_softplus(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

/// `[d, sin(2^k pi d), cos(2^k pi d)]` for `k < bands`.
pub fn encode_direction(d: &Vec3, bands: usize) -> Vec<f64> {
    let mut out = vec![0.0; 3 + 6 * bands];
    encode_direction_into(d, bands, &mut out);
    out
}

fn encode_direction_into(d: &Vec3, bands: usize, out: &mut [f64]) {
    out[..3].copy_from_slice(&[d.x, d.y, d.z]);
    let mut freq = std::f64::consts::PI;
    for k in 0..bands {
        for a in 0..3 {
            let (s, c) = (freq * d[a]).sin_cos();
            out[3 + 6 * k + a] = s;
            out[3 + 6 * k + 3 + a] = c;
        }
        freq *= 2.0;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Strides {
    feats: usize,
    fracs: usize,
    embedding: usize,
    density: usize,
    head: usize,
    total: usize,
}

/// Recorded forward evaluation of one ray's samples. Reusable across rays.
#[derive(Debug, Clone, Default)]
pub struct FieldTape {
    n: usize,
    heads: Option<Heads>,
    recorded: bool,
    strides: Strides,
    buf: Vec<f64>,
    inside: Vec<bool>,
    bases: Vec<usize>,
    samples: Vec<FieldSample>,
    dir_enc: Vec<f64>,
    dir_pre_well: Vec<f64>,
    dir_pre_fast: Vec<f64>,
}

impl FieldTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_recorded(&self) -> bool {
        self.recorded
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn samples(&self) -> &[FieldSample] {
        &self.samples[..self.n]
    }

    /// Embedding of sample `i` (zero outside the bounds).
    pub fn embedding(&self, i: usize) -> &[f64] {
        let st = self.strides;
        let row = &self.buf[i * st.total..(i + 1) * st.total];
        let end = st.feats + st.fracs + st.density;
        &row[end - st.embedding..end]
    }

    fn prepare(&mut self, field: &RadianceFieldParams, n: usize, heads: Heads) {
        let cfg = &field.config;
        let lay = &field.layout;
        let strides = Strides {
            feats: cfg.grid_feature_dim(),
            fracs: 3 * cfg.grid_resolutions.len(),
            embedding: cfg.embedding_dim,
            density: lay.density.tape_len(),
            head: lay.well.tape_len(),
            total: cfg.grid_feature_dim()
                + 3 * cfg.grid_resolutions.len()
                + lay.density.tape_len()
                + 2 * lay.well.tape_len(),
        };
        self.strides = strides;
        self.n = n;
        self.heads = Some(heads);
        self.recorded = false;
        resize(&mut self.buf, n * strides.total);
        if self.inside.len() < n {
            self.inside.resize(n, false);
        }
        resize(&mut self.bases, n * cfg.grid_resolutions.len());
        if self.samples.len() < n {
            self.samples.resize(n, FieldSample::default());
        }
        self.dir_enc.resize(cfg.direction_encoding_dim(), 0.0);
        self.dir_pre_well.resize(lay.well.first_hidden(), 0.0);
        self.dir_pre_fast.resize(lay.fast.first_hidden(), 0.0);
    }
}

fn resize<T: Default + Clone>(v: &mut Vec<T>, n: usize) {
    if v.len() < n {
        v.resize(n, T::default());
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct GridGrad {
    level: u32,
    base: usize,
    frac: [f64; 3],
}

/// Gradient accumulator: dense over the heads, sparse over grid lookups.
///
/// Grid contributions are kept as a list of lookups and expanded in list
/// order by [`Gradients::add_to`], so reductions are reproducible.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    heads: Vec<f64>,
    grid: Vec<GridGrad>,
    grid_values: Vec<f64>,
}

impl Gradients {
    pub fn new(field: &RadianceFieldParams) -> Self {
        let mut g = Self::default();
        g.ensure_shape(field);
        g
    }

    fn ensure_shape(&mut self, field: &RadianceFieldParams) {
        let n = field.layout.head_param_count();
        if self.heads.len() != n {
            self.heads = vec![0.0; n];
        }
    }

    pub fn clear(&mut self) {
        self.heads.iter_mut().for_each(|v| *v = 0.0);
        self.grid.clear();
        self.grid_values.clear();
    }

    /// Adds these gradients into a dense vector laid out like the parameters.
    pub fn add_to(&self, field: &RadianceFieldParams, dense: &mut [f64]) {
        let h = field.layout.head_start;
        for (d, g) in dense[h..].iter_mut().zip(&self.heads) {
            *d += g;
        }
        let cfg = &field.config;
        let f = cfg.features_per_level;
        for (entry, df) in self.grid.iter().zip(self.grid_values.chunks_exact(f)) {
            let v = cfg.grid_resolutions[entry.level as usize] + 1;
            for (corner, w) in corner_weights(&entry.frac) {
                let off = entry.base + corner_offset(corner, f, v * f, v * v * f);
                for c in 0..f {
                    dense[off + c] += w * df[c];
                }
            }
        }
    }

    pub fn to_dense(&self, field: &RadianceFieldParams) -> Vec<f64> {
        let mut dense = vec![0.0; field.len()];
        self.add_to(field, &mut dense);
        dense
    }
}
