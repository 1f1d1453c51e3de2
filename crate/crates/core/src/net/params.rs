use crate::warmstart::FeatureDim;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Self::Relu => 0,
            Self::Tanh => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Self::Relu),
            1 => Some(Self::Tanh),
            _ => None,
        }
    }
}

/// How the top-K pseudo-reduced costs of a row are summarized for the
/// refinement layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum RefinePooling {
    /// The K values in ascending order, projected by a K x H matrix.
    #[default]
    Sorted,
    Mean,
    Max,
}

impl RefinePooling {
    pub fn tag(self) -> u8 {
        match self {
            Self::Sorted => 0,
            Self::Mean => 1,
            Self::Max => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Self::Sorted),
            1 => Some(Self::Mean),
            2 => Some(Self::Max),
            _ => None,
        }
    }
}

/// Which costs the refinement stage ranks and summarizes for row `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum RefineCosts {
    /// Pseudo-reduced costs `C[i][j] - u_init[i]`: the row's own cheapest
    /// entries relative to its initial bid.
    #[default]
    Row,
    /// Reduced costs `C[i][j] - u_init[i] - v_init[j]` with `v_init` from the
    /// min trick on `u_init`, which tells each row how far its best columns
    /// are from being won. Rows interact only through these column minima.
    Reduced,
}

impl RefineCosts {
    pub fn tag(self) -> u8 {
        match self {
            Self::Row => 0,
            Self::Reduced => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Self::Row),
            1 => Some(Self::Reduced),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub feature_dim: FeatureDim,
    pub hidden: usize,
    pub num_blocks: usize,
    pub refine_k: usize,
    pub activation: Activation,
    pub pooling: RefinePooling,
    pub refine_costs: RefineCosts,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            feature_dim: FeatureDim::D21,
            hidden: 192,
            num_blocks: 3,
            refine_k: 16,
            activation: Activation::Relu,
            pooling: RefinePooling::Sorted,
            refine_costs: RefineCosts::Row,
        }
    }
}

impl ModelConfig {
    pub fn input_dim(&self) -> usize {
        self.feature_dim.width()
    }

    /// Width of the refinement layer input.
    pub fn refine_width(&self) -> usize {
        match self.pooling {
            RefinePooling::Sorted => self.refine_k,
            RefinePooling::Mean | RefinePooling::Max => 1,
        }
    }
}

/// Pre-norm residual block: `h + W2 act(W1 LN(h) + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub ln_gain: Array1<f64>,
    pub ln_bias: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// All weights of the row potential predictor. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub w_in: Array2<f64>,
    pub b_in: Array1<f64>,
    pub blocks: Vec<ResidualBlock>,
    pub w_ref: Array2<f64>,
    pub b_ref: Array1<f64>,
    /// Output head, shared by the intermediate and final estimates.
    pub w_out: Array1<f64>,
    pub b_out: Array1<f64>,
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..bound))
}

impl ModelParams {
    pub fn zeros(config: ModelConfig) -> Self {
        let h = config.hidden;
        let block = ResidualBlock {
            ln_gain: Array1::zeros(h),
            ln_bias: Array1::zeros(h),
            w1: Array2::zeros((h, h)),
            b1: Array1::zeros(h),
            w2: Array2::zeros((h, h)),
            b2: Array1::zeros(h),
        };
        Self {
            config,
            w_in: Array2::zeros((config.input_dim(), h)),
            b_in: Array1::zeros(h),
            blocks: vec![block; config.num_blocks],
            w_ref: Array2::zeros((config.refine_width(), h)),
            b_ref: Array1::zeros(h),
            w_out: Array1::zeros(h),
            b_out: Array1::zeros(1),
        }
    }

    /// He-uniform hidden layers, unit layer-norm gains, small heads.
    pub fn init(config: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = config.hidden;
        let mut p = Self::zeros(config);
        let he = |fan_in: usize| (6.0 / fan_in as f64).sqrt();
        p.w_in = uniform(&mut rng, config.input_dim(), h, he(config.input_dim()));
        for b in &mut p.blocks {
            b.ln_gain.fill(1.0);
            b.w1 = uniform(&mut rng, h, h, he(h));
            // keep each residual branch small at the start
            b.w2 = uniform(&mut rng, h, h, he(h) * 0.1);
        }
        p.w_ref = uniform(
            &mut rng,
            config.refine_width(),
            h,
            0.1 / (config.refine_width() as f64).sqrt(),
        );
        p.w_out =
            Array1::from_shape_simple_fn(h, || rng.random_range(-1.0..1.0) / (h as f64).sqrt());
        p
    }

    /// Same shapes, all values zero.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config)
    }

    /// `(name, shape, values)` for every tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        fn s1(a: &Array1<f64>) -> &[f64] {
            a.as_slice().expect("contiguous")
        }
        fn s2(a: &Array2<f64>) -> &[f64] {
            a.as_slice().expect("contiguous")
        }
        let mut out = vec![
            (
                "w_in".to_string(),
                self.w_in.shape().to_vec(),
                s2(&self.w_in),
            ),
            (
                "b_in".to_string(),
                self.b_in.shape().to_vec(),
                s1(&self.b_in),
            ),
        ];
        for (k, b) in self.blocks.iter().enumerate() {
            out.push((
                format!("block{k}.ln_gain"),
                b.ln_gain.shape().to_vec(),
                s1(&b.ln_gain),
            ));
            out.push((
                format!("block{k}.ln_bias"),
                b.ln_bias.shape().to_vec(),
                s1(&b.ln_bias),
            ));
            out.push((format!("block{k}.w1"), b.w1.shape().to_vec(), s2(&b.w1)));
            out.push((format!("block{k}.b1"), b.b1.shape().to_vec(), s1(&b.b1)));
            out.push((format!("block{k}.w2"), b.w2.shape().to_vec(), s2(&b.w2)));
            out.push((format!("block{k}.b2"), b.b2.shape().to_vec(), s1(&b.b2)));
        }
        out.push((
            "w_ref".to_string(),
            self.w_ref.shape().to_vec(),
            s2(&self.w_ref),
        ));
        out.push((
            "b_ref".to_string(),
            self.b_ref.shape().to_vec(),
            s1(&self.b_ref),
        ));
        out.push((
            "w_out".to_string(),
            self.w_out.shape().to_vec(),
            s1(&self.w_out),
        ));
        out.push((
            "b_out".to_string(),
            self.b_out.shape().to_vec(),
            s1(&self.b_out),
        ));
        out
    }

    /// Mutable views in the same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        fn m1(a: &mut Array1<f64>) -> &mut [f64] {
            a.as_slice_mut().expect("contiguous")
        }
        fn m2(a: &mut Array2<f64>) -> &mut [f64] {
            a.as_slice_mut().expect("contiguous")
        }
        let mut out = vec![m2(&mut self.w_in), m1(&mut self.b_in)];
        for b in &mut self.blocks {
            out.push(m1(&mut b.ln_gain));
            out.push(m1(&mut b.ln_bias));
            out.push(m2(&mut b.w1));
            out.push(m1(&mut b.b1));
            out.push(m2(&mut b.w2));
            out.push(m1(&mut b.b2));
        }
        out.push(m2(&mut self.w_ref));
        out.push(m1(&mut self.b_ref));
        out.push(m1(&mut self.w_out));
        out.push(m1(&mut self.b_out));
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.2.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.num_params());
        for (_, _, v) in self.tensors() {
            flat.extend_from_slice(v);
        }
        flat
    }

    pub fn load_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for t in self.tensors_mut() {
            let len = t.len();
            t.copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
        assert_eq!(offset, flat.len(), "flat parameter length mismatch");
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &Self) {
        let src = other.to_flat();
        let mut offset = 0;
        for t in self.tensors_mut() {
            for x in t.iter_mut() {
                *x += src[offset];
                offset += 1;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.2.iter().all(|x| x.is_finite()))
    }
}
