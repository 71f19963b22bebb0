//! PCA shape space over 16-landmark configurations, confidence-weighted
//! iterative parameter updates, and the training patch-centre sampler.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::labels::{LANDMARKS, LANDMARK_COUNT};
use crate::volume::Point3;

/// Length of a concatenated landmark configuration.
pub const CONFIG_LEN: usize = 3 * LANDMARK_COUNT;

/// Eigenvalues below this fraction of the largest count as zero.
const RANK_TOLERANCE: f64 = 1e-10;

/// How many principal components to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentSelector {
    Fixed(usize),
    /// Smallest count whose cumulative variance fraction reaches the threshold.
    VarianceFraction(f64),
    /// Every component with non-zero variance.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ShapeModelFile", into = "ShapeModelFile")]
pub struct ShapeModel {
    mean: DVector<f64>,
    components: DMatrix<f64>,
    mode_variances: Vec<f64>,
    variance_fraction_retained: f64,
}

/// On-disk form: components stored row-major (`CONFIG_LEN` rows).
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ShapeModelFile {
    landmark_order: Vec<u8>,
    n_components: usize,
    mean: Vec<f64>,
    components: Vec<f64>,
    mode_variances: Vec<f64>,
    variance_fraction_retained: f64,
}

impl From<ShapeModel> for ShapeModelFile {
    fn from(m: ShapeModel) -> Self {
        let nb = m.n_components();
        let mut components = Vec::with_capacity(CONFIG_LEN * nb);
        for r in 0..CONFIG_LEN {
            for c in 0..nb {
                components.push(m.components[(r, c)]);
            }
        }
        ShapeModelFile {
            landmark_order: LANDMARKS.iter().map(|l| l.id).collect(),
            n_components: nb,
            mean: m.mean.iter().copied().collect(),
            components,
            mode_variances: m.mode_variances,
            variance_fraction_retained: m.variance_fraction_retained,
        }
    }
}

impl TryFrom<ShapeModelFile> for ShapeModel {
    type Error = Error;

    fn try_from(f: ShapeModelFile) -> Result<Self> {
        let nb = f.n_components;
        if f.mean.len() != CONFIG_LEN {
            return Err(Error::DimensionMismatch {
                expected: CONFIG_LEN,
                found: f.mean.len(),
            });
        }
        if f.components.len() != CONFIG_LEN * nb {
            return Err(Error::DimensionMismatch {
                expected: CONFIG_LEN * nb,
                found: f.components.len(),
            });
        }
        if f.mode_variances.len() != nb {
            return Err(Error::DimensionMismatch {
                expected: nb,
                found: f.mode_variances.len(),
            });
        }
        Ok(ShapeModel {
            mean: DVector::from_vec(f.mean),
            components: DMatrix::from_row_slice(CONFIG_LEN, nb, &f.components),
            mode_variances: f.mode_variances,
            variance_fraction_retained: f.variance_fraction_retained,
        })
    }
}

fn check_len(x: &[f64], expected: usize) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: x.len(),
        });
    }
    Ok(())
}

/// Fit mean and principal components (sample covariance, divisor N-1).
/// Each component is signed so its largest-magnitude entry is positive.
pub fn fit_shape_model(configs: &[Vec<f64>], selector: ComponentSelector) -> Result<ShapeModel> {
    if configs.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: configs.len(),
        });
    }
    for x in configs {
        check_len(x, CONFIG_LEN)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite landmark coordinate in training set".into()));
        }
    }
    let n = configs.len();
    let mut mean = DVector::zeros(CONFIG_LEN);
    for x in configs {
        mean += DVector::from_column_slice(x);
    }
    mean /= n as f64;
    let mut centered = DMatrix::zeros(n, CONFIG_LEN);
    for (r, x) in configs.iter().enumerate() {
        for c in 0..CONFIG_LEN {
            centered[(r, c)] = x[c] - mean[c];
        }
    }
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..CONFIG_LEN).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroTotalVariance);
    }
    let rank = values.iter().filter(|&&v| v > RANK_TOLERANCE * values[0]).count();

    let nb = match selector {
        ComponentSelector::Full => rank,
        ComponentSelector::Fixed(k) => {
            if k == 0 || k > CONFIG_LEN {
                return Err(Error::Config(format!("component count {k} outside 1..={CONFIG_LEN}")));
            }
            k
        }
        ComponentSelector::VarianceFraction(tau) => {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(Error::Config(format!("variance threshold {tau} outside (0, 1]")));
            }
            let mut cum = 0.0;
            let mut k = rank;
            for (i, v) in values.iter().enumerate() {
                cum += v;
                if cum >= tau * total * (1.0 - 1e-12) {
                    k = i + 1;
                    break;
                }
            }
            k.min(rank).max(1)
        }
    };

    let mut components = DMatrix::zeros(CONFIG_LEN, nb);
    for (c, &src) in order.iter().take(nb).enumerate() {
        let col = eig.eigenvectors.column(src);
        let mut big = 0;
        for r in 1..CONFIG_LEN {
            if col[r].abs() > col[big].abs() {
                big = r;
            }
        }
        let sign = if col[big] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..CONFIG_LEN {
            components[(r, c)] = sign * col[r];
        }
    }
    let mode_variances = values[..nb].to_vec();
    let kept: f64 = mode_variances.iter().sum();
    Ok(ShapeModel {
        mean,
        components,
        mode_variances,
        variance_fraction_retained: kept / total,
    })
}

impl ShapeModel {
    pub fn n_components(&self) -> usize {
        self.components.ncols()
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    /// Component matrix, one column per mode.
    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn mode_variances(&self) -> &[f64] {
        &self.mode_variances
    }

    pub fn variance_fraction_retained(&self) -> f64 {
        self.variance_fraction_retained
    }

    /// Mean plus the weighted components.
    pub fn reconstruct(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(b, self.n_components())?;
        let x = &self.mean + &self.components * DVector::from_column_slice(b);
        Ok(x.as_slice().to_vec())
    }

    /// Least-squares shape parameters of a configuration.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(x, CONFIG_LEN)?;
        let d = DVector::from_column_slice(x) - &self.mean;
        Ok((self.components.transpose() * d).as_slice().to_vec())
    }

    /// Map a landmark-space displacement into shape space.
    pub fn project_displacement(&self, dx: &[f64]) -> Result<Vec<f64>> {
        check_len(dx, CONFIG_LEN)?;
        Ok((self.components.transpose() * DVector::from_column_slice(dx)).as_slice().to_vec())
    }
}

/// Displacement predicted for the current shape estimate.
#[derive(Debug, Clone, PartialEq)]
pub enum Displacement {
    /// In shape-parameter space (length `n_components`).
    Shape(Vec<f64>),
    /// In landmark space (length `CONFIG_LEN`), mapped through the components.
    Landmarks(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub displacement: Displacement,
    /// Per-parameter confidence; clamped to `[0, 1]` before use.
    pub confidence: Vec<f64>,
}

/// Source of displacement updates for [`iterate_fit`].
pub trait DisplacementPredictor {
    fn predict(&mut self, model: &ShapeModel, b: &[f64], x: &[f64]) -> Result<Prediction>;
}

/// Which space an oracle reports its displacement in.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputSpace {
    #[default]
    Shape,
    Landmarks,
}

/// Exact displacement towards a known target configuration.
#[derive(Debug, Clone)]
pub struct OraclePredictor {
    pub target: Vec<f64>,
    pub confidence: f64,
    pub space: OutputSpace,
}

impl DisplacementPredictor for OraclePredictor {
    fn predict(&mut self, model: &ShapeModel, b: &[f64], x: &[f64]) -> Result<Prediction> {
        let displacement = match self.space {
            OutputSpace::Shape => {
                let target = model.project(&self.target)?;
                Displacement::Shape(target.iter().zip(b).map(|(t, c)| t - c).collect())
            }
            OutputSpace::Landmarks => {
                check_len(&self.target, CONFIG_LEN)?;
                Displacement::Landmarks(self.target.iter().zip(x).map(|(t, c)| t - c).collect())
            }
        };
        Ok(Prediction {
            displacement,
            confidence: vec![self.confidence; model.n_components()],
        })
    }
}

/// Oracle displacement plus i.i.d. Gaussian noise in shape space.
#[derive(Debug, Clone)]
pub struct NoisyOraclePredictor {
    pub target: Vec<f64>,
    pub sigma: f64,
    pub confidence: f64,
    rng: ChaCha8Rng,
}

impl NoisyOraclePredictor {
    pub fn new(target: Vec<f64>, sigma: f64, confidence: f64, seed: u64) -> Self {
        NoisyOraclePredictor {
            target,
            sigma,
            confidence,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl DisplacementPredictor for NoisyOraclePredictor {
    fn predict(&mut self, model: &ShapeModel, b: &[f64], _x: &[f64]) -> Result<Prediction> {
        let target = model.project(&self.target)?;
        let noise = Normal::new(0.0, self.sigma.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
        let d = target
            .iter()
            .zip(b)
            .map(|(t, c)| t - c + noise.sample(&mut self.rng))
            .collect();
        Ok(Prediction {
            displacement: Displacement::Shape(d),
            confidence: vec![self.confidence; model.n_components()],
        })
    }
}

/// Always predicts no movement.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPredictor;

impl DisplacementPredictor for ZeroPredictor {
    fn predict(&mut self, model: &ShapeModel, _b: &[f64], _x: &[f64]) -> Result<Prediction> {
        let nb = model.n_components();
        Ok(Prediction {
            displacement: Displacement::Shape(vec![0.0; nb]),
            confidence: vec![1.0; nb],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStep {
    pub b: Vec<f64>,
    pub x: Vec<f64>,
}

/// Run `steps` updates `b += clamp(P, 0, 1) * d`, reconstructing the
/// landmarks after each. The trajectory starts with the initial estimate.
pub fn iterate_fit(
    model: &ShapeModel,
    predictor: &mut dyn DisplacementPredictor,
    b0: &[f64],
    steps: usize,
) -> Result<Vec<FitStep>> {
    let nb = model.n_components();
    check_len(b0, nb)?;
    let mut b = b0.to_vec();
    let mut x = model.reconstruct(&b)?;
    let mut trajectory = Vec::with_capacity(steps + 1);
    trajectory.push(FitStep { b: b.clone(), x: x.clone() });
    for _ in 0..steps {
        let pred = predictor.predict(model, &b, &x)?;
        let d = match pred.displacement {
            Displacement::Shape(d) => {
                check_len(&d, nb)?;
                d
            }
            Displacement::Landmarks(dx) => model.project_displacement(&dx)?,
        };
        check_len(&pred.confidence, nb)?;
        for ((bi, di), pi) in b.iter_mut().zip(&d).zip(&pred.confidence) {
            *bi += pi.clamp(0.0, 1.0) * di;
        }
        x = model.reconstruct(&b)?;
        trajectory.push(FitStep { b: b.clone(), x: x.clone() });
    }
    Ok(trajectory)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkErrors {
    pub per_landmark: Vec<f64>,
    pub mean: f64,
}

/// Euclidean error per landmark and their mean, in mm.
pub fn landmark_error(pred: &[f64], gt: &[f64]) -> Result<LandmarkErrors> {
    check_len(pred, CONFIG_LEN)?;
    check_len(gt, CONFIG_LEN)?;
    let per_landmark: Vec<f64> = pred
        .chunks_exact(3)
        .zip(gt.chunks_exact(3))
        .map(|(p, g)| ((p[0] - g[0]).powi(2) + (p[1] - g[1]).powi(2) + (p[2] - g[2]).powi(2)).sqrt())
        .collect();
    let mean = per_landmark.iter().sum::<f64>() / per_landmark.len() as f64;
    Ok(LandmarkErrors { per_landmark, mean })
}

/// 95th percentile of the norm of a standard 3D Gaussian.
pub fn chi3_q95() -> f64 {
    ChiSquared::new(3.0).expect("3 degrees of freedom").inverse_cdf(0.95).sqrt()
}

/// Per-axis standard deviation such that 95% of isotropic Gaussian
/// displacements fall within `radius`.
pub fn derive_sigma(radius: f64) -> Result<f64> {
    if radius < 0.0 || radius.is_nan() {
        return Err(Error::NegativeRadius(radius));
    }
    Ok(radius / chi3_q95())
}

/// Cubic patch side in voxels.
pub const PATCH_SIDE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub landmark: u8,
    pub center: Point3,
    pub side: usize,
}

/// Draw `n` patch centres around `p` with isotropic Gaussian offsets.
pub fn sample_patch_centers(landmark: u8, p: Point3, radius: f64, n: usize, seed: u64) -> Result<Vec<PatchSpec>> {
    if n == 0 {
        return Err(Error::TooFewSamples { needed: 1, found: 0 });
    }
    let sigma = derive_sigma(radius)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    Ok((0..n)
        .map(|_| PatchSpec {
            landmark,
            center: [
                p[0] + normal.sample(&mut rng),
                p[1] + normal.sample(&mut rng),
                p[2] + normal.sample(&mut rng),
            ],
            side: PATCH_SIDE,
        })
        .collect())
}
