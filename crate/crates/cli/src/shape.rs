use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Subcommand, ValueEnum};
use hoaseg::labels::{parse_landmarks, write_landmarks, LandmarkSet};
use hoaseg::shape::{
    fit_shape_model, iterate_fit, landmark_error, sample_patch_centers, ComponentSelector, DisplacementPredictor,
    NoisyOraclePredictor, OraclePredictor, OutputSpace, ShapeModel, ZeroPredictor,
};
use serde::Serialize;

use crate::manifest::RunManifest;
use crate::Exit;

#[derive(Subcommand, Debug)]
pub enum ShapeCommand {
    /// Fit a PCA shape model to complete landmark sets.
    Fit {
        #[arg(required = true)]
        landmarks: Vec<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
        /// Keep the fewest modes reaching this variance fraction.
        #[arg(long, default_value_t = 0.995, conflicts_with_all = ["components", "full"])]
        threshold: f64,
        /// Keep exactly this many modes.
        #[arg(long, conflicts_with = "full")]
        components: Option<usize>,
        /// Keep every non-degenerate mode.
        #[arg(long)]
        full: bool,
    },
    /// Project a landmark set onto the model and write its reconstruction.
    Apply {
        #[arg(long)]
        model: PathBuf,
        landmarks: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Iterate confidence-weighted updates towards a target landmark set.
    Iterate {
        #[arg(long)]
        model: PathBuf,
        /// Landmarks the predictor aims for.
        #[arg(long)]
        target: PathBuf,
        /// Starting landmarks; the model mean when omitted.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = PredictorKind::Oracle)]
        predictor: PredictorKind,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long, default_value_t = 1.0)]
        confidence: f64,
        /// Shape-space noise of the noisy oracle.
        #[arg(long, default_value_t = 0.5)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Draw training patch centres around each landmark.
    Sample {
        landmarks: PathBuf,
        /// Radius containing 95% of the offsets, in mm.
        #[arg(long)]
        radius: f64,
        /// Centres per landmark.
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        output: PathBuf,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorKind {
    Oracle,
    Noisy,
    Zero,
}

fn read_model(path: &Path) -> anyhow::Result<ShapeModel> {
    let text = std::fs::read_to_string(path).map_err(|e| hoaseg::Error::io(path, e))?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing shape model {}", path.display()))
        .map_err(|e| Exit::validation(format!("{e:#}")))
}

fn configuration(path: &Path) -> anyhow::Result<Vec<f64>> {
    let lm = parse_landmarks(path)?;
    lm.to_configuration()
        .with_context(|| format!("landmarks {}", path.display()))
}

pub fn run(command: ShapeCommand) -> anyhow::Result<()> {
    match command {
        ShapeCommand::Fit {
            landmarks,
            output,
            threshold,
            components,
            full,
        } => fit(&landmarks, &output, threshold, components, full),
        ShapeCommand::Apply { model, landmarks, output } => apply(&model, &landmarks, &output),
        ShapeCommand::Iterate {
            model,
            target,
            init,
            predictor,
            steps,
            confidence,
            sigma,
            seed,
            output,
        } => iterate(&IterateArgs {
            model,
            target,
            init,
            predictor,
            steps,
            confidence,
            sigma,
            seed,
            output,
        }),
        ShapeCommand::Sample {
            landmarks,
            radius,
            count,
            seed,
            output,
        } => sample(&landmarks, radius, count, seed, &output),
    }
}

fn fit(
    paths: &[PathBuf],
    output: &Path,
    threshold: f64,
    components: Option<usize>,
    full: bool,
) -> anyhow::Result<()> {
    let mut manifest = RunManifest::start("shape fit");
    let selector = match (components, full) {
        (_, true) => ComponentSelector::Full,
        (Some(k), false) => ComponentSelector::Fixed(k),
        (None, false) => ComponentSelector::VarianceFraction(threshold),
    };
    manifest.config(&selector);
    let mut configs = Vec::with_capacity(paths.len());
    for p in paths {
        manifest.input(p)?;
        configs.push(configuration(p)?);
    }
    let model = fit_shape_model(&configs, selector)?;
    std::fs::write(output, serde_json::to_string_pretty(&model)?).map_err(|e| hoaseg::Error::io(output, e))?;
    println!(
        "n_b = {} retaining {:.4} of the variance over {} sets",
        model.n_components(),
        model.variance_fraction_retained(),
        configs.len()
    );
    manifest.details(&serde_json::json!({
        "n_components": model.n_components(),
        "variance_fraction_retained": model.variance_fraction_retained(),
        "training_sets": configs.len(),
    }));
    manifest.output(output);
    manifest.finish(output)
}

fn apply(model_path: &Path, landmarks: &Path, output: &Path) -> anyhow::Result<()> {
    let mut manifest = RunManifest::start("shape apply");
    manifest.input(model_path)?;
    manifest.input(landmarks)?;
    let model = read_model(model_path)?;
    let x = configuration(landmarks)?;
    let b = model.project(&x)?;
    let back = model.reconstruct(&b)?;
    let err = landmark_error(&back, &x)?;
    write_landmarks(&LandmarkSet::from_configuration(&back)?, output)?;
    println!("mean reconstruction error {:.6} mm", err.mean);
    manifest.details(&serde_json::json!({ "shape_parameters": b, "reconstruction_error": err }));
    manifest.output(output);
    manifest.finish(output)
}

struct IterateArgs {
    model: PathBuf,
    target: PathBuf,
    init: Option<PathBuf>,
    predictor: PredictorKind,
    steps: usize,
    confidence: f64,
    sigma: f64,
    seed: u64,
    output: PathBuf,
}

#[derive(Serialize)]
struct TrajectoryStep {
    step: usize,
    mean_error_mm: f64,
    b: Vec<f64>,
}

/// Largest coordinate change treated as no movement.
const CONVERGED: f64 = 1e-9;

fn iterate(args: &IterateArgs) -> anyhow::Result<()> {
    let mut manifest = RunManifest::start("shape iterate");
    manifest.seed = Some(args.seed);
    manifest.input(&args.model)?;
    manifest.input(&args.target)?;
    if let Some(p) = &args.init {
        manifest.input(p)?;
    }
    manifest.config(&serde_json::json!({
        "predictor": format!("{:?}", args.predictor).to_lowercase(),
        "steps": args.steps,
        "confidence": args.confidence,
        "sigma": args.sigma,
    }));
    let model = read_model(&args.model)?;
    let target = configuration(&args.target)?;
    let b0 = match &args.init {
        Some(p) => model.project(&configuration(p)?)?,
        None => vec![0.0; model.n_components()],
    };
    let mut predictor: Box<dyn DisplacementPredictor> = match args.predictor {
        PredictorKind::Oracle => Box::new(OraclePredictor {
            target: target.clone(),
            confidence: args.confidence,
            space: OutputSpace::Shape,
        }),
        PredictorKind::Noisy => Box::new(NoisyOraclePredictor::new(
            target.clone(),
            args.sigma,
            args.confidence,
            args.seed,
        )),
        PredictorKind::Zero => Box::new(ZeroPredictor),
    };
    let trajectory = iterate_fit(&model, predictor.as_mut(), &b0, args.steps)?;
    let mut steps = Vec::with_capacity(trajectory.len());
    let mut converged = None;
    for (i, s) in trajectory.iter().enumerate() {
        let err = landmark_error(&s.x, &target)?.mean;
        log::info!("step {i}: mean error {err:.6} mm");
        if i > 0 && converged.is_none() {
            let moved = s.x.iter().zip(&trajectory[i - 1].x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if moved < CONVERGED {
                converged = Some(i - 1);
            }
        }
        steps.push(TrajectoryStep {
            step: i,
            mean_error_mm: err,
            b: s.b.clone(),
        });
    }
    match converged {
        Some(k) => println!("converged after {k} step(s)"),
        None => println!("not converged after {} step(s)", args.steps),
    }
    let final_x = &trajectory.last().expect("trajectory has the initial step").x;
    println!("final mean error {:.6} mm", steps.last().map_or(0.0, |s| s.mean_error_mm));
    let out = serde_json::json!({
        "converged_after": converged,
        "trajectory": steps,
        "final_landmarks": serde_json::from_str::<serde_json::Value>(&LandmarkSet::from_configuration(final_x)?.to_json_string())?,
    });
    std::fs::write(&args.output, serde_json::to_string_pretty(&out)?).map_err(|e| hoaseg::Error::io(&args.output, e))?;
    manifest.details(&serde_json::json!({ "converged_after": converged }));
    manifest.output(&args.output);
    manifest.finish(&args.output)
}

#[derive(Serialize)]
struct PatchRow {
    landmark: u8,
    x: f64,
    y: f64,
    z: f64,
    side: usize,
}

fn sample(landmarks: &Path, radius: f64, count: usize, seed: u64, output: &Path) -> anyhow::Result<()> {
    let mut manifest = RunManifest::start("shape sample");
    manifest.seed = Some(seed);
    manifest.input(landmarks)?;
    manifest.config(&serde_json::json!({ "radius": radius, "count": count }));
    let lm = parse_landmarks(landmarks)?;
    let mut w = csv::Writer::from_path(output).with_context(|| format!("creating {}", output.display()))?;
    for (id, p) in lm.iter() {
        // Independent stream per landmark so subsets reproduce.
        let stream = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(id as u64);
        for patch in sample_patch_centers(id, p, radius, count, stream)? {
            w.serialize(PatchRow {
                landmark: patch.landmark,
                x: patch.center[0],
                y: patch.center[1],
                z: patch.center[2],
                side: patch.side,
            })?;
        }
    }
    w.flush()?;
    manifest.output(output);
    manifest.finish(output)
}
