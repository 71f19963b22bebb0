use std::path::PathBuf;

use clap::{Args, ValueEnum};
use hoaseg::labels::write_landmarks;
use hoaseg::phantom::{degrade_phantom, generate_phantom, Degradation, PhantomSpec};
use hoaseg::volume::{write_volume, write_volume_as, Datatype};

use crate::manifest::RunManifest;

#[derive(Args, Debug)]
pub struct PhantomArgs {
    /// 26-label output volume.
    pub output: PathBuf,
    /// Landmark JSON output.
    #[arg(long)]
    pub landmarks: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, num_args = 3, value_names = ["X", "Y", "Z"], default_values_t = [96usize, 96, 96])]
    pub dims: Vec<usize>,
    /// Isotropic voxel size in mm.
    #[arg(long, default_value_t = 0.7)]
    pub spacing: f64,
    /// Use the fixed central layout instead of seeded positions.
    #[arg(long)]
    pub no_jitter: bool,
    /// Store labels as int16 instead of the smallest fitting type.
    #[arg(long)]
    pub int16: bool,
    /// Also write a fused, degraded copy here.
    #[arg(long, requires = "degraded_landmarks")]
    pub degraded: Option<PathBuf>,
    #[arg(long, requires = "degraded")]
    pub degraded_landmarks: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = DegradeMode::None)]
    pub degrade: DegradeMode,
    /// Flip probability, erosion iterations or jitter sigma (mm), per mode.
    #[arg(long, default_value_t = 0.0)]
    pub amount: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegradeMode {
    None,
    BoundaryNoise,
    Erosion,
    LandmarkJitter,
}

impl PhantomArgs {
    fn degradation(&self) -> Degradation {
        match self.degrade {
            DegradeMode::None => Degradation::None,
            DegradeMode::BoundaryNoise => Degradation::BoundaryNoise {
                probability: self.amount,
            },
            DegradeMode::Erosion => Degradation::Erosion {
                iterations: self.amount.max(0.0).round() as usize,
            },
            DegradeMode::LandmarkJitter => Degradation::LandmarkJitter { sigma_mm: self.amount },
        }
    }
}

pub fn run(args: &PhantomArgs) -> anyhow::Result<()> {
    let mut manifest = RunManifest::start("phantom");
    let spec = PhantomSpec {
        dims: [args.dims[0], args.dims[1], args.dims[2]],
        spacing: args.spacing,
        seed: args.seed,
        jitter: !args.no_jitter,
        ..PhantomSpec::default()
    };
    manifest.seed = Some(args.seed);
    manifest.config(&serde_json::json!({ "spec": spec, "degradation": args.degradation(), "int16": args.int16 }));
    let phantom = generate_phantom(&spec)?;
    let write = |vol, path: &PathBuf| -> anyhow::Result<()> {
        if args.int16 {
            write_volume_as(vol, Datatype::Int16, path)?;
        } else {
            write_volume(vol, path)?;
        }
        Ok(())
    };
    write(&phantom.labels, &args.output)?;
    write_landmarks(&phantom.landmarks, &args.landmarks)?;
    manifest.output(&args.output);
    manifest.output(&args.landmarks);
    if let (Some(vol_path), Some(lm_path)) = (&args.degraded, &args.degraded_landmarks) {
        let (vol12, lm) = degrade_phantom(&phantom.labels, &phantom.landmarks, args.degradation(), args.seed)?;
        write(&vol12, vol_path)?;
        write_landmarks(&lm, lm_path)?;
        manifest.output(vol_path);
        manifest.output(lm_path);
    }
    let hash = phantom.content_hash();
    println!("{hash}");
    manifest.details(&serde_json::json!({ "content_hash": hash }));
    manifest.finish(&args.output)
}
