//! End-to-end acceptance checks, one PASS/FAIL line each.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use hoaseg::labels::{fine, fuse_labels, fused, LandmarkSet, FINE_COUNT};
use hoaseg::metrics::{
    benjamini_hochberg, default_boundary_specs, default_line_specs, dice, evaluate_pair, extract_separation_line,
    line_metrics, mean_nearest_distance, pasd, scan_direction, wilcoxon_differences, Alternative, BoundarySpec,
    SideSet, SurfaceKind, EXACT_MAX_N,
};
use hoaseg::phantom::{degrade_phantom, generate_phantom, Degradation, PhantomSpec};
use hoaseg::refine::{landmark_slice, refine_full, refine_with_report, RefinementConfig, Side};
use hoaseg::shape::{
    chi3_q95, derive_sigma, fit_shape_model, iterate_fit, landmark_error, sample_patch_centers, ComponentSelector,
    NoisyOraclePredictor, OraclePredictor, OutputSpace, ZeroPredictor, CONFIG_LEN,
};
use hoaseg::volume::{read_volume, write_volume_as, Affine, AnyVolume, Datatype, LabelVolume};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("round-trip exactness", round_trip_exactness),
        ("closure", closure),
        ("degradation ordering", degradation_ordering),
        ("straightness", straightness),
        ("metric oracle equivalence", metric_oracles),
        ("shape-model algebra", shape_algebra),
        ("iterative fit", iterative_fit),
        ("patch sampler", patch_sampler),
        ("wilcoxon / benjamini-hochberg", wilcoxon_bh),
        ("nifti round-trip", nifti_round_trip),
        ("performance and determinism", performance),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1} s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1} s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

const SEEDS: std::ops::Range<u64> = 100..120;

fn round_trip_exactness() -> Outcome {
    let start = Instant::now();
    let cfg = RefinementConfig::default();
    let (specs, lines) = (default_boundary_specs(), default_line_specs());
    for seed in SEEDS {
        let p = phantom(seed);
        let v12 = fuse_labels(&p.labels).map_err(|e| e.to_string())?;
        let refined = refine_full(&v12, &p.landmarks, &cfg).map_err(|e| format!("seed {seed}: {e}"))?;
        let report = evaluate_pair("p", &refined, &p.labels, &p.landmarks, &specs, &lines).map_err(|e| e.to_string())?;
        for d in &report.dice {
            check(d.value == 1.0, || format!("seed {seed}: Dice {} = {}", d.name, d.value))?;
        }
        for b in &report.boundaries {
            check(b.pasd == Some(0.0), || format!("seed {seed}: PASD {} {:?} = {:?}", b.region, b.side, b.pasd))?;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("{} phantoms, 26 Dice = 1 and 15 PASD = 0 each, {secs:.1} s", SEEDS.end - SEEDS.start))
}

fn closure() -> Outcome {
    let cfg = RefinementConfig::default();
    let mut quiet = 0;
    let mut fired = 0;
    for seed in SEEDS {
        let p = phantom(seed);
        let modes = [
            Degradation::None,
            Degradation::BoundaryNoise { probability: 0.3 },
            Degradation::Erosion { iterations: 1 },
        ];
        for mode in modes {
            let (mut v12, _) = degrade_phantom(&p.labels, &p.landmarks, mode, seed).map_err(|e| e.to_string())?;
            if mode == Degradation::None {
                // Plant third-ventricle voxels in front of its first slice.
                let j9 = landmark_slice(&v12, p.landmarks.get(9).unwrap());
                let [nx, ny, nz] = v12.dims();
                let mut planted = 0;
                for k in 0..nz {
                    for j in (j9 + 1).max(0) as usize..ny {
                        for i in 0..nx {
                            if v12.get(i, j, k) == fused::CSF && planted < 40 && (i + j + k) % 3 == 0 {
                                v12.set(i, j, k, fused::V3);
                                planted += 1;
                            }
                        }
                    }
                }
                check(planted > 0, || format!("seed {seed}: nothing to plant"))?;
            }
            let (refined, report) = refine_with_report(&v12, &p.landmarks, &cfg).map_err(|e| format!("seed {seed}: {e}"))?;
            let back = fuse_labels(&refined).map_err(|e| e.to_string())?;
            let mut changed = 0;
            for (idx, (&a, &b)) in v12.data().iter().zip(back.data()).enumerate() {
                if a != b {
                    check(a == fused::V3 && b == fused::CSF, || {
                        format!("seed {seed} {mode:?}: voxel {idx} went {a} -> {b}")
                    })?;
                    changed += 1;
                }
            }
            if report.extents.third_ventricle_excluded == 0 {
                check(changed == 0, || format!("seed {seed} {mode:?}: {changed} voxels changed"))?;
                quiet += 1;
            } else {
                check(changed == report.extents.third_ventricle_excluded, || {
                    format!("seed {seed}: {changed} changed, {} excluded", report.extents.third_ventricle_excluded)
                })?;
                fired += 1;
            }
        }
    }
    check(quiet > 0 && fired > 0, || format!("{quiet} quiet / {fired} fired"))?;
    Ok(format!("{quiet} volumes exact, {fired} with the third-ventricle rule firing changed only 3 -> 2"))
}

fn mean_dice(pred: &LabelVolume, gt: &LabelVolume) -> f64 {
    (1..=FINE_COUNT).map(|l| dice(pred, gt, l).unwrap()).sum::<f64>() / FINE_COUNT as f64
}

fn degradation_ordering() -> Outcome {
    let sigmas = [0.0, 1.33, 1.97];
    let cfg = RefinementConfig::default();
    let mut means = [0.0; 3];
    let mut errors = 0;
    for seed in SEEDS {
        let p = phantom(seed);
        for (s, &sigma) in sigmas.iter().enumerate() {
            let mode = Degradation::LandmarkJitter { sigma_mm: sigma };
            let (v12, lm) = degrade_phantom(&p.labels, &p.landmarks, mode, seed).map_err(|e| e.to_string())?;
            // A refinement failure counts as a total miss.
            means[s] += match refine_full(&v12, &lm, &cfg) {
                Ok(refined) => mean_dice(&refined, &p.labels),
                Err(_) => {
                    errors += 1;
                    0.0
                }
            };
        }
    }
    let n = (SEEDS.end - SEEDS.start) as f64;
    means.iter_mut().for_each(|m| *m /= n);
    let detail = format!(
        "mean Dice {:.4} > {:.4} > {:.4} at sigma 0 / 1.33 / 1.97 mm ({errors} refinement failures)",
        means[0], means[1], means[2]
    );
    check(means[0] >= 0.999 && means[0] > means[1] && means[1] > means[2], || detail.clone())?;
    Ok(detail)
}

fn straightness() -> Outcome {
    let cfg = RefinementConfig::default();
    check(!cfg.slice_adjust, || "slice adjustment on by default".into())?;
    let mut lines = 0;
    for seed in SEEDS {
        let p = phantom(seed);
        let refined = refine_full(&fuse_labels(&p.labels).unwrap(), &p.landmarks, &cfg).map_err(|e| e.to_string())?;
        let report = evaluate_pair("p", &refined, &p.labels, &p.landmarks, &[], &default_line_specs())
            .map_err(|e| e.to_string())?;
        for l in &report.lines {
            check(l.sigma_y == Some(0.0), || format!("seed {seed}: {} {:?} sigma_y {:?}", l.region, l.side, l.sigma_y))?;
            lines += 1;
        }
    }
    Ok(format!("{lines} refined separation lines, all with sigma_y = 0"))
}

// Metric oracles -------------------------------------------------------------

fn random_volume(rng: &mut ChaCha8Rng, labels: &[u16]) -> LabelVolume {
    let dims = [rng.random_range(16..=32), rng.random_range(16..=32), rng.random_range(16..=32)];
    let spacing = [rng.random_range(0.5..1.5), rng.random_range(0.5..1.5), rng.random_range(0.5..1.5)];
    let origin = [rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)];
    let affine = Affine::diagonal(spacing, origin).unwrap();
    let mut vol = LabelVolume::filled(dims, spacing, affine, 0).unwrap();
    for _ in 0..rng.random_range(3..10) {
        let label = labels[rng.random_range(0..labels.len())];
        let lo: Vec<usize> = dims.iter().map(|&d| rng.random_range(0..d - 4)).collect();
        let hi: Vec<usize> = (0..3).map(|a| rng.random_range(lo[a] + 2..=dims[a])).collect();
        for k in lo[2]..hi[2] {
            for j in lo[1]..hi[1] {
                for i in lo[0]..hi[0] {
                    vol.set(i, j, k, label);
                }
            }
        }
    }
    vol
}

fn perturb(rng: &mut ChaCha8Rng, vol: &LabelVolume, labels: &[u16]) -> LabelVolume {
    let mut out = vol.clone();
    for v in out.data_mut() {
        if rng.random::<f64>() < 0.05 {
            *v = labels[rng.random_range(0..labels.len())];
        }
    }
    out
}

fn dice_oracle(a: &LabelVolume, b: &LabelVolume, label: u16) -> f64 {
    let in_a: Vec<usize> = (0..a.len()).filter(|&i| a.data()[i] == label).collect();
    let in_b: Vec<usize> = (0..b.len()).filter(|&i| b.data()[i] == label).collect();
    if in_a.is_empty() && in_b.is_empty() {
        return 1.0;
    }
    let common = in_a.iter().filter(|i| b.data()[**i] == label).count();
    2.0 * common as f64 / (in_a.len() + in_b.len()) as f64
}

fn centre(vol: &LabelVolume, i: usize, j: usize, k: usize) -> [f64; 3] {
    let a = vol.affine().rows();
    let v = [i as f64, j as f64, k as f64];
    [0, 1, 2].map(|r| a[r][0] * v[0] + a[r][1] * v[1] + a[r][2] * v[2] + a[r][3])
}

/// Protocol surface and predicted side set written out from the definition.
fn pasd_oracle(gt: &LabelVolume, pred: &LabelVolume, spec: &BoundarySpec, plane: Option<i64>) -> Option<f64> {
    let [nx, ny, nz] = gt.dims();
    let mut surface = Vec::new();
    let mut targets = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if gt.get(i, j, k) == spec.label {
                    let on_surface = match (spec.surface, plane) {
                        (SurfaceKind::Lateral, _) => {
                            let n = spec.neighbour.unwrap();
                            (i > 0 && gt.get(i - 1, j, k) == n) || (i + 1 < nx && gt.get(i + 1, j, k) == n)
                        }
                        (_, Some(p)) => j as i64 == p + spec.slice_offset,
                        _ => unreachable!(),
                    };
                    if on_surface {
                        surface.push(centre(gt, i, j, k));
                    }
                }
                if pred.get(i, j, k) == spec.label {
                    let keep = match (spec.side_set, spec.surface, plane) {
                        (SideSet::WholeLabel, _, _) => true,
                        (SideSet::PlaneSide, SurfaceKind::Anterior, Some(p)) => j as i64 <= p,
                        (SideSet::PlaneSide, SurfaceKind::Posterior, Some(p)) => j as i64 >= p,
                        _ => unreachable!(),
                    };
                    if keep {
                        targets.push(centre(pred, i, j, k));
                    }
                }
            }
        }
    }
    if surface.is_empty() || targets.is_empty() {
        return None;
    }
    let total: f64 = surface
        .iter()
        .map(|s| {
            targets
                .iter()
                .map(|t| ((s[0] - t[0]).powi(2) + (s[1] - t[1]).powi(2) + (s[2] - t[2]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Some(total / surface.len() as f64)
}

fn line_oracle(pred: &[f64], gt: &[f64]) -> (f64, f64) {
    let n = pred.len() as f64;
    let mae = pred.iter().zip(gt).map(|(p, g)| (p - g).abs()).sum::<f64>() / n;
    // Welford update for the population variance.
    let (mut mean, mut m2) = (0.0, 0.0);
    for (c, &x) in pred.iter().enumerate() {
        let d = x - mean;
        mean += d / (c + 1) as f64;
        m2 += d * (x - mean);
    }
    (mae, (m2 / n).sqrt())
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let labels = [fine::PUT_L, fine::NACC_L, fine::CAU_L, fine::PUT_R];
    let specs = [
        BoundarySpec {
            region: "Put".into(),
            surface: SurfaceKind::Anterior,
            side: Some(Side::Left),
            label: fine::PUT_L,
            neighbour: None,
            landmark: Some(1),
            slice_offset: 0,
            side_set: SideSet::PlaneSide,
        },
        BoundarySpec {
            region: "NAcc".into(),
            surface: SurfaceKind::Posterior,
            side: Some(Side::Left),
            label: fine::NACC_L,
            neighbour: None,
            landmark: Some(7),
            slice_offset: 1,
            side_set: SideSet::PlaneSide,
        },
        BoundarySpec {
            region: "NAcc".into(),
            surface: SurfaceKind::Lateral,
            side: Some(Side::Left),
            label: fine::NACC_L,
            neighbour: Some(fine::PUT_L),
            landmark: None,
            slice_offset: 0,
            side_set: SideSet::WholeLabel,
        },
    ];
    let (mut dice_checks, mut pasd_checks, mut line_checks) = (0, 0, 0);
    let mut worst: f64 = 0.0;
    for case in 0..120 {
        let gt = random_volume(&mut rng, &labels);
        let pred = perturb(&mut rng, &gt, &labels);
        for l in 0..=FINE_COUNT {
            let got = dice(&pred, &gt, l).map_err(|e| e.to_string())?;
            let diff = (got - dice_oracle(&pred, &gt, l)).abs();
            worst = worst.max(diff);
            check(diff <= 1e-9, || format!("case {case}: Dice label {l} off by {diff}"))?;
            dice_checks += 1;
        }
        let [_, ny, _] = gt.dims();
        let plane = rng.random_range(0..ny);
        let mut lm = LandmarkSet::new();
        let p = centre(&gt, 0, plane, 0);
        lm.insert(1, p).unwrap();
        lm.insert(7, p).unwrap();
        for spec in &specs {
            let plane = spec.landmark.map(|_| plane as i64);
            let expect = pasd_oracle(&gt, &pred, spec, plane);
            match (pasd(&gt, &pred, spec, &lm), expect) {
                (Ok(got), Some(want)) => {
                    let diff = (got - want).abs();
                    worst = worst.max(diff);
                    check(diff <= 1e-9, || format!("case {case}: PASD {} off by {diff}", spec.name()))?;
                    pasd_checks += 1;
                }
                (Err(_), None) => {}
                (got, want) => return Err(format!("case {case}: PASD {} gave {got:?}, oracle {want:?}", spec.name())),
            }
        }
        // Separation lines on every slice holding both labels.
        for (slice_axis, scan_axis) in [(0usize, 1usize), (1, 0), (2, 0)] {
            for slice in 0..gt.dims()[slice_axis] {
                let (a, b) = (fine::NACC_L, fine::PUT_L);
                let Some(dir) = scan_direction(&gt, slice_axis, slice, a, b, scan_axis) else { continue };
                let (Ok(g), Ok(q)) = (
                    extract_separation_line(&gt, slice_axis, slice, a, b, scan_axis, dir),
                    extract_separation_line(&pred, slice_axis, slice, a, b, scan_axis, dir),
                ) else {
                    continue;
                };
                let gp: Vec<f64> = g.positions.iter().map(|&y| y as f64).collect();
                let mut qp: Vec<f64> = q.positions.iter().map(|&y| y as f64).collect();
                qp.resize(gp.len(), qp.last().copied().unwrap_or(0.0));
                let got = line_metrics(&qp, &gp).map_err(|e| e.to_string())?;
                let (mae, sd) = line_oracle(&qp, &gp);
                let diff = (got.mae - mae).abs().max((got.sigma_y - sd).abs());
                worst = worst.max(diff);
                check(diff <= 1e-9, || format!("case {case}: line metrics off by {diff}"))?;
                line_checks += 1;
            }
        }
    }
    // Nearest-distance search under an oblique affine.
    for case in 0..20 {
        let base = random_volume(&mut rng, &labels);
        let t: f64 = rng.random_range(0.0..1.0);
        let rows = [
            [0.8 * t.cos(), -0.8 * t.sin(), 0.1, 3.0],
            [0.7 * t.sin(), 0.7 * t.cos(), 0.2, -4.0],
            [0.05, -0.1, 1.1, 1.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        let vol = LabelVolume::new(base.dims(), base.spacing(), Affine::from_rows(rows).unwrap(), base.data().to_vec()).unwrap();
        let mask: Vec<bool> = vol.data().iter().map(|&v| v == fine::PUT_L).collect();
        if !mask.iter().any(|&m| m) {
            continue;
        }
        let surface: Vec<[f64; 3]> = (0..30)
            .map(|_| [rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0)])
            .collect();
        let got = mean_nearest_distance(&surface, &vol, &mask).map_err(|e| e.to_string())?;
        let [nx, ny, nz] = vol.dims();
        let mut total = 0.0;
        for s in &surface {
            let mut best = f64::INFINITY;
            for k in 0..nz {
                for j in 0..ny {
                    for i in 0..nx {
                        if mask[vol.index(i, j, k)] {
                            let c = centre(&vol, i, j, k);
                            best = best.min(((s[0] - c[0]).powi(2) + (s[1] - c[1]).powi(2) + (s[2] - c[2]).powi(2)).sqrt());
                        }
                    }
                }
            }
            total += best;
        }
        let diff = (got - total / surface.len() as f64).abs();
        worst = worst.max(diff);
        check(diff <= 1e-9, || format!("oblique case {case}: off by {diff}"))?;
        pasd_checks += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 120.0, || format!("took {secs:.1} s"))?;
    check(pasd_checks >= 100 && line_checks >= 100, || format!("only {pasd_checks} PASD / {line_checks} line checks"))?;
    Ok(format!(
        "120 volumes: {dice_checks} Dice, {pasd_checks} PASD, {line_checks} line checks, max deviation {worst:.1e}, {secs:.1} s"
    ))
}

// Shape model ------------------------------------------------------------------

fn phantom_configs(n: u64) -> Vec<Vec<f64>> {
    (0..n).map(|s| phantom(1000 + s).landmarks.to_configuration().unwrap()).collect()
}

fn shape_algebra() -> Outcome {
    let data = phantom_configs(80);
    let model = fit_shape_model(&data, ComponentSelector::Full).map_err(|e| e.to_string())?;
    let w = model.components();
    let nb = model.n_components();
    let mut gram_err: f64 = 0.0;
    for a in 0..nb {
        for b in 0..nb {
            let dot: f64 = (0..CONFIG_LEN).map(|r| w[(r, a)] * w[(r, b)]).sum();
            gram_err = gram_err.max((dot - if a == b { 1.0 } else { 0.0 }).abs());
        }
    }
    check(gram_err < 1e-9, || format!("W^T W deviates by {gram_err}"))?;
    let mut recon_err: f64 = 0.0;
    for x in &data {
        let back = model.reconstruct(&model.project(x).unwrap()).unwrap();
        recon_err = back.iter().zip(x).fold(recon_err, |m, (a, b)| m.max((a - b).abs()));
    }
    check(recon_err < 1e-9, || format!("full-rank reconstruction error {recon_err}"))?;
    let reduced = fit_shape_model(&data, ComponentSelector::Fixed(5)).map_err(|e| e.to_string())?;
    let mut ortho: f64 = 0.0;
    for x in &data {
        let back = reduced.reconstruct(&reduced.project(x).unwrap()).unwrap();
        for k in 0..reduced.n_components() {
            let dot: f64 = (0..CONFIG_LEN).map(|r| reduced.components()[(r, k)] * (x[r] - back[r])).sum();
            ortho = ortho.max(dot.abs());
        }
    }
    check(ortho < 1e-9, || format!("residual not orthogonal: {ortho}"))?;
    Ok(format!(
        "80 phantom configurations, rank {nb}: |W^T W - I| {gram_err:.1e}, reconstruction {recon_err:.1e}, residual dot {ortho:.1e}"
    ))
}

fn iterative_fit() -> Outcome {
    let data = phantom_configs(80);
    let model = fit_shape_model(&data, ComponentSelector::Full).map_err(|e| e.to_string())?;
    let b0 = vec![0.0; model.n_components()];
    let target = data[17].clone();
    let max_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    for space in [OutputSpace::Shape, OutputSpace::Landmarks] {
        let mut oracle = OraclePredictor { target: target.clone(), confidence: 1.0, space };
        let t = iterate_fit(&model, &mut oracle, &b0, 3).map_err(|e| e.to_string())?;
        check(max_diff(&t[0].x, &target) > 1e-3, || "start already at target".into())?;
        for s in &t[1..] {
            let d = max_diff(&s.x, &target);
            check(d < 1e-9, || format!("{space:?} oracle off target by {d} after step 1"))?;
        }
        let mut frozen = OraclePredictor { target: target.clone(), confidence: 0.0, space };
        let t = iterate_fit(&model, &mut frozen, &b0, 5).map_err(|e| e.to_string())?;
        check(t.iter().all(|s| s.b == b0), || "P = 0 moved".into())?;
    }
    let t = iterate_fit(&model, &mut ZeroPredictor, &b0, 5).map_err(|e| e.to_string())?;
    check(t.iter().all(|s| s.b == b0), || "zero predictor moved".into())?;
    let mut improving = 0;
    for seed in 0..100 {
        let mut p = NoisyOraclePredictor::new(target.clone(), 0.5, 0.5, seed);
        let t = iterate_fit(&model, &mut p, &b0, 10).map_err(|e| e.to_string())?;
        let err = |x: &[f64]| landmark_error(x, &target).unwrap().mean;
        if err(&t[10].x) < err(&t[0].x) {
            improving += 1;
        }
    }
    check(improving >= 95, || format!("noisy oracle improved in {improving}/100"))?;
    Ok(format!("oracle exact after 1 step, P = 0 fixed, noisy oracle improved in {improving}/100"))
}

/// Chi(3) distribution function by Simpson integration of its density.
fn chi3_cdf(r: f64) -> f64 {
    let n = 4000;
    let h = r / n as f64;
    let f = |x: f64| (2.0 / std::f64::consts::PI).sqrt() * x * x * (-x * x / 2.0).exp();
    let mut s = f(0.0) + f(r);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn patch_sampler() -> Outcome {
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if chi3_cdf(mid) < 0.95 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    check((chi3_q95() - lo).abs() < 1e-9, || format!("quantile {} vs integrated {lo}", chi3_q95()))?;
    let radius = 6.0;
    let sigma = derive_sigma(radius).map_err(|e| e.to_string())?;
    check((sigma * lo - radius).abs() < 1e-9, || format!("sigma {sigma}"))?;
    let c = [12.0, -3.0, 5.5];
    let patches = sample_patch_centers(9, c, radius, 1_000_000, 77).map_err(|e| e.to_string())?;
    let inside = patches
        .iter()
        .filter(|p| ((p.center[0] - c[0]).powi(2) + (p.center[1] - c[1]).powi(2) + (p.center[2] - c[2]).powi(2)).sqrt() <= radius)
        .count();
    let frac = inside as f64 / patches.len() as f64;
    check((frac - 0.95).abs() <= 0.002, || format!("in-radius fraction {frac}"))?;
    Ok(format!("chi(3) q95 {:.9}, in-radius fraction {frac:.5} over 1e6 draws", chi3_q95()))
}

// Statistics -------------------------------------------------------------------

/// Two-sided p-value by enumerating all 2^n sign assignments of the
/// absolute differences' midranks.
fn enumerate_p(diffs: &[f64]) -> f64 {
    let d: Vec<f64> = diffs.iter().copied().filter(|&x| x != 0.0).collect();
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks: Vec<f64> = abs
        .iter()
        .map(|a| {
            let below = abs.iter().filter(|b| *b < a).count() as f64;
            let equal = abs.iter().filter(|b| *b == a).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let n = d.len();
    let total = 1u64 << n;
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0..total {
        let w: f64 = (0..n).filter(|b| mask >> b & 1 == 1).map(|b| ranks[b]).sum();
        if w <= observed + 1e-9 {
            le += 1;
        }
        if w >= observed - 1e-9 {
            ge += 1;
        }
    }
    (2.0 * le.min(ge) as f64 / total as f64).min(1.0)
}

fn wilcoxon_bh() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut fixtures = 0;
    for n in 5..=12usize {
        assert!(n <= EXACT_MAX_N);
        for f in 0..25 {
            // Coarse grid values produce ties and zeros.
            let diffs: Vec<f64> = (0..n).map(|_| rng.random_range(-4i32..=6) as f64 * 0.5).collect();
            if diffs.iter().filter(|&&x| x != 0.0).count() < 5 {
                continue;
            }
            let got = wilcoxon_differences(&diffs, Alternative::TwoSided).map_err(|e| e.to_string())?;
            let want = enumerate_p(&diffs);
            check(got.exact && (got.p_value - want).abs() < 1e-12, || {
                format!("n {n} fixture {f}: p {} vs enumeration {want} for {diffs:?}", got.p_value)
            })?;
            fixtures += 1;
        }
    }
    let five = wilcoxon_differences(&[1.0, 2.0, 3.0, 4.0, 5.0], Alternative::TwoSided).map_err(|e| e.to_string())?;
    check(five.p_value == 0.0625, || format!("all-positive n = 5 gave {}", five.p_value))?;
    let (adjusted, rejected) = benjamini_hochberg(&[0.01, 0.02, 0.04], 0.05);
    let hand = [0.03, 0.03, 0.04];
    check(adjusted.iter().zip(hand).all(|(a, b)| (a - b).abs() < 1e-15), || format!("BH adjusted {adjusted:?}"))?;
    check(rejected == [true, true, true], || format!("BH rejections {rejected:?}"))?;
    let (_, strict) = benjamini_hochberg(&[0.01, 0.02, 0.04], 0.03);
    check(strict == [true, true, false], || format!("BH at 0.03 rejections {strict:?}"))?;
    Ok(format!("{fixtures} fixtures match enumeration, n = 5 p = 0.0625, BH adjusted {adjusted:?}"))
}

// NIfTI --------------------------------------------------------------------------

fn payload(path: &Path) -> Vec<u8> {
    let bytes = std::fs::read(path).unwrap();
    let offset = f32::from_le_bytes(bytes[108..112].try_into().unwrap()) as usize;
    bytes[offset..].to_vec()
}

fn expected_payload(values: &[u16], dt: Datatype) -> Vec<u8> {
    values
        .iter()
        .flat_map(|&v| match dt {
            Datatype::Uint8 => vec![v as u8],
            Datatype::Int16 => (v as i16).to_le_bytes().to_vec(),
            Datatype::Uint16 => v.to_le_bytes().to_vec(),
            Datatype::Int32 => (v as i32).to_le_bytes().to_vec(),
            Datatype::Float32 => (v as f32).to_le_bytes().to_vec(),
        })
        .collect()
}

/// A single-file header written field by field.
fn hand_header(big_endian: bool, dims: [i16; 3], datatype: i16, bitpix: i16, srow: [[f32; 4]; 3]) -> Vec<u8> {
    let mut h = vec![0u8; 352];
    let put16 = |h: &mut Vec<u8>, at: usize, v: i16| {
        let b = if big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
        h[at..at + 2].copy_from_slice(&b);
    };
    let put32 = |h: &mut Vec<u8>, at: usize, v: i32| {
        let b = if big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
        h[at..at + 4].copy_from_slice(&b);
    };
    let putf = |h: &mut Vec<u8>, at: usize, v: f32| {
        let b = if big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
        h[at..at + 4].copy_from_slice(&b);
    };
    put32(&mut h, 0, 348);
    put16(&mut h, 40, 3);
    for (a, d) in dims.iter().enumerate() {
        put16(&mut h, 42 + 2 * a, *d);
    }
    for a in 3..7 {
        put16(&mut h, 42 + 2 * a, 1);
    }
    put16(&mut h, 70, datatype);
    put16(&mut h, 72, bitpix);
    putf(&mut h, 76, 1.0);
    for a in 0..3 {
        putf(&mut h, 80 + 4 * a, srow[a][a].abs());
    }
    putf(&mut h, 108, 352.0);
    put16(&mut h, 254, 1);
    for (r, row) in srow.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            putf(&mut h, 280 + 16 * r + 4 * c, *v);
        }
    }
    h[344..348].copy_from_slice(b"n+1\0");
    h
}

fn nifti_round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dims = [7, 5, 6];
    let affine = Affine::from_rows([
        [0.0, -1.5, 0.0, 10.0],
        [0.7, 0.0, 0.0, -20.0],
        [0.0, 0.0, 1.2, 5.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
    .unwrap();
    let mut formats = 0;
    for dt in [Datatype::Uint8, Datatype::Int16, Datatype::Int32, Datatype::Float32, Datatype::Uint16] {
        let max = match dt {
            Datatype::Uint8 => 255,
            Datatype::Int16 => i16::MAX as u16,
            _ => u16::MAX,
        };
        let values: Vec<u16> = (0..dims.iter().product::<usize>()).map(|_| rng.random_range(0..=max)).collect();
        let vol = LabelVolume::new(dims, [1.5, 0.7, 1.2], affine, values.clone()).unwrap();
        let first = dir.path().join(format!("{dt:?}.nii"));
        write_volume_as(&vol, dt, &first).map_err(|e| e.to_string())?;
        let want = expected_payload(&values, dt);
        check(payload(&first) == want, || format!("{dt:?}: payload differs from the encoded values"))?;
        let again = dir.path().join(format!("{dt:?}_again.nii.gz"));
        let read = read_volume(&first).map_err(|e| e.to_string())?;
        let decoded: Vec<f64> = match &read {
            AnyVolume::Label(v) => v.data().iter().map(|&x| x as f64).collect(),
            AnyVolume::Scalar(v) => v.data().to_vec(),
        };
        check(decoded.iter().zip(&values).all(|(a, b)| *a == *b as f64), || format!("{dt:?}: values changed"))?;
        match read {
            AnyVolume::Label(v) => write_volume_as(&v, dt, &again),
            AnyVolume::Scalar(v) => write_volume_as(&v, dt, &again),
        }
        .map_err(|e| e.to_string())?;
        let plain = dir.path().join(format!("{dt:?}_plain.nii"));
        match read_volume(&again).map_err(|e| e.to_string())? {
            AnyVolume::Label(v) => write_volume_as(&v, dt, &plain),
            AnyVolume::Scalar(v) => write_volume_as(&v, dt, &plain),
        }
        .map_err(|e| e.to_string())?;
        check(payload(&plain) == want, || format!("{dt:?}: gzip round trip changed the payload"))?;
        formats += 1;
    }

    let srow = [[0.8f32, 0.0, 0.0, -10.0], [0.0, 0.9, 0.0, 4.0], [0.0, 0.0, 1.1, -2.5]];
    let values: Vec<i16> = (0..3 * 4 * 2).map(|i| i * 37 - 100).collect();
    let mut parsed = Vec::new();
    for big in [false, true] {
        let mut bytes = hand_header(big, [3, 4, 2], 4, 16, srow);
        for v in &values {
            bytes.extend_from_slice(&if big { v.to_be_bytes() } else { v.to_le_bytes() });
        }
        let path = dir.path().join(if big { "be.nii" } else { "le.nii" });
        std::fs::write(&path, bytes).unwrap();
        let vol = match read_volume(&path).map_err(|e| format!("big endian {big}: {e}"))? {
            AnyVolume::Scalar(v) => v,
            AnyVolume::Label(_) => return Err("negative int16 read as labels".into()),
        };
        check(vol.dims() == [3, 4, 2], || format!("dims {:?}", vol.dims()))?;
        check(vol.data().iter().zip(&values).all(|(a, b)| *a == *b as f64), || "values differ".into())?;
        let origin = vol.voxel_to_world([0.0, 0.0, 0.0]);
        check((origin[0] + 10.0).abs() < 1e-6 && (origin[1] - 4.0).abs() < 1e-6, || format!("origin {origin:?}"))?;
        parsed.push(vol);
    }
    check(parsed[0] == parsed[1], || "endianness changed the parsed volume".into())?;
    Ok(format!("{formats} datatypes byte-identical through plain and gzip files; hand-built headers agree across endianness"))
}

// Performance --------------------------------------------------------------------

fn timed(args: &[&str]) -> Result<Duration, String> {
    let start = Instant::now();
    let out = hoaseg(args);
    let t = start.elapsed();
    check(out.status.success(), || format!("{args:?}: {}", stderr(&out)))?;
    Ok(t)
}

fn performance() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let big = generate_phantom(&PhantomSpec {
        dims: [260, 311, 260],
        seed: 1,
        ..PhantomSpec::default()
    })
    .map_err(|e| e.to_string())?;
    let v26 = dir.path().join("big26.nii");
    let v12 = dir.path().join("big12.nii");
    let lm = write_lm(dir.path(), "big.json", &big.landmarks);
    write_volume_as(&big.labels, Datatype::Int16, &v26).map_err(|e| e.to_string())?;
    // Best of three runs against scheduling noise.
    let mut fuse = Duration::MAX;
    let mut refine = Duration::MAX;
    for _ in 0..3 {
        fuse = fuse.min(timed(&["fuse", s(&v26), s(&v12)])?);
        refine = refine.min(timed(&["refine", s(&v12), s(&dir.path().join("big_r.nii")), "--landmarks", s(&lm)])?);
    }
    let refined = hoaseg::volume::read_label_volume(dir.path().join("big_r.nii")).map_err(|e| e.to_string())?;
    check(refined.data() == big.labels.data(), || "large refinement not exact".into())?;

    let mut cohort = String::from("subject,input,landmarks,reference\n");
    for seed in 0..6u64 {
        let p = phantom(200 + seed);
        let (gt, _) = write_phantom(dir.path(), &format!("gt{seed}"), &p);
        let (jittered_v12, jittered) =
            degrade_phantom(&p.labels, &p.landmarks, Degradation::LandmarkJitter { sigma_mm: 1.0 }, seed).unwrap();
        let input = dir.path().join(format!("in{seed}.nii.gz"));
        hoaseg::volume::write_volume(&jittered_v12, &input).unwrap();
        let jl = write_lm(dir.path(), &format!("j{seed}.json"), &jittered);
        let name = |p: &Path| p.file_name().unwrap().to_str().unwrap().to_string();
        cohort.push_str(&format!("s{seed},{},{},{}\n", name(&input), name(&jl), name(&gt)));
    }
    let cohort_path = dir.path().join("cohort.csv");
    std::fs::write(&cohort_path, cohort).unwrap();
    let (one, eight) = (dir.path().join("jobs1"), dir.path().join("jobs8"));
    timed(&["batch", s(&cohort_path), "--output-dir", s(&one), "--jobs", "1"])?;
    timed(&["batch", s(&cohort_path), "--output-dir", s(&eight), "--jobs", "8"])?;
    let mut compared = 0;
    let mut names: Vec<_> = std::fs::read_dir(&one).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in names {
        if name.to_string_lossy().ends_with(".manifest.json") {
            continue;
        }
        let a = std::fs::read(one.join(&name)).unwrap();
        let b = std::fs::read(eight.join(&name)).map_err(|e| format!("{name:?} missing under --jobs 8: {e}"))?;
        check(a == b, || format!("{name:?} differs between --jobs 1 and 8"))?;
        compared += 1;
    }
    let detail = format!(
        "fuse {:.2} s, refine {:.2} s on 260x311x260 int16; {compared} batch outputs byte-identical for --jobs 1 vs 8",
        fuse.as_secs_f64(),
        refine.as_secs_f64()
    );
    check(fuse.as_secs_f64() < 1.0 && refine.as_secs_f64() < 3.0, || detail.clone())?;
    Ok(detail)
}
