#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod overlay;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use handseg::annotation::{load_predictions, AnnotationFile};
use handseg::chromakey::extract_sequence;
use handseg::config::Config;
use handseg::eval::{coco_ap, EvalMode};
use handseg::geometry::{backproject, distance_to_region, mask_centroid_3d, ControlRegion};
use handseg::inpaint::inpaint;
use handseg::rgbd::{load_intrinsics, load_sequence, write_sequence, Sequence};
use handseg::synth::{random_trajectory, render_sequence, truth_frames, RandomTrajectoryOptions};
use handseg::{par, BinaryMask, CameraIntrinsics, DepthFrame, ObjectClass, Point3, SeedSelection};
use log::{debug, info};
use serde::Deserialize;

/// Semi-automatic hand instance annotation for registered RGB-D sequences.
#[derive(Parser)]
#[command(name = "handseg", version)]
struct Cli {
    /// TOML or JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for frame-parallel stages (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a sequence directory and report its frames.
    IngestCheck { sequence: PathBuf },
    /// Fill depth holes and write a new sequence directory.
    Inpaint {
        sequence: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract hand instances from every frame.
    Label(LabelArgs),
    /// Render frame 1 with numbered instances for picking the seed.
    SeedOverlay {
        sequence: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Propagate one object label through the sequence from a seed instance.
    Propagate(PropagateArgs),
    /// Re-emit annotations as a ground-truth file or a results array.
    Export {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, value_enum, default_value_t = ExportFormat::Gt)]
        format: ExportFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against ground truth with COCO mask AP.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        /// Results array or annotation file.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Distances from every instance centroid to calibrated control regions.
    Distances {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long)]
        regions: PathBuf,
        /// CSV output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Back-project one pixel with depth in meters.
    Backproject {
        #[arg(long, num_args = 2, value_names = ["X", "Y"], allow_negative_numbers = true)]
        pixel: Vec<f64>,
        #[arg(long)]
        depth: f64,
        /// intrinsics.json; alternatively take them from --sequence.
        #[arg(long, conflicts_with = "sequence")]
        intrinsics: Option<PathBuf>,
        #[arg(long)]
        sequence: Option<PathBuf>,
    },
    /// Write a synthetic sequence plus its ground-truth annotations.
    Synth(SynthArgs),
}

#[derive(Args)]
struct LabelArgs {
    sequence: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Fill depth holes before labeling.
    #[arg(long)]
    inpaint: bool,
    #[arg(long)]
    key_threshold: Option<f64>,
    #[arg(long)]
    min_area: Option<usize>,
    /// Meters.
    #[arg(long)]
    merge_distance: Option<f64>,
    /// RoI expansion factor for `bbox_plus`.
    #[arg(long)]
    roi_alpha: Option<f64>,
}

#[derive(Args)]
struct PropagateArgs {
    #[arg(long)]
    annotations: PathBuf,
    /// 1-based frame-1 instance, as numbered by seed-overlay.
    #[arg(long)]
    seed_instance: usize,
    /// Object class id: 1 smartphone, 2 tablet, 3 drink, 4 book.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    object_label: u8,
    /// Meters.
    #[arg(long)]
    gate: Option<f64>,
    /// Recompute centroids from this sequence's depth instead of the stored ones.
    #[arg(long)]
    sequence: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    frames: usize,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(1..=4))]
    object_label: u8,
    #[arg(long, default_value_t = 1)]
    distractors: usize,
    #[arg(long, default_value_t = 1)]
    gaps: usize,
    #[arg(long, default_value_t = 1)]
    jumps: usize,
    /// Fraction of depth pixels dropped to holes.
    #[arg(long, default_value_t = 0.0)]
    holes: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Gt,
    Results,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Agnostic,
    Sensitive,
}

const GROUND_TRUTH_FILE: &str = "ground_truth.json";

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn configure_jobs(jobs: usize) -> Result<()> {
    #[cfg(feature = "parallel")]
    if jobs > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().context("configuring worker pool")?;
    }
    #[cfg(not(feature = "parallel"))]
    if jobs > 1 {
        log::warn!("built without the parallel feature; --jobs {jobs} ignored");
    }
    debug!("parallel: {}", par::is_parallel());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_jobs(cli.jobs)?;
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    match cli.command {
        Command::IngestCheck { sequence } => cmd_ingest_check(&sequence),
        Command::Inpaint { sequence, out } => cmd_inpaint(&sequence, &out, &config),
        Command::Label(args) => cmd_label(args, config),
        Command::SeedOverlay { sequence, annotations, out } => cmd_seed_overlay(&sequence, &annotations, &out),
        Command::Propagate(args) => cmd_propagate(args, &config),
        Command::Export { annotations, format, out } => cmd_export(&annotations, format, &out),
        Command::Eval { gt, pred, mode } => cmd_eval(&gt, &pred, mode, config),
        Command::Distances { annotations, sequence, regions, out } => {
            cmd_distances(&annotations, &sequence, &regions, out.as_deref())
        }
        Command::Backproject { pixel, depth, intrinsics, sequence } => {
            cmd_backproject(&pixel, depth, intrinsics.as_deref(), sequence.as_deref())
        }
        Command::Synth(args) => cmd_synth(args, &config),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn frame_file_name(seq: &Sequence, index: usize) -> String {
    let rgb = &seq.manifest.frame_paths[index - 1].0;
    rgb.strip_prefix(&seq.root).unwrap_or(rgb).to_string_lossy().into_owned()
}

fn cmd_ingest_check(dir: &Path) -> Result<()> {
    let seq = load_sequence(dir)?;
    let frames = seq.load_all()?;
    let with_holes = frames.iter().filter(|f| f.depth.hole_count() > 0).count();
    println!(
        "{}: {} frames, {}x{}, {} with depth holes",
        seq.manifest.id,
        seq.len(),
        seq.width,
        seq.height,
        with_holes
    );
    Ok(())
}

fn cmd_inpaint(dir: &Path, out: &Path, config: &Config) -> Result<()> {
    let seq = load_sequence(dir)?;
    let frames = seq.load_all()?;
    let filled = par::map(&frames, |f| -> handseg::Result<_> {
        let mut f = f.clone();
        f.depth = inpaint(&f.depth, &f.rgb, &config.inpaint)?;
        Ok(f)
    })
    .into_iter()
    .collect::<handseg::Result<Vec<_>>>()?;
    write_sequence(out, &seq.manifest.id, seq.intrinsics(), &filled)?;
    info!("wrote {} in-painted frames to {}", filled.len(), out.display());
    Ok(())
}

fn cmd_label(args: LabelArgs, mut config: Config) -> Result<()> {
    let ck = &mut config.chromakey;
    ck.key_threshold = args.key_threshold.unwrap_or(ck.key_threshold);
    ck.min_area = args.min_area.unwrap_or(ck.min_area);
    ck.merge_distance = args.merge_distance.unwrap_or(ck.merge_distance);
    config.export.roi_alpha = args.roi_alpha.unwrap_or(config.export.roi_alpha);
    config.validate()?;

    let seq = load_sequence(&args.sequence)?;
    let mut frames = seq.load_all()?;
    if args.inpaint {
        let filled = par::map(&frames, |f| inpaint(&f.depth, &f.rgb, &config.inpaint));
        for (f, depth) in frames.iter_mut().zip(filled) {
            f.depth = depth?;
        }
    }
    let instances = extract_sequence(&frames, seq.intrinsics(), &config.chromakey)
        .map_err(|e| match e {
            handseg::Error::DepthHoles { index, holes } => {
                anyhow!("frame {index} has {holes} depth holes; in-paint first or pass --inpaint")
            }
            other => other.into(),
        })?;
    let file = AnnotationFile::from_frames(
        &instances,
        None,
        seq.width,
        seq.height,
        |i| frame_file_name(&seq, i),
        config.export.roi_alpha,
    )?;
    file.save(&args.out)?;
    info!("{} instances over {} frames", file.annotations.len(), instances.len());
    Ok(())
}

fn cmd_seed_overlay(dir: &Path, annotations: &Path, out: &Path) -> Result<()> {
    let seq = load_sequence(dir)?;
    let file = AnnotationFile::load(annotations)?;
    let groups = file.by_image();
    let (image, anns) = groups.first().ok_or_else(|| anyhow!("annotation file has no images"))?;
    if anns.is_empty() {
        bail!("frame {} ({}) has no instances to seed from", image.id, image.file_name);
    }
    let frame = seq.frame(1)?;
    let masks = anns.iter().map(|a| a.segmentation.decode()).collect::<handseg::Result<Vec<_>>>()?;
    let img = overlay::render(&frame.rgb, &masks);
    img.save_png(out)?;
    println!("{} instances in frame {}", masks.len(), image.id);
    Ok(())
}

fn cmd_propagate(args: PropagateArgs, config: &Config) -> Result<()> {
    let gate = args.gate.unwrap_or(config.propagate.gate);
    if !(gate > 0.0) {
        bail!("--gate must be positive, got {gate}");
    }
    let label = ObjectClass::from_id(args.object_label).expect("range checked by clap");
    let seed = SeedSelection::new(label, args.seed_instance)?;
    let mut file = AnnotationFile::load(&args.annotations)?;
    let centroids = match &args.sequence {
        None => file.centroids_by_image()?,
        Some(dir) => {
            let seq = load_sequence(dir)?;
            if seq.len() != file.images.len() {
                bail!("sequence has {} frames but the annotations list {} images", seq.len(), file.images.len());
            }
            let groups = file.by_image();
            let jobs: Vec<(usize, Vec<handseg::PixelSet>)> = groups
                .iter()
                .enumerate()
                .map(|(i, (_, anns))| Ok((i + 1, anns.iter().map(|a| a.segmentation.decode()).collect::<handseg::Result<_>>()?)))
                .collect::<handseg::Result<_>>()?;
            par::map(&jobs, |(index, masks)| -> handseg::Result<Vec<Point3>> {
                let frame = seq.frame(*index)?;
                masks.iter().map(|m| mask_centroid_3d(m, &frame.depth, seq.intrinsics())).collect()
            })
            .into_iter()
            .collect::<handseg::Result<_>>()?
        }
    };
    let labels = handseg::propagate::propagate_centroids(&centroids, seed, gate)?;
    file.apply_labels(&labels)?;
    file.save(&args.out)?;
    info!("labeled {} of {} frames", labels.labeled_frame_count(), labels.frames.len());
    Ok(())
}

fn cmd_export(annotations: &Path, format: ExportFormat, out: &Path) -> Result<()> {
    let file = AnnotationFile::load(annotations)?;
    match format {
        ExportFormat::Gt => file.save(out)?,
        ExportFormat::Results => {
            let mut text = serde_json::to_string_pretty(&file.to_results())?;
            text.push('\n');
            write_text(out, &text)?;
        }
    }
    Ok(())
}

fn cmd_eval(gt: &Path, pred: &Path, mode: Option<ModeArg>, mut config: Config) -> Result<()> {
    if let Some(m) = mode {
        config.eval.mode = match m {
            ModeArg::Agnostic => EvalMode::Agnostic,
            ModeArg::Sensitive => EvalMode::Sensitive,
        };
    }
    let gts = AnnotationFile::load(gt)?.to_gt_instances()?;
    let preds = load_predictions(pred)?;
    let report = coco_ap(&preds, &gts, &config.eval)?;
    println!("mode: {}", config.eval.mode);
    println!("{report}");
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionEntry {
    name: String,
    /// PNG whose nonzero pixels mark the region.
    mask: PathBuf,
    /// 16-bit depth PNG of the calibration frame, millimeters.
    depth: PathBuf,
}

fn load_regions(path: &Path, k: &CameraIntrinsics) -> Result<Vec<ControlRegion>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let entries: Vec<RegionEntry> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    entries
        .into_iter()
        .map(|e| {
            let mask_path = base.join(&e.mask);
            let mask = image::open(&mask_path)
                .with_context(|| format!("reading {}", mask_path.display()))?
                .to_luma8();
            let depth = DepthFrame::load_png(&base.join(&e.depth))?;
            let (w, h) = (mask.width() as usize, mask.height() as usize);
            if (w, h) != (depth.width, depth.height) {
                bail!("region {}: mask is {w}x{h} but depth is {}x{}", e.name, depth.width, depth.height);
            }
            let data = mask.pixels().map(|p| p.0[0] > 0).collect();
            let pixels = BinaryMask::from_vec(w, h, data).to_pixel_set();
            Ok(ControlRegion::from_mask(e.name, &pixels, &depth, k)?)
        })
        .collect()
}

fn cmd_distances(annotations: &Path, dir: &Path, regions: &Path, out: Option<&Path>) -> Result<()> {
    let seq = load_sequence(dir)?;
    let regions = load_regions(regions, seq.intrinsics())?;
    let file = AnnotationFile::load(annotations)?;
    let mut csv = String::from("frame,instance,region,distance_m\n");
    for (image, anns) in file.by_image() {
        let mut depth = None;
        for (i, a) in anns.iter().enumerate() {
            let centroid = match a.centroid {
                Some(c) => Point3::from(c),
                None => {
                    if depth.is_none() {
                        depth = Some(seq.frame(image.id as usize)?.depth);
                    }
                    mask_centroid_3d(&a.segmentation.decode()?, depth.as_ref().expect("loaded"), seq.intrinsics())?
                }
            };
            for region in &regions {
                let d = distance_to_region(centroid, region);
                csv.push_str(&format!("{},{},{},{:.6}\n", image.id, i + 1, region.name, d));
            }
        }
    }
    match out {
        Some(path) => write_text(path, &csv),
        None => std::io::stdout().write_all(csv.as_bytes()).context("writing stdout"),
    }
}

fn cmd_backproject(pixel: &[f64], depth: f64, intrinsics: Option<&Path>, sequence: Option<&Path>) -> Result<()> {
    let k = match (intrinsics, sequence) {
        (Some(path), _) => load_intrinsics(path)?,
        (None, Some(dir)) => *load_sequence(dir)?.intrinsics(),
        (None, None) => bail!("pass --intrinsics or --sequence"),
    };
    let p = backproject(pixel[0], pixel[1], depth, &k)?;
    println!("{:?} {:?} {:?}", p.x, p.y, p.z);
    Ok(())
}

fn cmd_synth(args: SynthArgs, config: &Config) -> Result<()> {
    let label = ObjectClass::from_id(args.object_label).expect("range checked by clap");
    let opts = RandomTrajectoryOptions {
        num_frames: args.frames,
        num_gaps: args.gaps,
        num_jumps: args.jumps,
        num_distractors: args.distractors,
        ..Default::default()
    };
    let (mut spec, events) = random_trajectory(args.seed, label, &opts);
    spec.scene.hole_fraction = args.holes;
    spec.gate = config.propagate.gate;
    let seq = render_sequence(&spec)?;
    let id = format!("synth-{}", args.seed);
    write_sequence(&args.out, &id, &spec.scene.intrinsics, &seq.frames)?;

    let loaded = load_sequence(&args.out)?;
    let truth = truth_frames(&seq.frames, &seq.truth, &spec.scene.intrinsics);
    // centroids are undefined over holes; fall back to noise-free geometry
    let truth = match truth {
        Ok(t) => t,
        Err(_) => {
            let clean = render_sequence(&handseg::synth::TrajectorySpec {
                scene: handseg::synth::SceneSpec { hole_fraction: 0.0, ..spec.scene.clone() },
                ..spec.clone()
            })?;
            truth_frames(&clean.frames, &clean.truth, &spec.scene.intrinsics)?
        }
    };
    let file = AnnotationFile::from_frames(
        &truth,
        Some(&seq.truth_labels()),
        loaded.width,
        loaded.height,
        |i| frame_file_name(&loaded, i),
        config.export.roi_alpha,
    )?;
    file.save(&args.out.join(GROUND_TRUTH_FILE))?;
    println!(
        "{id}: {} frames, held object {label}; gap frames {:?}, jump frames {:?}",
        seq.frames.len(),
        events.gaps.iter().map(|f| f + 1).collect::<Vec<_>>(),
        events.jumps.iter().map(|f| f + 1).collect::<Vec<_>>()
    );
    Ok(())
}
