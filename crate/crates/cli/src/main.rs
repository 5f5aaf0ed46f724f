//! `alphacloak` command-line front end.
//!
//! Exit codes: 0 success, 2 unreadable or malformed input, 3 invalid
//! arguments, 4 verification or defense check failed.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use alphacloak::codec::{read_clip_rgb, read_clip_rgba, write_clip, ContainerFormat};
use alphacloak::compositor::{composite_clip, drop_alpha_clip, DEFAULT_TOLERANCE};
use alphacloak::defense::{normalize_on_black, profile_clip, profiles_to_jsonl, ProfileConfig};
use alphacloak::fusion::{
    generate_fused_clip, prepare_clip, FuseOptions, FusionParams, DEFAULT_FAKE_OFFSET, DEFAULT_FAKE_SCALE,
    DEFAULT_TRUE_SCALE,
};
use alphacloak::labels::{load_kitti_dir, read_detections};
use alphacloak::metrics::{
    attribute, render_reports_table, render_summary_table, summarize, AttackPair, AttributionOptions, MatchMode,
};
use alphacloak::{BackgroundColor, Clip, FrameRate, PresetRegistry, ResizeFilter, RgbFrame, ViewMode};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "alphacloak", version, about = "Alpha-channel video fusion toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse a benign clip and a target clip into one RGBA clip.
    Fuse(FuseArgs),
    /// Composite an RGBA clip over a player background.
    Render(RenderArgs),
    /// Drop the alpha channel, as a detection pipeline would.
    ExtractFake(IoArgs),
    /// Check that a fused clip reproduces both sources.
    Verify(VerifyArgs),
    /// Score detections against candidate ground truth and attribute them.
    Score(ScoreArgs),
    /// Profile alpha channels; exits 4 if any frame is flagged.
    Profile(ProfileArgs),
    /// Composite onto black before detection.
    Defend(DefendArgs),
    /// Re-encode a clip in another container.
    Convert(IoArgs),
    /// Show the player background registry.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Args)]
struct Formats {
    /// Input container (apng | aclk | png-seq); inferred from the path by default.
    #[arg(long)]
    in_format: Option<ContainerFormat>,
    /// Output container (apng | aclk | png-seq); inferred from the path by default.
    #[arg(long)]
    format: Option<ContainerFormat>,
}

#[derive(Args)]
struct IoArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
    #[command(flatten)]
    formats: Formats,
}

#[derive(Args)]
struct ParamArgs {
    /// Output width; the benign clip's width by default.
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_TRUE_SCALE)]
    true_scale: f64,
    #[arg(long, default_value_t = DEFAULT_FAKE_SCALE)]
    fake_scale: f64,
    #[arg(long, default_value_t = DEFAULT_FAKE_OFFSET)]
    fake_offset: f64,
    /// bilinear | nearest
    #[arg(long, default_value = "bilinear")]
    filter: ResizeFilter,
}

impl ParamArgs {
    fn params(&self, default_w: u32, default_h: u32) -> Result<FusionParams, Failure> {
        let params = FusionParams {
            true_scale: self.true_scale,
            fake_scale: self.fake_scale,
            fake_offset: self.fake_offset,
            target_width: self.width.unwrap_or(default_w),
            target_height: self.height.unwrap_or(default_h),
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Args)]
struct FuseArgs {
    /// Benign clip, shown to viewers.
    #[arg(long = "true", value_name = "PATH")]
    true_path: PathBuf,
    /// Target clip, seen by alpha-dropping pipelines.
    #[arg(long = "fake", value_name = "PATH")]
    fake_path: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    /// Output frame rate such as 30 or 30000/1001; the benign clip's by default.
    #[arg(long)]
    frame_rate: Option<FrameRate>,
    #[command(flatten)]
    formats: Formats,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Player preset name (see `presets list`).
    #[arg(long, conflicts_with = "color", required_unless_present = "color")]
    preset: Option<String>,
    /// viewer | thumbnail
    #[arg(long, default_value = "viewer", requires = "preset")]
    mode: ViewMode,
    /// Explicit background: a name, #rrggbb or r,g,b.
    #[arg(long)]
    color: Option<BackgroundColor>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    fused: PathBuf,
    #[arg(long = "true", value_name = "PATH")]
    true_path: PathBuf,
    #[arg(long = "fake", value_name = "PATH")]
    fake_path: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: u8,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Table,
    Json,
}

#[derive(Args)]
struct ScoreArgs {
    /// Detections interchange file (JSON Lines).
    #[arg(long)]
    detections: PathBuf,
    /// Directory of KITTI tracking label files, one candidate per file.
    #[arg(long)]
    labels: PathBuf,
    /// File of `attacked true fake` lines; adds a summary over the pairs.
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Only score these attacked videos.
    #[arg(long = "attacked")]
    attacked: Vec<String>,
    /// Frames to average over; the detected frame span by default.
    #[arg(long)]
    frame_count: Option<u32>,
    /// Only match boxes with equal class labels.
    #[arg(long)]
    class_aware: bool,
    /// Include per-frame scores in JSON output.
    #[arg(long)]
    per_frame: bool,
    #[arg(long, value_enum, default_value = "table")]
    report: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProfileFlags {
    #[arg(long, default_value_t = alphacloak::defense::DEFAULT_OPAQUE_THRESHOLD)]
    opaque_threshold: u8,
    #[arg(long, default_value_t = alphacloak::defense::DEFAULT_FLAG_FRACTION)]
    flag_fraction: f64,
}

impl ProfileFlags {
    fn config(&self) -> Result<ProfileConfig, Failure> {
        let c = ProfileConfig {
            opaque_threshold: self.opaque_threshold,
            flag_fraction: self.flag_fraction,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long)]
    in_format: Option<ContainerFormat>,
    #[command(flatten)]
    flags: ProfileFlags,
    /// Include the 256-bin histogram in each row.
    #[arg(long)]
    histogram: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DefendArgs {
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    flags: ProfileFlags,
}

#[derive(Subcommand)]
enum PresetAction {
    /// One line per player.
    List,
    /// The registry as TOML, usable as a starting point for a custom one.
    Dump,
}

enum Failure {
    Input(String),
    Usage(String),
    Check(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Usage(_) => 3,
            Failure::Check(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) | Failure::Usage(m) | Failure::Check(m) => f.write_str(m),
        }
    }
}

impl From<alphacloak::Error> for Failure {
    fn from(e: alphacloak::Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fuse(a: FuseArgs) -> Result<(), Failure> {
    let v_true = read_clip_rgb(&a.true_path, a.formats.in_format)?;
    let v_fake = read_clip_rgb(&a.fake_path, a.formats.in_format)?;
    let m = v_true.meta();
    let params = a.params.params(m.width, m.height)?;
    let options = FuseOptions {
        filter: a.params.filter,
        frame_rate: a.frame_rate,
    };
    let fused = generate_fused_clip(&v_true, &v_fake, &params, &options)?;
    write_clip(&fused, &a.out, a.formats.format)?;
    let fm = fused.meta();
    eprintln!(
        "fused {} frames at {}x{} {} fps (true_scale {}, fake_scale {}, fake_offset {}) -> {}",
        fm.frame_count,
        fm.width,
        fm.height,
        fm.frame_rate,
        params.true_scale,
        params.fake_scale,
        params.fake_offset,
        a.out.display()
    );
    Ok(())
}

fn render(a: RenderArgs) -> Result<(), Failure> {
    let bg = match (&a.preset, a.color) {
        (_, Some(c)) => c,
        (Some(name), None) => {
            let registry = PresetRegistry::from_env()?;
            let valid = || registry.names().collect::<Vec<_>>().join(", ");
            let preset = registry
                .get(name)
                .ok_or_else(|| Failure::Usage(format!("unknown preset {name:?}; valid presets: {}", valid())))?;
            preset.background(a.mode).ok_or_else(|| {
                Failure::Usage(format!("preset {:?} has no recorded background for {:?} mode", preset.name, a.mode))
            })?
        }
        (None, None) => return Err(Failure::Usage("give --preset or --color".into())),
    };
    let clip = read_clip_rgba(&a.io.input, a.io.formats.in_format)?;
    write_clip(&composite_clip(&clip, bg), &a.io.out, a.io.formats.format)?;
    eprintln!("rendered {} frames over {bg} -> {}", clip.len(), a.io.out.display());
    Ok(())
}

fn extract_fake(a: IoArgs) -> Result<(), Failure> {
    let clip = read_clip_rgba(&a.input, a.formats.in_format)?;
    write_clip(&drop_alpha_clip(&clip), &a.out, a.formats.format)?;
    eprintln!("extracted {} frames -> {}", clip.len(), a.out.display());
    Ok(())
}

fn truncate(clip: Clip<RgbFrame>, n: usize, name: &str) -> Result<Clip<RgbFrame>, Failure> {
    if clip.len() < n {
        return Err(Failure::Input(format!(
            "{name} clip has {} frames, fused clip has {n}",
            clip.len()
        )));
    }
    let rate = clip.meta().frame_rate;
    let frames = clip.into_frames().into_iter().take(n).collect();
    Ok(Clip::new(frames, rate)?)
}

fn verify(a: VerifyArgs) -> Result<(), Failure> {
    let fused = read_clip_rgba(&a.fused, None)?;
    let m = *fused.meta();
    let params = a.params.params(m.width, m.height)?;
    if (params.target_width, params.target_height) != (m.width, m.height) {
        return Err(Failure::Input(format!(
            "fused clip is {}x{}, expected {}x{}",
            m.width, m.height, params.target_width, params.target_height
        )));
    }
    let n = fused.len();
    let prep = |p: &Path, name: &str| -> Result<_, Failure> {
        let clip = truncate(read_clip_rgb(p, None)?, n, name)?;
        Ok(prepare_clip(&clip, m.width, m.height, a.params.filter)?)
    };
    let t = prep(&a.true_path, "benign")?;
    let f = prep(&a.fake_path, "target")?;
    let report = alphacloak::verify_round_trip(&fused, &t, &f, &params, a.tolerance)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    emit(a.out.as_deref(), &text)?;
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "verification failed: max error human {} machine {} (tolerance {})",
            report.max_abs_error_human, report.max_abs_error_machine, report.tolerance
        )))
    }
}

fn score(a: ScoreArgs) -> Result<(), Failure> {
    let detections = read_detections(&a.detections)?;
    let candidates = load_kitti_dir(&a.labels)?;
    if candidates.is_empty() {
        return Err(Failure::Input(format!("{}: no label files found", a.labels.display())));
    }
    let pairs = match &a.pairs {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
            Some(AttackPair::parse_list(&text)?)
        }
        None => None,
    };
    let selected: Vec<&String> = if !a.attacked.is_empty() {
        a.attacked.iter().collect()
    } else if let Some(pairs) = &pairs {
        pairs.iter().map(|p| &p.attacked).collect()
    } else {
        detections.keys().collect()
    };
    let options = AttributionOptions {
        mode: if a.class_aware { MatchMode::ClassAware } else { MatchMode::Spatial },
        keep_per_frame: a.per_frame,
    };
    let mut reports = Vec::new();
    for id in selected {
        let dets = detections
            .get(id)
            .ok_or_else(|| Failure::Input(format!("no detections for video {id:?}")))?;
        let t = match a.frame_count {
            Some(t) => t,
            None => dets.iter().map(|d| d.frame_index + 1).max().unwrap_or(0),
        };
        reports.push(attribute(id, dets, &candidates, t, &options)?);
    }
    let summary = pairs.as_deref().map(|p| summarize(&reports, p)).transpose()?;
    let text = match a.report {
        ReportFormat::Json => {
            let mut doc = BTreeMap::new();
            doc.insert("reports", serde_json::to_value(&reports).expect("reports serialize"));
            if let Some(s) = &summary {
                doc.insert("summary", serde_json::to_value(s).expect("summary serializes"));
            }
            serde_json::to_string_pretty(&doc).expect("document serializes") + "\n"
        }
        ReportFormat::Table => {
            let mut t = render_reports_table(&reports);
            if let Some(s) = &summary {
                t.push('\n');
                t.push_str(&render_summary_table(s));
            }
            t
        }
    };
    emit(a.out.as_deref(), &text)
}

fn profile(a: ProfileArgs) -> Result<(), Failure> {
    let config = a.flags.config()?;
    let clip = read_clip_rgba(&a.input, a.in_format)?;
    let profiles = profile_clip(&clip, &config);
    emit(a.out.as_deref(), &profiles_to_jsonl(&profiles, a.histogram))?;
    let flagged = profiles.iter().filter(|p| p.flagged).count();
    eprintln!("{flagged} of {} frames flagged", profiles.len());
    if flagged > 0 {
        Err(Failure::Check(format!("{flagged} frames show unexpected transparency")))
    } else {
        Ok(())
    }
}

fn defend(a: DefendArgs) -> Result<(), Failure> {
    let config = a.flags.config()?;
    let clip = read_clip_rgba(&a.io.input, a.io.formats.in_format)?;
    let flagged = profile_clip(&clip, &config).iter().filter(|p| p.flagged).count();
    write_clip(&normalize_on_black(&clip), &a.io.out, a.io.formats.format)?;
    eprintln!(
        "{flagged} of {} frames flagged; wrote black-composited clip to {}",
        clip.len(),
        a.io.out.display()
    );
    Ok(())
}

fn convert(a: IoArgs) -> Result<(), Failure> {
    let clip = read_clip_rgba(&a.input, a.formats.in_format)?;
    write_clip(&clip, &a.out, a.formats.format)?;
    eprintln!("converted {} frames -> {}", clip.len(), a.out.display());
    Ok(())
}

fn presets(action: PresetAction) -> Result<(), Failure> {
    let registry = PresetRegistry::from_env()?;
    let show = |c: Option<BackgroundColor>| c.map_or_else(|| "-".to_owned(), |c| c.to_string());
    let text = match action {
        PresetAction::Dump => registry.to_toml_string(),
        PresetAction::List => {
            let mut s = format!("{:<16} {:<10} {:<10}\n", "player", "viewer", "thumbnail");
            for p in registry.players() {
                s += &format!("{:<16} {:<10} {:<10}\n", p.name, show(p.viewer_bg), show(p.thumbnail_bg));
            }
            s
        }
    };
    emit(None, &text)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Fuse(a) => fuse(a),
        Command::Render(a) => render(a),
        Command::ExtractFake(a) => extract_fake(a),
        Command::Verify(a) => verify(a),
        Command::Score(a) => score(a),
        Command::Profile(a) => profile(a),
        Command::Defend(a) => defend(a),
        Command::Convert(a) => convert(a),
        Command::Presets { action } => presets(action),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
