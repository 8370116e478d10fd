//! Stages of a run and the manifest that records them.

use std::path::{Path, PathBuf};
use std::time::Instant;

use bubbletrack::analytics::{self, DiameterHistogram};
use bubbletrack::corpus::{coco, load_dataset, Category, ClassMode};
use bubbletrack::evaluation::{evaluate, EvalReport};
use bubbletrack::kinematics::{max_velocity_series, smooth, spectrogram, track_profiles, FrameProfile, VelocityMap};
use bubbletrack::tracker::{self, Track, TrackId, TrackSet};
use bubbletrack::{Calibration, Dataset};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{RunConfig, Settings};
use crate::error::CliError;
use crate::output::{fixed, fixed_opt, write_csv, write_json, write_text};

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Track,
    Features,
    Velocity { track_id: Option<TrackId> },
    Evaluate,
    All,
    ConvertCoco { pixels_per_cm: f64, frame_rate: f64, output: Option<PathBuf> },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Track => "track",
            Command::Features => "features",
            Command::Velocity { .. } => "velocity",
            Command::Evaluate => "evaluate",
            Command::All => "all",
            Command::ConvertCoco { .. } => "convert-coco",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
    pub outputs: Vec<String>,
}

/// Written to `manifest.json` at the end of every run, successful or not.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub library_version: &'static str,
    pub command: String,
    pub status: &'static str,
    pub exit_code: i32,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub input: Option<String>,
    pub ground_truth: Option<String>,
    pub workers: usize,
    pub config: Settings,
    pub stages: Vec<StageRecord>,
    pub warnings: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

struct Run<'a> {
    config: &'a RunConfig,
    manifest: Manifest,
    pool: rayon::ThreadPool,
    dataset: Option<Dataset>,
    tracks: Option<TrackSet>,
}

fn new_manifest(command: &Command, config: &RunConfig) -> Manifest {
    Manifest {
        tool: "bubbletrack",
        version: env!("CARGO_PKG_VERSION"),
        library_version: bubbletrack::VERSION,
        command: command.name().to_string(),
        status: "running",
        exit_code: 0,
        failed_stage: None,
        error: None,
        input: config.input.as_ref().map(|p| p.display().to_string()),
        ground_truth: config.ground_truth.as_ref().map(|p| p.display().to_string()),
        workers: config.workers,
        config: config.settings,
        stages: Vec::new(),
        warnings: Vec::new(),
    }
}

/// Records a run that failed before any stage could start, such as an
/// unreadable config file. Best effort: errors writing it are ignored.
pub fn write_setup_failure(command: &Command, out_dir: &Path, error: &CliError) {
    let config = RunConfig {
        input: None,
        ground_truth: None,
        out_dir: out_dir.to_path_buf(),
        workers: 1,
        settings: Settings::default(),
    };
    let mut manifest = new_manifest(command, &config);
    manifest.status = "failed";
    manifest.exit_code = error.exit_code();
    manifest.failed_stage = Some("config".into());
    manifest.error = Some(error.message.clone());
    if std::fs::create_dir_all(out_dir).is_ok() {
        let _ = write_json(&out_dir.join(MANIFEST_FILE), &manifest);
    }
}

/// Executes `command`, always leaving a manifest in the output directory
/// when the directory can be created.
pub fn execute(command: &Command, config: &RunConfig) -> Result<Manifest, CliError> {
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| CliError::internal(format!("cannot create {}: {e}", config.out_dir.display())))?;
    let manifest = new_manifest(command, config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::internal(format!("thread pool: {e}")))?;
    let mut run = Run { config, manifest, pool, dataset: None, tracks: None };
    let result = run.dispatch(command);
    let mut manifest = run.manifest;
    match &result {
        Ok(()) => manifest.status = "ok",
        Err(e) => {
            manifest.status = "failed";
            manifest.exit_code = e.exit_code();
            manifest.error = Some(e.message.clone());
        }
    }
    write_json(&config.out_dir.join(MANIFEST_FILE), &manifest)?;
    result.map(|()| manifest)
}

impl Run<'_> {
    fn dispatch(&mut self, command: &Command) -> Result<(), CliError> {
        self.stage("config", |r| r.config.settings.validate().map(|()| Vec::new()))?;
        match command {
            Command::Track => {
                self.track()?;
            }
            Command::Features => self.features()?,
            Command::Velocity { track_id } => self.velocity(*track_id)?,
            Command::Evaluate => self.evaluate()?,
            Command::All => {
                self.track()?;
                self.features()?;
                self.velocity(None)?;
                if self.config.ground_truth.is_some() {
                    self.evaluate()?;
                }
            }
            Command::ConvertCoco { pixels_per_cm, frame_rate, output } => {
                self.convert_coco(*pixels_per_cm, *frame_rate, output.as_deref())?
            }
        }
        Ok(())
    }

    /// Runs `f` as a named stage, recording its duration and outputs, or the
    /// failure.
    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T, CliError>) -> Result<T, CliError>
    where
        T: StageOutputs,
    {
        let start = Instant::now();
        let result = f(self);
        let seconds = start.elapsed().as_secs_f64();
        match &result {
            Ok(v) => self.manifest.stages.push(StageRecord {
                name: name.to_string(),
                seconds,
                outputs: v.outputs(),
            }),
            Err(e) => {
                self.manifest.failed_stage = Some(name.to_string());
                self.manifest.stages.push(StageRecord { name: name.to_string(), seconds, outputs: Vec::new() });
                return Err(CliError { kind: e.kind, message: format!("{name}: {}", e.message) });
            }
        }
        result
    }

    fn out(&self, name: &str) -> PathBuf {
        self.config.out_dir.join(name)
    }

    fn dataset(&mut self) -> Result<&Dataset, CliError> {
        if self.dataset.is_none() {
            let ds = self.stage("load", |r| {
                let path = r.config.input.as_ref().ok_or_else(|| CliError::usage("--input is required"))?;
                Ok(Loaded(load_dataset(path)?))
            })?;
            self.dataset = Some(ds.0);
        }
        Ok(self.dataset.as_ref().expect("just loaded"))
    }

    fn track(&mut self) -> Result<(), CliError> {
        if self.tracks.is_some() {
            return Ok(());
        }
        self.dataset()?;
        let set = self.stage("track", |r| {
            let ds = r.dataset.as_ref().expect("loaded");
            let set = tracker::run(ds, &r.config.settings.tracker)?;
            let path = r.out("tracks.json");
            write_json(&path, &tracks_document(&set, &r.config.settings))?;
            let degenerate: u32 = set.tracks().iter().map(Track::degenerate_predictions).sum();
            let regularized: u32 = set.tracks().iter().map(Track::regularized_updates).sum();
            if degenerate > 0 {
                r.manifest.warnings.push(format!("{degenerate} track predictions had non-positive area"));
            }
            if regularized > 0 {
                r.manifest.warnings.push(format!("{regularized} Kalman updates needed regularization"));
            }
            Ok(Written(set, vec![path]))
        })?;
        self.tracks = Some(set.0);
        Ok(())
    }

    fn features(&mut self) -> Result<(), CliError> {
        self.track()?;
        self.stage("features", |r| {
            let ds = r.dataset.as_ref().expect("loaded");
            let set = r.tracks.as_ref().expect("tracked");
            let settings = &r.config.settings;
            let frames = r.pool.install(|| {
                ds.frames()
                    .par_iter()
                    .map(|f| {
                        analytics::frame_features(f, ds.width(), ds.height(), ds.calibration(), ds.class_mode())
                    })
                    .collect::<Vec<_>>()
            });
            let mut written = Vec::new();

            let path = r.out("features.csv");
            write_csv(
                &path,
                &["frame", "bubble_count", "vapor_fraction_total", "vapor_fraction_attached"],
                frames.iter().map(|f| {
                    vec![
                        f.frame.to_string(),
                        f.bubble_count.to_string(),
                        fixed(f.vapor_fraction_total),
                        fixed_opt(f.vapor_fraction_attached),
                    ]
                }),
            )?;
            written.push(path);

            let path = r.out("tracks_features.csv");
            write_csv(
                &path,
                &["track_id", "frame", "diameter_cm", "category", "bubble_vapor_fraction"],
                analytics::track_features(set, ds).into_iter().map(|t| {
                    vec![
                        t.track_id.to_string(),
                        t.frame.to_string(),
                        fixed(t.diameter_cm),
                        t.category.to_string(),
                        fixed(t.bubble_vapor_fraction),
                    ]
                }),
            )?;
            written.push(path);

            let two_class = ds.class_mode() == ClassMode::TwoClass;
            let events = if two_class {
                analytics::all_departures(set, settings.analytics.debounce)
            } else {
                Vec::new()
            };
            let path = r.out("departures.csv");
            write_csv(
                &path,
                &["track_id", "frame", "time_s"],
                events.iter().map(|e| {
                    vec![
                        e.track_id.to_string(),
                        e.frame.to_string(),
                        fixed(ds.calibration().frames_to_seconds(e.frame as f64)),
                    ]
                }),
            )?;
            written.push(path);

            let hist = analytics::diameter_histogram(ds.frames(), ds.calibration(), settings.analytics.histogram_bin_mm);
            let path = r.out("histogram.csv");
            write_csv(&path, &["bin_start_mm", "bin_end_mm", "count"], histogram_rows(&hist))?;
            written.push(path);

            let duration = ds.duration_s();
            let departures = if two_class {
                Some(analytics::departure_summary(&events, duration).map_err(|e| CliError::input(e.to_string()))?)
            } else {
                None
            };
            let path = r.out("summary.json");
            write_json(
                &path,
                &json!({
                    "frames": ds.frames().len(),
                    "detections": ds.detection_count(),
                    "tracks": set.len(),
                    "class_mode": class_mode_name(ds.class_mode()),
                    "clip_duration_s": duration,
                    "debounce": settings.analytics.debounce,
                    "departures": departures,
                }),
            )?;
            written.push(path);
            Ok(written)
        })?;
        Ok(())
    }

    fn velocity(&mut self, track_id: Option<TrackId>) -> Result<(), CliError> {
        self.track()?;
        self.stage("velocity", |r| {
            let ds = r.dataset.as_ref().expect("loaded");
            let set = r.tracks.as_ref().expect("tracked");
            let k = r.config.settings.kinematics;
            let selected: Vec<&Track> = match track_id {
                Some(id) => {
                    let t = set.get(id).ok_or_else(|| {
                        CliError::usage(format!("unknown track id {id}; available ids: {}", id_list(set)))
                    })?;
                    let pairs = bubbletrack::kinematics::evaluation_frames(t, k.delta_frames, 1).len();
                    if pairs == 0 {
                        return Err(CliError::usage(format!(
                            "track {id} has no pair of observed frames {} apart ({} frames observed, {}..={})",
                            k.delta_frames,
                            t.observations().len(),
                            t.first_frame(),
                            t.last_observed_frame()
                        )));
                    }
                    vec![t]
                }
                None => set.tracks().iter().collect(),
            };
            let results: Vec<(TrackId, Vec<FrameProfile>)> = r.pool.install(|| {
                selected.par_iter().map(|t| (t.id(), track_profiles(t, ds, &k))).collect()
            });
            let dir = r.out("velocity");
            std::fs::create_dir_all(&dir)
                .map_err(|e| CliError::internal(format!("cannot create {}: {e}", dir.display())))?;
            let mut written = Vec::new();
            for (id, profiles) in results.iter().filter(|(_, p)| !p.is_empty()) {
                let raw = spectrogram(profiles, k.bins);
                let smoothed = smooth(&raw, k.sigma_position, k.sigma_time);
                for (map, suffix) in [(&raw, ""), (&smoothed, "_smoothed")] {
                    let path = dir.join(format!("spectrogram_track{id}{suffix}.csv"));
                    write_text(&path, &spectrogram_csv(map)?)?;
                    written.push(path);
                }
                let path = dir.join(format!("max_velocity_track{id}.csv"));
                write_csv(
                    &path,
                    &["frame", "time_s", "max_speed_cm_s"],
                    max_velocity_series(profiles).into_iter().map(|(f, v)| {
                        vec![f.to_string(), fixed(ds.calibration().frames_to_seconds(f as f64)), fixed(v)]
                    }),
                )?;
                written.push(path);
                let path = dir.join(format!("spectrogram_track{id}.json"));
                write_json(
                    &path,
                    &json!({
                        "track_id": id,
                        "kinematics": k,
                        "pixels_per_cm": ds.calibration().pixels_per_cm(),
                        "frame_rate_fps": ds.calibration().frame_rate(),
                        "bin_centers": (0..raw.bins()).map(|b| raw.bin_center(b)).collect::<Vec<_>>(),
                        "frames": raw.frames(),
                        "frame_times_s": raw.frames().iter().map(|&f| ds.calibration().frames_to_seconds(f as f64)).collect::<Vec<_>>(),
                        "units": "cm/s, outward positive",
                    }),
                )?;
                written.push(path);
            }
            Ok(written)
        })?;
        Ok(())
    }

    fn evaluate(&mut self) -> Result<(), CliError> {
        self.dataset()?;
        let gt = self.stage("load_ground_truth", |r| {
            let path = r
                .config
                .ground_truth
                .as_ref()
                .ok_or_else(|| CliError::usage("evaluate needs --ground-truth"))?;
            Ok(Loaded(load_dataset(path)?))
        })?;
        self.stage("evaluate", |r| {
            let pred = r.dataset.as_ref().expect("loaded");
            let report: EvalReport = evaluate(pred, &gt.0, r.config.settings.evaluation.mode)?;
            let path = r.out("eval_report.json");
            write_json(&path, &report)?;
            Ok(vec![path])
        })
        .map(|_| ())
    }

    fn convert_coco(&mut self, pixels_per_cm: f64, frame_rate: f64, output: Option<&Path>) -> Result<(), CliError> {
        self.stage("convert_coco", |r| {
            let path = r.config.input.as_ref().ok_or_else(|| CliError::usage("--input is required"))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
            let cal = Calibration::new(pixels_per_cm, frame_rate).map_err(|e| CliError::usage(e.to_string()))?;
            let ds = coco::from_coco_str(&text, cal)?;
            let out = output.map(Path::to_path_buf).unwrap_or_else(|| r.out("dataset.json"));
            let doc = serde_json::to_string(&ds.to_document())
                .map_err(|e| CliError::internal(format!("serialize: {e}")))?;
            write_text(&out, &(doc + "\n"))?;
            Ok(vec![out])
        })
        .map(|_| ())
    }
}

/// Values a stage can return, listing the files it wrote.
trait StageOutputs {
    fn outputs(&self) -> Vec<String>;
}

impl StageOutputs for Vec<PathBuf> {
    fn outputs(&self) -> Vec<String> {
        self.iter().map(|p| p.display().to_string()).collect()
    }
}

struct Loaded(Dataset);

impl StageOutputs for Loaded {
    fn outputs(&self) -> Vec<String> {
        Vec::new()
    }
}

struct Written(TrackSet, Vec<PathBuf>);

impl StageOutputs for Written {
    fn outputs(&self) -> Vec<String> {
        self.1.outputs()
    }
}

fn id_list(set: &TrackSet) -> String {
    if set.is_empty() {
        return "none".into();
    }
    set.ids().iter().map(u64::to_string).collect::<Vec<_>>().join(", ")
}

fn class_mode_name(mode: ClassMode) -> &'static str {
    match mode {
        ClassMode::TwoClass => "two_class",
        ClassMode::OneClass => "one_class",
    }
}

fn histogram_rows(h: &DiameterHistogram) -> impl Iterator<Item = Vec<String>> + '_ {
    h.bins().map(|(lo, hi, c)| vec![fixed(lo), fixed(hi), c.to_string()])
}

/// Header of frame indices, then one row per bin starting with its center.
pub fn spectrogram_csv(map: &VelocityMap) -> Result<String, CliError> {
    let mut header = vec!["position".to_string()];
    header.extend(map.frames().iter().map(u64::to_string));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    crate::output::to_csv(
        &header_refs,
        (0..map.bins()).map(|b| {
            let mut row = vec![fixed(map.bin_center(b))];
            row.extend((0..map.frames().len()).map(|c| fixed_opt(map.get(b, c))));
            row
        }),
    )
}

#[derive(Serialize)]
struct FrameRef {
    frame: u64,
    detection_index: usize,
}

#[derive(Serialize)]
struct TrackFrame {
    index: u64,
    bbox: [f64; 4],
    category: Category,
    score: f64,
    mask_ref: FrameRef,
}

#[derive(Serialize)]
struct TrackDocument {
    id: TrackId,
    status: tracker::TrackStatus,
    frames: Vec<TrackFrame>,
}

fn tracks_document(set: &TrackSet, settings: &Settings) -> serde_json::Value {
    let tracks: Vec<TrackDocument> = set
        .tracks()
        .iter()
        .map(|t| TrackDocument {
            id: t.id(),
            status: t.status(),
            frames: t
                .observations()
                .iter()
                .map(|(&f, o)| TrackFrame {
                    index: f,
                    bbox: o.bbox.to_array(),
                    category: o.category,
                    score: o.score,
                    mask_ref: FrameRef { frame: f, detection_index: o.detection_index },
                })
                .collect(),
        })
        .collect();
    json!({ "config": settings.tracker, "tracks": tracks })
}
