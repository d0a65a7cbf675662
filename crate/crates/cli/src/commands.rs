use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::Parser;
use irst_core::baselines::Baseline;
use irst_core::detector::{detect, DetectionSet, DetectorConfig};
use irst_core::eval::{roc_curve_with_thresholds, roc_thresholds, scrg_with, EvalReport, GroundTruth};
use irst_core::io::{
    atomic_write, candidates_csv, detections_csv, ground_truth_csv, map_csv, read_ground_truth, read_map_csv,
    report_csv, roc_csv,
};
use irst_core::mgd::mgd_map;
use irst_core::pgm::{encode, load_frame};
use irst_core::rings::RingFamily;
use irst_core::synth::SequenceSpec;
use irst_core::{GrayFrame, SaliencyMap};

use crate::frames::{check_unique, frame_id_from_name, list_dir, resolve_inputs, FrameFile};
use crate::manifest::{beside_file, inside_dir, RunManifest};
use crate::{
    BaselineArgs, Cli, Command, DetectArgs, EvalArgs, MapOutput, Method, MgdArgs, ReplayArgs, RingsArgs, RocArgs,
    SynthArgs,
};

pub fn run(command: Command, args: &[String]) -> Result<()> {
    match command {
        Command::Detect(a) => run_detect(a, args),
        Command::Mgd(a) => run_mgd(a, args),
        Command::Baseline(a) => run_baseline(a, args),
        Command::Synth(a) => run_synth(a, args),
        Command::Eval(a) => run_eval(a, args),
        Command::Roc(a) => run_roc(a, args),
        Command::Rings(a) => run_rings(a, args),
        Command::Replay(a) => run_replay(a),
    }
}

fn load_config(path: Option<&Path>) -> Result<DetectorConfig> {
    match path {
        None => Ok(DetectorConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            DetectorConfig::from_kv_str(&text).with_context(|| format!("config {}", p.display()))
        }
    }
}

fn load(f: &FrameFile) -> Result<GrayFrame> {
    load_frame(&f.path).with_context(|| format!("loading {}", f.path.display()))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating directory {}", dir.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    atomic_write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn run_detect(a: DetectArgs, args: &[String]) -> Result<()> {
    let config = load_config(a.config.as_deref())?;
    let inputs = resolve_inputs(&a.input)?;
    if let Some(dir) = &a.dump_maps {
        ensure_dir(dir)?;
    }

    let mut sets = Vec::with_capacity(inputs.len());
    for f in &inputs {
        let frame = load(f)?;
        let out = detect(&frame, &config).with_context(|| format!("detecting in {}", f.path.display()))?;
        if let Some(dir) = &a.dump_maps {
            let stem = f.stem();
            write(&dir.join(format!("{stem}_mgd.csv")), &map_csv(&out.mgd)?)?;
            write(&dir.join(format!("{stem}_mgd.pgm")), &encode(&out.mgd, true))?;
            write(&dir.join(format!("{stem}_constrained.csv")), &map_csv(&out.constrained)?)?;
            write(&dir.join(format!("{stem}_constrained.pgm")), &encode(&out.constrained, true))?;
            write(&dir.join(format!("{stem}_candidates.csv")), &candidates_csv(&out.candidates)?)?;
        }
        sets.push(DetectionSet {
            frame_id: f.id,
            detections: out.detections.detections,
        });
    }
    write(&a.out_dets, &detections_csv(&sets)?)?;

    let mut m = RunManifest::new("detect", args);
    m.set_config("config", &config.to_kv_string())?;
    m.set("frames", inputs.len());
    for f in &inputs {
        m.set_path(&format!("input.{}", f.id), &f.path);
    }
    m.set_path("output.detections", &a.out_dets);
    if let Some(dir) = &a.dump_maps {
        m.set_path("output.dump_maps", dir);
        m.write(&inside_dir(dir))?;
    }
    m.write(&beside_file(&a.out_dets))
}

/// Applies `f` to each input and writes normalised PGM and optional CSV maps.
fn write_maps(
    io: &MapOutput,
    manifest: &mut RunManifest,
    f: impl Fn(&GrayFrame) -> Result<SaliencyMap>,
) -> Result<()> {
    let inputs = resolve_inputs(&io.input)?;
    let dir_mode = io.input.is_dir();
    if dir_mode {
        ensure_dir(&io.out)?;
        if let Some(c) = &io.csv {
            ensure_dir(c)?;
        }
    }
    for file in &inputs {
        let map = f(&load(file)?).with_context(|| format!("processing {}", file.path.display()))?;
        let (pgm, csv) = if dir_mode {
            let stem = file.stem();
            (
                io.out.join(format!("{stem}.pgm")),
                io.csv.as_ref().map(|c| c.join(format!("{stem}.csv"))),
            )
        } else {
            (io.out.clone(), io.csv.clone())
        };
        write(&pgm, &encode(&map, true))?;
        if let Some(c) = csv {
            write(&c, &map_csv(&map)?)?;
        }
        manifest.set_path(&format!("input.{}", file.id), &file.path);
    }
    manifest.set_path("output.maps", &io.out);
    if let Some(c) = &io.csv {
        manifest.set_path("output.csv", c);
    }
    if dir_mode {
        manifest.write(&inside_dir(&io.out))
    } else {
        manifest.write(&beside_file(&io.out))
    }
}

fn run_mgd(a: MgdArgs, args: &[String]) -> Result<()> {
    let config = load_config(a.config.as_deref())?;
    let family = RingFamily::new(config.ring_radius);
    let mut m = RunManifest::new("mgd", args);
    m.set("config.ring_radius", config.ring_radius);
    write_maps(&a.io, &mut m, |f| Ok(mgd_map(f, &family)?))
}

fn run_baseline(a: BaselineArgs, args: &[String]) -> Result<()> {
    let method = match a.method {
        Method::Tophat => Baseline::TopHat { se_side: a.se_side },
        Method::Maxmedian => Baseline::MaxMedian { win: a.win },
        Method::Dog => Baseline::Dog { sigma1: a.sigma1, sigma2: a.sigma2 },
    };
    let mut m = RunManifest::new("baseline", args);
    m.set("method", method.name());
    match method {
        Baseline::TopHat { se_side } => m.set("se_side", se_side),
        Baseline::MaxMedian { win } => m.set("win", win),
        Baseline::Dog { sigma1, sigma2 } => m.set("sigma1", sigma1).set("sigma2", sigma2),
    };
    write_maps(&a.io, &mut m, |f| Ok(method.apply(f)?))
}

fn run_synth(a: SynthArgs, args: &[String]) -> Result<()> {
    let text = std::fs::read_to_string(&a.spec).with_context(|| format!("reading spec {}", a.spec.display()))?;
    let spec = SequenceSpec::from_kv_str(&text).with_context(|| format!("scene spec {}", a.spec.display()))?;
    let scenes = spec.render()?;
    ensure_dir(&a.out_dir)?;

    let mut meta = String::from("frame_id,seed,saturated_pixels,overlaps\n");
    for (i, s) in scenes.iter().enumerate() {
        write(&a.out_dir.join(format!("frame_{i:04}.pgm")), &encode(&s.frame, false))?;
        let overlaps: Vec<String> = s.metadata.overlaps.iter().map(|(t, c)| format!("{t}:{c}")).collect();
        writeln!(
            meta,
            "{i},{},{},{}",
            spec.scene.seed.wrapping_add(i as u64),
            s.metadata.saturated_pixels,
            overlaps.join(" ")
        )
        .unwrap();
    }
    let truths: Vec<GroundTruth> = scenes.iter().map(|s| s.truth.clone()).collect();
    write(&a.out_dir.join("gt.csv"), &ground_truth_csv(&truths)?)?;
    write(&a.out_dir.join("metadata.csv"), meta.as_bytes())?;

    let mut m = RunManifest::new("synth", args);
    m.set_path("input.spec", &a.spec);
    m.set_config("spec", &text)?;
    m.set("seed", spec.scene.seed);
    m.set("frames", spec.frames);
    m.set_path("output.dir", &a.out_dir);
    m.write(&inside_dir(&a.out_dir))
}

fn load_map(path: &Path) -> Result<SaliencyMap> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        read_map_csv(path).with_context(|| format!("reading map {}", path.display()))
    } else {
        load_frame(path).with_context(|| format!("reading map {}", path.display()))
    }
}

/// Map files keyed by frame id. CSV maps are preferred when a directory holds both.
fn resolve_maps(path: &Path, suffix: &str) -> Result<BTreeMap<u32, PathBuf>> {
    let files = if path.is_dir() {
        let csv = list_dir(path, "csv", suffix)?;
        if csv.is_empty() {
            list_dir(path, "pgm", suffix)?
        } else {
            csv
        }
    } else if path.is_file() {
        vec![path.to_path_buf()]
    } else {
        bail!("maps {} do not exist", path.display());
    };
    if files.is_empty() {
        bail!("no map files with suffix `{suffix}` in {}", path.display());
    }
    let frames: Vec<FrameFile> = files
        .into_iter()
        .map(|p| FrameFile {
            id: frame_id_from_name(&p).unwrap_or(0),
            path: p,
        })
        .collect();
    check_unique(&frames)?;
    Ok(frames.into_iter().map(|f| (f.id, f.path)).collect())
}

fn truth_by_frame(path: &Path) -> Result<BTreeMap<u32, GroundTruth>> {
    Ok(read_ground_truth(path)
        .with_context(|| format!("reading ground truth {}", path.display()))?
        .into_iter()
        .map(|g| (g.frame_id, g))
        .collect())
}

fn run_eval(a: EvalArgs, args: &[String]) -> Result<()> {
    let inputs = resolve_inputs(&a.input)?;
    let maps = resolve_maps(&a.maps, &a.suffix)?;
    let truth = truth_by_frame(&a.gt)?;
    let single = inputs.len() == 1 && maps.len() == 1;

    let mut rows: Vec<(u32, EvalReport)> = Vec::new();
    for f in &inputs {
        let map_path = match maps.get(&f.id) {
            Some(p) => p,
            None if single => maps.values().next().expect("one map"),
            None => bail!("no map for frame {}", f.id),
        };
        let Some(gt) = truth.get(&f.id) else { continue };
        let frame = load(f)?;
        let map = load_map(map_path)?;
        for &(x, y) in &gt.targets {
            let r = scrg_with(&frame, &map, (x as i64, y as i64), a.target_side, a.bg_width)
                .with_context(|| format!("frame {} target ({x}, {y})", f.id))?;
            rows.push((f.id, r));
        }
    }
    ensure!(!rows.is_empty(), "no ground-truth targets for the given frames");
    write(&a.out, &report_csv(&a.method, &rows)?)?;

    let mut m = RunManifest::new("eval", args);
    m.set("method", &a.method)
        .set("target_side", a.target_side)
        .set("bg_width", a.bg_width)
        .set_path("input.frames", &a.input)
        .set_path("input.maps", &a.maps)
        .set_path("input.gt", &a.gt)
        .set_path("output.report", &a.out);
    m.write(&beside_file(&a.out))
}

fn run_roc(a: RocArgs, args: &[String]) -> Result<()> {
    ensure!(a.maps_dir.is_dir(), "{} is not a directory", a.maps_dir.display());
    let files = resolve_maps(&a.maps_dir, &a.suffix)?;
    let truth = truth_by_frame(&a.gt)?;
    let mut maps = Vec::with_capacity(files.len());
    let mut gts = Vec::with_capacity(files.len());
    for (id, path) in &files {
        maps.push(load_map(path)?);
        gts.push(truth.get(id).cloned().unwrap_or(GroundTruth {
            frame_id: *id,
            targets: Vec::new(),
        }));
    }
    let thresholds = roc_thresholds(&maps, a.levels);
    let curve = roc_curve_with_thresholds(&maps, &gts, &thresholds)?;
    write(&a.out, &roc_csv(&curve)?)?;

    let mut m = RunManifest::new("roc", args);
    m.set("levels", a.levels)
        .set("suffix", &a.suffix)
        .set("frames", maps.len())
        .set_path("input.maps", &a.maps_dir)
        .set_path("input.gt", &a.gt)
        .set_path("output.roc", &a.out);
    m.write(&beside_file(&a.out))
}

fn run_rings(a: RingsArgs, args: &[String]) -> Result<()> {
    let family = RingFamily::new(a.max_radius);
    let mut text = String::new();
    for ring in family.rings() {
        writeln!(text, "# radius {} ({} members)", ring.radius(), ring.members().len()).unwrap();
        text.push_str(&ring.to_text_grid());
        text.push('\n');
    }
    match &a.out {
        None => print!("{text}"),
        Some(p) => {
            write(p, text.as_bytes())?;
            let mut m = RunManifest::new("rings", args);
            m.set("max_radius", a.max_radius).set_path("output.text", p);
            m.write(&beside_file(p))?;
        }
    }
    Ok(())
}

fn run_replay(a: ReplayArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.manifest).with_context(|| format!("reading {}", a.manifest.display()))?;
    let m = RunManifest::parse(&text).with_context(|| format!("manifest {}", a.manifest.display()))?;
    let cli = Cli::try_parse_from(std::iter::once("irst".to_string()).chain(m.args.iter().cloned()))
        .map_err(|e| anyhow::anyhow!("recorded arguments no longer parse: {}", e.to_string().trim()))?;
    if matches!(cli.command, Command::Replay(_)) {
        bail!("refusing to replay a replay");
    }
    run(cli.command, &m.args)
}
