use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use radlabel::eval::{
    confusion_and_prf, evaluate_frame, format_metrics_table, format_prf_table, DetectionMetrics, MetricsAverager,
};
use radlabel::io::{self, FrameBundle};
use radlabel::labelling::{run_labelling_pipeline, GroundSelector};
use radlabel::labels::ClassLabel;
use radlabel::radar::raed_to_rae;
use radlabel::render::render_bev_ppm;
use radlabel::segmath::{check_gradients, inverse_frequency_weights, random_instance, GradCheck};
use radlabel::synth::{generate_scene, write_frame, SceneSpec};
use radlabel::voxel::voxelize_labels;
use radlabel::par;

use crate::config::CliConfig;
use crate::{Cli, Command, EvalArgs, Failure, LabelArgs, LosscheckArgs, SynthArgs};

/// Files `label` writes per frame.
pub mod outputs {
    /// Labeled cloud in the radar frame.
    pub const LABELED: &str = "labeled.pcb";
    pub const CUBE: &str = "cube.u8";
    /// The input cloud with its labels; dropped points are empty.
    pub const POINT_LABELS: &str = "point_labels.pcb";
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    if cli.jobs == Some(0) {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let cfg = CliConfig::load(cli.config.as_deref())?;
    with_pool(cli.jobs, || dispatch(cli.command, &cfg))
}

#[cfg(feature = "parallel")]
fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .expect("thread pool");
    pool.install(f)
}

#[cfg(not(feature = "parallel"))]
fn with_pool<T: Send>(_jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    f()
}

fn dispatch(cmd: Command, cfg: &CliConfig) -> Result<(), Failure> {
    match cmd {
        Command::Synth(a) => synth(&a)?,
        Command::Label(a) => label(&a, cfg)?,
        Command::Rae(a) => {
            let t = io::read_raed(&a.power, &a.elevation).map_err(anyhow::Error::from)?;
            io::write_rae(&a.out, &raed_to_rae(&t)).map_err(anyhow::Error::from)?;
        }
        Command::Voxelize(a) => {
            let pc = io::read_point_cloud(&a.cloud).map_err(anyhow::Error::from)?;
            let labels = pc
                .labels
                .ok_or_else(|| anyhow!("{} has no labels", a.cloud.display()))?;
            let v = voxelize_labels(&pc.points, &labels, &cfg.grid.spec()?);
            io::write_label_cube(&a.out, &v.cube).map_err(anyhow::Error::from)?;
            eprintln!(
                "{}: {} points in grid, {} outside, {} occupied cells",
                a.out.display(),
                v.in_grid,
                v.out_of_grid,
                v.cell_counts.len()
            );
        }
        Command::Eval(a) => eval(&a, cfg)?,
        Command::Render(a) => {
            let cube = io::read_label_cube(&a.cube).map_err(anyhow::Error::from)?;
            write(&a.out, &render_bev_ppm(&cube))?;
        }
        Command::Losscheck(a) => losscheck(&a, cfg)?,
    }
    Ok(())
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn synth(a: &SynthArgs) -> Result<(), Failure> {
    if a.frames == 0 {
        return Err(Failure::Usage("--frames must be at least 1".into()));
    }
    let base = match &a.scene {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(toml::from_str::<SceneSpec>(&text).with_context(|| format!("parsing {}", p.display()))?)
        }
        None => None,
    };
    let seeds: Vec<u64> = (0..a.frames).map(|i| a.seed + i).collect();
    let results = par::map_slice(&seeds, |&seed| -> Result<PathBuf> {
        let mut spec = match &base {
            Some(s) => SceneSpec { seed, ..s.clone() },
            None => SceneSpec::random(seed),
        };
        if a.raed && spec.radar.is_none() {
            spec.radar = Some(Default::default());
        }
        let frame = generate_scene(&spec)?;
        let dir = if a.frames == 1 {
            a.out.clone()
        } else {
            a.out.join(format!("frame_{seed:06}"))
        };
        Ok(write_frame(&frame, &dir)?)
    });
    for r in results {
        println!("{}", r?.display());
    }
    Ok(())
}

fn label(a: &LabelArgs, cfg: &CliConfig) -> Result<(), Failure> {
    let grid = cfg.grid.spec()?;
    let many = a.bundles.len() > 1;
    let results = par::map_slice(&a.bundles, |path| -> Result<String> {
        let bundle = FrameBundle::read(path)?;
        let mut frame = bundle.load().with_context(|| format!("loading {}", path.display()))?;
        if let GroundSelector::ExternalMask(p) = &cfg.labelling.ground {
            if frame.inputs.external_ground.is_none() {
                frame.inputs.external_ground = Some(io::read_ground_mask(bundle.resolve(p))?);
            }
        }
        let mut pcfg = cfg.labelling.clone();
        pcfg.lidar_to_radar = frame.calibration.lidar_to_radar;
        let out = run_labelling_pipeline(&frame.inputs, &pcfg).with_context(|| format!("labelling {}", frame.frame_id))?;
        let dir = match &a.out {
            Some(o) if many => o.join(&frame.frame_id),
            Some(o) => o.clone(),
            None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let cube = voxelize_labels(&out.cloud.points, &out.cloud.labels, &grid).cube;
        io::write_point_cloud(dir.join(outputs::LABELED), &out.cloud.points, Some(&out.cloud.labels))?;
        io::write_label_cube(dir.join(outputs::CUBE), &cube)?;
        let on_input = out.labels_on_input(frame.inputs.points.len());
        io::write_point_cloud(dir.join(outputs::POINT_LABELS), &frame.inputs.points, Some(&on_input))?;
        let c = &out.counts;
        Ok(format!(
            "{}: {} points, {} in view, {} ground, {} camera changes, {} clusters, {} labeled -> {}",
            frame.frame_id,
            c.input,
            c.in_fov,
            c.ground,
            c.camera_changed,
            c.clusters,
            c.output,
            dir.display()
        ))
    });
    for r in results {
        println!("{}", r?);
    }
    Ok(())
}

fn is_point_cloud(path: &Path) -> Result<bool> {
    use std::io::Read;
    let mut magic = [0u8; 4];
    let mut f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(f.read_exact(&mut magic).is_ok() && &magic == b"PCB1")
}

fn frame_name(p: &Path) -> String {
    p.parent()
        .and_then(Path::file_name)
        .or_else(|| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

fn eval(a: &EvalArgs, cfg: &CliConfig) -> Result<(), Failure> {
    if a.pred.len() != a.gt.len() {
        return Err(Failure::Usage(format!(
            "{} --pred paths but {} --gt paths",
            a.pred.len(),
            a.gt.len()
        )));
    }
    let kinds = a
        .pred
        .iter()
        .chain(&a.gt)
        .map(|p| is_point_cloud(p))
        .collect::<Result<Vec<_>>>()?;
    let clouds = kinds[0];
    if kinds.iter().any(|&k| k != clouds) {
        return Err(Failure::Data(anyhow!("cannot mix label cubes and point clouds in one evaluation")));
    }
    let pairs: Vec<(&PathBuf, &PathBuf)> = a.pred.iter().zip(&a.gt).collect();
    let mut records = Vec::new();
    if clouds {
        let per_frame = par::map_slice(&pairs, |(p, g)| -> Result<(Vec<ClassLabel>, Vec<ClassLabel>)> {
            let labels = |path: &Path| -> Result<Vec<ClassLabel>> {
                io::read_point_cloud(path)?
                    .labels
                    .ok_or_else(|| anyhow!("{} has no labels", path.display()))
            };
            Ok((labels(p)?, labels(g)?))
        });
        let (mut all_pred, mut all_gt) = (Vec::new(), Vec::new());
        for ((p, g), r) in pairs.iter().zip(per_frame) {
            let (pl, gl) = r?;
            let report = confusion_and_prf(&pl, &gl).with_context(|| format!("{} vs {}", p.display(), g.display()))?;
            records.push(json!({
                "frame": frame_name(p),
                "pred": p.display().to_string(),
                "gt": g.display().to_string(),
                "classes": prf_json(&report),
            }));
            all_pred.extend(pl);
            all_gt.extend(gl);
        }
        let total = confusion_and_prf(&all_pred, &all_gt).map_err(anyhow::Error::from)?;
        print!("{}", format_prf_table(&total));
        records.push(json!({ "summary": true, "frames": pairs.len(), "classes": prf_json(&total) }));
    } else {
        let grid = cfg.grid.spec()?;
        let per_frame = par::map_slice(&pairs, |(p, g)| -> Result<DetectionMetrics> {
            let pred = io::read_label_cube(p)?;
            let gt = io::read_label_cube(g)?;
            evaluate_frame(&pred, &gt, &grid, &cfg.eval).with_context(|| format!("{} vs {}", p.display(), g.display()))
        });
        let mut rows = Vec::new();
        let mut avg = MetricsAverager::default();
        for ((p, g), r) in pairs.iter().zip(per_frame) {
            let m = r?;
            avg.add(&m);
            records.push(json!({
                "frame": frame_name(p),
                "pred": p.display().to_string(),
                "gt": g.display().to_string(),
                "metrics": m,
            }));
            rows.push((frame_name(p), m));
        }
        rows.push(("mean".to_string(), avg.mean()));
        print!("{}", format_metrics_table(&rows));
        records.push(json!({
            "summary": true,
            "frames": avg.frames(),
            "contributing_frames": avg.counts(),
            "metrics": avg.mean(),
        }));
    }
    if let Some(path) = &a.records {
        let mut text = String::new();
        for r in &records {
            text.push_str(&r.to_string());
            text.push('\n');
        }
        write(path, text.as_bytes())?;
    }
    Ok(())
}

fn prf_json(report: &radlabel::eval::PrfReport) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for c in &ClassLabel::ALL[1..] {
        let v = match report.class(*c) {
            Some(m) => json!({
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "zero_denominator": m.zero_denominator,
            }),
            None => serde_json::Value::Null,
        };
        map.insert(c.name().to_string(), v);
    }
    serde_json::Value::Object(map)
}

fn losscheck(a: &LosscheckArgs, cfg: &CliConfig) -> Result<(), Failure> {
    let dims: [usize; 4] = a
        .dims
        .as_slice()
        .try_into()
        .map_err(|_| Failure::Usage("--dims takes four values".into()))?;
    if dims.contains(&0) || dims[0] > 5 {
        return Err(Failure::Usage("--dims needs 1..=5 channels and non-zero bins".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let instances: Vec<_> = (0..a.instances).map(|_| random_instance(&mut rng, dims)).collect();
    let results = par::map_slice(&instances, |(probs, target)| -> Result<GradCheck> {
        let weights = inverse_frequency_weights([target], dims[0]);
        Ok(check_gradients(probs, target, &weights, &cfg.loss, a.step)?)
    });
    let mut worst = GradCheck::default();
    let mut failed = 0;
    for r in results {
        let g = r?;
        worst.wce = worst.wce.max(g.wce);
        worst.dice = worst.dice.max(g.dice);
        worst.combined = worst.combined.max(g.combined);
        worst.max_elementwise_relative = worst.max_elementwise_relative.max(g.max_elementwise_relative);
        worst.max_abs = worst.max_abs.max(g.max_abs);
        failed += usize::from(g.worst() > a.tolerance);
    }
    println!("instances {} dims {:?} step {:e} tolerance {:e}", a.instances, dims, a.step, a.tolerance);
    println!(
        "relative error (norm-wise)  wce {:.3e}  dice {:.3e}  combined {:.3e}",
        worst.wce, worst.dice, worst.combined
    );
    println!(
        "elementwise                 max relative {:.3e}  max absolute {:.3e}",
        worst.max_elementwise_relative, worst.max_abs
    );
    if failed > 0 {
        return Err(Failure::Data(anyhow!("{failed} of {} instances exceed the tolerance", a.instances)));
    }
    println!("ok");
    Ok(())
}
