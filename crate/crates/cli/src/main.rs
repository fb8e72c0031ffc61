mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;
use tpnav::bench::{
    compute_metrics, default_demand_catalog, generate_tasks, mean_report, parse_tasks, run_tasks, write_results_csv,
    write_tasks, Summary, Task, SUMMARY_SCHEMA_VERSION,
};
use tpnav::decision::{DecisionBackend, OracleBackend, RemoteBackend, RemoteConfig};
use tpnav::geometry::Point2;
use tpnav::orchestrator::{parse_trace, replay, run_episode, write_trace, TraceRecord};
use tpnav::render::{render_svg, RenderOptions};
use tpnav::scene::{generate_scene, Scene, SceneGenConfig};

use config::{BackendKind, Effective, RunFlags};

#[derive(Debug, Parser)]
#[command(name = "tpnav", version, about = "Multi-demand indoor navigation: generate, run, score, render")]
struct Cli {
    /// Repeat for more log output on stderr.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate procedural scenes into a directory.
    GenScenes {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Scene generation config (JSON).
        #[arg(long, conflicts_with = "single_room")]
        scene_config: Option<PathBuf>,
        /// Use the compact one-room layout.
        #[arg(long)]
        single_room: bool,
    },
    /// Generate solvable three-subtask tasks over a scene directory.
    GenTasks {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Success radius used for the solvability check.
        #[arg(long, default_value_t = 1.5)]
        eps_dis: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one task and write its trace.
    Run {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
        /// Task id; defaults to the first task in the file.
        #[arg(long)]
        task: Option<String>,
        #[arg(long)]
        trace: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run every task, possibly repeatedly, and write metrics.
    Bench {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Draw a scene and a trace as SVG.
    Render {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Add the affordance heat layer.
        #[arg(long)]
        affordance: bool,
        /// Affordance target as `x,y`.
        #[arg(long, value_parser = parse_point)]
        target: Option<Point2>,
        /// Pixels per meter.
        #[arg(long, default_value_t = 60.0)]
        scale: f64,
    },
    /// Re-execute a trace against its scene and check every step.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        scene: PathBuf,
    },
}

fn parse_point(s: &str) -> Result<Point2, String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let f = |v: &str| v.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok(Point2::new(f(x)?, f(y)?))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_scene(path: &Path) -> Result<Scene> {
    Scene::from_json(&read(path)?).with_context(|| format!("loading {}", path.display()))
}

/// Every `*.json` scene in a directory, in file-name order.
fn load_scenes(dir: &Path) -> Result<Vec<Scene>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no scene files in {}", dir.display());
    }
    paths.iter().map(|p| load_scene(p)).collect()
}

fn load_tasks(path: &Path) -> Result<Vec<Task>> {
    parse_tasks(&read(path)?).with_context(|| format!("loading {}", path.display()))
}

fn load_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    parse_trace(&read(path)?).with_context(|| format!("loading {}", path.display()))
}

/// Checked before any episode starts, so a missing credential costs nothing.
fn backend(kind: BackendKind) -> Result<Box<dyn DecisionBackend>> {
    Ok(match kind {
        BackendKind::Oracle => Box::new(OracleBackend::default()),
        BackendKind::Remote => Box::new(RemoteBackend::new(RemoteConfig::from_env()?)),
    })
}

fn echo(effective: &Effective, extra: serde_json::Value) -> serde_json::Value {
    let mut v = serde_json::to_value(effective).expect("config serializes");
    if let (Some(m), serde_json::Value::Object(x)) = (v.as_object_mut(), extra) {
        m.extend(x);
    }
    eprintln!("effective config: {}", serde_json::to_string(&v).expect("config serializes"));
    v
}

fn gen_scenes(count: usize, seed: u64, out: &Path, scene_config: Option<&Path>, single_room: bool) -> Result<()> {
    let cfg = match scene_config {
        Some(p) => SceneGenConfig::from_json(&read(p)?).with_context(|| format!("loading {}", p.display()))?,
        None if single_room => SceneGenConfig::single_room(),
        None => SceneGenConfig::default(),
    };
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for i in 0..count {
        let scene = generate_scene(seed.wrapping_add(i as u64), &cfg)?;
        write(&out.join(format!("{}.json", scene.id)), &scene.to_json())?;
    }
    println!("wrote {count} scenes to {}", out.display());
    Ok(())
}

fn gen_tasks(scenes: &Path, count: usize, seed: u64, eps: f64, out: &Path) -> Result<()> {
    let scenes = load_scenes(scenes)?;
    let tasks = generate_tasks(&scenes, &default_demand_catalog(), count, seed, eps)?;
    for t in &tasks {
        let scene = scenes.iter().find(|s| s.id == t.scene_id).expect("tasks come from these scenes");
        t.validate_against(scene, eps)?;
    }
    write(out, &write_tasks(&tasks))?;
    println!("wrote {} tasks to {}", tasks.len(), out.display());
    Ok(())
}

fn run(scenes: &Path, tasks: &Path, task: Option<&str>, trace: &Path, flags: &RunFlags) -> Result<()> {
    let effective = flags.resolve()?;
    let backend = backend(effective.backend)?;
    let scenes = load_scenes(scenes)?;
    let tasks = load_tasks(tasks)?;
    let task = match task {
        Some(id) => tasks.iter().find(|t| t.id == id).with_context(|| format!("no task {id}"))?,
        None => tasks.first().context("task file is empty")?,
    };
    let scene = scenes.iter().find(|s| s.id == task.scene_id).with_context(|| format!("no scene {}", task.scene_id))?;
    echo(&effective, json!({ "task": task.id }));
    let outcome = run_episode(scene, task, &effective.episode, backend.as_ref());
    write(trace, &write_trace(&outcome.trace))?;
    println!(
        "{}",
        json!({
            "task_id": outcome.task_id,
            "scene_id": outcome.scene_id,
            "success": outcome.success_flags(),
            "actions": outcome.actions,
            "budget": outcome.budget,
            "reason": outcome.reason,
        })
    );
    if outcome.aborted() {
        bail!("episode aborted: {:?}", outcome.reason);
    }
    Ok(())
}

fn bench(scenes_dir: &Path, tasks_path: &Path, out: &Path, repeats: usize, flags: &RunFlags) -> Result<()> {
    if repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    let effective = flags.resolve()?;
    let backend = backend(effective.backend)?;
    let scenes = load_scenes(scenes_dir)?;
    let tasks = load_tasks(tasks_path)?;
    let config = echo(
        &effective,
        json!({
            "scenes": scenes_dir,
            "tasks": tasks_path,
            "repeats": repeats,
            "scene_seeds": scenes.iter().map(|s| s.seed).collect::<Vec<_>>(),
        }),
    );
    let mut reports = Vec::with_capacity(repeats);
    let mut aborted = 0;
    for r in 0..repeats {
        let runs = run_tasks(&scenes, &tasks, &effective.episode, backend.as_ref(), effective.threads, r)?;
        let dir = out.join(format!("run-{r}"));
        for run in &runs {
            write(&dir.join("traces").join(format!("{}.jsonl", run.result.task_id)), &write_trace(&run.outcome.trace))?;
        }
        aborted += runs.iter().filter(|x| x.outcome.aborted()).count();
        let results: Vec<_> = runs.into_iter().map(|x| x.result).collect();
        write(&dir.join("results.csv"), &write_results_csv(&results)?)?;
        let report = compute_metrics(&results, effective.ispl_averaging)?;
        eprintln!(
            "run {r}: SR {:.2} ISR {:.2} ISPL {:.2} STL {}",
            report.sr,
            report.isr,
            report.ispl,
            report.stl.map_or("n/a".into(), |s| format!("{s:.2}"))
        );
        reports.push(report);
    }
    let summary = Summary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        backend: backend.name().to_string(),
        ispl_averaging: effective.ispl_averaging,
        mean: mean_report(&reports).expect("at least one run"),
        runs: reports,
        config,
    };
    write(&out.join("summary.json"), &summary.to_json())?;
    print!("{}", summary.to_json());
    if aborted > 0 {
        bail!("{aborted} episodes aborted on backend errors");
    }
    Ok(())
}

fn render(trace: &Path, scene: &Path, out: &Path, opts: RenderOptions) -> Result<()> {
    let records = load_trace(trace)?;
    let scene = load_scene(scene)?;
    write(out, &render_svg(&scene, &records, &opts)?)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn replay_cmd(trace: &Path, scene: &Path) -> Result<()> {
    let records = load_trace(trace)?;
    let scene = load_scene(scene)?;
    let pose = replay(&scene, &records)?;
    println!("{}", json!({ "verified_steps": tpnav::orchestrator::steps(&records).count(), "final_pose": pose }));
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenScenes { count, seed, out, scene_config, single_room } => {
            gen_scenes(count, seed, &out, scene_config.as_deref(), single_room)
        }
        Command::GenTasks { scenes, count, seed, eps_dis, out } => gen_tasks(&scenes, count, seed, eps_dis, &out),
        Command::Run { scenes, tasks, task, trace, flags } => run(&scenes, &tasks, task.as_deref(), &trace, &flags),
        Command::Bench { scenes, tasks, out, repeats, flags } => bench(&scenes, &tasks, &out, repeats, &flags),
        Command::Render { trace, scene, out, affordance, target, scale } => {
            let opts = RenderOptions { scale, affordance, affordance_target: target, ..RenderOptions::default() };
            render(&trace, &scene, &out, opts)
        }
        Command::Replay { trace, scene } => replay_cmd(&trace, &scene),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().target(env_logger::Target::Stderr).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
