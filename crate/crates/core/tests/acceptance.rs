//! End-to-end acceptance checks. Each test prints one PASS/FAIL line on
//! stderr (written past the test harness capture) with its timing.

use std::collections::{BTreeSet, VecDeque};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tpnav::bench::{
    compute_metrics, default_demand_catalog, generate_tasks, run_tasks, shortest_path_length, write_results_csv,
    EpisodeResult, IsplAveraging, Summary, SubtaskResult, Task, SUMMARY_SCHEMA_VERSION,
};
use tpnav::corrector::CorrectorConfig;
use tpnav::decision::{
    DecisionBackend, DecisionError, ExtraInfo, FrontierCandidate, LocateContext, OracleBackend, RemoteBackend,
    RemoteConfig, Subtask,
};
use tpnav::geometry::{Point2, Point3};
use tpnav::masmap::{
    max_weight_assignment, record_target, update_local, MemoryBank, MemoryParams, ObjectMemoryEntry, ObjectPointCloud,
    UpdateOutcome,
};
use tpnav::orchestrator::{replay, run_episode, write_trace, EpisodeConfig, TraceRecord};
use tpnav::planner::{astar, path_cost, step_cost, AffordanceMap, Cell, CostUnit, GridMap, GridSpec, PlannerError};
use tpnav::scene::{
    generate_scene, scripted, sense_panorama, AgentPose, NoiseConfig, Scene, SceneGenConfig, SensorConfig, StepFeedback,
};

/// Run one criterion: time it, print its line, fail the test on a miss.
fn criterion(n: u8, name: &str, limit: Option<Duration>, body: impl FnOnce() -> Result<String, String>) {
    let t0 = Instant::now();
    let result = body();
    let dt = t0.elapsed();
    let result = match (result, limit) {
        (Ok(_), Some(l)) if dt > l => Err(format!("took {:.1} s, limit {:.0} s", dt.as_secs_f64(), l.as_secs_f64())),
        (r, _) => r,
    };
    let (tag, detail) = match &result {
        Ok(d) => ("PASS", d.clone()),
        Err(d) => ("FAIL", d.clone()),
    };
    let _ = writeln!(std::io::stderr(), "criterion {n:>2} {tag} [{:.2} s] {name}: {detail}", dt.as_secs_f64());
    if let Err(e) = result {
        panic!("criterion {n} ({name}) failed: {e}");
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sub(classes: &[&str]) -> Subtask {
    Subtask {
        requirement: format!("need {}", classes[0]),
        preference: String::new(),
        satisfying_classes: classes.iter().map(|c| c.to_string()).collect(),
    }
}

// 1 ------------------------------------------------------------------------

#[test]
fn c01_affordance_range() {
    criterion(1, "fused affordance range and obstacle band", Some(Duration::from_secs(10)), || {
        let tau = 0.25;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut zero_cells = 0usize;
        for m in 0..1000 {
            let res = *[0.05, 0.1].choose(&mut rng).unwrap();
            let (w, h) = (rng.random_range(4..30), rng.random_range(4..30));
            let spec = GridSpec { origin: Point2::new(rng.random_range(-3.0..3.0), 0.0), resolution: res, width: w, height: h };
            let p_obs = if m % 10 == 0 { 0.0 } else { rng.random_range(0.0..0.3) };
            let obstacle: Vec<bool> = (0..spec.len()).map(|_| rng.random_bool(p_obs)).collect();
            let navigable: Vec<bool> = obstacle.iter().map(|o| !o && rng.random_bool(0.9)).collect();
            let target = Point2::new(spec.origin.x + rng.random_range(0.0..w as f64 * res), rng.random_range(0.0..h as f64 * res));
            let grid = GridMap { spec, navigable: navigable.clone(), obstacle: obstacle.clone() };
            let map = AffordanceMap::compute(grid, target, tau);
            let obstacles: Vec<Cell> = (0..spec.len()).filter(|k| obstacle[*k]).map(|k| spec.cell(k)).collect();
            for (k, &a) in map.a_final.iter().enumerate() {
                check(a == 0.0 || (0.1..=1.0).contains(&a), || format!("map {m} cell {k}: a_final {a}"))?;
                let (i, j) = spec.cell(k);
                // Brute-force nearest obstacle, in whole cells.
                let near = obstacles.iter().any(|&(oi, oj)| {
                    let d2 = (i as f64 - oi as f64).powi(2) + (j as f64 - oj as f64).powi(2);
                    d2.sqrt() * res < tau
                });
                let want_zero = !navigable[k] || near;
                check((a == 0.0) == want_zero, || format!("map {m} cell {k}: a_final {a}, expected zero {want_zero}"))?;
                zero_cells += usize::from(a == 0.0);
            }
        }
        Ok(format!("1000 maps, {zero_cells} zero cells all inside the band or off the floor"))
    });
}

// 2 ------------------------------------------------------------------------

fn passable(a: &[f64], w: usize, h: usize, i: isize, j: isize) -> bool {
    i >= 0 && j >= 0 && (i as usize) < w && (j as usize) < h && a[j as usize * w + i as usize] > 0.0
}

/// Moves with their integer cost, diagonals needing both side cells open.
fn oracle_moves(a: &[f64], w: usize, h: usize, res: f64, (i, j): (usize, usize)) -> Vec<((usize, usize), CostUnit)> {
    let mut out = Vec::new();
    for dj in -1isize..=1 {
        for di in -1isize..=1 {
            if (di, dj) == (0, 0) {
                continue;
            }
            let (x, y) = (i as isize + di, j as isize + dj);
            if !passable(a, w, h, x, y) {
                continue;
            }
            let diagonal = di != 0 && dj != 0;
            if diagonal && !(passable(a, w, h, x, j as isize) && passable(a, w, h, i as isize, y)) {
                continue;
            }
            let len = if diagonal { res * std::f64::consts::SQRT_2 } else { res };
            out.push(((x as usize, y as usize), step_cost(len, a[y as usize * w + x as usize])));
        }
    }
    out
}

#[test]
fn c02_astar_optimality() {
    criterion(2, "A* cost equals uniform-cost oracle", Some(Duration::from_secs(30)), || {
        let (w, h, res) = (20usize, 20usize, 0.1);
        let spec = GridSpec { origin: Point2::new(0.0, 0.0), resolution: res, width: w, height: h };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (mut found, mut no_path) = (0, 0);
        for m in 0..200 {
            let p_block = rng.random_range(0.1..0.45);
            let a: Vec<f64> =
                (0..w * h).map(|_| if rng.random_bool(p_block) { 0.0 } else { rng.random_range(0.1..=1.0) }).collect();
            let open: Vec<usize> = (0..w * h).filter(|k| a[*k] > 0.0).collect();
            if open.len() < 2 {
                continue;
            }
            let s = *open.choose(&mut rng).unwrap();
            let g = *open.choose(&mut rng).unwrap();
            let (start, goal) = ((s % w, s / w), (g % w, g / w));
            // Bellman-Ford relaxation to a fixed point.
            let mut dist = vec![CostUnit::MAX; w * h];
            dist[s] = 0;
            loop {
                let mut changed = false;
                for k in 0..w * h {
                    if dist[k] == CostUnit::MAX {
                        continue;
                    }
                    for (n, c) in oracle_moves(&a, w, h, res, (k % w, k / w)) {
                        let nk = n.1 * w + n.0;
                        if dist[k] + c < dist[nk] {
                            dist[nk] = dist[k] + c;
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            let map = AffordanceMap::from_final(spec, a.clone());
            match astar(&map, start, goal) {
                Ok((path, cost)) => {
                    check(dist[g] == cost, || format!("map {m}: A* {cost}, oracle {}", dist[g]))?;
                    check(path_cost(&map, &path) == cost, || format!("map {m}: path does not cost {cost}"))?;
                    check(path.first() == Some(&start) && path.last() == Some(&goal), || format!("map {m}: endpoints"))?;
                    found += 1;
                }
                Err(PlannerError::NoPath) => {
                    check(dist[g] == CostUnit::MAX, || format!("map {m}: NoPath but oracle reaches the goal"))?;
                    no_path += 1;
                }
                Err(e) => return Err(format!("map {m}: {e}")),
            }
        }
        Ok(format!("{found} optimal paths, {no_path} agreed NoPath"))
    });
}

// 3 ------------------------------------------------------------------------

fn best_by_enumeration(s: &[Vec<f64>]) -> f64 {
    let (rows, cols) = (s.len(), s[0].len());
    fn go(s: &[Vec<f64>], r: usize, used: &mut Vec<bool>, rows: usize, cols: usize, need: usize) -> f64 {
        if need == 0 {
            return 0.0;
        }
        if r == rows {
            return f64::NEG_INFINITY;
        }
        let mut best = if rows - r > need { go(s, r + 1, used, rows, cols, need) } else { f64::NEG_INFINITY };
        for c in 0..cols {
            if !used[c] {
                used[c] = true;
                best = best.max(s[r][c] + go(s, r + 1, used, rows, cols, need - 1));
                used[c] = false;
            }
        }
        best
    }
    go(s, 0, &mut vec![false; cols], rows, cols, rows.min(cols))
}

#[test]
fn c03_hungarian_oracle() {
    criterion(3, "assignment equals exhaustive enumeration", Some(Duration::from_secs(10)), || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in 0..500 {
            let (r, c) = (rng.random_range(1..=6), rng.random_range(1..=6));
            // Multiples of 1/256 keep every sum exact.
            let s: Vec<Vec<f64>> =
                (0..r).map(|_| (0..c).map(|_| rng.random_range(0..=256) as f64 / 256.0).collect()).collect();
            let pairs = max_weight_assignment(&s);
            check(pairs.len() == r.min(c), || format!("matrix {m}: {} pairs", pairs.len()))?;
            let rows: BTreeSet<usize> = pairs.iter().map(|p| p.0).collect();
            let cols: BTreeSet<usize> = pairs.iter().map(|p| p.1).collect();
            check(rows.len() == pairs.len() && cols.len() == pairs.len(), || format!("matrix {m}: not one-to-one"))?;
            let total: f64 = pairs.iter().map(|&(i, j)| s[i][j]).sum();
            let want = best_by_enumeration(&s);
            check(total == want, || format!("matrix {m} ({r}x{c}): {total} vs {want}"))?;
        }
        Ok("500 matrices up to 6x6, totals exact".into())
    });
}

// 4 ------------------------------------------------------------------------

/// A room with `n` disjoint objects on a coarse lattice and a free spawn.
fn cluttered_room(seed: u64, n: usize) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = ["sofa", "chair", "table", "bed", "fridge", "lamp", "tv", "bookshelf", "houseplant", "toilet"];
    let (width, depth) = (12.0, 10.0);
    let mut slots: Vec<(usize, usize)> = (0..5).flat_map(|i| (0..4).map(move |j| (i, j))).collect();
    // Keep the center slot for the agent.
    slots.retain(|s| *s != (2, 2));
    let mut objects = Vec::new();
    for (id, (i, j)) in slots.choose_multiple(&mut rng, n).enumerate() {
        let (x0, y0) = (1.0 + 2.1 * *i as f64, 0.8 + 2.2 * *j as f64);
        let (sx, sy) = (rng.random_range(0.4..1.2), rng.random_range(0.4..1.2));
        let class = classes.choose(&mut rng).unwrap();
        objects.push(scripted::object(id, class, x0, y0, x0 + sx, y0 + sy, rng.random_range(0.4..1.8)));
    }
    scripted::walled_room(&format!("clutter-{seed}"), width, depth, objects, AgentPose::new(Point2::new(5.925, 5.325), 0))
}

#[test]
fn c04_masmap_deduplication() {
    criterion(4, "one memory entry per seen object, stable on re-feed", Some(Duration::from_secs(60)), || {
        let params = MemoryParams::default();
        let sensor = SensorConfig { range: 20.0, ..SensorConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut total = 0;
        for k in 0..50u64 {
            let n = rng.random_range(5..=15);
            let scene = cluttered_room(k, n);
            let pose = scene.spawns[0];
            let clouds = sense_panorama(&scene, &pose, &sensor, &NoiseConfig::default(), &mut ChaCha8Rng::seed_from_u64(k));
            let mut bank = MemoryBank::default();
            bank.ingest(&clouds, &params);
            // Objects that contributed at least one point are the ones that can be remembered.
            let seen: Vec<usize> = scene
                .objects
                .iter()
                .filter(|o| clouds.iter().any(|c| c.pcd.iter().any(|p| o.bounds.footprint().inflate(1e-9).contains(p.xy()))))
                .map(|o| o.id)
                .collect();
            let mut matched = BTreeSet::new();
            for e in &bank.object_memory {
                let hits: Vec<_> = scene.objects.iter().filter(|o| o.bounds.footprint().inflate(1e-9).contains(e.center)).collect();
                check(hits.len() == 1, || format!("scene {k}: entry {} at {:?} covers {} objects", e.class, e.center, hits.len()))?;
                check(hits[0].class == e.class, || format!("scene {k}: {} remembered as {}", hits[0].class, e.class))?;
                check(matched.insert(hits[0].id), || format!("scene {k}: object {} remembered twice", hits[0].id))?;
            }
            let precision = matched.len() as f64 / bank.object_memory.len().max(1) as f64;
            let recall = matched.len() as f64 / seen.len().max(1) as f64;
            check(precision == 1.0 && recall == 1.0, || format!("scene {k}: precision {precision}, recall {recall}"))?;
            let before = bank.object_memory.len();
            bank.ingest(&clouds, &params);
            check(bank.object_memory.len() == before, || format!("scene {k}: re-feed grew memory {before} -> {}", bank.object_memory.len()))?;
            total += before;
        }
        Ok(format!("50 panoramas, {total} entries, precision = recall = 1"))
    });
}

// 5 ------------------------------------------------------------------------

/// `k` points shared with a 0.1 m spaced reference line, the rest far away.
fn line(class: &str, n: usize, y: f64) -> ObjectPointCloud {
    ObjectPointCloud { class: class.into(), pcd: (0..n).map(|i| Point3::new(i as f64 * 0.1, y, 0.5)).collect() }
}

fn candidate(class: &str, shared: usize, total: usize) -> ObjectPointCloud {
    let mut c = line(class, shared, 0.0);
    c.pcd.extend(line(class, total - shared, 5.0).pcd);
    c
}

#[test]
fn c05_update_rule_branches() {
    criterion(5, "update-rule thresholds at their boundaries", None, || {
        let p = MemoryParams::default();
        let run = |reference: usize, cand: &ObjectPointCloud| {
            let mut bank = MemoryBank::default();
            bank.local_pc.push(line("sofa", reference, 0.0));
            let out = update_local(cand, &mut bank, &p);
            (out, bank.local_pc)
        };
        // max os* = 1/8 < 0.25: new object even though only 7 points remain.
        let (out, pcs) = run(20, &candidate("chair", 1, 8));
        check(out == UpdateOutcome::Appended && pcs[1].pcd.len() == 7 && pcs[1].class == "chair", || format!("{out:?}"))?;
        // os* = 2/8 = 0.25 is not below the bound: the 6-point residual is too small.
        let (out, pcs) = run(20, &candidate("chair", 2, 8));
        check(out == UpdateOutcome::Discarded && pcs.len() == 1, || format!("{out:?}"))?;
        // os* = 4/20: new object, residual of 16.
        let (out, pcs) = run(20, &candidate("chair", 4, 20));
        check(out == UpdateOutcome::Appended && pcs[1].pcd.len() == 16, || format!("{out:?}"))?;
        // os* = ros* = 17/20 = 0.85: merge, class overwritten, residual absorbed.
        let (out, pcs) = run(20, &candidate("couch", 17, 20));
        check(
            out == UpdateOutcome::Merged { index: 0 } && pcs.len() == 1 && pcs[0].class == "couch" && pcs[0].pcd.len() == 23,
            || format!("{out:?} {:?}", pcs.iter().map(|c| (&c.class, c.pcd.len())).collect::<Vec<_>>()),
        )?;
        // os* = ros* = 0.8 exactly: no merge; 4 leftover points are dropped.
        let (out, pcs) = run(20, &candidate("couch", 16, 20));
        check(out == UpdateOutcome::Discarded && pcs[0].class == "sofa", || format!("{out:?}"))?;
        // os* = 0.9 but ros* = 18/40: no merge.
        let (out, pcs) = run(40, &candidate("couch", 18, 20));
        check(out == UpdateOutcome::Discarded && pcs[0].class == "sofa" && pcs[0].pcd.len() == 40, || format!("{out:?}"))?;
        Ok("6 constructed cases".into())
    });
}

// 6 ------------------------------------------------------------------------

fn single_task(scene: &Scene, classes: &[&str]) -> Task {
    Task {
        id: "corridor".into(),
        instruction: "I want something cold to drink".into(),
        subtasks: vec![sub(classes)],
        scene_id: scene.id.clone(),
        spawn_index: 0,
    }
}

#[test]
fn c06_corrector_regression() {
    criterion(6, "corrector gets past the glass, disabled stack does not", None, || {
        let mut wins = 0;
        for seed in 0..10 {
            let scene = scripted::blocked_corridor(seed);
            let task = single_task(&scene, &["fridge"]);
            let on = EpisodeConfig { len_max: 250, ..EpisodeConfig::default() };
            let off = EpisodeConfig { corrector: CorrectorConfig { enabled: false, ..CorrectorConfig::default() }, ..on.clone() };
            let a = run_episode(&scene, &task, &on, &OracleBackend::default());
            let b = run_episode(&scene, &task, &off, &OracleBackend::default());
            check(a.all_success() && a.actions <= on.len_max, || format!("seed {seed}: enabled ended {:?}", a.reason))?;
            check(!b.all_success(), || format!("seed {seed}: disabled stack also succeeded"))?;
            check(a.trace.iter().any(|r| matches!(r, TraceRecord::Correction(_))), || format!("seed {seed}: no correction"))?;
            check(replay(&scene, &a.trace) == Ok(a.final_pose), || format!("seed {seed}: replay mismatch"))?;
            wins += 1;
        }
        Ok(format!("{wins}/10 seeds"))
    });
}

// 7 ------------------------------------------------------------------------

fn oracle_suite(base: u64, count: usize, len_max: usize) -> (Vec<Scene>, Vec<Task>, EpisodeConfig) {
    let scenes: Vec<Scene> = (base..base + 5).map(|s| generate_scene(s, &SceneGenConfig::default()).unwrap()).collect();
    let tasks = generate_tasks(&scenes, &default_demand_catalog(), count, base, 1.5).unwrap();
    (scenes, tasks, EpisodeConfig { len_max, ..EpisodeConfig::default() })
}

#[test]
fn c07_oracle_end_to_end() {
    criterion(7, "oracle end-to-end on 20 generated tasks", Some(Duration::from_secs(300)), || {
        let (scenes, tasks, cfg) = oracle_suite(0, 20, 250);
        for t in &tasks {
            let scene = scenes.iter().find(|s| s.id == t.scene_id).unwrap();
            t.validate_against(scene, cfg.eps_dis).map_err(|e| e.to_string())?;
            check(t.subtasks.len() == 3, || format!("{} has {} subtasks", t.id, t.subtasks.len()))?;
        }
        let runs = run_tasks(&scenes, &tasks, &cfg, &OracleBackend::default(), 1, 0).map_err(|e| e.to_string())?;
        let results: Vec<EpisodeResult> = runs.iter().map(|r| r.result.clone()).collect();
        let m = compute_metrics(&results, IsplAveraging::WithinTask).map_err(|e| e.to_string())?;
        let line = format!("SR {:.2} ISR {:.2} ISPL {:.2} STL {:?}", m.sr, m.isr, m.ispl, m.stl);
        check(runs.iter().all(|r| r.outcome.actions <= cfg.len_max), || format!("budget overrun; {line}"))?;
        check(m.sr >= 95.0 && m.isr >= 98.0, || line.clone())?;
        check(m.sr <= m.isr && m.ispl <= m.isr, || format!("ordering violated; {line}"))?;
        Ok(line)
    });
}

// 8 ------------------------------------------------------------------------

fn bench_bytes() -> (Vec<String>, String, String) {
    let (scenes, tasks, cfg) = oracle_suite(40, 6, 150);
    let scene_json: String = scenes.iter().map(Scene::to_json).collect();
    let runs = run_tasks(&scenes, &tasks, &cfg, &OracleBackend::default(), 2, 0).unwrap();
    let traces = runs.iter().map(|r| write_trace(&r.outcome.trace)).collect();
    let results: Vec<EpisodeResult> = runs.iter().map(|r| r.result.clone()).collect();
    let report = compute_metrics(&results, IsplAveraging::WithinTask).unwrap();
    let summary = Summary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        backend: "oracle".into(),
        ispl_averaging: IsplAveraging::WithinTask,
        runs: vec![report.clone()],
        mean: report,
        config: serde_json::to_value(&cfg).unwrap(),
    };
    (traces, summary.to_json() + &write_results_csv(&results).unwrap(), scene_json)
}

#[test]
fn c08_determinism() {
    criterion(8, "identical seeds give byte-identical outputs", None, || {
        let (ta, sa, ga) = bench_bytes();
        let (tb, sb, gb) = bench_bytes();
        check(ga == gb, || "scene documents differ".into())?;
        check(ta == tb, || "traces differ".into())?;
        check(sa == sb, || "summaries differ".into())?;
        Ok(format!("{} traces, {} summary bytes", ta.len(), sa.len()))
    });
}

// 9 ------------------------------------------------------------------------

const DEFAULT_CONFIG_SNAPSHOT: &str = r#"{"eps_dis":1.5,"len_max":50,"n_tolerance":2,"tau_obs":0.25,"slow_interval":12,"burst_len":6,"step_counting":"primitive","seed":0,"approach_margin":0.5,"frontier_goal_radius":0.5,"frontier":{"explained_radius":0.3,"min_pocket_area":1.0,"min_cells":10},"optimistic_unknown":true,"corrector":{"enabled":true,"loop_window":6,"loop_max_distinct":2,"loop_cell":0.05,"persist_obstacles":true},"planner":{"resolution":0.05,"dilation_radius":0.2,"heights":{"floor":0.1,"agent":1.8},"waypoints":{"n_waypoint":8,"n_block":2,"fine_prefix_m":2.0}},"sensor":{"views":4,"hfov_deg":90.0,"range":5.0,"max_points_per_view":900,"depth_spacing":0.05},"noise":{"drop":0.0,"jitter":0.0,"mislabel":0.0},"memory":{"delta_overlap":0.05,"new_object_below":0.25,"merge_above":0.8,"min_residual_points":10,"match_threshold":0.3}}"#;

fn episode(flags: &[bool], shortest: f64, actual: f64) -> EpisodeResult {
    EpisodeResult {
        task_id: "t".into(),
        scene_id: "s".into(),
        subtasks: flags.iter().map(|f| SubtaskResult { success: *f, shortest: Some(shortest), actual }).collect(),
        steps: 10,
        wall_time_s: 0.0,
    }
}

#[test]
fn c09_metric_hand_check_and_defaults() {
    criterion(9, "metric worked examples and shipped defaults", None, || {
        let m = compute_metrics(&[episode(&[true, true, false], 1.0, 1.0), episode(&[true, false, false], 1.0, 1.0)], IsplAveraging::WithinTask)
            .map_err(|e| e.to_string())?;
        check(m.isr == 50.0 && m.sr == 0.0, || format!("ISR {} SR {}", m.isr, m.sr))?;
        let optimal = compute_metrics(&[episode(&[true, true, true], 3.0, 3.0)], IsplAveraging::WithinTask).unwrap();
        check(optimal.ispl == 100.0, || format!("optimal ISPL {}", optimal.ispl))?;
        let half = SubtaskResult { success: true, shortest: Some(5.0), actual: 10.0 }.weighted();
        check(half == 0.5, || format!("shortest 5 / actual 10 weighs {half}"))?;

        // 2 m corridor with a 1.5 m success radius leaves 0.5 m to walk.
        let start = Point2::new(1.025, 0.525);
        let corridor = scripted::walled_room(
            "corridor",
            6.0,
            1.05,
            vec![scripted::object(0, "sofa", 2.82, 0.325, 3.22, 0.725, 0.6)],
            AgentPose::new(start, 0),
        );
        let classes: BTreeSet<String> = ["sofa".to_string()].into();
        let d = shortest_path_length(&corridor, start, &classes, 1.5).map_err(|e| e.to_string())?;
        check((d - 0.5).abs() < 1e-9, || format!("corridor shortest {d}"))?;

        let c = EpisodeConfig::default();
        check((c.eps_dis, c.len_max, c.n_tolerance, c.tau_obs) == (1.5, 50, 2, 0.25), || format!("{c:?}"))?;
        let snapshot = serde_json::to_string(&c).unwrap();
        check(snapshot == DEFAULT_CONFIG_SNAPSHOT, || format!("default config drifted: {snapshot}"))?;
        Ok("ISR 50 / SR 0, ISPL 1.0 and 0.5, corridor 0.5 m, defaults 1.5 m / 50 / 2 / 0.25 m".into())
    });
}

// 10 -----------------------------------------------------------------------

const CLASSES: [&str; 6] = ["sofa", "chair", "fridge", "lamp", "bed", "tv"];

struct MemoryState {
    bank: MemoryBank,
    subtasks: Vec<Subtask>,
    status: Vec<bool>,
    frontiers: Vec<FrontierCandidate>,
    agent: Point2,
}

fn random_state(rng: &mut ChaCha8Rng) -> MemoryState {
    let mut bank = MemoryBank::default();
    for _ in 0..rng.random_range(0..10) {
        let c = Point2::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0));
        let class = CLASSES.choose(rng).unwrap().to_string();
        bank.object_memory.push(ObjectMemoryEntry { class, center: c, bbox: [c.x - 0.3, c.x + 0.3, c.y - 0.3, c.y + 0.3] });
    }
    let subtasks: Vec<Subtask> = (0..3).map(|_| sub(&CLASSES.choose_multiple(rng, 2).copied().collect::<Vec<_>>())).collect();
    let status = (0..3).map(|_| rng.random_bool(0.3)).collect();
    let frontiers = (0..rng.random_range(0..5))
        .map(|_| FrontierCandidate { position: Point2::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)), size: rng.random_range(10..200) })
        .collect();
    MemoryState { bank, subtasks, status, frontiers, agent: Point2::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)) }
}

/// Fail the chosen target `n >= 2` times and build the exclusion from it.
fn exclude(state: &mut MemoryState, object: &str, position: Point2, rng: &mut ChaCha8Rng, n_tolerance: usize) -> ExtraInfo {
    for _ in 0..rng.random_range(n_tolerance..n_tolerance + 3) {
        record_target(&mut state.bank, object, position, StepFeedback::Obstructed);
    }
    assert!(state.bank.consecutive_failures >= n_tolerance);
    ExtraInfo { object: object.into(), position }
}

fn ctx<'a>(s: &'a MemoryState, extra: Option<&'a ExtraInfo>) -> LocateContext<'a> {
    LocateContext {
        instruction: "three needs",
        subtasks: &s.subtasks,
        status: &s.status,
        bank: &s.bank,
        agent: s.agent,
        extra_info: extra,
        frontiers: &s.frontiers,
    }
}

/// Chat endpoint that always names the excluded pair first, then whatever
/// `replies` holds.
fn adversarial_stub(replies: Arc<Mutex<VecDeque<String>>>) -> RemoteConfig {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap_or(0);
                }
            }
            let mut body = vec![0; len];
            let _ = reader.read_exact(&mut body);
            let content = replies.lock().unwrap().pop_front().unwrap_or_else(|| "{}".into());
            let payload = serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string();
            let mut stream = stream;
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            );
        }
    });
    RemoteConfig::new(format!("http://{addr}/v1"), "key", "stub")
}

fn reply(object: &str, p: Point2) -> String {
    serde_json::json!({"target_object": object, "target_position": [p.x, p.y], "rationale": "r"}).to_string()
}

#[test]
fn c10_extra_info_exclusion() {
    criterion(10, "locate never repeats an excluded target", None, || {
        let n_tol = EpisodeConfig::default().n_tolerance;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let oracle = OracleBackend::default();
        let replies = Arc::new(Mutex::new(VecDeque::new()));
        let mut remote_cfg = adversarial_stub(replies.clone());
        remote_cfg.timeout = Duration::from_secs(5);
        let remote = RemoteBackend::new(remote_cfg);
        let (mut states, mut redirected, mut refused) = (0, 0, 0);
        while states < 1000 {
            let mut s = random_state(&mut rng);
            let Ok(first) = oracle.locate_next(&ctx(&s, None)) else { continue };
            let extra = exclude(&mut s, &first.target_object, first.target_position, &mut rng, n_tol);
            states += 1;
            match oracle.locate_next(&ctx(&s, Some(&extra))) {
                Ok(d) => {
                    check(!extra.excludes(&d.target_object, d.target_position), || format!("oracle repeated {d:?} under {extra:?}"))?;
                    redirected += 1;
                }
                Err(DecisionError::NoCandidates) => refused += 1,
                Err(e) => return Err(format!("oracle: {e}")),
            }
            // The remote backend gets the excluded pair, then a random known entry.
            if states % 4 == 0 {
                let alt = s.bank.object_memory.choose(&mut rng).map(|e| reply(&e.class, e.center));
                let mut q = replies.lock().unwrap();
                q.clear();
                q.push_back(reply(&extra.object, extra.position));
                q.extend(alt);
                q.push_back(reply(&extra.object, extra.position));
                drop(q);
                match remote.locate_next(&ctx(&s, Some(&extra))) {
                    Ok(d) => check(!extra.excludes(&d.target_object, d.target_position), || format!("remote repeated {d:?}"))?,
                    Err(DecisionError::ParseError(_) | DecisionError::NoCandidates) => {}
                    Err(e) => return Err(format!("remote: {e}")),
                }
            }
        }
        Ok(format!("{states} states: {redirected} redirected, {refused} with no candidate left"))
    });
}
