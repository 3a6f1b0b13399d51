//! Acceptance suite. Runs every exit criterion, prints one PASS/FAIL line
//! per criterion and exits non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use panotrack::association::{
    appearance_cost, solve_assignment, trajectory_cost, CostMatrix, CostMode, Embedding,
};
use panotrack::detection::LocalizedDetection;
use panotrack::filtering::{ConstantVelocityFilter, KalmanParams};
use panotrack::geometry::{localize, localize_in_camera, project_into, Location, PanoramaRig};
use panotrack::metrics::{evaluate, EvalParams, EvalReport, LabeledPoint};
use panotrack::synth::{generate_scene, Occlusion, SceneConfig, SyntheticScene};
use panotrack::tracker::{self, Tracker, TrackerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn check(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn quad_rig() -> PanoramaRig {
    PanoramaRig::quad(1280, 960, 1.7)
}

fn geometry_round_trip() -> Outcome {
    let rig = quad_rig();
    let h = rig.body_height_m;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut max_err = 0.0f64;
    for i in 0..10_000 {
        let view = &rig.views[i % 4];
        let depth = rng.random_range(1.0..=50.0);
        // stay inside a 90 degree field of view
        let lateral = depth * rng.random_range(-1.0..1.0);
        let truth = view.rotation().to_panorama(&Vector3::new(lateral, 0.0, depth));
        let feet = Vector3::new(truth.x, 1.2, truth.z);
        let head = Vector3::new(truth.x, 1.2 - h, truth.z);
        let (pf, ph) = (project_into(view, &feet).unwrap(), project_into(view, &head).unwrap());
        let loc = localize(&rig, view.view_id, pf.u, pf.v - ph.v).unwrap();
        max_err = max_err.max((loc.x - truth.x).abs()).max((loc.z - truth.z).abs());
    }
    let elapsed = start.elapsed();
    check(
        max_err < 1e-9 && elapsed < Duration::from_secs(1),
        format!("max error {max_err:.3e} m (< 1e-9), {elapsed:.2?} (< 1 s)"),
    )
}

fn height_scaling_law() -> Outcome {
    let rig = quad_rig();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for i in 0..1_000 {
        let view = &rig.views[i % 4];
        let depth = rng.random_range(1.0..=50.0);
        let lateral = depth * rng.random_range(-1.0..1.0);
        let k = &view.intrinsics;
        let pixel_height = k.fy * rig.body_height_m / depth;
        let u = k.fx * lateral / depth + k.cx;
        let (_, z) = localize_in_camera(view, u, pixel_height, 1.1 * rig.body_height_m).unwrap();
        worst = worst.max((z / (1.1 * depth) - 1.0).abs());
    }
    check(worst < 1e-9, format!("max relative depth error {worst:.3e} (< 1e-9)"))
}

fn brute_force_min(c: &CostMatrix) -> f64 {
    fn rec(c: &CostMatrix, row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if row == c.rows() {
            *best = best.min(acc);
            return;
        }
        for j in 0..c.cols() {
            if !used[j] {
                used[j] = true;
                rec(c, row + 1, used, acc + c.get(row, j), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(c, 0, &mut vec![false; c.cols()], 0.0, &mut best);
    best
}

fn assignment_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = Instant::now();
    let mut mismatches = 0usize;
    let mut total = 0usize;
    for rows in 1..=7 {
        for cols in 1..=7 {
            for _ in 0..500 {
                let c = CostMatrix::from_fn(rows, cols, |_, _| rng.random_range(0.0..2.0));
                let a = solve_assignment(&c).unwrap();
                // row-ordered sum on both sides so equal matchings give identical floats
                let got = a.total_cost(&c);
                let want = if rows <= cols {
                    brute_force_min(&c)
                } else {
                    brute_force_min(&CostMatrix::from_fn(cols, rows, |i, j| c.get(j, i)))
                };
                let size_ok = a.matches.len() == rows.min(cols);
                if !(size_ok && (got == want || exact_as_row_sum(&c, &a) == want)) {
                    mismatches += 1;
                }
                total += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        mismatches == 0 && elapsed < Duration::from_secs(10),
        format!("{total} matrices 1x1..7x7, {mismatches} differ from brute force, {elapsed:.2?} (< 10 s)"),
    )
}

/// Total cost summed in the brute-force oracle's order (by the smaller side's index).
fn exact_as_row_sum(c: &CostMatrix, a: &panotrack::Assignment) -> f64 {
    let mut m = a.matches.clone();
    if c.rows() > c.cols() {
        m.sort_by_key(|p| p.1);
    }
    m.iter().map(|&(i, j)| c.get(i, j)).sum()
}

fn cost_kernel_values() -> Outcome {
    let e = |v: &[f64]| Embedding::new(v.to_vec()).unwrap();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let p = Location::new(2.0, 3.0);
    let checks = [
        (appearance_cost(&e(&[0.4, 0.1, 2.0]), &e(&[0.4, 0.1, 2.0])).unwrap(), 0.0),
        (appearance_cost(&e(&[1.0, 0.0]), &e(&[0.0, 1.0])).unwrap(), 1.0),
        (appearance_cost(&e(&[1.0, 0.0]), &e(&[r, r])).unwrap(), 1.0 - r),
        (trajectory_cost(&p, &p, 1.7), 0.0),
        (trajectory_cost(&p, &Location::new(2.0, 3.0 + 1.7), 1.7), 1.0 - (-1.0f64).exp()),
        (trajectory_cost(&p, &Location::new(2.0 + 170.0, 3.0), 1.7), 1.0),
    ];
    let worst = checks.iter().map(|(got, want)| (got - want).abs()).fold(0.0, f64::max);
    check(worst < 1e-12, format!("max deviation {worst:.3e} over 6 spot values (< 1e-12)"))
}

fn kalman_behaviour() -> Outcome {
    let f = ConstantVelocityFilter::new(KalmanParams::default());
    let mut s = f.initiate(Location::new(0.0, 0.0));
    let mut err_at_10 = f64::INFINITY;
    for k in 1..=10u32 {
        let (prior, loc) = f.predict(&s);
        err_at_10 = loc.distance(&Location::new(k as f64, 0.0));
        s = f.update(&prior, Location::new(k as f64, 0.0));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut min_eig = f64::INFINITY;
    for _ in 0..1_000 {
        let mut s = f.initiate(Location::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)));
        for _ in 0..rng.random_range(1..50) {
            let (prior, _) = f.predict(&s);
            s = if rng.random_bool(0.7) {
                f.update(&prior, Location::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)))
            } else {
                prior
            };
            min_eig = min_eig.min(s.covariance.symmetric_eigenvalues().min());
        }
    }
    check(
        err_at_10 < 1e-6 && min_eig > 0.0,
        format!(
            "prediction error at frame 10: {err_at_10:.3e} m (< 1e-6); min eigenvalue {min_eig:.3e} (> 0)"
        ),
    )
}

fn lifespan_semantics() -> Outcome {
    let emb = Embedding::new(vec![0.3, 0.9, 0.1]).unwrap();
    let det = |frame, x: f64| LocalizedDetection {
        frame,
        view_id: 0,
        u_ref: 640.0,
        pixel_height: 100.0,
        location: Location::new(x, 5.0),
        embedding: emb.clone(),
    };
    let mut results = Vec::new();
    for gap in [9u64, 10] {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        // walk at 0.05 m/frame, vanish for `gap` frames, reappear on the same line
        let mut frame = 0;
        for _ in 0..20 {
            t.step(frame, vec![det(frame, 0.05 * frame as f64)]).unwrap();
            frame += 1;
        }
        for _ in 0..gap {
            t.step(frame, vec![]).unwrap();
            frame += 1;
        }
        let out = t.step(frame, vec![det(frame, 0.05 * frame as f64)]).unwrap();
        results.push((gap, out.iter().map(|p| p.track_id).collect::<Vec<_>>()));
    }
    let survives_9 = results[0].1 == vec![1];
    let retired_10 = results[1].1 == vec![2];
    check(
        survives_9 && retired_10,
        format!("ids after 9-frame gap {:?}, after 10-frame gap {:?}", results[0].1, results[1].1),
    )
}

fn score(scene: &SyntheticScene, config: TrackerConfig, rig: &PanoramaRig) -> EvalReport {
    let frames = tracker::group_by_frame(scene.detection_stream()).unwrap();
    let out = tracker::run(config, rig, frames).unwrap();
    let pred: Vec<LabeledPoint> = out
        .tracklets
        .iter()
        .map(|p| LabeledPoint { frame: p.frame, id: p.track_id, location: p.location })
        .collect();
    evaluate(&scene.ground_truth, &pred, &EvalParams::default()).unwrap()
}

fn clean_scene() -> SceneConfig {
    SceneConfig { n_agents: 10, n_frames: 300, seed: 2024, ..SceneConfig::default() }
}

fn stress_scene() -> SceneConfig {
    SceneConfig {
        n_agents: 20,
        n_frames: 600,
        keypoint_noise_px: 2.0,
        embedding_noise_std: 0.05,
        detection_dropout_prob: 0.05,
        occlusions: (0..5)
            .map(|i| Occlusion { agent: i * 3, start: 100 * (i as u64 + 1), length: 5 })
            .collect(),
        seed: 2025,
        ..SceneConfig::default()
    }
}

fn closed_loop_clean() -> Outcome {
    let rig = quad_rig();
    let start = Instant::now();
    let scene = generate_scene(&clean_scene(), &rig).unwrap();
    let r = score(&scene, TrackerConfig::default(), &rig);
    let elapsed = start.elapsed();
    check(
        r.mota >= 0.99 && r.idsw == 0 && elapsed < Duration::from_secs(5),
        format!(
            "MOTA {:.4} (>= 0.99), IDSW {} (= 0), FP {}, FN {}, {elapsed:.2?} (< 5 s)",
            r.mota, r.idsw, r.fp, r.fn_
        ),
    )
}

fn closed_loop_stress() -> Outcome {
    let rig = quad_rig();
    let start = Instant::now();
    let scene = generate_scene(&stress_scene(), &rig).unwrap();
    let full = score(&scene, TrackerConfig::default(), &rig);
    let ablation = score(
        &scene,
        TrackerConfig { cost_mode: CostMode::TrajectoryOnly, ..TrackerConfig::default() },
        &rig,
    );
    let elapsed = start.elapsed();
    check(
        full.mota >= 0.90 && full.mota >= ablation.mota && elapsed < Duration::from_secs(30),
        format!(
            "MOTA {:.4} (>= 0.90; IDSW {}, FP {}, FN {}), trajectory-only MOTA {:.4} (<= full; IDSW {}), {elapsed:.2?} (< 30 s)",
            full.mota, full.idsw, full.fp, full.fn_, ablation.mota, ablation.idsw
        ),
    )
}

fn metrics_self_consistency() -> Outcome {
    let rig = quad_rig();
    let mut all_perfect = true;
    let mut scenes = 0;
    for cfg in [clean_scene(), stress_scene()] {
        let scene = generate_scene(&cfg, &rig).unwrap();
        let r = evaluate(&scene.ground_truth, &scene.ground_truth, &EvalParams::default()).unwrap();
        all_perfect &= r.mota == 1.0 && r.fp == 0 && r.fn_ == 0 && r.idsw == 0 && r.mt_fraction == 1.0;
        scenes += 1;
    }

    let p = LabeledPoint::new;
    let gt = [
        p(0, 1, 0.0, 3.0),
        p(0, 2, 5.0, 3.0),
        p(1, 1, 0.1, 3.0),
        p(1, 2, 5.1, 3.0),
        p(2, 1, 0.2, 3.0),
        p(2, 2, 5.2, 3.0),
    ];
    let pred =
        [p(0, 10, 0.0, 3.0), p(0, 20, 5.0, 3.0), p(1, 10, 0.1, 3.0), p(2, 10, 0.2, 3.0), p(2, 30, 5.2, 3.0)];
    let r = evaluate(&gt, &pred, &EvalParams::default()).unwrap();
    let hand = r.fn_ == 1 && r.idsw == 1 && r.fp == 0 && r.mota == 1.0 - 2.0 / 6.0;
    check(
        all_perfect && hand,
        format!("self-evaluation perfect on {scenes} scenes: {all_perfect}; hand-built IDSW scenario MOTA {:.6} (FN {}, IDSW {})", r.mota, r.fn_, r.idsw),
    )
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_panotrack")).args(args).output().expect("spawn panotrack");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn pipeline_once(dir: &Path, rig: &Path, config: &Path) -> Vec<(String, Vec<u8>)> {
    let s = |p: &Path| p.to_str().unwrap().to_owned();
    let (code, _) =
        run_cli(&["synth", "--config", &s(config), "--rig", &s(rig), "--out-dir", &s(dir), "--seed", "77"]);
    assert_eq!(code, 0, "synth failed");
    let det = dir.join("detections.jsonl");
    let gt = dir.join("ground_truth.jsonl");
    let tracks = dir.join("tracklets.jsonl");
    let (code, _) = run_cli(&["track", "--rig", &s(rig), "--detections", &s(&det), "--out", &s(&tracks)]);
    assert_eq!(code, 0, "track failed");
    let (code, report) = run_cli(&["eval", "--gt", &s(&gt), "--pred", &s(&tracks), "--format", "json"]);
    assert_eq!(code, 0, "eval failed");
    let read = |p: &Path| std::fs::read(p).unwrap();
    vec![
        ("detections".into(), read(&det)),
        ("ground_truth".into(), read(&gt)),
        ("tracklets".into(), read(&tracks)),
        ("report".into(), report),
    ]
}

fn pipeline_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let rig = tmp.path().join("rig.json");
    std::fs::write(&rig, serde_json::to_string(&quad_rig()).unwrap()).unwrap();
    let config = tmp.path().join("scene.json");
    let scene = SceneConfig {
        n_agents: 5,
        n_frames: 60,
        embedding_dim: 64,
        keypoint_noise_px: 1.0,
        embedding_noise_std: 0.05,
        detection_dropout_prob: 0.05,
        ..SceneConfig::default()
    };
    std::fs::write(&config, serde_json::to_string(&scene).unwrap()).unwrap();

    let a = pipeline_once(&tmp.path().join("a"), &rig, &config);
    let b = pipeline_once(&tmp.path().join("b"), &rig, &config);
    let differing: Vec<&str> =
        a.iter().zip(&b).filter(|(x, y)| x.1 != y.1 || x.1.is_empty()).map(|(x, _)| x.0.as_str()).collect();
    check(
        differing.is_empty(),
        format!("synth -> track -> eval run twice; stages differing or empty: {differing:?}"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("geometry round-trip", geometry_round_trip),
        ("height-prior scaling law", height_scaling_law),
        ("assignment optimality", assignment_optimality),
        ("cost-kernel values", cost_kernel_values),
        ("kalman convergence", kalman_behaviour),
        ("lifespan semantics", lifespan_semantics),
        ("closed-loop clean regime", closed_loop_clean),
        ("closed-loop stress regime", closed_loop_stress),
        ("metrics self-consistency", metrics_self_consistency),
        ("pipeline determinism", pipeline_determinism),
    ];
    let mut failed = 0;
    for (name, criterion) in criteria {
        let outcome = criterion();
        let tag = if outcome.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {name}: {}", outcome.detail);
        failed += usize::from(!outcome.passed);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
