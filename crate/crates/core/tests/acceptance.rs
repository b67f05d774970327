mod common;

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use common::*;
use jointfusion::depth::{pixel_density, render, render_capsules, DepthImage, PixelModelParams};
use jointfusion::encoder_filter::{asymptotic_bias_std, filter_step, BeliefVector, FilterParams};
use jointfusion::eval::{after, run_method, ErrorSample, EvalConfig, MethodId, Percentiles};
use jointfusion::fusion::{frame_seed, track_sequence, Tracker, TrackerConfig};
use jointfusion::image_update::{cpf_update, image_update_full};
use jointfusion::kinematics::{JointVector, KinematicModel};
use jointfusion::simulator::{default_model, generate, BiasMode, Dataset, ScenarioConfig, Trajectory};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn arm() -> KinematicModel {
    default_model().inject_virtual_joints().unwrap()
}

fn scenario(text: &str, seed: u64) -> ScenarioConfig {
    let mut sc: ScenarioConfig = serde_json::from_str(text).unwrap();
    sc.seed = seed;
    sc
}

fn eval_config(particles: usize, seed: u64) -> EvalConfig {
    let mut c = EvalConfig::default();
    c.cpf.particle_count = particles;
    c.cpf.seed = seed;
    c
}

fn trans(samples: &[ErrorSample]) -> Vec<f64> {
    samples.iter().map(|s| s.trans_m).collect()
}

fn median(v: &[f64]) -> f64 {
    Percentiles::of(v).unwrap().p50
}

fn p99(v: &[f64]) -> f64 {
    Percentiles::of(v).unwrap().p99
}

fn mm(x: f64) -> String {
    format!("{:.2} mm", x * 1e3)
}

fn restamped(prev: &BeliefVector, q: &JointVector, params: &FilterParams) -> BeliefVector {
    let mut b = filter_step(prev, &q.values, q.timestamp - prev.timestamp, params).unwrap();
    b.timestamp = q.timestamp;
    for j in &mut b.joints {
        j.timestamp = q.timestamp;
    }
    b
}

fn c1_factorized_filter() -> Outcome {
    let start = Instant::now();
    let model = arm();
    let n = model.joint_count();
    let m = model.encoder_joint_indices().len();
    let p = FilterParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let q0: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut beliefs = BeliefVector::initialize(&model, &q0, 0.0, &p).unwrap();
    let mut x = DVector::zeros(2 * n);
    let mut cov = DMatrix::zeros(2 * n, 2 * n);
    for (j, b) in beliefs.joints.iter().enumerate() {
        x[2 * j] = b.mean[0];
        x[2 * j + 1] = b.mean[1];
        cov[(2 * j, 2 * j)] = b.cov[(0, 0)];
        cov[(2 * j + 1, 2 * j + 1)] = b.cov[(1, 1)];
    }
    let mut h = DMatrix::zeros(m, 2 * n);
    for j in 0..m {
        h[(j, 2 * j)] = 1.0;
        h[(j, 2 * j + 1)] = 1.0;
    }
    let r = DMatrix::identity(m, m) * p.sigma_q * p.sigma_q;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let dt = rng.gen_range(5e-4..3e-3);
        let q: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        beliefs = filter_step(&beliefs, &q, dt, &p).unwrap();
        let mut f = DMatrix::zeros(2 * n, 2 * n);
        let mut qn = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..n {
            f[(2 * j, 2 * j)] = 1.0;
            if j < m {
                f[(2 * j + 1, 2 * j + 1)] = p.c.powf(dt);
                qn[(2 * j, 2 * j)] = dt * p.sigma_a * p.sigma_a;
                qn[(2 * j + 1, 2 * j + 1)] = dt * p.sigma_b * p.sigma_b;
            } else {
                qn[(2 * j, 2 * j)] = dt * p.virtual_sigma_a * p.virtual_sigma_a;
            }
        }
        x = &f * &x;
        cov = &f * &cov * f.transpose() + qn;
        let s = &h * &cov * h.transpose() + &r;
        let k = &cov * h.transpose() * s.try_inverse().unwrap();
        x = &x + &k * (DVector::from_vec(q) - &h * &x);
        cov = (DMatrix::identity(2 * n, 2 * n) - &k * &h) * &cov;
        for (j, b) in beliefs.joints.iter().enumerate() {
            for a in 0..2 {
                worst = worst.max((b.mean[a] - x[2 * j + a]).abs());
                for c in 0..2 {
                    worst = worst.max((b.cov[(a, c)] - cov[(2 * j + a, 2 * j + c)]).abs());
                }
            }
        }
        for i in 0..2 * n {
            for k2 in 0..2 * n {
                if i / 2 != k2 / 2 {
                    worst = worst.max(cov[(i, k2)].abs());
                }
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        worst < 1e-10 && elapsed < Duration::from_secs(1),
        format!("n={n}, 200 steps, max deviation {worst:.2e}, {elapsed:.2?}"),
    )
}

fn c2_bias_asymptotics() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for (k, (c, sigma_b, dt)) in [(0.5, 0.1, 0.1), (0.9, 0.05, 0.5), (0.97, 0.2, 1.0)].into_iter().enumerate() {
        let params = FilterParams {
            c,
            sigma_b,
            ..FilterParams::default()
        };
        let expected = asymptotic_bias_std(&params, dt).unwrap();
        let decay = c.powf(dt);
        let noise = Normal::new(0.0, (dt * sigma_b * sigma_b).sqrt()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        let mut b = Normal::new(0.0, expected).unwrap().sample(&mut rng);
        let (mut s1, mut s2) = (0.0, 0.0);
        let steps = 1_000_000;
        for _ in 0..steps {
            b = decay * b + noise.sample(&mut rng);
            s1 += b;
            s2 += b * b;
        }
        let mean = s1 / steps as f64;
        let std = (s2 / steps as f64 - mean * mean).sqrt();
        let rel = (std / expected - 1.0).abs();
        ok &= rel < 0.03;
        lines.push(format!("(c={c}, sb={sigma_b}, dt={dt}) rel err {:.2}%", rel * 100.0));
    }
    let elapsed = start.elapsed();
    check(
        ok && elapsed < Duration::from_secs(10),
        format!("{}, {elapsed:.2?}", lines.join("; ")),
    )
}

fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = 0.5 * (f(a) + f(b));
    for k in 1..n {
        s += f(a + h * k as f64);
    }
    s * h
}

fn c3_pixel_normalization() -> Outcome {
    let params = |p_occluded, w_tail, sigma_z| PixelModelParams {
        sigma_z,
        p_occluded,
        w_tail,
        z_min: 0.3,
        z_max: 5.0,
    };
    let mut worst: f64 = 0.0;
    for p_occ in [0.05, 0.3, 0.6] {
        for sigma in [0.005, 0.02, 0.08] {
            for w in [0.0, 0.05, 0.3] {
                let p = params(p_occ, w, sigma);
                let mass = trapezoid(|z| pixel_density(z, 1.2, &p).unwrap(), 0.3, 5.0, 100_000);
                worst = worst.max((mass - 1.0).abs());
            }
        }
    }
    let n = 100_000;
    let h = 4.7 / n as f64;
    let d = 1.7;
    let mut shape_ok = true;
    let mut previous = f64::INFINITY;
    for p_occ in [0.0, 0.1, 0.25, 0.4, 0.5] {
        let p = params(p_occ, 0.05, 0.02);
        let (mut best_z, mut best) = (0.3, f64::NEG_INFINITY);
        for k in 0..=n {
            let z = 0.3 + h * k as f64;
            let v = pixel_density(z, d, &p).unwrap();
            if v > best {
                best = v;
                best_z = z;
            }
        }
        shape_ok &= (best_z - d).abs() <= h && best < previous;
        previous = best;
    }
    check(
        worst < 1e-3 && shape_ok,
        format!("27 parameter sets, max |mass - 1| {worst:.2e}, peak at d and decreasing in p_occ: {shape_ok}"),
    )
}

fn c4_cpf_oracle() -> Outcome {
    let start = Instant::now();
    let l = 10_000;
    let mut ok = true;
    let mut lines = Vec::new();

    let model = chain(1);
    let image = observe(&model, &[0.2], 0.0);
    let grid = Grid::new(&model, &image, &[0.21], &[0.015], 10_000, 6.0);
    let set = cpf_update(&gaussian_beliefs(&[0.21], &[0.015], 0.0), &image, &model, &pixel(), &cfg(l, 21)).unwrap();
    let sd = grid.std(0);
    let z = (weighted_mean(&set, 0) - grid.mean(0)).abs() / (sd / (l as f64).sqrt());
    let tv = total_variation(&set, &grid, &[grid.mean(0)], &[sd / 4.0], 20);
    ok &= z < 2.0 && tv <= 0.05;
    lines.push(format!("1-D: mean err {z:.2} sd/sqrt(L), TV {tv:.3}"));

    let model = chain(2);
    let image = observe(&model, &[0.2, -0.3], 0.0);
    let (means, stds) = ([0.207, -0.315], [0.013, 0.029]);
    let grid = Grid::new(&model, &image, &means, &stds, 300, 6.0);
    let set = cpf_update(&gaussian_beliefs(&means, &stds, 0.0), &image, &model, &pixel(), &cfg(l, 5)).unwrap();
    let mut zs = Vec::new();
    for d in 0..2 {
        let z = (weighted_mean(&set, d) - grid.mean(d)).abs() / (grid.std(d) / (l as f64).sqrt());
        ok &= z < 2.0;
        zs.push(format!("{z:.2}"));
    }
    let centre = [grid.mean(0), grid.mean(1)];
    let width = [grid.std(0) / 2.0, grid.std(1) / 2.0];
    let tv = total_variation(&set, &grid, &centre, &width, 8);
    ok &= tv <= 0.05;
    lines.push(format!("2-D: mean err [{}] sd/sqrt(L), TV {tv:.3}", zs.join(", ")));
    let elapsed = start.elapsed();
    check(
        ok && elapsed < Duration::from_secs(60),
        format!("L={l}; {}; {elapsed:.2?}", lines.join("; ")),
    )
}

/// Beliefs after every encoder reading when each image is applied right
/// after the newest reading not later than it.
fn in_order_oracle(ds: &Dataset, model: &KinematicModel, cfg: &TrackerConfig) -> Vec<BeliefVector> {
    let mut out: Vec<BeliefVector> = Vec::with_capacity(ds.encoders.len());
    let mut next_image = 0;
    for (i, q) in ds.encoders.iter().enumerate() {
        let mut b = match out.last() {
            None => BeliefVector::initialize(model, &q.values, q.timestamp, &cfg.filter).unwrap(),
            Some(prev) => restamped(prev, q, &cfg.filter),
        };
        let until = ds.encoders.get(i + 1).map_or(f64::INFINITY, |e| e.timestamp);
        while next_image < ds.frames.len() && ds.frames[next_image].timestamp < until {
            let mut img: DepthImage = ds.frames[next_image].clone();
            img.timestamp = q.timestamp;
            let mut cpf = cfg.cpf;
            cpf.seed = frame_seed(cfg.cpf.seed, img.frame_id);
            b = image_update_full(&b, &img, model, &cfg.pixel, &cpf).unwrap();
            next_image += 1;
        }
        out.push(b);
    }
    out
}

/// Feeds a dataset in arrival order and returns the whole belief history.
fn replayed(ds: &Dataset, model: &KinematicModel, cfg: &TrackerConfig) -> Vec<BeliefVector> {
    let mut tr = Tracker::new(model.clone(), *cfg).unwrap();
    let mut events: Vec<(f64, u8, usize)> = ds.encoders.iter().enumerate().map(|(i, e)| (e.timestamp, 0, i)).collect();
    events.extend(ds.images.iter().enumerate().map(|(i, r)| (r.timestamp + r.delay, 1, i)));
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut pending = VecDeque::new();
    for (_, kind, i) in events {
        if kind == 0 {
            tr.push_encoder(ds.encoders[i].clone()).unwrap();
        } else {
            pending.push_back(i);
        }
        let head = tr.buffer().head().unwrap().timestamp;
        while let Some(&i) = pending.front() {
            if ds.frames[i].timestamp > head {
                break;
            }
            pending.pop_front();
            tr.push_image(&ds.frames[i]).unwrap();
        }
    }
    tr.buffer().iter().map(|e| e.beliefs.clone()).collect()
}

fn c5_replay_equivalence() -> Outcome {
    let start = Instant::now();
    let model = arm();
    let mut sc = ScenarioConfig::new(10.0, Trajectory::default_sinusoidal(1.0));
    sc.image_period = 0.1;
    sc.encoder_noise_std = 1e-3;
    sc.bias = BiasMode::Constant { value: 0.05 };
    sc.seed = 5;
    let ds = generate(&model, &sc).unwrap();
    let mut cfg = TrackerConfig {
        buffer_capacity: ds.encoders.len() + 1,
        ..TrackerConfig::default()
    };
    cfg.cpf.particle_count = 100;
    cfg.cpf.seed = 77;

    let mut kf_only = ds.clone();
    kf_only.images.clear();
    kf_only.frames.clear();
    let kf_oracle = in_order_oracle(&kf_only, &model, &cfg);
    let kf = replayed(&kf_only, &model, &cfg);
    let mut kf_dev: f64 = 0.0;
    for (a, b) in kf.iter().zip(&kf_oracle) {
        for (x, y) in a.joints.iter().zip(&b.joints) {
            kf_dev = kf_dev.max((x.mean - y.mean).abs().max()).max((x.cov - y.cov).abs().max());
        }
    }
    let mut ok = kf.len() == kf_oracle.len() && kf_dev < 1e-12;

    let oracle = in_order_oracle(&ds, &model, &cfg);
    let mut lines = vec![format!("KF path max dev {kf_dev:.1e}")];
    for delay in [0.0, 0.033, 0.1] {
        let delayed = ds.with_image_delay(delay);
        let hist = replayed(&delayed, &model, &cfg);
        let exact = hist.len() == oracle.len() && hist.iter().zip(&oracle).all(|(a, b)| a == b);
        let last = track_sequence(&delayed, &model, &TrackerConfig { buffer_capacity: 2000, ..cfg })
            .unwrap()
            .pop()
            .unwrap();
        let final_exact = last.angle_means == oracle.last().unwrap().angle_means();
        ok &= exact && final_exact;
        lines.push(format!("delay {:.0} ms bit-exact: {}", delay * 1e3, exact && final_exact));
    }
    check(
        ok,
        format!(
            "{} readings, {} images; {}; {:.2?}",
            ds.encoders.len(),
            ds.images.len(),
            lines.join(", "),
            start.elapsed()
        ),
    )
}

fn c6_constant_bias() -> Outcome {
    let start = Instant::now();
    let model = arm();
    let text = include_str!("../../../configs/s_const_bias.json");
    let (mut enc, mut cam, mut full) = (Vec::new(), Vec::new(), Vec::new());
    let mut ordered = true;
    for r in 0..10 {
        let ds = generate(&model, &scenario(text, 100 + r)).unwrap();
        let ec = eval_config(100, r);
        let run = |m| trans(&after(&run_method(m, &ds, &model, &ec, r as usize).unwrap().errors, ec.convergence_window));
        let (e, c, f) = (run(MethodId::EncodersOnly), run(MethodId::CameraOffsetOnly), run(MethodId::FullFusion));
        ordered &= median(&f) <= median(&c) && median(&c) <= median(&e);
        enc.extend(e);
        cam.extend(c);
        full.extend(f);
    }
    let (me, mc, mf) = (median(&enc), median(&cam), median(&full));
    let elapsed = start.elapsed();
    check(
        mf <= 0.2 * me && ordered && mf <= 0.01 && elapsed < Duration::from_secs(300),
        format!(
            "10 runs, medians after 10 s: full {} <= cam-only {} <= enc-only {} in every run: {ordered}; full/enc {:.3}; {elapsed:.2?}",
            mm(mf),
            mm(mc),
            mm(me),
            mf / me
        ),
    )
}

fn c7_time_varying_bias() -> Outcome {
    let start = Instant::now();
    let model = arm();
    let text = include_str!("../../../configs/s_smooth_steps.json");
    let (mut slowest, mut late_ratio): (f64, f64) = (0.0, 0.0);
    let mut checks = 0;
    for r in 0..10 {
        let sc = scenario(text, 200 + r);
        let BiasMode::SmoothSteps { step_period, .. } = sc.bias else {
            return Err("scenario has no smooth-step bias".into());
        };
        let ds = generate(&model, &sc).unwrap();
        let ec = eval_config(100, r);
        let errs = run_method(MethodId::FullFusion, &ds, &model, &ec, r as usize).unwrap().errors;
        let window = |a: f64, b: f64, closed: bool| -> Vec<f64> {
            errs.iter()
                .filter(|e| e.timestamp >= a && (e.timestamp < b || (closed && e.timestamp <= b)))
                .map(|e| e.trans_m)
                .collect()
        };
        let mut s = step_period;
        while s + 5.0 <= sc.duration {
            let pre = median(&window(s - 2.0, s, false));
            let back = (0..=16)
                .map(|k| s + 0.25 * k as f64)
                .find(|&t| median(&window(t, t + 1.0, true)) <= 2.0 * pre)
                .map_or(f64::INFINITY, |t| t + 1.0 - s);
            slowest = slowest.max(back);
            late_ratio = late_ratio.max(median(&window(s + 4.0, s + 5.0, true)) / pre);
            checks += 1;
            s += step_period;
        }
    }
    check(
        slowest <= 5.0 && checks > 0,
        format!(
            "10 runs, {checks} steps; slowest return of the 1 s median error to within 2x the median over [step-2 s, step) = {slowest:.2} s after the step (limit 5 s); worst ratio over [step+4 s, step+5 s] {late_ratio:.2}; {:.2?}",
            start.elapsed()
        ),
    )
}

fn occluder_coverage(model: &KinematicModel, sc: &ScenarioConfig) -> (f64, f64) {
    let intr = *model.intrinsics();
    let (mut lo, mut sum, mut n) = (f64::INFINITY, 0.0, 0);
    for w in &sc.occluders {
        let occ = render_capsules(&intr, &[w.capsule.to_capsule()]);
        let mut t = w.start;
        while t < w.end.min(sc.duration) {
            let mut v = sc.true_angles(t);
            v.extend_from_slice(&sc.camera_offset);
            let arm = render(model, &v).unwrap();
            let px: Vec<usize> = (0..arm.depth.len()).filter(|&i| arm.depth[i].is_finite()).collect();
            let hidden = px.iter().filter(|&&i| occ.depth[i] < arm.depth[i]).count();
            let frac = hidden as f64 / px.len() as f64;
            lo = lo.min(frac);
            sum += frac;
            n += 1;
            t += sc.image_period;
        }
    }
    (lo, sum / n as f64)
}

fn c8_occlusion() -> Outcome {
    let start = Instant::now();
    let model = arm();
    let text = include_str!("../../../configs/s_occlusion.json");
    let (lo, mean) = occluder_coverage(&model, &scenario(text, 0));
    let span: f64 = scenario(text, 0).occluders.iter().map(|w| w.end - w.start).sum();
    let (mut enc, mut full, mut vis) = (Vec::new(), Vec::new(), Vec::new());
    for r in 0..3 {
        let ds = generate(&model, &scenario(text, 300 + r)).unwrap();
        let ec = eval_config(100, r);
        let run = |m| trans(&run_method(m, &ds, &model, &ec, r as usize).unwrap().errors);
        enc.extend(run(MethodId::EncodersOnly));
        full.extend(run(MethodId::FullFusion));
        vis.extend(run(MethodId::VisionOnly));
    }
    let (pe, pf, pv) = (p99(&enc), p99(&full), p99(&vis));
    check(
        lo >= 0.5 && span >= 10.0 && pf <= pe && pv > pe,
        format!(
            "occluder {span:.0} s, silhouette covered min {:.0}% mean {:.0}%; 3 runs, p99: full {} {} enc-only {} {} vision-only {}; {:.2?}",
            lo * 100.0,
            mean * 100.0,
            mm(pf),
            if pf <= pe { "<=" } else { ">" },
            mm(pe),
            if pv > pe { "<" } else { ">=" },
            mm(pv),
            start.elapsed()
        ),
    )
}

fn c9_camera_offset() -> Outcome {
    let start = Instant::now();
    let model = arm();
    let text = include_str!("../../../configs/s_camera_offset.json");
    let sc0 = scenario(text, 0);
    let (mut enc, mut cam) = (Vec::new(), Vec::new());
    for r in 0..5 {
        let ds = generate(&model, &scenario(text, 400 + r)).unwrap();
        let ec = eval_config(100, r);
        let run = |m| trans(&after(&run_method(m, &ds, &model, &ec, r as usize).unwrap().errors, ec.convergence_window));
        enc.extend(run(MethodId::EncodersOnly));
        cam.extend(run(MethodId::CameraOffsetOnly));
    }
    let (me, mc) = (median(&enc), median(&cam));
    let t = &sc0.camera_offset;
    check(
        mc <= 0.25 * me && sc0.bias == BiasMode::None,
        format!(
            "offset {:.0} mm / {:.1} deg, 5 runs, medians after 10 s: cam-only {} vs enc-only {} (ratio {:.3}); {:.2?}",
            (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt() * 1e3,
            (t[3] * t[3] + t[4] * t[4] + t[5] * t[5]).sqrt().to_degrees(),
            mm(mc),
            mm(me),
            mc / me,
            start.elapsed()
        ),
    )
}

fn c10_real_time() -> Outcome {
    let model = arm();
    let cfg = TrackerConfig::default();
    let mut tr = Tracker::new(model.clone(), cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let m = model.encoder_joint_indices().len();
    let readings: Vec<Vec<f64>> = (0..1024).map(|_| (0..m).map(|_| rng.gen_range(-0.5..0.5)).collect()).collect();
    let calls = 1_000_000;
    let start = Instant::now();
    for k in 0..calls {
        let q = JointVector::new(readings[k % readings.len()].clone(), k as f64 * 1e-3);
        std::hint::black_box(tr.push_encoder(q).unwrap());
    }
    let per_call = start.elapsed() / calls as u32;

    let mut sc = ScenarioConfig::new(0.5, Trajectory::default_sinusoidal(1.0));
    sc.image_period = 0.5;
    let ds = generate(&model, &sc).unwrap();
    let beliefs = BeliefVector::initialize(&model, &ds.encoders[0].values, 0.0, &cfg.filter).unwrap();
    let mut cpf = cfg.cpf;
    cpf.particle_count = 200;
    let image = &ds.frames[0];
    let start = Instant::now();
    std::hint::black_box(image_update_full(&beliefs, image, &model, &cfg.pixel, &cpf).unwrap());
    let image_time = start.elapsed();
    check(
        per_call < Duration::from_micros(100) && image_time < Duration::from_millis(200),
        format!(
            "n={}, push_encoder mean {per_call:.2?} over 1e6 calls; image update {}x{} L=200 {image_time:.2?}",
            model.joint_count(),
            image.width,
            image.height
        ),
    )
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("factorized KF exactness", c1_factorized_filter),
        ("bias asymptotics", c2_bias_asymptotics),
        ("pixel-model normalization", c3_pixel_normalization),
        ("CPF vs grid oracle", c4_cpf_oracle),
        ("delay-buffer replay equivalence", c5_replay_equivalence),
        ("constant-bias recovery", c6_constant_bias),
        ("time-varying bias", c7_time_varying_bias),
        ("occlusion robustness", c8_occlusion),
        ("camera-offset recovery", c9_camera_offset),
        ("real-time budget", c10_real_time),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !selected.is_empty() && !selected.contains(&(i + 1)) {
            continue;
        }
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} {name}: {detail}", i + 1);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
