//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per criterion and
//! exits nonzero if any failed. Pass criterion numbers as arguments to run a subset.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use nmdf::euclid::semi_nmf;
use nmdf::eval::{self, exact_error, thm34_scan};
use nmdf::io::{extract_blocks, parse_tfld, write_tfld};
use nmdf::linalg::{congruence, matfun_spd, MatFun, SymMatrix};
use nmdf::manifold::{self, curvature_frame, Chart, Element, ManifoldDescriptor, Point};
use nmdf::nmdf::{build_workspace, cc_iterate, cc_nmdf, cc_objective, init_cc, update_factors};
use nmdf::nmdf::{verify_basepoint, Method, Params, SolverOptions};
use nmdf::synth;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn spd3_power(m: usize) -> ManifoldDescriptor {
    ManifoldDescriptor::power(ManifoldDescriptor::spd(3), m)
}

fn sym_parts(p: &[Element]) -> Vec<&SymMatrix> {
    p.iter()
        .map(|e| match e {
            Element::Sym(s) => s,
            _ => panic!("expected SPD components"),
        })
        .collect()
}

fn frob(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Componentwise congruence `x -> g x g^T`.
fn act(g: &[Array2<f64>], p: &Point) -> Point {
    let parts: Vec<Point> =
        sym_parts(p.parts()).into_iter().zip(g).map(|(s, g)| Point::spd(congruence(g, s)).unwrap()).collect();
    if parts.len() == 1 && !matches!(p.descriptor(), ManifoldDescriptor::Power { .. }) {
        parts.into_iter().next().unwrap()
    } else {
        Point::power(parts).unwrap()
    }
}

/// `R_q(theta, v) v` from the identity-space commutator `-1/4 [[T, V], V]`.
fn curvature_operator(q: &SymMatrix, theta: &SymMatrix, v: &SymMatrix) -> Array2<f64> {
    let s = matfun_spd(q, MatFun::Sqrt).unwrap().to_full();
    let is = matfun_spd(q, MatFun::InvSqrt).unwrap().to_full();
    let t = is.dot(&theta.to_full()).dot(&is);
    let w = is.dot(&v.to_full()).dot(&is);
    let c1 = t.dot(&w) - w.dot(&t);
    let c2 = c1.dot(&w) - w.dot(&c1);
    s.dot(&(c2 * -0.25)).dot(&s)
}

#[derive(Default)]
struct GeometryStats {
    roundtrip: f64,
    symmetry: f64,
    invariance: f64,
    orthonormality: f64,
    curvature: f64,
}

impl GeometryStats {
    fn merge(mut self, o: GeometryStats) -> GeometryStats {
        self.roundtrip = self.roundtrip.max(o.roundtrip);
        self.symmetry = self.symmetry.max(o.symmetry);
        self.invariance = self.invariance.max(o.invariance);
        self.orthonormality = self.orthonormality.max(o.orthonormality);
        self.curvature = self.curvature.max(o.curvature);
        self
    }
}

fn geometry_instance(desc: &ManifoldDescriptor, seed: u64) -> GeometryStats {
    let mut rng = synth::rng(seed);
    let q = synth::random_point(&mut rng, desc, 1e2);
    let x = synth::random_point(&mut rng, desc, 1e2);
    let y = synth::random_point(&mut rng, desc, 1e2);
    let mut st = GeometryStats::default();

    let back = manifold::exp(&q, &manifold::log(&q, &x).unwrap()).unwrap();
    for (b, a) in sym_parts(back.parts()).into_iter().zip(sym_parts(x.parts())) {
        st.roundtrip = st.roundtrip.max(frob(&(b.to_full() - a.to_full())) / a.frobenius_norm());
    }

    let dxy = manifold::dist(&x, &y).unwrap();
    st.symmetry = (dxy - manifold::dist(&y, &x).unwrap()).abs();

    let n = sym_parts(x.parts())[0].order();
    let g: Vec<Array2<f64>> = (0..x.parts().len())
        .map(|_| {
            let diag: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..3.0)).collect();
            synth::random_rotation(&mut rng, n).dot(&Array2::from_diag(&ndarray::arr1(&diag)))
        })
        .collect();
    let moved = manifold::dist(&act(&g, &x), &act(&g, &y)).unwrap();
    st.invariance = (moved - dxy).abs() / dxy.max(1.0);

    let chart = Chart::at(&q).unwrap();
    let v = synth::random_tangent(&mut rng, &chart, 1.5);
    let frame = curvature_frame(&q, &v).unwrap();
    for (a, ta) in frame.vectors.iter().enumerate() {
        for (b, tb) in frame.vectors.iter().enumerate().skip(a) {
            let g = chart.inner(ta, tb).unwrap();
            st.orthonormality = st.orthonormality.max((g - if a == b { 1.0 } else { 0.0 }).abs());
        }
    }
    let qs = sym_parts(q.parts());
    let vs = sym_parts(v.parts());
    for (t, k) in frame.vectors.iter().zip(&frame.kappas) {
        for (c, th) in sym_parts(t.parts()).into_iter().enumerate() {
            let scale = th.max_abs();
            if scale == 0.0 {
                continue;
            }
            let r = curvature_operator(qs[c], th, vs[c]);
            let diff = (r - th.to_full() * *k).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            st.curvature = st.curvature.max(diff / scale.max(1.0));
        }
    }
    st
}

/// Geometry kernel over 1000 instances each of SPD(2), SPD(3) and P(3)^4.
fn criterion_1() -> Outcome {
    let descs = [ManifoldDescriptor::spd(2), ManifoldDescriptor::spd(3), spd3_power(4)];
    let st = descs
        .iter()
        .enumerate()
        .flat_map(|(j, d)| (0..1000u64).map(move |s| (d, 10_000 * j as u64 + s)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(d, s)| geometry_instance(d, s))
        .reduce(GeometryStats::default, GeometryStats::merge);
    let pass = st.roundtrip <= 1e-9
        && st.symmetry <= 1e-10
        && st.invariance <= 1e-9
        && st.orthonormality <= 1e-9
        && st.curvature <= 1e-8;
    outcome(
        pass,
        format!(
            "3000 instances; max roundtrip {:.1e}, symmetry {:.1e}, invariance {:.1e}, orthonormality {:.1e}, curvature {:.1e}",
            st.roundtrip, st.symmetry, st.invariance, st.orthonormality, st.curvature
        ),
    )
}

/// CC iteration on Euclidean(10), N=50, K=4 against semi-NMF from the same start.
fn criterion_2() -> Outcome {
    let (n, d, k, iters) = (50, 10, 4, 50);
    let mut rng = synth::rng(2);
    let raw = Array2::from_shape_fn((n, d), |_| synth::standard_normal(&mut rng));
    let data: Vec<Point> = raw.rows().into_iter().map(|r| Point::euclidean(r.to_vec()).unwrap()).collect();
    let q = Point::euclidean(vec![0.0; d]).unwrap();
    let (h0, _) = init_cc(&data, &q, k, 0.1, 0).unwrap();
    let w = build_workspace(&data, &q).unwrap();
    let params = Params { max_iter: iters, max_sub_iter: 1, ..Params::default() };
    let (_, _, trace) = cc_iterate(&w, h0.clone(), &params, &SolverOptions::default()).unwrap();
    let reference = semi_nmf(raw.view(), k, iters, Some(h0), 0).unwrap().objective_trace;
    let worst = trace.iter().zip(&reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let pass = trace.len() == iters && reference.len() == iters && worst <= 1e-8;
    outcome(pass, format!("{iters} recorded iterations, max |cc - semi-nmf| = {worst:.1e}"))
}

/// Third-order agreement: scan on P(3)^4, N=30, radius 1, over 200 trials.
fn criterion_3() -> Outcome {
    let scales = [1.0, 0.5, 0.25, 0.125, 0.0625];
    let results: Vec<(bool, f64)> = (0..200u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = synth::rng(3000 + t);
            let q = synth::random_point(&mut rng, &spd3_power(4), 5.0);
            let data = synth::points_near(&mut rng, &q, 30, 1.0).unwrap();
            let fac = cc_nmdf(&data, &q, 3, &Params { seed: t, ..Params::default() }).unwrap();
            let scan = thm34_scan(&data, &fac, &scales).unwrap();
            let slope = scan.cc_slope.unwrap_or(f64::NAN);
            let ordered = scan.rows.iter().all(|r| r.cc_gap <= r.tangent_gap);
            (slope >= 2.7 && ordered, slope)
        })
        .collect();
    let ok = results.iter().filter(|r| r.0).count();
    let min_slope = results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    outcome(ok * 10 >= 200 * 9, format!("{ok}/200 trials pass (need 180); smallest cc slope {min_slope:.2}"))
}

/// Finite-difference stationarity after the factor solve, 100 instances with K d <= 200.
fn criterion_4() -> Outcome {
    let results: Vec<(f64, usize)> = (0..100u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = synth::rng(4000 + t);
            let desc = match t % 4 {
                0 => ManifoldDescriptor::spd(2),
                1 => ManifoldDescriptor::spd(3),
                2 => spd3_power(4),
                _ => spd3_power(8),
            };
            let d = desc.dim();
            let k = rng.random_range(1..=(200 / d).min(5));
            let n = rng.random_range(k + 2..k + 20);
            let q = synth::random_point(&mut rng, &desc, 5.0);
            let data = synth::points_near(&mut rng, &q, n, 2.0).unwrap();
            let w = build_workspace(&data, &q).unwrap();
            let h = Array2::from_shape_fn((n, k), |_| rng.random_range(0.05..1.0));
            let f = update_factors(&h, &w, None).unwrap();
            let obj = cc_objective(&h, &f, &w).unwrap();
            let step = 1e-5;
            let mut gmax = 0.0f64;
            for idx in 0..f.len() {
                let (r, c) = (idx / d, idx % d);
                let mut fp = f.clone();
                fp[[r, c]] += step;
                let mut fm = f.clone();
                fm[[r, c]] -= step;
                let g = (cc_objective(&h, &fp, &w).unwrap() - cc_objective(&h, &fm, &w).unwrap()) / (2.0 * step);
                gmax = gmax.max(g.abs());
            }
            (gmax / (1.0 + obj), k * d)
        })
        .collect();
    let worst = results.iter().map(|r| r.0).fold(0.0f64, f64::max);
    let largest = results.iter().map(|r| r.1).max().unwrap();
    outcome(worst <= 1e-6, format!("100 instances (K d up to {largest}); max |grad|/(1+obj) = {worst:.1e}"))
}

/// Descent of the CC objective over 100 seeded runs.
fn criterion_5() -> Outcome {
    let traces: Vec<Vec<f64>> = (0..100u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = synth::rng(5000 + t);
            let desc = if t % 2 == 0 { spd3_power(4) } else { ManifoldDescriptor::spd(3) };
            let q = synth::random_point(&mut rng, &desc, 5.0);
            let data = synth::planted_mixture(&mut rng, &q, 30, 3, 1.0, 0.1).unwrap();
            let params = Params { max_iter: 30, seed: t, ..Params::default() };
            cc_nmdf(&data, &q, 3, &params).unwrap().objective_trace
        })
        .collect();
    let mut final_ok = 0;
    let (mut steps, mut bad) = (0usize, 0usize);
    for (t, tr) in traces.iter().enumerate() {
        if tr.last() <= tr.first() {
            final_ok += 1;
        }
        for (j, w) in tr.windows(2).enumerate() {
            steps += 1;
            let rel = (w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE);
            if rel > 1e-6 {
                bad += 1;
                eprintln!("criterion 5: run {t} step {j} increased by {rel:.2e} relative");
            }
        }
    }
    let pass = final_ok == traces.len() && bad * 100 <= steps;
    outcome(pass, format!("final <= initial in {final_ok}/100 runs; {bad}/{steps} steps increased beyond 1e-6"))
}

/// DTI-like data on P(3)^16 spread around q so that log-map norms reach well past 1.
fn comparison_data() -> (Point, Vec<Point>) {
    let mut rng = synth::rng(6);
    let data = synth::dti_points(&mut rng, 100, 16, 6).unwrap();
    let q = manifold::barycenter(&data, 1e-10, 200).unwrap().point;
    (q, data)
}

/// CC-NMDF against T-NMDF in exact error on P(3)^16, N=100.
fn criterion_6() -> Outcome {
    let (q, data) = comparison_data();
    let chart = Chart::at(&q).unwrap();
    let spread = data
        .iter()
        .map(|x| {
            let v = chart.log(x).unwrap();
            chart.inner(&v, &v).unwrap().sqrt()
        })
        .fold(0.0f64, f64::max);
    let params = Params::default();
    let mut rows = Vec::new();
    for k in [2, 5, 8, 11] {
        let cc = exact_error(&data, &eval::fit(&data, &q, k, Method::CcNmdf, &params).unwrap()).unwrap();
        let t = exact_error(&data, &eval::fit(&data, &q, k, Method::TNmdf, &params).unwrap()).unwrap();
        rows.push((k, cc, t));
    }
    let within = rows.iter().all(|&(_, cc, t)| cc <= t * 1.02);
    let strict = rows.iter().filter(|&&(_, cc, t)| cc < t).count();
    let table: Vec<String> = rows.iter().map(|(k, cc, t)| format!("K={k}: cc {cc:.4} / t {t:.4}")).collect();
    outcome(
        spread >= 1.0 && within && strict >= 3,
        format!("max log norm {spread:.2}; {}; strictly better at {strict}/4", table.join(", ")),
    )
}

/// Near-zero versus barycenter base point over 50 trials. Eight fiber prototypes against
/// K = 3, so the rank is below the complexity of the data.
fn criterion_7() -> Outcome {
    let results: Vec<(bool, bool, bool)> = (0..50u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = synth::rng(7000 + t);
            let data = synth::dti_points(&mut rng, 40, 4, 8).unwrap();
            let near = Point::scaled_identity(data[0].descriptor(), 1e-5).unwrap();
            let check = verify_basepoint(&data, &near).unwrap();
            let params = Params { max_iter: 30, seed: t, ..Params::default() };
            let fac = cc_nmdf(&data, &near, 3, &params).unwrap();
            let gram = fac.f.dot(&fac.f.t());
            let max_sq = gram.diag().iter().copied().fold(0.0f64, f64::max);
            let nonneg = gram.iter().all(|&g| g >= -1e-9 * max_sq);
            let bary = manifold::barycenter(&data, 1e-10, 200).unwrap().point;
            let fac_b = cc_nmdf(&data, &bary, 3, &params).unwrap();
            let better = exact_error(&data, &fac_b).unwrap() <= exact_error(&data, &fac).unwrap();
            (check.ok, nonneg, better)
        })
        .collect();
    let ok = results.iter().filter(|r| r.0).count();
    let nonneg = results.iter().filter(|r| r.1).count();
    let better = results.iter().filter(|r| r.2).count();
    outcome(
        ok == 50 && nonneg * 10 >= 50 * 9 && better * 10 >= 50 * 8,
        format!("near-zero ok in {ok}/50; nonnegative factor Gram in {nonneg}/50 (need 45); barycenter error <= near-zero in {better}/50 (need 40)"),
    )
}

fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// Paper-scale run: N=117 on P(3)^64, K=20, 50 outer iterations, 5 sub-iterations.
fn criterion_8() -> Outcome {
    let field = synth::dti_field(&mut synth::rng(8), [52, 36, 4]).unwrap();
    let ds = extract_blocks(&field, [4, 4, 4]).unwrap();
    let q = Point::scaled_identity(&ds.descriptor, 1e-5).unwrap();
    let start = Instant::now();
    let fac = cc_nmdf(&ds.points, &q, 20, &Params::default());
    let elapsed = start.elapsed();
    let peak = peak_rss_bytes();
    let peak_gb = peak.map_or(f64::NAN, |b| b as f64 / (1u64 << 30) as f64);
    let ran = match &fac {
        Ok(f) => f.objective_trace.len() == 50,
        Err(e) => {
            eprintln!("criterion 8: {e}");
            false
        }
    };
    outcome(
        ds.points.len() == 117 && ran && elapsed < Duration::from_secs(600) && peak_gb < 4.0,
        format!(
            "N={} d={} K=20: {:.1} s, peak resident memory of the whole suite {:.2} GB",
            ds.points.len(),
            ds.descriptor.dim(),
            elapsed.as_secs_f64(),
            peak_gb
        ),
    )
}

fn pipeline_bytes(dir: &Path) -> Vec<Vec<u8>> {
    let bundled = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic_8x8x8.tfld");
    let p = |n: &str| dir.join(n).to_str().unwrap().to_string();
    let b = bundled.to_str().unwrap().to_string();
    let steps: Vec<Vec<String>> = vec![
        vec!["ingest".into(), b, "--out".into(), p("ds.json")],
        vec![
            "factorize".into(),
            p("ds.json"),
            "--rank".into(),
            "3".into(),
            "--max-iter".into(),
            "10".into(),
            "--out".into(),
            p("fac.json"),
        ],
        vec!["errors".into(), p("ds.json"), p("fac.json"), "--out".into(), p("report.csv")],
        vec!["render".into(), p("fac.json"), "--out".into(), p("factors.svg")],
        vec![
            "sweep".into(),
            p("ds.json"),
            "--ranks".into(),
            "1,2,3".into(),
            "--max-iter".into(),
            "5".into(),
            "--out".into(),
            p("sweep.csv"),
        ],
    ];
    for args in steps {
        let out = Command::new(env!("CARGO_BIN_EXE_nmdf")).args(&args).output().unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    ["ds.json", "fac.json", "report.csv", "factors.svg", "sweep.csv"]
        .iter()
        .map(|n| std::fs::read(dir.join(n)).unwrap())
        .collect()
}

/// TFLD round trip and byte-identical repeated pipeline runs.
fn criterion_9() -> Outcome {
    let field = synth::dti_field(&mut synth::rng(9), [8, 8, 8]).unwrap();
    let mut text = Vec::new();
    write_tfld(&field, &mut text).unwrap();
    let back = parse_tfld(text.as_slice()).unwrap();
    let mut again = Vec::new();
    write_tfld(&back, &mut again).unwrap();
    let roundtrip = back == field && again == text;

    let dir = tempfile::tempdir().unwrap();
    let first = pipeline_bytes(dir.path());
    let second = pipeline_bytes(dir.path());
    let identical = first == second;
    outcome(
        roundtrip && identical,
        format!("TFLD round trip exact: {roundtrip}; JSON/CSV/SVG byte-identical across runs: {identical}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 9] = [
        ("geometry kernel", criterion_1, Duration::from_secs(60)),
        ("flat equivalence", criterion_2, Duration::from_secs(10)),
        ("third-order consistency", criterion_3, Duration::from_secs(300)),
        ("factor update optimality", criterion_4, Duration::from_secs(120)),
        ("descent", criterion_5, Duration::from_secs(u64::MAX / 4)),
        ("method comparison", criterion_6, Duration::from_secs(600)),
        ("base-point heuristic", criterion_7, Duration::from_secs(u64::MAX / 4)),
        ("paper-scale feasibility", criterion_8, Duration::from_secs(600)),
        ("I/O determinism", criterion_9, Duration::from_secs(u64::MAX / 4)),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {id} ({name}): {} [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
