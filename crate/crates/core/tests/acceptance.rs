//! End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero exit
//! status if any criterion fails.

use std::f64::consts::PI;
use std::cell::Cell;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anisorib::bounds::upper_bound_thm;
use anisorib::eigensolver::lambda1_full;
use anisorib::experiment::{random_spd, random_tree, run, ExperimentConfig};
use anisorib::geometry::{Checkerboard, Continuum, Domain2D, Point, Rect, Segment};
use anisorib::tensor_field::{reduce_angle, SpdTensor2, TensorField};
use anisorib::tile_builder::{build_sigma_ell, build_sigma_ell_parts, optimal_plan};
use anisorib::varifold::{
    f_infinity_fitted, f_infinity_min, AngularMeasure, EmpiricalVarifold, FittedVarifold, DEFAULT_SUP_SAMPLES,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

const SOLVER_BUDGET: Duration = Duration::from_secs(30);
const SUITE_BUDGET: Duration = Duration::from_secs(60);

struct Outcome {
    passed: bool,
    detail: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
            notes: Vec::new(),
        }
    }

    fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn unit_square() -> Domain2D {
    Domain2D::unit_square()
}

fn diag14() -> SpdTensor2 {
    SpdTensor2::diag(1.0, 4.0).unwrap()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

/// Collects `(passed, text)` parts into one outcome.
fn combine(parts: Vec<(bool, String)>) -> Outcome {
    let passed = parts.iter().all(|p| p.0);
    let detail = parts.into_iter().map(|p| p.1).collect::<Vec<_>>().join("; ");
    Outcome::new(passed, detail)
}

fn solver_oracle() -> Outcome {
    let cases: [(&str, Domain2D, SpdTensor2, f64, f64); 3] = [
        ("unit square", unit_square(), SpdTensor2::IDENTITY, 2.0 * PI * PI, 0.005),
        (
            "0.5x1 rectangle",
            Domain2D::rectangle(0.0, 0.0, 0.5, 1.0).unwrap(),
            SpdTensor2::IDENTITY,
            5.0 * PI * PI,
            0.01,
        ),
        ("diag(1,4) square", unit_square(), diag14(), 5.0 * PI * PI, 0.01),
    ];
    let parts = cases
        .into_iter()
        .map(|(name, omega, m, exact, tol)| {
            let (r, dt) = timed(|| lambda1_full(&omega, &TensorField::constant(m), None, 128));
            match r {
                Ok(r) => {
                    let e = rel(r.lambda1, exact);
                    (
                        e <= tol && dt <= SOLVER_BUDGET,
                        format!("{name} rel err {e:.2e} (tol {tol}) in {:.1}s", dt.as_secs_f64()),
                    )
                }
                Err(e) => (false, format!("{name}: {e}")),
            }
        })
        .collect();
    combine(parts)
}

fn congruence() -> Outcome {
    const N: usize = 128;
    let sq = unit_square();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for case in 0..10 {
        let m = random_spd(&mut rng, 10.0);
        let k = rng.gen_range(1..=4);
        let sigma = random_tree(&mut rng, &sq, k);
        let nmat = m.inverse_sqrt();
        let image = sq.transformed(&nmat).unwrap();
        let image_sigma = sigma.map(|p| nmat.apply(p)).unwrap();
        // Image cells no coarser than the preimage in the most compressed direction.
        let n_img = (N as f64 * m.eig2().sigma_max.sqrt()).ceil() as usize;
        let a = lambda1_full(&sq, &TensorField::constant(m), Some(&sigma), N);
        let b = lambda1_full(&image, &TensorField::identity(), Some(&image_sigma), n_img);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                let e = rel(a.lambda1, b.lambda1);
                worst = worst.max(e);
                if e > 0.015 {
                    failures.push(format!("case {case}: {:.4} vs {:.4}", a.lambda1, b.lambda1));
                }
            }
            (Err(e), _) | (_, Err(e)) => failures.push(format!("case {case}: {e}")),
        }
    }
    let mut detail = format!("10 cases, max rel gap {worst:.2e} (tol 1.5e-2)");
    if !failures.is_empty() {
        detail.push_str(&format!("; {}", failures.join(", ")));
    }
    Outcome::new(failures.is_empty(), detail)
}

const SQUARE_DIAG14: &str = r#"
[domain]
outer = [[0, 0], [1, 0], [1, 1], [0, 1]]

[field]
type = "constant"
a11 = 1.0
a12 = 0.0
a22 = 4.0
"#;

fn config(dir: &Path, body: &str) -> anisorib::Result<ExperimentConfig> {
    let text = format!("out = \"out\"\nseed = 7\n{body}\n{SQUARE_DIAG14}");
    ExperimentConfig::from_toml(&text, dir)
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Vec<T> {
    csv::Reader::from_path(path)
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap()
}

fn bound_sandwich() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let body = "kind = \"bounds-audit\"\n[mesh]\ncells_per_gap = 8\nn = [128]\n\
                [audit]\ntrees = 50\ncombs = 50\nupper_margin = 0.02\nlower_margin = 0.02\n";
    let report = match config(dir.path(), body).and_then(|c| run(&c)) {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, e.to_string()),
    };
    let detail = report.checks.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("; ");
    Outcome::new(report.passed(), detail)
}

fn bound_sharpness() -> Outcome {
    let riem = 1e4;
    match upper_bound_thm(&SpdTensor2::IDENTITY, 1.0, riem, 1) {
        Ok(b) => {
            let e = rel(b.upper / (riem * riem), PI * PI);
            Outcome::new(e <= 0.002, format!("bound/len² = {:.6}, rel err {e:.2e} (tol 2e-3)", b.upper / (riem * riem)))
        }
        Err(e) => Outcome::new(false, e.to_string()),
    }
}

fn tile_law() -> Outcome {
    let q = Rect::square(0.0, 0.0, 1.0);
    let id = SpdTensor2::IDENTITY;
    let vertical = AngularMeasure::dirac(PI / 2.0);
    let mut parts = Vec::new();
    let mut devs = Vec::new();
    for (ell, tol) in [(1e3, 0.15), (4e3, 0.08), (1.6e4, 0.04)] {
        match build_sigma_ell(&q, &vertical, &id, ell) {
            Ok(c) => {
                let d = (c.total_length() / ell - 1.0).abs();
                devs.push(d);
                parts.push((d <= tol, format!("ℓ={ell}: |H¹/ℓ-1| {d:.4} (tol {tol})")));
            }
            Err(e) => parts.push((false, format!("ℓ={ell}: {e}"))),
        }
    }
    let cross = AngularMeasure::new(vec![(0.0, 0.5), (PI / 2.0, 0.5)]).unwrap();
    match build_sigma_ell_parts(&q, &cross, &id, 1.6e4) {
        Ok(tile) => {
            // Comb only; the frame is the vanishing overhead of the construction.
            let total: f64 = tile.comb.iter().map(|s| s.length()).sum();
            let near = |target: f64| {
                tile.comb
                    .iter()
                    .filter(|s| angle_gap(s.normal_angle(), target) < 1e-6)
                    .map(|s| s.length())
                    .sum::<f64>()
                    / total
            };
            let (m0, m90) = (near(0.0), near(PI / 2.0));
            let ok = rel(m0, 0.5) <= 0.05 && rel(m90, 0.5) <= 0.05;
            parts.push((ok, format!("angle masses {m0:.4}/{m90:.4} (tol 5% of 1/2)")));
        }
        Err(e) => parts.push((false, format!("two-atom tile: {e}"))),
    }
    let mut out = combine(parts);
    if devs.windows(2).any(|w| w[1] > w[0]) {
        out = out.note(format!(
            "length excess is not monotone in ℓ ({:?}); tile and frame counts are rounded up",
            devs.iter().map(|d| format!("{d:.4}")).collect::<Vec<_>>()
        ));
    }
    out
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (reduce_angle(a) - reduce_angle(b)).abs();
    d.min(PI - d)
}

#[derive(Deserialize)]
struct AsymRow {
    l: f64,
    ratio: Option<f64>,
    n: Option<usize>,
    status: String,
}

fn asymptotics(dir: &Path, orientation: Option<f64>) -> Result<Vec<AsymRow>, String> {
    let mut body = "kind = \"asymptotics\"\nlengths = [10, 20, 40]\ns = 1.0\n".to_string();
    if let Some(o) = orientation {
        body.push_str(&format!("orientation = {o}\n"));
    }
    body.push_str("[mesh]\ncells_per_gap = 8\nmax_n = 4096\n");
    let cfg = config(dir, &body).map_err(|e| e.to_string())?;
    run(&cfg).map_err(|e| e.to_string())?;
    Ok(read_csv(&dir.join("out/asymptotics.csv")))
}

fn ratios(rows: &[AsymRow]) -> Result<Vec<f64>, String> {
    rows.iter()
        .map(|r| r.ratio.filter(|_| r.status == "ok").ok_or_else(|| format!("L={}: {}", r.l, r.status)))
        .collect()
}

fn eigen_asymptotics(correct: &mut Option<f64>) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let rows = match asymptotics(dir.path(), None) {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, e),
    };
    let r = match ratios(&rows) {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, e),
    };
    *correct = r.last().copied();
    let monotone = r.windows(2).all(|w| w[1] <= w[0] * 1.02);
    let last = *r.last().unwrap();
    let meshes: Vec<usize> = rows.iter().filter_map(|r| r.n).collect();
    combine(vec![
        (monotone, format!("ratios {r:.3?} at L=10,20,40 (monotone within 2%)")),
        (last <= 1.25, format!("ratio {last:.3} at L=40 (tol 1.25)")),
        (true, format!("meshes n={meshes:?}")),
    ])
}

fn orientation_penalty(correct: Option<f64>) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let r = match asymptotics(dir.path(), Some(0.0)).and_then(|rows| ratios(&rows)) {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, e),
    };
    let wrong = *r.last().unwrap();
    let mut parts = vec![(wrong >= 3.0, format!("ratio {wrong:.3} at L=40 with ν=δ₀ (need ≥ 3)"))];
    // Run on its own, the optimal-plan baseline is recomputed here.
    let correct = correct.or_else(|| {
        let dir = tempfile::tempdir().ok()?;
        ratios(&asymptotics(dir.path(), None).ok()?).ok()?.last().copied()
    });
    match correct {
        Some(c) => parts.push((wrong >= 2.0 * c, format!("separation {:.2}x over the optimal plan (need ≥ 2)", wrong / c))),
        None => parts.push((false, "optimal-plan ratio unavailable".into())),
    }
    combine(parts)
}

#[derive(Deserialize)]
struct DensRow {
    length_share: f64,
    share_deviation: f64,
    angle_tv: Option<f64>,
}

fn density_statistics() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let body = "kind = \"orientation\"\nlengths = [40]\ns = 0.5\n[mesh]\ncells_per_gap = 8\n\
                [tolerances]\nshare = 0.05\nangle_tv = 0.1\n";
    if let Err(e) = config(dir.path(), body).and_then(|c| run(&c)) {
        return Outcome::new(false, e.to_string());
    }
    let rows: Vec<DensRow> = read_csv(&dir.path().join("out/orientation.csv"));
    let dev = rows.iter().map(|r| r.share_deviation.abs()).fold(0.0, f64::max);
    let tv = rows.iter().filter_map(|r| r.angle_tv).fold(0.0, f64::max);
    let shares: Vec<f64> = rows.iter().map(|r| r.length_share).collect();
    combine(vec![
        (rows.len() == 4 && dev <= 0.05, format!("shares {shares:.4?}, max |share-1/4| {dev:.4} (tol 0.05)")),
        (
            rows.len() == 4 && rows.iter().all(|r| r.angle_tv.is_some()) && tv <= 0.1,
            format!("max angle TV vs δ_π/2 {tv:.4} (tol 0.1)"),
        ),
    ])
}

fn random_nu(rng: &mut impl Rng) -> AngularMeasure {
    let k = rng.gen_range(1..=3);
    AngularMeasure::from_weights((0..k).map(|_| (rng.gen_range(0.0..PI), rng.gen_range(0.1..1.0))).collect()).unwrap()
}

fn f_infinity_minimality() -> Outcome {
    let sq = unit_square();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let halves = TensorField::two_halves(
        Rect::square(0.0, 0.0, 1.0),
        0.5,
        SpdTensor2::IDENTITY,
        diag14(),
    )
    .unwrap();
    let fields = [TensorField::constant(diag14()), halves, TensorField::constant(random_spd(&mut rng, 10.0))];
    let mins: Vec<f64> = fields.iter().map(|f| f_infinity_min(f, &sq)).collect();
    let mut below = 0;
    let mut tightest = f64::INFINITY;
    for case in 0..100 {
        let fi = case % fields.len();
        let s = [1.0, 0.5, 0.25, 1.0 / 3.0][rng.gen_range(0..4)];
        let board = Checkerboard::new(&sq, s).unwrap();
        let weights: Vec<f64> = (0..board.len()).map(|_| rng.gen_range(0.05..1.0)).collect();
        let nus: Vec<AngularMeasure> = (0..board.len()).map(|_| random_nu(&mut rng)).collect();
        let v = FittedVarifold::normalized(board, weights, nus).unwrap();
        let val = f_infinity_fitted(&v, &fields[fi], &sq, DEFAULT_SUP_SAMPLES);
        tightest = tightest.min(val - mins[fi]);
        if val < mins[fi] - 1e-9 {
            below += 1;
        }
    }
    let mut parts = vec![(below == 0, format!("{below} of 100 random varifolds below the minimum; min gap {tightest:.3e}"))];
    for (name, m) in [("diag(1,4)", diag14()), ("random SPD", random_spd(&mut rng, 10.0))] {
        let f = TensorField::constant(m);
        let plan = optimal_plan(&f, &sq, 0.5, 40.0).unwrap();
        let val = f_infinity_fitted(&plan.fitted, &f, &sq, DEFAULT_SUP_SAMPLES);
        let gap = rel(val, f_infinity_min(&f, &sq));
        parts.push((gap <= 0.01, format!("optimal plan for {name}: gap {gap:.2e} (tol 1e-2)")));
    }
    combine(parts)
}

fn random_segments(rng: &mut impl Rng, k: usize) -> Vec<Segment> {
    (0..k)
        .map(|_| loop {
            let c: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
            if let Ok(s) = Segment::from_coords(c[0], c[1], c[2], c[3]) {
                break s;
            }
        })
        .collect()
}

/// Splitting segments leaves lengths and connectivity unchanged; varifold
/// pairings move by at most the test function's Lipschitz constant times the
/// longest segment.
fn subdivision_suite(rng: &mut ChaCha8Rng) -> (bool, String) {
    // |∇ₓφ| ≤ √10 + √2 on the unit square for the test function below.
    const LIP: f64 = 4.58;
    let test = |p: Point, t: f64| (p.x * 3.0 + p.y).sin() * (2.0 * t).cos() + p.x * p.y;
    let mut length_gap: f64 = 0.0;
    let mut pairing_slack = f64::INFINITY;
    for _ in 0..200 {
        let k = rng.gen_range(1..=8);
        let segs = random_segments(rng, k);
        let mut split = Vec::new();
        for s in &segs {
            let cuts = rng.gen_range(1..=5);
            let mut ts: Vec<f64> = (0..cuts).map(|_| rng.gen_range(0.05..0.95)).collect();
            ts.push(0.0);
            ts.push(1.0);
            ts.sort_by(f64::total_cmp);
            split.extend(ts.windows(2).filter_map(|w| s.sub(w[0], w[1])));
        }
        let longest = segs.iter().map(Segment::length).fold(0.0, f64::max);
        let (a, b) = (Continuum::new(segs).unwrap(), Continuum::new(split).unwrap());
        if a.component_count() != b.component_count() {
            return (false, "subdivision changed connectivity".into());
        }
        let m = random_spd(rng, 10.0);
        length_gap = length_gap
            .max(rel(b.total_length(), a.total_length()))
            .max(rel(b.riemannian_length(&m), a.riemannian_length(&m)));
        let moved = (EmpiricalVarifold::new(&b).pair_test(test) - EmpiricalVarifold::new(&a).pair_test(test)).abs();
        pairing_slack = pairing_slack.min(LIP * longest - moved);
    }
    (
        length_gap <= 1e-12 && pairing_slack >= 0.0,
        format!("subdivision invariance: length gap {length_gap:.1e} (tol 1e-12), pairing within modulus bound (min slack {pairing_slack:.2e})"),
    )
}

fn antipodal_suite(rng: &mut ChaCha8Rng) -> (bool, String) {
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let m = random_spd(rng, 10.0);
        let t = rng.gen_range(-10.0..10.0);
        worst = worst.max(rel(m.riemannian_norm(t + PI), m.riemannian_norm(t)));
        let flipped = Segment::new(Point::new(0.0, 0.0), Point::unit(t)).unwrap();
        let back = Segment::new(Point::unit(t), Point::new(0.0, 0.0)).unwrap();
        worst = worst.max(rel(back.riemannian_length(&m), flipped.riemannian_length(&m)));
        worst = worst.max(angle_gap(back.normal_angle(), flipped.normal_angle()));
    }
    (worst <= 1e-12, format!("antipodal symmetry: max gap {worst:.1e} (tol 1e-12)"))
}

/// Adding Dirichlet segments never raises `λ₁`.
fn monotonicity_suite(rng: &mut ChaCha8Rng) -> (bool, String) {
    let sq = unit_square();
    let f = TensorField::constant(diag14());
    let mut ok = true;
    let mut lams = Vec::new();
    for _ in 0..4 {
        let base = random_tree(rng, &sq, 2);
        let k = rng.gen_range(1..=3);
        let extra = random_tree(rng, &sq, k);
        let big = base.union(&extra);
        let a = lambda1_full(&sq, &f, Some(&base), 64).unwrap().lambda1;
        let b = lambda1_full(&sq, &f, Some(&big), 64).unwrap().lambda1;
        ok &= a <= b * (1.0 + 1e-6);
        lams.push(format!("{a:.1}≤{b:.1}"));
    }
    (ok, format!("monotonicity: {}", lams.join(", ")))
}

/// `λ₁(tΩ, tΣ) = t⁻² λ₁(Ω, Σ)` on matched meshes.
fn scaling_suite(rng: &mut ChaCha8Rng) -> (bool, String) {
    let sq = unit_square();
    let f = TensorField::constant(diag14());
    let sigma = random_tree(rng, &sq, 3);
    let base = lambda1_full(&sq, &f, Some(&sigma), 64).unwrap().lambda1;
    let mut worst: f64 = 0.0;
    // Lattice spacing scales with the domain: n' = n / t.
    for (t, n) in [(2.0, 32), (0.5, 128)] {
        let scale = anisorib::geometry::Mat2::scaling(t);
        let omega = sq.transformed(&scale).unwrap();
        let s = sigma.map(|p| scale.apply(p)).unwrap();
        let lam = lambda1_full(&omega, &f, Some(&s), n).unwrap().lambda1;
        worst = worst.max(rel(lam * t * t, base));
    }
    (worst <= 0.01, format!("scaling: max rel gap {worst:.1e} (tol 1e-2)"))
}

/// Lengths clipped to the squares of a board add up to the total.
fn partition_suite(rng: &mut ChaCha8Rng) -> (bool, String) {
    let sq = unit_square();
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let k = rng.gen_range(1..=10);
        let c = Continuum::new(random_segments(rng, k)).unwrap();
        let s = [1.0, 0.5, 0.25, 0.2, 1.0 / 3.0, 1.0 / 7.0][rng.gen_range(0..6)];
        let board = Checkerboard::new(&sq, s).unwrap();
        let sum: f64 = board.cell_lengths(&c).iter().sum();
        worst = worst.max(rel(sum, c.total_length()));
    }
    (worst <= 1e-10, format!("partition additivity: max rel gap {worst:.1e} (tol 1e-10)"))
}

fn invariant_suites() -> Outcome {
    type Suite = fn(&mut ChaCha8Rng) -> (bool, String);
    let suites: [Suite; 5] = [subdivision_suite, antipodal_suite, monotonicity_suite, scaling_suite, partition_suite];
    let parts = suites
        .iter()
        .enumerate()
        .map(|(k, suite)| {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
            let ((ok, text), dt) = timed(|| suite(&mut rng));
            (ok && dt <= SUITE_BUDGET, format!("{text} in {:.1}s", dt.as_secs_f64()))
        })
        .collect();
    combine(parts)
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() -> ExitCode {
    // `--list` and name filters follow the conventions of the default test runner.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    let correct_ratio = Cell::new(None);
    let criteria: [Criterion<'_>; 10] = [
        ("solver oracle", Box::new(solver_oracle)),
        ("congruence", Box::new(congruence)),
        ("bound sandwich", Box::new(bound_sandwich)),
        ("bound sharpness", Box::new(bound_sharpness)),
        ("tile law", Box::new(tile_law)),
        (
            "eigenvalue asymptotics",
            Box::new(|| {
                let mut c = None;
                let o = eigen_asymptotics(&mut c);
                correct_ratio.set(c);
                o
            }),
        ),
        ("orientation penalty", Box::new(|| orientation_penalty(correct_ratio.get()))),
        ("density and orientation statistics", Box::new(density_statistics)),
        ("F∞ minimality", Box::new(f_infinity_minimality)),
        ("invariant suites", Box::new(invariant_suites)),
    ];
    let (mut ran, mut failed) = (0, 0);
    for (k, (name, f)) in criteria.iter().enumerate() {
        let id = (k + 1).to_string();
        if !filters.is_empty() && !filters.iter().any(|p| name.contains(p.as_str()) || **p == id) {
            continue;
        }
        let (o, dt) = timed(f);
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("{tag} [{id:>2}] {name}: {} ({:.1}s)", o.detail, dt.as_secs_f64());
        for n in &o.notes {
            println!("     NOTE: {n}");
        }
        ran += 1;
        failed += usize::from(!o.passed);
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
