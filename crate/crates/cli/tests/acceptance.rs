//! End-to-end acceptance criteria. Each test prints one
//! `criterion N: PASS|FAIL` line with the measured values.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use semigap_core::constants::exact::{self, PowerOfFour};
use semigap_core::constants::{
    bound_thm_grand, bound_thm_median, bound_thm_petit, c_recursion, delta_fn, dualize,
    interpolated_grand, kappa_lp, sandwich, spectral_exact, BoundSource,
};
use semigap_core::semigroup::{
    geometric_time_grid, log_convexity_profile, uniform_time_grid, Evolution,
};
use semigap_core::verify::{
    auxiliary_power_ratio, check_envelope, check_envelopes, check_gronwall_level,
    check_pointwise_inequality, check_wang, estimate_best_constant, nonnegative_family,
    BestConstantTarget, FamilyKind, Inequality, Member, TestFunctionFamily,
};
use semigap_core::{
    build_grid_generator, build_grid_space, build_ou_hermite, decompose, poincare_constant,
    CheckResult, CheckStatus, DecayBound, GeneratorRep, SpectralDecomposition,
};

const SLACK: f64 = 1e-8;

fn report(n: u32, ok: bool, elapsed: Duration, limit: Duration, detail: &str) -> bool {
    let ok = ok && elapsed < limit;
    println!(
        "criterion {n}: {} ({:.2}s, limit {}s) {detail}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    ok
}

fn ou() -> (GeneratorRep, SpectralDecomposition) {
    let g = build_ou_hermite(24, 97).unwrap();
    let s = decompose(&g).unwrap();
    (g, s)
}

fn grid(
    v: impl Fn(f64) -> f64,
    interval: (f64, f64),
    n: usize,
) -> (GeneratorRep, SpectralDecomposition) {
    let sp = build_grid_space(v, interval, n).unwrap();
    let g = build_grid_generator(&sp).unwrap();
    let s = decompose(&g).unwrap();
    (g, s)
}

fn family(s: &SpectralDecomposition, kind: FamilyKind, seed: u64, count: usize) -> Vec<Member> {
    TestFunctionFamily::new(kind, seed, count)
        .generate(s)
        .unwrap()
}

fn passed(r: &CheckResult) -> bool {
    r.status == CheckStatus::Passed
}

fn criterion_01_constant_goldens() -> bool {
    let start = Instant::now();
    let one = exact::int(1);
    let g4 = exact::grand(&exact::int(4), &one).unwrap();
    let g3 = exact::grand(&exact::int(3), &one).unwrap();
    let floor8 = exact::petit_floor(2, &one).unwrap();
    let floor8_c2 = exact::petit_floor(2, &exact::int(2)).unwrap();
    let (lo, hi) = exact::sandwich(&one);
    let base = exact::ExactBound {
        p: exact::int(4),
        lambda: exact::int(1) / exact::int(2),
        k: PowerOfFour::one(),
    };
    let dual = exact::dualize(&base).unwrap();
    let checks = [
        (
            "grand(4,1)",
            g4.lambda == exact::int(1) / exact::int(2) && g4.k.value() == Some(exact::int(2)),
        ),
        (
            "grand(3,1)",
            g3.lambda == exact::int(1) / exact::int(3)
                && g3.k == PowerOfFour(exact::int(2) / exact::int(3)),
        ),
        (
            "petit floor p=8",
            floor8 == exact::pow2(-48) && floor8_c2 == exact::pow2(-49),
        ),
        ("delta(3)", exact::delta(3) == exact::int(4)),
        (
            "sandwich",
            lo == exact::int(1) / exact::int(4) && hi == exact::int(9),
        ),
        (
            "dualize(4,K=1)",
            dual.p == exact::int(4) / exact::int(3) && dual.k.value() == Some(exact::int(2)),
        ),
    ];
    // the double-precision API agrees with the exact values
    let f4 = bound_thm_grand(4.0, 1.0).unwrap();
    let f3 = bound_thm_grand(3.0, 1.0).unwrap();
    let petit8 = bound_thm_petit(8.0, 1.0).unwrap();
    let fd = dualize(&DecayBound {
        p: 4.0,
        lambda: 0.5,
        k: 1.0,
        source: BoundSource::ThmPetit,
    })
    .unwrap();
    let float_ok = (f4.lambda, f4.k) == (0.5, 2.0)
        && f3.lambda == 1.0 / 3.0
        && (f3.k - 4f64.powf(2.0 / 3.0)).abs() < 1e-15
        && petit8.closed_form_floor == Some(2f64.powi(-48))
        && delta_fn(3.0).unwrap() == 4.0
        && sandwich(1.0).unwrap() == (0.25, 9.0)
        && (fd.p - 4.0 / 3.0).abs() < 1e-15
        && fd.k == 2.0;
    let failed: Vec<&str> = checks
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(n, _)| *n)
        .collect();
    report(
        1,
        failed.is_empty() && float_ok,
        start.elapsed(),
        Duration::from_secs(1),
        &format!("exact failures {failed:?}, float api ok {float_ok}"),
    )
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `C(p)/C_P` as a reduced fraction, from the recursion written on
/// `D(p) = (p − 1) C(p)`, which stays integral:
/// `D(2p) = 4 (2^{2p−1} + 2^{4p−5}) (2^p + 2^{3p−1}) D(p) + p²`.
fn recursion_oracle(p_max: u32) -> Vec<(u32, String)> {
    let mut out = vec![(2, "1/1".to_string()), (4, "108/1".to_string())];
    let mut d: u128 = 3 * 108;
    let mut p: u32 = 4;
    while 2 * p <= p_max {
        let a = (1u128 << (2 * p - 1)) + (1u128 << (4 * p - 5));
        let b = (1u128 << p) + (1u128 << (3 * p - 1));
        d = 4 * a * b * d + (p as u128) * (p as u128);
        p *= 2;
        let den = (p - 1) as u128;
        let g = gcd(d, den);
        out.push((p, format!("{}/{}", d / g, den / g)));
    }
    out
}

fn criterion_02_recursion() -> bool {
    let start = Instant::now();
    let oracle = recursion_oracle(16);
    let table = c_recursion(1.0, 4).unwrap();
    let mut mismatches = Vec::new();
    for (p, expected) in &oracle {
        let got = exact::to_fraction_string(table.multiplier(*p as u64).unwrap());
        if &got != expected {
            mismatches.push(format!("C({p}) = {got}, oracle {expected}"));
        }
    }
    let scaled = c_recursion(2.5, 2).unwrap();
    let linear = scaled.value(2) == Some(2.5) && scaled.value(4) == Some(270.0);
    let mut rates = Vec::new();
    for (p, k) in [(8u64, 2u32), (16, 3)] {
        let rate = table.multiplier(p).unwrap().recip();
        let floor = exact::petit_floor(k, &exact::int(1)).unwrap();
        let float = bound_thm_petit(p as f64, 1.0).unwrap();
        rates.push(rate >= floor && float.bound.lambda >= float.closed_form_floor.unwrap());
    }
    report(
        2,
        mismatches.is_empty() && linear && rates.iter().all(|r| *r),
        start.elapsed(),
        Duration::from_secs(1),
        &format!(
            "C(8)={}, C(16)={}, mismatches {mismatches:?}, rate >= floor {rates:?}",
            oracle[2].1, oracle[3].1
        ),
    )
}

fn criterion_03_ou_exactness() -> bool {
    let start = Instant::now();
    let (_, s) = ou();
    let c_p = poincare_constant(&s).unwrap();
    let e1 = s.eigenfunction(1);
    let evo = Evolution::new(&s, &e1).unwrap();
    let var0 = e1.variance();
    let mut worst: f64 = 0.0;
    for t in uniform_time_grid(10.0, 200).unwrap() {
        worst = worst.max((evo.variance_at(t).unwrap() - (-2.0 * t).exp() * var0).abs());
    }
    report(
        3,
        c_p == 1.0 && worst <= 1e-10,
        start.elapsed(),
        Duration::from_secs(1),
        &format!("C_P={c_p}, max |Var(P_t e_1) - e^(-2t) Var(e_1)| = {worst:.3e}"),
    )
}

fn criterion_04_grid_convergence() -> bool {
    let start = Instant::now();
    let errors: Vec<f64> = [101, 201, 401]
        .iter()
        .map(|&n| {
            let (_, s) = grid(|x| 0.5 * x * x, (-8.0, 8.0), n);
            (poincare_constant(&s).unwrap() - 1.0).abs()
        })
        .collect();
    let (_, u) = grid(|_| 0.0, (0.0, 1.0), 101);
    let pi2 = std::f64::consts::PI.powi(2);
    let rel = (u.spectral_gap() - pi2).abs() / pi2;
    report(
        4,
        errors[2] < 0.01 && errors.windows(2).all(|w| w[1] < w[0]) && rel < 0.02,
        start.elapsed(),
        Duration::from_secs(10),
        &format!("|C_P - 1| over n=101,201,401: {errors:?}; uniform gap relative error {rel:.3e}"),
    )
}

fn criterion_05_envelopes() -> bool {
    let start = Instant::now();
    let (_, s) = ou();
    let c_p = poincare_constant(&s).unwrap();
    let members = family(&s, FamilyKind::EigenMixtures, 0, 200);
    let times = geometric_time_grid(1e-3, 10.0, 40).unwrap();
    let mut bounds = vec![spectral_exact(s.spectral_gap()).unwrap()];
    let mut values_ok = true;
    for p in [2.0, 4.0, 8.0, 16.0] {
        let b = bound_thm_grand(p, c_p).unwrap();
        values_ok &= (b.lambda - 2.0 / (p * c_p)).abs() < 1e-15
            && (b.k - 4f64.powf(1.0 - 2.0 / p)).abs() < 1e-14;
        bounds.push(b);
    }
    for p in [3.0, 5.0, 6.0] {
        bounds.push(bound_thm_grand(p, c_p).unwrap());
        bounds.push(interpolated_grand(p, c_p).unwrap());
    }
    for p in [2.0, 4.0] {
        bounds.push(bound_thm_median(p, c_p).unwrap().bound);
    }
    for p in [4.0, 8.0] {
        bounds.push(bound_thm_petit(p, c_p).unwrap().bound);
    }
    let results = check_envelopes(&s, &bounds, &members, &times, SLACK).unwrap();
    let exact_ratio = results[0].worst_ratio;
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !passed(r))
        .map(|r| format!("{} ratio {}", r.name, r.worst_ratio))
        .collect();
    report(
        5,
        failed.is_empty() && values_ok && (exact_ratio - 1.0).abs() <= SLACK,
        start.elapsed(),
        Duration::from_secs(60),
        &format!(
            "{} envelopes, spectral ratio {exact_ratio}, failures {failed:?}",
            results.len()
        ),
    )
}

fn min_second_difference(s: &SpectralDecomposition, members: &[Member], times: &[f64]) -> f64 {
    members
        .iter()
        .map(|m| {
            log_convexity_profile(s, &m.f.centered(), times)
                .unwrap()
                .min()
        })
        .fold(f64::INFINITY, f64::min)
}

fn criterion_06_log_convexity() -> bool {
    let start = Instant::now();
    let (_, o) = ou();
    let (_, g) = grid(|x| 0.5 * x * x, (-8.0, 8.0), 401);
    let times = uniform_time_grid(5.0, 100).unwrap();
    let min_ou = min_second_difference(&o, &family(&o, FamilyKind::RandomSmooth, 6, 100), &times);
    let min_grid = min_second_difference(&g, &family(&g, FamilyKind::RandomSmooth, 6, 100), &times);
    report(
        6,
        min_ou >= -1e-9 && min_grid >= -1e-9,
        start.elapsed(),
        Duration::from_secs(10),
        &format!("min second difference: ou {min_ou:.3e}, grid {min_grid:.3e}"),
    )
}

fn criterion_07_pointwise() -> bool {
    let start = Instant::now();
    let (g, s) = ou();
    let c_p = poincare_constant(&s).unwrap();
    let smooth = family(&s, FamilyKind::RandomSmooth, 7, 200);
    let mixtures = family(&s, FamilyKind::EigenMixtures, 7, 200);
    let balanced = family(&s, FamilyKind::SignBalanced, 7, 200);
    let c4 = c_recursion(c_p, 2).unwrap().value(4).unwrap();
    let mut cases = vec![
        (
            Inequality::IntegratedLp {
                p: 4.0,
                constant: 324.0 * c_p,
            },
            &smooth,
        ),
        (Inequality::LpPoincare { p: 2.0, kappa: c_p }, &mixtures),
        (
            Inequality::LpPoincare {
                p: 4.0,
                kappa: kappa_lp(4.0, c4).unwrap(),
            },
            &smooth,
        ),
    ];
    for p in [2.0, 4.0] {
        cases.push((
            Inequality::MedianLp {
                p,
                constant: p * p / 4.0 * 9.0 * c_p,
            },
            &balanced,
        ));
        cases.push((Inequality::MeanMedian { p }, &smooth));
    }
    let mut failed = Vec::new();
    for (which, members) in &cases {
        let r = check_pointwise_inequality(&g, members, *which, SLACK).unwrap();
        if !passed(&r) {
            failed.push(format!("{} ratio {}", r.name, r.worst_ratio));
        }
    }
    let b2 = estimate_best_constant(&g, &s, BestConstantTarget::MedianLp { p: 2.0 }, &smooth, 10)
        .unwrap()
        .value;
    let (lo, hi) = sandwich(c_p).unwrap();
    let sandwich_ok = lo <= b2 && b2 <= hi;
    report(
        7,
        failed.is_empty() && sandwich_ok,
        start.elapsed(),
        Duration::from_secs(30),
        &format!("{} inequalities, failures {failed:?}, B(2) estimate {b2} in [{lo}, {hi}]: {sandwich_ok}", cases.len()),
    )
}

fn criterion_08_gronwall() -> bool {
    let start = Instant::now();
    let (_, s) = ou();
    let c_p = poincare_constant(&s).unwrap();
    let members = TestFunctionFamily::new(FamilyKind::EigenMixtures, 8, 24)
        .with_max_mode(3)
        .generate(&s)
        .unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    for k in 1..=3 {
        let mut steps = 2000;
        let level = loop {
            let times = uniform_time_grid(2.0 * c_p, steps).unwrap();
            let level = check_gronwall_level(&s, &members, c_p, k, &times, SLACK).unwrap();
            match level.required_step {
                Some(h) if steps < 200_000 => {
                    steps = ((2.0 * c_p / (0.9 * h)).ceil() as usize).max(steps + 1)
                }
                _ => break level,
            }
        };
        for r in level.into_results() {
            ok &= passed(&r);
            lines.push(format!("{}={}", r.name, r.worst_ratio));
        }
    }
    let aux: Vec<f64> = (2..=3).map(|k| auxiliary_power_ratio(k).unwrap()).collect();
    ok &= aux.iter().all(|r| *r <= 1.0);
    report(
        8,
        ok,
        start.elapsed(),
        Duration::from_secs(30),
        &format!("{lines:?}, integer ratios {aux:?}"),
    )
}

fn criterion_09_wang() -> bool {
    let start = Instant::now();
    let (_, s) = ou();
    let c_p = poincare_constant(&s).unwrap();
    let members = nonnegative_family(&s, 9, 200, 3).unwrap();
    let times = geometric_time_grid(1e-3, 10.0, 40).unwrap();
    let w15 = check_wang(&s, &members, 1.5, c_p, &times, SLACK).unwrap();
    let w2 = check_wang(&s, &members, 2.0, c_p, &times, SLACK).unwrap();
    // at p = 2 the deficit is the variance, so the ratio is the squared
    // spectral envelope ratio
    let h2 = check_envelope(
        &s,
        &spectral_exact(s.spectral_gap()).unwrap(),
        &members,
        &times,
        SLACK,
    )
    .unwrap();
    let gap = (w2.worst_ratio - h2.worst_ratio.powi(2)).abs();
    report(
        9,
        passed(&w15) && passed(&w2) && gap <= 1e-10,
        start.elapsed(),
        Duration::from_secs(10),
        &format!(
            "p=1.5 ratio {}, p=2 ratio {}, |p=2 - spectral^2| = {gap:.3e}",
            w15.worst_ratio, w2.worst_ratio
        ),
    )
}

fn criterion_10_falsification() -> bool {
    let start = Instant::now();
    let (_, s) = ou();
    let members = family(&s, FamilyKind::EigenMixtures, 10, 200);
    let times = geometric_time_grid(1e-3, 10.0, 40).unwrap();
    let fast = DecayBound::custom(2.0, 2.0 * s.spectral_gap(), 1.0).unwrap();
    let r_fast = check_envelope(&s, &fast, &members, &times, SLACK).unwrap();
    let mut small_k = bound_thm_grand(4.0, 1.0).unwrap();
    small_k.k = 0.9;
    let r_k = check_envelope(&s, &small_k, &members, &times, SLACK).unwrap();
    let witness_e1 = r_fast.witness.split_whitespace().next() == Some("mode-1");
    report(
        10,
        r_fast.status == CheckStatus::Failed && witness_e1 && r_k.status == CheckStatus::Failed,
        start.elapsed(),
        Duration::from_secs(5),
        &format!(
            "inflated rate witness '{}', reduced K ratio {}",
            r_fast.witness, r_k.worst_ratio
        ),
    )
}

fn run_verify(dir: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_semigap"))
        .args(["verify", "--seed", "11", "--out"])
        .arg(dir)
        .output()
        .unwrap();
    let report = std::fs::read_to_string(dir.join("report.json")).unwrap();
    (out.status.code().unwrap_or(-1), report)
}

fn without_timestamp(report: &str) -> (String, serde_json::Value) {
    let lines: Vec<&str> = report
        .lines()
        .filter(|l| !l.trim_start().starts_with("\"timestamp\""))
        .collect();
    let mut v: serde_json::Value = serde_json::from_str(report).unwrap();
    v.as_object_mut().unwrap().remove("timestamp");
    (lines.join("\n").replace(",\n}", "\n}"), v)
}

fn criterion_11_determinism() -> bool {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let (code_a, a) = run_verify(&dir.path().join("a"));
    let (code_b, b) = run_verify(&dir.path().join("b"));
    let has_timestamp = a.contains("\"timestamp\"");
    let (text_a, json_a) = without_timestamp(&a);
    let (text_b, json_b) = without_timestamp(&b);
    report(
        11,
        code_a == 0 && code_b == 0 && has_timestamp && text_a == text_b && json_a == json_b,
        start.elapsed(),
        Duration::from_secs(60),
        &format!(
            "exit codes {code_a}/{code_b}, reports identical {}",
            text_a == text_b
        ),
    )
}

fn main() {
    let criteria: [fn() -> bool; 11] = [
        criterion_01_constant_goldens,
        criterion_02_recursion,
        criterion_03_ou_exactness,
        criterion_04_grid_convergence,
        criterion_05_envelopes,
        criterion_06_log_convexity,
        criterion_07_pointwise,
        criterion_08_gronwall,
        criterion_09_wang,
        criterion_10_falsification,
        criterion_11_determinism,
    ];
    let mut failed = 0;
    for (i, run) in criteria.iter().enumerate() {
        let ok = std::panic::catch_unwind(run).unwrap_or_else(|_| {
            println!("criterion {}: FAIL (panicked)", i + 1);
            false
        });
        failed += usize::from(!ok);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
