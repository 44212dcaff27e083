//! End-to-end acceptance checks. Each test prints one PASS/FAIL line, written
//! straight to stdout so it shows without `--nocapture`.

use std::f64::consts::LN_2;
use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use dbc_core::capacity::{
    grid_oracle_hyperplane, hyperplane_value, trace_boundary, RatePair, RegionBoundary,
};
use dbc_core::converse::{cardinality_check, run_proof_suite, ProofSuiteConfig, ProofSuiteReport};
use dbc_core::dist::random_channel;
use dbc_core::exponent::{
    f_sup, property_suite, sample_exterior, sample_interior, ExponentParams, ExponentSurface,
    PropertyConfig, SearchConfig,
};
use dbc_core::grid::logspace;
use dbc_core::optim::OptConfig;
use dbc_core::simulator::{run_converse_suite, run_lemma_suite, LemmaSuiteConfig};
use dbc_core::DegradedBroadcastChannel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, pass: bool, elapsed: Duration, target: Duration, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "criterion {id} {verdict}: {name} ({:.1}s, target < {}s) {detail}",
        elapsed.as_secs_f64(),
        target.as_secs()
    );
}

fn minutes(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

fn random_channels(seed: u64, count: usize, x: usize) -> Vec<DegradedBroadcastChannel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| random_channel(&mut rng, x, x, x))
        .collect()
}

fn bsc() -> DegradedBroadcastChannel {
    DegradedBroadcastChannel::bsc_cascade(0.1, 0.2)
}

fn region(ch: &DegradedBroadcastChannel) -> RegionBoundary {
    trace_boundary(
        ch,
        &logspace(0.05, 20.0, 15),
        &OptConfig::default().with_restarts(8),
    )
    .unwrap()
}

struct Shared {
    channel: DegradedBroadcastChannel,
    surface: ExponentSurface,
    boundary: RegionBoundary,
}

impl Shared {
    fn new(channel: DegradedBroadcastChannel) -> Self {
        let boundary = region(&channel);
        let surface = ExponentSurface::new(channel.clone(), SearchConfig::default());
        Self {
            channel,
            surface,
            boundary,
        }
    }
}

fn identity_shared() -> &'static Shared {
    static S: OnceLock<Shared> = OnceLock::new();
    S.get_or_init(|| Shared::new(DegradedBroadcastChannel::identity(2)))
}

fn bsc_shared() -> &'static Shared {
    static S: OnceLock<Shared> = OnceLock::new();
    S.get_or_init(|| Shared::new(bsc()))
}

fn proof_suite() -> &'static (ProofSuiteReport, Duration) {
    static S: OnceLock<(ProofSuiteReport, Duration)> = OnceLock::new();
    S.get_or_init(|| {
        let t = Instant::now();
        let rep = run_proof_suite(&bsc(), &ProofSuiteConfig::default()).unwrap();
        (rep, t.elapsed())
    })
}

#[test]
fn criterion_1_change_of_measure_lemmas() {
    let t = Instant::now();
    let mut channels = vec![bsc()];
    channels.extend(random_channels(11, 2, 2));
    let mut checks = 0;
    let (mut v1, mut v2) = (0, 0);
    let (mut w1, mut w2) = (f64::INFINITY, f64::INFINITY);
    for (i, ch) in channels.iter().enumerate() {
        let cfg = LemmaSuiteConfig {
            seed: 1 + i as u64,
            ..LemmaSuiteConfig::default()
        };
        let rep = run_lemma_suite(ch, &cfg).unwrap();
        checks += rep.checks;
        v1 += rep.lemma1_violations;
        v2 += rep.lemma2_violations;
        w1 = w1.min(rep.lemma1_worst_slack);
        w2 = w2.min(rep.lemma2_worst_slack);
    }
    let target = minutes(5);
    let pass = v1 == 0 && v2 == 0 && checks == channels.len() * 2000 && t.elapsed() < target;
    let detail = format!(
        "{checks} checks on {} channels, violations {v1}/{v2}, worst slacks {w1:.3e}/{w2:.3e}",
        channels.len()
    );
    report(
        1,
        "change-of-measure inequalities",
        pass,
        t.elapsed(),
        target,
        &detail,
    );
    assert!(pass, "{detail}");
}

#[test]
fn criterion_2_telescoping_identity() {
    let (rep, elapsed) = proof_suite();
    let target = minutes(2);
    let pass = rep.instances == 200
        && rep.telescoping.all_passed()
        && rep.telescoping.worst >= -1e-10
        && *elapsed < target;
    let detail = format!(
        "{} instances, {}/{} equalities, worst gap {:.2e}",
        rep.instances, rep.telescoping.passed, rep.telescoping.checks, -rep.telescoping.worst
    );
    report(
        2,
        "telescoping of the tilted normalizers",
        pass,
        *elapsed,
        target,
        &detail,
    );
    assert!(pass, "{detail}");
}

#[test]
fn criterion_3_holder_and_potential_bound() {
    let (rep, elapsed) = proof_suite();
    let target = minutes(10);
    let pass = rep.holder.all_passed() && rep.potential.all_passed() && *elapsed < target;
    let detail = format!(
        "Hoelder {}/{} (worst slack {:.2e}), potential bound {}/{} (worst slack {:.2e})",
        rep.holder.passed,
        rep.holder.checks,
        rep.holder.worst,
        rep.potential.passed,
        rep.potential.checks,
        rep.potential.worst
    );
    report(
        3,
        "Hoelder step and per-letter potential bound",
        pass,
        *elapsed,
        target,
        &detail,
    );
    assert!(pass, "{detail}");
}

#[test]
fn criterion_4_shape_limit_and_positivity() {
    let t = Instant::now();
    let cfg = PropertyConfig {
        limit_lambdas: vec![1e-4],
        ..PropertyConfig::default()
    };
    let mut results = Vec::new();
    for (i, ch) in random_channels(21, 5, 2).iter().enumerate() {
        let cfg = PropertyConfig {
            seed: 100 + i as u64,
            ..cfg.clone()
        };
        results.push(property_suite(ch, &cfg, &SearchConfig::default()));
    }
    let failures: Vec<String> = results
        .iter()
        .filter_map(|r| r.as_ref().err().map(|e| e.to_string()))
        .collect();
    let reps: Vec<_> = results.into_iter().filter_map(|r| r.ok()).collect();
    let worst_mono = reps
        .iter()
        .map(|r| r.worst_monotonicity)
        .fold(f64::INFINITY, f64::min);
    let worst_conv = reps
        .iter()
        .map(|r| r.worst_convexity)
        .fold(f64::INFINITY, f64::min);
    let worst_limit = reps
        .iter()
        .flat_map(|r| r.limit_errors.iter().map(|e| e.1))
        .fold(0.0, f64::max);
    let min_f = reps
        .iter()
        .flat_map(|r| r.exterior.iter().map(|e| e.1))
        .fold(f64::INFINITY, f64::min);
    let exterior: usize = reps.iter().map(|r| r.exterior.len()).sum();
    let target = minutes(5);
    let pass = failures.is_empty() && exterior == 50 && min_f > 0.0 && t.elapsed() < target;
    let detail = format!(
        "worst increment {worst_mono:.2e}, worst midpoint gap {worst_conv:.2e}, limit error {worst_limit:.2e}, \
         min exterior F {min_f:.3e} over {exterior} points, errors {failures:?}"
    );
    report(
        4,
        "Omega_q shape in lambda, small-lambda limit, F > 0 outside",
        pass,
        t.elapsed(),
        target,
        &detail,
    );
    assert!(pass, "{detail}");
}

#[test]
fn criterion_5_auxiliary_cardinality() {
    let t = Instant::now();
    let mut channels = random_channels(31, 10, 2);
    channels.extend(random_channels(32, 3, 3));
    let params = [
        ExponentParams::new(1.0, 1.0).unwrap(),
        ExponentParams::new(2.0, 0.5).unwrap(),
    ];
    let mut worst = 0.0f64;
    let mut disagreements = 0;
    for (i, ch) in channels.iter().enumerate() {
        for p in &params {
            let rep = cardinality_check(ch, p, 64, i as u64).unwrap();
            worst = worst.max(rep.gap);
            disagreements += !rep.agree as usize;
        }
    }
    let target = minutes(10);
    let pass = disagreements == 0 && worst <= 1e-4 && t.elapsed() < target;
    let detail = format!(
        "{} channel/parameter pairs, disagreements {disagreements}, worst gap {worst:.2e}",
        channels.len() * params.len()
    );
    report(
        5,
        "|U| = |X| vs |X|+2 maximization of Omega",
        pass,
        t.elapsed(),
        target,
        &detail,
    );
    assert!(pass, "{detail}");
}

#[test]
fn criterion_6_finite_blocklength_converse() {
    let t = Instant::now();
    let id = identity_shared();
    let id_rate = RatePair::new(LN_2 + 0.2, 0.2).unwrap();
    let b = bsc_shared();
    let dir = RatePair::new(0.7, 0.3).unwrap();
    let s = 1.25 * b.boundary.radial_extent(dir);
    let bsc_rate = RatePair::new(s * dir.r1, s * dir.r2).unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    for (shared, r) in [(id, id_rate), (b, bsc_rate)] {
        let outside = !shared.boundary.contains(r, 0.0);
        let f = f_sup(&shared.surface, r).unwrap();
        let rep = run_converse_suite(&shared.channel, r, &f, &[2, 3, 4], 50, 2, 5).unwrap();
        pass &= outside && f.f > 0.0 && rep.codes == 150 && rep.all_passed();
        lines.push(format!(
            "r=({:.4},{:.4}) F={:.4e}: {} codes, bound violations {}, exponent violations {}, worst slacks {:.2e}/{:.2e}",
            r.r1, r.r2, f.f, rep.codes, rep.bound_violations, rep.exponent_violations, rep.worst_bound_slack, rep.worst_exponent_slack
        ));
    }
    let target = minutes(15);
    pass &= t.elapsed() < target;
    let detail = lines.join("; ");
    report(
        6,
        "finite-n strong converse on sampled codes",
        pass,
        t.elapsed(),
        target,
        &detail,
    );
    assert!(pass, "{detail}");
}

#[test]
fn criterion_7_capacity_sanity() {
    let t = Instant::now();
    let id = DegradedBroadcastChannel::identity(2);
    let boundary = trace_boundary(&id, &logspace(0.05, 20.0, 40), &OptConfig::default()).unwrap();
    let sum_rate = boundary.max_sum_rate();
    let (grid_sum, _) = grid_oracle_hyperplane(&id, 1.0).unwrap();
    let mut worst = 0.0f64;
    for ch in random_channels(41, 20, 2) {
        for mu in [0.5, 1.0, 2.0] {
            let (v, _, _) = hyperplane_value(&ch, mu, &OptConfig::default()).unwrap();
            let (g, _) = grid_oracle_hyperplane(&ch, mu).unwrap();
            worst = worst.max((v - g).abs());
        }
    }
    let target = minutes(10);
    let pass = (sum_rate - LN_2).abs() <= 2e-3
        && (grid_sum - LN_2).abs() <= 2e-3
        && worst <= 2e-3
        && t.elapsed() < target;
    let detail = format!(
        "identity max sum rate {sum_rate:.6} (grid {grid_sum:.6}, log 2 = {LN_2:.6}), worst optimizer/grid gap {worst:.2e} on 20 channels"
    );
    report(
        7,
        "capacity region sanity",
        pass,
        t.elapsed(),
        target,
        &detail,
    );
    assert!(pass, "{detail}");
}

#[test]
fn criterion_8_interior_nullity() {
    let t = Instant::now();
    let extra: Vec<Shared> = random_channels(51, 2, 2)
        .into_iter()
        .map(Shared::new)
        .collect();
    let mut all: Vec<&Shared> = vec![identity_shared(), bsc_shared()];
    all.extend(extra.iter());
    let mut worst_pre = f64::NEG_INFINITY;
    let mut nonzero = 0;
    let mut points = 0;
    for (i, s) in all.iter().enumerate() {
        for r in sample_interior(&s.boundary, 10, 0.05, 0.95, 60 + i as u64) {
            let res = f_sup(&s.surface, r).unwrap();
            worst_pre = worst_pre.max(res.pre_clamp);
            nonzero += (res.f != 0.0) as usize;
            points += 1;
        }
    }
    let target = minutes(3);
    let pass =
        nonzero == 0 && worst_pre <= 1e-8 && points == 10 * all.len() && t.elapsed() < target;
    let detail = format!("{points} interior points on {} channels, nonzero F {nonzero}, max pre-clamp {worst_pre:.3e}", all.len());
    report(
        8,
        "F vanishes inside the region",
        pass,
        t.elapsed(),
        target,
        &detail,
    );
    assert!(pass, "{detail}");
}

#[test]
fn exterior_sampler_lands_outside() {
    let b = bsc_shared();
    for r in sample_exterior(&b.boundary, 10, 0.15, 3) {
        assert!(!b.boundary.contains(r, 0.0));
    }
}
