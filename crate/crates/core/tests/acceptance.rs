//! End-to-end acceptance suite: one test per shipped guarantee, each
//! printing a single pass/fail line (run with `--nocapture` to see them
//! on success).

use std::time::Instant;

use num_traits::ToPrimitive;

use expand_embed::constructor::{
    bounding_growth, build_sard_witness, schedule_from_f64, BoxFamily,
};
use expand_embed::geometry::grid::GridSet;
use expand_embed::geometry::perimeter::{
    check_key, check_peri, default_sweep, p0_estimate, p_estimate, seeded_box_unions,
};
use expand_embed::geometry::properties::{
    assemble_property_family, check_k_conditions, check_properties,
};
use expand_embed::index_tree::DistanceModel;
use expand_embed::modulus::{ModulusSpec, Verdict};
use expand_embed::rational::{rat_from_f64, rat_to_f64};
use expand_embed::verifier::{cross_check, verify_embedding, verify_modulus, Mode};

fn report(n: usize, label: &str, ok: bool, detail: &str) {
    println!(
        "criterion {n} ({label}): {}{}",
        if ok { "PASS" } else { "FAIL" },
        if detail.is_empty() { String::new() } else { format!(" [{detail}]") }
    );
    assert!(ok, "criterion {n} ({label}) failed: {detail}");
}

/// The four reference families of the series test.
fn reference_families() -> Vec<(ModulusSpec, Verdict)> {
    vec![
        (ModulusSpec::power(2.0, 2), Verdict::Divergent),
        (ModulusSpec::power_log(2.0, 1.0, 2), Verdict::Divergent),
        (ModulusSpec::power(1.5, 2), Verdict::Convergent),
        (ModulusSpec::power_log(2.0, 3.0, 2), Verdict::Convergent),
    ]
}

#[test]
fn criterion_1_classification_table() {
    let start = Instant::now();
    let mut ok = true;
    let mut detail = String::new();
    for (spec, expect) in reference_families() {
        let got = spec.classify(16).unwrap().verdict;
        if got != expect {
            ok = false;
            detail = format!("{spec:?}: got {got:?}, expected {expect:?}");
        }
    }
    // p = d diverges in every dimension
    for d in 2..=3u32 {
        let got = ModulusSpec::power(d as f64, d).classify(16).unwrap().verdict;
        if got != Verdict::Divergent {
            ok = false;
            detail = format!("power p={d} d={d}: got {got:?}");
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 1.0 {
        ok = false;
        detail = format!("took {elapsed:.2}s, limit 1s");
    }
    report(1, "classification table", ok, &detail);
}

#[test]
fn criterion_2_critical_sequence_law() {
    let spec = ModulusSpec::power(2.0, 2);
    let cs = spec.critical_sequence(30).unwrap();
    let mut worst_r = 0.0f64;
    let mut worst_star = 0.0f64;
    for n in 1..=30usize {
        let closed_form = 2f64.powf(-((n + 1) as f64) / 2.0);
        worst_r = worst_r.max((cs.r_n(n) - closed_form).abs());
        let back = spec.eval(cs.r_star_n(n)).unwrap();
        worst_star = worst_star.max((back - 2f64.powi(-(n as i32 - 1))).abs());
    }
    let ok = worst_r <= 1e-10 && worst_star <= 1e-10;
    report(
        2,
        "critical sequence law",
        ok,
        &format!("max |r - 2^-(n+1)/2| = {worst_r:.2e}, max round-trip = {worst_star:.2e}"),
    );
}

#[test]
fn criterion_3_embedding_construction() {
    let start = Instant::now();
    let spec = ModulusSpec::power(1.5, 2);
    let cs = spec.critical_sequence(10).unwrap();
    let schedule = schedule_from_f64(&cs.r_star, 2, 10).unwrap();
    let family = BoxFamily::build(schedule, 10).unwrap();
    let model = DistanceModel::sard(spec.clone(), 10).unwrap();

    let structural = verify_embedding(&family, &model, 10, Mode::Structural).unwrap();
    let exhaustive = verify_embedding(&family, &model, 8, Mode::Exhaustive).unwrap();
    let agree = cross_check(&family, &model, Some(&spec), 8).unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let depth_pairs = 256u64 * 255 / 2; // 32,640 unordered depth-8 pairs
    let ok = structural.passed()
        && exhaustive.passed()
        && exhaustive.checked_pairs >= depth_pairs
        && agree
        && elapsed < 60.0;
    report(
        3,
        "embedding construction",
        ok,
        &format!(
            "structural violations {}, exhaustive pairs {} (>= {depth_pairs}), \
             modes agree {agree}, {elapsed:.1}s",
            structural.violations.len(),
            exhaustive.checked_pairs
        ),
    );
}

#[test]
fn criterion_4_pointwise_witness() {
    let spec = ModulusSpec::power(1.5, 2);
    let cs = spec.critical_sequence(8).unwrap();
    let schedule = schedule_from_f64(&cs.r_star, 2, 8).unwrap();
    let witness = build_sard_witness(&schedule, 8).unwrap();
    let rep = verify_modulus(&witness, &spec, Mode::Exhaustive).unwrap();

    // values are exactly the dyadic grid j * 2^-8, all 256 present
    let mut values: Vec<f64> = witness
        .entries
        .iter()
        .map(|(_, _, v)| {
            let x = rat_to_f64(v);
            let exact = rat_from_f64((x * 256.0).round() / 256.0).unwrap();
            assert_eq!(*v, exact, "witness value not an exact multiple of 2^-8");
            x
        })
        .collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let dense = values.len() == 256
        && values
            .iter()
            .enumerate()
            .all(|(j, v)| (*v - j as f64 / 256.0).abs() == 0.0);

    let ok = rep.passed() && rep.min_slack >= 0.0 && dense;
    report(
        4,
        "pointwise witness",
        ok,
        &format!(
            "violations {}, min_slack {:?}, image size {}",
            rep.violations.len(),
            rep.min_slack,
            values.len()
        ),
    );
}

#[test]
fn criterion_5_divergence_demonstration() {
    // closed form at the critical exponent: every increment is 2^-1/2
    let spec = ModulusSpec::power(2.0, 2);
    let ell = bounding_growth(&spec, 2, 40).unwrap();
    let mut worst = 0.0f64;
    for (k, l) in ell.iter().enumerate() {
        worst = worst.max((rat_to_f64(l) - k as f64 / 2f64.sqrt()).abs());
    }
    let mut ok = worst <= 1e-9;
    let mut detail = format!("max |l0(K) - K/sqrt(2)| = {worst:.2e}");

    // growth is bounded exactly when the series converges
    for (spec, verdict) in reference_families() {
        let ell = bounding_growth(&spec, 2, 40).unwrap();
        let half = ell[20].to_f64().unwrap();
        let full = ell[40].to_f64().unwrap();
        let tail_ratio = (full - half) / full;
        let consistent = match verdict {
            Verdict::Convergent => tail_ratio < 0.2,
            Verdict::Divergent => tail_ratio > 0.35,
            Verdict::Unknown => false,
        };
        if !consistent {
            ok = false;
            detail = format!("{spec:?}: tail ratio {tail_ratio:.3} vs verdict {verdict:?}");
        }
    }
    report(5, "divergence demonstration", ok, &detail);
}

#[test]
fn criterion_6_mutation_sensitivity() {
    let depth = 6usize;
    let r: Vec<f64> = (1..=depth as i32).map(|i| 0.25f64.powi(i)).collect();
    let model = DistanceModel::cantor(r.clone()).unwrap();

    let build = |gaps: &[f64]| {
        let schedule = schedule_from_f64(gaps, 2, depth).unwrap();
        BoxFamily::build(schedule, depth).unwrap()
    };
    let baseline = verify_embedding(&build(&r), &model, depth, Mode::Exhaustive).unwrap();
    let mut ok = baseline.passed();
    let mut detail = format!("baseline violations {}", baseline.violations.len());
    for k in 1..=4usize {
        let mut gaps = r.clone();
        gaps[k - 1] /= 2.0;
        let mutated = verify_embedding(&build(&gaps), &model, depth, Mode::Exhaustive).unwrap();
        if mutated.violations.is_empty() {
            ok = false;
            detail = format!("halving v_{k} went undetected");
        }
        let restored = verify_embedding(&build(&r), &model, depth, Mode::Exhaustive).unwrap();
        if !restored.passed() {
            ok = false;
            detail = format!("restoring v_{k} left violations");
        }
    }
    report(6, "mutation sensitivity", ok, &detail);
}

#[test]
fn criterion_7_perimeter_engine() {
    let start = Instant::now();
    let h = 0.005;
    let mut ok = true;
    let mut detail = String::new();

    // unit square against the closed form for the shell quotient
    let n = (1.0f64 / h).round() as usize;
    let square = GridSet::from_predicate(2, h, [0, 0, 0], [n, n, 1], |_| true).unwrap();
    let p0 = p0_estimate(&square, 0.05, 0.05).unwrap();
    if (p0 - 4.4712).abs() > 0.02 * 4.4712 {
        ok = false;
        detail = format!("square p0 = {p0}");
    }

    // unit disk boundary length
    let o = (-1.1f64 / h).floor() as i64;
    let nn = (2.2f64 / h).ceil() as usize;
    let disk = GridSet::from_predicate(2, h, [o, o, 0], [nn, nn, 1], |p| {
        p[0] * p[0] + p[1] * p[1] <= 1.0
    })
    .unwrap();
    let est = p_estimate(&disk, &default_sweep(&disk, 0.05), 0.05).unwrap();
    let two_pi = std::f64::consts::TAU;
    if (est.p_hat - two_pi).abs() > 0.05 * two_pi {
        ok = false;
        detail = format!("disk p_hat = {}", est.p_hat);
    }

    // seeded corpus: isoperimetric lower bound, pair inequalities, key
    // family inequality
    let corpus: Vec<GridSet> = seeded_box_unions(20260823, 100, 4, 2)
        .iter()
        .map(|boxes| GridSet::from_boxes(2, h, boxes).unwrap())
        .collect();
    for (i, s) in corpus.iter().enumerate() {
        let est = p_estimate(s, &default_sweep(s, 0.05), 0.05).unwrap();
        if 0.9 * est.iso_lower > est.p_hat {
            ok = false;
            detail = format!("instance {i}: iso {} vs p_hat {}", est.iso_lower, est.p_hat);
        }
    }
    for (i, pair) in corpus.chunks(2).enumerate() {
        if let [a, b] = pair {
            let rep = check_peri(a, b, 0.05, 0.10).unwrap();
            if !(rep.subadd_ok && rep.diff_ok && rep.key_ok) {
                ok = false;
                detail = format!("pair {i}: {rep:?}");
            }
        }
    }
    for (i, group) in corpus.chunks(8).enumerate() {
        let others: Vec<&GridSet> = group[1..].iter().collect();
        let (key_ok, margin) = check_key(&group[0], &others, 0.05, 0.10).unwrap();
        if !key_ok {
            ok = false;
            detail = format!("key group {i}: margin {margin}");
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 300.0 {
        ok = false;
        detail = format!("took {elapsed:.0}s, limit 300s");
    }
    if detail.is_empty() {
        detail = format!("square p0 {p0:.4}, disk p_hat {:.4}, {elapsed:.0}s", est.p_hat);
    }
    report(7, "perimeter engine", ok, &detail);
}

#[test]
fn criterion_8_property_suite() {
    let mut ok = true;
    let mut detail = String::new();

    // exact rational recipe for the geometric scale family r_n = 4^-n
    let depth = 6usize;
    let r: Vec<f64> = (1..=depth as i32).map(|i| 0.25f64.powi(i)).collect();
    let schedule = schedule_from_f64(&r, 2, depth).unwrap();
    let family = BoxFamily::build(schedule, depth).unwrap();
    let model = DistanceModel::cantor(r).unwrap();
    for n in 2..=4usize {
        for m in n..=6usize {
            let k = 4u64.pow((m - n) as u32);
            let pf = assemble_property_family(&family, &model, 0.125, n, m, k, 1, None).unwrap();
            let rep = check_properties(&pf).unwrap();
            let clean = rep.p3_ok
                && rep.p6_ok
                && rep.p7_ok
                && rep.p4_count == 0
                && rep.p1_disjoint_count == 0
                && rep.p5_constant <= 4.0;
            if !clean {
                ok = false;
                detail = format!("geometric n={n} m={m}: {rep:?}");
            }
        }
    }

    // summability of the gap weights at d = 2
    let kc = check_k_conditions(|n, m| 2f64.powi((m - n) as i32), 2, 1.0, 40).unwrap();
    if !(kc.k1_sup <= 3.4143 && kc.k2_threshold == Some(4)) {
        ok = false;
        detail = format!("k-conditions: sup {}, threshold {:?}", kc.k1_sup, kc.k2_threshold);
    }

    // grid recipe for the power modulus family
    let spec = ModulusSpec::power(1.5, 2);
    let cs = spec.critical_sequence(6).unwrap();
    let schedule = schedule_from_f64(&cs.r_star, 2, 6).unwrap();
    let family = BoxFamily::build(schedule, 6).unwrap();
    let model = DistanceModel::sard(spec, 6).unwrap();
    let pf = assemble_property_family(&family, &model, 0.125, 3, 6, 8, 3, None).unwrap();
    let rep = check_properties(&pf).unwrap();
    let clean = rep.p3_ok
        && rep.p6_ok
        && rep.p7_ok
        && rep.p2_ball_ratio.is_finite()
        && rep.p5_constant.is_finite();
    if !clean {
        ok = false;
        detail = format!("grid recipe: {rep:?}");
    } else if detail.is_empty() {
        detail = format!(
            "grid recipe p1 {}, p4 {}, p5 {:.3}, k1 sup {:.5}",
            rep.p1_disjoint_count, rep.p4_count, rep.p5_constant, kc.k1_sup
        );
    }
    report(8, "property suite", ok, &detail);
}

#[test]
fn criterion_9_one_dimensional_sanity() {
    // with k = 2^(m-n) and d = 1 every term is 1, so the partial sums grow
    // linearly and no gap threshold exists: the suite refuses to certify
    let kc = check_k_conditions(|n, m| 2f64.powi((m - n) as i32), 1, 1.0, 40).unwrap();
    let linear = kc
        .k1_partial_sums
        .iter()
        .enumerate()
        .all(|(i, s)| (s - (i + 1) as f64).abs() < 1e-9);
    let ok = linear && kc.k2_threshold.is_none() && (kc.k1_sup - 40.0).abs() < 1e-9;
    report(
        9,
        "one-dimensional sanity",
        ok,
        &format!("k1 sup {}, threshold {:?}", kc.k1_sup, kc.k2_threshold),
    );
}
