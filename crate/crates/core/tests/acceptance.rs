use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mlab_core::harness::{
    load_suite, run_experiment, streams_for, ExperimentConfig, Report, StreamKind,
};
use mlab_core::learners::run_learner;
use mlab_core::measures::{level_sum, Tuple};
use mlab_core::programs::FlipSchedule;
use mlab_core::rational::{int, pow2_neg, ratio};
use mlab_core::transforms::{majority_measure, WeightedSet};
use mlab_core::{
    measure_distance, BitString, EntrySpec, Index, Manifest, MeasureObject, ParamMap, ProgramTable,
    Rational, RationalInterval, RealGen, Tri,
};

fn line(n: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {n:>2} [{name}]: {verdict} ({detail})").unwrap();
    out.flush().unwrap();
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/acceptance")
}

fn suite(file: &str) -> Vec<ExperimentConfig> {
    load_suite(&configs().join(file)).unwrap()
}

fn run(cfg: &ExperimentConfig) -> Report {
    run_experiment(cfg, Some(&configs())).unwrap()
}

fn fractions(r: &Report) -> String {
    r.results
        .iter()
        .map(|x| format!("truth {}: {:.3}", x.truth, x.success_fraction))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Runs every experiment of a config file and requires each configured threshold.
fn threshold_criterion(n: u32, name: &str, file: &str) -> bool {
    let mut pass = true;
    let mut details = Vec::new();
    for cfg in suite(file) {
        let r = run(&cfg);
        pass &= r.passed != Some(false);
        details.push(format!("{}: {}", cfg.name, fractions(&r)));
    }
    line(n, name, pass, &details.join("; "));
    pass
}

fn b(s: &str) -> BitString {
    s.parse().unwrap()
}

fn strings_up_to(depth: usize) -> impl Iterator<Item = BitString> {
    (0..=depth).flat_map(BitString::all_of_length)
}

#[test]
fn criterion_01_measure_exactness() {
    let mut measures = vec![MeasureObject::uniform()];
    for (p, q) in [
        (0, 1),
        (1, 1),
        (1, 2),
        (1, 3),
        (2, 3),
        (1, 4),
        (3, 7),
        (5, 8),
        (2, 5),
        (7, 17),
    ] {
        measures.push(MeasureObject::bernoulli(ratio(p, q)));
    }
    for z in [
        RealGen::expansion(ratio(1, 3)),
        RealGen::zeros(),
        RealGen::periodic(b("10")),
        RealGen::hat(RealGen::expansion(ratio(2, 5))),
        RealGen::expansion(ratio(5, 7)),
    ] {
        measures.push(MeasureObject::interleave(z).unwrap());
    }
    let mut violations = 0;
    for mu in &measures {
        if mu.mass(&BitString::new()) != Some(Rational::one()) {
            violations += 1;
        }
        for sigma in strings_up_to(11) {
            let parent = mu.mass(&sigma).unwrap();
            let kids = mu.mass(&sigma.child(false)).unwrap() + mu.mass(&sigma.child(true)).unwrap();
            if parent != kids {
                violations += 1;
            }
        }
    }
    let pass = violations == 0;
    line(
        1,
        "measure core exactness",
        pass,
        &format!(
            "{} measures, |σ| ≤ 12, {violations} violations",
            measures.len()
        ),
    );
    assert!(pass);
}

fn random_q(rng: &mut ChaCha8Rng) -> Rational {
    let den = rng.gen_range(2..=64i64);
    ratio(rng.gen_range(1..den), den)
}

#[test]
fn criterion_02_metric_and_modulus() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let depth = 16;
    let slack = int(3) * pow2_neg(16);
    let (mut asymmetric, mut triangle) = (0, 0);
    for _ in 0..100 {
        let [x, y, z] = [0; 3].map(|_| MeasureObject::bernoulli(random_q(&mut rng)));
        let d = |a: &MeasureObject, c: &MeasureObject| measure_distance(a, c, depth).unwrap();
        if d(&x, &y) != d(&y, &x) {
            asymmetric += 1;
        }
        if d(&x, &z).0 > d(&x, &y).0 + d(&y, &z).0 + &slack {
            triangle += 1;
        }
    }

    let map = ParamMap::BernoulliHat;
    let (mut too_big, mut level_fail, mut checked) = (0, 0, 0);
    for n in 1..=6usize {
        let m = map.modulus(n);
        let bound = pow2_neg(3 * n as u64);
        let mut taus = vec![BitString::zeros(m), BitString::from_bits(vec![true; m])];
        taus.extend(
            (0..8).map(|_| BitString::from_bits((0..m).map(|_| rng.gen::<bool>()).collect())),
        );
        for tau in &taus {
            let size = map.star(tau).size(3 * n + 1).unwrap();
            if size > bound {
                too_big += 1;
            }
        }
        for _ in 0..50 {
            let tau = BitString::from_bits((0..m).map(|_| rng.gen::<bool>()).collect());
            let lo = mlab_core::transforms::dyadic_value(&tau);
            let width = pow2_neg(m as u64);
            let pick = |rng: &mut ChaCha8Rng| &lo + &width * ratio(rng.gen_range(1..1024), 1024);
            let mu = MeasureObject::bernoulli(pick(&mut rng));
            let nu = MeasureObject::bernoulli(pick(&mut rng));
            if level_sum(&mu, &nu, n) >= pow2_neg(n as u64) {
                level_fail += 1;
            }
            checked += 1;
        }
    }
    let pass = asymmetric + triangle + too_big + level_fail == 0;
    line(
        2,
        "metric and modulus",
        pass,
        &format!(
            "asymmetric {asymmetric}/100, triangle {triangle}/100, ball size {too_big}/60, level sum {level_fail}/{checked}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_interleave_structure() {
    let reals = [
        RealGen::expansion(ratio(1, 3)),
        RealGen::zeros(),
        RealGen::periodic(b("10")),
    ];
    let len = 2048;
    let mut pass = true;
    let mut details = Vec::new();
    for z in &reals {
        let mu = MeasureObject::interleave(z.clone()).unwrap();
        let zp = z.prefix(len / 2);
        let (mut even_bad, mut freq_ok, mut ratio_bad) = (0, 0, 0);
        for seed in 0..10 {
            let x = mu.sample(seed, len).unwrap();
            even_bad += (0..len / 2).filter(|&i| x.bit(2 * i) != zp.bit(i)).count();
            let odd_zeros = (0..len / 2).filter(|&i| !x.bit(2 * i + 1)).count();
            let f = odd_zeros as f64 / (len / 2) as f64;
            if (0.46..=0.54).contains(&f) {
                freq_ok += 1;
            }
            if seed == 0 {
                for i in 0..len / 2 {
                    if mu.conditional(&x.prefix(2 * i), zp.bit(i)).unwrap() != Rational::one() {
                        ratio_bad += 1;
                    }
                }
            }
        }
        pass &= even_bad == 0 && freq_ok >= 9 && ratio_bad == 0;
        details.push(format!(
            "even mismatches {even_bad}, odd frequency ok {freq_ok}/10, conditional ≠ 1 at {ratio_bad}"
        ));
    }
    line(3, "interleave measure structure", pass, &details.join("; "));
    assert!(pass);
}

#[test]
fn criterion_04_lift_real_learner() {
    assert!(threshold_criterion(
        4,
        "real→measure lift",
        "crit04_lift_real_learner.json"
    ));
}

#[test]
fn criterion_05_ex_weight_learner() {
    assert!(threshold_criterion(
        5,
        "measure→real ex weight learner",
        "crit05_ex_weight.json"
    ));
}

#[test]
fn criterion_06_bc_majority() {
    let cfgs = suite("crit06_bc_majority.json");
    let mut pass = true;
    let mut details = Vec::new();
    for cfg in &cfgs {
        let r = run(cfg);
        let f = r.results[0].success_fraction;
        let ok = match cfg.notion {
            mlab_core::learners::Notion::Bc => f == 1.0,
            _ => f == 0.0,
        };
        pass &= ok;
        details.push(format!("{} {:.3}", cfg.name, f));
    }
    let dir = configs();
    for cfg in cfgs
        .iter()
        .filter(|c| c.notion == mlab_core::learners::Notion::Bc)
    {
        let mut spec = serde_json::to_value(&cfg.learner).unwrap();
        spec["emit"] = serde_json::json!("measure");
        let learner_spec: mlab_core::harness::LearnerSpec = serde_json::from_value(spec).unwrap();
        let manifest = cfg.manifest.load(Some(&dir)).unwrap();
        let table = Arc::new(ProgramTable::from_manifest(&manifest).unwrap());
        let est = cfg.estimator().unwrap();
        let learner = learner_spec.build(&table, &est, "learner").unwrap();
        let z = cfg.truths[0];
        let lifted = table.bernoulli_lift(z).unwrap();
        let (_, x) = streams_for(&table, z, StreamKind::Prefix, &[0], cfg.horizon)
            .unwrap()
            .remove(0);
        let traj = run_learner(&*learner, &x).unwrap();
        let map = ParamMap::BernoulliHat;
        let lengths: Vec<usize> = (0..)
            .map(|n| map.modulus(n))
            .take_while(|&m| m <= cfg.horizon)
            .collect();
        let equal: Vec<bool> = lengths
            .iter()
            .map(|&m| table.measures_equal(traj[m], lifted, 8, cfg.stage).unwrap() == Tri::Yes)
            .collect();
        let n1 = equal.iter().rposition(|&e| !e).map_or(0, |i| i + 1);
        let distinct = {
            let mut v: Vec<Index> = lengths.iter().map(|&m| traj[m]).collect();
            v.sort_unstable();
            v.dedup();
            v.len()
        };
        let ok = n1 < lengths.len() / 2;
        pass &= ok;
        details.push(format!(
            "truth {z}: measure output equal to the lift from modulus length {} on, {distinct} distinct outputs",
            lengths.get(n1).copied().unwrap_or(usize::MAX)
        ));
    }
    line(
        6,
        "bc majority and ex/bc separation",
        pass,
        &details.join("; "),
    );
    assert!(pass);
}

fn enumerated_bernoulli(q: Rational) -> EntrySpec {
    let mu = MeasureObject::bernoulli(q);
    let mut tuples = Vec::new();
    for sigma in strings_up_to(6) {
        let m = mu.mass(&sigma).unwrap();
        for k in 1..=6u32 {
            if let Some(iv) = RationalInterval::point(m.clone()).canonical_basic(k) {
                tuples.push(Tuple::new(sigma.clone(), iv, 1 << (2 * k - 2)));
            }
        }
    }
    EntrySpec::Measure {
        measure: MeasureObject::enumerated(tuples),
        total: None,
    }
}

#[test]
fn criterion_07_majority_brute_force() {
    let table = ProgramTable::from_specs(vec![
        enumerated_bernoulli(ratio(1, 3)),
        enumerated_bernoulli(ratio(1, 2)),
        enumerated_bernoulli(ratio(3, 4)),
        EntrySpec::Alias { of: 0 },
    ])
    .unwrap();
    let denotes = [0usize, 1, 2, 0];
    let stages = [0u64, 1, 4, 16, 64, 1024];
    let strings: Vec<BitString> = strings_up_to(6).collect();
    let probes: Vec<(&BitString, u64)> = strings
        .iter()
        .flat_map(|x| stages.iter().map(move |&s| (x, s)))
        .collect();
    let member_tuples: Vec<Vec<Vec<RationalInterval>>> = (0..4u64)
        .map(|e| {
            probes
                .iter()
                .map(|&(sigma, s)| {
                    let mut v = table.tuples(e, sigma, s).unwrap();
                    v.dedup();
                    v
                })
                .collect()
        })
        .collect();
    let (mut sets, mut mismatches, mut multiple) = (0, 0, 0);
    for w0 in 0..=8i64 {
        for w1 in 0..=8 - w0 {
            for w2 in 0..=8 - w0 - w1 {
                for w3 in 0..=8 - w0 - w1 - w2 {
                    let weights = [w0, w1, w2, w3];
                    let set = WeightedSet::new(
                        (0..4u64)
                            .map(|e| (e, ratio(weights[e as usize], 8)))
                            .collect(),
                    )
                    .unwrap();
                    let maj = majority_measure(&table, &set);
                    sets += 1;
                    let mut per_measure = [0i64; 3];
                    for e in 0..4 {
                        per_measure[denotes[e]] += weights[e];
                    }
                    if per_measure.iter().filter(|&&w| w > 4).count() > 1 {
                        multiple += 1;
                    }
                    for (k, &(sigma, s)) in probes.iter().enumerate() {
                        let mut carried: Vec<(&RationalInterval, i64)> = Vec::new();
                        for (e, tuples) in member_tuples.iter().enumerate() {
                            let mut seen: Vec<&RationalInterval> = Vec::new();
                            for iv in &tuples[k] {
                                if seen.contains(&iv) {
                                    continue;
                                }
                                seen.push(iv);
                                match carried.iter_mut().find(|(t, _)| *t == iv) {
                                    Some((_, acc)) => *acc += weights[e],
                                    None => carried.push((iv, weights[e])),
                                }
                            }
                        }
                        let brute: Vec<&RationalInterval> = carried
                            .into_iter()
                            .filter(|&(_, w)| w > 4)
                            .map(|(iv, _)| iv)
                            .collect();
                        let got = table.tuples(maj, sigma, s).unwrap();
                        let same = brute.iter().all(|t| got.contains(t))
                            && got.iter().all(|t| brute.contains(&t));
                        if !same {
                            mismatches += 1;
                        }
                    }
                }
            }
        }
    }
    let pass = mismatches == 0 && multiple == 0 && sets > 0;
    line(
        7,
        "majority measure brute force",
        pass,
        &format!("{sets} weighted sets, {mismatches} tuple-set mismatches, {multiple} sets with two majorities"),
    );
    assert!(pass);
}

#[test]
fn criterion_08_partialex_weight_learner() {
    let mut pass = true;
    let mut details = Vec::new();
    for cfg in suite("crit08_partialex_weight.json") {
        let r = run(&cfg);
        let switches: usize = r.results[0]
            .records
            .iter()
            .map(|rec| rec.events.iter().filter(|e| e.kind == "clause_b").count())
            .sum();
        pass &= r.passed == Some(true) && switches > 0;
        details.push(format!(
            "{}: {}, clause (b) events {switches}",
            cfg.name,
            fractions(&r)
        ));
    }
    line(8, "partial ex weight learner", pass, &details.join("; "));
    assert!(pass);
}

#[test]
fn criterion_09_interleave_round_trip() {
    assert!(threshold_criterion(
        9,
        "interleave round trip",
        "crit09_interleave_ex.json"
    ));
}

#[test]
fn criterion_10_universal_partial_learner() {
    assert!(threshold_criterion(
        10,
        "universal partial learner",
        "crit10_universal_partial.json"
    ));
}

fn flip_horizon(manifest: &Manifest) -> u64 {
    manifest
        .flip_schedules
        .iter()
        .map(|f: &FlipSchedule| f.horizon)
        .max()
        .unwrap_or(0)
}

#[test]
fn criterion_11_cost_oracle_learner() {
    let cfgs = suite("crit11_cost_oracle.json");
    let reports: Vec<Report> = cfgs.iter().map(run).collect();
    let threshold_ok = reports.iter().all(|r| r.passed == Some(true));
    let unchanged = reports[0].success_fractions() == reports[1].success_fractions();

    let dir = configs();
    let tables: Vec<Arc<ProgramTable>> = cfgs
        .iter()
        .map(|c| {
            Arc::new(ProgramTable::from_manifest(&c.manifest.load(Some(&dir)).unwrap()).unwrap())
        })
        .collect();
    let horizon = flip_horizon(tables[1].manifest()) as usize;
    let est = cfgs[0].estimator().unwrap();
    let learners: Vec<_> = cfgs
        .iter()
        .zip(&tables)
        .map(|(c, t)| c.learner.build(t, &est, "learner").unwrap())
        .collect();
    let seeds = cfgs[0].seeds.to_vec();
    let (mut streams, mut diverging, mut early_differences) = (0, 0, 0);
    for &truth in &cfgs[0].truths {
        for (_, x) in
            streams_for(&tables[0], truth, StreamKind::Auto, &seeds, cfgs[0].horizon).unwrap()
        {
            let a = run_learner(&*learners[0], &x).unwrap();
            let b = run_learner(&*learners[1], &x).unwrap();
            streams += 1;
            if a[horizon..] != b[horizon..] {
                diverging += 1;
            }
            if a[..horizon] != b[..horizon] {
                early_differences += 1;
            }
        }
    }
    let pass = threshold_ok && unchanged && diverging == 0;
    line(
        11,
        "cost oracle learner",
        pass,
        &format!(
            "default oracle: {}; flipped: {}; fractions unchanged {unchanged}; {diverging}/{streams} trajectories differ past {horizon}, {early_differences} differ before",
            fractions(&reports[0]),
            fractions(&reports[1])
        ),
    );
    assert!(pass);
}
