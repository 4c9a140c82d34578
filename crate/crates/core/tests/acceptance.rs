//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured values (run with `cargo test --test acceptance -- --nocapture`
//! to see them). Tolerances are pinned in the asserts.

use irmkit::envsynth::{
    build_environments, default_specs, synth_benchmark, CellCounts, EnvDataset, EnvRole, EnvSpec,
};
use irmkit::harness::make_search_data;
use irmkit::hpsearch::{
    oracle_select, overfit_filter, run_search, sample_settings, SearchSpace, TrialResult, TrialRun,
};
use irmkit::matrix::Matrix;
use irmkit::metrics::{self, evaluate, DataSplit};
use irmkit::objective::{
    finite_diff_grad, gradient_relative_error, irm_penalty, objective_value_and_grad, Mode,
    ModelParams, ObjectiveConfig,
};
use irmkit::rng::{derive_seed, Rng};
use irmkit::trainer::{train, HyperParams};
use std::time::Instant;

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn fixture_env(rows: &[Vec<f32>], y: &[u8], z: &[u8]) -> EnvDataset {
    EnvDataset::from_parts(
        EnvSpec::new("fixture", 0.5, EnvRole::Train),
        (0..y.len()).map(|i| format!("r{i}")).collect(),
        Matrix::from_rows(rows).unwrap(),
        y.to_vec(),
        z.to_vec(),
    )
    .unwrap()
}

// --- criterion 1 -----------------------------------------------------------

#[test]
fn criterion_01_gradient_oracle() {
    let start = Instant::now();
    let mut rng = Rng::new(0xACCE01);
    let mut worst = 0.0f64;
    let instances = 120;
    for _ in 0..instances {
        let d = 1 + rng.below(8) as usize;
        let n1 = 2 + rng.below(28) as usize;
        let n2 = 2 + rng.below(28) as usize;
        let make_env = |rng: &mut Rng, n: usize| {
            let rows: Vec<Vec<f32>> = (0..n)
                .map(|_| (0..d).map(|_| rng.standard_normal() as f32).collect())
                .collect();
            let y: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
            let z: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
            fixture_env(&rows, &y, &z)
        };
        let envs = vec![make_env(&mut rng, n1), make_env(&mut rng, n2)];
        let params = ModelParams {
            theta: (0..d).map(|_| rng.standard_normal()).collect(),
            bias: rng.standard_normal(),
        };
        let cfg = ObjectiveConfig {
            mode: if rng.bernoulli(0.25) {
                Mode::Erm
            } else {
                Mode::Irm
            },
            penalty_weight: 10f64.powf(rng.uniform(0.0, 6.0)),
            l2: rng.uniform(0.0, 0.1),
            rescale: true,
        };
        let (_, analytic) = objective_value_and_grad(&params, &envs, &cfg).unwrap();
        let fd = finite_diff_grad(&params, &envs, &cfg, 1e-5).unwrap();
        let rel = gradient_relative_error(&analytic, &fd);
        worst = worst.max(rel);
        assert!(rel <= 1e-5, "relative error {rel} exceeds 1e-5");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "[criterion 1] PASS - {instances} random instances, worst relative error {worst:.2e}, {elapsed:?}"
    );
}

// --- criterion 2 -----------------------------------------------------------

#[test]
fn criterion_02_penalty_hand_values() {
    let unit = ModelParams {
        theta: vec![1.0],
        bias: 0.0,
    };

    // Hand derivation, cross-checked by central finite differences on the
    // dummy classifier w below:
    //   (s=1, y=1): ((sigma(1)-1)*1)^2 = 0.0723294881...
    //   (s=2, y=0): ((sigma(2)-0)*2)^2 = 3.1032139703...
    let cases = [
        (1.0f32, 1u8, 0.072329, 0.07232948812851325),
        (2.0, 0, 3.103214, 3.103213970297503),
    ];
    for (x, y, rounded, derived) in cases {
        let env = fixture_env(&[vec![x]], &[y], &[0]);
        let got = irm_penalty(&unit, &env).unwrap();
        assert!(
            (got - derived).abs() <= 1e-6,
            "penalty {got} vs derived {derived}"
        );
        assert!(
            (got - rounded).abs() <= 1e-6,
            "penalty {got} vs rounded hand value {rounded}"
        );

        // Independent cross-check: d/dw of softplus(w*s) - y*w*s at w = 1,
        // squared, by central differences.
        let s = x as f64;
        let risk = |w: f64| (w * s).max(0.0) + (-(w * s).abs()).exp().ln_1p() - y as f64 * w * s;
        let h = 1e-6;
        let fd = (risk(1.0 + h) - risk(1.0 - h)) / (2.0 * h);
        assert!(
            (got - fd * fd).abs() <= 1e-7,
            "penalty {got} vs fd cross-check {}",
            fd * fd
        );
    }
    println!(
        "[criterion 2] PASS - single-sample penalties 0.0723294881 and 3.1032139703, \
         both within 1e-6 of the hand derivation and its finite-difference cross-check"
    );
}

// --- criterion 3 -----------------------------------------------------------

fn balanced_corpus(per_cell: usize) -> irmkit::dataset::Corpus {
    let cells = [(1u8, 1u8), (1, 0), (0, 0), (0, 1)];
    let mut ids = Vec::new();
    let mut y = Vec::new();
    let mut z = Vec::new();
    let mut data = Vec::new();
    for (k, (yi, zi)) in cells.into_iter().enumerate() {
        for i in 0..per_cell {
            ids.push(format!("c{k}-{i}"));
            y.push(yi);
            z.push(zi);
            data.extend_from_slice(&[i as f32, k as f32]);
        }
    }
    irmkit::dataset::Corpus::new(ids, Matrix::from_vec(per_cell * 4, 2, data).unwrap(), y, z)
        .unwrap()
}

#[test]
fn criterion_03_environment_exactness() {
    let corpus = balanced_corpus(3000);
    for p in [0.1, 0.2, 0.5, 0.9] {
        for n in [20usize, 100, 2000] {
            let specs = vec![EnvSpec::new("e", p, EnvRole::Train)];
            let env = build_environments(&corpus, &specs, n, 7).unwrap().remove(0);
            let half = n / 2;
            let counts = CellCounts::from_arrays(&env.y, &env.z);
            // marginals exactly one half
            assert_eq!(counts.n11 + counts.n10, half, "y marginal p={p} n={n}");
            assert_eq!(counts.n11 + counts.n01, half, "z marginal p={p} n={n}");
            // P(Z=1|Y=0) and P(Z=0|Y=1) equal p exactly as rationals, hence
            // as correctly rounded doubles
            assert_eq!(counts.n01 as f64 / half as f64, p, "P(Z=1|Y=0) p={p} n={n}");
            assert_eq!(counts.n10 as f64 / half as f64, p, "P(Z=0|Y=1) p={p} n={n}");
        }
    }
    println!(
        "[criterion 3] PASS - exact conditionals and half marginals for p in {{0.1,0.2,0.5,0.9}}, n in {{20,100,2000}}"
    );
}

// --- criteria 4, 5, 8 share the synthetic protocol --------------------------

fn spurious_only(envs: &[EnvDataset]) -> Vec<EnvDataset> {
    envs.iter()
        .map(|env| {
            let rows: Vec<Vec<f32>> = (0..env.len())
                .map(|i| vec![env.features.get(i, 1)])
                .collect();
            EnvDataset::from_parts(
                env.spec.clone(),
                env.ids.clone(),
                Matrix::from_rows(&rows).unwrap(),
                env.y.clone(),
                env.z.clone(),
            )
            .unwrap()
        })
        .collect()
}

fn pinned_hp(mode: Mode, iterations: u64) -> HyperParams {
    HyperParams {
        learning_rate: 1e-3,
        iterations,
        l2: 1e-4,
        penalty_lambda: 1e4,
        anneal_iters: 100,
        mode,
        rescale: true,
    }
}

#[test]
fn criterion_04_spurious_only_table_analog() {
    let start = Instant::now();
    let mut erm_ood = Vec::new();
    let mut irm_ood = Vec::new();
    for seed in 0..10u64 {
        let envs =
            synth_benchmark(2000, 0, 0.25, &default_specs(), derive_seed(0xC4, seed)).unwrap();
        let only = spurious_only(&envs);
        let test = DataSplit::from_env(&only[2]);
        let erm = train(&only[..2], &pinned_hp(Mode::Erm, 1000), seed).unwrap();
        erm_ood.push(evaluate(&erm, &test).unwrap().accuracy);
        let irm = train(&only[..2], &pinned_hp(Mode::Irm, 1000), seed).unwrap();
        irm_ood.push(evaluate(&irm, &test).unwrap().accuracy);
    }
    let erm_med = median(erm_ood);
    let irm_med = median(irm_ood);
    let elapsed = start.elapsed();
    assert!(
        (erm_med - 0.10).abs() <= 0.03,
        "ERM OOD median {erm_med} not within 10% +/- 3 points"
    );
    assert!(
        (irm_med - 0.50).abs() <= 0.05,
        "IRM OOD median {irm_med} not within 50% +/- 5 points"
    );
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    println!(
        "[criterion 4] PASS - spurious-only medians: ERM OOD {erm_med:.3} (target 0.10±0.03), \
         IRM OOD {irm_med:.3} (target 0.50±0.05), {elapsed:?}"
    );
}

#[test]
fn criterion_05_shift_benchmark_analog() {
    let start = Instant::now();
    let mut erm_ind = Vec::new();
    let mut erm_ood = Vec::new();
    let mut erm_eo = Vec::new();
    let mut irm_ind = Vec::new();
    let mut irm_ood = Vec::new();
    let mut irm_eo = Vec::new();
    for seed in 0..10u64 {
        let envs =
            synth_benchmark(2000, 8, 0.25, &default_specs(), derive_seed(0xC5, seed)).unwrap();
        let data = make_search_data(&envs, 0.8, derive_seed(0xC5 + 1, seed)).unwrap();
        let erm = train(&data.train_envs, &pinned_hp(Mode::Erm, 2000), seed).unwrap();
        let ind = evaluate(&erm, &data.ind).unwrap();
        let ood = evaluate(&erm, &data.ood).unwrap();
        erm_ind.push(ind.accuracy);
        erm_ood.push(ood.accuracy);
        erm_eo.push(ood.delta_eo);
        let irm = train(&data.train_envs, &pinned_hp(Mode::Irm, 2000), seed).unwrap();
        let ind = evaluate(&irm, &data.ind).unwrap();
        let ood = evaluate(&irm, &data.ood).unwrap();
        irm_ind.push(ind.accuracy);
        irm_ood.push(ood.accuracy);
        irm_eo.push(ood.delta_eo);
    }
    let (e_ind, e_ood, e_eo) = (median(erm_ind), median(erm_ood), median(erm_eo));
    let (i_ind, i_ood, i_eo) = (median(irm_ind), median(irm_ood), median(irm_eo));
    let elapsed = start.elapsed();
    assert!(
        i_ood >= e_ood + 0.05,
        "IRM OOD {i_ood} not >= ERM OOD {e_ood} + 5 points"
    );
    assert!(i_eo <= e_eo, "IRM OOD dEO {i_eo} not <= ERM OOD dEO {e_eo}");
    assert!(
        e_ind >= i_ind - 0.06,
        "ERM InD {e_ind} not >= IRM InD {i_ind} - 6 points"
    );
    assert!(elapsed.as_secs_f64() < 900.0, "took {elapsed:?}");
    println!(
        "[criterion 5] PASS - medians over 10 seeds: ERM ind {e_ind:.3} ood {e_ood:.3} dEO {e_eo:.3}; \
         IRM ind {i_ind:.3} ood {i_ood:.3} dEO {i_eo:.3}; {elapsed:?}"
    );
}

// --- criterion 6 -----------------------------------------------------------

#[test]
fn criterion_06_worst_case_sign_classifier() {
    let n = 2000usize;
    let envs = synth_benchmark(n, 4, 0.25, &default_specs(), 0xC6).unwrap();
    for env in &envs {
        let correct = (0..n)
            .filter(|&i| {
                let pred = if env.features.get(i, 1) > 0.0 { 1u8 } else { 0 };
                pred == env.y[i]
            })
            .count();
        // exact: the diagonal cells hold (1-p)·n rows by construction
        let expected = ((1.0 - env.spec.p) * (n / 2) as f64 + 0.5).floor() as usize * 2;
        assert_eq!(correct, expected, "env {} p={}", env.spec.name, env.spec.p);
        if env.spec.role == EnvRole::Test {
            assert_eq!(correct, n / 10, "test env must score exactly 10%");
        }
    }
    println!(
        "[criterion 6] PASS - spurious sign classifier scores exactly 1-p on every environment (10% on test)"
    );
}

// --- criterion 7 -----------------------------------------------------------

/// Independent brute-force oracle over explicit cell counts.
fn oracle_metrics(yhat: &[u8], y: &[u8], a: &[u8]) -> (Option<f64>, Option<f64>) {
    let mut counts = [[[0u64; 2]; 2]; 2]; // [a][y][yhat]
    for i in 0..y.len() {
        counts[a[i] as usize][y[i] as usize][yhat[i] as usize] += 1;
    }
    let group = |aa: usize| -> u64 {
        counts[aa][0][0] + counts[aa][0][1] + counts[aa][1][0] + counts[aa][1][1]
    };
    let dp = if group(0) > 0 && group(1) > 0 {
        let rate = |aa: usize| (counts[aa][0][1] + counts[aa][1][1]) as f64 / group(aa) as f64;
        Some((rate(0) - rate(1)).abs())
    } else {
        None
    };
    let cell = |aa: usize, yy: usize| counts[aa][yy][0] + counts[aa][yy][1];
    let eo = if (0..2).all(|aa| (0..2).all(|yy| cell(aa, yy) > 0)) {
        let pos = |aa: usize, yy: usize| counts[aa][yy][1] as f64 / cell(aa, yy) as f64;
        Some(
            0.5 * (pos(0, 0) - pos(1, 0)).abs()
                + 0.5 * ((1.0 - pos(0, 1)) - (1.0 - pos(1, 1))).abs(),
        )
    } else {
        None
    };
    (dp, eo)
}

fn check_against_oracle(yhat: &[u8], y: &[u8], a: &[u8]) {
    let (dp_want, eo_want) = oracle_metrics(yhat, y, a);
    match (metrics::delta_dp(yhat, a), dp_want) {
        (Ok(v), Some(w)) => assert_eq!(v, w, "dp mismatch on {yhat:?} {a:?}"),
        (Err(irmkit::Error::UndefinedMetric { .. }), None) => {}
        (got, want) => panic!("dp disagreement: {got:?} vs {want:?}"),
    }
    match (metrics::delta_eo(yhat, y, a), eo_want) {
        (Ok(v), Some(w)) => assert_eq!(v, w, "eo mismatch on {yhat:?} {y:?} {a:?}"),
        (Err(irmkit::Error::UndefinedMetric { .. }), None) => {}
        (got, want) => panic!("eo disagreement: {got:?} vs {want:?}"),
    }
}

#[test]
fn criterion_07_fairness_metric_oracle() {
    // Exhaustive over all distinguishable inputs with n <= 12: the metrics
    // depend only on the eight (a, y, yhat) cell counts, so enumerate every
    // count vector with total 1..=12 and materialize one input per vector.
    let mut cells = [0usize; 8];
    let mut enumerated = 0usize;
    fn recurse(
        cells: &mut [usize; 8],
        idx: usize,
        budget: usize,
        visit: &mut dyn FnMut(&[usize; 8]),
    ) {
        if idx == 7 {
            for last in 0..=budget {
                cells[7] = last;
                visit(cells);
            }
            cells[7] = 0;
            return;
        }
        for c in 0..=budget {
            cells[idx] = c;
            recurse(cells, idx + 1, budget - c, visit);
        }
        cells[idx] = 0;
    }
    recurse(&mut cells, 0, 12, &mut |cells| {
        let total: usize = cells.iter().sum();
        if total == 0 {
            return;
        }
        enumerated += 1;
        let mut yhat = Vec::with_capacity(total);
        let mut y = Vec::with_capacity(total);
        let mut a = Vec::with_capacity(total);
        for (idx, &count) in cells.iter().enumerate() {
            for _ in 0..count {
                a.push((idx >> 2) as u8 & 1);
                y.push((idx >> 1) as u8 & 1);
                yhat.push(idx as u8 & 1);
            }
        }
        check_against_oracle(&yhat, &y, &a);
    });
    assert!(enumerated > 100_000, "enumeration too small: {enumerated}");

    let mut rng = Rng::new(0xC7);
    for _ in 0..1000 {
        let n = 13 + rng.below(188) as usize;
        let yhat: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
        let y: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
        let a: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
        check_against_oracle(&yhat, &y, &a);
    }
    println!(
        "[criterion 7] PASS - {enumerated} exhaustive cell-count patterns (n<=12) plus 1000 random larger cases match the brute-force oracle exactly"
    );
}

// --- criterion 8 -----------------------------------------------------------

#[test]
fn criterion_08_concat_indicator_ablation() {
    let mut d_erm = Vec::new();
    let mut d_irm = Vec::new();
    for seed in 0..10u64 {
        let envs =
            synth_benchmark(2000, 8, 0.25, &default_specs(), derive_seed(0xC8, seed)).unwrap();
        let plain = make_search_data(&envs, 0.8, derive_seed(0xC8 + 1, seed)).unwrap();
        let cat_envs: Vec<EnvDataset> = envs.iter().map(|e| e.with_indicator().unwrap()).collect();
        let cat = make_search_data(&cat_envs, 0.8, derive_seed(0xC8 + 1, seed)).unwrap();
        let ood_acc = |data: &irmkit::hpsearch::SearchData, mode: Mode| -> f64 {
            let model = train(&data.train_envs, &pinned_hp(mode, 400), seed).unwrap();
            evaluate(&model, &data.ood).unwrap().accuracy
        };
        d_erm.push(ood_acc(&plain, Mode::Erm) - ood_acc(&cat, Mode::Erm));
        d_irm.push(ood_acc(&plain, Mode::Irm) - ood_acc(&cat, Mode::Irm));
    }
    let erm_drop = median(d_erm);
    let irm_drop = median(d_irm);
    assert!(
        erm_drop > irm_drop,
        "ERM drop {erm_drop} not strictly greater than IRM drop {irm_drop}"
    );
    println!(
        "[criterion 8] PASS - median OOD drop from appending the indicator: ERM {erm_drop:.3} > IRM {irm_drop:.3}"
    );
}

// --- criterion 9 -----------------------------------------------------------

#[test]
fn criterion_09a_sample_settings_bounds_ten_thousand_draws() {
    let space = SearchSpace {
        settings_count: 10_000,
        ..SearchSpace::default()
    };
    let settings = sample_settings(&space, 0xC9).unwrap();
    assert_eq!(settings.len(), 10_000);
    for hp in &settings {
        assert!(hp.learning_rate >= 0.0001 && hp.learning_rate <= 0.01);
        assert!(hp.iterations >= 10_000 && hp.iterations <= 100_000);
        assert!(hp.l2 >= 0.00001 && hp.l2 <= 0.1);
        assert!(hp.penalty_lambda >= 100.0 && hp.penalty_lambda <= 1_000_000.0);
        assert!(hp.anneal_iters >= 50 && hp.anneal_iters <= 250);
    }
    println!("[criterion 9a] PASS - 10,000 sampled settings all inside the five documented bounds");
}

fn fixture_trial(train_loss: f64, ind_loss: f64, ind_acc: f64, ood_acc: f64) -> TrialResult {
    TrialResult::from_runs(
        HyperParams {
            learning_rate: 0.001,
            iterations: 1,
            l2: 0.0,
            penalty_lambda: 0.0,
            anneal_iters: 0,
            mode: Mode::Erm,
            rescale: true,
        },
        vec![TrialRun {
            seed: 0,
            train_loss,
            ind_loss,
            ind_acc,
            ood_acc,
        }],
    )
}

#[test]
fn criterion_09b_filter_and_select_reproduce_hand_computations() {
    // Each fixture: (trials, tau, surviving indices, selected index within
    // the survivors' original numbering). Values are binary-exact so the
    // hand computations are literal. Selected = argmax of
    // (ind_acc+ood_acc)/2 over survivors, earliest on ties.
    type Fixture = (Vec<(f64, f64, f64, f64)>, f64, Vec<usize>, Option<usize>);
    let fixtures: Vec<Fixture> = vec![
        // 1: plain argmax, nothing filtered
        (
            vec![
                (0.0, 0.0, 0.6, 0.6),
                (0.0, 0.0, 0.7, 0.7),
                (0.0, 0.0, 0.65, 0.65),
            ],
            0.05,
            vec![0, 1, 2],
            Some(1),
        ),
        // 2: exact tie -> earlier index
        (
            vec![(0.0, 0.0, 0.5, 0.9), (0.0, 0.0, 0.9, 0.5)],
            0.05,
            vec![0, 1],
            Some(0),
        ),
        // 3: single candidate
        (vec![(0.0, 0.0, 0.25, 0.75)], 0.05, vec![0], Some(0)),
        // 4: gap 0.06 removed, gap 0.05 retained
        (
            vec![(0.0, 0.06, 0.9, 0.9), (0.0, 0.05, 0.5, 0.5)],
            0.05,
            vec![1],
            Some(1),
        ),
        // 5: everything filtered
        (
            vec![(0.0, 0.5, 0.9, 0.9), (0.0, 0.25, 0.8, 0.8)],
            0.05,
            vec![],
            None,
        ),
        // 6: overfit winner removed, runner-up selected
        (
            vec![
                (0.0, 0.5, 1.0, 1.0),
                (0.0, 0.0, 0.75, 0.25),
                (0.0, 0.0, 0.25, 0.5),
            ],
            0.05,
            vec![1, 2],
            Some(1),
        ),
        // 7: tau 0 keeps only exact-gap trials
        (
            vec![(0.5, 0.5, 0.5, 0.5), (0.5, 0.75, 0.9, 0.9)],
            0.0,
            vec![0],
            Some(0),
        ),
        // 8: negative gap (ind below train) uses absolute value: |0.25-0.5|=0.25 > tau
        (
            vec![(0.5, 0.25, 0.9, 0.9), (0.5, 0.5, 0.25, 0.25)],
            0.05,
            vec![1],
            Some(1),
        ),
        // 9: larger pool, argmax in the middle
        (
            vec![
                (0.0, 0.0, 0.5, 0.5),
                (0.0, 0.0, 0.625, 0.5),
                (0.0, 0.0, 0.75, 0.75),
                (0.0, 0.0, 0.5, 0.75),
                (0.0, 0.0, 0.25, 0.25),
            ],
            0.05,
            vec![0, 1, 2, 3, 4],
            Some(2),
        ),
        // 10: filter leaves later indices only
        (
            vec![
                (0.0, 1.0, 1.0, 1.0),
                (0.0, 0.75, 1.0, 1.0),
                (0.0, 0.0, 0.5, 0.25),
            ],
            0.05,
            vec![2],
            Some(2),
        ),
        // 11: aggregate compares the mean, not the sum of one side
        (
            vec![(0.0, 0.0, 1.0, 0.0), (0.0, 0.0, 0.25, 0.8125)],
            0.05,
            vec![0, 1],
            Some(1),
        ),
        // 12: tau large keeps everything, overfit trial wins
        (
            vec![(0.0, 1.0, 1.0, 1.0), (0.0, 0.0, 0.5, 0.5)],
            2.0,
            vec![0, 1],
            Some(0),
        ),
        // 13: equal aggregates among three -> first
        (
            vec![
                (0.0, 0.0, 0.5, 0.5),
                (0.0, 0.0, 0.75, 0.25),
                (0.0, 0.0, 0.25, 0.75),
            ],
            0.05,
            vec![0, 1, 2],
            Some(0),
        ),
        // 14: zero accuracy still selectable
        (vec![(0.0, 0.0, 0.0, 0.0)], 0.05, vec![0], Some(0)),
        // 15: filter on exact boundary tau=0.25
        (
            vec![(0.5, 0.75, 0.9, 0.9), (0.5, 0.8125, 1.0, 1.0)],
            0.25,
            vec![0],
            Some(0),
        ),
        // 16: two survivors, later one wins strictly
        (
            vec![(0.0, 0.0, 0.5, 0.5), (0.0, 0.0, 0.5, 0.625)],
            0.05,
            vec![0, 1],
            Some(1),
        ),
        // 17: empty input list
        (vec![], 0.05, vec![], None),
        // 18: all trials identical -> first
        (
            vec![(0.0, 0.0, 0.5, 0.5); 4],
            0.05,
            vec![0, 1, 2, 3],
            Some(0),
        ),
        // 19: mixture of filtered and tied survivors
        (
            vec![
                (0.0, 0.5, 1.0, 1.0),
                (0.0, 0.0, 0.75, 0.25),
                (0.0, 0.0, 0.25, 0.75),
                (0.0, 0.375, 1.0, 1.0),
            ],
            0.05,
            vec![1, 2],
            Some(1),
        ),
        // 20: tau exactly matches a large gap
        (
            vec![(0.0, 0.5, 0.25, 0.25), (0.0, 0.625, 1.0, 1.0)],
            0.5,
            vec![0],
            Some(0),
        ),
    ];
    assert_eq!(fixtures.len(), 20);
    for (idx, (raw, tau, keep_idx, select_idx)) in fixtures.iter().enumerate() {
        let trials: Vec<TrialResult> = raw
            .iter()
            .map(|&(t, i, ia, oa)| fixture_trial(t, i, ia, oa))
            .collect();
        let kept = overfit_filter(&trials, *tau);
        let kept_gaps: Vec<f64> = kept.iter().map(TrialResult::overfit_gap).collect();
        let want_gaps: Vec<f64> = keep_idx.iter().map(|&i| trials[i].overfit_gap()).collect();
        assert_eq!(kept.len(), keep_idx.len(), "fixture {}", idx + 1);
        assert_eq!(kept_gaps, want_gaps, "fixture {}", idx + 1);
        match (oracle_select(&kept), select_idx) {
            (Ok(best), Some(i)) => {
                let want = &trials[*i];
                assert_eq!(
                    best.aggregate_accuracy(),
                    want.aggregate_accuracy(),
                    "fixture {}",
                    idx + 1
                );
                assert_eq!(best.mean_ind_acc, want.mean_ind_acc, "fixture {}", idx + 1);
            }
            (Err(irmkit::Error::NoCandidates), None) => {}
            (got, want) => panic!("fixture {}: {got:?} vs {want:?}", idx + 1),
        }
    }
    println!("[criterion 9b] PASS - 20 fixture trial lists reproduce the hand-computed filter/select outcomes");
}

#[test]
fn criterion_09c_run_search_bit_deterministic_across_threads() {
    let envs = synth_benchmark(200, 2, 0.25, &default_specs(), 0x9C).unwrap();
    let data = make_search_data(&envs, 0.8, 0x9D).unwrap();
    let space = SearchSpace {
        iterations: (50, 200),
        anneal_iters: (5, 20),
        settings_count: 5,
        trials_per_setting: 2,
        overfit_tau: 10.0,
        mode: Mode::Irm,
        ..SearchSpace::default()
    };
    let run_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| run_search(&data, &space, 0x9E).unwrap())
    };
    let first = run_with(1);
    let second = run_with(1); // second execution, same thread count
    let eight = run_with(8);
    for (a, b) in [(&first, &second), (&first, &eight)] {
        assert_eq!(a.all.len(), b.all.len());
        for (x, y) in a.all.iter().zip(&b.all) {
            assert_eq!(x.mean_train_loss.to_bits(), y.mean_train_loss.to_bits());
            assert_eq!(x.mean_ind_loss.to_bits(), y.mean_ind_loss.to_bits());
            assert_eq!(x.mean_ind_acc.to_bits(), y.mean_ind_acc.to_bits());
            assert_eq!(x.mean_ood_acc.to_bits(), y.mean_ood_acc.to_bits());
            for (r, s) in x.runs.iter().zip(&y.runs) {
                assert_eq!(r.seed, s.seed);
                assert_eq!(r.train_loss.to_bits(), s.train_loss.to_bits());
            }
        }
        assert_eq!(
            a.best.aggregate_accuracy().to_bits(),
            b.best.aggregate_accuracy().to_bits()
        );
    }
    println!(
        "[criterion 9c] PASS - run_search bit-identical across two executions and 1-thread vs 8-thread pools"
    );
}

// --- criterion 10 ----------------------------------------------------------

#[test]
fn criterion_10_experiment_subcommand_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("experiment.json");
    let config = serde_json::json!({
        "data": {"synth": {"n_per_env": 400, "d_noise": 2, "q": 0.25}},
        "modes": ["erm", "irm"],
        "space": {
            "iterations": [50, 200],
            "anneal_iters": [5, 20],
            "settings_count": 3,
            "trials_per_setting": 2,
            "overfit_tau": 10.0
        },
        "retrain_seeds": 4
    });
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();

    let run = |out: &std::path::Path| {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_envforge"))
            .args([
                "experiment",
                "--config",
                config_path.to_str().unwrap(),
                "--seed",
                "11",
                "--out",
                out.to_str().unwrap(),
            ])
            .stdout(std::process::Stdio::null())
            .status()
            .expect("failed to launch envforge");
        assert!(status.success(), "experiment run failed");
    };
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    run(&out_a);
    run(&out_b);

    let mut names: Vec<String> = std::fs::read_dir(&out_a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.contains(&"report.csv".to_string()));
    assert!(names.contains(&"bundle.json".to_string()));
    for name in &names {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between repeated runs");
    }
    println!(
        "[criterion 10] PASS - `experiment` emitted {} byte-identical files across repeated runs",
        names.len()
    );
}
