//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails. `ACCEPTANCE_ONLY=1,5,7` restricts the run.

use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qutrit_qml::ansatz::ttn_one_qudit;
use qutrit_qml::density::trace_product;
use qutrit_qml::encoding::{
    encode_state, encode_via_circuit, qudits_required, EncodingGates, EncodingSpec, RescaleMap, Scheme,
};
use qutrit_qml::encoding_opt::{
    class_densities, class_members, overlap_estimate_shots, train_encoding, LossMode, ShotProtocol,
};
use qutrit_qml::experiment::{
    run_hardware_protocol, run_optimized, run_sweep, split_dataset, Cell, EncodingMode, ExperimentConfig,
    HardwareConfig, LabeledDataset, OptimizedSummary, SweepSummary, NUM_CLASSES,
};
use qutrit_qml::io::{load_dataset, DatasetSchema};
use qutrit_qml::optim::{rotosolve_minimize, RotosolveConfig, SpsaConfig};
use qutrit_qml::random::{haar_special_unitary, uniform_angles};
use qutrit_qml::state::QuditState;
use qutrit_qml::su3::{decompose_su3, diagonalize, reconstruction_error, verify_rl_equiv_with, Su3Form};
use qutrit_qml::Complex64;

const SEED: u64 = 20_231_018;
const SPLITS: usize = 50;

const HEADLINE_MEAN: f64 = 0.95;
const HEADLINE_STD: f64 = 0.03;
const STABILITY_STD: f64 = 0.02;
const SPREAD_MIN: f64 = 0.05;
const OPTIMIZED_SLACK: f64 = 0.01;
const SU3_TOL: f64 = 1e-9;
const SU3_SAMPLES: usize = 1000;
const RL_TOL: f64 = 1e-9;
const RL_STATES: usize = 1000;
const RL_THETAS: usize = 100;
const TRACE_TOL: f64 = 1e-10;
const SHOT_SEEDS: u64 = 100;
const SHOT_SIGMAS: f64 = 3.0;
const SPSA_SEEDS: u64 = 8;
const SPSA_ITERATIONS: usize = 100;
const SPSA_MIN_IMPROVED: usize = 7;
const PURITY_MIN: f64 = 0.75;
const HW_FINAL_MEAN: f64 = 0.90;
const HW_INITIAL_RANGE: (f64, f64) = (0.23, 0.43);
const FIT_RESIDUAL: f64 = 1e-8;
const ROTOSOLVE_ITERATIONS: usize = 32;
const MONOTONE_SLACK: f64 = 1e-12;
const ENCODING_SAMPLES: usize = 10_000;
const ENCODING_TOL: f64 = 1e-10;

fn data(name: &str) -> LabeledDataset {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(format!("{name}.csv"));
    let schema = if name == "iris" { DatasetSchema::iris(path) } else { DatasetSchema::penguins(path) };
    load_dataset(&schema).expect("dataset")
}

fn iris() -> &'static LabeledDataset {
    static D: OnceLock<LabeledDataset> = OnceLock::new();
    D.get_or_init(|| data("iris"))
}

fn penguins() -> &'static LabeledDataset {
    static D: OnceLock<LabeledDataset> = OnceLock::new();
    D.get_or_init(|| data("penguins"))
}

fn config(cell: Cell, encoding: EncodingMode) -> ExperimentConfig {
    ExperimentConfig { repetitions: SPLITS, seed: SEED, ..ExperimentConfig::new(cell, encoding) }
}

fn optimized(cell: Cell) -> OptimizedSummary {
    run_optimized(iris(), &config(cell, EncodingMode::Optimized)).expect("optimized run")
}

fn optimized_qutrit() -> &'static OptimizedSummary {
    static R: OnceLock<OptimizedSummary> = OnceLock::new();
    R.get_or_init(|| optimized(Cell::Qutrit1Nce))
}

fn sweep(ds: &LabeledDataset, cell: Cell) -> SweepSummary {
    run_sweep(ds, &config(cell, EncodingMode::Fixed(vec![]))).expect("sweep")
}

fn iris_qutrit_sweep() -> &'static SweepSummary {
    static R: OnceLock<SweepSummary> = OnceLock::new();
    R.get_or_init(|| sweep(iris(), Cell::Qutrit1Nce))
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn rescaled(ds: &LabeledDataset) -> Vec<Vec<f64>> {
    let map = RescaleMap::fit(&ds.points).unwrap();
    ds.points.iter().map(|p| map.rescale(p).unwrap()).collect()
}

fn c1_headline() -> Verdict {
    let r = optimized_qutrit();
    verdict(
        r.mean >= HEADLINE_MEAN && r.std <= HEADLINE_STD,
        format!("mean {:.4} (>= {HEADLINE_MEAN}), std {:.4} (<= {HEADLINE_STD})", r.mean, r.std),
    )
}

fn c2_stability() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for cell in [Cell::Qutrit1Nce, Cell::Qubit2NceLong, Cell::Qutrit2Nae, Cell::Qutrit2Npe] {
        let std = if cell == Cell::Qutrit1Nce { optimized_qutrit().std } else { optimized(cell).std };
        pass &= std <= STABILITY_STD;
        parts.push(format!("{cell} {std:.4}"));
    }
    verdict(pass, format!("std (<= {STABILITY_STD}): {}", parts.join(", ")))
}

fn c3_ordering() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, ds) in [("iris", iris()), ("penguins", penguins())] {
        let qubit = sweep(ds, Cell::Qubit1Nce).summary;
        let qutrit = if name == "iris" { iris_qutrit_sweep().summary } else { sweep(ds, Cell::Qutrit1Nce).summary };
        let ok = qutrit.min > qubit.min && qutrit.median > qubit.median && qutrit.max > qubit.max;
        pass &= ok;
        parts.push(format!(
            "{name}: qutrit {:.3}/{:.3}/{:.3} vs qubit {:.3}/{:.3}/{:.3}",
            qutrit.min, qutrit.median, qutrit.max, qubit.min, qubit.median, qubit.max
        ));
    }
    verdict(pass, format!("min/median/max {}", parts.join("; ")))
}

fn c4_spread() -> Verdict {
    let s = iris_qutrit_sweep().summary;
    let spread = s.max - s.min;
    let opt = optimized_qutrit().mean;
    verdict(
        spread > SPREAD_MIN && opt >= s.max - OPTIMIZED_SLACK,
        format!("spread {spread:.4} (> {SPREAD_MIN}), optimized {opt:.4} vs best fixed {:.4}", s.max),
    )
}

fn c5_su3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut recon, mut diag) = (0.0f64, 0.0f64);
    for _ in 0..SU3_SAMPLES {
        let u = haar_special_unitary(3, &mut rng);
        for form in [Su3Form::Theoretical, Su3Form::Hardware] {
            let d = decompose_su3(&u, form).unwrap();
            recon = recon.max(reconstruction_error(&u, &d));
        }
        let dz = diagonalize(&u).unwrap();
        let m = &dz.diagonal;
        let off = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).filter(|(i, j)| i != j);
        diag = diag.max(off.map(|(i, j)| m[(i, j)].norm()).fold(0.0, f64::max));
    }
    verdict(
        recon < SU3_TOL && diag < SU3_TOL,
        format!("max reconstruction error {recon:.2e}, max off-diagonal {diag:.2e} (< {SU3_TOL:e})"),
    )
}

fn c6_rl_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 6);
    let mut worst = 0.0f64;
    for _ in 0..RL_THETAS {
        let t = uniform_angles(8, &mut rng);
        let theta: [f64; 8] = t.try_into().unwrap();
        worst = worst.max(verify_rl_equiv_with(&theta, RL_STATES, &mut rng).unwrap());
    }
    verdict(worst < RL_TOL, format!("max probability discrepancy {worst:.2e} (< {RL_TOL:e})"))
}

fn c7_overlap_estimator() -> Verdict {
    let ds = iris();
    let x = rescaled(ds);
    let spec = EncodingSpec::identity(Scheme::Nce, 3, 4).unwrap();
    let states: Vec<QuditState> = x.iter().map(|p| encode_state(p, &spec).unwrap()).collect();
    let members = class_members(&ds.labels, NUM_CLASSES).unwrap();
    let rho = class_densities(&x, &ds.labels, NUM_CLASSES, &spec).unwrap();
    let mut exact_err = 0.0f64;
    for i in 0..NUM_CLASSES {
        for j in 0..NUM_CLASSES {
            let mut sum = 0.0;
            for &a in &members[i] {
                for &b in &members[j] {
                    let ov: Complex64 =
                        states[a].amplitudes().iter().zip(states[b].amplitudes()).map(|(p, q)| p.conj() * q).sum();
                    sum += ov.norm_sqr();
                }
            }
            let oracle = sum / (members[i].len() * members[j].len()) as f64;
            exact_err = exact_err.max((trace_product(&rho[i], &rho[j]).unwrap() - oracle).abs());
        }
    }
    let (ci, cj) = (0, 1);
    let exact = trace_product(&rho[ci], &rho[cj]).unwrap();
    let pick = |c: usize| -> Vec<Vec<f64>> { members[c].iter().map(|&i| x[i].clone()).collect() };
    let (xi, xj) = (pick(ci), pick(cj));
    let estimates: Vec<f64> = (0..SHOT_SEEDS)
        .map(|s| {
            let p = ShotProtocol { seed: SEED + s, ..ShotProtocol::default() };
            overlap_estimate_shots(&xi, &xj, &spec, &p).unwrap()
        })
        .collect();
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let sd = (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let se = sd / n.sqrt();
    let z = (mean - exact).abs() / se;
    verdict(
        exact_err < TRACE_TOL && z <= SHOT_SIGMAS,
        format!(
            "trace/oracle gap {exact_err:.2e} (< {TRACE_TOL:e}); shot mean {mean:.5} vs exact {exact:.5}, {z:.2} SE (<= {SHOT_SIGMAS})"
        ),
    )
}

fn c8_encoding_dynamics() -> Verdict {
    let ds = iris();
    let x = rescaled(ds);
    let spec = EncodingSpec::identity(Scheme::Nce, 3, 4).unwrap().with_gates(EncodingGates::Hardware).unwrap();
    let mut improved = 0;
    let mut overlap_down = 0;
    let mut min_purity = f64::INFINITY;
    for s in 0..SPSA_SEEDS {
        let spsa = SpsaConfig { max_iterations: SPSA_ITERATIONS, seed: SEED + s, ..SpsaConfig::default() };
        let r = train_encoding(&x, &ds.labels, NUM_CLASSES, &spec, &spsa, LossMode::Exact).unwrap();
        improved += usize::from(r.trained.loss < r.initial.loss);
        overlap_down += usize::from(r.trained.max_overlap() < r.initial.max_overlap());
        min_purity = r.trained.purities.iter().copied().fold(min_purity, f64::min);
    }
    let n = SPSA_SEEDS as usize;
    verdict(
        improved >= SPSA_MIN_IMPROVED && overlap_down == n && min_purity >= PURITY_MIN,
        format!(
            "loss reduced {improved}/{n} (>= {SPSA_MIN_IMPROVED}), max overlap reduced {overlap_down}/{n}, min purity {min_purity:.3} (>= {PURITY_MIN})"
        ),
    )
}

fn c9_hardware() -> Verdict {
    let config = HardwareConfig { seeds: 8, master_seed: SEED, ..HardwareConfig::default() };
    let s = run_hardware_protocol(iris(), &config).unwrap();
    let first = s.test_band[0].mean;
    let last = s.test_band[s.test_band.len() - 1];
    verdict(
        last.mean >= HW_FINAL_MEAN && (HW_INITIAL_RANGE.0..=HW_INITIAL_RANGE.1).contains(&first),
        format!(
            "final test {:.4} ± {:.4} (>= {HW_FINAL_MEAN}), initial {first:.4} (in [{}, {}])",
            last.mean, last.std, HW_INITIAL_RANGE.0, HW_INITIAL_RANGE.1
        ),
    )
}

fn c10_rotosolve() -> Verdict {
    let ds = iris();
    let split = split_dataset(ds, SEED, 2.0 / 3.0).unwrap();
    let train_raw: Vec<Vec<f64>> = split.train.iter().map(|&i| ds.points[i].clone()).collect();
    let labels: Vec<usize> = split.train.iter().map(|&i| ds.labels[i]).collect();
    let map = RescaleMap::fit(&train_raw).unwrap();
    let spec = EncodingSpec::identity(Scheme::Nce, 3, 4).unwrap().with_gates(EncodingGates::Hardware).unwrap();
    let states: Vec<QuditState> =
        train_raw.iter().map(|p| encode_state(&map.rescale(p).unwrap(), &spec).unwrap()).collect();
    let circuit = ttn_one_qudit(3).unwrap();
    let loss = |theta: &[f64]| -> f64 {
        let u = circuit.unitary(theta).unwrap();
        states.iter().zip(&labels).map(|(s, &y)| 1.0 - s.apply_unitary(&u).unwrap().probabilities()[y]).sum()
    };
    let init = uniform_angles(circuit.param_count(), &mut ChaCha8Rng::seed_from_u64(SEED + 10));
    let rc = RotosolveConfig { iterations: ROTOSOLVE_ITERATIONS, seed: SEED, ..RotosolveConfig::default() };
    let r = rotosolve_minimize(loss, &init, &rc).unwrap();
    let residual = r.fits.iter().map(|f| f.residual).fold(0.0, f64::max);
    let rises = r.losses.windows(2).filter(|w| w[1] > w[0] + MONOTONE_SLACK).count();
    verdict(
        residual < FIT_RESIDUAL && rises == 0 && r.losses.len() == ROTOSOLVE_ITERATIONS + 1,
        format!(
            "max fit residual {residual:.2e} (< {FIT_RESIDUAL:e}), loss {:.4} -> {:.4}, increases {rises}",
            r.losses[0], r.losses[ROTOSOLVE_ITERATIONS]
        ),
    )
}

fn reduced_first(s: &QuditState) -> nalgebra::DMatrix<Complex64> {
    let d = s.dim_per_qudit();
    let rest = s.amplitudes().len() / d;
    let a = s.amplitudes();
    nalgebra::DMatrix::from_fn(d, d, |i, j| (0..rest).map(|r| a[i * rest + r] * a[j * rest + r].conj()).sum())
}

fn c11_encodings() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 11);
    let mut worst = [0.0f64; 4];
    let mut count_ok = true;
    for scheme in [Scheme::Nae, Scheme::Npe, Scheme::Nce] {
        for d in [2, 3] {
            let cap = scheme.capacity(d);
            let k = cap + 2;
            let n = qudits_required(scheme, d, k);
            count_ok &= n == k.div_ceil(cap) && n >= 2;
            let spec = EncodingSpec::identity(scheme, d, k).unwrap();
            for _ in 0..ENCODING_SAMPLES {
                let x: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..std::f64::consts::PI)).collect();
                let s = encode_state(&x, &spec).unwrap();
                worst[0] = worst[0].max((s.norm() - 1.0).abs());
                let c = encode_via_circuit(&x, &spec).unwrap();
                worst[1] = worst[1].max(1.0 - s.fidelity(&c).unwrap());
                if scheme == Scheme::Npe {
                    let m = (d as f64).powi(-(n as i32)).sqrt();
                    worst[2] = worst[2].max(s.amplitudes().iter().map(|a| (a.norm() - m).abs()).fold(0.0, f64::max));
                }
                let mut y = x.clone();
                for v in &mut y[cap..] {
                    *v = rng.gen_range(0.0..std::f64::consts::PI);
                }
                let r0 = reduced_first(&s);
                let r1 = reduced_first(&encode_state(&y, &spec).unwrap());
                worst[3] = worst[3].max((r0 - r1).map(|c| c.norm()).max());
            }
        }
    }
    let pass = count_ok && worst.iter().all(|w| *w < ENCODING_TOL);
    verdict(
        pass,
        format!(
            "norm {:.1e}, circuit fidelity gap {:.1e}, NPE magnitude {:.1e}, capacity {:.1e} (< {ENCODING_TOL:e})",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn main() {
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let criteria: [(usize, &str, fn() -> Verdict); 11] = [
        (5, "SU(3) decomposition", c5_su3),
        (6, "R_L / R_L' measurement equivalence", c6_rl_equivalence),
        (7, "overlap estimator", c7_overlap_estimator),
        (10, "rotosolve first-harmonic property", c10_rotosolve),
        (11, "encoding invariants", c11_encodings),
        (8, "encoding-training dynamics", c8_encoding_dynamics),
        (1, "optimized-encoding headline", c1_headline),
        (2, "optimized-encoding stability", c2_stability),
        (3, "qutrit-vs-qubit ordering", c3_ordering),
        (4, "permutation spread", c4_spread),
        (9, "hardware-protocol emulation", c9_hardware),
    ];
    let mut failed = Vec::new();
    for (id, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{id:>2}] {name}: {} ({:.1}s)", v.detail, start.elapsed().as_secs_f64());
        if !v.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
