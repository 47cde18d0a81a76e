//! Acceptance criteria 1 to 10, one PASS/FAIL line each.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::process::{Command, ExitCode};
use std::time::Instant;

use kerrbus::analytics::{self, concurrence, fidelity, heralding_prob, loss_params, predicted_mixture, DensityMatrix};
use kerrbus::measure::OutcomeValue;
use kerrbus::oracle::{displacement_phase, equivalence_checks};
use kerrbus::protocols::{
    bell_measurement, cnot, cnot_enumeration, cnot_target, fuse_clusters, stabilizer_expectations, BellIndex, Cluster,
    Parity, ParityGate, ParityGateConfig,
};
use kerrbus::runner::{run, Experiment, ExperimentConfig, InputState};
use kerrbus::CoherentBranchState;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const THETA: f64 = 0.01;

/// `αθ = 2π`: the odd branch leaves about 7e-18 in the vacuum.
fn ideal() -> ParityGateConfig {
    ParityGateConfig::new(2.0 * PI / THETA.sin(), THETA)
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn lib<T>(r: kerrbus::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut at_pi = 0.0;
    for (i, ast) in [1.0, 2.0, PI].into_iter().enumerate() {
        let mut cfg = ExperimentConfig::new(Experiment::Detector);
        cfg.theta = THETA;
        cfg.alpha = ast / THETA.sin();
        cfg.trials = 1_000_000;
        cfg.seed = 100 + i as u64;
        let r = lib(run(&cfg))?;
        let rate = r.metric("misclassification").unwrap().empirical;
        let want = libm::erfc(ast / SQRT_2);
        let se = (want * (1.0 - want) / cfg.trials as f64).sqrt();
        let z = (rate - want) / se;
        ensure(z.abs() <= 3.0, format!("alpha sin theta {ast}: rate {rate:.4e} vs {want:.4e}, z {z:.2}"))?;
        notes.push(format!("{ast:.3}:{rate:.3e}(z={z:+.2})"));
        if ast == PI {
            at_pi = rate;
        }
    }
    ensure((1e-3..3e-3).contains(&at_pi), format!("rate at pi {at_pi:.3e} not of order 1e-3"))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs <= 60.0, format!("took {secs:.1} s"))?;
    Ok(format!("{} [{secs:.2} s]", notes.join(" ")))
}

fn criterion_2() -> Outcome {
    let mut best = (0.0, 0.0);
    let mut worst_z: f64 = 0.0;
    for (i, alpha_a) in [0.5, 1.0, 1.5].into_iter().enumerate() {
        let mut cfg = ExperimentConfig::new(Experiment::Source);
        cfg.alpha_a = alpha_a;
        cfg.trials = 100_000;
        cfg.seed = 200 + i as u64;
        let r = lib(run(&cfg))?;
        for m in r.metrics.iter().filter(|m| m.name.starts_with("herald_")) {
            let n: usize = m.name["herald_".len()..].parse().unwrap();
            let want = heralding_prob(alpha_a, n);
            let se = (want * (1.0 - want) / cfg.trials as f64).sqrt();
            let z = (m.empirical - want) / se;
            worst_z = worst_z.max(z.abs());
            ensure(z.abs() <= 3.0, format!("alpha_a {alpha_a} n {n}: {:.4} vs {want:.4}, z {z:.2}", m.empirical))?;
        }
        let p1 = r.metric("herald_1").unwrap().empirical;
        if p1 > best.1 {
            best = (alpha_a, p1);
        }
    }
    ensure(best.0 == 1.0, format!("herald-1 peaks at alpha_a {}", best.0))?;
    ensure((best.1 - 0.3679).abs() <= 0.005, format!("peak herald-1 rate {:.4}", best.1))?;
    Ok(format!("max herald-1 {:.4} at alpha_a=1.0, worst |z| {worst_z:.2}", best.1))
}

fn random_pair(rng: &mut ChaCha20Rng) -> [Complex64; 4] {
    let mut v = [c(0.0); 4];
    for z in &mut v {
        *z = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    }
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.map(|z| z / n)
}

fn span(psi: [Complex64; 4], parity: Parity) -> [Complex64; 4] {
    let z = c(0.0);
    let v = match parity {
        Parity::Even => [psi[0], z, z, psi[3]],
        _ => [z, psi[1], psi[2], z],
    };
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.map(|z| z / n)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(300);
    let gate = lib(ParityGate::new(ideal()))?;
    let mut worst: f64 = 1.0;
    let mut conditioned = 0;
    for _ in 0..100 {
        let psi = random_pair(&mut rng);
        let mut s = CoherentBranchState::new();
        let q = lib(s.add_qubits(2, &psi))?;
        let prep = lib(gate.prepare(&s, q[0], q[1]))?;
        let dist = prep.count_distribution().unwrap().to_vec();
        for (n, &p) in dist.iter().enumerate() {
            if n > 0 && p <= 1e-6 {
                continue;
            }
            let (_, post) = lib(prep.condition(OutcomeValue::PhotonCount(n)))?;
            let parity = if n == 0 { Parity::Even } else { Parity::Odd };
            let f = lib(fidelity(&lib(post.reduced_density_matrix(&q))?, &span(psi, parity)))?;
            worst = worst.min(f);
            conditioned += 1;
            ensure(f >= 1.0 - 1e-9, format!("n_p {n}: fidelity {f}"))?;
        }
    }
    Ok(format!("{conditioned} conditionings over 100 states, min fidelity 1-{:.1e}", 1.0 - worst))
}

fn criterion_4() -> Outcome {
    let mut cfg = ExperimentConfig::new(Experiment::Parity);
    cfg.alpha = PI / THETA;
    cfg.theta = THETA;
    cfg.input = InputState::Odd;
    cfg.trials = 1_000_000;
    cfg.seed = 400;
    let r = lib(run(&cfg))?;
    let p = r.metric("p_even").unwrap().empirical;
    let want = (-2.0 * cfg.alpha * cfg.alpha * (1.0 - THETA.cos())).exp();
    let se = (want * (1.0 - want) / cfg.trials as f64).sqrt();
    let z = (p - want) / se;
    ensure(z.abs() <= 3.0, format!("n_p=0 frequency {p:.3e} vs {want:.3e}, z {z:.2}"))?;
    let mean = r.metric("mean_odd_photons").unwrap().empirical;
    ensure((mean - 9.87).abs() <= 0.1, format!("mean odd photons {mean:.3}"))?;
    Ok(format!("P(n_p=0|odd) {p:.3e} vs {want:.3e} (z={z:+.2}), mean odd photons {mean:.3}"))
}

/// Even-parity block of a two-qubit state, renormalized, and the weight
/// outside it.
fn even_block(rho: &DensityMatrix) -> (DensityMatrix, f64) {
    let m = rho.matrix();
    let mut e = DMatrix::zeros(4, 4);
    for i in [0, 3] {
        for j in [0, 3] {
            e[(i, j)] = m[(i, j)];
        }
    }
    let tr = (m[(0, 0)] + m[(3, 3)]).re;
    (DensityMatrix::new(vec![2, 2], e / c(tr)), 1.0 - tr)
}

fn criterion_5() -> Outcome {
    let alpha = 300.0;
    let theta = PI / 300.0;
    let d = [c(FRAC_1_SQRT_2); 2];
    let mut notes = Vec::new();
    for eta in [0.05, 0.1, 0.3] {
        let mut s = CoherentBranchState::new();
        let a = lib(s.add_qubit(d))?;
        let b = lib(s.add_qubit(d))?;
        let gate = lib(ParityGate::new(ParityGateConfig::new(alpha, theta).with_eta(eta)))?;
        let (out, post) = lib(lib(gate.prepare(&s, a, b))?.condition(OutcomeValue::PhotonCount(0)))?;
        let (rho, leak) = even_block(&lib(post.reduced_density_matrix(&[a, b]))?);
        let leak_want = analytics::parity_misclass(alpha, theta, eta);
        ensure(
            (leak - leak_want / (1.0 + leak_want)).abs() <= 1e-9 && (out.wrong_parity_weight - leak).abs() <= 1e-12,
            format!("eta {eta}: odd weight {leak:.3e}, misread-odd prediction {leak_want:.3e}"),
        )?;
        let lp = lib(loss_params(eta, alpha, theta))?;
        let mut ev = rho.eigenvalues();
        ev.sort_by(|x, y| y.total_cmp(x));
        ensure(
            (ev[0] - lp.lambda_plus).abs() <= 1e-10 && (ev[1] - lp.lambda_minus).abs() <= 1e-10,
            format!("eta {eta}: eigenvalues {:?} vs {} {}", &ev[..2], lp.lambda_plus, lp.lambda_minus),
        )?;
        let pred = lib(predicted_mixture(d, d, eta, alpha, theta, Parity::Even))?;
        let diff = rho.max_abs_diff(&pred);
        ensure(diff <= 1e-10, format!("eta {eta}: entrywise {diff:.2e}"))?;
        let conc = lib(concurrence(&rho))?;
        ensure((conc - (-lp.gamma).exp()).abs() <= 1e-10, format!("eta {eta}: concurrence {conc} vs {}", (-lp.gamma).exp()))?;
        notes.push(format!("eta={eta}: C={conc:.10} |d|={diff:.1e} odd={leak:.1e}"));
    }
    Ok(notes.join("; "))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let cfg = ideal();
    let one = c(1.0);
    let zero = c(0.0);
    let h = c(FRAC_1_SQRT_2);
    let inputs: [([Complex64; 2], [Complex64; 2]); 5] = [
        ([one, zero], [one, zero]),
        ([one, zero], [zero, one]),
        ([zero, one], [one, zero]),
        ([zero, one], [zero, one]),
        ([h, h], [one, zero]),
    ];
    let probe = [Complex64::new(0.3, 0.1), Complex64::new(-0.5, 0.2), Complex64::new(0.4, -0.3), Complex64::new(0.2, 0.55)];
    let rows = lib(cnot_enumeration(&cfg, probe, 1e-8))?;
    let verified = rows.iter().filter(|r| r.passes(1e-8)).count();
    ensure(rows.len() == 16 && verified == 16, format!("enumeration {verified}/{}", rows.len()))?;

    let mut rng = ChaCha20Rng::seed_from_u64(600);
    let mut worst: f64 = 1.0;
    let mut bell_worst: f64 = 1.0;
    for k in 0..1000 {
        let (ca, ta) = inputs[k % inputs.len()];
        let mut s = CoherentBranchState::new();
        let cq = lib(s.add_qubit(ca))?;
        let tq = lib(s.add_qubit(ta))?;
        let out = lib(cnot(&s, cq, tq, &cfg, &mut rng))?;
        ensure(!out.failed, "gate reported failure")?;
        let want = cnot_target([ca[0] * ta[0], ca[0] * ta[1], ca[1] * ta[0], ca[1] * ta[1]]);
        let f = lib(fidelity(&lib(out.state.reduced_density_matrix(&[cq, tq]))?, &want))?;
        ensure(f >= 1.0 - 1e-8, format!("run {k}: fidelity {f}"))?;
        worst = worst.min(f);
        if k % inputs.len() == 4 {
            bell_worst = bell_worst.min(lib(fidelity(&lib(out.state.reduced_density_matrix(&[cq, tq]))?, &BellIndex::PhiPlus.amplitudes()))?);
        }
    }
    ensure(bell_worst >= 1.0 - 1e-8, format!("Bell output fidelity {bell_worst}"))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs <= 60.0, format!("took {secs:.1} s"))?;
    Ok(format!("16/16 table entries, 1000 runs min fidelity 1-{:.1e}, Bell 1-{:.1e} [{secs:.2} s]", 1.0 - worst, 1.0 - bell_worst))
}

fn criterion_7() -> Outcome {
    let cfg = ideal();
    let mut signatures = Vec::new();
    let mut worst: f64 = 1.0;
    for (i, input) in BellIndex::ALL.into_iter().enumerate() {
        let mut sig = None;
        for seed in 0..25 {
            let mut rng = ChaCha20Rng::seed_from_u64(700 + 100 * i as u64 + seed);
            let mut s = CoherentBranchState::new();
            let q = lib(s.add_qubits(2, &input.amplitudes()))?;
            let m = lib(bell_measurement(&s, q[0], q[1], &cfg, &mut rng))?;
            let pair = (m.first.parity, m.second.as_ref().map(|o| o.parity));
            ensure(sig.is_none() || sig == Some(pair), format!("{} gave two signatures", input.name()))?;
            sig = Some(pair);
            ensure(m.index == Some(input), format!("{} identified as {:?}", input.name(), m.index))?;
            let f = lib(fidelity(&lib(m.state.reduced_density_matrix(&q))?, &input.amplitudes()))?;
            ensure(f >= 1.0 - 1e-8, format!("{}: fidelity {f}", input.name()))?;
            worst = worst.min(f);
        }
        signatures.push(sig.unwrap());
    }
    let mut distinct = signatures.clone();
    distinct.sort_by_key(|(a, b)| (a.bit(), b.and_then(Parity::bit)));
    distinct.dedup();
    ensure(distinct.len() == 4, "signatures are not distinct")?;
    Ok(format!("4 distinct signatures over 100 runs, min fidelity 1-{:.1e}", 1.0 - worst))
}

fn criterion_8() -> Outcome {
    let cfg = ideal();
    let mut seen = [false; 2];
    let mut worst: f64 = 0.0;
    for seed in 800..840 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut s = CoherentBranchState::new();
        let c1 = lib(Cluster::linear(&mut s, 2))?;
        let c2 = lib(Cluster::linear(&mut s, 2))?;
        let q: Vec<_> = c1.qubits().into_iter().chain(c2.qubits()).collect();
        let mut cluster = c1.union(c2);
        let r = lib(fuse_clusters(&mut s, &mut cluster, q[1], q[2], &cfg, &mut rng))?;
        ensure(r.fused, "fusion did not complete")?;
        seen[r.outcome.parity.bit().unwrap() as usize] = true;
        for v in lib(stabilizer_expectations(&s, &cluster))? {
            worst = worst.max((v - 1.0).abs());
        }
    }
    ensure(seen[0] && seen[1], format!("outcomes seen even={} odd={}", seen[0], seen[1]))?;
    ensure(worst <= 1e-8, format!("stabilizer deviation {worst:.2e}"))?;
    Ok(format!("both outcomes, max |<S>-1| {worst:.1e}"))
}

fn criterion_9() -> Outcome {
    let mut n = 0;
    let mut worst_fid: f64 = 0.0;
    let mut worst_point: f64 = 0.0;
    for alpha in [0.5, 1.0, 2.0, 3.0] {
        for theta in [0.05, 0.3, 1.0, 2.5] {
            for eta in [0.0, 0.1, 0.3] {
                for check in lib(equivalence_checks(alpha, theta, eta))? {
                    ensure(check.passed(), format!("{} = {:.2e} at ({alpha}, {theta}, {eta})", check.name, check.value))?;
                    if check.tolerance == kerrbus::oracle::POINTWISE_TOLERANCE {
                        worst_point = worst_point.max(check.value);
                    } else {
                        worst_fid = worst_fid.max(check.value);
                    }
                    n += 1;
                }
            }
        }
    }
    let (alpha, theta) = (2.0, 0.3);
    let phase = lib(displacement_phase(alpha, theta))?;
    let plus = alpha * alpha * theta.sin();
    ensure((phase - plus).abs() <= 1e-8, format!("displacement phase {phase} is not +{plus}"))?;
    Ok(format!("{n} checks, worst 1-F {worst_fid:.1e}, worst pointwise {worst_point:.1e}; displacement phase is +alpha^2 sin(theta)"))
}

fn criterion_10() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_kerrbus");
    let cases: Vec<Vec<&str>> = vec![
        vec!["parity", "--alpha", "314.159", "--theta", "0.01", "--trials", "100000", "--seed", "7"],
        vec!["detector", "--trials", "20000", "--seed", "3"],
        vec!["source", "--alpha-a", "1.0", "--trials", "20000"],
        vec!["parity-lossy", "--trials", "20000", "--measurement", "homodyne"],
        vec!["cnot", "--trials", "100", "--seed", "9"],
        vec!["bellmeas", "--trials", "100"],
        vec!["fusion", "--trials", "100"],
        vec!["oracle-check", "--alpha", "2", "--theta", "0.3"],
        vec!["sweep", "--sweep", "alpha_sin_theta=1,2,3,3.14159,4", "--target", "detector", "--trials", "5000"],
    ];
    for args in &cases {
        let mut outputs = Vec::new();
        for threads in ["1", "3"] {
            let out = Command::new(bin)
                .args(args)
                .env("RAYON_NUM_THREADS", threads)
                .output()
                .map_err(|e| e.to_string())?;
            ensure(out.status.success(), format!("{args:?} exited {:?}", out.status.code()))?;
            outputs.push(out.stdout);
        }
        ensure(outputs[0] == outputs[1], format!("{args:?} output differs between runs"))?;
    }
    Ok(format!("{} invocations byte-identical across repeated runs and thread counts", cases.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("detector error law", criterion_1),
        ("source law", criterion_2),
        ("parity-gate conditioning", criterion_3),
        ("parity misclassification", criterion_4),
        ("loss mixing", criterion_5),
        ("CNOT", criterion_6),
        ("Bell measurement", criterion_7),
        ("fusion", criterion_8),
        ("oracle equivalence", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
