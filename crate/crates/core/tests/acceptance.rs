//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use randao_lab::adversary::enumerate_strategies;
use randao_lab::field::{Field, SharePoint};
use randao_lab::harness::cli::cli_main;
use randao_lab::harness::trial::TrialSetup;
use randao_lab::harness::{
    run_classic_trials, run_sss, run_sss_trials, BalanceModel, Protocol, ScenarioConfig,
};
use randao_lab::harness::metrics::{summarize_classic, summarize_sss};
use randao_lab::protocol_sss::{recover_all, run_reveal_phase, Distribution, SecurityCase};
use randao_lab::randao::{
    select_proposers, EpochState, Registry, Seed, Validator, MAX_EFFECTIVE_BALANCE,
    SLOTS_PER_EPOCH,
};
use randao_lab::sss::{self, Secret, SssConfig};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn check_runtime(v: Verdict, elapsed: Duration, limit: Option<Duration>) -> Verdict {
    match limit {
        Some(limit) if elapsed > limit => verdict(
            false,
            format!("{}; runtime {:.1}s exceeds {}s", v.detail, elapsed.as_secs_f64(), limit.as_secs()),
        ),
        _ => v,
    }
}

fn base(protocol: Protocol) -> ScenarioConfig {
    ScenarioConfig {
        validator_count: 200,
        balance_model: BalanceModel::Uniform,
        attacker_stake_fraction: 0.3,
        protocol,
        epochs: 10_000,
        rng_seed: 20_240_917,
        ..ScenarioConfig::default()
    }
}

// 1. Shamir correctness.
fn shamir_correctness() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let (mut subsets, mut failures) = (0u64, 0u64);
    for _ in 0..1000 {
        let m = rng.gen_range(1..=31usize);
        let n = rng.gen_range(1..=m);
        let cfg = SssConfig::new(n, m).unwrap();
        let secret = Secret(rng.gen());
        let shares = sss::split(&secret, &cfg, &mut rng).unwrap();
        let picks: Vec<Vec<usize>> = if m <= 6 {
            (0u32..1 << m)
                .filter(|mask| mask.count_ones() as usize == n)
                .map(|mask| (0..m).filter(|i| mask >> i & 1 == 1).collect())
                .collect()
        } else {
            (0..24).map(|_| sample(&mut rng, m, n).into_vec()).collect()
        };
        for pick in picks {
            let subset: Vec<SharePoint> = pick.iter().map(|&i| shares[i].clone()).collect();
            subsets += 1;
            if sss::recover(&subset, &cfg).ok() != Some(secret) {
                failures += 1;
            }
        }
    }
    verdict(
        failures == 0,
        format!("1000 random (secret, n, m) cases, {subsets} n-subsets, {failures} failures"),
    )
}

// 2. Perfect secrecy over GF(251).
fn perfect_secrecy() -> Verdict {
    let field = Field::small(251).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let (mut probes, mut rejected, mut control_ok) = (0u64, 0u64, true);
    for n in [2usize, 3] {
        let cfg = SssConfig::new(n, 5).unwrap();
        for _ in 0..4 {
            let secret = field.from_u64(rng.gen_range(0..251));
            let shares = sss::split_element(&field, &secret, &cfg, &mut rng).unwrap();
            let seen: Vec<SharePoint> = sample(&mut rng, 5, n - 1)
                .into_iter()
                .map(|i| shares[i].clone())
                .collect();
            for c in 0..251 {
                probes += 1;
                if !sss::secrecy_probe(&field, &seen, &cfg, &field.from_u64(c)).unwrap() {
                    rejected += 1;
                }
            }
            // With n shares the probe must single out the real secret.
            let full = &shares[..n];
            let consistent: Vec<u64> = (0..251)
                .filter(|&c| sss::secrecy_probe(&field, full, &cfg, &field.from_u64(c)).unwrap())
                .collect();
            control_ok &= consistent.len() == 1 && field.from_u64(consistent[0]) == secret;
        }
    }
    verdict(
        rejected == 0 && control_ok,
        format!("{probes} probes with n-1 shares, {rejected} candidates excluded; n-share control singles out the secret: {control_ok}"),
    )
}

// 3. Strategy space size.
fn strategy_space() -> Verdict {
    let mut bad = Vec::new();
    for h in 0..=10usize {
        let all = enumerate_strategies(h, 10).unwrap();
        let masks: BTreeSet<u64> = all.iter().map(|s| s.mask()).collect();
        let ok = all.len() == 1 << h
            && masks.len() == all.len()
            && masks.iter().all(|&m| m < 1 << h)
            && all.iter().all(|s| s.len() == h);
        if !ok {
            bad.push(h);
        }
    }
    verdict(bad.is_empty(), format!("|strategies(h)| = 2^h for h = 0..10, mismatches at {bad:?}"))
}

fn oracle_hash(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// Attacker slots for epoch `epoch + 2` given a final mix, written from the
/// protocol definitions without the library's selection code.
fn oracle_payoff(mix: &[u8; 32], epoch: u64, registry: &Registry, attacker: &BTreeSet<usize>) -> u32 {
    let seed = oracle_hash(&[&[0, 0, 0, 0], &epoch.to_le_bytes(), mix]);
    let n = registry.len() as u64;
    let mut count = 0;
    for slot in 0..32u64 {
        for c in 0u64.. {
            let d = oracle_hash(&[&seed, &slot.to_le_bytes(), &c.to_le_bytes()]);
            let candidate = (u64::from_be_bytes(d[..8].try_into().unwrap()) % n) as usize;
            let balance = registry.validators()[candidate].effective_balance as u128;
            if (d[8] as u128 + 1) * MAX_EFFECTIVE_BALANCE as u128 <= 256 * balance {
                count += u32::from(attacker.contains(&candidate));
                break;
            }
        }
    }
    count
}

fn oracle_reveal(v: &Validator, epoch: u64) -> [u8; 32] {
    oracle_hash(&[&v.secret_key, &epoch.to_le_bytes(), &[2, 0, 0, 0]])
}

/// `E[max of 2^h iid Bin(32, p)]` by summing tail probabilities.
fn expected_max_binomial(h: usize, p: f64) -> f64 {
    let mut pmf = vec![0.0f64; 33];
    for (k, slot) in pmf.iter_mut().enumerate() {
        let mut c = 1.0;
        for i in 0..k {
            c = c * (32 - i) as f64 / (i + 1) as f64;
        }
        *slot = c * p.powi(k as i32) * (1.0 - p).powi(32 - k as i32);
    }
    let draws = 2f64.powi(h as i32);
    let mut cdf = 0.0;
    let mut e = 0.0;
    for k in 1..=32 {
        cdf += pmf[k - 1];
        e += 1.0 - cdf.min(1.0).powf(draws);
    }
    e
}

// 4. Last-revealer bias on classic RANDAO.
fn lra_bias() -> Verdict {
    let cfg = base(Protocol::Classic);
    let trials = run_classic_trials(&cfg).unwrap();
    let report = summarize_classic(&trials);
    let sigma = report.std_error;
    let excess = report.mean_attacker_slots - report.fair_share;
    let biased = excess >= 3.0 * sigma && report.fair_share == 9.6;

    let predicted: f64 = trials
        .iter()
        .map(|t| expected_max_binomial(t.outcome.decision_slots.len(), t.stake_fraction))
        .sum::<f64>()
        / trials.len() as f64;
    let matches_prediction = (report.mean_attacker_slots - predicted).abs() <= 3.0 * sigma;

    let mut audited = 0;
    let mut agree = 0;
    for (i, trial) in trials.iter().enumerate() {
        if audited == 100 {
            break;
        }
        let setup = TrialSetup::new(&cfg, i as u64).unwrap();
        let attacker = setup.attacker.controlled().clone();
        let tail: Vec<usize> = (0..SLOTS_PER_EPOCH)
            .rev()
            .take_while(|&s| attacker.contains(&setup.proposers[s]))
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect();
        if tail.is_empty() {
            continue;
        }
        audited += 1;
        let reveal = |s: usize| oracle_reveal(&setup.registry.validators()[setup.proposers[s]], setup.epoch);
        let mut best: Option<(u32, u64)> = None;
        for mask in 0..1u64 << tail.len() {
            let mut mix = [0u8; 32];
            for s in 0..SLOTS_PER_EPOCH {
                let withheld = tail.iter().position(|&t| t == s).is_some_and(|i| mask >> i & 1 == 1);
                if !withheld {
                    for (m, r) in mix.iter_mut().zip(reveal(s)) {
                        *m ^= r;
                    }
                }
            }
            let payoff = oracle_payoff(&mix, setup.epoch, &setup.registry, &attacker);
            if best.is_none_or(|(p, _)| payoff > p) {
                best = Some((payoff, mask));
            }
        }
        let (payoff, mask) = best.unwrap();
        if trial.outcome.decision_slots == tail
            && trial.outcome.chosen.mask() == mask
            && trial.outcome.payoff == payoff
        {
            agree += 1;
        }
    }
    verdict(
        biased && matches_prediction && audited == 100 && agree == 100,
        format!(
            "mean {:.4} vs fair {} (excess {:.4} = {:.1} sigma, sigma {:.4}); order-statistic prediction {:.4}; argmax agreement {agree}/{audited}",
            report.mean_attacker_slots, report.fair_share, excess, excess / sigma, sigma, predicted
        ),
    )
}

// 5. Prevention under full participation.
fn prevention() -> Verdict {
    let cfg = ScenarioConfig {
        sss_threshold_n: 16,
        participation_rate: 1.0,
        // Bounds the grind in the rare epochs where the flip set is not empty.
        strategy_cap: 12,
        ..base(Protocol::Sss)
    };
    let trials = run_sss_trials(&cfg).unwrap();
    let report = summarize_sss(&trials);
    let nonempty = trials.iter().filter(|t| t.flip_set > 0).count();
    let high_h = trials.iter().filter(|t| t.h >= cfg.sss_threshold_n).count();
    let sigma = report.std_error;
    let within = report.bias_gain.abs() <= 3.0 * sigma;
    let all_prevented = report.case_prevented == cfg.epochs;
    let prevented: Vec<_> = trials.iter().filter(|t| t.case == SecurityCase::Prevented).cloned().collect();
    let sub = summarize_sss(&prevented);
    verdict(
        nonempty == 0 && within && all_prevented,
        format!(
            "non-empty flip sets {nonempty}/{}; epochs with h >= n: {high_h}; bias_gain {:.4} ({:.1} sigma); Prevented {}, Collusion {}, Broken {}; Prevented epochs alone: bias_gain {:.4} ({:.1} sigma)",
            cfg.epochs,
            report.bias_gain,
            report.bias_gain / sigma,
            report.case_prevented,
            report.case_collusion,
            report.case_broken,
            sub.bias_gain,
            sub.bias_gain / sub.std_error
        ),
    )
}

// 6. Breakdown when too few proposers join.
fn breakdown() -> Verdict {
    let none_attacking = ScenarioConfig {
        attacker_stake_fraction: 0.0,
        participation_rate: 0.0,
        epochs: 500,
        ..base(Protocol::Sss)
    };
    let r = run_sss(&none_attacking).unwrap();
    let report_ok = r.recovery_failure_rate == 1.0 && r.case_broken == 500;

    let attacked = ScenarioConfig {
        participation_rate: 0.0,
        epochs: 2000,
        strategy_cap: 12,
        ..base(Protocol::Sss)
    };
    let trials = run_sss_trials(&attacked).unwrap();
    let affected: Vec<_> = trials.iter().filter(|t| t.t < attacked.sss_threshold_n).collect();
    let failed = affected
        .iter()
        .filter(|t| t.unrecoverable == SLOTS_PER_EPOCH && t.broken && t.case == SecurityCase::Broken)
        .count();
    verdict(
        report_ok && !affected.is_empty() && failed == affected.len(),
        format!(
            "no attacker, participation 0: failure rate {}, Broken {}/500; with 30% attacker: {failed}/{} epochs with t < n fully unrecoverable and Broken",
            r.recovery_failure_rate,
            r.case_broken,
            affected.len()
        ),
    )
}

// 7. Collusion once the attacker holds n slots.
fn collusion() -> Verdict {
    let cfg = ScenarioConfig {
        sss_threshold_n: 4,
        participation_rate: 0.1,
        attacker_slots: vec![0, 1, 2, 3],
        strategy_cap: 10,
        epochs: 500,
        ..base(Protocol::Sss)
    };
    let trials = run_sss_trials(&cfg).unwrap();
    let report = summarize_sss(&trials);
    let min_h = trials.iter().map(|t| t.h).min().unwrap();
    let sigma = report.std_error;
    verdict(
        min_h >= 4 && report.bias_gain >= 3.0 * sigma && report.case_collusion == cfg.epochs,
        format!(
            "min h {min_h}; bias_gain {:.4} ({:.1} sigma); Collusion {}/{}",
            report.bias_gain,
            report.bias_gain / sigma,
            report.case_collusion,
            cfg.epochs
        ),
    )
}

// 8. Honest SSS-RANDAO reproduces the classic seed.
fn honest_equivalence() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let size = rng.gen_range(1..=300usize);
        let validators = (0..size)
            .map(|index| Validator {
                index,
                secret_key: rng.gen(),
                effective_balance: rng.gen_range(MAX_EFFECTIVE_BALANCE / 2..=MAX_EFFECTIVE_BALANCE),
            })
            .collect();
        let registry = Registry::new(validators).unwrap();
        let proposers = select_proposers(&Seed(rng.gen()), &registry).unwrap();
        let epoch = rng.gen_range(0..1u64 << 40);
        let n = rng.gen_range(1..=31);
        let cfg = SssConfig::randao(n).unwrap();

        let classic = EpochState::new(epoch, proposers)
            .play(&registry, &[false; SLOTS_PER_EPOCH])
            .unwrap();
        let dist = Distribution::run(epoch, proposers, &registry, &[false; SLOTS_PER_EPOCH], &cfg, &mut rng).unwrap();
        let everyone: BTreeSet<usize> = proposers.iter().copied().collect();
        let state = run_reveal_phase(&dist, &everyone, None);
        if recover_all(&state, &cfg, None).seed != Some(classic) {
            mismatches += 1;
        }
    }
    verdict(mismatches == 0, format!("1000 random honest epochs, {mismatches} seed mismatches"))
}

// 9. Byte-identical outputs, serial and parallel.
fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("grid.toml");
    std::fs::write(
        &config,
        "validator_count = 64\nepochs = 150\nrng_seed = 11\nprotocol = \"sss\"\nparticipation_rate = 0.9\nstrategy_cap = 8\n\n[grid]\nsss_threshold_n = [4, 12]\nattacker_stake_fraction = [0.2, 0.35]\n",
    )
    .unwrap();
    let cfg_arg = config.to_str().unwrap().to_string();
    let runs: Vec<(&str, Vec<String>)> = vec![
        ("simulate classic csv", vec!["simulate", "--protocol", "classic", "--epochs", "400", "--seed", "7", "--format", "csv"].into_iter().map(String::from).collect()),
        ("simulate sss json", vec!["simulate", "--protocol", "sss", "--epochs", "300", "--seed", "7", "--participation", "0.8", "--strategy-cap", "8", "--format", "json"].into_iter().map(String::from).collect()),
        ("sweep csv", vec!["sweep".to_string(), "--config".into(), cfg_arg.clone()]),
    ];
    let mut failures = Vec::new();
    for (name, args) in &runs {
        let mut outputs = Vec::new();
        for (k, threads) in ["1", "4", "1", "3"].iter().enumerate() {
            let out = dir.path().join(format!("{}-{k}.out", name.replace(' ', "_")));
            let mut argv = vec!["randao-lab".to_string()];
            argv.extend(args.iter().cloned());
            argv.extend(["--threads".into(), threads.to_string(), "--out".into(), out.to_str().unwrap().into()]);
            let (mut so, mut se) = (Vec::new(), Vec::new());
            let code = cli_main(argv, &mut so, &mut se);
            if code != 0 {
                failures.push(format!("{name}: exit {code}: {}", String::from_utf8_lossy(&se)));
            }
            outputs.push(std::fs::read(&out).unwrap_or_default());
        }
        if outputs.iter().any(|o| o.is_empty() || *o != outputs[0]) {
            failures.push(format!("{name}: outputs differ"));
        }
    }
    verdict(
        failures.is_empty(),
        format!("{} invocations x 4 runs (1/4/1/3 threads); problems: {failures:?}", runs.len()),
    )
}

// 10. Balance-proportional selection.
fn proportionality() -> Verdict {
    let registry = Registry::new(vec![
        Validator { index: 0, secret_key: [0; 32], effective_balance: 16_000_000_000 },
        Validator { index: 1, secret_key: [1; 32], effective_balance: 32_000_000_000 },
    ])
    .unwrap();
    let mut light = 0u64;
    for i in 0..10_000u64 {
        let seed = Seed(Sha256::digest(i.to_le_bytes()).into());
        light += select_proposers(&seed, &registry).unwrap().iter().filter(|&&p| p == 0).count() as u64;
    }
    let total = 10_000.0 * SLOTS_PER_EPOCH as f64;
    let freq = light as f64 / total;
    let sigma = (1.0 / 3.0 * 2.0 / 3.0 / total).sqrt();
    let z = (freq - 1.0 / 3.0) / sigma;
    verdict(
        z.abs() <= 3.0,
        format!("light validator share {freq:.5} vs 1/3 over {total} slots ({z:+.2} sigma)"),
    )
}

type Criterion = (&'static str, fn() -> Verdict, Option<Duration>);

fn main() {
    let minute = Duration::from_secs(60);
    let criteria: [Criterion; 10] = [
        ("Shamir correctness", shamir_correctness, Some(minute)),
        ("perfect secrecy at small scale", perfect_secrecy, Some(minute)),
        ("2^h strategy space", strategy_space, None),
        ("last-revealer bias reproduced", lra_bias, Some(5 * minute)),
        ("prevention with full participation", prevention, Some(5 * minute)),
        ("breakdown when t < n", breakdown, None),
        ("collusion when h >= n", collusion, Some(5 * minute)),
        ("equivalence under honesty", honest_equivalence, None),
        ("determinism, serial vs parallel", determinism, None),
        ("selection proportionality", proportionality, None),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let number = i + 1;
        if !filter.is_empty() && !filter.contains(&number) {
            continue;
        }
        let start = Instant::now();
        let v = check_runtime(run(), start.elapsed(), *limit);
        println!(
            "criterion {number:>2} {} {name}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
