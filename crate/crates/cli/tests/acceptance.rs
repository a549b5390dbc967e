//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Every check is exact except the wall-clock budget of criterion 1. A
//! criterion may fail only in the documented way (`EXPECTED_FAILURES`); any
//! other outcome makes this target exit non-zero.

use heegner_core::arith::{self, kronecker};
use heegner_core::binary_qf::{self, OrderParams};
use heegner_core::genus::{self, gross_genus, GenusRecord};
use heegner_core::measures;
use heegner_core::rational::{frac, to_ratio_string};
use heegner_core::surjectivity::{self, point_count_ap, reference_curve, EigenvalueTable};
use heegner_core::Execution;
use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

const ELLS: [u64; 3] = [11, 17, 19];
/// Criterion 1: total wall-clock budget for the three searches.
const SEARCH_BUDGET: Duration = Duration::from_secs(600);
/// Criterion 3: `|D| <= 300`, `c <= 12`.
const CLASSNUM_D: u64 = 300;
const CLASSNUM_C: u64 = 12;
/// Criteria 4 and 6: `-100 <= D < 0`, `c <= 12`.
const GRID_D: u64 = 100;
const GRID_C: u64 = 12;
/// Criterion 5: point-count comparison for ℓ = 11 up to 50, Hasse and `D₀` independence up to 100.
const EIGEN_ORACLE_P: u64 = 50;
const EIGEN_P: u64 = 100;
/// Criterion 6: number of recursion triples.
const RECURSION_TRIPLES: usize = 20;
/// Criterion 7: `ℓ = 11`, `D = −3`, inert primes `c <= 200`; `c = p^k` for `k <= 4`.
const DECAY_C: u64 = 200;
const DECAY_PRIMES: [u64; 2] = [2, 5];
const DECAY_K: u32 = 4;
/// Criterion 8: `n <= 5000`.
const THETA_BOUND: u64 = 5000;

/// Criteria known to fail, with the reason recorded in the decisions ledger.
const EXPECTED_FAILURES: [(u32, &str); 2] = [
    (1, "ell = 17 and 19 give 223/12390 and 96/2730 with the intrinsic thresholds m_s = 3 and 2"),
    (7, "tv along 2^k is 3/5, 2/5, 1/10, 1/10, 3/20: it rises at k = 4"),
];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut pass = true;
    for ell in ELLS {
        let out = Command::new(env!("CARGO_BIN_EXE_heegner"))
            .args(["surject", "--ell", &ell.to_string()])
            .output()
            .expect("run heegner");
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).expect("json report");
        let published = surjectivity::published(ell).expect("published");
        let (count, max) = (v["count"].as_u64().unwrap(), v["max"].as_u64().unwrap());
        let ok = count == published.count as u64 && max == published.max;
        let stderr = String::from_utf8_lossy(&out.stderr);
        let code = out.status.code();
        // a mismatch must exit 2 and print the assumptions record
        let honest = if ok { code == Some(0) } else { code == Some(2) && stderr.contains("sign_convention") };
        pass &= ok && honest;
        notes.push(format!(
            "ell={ell}: {count}/{max} vs {}/{} (exit {:?}{})",
            published.count,
            published.max,
            code,
            if !ok && honest { ", assumptions emitted" } else { "" }
        ));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < SEARCH_BUDGET;
    outcome(pass, format!("{}; {:.1}s", notes.join("; "), elapsed.as_secs_f64()))
}

fn criterion_2(genera: &[GenusRecord]) -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for (ell, g) in ELLS.iter().zip(genera) {
        let det = 4 * (*ell as i64).pow(2);
        let ok = g.len() == 2
            && g.disc == det
            && g.classes.iter().all(|c| c.gram.disc() == det)
            && g.mass == frac(*ell as i64 - 1, 24);
        pass &= ok;
        notes.push(format!("ell={ell}: {} classes, mass {}", g.len(), to_ratio_string(&g.mass)));
    }
    outcome(pass, notes.join("; "))
}

fn criterion_3() -> Outcome {
    let mut cases = 0;
    let mut bad = Vec::new();
    for d in arith::negative_fundamentals(CLASSNUM_D) {
        for c in 1..=CLASSNUM_C {
            let p = OrderParams::new(d, c).unwrap();
            cases += 1;
            let (formula, enumerated) =
                (binary_qf::class_number_order(&p), binary_qf::class_number(p.discriminant()).unwrap());
            if formula != enumerated {
                bad.push((d, c, formula, enumerated));
            }
        }
    }
    outcome(bad.is_empty(), format!("{cases} cases, {} mismatches {:?}", bad.len(), &bad[..bad.len().min(3)]))
}

/// `(ℓ, D, c)` with `D` fundamental, `−100 <= D < 0`, `ℓ` inert, `(c, ℓ) = 1`.
fn grid() -> Vec<(usize, i64, u64)> {
    let mut out = Vec::new();
    for (i, &ell) in ELLS.iter().enumerate() {
        for d in arith::negative_fundamentals(GRID_D) {
            if kronecker(d, ell as i64) != -1 {
                continue;
            }
            for c in (1..=GRID_C).filter(|c| c % ell != 0) {
                out.push((i, d, c));
            }
        }
    }
    out
}

fn criterion_4(genera: &[GenusRecord]) -> Outcome {
    let grid = grid();
    let bad: Vec<_> = grid
        .iter()
        .filter(|&&(i, d, c)| {
            let p = OrderParams::new(d, c).unwrap();
            let lhs = genus::weighted_rep_sum(&genera[i], p.dc(), true).unwrap();
            lhs != binary_qf::gamma_ratio(&p)
        })
        .collect();
    outcome(bad.is_empty(), format!("{} (ell, D, c) cases, {} mismatches", grid.len(), bad.len()))
}

fn criterion_5(genera: &[GenusRecord]) -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for (ell, g) in ELLS.iter().zip(genera) {
        let ell = *ell;
        let primes: Vec<u64> = arith::primes_up_to(EIGEN_P).into_iter().filter(|&p| p != ell).collect();
        let mut table = EigenvalueTable::from_theta(g, ell).unwrap();
        if let Err(e) = table.ensure_all(&primes, Execution::default()) {
            pass = false;
            notes.push(format!("ell={ell}: {e}"));
            continue;
        }
        let curve = reference_curve(ell).unwrap();
        let oracle_bad: Vec<u64> = primes
            .iter()
            .copied()
            .filter(|&p| ell == 11 && p <= EIGEN_ORACLE_P && table.get(p) != Some(point_count_ap(curve, p)))
            .collect();
        let hasse_bad: Vec<u64> =
            primes.iter().copied().filter(|&p| table.get(p).map_or(true, |a| (a * a) as u64 > 4 * p)).collect();
        // every other usable D₀ with |D₀| <= 40, both classes
        let aux: Vec<i64> =
            arith::negative_fundamentals(40).into_iter().filter(|&d| kronecker(d, ell as i64) == -1).collect();
        let mut derivations = 0;
        let mut indep_bad = Vec::new();
        for &p in &primes {
            for &d0 in &aux {
                for class in 0..2 {
                    if let Ok(a) = surjectivity::derive_eigenvalue_with(g, ell, p, d0, class) {
                        derivations += 1;
                        if Some(a) != table.get(p) {
                            indep_bad.push((p, d0, class));
                        }
                    }
                }
            }
        }
        pass &= oracle_bad.is_empty() && hasse_bad.is_empty() && indep_bad.is_empty();
        notes.push(format!(
            "ell={ell}: {} primes, oracle mismatches {:?}, Hasse violations {:?}, {derivations} D0 derivations with {} disagreements",
            primes.len(),
            oracle_bad,
            hasse_bad,
            indep_bad.len()
        ));
    }
    outcome(pass, notes.join("; "))
}

fn criterion_6(genera: &[GenusRecord]) -> Outcome {
    let grid = grid();
    let sum_bad = grid
        .iter()
        .filter(|&&(i, d, c)| {
            measures::mu_heegner(&genera[i], ELLS[i], &OrderParams::new(d, c).unwrap(), 1)
                .map_or(true, |m| m.total() != frac(1, 1))
        })
        .count();
    let mut tables: Vec<EigenvalueTable> =
        ELLS.iter().zip(genera).map(|(ell, g)| EigenvalueTable::from_theta(g, *ell).unwrap()).collect();
    let mut per_ell = [0usize; 3];
    let mut rec_bad = Vec::new();
    for &(i, d, c) in &grid {
        // spread the triples over the three levels: 7 + 7 + 6
        let quota = RECURSION_TRIPLES / ELLS.len() + usize::from(i < RECURSION_TRIPLES % ELLS.len());
        if per_ell[i] >= quota {
            continue;
        }
        let ell = ELLS[i];
        let Some(r) = arith::primes_up_to(50)
            .into_iter()
            .find(|&r| kronecker(d, r as i64) == -1 && arith::gcd(r, c * ell) == 1)
        else {
            continue;
        };
        let a_r = tables[i].ensure(r).unwrap();
        let check = measures::recursion_check(&genera[i], ell, &OrderParams::new(d, c).unwrap(), r, a_r).unwrap();
        per_ell[i] += 1;
        if !check.holds {
            rec_bad.push((ell, d, c, r));
        }
    }
    let triples: usize = per_ell.iter().sum();
    outcome(
        sum_bad == 0 && rec_bad.is_empty() && triples == RECURSION_TRIPLES,
        format!(
            "{} measures, {sum_bad} not summing to 1; {triples} recursion triples, {} failures",
            grid.len(),
            rec_bad.len()
        ),
    )
}

fn criterion_7(genus11: &GenusRecord) -> Outcome {
    let d = -3;
    let inert: Vec<u64> = arith::primes_up_to(DECAY_C)
        .into_iter()
        .filter(|&p| p != 11 && kronecker(d, p as i64) == -1)
        .collect();
    let mut conductors = vec![1];
    conductors.extend(&inert);
    let series = measures::tv_series(genus11, 11, d, &conductors, Execution::default()).unwrap();
    let base = series[0].1.clone();
    let decay_bad: Vec<u64> = series[1..]
        .iter()
        .filter(|(c, tv)| !measures::within_ramanujan_decay(tv, &base, *c))
        .map(|(c, _)| *c)
        .collect();
    let mut trend = Vec::new();
    let mut monotone = true;
    for p in DECAY_PRIMES {
        let cs: Vec<u64> = (0..=DECAY_K).map(|k| p.pow(k)).collect();
        let tv = measures::tv_series(genus11, 11, d, &cs, Execution::default()).unwrap();
        let ok = tv.windows(2).all(|w| w[1].1 <= w[0].1);
        monotone &= ok;
        trend.push(format!(
            "p={p}: [{}] {}",
            tv.iter().map(|(_, t)| to_ratio_string(t)).collect::<Vec<_>>().join(", "),
            if ok { "non-increasing" } else { "NOT monotone" }
        ));
    }
    outcome(
        decay_bad.is_empty() && monotone,
        format!(
            "decay bound at {} inert primes, violations {:?}; {}",
            inert.len(),
            decay_bad,
            trend.join("; ")
        ),
    )
}

fn criterion_8(genera: &[GenusRecord]) -> Outcome {
    let mut bad = Vec::new();
    let mut forms = 0;
    for g in genera {
        for c in &g.classes {
            forms += 1;
            let theta = c.gram.theta_coeffs_with(THETA_BOUND, Execution::default()).unwrap();
            bad.extend(theta.iter().enumerate().filter(|&(n, &r)| r != 0 && !matches!(n % 4, 0 | 3)).map(|(n, _)| n));
        }
    }
    outcome(bad.is_empty(), format!("{forms} forms, n <= {THETA_BOUND}, {} off-support coefficients", bad.len()))
}

fn main() {
    let genera: Vec<GenusRecord> = ELLS.iter().map(|&ell| gross_genus(ell, 1).expect("Gross genus")).collect();
    let runs: Vec<(u32, &str, Box<dyn Fn() -> Outcome>)> = vec![
        (1, "published surjectivity counts", Box::new(criterion_1)),
        (2, "genus structure", Box::new(|| criterion_2(&genera))),
        (3, "class number oracle", Box::new(criterion_3)),
        (4, "Jones identity", Box::new(|| criterion_4(&genera))),
        (5, "eigenvalue dual derivation", Box::new(|| criterion_5(&genera))),
        (6, "measure identities", Box::new(|| criterion_6(&genera))),
        (7, "convergence trend", Box::new(|| criterion_7(&genera[0]))),
        (8, "theta support", Box::new(|| criterion_8(&genera))),
    ];
    let mut unexpected = Vec::new();
    let mut out = std::io::stdout().lock();
    for (id, name, run) in runs {
        let o = run();
        let _ = writeln!(out, "criterion {id} [{name}]: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        let expected_fail = EXPECTED_FAILURES.iter().find(|(i, _)| *i == id);
        match (o.pass, expected_fail) {
            (false, Some((_, why))) => {
                let _ = writeln!(out, "  known deviation: {why}");
            }
            (false, None) => unexpected.push(format!("criterion {id} failed")),
            (true, Some(_)) => unexpected.push(format!("criterion {id} passed; update EXPECTED_FAILURES")),
            (true, None) => {}
        }
    }
    let _ = out.flush();
    if !unexpected.is_empty() {
        eprintln!("unexpected acceptance outcomes: {unexpected:?}");
        std::process::exit(1);
    }
}
