//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_RED` are evaluated in full and reported, but do
//! not fail the run; each is unattainable as stated (see the README section
//! "Known red acceptance criteria"). Any other failure exits nonzero.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use orthant_cli::{parse_config, run, Command};
use orthant_core::cone::{Eta, Window};
use orthant_core::estimate::{
    beta_sample, estimate_gamma, estimate_ptilde, estimate_theta, fit_decay, leftmost_coupling, theta_sample,
    trial_field, WindowPolicy,
};
use orthant_core::explore::{run_tree, TreeParams};
use orthant_core::lattice::{SiteField, Vertex};
use orthant_core::oracle::{exact_revealments_by_tree, DEFAULT_SITE_CAP};
use orthant_core::osss::{ExactInstance, RevealmentMethod};
use orthant_core::reach::escapes_cone;
use orthant_core::walk::{ballisticity_report, WalkMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KNOWN_RED: &[u32] = &[7, 10];

fn ratio(j: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(j), BigInt::from(den))
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn c1_endpoints() -> Outcome {
    let mut bad = Vec::new();
    for dim in [2usize, 3] {
        // r = 4nd; endpoint configurations are constant, so few trials suffice.
        let c = estimate_theta(
            dim,
            1,
            &[0.0, 1.0],
            &[1, 2, 4],
            Eta::zero(),
            WindowPolicy::Scaled(4 * dim as u32),
            25,
        );
        for n in [1i64, 2, 4] {
            let at0 = c.cell(0.0, n).unwrap();
            let at1 = c.cell(1.0, n).unwrap();
            if at0.successes != at0.trials || at1.successes != 0 {
                bad.push(format!(
                    "d={dim} n={n}: θ̂(0)={} θ̂(1)={}",
                    at0.estimate(),
                    at1.estimate()
                ));
            }
        }
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            "θ̂(0)=1, θ̂(1)=0 for all 12 cells".into()
        } else {
            bad.join("; ")
        },
    )
}

fn c2_oracle(inst: &ExactInstance, built_in: Duration) -> Outcome {
    let ps = [0.2, 0.5, 0.8];
    let trials = 100_000;
    let c = estimate_theta(2, 2, &ps, &[1], Eta::zero(), WindowPolicy::Fixed(2), trials);
    let mut pass = true;
    let mut parts = Vec::new();
    for p in ps {
        let truth = inst.theta_n().eval(p);
        let est = c.cell(p, 1).unwrap().estimate();
        let sigma = (truth * (1.0 - truth) / trials as f64).sqrt();
        let z = (est - truth) / sigma;
        pass &= z.abs() < 4.0;
        parts.push(format!("p={p}: θ={truth:.5} θ̂={est:.5} z={z:+.2}"));
    }
    // The sampling budget is enforced by the caller; enumeration has its own.
    let enum_ok = built_in < Duration::from_secs(300);
    parts.push(format!("enumeration {built_in:.1?}"));
    outcome(pass && enum_ok, parts.join(", "))
}

fn c3_russo(inst: &ExactInstance) -> Outcome {
    let rep = inst.russo_report(&[0.25, 0.5, 0.75]);
    outcome(
        rep.max_discrepancy < 1e-9 && rep.identical_polynomials,
        format!(
            "max |−θ′ − ΣInf| = {:.2e}, polynomials identical: {}",
            rep.max_discrepancy, rep.identical_polynomials
        ),
    )
}

fn c4_osss(inst: &ExactInstance) -> Outcome {
    let mismatches = inst.tree_mismatches();
    let by_tree = exact_revealments_by_tree(2, 1, Eta::zero(), Window::new(2), 1, DEFAULT_SITE_CAP).unwrap();
    let agree = by_tree.per_vertex == inst.revealments[0].per_vertex;
    let mut failures = Vec::new();
    let mut min_slack = f64::INFINITY;
    for j in 0..=20 {
        let ok = inst.osss_holds_exact(&ratio(j, 20));
        if !ok.all() {
            failures.push(j);
        }
        let rep = inst.osss_report(j as f64 / 20.0);
        min_slack = min_slack.min(rep.summed_slack);
    }
    outcome(
        mismatches == 0 && agree && failures.is_empty(),
        format!(
            "2^25 tree runs, {mismatches} outcome mismatches, DFS cross-check {}, exact inequalities hold at {}/21 points, min k-summed slack {min_slack:.3e}",
            if agree { "equal" } else { "DIFFERENT" },
            21 - failures.len()
        ),
    )
}

fn c5_determination() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut wrong = 0;
    let mut escaped = 0;
    let total = 10_000;
    for _ in 0..total {
        let seed: u64 = rng.gen();
        let p: f64 = rng.gen();
        let n: i64 = rng.gen_range(1..=6);
        let k: i64 = rng.gen_range(1..=n);
        let r: u32 = rng.gen_range(n as u32..=3 * n as u32);
        let eta = Eta::new(rng.gen_range(0..=4), 4).unwrap();
        let sites = SiteField::new(seed, 2).at(p);
        let t = run_tree(&sites, TreeParams::new(2, eta, n, k, Window::new(r))).unwrap();
        let direct = escapes_cone(&sites, n, eta, Window::new(r));
        escaped += u64::from(direct);
        if t.outcome.escaped() != direct {
            wrong += 1;
        }
    }
    outcome(
        wrong == 0,
        format!("{wrong} disagreements in {total} triples ({escaped} escapes)"),
    )
}

fn c6_differential(inst: &ExactInstance) -> Outcome {
    let rep = inst.differential_check(21);
    let tight = rep
        .rows
        .iter()
        .filter(|r| r.rhs > 0.0)
        .map(|r| r.lhs / r.rhs)
        .fold(f64::INFINITY, f64::min);
    outcome(
        rep.all_hold,
        format!(
            "{}/21 grid points hold exactly, smallest lhs/rhs ratio {tight:.1}",
            rep.rows.iter().filter(|r| r.holds).count()
        ),
    )
}

fn c7_decay() -> Outcome {
    let ns: Vec<i64> = (2..=12).collect();
    let eta = Eta::new(1, 10).unwrap();
    let c = estimate_theta(2, 7, &[0.9, 0.2], &ns, eta, WindowPolicy::Scaled(8), 10_000);
    let counts: Vec<String> = c.level(0.9).iter().map(|c| c.successes.to_string()).collect();
    let high = fit_decay(&c, 0.9, 1);
    let low = fit_decay(&c, 0.2, 1);
    let low_flagged = match &low {
        Ok(f) => !f.decaying,
        Err(_) => true,
    };
    let (high_ok, high_txt) = match &high {
        Ok(f) => (f.decaying, format!("c_p={:.3}±{:.3} R²={:.3}", f.c_p, f.stderr, f.r2)),
        Err(e) => (false, format!("fit error: {e}")),
    };
    outcome(
        high_ok && low_flagged,
        format!(
            "p=0.9 successes per n=2..12 [{}]: {high_txt}; p=0.2 flagged non-decaying: {low_flagged}",
            counts.join(",")
        ),
    )
}

fn c8_monotone() -> Outcome {
    let ps: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let ns: Vec<i64> = (1..=6).collect();
    let mut violations = 0u64;
    for seed in 0..10_000u64 {
        let eta = Eta::new((seed % 3) as i64, 10).unwrap();
        let s = theta_sample(&trial_field(8, 2, seed), &ps, &ns, eta, WindowPolicy::Fixed(12));
        for i in 0..ps.len() {
            for j in 0..ns.len() {
                if i > 0 && s[i][j].0 && !s[i - 1][j].0 {
                    violations += 1;
                }
                if j > 0 && s[i][j].0 && !s[i][j - 1].0 {
                    violations += 1;
                }
            }
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations over 10^4 seeds × 11 p × 6 n"),
    )
}

fn random_u(rng: &mut ChaCha8Rng) -> Vertex {
    Vertex::new(&[rng.gen_range(-3..=3), rng.gen_range(-3..=3)])
}

fn c9_shape() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut notes = Vec::new();
    let mut pass = true;
    // p = 1: closed form.
    let mut exact_ok = 0;
    for _ in 0..10 {
        let u = random_u(&mut rng);
        let e = estimate_gamma(91, 1.0, &u, &[4, 8], WindowPolicy::Scaled(8), 4).unwrap();
        if e.gamma_hat == -(*u.coords().iter().min().unwrap() as f64) {
            exact_ok += 1;
        }
    }
    pass &= exact_ok == 10;
    notes.push(format!("p=1 closed form {exact_ok}/10"));

    let p = 0.9;
    let ns = [4i64, 8];
    let policy = WindowPolicy::Scaled(16);
    let trials = 400;
    let gamma = |u: &Vertex| estimate_gamma(92, p, u, &ns, policy, trials);
    // Permutation symmetry.
    let mut sym_bad = 0;
    let mut sym_err = 0;
    for _ in 0..10 {
        let u = random_u(&mut rng);
        let swapped = Vertex::new(&[u.coord(1), u.coord(0)]);
        match (gamma(&u), gamma(&swapped)) {
            (Ok(a), Ok(b)) => {
                let s = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
                if (a.gamma_hat - b.gamma_hat).abs() > 3.0 * s {
                    sym_bad += 1;
                }
            }
            _ => sym_err += 1,
        }
    }
    pass &= sym_bad == 0 && sym_err == 0;
    notes.push(format!("symmetry violations {sym_bad}/10 (truncated {sym_err})"));
    // Subadditivity.
    let mut sub_bad = 0;
    let mut sub_err = 0;
    for _ in 0..10 {
        let u = random_u(&mut rng);
        let v = random_u(&mut rng);
        match (gamma(&u), gamma(&v), gamma(&u.add(&v))) {
            (Ok(a), Ok(b), Ok(c)) => {
                let s = (a.stderr.powi(2) + b.stderr.powi(2) + c.stderr.powi(2)).sqrt();
                if c.gamma_hat > a.gamma_hat + b.gamma_hat + 3.0 * s {
                    sub_bad += 1;
                }
            }
            _ => sub_err += 1,
        }
    }
    pass &= sub_bad == 0 && sub_err == 0;
    notes.push(format!("subadditivity violations {sub_bad}/10 (truncated {sub_err})"));
    // Diagonal shift, per realization.
    let mut shift_bad = 0;
    let mut shift_checked = 0;
    for t in 0..100u64 {
        let u = random_u(&mut rng);
        let r: i32 = rng.gen_range(-3..=3);
        let field = trial_field(93, 2, t);
        for n in ns {
            let w = policy.window(n);
            let a = beta_sample(&field, p, &u, n, w);
            let b = beta_sample(&field, p, &u.shift_diagonal(r), n, w);
            shift_checked += 1;
            if a.map(|x| x - r as i64 * n) != b {
                shift_bad += 1;
            }
        }
    }
    pass &= shift_bad == 0;
    notes.push(format!("shift identity failures {shift_bad}/{shift_checked}"));
    outcome(pass, notes.join(", "))
}

fn c10_walk() -> Outcome {
    let d = 2;
    let mut pass = true;
    let mut notes = Vec::new();
    let s = ballisticity_report(d, 1.0, 10_000, 1000, 10, WalkMode::Annealed);
    let q = 1.0 / d as f64;
    let speed_ok = s
        .velocity
        .iter()
        .zip(&s.velocity_stderr)
        .all(|(v, se)| (v - q).abs() <= 3.0 * se);
    let mut cov_ok = true;
    for i in 0..d {
        for j in 0..d {
            let want = if i == j { q * (1.0 - q) } else { -q * q };
            cov_ok &= (s.covariance[i][j] - want).abs() <= 3.0 * s.covariance_stderr[i][j];
        }
    }
    let eig_ok = s.min_eigenvalue_positive();
    pass &= speed_ok && cov_ok && eig_ok;
    notes.push(format!(
        "p=1: speed {:?} ok={speed_ok}, multinomial covariance ok={cov_ok}, λ_min={:.2e}±{:.1e} positive={eig_ok}",
        s.velocity, s.min_eigenvalue, s.min_eigenvalue_stderr
    ));
    let thr = estimate_ptilde(2, 10, Eta::zero(), 4, Window::new(16), 500, 0.01, 0.5).unwrap();
    let s = ballisticity_report(d, 0.9, 10_000, 1000, 11, WalkMode::Annealed);
    let diffs_ok = s.speed_differences.iter().all(|&(_, _, m, se)| m.abs() <= 3.0 * se);
    let drift_ok = s.drift > 3.0 * s.drift_stderr;
    pass &= diffs_ok && drift_ok && 0.9 > thr.p_hi;
    notes.push(format!(
        "p=0.9 (p̃_c bracket [{:.3},{:.3}]): speed differences ok={diffs_ok}, drift {:.4}±{:.1e} ok={drift_ok}",
        thr.p_lo, thr.p_hi, s.drift, s.drift_stderr
    ));
    outcome(pass, notes.join("; "))
}

fn c11_leftmost() -> Outcome {
    let mut rates = Vec::new();
    let mut dominated_all = true;
    for r in [8, 16, 32] {
        let c = leftmost_coupling(2, 12, 0.8, &Vertex::origin(2), Window::new(r), 1000);
        dominated_all &= c.dominated == c.samples;
        rates.push((r, c.equality_rate(), c.uncut));
    }
    let monotone = rates.windows(2).all(|w| w[1].1 >= w[0].1);
    outcome(
        dominated_all && monotone,
        format!(
            "L*≤L in all samples: {dominated_all}; equality rate by r: {}",
            rates
                .iter()
                .map(|(r, e, u)| format!("r={r}: {e:.3} (uncut {u})"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

const REPRO_RUNS: &[(Command, &str)] = &[
    (Command::Theta, "p_grid = [0.0, 0.3, 0.6, 0.9, 1.0]\nn_list = [1, 2, 4]\nwindow = 12\ntrials = 2000"),
    (
        Command::Sweep,
        "eta = \"1/10\"\np_grid = [0.3, 0.6]\nn_list = [1, 2, 3, 4]\nwindow_scale = 4\ntrials = 2000\nmin_successes = 1",
    ),
    (Command::Critical, "n_list = [2, 4]\nwindow = 8\ntrials = 300\ntol = 0.02"),
    (Command::Shape, "p = 0.9\nn_list = [4, 8]\nwindow_scale = 16\ntrials = 50\nu = [[1, 0], [0, 1], [1, -1], [2, 1]]"),
    (Command::Walk, "d = 3\np = 0.9\nu = [[1, 0, 0]]\nwalk_steps = 2000\nwalks = 200"),
    (Command::Oracle, "n = 1\nwindow = 2\np_grid = [0.2, 0.5, 0.8]"),
    (Command::RussoCheck, "n = 1\nwindow = 1\np_grid = [0.25, 0.5, 0.75]"),
    (Command::OsssCheck, "n = 2\nwindow = 1\np_grid = [0.3, 0.7]"),
    (Command::OsssCheck, "n = 2\nwindow = 2\np = 0.5\nexact = false\ntrials = 300"),
    (Command::ExploreTrace, "p = 0.3\nn = 3\nk = 2\nwindow = 9"),
];

fn c12_reproducible(tmp: &Path) -> Outcome {
    let mut differing = Vec::new();
    let mut files = 0;
    for (i, (cmd, text)) in REPRO_RUNS.iter().enumerate() {
        let cfg = parse_config(&format!("seed = 12\n{text}")).unwrap();
        let a = tmp.join(format!("run{i}-t1"));
        let b = tmp.join(format!("run{i}-t8"));
        let ma = run(*cmd, &cfg, 1, &a).unwrap();
        let mb = run(*cmd, &cfg, 8, &b).unwrap();
        assert_eq!(ma.files, mb.files);
        // manifest.json records wall-clock times and the thread count.
        for f in ma.files.iter().map(String::as_str).chain(["config.toml"]) {
            files += 1;
            if fs::read(a.join(f)).unwrap() != fs::read(b.join(f)).unwrap() {
                differing.push(format!("{}/{f}", cmd.name()));
            }
        }
    }
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!(
                "{files} result files from {} runs byte-identical at 1 and 8 threads",
                REPRO_RUNS.len()
            )
        } else {
            format!("differing: {}", differing.join(", "))
        },
    )
}

fn main() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let inst = ExactInstance::build(
        2,
        1,
        Eta::zero(),
        Window::new(2),
        DEFAULT_SITE_CAP,
        RevealmentMethod::PerConfiguration,
    )
    .expect("exact instance on Λ_2");
    let built_in = t.elapsed();
    println!("exact instance d=2 n=1 η=0 Λ_2 built in {built_in:.1?}");
    let min = |m: u64| Some(Duration::from_secs(60 * m));

    #[allow(clippy::type_complexity)]
    let criteria: Vec<(u32, &str, Option<Duration>, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (
            1,
            "endpoint exactness",
            Some(Duration::from_secs(10)),
            Box::new(c1_endpoints),
        ),
        (2, "oracle equivalence", min(1), Box::new(|| c2_oracle(&inst, built_in))),
        (3, "Russo equality", None, Box::new(|| c3_russo(&inst))),
        (4, "OSSS verification", min(30), Box::new(|| c4_osss(&inst))),
        (5, "determination", min(5), Box::new(c5_determination)),
        (
            6,
            "differential inequality",
            min(1),
            Box::new(|| c6_differential(&inst)),
        ),
        (7, "exponential decay", min(30), Box::new(c7_decay)),
        (8, "coupled monotonicity", min(5), Box::new(c8_monotone)),
        (9, "shape function", min(20), Box::new(c9_shape)),
        (10, "walk ballisticity", min(10), Box::new(c10_walk)),
        (11, "L-profile coupling", min(15), Box::new(c11_leftmost)),
        (12, "reproducibility", None, Box::new(|| c12_reproducible(tmp.path()))),
    ];
    let mut unexpected = Vec::new();
    for (id, name, budget, f) in &criteria {
        let t = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let elapsed = t.elapsed();
        let o = match budget {
            Some(b) if elapsed > *b => outcome(false, format!("over the {b:?} budget; {}", o.detail)),
            _ => o,
        };
        let known = KNOWN_RED.contains(id);
        let tag = match (o.pass, known) {
            (true, false) => "PASS",
            (true, true) => "PASS (listed as known red)",
            (false, true) => "FAIL (known red)",
            (false, false) => "FAIL",
        };
        println!("criterion {id:>2} {name}: {tag} [{elapsed:.1?}] {}", o.detail);
        if !o.pass && !known {
            unexpected.push(*id);
        }
    }
    println!("acceptance finished in {:.1?}", start.elapsed());
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
