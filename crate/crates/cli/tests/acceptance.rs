//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use mixk::marlik::{bf_empty_component, estimate, marlik_from_frequencies, posterior_k, Estimator, Pooling};
use mixk::model::{log_a_kt, log_component_marginal};
use mixk::oracle::{enumerate_exact, exact_posterior_k, quad_component_marginal, quadrature_settings, toy_dataset, toy_spec};
use mixk::prior::check_sup_property;
use mixk::sampler::{run_fixed_k_chains, run_vark_chain, ChainConfig};
use mixk::special::{ln_binomial, log_sum_exp};
use mixk::stats::total_variation;
use mixk::tables::{asymptotic_limit, scaled_binomial_weight};
use mixk::{Dataset, ModelSpec, PriorOnK, SuffStats};

// tolerances
const RATIO_TOL: f64 = 5e-4;
const RATIO_EXACT_TOL: f64 = 1e-5;
const BOUNDS_TOL: f64 = 1e-4;
const QUAD_REL_TOL: f64 = 1e-6;
const QUAD_MIN_SETTINGS: usize = 20;
const IDENTITY_REL_TOL: f64 = 1e-10;
const SE_MULTIPLE: f64 = 3.0;
const VARK_TOY_TV: f64 = 0.01;
const GALAXY_TV: f64 = 0.05;
const SUP_TOL: f64 = 1e-12;
const ASYMPTOTIC_REL_TOL: f64 = 1e-3;
const HYPER_FACTOR: f64 = 2.0;

// runtime limits
const INSTANT: Duration = Duration::from_secs(1);
const MINUTE: Duration = Duration::from_secs(60);
const TEN_MINUTES: Duration = Duration::from_secs(600);
const HALF_HOUR: Duration = Duration::from_secs(1800);
const HOUR: Duration = Duration::from_secs(3600);

// reference values (n = 80, h0 = 9, alpha = 1; bounds for k = 1..10)
const WITH_BINOMIAL: [f64; 7] = [1.0, 1.011, 0.618, 0.299, 0.127, 0.050, 0.018];
const WITHOUT_BINOMIAL: [f64; 3] = [0.10112, 0.01124, 0.00136];
const POI1_POSTERIOR: [f64; 3] = [0.10112, 0.00562, 0.00023];
const BOUND_NS: [usize; 4] = [20, 50, 100, 500];
const BOUNDS_UNIFORM: [[f64; 10]; 4] = [
    [0.9000, 0.7286, 0.5299, 0.3456, 0.2880, 0.2419, 0.1954, 0.1756, 0.1505, 0.1335],
    [0.9600, 0.8847, 0.7826, 0.6645, 0.5414, 0.4233, 0.3175, 0.3119, 0.2835, 0.2402],
    [0.9800, 0.9412, 0.8858, 0.8170, 0.7385, 0.6541, 0.5677, 0.4828, 0.4023, 0.3322],
    [0.9960, 0.9880, 0.9762, 0.9607, 0.9417, 0.9193, 0.8938, 0.8656, 0.8350, 0.8022],
];
const BOUNDS_POI1: [[f64; 10]; 4] = [
    [0.9525, 0.9114, 0.8756, 0.8441, 0.8162, 0.7913, 0.7690, 0.7488, 0.7306, 0.7140],
    [0.9804, 0.9619, 0.9445, 0.9280, 0.9124, 0.8976, 0.8836, 0.8703, 0.8576, 0.8455],
    [0.9901, 0.9805, 0.9712, 0.9621, 0.9533, 0.9447, 0.9364, 0.9283, 0.9204, 0.9128],
    [0.9980, 0.9960, 0.9940, 0.9921, 0.9901, 0.9882, 0.9863, 0.9844, 0.9825, 0.9806],
];
const HYPER_REFERENCE: (f64, f64) = (0.04, 2.0);

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

/// Runs the CLI and returns its stdout.
fn mixk(args: &[&str], out: &Path) -> Result<String, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_mixk"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| format!("cannot run mixk: {e}"))?;
    if !o.status.success() {
        return Err(format!("mixk {} failed: {}", args.join(" "), String::from_utf8_lossy(&o.stderr)));
    }
    Ok(String::from_utf8_lossy(&o.stdout).into_owned())
}

/// Numeric cells of a CSV with a header row.
fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .filter(|l| l.contains(','))
        .map(|l| l.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .collect()
}

fn hypothetical(mode: &str, tmp: &Path) -> Result<Vec<f64>, String> {
    let out = mixk(
        &["tables", "--hypothetical", "--n", "80", "--h0", "9", "--alpha", "1", "--mode", mode, "--kmax", "15"],
        tmp,
    )?;
    Ok(csv_rows(&out).into_iter().map(|r| r[2]).collect())
}

fn criterion_1(tmp: &Path) -> Outcome {
    let got = hypothetical("with-binomial", tmp)?;
    ensure(got.len() == 7, || format!("expected 7 rows for k = 9..15, got {}", got.len()))?;
    let worst = got.iter().zip(WITH_BINOMIAL).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    ensure(worst <= RATIO_TOL, || format!("max deviation {worst:.2e} from the reference ratios"))?;
    Ok(format!("k = 9..15 within {worst:.1e} of the reference ratios"))
}

fn criterion_2(tmp: &Path) -> Outcome {
    let without = hypothetical("without-binomial", tmp)?;
    let poi = hypothetical("poi1-posterior", tmp)?;
    let w3 = without[1..4].iter().zip(WITHOUT_BINOMIAL).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    let w5 = poi[1..4].iter().zip(POI1_POSTERIOR).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    ensure(w3 <= RATIO_EXACT_TOL, || format!("without-binomial deviation {w3:.2e}"))?;
    ensure(w5 <= RATIO_EXACT_TOL, || format!("Poisson(1) deviation {w5:.2e}"))?;
    Ok(format!("without binomial within {w3:.1e}, Poisson(1) posterior within {w5:.1e}"))
}

fn criterion_3(tmp: &Path) -> Outcome {
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for (prior, table) in [("uniform", BOUNDS_UNIFORM), ("poisson1", BOUNDS_POI1)] {
        let out = mixk(
            &["tables", "--bounds", "--n", "20,50,100,500", "--prior", prior, "--alpha", "1", "--kmax", "50", "--rows", "10"],
            tmp,
        )?;
        let rows = csv_rows(&out);
        ensure(rows.len() == 10, || format!("{prior}: expected 10 rows, got {}", rows.len()))?;
        for (k, row) in rows.iter().enumerate() {
            for (j, n) in BOUND_NS.iter().enumerate() {
                let d = (row[j + 1] - table[j][k]).abs();
                ensure(d <= BOUNDS_TOL, || format!("{prior}, n = {n}, k = {}: {} vs {}", k + 1, row[j + 1], table[j][k]))?;
                worst = worst.max(d);
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} bounds within {worst:.1e}"))
}

fn criterion_4() -> Outcome {
    let settings = quadrature_settings();
    ensure(settings.len() >= QUAD_MIN_SETTINGS, || format!("only {} settings", settings.len()))?;
    let mut worst: f64 = 0.0;
    for (x, spec) in &settings {
        ensure(x.len() <= 4, || "sample larger than 4".into())?;
        let closed = log_component_marginal(&SuffStats::recompute(x), spec);
        let quad = quad_component_marginal(x, spec).map_err(|e| e.to_string())?;
        let r = (quad - closed).exp_m1().abs();
        ensure(r <= QUAD_REL_TOL, || format!("{x:?}, {spec:?}: relative difference {r:.2e}"))?;
        worst = worst.max(r);
    }
    Ok(format!("{} settings, max relative difference {worst:.1e}", settings.len()))
}

fn criterion_5() -> Outcome {
    let spec = toy_spec();
    let kmax = 3;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut check = |what: &str, got: f64, want: f64| -> Result<(), String> {
        let r = rel(got, want);
        count += 1;
        worst = worst.max(r);
        ensure(r <= IDENTITY_REL_TOL, || format!("{what}: {got} vs {want} (relative {r:.2e})"))
    };
    for n in [5, 6, 8] {
        let x = toy_dataset(n).ok_or("missing toy data")?;
        let e = enumerate_exact(&x, kmax, &spec, false).map_err(|e| e.to_string())?;
        let a = |k: usize, t: usize| log_a_kt(k, t, spec.alpha, n).unwrap();
        let f = |k: usize| e.log_f[k - 1].exp();
        for k in 1..=kmax {
            let via_star = log_sum_exp(&(1..=k).map(|t| a(k, t) + e.log_fstar[t - 1]).collect::<Vec<_>>());
            check(&format!("n={n} f_{k} via f*"), via_star.exp(), f(k))?;
            let via_dagger =
                log_sum_exp(&(1..=k).map(|h| ln_binomial(k, h) + a(k, h) + e.log_fdagger[h - 1]).collect::<Vec<_>>());
            check(&format!("n={n} f_{k} via f†"), via_dagger.exp(), f(k))?;
            if k >= 2 {
                let rec = log_sum_exp(&[a(k, k - 1) + e.log_f[k - 2], e.log_fstar[k - 1]]);
                check(&format!("n={n} f_{k} recursion"), rec.exp(), f(k))?;
            }
            // every f*_t and f†_h is recovered from any k >= t (resp. h)
            for t in 1..=k {
                let fs = e.prob_star[k - 1][t - 1].ln() - a(k, t) + e.log_f[k - 1];
                check(&format!("n={n} f*_{t} from k={k}"), fs.exp(), e.log_fstar[t - 1].exp())?;
                let fd = e.prob_tilde[k - 1][t - 1].ln() - ln_binomial(k, t) - a(k, t) + e.log_f[k - 1];
                check(&format!("n={n} f†_{t} from k={k}"), fd.exp(), e.log_fdagger[t - 1].exp())?;
            }
        }
        // the ratio formulas fed with exact probabilities reproduce f exactly
        let truth = e.normalized_f();
        for method in [Estimator::FStar, Estimator::FDagger, Estimator::BfChain] {
            let m = marlik_from_frequencies(method, &e.frequencies(), spec.alpha, n, Some(e.log_f[0]), Pooling::Equal)
                .map_err(|e| e.to_string())?;
            for k in 1..=kmax {
                check(&format!("n={n} {method} f_{k}"), m.f()[k - 1], truth[k - 1])?;
            }
            let abs = m.log_f_unnormalized.ok_or("anchored result lacks absolute scale")?;
            for k in 1..=kmax {
                check(&format!("n={n} {method} absolute f_{k}"), abs[k - 1].exp(), f(k))?;
            }
        }
    }
    Ok(format!("{count} identities, max relative error {worst:.1e}"))
}

fn toy_chains(sweeps: usize) -> Result<(Vec<f64>, Vec<mixk::ChainSummary>, mixk::oracle::EnumerationResult), String> {
    let x = toy_dataset(5).ok_or("missing toy data")?;
    let spec = toy_spec();
    let e = enumerate_exact(&x, 3, &spec, false).map_err(|e| e.to_string())?;
    let cfg = ChainConfig {
        sweeps,
        burnin: 1_000,
        seed: 11,
        keep_trace: false,
        ..Default::default()
    };
    let chains = run_fixed_k_chains(Arc::from(x.clone()), &spec, 3, &cfg, 1).map_err(|e| e.to_string())?;
    Ok((x, chains, e))
}

fn criterion_6() -> Outcome {
    let (x, chains, e) = toy_chains(1_000_000)?;
    let truth = e.normalized_f();
    let mut worst: f64 = 0.0;
    for method in [Estimator::FStar, Estimator::FDagger] {
        let m = estimate(method, &chains, toy_spec().alpha, None, Pooling::Equal).map_err(|e| e.to_string())?;
        let se = m.se_f.clone().ok_or("no standard errors")?;
        for k in 1..=3 {
            let z = (m.f()[k - 1] - truth[k - 1]).abs() / se[k - 1];
            ensure(z <= SE_MULTIPLE, || format!("{method} f_{k}: {} vs {} ({z:.2} SE)", m.f()[k - 1], truth[k - 1]))?;
            worst = worst.max(z);
        }
    }
    for s in &chains[1..] {
        let bf = bf_empty_component(s, toy_spec().alpha, x.len()).map_err(|e| e.to_string())?;
        let exact = e.log_f[s.k - 1] - e.log_f[s.k - 2];
        let z = (bf.log_bf - exact).abs() / bf.se_log_bf;
        ensure(z <= SE_MULTIPLE, || format!("ln B_{},{}: {} vs {exact} ({z:.2} SE)", s.k, s.k - 1, bf.log_bf))?;
        worst = worst.max(z);
    }
    Ok(format!("f*, f† and Bayes factors within {worst:.2} SE of exact"))
}

fn criterion_7() -> Outcome {
    let x = toy_dataset(5).ok_or("missing toy data")?;
    let spec = toy_spec();
    let mut worst: f64 = 0.0;
    for prior in [PriorOnK::uniform(3).unwrap(), PriorOnK::poisson1(3).unwrap()] {
        let exact = exact_posterior_k(&x, &spec, &prior).map_err(|e| e.to_string())?;
        let cfg = ChainConfig {
            sweeps: 1_000_000,
            burnin: 1_000,
            seed: 5,
            keep_trace: false,
            ..Default::default()
        };
        let v = run_vark_chain(Arc::from(x.clone()), &spec, &prior, &cfg).map_err(|e| e.to_string())?;
        let tv = total_variation(&v.posterior(), &exact);
        ensure(tv < VARK_TOY_TV, || format!("{} prior: TV {tv:.4}", prior.kind()))?;
        worst = worst.max(tv);
    }
    Ok(format!("TV to exact posterior {worst:.4} (uniform and Poisson(1))"))
}

fn criterion_8() -> Outcome {
    let data: Arc<[f64]> = Dataset::galaxy().values.into();
    let spec = ModelSpec::new(1.0, 20.0, 0.04, 2.0, 2.0).map_err(|e| e.to_string())?;
    let kmax = 50;
    let chains = run_fixed_k_chains(data.clone(), &spec, kmax, &ChainConfig { keep_trace: false, ..Default::default() }, 1)
        .map_err(|e| e.to_string())?;
    let m = estimate(Estimator::FDagger, &chains, spec.alpha, None, Pooling::Equal).map_err(|e| e.to_string())?;
    let mut report = Vec::new();
    for prior in [PriorOnK::uniform(kmax).unwrap(), PriorOnK::poisson1(kmax).unwrap()] {
        let from_f = posterior_k(&m, &prior).map_err(|e| e.to_string())?;
        let cfg = ChainConfig {
            sweeps: 1_000_000,
            burnin: 10_000,
            thin: 10,
            keep_trace: false,
            ..Default::default()
        };
        let v = run_vark_chain(data.clone(), &spec, &prior, &cfg).map_err(|e| e.to_string())?;
        let tv = total_variation(&from_f, &v.posterior());
        ensure(tv < GALAXY_TV, || format!("{} prior: TV {tv:.4}", prior.kind()))?;
        report.push(format!("{} TV {tv:.4}", prior.kind()));
    }
    Ok(report.join(", "))
}

fn criterion_9() -> Outcome {
    let poi = check_sup_property(&PriorOnK::poisson1(50).unwrap(), SUP_TOL).map_err(|e| e.to_string())?;
    ensure(poi.holds && poi.worst_violation < SUP_TOL, || {
        format!("Poisson(1) violation {:.2e} at h = {}", poi.worst_violation, poi.worst_h)
    })?;
    let uni = check_sup_property(&PriorOnK::uniform(50).unwrap(), SUP_TOL).map_err(|e| e.to_string())?;
    ensure(!uni.holds, || "uniform prior passes".into())?;
    let geo = PriorOnK::from_log_weights((1..=50).map(|k| k as f64 * 0.5f64.ln()).collect()).unwrap();
    let g = check_sup_property(&geo, SUP_TOL).map_err(|e| e.to_string())?;
    ensure(!g.holds, || "geometric prior passes".into())?;
    Ok(format!(
        "Poisson(1) max violation {:.1e}; uniform {:.2}, geometric {:.2}",
        poi.worst_violation, uni.worst_violation, g.worst_violation
    ))
}

fn criterion_10() -> Outcome {
    let mut worst: f64 = 0.0;
    for (k, t) in [(2, 1), (3, 2), (5, 3)] {
        for alpha in [0.5, 1.0, 2.0] {
            let v = scaled_binomial_weight(1_000_000, k, t, alpha).map_err(|e| e.to_string())?;
            let lim = asymptotic_limit(k, t, alpha);
            let r = rel(v, lim);
            ensure(r <= ASYMPTOTIC_REL_TOL, || format!("(k, t, α) = ({k}, {t}, {alpha}): {v} vs {lim}"))?;
            worst = worst.max(r);
        }
    }
    Ok(format!("9 cases, max relative difference {worst:.1e}"))
}

fn criterion_11(tmp: &Path) -> Outcome {
    mixk(&["hyper", "--mu", "20", "--gamma", "2"], tmp)?;
    let sug = std::fs::read_to_string(tmp.join("hyper_suggestion.csv")).map_err(|e| e.to_string())?;
    let s = &csv_rows(&sug)[0];
    let (tau, delta) = (s[0], s[1]);
    let (cut_tau, cut_delta) = (s[2] as usize, s[3] as usize);
    let within = |v: f64, r: f64| v / r <= HYPER_FACTOR && r / v <= HYPER_FACTOR;
    ensure(within(tau, HYPER_REFERENCE.0), || format!("tau = {tau}"))?;
    ensure(within(delta, HYPER_REFERENCE.1), || format!("delta = {delta}"))?;

    // medians fall before the level-off point and stay level after it
    let med = std::fs::read_to_string(tmp.join("hyper_medians.csv")).map_err(|e| e.to_string())?;
    let rows = csv_rows(&med);
    let rel_tol = 0.25;
    // columns: k, count, 5 tau quantiles, 5 delta quantiles; the median is the third
    for (name, col, cut) in [("tau", 4, cut_tau), ("delta", 9, cut_delta)] {
        let series: Vec<(usize, f64)> = rows.iter().map(|r| (r[0] as usize, r[col])).collect();
        let first = series.first().ok_or("empty median table")?;
        let at_cut = series.iter().find(|(k, _)| *k == cut).ok_or("cutoff not in table")?;
        ensure(cut > first.0, || format!("{name}: no decrease before the level-off at k = {cut}"))?;
        ensure(first.1 > at_cut.1 * (1.0 + rel_tol), || {
            format!("{name}: median does not decrease ({} at k = {} vs {} at k = {cut})", first.1, first.0, at_cut.1)
        })?;
        for w in series.windows(2).filter(|w| w[0].0 >= cut) {
            let r = rel(w[1].1, w[0].1);
            ensure(r <= rel_tol, || format!("{name}: change {r:.2} between k = {} and {}", w[0].0, w[1].0))?;
        }
    }
    Ok(format!(
        "suggested tau = {tau:.4} (level from k = {cut_tau}), delta = {delta:.3} (level from k = {cut_delta})"
    ))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let dir = |name: &str| tmp.path().join(name);
    type Criterion<'a> = (&'a str, Duration, Box<dyn Fn() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("hypothetical ratios, with binomial", INSTANT, Box::new(|| criterion_1(&dir("c1")))),
        ("hypothetical ratios, without binomial and Poisson(1)", INSTANT, Box::new(|| criterion_2(&dir("c2")))),
        ("posterior bounds", INSTANT, Box::new(|| criterion_3(&dir("c3")))),
        ("component marginal vs quadrature", MINUTE, Box::new(criterion_4)),
        ("exact identities on toy data", MINUTE, Box::new(criterion_5)),
        ("estimators vs enumeration", TEN_MINUTES, Box::new(criterion_6)),
        ("variable-k sampler vs enumeration", TEN_MINUTES, Box::new(criterion_7)),
        ("galaxy: f† formula vs variable-k sampler", HOUR, Box::new(criterion_8)),
        ("Poisson(1) sup property", INSTANT, Box::new(criterion_9)),
        ("asymptotic binomial weights", INSTANT, Box::new(criterion_10)),
        ("hyperparameter suggestion on galaxy data", HALF_HOUR, Box::new(|| criterion_11(&dir("c11")))),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = run();
        let elapsed = t.elapsed();
        let outcome = outcome.and_then(|msg| {
            if elapsed <= *limit {
                Ok(msg)
            } else {
                Err(format!("{msg}; took {elapsed:.1?}, limit {limit:?}"))
            }
        });
        match outcome {
            Ok(msg) => println!("criterion {:>2} PASS  {name}: {msg} [{elapsed:.1?}]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {msg} [{elapsed:.1?}]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
