//! End-to-end acceptance checks. Each test covers one release criterion,
//! prints a single PASS/FAIL line with the measured numbers, and pins its
//! tolerances in code. Runtime budgets assume an optimized test profile.

use std::time::Instant;

use socsim_core::checkpoint;
use socsim_core::experiments::{
    degree_parity_masses, experiment_followback, experiment_viral, run_replicas,
    scale_benchmark, validate_preferential, validate_random, OmegaShape,
};
use socsim_core::stats::{chi_square_statistic, chi_square_survival};
use socsim_core::{
    fit_power_law, ContentClass, DegreeHistogram, RateTree, RunStop, SimRng, SimulationConfig,
    SimulationState, StepResult,
};

fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("acceptance {criterion} ({name}): {verdict} — {detail}");
    assert!(pass, "acceptance {criterion} ({name}): FAIL — {detail}");
}

#[test]
fn acceptance_1_random_degrees_match_poisson() {
    // 10^4 agents wired uniformly to mean degree 20, five seeds; every seed's
    // degree distribution must sit within KS 0.02 of Poisson(20).
    let runs = run_replicas(41, 5, |seed| validate_random(10_000, 20.0, seed)).unwrap();
    let worst = runs.iter().map(|r| r.ks).fold(0.0f64, f64::max);
    report(
        1,
        "random model vs Poisson",
        worst < 0.02,
        &format!("max KS over 5 seeds {worst:.4} (limit 0.02)"),
    );
}

#[test]
fn acceptance_2_preferential_tail_exponent() {
    // Ten 5*10^4-agent growth runs; the aggregate degree distribution fitted
    // from k_min=10 must show a power-law exponent in [2.5, 3.5].
    let started = Instant::now();
    let runs =
        run_replicas(7, 10, |seed| validate_preferential(50_000, 0.1, 10, seed)).unwrap();
    let mut merged = DegreeHistogram::new();
    for run in &runs {
        merged.merge(&run.histogram);
    }
    let fit = fit_power_law(&merged, 10).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    let pass = (2.5..=3.5).contains(&fit.gamma) && elapsed < 300.0;
    report(
        2,
        "preferential attachment exponent",
        pass,
        &format!(
            "gamma {:.3} (want [2.5, 3.5]), r^2 {:.4}, {} bins, {elapsed:.0}s (limit 300s)",
            fit.gamma, fit.r_squared, fit.bins_used
        ),
    );
}

#[test]
fn acceptance_3_followback_degree_parity() {
    // Certain reciprocation keeps every total degree even, exactly; half
    // reciprocation must leave odd degrees present but rarer than even ones.
    let certain =
        run_replicas(21, 3, |seed| experiment_followback(10_000, 0.1, 1.0, 10, seed)).unwrap();
    let odd_agents: u64 = certain
        .iter()
        .flat_map(|r| r.histogram.iter())
        .filter(|(k, _)| k % 2 == 1)
        .map(|(_, count)| count)
        .sum();

    let mixed =
        run_replicas(31, 10, |seed| experiment_followback(10_000, 0.1, 0.5, 10, seed)).unwrap();
    let mut merged = DegreeHistogram::new();
    for run in &mixed {
        merged.merge(&run.histogram);
    }
    let (even, odd) = degree_parity_masses(&merged);

    let pass = odd_agents == 0 && odd < even;
    report(
        3,
        "followback degree parity",
        pass,
        &format!(
            "p=1.0: {odd_agents} odd-degree agents over 3 seeds (want 0); \
             p=0.5: odd mass {odd:.4} vs even {even:.4} over 10 seeds (want odd < even)"
        ),
    );
}

/// One frozen-star trial: a hub with 1000 followers posts once and the run
/// plays out to exhaustion; returns the count of direct rebroadcasters.
fn star_first_generation(alpha: f64, seed: u64) -> u64 {
    let toml = format!(
        r#"
schema_version = 1
seed = {seed}
initial_agents = 1001
max_agents = 1001

[[agent_types]]
name = "standard"
follow_rate = 0.0
tweet_rate = 0.0

[alpha]
political = {alpha}
humorous = {alpha}
musical = {alpha}

[omega]
form = "exponential"
t_min = 0.0
t_max = 30.0
"#
    );
    let config = SimulationConfig::from_toml_str(&toml).unwrap();
    let mut state = SimulationState::new(config);
    for follower in 1..=1000 {
        assert!(state.insert_edge(follower, 0), "star edge {follower}->0 rejected");
    }
    state.publish_tweet(0, ContentClass::Humorous, false);
    match state.run() {
        RunStop::Exhausted => {}
        other => panic!("star run should exhaust, got {other:?}"),
    }
    let cascade = &state.diffusion().cascades()[0];
    cascade.nodes().iter().filter(|n| n.generation == 1).count() as u64
}

#[test]
fn acceptance_4_star_rebroadcast_oracle() {
    // With a unit-mass omega every follower expects exactly one viewing
    // opportunity, so the mean first-generation rebroadcast count over 100
    // seeds must land within 5% of alpha * N for each alpha.
    let started = Instant::now();
    let mut detail = String::new();
    let mut pass = true;
    for (i, &alpha) in [0.1, 0.5, 1.0].iter().enumerate() {
        let counts =
            run_replicas(1000 * (i as u64 + 1), 100, |seed| {
                Ok::<u64, String>(star_first_generation(alpha, seed))
            })
            .unwrap();
        let mean = counts.iter().sum::<u64>() as f64 / counts.len() as f64;
        let expected = alpha * 1000.0;
        let rel = (mean - expected).abs() / expected;
        pass &= rel <= 0.05;
        detail.push_str(&format!("alpha {alpha}: mean {mean:.1} vs {expected:.0} ({:+.1}%); ", 100.0 * (mean - expected) / expected));
    }
    let elapsed = started.elapsed().as_secs_f64();
    pass &= elapsed < 60.0;
    detail.push_str(&format!("{elapsed:.0}s (limit 60s)"));
    report(4, "star-graph rebroadcast oracle", pass, &detail);
}

#[test]
fn acceptance_5_viral_phase_structure() {
    // 5x5 grid (alpha x follow budget) on 1000 agents, both omega shapes,
    // 10 seeds per cell: the sparse/low-alpha corner must stay sub-viral,
    // the dense/high-alpha corner must clear 100x that baseline, and
    // reciprocal cells may not fall below exponential beyond replica noise.
    let started = Instant::now();
    let alphas = [0.005, 0.01, 0.02, 0.05, 0.1];
    let follows = [10_000, 30_000, 50_000, 70_000, 90_000];
    let exp = experiment_viral(&alphas, &follows, OmegaShape::Exponential, 10, 4000).unwrap();
    let rec = experiment_viral(&alphas, &follows, OmegaShape::Reciprocal, 10, 4000).unwrap();

    let quiet = exp[0].mean_rebroadcasts; // (0.005, 10k)
    let loud = exp[3 * follows.len() + 4].mean_rebroadcasts; // (0.05, 90k)
    let mut pass = quiet < 1.0 && loud > 100.0 * quiet;
    let mut detail =
        format!("quiet cell {quiet:.3} (limit 1), loud cell {loud:.1} (want >{:.1}); ", 100.0 * quiet);

    // ties are allowed up to replica noise, taken as 3 combined standard errors
    for (r, e) in rec.iter().zip(&exp) {
        let noise = 3.0
            * (r.stddev / (r.replicas as f64).sqrt() + e.stddev / (e.replicas as f64).sqrt());
        if r.mean_rebroadcasts + noise < e.mean_rebroadcasts {
            pass = false;
            detail.push_str(&format!(
                "reciprocal {:.2} < exponential {:.2} at alpha {} follows {}; ",
                r.mean_rebroadcasts, e.mean_rebroadcasts, r.alpha, r.edges
            ));
        }
    }

    let elapsed = started.elapsed().as_secs_f64();
    pass &= elapsed < 600.0;
    detail.push_str(&format!("reciprocal >= exponential across 25 cells; {elapsed:.0}s (limit 600s)"));
    report(5, "viral phase structure", pass, &detail);
}

#[test]
fn acceptance_6_event_selection_statistics() {
    // The engine's selection primitives on a fixed (1, 2, 7) rate vector:
    // a million draws must match the rate proportions (chi-square p > 0.001)
    // and the waiting time must average 1/R within 2%.
    let tree = RateTree::from_rates(&[1.0, 2.0, 7.0]).unwrap();
    let total = tree.total();
    let mut rng = SimRng::new(606);
    let draws = 1_000_000u64;
    let mut counts = [0u64; 3];
    let mut dt_sum = 0.0;
    for _ in 0..draws {
        dt_sum += -rng.open_unit().ln() / total;
        counts[tree.select(rng.open_unit()).unwrap()] += 1;
    }
    let expected: Vec<f64> =
        [1.0, 2.0, 7.0].iter().map(|r| r / total * draws as f64).collect();
    let x2 = chi_square_statistic(&counts, &expected);
    let p = chi_square_survival(x2, 2);
    let mean_dt = dt_sum / draws as f64;
    let dt_err = (mean_dt - 0.1).abs() / 0.1;
    let pass = p > 0.001 && dt_err <= 0.02;
    report(
        6,
        "kMC statistical contract",
        pass,
        &format!(
            "counts {counts:?} chi2 {x2:.2} p {p:.4} (floor 0.001); mean dt {mean_dt:.5} vs 0.1 ({:.2}%, limit 2%)",
            100.0 * dt_err
        ),
    );
}

fn fuzz_config(seed: u64) -> SimulationConfig {
    let toml = format!(
        r#"
schema_version = 1
seed = {seed}
initial_agents = 50
max_agents = 3000
prune_interval = 512
trending_capacity = 16

[[add_rate]]
start = 0.0
rate = 2.0

[[add_rate]]
start = 120.0
rate = 6.0

[[agent_types]]
name = "casual"
add_weight = 3.0
follow_rate = 0.08
tweet_rate = 0.05
hashtag_probability = 0.4

[[agent_types]]
name = "celebrity"
add_weight = 1.0
follow_rate = 0.02
tweet_rate = 0.4
followback_probability = 0.6
hashtag_probability = 0.2

[[agent_types]]
name = "lurker"
add_weight = 2.0
follow_rate = 0.12
tweet_rate = 0.0

[follow_model]
model = "combined"
retry_limit = 8

[follow_model.combined_weights]
random = 1.0
preferential = 2.0
agent_type = 1.0
agent_type_preferential = 1.0
trending = 0.5

[follow_model.unfollow]
mode = "chatty"
rate = 0.01

[alpha]
political = 0.25
humorous = 0.4
musical = 0.1

[attributes]
languages = ["en", "fr"]
ideologies = ["red", "blue"]

[[attributes.regions]]
name = "north"
add_weight = 2.0
language_weights = [3.0, 1.0]
ideology_weights = [1.0, 1.0]

[[attributes.regions]]
name = "south"
add_weight = 1.0
language_weights = [1.0, 2.0]
ideology_weights = [2.0, 1.0]

[[attributes.preference_classes]]
name = "mixed"
weight = 2.0
class_weights = {{ political = 1.0, humorous = 2.0, musical = 1.0 }}

[[attributes.preference_classes]]
name = "partisan"
weight = 1.0
class_weights = {{ political = 3.0, humorous = 0.5, musical = 0.5 }}

[omega]
form = "table"
t_min = 0.0
t_max = 40.0
values = [3.0, 1.0, 0.5, 0.25]
"#
    );
    SimulationConfig::from_toml_str(&toml).unwrap()
}

/// Structural audit plus the rate-tree-vs-linear-scan comparison.
fn deep_audit(state: &SimulationState) {
    state.audit().unwrap();
    let snapshot = state.diffusion().export();
    let linear: f64 = snapshot.broadcasts.iter().map(|b| b.rate).sum();
    let tree = state.diffusion().total_rate();
    assert!(
        (tree - linear).abs() <= 1e-9 * linear.max(1.0),
        "rate tree total {tree} drifted from linear sum {linear}"
    );
}

#[test]
fn acceptance_7_invariant_fuzz() {
    // >= 10^5 events of mixed traffic across two seeds with periodic deep
    // audits, plus a mid-run checkpoint whose continuation must replay the
    // original trace event-for-event.
    const AUDIT_EVERY: u64 = 5_000;
    const PREFIX: u64 = 50_000;
    const TAIL: u64 = 25_000;
    for seed in [70, 71] {
        let mut state = SimulationState::new(fuzz_config(seed));
        for n in 1..=PREFIX {
            match state.step() {
                StepResult::Event(_) => {}
                StepResult::Halted(stop) => panic!("fuzz run halted early: {stop:?}"),
            }
            if n % AUDIT_EVERY == 0 {
                deep_audit(&state);
            }
        }

        let bytes = checkpoint::to_bytes(&state).unwrap();
        let mut restored = checkpoint::from_bytes(&bytes).unwrap();
        for n in 1..=TAIL {
            let a = state.step();
            let b = restored.step();
            assert_eq!(a, b, "trace diverged {n} events after the checkpoint (seed {seed})");
            if n % AUDIT_EVERY == 0 {
                deep_audit(&state);
                deep_audit(&restored);
            }
        }
    }
    report(
        7,
        "invariant fuzz",
        true,
        &format!(
            "2 seeds x {} events, deep audit every {AUDIT_EVERY}, checkpoint replay of {TAIL} events exact",
            PREFIX + TAIL
        ),
    );
}

#[test]
fn acceptance_8_scale_benchmark() {
    // A million-agent random-model run (3M events) on one machine: under
    // ten minutes wall clock and under 8 GB peak memory.
    let run = scale_benchmark(1_000_000, 3_000_000, 808).unwrap();
    let gb = run.peak_rss_bytes as f64 / f64::from(1u32 << 30);
    let pass = run.agents == 1_000_000
        && run.events == 3_000_000
        && run.wall_seconds < 600.0
        && gb < 8.0;
    report(
        8,
        "scale benchmark",
        pass,
        &format!(
            "{} agents, {} edges, {} events in {:.1}s (limit 600s), peak rss {gb:.2} GB (limit 8)",
            run.agents, run.edges, run.events, run.wall_seconds
        ),
    );
}
