//! Plain-text results written at the end of a run. Every file is
//! deterministic for a given state: fixed iteration orders, full-precision
//! floats via the shortest round-trippable form.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::checkpoint::{self, CheckpointError};
use crate::graph::DegreeFlavor;
use crate::sim::SimulationState;
use crate::stats::DegreeHistogram;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, OutputError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| OutputError::Io { path: path.clone(), source })?;
    Ok(path)
}

/// One row per observed degree: count, probability mass, and log-log
/// coordinates for straight-line fits. Zero degree logs are `-inf`.
pub fn degree_table(hist: &DegreeHistogram) -> String {
    let mut out = String::from("# k count p ln_k ln_p\n");
    let n = hist.n_agents();
    if n == 0 {
        out.push_str("0 0 1\n");
        return out;
    }
    for (k, count) in hist.iter() {
        let p = count as f64 / n as f64;
        let _ = writeln!(out, "{k} {count} {p} {} {}", f64::from(k).ln(), p.ln());
    }
    out
}

fn edge_list(state: &SimulationState) -> String {
    let mut out = String::new();
    for &(a, b) in state.network().edges() {
        let _ = writeln!(out, "{a} {b}");
    }
    out
}

fn tweet_table(state: &SimulationState) -> String {
    let mut out =
        String::from("# origin author time class hashtag rebroadcasts unique_rebroadcasters\n");
    for cascade in state.diffusion().cascades() {
        let origin = &cascade.nodes()[0];
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            origin.id,
            origin.author,
            origin.created_at,
            cascade.class.name(),
            u8::from(cascade.hashtag),
            cascade.rebroadcast_events,
            cascade.unique_rebroadcasters(),
        );
    }
    out
}

fn retweet_table(state: &SimulationState) -> String {
    let mut out = String::from("# origin node author parent generation time\n");
    for cascade in state.diffusion().cascades() {
        let origin = cascade.nodes()[0].id;
        for node in cascade.nodes().iter().skip(1) {
            let _ = writeln!(
                out,
                "{origin} {} {} {} {} {}",
                node.id,
                node.author,
                node.parent.expect("non-origin nodes have parents"),
                node.generation,
                node.created_at,
            );
        }
    }
    out
}

/// The largest cascade by unique rebroadcasters, as node rows (with viewer
/// counts at their final observed value) followed by edge rows.
fn cascade_top(state: &SimulationState) -> String {
    let mut out = String::from("# node id author generation viewers / edge parent child\n");
    let Some(cascade) = state
        .diffusion()
        .cascades()
        .iter()
        .max_by_key(|c| (c.unique_rebroadcasters(), std::cmp::Reverse(c.origin)))
    else {
        return out;
    };
    for node in cascade.nodes() {
        let _ = writeln!(
            out,
            "node {} {} {} {}",
            node.id,
            node.author,
            node.generation,
            state.diffusion().node_viewers(node),
        );
    }
    for node in cascade.nodes() {
        if let Some(parent) = node.parent {
            let _ = writeln!(out, "edge {parent} {}", node.id);
        }
    }
    out
}

fn summary(state: &SimulationState, stop: &str) -> String {
    let c = state.counters();
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} {v}");
    };
    kv("seed", state.config().seed.to_string());
    kv("stop", stop.to_string());
    kv("sim_time", state.time().to_string());
    kv("agents", state.store().len().to_string());
    kv("edges", state.network().edge_count().to_string());
    kv("events", c.events.to_string());
    kv("adds", c.adds.to_string());
    kv("follows", c.follows.to_string());
    kv("follow_noops", c.follow_noops.to_string());
    kv("followbacks", c.followbacks.to_string());
    kv("tweets", c.tweets.to_string());
    kv("rebroadcasts", c.rebroadcasts.to_string());
    kv("rebroadcast_noops", c.rebroadcast_noops.to_string());
    kv("unfollows", c.unfollows.to_string());
    kv("pruned_broadcasts", c.pruned_broadcasts.to_string());
    kv("live_broadcasts", state.diffusion().live_count().to_string());
    kv("cascades", state.diffusion().cascades().len().to_string());
    out
}

/// Minimal GEXF export of the follow graph for graph tools.
fn gexf(state: &SimulationState) -> String {
    let mut out = String::from(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <gexf xmlns=\"http://gexf.net/1.3\" version=\"1.3\">\n\
         <graph defaultedgetype=\"directed\">\n<nodes>\n",
    );
    for agent in state.store().iter() {
        let type_name = &state.config().profiles[agent.type_index as usize].name;
        let _ = writeln!(out, "<node id=\"{}\" label=\"{}\"/>", agent.id, type_name);
    }
    out.push_str("</nodes>\n<edges>\n");
    for (i, &(a, b)) in state.network().edges().iter().enumerate() {
        let _ = writeln!(out, "<edge id=\"{i}\" source=\"{a}\" target=\"{b}\"/>");
    }
    out.push_str("</edges>\n</graph>\n</gexf>\n");
    out
}

/// Writes everything enabled in the run's output config into `dir`,
/// creating it if needed. Returns the paths written.
pub fn write_outputs(
    state: &SimulationState,
    dir: &Path,
    stop: &str,
) -> Result<Vec<PathBuf>, OutputError> {
    fs::create_dir_all(dir)
        .map_err(|source| OutputError::Io { path: dir.to_path_buf(), source })?;
    let toggles = &state.config().output;
    let mut written = Vec::new();

    if toggles.network {
        written.push(write_file(dir, "network.edges", &edge_list(state))?);
    }
    if toggles.degree_distributions {
        for (flavor, name) in [
            (DegreeFlavor::In, "degree_in.dat"),
            (DegreeFlavor::Out, "degree_out.dat"),
            (DegreeFlavor::Cumulative, "degree_cum.dat"),
        ] {
            written.push(write_file(dir, name, &degree_table(&state.degree_histogram(flavor)))?);
        }
    }
    if toggles.tweets {
        written.push(write_file(dir, "tweets.dat", &tweet_table(state))?);
        written.push(write_file(dir, "retweets.dat", &retweet_table(state))?);
    }
    if toggles.cascades {
        written.push(write_file(dir, "cascade_top.dat", &cascade_top(state))?);
    }
    if toggles.summary {
        written.push(write_file(dir, "summary.dat", &summary(state, stop))?);
    }
    if toggles.gexf {
        written.push(write_file(dir, "network.gexf", &gexf(state))?);
    }
    if toggles.checkpoint {
        let path = dir.join("checkpoint.bin");
        checkpoint::save(state, &path)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimulationConfig;
    use crate::sim::StepResult;

    fn run_state(extra: &str, events: usize) -> SimulationState {
        let text = format!(
            r#"
schema_version = 1
seed = 11
initial_agents = 20
max_agents = 20

[[agent_types]]
name = "standard"
follow_rate = 0.1
tweet_rate = 0.05
hashtag_probability = 0.5

[alpha]
musical = 0.8
political = 0.8
humorous = 0.8

[omega]
form = "exponential"
t_min = 0.0
t_max = 20.0
{extra}
"#
        );
        let mut state = SimulationState::new(SimulationConfig::from_toml_str(&text).unwrap());
        for _ in 0..events {
            match state.step() {
                StepResult::Event(_) => {}
                StepResult::Halted(stop) => panic!("halted early: {stop:?}"),
            }
        }
        state
    }

    #[test]
    fn degree_masses_sum_to_one_and_rows_are_sparse() {
        let state = run_state("", 2_000);
        let table = degree_table(&state.degree_histogram(DegreeFlavor::Cumulative));
        let mut mass = 0.0;
        let mut rows = 0;
        for line in table.lines().skip(1) {
            let cols: Vec<&str> = line.split_whitespace().collect();
            assert_eq!(cols.len(), 5, "{line}");
            let count: u64 = cols[1].parse().unwrap();
            assert!(count > 0, "sparse table must skip empty degrees: {line}");
            mass += cols[2].parse::<f64>().unwrap();
            rows += 1;
        }
        assert!(rows > 0);
        assert!((mass - 1.0).abs() < 1e-9, "total mass {mass}");
    }

    #[test]
    fn empty_population_degree_table_is_a_point_mass_marker() {
        let table = degree_table(&DegreeHistogram::new());
        assert_eq!(table, "# k count p ln_k ln_p\n0 0 1\n");
    }

    #[test]
    fn all_enabled_outputs_land_on_disk_and_are_deterministic() {
        let mut state = run_state("[output]\ngexf = true\ncheckpoint = true\ncascades = true", 2_000);
        let dir = tempfile::tempdir().unwrap();
        let first = write_outputs(&state, &dir.path().join("a"), "test").unwrap();
        assert_eq!(
            first.iter().map(|p| p.file_name().unwrap().to_str().unwrap()).collect::<Vec<_>>(),
            vec![
                "network.edges",
                "degree_in.dat",
                "degree_out.dat",
                "degree_cum.dat",
                "tweets.dat",
                "retweets.dat",
                "cascade_top.dat",
                "summary.dat",
                "network.gexf",
                "checkpoint.bin",
            ]
        );
        let second = write_outputs(&state, &dir.path().join("b"), "test").unwrap();
        for (a, b) in first.iter().zip(&second) {
            assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap(), "{a:?} differs");
        }

        // the checkpoint written alongside is loadable and resumes cleanly
        let mut resumed = checkpoint::load(&dir.path().join("a/checkpoint.bin")).unwrap();
        for _ in 0..100 {
            assert_eq!(format!("{:?}", state.step()), format!("{:?}", resumed.step()));
        }
    }

    #[test]
    fn edge_list_mirrors_network_state() {
        let state = run_state("", 1_000);
        let text = edge_list(&state);
        assert_eq!(text.lines().count(), state.network().edge_count());
        for line in text.lines() {
            let (a, b) = line.split_once(' ').unwrap();
            let a: u32 = a.parse().unwrap();
            let b: u32 = b.parse().unwrap();
            assert!(state.store().get(a).follows(b));
        }
    }

    #[test]
    fn tweet_and_retweet_tables_agree_with_cascade_records() {
        let state = run_state("", 4_000);
        let tweets = tweet_table(&state);
        let retweets = retweet_table(&state);
        assert_eq!(tweets.lines().count() - 1, state.diffusion().cascades().len());
        let total_rebroadcasts: u64 = state
            .diffusion()
            .cascades()
            .iter()
            .map(|c| c.rebroadcast_events)
            .sum();
        assert!(total_rebroadcasts > 0, "run produced no rebroadcasts");
        assert_eq!(retweets.lines().count() as u64 - 1, total_rebroadcasts);
    }

    #[test]
    fn cascade_top_lists_every_node_once_with_edges_inside() {
        let state = run_state("", 4_000);
        let top = cascade_top(&state);
        let best = state
            .diffusion()
            .cascades()
            .iter()
            .map(|c| c.unique_rebroadcasters())
            .max()
            .unwrap();
        let node_rows = top.lines().filter(|l| l.starts_with("node ")).count();
        let edge_rows = top.lines().filter(|l| l.starts_with("edge ")).count();
        assert_eq!(node_rows, best + 1, "origin plus one node per rebroadcaster");
        assert_eq!(edge_rows, node_rows - 1, "a cascade is a tree");
    }

    #[test]
    fn summary_is_key_value_and_covers_the_counters()  {
        let state = run_state("", 1_500);
        let text = summary(&state, "event_limit");
        let get = |key: &str| -> String {
            text.lines()
                .find_map(|l| l.strip_prefix(&format!("{key} ")))
                .unwrap_or_else(|| panic!("missing key {key}"))
                .to_string()
        };
        assert_eq!(get("seed"), "11");
        assert_eq!(get("agents"), "20");
        assert_eq!(get("events"), "1500");
        assert_eq!(get("stop"), "event_limit");
        assert_eq!(get("edges"), state.network().edge_count().to_string());
    }

    #[test]
    fn gexf_has_a_node_per_agent_and_an_edge_per_follow() {
        let state = run_state("", 800);
        let doc = gexf(&state);
        assert_eq!(doc.matches("<node ").count(), state.store().len());
        assert_eq!(doc.matches("<edge ").count(), state.network().edge_count());
        assert!(doc.ends_with("</gexf>\n"));
    }
}
