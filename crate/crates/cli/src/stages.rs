//! Pipeline stages. Each stage reads documented artifacts under the output
//! directory, writes its own under `<out>/<stage>/`, and records a manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use alignet_core::aggregate::{aggregate_users, polarity_labels, read_aggregates_csv, write_aggregates_csv, PolarityLabel};
use alignet_core::cluster::{assemble_clusters, elbow_select, profile_vectors, read_cluster_map, write_clusters_csv, write_wss_csv};
use alignet_core::community::{
    follower_weights, intersect_partitions, mention_weights, prune_small, stability_scan, subcommunity_profiles,
    write_profiles_csv, Partition, StabilityScan,
};
use alignet_core::corpus::{filter_hashtags, filter_window, parse_corpus, parse_followers, Schema};
use alignet_core::graph::{align_networks, build_mention_graph, read_nodes, reciprocal_subgraph, summary_stats, write_nodes};
use alignet_core::lexicon::{load_lexicon, read_scores_csv, score_corpus, write_scores_csv, TEST_LEXICON_TSV};
use alignet_core::null_models::{correlation_null_test, label_permutation_test_over, link_fractions_over, RandTestResult};
use alignet_core::report::{
    activity_timeseries, cluster_interactions, cluster_link_fractions, evaluate_alignment, evaluate_groups,
    read_annotations, sample_for_annotation, ClusterMap,
};
use alignet_core::rng::derive_seed;
use alignet_core::synth::{generate, read_truth_csv, roundtrip_report, write_outputs, SynthConfig, DAY};
use alignet_core::{Corpus, DirectedGraph, FollowerGraph, InteractionGraph, Lexicon};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{AggregateNetwork, PipelineConfig};
use crate::error::CliError;
use crate::manifest::Recorder;

type Result<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Synth,
    Ingest,
    Score,
    Graph,
    Aggregate,
    Nulltest,
    Communities,
    Intersect,
    Cluster,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Synth,
        Stage::Ingest,
        Stage::Score,
        Stage::Graph,
        Stage::Aggregate,
        Stage::Nulltest,
        Stage::Communities,
        Stage::Intersect,
        Stage::Cluster,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Score => "score",
            Stage::Graph => "graph",
            Stage::Aggregate => "aggregate",
            Stage::Nulltest => "nulltest",
            Stage::Communities => "communities",
            Stage::Intersect => "intersect",
            Stage::Cluster => "cluster",
            Stage::Report => "report",
        }
    }

    fn deps(self) -> &'static [Stage] {
        match self {
            Stage::Synth | Stage::Ingest => &[],
            Stage::Score => &[Stage::Ingest],
            Stage::Graph => &[Stage::Ingest, Stage::Score],
            Stage::Aggregate => &[Stage::Graph],
            Stage::Nulltest => &[Stage::Graph, Stage::Aggregate],
            Stage::Communities => &[Stage::Graph],
            Stage::Intersect => &[Stage::Communities, Stage::Aggregate],
            Stage::Cluster => &[Stage::Intersect, Stage::Aggregate],
            Stage::Report => &[Stage::Cluster, Stage::Graph, Stage::Score],
        }
    }

    /// Artifacts every run of the stage leaves behind.
    pub fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Synth => &["synth/corpus.jsonl", "synth/followers.csv", "synth/truth.csv"],
            Stage::Ingest => &["ingest/corpus.jsonl", "ingest/followers.csv"],
            Stage::Score => &["score/scores.csv"],
            Stage::Graph => &["graph/mention_edges.csv", "graph/follower_edges.csv", "graph/aligned_nodes.csv"],
            Stage::Aggregate => &["aggregate/users.csv"],
            Stage::Nulltest => &["nulltest/correlation.json", "nulltest/link_fractions.json"],
            Stage::Communities => &["communities/mention_partition.csv", "communities/follower_partition.csv"],
            Stage::Intersect => &["intersect/cells.csv", "intersect/profiles.csv"],
            Stage::Cluster => &["cluster/clusters.csv", "cluster/wss.csv"],
            Stage::Report => &["report/report.json"],
        }
    }

    fn seed_index(self) -> u64 {
        Stage::ALL.iter().position(|s| *s == self).unwrap() as u64
    }
}

pub struct Ctx {
    pub cfg: PipelineConfig,
    /// Directory of the config file.
    pub base: PathBuf,
    pub out: PathBuf,
}

impl Ctx {
    pub fn new(cfg: PipelineConfig, base: &Path, out_override: Option<PathBuf>) -> Self {
        let out = out_override.unwrap_or_else(|| base.join(&cfg.out_dir));
        Ctx { cfg, base: base.to_path_buf(), out }
    }

    fn artifact(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn input_path(&self, p: &Path) -> PathBuf {
        self.base.join(p)
    }

    fn uses_synth_inputs(&self) -> bool {
        self.cfg.synth.is_some() && self.cfg.inputs.corpus.is_none()
    }

    fn corpus_input(&self) -> Result<PathBuf> {
        match &self.cfg.inputs.corpus {
            Some(p) => Ok(self.input_path(p)),
            None if self.cfg.synth.is_some() => Ok(self.artifact("synth/corpus.jsonl")),
            None => Err(CliError::Validation("inputs.corpus is not set".into())),
        }
    }

    fn followers_input(&self) -> Result<PathBuf> {
        match &self.cfg.inputs.followers {
            Some(p) => Ok(self.input_path(p)),
            None if self.cfg.synth.is_some() => Ok(self.artifact("synth/followers.csv")),
            None => Err(CliError::Validation("inputs.followers is not set".into())),
        }
    }

    fn truth_input(&self) -> Option<PathBuf> {
        match &self.cfg.inputs.truth {
            Some(p) => Some(self.input_path(p)),
            None if self.uses_synth_inputs() => Some(self.artifact("synth/truth.csv")),
            None => None,
        }
    }

    pub fn seed(&self, stage: Stage) -> u64 {
        derive_seed(self.cfg.seed, stage.seed_index())
    }

    /// Stages whose artifacts `stage` needs, transitively.
    fn upstream(&self, stage: Stage) -> BTreeSet<Stage> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<Stage> = stage.deps().to_vec();
        if stage == Stage::Ingest && self.uses_synth_inputs() {
            stack.push(Stage::Synth);
        }
        while let Some(s) = stack.pop() {
            if seen.insert(s) {
                stack.extend(s.deps());
                if s == Stage::Ingest && self.uses_synth_inputs() {
                    stack.push(Stage::Synth);
                }
            }
        }
        seen
    }

    fn check_upstream(&self, stage: Stage) -> Result<()> {
        for s in self.upstream(stage).into_iter().rev() {
            for rel in s.outputs() {
                let p = self.artifact(rel);
                if !p.is_file() {
                    return Err(CliError::Missing(p));
                }
            }
        }
        Ok(())
    }
}

fn log(stage: Stage, msg: impl AsRef<str>) {
    eprintln!("[{}] {}", stage.name(), msg.as_ref());
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn run_stage(ctx: &Ctx, stage: Stage) -> Result<()> {
    ctx.check_upstream(stage)?;
    let mut rec = Recorder::new(&ctx.out, &ctx.base);
    let (seed, settings) = match stage {
        Stage::Synth => synth(ctx, &mut rec)?,
        Stage::Ingest => ingest(ctx, &mut rec)?,
        Stage::Score => score(ctx, &mut rec)?,
        Stage::Graph => graph(ctx, &mut rec)?,
        Stage::Aggregate => aggregate(ctx, &mut rec)?,
        Stage::Nulltest => nulltest(ctx, &mut rec)?,
        Stage::Communities => communities(ctx, &mut rec)?,
        Stage::Intersect => intersect(ctx, &mut rec)?,
        Stage::Cluster => cluster(ctx, &mut rec)?,
        Stage::Report => report(ctx, &mut rec)?,
    };
    let manifest = rec.finish(stage.name(), seed, settings)?;
    let path = ctx.artifact(&format!("{}/manifest.json", stage.name()));
    write_json(&path, &manifest)?;
    log(stage, format!("wrote {} artifacts", manifest.outputs.len()));
    Ok(())
}

/// Every stage in order; `synth` only when configured.
pub fn run_pipeline(ctx: &Ctx) -> Result<()> {
    for stage in Stage::ALL {
        if stage == Stage::Synth && ctx.cfg.synth.is_none() {
            continue;
        }
        run_stage(ctx, stage)?;
    }
    Ok(())
}

type StageResult = Result<(u64, Value)>;

fn synth(ctx: &Ctx, rec: &mut Recorder) -> StageResult {
    let settings = ctx
        .cfg
        .synth
        .as_ref()
        .ok_or_else(|| CliError::Validation("config has no [synth] section".into()))?;
    let path = rec.input(ctx.input_path(&settings.config))?;
    let mut config = SynthConfig::load(&path)?;
    if let Some(seed) = settings.seed {
        config.seed = seed;
    }
    let out = generate(&config)?;
    let dir = ctx.artifact("synth");
    write_outputs(&out, &dir)?;
    for name in ["corpus.jsonl", "followers.csv", "truth.csv", "planted_scores.csv"] {
        rec.output(&format!("synth/{name}"))?;
    }
    let report = roundtrip_report(&out);
    write_json(&rec.output("synth/roundtrip.json")?, &report)?;
    log(Stage::Synth, format!("{} users, {} messages, {} follower edges", config.user_count(), out.corpus.len(), out.followers.len()));
    if !report.passed() {
        return Err(CliError::Validation(format!("{} synthetic messages do not score as planted", report.mismatches.len())));
    }
    Ok((config.seed, serde_json::to_value(&config)?))
}

fn ingest(ctx: &Ctx, rec: &mut Recorder) -> StageResult {
    let corpus_path = rec.input(ctx.corpus_input()?)?;
    let followers_path = rec.input(ctx.followers_input()?)?;
    let parsed = parse_corpus(&corpus_path, Schema::Jsonl)?;
    for w in &parsed.warnings {
        log(Stage::Ingest, format!("warning: {w}"));
    }
    let mut corpus = parsed.corpus;
    if let Some(w) = ctx.cfg.window {
        corpus = filter_window(&corpus, w.start, w.end)?;
    }
    if !ctx.cfg.hashtags.is_empty() {
        let tags: BTreeSet<String> = ctx.cfg.hashtags.iter().map(|t| t.trim_start_matches('#').to_lowercase()).collect();
        corpus = filter_hashtags(&corpus, &tags)?;
    }
    let followers = parse_followers(&followers_path)?;
    corpus.write_jsonl(&rec.output("ingest/corpus.jsonl")?)?;
    followers.write_csv(&rec.output("ingest/followers.csv")?)?;
    let diagnostics = json!({
        "records": parsed.records,
        "kept": corpus.len(),
        "users": corpus.users().len(),
        "follower_edges": followers.len(),
        "rejects": parsed.rejects,
        "warnings": parsed.warnings,
    });
    write_json(&rec.output("ingest/diagnostics.json")?, &diagnostics)?;
    log(Stage::Ingest, format!("{} of {} records kept, {} rejected", corpus.len(), parsed.records, parsed.rejects.len()));
    Ok((ctx.cfg.seed, json!({ "window": ctx.cfg.window, "hashtags": ctx.cfg.hashtags })))
}

fn read_corpus(rec: &mut Recorder, ctx: &Ctx) -> Result<Corpus> {
    let path = rec.input(ctx.artifact("ingest/corpus.jsonl"))?;
    let parsed = parse_corpus(&path, Schema::Jsonl)?;
    if !parsed.rejects.is_empty() {
        return Err(CliError::Validation(format!("{} has {} unreadable records", path.display(), parsed.rejects.len())));
    }
    Ok(parsed.corpus)
}

fn score(ctx: &Ctx, rec: &mut Recorder) -> StageResult {
    let corpus = read_corpus(rec, ctx)?;
    let lexicon = match &ctx.cfg.inputs.lexicon {
        Some(p) => load_lexicon(&rec.input(ctx.input_path(p))?)?,
        None => {
            rec.input_bytes("builtin:test_lexicon.tsv", TEST_LEXICON_TSV.as_bytes());
            Lexicon::test_lexicon()
        }
    };
    let scores = score_corpus(&lexicon, &corpus);
    write_scores_csv(&scores, &rec.output("score/scores.csv")?)?;
    log(Stage::Score, format!("scored {} messages with {} terms", scores.len(), lexicon.term_count()));
    Ok((ctx.cfg.seed, json!({})))
}

fn graph(ctx: &Ctx, rec: &mut Recorder) -> StageResult {
    let corpus = read_corpus(rec, ctx)?;
    let scores = read_scores_csv(&rec.input(ctx.artifact("score/scores.csv"))?)?;
    let followers_list = parse_followers(&rec.input(ctx.artifact("ingest/followers.csv"))?)?;
    let mentions = build_mention_graph(&corpus, &scores)?;
    let mut users: BTreeSet<String> = corpus.users().clone();
    users.extend(mentions.nodes().iter().cloned());
    let followers = FollowerGraph::from_edge_list(&followers_list).induced(&users);
    let m_recip = reciprocal_subgraph(&mentions);
    let f_recip = reciprocal_subgraph(&followers);
    let (m_aligned, f_aligned) = align_networks(&m_recip, &f_recip)?;
    mentions.write_csv(&rec.output("graph/mention_edges.csv")?)?;
    followers.write_csv(&rec.output("graph/follower_edges.csv")?)?;
    write_nodes(m_aligned.nodes(), &rec.output("graph/aligned_nodes.csv")?)?;
    let stats = json!({
        "mention": summary_stats(&mentions),
        "mention_reciprocal": summary_stats(&m_recip),
        "mention_aligned": summary_stats(&m_aligned),
        "follower": summary_stats(&followers),
        "follower_reciprocal": summary_stats(&f_recip),
        "follower_aligned": summary_stats(&f_aligned),
    });
    write_json(&rec.output("graph/stats.json")?, &stats)?;
    log(
        Stage::Graph,
        format!("{} mention edges, {} follower edges, {} aligned users", mentions.edge_count(), followers.edge_count(), m_aligned.node_count()),
    );
    Ok((ctx.cfg.seed, json!({})))
}

fn read_mentions(rec: &mut Recorder, ctx: &Ctx) -> Result<InteractionGraph> {
    Ok(InteractionGraph::read_csv(&rec.input(ctx.artifact("graph/mention_edges.csv"))?, None)?)
}

fn read_followers(rec: &mut Recorder, ctx: &Ctx) -> Result<FollowerGraph> {
    Ok(FollowerGraph::read_csv(&rec.input(ctx.artifact("graph/follower_edges.csv"))?, None)?)
}

/// The mention network the user aggregates are computed on.
fn sentiment_network(ctx: &Ctx, g: &InteractionGraph) -> InteractionGraph {
    match ctx.cfg.aggregate.network {
        AggregateNetwork::Reciprocal => reciprocal_subgraph(g),
        AggregateNetwork::Full => g.clone(),
    }
}

fn aggregate(ctx: &Ctx, rec: &mut Recorder) -> StageResult {
    let g = sentiment_network(ctx, &read_mentions(rec, ctx)?);
    let aggs = aggregate_users(&g, ctx.cfg.aggregate.neighbours);
    write_aggregates_csv(&aggs, ctx.cfg.aggregate.label_field, &rec.output("aggregate/users.csv")?)?;
    log(Stage::Aggregate, format!("{} users", aggs.len()));
    Ok((ctx.cfg.seed, serde_json::to_value(&ctx.cfg.aggregate)?))
}

#[derive(Serialize)]
struct PairResult<'a> {
    network: &'a str,
    pair: String,
    #[serde(flatten)]
    result: &'a RandTestResult,
}

fn nulltest(ctx: &Ctx, rec: &mut Recorder) -> StageResult {
    let seed = ctx.seed(Stage::Nulltest);
    let band = ctx.cfg.band()?;
    let settings = &ctx.cfg.nulltest;
    let mentions = sentiment_network(ctx, &read_mentions(rec, ctx)?);
    let followers = match ctx.cfg.aggregate.network {
        AggregateNetwork::Reciprocal => reciprocal_subgraph(&read_followers(rec, ctx)?),
        AggregateNetwork::Full => read_followers(rec, ctx)?,
    };
    let aggs = read_aggregates_csv(&rec.input(ctx.artifact("aggregate/users.csv"))?)?;

    let corr = correlation_null_test(&mentions, settings.iterations, band, derive_seed(seed, 0))?;
    write_json(&rec.output("nulltest/correlation.json")?, &corr)?;
    log(Stage::Nulltest, format!("in/out correlation {} ({:?})", corr.observed, corr.verdict));

    let mut labels = polarity_labels(&aggs, ctx.cfg.aggregate.label_field);
    for u in followers.nodes() {
        labels.entry(u.clone()).or_insert(PolarityLabel::Unknown);
    }
    let universe = [PolarityLabel::Positive, PolarityLabel::Negative, PolarityLabel::Unknown];
    let mut pairs = Vec::new();
    let mut observed = Vec::new();
    let mut samples = Vec::new();
    for (i, (name, g)) in [("mention", &mentions as &dyn DirectedDyn), ("follower", &followers as &dyn DirectedDyn)].into_iter().enumerate() {
        if g.edges_len() == 0 {
            log(Stage::Nulltest, format!("{name} network has no edges; skipping label test"));
            continue;
        }
        let (fractions, tests) = g.label_test(&labels, &universe, settings, band, derive_seed(seed, 1 + i as u64))?;
        observed.push(json!({ "network": name, "fractions": fractions }));
        for ((a, b), r) in tests {
            samples.push((format!("{name}:{}{}", a.short(), b.short()), r.null_samples.clone()));
            pairs.push((name, format!("{}{}", a.short(), b.short()), r));
        }
    }
    let records: Vec<PairResult> = pairs.iter().map(|(n, p, r)| PairResult { network: n, pair: p.clone(), result: r }).collect();
    write_json(&rec.output("nulltest/link_fractions.json")?, &json!({ "observed": observed, "tests": records }))?;

    if settings.dump_samples {
        let mut out = String::from("test,iteration,value\n");
        for (i, v) in corr.null_samples.iter().enumerate() {
            let _ = writeln!(out, "correlation,{i},{v}");
        }
        for (name, values) in &samples {
            for (i, v) in values.iter().enumerate() {
                let _ = writeln!(out, "{name},{i},{v}");
            }
        }
        fs::write(rec.output("nulltest/null_samples.csv")?, out)?;
    }
    Ok((seed, serde_json::to_value(settings)?))
}

type LabelTest = (
    alignet_core::null_models::LinkFractions<PolarityLabel>,
    BTreeMap<(PolarityLabel, PolarityLabel), RandTestResult>,
);

/// Lets the label test run over either network type in one loop.
trait DirectedDyn {
    fn edges_len(&self) -> usize;
    fn label_test(
        &self,
        labels: &BTreeMap<String, PolarityLabel>,
        universe: &[PolarityLabel],
        settings: &crate::config::NullTestSettings,
        band: alignet_core::null_models::Band,
        seed: u64,
    ) -> Result<LabelTest>;
}

impl<G: DirectedGraph + Sync> DirectedDyn for G {
    fn edges_len(&self) -> usize {
        self.edge_count()
    }

    fn label_test(
        &self,
        labels: &BTreeMap<String, PolarityLabel>,
        universe: &[PolarityLabel],
        settings: &crate::config::NullTestSettings,
        band: alignet_core::null_models::Band,
        seed: u64,
    ) -> Result<LabelTest> {
        let fractions = link_fractions_over(self, labels, Some(universe))?;
        let tests = label_permutation_test_over(self, labels, Some(universe), settings.iterations, band, seed, settings.label_resampling)?;
        Ok((fractions, tests))
    }
}

fn aligned(rec: &mut Recorder, ctx: &Ctx) -> Result<(InteractionGraph, FollowerGraph)> {
    let nodes = read_nodes(&rec.input(ctx.artifact("graph/aligned_nodes.csv"))?)?;
    let m = reciprocal_subgraph(&read_mentions(rec, ctx)?).induced(&nodes);
    let f = reciprocal_subgraph(&read_followers(rec, ctx)?).induced(&nodes);
    Ok((m, f))
}

fn scan_json(scan: &StabilityScan) -> Value {
    json!({
        "selected_time": scan.selected_time,
        "k": scan.selected.k(),
        "points": scan.points,
    })
}

fn communities(ctx: &Ctx, rec: &mut Recorder) -> StageResult {
    let seed = ctx.seed(Stage::Communities);
    let c = &ctx.cfg.communities;
    let (m, f) = aligned(rec, ctx)?;
    let m_scan = stability_scan(&mention_weights::<f64>(&m), &c.times, c.restarts, derive_seed(seed, 0))?;
    let f_scan = stability_scan(&follower_weights::<f64>(&f), &c.times, c.restarts, derive_seed(seed, 1))?;
    m_scan.selected.write_csv(&rec.output("communities/mention_partition.csv")?)?;
    f_scan.selected.write_csv(&rec.output("communities/follower_partition.csv")?)?;
    write_json(&rec.output("communities/scan.json")?, &json!({ "mention": scan_json(&m_scan), "follower": scan_json(&f_scan) }))?;
    log(
        Stage::Communities,
        format!("mention: {} communities at t={}; follower: {} at t={}", m_scan.selected.k(), m_scan.selected_time, f_scan.selected.k(), f_scan.selected_time),
    );
    Ok((seed, json!({ "times": c.times, "restarts": c.restarts })))
}

fn intersect(ctx: &Ctx, rec: &mut Recorder) -> StageResult {
    let m = Partition::read_csv(&rec.input(ctx.artifact("communities/mention_partition.csv"))?)?;
    let f = Partition::read_csv(&rec.input(ctx.artifact("communities/follower_partition.csv"))?)?;
    let aggs = read_aggregates_csv(&rec.input(ctx.artifact("aggregate/users.csv"))?)?;
    let cells = intersect_partitions(&m, &f)?;
    let (kept, removed) = prune_small(&cells, ctx.cfg.communities.min_cell_size)?;
    let profiles = subcommunity_profiles(&kept, &aggs)?;
    kept.write_csv(&rec.output("intersect/cells.csv")?)?;
    let mut body = String::from("user\n");
    for u in &removed {
        let _ = writeln!(body, "{u}");
    }
    fs::write(rec.output("intersect/removed.csv")?, body)?;
    write_profiles_csv(&profiles, &rec.output("intersect/profiles.csv")?)?;
    log(Stage::Intersect, format!("{} cells, {} kept, {} users pruned", cells.k(), kept.k(), removed.len()));
    Ok((ctx.cfg.seed, json!({ "min_cell_size": ctx.cfg.communities.min_cell_size })))
}

fn cluster(ctx: &Ctx, rec: &mut Recorder) -> StageResult {
    let seed = ctx.seed(Stage::Cluster);
    let s = &ctx.cfg.clustering;
    let cells = Partition::read_csv(&rec.input(ctx.artifact("intersect/cells.csv"))?)?;
    let aggs = read_aggregates_csv(&rec.input(ctx.artifact("aggregate/users.csv"))?)?;
    let profiles = subcommunity_profiles(&cells, &aggs)?;
    let points = profile_vectors(&profiles, s.standardize);
    let weights: Vec<f64> = profiles.iter().map(|p| p.size() as f64).collect();
    let k_max = s.k_max.min(points.len());
    if k_max < s.k_min + 2 {
        return Err(CliError::Validation(format!(
            "{} sub-communities are too few for an elbow over k >= {}",
            points.len(),
            s.k_min
        )));
    }
    let sel = elbow_select(&points, s.weighted.then_some(weights.as_slice()), s.k_min, k_max, s.restarts, seed)?;
    let clusters = assemble_clusters(&sel.selected, &profiles)?;
    write_clusters_csv(&clusters, &rec.output("cluster/clusters.csv")?)?;
    write_wss_csv(&sel.curve, &rec.output("cluster/wss.csv")?)?;
    let summary = json!({
        "k": sel.k,
        "wss": sel.curve,
        "centroids": sel.selected.centroids,
        "clusters": clusters.iter().map(|c| json!({
            "index": c.index,
            "size": c.size(),
            "cells": c.cells,
            "mean_s_out": c.mean_s_out,
        })).collect::<Vec<_>>(),
    });
    write_json(&rec.output("cluster/summary.json")?, &summary)?;
    log(Stage::Cluster, format!("elbow at k={} over {} cells", sel.k, points.len()));
    Ok((seed, serde_json::to_value(s)?))
}

fn day_boundaries(ctx: &Ctx, corpus: &Corpus) -> Vec<i64> {
    let (Some(first), Some(last)) = (corpus.messages().first(), corpus.messages().last()) else {
        return Vec::new();
    };
    let start = ctx.cfg.report.day_start.unwrap_or(first.timestamp.div_euclid(DAY) * DAY);
    let days = ctx
        .cfg
        .report
        .days
        .unwrap_or_else(|| ((last.timestamp - start).div_euclid(DAY) + 1).max(1) as usize);
    (0..=days as i64).map(|d| start + d * DAY).collect()
}

fn fraction_records(f: &BTreeMap<(usize, usize), f64>) -> Vec<Value> {
    f.iter().map(|((a, b), v)| json!({ "from": a, "to": b, "fraction": v })).collect()
}

fn report(ctx: &Ctx, rec: &mut Recorder) -> StageResult {
    let seed = ctx.seed(Stage::Report);
    let corpus = read_corpus(rec, ctx)?;
    let scores = read_scores_csv(&rec.input(ctx.artifact("score/scores.csv"))?)?;
    let mentions = read_mentions(rec, ctx)?;
    let followers = read_followers(rec, ctx)?;
    let clusters: ClusterMap = read_cluster_map(&rec.input(ctx.artifact("cluster/clusters.csv"))?)?;
    let members: BTreeSet<String> = clusters.keys().cloned().collect();
    let m_in = mentions.induced(&members);
    let f_in = followers.induced(&members);

    let interactions = cluster_interactions(&corpus, &m_in, &followers, &clusters, ctx.cfg.report.directed_coverage)?;
    let mut csv = String::from(
        "from,to,n_original,n_reply,n_retweet,p_original,p_reply,p_retweet,cov_original,cov_reply,cov_retweet,sent_min,sent_q1,sent_median,sent_q3,sent_max,sent_mean\n",
    );
    for r in &interactions {
        let s = r.sentiment;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.from,
            r.to,
            r.counts.original,
            r.counts.reply,
            r.counts.retweet,
            r.proportion[0],
            r.proportion[1],
            r.proportion[2],
            num(r.follower_coverage[0]),
            num(r.follower_coverage[1]),
            num(r.follower_coverage[2]),
            num(s.map(|s| s.min)),
            num(s.map(|s| s.q1)),
            num(s.map(|s| s.median)),
            num(s.map(|s| s.q3)),
            num(s.map(|s| s.max)),
            num(s.map(|s| s.mean)),
        );
    }
    fs::write(rec.output("report/interactions.csv")?, csv)?;

    let activity = activity_timeseries(&corpus, &scores, &clusters, &day_boundaries(ctx, &corpus))?;
    let mut csv = String::from("cluster,day,day_start,tweets_per_user,mean_sentiment\n");
    for a in &activity {
        let _ = writeln!(csv, "{},{},{},{},{}", a.cluster, a.day, a.day_start, a.tweets_per_user, num(a.mean_sentiment));
    }
    fs::write(rec.output("report/activity.csv")?, csv)?;

    let mut warnings = Vec::new();
    let evaluation = match &ctx.cfg.inputs.annotations {
        Some(p) => {
            let mut ann = read_annotations(&rec.input(ctx.input_path(p))?)?;
            let before = ann.len();
            ann.retain(|u, _| clusters.contains_key(u));
            if ann.len() < before {
                warnings.push(format!("{} annotated users are not in any cluster and were ignored", before - ann.len()));
            }
            let ev = evaluate_alignment(&ann, &clusters)?;
            warnings.extend(ev.warnings.iter().cloned());
            write_json(&rec.output("report/evaluation.json")?, &ev)?;
            Some(ev)
        }
        None => None,
    };
    let truth_eval = match ctx.truth_input() {
        Some(p) => {
            let truth = read_truth_csv(&rec.input(p)?)?;
            let ev = evaluate_groups(&truth, &clusters)?;
            write_json(&rec.output("report/truth_evaluation.json")?, &ev)?;
            log(Stage::Report, format!("balanced accuracy against planted groups: {}", ev.balanced_accuracy));
            Some(ev)
        }
        None => None,
    };
    if let Some(f) = ctx.cfg.report.annotation_sample {
        let sample = sample_for_annotation(&clusters, f, derive_seed(seed, 0))?;
        let mut csv = String::from("cluster,user\n");
        for (c, users) in &sample {
            for u in users {
                let _ = writeln!(csv, "{c},{u}");
            }
        }
        fs::write(rec.output("report/annotation_sample.csv")?, csv)?;
    }
    for w in &warnings {
        log(Stage::Report, format!("warning: {w}"));
    }

    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for c in clusters.values() {
        *sizes.entry(*c).or_default() += 1;
    }
    let report = json!({
        "clusters": sizes.iter().map(|(c, n)| json!({ "cluster": c, "size": n })).collect::<Vec<_>>(),
        "mention_link_fractions": fraction_records(&cluster_link_fractions(&m_in, &clusters)?),
        "follower_link_fractions": fraction_records(&cluster_link_fractions(&f_in, &clusters)?),
        "interactions": interactions,
        "evaluation": evaluation,
        "truth_evaluation": truth_eval,
        "warnings": warnings,
    });
    write_json(&rec.output("report/report.json")?, &report)?;
    Ok((seed, serde_json::to_value(&ctx.cfg.report)?))
}
