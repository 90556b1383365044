// Copyright 2026 The tagrec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tagrec/pipeline.hpp"

#include <gtest/gtest.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "synth.hpp"
#include "tagrec/evaluation.hpp"
#include "tagrec/ingest.hpp"

namespace tagrec {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = fs::temp_directory_path() /
            ("tagrec_pipeline_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  const auto content = detail::read_file(p);
  EXPECT_TRUE(content.has_value()) << p;
  return content.value_or("");
}

void spit(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

TEST(FieldEscaping, RoundTripsControlBytes) {
  EXPECT_EQ(detail::escape_field("a\tb\\c\nd\re"), "a\\tb\\\\c\\nd\\re");
  EXPECT_EQ(detail::escape_field("plain"), "plain");
  const std::string tricky[] = {
      "", "\t", "\\", "\\t", "tab\tand\\slash", "caf\xC3\xA9\nnewline",
      "\r\n", "\\\\\\",
  };
  for (const std::string& s : tricky) {
    const std::string escaped = detail::escape_field(s);
    EXPECT_EQ(escaped.find('\t'), std::string::npos) << s;
    EXPECT_EQ(escaped.find('\n'), std::string::npos) << s;
    const auto back = detail::unescape_field(escaped);
    ASSERT_TRUE(back.has_value()) << s;
    EXPECT_EQ(*back, s);
  }
  // Unknown escapes and a trailing backslash are structural errors.
  EXPECT_FALSE(detail::unescape_field("\\x").has_value());
  EXPECT_FALSE(detail::unescape_field("abc\\").has_value());
}

TEST(ArtifactHeaders, FormatAndParseRoundTrip) {
  const std::string line = detail::format_header(
      "tagrec-foo", {{"alpha", "1"}, {"hash", "00ff"}});
  EXPECT_EQ(line, "# tagrec-foo v1\talpha=1\thash=00ff");
  const auto h = detail::parse_artifact_header(line);
  ASSERT_TRUE(h.has_value());
  EXPECT_EQ(h->name, "tagrec-foo");
  EXPECT_EQ(h->field("alpha"), "1");
  EXPECT_EQ(h->field("hash"), "00ff");
  EXPECT_EQ(h->field("missing"), "");

  EXPECT_FALSE(detail::parse_artifact_header("").has_value());
  EXPECT_FALSE(detail::parse_artifact_header("# ").has_value());
  EXPECT_FALSE(detail::parse_artifact_header("tagrec-foo v1").has_value());
  EXPECT_FALSE(detail::parse_artifact_header("# tagrec-foo v2").has_value());
  EXPECT_FALSE(
      detail::parse_artifact_header("# tagrec-foo v1\tnoequals").has_value());
}

TEST(AtomicWrites, LeaveNoTempFileBehind) {
  TempDir dir("atomic");
  const fs::path target = dir.path() / "artifact.tsv";
  detail::write_file_atomic(target, "payload\n");
  EXPECT_EQ(slurp(target), "payload\n");
  EXPECT_FALSE(fs::exists(dir.path() / "artifact.tsv.tmp"));
  // Overwrite through the same path stays atomic.
  detail::write_file_atomic(target, "payload2\n");
  EXPECT_EQ(slurp(target), "payload2\n");
  EXPECT_FALSE(fs::exists(dir.path() / "artifact.tsv.tmp"));
}

TEST(DirectoryHashing, SensitiveToContentAndNames) {
  TempDir dir("dirhash");
  spit(dir.path() / "a.dat", "one\n");
  spit(dir.path() / "b.dat", "two\n");
  const std::uint64_t h1 = hash_directory(dir.path());
  EXPECT_EQ(hash_directory(dir.path()), h1);

  spit(dir.path() / "b.dat", "two!\n");
  const std::uint64_t h2 = hash_directory(dir.path());
  EXPECT_NE(h2, h1);

  // Same bytes under a different filename is a different source state.
  spit(dir.path() / "b.dat", "two\n");
  EXPECT_EQ(hash_directory(dir.path()), h1);
  fs::rename(dir.path() / "b.dat", dir.path() / "c.dat");
  EXPECT_NE(hash_directory(dir.path()), h1);
}

// Shared small corpus for artifact roundtrips.
struct Corpus {
  Folksonomy train, test;
  FolkIndex train_ix;
  std::uint64_t train_hash = 0;

  explicit Corpus(std::uint64_t seed) {
    synth::CorpusSpec spec;
    spec.users = 20;
    spec.tags = 30;
    spec.resources = 40;
    spec.assignments = 400;
    spec.groups = 3;
    spec.seed = seed;
    const Folksonomy all = synth::make_folksonomy(spec);
    std::tie(train, test) = split(all, SplitSpec{});
    train_ix = FolkIndex::build(train);
    train_hash = hash_folksonomy(train);
  }
};

TEST(FolksonomyArtifact, RoundTripsThroughSerialization) {
  TempDir dir("folk");
  const Corpus c(41);
  const fs::path path = dir.path() / "train.tsv";
  detail::write_file_atomic(
      path, serialize_folksonomy(c.train, "train", 0x1234, 0x5678));

  const auto loaded = load_folksonomy(path);
  ASSERT_TRUE(loaded.has_value());
  EXPECT_EQ(loaded->folksonomy, c.train);
  EXPECT_EQ(loaded->header.field("kind"), "train");
  EXPECT_EQ(loaded->header.field("source_hash"), to_hex16(0x1234));
  EXPECT_EQ(loaded->header.field("config_hash"), to_hex16(0x5678));
  EXPECT_EQ(loaded->header.field("assignments"),
            std::to_string(c.train.assignments.size()));
}

TEST(FolksonomyArtifact, RejectsStructuralDamageAsCacheMiss) {
  TempDir dir("folkbad");
  const Corpus c(42);
  const std::string good =
      serialize_folksonomy(c.train, "train", 0x1234, 0x5678);
  const fs::path path = dir.path() / "train.tsv";

  EXPECT_FALSE(load_folksonomy(dir.path() / "absent.tsv").has_value());

  // Header count contradicting the body.
  std::string bad = good;
  const std::string want = "assignments=" +
                           std::to_string(c.train.assignments.size());
  bad.replace(bad.find(want), want.size(), "assignments=1");
  spit(path, bad);
  EXPECT_FALSE(load_folksonomy(path).has_value());

  // A row that is not U/T/R/A.
  spit(path, good + "X\t1\n");
  EXPECT_FALSE(load_folksonomy(path).has_value());

  // An assignment referencing an unknown user breaks validation.
  spit(path, good);
  {
    std::string extra = good;
    const std::string a_want = "assignments=" +
                               std::to_string(c.train.assignments.size());
    const std::string a_have = "assignments=" +
                               std::to_string(c.train.assignments.size() + 1);
    extra.replace(extra.find(a_want), a_want.size(), a_have);
    extra += "A\t999999\t0\t0\t1\n";
    spit(path, extra);
    EXPECT_FALSE(load_folksonomy(path).has_value());
  }
}

TEST(GraphArtifact, RoundTripsExactWeights) {
  TempDir dir("graph");
  const Corpus c(43);
  SimParams sp;
  const VariantSpec v{Variant::kCdrTime};
  v.apply(sp);
  const TagGraph g = build_graph(c.train_ix, sp, 1);
  ASSERT_GT(g.num_edges(), 0u);

  const fs::path path = dir.path() / "graph.tsv";
  detail::write_file_atomic(path, serialize_graph(g, v, sp, c.train_hash));

  std::vector<TagId> nodes(g.node_ids);
  const auto loaded = load_graph(path, v, sp, c.train_hash, nodes);
  ASSERT_TRUE(loaded.has_value());
  EXPECT_EQ(loaded->node_ids, g.node_ids);
  // %.17g round-trips doubles exactly.
  EXPECT_EQ(loaded->edges, g.edges);
}

TEST(GraphArtifact, HeaderMismatchesAreCacheMisses) {
  TempDir dir("graphbad");
  const Corpus c(44);
  SimParams sp;
  const VariantSpec v{Variant::kCdrTime};
  v.apply(sp);
  const TagGraph g = build_graph(c.train_ix, sp, 1);
  const fs::path path = dir.path() / "graph.tsv";
  const std::string good = serialize_graph(g, v, sp, c.train_hash);
  detail::write_file_atomic(path, good);
  const std::vector<TagId> nodes(g.node_ids);

  EXPECT_TRUE(load_graph(path, v, sp, c.train_hash, nodes).has_value());

  // Different upstream data.
  EXPECT_FALSE(load_graph(path, v, sp, c.train_hash ^ 1, nodes).has_value());
  // Different graph parameters.
  SimParams other = sp;
  other.tau_ms += 1;
  EXPECT_FALSE(load_graph(path, v, other, c.train_hash, nodes).has_value());
  // Different variant.
  EXPECT_FALSE(load_graph(path, VariantSpec{Variant::kSemCdr}, sp,
                          c.train_hash, nodes)
                   .has_value());
  // Node universe mismatch.
  std::vector<TagId> fewer(nodes.begin(), nodes.end() - 1);
  EXPECT_FALSE(load_graph(path, v, sp, c.train_hash, fewer).has_value());
  // Corrupt edge row.
  spit(path, good + "not\ta\trow\n");
  EXPECT_FALSE(load_graph(path, v, sp, c.train_hash, nodes).has_value());
}

TEST(PartitionArtifact, RoundTripsAndRecomputesQ) {
  TempDir dir("part");
  const Corpus c(45);
  SimParams sp;
  const VariantSpec v{Variant::kCdrTime};
  v.apply(sp);
  const TagGraph g = build_graph(c.train_ix, sp, 1);
  const Partition part = louvain(g, 7);
  const std::uint64_t graph_hash = 0xabcd;

  const fs::path path = dir.path() / "partition.tsv";
  detail::write_file_atomic(path,
                            serialize_partition(part, v, 7, graph_hash));

  const auto loaded = load_partition(path, v, 7, graph_hash, g);
  ASSERT_TRUE(loaded.has_value());
  EXPECT_EQ(loaded->community_of, part.community_of);
  EXPECT_EQ(loaded->communities, part.communities);
  EXPECT_EQ(loaded->modularity, part.modularity);

  // Wrong seed or upstream hash: miss.
  EXPECT_FALSE(load_partition(path, v, 8, graph_hash, g).has_value());
  EXPECT_FALSE(load_partition(path, v, 7, graph_hash ^ 1, g).has_value());

  // A tampered Q fails the integrity recomputation even though the header
  // is otherwise self-consistent.
  Partition wrong_q = part;
  wrong_q.modularity += 0.01;
  detail::write_file_atomic(path,
                            serialize_partition(wrong_q, v, 7, graph_hash));
  EXPECT_FALSE(load_partition(path, v, 7, graph_hash, g).has_value());

  // Membership rows must cover exactly the graph's nodes.
  Partition moved = part;
  ASSERT_FALSE(moved.community_of.empty());
  moved.community_of[0].first = 123456;
  detail::write_file_atomic(path,
                            serialize_partition(moved, v, 7, graph_hash));
  EXPECT_FALSE(load_partition(path, v, 7, graph_hash, g).has_value());
}

TEST(RecommendationsArtifact, RoundTripsRowsAndGuardsMeta) {
  TempDir dir("recs");
  const Corpus c(46);
  SimParams sp;
  const VariantSpec v{Variant::kCdrTime};
  v.apply(sp);
  const TagGraph g = build_graph(c.train_ix, sp, 1);
  const Partition part = louvain(g, 7);
  const MembershipTable table =
      prune(MembershipTable::build(part, c.train_ix), 0.1);
  const std::vector<RecommendationList> rows = recommend_all(
      part, table, c.train_ix, 5, 1, [](UserId) { return true; });
  ASSERT_FALSE(rows.empty());

  const std::string meta =
      recommendations_meta_line(v, 5, 0.1, c.train_hash, 0x77);
  const fs::path path = dir.path() / "recommendations.jsonl";
  detail::write_file_atomic(path, serialize_recommendations(rows, meta));

  const auto loaded = load_recommendations(path, meta);
  ASSERT_TRUE(loaded.has_value());
  ASSERT_EQ(loaded->size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ((*loaded)[i].user, rows[i].user);
    ASSERT_EQ((*loaded)[i].items.size(), rows[i].items.size());
    for (std::size_t j = 0; j < rows[i].items.size(); ++j) {
      // Resource ids and rank order are exact; scores are stored at six
      // decimals, which the scorer never reads.
      EXPECT_EQ((*loaded)[i].items[j].first, rows[i].items[j].first);
      EXPECT_NEAR((*loaded)[i].items[j].second, rows[i].items[j].second,
                  5e-7);
    }
  }

  // Any drift in the expected meta line is a miss.
  const std::string other =
      recommendations_meta_line(v, 5, 0.2, c.train_hash, 0x77);
  EXPECT_FALSE(load_recommendations(path, other).has_value());

  // Rows out of ascending user order are rejected.
  if (rows.size() >= 2) {
    std::vector<RecommendationList> swapped = rows;
    std::swap(swapped.front(), swapped.back());
    detail::write_file_atomic(path,
                              serialize_recommendations(swapped, meta));
    EXPECT_FALSE(load_recommendations(path, meta).has_value());
  }

  // Truncated JSON is a miss, not an exception.
  spit(path, meta + "\n{\"user\":1,\"items\":[[1,");
  EXPECT_FALSE(load_recommendations(path, meta).has_value());
}

// Full pipeline fixture: a raw data directory plus a work directory.
struct PipelineFixture {
  TempDir dir;
  fs::path data_dir;
  PipelineConfig cfg;

  explicit PipelineFixture(const std::string& tag, std::uint64_t seed)
      : dir("run_" + tag) {
    data_dir = dir.path() / "data";
    synth::RawDirSpec raw;
    raw.corpus.users = 25;
    raw.corpus.tags = 30;
    raw.corpus.resources = 50;
    raw.corpus.assignments = 500;
    raw.corpus.groups = 3;
    raw.corpus.seed = seed;
    raw.duplicate_assignment_rows = 3;
    synth::write_raw_dir(data_dir, raw);

    cfg.data_dir = data_dir;
    cfg.work_dir = dir.path() / "work";
    cfg.k_values = {5, 10};
    cfg.threads = 2;
  }
};

std::vector<fs::path> artifact_paths(const PipelineConfig& cfg,
                                     const std::string& variant) {
  return {cfg.work_dir / "train.tsv",
          cfg.work_dir / "test.tsv",
          cfg.work_dir / ("graph_" + variant + ".tsv"),
          cfg.work_dir / ("partition_" + variant + ".tsv"),
          cfg.work_dir / ("recommendations_" + variant + ".jsonl"),
          cfg.work_dir / ("report_" + variant + ".tsv"),
          cfg.work_dir / ("report_" + variant + ".json")};
}

std::map<std::string, std::string> artifact_bytes(const PipelineConfig& cfg,
                                                  const std::string& variant) {
  std::map<std::string, std::string> out;
  for (const fs::path& p : artifact_paths(cfg, variant))
    out[p.filename().string()] = slurp(p);
  return out;
}

void expect_no_tmp_files(const fs::path& dir) {
  for (const auto& entry : fs::directory_iterator(dir)) {
    EXPECT_FALSE(entry.path().string().ends_with(".tmp"))
        << entry.path();
  }
}

struct HitPattern {
  bool ingest, graph, communities, recommend, evaluate;
};

void expect_hits(const PipelineRun& run, const HitPattern& want,
                 const std::string& label) {
  EXPECT_EQ(run.ingest.cache_hit, want.ingest) << label << ": ingest";
  EXPECT_EQ(run.graph.cache_hit, want.graph) << label << ": graph";
  EXPECT_EQ(run.communities.cache_hit, want.communities)
      << label << ": communities";
  EXPECT_EQ(run.recommend.cache_hit, want.recommend)
      << label << ": recommend";
  EXPECT_EQ(run.evaluate.cache_hit, want.evaluate) << label << ": evaluate";
}

TEST(RunPipeline, ColdRunThenFullCacheHit) {
  PipelineFixture fx("cold", 51);
  std::ostringstream log;

  const PipelineRun first = run_pipeline(fx.cfg, log);
  expect_hits(first, {false, false, false, false, false}, "cold");
  for (const fs::path& p : artifact_paths(fx.cfg, "CDR_TIME"))
    EXPECT_TRUE(fs::exists(p)) << p;
  expect_no_tmp_files(fx.cfg.work_dir);
  const auto bytes = artifact_bytes(fx.cfg, "CDR_TIME");

  const PipelineRun second = run_pipeline(fx.cfg, log);
  expect_hits(second, {true, true, true, true, true}, "warm");
  EXPECT_EQ(second.evaluate.report, first.evaluate.report);
  EXPECT_EQ(artifact_bytes(fx.cfg, "CDR_TIME"), bytes);
  EXPECT_NE(log.str().find("[ingest] cache hit"), std::string::npos);
}

TEST(RunPipeline, RebuildFromScratchIsByteIdentical) {
  PipelineFixture fx("bytes", 52);
  std::ostringstream log;
  run_pipeline(fx.cfg, log);
  const auto bytes = artifact_bytes(fx.cfg, "CDR_TIME");

  fs::remove_all(fx.cfg.work_dir);
  run_pipeline(fx.cfg, log);
  EXPECT_EQ(artifact_bytes(fx.cfg, "CDR_TIME"), bytes);

  // Thread count is not part of the output contract: a fresh single-thread
  // run reproduces the same bytes.
  fs::remove_all(fx.cfg.work_dir);
  PipelineConfig one = fx.cfg;
  one.threads = 1;
  run_pipeline(one, log);
  EXPECT_EQ(artifact_bytes(fx.cfg, "CDR_TIME"), bytes);
}

TEST(RunPipeline, ConfigChangesInvalidateExactlyDownstreamStages) {
  PipelineFixture fx("invalidate", 53);
  std::ostringstream log;
  run_pipeline(fx.cfg, log);

  // Graph knob: ingest survives, everything from the graph on rebuilds.
  PipelineConfig tau = fx.cfg;
  tau.sim.tau_ms += 1000;
  expect_hits(run_pipeline(tau, log), {true, false, false, false, false},
              "tau");

  // Back to the original: graph artifact for the old tau was overwritten,
  // so the graph rebuilds once more, then everything hits again.
  expect_hits(run_pipeline(fx.cfg, log), {true, false, false, false, false},
              "restore");
  expect_hits(run_pipeline(fx.cfg, log), {true, true, true, true, true},
              "steady");

  // Community seed: graph survives.
  PipelineConfig seed = fx.cfg;
  seed.louvain_seed = 8;
  expect_hits(run_pipeline(seed, log), {true, true, false, false, false},
              "seed");

  // Prune threshold: partition survives.
  run_pipeline(fx.cfg, log);
  PipelineConfig prune_cfg = fx.cfg;
  prune_cfg.prune_threshold = 0.2;
  expect_hits(run_pipeline(prune_cfg, log),
              {true, true, true, false, false}, "prune");

  // Split seed: everything rebuilds.
  run_pipeline(fx.cfg, log);
  PipelineConfig resplit = fx.cfg;
  resplit.split.seed = 99;
  expect_hits(run_pipeline(resplit, log),
              {false, false, false, false, false}, "resplit");
}

TEST(RunPipeline, KGridChangesOnlyRescoreWhenKmaxIsUnchanged) {
  PipelineFixture fx("kgrid", 54);
  std::ostringstream log;
  run_pipeline(fx.cfg, log);  // ks {5, 10}

  // Same kmax, different grid: recommendation lists are reusable, only the
  // report is rebuilt.
  PipelineConfig fewer = fx.cfg;
  fewer.k_values = {10};
  expect_hits(run_pipeline(fewer, log), {true, true, true, true, false},
              "same kmax");

  // Larger kmax needs longer lists.
  PipelineConfig larger = fx.cfg;
  larger.k_values = {5, 10, 15};
  expect_hits(run_pipeline(larger, log), {true, true, true, false, false},
              "larger kmax");
}

TEST(RunPipeline, CorruptArtifactsAreRebuiltSilently) {
  PipelineFixture fx("corrupt", 55);
  std::ostringstream log;
  const PipelineRun baseline = run_pipeline(fx.cfg, log);

  // Truncated graph artifact: the graph rebuilds, and because the rebuild
  // reproduces the exact original bytes, the content-addressed downstream
  // caches remain valid.
  spit(fx.cfg.work_dir / "graph_CDR_TIME.tsv", "# garbage\n1\t2\n");
  const PipelineRun after_graph = run_pipeline(fx.cfg, log);
  expect_hits(after_graph, {true, false, true, true, true}, "corrupt graph");
  EXPECT_EQ(after_graph.evaluate.report, baseline.evaluate.report);
  EXPECT_EQ(after_graph.graph.file_hash, baseline.graph.file_hash);

  // Tampered partition content: replace the stored Q with a value the
  // integrity recomputation cannot match.
  std::string part = slurp(fx.cfg.work_dir / "partition_CDR_TIME.tsv");
  const std::size_t q_pos = part.find("\tq=");
  ASSERT_NE(q_pos, std::string::npos);
  const std::size_t q_end = part.find_first_of("\t\n", q_pos + 3);
  ASSERT_NE(q_end, std::string::npos);
  part.replace(q_pos, q_end - q_pos, "\tq=2.0");
  spit(fx.cfg.work_dir / "partition_CDR_TIME.tsv", part);
  const PipelineRun after_part = run_pipeline(fx.cfg, log);
  expect_hits(after_part, {true, true, false, true, true},
              "corrupt partition");
  EXPECT_EQ(after_part.evaluate.report, baseline.evaluate.report);

  // Corrupt report JSON rebuilds just the evaluation.
  spit(fx.cfg.work_dir / "report_CDR_TIME.json", "{not json");
  const PipelineRun after_report = run_pipeline(fx.cfg, log);
  expect_hits(after_report, {true, true, true, true, false},
              "corrupt report");
  EXPECT_EQ(after_report.evaluate.report, baseline.evaluate.report);
}

TEST(RunPipeline, SourceDataChangesInvalidateEverything) {
  PipelineFixture fx("source", 56);
  std::ostringstream log;
  run_pipeline(fx.cfg, log);

  // Append one raw assignment row; every stage must rebuild.
  {
    std::ofstream out(fx.data_dir / "bookmark_tags.dat",
                      std::ios::binary | std::ios::app);
    out << synth::raw_id(0, 7) << '\t' << synth::raw_id(0, 7) << '\t'
        << synth::raw_id(0, 7) << "\t12345\n";
  }
  expect_hits(run_pipeline(fx.cfg, log), {false, false, false, false, false},
              "data changed");
}

TEST(RunPipeline, RunsFromCacheWhenDataDirIsGone) {
  PipelineFixture fx("nodata", 57);
  std::ostringstream log;
  const PipelineRun baseline = run_pipeline(fx.cfg, log);

  fs::remove_all(fx.data_dir);
  const PipelineRun cached = run_pipeline(fx.cfg, log);
  expect_hits(cached, {true, true, true, true, true}, "cache only");
  EXPECT_EQ(cached.evaluate.report, baseline.evaluate.report);

  // Without data and without a cache there is nothing to ingest.
  PipelineConfig empty = fx.cfg;
  empty.work_dir = fx.dir.path() / "fresh";
  EXPECT_THROW(run_pipeline(empty, log), IngestError);
}

TEST(RunPipeline, ValidatesConfigBeforeTouchingAnyStage) {
  PipelineFixture fx("badcfg", 58);
  std::ostringstream log;

  PipelineConfig bad = fx.cfg;
  bad.prune_threshold = 1.5;
  EXPECT_THROW(run_pipeline(bad, log), std::invalid_argument);

  bad = fx.cfg;
  bad.variant = "FULL_MODEL";
  EXPECT_THROW(run_pipeline(bad, log), std::invalid_argument);

  bad = fx.cfg;
  bad.work_dir.clear();
  EXPECT_THROW(run_pipeline(bad, log), std::invalid_argument);

  bad = fx.cfg;
  bad.k_values = {0};
  EXPECT_THROW(run_pipeline(bad, log), std::invalid_argument);
}

TEST(RunPipeline, StageFailuresCarryTheStageName) {
  PipelineFixture fx("stageerr", 59);
  std::ostringstream log;
  // work_dir colliding with an existing regular file breaks the ingest
  // stage's directory setup.
  const fs::path file_in_the_way = fx.dir.path() / "work_file";
  spit(file_in_the_way, "x");
  PipelineConfig cfg = fx.cfg;
  cfg.work_dir = file_in_the_way;
  try {
    run_pipeline(cfg, log);
    FAIL() << "expected PipelineError";
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.stage(), "ingest");
    EXPECT_NE(std::string(e.what()).find("stage ingest:"),
              std::string::npos);
  }
}

TEST(RunPipeline, ReportMatchesInMemoryExperiment) {
  PipelineFixture fx("parity", 60);
  std::ostringstream log;
  const PipelineRun run = run_pipeline(fx.cfg, log);

  EvalParams params;
  params.sim = fx.cfg.sim;
  params.prune_threshold = fx.cfg.prune_threshold;
  params.k_values = fx.cfg.k_values;
  params.louvain_seed = fx.cfg.louvain_seed;
  params.threads = 1;
  params.swap_pr_denominators = fx.cfg.swap_pr_denominators;
  const EvalReport direct =
      run_experiment(VariantSpec::from_name(fx.cfg.variant), run.ingest.train,
                     run.ingest.test, params);
  EXPECT_EQ(run.evaluate.report, direct);
}

TEST(RunPipeline, LoadedReportRoundTripsThroughJson) {
  PipelineFixture fx("reportio", 61);
  std::ostringstream log;
  const PipelineRun run = run_pipeline(fx.cfg, log);

  const LoadedReport loaded =
      load_report(fx.cfg.work_dir / "report_CDR_TIME.json");
  // Per-user rows are not serialized; everything else must round-trip.
  EvalReport want = run.evaluate.report;
  want.per_user.clear();
  EXPECT_EQ(loaded.report, want);
  EXPECT_EQ(loaded.hashes.train, run.ingest.train_hash);
  EXPECT_EQ(loaded.hashes.graph_file, run.graph.file_hash);
  EXPECT_EQ(loaded.hashes.recommendations_file, run.recommend.file_hash);
}

TEST(LoadReport, FailuresNameTheFile) {
  TempDir dir("loadreport");
  const fs::path missing = dir.path() / "missing.json";
  try {
    load_report(missing);
    FAIL() << "expected CompareError";
  } catch (const CompareError& e) {
    EXPECT_NE(std::string(e.what()).find(missing.string()),
              std::string::npos);
  }

  const fs::path corrupt = dir.path() / "corrupt.json";
  spit(corrupt, "{oops");
  try {
    load_report(corrupt);
    FAIL() << "expected CompareError";
  } catch (const CompareError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find(corrupt.string()), std::string::npos);
    EXPECT_NE(what.find("invalid JSON"), std::string::npos);
  }

  // Valid JSON of the wrong shape.
  const fs::path wrong = dir.path() / "wrong.json";
  spit(wrong, "{\"artifact\":\"other\",\"version\":1}");
  EXPECT_THROW(load_report(wrong), CompareError);
}

TEST(RunCompare, WritesComparisonArtifactsForAllVariants) {
  PipelineFixture fx("compare", 62);
  std::ostringstream log;
  std::vector<fs::path> reports;
  for (const char* name : {"SEM_CDR", "LEXSEM_CDR", "CDR_TIME"}) {
    PipelineConfig cfg = fx.cfg;
    cfg.variant = name;
    run_pipeline(cfg, log);
    reports.push_back(fx.cfg.work_dir / ("report_" + std::string(name) +
                                         ".json"));
  }

  const std::string text = run_compare(reports, fx.cfg.work_dir, log);
  EXPECT_NE(text.find("SEM_CDR"), std::string::npos);
  EXPECT_NE(text.find("LEXSEM_CDR"), std::string::npos);
  EXPECT_NE(text.find("CDR_TIME"), std::string::npos);
  // All three canonical variants are present, so the ordering check runs.
  EXPECT_NE(text.find("ordering check P@5:"), std::string::npos);
  EXPECT_NE(text.find("ordering check R@5:"), std::string::npos);

  const std::string txt = slurp(fx.cfg.work_dir / "comparison.txt");
  const std::string tsv = slurp(fx.cfg.work_dir / "comparison.tsv");
  EXPECT_TRUE(txt.starts_with("# tagrec-comparison v1\treports="));
  EXPECT_TRUE(tsv.starts_with("# tagrec-comparison v1\treports="));
  EXPECT_NE(tsv.find("variant\tk\tmetric\tvalue\tdelta_vs_first"),
            std::string::npos);
  expect_no_tmp_files(fx.cfg.work_dir);

  EXPECT_THROW(run_compare({reports[0]}, fx.cfg.work_dir, log),
               CompareError);
}

}  // namespace
}  // namespace tagrec
