#include <gtest/gtest.h>

#include <sstream>

#include "netsel/data.hpp"
#include "netsel/edgeset.hpp"
#include "netsel/similarity.hpp"
#include "netsel/synth.hpp"

using namespace netsel;

namespace {

IngestResult ingest(const std::string& text, bool strict = false) {
  std::istringstream in(text);
  IngestOptions opt;
  opt.strict = strict;
  return ingest_events(in, opt);
}

EventLog log_with_timestamps(int lo, int hi) {
  std::ostringstream os;
  for (int t = lo; t <= hi; ++t) os << t % 3 << "\t" << t << "\t1\t" << t << "\n";
  return ingest(os.str()).log;
}

}  // namespace

TEST(Ingest, WellFormedLines) {
  auto r = ingest("10\t1\t2\t100\n11\t1\t3\t101\n10\t2\t1\t102\n");
  EXPECT_EQ(r.log.size(), 3u);
  EXPECT_EQ(r.rejected, 0u);
  EXPECT_EQ(r.log.n_nodes(), 2u);
  EXPECT_EQ(r.log.original_ids, (std::vector<std::uint64_t>{10, 11}));
  EXPECT_EQ(r.log.records[2].node, 0u);
}

TEST(Ingest, EmptyInput) {
  auto r = ingest("");
  EXPECT_EQ(r.log.size(), 0u);
  EXPECT_EQ(r.rejected, 0u);
}

TEST(Ingest, MalformedLineCounted) {
  auto r = ingest("1\t1\t2\t100\n1\tx\t2\t100\n2\t1\t2\t100\n3\t4\t5\t6\n");
  EXPECT_EQ(r.log.size(), 3u);
  EXPECT_EQ(r.rejected, 1u);
}

TEST(Ingest, NegativeValueIsMalformed) {
  auto r = ingest("1\t1\t-2\t100\n");
  EXPECT_EQ(r.log.size(), 0u);
  EXPECT_EQ(r.rejected, 1u);
}

TEST(Ingest, StrictModeFailsOnMalformed) {
  EXPECT_THROW(ingest("1\t1\t2\n", true), Error);
}

TEST(Ingest, CsvWithHeader) {
  std::istringstream in("user,item,plays,ts\n5,7,3,1\n");
  IngestOptions opt;
  opt.format = EventFormat::Csv;
  opt.header = true;
  auto r = ingest_events(in, opt);
  EXPECT_EQ(r.log.size(), 1u);
  EXPECT_EQ(r.log.records[0].item, 7u);
}

TEST(Matrix, SumAndMeanAggregation) {
  std::vector<Event> ev{{0, 3, 2, 1}, {0, 3, 4, 2}, {1, 1, 5, 3}, {0, 1, 0, 4}};
  auto sum = build_matrix(2, ev, Aggregation::Sum);
  EXPECT_EQ(sum.row(0), (SparseVector{{3, 6.0}}));
  auto mean = build_matrix(2, ev, Aggregation::Mean);
  EXPECT_EQ(mean.row(0), (SparseVector{{3, 3.0}}));
  EXPECT_EQ(mean.row(1), (SparseVector{{1, 5.0}}));
  for (const auto& r : sum.rows())
    for (const auto& e : r) EXPECT_GT(e.value, 0.0);
}

TEST(Partition, EqualFrequencyThirds) {
  auto log = log_with_timestamps(1, 9);
  auto ds = partition_by_time(log, {});
  for (const auto& s : ds.segments) EXPECT_EQ(s.event_count, 3u);
  EXPECT_TRUE(ds.warnings.empty());
}

TEST(Partition, SingleTimestampGoesToFirstSegment) {
  auto log = ingest("1\t1\t1\t5\n2\t1\t1\t5\n3\t2\t1\t5\n").log;
  auto ds = partition_by_time(log, {});
  EXPECT_EQ(ds.segments[0].event_count, 3u);
  EXPECT_EQ(ds.segments[1].event_count, 0u);
  EXPECT_EQ(ds.segments[2].event_count, 0u);
  EXPECT_EQ(ds.warnings.size(), 2u);
}

TEST(Partition, ExplicitBoundariesHalfOpen) {
  auto log = log_with_timestamps(1, 9);
  PartitionOptions opt;
  opt.mode = PartitionMode::ExplicitBoundaries;
  opt.boundaries = std::array<std::int64_t, 2>{5, 7};
  auto ds = partition_by_time(log, opt);
  EXPECT_EQ(ds.segments[0].event_count, 4u);
  EXPECT_EQ(ds.segments[1].event_count, 2u);
  EXPECT_EQ(ds.segments[2].event_count, 3u);
  EXPECT_EQ(ds.segments[0].role, Role::Validation);
  EXPECT_EQ(ds.by_role(Role::Training).event_count, 2u);
}

TEST(Partition, BoundariesOutOfOrderFatal) {
  PartitionOptions opt;
  opt.mode = PartitionMode::ExplicitBoundaries;
  opt.boundaries = std::array<std::int64_t, 2>{7, 5};
  EXPECT_THROW(partition_by_time(log_with_timestamps(1, 9), opt), Error);
}

TEST(Partition, EveryEventInExactlyOneSegment) {
  auto log = log_with_timestamps(1, 100);
  auto ds = partition_by_time(log, {});
  std::size_t total = 0;
  double value = 0;
  for (const auto& s : ds.segments) total += s.event_count, value += s.matrix.total();
  EXPECT_EQ(total, 100u);
  EXPECT_DOUBLE_EQ(value, 100.0);
}

TEST(Labels, RuleThresholds) {
  LabelRule rule{"r", LabelRuleKind::ItemSetThreshold, {7, 8, 9}, 2, 5};
  AttributeMatrix m(std::vector<SparseVector>{SparseVector{{7, 6}, {8, 5}, {9, 1}}, SparseVector{{1, 9}},
                                              SparseVector{{7, 9}, {9, 4}}});
  auto labels = derive_labels(m, {rule});
  EXPECT_EQ(labels.labels(0), (std::vector<std::uint8_t>{1, 0, 0}));

  LabelRule floor{"f", LabelRuleKind::ItemSetThreshold, {9}, 1, 0};
  EXPECT_EQ(derive_labels(m, {floor}).labels(0), (std::vector<std::uint8_t>{1, 0, 1}));
}

TEST(Labels, RederivedPerPartition) {
  auto log = ingest("0\t1\t9\t1\n1\t1\t1\t2\n0\t1\t1\t3\n1\t1\t9\t4\n0\t1\t1\t5\n1\t1\t1\t6\n").log;
  LabelRule rule{"r", LabelRuleKind::ItemSetThreshold, {1}, 1, 5};
  auto ds = label_partitions(partition_by_time(log, {}), {rule});
  EXPECT_EQ(ds.segments[0].labels.labels(0), (std::vector<std::uint8_t>{1, 0}));
  EXPECT_EQ(ds.segments[1].labels.labels(0), (std::vector<std::uint8_t>{0, 1}));
  EXPECT_EQ(ds.segments[2].labels.labels(0), (std::vector<std::uint8_t>{0, 0}));
}

TEST(Labels, CollectionValidatesShape) {
  EXPECT_THROW(LabelSetCollection(3, {"a"}, {{1, 0}}), Error);
  EXPECT_THROW(LabelSetCollection(2, {"a"}, {{1, 2}}), Error);
}

TEST(ExplicitEdges, DedupAndSelfLoops) {
  std::istringstream in("0\t1\n1\t0\n2\t3\n4\t4\n");
  auto g = load_explicit_edges(in, 5);
  EXPECT_EQ(g.size(), 2u);
  EXPECT_FALSE(g.directed());
  EXPECT_EQ(g.provenance().self_loops_dropped, 1u);
  EXPECT_EQ(g.provenance().model, "EXPLICIT");
}

TEST(ExplicitEdges, EmptyAndOutOfRange) {
  std::istringstream empty("");
  EXPECT_EQ(load_explicit_edges(empty, 3).size(), 0u);
  std::istringstream bad("0\t9\n");
  EXPECT_THROW(load_explicit_edges(bad, 3), Error);
}

TEST(EdgeSetIo, RoundTrip) {
  Provenance prov;
  prov.model = "KNN";
  prov.measure = "INT-N";
  prov.lambda = 12;
  prov.shortfall = 3;
  auto g = EdgeSet::build(4, true, {{0, 1, 0.25}, {2, 1, 1.0 / 3.0}, {3, 0, 2}}, prov);
  std::stringstream ss;
  write_edgeset(ss, g);
  auto back = read_edgeset(ss);
  EXPECT_EQ(back.edges(), g.edges());
  EXPECT_EQ(back.directed(), g.directed());
  EXPECT_EQ(back.n_nodes(), 4u);
  EXPECT_EQ(back.provenance().lambda, 12u);
  EXPECT_EQ(back.provenance().measure, "INT-N");
  std::stringstream again;
  write_edgeset(again, back);
  EXPECT_EQ(again.str(), ss.str());
}

TEST(Synth, DeterministicPerSeed) {
  auto a = synth_generate(1, 60, 80, {});
  auto b = synth_generate(1, 60, 80, {});
  EXPECT_EQ(a.log.records, b.log.records);
  EXPECT_EQ(a.homophily.edges(), b.homophily.edges());
  EXPECT_EQ(a.formation.edges(), b.formation.edges());
  auto c = synth_generate(2, 60, 80, {});
  EXPECT_NE(a.log.records, c.log.records);
}

TEST(Synth, EveryNodeHasEvents) {
  auto s = synth_generate(3, 10, 5, {});
  std::vector<int> seen(10, 0);
  for (const auto& e : s.log.records) seen[e.node] = 1;
  for (int v : seen) EXPECT_EQ(v, 1);
}

TEST(Synth, EventsCoverThreeSegments) {
  auto s = synth_generate(4, 50, 60, {});
  auto ds = partition_by_time(s.log, [&] {
    PartitionOptions o;
    o.mode = PartitionMode::ExplicitBoundaries;
    o.boundaries = s.boundaries;
    return o;
  }());
  for (const auto& seg : ds.segments) EXPECT_GT(seg.event_count, 0u);
}

TEST(Synth, ZeroNoiseCommunitiesSeparateUnderInt) {
  PlantSpec p;
  p.label_communities = 2;
  p.label_item_fraction = 1.0;
  p.label_drift = 0.0;
  p.noise = 0.0;
  const std::size_t n_items = 80;
  // Every member emits the whole persistent part of its group.
  p.label_items_per_node = n_items / 2 / 4;
  auto s = synth_generate(5, 40, n_items, p);
  auto m = build_matrix(40, s.log.records, Aggregation::Sum);
  double min_within = 1e300, max_cross = -1;
  for (NodeId i = 0; i < 40; ++i)
    for (NodeId j = i + 1; j < 40; ++j) {
      const double v = similarity(Measure::Int, m.row(i), m.row(j));
      if (s.label_community[i] == s.label_community[j])
        min_within = std::min(min_within, v);
      else
        max_cross = std::max(max_cross, v);
    }
  EXPECT_GT(min_within, max_cross);
}

TEST(Synth, PlantedGraphsDiffer) {
  auto s = synth_generate(6, 200, 300, {});
  EXPECT_GT(s.homophily.size(), 0u);
  EXPECT_GT(s.formation.size(), 0u);
  std::size_t shared = 0;
  for (const auto& e : s.homophily.edges())
    for (const auto& f : s.formation.edges()) shared += (e.u == f.u && e.v == f.v);
  EXPECT_LT(shared * 4, s.homophily.size());
}
