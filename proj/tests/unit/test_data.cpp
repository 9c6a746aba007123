#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "imia/data.hpp"
#include "imia/nn.hpp"

namespace imia {
namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "imia_unit_data";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

TEST(LoadCsv, SmallFile) {
  const auto p = temp_file("small.csv");
  write_text(p, "a,b,label\n1,2,0\n3.5,-1,1\n0,0,0\n");
  const Dataset d = load_csv(p, "label");
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.num_classes, 2);
  EXPECT_EQ(d.dim(), 2);
  EXPECT_EQ(d.features(1, 0), 3.5);
  EXPECT_EQ(d.labels, (std::vector<int>{0, 1, 0}));
}

TEST(LoadCsv, LabelGapWarns) {
  const auto p = temp_file("gap.csv");
  write_text(p, "x,y\n1,0\n2,2\n");
  std::vector<std::string> warnings;
  LogSink prev = set_log_sink([&](LogLevel l, std::string_view m) {
    if (l == LogLevel::kWarning) warnings.emplace_back(m);
  });
  const Dataset d = load_csv(p, "y");
  set_log_sink(prev);
  EXPECT_EQ(d.num_classes, 3);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("class 1"), std::string::npos);
}

TEST(LoadCsv, Errors) {
  const auto p = temp_file("bad.csv");
  write_text(p, "a,label\n1,0\nx,1\n");
  try {
    load_csv(p, "label");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  write_text(p, "");
  EXPECT_THROW(load_csv(p, "label"), FormatError);
  write_text(p, "a,label\n1,0\n");
  EXPECT_THROW(load_csv(p, "target"), FormatError);
  write_text(p, "a,label\n1,-1\n");
  EXPECT_THROW(load_csv(p, "label"), ParseError);
  write_text(p, "a,label\n1,0,3\n");
  EXPECT_THROW(load_csv(p, "label"), ParseError);
  EXPECT_THROW(load_csv(temp_file("missing.csv"), "label"), FormatError);
}

TEST(Csv, RoundTripIsExact) {
  const Dataset d = gen_synthetic(50, 7, 5, 0.4, 3);
  const auto p = temp_file("rt.csv");
  write_csv(d, p);
  const Dataset r = load_csv(p, "label");
  EXPECT_EQ(r.labels, d.labels);
  EXPECT_EQ(r.num_classes, d.num_classes);
  EXPECT_TRUE(r.features == d.features);
}

TEST(GenSynthetic, OnePerClassAtNEqualsC) {
  const Dataset d = gen_synthetic(100, 10, 100, 0.1, 1);
  std::set<int> labels(d.labels.begin(), d.labels.end());
  EXPECT_EQ(labels.size(), 100u);
}

TEST(GenSynthetic, ZeroSpreadCollapsesClasses) {
  const Dataset d = gen_synthetic(60, 5, 3, 0.0, 2);
  std::map<int, Vector> first;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Vector row = d.features.row(static_cast<Index>(i)).transpose();
    auto [it, fresh] = first.emplace(d.labels[i], row);
    if (!fresh) EXPECT_TRUE(it->second == row);
    EXPECT_NEAR(row.norm(), 1.0, 1e-12);  // centroids lie on the unit sphere
  }
}

TEST(GenSynthetic, SmallSpreadIsLearnable) {
  const Dataset d = gen_synthetic(500, 50, 10, 0.05, 7);
  TrainConfig c;
  c.epochs = 50;
  c.seed = 1;
  const MlpModel m = sgd_train(MlpModel::create({50, 32, 10}, Activation::kRelu, 3), d, Objective{}, c);
  EXPECT_GT(accuracy(m, d), 0.99);
}

TEST(GenSynthetic, DeterministicAndValidated) {
  const Dataset a = gen_synthetic(30, 4, 3, 0.2, 9), b = gen_synthetic(30, 4, 3, 0.2, 9);
  EXPECT_TRUE(a.features == b.features);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_THROW(gen_synthetic(30, 1, 3, 0.2, 9), DomainError);
  EXPECT_THROW(gen_synthetic(2, 4, 3, 0.2, 9), DomainError);
  EXPECT_THROW(gen_synthetic(30, 4, 1, 0.2, 9), DomainError);
  EXPECT_THROW(gen_synthetic(30, 4, 3, -0.2, 9), DomainError);
}

TEST(MakeSplit, EqualSixths) {
  const Dataset d = gen_synthetic(600, 4, 6, 0.2, 1);
  SplitFractions f{1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6};
  const ExperimentSplit s = make_split(d, f, 5);
  std::set<Index> all;
  std::size_t total = 0;
  for (const auto* part : s.parts()) {
    EXPECT_EQ(part->size(), 100u);
    EXPECT_TRUE(std::is_sorted(part->begin(), part->end()));
    total += part->size();
    all.insert(part->begin(), part->end());
  }
  EXPECT_EQ(all.size(), total);
}

TEST(MakeSplit, DisjointByBruteForceAndDeterministic) {
  const Dataset d = gen_synthetic(997, 4, 7, 0.2, 1);
  const ExperimentSplit s = make_split(d, SplitFractions{}, 3);
  const auto parts = s.parts();
  for (std::size_t a = 0; a < parts.size(); ++a)
    for (std::size_t b = a + 1; b < parts.size(); ++b)
      for (Index x : *parts[a])
        for (Index y : *parts[b]) ASSERT_NE(x, y);
  const ExperimentSplit t = make_split(d, SplitFractions{}, 3);
  for (std::size_t a = 0; a < parts.size(); ++a) EXPECT_EQ(*parts[a], *t.parts()[a]);
  const ExperimentSplit u = make_split(d, SplitFractions{}, 4);
  EXPECT_NE(s.query_train, u.query_train);
}

TEST(MakeSplit, StratifiedWithinOne) {
  const Dataset d = gen_synthetic(1200, 4, 12, 0.2, 1);
  const ExperimentSplit s = make_split(d, SplitFractions{}, 8);
  const SplitFractions f;
  const auto fr = f.as_array();
  for (std::size_t p = 0; p < 5; ++p) {
    std::map<int, int> per_class;
    for (Index i : *s.parts()[p]) per_class[d.labels[static_cast<std::size_t>(i)]]++;
    for (const auto& [cls, count] : per_class) EXPECT_LE(std::abs(count - fr[p] * 100.0), 1.0);
  }
}

TEST(MakeSplit, RejectsOverfullFractions) {
  const Dataset d = gen_synthetic(100, 4, 2, 0.2, 1);
  EXPECT_THROW(make_split(d, SplitFractions{0.5, 0.5, 0.1, 0.0, 0.0}, 1), DomainError);
}

TEST(Subset, CopiesRowsInOrder) {
  const Dataset d = gen_synthetic(20, 3, 2, 0.2, 1);
  const Index rows[] = {5, 1};
  const Dataset s = subset(d, rows);
  EXPECT_TRUE(s.features.row(0) == d.features.row(5));
  EXPECT_EQ(s.labels[1], d.labels[1]);
  const Index bad[] = {20};
  EXPECT_THROW(subset(d, bad), DomainError);
}

}  // namespace
}  // namespace imia
