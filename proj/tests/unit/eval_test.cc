#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "eavit/errors.h"
#include "eavit/eval/metrics.h"

using namespace eavit;
using namespace eavit::eval;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back("c" + std::to_string(k));
  return out;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("eavit_eval_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Drawn {
  std::vector<int> preds, labels;
};

Drawn draw(std::size_t n, int classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, classes - 1);
  Drawn d;
  for (std::size_t i = 0; i < n; ++i) {
    d.labels.push_back(pick(rng));
    // Bias towards correct answers so every regime appears.
    d.preds.push_back(rng() % 3 == 0 ? d.labels.back() : pick(rng));
  }
  return d;
}

}  // namespace

TEST_CASE("confusion") {
  const std::vector<int> preds{0, 1, 1}, labels{0, 1, 2};
  const auto cm = confusion(preds, labels, names(3));
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(1, 1) == 1);
  CHECK(cm.at(2, 1) == 1);
  CHECK(cm.total() == 3);

  const std::vector<int> same{2, 0, 1, 1, 2};
  const auto diag = confusion(same, same, names(3));
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t p = 0; p < 3; ++p)
      if (t != p) CHECK(diag.at(t, p) == 0);
  CHECK(accuracy(diag) == 1.0);

  const std::vector<int> empty;
  CHECK_THROWS_AS(confusion(empty, empty, names(3)), ShapeError);
  CHECK_THROWS_AS(confusion(preds, same, names(3)), ShapeError);
  const std::vector<int> bad{0, 3, 1};
  CHECK_THROWS_AS(confusion(bad, labels, names(3)), std::out_of_range);
  CHECK_THROWS_AS(confusion(std::vector<int>{-1}, std::vector<int>{0}, names(3)), std::out_of_range);
}

TEST_CASE("accuracy") {
  const std::vector<int> preds{0, 1, 2, 2}, labels{0, 1, 2, 1};
  CHECK(accuracy(confusion(preds, labels, names(3))) == 0.75);
  ConfusionMatrix zero{names(2), {0, 0, 0, 0}};
  CHECK_THROWS_AS(accuracy(zero), std::invalid_argument);
}

TEST_CASE("precision_recall_f1") {
  CHECK(f1_score(0.94, 0.96) == doctest::Approx(2 * 0.94 * 0.96 / 1.90));
  CHECK(std::abs(f1_score(0.94, 0.96) - 0.95) < 0.005);
  CHECK(f1_score(0, 0) == 0.0);

  const std::vector<int> same{0, 1, 2, 3};
  const auto perfect = report(confusion(same, same, names(4)));
  for (const auto& m : perfect.per_class) {
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == 1.0);
  }
  CHECK(perfect.macro_f1 == 1.0);

  // Class 2 never appears as label or prediction.
  const std::vector<int> preds{0, 1, 1}, labels{0, 1, 0};
  const auto cm = confusion(preds, labels, names(3));
  const auto absent = precision_recall_f1(cm, 2);
  CHECK(absent.precision == 0.0);
  CHECK(absent.recall == 0.0);
  CHECK(absent.f1 == 0.0);
  CHECK(absent.precision_undefined);
  CHECK(absent.recall_undefined);
  CHECK(absent.f1_undefined);
  const auto half = precision_recall_f1(cm, 1);
  CHECK(half.precision == 0.5);
  CHECK(half.recall == 1.0);
  CHECK_FALSE(half.precision_undefined);
  CHECK_THROWS_AS(precision_recall_f1(cm, 3), std::out_of_range);
}

TEST_CASE("metrics agree with direct counting") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const int classes = 2 + trial % 9;
    const auto d = draw(50, classes, rng);
    const auto cm = confusion(d.preds, d.labels, names(classes));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < d.preds.size(); ++i) correct += d.preds[i] == d.labels[i];
    CHECK(accuracy(cm) == static_cast<double>(correct) / 50.0);
    for (int k = 0; k < classes; ++k) {
      std::size_t tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < d.preds.size(); ++i) {
        tp += d.preds[i] == k && d.labels[i] == k;
        fp += d.preds[i] == k && d.labels[i] != k;
        fn += d.preds[i] != k && d.labels[i] == k;
      }
      const auto m = precision_recall_f1(cm, static_cast<std::size_t>(k));
      CHECK(m.true_positives == tp);
      CHECK(m.false_positives == fp);
      CHECK(m.false_negatives == fn);
      const double p = tp + fp ? double(tp) / double(tp + fp) : 0.0;
      const double r = tp + fn ? double(tp) / double(tp + fn) : 0.0;
      CHECK(m.precision == p);
      CHECK(m.recall == r);
      CHECK(m.f1 == (tp ? 2.0 * double(tp) / double(2 * tp + fp + fn) : 0.0));
      CHECK(m.f1 == doctest::Approx(p + r > 0 ? 2 * p * r / (p + r) : 0.0).epsilon(1e-14));
    }
  }
}

TEST_CASE("metric identities") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = draw(200, 10, rng);
    const auto cm = confusion(d.preds, d.labels, names(10));
    std::size_t tp_total = 0, fn_total = 0;
    for (std::size_t k = 0; k < 10; ++k) {
      const auto m = precision_recall_f1(cm, k);
      CHECK(m.true_positives + m.false_negatives == cm.row_sum(k));
      CHECK(m.true_positives + m.false_positives == cm.column_sum(k));
      tp_total += m.true_positives;
      fn_total += m.false_negatives;
      for (double v : {m.precision, m.recall, m.f1}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
      if (m.precision > 0 && m.recall > 0) {
        CHECK(m.f1 <= std::max(m.precision, m.recall));
        CHECK(m.f1 >= std::min(m.precision, m.recall));
      }
    }
    // Micro-averaged recall.
    CHECK(accuracy(cm) == static_cast<double>(tp_total) / static_cast<double>(tp_total + fn_total));
  }
}

TEST_CASE("report files") {
  const auto dir = scratch("report");
  std::mt19937_64 rng(33);
  const auto d = draw(300, 10, rng);
  const auto cm = confusion(d.preds, d.labels, names(10));
  const auto r = report(cm);
  write_metrics_csv(dir / "metrics.csv", r);
  const auto back = read_metrics_csv(dir / "metrics.csv");
  REQUIRE(back.per_class.size() == 10);
  CHECK(back.class_names == r.class_names);
  for (std::size_t k = 0; k < 10; ++k) {
    CHECK(back.per_class[k].precision == r.per_class[k].precision);
    CHECK(back.per_class[k].recall == r.per_class[k].recall);
    CHECK(back.per_class[k].f1 == r.per_class[k].f1);
  }
  CHECK(back.macro_precision == r.macro_precision);
  CHECK(back.macro_f1 == r.macro_f1);

  std::ifstream in(dir / "metrics.csv");
  std::size_t lines = 0;
  std::string line, last;
  while (std::getline(in, line)) ++lines, last = line;
  CHECK(lines == 12);
  CHECK(last.rfind("macro,", 0) == 0);

  write_confusion_csv(dir / "confusion.csv", cm);
  CHECK(read_confusion_csv(dir / "confusion.csv") == cm);
  std::ifstream grid(dir / "confusion.csv");
  std::getline(grid, line);
  CHECK(line == "c0,c1,c2,c3,c4,c5,c6,c7,c8,c9");

  write_confusion_svg(dir / "confusion.svg", cm);
  write_curves_svg(dir / "curves.svg", {"loss", "accuracy"},
                   {{{"train", {2.3, 1.5, 1.0}}, {"val", {2.4, 1.9, std::nan("")}}}, {{"train", {0.1, 0.5, 0.7}}}});
  for (const char* name : {"confusion.svg", "curves.svg"}) {
    std::ifstream svg(dir / name);
    std::getline(svg, line);
    CHECK(line.rfind("<svg", 0) == 0);
  }
  CHECK_THROWS_AS(write_metrics_csv(dir / "no" / "metrics.csv", r), DataError);
  CHECK_THROWS_AS(read_metrics_csv(dir / "absent.csv"), DataError);
}

TEST_CASE("majority vote") {
  CHECK(vote({{0.6, 0.4}, {0.7, 0.3}, {0.2, 0.8}}) == 0);
  // One vote each; class 1 carries more total probability.
  CHECK(vote({{0.51, 0.49}, {0.1, 0.9}}) == 1);
  // Full tie falls to the lower index.
  CHECK(vote({{0.5, 0.5}}) == 0);
  CHECK_THROWS_AS(vote({}), std::invalid_argument);

  const std::vector<std::vector<double>> probs{{0.9, 0.1}, {0.2, 0.8}, {0.3, 0.7}, {0.6, 0.4}};
  const std::vector<int> labels{0, 1, 1, 1};
  const std::vector<std::string> tracks{"a", "b", "b", "b"};
  const auto result = majority_vote(probs, labels, tracks);
  REQUIRE(result.size() == 2);
  CHECK(result[0].track_id == "a");
  CHECK(result[0].predicted == 0);
  CHECK(result[1].predicted == 1);
  CHECK(result[1].segments == 3);
  CHECK(result[1].label == 1);
  CHECK_THROWS_AS(majority_vote(probs, labels, std::vector<std::string>{"a"}), ShapeError);
}
