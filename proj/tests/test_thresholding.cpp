#include <doctest.h>

#include <algorithm>
#include <random>

#include "generators.hpp"
#include "oracles.hpp"
#include "rpl/thresholding.hpp"
#include "support.hpp"

using namespace rpl;

namespace {

std::vector<ForegroundPrediction> two_class_example() {
  // class 0 ("A"): 0.2 0.5 0.6 0.9, class 1 ("B"): 0.3 0.7, shuffled
  return {{0, 0.6}, {1, 0.7}, {0, 0.2}, {0, 0.9}, {1, 0.3}, {0, 0.5}};
}

PseudoBox pseudo(std::size_t cls, double score) {
  PseudoBox p;
  p.survivor.class_id = cls;
  p.survivor.score = score;
  return p;
}

std::vector<std::pair<std::size_t, double>> as_pairs(const std::vector<ForegroundPrediction>& fg) {
  std::vector<std::pair<std::size_t, double>> out;
  for (const auto& p : fg) out.emplace_back(p.class_id, p.score);
  return out;
}

std::vector<ForegroundPrediction> random_foreground(std::mt19937_64& rng, std::size_t classes, std::size_t max_boxes) {
  const std::size_t n = gen::index(rng, 0, max_boxes);
  // Skewed class draw so proportions vary widely.
  std::vector<double> w(classes);
  for (auto& x : w) x = gen::uniform(rng, 0.0, 1.0) * gen::uniform(rng, 0.0, 1.0);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  std::vector<ForegroundPrediction> fg;
  for (std::size_t i = 0; i < n; ++i) {
    // Quantized scores so repeated values appear.
    fg.push_back({pick(rng), static_cast<double>(gen::index(rng, 0, 100)) / 100.0});
  }
  return fg;
}

}  // namespace

TEST_SUITE("thresholding") {
  TEST_CASE("two-class worked example") {
    const auto table = estimate_thresholds(two_class_example(), ClassCatalog({"A", "B"}));
    CHECK(table.foreground_count() == 6);
    // A: P = 4/6, index floor(16/6) = 2 -> 0.6;  B: P = 2/6, index floor(4/6) = 0 -> 0.3
    CHECK(table.delta(0) == 0.6);
    CHECK(table.delta(1) == 0.3);
    CHECK(table.stats()[0].sorted_scores == std::vector<double>{0.2, 0.5, 0.6, 0.9});
    CHECK(table.stats()[0].count == 4);
    CHECK(table.stats()[1].proportion == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("filtering the estimation sample with its own table") {
    const auto fg = two_class_example();
    const auto table = estimate_thresholds(fg, ClassCatalog({"A", "B"}));
    std::vector<PseudoBox> boxes;
    for (const auto& p : fg) boxes.push_back(pseudo(p.class_id, p.score));
    std::vector<double> kept_a, kept_b;
    for (const auto& p : filter_by_threshold(boxes, table))
      (p.survivor.class_id == 0 ? kept_a : kept_b).push_back(p.survivor.score);
    std::sort(kept_a.begin(), kept_a.end());
    std::sort(kept_b.begin(), kept_b.end());
    CHECK(kept_a == std::vector<double>{0.6, 0.9});
    CHECK(kept_b == std::vector<double>{0.3, 0.7});
  }

  TEST_CASE("boundary cases of the index rule") {
    const ClassCatalog cat = ClassCatalog::numbered(3);
    // single class holding everything: P = 1 -> index clamps to n-1 -> max
    const std::vector<ForegroundPrediction> all{{1, 0.4}, {1, 0.8}, {1, 0.6}};
    CHECK(estimate_thresholds(all, cat).delta(1) == 0.8);
    // single box in a minority class -> that box's score
    const std::vector<ForegroundPrediction> mixed{{0, 0.9}, {0, 0.8}, {2, 0.35}};
    CHECK(estimate_thresholds(mixed, cat).delta(2) == 0.35);
    CHECK(threshold_index(0, 0) == 0);
    CHECK(threshold_index(4, 6) == 2);
    CHECK(threshold_index(5, 5) == 4);
    CHECK(threshold_index(1, 100) == 0);
  }

  TEST_CASE("empty foreground leaves every class absent and falls back") {
    const auto table = estimate_thresholds({}, ClassCatalog::numbered(2), 0.5);
    CHECK_FALSE(table.delta(0).has_value());
    CHECK_FALSE(table.delta(1).has_value());
    CHECK(table.threshold_for(0) == 0.5);
    const std::vector<PseudoBox> boxes{pseudo(0, 0.49), pseudo(1, 0.5), pseudo(0, 0.7)};
    const auto kept = filter_by_threshold(boxes, table);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].survivor.score == 0.5);
    CHECK(kept[1].survivor.score == 0.7);
  }

  TEST_CASE("filter keeps scores at or above the class threshold") {
    const ThresholdTable table({0.6}, {CategoryStats{0, {}, 0, 0.0}}, 0, 0, 0.5);
    const std::vector<PseudoBox> boxes{pseudo(0, 0.9), pseudo(0, 0.6), pseudo(0, 0.55)};
    const auto kept = filter_by_threshold(boxes, table);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].survivor.score == 0.9);
    CHECK(kept[1].survivor.score == 0.6);
  }

  TEST_CASE("fixed table filters every class at one value") {
    const auto table = ThresholdTable::fixed(3, 0.7, 12);
    CHECK(table.estimated_at() == 12);
    for (std::size_t c = 0; c < 3; ++c) CHECK(table.threshold_for(c) == 0.7);
  }

  TEST_CASE("out-of-catalog input is rejected") {
    const auto table = ThresholdTable::fixed(2, 0.5);
    const std::vector<PseudoBox> boxes{pseudo(5, 0.9)};
    CHECK_ERROR_KIND(filter_by_threshold(boxes, table), ErrorKind::Malformed);
    const std::vector<ForegroundPrediction> bad{{3, 0.5}};
    CHECK_ERROR_KIND(estimate_thresholds(bad, ClassCatalog::numbered(2)), ErrorKind::Malformed);
    const std::vector<ForegroundPrediction> bad_score{{0, 1.5}};
    CHECK_ERROR_KIND(estimate_thresholds(bad_score, ClassCatalog::numbered(2)), ErrorKind::Malformed);
  }

  TEST_CASE("refresh cadence") {
    CHECK(should_refresh(0, 500));
    CHECK_FALSE(should_refresh(499, 500));
    CHECK(should_refresh(1000, 500));
    CHECK_ERROR_KIND(should_refresh(3, 0), ErrorKind::Config);
  }

  TEST_CASE("foreground collection is gated by objectness and takes the argmax") {
    std::vector<ScoredBox> boxes;
    boxes.push_back(ScoredBox::from_distribution({0, 0, 1, 1}, {{0.7, 0.3}, 0.9}));
    boxes.push_back(ScoredBox::from_distribution({0, 0, 1, 1}, {{0.2, 0.8}, 0.0}));
    boxes.push_back(ScoredBox::from_distribution({0, 0, 1, 1}, {{0.4, 0.6}, 0.05}));
    const auto fg = collect_foreground(std::span<const ScoredBox>(boxes), 0.05);
    REQUIRE(fg.size() == 2);
    CHECK(fg[0].class_id == 0);
    CHECK(fg[0].score == 0.7);
    CHECK(fg[1].class_id == 1);

    Frame background;
    background.frame_id = "bg";
    background.boxes.push_back(ScoredBox::from_distribution({0, 0, 1, 1}, {{0.5, 0.5}, 0.0}));
    CHECK(collect_foreground(std::span<const Frame>(&background, 1), 0.05).empty());
    CHECK_ERROR_KIND(collect_foreground(std::span<const Frame>(), 0.05), ErrorKind::InvalidArgument);
  }

  TEST_CASE("matches the direct index rule on random multisets") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 500; ++trial) {
      const std::size_t classes = gen::index(rng, 1, 10);
      const auto fg = random_foreground(rng, classes, 500);
      const auto table = estimate_thresholds(fg, ClassCatalog::numbered(classes));
      CHECK(table.deltas() == oracle::thresholds(as_pairs(fg), classes));
    }
  }

  TEST_CASE("table is invariant to the order of foreground predictions") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 200; ++trial) {
      auto fg = random_foreground(rng, 5, 200);
      const auto a = estimate_thresholds(fg, ClassCatalog::numbered(5));
      std::shuffle(fg.begin(), fg.end(), rng);
      CHECK(estimate_thresholds(fg, ClassCatalog::numbered(5)) == a);
    }
  }

  TEST_CASE("every present threshold is one of the class's observed scores") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
      const auto fg = random_foreground(rng, 6, 300);
      const auto table = estimate_thresholds(fg, ClassCatalog::numbered(6));
      std::size_t total = 0;
      for (const auto& s : table.stats()) {
        total += s.count;
        CHECK(std::is_sorted(s.sorted_scores.begin(), s.sorted_scores.end()));
        if (table.delta(s.class_id))
          CHECK(std::find(s.sorted_scores.begin(), s.sorted_scores.end(), *table.delta(s.class_id)) != s.sorted_scores.end());
        else
          CHECK(s.count == 0);
      }
      CHECK(total == table.foreground_count());
    }
  }

  TEST_CASE("the larger of two identically distributed classes gets the higher threshold") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 200; ++trial) {
      // Class 1 repeats class 0's scores fewer times, so both share one
      // empirical distribution while n_0 > n_1.
      std::vector<double> base(gen::index(rng, 1, 20));
      for (auto& s : base) s = gen::uniform(rng, 0.0, 1.0);
      const std::size_t rep0 = gen::index(rng, 2, 6), rep1 = gen::index(rng, 1, rep0 - 1);
      std::vector<ForegroundPrediction> fg;
      for (std::size_t r = 0; r < rep0; ++r)
        for (double s : base) fg.push_back({0, s});
      for (std::size_t r = 0; r < rep1; ++r)
        for (double s : base) fg.push_back({1, s});
      const auto table = estimate_thresholds(fg, ClassCatalog::numbered(2));
      CHECK(*table.delta(0) >= *table.delta(1));
    }
  }

  TEST_CASE("filter output is an order-preserving sublist of its input") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<PseudoBox> boxes;
      for (std::size_t i = 0, n = gen::index(rng, 0, 30); i < n; ++i) {
        auto p = pseudo(gen::index(rng, 0, 3), gen::uniform(rng, 0, 1));
        p.survivor.proposal = i;
        boxes.push_back(p);
      }
      std::vector<std::optional<double>> deltas(4);
      for (auto& d : deltas)
        if (gen::index(rng, 0, 3)) d = gen::uniform(rng, 0, 1);
      const ThresholdTable table(deltas, std::vector<CategoryStats>(4), 0, 0, 0.5);
      const auto kept = filter_by_threshold(boxes, table);
      std::size_t cursor = 0;
      for (const auto& k : kept) {
        while (cursor < boxes.size() && boxes[cursor].survivor.proposal != k.survivor.proposal) ++cursor;
        REQUIRE(cursor < boxes.size());
        CHECK(boxes[cursor].survivor == k.survivor);
        ++cursor;
      }
    }
  }
}
