#include <doctest.h>

#include <random>

#include "generators.hpp"
#include "oracles.hpp"
#include "rpl/core.hpp"
#include "support.hpp"

using namespace rpl;

TEST_SUITE("core") {
  TEST_CASE("iou of identical, disjoint and partially overlapping boxes") {
    CHECK(iou({0, 0, 2, 2}, {0, 0, 2, 2}) == 1.0);
    CHECK(iou({0, 0, 1, 1}, {5, 5, 6, 6}) == 0.0);
    CHECK(iou({0, 0, 2, 2}, {1, 1, 3, 3}) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  }

  TEST_CASE("iou of touching edges and degenerate boxes is zero") {
    CHECK(iou({0, 0, 1, 1}, {1, 0, 2, 1}) == 0.0);
    CHECK(iou({1, 1, 1, 5}, {1, 1, 1, 5}) == 0.0);
  }

  TEST_CASE("area") {
    CHECK(area({0, 0, 2, 3}) == 6.0);
    CHECK(area({1, 1, 1, 5}) == 0.0);
    CHECK(area({0, 0, 10, 10}) == 100.0);
  }

  TEST_CASE("iou is symmetric, bounded and invariant to joint translation") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 2000; ++i) {
      const BBox a = gen::box(rng), b = gen::box(rng);
      const double v = iou(a, b);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      CHECK(v == iou(b, a));
      CHECK(v == doctest::Approx(oracle::box_iou(a, b)).epsilon(1e-12));
      const double dx = gen::uniform(rng, -50, 50), dy = gen::uniform(rng, -50, 50);
      CHECK(iou(a.translated(dx, dy), b.translated(dx, dy)) == doctest::Approx(v).epsilon(1e-9));
    }
  }

  TEST_CASE("box validity") {
    CHECK(BBox{0, 0, 1, 1}.valid());
    CHECK(BBox{1, 1, 1, 1}.valid());
    CHECK_FALSE(BBox{2, 0, 1, 1}.valid());
    CHECK_FALSE((BBox{0, 0, std::numeric_limits<double>::quiet_NaN(), 1}.valid()));
  }

  TEST_CASE("class catalog") {
    const ClassCatalog c({"car", "person", "bike"});
    CHECK(c.size() == 3);
    CHECK(c.index_of("person") == 1u);
    CHECK_FALSE(c.index_of("truck").has_value());
    CHECK(c.contains(2));
    CHECK_FALSE(c.contains(3));
    CHECK(ClassCatalog::numbered(2).names() == std::vector<std::string>{"class0", "class1"});
    CHECK_ERROR_KIND(ClassCatalog(std::vector<std::string>{}), ErrorKind::InvalidArgument);
    CHECK_ERROR_KIND(ClassCatalog({"a", "a"}), ErrorKind::InvalidArgument);
  }

  TEST_CASE("class distribution validation and argmax") {
    ClassDistribution d{{0.2, 0.5, 0.3}, 0.9};
    CHECK_NOTHROW(d.validate());
    CHECK(d.argmax() == 1);
    CHECK(ClassDistribution{{0.5, 0.5}, 1.0}.argmax() == 0);
    CHECK_ERROR_KIND((ClassDistribution{{0.5, 0.6}, 1.0}.validate()), ErrorKind::Malformed);
    CHECK_ERROR_KIND((ClassDistribution{{-0.1, 1.1}, 1.0}.validate()), ErrorKind::Malformed);
    CHECK_ERROR_KIND((ClassDistribution{{0.5, 0.5}, 1.5}.validate()), ErrorKind::Malformed);
    CHECK_ERROR_KIND((ClassDistribution{{}, 1.0}.validate()), ErrorKind::Malformed);
    const auto u = ClassDistribution::uniform(4, 0.3);
    CHECK(u.probs == std::vector<double>(4, 0.25));
    CHECK(u.objectness == 0.3);
  }

  TEST_CASE("scored box takes the argmax class and its probability") {
    const auto s = ScoredBox::from_distribution({0, 0, 1, 1}, {{0.1, 0.7, 0.2}, 0.8}, 4);
    CHECK(s.class_id == 1);
    CHECK(s.score == 0.7);
    CHECK(s.proposal == 4);
  }

  TEST_CASE("dataset validation") {
    Dataset d;
    d.catalog = ClassCatalog::numbered(2);
    Frame f;
    f.frame_id = "a";
    f.boxes.push_back(ScoredBox::from_distribution({0, 0, 1, 1}, ClassDistribution::uniform(2)));
    f.features.push_back({1.0, 2.0});
    d.frames.push_back(f);
    CHECK_NOTHROW(d.validate());
    CHECK(d.feature_dim() == 2);

    SUBCASE("duplicate frame ids") {
      d.frames.push_back(f);
      CHECK_ERROR_KIND(d.validate(), ErrorKind::Malformed);
    }
    SUBCASE("feature count mismatch") {
      d.frames[0].features.clear();
      CHECK_ERROR_KIND(d.validate(), ErrorKind::Malformed);
    }
    SUBCASE("distribution length") {
      d.frames[0].boxes[0].dist = ClassDistribution::uniform(3);
      CHECK_ERROR_KIND(d.validate(), ErrorKind::Malformed);
    }
    SUBCASE("ground truth class out of range") {
      d.ground_truth = std::vector<FrameTruth>{{{5, {0, 0, 1, 1}}}};
      CHECK_ERROR_KIND(d.validate(), ErrorKind::Malformed);
    }
  }
}
