#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "panoref/errors.hpp"
#include "panoref/metrics.hpp"

using namespace panoref;

namespace {

const ClassTable& table() {
  static const ClassTable t({{"road", false, false}, {"building", false, false}, {"car", true, false},
                             {"pedestrian", true, false}});
  return t;
}

constexpr SemanticId kRoad{1}, kBuilding{2}, kCar{3}, kPed{4};

PanopticLabels labels(std::initializer_list<std::pair<SemanticId, std::uint16_t>> v) {
  PanopticLabels l;
  for (auto [s, i] : v) l.push_back(s, InstanceId{i});
  return l;
}

PanopticLabels random_panoptic(std::mt19937_64& rng, std::size_t n, int instances) {
  PanopticLabels l;
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = SemanticId{static_cast<std::uint16_t>(rng() % 5)};
    l.push_back(s, table().is_thing(s) ? InstanceId{static_cast<std::uint16_t>(1 + rng() % instances)}
                                       : kNoInstance);
  }
  return l;
}

// Perturbs a copy so that matches are common but not universal.
PanopticLabels perturb(std::mt19937_64& rng, const PanopticLabels& gt, int instances) {
  PanopticLabels p = gt;
  const double rate = double(rng() % 60) / 100.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (double(rng() % 1000) / 1000.0 < rate) {
      const auto s = SemanticId{static_cast<std::uint16_t>(rng() % 5)};
      p.semantic[i] = s;
      p.instance[i] =
          table().is_thing(s) ? InstanceId{static_cast<std::uint16_t>(1 + rng() % instances)} : kNoInstance;
    }
  return p;
}

void check_identity(const EvalReport& r) {
  for (const auto& c : r.classes) {
    CHECK(std::abs(c.pq - c.sq * c.rq) <= 1e-9);
    for (double v : {c.pq, c.sq, c.rq, c.iou}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

}  // namespace

TEST_CASE("miou") {
  const std::vector<SemanticId> gt{kRoad, kRoad, kBuilding, kBuilding};
  const std::vector<SemanticId> pred{kRoad, kBuilding, kBuilding, kBuilding};
  const auto r = miou(pred, gt, table());
  CHECK(r.iou[0] == doctest::Approx(0.5));
  CHECK(r.iou[1] == doctest::Approx(2.0 / 3.0));
  CHECK(std::abs(r.mean - 7.0 / 12.0) <= 1e-12);
  CHECK_FALSE(r.present[2]);

  const auto same = miou(gt, gt, table());
  CHECK(same.mean == 1.0);

  // Ground-truth void is excluded from both sides.
  const std::vector<SemanticId> gt_void{kRoad, kVoid};
  const std::vector<SemanticId> pred_void{kRoad, kRoad};
  CHECK(miou(pred_void, gt_void, table()).mean == 1.0);

  const std::vector<SemanticId> short_pred{kRoad};
  CHECK_THROWS_AS(miou(short_pred, gt, table()), LengthMismatch);
}

TEST_CASE("panoptic quality hand cases") {
  SUBCASE("identical") {
    const auto gt = labels({{kRoad, 0}, {kCar, 1}, {kCar, 2}, {kPed, 1}});
    const auto r = panoptic_quality(gt, gt, table());
    CHECK(r.pq == 1.0);
    CHECK(r.miou == 1.0);
    CHECK(r.classes[0].pq == 1.0);
    CHECK_FALSE(r.classes[1].in_gt);
  }
  SUBCASE("iou 0.6") {
    PanopticLabels gt, pred;
    for (int i = 0; i < 10; ++i) {
      gt.push_back(kCar, InstanceId{1});
      pred.push_back(i < 6 ? kCar : kRoad, i < 6 ? InstanceId{1} : kNoInstance);
    }
    // Remove the road prediction from the picture: road has no gt points.
    const auto r = panoptic_quality(pred, gt, table());
    const auto& car = r.classes[kCar.value - 1];
    CHECK(car.tp == 1);
    CHECK(car.fp == 0);
    CHECK(car.fn == 0);
    CHECK(std::abs(car.sq - 0.6) <= 1e-9);
    CHECK(std::abs(car.rq - 1.0) <= 1e-9);
    CHECK(std::abs(car.pq - 0.6) <= 1e-9);
    CHECK(std::abs(r.pq - 0.6) <= 1e-9);
  }
  SUBCASE("even split") {
    PanopticLabels gt, pred;
    for (int i = 0; i < 10; ++i) {
      gt.push_back(kCar, InstanceId{1});
      pred.push_back(kCar, InstanceId{static_cast<std::uint16_t>(i < 5 ? 1 : 2)});
    }
    const auto r = panoptic_quality(pred, gt, table());
    const auto& car = r.classes[kCar.value - 1];
    CHECK(car.tp == 0);
    CHECK(car.fp == 2);
    CHECK(car.fn == 1);
    CHECK(std::abs(car.pq) <= 1e-9);
    CHECK(std::abs(r.pq) <= 1e-9);
  }
  SUBCASE("gt void points are ignored") {
    const auto gt = labels({{kCar, 1}, {kCar, 1}, {kVoid, 0}, {kVoid, 0}, {kVoid, 0}});
    const auto pred = labels({{kCar, 1}, {kCar, 1}, {kCar, 1}, {kCar, 1}, {kCar, 1}});
    CHECK(panoptic_quality(pred, gt, table()).pq == 1.0);
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(panoptic_quality(labels({{kCar, 1}}), labels({{kCar, 1}, {kCar, 1}}), table()),
                    LengthMismatch);
  }
}

TEST_CASE("panoptic quality agrees with the brute-force oracle") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 500;
    const int inst = 1 + static_cast<int>(rng() % 6);
    const auto gt = random_panoptic(rng, n, inst);
    const auto pred = perturb(rng, gt, inst);
    const auto got = panoptic_quality(pred, gt, table());
    const auto want = oracle::panoptic_quality(pred, gt, table());
    check_identity(got);
    for (std::size_t c = 0; c < table().size(); ++c) {
      CHECK(got.classes[c].tp == want.classes[c].tp);
      CHECK(got.classes[c].fp == want.classes[c].fp);
      CHECK(got.classes[c].fn == want.classes[c].fn);
      CHECK(got.classes[c].in_gt == want.classes[c].in_gt);
      CHECK(std::abs(got.classes[c].pq - want.classes[c].pq) <= 1e-9);
    }
    CHECK(std::abs(got.pq - want.pq) <= 1e-9);
  }
}

TEST_CASE("swapping prediction and ground truth swaps FP and FN") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_panoptic(rng, 300, 4);
    auto b = perturb(rng, a, 4);
    // Keep void out of both sides so the swap is exact.
    for (std::size_t i = 0; i < b.size(); ++i)
      if (a.semantic[i] == kVoid || b.semantic[i] == kVoid) {
        b.semantic[i] = kRoad;
        b.instance[i] = kNoInstance;
      }
    auto a2 = a;
    for (std::size_t i = 0; i < a2.size(); ++i)
      if (a2.semantic[i] == kVoid) a2.semantic[i] = kRoad;
    const auto ab = panoptic_quality(a2, b, table());
    const auto ba = panoptic_quality(b, a2, table());
    for (std::size_t c = 0; c < table().size(); ++c) {
      CHECK(ab.classes[c].tp == ba.classes[c].tp);
      CHECK(ab.classes[c].fp == ba.classes[c].fn);
      CHECK(ab.classes[c].fn == ba.classes[c].fp);
    }
  }
}

TEST_CASE("evaluator merge equals one-shot accumulation") {
  std::mt19937_64 rng(3);
  PanopticEvaluator all(table()), left(table()), right(table());
  for (int s = 0; s < 6; ++s) {
    const auto gt = random_panoptic(rng, 200, 3);
    const auto pred = perturb(rng, gt, 3);
    all.add_scan(pred, gt);
    (s % 2 ? left : right).add_scan(pred, gt);
  }
  left.merge(right);
  const auto a = all.report(), b = left.report();
  CHECK(a.pq == b.pq);
  CHECK(a.miou == b.miou);
  CHECK(a.scan_count == 6);
  CHECK(b.scan_count == 6);
  check_identity(a);
}

TEST_CASE("report diff, rendering and json") {
  std::mt19937_64 rng(4);
  const auto gt = random_panoptic(rng, 400, 3);
  const auto r = panoptic_quality(perturb(rng, gt, 3), gt, table());
  const auto zero = report_diff(r, r);
  CHECK(zero.pq == 0.0);
  CHECK(zero.miou == 0.0);
  for (const auto& c : zero.classes) CHECK(c.pq == 0.0);

  EvalReport a = r, b = r;
  a.pq = 0.481;
  b.pq = 0.375;
  a.miou = 0.565;
  b.miou = 0.486;
  const auto d = report_diff(a, b);
  CHECK(std::abs(100 * d.pq - 10.6) <= 1e-9);
  CHECK(std::abs(100 * d.miou - 7.9) <= 1e-9);
  CHECK(render_delta_text(d).find("+10.6") != std::string::npos);
  CHECK(render_delta_text(d).find("+7.9") != std::string::npos);

  const auto back = report_from_json(report_to_json(r));
  CHECK(back.pq == r.pq);
  CHECK(back.miou == r.miou);
  REQUIRE(back.classes.size() == r.classes.size());
  for (std::size_t c = 0; c < r.classes.size(); ++c) {
    CHECK(back.classes[c].name == r.classes[c].name);
    CHECK(back.classes[c].tp == r.classes[c].tp);
    CHECK(back.classes[c].pq == r.classes[c].pq);
  }
  const auto text = render_report_text(r);
  for (const auto& c : table().classes()) CHECK(text.find(c.name) != std::string::npos);

  EvalReport other = r;
  other.classes.pop_back();
  CHECK_THROWS_AS(report_diff(r, other), ClassTableMismatch);
}
