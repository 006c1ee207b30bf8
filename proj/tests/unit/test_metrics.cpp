#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "support.hpp"
#include "zsol/metrics.hpp"

using namespace zsol;
using zsol::testing::Gen;

namespace {

PointSet pts(std::initializer_list<Point> p) {
    PointSet s;
    s.points = p;
    return s;
}

PointSet with_conf(PointSet s, std::initializer_list<float> c) {
    s.confidences = std::vector<float>(c);
    return s;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("assignment solver matches permutation search") {
    Gen g(71);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t rows = g.index(0, 6), cols = g.index(rows, 6);
        std::vector<double> cost(rows * cols);
        for (double& c : cost) c = g.coin(0.2) ? std::floor(g.uniform(0, 4)) : g.uniform(0, 10);
        const auto a = min_cost_assignment(cost, rows, cols);
        REQUIRE(a.size() == rows);
        std::vector<char> used(cols, 0);
        double got = 0;
        for (std::size_t r = 0; r < rows; ++r) {
            CHECK(!used[a[r]]);
            used[a[r]] = 1;
            got += cost[r * cols + a[r]];
        }
        std::vector<std::size_t> perm(cols);
        std::iota(perm.begin(), perm.end(), 0);
        double best = rows == 0 ? 0 : INFINITY;
        do {
            double c = 0;
            for (std::size_t r = 0; r < rows; ++r) c += cost[r * cols + perm[r]];
            best = std::min(best, c);
        } while (std::next_permutation(perm.begin(), perm.end()));
        CHECK(got == doctest::Approx(best).epsilon(1e-12));
    }
    const std::vector<double> tall(6);
    CHECK_THROWS_AS(min_cost_assignment(tall, 3, 2), std::invalid_argument);
}

TEST_CASE("matching examples") {
    const PointSet gt = pts({{1, 1}, {20, 5}, {7, 30}});
    const MatchResult same = match_points(gt, gt, 4);
    CHECK(same.tp == 3);
    CHECK(same.fp == 0);
    CHECK(same.fn == 0);
    CHECK(same.assignment_cost == 0.0);

    const MatchResult none = match_points(PointSet{}, gt, 4);
    CHECK(none.tp == 0);
    CHECK(none.fn == 3);
    CHECK(match_points(gt, PointSet{}, 4).fp == 3);
    CHECK_THROWS_AS(match_points(gt, gt, 0.0), std::invalid_argument);

    // Greedy nearest-first would pair (0,0)-(2,0) and strand (4,0).
    const MatchResult opt = match_points(pts({{2, 0}, {4.5f, 0}}), pts({{0, 0}, {2.5f, 0}}), 2.5);
    CHECK(opt.tp == 2);
}

TEST_CASE("matching is optimal and self-consistent") {
    Gen g(72);
    for (int trial = 0; trial < 300; ++trial) {
        const PointSet pred = g.points(g.index(0, 6), 40, 40);
        const PointSet gt = g.points(g.index(0, 6), 40, 40);
        const double sigma = g.uniform(1.0, 20.0);
        const MatchResult m = match_points(pred, gt, sigma);
        CHECK(m.assignment_cost == doctest::Approx(oracle::assignment_cost(pred, gt)).epsilon(1e-9));
        CHECK(m.tp == m.pairs.size());
        CHECK(m.fp == pred.size() - m.tp);
        CHECK(m.fn == gt.size() - m.tp);
        std::vector<char> pu(pred.size(), 0), gu(gt.size(), 0);
        for (const auto& p : m.pairs) {
            CHECK(p.distance <= sigma);
            CHECK(!pu[p.pred]);
            CHECK(!gu[p.gt]);
            pu[p.pred] = gu[p.gt] = 1;
        }
        const MatchResult swapped = match_points(gt, pred, sigma);
        CHECK(swapped.tp == m.tp);
        CHECK(swapped.fp == m.fn);
        CHECK(swapped.fn == m.fp);
    }
}

TEST_CASE("f1 examples and bounds") {
    CHECK(f1_score(1.0, 1.0) == 1.0);
    CHECK(f1_score(1.0, 0.0) == 0.0);
    CHECK(f1_score(0.0, 0.0) == 0.0);
    MatchResult m;
    m.tp = 3;
    m.fp = 1;
    m.fn = 2;
    CHECK(m.precision() == 0.75);
    CHECK(m.recall() == 0.6);
    CHECK(std::abs(f1_score(m) - 2.0 / 3.0) <= 1e-12);

    Gen g(73);
    for (int trial = 0; trial < 500; ++trial) {
        MatchResult r;
        r.tp = g.index(0, 10);
        r.fp = g.index(0, 10);
        r.fn = g.index(0, 10);
        const double p = r.precision(), rc = r.recall(), f = f1_score(r);
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
        CHECK(f <= p + rc + 1e-15);
        CHECK(f <= 2 * p + 1e-15);
        CHECK(f <= 2 * rc + 1e-15);
        CHECK((f == 0.0) == (r.tp == 0));
    }
}

TEST_CASE("tp 3, fp 1, fn 2 fixture") {
    const PointSet gt = pts({{10, 10}, {40, 10}, {70, 10}, {10, 60}, {60, 60}});
    const PointSet pred = pts({{11, 10}, {40, 12}, {73, 10}, {35, 35}});
    const MatchResult m = match_points(pred, gt, 5.0);
    CHECK(m.tp == 3);
    CHECK(m.fp == 1);
    CHECK(m.fn == 2);
    CHECK(std::abs(f1_score(m) - 0.6666666666666666) <= 1e-9);
}

TEST_CASE("average precision fixture") {
    // Sweep: precision 1, 1/2, 2/3, 1/2, 3/5 at recall 1/3, 1/3, 2/3, 2/3, 1;
    // interpolated 1 on 34 levels, 2/3 on 33, 3/5 on 34.
    const PointSet gt = pts({{10, 10}, {50, 50}, {90, 90}});
    const PointSet pred = with_conf(pts({{11, 10}, {30, 30}, {52, 50}, {12, 10}, {90, 93}}),
                                    {0.9f, 0.8f, 0.7f, 0.6f, 0.5f});
    const double want = 0.7564356435643547;
    CHECK(std::abs(average_precision(pred, gt, 5.0) - want) <= 1e-9);
    CHECK(std::abs(oracle::ap_sweep(pred, gt, 5.0) - want) <= 1e-9);
    const MatchResult m = match_points(pred, gt, 5.0);
    CHECK(m.tp == 3);
    CHECK(m.fp == 2);
}

TEST_CASE("average precision limits") {
    const PointSet gt = pts({{10, 10}, {50, 50}});
    CHECK(average_precision(with_conf(gt, {0.3f, 0.9f}), gt, 4.0) == doctest::Approx(1.0).epsilon(0.01));
    CHECK(average_precision(with_conf(gt, {0.3f, 0.9f}), gt, 4.0) <= 1.0);
    const PointSet far = with_conf(pts({{30, 30}}), {1.0f});
    CHECK(average_precision(far, gt, 4.0) == 0.0);
    CHECK(average_precision(with_conf(PointSet{}, {}), gt, 4.0) == 0.0);
    CHECK_THROWS_AS(average_precision(gt, gt, 4.0), std::invalid_argument);
}

TEST_CASE("average precision agrees with the sweep oracle and grows with sigma") {
    Gen g(74);
    for (int trial = 0; trial < 200; ++trial) {
        const PointSet gt = g.points(g.index(0, 8), 60, 60);
        const PointSet pred = g.points(g.index(0, 10), 60, 60, true);
        const double s1 = g.uniform(1.0, 15.0), s2 = s1 + g.uniform(0.0, 15.0);
        const double a1 = average_precision(pred, gt, s1);
        CHECK(a1 == doctest::Approx(oracle::ap_sweep(pred, gt, s1)).epsilon(1e-12));
        CHECK(a1 >= 0.0);
        CHECK(a1 <= 1.0);
        CHECK(average_precision(pred, gt, s2) >= a1);
    }
}

TEST_CASE("average recall") {
    MatchResult perfect, empty;
    perfect.tp = 4;
    empty.fn = 3;
    const std::vector<MatchResult> all{perfect, perfect};
    CHECK(average_recall(all) == 1.0);
    const std::vector<MatchResult> half{perfect, empty};
    CHECK(average_recall(half) == 0.5);
    CHECK_THROWS_AS(average_recall(std::vector<MatchResult>{}), std::invalid_argument);

    Gen g(75);
    std::vector<MatchResult> three(3);
    double sum = 0;
    for (auto& m : three) {
        m.tp = g.index(0, 9);
        m.fn = g.index(1, 9);
        sum += double(m.tp) / double(m.tp + m.fn);
    }
    CHECK(average_recall(three) == doctest::Approx(sum / 3).epsilon(1e-15));
}

TEST_CASE("counting errors") {
    using Counts = std::vector<std::pair<std::size_t, std::size_t>>;
    const auto perfect = counting_errors(Counts{{3, 3}, {0, 0}});
    CHECK(perfect.mae == 0.0);
    CHECK(perfect.rmse == 0.0);
    const auto pm = counting_errors(Counts{{4, 3}, {2, 3}});
    CHECK(pm.mae == 1.0);
    CHECK(pm.rmse == 1.0);
    const auto big = counting_errors(Counts{{5, 2}, {0, 4}});
    CHECK(big.mae == 3.5);
    CHECK(big.rmse == doctest::Approx(3.5355339059).epsilon(1e-10));
    CHECK_THROWS_AS(counting_errors(Counts{}), std::invalid_argument);
}

TEST_CASE("image sigma") {
    CHECK(sigma_from_image(1, 1) == 1.0);
    CHECK(sigma_from_image(3, 4) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-15));
    CHECK(sigma_from_image(384, 384) == 384.0);
    CHECK_THROWS_AS(sigma_from_image(0, 3), std::invalid_argument);
}

TEST_CASE("threshold presets") {
    CHECK(preset_by_name("fsc147").sigma_s == 5.0);
    CHECK(preset_by_name("fsc147").sigma_l == 10.0);
    CHECK(preset_by_name("carpk").sigma_s == 5.0);
    CHECK(preset_by_name("carpk").sigma_l == 10.0);
    CHECK(preset_by_name("shtechA").sigma_s == 4.0);
    CHECK(preset_by_name("shtechA").sigma_l == 8.0);
    CHECK(preset_by_name("shtechB").sigma_s == 4.0);
    CHECK(preset_by_name("shtechB").sigma_l == 8.0);
    try {
        preset_by_name("coco");
        FAIL("expected an error");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        for (const auto& p : threshold_presets()) CHECK(msg.find(p.name) != std::string::npos);
    }
}

TEST_CASE("evaluation of exact predictions") {
    Gen g(76);
    std::vector<EvalSample> samples;
    for (int i = 0; i < 4; ++i) {
        PointSet gt = g.points(g.index(1, 6), 64, 64);
        PointSet pred = gt;
        pred.confidences = std::vector<float>(gt.size(), 0.5f);
        samples.push_back({"img" + std::to_string(i), pred, gt, std::nullopt});
    }
    const EvalReport r = evaluate(samples, preset_by_name("shtechA"));
    CHECK(r.strict.f1 == 1.0);
    CHECK(r.loose.f1 == 1.0);
    CHECK(r.strict.ap == 1.0);
    CHECK(r.strict.ar == 1.0);
    CHECK(r.counting.mae == 0.0);
    CHECK_FALSE(r.strict.ar_category.has_value());
    CHECK(r.images.size() == 4);
}

TEST_CASE("evaluation fixture") {
    // Image a: 2 GT, preds at 3 px and 7 px -> strict (5) tp 1, loose (10) tp 2.
    // Image b: 1 GT, one pred 20 px away, one spurious -> tp 0 at both.
    // Image c: no GT, one pred -> fp only, skipped by AR.
    std::vector<EvalSample> s{
        {"a", with_conf(pts({{13, 10}, {40, 47}}), {0.9f, 0.8f}), pts({{10, 10}, {40, 40}}), "cars"},
        {"b", with_conf(pts({{20, 0}, {60, 60}}), {0.7f, 0.6f}), pts({{0, 0}}), "cars"},
        {"c", with_conf(pts({{5, 5}}), {0.5f}), PointSet{}, "cows"},
    };
    const EvalReport r = evaluate(s, preset_by_name("fsc147"));
    CHECK(r.strict.tp == 1);
    CHECK(r.strict.fp == 4);
    CHECK(r.strict.fn == 2);
    CHECK(r.strict.precision == doctest::Approx(0.2));
    CHECK(r.strict.recall == doctest::Approx(1.0 / 3));
    CHECK(r.strict.f1 == doctest::Approx(0.25));
    CHECK(r.loose.tp == 2);
    CHECK(r.loose.f1 == doctest::Approx(2 * 0.4 * (2.0 / 3) / (0.4 + 2.0 / 3)));
    // AR over images with GT: strict (1/2 + 0) / 2, loose (1 + 0) / 2.
    CHECK(r.strict.ar == doctest::Approx(0.25));
    CHECK(r.loose.ar == doctest::Approx(0.5));
    // Per category: only "cars" has GT.
    REQUIRE(r.strict.ar_category.has_value());
    CHECK(*r.strict.ar_category == doctest::Approx(1.0 / 3));
    // Strict AP: ranks tp 1,1,1,1,1 over 3 GT -> levels 0..33 at precision 1.
    CHECK(r.strict.ap == doctest::Approx(34.0 / 101).epsilon(1e-12));
    // Loose AP: tp 1,2,.. -> levels 0..66 at precision 1.
    CHECK(r.loose.ap == doctest::Approx(67.0 / 101).epsilon(1e-12));
    CHECK(r.counting.mae == doctest::Approx(2.0 / 3));
    CHECK(r.counting.rmse == doctest::Approx(std::sqrt(2.0 / 3)));
    CHECK(r.loose.recall >= r.strict.recall);

    const std::string csv = report_summary_csv(r);
    CHECK(csv.rfind("preset,sigma_s,f1_s,ap_s,ar_s,precision_s,recall_s,ar_category_s,sigma_l,", 0) == 0);
    CHECK(csv.find("\nfsc147,5,0.25,") != std::string::npos);
    CHECK(report_images_csv(r) ==
          "image,pred_count,gt_count,tp_s,fp_s,fn_s,tp_l,fp_l,fn_l\n"
          "a,2,2,1,1,1,2,0,0\nb,2,1,0,2,1,0,2,1\nc,1,0,0,1,0,0,1,0\n");
    const std::string table = report_table(r);
    CHECK(table.find("Threshold=sigma_s(5)") != std::string::npos);
    CHECK(table.find("25.00") != std::string::npos);
}

TEST_CASE("loose recall dominates strict recall") {
    Gen g(77);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<EvalSample> samples;
        for (std::size_t i = 0, n = g.index(1, 4); i < n; ++i) {
            samples.push_back({"s", g.points(g.index(0, 8), 50, 50, true), g.points(g.index(0, 8), 50, 50), std::nullopt});
        }
        for (const auto& preset : threshold_presets()) {
            const EvalReport r = evaluate(samples, preset);
            CHECK(r.loose.recall >= r.strict.recall);
            CHECK(r.loose.ar >= r.strict.ar);
            CHECK(r.loose.ap >= r.strict.ap);
            for (double v : {r.strict.f1, r.strict.ap, r.strict.ar, r.loose.f1, r.loose.ap, r.loose.ar}) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
    }
}

}  // TEST_SUITE
