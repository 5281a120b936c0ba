#include <doctest.h>

#include <numeric>
#include <random>

#include "featvec/evaluation.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace featvec;

namespace {

CurveTrainer trainer_for(const Dataset& ds, int depth) {
    CurveTrainer t;
    t.params.max_depth = depth;
    t.params.task = ds.task();
    t.n_trees = 15;
    t.seed = 5;
    return t;
}

std::vector<int> identity_ranking(std::size_t d) {
    std::vector<int> r(d);
    std::iota(r.begin(), r.end(), 0);
    return r;
}

}  // namespace

TEST_CASE("curves have d+1 finite entries and consistent endpoints") {
    Dataset ds = test_util::threshold_dataset(500, 3, 3);
    auto [train, test] = train_test_split(ds, 0.3, 1);
    CurveTrainer tr = trainer_for(ds, 2);
    auto ranking = identity_ranking(3);

    PerformanceCurve sds = sds_curve(train, test, ranking, tr);
    PerformanceCurve sss = sss_curve(train, test, ranking, tr);
    REQUIRE(sds.metric.size() == 4);
    REQUIRE(sss.metric.size() == 4);
    for (double v : sds.metric) CHECK(std::isfinite(v));
    for (double v : sss.metric) CHECK(std::isfinite(v));

    // Full-model metric at SDS k=0, and the SSS k=d point is the same model.
    Forest full = train_forest(train, tr.params, tr.n_trees, tr.seed);
    CHECK(sds.metric[0] == doctest::Approx(evaluate_metric(full, test)));
    CHECK(sss.metric[3] == sds.metric[0]);

    // SSS k=0 is the majority-class baseline.
    const auto majority = static_cast<double>(train.majority_class());
    std::size_t hits = 0;
    for (double y : test.target)
        if (y == majority) ++hits;
    CHECK(sss.metric[0] ==
          doctest::Approx(static_cast<double>(hits) /
                          static_cast<double>(test.n_rows)));
    CHECK(sds.metric[3] == sss.metric[0]);
}

TEST_CASE("single-signal data collapses at k=1 and recovers at k=1") {
    Dataset ds = test_util::threshold_dataset(800, 4, 13);
    auto [train, test] = train_test_split(ds, 0.25, 2);
    CurveTrainer tr = trainer_for(ds, 2);
    auto ranking = identity_ranking(4);  // x0 first, correctly

    PerformanceCurve sds = sds_curve(train, test, ranking, tr);
    CHECK(sds.metric[0] > 0.9);
    // Removing x0 leaves pure noise: close to the majority baseline.
    CHECK(sds.metric[1] < sds.metric[4] + 0.1);

    PerformanceCurve sss = sss_curve(train, test, ranking, tr);
    CHECK(sss.metric[1] > 0.9);  // x0 alone suffices
}

TEST_CASE("non-permutation rankings are rejected") {
    Dataset ds = test_util::threshold_dataset(100, 3, 4);
    auto [train, test] = train_test_split(ds, 0.3, 1);
    CurveTrainer tr = trainer_for(ds, 2);
    const std::vector<int> dup = {0, 0, 2};
    const std::vector<int> out = {0, 1, 5};
    const std::vector<int> shortr = {0, 1};
    CHECK_THROWS_AS(sds_curve(train, test, dup, tr), ArgumentError);
    CHECK_THROWS_AS(sss_curve(train, test, out, tr), ArgumentError);
    CHECK_THROWS_AS(sds_curve(train, test, shortr, tr), ArgumentError);
}

TEST_CASE("parallel curves equal the serial reference") {
    Dataset ds = test_util::threshold_dataset(300, 3, 23);
    auto [train, test] = train_test_split(ds, 0.3, 9);
    CurveTrainer tr = trainer_for(ds, 2);
    auto ranking = identity_ranking(3);
    PerformanceCurve serial = sds_curve_serial(train, test, ranking, tr);
    for (int threads : {1, 4}) {
        PerformanceCurve par = sds_curve(train, test, ranking, tr, threads);
        CHECK(par.metric == serial.metric);
    }
    PerformanceCurve sss_serial = sss_curve_serial(train, test, ranking, tr);
    CHECK(sss_curve(train, test, ranking, tr, 4).metric == sss_serial.metric);
}

TEST_CASE("spearman identities and oracle agreement") {
    const std::vector<double> a = {1.0, 2.0, 3.0, 4.0, 5.0};
    const std::vector<double> rev = {5.0, 4.0, 3.0, 2.0, 1.0};
    CHECK(spearman(a, a) == doctest::Approx(1.0));
    CHECK(spearman(a, rev) == doctest::Approx(-1.0));

    const std::vector<double> constant = {2.0, 2.0, 2.0, 2.0, 2.0};
    CHECK_THROWS_AS(spearman(a, constant), NumericError);

    std::mt19937_64 rng(8);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(12), y(12);
        for (std::size_t i = 0; i < 12; ++i) {
            x[i] = gauss(rng);
            y[i] = gauss(rng);
        }
        // Inject some ties.
        x[3] = x[7];
        y[1] = y[9] = y[11];
        CHECK(spearman(x, y) ==
              doctest::Approx(oracles::spearman_rank_pearson(x, y))
                  .epsilon(1e-12));
    }
}

TEST_CASE("curve CSV bytes are deterministic") {
    PerformanceCurve c;
    c.kind = CurveKind::AddTop;
    c.method = "demo";
    c.metric = {0.5, 0.75, 1.0};
    test_util::TempFile f1("c1.csv"), f2("c2.csv");
    write_curve_csv(c, f1.path);
    write_curve_csv(c, f2.path);
    const std::string body = test_util::read_file(f1.path);
    CHECK(body == test_util::read_file(f2.path));
    CHECK(body == "k,metric\n0,0.5\n1,0.75\n2,1\n");
}
