#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "mbsched/core.hpp"
#include "mbsched/parallel.hpp"

using namespace mbsched;

TEST_CASE("Mat is row-major with working accessors") {
  Mat m(2, 3);
  m(0, 0) = 1;
  m(0, 2) = 3;
  m(1, 1) = 5;
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.size() == 6);
  CHECK(m.flat()[2] == 3);      // (0,2) sits at flat index 2
  CHECK(m.flat()[4] == 5);      // (1,1) sits at flat index 4
  const std::vector<double> c1 = m.col(1);
  CHECK(c1 == std::vector<double>{0, 5});
  CHECK(m.same_shape(Mat(2, 3, 7.0)));
  CHECK_FALSE(m.same_shape(Mat(3, 2)));
}

TEST_CASE("validate_config accepts a sane setup") {
  SystemConfig cfg;
  cfg.n_users = 2;
  cfg.n_bands = 2;
  GainMatrix g(2, 2, 1.0);
  g(1, 1) = 2.0;
  g(0, 1) = 3.0;
  const ValidationReport rep = validate_config(cfg, g);
  CHECK(rep.ok());
  CHECK(rep.warnings.size() == 1);  // band 0 has tied gains -> warning, not error
}

TEST_CASE("validate_config collects errors") {
  SystemConfig cfg;  // n_users = n_bands = 0
  cfg.noise_psd = -1.0;
  cfg.v_param = -2.0;
  const ValidationReport rep = validate_config(cfg, GainMatrix(0, 0));
  CHECK_FALSE(rep.ok());
  CHECK(rep.errors.size() >= 3);

  SystemConfig ok;
  ok.n_users = 2;
  ok.n_bands = 1;
  GainMatrix bad(2, 1, 1.0);
  bad(1, 0) = 0.0;  // nonpositive gain
  CHECK_FALSE(validate_config(ok, bad).ok());
  CHECK_FALSE(validate_config(ok, GainMatrix(1, 1, 1.0)).ok());  // shape mismatch
}

TEST_CASE("queue_update applies arrivals, service and the floor at zero") {
  QueueVector q = {5.0, 0.5};
  ArrivalVector a;
  a.amount = {1.0, 0.25};
  a.mean_rate = {1.0, 0.25};
  RateMatrix r(2, 2);
  r(0, 0) = 2.0;
  r(0, 1) = 1.0;
  r(1, 0) = 4.0;  // over-serves user 1 -> clamps to zero
  const QueueVector next = queue_update(q, a, r);
  CHECK(next[0] == doctest::Approx(3.0));
  CHECK(next[1] == 0.0);
}

TEST_CASE("queue_update rejects malformed inputs") {
  QueueVector q = {1.0};
  ArrivalVector a;
  a.amount = {1.0, 2.0};
  a.mean_rate = {1.0, 2.0};
  CHECK_THROWS_AS((void)queue_update(q, a, RateMatrix(1, 1)), std::invalid_argument);
  ArrivalVector one;
  one.amount = {-1.0};
  one.mean_rate = {1.0};
  CHECK_THROWS_AS((void)queue_update(q, one, RateMatrix(1, 1)), std::invalid_argument);
  ArrivalVector fine;
  fine.amount = {1.0};
  fine.mean_rate = {1.0};
  CHECK_THROWS_AS((void)queue_update({-1.0}, fine, RateMatrix(1, 1)), std::invalid_argument);
}

TEST_CASE("parallel_for matches serial execution for any worker count") {
  const std::size_t n = 1000;
  std::vector<double> serial(n), par(n);
  for (std::size_t i = 0; i < n; ++i) serial[i] = static_cast<double>(i * i);
  for (unsigned workers : {0u, 1u, 3u, 16u}) {
    std::fill(par.begin(), par.end(), -1.0);
    parallel_for(n, workers, [&](std::size_t i) { par[i] = static_cast<double>(i * i); });
    CHECK(par == serial);
  }
  parallel_for(0, 4, [&](std::size_t) { FAIL("must not be called for n=0"); });
}

TEST_CASE("parallel_for rethrows a worker exception") {
  CHECK_THROWS_AS(
      parallel_for(100, 4,
                   [](std::size_t i) {
                     if (i == 57) throw std::runtime_error("boom");
                   }),
      std::runtime_error);
}
