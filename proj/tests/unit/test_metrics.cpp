#include <string>
#include <vector>

#include "doctest.h"
#include "kgpath/metrics.hpp"
#include "metric_table.hpp"

using namespace kgpath;

TEST_CASE("normalization") {
  CHECK(normalize_answer("  Ukrainian   Language. ") == "ukrainian language");
  CHECK(normalize_answer("\"Paris\"") == "paris");
  CHECK(normalize_answer("") == "");
}

TEST_CASE("hand-computed metric table") {
  for (const auto& r : testing::metric_table()) {
    CAPTURE(r.pred.size());
    CAPTURE(r.gold.size());
    CHECK(hits_at_1(r.pred, r.gold) == r.hit);
    CHECK(f1_score(r.pred, r.gold) == r.f1);
  }
}

TEST_CASE("macro mean") {
  std::vector<double> v{1, 0, 0.5};
  CHECK(macro_mean(v) == 0.5);
  CHECK(macro_mean(std::vector<double>{}) == 0.0);
}
