#include <doctest.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "towerdebias/debias.hpp"
#include "towerdebias/error.hpp"

using namespace tdb;

namespace {

Dataset random_reference(std::size_t n, std::size_t p, std::mt19937_64& rng) {
  std::vector<test::ColumnDef> defs;
  defs.push_back({"y", ColumnRole::Target, test::normals(n, rng)});
  for (std::size_t j = 0; j < p; ++j) {
    defs.push_back({"x" + std::to_string(j + 1), ColumnRole::Feature,
                    test::normals(n, rng, 1.0 + static_cast<double>(j))});
  }
  defs.push_back({"s", ColumnRole::Sensitive, test::normals(n, rng)});
  return test::make_dataset(std::move(defs));
}

// Standardize with the index's statistics, scan all rows, average in index order.
std::vector<double> oracle_debias(const DebiasIndex& index, const Dataset& reference,
                                  const Dataset& queries, std::size_t k) {
  const auto& names = index.feature_names();
  const auto& st = index.standardizer();
  auto standardized = [&](const Dataset& d) {
    oracle::Matrix out(d.rows(), std::vector<double>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) {
      const auto& col = d.column(names[j]).values;
      for (std::size_t i = 0; i < d.rows(); ++i) {
        out[i][j] = (col[i] - st.means()[j]) / st.sds()[j];
      }
    }
    return out;
  };
  const auto ref = standardized(reference);
  const auto qs = standardized(queries);
  std::vector<double> out;
  for (const auto& q : qs) {
    out.push_back(oracle::average_at(oracle::brute_knn(ref, q, k), index.predictions()));
  }
  return out;
}

}  // namespace

TEST_CASE("index excludes sensitive columns and checks inputs") {
  std::mt19937_64 rng(1);
  const auto ref = random_reference(20, 2, rng);
  const auto preds = test::normals(20, rng);
  const auto index = DebiasIndex::build(ref, preds);
  CHECK(index.size() == 20);
  CHECK(index.feature_names() == std::vector<std::string>{"x1", "x2"});
  CHECK(index.reference_features().rows() == index.predictions().size());

  std::vector<double> short_preds(19, 0.0);
  CHECK_THROWS_AS(DebiasIndex::build(ref, short_preds), Error);
  auto bad = preds;
  bad[3] = std::nan("");
  CHECK_THROWS_AS(DebiasIndex::build(ref, bad), Error);
  const std::vector<std::string> with_s{"x1", "s"};
  CHECK_THROWS_AS(DebiasIndex::build(ref, preds, Standardizer::fit(ref, with_s)), Error);
}

TEST_CASE("5 reference rows: at most 5 neighbors") {
  std::mt19937_64 rng(2);
  const auto ref = random_reference(5, 1, rng);
  const auto index = DebiasIndex::build(ref, test::normals(5, rng));
  CHECK(index.neighbors(std::vector<double>{0.3}, 10).size() == 5);
}

TEST_CASE("identical X: neighbor set is the first k indices") {
  const std::size_t n = 12;
  const auto ref = test::make_dataset({{"y", ColumnRole::Target, std::vector<double>(n, 0.0)},
                                       {"x", ColumnRole::Feature, std::vector<double>(n, 1.0)},
                                       {"s", ColumnRole::Sensitive, std::vector<double>(n, 0.0)}});
  std::vector<double> preds(n);
  for (std::size_t i = 0; i < n; ++i) preds[i] = static_cast<double>(i * i);
  const Standardizer unit({"x"}, {0.0}, {1.0});
  const auto index = DebiasIndex::build(ref, preds, unit);
  const auto nb = index.neighbors(std::vector<double>{4.0}, 4);
  REQUIRE(nb.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(nb[i].index == i);
  const auto out = index.predict(RowMatrix(1, 1, {4.0}), {.k = 4, .clamp = false});
  CHECK(out.values[0] == (0.0 + 1.0 + 4.0 + 9.0) / 4.0);
}

TEST_CASE("matches the brute-force oracle on 200 random rows") {
  std::mt19937_64 rng(3);
  const auto ref = random_reference(200, 3, rng);
  const auto preds = test::normals(200, rng);
  const auto queries = random_reference(50, 3, rng);
  const auto index = DebiasIndex::build(ref, preds);
  for (std::size_t k : {1, 3, 10, 25, 200}) {
    const auto got = index.predict(queries, {.k = k, .clamp = false});
    CHECK(got.values == oracle_debias(index, ref, queries, k));
  }
}

TEST_CASE("k = 1 at a reference point returns its prediction") {
  std::mt19937_64 rng(4);
  const auto ref = random_reference(30, 2, rng);
  const auto preds = test::normals(30, rng);
  const auto index = DebiasIndex::build(ref, preds);
  const auto out = index.predict(ref, {.k = 1, .clamp = false});
  CHECK(out.values == preds);
}

TEST_CASE("k = n gives the constant mean") {
  std::mt19937_64 rng(5);
  const auto ref = random_reference(40, 2, rng);
  const auto preds = test::normals(40, rng);
  const auto index = DebiasIndex::build(ref, preds);
  const auto out = index.predict(ref, {.k = 40, .clamp = false});
  const double mean = oracle::average_at([] {
    std::vector<std::size_t> all(40);
    std::iota(all.begin(), all.end(), 0);
    return all;
  }(), preds);
  for (double v : out.values) CHECK(v == mean);
}

TEST_CASE("k > n clamps with a warning or fails") {
  std::mt19937_64 rng(6);
  const auto ref = random_reference(8, 1, rng);
  const auto index = DebiasIndex::build(ref, test::normals(8, rng));
  const auto out = index.predict(ref, {.k = 20, .clamp = true});
  CHECK(out.clamped);
  CHECK(out.k_used == 8);
  CHECK_FALSE(out.warnings.empty());
  CHECK_THROWS_AS(index.predict(ref, {.k = 20, .clamp = false}), Error);
  CHECK_THROWS_AS(index.predict(ref, {.k = 0, .clamp = true}), Error);
}

TEST_CASE("schema mismatch: query without the index features") {
  std::mt19937_64 rng(7);
  const auto ref = random_reference(8, 2, rng);
  const auto index = DebiasIndex::build(ref, test::normals(8, rng));
  const auto other = random_reference(4, 1, rng);
  try {
    index.predict(other, {.k = 2});
    FAIL("expected SchemaMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SchemaMismatch);
  }
}

TEST_CASE("range preservation and monotone smoothing") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 200;
    const auto ref = random_reference(n, 2, rng);
    const auto preds = test::normals(n, rng);
    const auto index = DebiasIndex::build(ref, preds);
    const auto lo = *std::min_element(preds.begin(), preds.end());
    const auto hi = *std::max_element(preds.begin(), preds.end());
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t k : {std::size_t{1}, n / 4, n / 2, n}) {
      const auto out = index.predict(ref, {.k = k, .clamp = false});
      for (double v : out.values) {
        CHECK(v >= lo);
        CHECK(v <= hi);
      }
      const double var = oracle::variance(out.values);
      CHECK(var <= previous);
      previous = var;
    }
  }
}

TEST_CASE("permuting reference rows changes nothing without ties") {
  std::mt19937_64 rng(9);
  const auto ref = random_reference(100, 2, rng);
  const auto preds = test::normals(100, rng);
  std::vector<std::size_t> perm(100);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> permuted_preds(100);
  for (std::size_t i = 0; i < 100; ++i) permuted_preds[i] = preds[perm[i]];
  const auto shuffled = ref.select_rows(perm);
  const auto a = DebiasIndex::build(ref, preds, DebiasIndex::build(ref, preds).standardizer());
  const auto b = DebiasIndex::build(shuffled, permuted_preds, a.standardizer());
  const auto queries = random_reference(30, 2, rng);
  const auto oa = a.predict(queries, {.k = 7});
  const auto ob = b.predict(queries, {.k = 7});
  for (std::size_t i = 0; i < oa.values.size(); ++i) {
    CHECK(oa.values[i] == doctest::Approx(ob.values[i]).epsilon(1e-12));
  }
}

TEST_CASE("classify") {
  CHECK(classify(std::vector<double>{0.2, 0.5, 0.7}) == std::vector<double>{0, 1, 1});
  CHECK(classify(std::vector<double>(5, 0.0)) == std::vector<double>(5, 0.0));
  CHECK_THROWS_AS(classify(std::vector<double>{0.5}, 0.0), Error);
  CHECK_THROWS_AS(classify(std::vector<double>{0.5}, 1.0), Error);
  CHECK_THROWS_AS(classify(std::vector<double>{1.5}), Error);

  std::mt19937_64 rng(10);
  const auto p = test::uniforms(1000, rng);
  const auto labels = classify(p);
  for (std::size_t i = 0; i < p.size(); ++i) {
    // argmax over {1 - p, p}, ties to 1
    const double want = p[i] >= 1.0 - p[i] ? 1.0 : 0.0;
    CHECK(labels[i] == want);
  }
}
