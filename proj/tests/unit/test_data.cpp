#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "mcox/data.hpp"
#include "mcox/error.hpp"

using namespace mcox;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::InvalidArgument;
}

Dataset read_text(const std::string& text, const CsvSchema& schema) {
  std::istringstream in(text);
  return read_csv(in, schema);
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("csv rows are sorted by time") {
    const Dataset ds = read_text("time,status,x\n2,1,0.1\n1,1,0.2\n3,1,0.3\n", {"time", "status", {"x"}});
    CHECK(ds.n() == 3);
    CHECK(ds.sort_index() == std::vector<std::size_t>{1, 0, 2});
  }

  TEST_CASE("rows with missing status are dropped and counted") {
    const Dataset ds =
        read_text("time,status,x\n2,1,0.1\n1,NA,0.2\n3,0,0.3\n", {"time", "status", {"x"}});
    CHECK(ds.n() == 2);
    CHECK(ds.dropped_rows() == 1);
  }

  TEST_CASE("unknown column is MissingColumn") {
    CHECK(kind_of([] { read_text("time,status,x\n1,1,0\n", {"time", "event", {"x"}}); }) ==
          ErrorKind::MissingColumn);
  }

  TEST_CASE("empty and negative inputs") {
    CHECK(kind_of([] { read_text("time,status,x\n", {"time", "status", {"x"}}); }) == ErrorKind::EmptyDataset);
    CHECK(kind_of([] { read_text("time,status,x\n-1,1,0\n", {"time", "status", {"x"}}); }) ==
          ErrorKind::NegativeTime);
  }

  TEST_CASE("ties put events before censorings then input order") {
    const Dataset ds = read_text("time,status,x\n1,0,0\n1,1,0\n0.5,1,0\n1,1,0\n", {"time", "status", {"x"}});
    CHECK(ds.sort_index() == std::vector<std::size_t>{2, 1, 3, 0});
  }

  TEST_CASE("semicolon delimiter") {
    CsvSchema schema{"t", "d", {"a", "b"}};
    schema.delimiter = ';';
    const Dataset ds = read_text("t;d;a;b\n1;1;2;3\n", schema);
    CHECK(ds.covariate(0, 0.0) == Eigen::Vector2d(2, 3));
  }

  TEST_CASE("constant path ignores time") {
    SurvivalRecord rec{1.0, 1, {1.5, -0.5}, CovariatePath::constant()};
    CHECK(evaluate_covariate(rec, 7.0) == Eigen::Vector2d(1.5, -0.5));
  }

  TEST_CASE("blockwise sum path gives x plus t eps") {
    SurvivalRecord rec{1.0, 1, {1.0, 0.0, 0.5, 0.5}, CovariatePath::parse("poly:sum:1,t")};
    CHECK(evaluate_covariate(rec, 2.0) == Eigen::Vector2d(2.0, 1.0));
  }

  TEST_CASE("legendre basis at t = 1") {
    SurvivalRecord rec{1.0, 1, {1.0}, CovariatePath::parse("poly:1,2t,4t2-2")};
    CHECK(evaluate_covariate(rec, 1.0) == Eigen::Vector3d(1.0, 2.0, 2.0));
    CHECK(CovariatePath::parse("poly:1,2t,4t2-2").output_dim(4) == 12);
  }

  TEST_CASE("single-function basis {1} equals the constant path") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    for (int k = 0; k < 20; ++k) {
      std::vector<double> f{z(rng), z(rng), z(rng)};
      SurvivalRecord a{1.0, 1, f, CovariatePath::constant()};
      SurvivalRecord b{1.0, 1, f, CovariatePath::parse("poly:1")};
      const double t = std::abs(z(rng)) * 3;
      CHECK(evaluate_covariate(a, t) == evaluate_covariate(b, t));
    }
  }

  TEST_CASE("path evaluation is bitwise repeatable") {
    const auto path = CovariatePath::parse("poly:1,2t,4t2-2");
    std::vector<double> f{0.1, -2.3};
    std::vector<double> a(6), b(6);
    path.evaluate(f, 0.37, a);
    path.evaluate(f, 0.37, b);
    CHECK(a == b);
  }

  TEST_CASE("bad path specs are rejected") {
    CHECK(kind_of([] { CovariatePath::parse("poly:"); }) == ErrorKind::InvalidArgument);
    CHECK(kind_of([] { CovariatePath::parse("spline:3"); }) == ErrorKind::InvalidArgument);
    CHECK(kind_of([] { CovariatePath::parse("poly:sum:1,t").output_dim(3); }) == ErrorKind::InvalidArgument);
  }

  TEST_CASE("at-risk sets") {
    const Dataset ds({1.0, 2.0, 3.0}, {1, 1, 1}, RowMatrix::Zero(3, 1));
    CHECK(at_risk_indices(ds, 2.5) == std::vector<std::size_t>{2});
    CHECK(at_risk_indices(ds, 0.0).size() == 3);
    CHECK(at_risk_indices(ds, 3.5).empty());
  }

  TEST_CASE("risk sets shrink with time") {
    std::mt19937_64 rng(11);
    const Dataset ds = fixture::random_dataset(rng, {.n = 200});
    std::size_t prev = ds.n();
    for (double t = 0.0; t < 5.0; t += 0.05) {
      const auto now = at_risk_indices(ds, t);
      CHECK(now.size() <= prev);
      for (std::size_t j : now) CHECK(ds.y(j) >= t);
      prev = now.size();
    }
    const auto early = at_risk_indices(ds, 0.3);
    for (std::size_t j : at_risk_indices(ds, 0.8)) {
      CHECK(std::find(early.begin(), early.end(), j) != early.end());
    }
  }

  TEST_CASE("csv round trip reproduces the dataset") {
    std::mt19937_64 rng(5);
    CsvSchema schema{"time", "status", {"a", "b", "c", "d"}, CovariatePath::parse("poly:sum:1,t")};
    const Dataset ds = fixture::random_dataset(rng, {.n = 100, .d = 4, .path = schema.path});
    std::stringstream buf;
    write_csv(buf, ds, schema);
    const Dataset back = read_csv(buf, schema);
    CHECK(back == ds);

    const auto dir = fixture::temp_dir("roundtrip");
    write_csv(dir / "d.csv", ds, schema);
    CHECK(load_csv(dir / "d.csv", schema) == ds);
  }

  TEST_CASE("sort order is a permutation with nondecreasing time") {
    std::mt19937_64 rng(8);
    const Dataset ds = fixture::random_dataset(rng, {.n = 300});
    std::vector<std::size_t> idx = ds.sort_index();
    for (std::size_t k = 1; k < idx.size(); ++k) CHECK(ds.y(idx[k - 1]) <= ds.y(idx[k]));
    std::sort(idx.begin(), idx.end());
    for (std::size_t k = 0; k < idx.size(); ++k) CHECK(idx[k] == k);
  }
}
