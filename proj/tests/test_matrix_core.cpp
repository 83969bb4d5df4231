#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "snn/masked_matrix.hpp"
#include "snn/rng.hpp"

using namespace snn;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("get reads observed cells and rejects masked ones") {
  Matrix values(1, 1);
  values << 3.0;
  MaskedMatrix single = MaskedMatrix::fully_observed(values);
  CHECK(single.get(0, 0) == 3.0);

  Matrix identity = Matrix::Identity(2, 2);
  BoolMatrix mask = BoolMatrix::Constant(2, 2, true);
  mask(1, 1) = false;
  MaskedMatrix partial(identity, mask);
  CHECK_THROWS_AS(partial.get(1, 1), std::domain_error);
  CHECK(partial.get(0, 1) == 0.0);
  CHECK_THROWS_AS(partial.get(2, 0), std::out_of_range);

  MaskedMatrix full = MaskedMatrix::fully_observed(Matrix::Identity(2, 2));
  CHECK(full.get(0, 1) == 0.0);
}

TEST_CASE("evaluate matches direct arithmetic") {
  Matrix pred(1, 2), truth(1, 2);
  pred << 1.0, 1.0;
  truth << 1.0, 3.0;
  const auto report = evaluate(pred, truth, BoolMatrix::Constant(1, 2, true));
  CHECK(report.rmse == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(report.mae == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.count == 2);

  const auto zero = evaluate(truth, truth, BoolMatrix::Constant(1, 2, true));
  CHECK(zero.rmse == 0.0);
  CHECK(zero.mae == 0.0);
}

TEST_CASE("evaluate agrees with an elementwise loop oracle") {
  Rng rng(11);
  Matrix pred(5, 5), truth(5, 5);
  BoolMatrix mask(5, 5);
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 5; ++j) {
      pred(i, j) = rng.normal();
      truth(i, j) = rng.normal();
      mask(i, j) = rng.bernoulli(0.7);
    }
  mask(2, 2) = true;  // nonempty
  double sq = 0.0, ab = 0.0;
  int count = 0;
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 5; ++j)
      if (mask(i, j)) {
        sq += (pred(i, j) - truth(i, j)) * (pred(i, j) - truth(i, j));
        ab += std::abs(pred(i, j) - truth(i, j));
        ++count;
      }
  const auto report = evaluate(pred, truth, mask);
  CHECK(report.rmse == doctest::Approx(std::sqrt(sq / count)).epsilon(1e-12));
  CHECK(report.mae == doctest::Approx(ab / count).epsilon(1e-12));
  CHECK(report.count == count);
  CHECK(report.mae <= report.rmse);
}

TEST_CASE("evaluate rejects bad inputs") {
  Matrix a = Matrix::Zero(2, 2);
  CHECK_THROWS_AS(evaluate(a, Matrix::Zero(2, 3), BoolMatrix::Constant(2, 2, true)),
                  std::invalid_argument);
  CHECK_THROWS_AS(evaluate(a, a, BoolMatrix::Constant(2, 2, false)), std::invalid_argument);
}

TEST_CASE("evaluate is permutation invariant and rmse >= mae") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix pred(4, 3), truth(4, 3);
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 3; ++j) {
        pred(i, j) = rng.normal(0, 2);
        truth(i, j) = rng.normal(0, 2);
      }
    const auto before = evaluate(pred, truth, BoolMatrix::Constant(4, 3, true));
    // permute rows identically in both matrices
    Matrix pred_p = pred, truth_p = truth;
    pred_p.row(0).swap(pred_p.row(3));
    truth_p.row(0).swap(truth_p.row(3));
    const auto after = evaluate(pred_p, truth_p, BoolMatrix::Constant(4, 3, true));
    CHECK(before.rmse == doctest::Approx(after.rmse).epsilon(1e-13));
    CHECK(before.mae == doctest::Approx(after.mae).epsilon(1e-13));
    CHECK(before.rmse >= before.mae);
  }
}

TEST_CASE("masked CSV round trip") {
  const std::string path = temp_path("snn_roundtrip.csv");
  {
    std::ofstream out(path);
    out << "1,NA\n2,3\n";
  }
  const MaskedMatrix parsed = read_masked_csv(path);
  CHECK(parsed.rows() == 2);
  CHECK(parsed.cols() == 2);
  CHECK_FALSE(parsed.observed(0, 1));
  CHECK(parsed.get(1, 0) == 2.0);

  Rng rng(7);
  Matrix values(10, 10);
  BoolMatrix mask(10, 10);
  for (Index i = 0; i < 10; ++i)
    for (Index j = 0; j < 10; ++j) {
      values(i, j) = rng.normal(0, 10);
      mask(i, j) = !rng.bernoulli(0.3);
    }
  const MaskedMatrix original(values, mask);
  write_masked_csv(original, path);
  const MaskedMatrix reread = read_masked_csv(path);
  REQUIRE(reread.rows() == 10);
  for (Index i = 0; i < 10; ++i)
    for (Index j = 0; j < 10; ++j) {
      CHECK(reread.mask()(i, j) == original.mask()(i, j));
      if (original.mask()(i, j)) CHECK(reread.values()(i, j) == original.values()(i, j));
    }
  std::remove(path.c_str());
}

TEST_CASE("ragged and malformed CSV rejected") {
  const std::string path = temp_path("snn_ragged.csv");
  {
    std::ofstream out(path);
    out << "1,2\n3\n";
  }
  CHECK_THROWS_AS(read_masked_csv(path), std::runtime_error);
  {
    std::ofstream out(path);
    out << "1,abc\n2,3\n";
  }
  CHECK_THROWS_AS(read_masked_csv(path), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("eval report serializes as one CSV row") {
  EvalReport report;
  report.rmse = 0.5;
  report.mae = 0.25;
  report.count = 4;
  CHECK(eval_report_csv(report) == "rmse,mae,count\n0.5,0.25,4\n");
}

TEST_CASE("histogram counts with half-open bins") {
  CHECK(histogram({1, 1, 5}, {1, 3, 5}) == std::vector<Index>{2, 1});
  CHECK(histogram({}, {0, 1, 2}) == std::vector<Index>{0, 0});
  CHECK_THROWS_AS(histogram({1.0}, {2, 2}), std::invalid_argument);
  CHECK_THROWS_AS(histogram({1.0}, {3, 1}), std::invalid_argument);
  // boundary behavior: value on an inner edge falls into the right bin
  CHECK(histogram({3.0}, {1, 3, 5}) == std::vector<Index>{0, 1});
}

TEST_CASE("histogram of uniform draws stays within a binomial 5-sigma band") {
  Rng rng(2024);
  std::vector<double> draws(1000);
  for (auto& d : draws) d = rng.uniform(1.0, 5.0);
  const auto counts = histogram(draws, {1, 2, 3, 4, 5});
  const double expected = 250.0;
  const double sigma = std::sqrt(1000 * 0.25 * 0.75);
  for (Index c : counts) CHECK(std::abs(c - expected) <= 5.0 * sigma);
  Index total = 0;
  for (Index c : counts) total += c;
  CHECK(total == 1000);
}
