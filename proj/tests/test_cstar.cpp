#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fell/cstar.hpp"

using namespace fell;

namespace {

AlgebraElement random_element(const BlockAlgebra& alg, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  AlgebraElement e = AlgebraElement::zero(alg);
  for (size_t b = 0; b < e.data.size(); ++b)
    for (int p = 0; p < alg.blocks[b]; ++p)
      for (int q = 0; q < alg.blocks[b]; ++q) e.data[b](p, q) = Complex(g(rng), g(rng));
  return e;
}

// Oracle: norm of a*a via a dense eigensolve, independent of operator_norm.
double oracle_norm(const AlgebraElement& a) {
  Matrix f = a.full();
  Eigen::SelfAdjointEigenSolver<Matrix> es(f.adjoint() * f);
  return std::sqrt(es.eigenvalues().maxCoeff());
}

}  // namespace

TEST_CASE("operator_norm") {
  BlockAlgebra alg{{2, 2}};
  CHECK(operator_norm(AlgebraElement::zero(alg)) == 0.0);
  CHECK(operator_norm(AlgebraElement::identity(BlockAlgebra{{2}})) == 1.0);

  SECTION("diag(3,4) (+) [[0,5],[0,0]] has norm 5") {
    AlgebraElement a = AlgebraElement::zero(alg);
    a.data[0] << 3, 0, 0, 4;
    a.data[1] << 0, 5, 0, 0;
    CHECK_THAT(operator_norm(a), Catch::Matchers::WithinAbs(5.0, 1e-12));
    CHECK_THAT(oracle_norm(a), Catch::Matchers::WithinAbs(5.0, 1e-12));
  }
  SECTION("C*-identity and submultiplicativity on random elements") {
    std::mt19937_64 rng(7);
    BlockAlgebra big{{1, 2, 3}};
    for (int trial = 0; trial < 1000; ++trial) {
      AlgebraElement a = random_element(big, rng);
      AlgebraElement b = random_element(big, rng);
      double na = operator_norm(a);
      CHECK(operator_norm(a.star() * a) <= na * na * (1 + 1e-9) + 1e-12);
      CHECK(operator_norm(a.star() * a) >= na * na * (1 - 1e-9) - 1e-12);
      CHECK(operator_norm(a * b) <= na * operator_norm(b) * (1 + 1e-9) + 1e-12);
      CHECK_THAT(operator_norm(a), Catch::Matchers::WithinRel(oracle_norm(a), 1e-9));
    }
  }
}

TEST_CASE("is_positive") {
  BlockAlgebra alg{{2}};
  std::mt19937_64 rng(11);
  SECTION("squares are positive") {
    for (int t = 0; t < 50; ++t) {
      AlgebraElement b = random_element(alg, rng);
      CHECK(is_positive(b.star() * b, 1e-9));
    }
  }
  SECTION("minus identity is not positive") {
    CHECK_FALSE(is_positive(AlgebraElement::identity(alg) * Complex(-1, 0), 1e-9));
  }
  SECTION("tiny negative eigenvalue within tolerance") {
    AlgebraElement a = AlgebraElement::zero(alg);
    a.data[0] << -1e-12, 0, 0, 1;
    CHECK(is_positive(a, 1e-9));
    a.data[0](0, 0) = -1e-3;
    CHECK_FALSE(is_positive(a, 1e-9));
  }
  SECTION("only ~0 is positive in both directions") {
    for (int t = 0; t < 20; ++t) {
      AlgebraElement b = random_element(alg, rng);
      AlgebraElement p = b.star() * b;
      if (is_positive(p * Complex(-1, 0), 1e-9))
        CHECK(operator_norm(p) <= 1e-9 * (1 + operator_norm(p)));
    }
  }
}

TEST_CASE("gram_factorize") {
  BlockAlgebra alg{{2, 1}};
  std::mt19937_64 rng(3);

  SECTION("identity factors as identity") {
    AlgebraMatrix g(1, std::vector<AlgebraElement>(1, AlgebraElement::identity(alg)));
    AlgebraMatrix b = gram_factorize(g);
    CHECK(gram_residual(g, b) < 1e-9);
    CHECK(operator_norm(b[0][0] - AlgebraElement::identity(alg)) < 1e-9);
  }
  SECTION("k=1 with G=[[b*b]]") {
    AlgebraElement x = random_element(alg, rng);
    AlgebraMatrix g(1, std::vector<AlgebraElement>(1, x.star() * x));
    AlgebraMatrix b = gram_factorize(g);
    CHECK(gram_residual(g, b) < 1e-9);
  }
  SECTION("Gram matrix of random 'module vectors' factors with small residual") {
    // vectors m_i in the free module B^3, <m,n> = sum m_k^* n_k
    const int k = 3, len = 3;
    std::vector<std::vector<AlgebraElement>> vecs;
    for (int i = 0; i < k; ++i) {
      std::vector<AlgebraElement> v;
      for (int l = 0; l < len; ++l) v.push_back(random_element(alg, rng));
      vecs.push_back(v);
    }
    AlgebraMatrix g(k, std::vector<AlgebraElement>(k, AlgebraElement::zero(alg)));
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        for (int l = 0; l < len; ++l)
          g[i][j] = g[i][j] + vecs[i][l].star() * vecs[j][l];
    AlgebraMatrix b = gram_factorize(g);
    CHECK(gram_residual(g, b) < 1e-9);
  }
  SECTION("non-positive input is rejected") {
    AlgebraMatrix g(1, std::vector<AlgebraElement>(
                           1, AlgebraElement::identity(alg) * Complex(-1, 0)));
    CHECK_THROWS_AS(gram_factorize(g), std::domain_error);
  }
}
