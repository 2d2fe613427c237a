#include <doctest.h>

#include "gradcheck.hpp"

// Analytic gradients of every layer kernel against central finite
// differences, all in double precision. The training stack is only as
// good as these derivatives.

TEST_CASE("conv2d gradients match finite differences") {
  CHECK(gradcheck::check_conv(secci::Rng(101), 1, 1) < 1e-3);
  CHECK(gradcheck::check_conv(secci::Rng(102), 1, 0) < 1e-3);
  CHECK(gradcheck::check_conv(secci::Rng(103), 2, 1) < 1e-3);
  CHECK(gradcheck::check_conv(secci::Rng(104), 2, 0) < 1e-3);
}

TEST_CASE("maxpool gradient matches finite differences") {
  CHECK(gradcheck::check_maxpool(secci::Rng(201)) < 1e-3);
}

TEST_CASE("batchnorm gradients match finite differences") {
  CHECK(gradcheck::check_batchnorm(secci::Rng(301)) < 1e-3);
}

TEST_CASE("squeeze-excite gradients match finite differences") {
  CHECK(gradcheck::check_se(secci::Rng(401)) < 1e-3);
}

TEST_CASE("dense gradients match finite differences") {
  CHECK(gradcheck::check_dense(secci::Rng(501)) < 1e-3);
}

TEST_CASE("relu gradient matches finite differences") {
  CHECK(gradcheck::check_relu(secci::Rng(601)) < 1e-3);
}

TEST_CASE("softmax + cross-entropy gradient matches finite differences") {
  CHECK(gradcheck::check_softmax_cross_entropy(secci::Rng(701)) < 1e-3);
}

TEST_CASE("the full sweep stays below the tolerance on several seeds") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    for (const auto& c : gradcheck::run_all(seed)) {
      CAPTURE(c.name);
      CHECK(c.worst < 1e-3);
    }
  }
}
