#include "ocpd/bordered_system.hpp"
#include "ocpd/kernel.hpp"

#include "oracles/oracles.hpp"

#include <doctest.h>

using namespace ocpd;

namespace {

Matrix gram_of(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return kernel_matrix({KernelKind::Rbf, 1.0}, oracle::normal(static_cast<Eigen::Index>(n), 2, rng));
}

/// Q built entry by entry, inverted densely.
Matrix direct_inverse(const Matrix& gram, const std::vector<std::size_t>& s) {
    const auto m = static_cast<Eigen::Index>(s.size());
    Matrix q = Matrix::Zero(m + 1, m + 1);
    for (Eigen::Index p = 0; p < m; ++p) {
        q(0, p + 1) = q(p + 1, 0) = 1.0;
        for (Eigen::Index r = 0; r < m; ++r)
            q(p + 1, r + 1) = gram(static_cast<Eigen::Index>(s[static_cast<std::size_t>(p)]),
                                   static_cast<Eigen::Index>(s[static_cast<std::size_t>(r)]));
    }
    return q.inverse();
}

} // namespace

TEST_CASE("first expansion gives the 2x2 closed form") {
    const Matrix gram = gram_of(4, 61);
    BorderedSystem sys;
    q_inverse_expand(sys, gram, 2);
    // [[0, 1], [1, k]]^-1 = [[-k, 1], [1, 0]]
    Matrix expect(2, 2);
    expect << -gram(2, 2), 1.0, 1.0, 0.0;
    CHECK((sys.q_inv - expect).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(sys.s_order == std::vector<std::size_t>{2});
}

TEST_CASE("expand then shrink restores the original") {
    const Matrix gram = gram_of(10, 62);
    BorderedSystem sys = BorderedSystem::recompute(gram, {0, 2, 3, 5, 7, 9});
    const BorderedSystem before = sys;
    q_inverse_expand(sys, gram, 4);
    CHECK(sys.residual(gram) <= 1e-8);
    q_inverse_shrink(sys, gram, 4);
    CHECK(sys.s_order == before.s_order);
    CHECK((sys.q_inv - before.q_inv).cwiseAbs().maxCoeff() <= 1e-7);
}

TEST_CASE("shrinking to nothing leaves the empty state") {
    const Matrix gram = gram_of(3, 63);
    BorderedSystem sys;
    q_inverse_expand(sys, gram, 1);
    q_inverse_shrink(sys, gram, 1);
    CHECK(sys.empty());
    CHECK(sys.q_inv.size() == 0);
    CHECK(sys.residual(gram) == 0.0);
}

TEST_CASE("random expand and shrink sequences agree with a direct inverse") {
    const Matrix gram = gram_of(15, 64);
    std::mt19937_64 rng(65);
    BorderedSystem sys;
    std::vector<std::size_t> in;
    for (int step = 0; step < 200; ++step) {
        const std::size_t i = rng() % 15;
        const bool present = std::find(in.begin(), in.end(), i) != in.end();
        if (present) {
            q_inverse_shrink(sys, gram, i);
            in.erase(std::find(in.begin(), in.end(), i));
        } else {
            q_inverse_expand(sys, gram, i);
            in.push_back(i);
        }
        REQUIRE(sys.s_order == in);
        if (!in.empty()) {
            CHECK((sys.q_inv - direct_inverse(gram, in)).cwiseAbs().maxCoeff() <= 1e-7);
            CHECK(sys.residual(gram) <= 1e-8);
        }
    }
}

TEST_CASE("assemble matches the explicit bordered matrix") {
    const Matrix gram = gram_of(6, 66);
    const BorderedSystem sys = BorderedSystem::recompute(gram, {4, 1});
    Matrix q(3, 3);
    q << 0, 1, 1, 1, gram(4, 4), gram(4, 1), 1, gram(1, 4), gram(1, 1);
    CHECK(sys.assemble(gram) == q);
    CHECK(sys.position(1) == 1);
    CHECK(sys.position(3) == 2);
}

TEST_CASE("a duplicated support vector falls back to a recompute") {
    Matrix x(3, 2);
    x << 0, 0, 1, 0, 0, 0;
    const Matrix gram = kernel_matrix({KernelKind::Rbf, 1.0}, x);
    BorderedSystem sys = BorderedSystem::recompute(gram, {0, 1});
    q_inverse_expand(sys, gram, 2);
    CHECK(sys.recomputes == 1);
    CHECK(sys.s_order.size() == 3);
}
