#include "ocpd/error.hpp"
#include "ocpd/kernel.hpp"
#include "ocpd/ocsvm.hpp"
#include "ocpd/ocsvm_io.hpp"

#include "oracles/oracles.hpp"

#include <doctest.h>

#include <filesystem>

using namespace ocpd;

namespace {

const KernelSpec kRbf1{KernelKind::Rbf, 1.0};

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

double objective(const Matrix& K, const Vector& a) { return 0.5 * a.dot(K * a); }

} // namespace

TEST_CASE("kernel values") {
    const Vector x = vec2(0.3, -1.2);
    CHECK(kernel_eval(kRbf1, x, x) == 1.0);
    CHECK(std::abs(kernel_eval({KernelKind::Rbf, 1e6}, x, vec2(5.0, 7.0)) - 1.0) <= 1e-6);
    CHECK(kernel_eval({KernelKind::Linear, 1.0}, vec2(1, 2), vec2(3, 4)) == 11.0);
    CHECK_THROWS_AS(kernel_eval(kRbf1, x, Vector::Zero(3)), Error);
    CHECK_THROWS_AS((KernelSpec{KernelKind::Rbf, 0.0}).validate(), Error);
    CHECK(kernel_eval({KernelKind::Rbf, 2.0}, vec2(0, 0), vec2(3, 4)) == doctest::Approx(std::exp(-25.0 / 8.0)));
}

TEST_CASE("kernel matrix and median distance match loops") {
    std::mt19937_64 rng(41);
    const Matrix x = oracle::normal(9, 3, rng);
    CHECK((kernel_matrix({KernelKind::Rbf, 0.7}, x) - oracle::rbf_gram(x, 0.7)).cwiseAbs().maxCoeff() <= 1e-14);
    std::vector<double> d;
    for (Eigen::Index i = 0; i < 9; ++i)
        for (Eigen::Index j = i + 1; j < 9; ++j) d.push_back((x.row(i) - x.row(j)).norm());
    std::sort(d.begin(), d.end());
    CHECK(median_pairwise_distance(x) == doctest::Approx(0.5 * (d[17] + d[18])));
}

TEST_CASE("two identical points split alpha evenly") {
    Matrix x(2, 2);
    x << 1, 1, 1, 1;
    for (double nu : {0.5, 0.9}) {
        const OcsvmModel m = train_batch(x, nu, kRbf1);
        CHECK(m.alpha(0) == doctest::Approx(0.5));
        CHECK(m.alpha(1) == doctest::Approx(0.5));
    }
}

TEST_CASE("nu-property on 20 normal points") {
    std::mt19937_64 rng(42);
    const Matrix x = oracle::normal(20, 2, rng);
    const OcsvmModel m = train_batch(x, 0.3, kRbf1);
    const KktPartition p = kkt_partition(m, 1e-6);
    CHECK(p.E.size() <= 6);
    CHECK(p.S.size() + p.E.size() >= 6);
}

TEST_CASE("batch training matches the projected-gradient dual oracle") {
    std::mt19937_64 rng(43);
    for (int rep = 0; rep < 5; ++rep) {
        const Eigen::Index n = 20 + 10 * rep;
        const double nu = 0.1 + 0.08 * rep;
        const Matrix x = oracle::normal(n, 2, rng);
        const Matrix K = oracle::rbf_gram(x, 1.0);
        const double cap = 1.0 / (nu * static_cast<double>(n));
        const Vector ref = oracle::dual_qp(K, cap);
        const OcsvmModel m = train_batch(x, nu, kRbf1);
        CHECK((m.alpha - ref).cwiseAbs().maxCoeff() <= 1e-5);
        CHECK(std::abs(objective(K, m.alpha) - objective(K, ref)) <= 1e-6);
        CHECK(std::abs(m.alpha.sum() - 1.0) <= 1e-10);

        const double rho = oracle::dual_rho(K, ref, cap);
        for (int probe = 0; probe < 10; ++probe) {
            const Vector z = oracle::normal(2, 1, rng);
            double g = -rho;
            for (Eigen::Index j = 0; j < n; ++j)
                g += ref(j) * std::exp(-(z - x.row(j).transpose()).squaredNorm() / 2.0);
            CHECK(std::abs(decision_value(m, z) - g) <= 1e-6);
        }
    }
}

TEST_CASE("three collinear points with a linear kernel") {
    Matrix x(3, 2);
    x << 1, 1, 2, 2, 3, 3;
    const KernelSpec lin{KernelKind::Linear, 1.0};
    const OcsvmModel m = train_batch(x, 0.5, lin);
    // Oracle on the capped simplex, then frozen: alpha = (2/3, 1/3, 0), rho = 16/3.
    const Vector ref = oracle::dual_qp(x * x.transpose(), 2.0 / 3.0);
    CHECK((m.alpha - ref).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(m.alpha(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
    CHECK(m.alpha(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    CHECK(std::abs(m.alpha(2)) <= 1e-9);
    CHECK(m.rho == doctest::Approx(16.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("nu times n below one is rejected") {
    std::mt19937_64 rng(44);
    const Matrix x = oracle::normal(10, 2, rng);
    try {
        train_batch(x, 0.05, kRbf1);
        FAIL("expected nu-too-small");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NuTooSmall);
    }
    CHECK_THROWS_AS(train_batch(x.topRows(1), 0.5, kRbf1), Error);
    CHECK_THROWS_AS(train_batch(x, 1.0, kRbf1), Error);
}

TEST_CASE("decision values at support vectors and far away") {
    std::mt19937_64 rng(45);
    const Matrix x = oracle::normal(30, 2, rng);
    const OcsvmModel m = train_batch(x, 0.2, kRbf1);
    REQUIRE(!m.support().empty());
    for (std::size_t s : m.support())
        CHECK(std::abs(decision_value(m, x.row(static_cast<Eigen::Index>(s)).transpose())) <= 1e-6);
    const Vector far = vec2(100.0, 0.0);
    CHECK(std::abs(decision_value(m, far) + m.rho) <= 1e-6);
    REQUIRE(m.rho > 0.0);
    CHECK(classify(m, far) == -1);
}

TEST_CASE("classify a tight cluster centroid and the zero tie") {
    std::mt19937_64 rng(46);
    const Matrix x = 0.05 * oracle::normal(40, 2, rng);
    const OcsvmModel m = train_batch(x, 0.1, kRbf1);
    CHECK(classify(m, x.colwise().mean().transpose()) == 1);

    Matrix y(2, 2);
    y << 1, 0, 0, 1;
    OcsvmModel lin = train_batch(y, 0.5, {KernelKind::Linear, 1.0});
    lin.rho = 0.0;
    CHECK(decision_value(lin, Vector::Zero(2)) == 0.0);
    CHECK(classify(lin, Vector::Zero(2)) == 1);
}

TEST_CASE("kkt_partition on trained and broken models") {
    std::mt19937_64 rng(47);
    const Matrix x = oracle::normal(25, 2, rng);
    OcsvmModel m = train_batch(x, 0.25, kRbf1);
    const KktPartition p = kkt_partition(m, 1e-6);
    CHECK(p.S.size() + p.E.size() + p.R.size() == 25);
    REQUIRE(!p.S.empty());

    OcsvmModel broken = m;
    broken.alpha(static_cast<Eigen::Index>(p.S.front())) = 0.0;
    try {
        kkt_partition(broken, 1e-6);
        FAIL("expected kkt-violation");
    } catch (const KktViolation& e) {
        CHECK(e.code() == ErrorCode::KktViolation);
        CHECK(e.amount() > 1e-6);
    }
}

TEST_CASE("all alphas at the bound give an empty margin set") {
    std::mt19937_64 rng(48);
    OcsvmModel m;
    m.train_x = oracle::normal(6, 2, rng);
    m.kernel = kRbf1;
    m.gram = kernel_matrix(m.kernel, m.train_x);
    m.alpha = Vector::Constant(6, 1.0 / 6.0);
    m.c_bound = 1.0 / 6.0;
    m.rho = (m.gram * m.alpha).maxCoeff();
    const KktPartition p = kkt_partition(m, 1e-6);
    CHECK(p.S.empty());
    CHECK(p.E.size() == 6);
    CHECK(p.R.empty());
}

TEST_CASE("nu equal to 1/n trains a valid model") {
    std::mt19937_64 rng(49);
    const Matrix x = oracle::normal(10, 2, rng);
    const OcsvmModel m = train_batch(x, 0.1, kRbf1);
    CHECK(m.c_bound == doctest::Approx(1.0));
    CHECK_NOTHROW(kkt_partition(m, 1e-6));
}

TEST_CASE("nu-property over random datasets") {
    std::mt19937_64 rng(50);
    std::uniform_int_distribution<int> nd(20, 60);
    std::uniform_real_distribution<double> nud(0.05, 0.5);
    for (int rep = 0; rep < 15; ++rep) {
        const int n = nd(rng);
        const double nu = nud(rng);
        if (nu * n < 1.0) continue;
        const Matrix x = oracle::normal(n, 2, rng);
        const OcsvmModel m = train_batch(x, nu, kRbf1);
        const KktPartition p = kkt_partition(m, 1e-6);
        const Vector g = m.training_decisions();
        // Margin vectors sit at g = 0 up to solver rounding; count g below the KKT tolerance.
        const double negative = static_cast<double>((g.array() < -1e-6).count()) / n;
        CHECK(negative <= nu + 2.0 / n);
        CHECK(static_cast<double>(p.E.size()) / n <= nu + 1e-12);
    }
}

TEST_CASE("RBF decision values are Lipschitz") {
    std::mt19937_64 rng(51);
    const Matrix x = oracle::normal(30, 2, rng);
    const double sigma = 0.8;
    const OcsvmModel m = train_batch(x, 0.2, {KernelKind::Rbf, sigma});
    const double L = m.alpha.sum() / (sigma * std::sqrt(std::exp(1.0)));
    for (int rep = 0; rep < 200; ++rep) {
        const Vector a = 2.0 * oracle::normal(2, 1, rng), b = a + 0.3 * oracle::normal(2, 1, rng);
        CHECK(std::abs(decision_value(m, a) - decision_value(m, b)) <= L * (a - b).norm() + 1e-12);
    }
}

TEST_CASE("hex doubles and model JSON round trip exactly") {
    for (double v : {0.0, -0.0, 1.0 / 3.0, 1e-300, -123456.789, 5e-324})
        CHECK(std::bit_cast<std::uint64_t>(parse_hex_double(hex_double(v))) == std::bit_cast<std::uint64_t>(v));

    std::mt19937_64 rng(52);
    const Matrix x = oracle::normal(15, 3, rng);
    const OcsvmModel m = train_batch(x, 0.3, {KernelKind::Rbf, 1.3});
    const OcsvmModel back = model_from_json(model_to_json(m));
    CHECK(back.alpha == m.alpha);
    CHECK(back.rho == m.rho);
    CHECK(back.train_x == m.train_x);
    CHECK(back.nu == m.nu);
    CHECK(back.kernel.sigma == m.kernel.sigma);
    CHECK(back.support() == m.support());

    const auto path = std::filesystem::temp_directory_path() / "ocpd_model_test.json";
    save_model(m, path);
    const OcsvmModel loaded = load_model(path);
    std::filesystem::remove(path);
    for (Eigen::Index i = 0; i < 15; ++i) {
        const Vector xi = x.row(i).transpose();
        CHECK(decision_value(loaded, xi) == decision_value(m, xi));
    }
}
