#include "doctest.h"
#include "helpers.hpp"

using namespace gmmtune;
using testutil::example_system;

TEST_CASE("validate_system on the worked example") {
    const auto rep = validate_system(example_system());
    CHECK(rep.stable);
    // eigenvalues of F - LC solve l^2 - 0.9 l + 0.1675 = 0
    const double expected = (0.9 + std::sqrt(0.81 - 4 * 0.1675)) / 2.0;
    CHECK(rep.spectral_radius == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("validate_system trivial pass and fail") {
    const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(3, 3);
    LtiSystem zero_sys(Z, Eigen::MatrixXd::Zero(3, 1), Eigen::MatrixXd::Ones(1, 3),
                       Eigen::MatrixXd::Zero(3, 1));
    CHECK(validate_system(zero_sys).spectral_radius == 0.0);
    CHECK(validate_system(zero_sys).stable);

    LtiSystem unstable(2.0 * Eigen::MatrixXd::Identity(1, 1),
                       Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Ones(1, 1),
                       Eigen::MatrixXd::Zero(1, 1));
    const auto rep = validate_system(unstable);
    CHECK(rep.spectral_radius == doctest::Approx(2.0));
    CHECK_FALSE(rep.stable);
    CHECK_THROWS_WITH_AS(require_stable(unstable),
                         doctest::Contains("eigenvalue"), std::runtime_error);
}

TEST_CASE("LtiSystem rejects inconsistent dimensions") {
    CHECK_THROWS_AS(LtiSystem(Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(2, 1),
                              Eigen::MatrixXd::Zero(1, 2), Eigen::MatrixXd::Zero(2, 1)),
                    std::invalid_argument);
    CHECK_THROWS_AS(LtiSystem(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 1),
                              Eigen::MatrixXd::Zero(1, 3), Eigen::MatrixXd::Zero(2, 1)),
                    std::invalid_argument);
}

TEST_CASE("residual_weights definitions") {
    const LtiSystem sys = example_system();

    SUBCASE("k = 1 is the identity alone") {
        const auto w = residual_weights(sys, 1);
        REQUIRE(w.A.size() == 1);
        CHECK(w.B.empty());
        CHECK(w.A[0].isIdentity(0.0));
    }

    SUBCASE("k = 0 rejected") {
        CHECK_THROWS_AS(residual_weights(sys, 0), std::domain_error);
    }

    SUBCASE("k = 2 matches the direct products") {
        const auto w = residual_weights(sys, 2);
        CHECK((w.A[1] - (-sys.C * sys.L)).norm() == doctest::Approx(0.0));
        CHECK((w.B[0] - sys.C).norm() == doctest::Approx(0.0));
    }

    SUBCASE("L = 0 kills every A beyond the first") {
        LtiSystem open(sys.F, sys.G, sys.C, Eigen::MatrixXd::Zero(2, 1));
        const auto w = residual_weights(open, 3);
        CHECK(w.A[1].norm() == 0.0);
        CHECK(w.A[2].norm() == 0.0);
        CHECK((w.B[0] - open.C).norm() == doctest::Approx(0.0));
        CHECK((w.B[1] - open.C * open.F).norm() == doctest::Approx(0.0).epsilon(1e-15));
    }

    SUBCASE("prefix consistency: weights(k) truncates to weights(k-1)") {
        const auto w5 = residual_weights(sys, 5);
        const auto w4 = residual_weights(sys, 4);
        for (std::size_t i = 0; i < w4.A.size(); ++i)
            CHECK((w5.A[i] - w4.A[i]).norm() == 0.0);
        for (std::size_t i = 0; i < w4.B.size(); ++i)
            CHECK((w5.B[i] - w4.B[i]).norm() == 0.0);
    }

    SUBCASE("operator-norm bound on A_kappa over random stable systems") {
        std::mt19937_64 rng(7);
        for (int trial = 0; trial < 5; ++trial) {
            const LtiSystem rs = testutil::random_stable_system(3, 2, rng);
            const double normC = rs.C.norm();
            const double normL = rs.L.norm();
            const double rho_bar =
                Eigen::JacobiSVD<Eigen::MatrixXd>(rs.observer_matrix())
                    .singularValues()(0);
            const auto w = residual_weights(rs, 8);
            for (std::size_t kappa = 2; kappa <= w.A.size(); ++kappa) {
                const double bound =
                    normC * normL * std::pow(rho_bar, double(kappa) - 2.0) + 1e-12;
                CHECK(w.A[kappa - 1].norm() <= bound * 1.0001);
            }
        }
    }
}

TEST_CASE("settling_horizon") {
    SUBCASE("F - LC = 0 settles at k = 2") {
        Eigen::MatrixXd C(1, 2);
        C << 1.0, 0.0;
        LtiSystem sys(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 1), C,
                      Eigen::MatrixXd::Zero(2, 1));
        CHECK(settling_horizon(sys, 1e-6) == 2);
    }

    SUBCASE("scalar a = 0.5, C = L = 1, tol 1e-3") {
        LtiSystem sys(1.5 * Eigen::MatrixXd::Identity(1, 1),
                      Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Identity(1, 1),
                      Eigen::MatrixXd::Identity(1, 1));
        // F - LC = 0.5; smallest k with 0.5^{k-1} < 1e-3 is k = 11
        // (0.5^10 = 9.77e-4)
        CHECK(settling_horizon(sys, 1e-3) == 11);
    }

    SUBCASE("worked example admits k* = 10") {
        // rho ~ 0.637: pick a tolerance between the k=10 and k=11 tail norms
        const LtiSystem sys = example_system();
        const double factor =
            std::max(1.0, Eigen::JacobiSVD<Eigen::MatrixXd>(sys.L).singularValues()(0)) *
            Eigen::JacobiSVD<Eigen::MatrixXd>(sys.C).singularValues()(0);
        Eigen::MatrixXd p9 = Eigen::MatrixXd::Identity(2, 2);
        for (int i = 0; i < 9; ++i) p9 = p9 * sys.observer_matrix();
        const double norm10 =
            Eigen::JacobiSVD<Eigen::MatrixXd>(p9).singularValues()(0) * factor;
        const double tol = norm10 * 0.999; // fails at k=10's predecessor norm
        const int k = settling_horizon(sys, tol);
        CHECK(k == 11); // tol just below the k=10 tail puts the horizon at 11
        CHECK(settling_horizon(sys, norm10 * 1.001) == 10);
    }

    SUBCASE("rejects bad tolerance and unstable systems") {
        CHECK_THROWS_AS(settling_horizon(example_system(), 0.0), std::domain_error);
        LtiSystem unstable(2.0 * Eigen::MatrixXd::Identity(1, 1),
                           Eigen::MatrixXd::Zero(1, 1),
                           Eigen::MatrixXd::Identity(1, 1),
                           Eigen::MatrixXd::Zero(1, 1));
        CHECK_THROWS_AS(settling_horizon(unstable, 1e-6), std::runtime_error);
    }
}

TEST_CASE("lyapunov_residual_cov") {
    SUBCASE("F - LC = 0 gives P = R1 + L R2 L^T") {
        Eigen::MatrixXd C(1, 2);
        C << 1.0, -1.0;
        LtiSystem sys(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 1), C,
                      Eigen::MatrixXd::Zero(2, 1));
        std::mt19937_64 rng(3);
        const Eigen::MatrixXd R1 = testutil::random_spd(2, rng);
        const Eigen::MatrixXd R2 = testutil::random_spd(1, rng);
        const auto res = lyapunov_residual_cov(sys, R1, R2);
        CHECK((res.P - (R1 + sys.L * R2 * sys.L.transpose())).norm() <
              1e-12 * R1.norm());
    }

    SUBCASE("scalar fixed point p = a^2 p + r") {
        // F = 1, L = 1, C = 0.5 -> a = F - LC = 0.5; R1 = 0, R2 = 1
        LtiSystem sys(Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Zero(1, 1),
                      0.5 * Eigen::MatrixXd::Identity(1, 1),
                      Eigen::MatrixXd::Identity(1, 1));
        const auto res = lyapunov_residual_cov(sys, Eigen::MatrixXd::Zero(1, 1),
                                               Eigen::MatrixXd::Identity(1, 1));
        CHECK(res.P(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-10));
    }

    SUBCASE("residual of the Lyapunov equation is tiny") {
        std::mt19937_64 rng(11);
        for (int trial = 0; trial < 5; ++trial) {
            const LtiSystem sys = testutil::random_stable_system(4, 2, rng);
            const Eigen::MatrixXd R1 = testutil::random_spd(4, rng);
            const Eigen::MatrixXd R2 = testutil::random_spd(2, rng);
            const auto res = lyapunov_residual_cov(sys, R1, R2);
            const Eigen::MatrixXd Fo = sys.observer_matrix();
            const Eigen::MatrixXd resid = Fo * res.P * Fo.transpose() - res.P + R1 +
                                          sys.L * R2 * sys.L.transpose();
            CHECK(resid.norm() <= 1e-10 * res.P.norm());
        }
    }

    SUBCASE("instability is an error") {
        LtiSystem unstable(2.0 * Eigen::MatrixXd::Identity(1, 1),
                           Eigen::MatrixXd::Zero(1, 1),
                           Eigen::MatrixXd::Identity(1, 1),
                           Eigen::MatrixXd::Zero(1, 1));
        CHECK_THROWS_AS(lyapunov_residual_cov(unstable, Eigen::MatrixXd::Zero(1, 1),
                                              Eigen::MatrixXd::Identity(1, 1)),
                        std::runtime_error);
    }
}

TEST_CASE("simulate") {
    const LtiSystem sys = example_system();
    const auto zero_v = [](std::mt19937_64&) { return Eigen::VectorXd::Zero(2); };
    const auto zero_eta = [](std::mt19937_64&) { return Eigen::VectorXd::Zero(1); };

    SUBCASE("noiseless perfect estimator keeps the residual at zero") {
        const SimTrace t = simulate(sys, zero_v, zero_eta, {}, 50, 1);
        for (const auto& r : t.residuals) CHECK(r.norm() == 0.0);
    }

    SUBCASE("residual identity r = y - C xhat holds on every step") {
        const auto gv = [](std::mt19937_64& rng) {
            std::normal_distribution<double> g(0.0, 1.0);
            return Eigen::VectorXd{Eigen::Vector2d(g(rng), g(rng))};
        };
        const auto ge = [](std::mt19937_64& rng) {
            std::normal_distribution<double> g(0.0, 1.0);
            Eigen::VectorXd v(1);
            v << g(rng);
            return v;
        };
        const SimTrace t = simulate(sys, gv, ge, {}, 200, 42);
        for (std::size_t k = 0; k < t.residuals.size(); ++k)
            CHECK((t.residuals[k] - (t.outputs[k] - sys.C * t.estimates[k])).norm() ==
                  0.0);
    }

    SUBCASE("same seed gives bit-identical traces") {
        const auto ge = [](std::mt19937_64& rng) {
            std::normal_distribution<double> g(0.0, 1.0);
            Eigen::VectorXd v(1);
            v << g(rng);
            return v;
        };
        const SimTrace a = simulate(sys, zero_v, ge, {}, 100, 99);
        const SimTrace b = simulate(sys, zero_v, ge, {}, 100, 99);
        for (std::size_t k = 0; k < a.residuals.size(); ++k)
            CHECK(a.residuals[k] == b.residuals[k]);
    }

    SUBCASE("residual is invariant to the input sequence") {
        Eigen::MatrixXd G(2, 1);
        G << 1.0, 0.5;
        LtiSystem driven(sys.F, G, sys.C, sys.L);
        const auto ge = [](std::mt19937_64& rng) {
            std::normal_distribution<double> g(0.0, 1.0);
            Eigen::VectorXd v(1);
            v << g(rng);
            return v;
        };
        std::vector<Eigen::VectorXd> u1, u2;
        for (int k = 0; k < 100; ++k) {
            Eigen::VectorXd a(1), b(1);
            a << std::sin(0.1 * k);
            b << 3.0 * std::cos(0.2 * k);
            u1.push_back(a);
            u2.push_back(b);
        }
        const SimTrace t1 = simulate(driven, zero_v, ge, u1, 100, 7);
        const SimTrace t2 = simulate(driven, zero_v, ge, u2, 100, 7);
        for (std::size_t k = 0; k < t1.residuals.size(); ++k)
            CHECK((t1.residuals[k] - t2.residuals[k]).norm() < 1e-12);
    }

    SUBCASE("empirical residual covariance approaches the Lyapunov value") {
        const Eigen::MatrixXd R2 = Eigen::MatrixXd::Identity(1, 1);
        const auto res =
            lyapunov_residual_cov(sys, Eigen::MatrixXd::Zero(2, 2), R2);
        const auto ge = [](std::mt19937_64& rng) {
            std::normal_distribution<double> g(0.0, 1.0);
            Eigen::VectorXd v(1);
            v << g(rng);
            return v;
        };
        const int steps = 200000;
        const SimTrace t = simulate(sys, zero_v, ge, {}, steps, 5);
        double acc = 0.0;
        int used = 0;
        for (int k = 100; k < steps; ++k) {
            acc += t.residuals[k](0) * t.residuals[k](0);
            ++used;
        }
        const double emp = acc / used;
        CHECK(emp == doctest::Approx(res.Sigma(0, 0)).epsilon(0.02));
    }

    SUBCASE("sampler dimension mismatch is an error") {
        const auto bad_eta = [](std::mt19937_64&) { return Eigen::VectorXd::Zero(3); };
        CHECK_THROWS_AS(simulate(sys, zero_v, bad_eta, {}, 10, 1),
                        std::invalid_argument);
    }
}
