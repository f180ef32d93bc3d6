#include "bdr/config.hpp"
#include "bdr/errors.hpp"
#include "bdr/manifest.hpp"
#include "bdr/matrix_io.hpp"
#include "bdr/parallel.hpp"
#include "bdr/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

TEST_SUITE("infra") {

TEST_CASE("random streams are reproducible and substreams differ") {
    bdr::RandomStream a(42, 7), b(42, 7), c(42, 8);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    bool any_diff = false;
    bdr::RandomStream a2(42, 7);
    for (int i = 0; i < 100; ++i) any_diff |= (a2.next_u64() != c.next_u64());
    CHECK(any_diff);
}

TEST_CASE("normal variates have sane moments") {
    bdr::RandomStream rng(1);
    const int n = 200000;
    double sum = 0, sum_sq = 0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sum_sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sum_sq / n - 1.0) < 0.02);
}

TEST_CASE("uniform stays inside the open interval") {
    bdr::RandomStream rng(3);
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("tree reduce is bit-stable across thread counts") {
    auto run = [&](int threads) {
        bdr::set_num_threads(threads);
        return bdr::tree_reduce<double>(
            10001, 0.0,
            [](std::size_t i) {
                bdr::RandomStream rng(9, i);
                return rng.normal() * 1e-3 + std::sin(static_cast<double>(i));
            },
            [](double a, double b) { return a + b; });
    };
    const double one = run(1);
    const double two = run(2);
    const double four = run(4);
    bdr::set_num_threads(0);
    CHECK(one == two);
    CHECK(one == four);
}

TEST_CASE("csv round trip with header and comments") {
    const auto dir = std::filesystem::temp_directory_path() / "bdr_io_test";
    std::filesystem::create_directories(dir);
    Eigen::MatrixXd m(2, 3);
    m << 1.5, -2.25, 3.125, 1e-17, 4e8, -0.0;
    bdr::save_csv(dir / "m.csv", m, {"a", "b", "c"}, {"comment line"});
    const Eigen::MatrixXd back = bdr::load_csv(dir / "m.csv");
    CHECK(back.rows() == 2);
    CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bdr1 binary round trip and dispatch") {
    const auto dir = std::filesystem::temp_directory_path() / "bdr_io_test";
    std::filesystem::create_directories(dir);
    bdr::RandomStream rng(5);
    const Eigen::MatrixXd m = rng.normal_matrix(7, 4);
    bdr::save_bdr1(dir / "m.bin", m);
    CHECK((bdr::load_bdr1(dir / "m.bin") - m).cwiseAbs().maxCoeff() == 0.0);
    CHECK((bdr::load_matrix(dir / "m.bin") - m).cwiseAbs().maxCoeff() == 0.0);
    bdr::save_csv(dir / "m2.csv", m);
    CHECK((bdr::load_matrix(dir / "m2.csv") - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("malformed csv is rejected") {
    const auto dir = std::filesystem::temp_directory_path() / "bdr_io_test";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "bad.csv") << "1,2\n3\n";
    CHECK_THROWS_AS(bdr::load_csv(dir / "bad.csv"), bdr::Error);
}

TEST_CASE("empty config yields full defaults") {
    const auto result = bdr::validate_config_text("");
    REQUIRE(result.ok());
    CHECK(result.config->get("problem.name") == "linear_gaussian");
    CHECK(result.config->get_int("problem.linear_gaussian.d") == 50);
    CHECK(result.config->get_real("problem.linear_gaussian.noise_lambda0") == 500.0);
    const std::string rendered = result.config->render();
    CHECK(rendered.find("name = linear_gaussian  # default") != std::string::npos);
}

TEST_CASE("negative n is a single error naming the field") {
    const auto result = bdr::validate_config_text("[diagnostics]\nn = -4\n");
    REQUIRE_FALSE(result.ok());
    REQUIRE(result.errors.size() == 1);
    CHECK(result.errors[0].message.find("diagnostics.n") != std::string::npos);
    CHECK(result.errors[0].line == 2);
}

TEST_CASE("zero tolerance is rejected with the select_dims message") {
    const auto result = bdr::validate_config_text("[select]\neps = 0\n");
    REQUIRE_FALSE(result.ok());
    CHECK(result.errors[0].message.find("select_dims requires eps' > 0") != std::string::npos);
}

TEST_CASE("unknown keys are rejected with line numbers") {
    const auto result = bdr::validate_config_text("[problem]\nname = image\nbogus = 1\n");
    REQUIRE_FALSE(result.ok());
    CHECK(result.errors[0].line == 3);
    CHECK(result.errors[0].message.find("unknown key") != std::string::npos);
}

TEST_CASE("config overrides record provenance") {
    const auto result = bdr::validate_config_text("[problem.linear_gaussian]\nd = 8\nm = 8\n");
    REQUIRE(result.ok());
    CHECK(result.config->provenance.at("problem.linear_gaussian.d") == "file line 2");
    CHECK(result.config->provenance.at("problem.image.grid") == "default");
}

TEST_CASE("manifest digests are stable") {
    bdr::RunManifest a("cmd", "cfg text", 7);
    bdr::RunManifest b("cmd", "cfg text", 7);
    bdr::RunManifest c("cmd", "cfg text", 8);
    CHECK(a.digest() == b.digest());
    CHECK(a.digest() != c.digest());
    CHECK(bdr::hex64(bdr::fnv1a64("")) == "cbf29ce484222325");
}

}  // TEST_SUITE
