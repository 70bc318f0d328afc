#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <json.hpp>
#include <string>
#include <vector>

#include "pocaii/objective.hpp"
#include "pocaii/subprocess_runner.hpp"

using namespace pocaii;

namespace {

Configuration ref_config(double l1, double l2, double choice, long long id = 0) {
    Configuration c;
    c.id = id;
    c.values = {l1, l2, choice};
    return c;
}

BenchmarkSpec noise_free_spec() {
    BenchmarkSpec s;
    s.noise_free = true;
    return s;
}

EvaluationRequest window(long long id, Configuration c, long long start, long long end,
                         int interval, std::string checkpoint = {}) {
    EvaluationRequest r;
    r.config_id = id;
    r.config = std::move(c);
    r.start = start;
    r.end = end;
    r.interval = interval;
    r.checkpoint = std::move(checkpoint);
    return r;
}

}  // namespace

TEST_CASE("synthetic benchmark surface") {
    auto space = reference_benchmark_space();
    auto spec = noise_free_spec();
    const auto best = ref_config(0.7, 0.2, 0.0);

    SUBCASE("the peak saturates at its asymptote") {
        CHECK(synthetic_asymptote(spec, space, best) == doctest::Approx(0.95));
        CHECK(synthetic_score(spec, space, best, 100000) == doctest::Approx(0.95).epsilon(1e-9));
    }

    SUBCASE("one time-constant of training reaches 1 - 1/e of the asymptote") {
        // lambda2 = 0.2 puts the time constant at 5 + 20*0.2 = 9
        CHECK(synthetic_score(spec, space, best, 9) == doctest::Approx(0.6005146).epsilon(1e-6));
    }

    SUBCASE("categorical penalty shifts the whole curve down") {
        const auto worst_choice = ref_config(0.7, 0.2, 2.0);
        CHECK(synthetic_asymptote(spec, space, worst_choice) == doctest::Approx(0.85));
        CHECK(synthetic_score(spec, space, worst_choice, 100000) ==
              doctest::Approx(0.85).epsilon(1e-9));
    }

    SUBCASE("noise-free curves rise strictly and stay under the asymptote") {
        const auto c = ref_config(0.3, 0.8, 1.0);
        const double a = synthetic_asymptote(spec, space, c);
        double prev = 0.0;
        for (long long b = 1; b <= 120; ++b) {
            const double s = synthetic_score(spec, space, c, b);
            CHECK(s > prev);
            CHECK(s < a);
            prev = s;
        }
    }

    SUBCASE("grid search finds no better asymptote than the designed peak") {
        double best_a = 0.0;
        double at_l1 = -1.0, at_l2 = -1.0, at_c = -1.0;
        for (int i = 0; i < 50; ++i)
            for (int j = 0; j < 50; ++j)
                for (int k = 0; k < 3; ++k) {
                    const double l1 = i / 49.0, l2 = j / 49.0;
                    const double a =
                        synthetic_asymptote(spec, space, ref_config(l1, l2, k));
                    if (a > best_a) {
                        best_a = a;
                        at_l1 = l1;
                        at_l2 = l2;
                        at_c = k;
                    }
                }
        CHECK(best_a <= 0.95 + 1e-12);
        CHECK(at_c == 0.0);
        CHECK(std::abs(at_l1 - 0.7) < 0.02);  // nearest grid line to the peak
        CHECK(std::abs(at_l2 - 0.2) < 0.02);
    }
}

TEST_CASE("measurement noise is deterministic per configuration and budget") {
    auto space = reference_benchmark_space();
    BenchmarkSpec spec;
    spec.seed = 42;
    const auto c = ref_config(0.5, 0.5, 0.0, 7);

    CHECK(synthetic_score(spec, space, c, 10) == synthetic_score(spec, space, c, 10));
    CHECK(synthetic_score(spec, space, c, 10) != synthetic_score(spec, space, c, 15));

    auto other_id = ref_config(0.5, 0.5, 0.0, 8);
    CHECK(synthetic_score(spec, space, c, 10) != synthetic_score(spec, space, other_id, 10));

    BenchmarkSpec reseeded = spec;
    reseeded.seed = 43;
    CHECK(synthetic_score(spec, space, c, 10) != synthetic_score(reseeded, space, c, 10));
}

TEST_CASE("in-process runner windows and resume") {
    auto space = reference_benchmark_space();

    SUBCASE("one measurement per interval step") {
        SyntheticRunner runner(noise_free_spec(), space);
        auto out = runner.evaluate(window(0, ref_config(0.7, 0.2, 0.0), 0, 5, 1));
        REQUIRE(out.ok);
        REQUIRE(out.batch.measurements.size() == 5);
        for (int i = 0; i < 5; ++i) CHECK(out.batch.measurements[i].budget == i + 1);
        CHECK(out.batch.checkpoint == "b5");
    }

    SUBCASE("a resumed curve equals a fresh curve to the same budget") {
        for (bool noisy : {false, true}) {
            BenchmarkSpec spec;
            spec.noise_free = !noisy;
            spec.seed = 11;
            SyntheticRunner runner(spec, space);
            const auto c = ref_config(0.4, 0.6, 1.0, 3);

            auto first = runner.evaluate(window(3, c, 0, 5, 1));
            REQUIRE(first.ok);
            auto second = runner.evaluate(window(3, c, 5, 10, 1, first.batch.checkpoint));
            REQUIRE(second.ok);
            auto whole = runner.evaluate(window(3, c, 0, 10, 1));
            REQUIRE(whole.ok);

            for (int i = 0; i < 5; ++i) {
                CHECK(first.batch.measurements[i].score == whole.batch.measurements[i].score);
                CHECK(second.batch.measurements[i].score == whole.batch.measurements[i + 5].score);
            }
        }
    }

    SUBCASE("invalid windows fail instead of mis-measuring") {
        SyntheticRunner runner(noise_free_spec(), space);
        CHECK_FALSE(runner.evaluate(window(0, ref_config(0.7, 0.2, 0.0), 0, 7, 2)).ok);
        CHECK_FALSE(runner.evaluate(window(0, ref_config(0.7, 0.2, 0.0), 5, 5, 1)).ok);
        CHECK_FALSE(runner.evaluate(window(0, ref_config(2.0, 0.2, 0.0), 0, 5, 1)).ok);
    }
}

TEST_CASE("wire protocol encoding and decoding") {
    auto space = reference_benchmark_space();
    const auto req = window(12, ref_config(0.25, 0.75, 1.0, 12), 10, 25, 5, "b10");

    SUBCASE("requests serialize with named parameters") {
        auto j = nlohmann::json::parse(encode_request(req, space));
        CHECK(j["id"] == 12);
        CHECK(j["start"] == 10);
        CHECK(j["end"] == 25);
        CHECK(j["interval"] == 5);
        CHECK(j["checkpoint"] == "b10");
        CHECK(j["params"]["lambda1"] == doctest::Approx(0.25));
        CHECK(j["params"]["lambda2"] == doctest::Approx(0.75));
        CHECK(j["params"]["choice"] == "B");
    }

    SUBCASE("a well-formed response round-trips") {
        nlohmann::json resp = {
            {"id", 12},
            {"measurements", {{15, 0.41}, {20, 0.52}, {25, 0.6}}},
            {"checkpoint", "b25"},
        };
        auto out = decode_response(resp.dump(), req);
        REQUIRE(out.ok);
        REQUIRE(out.batch.measurements.size() == 3);
        CHECK(out.batch.measurements[1].budget == 20);
        CHECK(out.batch.measurements[1].score == doctest::Approx(0.52));
        CHECK(out.batch.checkpoint == "b25");
    }

    SUBCASE("missing budget steps are rejected") {
        nlohmann::json resp = {
            {"id", 12},
            {"measurements", {{15, 0.41}, {25, 0.6}}},
            {"checkpoint", "b25"},
        };
        auto out = decode_response(resp.dump(), req);
        CHECK_FALSE(out.ok);
        CHECK(out.diagnostic.find("expected") != std::string::npos);

        nlohmann::json skewed = {
            {"id", 12},
            {"measurements", {{15, 0.41}, {21, 0.52}, {25, 0.6}}},
            {"checkpoint", "b25"},
        };
        auto out2 = decode_response(skewed.dump(), req);
        CHECK_FALSE(out2.ok);
        CHECK(out2.diagnostic.find("grid mismatch") != std::string::npos);
    }

    SUBCASE("non-finite scores are rejected") {
        const std::string line =
            R"({"id": 12, "measurements": [[15, 0.4], [20, NaN], [25, 0.6]], "checkpoint": "x"})";
        CHECK_FALSE(decode_response(line, req).ok);
    }

    SUBCASE("worker-reported errors and wrong ids become failures") {
        auto err = decode_response(R"({"id": 12, "error": "cuda out of memory"})", req);
        CHECK_FALSE(err.ok);
        CHECK(err.diagnostic.find("cuda out of memory") != std::string::npos);

        auto wrong = decode_response(R"({"id": 13, "measurements": []})", req);
        CHECK_FALSE(wrong.ok);
        CHECK(wrong.diagnostic.find("does not match") != std::string::npos);

        CHECK_FALSE(decode_response("not json at all", req).ok);
    }
}

TEST_CASE("subprocess runner drives a line-protocol worker") {
    auto space = reference_benchmark_space();
    const std::string worker = std::string("python3 ") + WORKER_SCRIPT;

    SUBCASE("measurements arrive on the requested grid and are deterministic") {
        SubprocessRunner runner(worker, space);
        const auto c = ref_config(0.3, 0.4, 0.0, 5);
        auto out = runner.evaluate(window(5, c, 0, 6, 2));
        REQUIRE_MESSAGE(out.ok, out.diagnostic);
        REQUIRE(out.batch.measurements.size() == 3);
        CHECK(out.batch.measurements[0].budget == 2);
        CHECK(out.batch.measurements[2].budget == 6);

        SubprocessRunner again(worker, space);
        auto repeat = again.evaluate(window(5, c, 0, 6, 2));
        REQUIRE(repeat.ok);
        for (int i = 0; i < 3; ++i)
            CHECK(repeat.batch.measurements[i].score == out.batch.measurements[i].score);
    }

    SUBCASE("resume continues the same curve") {
        SubprocessRunner runner(worker, space);
        const auto c = ref_config(0.6, 0.1, 2.0, 9);
        auto first = runner.evaluate(window(9, c, 0, 4, 2));
        REQUIRE_MESSAGE(first.ok, first.diagnostic);
        auto second = runner.evaluate(window(9, c, 4, 8, 2, first.batch.checkpoint));
        REQUIRE(second.ok);
        auto whole = runner.evaluate(window(9, c, 0, 8, 2));
        REQUIRE(whole.ok);
        CHECK(second.batch.measurements[0].score == whole.batch.measurements[2].score);
        CHECK(second.batch.measurements[1].score == whole.batch.measurements[3].score);
    }

    SUBCASE("a crashing worker surfaces its exit code") {
        SubprocessRunner runner("exit 3", space);
        auto out = runner.evaluate(window(0, ref_config(0.5, 0.5, 0.0), 0, 2, 1));
        CHECK_FALSE(out.ok);
        CHECK(out.diagnostic.find("exited with code 3") != std::string::npos);
    }

    SUBCASE("garbage output is a failure, not a wrong measurement") {
        SubprocessRunner runner("while read line; do echo not-json; done", space);
        auto out = runner.evaluate(window(0, ref_config(0.5, 0.5, 0.0), 0, 2, 1));
        CHECK_FALSE(out.ok);
        CHECK(out.diagnostic.find("malformed") != std::string::npos);
    }

    SUBCASE("a hung worker times out") {
        SubprocessRunner runner("sleep 30", space, /*timeout_ms=*/300);
        auto out = runner.evaluate(window(0, ref_config(0.5, 0.5, 0.0), 0, 2, 1));
        CHECK_FALSE(out.ok);
        CHECK(out.diagnostic.find("timed out") != std::string::npos);
    }
}
