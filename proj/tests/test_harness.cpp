#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "plar/config.hpp"
#include "plar/io.hpp"
#include "plar/prox.hpp"
#include "plar/rng.hpp"
#include "plar/sim.hpp"

using Catch::Approx;
using Catch::Matchers::ContainsSubstring;
using plar::ObservationSet;
using plar::RunConfig;

namespace {

std::string fresh_dir() {
    static int counter = 0;
    const std::filesystem::path dir =
        std::filesystem::temp_directory_path() /
        ("plar_harness_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return dir.string();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(PLAR_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

// Pulls the numeric value following "key": out of a flat JSON report.
double json_field(const std::string& text, const std::string& key) {
    const std::string needle = "\"" + key + "\": ";
    const std::size_t at = text.find(needle);
    REQUIRE(at != std::string::npos);
    return std::strtod(text.c_str() + at + needle.size(), nullptr);
}

std::vector<std::string> data_rows(const std::string& text) {
    std::vector<std::string> rows;
    for (const std::string& line : plar::detail::split(text, '\n'))
        if (!line.empty()) rows.push_back(line);
    rows.erase(rows.begin());  // header
    return rows;
}

}  // namespace

TEST_CASE("minimal config fills the documented defaults", "[harness]") {
    const RunConfig cfg = plar::parse_config("p=2\nq=1\nlambda=5\nmu=0.5\n");
    REQUIRE(cfg.hyper.p == 2);
    REQUIRE(cfg.hyper.q == 1);
    REQUIRE(cfg.hyper.lambda == 5.0);
    REQUIRE(cfg.hyper.mu == 0.5);
    REQUIRE(cfg.hyper.r == 0.5);
    REQUIRE(cfg.hyper.s == 1.0);
    REQUIRE(cfg.hyper.tau == 1e-4);
    REQUIRE(cfg.hyper.eps == 1e-6);
    REQUIRE(cfg.hyper.max_iters == 50000);
    REQUIRE(cfg.solver == plar::Solver::hybrid);
    REQUIRE(cfg.n == 0);
    REQUIRE(cfg.observed_fraction == 1.0);
    REQUIRE(cfg.contamination_fraction == 0.0);
    REQUIRE(cfg.outlier_value == 20.0);
    REQUIRE(cfg.runs == 1);
    REQUIRE(cfg.threads == 0);
    REQUIRE(cfg.seed == 1);
    REQUIRE(cfg.out == ".");
    REQUIRE(cfg.resolved_sim_seed() == 1);
    REQUIRE(cfg.resolved_corrupt_seed() == 1);
}

TEST_CASE("config accepts comments, blanks, and spacing", "[harness]") {
    const RunConfig cfg = plar::parse_config(
        "# run setup\n\n  p = 3   # lags\nq=0\nlambda = 2.5\nmu=0\n"
        "true_a = 0.1 , -0.2, 0.3\nsolver = palm\nseed = 42\nsim_seed = 7\n");
    REQUIRE(cfg.hyper.p == 3);
    REQUIRE(cfg.hyper.lambda == 2.5);
    REQUIRE(cfg.true_a == std::vector<double>{0.1, -0.2, 0.3});
    REQUIRE(cfg.solver == plar::Solver::palm);
    REQUIRE(cfg.resolved_sim_seed() == 7);
    REQUIRE(cfg.resolved_corrupt_seed() == 42);
}

TEST_CASE("config rejections carry the offending line", "[harness]") {
    const auto reject = [](const std::string& text, const std::string& what) {
        REQUIRE_THROWS_WITH(plar::parse_config(text), ContainsSubstring(what));
    };
    reject("p=1\nq=0\nlambda=1\nmu=0\nr=1.5\n", "line 5");
    reject("p=1\nq=0\nlambda=1\nmu=0\nr=1.5\n", "must be in (0, 1]");
    reject("p=1\nq=0\nlambda=0\nmu=0\n", "'lambda' must be > 0");
    reject("p=1\nq=0\nlambda=1\nmu=0\np=2\n", "duplicate key 'p' at lines 1 and 5");
    reject("p=1\nq=0\nlambda=1\nmu=0\nbogus=3\n", "unknown key 'bogus'");
    reject("p=\nq=0\nlambda=1\nmu=0\n", "empty value");
    reject("p 1\n", "expected key=value");
    reject("p=1\nq=0\nlambda=1\n", "required key 'mu' is missing");
    reject("p=2\nq=0\nlambda=1\nmu=0\ntrue_a=0.5\n", "true_a must have exactly p entries");
    reject("p=1\nq=0\nlambda=1\nmu=0\nsolver=sgd\n", "palm, fista, or hybrid");
    reject("p=1\nq=0\nlambda=1\nmu=0\nsim_seed=abc\n", "unsigned integer");
    reject("p=1\nq=0\nlambda=1\nmu=0\ntau=nope\n", "finite number");
    reject("p=1\nq=0\nlambda=1\nmu=0\nmax_iters=0\n", "[1, 1e9]");
}

TEST_CASE("formatted doubles round-trip exactly", "[harness]") {
    for (double x : {0.1, 1.0 / 3.0, 1e-300, 12345678901234567.0, -2.5e-8, 709.78, 0.0, 3.0}) {
        const std::string s = plar::format_g17(x);
        REQUIRE(std::strtod(s.c_str(), nullptr) == x);
    }
    REQUIRE(plar::format_g17(3.0) == "3");
    REQUIRE(plar::json_number(std::numeric_limits<double>::quiet_NaN()) == "null");
    REQUIRE(plar::json_number(std::numeric_limits<double>::infinity()) == "null");
}

TEST_CASE("json strings are escaped", "[harness]") {
    REQUIRE(plar::json_escape("plain") == "plain");
    REQUIRE(plar::json_escape("a\"b\\c\nd\te") == "a\\\"b\\\\c\\nd\\te");
    REQUIRE(plar::json_escape(std::string(1, '\x01')) == "\\u0001");
}

TEST_CASE("series files parse into observation sets", "[harness]") {
    const std::string dir = fresh_dir();
    const std::string path = dir + "/series.csv";

    SECTION("observed and missing rows") {
        plar::write_text_file(path, "t,y,observed\n1,3,1\n2,0.5,1\n3,,0\n4,junk,0\n");
        const ObservationSet obs = plar::read_series_csv(path);
        REQUIRE(obs.mask == std::vector<bool>{true, true, false, false});
        REQUIRE(obs.values == std::vector<double>{3.0, 0.5, 0.0, 0.0});
    }

    SECTION("rejections") {
        const auto reject = [&](const std::string& body, const std::string& what) {
            plar::write_text_file(path, body);
            REQUIRE_THROWS_WITH(plar::read_series_csv(path), ContainsSubstring(what));
        };
        reject("t,y,observed\n1,-2,1\n", "y must be >= 0");
        reject("t,y,observed\n1,2,1\n3,4,1\n", "t must be contiguous");
        reject("time,y,observed\n1,2,1\n", "expected header");
        reject("t,y,observed\n1,2\n", "expected 3 fields");
        reject("t,y,observed\n1,2,2\n", "observed must be 0 or 1");
        reject("t,y,observed\n1,,1\n", "observed row needs a finite y value");
        reject("t,y,observed\n", "no data rows");
        REQUIRE_THROWS_WITH(plar::read_series_csv(dir + "/absent.csv"),
                            ContainsSubstring("cannot open"));
    }
}

TEST_CASE("simulate writes a reproducible corpus", "[harness]") {
    const std::string dir = fresh_dir();
    const std::string cfg_path = dir + "/sim.cfg";
    const std::string body =
        "p=6\nq=0\nlambda=5\nmu=30\ntrue_a0=1\ntrue_a=0.25,-0.5,0,0,-0.5,0.5\n"
        "n=200\nobserved_fraction=0.75\ncontamination_fraction=0.025\noutlier_value=20\n"
        "seed=9\nout=" + dir + "/run1\n";
    plar::write_text_file(cfg_path, body);
    REQUIRE(run_cli("simulate -c " + cfg_path) == 0);

    const ObservationSet obs = plar::read_series_csv(dir + "/run1/series.csv");
    REQUIRE(obs.mask.size() == 200);
    REQUIRE(plar::observed_count(obs) == 150);

    // 2.5% of the 150 observed entries, rounded: 4 contaminated rows.
    const std::vector<std::string> contaminated =
        data_rows(plar::read_text_file(dir + "/run1/contaminated.csv"));
    REQUIRE(contaminated.size() == 4);
    for (const std::string& row : contaminated) {
        const std::size_t t = std::stoul(row);
        REQUIRE(t >= 1);
        REQUIRE(t <= 200);
        REQUIRE(obs.mask[t - 1]);
        REQUIRE(obs.values[t - 1] == 20.0);
    }
    REQUIRE(data_rows(plar::read_text_file(dir + "/run1/truth.csv")).size() == 200);

    SECTION("reruns are byte-identical") {
        plar::write_text_file(cfg_path, body);
        REQUIRE(run_cli("simulate -c " + cfg_path + " -o " + dir + "/run2") == 0);
        for (const char* name : {"series.csv", "truth.csv", "contaminated.csv"})
            REQUIRE(plar::read_text_file(dir + "/run1/" + std::string(name)) ==
                    plar::read_text_file(dir + "/run2/" + std::string(name)));
    }

    SECTION("the emitted series round-trips the in-memory pipeline") {
        plar::ModelParams params;
        params.a0 = 1.0;
        params.a = {0.25, -0.5, 0.0, 0.0, -0.5, 0.5};
        plar::Rng sim_rng = plar::Rng::stream(9, 0);
        const plar::SeriesSample y =
            plar::detail::simulate_series(params, 200, sim_rng, nullptr);
        plar::CorruptionSpec spec;
        spec.observed_fraction = 0.75;
        spec.contamination_fraction = 0.025;
        spec.outlier_value = 20.0;
        spec.seed = 9;
        plar::Rng miss_rng = plar::Rng::stream(9, 1);
        ObservationSet expect = plar::inject_missing(y, spec, miss_rng);
        plar::Rng out_rng = plar::Rng::stream(9, 2);
        expect = plar::inject_outliers(expect, spec, out_rng);
        REQUIRE(obs.mask == expect.mask);
        REQUIRE(obs.values == expect.values);
    }
}

TEST_CASE("fit command reports a constant model", "[harness]") {
    const std::string dir = fresh_dir();
    std::string series = "t,y,observed\n";
    const std::vector<double> data = {4, 5, 3, 4, 6, 4, 5, 3, 2, 4, 5, 4, 3, 5, 4, 6, 4, 3, 4, 5};
    double mean = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (i == 4) {
            series += std::to_string(i + 1) + ",,0\n";  // one missing row
        } else {
            series += std::to_string(i + 1) + "," + plar::format_g17(data[i]) + ",1\n";
            mean += data[i];
        }
    }
    mean /= static_cast<double>(data.size() - 1);
    plar::write_text_file(dir + "/series.csv", series);
    const std::string cfg =
        "p=0\nq=0\nlambda=50\nmu=0\nr=0.5\ntau=1e-3\neps=1e-10\nmax_iters=200000\n"
        "solver=hybrid\ninput=" + dir + "/series.csv\nout=" + dir + "/fit1\n";
    plar::write_text_file(dir + "/fit.cfg", cfg);
    REQUIRE(run_cli("fit -c " + dir + "/fit.cfg") == 0);

    const std::string report = plar::read_text_file(dir + "/fit1/report.json");
    REQUIRE_THAT(report, ContainsSubstring("\"solver\": \"hybrid\""));
    REQUIRE_THAT(report, ContainsSubstring("\"converged\": true"));
    REQUIRE_THAT(report, ContainsSubstring("\"neg_log_likelihood\": null"));
    REQUIRE(json_field(report, "a0") == Approx(std::log1p(mean)).margin(0.05));

    const std::vector<std::string> rows = data_rows(plar::read_text_file(dir + "/fit1/fitted.csv"));
    REQUIRE(rows.size() == data.size());
    REQUIRE_THAT(rows[4], ContainsSubstring(",0,,"));  // missing row has empty tail
    REQUIRE(rows[0].back() != ',');

    REQUIRE(run_cli("fit -c " + dir + "/fit.cfg" + " -o " + dir + "/fit2") == 0);
    REQUIRE(plar::read_text_file(dir + "/fit1/report.json") ==
            plar::read_text_file(dir + "/fit2/report.json"));
    REQUIRE(plar::read_text_file(dir + "/fit1/fitted.csv") ==
            plar::read_text_file(dir + "/fit2/fitted.csv"));
}

TEST_CASE("exit codes separate usage, config, and convergence failures", "[harness]") {
    const std::string dir = fresh_dir();
    REQUIRE(run_cli("fit -c " + dir + "/absent.cfg") == 1);
    REQUIRE(run_cli("") == 1);

    plar::write_text_file(dir + "/bad.cfg", "p=1\nq=0\nlambda=1\nmu=0\nbogus=1\n");
    REQUIRE(run_cli("fit -c " + dir + "/bad.cfg") == 1);

    plar::write_text_file(dir + "/series.csv", "t,y,observed\n1,2,1\n2,4,1\n3,3,1\n4,5,1\n");
    plar::write_text_file(dir + "/capped.cfg",
                          "p=1\nq=0\nlambda=5\nmu=1\nmax_iters=1\neps=1e-16\n"
                          "input=" + dir + "/series.csv\nout=" + dir + "\n");
    REQUIRE(run_cli("fit -c " + dir + "/capped.cfg") == 2);
}

TEST_CASE("threshold curve tables", "[harness]") {
    const std::string dir = fresh_dir();
    plar::write_text_file(dir + "/prox.cfg",
                          "p=0\nq=0\nlambda=1\nmu=1\nr=0.5\nprox_t_prime=5\nprox_mu=2\n"
                          "out=" + dir + "\n");
    REQUIRE(run_cli("prox-curve -c " + dir + "/prox.cfg") == 0);

    const std::string meta = plar::read_text_file(dir + "/meta.json");
    REQUIRE_THAT(meta, ContainsSubstring("\"mu0\": 8.6066296582387043"));
    REQUIRE_THAT(meta, ContainsSubstring("\"points_shrink\": 801"));
    REQUIRE_THAT(meta, ContainsSubstring("\"points_energy\": 601"));

    const std::vector<std::string> energy = data_rows(plar::read_text_file(dir + "/energy.csv"));
    REQUIRE(energy.size() == 601);
    REQUIRE(energy.front().substr(0, 2) == "0,");
    REQUIRE(energy.back().substr(0, 2) == "6,");

    const std::vector<std::string> rows = data_rows(plar::read_text_file(dir + "/shrink.csv"));
    REQUIRE(rows.size() == 801);
    for (const std::string& row : rows) {
        const std::vector<std::string> f = plar::detail::split(row, ',');
        REQUIRE(f.size() == 5);
        const double t = std::strtod(f[0].c_str(), nullptr);
        const double soft = std::strtod(f[1].c_str(), nullptr);
        const double expect = std::abs(t) > 2.0 ? (t > 0.0 ? t - 2.0 : t + 2.0) : 0.0;
        REQUIRE(soft == Approx(expect).margin(1e-12));
        REQUIRE(f[4] == "0");  // at 2*mu0(|t'|) the zero branch always wins
    }
}

TEST_CASE("experiment command writes estimates and summary", "[harness]") {
    const std::string dir = fresh_dir();
    const std::string base =
        "p=2\nq=0\nlambda=5\nmu=1\ntrue_a0=0.8\ntrue_a=0.3,-0.4\n"
        "n=120\nruns=2\nsolver=palm\ntau=1e-4\neps=1e-5\nmax_iters=20000\nseed=3\n";
    plar::write_text_file(dir + "/serial.cfg", base + "threads=1\nout=" + dir + "/serial\n");
    plar::write_text_file(dir + "/pool.cfg", base + "threads=4\nout=" + dir + "/pool\n");

    REQUIRE(run_cli("experiment -c " + dir + "/serial.cfg") == 0);
    REQUIRE(run_cli("experiment -c " + dir + "/pool.cfg") == 0);

    const std::string estimates = plar::read_text_file(dir + "/serial/estimates.csv");
    const std::vector<std::string> rows = data_rows(estimates);
    REQUIRE(rows.size() == 6);  // 2 runs x (a0, a1, a2)
    REQUIRE(rows[0].substr(0, 5) == "1,a0,");
    REQUIRE(rows[3].substr(0, 5) == "2,a0,");

    const std::string summary = plar::read_text_file(dir + "/serial/summary.json");
    REQUIRE_THAT(summary, ContainsSubstring("\"runs\": 2"));
    REQUIRE_THAT(summary, ContainsSubstring("\"failed_runs\": []"));
    REQUIRE_THAT(summary, ContainsSubstring("\"name\": \"a2\""));

    REQUIRE(estimates == plar::read_text_file(dir + "/pool/estimates.csv"));
    REQUIRE(summary == plar::read_text_file(dir + "/pool/summary.json"));
}
