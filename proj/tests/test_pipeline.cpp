#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "uncproxy/io.hpp"
#include "uncproxy/pipeline.hpp"
#include "uncproxy/rng.hpp"

using namespace uncproxy;
namespace fs = std::filesystem;

namespace {

Json small_config(const fs::path& out) {
    Json j = Json::parse(R"({
      "seed": 11,
      "mode": "both",
      "synth": {
        "n_samples": 300, "n_classes": 3, "feature_dim": 3,
        "component_means": [[1, 0, 0], [-1, 0, 0], [0, 1.5, 0]],
        "component_scale": 1.0, "annotators_k": 5,
        "ood_fraction": 0.1, "ood_shift": [0, 0, 4]
      },
      "train": {"hidden": [8], "epochs": 3, "mc_samples_T": 5, "splits": {"train": 0.5, "val": 0.1}},
      "analysis": {"split": "all", "quantiles": 5, "k_extremes": 3}
    })");
    j["output_dir"] = out.string();
    return j;
}

struct Workspace {
    fs::path dir;
    explicit Workspace(const std::string& name) : dir(fs::temp_directory_path() / ("uncproxy_" + name)) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Workspace() { fs::remove_all(dir); }
    fs::path write_config(const Json& j, const std::string& name = "config.json") const {
        io::write_file_atomic(dir / name, j.dump(2));
        return dir / name;
    }
};

struct CliResult {
    int code;
    std::string out, err;
};

CliResult cli(std::vector<std::string> args) {
    args.insert(args.begin(), "uncproxy");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

int run_all(const fs::path& config, const std::vector<std::string>& extra = {}) {
    for (const char* cmd : {"synth", "train", "predict", "analyze"}) {
        std::vector<std::string> args{cmd, "--config", config.string()};
        args.insert(args.end(), extra.begin(), extra.end());
        const auto r = cli(args);
        if (r.code != 0) {
            MESSAGE(cmd << ": " << r.err);
            return r.code;
        }
    }
    return 0;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
    CHECK(cli({}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"train"}).code == 2);
    CHECK(cli({"train", "--config", "/nonexistent/config.json"}).code == 2);
    CHECK(cli({"--help"}).code == 0);

    Workspace ws("usage");
    CHECK(cli({"synth", "--config", ws.write_config(small_config(ws.dir)).string(), "--mode", "fancy"}).code == 2);
    Json bad = small_config(ws.dir);
    bad["train"]["dropout_p"] = 1.5;
    CHECK(cli({"train", "--config", ws.write_config(bad).string()}).code == 2);
    io::write_file_atomic(ws.dir / "broken.json", "{not json");
    CHECK(cli({"train", "--config", (ws.dir / "broken.json").string()}).code == 2);
}

TEST_CASE("full run produces a complete, reproducible report") {
    Workspace ws("full");
    const auto config = ws.write_config(small_config(ws.dir));
    REQUIRE(run_all(config) == 0);
    const std::string first = io::read_file(ws.dir / "report.json");
    const Json report = Json::parse(first);

    for (const char* key : {"models", "ttest_jsd", "correlations", "bce_percentile", "rejection", "accuracy_table",
                            "extremes", "shift", "disagreement_histogram", "config"})
        CHECK(report.contains(key));
    CHECK(report["sections_absent"].empty());
    CHECK(report["n_samples"] == 300);
    CHECK(report["correlations"].contains("Ua-d"));
    CHECK(report["models"]["uncnet"]["calibration"]["bins"]["count"].size() == 10);
    CHECK(report["extremes"]["Ua"]["lowest"].size() == 3);
    CHECK_FALSE(report["config"].contains("threads"));
    for (const char* f : {"reliability_baseline.csv", "reliability_uncnet.csv", "calibration.csv", "bce_percentile.csv",
                          "rejection.csv", "disagreement_hist.csv", "per_sample_uncnet.csv", "loss_trace_uncnet.csv"})
        CHECK(fs::exists(ws.dir / f));

    // Same seed, fresh outputs, single thread: identical bytes.
    setenv("UNCPROXY_THREADS", "1", 1);
    for (const auto& e : fs::directory_iterator(ws.dir))
        if (e.path().filename() != "config.json") fs::remove(e.path());
    REQUIRE(run_all(config) == 0);
    unsetenv("UNCPROXY_THREADS");
    CHECK(io::read_file(ws.dir / "report.json") == first);

    // A different seed changes the report.
    REQUIRE(run_all(config, {"--seed", "12"}) == 0);
    CHECK(io::read_file(ws.dir / "report.json") != first);
}

TEST_CASE("logged predictions match a direct evaluation") {
    Workspace ws("spot");
    const auto config = ws.write_config(small_config(ws.dir));
    REQUIRE(run_all(config) == 0);
    const RunConfig cfg = load_run_config(config);
    const auto params = params_from_json(Json::parse(io::read_file(params_path(cfg, Mode::uncnet))));
    const auto table = parse_features(io::read_file(cfg.paths.features));
    const auto log = parse_prediction_log(io::read_file(predictions_path(cfg, Mode::uncnet)));
    REQUIRE(log.size() == table.ids.size());
    for (std::size_t i : {0u, 17u, 299u}) {
        const auto mc = mc_predict(params, table.features.row(i), 5, cfg.train.dropout_p,
                                   stream_seed(cfg.seed, {stream_tag::predict_sample, i}));
        CHECK(log[i].sample_id == table.ids[i]);
        CHECK(log[i].probs == mc.probs());
        CHECK(*log[i].uncertainty == decompose(mc));
    }
}

TEST_CASE("baseline-only analysis omits UncNet sections") {
    Workspace ws("baseline");
    Json j = small_config(ws.dir);
    j["mode"] = "baseline";
    REQUIRE(run_all(ws.write_config(j)) == 0);
    const Json report = Json::parse(io::read_file(ws.dir / "report.json"));
    CHECK(report["models"].contains("baseline"));
    CHECK_FALSE(report.contains("correlations"));
    CHECK_FALSE(report.contains("ttest_jsd"));
    const auto absent = report["sections_absent"].get<std::vector<std::string>>();
    CHECK(std::find(absent.begin(), absent.end(), "correlations") != absent.end());
}

TEST_CASE("one Monte Carlo pass has zero epistemic uncertainty") {
    Workspace ws("t1");
    Json j = small_config(ws.dir);
    j["train"]["mc_samples_T"] = 1;
    REQUIRE(run_all(ws.write_config(j)) == 0);
    for (const auto& rec : parse_prediction_log(io::read_file(ws.dir / "predictions_uncnet.jsonl")))
        CHECK(rec.uncertainty->u_epistemic == 0.0);
    const Json report = Json::parse(io::read_file(ws.dir / "report.json"));
    CHECK(report["correlations"]["Ue-d"].contains("error"));
}

TEST_CASE("identical prediction logs give a t-test warning, not a failure") {
    RunConfig cfg = parse_run_config(small_config("unused"));
    cfg.analysis_split = "all";
    AnalysisInputs in;
    std::vector<PredictionRecord> log;
    Rng rng(3);
    for (std::size_t i = 0; i < 30; ++i) {
        const std::string id = "x" + std::to_string(i);
        std::vector<std::int64_t> counts{static_cast<std::int64_t>(rng.index(4)), static_cast<std::int64_t>(rng.index(4)),
                                         1};
        in.records.push_back({id, counts, {}});
        const double a = 0.2 + 0.6 * rng.uniform01();
        std::vector<double> p{a, (1.0 - a) / 2.0, (1.0 - a) / 2.0};
        PredictionRecord rec{id, Matrix(2, 3, {p[0], p[1], p[2], p[0], p[1], p[2]}), p, std::nullopt};
        rec.uncertainty = decompose(McPrediction(id, rec.probs));
        log.push_back(rec);
    }
    in.baseline = log;
    in.uncnet = log;
    const auto out = analyze(cfg, in);
    CHECK(out.report["ttest_jsd"].contains("warning"));
    CHECK_FALSE(out.report["ttest_jsd"].contains("result"));
}

TEST_CASE("data errors exit with 3") {
    Workspace ws("data");
    const auto config = ws.write_config(small_config(ws.dir));
    REQUIRE(cli({"synth", "--config", config.string()}).code == 0);

    // Labels that miss a feature row: join error.
    std::string labels = io::read_file(ws.dir / "labels.csv");
    labels.erase(labels.find("s000005"), labels.find('\n', labels.find("s000005")) - labels.find("s000005") + 1);
    io::write_file_atomic(ws.dir / "labels.csv", labels);
    auto r = cli({"train", "--config", config.string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("s000005") != std::string::npos);

    // Missing prediction logs.
    CHECK(cli({"analyze", "--config", config.string()}).code == 3);

    // Inconsistent T inside one log.
    const std::string bad = R"({"id":"a","probs":[[0.5,0.5]],"mean_probs":[0.5,0.5]})" "\n"
                            R"({"id":"b","probs":[[0.5,0.5],[0.5,0.5]],"mean_probs":[0.5,0.5]})" "\n";
    try {
        parse_prediction_log(bad);
        FAIL("expected format error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::format);
        CHECK(exit_code_for(e.kind()) == 3);
    }
    CHECK(exit_code_for(ErrorKind::degenerate_input) == 4);
    CHECK(exit_code_for(ErrorKind::training_diverged) == 4);
}

TEST_CASE("splits are stable and roughly proportional") {
    const SplitFractions f{0.8, 0.1};
    std::size_t counts[3] = {0, 0, 0};
    for (std::size_t i = 0; i < 10000; ++i) ++counts[static_cast<int>(assign_split(synth_sample_id(i), f))];
    CHECK(counts[0] == doctest::Approx(8000).epsilon(0.03));
    CHECK(counts[1] == doctest::Approx(1000).epsilon(0.1));
    CHECK(assign_split("abc", f) == assign_split("abc", f));
}
