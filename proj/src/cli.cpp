#include <cstdlib>
#include <string>

#include "CLI11.hpp"
#include "uncproxy/pipeline.hpp"

namespace uncproxy {

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Uncertainty decomposition, annotator disagreement and calibration experiments", "uncproxy"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kLibraryVersion);

    std::string config_path;
    std::string mode, out_dir;
    std::optional<std::uint64_t> seed;

    auto add = [&](const char* name, const char* help) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        sub->add_option("--mode", mode, "baseline, uncnet or both");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "master seed");
        return sub;
    };
    CLI::App* synth = add("synth", "generate a synthetic annotated dataset");
    CLI::App* train = add("train", "train the network");
    CLI::App* predict = add("predict", "write prediction logs");
    CLI::App* analyze = add("analyze", "compute the analysis report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kLibraryVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        CliOverrides overrides;
        if (!mode.empty()) overrides.mode = parse_mode(mode);
        if (!out_dir.empty()) overrides.output_dir = out_dir;
        overrides.seed = seed;
        RunConfig cfg = load_run_config(config_path, overrides);
        if (const char* t = std::getenv("UNCPROXY_THREADS")) cfg.threads = static_cast<unsigned>(std::strtoul(t, nullptr, 10));

        if (synth->parsed()) cmd_synth(cfg, out);
        else if (train->parsed()) cmd_train(cfg, out);
        else if (predict->parsed()) cmd_predict(cfg, out);
        else if (analyze->parsed()) cmd_analyze(cfg, out);
        return 0;
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace uncproxy
