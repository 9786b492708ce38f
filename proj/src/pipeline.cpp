#include "uncproxy/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <set>
#include <thread>
#include <unordered_map>

#include "uncproxy/error.hpp"
#include "uncproxy/evaluation.hpp"
#include "uncproxy/io.hpp"
#include "uncproxy/rng.hpp"

namespace uncproxy {

namespace fs = std::filesystem;

const char* to_string(Mode m) noexcept {
    switch (m) {
        case Mode::baseline: return "baseline";
        case Mode::uncnet: return "uncnet";
        case Mode::both: return "both";
    }
    return "?";
}

const char* to_string(Split s) noexcept {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Mode parse_mode(std::string_view s) {
    if (s == "baseline") return Mode::baseline;
    if (s == "uncnet") return Mode::uncnet;
    if (s == "both") return Mode::both;
    fail(ErrorKind::usage, "unknown mode '" + std::string(s) + "' (expected baseline, uncnet or both)");
}

Split assign_split(std::string_view sample_id, const SplitFractions& fractions) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char ch : sample_id) {
        h ^= ch;
        h *= 0x100000001B3ULL;
    }
    const double u = static_cast<double>(mix64(h) >> 11) * 0x1.0p-53;
    if (u < fractions.train) return Split::train;
    if (u < fractions.train + fractions.val) return Split::val;
    return Split::test;
}

namespace {

std::vector<Mode> models_of(Mode m) {
    if (m == Mode::both) return {Mode::baseline, Mode::uncnet};
    return {m};
}

template <typename T>
T value_or(const Json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    return obj.at(key).get<T>();
}

// Runs body(i) for i in [0, n) on up to `threads` workers with static
// chunking. Exceptions are rethrown on the calling thread.
template <typename F>
void parallel_for(std::size_t n, unsigned threads, F&& body) {
    unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

Json read_json_file(const fs::path& path, ErrorKind kind_on_failure) {
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const Error& e) {
        fail(kind_on_failure, e.what());
    }
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(kind_on_failure == ErrorKind::io ? ErrorKind::format : kind_on_failure,
             path.string() + ": invalid JSON: " + e.what());
    }
}

void write_json(const fs::path& path, const Json& doc) { io::write_file_atomic(path, doc.dump(2) + "\n"); }

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) fail(ErrorKind::io, "cannot create output directory " + dir.string());
}

struct LoadedData {
    FeatureTable table;
    std::vector<AnnotationRecord> records;  // aligned with table rows
    std::vector<std::uint8_t> is_ood;       // aligned with table rows; empty if no sidecar
};

std::vector<std::uint8_t> load_ood_flags(const fs::path& sidecar, std::span<const std::string> ids) {
    if (!fs::exists(sidecar)) return {};
    const Json doc = read_json_file(sidecar, ErrorKind::io);
    std::unordered_map<std::string, std::uint8_t> flag_by_id;
    try {
        const auto sid = doc.at("sample_ids").get<std::vector<std::string>>();
        const auto flags = doc.at("is_ood").get<std::vector<bool>>();
        if (sid.size() != flags.size()) fail(ErrorKind::format, "sidecar: sample_ids and is_ood differ in length");
        for (std::size_t i = 0; i < sid.size(); ++i) flag_by_id[sid[i]] = flags[i] ? 1 : 0;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, sidecar.string() + ": " + e.what());
    }
    std::vector<std::uint8_t> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        const auto it = flag_by_id.find(id);
        if (it == flag_by_id.end()) fail(ErrorKind::join, "sidecar has no entry for sample " + id);
        out.push_back(it->second);
    }
    return out;
}

// Joins labels onto the feature rows by sample id.
LoadedData load_data(const RunConfig& cfg) {
    LoadedData d;
    d.table = parse_features(io::read_file(cfg.paths.features));
    auto records = load_labels(cfg.paths.labels, cfg.schema);
    std::unordered_map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (!by_id.emplace(records[i].sample_id, i).second)
            fail(ErrorKind::parse, "labels contain sample " + records[i].sample_id + " twice");
    std::vector<std::string> missing;
    for (const auto& id : d.table.ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) {
            missing.push_back(id);
            continue;
        }
        d.records.push_back(records[it->second]);
    }
    if (!missing.empty()) {
        std::string msg = "features without labels:";
        for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 10); ++i) msg += " " + missing[i];
        fail(ErrorKind::join, msg);
    }
    d.is_ood = load_ood_flags(cfg.paths.sidecar, d.table.ids);
    return d;
}

std::string loss_trace_csv(std::span<const double> trace) {
    std::string out = "epoch,loss\n";
    for (std::size_t e = 0; e < trace.size(); ++e) out += std::to_string(e) + "," + io::format_double(trace[e]) + "\n";
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

RunConfig parse_run_config(const Json& doc, const CliOverrides& overrides) {
    RunConfig cfg;
    try {
        if (!doc.is_object()) fail(ErrorKind::usage, "config must be a JSON object");
        cfg.seed = value_or<std::uint64_t>(doc, "seed", 0);
        cfg.mode = parse_mode(value_or<std::string>(doc, "mode", "both"));
        cfg.output_dir = value_or<std::string>(doc, "output_dir", "out");
        if (overrides.seed) cfg.seed = *overrides.seed;
        if (overrides.mode) cfg.mode = *overrides.mode;
        if (overrides.output_dir) cfg.output_dir = *overrides.output_dir;

        cfg.paths = {cfg.output_dir / "features.csv", cfg.output_dir / "labels.csv", cfg.output_dir / "dataset.json"};
        if (doc.contains("paths")) {
            const Json& p = doc.at("paths");
            if (p.contains("features")) cfg.paths.features = p.at("features").get<std::string>();
            if (p.contains("labels")) cfg.paths.labels = p.at("labels").get<std::string>();
            if (p.contains("sidecar")) cfg.paths.sidecar = p.at("sidecar").get<std::string>();
        }

        if (doc.contains("synth")) {
            cfg.synth = synth_config_from_json(doc.at("synth"));
            cfg.synth->seed = cfg.seed;
            cfg.synth->validate();
        }
        if (doc.contains("schema")) {
            const Json& s = doc.at("schema");
            cfg.schema.class_names = s.at("class_names").get<std::vector<std::string>>();
            cfg.schema.excluded_columns = value_or<std::vector<std::string>>(s, "excluded_columns", {});
        } else if (cfg.synth) {
            for (std::size_t c = 0; c < cfg.synth->n_classes; ++c) cfg.schema.class_names.push_back("c" + std::to_string(c));
        } else {
            fail(ErrorKind::usage, "config needs a 'schema' block (or a 'synth' block to derive one)");
        }
        cfg.schema.validate();
        if (cfg.synth && cfg.synth->n_classes != cfg.schema.num_classes())
            fail(ErrorKind::usage, "schema class count differs from synth n_classes");

        const Json train = doc.contains("train") ? doc.at("train") : Json::object();
        cfg.train.dropout_p = value_or(train, "dropout_p", cfg.train.dropout_p);
        cfg.train.learning_rate = value_or(train, "learning_rate", cfg.train.learning_rate);
        cfg.train.epochs = value_or(train, "epochs", cfg.train.epochs);
        cfg.train.batch_size = value_or(train, "batch_size", cfg.train.batch_size);
        if (train.contains("weight_decay") && !train.at("weight_decay").is_null())
            cfg.train.weight_decay = train.at("weight_decay").get<double>();
        cfg.train.mc_samples_T = value_or(train, "mc_samples_T", cfg.train.mc_samples_T);
        cfg.train.seed = cfg.seed;
        cfg.hidden = value_or(train, "hidden", cfg.hidden);
        cfg.exclude_ood_from_training = value_or(train, "exclude_ood", cfg.exclude_ood_from_training);
        if (train.contains("splits")) {
            cfg.splits.train = value_or(train.at("splits"), "train", cfg.splits.train);
            cfg.splits.val = value_or(train.at("splits"), "val", cfg.splits.val);
        }
        cfg.train.validate();
        for (std::size_t h : cfg.hidden)
            if (h == 0) fail(ErrorKind::usage, "hidden layer widths must be positive");
        if (!(cfg.splits.train > 0.0) || !(cfg.splits.val >= 0.0) || cfg.splits.train + cfg.splits.val > 1.0)
            fail(ErrorKind::usage, "split fractions must be non-negative with train > 0 and train + val <= 1");

        const Json an = doc.contains("analysis") ? doc.at("analysis") : Json::object();
        cfg.calibration.bins = value_or(an, "bins", cfg.calibration.bins);
        cfg.calibration.ranges = value_or(an, "ranges", cfg.calibration.ranges);
        cfg.calibration.epsilon = value_or(an, "epsilon", cfg.calibration.epsilon);
        cfg.calibration.quantiles = value_or(an, "quantiles", cfg.calibration.quantiles);
        cfg.analysis_split = value_or(an, "split", cfg.analysis_split);
        cfg.coverages = value_or(an, "coverages", cfg.coverages);
        cfg.table_coverage = value_or(an, "table_coverage", cfg.table_coverage);
        cfg.k_extremes = value_or(an, "k_extremes", cfg.k_extremes);
        cfg.histogram_bins = value_or(an, "histogram_bins", cfg.histogram_bins);
        cfg.calibration.validate();
        if (cfg.analysis_split != "train" && cfg.analysis_split != "val" && cfg.analysis_split != "test" &&
            cfg.analysis_split != "all")
            fail(ErrorKind::usage, "analysis split must be train, val, test or all");
        if (cfg.coverages.empty()) fail(ErrorKind::usage, "coverages must not be empty");
        for (std::size_t j = 0; j < cfg.coverages.size(); ++j)
            if (!(cfg.coverages[j] > 0.0 && cfg.coverages[j] <= 1.0) || (j > 0 && !(cfg.coverages[j] > cfg.coverages[j - 1])))
                fail(ErrorKind::usage, "coverages must be strictly increasing values in (0, 1]");
        if (!(cfg.table_coverage > 0.0 && cfg.table_coverage <= 1.0))
            fail(ErrorKind::usage, "table_coverage must lie in (0, 1]");
        if (cfg.histogram_bins == 0) fail(ErrorKind::usage, "histogram_bins must be positive");
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::usage, std::string("config: ") + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::usage) throw;
        fail(ErrorKind::usage, std::string("config: ") + e.what());
    }
    return cfg;
}

RunConfig load_run_config(const fs::path& path, const CliOverrides& overrides) {
    if (!fs::exists(path)) fail(ErrorKind::usage, "config file not found: " + path.string());
    return parse_run_config(read_json_file(path, ErrorKind::usage), overrides);
}

Json run_config_to_json(const RunConfig& cfg) {
    Json j;
    j["seed"] = cfg.seed;
    j["mode"] = to_string(cfg.mode);
    j["output_dir"] = cfg.output_dir.generic_string();
    j["paths"] = {{"features", cfg.paths.features.generic_string()},
                  {"labels", cfg.paths.labels.generic_string()},
                  {"sidecar", cfg.paths.sidecar.generic_string()}};
    j["schema"] = {{"class_names", cfg.schema.class_names}, {"excluded_columns", cfg.schema.excluded_columns}};
    if (cfg.synth) j["synth"] = synth_config_to_json(*cfg.synth);
    Json train;
    train["hidden"] = cfg.hidden;
    train["dropout_p"] = cfg.train.dropout_p;
    train["learning_rate"] = cfg.train.learning_rate;
    train["epochs"] = cfg.train.epochs;
    train["batch_size"] = cfg.train.batch_size;
    train["weight_decay"] = cfg.train.weight_decay ? Json(*cfg.train.weight_decay) : Json(nullptr);
    train["mc_samples_T"] = cfg.train.mc_samples_T;
    train["exclude_ood"] = cfg.exclude_ood_from_training;
    train["splits"] = {{"train", cfg.splits.train}, {"val", cfg.splits.val}};
    j["train"] = std::move(train);
    j["analysis"] = {{"split", cfg.analysis_split},
                     {"bins", cfg.calibration.bins},
                     {"ranges", cfg.calibration.ranges},
                     {"epsilon", cfg.calibration.epsilon},
                     {"quantiles", cfg.calibration.quantiles},
                     {"coverages", cfg.coverages},
                     {"table_coverage", cfg.table_coverage},
                     {"k_extremes", cfg.k_extremes},
                     {"histogram_bins", cfg.histogram_bins}};
    return j;
}

fs::path params_path(const RunConfig& cfg, Mode model) {
    return cfg.output_dir / (std::string("params_") + to_string(model) + ".json");
}

fs::path predictions_path(const RunConfig& cfg, Mode model) {
    return cfg.output_dir / (std::string("predictions_") + to_string(model) + ".jsonl");
}

fs::path report_path(const RunConfig& cfg) { return cfg.output_dir / "report.json"; }

// ---------------------------------------------------------------------------
// Prediction logs

std::string prediction_record_to_line(const PredictionRecord& record, Mode model) {
    Json j;
    j["id"] = record.sample_id;
    j["model"] = to_string(model);
    Json rows = Json::array();
    for (std::size_t t = 0; t < record.probs.rows(); ++t) {
        const auto r = record.probs.row(t);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    j["probs"] = std::move(rows);
    j["mean_probs"] = record.mean_probs;
    if (record.uncertainty)
        j["uncertainty"] = {{"total", record.uncertainty->u_total},
                            {"aleatoric", record.uncertainty->u_aleatoric},
                            {"epistemic", record.uncertainty->u_epistemic}};
    return j.dump();
}

std::vector<PredictionRecord> parse_prediction_log(std::string_view text) {
    std::vector<PredictionRecord> out;
    std::size_t T = 0, C = 0;
    const auto lines = io::split_lines(text);
    for (std::size_t li = 0; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        const std::string where = "prediction log line " + std::to_string(li + 1);
        PredictionRecord rec;
        try {
            const Json j = Json::parse(lines[li]);
            rec.sample_id = j.at("id").get<std::string>();
            const auto rows = j.at("probs").get<std::vector<std::vector<double>>>();
            rec.mean_probs = j.at("mean_probs").get<std::vector<double>>();
            if (rows.empty() || rows.front().empty()) fail(ErrorKind::format, where + ": empty probability matrix");
            std::vector<double> flat;
            for (const auto& r : rows) {
                if (r.size() != rows.front().size()) fail(ErrorKind::format, where + ": ragged probability matrix");
                flat.insert(flat.end(), r.begin(), r.end());
            }
            rec.probs = Matrix(rows.size(), rows.front().size(), std::move(flat));
            if (j.contains("uncertainty")) {
                const Json& u = j.at("uncertainty");
                rec.uncertainty = UncertaintyTriple{u.at("total").get<double>(), u.at("aleatoric").get<double>(),
                                                    u.at("epistemic").get<double>()};
            }
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::format, where + ": " + e.what());
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::format) throw;
            fail(ErrorKind::format, where + ": " + e.what());
        }
        if (out.empty()) {
            T = rec.probs.rows();
            C = rec.probs.cols();
        }
        if (rec.probs.rows() != T || rec.probs.cols() != C || rec.mean_probs.size() != C)
            fail(ErrorKind::format, where + ": inconsistent T or C (expected T=" + std::to_string(T) +
                                        ", C=" + std::to_string(C) + ")");
        out.push_back(std::move(rec));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Commands

void cmd_synth(const RunConfig& cfg, std::ostream& log) {
    if (!cfg.synth) fail(ErrorKind::usage, "config has no 'synth' block");
    const SynthDataset ds = generate(*cfg.synth);
    const auto records = ds.records(cfg.schema.excluded_columns.size());

    for (const auto& p : {cfg.paths.features, cfg.paths.labels, cfg.paths.sidecar})
        if (p.has_parent_path()) ensure_dir(p.parent_path());
    io::write_file_atomic(cfg.paths.features, format_features(ds.sample_ids, ds.features));
    io::write_file_atomic(cfg.paths.labels, format_labels(records, cfg.schema));

    Json sidecar;
    sidecar["version"] = 1;
    sidecar["library_version"] = kLibraryVersion;
    sidecar["config"] = synth_config_to_json(*cfg.synth);
    sidecar["class_names"] = cfg.schema.class_names;
    sidecar["sample_ids"] = ds.sample_ids;
    std::vector<bool> flags(ds.is_ood.begin(), ds.is_ood.end());
    sidecar["is_ood"] = flags;
    write_json(cfg.paths.sidecar, sidecar);

    double d_sum = 0.0;
    for (const auto& label : normalize_all(records, cfg.schema)) d_sum += label.disagreement;
    log << "synth: N=" << ds.size() << " C=" << cfg.synth->n_classes
        << " mean_d=" << io::format_double(d_sum / static_cast<double>(ds.size())) << "\n";
}

void cmd_train(const RunConfig& cfg, std::ostream& log) {
    const LoadedData data = load_data(cfg);
    const auto soft = normalize_all(data.records, cfg.schema);

    std::vector<std::size_t> rows;
    std::size_t skipped_ood = 0;
    for (std::size_t i = 0; i < data.table.ids.size(); ++i) {
        if (assign_split(data.table.ids[i], cfg.splits) != Split::train) continue;
        if (cfg.exclude_ood_from_training && !data.is_ood.empty() && data.is_ood[i]) {
            ++skipped_ood;
            continue;
        }
        rows.push_back(i);
    }
    if (rows.empty()) fail(ErrorKind::empty_input, "no training rows after splitting");

    Dataset train_set{Matrix(rows.size(), data.table.features.cols()), Matrix(rows.size(), cfg.schema.num_classes()), {}};
    for (std::size_t j = 0; j < rows.size(); ++j) {
        std::ranges::copy(data.table.features.row(rows[j]), train_set.features.row(j).begin());
        std::ranges::copy(soft[rows[j]].probs, train_set.soft_labels.row(j).begin());
        train_set.sample_ids.push_back(data.table.ids[rows[j]]);
    }

    std::vector<std::size_t> sizes{train_set.features.cols()};
    sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
    sizes.push_back(cfg.schema.num_classes());
    const TrainResult result = train(train_set, cfg.train, sizes);

    ensure_dir(cfg.output_dir);
    const std::string params_text = params_to_json(result.params).dump(2) + "\n";
    for (Mode model : models_of(cfg.mode)) {
        io::write_file_atomic(params_path(cfg, model), params_text);
        io::write_file_atomic(cfg.output_dir / (std::string("loss_trace_") + to_string(model) + ".csv"),
                              loss_trace_csv(result.loss_trace));
    }
    log << "train: n_train=" << rows.size() << " (excluded " << skipped_ood << " OOD) epochs=" << cfg.train.epochs;
    if (!result.loss_trace.empty()) log << " final_loss=" << io::format_double(result.loss_trace.back());
    log << "\n";
}

PredictionRecord predict_sample(const NetworkParams& params, std::span<const double> x, std::size_t index,
                                const std::string& id, Mode model, const RunConfig& cfg) {
    PredictionRecord rec;
    rec.sample_id = id;
    if (model == Mode::baseline) {
        auto probs = softmax(forward(params, x));
        rec.probs = Matrix(1, probs.size(), probs);
        rec.mean_probs = std::move(probs);
        return rec;
    }
    const McPrediction mc = mc_predict(params, x, cfg.train.mc_samples_T, cfg.train.dropout_p,
                                       stream_seed(cfg.seed, {stream_tag::predict_sample, index}), id);
    rec.probs = mc.probs();
    rec.mean_probs.assign(mc.mean_probs().begin(), mc.mean_probs().end());
    rec.uncertainty = decompose(mc);
    return rec;
}

void cmd_predict(const RunConfig& cfg, std::ostream& log) {
    const FeatureTable table = parse_features(io::read_file(cfg.paths.features));
    ensure_dir(cfg.output_dir);
    for (Mode model : models_of(cfg.mode)) {
        const auto ppath = params_path(cfg, model);
        const NetworkParams params = params_from_json(read_json_file(ppath, ErrorKind::io));
        if (params.input_dim() != table.features.cols())
            fail(ErrorKind::format, ppath.string() + ": network input does not match the feature width");
        if (params.output_dim() != cfg.schema.num_classes())
            fail(ErrorKind::format, ppath.string() + ": network output does not match the schema");

        std::vector<std::string> lines(table.ids.size());
        parallel_for(table.ids.size(), cfg.threads, [&](std::size_t i) {
            lines[i] = prediction_record_to_line(
                predict_sample(params, table.features.row(i), i, table.ids[i], model, cfg), model);
        });
        std::string text;
        for (const auto& l : lines) text += l + "\n";
        io::write_file_atomic(predictions_path(cfg, model), text);
        log << "predict: " << to_string(model) << " records=" << lines.size();
        if (model == Mode::uncnet) log << " T=" << cfg.train.mc_samples_T;
        log << "\n";
    }
}

// ---------------------------------------------------------------------------
// Analysis

namespace {

struct ModelView {
    std::vector<SamplePrediction> preds;
    std::vector<SoftLabel> labels;
    std::vector<AnnotationRecord> records;
    std::vector<std::vector<PairSample>> pairs_by_sample;
    std::vector<double> jsd;
    double accuracy = 0.0;
    CalibrationReport calibration;
};

Json safe_pearson(std::span<const double> x, std::span<const double> y) {
    try {
        return correlation_to_json(pearson(x, y));
    } catch (const Error& e) {
        return Json{{"error", e.what()}};
    }
}

double sample_sd(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string join_ids(const std::vector<std::string>& ids) {
    std::string msg;
    for (std::size_t i = 0; i < std::min<std::size_t>(ids.size(), 10); ++i) msg += " " + ids[i];
    if (ids.size() > 10) msg += " ... (" + std::to_string(ids.size()) + " total)";
    return msg;
}

void check_same_samples(const std::vector<PredictionRecord>& a, const std::vector<PredictionRecord>& b) {
    std::set<std::string> sa, sb;
    for (const auto& r : a) sa.insert(r.sample_id);
    for (const auto& r : b) sb.insert(r.sample_id);
    std::vector<std::string> offenders;
    std::set_symmetric_difference(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(offenders));
    if (!offenders.empty()) fail(ErrorKind::join, "baseline and uncnet logs cover different samples:" + join_ids(offenders));
}

}  // namespace

AnalysisOutputs analyze(const RunConfig& cfg, const AnalysisInputs& in) {
    const bool has_base = in.baseline.has_value();
    const bool has_unc = in.uncnet.has_value();
    if (!has_base && !has_unc) fail(ErrorKind::empty_input, "no prediction logs to analyze");
    if (has_base && has_unc) check_same_samples(*in.baseline, *in.uncnet);

    const std::size_t C = cfg.schema.num_classes();
    std::unordered_map<std::string, std::size_t> record_index;
    for (std::size_t i = 0; i < in.records.size(); ++i) record_index.emplace(in.records[i].sample_id, i);

    const auto& reference = has_unc ? *in.uncnet : *in.baseline;
    std::vector<std::string> unknown;
    for (const auto& r : reference)
        if (!record_index.contains(r.sample_id)) unknown.push_back(r.sample_id);
    if (!unknown.empty()) fail(ErrorKind::join, "predictions for samples missing from labels:" + join_ids(unknown));
    for (const auto* log : {has_base ? &*in.baseline : nullptr, has_unc ? &*in.uncnet : nullptr})
        if (log && !log->empty() && log->front().mean_probs.size() != C)
            fail(ErrorKind::format, "prediction log class count differs from the schema");

    // Analysis set: reference order, filtered by split.
    std::vector<std::string> ids;
    for (const auto& r : reference)
        if (cfg.analysis_split == "all" || to_string(assign_split(r.sample_id, cfg.splits)) == cfg.analysis_split)
            ids.push_back(r.sample_id);
    if (ids.empty()) fail(ErrorKind::empty_input, "analysis split '" + cfg.analysis_split + "' selects no samples");

    auto build_view = [&](const std::vector<PredictionRecord>& log) {
        std::unordered_map<std::string, const PredictionRecord*> by_id;
        for (const auto& r : log) by_id.emplace(r.sample_id, &r);
        ModelView v;
        for (const auto& id : ids) {
            const PredictionRecord& pr = *by_id.at(id);
            const AnnotationRecord& rec = in.records[record_index.at(id)];
            v.preds.push_back({id, pr.mean_probs});
            v.records.push_back(rec);
            v.labels.push_back(normalize_counts(rec, cfg.schema));
            v.jsd.push_back(jsd(v.labels.back().probs, pr.mean_probs));
        }
        v.pairs_by_sample = expand_pairs_grouped(v.preds, v.records);
        std::vector<PairSample> flat;
        for (const auto& g : v.pairs_by_sample) flat.insert(flat.end(), g.begin(), g.end());
        v.calibration = calibration_report(flat, cfg.calibration);
        v.accuracy = accuracy(v.preds, v.labels);
        return v;
    };

    AnalysisOutputs out;
    Json& report = out.report;
    report["version"] = 1;
    report["library_version"] = kLibraryVersion;
    report["seed"] = cfg.seed;
    report["mode"] = to_string(cfg.mode);
    report["analysis_split"] = cfg.analysis_split;
    report["n_samples"] = ids.size();
    // Locations stay out of the report so it does not depend on where a run was written.
    report["config"] = run_config_to_json(cfg);
    report["config"].erase("output_dir");
    report["config"].erase("paths");

    std::vector<std::string> absent;
    std::optional<ModelView> base, unc;
    Json models = Json::object();
    std::string calibration_csv = "model,bce,ece,mce,sce,ace,tace,n_pairs\n";
    auto model_json = [&](const ModelView& v, const char* name) {
        Json m;
        m["accuracy"] = v.accuracy;
        m["calibration"] = calibration_report_to_json(v.calibration);
        m["jsd"] = {{"mean", mean(v.jsd)}, {"sd", sample_sd(v.jsd)}};
        out.csv_files.emplace_back(std::string("reliability_") + name + ".csv", reliability_csv(v.calibration.bins));
        const auto& c = v.calibration;
        calibration_csv += std::string(name) + "," + io::format_double(c.bce) + "," + io::format_double(c.ece) + "," +
                           io::format_double(c.mce) + "," + io::format_double(c.sce) + "," + io::format_double(c.ace) +
                           "," + io::format_double(c.tace) + "," + std::to_string(c.n_pairs) + "\n";
        return m;
    };
    if (has_base) {
        base = build_view(*in.baseline);
        models["baseline"] = model_json(*base, "baseline");
    } else {
        absent.push_back("baseline");
    }
    if (has_unc) {
        unc = build_view(*in.uncnet);
        models["uncnet"] = model_json(*unc, "uncnet");
    }
    report["models"] = std::move(models);
    out.csv_files.emplace_back("calibration.csv", calibration_csv);

    // Paired comparison of per-sample JSD.
    if (base && unc) {
        Json tt;
        tt["baseline_jsd"] = {{"mean", mean(base->jsd)}, {"sd", sample_sd(base->jsd)}};
        tt["uncnet_jsd"] = {{"mean", mean(unc->jsd)}, {"sd", sample_sd(unc->jsd)}};
        try {
            tt["result"] = ttest_to_json(paired_ttest(base->jsd, unc->jsd));
        } catch (const Error& e) {
            tt["warning"] = e.what();
        }
        report["ttest_jsd"] = std::move(tt);
    } else {
        absent.push_back("ttest_jsd");
    }

    // Accuracy table.
    Json table = Json::array();
    if (base) table.push_back({{"model", "baseline"}, {"subset", "all"}, {"coverage", 1.0}, {"accuracy", base->accuracy}});
    if (unc) table.push_back({{"model", "uncnet"}, {"subset", "all"}, {"coverage", 1.0}, {"accuracy", unc->accuracy}});

    // Disagreement histogram over every labeled sample.
    {
        std::vector<double> all_d;
        for (const auto& rec : in.records) all_d.push_back(normalize_counts(rec, cfg.schema).disagreement);
        const auto hist = disagreement_histogram(all_d, cfg.histogram_bins);
        report["disagreement_histogram"] = histogram_to_json(hist);
        std::string csv = "lo,hi,count,density\n";
        for (std::size_t b = 0; b < hist.counts.size(); ++b)
            csv += io::format_double(hist.edges[b]) + "," + io::format_double(hist.edges[b + 1]) + "," +
                   std::to_string(hist.counts[b]) + "," + io::format_double(hist.densities[b]) + "\n";
        out.csv_files.emplace_back("disagreement_hist.csv", csv);
    }

    if (unc) {
        std::unordered_map<std::string, const PredictionRecord*> by_id;
        for (const auto& r : *in.uncnet) by_id.emplace(r.sample_id, &r);
        std::vector<double> ua, ue, ut, d;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const PredictionRecord& pr = *by_id.at(ids[i]);
            if (!pr.uncertainty) fail(ErrorKind::format, "uncnet record " + ids[i] + " carries no uncertainty");
            ua.push_back(pr.uncertainty->u_aleatoric);
            ue.push_back(pr.uncertainty->u_epistemic);
            ut.push_back(pr.uncertainty->u_total);
            d.push_back(unc->labels[i].disagreement);
        }
        const std::vector<std::pair<const char*, const std::vector<double>*>> kinds{{"Ua", &ua}, {"Ue", &ue}, {"Ut", &ut}};

        report["uncertainty"] = {{"mean_total", mean(ut)}, {"mean_aleatoric", mean(ua)}, {"mean_epistemic", mean(ue)},
                                 {"T", in.uncnet->front().probs.rows()}};

        Json corr;
        corr["Ua-d"] = safe_pearson(ua, d);
        corr["Ue-d"] = safe_pearson(ue, d);
        corr["Ua-JSD"] = safe_pearson(ua, unc->jsd);
        corr["Ue-JSD"] = safe_pearson(ue, unc->jsd);
        corr["Ut-JSD"] = safe_pearson(ut, unc->jsd);

        Json curves;
        std::string pct_csv = "kind,percentile,mean_uncertainty,bce,n_samples,n_pairs\n";
        for (const auto& [name, values] : kinds) {
            const auto curve = bce_vs_uncertainty_percentile(unc->pairs_by_sample, *values, cfg.calibration.quantiles);
            std::vector<double> pct, bce;
            for (const auto& p : curve) {
                pct.push_back(p.percentile);
                bce.push_back(p.bce);
                pct_csv += std::string(name) + "," + io::format_double(p.percentile) + "," +
                           io::format_double(p.mean_uncertainty) + "," + io::format_double(p.bce) + "," +
                           std::to_string(p.n_samples) + "," + std::to_string(p.n_pairs) + "\n";
            }
            corr[std::string(name) + "-BCE"] = safe_pearson(pct, bce);
            curves[name] = percentile_curve_to_json(curve);
        }
        report["correlations"] = std::move(corr);
        report["bce_percentile"] = std::move(curves);
        out.csv_files.emplace_back("bce_percentile.csv", pct_csv);

        Json rejection;
        std::string rej_csv = "kind,coverage,accuracy,n_kept\n";
        for (const auto& [name, values] : kinds) {
            const auto curve = rejection_curve(unc->preds, unc->labels, *values, cfg.coverages);
            rejection[name] = rejection_curve_to_json(curve);
            for (const auto& p : curve.points)
                rej_csv += std::string(name) + "," + io::format_double(p.coverage) + "," + io::format_double(p.accuracy) +
                           "," + std::to_string(p.n_kept) + "\n";
            const double tc = cfg.table_coverage;
            const auto at = rejection_curve(unc->preds, unc->labels, *values, std::span<const double>(&tc, 1));
            table.push_back({{"model", "uncnet"},
                             {"subset", std::string("low ") + name},
                             {"coverage", tc},
                             {"accuracy", at.points.front().accuracy}});
        }
        report["rejection"] = std::move(rejection);
        out.csv_files.emplace_back("rejection.csv", rej_csv);

        Json extremes;
        const std::size_t k = std::min(cfg.k_extremes, ids.size());
        std::unordered_map<std::string, double> d_by_id;
        for (std::size_t i = 0; i < ids.size(); ++i) d_by_id.emplace(ids[i], d[i]);
        auto mean_d = [&](const std::vector<std::string>& list) {
            if (list.empty()) return 0.0;
            double s = 0.0;
            for (const auto& id : list) s += d_by_id.at(id);
            return s / static_cast<double>(list.size());
        };
        for (const auto& [name, values] : kinds) {
            const Extremes e = rank_extremes(ids, *values, k);
            extremes[name] = {{"lowest", e.lowest},
                              {"highest", e.highest},
                              {"lowest_mean_d", mean_d(e.lowest)},
                              {"highest_mean_d", mean_d(e.highest)}};
        }
        report["extremes"] = std::move(extremes);

        std::string per_sample = "id,u_total,u_aleatoric,u_epistemic,disagreement,jsd,is_ood\n";
        std::vector<int> ood_of(ids.size(), -1);
        if (!in.is_ood.empty()) {
            for (std::size_t i = 0; i < ids.size(); ++i) ood_of[i] = in.is_ood.at(record_index.at(ids[i]));
        }
        for (std::size_t i = 0; i < ids.size(); ++i)
            per_sample += ids[i] + "," + io::format_double(ut[i]) + "," + io::format_double(ua[i]) + "," +
                          io::format_double(ue[i]) + "," + io::format_double(d[i]) + "," + io::format_double(unc->jsd[i]) +
                          "," + (ood_of[i] < 0 ? std::string() : std::to_string(ood_of[i])) + "\n";
        out.csv_files.emplace_back("per_sample_uncnet.csv", per_sample);

        // Epistemic uncertainty under feature shift, when OOD flags are known.
        if (!in.is_ood.empty()) {
            std::vector<double> ue_ood, ue_id, d_ood, d_id;
            for (std::size_t i = 0; i < ids.size(); ++i) {
                (ood_of[i] ? ue_ood : ue_id).push_back(ue[i]);
                (ood_of[i] ? d_ood : d_id).push_back(d[i]);
            }
            Json shift;
            shift["n_ood"] = ue_ood.size();
            shift["n_id"] = ue_id.size();
            if (ue_ood.size() >= 2 && ue_id.size() >= 2) {
                shift["mean_Ue_ood"] = mean(ue_ood);
                shift["mean_Ue_id"] = mean(ue_id);
                shift["mean_d_ood"] = mean(d_ood);
                shift["mean_d_id"] = mean(d_id);
                try {
                    const TTestResult w = welch_ttest(ue_ood, ue_id);
                    shift["welch"] = ttest_to_json(w);
                    shift["one_sided_p"] = w.t_statistic > 0.0 ? 0.5 * w.p_value : 1.0 - 0.5 * w.p_value;
                } catch (const Error& e) {
                    shift["warning"] = e.what();
                }
            } else {
                shift["warning"] = "fewer than two samples in a group";
            }
            report["shift"] = std::move(shift);
        } else {
            absent.push_back("shift");
        }
    } else {
        for (const char* s : {"uncertainty", "correlations", "bce_percentile", "rejection", "extremes", "shift"})
            absent.push_back(s);
    }
    report["accuracy_table"] = std::move(table);
    report["sections_absent"] = absent;
    return out;
}

void cmd_analyze(const RunConfig& cfg, std::ostream& log) {
    AnalysisInputs in;
    in.records = load_labels(cfg.paths.labels, cfg.schema);
    std::vector<std::string> ids;
    for (const auto& r : in.records) ids.push_back(r.sample_id);
    in.is_ood = load_ood_flags(cfg.paths.sidecar, ids);
    for (Mode model : models_of(cfg.mode)) {
        auto log_records = parse_prediction_log(io::read_file(predictions_path(cfg, model)));
        (model == Mode::baseline ? in.baseline : in.uncnet) = std::move(log_records);
    }
    const AnalysisOutputs out = analyze(cfg, in);
    ensure_dir(cfg.output_dir);
    write_json(report_path(cfg), out.report);
    for (const auto& [name, contents] : out.csv_files) io::write_file_atomic(cfg.output_dir / name, contents);
    log << "analyze: n=" << out.report["n_samples"].get<std::size_t>() << " report=" << report_path(cfg).string() << "\n";
}

int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::usage: return 2;
        case ErrorKind::degenerate_input:
        case ErrorKind::training_diverged: return 4;
        default: return 3;
    }
}

}  // namespace uncproxy
