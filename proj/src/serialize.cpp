#include "uncproxy/serialize.hpp"

#include "uncproxy/error.hpp"
#include "uncproxy/io.hpp"

namespace uncproxy {

namespace {

template <typename T>
T get_field(const Json& obj, const char* key, const char* where) {
    if (!obj.is_object() || !obj.contains(key)) fail(ErrorKind::format, std::string(where) + ": missing '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, std::string(where) + ": bad '" + key + "': " + e.what());
    }
}

}  // namespace

Json params_to_json(const NetworkParams& params) {
    Json layers = Json::array();
    for (const auto& l : params.layers) {
        Json jl;
        jl["rows"] = l.weight.rows();
        jl["cols"] = l.weight.cols();
        jl["weights"] = std::vector<double>(l.weight.data().begin(), l.weight.data().end());
        jl["bias"] = l.bias;
        jl["activation"] = l.activation == Activation::relu ? "relu" : "identity";
        layers.push_back(std::move(jl));
    }
    Json doc;
    doc["version"] = kParamsFormatVersion;
    doc["layers"] = std::move(layers);
    return doc;
}

NetworkParams params_from_json(const Json& doc) {
    if (get_field<int>(doc, "version", "params") != kParamsFormatVersion)
        fail(ErrorKind::format, "params: unsupported version");
    const auto& layers = doc.at("layers");
    if (!layers.is_array()) fail(ErrorKind::format, "params: 'layers' is not an array");
    NetworkParams params;
    for (const auto& jl : layers) {
        const auto rows = get_field<std::size_t>(jl, "rows", "params layer");
        const auto cols = get_field<std::size_t>(jl, "cols", "params layer");
        auto weights = get_field<std::vector<double>>(jl, "weights", "params layer");
        const auto act = get_field<std::string>(jl, "activation", "params layer");
        if (act != "relu" && act != "identity") fail(ErrorKind::format, "params: unknown activation '" + act + "'");
        Layer layer;
        try {
            layer.weight = Matrix(rows, cols, std::move(weights));
        } catch (const Error& e) {
            fail(ErrorKind::format, std::string("params: ") + e.what());
        }
        layer.bias = get_field<std::vector<double>>(jl, "bias", "params layer");
        layer.activation = act == "relu" ? Activation::relu : Activation::identity;
        params.layers.push_back(std::move(layer));
    }
    try {
        params.validate();
    } catch (const Error& e) {
        fail(ErrorKind::format, std::string("params: ") + e.what());
    }
    return params;
}

Json synth_config_to_json(const SynthConfig& c) {
    Json j;
    j["n_samples"] = c.n_samples;
    j["n_classes"] = c.n_classes;
    j["feature_dim"] = c.feature_dim;
    j["component_means"] = c.component_means;
    j["component_scale"] = c.component_scale;
    j["annotators_k"] = c.annotators_k;
    j["ood_fraction"] = c.ood_fraction;
    j["ood_shift"] = c.ood_shift;
    j["seed"] = c.seed;
    return j;
}

SynthConfig synth_config_from_json(const Json& j) {
    SynthConfig c;
    const char* where = "synth config";
    c.n_samples = get_field<std::size_t>(j, "n_samples", where);
    c.n_classes = get_field<std::size_t>(j, "n_classes", where);
    c.feature_dim = get_field<std::size_t>(j, "feature_dim", where);
    c.component_means = get_field<std::vector<std::vector<double>>>(j, "component_means", where);
    c.component_scale = get_field<double>(j, "component_scale", where);
    c.annotators_k = get_field<std::size_t>(j, "annotators_k", where);
    if (j.contains("ood_fraction")) c.ood_fraction = get_field<double>(j, "ood_fraction", where);
    if (j.contains("ood_shift")) c.ood_shift = get_field<std::vector<double>>(j, "ood_shift", where);
    if (j.contains("seed")) c.seed = get_field<std::uint64_t>(j, "seed", where);
    return c;
}

Json calibration_report_to_json(const CalibrationReport& r) {
    Json j;
    j["bce"] = r.bce;
    j["ece"] = r.ece;
    j["mce"] = r.mce;
    j["sce"] = r.sce;
    j["ace"] = r.ace;
    j["tace"] = r.tace;
    j["n_pairs"] = r.n_pairs;
    j["tace_empty_classes"] = r.tace_empty_classes;
    Json bins;
    std::vector<double> lo, hi, conf, acc;
    std::vector<std::size_t> count;
    for (const auto& b : r.bins) {
        lo.push_back(b.lo);
        hi.push_back(b.hi);
        count.push_back(b.count);
        conf.push_back(b.avg_confidence);
        acc.push_back(b.accuracy);
    }
    bins["lo"] = lo;
    bins["hi"] = hi;
    bins["count"] = count;
    bins["avg_confidence"] = conf;
    bins["accuracy"] = acc;
    j["bins"] = std::move(bins);
    j["config"] = {{"B", r.config.bins}, {"R", r.config.ranges}, {"epsilon", r.config.epsilon}};
    return j;
}

Json correlation_to_json(const CorrelationResult& r) {
    return Json{{"r", r.r}, {"p_value", r.p_value}, {"n", r.n}};
}

Json ttest_to_json(const TTestResult& t) {
    return Json{{"t", t.t_statistic}, {"df", t.df}, {"p_value", t.p_value}};
}

Json rejection_curve_to_json(const RejectionCurve& curve) {
    Json arr = Json::array();
    for (const auto& p : curve.points)
        arr.push_back({{"coverage", p.coverage}, {"accuracy", p.accuracy}, {"n_kept", p.n_kept}});
    return arr;
}

Json percentile_curve_to_json(std::span<const PercentilePoint> curve) {
    Json arr = Json::array();
    for (const auto& p : curve)
        arr.push_back({{"percentile", p.percentile},
                       {"mean_uncertainty", p.mean_uncertainty},
                       {"bce", p.bce},
                       {"n_samples", p.n_samples},
                       {"n_pairs", p.n_pairs}});
    return arr;
}

Json histogram_to_json(const DensityHistogram& h) {
    return Json{{"edges", h.edges}, {"densities", h.densities}, {"counts", h.counts}};
}

std::string format_features(std::span<const std::string> ids, const Matrix& features) {
    std::string out = "id";
    for (std::size_t j = 0; j < features.cols(); ++j) out += ",f_" + std::to_string(j);
    out += '\n';
    for (std::size_t i = 0; i < features.rows(); ++i) {
        out += ids[i];
        for (double v : features.row(i)) out += "," + io::format_double(v);
        out += '\n';
    }
    return out;
}

FeatureTable parse_features(std::string_view text) {
    const auto lines = io::split_lines(text);
    if (lines.empty()) fail(ErrorKind::parse, "features file is empty (no header)");
    const auto header = io::split_fields(lines[0]);
    if (header.empty() || header[0] != "id") fail(ErrorKind::schema_mismatch, "features header must start with 'id'");
    const std::size_t D = header.size() - 1;
    for (std::size_t j = 0; j < D; ++j)
        if (header[j + 1] != "f_" + std::to_string(j))
            fail(ErrorKind::schema_mismatch, "features header column " + std::to_string(j + 1) + " should be f_" +
                                                 std::to_string(j));
    FeatureTable table;
    std::vector<double> data;
    data.reserve((lines.size() - 1) * D);
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto fields = io::split_fields(lines[li]);
        if (fields.size() != D + 1)
            fail(ErrorKind::parse, "line " + std::to_string(li + 1) + ": expected " + std::to_string(D + 1) + " fields");
        table.ids.emplace_back(fields[0]);
        for (std::size_t j = 0; j < D; ++j) data.push_back(io::parse_double(fields[j + 1], li + 1));
    }
    try {
        table.features = Matrix(table.ids.size(), D, std::move(data));
    } catch (const Error& e) {
        fail(ErrorKind::parse, std::string("features: ") + e.what());
    }
    return table;
}

std::string reliability_csv(std::span<const ReliabilityBin> bins) {
    std::string out = "lo,hi,count,avg_confidence,accuracy\n";
    for (const auto& b : bins)
        out += io::format_double(b.lo) + "," + io::format_double(b.hi) + "," + std::to_string(b.count) + "," +
               io::format_double(b.avg_confidence) + "," + io::format_double(b.accuracy) + "\n";
    return out;
}

}  // namespace uncproxy
