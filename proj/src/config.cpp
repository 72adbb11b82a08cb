#include "cfvae/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace cfvae {

namespace {

std::string trim(const std::string &s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_list(const std::string &s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(s);
    while (std::getline(ss, cur, sep)) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

[[noreturn]] void fail(const std::string &origin, int line, const std::string &msg) {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
}

std::string key_name(const std::string &section, const std::string &key) {
    return section.empty() ? key : "[" + section + "] " + key;
}

} // namespace

ConfigDoc ConfigDoc::parse_string(const std::string &text, const std::string &origin) {
    ConfigDoc doc;
    doc.origin_ = origin;
    std::stringstream ss(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']') fail(origin, lineno, "unterminated section header: " + t);
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty()) fail(origin, lineno, "empty section name");
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) fail(origin, lineno, "expected key = value, got: " + t);
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) fail(origin, lineno, "empty key");
        doc.entries_.push_back({section, key, value, lineno});
    }
    return doc;
}

ConfigDoc ConfigDoc::parse_file(const std::string &path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_string(ss.str(), path);
}

bool ConfigDoc::has(const std::string &section, const std::string &key) const {
    for (const auto &e : entries_)
        if (e.section == section && e.key == key) return true;
    return false;
}

std::vector<std::string> ConfigDoc::values(const std::string &section,
                                           const std::string &key) const {
    std::vector<std::string> out;
    for (const auto &e : entries_)
        if (e.section == section && e.key == key) out.push_back(e.value);
    return out;
}

std::string ConfigDoc::get(const std::string &section, const std::string &key) const {
    const auto v = values(section, key);
    if (v.empty()) throw ConfigError(origin_ + ": missing " + key_name(section, key));
    if (v.size() > 1) throw ConfigError(origin_ + ": duplicate " + key_name(section, key));
    return v[0];
}

std::string ConfigDoc::get_or(const std::string &section, const std::string &key,
                              const std::string &fallback) const {
    const auto v = values(section, key);
    if (v.empty()) return fallback;
    if (v.size() > 1) throw ConfigError(origin_ + ": duplicate " + key_name(section, key));
    return v[0];
}

namespace {

double parse_double(const ConfigDoc &doc, const std::string &section, const std::string &key,
                    const std::string &raw) {
    std::size_t pos = 0;
    double value = 0.0;
    try {
        value = std::stod(raw, &pos);
    } catch (const std::exception &) {
        pos = 0;
    }
    if (pos != raw.size() || raw.empty())
        throw ConfigError(doc.origin() + ": " + key_name(section, key) +
                          " expects a number, got '" + raw + "'");
    return value;
}

long long parse_int(const ConfigDoc &doc, const std::string &section, const std::string &key,
                    const std::string &raw) {
    std::size_t pos = 0;
    long long value = 0;
    try {
        value = std::stoll(raw, &pos);
    } catch (const std::exception &) {
        pos = 0;
    }
    if (pos != raw.size() || raw.empty())
        throw ConfigError(doc.origin() + ": " + key_name(section, key) +
                          " expects an integer, got '" + raw + "'");
    return value;
}

} // namespace

double ConfigDoc::get_double(const std::string &section, const std::string &key) const {
    return parse_double(*this, section, key, get(section, key));
}

double ConfigDoc::get_double_or(const std::string &section, const std::string &key,
                                double fallback) const {
    if (!has(section, key)) return fallback;
    return get_double(section, key);
}

long long ConfigDoc::get_int(const std::string &section, const std::string &key) const {
    return parse_int(*this, section, key, get(section, key));
}

long long ConfigDoc::get_int_or(const std::string &section, const std::string &key,
                                long long fallback) const {
    if (!has(section, key)) return fallback;
    return get_int(section, key);
}

std::uint64_t ConfigDoc::get_u64_or(const std::string &section, const std::string &key,
                                    std::uint64_t fallback) const {
    if (!has(section, key)) return fallback;
    const std::string raw = get(section, key);
    std::size_t pos = 0;
    std::uint64_t value = 0;
    try {
        value = std::stoull(raw, &pos);
    } catch (const std::exception &) {
        pos = 0;
    }
    if (pos != raw.size() || raw.empty())
        throw ConfigError(origin_ + ": " + key_name(section, key) +
                          " expects a non-negative integer, got '" + raw + "'");
    return value;
}

bool ConfigDoc::get_bool_or(const std::string &section, const std::string &key,
                            bool fallback) const {
    if (!has(section, key)) return fallback;
    std::string raw = get(section, key);
    std::transform(raw.begin(), raw.end(), raw.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (raw == "true" || raw == "1" || raw == "yes" || raw == "on") return true;
    if (raw == "false" || raw == "0" || raw == "no" || raw == "off") return false;
    throw ConfigError(origin_ + ": " + key_name(section, key) + " expects a boolean, got '" +
                      raw + "'");
}

std::vector<std::string> ConfigDoc::get_list(const std::string &section,
                                             const std::string &key) const {
    if (!has(section, key)) return {};
    return split_list(get(section, key), ',');
}

DatasetKind dataset_kind_from_string(const std::string &s) {
    if (s == "law") return DatasetKind::Law;
    if (s == "adult") return DatasetKind::Adult;
    if (s == "synthetic") return DatasetKind::Synthetic;
    if (s == "archive") return DatasetKind::Archive;
    if (s == "demo-law") return DatasetKind::DemoLaw;
    if (s == "demo-adult") return DatasetKind::DemoAdult;
    throw ConfigError("unknown dataset kind: " + s);
}

std::string to_string(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::Law: return "law";
        case DatasetKind::Adult: return "adult";
        case DatasetKind::Synthetic: return "synthetic";
        case DatasetKind::Archive: return "archive";
        case DatasetKind::DemoLaw: return "demo-law";
        case DatasetKind::DemoAdult: return "demo-adult";
    }
    return "?";
}

namespace {

TransformMode transform_mode_from_string(const std::string &s) {
    if (s == "exact") return TransformMode::Exact;
    if (s == "one-step") return TransformMode::OneStep;
    throw ConfigError("unknown transform_mode: " + s + " (expected exact or one-step)");
}

std::string to_string(TransformMode mode) {
    return mode == TransformMode::Exact ? "exact" : "one-step";
}

std::vector<int> parse_hidden(const ConfigDoc &doc, const std::string &section,
                              const std::string &key, const std::vector<int> &fallback) {
    if (!doc.has(section, key)) return fallback;
    std::vector<int> widths;
    for (const auto &tok : doc.get_list(section, key)) {
        const long long w = parse_int(doc, section, key, tok);
        if (w <= 0)
            throw ConfigError(doc.origin() + ": " + key_name(section, key) +
                              " widths must be positive");
        widths.push_back(static_cast<int>(w));
    }
    return widths; // empty list = linear encoder/decoder
}

// "column == value" with a numeric decoded value.
std::pair<std::string, double> parse_filter(const ConfigDoc &doc, const std::string &raw) {
    const std::size_t pos = raw.find("==");
    if (pos == std::string::npos)
        throw ConfigError(doc.origin() + ": [audit] filter expects 'column == value', got '" +
                          raw + "'");
    const std::string name = trim(raw.substr(0, pos));
    const std::string value = trim(raw.substr(pos + 2));
    if (name.empty()) throw ConfigError(doc.origin() + ": [audit] filter has an empty column");
    return {name, parse_double(doc, "audit", "filter", value)};
}

// "column: first <-> second".
std::pair<std::string, std::pair<std::string, std::string>> parse_swap(const ConfigDoc &doc,
                                                                       const std::string &raw) {
    const std::size_t colon = raw.find(':');
    const std::size_t arrow = raw.find("<->");
    if (colon == std::string::npos || arrow == std::string::npos || arrow < colon)
        throw ConfigError(doc.origin() +
                          ": [audit] swap expects 'column: first <-> second', got '" + raw + "'");
    const std::string name = trim(raw.substr(0, colon));
    const std::string first = trim(raw.substr(colon + 1, arrow - colon - 1));
    const std::string second = trim(raw.substr(arrow + 3));
    if (name.empty() || first.empty() || second.empty())
        throw ConfigError(doc.origin() + ": [audit] swap has an empty part in '" + raw + "'");
    return {name, {first, second}};
}

const std::map<std::string, std::set<std::string>> &known_keys() {
    static const std::map<std::string, std::set<std::string>> table{
        {"", {"seed", "output_dir"}},
        {"dataset",
         {"kind", "path", "train_fraction", "subsample", "standardize", "law_gender", "law_race",
          "law_lsat", "law_gpa", "law_fya", "n_samples", "noise_scale", "sensitive_effect"}},
        {"graph", {"path"}},
        {"model",
         {"d_za", "d_zx", "gamma", "opr_weight", "use_causal_constraints", "transform_mode",
          "encoder_hidden", "decoder_hidden"}},
        {"train", {"epochs", "batch_size", "learning_rate", "optimizer"}},
        {"predictors", {"repeats", "include", "epochs", "learning_rate", "batch_size",
                        "mlp_hidden"}},
        {"audit",
         {"test_split_only", "max_rows", "feature_sets", "write_predictions", "filter", "swap"}},
        {"ablation", {"seeds", "arms"}},
    };
    return table;
}

void reject_unknown(const ConfigDoc &doc) {
    const auto &table = known_keys();
    for (const auto &e : doc.entries()) {
        const auto sec = table.find(e.section);
        if (sec == table.end())
            fail(doc.origin(), e.line, "unknown section [" + e.section + "]");
        if (!sec->second.count(e.key))
            fail(doc.origin(), e.line, "unknown key '" + e.key + "' in [" +
                                           (e.section.empty() ? "top level" : e.section) + "]");
    }
}

} // namespace

ExperimentConfig experiment_config_from_doc(const ConfigDoc &doc) {
    reject_unknown(doc);
    ExperimentConfig cfg;

    cfg.seed = doc.get_u64_or("", "seed", cfg.seed);
    cfg.output_dir = doc.get_or("", "output_dir", cfg.output_dir);

    DatasetConfig &ds = cfg.dataset;
    ds.kind = dataset_kind_from_string(doc.get_or("dataset", "kind", "synthetic"));
    ds.path = doc.get_or("dataset", "path", "");
    ds.train_fraction = doc.get_double_or("dataset", "train_fraction", ds.train_fraction);
    ds.subsample = static_cast<Index>(doc.get_int_or("dataset", "subsample", 0));
    ds.standardize = doc.get_bool_or("dataset", "standardize", true);
    ds.law_columns.gender = doc.get_or("dataset", "law_gender", ds.law_columns.gender);
    ds.law_columns.race = doc.get_or("dataset", "law_race", ds.law_columns.race);
    ds.law_columns.lsat = doc.get_or("dataset", "law_lsat", ds.law_columns.lsat);
    ds.law_columns.gpa = doc.get_or("dataset", "law_gpa", ds.law_columns.gpa);
    ds.law_columns.fya = doc.get_or("dataset", "law_fya", ds.law_columns.fya);
    ds.n_samples = static_cast<Index>(doc.get_int_or("dataset", "n_samples", ds.n_samples));
    ds.noise_scale = doc.get_double_or("dataset", "noise_scale", ds.noise_scale);
    ds.sensitive_effect =
        doc.get_double_or("dataset", "sensitive_effect", ds.sensitive_effect);

    cfg.graph_path = doc.get_or("graph", "path", "");
    if (!cfg.graph_path.empty()) {
        if (!std::filesystem::exists(cfg.graph_path))
            throw ConfigError("graph file does not exist: " + cfg.graph_path);
        cfg.graph = load_concept_graph(cfg.graph_path);
    }

    CfvaeConfig &m = cfg.train.cfvae;
    m.use_causal_constraints = doc.get_bool_or("model", "use_causal_constraints", true);
    m.transform_mode =
        transform_mode_from_string(doc.get_or("model", "transform_mode", "exact"));
    m.gamma = doc.get_double_or("model", "gamma", m.gamma);
    m.opr_weight = doc.get_double_or("model", "opr_weight", m.opr_weight);
    if (m.use_causal_constraints && cfg.graph.n > 0 && !doc.has("model", "d_zx"))
        m.d_zx = cfg.graph.n;
    else
        m.d_zx = static_cast<Index>(doc.get_int_or("model", "d_zx", m.d_zx));
    m.d_za = static_cast<Index>(doc.get_int_or("model", "d_za", m.d_za));
    m.encoder_hidden = parse_hidden(doc, "model", "encoder_hidden", m.encoder_hidden);
    m.decoder_hidden = parse_hidden(doc, "model", "decoder_hidden", m.decoder_hidden);
    if (m.use_causal_constraints && cfg.graph.n > 0) m.C = cfg.graph.adjacency();

    cfg.train.epochs = static_cast<int>(doc.get_int_or("train", "epochs", cfg.train.epochs));
    cfg.train.batch_size =
        static_cast<Index>(doc.get_int_or("train", "batch_size", cfg.train.batch_size));
    cfg.train.learning_rate =
        doc.get_double_or("train", "learning_rate", cfg.train.learning_rate);
    cfg.train.optimizer = doc.get_or("train", "optimizer", cfg.train.optimizer);
    cfg.train.seed = cfg.seed;
    m.seed = cfg.seed; // train() re-derives; kept consistent for direct use

    cfg.predictor_repeats =
        static_cast<int>(doc.get_int_or("predictors", "repeats", cfg.predictor_repeats));
    cfg.predictor_include = doc.get_list("predictors", "include");
    cfg.predictor_epochs =
        static_cast<int>(doc.get_int_or("predictors", "epochs", cfg.predictor_epochs));
    cfg.predictor_learning_rate =
        doc.get_double_or("predictors", "learning_rate", cfg.predictor_learning_rate);
    cfg.predictor_batch_size = static_cast<Index>(
        doc.get_int_or("predictors", "batch_size", cfg.predictor_batch_size));
    cfg.predictor_mlp_hidden =
        parse_hidden(doc, "predictors", "mlp_hidden", cfg.predictor_mlp_hidden);

    if (doc.has("audit", "feature_sets")) {
        cfg.feature_sets.clear();
        for (const auto &name : doc.get_list("audit", "feature_sets"))
            cfg.feature_sets.emplace_back(name, feature_set_kind_from_string(name));
    }
    cfg.audit.test_split_only = doc.get_bool_or("audit", "test_split_only", true);
    cfg.audit.max_rows = static_cast<Index>(doc.get_int_or("audit", "max_rows", 0));
    for (const auto &raw : doc.values("audit", "filter"))
        cfg.audit.filters.push_back(parse_filter(doc, raw));
    for (const auto &raw : doc.values("audit", "swap")) {
        auto parsed = parse_swap(doc, raw);
        cfg.audit.category_swaps[parsed.first] = parsed.second;
    }
    cfg.write_predictions = doc.get_bool_or("audit", "write_predictions", true);

    if (doc.has("ablation", "seeds")) {
        cfg.ablation_seeds.clear();
        for (const auto &tok : doc.get_list("ablation", "seeds")) {
            std::size_t pos = 0;
            std::uint64_t v = 0;
            try {
                v = std::stoull(tok, &pos);
            } catch (const std::exception &) {
                pos = 0;
            }
            if (pos != tok.size() || tok.empty())
                throw ConfigError(doc.origin() + ": [ablation] seeds expects integers, got '" +
                                  tok + "'");
            cfg.ablation_seeds.push_back(v);
        }
    }
    cfg.ablation_arms = doc.get_list("ablation", "arms");

    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string &path) {
    return experiment_config_from_doc(ConfigDoc::parse_file(path));
}

void ExperimentConfig::validate() const {
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
    if (!(dataset.train_fraction > 0.0 && dataset.train_fraction < 1.0))
        throw ConfigError("train_fraction must lie in (0, 1)");
    if (dataset.subsample < 0) throw ConfigError("subsample must be >= 0");

    const bool needs_path = dataset.kind == DatasetKind::Law ||
                            dataset.kind == DatasetKind::Adult ||
                            dataset.kind == DatasetKind::Archive;
    if (needs_path) {
        if (dataset.path.empty())
            throw ConfigError("dataset kind " + to_string(dataset.kind) +
                              " requires [dataset] path");
        if (!std::filesystem::exists(dataset.path))
            throw ConfigError("dataset path does not exist: " + dataset.path);
    }
    if (dataset.kind == DatasetKind::Synthetic) {
        if (dataset.n_samples <= 0) throw ConfigError("n_samples must be positive");
        if (graph.n <= 0)
            throw ConfigError("synthetic data needs a concept graph ([graph] path)");
        if (!(dataset.noise_scale > 0.0)) throw ConfigError("noise_scale must be positive");
    }

    const CfvaeConfig &m = train.cfvae;
    if (m.use_causal_constraints) {
        if (graph.n <= 0)
            throw ConfigError("use_causal_constraints requires a concept graph ([graph] path)");
        if (m.d_zx != graph.n)
            throw ConfigError("d_zx (" + std::to_string(m.d_zx) +
                              ") must equal the concept count (" + std::to_string(graph.n) + ")");
    }
    m.validate();
    train.validate(std::numeric_limits<Index>::max());

    if (predictor_repeats < 1) throw ConfigError("predictor repeats must be >= 1");
    if (predictor_epochs < 1) throw ConfigError("predictor epochs must be >= 1");
    if (!(predictor_learning_rate > 0.0))
        throw ConfigError("predictor learning_rate must be positive");
    if (predictor_batch_size < 1) throw ConfigError("predictor batch_size must be >= 1");

    if (feature_sets.empty()) throw ConfigError("feature_sets must not be empty");
    std::set<std::string> seen;
    for (const auto &[name, kind] : feature_sets) {
        (void)kind;
        if (!seen.insert(name).second)
            throw ConfigError("duplicate feature set: " + name);
    }
    if (audit.max_rows < 0) throw ConfigError("audit max_rows must be >= 0");

    if (ablation_seeds.empty()) throw ConfigError("ablation seeds must not be empty");
    static const std::set<std::string> arms{"full-features", "no-constraints",
                                            "constraints-tcr", "cfvae"};
    for (const auto &arm : ablation_arms)
        if (!arms.count(arm)) throw ConfigError("unknown ablation arm: " + arm);
}

std::string serialize_experiment_config(const ExperimentConfig &cfg) {
    std::ostringstream out;
    char buf[64];
    const auto num = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    const auto joined = [](const std::vector<int> &v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i)
            s += (i ? "," : "") + std::to_string(v[i]);
        return s;
    };

    out << "# effective experiment configuration\n";
    out << "seed = " << cfg.seed << "\n";
    out << "output_dir = " << cfg.output_dir << "\n\n";

    out << "[dataset]\n";
    out << "kind = " << to_string(cfg.dataset.kind) << "\n";
    if (!cfg.dataset.path.empty()) out << "path = " << cfg.dataset.path << "\n";
    out << "train_fraction = " << num(cfg.dataset.train_fraction) << "\n";
    out << "subsample = " << cfg.dataset.subsample << "\n";
    out << "standardize = " << (cfg.dataset.standardize ? "true" : "false") << "\n";
    if (cfg.dataset.kind == DatasetKind::Law || cfg.dataset.kind == DatasetKind::DemoLaw) {
        const LawColumnMap &lc = cfg.dataset.law_columns;
        out << "law_gender = " << lc.gender << "\n";
        out << "law_race = " << lc.race << "\n";
        out << "law_lsat = " << lc.lsat << "\n";
        out << "law_gpa = " << lc.gpa << "\n";
        out << "law_fya = " << lc.fya << "\n";
    }
    if (cfg.dataset.kind == DatasetKind::Synthetic) {
        out << "n_samples = " << cfg.dataset.n_samples << "\n";
        out << "noise_scale = " << num(cfg.dataset.noise_scale) << "\n";
        out << "sensitive_effect = " << num(cfg.dataset.sensitive_effect) << "\n";
    }
    out << "\n";

    if (!cfg.graph_path.empty()) out << "[graph]\npath = " << cfg.graph_path << "\n\n";

    const CfvaeConfig &m = cfg.train.cfvae;
    out << "[model]\n";
    out << "d_za = " << m.d_za << "\n";
    out << "d_zx = " << m.d_zx << "\n";
    out << "gamma = " << num(m.gamma) << "\n";
    out << "opr_weight = " << num(m.opr_weight) << "\n";
    out << "use_causal_constraints = " << (m.use_causal_constraints ? "true" : "false") << "\n";
    out << "transform_mode = " << to_string(m.transform_mode) << "\n";
    out << "encoder_hidden = " << joined(m.encoder_hidden) << "\n";
    out << "decoder_hidden = " << joined(m.decoder_hidden) << "\n\n";

    out << "[train]\n";
    out << "epochs = " << cfg.train.epochs << "\n";
    out << "batch_size = " << cfg.train.batch_size << "\n";
    out << "learning_rate = " << num(cfg.train.learning_rate) << "\n";
    out << "optimizer = " << cfg.train.optimizer << "\n\n";

    out << "[predictors]\n";
    out << "repeats = " << cfg.predictor_repeats << "\n";
    if (!cfg.predictor_include.empty()) {
        out << "include = ";
        for (std::size_t i = 0; i < cfg.predictor_include.size(); ++i)
            out << (i ? "," : "") << cfg.predictor_include[i];
        out << "\n";
    }
    out << "epochs = " << cfg.predictor_epochs << "\n";
    out << "learning_rate = " << num(cfg.predictor_learning_rate) << "\n";
    out << "batch_size = " << cfg.predictor_batch_size << "\n";
    out << "mlp_hidden = " << joined(cfg.predictor_mlp_hidden) << "\n\n";

    out << "[audit]\n";
    out << "test_split_only = " << (cfg.audit.test_split_only ? "true" : "false") << "\n";
    out << "max_rows = " << cfg.audit.max_rows << "\n";
    out << "feature_sets = ";
    for (std::size_t i = 0; i < cfg.feature_sets.size(); ++i)
        out << (i ? "," : "") << cfg.feature_sets[i].first;
    out << "\n";
    out << "write_predictions = " << (cfg.write_predictions ? "true" : "false") << "\n";
    for (const auto &[name, value] : cfg.audit.filters)
        out << "filter = " << name << " == " << num(value) << "\n";
    for (const auto &[name, swap] : cfg.audit.category_swaps)
        out << "swap = " << name << ": " << swap.first << " <-> " << swap.second << "\n";
    out << "\n";

    out << "[ablation]\n";
    out << "seeds = ";
    for (std::size_t i = 0; i < cfg.ablation_seeds.size(); ++i)
        out << (i ? "," : "") << cfg.ablation_seeds[i];
    out << "\n";
    if (!cfg.ablation_arms.empty()) {
        out << "arms = ";
        for (std::size_t i = 0; i < cfg.ablation_arms.size(); ++i)
            out << (i ? "," : "") << cfg.ablation_arms[i];
        out << "\n";
    }
    return out.str();
}

} // namespace cfvae
