#include "cfvae/dataset.hpp"

#include "cfvae/csv.hpp"
#include "cfvae/rng.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace cfvae {

namespace {

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_value(const std::string &field, const std::string &where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
        return v;
    } catch (const std::exception &) {
        throw IngestError("unparseable numeric '" + field + "' at " + where);
    }
}

} // namespace

std::string to_string(ColumnKind kind) {
    switch (kind) {
        case ColumnKind::Continuous: return "continuous";
        case ColumnKind::Binary: return "binary";
        case ColumnKind::Categorical: return "categorical";
    }
    return "?";
}

std::string to_string(ColumnRole role) {
    switch (role) {
        case ColumnRole::Sensitive: return "sensitive";
        case ColumnRole::Covariate: return "covariate";
        case ColumnRole::Target: return "target";
    }
    return "?";
}

ColumnKind column_kind_from_string(const std::string &s) {
    if (s == "continuous") return ColumnKind::Continuous;
    if (s == "binary") return ColumnKind::Binary;
    if (s == "categorical") return ColumnKind::Categorical;
    throw SchemaError("unknown column kind: " + s);
}

ColumnRole column_role_from_string(const std::string &s) {
    if (s == "sensitive") return ColumnRole::Sensitive;
    if (s == "covariate") return ColumnRole::Covariate;
    if (s == "target") return ColumnRole::Target;
    throw SchemaError("unknown column role: " + s);
}

void Schema::validate() const {
    if (columns.empty()) throw SchemaError("schema has no columns");
    int targets = 0, sensitive = 0;
    for (const auto &c : columns) {
        if (c.name.empty()) throw SchemaError("unnamed column");
        if (c.kind == ColumnKind::Categorical && c.categories.size() < 2)
            throw SchemaError("categorical column '" + c.name + "' needs >= 2 categories");
        if (c.kind != ColumnKind::Categorical && !c.categories.empty())
            throw SchemaError("non-categorical column '" + c.name + "' lists categories");
        if (c.role == ColumnRole::Target) ++targets;
        if (c.role == ColumnRole::Sensitive) ++sensitive;
    }
    for (std::size_t i = 0; i < columns.size(); ++i)
        for (std::size_t j = i + 1; j < columns.size(); ++j)
            if (columns[i].name == columns[j].name)
                throw SchemaError("duplicate column name: " + columns[i].name);
    if (targets != 1)
        throw SchemaError("schema needs exactly one target column, found " +
                          std::to_string(targets));
    if (sensitive == 0) throw SchemaError("schema needs at least one sensitive column");
}

Index Schema::encoded_width() const {
    Index w = 0;
    for (const auto &c : columns) w += c.encoded_width();
    return w;
}

Index Schema::encoded_width(ColumnRole role) const {
    Index w = 0;
    for (const auto &c : columns)
        if (c.role == role) w += c.encoded_width();
    return w;
}

Index Schema::encoded_offset(Index col) const {
    if (col < 0 || col >= static_cast<Index>(columns.size()))
        throw SchemaError("column index out of range: " + std::to_string(col));
    Index off = 0;
    for (Index i = 0; i < col; ++i) off += columns[i].encoded_width();
    return off;
}

std::vector<Index> Schema::columns_with_role(ColumnRole role) const {
    std::vector<Index> out;
    for (Index i = 0; i < static_cast<Index>(columns.size()); ++i)
        if (columns[i].role == role) out.push_back(i);
    return out;
}

Index Schema::column_index(const std::string &name) const {
    for (Index i = 0; i < static_cast<Index>(columns.size()); ++i)
        if (columns[i].name == name) return i;
    return -1;
}

std::vector<std::string> Schema::encoded_names() const {
    std::vector<std::string> names;
    for (const auto &c : columns) {
        if (c.kind == ColumnKind::Categorical)
            for (const auto &cat : c.categories) names.push_back(c.name + "=" + cat);
        else
            names.push_back(c.name);
    }
    return names;
}

TabularDataset TabularDataset::from_columns(Schema schema, const std::vector<Vector> &values) {
    schema.validate();
    if (values.size() != schema.columns.size())
        throw SchemaError("value column count " + std::to_string(values.size()) +
                          " != schema column count " + std::to_string(schema.columns.size()));
    const Index n = values.empty() ? 0 : values.front().size();
    for (const auto &v : values)
        if (v.size() != n) throw SchemaError("ragged value columns");

    TabularDataset ds;
    ds.rows = Matrix::Zero(n, schema.encoded_width());
    Index off = 0;
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        const ColumnSpec &spec = schema.columns[c];
        const Vector &v = values[c];
        if (spec.kind == ColumnKind::Categorical) {
            const Index k = spec.encoded_width();
            for (Index r = 0; r < n; ++r) {
                const double raw = v(r);
                const Index idx = static_cast<Index>(raw);
                if (raw != static_cast<double>(idx) || idx < 0 || idx >= k)
                    throw IngestError("category index " + std::to_string(raw) +
                                      " out of range for column '" + spec.name + "' at row " +
                                      std::to_string(r));
                ds.rows(r, off + idx) = 1.0;
            }
        } else {
            if (spec.kind == ColumnKind::Binary)
                for (Index r = 0; r < n; ++r)
                    if (v(r) != 0.0 && v(r) != 1.0)
                        throw IngestError("binary column '" + spec.name +
                                          "' has non-binary value at row " + std::to_string(r));
            ds.rows.col(off) = v;
        }
        off += spec.encoded_width();
    }
    ds.schema = std::move(schema);
    return ds;
}

Vector TabularDataset::decode_column(Index col) const {
    const ColumnSpec &spec = schema.columns.at(static_cast<std::size_t>(col));
    const Index off = schema.encoded_offset(col);
    Vector out(n());
    if (spec.kind == ColumnKind::Categorical) {
        const Index k = spec.encoded_width();
        for (Index r = 0; r < n(); ++r) {
            Index best = 0;
            for (Index j = 1; j < k; ++j)
                if (rows(r, off + j) > rows(r, off + best)) best = j;
            out(r) = static_cast<double>(best);
        }
    } else {
        out = rows.col(off);
    }
    return out;
}

std::vector<Index> TabularDataset::indices_of_split(int split) const {
    std::vector<Index> idx;
    for (Index r = 0; r < n(); ++r) {
        const int label = split_labels.empty() ? kSplitTrain : split_labels[r];
        if (split < 0 || label == split) idx.push_back(r);
    }
    return idx;
}

Matrix TabularDataset::rows_at(const std::vector<Index> &idx) const {
    Matrix out(static_cast<Index>(idx.size()), rows.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = rows.row(idx[i]);
    return out;
}

Matrix TabularDataset::role_block(ColumnRole role, int split) const {
    return block_of_rows(rows_at(indices_of_split(split)), role);
}

Matrix TabularDataset::block_of_rows(const Matrix &encoded_rows, ColumnRole role) const {
    if (encoded_rows.cols() != schema.encoded_width())
        throw SchemaError("row width " + std::to_string(encoded_rows.cols()) +
                          " != schema encoded width " + std::to_string(schema.encoded_width()));
    Matrix out(encoded_rows.rows(), schema.encoded_width(role));
    Index at = 0;
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        if (schema.columns[c].role != role) continue;
        const Index w = schema.columns[c].encoded_width();
        out.middleCols(at, w) = encoded_rows.middleCols(schema.encoded_offset(static_cast<Index>(c)), w);
        at += w;
    }
    return out;
}

Vector TabularDataset::target_values(int split) const {
    const auto targets = schema.columns_with_role(ColumnRole::Target);
    if (targets.empty()) throw SchemaError("dataset has no target column");
    const Index off = schema.encoded_offset(targets.front());
    if (schema.columns[targets.front()].kind == ColumnKind::Categorical)
        throw SchemaError("categorical target not supported");
    const auto idx = indices_of_split(split);
    Vector out(static_cast<Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Index>(i)) = rows(idx[i], off);
    return out;
}

void split_dataset(TabularDataset &ds, double train_fraction, std::uint64_t seed) {
    if (ds.n() == 0) throw IngestError("cannot split an empty dataset");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("train_fraction must be in (0, 1)");
    // The +1e-6 absorbs cases like 0.7 * 21790 landing just below an integer.
    const Index n_train = static_cast<Index>(
        std::floor(train_fraction * static_cast<double>(ds.n()) + 1e-6));
    std::vector<Index> order(static_cast<std::size_t>(ds.n()));
    for (Index i = 0; i < ds.n(); ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(seed);
    rng.shuffle(order);
    ds.split_labels.assign(static_cast<std::size_t>(ds.n()), kSplitTest);
    for (Index i = 0; i < n_train; ++i)
        ds.split_labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = kSplitTrain;
}

void subsample_dataset(TabularDataset &ds, Index max_rows, std::uint64_t seed) {
    if (max_rows <= 0) throw ConfigError("subsample size must be positive");
    if (max_rows >= ds.n()) return;
    std::vector<Index> order(static_cast<std::size_t>(ds.n()));
    for (Index i = 0; i < ds.n(); ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(seed);
    rng.shuffle(order);
    order.resize(static_cast<std::size_t>(max_rows));
    std::sort(order.begin(), order.end());
    ds.rows = ds.rows_at(order);
    if (!ds.split_labels.empty()) {
        std::vector<std::uint8_t> labels;
        labels.reserve(order.size());
        for (Index r : order) labels.push_back(ds.split_labels[static_cast<std::size_t>(r)]);
        ds.split_labels = std::move(labels);
    }
}

StandardizeStats standardize(TabularDataset &ds) {
    StandardizeStats stats;
    const auto train_idx = ds.indices_of_split(kSplitTrain);
    if (train_idx.empty()) throw IngestError("standardize: no training rows");
    std::vector<double> means, sds;
    for (std::size_t c = 0; c < ds.schema.columns.size(); ++c) {
        if (ds.schema.columns[c].kind != ColumnKind::Continuous) continue;
        const Index col = ds.schema.encoded_offset(static_cast<Index>(c));
        double mean = 0.0;
        for (Index r : train_idx) mean += ds.rows(r, col);
        mean /= static_cast<double>(train_idx.size());
        double var = 0.0;
        for (Index r : train_idx) {
            const double d = ds.rows(r, col) - mean;
            var += d * d;
        }
        var /= static_cast<double>(train_idx.size());
        double sd = std::sqrt(var);
        if (sd < 1e-12) sd = 1.0;
        ds.rows.col(col) = (ds.rows.col(col).array() - mean) / sd;
        stats.encoded_cols.push_back(col);
        means.push_back(mean);
        sds.push_back(sd);
    }
    stats.mean = Eigen::Map<const Vector>(means.data(), static_cast<Index>(means.size()));
    stats.stddev = Eigen::Map<const Vector>(sds.data(), static_cast<Index>(sds.size()));
    return stats;
}

void save_dataset(const TabularDataset &ds, const std::string &dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    const std::string schema_path = dir + "/schema.txt";
    std::ofstream sf(schema_path);
    if (!sf) throw IoError("cannot write " + schema_path);
    sf << "cfvae-dataset 1\n";
    sf << "columns " << ds.schema.columns.size() << "\n";
    for (const auto &c : ds.schema.columns) {
        for (const auto &cat : c.categories)
            if (cat.find_first_of(" \t") != std::string::npos)
                throw IoError("category label with whitespace cannot be archived: " + cat);
        sf << "column " << c.name << " " << to_string(c.kind) << " " << to_string(c.role) << " "
           << (c.non_descendant ? 1 : 0) << " " << c.categories.size();
        for (const auto &cat : c.categories) sf << " " << cat;
        sf << "\n";
    }
    if (!sf.good()) throw IoError("failed writing " + schema_path);

    const std::string data_path = dir + "/data.csv";
    std::ofstream df(data_path);
    if (!df) throw IoError("cannot write " + data_path);
    const auto names = ds.schema.encoded_names();
    for (std::size_t i = 0; i < names.size(); ++i) df << names[i] << ",";
    df << "__split\n";
    for (Index r = 0; r < ds.n(); ++r) {
        for (Index c = 0; c < ds.rows.cols(); ++c) df << format_value(ds.rows(r, c)) << ",";
        if (ds.split_labels.empty())
            df << "none";
        else
            df << (ds.split_labels[static_cast<std::size_t>(r)] == kSplitTrain ? "train" : "test");
        df << "\n";
    }
    if (!df.good()) throw IoError("failed writing " + data_path);
}

TabularDataset load_dataset(const std::string &dir) {
    const std::string schema_path = dir + "/schema.txt";
    std::ifstream sf(schema_path);
    if (!sf) throw IoError("cannot read " + schema_path);
    std::string line;
    if (!std::getline(sf, line) || trim(line) != "cfvae-dataset 1")
        throw IoError(schema_path + ": not a dataset archive");
    std::size_t n_columns = 0;
    {
        if (!std::getline(sf, line)) throw IoError(schema_path + ": truncated");
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag >> n_columns) || tag != "columns")
            throw IoError(schema_path + ": expected 'columns <n>'");
    }
    Schema schema;
    for (std::size_t i = 0; i < n_columns; ++i) {
        if (!std::getline(sf, line)) throw IoError(schema_path + ": truncated column list");
        std::istringstream ss(line);
        std::string tag, name, kind, role;
        int nondesc = 0;
        std::size_t ncats = 0;
        if (!(ss >> tag >> name >> kind >> role >> nondesc >> ncats) || tag != "column")
            throw IoError(schema_path + ": bad column line: " + line);
        ColumnSpec spec;
        spec.name = name;
        spec.kind = column_kind_from_string(kind);
        spec.role = column_role_from_string(role);
        spec.non_descendant = nondesc != 0;
        for (std::size_t k = 0; k < ncats; ++k) {
            std::string cat;
            if (!(ss >> cat)) throw IoError(schema_path + ": missing category in: " + line);
            spec.categories.push_back(cat);
        }
        schema.columns.push_back(std::move(spec));
    }
    schema.validate();

    const CsvTable table = read_csv(dir + "/data.csv");
    const Index width = schema.encoded_width();
    if (static_cast<Index>(table.header.size()) != width + 1)
        throw IoError(dir + "/data.csv: column count mismatch with schema");
    TabularDataset ds;
    ds.schema = std::move(schema);
    ds.rows = Matrix(static_cast<Index>(table.rows.size()), width);
    bool any_split = false;
    std::vector<std::uint8_t> labels(table.rows.size(), kSplitTrain);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto &row = table.rows[r];
        for (Index c = 0; c < width; ++c)
            ds.rows(static_cast<Index>(r), c) =
                parse_value(row[static_cast<std::size_t>(c)],
                            "data.csv row " + std::to_string(r + 2));
        const std::string &tag = row.back();
        if (tag == "train") {
            labels[r] = kSplitTrain;
            any_split = true;
        } else if (tag == "test") {
            labels[r] = kSplitTest;
            any_split = true;
        } else if (tag != "none") {
            throw IoError("data.csv: unknown split tag '" + tag + "'");
        }
    }
    if (any_split) ds.split_labels = std::move(labels);
    return ds;
}

} // namespace cfvae
