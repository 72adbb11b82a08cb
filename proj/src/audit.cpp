#include "cfvae/audit.hpp"

#include "cfvae/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace cfvae {

namespace {

double column_median(const TabularDataset &ds, Index col_offset) {
    Vector v = ds.rows.col(col_offset);
    std::sort(v.data(), v.data() + v.size());
    const Index n = v.size();
    return n % 2 == 1 ? v(n / 2) : 0.5 * (v(n / 2 - 1) + v(n / 2));
}

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double vector_mean(const std::vector<double> &v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double vector_std(const std::vector<double> &v) {
    const double m = vector_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

} // namespace

std::string AuditSelection::description() const {
    std::ostringstream out;
    out << (test_split_only ? "test split" : "all rows");
    for (const auto &[col, val] : filters) out << ", " << col << "=" << val;
    if (max_rows > 0) out << ", first " << max_rows;
    return out.str();
}

AuditSet build_audit_set(const TabularDataset &ds, const AuditSelection &sel) {
    std::vector<Index> pool = ds.indices_of_split(sel.test_split_only ? kSplitTest : -1);

    // Equality filters compare decoded values (category index for one-hots).
    for (const auto &[name, value] : sel.filters) {
        const Index col = ds.schema.column_index(name);
        if (col < 0) throw SchemaError("audit filter references unknown column: " + name);
        const Vector decoded = ds.decode_column(col);
        std::vector<Index> narrowed;
        for (Index r : pool)
            if (decoded(r) == value) narrowed.push_back(r);
        pool = std::move(narrowed);
    }
    if (sel.max_rows > 0 && static_cast<Index>(pool.size()) > sel.max_rows)
        pool.resize(static_cast<std::size_t>(sel.max_rows));
    if (pool.empty()) throw IngestError("audit selection matched no rows");

    AuditSet out;
    out.row_ids = pool;
    out.selection = sel.description();
    out.original = ds.rows_at(pool);
    out.matched = out.original;

    for (Index c = 0; c < static_cast<Index>(ds.schema.columns.size()); ++c) {
        const ColumnSpec &spec = ds.schema.columns[static_cast<std::size_t>(c)];
        if (spec.role != ColumnRole::Sensitive) continue;
        const Index off = ds.schema.encoded_offset(c);
        switch (spec.kind) {
            case ColumnKind::Binary:
                out.matched.col(off) = 1.0 - out.matched.col(off).array();
                break;
            case ColumnKind::Continuous: {
                const double median = column_median(ds, off);
                out.matched.col(off) = 2.0 * median - out.matched.col(off).array();
                break;
            }
            case ColumnKind::Categorical: {
                const auto it = sel.category_swaps.find(spec.name);
                if (it == sel.category_swaps.end())
                    throw ConfigError("sensitive categorical column '" + spec.name +
                                      "' has no inversion rule; declare a category swap");
                const auto find_cat = [&](const std::string &label) {
                    const auto pos =
                        std::find(spec.categories.begin(), spec.categories.end(), label);
                    if (pos == spec.categories.end())
                        throw ConfigError("category swap names unknown label '" + label +
                                          "' for column " + spec.name);
                    return static_cast<Index>(pos - spec.categories.begin());
                };
                const Index i = find_cat(it->second.first);
                const Index j = find_cat(it->second.second);
                out.matched.col(off + i).swap(out.matched.col(off + j));
                break;
            }
        }
    }
    return out;
}

double ufs_r(const Vector &original, const Vector &matched) {
    return ufs_regression(original, matched);
}

double ufs_c(const Vector &original, const Vector &matched) {
    return ufs_classification(original, matched);
}

AuditReport evaluate(const TabularDataset &ds, const CfvaeModel *model,
                     const std::vector<PredictorSpec> &predictors,
                     const std::vector<std::pair<std::string, FeatureSetKind>> &feature_sets,
                     const AuditSelection &sel, const std::string &predictions_dir) {
    if (predictors.empty()) throw ConfigError("evaluate: no predictors given");
    if (feature_sets.empty()) throw ConfigError("evaluate: no feature sets given");

    const AuditSet audit = build_audit_set(ds, sel);
    const Matrix train_rows = ds.rows_at(ds.indices_of_split(kSplitTrain));
    const auto test_idx = ds.indices_of_split(kSplitTest);
    const Matrix test_rows = ds.rows_at(test_idx);
    const Vector train_y = ds.target_values(kSplitTrain);
    const Vector test_y = ds.target_values(kSplitTest);

    AuditReport report;
    report.task = predictors.front().task;
    report.metric_name = report.task == PredictorTask::Regression ? "rmse" : "accuracy";
    report.selection = audit.selection;
    report.audit_rows = static_cast<Index>(audit.row_ids.size());
    for (const auto &p : predictors) report.predictors.push_back(p.name);

    if (!predictions_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(predictions_dir, ec);
    }

    for (const auto &[set_name, kind] : feature_sets) {
        report.feature_sets.push_back(set_name);
        const Matrix f_train = extract_features(kind, ds, model, train_rows);
        const Matrix f_test = extract_features(kind, ds, model, test_rows);
        const Matrix f_orig = extract_features(kind, ds, model, audit.original);
        const Matrix f_match = extract_features(kind, ds, model, audit.matched);
        const bool identical = f_orig == f_match;

        for (const auto &spec : predictors) {
            const PredictionRun run = fit_predict(
                spec, f_train, train_y,
                {{"test", f_test}, {"audit_original", f_orig}, {"audit_matched", f_match}});

            std::vector<double> metric, ufs;
            for (int r = 0; r < spec.repeats; ++r) {
                const Vector &pt = run.predictions.at("test")[static_cast<std::size_t>(r)];
                const Vector &po =
                    run.predictions.at("audit_original")[static_cast<std::size_t>(r)];
                const Vector &pm =
                    run.predictions.at("audit_matched")[static_cast<std::size_t>(r)];
                if (report.task == PredictorTask::Regression) {
                    metric.push_back(std::sqrt((pt - test_y).array().square().mean()));
                    ufs.push_back(ufs_r(po, pm));
                } else {
                    double correct = 0.0;
                    for (Index i = 0; i < pt.size(); ++i)
                        if (pt(i) == test_y(i)) correct += 1.0;
                    metric.push_back(correct / static_cast<double>(pt.size()));
                    ufs.push_back(ufs_c(po, pm));
                }
            }

            MetricCell cell;
            cell.metric_mean = vector_mean(metric);
            cell.metric_std = vector_std(metric);
            cell.ufs_mean = vector_mean(ufs);
            cell.ufs_std = vector_std(ufs);
            cell.features_identical = identical;
            report.cells[set_name][spec.name] = cell;

            if (!predictions_dir.empty()) {
                const std::string path =
                    predictions_dir + "/predictions_" + set_name + "_" + spec.name + ".csv";
                std::ofstream f(path);
                if (!f) throw IoError("cannot write " + path);
                f << "row_id,repeat,eval_set,prediction\n";
                for (int r = 0; r < spec.repeats; ++r) {
                    const auto emit = [&](const char *eval_name, const Vector &v,
                                          const std::vector<Index> *ids) {
                        for (Index i = 0; i < v.size(); ++i) {
                            const Index row_id =
                                ids ? (*ids)[static_cast<std::size_t>(i)] : test_idx[static_cast<std::size_t>(i)];
                            f << row_id << "," << r << "," << eval_name << ","
                              << format_value(v(i)) << "\n";
                        }
                    };
                    emit("test", run.predictions.at("test")[static_cast<std::size_t>(r)],
                         nullptr);
                    emit("audit_original",
                         run.predictions.at("audit_original")[static_cast<std::size_t>(r)],
                         &audit.row_ids);
                    emit("audit_matched",
                         run.predictions.at("audit_matched")[static_cast<std::size_t>(r)],
                         &audit.row_ids);
                }
                if (!f.good()) throw IoError("failed writing " + path);
            }
        }
    }
    return report;
}

void write_audit_csv(const AuditReport &report, const std::string &path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << "feature_set,predictor," << report.metric_name
      << "_mean," << report.metric_name << "_std,ufs_mean,ufs_std,features_identical\n";
    for (const auto &set_name : report.feature_sets) {
        for (const auto &pred : report.predictors) {
            const MetricCell &c = report.cells.at(set_name).at(pred);
            f << set_name << "," << pred << "," << format_value(c.metric_mean) << ","
              << format_value(c.metric_std) << "," << format_value(c.ufs_mean) << ","
              << format_value(c.ufs_std) << "," << (c.features_identical ? 1 : 0) << "\n";
        }
    }
    if (!f.good()) throw IoError("failed writing " + path);
}

void write_audit_markdown(const AuditReport &report, const std::string &path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    char buf[96];
    const char *metric = report.task == PredictorTask::Regression ? "RMSE" : "Accuracy";
    const char *ufs_name = report.task == PredictorTask::Regression ? "UFS_R" : "UFS_C";
    f << "Audit (" << report.audit_rows << " matched pairs; " << report.selection << ")\n\n";
    for (const bool is_metric : {true, false}) {
        f << "### " << (is_metric ? metric : ufs_name) << "\n\n";
        f << "| features |";
        for (const auto &p : report.predictors) f << " " << p << " |";
        f << "\n|---|";
        for (std::size_t i = 0; i < report.predictors.size(); ++i) f << "---|";
        f << "\n";
        for (const auto &set_name : report.feature_sets) {
            f << "| " << set_name << " |";
            for (const auto &p : report.predictors) {
                const MetricCell &c = report.cells.at(set_name).at(p);
                const double mean = is_metric ? c.metric_mean : c.ufs_mean;
                const double sd = is_metric ? c.metric_std : c.ufs_std;
                std::snprintf(buf, sizeof(buf), " %.3f ± %.3f |", mean, sd);
                f << buf;
            }
            f << "\n";
        }
        f << "\n";
    }
    if (!f.good()) throw IoError("failed writing " + path);
}

} // namespace cfvae
