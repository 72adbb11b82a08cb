#include "cfvae/loaders.hpp"

#include "cfvae/csv.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

namespace cfvae {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// Header matching tolerant to the common export variants: case and the
// '-'/'_'/'.' separator family.
std::string canon(const std::string &s) {
    std::string out = lower(trim(s));
    for (char &c : out)
        if (c == '_' || c == '.') c = '-';
    return out;
}

std::size_t require_column(const CsvTable &t, const std::string &name) {
    const std::string want = canon(name);
    for (std::size_t i = 0; i < t.header.size(); ++i)
        if (canon(t.header[i]) == want) return i;
    throw SchemaError("missing required column: " + name);
}

double parse_number(const std::string &field, std::size_t file_line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
        return v;
    } catch (const std::exception &) {
        throw IngestError("unparseable numeric '" + field + "' at row " +
                          std::to_string(file_line));
    }
}

} // namespace

TabularDataset load_law(const std::string &path, const LawColumnMap &map) {
    const CsvTable t = read_csv(path);
    const std::size_t c_gender = require_column(t, map.gender);
    const std::size_t c_race = require_column(t, map.race);
    const std::size_t c_lsat = require_column(t, map.lsat);
    const std::size_t c_gpa = require_column(t, map.gpa);
    const std::size_t c_fya = require_column(t, map.fya);
    const std::size_t used[] = {c_gender, c_race, c_lsat, c_gpa, c_fya};

    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        bool ok = true;
        for (std::size_t c : used) ok = ok && !is_missing(t.rows[r][c]);
        if (ok) keep.push_back(r);
    }
    if (keep.empty()) throw IngestError(path + ": no usable rows");

    // Gender: string files are matched on the male/female initial; numeric
    // files carry two codes and the smaller one becomes 0.
    std::set<std::string> gender_values;
    for (std::size_t r : keep) gender_values.insert(lower(t.rows[r][c_gender]));
    bool gender_stringy = true;
    for (const auto &v : gender_values)
        gender_stringy = gender_stringy && !v.empty() && (v[0] == 'm' || v[0] == 'f');
    double gender_lo = 0.0;
    if (!gender_stringy) {
        if (gender_values.size() > 2)
            throw IngestError(path + ": gender column has " +
                              std::to_string(gender_values.size()) +
                              " distinct values, need at most 2");
        bool first = true;
        for (const auto &v : gender_values) {
            const double num = parse_number(v, 2);
            gender_lo = first ? num : std::min(gender_lo, num);
            first = false;
        }
    }
    auto gender_value = [&](const std::string &raw, std::size_t file_line) {
        const std::string v = lower(raw);
        if (gender_stringy) return v[0] == 'm' ? 1.0 : 0.0;
        return parse_number(v, file_line) == gender_lo ? 0.0 : 1.0;
    };
    auto race_value = [&](const std::string &raw) {
        const std::string v = lower(raw);
        if (v == "1" || v == "white" || v == "w") return 1.0;
        return 0.0;
    };

    const Index n = static_cast<Index>(keep.size());
    Vector gender(n), race(n), lsat(n), gpa(n), fya(n);
    for (Index i = 0; i < n; ++i) {
        const std::size_t r = keep[static_cast<std::size_t>(i)];
        const std::size_t file_line = r + 2;
        gender(i) = gender_value(t.rows[r][c_gender], file_line);
        race(i) = race_value(t.rows[r][c_race]);
        lsat(i) = parse_number(t.rows[r][c_lsat], file_line);
        gpa(i) = parse_number(t.rows[r][c_gpa], file_line);
        fya(i) = parse_number(t.rows[r][c_fya], file_line);
    }

    Schema schema;
    schema.columns.push_back({"gender", ColumnKind::Binary, ColumnRole::Sensitive, {}, false});
    schema.columns.push_back({"race", ColumnKind::Binary, ColumnRole::Sensitive, {}, false});
    schema.columns.push_back({"lsat", ColumnKind::Continuous, ColumnRole::Covariate, {}, false});
    schema.columns.push_back({"gpa", ColumnKind::Continuous, ColumnRole::Covariate, {}, false});
    schema.columns.push_back({"fya", ColumnKind::Continuous, ColumnRole::Target, {}, false});
    return TabularDataset::from_columns(std::move(schema),
                                        {gender, race, lsat, gpa, fya});
}

TabularDataset load_adult(const std::string &path) {
    const CsvTable t = read_csv(path);
    const std::size_t c_age = require_column(t, "age");
    const std::size_t c_workclass = require_column(t, "workclass");
    const std::size_t c_edunum = require_column(t, "education-num");
    const std::size_t c_marital = require_column(t, "marital-status");
    const std::size_t c_occupation = require_column(t, "occupation");
    const std::size_t c_relationship = require_column(t, "relationship");
    const std::size_t c_race = require_column(t, "race");
    const std::size_t c_sex = require_column(t, "sex");
    const std::size_t c_hours = require_column(t, "hours-per-week");
    const std::size_t c_country = require_column(t, "native-country");
    const std::size_t c_income = require_column(t, "income");
    const std::size_t used[] = {c_age,  c_workclass,    c_edunum, c_marital, c_occupation,
                                c_relationship, c_race, c_sex,    c_hours,   c_country,
                                c_income};

    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        bool ok = true;
        for (std::size_t c : used) ok = ok && !is_missing(t.rows[r][c]);
        if (ok) keep.push_back(r);
    }
    if (keep.empty()) throw IngestError(path + ": no usable rows");
    const Index n = static_cast<Index>(keep.size());

    auto categories_of = [&](std::size_t col) {
        std::set<std::string> values;
        for (std::size_t r : keep) values.insert(t.rows[r][col]);
        return std::vector<std::string>(values.begin(), values.end());
    };
    auto category_index = [](const std::vector<std::string> &cats, const std::string &v) {
        const auto it = std::lower_bound(cats.begin(), cats.end(), v);
        return static_cast<double>(it - cats.begin());
    };

    const auto workclass_cats = categories_of(c_workclass);
    const auto marital_cats = categories_of(c_marital);
    const auto occupation_cats = categories_of(c_occupation);
    const auto relationship_cats = categories_of(c_relationship);

    Vector age_raw(n);
    for (Index i = 0; i < n; ++i) {
        const std::size_t r = keep[static_cast<std::size_t>(i)];
        age_raw(i) = parse_number(t.rows[r][c_age], r + 2);
    }
    // Median over the cleaned file; the binarized flag is the auditable
    // sensitive form of age.
    Vector sorted_age = age_raw;
    std::sort(sorted_age.data(), sorted_age.data() + sorted_age.size());
    const double age_median = n % 2 == 1
                                  ? sorted_age(n / 2)
                                  : 0.5 * (sorted_age(n / 2 - 1) + sorted_age(n / 2));

    Vector race(n), age(n), sex(n), country(n);
    Vector marital(n), relationship(n), workclass(n), hours(n), occupation(n), edunum(n);
    Vector income(n);
    for (Index i = 0; i < n; ++i) {
        const std::size_t r = keep[static_cast<std::size_t>(i)];
        const std::size_t line = r + 2;
        race(i) = lower(t.rows[r][c_race]) == "white" ? 1.0 : 0.0;
        age(i) = age_raw(i) > age_median ? 1.0 : 0.0;
        sex(i) = lower(t.rows[r][c_sex]) == "male" ? 1.0 : 0.0;
        country(i) = lower(t.rows[r][c_country]) == "united-states" ? 1.0 : 0.0;
        marital(i) = category_index(marital_cats, t.rows[r][c_marital]);
        relationship(i) = category_index(relationship_cats, t.rows[r][c_relationship]);
        workclass(i) = category_index(workclass_cats, t.rows[r][c_workclass]);
        hours(i) = parse_number(t.rows[r][c_hours], line);
        occupation(i) = category_index(occupation_cats, t.rows[r][c_occupation]);
        edunum(i) = parse_number(t.rows[r][c_edunum], line);
        std::string inc = t.rows[r][c_income];
        if (!inc.empty() && inc.back() == '.') inc.pop_back();
        if (inc == ">50K")
            income(i) = 1.0;
        else if (inc == "<=50K")
            income(i) = 0.0;
        else
            throw IngestError("unrecognized income value '" + inc + "' at row " +
                              std::to_string(line));
    }

    Schema schema;
    schema.columns.push_back({"race", ColumnKind::Binary, ColumnRole::Sensitive, {}, false});
    schema.columns.push_back({"age", ColumnKind::Binary, ColumnRole::Sensitive, {}, false});
    schema.columns.push_back({"sex", ColumnKind::Binary, ColumnRole::Sensitive, {}, false});
    schema.columns.push_back(
        {"native-country", ColumnKind::Binary, ColumnRole::Sensitive, {}, false});
    schema.columns.push_back(
        {"marital-status", ColumnKind::Categorical, ColumnRole::Covariate, marital_cats, false});
    schema.columns.push_back({"relationship", ColumnKind::Categorical, ColumnRole::Covariate,
                              relationship_cats, false});
    schema.columns.push_back(
        {"workclass", ColumnKind::Categorical, ColumnRole::Covariate, workclass_cats, false});
    schema.columns.push_back(
        {"hours-per-week", ColumnKind::Continuous, ColumnRole::Covariate, {}, false});
    schema.columns.push_back(
        {"occupation", ColumnKind::Categorical, ColumnRole::Covariate, occupation_cats, false});
    schema.columns.push_back(
        {"education-num", ColumnKind::Continuous, ColumnRole::Covariate, {}, false});
    schema.columns.push_back({"income", ColumnKind::Binary, ColumnRole::Target, {}, false});
    return TabularDataset::from_columns(
        std::move(schema), {race, age, sex, country, marital, relationship, workclass, hours,
                            occupation, edunum, income});
}

} // namespace cfvae
