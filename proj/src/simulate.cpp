#include "cfvae/simulate.hpp"

#include "cfvae/losses.hpp"
#include "cfvae/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace cfvae {

namespace {

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

} // namespace

void write_law_like_csv(const std::string &path, const LawLikeOptions &opt) {
    if (opt.n <= 0) throw ConfigError("law-like generator needs a positive row count");
    Rng rng(subseed(opt.seed, "simulate-law"));
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << "race,sex,LSAT,UGPA,ZFYA\n";

    const char *nonwhite[] = {"Black", "Hispanic", "Asian", "Other"};
    char buf[160];
    for (Index i = 0; i < opt.n; ++i) {
        const double k = rng.normal();
        const double w = rng.bernoulli(0.65) ? 1.0 : 0.0;
        const double m = rng.bernoulli(0.55) ? 1.0 : 0.0;
        const double lsat = 35.0 + 5.0 * k + 1.5 * w + 0.3 * m + 3.0 * rng.normal();
        const double gpa = 3.0 + 0.40 * k + 0.10 * w + 0.01 * m + 0.30 * rng.normal();
        const double fya = 0.45 * k + 0.62 * w + 0.38 * m + 0.85 * rng.normal();
        const char *race = w == 1.0 ? "White" : nonwhite[rng.below(4)];
        // sex codes follow the survey convention: 1 = female, 2 = male
        std::snprintf(buf, sizeof(buf), "%s,%d,%.1f,%.2f,%.6f\n", race, m == 1.0 ? 2 : 1,
                      lsat, gpa, fya);
        f << buf;
    }
    if (!f.good()) throw IoError("failed writing " + path);
}

namespace {

const char *kEducationNames[16] = {
    "Preschool",  "1st-4th",      "5th-6th",   "7th-8th",    "9th",         "10th",
    "11th",       "12th",         "HS-grad",   "Some-college", "Assoc-voc", "Assoc-acdm",
    "Bachelors",  "Masters",      "Prof-school", "Doctorate"};

const char *kOccupations[14] = {
    "Priv-house-serv", "Handlers-cleaners", "Other-service",  "Farming-fishing",
    "Machine-op-inspct", "Adm-clerical",    "Transport-moving", "Craft-repair",
    "Sales",           "Protective-serv",   "Tech-support",   "Exec-managerial",
    "Prof-specialty",  "Armed-Forces"};

const char *kNonUsCountries[5] = {"Mexico", "Philippines", "Germany", "Canada", "India"};
const char *kNonWhiteRaces[4] = {"Black", "Asian-Pac-Islander", "Amer-Indian-Eskimo",
                                 "Other"};

} // namespace

void write_adult_like_csv(const std::string &path, const AdultLikeOptions &opt) {
    if (opt.n_raw <= 0) throw ConfigError("adult-like generator needs a positive row count");
    Rng rng(subseed(opt.seed, "simulate-adult"));
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << "age,workclass,fnlwgt,education,education-num,marital-status,occupation,"
         "relationship,race,sex,capital-gain,capital-loss,hours-per-week,"
         "native-country,income\n";

    char buf[320];
    for (Index i = 0; i < opt.n_raw; ++i) {
        const double q = rng.normal();
        const bool male = rng.bernoulli(0.67);
        const bool white = rng.bernoulli(0.855);
        const bool us = rng.bernoulli(0.91);
        const int age = static_cast<int>(clamp(std::round(38.0 + 12.0 * rng.normal() + 1.5 * q),
                                               17.0, 90.0));
        const double age_z = (age - 38.0) / 12.0;
        const int edu_num = static_cast<int>(clamp(
            std::round(10.0 + 1.9 * q + 0.25 * (male ? 1 : 0) + 0.2 * (white ? 1 : 0) +
                       1.4 * rng.normal()),
            1.0, 16.0));
        const int hours = static_cast<int>(clamp(
            std::round(40.0 + 4.5 * q + 3.5 * (male ? 1 : 0) + 7.5 * rng.normal()), 1.0, 99.0));

        const double p_married =
            clamp(0.12 + 0.012 * (age - 17) + 0.18 * (male ? 1 : 0), 0.02, 0.85);
        const bool married = rng.bernoulli(p_married);
        const char *marital;
        if (married) {
            marital = "Married-civ-spouse";
        } else if (age < 30 || rng.bernoulli(0.55)) {
            marital = "Never-married";
        } else {
            const double u = rng.uniform();
            marital = u < 0.55 ? "Divorced" : (u < 0.75 ? "Separated" : "Widowed");
        }
        const char *relationship;
        if (married) {
            relationship = male ? "Husband" : "Wife";
        } else if (age < 25 && rng.bernoulli(0.5)) {
            relationship = "Own-child";
        } else {
            relationship = rng.bernoulli(0.6) ? "Not-in-family" : "Unmarried";
        }

        const double occ_score = q + 0.4 * (male ? 1 : 0) + 0.8 * rng.normal();
        int occ = static_cast<int>(std::floor((occ_score + 2.1) / 4.2 * 13.0));
        occ = static_cast<int>(clamp(static_cast<double>(occ), 0.0, 12.0));
        if (rng.bernoulli(0.002)) occ = 13; // Armed-Forces, rare

        const double wu = rng.uniform();
        const char *workclass =
            wu < 0.74   ? "Private"
            : wu < 0.82 ? "Self-emp-not-inc"
            : wu < 0.89 ? "Local-gov"
            : wu < 0.93 ? "State-gov"
            : wu < 0.97 ? "Self-emp-inc"
            : wu < 0.9995 ? "Federal-gov"
                          : "Without-pay";

        const long fnlwgt = static_cast<long>(std::round(std::exp(11.9 + 0.45 * rng.normal())));
        const long cap_gain =
            rng.bernoulli(0.05) ? static_cast<long>(std::round(std::exp(8.0 + rng.normal()))) : 0;
        const long cap_loss =
            rng.bernoulli(0.02) ? static_cast<long>(std::round(std::exp(7.4 + 0.3 * rng.normal())))
                                : 0;

        const double logit = -3.05 + 1.15 * q + 0.45 * (male ? 1 : 0) + 0.18 * (white ? 1 : 0) +
                             0.12 * (us ? 1 : 0) + 0.40 * (married ? 1 : 0) + 0.35 * age_z -
                             0.20 * age_z * age_z;
        const bool high = rng.bernoulli(sigmoid(logit));

        // Missingness mirrors the real file: workclass/occupation together,
        // native-country independently.
        const bool miss_work = rng.bernoulli(0.057);
        const bool miss_country = rng.bernoulli(0.018);
        const char *workclass_out = miss_work ? "?" : workclass;
        const char *occupation_out = miss_work ? "?" : kOccupations[occ];
        const char *country_out = miss_country ? "?"
                                  : us          ? "United-States"
                                                : kNonUsCountries[rng.below(5)];
        const char *race_out = white ? "White" : kNonWhiteRaces[rng.below(4)];

        std::snprintf(buf, sizeof(buf), "%d,%s,%ld,%s,%d,%s,%s,%s,%s,%s,%ld,%ld,%d,%s,%s\n",
                      age, workclass_out, fnlwgt, kEducationNames[edu_num - 1], edu_num, marital,
                      occupation_out, relationship, race_out, male ? "Male" : "Female", cap_gain,
                      cap_loss, hours, country_out, high ? ">50K" : "<=50K");
        f << buf;
    }
    if (!f.good()) throw IoError("failed writing " + path);
}

} // namespace cfvae
