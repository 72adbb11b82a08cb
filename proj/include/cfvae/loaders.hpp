#ifndef CFVAE_LOADERS_HPP_
#define CFVAE_LOADERS_HPP_

#include "cfvae/dataset.hpp"

#include <string>

namespace cfvae {

// Source column names for the law-school survey file; public distributions
// disagree on naming, so the mapping is explicit configuration.
struct LawColumnMap {
    std::string gender = "sex";
    std::string race = "race";
    std::string lsat = "LSAT";
    std::string gpa = "UGPA";
    std::string fya = "ZFYA";
};

// Law school admission data. Roles: sensitive = {gender, race} (binarized:
// male=1, white=1), covariates = {lsat, gpa}, target = fya. Rows with a
// missing used field are dropped. Values come back raw; run split_dataset
// then standardize to get the modeling form.
TabularDataset load_law(const std::string &path, const LawColumnMap &map = {});

// Census income data in the UCI layout. Roles per the fairness protocol:
// sensitive = {race (white=1), age (binarized at the full-data median),
// sex (male=1), native-country (US=1)}; covariates = {marital-status,
// relationship, workclass, hours-per-week, occupation, education-num};
// target = income (>50K = 1). fnlwgt, education, capital-gain and
// capital-loss are dropped; rows with a missing used field are dropped.
TabularDataset load_adult(const std::string &path);

} // namespace cfvae

#endif
