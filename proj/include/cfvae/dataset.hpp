#ifndef CFVAE_DATASET_HPP_
#define CFVAE_DATASET_HPP_

#include "cfvae/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cfvae {

enum class ColumnKind { Continuous, Binary, Categorical };
enum class ColumnRole { Sensitive, Covariate, Target };

std::string to_string(ColumnKind kind);
std::string to_string(ColumnRole role);
ColumnKind column_kind_from_string(const std::string &s);
ColumnRole column_role_from_string(const std::string &s);

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::Continuous;
    ColumnRole role = ColumnRole::Covariate;
    std::vector<std::string> categories; // categorical only, fixed order
    // Ground-truth annotation for generated data: this covariate is causally
    // untouched by the sensitive attributes.
    bool non_descendant = false;

    Index encoded_width() const {
        return kind == ColumnKind::Categorical ? static_cast<Index>(categories.size()) : 1;
    }
};

struct Schema {
    std::vector<ColumnSpec> columns;

    void validate() const;
    Index encoded_width() const;
    Index encoded_width(ColumnRole role) const;
    Index encoded_offset(Index col) const;
    std::vector<Index> columns_with_role(ColumnRole role) const;
    Index column_index(const std::string &name) const; // -1 when unknown
    // Encoded header: plain name for scalar columns, name=category for
    // one-hot positions.
    std::vector<std::string> encoded_names() const;
};

inline constexpr std::uint8_t kSplitTrain = 0;
inline constexpr std::uint8_t kSplitTest = 1;

// Column-typed table after numeric encoding. split_labels is empty until
// split() runs; every accessor then treats the whole table as train.
struct TabularDataset {
    Schema schema;
    Matrix rows; // N x encoded_width
    std::vector<std::uint8_t> split_labels;

    Index n() const { return rows.rows(); }

    // Builds the encoded matrix from per-column numeric values; categorical
    // columns carry category indices and expand to one-hot groups.
    static TabularDataset from_columns(Schema schema, const std::vector<Vector> &values);

    // Inverse of the one-hot expansion for one schema column.
    Vector decode_column(Index col) const;

    std::vector<Index> indices_of_split(int split) const; // -1 all, else label
    Matrix rows_at(const std::vector<Index> &idx) const;
    // Encoded block of one role, over all rows or one split.
    Matrix role_block(ColumnRole role, int split = -1) const;
    Matrix block_of_rows(const Matrix &encoded_rows, ColumnRole role) const;
    Vector target_values(int split = -1) const;
};

// Assigns train/test labels by seeded shuffle; train count is
// floor(train_fraction * N) up to one row of rounding slack.
void split_dataset(TabularDataset &ds, double train_fraction, std::uint64_t seed);

// Keeps a seeded random subset of max_rows rows (original order preserved).
void subsample_dataset(TabularDataset &ds, Index max_rows, std::uint64_t seed);

struct StandardizeStats {
    std::vector<Index> encoded_cols;
    Vector mean;
    Vector stddev;
};

// Shifts/scales every continuous column to zero mean, unit variance using
// training-split statistics only; test rows reuse those statistics.
// Population standard deviation; a zero spread falls back to scale 1.
StandardizeStats standardize(TabularDataset &ds);

// Archive round-trip: <dir>/schema.txt manifest + <dir>/data.csv values.
void save_dataset(const TabularDataset &ds, const std::string &dir);
TabularDataset load_dataset(const std::string &dir);

} // namespace cfvae

#endif
