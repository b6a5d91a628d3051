#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "llpowershap/common.hpp"
#include "llpowershap/random.hpp"

namespace llps {

// Column-major tabular matrix with binary labels. Immutable by convention
// after construction; every operation below returns a fresh Dataset.
struct Dataset {
    std::vector<std::vector<double>> columns;  // m columns, each of length n
    std::vector<int> labels;                   // n entries in {0, 1}
    std::vector<std::string> names;            // m unique identifiers
    std::vector<std::uint8_t> noise_flags;     // m, true for injected noise columns
    std::optional<std::vector<std::size_t>> ground_truth_informative;  // synthetic data only

    std::size_t n_rows() const { return labels.size(); }
    std::size_t n_cols() const { return columns.size(); }

    void fill_row(std::size_t i, std::vector<double>& out) const {
        out.resize(columns.size());
        for (std::size_t c = 0; c < columns.size(); ++c) out[c] = columns[c][i];
    }

    std::vector<double> row(std::size_t i) const {
        std::vector<double> r;
        fill_row(i, r);
        return r;
    }

    // Row-major copy, convenient for per-row model evaluation.
    std::vector<std::vector<double>> row_matrix() const {
        std::vector<std::vector<double>> rows(n_rows());
        for (std::size_t i = 0; i < rows.size(); ++i) fill_row(i, rows[i]);
        return rows;
    }

    Dataset subset_rows(const std::vector<std::size_t>& idx) const {
        Dataset out;
        out.names = names;
        out.noise_flags = noise_flags;
        out.ground_truth_informative = ground_truth_informative;
        out.columns.resize(columns.size());
        for (std::size_t c = 0; c < columns.size(); ++c) {
            out.columns[c].reserve(idx.size());
            for (std::size_t i : idx) out.columns[c].push_back(columns[c][i]);
        }
        out.labels.reserve(idx.size());
        for (std::size_t i : idx) out.labels.push_back(labels[i]);
        return out;
    }

    Dataset subset_columns(const std::vector<std::size_t>& cols) const {
        Dataset out;
        out.labels = labels;
        out.columns.reserve(cols.size());
        out.names.reserve(cols.size());
        out.noise_flags.reserve(cols.size());
        for (std::size_t c : cols) {
            out.columns.push_back(columns[c]);
            out.names.push_back(names[c]);
            out.noise_flags.push_back(noise_flags[c]);
        }
        if (ground_truth_informative) {
            std::vector<std::size_t> remapped;
            for (std::size_t pos = 0; pos < cols.size(); ++pos) {
                for (std::size_t g : *ground_truth_informative)
                    if (cols[pos] == g) remapped.push_back(pos);
            }
            out.ground_truth_informative = std::move(remapped);
        }
        return out;
    }

    void validate() const {
        if (names.size() != columns.size() || noise_flags.size() != columns.size())
            throw DataError("dataset schema arrays disagree in length");
        std::unordered_set<std::string> seen;
        for (const auto& nm : names)
            if (!seen.insert(nm).second) throw DataError("duplicate column name: " + nm);
        for (const auto& col : columns)
            if (col.size() != labels.size())
                throw DataError("column length does not match label length");
        for (int y : labels)
            if (y != 0 && y != 1) throw DataError("labels must be 0 or 1");
    }
};

struct SplitTriple {
    Dataset train;       // 70% of rows
    Dataset validation;  // 10%
    Dataset test;        // 20%
    std::uint64_t seed = 0;
};

// The injected probes, in fixed order. Exactly five columns are appended per
// injection: uniform[0,1), normal(0,1), logistic(0,1), exponential(1),
// Cauchy(0,1).
struct NoiseSpec {
    std::uint64_t seed = 0;
    static constexpr std::size_t kCount = 5;
    static const std::array<const char*, kCount>& distribution_names() {
        static const std::array<const char*, kCount> names = {
            "noise_uniform", "noise_normal", "noise_logistic", "noise_exponential",
            "noise_cauchy"};
        return names;
    }
};

namespace detail {

struct CsvTable {
    std::vector<std::vector<std::string>> records;  // records[0] is the header
};

// RFC-4180: quoted fields, doubled quotes, CR/CRLF/LF record ends.
inline CsvTable parse_csv_text(const std::string& text) {
    CsvTable out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    if (n >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
        static_cast<unsigned char>(text[1]) == 0xBB &&
        static_cast<unsigned char>(text[2]) == 0xBF)
        i = 3;  // strip UTF-8 BOM

    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
    };
    auto end_record = [&] {
        end_field();
        if (record.size() == 1 && record[0].empty()) {
            record.clear();  // tolerate stray blank lines
            return;
        }
        out.records.push_back(std::move(record));
        record.clear();
    };
    while (i < n) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < n && text[i + 1] == '"') {
                    field += '"';
                    i += 2;
                } else {
                    in_quotes = false;
                    ++i;
                }
            } else {
                field += c;
                ++i;
            }
        } else if (c == '"') {
            in_quotes = true;
            ++i;
        } else if (c == ',') {
            end_field();
            ++i;
        } else if (c == '\r') {
            i += (i + 1 < n && text[i + 1] == '\n') ? 2 : 1;
            end_record();
        } else if (c == '\n') {
            ++i;
            end_record();
        } else {
            field += c;
            ++i;
        }
    }
    if (in_quotes) throw DataError("unterminated quoted field in CSV");
    if (!field.empty() || !record.empty()) end_record();
    return out;
}

inline bool parse_finite_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto res = std::from_chars(begin, end, out);
    if (res.ec != std::errc{} || res.ptr != end) return false;
    return std::isfinite(out);
}

}  // namespace detail

// Loads an RFC-4180 CSV with a required header row; the named target column
// must hold {0,1}, all other cells finite reals ('.' decimal separator).
// Cells like "NA" or "" are rejected rather than imputed.
inline Dataset load_csv(const std::string& path, const std::string& target) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    detail::CsvTable table = detail::parse_csv_text(text);
    if (table.records.empty()) throw DataError("empty CSV: header row required in " + path);

    const std::vector<std::string>& header = table.records[0];
    {
        std::unordered_set<std::string> seen;
        for (const auto& nm : header)
            if (!seen.insert(nm).second) throw DataError("duplicate column name: " + nm);
    }
    std::size_t target_idx = header.size();
    for (std::size_t c = 0; c < header.size(); ++c)
        if (header[c] == target) target_idx = c;
    if (target_idx == header.size())
        throw DataError("target column not found: " + target);
    if (header.size() < 2) throw DataError("no feature columns besides target");
    if (table.records.size() < 2) throw DataError("CSV has no data rows");

    const std::size_t n = table.records.size() - 1;
    const std::size_t m = header.size() - 1;
    Dataset out;
    out.names.reserve(m);
    for (std::size_t c = 0; c < header.size(); ++c)
        if (c != target_idx) out.names.push_back(header[c]);
    out.noise_flags.assign(m, 0);
    out.columns.assign(m, {});
    for (auto& col : out.columns) col.reserve(n);
    out.labels.reserve(n);

    for (std::size_t r = 0; r < n; ++r) {
        const auto& rec = table.records[r + 1];
        if (rec.size() != header.size())
            throw DataError("row " + std::to_string(r + 1) + " has " +
                            std::to_string(rec.size()) + " fields, expected " +
                            std::to_string(header.size()));
        std::size_t out_c = 0;
        for (std::size_t c = 0; c < rec.size(); ++c) {
            double v;
            if (!detail::parse_finite_double(rec[c], v))
                throw DataError("non-numeric cell at row " + std::to_string(r + 1) +
                                ", column '" + header[c] + "'");
            if (c == target_idx) {
                if (v != 0.0 && v != 1.0)
                    throw DataError("non-binary target at row " + std::to_string(r + 1) +
                                    ": value " + rec[c]);
                out.labels.push_back(static_cast<int>(v));
            } else {
                out.columns[out_c++].push_back(v);
            }
        }
    }
    out.validate();
    return out;
}

// Appends the five noise probes drawn from streams derived from
// iteration_seed. Original columns are untouched; only the new columns carry
// noise flags.
inline Dataset inject_noise(const Dataset& data, const NoiseSpec& spec,
                            std::uint64_t iteration_seed) {
    for (std::uint8_t f : data.noise_flags)
        if (f) throw DataError("dataset already contains injected noise columns");
    const std::size_t n = data.n_rows();
    Dataset out = data;
    using Sampler = double (*)(rng::Engine&);
    static constexpr std::array<Sampler, NoiseSpec::kCount> samplers = {
        &rng::uniform01, &rng::normal, &rng::logistic, &rng::exponential, &rng::cauchy};
    for (std::size_t k = 0; k < NoiseSpec::kCount; ++k) {
        rng::Engine e = rng::make_engine(rng::mix(spec.seed, iteration_seed, k));
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = samplers[k](e);
        out.columns.push_back(std::move(col));
        std::string nm = NoiseSpec::distribution_names()[k];
        while (std::find(out.names.begin(), out.names.end(), nm) != out.names.end())
            nm += "_";
        out.names.push_back(nm);
        out.noise_flags.push_back(1);
    }
    return out;
}

namespace detail {

// Largest-remainder allocation of `target` slots across class counts, so the
// per-class parts sum exactly to the requested total.
inline std::vector<std::size_t> allocate_by_class(std::size_t target,
                                                  const std::vector<std::size_t>& class_counts,
                                                  std::size_t n_total) {
    std::vector<std::size_t> alloc(class_counts.size());
    std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (remainder, class)
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < class_counts.size(); ++c) {
        std::size_t num = target * class_counts[c];
        alloc[c] = num / n_total;
        assigned += alloc[c];
        remainders.emplace_back(num % n_total, c);
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::size_t leftover = target - assigned;
    for (std::size_t k = 0; k < leftover; ++k) alloc[remainders[k % remainders.size()].second]++;
    return alloc;
}

// Partitions 0..n-1 into parts of the given sizes (last size implied).
// Stratifies by label when requested; index order within parts is ascending.
inline std::vector<std::vector<std::size_t>> partition_indices(
    const std::vector<int>& labels, const std::vector<std::size_t>& sizes, std::uint64_t seed,
    bool stratified) {
    const std::size_t n = labels.size();
    rng::Engine e = rng::make_engine(rng::mix(seed, 17, 71));
    std::vector<std::size_t> perm = rng::permutation(n, e);
    std::vector<std::vector<std::size_t>> parts(sizes.size() + 1);
    if (!stratified) {
        std::size_t cursor = 0;
        for (std::size_t p = 0; p < sizes.size(); ++p) {
            for (std::size_t k = 0; k < sizes[p]; ++k) parts[p].push_back(perm[cursor++]);
        }
        while (cursor < n) parts.back().push_back(perm[cursor++]);
    } else {
        std::vector<std::vector<std::size_t>> by_class(2);
        for (std::size_t i : perm) by_class[static_cast<std::size_t>(labels[i])].push_back(i);
        std::vector<std::size_t> counts = {by_class[0].size(), by_class[1].size()};
        std::vector<std::size_t> cursor(2, 0);
        for (std::size_t p = 0; p < sizes.size(); ++p) {
            std::vector<std::size_t> alloc = allocate_by_class(sizes[p], counts, n);
            for (std::size_t c = 0; c < 2; ++c) {
                // Clamp against depletion; overflow spills into the other class.
                std::size_t avail = by_class[c].size() - cursor[c];
                std::size_t take = std::min(alloc[c], avail);
                std::size_t spill = alloc[c] - take;
                for (std::size_t k = 0; k < take; ++k) parts[p].push_back(by_class[c][cursor[c]++]);
                std::size_t other = 1 - c;
                std::size_t avail_other = by_class[other].size() - cursor[other];
                std::size_t extra = std::min(spill, avail_other);
                for (std::size_t k = 0; k < extra; ++k)
                    parts[p].push_back(by_class[other][cursor[other]++]);
            }
        }
        for (std::size_t c = 0; c < 2; ++c)
            while (cursor[c] < by_class[c].size()) parts.back().push_back(by_class[c][cursor[c]++]);
    }
    for (auto& part : parts) std::sort(part.begin(), part.end());
    return parts;
}

}  // namespace detail

// 0.7 / 0.1 / 0.2 row split, stratified by label when both classes have at
// least 10 members. Counts are rounded so the three parts sum to n.
inline SplitTriple split(const Dataset& data, std::uint64_t seed) {
    const std::size_t n = data.n_rows();
    if (n < 10) throw DataError("split requires at least 10 rows, got " + std::to_string(n));
    std::size_t n_train = static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(n)));
    std::size_t n_val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
    std::size_t c1 = static_cast<std::size_t>(
        std::count(data.labels.begin(), data.labels.end(), 1));
    std::size_t c0 = n - c1;
    bool stratified = c0 >= 10 && c1 >= 10;
    auto parts = detail::partition_indices(data.labels, {n_train, n_val}, seed, stratified);
    SplitTriple out;
    out.train = data.subset_rows(parts[0]);
    out.validation = data.subset_rows(parts[1]);
    out.test = data.subset_rows(parts[2]);
    out.seed = seed;
    return out;
}

// Two-way split helper used for 75:25 evaluation and early-stopping carve-outs.
inline std::pair<Dataset, Dataset> holdout_split(const Dataset& data, double train_fraction,
                                                 std::uint64_t seed) {
    const std::size_t n = data.n_rows();
    if (n < 2) throw DataError("holdout split requires at least 2 rows");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw DataError("train fraction must be in (0, 1)");
    std::size_t n_train =
        static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    n_train = std::min(std::max<std::size_t>(n_train, 1), n - 1);
    std::size_t c1 = static_cast<std::size_t>(
        std::count(data.labels.begin(), data.labels.end(), 1));
    std::size_t c0 = n - c1;
    bool stratified = c0 >= 2 && c1 >= 2;
    auto parts = detail::partition_indices(data.labels, {n_train}, seed, stratified);
    return {data.subset_rows(parts[0]), data.subset_rows(parts[1])};
}

// Synthetic binary classification data with hypercube cluster geometry.
// Clusters sit on distinct vertices of the n_informative-dimensional
// hypercube with coordinates +/- class_sep (two clusters per class when the
// cube has at least four vertices, one otherwise) and alternate class labels.
// Informative coordinates are vertex + standard normal, mixed by that
// cluster's seeded uniform[-1,1] square matrix, so every informative
// dimension takes part in the cluster structure. Remaining columns are
// independent standard normal. Columns are then shuffled by a seeded
// permutation and the post-shuffle informative indices recorded. No redundant
// or repeated columns.
inline Dataset generate_classification(std::size_t n_samples, std::size_t n_features,
                                       std::size_t n_informative, double class_sep,
                                       std::uint64_t seed) {
    if (n_informative < 1 || n_informative > n_features)
        throw DataError("n_informative must be in [1, n_features]");
    if (n_samples < 2) throw DataError("n_samples must be at least 2");
    const std::size_t k = n_informative;
    rng::Engine e = rng::make_engine(rng::mix(seed, n_samples, n_features, n_informative));

    const std::size_t n_clusters = k >= 2 ? 4 : 2;  // cluster c carries label c % 2
    std::vector<std::vector<double>> vertices(n_clusters, std::vector<double>(k));
    {
        // distinct random hypercube corners
        std::vector<std::vector<std::uint8_t>> corners;
        while (corners.size() < n_clusters) {
            std::vector<std::uint8_t> bits(k);
            for (auto& b : bits) b = static_cast<std::uint8_t>(e() & 1);
            if (std::find(corners.begin(), corners.end(), bits) == corners.end())
                corners.push_back(std::move(bits));
        }
        for (std::size_t c = 0; c < n_clusters; ++c)
            for (std::size_t d = 0; d < k; ++d)
                vertices[c][d] = corners[c][d] ? class_sep : -class_sep;
    }
    std::vector<std::vector<double>> mixing(n_clusters, std::vector<double>(k * k));
    for (auto& mat : mixing)
        for (double& a : mat) a = 2.0 * rng::uniform01(e) - 1.0;

    Dataset out;
    out.columns.assign(n_features, std::vector<double>(n_samples));
    out.labels.resize(n_samples);

    std::vector<double> u(k);
    for (std::size_t i = 0; i < n_samples; ++i) {
        std::size_t cluster = i % n_clusters;
        out.labels[i] = static_cast<int>(cluster % 2);
        for (std::size_t d = 0; d < k; ++d) u[d] = vertices[cluster][d] + rng::normal(e);
        const std::vector<double>& mat = mixing[cluster];
        for (std::size_t j = 0; j < k; ++j) {
            double s = 0.0;
            for (std::size_t d = 0; d < k; ++d) s += u[d] * mat[d * k + j];
            out.columns[j][i] = s;
        }
    }
    for (std::size_t j = k; j < n_features; ++j)
        for (std::size_t i = 0; i < n_samples; ++i) out.columns[j][i] = rng::normal(e);

    std::vector<std::size_t> perm = rng::permutation(n_features, e);
    std::vector<std::vector<double>> shuffled(n_features);
    std::vector<std::size_t> informative;
    for (std::size_t pos = 0; pos < n_features; ++pos) {
        shuffled[pos] = std::move(out.columns[perm[pos]]);
        if (perm[pos] < k) informative.push_back(pos);
    }
    out.columns = std::move(shuffled);
    out.names.resize(n_features);
    for (std::size_t j = 0; j < n_features; ++j) out.names[j] = "f" + std::to_string(j);
    out.noise_flags.assign(n_features, 0);
    out.ground_truth_informative = std::move(informative);
    return out;
}

}  // namespace llps
