#pragma once

// Latent embedding datasets: text file I/O and synthetic generation.
//
// File grammar (UTF-8, whitespace separated):
//
//   block  := header NL row{n}
//   header := "K=" int " n=" int " split=" ("train" | "test")
//   row    := label (" " float){K}
//
// A file holds one or more blocks; blocks of the same split are concatenated.
// Binary files use labels -1/+1. Multiclass files (for class-pair benchmarks)
// allow any integer label. Blank lines and lines starting with '#' are skipped.

#include "bal/common.hpp"
#include "bal/random.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace bal {

template <typename L>
struct BasicSplit {
    std::vector<Vec> points;
    std::vector<L> labels;

    std::size_t size() const { return points.size(); }
};

using Split = BasicSplit<Label>;

struct EmbeddedDataset {
    Eigen::Index dim = 0;
    Split train;
    Split test;
    std::string name;
};

struct MulticlassDataset {
    Eigen::Index dim = 0;
    BasicSplit<long> train;
    BasicSplit<long> test;
    std::string name;

    std::vector<long> classes() const {
        std::set<long> seen(train.labels.begin(), train.labels.end());
        return {seen.begin(), seen.end()};
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

/// Splits on runs of spaces/tabs.
inline std::vector<std::string_view> tokens(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

[[noreturn]] inline void fail_at(std::size_t line_no, const std::string& what) {
    throw DataError("line " + std::to_string(line_no) + ": " + what);
}

inline MulticlassDataset parse_blocks(std::istream& in, const std::string& name) {
    MulticlassDataset out;
    out.name = name;
    std::string raw;
    std::size_t line_no = 0;
    long remaining = 0;
    BasicSplit<long>* target = nullptr;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto tok = tokens(line);
        if (remaining == 0) {
            if (tok.size() != 3 || !tok[0].starts_with("K=") || !tok[1].starts_with("n=") ||
                !tok[2].starts_with("split="))
                fail_at(line_no, "expected header 'K=<int> n=<int> split={train|test}'");
            long k = 0, n = 0;
            if (!parse_number(tok[0].substr(2), k) || k < 1) fail_at(line_no, "bad K in header");
            if (!parse_number(tok[1].substr(2), n) || n < 0) fail_at(line_no, "bad n in header");
            const auto split = tok[2].substr(6);
            if (split == "train") {
                target = &out.train;
            } else if (split == "test") {
                target = &out.test;
            } else {
                fail_at(line_no, "split must be train or test");
            }
            if (out.dim != 0 && out.dim != k) fail_at(line_no, "dimension mismatch between blocks");
            out.dim = k;
            remaining = n;
            continue;
        }
        if (static_cast<long>(tok.size()) != out.dim + 1)
            fail_at(line_no, "expected " + std::to_string(out.dim + 1) + " values, got " + std::to_string(tok.size()));
        long label = 0;
        if (!parse_number(tok[0], label)) fail_at(line_no, "bad label '" + std::string(tok[0]) + "'");
        Vec z(out.dim);
        for (Eigen::Index i = 0; i < out.dim; ++i) {
            double v = 0.0;
            if (!parse_number(tok[static_cast<std::size_t>(i) + 1], v) || !std::isfinite(v))
                fail_at(line_no, "bad value '" + std::string(tok[static_cast<std::size_t>(i) + 1]) + "'");
            z[i] = v;
        }
        target->points.push_back(std::move(z));
        target->labels.push_back(label);
        --remaining;
    }
    if (remaining != 0) fail_at(line_no, "file ended with " + std::to_string(remaining) + " rows missing");
    return out;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return in;
}

inline void append_split(const BasicSplit<long>& from, Split& to, const std::string& which) {
    for (std::size_t i = 0; i < from.size(); ++i) {
        if (!is_label(from.labels[i]))
            throw DataError(which + " row " + std::to_string(i + 1) + ": label " + std::to_string(from.labels[i]) +
                            " outside {-1,+1}");
        to.points.push_back(from.points[i]);
        to.labels.push_back(static_cast<Label>(from.labels[i]));
    }
}

}  // namespace detail

/// Throws DataError unless both classes appear in train and test and every
/// vector is finite with dimension K.
inline void validate(const EmbeddedDataset& d) {
    auto check = [&](const Split& s, const char* which) {
        bool pos = false, neg = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s.points[i].size() != d.dim) throw DataError(std::string(which) + ": dimension mismatch");
            if (!s.points[i].allFinite()) throw DataError(std::string(which) + ": non-finite value");
            if (!is_label(s.labels[i])) throw DataError(std::string(which) + ": label outside {-1,+1}");
            (s.labels[i] > 0 ? pos : neg) = true;
        }
        if (!pos || !neg) throw DataError(std::string(which) + " split must contain both classes");
    };
    if (d.dim < 1) throw DataError("dimension must be positive");
    check(d.train, "train");
    check(d.test, "test");
}

inline MulticlassDataset load_multiclass_file(const std::string& path) {
    auto in = detail::open_input(path);
    auto data = detail::parse_blocks(in, path);
    if (data.train.size() == 0 || data.test.size() == 0) throw DataError(path + ": needs train and test rows");
    return data;
}

inline EmbeddedDataset to_binary(const MulticlassDataset& mc) {
    EmbeddedDataset d;
    d.dim = mc.dim;
    d.name = mc.name;
    detail::append_split(mc.train, d.train, "train");
    detail::append_split(mc.test, d.test, "test");
    validate(d);
    return d;
}

inline EmbeddedDataset parse_embedding(std::istream& in, const std::string& name = "stream") {
    return to_binary(detail::parse_blocks(in, name));
}

/// One file holding both a train and a test block.
inline EmbeddedDataset load_embedding_file(const std::string& path) {
    auto in = detail::open_input(path);
    return parse_embedding(in, path);
}

/// A train file and a test file, each holding blocks of its own split.
inline EmbeddedDataset load_embedding_files(const std::string& train_path, const std::string& test_path) {
    auto tin = detail::open_input(train_path);
    auto ein = detail::open_input(test_path);
    auto train = detail::parse_blocks(tin, train_path);
    auto test = detail::parse_blocks(ein, test_path);
    if (train.test.size() != 0 || test.train.size() != 0) throw DataError("split blocks in the wrong file");
    if (train.dim != test.dim) throw DataError("dimension mismatch between train and test files");
    train.test = std::move(test.test);
    return to_binary(train);
}

/// Binary task "first vs second" carved out of a multiclass set; first maps to -1.
inline EmbeddedDataset class_pair(const MulticlassDataset& mc, long first, long second) {
    EmbeddedDataset d;
    d.dim = mc.dim;
    d.name = mc.name + ":" + std::to_string(first) + "v" + std::to_string(second);
    auto take = [&](const BasicSplit<long>& from, Split& to) {
        for (std::size_t i = 0; i < from.size(); ++i) {
            if (from.labels[i] == first || from.labels[i] == second) {
                to.points.push_back(from.points[i]);
                to.labels.push_back(from.labels[i] == first ? -1 : 1);
            }
        }
    };
    take(mc.train, d.train);
    take(mc.test, d.test);
    validate(d);
    return d;
}

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

template <typename L>
void write_block(std::ostream& out, Eigen::Index dim, const BasicSplit<L>& split, const char* which) {
    out << "K=" << dim << " n=" << split.size() << " split=" << which << '\n';
    for (std::size_t i = 0; i < split.size(); ++i) {
        out << split.labels[i];
        for (Eigen::Index k = 0; k < dim; ++k) out << ' ' << format_double(split.points[i][k]);
        out << '\n';
    }
}

inline void write_embedding(std::ostream& out, const EmbeddedDataset& d) {
    write_block(out, d.dim, d.train, "train");
    write_block(out, d.dim, d.test, "test");
}

inline void save_embedding_file(const std::string& path, const EmbeddedDataset& d) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    write_embedding(out, d);
}

struct SynthSpec {
    Eigen::Index dim = 16;
    std::size_t n_train = 2000;
    std::size_t n_test = 1000;
    double separation = 3.0;
    std::uint64_t seed = 0;
};

/// Two unit-covariance Gaussians centred at +-separation/2 along the first
/// axis. Labels alternate +1, -1 so both classes are always present.
inline EmbeddedDataset synth_two_gaussians(const SynthSpec& spec) {
    if (spec.dim < 1) throw ConfigError("dimension must be positive");
    if (!(spec.separation >= 0.0)) throw ConfigError("separation must be non-negative");
    if (spec.n_train < 2 || spec.n_test < 2) throw ConfigError("need at least two train and two test points");
    EmbeddedDataset d;
    d.dim = spec.dim;
    d.name = "synth(K=" + std::to_string(spec.dim) + ",sep=" + format_double(spec.separation) +
             ",seed=" + std::to_string(spec.seed) + ")";
    auto fill = [&](Split& split, std::size_t n, std::uint64_t stream) {
        Xoshiro256 rng(derive_seed(spec.seed, stream));
        for (std::size_t i = 0; i < n; ++i) {
            const Label y = (i % 2 == 0) ? 1 : -1;
            Vec z(spec.dim);
            for (Eigen::Index k = 0; k < spec.dim; ++k) z[k] = rng.gaussian();
            z[0] += y * spec.separation / 2.0;
            split.points.push_back(std::move(z));
            split.labels.push_back(y);
        }
    };
    fill(d.train, spec.n_train, 1);
    fill(d.test, spec.n_test, 2);
    return d;
}

}  // namespace bal
