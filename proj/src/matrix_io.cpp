#include "bdr/matrix_io.hpp"

#include "bdr/errors.hpp"

#include <array>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>

namespace bdr {

namespace {

bool parse_row(const std::string& line, std::vector<double>& out) {
    out.clear();
    std::size_t pos = 0;
    while (pos < line.size()) {
        std::size_t comma = line.find(',', pos);
        if (comma == std::string::npos) comma = line.size();
        const std::string field = line.substr(pos, comma - pos);
        try {
            std::size_t consumed = 0;
            const double v = std::stod(field, &consumed);
            // Allow trailing whitespace only.
            for (std::size_t i = consumed; i < field.size(); ++i) {
                if (!std::isspace(static_cast<unsigned char>(field[i]))) return false;
            }
            out.push_back(v);
        } catch (const std::exception&) {
            return false;
        }
        pos = comma + 1;
    }
    return !out.empty();
}

}  // namespace

Eigen::MatrixXd load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open CSV file: " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    std::vector<double> row;
    bool saw_data = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!parse_row(line, row)) {
            if (!saw_data) continue;  // header row
            throw Error("malformed CSV row in " + path.string() + ": " + line);
        }
        saw_data = true;
        if (!rows.empty() && row.size() != rows.front().size())
            throw Error("ragged CSV rows in " + path.string());
        rows.push_back(row);
    }
    if (rows.empty()) throw Error("empty CSV file: " + path.string());
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void save_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m,
              const std::vector<std::string>& header,
              const std::vector<std::string>& comments) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write CSV file: " + path.string());
    for (const auto& c : comments) out << "# " << c << "\n";
    if (!header.empty()) {
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (j) out << ",";
            out << header[j];
        }
        out << "\n";
    }
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out << ",";
            out << format_double(m(i, j));
        }
        out << "\n";
    }
    if (!out) throw Error("failed writing CSV file: " + path.string());
}

namespace {
constexpr std::array<char, 4> kMagic = {'B', 'D', 'R', '1'};

void put_u64(std::ofstream& out, std::uint64_t v) {
    std::array<unsigned char, 8> b{};
    for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b.data()), 8);
}

std::uint64_t get_u64(std::ifstream& in) {
    std::array<unsigned char, 8> b{};
    in.read(reinterpret_cast<char*>(b.data()), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
    return v;
}
}  // namespace

void save_bdr1(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write matrix file: " + path.string());
    out.write(kMagic.data(), 4);
    put_u64(out, static_cast<std::uint64_t>(m.rows()));
    put_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double v = m(i, j);
            out.write(reinterpret_cast<const char*>(&v), sizeof v);
        }
    if (!out) throw Error("failed writing matrix file: " + path.string());
}

Eigen::MatrixXd load_bdr1(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open matrix file: " + path.string());
    std::array<char, 4> magic{};
    in.read(magic.data(), 4);
    if (!in || magic != kMagic) throw Error("not a BDR1 matrix file: " + path.string());
    const std::uint64_t rows = get_u64(in);
    const std::uint64_t cols = get_u64(in);
    if (!in || rows == 0 || cols == 0 || rows * cols > (1ull << 32))
        throw Error("bad BDR1 header in " + path.string());
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            double v = 0;
            in.read(reinterpret_cast<char*>(&v), sizeof v);
            m(i, j) = v;
        }
    if (!in) throw Error("truncated BDR1 payload in " + path.string());
    return m;
}

Eigen::MatrixXd load_matrix(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open matrix file: " + path.string());
    std::array<char, 4> magic{};
    in.read(magic.data(), 4);
    if (in && magic == kMagic) return load_bdr1(path);
    return load_csv(path);
}

}  // namespace bdr
