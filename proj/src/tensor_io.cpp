#include "ocpd/tensor_io.hpp"

#include "ocpd/error.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace ocpd {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot read " + path.string());
    }
    return in;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        cells.push_back(cell);
    }
    return cells;
}

double parse_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') {
        throw Error(ErrorCode::ParseError, "not a number: '" + s + "'");
    }
    return v;
}

std::size_t parse_index(const std::string& s) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw Error(ErrorCode::ParseError, "not an index: '" + s + "'");
    }
    return v;
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
    auto p = csv_path;
    p.replace_extension(".json");
    return p;
}

void write_tensor_csv(const DenseTensor3& t, std::ostream& out) {
    out << "i,j,k,value\n";
    for (std::size_t i = 0; i < t.dim_i(); ++i)
        for (std::size_t j = 0; j < t.dim_j(); ++j)
            for (std::size_t k = 0; k < t.dim_k(); ++k)
                out << i << ',' << j << ',' << k << ',' << format_double(t(i, j, k)) << '\n';
}

void write_tensor(const DenseTensor3& t, const std::filesystem::path& csv_path) {
    {
        auto out = open_out(csv_path);
        write_tensor_csv(t, out);
        if (!out) throw Error(ErrorCode::IoError, "write failed: " + csv_path.string());
    }
    auto side = open_out(sidecar_path(csv_path));
    nlohmann::ordered_json dims;
    dims["I"] = t.dim_i();
    dims["J"] = t.dim_j();
    dims["K"] = t.dim_k();
    side << dims.dump() << '\n';
}

DenseTensor3 read_tensor_csv(std::istream& in, std::size_t I, std::size_t J, std::size_t K) {
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(ErrorCode::ParseError, "empty tensor file");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "i,j,k,value") {
        throw Error(ErrorCode::ParseError, "expected header 'i,j,k,value'");
    }
    std::vector<double> values(I * J * K, 0.0);
    std::vector<char> seen(I * J * K, 0);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv(line);
        if (cells.size() != 4) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 4 fields");
        }
        const std::size_t i = parse_index(cells[0]);
        const std::size_t j = parse_index(cells[1]);
        const std::size_t k = parse_index(cells[2]);
        if (i >= I || j >= J || k >= K) {
            throw Error(ErrorCode::ShapeMismatch, "line " + std::to_string(line_no) + ": index out of range");
        }
        const std::size_t off = (i * J + j) * K + k;
        if (seen[off]) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": duplicate cell");
        }
        seen[off] = 1;
        values[off] = parse_double(cells[3]);
    }
    for (std::size_t n = 0; n < seen.size(); ++n) {
        if (!seen[n]) {
            throw Error(ErrorCode::ParseError, "missing cell at offset " + std::to_string(n));
        }
    }
    return DenseTensor3(I, J, K, std::move(values));
}

DenseTensor3 read_tensor(const std::filesystem::path& csv_path) {
    nlohmann::json dims;
    {
        auto side = open_in(sidecar_path(csv_path));
        try {
            side >> dims;
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ParseError, std::string("sidecar: ") + e.what());
        }
    }
    std::size_t I = 0, J = 0, K = 0;
    try {
        I = dims.at("I").get<std::size_t>();
        J = dims.at("J").get<std::size_t>();
        K = dims.at("K").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("sidecar: ") + e.what());
    }
    auto in = open_in(csv_path);
    return read_tensor_csv(in, I, J, K);
}

void write_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "row";
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << ",c" << c;
    out << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        out << r;
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << format_double(m(r, c));
        out << '\n';
    }
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty matrix file");
    const auto header = split_csv(line);
    if (header.empty() || header[0] != "row") throw Error(ErrorCode::ParseError, "expected 'row,...' header");
    const auto cols = static_cast<Eigen::Index>(header.size() - 1);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv(line);
        if (static_cast<Eigen::Index>(cells.size()) != cols + 1) {
            throw Error(ErrorCode::ParseError, "ragged matrix row");
        }
        std::vector<double> row;
        for (std::size_t c = 1; c < cells.size(); ++c) row.push_back(parse_double(cells[c]));
        rows.push_back(std::move(row));
    }
    Matrix m(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = rows[r][c];
    return m;
}

void write_factors(const KruskalFactors& f, const std::filesystem::path& prefix) {
    const std::string base = prefix.string();
    write_matrix_csv(f.A, base + "_A.csv");
    write_matrix_csv(f.B, base + "_B.csv");
    write_matrix_csv(f.C, base + "_C.csv");
}

} // namespace ocpd
