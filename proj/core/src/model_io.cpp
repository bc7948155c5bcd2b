#include "brt/model_io.hpp"

#include <fstream>
#include <sstream>

#include "brt/errors.hpp"
#include "brt/util.hpp"

namespace brt {

namespace {

constexpr const char* kMagic = "brt-model";
constexpr const char* kVersion = "v1";

void append_matrix(std::ostream& out, const char* name, const Matrix9& m) {
    out << name;
    for (int col = 0; col < kNumCoeffs; ++col) {
        for (int row = 0; row < kNumCoeffs; ++row) {
            out << ' ' << format_double(m(row, col));
        }
    }
    out << '\n';
}

std::vector<double> parse_values(std::string_view rest, std::size_t expected,
                                 const std::string& src, std::size_t line_no) {
    std::vector<double> vals;
    vals.reserve(expected);
    for (auto tok : split(rest, ' ')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        double v = 0.0;
        if (!parse_double(tok, v)) {
            throw ParseError(src, line_no, "malformed numeric value '" + std::string(tok) + "'");
        }
        vals.push_back(v);
    }
    if (vals.size() != expected) {
        throw ParseError(src, line_no,
                         "expected " + std::to_string(expected) + " values, found " +
                             std::to_string(vals.size()));
    }
    return vals;
}

Matrix9 to_matrix(const std::vector<double>& vals) {
    Matrix9 m;
    std::size_t k = 0;
    for (int col = 0; col < kNumCoeffs; ++col) {
        for (int row = 0; row < kNumCoeffs; ++row) {
            m(row, col) = vals[k++];
        }
    }
    return m;
}

}  // namespace

void save_model(const std::filesystem::path& file, const MixedModelParams& params) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write model file: " + file.string());
    save_model(out, params);
}

void save_model(std::ostream& out, const MixedModelParams& params) {
    std::ostringstream body;
    body << kMagic << ' ' << kVersion << '\n';
    body << "beta";
    for (int k = 0; k < kNumCoeffs; ++k) body << ' ' << format_double(params.beta[k]);
    body << '\n';
    body << "sigma2 " << format_double(params.sigma2) << '\n';
    append_matrix(body, "sigma_gamma", params.sigma_gamma);
    append_matrix(body, "cov_beta", params.cov_beta);
    body << "meta " << params.meta.n_observations << ' ' << params.meta.n_drivers << ' '
         << format_double(params.meta.log_likelihood) << '\n';

    std::string text = body.str();
    out << text << "checksum " << to_hex(fnv1a64(text)) << '\n';
}

MixedModelParams load_model(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open model file: " + file.string());
    return load_model(in, file.string());
}

MixedModelParams load_model(std::istream& in, const std::string& src) {
    std::vector<std::string> lines;
    std::string raw;
    while (std::getline(in, raw)) lines.push_back(raw);
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    if (lines.size() < 7) throw ParseError(src, lines.size(), "truncated model file");

    // The checksum line covers everything before it, byte for byte.
    const std::string& checksum_line = lines.back();
    if (checksum_line.rfind("checksum ", 0) != 0) {
        throw ParseError(src, lines.size(), "missing checksum line");
    }
    std::string body;
    for (std::size_t k = 0; k + 1 < lines.size(); ++k) {
        body += lines[k];
        body += '\n';
    }
    std::string expected = to_hex(fnv1a64(body));
    std::string found(trim(checksum_line.substr(9)));
    if (found != expected) {
        throw ValidationError(src + ": model checksum mismatch (file corrupted or truncated)");
    }

    auto header = split(lines[0], ' ');
    if (header.size() != 2 || trim(header[0]) != kMagic) {
        throw ParseError(src, 1, "not a model file");
    }
    if (trim(header[1]) != kVersion) {
        throw ParseError(src, 1,
                         "unsupported model version '" + std::string(trim(header[1])) + "'");
    }

    auto field = [&](std::size_t idx, const char* name) -> std::string_view {
        std::string_view line = lines[idx];
        std::string prefix = std::string(name) + " ";
        if (line.rfind(prefix, 0) != 0) {
            throw ParseError(src, idx + 1, "expected '" + std::string(name) + "' line");
        }
        return line.substr(prefix.size());
    };

    MixedModelParams params;
    auto beta_vals = parse_values(field(1, "beta"), kNumCoeffs, src, 2);
    for (int k = 0; k < kNumCoeffs; ++k) params.beta[k] = beta_vals[k];
    auto s2_vals = parse_values(field(2, "sigma2"), 1, src, 3);
    params.sigma2 = s2_vals[0];
    if (!(params.sigma2 > 0.0)) {
        throw ValidationError(src + ": sigma2 must be > 0");
    }
    params.sigma_gamma =
        to_matrix(parse_values(field(3, "sigma_gamma"), kNumCoeffs * kNumCoeffs, src, 4));
    params.cov_beta =
        to_matrix(parse_values(field(4, "cov_beta"), kNumCoeffs * kNumCoeffs, src, 5));
    auto meta_vals = parse_values(field(5, "meta"), 3, src, 6);
    params.meta.n_observations = static_cast<int>(meta_vals[0]);
    params.meta.n_drivers = static_cast<int>(meta_vals[1]);
    params.meta.log_likelihood = meta_vals[2];
    params.meta.converged = true;
    return params;
}

}  // namespace brt
