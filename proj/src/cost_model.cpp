#include "dlsim/cost_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dlsim {

void ModelConfig::validate() const {
    auto require = [](int64_t v, const char* name) {
        if (v < 1) throw std::invalid_argument(std::string("model config: ") + name + " must be >= 1");
    };
    require(num_blocks, "num_blocks");
    require(hidden_dim, "hidden_dim");
    require(mlp_width, "mlp_width");
    require(diffusion_steps, "diffusion_steps");
    require(max_response_len, "max_response_len");
}

CostBreakdown per_block_flop(const ModelConfig& config, int64_t seq_len) {
    config.validate();
    if (seq_len < 0) throw std::invalid_argument("seq_len must be >= 0");
    const int128 L = seq_len;
    const int128 D = config.hidden_dim;
    const int128 F = config.mlp_width;
    CostBreakdown out;
    out.mlp_flop = checked_mul(checked_mul(6, L), checked_mul(D, F));
    out.proj_flop = checked_mul(checked_mul(8, L), checked_mul(D, D));
    out.attn_flop = checked_mul(checked_mul(4, D), checked_mul(L, L));
    out.total_flop = checked_add(checked_add(out.mlp_flop, out.proj_flop), out.attn_flop);
    return out;
}

int128 total_inference_flop(const ModelConfig& config, int64_t seq_len) {
    const CostBreakdown block = per_block_flop(config, seq_len);
    return checked_mul(checked_mul(config.diffusion_steps, static_cast<int128>(config.num_blocks)),
                       block.total_flop);
}

Crossover crossover_length(const ModelConfig& config) {
    config.validate();
    const int64_t alpha = 6 * config.mlp_width + 8 * config.hidden_dim;
    return Crossover{alpha / 4, alpha % 4};
}

namespace {

// Solves a 3x3 linear system in place with partial pivoting.
std::array<long double, 3> solve3(std::array<std::array<long double, 3>, 3> a,
                                  std::array<long double, 3> b) {
    for (int col = 0; col < 3; ++col) {
        int pivot = col;
        for (int row = col + 1; row < 3; ++row)
            if (std::fabs(a[row][col]) > std::fabs(a[pivot][col])) pivot = row;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        if (a[col][col] == 0.0L)
            throw std::runtime_error("degenerate fit: singular normal equations");
        for (int row = col + 1; row < 3; ++row) {
            long double factor = a[row][col] / a[col][col];
            for (int k = col; k < 3; ++k) a[row][k] -= factor * a[col][k];
            b[row] -= factor * b[col];
        }
    }
    std::array<long double, 3> x{};
    for (int row = 2; row >= 0; --row) {
        long double acc = b[row];
        for (int k = row + 1; k < 3; ++k) acc -= a[row][k] * x[k];
        x[row] = acc / a[row][row];
    }
    return x;
}

} // namespace

QuadraticFit fit_quadratic(const std::vector<CurvePoint>& points) {
    std::vector<double> distinct;
    distinct.reserve(points.size());
    for (const auto& p : points) distinct.push_back(p.seq_len);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (points.size() < 3 || distinct.size() < 3)
        throw std::runtime_error("degenerate fit: need at least 3 distinct seq_len values");

    const size_t n = points.size();
    long double x_mean = 0;
    for (const auto& p : points) x_mean += p.seq_len;
    x_mean /= static_cast<long double>(n);

    // Normal equations on the centered basis {1, u, u^2}, u = L - mean(L).
    long double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    long double t0 = 0, t1 = 0, t2 = 0;
    for (const auto& p : points) {
        const long double u = p.seq_len - x_mean;
        const long double u2 = u * u;
        s1 += u;
        s2 += u2;
        s3 += u2 * u;
        s4 += u2 * u2;
        t0 += p.flop;
        t1 += p.flop * u;
        t2 += p.flop * u2;
    }
    const long double s0 = static_cast<long double>(n);
    const auto c = solve3({{{s0, s1, s2}, {s1, s2, s3}, {s2, s3, s4}}}, {t0, t1, t2});

    long double ss_res = 0, ss_tot = 0;
    const long double y_mean = t0 / s0;
    for (const auto& p : points) {
        const long double u = p.seq_len - x_mean;
        const long double pred = c[0] + c[1] * u + c[2] * u * u;
        ss_res += (p.flop - pred) * (p.flop - pred);
        ss_tot += (p.flop - y_mean) * (p.flop - y_mean);
    }

    QuadraticFit fit;
    fit.quadratic_coeff = static_cast<double>(c[2]);
    fit.linear_coeff = static_cast<double>(c[1] - 2.0L * c[2] * x_mean);
    fit.intercept = static_cast<double>(c[0] - c[1] * x_mean + c[2] * x_mean * x_mean);
    if (ss_tot > 0)
        fit.r_squared = std::clamp(static_cast<double>(1.0L - ss_res / ss_tot), 0.0, 1.0);
    else
        fit.r_squared = ss_res == 0 ? 1.0 : 0.0;
    return fit;
}

std::vector<CurvePoint> load_curve_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open");
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    auto strip = [](std::string s) {
        s.erase(0, s.find_first_not_of(" \t\r"));
        s.erase(s.find_last_not_of(" \t\r") + 1);
        return s;
    };
    if (strip(line) != "seq_len,flop")
        throw std::runtime_error(path + ": expected header 'seq_len,flop', got '" + strip(line) + "'");
    std::vector<CurvePoint> points;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string trimmed = strip(line);
        if (trimmed.empty()) continue;
        const size_t comma = trimmed.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected two columns");
        try {
            CurvePoint p;
            p.seq_len = std::stod(strip(trimmed.substr(0, comma)));
            p.flop = static_cast<double>(std::stold(strip(trimmed.substr(comma + 1))));
            points.push_back(p);
        } catch (const std::exception&) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed number");
        }
    }
    return points;
}

void write_curve_csv(const std::string& path, const ModelConfig& config,
                     const std::vector<int64_t>& seq_lens) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "seq_len,flop\n";
    for (int64_t len : seq_lens)
        out << len << "," << to_string(total_inference_flop(config, len)) << "\n";
    if (!out) throw std::runtime_error(path + ": write failed");
}

} // namespace dlsim
