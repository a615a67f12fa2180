#include "usdiff/schedule.hpp"

#include <cmath>
#include <string>

namespace usdiff {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kCosineOffset = 0.008;  // the usual small offset s
constexpr double kBetaClamp = 0.999;     // guards the degenerate final steps

double cosine_f(double u_over_T) {
    const double arg = ((u_over_T + kCosineOffset) / (1.0 + kCosineOffset)) * (kPi / 2.0);
    const double c = std::cos(arg);
    return c * c;
}
}  // namespace

void require_timestep(int t, int T, const char* op) {
    if (t < 1 || t > T) {
        throw IndexError(std::string(op) + ": timestep " + std::to_string(t) +
                         " outside 1.." + std::to_string(T));
    }
}

ScheduleTable schedule_from_betas(const std::vector<double>& betas) {
    if (betas.empty()) throw DimensionError("schedule_from_betas: empty beta sequence");
    ScheduleTable tab;
    tab.T = static_cast<int>(betas.size());
    tab.beta = betas;
    tab.alpha.resize(betas.size());
    tab.alpha_bar.resize(betas.size());
    double running = 1.0;
    for (std::size_t i = 0; i < betas.size(); ++i) {
        if (!(betas[i] > 0.0 && betas[i] < 1.0)) {
            throw ParameterError("schedule_from_betas: beta must lie in (0,1), got " +
                                 std::to_string(betas[i]));
        }
        tab.alpha[i] = 1.0 - betas[i];
        running *= tab.alpha[i];
        tab.alpha_bar[i] = running;
    }
    return tab;
}

ScheduleTable alpha_schedule(AlphaKind kind, int T) {
    if (T < 1) throw DimensionError("alpha_schedule: T must be >= 1");
    std::vector<double> betas(static_cast<std::size_t>(T));
    if (kind == AlphaKind::Linear) {
        const double lo = 1e-4, hi = 0.02;
        for (int t = 1; t <= T; ++t) {
            betas[t - 1] = (T == 1) ? lo : lo + (hi - lo) * (t - 1) / static_cast<double>(T - 1);
        }
    } else {
        const double f0 = cosine_f(0.0);
        double prev = 1.0;
        for (int t = 1; t <= T; ++t) {
            const double cur = cosine_f(static_cast<double>(t) / T) / f0;
            double beta = 1.0 - cur / prev;
            if (beta > kBetaClamp) beta = kBetaClamp;
            betas[t - 1] = beta;
            prev = cur;
        }
    }
    return schedule_from_betas(betas);
}

std::vector<double> gamma_trajectory(GammaKind kind, int T, double eps_b) {
    if (!(eps_b > 0.0 && eps_b < 1.0)) {
        throw ParameterError("gamma_trajectory: eps_b must lie in (0,1), got " +
                             std::to_string(eps_b));
    }
    if (T < 1) throw DimensionError("gamma_trajectory: T must be >= 1");
    std::vector<double> gamma(static_cast<std::size_t>(T) + 1);
    for (int t = 0; t <= T; ++t) {
        const double frac = static_cast<double>(t) / T;
        const double shape = (kind == GammaKind::SquareRoot) ? std::sqrt(frac) : frac;
        gamma[static_cast<std::size_t>(t)] = 1.0 - eps_b * shape;
    }
    return gamma;
}

ImageGrid cone_mask(const std::optional<ConeSpec>& cone, int height, int width) {
    ImageGrid mask(height, width, 1.0);
    if (!cone) return mask;
    const double tan_half = std::tan(cone->half_angle_deg * kPi / 180.0);
    for (int r = 0; r < height; ++r) {
        const double dr = r - cone->apex_row;
        for (int c = 0; c < width; ++c) {
            const double dc = c - cone->apex_col;
            const bool below = dr > 0.0;
            const bool in_sector = below && std::abs(dc) <= dr * tan_half;
            const bool past_near = dr * dr + dc * dc >= cone->near_radius * cone->near_radius;
            mask.at(r, c) = (in_sector && past_near) ? 1.0 : 0.0;
        }
    }
    return mask;
}

ImageGrid build_bmap(double gamma_t, const BMapSpec& spec) {
    if (gamma_t > 1.0 || gamma_t < 1.0 - spec.eps_b) {
        throw ParameterError("build_bmap: gamma_t " + std::to_string(gamma_t) +
                             " outside [1-eps_b, 1]");
    }
    ImageGrid bmap(spec.height, spec.width);
    const ImageGrid mask = cone_mask(spec.cone, spec.height, spec.width);
    const int H = spec.height;
    const double decay = 1.0 - gamma_t;
    for (int r = 0; r < H; ++r) {
        // Row value ramps 1 -> gamma_t; a single row stays at 1.
        const double row_frac = (H > 1) ? static_cast<double>(r) / (H - 1) : 0.0;
        const double inside_value = 1.0 - row_frac * decay;
        for (int c = 0; c < spec.width; ++c) {
            double v = inside_value;
            if (mask.at(r, c) == 0.0) {
                switch (spec.outside_mode) {
                    case OutsideConeMode::Gamma: v = gamma_t; break;
                    case OutsideConeMode::One: v = 1.0; break;
                    case OutsideConeMode::RowValue: v = inside_value; break;
                }
            }
            bmap.at(r, c) = v;
        }
    }
    return bmap;
}

BMapStack build_bmap_stack(const ScheduleTable& sched, const BMapSpec& spec) {
    if (spec.height < 1 || spec.width < 1) {
        throw DimensionError("build_bmap_stack: dimensions must be >= 1");
    }
    if (spec.cone) {
        const ImageGrid mask = cone_mask(spec.cone, spec.height, spec.width);
        if (mask.max_value() == 0.0) {
            throw ParameterError("build_bmap_stack: cone does not intersect the grid");
        }
    }
    const std::vector<double> gamma = gamma_trajectory(spec.gamma_kind, sched.T, spec.eps_b);

    BMapStack stack;
    stack.spec = spec;
    stack.T = sched.T;
    stack.B.reserve(static_cast<std::size_t>(sched.T));
    stack.B_bar.reserve(static_cast<std::size_t>(sched.T));
    stack.signal_coeff.reserve(static_cast<std::size_t>(sched.T));

    ImageGrid running(spec.height, spec.width, 1.0);
    const std::int64_t n = static_cast<std::int64_t>(running.size());
    for (int t = 1; t <= sched.T; ++t) {
        ImageGrid b = build_bmap(gamma[static_cast<std::size_t>(t)], spec);
        ImageGrid bar(spec.height, spec.width);
        ImageGrid coeff(spec.height, spec.width);
        const double abar = sched.alpha_bar_at(t);
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) {
            const std::size_t k = static_cast<std::size_t>(i);
            bar[k] = running[k] * b[k];
            coeff[k] = abar * bar[k];
        }
        running = bar;
        stack.B.push_back(std::move(b));
        stack.B_bar.push_back(std::move(bar));
        stack.signal_coeff.push_back(std::move(coeff));
    }
    return stack;
}

ImageGrid per_pixel_snr(const BMapStack& stack, int t) {
    require_timestep(t, stack.T, "per_pixel_snr");
    const ImageGrid& c = stack.coeff_at(t);
    ImageGrid snr(c.height(), c.width());
    for (std::size_t i = 0; i < c.size(); ++i) snr[i] = c[i] / (1.0 - c[i]);
    return snr;
}

}  // namespace usdiff
