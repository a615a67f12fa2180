#pragma once

#include <optional>
#include <vector>

#include "usdiff/grid.hpp"

namespace usdiff {

enum class AlphaKind { Linear, Cosine };
enum class GammaKind { SquareRoot, Linear };
enum class OutsideConeMode { Gamma, One, RowValue };

// Per-timestep scalar schedule, indexed t = 1..T.
struct ScheduleTable {
    int T = 0;
    std::vector<double> beta;       // beta[t-1]
    std::vector<double> alpha;      // alpha[t-1] = 1 - beta[t-1]
    std::vector<double> alpha_bar;  // alpha_bar[t-1] = prod_{s<=t} alpha[s-1]

    double beta_at(int t) const { return beta[static_cast<std::size_t>(t) - 1]; }
    double alpha_at(int t) const { return alpha[static_cast<std::size_t>(t) - 1]; }
    // alpha_bar_at(0) == 1 (empty product), used by the t=1 posterior limit.
    double alpha_bar_at(int t) const {
        return t == 0 ? 1.0 : alpha_bar[static_cast<std::size_t>(t) - 1];
    }
};

ScheduleTable alpha_schedule(AlphaKind kind, int T);

// Builds a table from explicit per-step betas. Used by the verification
// sweeps, where the step coefficients are drawn directly.
ScheduleTable schedule_from_betas(const std::vector<double>& betas);

// Sector-shaped field of view of a curvilinear/phased probe, in pixel units.
// The apex may sit above the grid (negative row). A pixel is inside the cone
// when it lies below the apex, within the half-angle around straight-down,
// and at least near_radius away from the apex.
struct ConeSpec {
    double apex_row = 0.0;
    double apex_col = 0.0;
    double half_angle_deg = 30.0;
    double near_radius = 0.0;
};

struct BMapSpec {
    int height = 0;
    int width = 0;
    double eps_b = 0.04;  // terminal depth-decay magnitude, in (0,1)
    GammaKind gamma_kind = GammaKind::SquareRoot;
    std::optional<ConeSpec> cone;
    OutsideConeMode outside_mode = OutsideConeMode::Gamma;
};

// 1 inside the cone, 0 outside. All-ones when spec carries no cone.
ImageGrid cone_mask(const std::optional<ConeSpec>& cone, int height, int width);

// Bottom-row target value of the B-map at each step: gamma_0 = 1 descending
// to gamma_T = 1 - eps_b. Returned vector has T+1 entries, index = t.
std::vector<double> gamma_trajectory(GammaKind kind, int T, double eps_b);

// One per-pixel multiplier map. Inside the cone the value ramps linearly
// from 1 at row 0 down to gamma_t at the bottom row; outside it follows
// spec.outside_mode.
ImageGrid build_bmap(double gamma_t, const BMapSpec& spec);

// B_t, the cumulative products B_bar_t, and the per-pixel signal
// coefficients alpha_bar_t * B_bar_t, all for t = 1..T.
struct BMapStack {
    BMapSpec spec;
    int T = 0;
    std::vector<ImageGrid> B;             // B[t-1]
    std::vector<ImageGrid> B_bar;         // B_bar[t-1]
    std::vector<ImageGrid> signal_coeff;  // signal_coeff[t-1] = alpha_bar_t * B_bar_t

    const ImageGrid& B_at(int t) const { return B[static_cast<std::size_t>(t) - 1]; }
    const ImageGrid& B_bar_at(int t) const { return B_bar[static_cast<std::size_t>(t) - 1]; }
    const ImageGrid& coeff_at(int t) const {
        return signal_coeff[static_cast<std::size_t>(t) - 1];
    }
    int height() const { return spec.height; }
    int width() const { return spec.width; }
};

BMapStack build_bmap_stack(const ScheduleTable& sched, const BMapSpec& spec);

// Signal-to-noise ratio of the closed-form marginal at step t:
// c / (1 - c) with c = alpha_bar_t * B_bar_t.
ImageGrid per_pixel_snr(const BMapStack& stack, int t);

void require_timestep(int t, int T, const char* op);

}  // namespace usdiff
