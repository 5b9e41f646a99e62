#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsfb {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Discrete two-sided noise model on [0,T] with N uniform steps.
//
// Per step there is one group of d independent +/-sqrt(dt) coins for the
// forward driver W and one group of lB coins for the backward driver B.
// A field adapted at step k depends on the W coins of steps 0..k-1 and the
// B coins of steps k..N-1; its table index packs the W coin bits as the low
// k*d bits and the B coin bits as the high (N-k)*lB bits.
//
// A junction table at step k covers the transition k -> k+1: it additionally
// depends on the step-k W coins, so its index packs W coins of steps 0..k
// (low (k+1)*d bits) followed by B coins of steps k..N-1.
class TwoSidedLattice {
public:
    TwoSidedLattice(double horizon, int steps, int dim_w = 1, int dim_b = 1);

    double T() const { return T_; }
    int N() const { return N_; }
    double dt() const { return dt_; }
    double coin() const { return s_; }  // increment magnitude sqrt(dt)
    int dim_w() const { return d_; }
    int dim_b() const { return lB_; }
    double t(int k) const { return dt_ * k; }

    int level_bits(int k) const { return k * d_ + (N_ - k) * lB_; }
    std::size_t level_size(int k) const { return std::size_t{1} << level_bits(k); }
    int junction_bits(int k) const { return (k + 1) * d_ + (N_ - k) * lB_; }
    std::size_t junction_size(int k) const { return std::size_t{1} << junction_bits(k); }

    // total number of coins; full-outcome tables index W coins of steps
    // 0..N-1 (low N*d bits) then B coins of steps 0..N-1
    int total_bits() const { return N_ * (d_ + lB_); }

    // junction index -> adapted index at step k (drop the step-k W coin group)
    std::size_t junction_to_level(int k, std::size_t j) const {
        const std::size_t lo = j & ((std::size_t{1} << (k * d_)) - 1);
        return lo | ((j >> ((k + 1) * d_)) << (k * d_));
    }
    // junction index -> adapted index at step k+1 (drop the step-k B coin group)
    std::size_t junction_to_level_next(int k, std::size_t j) const {
        const int keep = (k + 1) * d_;
        const std::size_t lo = j & ((std::size_t{1} << keep) - 1);
        return lo | ((j >> (keep + lB_)) << keep);
    }
    // increments read off a junction index
    double dW(int k, std::size_t j, int c) const {
        return ((j >> (k * d_ + c)) & 1) ? s_ : -s_;
    }
    double dB(int k, std::size_t j, int c) const {
        return ((j >> ((k + 1) * d_ + c)) & 1) ? s_ : -s_;
    }
    // increments read off a full-outcome index
    double full_dW(int k, std::size_t o, int c) const {
        return ((o >> (k * d_ + c)) & 1) ? s_ : -s_;
    }
    double full_dB(int k, std::size_t o, int c) const {
        return ((o >> (N_ * d_ + k * lB_ + c)) & 1) ? s_ : -s_;
    }
    // full-outcome index -> adapted index at step k
    std::size_t full_to_level(int k, std::size_t o) const {
        const std::size_t w = o & ((std::size_t{1} << (k * d_)) - 1);
        const std::size_t b = (o >> (N_ * d_ + k * lB_)) & ((std::size_t{1} << ((N_ - k) * lB_)) - 1);
        return w | (b << (k * d_));
    }

private:
    double T_, dt_, s_;
    int N_, d_, lB_;
};

// Values attached to the nodes of one adapted level.
struct LevelField {
    const TwoSidedLattice* lat = nullptr;
    int step = 0;
    int dim = 1;
    std::vector<double> data;  // node-major: data[node * dim + c]

    LevelField() = default;
    LevelField(const TwoSidedLattice& l, int k, int m, double fill = 0.0)
        : lat(&l), step(k), dim(m), data(l.level_size(k) * m, fill) {}

    double* node(std::size_t i) { return data.data() + i * dim; }
    const double* node(std::size_t i) const { return data.data() + i * dim; }
};

// A process: one LevelField-shaped table per step 0..N.
struct AdaptedField {
    const TwoSidedLattice* lat = nullptr;
    int dim = 1;
    std::vector<std::vector<double>> level;  // level[k][node * dim + c]

    AdaptedField() = default;
    AdaptedField(const TwoSidedLattice& l, int m, double fill = 0.0) : lat(&l), dim(m) {
        level.resize(l.N() + 1);
        for (int k = 0; k <= l.N(); ++k) level[k].assign(l.level_size(k) * m, fill);
    }

    double* node(int k, std::size_t i) { return level[k].data() + i * dim; }
    const double* node(int k, std::size_t i) const { return level[k].data() + i * dim; }

    LevelField at(int k) const {
        LevelField f(*lat, k, dim);
        f.data = level[k];
        return f;
    }
    void set(const LevelField& f) { level[f.step] = f.data; }
};

// Table over the whole outcome space (all 2N coin groups); used by the
// running-integral helpers and the brute-force measurability check.
struct FullField {
    const TwoSidedLattice* lat = nullptr;
    int dim = 1;
    std::vector<double> data;

    FullField() = default;
    FullField(const TwoSidedLattice& l, int m, double fill = 0.0)
        : lat(&l), dim(m), data((std::size_t{1} << l.total_bits()) * m, fill) {}

    double* node(std::size_t o) { return data.data() + o * dim; }
    const double* node(std::size_t o) const { return data.data() + o * dim; }
};

// Junction table for the transition k -> k+1.
struct JunctionTable {
    const TwoSidedLattice* lat = nullptr;
    int step = 0;
    int dim = 1;
    std::vector<double> data;

    JunctionTable() = default;
    JunctionTable(const TwoSidedLattice& l, int k, int m, double fill = 0.0)
        : lat(&l), step(k), dim(m), data(l.junction_size(k) * m, fill) {}

    double* node(std::size_t j) { return data.data() + j * dim; }
    const double* node(std::size_t j) const { return data.data() + j * dim; }
};

// Exact expectation (uniform coin weights) of one level.
std::vector<double> expectation(const LevelField& f);
std::vector<double> expectation(const FullField& f);
std::vector<double> expectation(const AdaptedField& f, int k);

// Conditional expectation given the step-k sigma-field: averages the junction
// table over the step-k W coin group, keeping the step-k B coins.
LevelField condexp_drop_w(const JunctionTable& jt);
// Conditional expectation given the step-(k+1) sigma-field: averages over the
// step-k B coin group, keeping the step-k W coins.
LevelField condexp_drop_b(const JunctionTable& jt);
// Conditional moments against one increment coordinate; divide by dt to get
// the integrand-extraction formulas used by the solvers.
LevelField condexp_drop_w_weighted(const JunctionTable& jt, int coord);  // E[X * dW_k^coord | F_k]
LevelField condexp_drop_b_weighted(const JunctionTable& jt, int coord);  // E[X * dB_k^coord | F_{k+1}]

// Embed an adapted level into the full outcome space.
FullField embed(const LevelField& f);
// Brute force: does the table depend only on the coins visible at step k?
bool is_measurable_at(const FullField& f, int k, double tol = 0.0);

// Running forward integral I_k = sum_{j<k} integrand_j * dW_j (left endpoint).
// The running sum is generally not adapted, so levels are returned as full
// tables; size-capped, intended for verification at small N.
std::vector<FullField> forward_ito_integral(const AdaptedField& integrand);
// Backward integral sum_{j>=k} integrand_{j+1} * dB_j (right endpoint), one
// full table per starting step k = 0..N.
std::vector<FullField> backward_ito_integral(const AdaptedField& integrand);

// Exact conditional-moment split of the one-step increments of an adapted
// field: alpha_{k+1} - alpha_k = beta_k*dt + gamma_{k+1}*dB_k + delta_k*dW_k.
// For scalar coin groups (dim_w = dim_b = 1) the representation is exact.
struct IncrementParts {
    AdaptedField beta;   // dim m,        levels 0..N-1 meaningful
    AdaptedField gamma;  // dim m*lB,     levels 1..N meaningful
    AdaptedField delta;  // dim m*d,      levels 0..N-1 meaningful
};
IncrementParts decompose_increments(const AdaptedField& alpha);

struct EnergyReport {
    std::vector<double> residual;      // r_k, k = 0..N
    double max_residual = 0.0;
    bool dynamics_ok = true;
    double max_dynamics_violation = 0.0;
};
// Discrete energy identity: E|a_k|^2 against
// E|a_0|^2 + sum_{j<k} (2 E<a_j,b_j> - E|g_{j+1}|^2 + E|d_j|^2) dt.
// The stated dynamics are verified first; a violation beyond dynamics_tol is
// reported as an error through dynamics_ok/max_dynamics_violation.
EnergyReport ito_energy_check(const AdaptedField& alpha, const AdaptedField& beta,
                              const AdaptedField& gamma, const AdaptedField& delta,
                              double dynamics_tol = 1e-9);

}  // namespace tsfb
