#include "sequence.hpp"

#include "errors.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <sstream>
#include <thread>

namespace capmin::sequence {

namespace {

constexpr int kMaxMeasurements = 60;
constexpr std::int64_t kDefaultBudget = std::int64_t(1) << 31;
constexpr std::int64_t kSerialThreshold = std::int64_t(1) << 16;
constexpr std::int64_t kTargetChunk = 4096;
constexpr int kMaxChunks = 1024;

struct ChunkGrid {
    std::int64_t chunk_size = 0;
    int count = 0;
};

// Chunking is a function of the space size only, never of the thread count,
// so per-chunk partial sums merge in the same order regardless of how many
// workers run the sweep.
ChunkGrid chunk_grid(std::int64_t n) {
    if (n <= kTargetChunk) return {n > 0 ? n : 1, 1};
    std::int64_t chunk = kTargetChunk;
    std::int64_t count = (n + chunk - 1) / chunk;
    if (count > kMaxChunks) {
        chunk = (n + kMaxChunks - 1) / kMaxChunks;
        count = (n + chunk - 1) / chunk;
    }
    return {chunk, static_cast<int>(count)};
}

void run_chunks(int count, int workers, const std::function<void(int, int)>& work) {
    parallel_for_indexed(count, workers, work);
}

// Fixed-order pairwise reduction tree over equally sized partial blocks.
void fold_sum(double* blocks, int count, std::size_t stride) {
    for (int gap = 1; gap < count; gap *= 2)
        for (int i = 0; i + gap < count; i += 2 * gap) {
            double* dst = blocks + static_cast<std::size_t>(i) * stride;
            const double* src = blocks + static_cast<std::size_t>(i + gap) * stride;
            for (std::size_t k = 0; k < stride; ++k) dst[k] += src[k];
        }
}

// Same tree, but the first `max_slots` slots combine with max (used for
// max_seq statistics).
void fold_stats(double* blocks, int count, std::size_t stride, std::size_t max_slots) {
    for (int gap = 1; gap < count; gap *= 2)
        for (int i = 0; i + gap < count; i += 2 * gap) {
            double* dst = blocks + static_cast<std::size_t>(i) * stride;
            const double* src = blocks + static_cast<std::size_t>(i + gap) * stride;
            for (std::size_t k = 0; k < max_slots; ++k) dst[k] = std::max(dst[k], src[k]);
            for (std::size_t k = max_slots; k < stride; ++k) dst[k] += src[k];
        }
}

double* grab_partials(SweepScratch& scratch, int count, std::size_t stride) {
    const std::size_t need = static_cast<std::size_t>(count) * stride;
    if (scratch.partials.size() < need) scratch.partials.resize(need);
    std::fill_n(scratch.partials.data(), need, 0.0);
    return scratch.partials.data();
}

double* grab_worker_lane(SweepScratch& scratch, int worker, std::size_t doubles) {
    if (scratch.worker_lanes.size() <= static_cast<std::size_t>(worker))
        scratch.worker_lanes.resize(worker + 1);
    auto& buf = scratch.worker_lanes[worker];
    if (buf.size() < doubles) buf.resize(doubles);
    return buf.data();
}

// exp factors of all inputs transposed to ((b*|S|)+s)*|A|+a so the per-input
// inner loops of the multi-lane sweeps are contiguous.
const double* build_lane_table(SweepScratch& scratch, const Multipliers& m) {
    const int na = m.num_inputs, nb = m.num_measurements, ns = m.num_outcomes;
    const std::size_t need = static_cast<std::size_t>(na) * nb * ns;
    if (scratch.lane_table.size() < need) scratch.lane_table.resize(need);
    double* el = scratch.lane_table.data();
    for (int a = 0; a < na; ++a)
        for (int b = 0; b < nb; ++b)
            for (int s = 0; s < ns; ++s)
                el[(static_cast<std::size_t>(b) * ns + s) * na + a] = std::exp(m.at(a, b, s));
    return el;
}

struct Odometer {
    int digits[kMaxMeasurements + 1];
    void init(const SequenceSpace& space, std::int64_t index) {
        for (int b = 0; b < space.num_measurements; ++b) {
            digits[b] = static_cast<int>(index % space.num_outcomes);
            index /= space.num_outcomes;
        }
    }
    // Advances to the next sequence; returns the highest digit position that
    // changed. Caller guarantees the space end is not crossed.
    int advance(int num_outcomes) {
        int j = 0;
        while (digits[j] + 1 == num_outcomes) {
            digits[j] = 0;
            ++j;
        }
        ++digits[j];
        return j;
    }
};

} // namespace

std::int64_t default_entry_budget() {
    if (const char* env = std::getenv("CAPMIN_MEMORY_BUDGET")) {
        char* end = nullptr;
        long long v = std::strtoll(env, &end, 10);
        if (end != env && v > 0) return v;
    }
    return kDefaultBudget;
}

SequenceSpace make_space(int num_measurements, int num_outcomes, bool override_budget) {
    if (num_measurements < 1 || num_outcomes < 1)
        throw ValidationError("sequence space requires positive measurement and outcome counts");
    if (num_measurements > kMaxMeasurements)
        throw BudgetError("sequence space exceeds the supported number of measurements");
    std::int64_t size = 1;
    for (int b = 0; b < num_measurements; ++b) {
        if (size > std::numeric_limits<std::int64_t>::max() / num_outcomes)
            throw BudgetError("sequence space size overflows a 64-bit count");
        size *= num_outcomes;
    }
    const std::int64_t budget = default_entry_budget();
    if (!override_budget && size > budget) {
        std::ostringstream os;
        os << "sequence space needs " << size << " entries, over the budget of " << budget
           << " (set CAPMIN_MEMORY_BUDGET or pass the override flag)";
        throw BudgetError(os.str());
    }
    return SequenceSpace{num_measurements, num_outcomes, size};
}

std::int64_t rank(const SequenceSpace& space, std::span<const int> outcomes) {
    if (static_cast<int>(outcomes.size()) != space.num_measurements)
        throw ValidationError("sequence length does not match the measurement count");
    std::int64_t r = 0;
    std::int64_t weight = 1;
    for (int b = 0; b < space.num_measurements; ++b) {
        const int s = outcomes[b];
        if (s < 0 || s >= space.num_outcomes)
            throw ValidationError("outcome index out of range in sequence");
        r += weight * s;
        weight *= space.num_outcomes;
    }
    return r;
}

void unrank(const SequenceSpace& space, std::int64_t index, std::span<int> outcomes) {
    if (index < 0 || index >= space.size)
        throw ValidationError("sequence rank out of range");
    if (static_cast<int>(outcomes.size()) != space.num_measurements)
        throw ValidationError("sequence length does not match the measurement count");
    for (int b = 0; b < space.num_measurements; ++b) {
        outcomes[b] = static_cast<int>(index % space.num_outcomes);
        index /= space.num_outcomes;
    }
}

ReferenceDistribution uniform_reference(const SequenceSpace& space) {
    return ReferenceDistribution(static_cast<std::size_t>(space.size),
                                 1.0 / static_cast<double>(space.size));
}

double normalize_reference(ReferenceDistribution& r) {
    double z = 0.0;
    for (double x : r) z += x;
    if (!(z > 0.0) || !std::isfinite(z))
        throw NumericalError("reference distribution has non-positive or non-finite mass");
    const double inv = 1.0 / z;
    for (double& x : r) x *= inv;
    return z;
}

int effective_threads(int threads, std::int64_t n) {
    if (n < kSerialThreshold) return 1;
    if (threads <= 0) {
        unsigned hw = std::thread::hardware_concurrency();
        return hw > 0 ? static_cast<int>(hw) : 1;
    }
    return threads;
}

void accumulate_dual_sums(const SequenceSpace& space, const double* r,
                          const double* exp_factors, bool with_pairs, int threads,
                          DualSums& out, SweepScratch& scratch) {
    const int nb = space.num_measurements, ns = space.num_outcomes;
    const int coords = nb * ns;
    const int blocks = nb * (nb - 1) / 2;
    const bool binary = ns == 2;
    const std::size_t pair_len =
        with_pairs ? static_cast<std::size_t>(blocks) * (binary ? 1 : ns * ns) : 0;
    const std::size_t stride = 1 + coords + pair_len;
    const ChunkGrid grid = chunk_grid(space.size);
    double* partials = grab_partials(scratch, grid.count, stride);
    const int workers = std::min(effective_threads(threads, space.size), grid.count);

    run_chunks(grid.count, workers, [&](int ci, int) {
        const std::int64_t begin = static_cast<std::int64_t>(ci) * grid.chunk_size;
        const std::int64_t end = std::min(space.size, begin + grid.chunk_size);
        double* part = partials + static_cast<std::size_t>(ci) * stride;
        double* m = part + 1;
        double* pairs = part + 1 + coords;
        Odometer od;
        od.init(space, begin);
        double up[kMaxMeasurements + 1];
        up[nb] = 1.0;
        for (int j = nb - 1; j >= 0; --j) up[j] = exp_factors[j * ns + od.digits[j]] * up[j + 1];
        for (std::int64_t seq = begin;;) {
            const double w = r[seq] * up[0];
            part[0] += w;
            for (int j = 0; j < nb; ++j) m[j * ns + od.digits[j]] += w;
            if (with_pairs && w != 0.0) {
                if (binary) {
                    int zero_pos[kMaxMeasurements];
                    int nz = 0;
                    for (int j = 0; j < nb; ++j)
                        if (od.digits[j] == 0) zero_pos[nz++] = j;
                    for (int i = 1; i < nz; ++i) {
                        double* row = pairs + zero_pos[i] * (zero_pos[i] - 1) / 2;
                        for (int q = 0; q < i; ++q) row[zero_pos[q]] += w;
                    }
                } else {
                    for (int j = 1; j < nb; ++j) {
                        const std::size_t base =
                            (static_cast<std::size_t>(j) * (j - 1) / 2) * ns * ns +
                            static_cast<std::size_t>(od.digits[j]) * ns;
                        for (int q = 0; q < j; ++q)
                            pairs[base + static_cast<std::size_t>(q) * ns * ns + od.digits[q]] += w;
                    }
                }
            }
            if (++seq == end) break;
            const int changed = od.advance(ns);
            for (int q = changed; q >= 0; --q)
                up[q] = exp_factors[q * ns + od.digits[q]] * up[q + 1];
        }
    });

    fold_sum(partials, grid.count, stride);
    out.total = partials[0];
    out.marginals.assign(partials + 1, partials + 1 + coords);
    if (with_pairs) {
        const double* pairs = partials + 1 + coords;
        out.pair_mass.assign(static_cast<std::size_t>(coords) * coords, 0.0);
        auto cell = [&](int c1, int c2) -> double& {
            return out.pair_mass[static_cast<std::size_t>(c1) * coords + c2];
        };
        for (int c = 0; c < coords; ++c) cell(c, c) = out.marginals[c];
        for (int b = 1; b < nb; ++b)
            for (int q = 0; q < b; ++q) {
                const std::size_t blk = static_cast<std::size_t>(b) * (b - 1) / 2 + q;
                if (binary) {
                    const double j00 = pairs[blk];
                    const double m0b = out.marginals[b * 2 + 0];
                    const double m0q = out.marginals[q * 2 + 0];
                    const double j01 = m0b - j00;
                    const double j10 = m0q - j00;
                    const double j11 = out.total - m0b - m0q + j00;
                    cell(b * 2 + 0, q * 2 + 0) = j00;
                    cell(b * 2 + 0, q * 2 + 1) = j01;
                    cell(b * 2 + 1, q * 2 + 0) = j10;
                    cell(b * 2 + 1, q * 2 + 1) = j11;
                    cell(q * 2 + 0, b * 2 + 0) = j00;
                    cell(q * 2 + 1, b * 2 + 0) = j01;
                    cell(q * 2 + 0, b * 2 + 1) = j10;
                    cell(q * 2 + 1, b * 2 + 1) = j11;
                } else {
                    for (int s = 0; s < ns; ++s)
                        for (int s2 = 0; s2 < ns; ++s2) {
                            const double v = pairs[blk * ns * ns + s * ns + s2];
                            cell(b * ns + s, q * ns + s2) = v;
                            cell(q * ns + s2, b * ns + s) = v;
                        }
                }
            }
    } else {
        out.pair_mass.clear();
    }
    if (!std::isfinite(out.total))
        throw NumericalError("dual sum overflow: exponential weights are out of scale");
}

double total_mass(const SequenceSpace& space, const double* r, const double* exp_factors,
                  int threads, SweepScratch& scratch) {
    const int nb = space.num_measurements, ns = space.num_outcomes;
    const ChunkGrid grid = chunk_grid(space.size);
    double* partials = grab_partials(scratch, grid.count, 1);
    const int workers = std::min(effective_threads(threads, space.size), grid.count);
    run_chunks(grid.count, workers, [&](int ci, int) {
        const std::int64_t begin = static_cast<std::int64_t>(ci) * grid.chunk_size;
        const std::int64_t end = std::min(space.size, begin + grid.chunk_size);
        Odometer od;
        od.init(space, begin);
        double up[kMaxMeasurements + 1];
        up[nb] = 1.0;
        for (int j = nb - 1; j >= 0; --j) up[j] = exp_factors[j * ns + od.digits[j]] * up[j + 1];
        double acc = 0.0;
        for (std::int64_t seq = begin;;) {
            acc += r[seq] * up[0];
            if (++seq == end) break;
            const int changed = od.advance(ns);
            for (int q = changed; q >= 0; --q)
                up[q] = exp_factors[q * ns + od.digits[q]] * up[q + 1];
        }
        partials[ci] = acc;
    });
    fold_sum(partials, grid.count, 1);
    return partials[0]; // may be +inf; line searches treat that as a rejected step
}

// Shared skeleton of the multi-lane sweeps: maintains per-input suffix
// products g_a = prod_b e(s_b, a, b) while walking the space in rank order.
template <class PerSequence>
static void lane_sweep(const SequenceSpace& space, const Multipliers& multipliers,
                       int lanes, const double* lane_table, int threads,
                       SweepScratch& scratch, int chunk_stride, double* partials,
                       PerSequence&& body) {
    const int nb = space.num_measurements, ns = space.num_outcomes;
    const ChunkGrid grid = chunk_grid(space.size);
    const int workers = std::min(effective_threads(threads, space.size), grid.count);
    (void)multipliers;
    run_chunks(grid.count, workers, [&](int ci, int worker) {
        const std::int64_t begin = static_cast<std::int64_t>(ci) * grid.chunk_size;
        const std::int64_t end = std::min(space.size, begin + grid.chunk_size);
        double* lane = grab_worker_lane(scratch, worker,
                                        static_cast<std::size_t>(nb + 2) * lanes);
        double* up = lane;                 // (|B|+1) rows of |A| lane products
        double* row_scratch = lane + static_cast<std::size_t>(nb + 1) * lanes;
        Odometer od;
        od.init(space, begin);
        for (int a = 0; a < lanes; ++a) up[static_cast<std::size_t>(nb) * lanes + a] = 1.0;
        for (int j = nb - 1; j >= 0; --j) {
            const double* e = lane_table + (static_cast<std::size_t>(j) * ns + od.digits[j]) * lanes;
            const double* above = up + static_cast<std::size_t>(j + 1) * lanes;
            double* here = up + static_cast<std::size_t>(j) * lanes;
            for (int a = 0; a < lanes; ++a) here[a] = e[a] * above[a];
        }
        double* part = partials ? partials + static_cast<std::size_t>(ci) * chunk_stride : nullptr;
        for (std::int64_t seq = begin;;) {
            body(seq, up, row_scratch, part, od);
            if (++seq == end) break;
            const int changed = od.advance(ns);
            for (int q = changed; q >= 0; --q) {
                const double* e =
                    lane_table + (static_cast<std::size_t>(q) * ns + od.digits[q]) * lanes;
                const double* above = up + static_cast<std::size_t>(q + 1) * lanes;
                double* here = up + static_cast<std::size_t>(q) * lanes;
                for (int a = 0; a < lanes; ++a) here[a] = e[a] * above[a];
            }
        }
    });
}

std::vector<double> f_table(const SequenceSpace& space, const Multipliers& multipliers,
                            const InputPrior& prior, int threads, SweepScratch& scratch) {
    const int na = multipliers.num_inputs;
    if (static_cast<int>(prior.size()) != na)
        throw ValidationError("prior length does not match the input count");
    const double* el = build_lane_table(scratch, multipliers);
    std::vector<double> f(static_cast<std::size_t>(space.size));
    lane_sweep(space, multipliers, na, el, threads, scratch, 0, nullptr,
               [&](std::int64_t seq, const double* up, double*, double*, const Odometer&) {
                   double v = 0.0;
                   for (int a = 0; a < na; ++a) v += prior[a] * up[a];
                   f[static_cast<std::size_t>(seq)] = v;
               });
    for (double v : f)
        if (!std::isfinite(v))
            throw NumericalError("potential overflow: exponential weights are out of scale");
    return f;
}

void accumulate_pair_products(const SequenceSpace& space, const double* r,
                              const Multipliers& multipliers, int threads,
                              PairProductSums& out, SweepScratch& scratch) {
    const int na = multipliers.num_inputs;
    const std::size_t tri = static_cast<std::size_t>(na) * (na + 1) / 2;
    const std::size_t stride = static_cast<std::size_t>(na) + tri;
    const ChunkGrid grid = chunk_grid(space.size);
    double* partials = grab_partials(scratch, grid.count, stride);
    const double* el = build_lane_table(scratch, multipliers);
    lane_sweep(space, multipliers, na, el, threads, scratch, static_cast<int>(stride), partials,
               [&](std::int64_t seq, const double* up, double* wv, double* part, const Odometer&) {
                   const double w = r[seq];
                   if (w == 0.0) return;
                   double* totals = part;
                   double* gram = part + na;
                   for (int a = 0; a < na; ++a) {
                       const double wa = w * up[a];
                       wv[a] = wa;
                       totals[a] += wa;
                   }
                   std::size_t k = 0;
                   for (int a = 0; a < na; ++a) {
                       const double wa = wv[a];
                       for (int a2 = 0; a2 <= a; ++a2) gram[k++] += wa * up[a2];
                   }
               });
    fold_sum(partials, grid.count, stride);
    out.input_total.assign(partials, partials + na);
    out.gram.assign(static_cast<std::size_t>(na) * na, 0.0);
    std::size_t k = 0;
    bool finite = true;
    for (int a = 0; a < na; ++a)
        for (int a2 = 0; a2 <= a; ++a2, ++k) {
            const double v = partials[na + k];
            out.gram[static_cast<std::size_t>(a) * na + a2] = v;
            out.gram[static_cast<std::size_t>(a2) * na + a] = v;
            finite = finite && std::isfinite(v);
        }
    if (!finite)
        throw NumericalError("pair-product overflow: exponential weights are out of scale");
}

PotentialStats potential_sweep(const SequenceSpace& space, double* r,
                               const Multipliers& multipliers, const InputPrior& prior,
                               double alpha, bool apply_update, int threads,
                               SweepScratch& scratch) {
    const int na = multipliers.num_inputs;
    if (static_cast<int>(prior.size()) != na)
        throw ValidationError("prior length does not match the input count");
    // [max_f, max_rf|lnf|, sum_rf, sum_rf_lnf, sum_rf_alpha, zero_support]
    constexpr std::size_t stride = 6;
    const ChunkGrid grid = chunk_grid(space.size);
    double* partials = grab_partials(scratch, grid.count, stride);
    const double* el = build_lane_table(scratch, multipliers);
    const bool plain = alpha == 1.0;
    lane_sweep(space, multipliers, na, el, threads, scratch, stride, partials,
               [&](std::int64_t seq, const double* up, double*, double* part, const Odometer&) {
                   double f = 0.0;
                   for (int a = 0; a < na; ++a) f += prior[a] * up[a];
                   const double rv = r[seq];
                   part[0] = std::max(part[0], f);
                   const double rf = rv * f;
                   part[2] += rf;
                   if (rf > 0.0) {
                       const double rflnf = rf * std::log(f);
                       part[3] += rflnf;
                       part[1] = std::max(part[1], std::abs(rflnf));
                   }
                   if (f == 0.0 && rv > 0.0) part[5] += 1.0;
                   const double fa = plain ? f : std::pow(f, alpha);
                   part[4] += rv * fa;
                   if (apply_update) r[seq] = rv * fa;
               });
    fold_stats(partials, grid.count, stride, 2);
    PotentialStats stats;
    stats.max_f = partials[0];
    stats.max_rf_abs_lnf = partials[1];
    stats.sum_rf = partials[2];
    stats.sum_rf_lnf = partials[3];
    stats.sum_rf_alpha = partials[4];
    stats.zero_support = static_cast<std::int64_t>(partials[5]);
    if (!std::isfinite(stats.max_f) || !std::isfinite(stats.sum_rf) ||
        !std::isfinite(stats.sum_rf_lnf) || !std::isfinite(stats.sum_rf_alpha))
        throw NumericalError("potential overflow: exponential weights are out of scale");
    return stats;
}

void accumulate_exact_capacity(const SequenceSpace& space, const double* r,
                               const Multipliers& multipliers, const InputPrior& prior,
                               int threads, ExactCapacitySums& out, SweepScratch& scratch) {
    const int na = multipliers.num_inputs;
    const int nb = space.num_measurements, ns = space.num_outcomes;
    const std::size_t coords = static_cast<std::size_t>(nb) * ns;
    const std::size_t stride = coords * na + na;
    const ChunkGrid grid = chunk_grid(space.size);
    double* partials = grab_partials(scratch, grid.count, stride);
    const double* el = build_lane_table(scratch, multipliers);
    lane_sweep(space, multipliers, na, el, threads, scratch, static_cast<int>(stride), partials,
               [&](std::int64_t seq, const double* up, double* wv, double* part, const Odometer& od) {
                   const double rv = r[seq];
                   if (rv == 0.0) return;
                   double f = 0.0;
                   for (int a = 0; a < na; ++a) {
                       wv[a] = rv * up[a];
                       f += prior[a] * up[a];
                   }
                   for (int j = 0; j < nb; ++j) {
                       double* row = part + (static_cast<std::size_t>(j) * ns + od.digits[j]) * na;
                       for (int a = 0; a < na; ++a) row[a] += wv[a];
                   }
                   if (f > 0.0) {
                       const double lnf = std::log(f);
                       double* t1 = part + coords * na;
                       for (int a = 0; a < na; ++a) t1[a] += wv[a] * lnf;
                   }
               });
    fold_sum(partials, grid.count, stride);
    out.marginals.assign(partials, partials + coords * na);
    out.rg_lnf.assign(partials + coords * na, partials + stride);
}

} // namespace capmin::sequence
