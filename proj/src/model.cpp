#include "model.hpp"

#include "errors.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace capmin {

namespace {

// cos(pi * num / den) with the values at multiples of pi/2 snapped to exact
// 0, +1 or -1. Keeping these exact matters: antipodal state/measurement
// pairs must produce probabilities that are exactly zero, and near-antipodal
// rounding would otherwise produce tiny negative entries.
double exact_cos_pi(long long num, long long den) {
    long long m = num % (2 * den);
    if (m < 0) m += 2 * den;
    if (m == 0) return 1.0;
    if (m == den) return -1.0;
    if (2 * m == den || 2 * m == 3 * den) return 0.0;
    return std::cos(M_PI * static_cast<double>(m) / static_cast<double>(den));
}

double exact_sin_pi(long long num, long long den) {
    // sin(x) = cos(x - pi/2)
    return exact_cos_pi(2 * num - den, 2 * den);
}

// Tag carried by generated Bloch vectors so inner products between grid
// vectors can be evaluated with integer angle arithmetic.
struct VectorTag {
    enum class Kind { axis, planar };
    Kind kind;
    // axis: coordinate index 0..2 and sign; planar: plane index and angle
    // step k in units of pi/B0.
    int axis = -1;
    int sign = +1;
    int plane = -1;
    long long step = 0;
};

struct TaggedVector {
    VectorTag tag;
    std::array<double, 3> vec{};
};

constexpr int kPlaneDims[3][2] = {{0, 1}, {0, 2}, {1, 2}};

int shared_dim(int plane_a, int plane_b) {
    for (int d : kPlaneDims[plane_a])
        for (int e : kPlaneDims[plane_b])
            if (d == e) return d;
    return -1;
}

double tagged_dot(const TaggedVector& v, const TaggedVector& w, long long b0) {
    using Kind = VectorTag::Kind;
    if (v.tag.kind == Kind::axis && w.tag.kind == Kind::axis)
        return v.tag.axis == w.tag.axis ? static_cast<double>(v.tag.sign * w.tag.sign) : 0.0;
    if (v.tag.kind == Kind::axis) return v.tag.sign * w.vec[v.tag.axis];
    if (w.tag.kind == Kind::axis) return w.tag.sign * v.vec[w.tag.axis];
    if (v.tag.plane == w.tag.plane) return exact_cos_pi(v.tag.step - w.tag.step, b0);
    int d = shared_dim(v.tag.plane, w.tag.plane);
    return v.vec[d] * w.vec[d];
}

ProcessSpec process_from_dots(int num_inputs, int num_measurements,
                              const std::vector<double>& dots) {
    ProcessSpec spec;
    spec.num_inputs = num_inputs;
    spec.num_measurements = num_measurements;
    spec.num_outcomes = 2;
    spec.prob.resize(static_cast<std::size_t>(num_inputs) * num_measurements * 2);
    for (int a = 0; a < num_inputs; ++a) {
        for (int b = 0; b < num_measurements; ++b) {
            double d = dots[static_cast<std::size_t>(a) * num_measurements + b];
            double p_plus = 0.5 * (1.0 + d);
            spec.at(a, b, 0) = p_plus;       // outcome value +1
            spec.at(a, b, 1) = 1.0 - p_plus; // outcome value -1
        }
    }
    return spec;
}

std::array<double, 3> plane_vector(int plane, long long step, long long b0) {
    std::array<double, 3> v{0.0, 0.0, 0.0};
    v[kPlaneDims[plane][0]] = exact_cos_pi(step, b0);
    v[kPlaneDims[plane][1]] = exact_sin_pi(step, b0);
    return v;
}

// Axis classification of angle step*pi/B0 within a plane, if any.
// Returns coordinate index and sign, or axis = -1 when not axis-aligned.
struct AxisHit {
    int axis = -1;
    int sign = +1;
};
AxisHit axis_of(int plane, long long step, long long b0) {
    long long m = step % (2 * b0);
    if (m < 0) m += 2 * b0;
    AxisHit hit;
    if (m == 0) { hit.axis = kPlaneDims[plane][0]; hit.sign = +1; }
    else if (m == b0) { hit.axis = kPlaneDims[plane][0]; hit.sign = -1; }
    else if (2 * m == b0) { hit.axis = kPlaneDims[plane][1]; hit.sign = +1; }
    else if (2 * m == 3 * b0) { hit.axis = kPlaneDims[plane][1]; hit.sign = -1; }
    return hit;
}

struct NonplanarVectors {
    std::vector<TaggedVector> states;
    std::vector<TaggedVector> measurements;
    long long b0 = 0;
};

NonplanarVectors build_nonplanar(int half_plane_count) {
    if (half_plane_count < 2 || half_plane_count % 2 != 0)
        throw ValidationError("nonplanar generator requires an even measurement count >= 2 "
                              "per half-plane (axis vectors must be shared between planes)");
    const long long b0 = half_plane_count;
    NonplanarVectors out;
    out.b0 = b0;
    // Dedup bookkeeping: axis id -> already emitted. States distinguish the
    // sign (v and -v are different preparations); measurements do not
    // (w and -w are the same measurement with outcomes swapped).
    bool state_seen[3][2] = {};
    bool meas_seen[3] = {};
    for (int plane = 0; plane < 3; ++plane) {
        for (long long k = 1; k <= 2 * b0; ++k) { // states: full circle, A0 = 2*B0
            AxisHit hit = axis_of(plane, k, b0);
            TaggedVector tv;
            if (hit.axis >= 0) {
                int si = hit.sign > 0 ? 0 : 1;
                if (state_seen[hit.axis][si]) continue;
                state_seen[hit.axis][si] = true;
                tv.tag.kind = VectorTag::Kind::axis;
                tv.tag.axis = hit.axis;
                tv.tag.sign = hit.sign;
                tv.vec = {0.0, 0.0, 0.0};
                tv.vec[hit.axis] = hit.sign;
            } else {
                tv.tag.kind = VectorTag::Kind::planar;
                tv.tag.plane = plane;
                tv.tag.step = k;
                tv.vec = plane_vector(plane, k, b0);
            }
            out.states.push_back(tv);
        }
        for (long long k = 1; k <= b0; ++k) { // measurements: half circle
            AxisHit hit = axis_of(plane, k, b0);
            TaggedVector tv;
            if (hit.axis >= 0) {
                if (meas_seen[hit.axis]) continue;
                meas_seen[hit.axis] = true;
                tv.tag.kind = VectorTag::Kind::axis;
                tv.tag.axis = hit.axis;
                tv.tag.sign = hit.sign;
                tv.vec = {0.0, 0.0, 0.0};
                tv.vec[hit.axis] = hit.sign;
            } else {
                tv.tag.kind = VectorTag::Kind::planar;
                tv.tag.plane = plane;
                tv.tag.step = k;
                tv.vec = plane_vector(plane, k, b0);
            }
            out.measurements.push_back(tv);
        }
    }
    return out;
}

} // namespace

std::string ProcessViolation::describe() const {
    std::ostringstream os;
    if (kind == Kind::negative_entry) {
        os << "P(s|a,b) entry at (a=" << input << ", b=" << measurement << ", s=" << outcome
           << ") is " << value << " (negative or not finite)";
    } else {
        os << "row (a=" << input << ", b=" << measurement << ") sums to " << value
           << " instead of 1";
    }
    return os.str();
}

std::string ValidationReport::first_message() const {
    return violations.empty() ? std::string() : violations.front().describe();
}

ValidationReport validate_process(const ProcessSpec& spec) {
    ValidationReport report;
    if (spec.num_inputs <= 0 || spec.num_measurements <= 0 || spec.num_outcomes <= 0) {
        report.violations.push_back({ProcessViolation::Kind::row_sum, -1, -1, -1, 0.0});
        return report;
    }
    const std::size_t expected = static_cast<std::size_t>(spec.num_inputs) *
                                 spec.num_measurements * spec.num_outcomes;
    if (spec.prob.size() != expected) {
        report.violations.push_back({ProcessViolation::Kind::row_sum, -1, -1, -1,
                                     static_cast<double>(spec.prob.size())});
        return report;
    }
    for (int a = 0; a < spec.num_inputs; ++a) {
        for (int b = 0; b < spec.num_measurements; ++b) {
            double sum = 0.0;
            for (int s = 0; s < spec.num_outcomes; ++s) {
                double p = spec.at(a, b, s);
                if (!(p >= 0.0)) // also catches NaN
                    report.violations.push_back(
                        {ProcessViolation::Kind::negative_entry, a, b, s, p});
                sum += p;
            }
            if (!(std::abs(sum - 1.0) <= 1e-12))
                report.violations.push_back({ProcessViolation::Kind::row_sum, a, b, -1, sum});
        }
    }
    return report;
}

void require_valid(const ProcessSpec& spec) {
    ValidationReport report = validate_process(spec);
    if (!report.ok()) throw ValidationError("invalid process: " + report.first_message());
}

bool BlochConfig::unit_norms(double tol) const {
    auto check = [tol](const std::array<double, 3>& v) {
        double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        return std::abs(n - 1.0) <= tol;
    };
    for (const auto& v : states)
        if (!check(v)) return false;
    for (const auto& w : measurements)
        if (!check(w)) return false;
    return true;
}

ProcessSpec process_from_bloch(const BlochConfig& config) {
    const int na = static_cast<int>(config.states.size());
    const int nb = static_cast<int>(config.measurements.size());
    if (na == 0 || nb == 0) throw ValidationError("Bloch configuration has no states or no measurements");
    std::vector<double> dots(static_cast<std::size_t>(na) * nb);
    for (int a = 0; a < na; ++a)
        for (int b = 0; b < nb; ++b) {
            const auto& v = config.states[a];
            const auto& w = config.measurements[b];
            dots[static_cast<std::size_t>(a) * nb + b] = v[0] * w[0] + v[1] * w[1] + v[2] * w[2];
        }
    return process_from_dots(na, nb, dots);
}

BlochConfig planar_config(int num_states, int num_measurements) {
    if (num_states < 1 || num_measurements < 1)
        throw ValidationError("planar generator requires positive state and measurement counts");
    BlochConfig config;
    config.states.reserve(num_states);
    config.measurements.reserve(num_measurements);
    for (long long a = 1; a <= num_states; ++a) // angle 2*pi*a/|A|
        config.states.push_back({exact_cos_pi(2 * a, num_states),
                                 exact_sin_pi(2 * a, num_states), 0.0});
    for (long long b = 1; b <= num_measurements; ++b) // angle pi*b/|B|
        config.measurements.push_back({exact_cos_pi(b, num_measurements),
                                       exact_sin_pi(b, num_measurements), 0.0});
    return config;
}

ProcessSpec planar_problem(int num_states, int num_measurements) {
    if (num_states < 1 || num_measurements < 1)
        throw ValidationError("planar generator requires positive state and measurement counts");
    const long long na = num_states, nb = num_measurements;
    std::vector<double> dots(static_cast<std::size_t>(na) * nb);
    for (long long a = 1; a <= na; ++a)
        for (long long b = 1; b <= nb; ++b)
            // cos(2*pi*a/|A| - pi*b/|B|) on the common grid pi/(|A||B|)
            dots[static_cast<std::size_t>(a - 1) * nb + (b - 1)] =
                exact_cos_pi(2 * a * nb - b * na, na * nb);
    return process_from_dots(num_states, num_measurements, dots);
}

BlochConfig nonplanar_config(int half_plane_count) {
    NonplanarVectors vs = build_nonplanar(half_plane_count);
    BlochConfig config;
    for (const auto& tv : vs.states) config.states.push_back(tv.vec);
    for (const auto& tv : vs.measurements) config.measurements.push_back(tv.vec);
    return config;
}

ProcessSpec nonplanar_problem(int half_plane_count) {
    NonplanarVectors vs = build_nonplanar(half_plane_count);
    const int na = static_cast<int>(vs.states.size());
    const int nb = static_cast<int>(vs.measurements.size());
    std::vector<double> dots(static_cast<std::size_t>(na) * nb);
    for (int a = 0; a < na; ++a)
        for (int b = 0; b < nb; ++b)
            dots[static_cast<std::size_t>(a) * nb + b] =
                tagged_dot(vs.states[a], vs.measurements[b], vs.b0);
    return process_from_dots(na, nb, dots);
}

ProcessSpec parse_process_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("process file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("process file must contain a JSON object");
    if (j.contains("schema") && j["schema"].get<int>() != 1)
        throw ValidationError("unsupported process schema version");
    for (const char* key : {"num_inputs", "num_measurements", "num_outcomes", "prob"})
        if (!j.contains(key))
            throw ValidationError(std::string("process file is missing field \"") + key + "\"");
    ProcessSpec spec;
    try {
        spec.num_inputs = j["num_inputs"].get<int>();
        spec.num_measurements = j["num_measurements"].get<int>();
        spec.num_outcomes = j["num_outcomes"].get<int>();
        spec.prob = j["prob"].get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("process file has a malformed field: ") + e.what());
    }
    if (spec.num_inputs <= 0 || spec.num_measurements <= 0 || spec.num_outcomes <= 0)
        throw ValidationError("process dimensions must be positive");
    const std::size_t expected = static_cast<std::size_t>(spec.num_inputs) *
                                 spec.num_measurements * spec.num_outcomes;
    if (spec.prob.size() != expected) {
        std::ostringstream os;
        os << "prob array has " << spec.prob.size() << " entries, expected " << expected
           << " for dimensions (" << spec.num_inputs << ", " << spec.num_measurements << ", "
           << spec.num_outcomes << ")";
        throw ValidationError(os.str());
    }
    return spec;
}

std::string process_to_json(const ProcessSpec& spec) {
    nlohmann::json j;
    j["schema"] = 1;
    j["num_inputs"] = spec.num_inputs;
    j["num_measurements"] = spec.num_measurements;
    j["num_outcomes"] = spec.num_outcomes;
    j["prob"] = spec.prob;
    return j.dump();
}

ProcessSpec read_process_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open process file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_process_json(buf.str());
}

void write_process_json(const ProcessSpec& spec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write process file: " + path);
    out << process_to_json(spec) << "\n";
}

} // namespace capmin
