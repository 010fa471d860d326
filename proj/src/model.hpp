#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace capmin {

/// A finite prepare-and-measure process: Alice prepares one of |A| inputs,
/// Bob applies one of |B| measurements and observes one of |S| outcomes with
/// probability P(s|a,b). The table is dense, indexed (a, b, s) with s minor.
///
/// For two-outcome processes generated from Bloch vectors, outcome index 0
/// corresponds to the outcome value +1 and index 1 to -1.
struct ProcessSpec {
    int num_inputs = 0;        // |A|
    int num_measurements = 0;  // |B|
    int num_outcomes = 0;      // |S|
    std::vector<double> prob;  // size |A|*|B|*|S|, layout ((a*|B|)+b)*|S|+s

    double& at(int a, int b, int s) {
        return prob[(static_cast<std::size_t>(a) * num_measurements + b) * num_outcomes + s];
    }
    double at(int a, int b, int s) const {
        return prob[(static_cast<std::size_t>(a) * num_measurements + b) * num_outcomes + s];
    }
    /// Pointer to the |B|*|S| block of one input, b-major.
    const double* input_slice(int a) const {
        return prob.data() + static_cast<std::size_t>(a) * num_measurements * num_outcomes;
    }
};

/// One structural violation found by validate_process.
struct ProcessViolation {
    enum class Kind { negative_entry, row_sum };
    Kind kind;
    int input = -1;        // a
    int measurement = -1;  // b
    int outcome = -1;      // s, only for negative_entry
    double value = 0.0;    // offending entry or row sum
    std::string describe() const;
};

struct ValidationReport {
    std::vector<ProcessViolation> violations;
    bool ok() const { return violations.empty(); }
    /// Human-readable description of the first violation, empty when ok.
    std::string first_message() const;
};

/// Checks non-negativity of every entry and that each (a,b) row sums to 1
/// within 1e-12. Returns a report instead of throwing.
ValidationReport validate_process(const ProcessSpec& spec);

/// Throws ValidationError with the first violation message if the report is
/// not ok. Convenience for entry points that need a hard failure.
void require_valid(const ProcessSpec& spec);

/// Bloch-sphere description of a qubit process: unit state vectors v_a and
/// unit measurement vectors w_b (each measurement is the antipodal pair
/// +/- w_b, outcome +1 associated with +w_b).
struct BlochConfig {
    std::vector<std::array<double, 3>> states;        // v_a
    std::vector<std::array<double, 3>> measurements;  // w_b

    /// All vectors unit-norm within 1e-12.
    bool unit_norms(double tol = 1e-12) const;
};

/// Builds P(s|a,b) = (1 + s * v_a . w_b) / 2 from a Bloch configuration.
/// Inner products are taken as given; exact +/-1 products yield exact 0/1
/// probabilities.
ProcessSpec process_from_bloch(const BlochConfig& config);

/// States equidistributed on the full x-y circle (angle 2*pi*a/|A|,
/// a = 1..|A|) and measurements on the half circle (angle pi*b/|B|,
/// b = 1..|B|). Antipodal state/measurement pairs produce exact zeros.
BlochConfig planar_config(int num_states, int num_measurements);
ProcessSpec planar_problem(int num_states, int num_measurements);

/// Three copies of the planar construction in the x-y, x-z and y-z planes
/// with A0 = 2*B0 states and B0 measurements per plane. Vectors shared
/// between planes (the coordinate axes) are merged, giving
/// |A| = 3*(A0-2) = 6*B0-6 states and |B| = 3*(B0-1) measurements.
/// Requires B0 even and >= 2 so the axis vectors are actually shared.
BlochConfig nonplanar_config(int half_plane_count);
ProcessSpec nonplanar_problem(int half_plane_count);

/// Process file I/O. The JSON object carries "schema": 1, the three counts
/// and "prob" as a flat a-major array. Readers reject dimension mismatches.
ProcessSpec read_process_json(const std::string& path);
void write_process_json(const ProcessSpec& spec, const std::string& path);
ProcessSpec parse_process_json(const std::string& text);
std::string process_to_json(const ProcessSpec& spec);

} // namespace capmin
