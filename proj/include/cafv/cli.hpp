#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cafv::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Every objective term must match central finite differences at least this
// well for `gradcheck` to succeed.
inline constexpr double kGradTolerance = 1e-6;

// Entry point for the cafv binary; argv follows main() conventions.
// Exit codes: 0 success, 1 invalid arguments/config/data, 2 runtime failure
// (I/O while writing, non-finite training values).
int run(int argc, const char* const* argv);
// Convenience overload for tests; args exclude the program name.
int run(const std::vector<std::string>& args);

// One objective term's worst finite-difference disagreement over `points`
// accepted draws (draws too close to an activation kink are re-drawn).
struct GradCheckRow {
  std::string term;
  double max_rel_error = 0.0;
  std::size_t points = 0;
};

// Checks analytic gradients of every objective term on small random models,
// varying widths with the seed. Deterministic in first_seed and trials.
std::vector<GradCheckRow> gradcheck_rows(std::uint64_t first_seed, std::size_t trials);
std::string gradcheck_table(const std::vector<GradCheckRow>& rows, double tolerance);

// Human-readable checkpoint summary built from the manifest (and state.json
// when present) without reading the weights.
std::string inspect_checkpoint_text(const std::string& dir);

}  // namespace cafv::cli
