#pragma once

#include <filesystem>
#include <ostream>
#include <string>

#include "fglr/camera.hpp"
#include "fglr/eval.hpp"
#include "fglr/imgcore.hpp"

namespace fglr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;

/// Case directory layout written by `gen`.
struct CaseFiles {
  static constexpr const char* input = "input.png";
  static constexpr const char* reference = "reference.png";
  static constexpr const char* mask = "mask.pgm";
  static constexpr const char* calibration = "calibration.txt";
  static constexpr const char* manifest = "manifest.txt";
};

struct LoadedCase {
  std::string label;
  Calibration calibration;
  CfaLayout layout;
  BayerImage input;
  PlanarImage reference;
  ValidityMask mask;
};

/// Throws IoError for missing files and DimensionError for inconsistent sizes.
LoadedCase load_case(const std::filesystem::path& dir);

/// Entry point; returns the process exit code.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int main(int argc, const char* const* argv);

}  // namespace fglr::cli
