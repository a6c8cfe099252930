#pragma once

#include <cstdint>
#include <string>

namespace rotostate::cli {

struct Config {
  // [problem]
  int m = 3;
  std::string profile = "poly4";
  double dlambda_da = 1.0;
  // [grid]
  int n_alpha = 256;
  int n_s = 48;
  int harmonics = 16;
  // [newton]
  double tol = 1e-10;
  double step_tol = 1e-12;
  int max_iter = 25;
  double xi_max = 0.05;
  // [branch]
  std::string mode = "amplitude";
  double a = 0.2;
  double xi_step = 0.002;
  int n_steps = 10;
  // [euler]
  int raster_n = 512;
  double extent = 2.0;
  std::string raster_format = "csv";
  int point = -1;
  double advect_T = 0.0;
  double advect_dt = 0.0;
  int markers = 24;
  bool full_biot_savart = false;
  // [checks]
  long samples = 10000;
  std::uint64_t seed = 12345;
  double bounds_a = 0.1;
  double bounds_amplitude = 0.05;
  // [run]
  std::string out = "out";
  int threads = 1;
  std::string log_level = "info";

  void validate() const;
  std::string describe() const;
};

// Reads a sectioned key=value file over the current values.
void load_config(const std::string& path, Config& cfg);

// Exit status: 0 success, 1 verification failure, 2 usage error.
int run(int argc, char** argv);

}  // namespace rotostate::cli
