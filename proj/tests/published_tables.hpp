#pragma once

// Published result rows, transcribed verbatim, for the metric arithmetic
// checks. Each block's first row is the undefended baseline its RI column is
// measured against.

#include <optional>
#include <string>
#include <vector>

namespace published {

struct Row {
  std::string label;
  double clean, x_r, x_s, x_rs, avg;
  std::optional<double> ri;
};

struct Table {
  std::string name;
  std::vector<Row> rows;
};

inline const std::vector<Table>& tables() {
  static const std::vector<Table> t{
      {"attacks NTURGB+D",
       {{"FGSM", 88.09, 50.48, 66.42, 22.12, 46.34, {}},
        {"PGD10", 88.09, 6.39, 25.18, 1.66, 11.08, {}},
        {"CW", 88.09, 4.55, 22.46, 0.21, 9.03, {}}}},
      {"attacks iMiGUE",
       {{"FGSM", 62.37, 6.86, 48.61, 2.52, 19.03, {}},
        {"PGD10", 62.37, 0.35, 19.94, 0.24, 6.84, {}},
        {"CW", 62.37, 0.20, 20.82, 0.26, 7.09, {}}}},
      {"defenses PGD20 NTURGB+D",
       {{"None", 88.09, 2.09, 11.84, 0.15, 4.69, 0},
        {"AT xR", 75.59, 75.59, 4.75, 4.74, 28.36, 11.17},
        {"AT xS", 78.44, 2.09, 78.31, 2.06, 27.49, 13.15},
        {"AT xRS", 61.42, 61.41, 40.41, 40.32, 47.38, 16.02},
        {"MinSim", 80.85, 2.93, 80.85, 3.03, 28.85, 16.92},
        {"ExFMem", 84.19, 0.00, 60.04, 0.00, 20.01, 11.42},
        {"MinSim+ExFMem", 82.81, 2.02, 75.77, 2.14, 26.64, 16.67},
        {"AMR", 81.65, 68.54, 80.40, 66.52, 71.82, 60.69}}},
      {"defenses PGD20 iMiGUE",
       {{"None", 62.37, 0.11, 6.97, 0.07, 2.38, 0},
        {"AT xR", 47.32, 47.32, 0.00, 0.00, 15.77, -1.66},
        {"AT xS", 60.20, 0.00, 59.87, 0.00, 19.96, 15.41},
        {"AT xRS", 39.01, 39.01, 31.89, 31.95, 34.28, 8.54},
        {"MinSim", 60.60, 0.00, 53.28, 0.00, 17.76, 13.61},
        {"ExFMem", 60.53, 0.00, 43.00, 0.00, 14.33, 10.11},
        {"MinSim+ExFMem", 60.62, 0.00, 55.05, 0.00, 18.35, 14.22},
        {"AMR", 43.89, 43.89, 32.85, 32.94, 36.56, 15.70}}},
      {"AMR count PGD20 NTURGB+D",
       {{"None", 88.09, 2.09, 11.84, 0.15, 4.69, 0},
        {"AT xRS (0 AMR)", 61.42, 61.41, 38.74, 38.82, 47.38, 16.02},
        {"1 AMR", 76.44, 76.44, 38.29, 38.32, 51.02, 34.68},
        {"2 AMRs", 81.61, 67.80, 80.58, 65.88, 71.42, 60.25},
        {"3 AMRs", 81.65, 68.54, 80.40, 66.52, 71.82, 60.69}}},
      {"AMR count PGD20 iMiGUE",
       {{"None", 62.37, 0.13, 6.67, 0.02, 2.27, 0},
        {"AT xRS (0 AMR)", 39.01, 39.01, 31.89, 31.95, 34.28, 8.54},
        {"1 AMR", 43.89, 43.89, 32.85, 32.94, 36.56, 15.70},
        {"2 AMRs", 42.93, 42.93, 32.35, 32.43, 35.92, 14.08},
        {"3 AMRs", 42.38, 42.38, 34.34, 34.32, 37.01, 14.64}}},
      {"AMR count CW NTURGB+D",
       {{"None", 88.09, 0.98, 9.00, 0.00, 3.33, 0},
        {"AT xRS (0 AMR)", 61.42, 61.41, 38.74, 38.82, 46.32, 16.32},
        {"1 AMR", 76.44, 76.44, 37.89, 37.83, 50.72, 37.74},
        {"2 AMRs", 81.61, 67.93, 80.53, 66.00, 71.49, 61.68},
        {"3 AMRs", 81.65, 68.62, 80.35, 66.61, 71.86, 62.09}}},
      {"AMR count CW iMiGUE",
       {{"None", 62.37, 0.13, 6.67, 0.02, 2.27, 0},
        {"AT xRS (0 AMR)", 39.01, 39.01, 30.94, 30.97, 33.64, 8.01},
        {"1 AMR", 43.89, 43.89, 32.46, 32.50, 36.28, 15.53},
        {"2 AMRs", 42.93, 42.93, 31.27, 31.16, 35.12, 13.41},
        {"3 AMRs", 42.38, 42.38, 33.33, 33.42, 36.38, 14.12}}},
      {"lambda iMiGUE",
       {{"None", 62.37, 0.11, 6.97, 0.07, 2.38, 0},
        {"0.1", 60.25, 36.23, 59.15, 32.02, 42.47, 37.97},
        {"0.5", 45.08, 45.08, 27.39, 27.24, 33.24, 13.57},
        {"1", 43.89, 43.89, 32.85, 32.94, 36.56, 15.70},
        {"2", 42.76, 42.76, 34.82, 34.80, 37.46, 15.47},
        {"5", 41.64, 41.64, 37.50, 37.56, 38.9, 15.79}}},
  };
  return t;
}

}  // namespace published
