#pragma once

#include <string>
#include <vector>

namespace criteria {

struct Outcome {
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct Criterion {
  int id;
  const char* title;
  double budget_seconds;  // 0 = no runtime bound
  Outcome (*run)();
};

const std::vector<Criterion>& all();

}  // namespace criteria
