#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>

#include "criteria.hpp"

// Usage: acceptance [--only N]
int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--only N]\n", argv[0]);
      return 2;
    }
  }
  int failed = 0, ran = 0;
  for (const auto& c : criteria::all()) {
    if (only && c.id != only) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    criteria::Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool pass = out.pass;
    std::string timing = " (" + std::to_string(out.seconds).substr(0, 6) + " s";
    if (c.budget_seconds > 0) {
      timing += ", budget " + std::to_string(static_cast<int>(c.budget_seconds)) + " s";
      if (out.seconds > c.budget_seconds) {
        pass = false;
        timing += ", OVER BUDGET";
      }
    }
    timing += ")";
    std::printf("[%s] C%d %s: %s%s\n", pass ? "PASS" : "FAIL", c.id, c.title, out.detail.c_str(),
                timing.c_str());
    std::fflush(stdout);
    failed += !pass;
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 2;
  }
  return failed ? 1 : 0;
}
