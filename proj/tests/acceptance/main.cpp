#include <algorithm>
#include <cstdio>
#include <exception>

#include "acceptance.hpp"

int main() {
  std::vector<acceptance::Outcome> all;
  try {
    auto append = [&all](std::vector<acceptance::Outcome> part) {
      for (auto& o : part) all.push_back(std::move(o));
    };
    append(acceptance::math_criteria());
    append(acceptance::sim_criteria());
    append(acceptance::transport_criteria());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance suite crashed: %s\n", e.what());
    return 2;
  }

  std::stable_sort(all.begin(), all.end(),
                   [](const acceptance::Outcome& a,
                      const acceptance::Outcome& b) {
                     return a.number < b.number;
                   });

  int failures = 0;
  for (const auto& o : all) {
    if (!o.pass) ++failures;
    if (o.number <= 9) {
      std::printf("[%s] criterion %d: %s | %s\n", o.pass ? "PASS" : "FAIL",
                  o.number, o.label.c_str(), o.detail.c_str());
    } else {
      std::printf("[%s] trend: %s | %s\n", o.pass ? "PASS" : "FAIL",
                  o.label.c_str(), o.detail.c_str());
    }
  }
  std::printf("%d/%zu checks passed\n", static_cast<int>(all.size()) - failures,
              all.size());
  return failures == 0 ? 0 : 1;
}
