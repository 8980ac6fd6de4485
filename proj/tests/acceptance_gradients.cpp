// Compiled with PENS_REAL_DOUBLE against the 64-bit build of the NN sources.

#include <chrono>
#include <cstdio>
#include <string>

#include "gradcheck.hpp"

static_assert(sizeof(pens::Real) == 8, "gradient oracle runs in the 64-bit build");

bool run_gradient_oracle(std::string& detail) {
  using namespace pens::testing;
  const auto start = std::chrono::steady_clock::now();
  double worst = 0;
  std::string worst_case;
  std::size_t cases = 0, checked = 0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (const auto& c : gradient_cases(seed)) {
      const auto r = grad_check(c, 1e-5, 1e-8);
      ++cases;
      checked += r.checked;
      if (r.max_error >= worst) {
        worst = r.max_error;
        worst_case = c.name + " (" + r.worst + ")";
      }
    }
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  char buf[512];
  std::snprintf(buf, sizeof buf, "%zu cases, %zu partials, max rel error %.3g at %s, %.1fs", cases,
                checked, worst, worst_case.c_str(), seconds);
  detail = buf;
  return checked > 0 && worst <= 1e-5 && seconds < 120;
}
