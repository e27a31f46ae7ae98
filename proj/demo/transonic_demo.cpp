// Smooth transonic profile for the canonical gas, its KZ check, and a shock polar.
#include <cstdio>

#include "sonic/profile_1d.hpp"
#include "sonic/shock_polar.hpp"

int main() {
  using namespace sonic;
  const GasParams gas(3.0, 1.0 / 3.0, 1.0, 0.5);
  const double u0 = 0.5 * gas.u_sonic();
  const InletData inlet{u0, critical_E(gas, u0, Branch::accelerating)};

  const auto lemma = verify_lemma(gas, inlet);
  std::printf("u_s = %.6f  u* = %.10f\n", gas.u_sonic(), find_u_star(gas));
  for (const auto& c : lemma.claims)
    std::printf("  [%s] %-5s margin %.3g  %s\n", c.id.c_str(), c.passed ? "ok" : "FAIL", c.margin, c.statement.c_str());

  const auto& prof = *lemma.profile;
  const double l_s = *prof.l_s(), l_max = *prof.l_max();
  std::printf("l_s = %.8f  l_max = %.8f\n", l_s, l_max);

  // stop halfway between the sonic point and l_max, where u' > 0 still
  const auto kz = kz_check(gas, truncate_profile(gas, prof, 0.5 * (l_s + l_max)));
  std::printf("KZ on [0, %.4f]: lambda_L = %.4f (%s)\n", 0.5 * (l_s + l_max), kz.lambda_L, kz.holds ? "holds" : "fails");

  const auto polar = compute_polar(UpstreamState(2.0, 1.0, 2.0));
  std::printf("shock polar gamma=2 q=2: theta_sonic = %.6f  theta_d = %.6f\n", polar.theta_sonic, polar.theta_d);
  const auto weak = weak_state(polar, 0.2);
  std::printf("weak state at theta_w = 0.2: (%.6f, %.6f)\n", weak.u1, weak.u2);
  return lemma.all_passed() && kz.holds ? 0 : 1;
}
