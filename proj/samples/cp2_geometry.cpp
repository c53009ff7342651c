// Prints curvature data of the Fubini-Study metric at a few chart points and
// checks that the canonical su(3) connection built from it is flat.

#include <algorithm>
#include <cstdio>

#include "mdm/cartan_su3.hpp"

int main() {
  using namespace mdm;
  const Background cp2 = cp2_background();
  Rng rng(42);
  for (int k = 0; k < 4; ++k) {
    const Point p = cp2.sample(rng);
    const PointGeometry g(cp2.psi(p));
    const Su3Connection conn = canonical_connection(g);
    const auto ke = kahler_einstein_check(g, conn.a);
    std::printf("x = (%+.3f %+.3f %+.3f %+.3f)  s = %.12f  |T| = %.1e  |F| = %.1e  ke = %.1e\n", p[0], p[1], p[2], p[3],
                g.scalar.s, g.u2.T.max_norm(), curvature_blocks(conn).assembled().max_norm(),
                std::max({ke.ida_omega, ke.F_Sigma, ke.T}));
  }
}
