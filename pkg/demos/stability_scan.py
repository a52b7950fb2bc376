"""Linear well-posedness of the junction conditions in the Laplace domain.

Scans |det M(z)| over Re z > 0 for several junction angles, then shows
where well-posedness is lost: once the two surface angles sum to less than
pi, both determinants vanish at the same positive real z.
"""

import numpy as np

from gbmotion.wellposedness import AngleConfig, determinant, pdae_real_root, rect_grid, scan_min_abs_det

grid = rect_grid()
for m in (0.3, 0.5, 1.0, 1.5, 1.96):
    a = AngleConfig.from_m(m)
    p, _ = scan_min_abs_det("parabolic", a, grid)
    q, _ = scan_min_abs_det("pdae", a, grid)
    print(f"m = {m:4.2f}  theta = {np.degrees(a.theta12):6.2f} deg  min|det| parabolic {p:.3e}  pdae {q:.3e}")

a = AngleConfig(1.2, np.pi - 0.2 - 1.2)
r = pdae_real_root(a)
print(f"theta12 + theta13 = pi - 0.2: real zero at z = {r:.4e}, "
      f"|det| parabolic {abs(determinant('parabolic', a, r)):.1e}, pdae {abs(determinant('pdae', a, r)):.1e}")
