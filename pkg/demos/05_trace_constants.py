"""Estimate the best constants of the three cavity trace inequalities.

Each inequality becomes a generalized eigenproblem on its own local geometry
(an annular neighborhood of one cavity); the top eigenvalue is the best
constant.  The point being verified is uniformity: with the inequality's own
eps/eta weights divided out, the constants barely move across the grid.
"""

from perfhom.metrics import LEMMA_KIND, lemma_constant

grid_eps = (0.2, 0.1, 0.05)
grid_eta = (0.5, 0.25)

for lid in ("3.1", "3.3", "3.6"):
    print(f"inequality {lid}: {LEMMA_KIND[lid]}")
    vals = []
    for eps in grid_eps:
        for eta in grid_eta:
            lc = lemma_constant(lid, eps, eta)
            vals.append(lc.best_constant)
            print(f"   eps={eps:<5} eta={eta:<5} best constant {lc.best_constant:.5f} "
                  f"(eigen residual {lc.eigen_residual:.1e})")
    print(f"   spread max/min = {max(vals) / min(vals):.3f}\n")

print("star-shaped cavity for comparison (same inequality, different shape):")
for eps in grid_eps:
    lc = lemma_constant("3.3", eps, 0.5, cavity_shape="star")
    print(f"   eps={eps:<5} best constant {lc.best_constant:.5f}")
