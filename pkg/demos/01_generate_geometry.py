"""Sample a random perforation, check its admissibility, and picture it.

Cavity centers are drawn by dart throwing with a hard minimum distance of
2*R3*eps, so guard balls never overlap and never touch the outer boundary;
shapes mix disks with rotated three-lobed stars.
"""

import numpy as np

from perfhom import DomainSpec, generate_perforation, validate_a1

eps, eta = 0.08, 0.5
perf = generate_perforation(DomainSpec.unit_square(), eps, eta,
                            radii=(0.5, 1.0, 1.5), target_count="fill", seed=42,
                            shapes=("unit_disk", "star"))

print(f"sampled {len(perf.cavities)} cavities at scale eps*eta = {perf.scale:g}")
print(f"guard radius R3*eps = {perf.guard_radius:g} "
      f"(area-based packing cap: {perf.packing_bound()})")

report = validate_a1(perf)
print("admissibility violations:", list(report.violations) or "none")

centers = perf.centers()
dists = np.sqrt(((centers[:, None] - centers[None, :]) ** 2).sum(-1))
np.fill_diagonal(dists, np.inf)
print(f"closest center pair: {dists.min():.4f} (must be >= {2 * perf.guard_radius:.4f})")

perf.to_json("perforation_demo.json")
print("wrote perforation_demo.json")

try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, ax = plt.subplots(figsize=(6, 6))
    for k in range(len(perf.cavities)):
        poly = perf.scaled_cavity(k).boundary_polygon(96)
        ax.fill(poly[:, 0], poly[:, 1], color="steelblue")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_aspect("equal")
    ax.set_title(f"{len(perf.cavities)} cavities, eps={eps}, eta={eta}")
    fig.savefig("perforation_demo.png", dpi=150)
    print("wrote perforation_demo.png")
