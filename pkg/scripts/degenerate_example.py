#!/usr/bin/env python3
"""Walk through the 2x2 game [[0, 0], [1, -1]]: equilibria, certificates, continuum."""
import json

import numpy as np

from reggames.equilibria import enumerate_2p
from reggames.game import Profile
from reggames.potential import degenerate_example
from reggames.regularity import certify, jacobian_x

game = degenerate_example()
print("payoff (shared):")
print(game.tensor(0))

for rec in enumerate_2p(game):
    cert = certify(game, rec.profile)
    sig = [np.round(s, 6).tolist() for s in rec.profile.simplex]
    print(f"\n{sig}  isolated={rec.isolated}")
    print(json.dumps({k: cert.to_dict()[k] for k in ("verdict", "witnesses", "x_jacobian_min_singular")}))

# every (a1, (q, 1-q)) with q <= 1/2 is an equilibrium
print("\ncontinuum row a1, column q(a1) in [0, 1/2]:")
for q in np.linspace(0, 0.5, 6):
    x = Profile.from_simplex([[1.0, 0.0], [q, 1 - q]])
    print(f"  q={q:.1f}  verdict={certify(game, x).verdict:24s} min sv of Jx={np.linalg.svd(jacobian_x(x, game), compute_uv=False).min():.2e}")
