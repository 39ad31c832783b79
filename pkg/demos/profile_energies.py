"""Optimal and truncated transition profiles, and the rescaled recovery layer.

Run: python3 demos/profile_energies.py
"""
import numpy as np

from phasefield.profile import build_truncated_profile, j_functional, recovery_profile, w_infinity

print(f"optimal profile: J = {j_functional(w_infinity):.10f}")
for delta in (0.5, 0.2, 0.1, 0.05):
    prof = build_truncated_profile(delta)
    sp = prof.spec
    print(f"delta={delta:<5} J={sp.J:.6f}  plateau r<={sp.r_flat:.3f}  support r<{sp.r_sharp:.3f}")

prof = build_truncated_profile(0.1)
for eps in (0.1, 0.03, 0.01):
    z = recovery_profile(prof, eps)
    print(f"eps={eps:<5} layer energy {z.energy():.8f}  (bound 4 + 2 delta = 4.2)  half-width {z.eps_sharp:.4f}")

r = np.linspace(0.0, 6.0, 13)
print("\n   r    w_inf   w_trunc")
for ri, a, b in zip(r, w_infinity(r), prof(r)):
    print(f"{ri:5.2f}  {a:.5f}  {b:.5f}")
