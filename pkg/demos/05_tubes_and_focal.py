"""Tubes around hypersurfaces and the focal radius.

A tube of width R around a closed hypersurface splits into the region
the surface encloses plus a one-sided outer shell swept by normal
geodesics. The shell integral stops early on rays that hit a focal
point, which is where the transported area element collapses.
"""

import math

import numpy as np

from smms.models import ModelSpec, build_model
from smms.transport import radial_transport
from smms.volume import TubeSpec, focal_time, tube_volume, weighted_ball_volume

# flat space first: tube(B(1), R) is just the ball of radius 1 + R
smms, sphere, _ = build_model(ModelSpec("euclidean", {"n": 3}))
print("tube volumes around the unit sphere in flat R^3")
print(f"{'R':>5} {'tube':>14} {'ball(1+R)':>14}")
for R in (0.5, 1.0, 2.0):
    tube = tube_volume(smms, TubeSpec(sphere, R))
    ball = (4.0 * math.pi / 3.0) * (1.0 + R) ** 3
    print(f"{R:5.2f} {tube:14.9f} {ball:14.9f}")
print()

# focal radius: flat rays never focus, sphere rays focus at the pole
grid = np.linspace(0.0, 1000.0, 513)[1:]
start = (np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, 1.0]), np.eye(2))
flat = radial_transport(smms, start, t_grid=grid)
print(f"flat space focal radius: {focal_time(flat)}  (rays never focus)")

smms3, _, meta = build_model(ModelSpec("sphere_ambient", {"n": 3}))
r0 = meta["r0"]
start = (np.array([r0, 0.5 * math.pi, 1.0]), np.array([1.0, 0.0, 0.0]),
         (math.cos(r0) / math.sin(r0)) * np.eye(2))
sph = radial_transport(smms3, start,
                       t_grid=np.linspace(0.0, 3.1, 1025)[1:])
print(f"round S^3 focal radius: {focal_time(sph):.6f} "
      f"(antipode at pi - r0 = {math.pi - r0:.6f})")
print()

# weighted case: gaussian tube volume has a closed form to compare with
smmsg, circle, _ = build_model(ModelSpec("gaussian_soliton",
                                         {"n": 2, "lambda": 1.0,
                                          "radius": 0.5}))
print("gaussian tubes around the circle of radius 0.5")
print(f"{'R':>5} {'tube':>14} {'closed form':>14}")
for R in (0.5, 1.0, 2.0):
    tube = tube_volume(smmsg, TubeSpec(circle, R))
    exact = 2.0 * math.pi * (1.0 - math.exp(-0.5 * (R + 0.5) ** 2))
    print(f"{R:5.2f} {tube:14.9f} {exact:14.9f}")

ball = weighted_ball_volume(smmsg, np.zeros(2), 2.5)
print(f"\ncross-check: weighted ball of radius 2.5 = {ball:.9f}")
