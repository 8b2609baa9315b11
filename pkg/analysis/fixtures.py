""" Synthetic clouds with known topology. """

import numpy as np

from nca import rng

def circle(n=60, radius=1.0, centre=(0.0, 0.0)):
  """ >>> pts = circle(4)
      >>> np.round(pts, 6).tolist()
      [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [-0.0, -1.0]]
  """
  angles = 2 * np.pi * np.arange(n) / n
  return np.stack([centre[0] + radius * np.cos(angles), centre[1] + radius * np.sin(angles)], axis=1)

def noisyCircle(n=80, noise=0.05, seed=0):
  """ A unit circle in 3-D with Gaussian jitter in every coordinate. """
  pts = np.concatenate([circle(n), np.zeros((n, 1))], axis=1)
  return pts + rng.generator(seed, rng.SAMPLING).normal(scale=noise, size=pts.shape)

def twoRings(n=30, separation=4.0):
  """ Two disjoint unit circles with centres separation apart. """
  return np.concatenate([circle(n), circle(n, centre=(separation, 0.0))])

def fibonacciSphere(n=150):
  """ Near-uniform points on the unit sphere.
      >>> bool(np.allclose(np.linalg.norm(fibonacciSphere(), axis=1), 1.0))
      True
  """
  i = np.arange(n) + 0.5
  z = 1 - 2 * i / n
  rho = np.sqrt(1 - z * z)
  phi = np.pi * (3 - np.sqrt(5)) * i
  return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)

def gridTorus(major=40, minor=10, R=2.0, r=0.7):
  """ A major x minor grid on the torus with tube radius r around a circle of radius R.
      >>> gridTorus().shape
      (400, 3)
  """
  phi, theta = np.meshgrid(2 * np.pi * np.arange(major) / major, 2 * np.pi * np.arange(minor) / minor, indexing='ij')
  rho = R + r * np.cos(theta)
  return np.stack([rho * np.cos(phi), rho * np.sin(phi), r * np.sin(theta)], axis=-1).reshape(-1, 3)

# Filtration ceilings, and for the torus a significance threshold, at which these fixtures report
# (1, 0, 1) and (1, 2, 1). The torus needs its own threshold: under the 0.8 ceiling the largest
# finite death is below 0.8, so the default 0.3 x largest death keeps grid-spacing H0 bars
# and some short H1 bars, reporting far more than (1, 2, 1).
TORUS_RADIUS = 0.8
TORUS_THRESHOLD = 0.5
SPHERE_RADIUS = 1.75
