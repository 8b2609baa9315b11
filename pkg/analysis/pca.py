""" Exact PCA: fit, projection, reconstruction and .pca files.

    Wide clouds (D > N, e.g. whole flattened frames) are decomposed through the N x N Gram
    matrix; narrow ones through the D x D covariance. Both accumulate over fixed column
    blocks so the reduction order never changes.
"""

import logging

import numpy as np
import scipy.linalg

from nca import binfile
from nca.errors import ContractError, ValidationError

MAGIC = b'NPCA'
BLOCK = 4096

class PcaBasis():
  """ mean [D], components [k x D] with orthonormal rows, explainedVariance [k] descending.
      >>> b = PcaBasis(np.zeros(3), np.eye(3)[:2], [2.0, 1.0])
      >>> b.project(np.array([[1.0, 2.0, 3.0]])).tolist(), b.reconstruct(np.array([[1.0, 2.0]])).tolist()
      ([[1.0, 2.0]], [[1.0, 2.0, 0.0]])
  """
  def __init__(self, mean, components, explainedVariance):
    self.mean = np.asarray(mean, dtype=np.float64)
    self.components = np.atleast_2d(np.asarray(components, dtype=np.float64))
    self.explainedVariance = np.asarray(explainedVariance, dtype=np.float64)
    if self.components.shape[1] != len(self.mean) or len(self.explainedVariance) != len(self.components):
      raise ContractError("Basis shapes don't agree: mean %s, components %s, variances %s"
        % (self.mean.shape, self.components.shape, self.explainedVariance.shape))

  @property
  def k(self):
    return self.components.shape[0]

  @property
  def dim(self):
    return self.components.shape[1]

  def project(self, points):
    points = np.asarray(points)
    if points.ndim != 2 or points.shape[1] != self.dim:
      raise ContractError("Points are %s; basis expects N x %s" % (points.shape, self.dim))
    coords = np.zeros((len(points), self.k))
    for start in range(0, self.dim, BLOCK):
      block = slice(start, start + BLOCK)
      coords += (points[:, block].astype(np.float64) - self.mean[block]) @ self.components[:, block].T
    return coords

  def reconstruct(self, coords):
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] != self.k:
      raise ContractError("Coordinates are %s; basis has %s components" % (coords.shape, self.k))
    return coords @ self.components + self.mean

  def __repr__(self):
    return "PcaBasis(k=%s, D=%s)" % (self.k, self.dim)

def centred(points, mean, block):
  return points[:, block].astype(np.float64) - mean[block]

def gram(points, mean):
  n = len(points)
  result = np.zeros((n, n))
  for start in range(0, points.shape[1], BLOCK):
    x = centred(points, mean, slice(start, start + BLOCK))
    result += x @ x.T
  return result

def covariance(points, mean):
  x = centred(points, mean, slice(None))
  return x.T @ x

def signConvention(components):
  """ Flip each row so its largest-magnitude entry is positive.
      >>> signConvention(np.array([[0.6, -0.8], [0.8, 0.6]])).tolist()
      [[-0.6, 0.8], [0.8, 0.6]]
  """
  rows = np.arange(len(components))
  signs = np.sign(components[rows, np.argmax(np.abs(components), axis=1)])
  signs[signs == 0] = 1.0
  return components * signs[:, None]

def completeBasis(components, filled):
  """ Replace the rows not in filled by unit vectors orthogonal to everything before them. """
  dim = components.shape[1]
  for row in range(len(components)):
    if filled[row]:
      continue
    for axis in range(dim):
      v = np.zeros(dim)
      v[axis] = 1.0
      others = components[np.flatnonzero(filled)]
      v -= others.T @ (others @ v)
      norm = np.linalg.norm(v)
      if norm > 0.5:
        components[row] = v / norm
        filled[row] = True
        break
  return components

def pcaFit(points, k):
  """ Top-k eigenvectors of the sample covariance (normalised by N - 1).
      >>> rng = np.random.default_rng(0)
      >>> plane = rng.normal(size=(40, 2)) @ rng.normal(size=(2, 10))
      >>> b = pcaFit(plane, 2)
      >>> bool(np.abs(b.reconstruct(b.project(plane)) - plane).max() < 1e-8)
      True
      >>> bool(np.allclose(b.components @ b.components.T, np.eye(2), atol=1e-8))
      True
      >>> pcaFit(plane, 11)
      Traceback (most recent call last):
      ...
      nca.errors.ValidationError: k = 11 is too large for 40 points of dimension 10
  """
  points = getattr(points, 'points', points)
  points = np.asarray(points)
  n, dim = points.shape
  if n < 2:
    raise ValidationError("PCA needs at least 2 points, got %s" % n)
  if not 1 <= k <= min(n, dim):
    raise ValidationError("k = %s is too large for %s points of dimension %s" % (k, n, dim))
  mean = points.mean(axis=0, dtype=np.float64)

  if dim > n:
    logging.debug("PCA of %s x %s through the Gram matrix", n, dim)
    values, vectors = scipy.linalg.eigh(gram(points, mean))
    order = np.argsort(-values, kind='stable')[:k]
    values = np.maximum(values[order], 0.0)
    components = np.zeros((k, dim))
    for start in range(0, dim, BLOCK):
      block = slice(start, start + BLOCK)
      components[:, block] = vectors[:, order].T @ centred(points, mean, block)
    filled = values > 1e-12 * max(float(values.max()), 1e-300)
    components[filled] /= np.linalg.norm(components[filled], axis=1)[:, None]
    components[~filled] = 0.0
    values[~filled] = 0.0
    components = completeBasis(components, filled.copy())
  else:
    logging.debug("PCA of %s x %s through the covariance", n, dim)
    values, vectors = scipy.linalg.eigh(covariance(points, mean))
    order = np.argsort(-values, kind='stable')[:k]
    values = np.maximum(values[order], 0.0)
    components = vectors[:, order].T.copy()

  variances = values / (n - 1)
  logging.info("PCA explained variance: %s", ', '.join('%.4g' % v for v in variances))
  return PcaBasis(mean, signConvention(components), variances)

def principalAngles(a, b):
  """ Angles between the row spaces of two component matrices, largest first. """
  return scipy.linalg.subspace_angles(np.asarray(a).T, np.asarray(b).T)

def savePca(basis, path):
  binfile.writeContainer(path, MAGIC, {'k': basis.k, 'dim': basis.dim}, {
    'mean': basis.mean, 'components': basis.components, 'explained_variance': basis.explainedVariance})

def loadPca(path):
  meta, arrays = binfile.readContainer(path, MAGIC)
  return PcaBasis(arrays['mean'], arrays['components'], arrays['explained_variance'])

def saveCoords(cloud, coords, path):
  """ Projected coordinates with the cloud's colours and provenance, in the point cloud layout. """
  cloud.withPoints(coords).save(path)
