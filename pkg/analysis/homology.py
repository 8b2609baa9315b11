""" Vietoris-Rips persistent homology up to H2 with Z/2 coefficients.

    A simplex enters the filtration at its diameter (largest pairwise distance). H0 comes from
    a union-find pass over the sorted edges, so every point gets an interval. H1 and H2 come
    from ripser. Features still alive at the maximum radius get death inf, and pairs of zero
    persistence are dropped above dimension 0.

    Two slower reductions check it: reducedPersistence reduces coboundary columns with
    clearing, and naivePersistence reduces the whole boundary matrix.
"""

import itertools
import logging

import numpy as np
import pandas as pd
import ripser
import scipy.spatial.distance
from scipy.cluster.hierarchy import DisjointSet

from nca import rng
from nca.errors import ComplexTooLarge, ContractError, ValidationError

DEFAULT_BUDGET = 1000
DEFAULT_LIMIT = 5000000
SIGNIFICANCE = 0.3
CELLS = 2000000  # float64 entries per coface batch

class DistanceMatrix():
  """ Condensed upper-triangular Euclidean distances, as scipy's pdist lays them out.
      >>> d = distanceMatrix([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
      >>> d.n, sorted(round(float(x), 4) for x in d.condensed)
      (4, [1.0, 1.0, 1.0, 1.0, 1.4142, 1.4142])
      >>> distanceMatrix([[2.0, 3.0], [2.0, 3.0]]).condensed.tolist()
      [0.0]
  """
  def __init__(self, condensed, n):
    condensed = np.asarray(condensed, dtype=np.float64)
    if len(condensed) != n * (n - 1) // 2:
      raise ContractError("%s points need %s distances, got %s" % (n, n * (n - 1) // 2, len(condensed)))
    if np.any(condensed < 0) or not np.all(np.isfinite(condensed)):
      raise ContractError("Distances must be finite and nonnegative")
    self.condensed = condensed
    self.n = int(n)
    self._square = None

  @property
  def square(self):
    if self._square is None:
      self._square = scipy.spatial.distance.squareform(self.condensed) if self.n > 1 else np.zeros((self.n, self.n))
    return self._square

  def enclosingRadius(self):
    """ The smallest radius at which some point reaches every other one. """
    if self.n < 2:
      return 0.0
    return float(self.square.max(axis=1).min())

  def __repr__(self):
    return "DistanceMatrix(n=%s)" % self.n

def distanceMatrix(points):
  points = np.asarray(getattr(points, 'points', points), dtype=np.float64)
  if points.ndim != 2 or len(points) < 1:
    raise ContractError("Need an N x D point array with N >= 1, got shape %s" % (points.shape,))
  return DistanceMatrix(scipy.spatial.distance.pdist(points), len(points))

def maxminSubsample(points, budget, seed=0):
  """ Farthest-point order from a seeded start: each pick maximises its distance to those already picked.
      >>> pts = np.array([[0.0, 0.0], [0.1, 0.0], [10.0, 0.0], [10.1, 0.0]])
      >>> sorted(int(i) // 2 for i in maxminSubsample(pts, 2, seed=3))
      [0, 1]
      >>> sorted(int(i) for i in maxminSubsample(pts, 10))
      [0, 1, 2, 3]
  """
  points = np.asarray(getattr(points, 'points', points), dtype=np.float64)
  n = len(points)
  if budget < 1:
    raise ValidationError("The subsample budget must be positive, got %s" % budget)
  budget = min(int(budget), n)
  start = int(rng.generator(seed, rng.SAMPLING).integers(n))
  chosen = [start]
  distances = np.linalg.norm(points - points[start], axis=1)
  distances[start] = -1.0
  while len(chosen) < budget:
    pick = int(np.argmax(distances))
    chosen.append(pick)
    distances = np.minimum(distances, np.linalg.norm(points - points[pick], axis=1))
    distances[chosen] = -1.0
  logging.debug("Maxmin subsample kept %s of %s points", budget, n)
  return np.array(chosen, dtype=np.int64)

class PersistenceDiagram():
  """ Intervals (dim, birth, death), kept sorted; death may be inf.
      >>> d = PersistenceDiagram([(1, 0.5, 2.0), (0, 0.0, float('inf')), (0, 0.0, 1.0)])
      >>> d.intervals
      [(0, 0.0, 1.0), (0, 0.0, inf), (1, 0.5, 2.0)]
      >>> d.inDim(1).persistence.tolist()
      [1.5]
  """
  def __init__(self, intervals):
    intervals = [(int(dim), float(birth), float(death)) for dim, birth, death in intervals]
    for dim, birth, death in intervals:
      if death < birth:
        raise ContractError("Interval (%s, %s, %s) dies before it is born" % (dim, birth, death))
    self.intervals = sorted(intervals)

  @property
  def dims(self):
    return np.array([i[0] for i in self.intervals], dtype=np.int64)

  @property
  def births(self):
    return np.array([i[1] for i in self.intervals], dtype=np.float64)

  @property
  def deaths(self):
    return np.array([i[2] for i in self.intervals], dtype=np.float64)

  @property
  def persistence(self):
    return self.deaths - self.births

  def inDim(self, dim):
    return PersistenceDiagram([i for i in self.intervals if i[0] == dim])

  def scaled(self, factor):
    return PersistenceDiagram([(dim, birth * factor, death * factor) for dim, birth, death in self.intervals])

  def maxFiniteDeath(self):
    deaths = self.deaths
    finite = deaths[np.isfinite(deaths)]
    return float(finite.max()) if len(finite) else 0.0

  def frame(self):
    return pd.DataFrame(self.intervals, columns=['dim', 'birth', 'death'])

  def save(self, path):
    self.frame().to_csv(path, index=False)
    logging.info("Wrote %s intervals to %s", len(self), path)

  def __len__(self):
    return len(self.intervals)

  def __eq__(self, other):
    return isinstance(other, PersistenceDiagram) and self.intervals == other.intervals

  def __repr__(self):
    counts = [int((self.dims == d).sum()) for d in range(3)]
    return "PersistenceDiagram(H0 %s, H1 %s, H2 %s intervals)" % tuple(counts)

def loadDiagram(path):
  table = pd.read_csv(path)
  return PersistenceDiagram(zip(table['dim'], table['birth'], table['death'].astype(np.float64)))

def defaultThreshold(diagram):
  """ 0.3 times the largest finite death. """
  return SIGNIFICANCE * diagram.maxFiniteDeath()

def significant(diagram, threshold):
  """ Intervals whose persistence exceeds threshold; essential ones always do. """
  return PersistenceDiagram([i for i in diagram.intervals if i[2] - i[1] > threshold])

class BettiReport():
  def __init__(self, threshold, counts):
    self.threshold = float(threshold)
    self.counts = tuple(int(c) for c in counts)

  @property
  def h0(self):
    return self.counts[0]

  @property
  def h1(self):
    return self.counts[1]

  @property
  def h2(self):
    return self.counts[2]

  def toJson(self):
    return {'threshold': self.threshold, 'h0': self.h0, 'h1': self.h1, 'h2': self.h2}

  def __repr__(self):
    return "Betti (h0, h1, h2) = %s above persistence %.4g" % (self.counts, self.threshold)

def bettiReport(diagram, threshold=None):
  """ >>> d = PersistenceDiagram([(0, 0.0, float('inf')), (0, 0.0, 0.1), (1, 0.1, 1.7), (2, 1.0, 1.05)])
      >>> bettiReport(d)
      Betti (h0, h1, h2) = (1, 1, 0) above persistence 0.51
  """
  if threshold is None:
    threshold = defaultThreshold(diagram)
  kept = significant(diagram, threshold)
  return BettiReport(threshold, [int((kept.dims == d).sum()) for d in range(3)])

def bettiAt(diagram, radius):
  """ Features alive in the complex at radius: birth <= radius < death.
      >>> bettiAt(PersistenceDiagram([(0, 0.0, float('inf')), (0, 0.0, 1.0), (1, 0.5, 2.0)]), 0.7)
      (2, 1, 0)
  """
  return tuple(sum(1 for dim, birth, death in diagram.intervals if dim == d and birth <= radius < death)
    for d in range(3))

def edgeList(dist, maxRadius):
  """ Edges within maxRadius sorted by (diameter, i, j). """
  i, j = np.triu_indices(dist.n, 1)
  keep = dist.condensed <= maxRadius
  i, j, diams = i[keep], j[keep], dist.condensed[keep]
  order = np.lexsort((j, i, diams))
  return np.stack([i[order], j[order]], axis=1), diams[order]

def zeroDimensional(n, edges, diams):
  """ H0 deaths and the edges that merged two components, from one union-find pass. """
  components = DisjointSet(range(n))
  deaths = []
  merging = set()
  for (i, j), diam in zip(edges.tolist(), diams.tolist()):
    if components.merge(i, j):
      deaths.append(diam)
      merging.add((i, j))
      if len(deaths) == n - 1:
        break
  return deaths, merging, components.n_subsets

def triangles(square, maxRadius, limit):
  n = len(square)
  near = square <= maxRadius
  chunks = []
  count = 0
  for i in range(n):
    for j in np.flatnonzero(near[i, i + 1:]) + i + 1:
      ks = np.flatnonzero(near[i, j + 1:] & near[j, j + 1:]) + j + 1
      if len(ks):
        chunks.append(np.stack([np.full(len(ks), i), np.full(len(ks), j), ks], axis=1))
        count += len(ks)
    if count > limit:
      raise ComplexTooLarge(2, count, limit)
  if not chunks:
    return np.zeros((0, 3), dtype=np.int64), np.zeros(0)
  simplices = np.concatenate(chunks).astype(np.int64)
  diams = np.maximum.reduce([square[simplices[:, a], simplices[:, b]] for a, b in ((0, 1), (0, 2), (1, 2))])
  return simplices, diams

def oldestCofaces(square, simplices, diams, maxRadius):
  """ For each simplex, the diameter and added vertex of its oldest coface (inf, -1 if none).
      Among equal diameters the smallest added vertex gives the lexicographically first coface.
  """
  count, width = simplices.shape
  n = len(square)
  cofaceDiams = np.full(count, np.inf)
  cofaceVertices = np.full(count, -1, dtype=np.int64)
  batch = max(1, CELLS // max(1, n * width))
  for start in range(0, count, batch):
    s = simplices[start:start + batch]
    values = np.maximum.reduce([square[s[:, c]] for c in range(width)])
    values = np.maximum(values, diams[start:start + batch, None])
    values[np.arange(len(s))[:, None], s] = np.inf
    values[values > maxRadius] = np.inf
    picks = np.argmin(values, axis=1)
    cofaceVertices[start:start + batch] = picks
    cofaceDiams[start:start + batch] = values[np.arange(len(s)), picks]
  cofaceVertices[~np.isfinite(cofaceDiams)] = -1
  return cofaceDiams, cofaceVertices

class Coboundary():
  """ Builds coboundary columns as sets of (diameter, vertices) cofaces. """
  def __init__(self, square, maxRadius):
    self.square = square
    self.maxRadius = maxRadius

  def column(self, vertices, diam):
    values = np.maximum.reduce([self.square[v] for v in vertices])
    values = np.maximum(values, diam)
    values[list(vertices)] = np.inf
    return {(float(values[w]), tuple(sorted(vertices + (int(w),))))
      for w in np.flatnonzero(values <= self.maxRadius)}

def reduceCoboundary(square, simplices, diams, maxRadius):
  """ Persistence pairs and essential births for one dimension of columns.
      Returns (pairs, essential, paired cofaces).
  """
  width = simplices.shape[1]
  cofaceDiams, cofaceVertices = oldestCofaces(square, simplices, diams, maxRadius)
  coboundary = Coboundary(square, maxRadius)
  order = np.lexsort(tuple(simplices[:, c] for c in reversed(range(width))) + (diams,))[::-1]
  pivots = {}
  pairs = []
  essential = []
  built = 0

  def reduced(entry):
    return entry if isinstance(entry, set) else coboundary.column(*entry)

  for index in order.tolist():
    vertices = tuple(int(v) for v in simplices[index])
    diam = float(diams[index])
    if cofaceVertices[index] < 0:
      essential.append(diam)
      continue
    pivot = (float(cofaceDiams[index]), tuple(sorted(vertices + (int(cofaceVertices[index]),))))
    if pivot not in pivots:
      pivots[pivot] = (vertices, diam)
      pairs.append((diam, pivot[0]))
      continue
    column = coboundary.column(vertices, diam)
    built += 1
    while column:
      pivot = min(column)
      if pivot not in pivots:
        break
      column ^= reduced(pivots[pivot])
    if column:
      pivots[pivot] = column
      pairs.append((diam, pivot[0]))
    else:
      essential.append(diam)
  logging.debug("Reduced %s columns of width %s; %s needed explicit reduction", len(order), width, built)
  return pairs, essential, {verts for _, verts in pivots}

def checkArguments(dist, maxDim, maxRadius):
  if maxDim not in (0, 1, 2):
    raise ValidationError("max_dim must be 0, 1 or 2, got %s" % maxDim)
  if dist.n < 1:
    raise ContractError("Persistence needs at least one point")
  if maxRadius is None:
    return dist.enclosingRadius()
  if maxRadius <= 0:
    raise ValidationError("max_radius must be positive, got %s" % maxRadius)
  return float(maxRadius)

def snapped(values, distances):
  """ Each finite radius replaced by the nearest of distances; ripser reports radii in float32.
      >>> snapped(np.float32([1 / 3, np.inf]), np.array([1 / 3, 0.5])).tolist()
      [0.3333333333333333, inf]
  """
  values = np.array(values, dtype=np.float64)
  grid = np.unique(distances)
  finite = np.isfinite(values)
  if len(grid) == 0 or not finite.any():
    return values
  wanted = values[finite]
  upper = np.minimum(np.searchsorted(grid, wanted), len(grid) - 1)
  lower = np.maximum(upper - 1, 0)
  nearer = np.abs(grid[lower] - wanted) <= np.abs(grid[upper] - wanted)
  values[finite] = np.where(nearer, grid[lower], grid[upper])
  return values

def ripsPersistence(dist, maxDim=2, maxRadius=None, limit=DEFAULT_LIMIT):
  """ >>> d = ripsPersistence(distanceMatrix([[0.0], [2.5]]))
      >>> d.intervals
      [(0, 0.0, 2.5), (0, 0.0, inf)]
      >>> from .fixtures import circle
      >>> h1 = significant(ripsPersistence(distanceMatrix(circle(60))), 1.0).inDim(1)
      >>> len(h1), round(float(h1.deaths[0]), 3)
      (1, 1.732)
  """
  maxRadius = checkArguments(dist, maxDim, maxRadius)
  edges, edgeDiams = edgeList(dist, maxRadius)
  if maxDim >= 1 and len(edges) > limit:
    raise ComplexTooLarge(1, len(edges), limit)
  deaths, _, components = zeroDimensional(dist.n, edges, edgeDiams)
  intervals = [(0, 0.0, d) for d in deaths] + [(0, 0.0, np.inf)] * components

  if maxDim >= 1 and len(edges):
    diagrams = ripser.ripser(dist.square, maxdim=maxDim, thresh=maxRadius, distance_matrix=True)['dgms']
    for dim in range(1, maxDim + 1):
      pairs = snapped(diagrams[dim], edgeDiams).reshape(-1, 2)
      intervals += [(dim, birth, death) for birth, death in pairs.tolist() if death > birth]
  diagram = PersistenceDiagram(intervals)
  logging.info("Rips persistence of %s points to radius %.4g: %r", dist.n, maxRadius, diagram)
  return diagram

def reducedPersistence(dist, maxDim=2, maxRadius=None, limit=DEFAULT_LIMIT):
  """ The same diagram from a coboundary reduction written out here, youngest simplex first.
      A column's pivot is its oldest coface; simplices that were pivots one dimension down
      are skipped (clearing), and a column whose oldest coface is still unclaimed is paired
      without being built. Ties are broken by dimension, then by sorted vertices.
      Slow in pure Python: a few hundred points at most.
      >>> d = distanceMatrix(np.random.default_rng(2).normal(size=(30, 2)))
      >>> reducedPersistence(d, 1) == ripsPersistence(d, 1)
      True
  """
  maxRadius = checkArguments(dist, maxDim, maxRadius)
  edges, edgeDiams = edgeList(dist, maxRadius)
  if maxDim >= 1 and len(edges) > limit:
    raise ComplexTooLarge(1, len(edges), limit)
  deaths, merging, components = zeroDimensional(dist.n, edges, edgeDiams)
  intervals = [(0, 0.0, d) for d in deaths] + [(0, 0.0, np.inf)] * components

  cleared = merging
  square = dist.square if maxDim >= 1 else None
  for dim in range(1, maxDim + 1):
    if dim == 1:
      simplices, diams = edges, edgeDiams
    else:
      simplices, diams = triangles(square, maxRadius, limit)
    keep = np.array([tuple(s) not in cleared for s in simplices.tolist()], dtype=bool)
    simplices, diams = simplices[keep].reshape(-1, dim + 1), diams[keep]
    pairs, essential, cleared = reduceCoboundary(square, simplices, diams, maxRadius)
    intervals += [(dim, birth, death) for birth, death in pairs if death > birth]
    intervals += [(dim, birth, np.inf) for birth in essential]
  diagram = PersistenceDiagram(intervals)
  logging.debug("Reduced persistence of %s points to radius %.4g: %r", dist.n, maxRadius, diagram)
  return diagram

def naivePersistence(dist, maxDim=2, maxRadius=None):
  """ Full boundary-matrix reduction of the whole filtration: no clearing, no union-find.
      Small inputs only.
      >>> pts = np.random.default_rng(1).normal(size=(8, 2))
      >>> ripsPersistence(distanceMatrix(pts)) == naivePersistence(distanceMatrix(pts))
      True
  """
  maxRadius = checkArguments(dist, maxDim, maxRadius)
  square = dist.square
  simplices = []
  for size in range(1, maxDim + 3):
    for vertices in itertools.combinations(range(dist.n), size):
      diam = max((square[a, b] for a, b in itertools.combinations(vertices, 2)), default=0.0)
      if diam <= maxRadius:
        simplices.append((float(diam), size - 1, vertices))
  simplices.sort()
  index = {vertices: i for i, (_, _, vertices) in enumerate(simplices)}

  owner = {}
  columns = []
  for j, (_, dim, vertices) in enumerate(simplices):
    column = set()
    if dim > 0:
      column = {index[face] for face in itertools.combinations(vertices, dim)}
    while column and max(column) in owner:
      column ^= columns[owner[max(column)]]
    columns.append(column)
    if column:
      owner[max(column)] = j

  intervals = []
  for low, j in owner.items():
    birth, dim, _ = simplices[low]
    death = simplices[j][0]
    if dim <= maxDim and (dim == 0 or death > birth):
      intervals.append((dim, birth, death))
  for j, (birth, dim, _) in enumerate(simplices):
    if dim <= maxDim and not columns[j] and j not in owner:
      intervals.append((dim, birth, np.inf))
  return PersistenceDiagram(intervals)
