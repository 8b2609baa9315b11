""" Point clouds: N x D points with a colour and a provenance label per point.

    Provenance is either a whole frame ("frame:t") or one cell of a frame ("cell:t:row:col"),
    where t is the frame index within its trajectory.
"""

import logging

import numpy as np
import pandas as pd

from nca.errors import ContractError, EmptyCloudError

FRAME = 0
CELL = 1

class PointCloud():
  """ >>> c = PointCloud(np.zeros((3, 2)), colours=np.full((3, 3), 2.0))
      >>> c.size, c.dim, float(c.colours.max())
      (3, 2, 1.0)
      >>> PointCloud(np.zeros((0, 4)))
      Traceback (most recent call last):
      ...
      nca.errors.EmptyCloudError: A point cloud needs at least one point
  """
  def __init__(self, points, colours=None, provenance=None):
    points = np.asarray(points)
    if not np.issubdtype(points.dtype, np.floating):
      points = points.astype(np.float64)
    if points.ndim != 2:
      raise ContractError("Points must be N x D, got shape %s" % (points.shape,))
    if len(points) < 1:
      raise EmptyCloudError("A point cloud needs at least one point")
    if not np.all(np.isfinite(points)):
      raise ContractError("Point cloud has non-finite entries")
    self.points = points
    if colours is None:
      colours = np.full((len(points), 3), 0.5)
    colours = np.clip(np.asarray(colours, dtype=np.float64), 0.0, 1.0)
    if colours.shape != (len(points), 3):
      raise ContractError("Need one RGB colour per point: %s points, colours %s" % (len(points), colours.shape))
    self.colours = colours
    if provenance is None:
      provenance = framesProvenance(np.arange(len(points)))
    provenance = np.asarray(provenance, dtype=np.int64)
    if provenance.shape != (len(points), 4):
      raise ContractError("Need one provenance row per point, got %s" % (provenance.shape,))
    self.provenance = provenance

  @property
  def size(self):
    return self.points.shape[0]

  @property
  def dim(self):
    return self.points.shape[1]

  def subset(self, indices):
    indices = np.asarray(indices, dtype=np.int64)
    return PointCloud(self.points[indices], self.colours[indices], self.provenance[indices])

  def withPoints(self, points):
    """ Same colours and provenance with new coordinates (e.g. a projection). """
    return PointCloud(points, self.colours, self.provenance)

  def provenanceLabels(self):
    """ >>> PointCloud(np.zeros((1, 1)), provenance=[[CELL, 4, 2, 3]]).provenanceLabels()
        ['cell:4:2:3']
    """
    return [("frame:%d" % t) if kind == FRAME else ("cell:%d:%d:%d" % (t, row, col))
      for kind, t, row, col in self.provenance]

  def frame(self):
    """ The x0..xD-1,r,g,b,provenance table. """
    table = pd.DataFrame(self.points.astype(np.float64), columns=['x%d' % i for i in range(self.dim)])
    table['r'] = self.colours[:, 0]
    table['g'] = self.colours[:, 1]
    table['b'] = self.colours[:, 2]
    table['provenance'] = self.provenanceLabels()
    return table

  def save(self, path):
    self.frame().to_csv(path, index=False)
    logging.info("Wrote %s points of dimension %s to %s", self.size, self.dim, path)

  def __repr__(self):
    return "PointCloud(%s x %s)" % (self.size, self.dim)

def framesProvenance(frames):
  frames = np.asarray(frames, dtype=np.int64)
  return np.stack([np.full(len(frames), FRAME), frames, np.full(len(frames), -1), np.full(len(frames), -1)], axis=1)

def cellsProvenance(frames, rows, cols):
  return np.stack([np.full(len(frames), CELL), frames, rows, cols], axis=1).astype(np.int64)

def parseProvenance(label):
  """ >>> parseProvenance('frame:7'), parseProvenance('cell:1:2:3')
      ([0, 7, -1, -1], [1, 1, 2, 3])
  """
  parts = str(label).split(':')
  if parts[0] == 'frame' and len(parts) == 2:
    return [FRAME, int(parts[1]), -1, -1]
  if parts[0] == 'cell' and len(parts) == 4:
    return [CELL] + [int(p) for p in parts[1:]]
  raise ContractError("Unrecognized provenance label %r" % label)

def loadCloud(path):
  """ Read a cloud written by PointCloud.save. """
  table = pd.read_csv(path)
  columns = [c for c in table.columns if c.startswith('x')]
  if not columns or any(c not in table.columns for c in ('r', 'g', 'b', 'provenance')):
    raise ContractError("%s is not a point cloud table (x0..xD-1,r,g,b,provenance)" % path)
  if len(table) == 0:
    raise EmptyCloudError("%s holds no points" % path)
  points = table[sorted(columns, key=lambda c: int(c[1:]))].to_numpy(dtype=np.float64)
  colours = table[['r', 'g', 'b']].to_numpy(dtype=np.float64)
  provenance = [parseProvenance(label) for label in table['provenance']]
  return PointCloud(points, colours, provenance)
