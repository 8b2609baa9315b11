""" Point clouds from trajectories.

    Macroscopic: one point per frame, the whole grid flattened row-major with the channel
    index fastest. Microscopic: one point per (frame, cell), D = channels.
"""

import logging

import numpy as np

from nca import rng
from nca.errors import EmptyCloudError, ValidationError
from nca.grid import checkRectangle, rawAlive

from .cloud import PointCloud, cellsProvenance, framesProvenance

def frameRange(trajectory, frames):
  if frames is None:
    return 0, len(trajectory)
  start, stop = int(frames[0]), int(frames[1])
  if not 0 <= start <= stop <= len(trajectory):
    raise ValidationError("Frame range %s-%s is outside a %s-frame trajectory" % (start, stop, len(trajectory)))
  if start == stop:
    raise EmptyCloudError("Frame range %s-%s is empty" % (start, stop))
  return start, stop

def frameColours(frames, channelMode, threshold):
  """ Mean RGB over the live cells of each frame (every cell in RGB_PLAIN), clamped to [0, 1]. """
  alive = rawAlive(frames, channelMode, threshold)
  counts = alive.sum(axis=(1, 2))
  sums = np.einsum('thw,thwc->tc', alive.astype(np.float64), frames[..., :3].astype(np.float64))
  colours = sums / np.maximum(counts, 1)[:, None]
  return np.clip(colours, 0.0, 1.0)

def extractMacroscopic(trajectory):
  """ >>> from nca.trajectory import Trajectory
      >>> frames = np.zeros((2, 3, 3, 4)); frames[:, :, :, 1] = 1.0
      >>> c = extractMacroscopic(Trajectory(frames, 'RGB_PLAIN'))
      >>> c.size, c.dim, [float(x) for x in c.colours[0]]
      (2, 36, [0.0, 1.0, 0.0])
  """
  frames = trajectory.frames
  points = frames.reshape(len(frames), -1)
  colours = frameColours(frames, trajectory.channelMode, trajectory.aliveThreshold)
  return PointCloud(points, colours, framesProvenance(np.arange(len(frames))))

def extractMicroscopic(trajectory, excludeDead=True, maxPoints=None, seed=0, frames=None):
  """ One point per cell of each frame in range. Dead cells (raw alpha at or below the threshold)
      are dropped when excludeDead; a uniform random subset is kept when there are more than maxPoints.
      >>> from nca.trajectory import Trajectory
      >>> t = Trajectory(np.zeros((2, 3, 3, 5)), 'RGBA_ALIVE')
      >>> extractMicroscopic(t, excludeDead=False, maxPoints=10).size
      10
      >>> extractMicroscopic(t)
      Traceback (most recent call last):
      ...
      nca.errors.EmptyCloudError: Every cell is dead in frames 0-2
  """
  start, stop = frameRange(trajectory, frames)
  values = trajectory.frames[start:stop]
  if excludeDead:
    keep = np.flatnonzero(rawAlive(values, trajectory.channelMode, trajectory.aliveThreshold).ravel())
    if len(keep) == 0:
      raise EmptyCloudError("Every cell is dead in frames %s-%s" % (start, stop))
  else:
    keep = np.arange(values.shape[0] * values.shape[1] * values.shape[2])
  if maxPoints is not None and len(keep) > maxPoints:
    chosen = rng.generator(seed, rng.SAMPLING).choice(len(keep), int(maxPoints), replace=False)
    keep = keep[np.sort(chosen)]
  logging.debug("Microscopic extraction keeps %s cells of frames %s-%s", len(keep), start, stop)
  return cellCloud(values, keep, start)

def cellCloud(values, flat, frameOffset):
  count, height, width, channels = values.shape
  t, rows, cols = np.unravel_index(flat, (count, height, width))
  points = values.reshape(-1, channels)[flat]
  return PointCloud(points, np.clip(points[:, :3], 0.0, 1.0), cellsProvenance(t + frameOffset, rows, cols))

def windowSubsample(trajectory, window, frames=None):
  """ Every cell of the half-open window (row0, col0, row1, col1) in each frame of the range.
      >>> from nca.trajectory import Trajectory
      >>> t = Trajectory(np.zeros((130, 30, 30, 3)), 'RGB_PLAIN')
      >>> windowSubsample(t, (5, 5, 25, 25), (100, 120)).size
      8000
  """
  start, stop = frameRange(trajectory, frames)
  row0, col0, row1, col1 = checkRectangle(window, trajectory.height, trajectory.width)
  if row0 == row1 or col0 == col1:
    raise EmptyCloudError("Window %s is empty" % (tuple(window),))
  values = trajectory.frames[start:stop]
  t, rows, cols = np.meshgrid(np.arange(stop - start), np.arange(row0, row1), np.arange(col0, col1), indexing='ij')
  flat = np.ravel_multi_index((t.ravel(), rows.ravel(), cols.ravel()), values.shape[:3])
  return cellCloud(values, flat, start)

def coverage(budget, size):
  """ The fraction of a cloud that a point budget covers.
      >>> coverage(1000, 20 * 20 * 20), round(100 * coverage(1000, 192 * 192 * 20), 3)
      (0.125, 0.136)
  """
  if size <= 0:
    raise ValidationError("Cloud size must be positive")
  return min(1.0, budget / float(size))
