""" Grid snapshots of a neural cellular automaton and the edits applied to them
    from outside the update rule (seeding, perturbation).
"""

import enum
import logging

import numpy as np
import scipy.ndimage

from .errors import ContractError, ValidationError

ALPHA = 3

class ChannelMode(enum.IntEnum):
  """ How the leading channels are interpreted.
      RGBA_ALIVE: channels 0-2 are RGB, channel 3 is alpha and decides which cells are alive.
      RGB_PLAIN: channels 0-2 are RGB and every cell is alive.
  """
  RGBA_ALIVE = 0
  RGB_PLAIN = 1

  @classmethod
  def parse(cls, value):
    """ Accepts a ChannelMode, its name (any case) or its integer code.
        >>> ChannelMode.parse('rgb_plain')
        <ChannelMode.RGB_PLAIN: 1>
    """
    if isinstance(value, cls):
      return value
    if isinstance(value, str):
      return cls[value.upper()]
    return cls(int(value))

  def visibleChannels(self):
    return 4 if self == ChannelMode.RGBA_ALIVE else 3

class GridState():
  """ One H x W x C snapshot. The value array is read-only; edits build new states.
      >>> g = GridState(np.zeros((3, 4, 5)))
      >>> g.height, g.width, g.channels, g.values.dtype.name
      (3, 4, 5, 'float32')
      >>> GridState(np.zeros((3, 3, 2)))
      Traceback (most recent call last):
      ...
      nca.errors.ContractError: A grid needs at least 3 channels, got 2
  """
  def __init__(self, values, channelMode=ChannelMode.RGBA_ALIVE, dtype=np.float32):
    values = np.array(values, dtype=dtype)
    if values.ndim != 3:
      raise ContractError("Grid values must be H x W x C, got shape %s" % (values.shape,))
    if values.shape[2] < 3:
      raise ContractError("A grid needs at least 3 channels, got %s" % values.shape[2])
    if not np.all(np.isfinite(values)):
      raise ContractError("Grid values must be finite")
    values.setflags(write=False)
    self.values = values
    self.channelMode = ChannelMode.parse(channelMode)

  @property
  def height(self):
    return self.values.shape[0]

  @property
  def width(self):
    return self.values.shape[1]

  @property
  def channels(self):
    return self.values.shape[2]

  def visible(self):
    """ The channels compared against a target image (RGBA or RGB). """
    return self.values[:, :, :self.channelMode.visibleChannels()]

  def withValues(self, values):
    return GridState(values, self.channelMode, dtype=self.values.dtype)

  def __repr__(self):
    return "GridState(%sx%sx%s, %s)" % (self.height, self.width, self.channels, self.channelMode.name)

def aliveMask(values, channelMode, threshold=0.1, padding='circular'):
  """ Cells whose 3x3 max-pooled alpha exceeds threshold (every cell in RGB_PLAIN mode).
      >>> g = seedState(5, 5, 6)
      >>> int(aliveMask(g.values, g.channelMode).sum())
      9
      >>> int(aliveMask(g.values, ChannelMode.RGB_PLAIN).sum())
      25
  """
  values = np.asarray(values)
  if ChannelMode.parse(channelMode) == ChannelMode.RGB_PLAIN:
    return np.ones(values.shape[:2], dtype=bool)
  mode = 'wrap' if padding == 'circular' else 'constant'
  pooled = scipy.ndimage.maximum_filter(values[:, :, ALPHA], size=3, mode=mode, cval=0.0)
  return pooled > threshold

def rawAlive(values, channelMode, threshold=0.1):
  """ Per-cell liveness without pooling: raw alpha above threshold. """
  values = np.asarray(values)
  if ChannelMode.parse(channelMode) == ChannelMode.RGB_PLAIN:
    return np.ones(values.shape[:-1], dtype=bool)
  return values[..., ALPHA] > threshold

def seedState(height, width, channels, channelMode=ChannelMode.RGBA_ALIVE):
  """ An empty grid with a single seed cell at the centre: every channel after RGB is 1.
      >>> g = seedState(60, 60, 17)
      >>> [tuple(int(i) for i in ix) for ix in np.argwhere(g.values.any(axis=2))]
      [(30, 30)]
      >>> float(g.values[:, :, :3].sum()), float(g.values[30, 30, 3:].sum())
      (0.0, 14.0)
  """
  if height < 3 or width < 3:
    raise ValidationError("A seed grid must be at least 3x3, got %sx%s" % (height, width))
  values = np.zeros((height, width, channels), dtype=np.float32)
  values[height // 2, width // 2, 3:] = 1.0
  return GridState(values, channelMode)

def checkRectangle(rectangle, height, width):
  """ Validates a half-open rectangle (row0, col0, row1, col1) against the grid bounds.
      >>> checkRectangle((0, 0, 61, 10), 60, 60)
      Traceback (most recent call last):
      ...
      nca.errors.ValidationError: Rectangle (0, 0, 61, 10) is outside a 60x60 grid
  """
  row0, col0, row1, col1 = (int(x) for x in rectangle)
  if not (0 <= row0 <= row1 <= height and 0 <= col0 <= col1 <= width):
    raise ValidationError("Rectangle %s is outside a %sx%s grid" % (tuple(rectangle), height, width))
  return row0, col0, row1, col1

def applyPerturbation(grid, rectangle, fill=0.0):
  """ Set every channel of the cells in the half-open rectangle to fill.
      >>> g = GridState(np.ones((60, 60, 4)))
      >>> p = applyPerturbation(g, (20, 20, 40, 40))
      >>> int((p.values != g.values).any(axis=2).sum())
      400
      >>> bool(np.array_equal(applyPerturbation(g, (5, 5, 5, 9)).values, g.values))
      True
      >>> float(applyPerturbation(g, (0, 0, 60, 60)).values.max())
      0.0
  """
  row0, col0, row1, col1 = checkRectangle(rectangle, grid.height, grid.width)
  values = grid.values.copy()
  values[row0:row1, col0:col1, :] = fill
  logging.debug("Perturbed rows %s-%s, cols %s-%s to %s", row0, row1, col0, col1, fill)
  return grid.withValues(values)
