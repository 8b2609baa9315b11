""" Counter-based random draws.

    Every draw is keyed on (seed, stream) through numpy's Philox generator, so the
    value for a given step and cell depends only on those numbers and never on how
    many draws happened before it. Streams used by this package:

      step                         fire mask for rollout step `step`
      TRAIN | epoch << 20 | step   fire mask inside training rollouts
      JITTER | eventIndex          signal jitter
"""

import numpy as np

MASK64 = (1 << 64) - 1
TRAIN = 1 << 63
JITTER = 1 << 62
SAMPLING = 1 << 61

def generator(seed, stream=0):
  """ A numpy Generator over the Philox stream keyed on (seed, stream).
      >>> a = generator(7, 3).random(4)
      >>> b = generator(7, 3).random(4)
      >>> bool((a == b).all()), bool((a == generator(7, 4).random(4)).all())
      (True, False)
  """
  key = np.array([int(seed) & MASK64, int(stream) & MASK64], dtype=np.uint64)
  return np.random.Generator(np.random.Philox(key=key))

def uniform(seed, stream, shape):
  return generator(seed, stream).random(shape)

def fireMask(seed, stream, shape, fireRate):
  """ Bernoulli(fireRate) draws of the given shape; cell (row, col) always reads the same counter.
      >>> m = fireMask(1, 0, (4, 4), 0.5)
      >>> m.shape, m.dtype.name
      ((4, 4), 'bool')
      >>> bool(fireMask(1, 0, (4, 4), 0.0).any()), bool(fireMask(1, 0, (4, 4), 1.0).all())
      (False, True)
  """
  return uniform(seed, stream, shape) < fireRate

def trainStream(epoch, step):
  return TRAIN | (int(epoch) << 20) | int(step)

def jitter(seed, eventIndex, radius):
  """ Uniform integer offset in [-radius, radius]^2 for one event. """
  if radius <= 0:
    return 0, 0
  dr, dc = generator(seed, JITTER | int(eventIndex)).integers(-radius, radius + 1, size=2)
  return int(dr), int(dc)
