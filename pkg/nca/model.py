""" NCA parameters: fixed 3x3 perception kernels plus the two-layer per-cell update network.

    The perception vector of a cell is kernel-major: slot k*C..(k+1)*C holds the
    response of every channel to kernel k. The update is
      ds = relu(perception @ w1 + b1) @ w2
"""

import hashlib
import io
import logging
import struct

import numpy as np

from . import binfile
from .errors import ContractError
from .grid import ChannelMode

IDENTITY = np.outer([0, 1, 0], [0, 1, 0]).astype(np.float32)
SOBEL_X = (np.outer([1, 2, 1], [-1, 0, 1]) / 8.0).astype(np.float32)
SOBEL_Y = SOBEL_X.T.copy()

PADDINGS = ('circular', 'zero')

def defaultKernels():
  """ Identity, Sobel-x and Sobel-y.
      >>> defaultKernels().shape
      (3, 3, 3)
      >>> [float(x) for x in defaultKernels()[1][1]]
      [-0.25, 0.0, 0.25]
  """
  return np.stack([IDENTITY, SOBEL_X, SOBEL_Y])

def frozen(array, dtype):
  array = np.array(array, dtype=dtype)
  array.setflags(write=False)
  return array

class NcaModel():
  """ Immutable NCA parameters. Use replace() to derive a changed copy.
      >>> m = modelInit(6, hiddenWidth=8, seed=1)
      >>> m.w1.shape, m.b1.shape, m.w2.shape, m.perceptionSize
      ((18, 8), (8,), (8, 6), 18)
      >>> NcaModel(defaultKernels(), np.zeros((10, 8)), np.zeros(8), np.zeros((8, 6)))
      Traceback (most recent call last):
      ...
      nca.errors.ContractError: w1 has 10 rows; perception gives 3 kernels x 6 channels = 18
  """
  def __init__(self, kernels, w1, b1, w2, fireRate=0.5, aliveThreshold=0.1,
      channelMode=ChannelMode.RGBA_ALIVE, trainKernels=False, padding='circular', dtype=np.float32):
    self.kernels = frozen(kernels, dtype)
    self.w1 = frozen(w1, dtype)
    self.b1 = frozen(b1, dtype)
    self.w2 = frozen(w2, dtype)
    self.fireRate = float(fireRate)
    self.aliveThreshold = float(aliveThreshold)
    self.channelMode = ChannelMode.parse(channelMode)
    self.trainKernels = bool(trainKernels)
    self.padding = padding
    self.check()

  def check(self):
    channels = self.w2.shape[1] if self.w2.ndim == 2 else -1
    if self.kernels.ndim != 3 or self.kernels.shape[1:] != (3, 3):
      raise ContractError("Perception kernels must be K x 3 x 3, got %s" % (self.kernels.shape,))
    if channels < 3:
      raise ContractError("w2 must be hidden x channels with at least 3 channels, got %s" % (self.w2.shape,))
    if self.w1.shape[0] != self.perceptionSize:
      raise ContractError("w1 has %s rows; perception gives %s kernels x %s channels = %s"
        % (self.w1.shape[0], len(self.kernels), channels, self.perceptionSize))
    if self.w1.shape[1] != self.hiddenWidth or self.b1.shape != (self.hiddenWidth,):
      raise ContractError("Hidden widths disagree: w1 %s, b1 %s, w2 %s"
        % (self.w1.shape, self.b1.shape, self.w2.shape))
    if not 0.0 <= self.fireRate <= 1.0:
      raise ContractError("fire rate must be in [0, 1], got %s" % self.fireRate)
    if self.padding not in PADDINGS:
      raise ContractError("padding must be one of %s, got %s" % (PADDINGS, self.padding))

  @property
  def channels(self):
    return self.w2.shape[1]

  @property
  def hiddenWidth(self):
    return self.w2.shape[0]

  @property
  def perceptionSize(self):
    return len(self.kernels) * self.w2.shape[1]

  @property
  def dtype(self):
    return self.w1.dtype

  def parameters(self):
    """ The trainable tensors by name, kernels only when they are trained. """
    params = {'w1': self.w1, 'b1': self.b1, 'w2': self.w2}
    if self.trainKernels:
      params['kernels'] = self.kernels
    return params

  def replace(self, **changes):
    """ A copy with some fields changed.
        >>> m = modelInit(4, hiddenWidth=4)
        >>> m.replace(fireRate=1.0).fireRate, m.fireRate
        (1.0, 0.5)
    """
    fields = {'kernels': self.kernels, 'w1': self.w1, 'b1': self.b1, 'w2': self.w2,
      'fireRate': self.fireRate, 'aliveThreshold': self.aliveThreshold,
      'channelMode': self.channelMode, 'trainKernels': self.trainKernels,
      'padding': self.padding, 'dtype': self.dtype}
    fields.update(changes)
    return NcaModel(**fields)

  def astype(self, dtype):
    """ The same model in another float width (float64 for gradient checks). """
    return self.replace(dtype=dtype)

  def __repr__(self):
    return "NcaModel(%s channels, %s kernels, hidden %s, fire %s, %s)" % (
      self.channels, len(self.kernels), self.hiddenWidth, self.fireRate, self.channelMode.name)

def modelInit(channels, hiddenWidth=128, channelMode=ChannelMode.RGBA_ALIVE, seed=0,
    w2Scale=0.0, fireRate=0.5, aliveThreshold=0.1, padding='circular', kernels=None):
  """ A fresh model: Glorot-uniform w1, zero b1, and w2 zero unless w2Scale is given,
      so that an untrained model leaves the grid unchanged.
      >>> bool(modelInit(5, 8, seed=3).w2.any()), bool(modelInit(5, 8, seed=3, w2Scale=0.1).w2.any())
      (False, True)
      >>> bool(np.array_equal(modelInit(5, 8, seed=3).w1, modelInit(5, 8, seed=3).w1))
      True
  """
  kernels = defaultKernels() if kernels is None else np.asarray(kernels)
  inputs = len(kernels) * channels
  rng = np.random.default_rng(seed)
  limit = np.sqrt(6.0 / (inputs + hiddenWidth))
  w1 = rng.uniform(-limit, limit, size=(inputs, hiddenWidth))
  w2 = rng.normal(0.0, w2Scale, size=(hiddenWidth, channels)) if w2Scale else np.zeros((hiddenWidth, channels))
  return NcaModel(kernels, w1, np.zeros(hiddenWidth), w2, fireRate=fireRate,
    aliveThreshold=aliveThreshold, channelMode=channelMode, padding=padding)

def modelBytes(model):
  """ The .ncam serialisation:
        magic 'NCAM', u32 version, u8 channel mode, u8 padding, u8 train-kernels flag,
        u32 channels, u32 kernel count, u32 hidden width,
        f32 kernels, w1, b1, w2, then f32 fire rate and alive threshold.
  """
  out = io.BytesIO()
  out.write(binfile.header(b'NCAM'))
  out.write(struct.pack('<BBB', int(model.channelMode), PADDINGS.index(model.padding), int(model.trainKernels)))
  out.write(struct.pack('<III', model.channels, len(model.kernels), model.hiddenWidth))
  for array in (model.kernels, model.w1, model.b1, model.w2):
    out.write(binfile.packArray(array, 'f4'))
  out.write(struct.pack('<ff', model.fireRate, model.aliveThreshold))
  return out.getvalue()

def saveModel(model, path):
  with open(path, 'wb') as f:
    f.write(modelBytes(model))
  logging.info("Saved %s to %s", model, path)

def parseModel(data):
  """ Inverse of modelBytes. The fire rate and threshold come back at f32 precision.
      >>> m = modelInit(6, 8, seed=2, w2Scale=0.1)
      >>> back = parseModel(modelBytes(m))
      >>> bool(np.array_equal(back.w1, m.w1)), back.channels, back.padding
      (True, 6, 'circular')
      >>> parseModel(modelBytes(m)[:-3])
      Traceback (most recent call last):
      ...
      nca.errors.TruncatedFileError: File ends after 936 bytes; needed 8 more at offset 931
  """
  reader = binfile.Reader(data)
  binfile.readHeader(reader, b'NCAM')
  mode, padding, trainKernels = reader.unpack('<BBB')
  channels, count, hidden = reader.unpack('<III')
  kernels = reader.array('f4', (count, 3, 3))
  w1 = reader.array('f4', (count * channels, hidden))
  b1 = reader.array('f4', (hidden,))
  w2 = reader.array('f4', (hidden, channels))
  fireRate, aliveThreshold = reader.unpack('<ff')
  return NcaModel(kernels, w1, b1, w2, fireRate=fireRate, aliveThreshold=aliveThreshold,
    channelMode=mode, trainKernels=bool(trainKernels), padding=PADDINGS[padding])

def loadModel(path):
  with open(path, 'rb') as f:
    return parseModel(f.read())

def modelHash(model):
  """ sha256 of the serialised model; recorded in trajectory metadata. """
  return hashlib.sha256(modelBytes(model)).hexdigest()
