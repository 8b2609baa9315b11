""" Recorded rollouts and their .ncat files.

    Layout: magic 'NCAT', u32 version, length-prefixed JSON metadata, f32 frames
    (frame-major, then row, column, channel), length-prefixed JSON event log.
"""

import io
import logging

import numpy as np

from . import binfile
from .errors import ContractError, FormatError
from .events import EventScript
from .grid import ChannelMode, GridState

class Trajectory():
  """ An ordered stack of frames sharing dims, plus the events applied while recording.
      >>> t = Trajectory(np.zeros((3, 4, 5, 6)), 'RGBA_ALIVE')
      >>> len(t), t.height, t.width, t.channels
      (3, 4, 5, 6)
      >>> t.frame(2)
      GridState(4x5x6, RGBA_ALIVE)
      >>> Trajectory(np.zeros((0, 4, 5, 6)), 'RGBA_ALIVE')
      Traceback (most recent call last):
      ...
      nca.errors.ContractError: A trajectory needs at least one frame
  """
  def __init__(self, frames, channelMode, recordEvery=1, seed=0, modelHash='', events=None,
      aliveThreshold=0.1, steps=None):
    frames = np.array(frames, dtype=np.float32)
    if frames.ndim != 4:
      raise ContractError("Frames must be T x H x W x C, got shape %s" % (frames.shape,))
    if len(frames) < 1:
      raise ContractError("A trajectory needs at least one frame")
    if frames.shape[3] < 3:
      raise ContractError("A grid needs at least 3 channels, got %s" % frames.shape[3])
    frames.setflags(write=False)
    self.frames = frames
    self.channelMode = ChannelMode.parse(channelMode)
    self.recordEvery = int(recordEvery)
    self.seed = int(seed)
    self.modelHash = modelHash
    self.events = events if events is not None else EventScript()
    self.aliveThreshold = float(aliveThreshold)
    self.steps = (len(frames) - 1) * self.recordEvery if steps is None else int(steps)

  @property
  def height(self):
    return self.frames.shape[1]

  @property
  def width(self):
    return self.frames.shape[2]

  @property
  def channels(self):
    return self.frames.shape[3]

  def __len__(self):
    return len(self.frames)

  def frame(self, index):
    return GridState(self.frames[index], self.channelMode)

  def __iter__(self):
    return (self.frame(i) for i in range(len(self)))

  def timestep(self, index):
    """ The rollout step at which frame index was recorded. """
    return index * self.recordEvery

  def metadata(self):
    return {
      'frames': len(self), 'height': self.height, 'width': self.width, 'channels': self.channels,
      'channel_mode': self.channelMode.name, 'record_every': self.recordEvery, 'rng_seed': self.seed,
      'model_hash': self.modelHash, 'alive_threshold': self.aliveThreshold, 'steps': self.steps,
    }

  def __repr__(self):
    return "Trajectory(%s frames of %sx%sx%s, every %s steps, %s events)" % (
      len(self), self.height, self.width, self.channels, self.recordEvery, len(self.events))

def frameBytes(frames, height, width, channels):
  """ Size of the frame payload.
      >>> frameBytes(250, 192, 192, 12)
      442368000
  """
  return frames * height * width * channels * 4

def trajectoryBytes(trajectory):
  out = io.BytesIO()
  out.write(binfile.header(b'NCAT'))
  out.write(binfile.packJson(trajectory.metadata()))
  out.write(binfile.packArray(trajectory.frames, 'f4'))
  out.write(binfile.packJson(trajectory.events.toJson()))
  return out.getvalue()

def saveTrajectory(trajectory, path):
  with open(path, 'wb') as f:
    f.write(trajectoryBytes(trajectory))
  logging.info("Saved %s to %s", trajectory, path)

def parseTrajectory(data):
  """ Inverse of trajectoryBytes.
      >>> t = Trajectory(np.arange(24.0).reshape(1, 2, 3, 4), 'RGB_PLAIN', modelHash='abc')
      >>> back = parseTrajectory(trajectoryBytes(t))
      >>> bool(np.array_equal(back.frames, t.frames)), back.channelMode.name, back.modelHash
      (True, 'RGB_PLAIN', 'abc')
  """
  reader = binfile.Reader(data)
  binfile.readHeader(reader, b'NCAT')
  try:
    meta = reader.json()
  except (ValueError, UnicodeDecodeError) as e:
    raise FormatError("Unreadable trajectory metadata: %s" % e)
  frames = reader.array('f4', (meta['frames'], meta['height'], meta['width'], meta['channels']))
  events = EventScript.parse(reader.json())
  if not reader.atEnd():
    raise FormatError("Trajectory has %s unexpected trailing bytes" % (len(data) - reader.pos))
  return Trajectory(frames, meta['channel_mode'], recordEvery=meta['record_every'], seed=meta['rng_seed'],
    modelHash=meta['model_hash'], events=events, aliveThreshold=meta['alive_threshold'], steps=meta['steps'])

def loadTrajectory(path):
  with open(path, 'rb') as f:
    return parseTrajectory(f.read())
