""" Forward simulation: perception, the per-cell update, alive masking and rollouts.

    The tensor functions work on torch batches shaped B x C x H x W and are shared with
    the trainer, which differentiates through them. The GridState functions wrap them
    for single snapshots.
"""

import logging

import numpy as np
import torch
import torch.nn.functional as F

from . import rng
from .errors import ContractError
from .events import PERTURB, EventScript, signalDisc
from .grid import ALPHA, ChannelMode, GridState, seedState
from .model import modelHash
from .trajectory import Trajectory

def tensors(model, requiresGrad=False):
  """ The model's arrays as torch tensors; kernels only take gradients when they are trained. """
  result = {}
  for name in ('kernels', 'w1', 'b1', 'w2'):
    grad = requiresGrad and (name != 'kernels' or model.trainKernels)
    result[name] = torch.tensor(np.array(getattr(model, name)), requires_grad=grad)
  return result

def toTensor(values, dtype):
  """ N x H x W x C numpy values to an N x C x H x W tensor. """
  return torch.from_numpy(np.ascontiguousarray(np.moveaxis(np.asarray(values, dtype=dtype), -1, -3)))

def fromTensor(x):
  return np.moveaxis(x.detach().cpu().numpy(), -3, -1)

def pad(x, padding):
  if padding == 'circular':
    return F.pad(x, (1, 1, 1, 1), mode='circular')
  return F.pad(x, (1, 1, 1, 1))

def perceiveTensor(x, kernels, padding='circular'):
  """ Cross-correlate every channel with each kernel; output channel k*C + c. """
  channels = x.shape[1]
  padded = pad(x, padding)
  return torch.cat([F.conv2d(padded, k.reshape(1, 1, 3, 3).repeat(channels, 1, 1, 1), groups=channels)
    for k in kernels], dim=1)

def aliveTensor(x, threshold, padding='circular'):
  pooled = F.max_pool2d(pad(x[:, ALPHA:ALPHA + 1], padding), 3, stride=1)
  return pooled > threshold

def stepTensor(x, params, model, fire=None):
  """ One update of a batch. fire is a boolean B x 1 x H x W mask, or None when every cell fires. """
  p = perceiveTensor(x, params['kernels'], model.padding)
  hidden = torch.relu(torch.einsum('bphw,pn->bnhw', p, params['w1']) + params['b1'][None, :, None, None])
  ds = torch.einsum('bnhw,nc->bchw', hidden, params['w2'])
  new = x + ds if fire is None else torch.where(fire, x + ds, x)
  if model.channelMode == ChannelMode.RGBA_ALIVE:
    alive = aliveTensor(x, model.aliveThreshold, model.padding) & aliveTensor(new, model.aliveThreshold, model.padding)
    new = torch.where(alive, new, torch.zeros_like(new))
  return new

def fireTensor(seed, stream, shape, fireRate):
  """ The counter-based fire mask for a B x H x W batch, or None if every cell fires. """
  if fireRate >= 1.0:
    return None
  return torch.from_numpy(rng.fireMask(seed, stream, shape, fireRate))[:, None]

def applyEventTensor(x, event, sample=None):
  """ Write one resolved event into the batch (every sample, or just one) in place. """
  rows = slice(None) if sample is None else slice(sample, sample + 1)
  if event.kind == PERTURB:
    row0, col0, row1, col1 = event['rectangle']
    x[rows, :, row0:row1, col0:col1] = event['fill']
  else:
    disc = torch.from_numpy(signalDisc(x.shape[2], x.shape[3], event['centre'], event['radius']))
    channel = x[rows, event['channel']]
    channel[:, disc] = event['value']

def checkChannels(grid, model):
  if grid.channels != model.channels:
    raise ContractError("Grid has %s channels; model expects %s" % (grid.channels, model.channels))

def perceive(grid, model):
  """ H x W x (kernels * channels) perception of a grid.
      >>> from .model import modelInit
      >>> m = modelInit(5, 4)
      >>> g = GridState(np.full((4, 4, 5), 0.5))
      >>> p = perceive(g, m)
      >>> p.shape, bool(np.allclose(p[:, :, :5], 0.5)), bool(np.allclose(p[:, :, 5:], 0.0))
      ((4, 4, 15), True, True)
      >>> perceive(GridState(np.zeros((4, 4, 6))), m)
      Traceback (most recent call last):
      ...
      nca.errors.ContractError: Grid has 6 channels; model expects 5
  """
  checkChannels(grid, model)
  with torch.no_grad():
    x = toTensor(grid.values[None], model.dtype)
    return fromTensor(perceiveTensor(x, tensors(model)['kernels'], model.padding))[0]

def updateStep(grid, model, seed, step=0):
  """ One stochastic update of a grid. The fire mask reads the counter stream `step` under `seed`.
      >>> from .model import modelInit
      >>> g = seedState(8, 8, 6)
      >>> m = modelInit(6, 8, seed=1, w2Scale=0.1)
      >>> bool(np.array_equal(updateStep(g, m.replace(fireRate=0.0), 3).values, g.values))
      True
      >>> bool(np.array_equal(updateStep(g, m, 3).values, updateStep(g, m, 3).values))
      True
  """
  checkChannels(grid, model)
  with torch.no_grad():
    x = toTensor(grid.values[None], model.dtype)
    fire = fireTensor(seed, step, (1, grid.height, grid.width), model.fireRate)
    out = stepTensor(x, tensors(model), model, fire)
  return GridState(fromTensor(out)[0], grid.channelMode, dtype=model.dtype)

def rollout(model, initial, steps, events=None, seed=0, recordEvery=1):
  """ Run steps updates from initial, applying each event before the update at its timestep.
      Records state 0 and every recordEvery-th state after it.
      >>> from .model import modelInit
      >>> m = modelInit(6, 8, seed=1, w2Scale=0.1)
      >>> t = rollout(m, seedState(8, 8, 6), 10, recordEvery=3)
      >>> len(t), t.recordEvery
      (4, 3)
      >>> len(rollout(m, seedState(8, 8, 6), 0))
      1
  """
  checkChannels(initial, model)
  if steps < 0:
    raise ContractError("steps must be nonnegative, got %s" % steps)
  if recordEvery < 1:
    raise ContractError("record_every must be positive, got %s" % recordEvery)
  if events is None:
    events = EventScript()
  events.validate(initial.height, initial.width, initial.channels)
  resolved = EventScript([e for e in events.resolve(seed, initial.height, initial.width) if e.timestep < steps])
  byStep = {}
  for e in resolved:
    byStep.setdefault(e.timestep, []).append(e)

  params = tensors(model)
  frames = [np.array(initial.values, dtype=np.float32)]
  shape = (1, initial.height, initial.width)
  with torch.no_grad():
    x = toTensor(initial.values[None], model.dtype)
    for t in range(steps):
      for e in byStep.get(t, ()):
        applyEventTensor(x, e)
      x = stepTensor(x, params, model, fireTensor(seed, t, shape, model.fireRate))
      if (t + 1) % recordEvery == 0:
        frames.append(fromTensor(x)[0].astype(np.float32))
      if t % 1000 == 999:
        logging.info("Rollout step %s of %s", t + 1, steps)
  logging.debug("Rolled out %s steps, recorded %s frames, applied %s events", steps, len(frames), len(resolved))
  return Trajectory(np.stack(frames), model.channelMode, recordEvery=recordEvery, seed=seed,
    modelHash=modelHash(model), events=resolved, aliveThreshold=model.aliveThreshold, steps=steps)
