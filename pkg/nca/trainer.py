""" Backpropagation-through-time training against target images, with a sample pool.

    Each epoch draws a batch from the pool, replaces its worst sample with the seed,
    optionally damages the best ones, rolls the batch out for a random number of steps
    and takes one optimizer step on the RMSE between the visible channels and the target.
    With several targets, pool entries carry a phase that a mid-rollout signal toggles.
"""

import logging
import time

import numpy as np
import pandas as pd
import torch
from PIL import Image

from . import rng
from .engine import fireTensor, fromTensor, stepTensor, tensors, toTensor
from .errors import ContractError, TrainingDiverged, ValidationError
from .events import signalDisc
from .grid import ChannelMode, seedState

class TrainConfig():
  """ Training options. Keys in YAML use snake_case: steps_min, batch_size, ...
      >>> TrainConfig(stepsMin=96, stepsMax=64)
      Traceback (most recent call last):
      ...
      nca.errors.ValidationError: steps_min 96 exceeds steps_max 64
      >>> TrainConfig.fromDict({'epochs': 3, 'batch_size': 2, 'pool_size': 4}).batchSize
      2
  """
  FIELDS = {
    'epochs': 'epochs', 'steps_min': 'stepsMin', 'steps_max': 'stepsMax', 'batch_size': 'batchSize',
    'pool_size': 'poolSize', 'learning_rate': 'learningRate', 'optimizer': 'optimizer', 'betas': 'betas',
    'eps': 'eps', 'grad_norm_eps': 'gradNormEps', 'pool_refresh': 'poolRefresh', 'lr_decay': 'lrDecay',
    'seed': 'seed', 'checkpoint_every': 'checkpointEvery', 'signal_prob': 'signalProb',
    'signal_channel': 'signalChannel', 'signal_value': 'signalValue', 'signal_radius': 'signalRadius',
    'damage_count': 'damageCount', 'damage_size': 'damageSize',
  }

  def __init__(self, epochs=1000, stepsMin=64, stepsMax=96, batchSize=8, poolSize=1024, learningRate=2e-3,
      optimizer='adam', betas=(0.9, 0.999), eps=1e-8, gradNormEps=1e-8, poolRefresh=True, lrDecay=None,
      seed=0, checkpointEvery=0, signalProb=0.0, signalChannel=None, signalValue=1.0, signalRadius=3,
      damageCount=0, damageSize=None):
    self.epochs = int(epochs)
    self.stepsMin = int(stepsMin)
    self.stepsMax = int(stepsMax)
    self.batchSize = int(batchSize)
    self.poolSize = int(poolSize)
    self.learningRate = float(learningRate)
    self.optimizer = optimizer.lower()
    self.betas = tuple(betas)
    self.eps = float(eps)
    self.gradNormEps = float(gradNormEps)
    self.poolRefresh = bool(poolRefresh)
    self.lrDecay = lrDecay
    self.seed = int(seed)
    self.checkpointEvery = int(checkpointEvery)
    self.signalProb = float(signalProb)
    self.signalChannel = signalChannel
    self.signalValue = float(signalValue)
    self.signalRadius = int(signalRadius)
    self.damageCount = int(damageCount)
    self.damageSize = damageSize
    self.check()

  def check(self):
    if self.stepsMin > self.stepsMax:
      raise ValidationError("steps_min %s exceeds steps_max %s" % (self.stepsMin, self.stepsMax))
    if self.stepsMin < 1:
      raise ValidationError("steps_min must be positive, got %s" % self.stepsMin)
    if self.poolSize < self.batchSize:
      raise ValidationError("pool_size %s is smaller than batch_size %s" % (self.poolSize, self.batchSize))
    if self.optimizer not in ('adam', 'sgd'):
      raise ValidationError("optimizer must be adam or sgd, got %s" % self.optimizer)
    if self.damageCount >= self.batchSize and self.damageCount:
      raise ValidationError("damage_count %s leaves no undamaged sample in a batch of %s" % (self.damageCount, self.batchSize))
    if self.signalProb and self.signalChannel is None:
      raise ValidationError("signal_prob needs a signal_channel")

  @classmethod
  def fromDict(cls, options):
    unknown = set(options) - set(cls.FIELDS)
    if unknown:
      raise ValidationError("Unknown training options: %s" % ', '.join(sorted(unknown)))
    return cls(**{cls.FIELDS[k]: v for k, v in options.items()})

class LossLog():
  """ Per-epoch loss and wall time. """
  def __init__(self):
    self.epochs = []
    self.losses = []
    self.seconds = []

  def append(self, epoch, loss, seconds):
    self.epochs.append(epoch)
    self.losses.append(loss)
    self.seconds.append(seconds)

  def __len__(self):
    return len(self.losses)

  def windowedMean(self, start, stop):
    return float(np.mean(self.losses[start:stop]))

  def frame(self):
    return pd.DataFrame({'epoch': self.epochs, 'loss': self.losses, 'seconds': self.seconds})

  def save(self, path):
    self.frame().to_csv(path, index=False)

def loadTarget(path, channelMode=ChannelMode.RGBA_ALIVE, size=None):
  """ A target image as H x W x 4 premultiplied RGBA (or H x W x 3 RGB) in [0, 1]. """
  channelMode = ChannelMode.parse(channelMode)
  with Image.open(path) as image:
    image = image.convert('RGBA')
    if size is not None:
      image = image.resize((size[1], size[0]), Image.Resampling.BILINEAR)
    values = np.asarray(image, dtype=np.float32) / 255.0
  if channelMode == ChannelMode.RGBA_ALIVE:
    values[:, :, :3] *= values[:, :, 3:]
    return values
  return np.ascontiguousarray(values[:, :, :3])

def checkTarget(target, channelMode):
  target = np.asarray(target)
  visible = ChannelMode.parse(channelMode).visibleChannels()
  if target.ndim != 3 or target.shape[2] != visible:
    raise ContractError("Target must be H x W x %s, got %s" % (visible, target.shape))
  if not np.all(np.isfinite(target)):
    raise ContractError("Target must be finite")
  return target

def lossRmse(grid, target):
  """ Root mean squared error between a grid's visible channels and a target.
      >>> from .grid import GridState
      >>> g = GridState(np.ones((2, 2, 5)), 'RGB_PLAIN')
      >>> lossRmse(g, np.zeros((2, 2, 3))), lossRmse(g, np.ones((2, 2, 3)))
      (1.0, 0.0)
      >>> lossRmse(g, np.zeros((2, 2, 4)))
      Traceback (most recent call last):
      ...
      nca.errors.ContractError: Target must be H x W x 3, got (2, 2, 4)
  """
  target = checkTarget(target, grid.channelMode)
  if target.shape[:2] != grid.values.shape[:2]:
    raise ContractError("Target is %sx%s; grid is %sx%s" % (target.shape[0], target.shape[1], grid.height, grid.width))
  difference = grid.visible().astype(np.float64) - target
  return float(np.sqrt(np.mean(difference * difference)))

def sampleLoss(x, target):
  """ Per-sample RMSE of a B x C x H x W batch against B x c_vis x H x W targets. """
  visible = target.shape[1]
  return torch.sqrt(torch.mean((x[:, :visible] - target) ** 2, dim=(1, 2, 3)))

def makeOptimizer(params, learningRate, optimizer='adam', betas=(0.9, 0.999), eps=1e-8, lrDecay=None, epochs=1):
  """ The optimizer stack shared by every fit in the package.
      lrDecay is the fraction of the learning rate left after the last epoch.
  """
  if optimizer == 'adam':
    opt = torch.optim.Adam(params, lr=learningRate, betas=betas, eps=eps)
  else:
    opt = torch.optim.SGD(params, lr=learningRate)
  scheduler = None
  if lrDecay:
    scheduler = torch.optim.lr_scheduler.ExponentialLR(opt, gamma=float(lrDecay) ** (1.0 / max(1, epochs)))
  return opt, scheduler

def normaliseGradients(params, eps):
  """ Rescale each parameter tensor's gradient to g / (|g| + eps). """
  with torch.no_grad():
    for p in params:
      if p.grad is not None:
        p.grad.div_(p.grad.norm() + eps)

def epochSteps(config, epoch):
  """ The rollout length drawn for an epoch. """
  return int(rng.generator(config.seed, rng.SAMPLING | epoch).integers(config.stepsMin, config.stepsMax + 1))

def signalMask(shape, samples, channel, radius):
  mask = torch.zeros(shape, dtype=torch.bool)
  disc = torch.from_numpy(signalDisc(shape[2], shape[3], (shape[2] // 2, shape[3] // 2), radius))
  for i in samples:
    mask[i, channel] = disc
  return mask

def damage(batch, samples, generator, size):
  height, width = batch.shape[1:3]
  for i in samples:
    row = int(generator.integers(0, height - size + 1))
    col = int(generator.integers(0, width - size + 1))
    batch[i, row:row + size, col:col + size, :] = 0.0

def fromParams(model, params):
  changes = {name: params[name].detach().cpu().numpy() for name in ('w1', 'b1', 'w2')}
  if model.trainKernels:
    changes['kernels'] = params['kernels'].detach().cpu().numpy()
  return model.replace(**changes)

def train(model, targets, config, checkpoint=None):
  """ Train model towards targets (one H x W x c_vis image or a list for the signal-switching regime).
      Returns (model, LossLog). checkpoint(epochsDone, model) is called every config.checkpointEvery epochs.
  """
  if isinstance(targets, np.ndarray) and targets.ndim == 3:
    targets = [targets]
  targets = [checkTarget(t, model.channelMode) for t in targets]
  if len({t.shape for t in targets}) != 1:
    raise ContractError("Targets have different shapes: %s" % [t.shape for t in targets])
  height, width = targets[0].shape[:2]
  dtype = model.dtype
  switching = len(targets) > 1 and config.signalProb > 0
  seed = seedState(height, width, model.channels, model.channelMode).values
  pool = np.repeat(seed[None], config.poolSize, axis=0)
  phases = np.zeros(config.poolSize, dtype=np.int64)
  targetTensor = toTensor(np.stack(targets), dtype)

  params = tensors(model, requiresGrad=True)
  trainable = [p for p in params.values() if p.requires_grad]
  optimizer, scheduler = makeOptimizer(trainable, config.learningRate, config.optimizer, config.betas,
    config.eps, config.lrDecay, config.epochs)
  damageSize = int(config.damageSize or max(1, min(height, width) // 4))
  log = LossLog()
  logging.info("Training %s on %sx%s for %s epochs", model, height, width, config.epochs)

  for epoch in range(config.epochs):
    started = time.perf_counter()
    generator = rng.generator(config.seed, rng.SAMPLING | epoch)
    steps = int(generator.integers(config.stepsMin, config.stepsMax + 1))
    index = np.sort(generator.choice(config.poolSize, config.batchSize, replace=False))
    batch = pool[index].copy()
    phase = phases[index].copy()
    if config.poolRefresh:
      with torch.no_grad():
        losses = sampleLoss(toTensor(batch, dtype), targetTensor[torch.from_numpy(phase)]).numpy()
      order = np.argsort(-losses, kind='stable')
      index, batch, phase = index[order], batch[order], phase[order]
      batch[0] = seed
      phase[0] = 0
      if config.damageCount:
        damage(batch, range(config.batchSize - config.damageCount, config.batchSize), generator, damageSize)

    signalled = np.zeros(config.batchSize, dtype=bool)
    signalStep = np.zeros(config.batchSize, dtype=np.int64)
    if switching:
      signalled = generator.random(config.batchSize) < config.signalProb
      signalStep = generator.integers(0, max(1, steps // 2), size=config.batchSize)

    x = toTensor(batch, dtype)
    for t in range(steps):
      samples = np.flatnonzero(signalled & (signalStep == t))
      if len(samples):
        x = x.masked_fill(signalMask(x.shape, samples, config.signalChannel, config.signalRadius), config.signalValue)
      x = stepTensor(x, params, model, fireTensor(config.seed, rng.trainStream(epoch, t), (config.batchSize, height, width), model.fireRate))
    phase = (phase + signalled) % len(targets)
    loss = sampleLoss(x, targetTensor[torch.from_numpy(phase)]).mean()
    value = loss.item()
    if not np.isfinite(value):
      raise TrainingDiverged(epoch, value)

    optimizer.zero_grad()
    loss.backward()
    normaliseGradients(trainable, config.gradNormEps)
    optimizer.step()
    if scheduler is not None:
      scheduler.step()

    pool[index] = fromTensor(x)
    phases[index] = phase
    log.append(epoch, value, time.perf_counter() - started)
    logging.debug("Epoch %s: %s steps, loss %.6f", epoch, steps, value)
    if config.checkpointEvery and (epoch + 1) % config.checkpointEvery == 0:
      logging.info("Epoch %s loss %.6f", epoch + 1, value)
      if checkpoint is not None:
        checkpoint(epoch + 1, fromParams(model, params))
  return fromParams(model, params), log

def rolloutLoss(params, model, initial, target, steps, seed, epoch=0):
  """ The differentiable loss of a single-sample training rollout. """
  height, width = initial.shape[:2]
  x = toTensor(initial[None], model.dtype)
  for t in range(steps):
    x = stepTensor(x, params, model, fireTensor(seed, rng.trainStream(epoch, t), (1, height, width), model.fireRate))
  return sampleLoss(x, toTensor(np.asarray(target)[None], model.dtype)).mean()

def initialState(model, target, initial):
  if initial is not None:
    return np.asarray(initial)
  target = np.asarray(target)
  return seedState(target.shape[0], target.shape[1], model.channels, model.channelMode).values

def analyticGradient(model, target, config, initial=None):
  """ BPTT gradients by parameter name for the epoch-0 rollout of a batch of one. """
  target = checkTarget(target, model.channelMode)
  params = tensors(model, requiresGrad=True)
  loss = rolloutLoss(params, model, initialState(model, target, initial), target, epochSteps(config, 0), config.seed)
  loss.backward()
  return {name: p.grad.numpy().copy() for name, p in params.items() if p.requires_grad}

def finiteDiffGradient(model, target, config, coordinate, h=1e-5, initial=None):
  """ Central difference of the rollout loss along one parameter coordinate, in 64-bit.
      coordinate is (parameter name, flat index).
  """
  model = model.astype(np.float64)
  target = checkTarget(target, model.channelMode)
  name, flat = coordinate
  start = initialState(model, target, initial)
  steps = epochSteps(config, 0)
  values = []
  for sign in (1.0, -1.0):
    array = np.array(getattr(model, name), dtype=np.float64)
    array.flat[flat] += sign * h
    with torch.no_grad():
      loss = rolloutLoss(tensors(model.replace(**{name: array})), model, start, target, steps, config.seed)
    values.append(float(loss))
  return (values[0] - values[1]) / (2.0 * h)

def relativeError(analytic, numeric):
  """ |a - n| / (max(|a|, |n|) + 1e-8).
      >>> relativeError(1.0, 1.0), relativeError(0.0, 0.0)
      (0.0, 0.0)
  """
  return abs(analytic - numeric) / (max(abs(analytic), abs(numeric)) + 1e-8)

def gradientCheck(model, target, config, coordinates=100, seed=0, initial=None):
  """ Max relative error between analytic and finite-difference gradients over random coordinates. """
  model = model.astype(np.float64)
  analytic = analyticGradient(model, target, config, initial)
  generator = rng.generator(seed, rng.SAMPLING)
  names = sorted(analytic)
  sizes = np.array([analytic[n].size for n in names])
  worst = 0.0
  for _ in range(coordinates):
    pick = int(generator.integers(0, sizes.sum()))
    which = int(np.searchsorted(np.cumsum(sizes), pick, side='right'))
    flat = pick - int(sizes[:which].sum())
    numeric = finiteDiffGradient(model, target, config, (names[which], flat), initial=initial)
    error = relativeError(float(analytic[names[which]].flat[flat]), numeric)
    logging.debug("%s[%s]: analytic %.10g numeric %.10g error %.3g", names[which], flat,
      analytic[names[which]].flat[flat], numeric, error)
    worst = max(worst, error)
  return worst
