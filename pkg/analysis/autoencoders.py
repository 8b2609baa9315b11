""" Dense and sparse autoencoders over point clouds.

    A dense autoencoder squeezes points through a small latent layer: 'linear' is one
    linear map each way, 'mlp' adds leaky-rectifier hidden layers, and 'conv' treats each
    point as a flattened H x W x C frame and downsamples it through three stride-2 stages.

    The sparse autoencoder is overcomplete with nonnegative codes and an L1 penalty; its
    decoder atoms (the columns of the decoder weight) are renormalised after every step.
"""

import json
import logging

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from nca import binfile, rng
from nca.errors import ContractError, TrainingDiverged, ValidationError
from nca.grid import rawAlive
from nca.trainer import makeOptimizer

from .cloud import PointCloud, framesProvenance
from .extract import frameColours

DAE_MAGIC = b'NDAE'
SAE_MAGIC = b'NSAE'
KINDS = ('linear', 'mlp', 'conv')
SLOPE = 0.01

def leaky():
  return nn.LeakyReLU(SLOPE)

def downsampled(size):
  return (size - 1) // 2 + 1

class DenseAe(nn.Module):
  """ >>> ae = DenseAe({'kind': 'conv', 'input_dim': 60 * 60 * 17, 'shape': [60, 60, 17]})
      >>> x = torch.zeros(2, 60 * 60 * 17)
      >>> tuple(ae.encode(x).shape), tuple(ae(x).shape)
      ((2, 2), (2, 61200))
      >>> DenseAe({'kind': 'mlp', 'input_dim': 17, 'hidden': [32, 16]}).encode(torch.zeros(5, 17)).shape[1]
      2
  """
  def __init__(self, architecture):
    super().__init__()
    self.architecture = dict(architecture)
    kind = self.architecture.setdefault('kind', 'linear')
    latent = self.architecture.setdefault('latent', 2)
    inputDim = self.architecture['input_dim']
    if kind == 'linear':
      self.encoder = nn.Linear(inputDim, latent)
      self.decoder = nn.Linear(latent, inputDim)
    elif kind == 'mlp':
      widths = [inputDim] + list(self.architecture.setdefault('hidden', [64, 32]))
      down = []
      for a, b in zip(widths, widths[1:]):
        down += [nn.Linear(a, b), leaky()]
      self.encoder = nn.Sequential(*down, nn.Linear(widths[-1], latent))
      up = [nn.Linear(latent, widths[-1])]
      for a, b in zip(widths[::-1], widths[-2::-1]):
        up += [leaky(), nn.Linear(a, b)]
      self.decoder = nn.Sequential(*up)
    elif kind == 'conv':
      self.buildConv(latent)
    else:
      raise ValidationError("Unknown autoencoder kind %r; expected one of %s" % (kind, ', '.join(KINDS)))

  def buildConv(self, latent):
    height, width, channels = self.architecture['shape']
    if height * width * channels != self.architecture['input_dim']:
      raise ContractError("Frame shape %s doesn't match %s inputs" % (self.architecture['shape'], self.architecture['input_dim']))
    stages = list(self.architecture.setdefault('stages', [16, 32, 32]))
    hidden = self.architecture.setdefault('hidden', [64])[0]
    sizes = [(height, width)]
    for _ in stages:
      sizes.append(tuple(downsampled(s) for s in sizes[-1]))
    flat = stages[-1] * sizes[-1][0] * sizes[-1][1]

    down = []
    for a, b in zip([channels] + stages, stages):
      down += [nn.Conv2d(a, b, 3, stride=2, padding=1), leaky()]
    self.encoder = nn.Sequential(*down, nn.Flatten(), nn.Linear(flat, hidden), leaky(), nn.Linear(hidden, latent))

    up = [nn.Linear(latent, hidden), leaky(), nn.Linear(hidden, flat), leaky(),
      nn.Unflatten(1, (stages[-1], sizes[-1][0], sizes[-1][1]))]
    outs = stages[-2::-1] + [channels]
    for i, (a, b) in enumerate(zip(stages[::-1], outs)):
      small, big = sizes[-1 - i], sizes[-2 - i]
      padding = tuple(t - 2 * s + 1 for t, s in zip(big, small))
      up.append(nn.ConvTranspose2d(a, b, 3, stride=2, padding=1, output_padding=padding))
      if i < len(stages) - 1:
        up.append(leaky())
    self.decoder = nn.Sequential(*up)

  @property
  def kind(self):
    return self.architecture['kind']

  def toFrames(self, x):
    height, width, channels = self.architecture['shape']
    return x.reshape(-1, height, width, channels).permute(0, 3, 1, 2)

  def encode(self, x):
    if self.kind == 'conv':
      x = self.toFrames(x)
    return self.encoder(x)

  def decode(self, z):
    out = self.decoder(z)
    if self.kind == 'conv':
      out = out.permute(0, 2, 3, 1).reshape(len(z), -1)
    return out

  def forward(self, x):
    return self.decode(self.encode(x))

class Sae(nn.Module):
  """ >>> sae = Sae(17, 17 * 64, 1e-3)
      >>> codes = sae.encode(torch.randn(4, 17))
      >>> tuple(codes.shape), bool((codes >= 0).all())
      ((4, 1088), True)
      >>> bool(torch.allclose(sae.decoder.weight.norm(dim=0), torch.ones(1088)))
      True
  """
  def __init__(self, inputDim, dictSize, l1Coefficient):
    super().__init__()
    self.inputDim = int(inputDim)
    self.dictSize = int(dictSize)
    self.l1Coefficient = float(l1Coefficient)
    self.encoder = nn.Linear(self.inputDim, self.dictSize)
    self.decoder = nn.Linear(self.dictSize, self.inputDim)
    with torch.no_grad():
      self.decoder.bias.zero_()
      self.encoder.bias.zero_()
    self.normaliseDecoder()
    with torch.no_grad():
      self.encoder.weight.copy_(self.decoder.weight.T)

  def normaliseDecoder(self):
    with torch.no_grad():
      weight = self.decoder.weight
      weight.div_(weight.norm(dim=0, keepdim=True).clamp_min(1e-12))

  def encode(self, x):
    return F.relu(self.encoder(x - self.decoder.bias))

  def forward(self, x):
    codes = self.encode(x)
    return self.decoder(codes), codes

class SaeStats():
  def __init__(self, reconstructionMse, meanActiveFeatures, deadFeatureFraction, activationThreshold):
    self.reconstructionMse = float(reconstructionMse)
    self.meanActiveFeatures = float(meanActiveFeatures)
    self.deadFeatureFraction = float(deadFeatureFraction)
    self.activationThreshold = float(activationThreshold)

  def toJson(self):
    return {'reconstruction_mse': self.reconstructionMse, 'mean_active_features': self.meanActiveFeatures,
      'dead_feature_fraction': self.deadFeatureFraction, 'activation_threshold': self.activationThreshold}

  def save(self, path):
    with open(path, 'w') as f:
      json.dump(self.toJson(), f, indent=2, sort_keys=True)
      f.write('\n')

  def __repr__(self):
    return "SaeStats(mse %.3g, %.2f active, %.1f%% dead)" % (
      self.reconstructionMse, self.meanActiveFeatures, 100 * self.deadFeatureFraction)

def asPoints(points):
  points = np.asarray(getattr(points, 'points', points), dtype=np.float32)
  if points.ndim != 2 or len(points) < 1:
    raise ContractError("Need an N x D point array, got shape %s" % (points.shape,))
  return points

def batches(count, batchSize, seed, epoch):
  if not batchSize or batchSize >= count:
    return [np.arange(count)]
  order = rng.generator(seed, rng.SAMPLING | epoch).permutation(count)
  return [order[i:i + batchSize] for i in range(0, count, batchSize)]

def fit(module, data, lossOf, epochs, learningRate, batchSize, seed, lrDecay, after=None):
  """ The loop shared by both autoencoders; returns the per-epoch mean loss. """
  opt, scheduler = makeOptimizer(list(module.parameters()), learningRate, lrDecay=lrDecay, epochs=epochs)
  losses = []
  for epoch in range(epochs):
    total = 0.0
    for rows in batches(len(data), batchSize, seed, epoch):
      opt.zero_grad()
      loss = lossOf(data[torch.from_numpy(rows)])
      loss.backward()
      opt.step()
      if after is not None:
        after(epoch)
      total += float(loss.detach()) * len(rows)
    value = total / len(data)
    if not np.isfinite(value):
      raise TrainingDiverged(epoch, value)
    if scheduler is not None:
      scheduler.step()
    losses.append(value)
    if epoch % 500 == 0 or epoch == epochs - 1:
      logging.info("Epoch %s: loss %.6g", epoch, value)
  return losses

def aeFit(points, architecture, epochs=2000, learningRate=1e-3, batchSize=None, seed=0, lrDecay=None):
  """ Train a dense autoencoder on mean squared reconstruction error. Returns (model, losses).
      >>> pts = np.full((6, 3), 0.25, dtype=np.float32)
      >>> ae, losses = aeFit(pts, {"kind": "linear"}, epochs=500, learningRate=1e-2, lrDecay=1e-3)
      >>> bool(losses[-1] < 1e-6), bool(np.ptp(aeEncode(ae, pts), axis=0).max() < 1e-6)
      (True, True)
  """
  points = asPoints(points)
  architecture = dict(architecture)
  architecture['input_dim'] = points.shape[1]
  with torch.random.fork_rng():
    torch.manual_seed(seed)
    module = DenseAe(architecture)
  data = torch.from_numpy(points)
  losses = fit(module, data, lambda x: F.mse_loss(module(x), x), epochs, learningRate, batchSize, seed, lrDecay)
  module.eval()
  return module, losses

def aeEncode(model, points):
  with torch.no_grad():
    return model.encode(torch.from_numpy(asPoints(points))).numpy().astype(np.float64)

def aeDecode(model, coords):
  with torch.no_grad():
    return model.decode(torch.from_numpy(np.asarray(coords, dtype=np.float32))).numpy().astype(np.float64)

def saeEncode(model, points):
  points = asPoints(points)
  if points.shape[1] != model.inputDim:
    raise ContractError("Points have %s dimensions; the dictionary expects %s" % (points.shape[1], model.inputDim))
  with torch.no_grad():
    return model.encode(torch.from_numpy(points)).numpy().astype(np.float64)

def saeStats(model, points, threshold=1e-6):
  """ Reconstruction error, mean active count and dead fraction over points. """
  points = asPoints(points)
  with torch.no_grad():
    x = torch.from_numpy(points)
    recon, codes = model(x)
    active = codes > threshold
    return SaeStats(F.mse_loss(recon, x), active.sum(dim=1).double().mean(),
      (~active.any(dim=0)).double().mean(), threshold)

def saeFit(points, expansion=64, l1Coefficient=1e-3, epochs=1000, learningRate=1e-3, batchSize=None, seed=0,
    lrDecay=None, holdout=0.1, threshold=1e-6):
  """ Train on all but the last `holdout` fraction of points and report SaeStats on that slice.
      >>> pts = np.random.default_rng(0).normal(size=(50, 4)).astype(np.float32)
      >>> sae, stats = saeFit(pts, expansion=2, epochs=5)
      >>> sae.dictSize, 0 <= stats.deadFeatureFraction <= 1
      (8, True)
  """
  points = asPoints(points)
  if expansion < 1:
    raise ValidationError("Expansion must be at least 1, got %s" % expansion)
  count = len(points)
  evaluation = max(1, int(round(count * holdout))) if count > 1 else 0
  training = points[:count - evaluation] if evaluation else points
  evaluated = points[count - evaluation:] if evaluation else points
  with torch.random.fork_rng():
    torch.manual_seed(seed)
    model = Sae(points.shape[1], int(expansion) * points.shape[1], l1Coefficient)

  def lossOf(x):
    recon, codes = model(x)
    return F.mse_loss(recon, x) + model.l1Coefficient * codes.sum(dim=1).mean()

  def renormalise(epoch):
    model.normaliseDecoder()
    if not torch.isfinite(model.decoder.weight).all():
      raise TrainingDiverged(epoch, "nan in the decoder")

  fit(model, torch.from_numpy(training), lossOf, epochs, learningRate, batchSize, seed, lrDecay, renormalise)
  model.eval()
  stats = saeStats(model, evaluated, threshold)
  logging.info("Sparse autoencoder: %r", stats)
  return model, stats

def perFrameMeanFeatures(model, trajectory, excludeDead=True):
  """ One point per frame: the mean code over its live cells (zero when none are alive).
      >>> from nca.trajectory import Trajectory
      >>> sae = Sae(3, 6, 0.0)
      >>> frames = np.zeros((2, 2, 2, 3)); frames[:, 0, 0] = [0.5, 0.2, 0.1]
      >>> cloud = perFrameMeanFeatures(sae, Trajectory(frames, 'RGB_PLAIN'))
      >>> cloud.size, cloud.dim, bool(np.allclose(cloud.points[0], cloud.points[1]))
      (2, 6, True)
  """
  if trajectory.channels != model.inputDim:
    raise ContractError("Trajectory has %s channels; the dictionary expects %s" % (trajectory.channels, model.inputDim))
  frames = trajectory.frames
  if excludeDead:
    alive = rawAlive(frames, trajectory.channelMode, trajectory.aliveThreshold)
  else:
    alive = np.ones(frames.shape[:3], dtype=bool)
  points = np.zeros((len(frames), model.dictSize))
  for t in range(len(frames)):
    cells = frames[t][alive[t]]
    if len(cells):
      points[t] = saeEncode(model, cells).mean(axis=0)
  colours = frameColours(frames, trajectory.channelMode, trajectory.aliveThreshold)
  return PointCloud(points, colours, framesProvenance(np.arange(len(frames))))

def stateArrays(module):
  return {name: value.detach().cpu().numpy() for name, value in module.state_dict().items()}

def loadState(module, arrays):
  module.load_state_dict({name: torch.from_numpy(np.array(value, dtype=np.float32)) for name, value in arrays.items()})
  module.eval()
  return module

def saveDenseAe(model, path):
  binfile.writeContainer(path, DAE_MAGIC, {'architecture': model.architecture}, stateArrays(model))

def loadDenseAe(path):
  meta, arrays = binfile.readContainer(path, DAE_MAGIC)
  return loadState(DenseAe(meta['architecture']), arrays)

def saveSae(model, path):
  meta = {'input_dim': model.inputDim, 'dict_size': model.dictSize, 'l1_coefficient': model.l1Coefficient}
  binfile.writeContainer(path, SAE_MAGIC, meta, stateArrays(model))

def loadSae(path):
  meta, arrays = binfile.readContainer(path, SAE_MAGIC)
  return loadState(Sae(meta['input_dim'], meta['dict_size'], meta['l1_coefficient']), arrays)
