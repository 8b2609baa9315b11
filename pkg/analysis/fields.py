""" Latent vector fields ("field lines").

    Each point x0 of a regular grid over the 2-D latent embedding is lifted back to a full
    grid state, advanced a few NCA steps, and projected again. The lift is a softmax over
    the k nearest recorded frames in latent space (weights exp(-distance / temperature),
    normalised), or plain PCA reconstruction in 'basis' mode.

    A vector is project(advanced) - project(lifted), not project(advanced) - x0: it starts
    from where the lifted state really projects, so a model that leaves states unchanged gives
    zero vectors even where the lift is lossy. The two agree whenever the lift is exact, as it
    is with one neighbour at a recorded frame.
"""

import logging

import numpy as np
import pandas as pd
import scipy.spatial
import torch

from nca.engine import fireTensor, stepTensor, tensors, toTensor, fromTensor
from nca.errors import ContractError, ValidationError

LIFT_MODES = ('interpolate', 'basis')
CUTOFF = 2.0
SHARPNESS = 4.0
BATCH = 32

class VectorField():
  """ Grid coordinates [G x 2], vectors [G x 2] and a validity flag per grid point. """
  def __init__(self, grid, vectors, valid, stepsAdvanced, liftMode, weights=None, neighbours=None):
    self.grid = np.asarray(grid, dtype=np.float64)
    self.vectors = np.asarray(vectors, dtype=np.float64)
    self.valid = np.asarray(valid, dtype=bool)
    if self.grid.shape != self.vectors.shape or len(self.valid) != len(self.grid):
      raise ContractError("Field grid %s, vectors %s and flags %s disagree" % (self.grid.shape, self.vectors.shape, self.valid.shape))
    self.stepsAdvanced = int(stepsAdvanced)
    self.liftMode = liftMode
    self.weights = weights
    self.neighbours = neighbours

  def __len__(self):
    return len(self.grid)

  def frame(self):
    table = pd.DataFrame({'x': self.grid[:, 0], 'y': self.grid[:, 1], 'dx': self.vectors[:, 0], 'dy': self.vectors[:, 1]})
    table['valid'] = self.valid.astype(int)
    return table

  def save(self, path):
    self.frame().to_csv(path, index=False)
    logging.info("Wrote %s field vectors (%s valid) to %s", len(self), int(self.valid.sum()), path)

  def __repr__(self):
    return "VectorField(%s points, %s valid, %s steps, %s)" % (len(self), int(self.valid.sum()), self.stepsAdvanced, self.liftMode)

def latentGrid(latent, resolution):
  """ resolution x resolution points spanning the bounding box of the latent cloud, x fastest.
      >>> latentGrid(np.array([[0.0, 0.0], [1.0, 2.0]]), 3)[:4].tolist()
      [[0.0, 0.0], [0.5, 0.0], [1.0, 0.0], [0.0, 1.0]]
  """
  xs = np.linspace(latent[:, 0].min(), latent[:, 0].max(), resolution)
  ys = np.linspace(latent[:, 1].min(), latent[:, 1].max(), resolution)
  gx, gy = np.meshgrid(xs, ys)
  return np.stack([gx.ravel(), gy.ravel()], axis=1)

def medianSpacing(tree, latent):
  """ Median distance from each latent point to its nearest other point. """
  if len(latent) < 2:
    return 0.0
  distances, _ = tree.query(latent, k=2)
  return float(np.median(distances[:, 1]))

def softmaxWeights(distances, temperature):
  """ Rows of exp(-d / temperature), normalised; they form a probability simplex.
      >>> w = softmaxWeights(np.array([[0.0, 1.0, 3.0]]), 1.0)
      >>> round(float(w.sum()), 12), bool(w[0, 0] > w[0, 1] > w[0, 2])
      (1.0, True)
  """
  logits = -(distances - distances[:, :1]) / max(temperature, 1e-300)
  weights = np.exp(logits)
  return weights / weights.sum(axis=1, keepdims=True)

def advance(model, states, steps, seed):
  """ steps NCA updates of a B x H x W x C batch; the fire mask for step t reads stream t. """
  params = tensors(model)
  with torch.no_grad():
    x = toTensor(states, model.dtype)
    for t in range(steps):
      x = stepTensor(x, params, model, fireTensor(seed, t, (x.shape[0], x.shape[2], x.shape[3]), model.fireRate))
  return fromTensor(x)

class Lifter():
  """ Lifts latent points to grid states and measures where the NCA takes them. """
  def __init__(self, cloud, basis, model, shape, neighbours=20, steps=5, seed=0, liftMode='interpolate', temperature=None):
    if liftMode not in LIFT_MODES:
      raise ValidationError("Unknown lift mode %r; expected one of %s" % (liftMode, ', '.join(LIFT_MODES)))
    if steps < 1:
      raise ValidationError("nca_steps must be at least 1, got %s" % steps)
    if basis.k != 2:
      raise ContractError("Field lines need a 2-component basis, got %s" % basis.k)
    if int(np.prod(shape)) != cloud.dim or shape[2] != model.channels:
      raise ContractError("Frame shape %s doesn't fit %s-dimensional points and a %s-channel model"
        % (tuple(shape), cloud.dim, model.channels))
    self.points = cloud.points
    self.latent = basis.project(cloud.points)
    self.basis = basis
    self.model = model
    self.shape = tuple(shape)
    self.neighbours = max(1, min(int(neighbours), len(self.latent)))
    self.steps = int(steps)
    self.seed = seed
    self.liftMode = liftMode
    self.tree = scipy.spatial.cKDTree(self.latent)
    self.spacing = medianSpacing(self.tree, self.latent)
    self.cutoff = CUTOFF * self.spacing
    self.temperature = self.spacing / SHARPNESS if temperature is None else float(temperature)

  def lift(self, coords):
    """ Returns (states [G x D], weights [G x k], neighbour indices [G x k], valid [G]). """
    distances, indices = self.tree.query(coords, k=self.neighbours)
    distances = distances.reshape(len(coords), -1)
    indices = indices.reshape(len(coords), -1)
    valid = distances[:, 0] <= self.cutoff
    weights = softmaxWeights(distances, self.temperature)
    if self.liftMode == 'basis':
      states = self.basis.reconstruct(coords)
    else:
      states = np.einsum('gk,gkd->gd', weights, self.points[indices].astype(np.float64))
    return states, weights, indices, valid

  def fieldAt(self, coords):
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    states, weights, indices, valid = self.lift(coords)
    vectors = np.zeros_like(coords)
    rows = np.flatnonzero(valid)
    for chunk in range(0, len(rows), BATCH):
      picked = rows[chunk:chunk + BATCH]
      start = states[picked].astype(self.model.dtype)
      end = advance(self.model, start.reshape((-1,) + self.shape), self.steps, self.seed)
      vectors[picked] = self.basis.project(end.reshape(len(start), -1)) - self.basis.project(start)
    return VectorField(coords, vectors, valid, self.steps, self.liftMode, weights, indices)

def fieldLines(cloud, basis, model, shape, resolution=25, neighbours=20, steps=5, seed=0, liftMode='interpolate',
    temperature=None):
  """ The field over a resolution x resolution latent grid. Grid points farther than twice the
      median nearest-neighbour spacing from every data point are marked invalid.
  """
  lifter = Lifter(cloud, basis, model, shape, neighbours, steps, seed, liftMode, temperature)
  field = lifter.fieldAt(latentGrid(lifter.latent, resolution))
  logging.info("Field lines: %r", field)
  return field
