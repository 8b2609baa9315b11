""" Stages that turn trajectories into clouds, embeddings, diagrams and figures. """

import json
import logging

import numpy as np

from analysis import autoencoders, extract, fields, homology, pca, plots
from analysis.cloud import loadCloud
from nca.errors import ValidationError
from nca.model import loadModel
from nca.trajectory import loadTrajectory

from .stage import Stage, present

MODES = ('macro', 'micro', 'window')

class Extract(Stage):
  """ A point cloud from a trajectory: one point per frame (macro), per live cell (micro),
      or per cell of a fixed window (window).
      >>> Extract('t.ncat', 'c.csv', mode='window')
      Traceback (most recent call last):
      ...
      nca.errors.ValidationError: Window extraction needs a window (row0, col0, row1, col1)
  """
  def __init__(self, trajectory, out, mode='macro', maxPoints=None, excludeDead=True, window=None, frames=None,
      seed=None):
    if mode not in MODES:
      raise ValidationError("Unknown extraction mode %r; expected one of %s" % (mode, ', '.join(MODES)))
    if mode == 'window' and window is None:
      raise ValidationError("Window extraction needs a window (row0, col0, row1, col1)")
    self.trajectory = trajectory
    self.out = out
    self.mode = mode
    self.maxPoints = maxPoints
    self.excludeDead = bool(excludeDead)
    self.window = window
    self.frames = frames
    self.seed = seed

  def inputs(self):
    return [self.trajectory]

  def outputs(self):
    return [self.out]

  def apply(self, experiment):
    trajectory = loadTrajectory(experiment.path(self.trajectory))
    if self.mode == 'macro':
      cloud = extract.extractMacroscopic(trajectory)
      if self.frames is not None:
        start, stop = extract.frameRange(trajectory, self.frames)
        cloud = cloud.subset(np.arange(start, stop))
    elif self.mode == 'micro':
      cloud = extract.extractMicroscopic(trajectory, self.excludeDead, self.maxPoints, self.seedFor(experiment), self.frames)
    else:
      cloud = extract.windowSubsample(trajectory, self.window, self.frames)
    cloud.save(experiment.path(self.out))
    experiment.report("%s: %s points of dimension %s (a %s-point budget covers %.3g%%)" % (self.out, cloud.size,
      cloud.dim, homology.DEFAULT_BUDGET, 100 * extract.coverage(homology.DEFAULT_BUDGET, cloud.size)))

class Pca(Stage):
  """ Fits a PCA basis and writes the projected coordinates. """
  def __init__(self, cloud, out='basis.pca', k=2, coords=None, svg=None):
    self.cloud = cloud
    self.out = out
    self.k = int(k)
    self.coords = coords
    self.svg = svg

  def inputs(self):
    return [self.cloud]

  def outputs(self):
    return present(self.out, self.coords, self.svg)

  def apply(self, experiment):
    cloud = loadCloud(experiment.path(self.cloud))
    basis = pca.pcaFit(cloud, self.k)
    pca.savePca(basis, experiment.path(self.out))
    coords = basis.project(cloud.points)
    if self.coords:
      pca.saveCoords(cloud, coords, experiment.path(self.coords))
    if self.svg:
      plots.emitScatterSvg(coords[:, :2], cloud.colours, experiment.path(self.svg), "PCA of %s" % self.cloud)
    experiment.report("%s: %s components, explained variance %s" % (self.out, basis.k,
      ', '.join('%.4g' % v for v in basis.explainedVariance[:4])))

class Ae(Stage):
  """ Trains a dense autoencoder (linear, mlp or conv) and writes the latent coordinates. """
  def __init__(self, cloud, out='model.dae', kind='mlp', latent=2, hidden=None, shape=None, epochs=2000,
      learningRate=1e-3, batchSize=None, lrDecay=None, coords=None, svg=None, seed=None):
    if kind not in autoencoders.KINDS:
      raise ValidationError("Unknown autoencoder kind %r; expected one of %s" % (kind, ', '.join(autoencoders.KINDS)))
    if kind == 'conv' and shape is None:
      raise ValidationError("A convolutional autoencoder needs the frame shape [H, W, C]")
    self.cloud = cloud
    self.out = out
    self.architecture = {'kind': kind, 'latent': int(latent)}
    if hidden is not None:
      self.architecture['hidden'] = [int(h) for h in hidden]
    if shape is not None:
      self.architecture['shape'] = [int(s) for s in shape]
    self.epochs = int(epochs)
    self.learningRate = float(learningRate)
    self.batchSize = batchSize
    self.lrDecay = lrDecay
    self.coords = coords
    self.svg = svg
    self.seed = seed

  def inputs(self):
    return [self.cloud]

  def outputs(self):
    return present(self.out, self.coords, self.svg)

  def apply(self, experiment):
    cloud = loadCloud(experiment.path(self.cloud))
    model, losses = autoencoders.aeFit(cloud.points, self.architecture, self.epochs, self.learningRate,
      self.batchSize, self.seedFor(experiment), self.lrDecay)
    autoencoders.saveDenseAe(model, experiment.path(self.out))
    latent = autoencoders.aeEncode(model, cloud.points)
    if self.coords:
      cloud.withPoints(latent).save(experiment.path(self.coords))
    if self.svg and latent.shape[1] >= 2:
      plots.emitScatterSvg(latent[:, :2], cloud.colours, experiment.path(self.svg), "%s latent space" % model.kind)
    experiment.report("%s: %s autoencoder, reconstruction loss %.6g" % (self.out, model.kind, losses[-1]))

class Sae(Stage):
  """ Trains a sparse autoencoder over per-cell states and writes its statistics. """
  def __init__(self, cloud, out='model.sae', stats=None, expansion=64, l1Coefficient=1e-3, epochs=1000,
      learningRate=1e-3, batchSize=None, lrDecay=None, holdout=0.1, threshold=1e-6, seed=None):
    self.cloud = cloud
    self.out = out
    self.stats = stats
    self.expansion = int(expansion)
    self.l1Coefficient = float(l1Coefficient)
    self.epochs = int(epochs)
    self.learningRate = float(learningRate)
    self.batchSize = batchSize
    self.lrDecay = lrDecay
    self.holdout = float(holdout)
    self.threshold = float(threshold)
    self.seed = seed

  def inputs(self):
    return [self.cloud]

  def outputs(self):
    return present(self.out, self.stats)

  def apply(self, experiment):
    cloud = loadCloud(experiment.path(self.cloud))
    model, stats = autoencoders.saeFit(cloud.points, self.expansion, self.l1Coefficient, self.epochs,
      self.learningRate, self.batchSize, self.seedFor(experiment), self.lrDecay, self.holdout, self.threshold)
    autoencoders.saveSae(model, experiment.path(self.out))
    if self.stats:
      stats.save(experiment.path(self.stats))
    experiment.report("%s: %r" % (self.out, stats))

class FrameFeatures(Stage):
  """ One point per frame: the mean sparse code of its live cells. """
  def __init__(self, sae, trajectory, out, excludeDead=True):
    self.sae = sae
    self.trajectory = trajectory
    self.out = out
    self.excludeDead = bool(excludeDead)

  def inputs(self):
    return [self.sae, self.trajectory]

  def outputs(self):
    return [self.out]

  def apply(self, experiment):
    model = autoencoders.loadSae(experiment.path(self.sae))
    trajectory = loadTrajectory(experiment.path(self.trajectory))
    cloud = autoencoders.perFrameMeanFeatures(model, trajectory, self.excludeDead)
    cloud.save(experiment.path(self.out))

class Ph(Stage):
  """ Vietoris-Rips persistence of a cloud, maxmin-subsampled to the budget first.
      Leaves its Betti report on the experiment.
  """
  def __init__(self, cloud, out='diagram.csv', maxDim=2, budget=homology.DEFAULT_BUDGET, maxRadius=None,
      threshold=None, svg=None, betti=None, seed=None):
    if int(maxDim) not in (0, 1, 2):
      raise ValidationError("maxDim must be 0, 1 or 2, got %s" % maxDim)
    self.cloud = cloud
    self.out = out
    self.maxDim = int(maxDim)
    self.budget = int(budget)
    self.maxRadius = maxRadius
    self.threshold = threshold
    self.svg = svg
    self.betti = betti
    self.seed = seed

  def inputs(self):
    return [self.cloud]

  def outputs(self):
    return present(self.out, self.svg, self.betti)

  def apply(self, experiment):
    cloud = loadCloud(experiment.path(self.cloud))
    points = cloud.points
    if cloud.size > self.budget:
      points = points[homology.maxminSubsample(points, self.budget, self.seedFor(experiment))]
      logging.info("Subsampled %s points to %s (coverage %.3g%%)", cloud.size, self.budget,
        100 * extract.coverage(self.budget, cloud.size))
    diagram = homology.ripsPersistence(homology.distanceMatrix(points), self.maxDim, self.maxRadius)
    diagram.save(experiment.path(self.out))
    report = homology.bettiReport(diagram, self.threshold)
    if self.svg:
      plots.emitDiagramSvg(diagram, experiment.path(self.svg), "Persistence of %s" % self.cloud)
    if self.betti:
      with open(experiment.path(self.betti), 'w') as f:
        json.dump(report.toJson(), f, indent=2, sort_keys=True)
    experiment.betti[self.out] = report
    experiment.report("%s: %r" % (self.out, report))

class Field(Stage):
  """ Field lines of a model over the 2-D PCA embedding of a trajectory's frames. """
  def __init__(self, trajectory, basis, model, out='field.svg', csv=None, resolution=25, neighbours=20, steps=5,
      liftMode='interpolate', temperature=None, seed=None):
    if liftMode not in fields.LIFT_MODES:
      raise ValidationError("Unknown lift mode %r; expected one of %s" % (liftMode, ', '.join(fields.LIFT_MODES)))
    self.trajectory = trajectory
    self.basis = basis
    self.model = model
    self.out = out
    self.csv = csv
    self.resolution = int(resolution)
    self.neighbours = int(neighbours)
    self.steps = int(steps)
    self.liftMode = liftMode
    self.temperature = temperature
    self.seed = seed

  def inputs(self):
    return [self.trajectory, self.basis, self.model]

  def outputs(self):
    return present(self.out, self.csv)

  def apply(self, experiment):
    trajectory = loadTrajectory(experiment.path(self.trajectory))
    basis = pca.loadPca(experiment.path(self.basis))
    model = loadModel(experiment.path(self.model))
    cloud = extract.extractMacroscopic(trajectory)
    shape = (trajectory.height, trajectory.width, trajectory.channels)
    field = fields.fieldLines(cloud, basis, model, shape, self.resolution, self.neighbours, self.steps,
      self.seedFor(experiment), self.liftMode, self.temperature)
    if self.csv:
      field.save(experiment.path(self.csv))
    plots.emitFieldSvg(field, basis.project(cloud.points), cloud.colours, experiment.path(self.out),
      "Field lines after %s steps" % self.steps)
    experiment.report("%s: %r" % (self.out, field))

class Scatter(Stage):
  """ Scatter of the first two coordinates of a cloud, coloured by the cloud's colours. """
  def __init__(self, cloud, out, title=None):
    self.cloud = cloud
    self.out = out
    self.title = title

  def inputs(self):
    return [self.cloud]

  def outputs(self):
    return [self.out]

  def apply(self, experiment):
    cloud = loadCloud(experiment.path(self.cloud))
    plots.emitScatterSvg(cloud.points[:, :2], cloud.colours, experiment.path(self.out), self.title)
