""" Stages that make models, targets and trajectories. """

import logging
import os

from PIL import Image, ImageDraw

from nca import surrogate
from nca.engine import rollout
from nca.errors import ValidationError
from nca.events import EventScript
from nca.grid import ChannelMode, seedState
from nca.model import loadModel, modelInit, saveModel
from nca.trainer import TrainConfig, loadTarget, train
from nca.trajectory import saveTrajectory

from .stage import Stage, present

SURROGATES = {'signal-response': surrogate.signalResponseModel, 'bistable': surrogate.bistableModel}
SHAPES = ('disc', 'square')
INITIAL = ('seed', 'rest', 'bistable')

def checkpointPath(out, epoch):
  """ >>> checkpointPath('runs/m.ncam', 2000)
      'runs/m.epoch2000.ncam'
  """
  root, extension = os.path.splitext(out)
  return "%s.epoch%s%s" % (root, epoch, extension)

class Surrogate(Stage):
  """ Writes one of the hand-wired models, which need no training.
      >>> Surrogate(model='spiral')
      Traceback (most recent call last):
      ...
      nca.errors.ValidationError: Unknown surrogate 'spiral'; expected one of bistable, signal-response
  """
  def __init__(self, out='model.ncam', model='signal-response', rate=0.1):
    if model not in SURROGATES:
      raise ValidationError("Unknown surrogate %r; expected one of %s" % (model, ', '.join(sorted(SURROGATES))))
    self.out = out
    self.model = model
    self.rate = float(rate)

  def outputs(self):
    return [self.out]

  def apply(self, experiment):
    model = SURROGATES[self.model](rate=self.rate)
    saveModel(model, experiment.path(self.out))
    experiment.report("%s: %r" % (self.out, model))

class Target(Stage):
  """ Draws a target image: one filled disc or square on a transparent background. """
  def __init__(self, out, colour=(0, 0, 255), shape='disc', size=16, margin=3):
    if shape not in SHAPES:
      raise ValidationError("Unknown target shape %r; expected one of %s" % (shape, ', '.join(SHAPES)))
    if len(colour) != 3:
      raise ValidationError("A target colour is three 0-255 values, got %s" % (list(colour),))
    if not 0 <= margin < size / 2:
      raise ValidationError("Margin %s leaves nothing to draw on a %s-pixel target" % (margin, size))
    self.out = out
    self.colour = tuple(int(c) for c in colour)
    self.shape = shape
    self.size = int(size)
    self.margin = int(margin)

  def outputs(self):
    return [self.out]

  def apply(self, experiment):
    image = Image.new('RGBA', (self.size, self.size), (0, 0, 0, 0))
    draw = ImageDraw.Draw(image)
    box = (self.margin, self.margin, self.size - 1 - self.margin, self.size - 1 - self.margin)
    if self.shape == 'disc':
      draw.ellipse(box, fill=self.colour + (255,))
    else:
      draw.rectangle(box, fill=self.colour + (255,))
    image.save(experiment.path(self.out), format='PNG')
    logging.info("Drew a %s %s target into %s", self.colour, self.shape, self.out)

class Train(Stage):
  """ Trains a fresh model towards one target, or several for the signal-switching regime.
      options holds training options by their snake_case names (epochs, batch_size, ...).
      >>> Train(['a.png'], out='m.ncam', options={'epochs': 4, 'checkpoint_every': 2}).outputs()
      ['m.ncam', 'm.epoch2.ncam', 'm.epoch4.ncam']
  """
  def __init__(self, targets, out='model.ncam', channels=16, hidden=128, channelMode='RGBA_ALIVE', size=None,
      fireRate=0.5, lossLog=None, options=None):
    self.targets = [targets] if isinstance(targets, str) else list(targets)
    if not self.targets:
      raise ValidationError("Training needs at least one target image")
    self.out = out
    self.channels = int(channels)
    self.hidden = int(hidden)
    self.channelMode = ChannelMode.parse(channelMode)
    self.size = None if size is None else (int(size), int(size))
    self.fireRate = float(fireRate)
    self.lossLog = lossLog
    self.options = dict(options or {})
    self.config = TrainConfig.fromDict(self.options)

  def checkpoints(self):
    every = self.config.checkpointEvery
    if not every:
      return []
    return [checkpointPath(self.out, epoch) for epoch in range(every, self.config.epochs + 1, every)]

  def inputs(self):
    return list(self.targets)

  def outputs(self):
    return present(self.out, *self.checkpoints()) + present(self.lossLog)

  def apply(self, experiment):
    options = dict(self.options)
    options.setdefault('seed', experiment.seed)
    config = TrainConfig.fromDict(options)
    targets = [loadTarget(experiment.path(t), self.channelMode, self.size) for t in self.targets]
    model = modelInit(self.channels, self.hidden, self.channelMode, config.seed, fireRate=self.fireRate)

    def checkpoint(epoch, snapshot):
      saveModel(snapshot, experiment.path(checkpointPath(self.out, epoch)))

    model, log = train(model, targets, config, checkpoint)
    saveModel(model, experiment.path(self.out))
    if self.lossLog:
      log.save(experiment.path(self.lossLog))
    experiment.report("%s: loss %.6g after %s epochs" % (self.out, log.losses[-1], len(log)))

class Rollout(Stage):
  """ Runs a model from an initial state, applying an event script, and records the trajectory.
      events is a path to a JSON or YAML script, or the list of events itself.
      >>> Rollout('m.ncam', 't.ncat', 10, initial='void')
      Traceback (most recent call last):
      ...
      nca.errors.ValidationError: Unknown initial state 'void'; expected one of seed, rest, bistable
  """
  def __init__(self, model, out, steps, height=16, width=16, initial='seed', u=0.5, events=None, recordEvery=1,
      stopSignalsAfter=None, seed=None):
    if initial not in INITIAL:
      raise ValidationError("Unknown initial state %r; expected one of %s" % (initial, ', '.join(INITIAL)))
    if int(steps) < 0:
      raise ValidationError("steps must be nonnegative, got %s" % steps)
    self.model = model
    self.out = out
    self.steps = int(steps)
    self.height = int(height)
    self.width = int(width)
    self.initial = initial
    self.u = float(u)
    self.events = events
    self.recordEvery = int(recordEvery)
    self.stopSignalsAfter = stopSignalsAfter
    self.seed = seed

  def inputs(self):
    return [self.model] + ([self.events] if isinstance(self.events, str) else [])

  def outputs(self):
    return [self.out]

  def initialState(self, model):
    if self.initial == 'rest':
      return surrogate.restState(self.height, self.width)
    if self.initial == 'bistable':
      return surrogate.bistableState(self.height, self.width, self.u)
    return seedState(self.height, self.width, model.channels, model.channelMode)

  def script(self, experiment):
    if isinstance(self.events, str):
      script = EventScript.load(experiment.path(self.events), self.steps)
    else:
      script = EventScript.parse(self.events, self.steps)
    if self.stopSignalsAfter is not None:
      script = script.withoutSignalsAfter(int(self.stopSignalsAfter))
    return script

  def apply(self, experiment):
    model = loadModel(experiment.path(self.model))
    script = self.script(experiment)
    trajectory = rollout(model, self.initialState(model), self.steps, script, self.seedFor(experiment), self.recordEvery)
    saveTrajectory(trajectory, experiment.path(self.out))
    experiment.report("%s: %s frames of %sx%sx%s, %s events" % (self.out, len(trajectory), trajectory.height,
      trajectory.width, trajectory.channels, len(trajectory.events)))
