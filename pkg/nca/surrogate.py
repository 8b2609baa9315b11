""" Hand-wired desk-scale models that need no training.

    Both read only the identity slot of the perception (their Sobel rows are zero), so
    every cell runs the same small dynamical system independently.

    signalResponseModel: channels r, g, b, s (charge), e (trigger), u (lagged charge),
    m (maturity). A signal writes into e; e charges s; s switches the cell blue and the
    slower u switches green off. As the charge leaks away the cell returns to green, so
    each signal traces one closed loop through colour space. m has no dynamics: it is 1
    in healthy tissue and stays 0 wherever a perturbation zeroed it.

    bistableModel: channels r, g, b, u. u relaxes towards 0 below 0.5 and towards 1
    above it; b copies u and g copies 1 - u one step later.
"""

import numpy as np

from .events import signalEvent
from .grid import ChannelMode, GridState
from .model import NcaModel, defaultKernels

G, B = 1, 2

class Wiring():
  """ Builds an NcaModel one hidden unit at a time.
      Each unit is relu(sum of weight * cell channel + bias) feeding weighted channel updates.
      >>> w = Wiring(4)
      >>> w.unit({3: 1.0}, outputs={2: 1.0})
      >>> m = w.model()
      >>> m.hiddenWidth, float(m.w1[3, 0]), float(m.w2[0, 2])
      (1, 1.0, 1.0)
  """
  def __init__(self, channels):
    self.channels = channels
    self.units = []

  def unit(self, inputs, bias=0.0, outputs=None):
    self.units.append((inputs, bias, outputs or {}))

  def model(self):
    kernels = defaultKernels()
    w1 = np.zeros((len(kernels) * self.channels, len(self.units)))
    b1 = np.zeros(len(self.units))
    w2 = np.zeros((len(self.units), self.channels))
    for j, (inputs, bias, outputs) in enumerate(self.units):
      for channel, weight in inputs.items():
        w1[channel, j] = weight  # identity slot
      b1[j] = bias
      for channel, weight in outputs.items():
        w2[j, channel] = weight
    return NcaModel(kernels, w1, b1, w2, fireRate=1.0, channelMode=ChannelMode.RGB_PLAIN)

S, E, U, M = 3, 4, 5, 6

def signalResponseModel(rate=0.1, charge=0.15, leak=0.01, fade=0.05, lag=0.02):
  """ The signal-driven colour cycle.
      >>> from .engine import updateStep
      >>> g = restState(4, 4)
      >>> bool(np.array_equal(updateStep(g, signalResponseModel(), 0).values, g.values))
      True
  """
  w = Wiring(7)
  # b follows clip(20s - 1, 0, 1)
  w.unit({S: 20.0}, -1.0, {B: rate})
  w.unit({S: 20.0}, -2.0, {B: -rate})
  w.unit({B: 1.0}, 0.0, {B: -rate})
  # g follows 1 - clip(25u - 2, 0, 1)
  w.unit({}, 1.0, {G: rate})
  w.unit({U: 25.0}, -2.0, {G: -rate})
  w.unit({U: 25.0}, -3.0, {G: rate})
  w.unit({G: 1.0}, 0.0, {G: -rate})
  w.unit({S: 1.0}, 0.0, {S: -leak, U: lag})
  w.unit({E: 1.0}, 0.0, {S: charge, E: -fade})
  w.unit({U: 1.0}, 0.0, {U: -lag})
  return w.model()

def restState(height, width):
  """ Healthy green tissue at rest under signalResponseModel. """
  values = np.zeros((height, width, 7), dtype=np.float32)
  values[:, :, G] = 1.0
  values[:, :, M] = 1.0
  return GridState(values, ChannelMode.RGB_PLAIN)

def signalTemplate(height, width, value=0.1):
  """ A signal on the trigger channel covering the whole grid. """
  radius = int(np.ceil(np.hypot(height, width)))
  return signalEvent(0, (height // 2, width // 2), E, value=value, radius=radius)

def bistableModel(rate=0.1):
  """ Two stable colours, blue (u = 1) and green (u = 0).
      >>> from .engine import rollout
      >>> up = rollout(bistableModel(), bistableState(3, 3, 0.6), 200).frames[-1]
      >>> down = rollout(bistableModel(), bistableState(3, 3, 0.4), 200).frames[-1]
      >>> round(float(up[0, 0, 3]), 3), round(float(down[0, 0, 3]), 3)
      (1.0, 0.0)
  """
  u = 3
  w = Wiring(4)
  w.unit({u: 3.0}, -1.0, {u: rate})
  w.unit({u: 3.0}, -2.0, {u: -rate})
  w.unit({u: 1.0}, 0.0, {u: -rate, B: 1.0, G: -1.0})
  w.unit({B: 1.0}, 0.0, {B: -1.0})
  w.unit({G: 1.0}, 0.0, {G: -1.0})
  w.unit({}, 1.0, {G: 1.0})
  return w.model()

def bistableState(height, width, u):
  values = np.zeros((height, width, 4), dtype=np.float32)
  values[:, :, 3] = u
  values[:, :, B] = u
  values[:, :, G] = 1.0 - u
  return GridState(values, ChannelMode.RGB_PLAIN)
