""" Scripted interventions during a rollout: signals and perturbations.

    Scripts are JSON (or YAML) documents, either a list of events or a map with an
    "events" list. Each event is a map:

      {"t": 600, "kind": "perturb", "rectangle": [20, 20, 40, 40], "fill": 0}
      {"t": 150, "kind": "signal", "centre": [30, 30], "jitter": 3,
       "channel": 4, "value": 1.0, "radius": 3}

    A signal with "every" instead of "t" repeats at start, start+every, ... for every
    timestep before "until" (default: the rollout length); "start" defaults to "every".
"""

import copy
import logging

import numpy as np
import yaml

from . import rng
from .errors import ValidationError
from .grid import checkRectangle

SIGNAL = 'signal'
PERTURB = 'perturb'

class Event():
  def __init__(self, timestep, kind, **payload):
    if kind not in (SIGNAL, PERTURB):
      raise ValidationError("Unknown event kind %r" % kind)
    self.timestep = int(timestep)
    self.kind = kind
    self.payload = payload

  def __getitem__(self, key):
    return self.payload[key]

  def get(self, key, default=None):
    return self.payload.get(key, default)

  def toJson(self):
    result = {'t': self.timestep, 'kind': self.kind}
    result.update(self.payload)
    return result

  def __repr__(self):
    return "%s@%s" % (self.kind, self.timestep)

def signalEvent(timestep, centre, channel, value=1.0, radius=3, jitter=0):
  return Event(timestep, SIGNAL, centre=[int(c) for c in centre], channel=int(channel),
    value=float(value), radius=int(radius), jitter=int(jitter))

def perturbEvent(timestep, rectangle, fill=0.0):
  return Event(timestep, PERTURB, rectangle=[int(x) for x in rectangle], fill=float(fill))

def parseEvent(item):
  item = dict(item)
  kind = item.pop('kind', None)
  timestep = item.pop('t', item.pop('timestep', None))
  if timestep is None:
    raise ValidationError("Event %s has no timestep" % item)
  if kind == SIGNAL:
    return signalEvent(timestep, item['centre'], item['channel'], item.get('value', 1.0),
      item.get('radius', 3), item.get('jitter', 0))
  if kind == PERTURB:
    return perturbEvent(timestep, item['rectangle'], item.get('fill', 0.0))
  raise ValidationError("Unknown event kind %r" % kind)

class EventScript():
  """ An ordered list of events.
      >>> s = EventScript.parse([{'kind': 'signal', 'every': 150, 'centre': [30, 30], 'channel': 4}], steps=20000)
      >>> len(s), s.events[0], s.events[-1]
      (133, signal@150, signal@19950)
      >>> EventScript([perturbEvent(5, (0, 0, 1, 1)), perturbEvent(2, (0, 0, 1, 1))])
      Traceback (most recent call last):
      ...
      nca.errors.ValidationError: Event timesteps must be nondecreasing: 5 then 2
  """
  def __init__(self, events=()):
    self.events = list(events)
    for a, b in zip(self.events, self.events[1:]):
      if b.timestep < a.timestep:
        raise ValidationError("Event timesteps must be nondecreasing: %s then %s" % (a.timestep, b.timestep))

  @classmethod
  def parse(cls, document, steps=None):
    """ Build a script from a parsed document, expanding periodic signals up to steps. """
    if document is None:
      return cls()
    if isinstance(document, dict):
      document = document.get('events', [])
    events = []
    for item in document:
      if 'every' in item:
        item = dict(item)
        every = int(item.pop('every'))
        start = int(item.pop('start', every))
        until = item.pop('until', steps)
        if until is None:
          raise ValidationError("Periodic event needs 'until' or a known rollout length")
        if every <= 0:
          raise ValidationError("Periodic events need a positive period, got %s" % every)
        for t in range(start, int(until), every):
          events.append(parseEvent(dict(item, t=t)))
      else:
        events.append(parseEvent(item))
    events.sort(key=lambda e: e.timestep)
    return cls(events)

  @classmethod
  def load(cls, path, steps=None):
    with open(path) as f:
      return cls.parse(yaml.safe_load(f), steps)

  def __len__(self):
    return len(self.events)

  def __iter__(self):
    return iter(self.events)

  def at(self, timestep):
    return [e for e in self.events if e.timestep == timestep]

  def count(self, kind):
    return sum(1 for e in self.events if e.kind == kind)

  def toJson(self):
    return [e.toJson() for e in self.events]

  def validate(self, height, width, channels):
    """ Reject out-of-bounds events before a rollout starts.
        >>> EventScript([signalEvent(3, (70, 5), 4)]).validate(60, 60, 17)
        Traceback (most recent call last):
        ...
        nca.errors.ValidationError: Signal centre [70, 5] at t=3 is outside a 60x60 grid
    """
    for e in self.events:
      if e.timestep < 0:
        raise ValidationError("Event at negative timestep %s" % e.timestep)
      if e.kind == PERTURB:
        checkRectangle(e['rectangle'], height, width)
      else:
        row, col = e['centre']
        if not (0 <= row < height and 0 <= col < width):
          raise ValidationError("Signal centre %s at t=%s is outside a %sx%s grid" % (e['centre'], e.timestep, height, width))
        if not 0 <= e['channel'] < channels:
          raise ValidationError("Signal channel %s at t=%s; the grid has %s channels" % (e['channel'], e.timestep, channels))
        if e['radius'] < 0 or e['jitter'] < 0:
          raise ValidationError("Signal radius and jitter must be nonnegative at t=%s" % e.timestep)

  def resolve(self, seed, height, width):
    """ Apply jitter (clamped to the grid) and return the concrete script that a rollout runs.
        >>> s = EventScript([signalEvent(1, (0, 0), 4, jitter=5)]).resolve(9, 10, 10)
        >>> all(0 <= c < 10 for c in s.events[0]['centre']), s.events[0]['jitter']
        (True, 0)
    """
    resolved = []
    for index, e in enumerate(self.events):
      if e.kind == SIGNAL and e['jitter'] > 0:
        dr, dc = rng.jitter(seed, index, e['jitter'])
        row = min(max(e['centre'][0] + dr, 0), height - 1)
        col = min(max(e['centre'][1] + dc, 0), width - 1)
        e = signalEvent(e.timestep, (row, col), e['channel'], e['value'], e['radius'])
      resolved.append(copy.deepcopy(e))
    return EventScript(resolved)

  def withoutSignalsAfter(self, timestep):
    """ The same script with every signal at or after timestep removed. """
    kept = [e for e in self.events if e.kind != SIGNAL or e.timestep < timestep]
    logging.debug("Suppressed %s signals from t=%s", len(self.events) - len(kept), timestep)
    return EventScript(kept)

def signalDisc(height, width, centre, radius):
  """ Cells within radius of centre (Euclidean, no wrap-around).
      >>> int(signalDisc(9, 9, (4, 4), 1).sum()), int(signalDisc(9, 9, (0, 0), 0).sum())
      (5, 1)
  """
  rows, cols = np.ogrid[:height, :width]
  return (rows - centre[0]) ** 2 + (cols - centre[1]) ** 2 <= radius * radius
