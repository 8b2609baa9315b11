import hashlib
import io
import logging
import os
import pathlib
import time
import yaml

import stages
from nca.errors import ConfigError, StageError
from stages import Stage

VERSION = 1
ATTRIBUTES = ('version', 'seed', 'outdir', 'stages')
STAGES = {name: value for name, value in vars(stages).items()
  if isinstance(value, type) and issubclass(value, Stage) and value is not Stage}

def fileHash(path):
  sha = hashlib.sha256()
  with open(path, 'rb') as f:
    for block in iter(lambda: f.read(1 << 20), b''):
      sha.update(block)
  return sha.hexdigest()

class Experiment:
  """ Holds the attributes and the ordered stages of one pipeline run.
  """
  def __init__(self, outdir=None):
    self.version = None
    self.seed = None
    self.outdir = outdir
    self.stages = []
    self.including = []  # files being loaded, innermost last
    self.artifacts = []
    self.reports = []
    self.betti = {}  # diagram path -> BettiReport

  def addConfig(self, config):
    """ Add attributes and stages from various sources, distinguished by type.
      >>> e = Experiment()
      >>> e.addConfig({'seed': 3, 'stages': [{'Pca': {'cloud': 'c.csv', 'k': 3}}, {'name': 'Scatter', 'cloud': 'c.csv', 'out': 'c.svg'}]})
      >>> print(e)
      Experiment (seed 3):
        Pca
        Scatter
      >>> e.addConfig({'seed': 4})
      Traceback (most recent call last):
      ...
      nca.errors.ConfigError: Conflicting seeds: 3 vs. 4
      >>> e.addConfig(['Unknown'])
      Traceback (most recent call last):
      ...
      nca.errors.ConfigError: Can't load stage Unknown: {} - KeyError
    """
    if config is None:
      return
    logging.debug("Loading config: %s", config)
    if isinstance(config, io.IOBase):
      self.addConfig(self.parse(config))
    elif isinstance(config, list):
      for item in config:
        self.addConfig(item)
    elif isinstance(config, str):
      self.addStageNamed(config)
    elif isinstance(config, dict) and len(config) > 0:
      first = str(list(config.keys())[0])
      if 'name' in config:
        # Stage constructor arguments + a class name
        self.addStageNamed(config['name'], config)
      elif len(config) == 1 and first[:1].isupper():
        # A single capitalized word: a stage with that name, given a map of arguments
        args = config[first]
        if args is not None and not isinstance(args, dict):
          raise ConfigError("Stage %s takes a map of arguments, got %r" % (first, args))
        self.addStageNamed(first, args or {})
      else:
        unknown = sorted(str(k) for k in config if k not in ATTRIBUTES)
        if unknown:
          raise ConfigError("Unknown experiment attributes: %s" % ', '.join(unknown))
        self.setVersion(config.get('version', None))
        self.setSeed(config.get('seed', None))
        self.setOutdir(config.get('outdir', None))
        self.addConfig(config.get('stages', None))
    else:
      logging.warning("Unrecognized item: %s", config)

  def parse(self, stream):
    try:
      return yaml.safe_load(stream)
    except yaml.YAMLError as e:
      raise ConfigError("Can't parse %s: %s" % (getattr(stream, 'name', 'config'), e))

  def addStageNamed(self, name, args=None):
    """ Adds a stage with the given name, if we know it, passing it the given arguments.
        Before that, if name is a file next to the config being read or in the current
        directory, optionally with the suffix ".yml" or ".yaml", load the config from that file.
        Otherwise, raise a ConfigError.
    """
    logging.debug("Loading stage: %s", name)
    name = str(name)
    for extension in ['', '.yml', '.yaml']:
      if self.tryLoad(name + extension):
        return
    args = dict(args or {})
    args.pop('name', None)  # so it doesn't get passed to the stage constructor
    try:
      self.stages.append(STAGES[name](**args))
    except (KeyError, TypeError) as e:
      raise ConfigError("Can't load stage " + name + ': ' + str(args) + " - " + e.__class__.__name__)

  def searchPath(self):
    if self.including:
      return [self.including[-1].parent, pathlib.Path('.')]
    return [pathlib.Path('.')]

  def tryLoad(self, filename):
    """ If filename exists, load the config from it and return True.
        Otherwise, return False.
    """
    for base in self.searchPath():
      path = base / filename
      if path.is_file():
        self.load(path)
        return True
    return False

  def load(self, path):
    """ Load a config file; it may include others by name, but never itself. """
    path = pathlib.Path(path).resolve()
    if path in self.including:
      chain = [p.name for p in self.including[self.including.index(path):]] + [path.name]
      raise ConfigError("Cyclic include: %s" % ' -> '.join(chain))
    try:
      stream = path.open()
    except OSError as e:
      raise ConfigError("Can't read %s: %s" % (path, e.strerror))
    self.including.append(path)
    try:
      with stream:
        self.addConfig(self.parse(stream))
    finally:
      self.including.pop()

  def __str__(self):
    """ >>> print(Experiment())
        (empty Experiment)
    """
    if not self.stages:
      return "(empty Experiment)"
    return "Experiment (seed %s):\n  %s" % (self.seed, '\n  '.join(str(s) for s in self.stages))

  def setVersion(self, version):
    if version is None:
      return
    if version != VERSION:
      raise ConfigError("Config version %s isn't supported; this is version %s" % (version, VERSION))
    if self.version is not None and self.version != version:
      raise ConfigError("Conflicting versions: " + str(self.version) + " vs. " + str(version))
    self.version = version

  def setSeed(self, seed):
    if seed is None:
      return
    if self.seed is not None and self.seed != seed:
      raise ConfigError("Conflicting seeds: " + str(self.seed) + " vs. " + str(seed))
    self.seed = int(seed)

  def setOutdir(self, outdir):
    if outdir is None:
      return
    if self.outdir is not None and self.outdir != outdir:
      raise ConfigError("Conflicting output directories: " + str(self.outdir) + " vs. " + str(outdir))
    self.outdir = str(outdir)

  def path(self, name):
    """ Where a stage's file lives: relative names are inside the output directory.
        >>> Experiment('runs').path('c.csv'), Experiment('runs').path('/tmp/c.csv')
        ('runs/c.csv', '/tmp/c.csv')
    """
    return os.path.join(self.outdir or '.', name)

  def report(self, line):
    logging.info(line)
    self.reports.append(line)

  def validate(self):
    """ Check that every stage reads only files written by an earlier stage or already on disk,
        and that no two stages write the same file.
        >>> e = Experiment('nowhere')
        >>> e.addConfig([{'Pca': {'cloud': 'c.csv', 'out': 'b.pca'}}])
        >>> e.validate()
        Traceback (most recent call last):
        ...
        nca.errors.ConfigError: Stage Pca reads c.csv, which no earlier stage writes and which doesn't exist
    """
    writers = {}
    for stage in self.stages:
      for name in stage.inputs():
        if name not in writers and not os.path.exists(self.path(name)):
          raise ConfigError("Stage %s reads %s, which no earlier stage writes and which doesn't exist" % (stage, name))
      for name in stage.outputs():
        if name in writers:
          raise ConfigError("Stages %s and %s both write %s" % (writers[name], stage, name))
        writers[name] = stage

  def applyStage(self, stage):
    """ Apply one stage, wrapping any failure with the stage's name. Returns the seconds taken. """
    started = time.perf_counter()
    try:
      stage.apply(self)
    except Exception as e:
      raise StageError(str(stage), e) from e
    return time.perf_counter() - started

  def run(self):
    """ Run every stage in order and write manifest.yml. Returns the artifact records.
        >>> import tempfile
        >>> with tempfile.TemporaryDirectory() as d:
        ...   e = Experiment(d)
        ...   e.run(), yaml.safe_load(open(os.path.join(d, 'manifest.yml')))['artifacts']
        ([], [])
    """
    if self.seed is None:
      self.seed = 0
    self.validate()
    os.makedirs(self.outdir or '.', exist_ok=True)
    self.artifacts = []
    for index, stage in enumerate(self.stages):
      logging.info("Stage %s of %s: %s", index + 1, len(self.stages), stage)
      seconds = self.applyStage(stage)
      for name in stage.outputs():
        if not os.path.exists(self.path(name)):
          raise StageError(str(stage), FileNotFoundError("%s was not written" % name))
        self.artifacts.append({'path': name, 'sha256': fileHash(self.path(name)), 'stage': str(stage),
          'seconds': round(seconds, 3)})
    self.writeManifest()
    return self.artifacts

  def manifestPath(self):
    return self.path('manifest.yml')

  def writeManifest(self):
    with open(self.manifestPath(), 'w') as f:
      yaml.safe_dump({'version': VERSION, 'seed': self.seed, 'artifacts': self.artifacts}, f, sort_keys=False)
    logging.info("Wrote %s artifacts to %s", len(self.artifacts), self.manifestPath())
