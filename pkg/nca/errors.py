""" Exception types shared by the engine, the analyses and the pipeline.
    Everything derives from NcaScopeError so the CLI can map failures to exit codes.
"""

class NcaScopeError(Exception):
  pass

class ContractError(NcaScopeError):
  """ Shapes or dimensions that don't fit together, e.g. a grid with the wrong channel count. """
  pass

class ValidationError(NcaScopeError):
  """ Bad user input caught before any work starts: events, rectangles, parameters. """
  pass

class FormatError(NcaScopeError):
  """ A binary artifact file can't be read. """
  pass

class CorruptHeaderError(FormatError):
  pass

class TruncatedFileError(FormatError):
  pass

class VersionMismatchError(FormatError):
  pass

class TrainingDiverged(NcaScopeError):
  """ A loss went non-finite.
      >>> str(TrainingDiverged(12, 'nan'))
      'Training diverged at epoch 12: loss is nan'
  """
  def __init__(self, epoch, loss):
    super().__init__("Training diverged at epoch %s: loss is %s" % (epoch, loss))
    self.epoch = epoch

class EmptyCloudError(NcaScopeError):
  pass

class ComplexTooLarge(NcaScopeError):
  """ The Rips complex would be too big to reduce in memory. """
  def __init__(self, dim, count, limit):
    super().__init__(
      "The Rips complex has %s simplices of dimension %s (limit %s). "
      "Subsample the cloud first (maxmin budget) or lower the maximum radius." % (count, dim, limit))
    self.dim = dim
    self.count = count

class ConfigError(NcaScopeError):
  pass

class StageError(NcaScopeError):
  """ A pipeline stage failed; names the stage and the underlying cause.
      >>> str(StageError('Pca', ValueError('k too large')))
      'Stage Pca failed: ValueError: k too large'
  """
  def __init__(self, stage, cause):
    super().__init__("Stage %s failed: %s: %s" % (stage, cause.__class__.__name__, cause))
    self.stage = stage
    self.cause = cause
